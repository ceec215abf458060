//! End-to-end walk over every endpoint, validating each response against
//! the wire schemas.

use reqwest::StatusCode;
use serde_json::{json, Value};

use super::{check_schema, Reply, TestServer};

pub struct Contract<'a> {
    server: &'a TestServer,
    pub checks: usize,
}

fn fail(context: &str, detail: impl std::fmt::Display) -> String {
    format!("{context}: {detail}")
}

impl<'a> Contract<'a> {
    pub fn new(server: &'a TestServer) -> Self {
        Self { server, checks: 0 }
    }

    fn expect(&mut self, context: &str, reply: &Reply, status: StatusCode, definition: &str) -> Result<Value, String> {
        if reply.status != status {
            return Err(fail(
                context,
                format!("status {} (wanted {status}): {}", reply.status, String::from_utf8_lossy(&reply.bytes)),
            ));
        }
        if !reply.content_type.starts_with("application/json") {
            return Err(fail(context, format!("content type {:?}", reply.content_type)));
        }
        let body: Value = serde_json::from_slice(&reply.bytes).map_err(|err| fail(context, err))?;
        check_schema(definition, &body).map_err(|err| fail(context, err))?;
        self.checks += 1;
        Ok(body)
    }

    fn expect_error(&mut self, context: &str, reply: &Reply, status: StatusCode, code: &str) -> Result<(), String> {
        let body = self.expect(context, reply, status, "error")?;
        if body["error"] != code {
            return Err(fail(context, format!("error code {} (wanted {code})", body["error"])));
        }
        Ok(())
    }

    /// GETs twice and requires identical status and bytes.
    async fn get_idempotent(&mut self, path: &str) -> Result<Reply, String> {
        let first = self.server.get(path).await;
        let second = self.server.get(path).await;
        if first.status != second.status || first.bytes != second.bytes {
            return Err(fail(path, "GET is not idempotent"));
        }
        self.checks += 1;
        Ok(first)
    }

    pub async fn run(&mut self) -> Result<(), String> {
        let s = self.server;

        // Units.
        let units = self.get_idempotent("/units").await?;
        self.expect("GET /units (empty)", &units, StatusCode::OK, "unit_list")?;
        let doc = json!({"units": [
            {"id": "g2u1", "title": "Grade 2 / Unit 1", "grade_label": "Grade 2",
             "words": ["spring", "summer", "autumn", "winter", "warm", "hot", "cool", "cold", "lake", "hill"]},
            {"title": "Grade 2 / Unit 2", "grade_label": "Grade 2", "words": ["bus", "picnic"]}
        ]});
        let imported = s.post("/units/import", &doc).await;
        let ids = self.expect("POST /units/import", &imported, StatusCode::OK, "import_result")?;
        if ids["ids"].as_array().map(Vec::len) != Some(2) || ids["ids"][0] != "g2u1" {
            return Err(fail("POST /units/import", format!("ids {}", ids["ids"])));
        }
        let reply = s.post("/units/import", &json!({"units": [{"title": "x", "words": ["a"]}]})).await;
        self.expect_error("import missing grade_label", &reply, StatusCode::BAD_REQUEST, "schema_violation")?;
        let reply = s.post("/units/import", &json!({"units": [{"id": "g2u1", "title": "x", "grade_label": "g", "words": ["a"]}]})).await;
        self.expect_error("import duplicate id", &reply, StatusCode::CONFLICT, "duplicate_id")?;
        let units = self.get_idempotent("/units").await?;
        let listed = self.expect("GET /units", &units, StatusCode::OK, "unit_list")?;
        if listed["units"].as_array().map(Vec::len) != Some(2) {
            return Err(fail("GET /units", "expected 2 units"));
        }

        // Material sets.
        let reply = s.post("/material-sets", &json!({"unit_id": "g2u1", "theme": "school trip"})).await;
        let trip = self.expect("POST /material-sets", &reply, StatusCode::ACCEPTED, "material_set_submission")?;
        let reply = s.post("/material-sets", &json!({"unit_id": "g2u1"})).await;
        let untitled = self.expect("POST /material-sets without theme", &reply, StatusCode::ACCEPTED, "material_set_submission")?;
        let reply = s.post("/material-sets", &json!({"unit_id": "nope", "theme": "x"})).await;
        self.expect_error("POST /material-sets unknown unit", &reply, StatusCode::NOT_FOUND, "unknown_unit")?;
        let reply = s.post_raw("/material-sets", "{\"unit_id\": ").await;
        self.expect_error("POST /material-sets truncated body", &reply, StatusCode::BAD_REQUEST, "malformed_body")?;
        let reply = s.post("/material-sets", &json!({"theme": "x"})).await;
        self.expect_error("POST /material-sets missing unit_id", &reply, StatusCode::BAD_REQUEST, "malformed_body")?;

        let job_path = format!("/jobs/{}", trip["job_id"].as_str().unwrap());
        let reply = s.get(&job_path).await;
        self.expect("GET /jobs/{id} in flight", &reply, StatusCode::OK, "job")?;
        let finished = s.wait_job(trip["job_id"].as_str().unwrap()).await;
        check_schema("job", &finished).map_err(|err| fail("job", err))?;
        if finished["state"] != "Succeeded" {
            return Err(fail("material set job", finished));
        }
        s.wait_job(untitled["job_id"].as_str().unwrap()).await;
        let reply = self.get_idempotent(&job_path).await?;
        self.expect("GET /jobs/{id}", &reply, StatusCode::OK, "job")?;
        let reply = s.get("/jobs/nope").await;
        self.expect_error("GET /jobs unknown", &reply, StatusCode::NOT_FOUND, "unknown_job")?;

        let set_id = trip["material_set_id"].as_str().unwrap().to_owned();
        let set_path = format!("/material-sets/{set_id}");
        let reply = self.get_idempotent(&set_path).await?;
        let set = self.expect("GET /material-sets/{id}", &reply, StatusCode::OK, "material_set")?;
        let lines = set["script"]["lines"].as_array().cloned().unwrap_or_default();
        if set["state"] != "Ready" || lines.len() != 10 {
            return Err(fail("GET /material-sets/{id}", "expected a Ready set with 10 lines"));
        }
        for line in &lines {
            let sentence = line["sentence"].as_str().unwrap();
            let spans = line["highlights"].as_array().unwrap();
            if spans.is_empty() || line["sticker_id"].is_null() {
                return Err(fail("script line", line));
            }
            for span in spans {
                let (start, end) = (span["start"].as_u64().unwrap() as usize, span["end"].as_u64().unwrap() as usize);
                if sentence.get(start..end).is_none() {
                    return Err(fail("highlight span", span));
                }
            }
        }
        let reply = s.get("/material-sets/nope").await;
        self.expect_error("GET /material-sets unknown", &reply, StatusCode::NOT_FOUND, "unknown_material_set")?;

        let reply = self.get_idempotent("/material-sets?unit_id=g2u1").await?;
        let variants = self.expect("GET /material-sets?unit_id", &reply, StatusCode::OK, "variant_list")?;
        if variants["variants"].as_array().map(Vec::len) != Some(2) {
            return Err(fail("variants", variants));
        }
        let reply = s.get("/material-sets?unit_id=nope").await;
        self.expect_error("variants unknown unit", &reply, StatusCode::NOT_FOUND, "unknown_unit")?;
        let reply = s.get("/material-sets").await;
        self.expect_error("variants without unit", &reply, StatusCode::BAD_REQUEST, "malformed_query")?;

        // Assets.
        let old_sticker = lines[0]["sticker_id"].as_str().unwrap().to_owned();
        let asset = self.get_idempotent(&format!("/assets/{old_sticker}")).await?;
        if asset.status != StatusCode::OK || asset.content_type != "image/png" || !asset.bytes.starts_with(b"\x89PNG") {
            return Err(fail("GET /assets/{id}", format!("{} {}", asset.status, asset.content_type)));
        }
        let reply = s.get("/assets/nope").await;
        self.expect_error("GET /assets unknown", &reply, StatusCode::NOT_FOUND, "unknown_sticker")?;

        // Refine.
        let refine_path = format!("/stickers/{old_sticker}/refine");
        let reply = s.post(&refine_path, &json!({"prompt": "Spring flowers on a school bus"})).await;
        let refine = self.expect("POST /stickers/{id}/refine", &reply, StatusCode::ACCEPTED, "job_submission")?;
        let job = s.wait_job(refine["job_id"].as_str().unwrap()).await;
        if job["state"] != "Succeeded" || job["kind"] != "Sticker" {
            return Err(fail("refine job", job));
        }
        let reply = s.get(&set_path).await;
        let after = self.expect("GET /material-sets/{id} after refine", &reply, StatusCode::OK, "material_set")?;
        let new_sticker = after["script"]["lines"][0]["sticker_id"].as_str().unwrap();
        if new_sticker == old_sticker || Some(new_sticker) != job["result_ref"].as_str() {
            return Err(fail("refine repoint", after));
        }
        if s.get(&format!("/assets/{old_sticker}")).await.status != StatusCode::OK {
            return Err(fail("refine", "superseded asset no longer fetchable"));
        }
        let reply = s.post(&refine_path, &json!({"prompt": "again"})).await;
        self.expect_error("refine superseded sticker", &reply, StatusCode::CONFLICT, "sticker_not_current")?;
        let reply = s.post(&format!("/stickers/{new_sticker}/refine"), &json!({"prompt": "  "})).await;
        self.expect_error("refine empty prompt", &reply, StatusCode::BAD_REQUEST, "empty_prompt")?;
        let reply = s.post("/stickers/nope/refine", &json!({"prompt": "x"})).await;
        self.expect_error("refine unknown sticker", &reply, StatusCode::NOT_FOUND, "unknown_sticker")?;

        // Explore.
        let reply = s.post("/explore", &json!({"material_set_id": set_id, "word_a": "lake", "word_b": "hill", "seed": 5})).await;
        let explore = self.expect("POST /explore", &reply, StatusCode::ACCEPTED, "job_submission")?;
        let job = s.wait_job(explore["job_id"].as_str().unwrap()).await;
        if job["state"] != "Succeeded" || job["kind"] != "Exploration" {
            return Err(fail("explore job", job));
        }
        let exploration_path = format!("/explorations/{}", job["result_ref"].as_str().unwrap());
        let reply = self.get_idempotent(&exploration_path).await?;
        let chain = self.expect("GET /explorations/{id}", &reply, StatusCode::OK, "exploration")?;
        let words = chain["chain"].as_array().unwrap();
        if words.first() != Some(&json!("lake")) || words.last() != Some(&json!("hill")) {
            return Err(fail("exploration endpoints", chain));
        }
        if chain["stickers"].as_object().map(|m| m.len()) != Some(words.len()) {
            return Err(fail("exploration stickers", chain));
        }
        let reply = s.post("/explore", &json!({"material_set_id": set_id, "word_a": "lake", "word_b": "lake"})).await;
        self.expect_error("explore identical words", &reply, StatusCode::UNPROCESSABLE_ENTITY, "identical_words")?;
        let reply = s.post("/explore", &json!({"material_set_id": set_id, "word_a": "lake", "word_b": "river"})).await;
        self.expect_error("explore word not in set", &reply, StatusCode::UNPROCESSABLE_ENTITY, "word_not_in_set")?;
        let reply = s.post("/explore", &json!({"material_set_id": "nope", "word_a": "lake", "word_b": "hill"})).await;
        self.expect_error("explore unknown set", &reply, StatusCode::NOT_FOUND, "unknown_material_set")?;
        let reply = s.get("/explorations/nope").await;
        self.expect_error("GET /explorations unknown", &reply, StatusCode::NOT_FOUND, "unknown_exploration")?;

        // Export.
        let export = self.get_idempotent(&format!("{set_path}/export")).await?;
        if export.status != StatusCode::OK || export.content_type != "application/zip" || !export.bytes.starts_with(b"PK") {
            return Err(fail("GET /material-sets/{id}/export", format!("{} {}", export.status, export.content_type)));
        }
        let reply = s.get("/material-sets/nope/export").await;
        self.expect_error("export unknown set", &reply, StatusCode::NOT_FOUND, "unknown_material_set")?;

        // Routing.
        let reply = s.get("/no/such/route").await;
        self.expect_error("unknown route", &reply, StatusCode::NOT_FOUND, "not_found")?;
        let reply = s.post("/units", &json!({})).await;
        self.expect_error("wrong method", &reply, StatusCode::METHOD_NOT_ALLOWED, "method_not_allowed")?;
        Ok(())
    }
}
