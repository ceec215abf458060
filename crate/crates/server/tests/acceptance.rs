//! Acceptance suite: one pass/fail line per criterion, non-zero exit on any
//! failure. Runs entirely against mock providers.

mod support;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::future::Future;
use std::io::{Cursor, Read};
use std::pin::Pin;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use storyvocab_core::domain::{
    ExplorationId, JobState, MaterialSet, MaterialSetState, StickerId, StoryScript, Theme, UnitId,
    Word,
};
use storyvocab_core::orchestrator::MockImageProvider;
use storyvocab_core::parser::{
    match_word_occurrences, parse_exploration_output, parse_script_output, validate_script,
};
use storyvocab_core::store::{AssetOwner, BundleManifest};
use storyvocab_core::testkit::{
    oracle_occurrences, random_highlight_case, words, Harness, ScriptedTextProvider,
    GOLDEN_EXPLORATION_OUTPUT, GOLDEN_SCRIPT_OUTPUT, TEN_WORDS,
};
use support::contract::Contract;
use support::TestServer;

type Outcome = Result<String, String>;
type Criterion = fn() -> Pin<Box<dyn Future<Output = Outcome> + Send>>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(result: Result<T, E>, context: &str) -> Result<T, String> {
    result.map_err(|err| format!("{context}: {err}"))
}

async fn golden_script() -> Outcome {
    let request = words(&["spring", "cool"]);
    let started = Instant::now();
    let lines = ok(parse_script_output(GOLDEN_SCRIPT_OUTPUT, &request), "parse")?;
    let elapsed = started.elapsed();
    let expect = [
        (
            "In spring, the flowers bloom and we go on a school trip to the park.",
            "Children on a school trip in a park full of blooming flowers representing spring.",
        ),
        (
            "It's cool in the forest, and we love exploring it.",
            "A group of students exploring a cool, shaded forest.",
        ),
    ];
    ensure!(lines.len() == 2, "{} lines", lines.len());
    for (line, (sentence, prompt)) in lines.iter().zip(expect) {
        ensure!(line.sentence == sentence, "sentence {:?}", line.sentence);
        ensure!(line.sticker_prompt == prompt, "prompt {:?}", line.sticker_prompt);
    }
    let script = StoryScript {
        theme: ok(Theme::new("school trip"), "theme")?,
        lines,
    };
    ok(validate_script(&script, &request).map_err(|v| format!("{v:?}")), "validate")?;
    ensure!(elapsed < Duration::from_millis(10), "parse took {elapsed:?}");
    Ok(format!("parsed in {elapsed:?}"))
}

async fn golden_exploration() -> Outcome {
    let (lake, hill) = (ok(Word::new("lake"), "word")?, ok(Word::new("hill"), "word")?);
    let started = Instant::now();
    let parsed = ok(parse_exploration_output(GOLDEN_EXPLORATION_OUTPUT, &lake, &hill), "parse")?;
    let elapsed = started.elapsed();
    let chain: Vec<&str> = parsed.chain.iter().map(Word::as_str).collect();
    ensure!(chain == ["lake", "geneva", "chocolate", "alps", "hill"], "chain {chain:?}");
    let expect = [
        ("geneva", "Cityscape of Geneva, Switzerland, with the iconic Jet d'eau fountain and lake Geneva in the foreground."),
        ("chocolate", "Swiss chocolate bars with the Swiss alps mountain in the background."),
        ("alps", "The majestic Swiss alps on a sunny day, with picturesque ski resorts and chalets"),
    ];
    ensure!(parsed.added_prompts.len() == 3, "{} prompts", parsed.added_prompts.len());
    for (word, prompt) in expect {
        let got = parsed.added_prompts.get(&ok(Word::new(word), "word")?);
        ensure!(got.map(String::as_str) == Some(prompt), "{word}: {got:?}");
    }
    ensure!(elapsed < Duration::from_millis(10), "parse took {elapsed:?}");
    Ok(format!("parsed in {elapsed:?}"))
}

async fn submit_and_wait(h: &Harness, unit: &UnitId, theme: &str, seed: Option<u64>) -> Result<(MaterialSet, storyvocab_core::domain::GenerationJob), String> {
    let sub = ok(h.orchestrator.submit_material_set(unit, ok(Theme::new(theme), "theme")?, seed), "submit")?;
    let job = ok(h.orchestrator.wait_for(&sub.job_id).await, "wait")?;
    let set = ok(h.store.load_material_set(&sub.material_set_id), "load set")?;
    Ok((set, job))
}

async fn pinned_run() -> Result<(Vec<u8>, Duration, MaterialSet, Harness), String> {
    let h = Harness::mock();
    let unit = h.import("g2u1", &TEN_WORDS);
    let started = Instant::now();
    let (set, job) = submit_and_wait(&h, &unit, "school trip", Some(2024)).await?;
    let elapsed = started.elapsed();
    ensure!(job.state == JobState::Succeeded, "job {job:?}");
    let archive = ok(h.store.export_bundle(&set.id), "export")?;
    Ok((archive, elapsed, set, h))
}

async fn mock_pipeline() -> Outcome {
    let (first, elapsed, set, h) = pinned_run().await?;
    ensure!(set.state == MaterialSetState::Ready, "state {:?}", set.state);
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    let script = set.script.as_ref().ok_or("no script")?;
    ensure!(script.lines.len() == 10, "{} lines", script.lines.len());
    ensure!(set.stickers.len() == 10, "{} stickers", set.stickers.len());
    for line in &script.lines {
        ensure!(!match_word_occurrences(&line.word, &line.sentence).is_empty(), "{:?} not in {:?}", line.word, line.sentence);
        let sticker = set.stickers.get(&line.word).ok_or("missing sticker")?;
        ok(h.store.load_asset(sticker), "asset")?;
    }
    let (second, _, _, _) = pinned_run().await?;
    ensure!(first == second, "archives differ between runs");
    Ok(format!("Ready in {elapsed:?}; archives identical ({} bytes)", first.len()))
}

async fn retry_contract() -> Outcome {
    let text = Arc::new(ScriptedTextProvider::always_invalid());
    let h = Harness::with_providers(text.clone(), Arc::new(MockImageProvider));
    let unit = h.import("u", &["spring", "cool"]);
    let (set, job) = submit_and_wait(&h, &unit, "", None).await?;
    ensure!(job.state == JobState::Failed, "always-invalid job ended {:?}", job.state);
    ensure!(job.attempts == 3 && text.calls() == 3, "attempts {} calls {}", job.attempts, text.calls());
    ensure!(set.state == MaterialSetState::Failed, "set {:?}", set.state);

    let text = Arc::new(ScriptedTextProvider::new(vec![false, false, true]));
    let h = Harness::with_providers(text.clone(), Arc::new(MockImageProvider));
    let unit = h.import("u", &["spring", "cool"]);
    let (set, job) = submit_and_wait(&h, &unit, "", None).await?;
    ensure!(job.state == JobState::Succeeded, "flaky job ended {:?}", job.state);
    ensure!(job.attempts == 3, "attempts {}", job.attempts);
    ensure!(set.state == MaterialSetState::Ready, "set {:?}", set.state);
    Ok("fails after 3 attempts; succeeds on attempt 3".into())
}

async fn refinement_history() -> Outcome {
    let h = Harness::mock();
    let unit = h.import("u", &["spring", "cool", "cold"]);
    let (set, _) = submit_and_wait(&h, &unit, "school trip", Some(8)).await?;
    let cool = ok(Word::new("cool"), "word")?;
    let original = set.stickers.get(&cool).cloned().ok_or("no sticker")?;
    let mut current = original.clone();
    for prompt in ["A chilly forest path", "Snowy trees at dawn"] {
        let job = ok(h.orchestrator.submit_refine(&current, prompt), "refine")?;
        let done = ok(h.orchestrator.wait_for(&job).await, "wait")?;
        ensure!(done.state == JobState::Succeeded, "refine job {done:?}");
        current = ok(StickerId::new(done.result_ref.unwrap_or_default()), "result id")?;
    }
    let history = ok(h.store.asset_history(&current), "history")?;
    let links = history.iter().filter(|a| a.supersedes.is_some()).count();
    ensure!(history.len() == 3 && links == 2, "history {} assets, {links} links", history.len());
    ensure!(history[2].id == original, "chain does not end at the original");
    let distinct: HashSet<&StickerId> = history.iter().map(|a| &a.id).collect();
    ensure!(distinct.len() == 3, "cycle in supersedes chain");
    let reloaded = ok(h.store.load_material_set(&set.id), "reload")?;
    ensure!(reloaded.stickers.get(&cool) == Some(&current), "map does not point at the head");
    for asset in &history {
        ok(h.store.load_asset(&asset.id), "asset")?;
        ok(h.store.load_blob(&asset.image_ref), "blob")?;
    }
    Ok("chain of length 2, head is current, 3 assets loadable".into())
}

async fn exploration_invariants() -> Outcome {
    let h = Harness::mock();
    let unit = h.import("u", &TEN_WORDS);
    let (set, _) = submit_and_wait(&h, &unit, "Switzerland", Some(5)).await?;
    let words: Vec<Word> = set.script.as_ref().ok_or("no script")?.words().cloned().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0xe8);
    let mut new_stickers = 0;
    for run in 0..100 {
        let pair: Vec<&Word> = words.choose_multiple(&mut rng, 2).collect();
        let (a, b) = (pair[0], pair[1]);
        let job = ok(h.orchestrator.submit_exploration(&set.id, a.as_str(), b.as_str(), Some(rng.gen())), "submit")?;
        let done = ok(h.orchestrator.wait_for(&job).await, "wait")?;
        ensure!(done.state == JobState::Succeeded, "run {run}: {done:?}");
        let id = ok(ExplorationId::new(done.result_ref.unwrap_or_default()), "result id")?;
        let chain = ok(h.store.load_exploration(&id), "load")?;
        ensure!(chain.chain.first() == Some(a) && chain.chain.last() == Some(b), "run {run}: endpoints {:?}", chain.chain);
        let distinct: HashSet<&Word> = chain.chain.iter().collect();
        ensure!(distinct.len() == chain.chain.len(), "run {run}: repeated words {:?}", chain.chain);
        let keys: BTreeSet<&Word> = chain.added_prompts.keys().collect();
        let interior: BTreeSet<&Word> = chain.interior().iter().collect();
        ensure!(keys == interior, "run {run}: prompt keys {keys:?} vs interior {interior:?}");
        for word in chain.interior() {
            let sticker = chain.stickers.get(word).ok_or(format!("run {run}: no sticker for {word}"))?;
            ensure!(!set.stickers.values().any(|s| s == sticker), "run {run}: reused sticker");
            let owner = ok(h.store.asset_owner(sticker), "owner")?;
            ensure!(owner == AssetOwner::Exploration(id.clone()), "run {run}: owner {owner:?}");
            new_stickers += 1;
        }
        ensure!(chain.stickers.len() == chain.chain.len(), "run {run}: sticker count");
    }
    Ok(format!("100 runs, {new_stickers} interior stickers"))
}

async fn highlight_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6869);
    let mut disagreements = 0;
    let mut first = None;
    for _ in 0..1000 {
        let (word, sentence) = random_highlight_case(&mut rng);
        if match_word_occurrences(&word, &sentence) != oracle_occurrences(&word, &sentence) {
            disagreements += 1;
            first.get_or_insert((word, sentence));
        }
    }
    ensure!(disagreements == 0, "{disagreements} disagreements, first {first:?}");
    Ok("1000 cases, 0 disagreements".into())
}

async fn api_contract() -> Outcome {
    let started = Instant::now();
    let server = TestServer::start().await;
    let mut contract = Contract::new(&server);
    let outcome = contract.run().await;
    let checks = contract.checks;
    server.stop().await;
    outcome?;
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "suite took {elapsed:?}");
    Ok(format!("{checks} checks in {elapsed:?}"))
}

async fn export_round_trip() -> Outcome {
    let h = Harness::mock();
    let unit = h.import("u", &TEN_WORDS);
    let (set, _) = submit_and_wait(&h, &unit, "school trip", Some(3)).await?;
    let script = set.script.as_ref().ok_or("no script")?;
    let bytes = ok(h.store.export_bundle(&set.id), "export")?;
    ensure!(bytes == ok(h.store.export_bundle(&set.id), "export")?, "double export differs");

    let mut archive = ok(zip::ZipArchive::new(Cursor::new(&bytes)), "unzip")?;
    let mut files = HashMap::new();
    for i in 0..archive.len() {
        let mut file = ok(archive.by_index(i), "entry")?;
        let mut data = Vec::new();
        ok(file.read_to_end(&mut data), "read")?;
        files.insert(file.name().to_owned(), data);
    }
    let manifest: BundleManifest = ok(
        serde_json::from_slice(files.get("manifest.json").ok_or("no manifest")?),
        "manifest",
    )?;
    ensure!(manifest.entries.len() == script.lines.len(), "entries {}", manifest.entries.len());
    let entry_words: BTreeSet<&Word> = manifest.entries.iter().map(|e| &e.word).collect();
    let line_words: BTreeSet<&Word> = script.words().collect();
    ensure!(entry_words == line_words, "entries do not biject with lines");
    for (entry, line) in manifest.entries.iter().zip(&script.lines) {
        ensure!(entry.sentence == line.sentence && entry.sticker_prompt == line.sticker_prompt, "entry {entry:?}");
        let png_bytes = files.get(&entry.image_file).ok_or(format!("missing {}", entry.image_file))?;
        let mut reader = ok(png::Decoder::new(png_bytes.as_slice()).read_info(), "png header")?;
        let mut buf = vec![0; reader.output_buffer_size()];
        ok(reader.next_frame(&mut buf), "png frame")?;
    }
    ensure!(files.len() == 2 + script.lines.len(), "{} files", files.len());
    Ok(format!("{} entries, images decode, byte-identical re-export", manifest.entries.len()))
}

fn main() {
    let criteria: [(&str, Criterion); 9] = [
        ("golden script parse", || Box::pin(golden_script())),
        ("golden exploration parse", || Box::pin(golden_exploration())),
        ("end-to-end mock pipeline", || Box::pin(mock_pipeline())),
        ("retry contract", || Box::pin(retry_contract())),
        ("refinement history", || Box::pin(refinement_history())),
        ("exploration invariants", || Box::pin(exploration_invariants())),
        ("highlight matcher equivalence", || Box::pin(highlight_equivalence())),
        ("API contract suite", || Box::pin(api_contract())),
        ("export round-trip", || Box::pin(export_round_trip())),
    ];
    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    let mut failed = 0;
    for (index, (name, criterion)) in criteria.iter().enumerate() {
        let outcome = runtime.block_on(async {
            // A panic inside a criterion counts as a failure, not an abort.
            match tokio::spawn(criterion()).await {
                Ok(outcome) => outcome,
                Err(err) => Err(format!("panicked: {err}")),
            }
        });
        match outcome {
            Ok(detail) => println!("PASS [{}] {name}: {detail}", index + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{}] {name}: {detail}", index + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
