//! Classroom export bundles.
//!
//! A bundle is a zip archive:
//!
//! ```text
//! manifest.json        BundleManifest
//! script.txt           the article, one sentence per line in script order
//! stickers/<word>.png  current sticker of each word, sorted by word key
//! ```
//!
//! Entry timestamps are pinned and entry order is fixed, so exporting an
//! unchanged set yields identical bytes.

use std::collections::HashSet;
use std::io::{Cursor, Write};

use serde::{Deserialize, Serialize};
use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, DateTime, ZipWriter};

use super::{Store, StoreError};
use crate::domain::{MaterialSetId, MaterialSetState, Theme, Timestamp, Word};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub material_set_id: MaterialSetId,
    pub unit_title: String,
    pub theme: Theme,
    pub generated_at: Timestamp,
    pub entries: Vec<BundleEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleEntry {
    pub word: Word,
    pub sentence: String,
    pub sticker_prompt: String,
    pub image_file: String,
}

/// File-system safe stem for a word: its key with anything outside
/// `[a-z0-9-_]` replaced by `_`.
fn file_stem(word: &Word) -> String {
    word.key()
        .chars()
        .map(|c| match c {
            'a'..='z' | '0'..='9' | '-' | '_' => c,
            _ => '_',
        })
        .collect()
}

fn archive_err(err: impl std::fmt::Display) -> StoreError {
    StoreError::Archive(err.to_string())
}

impl Store {
    pub fn export_bundle(&self, id: &MaterialSetId) -> Result<Vec<u8>, StoreError> {
        let set = self.load_material_set(id)?;
        let script = match (&set.state, &set.script) {
            (MaterialSetState::Ready, Some(script)) => script,
            _ => return Err(StoreError::NotReady(id.clone())),
        };
        let unit = self.load_unit(&set.unit_id)?;

        let mut used = HashSet::new();
        let mut entries = Vec::with_capacity(script.lines.len());
        let mut images = Vec::with_capacity(script.lines.len());
        for line in &script.lines {
            let sticker = set.stickers.get(&line.word).ok_or_else(|| {
                StoreError::DanglingReference(format!("no sticker for {}", line.word))
            })?;
            let asset = self.load_asset(sticker)?;
            let stem = file_stem(&line.word);
            let mut name = format!("stickers/{stem}.png");
            let mut n = 2;
            while !used.insert(name.clone()) {
                name = format!("stickers/{stem}-{n}.png");
                n += 1;
            }
            images.push((line.word.key(), name.clone(), asset.image_ref));
            entries.push(BundleEntry {
                word: line.word.clone(),
                sentence: line.sentence.clone(),
                sticker_prompt: line.sticker_prompt.clone(),
                image_file: name,
            });
        }
        images.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));

        let manifest = BundleManifest {
            material_set_id: set.id.clone(),
            unit_title: unit.title,
            theme: set.theme.clone(),
            generated_at: set.created_at,
            entries,
        };
        let manifest_json =
            serde_json::to_vec_pretty(&manifest).expect("manifest always serializes");

        let text = SimpleFileOptions::default()
            .compression_method(CompressionMethod::Deflated)
            .last_modified_time(DateTime::default())
            .unix_permissions(0o644);
        let binary = text.compression_method(CompressionMethod::Stored);

        let mut zip = ZipWriter::new(Cursor::new(Vec::new()));
        zip.start_file("manifest.json", text).map_err(archive_err)?;
        zip.write_all(&manifest_json).map_err(archive_err)?;
        zip.start_file("script.txt", text).map_err(archive_err)?;
        zip.write_all(script.article().as_bytes()).map_err(archive_err)?;
        for (_, name, key) in images {
            let bytes = self.load_blob(&key)?;
            zip.start_file(name, binary).map_err(archive_err)?;
            zip.write_all(&bytes).map_err(archive_err)?;
        }
        Ok(zip.finish().map_err(archive_err)?.into_inner())
    }
}
