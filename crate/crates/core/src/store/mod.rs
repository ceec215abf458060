//! Persistence: an embedded transactional key-value store for metadata plus a
//! content-addressed blob directory for images.
//!
//! Layout under the data directory:
//!
//! ```text
//! metadata.redb
//! blobs/<first two hex chars>/<remaining 62 hex chars>
//! ```
//!
//! Every entity is stored as its canonical JSON. Writes that touch several
//! records (unit import, read-modify-write of a material set) happen in one
//! write transaction, so readers never observe a partial update.

mod blobs;
mod bundle;
mod import;

use std::path::{Path, PathBuf};

use redb::{Database, ReadableTable, ReadableTableMetadata, TableDefinition};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    BlobKey, ExplorationChain, ExplorationId, GenerationJob, JobId, MaterialSet, MaterialSetId,
    MaterialSetSummary, StickerAsset, StickerId, UnitId, VocabularyUnit,
};

pub use blobs::BlobStore;
pub use bundle::{BundleEntry, BundleManifest};
pub use import::{UnitDocument, UnitEntry};

const UNITS: TableDefinition<&str, &[u8]> = TableDefinition::new("units");
const SETS: TableDefinition<&str, &[u8]> = TableDefinition::new("material_sets");
const SET_SEQ: TableDefinition<&str, u64> = TableDefinition::new("material_set_seq");
const ASSETS: TableDefinition<&str, &[u8]> = TableDefinition::new("sticker_assets");
const ASSET_OWNERS: TableDefinition<&str, &[u8]> = TableDefinition::new("sticker_owners");
const EXPLORATIONS: TableDefinition<&str, &[u8]> = TableDefinition::new("explorations");
const JOBS: TableDefinition<&str, &[u8]> = TableDefinition::new("jobs");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntityKind {
    Unit,
    MaterialSet,
    Sticker,
    Exploration,
    Job,
}

impl EntityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Unit => "unit",
            EntityKind::MaterialSet => "material_set",
            EntityKind::Sticker => "sticker",
            EntityKind::Exploration => "exploration",
            EntityKind::Job => "job",
        }
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown {} {id:?}", kind.as_str())]
    UnknownId { kind: EntityKind, id: String },
    #[error("dangling reference: {0}")]
    DanglingReference(String),
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("material set {0} is not ready")]
    NotReady(MaterialSetId),
    #[error("unknown blob key {0}")]
    UnknownKey(String),
    #[error("storage io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("database error: {0}")]
    Database(#[from] redb::Error),
    #[error("corrupt record: {0}")]
    Corrupt(String),
    #[error("archive error: {0}")]
    Archive(String),
}

impl StoreError {
    fn unknown(kind: EntityKind, id: impl ToString) -> Self {
        StoreError::UnknownId {
            kind,
            id: id.to_string(),
        }
    }
}

fn db<E: Into<redb::Error>>(err: E) -> StoreError {
    StoreError::Database(err.into())
}

fn encode<T: Serialize>(value: &T) -> Vec<u8> {
    serde_json::to_vec(value).expect("domain values always serialize")
}

fn decode<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, StoreError> {
    serde_json::from_slice(bytes).map_err(|err| StoreError::Corrupt(err.to_string()))
}

/// What a sticker asset belongs to; used to repoint the right map on refine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum AssetOwner {
    MaterialSet(MaterialSetId),
    Exploration(ExplorationId),
}

pub struct Store {
    db: Database,
    blobs: BlobStore,
    root: PathBuf,
}

impl Store {
    pub fn open(data_dir: &Path) -> Result<Self, StoreError> {
        let io = |source| StoreError::Io {
            path: data_dir.to_path_buf(),
            source,
        };
        std::fs::create_dir_all(data_dir).map_err(io)?;
        let database = Database::create(data_dir.join("metadata.redb")).map_err(db)?;
        let txn = database.begin_write().map_err(db)?;
        txn.open_table(UNITS).map_err(db)?;
        txn.open_table(SETS).map_err(db)?;
        txn.open_table(SET_SEQ).map_err(db)?;
        txn.open_table(ASSETS).map_err(db)?;
        txn.open_table(ASSET_OWNERS).map_err(db)?;
        txn.open_table(EXPLORATIONS).map_err(db)?;
        txn.open_table(JOBS).map_err(db)?;
        txn.commit().map_err(db)?;
        Ok(Self {
            db: database,
            blobs: BlobStore::open(&data_dir.join("blobs"))?,
            root: data_dir.to_path_buf(),
        })
    }

    pub fn data_dir(&self) -> &Path {
        &self.root
    }

    fn get<T: DeserializeOwned>(
        &self,
        table: TableDefinition<&str, &[u8]>,
        key: &str,
    ) -> Result<Option<T>, StoreError> {
        let txn = self.db.begin_read().map_err(db)?;
        let table = txn.open_table(table).map_err(db)?;
        let value = table.get(key).map_err(db)?;
        value.map(|guard| decode(guard.value())).transpose()
    }

    fn all<T: DeserializeOwned>(
        &self,
        table: TableDefinition<&str, &[u8]>,
    ) -> Result<Vec<T>, StoreError> {
        let txn = self.db.begin_read().map_err(db)?;
        let table = txn.open_table(table).map_err(db)?;
        let mut out = Vec::new();
        for entry in table.iter().map_err(db)? {
            let (_, value) = entry.map_err(db)?;
            out.push(decode(value.value())?);
        }
        Ok(out)
    }

    // ---- blobs ----

    pub fn store_blob(&self, bytes: &[u8]) -> Result<BlobKey, StoreError> {
        self.blobs.put(bytes)
    }

    pub fn load_blob(&self, key: &BlobKey) -> Result<Vec<u8>, StoreError> {
        self.blobs.get(key)
    }

    pub fn has_blob(&self, key: &BlobKey) -> bool {
        self.blobs.contains(key)
    }

    // ---- units ----

    pub fn load_unit(&self, id: &UnitId) -> Result<VocabularyUnit, StoreError> {
        self.get(UNITS, id.as_str())?
            .ok_or_else(|| StoreError::unknown(EntityKind::Unit, id))
    }

    pub fn list_units(&self) -> Result<Vec<VocabularyUnit>, StoreError> {
        self.all(UNITS)
    }

    /// Inserts every unit in one transaction; nothing is written on error.
    pub fn insert_units(&self, units: &[VocabularyUnit]) -> Result<(), StoreError> {
        if units.is_empty() {
            return Ok(());
        }
        let txn = self.db.begin_write().map_err(db)?;
        {
            let mut table = txn.open_table(UNITS).map_err(db)?;
            for unit in units {
                if table.get(unit.id.as_str()).map_err(db)?.is_some() {
                    return Err(StoreError::DuplicateId(unit.id.to_string()));
                }
                table
                    .insert(unit.id.as_str(), encode(unit).as_slice())
                    .map_err(db)?;
            }
        }
        txn.commit().map_err(db)?;
        Ok(())
    }

    // ---- sticker assets ----

    pub fn save_asset(&self, asset: &StickerAsset, owner: &AssetOwner) -> Result<(), StoreError> {
        if !self.has_blob(&asset.image_ref) {
            return Err(StoreError::DanglingReference(format!(
                "sticker {} image {}",
                asset.id, asset.image_ref
            )));
        }
        let txn = self.db.begin_write().map_err(db)?;
        {
            let mut assets = txn.open_table(ASSETS).map_err(db)?;
            if let Some(previous) = &asset.supersedes {
                if previous == &asset.id {
                    return Err(StoreError::DanglingReference(format!(
                        "sticker {} supersedes itself",
                        asset.id
                    )));
                }
                if assets.get(previous.as_str()).map_err(db)?.is_none() {
                    return Err(StoreError::DanglingReference(format!(
                        "sticker {} supersedes unknown {previous}",
                        asset.id
                    )));
                }
            }
            if assets.get(asset.id.as_str()).map_err(db)?.is_some() {
                return Err(StoreError::DuplicateId(asset.id.to_string()));
            }
            assets
                .insert(asset.id.as_str(), encode(asset).as_slice())
                .map_err(db)?;
            let mut owners = txn.open_table(ASSET_OWNERS).map_err(db)?;
            owners
                .insert(asset.id.as_str(), encode(owner).as_slice())
                .map_err(db)?;
        }
        txn.commit().map_err(db)?;
        Ok(())
    }

    pub fn load_asset(&self, id: &StickerId) -> Result<StickerAsset, StoreError> {
        self.get(ASSETS, id.as_str())?
            .ok_or_else(|| StoreError::unknown(EntityKind::Sticker, id))
    }

    pub fn asset_owner(&self, id: &StickerId) -> Result<AssetOwner, StoreError> {
        self.get(ASSET_OWNERS, id.as_str())?
            .ok_or_else(|| StoreError::unknown(EntityKind::Sticker, id))
    }

    /// The asset followed by everything it supersedes, newest first.
    pub fn asset_history(&self, id: &StickerId) -> Result<Vec<StickerAsset>, StoreError> {
        let mut chain = vec![self.load_asset(id)?];
        while let Some(previous) = chain.last().and_then(|a| a.supersedes.clone()) {
            if chain.iter().any(|a| a.id == previous) {
                return Err(StoreError::Corrupt(format!("supersedes cycle at {previous}")));
            }
            chain.push(self.load_asset(&previous)?);
        }
        Ok(chain)
    }

    // ---- material sets ----

    fn check_set_references(
        &self,
        txn: &redb::WriteTransaction,
        set: &MaterialSet,
    ) -> Result<(), StoreError> {
        let units = txn.open_table(UNITS).map_err(db)?;
        if units.get(set.unit_id.as_str()).map_err(db)?.is_none() {
            return Err(StoreError::DanglingReference(format!(
                "material set {} references unknown unit {}",
                set.id, set.unit_id
            )));
        }
        let assets = txn.open_table(ASSETS).map_err(db)?;
        for (word, sticker) in &set.stickers {
            let Some(raw) = assets.get(sticker.as_str()).map_err(db)? else {
                return Err(StoreError::DanglingReference(format!(
                    "material set {} word {word} references unknown sticker {sticker}",
                    set.id
                )));
            };
            let asset: StickerAsset = decode(raw.value())?;
            if !self.has_blob(&asset.image_ref) {
                return Err(StoreError::DanglingReference(format!(
                    "sticker {sticker} image {} is missing",
                    asset.image_ref
                )));
            }
        }
        Ok(())
    }

    fn write_set(
        &self,
        txn: &redb::WriteTransaction,
        set: &MaterialSet,
    ) -> Result<(), StoreError> {
        self.check_set_references(txn, set)?;
        let mut seq = txn.open_table(SET_SEQ).map_err(db)?;
        if seq.get(set.id.as_str()).map_err(db)?.is_none() {
            let next = seq.len().map_err(db)?;
            seq.insert(set.id.as_str(), next).map_err(db)?;
        }
        let mut sets = txn.open_table(SETS).map_err(db)?;
        sets.insert(set.id.as_str(), encode(set).as_slice())
            .map_err(db)?;
        Ok(())
    }

    pub fn save_material_set(&self, set: &MaterialSet) -> Result<(), StoreError> {
        let txn = self.db.begin_write().map_err(db)?;
        self.write_set(&txn, set)?;
        txn.commit().map_err(db)?;
        Ok(())
    }

    pub fn load_material_set(&self, id: &MaterialSetId) -> Result<MaterialSet, StoreError> {
        self.get(SETS, id.as_str())?
            .ok_or_else(|| StoreError::unknown(EntityKind::MaterialSet, id))
    }

    /// Atomic read-modify-write of one material set. The closure's error
    /// aborts the transaction.
    pub fn update_material_set<T, E>(
        &self,
        id: &MaterialSetId,
        update: impl FnOnce(&mut MaterialSet) -> Result<T, E>,
    ) -> Result<Result<T, E>, StoreError> {
        let txn = self.db.begin_write().map_err(db)?;
        let mut set: MaterialSet = {
            let sets = txn.open_table(SETS).map_err(db)?;
            let raw = sets.get(id.as_str()).map_err(db)?;
            match raw {
                Some(raw) => decode(raw.value())?,
                None => return Err(StoreError::unknown(EntityKind::MaterialSet, id)),
            }
        };
        match update(&mut set) {
            Ok(value) => {
                self.write_set(&txn, &set)?;
                txn.commit().map_err(db)?;
                Ok(Ok(value))
            }
            Err(err) => {
                txn.abort().map_err(db)?;
                Ok(Err(err))
            }
        }
    }

    /// All material sets of a unit, newest first.
    pub fn list_variants(&self, unit_id: &UnitId) -> Result<Vec<MaterialSetSummary>, StoreError> {
        self.load_unit(unit_id)?;
        let txn = self.db.begin_read().map_err(db)?;
        let sets = txn.open_table(SETS).map_err(db)?;
        let seq = txn.open_table(SET_SEQ).map_err(db)?;
        let mut found = Vec::new();
        for entry in sets.iter().map_err(db)? {
            let (key, value) = entry.map_err(db)?;
            let set: MaterialSet = decode(value.value())?;
            if &set.unit_id == unit_id {
                let order = seq.get(key.value()).map_err(db)?.map_or(0, |g| g.value());
                found.push((set.created_at, order, MaterialSetSummary::from(&set)));
            }
        }
        found.sort_by(|a, b| (b.0, b.1).cmp(&(a.0, a.1)));
        Ok(found.into_iter().map(|(_, _, summary)| summary).collect())
    }

    // ---- explorations ----

    pub fn save_exploration(&self, chain: &ExplorationChain) -> Result<(), StoreError> {
        chain
            .check_invariants()
            .map_err(|err| StoreError::SchemaViolation(err.to_string()))?;
        let txn = self.db.begin_write().map_err(db)?;
        {
            let sets = txn.open_table(SETS).map_err(db)?;
            if sets.get(chain.material_set_id.as_str()).map_err(db)?.is_none() {
                return Err(StoreError::DanglingReference(format!(
                    "exploration {} references unknown material set {}",
                    chain.id, chain.material_set_id
                )));
            }
            let assets = txn.open_table(ASSETS).map_err(db)?;
            for sticker in chain.stickers.values() {
                if assets.get(sticker.as_str()).map_err(db)?.is_none() {
                    return Err(StoreError::DanglingReference(format!(
                        "exploration {} references unknown sticker {sticker}",
                        chain.id
                    )));
                }
            }
            let mut table = txn.open_table(EXPLORATIONS).map_err(db)?;
            table
                .insert(chain.id.as_str(), encode(chain).as_slice())
                .map_err(db)?;
        }
        txn.commit().map_err(db)?;
        Ok(())
    }

    pub fn load_exploration(&self, id: &ExplorationId) -> Result<ExplorationChain, StoreError> {
        self.get(EXPLORATIONS, id.as_str())?
            .ok_or_else(|| StoreError::unknown(EntityKind::Exploration, id))
    }

    /// Atomic read-modify-write of one exploration chain.
    pub fn update_exploration<T, E>(
        &self,
        id: &ExplorationId,
        update: impl FnOnce(&mut ExplorationChain) -> Result<T, E>,
    ) -> Result<Result<T, E>, StoreError> {
        let txn = self.db.begin_write().map_err(db)?;
        let mut chain: ExplorationChain = {
            let table = txn.open_table(EXPLORATIONS).map_err(db)?;
            let raw = table.get(id.as_str()).map_err(db)?;
            match raw {
                Some(raw) => decode(raw.value())?,
                None => return Err(StoreError::unknown(EntityKind::Exploration, id)),
            }
        };
        match update(&mut chain) {
            Ok(value) => {
                {
                    let assets = txn.open_table(ASSETS).map_err(db)?;
                    for sticker in chain.stickers.values() {
                        if assets.get(sticker.as_str()).map_err(db)?.is_none() {
                            return Err(StoreError::DanglingReference(format!(
                                "exploration {id} references unknown sticker {sticker}"
                            )));
                        }
                    }
                    let mut table = txn.open_table(EXPLORATIONS).map_err(db)?;
                    table
                        .insert(id.as_str(), encode(&chain).as_slice())
                        .map_err(db)?;
                }
                txn.commit().map_err(db)?;
                Ok(Ok(value))
            }
            Err(err) => {
                txn.abort().map_err(db)?;
                Ok(Err(err))
            }
        }
    }

    // ---- jobs ----

    pub fn save_job(&self, job: &GenerationJob) -> Result<(), StoreError> {
        let txn = self.db.begin_write().map_err(db)?;
        {
            let mut table = txn.open_table(JOBS).map_err(db)?;
            table
                .insert(job.id.as_str(), encode(job).as_slice())
                .map_err(db)?;
        }
        txn.commit().map_err(db)?;
        Ok(())
    }

    pub fn load_job(&self, id: &JobId) -> Result<GenerationJob, StoreError> {
        self.get(JOBS, id.as_str())?
            .ok_or_else(|| StoreError::unknown(EntityKind::Job, id))
    }
}
