//! Generation pipelines run as tracked jobs.
//!
//! Three pipelines share one job model:
//!
//! * material set: script prompt -> text provider -> parse + validate (retried
//!   with a fresh seed on failure) -> one sticker job per line -> `Ready`
//! * refine: an edited sticker prompt -> image provider -> new asset that
//!   supersedes the old one -> owner map repointed
//! * exploration: exploration prompt -> text provider -> parse (retried) ->
//!   one sticker per interior word -> persisted chain
//!
//! Submissions validate synchronously and return job ids immediately; the
//! work runs on the Tokio runtime the orchestrator was built in.

mod mock;
mod providers;
mod remote;

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, RwLock};

use thiserror::Error;
use tokio::runtime::Handle;
use tokio::sync::Semaphore;
use tokio_util::task::TaskTracker;
use tracing::{debug, warn};

use crate::domain::{
    ExplorationChain, ExplorationId, GenerationJob, JobId, JobKind, JobState, MaterialSet,
    MaterialSetId, MaterialSetState, StickerAsset, StickerId, StoryScript, Theme, UnitId, Word,
};
use crate::ids::{attempt_seed, Clock, IdSource, SystemClock};
use crate::parser::{parse_exploration_output, parse_script_output, validate_script};
use crate::prompt::{PromptText, TemplateSet};
use crate::store::{AssetOwner, EntityKind, Store, StoreError};

pub use mock::{MockImageProvider, MockTextProvider, MOCK_IMAGE_SIZE};
pub use providers::{GeneratedImage, ImageFormat, ImageProvider, ProviderError, TextProvider};
pub use remote::{RemoteImageProvider, RemoteTextProvider, DEFAULT_IMAGE_TIMEOUT, DEFAULT_TEXT_TIMEOUT};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub reseed_per_attempt: bool,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            reseed_per_attempt: true,
        }
    }
}

impl RetryPolicy {
    fn seed_for(&self, base: u64, attempt: u32) -> u64 {
        if self.reseed_per_attempt {
            attempt_seed(base, attempt)
        } else {
            base
        }
    }
}

pub const DEFAULT_STICKER_PARALLELISM: usize = 4;

#[derive(Debug, Error)]
pub enum SubmitError {
    #[error("unknown unit {0}")]
    UnknownUnit(UnitId),
    #[error("unknown material set {0}")]
    UnknownMaterialSet(MaterialSetId),
    #[error("unknown sticker {0}")]
    UnknownSticker(StickerId),
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("word {0:?} is not in the material set")]
    WordNotInSet(String),
    #[error("the two words are identical")]
    IdenticalWords,
    #[error("material set {0} is not ready")]
    SetNotReady(MaterialSetId),
    #[error("material set {0} is still generating")]
    SetBusy(MaterialSetId),
    #[error("sticker {0} has already been superseded")]
    StickerNotCurrent(StickerId),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Error)]
pub enum StatusError {
    #[error("unknown job {0}")]
    UnknownJob(JobId),
    #[error(transparent)]
    Store(StoreError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaterialSetSubmission {
    pub job_id: JobId,
    pub material_set_id: MaterialSetId,
}

pub struct OrchestratorBuilder {
    store: Arc<Store>,
    text: Arc<dyn TextProvider>,
    image: Arc<dyn ImageProvider>,
    templates: TemplateSet,
    retry: RetryPolicy,
    sticker_parallelism: usize,
    seed_override: Option<u64>,
    ids: IdSource,
    clock: Arc<dyn Clock>,
}

impl OrchestratorBuilder {
    pub fn templates(mut self, templates: TemplateSet) -> Self {
        self.templates = templates;
        self
    }

    pub fn retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn sticker_parallelism(mut self, limit: usize) -> Self {
        self.sticker_parallelism = limit.max(1);
        self
    }

    /// Seed used by every submission that does not pin its own.
    pub fn seed_override(mut self, seed: Option<u64>) -> Self {
        self.seed_override = seed;
        self
    }

    pub fn ids(mut self, ids: IdSource) -> Self {
        self.ids = ids;
        self
    }

    pub fn clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    /// Must be called from within a Tokio runtime; pipelines are spawned on it.
    pub fn build(self) -> Orchestrator {
        let retry = RetryPolicy {
            max_attempts: self.retry.max_attempts.max(1),
            ..self.retry
        };
        Orchestrator {
            inner: Arc::new(Inner {
                store: self.store,
                text: self.text,
                image: self.image,
                templates: self.templates,
                retry,
                seed_override: self.seed_override,
                ids: self.ids,
                clock: self.clock,
                jobs: RwLock::new(HashMap::new()),
                sticker_slots: Arc::new(Semaphore::new(self.sticker_parallelism)),
                tasks: TaskTracker::new(),
                runtime: Handle::current(),
            }),
        }
    }
}

struct Inner {
    store: Arc<Store>,
    text: Arc<dyn TextProvider>,
    image: Arc<dyn ImageProvider>,
    templates: TemplateSet,
    retry: RetryPolicy,
    seed_override: Option<u64>,
    ids: IdSource,
    clock: Arc<dyn Clock>,
    jobs: RwLock<HashMap<JobId, GenerationJob>>,
    sticker_slots: Arc<Semaphore>,
    tasks: TaskTracker,
    runtime: Handle,
}

#[derive(Clone)]
pub struct Orchestrator {
    inner: Arc<Inner>,
}

/// One sticker to generate and where it will live.
struct StickerWork {
    job_id: JobId,
    sticker_id: StickerId,
    word: Word,
    prompt: String,
    seed: u64,
    supersedes: Option<StickerId>,
    owner: AssetOwner,
}

impl Orchestrator {
    pub fn builder(
        store: Arc<Store>,
        text: Arc<dyn TextProvider>,
        image: Arc<dyn ImageProvider>,
    ) -> OrchestratorBuilder {
        OrchestratorBuilder {
            store,
            text,
            image,
            templates: TemplateSet::builtin(),
            retry: RetryPolicy::default(),
            sticker_parallelism: DEFAULT_STICKER_PARALLELISM,
            seed_override: None,
            ids: IdSource::Random,
            clock: Arc::new(SystemClock),
        }
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.inner.store
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        self.inner.retry
    }

    /// Starts generating a new material set (a theme variant) for a unit.
    pub fn submit_material_set(
        &self,
        unit_id: &UnitId,
        theme: Theme,
        seed: Option<u64>,
    ) -> Result<MaterialSetSubmission, SubmitError> {
        let inner = &self.inner;
        let unit = match inner.store.load_unit(unit_id) {
            Ok(unit) => unit,
            Err(StoreError::UnknownId { .. }) => return Err(SubmitError::UnknownUnit(unit_id.clone())),
            Err(err) => return Err(err.into()),
        };
        let seed = inner.pick_seed(seed);
        let set = MaterialSet {
            id: MaterialSetId::new(inner.ids.next_hex()).expect("hex ids are valid"),
            unit_id: unit.id.clone(),
            theme,
            script: None,
            stickers: BTreeMap::new(),
            state: MaterialSetState::Generating,
            seed,
            error: None,
            created_at: inner.clock.now(),
        };
        inner.store.save_material_set(&set)?;
        let job_id = inner.create_job(JobKind::Script)?;

        let submission = MaterialSetSubmission {
            job_id: job_id.clone(),
            material_set_id: set.id.clone(),
        };
        let task = Arc::clone(inner);
        inner.spawn(async move { task.run_material_set(job_id, set, unit.words).await });
        Ok(submission)
    }

    /// Regenerates a sticker from an edited prompt. The new asset supersedes
    /// `sticker_id`, which must be the current sticker for its word.
    pub fn submit_refine(&self, sticker_id: &StickerId, prompt: &str) -> Result<JobId, SubmitError> {
        let inner = &self.inner;
        let prompt = prompt.trim();
        if prompt.is_empty() {
            return Err(SubmitError::EmptyPrompt);
        }
        let unknown = |err: StoreError| match err {
            StoreError::UnknownId { .. } => SubmitError::UnknownSticker(sticker_id.clone()),
            other => other.into(),
        };
        let asset = inner.store.load_asset(sticker_id).map_err(unknown)?;
        let owner = inner.store.asset_owner(sticker_id).map_err(unknown)?;
        let current = match &owner {
            AssetOwner::MaterialSet(set_id) => {
                let set = inner.store.load_material_set(set_id)?;
                if set.state == MaterialSetState::Generating {
                    return Err(SubmitError::SetBusy(set_id.clone()));
                }
                set.stickers.get(&asset.word).cloned()
            }
            AssetOwner::Exploration(chain_id) => inner
                .store
                .load_exploration(chain_id)
                .map_err(unknown)?
                .stickers
                .get(&asset.word)
                .cloned(),
        };
        if current.as_ref() != Some(sticker_id) {
            return Err(SubmitError::StickerNotCurrent(sticker_id.clone()));
        }

        let job_id = inner.create_job(JobKind::Sticker)?;
        let work = StickerWork {
            job_id: job_id.clone(),
            sticker_id: StickerId::new(inner.ids.next_hex()).expect("hex ids are valid"),
            word: asset.word,
            prompt: prompt.to_owned(),
            seed: asset.seed,
            supersedes: Some(sticker_id.clone()),
            owner,
        };
        let task = Arc::clone(inner);
        inner.spawn(async move { task.run_refine(work).await });
        Ok(job_id)
    }

    /// Starts exploring the relation between two words of a ready material set.
    pub fn submit_exploration(
        &self,
        set_id: &MaterialSetId,
        word_a: &str,
        word_b: &str,
        seed: Option<u64>,
    ) -> Result<JobId, SubmitError> {
        let inner = &self.inner;
        let set = match inner.store.load_material_set(set_id) {
            Ok(set) => set,
            Err(StoreError::UnknownId { .. }) => {
                return Err(SubmitError::UnknownMaterialSet(set_id.clone()))
            }
            Err(err) => return Err(err.into()),
        };
        let as_word =
            |raw: &str| Word::new(raw.trim()).map_err(|_| SubmitError::WordNotInSet(raw.to_owned()));
        let (a, b) = (as_word(word_a)?, as_word(word_b)?);
        if a == b {
            return Err(SubmitError::IdenticalWords);
        }
        let script = set.script.as_ref();
        let resolve = |word: &Word| {
            script
                .and_then(|s| s.words().find(|w| *w == word).cloned())
                .ok_or_else(|| SubmitError::WordNotInSet(word.to_string()))
        };
        let (a, b) = (resolve(&a)?, resolve(&b)?);
        if set.state != MaterialSetState::Ready {
            return Err(SubmitError::SetNotReady(set_id.clone()));
        }

        let seed = inner.pick_seed(seed);
        let job_id = inner.create_job(JobKind::Exploration)?;
        let chain_id = ExplorationId::new(inner.ids.next_hex()).expect("hex ids are valid");
        let task = Arc::clone(inner);
        let job = job_id.clone();
        inner.spawn(async move { task.run_exploration(job, chain_id, set, a, b, seed).await });
        Ok(job_id)
    }

    /// Current snapshot of a job. Terminal snapshots never change.
    pub fn job_status(&self, id: &JobId) -> Result<GenerationJob, StatusError> {
        if let Some(job) = self.inner.jobs.read().expect("job map lock").get(id) {
            return Ok(job.clone());
        }
        match self.inner.store.load_job(id) {
            Ok(job) => Ok(job),
            Err(StoreError::UnknownId { kind: EntityKind::Job, .. }) => {
                Err(StatusError::UnknownJob(id.clone()))
            }
            Err(err) => Err(StatusError::Store(err)),
        }
    }

    /// Polls until the job reaches a terminal state.
    pub async fn wait_for(&self, id: &JobId) -> Result<GenerationJob, StatusError> {
        loop {
            let job = self.job_status(id)?;
            if job.state.is_terminal() {
                return Ok(job);
            }
            tokio::time::sleep(std::time::Duration::from_millis(5)).await;
        }
    }

    /// Stops accepting background work and waits for in-flight pipelines to
    /// finish writing their state.
    pub async fn shutdown(&self) {
        self.inner.tasks.close();
        self.inner.tasks.wait().await;
    }
}

impl Inner {
    fn spawn<F>(&self, future: F)
    where
        F: std::future::Future<Output = ()> + Send + 'static,
    {
        self.tasks.spawn_on(future, &self.runtime);
    }

    fn pick_seed(&self, requested: Option<u64>) -> u64 {
        requested
            .or(self.seed_override)
            .unwrap_or_else(|| self.ids.next_u64())
    }

    fn create_job(&self, kind: JobKind) -> Result<JobId, StoreError> {
        let id = JobId::new(self.ids.next_hex()).expect("hex ids are valid");
        let job = GenerationJob::pending(id.clone(), kind);
        self.store.save_job(&job)?;
        self.jobs.write().expect("job map lock").insert(id.clone(), job);
        Ok(id)
    }

    /// Applies a change to a job's snapshot and persists it. Terminal jobs
    /// are never modified.
    fn update_job(&self, id: &JobId, change: impl FnOnce(&mut GenerationJob)) {
        let snapshot = {
            let mut jobs = self.jobs.write().expect("job map lock");
            let Some(job) = jobs.get_mut(id) else {
                warn!(job = %id, "update for unknown job");
                return;
            };
            if job.state.is_terminal() {
                warn!(job = %id, "ignoring update to terminal job");
                return;
            }
            let mut next = job.clone();
            change(&mut next);
            if next.state != job.state && !job.state.can_transition_to(next.state) {
                warn!(job = %id, from = ?job.state, to = ?next.state, "illegal job transition");
                return;
            }
            *job = next.clone();
            next
        };
        if let Err(err) = self.store.save_job(&snapshot) {
            warn!(job = %id, error = %err, "persisting job state failed");
        }
    }

    fn start_job(&self, id: &JobId) {
        self.update_job(id, |job| job.state = JobState::Running);
    }

    fn succeed_job(&self, id: &JobId, result_ref: String) {
        self.update_job(id, |job| {
            job.state = JobState::Succeeded;
            job.result_ref = Some(result_ref);
        });
    }

    fn fail_job(&self, id: &JobId, error: String) {
        self.update_job(id, |job| {
            job.state = JobState::Failed;
            job.error = Some(error);
        });
    }

    fn count_attempt(&self, id: &JobId, attempt: u32) {
        self.update_job(id, |job| job.attempts = attempt);
    }

    /// Calls the text provider until `accept` takes its output or attempts
    /// run out. Each attempt is counted on the job.
    async fn generate_text<T>(
        &self,
        job_id: &JobId,
        prompt: &PromptText,
        seed: u64,
        accept: impl Fn(&str) -> Result<T, String>,
    ) -> Result<T, String> {
        let mut last_error = String::new();
        for attempt in 0..self.retry.max_attempts {
            self.count_attempt(job_id, attempt + 1);
            let attempt_seed = self.retry.seed_for(seed, attempt);
            let outcome = match self.text.generate(prompt, attempt_seed).await {
                Ok(raw) => accept(&raw),
                Err(err) => Err(err.to_string()),
            };
            match outcome {
                Ok(value) => return Ok(value),
                Err(err) => {
                    debug!(job = %job_id, attempt = attempt + 1, error = %err, "text attempt rejected");
                    last_error = err;
                }
            }
        }
        Err(format!(
            "gave up after {} attempts: {last_error}",
            self.retry.max_attempts
        ))
    }

    /// Generates and stores one sticker, retrying provider failures. Marks
    /// the job failed on exhaustion; success is left to the caller, which may
    /// still have to link the asset.
    async fn generate_sticker(&self, work: &StickerWork) -> Result<StickerAsset, String> {
        let _permit = self
            .sticker_slots
            .acquire()
            .await
            .map_err(|_| "sticker pool closed".to_owned())?;
        self.start_job(&work.job_id);
        let mut last_error = String::new();
        for attempt in 0..self.retry.max_attempts {
            self.count_attempt(&work.job_id, attempt + 1);
            let seed = self.retry.seed_for(work.seed, attempt);
            let image = match self.image.generate(&work.prompt, seed).await {
                Ok(image) => image,
                Err(err) => {
                    last_error = err.to_string();
                    continue;
                }
            };
            let stored = self.store.store_blob(&image.bytes).and_then(|image_ref| {
                let asset = StickerAsset {
                    id: work.sticker_id.clone(),
                    word: work.word.clone(),
                    prompt: work.prompt.clone(),
                    seed,
                    image_ref,
                    provider_name: self.image.name().to_owned(),
                    created_at: self.clock.now(),
                    supersedes: work.supersedes.clone(),
                };
                self.store.save_asset(&asset, &work.owner).map(|()| asset)
            });
            match stored {
                Ok(asset) => return Ok(asset),
                Err(err) => {
                    // Storage failures are not provider flakiness; retrying will not help.
                    last_error = err.to_string();
                    break;
                }
            }
        }
        let error = format!("sticker for {:?}: {last_error}", work.word.as_str());
        self.fail_job(&work.job_id, error.clone());
        Err(error)
    }

    /// Generates stickers concurrently (bounded by the parallelism limit) and
    /// returns them in input order, or the first failure.
    async fn generate_stickers(
        self: &Arc<Self>,
        work: Vec<StickerWork>,
    ) -> Result<Vec<StickerAsset>, String> {
        let mut set = tokio::task::JoinSet::new();
        let count = work.len();
        for (index, item) in work.into_iter().enumerate() {
            let inner = Arc::clone(self);
            set.spawn_on(
                async move {
                    let outcome = inner.generate_sticker(&item).await;
                    if let Ok(asset) = &outcome {
                        inner.succeed_job(&item.job_id, asset.id.to_string());
                    }
                    (index, outcome)
                },
                &self.runtime,
            );
        }
        let mut results: Vec<Option<StickerAsset>> = vec![None; count];
        let mut first_error = None;
        while let Some(joined) = set.join_next().await {
            match joined {
                Ok((index, Ok(asset))) => results[index] = Some(asset),
                Ok((_, Err(err))) => {
                    first_error.get_or_insert(err);
                }
                Err(err) => {
                    first_error.get_or_insert(format!("sticker task panicked: {err}"));
                }
            }
        }
        match first_error {
            Some(err) => Err(err),
            None => Ok(results.into_iter().flatten().collect()),
        }
    }

    fn fail_material_set(&self, job_id: &JobId, set_id: &MaterialSetId, error: String) {
        let outcome = self.store.update_material_set(set_id, |set| {
            set.state = MaterialSetState::Failed;
            set.error = Some(error.clone());
            Ok::<(), ()>(())
        });
        if let Err(err) = outcome {
            warn!(set = %set_id, error = %err, "recording material set failure failed");
        }
        self.fail_job(job_id, error);
    }

    async fn run_material_set(self: Arc<Self>, job_id: JobId, set: MaterialSet, words: Vec<Word>) {
        self.start_job(&job_id);
        let prompt = match self.templates.render_script_prompt(&words, &set.theme) {
            Ok(prompt) => prompt,
            Err(err) => return self.fail_material_set(&job_id, &set.id, err.to_string()),
        };

        let theme = set.theme.clone();
        let parsed = self
            .generate_text(&job_id, &prompt, set.seed, |raw| {
                let lines = parse_script_output(raw, &words).map_err(|err| err.to_string())?;
                let script = StoryScript {
                    theme: theme.clone(),
                    lines,
                };
                validate_script(&script, &words).map_err(|violations| format!("{violations:?}"))?;
                Ok(script)
            })
            .await;
        let script = match parsed {
            Ok(script) => script,
            Err(err) => return self.fail_material_set(&job_id, &set.id, err),
        };

        let saved = self.store.update_material_set(&set.id, |stored| {
            stored.script = Some(script.clone());
            Ok::<(), ()>(())
        });
        if let Err(err) = saved {
            return self.fail_material_set(&job_id, &set.id, err.to_string());
        }

        let owner = AssetOwner::MaterialSet(set.id.clone());
        let mut work = Vec::with_capacity(script.lines.len());
        for (index, line) in script.lines.iter().enumerate() {
            let sticker_job = match self.create_job(JobKind::Sticker) {
                Ok(id) => id,
                Err(err) => return self.fail_material_set(&job_id, &set.id, err.to_string()),
            };
            work.push(StickerWork {
                job_id: sticker_job,
                sticker_id: StickerId::new(self.ids.next_hex()).expect("hex ids are valid"),
                word: line.word.clone(),
                prompt: line.sticker_prompt.clone(),
                seed: set.seed.wrapping_add(index as u64),
                supersedes: None,
                owner: owner.clone(),
            });
        }

        let assets = match self.generate_stickers(work).await {
            Ok(assets) => assets,
            Err(err) => return self.fail_material_set(&job_id, &set.id, err),
        };

        let ready = self.store.update_material_set(&set.id, |stored| {
            stored.stickers = assets
                .iter()
                .map(|asset| (asset.word.clone(), asset.id.clone()))
                .collect();
            stored.state = MaterialSetState::Ready;
            stored.error = None;
            Ok::<(), ()>(())
        });
        match ready {
            Ok(_) => self.succeed_job(&job_id, set.id.to_string()),
            Err(err) => self.fail_material_set(&job_id, &set.id, err.to_string()),
        }
    }

    async fn run_refine(self: Arc<Self>, work: StickerWork) {
        // generate_sticker marks the job Running itself once a slot frees up.
        let asset = match self.generate_sticker(&work).await {
            Ok(asset) => asset,
            Err(_) => return,
        };
        let previous = work.supersedes.clone();
        let repoint = |map: &mut BTreeMap<Word, StickerId>| {
            if map.get(&asset.word) != previous.as_ref() {
                return Err(format!(
                    "sticker for {:?} changed while refining",
                    asset.word.as_str()
                ));
            }
            map.insert(asset.word.clone(), asset.id.clone());
            Ok(())
        };
        let outcome = match &work.owner {
            AssetOwner::MaterialSet(id) => self
                .store
                .update_material_set(id, |set| repoint(&mut set.stickers)),
            AssetOwner::Exploration(id) => self
                .store
                .update_exploration(id, |chain| repoint(&mut chain.stickers)),
        };
        match outcome {
            Ok(Ok(())) => self.succeed_job(&work.job_id, asset.id.to_string()),
            Ok(Err(conflict)) => self.fail_job(&work.job_id, conflict),
            Err(err) => self.fail_job(&work.job_id, err.to_string()),
        }
    }

    async fn run_exploration(
        self: Arc<Self>,
        job_id: JobId,
        chain_id: ExplorationId,
        set: MaterialSet,
        word_a: Word,
        word_b: Word,
        seed: u64,
    ) {
        self.start_job(&job_id);
        let prompt = match self
            .templates
            .render_exploration_prompt(&word_a, &word_b, &set.theme)
        {
            Ok(prompt) => prompt,
            Err(err) => return self.fail_job(&job_id, err.to_string()),
        };
        let parsed = self
            .generate_text(&job_id, &prompt, seed, |raw| {
                parse_exploration_output(raw, &word_a, &word_b).map_err(|err| err.to_string())
            })
            .await;
        let parsed = match parsed {
            Ok(parsed) => parsed,
            Err(err) => return self.fail_job(&job_id, err),
        };

        let owner = AssetOwner::Exploration(chain_id.clone());
        let mut work = Vec::new();
        for (index, word) in parsed.interior().iter().enumerate() {
            let sticker_job = match self.create_job(JobKind::Sticker) {
                Ok(id) => id,
                Err(err) => return self.fail_job(&job_id, err.to_string()),
            };
            work.push(StickerWork {
                job_id: sticker_job,
                sticker_id: StickerId::new(self.ids.next_hex()).expect("hex ids are valid"),
                word: word.clone(),
                prompt: parsed.added_prompts[word].clone(),
                seed: seed.wrapping_add(index as u64),
                supersedes: None,
                owner: owner.clone(),
            });
        }
        let assets = match self.generate_stickers(work).await {
            Ok(assets) => assets,
            Err(err) => return self.fail_job(&job_id, err),
        };

        // Endpoint stickers are the set's current ones at completion time.
        let current = match self.store.load_material_set(&set.id) {
            Ok(current) => current,
            Err(err) => return self.fail_job(&job_id, err.to_string()),
        };
        let mut stickers = BTreeMap::new();
        for endpoint in [&word_a, &word_b] {
            match current.stickers.get(endpoint) {
                Some(id) => {
                    stickers.insert(endpoint.clone(), id.clone());
                }
                None => {
                    return self.fail_job(&job_id, format!("no sticker for endpoint {endpoint}"))
                }
            }
        }
        for asset in &assets {
            stickers.insert(asset.word.clone(), asset.id.clone());
        }

        let chain = ExplorationChain {
            id: chain_id.clone(),
            material_set_id: set.id.clone(),
            word_a,
            word_b,
            theme: set.theme.clone(),
            chain: parsed.chain,
            added_prompts: parsed.added_prompts,
            stickers,
            created_at: self.clock.now(),
        };
        match self.store.save_exploration(&chain) {
            Ok(()) => self.succeed_job(&job_id, chain_id.to_string()),
            Err(err) => self.fail_job(&job_id, err.to_string()),
        }
    }
}
