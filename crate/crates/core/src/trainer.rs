//! Multi-task stochastic gradient training.
//!
//! Each step picks a task uniformly, then a training example usable for it,
//! then a positive label, and samples negatives until one violates the
//! margin. The violating pair gets one subgradient step on
//! `L(rank estimate) * |1 - f_j + f_k|_+` (WARP) or on the plain hinge (AUC),
//! after which the touched columns are projected back onto the norm ball.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::dataset::{ArtistSimilarity, Dataset};
use crate::error::{Error, Result};
use crate::evaluation::evaluate;
use crate::linalg::{self, ColumnMatrix};
use crate::losses::{self, big_l, nth_negative, AlphaScheme};
use crate::model::{EmbeddingModel, Scorer as _, TaskId, Touched, Universe};
use crate::sparse::SparseVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossKind {
    #[default]
    Warp,
    Auc,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Warp => "warp",
            LossKind::Auc => "auc",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "warp" => Ok(LossKind::Warp),
            "auc" => Ok(LossKind::Auc),
            _ => Err(Error::Config(format!("unknown loss `{s}` (warp or auc)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub tasks: Vec<TaskId>,
    pub loss: LossKind,
    pub alpha: AlphaScheme,
    pub dim: usize,
    pub max_norm: f32,
    pub learning_rate: f64,
    pub max_steps: usize,
    /// Steps between validation checkpoints; `None` means ten passes over
    /// the training songs.
    pub eval_every: Option<usize>,
    /// Non-improving checkpoints tolerated before stopping.
    pub patience: usize,
    pub seed: u64,
    pub k_eval: usize,
    /// Caps the label universe used for the rank estimate and trial budget
    /// of the song-valued tasks.
    pub song_pool: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            tasks: vec![TaskId::TagPred],
            loss: LossKind::Warp,
            alpha: AlphaScheme::Harmonic,
            dim: 100,
            max_norm: 1.0,
            learning_rate: 0.01,
            max_steps: 100_000,
            eval_every: None,
            patience: 5,
            seed: 0,
            k_eval: 1,
            song_pool: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.tasks.is_empty() {
            return bad("at least one task is required");
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning rate must be positive");
        }
        if !(self.max_norm > 0.0) || !self.max_norm.is_finite() {
            return bad("norm bound C must be positive");
        }
        if self.dim == 0 {
            return bad("embedding dimension must be at least 1");
        }
        if self.eval_every == Some(0) {
            return bad("eval_every must be at least 1");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if self.k_eval == 0 {
            return bad("k_eval must be at least 1");
        }
        if self.song_pool.is_some_and(|p| p < 2) {
            return bad("song pool must hold at least 2 songs");
        }
        Ok(())
    }

    pub fn eval_interval(&self, n_train: usize) -> usize {
        self.eval_every.unwrap_or((10 * n_train).max(1))
    }

    fn unique_tasks(&self) -> Vec<TaskId> {
        let mut t = self.tasks.clone();
        t.sort();
        t.dedup();
        t
    }
}

/// A model with every entry drawn from N(0, 1/sqrt(d)) and then projected.
pub fn init_model<R: Rng + ?Sized>(
    d: usize,
    universe: Universe,
    max_norm: f32,
    rng: &mut R,
) -> Result<EmbeddingModel> {
    let mut model = EmbeddingModel::zeros(d, universe, max_norm)?;
    let normal = Normal::new(0.0, 1.0 / (d as f64).sqrt())
        .map_err(|e| Error::Config(e.to_string()))?;
    for m in [&mut model.artists, &mut model.tags, &mut model.features] {
        for v in m.as_mut_slice() {
            *v = normal.sample(rng) as f32;
        }
    }
    model.project_columns(None);
    Ok(model)
}

/// What a training step ranks from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Input {
    /// Index of a training song.
    Song(usize),
    Artist(usize),
}

/// A training example for one task. `positives` are sorted label ids in the
/// task's output space (artists, tags or training-song indices).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Example<'a> {
    pub task: TaskId,
    pub input: Input,
    pub positives: &'a [usize],
}

/// Training songs indexed for per-task example sampling.
#[derive(Debug)]
pub struct TaskData<'a> {
    pub data: &'a Dataset,
    similarity: Option<&'a ArtistSimilarity>,
    record_artists: Vec<Vec<usize>>,
    record_tags: Vec<Vec<usize>>,
    songs_by_artist: Vec<Vec<usize>>,
    same_artist: Vec<Vec<usize>>,
    sim_lists: Vec<(usize, Vec<usize>)>,
    /// Per task, the indices of usable examples (records, or similarity
    /// entries for SA).
    usable: BTreeMap<TaskId, Vec<usize>>,
}

impl<'a> TaskData<'a> {
    pub fn new(data: &'a Dataset, similarity: Option<&'a ArtistSimilarity>) -> Self {
        let widen = |v: &[u32]| v.iter().map(|&x| x as usize).collect::<Vec<_>>();
        let record_artists: Vec<Vec<usize>> = data.records.iter().map(|r| widen(&r.artists)).collect();
        let record_tags: Vec<Vec<usize>> = data.records.iter().map(|r| widen(&r.tags)).collect();
        let songs_by_artist = data.songs_by_artist();
        let same_artist = data.same_artist_songs();
        let sim_lists: Vec<(usize, Vec<usize>)> = similarity
            .map(|s| {
                s.entries
                    .iter()
                    .filter(|(a, _)| (*a as usize) < data.n_artists)
                    .map(|(a, l)| (*a as usize, widen(l)))
                    .collect()
            })
            .unwrap_or_default();
        let n = data.len();
        let mut usable = BTreeMap::new();
        let select = |pred: &dyn Fn(usize) -> bool| (0..n).filter(|&i| pred(i)).collect::<Vec<_>>();
        usable.insert(
            TaskId::ArtistPred,
            select(&|i| !record_artists[i].is_empty() && record_artists[i].len() < data.n_artists),
        );
        usable.insert(
            TaskId::TagPred,
            select(&|i| !record_tags[i].is_empty() && record_tags[i].len() < data.n_tags),
        );
        usable.insert(
            TaskId::SongPred,
            select(&|i| {
                record_artists[i]
                    .iter()
                    .any(|&a| songs_by_artist[a].len() < n)
            }),
        );
        usable.insert(
            TaskId::SimSong,
            select(&|i| !same_artist[i].is_empty() && same_artist[i].len() < n - 1),
        );
        usable.insert(
            TaskId::SimArtist,
            (0..sim_lists.len())
                .filter(|&e| sim_lists[e].1.len() < data.n_artists - 1)
                .collect(),
        );
        TaskData {
            data,
            similarity,
            record_artists,
            record_tags,
            songs_by_artist,
            same_artist,
            sim_lists,
            usable,
        }
    }

    pub fn similarity(&self) -> Option<&'a ArtistSimilarity> {
        self.similarity
    }

    pub fn n_usable(&self, task: TaskId) -> usize {
        self.usable[&task].len()
    }

    /// Number of candidate outputs for `task` and the candidate excluded as
    /// the query itself, if any.
    fn universe(&self, example: &Example) -> (usize, Option<usize>) {
        match (example.task, example.input) {
            (TaskId::ArtistPred, _) => (self.data.n_artists, None),
            (TaskId::TagPred, _) => (self.data.n_tags, None),
            (TaskId::SongPred, _) => (self.data.len(), None),
            (TaskId::SimSong, Input::Song(i)) => (self.data.len(), Some(i)),
            (TaskId::SimArtist, Input::Artist(a)) => (self.data.n_artists, Some(a)),
            _ => unreachable!("input kind checked by caller"),
        }
    }

    /// A uniformly chosen usable example for `task`.
    pub fn sample_example<R: Rng + ?Sized>(&self, task: TaskId, rng: &mut R) -> Result<Example<'_>> {
        let pool = &self.usable[&task];
        if pool.is_empty() {
            return Err(Error::NoExamples(format!("no usable training examples for task {task}")));
        }
        let idx = pool[rng.random_range(0..pool.len())];
        Ok(match task {
            TaskId::ArtistPred => Example {
                task,
                input: Input::Song(idx),
                positives: &self.record_artists[idx],
            },
            TaskId::TagPred => Example {
                task,
                input: Input::Song(idx),
                positives: &self.record_tags[idx],
            },
            TaskId::SimSong => Example {
                task,
                input: Input::Song(idx),
                positives: &self.same_artist[idx],
            },
            TaskId::SongPred => {
                let n = self.data.len();
                let candidates: Vec<usize> = self.record_artists[idx]
                    .iter()
                    .copied()
                    .filter(|&a| self.songs_by_artist[a].len() < n)
                    .collect();
                let a = candidates[rng.random_range(0..candidates.len())];
                Example {
                    task,
                    input: Input::Artist(a),
                    positives: &self.songs_by_artist[a],
                }
            }
            TaskId::SimArtist => {
                let (a, list) = &self.sim_lists[idx];
                Example {
                    task,
                    input: Input::Artist(*a),
                    positives: list,
                }
            }
        })
    }

    fn song(&self, i: usize) -> &SparseVector {
        &self.data.records[i].features
    }
}

/// Settings of a single step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    pub loss: LossKind,
    pub alpha: AlphaScheme,
    pub learning_rate: f64,
    pub song_pool: Option<usize>,
}

impl From<&TrainConfig> for StepParams {
    fn from(c: &TrainConfig) -> Self {
        StepParams {
            loss: c.loss,
            alpha: c.alpha,
            learning_rate: c.learning_rate,
            song_pool: c.song_pool,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Updated,
    NoViolation,
}

/// A margin-violating pair chosen for an update, in output-label ids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledPair {
    pub positive: usize,
    pub negative: usize,
    pub f_positive: f64,
    pub f_negative: f64,
    /// Multiplier on the hinge: `L(rank estimate)` for WARP, 1 for AUC.
    pub weight: f64,
    pub trials: usize,
}

/// Gradient of `f_negative - f_positive` with respect to the columns it
/// depends on.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradient {
    pub artists: BTreeMap<usize, Vec<f64>>,
    pub tags: BTreeMap<usize, Vec<f64>>,
    pub features: BTreeMap<usize, Vec<f64>>,
}

impl Gradient {
    fn slot<'m>(map: &'m mut BTreeMap<usize, Vec<f64>>, col: usize, d: usize) -> &'m mut Vec<f64> {
        map.entry(col).or_insert_with(|| vec![0.0; d])
    }

    pub fn touched(&self) -> Touched {
        Touched {
            artists: self.artists.keys().copied().collect(),
            tags: self.tags.keys().copied().collect(),
            features: self.features.keys().copied().collect(),
        }
    }
}

fn to_f64(x: &[f32]) -> Vec<f64> {
    x.iter().map(|&v| v as f64).collect()
}

/// The embedded input of an example.
fn embed_input(model: &EmbeddingModel, data: &TaskData, input: Input) -> Vec<f64> {
    match input {
        Input::Song(i) => model
            .embed_song(data.song(i))
            .expect("training songs match the model's feature dimension"),
        Input::Artist(a) => to_f64(model.artists.col(a)),
    }
}

/// Score of output label `label` against an embedded input.
fn score_output(model: &EmbeddingModel, data: &TaskData, task: TaskId, e: &[f64], label: usize) -> f64 {
    match task {
        TaskId::ArtistPred | TaskId::SimArtist => linalg::dot(e, model.artists.col(label)),
        TaskId::TagPred => linalg::dot(e, model.tags.col(label)),
        TaskId::SongPred | TaskId::SimSong => {
            let s = model
                .embed_song(data.song(label))
                .expect("training songs match the model's feature dimension");
            linalg::dot64(e, &s)
        }
    }
}

fn check_example(model: &EmbeddingModel, data: &TaskData, ex: &Example) -> Result<()> {
    let ok = match (ex.task.song_query(), ex.input) {
        (true, Input::Song(i)) => i < data.data.len(),
        (false, Input::Artist(a)) => a < model.n_artists(),
        _ => false,
    };
    if !ok {
        return Err(Error::Config(format!("example input does not fit task {}", ex.task)));
    }
    if ex.positives.is_empty() {
        return Err(Error::NoExamples(format!("example for task {} has no positive labels", ex.task)));
    }
    if model.universe()
        != (Universe {
            n_artists: data.data.n_artists,
            n_tags: data.data.n_tags,
            feat_dim: data.data.feat_dim,
        })
    {
        return Err(Error::Config("model and training data universes differ".into()));
    }
    Ok(())
}

/// Pick a positive and search for a margin-violating negative.
///
/// Returns `None` when sampling finds no violator. RNG use: one draw for
/// the positive, then one per negative trial.
pub fn sample_pair<R: Rng + ?Sized>(
    model: &EmbeddingModel,
    data: &TaskData,
    example: &Example,
    params: &StepParams,
    rng: &mut R,
) -> Result<Option<SampledPair>> {
    check_example(model, data, example)?;
    let (size, self_label) = data.universe(example);
    // Labels are re-indexed to skip the query itself, so the sampler sees a
    // contiguous universe `0..y`.
    let y = size - self_label.is_some() as usize;
    let to_id = |l: usize| match self_label {
        Some(s) if l >= s => l + 1,
        _ => l,
    };
    let positives: Vec<usize> = example
        .positives
        .iter()
        .filter(|&&p| Some(p) != self_label)
        .map(|&p| match self_label {
            Some(s) if p > s => p - 1,
            _ => p,
        })
        .collect();
    if positives.is_empty() || positives.len() >= y {
        return Err(Error::NoExamples(format!(
            "example for task {} has no usable positive/negative split",
            example.task
        )));
    }
    let e = embed_input(model, data, example.input);
    let j = positives[rng.random_range(0..positives.len())];
    let f_j = score_output(model, data, example.task, &e, to_id(j));
    let mut score = |l: usize| score_output(model, data, example.task, &e, to_id(l));

    match params.loss {
        LossKind::Warp => {
            let y_est = match params.song_pool {
                Some(p) if example.task.song_candidates() => p.min(y),
                _ => y,
            };
            let found = losses::sample_until_violation(
                &mut score,
                |r: &mut R| losses::draw_negative(y, &positives, r),
                j,
                f_j,
                y_est,
                rng,
            );
            Ok(found.map(|v| SampledPair {
                positive: to_id(v.positive),
                negative: to_id(v.negative),
                f_positive: v.f_positive,
                f_negative: v.f_negative,
                weight: big_l(v.estimated_rank(), params.alpha),
                trials: v.trials,
            }))
        }
        LossKind::Auc => {
            let k = nth_negative(rng.random_range(0..y - positives.len()), &positives);
            let f_k = score(k);
            Ok((f_k > f_j - 1.0).then(|| SampledPair {
                positive: to_id(j),
                negative: to_id(k),
                f_positive: f_j,
                f_negative: f_k,
                weight: 1.0,
                trials: 1,
            }))
        }
    }
}

/// Analytic gradient of `f_negative - f_positive` for `example`.
pub fn pair_gradient(
    model: &EmbeddingModel,
    data: &TaskData,
    example: &Example,
    positive: usize,
    negative: usize,
) -> Gradient {
    let d = model.dim();
    let mut g = Gradient::default();
    let e = embed_input(model, data, example.input);
    match example.task {
        TaskId::ArtistPred | TaskId::TagPred => {
            let (labels, map): (&ColumnMatrix, &mut BTreeMap<usize, Vec<f64>>) =
                if example.task == TaskId::TagPred {
                    (&model.tags, &mut g.tags)
                } else {
                    (&model.artists, &mut g.artists)
                };
            for (col, sign) in [(positive, -1.0), (negative, 1.0)] {
                let slot = Gradient::slot(map, col, d);
                for (s, v) in slot.iter_mut().zip(&e) {
                    *s += sign * v;
                }
            }
            let Input::Song(i) = example.input else { unreachable!() };
            let (pk, pj) = (labels.col(negative), labels.col(positive));
            for (c, x) in data.song(i).iter() {
                let slot = Gradient::slot(&mut g.features, c, d);
                for r in 0..d {
                    slot[r] += x as f64 * (pk[r] as f64 - pj[r] as f64);
                }
            }
        }
        TaskId::SimArtist => {
            let Input::Artist(q) = example.input else { unreachable!() };
            let (ak, aj) = (model.artists.col(negative), model.artists.col(positive));
            let slot = Gradient::slot(&mut g.artists, q, d);
            for r in 0..d {
                slot[r] += ak[r] as f64 - aj[r] as f64;
            }
            for (col, sign) in [(positive, -1.0), (negative, 1.0)] {
                let slot = Gradient::slot(&mut g.artists, col, d);
                for (s, v) in slot.iter_mut().zip(&e) {
                    *s += sign * v;
                }
            }
        }
        TaskId::SongPred => {
            let Input::Artist(q) = example.input else { unreachable!() };
            let delta = data.song(negative).difference(data.song(positive));
            let slot = Gradient::slot(&mut g.artists, q, d);
            for &(c, x) in &delta {
                linalg::axpy(slot, x, model.features.col(c));
            }
            for &(c, x) in &delta {
                let slot = Gradient::slot(&mut g.features, c, d);
                for (s, v) in slot.iter_mut().zip(&e) {
                    *s += x * v;
                }
            }
        }
        TaskId::SimSong => {
            // f = (V s_q) . (V delta): V appears on both sides.
            let Input::Song(q) = example.input else { unreachable!() };
            let delta = data.song(negative).difference(data.song(positive));
            let mut v_delta = vec![0.0; d];
            for &(c, x) in &delta {
                linalg::axpy(&mut v_delta, x, model.features.col(c));
            }
            for &(c, x) in &delta {
                let slot = Gradient::slot(&mut g.features, c, d);
                for (s, v) in slot.iter_mut().zip(&e) {
                    *s += x * v;
                }
            }
            for (c, x) in data.song(q).iter() {
                let slot = Gradient::slot(&mut g.features, c, d);
                for (s, v) in slot.iter_mut().zip(&v_delta) {
                    *s += x as f64 * v;
                }
            }
        }
    }
    g
}

/// `params -= scale * gradient`, then project the touched columns.
pub fn apply_gradient(model: &mut EmbeddingModel, g: &Gradient, scale: f64) {
    for (m, map) in [
        (&mut model.artists, &g.artists),
        (&mut model.tags, &g.tags),
        (&mut model.features, &g.features),
    ] {
        for (&col, grad) in map {
            for (p, gv) in m.col_mut(col).iter_mut().zip(grad) {
                *p = (*p as f64 - scale * gv) as f32;
            }
        }
    }
    model.project_columns(Some(&g.touched()));
}

/// One stochastic step on `example`.
pub fn sgd_step<R: Rng + ?Sized>(
    model: &mut EmbeddingModel,
    data: &TaskData,
    example: &Example,
    params: &StepParams,
    rng: &mut R,
) -> Result<StepOutcome> {
    let Some(pair) = sample_pair(model, data, example, params, rng)? else {
        return Ok(StepOutcome::NoViolation);
    };
    let g = pair_gradient(model, data, example, pair.positive, pair.negative);
    apply_gradient(model, &g, params.learning_rate * pair.weight);
    Ok(StepOutcome::Updated)
}

/// Uniform choice among the configured tasks.
pub fn pick_task<R: Rng + ?Sized>(tasks: &[TaskId], rng: &mut R) -> TaskId {
    tasks[rng.random_range(0..tasks.len())]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub step: usize,
    /// Validation precision@k per task.
    pub precision: Vec<(TaskId, f64)>,
    pub mean: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub steps_taken: usize,
    pub updates: usize,
    pub checkpoints: Vec<Checkpoint>,
    /// Step of the checkpoint whose model was kept, if any.
    pub best_step: Option<usize>,
    pub model: EmbeddingModel,
    pub wall_time: Duration,
}

impl PartialEq for TrainReport {
    /// Wall time is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.steps_taken == other.steps_taken
            && self.updates == other.updates
            && self.checkpoints == other.checkpoints
            && self.best_step == other.best_step
            && self.model == other.model
    }
}

impl TrainReport {
    pub fn best_checkpoint(&self) -> Option<&Checkpoint> {
        self.best_step
            .and_then(|s| self.checkpoints.iter().find(|c| c.step == s))
    }
}

fn check_usable(
    config: &TrainConfig,
    train: &TaskData,
    valid: &Dataset,
    similarity: Option<&ArtistSimilarity>,
) -> Result<()> {
    for &t in &config.tasks {
        if t == TaskId::SimArtist && similarity.is_none() {
            return Err(Error::Config("task sa requires an artist similarity file".into()));
        }
        if train.n_usable(t) == 0 {
            return Err(Error::NoExamples(format!("no usable training examples for task {t}")));
        }
        let (q, _) = crate::evaluation::build_queries(valid, similarity, t)?;
        if q.is_empty() {
            return Err(Error::NoExamples(format!("no usable validation queries for task {t}")));
        }
    }
    Ok(())
}

fn validation_checkpoint(
    model: &EmbeddingModel,
    valid: &Dataset,
    similarity: Option<&ArtistSimilarity>,
    tasks: &[TaskId],
    k: usize,
    step: usize,
) -> Result<Checkpoint> {
    let res = evaluate(model, valid, similarity, tasks, &[k])?;
    let precision: Vec<(TaskId, f64)> = res
        .tasks
        .iter()
        .map(|t| (t.task, t.at(k).unwrap_or(0.0)))
        .collect();
    let mean = precision.iter().map(|x| x.1).sum::<f64>() / precision.len() as f64;
    Ok(Checkpoint {
        step,
        precision,
        mean,
    })
}

/// Train one model, keeping the best validation checkpoint.
pub fn train(
    train_data: &Dataset,
    valid: &Dataset,
    similarity: Option<&ArtistSimilarity>,
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    if valid.is_empty() {
        return Err(Error::NoExamples("validation set is empty".into()));
    }
    if (valid.n_artists, valid.n_tags, valid.feat_dim)
        != (train_data.n_artists, train_data.n_tags, train_data.feat_dim)
    {
        return Err(Error::Config("training and validation universes differ".into()));
    }
    let started = Instant::now();
    let tasks = config.unique_tasks();
    let data = TaskData::new(train_data, similarity);
    check_usable(config, &data, valid, similarity)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let universe = Universe {
        n_artists: train_data.n_artists,
        n_tags: train_data.n_tags,
        feat_dim: train_data.feat_dim,
    };
    let mut model = init_model(config.dim, universe, config.max_norm, &mut rng)?;
    let params = StepParams::from(config);
    let every = config.eval_interval(train_data.len());

    let mut checkpoints = Vec::new();
    let mut best: Option<(f64, usize, EmbeddingModel)> = None;
    let mut stale = 0;
    let mut steps = 0;
    let mut updates = 0;

    let mut checkpoint = |model: &mut EmbeddingModel,
                          step: usize,
                          checkpoints: &mut Vec<Checkpoint>,
                          best: &mut Option<(f64, usize, EmbeddingModel)>|
     -> Result<bool> {
        model.project_columns(None);
        let cp = validation_checkpoint(model, valid, similarity, &tasks, config.k_eval, step)?;
        log::debug!("step {step}: validation p@{} = {:.4}", config.k_eval, cp.mean);
        let improved = best.as_ref().is_none_or(|b| cp.mean > b.0);
        if improved {
            *best = Some((cp.mean, step, model.clone()));
            stale = 0;
        } else {
            stale += 1;
        }
        checkpoints.push(cp);
        Ok(stale >= config.patience)
    };

    while steps < config.max_steps {
        let task = pick_task(&config.tasks, &mut rng);
        let ex = data.sample_example(task, &mut rng)?;
        if sgd_step(&mut model, &data, &ex, &params, &mut rng)? == StepOutcome::Updated {
            updates += 1;
        }
        steps += 1;
        if steps % every == 0 && checkpoint(&mut model, steps, &mut checkpoints, &mut best)? {
            break;
        }
    }
    if steps > 0 && steps % every != 0 {
        checkpoint(&mut model, steps, &mut checkpoints, &mut best)?;
    }

    let (best_step, model) = match best {
        Some((_, step, m)) => (Some(step), m),
        None => (None, model),
    };
    Ok(TrainReport {
        steps_taken: steps,
        updates,
        checkpoints,
        best_step,
        model,
        wall_time: started.elapsed(),
    })
}

/// Train `n_members` models with seeds `seed, seed + 1, ...` in parallel.
pub fn train_ensemble_reports(
    train_data: &Dataset,
    valid: &Dataset,
    similarity: Option<&ArtistSimilarity>,
    config: &TrainConfig,
    n_members: usize,
) -> Result<Vec<TrainReport>> {
    if n_members == 0 {
        return Err(Error::Config("an ensemble needs at least one member".into()));
    }
    (0..n_members as u64)
        .into_par_iter()
        .map(|i| {
            let mut c = config.clone();
            c.seed = config.seed.wrapping_add(i);
            train(train_data, valid, similarity, &c)
        })
        .collect()
}

pub fn train_ensemble(
    train_data: &Dataset,
    valid: &Dataset,
    similarity: Option<&ArtistSimilarity>,
    config: &TrainConfig,
    n_members: usize,
) -> Result<Vec<EmbeddingModel>> {
    Ok(train_ensemble_reports(train_data, valid, similarity, config, n_members)?
        .into_iter()
        .map(|r| r.model)
        .collect())
}
