//! Precision@k over held-out songs for every task.
//!
//! Relevance per task, for a test set of songs:
//! - artist prediction: the song's artists;
//! - tag prediction: the song's tags;
//! - similar songs: the other test songs sharing an artist with the query,
//!   ranked over the test set with the query left out;
//! - song prediction: for each artist present in the test set, its test
//!   songs, ranked over the test set;
//! - similar artists: the ground-truth similarity lists.
//!
//! Queries with no relevant items are skipped and counted.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::dataset::{ArtistSimilarity, Dataset};
use crate::error::{Error, Result};
use crate::model::{Query, Scorer, TaskId};
use crate::ranking::{rank_order, rank_scores, RankedList};
use crate::sparse::SparseVector;

/// `|top-k ∩ relevant| / k`. The denominator is always `k`, even when the
/// list is shorter or fewer than `k` items are relevant.
pub fn precision_at_k(ranked: &RankedList, relevant: &[usize], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Config("precision@k needs k >= 1".into()));
    }
    let hits = ranked
        .items
        .iter()
        .take(k)
        .filter(|(l, _)| relevant.contains(l))
        .count();
    Ok(hits as f64 / k as f64)
}

/// How rankings are produced during evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RankMode {
    /// Partial selection of the top `k`.
    #[default]
    TopK,
    /// Sort the whole candidate list; used as a reference.
    FullSort,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskEval {
    pub task: TaskId,
    /// `(k, mean precision@k)`, ascending in `k`.
    pub precision: Vec<(usize, f64)>,
    pub n_queries: usize,
    /// Queries dropped for having no relevant items.
    pub n_skipped: usize,
}

impl TaskEval {
    pub fn at(&self, k: usize) -> Option<f64> {
        self.precision.iter().find(|x| x.0 == k).map(|x| x.1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub tasks: Vec<TaskEval>,
}

impl EvalResult {
    pub fn task(&self, task: TaskId) -> Option<&TaskEval> {
        self.tasks.iter().find(|t| t.task == task)
    }

    /// Mean over tasks of precision at `k`.
    pub fn mean_at(&self, k: usize) -> f64 {
        let vals: Vec<f64> = self.tasks.iter().filter_map(|t| t.at(k)).collect();
        if vals.is_empty() {
            0.0
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    }

    /// `task TAB k TAB precision TAB n_queries` rows after `#`-prefixed header
    /// lines.
    pub fn to_tsv(&self, header: &[(String, String)]) -> String {
        let mut out = String::new();
        for (key, value) in header {
            let _ = writeln!(out, "# {key}\t{value}");
        }
        out.push_str("task\tk\tprecision\tn_queries\n");
        for t in &self.tasks {
            for (k, p) in &t.precision {
                let _ = writeln!(out, "{}\t{}\t{:.6}\t{}", t.task, k, p, t.n_queries);
            }
        }
        out
    }

    /// One row per task, one column per k.
    pub fn to_table(&self) -> String {
        let ks: Vec<usize> = self
            .tasks
            .first()
            .map(|t| t.precision.iter().map(|x| x.0).collect())
            .unwrap_or_default();
        let mut out = format!("{:<6}", "task");
        for k in &ks {
            let _ = write!(out, "{:>9}", format!("p@{k}"));
        }
        let _ = writeln!(out, "{:>10}{:>9}", "queries", "skipped");
        for t in &self.tasks {
            let _ = write!(out, "{:<6}", t.task.to_string());
            for (_, p) in &t.precision {
                let _ = write!(out, "{:>9.4}", p);
            }
            let _ = writeln!(out, "{:>10}{:>9}", t.n_queries, t.n_skipped);
        }
        out
    }
}

/// One evaluation query and its relevant candidates.
#[derive(Debug, Clone)]
pub struct EvalQuery {
    pub input: QueryInput,
    /// Sorted relevant candidate ids.
    pub relevant: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryInput {
    /// Index of a song in the evaluated dataset.
    Song(usize),
    Artist(usize),
}

/// The queries of `task` over `data`, plus the number skipped for lack of
/// relevant items.
pub fn build_queries(
    data: &Dataset,
    similarity: Option<&ArtistSimilarity>,
    task: TaskId,
) -> Result<(Vec<EvalQuery>, usize)> {
    let widen = |v: &[u32]| v.iter().map(|&x| x as usize).collect::<Vec<_>>();
    let mut skipped = 0;
    let mut queries = Vec::new();
    let mut push = |input, relevant: Vec<usize>| {
        if relevant.is_empty() {
            skipped += 1;
        } else {
            queries.push(EvalQuery { input, relevant });
        }
    };
    match task {
        TaskId::ArtistPred => {
            for (i, r) in data.records.iter().enumerate() {
                push(QueryInput::Song(i), widen(&r.artists));
            }
        }
        TaskId::TagPred => {
            for (i, r) in data.records.iter().enumerate() {
                push(QueryInput::Song(i), widen(&r.tags));
            }
        }
        TaskId::SimSong => {
            for (i, rel) in data.same_artist_songs().into_iter().enumerate() {
                push(QueryInput::Song(i), rel);
            }
        }
        TaskId::SongPred => {
            for (a, songs) in data.songs_by_artist().into_iter().enumerate() {
                if !songs.is_empty() {
                    push(QueryInput::Artist(a), songs);
                }
            }
        }
        TaskId::SimArtist => {
            let sim = similarity.ok_or_else(|| {
                Error::Config("task sa requires an artist similarity file".into())
            })?;
            for (a, sims) in &sim.entries {
                if *a as usize >= data.n_artists {
                    return Err(Error::OutOfRange {
                        kind: "artist",
                        id: *a as usize,
                        size: data.n_artists,
                    });
                }
                push(QueryInput::Artist(*a as usize), widen(sims));
            }
        }
    }
    Ok((queries, skipped))
}

fn full_sort_rank(scores: &[f64], exclude: Option<usize>, k: usize) -> RankedList {
    let mut items: Vec<(usize, f64)> = scores
        .iter()
        .copied()
        .enumerate()
        .filter(|(i, _)| Some(*i) != exclude)
        .collect();
    items.sort_by(rank_order);
    items.truncate(k);
    RankedList { items }
}

/// Evaluate `scorer` on `data` for each task at each cutoff in `ks`.
pub fn evaluate<S: Scorer>(
    scorer: &S,
    data: &Dataset,
    similarity: Option<&ArtistSimilarity>,
    tasks: &[TaskId],
    ks: &[usize],
) -> Result<EvalResult> {
    evaluate_with(scorer, data, similarity, tasks, ks, RankMode::TopK)
}

pub fn evaluate_with<S: Scorer>(
    scorer: &S,
    data: &Dataset,
    similarity: Option<&ArtistSimilarity>,
    tasks: &[TaskId],
    ks: &[usize],
    mode: RankMode,
) -> Result<EvalResult> {
    let mut ks: Vec<usize> = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() || ks[0] == 0 {
        return Err(Error::Config("cutoffs must be a non-empty list of k >= 1".into()));
    }
    let u = scorer.universe();
    if u.feat_dim != data.feat_dim || u.n_artists != data.n_artists || u.n_tags != data.n_tags {
        return Err(Error::Config(format!(
            "model universe {}x{}x{} does not match data {}x{}x{}",
            u.n_artists, u.n_tags, u.feat_dim, data.n_artists, data.n_tags, data.feat_dim
        )));
    }
    let k_max = *ks.last().unwrap();
    let songs: Vec<&SparseVector> = data.records.iter().map(|r| &r.features).collect();
    let mut corpus = None;
    let mut out = Vec::with_capacity(tasks.len());
    for &task in tasks {
        if !scorer.supports(task) {
            return Err(Error::Config(format!("scorer cannot rank task {task}")));
        }
        let (queries, n_skipped) = build_queries(data, similarity, task)?;
        if queries.is_empty() {
            return Err(Error::NoExamples(format!(
                "no evaluation queries with relevant items for task {task}"
            )));
        }
        if task.song_candidates() && corpus.is_none() {
            corpus = Some(scorer.prepare(&songs)?);
        }
        let empty;
        let corpus_ref = match corpus.as_ref() {
            Some(c) => c,
            None => {
                empty = scorer.prepare(&[])?;
                &empty
            }
        };
        let per_query: Vec<Vec<f64>> = queries
            .par_iter()
            .map(|q| -> Result<Vec<f64>> {
                let query = match q.input {
                    QueryInput::Song(i) => Query::corpus_song(i, &data.records[i].features),
                    QueryInput::Artist(a) => Query::Artist(a),
                };
                let scores = scorer.scores(task, &query, corpus_ref)?;
                let exclude = query.self_label(task);
                let ranked = match mode {
                    RankMode::TopK => rank_scores(&scores, exclude, k_max),
                    RankMode::FullSort => full_sort_rank(&scores, exclude, k_max),
                };
                ks.iter()
                    .map(|&k| precision_at_k(&ranked, &q.relevant, k))
                    .collect()
            })
            .collect::<Result<_>>()?;
        let n = per_query.len();
        let precision = ks
            .iter()
            .enumerate()
            .map(|(ki, &k)| {
                let sum: f64 = per_query.iter().map(|p| p[ki]).sum();
                (k, sum / n as f64)
            })
            .collect();
        out.push(TaskEval {
            task,
            precision,
            n_queries: n,
            n_skipped,
        });
    }
    Ok(EvalResult { tasks: out })
}
