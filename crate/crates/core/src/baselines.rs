//! Comparison systems: one-vs-rest linear classifiers trained with the
//! margin perceptron, and cosine similarity in feature space.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::dataset::{Dataset, SongRecord};
use crate::error::{Error, Result};
use crate::model::{eof_as, Query, Scorer, TaskId, Universe};
use crate::opcount;
use crate::ranking::{rank_scores, RankedList};
use crate::sparse::SparseVector;

pub const OVR_MAGIC: &[u8; 4] = b"OVR1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelKind {
    Tag,
    Artist,
}

impl LabelKind {
    pub fn labels(self, r: &SongRecord) -> &[u32] {
        match self {
            LabelKind::Tag => &r.tags,
            LabelKind::Artist => &r.artists,
        }
    }

    pub fn universe(self, data: &Dataset) -> usize {
        match self {
            LabelKind::Tag => data.n_tags,
            LabelKind::Artist => data.n_artists,
        }
    }

    pub fn task(self) -> TaskId {
        match self {
            LabelKind::Tag => TaskId::TagPred,
            LabelKind::Artist => TaskId::ArtistPred,
        }
    }
}

impl fmt::Display for LabelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelKind::Tag => "tag",
            LabelKind::Artist => "artist",
        })
    }
}

impl FromStr for LabelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tag" | "tags" | "tp" => Ok(LabelKind::Tag),
            "artist" | "artists" | "ap" => Ok(LabelKind::Artist),
            _ => Err(Error::Config(format!("unknown label kind `{s}` (tag or artist)"))),
        }
    }
}

/// One linear scorer `w_i . x` per label, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct OvrModel {
    pub kind: LabelKind,
    n_labels: usize,
    feat_dim: usize,
    weights: Vec<f32>,
    /// The other label universe, carried so the model can be evaluated
    /// against a full dataset.
    other_labels: usize,
}

impl OvrModel {
    pub fn zeros(kind: LabelKind, n_labels: usize, feat_dim: usize) -> Self {
        OvrModel {
            kind,
            n_labels,
            feat_dim,
            weights: vec![0.0; n_labels * feat_dim],
            other_labels: 0,
        }
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn feat_dim(&self) -> usize {
        self.feat_dim
    }

    pub fn row(&self, label: usize) -> &[f32] {
        &self.weights[label * self.feat_dim..(label + 1) * self.feat_dim]
    }

    fn row_mut(&mut self, label: usize) -> &mut [f32] {
        &mut self.weights[label * self.feat_dim..(label + 1) * self.feat_dim]
    }

    /// Set the size of the label universe this model does not predict, so
    /// that evaluation can check it against a dataset.
    pub fn with_other_labels(mut self, n: usize) -> Self {
        self.other_labels = n;
        self
    }

    /// `w_label . x`, touching only the nonzeros of `x`.
    pub fn score(&self, label: usize, x: &SparseVector) -> f64 {
        let w = self.row(label);
        opcount::add(x.nnz());
        x.iter().map(|(i, v)| w[i] as f64 * v as f64).sum()
    }

    pub fn scores(&self, x: &SparseVector) -> Result<Vec<f64>> {
        if x.dim() != self.feat_dim {
            return Err(Error::DimensionMismatch {
                expected: self.feat_dim,
                got: x.dim(),
            });
        }
        Ok((0..self.n_labels).map(|l| self.score(l, x)).collect())
    }

    /// Total hinge `sum_i sum_j max(0, 1 - phi(i, j) f_j(s_i))` over labelled
    /// records.
    pub fn hinge_loss(&self, data: &Dataset) -> f64 {
        let mut total = 0.0;
        for r in data.records.iter().filter(|r| !self.kind.labels(r).is_empty()) {
            let labels = self.kind.labels(r);
            for j in 0..self.n_labels {
                let phi = if labels.binary_search(&(j as u32)).is_ok() { 1.0 } else { -1.0 };
                total += (1.0 - phi * self.score(j, &r.features)).max(0.0);
            }
        }
        total
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(OVR_MAGIC)?;
        w.write_u32::<LittleEndian>(self.n_labels as u32)?;
        w.write_u32::<LittleEndian>(self.feat_dim as u32)?;
        for v in &self.weights {
            w.write_f32::<LittleEndian>(*v)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read, kind: LabelKind) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(eof_as("magic"))?;
        if &magic != OVR_MAGIC {
            return Err(Error::Format("bad magic, expected OVR1".into()));
        }
        let n_labels = r.read_u32::<LittleEndian>().map_err(eof_as("header"))? as usize;
        let feat_dim = r.read_u32::<LittleEndian>().map_err(eof_as("header"))? as usize;
        let mut m = OvrModel::zeros(kind, n_labels, feat_dim);
        r.read_f32_into::<LittleEndian>(&mut m.weights)
            .map_err(eof_as("weight matrix"))?;
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Format("trailing bytes after weight matrix".into()));
        }
        if m.weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite weight".into()));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, kind: LabelKind) -> Result<Self> {
        OvrModel::read_from(&mut BufReader::new(File::open(path)?), kind)
    }
}

/// Margin perceptron, one classifier per label: whenever
/// `phi * w_j . s < 1`, set `w_j += gamma * phi * s`. Examples are visited
/// in a fresh random order each epoch.
pub fn ovr_train<R: Rng + ?Sized>(
    data: &Dataset,
    kind: LabelKind,
    epochs: usize,
    gamma: f64,
    rng: &mut R,
) -> Result<OvrModel> {
    let order_base: Vec<usize> = (0..data.len())
        .filter(|&i| !kind.labels(&data.records[i]).is_empty())
        .collect();
    if order_base.is_empty() {
        return Err(Error::NoExamples(format!("no records carry {kind} labels")));
    }
    let n_labels = kind.universe(data);
    let other = match kind {
        LabelKind::Tag => data.n_artists,
        LabelKind::Artist => data.n_tags,
    };
    let mut model = OvrModel::zeros(kind, n_labels, data.feat_dim).with_other_labels(other);
    let mut order = order_base;
    for _ in 0..epochs {
        order.shuffle(rng);
        for &i in &order {
            let r = &data.records[i];
            let labels = kind.labels(r);
            for j in 0..n_labels {
                let phi = if labels.binary_search(&(j as u32)).is_ok() { 1.0 } else { -1.0 };
                if 1.0 - phi * model.score(j, &r.features) > 0.0 {
                    let row = model.row_mut(j);
                    for (c, v) in r.features.iter() {
                        row[c] = (row[c] as f64 + gamma * phi * v as f64) as f32;
                    }
                }
            }
        }
    }
    Ok(model)
}

/// Labels by descending `w_i . x`, ties by ascending id.
pub fn ovr_rank(model: &OvrModel, x: &SparseVector) -> Result<RankedList> {
    let scores = model.scores(x)?;
    Ok(rank_scores(&scores, None, scores.len()))
}

impl Scorer for OvrModel {
    type Corpus = ();

    fn universe(&self) -> Universe {
        let (n_artists, n_tags) = match self.kind {
            LabelKind::Tag => (self.other_labels, self.n_labels),
            LabelKind::Artist => (self.n_labels, self.other_labels),
        };
        Universe {
            n_artists,
            n_tags,
            feat_dim: self.feat_dim,
        }
    }

    fn supports(&self, task: TaskId) -> bool {
        task == self.kind.task()
    }

    fn prepare(&self, _songs: &[&SparseVector]) -> Result<()> {
        Ok(())
    }

    fn scores(&self, task: TaskId, query: &Query, _corpus: &()) -> Result<Vec<f64>> {
        match query {
            Query::Song { features, .. } if self.supports(task) => OvrModel::scores(self, features),
            _ => Err(Error::Config(format!("one-vs-rest {} model cannot rank task {task}", self.kind))),
        }
    }
}

/// `(q . s) / (|q| |s|)`, zero when either vector is zero.
pub fn cosine(q: &SparseVector, s: &SparseVector) -> f64 {
    let (nq, ns) = (q.norm(), s.norm());
    if nq == 0.0 || ns == 0.0 {
        0.0
    } else {
        q.dot(s) / (nq * ns)
    }
}

/// Rank `corpus` by cosine similarity to `query`, leaving out
/// `corpus[self_index]` when given.
pub fn cosine_rank(
    query: &SparseVector,
    corpus: &[&SparseVector],
    self_index: Option<usize>,
) -> Result<RankedList> {
    if query.is_empty() {
        return Err(Error::Config("cosine ranking needs a nonzero query".into()));
    }
    let scores = cosine_scores(query, corpus)?;
    Ok(rank_scores(&scores, self_index, corpus.len()))
}

fn cosine_scores(query: &SparseVector, corpus: &[&SparseVector]) -> Result<Vec<f64>> {
    corpus
        .iter()
        .map(|s| {
            if s.dim() != query.dim() {
                Err(Error::DimensionMismatch {
                    expected: query.dim(),
                    got: s.dim(),
                })
            } else {
                Ok(cosine(query, s))
            }
        })
        .collect()
}

/// Cosine similarity as a similar-song scorer.
#[derive(Debug, Clone, Copy)]
pub struct CosineScorer {
    pub universe: Universe,
}

impl Scorer for CosineScorer {
    type Corpus = Vec<SparseVector>;

    fn universe(&self) -> Universe {
        self.universe
    }

    fn supports(&self, task: TaskId) -> bool {
        task == TaskId::SimSong
    }

    fn prepare(&self, songs: &[&SparseVector]) -> Result<Vec<SparseVector>> {
        Ok(songs.iter().map(|s| (*s).clone()).collect())
    }

    fn scores(&self, task: TaskId, query: &Query, corpus: &Vec<SparseVector>) -> Result<Vec<f64>> {
        match query {
            Query::Song { features, .. } if task == TaskId::SimSong => {
                let refs: Vec<&SparseVector> = corpus.iter().collect();
                cosine_scores(features, &refs)
            }
            _ => Err(Error::Config(format!("cosine similarity cannot rank task {task}"))),
        }
    }
}
