//! The joint embedding model.
//!
//! Artists and tags own one column each in `A` and `T`; a song is mapped into
//! the same `d`-dimensional space through the linear map `V` applied to its
//! sparse feature vector. Every task scores a candidate by a dot product of
//! two such embeddings.

use std::fmt;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::linalg::{self, ColumnMatrix};
use crate::ranking::{rank_scores, RankedList};
use crate::sparse::SparseVector;

pub const MODEL_MAGIC: &[u8; 4] = b"MUSL";
pub const MODEL_VERSION: u32 = 1;

/// Slack allowed on column norms after projection.
pub const NORM_EPS: f64 = 1e-6;

/// The five ranking tasks sharing one embedding space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaskId {
    /// Song features to artists: `A_i . V s`.
    ArtistPred,
    /// Artist to songs: `(V s) . A_i`.
    SongPred,
    /// Artist to artists: `A_j . A_i`.
    SimArtist,
    /// Song to songs: `(V s') . (V s'')`.
    SimSong,
    /// Song features to tags: `T_i . V s`.
    TagPred,
}

impl TaskId {
    pub const ALL: [TaskId; 5] = [
        TaskId::ArtistPred,
        TaskId::SongPred,
        TaskId::SimArtist,
        TaskId::SimSong,
        TaskId::TagPred,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            TaskId::ArtistPred => "ap",
            TaskId::SongPred => "sp",
            TaskId::SimArtist => "sa",
            TaskId::SimSong => "ss",
            TaskId::TagPred => "tp",
        }
    }

    /// Whether the query of this task is a song (otherwise an artist).
    pub fn song_query(self) -> bool {
        matches!(self, TaskId::ArtistPred | TaskId::SimSong | TaskId::TagPred)
    }

    /// Whether the ranked candidates are songs (otherwise stored labels).
    pub fn song_candidates(self) -> bool {
        matches!(self, TaskId::SongPred | TaskId::SimSong)
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for TaskId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskId::ALL
            .iter()
            .copied()
            .find(|t| t.short_name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown task `{s}` (expected ap, sp, sa, ss or tp)")))
    }
}

/// The input side of a ranking request.
#[derive(Debug, Clone, Copy)]
pub enum Query<'a> {
    /// A song, optionally identified by its position in the candidate corpus
    /// so that similar-song ranking can leave it out.
    Song {
        features: &'a SparseVector,
        corpus_index: Option<usize>,
    },
    Artist(usize),
}

impl<'a> Query<'a> {
    pub fn song(features: &'a SparseVector) -> Self {
        Query::Song {
            features,
            corpus_index: None,
        }
    }

    pub fn corpus_song(index: usize, features: &'a SparseVector) -> Self {
        Query::Song {
            features,
            corpus_index: Some(index),
        }
    }

    /// The candidate that must not be returned for this query under `task`.
    pub fn self_label(&self, task: TaskId) -> Option<usize> {
        match (task, self) {
            (TaskId::SimArtist, Query::Artist(a)) => Some(*a),
            (TaskId::SimSong, Query::Song { corpus_index, .. }) => *corpus_index,
            _ => None,
        }
    }
}

/// The output side of a single score.
#[derive(Debug, Clone, Copy)]
pub enum Candidate<'a> {
    Label(usize),
    Song(&'a SparseVector),
}

/// Sizes of the label and feature universes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Universe {
    pub n_artists: usize,
    pub n_tags: usize,
    pub feat_dim: usize,
}

/// Anything that can rank candidates for a task.
///
/// `prepare` turns a song corpus into whatever per-scorer cache makes scoring
/// songs cheap (embeddings for the embedding model, norms for cosine).
pub trait Scorer: Sync {
    type Corpus: Sync;

    fn universe(&self) -> Universe;

    fn supports(&self, task: TaskId) -> bool;

    fn prepare(&self, songs: &[&SparseVector]) -> Result<Self::Corpus>;

    /// Score every candidate: all labels of the task's label universe, or
    /// every song in `corpus` for song-valued tasks.
    fn scores(&self, task: TaskId, query: &Query, corpus: &Self::Corpus) -> Result<Vec<f64>>;

    /// Top-`k` candidates, ties by ascending id, with the query itself left
    /// out for similarity tasks. `k` beyond the universe returns everything.
    fn rank(&self, task: TaskId, query: &Query, corpus: &Self::Corpus, k: usize) -> Result<RankedList> {
        if k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        let scores = self.scores(task, query, corpus)?;
        Ok(rank_scores(&scores, query.self_label(task), k))
    }
}

/// Columns modified by an update, per matrix.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Touched {
    pub artists: Vec<usize>,
    pub tags: Vec<usize>,
    pub features: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    /// Artist embeddings, `d x n_artists`.
    pub artists: ColumnMatrix,
    /// Tag embeddings, `d x n_tags`.
    pub tags: ColumnMatrix,
    /// Song feature map, `d x feat_dim`.
    pub features: ColumnMatrix,
    /// Norm bound on every column.
    pub max_norm: f32,
}

impl EmbeddingModel {
    pub fn zeros(d: usize, universe: Universe, max_norm: f32) -> Result<Self> {
        if d == 0 {
            return Err(Error::Config("embedding dimension must be at least 1".into()));
        }
        if !(max_norm > 0.0) || !max_norm.is_finite() {
            return Err(Error::Config("norm bound must be positive and finite".into()));
        }
        Ok(EmbeddingModel {
            artists: ColumnMatrix::zeros(d, universe.n_artists),
            tags: ColumnMatrix::zeros(d, universe.n_tags),
            features: ColumnMatrix::zeros(d, universe.feat_dim),
            max_norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.features.rows()
    }

    pub fn n_artists(&self) -> usize {
        self.artists.cols()
    }

    pub fn n_tags(&self) -> usize {
        self.tags.cols()
    }

    pub fn feat_dim(&self) -> usize {
        self.features.cols()
    }

    /// `V s`, touching only the columns of `V` at the nonzeros of `s`.
    pub fn embed_song(&self, song: &SparseVector) -> Result<Vec<f64>> {
        if song.dim() != self.feat_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.feat_dim(),
                got: song.dim(),
            });
        }
        let mut out = vec![0.0; self.dim()];
        for (i, v) in song.iter() {
            linalg::axpy(&mut out, v as f64, self.features.col(i));
        }
        Ok(out)
    }

    pub fn artist(&self, id: usize) -> Result<&[f32]> {
        check_id("artist", id, self.n_artists())?;
        Ok(self.artists.col(id))
    }

    pub fn tag(&self, id: usize) -> Result<&[f32]> {
        check_id("tag", id, self.n_tags())?;
        Ok(self.tags.col(id))
    }

    /// The embedded query for `task`.
    pub fn embed_query(&self, task: TaskId, query: &Query) -> Result<Vec<f64>> {
        match (task.song_query(), query) {
            (true, Query::Song { features, .. }) => self.embed_song(features),
            (false, Query::Artist(a)) => Ok(self.artist(*a)?.iter().map(|&v| v as f64).collect()),
            _ => Err(Error::Config(format!("query kind does not match task {task}"))),
        }
    }

    /// Label matrix ranked by a label-valued task.
    fn label_matrix(&self, task: TaskId) -> Option<&ColumnMatrix> {
        match task {
            TaskId::ArtistPred | TaskId::SimArtist => Some(&self.artists),
            TaskId::TagPred => Some(&self.tags),
            TaskId::SongPred | TaskId::SimSong => None,
        }
    }

    /// Score one candidate for `task`.
    pub fn score(&self, task: TaskId, query: &Query, candidate: Candidate) -> Result<f64> {
        let q = self.embed_query(task, query)?;
        match (self.label_matrix(task), candidate) {
            (Some(m), Candidate::Label(id)) => {
                let kind = if task == TaskId::TagPred { "tag" } else { "artist" };
                check_id(kind, id, m.cols())?;
                Ok(linalg::dot(&q, m.col(id)))
            }
            (None, Candidate::Song(s)) => {
                let e = self.embed_song(s)?;
                Ok(linalg::dot64(&q, &e))
            }
            _ => Err(Error::Config(format!("candidate kind does not match task {task}"))),
        }
    }

    /// Scores of all labels of a label-valued task against an embedded query.
    pub fn label_scores(&self, task: TaskId, q: &[f64]) -> Vec<f64> {
        let m = self
            .label_matrix(task)
            .expect("label_scores called for a song-valued task");
        (0..m.cols()).map(|i| linalg::dot(q, m.col(i))).collect()
    }

    /// Rank the candidates of `task` for `query`; song-valued tasks rank
    /// `corpus`.
    pub fn rank_all(
        &self,
        task: TaskId,
        query: &Query,
        corpus: &[&SparseVector],
        k: usize,
    ) -> Result<RankedList> {
        let prepared = if task.song_candidates() {
            self.prepare(corpus)?
        } else {
            Vec::new()
        };
        self.rank(task, query, &prepared, k)
    }

    /// Radially project the given columns (or every column when `touched`
    /// is `None`) back onto the ball of radius `max_norm`.
    pub fn project_columns(&mut self, touched: Option<&Touched>) {
        let c = self.max_norm;
        match touched {
            Some(t) => {
                for &i in &t.artists {
                    self.artists.clip_column(i, c);
                }
                for &i in &t.tags {
                    self.tags.clip_column(i, c);
                }
                for &i in &t.features {
                    self.features.clip_column(i, c);
                }
            }
            None => {
                for m in [&mut self.artists, &mut self.tags, &mut self.features] {
                    for i in 0..m.cols() {
                        m.clip_column(i, c);
                    }
                }
            }
        }
    }

    pub fn max_column_norm(&self) -> f64 {
        self.artists
            .max_column_norm()
            .max(self.tags.max_column_norm())
            .max(self.features.max_column_norm())
    }

    pub fn is_finite(&self) -> bool {
        [&self.artists, &self.tags, &self.features]
            .iter()
            .all(|m| m.as_slice().iter().all(|v| v.is_finite()))
    }

    pub fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(MODEL_MAGIC)?;
        w.write_u32::<LittleEndian>(MODEL_VERSION)?;
        for n in [self.dim(), self.n_artists(), self.n_tags(), self.feat_dim()] {
            w.write_u32::<LittleEndian>(n as u32)?;
        }
        w.write_f32::<LittleEndian>(self.max_norm)?;
        for m in [&self.artists, &self.tags, &self.features] {
            write_row_major(w, m)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(eof_as("magic"))?;
        if &magic != MODEL_MAGIC {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&magic),
                "MUSL"
            )));
        }
        let version = r.read_u32::<LittleEndian>().map_err(eof_as("header"))?;
        if version != MODEL_VERSION {
            return Err(Error::Format(format!("unsupported model version {version}")));
        }
        let mut dims = [0usize; 4];
        for d in dims.iter_mut() {
            *d = r.read_u32::<LittleEndian>().map_err(eof_as("header"))? as usize;
        }
        let max_norm = r.read_f32::<LittleEndian>().map_err(eof_as("header"))?;
        let [d, n_artists, n_tags, feat_dim] = dims;
        if d == 0 || feat_dim == 0 {
            return Err(Error::Format("zero embedding or feature dimension".into()));
        }
        let mut model = EmbeddingModel::zeros(
            d,
            Universe {
                n_artists,
                n_tags,
                feat_dim,
            },
            max_norm,
        )
        .map_err(|e| Error::Format(e.to_string()))?;
        read_row_major(r, &mut model.artists, "artist matrix")?;
        read_row_major(r, &mut model.tags, "tag matrix")?;
        read_row_major(r, &mut model.features, "feature matrix")?;
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Format(
                "trailing bytes after declared matrices (dimension mismatch)".into(),
            ));
        }
        if !model.is_finite() {
            return Err(Error::Format("non-finite parameter".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        EmbeddingModel::read_from(&mut r)
    }

    /// Size in bytes of the serialized model.
    pub fn file_size(&self) -> usize {
        28 + 4 * self.dim() * (self.n_artists() + self.n_tags() + self.feat_dim())
    }
}

impl Scorer for EmbeddingModel {
    /// Embedded corpus songs.
    type Corpus = Vec<Vec<f64>>;

    fn universe(&self) -> Universe {
        Universe {
            n_artists: self.n_artists(),
            n_tags: self.n_tags(),
            feat_dim: self.feat_dim(),
        }
    }

    fn supports(&self, _task: TaskId) -> bool {
        true
    }

    fn prepare(&self, songs: &[&SparseVector]) -> Result<Vec<Vec<f64>>> {
        songs.iter().map(|s| self.embed_song(s)).collect()
    }

    fn scores(&self, task: TaskId, query: &Query, corpus: &Vec<Vec<f64>>) -> Result<Vec<f64>> {
        let q = self.embed_query(task, query)?;
        if task.song_candidates() {
            Ok(corpus.iter().map(|e| linalg::dot64(&q, e)).collect())
        } else {
            Ok(self.label_scores(task, &q))
        }
    }
}

pub(crate) fn check_id(kind: &'static str, id: usize, size: usize) -> Result<()> {
    if id >= size {
        Err(Error::OutOfRange { kind, id, size })
    } else {
        Ok(())
    }
}

pub(crate) fn eof_as(what: &'static str) -> impl Fn(io::Error) -> Error {
    move |e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            Error::Truncated(what)
        } else {
            Error::Io(e)
        }
    }
}

fn write_row_major(w: &mut impl Write, m: &ColumnMatrix) -> io::Result<()> {
    for row in 0..m.rows() {
        for col in 0..m.cols() {
            w.write_f32::<LittleEndian>(m.get(row, col))?;
        }
    }
    Ok(())
}

fn read_row_major(r: &mut impl Read, m: &mut ColumnMatrix, what: &'static str) -> Result<()> {
    let mut row_buf = vec![0f32; m.cols()];
    for row in 0..m.rows() {
        r.read_f32_into::<LittleEndian>(&mut row_buf)
            .map_err(eof_as(what))?;
        for (col, v) in row_buf.iter().enumerate() {
            m.set(row, col, *v);
        }
    }
    Ok(())
}
