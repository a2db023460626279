//! Bag-of-codewords song features: a k-means codebook over frame vectors
//! and, per song, the count of frames nearest to each codeword.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::eof_as;
use crate::sparse::SparseVector;

pub const FRAMES_MAGIC: &[u8; 4] = b"FRMS";
pub const CODEBOOK_MAGIC: &[u8; 4] = b"CBK1";

/// Row-major `n x dim` matrix of frame vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatrix {
    n: usize,
    dim: usize,
    data: Vec<f32>,
}

impl FrameMatrix {
    pub fn new(n: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != n * dim {
            return Err(Error::DimensionMismatch {
                expected: n * dim,
                got: data.len(),
            });
        }
        if dim == 0 {
            return Err(Error::Config("frame dimension must be positive".into()));
        }
        Ok(FrameMatrix { n, dim, data })
    }

    pub fn from_rows(dim: usize, rows: &[Vec<f32>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        FrameMatrix::new(rows.len(), dim, data)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Stack several frame matrices of equal dimension.
    pub fn concat(parts: &[FrameMatrix]) -> Result<Self> {
        let dim = parts
            .first()
            .ok_or_else(|| Error::Config("no frame matrices to stack".into()))?
            .dim;
        let mut data = Vec::new();
        let mut n = 0;
        for p in parts {
            if p.dim != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.dim,
                });
            }
            data.extend_from_slice(&p.data);
            n += p.n;
        }
        FrameMatrix::new(n, dim, data)
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(FRAMES_MAGIC)?;
        w.write_u32::<LittleEndian>(self.n as u32)?;
        w.write_u32::<LittleEndian>(self.dim as u32)?;
        for v in &self.data {
            w.write_f32::<LittleEndian>(*v)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let (n, dim, data) = read_block(r, FRAMES_MAGIC, "frame")?;
        FrameMatrix::new(n, dim, data)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        FrameMatrix::read_from(&mut BufReader::new(File::open(path)?))
    }
}

fn read_block(r: &mut impl Read, magic: &[u8; 4], what: &'static str) -> Result<(usize, usize, Vec<f32>)> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m).map_err(eof_as("magic"))?;
    if &m != magic {
        return Err(Error::Format(format!(
            "bad magic, expected {}",
            String::from_utf8_lossy(magic)
        )));
    }
    let n = r.read_u32::<LittleEndian>().map_err(eof_as("header"))? as usize;
    let dim = r.read_u32::<LittleEndian>().map_err(eof_as("header"))? as usize;
    if dim == 0 {
        return Err(Error::Format(format!("zero {what} dimension")));
    }
    let mut data = vec![0f32; n * dim];
    r.read_f32_into::<LittleEndian>(&mut data).map_err(eof_as(what))?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format(format!("trailing bytes after {what} data")));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Format(format!("non-finite {what} value")));
    }
    Ok((n, dim, data))
}

/// `D` codewords of dimension `F`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    size: usize,
    dim: usize,
    centers: Vec<f32>,
}

impl Codebook {
    pub fn new(size: usize, dim: usize, centers: Vec<f32>) -> Result<Self> {
        if size == 0 || dim == 0 {
            return Err(Error::Config("codebook needs at least one center and dimension".into()));
        }
        if centers.len() != size * dim {
            return Err(Error::DimensionMismatch {
                expected: size * dim,
                got: centers.len(),
            });
        }
        if centers.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("codebook centers must be finite".into()));
        }
        Ok(Codebook { size, dim, centers })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn center(&self, c: usize) -> &[f32] {
        &self.centers[c * self.dim..(c + 1) * self.dim]
    }

    /// Nearest center by Euclidean distance, lowest index on ties, with the
    /// squared distance.
    pub fn nearest(&self, x: &[f32]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for c in 0..self.size {
            let d = sq_dist(x, self.center(c));
            if d < best.1 {
                best = (c, d);
            }
        }
        best
    }

    /// Sum of squared distances from each frame to its nearest center.
    pub fn inertia(&self, frames: &FrameMatrix) -> f64 {
        let per: Vec<f64> = (0..frames.len())
            .into_par_iter()
            .map(|i| self.nearest(frames.row(i)).1)
            .collect();
        per.iter().sum()
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(CODEBOOK_MAGIC)?;
        w.write_u32::<LittleEndian>(self.size as u32)?;
        w.write_u32::<LittleEndian>(self.dim as u32)?;
        for v in &self.centers {
            w.write_f32::<LittleEndian>(*v)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let (n, dim, data) = read_block(r, CODEBOOK_MAGIC, "codebook")?;
        Codebook::new(n, dim, data).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Codebook::read_from(&mut BufReader::new(File::open(path)?))
    }
}

#[inline]
fn sq_dist(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = *x as f64 - *y as f64;
            d * d
        })
        .sum()
}

#[inline]
fn sq_dist64(a: &[f32], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = *x as f64 - y;
            d * d
        })
        .sum()
}

/// A fitted codebook with the inertia after each assignment pass.
#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub codebook: Codebook,
    pub inertia_history: Vec<f64>,
}

impl KMeansFit {
    pub fn inertia(&self) -> f64 {
        self.inertia_history.last().copied().unwrap_or(0.0)
    }
}

fn nearest64(centers: &[Vec<f64>], x: &[f32]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist64(x, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ seeding: first center uniform, the rest drawn with probability
/// proportional to squared distance from the nearest chosen center.
fn seed_centers<R: Rng>(frames: &FrameMatrix, k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = frames.len();
    let to64 = |i: usize| frames.row(i).iter().map(|&v| v as f64).collect::<Vec<f64>>();
    let mut centers = vec![to64(rng.random_range(0..n))];
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist64(frames.row(i), &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = None;
            for (i, &d) in dist.iter().enumerate() {
                if d > 0.0 {
                    if target < d {
                        chosen = Some(i);
                        break;
                    }
                    target -= d;
                }
            }
            // Rounding can run past the end; fall back to the last
            // candidate with positive weight.
            chosen.unwrap_or_else(|| dist.iter().rposition(|&d| d > 0.0).unwrap())
        } else {
            rng.random_range(0..n)
        };
        let c = to64(pick);
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(sq_dist64(frames.row(i), &c));
        }
        centers.push(c);
    }
    centers
}

/// Lloyd's algorithm from k-means++ seeds. Runs at most `iters` assignment
/// passes, stopping early once assignments no longer change. A center left
/// without frames moves to the frame currently farthest from its center.
pub fn kmeans_fit(frames: &FrameMatrix, n_centers: usize, iters: usize, seed: u64) -> Result<KMeansFit> {
    if n_centers == 0 {
        return Err(Error::Config("codebook size must be at least 1".into()));
    }
    if frames.len() < n_centers {
        return Err(Error::Config(format!(
            "k-means needs at least {n_centers} frames, got {}",
            frames.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = seed_centers(frames, n_centers, &mut rng);
    let dim = frames.dim();
    let mut history = Vec::new();
    let mut prev_assign: Option<Vec<usize>> = None;

    for _ in 0..iters.max(1) {
        let assigned: Vec<(usize, f64)> = (0..frames.len())
            .into_par_iter()
            .map(|i| nearest64(&centers, frames.row(i)))
            .collect();
        history.push(assigned.iter().map(|a| a.1).sum());
        let labels: Vec<usize> = assigned.iter().map(|a| a.0).collect();
        if prev_assign.as_ref() == Some(&labels) {
            break;
        }

        let mut sums = vec![vec![0.0f64; dim]; n_centers];
        let mut counts = vec![0usize; n_centers];
        for (i, &c) in labels.iter().enumerate() {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(frames.row(i)) {
                *s += *v as f64;
            }
        }
        let mut dist: Vec<f64> = assigned.iter().map(|a| a.1).collect();
        for c in 0..n_centers {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            } else {
                let far = dist
                    .iter()
                    .enumerate()
                    .fold(0, |best, (i, &d)| if d > dist[best] { i } else { best });
                centers[c] = frames.row(far).iter().map(|&v| v as f64).collect();
                dist[far] = 0.0;
            }
        }
        prev_assign = Some(labels);
    }

    let flat: Vec<f32> = centers.iter().flatten().map(|&v| v as f32).collect();
    Ok(KMeansFit {
        codebook: Codebook::new(n_centers, dim, flat)?,
        inertia_history: history,
    })
}

/// Count, per codeword, how many of the song's frames are nearest to it.
pub fn encode_counts(codebook: &Codebook, frames: &FrameMatrix) -> Result<SparseVector> {
    if frames.dim() != codebook.dim() {
        return Err(Error::DimensionMismatch {
            expected: codebook.dim(),
            got: frames.dim(),
        });
    }
    let mut counts = vec![0u32; codebook.size()];
    for i in 0..frames.len() {
        counts[codebook.nearest(frames.row(i)).0] += 1;
    }
    SparseVector::new(
        codebook.size(),
        counts.iter().enumerate().map(|(c, &n)| (c, n as f32)),
    )
}

/// Encode many songs in parallel, preserving order.
pub fn encode_all(codebook: &Codebook, songs: &[FrameMatrix]) -> Result<Vec<SparseVector>> {
    songs.par_iter().map(|f| encode_counts(codebook, f)).collect()
}
