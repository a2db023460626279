//! Reference computations shared by the integration and acceptance tests.
//! Nothing here calls into the scoring or gradient code it is used to check.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use songembed::trainer::{Example, Gradient, Input};
use songembed::{ArtistSimilarity, Dataset, EmbeddingModel, SongRecord, SparseVector, TaskId};

/// Small dataset with overlapping sparse features, multi-artist songs and
/// an artist similarity list, so every task has usable examples.
pub fn fixture() -> (Dataset, ArtistSimilarity) {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let feat_dim = 10;
    let mut records = Vec::new();
    for i in 0..14 {
        let nnz = 2 + i % 3;
        let entries: Vec<(usize, f32)> = (0..nnz)
            .map(|_| (rng.random_range(0..feat_dim), rng.random_range(0.2f32..2.0)))
            .collect();
        let features = SparseVector::from_unsorted(feat_dim, entries).unwrap();
        let mut artists = vec![(i % 4) as u32];
        if i % 5 == 0 {
            artists.push(((i + 1) % 4) as u32);
        }
        let tags = vec![(i % 5) as u32, ((i * 3 + 1) % 5) as u32];
        records.push(SongRecord::new(format!("s{i}"), artists, tags, features));
    }
    let data = Dataset::new(records, 4, 5, feat_dim).unwrap();
    let sim = ArtistSimilarity::parse("0\t1,2\n1\t0\n2\t3\n3\t2,0\n", 4).unwrap();
    (data, sim)
}

/// Model parameters as plain `f64` columns.
#[derive(Clone)]
pub struct DenseParams {
    pub a: Vec<Vec<f64>>,
    pub t: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mat {
    A,
    T,
    V,
}

impl DenseParams {
    pub fn from_model(m: &EmbeddingModel) -> Self {
        let cols = |mat: &songembed::linalg::ColumnMatrix| {
            (0..mat.cols())
                .map(|c| mat.col(c).iter().map(|&x| x as f64).collect())
                .collect()
        };
        DenseParams {
            a: cols(&m.artists),
            t: cols(&m.tags),
            v: cols(&m.features),
        }
    }

    pub fn mat_mut(&mut self, m: Mat) -> &mut Vec<Vec<f64>> {
        match m {
            Mat::A => &mut self.a,
            Mat::T => &mut self.t,
            Mat::V => &mut self.v,
        }
    }

    pub fn mat(&self, m: Mat) -> &Vec<Vec<f64>> {
        match m {
            Mat::A => &self.a,
            Mat::T => &self.t,
            Mat::V => &self.v,
        }
    }

    /// Dense `V x` with `x` expanded to a full vector.
    pub fn embed(&self, s: &SparseVector) -> Vec<f64> {
        let dense = s.to_dense();
        let d = self.v[0].len();
        let mut out = vec![0.0; d];
        for (c, x) in dense.iter().enumerate() {
            for r in 0..d {
                out[r] += self.v[c][r] * *x as f64;
            }
        }
        out
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    /// Score of output `label` for `input` under `task`, written out from the
    /// five task formulas.
    pub fn score(&self, data: &Dataset, task: TaskId, input: Input, label: usize) -> f64 {
        let song = |i: usize| &data.records[i].features;
        match (task, input) {
            (TaskId::ArtistPred, Input::Song(i)) => Self::dot(&self.a[label], &self.embed(song(i))),
            (TaskId::TagPred, Input::Song(i)) => Self::dot(&self.t[label], &self.embed(song(i))),
            (TaskId::SongPred, Input::Artist(a)) => Self::dot(&self.embed(song(label)), &self.a[a]),
            (TaskId::SimArtist, Input::Artist(a)) => Self::dot(&self.a[a], &self.a[label]),
            (TaskId::SimSong, Input::Song(i)) => {
                Self::dot(&self.embed(song(i)), &self.embed(song(label)))
            }
            _ => panic!("input kind does not fit task"),
        }
    }

    /// `weight * max(0, 1 - f_j + f_k)`.
    pub fn objective(&self, data: &Dataset, ex: &Example, j: usize, k: usize, weight: f64) -> f64 {
        let fj = self.score(data, ex.task, ex.input, j);
        let fk = self.score(data, ex.task, ex.input, k);
        weight * (1.0 - fj + fk).max(0.0)
    }
}

/// Central finite-difference gradient of the step objective over every
/// parameter of every column.
pub fn fd_gradient(
    params: &DenseParams,
    data: &Dataset,
    ex: &Example,
    j: usize,
    k: usize,
    weight: f64,
) -> Vec<(Mat, usize, Vec<f64>)> {
    let h = 1e-5;
    let mut out = Vec::new();
    for m in [Mat::A, Mat::T, Mat::V] {
        for c in 0..params.mat(m).len() {
            let d = params.mat(m)[c].len();
            let mut g = vec![0.0; d];
            for r in 0..d {
                let mut p = params.clone();
                p.mat_mut(m)[c][r] += h;
                let up = p.objective(data, ex, j, k, weight);
                p.mat_mut(m)[c][r] -= 2.0 * h;
                let down = p.objective(data, ex, j, k, weight);
                g[r] = (up - down) / (2.0 * h);
            }
            out.push((m, c, g));
        }
    }
    out
}

/// Largest relative error between the analytic `weight * grad` and the
/// finite-difference gradient, over all columns (columns missing from the
/// analytic gradient count as zero).
pub fn max_relative_error(
    analytic: &Gradient,
    weight: f64,
    numeric: &[(Mat, usize, Vec<f64>)],
) -> f64 {
    let mut worst: f64 = 0.0;
    for (m, c, num) in numeric {
        let map = match m {
            Mat::A => &analytic.artists,
            Mat::T => &analytic.tags,
            Mat::V => &analytic.features,
        };
        let zero = vec![0.0; num.len()];
        let an = map.get(c).unwrap_or(&zero);
        let diff: f64 = an
            .iter()
            .zip(num)
            .map(|(a, n)| (weight * a - n).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale: f64 = num.iter().map(|n| n * n).sum::<f64>().sqrt().max(1e-3);
        worst = worst.max(diff / scale);
    }
    worst
}

/// Exact expectation of `floor((Y - 1) / N)` given that a violator is found
/// within the `Y - 1` trial cap, when each draw violates independently with
/// probability `p`. The trial count is geometric; the table accumulates the
/// probability of reaching each trial without success.
pub fn expected_rank_estimate(y: usize, p: f64, weight: impl Fn(usize) -> f64) -> f64 {
    let cap = (y - 1).max(1);
    let mut reach = 1.0; // P(no violator in the first n - 1 draws)
    let mut num = 0.0;
    let mut found = 0.0;
    for n in 1..=cap {
        let stop_here = reach * p;
        num += stop_here * weight((y - 1) / n);
        found += stop_here;
        reach *= 1.0 - p;
    }
    num / found
}

/// Ids sorted by descending score then ascending id, by plain full sort.
pub fn sort_oracle(scores: &[f64], exclude: Option<usize>) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..scores.len()).filter(|&i| Some(i) != exclude).collect();
    ids.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    ids
}

/// Hinge summed over every positive/negative pair, by double loop.
pub fn auc_oracle(scores: &[f64], positives: &[usize]) -> f64 {
    let mut total = 0.0;
    for &j in positives {
        for k in 0..scores.len() {
            if !positives.contains(&k) {
                total += (1.0 - scores[j] + scores[k]).max(0.0);
            }
        }
    }
    total
}

/// Negatives `k` with `1 + f_k >= f_j`, by linear scan.
pub fn margin_rank_oracle(scores: &[f64], j: usize, positives: &[usize]) -> usize {
    (0..scores.len())
        .filter(|k| !positives.contains(k) && 1.0 + scores[*k] >= scores[j])
        .count()
}

/// `|top-k ∩ relevant| / k`.
pub fn precision_oracle(ranked: &[usize], relevant: &[usize], k: usize) -> f64 {
    ranked.iter().take(k).filter(|x| relevant.contains(x)).count() as f64 / k as f64
}

/// Cosine similarity computed on dense copies.
pub fn cosine_oracle(q: &SparseVector, s: &SparseVector) -> f64 {
    let (a, b) = (q.to_dense(), s.to_dense());
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| *x as f64 * *y as f64).sum();
    let na: f64 = a.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Per-center counts of nearest frames, by naive argmin over centers.
pub fn encode_oracle(centers: &[Vec<f32>], frames: &[Vec<f32>]) -> Vec<usize> {
    let mut counts = vec![0; centers.len()];
    for f in frames {
        let mut best = (0, f64::INFINITY);
        for (c, center) in centers.iter().enumerate() {
            let d: f64 = f
                .iter()
                .zip(center)
                .map(|(x, y)| (*x as f64 - *y as f64).powi(2))
                .sum();
            if d < best.1 {
                best = (c, d);
            }
        }
        counts[best.0] += 1;
    }
    counts
}

/// A random sparse vector with roughly `density` of its entries set.
pub fn random_sparse<R: Rng>(dim: usize, density: f64, rng: &mut R) -> SparseVector {
    let mut entries = Vec::new();
    for i in 0..dim {
        if rng.random_bool(density) {
            entries.push((i, rng.random_range(-2.0f32..2.0)));
        }
    }
    SparseVector::new(dim, entries).unwrap()
}
