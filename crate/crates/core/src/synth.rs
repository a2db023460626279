//! Seeded synthetic datasets.
//!
//! The latent generator places artists and tags in a shared latent space.
//! Each artist carries the tags closest to it, each song sits near its
//! artist, and song features are a noisy linear image of the song's latent
//! position, so every task sees the same underlying structure.

use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::{ArtistSimilarity, Dataset, SongRecord};
use crate::error::{Error, Result};
use crate::sparse::SparseVector;

/// Generators draw from their own ChaCha stream. Model initialization
/// draws Gaussians from stream 0 of its seed; sharing that stream would
/// make a model trained with the data seed start at the true latent
/// positions.
const DATA_STREAM: u64 = 0x5e_ed_da7a;

fn data_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(DATA_STREAM);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_songs: usize,
    pub n_artists: usize,
    pub n_tags: usize,
    pub feat_dim: usize,
    pub latent_dim: usize,
    /// Standard deviation of the additive feature noise.
    pub noise_sigma: f64,
    pub seed: u64,
    /// Tags attached to each artist.
    pub tags_per_artist: usize,
    /// Standard deviation of a song's latent offset from its artist.
    pub song_spread: f64,
    /// Probability that a song keeps each secondary artist tag; its
    /// best-matching tag is always kept.
    pub tag_keep: f64,
    /// Artist popularity exponent: weight of the r-th artist is
    /// `1 / (r + 1)^s`. Zero gives uniform popularity.
    pub zipf_exponent: f64,
    /// Keep only the largest-magnitude features of each song.
    pub nnz_per_song: Option<usize>,
    /// Similar artists listed per artist in the generated similarity file.
    pub similar_per_artist: usize,
    pub valid_fraction: f64,
    pub test_fraction: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_songs: 2000,
            n_artists: 100,
            n_tags: 50,
            feat_dim: 100,
            latent_dim: 20,
            noise_sigma: 0.5,
            seed: 0,
            tags_per_artist: 3,
            song_spread: 0.3,
            tag_keep: 1.0,
            zipf_exponent: 0.0,
            nnz_per_song: None,
            similar_per_artist: 3,
            valid_fraction: 0.1,
            test_fraction: 0.2,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.latent_dim == 0 || self.latent_dim > self.feat_dim {
            return bad(format!(
                "latent_dim must be in 1..={} (feat_dim)",
                self.feat_dim
            ));
        }
        if !(self.noise_sigma >= 0.0) || !(self.song_spread >= 0.0) {
            return bad("noise_sigma and song_spread must be non-negative".into());
        }
        if self.n_artists == 0 || self.n_tags == 0 {
            return bad("need at least one artist and one tag".into());
        }
        if self.tags_per_artist == 0 || self.tags_per_artist > self.n_tags {
            return bad(format!("tags_per_artist must be in 1..={}", self.n_tags));
        }
        if !(0.0..=1.0).contains(&self.tag_keep) {
            return bad("tag_keep must be a probability".into());
        }
        if !(self.zipf_exponent >= 0.0) {
            return bad("zipf_exponent must be non-negative".into());
        }
        if self.nnz_per_song == Some(0) {
            return bad("nnz_per_song must be positive".into());
        }
        let (v, t) = (self.valid_fraction, self.test_fraction);
        if !(v >= 0.0 && t >= 0.0 && v + t < 1.0) {
            return bad("valid and test fractions must be non-negative and sum below 1".into());
        }
        let n_valid = (self.n_songs as f64 * v).round() as usize;
        let n_test = (self.n_songs as f64 * t).round() as usize;
        if n_valid == 0 || n_test == 0 || n_valid + n_test >= self.n_songs {
            return bad(format!(
                "{} songs cannot be split into non-empty train/valid/test sets",
                self.n_songs
            ));
        }
        Ok(())
    }
}

/// The generating parameters, for building reference models in tests.
#[derive(Debug, Clone)]
pub struct LatentTruth {
    /// `n_artists` rows of `latent_dim`.
    pub artists: Vec<Vec<f64>>,
    /// `n_tags` rows of `latent_dim`.
    pub tags: Vec<Vec<f64>>,
    /// `feat_dim x latent_dim`, row-major: features = P z + noise.
    pub projection: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub train: Dataset,
    pub valid: Dataset,
    pub test: Dataset,
    pub similarity: ArtistSimilarity,
    pub truth: Option<LatentTruth>,
}

fn gaussian_vec<R: Rng>(n: usize, scale: f64, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let g: f64 = StandardNormal.sample(rng);
            g * scale
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Indices of the `m` largest values, ties by lower index.
fn top_m(values: &[f64], m: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap().then(a.cmp(&b)));
    idx.truncate(m);
    idx
}

fn argmax(values: &[f64]) -> usize {
    top_m(values, 1)[0]
}

/// Split shuffled songs into (train, valid, test).
fn split(
    spec: &SynthSpec,
    records: Vec<SongRecord>,
    rng: &mut ChaCha8Rng,
    n_artists: usize,
    n_tags: usize,
    feat_dim: usize,
) -> Result<(Dataset, Dataset, Dataset)> {
    let n = records.len();
    let n_valid = (n as f64 * spec.valid_fraction).round() as usize;
    let n_test = (n as f64 * spec.test_fraction).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut slots: Vec<Option<SongRecord>> = records.into_iter().map(Some).collect();
    let mut take = |range: std::ops::Range<usize>| -> Vec<SongRecord> {
        let mut idx: Vec<usize> = order[range].to_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| slots[i].take().unwrap()).collect()
    };
    let valid = take(0..n_valid);
    let test = take(n_valid..n_valid + n_test);
    let train = take(n_valid + n_test..n);
    Ok((
        Dataset::new(train, n_artists, n_tags, feat_dim)?,
        Dataset::new(valid, n_artists, n_tags, feat_dim)?,
        Dataset::new(test, n_artists, n_tags, feat_dim)?,
    ))
}

/// Generate a latent-factor dataset split into song-disjoint train, valid
/// and test sets, plus an artist similarity list (nearest artists in latent
/// space).
pub fn gen_latent(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let mut rng = data_rng(spec.seed);
    let l = spec.latent_dim;

    let artists: Vec<Vec<f64>> = (0..spec.n_artists).map(|_| gaussian_vec(l, 1.0, &mut rng)).collect();
    let tags: Vec<Vec<f64>> = (0..spec.n_tags).map(|_| gaussian_vec(l, 1.0, &mut rng)).collect();
    let projection: Vec<Vec<f64>> = (0..spec.feat_dim)
        .map(|_| gaussian_vec(l, 1.0 / (l as f64).sqrt(), &mut rng))
        .collect();

    let artist_tags: Vec<Vec<usize>> = artists
        .iter()
        .map(|u| {
            let s: Vec<f64> = tags.iter().map(|v| dot(u, v)).collect();
            let mut t = top_m(&s, spec.tags_per_artist);
            t.sort_unstable();
            t
        })
        .collect();

    let weights: Vec<f64> = (0..spec.n_artists)
        .map(|r| 1.0 / ((r + 1) as f64).powf(spec.zipf_exponent))
        .collect();
    let popularity = WeightedIndex::new(&weights).map_err(|e| Error::Config(e.to_string()))?;

    let mut records = Vec::with_capacity(spec.n_songs);
    for idx in 0..spec.n_songs {
        let a = popularity.sample(&mut rng);
        let allowed = &artist_tags[a];
        // Resample the offset until the song's best tag is one of its
        // artist's; the artist position itself always qualifies.
        let mut z = artists[a].clone();
        for _ in 0..100 {
            let offset = gaussian_vec(l, spec.song_spread, &mut rng);
            let cand: Vec<f64> = artists[a].iter().zip(&offset).map(|(x, e)| x + e).collect();
            let scores: Vec<f64> = tags.iter().map(|v| dot(&cand, v)).collect();
            if allowed.contains(&argmax(&scores)) {
                z = cand;
                break;
            }
        }
        let best = argmax(&tags.iter().map(|v| dot(&z, v)).collect::<Vec<_>>());
        let song_tags: Vec<u32> = allowed
            .iter()
            .copied()
            .filter(|&t| t == best || rng.random_bool(spec.tag_keep))
            .map(|t| t as u32)
            .collect();

        let mut feats: Vec<(usize, f64)> = projection
            .iter()
            .enumerate()
            .map(|(f, row)| {
                let noise: f64 = StandardNormal.sample(&mut rng);
                (f, dot(row, &z) + spec.noise_sigma * noise)
            })
            .collect();
        if let Some(k) = spec.nnz_per_song {
            if k < feats.len() {
                feats.sort_by(|x, y| y.1.abs().partial_cmp(&x.1.abs()).unwrap().then(x.0.cmp(&y.0)));
                feats.truncate(k);
                feats.sort_by_key(|x| x.0);
            }
        }
        let features = SparseVector::new(spec.feat_dim, feats.into_iter().map(|(f, v)| (f, v as f32)))?;
        records.push(SongRecord::new(
            format!("song{idx:05}"),
            [a as u32],
            song_tags,
            features,
        ));
    }

    let mut entries = Vec::new();
    if spec.similar_per_artist > 0 && spec.n_artists > 1 {
        for (a, u) in artists.iter().enumerate() {
            let mut s: Vec<f64> = artists.iter().map(|v| dot(u, v) / (dot(v, v).sqrt() + 1e-12)).collect();
            s[a] = f64::NEG_INFINITY;
            let mut sims: Vec<u32> = top_m(&s, spec.similar_per_artist.min(spec.n_artists - 1))
                .into_iter()
                .map(|x| x as u32)
                .collect();
            sims.sort_unstable();
            entries.push((a as u32, sims));
        }
    }

    let (train, valid, test) = split(spec, records, &mut rng, spec.n_artists, spec.n_tags, spec.feat_dim)?;
    Ok(SynthData {
        train,
        valid,
        test,
        similarity: ArtistSimilarity { entries },
        truth: Some(LatentTruth {
            artists,
            tags,
            projection,
        }),
    })
}

/// A perfectly separable tag-prediction set: song `i` has tag `i % n_tags`,
/// artist equal to its tag, and a one-hot feature at the tag's index.
pub fn gen_separable(n_songs: usize, n_tags: usize, seed: u64) -> Result<SynthData> {
    if n_tags < 2 {
        return Err(Error::Config("separable set needs at least two tags".into()));
    }
    let spec = SynthSpec {
        n_songs,
        n_artists: n_tags,
        n_tags,
        feat_dim: n_tags,
        latent_dim: n_tags,
        seed,
        tags_per_artist: 1,
        valid_fraction: 0.2,
        test_fraction: 0.2,
        ..SynthSpec::default()
    };
    spec.validate()?;
    let mut rng = data_rng(seed);
    let records = (0..n_songs)
        .map(|i| {
            let t = i % n_tags;
            Ok(SongRecord::new(
                format!("song{i:05}"),
                [t as u32],
                [t as u32],
                SparseVector::new(n_tags, [(t, 1.0)])?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let (train, valid, test) = split(&spec, records, &mut rng, n_tags, n_tags, n_tags)?;
    Ok(SynthData {
        train,
        valid,
        test,
        similarity: ArtistSimilarity::default(),
        truth: None,
    })
}
