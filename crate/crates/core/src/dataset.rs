//! Song records, datasets and their text file formats.
//!
//! A dataset file starts with a header declaring the label and feature
//! universes, followed by one song per line:
//!
//! ```text
//! #dims	<n_artists>	<n_tags>	<feat_dim>
//! <song_id>	<artist_ids_csv>	<tag_ids_csv>	<index:value index:value ...>
//! ```
//!
//! Either id list may be empty (cold-start songs). Blank lines are ignored.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::Universe;
use crate::sparse::SparseVector;

/// One training triplet: the song's artists, its tags and its audio features.
#[derive(Debug, Clone, PartialEq)]
pub struct SongRecord {
    pub song_id: String,
    /// Sorted, duplicate-free.
    pub artists: Vec<u32>,
    /// Sorted, duplicate-free.
    pub tags: Vec<u32>,
    pub features: SparseVector,
}

impl SongRecord {
    pub fn new(
        song_id: impl Into<String>,
        artists: impl IntoIterator<Item = u32>,
        tags: impl IntoIterator<Item = u32>,
        features: SparseVector,
    ) -> Self {
        let artists: BTreeSet<u32> = artists.into_iter().collect();
        let tags: BTreeSet<u32> = tags.into_iter().collect();
        SongRecord {
            song_id: song_id.into(),
            artists: artists.into_iter().collect(),
            tags: tags.into_iter().collect(),
            features,
        }
    }

    pub fn has_artist(&self, a: u32) -> bool {
        self.artists.binary_search(&a).is_ok()
    }

    pub fn shares_artist(&self, other: &SongRecord) -> bool {
        self.artists.iter().any(|a| other.has_artist(*a))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<SongRecord>,
    pub n_artists: usize,
    pub n_tags: usize,
    pub feat_dim: usize,
}

impl Dataset {
    /// Build a dataset, checking every record against the declared universes.
    pub fn new(
        records: Vec<SongRecord>,
        n_artists: usize,
        n_tags: usize,
        feat_dim: usize,
    ) -> Result<Self> {
        let ds = Dataset {
            records,
            n_artists,
            n_tags,
            feat_dim,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.feat_dim == 0 {
            return Err(Error::Config("feature dimension must be positive".into()));
        }
        for r in &self.records {
            check_record(r, self.n_artists, self.n_tags, self.feat_dim)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn universe(&self) -> Universe {
        Universe {
            n_artists: self.n_artists,
            n_tags: self.n_tags,
            feat_dim: self.feat_dim,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// For each artist, the indices of the records it appears on.
    pub fn songs_by_artist(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_artists];
        for (i, r) in self.records.iter().enumerate() {
            for &a in &r.artists {
                out[a as usize].push(i);
            }
        }
        out
    }

    /// For each record, the other records sharing at least one artist with it.
    pub fn same_artist_songs(&self) -> Vec<Vec<usize>> {
        let by_artist = self.songs_by_artist();
        self.records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let set: BTreeSet<usize> = r
                    .artists
                    .iter()
                    .flat_map(|&a| by_artist[a as usize].iter().copied())
                    .filter(|&j| j != i)
                    .collect();
                set.into_iter().collect()
            })
            .collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Dataset::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (n_artists, n_tags, feat_dim) = loop {
            match lines.next() {
                None => {
                    return Err(Error::Parse {
                        line: 1,
                        msg: "missing #dims header".into(),
                    })
                }
                Some((_, l)) if l.trim().is_empty() => continue,
                Some((i, l)) => break parse_header(l, i + 1)?,
            }
        };
        let mut records = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let lineno = i + 1;
            let rec = parse_record(line, lineno, n_artists, n_tags, feat_dim)?;
            records.push(rec);
        }
        Ok(Dataset {
            records,
            n_artists,
            n_tags,
            feat_dim,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "#dims\t{}\t{}\t{}\n",
            self.n_artists, self.n_tags, self.feat_dim
        );
        for r in &self.records {
            out.push_str(&r.song_id);
            out.push('\t');
            push_csv(&mut out, &r.artists);
            out.push('\t');
            push_csv(&mut out, &r.tags);
            out.push('\t');
            for (k, (i, v)) in r.features.iter().enumerate() {
                if k > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{i}:{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn push_csv(out: &mut String, ids: &[u32]) {
    for (k, id) in ids.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        let _ = write!(out, "{id}");
    }
}

fn check_record(r: &SongRecord, n_artists: usize, n_tags: usize, feat_dim: usize) -> Result<()> {
    if r.features.dim() != feat_dim {
        return Err(Error::DimensionMismatch {
            expected: feat_dim,
            got: r.features.dim(),
        });
    }
    for &a in &r.artists {
        if a as usize >= n_artists {
            return Err(Error::OutOfRange {
                kind: "artist",
                id: a as usize,
                size: n_artists,
            });
        }
    }
    for &t in &r.tags {
        if t as usize >= n_tags {
            return Err(Error::OutOfRange {
                kind: "tag",
                id: t as usize,
                size: n_tags,
            });
        }
    }
    if r.artists.windows(2).any(|w| w[0] >= w[1]) || r.tags.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!(
            "record {} has unsorted or duplicate ids",
            r.song_id
        )));
    }
    Ok(())
}

fn parse_header(line: &str, lineno: usize) -> Result<(usize, usize, usize)> {
    let err = |msg: &str| Error::Parse {
        line: lineno,
        msg: msg.to_string(),
    };
    let fields: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
    if fields.len() != 4 || fields[0] != "#dims" {
        return Err(err("expected header `#dims<TAB>n_artists<TAB>n_tags<TAB>feat_dim`"));
    }
    let num = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| err(&format!("bad dimension `{s}`")))
    };
    let dims = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
    if dims.2 == 0 {
        return Err(err("feature dimension must be positive"));
    }
    Ok(dims)
}

fn parse_ids(field: &str, bound: usize, kind: &str, lineno: usize) -> Result<Vec<u32>> {
    let mut ids = BTreeSet::new();
    if field.trim().is_empty() {
        return Ok(Vec::new());
    }
    for tok in field.split(',') {
        let id: usize = tok.trim().parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("bad {kind} id `{tok}`"),
        })?;
        if id >= bound {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("{kind} id {id} out of range (declared {bound})"),
            });
        }
        if !ids.insert(id as u32) {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("duplicate {kind} id {id}"),
            });
        }
    }
    Ok(ids.into_iter().collect())
}

fn parse_features(field: &str, dim: usize, lineno: usize) -> Result<SparseVector> {
    let perr = |msg: String| Error::Parse { line: lineno, msg };
    let mut entries = Vec::new();
    for tok in field.split_whitespace() {
        let (i, v) = tok
            .split_once(':')
            .ok_or_else(|| perr(format!("feature `{tok}` is not index:value")))?;
        let i: usize = i.parse().map_err(|_| perr(format!("bad feature index `{i}`")))?;
        let v: f32 = v.parse().map_err(|_| perr(format!("bad feature value `{v}`")))?;
        if i >= dim {
            return Err(perr(format!("feature index {i} out of range (declared {dim})")));
        }
        if !v.is_finite() {
            return Err(perr(format!("non-finite feature value at index {i}")));
        }
        entries.push((i, v));
    }
    entries.sort_by_key(|e| e.0);
    if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(perr(format!("duplicate feature index {}", w[0].0)));
    }
    SparseVector::new(dim, entries).map_err(|e| perr(e.to_string()))
}

fn parse_record(
    line: &str,
    lineno: usize,
    n_artists: usize,
    n_tags: usize,
    feat_dim: usize,
) -> Result<SongRecord> {
    let fields: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
    if fields.len() != 4 {
        return Err(Error::Parse {
            line: lineno,
            msg: format!("expected 4 tab-separated fields, found {}", fields.len()),
        });
    }
    if fields[0].is_empty() {
        return Err(Error::Parse {
            line: lineno,
            msg: "empty song id".into(),
        });
    }
    Ok(SongRecord {
        song_id: fields[0].to_string(),
        artists: parse_ids(fields[1], n_artists, "artist", lineno)?,
        tags: parse_ids(fields[2], n_tags, "tag", lineno)?,
        features: parse_features(fields[3], feat_dim, lineno)?,
    })
}

/// Ground-truth artist similarity: for each listed artist, its similar artists.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ArtistSimilarity {
    /// `(artist, sorted similar artists)`, sorted by artist, self excluded.
    pub entries: Vec<(u32, Vec<u32>)>,
}

impl ArtistSimilarity {
    pub fn parse(text: &str, n_artists: usize) -> Result<Self> {
        let mut map = std::collections::BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
            if fields.len() != 2 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "expected `artist_id<TAB>similar_ids_csv`".into(),
                });
            }
            let a = parse_ids(fields[0], n_artists, "artist", lineno)?;
            if a.len() != 1 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "expected exactly one query artist".into(),
                });
            }
            let sims: Vec<u32> = parse_ids(fields[1], n_artists, "artist", lineno)?
                .into_iter()
                .filter(|&s| s != a[0])
                .collect();
            if map.insert(a[0], sims).is_some() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("artist {} listed twice", a[0]),
                });
            }
        }
        Ok(ArtistSimilarity {
            entries: map.into_iter().filter(|(_, s)| !s.is_empty()).collect(),
        })
    }

    pub fn load(path: impl AsRef<Path>, n_artists: usize) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        ArtistSimilarity::parse(&text, n_artists)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (a, sims) in &self.entries {
            let _ = write!(out, "{a}\t");
            push_csv(&mut out, sims);
            out.push('\n');
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
