//! Ensembles of independently trained models, scored by summing member
//! scores. Summing and averaging give the same ranking; the sum is kept.

use crate::error::{Error, Result};
use crate::model::{Candidate, EmbeddingModel, Query, Scorer, TaskId, Universe};
use crate::sparse::SparseVector;

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    members: Vec<EmbeddingModel>,
}

impl Ensemble {
    /// Members may differ in embedding dimension but must share every
    /// label and feature universe.
    pub fn new(members: Vec<EmbeddingModel>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::Config("an ensemble needs at least one model".into()))?;
        let u = first.universe();
        if let Some(m) = members.iter().find(|m| m.universe() != u) {
            return Err(Error::Config(format!(
                "ensemble members disagree on universes: {:?} vs {:?}",
                u,
                m.universe()
            )));
        }
        Ok(Ensemble { members })
    }

    pub fn members(&self) -> &[EmbeddingModel] {
        &self.members
    }

    pub fn into_members(self) -> Vec<EmbeddingModel> {
        self.members
    }

    pub fn score(&self, task: TaskId, query: &Query, candidate: Candidate) -> Result<f64> {
        let mut total = 0.0;
        for m in &self.members {
            total += m.score(task, query, candidate)?;
        }
        Ok(total)
    }
}

/// Sum of the members' scores for one candidate.
pub fn ensemble_score(
    models: &[EmbeddingModel],
    task: TaskId,
    query: &Query,
    candidate: Candidate,
) -> Result<f64> {
    let u = models
        .first()
        .ok_or_else(|| Error::Config("an ensemble needs at least one model".into()))?
        .universe();
    let mut total = 0.0;
    for m in models {
        if m.universe() != u {
            return Err(Error::Config("ensemble members disagree on universes".into()));
        }
        total += m.score(task, query, candidate)?;
    }
    Ok(total)
}

impl Scorer for Ensemble {
    type Corpus = Vec<Vec<Vec<f64>>>;

    fn universe(&self) -> Universe {
        self.members[0].universe()
    }

    fn supports(&self, _task: TaskId) -> bool {
        true
    }

    fn prepare(&self, songs: &[&SparseVector]) -> Result<Self::Corpus> {
        self.members.iter().map(|m| m.prepare(songs)).collect()
    }

    fn scores(&self, task: TaskId, query: &Query, corpus: &Self::Corpus) -> Result<Vec<f64>> {
        let mut total: Option<Vec<f64>> = None;
        for (i, m) in self.members.iter().enumerate() {
            let empty = Vec::new();
            let c = corpus.get(i).unwrap_or(&empty);
            let s = m.scores(task, query, c)?;
            match total.as_mut() {
                None => total = Some(s),
                Some(t) => t.iter_mut().zip(&s).for_each(|(a, b)| *a += b),
            }
        }
        Ok(total.unwrap_or_default())
    }
}
