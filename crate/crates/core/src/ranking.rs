use std::cmp::Ordering;

/// Labels ordered by descending score, ties broken by ascending label id.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub items: Vec<(usize, f64)>,
}

impl RankedList {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.items.iter().map(|x| x.0).collect()
    }

    pub fn top(&self) -> Option<usize> {
        self.items.first().map(|x| x.0)
    }
}

/// Order used by every ranking in the crate: higher score first, then lower id.
#[inline]
pub fn rank_order(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then(a.0.cmp(&b.0))
}

/// Rank `scores` (indexed by label id) and keep the best `k`, leaving out
/// `exclude` if given.
pub fn rank_scores(scores: &[f64], exclude: Option<usize>, k: usize) -> RankedList {
    let mut items: Vec<(usize, f64)> = scores
        .iter()
        .copied()
        .enumerate()
        .filter(|(i, _)| Some(*i) != exclude)
        .collect();
    let k = k.min(items.len());
    if k == 0 {
        return RankedList { items: Vec::new() };
    }
    if k < items.len() {
        items.select_nth_unstable_by(k - 1, rank_order);
        items.truncate(k);
    }
    items.sort_by(rank_order);
    RankedList { items }
}
