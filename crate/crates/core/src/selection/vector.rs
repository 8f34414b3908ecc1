use std::collections::HashMap;

use super::{DfTable, SelectionError};
use crate::tokenization::tokenize;
use crate::Scalar;

/// Term-id -> weight map with strictly positive weights, stored sorted by
/// term id, with its Euclidean norm cached.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector<F> {
    entries: Vec<(u32, F)>,
    norm: F,
}

impl<F: Scalar> Default for SparseVector<F> {
    fn default() -> Self {
        SparseVector {
            entries: Vec::new(),
            norm: F::zero(),
        }
    }
}

impl<F: Scalar> SparseVector<F> {
    /// Duplicate ids are summed and zero weights dropped. Negative or
    /// non-finite weights are rejected.
    pub fn from_entries<I>(entries: I) -> Result<Self, SelectionError>
    where
        I: IntoIterator<Item = (u32, F)>,
    {
        let mut entries: Vec<(u32, F)> = entries.into_iter().collect();
        if let Some(&(id, w)) = entries.iter().find(|(_, w)| !w.is_finite() || *w < F::zero()) {
            return Err(SelectionError::InvalidWeight {
                term_id: id,
                weight: w.to_f64_lossy(),
            });
        }
        entries.sort_unstable_by_key(|&(id, _)| id);
        let mut merged: Vec<(u32, F)> = Vec::with_capacity(entries.len());
        for (id, w) in entries {
            match merged.last_mut() {
                Some((last, acc)) if *last == id => *acc = *acc + w,
                _ => merged.push((id, w)),
            }
        }
        merged.retain(|&(_, w)| w > F::zero());
        Ok(Self::from_sorted(merged))
    }

    fn from_sorted(entries: Vec<(u32, F)>) -> Self {
        let norm = Self::euclidean(&entries);
        SparseVector { entries, norm }
    }

    fn euclidean(entries: &[(u32, F)]) -> F {
        entries.iter().map(|&(_, w)| w * w).sum::<F>().sqrt()
    }

    pub fn entries(&self) -> &[(u32, F)] {
        &self.entries
    }

    pub fn get(&self, id: u32) -> F {
        self.entries
            .binary_search_by_key(&id, |&(i, _)| i)
            .map(|i| self.entries[i].1)
            .unwrap_or_else(|_| F::zero())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> F {
        self.norm
    }

    /// Recomputes the norm from the entries; equals [`Self::norm`].
    pub fn recompute_norm(&self) -> F {
        Self::euclidean(&self.entries)
    }

    /// Merge-join dot product.
    pub fn dot(&self, other: &SparseVector<F>) -> F {
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.entries, &other.entries);
        let mut acc = F::zero();
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc = acc + a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    /// Unit-length copy; the zero vector stays zero.
    pub fn normalized(&self) -> Self {
        if self.norm == F::zero() {
            return self.clone();
        }
        self.scaled(F::one() / self.norm)
    }

    /// Multiplies every weight by `c > 0`.
    pub fn scaled(&self, c: F) -> Self {
        assert!(c > F::zero(), "scale factor must be positive");
        let entries: Vec<_> = self
            .entries
            .iter()
            .map(|&(id, w)| (id, w * c))
            .filter(|&(_, w)| w > F::zero())
            .collect();
        Self::from_sorted(entries)
    }

    pub fn cast<G: Scalar>(&self) -> SparseVector<G> {
        let entries = self
            .entries
            .iter()
            .filter_map(|&(id, w)| Some((id, G::from(w)?)))
            .filter(|&(_, w)| w > G::zero())
            .collect();
        SparseVector::from_sorted(entries)
    }
}

/// `weight(t) = tf(t) * ln(n_docs / df(t))` with raw in-sentence counts.
/// Terms missing from the table are ignored; zero weights are not stored.
pub fn tfidf_vector<F: Scalar>(text: &str, table: &DfTable) -> SparseVector<F> {
    let mut ids: Vec<u32> = tokenize(text, table.lang())
        .iter()
        .filter_map(|t| table.term_id(&t.text))
        .collect();
    ids.sort_unstable();
    let mut entries = Vec::with_capacity(ids.len());
    let mut i = 0;
    while i < ids.len() {
        let id = ids[i];
        let mut tf = 0u64;
        while i < ids.len() && ids[i] == id {
            tf += 1;
            i += 1;
        }
        let w = F::from_count(tf) * table.idf::<F>(id);
        if w > F::zero() {
            entries.push((id, w));
        }
    }
    SparseVector::from_sorted(entries)
}

/// Mean of the L2-normalized TF-IDF vectors of the in-domain texts.
/// Zero-norm sentences are left out of the mean.
pub fn domain_centroid<F, I>(in_domain: I, table: &DfTable) -> Result<SparseVector<F>, SelectionError>
where
    F: Scalar,
    I: IntoIterator,
    I::Item: AsRef<str>,
{
    let mut sum: HashMap<u32, F> = HashMap::new();
    let mut seen = 0u64;
    let mut counted = 0u64;
    for text in in_domain {
        seen += 1;
        let v = tfidf_vector::<F>(text.as_ref(), table);
        if v.norm() == F::zero() {
            continue;
        }
        counted += 1;
        let inv = F::one() / v.norm();
        for &(id, w) in v.entries() {
            let e = sum.entry(id).or_insert_with(F::zero);
            *e = *e + w * inv;
        }
    }
    if seen == 0 {
        return Err(SelectionError::EmptyCorpus);
    }
    if counted == 0 {
        return Err(SelectionError::NoDomainSignal);
    }
    let n = F::from_count(counted);
    let mut entries: Vec<_> = sum.into_iter().map(|(id, w)| (id, w / n)).collect();
    entries.sort_unstable_by_key(|&(id, _)| id);
    entries.retain(|&(_, w)| w > F::zero());
    Ok(SparseVector::from_sorted(entries))
}

fn cosine<F: Scalar>(dot: F, a: F, b: F) -> F {
    let c = dot / (a * b);
    if c.is_nan() {
        F::zero()
    } else {
        c.max(F::zero()).min(F::one())
    }
}

/// Cosine similarity in `[0, 1]`; a zero-norm `vec` scores 0.
pub fn score_sentence<F: Scalar>(
    vec: &SparseVector<F>,
    centroid: &SparseVector<F>,
) -> Result<F, SelectionError> {
    if centroid.norm() == F::zero() {
        return Err(SelectionError::ZeroCentroid);
    }
    if vec.norm() == F::zero() {
        return Ok(F::zero());
    }
    Ok(cosine(vec.dot(centroid), vec.norm(), centroid.norm()))
}

/// The centroid expanded to a dense array for O(nnz) scoring against many
/// sentences. Gives the same result as [`score_sentence`].
#[derive(Debug, Clone)]
pub struct CentroidScorer<F> {
    dense: Vec<F>,
    norm: F,
}

impl<F: Scalar> CentroidScorer<F> {
    pub fn new(centroid: &SparseVector<F>, table: &DfTable) -> Result<Self, SelectionError> {
        if centroid.norm() == F::zero() {
            return Err(SelectionError::ZeroCentroid);
        }
        let len = centroid
            .entries()
            .last()
            .map_or(0, |&(id, _)| id as usize + 1)
            .max(table.len());
        let mut dense = vec![F::zero(); len];
        for &(id, w) in centroid.entries() {
            dense[id as usize] = w;
        }
        Ok(CentroidScorer {
            dense,
            norm: centroid.norm(),
        })
    }

    pub fn score(&self, vec: &SparseVector<F>) -> F {
        if vec.norm() == F::zero() {
            return F::zero();
        }
        let mut dot = F::zero();
        for &(id, w) in vec.entries() {
            if let Some(&c) = self.dense.get(id as usize) {
                if c != F::zero() {
                    dot = dot + w * c;
                }
            }
        }
        cosine(dot, vec.norm(), self.norm)
    }
}
