use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use crate::corpus_io::Sentence;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSentence<F> {
    pub sentence: Sentence,
    /// Cosine similarity to the domain centroid, in `[0, 1]`.
    pub score: F,
}

/// Ranking key: higher score first, then lower id.
#[derive(Debug, Clone)]
struct Candidate<F>(ScoredSentence<F>);

impl<F: Scalar> Candidate<F> {
    fn key(&self) -> (F, u64) {
        (self.0.score, self.0.sentence.id)
    }
}

fn rank<F: Scalar>(a: (F, u64), b: (F, u64)) -> Ordering {
    b.0.partial_cmp(&a.0)
        .unwrap_or(Ordering::Equal)
        .then(a.1.cmp(&b.1))
}

impl<F: Scalar> PartialEq for Candidate<F> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<F: Scalar> Eq for Candidate<F> {}

impl<F: Scalar> PartialOrd for Candidate<F> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<F: Scalar> Ord for Candidate<F> {
    fn cmp(&self, other: &Self) -> Ordering {
        rank(self.key(), other.key())
    }
}

/// Keeps the `k` best sentences seen so far, with exact-text deduplication.
///
/// Only texts currently held are remembered. That is enough: a later copy of
/// an evicted text has the same score and a larger id, so it ranks below an
/// entry that already beat the evicted copy.
#[derive(Debug, Clone)]
pub struct TopK<F> {
    k: usize,
    ranked: BTreeSet<Candidate<F>>,
    held: HashMap<String, (F, u64)>,
}

impl<F: Scalar> TopK<F> {
    /// `k` must be at least 1.
    pub fn new(k: usize) -> Self {
        assert!(k >= 1, "top-k needs k >= 1");
        TopK {
            k,
            ranked: BTreeSet::new(),
            held: HashMap::new(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.ranked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked.is_empty()
    }

    /// Score of the current k-th entry once full.
    pub fn threshold(&self) -> Option<F> {
        if self.ranked.len() == self.k {
            self.ranked.last().map(|c| c.0.score)
        } else {
            None
        }
    }

    /// Offers a sentence; returns whether it is now held.
    pub fn push(&mut self, sentence: Sentence, score: F) -> bool {
        let key = (score, sentence.id);
        if let Some(&held) = self.held.get(&sentence.text) {
            if rank(key, held) != Ordering::Less {
                return false;
            }
            self.remove(held, &sentence.text);
        } else if self.ranked.len() == self.k {
            let worst = self.ranked.last().expect("k >= 1").key();
            if rank(key, worst) != Ordering::Less {
                return false;
            }
            let text = self.ranked.last().expect("k >= 1").0.sentence.text.clone();
            self.remove(worst, &text);
        }
        self.held.insert(sentence.text.clone(), key);
        self.ranked.insert(Candidate(ScoredSentence { sentence, score }));
        true
    }

    fn remove(&mut self, key: (F, u64), text: &str) {
        let probe = Candidate(ScoredSentence {
            sentence: Sentence::new(key.1, String::new(), crate::LanguageTag::Other),
            score: key.0,
        });
        self.ranked.remove(&probe);
        self.held.remove(text);
    }

    /// Combines selections over disjoint shards; the result equals a single
    /// selection over the concatenated input.
    pub fn merge(mut self, other: TopK<F>) -> TopK<F> {
        for c in other.ranked {
            self.push(c.0.sentence, c.0.score);
        }
        self
    }

    /// Best first.
    pub fn into_sorted_vec(self) -> Vec<ScoredSentence<F>> {
        self.ranked.into_iter().map(|c| c.0).collect()
    }
}
