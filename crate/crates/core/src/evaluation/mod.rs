//! Corpus-level BLEU-4 with a single reference per segment.
//!
//! Segments are tokenized case-preserving: Chinese per character, Vietnamese
//! per whitespace token, punctuation split off. Without smoothing any zero
//! n-gram precision gives a score of 0. Add-one smoothing, when requested,
//! applies to n >= 2 only.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;
use std::ops::AddAssign;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus_io::{count_lines, read_monolingual, CorpusError, LanguageTag};
use crate::tokenization::{tokenize_with, CaseMode};
use crate::Scalar;

pub const MAX_ORDER: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("hypothesis and reference differ in length: {hyp} vs {reference} segments")]
    LengthMismatch { hyp: u64, reference: u64 },
    #[error("nothing to score: empty input")]
    Empty,
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Smoothing {
    #[default]
    None,
    /// `(m + 1) / (t + 1)` for orders 2..=4.
    AddOne,
}

impl fmt::Display for Smoothing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Smoothing::None => "none",
            Smoothing::AddOne => "add-one",
        })
    }
}

impl std::str::FromStr for Smoothing {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Smoothing::None),
            "add-one" => Ok(Smoothing::AddOne),
            _ => Err(format!("unknown smoothing `{s}` (expected none or add-one)")),
        }
    }
}

/// All contiguous n-grams with their counts.
pub fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], u32> {
    assert!(n >= 1, "n-gram order must be at least 1");
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Sufficient statistics of corpus BLEU. Summing per-segment statistics in
/// any order gives the corpus statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BleuStats {
    pub matched: [u64; MAX_ORDER],
    pub total: [u64; MAX_ORDER],
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl AddAssign for BleuStats {
    fn add_assign(&mut self, o: Self) {
        for n in 0..MAX_ORDER {
            self.matched[n] += o.matched[n];
            self.total[n] += o.total[n];
        }
        self.hyp_len += o.hyp_len;
        self.ref_len += o.ref_len;
    }
}

impl BleuStats {
    pub fn segment<T: Eq + Hash>(hyp: &[T], reference: &[T]) -> Self {
        let mut stats = BleuStats {
            hyp_len: hyp.len() as u64,
            ref_len: reference.len() as u64,
            ..Default::default()
        };
        for n in 1..=MAX_ORDER {
            let (m, t) = clip(hyp, reference, n);
            stats.matched[n - 1] = m;
            stats.total[n - 1] = t;
        }
        stats
    }

    pub fn score<F: Scalar>(&self, smoothing: Smoothing) -> BleuScore<F> {
        let mut precisions = [F::zero(); MAX_ORDER];
        for n in 0..MAX_ORDER {
            let (m, t) = (self.matched[n], self.total[n]);
            precisions[n] = match smoothing {
                Smoothing::AddOne if n > 0 => F::from_count(m + 1) / F::from_count(t + 1),
                _ if t == 0 => F::zero(),
                _ => F::from_count(m) / F::from_count(t),
            };
        }
        let brevity_penalty = if self.hyp_len >= self.ref_len {
            F::one()
        } else if self.hyp_len == 0 {
            F::zero()
        } else {
            (F::one() - F::from_count(self.ref_len) / F::from_count(self.hyp_len)).exp()
        };
        let bleu = if precisions.iter().any(|p| *p == F::zero()) {
            F::zero()
        } else {
            let quarter = F::one() / F::from_count(MAX_ORDER as u64);
            let log_mean = precisions.iter().map(|p| p.ln()).sum::<F>() * quarter;
            F::from_count(100) * brevity_penalty * log_mean.exp()
        };
        BleuScore {
            bleu,
            precisions,
            brevity_penalty,
            hyp_length: self.hyp_len,
            ref_length: self.ref_len,
        }
    }
}

fn clip<T: Eq + Hash>(hyp: &[T], reference: &[T], n: usize) -> (u64, u64) {
    let h = ngram_counts(hyp, n);
    let r = ngram_counts(reference, n);
    let total: u32 = h.values().sum();
    let matched: u32 = h
        .iter()
        .map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0)))
        .sum();
    (matched as u64, total as u64)
}

/// Corpus-wide `(matched, total)` for order `n`, each hypothesis n-gram count
/// clipped to its count in the paired reference.
pub fn clipped_precision<T: Eq + Hash>(
    hyps: &[Vec<T>],
    refs: &[Vec<T>],
    n: usize,
) -> Result<(u64, u64), EvalError> {
    if hyps.len() != refs.len() {
        return Err(EvalError::LengthMismatch {
            hyp: hyps.len() as u64,
            reference: refs.len() as u64,
        });
    }
    Ok(hyps
        .iter()
        .zip(refs)
        .map(|(h, r)| clip(h, r, n))
        .fold((0, 0), |(m, t), (a, b)| (m + a, t + b)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BleuScore<F> {
    /// In `[0, 100]`.
    pub bleu: F,
    /// Modified precisions for n = 1..=4, in `[0, 1]`.
    pub precisions: [F; MAX_ORDER],
    pub brevity_penalty: F,
    pub hyp_length: u64,
    pub ref_length: u64,
}

impl<F: Scalar> fmt::Display for BleuScore<F> {
    /// `BLEU = 38.97 (71.2/45.1/30.0/20.3, BP=1.000, hyp_len=120, ref_len=118)`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p: Vec<String> = self
            .precisions
            .iter()
            .map(|p| format!("{:.1}", 100.0 * p.to_f64_lossy()))
            .collect();
        write!(
            f,
            "BLEU = {:.2} ({}, BP={:.3}, hyp_len={}, ref_len={})",
            self.bleu.to_f64_lossy(),
            p.join("/"),
            self.brevity_penalty.to_f64_lossy(),
            self.hyp_length,
            self.ref_length
        )
    }
}

pub fn tokenize_for_bleu(text: &str, lang: LanguageTag) -> Vec<String> {
    tokenize_with(text, lang, CaseMode::Preserve)
        .into_iter()
        .map(|t| t.text)
        .collect()
}

/// Scores in-memory segments.
pub fn corpus_bleu<F, S>(hyps: &[S], refs: &[S], lang: LanguageTag, smoothing: Smoothing) -> Result<BleuScore<F>, EvalError>
where
    F: Scalar,
    S: AsRef<str> + Sync,
{
    if hyps.len() != refs.len() {
        return Err(EvalError::LengthMismatch {
            hyp: hyps.len() as u64,
            reference: refs.len() as u64,
        });
    }
    if hyps.is_empty() {
        return Err(EvalError::Empty);
    }
    let stats = hyps
        .par_iter()
        .zip(refs.par_iter())
        .map(|(h, r)| {
            BleuStats::segment(
                &tokenize_for_bleu(h.as_ref(), lang),
                &tokenize_for_bleu(r.as_ref(), lang),
            )
        })
        .reduce(BleuStats::default, |mut a, b| {
            a += b;
            a
        });
    Ok(stats.score(smoothing))
}

/// Scores two aligned line files.
pub fn bleu<F: Scalar>(
    hyp_file: &Path,
    ref_file: &Path,
    lang: LanguageTag,
    smoothing: Smoothing,
) -> Result<BleuScore<F>, EvalError> {
    let (h, r) = (count_lines(hyp_file)?, count_lines(ref_file)?);
    if h != r {
        return Err(EvalError::LengthMismatch { hyp: h, reference: r });
    }
    if h == 0 {
        return Err(EvalError::Empty);
    }
    let mut stats = BleuStats::default();
    let hyps = read_monolingual(hyp_file, lang)?;
    let refs = read_monolingual(ref_file, lang)?;
    for (hyp, reference) in hyps.zip(refs) {
        let (hyp, reference) = (hyp?, reference?);
        // Undecodable lines are skipped by the readers; keep segments paired.
        if hyp.id != reference.id {
            return Err(EvalError::LengthMismatch { hyp: hyp.id, reference: reference.id });
        }
        stats += BleuStats::segment(
            &tokenize_for_bleu(&hyp.text, lang),
            &tokenize_for_bleu(&reference.text, lang),
        );
    }
    Ok(stats.score(smoothing))
}
