use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SelectionError;
use crate::corpus_io::{CorpusError, LanguageTag};
use crate::tokenization::tokenize;

const TABLE_FORMAT: &str = "bitext-forge-df";
const TABLE_VERSION: u32 = 1;

/// Accumulates document frequencies; [`DfTableBuilder::freeze`] turns it into
/// the read-only [`DfTable`] that scoring requires.
#[derive(Debug, Clone)]
pub struct DfTableBuilder {
    lang: LanguageTag,
    ids: HashMap<String, u32>,
    df: Vec<u64>,
    n_docs: u64,
    seen: Vec<u32>,
}

impl DfTableBuilder {
    pub fn new(lang: LanguageTag) -> Self {
        DfTableBuilder {
            lang,
            ids: HashMap::new(),
            df: Vec::new(),
            n_docs: 0,
            seen: Vec::new(),
        }
    }

    /// Adds one document (sentence).
    pub fn add_document(&mut self, text: &str) {
        self.n_docs += 1;
        self.seen.clear();
        for token in tokenize(text, self.lang) {
            let next = self.df.len() as u32;
            let id = *self.ids.entry(token.text).or_insert(next);
            if id == next {
                self.df.push(0);
            }
            self.seen.push(id);
        }
        self.seen.sort_unstable();
        self.seen.dedup();
        for &id in &self.seen {
            self.df[id as usize] += 1;
        }
    }

    pub fn n_docs(&self) -> u64 {
        self.n_docs
    }

    pub fn freeze(self) -> Result<DfTable, SelectionError> {
        if self.n_docs == 0 {
            return Err(SelectionError::EmptyCorpus);
        }
        Ok(DfTable {
            lang: self.lang,
            ids: self.ids,
            df: self.df,
            n_docs: self.n_docs,
        })
    }
}

/// Frozen vocabulary with document frequencies. Term ids are assigned in
/// first-seen order and index `df`.
///
/// Scoring takes a `DfTable`, so an unfrozen builder cannot be used:
///
/// ```compile_fail
/// use bitext_forge::LanguageTag;
/// use bitext_forge::selection::{tfidf_vector, DfTableBuilder};
/// let builder = DfTableBuilder::new(LanguageTag::Vi);
/// let v = tfidf_vector::<f64>("a b", &builder);
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct DfTable {
    lang: LanguageTag,
    ids: HashMap<String, u32>,
    df: Vec<u64>,
    n_docs: u64,
}

/// Each text is one document.
pub fn build_df_table<I>(documents: I, lang: LanguageTag) -> Result<DfTable, SelectionError>
where
    I: IntoIterator,
    I::Item: AsRef<str>,
{
    let mut builder = DfTableBuilder::new(lang);
    for doc in documents {
        builder.add_document(doc.as_ref());
    }
    builder.freeze()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableFile {
    format: String,
    version: u32,
    lang: LanguageTag,
    n_docs: u64,
    /// `(term, df)` in term-id order.
    terms: Vec<(String, u64)>,
}

impl DfTable {
    pub fn lang(&self) -> LanguageTag {
        self.lang
    }

    pub fn n_docs(&self) -> u64 {
        self.n_docs
    }

    /// Vocabulary size.
    pub fn len(&self) -> usize {
        self.df.len()
    }

    pub fn is_empty(&self) -> bool {
        self.df.is_empty()
    }

    pub fn term_id(&self, term: &str) -> Option<u32> {
        self.ids.get(term).copied()
    }

    pub fn df(&self, term: &str) -> Option<u64> {
        self.term_id(term).map(|id| self.df[id as usize])
    }

    pub fn df_by_id(&self, id: u32) -> u64 {
        self.df[id as usize]
    }

    /// `ln(n_docs / df)`.
    pub fn idf<F: crate::Scalar>(&self, id: u32) -> F {
        (F::from_count(self.n_docs) / F::from_count(self.df[id as usize])).ln()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, u32, u64)> {
        self.ids
            .iter()
            .map(|(t, &id)| (t.as_str(), id, self.df[id as usize]))
    }

    /// Rough heap footprint in bytes.
    pub fn approx_heap_bytes(&self) -> usize {
        let strings: usize = self.ids.keys().map(|k| k.capacity()).sum();
        strings
            + self.ids.capacity() * (std::mem::size_of::<String>() + 4 + 8)
            + self.df.capacity() * 8
    }

    pub fn save(&self, path: &Path) -> Result<(), SelectionError> {
        let mut terms = vec![(String::new(), 0u64); self.df.len()];
        for (t, id, df) in self.terms() {
            terms[id as usize] = (t.to_string(), df);
        }
        let file = TableFile {
            format: TABLE_FORMAT.into(),
            version: TABLE_VERSION,
            lang: self.lang,
            n_docs: self.n_docs,
            terms,
        };
        let f = File::create(path).map_err(|e| CorpusError::io(path, e))?;
        let mut w = BufWriter::new(f);
        serde_json::to_writer(&mut w, &file).map_err(|e| SelectionError::TableFormat(e.to_string()))?;
        w.write_all(b"\n")
            .and_then(|_| w.flush())
            .map_err(|e| CorpusError::io(path, e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<DfTable, SelectionError> {
        let f = File::open(path).map_err(|e| CorpusError::io(path, e))?;
        let file: TableFile = serde_json::from_reader(BufReader::new(f))
            .map_err(|e| SelectionError::TableFormat(e.to_string()))?;
        if file.format != TABLE_FORMAT || file.version != TABLE_VERSION {
            return Err(SelectionError::TableFormat(format!(
                "unsupported table {} v{}",
                file.format, file.version
            )));
        }
        let mut ids = HashMap::with_capacity(file.terms.len());
        let mut df = Vec::with_capacity(file.terms.len());
        for (i, (term, d)) in file.terms.into_iter().enumerate() {
            if d < 1 || d > file.n_docs {
                return Err(SelectionError::TableFormat(format!(
                    "term `{term}` has df {d} outside 1..={}",
                    file.n_docs
                )));
            }
            if ids.insert(term.clone(), i as u32).is_some() {
                return Err(SelectionError::TableFormat(format!("duplicate term `{term}`")));
            }
            df.push(d);
        }
        if file.n_docs == 0 {
            return Err(SelectionError::EmptyCorpus);
        }
        Ok(DfTable {
            lang: file.lang,
            ids,
            df,
            n_docs: file.n_docs,
        })
    }
}
