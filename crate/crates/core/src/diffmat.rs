//! Sense-wise difference matrix.
//!
//! For every word with `n_w >= 2` senses, each ordered pair `(a, b)` with
//! `a != b` contributes the column `v_a - v_b`. Both orientations are stored,
//! so the matrix has `sum n_w (n_w - 1)` columns and an exactly zero column
//! mean. Columns appear word by word in store order, and pairs within a word in
//! lexicographic `(a, b)` order of dense sense ids.

use std::collections::HashMap;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::EmbeddingStore;

/// Column label: a word and two of its senses, by original id.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairLabel {
    pub word: String,
    pub sense_a: u64,
    pub sense_b: u64,
}

impl PairLabel {
    pub fn new(word: impl Into<String>, sense_a: u64, sense_b: u64) -> Self {
        PairLabel {
            word: word.into(),
            sense_a,
            sense_b,
        }
    }

    /// The same pair in the opposite orientation.
    pub fn reversed(&self) -> Self {
        PairLabel {
            word: self.word.clone(),
            sense_a: self.sense_b,
            sense_b: self.sense_a,
        }
    }
}

impl fmt::Display for PairLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{{{},{}}}", self.word, self.sense_a, self.sense_b)
    }
}

/// Parses the display form `word_{a,b}`.
impl std::str::FromStr for PairLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("expected word_{{a,b}}, got {s:?}"));
        let (word, rest) = s.rsplit_once("_{").ok_or_else(bad)?;
        let (a, b) = rest
            .strip_suffix('}')
            .and_then(|r| r.split_once(','))
            .ok_or_else(bad)?;
        let id = |x: &str| x.trim().parse::<u64>().map_err(|_| bad());
        if word.is_empty() {
            return Err(bad());
        }
        Ok(PairLabel::new(word, id(a)?, id(b)?))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiffMatrix {
    data: DMatrix<f64>,
    labels: Vec<PairLabel>,
    lookup: HashMap<PairLabel, usize>,
}

impl DiffMatrix {
    /// Builds the difference matrix of `store`.
    ///
    /// A store whose words all have a single sense yields `N = 0`; this is
    /// legal and logged as a warning.
    pub fn build(store: &EmbeddingStore) -> Result<Self> {
        if store.is_empty() {
            return Err(Error::Empty);
        }
        let d = store.dimension();
        let n: usize = store
            .words()
            .iter()
            .map(|w| {
                let k = store.sense_count(w).unwrap_or(0);
                k * k.saturating_sub(1)
            })
            .sum();
        if n == 0 {
            log::warn!("difference matrix has no columns: every word has a single sense");
        }

        let mut data = DMatrix::<f64>::zeros(d, n);
        let mut labels = Vec::with_capacity(n);
        let mut j = 0;
        for word in store.words() {
            let senses = store.senses_of(word)?;
            for a in senses {
                for b in senses {
                    if a.sense_id == b.sense_id {
                        continue;
                    }
                    let mut col = data.column_mut(j);
                    for (dst, (x, y)) in col.iter_mut().zip(a.vector.iter().zip(&b.vector)) {
                        *dst = x - y;
                    }
                    labels.push(PairLabel::new(word.clone(), a.original_id, b.original_id));
                    j += 1;
                }
            }
        }
        Self::from_parts(data, labels)
    }

    /// Reassembles a matrix from its data and labels (e.g. after loading a
    /// dump). Labels must be unique and match the column count.
    pub fn from_parts(data: DMatrix<f64>, labels: Vec<PairLabel>) -> Result<Self> {
        if labels.len() != data.ncols() {
            return Err(Error::InvalidArgument(format!(
                "{} labels for {} columns",
                labels.len(),
                data.ncols()
            )));
        }
        let mut lookup = HashMap::with_capacity(labels.len());
        for (j, l) in labels.iter().enumerate() {
            if lookup.insert(l.clone(), j).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate column label {l}")));
            }
        }
        Ok(DiffMatrix {
            data,
            labels,
            lookup,
        })
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn labels(&self) -> &[PairLabel] {
        &self.labels
    }

    /// Row count `D`.
    pub fn source_dimension(&self) -> usize {
        self.data.nrows()
    }

    /// Column count `N`.
    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_degenerate(&self) -> bool {
        self.ncols() == 0
    }

    pub fn column_label(&self, j: usize) -> Result<&PairLabel> {
        self.labels.get(j).ok_or(Error::IndexOutOfRange {
            index: j,
            len: self.labels.len(),
        })
    }

    /// Column index of `label`, if present.
    pub fn find(&self, label: &PairLabel) -> Option<usize> {
        self.lookup.get(label).copied()
    }

    /// Column index of the reversed twin of column `j`.
    pub fn twin_of(&self, j: usize) -> Result<usize> {
        let label = self.column_label(j)?;
        self.find(&label.reversed())
            .ok_or_else(|| Error::PairNotFound(label.reversed().to_string()))
    }

    pub fn write(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        crate::dump::write_matrix(path, &self.data, &self.labels)
    }

    pub fn read(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let (data, labels) = crate::dump::read_matrix(path)?;
        Self::from_parts(data, labels)
    }
}
