//! Multi-sense embedding storage.
//!
//! An [`EmbeddingStore`] owns every sense vector of every word. Sense ids read
//! from disk may be sparse (`cat#0`, `cat#6`); the store remaps them to a dense
//! `0..n_w` range per word while keeping the original id for display.
//!
//! Two text formats are understood:
//!
//! * **canonical** -- header `<num_sense_vectors> <D>`, then one line per sense
//!   `<word>#<sense_id> f_1 ... f_D`. An optional `#CLUSTERS` block repeats the
//!   line shape for context-cluster centres, and an optional `#GLOBALS` block
//!   holds per-word global vectors as `<word> f_1 ... f_D`.
//! * **mssg** -- header `<num_words> <D>`, then per word a `<word> <n_senses>`
//!   line, one global vector line, and `n_senses` pairs of sense-vector /
//!   cluster-centre lines.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// One sense of one word.
#[derive(Clone, Debug, PartialEq)]
pub struct SenseVector {
    pub word: String,
    /// Dense id in `0..n_w`.
    pub sense_id: usize,
    /// Id as it appeared in the source file.
    pub original_id: u64,
    pub vector: Vec<f64>,
    pub cluster_center: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingFormat {
    #[default]
    Canonical,
    Mssg,
}

impl std::str::FromStr for EmbeddingFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "canonical" => Ok(EmbeddingFormat::Canonical),
            "mssg" => Ok(EmbeddingFormat::Mssg),
            other => Err(Error::InvalidArgument(format!(
                "unknown embedding format {other:?}"
            ))),
        }
    }
}

/// Immutable collection of sense vectors sharing one dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingStore {
    dimension: usize,
    senses: Vec<SenseVector>,
    words: Vec<String>,
    // word -> (offset into `senses`, n_w); a word's senses are contiguous
    index: HashMap<String, (usize, usize)>,
    globals: HashMap<String, Vec<f64>>,
}

/// Raw sense record accepted by [`EmbeddingStore::from_records`].
#[derive(Clone, Debug)]
pub struct SenseRecord {
    pub word: String,
    pub original_id: u64,
    pub vector: Vec<f64>,
    pub cluster_center: Option<Vec<f64>>,
}

impl SenseRecord {
    pub fn new(word: impl Into<String>, original_id: u64, vector: Vec<f64>) -> Self {
        SenseRecord {
            word: word.into(),
            original_id,
            vector,
            cluster_center: None,
        }
    }

    pub fn with_center(mut self, center: Vec<f64>) -> Self {
        self.cluster_center = Some(center);
        self
    }
}

impl EmbeddingStore {
    /// Builds a store from unordered records.
    ///
    /// Words keep their first-appearance order; within a word, senses are
    /// ordered by original id and renumbered densely.
    pub fn from_records(
        dimension: usize,
        records: impl IntoIterator<Item = SenseRecord>,
    ) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        let mut words: Vec<String> = Vec::new();
        let mut grouped: HashMap<String, Vec<SenseRecord>> = HashMap::new();
        for (i, rec) in records.into_iter().enumerate() {
            check_len(i + 1, dimension, rec.vector.len())?;
            if let Some(c) = &rec.cluster_center {
                check_len(i + 1, dimension, c.len())?;
            }
            let slot = grouped.entry(rec.word.clone()).or_insert_with(|| {
                words.push(rec.word.clone());
                Vec::new()
            });
            if slot.iter().any(|r| r.original_id == rec.original_id) {
                return Err(Error::DuplicateSense {
                    word: rec.word,
                    sense_id: rec.original_id,
                });
            }
            slot.push(rec);
        }

        let mut senses = Vec::new();
        let mut index = HashMap::with_capacity(words.len());
        for word in &words {
            let mut recs = grouped.remove(word).unwrap_or_default();
            recs.sort_by_key(|r| r.original_id);
            index.insert(word.clone(), (senses.len(), recs.len()));
            for (dense, r) in recs.into_iter().enumerate() {
                senses.push(SenseVector {
                    word: r.word,
                    sense_id: dense,
                    original_id: r.original_id,
                    vector: r.vector,
                    cluster_center: r.cluster_center,
                });
            }
        }

        Ok(EmbeddingStore {
            dimension,
            senses,
            words,
            index,
            globals: HashMap::new(),
        })
    }

    /// An empty store of the given dimension.
    pub fn empty(dimension: usize) -> Result<Self> {
        Self::from_records(dimension, std::iter::empty())
    }

    /// Attaches a global (context) vector to a word already in the store.
    pub fn set_global(&mut self, word: &str, vector: Vec<f64>) -> Result<()> {
        if !self.index.contains_key(word) {
            return Err(Error::UnknownWord(word.to_string()));
        }
        check_len(0, self.dimension, vector.len())?;
        self.globals.insert(word.to_string(), vector);
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Words in load order.
    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// All senses, grouped by word in load order.
    pub fn senses(&self) -> &[SenseVector] {
        &self.senses
    }

    pub fn len(&self) -> usize {
        self.senses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.senses.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    /// Number of senses `n_w` of `word`.
    pub fn sense_count(&self, word: &str) -> Option<usize> {
        self.index.get(word).map(|&(_, n)| n)
    }

    /// Senses of `word` in dense-id order.
    pub fn senses_of(&self, word: &str) -> Result<&[SenseVector]> {
        let &(off, n) = self
            .index
            .get(word)
            .ok_or_else(|| Error::UnknownWord(word.to_string()))?;
        Ok(&self.senses[off..off + n])
    }

    /// Looks up a sense by its dense id.
    pub fn get_sense(&self, word: &str, sense_id: usize) -> Result<&SenseVector> {
        let senses = self.senses_of(word)?;
        senses.get(sense_id).ok_or_else(|| Error::SenseOutOfRange {
            word: word.to_string(),
            sense_id: sense_id as u64,
            count: senses.len(),
        })
    }

    /// Looks up a sense by the id it carried in the source file.
    pub fn get_sense_by_original(&self, word: &str, original_id: u64) -> Result<&SenseVector> {
        let senses = self.senses_of(word)?;
        senses
            .iter()
            .find(|s| s.original_id == original_id)
            .ok_or_else(|| Error::SenseOutOfRange {
                word: word.to_string(),
                sense_id: original_id,
                count: senses.len(),
            })
    }

    pub fn global(&self, word: &str) -> Option<&[f64]> {
        self.globals.get(word).map(Vec::as_slice)
    }

    /// Returns a copy with every sense vector replaced by `f(vector)`.
    /// Cluster centres and global vectors are carried over untouched.
    pub fn map_sense_vectors<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Vec<f64>,
    {
        let mut out = self.clone();
        for s in &mut out.senses {
            let v = f(&s.vector);
            check_len(0, self.dimension, v.len())?;
            s.vector = v;
        }
        Ok(out)
    }

    pub fn load(path: impl AsRef<Path>, format: EmbeddingFormat) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(Error::at(path))?;
        let reader = BufReader::new(file);
        match format {
            EmbeddingFormat::Canonical => Self::read_canonical(reader),
            EmbeddingFormat::Mssg => Self::read_mssg(reader),
        }
    }

    pub fn read_canonical<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = numbered_lines(reader);
        let (count, dim) = read_header(&mut lines)?;

        #[derive(PartialEq)]
        enum Block {
            Senses,
            Clusters,
            Globals,
        }
        let mut block = Block::Senses;
        let mut records = Vec::with_capacity(count as usize);
        let mut centers: Vec<(usize, String, u64, Vec<f64>)> = Vec::new();
        let mut globals: Vec<(usize, String, Vec<f64>)> = Vec::new();

        for item in lines {
            let (lineno, line) = item?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            match trimmed {
                "#CLUSTERS" if block == Block::Senses => {
                    block = Block::Clusters;
                    continue;
                }
                "#GLOBALS" if block != Block::Globals => {
                    block = Block::Globals;
                    continue;
                }
                _ => {}
            }
            let mut fields = trimmed.split_whitespace();
            let key = fields.next().unwrap_or_default();
            let values = parse_floats(lineno, fields)?;
            check_len(lineno, dim, values.len())?;
            match block {
                Block::Globals => globals.push((lineno, key.to_string(), values)),
                Block::Senses | Block::Clusters => {
                    let (word, id) = split_sense_key(lineno, key)?;
                    if block == Block::Senses {
                        records.push(SenseRecord::new(word, id, values));
                    } else {
                        centers.push((lineno, word.to_string(), id, values));
                    }
                }
            }
        }

        if records.len() as u64 != count {
            return Err(Error::format(
                1,
                format!(
                    "header declares {count} sense vectors, found {}",
                    records.len()
                ),
            ));
        }

        let mut store = Self::from_records(dim, records)?;
        for (lineno, word, id, center) in centers {
            let off = store
                .index
                .get(&word)
                .map(|&(off, n)| (off, n))
                .ok_or_else(|| Error::format(lineno, format!("cluster for unknown word {word}")))?;
            let slot = store.senses[off.0..off.0 + off.1]
                .iter_mut()
                .find(|s| s.original_id == id)
                .ok_or_else(|| Error::format(lineno, format!("cluster for unknown sense {word}#{id}")))?;
            if slot.cluster_center.is_some() {
                return Err(Error::format(lineno, format!("duplicate cluster {word}#{id}")));
            }
            slot.cluster_center = Some(center);
        }
        for (lineno, word, vector) in globals {
            if !store.contains(&word) {
                return Err(Error::format(lineno, format!("global for unknown word {word}")));
            }
            if store.globals.insert(word.clone(), vector).is_some() {
                return Err(Error::format(lineno, format!("duplicate global {word}")));
            }
        }
        Ok(store)
    }

    pub fn read_mssg<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = numbered_lines(reader).filter(|r| match r {
            Ok((_, l)) => !l.trim().is_empty(),
            Err(_) => true,
        });
        let (num_words, dim) = read_header(&mut lines)?;
        let mut next_line = |what: &str| -> Result<(usize, String)> {
            lines
                .next()
                .unwrap_or_else(|| Err(Error::format(0, format!("unexpected end of file, expected {what}"))))
        };

        let mut records = Vec::new();
        let mut globals = Vec::new();
        for _ in 0..num_words {
            let (lineno, line) = next_line("word record")?;
            let mut fields = line.split_whitespace();
            let word = fields
                .next()
                .ok_or_else(|| Error::format(lineno, "missing word"))?
                .to_string();
            let n: usize = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| Error::format(lineno, "missing or invalid sense count"))?;
            if fields.next().is_some() || n == 0 {
                return Err(Error::format(lineno, "malformed word record"));
            }
            let (lineno, line) = next_line("global vector")?;
            let global = parse_floats(lineno, line.split_whitespace())?;
            check_len(lineno, dim, global.len())?;
            globals.push((word.clone(), global));
            for s in 0..n {
                let (lineno, line) = next_line("sense vector")?;
                let v = parse_floats(lineno, line.split_whitespace())?;
                check_len(lineno, dim, v.len())?;
                let (lineno, line) = next_line("cluster centre")?;
                let c = parse_floats(lineno, line.split_whitespace())?;
                check_len(lineno, dim, c.len())?;
                records.push(SenseRecord::new(word.clone(), s as u64, v).with_center(c));
            }
        }
        if let Some(extra) = lines.next() {
            let (lineno, _) = extra?;
            return Err(Error::format(lineno, "trailing data after last word record"));
        }

        let mut store = Self::from_records(dim, records)?;
        for (word, g) in globals {
            store.globals.insert(word, g);
        }
        Ok(store)
    }

    /// Writes the canonical format. Floats use the shortest representation
    /// that parses back to the identical `f64`.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(Error::at(path))?;
        let mut w = BufWriter::new(file);
        self.write_canonical(&mut w).map_err(Error::at(path))?;
        w.flush().map_err(Error::at(path))?;
        Ok(())
    }

    pub fn write_canonical<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.senses.len(), self.dimension)?;
        let mut buf = String::new();
        for s in &self.senses {
            buf.clear();
            write_vector_line(&mut buf, &format!("{}#{}", s.word, s.original_id), &s.vector);
            w.write_all(buf.as_bytes())?;
        }
        if self.senses.iter().any(|s| s.cluster_center.is_some()) {
            writeln!(w, "#CLUSTERS")?;
            for s in &self.senses {
                if let Some(c) = &s.cluster_center {
                    buf.clear();
                    write_vector_line(&mut buf, &format!("{}#{}", s.word, s.original_id), c);
                    w.write_all(buf.as_bytes())?;
                }
            }
        }
        if !self.globals.is_empty() {
            writeln!(w, "#GLOBALS")?;
            for word in &self.words {
                if let Some(g) = self.globals.get(word) {
                    buf.clear();
                    write_vector_line(&mut buf, word, g);
                    w.write_all(buf.as_bytes())?;
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn write_vector_line(buf: &mut String, key: &str, values: &[f64]) {
    buf.push_str(key);
    for v in values {
        // Display for f64 is round-trip exact
        let _ = write!(buf, " {v}");
    }
    buf.push('\n');
}

fn check_len(line: usize, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            line,
            expected,
            found,
        });
    }
    Ok(())
}

fn numbered_lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    reader
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l)).map_err(Error::from))
}

fn read_header<I>(lines: &mut I) -> Result<(u64, usize)>
where
    I: Iterator<Item = Result<(usize, String)>>,
{
    let (lineno, header) = lines.next().ok_or(Error::Empty)??;
    let mut parts = header.split_whitespace();
    let parsed = (
        parts.next().and_then(|p| p.parse::<u64>().ok()),
        parts.next().and_then(|p| p.parse::<usize>().ok()),
        parts.next(),
    );
    match parsed {
        (Some(n), Some(d), None) if d > 0 => Ok((n, d)),
        _ => Err(Error::format(lineno, format!("malformed header {header:?}"))),
    }
}

fn parse_floats<'a>(line: usize, fields: impl Iterator<Item = &'a str>) -> Result<Vec<f64>> {
    fields
        .map(|f| match f.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(Error::format(line, format!("invalid number {f:?}"))),
        })
        .collect()
}

fn split_sense_key(line: usize, key: &str) -> Result<(&str, u64)> {
    let (word, id) = key
        .rsplit_once('#')
        .ok_or_else(|| Error::format(line, format!("expected <word>#<sense_id>, found {key:?}")))?;
    if word.is_empty() {
        return Err(Error::format(line, "empty word"));
    }
    let id = id
        .parse::<u64>()
        .map_err(|_| Error::format(line, format!("invalid sense id in {key:?}")))?;
    Ok((word, id))
}
