//! Word-similarity evaluation.
//!
//! Scores each dataset pair with a similarity metric and reports the Spearman
//! rank correlation (×100) against the gold ratings. Two metrics:
//!
//! * **avgSim** -- mean cosine over all cross-word sense pairs; ignores context.
//! * **localSim** -- picks one sense per word by agreement between a windowed
//!   context vector and each sense's cluster centre, then takes the cosine of
//!   the two picked sense vectors.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decompose::Decomposition;
use crate::error::{Error, Result};
use crate::projection::ProjectionMatrix;
use crate::store::EmbeddingStore;

pub const WS353_SIZE: usize = 353;
pub const SCWS_SIZE: usize = 2003;

/// A tokenised sentence with the position of the target word.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Context {
    pub tokens: Vec<String>,
    pub target: usize,
}

impl Context {
    /// Splits on whitespace and strips the first `<b>`...`</b>` marker pair,
    /// recording the index of the first token inside it.
    pub fn parse_marked(text: &str) -> Option<Context> {
        let spaced = text.replace("<b>", " <b> ").replace("</b>", " </b> ");
        let mut tokens = Vec::new();
        let mut target = None;
        let mut inside = false;
        for tok in spaced.split_whitespace() {
            match tok {
                "<b>" => inside = true,
                "</b>" => inside = false,
                _ => {
                    if inside && target.is_none() {
                        target = Some(tokens.len());
                    }
                    tokens.push(tok.to_string());
                }
            }
        }
        target.map(|target| Context { tokens, target })
    }

    fn lowercased(mut self) -> Self {
        for t in &mut self.tokens {
            *t = t.to_lowercase();
        }
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityPair {
    pub word1: String,
    pub word2: String,
    pub context1: Option<Context>,
    pub context2: Option<Context>,
    pub gold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityDataset {
    pub name: String,
    pub pairs: Vec<SimilarityPair>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    #[default]
    Ws353,
    Scws,
}

impl std::str::FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ws353" => Ok(DatasetFormat::Ws353),
            "scws" => Ok(DatasetFormat::Scws),
            other => Err(Error::InvalidArgument(format!("unknown dataset format {other:?}"))),
        }
    }
}

impl SimilarityDataset {
    pub fn is_contextual(&self) -> bool {
        !self.pairs.is_empty()
            && self
                .pairs
                .iter()
                .all(|p| p.context1.is_some() && p.context2.is_some())
    }

    pub fn load(path: impl AsRef<Path>, format: DatasetFormat, lowercase: bool) -> Result<Self> {
        let ds = match format {
            DatasetFormat::Ws353 => load_ws353(path)?,
            DatasetFormat::Scws => load_scws(path)?,
        };
        Ok(if lowercase { ds.lowercased() } else { ds })
    }

    /// Lower-cases target words and context tokens.
    pub fn lowercased(mut self) -> Self {
        for p in &mut self.pairs {
            p.word1 = p.word1.to_lowercase();
            p.word2 = p.word2.to_lowercase();
            p.context1 = p.context1.take().map(Context::lowercased);
            p.context2 = p.context2.take().map(Context::lowercased);
        }
        self
    }
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn open_lines(path: &Path) -> Result<impl Iterator<Item = Result<(usize, String)>>> {
    let file = File::open(path).map_err(Error::at(path))?;
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l)).map_err(Error::from)))
}

/// Reads `word1,word2,score` lines (comma or tab separated). A first line
/// whose score field is not numeric is taken as a header.
pub fn load_ws353(path: impl AsRef<Path>) -> Result<SimilarityDataset> {
    let path = path.as_ref();
    let mut pairs = Vec::new();
    let mut first = true;
    for item in open_lines(path)? {
        let (lineno, line) = item?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let sep = if line.contains('\t') { '\t' } else { ',' };
        let fields: Vec<&str> = line.split(sep).map(str::trim).collect();
        let is_first = std::mem::replace(&mut first, false);
        if fields.len() < 3 {
            return Err(Error::format(lineno, "expected word1, word2, score"));
        }
        let score = match fields[2].parse::<f64>() {
            Ok(s) if s.is_finite() => s,
            _ if is_first => continue,
            _ => return Err(Error::format(lineno, format!("invalid score {:?}", fields[2]))),
        };
        pairs.push(SimilarityPair {
            word1: fields[0].to_string(),
            word2: fields[1].to_string(),
            context1: None,
            context2: None,
            gold: score,
        });
    }
    if pairs.len() != WS353_SIZE {
        log::warn!("{}: {} pairs, expected {WS353_SIZE}", path.display(), pairs.len());
    }
    Ok(SimilarityDataset {
        name: dataset_name(path),
        pairs,
    })
}

/// Reads the tab-separated SCWS layout:
/// `id word1 POS1 word2 POS2 context1 context2 mean ratings...`, with each
/// target wrapped in `<b>`...`</b>` inside its context.
pub fn load_scws(path: impl AsRef<Path>) -> Result<SimilarityDataset> {
    let path = path.as_ref();
    let mut pairs = Vec::new();
    for item in open_lines(path)? {
        let (lineno, line) = item?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 8 {
            return Err(Error::format(
                lineno,
                format!("expected at least 8 tab-separated fields, found {}", fields.len()),
            ));
        }
        let context = |i: usize| {
            Context::parse_marked(fields[i])
                .ok_or_else(|| Error::format(lineno, "context has no <b>...</b> target"))
        };
        let gold = match fields[7].trim().parse::<f64>() {
            Ok(s) if s.is_finite() => s,
            _ => return Err(Error::format(lineno, format!("invalid mean rating {:?}", fields[7]))),
        };
        pairs.push(SimilarityPair {
            word1: fields[1].trim().to_string(),
            word2: fields[3].trim().to_string(),
            context1: Some(context(5)?),
            context2: Some(context(6)?),
            gold,
        });
    }
    if pairs.len() != SCWS_SIZE {
        log::warn!("{}: {} pairs, expected {SCWS_SIZE}", path.display(), pairs.len());
    }
    Ok(SimilarityDataset {
        name: dataset_name(path),
        pairs,
    })
}

/// Cosine similarity; zero when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na.sqrt() * nb.sqrt())
    }
}

/// Mean cosine over all `n_w1 * n_w2` sense pairs.
pub fn avg_sim(store: &EmbeddingStore, w1: &str, w2: &str) -> Result<f64> {
    let s1 = store.senses_of(w1)?;
    let s2 = store.senses_of(w2)?;
    let mut total = 0.0;
    for a in s1 {
        for b in s2 {
            total += cosine(&a.vector, &b.vector);
        }
    }
    Ok(total / (s1.len() * s2.len()) as f64)
}

/// Mean context vector of the in-vocabulary tokens within `window` of the
/// target (target excluded). Each token contributes its global vector when the
/// store has one, otherwise its first sense. `None` if no token is known.
pub fn context_vector(store: &EmbeddingStore, ctx: &Context, window: usize) -> Option<Vec<f64>> {
    let lo = ctx.target.saturating_sub(window);
    let hi = (ctx.target + window + 1).min(ctx.tokens.len());
    let mut sum = vec![0.0; store.dimension()];
    let mut n = 0usize;
    for (i, tok) in ctx.tokens.iter().enumerate().take(hi).skip(lo) {
        if i == ctx.target {
            continue;
        }
        let v = match store.global(tok) {
            Some(g) => g,
            None => match store.senses_of(tok) {
                Ok(senses) => senses[0].vector.as_slice(),
                Err(_) => continue,
            },
        };
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
        n += 1;
    }
    if n == 0 {
        return None;
    }
    for s in &mut sum {
        *s /= n as f64;
    }
    Some(sum)
}

/// Dense sense id of `word` that best matches `context_rep`: argmax cosine
/// against cluster centres when every sense has one, otherwise against the
/// sense vectors. Ties go to the lower id.
pub fn select_sense(store: &EmbeddingStore, word: &str, context_rep: &[f64]) -> Result<usize> {
    let senses = store.senses_of(word)?;
    let use_centers = senses.iter().all(|s| s.cluster_center.is_some());
    let mut best = 0;
    let mut best_cos = f64::NEG_INFINITY;
    for s in senses {
        let reference = match (&s.cluster_center, use_centers) {
            (Some(c), true) => c,
            _ => &s.vector,
        };
        let c = cosine(reference, context_rep);
        if c > best_cos {
            best_cos = c;
            best = s.sense_id;
        }
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalSim {
    pub score: f64,
    /// True when a context had no known tokens and avgSim was used instead.
    pub fell_back: bool,
}

pub fn local_sim(
    store: &EmbeddingStore,
    w1: &str,
    ctx1: &Context,
    w2: &str,
    ctx2: &Context,
    window: usize,
) -> Result<LocalSim> {
    let pick = |word: &str, ctx: &Context| -> Result<Option<usize>> {
        let n = store
            .sense_count(word)
            .ok_or_else(|| Error::UnknownWord(word.to_string()))?;
        if n == 1 {
            return Ok(Some(0));
        }
        match context_vector(store, ctx, window) {
            Some(rep) => select_sense(store, word, &rep).map(Some),
            None => Ok(None),
        }
    };
    match (pick(w1, ctx1)?, pick(w2, ctx2)?) {
        (Some(i), Some(j)) => Ok(LocalSim {
            score: cosine(
                &store.get_sense(w1, i)?.vector,
                &store.get_sense(w2, j)?.vector,
            ),
            fell_back: false,
        }),
        _ => Ok(LocalSim {
            score: avg_sim(store, w1, w2)?,
            fell_back: true,
        }),
    }
}

/// Fractional ranks (1-based); tied values share the mean of their ranks.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation with average ranks for ties.
///
/// Returns `Ok(None)` when either list has zero rank variance (all values
/// equal), where the correlation is undefined.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<Option<f64>> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::InvalidArgument("need at least two observations".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(pearson(&average_ranks(xs), &average_ranks(ys)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Metric {
    AvgSim,
    LocalSim,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "avgsim" => Ok(Metric::AvgSim),
            "localsim" => Ok(Metric::LocalSim),
            other => Err(Error::InvalidArgument(format!("unknown metric {other:?}"))),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::AvgSim => "avgSim",
            Metric::LocalSim => "localSim",
        })
    }
}

pub const DEFAULT_WINDOW: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub metric: Metric,
    pub spearman_x100: f64,
    pub pairs_scored: usize,
    pub pairs_skipped_oov: usize,
    /// localSim pairs scored with avgSim because a context was fully unknown.
    pub context_fallbacks: usize,
    pub window: usize,
    pub rank_of_l: Option<usize>,
}

impl EvalReport {
    /// One-line summary with ρ×100 to one decimal.
    pub fn summary(&self) -> String {
        format!(
            "{}\t{}\t{:.1}\tscored={}\tskipped={}",
            self.dataset, self.metric, self.spearman_x100, self.pairs_scored, self.pairs_skipped_oov
        )
    }
}

/// Model score for every pair in dataset order; `None` for out-of-vocabulary
/// pairs. The second value counts localSim context fallbacks.
pub fn score_pairs(
    store: &EmbeddingStore,
    ds: &SimilarityDataset,
    metric: Metric,
    window: usize,
) -> Result<(Vec<Option<f64>>, usize)> {
    let mut fallbacks = 0;
    let mut scores = Vec::with_capacity(ds.pairs.len());
    for p in &ds.pairs {
        if !store.contains(&p.word1) || !store.contains(&p.word2) {
            scores.push(None);
            continue;
        }
        let s = match metric {
            Metric::AvgSim => avg_sim(store, &p.word1, &p.word2)?,
            Metric::LocalSim => {
                let (c1, c2) = match (&p.context1, &p.context2) {
                    (Some(c1), Some(c2)) => (c1, c2),
                    _ => {
                        return Err(Error::InvalidArgument(
                            "localSim needs a dataset with contexts".into(),
                        ))
                    }
                };
                let r = local_sim(store, &p.word1, c1, &p.word2, c2, window)?;
                fallbacks += r.fell_back as usize;
                r.score
            }
        };
        scores.push(Some(s));
    }
    Ok((scores, fallbacks))
}

/// Scores every in-vocabulary pair and correlates against the gold ratings.
pub fn evaluate(
    store: &EmbeddingStore,
    ds: &SimilarityDataset,
    metric: Metric,
    window: usize,
) -> Result<EvalReport> {
    if metric == Metric::LocalSim && !ds.is_contextual() {
        return Err(Error::InvalidArgument(
            "localSim needs a dataset with contexts".into(),
        ));
    }
    let (scores, fallbacks) = score_pairs(store, ds, metric, window)?;
    let (model, gold): (Vec<f64>, Vec<f64>) = scores
        .iter()
        .zip(&ds.pairs)
        .filter_map(|(s, p)| s.map(|s| (s, p.gold)))
        .unzip();
    let skipped = ds.pairs.len() - model.len();
    if model.is_empty() {
        return Err(Error::NoPairsScored);
    }
    if skipped > 0 {
        log::info!("{}: skipped {skipped} out-of-vocabulary pairs", ds.name);
    }
    let rho = if model.len() < 2 {
        None
    } else {
        spearman(&model, &gold)?
    };
    let rho = rho.ok_or(Error::UndefinedCorrelation)?;
    Ok(EvalReport {
        dataset: ds.name.clone(),
        metric,
        spearman_x100: rho * 100.0,
        pairs_scored: model.len(),
        pairs_skipped_oov: skipped,
        context_fallbacks: fallbacks,
        window,
        rank_of_l: None,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub k: usize,
    pub spearman_x100: f64,
}

/// Evaluates the store after removing the first `k` components, for each
/// `k` in `ks`. `k = 0` is the unprojected baseline.
pub fn dimension_sweep(
    store: &EmbeddingStore,
    dec: &Decomposition,
    ds: &SimilarityDataset,
    ks: &[usize],
    metric: Metric,
    window: usize,
) -> Result<Vec<SweepPoint>> {
    if let Some(&max) = ks.iter().max() {
        if max > dec.num_components() {
            return Err(Error::InvalidArgument(format!(
                "sweep up to k = {max} but only {} components",
                dec.num_components()
            )));
        }
    }
    ks.iter()
        .map(|&k| {
            let report = if k == 0 {
                evaluate(store, ds, metric, window)?
            } else {
                let t = ProjectionMatrix::build_reorthonormalized(&dec.components_of(k)?)?;
                evaluate(&t.apply_to_store(store)?, ds, metric, window)?
            };
            Ok(SweepPoint {
                k,
                spearman_x100: report.spearman_x100,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::SenseRecord;
    use approx::assert_abs_diff_eq;

    #[test]
    fn parse_marked_context() {
        let c = Context::parse_marked("the <b>bank</b> of the river").unwrap();
        assert_eq!(c.tokens, ["the", "bank", "of", "the", "river"]);
        assert_eq!(c.target, 1);
        let c = Context::parse_marked("a <b> bank </b> loan").unwrap();
        assert_eq!(c.target, 1);
        assert!(Context::parse_marked("no marker here").is_none());
    }

    #[test]
    fn spearman_trivial() {
        let up = [1.0, 2.0, 3.0, 4.0];
        let down = [9.0, 7.0, 5.0, 1.0];
        assert_eq!(spearman(&up, &up).unwrap(), Some(1.0));
        assert_eq!(spearman(&up, &down).unwrap(), Some(-1.0));
        assert_eq!(spearman(&up, &[2.0; 4]).unwrap(), None);
        assert!(spearman(&up, &down[..3]).is_err());
        assert!(spearman(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn average_ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
    }

    fn two_words() -> EmbeddingStore {
        EmbeddingStore::from_records(
            2,
            vec![
                SenseRecord::new("a", 0, vec![1.0, 0.0]),
                SenseRecord::new("b", 0, vec![1.0, 0.0]),
                SenseRecord::new("c", 0, vec![0.0, 2.0]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn avg_sim_single_senses() {
        let s = two_words();
        assert_eq!(avg_sim(&s, "a", "b").unwrap(), 1.0);
        assert_eq!(avg_sim(&s, "a", "c").unwrap(), 0.0);
        assert!(matches!(avg_sim(&s, "a", "zzz"), Err(Error::UnknownWord(_))));
    }

    #[test]
    fn local_sim_picks_matching_center() {
        let store = EmbeddingStore::from_records(
            2,
            vec![
                SenseRecord::new("bank", 0, vec![1.0, 0.2]).with_center(vec![1.0, 0.0]),
                SenseRecord::new("bank", 1, vec![0.1, 1.0]).with_center(vec![0.0, 1.0]),
                SenseRecord::new("water", 0, vec![0.0, 3.0]),
                SenseRecord::new("money", 0, vec![3.0, 0.0]),
            ],
        )
        .unwrap();
        let ctx = Context::parse_marked("water <b>bank</b>").unwrap();
        let rep = context_vector(&store, &ctx, 5).unwrap();
        assert_eq!(select_sense(&store, "bank", &rep).unwrap(), 1);

        let other = Context::parse_marked("<b>money</b>").unwrap();
        let r = local_sim(&store, "bank", &ctx, "money", &other, 5).unwrap();
        assert!(!r.fell_back);
        assert_abs_diff_eq!(r.score, cosine(&[0.1, 1.0], &[3.0, 0.0]));

        let unknown = Context::parse_marked("zzz <b>bank</b> qqq").unwrap();
        let r = local_sim(&store, "bank", &unknown, "money", &other, 5).unwrap();
        assert!(r.fell_back);
        assert_abs_diff_eq!(r.score, avg_sim(&store, "bank", "money").unwrap());
    }

    #[test]
    fn window_limits_context() {
        let store = two_words();
        let ctx = Context::parse_marked("a x x <b>t</b> x x x c").unwrap();
        assert_eq!(context_vector(&store, &ctx, 2), None);
        assert_eq!(context_vector(&store, &ctx, 3).unwrap(), vec![1.0, 0.0]);
        assert_eq!(context_vector(&store, &ctx, 4).unwrap(), vec![0.5, 1.0]);
    }

    #[test]
    fn evaluate_perfect_and_oov() {
        let store = two_words();
        let mk = |w1: &str, w2: &str, gold| SimilarityPair {
            word1: w1.into(),
            word2: w2.into(),
            context1: None,
            context2: None,
            gold,
        };
        let ds = SimilarityDataset {
            name: "toy".into(),
            pairs: vec![mk("a", "b", 1.0), mk("a", "c", 0.0), mk("a", "nope", 3.0)],
        };
        let r = evaluate(&store, &ds, Metric::AvgSim, 5).unwrap();
        assert_eq!(r.spearman_x100, 100.0);
        assert_eq!((r.pairs_scored, r.pairs_skipped_oov), (2, 1));
        assert!(evaluate(&store, &ds, Metric::LocalSim, 5).is_err());
        let none = SimilarityDataset {
            name: "x".into(),
            pairs: vec![mk("q", "r", 1.0)],
        };
        assert!(matches!(evaluate(&store, &none, Metric::AvgSim, 5), Err(Error::NoPairsScored)));
    }
}
