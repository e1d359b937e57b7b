//! Diagnostics over a decomposition: which sense pairs line up with each
//! component, how much variance each component explains, and how large a
//! pair's sparse-noise column is.

use std::cmp::Ordering;
use std::fmt::Write as _;

use nalgebra::DVectorView;
use serde::{Deserialize, Serialize};

use crate::decompose::Decomposition;
use crate::diffmat::{DiffMatrix, PairLabel};
use crate::error::{Error, Result};
use crate::eval::cosine;
use crate::store::EmbeddingStore;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedPair {
    pub label: PairLabel,
    pub cosine: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedPairs {
    pub pairs: Vec<RankedPair>,
    /// Zero-norm columns that were skipped.
    pub skipped_zero: usize,
}

fn by_cosine_then_label(a: &RankedPair, b: &RankedPair) -> Ordering {
    b.cosine
        .total_cmp(&a.cosine)
        .then_with(|| a.label.cmp(&b.label))
}

/// The `top_n` columns of `m` most aligned with `component` (signed cosine).
///
/// Only one orientation of each mirrored pair is considered: the one with the
/// larger cosine, or on a tie the one with the smaller label.
pub fn rank_pairs_by_component(
    m: &DiffMatrix,
    component: DVectorView<'_, f64>,
    top_n: usize,
) -> Result<RankedPairs> {
    if top_n == 0 {
        return Err(Error::InvalidArgument("top_n must be at least 1".into()));
    }
    if component.len() != m.source_dimension() {
        return Err(Error::InvalidArgument("component dimension mismatch".into()));
    }
    if (component.norm() - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument("component must have unit norm".into()));
    }
    let data = m.data();
    let cosines: Vec<Option<f64>> = data
        .column_iter()
        .map(|c| {
            let n = c.norm();
            (n > 0.0).then(|| c.dot(&component) / n)
        })
        .collect();
    let skipped_zero = cosines.iter().filter(|c| c.is_none()).count();
    if skipped_zero > 0 {
        log::warn!("skipped {skipped_zero} zero-norm columns");
    }

    let mut pairs = Vec::new();
    for (j, cos) in cosines.iter().enumerate() {
        let Some(cos) = *cos else { continue };
        let label = &m.labels()[j];
        if let Some(t) = m.find(&label.reversed()) {
            if let Some(twin) = cosines[t] {
                let twin_wins = twin > cos || (twin == cos && m.labels()[t] < *label);
                if twin_wins {
                    continue;
                }
            }
        }
        pairs.push(RankedPair {
            label: label.clone(),
            cosine: cos.clamp(-1.0, 1.0),
        });
    }
    pairs.sort_by(by_cosine_then_label);
    pairs.truncate(top_n);
    Ok(RankedPairs {
        pairs,
        skipped_zero,
    })
}

/// Groups ranked pairs by word in order of first appearance and renders them
/// as `income_{2,4/4,5}`.
pub fn render_grouped(pairs: &[RankedPair]) -> String {
    let mut groups: Vec<(&str, Vec<String>)> = Vec::new();
    for p in pairs {
        let ids = format!("{},{}", p.label.sense_a, p.label.sense_b);
        match groups.iter_mut().find(|(w, _)| *w == p.label.word) {
            Some((_, v)) => v.push(ids),
            None => groups.push((&p.label.word, vec![ids])),
        }
    }
    groups
        .iter()
        .map(|(w, ids)| format!("{w}_{{{}}}", ids.join("/")))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Euclidean norm of the sparse-term column belonging to `pair`.
pub fn sparse_norm_for_pair(dec: &Decomposition, m: &DiffMatrix, pair: &PairLabel) -> Result<f64> {
    if dec.sparse.shape() != m.data().shape() {
        return Err(Error::InvalidArgument(
            "decomposition was not computed on this matrix".into(),
        ));
    }
    let j = m
        .find(pair)
        .ok_or_else(|| Error::PairNotFound(pair.to_string()))?;
    Ok(dec.sparse.column(j).norm())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub word: String,
    /// Original sense id.
    pub sense_id: u64,
    pub cosine: f64,
}

/// The `top_n` senses of other words closest in cosine to the given sense
/// (dense id). Ties are broken by `(word, sense_id)`.
pub fn nearest_neighbors(
    store: &EmbeddingStore,
    word: &str,
    sense_id: usize,
    top_n: usize,
) -> Result<Vec<Neighbor>> {
    if top_n == 0 {
        return Err(Error::InvalidArgument("top_n must be at least 1".into()));
    }
    let query = &store.get_sense(word, sense_id)?.vector;
    let mut out: Vec<Neighbor> = store
        .senses()
        .iter()
        .filter(|s| s.word != word)
        .map(|s| Neighbor {
            word: s.word.clone(),
            sense_id: s.original_id,
            cosine: cosine(query, &s.vector),
        })
        .collect();
    out.sort_by(|a, b| {
        b.cosine
            .total_cmp(&a.cosine)
            .then_with(|| a.word.cmp(&b.word))
            .then_with(|| a.sense_id.cmp(&b.sense_id))
    });
    out.truncate(top_n);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub component_index: usize,
    pub top_pairs: Vec<RankedPair>,
    pub explained_variance_ratio: f64,
    /// Mean cosine of `top_pairs`.
    pub avg_cos_top: f64,
    /// Free-text description, filled in by hand.
    pub annotation: Option<String>,
}

/// Per-component explained variance and mean cosine of its `top_n` pairs.
pub fn explained_variance_report(
    dec: &Decomposition,
    m: &DiffMatrix,
    top_n: usize,
) -> Result<Vec<ComponentReport>> {
    (0..dec.num_components())
        .map(|i| {
            let ranked = rank_pairs_by_component(m, dec.components.column(i), top_n)?;
            let avg = if ranked.pairs.is_empty() {
                0.0
            } else {
                ranked.pairs.iter().map(|p| p.cosine).sum::<f64>() / ranked.pairs.len() as f64
            };
            Ok(ComponentReport {
                component_index: i,
                top_pairs: ranked.pairs,
                explained_variance_ratio: dec.explained_variance_ratio.get(i).copied().unwrap_or(0.0),
                avg_cos_top: avg,
                annotation: None,
            })
        })
        .collect()
}

/// Tab-separated rendering: index, ρ_var×100, avg cos, grouped pairs, and a
/// final sum row. Fixed precision.
pub fn variance_table(reports: &[ComponentReport]) -> String {
    let mut out = String::from("component\trho_var_x100\tavg_cos\tpairs\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{}\t{:.1}\t{:.2}\t{}",
            r.component_index + 1,
            r.explained_variance_ratio * 100.0,
            r.avg_cos_top,
            render_grouped(&r.top_pairs)
        );
    }
    let rho: f64 = reports.iter().map(|r| r.explained_variance_ratio * 100.0).sum();
    let cos: f64 = reports.iter().map(|r| r.avg_cos_top).sum();
    let _ = writeln!(out, "sum\t{rho:.1}\t{cos:.2}\t");
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseIndicatorReport {
    pub pair: PairLabel,
    pub s_norm: f64,
    pub neighbors_a: Vec<Neighbor>,
    pub neighbors_b: Vec<Neighbor>,
}

/// Sparse-noise norm of `pair` together with the neighbours of both senses.
pub fn noise_indicator(
    dec: &Decomposition,
    m: &DiffMatrix,
    store: &EmbeddingStore,
    pair: &PairLabel,
    top_n: usize,
) -> Result<NoiseIndicatorReport> {
    let s_norm = sparse_norm_for_pair(dec, m, pair)?;
    let dense = |orig| store.get_sense_by_original(&pair.word, orig).map(|s| s.sense_id);
    Ok(NoiseIndicatorReport {
        pair: pair.clone(),
        s_norm,
        neighbors_a: nearest_neighbors(store, &pair.word, dense(pair.sense_a)?, top_n)?,
        neighbors_b: nearest_neighbors(store, &pair.word, dense(pair.sense_b)?, top_n)?,
    })
}

pub fn noise_table(reports: &[NoiseIndicatorReport]) -> String {
    let mut out = String::from("pair\tsense\tneighbors\ts_norm\n");
    let names = |ns: &[Neighbor]| {
        ns.iter()
            .map(|n| format!("{}#{}", n.word, n.sense_id))
            .collect::<Vec<_>>()
            .join(", ")
    };
    for r in reports {
        let _ = writeln!(out, "{}\t{}\t{}\t", r.pair, r.pair.sense_a, names(&r.neighbors_a));
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{:.2}",
            r.pair,
            r.pair.sense_b,
            names(&r.neighbors_b),
            r.s_norm
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::pca_decompose;
    use crate::store::SenseRecord;
    use nalgebra::DVector;

    fn store() -> EmbeddingStore {
        EmbeddingStore::from_records(
            3,
            vec![
                SenseRecord::new("a", 0, vec![1.0, 0.0, 0.0]),
                SenseRecord::new("a", 1, vec![0.0, 0.0, 0.0]),
                SenseRecord::new("b", 0, vec![0.0, 1.0, 0.0]),
                SenseRecord::new("b", 3, vec![0.0, 0.0, 1.0]),
                SenseRecord::new("c", 0, vec![0.0, 0.0, 2.0]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn normalized_column_ranks_first() {
        let m = DiffMatrix::build(&store()).unwrap();
        let c = DVector::from_vec(vec![0.0, 1.0, -1.0]).normalize();
        let ranked = rank_pairs_by_component(&m, c.as_view(), 5).unwrap();
        assert_eq!(ranked.pairs[0].label, PairLabel::new("b", 0, 3));
        assert!((ranked.pairs[0].cosine - 1.0).abs() < 1e-15);
        // one orientation per pair
        assert_eq!(ranked.pairs.len(), 2);
        assert!(ranked.pairs.windows(2).all(|w| w[0].cosine >= w[1].cosine));
    }

    #[test]
    fn orthogonal_pair_keeps_smaller_label() {
        let m = DiffMatrix::build(&store()).unwrap();
        let c = DVector::from_vec(vec![0.0, 1.0, 1.0]).normalize();
        let ranked = rank_pairs_by_component(&m, c.as_view(), 5).unwrap();
        let b = ranked.pairs.iter().find(|p| p.label.word == "b").unwrap();
        assert_eq!(b.label, PairLabel::new("b", 0, 3));
        assert_eq!(b.cosine, 0.0);
    }

    #[test]
    fn bad_component() {
        let m = DiffMatrix::build(&store()).unwrap();
        let c = DVector::from_vec(vec![0.0, 2.0, 0.0]);
        assert!(rank_pairs_by_component(&m, c.as_view(), 5).is_err());
        let c = DVector::from_vec(vec![0.0, 1.0, 0.0]);
        assert!(rank_pairs_by_component(&m, c.as_view(), 0).is_err());
    }

    #[test]
    fn grouped_rendering() {
        let pairs = vec![
            RankedPair { label: PairLabel::new("income", 2, 4), cosine: 0.3 },
            RankedPair { label: PairLabel::new("age", 6, 7), cosine: 0.2 },
            RankedPair { label: PairLabel::new("income", 4, 5), cosine: 0.1 },
        ];
        assert_eq!(render_grouped(&pairs), "income_{2,4/4,5}, age_{6,7}");
    }

    #[test]
    fn pca_sparse_norm_is_zero() {
        let s = store();
        let m = DiffMatrix::build(&s).unwrap();
        let dec = pca_decompose(&m, 1).unwrap();
        for l in m.labels() {
            assert_eq!(sparse_norm_for_pair(&dec, &m, l).unwrap(), 0.0);
        }
        assert!(sparse_norm_for_pair(&dec, &m, &PairLabel::new("c", 0, 1)).is_err());
    }

    #[test]
    fn neighbors_exclude_query_word() {
        let s = store();
        let n = nearest_neighbors(&s, "b", 1, 10).unwrap();
        assert!(n.iter().all(|x| x.word != "b"));
        assert_eq!(n[0].word, "c");
        assert_eq!(n[0].cosine, 1.0);
        // remaining ties at cosine 0 in (word, sense) order
        assert_eq!(
            n.iter().skip(1).map(|x| (x.word.as_str(), x.sense_id)).collect::<Vec<_>>(),
            vec![("a", 0), ("a", 1)]
        );
        assert!(nearest_neighbors(&s, "b", 2, 1).is_err());
    }

    #[test]
    fn rank_one_variance_report() {
        let s = EmbeddingStore::from_records(
            2,
            vec![
                SenseRecord::new("x", 0, vec![1.0, 1.0]),
                SenseRecord::new("x", 1, vec![0.0, 0.0]),
                SenseRecord::new("y", 0, vec![2.0, 2.0]),
                SenseRecord::new("y", 1, vec![0.0, 0.0]),
            ],
        )
        .unwrap();
        let m = DiffMatrix::build(&s).unwrap();
        let dec = pca_decompose(&m, 1).unwrap();
        let rep = explained_variance_report(&dec, &m, 5).unwrap();
        assert!((rep[0].explained_variance_ratio * 100.0 - 100.0).abs() < 1e-9);
        assert!((rep[0].avg_cos_top - 1.0).abs() < 1e-12);
        let table = variance_table(&rep);
        assert!(table.contains("1\t100.0\t1.00\tx_{0,1}, y_{0,1}"), "{table}");
    }
}
