//! Independent reference implementations used as test oracles. They avoid the
//! library's own code paths wherever possible.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use pseudosense::synth::PortableRng;
use pseudosense::{EmbeddingStore, PairLabel, SenseRecord};

/// Largest principal angle, in degrees, between the column spans of two
/// matrices with orthonormal columns of equal count.
pub fn max_principal_angle_deg(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let s = (a.transpose() * b).singular_values();
    let min = s.iter().copied().fold(f64::INFINITY, f64::min).min(1.0);
    min.acos().to_degrees()
}

/// Angle in degrees between two lines.
pub fn line_angle_deg(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a.dot(b).abs() / (a.norm() * b.norm())).min(1.0).acos().to_degrees()
}

/// Every ordered same-word pair, enumerated directly from the raw records in
/// (word first appearance, smaller original id first) order, as
/// `(label, a - b)`.
pub fn brute_force_pairs(records: &[SenseRecord]) -> Vec<(PairLabel, Vec<f64>)> {
    let mut words: Vec<&str> = Vec::new();
    for r in records {
        if !words.contains(&r.word.as_str()) {
            words.push(&r.word);
        }
    }
    let mut out = Vec::new();
    for w in words {
        let mut senses: Vec<&SenseRecord> = records.iter().filter(|r| r.word == w).collect();
        senses.sort_by_key(|r| r.original_id);
        for a in &senses {
            for b in &senses {
                if a.original_id != b.original_id {
                    let diff = a.vector.iter().zip(&b.vector).map(|(x, y)| x - y).collect();
                    out.push((PairLabel::new(w, a.original_id, b.original_id), diff));
                }
            }
        }
    }
    out
}

/// Ranks by counting: rank(x_i) = #{x_j < x_i} + (#{x_j == x_i} + 1) / 2.
pub fn count_ranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            let less = xs.iter().filter(|&&y| y < x).count() as f64;
            let equal = xs.iter().filter(|&&y| y == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Rank-then-Pearson, straight from the textbook formula.
pub fn spearman_oracle(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let (rx, ry) = (count_ranks(xs), count_ranks(ys));
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        None
    } else {
        Some(cov / (vx * vy).sqrt())
    }
}

/// The transformation as the solution of a linear system: extend the basis
/// `α_1..α_k` to an orthonormal basis `α_1..α_n` of the whole space, stack
/// `A` with rows `α_iᵀ`, and solve `A T_i = c_i` for every row `T_i` of `T`,
/// where `c_i = (0, ..., 0, α_{k+1,i}, ..., α_{n,i})`.
#[allow(clippy::needless_range_loop)]
pub fn basis_equation_transformation(basis: &[DVector<f64>], rng: &mut PortableRng) -> DMatrix<f64> {
    let n = basis[0].len();
    let k = basis.len();
    // Gram-Schmidt completion against random directions
    let mut full: Vec<DVector<f64>> = basis.to_vec();
    while full.len() < n {
        let mut v = DVector::from_fn(n, |_, _| rng.normal());
        for _ in 0..2 {
            for u in &full {
                v -= u * u.dot(&v);
            }
        }
        let norm = v.norm();
        if norm > 1e-6 {
            full.push(v / norm);
        }
    }
    let a = DMatrix::from_fn(n, n, |r, c| full[r][c]);
    let lu = a.lu();
    let mut t = DMatrix::zeros(n, n);
    for i in 0..n {
        let c = DVector::from_fn(n, |r, _| if r < k { 0.0 } else { full[r][i] });
        let row = lu.solve(&c).expect("A is invertible");
        t.row_mut(i).copy_from(&row.transpose());
    }
    t
}

/// Random orthonormal columns by classical Gram-Schmidt on Gaussian vectors.
pub fn gram_schmidt_basis(rng: &mut PortableRng, dim: usize, k: usize) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::new();
    while out.len() < k {
        let mut v = DVector::from_fn(dim, |_, _| rng.normal());
        for _ in 0..2 {
            for u in &out {
                v -= u * u.dot(&v);
            }
        }
        let norm = v.norm();
        if norm > 1e-6 {
            out.push(v / norm);
        }
    }
    out
}

/// Random store records: `words` words with 1..=max_senses senses each,
/// sparse original ids, small integer-valued vectors.
pub fn random_records(rng: &mut PortableRng, words: usize, max_senses: usize, dim: usize) -> Vec<SenseRecord> {
    let mut out = Vec::new();
    for w in 0..words {
        let n = 1 + rng.below(max_senses);
        let mut id = 0u64;
        for _ in 0..n {
            id += 1 + rng.below(3) as u64;
            let v = (0..dim).map(|_| (rng.below(21) as f64 - 10.0) / 4.0).collect();
            out.push(SenseRecord::new(format!("w{w}"), id, v));
        }
    }
    // interleave words so store order is not just sorted input
    let mut shuffled = Vec::with_capacity(out.len());
    while !out.is_empty() {
        let i = rng.below(out.len());
        shuffled.push(out.swap_remove(i));
    }
    shuffled
}

pub fn store_of(dim: usize, records: Vec<SenseRecord>) -> EmbeddingStore {
    EmbeddingStore::from_records(dim, records).unwrap()
}
