use nalgebra::DMatrix;

use super::ops::{fix_signs, Svd};
use super::{check_rank, reconstruction_residual, Decomposition, Method};
use crate::diffmat::DiffMatrix;
use crate::error::Result;

/// Rank-`d` PCA of the columns of `m`: `M = L + E`, `S = 0`.
pub fn pca_decompose(m: &DiffMatrix, d: usize) -> Result<Decomposition> {
    let x = m.data();
    check_rank(d, x.nrows(), x.ncols())?;
    let fit = PcaFit::compute(x, d)?;
    let gaussian = x - &fit.low_rank;
    let sparse = DMatrix::zeros(x.nrows(), x.ncols());
    let final_residual = reconstruction_residual(x, &fit.low_rank, &gaussian, &sparse);
    Ok(Decomposition {
        low_rank: fit.low_rank,
        gaussian,
        sparse,
        components: fit.components,
        singular_values: fit.singular_values,
        explained_variance_ratio: fit.explained_variance_ratio,
        method: Method::Pca,
        iterations_used: 1,
        converged: true,
        final_residual,
        history: Vec::new(),
        config: None,
    })
}

pub(crate) struct PcaFit {
    pub components: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    /// Projection of the input onto `span(components)`.
    pub low_rank: DMatrix<f64>,
}

impl PcaFit {
    /// Components are the top-`d` left singular vectors of the column-centred
    /// input; `L` is the orthogonal projection of the uncentred input onto
    /// them, so `rank(L) <= d` always holds.
    pub fn compute(x: &DMatrix<f64>, d: usize) -> Result<Self> {
        let (rows, cols) = x.shape();
        let mean = x.column_mean();
        let mut centered = x.clone();
        for mut col in centered.column_iter_mut() {
            col -= &mean;
        }
        let svd = Svd::left(&centered)?;
        let mut components = svd.u.columns(0, d).into_owned();
        fix_signs(&mut components);

        let total: f64 = svd.values.iter().map(|s| s * s).sum();
        let explained_variance_ratio = svd.values[..d]
            .iter()
            .map(|s| if total > 0.0 { s * s / total } else { 0.0 })
            .collect();

        let coeffs = components.tr_mul(x);
        let low_rank = &components * coeffs;
        debug_assert_eq!(low_rank.shape(), (rows, cols));
        Ok(PcaFit {
            components,
            singular_values: svd.values[..d].to_vec(),
            explained_variance_ratio,
            low_rank,
        })
    }
}
