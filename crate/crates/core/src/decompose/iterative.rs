use nalgebra::DMatrix;

use super::pca::PcaFit;
use super::{reconstruction_residual, Decomposition, Method, SolverConfig};
use crate::diffmat::DiffMatrix;
use crate::error::{Error, Result};

/// Root-mean-square of all entries: the noise scale of a zero-mean residual.
pub fn estimate_sigma(e: &DMatrix<f64>) -> Result<f64> {
    if e.is_empty() {
        return Err(Error::Empty);
    }
    Ok((e.norm_squared() / e.len() as f64).sqrt())
}

/// 0-1 mask of the entries of `e` lying strictly outside `[-3 sigma, 3 sigma]`,
/// with `sigma` from [`estimate_sigma`]. Returns the mask and its support size.
pub fn three_sigma_mask(e: &DMatrix<f64>) -> Result<(DMatrix<f64>, usize)> {
    let bound = 3.0 * estimate_sigma(e)?;
    let mut count = 0;
    let mask = e.map(|v| {
        if v.abs() > bound {
            count += 1;
            1.0
        } else {
            0.0
        }
    });
    Ok((mask, count))
}

/// Iterative Ex-RPCA with `rank(L)` fixed to `cfg.target_rank`.
///
/// Each round fits PCA to the current matrix, moves the residual entries
/// outside the three-sigma band into the sparse term and subtracts them from
/// the matrix. Stops once a round masks nothing. If `max_iterations` runs out
/// first, the last round's mask is not applied, `converged` is false, and
/// `L + E + S = M` still holds.
pub fn exrpca_iterative(m: &DiffMatrix, cfg: &SolverConfig) -> Result<Decomposition> {
    cfg.validate_common()?;
    let x = m.data();
    cfg.check_rank(x.nrows(), x.ncols())?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }

    let mut current = x.clone();
    let mut sparse = DMatrix::zeros(x.nrows(), x.ncols());
    let mut history = Vec::new();
    let mut iteration = 0;
    let (fit, gaussian, converged) = loop {
        iteration += 1;
        let fit = PcaFit::compute(&current, cfg.target_rank)?;
        let residual = &current - &fit.low_rank;
        let (mask, masked) = three_sigma_mask(&residual)?;
        history.push(masked as f64);
        log::debug!("iteration {iteration}: {masked} entries masked");
        if masked == 0 {
            break (fit, residual, true);
        }
        if iteration == cfg.max_iterations {
            log::warn!("iterative solver stopped after {iteration} rounds with {masked} entries still outside the band");
            break (fit, residual, false);
        }
        let step = residual.component_mul(&mask);
        sparse += &step;
        current -= &step;
    };

    let final_residual = reconstruction_residual(x, &fit.low_rank, &gaussian, &sparse);
    Ok(Decomposition {
        low_rank: fit.low_rank,
        gaussian,
        sparse,
        components: fit.components,
        singular_values: fit.singular_values,
        explained_variance_ratio: fit.explained_variance_ratio,
        method: Method::ExrpcaIterative,
        iterations_used: iteration,
        converged,
        final_residual,
        history,
        config: Some(cfg.clone()),
    })
}
