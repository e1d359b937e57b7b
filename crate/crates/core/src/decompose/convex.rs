use nalgebra::DMatrix;

use super::ops::{fix_signs, reorthonormalize, shrink, spectral_norm, svt_with_spectrum, Svd};
use super::{reconstruction_residual, Decomposition, Method, SolverConfig};
use crate::diffmat::DiffMatrix;
use crate::error::{Error, Result};

/// Singular values of `L` below this fraction of the largest are treated as
/// zero when reading off components.
const EFFECTIVE_RANK_CUTOFF: f64 = 1e-8;

/// Convex Ex-RPCA by the inexact augmented Lagrange multiplier method.
///
/// Minimises `||L||_* + lambda1 ||E||_F^2 + lambda2 ||S||_1` subject to
/// `L + E + S = M`. Each sweep takes the closed-form blockwise minimiser of
/// the augmented Lagrangian for `L`, `E` and `S` in turn, then a dual ascent
/// step on `Y`. The penalty `mu` starts at `0.5 / ||sgn(M)||_2` and grows by
/// `rho` whenever `sqrt(mu) * ||Δ(E + S)||_F / ||M||_F < epsilon_mu`.
///
/// The solver stops when the relative constraint residual falls below
/// `residual_tolerance`. `cfg.target_rank` is ignored: components are the
/// left singular vectors of the converged `L` whose singular values exceed
/// `1e-8` of the largest.
pub fn exrpca_convex(m: &DiffMatrix, cfg: &SolverConfig) -> Result<Decomposition> {
    cfg.validate_common()?;
    if !(cfg.rho > 1.0) {
        return Err(Error::InvalidArgument(format!("rho must exceed 1, got {}", cfg.rho)));
    }
    if !(cfg.epsilon_mu > 0.0) {
        return Err(Error::InvalidArgument("epsilon_mu must be positive".into()));
    }
    let x = m.data();
    let (rows, cols) = x.shape();
    if cols == 0 {
        return Err(Error::InvalidArgument("matrix has no columns".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let (lambda1, lambda2) = cfg.lambdas(rows, cols);
    if !(lambda1 > 0.0 && lambda2 > 0.0) {
        return Err(Error::InvalidArgument("lambda1 and lambda2 must be positive".into()));
    }

    let norm_m = x.norm();
    let zeros = || DMatrix::<f64>::zeros(rows, cols);
    if norm_m == 0.0 {
        return Ok(Decomposition {
            low_rank: zeros(),
            gaussian: zeros(),
            sparse: zeros(),
            components: DMatrix::zeros(rows, 0),
            singular_values: Vec::new(),
            explained_variance_ratio: Vec::new(),
            method: Method::ExrpcaConvex,
            iterations_used: 1,
            converged: true,
            final_residual: 0.0,
            history: vec![0.0],
            config: Some(cfg.clone()),
        });
    }

    let sign_norm = spectral_norm(&x.map(f64::signum_or_zero))?;
    let mut mu = 0.5 / sign_norm;
    let mut y = x / sign_norm;
    let mut low_rank = zeros();
    let mut gaussian = zeros();
    let mut sparse = zeros();
    let mut history = Vec::new();
    let mut converged = false;
    let mut iteration = 0;

    while iteration < cfg.max_iterations {
        iteration += 1;
        let inv_mu = 1.0 / mu;
        let base = x + &y * inv_mu;

        let (l_new, _) = svt_with_spectrum(&(&base - &gaussian - &sparse), inv_mu)?;
        low_rank = l_new;

        let e_scale = mu / (mu + 2.0 * lambda1);
        let e_new = (&base - &low_rank - &sparse) * e_scale;

        let s_threshold = lambda2 * inv_mu;
        let s_new = (&base - &low_rank - &e_new).map(|v| shrink(v, s_threshold));

        let constraint = x - &low_rank - &e_new - &s_new;
        y += &constraint * mu;

        let change = (&e_new + &s_new - &gaussian - &sparse).norm() / norm_m;
        gaussian = e_new;
        sparse = s_new;

        let residual = constraint.norm() / norm_m;
        if !residual.is_finite() || !mu.is_finite() {
            return Err(Error::Diverged { iteration });
        }
        history.push(residual);
        log::debug!("iteration {iteration}: residual {residual:e}, mu {mu:e}");

        if residual < cfg.residual_tolerance {
            converged = true;
            break;
        }
        if mu.sqrt() * change < cfg.epsilon_mu {
            mu *= cfg.rho;
        }
    }
    if !converged {
        log::warn!("convex solver hit max_iterations ({iteration})");
    }

    let svd = Svd::left(&low_rank)?;
    let top = svd.values.first().copied().unwrap_or(0.0);
    let rank = svd
        .values
        .iter()
        .take_while(|&&s| top > 0.0 && s > EFFECTIVE_RANK_CUTOFF * top)
        .count();
    let mut components = reorthonormalize(&svd.u.columns(0, rank).into_owned());
    fix_signs(&mut components);
    let singular_values = svd.values[..rank].to_vec();
    let total = norm_m * norm_m;
    let explained_variance_ratio = singular_values.iter().map(|s| s * s / total).collect();
    let final_residual = reconstruction_residual(x, &low_rank, &gaussian, &sparse);

    Ok(Decomposition {
        low_rank,
        gaussian,
        sparse,
        components,
        singular_values,
        explained_variance_ratio,
        method: Method::ExrpcaConvex,
        iterations_used: iteration,
        converged,
        final_residual,
        history,
        config: Some(cfg.clone()),
    })
}

trait SignumOrZero {
    fn signum_or_zero(self) -> Self;
}

impl SignumOrZero for f64 {
    fn signum_or_zero(self) -> f64 {
        if self > 0.0 {
            1.0
        } else if self < 0.0 {
            -1.0
        } else {
            0.0
        }
    }
}
