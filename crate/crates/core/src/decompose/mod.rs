//! Low-rank / Gaussian / sparse decompositions of a difference matrix.
//!
//! Three solvers share the [`Decomposition`] output type:
//!
//! * [`pca_decompose`] -- `M = L + E` with `rank(L) = d`.
//! * [`exrpca_iterative`] -- repeated PCA that peels entries outside the
//!   three-sigma band of the residual into a sparse term, `M = L + E + S` with
//!   `rank(L) = d` fixed.
//! * [`exrpca_convex`] -- inexact augmented Lagrangian on
//!   `||L||_* + lambda1 ||E||_F^2 + lambda2 ||S||_1` subject to `M = L + E + S`.
//!   The rank of `L` is an output, not an input.

mod convex;
mod iterative;
mod ops;
mod pca;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use convex::exrpca_convex;
pub use iterative::{estimate_sigma, exrpca_iterative, three_sigma_mask};
pub use ops::{singular_value_threshold, soft_threshold};
pub use pca::pca_decompose;

pub(crate) use ops::reorthonormalize;

use crate::diffmat::DiffMatrix;
use crate::dump;
use crate::error::{Error, Result};
use crate::store::{EmbeddingStore, SenseRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Pca,
    ExrpcaIterative,
    ExrpcaConvex,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pca" => Ok(Method::Pca),
            "exrpca-iter" | "exrpca_iterative" => Ok(Method::ExrpcaIterative),
            "exrpca-cvx" | "exrpca_convex" => Ok(Method::ExrpcaConvex),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Pca => "pca",
            Method::ExrpcaIterative => "exrpca-iter",
            Method::ExrpcaConvex => "exrpca-cvx",
        })
    }
}

/// Solver parameters.
///
/// `lambda1`/`lambda2` left as `None` resolve to `1 / sqrt(max(D, N))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub target_rank: usize,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub max_iterations: usize,
    pub residual_tolerance: f64,
    pub rho: f64,
    pub epsilon_mu: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            target_rank: 3,
            lambda1: None,
            lambda2: None,
            max_iterations: 100,
            residual_tolerance: 1e-7,
            rho: 6.0,
            epsilon_mu: 1e-2,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn with_rank(target_rank: usize) -> Self {
        SolverConfig {
            target_rank,
            ..Default::default()
        }
    }

    /// `(lambda1, lambda2)` for a `rows x cols` input.
    pub fn lambdas(&self, rows: usize, cols: usize) -> (f64, f64) {
        let default = 1.0 / (rows.max(cols).max(1) as f64).sqrt();
        let l2 = self.lambda2.unwrap_or(default);
        (self.lambda1.unwrap_or(l2), l2)
    }

    pub(crate) fn validate_common(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be positive".into()));
        }
        if !(self.residual_tolerance > 0.0) {
            return Err(Error::InvalidArgument("residual_tolerance must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn check_rank(&self, rows: usize, cols: usize) -> Result<()> {
        check_rank(self.target_rank, rows, cols)
    }
}

pub(crate) fn check_rank(d: usize, rows: usize, cols: usize) -> Result<()> {
    if cols == 0 {
        return Err(Error::InvalidArgument("matrix has no columns".into()));
    }
    if d == 0 || d > rows.min(cols) {
        return Err(Error::InvalidArgument(format!(
            "rank {d} outside 1..={}",
            rows.min(cols)
        )));
    }
    Ok(())
}

/// Result of any solver: `M = L + E + S` plus the principal directions of `L`.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub low_rank: DMatrix<f64>,
    pub gaussian: DMatrix<f64>,
    pub sparse: DMatrix<f64>,
    /// `D x d`, orthonormal columns, largest-magnitude entry of each positive.
    pub components: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    pub method: Method,
    pub iterations_used: usize,
    pub converged: bool,
    /// `||M - L - E - S||_F / ||M||_F` at return.
    pub final_residual: f64,
    /// Per-iteration diagnostic: relative constraint residual for the convex
    /// solver, number of newly masked entries for the iterative one.
    pub history: Vec<f64>,
    pub config: Option<SolverConfig>,
}

impl Decomposition {
    pub fn num_components(&self) -> usize {
        self.components.ncols()
    }

    /// The first `k` components as vectors.
    pub fn components_of(&self, k: usize) -> Result<Vec<DVector<f64>>> {
        if k == 0 || k > self.num_components() {
            return Err(Error::InvalidArgument(format!(
                "requested {k} components, {} available",
                self.num_components()
            )));
        }
        Ok((0..k).map(|j| self.components.column(j).into_owned()).collect())
    }

    /// Number of nonzero entries in the sparse term.
    /// `‖S‖_0`.
    pub fn sparse_count(&self) -> usize {
        self.sparse.iter().filter(|&&v| v != 0.0).count()
    }

    /// `(row, col)` of every nonzero entry of `S`.
    pub fn sparse_support(&self) -> BTreeSet<(usize, usize)> {
        let rows = self.sparse.nrows();
        self.sparse
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(idx, _)| (idx % rows, idx / rows))
            .collect()
    }

    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(Error::at(dir))?;
        components_store(&self.components)?.write(dir.join(COMPONENTS_FILE))?;
        dump::write_matrix(dir.join(LOW_RANK_FILE), &self.low_rank, &[])?;
        dump::write_matrix(dir.join(GAUSSIAN_FILE), &self.gaussian, &[])?;
        dump::write_matrix(dir.join(SPARSE_FILE), &self.sparse, &[])?;
        let meta = Metadata {
            method: self.method,
            config: self.config.clone(),
            iterations_used: self.iterations_used,
            converged: self.converged,
            final_residual: self.final_residual,
            singular_values: self.singular_values.clone(),
            explained_variance_ratio: self.explained_variance_ratio.clone(),
            history: self.history.clone(),
        };
        let path = dir.join(METADATA_FILE);
        fs::write(&path, serde_json::to_string_pretty(&meta)? + "\n").map_err(Error::at(&path))?;
        Ok(())
    }

    pub fn read_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join(METADATA_FILE);
        let text = fs::read_to_string(&path).map_err(Error::at(&path))?;
        let meta: Metadata = serde_json::from_str(&text)?;
        let components = read_components(dir)?;
        let (low_rank, _) = dump::read_matrix(dir.join(LOW_RANK_FILE))?;
        let (gaussian, _) = dump::read_matrix(dir.join(GAUSSIAN_FILE))?;
        let (sparse, _) = dump::read_matrix(dir.join(SPARSE_FILE))?;
        Ok(Decomposition {
            low_rank,
            gaussian,
            sparse,
            components,
            singular_values: meta.singular_values,
            explained_variance_ratio: meta.explained_variance_ratio,
            method: meta.method,
            iterations_used: meta.iterations_used,
            converged: meta.converged,
            final_residual: meta.final_residual,
            history: meta.history,
            config: meta.config,
        })
    }
}

pub const COMPONENTS_FILE: &str = "components.txt";
pub const LOW_RANK_FILE: &str = "low_rank.bin";
pub const GAUSSIAN_FILE: &str = "gaussian.bin";
pub const SPARSE_FILE: &str = "sparse.bin";
pub const METADATA_FILE: &str = "metadata.json";

const COMPONENT_WORD: &str = "component";

#[derive(Serialize, Deserialize)]
struct Metadata {
    method: Method,
    config: Option<SolverConfig>,
    iterations_used: usize,
    converged: bool,
    final_residual: f64,
    singular_values: Vec<f64>,
    explained_variance_ratio: Vec<f64>,
    history: Vec<f64>,
}

fn components_store(components: &DMatrix<f64>) -> Result<EmbeddingStore> {
    EmbeddingStore::from_records(
        components.nrows(),
        components
            .column_iter()
            .enumerate()
            .map(|(j, c)| SenseRecord::new(COMPONENT_WORD, j as u64, c.iter().copied().collect())),
    )
}

/// Reads only the component vectors of a decomposition directory.
pub fn read_components(dir: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let store = EmbeddingStore::load(
        dir.as_ref().join(COMPONENTS_FILE),
        crate::store::EmbeddingFormat::Canonical,
    )?;
    let d = store.dimension();
    let senses = if store.is_empty() {
        &[][..]
    } else {
        store.senses_of(COMPONENT_WORD)?
    };
    let mut m = DMatrix::zeros(d, senses.len());
    for (j, s) in senses.iter().enumerate() {
        m.column_mut(j).copy_from_slice(&s.vector);
    }
    Ok(m)
}

/// Relative reconstruction residual `||M - L - E - S||_F / ||M||_F`
/// (absolute when `M = 0`).
pub(crate) fn reconstruction_residual(
    m: &DMatrix<f64>,
    l: &DMatrix<f64>,
    e: &DMatrix<f64>,
    s: &DMatrix<f64>,
) -> f64 {
    let r = (m - l - e - s).norm();
    let n = m.norm();
    if n > 0.0 {
        r / n
    } else {
        r
    }
}

/// Dispatches to the solver named by `method`.
pub fn decompose(m: &DiffMatrix, method: Method, cfg: &SolverConfig) -> Result<Decomposition> {
    match method {
        Method::Pca => pca_decompose(m, cfg.target_rank),
        Method::ExrpcaIterative => exrpca_iterative(m, cfg),
        Method::ExrpcaConvex => exrpca_convex(m, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_lambdas() {
        let cfg = SolverConfig::default();
        let (l1, l2) = cfg.lambdas(50, 400);
        assert_eq!(l2, 0.05);
        assert_eq!(l1, l2);
        let cfg = SolverConfig {
            lambda1: Some(2.0),
            ..Default::default()
        };
        assert_eq!(cfg.lambdas(4, 1), (2.0, 0.5));
    }

    #[test]
    fn method_names() {
        for m in [Method::Pca, Method::ExrpcaIterative, Method::ExrpcaConvex] {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("rpca".parse::<Method>().is_err());
    }

    #[test]
    fn rank_bounds() {
        assert!(check_rank(0, 3, 3).is_err());
        assert!(check_rank(4, 3, 10).is_err());
        assert!(check_rank(1, 3, 0).is_err());
        assert!(check_rank(3, 3, 10).is_ok());
    }
}
