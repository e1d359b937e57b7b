//! Orthogonal projection that removes a pseudo-sense subspace.
//!
//! Given orthonormal `α_1..α_k` spanning `W`, the map `T = I - Σ α_i α_iᵀ`
//! sends every `α_i` to zero and fixes every vector orthogonal to `W`. It is
//! the only linear map with both properties, symmetric and idempotent.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::decompose::reorthonormalize;
use crate::diffmat::PairLabel;
use crate::dump;
use crate::error::{Error, Result};
use crate::store::EmbeddingStore;

/// Maximum allowed deviation of the Gram matrix from the identity.
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionMatrix {
    data: DMatrix<f64>,
    /// `D x k`, the annihilated directions as columns.
    basis: DMatrix<f64>,
}

impl ProjectionMatrix {
    /// Builds `T` from `k >= 1` orthonormal vectors of a common dimension
    /// `D > k`.
    pub fn build(components: &[DVector<f64>]) -> Result<Self> {
        let k = components.len();
        if k == 0 {
            return Err(Error::InvalidArgument(
                "at least one component is required".into(),
            ));
        }
        let dim = components[0].len();
        if components.iter().any(|c| c.len() != dim) {
            return Err(Error::InvalidArgument("components differ in dimension".into()));
        }
        if k >= dim {
            return Err(Error::InvalidArgument(format!(
                "{k} components leave nothing of a {dim}-dimensional space"
            )));
        }
        let basis = DMatrix::from_columns(components);
        let gram = basis.tr_mul(&basis);
        let deviation = (gram - DMatrix::identity(k, k)).amax();
        if !(deviation <= ORTHONORMAL_TOLERANCE) {
            return Err(Error::NotOrthonormal { deviation });
        }
        let mut data = DMatrix::identity(dim, dim);
        data.gemm(-1.0, &basis, &basis.transpose(), 1.0);
        Ok(ProjectionMatrix { data, basis })
    }

    /// Like [`build`](Self::build) but first re-orthonormalises the inputs with
    /// a thin QR. Intended for solver output that is orthonormal only to the
    /// solver's tolerance.
    pub fn build_reorthonormalized(components: &[DVector<f64>]) -> Result<Self> {
        if components.is_empty() {
            return Self::build(components);
        }
        let q = reorthonormalize(&DMatrix::from_columns(components));
        let cols: Vec<_> = q.column_iter().map(|c| c.into_owned()).collect();
        Self::build(&cols)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn dimension(&self) -> usize {
        self.data.nrows()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(v);
        (&self.data * x).iter().copied().collect()
    }

    /// Projects every sense vector of `store`. Cluster centres and global
    /// vectors are left as they are.
    pub fn apply_to_store(&self, store: &EmbeddingStore) -> Result<EmbeddingStore> {
        if store.dimension() != self.dimension() {
            return Err(Error::DimensionMismatch {
                line: 0,
                expected: self.dimension(),
                found: store.dimension(),
            });
        }
        store.map_sense_vectors(|v| self.apply(v))
    }

    /// Writes `T` in the binary matrix dump format.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        dump::write_matrix(path, &self.data, &[])
    }

    /// Reads a dumped `T`; the basis is recovered from its null space.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let (data, _) = dump::read_matrix(path)?;
        if data.nrows() != data.ncols() {
            return Err(Error::InvalidArgument("projection matrix must be square".into()));
        }
        let eig = data.clone().symmetric_eigen();
        let cols: Vec<_> = eig
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, &v)| v.abs() < 0.5)
            .map(|(i, _)| eig.eigenvectors.column(i).into_owned())
            .collect();
        let basis = if cols.is_empty() {
            DMatrix::zeros(data.nrows(), 0)
        } else {
            DMatrix::from_columns(&cols)
        };
        Ok(ProjectionMatrix { data, basis })
    }

    /// A `D x D` identity map, for baselines.
    pub fn identity(dim: usize) -> Self {
        ProjectionMatrix {
            data: DMatrix::identity(dim, dim),
            basis: DMatrix::zeros(dim, 0),
        }
    }
}

/// Euclidean distance between two senses of a word before and after a
/// transformation. Senses are named by original id.
pub fn pseudo_sense_distance(
    before: &EmbeddingStore,
    after: &EmbeddingStore,
    pair: &PairLabel,
) -> Result<(f64, f64)> {
    let dist = |store: &EmbeddingStore| -> Result<f64> {
        let a = store
            .get_sense_by_original(&pair.word, pair.sense_a)
            .map_err(|_| Error::PairNotFound(pair.to_string()))?;
        let b = store
            .get_sense_by_original(&pair.word, pair.sense_b)
            .map_err(|_| Error::PairNotFound(pair.to_string()))?;
        Ok(a.vector
            .iter()
            .zip(&b.vector)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt())
    };
    Ok((dist(before)?, dist(after)?))
}
