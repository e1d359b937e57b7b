//! Synthetic fixtures with known ground truth.
//!
//! All randomness comes from [`PortableRng`], whose output is fully specified
//! so that other implementations can regenerate the same fixtures:
//!
//! * stream: ChaCha20 (RFC 7539 block function, 20 rounds) keyed with the
//!   32-byte seed `seed.to_le_bytes() ++ [0; 24]`, nonce and counter zero;
//!   `next_u64` joins two consecutive 32-bit output words, low word first;
//! * uniform `[0, 1)`: `(next_u64 >> 11) * 2^-53`;
//! * standard normal: Box-Muller on `u1 = 1 - uniform`, `u2 = uniform`,
//!   yielding `sqrt(-2 ln u1) cos(2π u2)` and then `sqrt(-2 ln u1) sin(2π u2)`.

use std::collections::{BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::diffmat::{DiffMatrix, PairLabel};
use crate::error::{Error, Result};
use crate::eval::{cosine, Context, SimilarityDataset, SimilarityPair};
use crate::store::{EmbeddingStore, SenseRecord};

pub struct PortableRng {
    inner: ChaCha20Rng,
    spare_normal: Option<f64>,
}

impl PortableRng {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        PortableRng {
            inner: ChaCha20Rng::from_seed(key),
            spare_normal: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n.saturating_sub(1))
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn normal_matrix(&mut self, rows: usize, cols: usize, sigma: f64) -> DMatrix<f64> {
        // column-major fill order
        let mut m = DMatrix::zeros(rows, cols);
        for v in m.iter_mut() {
            *v = sigma * self.normal();
        }
        m
    }

    pub fn sign(&mut self) -> f64 {
        if self.uniform() < 0.5 {
            -1.0
        } else {
            1.0
        }
    }
}

/// Random `dim x k` matrix with orthonormal columns (QR of a Gaussian matrix).
pub fn random_orthonormal(rng: &mut PortableRng, dim: usize, k: usize) -> DMatrix<f64> {
    let g = rng.normal_matrix(dim, k, 1.0);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for (j, mut col) in q.column_iter_mut().enumerate() {
        if r[(j, j)] < 0.0 {
            col.neg_mut();
        }
    }
    q
}

/// Parameters of a planted `L* + S* + E*` instance.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantedSpec {
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub sparse_density: f64,
    pub sparse_magnitude: f64,
    pub sigma: f64,
    pub seed: u64,
    /// Store columns as `(c, -c)` pairs, like a difference matrix.
    pub mirrored: bool,
}

impl PlantedSpec {
    /// The reference benchmark: 50 x 400, rank 3, 1% sparse entries at 10σ,
    /// σ = 0.01.
    pub fn reference(seed: u64) -> Self {
        PlantedSpec {
            rows: 50,
            cols: 400,
            rank: 3,
            sparse_density: 0.01,
            sparse_magnitude: 0.1,
            sigma: 0.01,
            seed,
            mirrored: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlantedInstance {
    pub matrix: DMatrix<f64>,
    pub low_rank: DMatrix<f64>,
    pub sparse: DMatrix<f64>,
    pub noise: DMatrix<f64>,
    /// `rows x rank`, orthonormal columns.
    pub true_subspace: DMatrix<f64>,
    /// `(row, col)` of every planted sparse entry.
    pub true_sparse_support: BTreeSet<(usize, usize)>,
    pub sigma: f64,
    pub seed: u64,
}

/// Generates `M = U C + S* + E*`: `U` a random orthonormal basis, `C` normal
/// coefficients with row `i` of standard deviation `rank - i`, `S*` entries `±magnitude` placed independently with
/// probability `density`, `E*` i.i.d. `N(0, σ²)`.
pub fn generate_planted(spec: &PlantedSpec) -> Result<PlantedInstance> {
    let &PlantedSpec {
        rows,
        cols,
        rank,
        sparse_density,
        sparse_magnitude,
        sigma,
        seed,
        mirrored,
    } = spec;
    if rank >= rows.min(cols) {
        return Err(Error::InvalidArgument(format!(
            "rank {rank} must be below min({rows}, {cols})"
        )));
    }
    if !(0.0..1.0).contains(&sparse_density) {
        return Err(Error::InvalidArgument("density must lie in [0, 1)".into()));
    }
    if !(sparse_magnitude > 0.0) || !(sigma >= 0.0) {
        return Err(Error::InvalidArgument("magnitude must be > 0 and sigma >= 0".into()));
    }
    if mirrored && cols % 2 != 0 {
        return Err(Error::InvalidArgument("mirrored instances need an even column count".into()));
    }

    let mut rng = PortableRng::new(seed);
    let base_cols = if mirrored { cols / 2 } else { cols };
    let basis = random_orthonormal(&mut rng, rows, rank);
    // row i scaled by rank - i so that the planted directions carry distinct
    // energy and are individually identifiable, not just their span
    let mut coeffs = rng.normal_matrix(rank, base_cols, 1.0);
    for (i, mut row) in coeffs.row_iter_mut().enumerate() {
        row *= (rank - i) as f64;
    }
    let low = &basis * coeffs;
    let mut sparse = DMatrix::zeros(rows, base_cols);
    for v in sparse.iter_mut() {
        if rng.uniform() < sparse_density {
            *v = rng.sign() * sparse_magnitude;
        }
    }
    let noise = rng.normal_matrix(rows, base_cols, sigma);

    let mirror = |m: DMatrix<f64>| -> DMatrix<f64> {
        if !mirrored {
            return m;
        }
        DMatrix::from_fn(rows, cols, |i, j| {
            let v = m[(i, j / 2)];
            if j % 2 == 0 {
                v
            } else {
                -v
            }
        })
    };
    let low = mirror(low);
    let sparse = mirror(sparse);
    let noise = mirror(noise);
    let support = sparse
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(idx, _)| (idx % rows, idx / rows))
        .collect();

    Ok(PlantedInstance {
        matrix: &low + &sparse + &noise,
        low_rank: low,
        sparse,
        noise,
        true_subspace: basis,
        true_sparse_support: support,
        sigma,
        seed,
    })
}

impl PlantedInstance {
    /// Wraps the matrix with synthetic labels. Mirrored columns `2j, 2j+1` get
    /// `(pj, 0, 1)` and `(pj, 1, 0)`; otherwise column `j` is `(cj, 0, 1)`.
    pub fn to_diff_matrix(&self, mirrored: bool) -> Result<DiffMatrix> {
        let labels = (0..self.matrix.ncols())
            .map(|j| {
                if mirrored {
                    let (a, b) = if j % 2 == 0 { (0, 1) } else { (1, 0) };
                    PairLabel::new(format!("p{}", j / 2), a, b)
                } else {
                    PairLabel::new(format!("c{j}"), 0, 1)
                }
            })
            .collect();
        DiffMatrix::from_parts(self.matrix.clone(), labels)
    }
}

/// Parameters of a toy multi-sense store.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyStoreSpec {
    pub num_words: usize,
    /// Sense counts, cycled over the words.
    pub senses_per_word: Vec<usize>,
    pub dimension: usize,
    /// When set, senses of a word differ by multiples of this direction
    /// (normalised) plus `noise`.
    pub pseudo_direction: Option<Vec<f64>>,
    /// Sense offsets along the pseudo direction are uniform in `±pseudo_scale`.
    pub pseudo_scale: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for ToyStoreSpec {
    fn default() -> Self {
        ToyStoreSpec {
            num_words: 50,
            senses_per_word: vec![2, 3],
            dimension: 20,
            pseudo_direction: None,
            pseudo_scale: 3.0,
            noise: 0.01,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ToyStore {
    pub store: EmbeddingStore,
    /// Per-word meaning vector; orthogonal to the pseudo direction if any.
    pub base: HashMap<String, Vec<f64>>,
    /// Every same-word sense pair `(a, b)` with `a < b` that differs only by
    /// the pseudo direction and noise.
    pub pseudo_pairs: Vec<PairLabel>,
}

/// Builds a store of words `w0, w1, ...`. Each word gets a standard normal
/// base vector; each sense is `base + c_s p + noise` with `c_s` uniform in
/// `±pseudo_scale` when a pseudo direction `p` is given, otherwise
/// `base + N(0, I)` (genuinely different senses). Every sense carries a
/// random cluster centre orthogonal to `p`.
pub fn generate_toy_store(spec: &ToyStoreSpec) -> Result<ToyStore> {
    if spec.dimension == 0 || spec.senses_per_word.is_empty() || spec.senses_per_word.contains(&0) {
        return Err(Error::InvalidArgument("invalid toy store shape".into()));
    }
    if !(spec.noise >= 0.0) || !(spec.pseudo_scale >= 0.0) {
        return Err(Error::InvalidArgument("noise and pseudo_scale must be >= 0".into()));
    }
    let dim = spec.dimension;
    let direction = match &spec.pseudo_direction {
        Some(p) => {
            if p.len() != dim {
                return Err(Error::InvalidArgument("pseudo direction has wrong dimension".into()));
            }
            let v = DVector::from_column_slice(p);
            let n = v.norm();
            if !(n > 0.0) {
                return Err(Error::InvalidArgument("pseudo direction must be nonzero".into()));
            }
            Some(v / n)
        }
        None => None,
    };
    let orthogonal = |v: DVector<f64>| match &direction {
        Some(p) => &v - p * p.dot(&v),
        None => v,
    };

    let mut rng = PortableRng::new(spec.seed);
    let mut records = Vec::new();
    let mut base = HashMap::new();
    let mut pseudo_pairs = Vec::new();
    for w in 0..spec.num_words {
        let word = format!("w{w}");
        let n = spec.senses_per_word[w % spec.senses_per_word.len()];
        let b = orthogonal(DVector::from_fn(dim, |_, _| rng.normal()));
        for s in 0..n {
            let offset = match &direction {
                Some(p) => p * ((2.0 * rng.uniform() - 1.0) * spec.pseudo_scale),
                None => DVector::from_fn(dim, |_, _| rng.normal()),
            };
            let noise = DVector::from_fn(dim, |_, _| spec.noise * rng.normal());
            let v = &b + offset + noise;
            let center = orthogonal(DVector::from_fn(dim, |_, _| rng.normal()));
            records.push(
                SenseRecord::new(word.clone(), s as u64, v.iter().copied().collect())
                    .with_center(center.iter().copied().collect()),
            );
        }
        if direction.is_some() {
            for a in 0..n as u64 {
                for c in a + 1..n as u64 {
                    pseudo_pairs.push(PairLabel::new(word.clone(), a, c));
                }
            }
        }
        base.insert(word, b.iter().copied().collect());
    }
    Ok(ToyStore {
        store: EmbeddingStore::from_records(dim, records)?,
        base,
        pseudo_pairs,
    })
}

/// A contextual similarity benchmark built over a toy store.
#[derive(Clone, Debug)]
pub struct SyntheticBenchmark {
    /// The toy store plus one single-sense context word per sense, whose
    /// global vector equals that sense's cluster centre.
    pub store: EmbeddingStore,
    pub dataset: SimilarityDataset,
}

/// Random cross-word pairs with contexts that point at a specific sense of
/// each target. Gold scores depend only on the words' base vectors, so all
/// pseudo senses of a word are treated as identical.
pub fn generate_benchmark(toy: &ToyStore, num_pairs: usize, seed: u64) -> Result<SyntheticBenchmark> {
    let store = &toy.store;
    let words = store.words();
    if words.len() < 2 {
        return Err(Error::InvalidArgument("need at least two words".into()));
    }
    let ctx_word = |w: &str, s: u64| format!("ctx_{w}_{s}");

    let mut records: Vec<SenseRecord> = store
        .senses()
        .iter()
        .map(|s| {
            let mut r = SenseRecord::new(s.word.clone(), s.original_id, s.vector.clone());
            r.cluster_center = s.cluster_center.clone();
            r
        })
        .collect();
    let mut globals = Vec::new();
    for s in store.senses() {
        let center = s
            .cluster_center
            .clone()
            .ok_or_else(|| Error::InvalidArgument("toy senses need cluster centres".into()))?;
        let name = ctx_word(&s.word, s.original_id);
        records.push(SenseRecord::new(name.clone(), 0, center.clone()));
        globals.push((name, center));
    }
    let mut augmented = EmbeddingStore::from_records(store.dimension(), records)?;
    for (w, g) in globals {
        augmented.set_global(&w, g)?;
    }

    let mut rng = PortableRng::new(seed);
    let mut pairs = Vec::with_capacity(num_pairs);
    let context = |w: &str, s: u64| {
        let c = ctx_word(w, s);
        Context {
            tokens: vec![c.clone(), c.clone(), w.to_string(), c.clone(), c],
            target: 2,
        }
    };
    while pairs.len() < num_pairs {
        let i = rng.below(words.len());
        let j = rng.below(words.len());
        if i == j {
            continue;
        }
        let (w1, w2) = (&words[i], &words[j]);
        let s1 = rng.below(store.sense_count(w1).unwrap_or(1)) as u64;
        let s2 = rng.below(store.sense_count(w2).unwrap_or(1)) as u64;
        let gold = 5.0 * (1.0 + cosine(&toy.base[w1], &toy.base[w2]));
        pairs.push(SimilarityPair {
            word1: w1.clone(),
            word2: w2.clone(),
            context1: Some(context(w1, s1)),
            context2: Some(context(w2, s2)),
            gold,
        });
    }
    Ok(SyntheticBenchmark {
        store: augmented,
        dataset: SimilarityDataset {
            name: "synthetic".into(),
            pairs,
        },
    })
}

/// Writes a dataset in the tab-separated SCWS layout.
pub fn write_scws(ds: &SimilarityDataset, path: impl AsRef<std::path::Path>) -> Result<()> {
    use std::fmt::Write as _;
    let mut out = String::new();
    let mark = |c: &Option<Context>| -> Result<String> {
        let c = c
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("SCWS output needs contexts".into()))?;
        Ok(c.tokens
            .iter()
            .enumerate()
            .map(|(i, t)| if i == c.target { format!("<b> {t} </b>") } else { t.clone() })
            .collect::<Vec<_>>()
            .join(" "))
    };
    for (i, p) in ds.pairs.iter().enumerate() {
        let _ = writeln!(
            out,
            "{}\t{}\tn\t{}\tn\t{}\t{}\t{}",
            i + 1,
            p.word1,
            p.word2,
            mark(&p.context1)?,
            mark(&p.context2)?,
            p.gold
        );
    }
    let path = path.as_ref();
    std::fs::write(path, out).map_err(Error::at(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rng_is_deterministic() {
        let mut a = PortableRng::new(42);
        let mut b = PortableRng::new(42);
        for _ in 0..100 {
            assert_eq!(a.normal().to_bits(), b.normal().to_bits());
        }
        assert_ne!(PortableRng::new(1).next_u64(), PortableRng::new(2).next_u64());
    }

    #[test]
    fn uniform_range() {
        let mut r = PortableRng::new(7);
        for _ in 0..10_000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
            assert!(r.below(3) < 3);
        }
    }

    #[test]
    fn orthonormal_basis() {
        let mut r = PortableRng::new(3);
        let q = random_orthonormal(&mut r, 10, 4);
        let g = q.tr_mul(&q);
        assert!((g - DMatrix::identity(4, 4)).amax() < 1e-12);
    }

    #[test]
    fn planted_rejects_bad_params() {
        let ok = PlantedSpec::reference(0);
        for bad in [
            PlantedSpec { rank: 50, ..ok.clone() },
            PlantedSpec { sparse_density: 1.0, ..ok.clone() },
            PlantedSpec { sparse_magnitude: 0.0, ..ok.clone() },
            PlantedSpec { sigma: -1.0, ..ok.clone() },
            PlantedSpec { cols: 401, mirrored: true, ..ok.clone() },
        ] {
            assert!(generate_planted(&bad).is_err());
        }
    }

    #[test]
    fn mirrored_planted_is_antisymmetric() {
        let spec = PlantedSpec { mirrored: true, ..PlantedSpec::reference(5) };
        let inst = generate_planted(&spec).unwrap();
        for j in (0..spec.cols).step_by(2) {
            assert_eq!(inst.matrix.column(j), -inst.matrix.column(j + 1));
        }
        let m = inst.to_diff_matrix(true).unwrap();
        assert_eq!(m.twin_of(0).unwrap(), 1);
    }

    #[test]
    fn toy_store_shapes() {
        let toy = generate_toy_store(&ToyStoreSpec {
            num_words: 4,
            senses_per_word: vec![1, 2],
            pseudo_direction: Some(vec![1.0; 20]),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(toy.store.len(), 6);
        assert_eq!(toy.pseudo_pairs.len(), 2);
        assert!(toy.store.senses().iter().all(|s| s.cluster_center.is_some()));
    }

    #[test]
    fn benchmark_round_trips_through_scws() {
        let toy = generate_toy_store(&ToyStoreSpec { num_words: 5, ..Default::default() }).unwrap();
        let bench = generate_benchmark(&toy, 20, 1).unwrap();
        assert_eq!(bench.dataset.pairs.len(), 20);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("synthetic.txt");
        write_scws(&bench.dataset, &path).unwrap();
        let back = crate::eval::load_scws(&path).unwrap();
        assert_eq!(back.pairs, bench.dataset.pairs);
    }
}
