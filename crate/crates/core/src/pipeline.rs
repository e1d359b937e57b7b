//! End-to-end run: difference matrix → decomposition → projection →
//! projected embeddings → evaluation, with a manifest of every artifact.
//!
//! Each artifact is first written under a `.partial` name and renamed once
//! complete, so a failed run leaves the incomplete file behind with that
//! suffix and never a truncated file under the final name.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decompose::{decompose, Method, SolverConfig};
use crate::diffmat::DiffMatrix;
use crate::error::{Error, Result};
use crate::eval::{evaluate, DatasetFormat, EvalReport, Metric, SimilarityDataset, DEFAULT_WINDOW};
use crate::projection::ProjectionMatrix;
use crate::store::{EmbeddingFormat, EmbeddingStore};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "PSEUDOSENSE_OUT";
pub const DEFAULT_OUTPUT_DIR: &str = "pseudosense-out";

pub const MATRIX_FILE: &str = "matrix.bin";
pub const DECOMPOSITION_DIR: &str = "decomposition";
pub const PROJECTION_FILE: &str = "projection.bin";
pub const PROJECTED_FILE: &str = "embeddings.projected.txt";
pub const EVAL_FILE: &str = "eval.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub path: PathBuf,
    pub format: DatasetFormat,
    /// Defaults to avgSim for WS-353 and localSim for SCWS.
    #[serde(default)]
    pub metric: Option<Metric>,
    #[serde(default)]
    pub lowercase: bool,
}

impl DatasetSpec {
    pub fn metric(&self) -> Metric {
        self.metric.unwrap_or(match self.format {
            DatasetFormat::Ws353 => Metric::AvgSim,
            DatasetFormat::Scws => Metric::LocalSim,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub embeddings: PathBuf,
    pub embedding_format: EmbeddingFormat,
    pub output_dir: PathBuf,
    pub method: Method,
    pub solver: SolverConfig,
    /// Number of components projected out.
    pub k: usize,
    pub window: usize,
    pub datasets: Vec<DatasetSpec>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            embeddings: PathBuf::new(),
            embedding_format: EmbeddingFormat::Canonical,
            output_dir: default_output_dir(),
            method: Method::ExrpcaIterative,
            solver: SolverConfig::default(),
            k: 1,
            window: DEFAULT_WINDOW,
            datasets: Vec::new(),
        }
    }
}

/// `$PSEUDOSENSE_OUT`, or `pseudosense-out` in the working directory.
pub fn default_output_dir() -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

impl PipelineConfig {
    /// Checks that every input exists and that `k` is usable.
    pub fn validate(&self) -> Result<()> {
        if !self.embeddings.is_file() {
            return Err(Error::InvalidArgument(format!(
                "embeddings file {} does not exist",
                self.embeddings.display()
            )));
        }
        for d in &self.datasets {
            if !d.path.is_file() {
                return Err(Error::InvalidArgument(format!(
                    "dataset {} does not exist",
                    d.path.display()
                )));
            }
        }
        if self.k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if self.method != Method::ExrpcaConvex && self.k > self.solver.target_rank {
            return Err(Error::InvalidArgument(format!(
                "k = {} exceeds the decomposition rank {}",
                self.k, self.solver.target_rank
            )));
        }
        Ok(())
    }

    /// SHA-256 of the JSON serialisation.
    pub fn hash(&self) -> Result<String> {
        Ok(sha256_hex(&serde_json::to_vec(self)?))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetOutcome {
    pub baseline: EvalReport,
    pub projected: EvalReport,
}

impl DatasetOutcome {
    pub fn improvement(&self) -> f64 {
        self.projected.spearman_x100 - self.baseline.spearman_x100
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub name: String,
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config_sha256: String,
    pub config: PipelineConfig,
    pub artifacts: Vec<ArtifactEntry>,
}

#[derive(Clone, Debug)]
pub struct PipelineOutcome {
    pub manifest: Manifest,
    /// SHA-256 of `manifest.json`.
    pub manifest_sha256: String,
    pub evaluations: Vec<DatasetOutcome>,
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        stage: name,
        cause: Box::new(e),
    })
}

fn partial(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}

/// Runs `write` against `<final>.partial`, then renames it into place.
fn commit<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&Path) -> Result<()>,
{
    let tmp = partial(path);
    if tmp.is_dir() {
        fs::remove_dir_all(&tmp).map_err(Error::at(&tmp))?;
    }
    write(&tmp)?;
    if path.is_dir() {
        fs::remove_dir_all(path).map_err(Error::at(path))?;
    }
    fs::rename(&tmp, path).map_err(Error::at(path))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of a file, or of a directory as the concatenation of
/// `name\0sha256\n` over its files in name order.
fn artifact_hash(path: &Path) -> Result<String> {
    if path.is_dir() {
        let mut names: Vec<_> = fs::read_dir(path)
            .map_err(Error::at(path))?
            .map(|e| e.map(|e| e.file_name()))
            .collect::<std::io::Result<_>>()
            .map_err(Error::at(path))?;
        names.sort();
        let mut listing = Vec::new();
        for n in names {
            listing.extend_from_slice(n.to_string_lossy().as_bytes());
            listing.push(0);
            listing.extend_from_slice(artifact_hash(&path.join(&n))?.as_bytes());
            listing.push(b'\n');
        }
        Ok(sha256_hex(&listing))
    } else {
        Ok(sha256_hex(&fs::read(path).map_err(Error::at(path))?))
    }
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    stage("validate", cfg.validate())?;
    let out = &cfg.output_dir;
    stage("validate", fs::create_dir_all(out).map_err(Error::at(out)))?;

    let store = stage("load", EmbeddingStore::load(&cfg.embeddings, cfg.embedding_format))?;
    let datasets = stage(
        "load",
        cfg.datasets
            .iter()
            .map(|d| SimilarityDataset::load(&d.path, d.format, d.lowercase))
            .collect::<Result<Vec<_>>>(),
    )?;

    let matrix = stage("build-matrix", DiffMatrix::build(&store))?;
    stage("build-matrix", commit(&out.join(MATRIX_FILE), |p| matrix.write(p)))?;

    let dec = stage("decompose", decompose(&matrix, cfg.method, &cfg.solver))?;
    stage("decompose", commit(&out.join(DECOMPOSITION_DIR), |p| dec.write_dir(p)))?;

    let projection = stage(
        "project",
        dec.components_of(cfg.k)
            .and_then(|c| ProjectionMatrix::build_reorthonormalized(&c)),
    )?;
    stage("project", commit(&out.join(PROJECTION_FILE), |p| projection.write(p)))?;
    let projected = stage("project", projection.apply_to_store(&store))?;
    stage("project", commit(&out.join(PROJECTED_FILE), |p| projected.write(p)))?;

    let mut evaluations = Vec::new();
    for (spec, ds) in cfg.datasets.iter().zip(&datasets) {
        let metric = spec.metric();
        let baseline = stage("evaluate", evaluate(&store, ds, metric, cfg.window))?;
        let mut after = stage("evaluate", evaluate(&projected, ds, metric, cfg.window))?;
        after.rank_of_l = Some(dec.num_components());
        log::info!("{} -> {:.1}", baseline.summary(), after.spearman_x100);
        evaluations.push(DatasetOutcome {
            baseline,
            projected: after,
        });
    }
    let eval_json = stage("evaluate", Ok(serde_json::to_vec_pretty(&evaluations)?))?;
    stage(
        "evaluate",
        commit(&out.join(EVAL_FILE), |p| fs::write(p, &eval_json).map_err(Error::at(p))),
    )?;

    let names = [
        ("diff_matrix", MATRIX_FILE),
        ("decomposition", DECOMPOSITION_DIR),
        ("projection", PROJECTION_FILE),
        ("projected_embeddings", PROJECTED_FILE),
        ("eval_reports", EVAL_FILE),
    ];
    let artifacts = stage(
        "manifest",
        names
            .iter()
            .map(|&(name, file)| {
                Ok(ArtifactEntry {
                    name: name.into(),
                    path: file.into(),
                    sha256: artifact_hash(&out.join(file))?,
                })
            })
            .collect::<Result<Vec<_>>>(),
    )?;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").into(),
        config_sha256: stage("manifest", cfg.hash())?,
        config: cfg.clone(),
        artifacts,
    };
    let bytes = stage("manifest", Ok(serde_json::to_vec_pretty(&manifest)?))?;
    stage(
        "manifest",
        commit(&out.join(MANIFEST_FILE), |p| fs::write(p, &bytes).map_err(Error::at(p))),
    )?;
    Ok(PipelineOutcome {
        manifest,
        manifest_sha256: sha256_hex(&bytes),
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_toy_store, ToyStoreSpec};

    fn toy_config(dir: &Path) -> PipelineConfig {
        let mut e = vec![0.0; 8];
        e[0] = 1.0;
        let toy = generate_toy_store(&ToyStoreSpec {
            num_words: 6,
            dimension: 8,
            pseudo_direction: Some(e),
            ..Default::default()
        })
        .unwrap();
        let path = dir.join("toy.txt");
        toy.store.write(&path).unwrap();
        PipelineConfig {
            embeddings: path,
            output_dir: dir.join("out"),
            method: Method::Pca,
            solver: SolverConfig::with_rank(1),
            ..Default::default()
        }
    }

    #[test]
    fn manifest_lists_five_artifacts_and_is_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = toy_config(dir.path());
        let a = run_pipeline(&cfg).unwrap();
        assert_eq!(a.manifest.artifacts.len(), 5);
        for art in &a.manifest.artifacts {
            assert!(cfg.output_dir.join(&art.path).exists());
            assert!(!partial(&cfg.output_dir.join(&art.path)).exists());
        }
        let b = run_pipeline(&cfg).unwrap();
        assert_eq!(a.manifest_sha256, b.manifest_sha256);
    }

    #[test]
    fn stage_errors_are_tagged() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = toy_config(dir.path());
        cfg.k = 2;
        let err = run_pipeline(&cfg).unwrap_err();
        assert!(matches!(err, Error::Stage { stage: "validate", .. }));

        // rank 2 passes validation; the store has rank-1 differences, so
        // PCA still returns two components and the run succeeds
        cfg.solver.target_rank = 2;
        run_pipeline(&cfg).unwrap();

        cfg.embeddings = dir.path().join("missing.txt");
        assert!(run_pipeline(&cfg).is_err());
    }

    #[test]
    fn load_failure_is_tagged() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = toy_config(dir.path());
        fs::write(&cfg.embeddings, "not a header\n").unwrap();
        cfg.output_dir = dir.path().join("fresh");
        let err = run_pipeline(&cfg).unwrap_err();
        assert!(matches!(err, Error::Stage { stage: "load", .. }), "{err}");
        assert!(!cfg.output_dir.join(MANIFEST_FILE).exists());
    }
}
