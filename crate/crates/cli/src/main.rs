use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser, Subcommand};

use pseudosense::analysis::{
    explained_variance_report, nearest_neighbors, noise_indicator, noise_table,
    rank_pairs_by_component, render_grouped, variance_table,
};
use pseudosense::decompose::{decompose, Decomposition, Method, SolverConfig};
use pseudosense::eval::{dimension_sweep, evaluate, DatasetFormat, Metric, SimilarityDataset, DEFAULT_WINDOW};
use pseudosense::pipeline::{self, run_pipeline, DatasetSpec, PipelineConfig, OUTPUT_DIR_ENV};
use pseudosense::synth::{
    generate_benchmark, generate_planted, generate_toy_store, write_scws, PlantedSpec, ToyStoreSpec,
};
use pseudosense::{DiffMatrix, EmbeddingFormat, EmbeddingStore, PairLabel, ProjectionMatrix};

/// Detect and remove pseudo-sense directions in multi-sense word embeddings.
#[derive(Parser)]
#[command(name = "pseudosense", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stack all same-word sense differences into a matrix dump.
    BuildMatrix {
        #[command(flatten)]
        input: EmbeddingArgs,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Split a difference matrix into low-rank, Gaussian and sparse parts.
    Decompose {
        #[arg(long)]
        matrix: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        /// Output directory for components, L/E/S and metadata.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Remove the first k components from every sense vector.
    Project {
        #[command(flatten)]
        input: EmbeddingArgs,
        /// Decomposition directory written by `decompose`.
        #[arg(long)]
        components: PathBuf,
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// Projected embeddings (canonical format).
        #[arg(long, short)]
        out: PathBuf,
        /// Also dump the projection matrix here.
        #[arg(long)]
        matrix_out: Option<PathBuf>,
    },
    /// Spearman correlation against a word-similarity dataset.
    Evaluate {
        #[command(flatten)]
        input: EmbeddingArgs,
        #[command(flatten)]
        dataset: DatasetArgs,
        #[arg(long)]
        json: bool,
    },
    /// Inspect a decomposition.
    Analyze {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        decomposition: PathBuf,
        /// Embeddings, needed for --noise and --neighbors.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long, default_value = "canonical", value_parser = parse_embedding_format)]
        format: EmbeddingFormat,
        /// Top pairs of this component (1-based).
        #[arg(long)]
        top_pairs: Option<usize>,
        /// Sparse norm and neighbours for a pair, e.g. `prime_{0,1}`.
        #[arg(long)]
        noise: Vec<String>,
        /// Nearest neighbours of a sense, e.g. `prime#0` (original id).
        #[arg(long)]
        neighbors: Vec<String>,
        /// Explained-variance table over all components.
        #[arg(long)]
        variance: bool,
        #[arg(long, default_value_t = 10)]
        top_n: usize,
        #[arg(long)]
        json: bool,
    },
    /// Score after removing k = 0, 1, ... components.
    Sweep {
        #[command(flatten)]
        input: EmbeddingArgs,
        #[arg(long)]
        decomposition: PathBuf,
        #[command(flatten)]
        dataset: DatasetArgs,
        /// Comma-separated list of k.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3")]
        ks: Vec<usize>,
        #[arg(long)]
        json: bool,
    },
    /// Generate synthetic fixtures.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Full pipeline with a manifest; flags override the config file.
    Run(RunArgs),
}

#[derive(Args)]
struct EmbeddingArgs {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long, default_value = "canonical", value_parser = parse_embedding_format)]
    format: EmbeddingFormat,
}

impl EmbeddingArgs {
    fn load(&self) -> Result<EmbeddingStore> {
        EmbeddingStore::load(&self.embeddings, self.format)
            .with_context(|| format!("loading {}", self.embeddings.display()))
    }
}

#[derive(Args)]
struct DatasetArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long = "dataset-format", default_value = "ws353", value_parser = parse_dataset_format)]
    dataset_format: DatasetFormat,
    /// Defaults to avgsim for ws353 and localsim for scws.
    #[arg(long, value_parser = parse_metric)]
    metric: Option<Metric>,
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    window: usize,
    #[arg(long)]
    lowercase: bool,
}

impl DatasetArgs {
    fn spec(&self) -> DatasetSpec {
        DatasetSpec {
            path: self.dataset.clone(),
            format: self.dataset_format,
            metric: self.metric,
            lowercase: self.lowercase,
        }
    }

    fn load(&self) -> Result<SimilarityDataset> {
        SimilarityDataset::load(&self.dataset, self.dataset_format, self.lowercase)
            .with_context(|| format!("loading {}", self.dataset.display()))
    }
}

#[derive(Args, Default)]
struct SolverArgs {
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    /// Target rank d.
    #[arg(long, short = 'd')]
    rank: Option<usize>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl SolverArgs {
    fn apply(&self, cfg: &mut SolverConfig) {
        if let Some(v) = self.rank {
            cfg.target_rank = v;
        }
        if self.lambda1.is_some() {
            cfg.lambda1 = self.lambda1;
        }
        if self.lambda2.is_some() {
            cfg.lambda2 = self.lambda2;
        }
        if let Some(v) = self.max_iter {
            cfg.max_iterations = v;
        }
        if let Some(v) = self.tol {
            cfg.residual_tolerance = v;
        }
        if let Some(v) = self.rho {
            cfg.rho = v;
        }
        if let Some(v) = self.epsilon {
            cfg.epsilon_mu = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
    }
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Planted low-rank + sparse + Gaussian matrix (binary dump).
    Planted {
        #[arg(long, default_value_t = 50)]
        rows: usize,
        #[arg(long, default_value_t = 400)]
        cols: usize,
        #[arg(long, default_value_t = 3)]
        rank: usize,
        #[arg(long, default_value_t = 0.01)]
        density: f64,
        #[arg(long, default_value_t = 0.1)]
        magnitude: f64,
        #[arg(long, default_value_t = 0.01)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Columns come in (c, -c) pairs.
        #[arg(long)]
        mirrored: bool,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Toy multi-sense store (canonical format).
    Store {
        #[command(flatten)]
        toy: ToyArgs,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Toy store with context words plus an SCWS-format benchmark.
    Benchmark {
        #[command(flatten)]
        toy: ToyArgs,
        #[arg(long, default_value_t = 400)]
        pairs: usize,
        #[arg(long)]
        out_store: PathBuf,
        #[arg(long)]
        out_dataset: PathBuf,
    },
}

#[derive(Args)]
struct ToyArgs {
    #[arg(long, default_value_t = 50)]
    words: usize,
    /// Sense counts, cycled over words.
    #[arg(long, value_delimiter = ',', default_value = "2,3")]
    senses: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    dim: usize,
    /// Plant a pseudo direction along this coordinate axis.
    #[arg(long)]
    pseudo_axis: Option<usize>,
    #[arg(long, default_value_t = 3.0)]
    scale: f64,
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ToyArgs {
    fn spec(&self) -> Result<ToyStoreSpec> {
        let pseudo_direction = match self.pseudo_axis {
            Some(i) if i >= self.dim => bail!("--pseudo-axis {i} out of range for --dim {}", self.dim),
            Some(i) => {
                let mut v = vec![0.0; self.dim];
                v[i] = 1.0;
                Some(v)
            }
            None => None,
        };
        Ok(ToyStoreSpec {
            num_words: self.words,
            senses_per_word: self.senses.clone(),
            dimension: self.dim,
            pseudo_direction,
            pseudo_scale: self.scale,
            noise: self.noise,
            seed: self.seed,
        })
    }
}

#[derive(Args)]
struct RunArgs {
    /// TOML file with pipeline settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long, value_parser = parse_embedding_format)]
    format: Option<EmbeddingFormat>,
    #[arg(long, env = OUTPUT_DIR_ENV)]
    out: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    /// `path:format[:metric]`, repeatable; replaces datasets from the file.
    #[arg(long)]
    dataset: Vec<String>,
    #[command(flatten)]
    solver: SolverArgs,
}

fn parse_embedding_format(s: &str) -> Result<EmbeddingFormat, String> {
    s.parse().map_err(|e: pseudosense::Error| e.to_string())
}

fn parse_dataset_format(s: &str) -> Result<DatasetFormat, String> {
    s.parse().map_err(|e: pseudosense::Error| e.to_string())
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse().map_err(|e: pseudosense::Error| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: pseudosense::Error| e.to_string())
}

fn parse_dataset_flag(s: &str) -> Result<DatasetSpec> {
    let bad = || anyhow::anyhow!("--dataset expects path:format[:metric], got {s:?}");
    let (head, last) = s.rsplit_once(':').ok_or_else(bad)?;
    let (path, format, metric) = match last.parse::<Metric>() {
        Ok(m) => {
            let (path, format) = head.rsplit_once(':').ok_or_else(bad)?;
            (path, format, Some(m))
        }
        Err(_) => (head, last, None),
    };
    Ok(DatasetSpec {
        path: path.into(),
        format: format.parse()?,
        metric,
        lowercase: false,
    })
}

fn build_run_config(args: &RunArgs) -> Result<PipelineConfig> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(v) = &args.embeddings {
        cfg.embeddings = v.clone();
    }
    if let Some(v) = args.format {
        cfg.embedding_format = v;
    }
    if let Some(v) = &args.out {
        cfg.output_dir = v.clone();
    }
    if let Some(v) = args.k {
        cfg.k = v;
    }
    if let Some(v) = args.window {
        cfg.window = v;
    }
    if !args.dataset.is_empty() {
        cfg.datasets = args
            .dataset
            .iter()
            .map(|s| parse_dataset_flag(s))
            .collect::<Result<_>>()?;
    }
    if let Some(m) = args.solver.method {
        cfg.method = m;
    }
    args.solver.apply(&mut cfg.solver);
    Ok(cfg)
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn parse_sense(s: &str) -> Result<(String, u64)> {
    let (w, id) = s
        .rsplit_once('#')
        .with_context(|| format!("expected word#id, got {s:?}"))?;
    Ok((w.to_string(), id.parse().with_context(|| format!("bad sense id in {s:?}"))?))
}

fn load_decomposition(dir: &Path) -> Result<Decomposition> {
    Decomposition::read_dir(dir).with_context(|| format!("reading {}", dir.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::BuildMatrix { input, out } => {
            let m = DiffMatrix::build(&input.load()?)?;
            m.write(&out)?;
            eprintln!("{} x {} difference matrix -> {}", m.data().nrows(), m.ncols(), out.display());
        }
        Command::Decompose { matrix, solver, out } => {
            let m = DiffMatrix::read(&matrix).with_context(|| format!("reading {}", matrix.display()))?;
            let mut cfg = SolverConfig::default();
            solver.apply(&mut cfg);
            let method = solver.method.unwrap_or(Method::ExrpcaIterative);
            let dec = decompose(&m, method, &cfg)?;
            dec.write_dir(&out)?;
            eprintln!(
                "{method}: {} components, {} iterations, converged={}, residual={:.3e}",
                dec.num_components(),
                dec.iterations_used,
                dec.converged,
                dec.final_residual
            );
        }
        Command::Project {
            input,
            components,
            k,
            out,
            matrix_out,
        } => {
            let store = input.load()?;
            let dec = load_decomposition(&components)?;
            let t = ProjectionMatrix::build_reorthonormalized(&dec.components_of(k)?)?;
            t.apply_to_store(&store)?.write(&out)?;
            if let Some(p) = matrix_out {
                t.write(p)?;
            }
        }
        Command::Evaluate { input, dataset, json } => {
            let store = input.load()?;
            let ds = dataset.load()?;
            let report = evaluate(&store, &ds, dataset.spec().metric(), dataset.window)?;
            if json {
                print_json(&report)?;
            } else {
                println!("{}", report.summary());
            }
        }
        Command::Analyze {
            matrix,
            decomposition,
            embeddings,
            format,
            top_pairs,
            noise,
            neighbors,
            variance,
            top_n,
            json,
        } => {
            let m = DiffMatrix::read(&matrix).with_context(|| format!("reading {}", matrix.display()))?;
            let dec = load_decomposition(&decomposition)?;
            let store = embeddings
                .as_ref()
                .map(|p| EmbeddingStore::load(p, format).with_context(|| format!("loading {}", p.display())))
                .transpose()?;
            let need_store = || store.as_ref().context("--embeddings is required for this analysis");
            if let Some(c) = top_pairs {
                if c == 0 || c > dec.num_components() {
                    bail!("component {c} outside 1..={}", dec.num_components());
                }
                let ranked = rank_pairs_by_component(&m, dec.components.column(c - 1), top_n)?;
                if json {
                    print_json(&ranked)?;
                } else {
                    for p in &ranked.pairs {
                        println!("{}\t{:.4}", p.label, p.cosine);
                    }
                    println!("grouped\t{}", render_grouped(&ranked.pairs));
                }
            }
            if variance {
                let reports = explained_variance_report(&dec, &m, top_n)?;
                if json {
                    print_json(&reports)?;
                } else {
                    print!("{}", variance_table(&reports));
                }
            }
            if !noise.is_empty() {
                let store = need_store()?;
                let reports = noise
                    .iter()
                    .map(|s| noise_indicator(&dec, &m, store, &s.parse::<PairLabel>()?, top_n))
                    .collect::<pseudosense::Result<Vec<_>>>()?;
                if json {
                    print_json(&reports)?;
                } else {
                    print!("{}", noise_table(&reports));
                }
            }
            for s in &neighbors {
                let store = need_store()?;
                let (w, id) = parse_sense(s)?;
                let dense = store.get_sense_by_original(&w, id)?.sense_id;
                let ns = nearest_neighbors(store, &w, dense, top_n)?;
                if json {
                    print_json(&ns)?;
                } else {
                    for n in ns {
                        println!("{s}\t{}#{}\t{:.4}", n.word, n.sense_id, n.cosine);
                    }
                }
            }
        }
        Command::Sweep {
            input,
            decomposition,
            dataset,
            ks,
            json,
        } => {
            let store = input.load()?;
            let dec = load_decomposition(&decomposition)?;
            let ds = dataset.load()?;
            let points = dimension_sweep(&store, &dec, &ds, &ks, dataset.spec().metric(), dataset.window)?;
            if json {
                print_json(&points)?;
            } else {
                println!("k\tspearman_x100");
                for p in points {
                    println!("{}\t{:.1}", p.k, p.spearman_x100);
                }
            }
        }
        Command::Synth(cmd) => match cmd {
            SynthCommand::Planted {
                rows,
                cols,
                rank,
                density,
                magnitude,
                sigma,
                seed,
                mirrored,
                out,
            } => {
                let inst = generate_planted(&PlantedSpec {
                    rows,
                    cols,
                    rank,
                    sparse_density: density,
                    sparse_magnitude: magnitude,
                    sigma,
                    seed,
                    mirrored,
                })?;
                inst.to_diff_matrix(mirrored)?.write(&out)?;
                eprintln!("{} planted sparse entries", inst.true_sparse_support.len());
            }
            SynthCommand::Store { toy, out } => {
                generate_toy_store(&toy.spec()?)?.store.write(&out)?;
            }
            SynthCommand::Benchmark {
                toy,
                pairs,
                out_store,
                out_dataset,
            } => {
                let t = generate_toy_store(&toy.spec()?)?;
                let bench = generate_benchmark(&t, pairs, toy.seed.wrapping_add(1))?;
                bench.store.write(&out_store)?;
                write_scws(&bench.dataset, &out_dataset)?;
            }
        },
        Command::Run(args) => {
            let cfg = build_run_config(&args)?;
            let outcome = run_pipeline(&cfg)?;
            for e in &outcome.evaluations {
                println!(
                    "{}\t{}\t{:.1}\t{:.1}\t{:+.1}",
                    e.baseline.dataset,
                    e.baseline.metric,
                    e.baseline.spearman_x100,
                    e.projected.spearman_x100,
                    e.improvement()
                );
            }
            eprintln!(
                "manifest {} ({})",
                cfg.output_dir.join(pipeline::MANIFEST_FILE).display(),
                outcome.manifest_sha256
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
