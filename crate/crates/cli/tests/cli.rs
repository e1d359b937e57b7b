use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_pseudosense"));
    c.env_remove("PSEUDOSENSE_OUT");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    let out = bin().current_dir(dir).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn synth_benchmark(dir: &Path) {
    run(
        dir,
        &[
            "synth", "benchmark", "--words", "30", "--pseudo-axis", "0", "--out-store", "s.txt",
            "--out-dataset", "d.txt",
        ],
    );
}

#[test]
fn stepwise_commands_match_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth_benchmark(dir);
    run(dir, &["build-matrix", "--embeddings", "s.txt", "-o", "m.bin"]);
    run(dir, &["decompose", "--matrix", "m.bin", "--method", "exrpca-iter", "-d", "3", "-o", "dec"]);
    for f in ["components.txt", "low_rank.bin", "gaussian.bin", "sparse.bin", "metadata.json"] {
        assert!(dir.join("dec").join(f).is_file(), "{f}");
    }
    run(dir, &["project", "--embeddings", "s.txt", "--components", "dec", "--k", "1", "-o", "p.txt"]);

    let eval = |emb: &str| {
        let o = run(
            dir,
            &["evaluate", "--embeddings", emb, "--dataset", "d.txt", "--dataset-format", "scws", "--json"],
        );
        let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
        v["spearman_x100"].as_f64().unwrap()
    };
    let (before, after) = (eval("s.txt"), eval("p.txt"));
    assert!(after > before + 10.0, "{before} -> {after}");

    let o = run(
        dir,
        &["run", "--embeddings", "s.txt", "--dataset", "d.txt:scws", "--out", "out", "--method", "exrpca-iter"],
    );
    let line = stdout(&o);
    let cols: Vec<&str> = line.trim().split('\t').collect();
    assert_eq!(cols[1], "localSim");
    assert_eq!(cols[2], format!("{before:.1}"));
    assert_eq!(cols[3], format!("{after:.1}"));
    assert!(dir.join("out/manifest.json").is_file());
}

#[test]
fn sweep_and_analyze() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth_benchmark(dir);
    run(dir, &["build-matrix", "--embeddings", "s.txt", "-o", "m.bin"]);
    run(dir, &["decompose", "--matrix", "m.bin", "--method", "pca", "-d", "2", "-o", "dec"]);
    let o = run(
        dir,
        &[
            "sweep", "--embeddings", "s.txt", "--decomposition", "dec", "--dataset", "d.txt",
            "--dataset-format", "scws", "--ks", "0,1,2",
        ],
    );
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k\tspearman_x100");
    assert_eq!(lines.len(), 4);

    let o = run(
        dir,
        &[
            "analyze", "--matrix", "m.bin", "--decomposition", "dec", "--variance", "--top-pairs", "1",
            "--top-n", "3", "--embeddings", "s.txt", "--noise", "w0_{0,1}", "--neighbors", "w0#1",
        ],
    );
    let text = stdout(&o);
    assert!(text.contains("component\trho_var_x100\tavg_cos\tpairs"));
    assert!(text.contains("pair\tsense\tneighbors\ts_norm"));
    assert!(text.lines().any(|l| l.starts_with("w0#1\t")));
}

#[test]
fn config_file_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth_benchmark(dir);
    std::fs::write(
        dir.join("run.toml"),
        "embeddings = \"s.txt\"\noutput_dir = \"from-file\"\nmethod = \"pca\"\nk = 1\n\n\
         [solver]\ntarget_rank = 2\n\n[[datasets]]\npath = \"d.txt\"\nformat = \"scws\"\n",
    )
    .unwrap();
    run(dir, &["run", "--config", "run.toml", "--out", "from-flag"]);
    assert!(dir.join("from-flag/manifest.json").is_file());
    assert!(!dir.join("from-file").exists());

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("from-flag/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["method"], "pca");
    assert_eq!(manifest["config"]["solver"]["target_rank"], 2);
    assert_eq!(manifest["artifacts"].as_array().unwrap().len(), 5);
}

#[test]
fn output_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth_benchmark(dir);
    let o = bin()
        .current_dir(dir)
        .env("PSEUDOSENSE_OUT", "env-out")
        .args(["run", "--embeddings", "s.txt", "--method", "pca", "-d", "1"])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.join("env-out/manifest.json").is_file());
}

#[test]
fn failures_exit_nonzero_with_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("bad.txt"), "1 3\ncat#0 1.0 2.0\n").unwrap();
    let o = bin()
        .current_dir(dir)
        .args(["run", "--embeddings", "bad.txt", "--out", "out"])
        .output()
        .unwrap();
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("stage load"), "{err}");
    assert!(!dir.join("out/manifest.json").exists());

    let o = bin()
        .current_dir(dir)
        .args(["decompose", "--matrix", "missing.bin", "--method", "nope", "-o", "x"])
        .output()
        .unwrap();
    assert!(!o.status.success());
}

#[test]
fn synth_planted_writes_matrix() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    run(dir, &["synth", "planted", "--rows", "10", "--cols", "20", "--rank", "2", "--mirrored", "-o", "p.bin"]);
    run(dir, &["synth", "store", "--words", "5", "--dim", "6", "-o", "s.txt"]);
    run(dir, &["decompose", "--matrix", "p.bin", "--method", "exrpca-cvx", "-o", "dec"]);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("dec/metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["method"], "exrpca_convex");
}
