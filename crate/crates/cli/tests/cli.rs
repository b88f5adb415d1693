use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cltlab_core::processes::TrajectoryBatch;
use sha2::{Digest, Sha256};

const DAVYDOV: &str = r#"
[cli]
seed = 7

[processes]
p_moment = 2.5
[processes.model]
family = "davydov_chain"
a_rule = { kind = "schedule", p = 2.5, eps = 0.1 }
functional = { kind = "f1" }
state_cap = 4096

[experiments]
n_grid = [64, 128, 256]
replicates = 500
"#;

const PARETO: &str = r#"
[cli]
seed = 11

[processes]
p_moment = 2.5
[processes.model]
family = "iid_baseline"
law = { kind = "symmetric_pareto" }

[experiments]
n_grid = [4, 8, 16, 32]
replicates = 1000
r_list = [0.5, 1.0]
target = "sigma_n2"
bootstrap = 20
calibration_reps = 10
"#;

fn cltlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cltlab")).current_dir(dir).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

fn listing(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(listing(&p));
        }
        out.push(p);
    }
    out.sort();
    out
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn simulate_writes_cache_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", DAVYDOV);
    let o = cltlab(tmp.path(), &["simulate", "--config", &cfg, "--out", "sim"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = tmp.path().join("sim");
    let batch = TrajectoryBatch::read_binary(fs::File::open(out.join("trajectories.cltr")).unwrap()).unwrap();
    assert_eq!(batch.n_grid, vec![64, 128, 256]);
    assert_eq!(batch.replicates, 500);
    let m = manifest(&out);
    let digest = hex::encode(Sha256::digest(DAVYDOV.as_bytes()));
    assert_eq!(m["config_digest"], digest.as_str());
    assert_eq!(m["seed"], 7);
    assert_eq!(m["command"], "simulate");
    for entry in m["outputs"].as_array().unwrap() {
        let bytes = fs::read(out.join(entry["file"].as_str().unwrap())).unwrap();
        assert_eq!(entry["sha256"], hex::encode(Sha256::digest(&bytes)).as_str());
        assert_eq!(entry["bytes"], bytes.len());
    }
    for key in ["processes", "metrics", "dependence"] {
        assert!(m["tolerances"][key].is_object(), "{key}");
    }
    // Nothing outside the output directory besides the config.
    let mut expected = vec![tmp.path().join("run.toml"), out.clone()];
    expected.extend(["manifest.json", "summary.csv", "summary.json", "trajectories.cltr"].map(|f| out.join(f)));
    expected.sort();
    assert_eq!(listing(tmp.path()), expected);
}

#[test]
fn default_output_directory_is_per_command() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", DAVYDOV);
    let o = cltlab(tmp.path(), &["simulate", "--config", &cfg, "--format", "csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = tmp.path().join("cltlab-out").join("simulate");
    assert!(out.join("summary.csv").exists());
    assert!(!out.join("summary.json").exists());
}

#[test]
fn invalid_davydov_sequence_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let text = DAVYDOV.replace(r#"kind = "schedule", p = 2.5, eps = 0.1"#, r#"kind = "constant", value = 0.4"#);
    let cfg = write_config(tmp.path(), "run.toml", &text);
    let o = cltlab(tmp.path(), &["simulate", "--config", &cfg, "--out", "sim"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("1/2 ≤ a_n < 1"), "{}", stderr(&o));
    assert!(!tmp.path().join("sim").exists());
}

#[test]
fn missing_seed_and_unknown_keys_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "a.toml", &DAVYDOV.replace("seed = 7", ""));
    let o = cltlab(tmp.path(), &["simulate", "--config", &cfg]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("seed"), "{}", stderr(&o));
    let cfg = write_config(tmp.path(), "b.toml", &DAVYDOV.replace("replicates", "replicate"));
    let o = cltlab(tmp.path(), &["simulate", "--config", &cfg]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("replicate"), "{}", stderr(&o));
    let o = cltlab(tmp.path(), &["simulate"]);
    assert_eq!(code(&o), 2);
    assert!(!tmp.path().join("cltlab-out").exists());
}

#[test]
fn rates_are_idempotent_and_refuse_other_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", PARETO);
    let o = cltlab(tmp.path(), &["rates", "--config", &cfg, "--out", "r"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("verdict"), "{}", stdout(&o));
    let out = tmp.path().join("r");
    // r = p − 2 = 0.5 is listed, so the cascade is written too.
    for f in ["rates.csv", "rates.json", "rates.svg", "cascade.csv", "cascade.json", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let csv = fs::read(out.join("rates.csv")).unwrap();
    let man = fs::read(out.join("manifest.json")).unwrap();

    let o = cltlab(tmp.path(), &["rates", "--config", &cfg, "--out", "r", "--threads", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read(out.join("rates.csv")).unwrap(), csv);
    assert_eq!(fs::read(out.join("manifest.json")).unwrap(), man);

    let o = cltlab(tmp.path(), &["rates", "--config", &cfg, "--out", "r", "--seed", "12"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("digest mismatch"), "{}", stderr(&o));
    let changed = write_config(tmp.path(), "other.toml", &PARETO.replace("replicates = 1000", "replicates = 1200"));
    let o = cltlab(tmp.path(), &["rates", "--config", &changed, "--out", "r"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("digest mismatch"), "{}", stderr(&o));
    assert_eq!(fs::read(out.join("manifest.json")).unwrap(), man);
    assert_eq!(fs::read(out.join("rates.csv")).unwrap(), csv);
}

#[test]
fn rates_reject_target_outside_the_theory() {
    let tmp = tempfile::tempdir().unwrap();
    let text = PARETO.replace("r_list = [0.5, 1.0]", "r_list = [2.5]").replace("\"sigma_n2\"", "\"sigma2\"");
    let cfg = write_config(tmp.path(), "run.toml", &text);
    let o = cltlab(tmp.path(), &["rates", "--config", &cfg, "--out", "r"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("sigma_n2"), "{}", stderr(&o));
    let cfg = write_config(tmp.path(), "b.toml", &PARETO.replace("r_list = [0.5, 1.0]\n", ""));
    let o = cltlab(tmp.path(), &["rates", "--config", &cfg, "--out", "r"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("r_list"), "{}", stderr(&o));
}

#[test]
fn step_budget_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", &format!("{DAVYDOV}step_budget = 1000\n"));
    let o = cltlab(tmp.path(), &["simulate", "--config", &cfg, "--out", "sim"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(!tmp.path().join("sim").exists());
}

#[test]
fn condphi_row_for_the_davydov_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{DAVYDOV}\n[dependence]\nconditions = [\"condphi\", \"C1\"]\nn_terms = 256\nouter_draws = 200\n");
    let cfg = write_config(tmp.path(), "run.toml", &text);
    let o = cltlab(tmp.path(), &["conditions", "--config", &cfg, "--out", "c"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("c/conditions.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "condition,verdict,terms,total,last_block_ratio,local_slope,method,reason");
    assert!(lines[1].starts_with("condphi,"), "{csv}");
    assert!(lines[2].starts_with("C1,"), "{csv}");
    assert_eq!(lines.len(), 3);
    let terms = fs::read_to_string(tmp.path().join("c/terms.csv")).unwrap();
    assert_eq!(terms.matches("condition,index").count(), 1);
    assert_eq!(terms.lines().count(), 1 + 2 * 256);
}

#[test]
fn condition_lists_are_validated() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "a.toml", &format!("{DAVYDOV}\n[dependence]\nconditions = [\"C9\"]\n"));
    let o = cltlab(tmp.path(), &["conditions", "--config", &cfg, "--out", "c"]);
    assert_eq!(code(&o), 2);
    let e = stderr(&o);
    assert!(e.contains("C9") && e.contains("Cond2cob") && e.contains("condalpha1-a"), "{e}");
    let cfg = write_config(tmp.path(), "b.toml", &format!("{DAVYDOV}\n[dependence]\nconditions = []\n"));
    let o = cltlab(tmp.path(), &["conditions", "--config", &cfg, "--out", "c"]);
    assert_eq!(code(&o), 2);
    let cfg = write_config(tmp.path(), "c.toml", &format!("{PARETO}\n[dependence]\nconditions = [\"condphi\"]\nn_terms = 64\nouter_draws = 50\n"));
    let o = cltlab(tmp.path(), &["conditions", "--config", &cfg, "--out", "c"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("not available"), "{}", stderr(&o));
    assert!(!tmp.path().join("c").exists());
}

#[test]
fn verify_list_needs_no_config() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cltlab(tmp.path(), &["verify", "--list"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    for s in ["kernel", "covariance", "envelope", "smoothing", "an_bound", "coboundary", "duality"] {
        assert!(text.contains(s), "{s}");
    }
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 0);
}

#[test]
fn verify_defaults_pass() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", "[cli]\nseed = 3\n");
    let o = cltlab(tmp.path(), &["verify", "--config", &cfg, "--out", "v"]);
    assert_eq!(code(&o), 0, "{}\n{}", stdout(&o), stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("v/verify.csv")).unwrap();
    assert_eq!(csv.lines().count(), 8);
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[3], "0", "{line}");
        assert_eq!(f[1], f[2], "{line}");
    }
}

#[test]
fn corrupted_kernel_fails_naming_the_invariant() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
[cli]
seed = 3
[cli.verify]
suites = ["kernel"]
[[cli.verify.kernels]]
name = "leaky"
states = [0, 1]
matrix = [0.5, 0.5, 0.3, 0.6]
"#;
    let cfg = write_config(tmp.path(), "run.toml", text);
    let o = cltlab(tmp.path(), &["verify", "--config", &cfg, "--out", "v"]);
    assert_eq!(code(&o), 1, "{}", stdout(&o));
    let e = stderr(&o);
    assert!(e.contains("leaky") && e.contains("invariant"), "{e}");
    let csv = fs::read_to_string(tmp.path().join("v/verify.csv")).unwrap();
    assert!(csv.contains("kernel,2,1,1,"), "{csv}");
}
