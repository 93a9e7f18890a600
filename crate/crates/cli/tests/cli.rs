use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const CONFIG: &str = r#"
output_dir = "out"
imputer_samples = 2
baseline_orderings = 4
[images]
kind = "synthetic"
count = 2
width = 12
height = 12
pool_size = 2
[grid]
n_superpixels = [4]
imputers = [{ kind = "mean" }, { kind = "histogram" }, { kind = "trainset" }]
segmenters = [{ kind = "grid" }]
predictors = [{ kind = "additive_logit", id = "add" }]
[[methods]]
kind = "shapley"
mode = "exact"
[[methods]]
kind = "preddiff"
[[methods]]
kind = "random"
"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn pfbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pfbench"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn benchmark_then_rank_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let cfg = cfg.to_str().unwrap();
    let out = pfbench(&["benchmark", "--config", cfg]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let results = dir.path().join("out");
    for f in ["measures.csv", "measures.json", "curves.csv", "calls.csv", "failures.json"] {
        assert!(results.join(f).exists(), "{f}");
    }

    assert_eq!(code(&pfbench(&["rank", "--config", cfg])), 0);
    assert!(results.join("rankings.csv").exists());
    assert!(results.join("distinct_rankings.csv").exists());

    let reports = dir.path().join("reports");
    let out = pfbench(&["report", "--config", cfg, "--kind", "boxplot", "--out", reports.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(reports.join("boxplot.csv").exists());
    let out = pfbench(&["report", "--config", cfg, "--kind", "consistency", "--out", reports.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(reports.join("consistency_srg.json").exists());
    // No matching experiment in this config: the remaining kinds still run.
    let out = pfbench(&["report", "--config", cfg]);
    assert_eq!(code(&out), 3);
    assert!(results.join("reports").join("rankings_srg.csv").exists());
}

#[test]
fn flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let cfg = cfg.to_str().unwrap();
    let read = |d: &str| std::fs::read_to_string(dir.path().join("out").join(d)).unwrap();

    assert_eq!(code(&pfbench(&["benchmark", "--config", cfg])), 0);
    let base = read("measures.csv");
    assert_eq!(code(&pfbench(&["benchmark", "--config", cfg, "--workers", "4"])), 0);
    assert_eq!(read("measures.csv"), base);
    let cache = dir.path().join("cache");
    let args = ["benchmark", "--config", cfg, "--cache-dir", cache.to_str().unwrap(), "--resume"];
    assert_eq!(code(&pfbench(&args)), 0);
    assert_eq!(read("measures.csv"), base);
    assert_eq!(code(&pfbench(&["benchmark", "--config", cfg, "--seed", "5"])), 0);
    assert_ne!(read("measures.csv"), base);
}

#[test]
fn attribute_and_characterize() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let cfg = cfg.to_str().unwrap();
    assert_eq!(code(&pfbench(&["attribute", "--config", cfg])), 0);
    let lines = std::fs::read_to_string(dir.path().join("out").join("attributions.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 3 * 2 * 3);
    assert_eq!(code(&pfbench(&["characterize", "--config", cfg])), 0);
    let csv = std::fs::read_to_string(dir.path().join("out").join("characterize.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 5);
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "output_dir = \"out\"\n");
    let out = pfbench(&["benchmark", "--config", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("configuration error"));

    let empty_grid = CONFIG.replace("n_superpixels = [4]", "n_superpixels = []");
    let cfg = write_config(dir.path(), &empty_grid);
    assert_eq!(code(&pfbench(&["benchmark", "--config", cfg.to_str().unwrap()])), 2);

    let cfg = write_config(dir.path(), CONFIG);
    let out = pfbench(&["report", "--config", cfg.to_str().unwrap(), "--kind", "plots"]);
    assert_eq!(code(&out), 2);
    assert_eq!(code(&pfbench(&["benchmark", "--config", "/nonexistent/run.toml"])), 2);
}

#[test]
fn failed_setups_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("masks")).unwrap();
    let text = CONFIG.replace(
        "segmenters = [{ kind = \"grid\" }]",
        "segmenters = [{ kind = \"grid\" }, { kind = \"import\", dir = \"masks\" }]",
    );
    let cfg = write_config(dir.path(), &text);
    let out = pfbench(&["benchmark", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stdout).contains("3 of 6 setups finished"));
}
