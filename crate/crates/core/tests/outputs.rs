use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use pcmsyn::harness::reproduce_figures;
use pcmsyn::metrics::{read_voltage_sensitivity, variation_sweep, NoiseReplay};
use pcmsyn::{Execution, RunConfig, Scenario};

fn small_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.sweep.seeds = 6;
    cfg
}

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn reproduce(cfg: &RunConfig, exec: Execution) -> (tempfile::TempDir, BTreeMap<String, Vec<u8>>) {
    let dir = tempfile::tempdir().unwrap();
    reproduce_figures(&cfg.scenarios(), &cfg.figure_settings(), dir.path(), &cfg.hash(), exec).unwrap();
    let t = tree(dir.path());
    (dir, t)
}

fn data_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn figure_tree_is_reproducible_and_complete() {
    let cfg = small_config();
    let (_a, first) = reproduce(&cfg, Execution::default());
    let (_b, second) = reproduce(&cfg, Execution::Sequential);
    assert_eq!(first, second);

    for name in ["fig2b.csv", "fig2c.csv", "fig2d.csv", "fig7.csv"] {
        assert!(first.contains_key(name), "{name} missing");
    }
    for cv in ["0.60", "0.40", "0.24", "0.09"] {
        for f in [format!("fig5_{cv}.csv"), format!("fig6_{cv}.csv"), format!("trace_{cv}.json"), format!("sensitivity_{cv}.json")] {
            let key = format!("cv{cv}/{f}");
            assert!(first.contains_key(&key), "{key} missing");
        }
        assert!(first.contains_key(&format!("cv{cv}/fig4_epoch0.csv")));
    }
}

#[test]
fn every_file_carries_provenance() {
    let cfg = small_config();
    let (_d, files) = reproduce(&cfg, Execution::default());
    let hash = cfg.hash();
    for (name, bytes) in &files {
        let text = String::from_utf8(bytes.clone()).unwrap();
        if name.ends_with(".csv") {
            let head: Vec<&str> = text.lines().take(3).collect();
            assert!(head[0].starts_with("# seed="), "{name}");
            assert_eq!(head[1], format!("# config_hash={hash}"), "{name}");
            assert_eq!(head[2], format!("# version={}", pcmsyn::VERSION), "{name}");
        } else {
            let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
            assert_eq!(doc["provenance"]["config_hash"], hash.as_str(), "{name}");
            assert_eq!(doc["provenance"]["seed"], cfg.seed, "{name}");
        }
    }
}

#[test]
fn figure_contents_match_expectations() {
    let cfg = small_config();
    let (_d, files) = reproduce(&cfg, Execution::default());
    let text = |k: &str| String::from_utf8(files[k].clone()).unwrap();

    // Low variation: the missing pixel clears the C=2 line in the first epoch.
    let fig6 = data_rows(&text("cv0.09/fig6_0.09.csv"));
    let current: f64 = fig6[0][1].parse().unwrap();
    let c2: f64 = fig6[0][3].parse().unwrap();
    assert_eq!(fig6[0][0], "1");
    assert!(current > c2, "{current} vs {c2}");

    for cv in ["0.60", "0.09"] {
        let epoch0 = data_rows(&text(&format!("cv{cv}/fig4_epoch0.csv")));
        assert_eq!(epoch0.len(), 10);
        for row in epoch0 {
            assert!(row[1..].iter().all(|v| v.parse::<f64>().unwrap() == 1.0));
        }
    }

    let fig7 = data_rows(&text("fig7.csv"));
    assert_eq!(fig7.len(), 4);
    let cvs: Vec<&str> = fig7.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(cvs, ["0.60", "0.40", "0.24", "0.09"]);
}

#[test]
fn sweep_is_independent_of_execution_mode() {
    let cfg = small_config();
    let run = |exec| variation_sweep(&cfg.variation_specs(), &cfg.sweep_seeds(), &cfg.device, &cfg.network, exec).unwrap();
    assert_eq!(run(Execution::Sequential), run(Execution::Parallel));
}

#[test]
fn recorded_and_reseeded_noise_agree() {
    let grid = pcmsyn::metrics::default_sensitivity_grid();
    for seed in 0..12u64 {
        for cv in [0.60, 0.09] {
            let sc = Scenario::calibrated(cv, seed).unwrap();
            let a = read_voltage_sensitivity(&sc, &grid, NoiseReplay::Reseed, Execution::Sequential).unwrap();
            let b = read_voltage_sensitivity(&sc, &grid, NoiseReplay::Tape, Execution::Sequential).unwrap();
            assert_eq!(a, b, "seed {seed} cv {cv}");
        }
    }
}
