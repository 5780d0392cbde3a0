//! Shared helpers for the CLI and acceptance test targets.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use flowids::datapipe::{make_blobs, take_rows, Dataset};
use flowids::rng;

/// Deterministic imbalanced blob dataset with string class names.
pub fn imbalanced_blobs(counts: &[usize], dims: usize, seed: u64) -> Dataset {
    let max = counts.iter().copied().max().unwrap_or(0);
    let full = make_blobs(counts.len(), max, dims, 0.5, &mut rng::seeded(seed));
    let mut taken = vec![0usize; counts.len()];
    let keep: Vec<usize> = (0..full.len())
        .filter(|&i| {
            let class = full.labels[i];
            if taken[class] < counts[class] {
                taken[class] += 1;
                true
            } else {
                false
            }
        })
        .collect();
    take_rows(&full, &keep)
}

/// Write a dataset as a raw headered CSV with textual labels, the shape the
/// `preprocess` command ingests.
pub fn write_raw_csv(ds: &Dataset, path: &Path) {
    let mut out = String::new();
    for name in &ds.feature_names {
        out.push_str(name);
        out.push(',');
    }
    out.push_str("attack_type\n");
    for r in 0..ds.len() {
        for v in ds.features.row(r) {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!("{}\n", ds.class_names[ds.labels[r]]));
    }
    fs::write(path, out).expect("write raw csv");
}

pub fn write_schema(path: &Path) {
    fs::write(path, "label_column = \"attack_type\"\n").expect("write schema");
}

/// Run the `flowids` binary with the given arguments.
pub fn run_cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowids"))
        .args(args)
        .output()
        .expect("spawn flowids binary")
}

pub fn assert_success(out: &Output, context: &str) {
    assert!(
        out.status.success(),
        "{context} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

pub fn read_bytes(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}
