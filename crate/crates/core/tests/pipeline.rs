use std::process::Command;

use tracefem::study::{run_study, StudyConfig, TestCase, CSV_HEADER};

#[test]
fn library_study_matches_cli_output() {
    let cfg = StudyConfig { case: TestCase::Harmonic, variant: 2, levels: 2, cells0: 4, ..Default::default() };
    let report = run_study(&cfg).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_tracefem"))
        .args(["study", "--case", "harmonic", "--variant", "2", "--levels", "2", "--cells0", "4"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text, report.to_csv());
    assert_eq!(text.lines().next(), Some(CSV_HEADER));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn cli_writes_partial_report_and_fails_when_surface_leaves_box() {
    let dir = std::env::temp_dir().join(format!("tracefem-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("study.md");
    let out = Command::new(env!("CARGO_BIN_EXE_tracefem"))
        .args(["study", "--box", "0.9", "--levels", "1", "--cells0", "4", "--format", "md", "--out"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("surface leaves background domain"));
    let md = std::fs::read_to_string(&path).unwrap();
    assert!(md.contains("| level |"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn cli_exports_surface_and_matrix() {
    let dir = std::env::temp_dir().join(format!("tracefem-export-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let (surface, matrix) = (dir.join("surface.txt"), dir.join("matrix.txt"));
    let out = Command::new(env!("CARGO_BIN_EXE_tracefem"))
        .args(["study", "--levels", "1", "--cells0", "4", "--reference-mode", "--export-surface"])
        .arg(&surface)
        .arg("--export-matrix")
        .arg(&matrix)
        .output()
        .unwrap();
    assert!(out.status.success());
    let entries: Vec<(usize, usize, f64)> = std::fs::read_to_string(&matrix)
        .unwrap()
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split(' ').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    assert!(!entries.is_empty() && entries.iter().all(|e| e.2 != 0.0));
    // Stored pattern is symmetric.
    let set: std::collections::HashSet<(usize, usize)> = entries.iter().map(|e| (e.0, e.1)).collect();
    assert!(set.iter().all(|&(i, j)| set.contains(&(j, i))));
    assert!(!std::fs::read_to_string(&surface).unwrap().is_empty());
    std::fs::remove_dir_all(&dir).unwrap();
}
