use std::fs;
use std::path::Path;
use std::time::Duration;

use isac_secure::config::ExperimentConfig;
use isac_secure::validation::{run_validate, ValidationOutcome};

// Interior secrecy peak claim: the secrecy rate at the default operating point
// increases all the way to full-power data, so this check is expected red.
const KNOWN_RED: &str = "secrecy_rate_rises_to_interior_peak";

const LIMITS: [(u8, u64); 5] = [(1, 10), (2, 30), (3, 300), (4, 300), (5, 600)];

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn runtime(out: &ValidationOutcome, k: u8) -> Duration {
    out.timings.iter().find(|(c, _)| *c == k).map(|(_, d)| *d).unwrap()
}

#[test]
fn acceptance() {
    let cfg = ExperimentConfig::default();
    let first = run_validate(&cfg).unwrap();
    let second = run_validate(&cfg).unwrap();

    let mut failures = Vec::new();
    for (k, limit) in LIMITS {
        let checks: Vec<_> = first.criterion(k).collect();
        assert!(!checks.is_empty(), "criterion {k} produced no checks");
        let elapsed = runtime(&first, k);
        let in_time = elapsed <= Duration::from_secs(limit);
        let red: Vec<_> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
        let ok = red.is_empty() && in_time;
        println!(
            "{} criterion {k}: {}/{} checks, runtime {:.1}s (limit {limit}s){}",
            if ok { "PASS" } else { "FAIL" },
            checks.len() - red.len(),
            checks.len(),
            elapsed.as_secs_f64(),
            if red.is_empty() { String::new() } else { format!(", failing: {}", red.join(", ")) },
        );
        for c in &checks {
            println!("    {}", c.line());
        }
        if !in_time {
            failures.push(format!("criterion {k} over time limit"));
        }
        failures.extend(red.iter().filter(|n| **n != KNOWN_RED).map(|n| format!("criterion {k}: {n}")));
    }

    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    first.write_to(a.path()).unwrap();
    second.write_to(b.path()).unwrap();
    let (fa, fb) = (dir_bytes(a.path()), dir_bytes(b.path()));
    let identical = fa == fb && first.report == second.report;
    println!(
        "{} criterion 6: {} files byte-identical across two seed-42 runs",
        if identical { "PASS" } else { "FAIL" },
        fa.len()
    );
    if !identical {
        failures.push("criterion 6: outputs differ".into());
    }

    // The known red check must fail for the documented reason: a monotone rise to τ = 1.
    let fig_a = &first.tables.iter().find(|(s, _)| *s == "fig_a").unwrap().1;
    let sec = fig_a.column("secrecy_rate").unwrap();
    let rising = sec.windows(2).all(|w| w[1] > w[0]);
    println!(
        "note: {KNOWN_RED} is red; secrecy rate rises monotonically from {:.4} to {:.4} over the tau grid",
        sec[0],
        sec[sec.len() - 1]
    );
    assert!(rising, "secrecy rate shape changed: {sec:?}");

    assert!(failures.is_empty(), "unexpected failures: {failures:?}");
}
