//! Acceptance gate for the binary: one test per criterion it owns.

use std::process::Command;

fn report(criterion: u32, desc: &str, pass: bool) {
    println!(
        "criterion {criterion:02} {}: {desc}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion:02} failed: {desc}");
}

/// Same preset, same seed, different worker-pool sizes: the CSV bytes
/// must match exactly. The replicate count is overridden downward so the
/// check stays quick; the preset still supplies the grid and bandwidth.
#[test]
fn criterion_13_output_is_byte_identical_across_thread_counts() {
    let run = |threads: &str, dest: &std::path::Path| {
        let out = Command::new(env!("CARGO_BIN_EXE_intlab"))
            .args([
                "lt-moments",
                "--preset",
                "desk",
                "--reps",
                "40",
                "--refinement",
                "1",
                "--seed",
                "7",
                "--threads",
                threads,
                "--out",
                dest.to_str().unwrap(),
            ])
            .output()
            .expect("spawning intlab");
        assert!(
            out.status.success(),
            "run failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    };
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("threads1.csv");
    let eight = dir.path().join("threads8.csv");
    run("1", &one);
    run("8", &eight);
    let a = std::fs::read(&one).unwrap();
    let b = std::fs::read(&eight).unwrap();
    report(
        13,
        "desk preset CSV is byte-identical across --threads 1 and 8",
        a == b,
    );
}
