//! End-to-end tests driving the mobitrace binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mobitrace_core::io::read_contact_events;
use mobitrace_core::spatial::read_heatmap;
use mobitrace_core::stats::{read_distribution, DistributionKind};

const FIXTURE: &str = "#mobitrace land=test extent=256 tau=10\n\
t,user,x,y,z\n\
0,a,10,10,20\n\
0,b,15,10,20\n\
10,a,10,10,20\n";

fn mobitrace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mobitrace"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_fixture(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, content).unwrap();
    path
}

#[test]
fn summary_reports_ingest_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_fixture(dir.path(), "trace.csv", FIXTURE);
    let out = mobitrace(&["summary", "--input", input.to_str().unwrap()]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("unique_users=2"), "{stdout}");
    assert!(stdout.contains("mean_concurrency=1.5"), "{stdout}");
    assert!(stdout.contains("snapshot_count=2"), "{stdout}");
    assert!(stdout.contains("duration=10"), "{stdout}");
}

#[test]
fn analyze_writes_the_full_file_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_fixture(dir.path(), "trace.csv", FIXTURE);
    let out_dir = dir.path().join("out");
    let out = mobitrace(&[
        "analyze",
        "--input",
        input.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--bluetooth",
        "--wifi",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let mut expected: Vec<String> = Vec::new();
    for r in ["10", "80"] {
        for metric in ["ct", "ict", "ft", "degree", "diameter", "clustering"] {
            expected.push(format!("{metric}-r{r}.csv"));
        }
    }
    expected.extend(
        ["travel-length.csv", "effective-travel-time.csv", "travel-time.csv"]
            .map(String::from),
    );
    for name in &expected {
        assert!(out_dir.join(name).exists(), "missing {name}");
    }
    assert_eq!(fs::read_dir(&out_dir).unwrap().count(), expected.len());

    // every output parses under its own declared format
    for name in &expected {
        let bytes = fs::read(out_dir.join(name)).unwrap();
        let (kind, _) = read_distribution(&bytes[..]).unwrap();
        let want_ccdf = name.starts_with("ct-")
            || name.starts_with("ict-")
            || name.starts_with("ft-")
            || name.starts_with("degree-");
        let want = if want_ccdf {
            DistributionKind::Ccdf
        } else {
            DistributionKind::Cdf
        };
        assert_eq!(kind, want, "{name}");
    }
}

#[test]
fn analyze_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_fixture(dir.path(), "trace.csv", FIXTURE);
    let out_dir = dir.path().join("out");
    for _ in 0..2 {
        let out = mobitrace(&[
            "analyze",
            "--input",
            input.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
            "--bluetooth",
        ]);
        assert!(out.status.success());
    }
    let first: Vec<(String, Vec<u8>)> = {
        let mut files: Vec<_> = fs::read_dir(&out_dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        files.sort();
        files
            .iter()
            .map(|p| (p.display().to_string(), fs::read(p).unwrap()))
            .collect()
    };
    let out = mobitrace(&[
        "analyze",
        "--input",
        input.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--bluetooth",
    ]);
    assert!(out.status.success());
    for (path, bytes) in first {
        assert_eq!(fs::read(&path).unwrap(), bytes, "{path} changed between runs");
    }
}

#[test]
fn analyze_of_header_only_trace_reports_no_samples() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_fixture(
        dir.path(),
        "empty.csv",
        "#mobitrace land=test extent=256 tau=10\nt,user,x,y,z\n",
    );
    let out = mobitrace(&[
        "analyze",
        "--input",
        input.to_str().unwrap(),
        "--out-dir",
        dir.path().join("out").to_str().unwrap(),
        "--bluetooth",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("no samples"), "{stderr}");
}

#[test]
fn analyze_requires_a_range() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_fixture(dir.path(), "trace.csv", FIXTURE);
    let out = mobitrace(&[
        "analyze",
        "--input",
        input.to_str().unwrap(),
        "--out-dir",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("no range"));
}

#[test]
fn exit_codes_distinguish_validation_from_format_errors() {
    let dir = tempfile::tempdir().unwrap();

    // missing input file: validation
    let out = mobitrace(&["summary", "--input", "/nonexistent/trace.csv"]);
    assert_eq!(out.status.code(), Some(1));

    // malformed trace header: format
    let bad = write_fixture(dir.path(), "bad.csv", "not a trace\n");
    let out = mobitrace(&["summary", "--input", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // unknown flag: usage error from the parser
    let out = mobitrace(&["summary", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));

    // negative range: validation
    let trace = write_fixture(dir.path(), "trace.csv", FIXTURE);
    let out = mobitrace(&[
        "analyze",
        "--input",
        trace.to_str().unwrap(),
        "--out-dir",
        dir.path().join("out").to_str().unwrap(),
        "--range=-5",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn generate_then_summarize_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_fixture(
        dir.path(),
        "model.cfg",
        "model=rwp\nduration=600\nuser_count=5\nseed=11\n",
    );
    let out_dir = dir.path().join("gen");
    let out = mobitrace(&[
        "generate",
        "--model-config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trace_path = out_dir.join("trace.csv");
    assert!(trace_path.exists());

    let out = mobitrace(&["summary", "--input", trace_path.to_str().unwrap()]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("unique_users=5"), "{stdout}");
    assert!(stdout.contains("snapshot_count=60"), "{stdout}");

    // same seed: byte-identical output; different seed: different trace
    let bytes = fs::read(&trace_path).unwrap();
    let out = mobitrace(&[
        "generate",
        "--model-config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(fs::read(&trace_path).unwrap(), bytes);

    let out = mobitrace(&[
        "generate",
        "--model-config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--seed",
        "99",
    ]);
    assert!(out.status.success());
    assert_ne!(fs::read(&trace_path).unwrap(), bytes);
}

#[test]
fn generate_rejects_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("gen").to_str().unwrap().to_string();

    // unknown key: format error
    let cfg = write_fixture(dir.path(), "bad1.cfg", "model=rwp\nwat=1\n");
    let out = mobitrace(&[
        "generate",
        "--model-config",
        cfg.to_str().unwrap(),
        "--out-dir",
        &out_dir,
    ]);
    assert_eq!(out.status.code(), Some(2));

    // invalid value: validation error naming the field
    let cfg = write_fixture(dir.path(), "bad2.cfg", "model=poi\nspeed=-3\n");
    let out = mobitrace(&[
        "generate",
        "--model-config",
        cfg.to_str().unwrap(),
        "--out-dir",
        &out_dir,
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("speed"));
}

#[test]
fn export_contacts_writes_parseable_events() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_fixture(dir.path(), "trace.csv", FIXTURE);
    let out_dir = dir.path().join("out");
    let out = mobitrace(&[
        "export-contacts",
        "--input",
        input.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--bluetooth",
        "--wifi",
    ]);
    assert!(out.status.success());
    for r in ["10", "80"] {
        let bytes = fs::read(out_dir.join(format!("contacts-r{r}.csv"))).unwrap();
        let events = read_contact_events(&bytes[..]).unwrap();
        // a and b are 5 m apart at t=0 only
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].start, 0);
        assert_eq!(events[0].end, 10);
    }

    // both contacts are trace-boundary censored, so excluding censored
    // contacts empties the export
    let out = mobitrace(&[
        "export-contacts",
        "--input",
        input.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--bluetooth",
        "--exclude-censored",
    ]);
    assert!(out.status.success());
    let bytes = fs::read(out_dir.join("contacts-r10.csv")).unwrap();
    assert!(read_contact_events(&bytes[..]).unwrap().is_empty());
}

#[test]
fn heatmap_writes_mean_and_peak_grids() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_fixture(dir.path(), "trace.csv", FIXTURE);
    let out_dir = dir.path().join("out");
    let out = mobitrace(&[
        "heatmap",
        "--input",
        input.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());

    let mean = read_heatmap(&fs::read(out_dir.join("heatmap-mean.csv")).unwrap()[..]).unwrap();
    assert_eq!(mean.values.len(), 13);
    let total: f64 = mean.values.iter().flatten().sum();
    assert!((total - 1.5).abs() < 1e-9, "total mean occupancy {total}");

    let peak = read_heatmap(&fs::read(out_dir.join("heatmap-peak.csv")).unwrap()[..]).unwrap();
    // a and b share the cell at (10,10) -> (0,0); peak there is 2
    assert_eq!(peak.values[0][0], 2.0);
}

#[test]
fn two_d_flag_changes_link_decisions() {
    // 6 m apart on the ground, 100 m apart in elevation
    let trace = "#mobitrace land=t extent=256 tau=10\n\
t,user,x,y,z\n\
0,a,10,10,0\n\
0,b,16,10,100\n";
    let dir = tempfile::tempdir().unwrap();
    let input = write_fixture(dir.path(), "trace.csv", trace);
    let out_dir = dir.path().join("out");

    for (flag, expect) in [(None, 0), (Some("--2d"), 1)] {
        let mut args = vec![
            "export-contacts",
            "--input",
            input.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
            "--bluetooth",
        ];
        if let Some(f) = flag {
            args.push(f);
        }
        let out = mobitrace(&args);
        assert!(out.status.success());
        let bytes = fs::read(out_dir.join("contacts-r10.csv")).unwrap();
        assert_eq!(read_contact_events(&bytes[..]).unwrap().len(), expect);
    }
}
