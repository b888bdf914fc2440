//! End-to-end checks of the binary: exit codes, file outputs and the
//! verify round trip on traces.

mod common;

use std::path::Path;
use std::process::Command;

use common::{random_packing_case, ObjectiveSpec};
use packpred::bench::{self, PackingOracleSpec};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_packpred"))
}

fn run_in(dir: &Path, args: &[&str]) -> (i32, String, String) {
    let out = bin().current_dir(dir).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn gen_run_auction_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, stderr) = run_in(
        dir.path(),
        &[
            "gen",
            "--buyers",
            "6",
            "--items",
            "150",
            "--bidders-per-item",
            "3",
            "--budget-fraction",
            "0.3",
            "--out-dir",
            "work",
            "--with-prediction",
        ],
    );
    assert_eq!(code, 0, "gen failed: {stderr}");
    assert!(stdout.contains("R_max"), "{stdout}");
    let inst = dir.path().join("work/instance.txt");
    let pred = dir.path().join("work/prediction.txt");
    assert!(inst.exists() && pred.exists());

    let (code, stdout, stderr) = run_in(
        dir.path(),
        &[
            "run",
            "adauction",
            "--instance",
            "work/instance.txt",
            "--prediction",
            "work/prediction.txt",
            "--eta",
            "0.3",
        ],
    );
    assert_eq!(code, 0, "run failed: {stderr}\n{stdout}");
    assert!(stdout.contains("revenue"), "{stdout}");

    let (code, _, stderr) = run_in(
        dir.path(),
        &[
            "run",
            "adauction",
            "--instance",
            "work/instance.txt",
            "--no-prediction",
            "--eta",
            "1.0",
        ],
    );
    assert_eq!(code, 0, "no-prediction run failed: {stderr}");
}

#[test]
fn packing_run_verify_and_tampered_trace() {
    let dir = tempfile::tempdir().unwrap();
    let case = random_packing_case(0, 0xACCE57);
    let spec = match &case.objective {
        ObjectiveSpec::Linear(w) => PackingOracleSpec::Linear { weights: w.clone() },
        ObjectiveSpec::Coverage {
            universe,
            covers,
            weights,
        } => PackingOracleSpec::Coverage {
            universe: *universe,
            point_weights: weights.clone(),
            covers: covers.clone(),
        },
    };
    let inst_path = dir.path().join("packing.txt");
    let pred_path = dir.path().join("bits.txt");
    bench::write_packing_instance(&case.instance, &spec, &inst_path).unwrap();
    bench::write_packing_prediction(&case.predictions, &pred_path).unwrap();

    let (code, stdout, stderr) = run_in(
        dir.path(),
        &[
            "run",
            "packing",
            "--instance",
            "packing.txt",
            "--prediction",
            "bits.txt",
            "--eta",
            "0.5",
            "--trace-out",
            "trace.txt",
        ],
    );
    assert_eq!(code, 0, "packing run failed: {stderr}\n{stdout}");
    assert!(stdout.contains("objective"), "{stdout}");

    let (code, _, _) = run_in(dir.path(), &["verify", "--trace", "trace.txt"]);
    assert_eq!(code, 0);

    // Halve every recorded alpha: the growth lower bound must now fail.
    let trace_path = dir.path().join("trace.txt");
    let text = std::fs::read_to_string(&trace_path).unwrap();
    let tampered: String = text
        .lines()
        .map(|line| {
            if let Some(pos) = line.find(" alpha ") {
                let (head, tail) = line.split_at(pos + " alpha ".len());
                let halved: Vec<String> = tail
                    .split_whitespace()
                    .map(|v| format!("{}", v.parse::<f64>().unwrap() * 0.5))
                    .collect();
                format!("{head}{}", halved.join(" "))
            } else {
                line.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(&trace_path, tampered).unwrap();
    let (code, stdout, _) = run_in(dir.path(), &["verify", "--trace", "trace.txt"]);
    assert_eq!(code, 1, "tampered trace accepted: {stdout}");
    assert!(stdout.contains("VIOLATION"), "{stdout}");
}

#[test]
fn malformed_instance_reports_line_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.txt");
    std::fs::write(&path, "adauction 2 1\nbudget 1 5.0\nitem zero nonsense\n").unwrap();
    let (code, _, stderr) = run_in(
        dir.path(),
        &["run", "adauction", "--instance", "broken.txt", "--eta", "0.5"],
    );
    assert_eq!(code, 2);
    assert!(stderr.contains("broken.txt"), "{stderr}");
}

#[test]
fn sweep_writes_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, stderr) = run_in(
        dir.path(),
        &[
            "sweep",
            "--buyers",
            "8",
            "--items",
            "150",
            "--bidders-per-item",
            "3",
            "--budget-fraction",
            "0.3",
            "--out-dir",
            "out",
        ],
    );
    assert_eq!(code, 0, "sweep failed: {stderr}");
    for name in ["ratio_0.0.dat", "ratio_0.01.dat", "ratio_0.1.dat", "sweep.csv"] {
        assert!(dir.path().join("out").join(name).exists(), "missing {name}");
    }
}
