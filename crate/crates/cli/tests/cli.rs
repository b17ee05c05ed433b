#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use te_core::{bundled, mcf_mw, read_tm_sequence, write_tm_sequence, McfError, MwConfig};

fn te(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_te")).args(args).env_remove("TE_OUT_DIR").output().expect("te runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Generates demands into `dir` and returns the actual and predicted files.
fn demands(dir: &Path, extra: &[&str]) -> (PathBuf, PathBuf) {
    let out = dir.to_str().unwrap();
    let mut args = vec!["gen-demands", "--topo", "abilene", "--out", out, "--prefix", "d"];
    args.extend(extra);
    let o = te(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    (dir.join("d.actual.tms"), dir.join("d.predicted.tms"))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn smoke_run() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, p) = demands(tmp.path(), &["--num-tms", "3"]);
    let out = tmp.path().join("out");
    let o = te(&["run", "--topo", "abilene", "--tms", s(&a), "--pred", s(&p), "--algos", "spf", "--steps", "20", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["spf__abilene__Sraw__phi0__bunc__seed0.csv", "spf__abilene__Sraw__phi0__bunc__seed0.json", "comparison.csv", "summary.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let table = fs::read_to_string(out.join("comparison.csv")).unwrap();
    assert_eq!(table.lines().count(), 2);
    assert!(table.lines().nth(1).unwrap().starts_with("spf,abilene,3,"));
    assert!(!table.contains("solver_seconds"));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary[0]["algorithm"], "spf");
}

#[test]
fn topology_files_and_out_dir_from_env() {
    let tmp = tempfile::tempdir().unwrap();
    let topo_file = tmp.path().join("ring.topo");
    fs::write(&topo_file, bundled::ring6().to_string()).unwrap();
    let gen = te(&["gen-demands", "--topo", s(&topo_file), "--num-tms", "2", "--out", s(tmp.path()), "--prefix", "r"]);
    assert!(gen.status.success(), "{}", stderr(&gen));
    let env_out = tmp.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_te"))
        .args(["run", "--topo", s(&topo_file), "--tms", s(&tmp.path().join("r.actual.tms")), "--algos", "ecmp,raecke", "--steps", "5", "--timings"])
        .env("TE_OUT_DIR", &env_out)
        .env("TE_JOBS", "2")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(env_out.join("comparison.csv")).unwrap();
    assert!(table.lines().next().unwrap().ends_with(",solver_seconds"));
    assert_eq!(table.lines().count(), 3);
}

#[test]
fn unknown_algorithm_lists_valid_names() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, _) = demands(tmp.path(), &["--num-tms", "1"]);
    let o = te(&["run", "--topo", "abilene", "--tms", s(&a), "--algos", "spf,ospf", "--out", s(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("ospf"), "{err}");
    for name in ["spf", "ecmp", "ksp", "vlb", "raecke", "mcf", "semimcfraecke", "optimalmcf"] {
        assert!(err.contains(name), "{name} not listed: {err}");
    }
}

#[test]
fn bad_inputs_name_the_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = te(&["run", "--topo", "abilene", "--tms", "/nonexistent/x.tms", "--algos", "spf", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("actual matrices"));

    let o = te(&["run", "--topo", "nowhere", "--tms", "x", "--algos", "spf", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("topology"));

    // matrices sized for another topology
    let ring = tmp.path().join("ring.tms");
    fs::write(&ring, "1 2 3\n").unwrap();
    let o = te(&["run", "--topo", "abilene", "--tms", s(&ring), "--algos", "spf", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));

    let (a, _) = demands(tmp.path(), &["--num-tms", "1"]);
    let o = te(&["run", "--topo", "abilene", "--tms", s(&a), "--algos", "mcf", "--accuracy", "0", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = te(&["run", "--topo", "abilene", "--tms", s(&a), "--algos", "spf", "--recovery", "sometimes", "--out", s(&out)]);
    assert!(!o.status.success());
}

#[test]
fn gen_demands_shapes_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, p) = demands(&tmp.path().join("one"), &["--num-tms", "24", "--seed", "7"]);
    let (a2, p2) = demands(&tmp.path().join("two"), &["--num-tms", "24", "--seed", "7"]);
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 24);
    assert!(text.lines().all(|l| l.split_whitespace().count() == 144));
    // no prediction error: both files are the same bytes
    assert_eq!(fs::read(&a).unwrap(), fs::read(&p).unwrap());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&a2).unwrap());
    assert_eq!(fs::read(&p).unwrap(), fs::read(&p2).unwrap());
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.with_file_name("d.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["hosts"].as_array().unwrap().len(), 12);

    // files round-trip through the parser
    let topo = bundled::abilene();
    let tms = read_tm_sequence(&topo, &a).unwrap();
    assert_eq!(write_tm_sequence(&tms), text);

    let (_, noisy) = demands(&tmp.path().join("three"), &["--num-tms", "24", "--seed", "7", "--prediction-error", "0.3"]);
    assert_ne!(fs::read(&noisy).unwrap(), fs::read(&p).unwrap());
    let (other, _) = demands(&tmp.path().join("four"), &["--num-tms", "24", "--seed", "8"]);
    assert_ne!(fs::read(&other).unwrap(), fs::read(&a).unwrap());
}

#[test]
fn runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, p) = demands(tmp.path(), &["--num-tms", "4", "--seed", "2", "--prediction-error", "0.2"]);
    let run = |out: &Path, jobs: &str| {
        let o = te(&[
            "run", "--topo", "abilene", "--tms", s(&a), "--pred", s(&p), "--algos", "vlb,semimcfraecke,semimcfmcfenv,mcf",
            "--fail-num", "1", "--recovery", "local", "--scale", "2", "--steps", "30", "--step-csv", "--seed", "2", "--jobs", jobs,
            "--out", s(out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(out)
            .unwrap()
            .map(|e| e.unwrap())
            .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
            .collect();
        files.sort();
        files
    };
    let first = run(&tmp.path().join("a"), "1");
    assert_eq!(first.len(), 4 * 3 + 2);
    assert_eq!(first, run(&tmp.path().join("b"), "4"));
}

#[test]
fn comparison_table_matches_golden() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, p) = demands(tmp.path(), &["--num-tms", "6", "--seed", "0"]);
    let out = tmp.path().join("out");
    let o = te(&[
        "run", "--topo", "abilene", "--tms", s(&a), "--pred", s(&p), "--algos", "spf,ecmp,ksp,vlb,raecke,mcf,semimcfraecke",
        "--budget", "3", "--scale", "1", "--out", s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let got = fs::read_to_string(out.join("comparison.csv")).unwrap();
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/abilene_budget3_scale1.csv");
    if std::env::var_os("TE_UPDATE_GOLDEN").is_some() {
        fs::write(&golden, &got).unwrap();
    }
    let want = fs::read_to_string(&golden).expect("golden file; regenerate with TE_UPDATE_GOLDEN=1");
    assert_eq!(got, want);
    let algos: Vec<&str> = got.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(algos, ["spf", "ecmp", "ksp", "vlb", "raecke", "mcf", "semimcfraecke"]);
}

#[test]
fn strict_escalates_solver_limits() {
    // an instance the flow solver cannot certify in one phase
    let cfg = MwConfig { accuracy: 0.001, max_phases: 1, strict: true, ..MwConfig::default() };
    let (topo, tm) = (0..100)
        .map(|seed| (common::random_graph(8, 8, seed), seed))
        .map(|(t, seed)| {
            let tm = common::random_tm(&t, 12, seed);
            (t, tm)
        })
        .find(|(t, tm)| matches!(mcf_mw(t, tm, &cfg), Err(McfError::PhaseLimit { .. })))
        .expect("a phase-limited instance");
    let tmp = tempfile::tempdir().unwrap();
    let topo_file = tmp.path().join("g.topo");
    let tms_file = tmp.path().join("g.tms");
    fs::write(&topo_file, topo.to_string()).unwrap();
    fs::write(&tms_file, write_tm_sequence(&[tm])).unwrap();
    let args = ["run", "--topo", s(&topo_file), "--tms", s(&tms_file), "--algos", "mcf", "--accuracy", "0.001", "--max-phases", "1", "--steps", "2"];
    let out = tmp.path().join("o");
    let strict: Vec<&str> = args.iter().copied().chain(["--strict", "--out", s(&out)]).collect();
    let o = te(&strict);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let lax: Vec<&str> = args.iter().copied().chain(["--out", s(&out)]).collect();
    assert!(te(&lax).status.success());
}
