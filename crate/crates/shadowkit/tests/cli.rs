use std::path::Path;
use std::process::Command;

use serde_json::{json, Value};
use shadowkit::config::apply_override;
use shadowkit::{io, run, Experiment, ExperimentConfig, RunError};

fn small(e: Experiment, extra: &[&str]) -> ExperimentConfig {
    let mut o: Vec<String> = vec!["seeds=2".into()];
    match e {
        Experiment::VerifyCl | Experiment::Semiconj => o.push("samples=2".into()),
        Experiment::ShadowPeriodic => o.push("periods=[1,3]".into()),
        Experiment::SolverOracle => o.extend(["max_dim=3".into(), "max_len=8".into()]),
        _ => {}
    }
    o.extend(extra.iter().map(|s| s.to_string()));
    ExperimentConfig::load(None, e, &o, None).unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_shadowkit"))
}

fn stdout_json_line(out: &[u8]) -> Value {
    let text = String::from_utf8_lossy(out);
    serde_json::from_str(text.lines().next().unwrap_or("")).unwrap()
}

#[test]
fn overrides_nest_and_parse_json() {
    let mut doc = json!({ "experiment": "shadow" });
    apply_override(&mut doc, "tolerances.oracle=1e-9").unwrap();
    apply_override(&mut doc, "periods=[2,4]").unwrap();
    apply_override(&mut doc, "out=some dir").unwrap();
    assert_eq!(doc["tolerances"]["oracle"], json!(1e-9));
    assert_eq!(doc["periods"], json!([2, 4]));
    assert_eq!(doc["out"], json!("some dir"));
    assert!(apply_override(&mut doc, "no_equals").is_err());
    assert!(apply_override(&mut doc, "a..b=1").is_err());
    assert!(apply_override(&mut doc, "out.x=1").is_err());
}

#[test]
fn defaults_resolve_per_experiment() {
    for e in Experiment::ALL {
        let cfg = ExperimentConfig::load(None, e, &[], None).unwrap();
        assert_eq!(cfg.experiment, e);
        assert!(cfg.window_half() >= 2);
        assert!(!cfg.d_sweep.is_empty());
        assert_eq!(cfg.system.is_some(), e != Experiment::SolverOracle);
    }
    let ed = ExperimentConfig::load(None, Experiment::VerifyEd, &["system.name=\"linear_no_ed\"".into()], None).unwrap();
    assert_eq!(ed.norm(), shadowkit_core::seqcore::NormExp::Two);
}

#[test]
fn bad_configs_are_refused() {
    let e = Experiment::Shadow;
    for o in ["window=1", "d=0", "d=2.0", "seeds=0", "periods=[]", "amp=-1", "unknown_key=1", "system.name=\"nope\""] {
        let r = ExperimentConfig::load(None, e, &[o.to_string()], None).and_then(|c| run(&c).map(|_| ()));
        let err = r.expect_err(o);
        assert_eq!(err.exit_code(), 3, "{o}: {err}");
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    std::fs::write(&path, r#"{"experiment": "semiconj"}"#).unwrap();
    let err = ExperimentConfig::load(Some(&path), e, &[], None).unwrap_err();
    assert!(matches!(err, RunError::Config(_)));
}

#[test]
fn every_experiment_runs_on_a_small_config() {
    for e in Experiment::ALL {
        if e == Experiment::Semiconj {
            continue;
        }
        let cfg = small(e, &[]);
        let out = run(&cfg).unwrap_or_else(|err| panic!("{e}: {err}"));
        assert!(out.pass(), "{e}: {:#?}", out.checks);
        assert!(!out.table.is_empty(), "{e}");
    }
}

#[test]
fn semiconj_on_two_points() {
    let cfg = small(Experiment::Semiconj, &["truncation=30"]);
    let out = run(&cfg).unwrap();
    assert!(out.pass(), "{:#?}", out.checks);
    let text = String::from_utf8(out.table).unwrap();
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn runs_are_deterministic_and_thread_independent() {
    let cfg = small(Experiment::Shadow, &["d_sweep=[1e-3,1e-4]", "seeds=4"]);
    let a = run(&cfg).unwrap();
    let b = run(&cfg).unwrap();
    assert_eq!(a, b);
    let dir = tempfile::tempdir().unwrap();
    let mut outs = Vec::new();
    for threads in ["1", "3"] {
        let o = dir.path().join(threads);
        let st = bin()
            .env(shadowkit::parallel::THREADS_VAR, threads)
            .args(["shadow", "--seed", "7", "--override", "seeds=4", "--override", "d_sweep=[1e-3,1e-4]", "--out"])
            .arg(&o)
            .output()
            .unwrap();
        assert_eq!(st.status.code(), Some(0), "{}", String::from_utf8_lossy(&st.stderr));
        outs.push(std::fs::read(o.join("shadow.csv")).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
    assert_eq!(outs[0], a.table);
}

#[test]
fn outputs_land_in_the_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap().to_string();
    let cfg = small(Experiment::SolverOracle, &[&format!("out={}", Value::from(out))]);
    let outcome = run(&cfg).unwrap();
    let files = io::write_outcome(&cfg, &outcome).unwrap();
    assert_eq!(files.len(), 3);
    assert!(files.iter().all(|f| f.exists()));
    let manifest: Value = serde_json::from_slice(&std::fs::read(io::manifest_path(&cfg)).unwrap()).unwrap();
    assert_eq!(manifest["experiment"], json!("solver-oracle"));
    assert_eq!(manifest["pass"], json!(true));
    assert_eq!(manifest["core_version"], json!(shadowkit_core::VERSION));
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();

    // the dichotomy check is expected to fail, so the run still exits 0
    let ed = bin().args(["verify-ed", "--out"]).arg(out).output().unwrap();
    let text = String::from_utf8_lossy(&ed.stdout);
    assert_eq!(ed.status.code(), Some(0), "{text}");
    assert!(text.contains("dichotomy_on_z_plus"), "{text}");

    let bad = bin().args(["shadow", "--override", "window=1", "--out"]).arg(out).output().unwrap();
    assert_eq!(bad.status.code(), Some(3));
    let err = stdout_json_line(&bad.stdout);
    assert_eq!(err["error"], json!("config"));
    assert!(Path::new(out).join("error.json").exists());

    // d far beyond the admissible size is a precondition failure from the core
    let pre = bin().args(["semiconj", "--override", "d=0.5", "--override", "samples=1", "--out"]).arg(out).output().unwrap();
    assert_eq!(pre.status.code(), Some(3), "{}", String::from_utf8_lossy(&pre.stdout));

    let strict = bin()
        .args(["solver-oracle", "--override", "max_dim=3", "--override", "max_len=8", "--override", "seeds=2"])
        .args(["--override", "tolerances.oracle=-1", "--out"])
        .arg(out)
        .output()
        .unwrap();
    assert_eq!(strict.status.code(), Some(3));

    let missing = bin().args(["shadow", "--config", "/nonexistent/cfg.json"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(3));
}
