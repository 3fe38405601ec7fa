use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_susy-invert"))
        .args(args)
        .current_dir(cwd)
        .env_remove("SUSY_INVERT_CONFIG")
        .output()
        .expect("binary runs")
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn kappas(text: &str) -> Vec<f64> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.contains('='))
        .map(|l| l.trim().parse().unwrap())
        .collect()
}

#[test]
fn poles_from_taylor_coefficients() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &["poles", "--l", "0", "--numerator", "0.04219,1.30386,0.06883", "--out", "o"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let ks = kappas(&fs::read_to_string(tmp.path().join("o/poles.txt")).unwrap());
    let expected = [-4.6917, -0.0401, 0.8365, 3.8953];
    assert_eq!(ks.len(), 4);
    for (a, b) in ks.iter().zip(expected) {
        assert!((a - b).abs() < 1e-3, "{a} vs {b}");
    }
}

#[test]
fn verify_one_pole_record() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("one.txt"), "l = 0\n0.5\n").unwrap();
    let out = run(&["verify", "--input", "one.txt", "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&tmp.path().join("o"));
    assert!(r["stages"]["verification"]["max_abs_deg"].as_f64().unwrap() < 0.05);
    assert_eq!(r["stages"]["potential"]["nu"], 1);
    let table = fs::read_to_string(tmp.path().join("o/verification.dat")).unwrap();
    assert_eq!(table.lines().filter(|l| !l.starts_with('#')).count(), 50);
}

#[test]
fn s_wave_pipeline_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &["pipeline", "--input", "bundled:1S0", "--order", "3/2", "--out", "o", "--emit-plots"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("o");
    let r = report(&dir);
    let ks = r["stages"]["poles"]["kappas"].as_array().unwrap();
    assert_eq!(ks.len(), 6);
    assert_eq!(r["stages"]["potential"]["nu"], 2);
    assert!(r["stages"]["verification"]["max_abs_deg"].as_f64().unwrap() < 0.1);
    assert!(r["stages"]["fit_erf"]["fit"]["rms_deg"].as_f64().unwrap() <= 1.0);
    for f in ["model.json", "poles.txt", "potential.dat", "verification.dat", "plot_data.dat", "plot_model.dat"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let warnings: Vec<&str> = r["warnings"].as_array().unwrap().iter().map(|w| w.as_str().unwrap()).collect();
    let mut dedup = warnings.clone();
    dedup.dedup();
    assert_eq!(dedup.len(), warnings.len());
}

#[test]
fn reports_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    for o in ["a", "b"] {
        let out = run(
            &["pipeline", "--input", "bundled:1D2", "--order", "2", "--out", "same"],
            tmp.path(),
        );
        assert_eq!(out.status.code(), Some(0));
        fs::rename(tmp.path().join("same"), tmp.path().join(o)).unwrap();
    }
    let strip = |d: &str| {
        let mut v = report(&tmp.path().join(d));
        v.as_object_mut().unwrap().remove("timing");
        serde_json::to_string_pretty(&v).unwrap()
    };
    assert_eq!(strip("a"), strip("b"));
    for f in ["poles.txt", "potential.dat", "verification.dat", "model.json"] {
        assert_eq!(
            fs::read(tmp.path().join("a").join(f)).unwrap(),
            fs::read(tmp.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn artifacts_reingest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["fit-poles", "--input", "bundled:1S0", "--npoles", "3", "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&tmp.path().join("o"));
    let fitted: Vec<f64> = r["stages"]["poles"]["kappas"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let text = fs::read_to_string(tmp.path().join("o/poles.txt")).unwrap();
    assert_eq!(kappas(&text), fitted);

    for (order, real) in [("2", true), ("3/2", false)] {
        let out = run(&["fit-erf", "--input", "bundled:1S0", "--order", order, "--out", "m"], tmp.path());
        assert_eq!(out.status.code(), Some(0));
        let out = run(&["poles", "--input", "m/model.json", "--out", "p"], tmp.path());
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let a = report(&tmp.path().join("m"));
        let b = report(&tmp.path().join("p"));
        assert_eq!(a["stages"]["fit_erf"]["numerator"], b["stages"]["fit_erf"]["numerator"]);
        assert_eq!(a["stages"]["fit_erf"]["denominator"], b["stages"]["fit_erf"]["denominator"]);
        // the bundled sample gives the [3/2] model a complex pair
        assert_eq!(tmp.path().join("p/poles.txt").exists(), real, "{order}");
        fs::remove_dir_all(tmp.path().join("p")).unwrap();
    }
}

#[test]
fn potential_table_in_mev() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("one.txt"), "l = 0\n1.0\n").unwrap();
    let out = run(&["potential", "--input", "one.txt", "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(tmp.path().join("o/potential.dat")).unwrap();
    let row: Vec<f64> = text
        .lines()
        .find(|l| !l.starts_with('#'))
        .unwrap()
        .split_whitespace()
        .map(|t| t.parse().unwrap())
        .collect();
    let r = row[0];
    let exact = 41.47 * 2.0 / r.sinh().powi(2);
    assert!((row[1] - exact).abs() < 1e-9 * exact);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.csv"), "E_lab_MeV,delta_deg\n1,2\n5,zz\n").unwrap();
    let out = run(&["fit-erf", "--input", "bad.csv", "--l", "0", "--order", "1", "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.csv:3"));

    let out = run(&["fit-erf", "--input", "bundled:1S0", "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("o/report.json").exists());

    fs::write(tmp.path().join("cfg.json"), "{\n  \"l\": 0,\n  \"ordr\": \"3/2\"\n}\n").unwrap();
    let out = run(&["fit-erf", "--config", "cfg.json"], tmp.path());
    assert_eq!(out.status.code(), Some(2));

    // a repeated pole makes the Wronskian vanish identically
    fs::write(tmp.path().join("p.txt"), "l = 0\n0.5\n0.5\n").unwrap();
    let out = run(&["potential", "--input", "p.txt", "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage potential"));
}

#[test]
fn config_file_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("cfg.json"),
        r#"{"input": "bundled:1S0", "order": "2/0", "out": "from_cfg", "fit": {"weights": "k-variance"}}"#,
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_susy-invert"))
        .args(["fit-erf", "--order", "3/2"])
        .env("SUSY_INVERT_CONFIG", "cfg.json")
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&tmp.path().join("from_cfg"));
    assert_eq!(r["config"]["order"], "3/2");
    assert_eq!(r["stages"]["fit_erf"]["denominator"].as_array().unwrap().len(), 3);
}
