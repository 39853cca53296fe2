use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lqo_core::io;
use lqo_core::models::{make_fss, make_illustrative};

fn lqo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lqo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> serde_json::Value {
    let out = lqo(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn error_of(out: &Output) -> serde_json::Value {
    let v: serde_json::Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
    v["error"].clone()
}

#[test]
fn generate_illustrative_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let v = ok(&["generate", "illustrative", "--out", s(dir.path())]);
    assert_eq!(v["n"], 6);
    let back = io::load_model(&dir.path().join("illustrative.json")).unwrap();
    let sys = make_illustrative();
    assert_eq!(back.a(), sys.a());
    assert_eq!(back.b(), sys.b());
    assert_eq!(back.c(), sys.c());
    assert_eq!(back.m(), sys.m());
}

#[test]
fn generate_advdiff_size() {
    let dir = tempfile::tempdir().unwrap();
    let v = ok(&[
        "generate",
        "advdiff",
        "--nodes",
        "300",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(v["n"], 300);
    let man = io::read_manifest(&dir.path().join("advdiff-300.json")).unwrap();
    assert_eq!((man.n, man.m, man.p), (300, 2, 1));
}

#[test]
fn generate_fss_is_reproducible() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&d1, &d2] {
        ok(&[
            "generate",
            "fss",
            "--modes",
            "10000",
            "--seed",
            "7",
            "--out",
            s(d.path()),
            "--name",
            "fss",
        ]);
    }
    let mut names: Vec<_> = fs::read_dir(d1.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 1 + 3 + 2);
    for n in &names {
        assert_eq!(
            fs::read(d1.path().join(n)).unwrap(),
            fs::read(d2.path().join(n)).unwrap()
        );
    }
    let back = io::load_model(&d1.path().join("fss.json")).unwrap();
    let sys = make_fss(10_000, 1, 2, &[20, 40], 7).unwrap();
    assert!(back.a().is_sparse());
    assert_eq!(back.a(), sys.a());
    assert_eq!(back.b(), sys.b());
    assert_eq!(back.c(), sys.c());
    assert_eq!(back.m(), sys.m());
}

#[test]
fn reduce_flhnoia_and_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let d = s(dir.path());
    ok(&["generate", "illustrative", "--out", d]);
    let model = dir.path().join("illustrative.json");
    let v = ok(&[
        "reduce",
        "--model",
        s(&model),
        "--method",
        "flhnoia",
        "--order",
        "3",
        "--band",
        "5:6",
        "--diagnostics",
        "--out",
        d,
    ]);
    assert_eq!(v["converged"], true);
    assert!(v["iterations"].as_u64().unwrap() <= 30);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("rom_report.json")).unwrap())
            .unwrap();
    assert_eq!(
        report["eig_history"].as_array().unwrap().len(),
        report["iterations"].as_u64().unwrap() as usize + 1
    );
    assert!(dir.path().join("rom_residuals.json").exists());

    let rom = dir.path().join("rom.json");
    let res = ok(&[
        "residuals",
        "--model",
        s(&model),
        "--rom",
        s(&rom),
        "--band",
        "5:6",
    ]);
    for key in ["op2", "op3", "op4"] {
        assert!(res[key].as_f64().unwrap() < 1e-5, "{key}: {}", res[key]);
    }
    let norm = ok(&[
        "norm",
        "--model",
        s(&model),
        "--rom",
        s(&rom),
        "--band",
        "5:6",
    ]);
    assert!(norm["relative_error"].as_f64().unwrap() < 1e-2);
}

#[test]
fn missing_band_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = s(dir.path());
    ok(&["generate", "illustrative", "--out", d]);
    let model = dir.path().join("illustrative.json");
    let out = lqo(&[
        "reduce",
        "--model",
        s(&model),
        "--method",
        "flbt",
        "--order",
        "2",
        "--out",
        d,
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_of(&out)["kind"], "usage");

    let out = lqo(&[
        "reduce",
        "--model",
        s(&model),
        "--method",
        "magic",
        "--order",
        "2",
        "--out",
        d,
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = lqo(&[
        "reduce",
        "--model",
        s(&model),
        "--method",
        "bt",
        "--order",
        "9",
        "--out",
        d,
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(lqo(&["reduce"]).status.code(), Some(2));
}

#[test]
fn io_and_numerical_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = lqo(&["norm", "--model", s(&dir.path().join("absent.json"))]);
    assert_eq!(out.status.code(), Some(4));
    assert!(error_of(&out)["message"]
        .as_str()
        .unwrap()
        .contains("absent.json"));

    // An unstable A makes every Gramian-based command fail numerically.
    let d = dir.path();
    fs::write(
        d.join("u_A.mtx"),
        "%%MatrixMarket matrix array real general\n1 1\n1\n",
    )
    .unwrap();
    fs::write(
        d.join("u_B.mtx"),
        "%%MatrixMarket matrix array real general\n1 1\n1\n",
    )
    .unwrap();
    fs::write(
        d.join("u_C.mtx"),
        "%%MatrixMarket matrix array real general\n1 1\n1\n",
    )
    .unwrap();
    fs::write(
        d.join("u.json"),
        r#"{"name":"u","n":1,"m":1,"p":1,"files":{"A":"u_A.mtx","B":"u_B.mtx","C":"u_C.mtx","M":[]}}"#,
    )
    .unwrap();
    // p = 1 with no quadratic term lists is a manifest inconsistency.
    assert_eq!(
        lqo(&["norm", "--model", s(&d.join("u.json"))])
            .status
            .code(),
        Some(4)
    );
    fs::write(
        d.join("u_M1.mtx"),
        "%%MatrixMarket matrix coordinate real general\n1 1 0\n",
    )
    .unwrap();
    fs::write(
        d.join("u.json"),
        r#"{"name":"u","n":1,"m":1,"p":1,"files":{"A":"u_A.mtx","B":"u_B.mtx","C":"u_C.mtx","M":["u_M1.mtx"]}}"#,
    )
    .unwrap();
    let out = lqo(&["norm", "--model", s(&d.join("u.json"))]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(error_of(&out)["kind"], "numerical");
}

#[test]
fn sweep_contract_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let d = s(dir.path());
    ok(&["generate", "illustrative", "--out", d]);
    let model = dir.path().join("illustrative.json");
    // The model compared against itself.
    let v = ok(&[
        "sweep",
        "--model",
        s(&model),
        "--rom",
        s(&model),
        "--grid",
        "1:100:200:log",
        "--out",
        d,
    ]);
    assert_eq!(v["rows"], 200);
    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 201);
    let header: Vec<&str> = lines[0].split(',').collect();
    assert_eq!(header[0], "nu");
    assert_eq!(header.len(), 1 + 3 * 2);
    for row in &lines[1..] {
        let vals: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(vals.len(), header.len());
        for (h, v) in header.iter().zip(&vals) {
            if h.ends_with("_relerr") {
                assert!(*v <= 1e-10, "{h} = {v}");
            }
        }
    }

    ok(&[
        "reduce",
        "--model",
        s(&model),
        "--method",
        "bt",
        "--order",
        "2",
        "--out",
        d,
    ]);
    let rom = dir.path().join("rom.json");
    for name in ["a", "b"] {
        ok(&[
            "sweep",
            "--model",
            s(&model),
            "--rom",
            s(&rom),
            "--grid",
            "0.5:50:40",
            "--out",
            d,
            "--name",
            name,
        ]);
    }
    assert_eq!(
        fs::read(dir.path().join("a.csv")).unwrap(),
        fs::read(dir.path().join("b.csv")).unwrap()
    );
}

#[test]
fn reduce_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = s(dir.path());
    ok(&[
        "generate", "advdiff", "--nodes", "40", "--out", d, "--name", "ad",
    ]);
    let model = dir.path().join("ad.json");
    for name in ["r1", "r2"] {
        ok(&[
            "reduce",
            "--model",
            s(&model),
            "--method",
            "homora",
            "--order",
            "3",
            "--seed",
            "4",
            "--out",
            d,
            "--name",
            name,
        ]);
    }
    for part in ["A", "B", "C", "M1"] {
        assert_eq!(
            fs::read(dir.path().join(format!("r1_{part}.mtx"))).unwrap(),
            fs::read(dir.path().join(format!("r2_{part}.mtx"))).unwrap()
        );
    }
    let strip = |n: &str| {
        let mut v: serde_json::Value = serde_json::from_str(
            &fs::read_to_string(dir.path().join(format!("{n}_report.json"))).unwrap(),
        )
        .unwrap();
        v.as_object_mut().unwrap().remove("timings");
        v
    };
    assert_eq!(strip("r1"), strip("r2"));
}
