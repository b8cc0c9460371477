//! End-to-end tests of the `cocycle` binary over fixture files.

use std::collections::VecDeque;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use cocycle::gluing::{tile_cover, GridDomain, LocalFunctionFamily, Patch};
use cocycle::io::{family_json, grid_csv, parse_grid_csv};
use serde_json::Value;
use tempfile::TempDir;

struct Output {
    code: i32,
    stdout: String,
    stderr: String,
}

fn cocycle(dir: &Path, args: &[&str]) -> Output {
    cocycle_env(dir, args, &[])
}

fn cocycle_env(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_cocycle"))
        .current_dir(dir)
        .args(args)
        .env_remove("COCYCLE_THREADS")
        .envs(env.iter().copied())
        .output()
        .expect("binary runs");
    Output {
        code: out.status.code().expect("exited normally"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

/// Annulus cover with unit couplings, plus a zero coupling on a triangle.
fn fixtures() -> TempDir {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    write(
        p,
        "ring.json",
        r#"{"sets":["A","B","C","D"],"pairs":[["A","B"],["B","C"],["C","D"],["D","A"]]}"#,
    );
    write(
        p,
        "ring_d.json",
        r#"{"tolerance":1e-9,"values":[["A","B",1],["B","C",1],["C","D",1],["D","A",1]]}"#,
    );
    write(
        p,
        "tri.json",
        r#"{"sets":["U","V","W"],"pairs":[["U","V"],["V","W"],["U","W"]],"triples":[["U","V","W"]]}"#,
    );
    write(
        p,
        "tri_zero.json",
        r#"{"values":[["U","V",0],["V","W",0],["U","W",0]]}"#,
    );
    write(
        p,
        "tri_exact.json",
        r#"{"values":[["U","V",1.5],["V","W",-0.25],["U","W",1.25]]}"#,
    );
    write(p, "tri_bad.json", r#"{"values":[["U","V",1],["V","W",1],["U","W",1]]}"#);
    write(
        p,
        "tri_onesided.json",
        r#"{"values":[["U","V",1],["V","U",-0.5],["V","W",0],["U","W",1]]}"#,
    );
    write(
        p,
        "squares.json",
        r#"{"charts":{"L":{"rect":[0,0,1,1]},"R":{"rect":[0.5,0,1.5,1]}}}"#,
    );
    write(p, "squares_d.json", r#"{"values":[["L","R",2.5]]}"#);
    write(p, "across.json", r#"{"vertices":[[0.25,0.5],[1.25,0.5]]}"#);
    write(p, "outside.json", r#"{"vertices":[[0.25,0.5],[3,0.5]]}"#);
    write(p, "broken.json", r#"{"sets":["A","B"],"pairs":[["A","#);
    write(p, "unknown.json", r#"{"sets":["A"],"pairs":[["A","Z"]]}"#);
    dir
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|e| panic!("not JSON ({e}): {text}"))
}

#[test]
fn zero_coupling_solves_to_zeros() {
    let dir = fixtures();
    let out = cocycle(dir.path(), &["solve", "tri.json", "tri_zero.json"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let v = json(&out.stdout);
    assert_eq!(v["base"], "U");
    for id in ["U", "V", "W"] {
        assert_eq!(v["values"][id].as_f64(), Some(0.0));
    }
}

#[test]
fn exact_coupling_solves_at_requested_base() {
    let dir = fixtures();
    let out = cocycle(dir.path(), &["solve", "tri.json", "tri_exact.json", "--base", "V"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let v = json(&out.stdout);
    assert_eq!(v["base"], "V");
    assert_eq!(v["values"]["U"].as_f64(), Some(-1.5));
    assert_eq!(v["values"]["V"].as_f64(), Some(0.0));
    assert_eq!(v["values"]["W"].as_f64(), Some(-0.25));
}

#[test]
fn annulus_is_obstructed_with_holonomy_four() {
    let dir = fixtures();
    let out = cocycle(dir.path(), &["solve", "ring.json", "ring_d.json"]);
    assert_eq!(out.code, 1);
    let v = json(&out.stdout);
    assert_eq!(v["cycles"].as_array().unwrap().len(), 1);
    assert_eq!(v["cycles"][0]["holonomy"].as_f64(), Some(4.0));
    assert_eq!(v["cycles"][0]["nodes"], serde_json::json!(["A", "B", "C", "D"]));
    assert_eq!(v["max"].as_f64(), Some(4.0));

    let env = cocycle(dir.path(), &["solve", "ring.json", "ring_d.json", "--json"]);
    let v = json(&env.stdout);
    assert_eq!(v["status"], "obstructed");
    assert_eq!(v["exit"], 1);
    assert_eq!(v["result"]["max"].as_f64(), Some(4.0));
}

#[test]
fn holonomy_reports_and_succeeds() {
    let dir = fixtures();
    let out = cocycle(dir.path(), &["holonomy", "ring.json", "ring_d.json"]);
    assert_eq!(out.code, 0);
    assert_eq!(json(&out.stdout)["max"].as_f64(), Some(4.0));
    let out = cocycle(dir.path(), &["holonomy", "tri.json", "tri_bad.json"]);
    assert_eq!(out.code, 0);
    assert_eq!(json(&out.stdout)["cycles"].as_array().unwrap().len(), 1);
}

#[test]
fn validate_names_the_offending_triple() {
    let dir = fixtures();
    let out = cocycle(dir.path(), &["validate", "tri.json", "tri_bad.json"]);
    assert_eq!(out.code, 1);
    let v = json(&out.stdout);
    assert_eq!(v["clean"], false);
    let t = &v["additivity_violations"][0];
    assert_eq!(t["triple"], serde_json::json!(["U", "V", "W"]));
    assert_eq!(t["magnitude"].as_f64(), Some(1.0));

    let out = cocycle(dir.path(), &["validate", "tri.json", "tri_exact.json"]);
    assert_eq!(out.code, 0);
    assert_eq!(json(&out.stdout)["clean"], true);
}

#[test]
fn chain_reports_charts_and_sum() {
    let dir = fixtures();
    let out = cocycle(dir.path(), &["chain", "squares.json", "across.json", "squares_d.json"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let v = json(&out.stdout);
    assert_eq!(v["charts"], serde_json::json!(["L", "R"]));
    assert_eq!(v["chain_sum"].as_f64(), Some(2.5));
    let bps: Vec<f64> = v["breakpoints"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert_eq!(bps, [0.0, 0.5, 1.0]);

    let out = cocycle(dir.path(), &["chain", "squares.json", "outside.json", "squares_d.json"]);
    assert_eq!(out.code, 1);
    assert!(
        json(&out.stdout)["error"].as_str().unwrap().contains("no chart"),
        "{}",
        out.stdout
    );
}

fn l_shape_fixture(dir: &Path, grad: impl Fn(f64, f64) -> (f64, f64), spacing: f64) -> (GridDomain, Vec<Option<f64>>) {
    let domain = GridDomain::from_fn(64, 64, spacing, |c, r| !(c >= 32 && r >= 32)).unwrap();
    let (mut gx, mut gy) = (Vec::new(), Vec::new());
    for i in 0..64 * 64 {
        let (c, r) = (i % 64, i / 64);
        if domain.is_masked(c, r) {
            let (a, b) = grad(c as f64 * spacing, r as f64 * spacing);
            gx.push(Some(a));
            gy.push(Some(b));
        } else {
            gx.push(None);
            gy.push(None);
        }
    }
    write(
        dir,
        "header.json",
        &format!(r#"{{"width":64,"height":64,"spacing":{spacing}}}"#),
    );
    write(dir, "gx.csv", &grid_csv(64, &gx));
    write(dir, "gy.csv", &grid_csv(64, &gy));

    // Breadth-first trapezoid integration from the first masked node.
    let mut oracle: Vec<Option<f64>> = vec![None; 64 * 64];
    oracle[0] = Some(0.0);
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        let (c, r) = ((i % 64) as isize, (i / 64) as isize);
        for (nc, nr) in [(c + 1, r), (c - 1, r), (c, r + 1), (c, r - 1)] {
            if !(0..64).contains(&nc) || !(0..64).contains(&nr) {
                continue;
            }
            let j = (nr * 64 + nc) as usize;
            if gx[j].is_none() || oracle[j].is_some() {
                continue;
            }
            let dx = (nc - c) as f64 * spacing;
            let dy = (nr - r) as f64 * spacing;
            let inc = 0.5 * (gx[i].unwrap() + gx[j].unwrap()) * dx + 0.5 * (gy[i].unwrap() + gy[j].unwrap()) * dy;
            oracle[j] = Some(oracle[i].unwrap() + inc);
            queue.push_back(j);
        }
    }
    (domain, oracle)
}

fn aligned_max_diff(a: &[Option<f64>], b: &[Option<f64>]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).filter_map(|(x, y)| Some((*x)? - (*y)?)).collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    d.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max)
}

#[test]
fn poincare_matches_breadth_first_oracle() {
    let dir = TempDir::new().unwrap();
    let (domain, oracle) = l_shape_fixture(dir.path(), |x, y| (x.cos() * y.cosh(), x.sin() * y.sinh()), 1e-3);
    let out = cocycle(
        dir.path(),
        &["poincare", "header.json", "gx.csv", "gy.csv", "--out", "f.csv"],
    );
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stdout.is_empty());
    let f = parse_grid_csv(&fs::read_to_string(dir.path().join("f.csv")).unwrap(), 64, 64).unwrap();
    for (i, v) in f.iter().enumerate() {
        assert_eq!(v.is_some(), domain.mask()[i]);
    }
    assert!(aligned_max_diff(&f, &oracle) <= 1e-9);
}

#[test]
fn poincare_flags_curl_and_circulation() {
    let dir = TempDir::new().unwrap();
    l_shape_fixture(dir.path(), |x, y| (-y, x), 0.1);
    let out = cocycle(dir.path(), &["poincare", "header.json", "gx.csv", "gy.csv"]);
    assert_eq!(out.code, 1);
    assert!(
        json(&out.stdout)["error"].as_str().unwrap().contains("plaquette"),
        "{}",
        out.stdout
    );
}

#[test]
fn glue_recovers_function_up_to_constant() {
    let dir = TempDir::new().unwrap();
    let domain = GridDomain::from_fn(16, 16, 0.25, |_, _| true).unwrap();
    let f = |x: f64, y: f64| x * x - y;
    let patches = tile_cover(&domain, 4)
        .unwrap()
        .into_iter()
        .enumerate()
        .map(|(k, t)| {
            let samples = t
                .rect
                .nodes()
                .map(|(c, r)| {
                    let (x, y) = domain.coords(c, r);
                    (domain.index(c, r), f(x, y) + k as f64 * 0.75)
                })
                .collect();
            (t.id, Patch::new(t.rect, samples))
        })
        .collect();
    let family = LocalFunctionFamily {
        width: 16,
        height: 16,
        spacing: 0.25,
        patches,
    };
    write(dir.path(), "family.json", &family_json(&family).unwrap());
    let out = cocycle(dir.path(), &["glue", "family.json"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let got = parse_grid_csv(&out.stdout, 16, 16).unwrap();
    let want: Vec<Option<f64>> = (0..256)
        .map(|i| {
            let (x, y) = domain.coords(i % 16, i / 16);
            Some(f(x, y))
        })
        .collect();
    assert!(aligned_max_diff(&got, &want) <= 1e-12);

    let env = cocycle(dir.path(), &["glue", "family.json", "--json"]);
    let v = json(&env.stdout);
    assert_eq!(v["status"], "ok");
    assert_eq!(v["result"]["values"].as_array().unwrap().len(), 16);
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = fixtures();
    let cases: &[(&[&str], i32)] = &[
        (&["solve", "tri.json", "tri_zero.json"], 0),
        (&["solve", "tri.json", "tri_exact.json", "--tol", "1e-12"], 0),
        (&["validate", "tri.json", "tri_exact.json"], 0),
        (&["holonomy", "ring.json", "ring_d.json"], 0),
        (&["chain", "squares.json", "across.json", "squares_d.json"], 0),
        (&["solve", "ring.json", "ring_d.json"], 1),
        (&["validate", "tri.json", "tri_bad.json"], 1),
        (&["validate", "tri.json", "tri_onesided.json"], 1),
        (&["solve", "tri.json", "tri_onesided.json"], 1),
        (&["holonomy", "tri.json", "tri_onesided.json"], 0),
        (&["chain", "squares.json", "outside.json", "squares_d.json"], 1),
        (&["solve", "missing.json", "ring_d.json"], 2),
        (&["solve", "broken.json", "ring_d.json"], 2),
        (&["solve", "unknown.json", "ring_d.json"], 2),
        (&["solve", "ring.json", "tri_zero.json"], 2),
        (&["solve", "ring.json", "ring_d.json", "--strict"], 2),
        (&["solve", "ring.json", "ring_d.json", "--tol", "0"], 2),
        (&["solve", "ring.json", "ring_d.json", "--tol", "-1"], 2),
        (&["solve", "ring.json", "ring_d.json", "--base", "Z"], 2),
        (
            &["chain", "squares.json", "across.json", "squares_d.json", "--start", "R"],
            2,
        ),
        (&["glue", "ring.json"], 2),
        (&["frobnicate"], 2),
    ];
    for (args, want) in cases {
        let out = cocycle(dir.path(), args);
        assert_eq!(out.code, *want, "{args:?}: {}{}", out.stdout, out.stderr);
        if *want == 2 {
            assert!(!out.stderr.is_empty(), "{args:?} gave no diagnostic");
        }
        let mut with_json = args.to_vec();
        with_json.push("--json");
        let out = cocycle(dir.path(), &with_json);
        assert_eq!(out.code, *want, "{with_json:?}");
        if *want != 2 || args[0] != "frobnicate" {
            let v = json(out.stdout.trim());
            assert_eq!(v["exit"], *want, "{with_json:?}");
        }
    }
}

#[test]
fn errors_name_the_offending_item() {
    let dir = fixtures();
    let out = cocycle(dir.path(), &["solve", "unknown.json", "ring_d.json"]);
    assert!(out.stderr.contains('Z'), "{}", out.stderr);
    let out = cocycle(dir.path(), &["solve", "ring.json", "ring_d.json", "--strict"]);
    assert!(out.stderr.contains("(B, A)"), "{}", out.stderr);
    let out = cocycle(dir.path(), &["solve", "ring.json", "ring_d.json", "--base", "Z"]);
    assert!(out.stderr.contains('Z'), "{}", out.stderr);
}

#[test]
fn thread_cap_is_honoured_and_checked() {
    let dir = fixtures();
    let args = ["chain", "squares.json", "across.json", "squares_d.json"];
    let one = cocycle_env(dir.path(), &args, &[("COCYCLE_THREADS", "1")]);
    let many = cocycle_env(dir.path(), &args, &[("COCYCLE_THREADS", "4")]);
    assert_eq!(one.code, 0);
    assert_eq!(one.stdout, many.stdout);
    let bad = cocycle_env(dir.path(), &args, &[("COCYCLE_THREADS", "zero")]);
    assert_eq!(bad.code, 2);
    assert!(bad.stderr.contains("COCYCLE_THREADS"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = fixtures();
    l_shape_fixture(dir.path(), |x, _| (2.0 * x, 1.0), 0.05);
    let runs: &[&[&str]] = &[
        &["validate", "tri.json", "tri_bad.json"],
        &["solve", "tri.json", "tri_exact.json"],
        &["solve", "ring.json", "ring_d.json"],
        &["holonomy", "ring.json", "ring_d.json"],
        &["chain", "squares.json", "across.json", "squares_d.json"],
        &["poincare", "header.json", "gx.csv", "gy.csv", "--tile", "6"],
    ];
    for args in runs {
        let mut outputs = Vec::new();
        for k in 0..2 {
            let out_name = format!("out{k}");
            let mut a = args.to_vec();
            a.extend(["--out", &out_name]);
            let run = cocycle(dir.path(), &a);
            outputs.push((run.code, fs::read(dir.path().join(&out_name)).unwrap()));
            let plain = cocycle(dir.path(), args);
            assert_eq!(
                plain.stdout.as_bytes(),
                outputs[k].1.as_slice(),
                "{args:?}: --out differs from stdout"
            );
        }
        assert_eq!(outputs[0], outputs[1], "{args:?}");
    }
}
