mod common;

use std::path::PathBuf;

use serde_json::{json, Value};

use lrising::{build_triangles, enumerate, EventSpec, ModelParams, Observables};

use common::{corr, histogram, Brute};

const ALPHA: f64 = 0.3;
const BIG_J: f64 = 5.0;
const BETA: f64 = 1.0;
const L: usize = 5;

const SHAPES: [&str; 6] = ["-----------", "+++-+++++++", "+--+-++--++", "-+-+-+-+-+-", "++---+-+---", "+-+++++++-+"];

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/l5_a03_j5_b1.json")
}

fn parse(s: &str) -> Vec<i8> {
    s.chars().map(|c| if c == '-' { -1 } else { 1 }).collect()
}

fn compute() -> Value {
    let b = Brute::new(ALPHA, BIG_J, L);
    let (log_z, w) = b.weights(BETA, |_| true);
    let site: Vec<f64> = (0..b.n()).map(|i| w.iter().map(|(s, p)| s[i] as f64 * p).sum()).collect();
    let shapes: Vec<Value> = SHAPES
        .iter()
        .map(|s| {
            let sp = parse(s);
            json!({ "spins": s, "energy": b.energy(&sp) })
        })
        .collect();
    json!({
        "alpha": ALPHA, "J": BIG_J, "beta": BETA, "L": L,
        "log_z": log_z,
        "site_means": site,
        "corr_center": corr(L, &w),
        "corr_left_edge": corr(0, &w),
        "histogram": histogram(b.n(), &w),
        "shapes": shapes,
    })
}

fn floats(v: &Value) -> Vec<f64> {
    match v {
        Value::Array(a) => a.iter().flat_map(floats).collect(),
        Value::Number(n) => vec![n.as_f64().unwrap()],
        Value::Object(o) => o.values().flat_map(floats).collect(),
        _ => vec![],
    }
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300) || (a - b).abs() < 1e-15
}

fn frozen() -> Value {
    let path = golden_path();
    if std::env::var_os("GOLDEN_BLESS").is_some() {
        std::fs::write(&path, serde_json::to_string_pretty(&compute()).unwrap() + "\n").unwrap();
    }
    serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

#[test]
fn brute_force_matches_frozen() {
    let g = frozen();
    let now = compute();
    let (a, b) = (floats(&g), floats(&now));
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!(close(*x, *y, 1e-12), "{x} vs {y}");
    }
}

#[test]
fn oracle_matches_frozen() {
    let g = frozen();
    let p = ModelParams::new(ALPHA, BIG_J, BETA, L).unwrap();
    let obs = Observables { pairs: true, histogram: true, ..Default::default() };
    let r = enumerate(&p, &[EventSpec::All], &obs).unwrap();
    let e = &r.events[0];
    assert!(close(r.log_z, g["log_z"].as_f64().unwrap(), 1e-12), "{} vs {}", r.log_z, g["log_z"]);
    let cmp = |got: &[f64], key: &str| {
        for (x, y) in got.iter().zip(floats(&g[key])) {
            assert!((x - y).abs() < 1e-11, "{key}: {x} vs {y}");
        }
    };
    cmp(&e.site_means, "site_means");
    let pm = e.pair_means.as_ref().unwrap();
    cmp(&pm[L], "corr_center");
    cmp(&pm[0], "corr_left_edge");
    cmp(e.histogram.as_ref().unwrap(), "histogram");
}

#[test]
fn energies_match_frozen() {
    let g = frozen();
    let p = ModelParams::new(ALPHA, BIG_J, BETA, L).unwrap();
    let k = lrising::build_kernel(&p).unwrap();
    for sh in g["shapes"].as_array().unwrap() {
        let s = parse(sh["spins"].as_str().unwrap());
        let e = lrising::hamiltonian(&s, &k);
        assert!(close(e, sh["energy"].as_f64().unwrap(), 1e-11));
        let f = build_triangles(&s);
        assert!(f.invariants_hold());
    }
}

#[test]
fn triangle_families_frozen() {
    let want: [&[(i64, i64)]; 6] = [
        &[(-6, 5)],
        &[(-3, -2)],
        &[(-5, 3), (-3, -2), (-1, 1)],
        &[(-6, -5), (-4, -3), (-2, -1), (0, 1), (2, 3), (4, 5)],
        &[(-4, 5), (-1, 0), (1, 2)],
        &[(-5, -4), (3, 4)],
    ];
    for (s, w) in SHAPES.iter().zip(want) {
        let f = build_triangles(&parse(s));
        let got: Vec<(i64, i64)> = f.triangles().iter().map(|t| (t.i, t.j)).collect();
        assert_eq!(got, w, "{s}");
    }
}
