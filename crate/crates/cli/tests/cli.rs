use std::path::Path;
use std::process::Command;

use hyperstat::geometry::{
    param_h_to_l, point_disk_to_h, point_h_to_disk, point_h_to_l, point_l_to_h, DiskPoint, HyperboloidPoint,
    LorentzParam, SpdParam2, UpperHalfPoint,
};
use hyperstat::hyperboloid;
use hyperstat::mixtures::{mixture_log_likelihood, Component, Family, Mixture, Point};
use serde_json::Value;

fn hyperstat(args: &[&str], env: &[(&str, &str)]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_hyperstat"))
        .args(args)
        .envs(env.iter().copied())
        .env_remove(if env.is_empty() { "HYPERSTAT_THREADS" } else { "HYPERSTAT_UNUSED" })
        .output()
        .expect("binary runs");
    (
        out.status.code().expect("exited normally"),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn run(args: &[&str]) -> (i32, String, String) {
    hyperstat(args, &[])
}

/// Runs a command expected to print JSON, checks it against `schema` and the
/// 17-significant-digit rule, and returns the exit code and the value.
fn json_cmd(args: &[&str], schema: &str) -> (i32, Value) {
    let (code, out, err) = run(args);
    let v: Value = serde_json::from_str(&out).unwrap_or_else(|e| panic!("{args:?}: {e}\n{out}\n{err}"));
    validate(schema, &v);
    check_digits(&out);
    (code, v)
}

fn validate(schema: &str, v: &Value) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(format!("{schema}.schema.json"));
    let s: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let compiled = jsonschema::JSONSchema::compile(&s).expect("schema compiles");
    if let Err(errors) = compiled.validate(v) {
        let msgs: Vec<String> = errors.map(|e| e.to_string()).collect();
        panic!("{schema}: {msgs:?}\n{v}");
    };
}

/// Every non-integer numeric token carries exactly 17 significant digits.
fn check_digits(text: &str) {
    let mut in_string = false;
    let mut token = String::new();
    for ch in text.chars().chain(std::iter::once(' ')) {
        if ch == '"' {
            in_string = !in_string;
        }
        if !in_string && (ch.is_ascii_digit() || "+-.eE".contains(ch)) {
            token.push(ch);
            continue;
        }
        if token.contains('.') && token != "0.0" {
            let mantissa = token.split(['e', 'E']).next().unwrap();
            let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
            let sig = digits.trim_start_matches('0');
            assert_eq!(sig.len(), 17, "{token} in {text}");
        }
        token.clear();
    }
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

fn arr(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(f).collect()
}

const EX1: &str = "[[4,0.25],[0.25,0.5]]";
const EX2: &str = "[[0.5,0.25],[0.25,2]]";

#[test]
fn divergence_of_the_worked_example() {
    let (code, v) = json_cmd(&["divergence", "--measure", "kl", "--theta", EX1, "--theta2", EX2], "divergence");
    assert_eq!(code, 0);
    assert_eq!(v["measure"], "kl");
    assert!((f(&v["value"]) - 5.360).abs() < 5e-3);
    assert_eq!(v["finite"], true);
    // The object form gives the same result.
    let (_, w) = json_cmd(
        &["divergence", "--measure", "kl", "--theta", r#"{"a":4,"b":0.25,"c":0.5}"#, "--theta2", EX2],
        "divergence",
    );
    assert_eq!(v, w);
}

#[test]
fn infinite_divergence_exits_3() {
    let (code, v) = json_cmd(
        &["divergence", "--measure", "neyman", "--theta", "[[4,0],[0,4]]", "--theta2", "[[1,0],[0,1]]"],
        "divergence",
    );
    assert_eq!(code, 3);
    assert_eq!(v["finite"], false);
    assert!(v["value"].is_null());
}

#[test]
fn invalid_parameters_exit_2_with_diagnostic() {
    for (theta, needle) in [
        ("[[1,2],[2,1]]", "ac - b^2 > 0"),
        ("[[-1,0],[0,1]]", "a > 0"),
        ("[[4,0.25],[0.26,0.5]]", "not symmetric"),
        ("[1,2,0]", "theta_0^2 - sum theta_i^2 > 0"),
        ("[-1,0,0]", "theta_0 > 0"),
        ("{oops", "not valid JSON"),
    ] {
        let (code, out, err) = run(&["divergence", "--measure", "kl", "--theta", theta, "--theta2", "[[1,0],[0,1]]"]);
        assert_eq!(code, 2, "{theta}: {err}");
        assert!(out.is_empty());
        assert!(err.contains(needle), "{theta}: {err}");
    }
    // Families must agree.
    let (code, _, err) = run(&["divergence", "--measure", "kl", "--theta", "[2,1,1]", "--theta2", "[[1,0],[0,1]]"]);
    assert_eq!(code, 2, "{err}");
    let (code, _, _) = run(&["divergence", "--measure", "kl", "--theta", "[2,1,1]", "--theta2", "[2,1,1]", "--alpha", "0.3"]);
    assert_eq!(code, 2);
    let (code, _, _) = run(&["divergence", "--measure", "bogus", "--theta", "[2,1,1]", "--theta2", "[2,1,1]"]);
    assert_eq!(code, 2);
}

#[test]
fn divergences_agree_across_the_correspondence() {
    let pairs = [(EX1, EX2), ("[[1,0.2],[0.2,1.5]]", "[[1.2,-0.1],[-0.1,1.1]]"), ("[[2,0.5],[0.5,1]]", "[[1,0],[0,1]]")];
    for (a, b) in pairs {
        let (_, la) = json_cmd(&["convert", "--what", "param", "--from", "upper-half", "--to", "hyperboloid", "--value", a], "convert");
        let (_, lb) = json_cmd(&["convert", "--what", "param", "--from", "upper-half", "--to", "hyperboloid", "--value", b], "convert");
        let (la, lb) = (la.to_string(), lb.to_string());
        for m in ["kl", "hellinger", "neyman", "jeffreys", "skew-jensen", "chernoff"] {
            let (c1, p) = json_cmd(&["divergence", "--measure", m, "--theta", a, "--theta2", b], "divergence");
            let (c2, q) = json_cmd(&["divergence", "--measure", m, "--theta", &la, "--theta2", &lb], "divergence");
            assert_eq!(c1, c2);
            assert_eq!(p["finite"], q["finite"], "{m}");
            if p["finite"] == true {
                let (x, y) = (f(&p["value"]), f(&q["value"]));
                assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0), "{m}: {x} vs {y}");
            }
        }
    }
}

#[test]
fn entropy_fim_and_invariant() {
    let (code, v) = json_cmd(&["entropy", "--theta", EX1], "entropy");
    assert_eq!(code, 0);
    assert!((f(&v["entropy"]) + 0.6075).abs() < 1e-4);
    // The modified entropy is shared by corresponding parameters.
    let (_, w) = json_cmd(&["entropy", "--theta", "[4.5,3.5,0.5]"], "entropy");
    assert!((f(&v["modified_entropy"]) - f(&w["modified_entropy"])).abs() < 1e-12);

    let (_, m) = json_cmd(&["fim", "--theta", "[1,0,0]"], "fim");
    let want = [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.0]];
    for (i, row) in m.as_array().unwrap().iter().enumerate() {
        for (j, x) in arr(row).iter().enumerate() {
            assert!((x - want[i][j]).abs() < 1e-12);
        }
    }
    let (_, m) = json_cmd(&["fim", "--theta", "[3,1,1,1]"], "fim");
    assert_eq!(m.as_array().unwrap().len(), 4);

    let (_, t) = json_cmd(&["invariant", "--theta", "[[1,0],[0,1]]", "--theta2", "[[1,0],[0,1]]"], "invariant");
    assert_eq!(arr(&t), vec![1.0, 1.0, 2.0]);
}

#[test]
fn sample_output_format() {
    let (code, out, _) = run(&["sample", "--theta", "[2,1,1]", "--n", "0", "--seed", "1"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("# family=hyperboloid") && lines[0].contains("n=0") && lines[0].contains("seed=1"));
    assert_eq!(lines[1], "x1,x2");

    let (_, out, _) = run(&["sample", "--theta", EX1, "--n", "5", "--seed", "9"]);
    assert_eq!(out.lines().nth(1), Some("x,y"));
    assert_eq!(out.lines().count(), 7);
    for row in out.lines().skip(2) {
        let y: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert!(y > 0.0);
    }

    let a = run(&["sample", "--theta", "[2,1,1]", "--n", "1000", "--seed", "5"]);
    let b = run(&["sample", "--theta", "[2,1,1]", "--n", "1000", "--seed", "5"]);
    let c = run(&["sample", "--theta", "[2,1,1]", "--n", "1000", "--seed", "6"]);
    assert_eq!(a, b);
    assert_ne!(a.1, c.1);

    let (code, _, err) = run(&["sample", "--theta", "[3,1,1,1]", "--n", "5", "--seed", "1"]);
    assert_eq!(code, 4, "{err}");
    let (code, _, _) = run(&["sample", "--theta", "[1,1,1]", "--n", "5", "--seed", "1"]);
    assert_eq!(code, 2);
}

#[test]
fn sample_mean_matches_moment() {
    let (code, out, _) = run(&["sample", "--theta", "[2,1,1]", "--n", "1000000", "--seed", "11"]);
    assert_eq!(code, 0);
    let xs: Vec<f64> = out.lines().skip(2).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(xs.len(), 1_000_000);
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let want: f64 = hyperboloid::grad_cumulant(&LorentzParam::new(vec![2.0, 1.0, 1.0]).unwrap())[1];
    assert!((want - 1.2071).abs() < 1e-4);
    assert!((mean - want).abs() < 3.0 * (var / n).sqrt(), "{mean} vs {want}");
}

fn estimate(extra: &[&str]) -> (i32, Value) {
    let mut args = vec!["estimate"];
    args.extend_from_slice(extra);
    json_cmd(&args, "estimate")
}

#[test]
fn estimate_reproduces_reference_rows() {
    let (code, v) = estimate(&[
        "--measure", "tv", "--method", "plugin", "--theta", "[1,0,0]", "--theta2", "[2,1,1]", "--n", "1000000", "--seed", "20230101",
    ]);
    assert_eq!(code, 0);
    assert!((f(&v["estimate"]) - 0.467).abs() < 0.012, "{v}");
    let (_, v) = estimate(&[
        "--measure", "tv", "--method", "mc2", "--theta", "[4,1,1]", "--theta2", "[4,3,2]", "--n", "1000000", "--seed", "20230101",
    ]);
    assert!((f(&v["estimate"]) - 0.710).abs() < 0.012, "{v}");
    assert!(v["sigma"].is_null());
}

#[test]
fn estimate_is_deterministic_and_shards_keep_sigma() {
    let base = ["--measure", "tv", "--method", "mc1-t7", "--theta", "[2,1,1]", "--theta2", "[1,0,0]", "--n", "60000", "--seed", "4"];
    let with = |shards: &str| {
        let mut a = base.to_vec();
        a.extend_from_slice(&["--shards", shards]);
        estimate(&a).1
    };
    let one = with("1");
    assert_eq!(one, estimate(&base).1);
    let three = with("3");
    assert_eq!(three, with("3"));
    assert_ne!(one["estimate"], three["estimate"]);
    assert_eq!(one["sigma"], three["sigma"]);
    assert_eq!(three["n"], 60000);
    // Thread count never changes the output.
    let (_, a, _) = hyperstat(&["estimate", "--measure", "kl", "--method", "mc2", "--theta", "[2,1,1]", "--theta2", "[1,0,0]", "--n", "50000", "--seed", "2"], &[("HYPERSTAT_THREADS", "1")]);
    let (_, b, _) = hyperstat(&["estimate", "--measure", "kl", "--method", "mc2", "--theta", "[2,1,1]", "--theta2", "[1,0,0]", "--n", "50000", "--seed", "2"], &[("HYPERSTAT_THREADS", "3")]);
    assert_eq!(a, b);
    let (code, _, _) = hyperstat(&["invariant", "--theta", "[2,1,1]", "--theta2", "[1,0,0]"], &[("HYPERSTAT_THREADS", "zero")]);
    assert_eq!(code, 2);
}

#[test]
fn estimate_verify_and_errors() {
    let common = ["--theta", "[[1,0.2],[0.2,1.5]]", "--theta2", "[[1.2,-0.1],[-0.1,1.1]]", "--n", "200000", "--seed", "8"];
    let (code, v) = estimate(&[&["--measure", "kl", "--method", "mc2", "--verify"][..], &common[..]].concat());
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["verify"]["pass"], true);
    assert_eq!(v["family"], "poincare");
    // A heavily truncated disk biases MC2 far beyond 4 standard errors.
    let (code, v) = estimate(&[&["--measure", "kl", "--method", "mc2", "--eps", "0.6", "--verify"][..], &common[..]].concat());
    assert_eq!(code, 1, "{v}");
    assert_eq!(v["verify"]["pass"], false);

    for bad in [
        &["--measure", "tv", "--method", "mc2", "--verify"][..],
        &["--measure", "kl", "--method", "plugin", "--sigma", "2"][..],
        &["--measure", "kl", "--method", "plugin", "--eps", "0.1"][..],
        &["--measure", "kl", "--method", "mc1-logistic", "--sigma", "-1"][..],
        &["--measure", "kl", "--method", "plugin", "--shards", "0"][..],
    ] {
        let mut args = vec!["estimate"];
        args.extend_from_slice(bad);
        args.extend_from_slice(&common);
        let (code, _, err) = run(&args);
        assert_eq!(code, 2, "{bad:?}: {err}");
    }
    let (code, _, _) = run(&["estimate", "--measure", "kl", "--method", "mc2", "--theta", "[3,1,1,1]", "--theta2", "[3,1,1,1]", "--n", "10", "--seed", "1"]);
    assert_eq!(code, 4);
}

fn write_mixture_csv(path: &Path) {
    // 0.35 · H(5,0,0) + 0.65 · H(5 cosh 2, 5 sinh 2, 0), drawn with the sampler.
    let b: f64 = 2.0;
    let far = format!("[{},{},0]", 5.0 * b.cosh(), 5.0 * b.sinh());
    let (_, near, _) = run(&["sample", "--theta", "[5,0,0]", "--n", "1750", "--seed", "21"]);
    let (_, far, _) = run(&["sample", "--theta", &far, "--n", "3250", "--seed", "22"]);
    let mut text = String::from("# two-component test mixture\nx1,x2\n");
    for part in [&near, &far] {
        for line in part.lines().skip(2) {
            text.push_str(line);
            text.push('\n');
        }
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn fit_recovers_mixture_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("points.csv");
    write_mixture_csv(&input);
    let (o1, o2) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for o in [&o1, &o2] {
        let (code, out, err) = run(&[
            "fit", "--input", input.to_str().unwrap(), "--family", "hyperboloid", "--k", "2", "--seed", "3", "--out", o.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{err}");
        assert!(out.is_empty());
    }
    let text = std::fs::read_to_string(&o1).unwrap();
    assert_eq!(text, std::fs::read_to_string(&o2).unwrap());
    check_digits(&text);
    let v: Value = serde_json::from_str(&text).unwrap();
    validate("model", &v);
    assert_eq!(v["d"], 2);
    let comps: Vec<Vec<f64>> = v["components"].as_array().unwrap().iter().map(arr).collect();
    let weights = arr(&v["weights"]);
    let near = if comps[0][1].abs() < comps[1][1].abs() { 0 } else { 1 };
    assert!((weights[near] - 0.35).abs() < 0.05, "{weights:?}");

    // The reported log-likelihood is that of the written model on the input.
    let pts: Vec<Point<f64>> = std::fs::read_to_string(&input)
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| {
            let xs: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
            Point::Hyperboloid(HyperboloidPoint::planar(xs[0], xs[1]))
        })
        .collect();
    let m = Mixture::new(
        Family::Hyperboloid(2),
        weights,
        comps.iter().map(|c| Component::Hyperboloid(LorentzParam::new(c.clone()).unwrap())).collect(),
    )
    .unwrap();
    let ll = mixture_log_likelihood(&m, &pts).unwrap();
    assert!((ll - f(&v["loglik"])).abs() < 1e-9 * ll.abs().max(1.0), "{ll} vs {}", v["loglik"]);
}

#[test]
fn fit_with_one_component_is_the_mle() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("p.csv");
    let (_, csv, _) = run(&["sample", "--theta", EX1, "--n", "3000", "--seed", "5"]);
    std::fs::write(&input, &csv).unwrap();
    let (code, out, _) = run(&["fit", "--input", input.to_str().unwrap(), "--family", "poincare", "--k", "1", "--seed", "1"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    validate("model", &v);
    let pts: Vec<UpperHalfPoint<f64>> = csv
        .lines()
        .skip(2)
        .map(|l| {
            let xs: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
            UpperHalfPoint::new(xs[0], xs[1]).unwrap()
        })
        .collect();
    let mle = hyperstat::poincare::mle(&pts).unwrap();
    let c = &v["components"][0];
    let got = [f(&c[0][0]), f(&c[0][1]), f(&c[1][1])];
    for (g, w) in got.iter().zip([mle.a, mle.b, mle.c]) {
        assert!((g - w).abs() < 1e-6 * w.abs().max(1.0), "{got:?} vs {mle:?}");
    }
}

#[test]
fn fit_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&str, &str, i32); 7] = [
        ("a,b\n0,1\n", "poincare", 2),
        ("x,y\n0,oops\n", "poincare", 2),
        ("x,y\n0,-1\n", "poincare", 2),
        ("x,y\n0,1,2\n", "poincare", 2),
        ("x,y\n", "poincare", 2),
        ("x1,x2\n0,1\n", "poincare", 2),
        ("x,y\n0,1\n0,1\n0,1\n0,1\n0,1\n", "poincare", 5),
    ];
    for (i, (text, fam, want)) in cases.iter().enumerate() {
        let p = dir.path().join(format!("c{i}.csv"));
        std::fs::write(&p, text).unwrap();
        let (code, _, err) = run(&["fit", "--input", p.to_str().unwrap(), "--family", fam, "--k", "2", "--seed", "1"]);
        assert_eq!(code, *want, "{text:?}: {err}");
    }
    let (code, _, _) = run(&["fit", "--input", "/nonexistent/points.csv", "--family", "poincare", "--k", "1", "--seed", "1"]);
    assert_eq!(code, 2);
}

fn convert(what: &str, from: &str, to: &str, value: &str) -> (i32, Value) {
    let (code, out, err) = run(&["convert", "--what", what, "--from", from, "--to", to, "--value", value]);
    if code != 0 {
        return (code, Value::Null);
    }
    let v: Value = serde_json::from_str(&out).unwrap_or_else(|e| panic!("{e}: {err}"));
    validate("convert", &v);
    check_digits(&out);
    (code, v)
}

#[test]
fn convert_examples() {
    assert_eq!(arr(&convert("param", "upper-half", "hyperboloid", "[[1,0],[0,1]]").1), vec![2.0, 0.0, 0.0]);
    assert_eq!(arr(&convert("point", "upper-half", "disk", "[0,1]").1), vec![0.0, 0.0]);
    assert_eq!(arr(&convert("point", "upper-half", "hyperboloid", "[1,1]").1), vec![-0.5, 1.0]);
    let (_, m) = convert("param", "hyperboloid", "upper-half", "[2,0,0]");
    assert_eq!(m, serde_json::json!([[1.0, 0.0], [0.0, 1.0]]));
    assert_eq!(convert("param", "disk", "upper-half", "[[1,0],[0,1]]").0, 2);
    assert_eq!(convert("param", "upper-half", "disk", "[[1,0],[0,1]]").0, 2);
    assert_eq!(convert("param", "upper-half", "hyperboloid", "[2,0,0]").0, 2);
    assert_eq!(convert("point", "upper-half", "disk", "[0,-1]").0, 2);
    assert_eq!(convert("point", "disk", "upper-half", "[1,0]").0, 2);
    assert_eq!(convert("param", "hyperboloid", "upper-half", "[3,1,1,1]").0, 4);
}

#[test]
fn convert_cycles_are_identity() {
    let models = ["upper-half", "hyperboloid", "disk"];
    let starts = ["[0.3,0.7]", "[-1.2,2.5]", "[0.4,-0.1]"];
    for (i, start) in starts.iter().enumerate() {
        for cycle in [[0usize, 1, 2], [0, 2, 1]] {
            let order: Vec<&str> = cycle.iter().map(|&k| models[(k + i) % 3]).collect();
            let mut cur = start.to_string();
            for k in 0..3 {
                let (code, v) = convert("point", order[k], order[(k + 1) % 3], &cur);
                assert_eq!(code, 0);
                cur = v.to_string();
            }
            let (a, b): (Value, Value) = (serde_json::from_str(start).unwrap(), serde_json::from_str(&cur).unwrap());
            for (x, y) in arr(&a).iter().zip(arr(&b)) {
                assert!((x - y).abs() < 1e-12, "{order:?}: {start} -> {cur}");
            }
        }
    }
    let (_, l) = convert("param", "upper-half", "hyperboloid", EX1);
    let (_, back) = convert("param", "hyperboloid", "upper-half", &l.to_string());
    assert_eq!(back, serde_json::json!([[4.0, 0.25], [0.25, 0.5]]));
}

#[test]
fn point_maps_match_library() {
    let z = UpperHalfPoint::new(0.3, 0.7).unwrap();
    let (_, h) = convert("point", "upper-half", "hyperboloid", "[0.3,0.7]");
    let p = point_h_to_l(&z);
    assert_eq!(arr(&h), p.x);
    let (_, d) = convert("point", "upper-half", "disk", "[0.3,0.7]");
    let w = point_h_to_disk(&z);
    assert_eq!(arr(&d), vec![w.u, w.v]);
    let back = point_disk_to_h(&DiskPoint::new(w.u, w.v).unwrap());
    assert!((back.x - z.x).abs() < 1e-12 && (back.y - z.y).abs() < 1e-12);
    let back = point_l_to_h(&p).unwrap();
    assert!((back.x - z.x).abs() < 1e-12 && (back.y - z.y).abs() < 1e-12);
    let t = SpdParam2::new(4.0, 0.25, 0.5).unwrap();
    let (_, l) = convert("param", "upper-half", "hyperboloid", EX1);
    assert_eq!(arr(&l), param_h_to_l(&t).theta);
}

#[test]
fn help_and_usage() {
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    for cmd in ["divergence", "entropy", "fim", "invariant", "sample", "estimate", "fit", "convert"] {
        assert!(out.contains(cmd), "{cmd}");
    }
    let (code, _, _) = run(&["divergence"]);
    assert_eq!(code, 2);
}
