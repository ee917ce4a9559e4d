use std::fs;
use std::io::Write;
use std::path::Path;

use clap::ValueEnum;
use hyperstat::geometry::{
    lorentz_invariant, param_h_to_l, param_l_to_h, point_disk_to_h, point_h_to_disk, point_h_to_l, point_l_to_h,
    poincare_invariant, DiskPoint, HyperboloidPoint, LorentzParam, UpperHalfPoint,
};
use hyperstat::mixtures::{em_fit, mixture_log_likelihood, Component, Family, Point};
use hyperstat::montecarlo::{estimate_sharded, streams, sup_probe, FGenerator, Method, ProposalKind};
use hyperstat::sampling::{hyperboloid_sample, poincare_sample, RngStream};
use hyperstat::{hyperboloid, poincare};
use serde_json::{json, Map, Value};

use crate::error::{invalid, CliError, CliResult};
use crate::output::{fmt_f64, matrix, num, nums, to_json};
use crate::params::{parse_param, parse_point2, ParamSpec};
use crate::{FamilyArg, McMeasure, McMethod, Measure, Model, What};

fn name<E: ValueEnum>(e: E) -> String {
    e.to_possible_value().expect("no skipped variants").get_name().to_string()
}

/// Writes to `out`, or stdout when absent.
fn emit(text: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn print(v: &Value) -> CliResult<()> {
    emit(&to_json(v), None)
}

fn mismatch<T>(p: &ParamSpec, q: &ParamSpec) -> CliResult<T> {
    invalid(format!(
        "theta is a {} parameter but theta2 is a {} parameter",
        p.family(),
        q.family()
    ))
}

pub fn divergence(measure: Measure, theta: &str, theta2: &str, alpha: Option<f64>) -> CliResult<i32> {
    if alpha.is_some() && measure != Measure::SkewJensen {
        return invalid("--alpha only applies to --measure skew-jensen");
    }
    let skew = alpha.unwrap_or(0.5);
    let (p, q) = (parse_param(theta)?, parse_param(theta2)?);
    let mut argmax = None;
    let (value, triple) = match (&p, &q) {
        (ParamSpec::Poincare(a), ParamSpec::Poincare(b)) => {
            let v = match measure {
                Measure::Kl => poincare::kld(a, b),
                Measure::Hellinger => poincare::hellinger_sq(a, b),
                Measure::Neyman => poincare::neyman_chi2(a, b),
                Measure::Jeffreys => poincare::jeffreys(a, b),
                Measure::SkewJensen => poincare::skew_jensen(a, b, skew)?,
                Measure::Chernoff => {
                    let (al, v) = poincare::chernoff(a, b);
                    argmax = Some(al);
                    v
                }
            };
            (v, poincare_invariant(a, b).to_array())
        }
        (ParamSpec::Hyperboloid(a), ParamSpec::Hyperboloid(b)) => {
            a.check_same_dim(b)?;
            let v = match measure {
                Measure::Kl => hyperboloid::kld(a, b)?,
                Measure::Hellinger => hyperboloid::hellinger_sq(a, b)?,
                Measure::Neyman => hyperboloid::neyman_chi2(a, b)?,
                Measure::Jeffreys => hyperboloid::jeffreys(a, b)?,
                Measure::SkewJensen => hyperboloid::skew_jensen(a, b, skew)?,
                Measure::Chernoff => {
                    let (al, v) = hyperboloid::chernoff(a, b)?;
                    argmax = Some(al);
                    v
                }
            };
            (v, lorentz_invariant(a, b)?.to_array())
        }
        _ => return mismatch(&p, &q),
    };
    let finite = value.is_finite();
    let mut out = Map::new();
    out.insert("measure".into(), json!(name(measure)));
    out.insert("value".into(), num(value));
    out.insert("invariant_triple".into(), nums(&triple));
    out.insert("finite".into(), json!(finite));
    match measure {
        Measure::SkewJensen => {
            out.insert("alpha".into(), num(skew));
        }
        Measure::Chernoff => {
            out.insert("alpha".into(), num(argmax.unwrap()));
        }
        _ => {}
    }
    print(&Value::Object(out))?;
    Ok(if finite { 0 } else { 3 })
}

pub fn entropy(theta: &str) -> CliResult<i32> {
    let (h, modified) = match parse_param(theta)? {
        ParamSpec::Poincare(t) => (poincare::entropy(&t), poincare::modified_entropy(&t)),
        ParamSpec::Hyperboloid(t) => {
            // The hyperboloid density is already taken with respect to the
            // invariant measure, so both entropies are F(θ) − ⟨θ, ∇F(θ)⟩.
            let g = hyperboloid::grad_cumulant(&t);
            let h = hyperboloid::cumulant(&t) - t.theta.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
            (h, h)
        }
    };
    print(&json!({"entropy": num(h), "modified_entropy": num(modified)}))?;
    Ok(0)
}

pub fn fim(theta: &str) -> CliResult<i32> {
    let m = match parse_param(theta)? {
        ParamSpec::Poincare(t) => matrix(&poincare::fim(&t)),
        ParamSpec::Hyperboloid(t) => matrix(&hyperboloid::hessian(&t)),
    };
    print(&m)?;
    Ok(0)
}

pub fn invariant(theta: &str, theta2: &str) -> CliResult<i32> {
    let (p, q) = (parse_param(theta)?, parse_param(theta2)?);
    let triple = match (&p, &q) {
        (ParamSpec::Poincare(a), ParamSpec::Poincare(b)) => poincare_invariant(a, b).to_array(),
        (ParamSpec::Hyperboloid(a), ParamSpec::Hyperboloid(b)) => lorentz_invariant(a, b)?.to_array(),
        _ => return mismatch(&p, &q),
    };
    print(&nums(&triple))?;
    Ok(0)
}

pub fn sample(theta: &str, n: usize, seed: u64, out: Option<&Path>) -> CliResult<i32> {
    let spec = parse_param(theta)?;
    let rng = RngStream::new(seed, streams::SAMPLING);
    let (header, rows): ([&str; 2], Vec<[f64; 2]>) = match &spec {
        ParamSpec::Poincare(t) => (["x", "y"], poincare_sample(t, n, &rng)?.iter().map(|z| [z.x, z.y]).collect()),
        ParamSpec::Hyperboloid(t) => {
            if t.d != 2 {
                return Err(CliError::UnsupportedDimension(format!(
                    "sampling to CSV supports d = 2 only, got d = {}",
                    t.d
                )));
            }
            (["x1", "x2"], hyperboloid_sample(t, n, &rng)?.iter().map(|p| [p.x[0], p.x[1]]).collect())
        }
    };
    let meta = format!(
        "# family={} theta={} n={n} seed={seed}\n",
        spec.family(),
        serde_json::to_string(&spec.to_json()).unwrap()
    );
    let mut w = csv::Writer::from_writer(meta.into_bytes());
    w.write_record(header)?;
    for r in &rows {
        w.write_record([fmt_f64(r[0]), fmt_f64(r[1])])?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    emit(std::str::from_utf8(&bytes).expect("ASCII output"), out)?;
    Ok(0)
}

pub struct EstimateArgs<'a> {
    pub measure: McMeasure,
    pub method: McMethod,
    pub theta: &'a str,
    pub theta2: &'a str,
    pub n: usize,
    pub seed: u64,
    pub sigma: Option<f64>,
    pub eps: Option<f64>,
    pub shards: usize,
    pub verify: bool,
}

fn lorentz(spec: ParamSpec) -> LorentzParam<f64> {
    match spec {
        ParamSpec::Poincare(t) => param_h_to_l(&t),
        ParamSpec::Hyperboloid(t) => t,
    }
}

pub fn estimate(args: EstimateArgs) -> CliResult<i32> {
    let (p, q) = (parse_param(args.theta)?, parse_param(args.theta2)?);
    if p.family() != q.family() {
        return mismatch(&p, &q);
    }
    let family = p.family();
    let (a, b) = (lorentz(p), lorentz(q));
    if a.d != 2 || b.d != 2 {
        return Err(CliError::UnsupportedDimension(format!(
            "Monte Carlo estimation supports d = 2 only, got d = {}",
            a.d.max(b.d)
        )));
    }
    if args.n < 2 {
        return invalid(format!("--n must be at least 2, got {}", args.n));
    }
    if args.sigma.is_some() && !matches!(args.method, McMethod::Mc1Logistic | McMethod::Mc1T7) {
        return invalid("--sigma only applies to the mc1 methods");
    }
    if args.eps.is_some() && args.method != McMethod::Mc2 {
        return invalid("--eps only applies to --method mc2");
    }
    let f = match args.measure {
        McMeasure::Tv => FGenerator::TotalVariation,
        McMeasure::Kl => FGenerator::Kl,
        McMeasure::Hellinger => FGenerator::SquaredHellinger,
        McMeasure::Neyman => FGenerator::NeymanChi2,
    };
    let mc1 = |kind| Method::Mc1 {
        kind,
        sigma: args.sigma,
        n_pilot: Method::DEFAULT_PILOT,
    };
    let method = match args.method {
        McMethod::Plugin => Method::Plugin,
        McMethod::Mc1Logistic => mc1(ProposalKind::Logistic),
        McMethod::Mc1T7 => mc1(ProposalKind::StudentT7),
        McMethod::Mc2 => Method::Mc2 {
            eps: args.eps.unwrap_or(Method::DEFAULT_EPS),
        },
    };
    let closed = if args.verify {
        match f.closed_form(&a, &b) {
            Some(v) => Some(v),
            None => return invalid(format!("--verify needs a closed form, which {} lacks", name(args.measure))),
        }
    } else {
        None
    };
    let rng = RngStream::new(args.seed, streams::ESTIMATION);
    let est = estimate_sharded(&f, &a, &b, &method, args.n, &rng, args.shards)?;
    let sup = sup_probe(&f, &a, &b, &method, est.sigma, 400).ok();

    let mut out = Map::new();
    out.insert("measure".into(), json!(name(args.measure)));
    out.insert("method".into(), json!(name(args.method)));
    out.insert("family".into(), json!(family));
    out.insert("estimate".into(), num(est.estimate));
    out.insert("sample_variance".into(), num(est.sample_variance));
    out.insert("std_error".into(), num(est.std_error()));
    out.insert("ci95".into(), nums(&[est.ci95.0, est.ci95.1]));
    out.insert("n".into(), json!(est.n));
    out.insert("seed".into(), json!(args.seed));
    out.insert("shards".into(), json!(args.shards));
    out.insert("sigma".into(), est.sigma.map_or(Value::Null, num));
    if let Method::Mc2 { eps } = method {
        out.insert("eps".into(), num(eps));
    }
    out.insert("sup_bound".into(), sup.map_or(Value::Null, num));
    out.insert("tail_index".into(), est.tail_index.map_or(Value::Null, num));
    out.insert("heavy_tail".into(), json!(est.heavy_tail));
    out.insert("max_abs".into(), num(est.max_abs));
    let mut code = 0;
    if let Some(cf) = closed {
        let z = (est.estimate - cf) / est.std_error();
        let pass = cf.is_finite() && z.abs() <= 4.0;
        if !pass {
            code = 1;
        }
        out.insert(
            "verify".into(),
            json!({"closed_form": num(cf), "z": num(z), "pass": pass}),
        );
    }
    print(&Value::Object(out))?;
    if code != 0 {
        eprintln!("hyperstat: estimate lies more than 4 standard errors from the closed form");
    }
    Ok(code)
}

fn read_points(input: &Path, family: FamilyArg) -> CliResult<(Family, Vec<Point<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(input)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let expected: Vec<String> = match family {
        FamilyArg::Poincare => vec!["x".into(), "y".into()],
        FamilyArg::Hyperboloid => (1..=header.len().max(2)).map(|i| format!("x{i}")).collect(),
    };
    if header != expected {
        return invalid(format!(
            "malformed CSV: header must be {}, got {}",
            expected.join(","),
            header.join(",")
        ));
    }
    let fam = match family {
        FamilyArg::Poincare => Family::Poincare,
        FamilyArg::Hyperboloid => Family::Hyperboloid(header.len()),
    };
    let mut points = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let xs = rec
            .iter()
            .map(|s| s.parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<Vec<f64>>>();
        let Some(xs) = xs else {
            return invalid(format!("malformed CSV: line {line} has a non-numeric entry"));
        };
        let point = match family {
            FamilyArg::Poincare => UpperHalfPoint::new(xs[0], xs[1]).map(Point::UpperHalf),
            FamilyArg::Hyperboloid => HyperboloidPoint::new(xs).map(Point::Hyperboloid),
        };
        match point {
            Ok(p) => points.push(p),
            Err(e) => return invalid(format!("malformed CSV: line {line}: {e}")),
        }
    }
    if points.is_empty() {
        return invalid("malformed CSV: no data rows");
    }
    Ok((fam, points))
}

pub fn fit(input: &Path, family: FamilyArg, k: usize, seed: u64, out: Option<&Path>) -> CliResult<i32> {
    let (fam, points) = read_points(input, family)?;
    if k == 0 || k > points.len() {
        return invalid(format!("--k must lie in 1..={}, got {k}", points.len()));
    }
    // Input and k are validated above, so anything EM rejects is a fit failure.
    let (m, trace) = em_fit(&points, k, fam, &RngStream::new(seed, streams::ESTIMATION))
        .map_err(|e| CliError::FitFailure(e.to_string()))?;
    let loglik = mixture_log_likelihood(&m, &points)?;
    let components: Vec<Value> = m
        .components
        .iter()
        .map(|c| match c {
            Component::Poincare(t) => matrix(&t.to_matrix()),
            Component::Hyperboloid(t) => nums(&t.theta),
        })
        .collect();
    let model = json!({
        "family": name(family),
        "d": fam.dim(),
        "weights": nums(&m.weights),
        "components": components,
        "loglik": num(loglik),
        "iterations": trace.iterations,
        "converged": trace.converged,
    });
    emit(&to_json(&model), out)?;
    Ok(0)
}

fn to_upper_half(from: Model, (x, y): (f64, f64)) -> CliResult<UpperHalfPoint<f64>> {
    Ok(match from {
        Model::UpperHalf => UpperHalfPoint::new(x, y)?,
        Model::Hyperboloid => point_l_to_h(&HyperboloidPoint::planar(x, y))?,
        Model::Disk => point_disk_to_h(&DiskPoint::new(x, y)?),
    })
}

pub fn convert(what: What, from: Model, to: Model, value: &str) -> CliResult<i32> {
    let result = match what {
        What::Point => {
            let xy = parse_point2(value)?;
            // Validate in the source model even when no map is applied.
            let z = to_upper_half(from, xy)?;
            let out = if from == to {
                [xy.0, xy.1]
            } else {
                match to {
                    Model::UpperHalf => [z.x, z.y],
                    Model::Hyperboloid => {
                        let p = point_h_to_l(&z);
                        [p.x[0], p.x[1]]
                    }
                    Model::Disk => {
                        let w = point_h_to_disk(&z);
                        [w.u, w.v]
                    }
                }
            };
            nums(&out)
        }
        What::Param => {
            if from == Model::Disk || to == Model::Disk {
                return invalid("unsupported direction: parameters convert between upper-half and hyperboloid only");
            }
            let spec = parse_param(value)?;
            match (from, &spec) {
                (Model::UpperHalf, ParamSpec::Poincare(_)) | (Model::Hyperboloid, ParamSpec::Hyperboloid(_)) => {}
                _ => {
                    return invalid(format!(
                        "--from {} expects a {} parameter",
                        name(from),
                        if from == Model::UpperHalf { "poincare" } else { "hyperboloid" }
                    ))
                }
            }
            match (to, spec) {
                (Model::Hyperboloid, ParamSpec::Poincare(t)) => nums(&param_h_to_l(&t).theta),
                (Model::UpperHalf, ParamSpec::Hyperboloid(t)) => matrix(&param_l_to_h(&t)?.to_matrix()),
                (_, same) => same.to_json(),
            }
        }
    };
    print(&result)?;
    Ok(0)
}
