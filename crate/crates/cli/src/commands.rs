use std::cell::RefCell;
use std::path::{Path, PathBuf};

use hahn_varcalc::exec::{map_slice, ExecMode};
use hahn_varcalc::expr::{parse_in, Compiled, EvalError, Var};
use hahn_varcalc::integral::try_integral;
use hahn_varcalc::varcalc::{
    convexity_probe, max_resolvable_depth, solve_direct, solve_isoperimetric, ConvexityBox,
    ConvexitySample, ConvexityVerdict, Evaluator, ProbeOptions, SolveReport, VariationalProblem,
};
use hahn_varcalc::{GridFunction, HahnParams, Lattice, QuadratureMode, QuadratureSpec, Side};

use crate::error::CliError;
use crate::grid_csv::{read_grid, write_grid};
use crate::json::{nums, obj, Json};
use crate::setup::{defaults_json, Setup};

/// A finished command: the document to print and the exit code.
pub struct Output {
    pub json: Json,
    pub code: u8,
}

fn provenance(setup: &Setup, extra: &str, fields: Vec<(&str, Json)>) -> Json {
    let mut all = vec![
        ("tool", Json::from("hahnvar")),
        ("version", env!("CARGO_PKG_VERSION").into()),
        ("input_hash", setup.input_hash(extra).into()),
        ("settings", setup.settings()),
        ("defaults", defaults_json()),
    ];
    all.extend(fields);
    obj(all)
}

fn grid_json(gf: &GridFunction) -> Json {
    let lattice = gf.lattice();
    let orbit = |side: Side| {
        let o = lattice.orbit(side);
        obj(vec![
            ("anchor", o.anchor().into()),
            ("degenerate", o.is_degenerate().into()),
            (
                "t",
                if o.is_degenerate() {
                    Json::Arr(vec![])
                } else {
                    nums(o.points())
                },
            ),
            (
                "y",
                if o.is_degenerate() {
                    Json::Arr(vec![])
                } else {
                    nums(gf.values(side))
                },
            ),
        ])
    };
    obj(vec![
        ("depth", lattice.depth().into()),
        ("omega0", lattice.omega0().into()),
        ("value_omega0", gf.value_omega0().into()),
        ("a", orbit(Side::A)),
        ("b", orbit(Side::B)),
    ])
}

struct Solved {
    report: SolveReport,
    iso: Option<(String, usize)>,
}

fn solve_problem(setup: &Setup, problem: &VariationalProblem) -> Result<Solved, CliError> {
    let opts = setup.solve_options();
    if problem.constraint().is_some() {
        let r = solve_isoperimetric(problem, &opts)?;
        Ok(Solved {
            report: r.report,
            iso: Some((format!("{:?}", r.classification).to_lowercase(), r.restarts)),
        })
    } else {
        Ok(Solved {
            report: solve_direct(problem, &opts)?,
            iso: None,
        })
    }
}

fn isoperimetric_json(s: &Solved) -> Json {
    let r = &s.report;
    match &s.iso {
        None => Json::Null,
        Some((class, restarts)) => obj(vec![
            ("classification", class.clone().into()),
            (
                "lambda0",
                r.multiplier0.map_or(Json::Null, |v| Json::Int(v as i64)),
            ),
            ("lambda", r.multiplier.into()),
            ("constraint_value", r.constraint_value.into()),
            ("constraint_residual", r.constraint_residual.into()),
            ("restarts", (*restarts).into()),
        ]),
    }
}

fn solve_json(setup: &Setup, problem: &VariationalProblem, s: &Solved) -> Json {
    let r = &s.report;
    obj(vec![
        ("command", Json::from("solve")),
        ("problem", setup.describe(problem)),
        ("converged", r.converged.into()),
        ("iterations", r.iterations.into()),
        ("gradient_norm", r.gradient_norm.into()),
        ("raw_residual", r.raw_residual.into()),
        ("gradient_steps", r.gradient_steps.into()),
        ("linear_solver", r.linear_solver.into()),
        (
            "functional",
            obj(vec![
                ("truncated", r.functional_value.into()),
                ("tail", r.functional_tail.into()),
                ("total", r.functional_total().into()),
            ]),
        ),
        (
            "residuals",
            obj(vec![
                ("el_max", r.el_max.into()),
                ("el_a", nums(&r.el_residuals.a)),
                ("el_b", nums(&r.el_residuals.b)),
                ("nbc_a", r.nbc_a.into()),
                ("nbc_b", r.nbc_b.into()),
            ]),
        ),
        ("isoperimetric", isoperimetric_json(s)),
        ("grid", grid_json(&r.minimizer)),
        (
            "provenance",
            provenance(
                setup,
                "solve",
                vec![
                    ("depth_requested", r.depth_requested.into()),
                    ("depth_used", r.depth_used.into()),
                    ("functional_tail", r.functional_tail.into()),
                ],
            ),
        ),
    ])
}

pub fn solve(setup: &Setup, csv: Option<&Path>) -> Result<Output, CliError> {
    let problem = setup.build_problem()?;
    let s = solve_problem(setup, &problem)?;
    if let Some(path) = csv {
        write_grid(path, &s.report.minimizer)?;
    }
    Ok(Output {
        code: if s.report.converged { 0 } else { 2 },
        json: solve_json(setup, &problem, &s),
    })
}

pub struct CheckArgs<'a> {
    pub candidate: &'a Path,
    pub lambda: Option<f64>,
    pub samples: usize,
    pub seed: u64,
    pub bounds: (f64, f64),
}

fn sample_json(s: &ConvexitySample) -> Json {
    obj(vec![
        ("t", s.t.into()),
        ("u", nums(&s.u)),
        ("u_bar", nums(&s.u_bar)),
        ("gap", s.gap.into()),
    ])
}

pub fn check(setup: &Setup, args: &CheckArgs) -> Result<Output, CliError> {
    let problem = setup.build_problem()?;
    let p = problem.params();
    let depth = setup
        .depth
        .min(max_resolvable_depth(p, problem.a(), problem.b()));
    let lattice = Lattice::new(*p, problem.a(), problem.b(), depth)?;
    let gf = read_grid(args.candidate, &lattice)?;
    let ev = Evaluator::for_grid(&problem, &gf)?;
    let lambda = match (args.lambda, problem.constraint()) {
        (Some(_), None) => {
            return Err(CliError::input(
                "--lambda needs a problem with a constraint",
            ))
        }
        (l, _) => l.unwrap_or(0.0),
    };
    let el = ev.el_residuals_with(&gf, 1.0, lambda)?;
    let nbc = |side: Side, free: bool| -> Result<Json, CliError> {
        Ok(if free {
            ev.nbc_residual_with(&gf, side, 1.0, lambda)?.into()
        } else {
            Json::Null
        })
    };
    let bc = problem.boundary();
    let bx = ConvexityBox::cube(args.bounds.0, args.bounds.1)?;
    let probe = convexity_probe(
        &problem,
        &bx,
        &ProbeOptions {
            samples: args.samples,
            seed: args.seed,
            mode: ExecMode::Auto,
        },
    )?;
    let witnesses = match &probe.verdict {
        ConvexityVerdict::Neither {
            convex_witness,
            concave_witness,
        } => obj(vec![
            ("convex", sample_json(convex_witness)),
            ("concave", sample_json(concave_witness)),
        ]),
        _ => Json::Null,
    };
    let constraint = match problem.constraint() {
        Some(c) => {
            let j = ev.constraint_value(&gf)?;
            obj(vec![
                ("value", j.into()),
                ("gamma", c.gamma.into()),
                ("residual", (j - c.gamma).into()),
            ])
        }
        None => Json::Null,
    };
    let json = obj(vec![
        ("command", Json::from("check")),
        ("problem", setup.describe(&problem)),
        ("lambda", args.lambda.into()),
        (
            "functional",
            obj(vec![
                ("truncated", ev.functional_value(&gf)?.into()),
                ("tail", ev.functional_tail(&gf)?.into()),
                ("total", ev.functional_total(&gf)?.into()),
            ]),
        ),
        (
            "residuals",
            obj(vec![
                ("el_max", el.max_abs().into()),
                ("el_a", nums(&el.a)),
                ("el_b", nums(&el.b)),
                ("nbc_a", nbc(Side::A, bc.at_a.is_free())?),
                ("nbc_b", nbc(Side::B, bc.at_b.is_free())?),
            ]),
        ),
        ("constraint", constraint),
        (
            "convexity",
            obj(vec![
                ("verdict", probe.verdict.label().into()),
                ("affine", probe.affine.into()),
                ("samples", probe.samples.into()),
                ("box", nums(&[args.bounds.0, args.bounds.1])),
                ("witnesses", witnesses),
                ("sufficiency", probe.sufficiency(problem.sense()).into()),
            ]),
        ),
        (
            "provenance",
            provenance(
                setup,
                &format!(
                    "check samples={} seed={} lambda={:?}",
                    args.samples, args.seed, args.lambda
                ),
                vec![("depth_used", depth.into())],
            ),
        ),
    ]);
    Ok(Output { json, code: 0 })
}

/// One `--vary` flag: names sharing a value list.
#[derive(Debug, Clone, PartialEq)]
pub struct Vary {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

/// `NAMES=start:stop:count`, `NAMES=start:stop:count:log` or `NAMES=v1,v2,...`,
/// where `NAMES` is one name or several joined by commas.
pub fn parse_vary(s: &str) -> Result<Vary, CliError> {
    let bad = |why: &str| CliError::input(format!("--vary `{s}`: {why}"));
    let (names, spec) = s
        .split_once('=')
        .ok_or_else(|| bad("expected NAMES=SPEC"))?;
    let names: Vec<String> = names.split(',').map(|n| n.trim().to_string()).collect();
    if names.iter().any(|n| n.is_empty()) {
        return Err(bad("empty name"));
    }
    let num = |x: &str| {
        x.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| bad(&format!("`{x}` is not a finite number")))
    };
    let values = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let log = match parts.len() {
            3 => false,
            4 if parts[3] == "log" => true,
            _ => {
                return Err(bad(
                    "range must be start:stop:count or start:stop:count:log",
                ))
            }
        };
        let (start, stop) = (num(parts[0])?, num(parts[1])?);
        let count: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| bad("count must be a non-negative integer"))?;
        if log && !(start > 0.0 && stop > 0.0) {
            return Err(bad("a log range needs positive end points"));
        }
        (0..count)
            .map(|i| {
                let f = if count == 1 {
                    0.0
                } else {
                    i as f64 / (count - 1) as f64
                };
                if log {
                    (start.ln() + f * (stop.ln() - start.ln())).exp()
                } else {
                    start + f * (stop - start)
                }
            })
            .collect()
    } else if spec.trim().is_empty() {
        Vec::new()
    } else {
        spec.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if values.is_empty() {
        return Err(bad("the range is empty"));
    }
    Ok(Vary { names, values })
}

fn csv_path(base: &Path, i: usize) -> PathBuf {
    let stem = base
        .file_stem()
        .map_or("grid".into(), |s| s.to_string_lossy().into_owned());
    let ext = base
        .extension()
        .map_or("csv".into(), |s| s.to_string_lossy().into_owned());
    base.with_file_name(format!("{stem}-{i}.{ext}"))
}

pub fn sweep(setup: &Setup, varies: &[Vary], csv: Option<&Path>) -> Result<Output, CliError> {
    if varies.is_empty() {
        return Err(CliError::input("sweep needs at least one --vary"));
    }
    for v in varies {
        for n in &v.names {
            if !setup.can_set(n) {
                return Err(CliError::input(format!(
                    "cannot vary `{n}`: not q, omega or a parameter of {}",
                    setup.label()
                )));
            }
        }
    }
    // Cartesian product; the last --vary changes fastest.
    let mut points: Vec<Vec<(String, f64)>> = vec![Vec::new()];
    for v in varies {
        let mut next = Vec::with_capacity(points.len() * v.values.len());
        for p in &points {
            for &x in &v.values {
                let mut q = p.clone();
                q.extend(v.names.iter().map(|n| (n.clone(), x)));
                next.push(q);
            }
        }
        points = next;
    }
    let results: Vec<Result<Solved, CliError>> = map_slice(&points, ExecMode::Auto, |point| {
        let mut s = setup.clone();
        for (n, v) in point {
            s.set(n, *v)?;
        }
        let problem = s.build_problem()?;
        solve_problem(&s, &problem)
    });
    let mut failed = false;
    let mut records = Vec::with_capacity(points.len());
    for (i, (point, res)) in points.iter().zip(&results).enumerate() {
        let values = Json::Obj(
            point
                .iter()
                .map(|(n, v)| (n.clone(), Json::Num(*v)))
                .collect(),
        );
        let rec = match res {
            Ok(s) => {
                let r = &s.report;
                failed |= !r.converged;
                if let Some(base) = csv {
                    write_grid(&csv_path(base, i), &r.minimizer)?;
                }
                obj(vec![
                    ("index", i.into()),
                    ("values", values),
                    ("converged", r.converged.into()),
                    ("iterations", r.iterations.into()),
                    ("functional_value", r.functional_value.into()),
                    ("functional_total", r.functional_total().into()),
                    ("y_a", r.minimizer.anchor_value(Side::A).into()),
                    ("y_b", r.minimizer.anchor_value(Side::B).into()),
                    ("el_max", r.el_max.into()),
                    ("nbc_a", r.nbc_a.into()),
                    ("nbc_b", r.nbc_b.into()),
                    ("lambda", r.multiplier.into()),
                    ("depth_used", r.depth_used.into()),
                    ("error", Json::Null),
                ])
            }
            Err(e) => {
                failed = true;
                obj(vec![
                    ("index", i.into()),
                    ("values", values),
                    ("converged", false.into()),
                    ("error", e.to_string().into()),
                ])
            }
        };
        records.push(rec);
    }
    let spec: Vec<String> = varies
        .iter()
        .map(|v| format!("{}={:?}", v.names.join(","), v.values))
        .collect();
    let base = setup.build_problem()?;
    let json = obj(vec![
        ("command", Json::from("sweep")),
        ("problem", setup.describe(&base)),
        (
            "vary",
            Json::Arr(
                varies
                    .iter()
                    .map(|v| {
                        obj(vec![
                            (
                                "names",
                                Json::Arr(v.names.iter().map(|n| n.clone().into()).collect()),
                            ),
                            ("values", nums(&v.values)),
                        ])
                    })
                    .collect(),
            ),
        ),
        ("all_converged", (!failed).into()),
        ("records", Json::Arr(records)),
        (
            "provenance",
            provenance(setup, &format!("sweep {}", spec.join(" ")), vec![]),
        ),
    ]);
    Ok(Output {
        json,
        code: if failed { 2 } else { 0 },
    })
}

fn compile_t(expr: &str) -> Result<Compiled, CliError> {
    let e =
        parse_in(expr, &[], &[Var::T]).map_err(|e| CliError::input(format!("`{expr}`: {e}")))?;
    Ok(Compiled::new(&e, &[]).map_err(hahn_varcalc::Error::from)?)
}

pub fn derive(expr: &str, params: HahnParams, t: f64, step: Option<f64>) -> Result<f64, CliError> {
    let c = compile_t(expr)?;
    let failure: RefCell<Option<EvalError>> = RefCell::new(None);
    let f = |x: f64| match c.eval(&[x, 0.0, 0.0, 0.0, 0.0], &[]) {
        Ok(v) => v,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let d = params.hahn_derivative(f, t, step.unwrap_or(params.default_fixed_point_step()))?;
    if let Some(e) = failure.into_inner() {
        return Err(CliError::input(format!("`{expr}`: {e}")));
    }
    Ok(d)
}

pub struct Integrated {
    pub value: f64,
    pub terms: usize,
    pub tail_estimate: f64,
}

pub fn integrate(
    expr: &str,
    params: HahnParams,
    a: f64,
    b: f64,
    tail_tol: f64,
    max_terms: usize,
) -> Result<Integrated, CliError> {
    let c = compile_t(expr)?;
    let spec = QuadratureSpec {
        max_terms,
        tail_tol,
        mode: QuadratureMode::TailTol,
    };
    let q = try_integral(
        |x| Ok(c.eval(&[x, 0.0, 0.0, 0.0, 0.0], &[])?),
        &params,
        a,
        b,
        &spec,
    )?;
    Ok(Integrated {
        value: q.value,
        terms: q.terms,
        tail_estimate: q.tail_estimate,
    })
}
