//! Resolving a problem source plus flags into a solvable problem.

use std::path::Path;

use sha2::{Digest, Sha256};

use hahn_varcalc::expr::{parse, Expr};
use hahn_varcalc::models::{
    adjustment_problem, example1_problem, example2_problem, AdjustmentSpec,
};
use hahn_varcalc::varcalc::{BoundarySpec, EndCondition, Sense, SolveOptions, VariationalProblem};
use hahn_varcalc::HahnParams;

use crate::error::CliError;
use crate::json::{fmt17, obj, Json};
use crate::problem_file::{parse_problem_file, ProblemFile, Spanned};

pub const DEFAULT_DEPTH: usize = 60;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_TAIL_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Catalog {
    Example1,
    Example2,
    Adjustment,
}

impl Catalog {
    pub const ALL: [Catalog; 3] = [Catalog::Example1, Catalog::Example2, Catalog::Adjustment];

    pub fn name(self) -> &'static str {
        match self {
            Catalog::Example1 => "example1",
            Catalog::Example2 => "example2",
            Catalog::Adjustment => "adjustment",
        }
    }

    fn defaults(self) -> (f64, f64, Vec<(String, f64)>) {
        let named = |v: &[(&str, f64)]| v.iter().map(|(n, x)| (n.to_string(), *x)).collect();
        match self {
            Catalog::Example1 => (0.99, 0.02, Vec::new()),
            Catalog::Example2 => (0.99, 0.02, named(&[("gamma", 2.0), ("nu", 2.0)])),
            Catalog::Adjustment => (0.9, 0.05, named(&[("r", 1.05), ("alpha", 1.0), ("T", 1.0)])),
        }
    }
}

#[derive(Debug, Clone)]
enum Source {
    Catalog(Catalog),
    File {
        text: String,
        file: Box<ProblemFile>,
    },
}

/// A problem source with every setting resolved.
#[derive(Debug, Clone)]
pub struct Setup {
    source: Source,
    label: String,
    pub q: f64,
    pub omega: f64,
    pub params: Vec<(String, f64)>,
    pub depth: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub sense: Sense,
}

/// Flag overrides shared by the problem commands.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub q: Option<f64>,
    pub omega: Option<f64>,
    pub depth: Option<usize>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub sense: Option<Sense>,
    pub params: Vec<(String, f64)>,
}

pub fn parse_assignment(s: &str) -> Result<(String, f64), CliError> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| CliError::input(format!("`{s}` must be NAME=VALUE")))?;
    let v: f64 = value
        .trim()
        .parse()
        .map_err(|_| CliError::input(format!("`{value}` in `{s}` is not a number")))?;
    if !v.is_finite() {
        return Err(CliError::input(format!("`{s}` is not finite")));
    }
    Ok((name.trim().to_string(), v))
}

fn sense_label(s: Sense) -> &'static str {
    match s {
        Sense::Min => "min",
        Sense::Max => "max",
    }
}

fn end_label(e: EndCondition) -> String {
    match e {
        EndCondition::Free => "free".into(),
        EndCondition::Fixed(v) => format!("fixed:{}", fmt17(v)),
    }
}

fn parse_spanned(s: &Spanned, names: &[&str]) -> Result<Expr, CliError> {
    parse(&s.text, names).map_err(|e| {
        let column = s.pos.column + s.text[..e.position.min(s.text.len())].chars().count();
        CliError::at(s.pos.line, column, e.to_string())
    })
}

impl Setup {
    /// A catalog name or the path of a problem file.
    pub fn load(source: &str) -> Result<Self, CliError> {
        if let Some(c) = Catalog::ALL.into_iter().find(|c| c.name() == source) {
            let (q, omega, params) = c.defaults();
            return Ok(Self {
                source: Source::Catalog(c),
                label: c.name().to_string(),
                q,
                omega,
                params,
                depth: DEFAULT_DEPTH,
                tol: DEFAULT_TOL,
                max_iter: DEFAULT_MAX_ITER,
                sense: Sense::Min,
            });
        }
        let path = Path::new(source);
        if !path.is_file() {
            let names: Vec<_> = Catalog::ALL.iter().map(|c| c.name()).collect();
            return Err(CliError::input(format!(
                "`{source}` is neither a catalog entry ({}) nor a readable file",
                names.join(", ")
            )));
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read `{source}`: {e}")))?;
        let file = parse_problem_file(&text).map_err(|e| match e {
            CliError::Input {
                line,
                column,
                message,
            } => CliError::Input {
                line,
                column,
                message: format!("{source}: {message}"),
            },
            other => other,
        })?;
        let setup = Self {
            label: format!(
                "file:{}",
                path.file_name()
                    .map_or(source.into(), |n| n.to_string_lossy())
            ),
            q: file.q,
            omega: file.omega,
            params: file.params.clone(),
            depth: file.solver.depth.unwrap_or(DEFAULT_DEPTH),
            tol: file.solver.tol.unwrap_or(DEFAULT_TOL),
            max_iter: file.solver.max_iter.unwrap_or(DEFAULT_MAX_ITER),
            sense: file.solver.sense.unwrap_or(Sense::Min),
            source: Source::File {
                text,
                file: Box::new(file),
            },
        };
        // Surface expression errors with their file position right away.
        setup.build_problem()?;
        Ok(setup)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(q) = o.q {
            self.q = q;
        }
        if let Some(w) = o.omega {
            self.omega = w;
        }
        if let Some(d) = o.depth {
            self.depth = d;
        }
        if let Some(t) = o.tol {
            self.tol = t;
        }
        if let Some(m) = o.max_iter {
            self.max_iter = m;
        }
        if let Some(s) = o.sense {
            self.sense = s;
        }
        for (name, v) in &o.params {
            self.set_param(name, *v)?;
        }
        Ok(())
    }

    pub fn set_param(&mut self, name: &str, v: f64) -> Result<(), CliError> {
        match self.params.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => {
                slot.1 = v;
                Ok(())
            }
            None => {
                let known: Vec<_> = self.params.iter().map(|(n, _)| n.as_str()).collect();
                Err(CliError::input(format!(
                    "unknown parameter `{name}` for {} (declared: {})",
                    self.label,
                    if known.is_empty() {
                        "none".to_string()
                    } else {
                        known.join(", ")
                    }
                )))
            }
        }
    }

    /// Sets `q`, `omega` or a declared parameter.
    pub fn set(&mut self, name: &str, v: f64) -> Result<(), CliError> {
        match name {
            "q" => self.q = v,
            "omega" => self.omega = v,
            _ => self.set_param(name, v)?,
        }
        Ok(())
    }

    pub fn can_set(&self, name: &str) -> bool {
        name == "q" || name == "omega" || self.params.iter().any(|(n, _)| n == name)
    }

    fn param(&self, name: &str) -> f64 {
        self.params
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
            .expect("declared parameter")
    }

    pub fn hahn(&self) -> Result<HahnParams, CliError> {
        Ok(HahnParams::new(self.q, self.omega)?)
    }

    pub fn build_problem(&self) -> Result<VariationalProblem, CliError> {
        let params = self.hahn()?;
        let problem = match &self.source {
            Source::Catalog(Catalog::Example1) => example1_problem(params).0,
            Source::Catalog(Catalog::Example2) => {
                example2_problem(params, self.param("gamma"), self.param("nu"))?.0
            }
            Source::Catalog(Catalog::Adjustment) => {
                let spec = AdjustmentSpec::linear_target(
                    params,
                    self.param("r"),
                    self.param("alpha"),
                    self.param("T"),
                )?;
                adjustment_problem(&spec)?
            }
            Source::File { file, .. } => {
                let names: Vec<&str> = self.params.iter().map(|(n, _)| n.as_str()).collect();
                let l = parse_spanned(&file.lagrangian, &names)?;
                let mut p = VariationalProblem::new(
                    params,
                    file.a,
                    file.b,
                    l,
                    BoundarySpec::new(file.at_a, file.at_b),
                )?;
                for (n, v) in &self.params {
                    p.set_param(n, *v);
                }
                if let Some((expr, gamma)) = &file.constraint {
                    p = p.with_constraint(parse_spanned(expr, &names)?, *gamma);
                }
                p
            }
        };
        let problem = problem.with_sense(self.sense);
        problem.validate()?;
        Ok(problem)
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            depth: self.depth,
            ..SolveOptions::default()
        }
    }

    /// SHA-256 over the source and every resolved setting.
    pub fn input_hash(&self, extra: &str) -> String {
        let mut h = Sha256::new();
        match &self.source {
            Source::Catalog(c) => h.update(format!("catalog:{}\n", c.name())),
            Source::File { text, .. } => {
                h.update(b"file\n");
                h.update(text.as_bytes());
                h.update(b"\n");
            }
        }
        h.update(self.settings_text());
        h.update(extra.as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    fn settings_text(&self) -> String {
        let mut s = format!(
            "q={}\nomega={}\ndepth={}\ntol={}\nmax_iter={}\nsense={}\n",
            fmt17(self.q),
            fmt17(self.omega),
            self.depth,
            fmt17(self.tol),
            self.max_iter,
            sense_label(self.sense)
        );
        for (n, v) in &self.params {
            s.push_str(&format!("param {n}={}\n", fmt17(*v)));
        }
        s
    }

    /// The problem as solved, for the report header.
    pub fn describe(&self, problem: &VariationalProblem) -> Json {
        let bc = problem.boundary();
        obj(vec![
            ("source", Json::from(self.label.as_str())),
            ("q", self.q.into()),
            ("omega", self.omega.into()),
            ("omega0", problem.params().omega0().into()),
            ("a", problem.a().into()),
            ("b", problem.b().into()),
            ("lagrangian", problem.lagrangian().to_string().into()),
            (
                "boundary",
                obj(vec![
                    ("a", end_label(bc.at_a).into()),
                    ("b", end_label(bc.at_b).into()),
                ]),
            ),
            (
                "params",
                Json::Obj(
                    self.params
                        .iter()
                        .map(|(n, v)| (n.clone(), Json::Num(*v)))
                        .collect(),
                ),
            ),
            (
                "constraint",
                problem.constraint().map_or(Json::Null, |c| {
                    obj(vec![
                        ("expr", c.expr.to_string().into()),
                        ("gamma", c.gamma.into()),
                    ])
                }),
            ),
            ("sense", sense_label(self.sense).into()),
        ])
    }

    pub fn settings(&self) -> Json {
        obj(vec![
            ("depth", self.depth.into()),
            ("tol", self.tol.into()),
            ("max_iter", self.max_iter.into()),
            ("sense", sense_label(self.sense).into()),
        ])
    }
}

pub fn defaults_json() -> Json {
    obj(vec![
        ("depth", DEFAULT_DEPTH.into()),
        ("tail_tol", DEFAULT_TAIL_TOL.into()),
        ("tol", DEFAULT_TOL.into()),
        ("max_iter", DEFAULT_MAX_ITER.into()),
        ("sense", "min".into()),
    ])
}
