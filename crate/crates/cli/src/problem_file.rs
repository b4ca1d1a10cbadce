//! The sectioned `key = value` problem file.
//!
//! ```text
//! [hahn]
//! q = 0.99
//! omega = 0.02
//! [interval]
//! a = 0
//! b = 1
//! [lagrangian]
//! expr = y + (1/2)*Dy^2
//! [boundary]
//! a = free
//! b = fixed:1
//! ```
//!
//! Optional sections are `[params]` (any names), `[constraint]` (`expr`,
//! `gamma`) and `[solver]` (`depth`, `tol`, `max_iter`, `sense`). Lines
//! starting with `#` or `;` are comments.

use hahn_varcalc::varcalc::{EndCondition, Sense};

use crate::error::CliError;

/// A line and column, both 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

/// A raw value string and where it starts.
#[derive(Debug, Clone, PartialEq)]
pub struct Spanned {
    pub text: String,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverSection {
    pub depth: Option<usize>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub sense: Option<Sense>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFile {
    pub q: f64,
    pub omega: f64,
    pub a: f64,
    pub b: f64,
    pub lagrangian: Spanned,
    pub at_a: EndCondition,
    pub at_b: EndCondition,
    pub params: Vec<(String, f64)>,
    pub constraint: Option<(Spanned, f64)>,
    pub solver: SolverSection,
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("hahn", &["q", "omega"]),
    ("interval", &["a", "b"]),
    ("lagrangian", &["expr"]),
    ("boundary", &["a", "b"]),
    ("params", &[]),
    ("constraint", &["expr", "gamma"]),
    ("solver", &["depth", "tol", "max_iter", "sense"]),
];

fn err(pos: Pos, message: impl Into<String>) -> CliError {
    CliError::at(pos.line, pos.column, message)
}

struct Entry {
    section: &'static str,
    key: String,
    value: Spanned,
    key_pos: Pos,
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

type Sections = Vec<(&'static str, Pos)>;

fn tokenize(text: &str) -> Result<(Vec<Entry>, Sections), CliError> {
    let mut entries: Vec<Entry> = Vec::new();
    let mut seen_sections: Sections = Vec::new();
    let mut current: Option<&'static str> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let indent = raw.len() - raw.trim_start().len();
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') || body.starts_with(';') {
            continue;
        }
        let at = Pos {
            line,
            column: indent + 1,
        };
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(at, "section header is missing `]`"))?
                .trim();
            let Some((sec, _)) = SECTIONS.iter().find(|(s, _)| *s == name) else {
                return Err(err(at, format!("unknown section `[{name}]`")));
            };
            if seen_sections.iter().any(|(s, _)| s == sec) {
                return Err(err(at, format!("section `[{name}]` appears twice")));
            }
            seen_sections.push((sec, at));
            current = Some(sec);
            continue;
        }
        let Some(eq) = body.find('=') else {
            return Err(err(at, "expected `key = value`"));
        };
        let key = body[..eq].trim();
        let section =
            current.ok_or_else(|| err(at, format!("key `{key}` appears before any section")))?;
        let allowed = SECTIONS
            .iter()
            .find(|(s, _)| *s == section)
            .map(|(_, k)| *k)
            .unwrap_or(&[]);
        let key_ok = if section == "params" {
            is_ident(key)
        } else {
            allowed.contains(&key)
        };
        if !key_ok {
            return Err(err(at, format!("unknown key `{key}` in [{section}]")));
        }
        if entries.iter().any(|e| e.section == section && e.key == key) {
            return Err(err(at, format!("key `{key}` is set twice in [{section}]")));
        }
        let after = &body[eq + 1..];
        let lead = after.len() - after.trim_start().len();
        let value = after.trim();
        if value.is_empty() {
            return Err(err(at, format!("key `{key}` has no value")));
        }
        entries.push(Entry {
            section,
            key: key.to_string(),
            value: Spanned {
                text: value.to_string(),
                pos: Pos {
                    line,
                    column: indent + eq + 1 + lead + 1,
                },
            },
            key_pos: at,
        });
    }
    Ok((entries, seen_sections))
}

fn number(v: &Spanned) -> Result<f64, CliError> {
    match v.text.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(err(v.pos, format!("`{}` is not a finite number", v.text))),
    }
}

fn count(v: &Spanned) -> Result<usize, CliError> {
    v.text
        .parse::<usize>()
        .map_err(|_| err(v.pos, format!("`{}` is not a non-negative integer", v.text)))
}

fn end_condition(v: &Spanned) -> Result<EndCondition, CliError> {
    if v.text == "free" {
        return Ok(EndCondition::Free);
    }
    if let Some(rest) = v.text.strip_prefix("fixed:") {
        let inner = Spanned {
            text: rest.trim().to_string(),
            pos: Pos {
                line: v.pos.line,
                column: v.pos.column + 6,
            },
        };
        return Ok(EndCondition::Fixed(number(&inner)?));
    }
    Err(err(
        v.pos,
        format!("boundary `{}` must be `free` or `fixed:<value>`", v.text),
    ))
}

pub fn parse_problem_file(text: &str) -> Result<ProblemFile, CliError> {
    let (entries, sections) = tokenize(text)?;
    let eof = Pos {
        line: text.lines().count().max(1),
        column: 1,
    };
    let get = |section: &str, key: &str| {
        entries
            .iter()
            .find(|e| e.section == section && e.key == key)
    };
    let need = |section: &str, key: &str| {
        get(section, key).map(|e| &e.value).ok_or_else(|| {
            let at = sections
                .iter()
                .find(|(s, _)| *s == section)
                .map_or(eof, |(_, p)| *p);
            err(at, format!("missing key `{key}` in [{section}]"))
        })
    };
    let solver = SolverSection {
        depth: get("solver", "depth")
            .map(|e| count(&e.value))
            .transpose()?,
        tol: get("solver", "tol").map(|e| number(&e.value)).transpose()?,
        max_iter: get("solver", "max_iter")
            .map(|e| count(&e.value))
            .transpose()?,
        sense: get("solver", "sense")
            .map(|e| match e.value.text.as_str() {
                "min" => Ok(Sense::Min),
                "max" => Ok(Sense::Max),
                other => Err(err(
                    e.value.pos,
                    format!("sense `{other}` must be `min` or `max`"),
                )),
            })
            .transpose()?,
    };
    let constraint = if sections.iter().any(|(s, _)| *s == "constraint") {
        Some((
            need("constraint", "expr")?.clone(),
            number(need("constraint", "gamma")?)?,
        ))
    } else {
        None
    };
    let mut params = Vec::new();
    for e in entries.iter().filter(|e| e.section == "params") {
        if matches!(e.key.as_str(), "t" | "y" | "Dy" | "ya" | "yb") {
            return Err(err(
                e.key_pos,
                format!("parameter `{}` shadows a variable", e.key),
            ));
        }
        params.push((e.key.clone(), number(&e.value)?));
    }
    Ok(ProblemFile {
        q: number(need("hahn", "q")?)?,
        omega: number(need("hahn", "omega")?)?,
        a: number(need("interval", "a")?)?,
        b: number(need("interval", "b")?)?,
        lagrangian: need("lagrangian", "expr")?.clone(),
        at_a: end_condition(need("boundary", "a")?)?,
        at_b: end_condition(need("boundary", "b")?)?,
        params,
        constraint,
        solver,
    })
}
