//! The finite optimality system on a truncated lattice.
//!
//! Unknowns are the orbit values of each non-degenerate orbit, the value at
//! `omega0`, and (for a normal isoperimetric solve) the multiplier. Rows are
//! Euler–Lagrange equations at the orbit points, one condition per end
//! (a pin or a natural boundary condition), the closure ties at `omega0`,
//! and the isoperimetric constraint.
//!
//! Closure: `p(s) = c0 + c1 s + c2 s^2` interpolates the three deepest
//! values of an orbit in `s = t - omega0`. It extends the orbit past the
//! truncation depth, so interval integrals are summed in full rather than
//! truncated.

use nalgebra::Matrix3;

use super::integrand::Integrand;
use super::linsolve::{BandStructure, SparseRows};
use super::problem::{BoundarySpec, EndCondition, VariationalProblem};
use crate::error::{Error, Result};
use crate::hahn::{GridFunction, HahnParams, Lattice, Side};

/// Tail terms are summed while `q^j` exceeds this.
const TAIL_REL: f64 = 1e-17;
/// Minimum distance from the deepest orbit point to `omega0`, relative to
/// `max(1, |omega0|)`.
pub const MIN_OFFSET: f64 = 1e-2;

pub(crate) const SIDES: [Side; 2] = [Side::A, Side::B];

/// Largest depth whose deepest points stay [`MIN_OFFSET`] away from `omega0`
/// (at least 2).
pub fn max_resolvable_depth(params: &HahnParams, a: f64, b: f64) -> usize {
    let w0 = params.omega0();
    let thr = MIN_OFFSET * w0.abs().max(1.0);
    let mut depth = usize::MAX;
    for s in [a, b] {
        if params.is_fixed_point(s) {
            continue;
        }
        let d = (s - w0).abs();
        let n = if d <= thr {
            0
        } else {
            ((thr / d).ln() / params.q().ln()).floor() as usize
        };
        depth = depth.min(n);
    }
    depth.max(2)
}

#[derive(Debug, Clone)]
pub(crate) struct OrbitData {
    pub degenerate: bool,
    /// `+1` for the orbit of `b`, `-1` for the orbit of `a`.
    pub sign: f64,
    pub t: Vec<f64>,
    pub s: Vec<f64>,
    pub h: Vec<f64>,
    pub w: Vec<f64>,
    /// `coef[j][k]`: coefficient `j` at point `k`.
    pub coef: Vec<Vec<f64>>,
    /// `(c0, c1, c2) = closure * (y[N-2], y[N-1], y[N])`.
    pub closure: [[f64; 3]; 3],
}

impl OrbitData {
    fn new(
        problem: &VariationalProblem,
        anchor: f64,
        sign: f64,
        depth: usize,
        tail: usize,
    ) -> Result<Self> {
        let params = problem.params();
        let w0 = params.omega0();
        if params.is_fixed_point(anchor) {
            return Ok(Self {
                degenerate: true,
                sign,
                t: Vec::new(),
                s: Vec::new(),
                h: Vec::new(),
                w: Vec::new(),
                coef: Vec::new(),
                closure: [[0.0; 3]; 3],
            });
        }
        let len = depth + 1 + tail;
        let q = params.q();
        let s0 = anchor - w0;
        let w_anchor = anchor * (1.0 - q) - params.omega();
        let mut t = Vec::with_capacity(len);
        let mut s = Vec::with_capacity(len);
        let mut h = Vec::with_capacity(len);
        let mut w = Vec::with_capacity(len);
        let mut tk = anchor;
        let mut qk = 1.0;
        for _ in 0..len {
            t.push(tk);
            s.push(qk * s0);
            h.push((q - 1.0) * qk * s0);
            w.push(w_anchor * qk);
            tk = params.sigma(tk);
            qk *= q;
        }
        // Orbit points keep the exact iterates; offsets use the closed form.
        let coef = problem
            .coefficients()
            .iter()
            .map(|c| c.source.along_orbit(params, anchor, len))
            .collect::<Result<Vec<_>>>()?;

        let sn = s[depth];
        let r = 1.0 / q;
        // Interpolate in the scaled offset s / s_N at nodes 1/q^2, 1/q, 1.
        let v = Matrix3::new(1.0, r * r, r.powi(4), 1.0, r, r * r, 1.0, 1.0, 1.0);
        let inv = v
            .try_inverse()
            .ok_or_else(|| Error::Solver("closure interpolation is singular".into()))?;
        let mut closure = [[0.0; 3]; 3];
        for (i, row) in closure.iter_mut().enumerate() {
            let scale = sn.powi(i as i32);
            for (j, c) in row.iter_mut().enumerate() {
                *c = inv[(i, j)] / scale;
            }
        }
        Ok(Self {
            degenerate: false,
            sign,
            t,
            s,
            h,
            w,
            coef,
            closure,
        })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }
}

/// Precomputed lattice geometry and coefficient tables for one problem.
#[derive(Debug, Clone)]
pub(crate) struct Discretization {
    pub params: HahnParams,
    pub depth: usize,
    pub lattice: Lattice,
    pub orbits: [OrbitData; 2],
    pub table: Vec<f64>,
    pub coef_w0: Vec<f64>,
}

impl Discretization {
    pub fn new(problem: &VariationalProblem, depth: usize) -> Result<Self> {
        if depth < 2 {
            return Err(Error::InvalidParams("depth must be at least 2".into()));
        }
        let params = *problem.params();
        let lattice = Lattice::new(params, problem.a(), problem.b(), depth)?;
        let tail = (TAIL_REL.ln() / params.q().ln()).ceil() as usize + 1;
        let oa = OrbitData::new(problem, problem.a(), -1.0, depth, tail)?;
        let ob = OrbitData::new(problem, problem.b(), 1.0, depth, tail)?;
        let w0 = params.omega0();
        let coef_w0 = problem
            .coefficients()
            .iter()
            .map(|c| c.source.value_at(&params, w0))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            params,
            depth,
            lattice,
            orbits: [oa, ob],
            table: problem.table().iter().map(|(_, v)| *v).collect(),
            coef_w0,
        })
    }

    pub fn for_grid(problem: &VariationalProblem, gf: &GridFunction) -> Result<Self> {
        let l = gf.lattice();
        if *l.params() != *problem.params() || l.a() != problem.a() || l.b() != problem.b() {
            return Err(Error::LatticeMismatch(format!(
                "grid on [{}, {}] with (q, omega) = ({}, {}) vs problem on [{}, {}] with ({}, {})",
                l.a(),
                l.b(),
                l.params().q(),
                l.params().omega(),
                problem.a(),
                problem.b(),
                problem.params().q(),
                problem.params().omega()
            )));
        }
        Self::new(problem, l.depth())
    }

    fn fill_params(&self, o: usize, k: usize, buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend_from_slice(&self.table);
        for c in &self.orbits[o].coef {
            buf.push(c[k]);
        }
    }

    fn fill_params_w0(&self, buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend_from_slice(&self.table);
        buf.extend_from_slice(&self.coef_w0);
    }
}

/// Positions of the unknowns in the state vector.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Layout {
    base: [Option<usize>; 2],
    pub depth: usize,
    pub w0: usize,
    pub lambda: Option<usize>,
    pub n: usize,
}

impl Layout {
    pub fn new(disc: &Discretization, with_lambda: bool) -> Self {
        let mut next = 0;
        let mut base = [None, None];
        for (o, b) in base.iter_mut().enumerate() {
            if !disc.orbits[o].degenerate {
                *b = Some(next);
                next += disc.depth + 1;
            }
        }
        let w0 = next;
        next += 1;
        let lambda = with_lambda.then(|| {
            next += 1;
            next - 1
        });
        Self {
            base,
            depth: disc.depth,
            w0,
            lambda,
            n: next,
        }
    }

    pub fn y(&self, o: usize, k: usize) -> usize {
        match self.base[o] {
            Some(b) => b + k,
            None => self.w0,
        }
    }

    pub fn anchor(&self, o: usize) -> usize {
        self.y(o, 0)
    }

    pub fn has_orbit(&self, o: usize) -> bool {
        self.base[o].is_some()
    }

    pub fn pack(&self, gf: &GridFunction, lambda: f64) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for (o, side) in SIDES.iter().enumerate() {
            if let Some(b) = self.base[o] {
                x[b..b + self.depth + 1].copy_from_slice(gf.values(*side));
            }
        }
        x[self.w0] = gf.value_omega0();
        if let Some(l) = self.lambda {
            x[l] = lambda;
        }
        x
    }

    pub fn unpack(&self, x: &[f64], lattice: &Lattice) -> GridFunction {
        let w0 = x[self.w0];
        let take = |o: usize| match self.base[o] {
            Some(b) => x[b..b + self.depth + 1].to_vec(),
            None => vec![w0; self.depth + 1],
        };
        GridFunction::new(lattice.clone(), take(0), take(1), w0).expect("layout matches lattice")
    }
}

/// `(index, d u / d x_index)` pairs for the four integrand arguments.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Deps {
    items: [(usize, [f64; 4]); 8],
    len: usize,
}

impl Deps {
    fn new() -> Self {
        Self {
            items: [(0, [0.0; 4]); 8],
            len: 0,
        }
    }

    fn push(&mut self, idx: usize, d: [f64; 4]) {
        self.items[self.len] = (idx, d);
        self.len += 1;
    }

    pub fn iter(&self) -> impl Iterator<Item = &(usize, [f64; 4])> {
        self.items[..self.len].iter()
    }
}

/// One evaluation point of an integrand.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Term {
    pub t: f64,
    pub u: [f64; 4],
    /// Signed quadrature weight.
    pub weight: f64,
    pub deps: Deps,
}

/// How the integrand `H = cl * L + cf * F` is formed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Multipliers {
    /// Fixed coefficients, no constraint row.
    Fixed { cl: f64, cf: f64 },
    /// `H = L - lambda F` with `lambda` an unknown; constraint row appended.
    Normal,
    /// `H = -F`; constraint row appended, the system is overdetermined.
    Abnormal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum RowKind {
    El { o: usize, k: usize },
    End(usize),
    Closure,
    Constraint,
}

pub(crate) struct System {
    pub g: Vec<f64>,
    pub jac: Option<SparseRows>,
    pub kinds: Vec<RowKind>,
}

/// Per-point first and second partials of `H` and first partials of `F`.
#[derive(Debug, Clone, Copy, Default)]
struct Local {
    g: [f64; 4],
    hs: [[f64; 4]; 4],
    gf: [f64; 4],
    f: f64,
}

pub(crate) struct Model<'a> {
    pub disc: &'a Discretization,
    pub lagr: &'a Integrand,
    pub cons: Option<(&'a Integrand, f64)>,
    pub boundary: BoundarySpec,
    pub layout: Layout,
    pub mult: Multipliers,
}

impl<'a> Model<'a> {
    pub fn new(
        disc: &'a Discretization,
        lagr: &'a Integrand,
        cons: Option<(&'a Integrand, f64)>,
        boundary: BoundarySpec,
        mult: Multipliers,
    ) -> Self {
        let layout = Layout::new(disc, mult == Multipliers::Normal);
        Self {
            disc,
            lagr,
            cons,
            boundary,
            layout,
            mult,
        }
    }

    fn coefficients(&self, x: &[f64]) -> (f64, f64) {
        match self.mult {
            Multipliers::Fixed { cl, cf } => (cl, cf),
            Multipliers::Normal => (
                1.0,
                -x[self.layout.lambda.expect("normal layout has lambda")],
            ),
            Multipliers::Abnormal => (0.0, -1.0),
        }
    }

    /// Closure coefficients for orbit `o`.
    pub fn closure(&self, x: &[f64], o: usize) -> [f64; 3] {
        let od = &self.disc.orbits[o];
        let n = self.layout.depth;
        let y3 = [
            x[self.layout.y(o, n - 2)],
            x[self.layout.y(o, n - 1)],
            x[self.layout.y(o, n)],
        ];
        let mut c = [0.0; 3];
        for (ci, row) in c.iter_mut().zip(&od.closure) {
            *ci = row[0] * y3[0] + row[1] * y3[1] + row[2] * y3[2];
        }
        c
    }

    fn ends(&self, deps: &mut Deps) {
        deps.push(self.layout.anchor(0), [0.0, 0.0, 1.0, 0.0]);
        deps.push(self.layout.anchor(1), [0.0, 0.0, 0.0, 1.0]);
    }

    fn end_values(&self, x: &[f64]) -> (f64, f64) {
        (x[self.layout.anchor(0)], x[self.layout.anchor(1)])
    }

    /// Explicit term `k < N` of a non-degenerate orbit.
    pub fn explicit_term(&self, x: &[f64], o: usize, k: usize) -> Term {
        let od = &self.disc.orbits[o];
        let h = od.h[k];
        let (ya, yb) = self.end_values(x);
        let i0 = self.layout.y(o, k);
        let i1 = self.layout.y(o, k + 1);
        let mut deps = Deps::new();
        deps.push(i1, [1.0, 1.0 / h, 0.0, 0.0]);
        deps.push(i0, [0.0, -1.0 / h, 0.0, 0.0]);
        self.ends(&mut deps);
        Term {
            t: od.t[k],
            u: [x[i1], (x[i1] - x[i0]) / h, ya, yb],
            weight: od.sign * od.w[k],
            deps,
        }
    }

    /// Term `k >= N`, read off the closure polynomial.
    fn tail_term(&self, x: &[f64], c: &[f64; 3], o: usize, k: usize) -> Term {
        let od = &self.disc.orbits[o];
        let q = self.disc.params.q();
        let s = od.s[k];
        let (ya, yb) = self.end_values(x);
        let b0 = [1.0, q * s, q * q * s * s];
        let b1 = [0.0, 1.0, (q + 1.0) * s];
        let mut deps = Deps::new();
        let n = self.layout.depth;
        for j in 0..3 {
            let d0: f64 = (0..3).map(|i| b0[i] * od.closure[i][j]).sum();
            let d1: f64 = (0..3).map(|i| b1[i] * od.closure[i][j]).sum();
            deps.push(self.layout.y(o, n - 2 + j), [d0, d1, 0.0, 0.0]);
        }
        self.ends(&mut deps);
        Term {
            t: od.t[k],
            u: [
                c[0] + c[1] * b0[1] + c[2] * b0[2],
                c[1] + c[2] * b1[2],
                ya,
                yb,
            ],
            weight: od.sign * od.w[k],
            deps,
        }
    }

    /// Term at `omega0` for a degenerate anchor: `D[y]` there is the slope
    /// of the other orbit's closure.
    fn fixed_point_term(&self, x: &[f64], other: usize) -> Term {
        let od = &self.disc.orbits[other];
        let c = self.closure(x, other);
        let (ya, yb) = self.end_values(x);
        let n = self.layout.depth;
        let mut deps = Deps::new();
        deps.push(self.layout.w0, [1.0, 0.0, 0.0, 0.0]);
        for j in 0..3 {
            deps.push(
                self.layout.y(other, n - 2 + j),
                [0.0, od.closure[1][j], 0.0, 0.0],
            );
        }
        self.ends(&mut deps);
        Term {
            t: self.disc.params.omega0(),
            u: [x[self.layout.w0], c[1], ya, yb],
            weight: 0.0,
            deps,
        }
    }

    fn local(&self, term: &Term, p: &[f64], cl: f64, cf: f64, hess: bool) -> Result<Local> {
        let mut out = Local::default();
        if cl != 0.0 {
            let g = self.lagr.grad(term.t, &term.u, p)?;
            for i in 0..4 {
                out.g[i] += cl * g[i];
            }
            if hess {
                let h = self.lagr.hess(term.t, &term.u, p)?;
                for i in 0..4 {
                    for j in 0..4 {
                        out.hs[i][j] += cl * h[i][j];
                    }
                }
            }
        }
        if let Some((f, _)) = self.cons {
            let gf = f.grad(term.t, &term.u, p)?;
            out.gf = gf;
            out.f = f.value(term.t, &term.u, p)?;
            if cf != 0.0 {
                for i in 0..4 {
                    out.g[i] += cf * gf[i];
                }
                if hess {
                    let h = f.hess(term.t, &term.u, p)?;
                    for i in 0..4 {
                        for j in 0..4 {
                            out.hs[i][j] += cf * h[i][j];
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// `d(d_i H)/dx` scattered into `row` with factor `scale`.
    fn scatter_partial(
        term: &Term,
        local: &Local,
        i: usize,
        scale: f64,
        row: &mut Vec<(usize, f64)>,
    ) {
        for (idx, d) in term.deps.iter() {
            let v: f64 = (0..4).map(|m| local.hs[i][m] * d[m]).sum();
            if v != 0.0 {
                row.push((*idx, scale * v));
            }
        }
    }

    fn scatter_dense(term: &Term, coeffs: &[f64; 4], scale: f64, dense: &mut [f64]) {
        for (idx, d) in term.deps.iter() {
            let v: f64 = (0..4).map(|m| coeffs[m] * d[m]).sum();
            dense[*idx] += scale * v;
        }
    }

    /// Some row needs integrals summed past the truncation depth.
    fn needs_tail(&self, cl: f64, cf: f64, has_cons_row: bool) -> bool {
        let live = |arg: usize| {
            (cl != 0.0 && !self.lagr.partial_vanishes(arg))
                || (cf != 0.0 && self.cons.is_some_and(|(f, _)| !f.partial_vanishes(arg)))
        };
        has_cons_row
            || (self.boundary.at_a.is_free() && live(2))
            || (self.boundary.at_b.is_free() && live(3))
    }

    /// Residual rows and, if requested, their Jacobian.
    pub fn assemble(&self, x: &[f64], want_jac: bool) -> Result<System> {
        let (cl, cf) = self.coefficients(x);
        let n_depth = self.layout.depth;
        let n = self.layout.n;
        let has_cons_row = matches!(self.mult, Multipliers::Normal | Multipliers::Abnormal);
        let mut buf = Vec::new();

        let mut g = Vec::with_capacity(n + 1);
        let mut kinds = Vec::with_capacity(n + 1);
        let mut jac = want_jac.then(|| SparseRows::new(n));

        // Full integrals of d4 H, d5 H and F, with their gradients.
        let mut int_ya = 0.0;
        let mut int_yb = 0.0;
        let mut int_f = 0.0;
        let mut d_ya = if want_jac { vec![0.0; n] } else { Vec::new() };
        let mut d_yb = d_ya.clone();
        let mut d_f = d_ya.clone();
        let mut anchor_local: [Option<(Term, Local)>; 2] = [None, None];

        let mut accumulate =
            |term: &Term, loc: &Local, d_ya: &mut [f64], d_yb: &mut [f64], d_f: &mut [f64]| {
                let w = term.weight;
                int_ya += w * loc.g[2];
                int_yb += w * loc.g[3];
                int_f += w * loc.f;
                if want_jac {
                    Self::scatter_dense(term, &loc.hs[2], w, d_ya);
                    Self::scatter_dense(term, &loc.hs[3], w, d_yb);
                    if self.cons.is_some() {
                        Self::scatter_dense(term, &loc.gf, w, d_f);
                    }
                }
            };

        let tail = self.needs_tail(cl, cf, has_cons_row);
        for o in 0..2 {
            if !self.layout.has_orbit(o) {
                continue;
            }
            let od = &self.disc.orbits[o];
            let mut terms = Vec::with_capacity(n_depth);
            for k in 0..n_depth {
                let term = self.explicit_term(x, o, k);
                self.disc.fill_params(o, k, &mut buf);
                let loc = self.local(&term, &buf, cl, cf, want_jac)?;
                accumulate(&term, &loc, &mut d_ya, &mut d_yb, &mut d_f);
                terms.push((term, loc));
            }
            if tail {
                let c = self.closure(x, o);
                for k in n_depth..od.len() {
                    let term = self.tail_term(x, &c, o, k);
                    self.disc.fill_params(o, k, &mut buf);
                    let loc = self.local(&term, &buf, cl, cf, want_jac)?;
                    accumulate(&term, &loc, &mut d_ya, &mut d_yb, &mut d_f);
                }
            }
            // Euler–Lagrange rows, multiplied by the step: h_k d2 H(k) - (d3 H(k+1) - d3 H(k)).
            for k in 0..n_depth - 1 {
                let (t0, l0) = &terms[k];
                let (t1, l1) = &terms[k + 1];
                let h = od.h[k];
                g.push(h * l0.g[0] - (l1.g[1] - l0.g[1]));
                kinds.push(RowKind::El { o, k });
                if let Some(j) = jac.as_mut() {
                    let mut row = Vec::with_capacity(16);
                    Self::scatter_partial(t0, l0, 0, h, &mut row);
                    Self::scatter_partial(t1, l1, 1, -1.0, &mut row);
                    Self::scatter_partial(t0, l0, 1, 1.0, &mut row);
                    if let Some(li) = self.layout.lambda {
                        row.push((li, -(h * l0.gf[0] - (l1.gf[1] - l0.gf[1]))));
                    }
                    j.rows.push(row);
                }
            }
            anchor_local[o] = Some(terms.swap_remove(0));
        }

        // End conditions.
        for o in 0..2 {
            let cond = if o == 0 {
                self.boundary.at_a
            } else {
                self.boundary.at_b
            };
            kinds.push(RowKind::End(o));
            match cond {
                EndCondition::Fixed(v) => {
                    let idx = self.layout.anchor(o);
                    g.push(x[idx] - v);
                    if let Some(j) = jac.as_mut() {
                        j.rows.push(vec![(idx, 1.0)]);
                    }
                }
                EndCondition::Free => {
                    let (term, loc) = match anchor_local[o].take() {
                        Some(tl) => tl,
                        None => {
                            let term = self.fixed_point_term(x, 1 - o);
                            self.disc.fill_params_w0(&mut buf);
                            let loc = self.local(&term, &buf, cl, cf, want_jac)?;
                            (term, loc)
                        }
                    };
                    // a: d3 H(a) - int d4 H;  b: d3 H(b) + int d5 H.
                    let (integral, sgn) = if o == 0 {
                        (int_ya, -1.0)
                    } else {
                        (int_yb, 1.0)
                    };
                    g.push(loc.g[1] + sgn * integral);
                    if let Some(j) = jac.as_mut() {
                        let mut dense = if o == 0 { d_ya.clone() } else { d_yb.clone() };
                        dense.iter_mut().for_each(|v| *v *= sgn);
                        Self::scatter_dense(&term, &loc.hs[1], 1.0, &mut dense);
                        j.push_dense(&dense);
                    }
                }
            }
        }

        // Closure.
        let w0 = self.layout.w0;
        let closure_row = |o: usize, i: usize, scale: f64, row: &mut Vec<(usize, f64)>| {
            for jj in 0..3 {
                row.push((
                    self.layout.y(o, n_depth - 2 + jj),
                    scale * self.disc.orbits[o].closure[i][jj],
                ));
            }
        };
        let live: Vec<usize> = (0..2).filter(|o| self.layout.has_orbit(*o)).collect();
        for &o in &live {
            let c = self.closure(x, o);
            g.push(c[0] - x[w0]);
            kinds.push(RowKind::Closure);
            if let Some(j) = jac.as_mut() {
                let mut row = Vec::with_capacity(4);
                closure_row(o, 0, 1.0, &mut row);
                row.push((w0, -1.0));
                j.rows.push(row);
            }
        }
        if live.len() == 2 {
            let (ca, cb) = (self.closure(x, 0), self.closure(x, 1));
            g.push(ca[1] - cb[1]);
            kinds.push(RowKind::Closure);
            if let Some(j) = jac.as_mut() {
                let mut row = Vec::with_capacity(6);
                closure_row(0, 1, 1.0, &mut row);
                closure_row(1, 1, -1.0, &mut row);
                j.rows.push(row);
            }
        }

        if has_cons_row {
            let (_, gamma) = self.cons.expect("constraint rows need a constraint");
            g.push(int_f - gamma);
            kinds.push(RowKind::Constraint);
            if let Some(j) = jac.as_mut() {
                j.push_dense(&d_f);
            }
        }

        // Multiplier column of the free end rows.
        if let (Some(j), Some(li)) = (jac.as_mut(), self.layout.lambda) {
            let col = self.lambda_column_ends(x)?;
            for (r, kind) in kinds.iter().enumerate() {
                if let RowKind::End(o) = kind {
                    let row = &mut j.rows[r];
                    row.retain(|(c, _)| *c != li);
                    if let Some(v) = col[*o] {
                        row.push((li, v));
                    }
                }
            }
        }

        Ok(System { g, jac, kinds })
    }

    /// `d/d lambda` of each free end row: `-(d3 F(end) -/+ int d4/5 F)`.
    fn lambda_column_ends(&self, x: &[f64]) -> Result<[Option<f64>; 2]> {
        let Some((f, _)) = self.cons else {
            return Ok([None, None]);
        };
        let mut buf = Vec::new();
        let mut int = [0.0; 2];
        let needs = [
            self.boundary.at_a.is_free() && !f.partial_vanishes(2),
            self.boundary.at_b.is_free() && !f.partial_vanishes(3),
        ];
        if needs[0] || needs[1] {
            for o in 0..2 {
                if !self.layout.has_orbit(o) {
                    continue;
                }
                let od = &self.disc.orbits[o];
                let c = self.closure(x, o);
                for k in 0..od.len() {
                    let term = if k < self.layout.depth {
                        self.explicit_term(x, o, k)
                    } else {
                        self.tail_term(x, &c, o, k)
                    };
                    self.disc.fill_params(o, k, &mut buf);
                    let gf = f.grad(term.t, &term.u, &buf)?;
                    int[0] += term.weight * gf[2];
                    int[1] += term.weight * gf[3];
                }
            }
        }
        let mut out = [None, None];
        for (o, slot) in out.iter_mut().enumerate() {
            let cond = if o == 0 {
                self.boundary.at_a
            } else {
                self.boundary.at_b
            };
            if cond.is_free() {
                let term = if self.layout.has_orbit(o) {
                    self.disc.fill_params(o, 0, &mut buf);
                    self.explicit_term(x, o, 0)
                } else {
                    self.disc.fill_params_w0(&mut buf);
                    self.fixed_point_term(x, 1 - o)
                };
                let d3 = f.partial(1, term.t, &term.u, &buf)?;
                let sgn = if o == 0 { -1.0 } else { 1.0 };
                *slot = Some(-(d3 + sgn * int[o]));
            }
        }
        Ok(out)
    }

    /// Band partition of the square system for [`super::linsolve::bordered_solve`].
    pub fn band_structure(&self, kinds: &[RowKind]) -> BandStructure {
        let mut s = BandStructure::default();
        for (r, kind) in kinds.iter().enumerate() {
            match kind {
                RowKind::El { o, k } => {
                    s.band_cols.push(self.layout.y(*o, k + 2));
                    s.pivot_rows.push(r);
                }
                _ => s.other_rows.push(r),
            }
        }
        for o in 0..2 {
            if self.layout.has_orbit(o) {
                s.border_cols.push(self.layout.y(o, 0));
                s.border_cols.push(self.layout.y(o, 1));
            }
        }
        s.border_cols.push(self.layout.w0);
        if let Some(l) = self.layout.lambda {
            s.border_cols.push(l);
        }
        s
    }

    /// Truncated functional `sum_{k < N}` and its tail `sum_{k >= N}` of
    /// `weight * L`.
    pub fn functional_parts(&self, x: &[f64]) -> Result<(f64, f64)> {
        let mut buf = Vec::new();
        let mut trunc = 0.0;
        let mut tail = 0.0;
        for o in 0..2 {
            if !self.layout.has_orbit(o) {
                continue;
            }
            let od = &self.disc.orbits[o];
            let c = self.closure(x, o);
            for k in 0..od.len() {
                let term = if k < self.layout.depth {
                    self.explicit_term(x, o, k)
                } else {
                    self.tail_term(x, &c, o, k)
                };
                self.disc.fill_params(o, k, &mut buf);
                let v = term.weight * self.lagr.value(term.t, &term.u, &buf)?;
                if k < self.layout.depth {
                    trunc += v;
                } else {
                    tail += v;
                }
            }
        }
        Ok((trunc, tail))
    }

    /// Full constraint integral `J[y]`.
    pub fn constraint_value(&self, x: &[f64]) -> Result<Option<f64>> {
        let Some((f, _)) = self.cons else {
            return Ok(None);
        };
        let mut buf = Vec::new();
        let mut total = 0.0;
        for o in 0..2 {
            if !self.layout.has_orbit(o) {
                continue;
            }
            let od = &self.disc.orbits[o];
            let c = self.closure(x, o);
            for k in 0..od.len() {
                let term = if k < self.layout.depth {
                    self.explicit_term(x, o, k)
                } else {
                    self.tail_term(x, &c, o, k)
                };
                self.disc.fill_params(o, k, &mut buf);
                total += term.weight * f.value(term.t, &term.u, &buf)?;
            }
        }
        Ok(Some(total))
    }

    /// Gradient of the truncated functional `sum_{k < N} weight * L` in the
    /// state vector.
    pub fn truncated_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut buf = Vec::new();
        let mut out = vec![0.0; self.layout.n];
        for o in 0..2 {
            if !self.layout.has_orbit(o) {
                continue;
            }
            for k in 0..self.layout.depth {
                let term = self.explicit_term(x, o, k);
                self.disc.fill_params(o, k, &mut buf);
                let gl = self.lagr.grad(term.t, &term.u, &buf)?;
                Self::scatter_dense(&term, &gl, term.weight, &mut out);
            }
        }
        Ok(out)
    }
}
