use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::integrand::Integrand;
use super::problem::VariationalProblem;
use crate::error::{Error, Result};
use crate::exec::{map_range, ExecMode};

/// Bounds on `(y(sigma t), D[y](t), y(a), y(b))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexityBox {
    pub lo: [f64; 4],
    pub hi: [f64; 4],
}

impl ConvexityBox {
    pub fn new(lo: [f64; 4], hi: [f64; 4]) -> Result<Self> {
        for i in 0..4 {
            if !(lo[i].is_finite() && hi[i].is_finite() && lo[i] <= hi[i]) {
                return Err(Error::InvalidParams(format!(
                    "box side {i} is [{}, {}]",
                    lo[i], hi[i]
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    /// The cube `[lo, hi]^4`.
    pub fn cube(lo: f64, hi: f64) -> Result<Self> {
        Self::new([lo; 4], [hi; 4])
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> [f64; 4] {
        let mut u = [0.0; 4];
        for (i, ui) in u.iter_mut().enumerate() {
            *ui = if self.lo[i] == self.hi[i] {
                self.lo[i]
            } else {
                rng.random_range(self.lo[i]..=self.hi[i])
            };
        }
        u
    }
}

impl Default for ConvexityBox {
    fn default() -> Self {
        Self {
            lo: [-10.0; 4],
            hi: [10.0; 4],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeOptions {
    pub samples: usize,
    pub seed: u64,
    pub mode: ExecMode,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            samples: 2000,
            seed: 0,
            mode: ExecMode::Auto,
        }
    }
}

/// A sampled pair `(u, u + u_bar)` at `t` with
/// `gap = L(t, u + u_bar) - L(t, u) - grad L(t, u) . u_bar`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexitySample {
    pub t: f64,
    pub u: [f64; 4],
    pub u_bar: [f64; 4],
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConvexityVerdict {
    /// No sample violated the convexity inequality. Evidence, not proof.
    ConvexEvidence,
    /// No sample violated the concavity inequality. Evidence, not proof.
    ConcaveEvidence,
    /// Both inequalities fail; one witness each.
    Neither {
        convex_witness: ConvexitySample,
        concave_witness: ConvexitySample,
    },
}

impl ConvexityVerdict {
    pub fn label(&self) -> &'static str {
        match self {
            ConvexityVerdict::ConvexEvidence => "convex-evidence",
            ConvexityVerdict::ConcaveEvidence => "concave-evidence",
            ConvexityVerdict::Neither { .. } => "neither",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityReport {
    pub verdict: ConvexityVerdict,
    pub samples: usize,
    /// Both inequalities held on every sample (an affine integrand).
    pub affine: bool,
}

impl ConvexityReport {
    /// Sufficiency statement for a candidate that satisfies the necessary
    /// conditions, labeled with the sample count.
    pub fn sufficiency(&self, sense: super::Sense) -> Option<String> {
        let ok = match (sense, &self.verdict) {
            (super::Sense::Min, ConvexityVerdict::ConvexEvidence) => true,
            (super::Sense::Max, ConvexityVerdict::ConcaveEvidence) => true,
            (_, _) => self.affine,
        };
        let what = match sense {
            super::Sense::Min => "minimizer",
            super::Sense::Max => "maximizer",
        };
        ok.then(|| {
            format!(
                "global {what} supported by {} samples (sampling evidence, not a proof)",
                self.samples
            )
        })
    }
}

fn probe_one(
    problem: &VariationalProblem,
    lagr: &Integrand,
    hull: (f64, f64),
    bx: &ConvexityBox,
    seed: u64,
    index: usize,
) -> Result<ConvexitySample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let t = if hull.0 == hull.1 {
        hull.0
    } else {
        rng.random_range(hull.0..=hull.1)
    };
    let u = bx.sample(&mut rng);
    let v = bx.sample(&mut rng);
    let mut u_bar = [0.0; 4];
    for i in 0..4 {
        u_bar[i] = v[i] - u[i];
    }
    let mut p: Vec<f64> = problem.table().iter().map(|(_, v)| *v).collect();
    for c in problem.coefficients() {
        p.push(c.source.value_at(problem.params(), t)?);
    }
    let l0 = lagr.value(t, &u, &p)?;
    let l1 = lagr.value(t, &v, &p)?;
    let g = lagr.grad(t, &u, &p)?;
    let lin: f64 = g.iter().zip(&u_bar).map(|(a, b)| a * b).sum();
    let mut gap = l1 - l0 - lin;
    // Differences at rounding level count as equality.
    if gap.abs() <= 1e-12 * (1.0 + l0.abs() + l1.abs() + lin.abs()) {
        gap = 0.0;
    }
    Ok(ConvexitySample { t, u, u_bar, gap })
}

/// Tests `L(t, u + u_bar) - L(t, u) >= grad L(t, u) . u_bar` (and the
/// reverse) on random pairs in `bx` at random `t` in the lattice hull.
pub fn convexity_probe(
    problem: &VariationalProblem,
    bx: &ConvexityBox,
    opts: &ProbeOptions,
) -> Result<ConvexityReport> {
    if opts.samples == 0 {
        return Err(Error::InvalidParams(
            "convexity probe needs at least one sample".into(),
        ));
    }
    let bx = ConvexityBox::new(bx.lo, bx.hi)?;
    problem.validate()?;
    let lagr = Integrand::new(problem.lagrangian(), &problem.slot_names())?;
    let w0 = problem.params().omega0();
    let hull = (problem.a().min(w0), problem.b().max(w0));
    let samples = map_range(opts.samples, opts.mode, |i| {
        probe_one(problem, &lagr, hull, &bx, opts.seed, i)
    });
    let mut convex_witness = None;
    let mut concave_witness = None;
    for s in samples {
        let s = s?;
        if s.gap < 0.0 && convex_witness.is_none() {
            convex_witness = Some(s);
        }
        if s.gap > 0.0 && concave_witness.is_none() {
            concave_witness = Some(s);
        }
    }
    let verdict = match (convex_witness, concave_witness) {
        (None, _) => ConvexityVerdict::ConvexEvidence,
        (Some(_), None) => ConvexityVerdict::ConcaveEvidence,
        (Some(convex_witness), Some(concave_witness)) => ConvexityVerdict::Neither {
            convex_witness,
            concave_witness,
        },
    };
    Ok(ConvexityReport {
        verdict,
        samples: opts.samples,
        affine: convex_witness.is_none() && concave_witness.is_none(),
    })
}
