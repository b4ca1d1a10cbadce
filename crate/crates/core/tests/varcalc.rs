use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hahn_varcalc::exec::{map_range, solve_batch, ExecMode};
use hahn_varcalc::expr::parse;
use hahn_varcalc::models::{example1_problem, example2_problem};
use hahn_varcalc::varcalc::{
    convexity_probe, solve_direct, solve_isoperimetric, BoundarySpec, Classification, ConvexityBox,
    ConvexityVerdict, EndCondition, Evaluator, LinearSolver, ProbeOptions, Sense, SolveOptions,
    VariationalProblem,
};
use hahn_varcalc::{Error, GridFunction, HahnParams, Side};

fn hp(q: f64, w: f64) -> HahnParams {
    HahnParams::new(q, w).unwrap()
}

fn problem(l: &str, bc: BoundarySpec) -> VariationalProblem {
    VariationalProblem::new(hp(0.9, 0.01), 0.0, 1.0, parse(l, &[]).unwrap(), bc).unwrap()
}

/// Random variation vanishing at pinned anchors and at the deepest layer.
fn admissible(gf: &GridFunction, bc: &BoundarySpec, rng: &mut ChaCha8Rng) -> GridFunction {
    let mut h = GridFunction::zeros(gf.lattice());
    let n = gf.lattice().depth();
    for (side, end) in [(Side::A, bc.at_a), (Side::B, bc.at_b)] {
        let v = h.values_mut(side);
        for (k, x) in v.iter_mut().enumerate() {
            if k < n && !(k == 0 && !end.is_free()) {
                *x = rng.random_range(-1.0..1.0);
            }
        }
    }
    h
}

#[test]
fn equal_fixed_ends_give_constant() {
    let pr = problem("Dy^2/2", BoundarySpec::fixed(2.0, 2.0));
    let r = solve_direct(&pr, &SolveOptions::default()).unwrap();
    assert!(r.converged);
    let c = GridFunction::sample(r.minimizer.lattice(), |_| 2.0);
    assert!(r.minimizer.sup_distance(&c).unwrap() < 1e-10);
    assert!(r.functional_total().abs() < 1e-16);
    assert!(r.nbc_a.is_none() && r.nbc_b.is_none());
}

#[test]
fn linear_grid_has_zero_residual_for_pure_kinetic() {
    let pr = problem("Dy^2/2", BoundarySpec::fixed(0.0, 1.0));
    let ev = Evaluator::new(&pr, 30).unwrap();
    let gf = GridFunction::sample(ev.lattice(), |t| 3.0 * t - 1.0);
    // The residual is a second difference over h_k^2, so rounding grows
    // like eps / h_min^2 toward omega0.
    let p = ev.lattice().params();
    let h_min = [Side::A, Side::B]
        .iter()
        .map(|&s| {
            p.step(*ev.lattice().orbit(s).points().last().unwrap())
                .abs()
        })
        .fold(f64::INFINITY, f64::min);
    let m = ev.el_residuals(&gf).unwrap().max_abs();
    assert!(
        m < 16.0 * f64::EPSILON * (1.0 + gf.sup_norm()) / (h_min * h_min),
        "{m:e}"
    );
    assert_eq!(ev.nbc_residual(&gf, Side::A), Err(Error::FixedEnd('a')));
}

#[test]
fn constant_grid_gives_zero_functional() {
    let pr = problem("Dy^2", BoundarySpec::free());
    let ev = Evaluator::new(&pr, 20).unwrap();
    let gf = GridFunction::sample(ev.lattice(), |_| 4.0);
    assert_eq!(ev.functional_value(&gf).unwrap(), 0.0);
    let h = GridFunction::zeros(ev.lattice());
    assert_eq!(ev.first_variation(&gf, &h).unwrap(), 0.0);
}

#[test]
fn first_variation_matches_difference_quotient() {
    let (pr, _) = example2_problem(hp(0.8, 0.1), 2.0, 3.0).unwrap();
    let ev = Evaluator::new(&pr, 20).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let c: [f64; 3] = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let y = GridFunction::sample(ev.lattice(), |t| c[0] + c[1] * t + c[2] * t * t);
        let h = GridFunction::sample(ev.lattice(), |t| (3.0 * t).sin() + c[0]);
        let eps = 1e-6;
        let shifted = |s: f64| {
            let mut g = y.clone();
            for side in [Side::A, Side::B] {
                for (x, d) in g.values_mut(side).iter_mut().zip(h.values(side)) {
                    *x += s * d;
                }
            }
            ev.functional_value(&g).unwrap()
        };
        let fd = (shifted(eps) - shifted(-eps)) / (2.0 * eps);
        let an = ev.first_variation(&y, &h).unwrap();
        assert!((fd - an).abs() < 1e-5 * (1.0 + an.abs()), "{fd} vs {an}");
    }
}

#[test]
fn converged_minimizer_is_stationary_for_admissible_variations() {
    let bc = BoundarySpec::fixed(0.5, -1.0);
    let pr = problem("Dy^2/2 + y^2 + sin(y)", bc);
    let r = solve_direct(&pr, &SolveOptions::default().with_depth(40)).unwrap();
    assert!(r.converged);
    let ev = Evaluator::for_grid(&pr, &r.minimizer).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let h = admissible(&r.minimizer, &bc, &mut rng);
        assert!(ev.first_variation(&r.minimizer, &h).unwrap().abs() < 1e-6);
    }
}

#[test]
fn convergence_implies_small_residuals() {
    let problems = [
        problem(
            "y + Dy^2/2",
            BoundarySpec::new(EndCondition::Free, EndCondition::Fixed(1.0)),
        ),
        problem("Dy^2/2 + (y - t)^2", BoundarySpec::free()),
        problem("Dy^2 + y*Dy + ya*yb + (yb - 1)^2", BoundarySpec::free()),
        problem(
            "exp(0.2*y) + Dy^2",
            BoundarySpec::new(EndCondition::Fixed(0.0), EndCondition::Free),
        ),
        problem("-(Dy^2) - y", BoundarySpec::fixed(0.0, 1.0)).with_sense(Sense::Max),
    ];
    for pr in &problems {
        let opts = SolveOptions::default();
        let r = solve_direct(pr, &opts).unwrap();
        assert!(r.converged, "{}", pr.lagrangian());
        let bound = 100.0 * opts.tol;
        assert!(r.el_max < bound, "{}: {}", pr.lagrangian(), r.el_max);
        for nbc in [r.nbc_a, r.nbc_b].into_iter().flatten() {
            assert!(nbc.abs() < bound, "{}: {nbc}", pr.lagrangian());
        }
    }
}

#[test]
fn linear_solvers_agree() {
    let (pr, _) = example2_problem(hp(0.99, 0.02), 2.0, 2.0).unwrap();
    let base = SolveOptions::default().with_depth(250);
    let dense = solve_direct(
        &pr,
        &SolveOptions {
            linear: LinearSolver::Dense,
            ..base.clone()
        },
    )
    .unwrap();
    let banded = solve_direct(
        &pr,
        &SolveOptions {
            linear: LinearSolver::Bordered,
            ..base
        },
    )
    .unwrap();
    assert!(dense.converged && banded.converged);
    assert!(dense.minimizer.sup_distance(&banded.minimizer).unwrap() < 1e-9);
}

#[test]
fn penalty_drives_toward_fixed_end_solution() {
    let p = hp(0.9, 0.05);
    let fixed = |t: f64| (t * t + p.q() * t) / (p.q() + 1.0);
    let mut last = f64::INFINITY;
    for g in [1e2, 1e4, 1e6] {
        let (pr, _) = example2_problem(p, g, g).unwrap();
        let r = solve_direct(&pr, &SolveOptions::default()).unwrap();
        assert!(r.converged);
        let d = r
            .minimizer
            .sup_distance(&GridFunction::sample(r.minimizer.lattice(), fixed))
            .unwrap();
        assert!(d < last, "{g}: {d} >= {last}");
        last = d;
    }
}

#[test]
fn init_on_wrong_lattice_is_rejected() {
    let (pr, y) = example1_problem(hp(0.9, 0.0));
    let ev = Evaluator::new(&pr, 10).unwrap();
    let init = y.sample(ev.lattice());
    let opts = SolveOptions {
        init: Some(init),
        ..SolveOptions::default().with_depth(20)
    };
    assert!(matches!(
        solve_direct(&pr, &opts),
        Err(Error::LatticeMismatch(_))
    ));
}

#[test]
fn solve_direct_rejects_constraints() {
    let pr = problem("Dy^2/2", BoundarySpec::fixed(0.0, 0.0))
        .with_constraint(parse("y", &[]).unwrap(), 1.0);
    assert!(matches!(
        solve_direct(&pr, &SolveOptions::default()),
        Err(Error::Problem(_))
    ));
}

#[test]
fn isoperimetric_abnormal_branch() {
    let base = problem("Dy^2/2", BoundarySpec::fixed(0.0, 1.0));
    let free = solve_direct(&base, &SolveOptions::default()).unwrap();
    let pr = base
        .clone()
        .with_constraint(base.lagrangian().clone(), free.functional_total());
    let iso = solve_isoperimetric(&pr, &SolveOptions::default()).unwrap();
    assert_eq!(iso.classification, Classification::Abnormal);
    assert_eq!(iso.report.multiplier0, Some(0));
    assert!(iso.report.converged);
    assert!(iso.report.constraint_residual.unwrap().abs() < 1e-8);
    let ev = Evaluator::for_grid(&pr, &iso.report.minimizer).unwrap();
    assert!(
        ev.el_residuals_with(&iso.report.minimizer, 0.0, 1.0)
            .unwrap()
            .max_abs()
            < 1e-7
    );
}

#[test]
fn isoperimetric_constraint_is_met() {
    for gamma in [-0.2, 0.05, 0.3] {
        let pr = problem(
            "Dy^2/2 + y^2",
            BoundarySpec::new(EndCondition::Fixed(0.0), EndCondition::Free),
        )
        .with_constraint(parse("y", &[]).unwrap(), gamma);
        let iso = solve_isoperimetric(&pr, &SolveOptions::default()).unwrap();
        assert_eq!(iso.classification, Classification::Normal);
        assert!(iso.report.converged);
        let ev = Evaluator::for_grid(&pr, &iso.report.minimizer).unwrap();
        assert!((ev.constraint_value(&iso.report.minimizer).unwrap() - gamma).abs() < 1e-8);
    }
}

#[test]
fn convexity_verdicts() {
    let bx = ConvexityBox::cube(-1.0, 1.0).unwrap();
    let opts = ProbeOptions::default();
    let probe = |l: &str| convexity_probe(&problem(l, BoundarySpec::free()), &bx, &opts).unwrap();

    let r = probe("y + Dy^2/2");
    assert_eq!(r.verdict, ConvexityVerdict::ConvexEvidence);
    assert!(!r.affine);
    assert!(r.sufficiency(Sense::Min).unwrap().contains("2000 samples"));
    assert!(r.sufficiency(Sense::Max).is_none());

    assert_eq!(probe("-(Dy^2)").verdict, ConvexityVerdict::ConcaveEvidence);

    match probe("y^3").verdict {
        ConvexityVerdict::Neither {
            convex_witness,
            concave_witness,
        } => {
            assert!(convex_witness.gap < 0.0 && concave_witness.gap > 0.0);
        }
        v => panic!("expected neither, got {v:?}"),
    }

    let r = probe("y + 2*Dy - ya");
    assert!(r.affine);
    assert!(r.sufficiency(Sense::Max).is_some());
}

#[test]
fn convexity_probe_validates_input() {
    let pr = problem("y", BoundarySpec::free());
    let opts = ProbeOptions {
        samples: 0,
        ..ProbeOptions::default()
    };
    assert!(convexity_probe(&pr, &ConvexityBox::default(), &opts).is_err());
    assert!(ConvexityBox::new([0.0; 4], [f64::INFINITY; 4]).is_err());
    assert!(ConvexityBox::cube(1.0, -1.0).is_err());
}

#[test]
fn parallel_and_sequential_agree() {
    let problems: Vec<_> = (1..=6)
        .map(|i| {
            example2_problem(hp(0.5 + 0.07 * i as f64, 0.1), i as f64, 1.0)
                .unwrap()
                .0
        })
        .collect();
    let opts = SolveOptions::default().with_depth(30);
    let seq = solve_batch(&problems, &opts, ExecMode::Sequential);
    let par = solve_batch(&problems, &opts, ExecMode::Parallel);
    for (s, p) in seq.iter().zip(&par) {
        let (s, p) = (s.as_ref().unwrap(), p.as_ref().unwrap());
        assert_eq!(s.minimizer, p.minimizer);
        assert_eq!(s.iterations, p.iterations);
    }
    let pr = problem("y^3 + Dy^2", BoundarySpec::free());
    let bx = ConvexityBox::default();
    let a = convexity_probe(
        &pr,
        &bx,
        &ProbeOptions {
            mode: ExecMode::Sequential,
            ..ProbeOptions::default()
        },
    )
    .unwrap();
    let b = convexity_probe(
        &pr,
        &bx,
        &ProbeOptions {
            mode: ExecMode::Parallel,
            ..ProbeOptions::default()
        },
    )
    .unwrap();
    assert_eq!(a, b);
    assert_eq!(
        map_range(5, ExecMode::Parallel, |i| i * i),
        vec![0, 1, 4, 9, 16]
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn example1_solve_matches_closed_form(q in 0.3..0.97_f64, w in 0.0..0.5_f64) {
        let (pr, y) = example1_problem(hp(q, w));
        let r = solve_direct(&pr, &SolveOptions::default().with_depth(40)).unwrap();
        prop_assert!(r.converged);
        let exact = y.sample(r.minimizer.lattice());
        prop_assert!(r.minimizer.sup_distance(&exact).unwrap() < 1e-8);
    }

    #[test]
    fn first_variation_gradient_check(q in 0.4..0.95_f64, w in 0.0..0.5_f64, depth in 3usize..20, seed in 0u64..1000) {
        let (pr, _) = example2_problem(hp(q, w), 1.5, 0.5).unwrap();
        let pr = pr.with_boundary(BoundarySpec::free());
        let ev = Evaluator::new(&pr, depth).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = GridFunction::sample(ev.lattice(), |t| c[0] + c[1] * t + c[2] * t * t);
        let h = GridFunction::sample(ev.lattice(), |t| c[3] + (2.0 * t).cos());
        let eps = 1e-6;
        let at = |s: f64| {
            let mut g = y.clone();
            for side in [Side::A, Side::B] {
                for (x, d) in g.values_mut(side).iter_mut().zip(h.values(side)) {
                    *x += s * d;
                }
            }
            ev.functional_value(&g).unwrap()
        };
        let fd = (at(eps) - at(-eps)) / (2.0 * eps);
        let an = ev.first_variation(&y, &h).unwrap();
        prop_assert!((fd - an).abs() < 1e-5 * (1.0 + an.abs()));
    }
}
