//! Property checks shared by the property tests and the acceptance runner.
#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use focus_diffusion::coefficients::Quadrature;
use focus_diffusion::eidf::rational::RationalCoefficient as Rc;
use focus_diffusion::eidf::{apply_derivative, canonical_focusing_eidf, named_scripts, MultiIndex};
use focus_diffusion::mc::{run_ensemble_with_threads, SimConfig};
use focus_diffusion::models::ScatteringSetup;
use focus_diffusion::moments::kappa_dv_symbolic;

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        proptest::test_runner::TestRng::deterministic_rng(
            proptest::test_runner::RngAlgorithm::ChaCha,
        ),
    )
}

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    runner(cases)
        .run(&strategy, test)
        .map_err(|e| e.to_string())
}

/// Small polynomial in κ_z, κ_zz, κ_tz and v with integer coefficients.
fn poly() -> impl Strategy<Value = Rc> {
    prop::collection::vec((-4i64..=4, 0u32..3, 0u32..3, 0u32..2, 0u32..2), 1..4).prop_map(|terms| {
        let mut acc = Rc::zero();
        for (c, e1, e2, e3, e4) in terms {
            let mut t = Rc::integer(c);
            for _ in 0..e1 {
                t = &t * &Rc::kappa(0, 1);
            }
            for _ in 0..e2 {
                t = &t * &Rc::kappa(0, 2);
            }
            for _ in 0..e3 {
                t = &t * &Rc::kappa(1, 1);
            }
            for _ in 0..e4 {
                t = &t * &Rc::symbol("v");
            }
            acc = &acc + &t;
        }
        acc
    })
}

fn nonzero_poly() -> impl Strategy<Value = Rc> {
    poly().prop_filter("nonzero", |p| !p.is_zero())
}

fn rational() -> impl Strategy<Value = Rc> {
    (poly(), nonzero_poly()).prop_map(|(n, d)| n.div(&d).expect("nonzero denominator"))
}

/// Equality is reflexive, symmetric and transitive across different
/// representations of the same rational function, and agrees with a − b = 0.
#[allow(clippy::eq_op)]
pub fn rational_equivalence() -> Result<(), String> {
    run(
        64,
        (rational(), nonzero_poly(), nonzero_poly(), rational()),
        |(a, p, q, other)| {
            let b = (&a * &p).div(&p).unwrap();
            let c = (&(&a * &q) * &p).div(&(&q * &p)).unwrap();
            prop_assert!(a == a.clone());
            prop_assert!(a == b && b == a);
            prop_assert!(b == c && a == c);
            prop_assert_eq!(a == other, other == a);
            prop_assert_eq!(a == other, (&a - &other).is_zero());
            prop_assert!((&a - &b).is_zero());
            Ok(())
        },
    )
}

/// ∂_t and ∂_z commute on a differentiated EIDF.
pub fn derivative_commutation() -> Result<(), String> {
    let e = canonical_focusing_eidf(4).map_err(|e| e.to_string())?;
    run(
        32,
        ((0u32..3, 0u32..3), (0u32..3, 0u32..3)),
        |((a1, b1), (a2, b2))| {
            prop_assume!((a1, b1) != (0, 0) && (a2, b2) != (0, 0));
            let x = apply_derivative(&e, a1, b1).unwrap().differentiate(a2, b2);
            let y = apply_derivative(&e, a2, b2).unwrap().differentiate(a1, b1);
            let z = apply_derivative(&e, a1 + a2, b1 + b2).unwrap();
            prop_assert_eq!(&x, &y);
            prop_assert_eq!(&x, &z);
            Ok(())
        },
    )
}

/// Raising the weight budget never changes what a DIO produces at lower
/// weight, and the symbolic κ_DV does not depend on the budget.
pub fn truncation_monotonicity() -> Result<(), String> {
    let scripts: Vec<_> = named_scripts()
        .into_iter()
        .filter(|(s, _, _)| s.steps.len() == 1)
        .map(|(s, _, _)| s.steps[0])
        .collect();
    let n = scripts.len();
    run(24, (0..n, 2u32..4), |(i, low)| {
        let step = scripts[i];
        let target_w2 = step.target.weight2();
        let lhs_w2 = MultiIndex::new(1, 0).shifted(step.a, step.b).weight2();
        prop_assume!(target_w2.max(lhs_w2) <= 2 * low);
        let high = canonical_focusing_eidf(5).unwrap();
        let small = canonical_focusing_eidf(low).unwrap();
        prop_assert_eq!(high.retruncated(low), small.clone());
        let a = step.apply(&high).unwrap().retruncated(low);
        let b = step.apply(&small).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.len() <= step.apply(&high).unwrap().len());
        let dv_high = kappa_dv_symbolic(&step.apply(&high).unwrap()).unwrap();
        let dv_low = kappa_dv_symbolic(&b).unwrap();
        prop_assert_eq!(dv_high, dv_low);
        Ok(())
    })
}

/// Regularized coefficients do not feel the reference point μ₀ (1e-9).
pub fn reference_point_independence() -> Result<(), String> {
    let base = Quadrature::new(128).map_err(|e| e.to_string())?;
    run(24, (-1.5f64..1.5, -0.9f64..0.9), |(xi, mu0)| {
        let s = ScatteringSetup::with_xi(1.0, 1.0, xi).unwrap();
        let moved = Quadrature::new(128).unwrap().with_reference(mu0).unwrap();
        let (e0, e1) = (base.evaluator(&s).unwrap(), moved.evaluator(&s).unwrap());
        let pairs = [
            (e0.kappa_tz(), e1.kappa_tz()),
            (e0.kappa_tzz(), e1.kappa_tzz()),
            (e0.kappa_zz_bw(), e1.kappa_zz_bw()),
            (e0.kappa_ntz_list(3)[2], e1.kappa_ntz_list(3)[2]),
        ];
        for (a, b) in pairs {
            prop_assert!(
                (a - b).abs() <= 1e-9 * (a.abs() + 1e-3),
                "{a} vs {b} at xi={xi} mu0={mu0}"
            );
        }
        Ok(())
    })
}

/// Doubling the grid moves no coefficient by more than 1e-8 of its scale.
pub fn grid_doubling_stability() -> Result<(), String> {
    let q = Quadrature::shared();
    run(16, -2.0f64..2.0, |xi| {
        let s = ScatteringSetup::with_xi(1.0, 1.0, xi).unwrap();
        let r = q
            .report(&s)
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!(r.max_error() < 1e-8, "xi={xi}: {}", r.max_error());
        let (c, f) = (q.evaluator(&s).unwrap(), q.fine_evaluator(&s).unwrap());
        prop_assert!((c.kappa_dv_exact() - f.kappa_dv_exact()).abs() < 1e-8);
        Ok(())
    })
}

/// Ensemble statistics are bit-identical for any worker count.
pub fn mc_thread_determinism() -> Result<(), String> {
    run(
        4,
        (any::<u64>(), -0.5f64..0.5, 2usize..5),
        |(seed, xi, threads)| {
            let cfg = SimConfig {
                n_particles: 1500,
                t_max: 10.0,
                n_snapshots: 20,
                vacf_cutoff: 10.0,
                dt: 0.01,
                seed,
                n_batches: 6,
                ..SimConfig::new(ScatteringSetup::with_xi(1.0, 1.0, xi).unwrap())
            };
            let one = run_ensemble_with_threads(&cfg, 1).unwrap();
            let many = run_ensemble_with_threads(&cfg, threads).unwrap();
            prop_assert!(one == many);
            Ok(())
        },
    )
}

type Suite = fn() -> Result<(), String>;

pub const SUITES: [(&str, Suite); 6] = [
    ("rational equivalence relation", rational_equivalence),
    ("derivative commutation", derivative_commutation),
    ("truncation monotonicity", truncation_monotonicity),
    ("reference-point independence", reference_point_independence),
    ("grid-doubling stability", grid_doubling_stability),
    ("MC determinism across threads", mc_thread_determinism),
];
