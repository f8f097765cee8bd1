use focus_diffusion::mc::{
    equilibrium_check, estimate_kappa_dv, kappa_tgk_from_record, run_ensemble, run_ensemble_full,
    EnsembleStats, McEstimate, Scheme, SimConfig,
};
use focus_diffusion::models::ScatteringSetup;
use focus_diffusion::Error;

fn config(xi: f64, n: usize, t_max: f64, seed: u64) -> SimConfig {
    SimConfig {
        n_particles: n,
        t_max,
        n_snapshots: 100,
        dt: 0.01,
        vacf_cutoff: 20.0_f64.min(t_max),
        seed,
        ..SimConfig::new(ScatteringSetup::with_xi(1.0, 1.0, xi).unwrap())
    }
}

fn agree(a: McEstimate, b: McEstimate, sigmas: f64) -> bool {
    (a.value - b.value).abs() <= sigmas * a.std_error.hypot(b.std_error)
}

#[test]
fn mirrored_focusing_gives_same_coefficients() {
    let plus = config(0.4, 20_000, 40.0, 11);
    let minus = SimConfig {
        setup: plus.setup.mirrored(),
        seed: 12,
        ..plus.clone()
    };
    let (rp, rm) = (
        run_ensemble_full(&plus).unwrap(),
        run_ensemble_full(&minus).unwrap(),
    );
    let dv = (
        estimate_kappa_dv(&rp.stats, &plus).unwrap(),
        estimate_kappa_dv(&rm.stats, &minus).unwrap(),
    );
    assert!(agree(dv.0, dv.1, 2.0), "{dv:?}");
    let tgk = (
        kappa_tgk_from_record(&rp.vacf, &plus).unwrap(),
        kappa_tgk_from_record(&rm.vacf, &minus).unwrap(),
    );
    assert!(agree(tgk.0, tgk.1, 2.0), "{tgk:?}");
    // the drift flips
    let last = rp.stats.len() - 1;
    assert!(rp.stats.mean_dz[last] > 0.0 && rm.stats.mean_dz[last] < 0.0);
}

#[test]
fn variance_grows_after_relaxation() {
    let cfg = config(0.3, 10_000, 30.0, 5);
    let s = run_ensemble(&cfg).unwrap();
    assert!(s.variance.iter().all(|v| *v >= 0.0));
    for i in 1..s.len() {
        if s.times[i - 1] < 5.0 {
            continue;
        }
        let drop = s.variance[i - 1] - s.variance[i];
        assert!(
            drop <= 2.0 * s.se_var[i - 1].hypot(s.se_var[i]),
            "t = {}",
            s.times[i]
        );
    }
}

#[test]
fn halving_dt_keeps_dv() {
    let coarse = config(0.2, 20_000, 40.0, 21);
    let fine = SimConfig {
        dt: 0.005,
        seed: 22,
        ..coarse.clone()
    };
    let a = estimate_kappa_dv(&run_ensemble(&coarse).unwrap(), &coarse).unwrap();
    let b = estimate_kappa_dv(&run_ensemble(&fine).unwrap(), &fine).unwrap();
    assert!(agree(a, b, 3.0), "{a:?} vs {b:?}");
}

#[test]
fn particle_count_and_origin() {
    let cfg = config(0.7, 3_000, 10.0, 3);
    let s = run_ensemble(&cfg).unwrap();
    assert!(s.counts.iter().all(|c| *c == 3_000));
    assert_eq!((s.times[0], s.mean_dz[0], s.variance[0]), (0.0, 0.0, 0.0));
    assert_eq!(s.len(), cfg.n_snapshots + 1);
    let dt = s.times[1] - s.times[0];
    assert!(s
        .times
        .windows(2)
        .all(|w| ((w[1] - w[0]) / dt - 1.0).abs() < 1e-9));
}

#[test]
fn no_focusing_stays_uniform() {
    let r = equilibrium_check(&config(0.0, 20_000, 10.0, 8)).unwrap();
    assert!(r.accepted(), "{r:?}");
    assert!(r.mean_within(3.0), "{r:?}");
}

#[test]
fn dv_of_exact_linear_variance() {
    let cfg = SimConfig {
        t_max: 50.0,
        ..config(0.0, 1000, 50.0, 1)
    };
    let times: Vec<f64> = (0..=100).map(|i| i as f64 * 0.5).collect();
    let var: Vec<f64> = times.iter().map(|t| 2.0 * 0.37 * t).collect();
    let k = estimate_kappa_dv(&EnsembleStats::from_variance(times, var).unwrap(), &cfg).unwrap();
    assert!((k.value - 0.37).abs() < 1e-12);
    assert!(k.std_error < 1e-10);

    let times: Vec<f64> = (0..=12).map(|i| i as f64 * 5.0).collect();
    let var: Vec<f64> = times.iter().map(|t| 0.5 * t).collect();
    let short = estimate_kappa_dv(&EnsembleStats::from_variance(times, var).unwrap(), &cfg);
    assert!(matches!(short, Err(Error::Config(_))));
}

#[test]
fn control_variates_only_remove_noise() {
    let on = config(0.0, 20_000, 40.0, 31);
    let off = SimConfig {
        control_variates: false,
        ..on.clone()
    };
    let (a, b) = (
        run_ensemble_full(&on).unwrap(),
        run_ensemble_full(&off).unwrap(),
    );
    // same paths, different estimators
    assert_eq!(a.final_mu, b.final_mu);
    let (da, db) = (
        estimate_kappa_dv(&a.stats, &on).unwrap(),
        estimate_kappa_dv(&b.stats, &off).unwrap(),
    );
    assert!(agree(da, db, 3.0), "{da:?} vs {db:?}");
    assert!(da.std_error < 0.5 * db.std_error);
    let (ta, tb) = (
        kappa_tgk_from_record(&a.vacf, &on).unwrap(),
        kappa_tgk_from_record(&b.vacf, &off).unwrap(),
    );
    assert!(agree(ta, tb, 3.0), "{ta:?} vs {tb:?}");
    assert!(ta.std_error < 0.5 * tb.std_error);
    assert!((da.value * 6.0 - 1.0).abs() < 4.0 * 6.0 * da.std_error);
}

#[test]
fn euler_scheme_runs_and_relaxes() {
    let cfg = SimConfig {
        scheme: Scheme::EulerReflect,
        ..config(0.5, 10_000, 10.0, 4)
    };
    let r = equilibrium_check(&cfg).unwrap();
    assert!(r.mean_within(4.0), "{r:?}");
}
