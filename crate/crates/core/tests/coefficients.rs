use gauss_quad::GaussLegendre;

use focus_diffusion::coefficients::{
    kappa_dv_exact, kappa_dv_formula, kappa_tgk_closed_form, kappa_tz, kappa_tzz, kappa_z,
    kappa_zz_bw, ntz_table, series_fit, Parity, Quadrature, SERIES_GRID,
};
use focus_diffusion::models::{equilibrium_mean_mu, mu_potential, ScatteringSetup};

fn setup(xi: f64) -> ScatteringSetup {
    ScatteringSetup::with_xi(1.0, 1.0, xi).unwrap()
}

fn gl(n: usize, f: impl Fn(f64) -> f64) -> f64 {
    GaussLegendre::new(n).unwrap().integrate(-1.0, 1.0, f)
}

/// κ_tz after one integration by parts, with every inner integral in
/// closed form for M = ξ(μ + 1):
///   κ_tz = −(v/2D) ∫ H(μ) e^{−M} D₂(μ) / (1 − μ²) dμ,
///   H(μ) = ∫_{−1}^{μ} (J − ν) e^{M} dν,  D₂ = 2∫_{−1}^{μ} e^M / Z − 1.
fn kappa_tz_ibp(v: f64, d: f64, xi: f64) -> f64 {
    let j = 1.0 / xi.tanh() - 1.0 / xi;
    let big = (2.0 * xi).exp() - 1.0;
    let integrand = |mu: f64| {
        let em = (xi * (mu + 1.0)).exp();
        let cum = (em - 1.0) / xi;
        let cum_nu = mu * em / xi - em / (xi * xi) + 1.0 / xi + 1.0 / (xi * xi);
        let h = j * cum - cum_nu;
        let d2 = 2.0 * (em - 1.0) / big - 1.0;
        h / em * d2 / (1.0 - mu * mu)
    };
    -v / (2.0 * d) * gl(400, integrand)
}

/// Langevin function by its odd power series.
fn langevin_series(x: f64) -> f64 {
    // coth x − 1/x = Σ 2^{2k} B_{2k} x^{2k−1} / (2k)!
    let b = [
        1.0 / 6.0,
        -1.0 / 30.0,
        1.0 / 42.0,
        -1.0 / 30.0,
        5.0 / 66.0,
        -691.0 / 2730.0,
        7.0 / 6.0,
        -3617.0 / 510.0,
        43867.0 / 798.0,
        -174611.0 / 330.0,
        854513.0 / 138.0,
    ];
    let mut fact = 1.0;
    let mut sum = 0.0;
    for (i, bk) in b.iter().enumerate() {
        let k = (i + 1) as i32;
        fact *= ((2 * k - 1) * 2 * k) as f64;
        sum += 4f64.powi(k) * bk * x.powi(2 * k - 1) / fact;
    }
    sum
}

#[test]
fn kappa_tz_matches_integration_by_parts() {
    for xi in [0.2, -0.7, 1.3] {
        let q = kappa_tz(&setup(xi)).unwrap();
        let o = kappa_tz_ibp(1.0, 1.0, xi);
        assert!((q / o - 1.0).abs() < 1e-6, "xi={xi}: {q} vs {o}");
    }
    let s = ScatteringSetup::with_xi(2.0, 0.5, 0.2).unwrap();
    let o = kappa_tz_ibp(2.0, 0.5, 0.2);
    assert!((kappa_tz(&s).unwrap() / o - 1.0).abs() < 1e-6);
}

#[test]
fn streaming_against_langevin_series() {
    let j = langevin_series(1.0);
    assert!((j - 0.3130352855).abs() < 1e-9);
    assert!((kappa_z(&setup(1.0)).unwrap() - j).abs() < 1e-10);
    assert!((equilibrium_mean_mu(&setup(1.0)) - j).abs() < 1e-10);
    assert!((kappa_z(&setup(0.1)).unwrap() - 0.0333).abs() < 5e-4);
    let k = kappa_z(&ScatteringSetup::with_xi(3.0, 1.0, 0.5).unwrap()).unwrap();
    assert!((k - 3.0 * langevin_series(0.5)).abs() < 1e-12);
}

#[test]
fn mu_potential_isotropic() {
    assert_eq!(mu_potential(&setup(0.5), 1.0).unwrap(), 1.0);
    assert!((mu_potential(&setup(0.3), 0.0).unwrap() - 0.3).abs() < 1e-15);
    assert_eq!(mu_potential(&setup(0.0), 0.4).unwrap(), 0.0);
    assert_eq!(mu_potential(&setup(0.3), -1.0).unwrap(), 0.0);
    assert!(mu_potential(&setup(0.3), 1.01).is_err());
}

#[test]
fn bw_at_zero_focusing() {
    // (v²/8) ∫ (1 − μ²)² / D_μμ dμ
    let o = gl(64, |mu| (1.0 - mu * mu).powi(2) / (1.0 - mu * mu)) / 8.0;
    assert!((kappa_zz_bw(&setup(0.0)).unwrap() - o).abs() < 1e-12);
    let s = ScatteringSetup::with_xi(2.0, 3.0, 0.0).unwrap();
    assert!((kappa_zz_bw(&s).unwrap() - 4.0 / 18.0).abs() < 1e-12);
}

#[test]
fn bw_against_closed_form_and_series() {
    for xi in [0.1f64, 0.3, 0.5, 1.0, 2.0] {
        let direct = (1.0 / xi.tanh() - 1.0 / xi) / (2.0 * xi);
        let q = kappa_zz_bw(&setup(xi)).unwrap();
        assert!((q / direct - 1.0).abs() < 1e-10, "xi={xi}");
        assert!((kappa_tgk_closed_form(&setup(xi)) / direct - 1.0).abs() < 1e-12);
    }
    let series = |x: f64| (1.0 - x * x / 15.0 + 2.0 * x.powi(4) / 315.0) / 6.0;
    assert!((kappa_zz_bw(&setup(0.3)).unwrap() / series(0.3) - 1.0).abs() < 1e-4);
}

#[test]
fn parity() {
    for xi in [0.05, 0.3, 0.8, 1.7] {
        let (p, m) = (setup(xi), setup(-xi));
        let even = [
            (kappa_zz_bw(&p).unwrap(), kappa_zz_bw(&m).unwrap()),
            (kappa_dv_formula(&p).unwrap(), kappa_dv_formula(&m).unwrap()),
            (kappa_dv_exact(&p).unwrap(), kappa_dv_exact(&m).unwrap()),
            (kappa_tzz(&p).unwrap(), kappa_tzz(&m).unwrap()),
        ];
        for (a, b) in even {
            assert!((a - b).abs() <= 1e-10 * a.abs(), "xi={xi}: {a} vs {b}");
        }
        let (kp, km) = (kappa_z(&p).unwrap(), kappa_z(&m).unwrap());
        assert!((kp + km).abs() <= 1e-10 * kp.abs());
        // the tanh grid is symmetric but μ₀ = 0 splits it unevenly
        let q = Quadrature::shared();
        let (tp, tm) = (q.kappa_tz(&p).unwrap(), q.kappa_tz(&m).unwrap());
        let allowance = 1e-10 * tp.value.abs() + tp.error + tm.error;
        assert!(
            (tp.value + tm.value).abs() <= allowance,
            "xi={xi}: {tp:?} vs {tm:?}"
        );
    }
}

#[test]
fn small_focusing_values() {
    assert!((kappa_tz(&setup(0.1)).unwrap() - 0.0222).abs() < 2e-4);
    assert!(kappa_tzz(&setup(0.1)).unwrap() < 0.0);
    let lim = kappa_tzz(&setup(0.0)).unwrap();
    assert!((lim + 1.0 / 36.0).abs() < 1e-9);
    let v2 = kappa_tzz(&ScatteringSetup::with_xi(2.0, 1.0, 0.0).unwrap()).unwrap();
    assert!((v2 + 4.0 / 36.0).abs() < 1e-9);
    let dv = kappa_dv_formula(&setup(0.3)).unwrap();
    assert!((dv * 6.0 / (1.0 - 14.0 * 0.09 / 45.0) - 1.0).abs() < 1e-3);
    assert!((kappa_dv_formula(&setup(0.0)).unwrap() - 1.0 / 6.0).abs() < 1e-12);
}

#[test]
fn exact_dv_against_high_precision_values() {
    // 50-digit evaluation of (v²/Z) ∫ H² e^{−M} / D_μμ dμ, times 6
    for (xi, want) in [(0.1, 0.996895386), (0.3, 0.972519048), (0.5, 0.926120322)] {
        let got = 6.0 * kappa_dv_exact(&setup(xi)).unwrap();
        assert!((got - want).abs() < 2e-9, "xi={xi}: {got}");
    }
}

#[test]
fn fits_recover_leading_terms() {
    let kz = series_fit(|x| kappa_z(&setup(x)), &SERIES_GRID, Parity::Odd, 3).unwrap();
    assert!((kz.leading() * 3.0 - 1.0).abs() < 1e-3);
    let ktz = series_fit(|x| kappa_tz(&setup(x)), &SERIES_GRID, Parity::Odd, 3).unwrap();
    assert!((ktz.leading() * 4.5 - 1.0).abs() < 1e-2);
    let zero = series_fit(|_| Ok(0.0), &SERIES_GRID, Parity::Even, 2).unwrap();
    assert!(zero.coefficients.iter().all(|c| *c == 0.0));
    assert!(series_fit(Ok, &SERIES_GRID[..3], Parity::Odd, 1).is_err());
}

#[test]
fn ntz_leading_values_and_ratios() {
    let t = ntz_table(1.0, 1.0, 7, &SERIES_GRID).unwrap();
    assert_eq!(t.entries[0].0, 2);
    let lead = |n: usize| t.entries.iter().find(|e| e.0 == n).unwrap().1;
    assert!((lead(2) / (-13.0 / 108.0) - 1.0).abs() < 1e-2);
    assert!((lead(3) / (5.0 / 81.0) - 1.0).abs() < 1e-2);
    let gaps: Vec<f64> = t.ratios.iter().map(|r| (r + 0.5).abs()).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    // direct values at ξ = 0.05
    let q = Quadrature::shared();
    let k2 = q.kappa_ntz(2, &setup(0.05)).unwrap().value;
    assert!((k2 / (-13.0 / 108.0 * 0.05) - 1.0).abs() < 1e-2);
}
