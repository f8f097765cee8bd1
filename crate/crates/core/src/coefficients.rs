//! Transport coefficients defined by nested pitch-angle integrals.
//!
//! Inner antiderivatives carry 1/D_νν and diverge logarithmically at
//! ν = ±1. They only ever enter through ∫(J − μ)e^M(·)dμ or through
//! "value minus e^M-weighted average", both blind to an additive constant,
//! so the lower limit is moved to a finite reference point μ₀.

use std::sync::LazyLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::models::{equilibrium_mean_mu, PitchGrid, ScatteringSetup, DEFAULT_GRID_SIZE};

/// Value with a grid-doubling error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Integrals on one grid for one setup.
pub struct Evaluator<'g> {
    grid: &'g PitchGrid,
    setup: ScatteringSetup,
    s0: f64,
    em: Vec<f64>,
    emm: Vec<f64>,
    kernel: Vec<f64>,
    z: f64,
    j: f64,
}

impl<'g> Evaluator<'g> {
    pub fn new(setup: &ScatteringSetup, grid: &'g PitchGrid, reference_mu: f64) -> Result<Self> {
        if reference_mu.is_nan() || reference_mu.abs() >= 1.0 {
            return Err(Error::Domain(format!(
                "reference point must lie inside (-1, 1), got {reference_mu}"
            )));
        }
        let mu = grid.nodes();
        // M(μ) written in rapidity form so it stays exact where μ rounds to ±1
        let m: Vec<f64> = mu.iter().map(|&x| setup.xi * (x + 1.0)).collect();
        let em: Vec<f64> = m.iter().map(|x| x.exp()).collect();
        let emm: Vec<f64> = m.iter().map(|x| (-x).exp()).collect();
        let kernel: Vec<f64> = mu.iter().map(|&x| setup.kernel(x)).collect();
        let z = grid.integrate(&em);
        let j = grid.integrate(&mul(mu, &em)) / z;
        Ok(Self {
            grid,
            setup: *setup,
            s0: reference_mu.atanh(),
            em,
            emm,
            kernel,
            z,
            j,
        })
    }

    /// ⟨μ⟩ under e^M on this grid.
    pub fn mean_mu(&self) -> f64 {
        self.j
    }

    fn avg(&self, f: &[f64]) -> f64 {
        self.grid.integrate(&mul(&self.em, f)) / self.z
    }

    /// f minus its e^M-weighted average, times e^M.
    fn centered(&self, f: &[f64]) -> Vec<f64> {
        let a = self.avg(f);
        self.em.iter().zip(f).map(|(e, x)| e * (x - a)).collect()
    }

    /// ∫_{μ₀}^{μ} e^{−M} K / D_νν dν at the nodes.
    fn inner(&self, k: &[f64]) -> Vec<f64> {
        // dν / D_νν = kernel ds
        let g: Vec<f64> = (0..k.len())
            .map(|i| self.emm[i] * k[i] * self.kernel[i])
            .collect();
        let offset = self.grid.antiderivative_ds_at(&g, self.s0);
        self.grid
            .cumulative_ds(&g)
            .into_iter()
            .map(|c| c - offset)
            .collect()
    }

    /// (v/2) ∫ (J − μ) e^M a dμ.
    fn outer(&self, a: &[f64]) -> f64 {
        let mu = self.grid.nodes();
        let f: Vec<f64> = (0..a.len())
            .map(|i| (self.j - mu[i]) * self.em[i] * a[i])
            .collect();
        0.5 * self.setup.v * self.grid.integrate(&f)
    }

    /// 2 ∫_{−1}^{ν} e^M / Z − 1.
    fn d2(&self) -> Vec<f64> {
        self.grid
            .cumulative(&self.em)
            .into_iter()
            .map(|c| 2.0 * c / self.z - 1.0)
            .collect()
    }

    pub fn kappa_z(&self) -> f64 {
        self.setup.v * self.j
    }

    pub fn kappa_zz_bw(&self) -> f64 {
        let one_minus: Vec<f64> = self.grid.one_minus_mu2().to_vec();
        let i = self.inner(&one_minus);
        // (v²/4) ∫ (μ − J) e^M I = −(v/2) · outer
        -0.5 * self.setup.v * self.outer(&i)
    }

    /// κ_tz, κ_ttz, …, κ_{n_max t z}.
    pub fn kappa_ntz_list(&self, n_max: usize) -> Vec<f64> {
        let mut k = self.d2();
        let mut out = Vec::with_capacity(n_max);
        for n in 1..=n_max {
            let i = self.inner(&k);
            out.push(self.outer(&i));
            if n < n_max {
                k = self.grid.cumulative(&self.centered(&i));
            }
        }
        out
    }

    pub fn kappa_tz(&self) -> f64 {
        self.kappa_ntz_list(1)[0]
    }

    pub fn kappa_tzz(&self) -> f64 {
        let v = self.setup.v;
        let d = self.setup.dcoeff;
        let mu = self.grid.nodes();
        let b2 = self.centered(&self.inner(&self.d2()));

        let cum_mu_em = self.grid.cumulative(&mul(mu, &self.em));
        let d1: Vec<f64> = (0..mu.len())
            .map(|i| 2.0 * cum_mu_em[i] / self.z + 0.5 * self.grid.one_minus_mu2()[i])
            .collect();
        let d1_minus_j: Vec<f64> = d1.iter().map(|x| x - self.j).collect();
        let p1 = self.centered(&self.inner(&d1_minus_j));
        let b1: Vec<f64> = (0..mu.len())
            .map(|i| v / (2.0 * d) * phi(self.setup.xi, mu[i]) + v * p1[i])
            .collect();

        let mu_b2 = mul(mu, &b2);
        let shift = 0.5 * v * self.grid.integrate(&mu_b2);
        let c1 = self.grid.cumulative(&b1);
        let c2 = self.grid.cumulative(&mu_b2);
        let g: Vec<f64> = (0..mu.len()).map(|i| c1[i] + v * c2[i] - shift).collect();
        self.outer(&self.inner(&g))
    }

    /// Late-time displacement-variance coefficient of the focused
    /// Fokker-Planck process, (v²/Z) ∫ H² e^{−M} / D_μμ dμ with
    /// H(μ) = ∫_{−1}^{μ} (J − ν) e^{M} dν.
    pub fn kappa_dv_exact(&self) -> f64 {
        let mu = self.grid.nodes();
        let f: Vec<f64> = (0..mu.len())
            .map(|i| (self.j - mu[i]) * self.em[i])
            .collect();
        let h = self.grid.cumulative(&f);
        let g: Vec<f64> = (0..mu.len())
            .map(|i| h[i] * h[i] * self.emm[i] * self.kernel[i])
            .collect();
        self.setup.v * self.setup.v * self.grid.integrate_ds(&g) / self.z
    }
}

/// (1 − ξ e^{ξμ}/sinh ξ)/ξ, the ξ-dependent source term of κ_tzz.
fn phi(xi: f64, mu: f64) -> f64 {
    if xi.abs() < 1e-4 {
        -mu - xi * (0.5 * mu * mu - 1.0 / 6.0) - xi * xi * (mu * mu * mu - mu) / 6.0
    } else {
        (1.0 - xi * (xi * mu).exp() / xi.sinh()) / xi
    }
}

fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

/// A pair of grids (N, 2N) for error estimates.
pub struct Quadrature {
    coarse: PitchGrid,
    fine: PitchGrid,
    reference_mu: f64,
    /// Failure threshold for error / natural scale.
    pub tolerance: f64,
}

static DEFAULT_QUADRATURE: LazyLock<Quadrature> =
    LazyLock::new(|| Quadrature::new(DEFAULT_GRID_SIZE).expect("default grid builds"));

impl Quadrature {
    pub fn new(grid_size: usize) -> Result<Self> {
        Ok(Self {
            coarse: PitchGrid::new(grid_size)?,
            fine: PitchGrid::new(2 * grid_size)?,
            reference_mu: 0.0,
            tolerance: 1e-7,
        })
    }

    pub fn shared() -> &'static Quadrature {
        &DEFAULT_QUADRATURE
    }

    pub fn with_reference(mut self, mu0: f64) -> Result<Self> {
        if mu0.is_nan() || mu0.abs() >= 1.0 {
            return Err(Error::Domain(format!(
                "reference point {mu0} outside (-1, 1)"
            )));
        }
        self.reference_mu = mu0;
        Ok(self)
    }

    pub fn grid_size(&self) -> usize {
        self.coarse.len()
    }

    pub fn evaluator(&self, setup: &ScatteringSetup) -> Result<Evaluator<'_>> {
        Evaluator::new(setup, &self.coarse, self.reference_mu)
    }

    pub fn fine_evaluator(&self, setup: &ScatteringSetup) -> Result<Evaluator<'_>> {
        Evaluator::new(setup, &self.fine, self.reference_mu)
    }

    fn estimate(
        &self,
        setup: &ScatteringSetup,
        name: &str,
        scale: f64,
        f: impl Fn(&Evaluator<'_>) -> f64,
    ) -> Result<Estimate> {
        let value = f(&self.evaluator(setup)?);
        let doubling = (value - f(&self.fine_evaluator(setup)?)).abs();
        // the tanh grid stops at 1 − μ² ≈ 4e^{−2S}; doubling cannot see that
        let floor = 4.0 * (-2.0 * self.coarse.span()).exp() * (1.0 + setup.xi.abs()) * scale;
        let error = doubling + floor;
        if !value.is_finite() || error.is_nan() || error > self.tolerance * scale {
            return Err(Error::Numerical(format!(
                "{name} at xi = {} not converged: value {value}, grid-doubling change {error}",
                setup.xi
            )));
        }
        Ok(Estimate { value, error })
    }

    pub fn kappa_z(&self, setup: &ScatteringSetup) -> Result<Estimate> {
        self.estimate(setup, "kappa_z", setup.v, |e| e.kappa_z())
    }

    pub fn kappa_zz_bw(&self, setup: &ScatteringSetup) -> Result<Estimate> {
        self.estimate(setup, "kappa_zz_bw", setup.kappa_parallel0(), |e| {
            e.kappa_zz_bw()
        })
    }

    pub fn kappa_tz(&self, setup: &ScatteringSetup) -> Result<Estimate> {
        let est = self.estimate(setup, "kappa_tz", setup.v / setup.dcoeff, |e| e.kappa_tz())?;
        // the regularized value must not feel the reference point
        let moved =
            Evaluator::new(setup, &self.coarse, shifted_reference(self.reference_mu))?.kappa_tz();
        if (moved - est.value).abs() > 1e-9 * (est.value.abs() + setup.v / setup.dcoeff * 1e-3) {
            return Err(Error::Numerical(format!(
                "kappa_tz depends on the reference point: {} vs {moved}",
                est.value
            )));
        }
        Ok(est)
    }

    pub fn kappa_tzz(&self, setup: &ScatteringSetup) -> Result<Estimate> {
        let scale = (setup.v / setup.dcoeff).powi(2);
        let est = self.estimate(setup, "kappa_tzz", scale, |e| e.kappa_tzz())?;
        let moved =
            Evaluator::new(setup, &self.coarse, shifted_reference(self.reference_mu))?.kappa_tzz();
        if (moved - est.value).abs() > 1e-9 * (est.value.abs() + scale * 1e-3) {
            return Err(Error::Numerical(format!(
                "kappa_tzz depends on the reference point: {} vs {moved}",
                est.value
            )));
        }
        Ok(est)
    }

    pub fn kappa_ntz(&self, n: usize, setup: &ScatteringSetup) -> Result<Estimate> {
        if n < 2 {
            return Err(Error::Domain(format!("kappa_ntz needs n >= 2, got {n}")));
        }
        let scale = setup.v / setup.dcoeff.powi(n as i32);
        self.estimate(setup, "kappa_ntz", scale, |e| e.kappa_ntz_list(n)[n - 1])
    }

    pub fn kappa_dv_exact(&self, setup: &ScatteringSetup) -> Result<Estimate> {
        self.estimate(setup, "kappa_dv_exact", setup.kappa_parallel0(), |e| {
            e.kappa_dv_exact()
        })
    }

    pub fn report(&self, setup: &ScatteringSetup) -> Result<CoefficientReport> {
        let kz = self.kappa_z(setup)?;
        let bw = self.kappa_zz_bw(setup)?;
        let tz = self.kappa_tz(setup)?;
        let tzz = self.kappa_tzz(setup)?;
        let k0 = setup.kappa_parallel0();
        let eta = eta_020(setup);
        let wq = bw.value + eta;
        let dv = wq - kz.value * tz.value;
        let dv_err = bw.error + kz.error * tz.value.abs() + tz.error * kz.value.abs();
        Ok(CoefficientReport {
            xi: setup.xi,
            kappa_z: kz,
            kappa_zz_bw: bw,
            kappa_zz_wq: Estimate {
                value: wq,
                error: bw.error,
            },
            kappa_tz: tz,
            kappa_tzz: tzz,
            kappa_parallel0: k0,
            kappa_dv: Estimate {
                value: dv,
                error: dv_err,
            },
        })
    }
}

fn shifted_reference(mu0: f64) -> f64 {
    if mu0 <= 0.0 {
        mu0 + 0.5
    } else {
        mu0 - 0.5
    }
}

/// η_{0,2,0} ≈ ξ² κ_∥0 / 5.
pub fn eta_020(setup: &ScatteringSetup) -> f64 {
    setup.xi * setup.xi * setup.kappa_parallel0() / 5.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientReport {
    pub xi: f64,
    pub kappa_z: Estimate,
    pub kappa_zz_bw: Estimate,
    pub kappa_zz_wq: Estimate,
    pub kappa_tz: Estimate,
    pub kappa_tzz: Estimate,
    pub kappa_parallel0: f64,
    pub kappa_dv: Estimate,
}

impl CoefficientReport {
    pub fn max_error(&self) -> f64 {
        [
            self.kappa_z.error,
            self.kappa_zz_bw.error,
            self.kappa_zz_wq.error,
            self.kappa_tz.error,
            self.kappa_tzz.error,
            self.kappa_dv.error,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// S in κ_zz^BW = κ_∥0 (1 + S).
    pub fn s_factor(&self) -> f64 {
        self.kappa_zz_bw.value / self.kappa_parallel0 - 1.0
    }
}

pub fn kappa_z(setup: &ScatteringSetup) -> Result<f64> {
    Ok(setup.v * equilibrium_mean_mu(setup))
}

pub fn kappa_zz_bw(setup: &ScatteringSetup) -> Result<f64> {
    Quadrature::shared().kappa_zz_bw(setup).map(|e| e.value)
}

pub fn kappa_tz(setup: &ScatteringSetup) -> Result<f64> {
    Quadrature::shared().kappa_tz(setup).map(|e| e.value)
}

pub fn kappa_tzz(setup: &ScatteringSetup) -> Result<f64> {
    Quadrature::shared().kappa_tzz(setup).map(|e| e.value)
}

pub fn kappa_ntz(n: usize, setup: &ScatteringSetup) -> Result<f64> {
    Quadrature::shared().kappa_ntz(n, setup).map(|e| e.value)
}

/// κ_zz − κ_z κ_tz with κ_zz = κ_zz^BW + η_{0,2,0}.
pub fn kappa_dv_formula(setup: &ScatteringSetup) -> Result<f64> {
    Quadrature::shared().report(setup).map(|r| r.kappa_dv.value)
}

pub fn kappa_dv_exact(setup: &ScatteringSetup) -> Result<f64> {
    Quadrature::shared().kappa_dv_exact(setup).map(|e| e.value)
}

/// κ_∥0 (coth ξ − 1/ξ) · 3/ξ for the isotropic model.
pub fn kappa_tgk_closed_form(setup: &ScatteringSetup) -> f64 {
    let xi = setup.xi;
    let k0 = setup.kappa_parallel0();
    if xi.abs() < 1e-3 {
        let x2 = xi * xi;
        k0 * (1.0 - x2 / 15.0 + 2.0 * x2 * x2 / 315.0)
    } else {
        3.0 * k0 * equilibrium_mean_mu(setup) / xi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFit {
    pub parity: Parity,
    /// Coefficients of ξ^p, ξ^{p+2}, … with p = 0 (even) or 1 (odd).
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Root-mean-square residual.
    pub residual: f64,
}

impl SeriesFit {
    pub fn leading(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn evaluate(&self, xi: f64) -> f64 {
        let p = match self.parity {
            Parity::Even => 0,
            Parity::Odd => 1,
        };
        self.coefficients
            .iter()
            .enumerate()
            .map(|(k, c)| c * xi.powi(p + 2 * k as i32))
            .sum()
    }
}

/// Least-squares fit of the leading `n_terms` monomials of the declared parity.
pub fn series_fit(
    f: impl Fn(f64) -> Result<f64>,
    xi_grid: &[f64],
    parity: Parity,
    n_terms: usize,
) -> Result<SeriesFit> {
    if xi_grid.len() < 4 {
        return Err(Error::Numerical(format!(
            "series fit needs at least 4 points, got {}",
            xi_grid.len()
        )));
    }
    if n_terms == 0 || n_terms >= xi_grid.len() {
        return Err(Error::Numerical(format!(
            "cannot fit {n_terms} terms to {} points",
            xi_grid.len()
        )));
    }
    let values = xi_grid
        .iter()
        .map(|&x| f(x))
        .collect::<Result<Vec<f64>>>()?;
    let p = match parity {
        Parity::Even => 0,
        Parity::Odd => 1,
    };
    let xmax = xi_grid.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if xmax == 0.0 {
        return Err(Error::Numerical("series fit grid is all zeros".into()));
    }
    // columns scaled by xmax^power to keep the design matrix well conditioned
    let powers: Vec<i32> = (0..n_terms).map(|k| p + 2 * k as i32).collect();
    let a = DMatrix::from_fn(xi_grid.len(), n_terms, |i, k| {
        (xi_grid[i] / xmax).powi(powers[k])
    });
    let b = DVector::from_vec(values.clone());
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin.is_nan() || smin <= 1e-10 * smax {
        return Err(Error::Numerical(format!(
            "series fit ill-conditioned (singular values {smin:e} .. {smax:e})"
        )));
    }
    let sol = svd
        .solve(&b, 1e-14 * smax)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    let resid = &b - &a * &sol;
    let dof = (xi_grid.len() - n_terms) as f64;
    let sigma2 = resid.norm_squared() / dof;
    let cov = (a.transpose() * &a)
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular normal matrix".into()))?;
    let coefficients: Vec<f64> = (0..n_terms)
        .map(|k| sol[k] / xmax.powi(powers[k]))
        .collect();
    let std_errors: Vec<f64> = (0..n_terms)
        .map(|k| (sigma2 * cov[(k, k)]).sqrt() / xmax.powi(powers[k]))
        .collect();
    Ok(SeriesFit {
        parity,
        coefficients,
        std_errors,
        residual: (resid.norm_squared() / xi_grid.len() as f64).sqrt(),
    })
}

/// Default small-ξ grid for leading-coefficient fits.
pub const SERIES_GRID: [f64; 5] = [0.02, 0.04, 0.06, 0.08, 0.1];

/// Leading (linear-in-ξ) coefficients of κ_ntz and their successive ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct NtzTable {
    /// (n, leading coefficient of κ_ntz / ξ)
    pub entries: Vec<(usize, f64)>,
    /// D · κ_{(n+1)tz} / κ_ntz for consecutive entries.
    pub ratios: Vec<f64>,
}

pub fn ntz_table(v: f64, dcoeff: f64, n_max: usize, xi_grid: &[f64]) -> Result<NtzTable> {
    if n_max < 3 {
        return Err(Error::Domain(format!(
            "table needs n_max >= 3, got {n_max}"
        )));
    }
    let q = Quadrature::shared();
    let lists = xi_grid
        .iter()
        .map(|&xi| {
            let s = ScatteringSetup::with_xi(v, dcoeff, xi)?;
            let c = q.evaluator(&s)?.kappa_ntz_list(n_max);
            let f = q.fine_evaluator(&s)?.kappa_ntz_list(n_max);
            for (n, (a, b)) in c.iter().zip(&f).enumerate() {
                let scale = v / dcoeff.powi(n as i32 + 1) * xi.abs();
                if (a - b).abs() > q.tolerance * scale {
                    return Err(Error::Numerical(format!(
                        "kappa_{}tz at xi = {xi}: grids disagree ({a} vs {b})",
                        n + 1
                    )));
                }
            }
            Ok(c)
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let mut entries = Vec::new();
    for n in 2..=n_max {
        let fit = series_fit(
            |xi| {
                let i = xi_grid.iter().position(|&x| x == xi).unwrap();
                Ok(lists[i][n - 1])
            },
            xi_grid,
            Parity::Odd,
            2,
        )?;
        entries.push((n, fit.leading()));
    }
    let ratios = entries
        .windows(2)
        .map(|w| dcoeff * w[1].1 / w[0].1)
        .collect();
    Ok(NtzTable { entries, ratios })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(xi: f64) -> ScatteringSetup {
        ScatteringSetup::with_xi(1.0, 1.0, xi).unwrap()
    }

    #[test]
    fn kappa_z_examples() {
        assert_eq!(kappa_z(&setup(0.0)).unwrap(), 0.0);
        assert!((kappa_z(&setup(0.1)).unwrap() - 0.0333).abs() < 5e-4);
        assert!((kappa_z(&setup(1.0)).unwrap() - 0.3130352855).abs() < 1e-10);
    }

    #[test]
    fn bw_examples() {
        assert!((kappa_zz_bw(&setup(0.0)).unwrap() - 1.0 / 6.0).abs() < 1e-12);
        let x: f64 = 0.3;
        let series = (1.0 - x * x / 15.0 + 2.0 * x.powi(4) / 315.0) / 6.0;
        assert!((kappa_zz_bw(&setup(0.3)).unwrap() / series - 1.0).abs() < 1e-4);
        let a = kappa_zz_bw(&setup(0.3)).unwrap();
        let b = kappa_zz_bw(&setup(-0.3)).unwrap();
        assert!((a - b).abs() < 1e-12);
        for xi in [0.05, 0.5, 2.0] {
            let s = setup(xi);
            let r = kappa_zz_bw(&s).unwrap() / kappa_tgk_closed_form(&s) - 1.0;
            assert!(r.abs() < 1e-10, "{xi} {r}");
        }
    }

    #[test]
    fn tz_examples() {
        assert!(kappa_tz(&setup(0.0)).unwrap().abs() < 1e-11);
        assert!((kappa_tz(&setup(0.1)).unwrap() - 0.0222).abs() < 2e-4);
    }

    #[test]
    fn tzz_examples() {
        let k0 = kappa_tzz(&setup(0.0)).unwrap();
        assert!((k0 + 1.0 / 36.0).abs() < 1e-9, "{k0}");
        assert!(kappa_tzz(&setup(0.1)).unwrap() < 0.0);
        let v2 = kappa_tzz(&ScatteringSetup::with_xi(2.0, 1.0, 0.0).unwrap()).unwrap();
        assert!((v2 + 4.0 / 36.0).abs() < 1e-9);
        // the series branch of phi agrees with the closed form near the switch
        for mu in [-1.0, -0.3, 0.4, 1.0] {
            assert!((phi(1e-4 * (1.0 - 1e-9), mu) - phi(1e-4 * (1.0 + 1e-9), mu)).abs() < 1e-9);
        }
    }

    #[test]
    fn ntz_examples() {
        let s = setup(0.05);
        let k2 = kappa_ntz(2, &s).unwrap();
        assert!((k2 / (-13.0 / 108.0 * 0.05) - 1.0).abs() < 0.01);
        let k3 = kappa_ntz(3, &s).unwrap();
        assert!((k3 / (5.0 / 81.0 * 0.05) - 1.0).abs() < 0.01);
        assert!(kappa_ntz(1, &s).is_err());
    }

    #[test]
    fn dv_formula_examples() {
        let x: f64 = 0.3;
        let want = (1.0 - 14.0 * x * x / 45.0) / 6.0;
        assert!((kappa_dv_formula(&setup(0.3)).unwrap() / want - 1.0).abs() < 1e-3);
        assert!((kappa_dv_formula(&setup(0.0)).unwrap() - 1.0 / 6.0).abs() < 1e-12);
        let a = kappa_dv_formula(&setup(0.4)).unwrap();
        let b = kappa_dv_formula(&setup(-0.4)).unwrap();
        assert!((a - b).abs() < 1e-10 * a);
    }

    #[test]
    fn dv_exact_series() {
        assert!((kappa_dv_exact(&setup(0.0)).unwrap() - 1.0 / 6.0).abs() < 1e-11);
        let fit = series_fit(|x| kappa_dv_exact(&setup(x)), &SERIES_GRID, Parity::Even, 3).unwrap();
        assert!((fit.coefficients[0] - 1.0 / 6.0).abs() < 1e-10);
        assert!((fit.coefficients[1] / fit.coefficients[0] + 14.0 / 45.0).abs() < 1e-4);
    }

    #[test]
    fn series_fit_examples() {
        let f = series_fit(|x| kappa_z(&setup(x)), &SERIES_GRID, Parity::Odd, 2).unwrap();
        assert!((f.leading() * 3.0 - 1.0).abs() < 1e-3);
        let z = series_fit(|_| Ok(0.0), &SERIES_GRID, Parity::Even, 2).unwrap();
        assert!(z.coefficients.iter().all(|&c| c == 0.0));
        assert!(series_fit(|_| Ok(0.0), &SERIES_GRID[..3], Parity::Even, 2).is_err());
        assert!(series_fit(|_| Ok(0.0), &[0.1, 0.1, 0.1, 0.1], Parity::Odd, 2).is_err());
    }

    #[test]
    fn bad_reference_point() {
        let q = Quadrature::new(64).unwrap();
        assert!(q.with_reference(1.0).is_err());
    }
}
