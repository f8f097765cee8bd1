//! Physical setup: scattering model, focusing geometry, the focusing
//! potential M(μ) and the pitch-angle grid used by the nested integrals.

use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pitch-angle diffusion model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// D_μμ = D (1 − μ²)
    #[default]
    Isotropic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringSetup {
    pub v: f64,
    pub dcoeff: f64,
    /// Focusing length L; infinite for a uniform field.
    pub focusing_length: f64,
    pub xi: f64,
    pub model: Model,
}

impl ScatteringSetup {
    /// Build from the focusing parameter ξ = v / (2 D L).
    pub fn with_xi(v: f64, dcoeff: f64, xi: f64) -> Result<Self> {
        check_positive(v, dcoeff)?;
        if !xi.is_finite() {
            return Err(Error::Setup(format!("xi must be finite, got {xi}")));
        }
        let focusing_length = if xi == 0.0 {
            f64::INFINITY
        } else {
            v / (2.0 * dcoeff * xi)
        };
        Ok(Self {
            v,
            dcoeff,
            focusing_length,
            xi,
            model: Model::Isotropic,
        })
    }

    /// Build from the focusing length L (either sign; `f64::INFINITY` for no focusing).
    pub fn with_focusing_length(v: f64, dcoeff: f64, focusing_length: f64) -> Result<Self> {
        check_positive(v, dcoeff)?;
        if focusing_length == 0.0 || focusing_length.is_nan() {
            return Err(Error::Setup(format!(
                "focusing length must be nonzero, got {focusing_length}"
            )));
        }
        let xi = if focusing_length.is_infinite() {
            0.0
        } else {
            v / (2.0 * dcoeff * focusing_length)
        };
        if !xi.is_finite() {
            return Err(Error::Setup(format!("derived xi is not finite: {xi}")));
        }
        Ok(Self {
            v,
            dcoeff,
            focusing_length,
            xi,
            model: Model::Isotropic,
        })
    }

    pub fn with_model(mut self, model: Model) -> Self {
        self.model = model;
        self
    }

    /// Same v and D, opposite focusing direction.
    pub fn mirrored(&self) -> Self {
        Self {
            xi: -self.xi,
            focusing_length: -self.focusing_length,
            ..*self
        }
    }

    pub fn d_mumu(&self, mu: f64) -> f64 {
        match self.model {
            Model::Isotropic => self.dcoeff * (1.0 - mu * mu),
        }
    }

    pub fn d_mumu_derivative(&self, mu: f64) -> f64 {
        match self.model {
            Model::Isotropic => -2.0 * self.dcoeff * mu,
        }
    }

    /// Focusing drift v(1 − μ²)/(2L).
    pub fn focusing_drift(&self, mu: f64) -> f64 {
        self.v * (1.0 - mu * mu) / (2.0 * self.focusing_length)
    }

    /// (1 − μ²) / D_μμ, finite at the endpoints for every supported model.
    pub fn kernel(&self, mu: f64) -> f64 {
        match self.model {
            Model::Isotropic => {
                let _ = mu;
                1.0 / self.dcoeff
            }
        }
    }

    /// κ_∥0 = (v²/8) ∫ (1 − μ²)² / D_μμ dμ.
    pub fn kappa_parallel0(&self) -> f64 {
        match self.model {
            Model::Isotropic => self.v * self.v / (6.0 * self.dcoeff),
        }
    }
}

fn check_positive(v: f64, dcoeff: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::Setup(format!("speed must be positive, got {v}")));
    }
    if !(dcoeff > 0.0 && dcoeff.is_finite()) {
        return Err(Error::Setup(format!(
            "scattering strength must be positive, got {dcoeff}"
        )));
    }
    Ok(())
}

fn check_mu(mu: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&mu) {
        return Err(Error::Domain(format!("mu = {mu} outside [-1, 1]")));
    }
    Ok(())
}

/// Focusing potential M(μ) = (v/2L) ∫_{−1}^{μ} (1 − ν²)/D_νν dν.
pub fn mu_potential(setup: &ScatteringSetup, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    Ok(match setup.model {
        Model::Isotropic => setup.xi * (mu + 1.0),
    })
}

/// M(μ) by direct quadrature of the defining integral; model independent.
pub fn mu_potential_quadrature(setup: &ScatteringSetup, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    if setup.xi == 0.0 || mu == -1.0 {
        return Ok(0.0);
    }
    let rule = GaussLegendre::new(32).map_err(|e| Error::Numerical(e.to_string()))?;
    // v / (2L) = ξ D
    let scale = setup.xi * setup.dcoeff;
    Ok(scale * rule.integrate(-1.0, mu, |nu| setup.kernel(nu)))
}

/// Langevin function coth x − 1/x.
pub fn langevin(x: f64) -> f64 {
    if x.abs() < 0.1 {
        // Laurent series of coth x − 1/x; truncation error below x^13 / 4.5e6
        const C: [f64; 6] = [
            1.0 / 3.0,
            -1.0 / 45.0,
            2.0 / 945.0,
            -1.0 / 4725.0,
            2.0 / 93555.0,
            -1382.0 / 638512875.0,
        ];
        let x2 = x * x;
        x * C.iter().rev().fold(0.0, |acc, c| acc * x2 + c)
    } else {
        1.0 / x.tanh() - 1.0 / x
    }
}

/// ⟨μ⟩ under the equilibrium weight e^{M(μ)}.
pub fn equilibrium_mean_mu(setup: &ScatteringSetup) -> f64 {
    match setup.model {
        Model::Isotropic => langevin(setup.xi),
    }
}

pub const DEFAULT_GRID_SIZE: usize = 256;
/// Half-width of the rapidity interval.
pub const DEFAULT_SPAN: f64 = 14.0;

/// Pitch-angle grid on μ = tanh(s) with Gauss-Legendre nodes in s ∈ [−S, S].
///
/// Nodes are strictly increasing in s; in μ they saturate to ±1 in
/// floating point near the ends, so μ is only nondecreasing there.
///
/// The map clusters nodes at μ = ±1, where the nested integrands carry
/// 1/(1 − μ²) factors; in s those factors are smooth. Cumulative integrals
/// use the Legendre expansion of the integrand in s, so they are spectrally
/// accurate and cost one matrix-vector product.
#[derive(Debug, Clone)]
pub struct PitchGrid {
    span: f64,
    x: Vec<f64>,
    s: Vec<f64>,
    mu: Vec<f64>,
    sech2: Vec<f64>,
    ds_weights: Vec<f64>,
    weights: Vec<f64>,
    // a_k = (2k+1)/2 Σ_j w_j P_k(x_j) g_j, row-major (k, j)
    analysis: Vec<f64>,
    // C_ij, ∫_{−S}^{s_i} g ds = Σ_j C_ij g_j
    cumulative: Vec<f64>,
}

impl PitchGrid {
    pub fn new(n: usize) -> Result<Self> {
        Self::with_span(n, DEFAULT_SPAN)
    }

    pub fn with_span(n: usize, span: f64) -> Result<Self> {
        if n < 8 {
            return Err(Error::Domain(format!(
                "grid needs at least 8 nodes, got {n}"
            )));
        }
        if !(span > 0.0 && span.is_finite()) {
            return Err(Error::Domain(format!("span must be positive, got {span}")));
        }
        let rule = GaussLegendre::new(n).map_err(|e| Error::Numerical(e.to_string()))?;
        let mut pairs: Vec<(f64, f64)> = rule.into_node_weight_pairs();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let xw: Vec<f64> = pairs.iter().map(|p| p.1).collect();

        let s: Vec<f64> = x.iter().map(|&xi| span * xi).collect();
        let mu: Vec<f64> = s.iter().map(|&si| si.tanh()).collect();
        let sech2: Vec<f64> = s.iter().map(|&si| sech2(si)).collect();
        let ds_weights: Vec<f64> = xw.iter().map(|&w| span * w).collect();
        let mut weights: Vec<f64> = ds_weights.iter().zip(&sech2).map(|(w, c)| w * c).collect();
        // mass of dμ beyond |s| > S, 1 − tanh S, lumped onto the outermost nodes
        let e = (-2.0 * span).exp();
        let tail = 2.0 * e / (1.0 + e);
        weights[0] += tail;
        weights[n - 1] += tail;

        let p = legendre_table(&x, n + 1);
        let mut analysis = vec![0.0; n * n];
        for k in 0..n {
            let f = (2 * k + 1) as f64 / 2.0;
            for j in 0..n {
                analysis[k * n + j] = f * xw[j] * p[k][j];
            }
        }
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            q[i * n] = x[i] + 1.0;
            for k in 1..n {
                q[i * n + k] = (p[k + 1][i] - p[k - 1][i]) / (2 * k + 1) as f64;
            }
        }
        let mut cumulative = vec![0.0; n * n];
        for i in 0..n {
            let row = &mut cumulative[i * n..(i + 1) * n];
            for k in 0..n {
                let qik = span * q[i * n + k];
                if qik == 0.0 {
                    continue;
                }
                let a = &analysis[k * n..(k + 1) * n];
                for (r, &ak) in row.iter_mut().zip(a) {
                    *r += qik * ak;
                }
            }
        }
        Ok(Self {
            span,
            x,
            s,
            mu,
            sech2,
            ds_weights,
            weights,
            analysis,
            cumulative,
        })
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// Highest monomial degree integrated to 1e−13 relative accuracy.
    pub fn design_order(&self) -> usize {
        self.len() / 32
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn nodes(&self) -> &[f64] {
        &self.mu
    }

    /// Weights for ∫ f dμ.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weights for ∫ g ds.
    pub fn ds_weights(&self) -> &[f64] {
        &self.ds_weights
    }

    pub fn rapidities(&self) -> &[f64] {
        &self.s
    }

    /// 1 − μ² at the nodes, computed as sech²(s) without cancellation.
    pub fn one_minus_mu2(&self) -> &[f64] {
        &self.sech2
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        dot(&self.weights, f)
    }

    pub fn integrate_ds(&self, g: &[f64]) -> f64 {
        dot(&self.ds_weights, g)
    }

    /// ∫_{−S}^{s_i} g ds at every node.
    pub fn cumulative_ds(&self, g: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| dot(&self.cumulative[i * n..(i + 1) * n], g))
            .collect()
    }

    /// ∫_{−1}^{μ_i} f dμ at every node.
    pub fn cumulative(&self, f: &[f64]) -> Vec<f64> {
        let g: Vec<f64> = f.iter().zip(&self.sech2).map(|(a, b)| a * b).collect();
        self.cumulative_ds(&g)
    }

    /// ∫_{−S}^{s0} g ds for an off-grid rapidity s0.
    pub fn antiderivative_ds_at(&self, g: &[f64], s0: f64) -> f64 {
        let n = self.len();
        let x0 = (s0 / self.span).clamp(-1.0, 1.0);
        let p = legendre_table(&[x0], n + 1);
        let mut total = (x0 + 1.0) * dot(&self.analysis[0..n], g);
        for k in 1..n {
            let qk = (p[k + 1][0] - p[k - 1][0]) / (2 * k + 1) as f64;
            total += qk * dot(&self.analysis[k * n..(k + 1) * n], g);
        }
        self.span * total
    }

    pub fn gl_nodes(&self) -> &[f64] {
        &self.x
    }
}

fn sech2(s: f64) -> f64 {
    let e = (-2.0 * s.abs()).exp();
    4.0 * e / ((1.0 + e) * (1.0 + e))
}

/// P_0..P_{kmax−1} at the points; table[k][i].
fn legendre_table(x: &[f64], kmax: usize) -> Vec<Vec<f64>> {
    let mut p = vec![vec![1.0; x.len()]; kmax];
    if kmax > 1 {
        p[1].copy_from_slice(x);
    }
    for k in 1..kmax.saturating_sub(1) {
        let (lo, hi) = p.split_at_mut(k + 1);
        for i in 0..x.len() {
            hi[0][i] =
                ((2 * k + 1) as f64 * x[i] * lo[k][i] - k as f64 * lo[k - 1][i]) / (k + 1) as f64;
        }
    }
    p
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(xi: f64) -> ScatteringSetup {
        ScatteringSetup::with_xi(1.0, 1.0, xi).unwrap()
    }

    #[test]
    fn potential_examples() {
        assert_eq!(mu_potential(&setup(0.5), 1.0).unwrap(), 1.0);
        assert_eq!(mu_potential(&setup(0.0), 0.3).unwrap(), 0.0);
        assert!((mu_potential(&setup(0.3), 0.0).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(mu_potential(&setup(0.3), -1.0).unwrap(), 0.0);
        assert!(matches!(
            mu_potential(&setup(0.3), 1.5),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn potential_quadrature_matches_closed_form() {
        for &xi in &[-0.7, 0.0, 0.3, 1.2] {
            for &mu in &[-1.0, -0.4, 0.0, 0.9, 1.0] {
                let a = mu_potential(&setup(xi), mu).unwrap();
                let b = mu_potential_quadrature(&setup(xi), mu).unwrap();
                assert!((a - b).abs() < 1e-13, "{xi} {mu}");
            }
        }
    }

    #[test]
    fn setup_from_length() {
        let s = ScatteringSetup::with_focusing_length(2.0, 0.5, 4.0).unwrap();
        assert!((s.xi - 0.5).abs() < 1e-15);
        let flat = ScatteringSetup::with_focusing_length(1.0, 1.0, f64::INFINITY).unwrap();
        assert_eq!(flat.xi, 0.0);
        assert!(ScatteringSetup::with_focusing_length(1.0, 1.0, 0.0).is_err());
        assert!(ScatteringSetup::with_xi(-1.0, 1.0, 0.1).is_err());
        assert!(ScatteringSetup::with_xi(1.0, 0.0, 0.1).is_err());
        assert!(ScatteringSetup::with_xi(1.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn mean_mu_examples() {
        assert_eq!(equilibrium_mean_mu(&setup(0.0)), 0.0);
        assert!((equilibrium_mean_mu(&setup(1.0)) - 0.3130352855).abs() < 1e-10);
        let m = equilibrium_mean_mu(&setup(0.1));
        assert!((m - 0.1 / 3.0).abs() < 1e-4);
        // both branches of the Langevin function agree at the switch
        assert!((langevin(0.1 * (1.0 - 1e-12)) - langevin(0.1 * (1.0 + 1e-12))).abs() < 1e-13);
    }

    #[test]
    fn grid_weights_and_order() {
        let g = PitchGrid::new(DEFAULT_GRID_SIZE).unwrap();
        let total: f64 = g.weights().iter().sum();
        assert!((total - 2.0).abs() < 2e-12);
        assert!(g.rapidities().windows(2).all(|w| w[0] < w[1]));
        assert!(g.nodes().windows(2).all(|w| w[0] <= w[1]));
        assert!(g.nodes().iter().all(|m| m.abs() <= 1.0));
        assert!(g.weights().iter().all(|&w| w > 0.0));
        assert_eq!(g.design_order(), 8);
        for k in 0..=g.design_order() as i32 {
            let f: Vec<f64> = g.nodes().iter().map(|m| m.powi(k)).collect();
            let exact = if k % 2 == 1 {
                0.0
            } else {
                2.0 / (k + 1) as f64
            };
            let got = g.integrate(&f);
            assert!((got - exact).abs() < 1e-13 * exact.max(1.0), "degree {k}");
        }
    }

    #[test]
    fn cumulative_integral_of_polynomial() {
        let g = PitchGrid::new(DEFAULT_GRID_SIZE).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|m| 3.0 * m * m - 1.0).collect();
        let c = g.cumulative(&f);
        for (ci, m) in c.iter().zip(g.nodes()) {
            let exact = m * m * m - m;
            assert!((ci - exact).abs() < 1e-9, "{m} {ci} {exact}");
        }
        let h: Vec<f64> = g.rapidities().iter().map(|s| s.cos()).collect();
        let s0 = 0.37;
        let got = g.antiderivative_ds_at(&h, s0);
        let exact = s0.sin() + g.span().sin();
        assert!((got - exact).abs() < 1e-11, "{got} {exact}");
    }
}
