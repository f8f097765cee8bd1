//! Monte Carlo for the pitch-angle SDE
//! dμ = [∂D_μμ/∂μ + v(1 − μ²)/(2L)] dt + √(2 D_μμ) dW,  dz = vμ dt.
//!
//! Particles are simulated in units v = D = 1 and rescaled on output.
//! Random numbers: `ChaCha8Rng` seeded with `seed_from_u64(seed)` and
//! switched to stream `particle_index`; draws within a stream are
//! consumed sequentially: one uniform for μ₀, then two standard normals per
//! step (one for the Euler scheme)
//! from `rand_distr::StandardNormal`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{equilibrium_mean_mu, ScatteringSetup};

/// Upper bound on D·dt.
pub const MAX_DT: f64 = 0.01;
const CHUNK: usize = 512;

/// Time integrator for the pitch-angle SDE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Half-step exact focusing flow, a random great-circle step on the
    /// velocity sphere with angle scaled so E[cos ρ] = e^{−2D dt}, then the
    /// second focusing half-step.
    #[default]
    Geodesic,
    /// Euler–Maruyama with one reflection at μ = ±1 (see [`step`]).
    EulerReflect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub setup: ScatteringSetup,
    pub n_particles: usize,
    pub dt: f64,
    pub t_max: f64,
    pub n_snapshots: usize,
    pub seed: u64,
    /// Trailing fraction of [0, t_max] used by the DV fit.
    pub fit_window: f64,
    pub vacf_cutoff: f64,
    /// Lag spacing of the recorded VACF.
    pub vacf_spacing: f64,
    /// Independent particle groups used for error bars.
    pub n_batches: usize,
    pub scheme: Scheme,
    /// Subtract zero-mean martingale terms built from the scattering kicks
    /// from the displacement and VACF samples; off gives the plain estimators.
    pub control_variates: bool,
}

impl SimConfig {
    pub fn new(setup: ScatteringSetup) -> Self {
        let d = setup.dcoeff;
        Self {
            setup,
            n_particles: 200_000,
            dt: 5e-3 / d,
            t_max: 100.0 / d,
            n_snapshots: 200,
            seed: 1,
            fit_window: 0.5,
            vacf_cutoff: 20.0 / d,
            vacf_spacing: 0.01 / d,
            n_batches: 20,
            scheme: Scheme::Geodesic,
            control_variates: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.setup.dcoeff;
        let bad = |m: String| Err(Error::Config(m));
        if !(self.dt > 0.0 && self.dt * d <= MAX_DT * (1.0 + 1e-12)) {
            return bad(format!("dt must lie in (0, {MAX_DT}/D], got {}", self.dt));
        }
        if !(self.t_max.is_finite() && self.t_max >= self.dt) {
            return bad(format!("t_max must be at least dt, got {}", self.t_max));
        }
        if self.n_snapshots < 2 {
            return bad("need at least 2 snapshots".into());
        }
        if self.total_steps() < self.n_snapshots {
            return bad("more snapshots than time steps".into());
        }
        if !(self.fit_window > 0.0 && self.fit_window <= 1.0) {
            return bad(format!(
                "fit_window must lie in (0, 1], got {}",
                self.fit_window
            ));
        }
        if !(self.vacf_spacing > 0.0 && self.vacf_cutoff >= 0.0 && self.vacf_cutoff <= self.t_max) {
            return bad("vacf cutoff must lie in [0, t_max] with positive spacing".into());
        }
        if self.n_batches < 2 || self.n_batches > self.n_particles {
            return bad(format!(
                "n_batches must lie in [2, n_particles], got {}",
                self.n_batches
            ));
        }
        Ok(())
    }

    /// Soft warnings for runs meant to estimate κ_DV.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.t_max * self.setup.dcoeff < 50.0 {
            w.push(format!(
                "t_max = {} is short of 50/D for a DV fit",
                self.t_max
            ));
        }
        if self.n_particles < 10_000 {
            w.push(format!(
                "{} particles is below the 1e4 acceptance floor",
                self.n_particles
            ));
        }
        w
    }

    fn tau(&self) -> f64 {
        self.dt * self.setup.dcoeff
    }

    pub fn total_steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }

    fn snapshot_stride(&self) -> usize {
        (self.total_steps() / self.n_snapshots).max(1)
    }

    fn vacf_stride(&self) -> usize {
        ((self.vacf_spacing / self.dt).round() as usize).max(1)
    }

    fn n_lags(&self) -> usize {
        ((self.vacf_cutoff / (self.vacf_stride() as f64 * self.dt)) + 1e-9).floor() as usize
    }

    fn batch_start(&self, b: usize) -> usize {
        (b * self.n_particles).div_ceil(self.n_batches)
    }
}

/// One Euler–Maruyama step with `dw` ~ N(0, dt).
pub fn step(state: (f64, f64), setup: &ScatteringSetup, dt: f64, dw: f64) -> Result<(f64, f64)> {
    let (z, mu) = state;
    if z.is_nan() || mu.is_nan() || dw.is_nan() {
        return Err(Error::Numerical("NaN in particle state".into()));
    }
    if !(-1.0..=1.0).contains(&mu) {
        return Err(Error::Domain(format!("mu = {mu} outside [-1, 1]")));
    }
    if !(dt > 0.0 && dt * setup.dcoeff <= MAX_DT * (1.0 + 1e-12)) {
        return Err(Error::Config(format!("dt = {dt} outside (0, {MAX_DT}/D]")));
    }
    let drift = setup.d_mumu_derivative(mu) + setup.focusing_drift(mu);
    let mut next = mu + drift * dt + (2.0 * setup.d_mumu(mu)).sqrt() * dw;
    if next > 1.0 {
        next = 2.0 - next;
    } else if next < -1.0 {
        next = -2.0 - next;
    }
    if !(-1.0..=1.0).contains(&next) {
        return Err(Error::Numerical(format!(
            "pitch step overshoots twice (mu = {mu}, dw = {dw})"
        )));
    }
    Ok((z + setup.v * mu * dt, next))
}

/// E[cos(aR)] for Rayleigh R with unit scale.
fn rayleigh_mean_cos(a2: f64) -> f64 {
    // Σ (−2a²)^k k!/(2k)!
    let mut sum = 0.0;
    let mut term: f64 = 1.0;
    let mut k = 0.0;
    while term.abs() > 1e-18 {
        sum += term;
        k += 1.0;
        term *= -2.0 * a2 * k / ((2.0 * k - 1.0) * (2.0 * k));
    }
    sum
}

/// Angle scale a with E[cos(aR)] = e^{−2τ}.
fn geodesic_scale(tau: f64) -> f64 {
    let target = (-2.0 * tau).exp();
    let mut a2 = 2.0 * tau;
    for _ in 0..60 {
        let f = rayleigh_mean_cos(a2) - target;
        let h = 1e-7 * a2;
        let df = (rayleigh_mean_cos(a2 + h) - rayleigh_mean_cos(a2 - h)) / (2.0 * h);
        let next = a2 - f / df;
        if (next - a2).abs() <= 1e-16 * a2 {
            a2 = next;
            break;
        }
        a2 = next;
    }
    a2.sqrt()
}

/// Dimensionless single-particle integrator (v = D = 1).
struct Stepper {
    scheme: Scheme,
    tau: f64,
    xi: f64,
    half_flow: f64,
    scale: f64,
    sqrt_tau: f64,
    decay: f64,
    /// E[cos²ρ] and E[sin²ρ]/2 for the geodesic kick.
    cos2: f64,
    sin2_half: f64,
}

impl Stepper {
    fn new(cfg: &SimConfig) -> Self {
        let tau = cfg.tau();
        let xi = cfg.setup.xi;
        let a = geodesic_scale(tau);
        let c2 = rayleigh_mean_cos(4.0 * a * a);
        Self {
            scheme: cfg.scheme,
            tau,
            xi,
            half_flow: (0.5 * xi * tau).tanh(),
            scale: a,
            sqrt_tau: tau.sqrt(),
            decay: (-2.0 * tau).exp(),
            cos2: 0.5 * (1.0 + c2),
            sin2_half: 0.25 * (1.0 - c2),
        }
    }

    #[inline]
    fn flow(&self, mu: f64) -> f64 {
        (mu + self.half_flow) / (1.0 + mu * self.half_flow)
    }

    /// Advance (z, μ) by one step; z in units of v/D. Returns the
    /// zero-mean part of the scattering kick and its conditional variance.
    #[inline]
    fn advance(&self, z: &mut f64, mu: &mut f64, rng: &mut ChaCha8Rng) -> (f64, f64) {
        let g1: f64 = rng.sample(StandardNormal);
        let m0 = *mu;
        match self.scheme {
            Scheme::Geodesic => {
                let g2: f64 = rng.sample(StandardNormal);
                let m = self.flow(m0);
                let r = (g1 * g1 + g2 * g2).sqrt();
                let (s, c) = (self.scale * r).sin_cos();
                let f = if r > 0.0 { s / r } else { self.scale };
                let kicked = (m * c + (1.0 - m * m).max(0.0).sqrt() * f * g1).clamp(-1.0, 1.0);
                *mu = self.flow(kicked);
                *z += 0.5 * (m0 + *mu) * self.tau;
                // the rotation is isotropic, so E[kicked | m] = e^{−2τ} m
                let var =
                    m * m * (self.cos2 - self.decay * self.decay) + (1.0 - m * m) * self.sin2_half;
                (kicked - self.decay * m, var)
            }
            Scheme::EulerReflect => {
                let noise = (2.0 * (1.0 - m0 * m0)).sqrt() * self.sqrt_tau * g1;
                let drift = -2.0 * m0 + self.xi * (1.0 - m0 * m0);
                let mut m = m0 + drift * self.tau + noise;
                if m > 1.0 {
                    m = 2.0 - m;
                } else if m < -1.0 {
                    m = -2.0 - m;
                }
                *mu = m.clamp(-1.0, 1.0);
                *z += m0 * self.tau;
                (noise, 2.0 * (1.0 - m0 * m0) * self.tau)
            }
        }
    }
}

fn particle_rng(seed: u64, particle: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(particle as u64);
    rng
}

/// Per-group sums in internal units.
#[derive(Debug, Clone, PartialEq)]
struct Sums {
    count: usize,
    z: Vec<f64>,
    z2: Vec<f64>,
    mm: Vec<f64>,
}

impl Sums {
    fn zeros(n_snap: usize, n_lag: usize) -> Self {
        Self {
            count: 0,
            z: vec![0.0; n_snap],
            z2: vec![0.0; n_snap],
            mm: vec![0.0; n_lag],
        }
    }

    fn add(&mut self, other: &Sums) {
        self.count += other.count;
        for (a, b) in self.z.iter_mut().zip(&other.z) {
            *a += b;
        }
        for (a, b) in self.z2.iter_mut().zip(&other.z2) {
            *a += b;
        }
        for (a, b) in self.mm.iter_mut().zip(&other.mm) {
            *a += b;
        }
    }
}

/// First and second displacement moments on the snapshot grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub mean_dz: Vec<f64>,
    pub mean_dz2: Vec<f64>,
    pub variance: Vec<f64>,
    pub running_kdv: Vec<f64>,
    pub se_mean: Vec<f64>,
    pub se_var: Vec<f64>,
    /// Particle count behind every snapshot.
    pub counts: Vec<usize>,
    /// variance(t) computed within each particle batch.
    pub batch_variance: Vec<Vec<f64>>,
}

impl EnsembleStats {
    /// Stats holding only a variance curve, without batch information.
    pub fn from_variance(times: Vec<f64>, variance: Vec<f64>) -> Result<Self> {
        if times.len() != variance.len() || times.len() < 2 {
            return Err(Error::Config(
                "times and variance must match, length >= 2".into(),
            ));
        }
        let n = times.len();
        let running_kdv = running_slope(&times, &variance);
        Ok(Self {
            mean_dz: vec![0.0; n],
            mean_dz2: variance.clone(),
            running_kdv,
            se_mean: vec![0.0; n],
            se_var: vec![0.0; n],
            counts: vec![0; n],
            batch_variance: Vec::new(),
            times,
            variance,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Velocity autocorrelation v²⟨μ(τ)μ(0)⟩ and its running integral.
#[derive(Debug, Clone, PartialEq)]
pub struct VacfRecord {
    pub lags: Vec<f64>,
    pub vacf: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub batch_cumulative: Vec<Vec<f64>>,
}

/// Everything one ensemble run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleRun {
    pub stats: EnsembleStats,
    pub vacf: VacfRecord,
    /// μ of every particle at t_max, in particle order.
    pub final_mu: Vec<f64>,
}

fn running_slope(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len();
    (0..n)
        .map(|k| {
            let (a, b) = match k {
                0 => (0, 1.min(n - 1)),
                _ if k == n - 1 => (k - 1, k),
                _ => (k - 1, k + 1),
            };
            if a == b {
                0.0
            } else {
                0.5 * (y[b] - y[a]) / (t[b] - t[a])
            }
        })
        .collect()
}

fn trapezoid_cumulative(dx: f64, y: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(y.len());
    let mut acc = 0.0;
    for k in 0..y.len() {
        if k > 0 {
            acc += 0.5 * dx * (y[k - 1] + y[k]);
        }
        out.push(acc);
    }
    out
}

fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let m = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (m, 0.0);
    }
    let var = samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Martingale bookkeeping along one trajectory.
///
/// With r = e^{−2τ} and kicks ε_n (E[ε_n | past] = 0, known conditional
/// variance v_n), the pitch obeys μ_{n+1} = r μ_n + ε_n exactly at ξ = 0, so
/// z_k = f_k μ₀ + M_k with M_k = Σ w_{kn} ε_n, w_{kn} = α − γ r^{k−n}.
/// M_k, (f_k μ₀ + c_k) M_k and M_k² − Σ w_{kn}² v_n have zero mean for
/// every ξ and deterministic c_k;
/// subtracting them leaves the estimators unbiased and removes the noise
/// they explain.
#[derive(Default)]
struct Martingale {
    /// Σ ε_n
    sum: f64,
    /// Σ r^{k−1−n} ε_n
    decayed: f64,
    /// Σ v_n, Σ r^{k−n} v_n, Σ r^{2(k−n)} v_n
    v0: f64,
    v1: f64,
    v2: f64,
}

impl Martingale {
    #[inline]
    fn push(&mut self, r: f64, eps: f64, var: f64) {
        self.sum += eps;
        self.decayed = r * self.decayed + eps;
        self.v0 += var;
        self.v1 = r * (self.v1 + var);
        self.v2 = r * r * (self.v2 + var);
    }
}

struct Weights {
    r: f64,
    alpha: f64,
    gamma: f64,
}

impl Weights {
    fn new(tau: f64) -> Self {
        let r = (-2.0 * tau).exp();
        let alpha = tau / (1.0 - r);
        Self {
            r,
            alpha,
            gamma: alpha + tau / (2.0 * r),
        }
    }

    /// Coefficient of μ₀ in z_k at ξ = 0.
    fn drift(&self, tau: f64, k: usize) -> f64 {
        let rk = self.r.powi(k as i32);
        tau * ((1.0 - rk * self.r) / (1.0 - self.r) - 0.5 * (1.0 + rk))
    }

    /// (M_k, Σ w_{kn}² v_n)
    fn martingale(&self, m: &Martingale) -> (f64, f64) {
        let big_m = self.alpha * m.sum - self.gamma * self.r * m.decayed;
        let q = self.alpha * self.alpha * m.v0 - 2.0 * self.alpha * self.gamma * m.v1
            + self.gamma * self.gamma * m.v2;
        (big_m, q)
    }
}

fn simulate_chunk(cfg: &SimConfig, stepper: &Stepper, lo: usize, hi: usize) -> (Sums, Vec<f64>) {
    let n_snap = cfg.n_snapshots + 1;
    let n_lag = cfg.n_lags() + 1;
    let snap_stride = cfg.snapshot_stride();
    let vacf_stride = cfg.vacf_stride();
    let steps = snap_stride * cfg.n_snapshots;
    let weights = Weights::new(stepper.tau);
    let drift: Vec<f64> = (0..n_snap)
        .map(|s| weights.drift(stepper.tau, s * snap_stride))
        .collect();
    let cv = if cfg.control_variates { 1.0 } else { 0.0 };
    // the drift moves the centre of the ensemble to J t; centring the
    // multipliers of the zero-mean terms there keeps them from adding noise
    let j = equilibrium_mean_mu(&ScatteringSetup {
        v: 1.0,
        ..cfg.setup
    });
    let centre: Vec<f64> = (0..n_snap)
        .map(|s| j * stepper.tau * (s * snap_stride) as f64)
        .collect();
    let lag_decay: Vec<f64> = (0..n_lag)
        .map(|l| weights.r.powi((l * vacf_stride) as i32))
        .collect();
    let mut sums = Sums::zeros(n_snap, n_lag);
    let mut finals = Vec::with_capacity(hi - lo);
    for p in lo..hi {
        let mut rng = particle_rng(cfg.seed, p);
        let mu0: f64 = rng.gen_range(-1.0..=1.0);
        let (mut z, mut mu) = (0.0, mu0);
        let mut mart = Martingale::default();
        let (mut next_lag, mut lag) = (vacf_stride, 1);
        let (mut next_snap, mut snap) = (snap_stride, 1);
        sums.mm[0] += mu0 * mu0;
        for k in 1..=steps {
            let (eps, var) = stepper.advance(&mut z, &mut mu, &mut rng);
            mart.push(weights.r, eps, var);
            if k == next_lag && lag < n_lag {
                // E[μ₀] = 0 and E[μ₀²] = 1/3 make the extra terms zero-mean
                let rk = lag_decay[lag];
                let known = mu0 * (mart.decayed + j * (1.0 - rk)) + (mu0 * mu0 - 1.0 / 3.0) * rk;
                sums.mm[lag] += mu0 * mu - cv * known;
                lag += 1;
                next_lag += vacf_stride;
            }
            if k == next_snap {
                let (m, q) = weights.martingale(&mart);
                let f = drift[snap] * mu0 + centre[snap];
                sums.z[snap] += z - cv * m;
                sums.z2[snap] += z * z - cv * (m * m - q + 2.0 * f * m);
                snap += 1;
                next_snap += snap_stride;
            }
        }
        sums.count += 1;
        finals.push(mu);
    }
    (sums, finals)
}

/// Run the ensemble on the current rayon pool.
pub fn run_ensemble_full(cfg: &SimConfig) -> Result<EnsembleRun> {
    cfg.validate()?;
    let stepper = Stepper::new(cfg);
    // chunks never straddle a batch boundary, so the reduction order is
    // fixed by the configuration alone
    let mut chunks = Vec::new();
    for b in 0..cfg.n_batches {
        let (lo, hi) = (cfg.batch_start(b), cfg.batch_start(b + 1));
        let mut s = lo;
        while s < hi {
            let e = (s + CHUNK).min(hi);
            chunks.push((b, s, e));
            s = e;
        }
    }
    let results: Vec<(usize, Sums, Vec<f64>)> = chunks
        .par_iter()
        .map(|&(b, lo, hi)| {
            let (s, f) = simulate_chunk(cfg, &stepper, lo, hi);
            (b, s, f)
        })
        .collect();

    let n_snap = cfg.n_snapshots + 1;
    let n_lag = cfg.n_lags() + 1;
    let mut batches = vec![Sums::zeros(n_snap, n_lag); cfg.n_batches];
    let mut final_mu = Vec::with_capacity(cfg.n_particles);
    for (b, s, f) in &results {
        batches[*b].add(s);
        final_mu.extend_from_slice(f);
    }
    let mut total = Sums::zeros(n_snap, n_lag);
    for b in &batches {
        total.add(b);
    }
    if final_mu.iter().any(|m| !m.is_finite()) {
        return Err(Error::Numerical(
            "non-finite pitch cosine in ensemble".into(),
        ));
    }

    let d = cfg.setup.dcoeff;
    let v = cfg.setup.v;
    let zscale = v / d;
    let snap_dt = cfg.snapshot_stride() as f64 * cfg.dt;
    let times: Vec<f64> = (0..n_snap).map(|k| k as f64 * snap_dt).collect();
    let moments = |s: &Sums| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = s.count as f64;
        let m1: Vec<f64> = s.z.iter().map(|x| x / n * zscale).collect();
        let m2: Vec<f64> = s.z2.iter().map(|x| x / n * zscale * zscale).collect();
        let var = m1
            .iter()
            .zip(&m2)
            .map(|(a, b)| (b - a * a).max(0.0))
            .collect();
        (m1, m2, var)
    };
    let (mean_dz, mean_dz2, variance) = moments(&total);
    let per_batch: Vec<_> = batches.iter().map(moments).collect();
    let batch_variance: Vec<Vec<f64>> = per_batch.iter().map(|m| m.2.clone()).collect();
    let column_se = |f: &dyn Fn(usize) -> Vec<f64>| -> Vec<f64> {
        (0..n_snap).map(|k| mean_and_se(&f(k)).1).collect()
    };
    let se_mean = column_se(&|k| per_batch.iter().map(|m| m.0[k]).collect());
    let se_var = column_se(&|k| per_batch.iter().map(|m| m.2[k]).collect());
    let running_kdv = running_slope(&times, &variance);

    let lag_dt = cfg.vacf_stride() as f64 * cfg.dt;
    let lags: Vec<f64> = (0..n_lag).map(|k| k as f64 * lag_dt).collect();
    let vacf_of =
        |s: &Sums| -> Vec<f64> { s.mm.iter().map(|x| v * v * x / s.count as f64).collect() };
    let vacf = vacf_of(&total);
    let cumulative = trapezoid_cumulative(lag_dt, &vacf);
    let batch_cumulative = batches
        .iter()
        .map(|b| trapezoid_cumulative(lag_dt, &vacf_of(b)))
        .collect();

    Ok(EnsembleRun {
        stats: EnsembleStats {
            times,
            mean_dz,
            mean_dz2,
            variance,
            running_kdv,
            se_mean,
            se_var,
            counts: vec![total.count; n_snap],
            batch_variance,
        },
        vacf: VacfRecord {
            lags,
            vacf,
            cumulative,
            batch_cumulative,
        },
        final_mu,
    })
}

pub fn run_ensemble(cfg: &SimConfig) -> Result<EnsembleStats> {
    run_ensemble_full(cfg).map(|r| r.stats)
}

/// Run on a dedicated pool of `threads` workers.
pub fn run_ensemble_with_threads(cfg: &SimConfig, threads: usize) -> Result<EnsembleRun> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_ensemble_full(cfg))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
}

fn fit_indices(stats: &EnsembleStats, fit_window: f64) -> Result<Vec<usize>> {
    if !(fit_window > 0.0 && fit_window <= 1.0) {
        return Err(Error::Config(format!(
            "fit_window {fit_window} outside (0, 1]"
        )));
    }
    let t_end = *stats
        .times
        .last()
        .ok_or_else(|| Error::Config("empty stats".into()))?;
    let start = (1.0 - fit_window) * t_end;
    let idx: Vec<usize> = (0..stats.len())
        .filter(|&k| stats.times[k] >= start - 1e-12 * t_end)
        .collect();
    if idx.len() < 10 {
        return Err(Error::Config(format!(
            "fit window holds {} snapshots, need at least 10",
            idx.len()
        )));
    }
    Ok(idx)
}

/// Weighted least squares slope and its formal variance (unit-scaled weights).
fn weighted_slope(t: &[f64], y: &[f64], w: &[f64]) -> (f64, f64, f64) {
    let sw: f64 = w.iter().sum();
    let tm = t.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ym = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let stt: f64 = (0..t.len()).map(|i| w[i] * (t[i] - tm).powi(2)).sum();
    let sty: f64 = (0..t.len()).map(|i| w[i] * (t[i] - tm) * (y[i] - ym)).sum();
    let slope = sty / stt;
    let intercept = ym - slope * tm;
    (slope, intercept, stt)
}

/// κ_DV as half the late-time slope of σ²(t).
pub fn estimate_kappa_dv(stats: &EnsembleStats, cfg: &SimConfig) -> Result<McEstimate> {
    let idx = fit_indices(stats, cfg.fit_window)?;
    let t: Vec<f64> = idx.iter().map(|&k| stats.times[k]).collect();
    let y: Vec<f64> = idx.iter().map(|&k| stats.variance[k]).collect();
    let se: Vec<f64> = idx.iter().map(|&k| stats.se_var[k]).collect();
    let w: Vec<f64> = if se.iter().all(|&s| s > 0.0) {
        let s0 = se[0];
        se.iter().map(|s| (s0 / s).powi(2)).collect()
    } else {
        vec![1.0; t.len()]
    };
    let (slope, intercept, stt) = weighted_slope(&t, &y, &w);
    let value = 0.5 * slope;
    let std_error = if stats.batch_variance.len() >= 2 {
        let slopes: Vec<f64> = stats
            .batch_variance
            .iter()
            .map(|bv| {
                let yb: Vec<f64> = idx.iter().map(|&k| bv[k]).collect();
                0.5 * weighted_slope(&t, &yb, &w).0
            })
            .collect();
        mean_and_se(&slopes).1
    } else {
        let sw: f64 = w.iter().sum();
        let rss: f64 = (0..t.len())
            .map(|i| w[i] * (y[i] - intercept - slope * t[i]).powi(2))
            .sum();
        let s2 = rss / (t.len() as f64 - 2.0) * (t.len() as f64 / sw);
        0.5 * (s2 / stt * sw / t.len() as f64).sqrt()
    };
    if !value.is_finite() {
        return Err(Error::Numerical("DV slope is not finite".into()));
    }
    Ok(McEstimate { value, std_error })
}

/// Trapezoid integral of the VACF up to the configured cutoff.
pub fn kappa_tgk_from_record(rec: &VacfRecord, cfg: &SimConfig) -> Result<McEstimate> {
    let d = cfg.setup.dcoeff;
    if cfg.vacf_cutoff * d < 10.0 - 1e-9 {
        return Err(Error::Config(format!(
            "vacf cutoff {} below 10/D",
            cfg.vacf_cutoff
        )));
    }
    let n = rec.cumulative.len();
    if n < 11 {
        return Err(Error::Config("too few VACF lags".into()));
    }
    let last = n - 1;
    let value = rec.cumulative[last];
    let ends: Vec<f64> = rec.batch_cumulative.iter().map(|c| c[last]).collect();
    let std_error = mean_and_se(&ends).1;
    let tail_start = last - last.div_ceil(10);
    let change = (rec.cumulative[last] - rec.cumulative[tail_start]).abs();
    if change > 3.0 * std_error {
        return Err(Error::Numerical(format!(
            "VACF integral still moving over the last 10% of lags: change {change:e}, noise {std_error:e}"
        )));
    }
    Ok(McEstimate { value, std_error })
}

pub fn estimate_kappa_tgk(cfg: &SimConfig) -> Result<McEstimate> {
    let run = run_ensemble_full(cfg)?;
    kappa_tgk_from_record(&run.vacf, cfg)
}

/// κ_TGK − κ_DV with batch-paired error bar.
pub fn tgk_minus_dv(run: &EnsembleRun, cfg: &SimConfig) -> Result<McEstimate> {
    let dv = estimate_kappa_dv(&run.stats, cfg)?;
    let tgk = kappa_tgk_from_record(&run.vacf, cfg)?;
    let idx = fit_indices(&run.stats, cfg.fit_window)?;
    let t: Vec<f64> = idx.iter().map(|&k| run.stats.times[k]).collect();
    let s0 = run.stats.se_var[idx[0]];
    let w: Vec<f64> = idx
        .iter()
        .map(|&k| {
            let s = run.stats.se_var[k];
            if s > 0.0 && s0 > 0.0 {
                (s0 / s).powi(2)
            } else {
                1.0
            }
        })
        .collect();
    let last = run.vacf.cumulative.len() - 1;
    let diffs: Vec<f64> = run
        .stats
        .batch_variance
        .iter()
        .zip(&run.vacf.batch_cumulative)
        .map(|(bv, bc)| {
            let yb: Vec<f64> = idx.iter().map(|&k| bv[k]).collect();
            bc[last] - 0.5 * weighted_slope(&t, &yb, &w).0
        })
        .collect();
    Ok(McEstimate {
        value: tgk.value - dv.value,
        std_error: mean_and_se(&diffs).1,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport {
    pub n: usize,
    /// KS distance to the normalized e^{ξμ} law.
    pub ks_distance: f64,
    /// KS distance to the uniform law.
    pub ks_uniform: f64,
    /// 1% asymptotic critical value 1.628/√n.
    pub critical: f64,
    pub mean_mu: f64,
    pub mean_mu_se: f64,
    pub expected_mean_mu: f64,
}

impl EquilibriumReport {
    pub fn accepted(&self) -> bool {
        self.ks_distance < self.critical
    }

    pub fn uniform_rejected(&self) -> bool {
        self.ks_uniform >= self.critical
    }

    pub fn mean_within(&self, sigmas: f64) -> bool {
        (self.mean_mu - self.expected_mean_mu).abs() <= sigmas * self.mean_mu_se
    }
}

/// CDF of the density ∝ e^{ξμ} on [−1, 1].
pub fn equilibrium_cdf(xi: f64, mu: f64) -> f64 {
    if xi.abs() < 1e-12 {
        return 0.5 * (mu + 1.0);
    }
    ((xi * (mu + 1.0)).exp_m1() / (2.0 * xi).exp_m1()).clamp(0.0, 1.0)
}

fn ks_distance(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Compare a pitch sample with the stationary law.
pub fn equilibrium_of_sample(setup: &ScatteringSetup, mu: &[f64]) -> EquilibriumReport {
    let mut sorted = mu.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let (mean_mu, mean_mu_se) = {
        let m = mu.iter().sum::<f64>() / n as f64;
        let v = mu.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n as f64 - 1.0).max(1.0);
        (m, (v / n as f64).sqrt())
    };
    EquilibriumReport {
        n,
        ks_distance: ks_distance(&sorted, |x| equilibrium_cdf(setup.xi, x)),
        ks_uniform: ks_distance(&sorted, |x| 0.5 * (x + 1.0)),
        critical: 1.628 / (n as f64).sqrt(),
        mean_mu,
        mean_mu_se,
        expected_mean_mu: equilibrium_mean_mu(setup),
    }
}

pub fn equilibrium_check(cfg: &SimConfig) -> Result<EquilibriumReport> {
    if cfg.t_max * cfg.setup.dcoeff < 10.0 {
        return Err(Error::Config(format!(
            "equilibrium check needs t_max >= 10/D, got {}",
            cfg.t_max
        )));
    }
    let run = run_ensemble_full(cfg)?;
    Ok(equilibrium_of_sample(&cfg.setup, &run.final_mu))
}
