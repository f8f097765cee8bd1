//! Command-line front end: JSON run configs, CSV and plot-data output,
//! exit codes.
//!
//! Exit codes: 0 success, 1 bad configuration or I/O, 2 numerical
//! failure, 3 a violated invariant (a symbolic κ_DV that moved under a DIO).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::coefficients::{
    kappa_tgk_closed_form, ntz_table, series_fit, Parity, Quadrature, SERIES_GRID,
};
use crate::eidf::{canonical_focusing_eidf, named_scripts, run_script, DioStep, FickExpectation};
use crate::error::{Error, Result};
use crate::mc::{self, Scheme, SimConfig};
use crate::models::{Model, ScatteringSetup, DEFAULT_GRID_SIZE};
use crate::moments::compare;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Coeffs,
    Series,
    Dio,
    Mc,
    Tgk,
    Report,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Coeffs => "coeffs",
            Mode::Series => "series",
            Mode::Dio => "dio",
            Mode::Mc => "mc",
            Mode::Tgk => "tgk",
            Mode::Report => "report",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelBlock {
    pub v: f64,
    pub d: f64,
    pub xi: Option<f64>,
    pub focusing_length: Option<f64>,
    pub xi_sweep: Option<Vec<f64>>,
    pub model: Model,
}

impl Default for ModelBlock {
    fn default() -> Self {
        Self {
            v: 1.0,
            d: 1.0,
            xi: None,
            focusing_length: None,
            xi_sweep: None,
            model: Model::Isotropic,
        }
    }
}

impl ModelBlock {
    fn setup(&self, default_xi: f64) -> Result<ScatteringSetup> {
        let s = match (self.xi, self.focusing_length) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give either xi or focusing_length, not both".into(),
                ))
            }
            (Some(xi), None) => ScatteringSetup::with_xi(self.v, self.d, xi)?,
            (None, Some(l)) => ScatteringSetup::with_focusing_length(self.v, self.d, l)?,
            (None, None) => ScatteringSetup::with_xi(self.v, self.d, default_xi)?,
        };
        Ok(s.with_model(self.model))
    }

    fn sweep(&self) -> Result<Vec<ScatteringSetup>> {
        match &self.xi_sweep {
            Some(list) => {
                if list.is_empty() {
                    return Err(Error::Config("xi_sweep is empty".into()));
                }
                list.iter()
                    .map(|&xi| {
                        if !xi.is_finite() {
                            return Err(Error::Config(format!(
                                "xi_sweep value {xi} is not finite"
                            )));
                        }
                        Ok(ScatteringSetup::with_xi(self.v, self.d, xi)?.with_model(self.model))
                    })
                    .collect()
            }
            None => Ok(vec![self.setup(0.0)?]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McBlock {
    pub n_particles: usize,
    pub dt: f64,
    pub t_max: f64,
    pub n_snapshots: usize,
    pub fit_window: f64,
    pub vacf_cutoff: f64,
    pub vacf_spacing: f64,
    pub n_batches: usize,
    pub scheme: Scheme,
    pub control_variates: bool,
}

impl Default for McBlock {
    fn default() -> Self {
        let c = SimConfig::new(ScatteringSetup::with_xi(1.0, 1.0, 0.0).expect("unit setup"));
        Self {
            n_particles: c.n_particles,
            dt: c.dt,
            t_max: c.t_max,
            n_snapshots: c.n_snapshots,
            fit_window: c.fit_window,
            vacf_cutoff: c.vacf_cutoff,
            vacf_spacing: c.vacf_spacing,
            n_batches: c.n_batches,
            scheme: c.scheme,
            control_variates: c.control_variates,
        }
    }
}

impl McBlock {
    fn sim_config(&self, setup: ScatteringSetup, seed: u64) -> Result<SimConfig> {
        let c = SimConfig {
            setup,
            n_particles: self.n_particles,
            dt: self.dt,
            t_max: self.t_max,
            n_snapshots: self.n_snapshots,
            seed,
            fit_window: self.fit_window,
            vacf_cutoff: self.vacf_cutoff,
            vacf_spacing: self.vacf_spacing,
            n_batches: self.n_batches,
            scheme: self.scheme,
            control_variates: self.control_variates,
        };
        c.validate()?;
        Ok(c)
    }
}

/// A script given by name (from the built-in list) or spelled out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptSpec {
    Named(String),
    Custom { name: String, steps: Vec<DioStep> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct DioBlock {
    /// Truncation weight; each built-in script otherwise uses its own.
    pub max_weight: Option<u32>,
    /// Empty means every built-in script.
    pub scripts: Vec<ScriptSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeriesBlock {
    pub xi_grid: Vec<f64>,
    pub n_max: usize,
}

impl Default for SeriesBlock {
    fn default() -> Self {
        Self {
            xi_grid: SERIES_GRID.to_vec(),
            n_max: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    pub model: ModelBlock,
    pub grid_size: usize,
    pub reference_mu: f64,
    pub mc: McBlock,
    pub dio: DioBlock,
    pub series: SeriesBlock,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: None,
            model: ModelBlock::default(),
            grid_size: DEFAULT_GRID_SIZE,
            reference_mu: 0.0,
            mc: McBlock::default(),
            dio: DioBlock::default(),
            series: SeriesBlock::default(),
            out_dir: PathBuf::from("out"),
            seed: 1,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(w) = self.dio.max_weight {
            if !(2..=6).contains(&w) {
                return Err(Error::Config(format!(
                    "dio.max_weight must lie in [2, 6], got {w}"
                )));
            }
        }
        if self.grid_size < 32 {
            return Err(Error::Config(format!(
                "grid_size {} is below 32",
                self.grid_size
            )));
        }
        if let Some(s) = &self.model.xi_sweep {
            if s.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config("xi_sweep values must be finite".into()));
            }
        }
        Ok(())
    }

    fn quadrature(&self) -> Result<Quadrature> {
        Quadrature::new(self.grid_size)?.with_reference(self.reference_mu)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "focus-diffusion",
    version,
    about = "Parallel diffusion under adiabatic focusing"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Override the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override the output directory.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads for Monte Carlo (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Coefficient table over a ξ sweep.
    Coeffs { config: Option<PathBuf> },
    /// Small-ξ series coefficients and the κ_ntz table.
    Series { config: Option<PathBuf> },
    /// DIO scripts: Fick and displacement-variance coefficients.
    Dio { config: Option<PathBuf> },
    /// Monte Carlo displacement variance.
    Mc { config: Option<PathBuf> },
    /// Monte Carlo velocity autocorrelation integral.
    Tgk { config: Option<PathBuf> },
    /// Monte Carlo against the coefficient formulas.
    Report { config: Option<PathBuf> },
    /// Run whatever mode the config file names.
    Run { config: PathBuf },
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::Io { .. }
        | Error::Domain(_)
        | Error::Setup(_)
        | Error::Model(_) => 1,
        Error::Numerical(_) | Error::Algebra(_) => 2,
        Error::Invariant(_) => 3,
    }
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: &Cli) -> Result<Vec<String>> {
    let (mode, path) = match &cli.command {
        Command::Coeffs { config } => (Some(Mode::Coeffs), config.clone()),
        Command::Series { config } => (Some(Mode::Series), config.clone()),
        Command::Dio { config } => (Some(Mode::Dio), config.clone()),
        Command::Mc { config } => (Some(Mode::Mc), config.clone()),
        Command::Tgk { config } => (Some(Mode::Tgk), config.clone()),
        Command::Report { config } => (Some(Mode::Report), config.clone()),
        Command::Run { config } => (None, Some(config.clone())),
    };
    let mut cfg = match &path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mode = match (mode, cfg.mode) {
        (Some(a), Some(b)) if a != b => {
            return Err(Error::Config(format!(
                "subcommand {} does not match config mode {}",
                a.name(),
                b.name()
            )))
        }
        (Some(a), _) => a,
        (None, Some(b)) => b,
        (None, None) => return Err(Error::Config("config names no mode".into())),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(d) = &cli.out_dir {
        cfg.out_dir = d.clone();
    }
    match cli.threads {
        Some(0) => Err(Error::Config("--threads must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| run_mode(mode, &cfg)),
        None => run_mode(mode, &cfg),
    }
}

/// Run one mode and return the summary lines.
pub fn run_mode(mode: Mode, cfg: &RunConfig) -> Result<Vec<String>> {
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::Io {
        path: cfg.out_dir.display().to_string(),
        message: e.to_string(),
    })?;
    match mode {
        Mode::Coeffs => run_coeffs(cfg),
        Mode::Series => run_series(cfg),
        Mode::Dio => run_dio(cfg),
        Mode::Mc => run_mc(cfg),
        Mode::Tgk => run_tgk(cfg),
        Mode::Report => run_report(cfg),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Two whitespace-separated columns with 17 significant digits.
pub fn emit_plotdata(series: &[(f64, f64)], path: &Path) -> Result<()> {
    if series.is_empty() {
        return Err(Error::Io {
            path: path.display().to_string(),
            message: "refusing to write an empty series".into(),
        });
    }
    let mut s = String::new();
    for (x, y) in series {
        let _ = writeln!(s, "{x:.16e} {y:.16e}");
    }
    write_file(path, &s)
}

pub const COEFFS_HEADER: &str =
    "xi,kappa_z,kappa_zz_bw,kappa_zz_wq,kappa_tz,kappa_tzz,kappa_dv,err_max";
pub const MC_HEADER: &str = "t,mean_dz,var_dz,running_kdv,se_var";
pub const TGK_HEADER: &str = "lag,vacf,cumulative";

fn run_coeffs(cfg: &RunConfig) -> Result<Vec<String>> {
    let q = cfg.quadrature()?;
    let mut csv = format!("{COEFFS_HEADER}\n");
    let mut plot = Vec::new();
    let setups = cfg.model.sweep()?;
    for s in &setups {
        let r = q.report(s)?;
        let _ = writeln!(
            csv,
            "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            r.xi,
            r.kappa_z.value,
            r.kappa_zz_bw.value,
            r.kappa_zz_wq.value,
            r.kappa_tz.value,
            r.kappa_tzz.value,
            r.kappa_dv.value,
            r.max_error()
        );
        plot.push((r.xi, r.kappa_dv.value));
    }
    let path = cfg.out_dir.join("coeffs.csv");
    write_file(&path, &csv)?;
    let ppath = cfg.out_dir.join("kappa_dv.dat");
    emit_plotdata(&plot, &ppath)?;
    Ok(vec![
        format!("wrote {} ({} rows)", path.display(), setups.len()),
        format!("wrote {}", ppath.display()),
    ])
}

fn run_series(cfg: &RunConfig) -> Result<Vec<String>> {
    let q = cfg.quadrature()?;
    let (v, d) = (cfg.model.v, cfg.model.d);
    let grid = &cfg.series.xi_grid;
    let at = |xi: f64| ScatteringSetup::with_xi(v, d, xi).map(|s| s.with_model(cfg.model.model));
    let fits = [
        (
            "kappa_z",
            series_fit(|x| Ok(q.kappa_z(&at(x)?)?.value), grid, Parity::Odd, 2)?,
        ),
        (
            "kappa_zz_bw",
            series_fit(|x| Ok(q.kappa_zz_bw(&at(x)?)?.value), grid, Parity::Even, 3)?,
        ),
        (
            "kappa_tz",
            series_fit(|x| Ok(q.kappa_tz(&at(x)?)?.value), grid, Parity::Odd, 2)?,
        ),
        (
            "kappa_tzz",
            series_fit(|x| Ok(q.kappa_tzz(&at(x)?)?.value), grid, Parity::Even, 3)?,
        ),
        (
            "kappa_dv",
            series_fit(
                |x| Ok(q.report(&at(x)?)?.kappa_dv.value),
                grid,
                Parity::Even,
                3,
            )?,
        ),
    ];
    let mut csv = String::from("quantity,power,coefficient,std_error,residual\n");
    for (name, f) in &fits {
        let p0 = if f.parity == Parity::Odd { 1 } else { 0 };
        for (k, (c, e)) in f.coefficients.iter().zip(&f.std_errors).enumerate() {
            let _ = writeln!(csv, "{name},{},{c:?},{e:?},{:?}", p0 + 2 * k, f.residual);
        }
    }
    let path = cfg.out_dir.join("series.csv");
    write_file(&path, &csv)?;

    let table = ntz_table(v, d, cfg.series.n_max, grid)?;
    let mut ntz = String::from("n,leading,ratio\n");
    for (i, (n, c)) in table.entries.iter().enumerate() {
        let ratio = if i == 0 {
            String::new()
        } else {
            format!("{:?}", table.ratios[i - 1])
        };
        let _ = writeln!(ntz, "{n},{c:?},{ratio}");
    }
    let npath = cfg.out_dir.join("ntz.csv");
    write_file(&npath, &ntz)?;
    Ok(vec![
        format!("wrote {} ({} fits)", path.display(), fits.len()),
        format!("wrote {} ({} rows)", npath.display(), table.entries.len()),
    ])
}

fn run_dio(cfg: &RunConfig) -> Result<Vec<String>> {
    let builtin = named_scripts();
    let mut jobs = Vec::new();
    if cfg.dio.scripts.is_empty() {
        for (s, w, e) in &builtin {
            jobs.push((
                s.name.clone(),
                s.steps.clone(),
                cfg.dio.max_weight.unwrap_or(*w),
                Some(e.clone()),
            ));
        }
    } else {
        for spec in &cfg.dio.scripts {
            match spec {
                ScriptSpec::Named(name) => {
                    let (s, w, e) = builtin
                        .iter()
                        .find(|(s, _, _)| &s.name == name)
                        .ok_or_else(|| Error::Config(format!("unknown script {name:?}")))?;
                    jobs.push((
                        name.clone(),
                        s.steps.clone(),
                        cfg.dio.max_weight.unwrap_or(*w),
                        Some(e.clone()),
                    ));
                }
                ScriptSpec::Custom { name, steps } => {
                    for st in steps {
                        st.validate().map_err(|e| Error::Config(e.to_string()))?;
                    }
                    jobs.push((
                        name.clone(),
                        steps.clone(),
                        cfg.dio.max_weight.unwrap_or(4),
                        None,
                    ));
                }
            }
        }
    }
    let mut csv =
        String::from("script,max_weight,fick,fick_changed,fick_expected,dv,dv_invariant\n");
    let mut lines = Vec::new();
    let mut broken = Vec::new();
    for (name, steps, w, expect) in &jobs {
        let start = canonical_focusing_eidf(*w)?;
        let chain = run_script(&start, steps)?;
        let rep = compare(name, &start, chain.last().expect("chain holds the start"))?;
        let fick_ok = match expect {
            None => "n/a".to_string(),
            Some(FickExpectation::Unchanged) => (!rep.fick_changed).to_string(),
            Some(FickExpectation::Becomes(f)) => (rep.fick == *f).to_string(),
        };
        let _ = writeln!(
            csv,
            "\"{name}\",{w},\"{}\",{},{fick_ok},\"{}\",{}",
            rep.fick, rep.fick_changed, rep.dv, rep.dv_invariant
        );
        lines.push(format!(
            "{name}: FL {} ({}), DV {}",
            if rep.fick_changed {
                "changed"
            } else {
                "unchanged"
            },
            rep.fick,
            if rep.dv_invariant {
                "invariant"
            } else {
                "CHANGED"
            }
        ));
        if !rep.dv_invariant {
            broken.push(name.clone());
        }
    }
    let path = cfg.out_dir.join("dio.csv");
    write_file(&path, &csv)?;
    lines.push(format!("wrote {} ({} scripts)", path.display(), jobs.len()));
    if !broken.is_empty() {
        for l in &lines {
            println!("{l}");
        }
        return Err(Error::Invariant(format!(
            "displacement-variance coefficient changed under: {}",
            broken.join(", ")
        )));
    }
    Ok(lines)
}

fn mc_setup(cfg: &RunConfig, default_xi: f64) -> Result<SimConfig> {
    cfg.mc.sim_config(cfg.model.setup(default_xi)?, cfg.seed)
}

fn write_mc(cfg: &RunConfig, run: &mc::EnsembleRun) -> Result<Vec<String>> {
    let st = &run.stats;
    let mut csv = format!("{MC_HEADER}\n");
    for k in 0..st.len() {
        let _ = writeln!(
            csv,
            "{:?},{:?},{:?},{:?},{:?}",
            st.times[k], st.mean_dz[k], st.variance[k], st.running_kdv[k], st.se_var[k]
        );
    }
    let path = cfg.out_dir.join("mc.csv");
    write_file(&path, &csv)?;
    let ppath = cfg.out_dir.join("variance.dat");
    let series: Vec<(f64, f64)> = st
        .times
        .iter()
        .copied()
        .zip(st.variance.iter().copied())
        .collect();
    emit_plotdata(&series, &ppath)?;
    Ok(vec![
        format!("wrote {} ({} rows)", path.display(), st.len()),
        format!("wrote {}", ppath.display()),
    ])
}

fn write_tgk(cfg: &RunConfig, rec: &mc::VacfRecord) -> Result<String> {
    let mut csv = format!("{TGK_HEADER}\n");
    for k in 0..rec.lags.len() {
        let _ = writeln!(
            csv,
            "{:?},{:?},{:?}",
            rec.lags[k], rec.vacf[k], rec.cumulative[k]
        );
    }
    let path = cfg.out_dir.join("tgk.csv");
    write_file(&path, &csv)?;
    Ok(format!(
        "wrote {} ({} rows)",
        path.display(),
        rec.lags.len()
    ))
}

fn run_mc(cfg: &RunConfig) -> Result<Vec<String>> {
    let sim = mc_setup(cfg, 0.0)?;
    let run = mc::run_ensemble_full(&sim)?;
    let dv = mc::estimate_kappa_dv(&run.stats, &sim)?;
    let mut lines = write_mc(cfg, &run)?;
    lines.extend(sim.warnings().into_iter().map(|w| format!("warning: {w}")));
    lines.push(format!("kappa_dv = {} +- {}", dv.value, dv.std_error));
    Ok(lines)
}

fn run_tgk(cfg: &RunConfig) -> Result<Vec<String>> {
    let sim = mc_setup(cfg, 0.0)?;
    let run = mc::run_ensemble_full(&sim)?;
    let tgk = mc::kappa_tgk_from_record(&run.vacf, &sim)?;
    Ok(vec![
        write_tgk(cfg, &run.vacf)?,
        format!(
            "kappa_tgk = {} +- {} (closed form {})",
            tgk.value,
            tgk.std_error,
            kappa_tgk_closed_form(&sim.setup)
        ),
    ])
}

fn run_report(cfg: &RunConfig) -> Result<Vec<String>> {
    let sim = mc_setup(cfg, 0.3)?;
    let q = cfg.quadrature()?;
    let coeffs = q.report(&sim.setup)?;
    let exact = q.kappa_dv_exact(&sim.setup)?.value;
    let run = mc::run_ensemble_full(&sim)?;
    let dv = mc::estimate_kappa_dv(&run.stats, &sim)?;
    let tgk = mc::kappa_tgk_from_record(&run.vacf, &sim)?;
    let diff = mc::tgk_minus_dv(&run, &sim)?;
    let tgk_cf = kappa_tgk_closed_form(&sim.setup);
    let rel = |a: f64, b: f64| (a / b - 1.0) * 100.0;
    let mut s = String::new();
    let _ = writeln!(s, "xi {}", sim.setup.xi);
    let _ = writeln!(
        s,
        "particles {} dt {} t_max {} seed {}",
        sim.n_particles, sim.dt, sim.t_max, sim.seed
    );
    let _ = writeln!(
        s,
        "quantity            monte_carlo  std_error  reference  rel_diff_percent"
    );
    let _ = writeln!(
        s,
        "kappa_dv (formula)  {:.6}  {:.6}  {:.6}  {:+.3}",
        dv.value,
        dv.std_error,
        coeffs.kappa_dv.value,
        rel(dv.value, coeffs.kappa_dv.value)
    );
    let _ = writeln!(
        s,
        "kappa_dv (exact)    {:.6}  {:.6}  {:.6}  {:+.3}",
        dv.value,
        dv.std_error,
        exact,
        rel(dv.value, exact)
    );
    let _ = writeln!(
        s,
        "kappa_tgk           {:.6}  {:.6}  {:.6}  {:+.3}",
        tgk.value,
        tgk.std_error,
        tgk_cf,
        rel(tgk.value, tgk_cf)
    );
    let _ = writeln!(
        s,
        "tgk - dv            {:.6}  {:.6}  {:.6}  {:.2} sigma",
        diff.value,
        diff.std_error,
        tgk_cf - coeffs.kappa_dv.value,
        diff.value / diff.std_error
    );
    let path = cfg.out_dir.join("report.txt");
    write_file(&path, &s)?;
    let mut lines = write_mc(cfg, &run)?;
    lines.push(write_tgk(cfg, &run.vacf)?);
    lines.push(format!("wrote {}", path.display()));
    lines.push(format!(
        "kappa_dv: mc {:.6} vs formula {:.6} ({:+.2}%)",
        dv.value,
        coeffs.kappa_dv.value,
        rel(dv.value, coeffs.kappa_dv.value)
    ));
    Ok(lines)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_errors() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert!(RunConfig::from_json("{\"bogus\": 1}").is_err());
        assert!(RunConfig::from_json("{\"dio\": {\"max_weight\": 7}}").is_err());
        assert!(RunConfig::from_json(
            "{\"mode\": \"dio\", \"dio\": {\"scripts\": [\"R_tz of 1st PzI\"]}}"
        )
        .is_ok());
        let custom = r#"{"dio": {"scripts": [{"name": "mine", "steps": [{"family": "PzI", "a": 0, "b": 1, "target": "1,1"}]}]}}"#;
        assert!(RunConfig::from_json(custom).is_ok());
    }

    #[test]
    fn plotdata_rejects_empty() {
        let p = std::env::temp_dir().join("focus_diffusion_empty_plot.dat");
        let _ = fs::remove_file(&p);
        assert!(emit_plotdata(&[], &p).is_err());
        assert!(!p.exists());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 1);
        assert_eq!(exit_code(&Error::Numerical("x".into())), 2);
        assert_eq!(exit_code(&Error::Invariant("x".into())), 3);
    }
}
