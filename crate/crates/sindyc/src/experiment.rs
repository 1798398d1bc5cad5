//! Config-driven experiment recipes behind the `sindyc` binary: simulate a
//! benchmark system, identify a model from a trajectory file, validate a
//! saved model against fresh truth, sweep the sparsity weight, and run the
//! linear decompositions.
//!
//! Every command writes its outputs plus a copy of the resolved config into
//! the output directory, so a run can be reproduced exactly from what it
//! left behind. The only file that differs between identical runs is the
//! `run_info.json` sidecar (it carries a timestamp).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diff::DiffMethod;
use crate::error::{Error, Result};
use crate::library::LibrarySpec;
use crate::regression::{log_spaced, pareto_sweep, SweepSolver};
use crate::sindy::{
    identify, load_model, model_to_equations, save_model, simulate, SparseModel, SparseSolver,
};
use crate::systems::{
    lorenz_rhs, lotka_volterra_rhs, make_signal, rk4_integrate, InputMap, LorenzParams,
    LotkaVolterraParams, Signal,
};
use crate::timeseries::{load_timeseries_auto, save_timeseries, TimeSeries};

fn default_lv_x0() -> Vec<f64> {
    vec![60.0, 50.0]
}

fn default_lorenz_x0() -> Vec<f64> {
    vec![-8.0, 8.0, 27.0]
}

fn default_sigma() -> f64 {
    10.0
}

fn default_rho() -> f64 {
    28.0
}

fn default_beta() -> f64 {
    8.0 / 3.0
}

fn default_input_map() -> InputMap {
    InputMap::Identity
}

fn default_lv_a() -> f64 {
    0.5
}

fn default_lv_b() -> f64 {
    0.025
}

fn default_lv_c() -> f64 {
    0.5
}

fn default_lv_d() -> f64 {
    0.005
}

/// Integrator-ready right-hand side closure `(x, u, t) -> dx/dt`.
pub type SystemRhs = Box<dyn Fn(&[f64], f64, f64) -> Vec<f64>>;

/// Which benchmark system to integrate, with its parameters and grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemConfig {
    Lorenz {
        #[serde(default = "default_sigma")]
        sigma: f64,
        #[serde(default = "default_rho")]
        rho: f64,
        #[serde(default = "default_beta")]
        beta: f64,
        #[serde(default = "default_input_map")]
        input_map: InputMap,
        #[serde(default = "default_lorenz_x0")]
        x0: Vec<f64>,
        t_span: f64,
        dt: f64,
    },
    LotkaVolterra {
        #[serde(default = "default_lv_a")]
        a: f64,
        #[serde(default = "default_lv_b")]
        b: f64,
        #[serde(default = "default_lv_c")]
        c: f64,
        #[serde(default = "default_lv_d")]
        d: f64,
        #[serde(default = "default_lv_x0")]
        x0: Vec<f64>,
        t_span: f64,
        dt: f64,
    },
}

impl SystemConfig {
    pub fn state_dim(&self) -> usize {
        match self {
            SystemConfig::Lorenz { .. } => 3,
            SystemConfig::LotkaVolterra { .. } => 2,
        }
    }

    pub fn x0(&self) -> &[f64] {
        match self {
            SystemConfig::Lorenz { x0, .. } | SystemConfig::LotkaVolterra { x0, .. } => x0,
        }
    }

    pub fn t_span(&self) -> f64 {
        match self {
            SystemConfig::Lorenz { t_span, .. } | SystemConfig::LotkaVolterra { t_span, .. } => {
                *t_span
            }
        }
    }

    pub fn dt(&self) -> f64 {
        match self {
            SystemConfig::Lorenz { dt, .. } | SystemConfig::LotkaVolterra { dt, .. } => *dt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.x0().len() != self.state_dim() {
            return Err(Error::Param(format!(
                "x0 has {} entries, system has {} channels",
                self.x0().len(),
                self.state_dim()
            )));
        }
        Ok(())
    }

    /// The true right-hand side as an integrator-ready closure.
    pub fn rhs(&self) -> SystemRhs {
        match *self {
            SystemConfig::Lorenz {
                sigma,
                rho,
                beta,
                input_map,
                ..
            } => {
                let p = LorenzParams {
                    sigma,
                    rho,
                    beta,
                    input_map,
                };
                Box::new(move |x, u, _t| lorenz_rhs(x, u, &p))
            }
            SystemConfig::LotkaVolterra { a, b, c, d, .. } => {
                let p = LotkaVolterraParams { a, b, c, d };
                Box::new(move |x, u, _t| lotka_volterra_rhs(x, u, &p))
            }
        }
    }
}

fn default_poly_degree() -> u32 {
    2
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LibrarySection {
    #[serde(default = "default_poly_degree")]
    pub poly_degree: u32,
    #[serde(default = "default_true")]
    pub include_constant: bool,
    #[serde(default)]
    pub trig_frequencies: Vec<u32>,
    /// Include the recorded input (and its cross terms) as library channels.
    #[serde(default = "default_true")]
    pub include_input: bool,
}

impl Default for LibrarySection {
    fn default() -> Self {
        LibrarySection {
            poly_degree: default_poly_degree(),
            include_constant: true,
            trig_frequencies: Vec::new(),
            include_input: true,
        }
    }
}

fn default_diff_method() -> String {
    "central".into()
}

fn default_tv_lambda() -> f64 {
    1e-2
}

fn default_tv_iterations() -> usize {
    200
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiffSection {
    /// `central` or `tv`.
    #[serde(default = "default_diff_method")]
    pub method: String,
    #[serde(default = "default_tv_lambda")]
    pub tv_lambda: f64,
    #[serde(default = "default_tv_iterations")]
    pub tv_iterations: usize,
}

impl Default for DiffSection {
    fn default() -> Self {
        DiffSection {
            method: default_diff_method(),
            tv_lambda: default_tv_lambda(),
            tv_iterations: default_tv_iterations(),
        }
    }
}

impl DiffSection {
    pub fn to_method(&self) -> Result<DiffMethod> {
        match self.method.as_str() {
            "central" => Ok(DiffMethod::Central),
            "tv" => Ok(DiffMethod::TotalVariation {
                lambda: self.tv_lambda,
                iterations: self.tv_iterations,
            }),
            other => Err(Error::Param(format!(
                "unknown differentiation method '{other}' (expected 'central' or 'tv')"
            ))),
        }
    }
}

fn default_solver_kind() -> String {
    "stlsq".into()
}

fn default_threshold() -> f64 {
    0.1
}

fn default_max_rounds() -> usize {
    10
}

fn default_lasso_alpha() -> f64 {
    0.1
}

fn default_lasso_iters() -> usize {
    100_000
}

fn default_lasso_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverSection {
    /// `stlsq` or `lasso`.
    #[serde(default = "default_solver_kind")]
    pub kind: String,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
    #[serde(default = "default_lasso_alpha")]
    pub alpha: f64,
    #[serde(default = "default_lasso_iters")]
    pub max_iters: usize,
    #[serde(default = "default_lasso_tol")]
    pub tol: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            kind: default_solver_kind(),
            threshold: default_threshold(),
            max_rounds: default_max_rounds(),
            alpha: default_lasso_alpha(),
            max_iters: default_lasso_iters(),
            tol: default_lasso_tol(),
        }
    }
}

impl SolverSection {
    pub fn to_solver(&self) -> Result<SparseSolver> {
        match self.kind.as_str() {
            "stlsq" => Ok(SparseSolver::Stlsq {
                threshold: self.threshold,
                max_rounds: self.max_rounds,
            }),
            "lasso" => Ok(SparseSolver::Lasso {
                alpha: self.alpha,
                max_iters: self.max_iters,
                tol: self.tol,
            }),
            other => Err(Error::Param(format!(
                "unknown solver '{other}' (expected 'stlsq' or 'lasso')"
            ))),
        }
    }

    fn to_sweep_solver(&self) -> Result<SweepSolver> {
        match self.kind.as_str() {
            "stlsq" => Ok(SweepSolver::Stlsq {
                max_rounds: self.max_rounds,
            }),
            "lasso" => Ok(SweepSolver::Lasso {
                max_iters: self.max_iters,
                tol: self.tol,
            }),
            other => Err(Error::Param(format!(
                "unknown solver '{other}' (expected 'stlsq' or 'lasso')"
            ))),
        }
    }
}

fn default_train_fraction() -> f64 {
    0.8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitSection {
    /// Leading fraction of snapshot columns used for fitting; the rest is
    /// held out for validation error.
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            train_fraction: default_train_fraction(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ParetoSection {
    /// Explicit sweep grid; when absent, 25 log-spaced points spanning
    /// 1e-6..1e2 are used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
}

/// A fully resolved experiment recipe.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal: Option<Signal>,
    #[serde(default)]
    pub library: LibrarySection,
    #[serde(default)]
    pub differentiation: DiffSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub pareto: ParetoSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Keep every n-th sample when loading data files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
}

impl ExperimentConfig {
    /// Read TOML (default) or JSON (by `.json` extension).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: ExperimentConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)
                .map_err(|e| Error::Schema(format!("invalid config {}: {e}", path.display())))?
        } else {
            toml::from_str(&text)
                .map_err(|e| Error::Schema(format!("invalid config {}: {e}", path.display())))?
        };
        config.system.validate()?;
        Ok(config)
    }

    /// Replace the seed of any stochastic signal with the run seed.
    fn effective_signal(&self) -> Option<Signal> {
        let mut signal = self.signal.clone()?;
        if let Some(seed) = self.seed {
            match &mut signal {
                Signal::WhiteNoise { seed: s, .. }
                | Signal::StateFeedbackPlusNoise { seed: s, .. } => *s = seed,
                _ => {}
            }
        }
        Some(signal)
    }
}

fn write_run_records(
    config: Option<&ExperimentConfig>,
    command: &str,
    out_dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    if let Some(config) = config {
        let text = toml::to_string_pretty(config)
            .map_err(|e| Error::Schema(format!("cannot serialize config: {e}")))?;
        std::fs::write(out_dir.join("config.toml"), text)?;
    }
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let info = serde_json::json!({
        "command": command,
        "created_unix": stamp,
        "tool_version": env!("CARGO_PKG_VERSION"),
    });
    std::fs::write(
        out_dir.join("run_info.json"),
        serde_json::to_string_pretty(&info).expect("json"),
    )?;
    Ok(())
}

/// Integrate the configured system under its signal and write
/// `trajectory.csv` (states plus the realized input channel).
pub fn cmd_simulate(config: &ExperimentConfig, out_dir: &Path) -> Result<PathBuf> {
    config.system.validate()?;
    let signal = config.effective_signal();
    let rhs = config.system.rhs();
    let series = rk4_integrate(
        |x, u, t| rhs(x, u, t),
        config.system.x0(),
        signal.as_ref(),
        config.system.t_span(),
        config.system.dt(),
    )?;
    write_run_records(Some(config), "simulate", out_dir)?;
    let path = out_dir.join("trajectory.csv");
    save_timeseries(&series, &path)?;
    Ok(path)
}

fn load_training_data(
    config: &ExperimentConfig,
    data: &Path,
    no_input: bool,
) -> Result<TimeSeries> {
    let mut series = load_timeseries_auto(data)?;
    if let Some(stride) = config.stride {
        if stride > 1 {
            series = series.downsample(stride)?;
        }
    }
    if no_input {
        series = series.without_inputs();
    }
    Ok(series)
}

fn library_for(config: &ExperimentConfig, series: &TimeSeries) -> Result<LibrarySpec> {
    let input_dim = if config.library.include_input {
        series.input_dim()
    } else {
        0
    };
    LibrarySpec::build(
        series.state_dim(),
        input_dim,
        config.library.poly_degree,
        &config.library.trig_frequencies,
        config.library.include_constant,
    )
}

/// Fit a sparse model to a trajectory file; writes `model.json` and
/// `equations.txt`, returns the model and the equations text.
pub fn cmd_identify(
    config: &ExperimentConfig,
    data: &Path,
    no_input: bool,
    out_dir: &Path,
) -> Result<(SparseModel, String)> {
    let drop_inputs = no_input || !config.library.include_input;
    let series = load_training_data(config, data, drop_inputs)?;
    let library = library_for(config, &series)?;
    let method = config.differentiation.to_method()?;
    let solver = config.solver.to_solver()?;
    let model = identify(&series, &library, &method, &solver)?;
    let names = library.default_channel_names();
    let equations = model_to_equations(&model, &names);

    write_run_records(Some(config), "identify", out_dir)?;
    save_model(&model, &out_dir.join("model.json"))?;
    std::fs::write(out_dir.join("equations.txt"), format!("{equations}\n"))?;
    Ok((model, equations))
}

/// Per-channel comparison of a model simulation against fresh truth.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationSummary {
    /// RMS of (prediction - truth) per channel over the compared window.
    pub rms_error: Vec<f64>,
    /// RMS of the truth itself per channel (the error scale).
    pub truth_rms: Vec<f64>,
    /// Whether the model blew up before the end of the window.
    pub diverged: bool,
    pub blowup_time: Option<f64>,
    /// Number of compared samples.
    pub samples: usize,
}

/// Simulate truth and model under the configured forcing and compare.
/// Writes `validation.csv` (true and predicted channels side by side) and
/// `rms_summary.csv` with per-channel error and divergence flags.
pub fn cmd_validate(
    config: &ExperimentConfig,
    model_path: &Path,
    out_dir: &Path,
) -> Result<ValidationSummary> {
    let model = load_model(model_path)?;
    let n = config.system.state_dim();
    if model.state_dim() != n {
        return Err(Error::Param(format!(
            "model has {} state channels, system has {n}",
            model.state_dim()
        )));
    }
    let signal = config.effective_signal();
    if model.input_dim() > 1 {
        return Err(Error::Param(
            "validation supports at most one input channel".into(),
        ));
    }
    if model.input_dim() == 1 && signal.is_none() {
        return Err(Error::Param(
            "model expects an input but the config has no signal".into(),
        ));
    }
    if let Some(s) = &signal {
        if s.is_stochastic() {
            return Err(Error::Param(
                "validation needs a deterministic forcing signal".into(),
            ));
        }
    }

    let rhs = config.system.rhs();
    let truth = rk4_integrate(
        |x, u, t| rhs(x, u, t),
        config.system.x0(),
        signal.as_ref(),
        config.system.t_span(),
        config.system.dt(),
    )?;

    let dt = config.system.dt();
    let t_span = config.system.t_span();
    let x0 = config.system.x0();
    let mut input_fn = build_model_input(&signal, model.input_dim())?;
    let (prediction, blowup_time) = match simulate(&model, x0, &mut input_fn, t_span, dt) {
        Ok(series) => (Some(series), None),
        Err(Error::Divergence { time, .. }) => {
            let partial_span = time - dt;
            let partial = if partial_span >= dt {
                let mut input_fn = build_model_input(&signal, model.input_dim())?;
                Some(simulate(&model, x0, &mut input_fn, partial_span, dt)?)
            } else {
                None
            };
            (partial, Some(time))
        }
        Err(other) => return Err(other),
    };

    let compared = prediction.as_ref().map_or(0, |p| p.len().min(truth.len()));
    let mut rms_error = vec![f64::NAN; n];
    let mut truth_rms = vec![0.0; n];
    for i in 0..n {
        let mut sq_t = 0.0;
        for k in 0..truth.len() {
            sq_t += truth.states()[(i, k)].powi(2);
        }
        truth_rms[i] = (sq_t / truth.len() as f64).sqrt();
        if let Some(p) = &prediction {
            let mut sq_e = 0.0;
            for k in 0..compared {
                sq_e += (p.states()[(i, k)] - truth.states()[(i, k)]).powi(2);
            }
            if compared > 0 {
                rms_error[i] = (sq_e / compared as f64).sqrt();
            }
        }
    }

    write_run_records(Some(config), "validate", out_dir)?;

    let mut csv = String::from("t");
    for i in 1..=n {
        let _ = write!(csv, ",x{i}_true");
    }
    for i in 1..=n {
        let _ = write!(csv, ",x{i}_pred");
    }
    csv.push('\n');
    for k in 0..compared {
        let _ = write!(csv, "{:.16e}", truth.times()[k]);
        for i in 0..n {
            let _ = write!(csv, ",{:.16e}", truth.states()[(i, k)]);
        }
        if let Some(p) = &prediction {
            for i in 0..n {
                let _ = write!(csv, ",{:.16e}", p.states()[(i, k)]);
            }
        }
        csv.push('\n');
    }
    std::fs::write(out_dir.join("validation.csv"), csv)?;

    let diverged = blowup_time.is_some();
    let mut summary_csv = String::from("channel,rms_error,truth_rms,diverged,blowup_time\n");
    for i in 0..n {
        let _ = writeln!(
            summary_csv,
            "x{},{:.16e},{:.16e},{},{}",
            i + 1,
            rms_error[i],
            truth_rms[i],
            diverged,
            blowup_time.map_or(String::new(), |t| format!("{t:.6}")),
        );
    }
    std::fs::write(out_dir.join("rms_summary.csv"), summary_csv)?;

    Ok(ValidationSummary {
        rms_error,
        truth_rms,
        diverged,
        blowup_time,
        samples: compared,
    })
}

fn build_model_input(
    signal: &Option<Signal>,
    input_dim: usize,
) -> Result<Box<dyn FnMut(f64) -> Vec<f64>>> {
    if input_dim == 0 {
        return Ok(Box::new(|_| Vec::new()));
    }
    let signal = signal
        .clone()
        .ok_or_else(|| Error::Param("model expects an input signal".into()))?;
    let mut f = make_signal(&signal, None)?;
    Ok(Box::new(move |t| vec![f(t)]))
}

/// Sweep the sparsity weight on a trajectory file and write `pareto.csv`.
pub fn cmd_pareto(
    config: &ExperimentConfig,
    data: &Path,
    alphas_override: Option<Vec<f64>>,
    out_dir: &Path,
) -> Result<crate::regression::ParetoCurve> {
    let series = load_training_data(config, data, !config.library.include_input)?;
    let library = library_for(config, &series)?;
    let method = config.differentiation.to_method()?;
    let derivatives = crate::diff::differentiate(&series, &method)?;
    let len = series.len();
    if len < 5 {
        return Err(Error::Size("too few samples for a sweep".into()));
    }
    let xdot = derivatives.values.slice(ndarray::s![.., 1..len - 1]);
    let states = series.states().slice(ndarray::s![.., 1..len - 1]);
    let inputs = series
        .inputs()
        .map(|u| u.slice(ndarray::s![.., 1..len - 1]));
    let theta = library.evaluate(states, inputs)?;

    let usable = theta.values.ncols();
    let split = ((usable as f64) * config.split.train_fraction).round() as usize;
    let split = split.clamp(1, usable - 1);
    let (theta_train, theta_val) = theta.values.view().split_at(ndarray::Axis(1), split);
    let (xdot_train, xdot_val) = xdot.split_at(ndarray::Axis(1), split);

    let alphas = alphas_override
        .or_else(|| config.pareto.alphas.clone())
        .unwrap_or_else(|| log_spaced(1e-6, 1e2, 25));
    let solver = config.solver.to_sweep_solver()?;
    let curve = pareto_sweep(
        theta_train,
        xdot_train,
        &alphas,
        solver,
        (theta_val, xdot_val),
    )?;

    write_run_records(Some(config), "pareto", out_dir)?;
    std::fs::write(out_dir.join("pareto.csv"), curve.to_csv())?;
    Ok(curve)
}

/// Decompose a trajectory file; `control` switches to the input-aware
/// variant. Writes `dmd.json`.
pub fn cmd_dmd(
    data: &Path,
    control: bool,
    rank: Option<usize>,
    out_dir: &Path,
) -> Result<serde_json::Value> {
    let series = load_timeseries_auto(data)?;
    let pair = crate::timeseries::to_snapshot_pair(&series);
    let json = if control {
        if series.input_dim() == 0 {
            return Err(Error::Param(format!(
                "--control requires input columns in {}",
                data.display()
            )));
        }
        crate::dmd::dmdc(&pair, rank)?.to_json()
    } else {
        crate::dmd::dmd(&pair, rank)?.to_json()
    };
    write_run_records(None, "dmd", out_dir)?;
    std::fs::write(
        out_dir.join("dmd.json"),
        serde_json::to_string_pretty(&json).expect("json"),
    )?;
    Ok(json)
}

/// Parse an `--alphas lo:hi:count` specification into a log-spaced grid.
pub fn parse_alpha_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Param(format!(
            "alpha grid '{spec}' should be lo:hi:count"
        )));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| Error::Param(format!("bad grid bound '{}'", parts[0])))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| Error::Param(format!("bad grid bound '{}'", parts[1])))?;
    let count: usize = parts[2]
        .parse()
        .map_err(|_| Error::Param(format!("bad grid count '{}'", parts[2])))?;
    if !(lo > 0.0 && hi > lo && count >= 2) {
        return Err(Error::Param(format!(
            "alpha grid '{spec}' needs 0 < lo < hi and count >= 2"
        )));
    }
    Ok(log_spaced(lo, hi, count))
}
