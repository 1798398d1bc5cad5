//! End-to-end sparse model identification: assemble the library and the
//! derivative targets, solve the sparse regression, and package the result
//! as an executable model that can be simulated, printed as equations, and
//! saved to a versioned JSON file.
//!
//! Two regression layouts are supported. `identify` fits state derivatives
//! against library rows evaluated on states (and recorded inputs, when the
//! library has input channels) — external forcing. `identify_feedback` fits
//! the recorded inputs themselves against a state-only library — the
//! closed-loop case where a feedback law `u = k(x)` is to be recovered
//! instead, because regressing dynamics on a state-dependent input is
//! ill-conditioned.

use std::path::Path;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diff::{differentiate, DiffMethod};
use crate::error::{Error, Result};
use crate::library::{term_name, LibrarySpec};
use crate::regression::{lasso, stlsq, CoefficientMatrix};
use crate::timeseries::TimeSeries;

/// Blow-up cutoff when simulating identified models; hitting it is how an
/// unstable model manifests.
pub const MODEL_DIVERGENCE_LIMIT: f64 = 1e6;

/// Model file format version written by [`save_model`].
pub const MODEL_FILE_VERSION: u32 = 1;

/// Sparse solver selection for identification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SparseSolver {
    Stlsq {
        threshold: f64,
        max_rounds: usize,
    },
    Lasso {
        alpha: f64,
        max_iters: usize,
        tol: f64,
    },
}

impl SparseSolver {
    pub fn stlsq(threshold: f64) -> Self {
        SparseSolver::Stlsq {
            threshold,
            max_rounds: 10,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            SparseSolver::Stlsq { .. } => "stlsq",
            SparseSolver::Lasso { .. } => "lasso",
        }
    }

    fn weight(&self) -> f64 {
        match self {
            SparseSolver::Stlsq { threshold, .. } => *threshold,
            SparseSolver::Lasso { alpha, .. } => *alpha,
        }
    }

    fn solve(
        &self,
        theta: ndarray::ArrayView2<'_, f64>,
        targets: ndarray::ArrayView2<'_, f64>,
    ) -> Result<Array2<f64>> {
        match *self {
            SparseSolver::Stlsq {
                threshold,
                max_rounds,
            } => stlsq(theta, targets, threshold, max_rounds),
            SparseSolver::Lasso {
                alpha,
                max_iters,
                tol,
            } => {
                let mut xi = Array2::zeros((targets.nrows(), theta.nrows()));
                for (i, t) in targets.rows().into_iter().enumerate() {
                    let row = lasso(theta, t, alpha, max_iters, tol)?;
                    xi.row_mut(i).assign(&row);
                }
                Ok(xi)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub solver: String,
    pub alpha_or_threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_fingerprint: Option<String>,
    /// Set when there were fewer usable snapshot columns than library terms
    /// plus one.
    #[serde(default)]
    pub underdetermined: bool,
}

/// An identified sparse dynamical model `dx/dt = Xi * theta(x, u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseModel {
    coefficients: CoefficientMatrix,
    metadata: ModelMetadata,
}

impl SparseModel {
    pub fn new(coefficients: CoefficientMatrix, metadata: ModelMetadata) -> Self {
        SparseModel {
            coefficients,
            metadata,
        }
    }

    pub fn coefficients(&self) -> &CoefficientMatrix {
        &self.coefficients
    }

    pub fn library(&self) -> &LibrarySpec {
        self.coefficients.library()
    }

    pub fn metadata(&self) -> &ModelMetadata {
        &self.metadata
    }

    pub fn state_dim(&self) -> usize {
        self.coefficients.values().nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.library().input_dim()
    }

    pub fn active_terms(&self) -> usize {
        self.coefficients.active_terms()
    }
}

/// A recovered feedback law `u = Xi_u * theta(x)` over a state-only library.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackLaw {
    coefficients: CoefficientMatrix,
}

impl FeedbackLaw {
    pub fn coefficients(&self) -> &CoefficientMatrix {
        &self.coefficients
    }

    /// Evaluate the law at a state.
    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        let theta = self.coefficients.library().evaluate_point(x, &[])?;
        Ok(self
            .coefficients
            .values()
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(&theta).map(|(c, t)| c * t).sum())
            .collect())
    }
}

fn fingerprint(series: &TimeSeries) -> String {
    let mut hasher = Sha256::new();
    for v in series.times().iter() {
        hasher.update(v.to_le_bytes());
    }
    for v in series.states().iter() {
        hasher.update(v.to_le_bytes());
    }
    if let Some(u) = series.inputs() {
        for v in u.iter() {
            hasher.update(v.to_le_bytes());
        }
    }
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn check_library_matches(series: &TimeSeries, library: &LibrarySpec) -> Result<()> {
    if library.state_dim() != series.state_dim() {
        return Err(Error::Param(format!(
            "library expects {} state channels, series has {}",
            library.state_dim(),
            series.state_dim()
        )));
    }
    if library.input_dim() != series.input_dim() {
        return Err(Error::Param(format!(
            "library expects {} input channels, series has {}",
            library.input_dim(),
            series.input_dim()
        )));
    }
    Ok(())
}

/// Identify a sparse model from a trajectory, estimating derivatives with
/// the chosen method. The first and last columns of the aligned derivative
/// estimate are dropped (with the matching library columns) since the
/// one-sided endpoint stencils are the least accurate.
pub fn identify(
    series: &TimeSeries,
    library: &LibrarySpec,
    method: &DiffMethod,
    solver: &SparseSolver,
) -> Result<SparseModel> {
    check_library_matches(series, library)?;
    let derivatives = differentiate(series, method)?;
    let len = series.len();
    if len < 4 {
        return Err(Error::Size(
            "need at least 4 samples to trim endpoints and fit".into(),
        ));
    }
    let xdot = derivatives.values.slice(s![.., 1..len - 1]);
    let states = series.states().slice(s![.., 1..len - 1]);
    let inputs = series.inputs().map(|u| u.slice(s![.., 1..len - 1]));
    fit_model(series, library, solver, states, inputs, xdot)
}

/// Identify a sparse model using externally supplied derivatives aligned to
/// every sample (e.g. from a known right-hand side); no endpoint trimming.
pub fn identify_with_derivatives(
    series: &TimeSeries,
    derivatives: &Array2<f64>,
    library: &LibrarySpec,
    solver: &SparseSolver,
) -> Result<SparseModel> {
    check_library_matches(series, library)?;
    if derivatives.dim() != series.states().dim() {
        return Err(Error::Shape(format!(
            "derivatives are {:?}, states are {:?}",
            derivatives.dim(),
            series.states().dim()
        )));
    }
    fit_model(
        series,
        library,
        solver,
        series.states().view(),
        series.inputs().map(|u| u.view()),
        derivatives.view(),
    )
}

fn fit_model(
    series: &TimeSeries,
    library: &LibrarySpec,
    solver: &SparseSolver,
    states: ndarray::ArrayView2<'_, f64>,
    inputs: Option<ndarray::ArrayView2<'_, f64>>,
    targets: ndarray::ArrayView2<'_, f64>,
) -> Result<SparseModel> {
    let theta = library.evaluate(states, inputs)?;
    let xi = solver.solve(theta.values.view(), targets)?;
    let coefficients = CoefficientMatrix::new(xi, library.clone())?;
    let metadata = ModelMetadata {
        solver: solver.name().into(),
        alpha_or_threshold: solver.weight(),
        seed: None,
        data_fingerprint: Some(fingerprint(series)),
        underdetermined: states.ncols() < library.term_count() + 1,
    };
    Ok(SparseModel {
        coefficients,
        metadata,
    })
}

/// Recover the input as a function of the state by regressing the recorded
/// inputs onto a state-only library.
pub fn identify_feedback(
    series: &TimeSeries,
    library: &LibrarySpec,
    solver: &SparseSolver,
) -> Result<FeedbackLaw> {
    let inputs = series
        .inputs()
        .ok_or_else(|| Error::Param("feedback identification needs recorded inputs".into()))?;
    if library.input_dim() != 0 {
        return Err(Error::Param(
            "feedback identification uses a state-only library".into(),
        ));
    }
    if library.state_dim() != series.state_dim() {
        return Err(Error::Param(format!(
            "library expects {} state channels, series has {}",
            library.state_dim(),
            series.state_dim()
        )));
    }
    let theta = library.evaluate(series.states().view(), None)?;
    let xi = solver.solve(theta.values.view(), inputs.view())?;
    Ok(FeedbackLaw {
        coefficients: CoefficientMatrix::new(xi, library.clone())?,
    })
}

/// Evaluate the model right-hand side at one point.
pub fn model_rhs(model: &SparseModel, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    let theta = model.library().evaluate_point(x, u)?;
    Ok(model
        .coefficients
        .values()
        .rows()
        .into_iter()
        .map(|row| row.iter().zip(&theta).map(|(c, t)| c * t).sum())
        .collect())
}

/// Integrate the identified model with classical RK4; `input_fn` must be a
/// pure function of time and is evaluated at the substep times. Aborts with
/// a divergence error when the state norm crosses
/// [`MODEL_DIVERGENCE_LIMIT`], which is the operational definition of an
/// unstable identified model.
pub fn simulate(
    model: &SparseModel,
    x0: &[f64],
    mut input_fn: impl FnMut(f64) -> Vec<f64>,
    t_span: f64,
    dt: f64,
) -> Result<TimeSeries> {
    if dt <= 0.0 || !dt.is_finite() {
        return Err(Error::Param(format!("invalid time step {dt}")));
    }
    if t_span < dt {
        return Err(Error::Param(format!(
            "time span {t_span} shorter than one step {dt}"
        )));
    }
    let n = model.state_dim();
    if x0.len() != n {
        return Err(Error::Shape(format!(
            "initial state has {} entries, model has {n} channels",
            x0.len()
        )));
    }
    let q = model.input_dim();
    let steps = (t_span / dt).round() as usize;
    let times = ndarray::Array1::from_iter((0..=steps).map(|k| k as f64 * dt));
    let mut states = Array2::zeros((n, steps + 1));
    let mut inputs = (q > 0).then(|| Array2::zeros((q, steps + 1)));

    let mut u_of = |t: f64| -> Result<Vec<f64>> {
        let u = if q > 0 { input_fn(t) } else { Vec::new() };
        if u.len() != q {
            return Err(Error::Shape(format!(
                "input function returned {} channels, model has {q}",
                u.len()
            )));
        }
        Ok(u)
    };

    let mut x = x0.to_vec();
    for k in 0..=steps {
        let t = times[k];
        for (i, &v) in x.iter().enumerate() {
            states[(i, k)] = v;
        }
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > MODEL_DIVERGENCE_LIMIT || !norm.is_finite() {
            return Err(Error::Divergence {
                time: t,
                limit: MODEL_DIVERGENCE_LIMIT,
            });
        }
        let u_here = u_of(t)?;
        if let Some(mat) = inputs.as_mut() {
            for (i, &v) in u_here.iter().enumerate() {
                mat[(i, k)] = v;
            }
        }
        if k == steps {
            break;
        }
        let u_mid = u_of(t + 0.5 * dt)?;
        let u_end = u_of(t + dt)?;

        let k1 = model_rhs(model, &x, &u_here)?;
        let x2: Vec<f64> = x
            .iter()
            .zip(&k1)
            .map(|(xi, ki)| xi + 0.5 * dt * ki)
            .collect();
        let k2 = model_rhs(model, &x2, &u_mid)?;
        let x3: Vec<f64> = x
            .iter()
            .zip(&k2)
            .map(|(xi, ki)| xi + 0.5 * dt * ki)
            .collect();
        let k3 = model_rhs(model, &x3, &u_mid)?;
        let x4: Vec<f64> = x.iter().zip(&k3).map(|(xi, ki)| xi + dt * ki).collect();
        let k4 = model_rhs(model, &x4, &u_end)?;
        for i in 0..n {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                time: t + dt,
                limit: MODEL_DIVERGENCE_LIMIT,
            });
        }
    }
    TimeSeries::new(times, states, inputs)
}

fn format_coefficient(v: f64) -> String {
    // round to 12 significant digits, then print the shortest representation
    let rounded: f64 = format!("{v:.11e}").parse().unwrap_or(v);
    format!("{rounded}")
}

/// Render the model as one equation line per state channel, e.g.
/// `dx1/dt = 0.5*x1 - 0.025*x1*x2 + 1*u^2`, terms in canonical library
/// order with 12 significant digits.
pub fn model_to_equations(model: &SparseModel, channel_names: &[String]) -> String {
    let lib = model.library();
    let mut lines = Vec::with_capacity(model.state_dim());
    for (i, row) in model.coefficients.values().rows().into_iter().enumerate() {
        let lhs = format!("d{}/dt", channel_names[i]);
        let mut rhs = String::new();
        for (j, term) in lib.terms().iter().enumerate() {
            let c = row[j];
            if c == 0.0 {
                continue;
            }
            let name = term_name(term, channel_names);
            if rhs.is_empty() {
                rhs = format!("{}*{name}", format_coefficient(c));
            } else if c < 0.0 {
                rhs.push_str(&format!(" - {}*{name}", format_coefficient(-c)));
            } else {
                rhs.push_str(&format!(" + {}*{name}", format_coefficient(c)));
            }
        }
        if rhs.is_empty() {
            rhs = "0".into();
        }
        lines.push(format!("{lhs} = {rhs}"));
    }
    lines.join("\n")
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    state_dim: usize,
    input_dim: usize,
    library: LibrarySpec,
    coefficients: Vec<Vec<f64>>,
    metadata: ModelMetadata,
}

/// Write the model as versioned JSON.
pub fn save_model(model: &SparseModel, path: &Path) -> Result<()> {
    let file = ModelFile {
        version: MODEL_FILE_VERSION,
        state_dim: model.state_dim(),
        input_dim: model.input_dim(),
        library: model.library().clone(),
        coefficients: model
            .coefficients
            .values()
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect(),
        metadata: model.metadata.clone(),
    };
    let text = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::Schema(format!("cannot serialize model: {e}")))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Read a model written by [`save_model`]. Unparseable content and version
/// mismatches are schema errors.
pub fn load_model(path: &Path) -> Result<SparseModel> {
    let text = std::fs::read_to_string(path)?;
    let raw: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Schema(format!("malformed model file: {e}")))?;
    let version = raw
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Schema("model file has no version field".into()))?;
    if version != u64::from(MODEL_FILE_VERSION) {
        return Err(Error::Schema(format!(
            "unsupported model file version {version}, expected {MODEL_FILE_VERSION}"
        )));
    }
    let file: ModelFile = serde_json::from_value(raw)
        .map_err(|e| Error::Schema(format!("malformed model file: {e}")))?;
    let n = file.coefficients.len();
    let p = file.library.term_count();
    if n != file.state_dim || file.library.state_dim() != file.state_dim {
        return Err(Error::Schema(
            "model file state dimension disagrees with coefficients".into(),
        ));
    }
    if file.library.input_dim() != file.input_dim {
        return Err(Error::Schema(
            "model file input dimension disagrees with library".into(),
        ));
    }
    let mut values = Array2::zeros((n, p));
    for (i, row) in file.coefficients.iter().enumerate() {
        if row.len() != p {
            return Err(Error::Schema(format!(
                "coefficient row {i} has {} entries, library has {p} terms",
                row.len()
            )));
        }
        for (j, &v) in row.iter().enumerate() {
            values[(i, j)] = v;
        }
    }
    let coefficients = CoefficientMatrix::new(values, file.library)
        .map_err(|e| Error::Schema(format!("invalid model file: {e}")))?;
    Ok(SparseModel {
        coefficients,
        metadata: file.metadata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::Term;
    use ndarray::Array1;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn exponential_decay_series(rate: f64, samples: usize, dt: f64) -> (TimeSeries, Array2<f64>) {
        let times = Array1::from_iter((0..samples).map(|k| k as f64 * dt));
        let states = Array2::from_shape_fn((1, samples), |(_, k)| (rate * k as f64 * dt).exp());
        let xdot = states.mapv(|v| rate * v);
        (TimeSeries::new(times, states, None).unwrap(), xdot)
    }

    #[test]
    fn identify_linear_decay_exactly() {
        let (series, xdot) = exponential_decay_series(-2.0, 500, 0.01);
        let library = LibrarySpec::polynomial(1, 0, 2).unwrap();
        let model =
            identify_with_derivatives(&series, &xdot, &library, &SparseSolver::stlsq(0.1)).unwrap();
        let xi = model.coefficients().values();
        assert!(xi[(0, 0)].abs() < 1e-10, "constant {}", xi[(0, 0)]);
        assert!((xi[(0, 1)] + 2.0).abs() < 1e-10, "linear {}", xi[(0, 1)]);
        assert!(xi[(0, 2)].abs() < 1e-10, "quadratic {}", xi[(0, 2)]);
    }

    #[test]
    fn identify_from_central_differences() {
        let (series, _) = exponential_decay_series(-2.0, 2000, 0.001);
        let library = LibrarySpec::polynomial(1, 0, 2).unwrap();
        let model = identify(
            &series,
            &library,
            &DiffMethod::Central,
            &SparseSolver::stlsq(0.1),
        )
        .unwrap();
        let xi = model.coefficients().values();
        assert!((xi[(0, 1)] + 2.0).abs() < 1e-5, "linear {}", xi[(0, 1)]);
    }

    #[test]
    fn equilibrium_data_gives_zero_model() {
        let times = Array1::from_iter((0..50).map(|k| k as f64 * 0.1));
        let states = Array2::from_elem((2, 50), 3.0);
        let series = TimeSeries::new(times, states, None).unwrap();
        let library = LibrarySpec::polynomial(2, 0, 3).unwrap();
        let model = identify(
            &series,
            &library,
            &DiffMethod::Central,
            &SparseSolver::stlsq(0.01),
        )
        .unwrap();
        assert_eq!(model.active_terms(), 0);
    }

    #[test]
    fn library_series_mismatch_is_param_error() {
        let (series, _) = exponential_decay_series(-1.0, 20, 0.1);
        let library = LibrarySpec::polynomial(1, 1, 2).unwrap();
        let err = identify(
            &series,
            &library,
            &DiffMethod::Central,
            &SparseSolver::stlsq(0.1),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Param(_)));
    }

    #[test]
    fn scarce_data_sets_underdetermined_flag() {
        // degree-3 library has 4 terms; 4 usable columns < 4 + 1
        let (series, xdot) = exponential_decay_series(-1.0, 4, 0.1);
        let library = LibrarySpec::polynomial(1, 0, 3).unwrap();
        let model =
            identify_with_derivatives(&series, &xdot, &library, &SparseSolver::stlsq(0.0))
                .unwrap();
        assert!(model.metadata().underdetermined);

        let (big, big_xdot) = exponential_decay_series(-1.0, 50, 0.1);
        let model =
            identify_with_derivatives(&big, &big_xdot, &library, &SparseSolver::stlsq(0.0))
                .unwrap();
        assert!(!model.metadata().underdetermined);
    }

    fn feedback_series(noise_std: f64, samples: usize, seed: u64) -> TimeSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let times = Array1::from_iter((0..samples).map(|k| k as f64 * 0.01));
        let states = Array2::from_shape_fn((3, samples), |_| rng.random_range(-20.0..20.0_f64));
        let mut inputs = Array2::zeros((1, samples));
        for k in 0..samples {
            inputs[(0, k)] = 26.0 - states[(0, k)]
                + noise_std * rng.sample::<f64, _>(rand_distr::StandardNormal);
        }
        TimeSeries::new(times, states, Some(inputs)).unwrap()
    }

    #[test]
    fn feedback_law_exact_recovery() {
        let series = feedback_series(0.0, 300, 3);
        let library = LibrarySpec::polynomial(3, 0, 1).unwrap(); // [1, x, y, z]
        let law = identify_feedback(&series, &library, &SparseSolver::stlsq(0.5)).unwrap();
        let xi = law.coefficients().values();
        assert!((xi[(0, 0)] - 26.0).abs() < 1e-8);
        assert!((xi[(0, 1)] + 1.0).abs() < 1e-8);
        assert_eq!(xi[(0, 2)], 0.0);
        assert_eq!(xi[(0, 3)], 0.0);
        assert!((law.evaluate(&[26.0, 1.0, 2.0]).unwrap()[0]).abs() < 1e-8);
    }

    #[test]
    fn feedback_law_with_noise_is_close() {
        let series = feedback_series(1.0, 4000, 4);
        let library = LibrarySpec::polynomial(3, 0, 1).unwrap();
        let law = identify_feedback(&series, &library, &SparseSolver::stlsq(0.5)).unwrap();
        let xi = law.coefficients().values();
        assert!((xi[(0, 0)] - 26.0).abs() < 0.1, "offset {}", xi[(0, 0)]);
        assert!((xi[(0, 1)] + 1.0).abs() < 0.1, "gain {}", xi[(0, 1)]);
    }

    #[test]
    fn zero_input_gives_zero_law() {
        let mut series = feedback_series(0.0, 100, 5);
        let zero = Array2::zeros((1, series.len()));
        series =
            TimeSeries::new(series.times().clone(), series.states().clone(), Some(zero)).unwrap();
        let library = LibrarySpec::polynomial(3, 0, 2).unwrap();
        let law = identify_feedback(&series, &library, &SparseSolver::stlsq(0.1)).unwrap();
        assert!(law.coefficients().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn feedback_without_inputs_is_param_error() {
        let (series, _) = exponential_decay_series(-1.0, 20, 0.1);
        let library = LibrarySpec::polynomial(1, 0, 1).unwrap();
        assert!(matches!(
            identify_feedback(&series, &library, &SparseSolver::stlsq(0.1)),
            Err(Error::Param(_))
        ));
    }

    fn lorenz_model() -> SparseModel {
        let library = LibrarySpec::polynomial(3, 0, 2).unwrap();
        // terms: 1, x1, x2, x3, x1^2, x1*x2, x1*x3, x2^2, x2*x3, x3^2
        let mut xi = Array2::zeros((3, 10));
        xi[(0, 1)] = -10.0;
        xi[(0, 2)] = 10.0;
        xi[(1, 1)] = 28.0;
        xi[(1, 2)] = -1.0;
        xi[(1, 6)] = -1.0;
        xi[(2, 5)] = 1.0;
        xi[(2, 3)] = -8.0 / 3.0;
        SparseModel::new(
            CoefficientMatrix::new(xi, library).unwrap(),
            ModelMetadata {
                solver: "stlsq".into(),
                alpha_or_threshold: 0.1,
                seed: None,
                data_fingerprint: None,
                underdetermined: false,
            },
        )
    }

    #[test]
    fn model_rhs_zero_model() {
        let library = LibrarySpec::polynomial(2, 0, 2).unwrap();
        let xi = Array2::zeros((2, library.term_count()));
        let model = SparseModel::new(
            CoefficientMatrix::new(xi, library).unwrap(),
            ModelMetadata {
                solver: "stlsq".into(),
                alpha_or_threshold: 0.0,
                seed: None,
                data_fingerprint: None,
                underdetermined: false,
            },
        );
        assert_eq!(
            model_rhs(&model, &[1.0, -2.0], &[]).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn model_rhs_lorenz_values() {
        let model = lorenz_model();
        let at_origin = model_rhs(&model, &[0.0, 0.0, 0.0], &[]).unwrap();
        assert_eq!(at_origin, vec![0.0, 0.0, 0.0]);
        let at_ones = model_rhs(&model, &[1.0, 1.0, 1.0], &[]).unwrap();
        assert!(at_ones[0].abs() < 1e-12);
        assert!((at_ones[1] - 26.0).abs() < 1e-12);
        assert!((at_ones[2] - (1.0 - 8.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn model_rhs_dimension_mismatch() {
        let model = lorenz_model();
        assert!(matches!(
            model_rhs(&model, &[1.0, 2.0], &[]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn simulate_zero_model_is_constant() {
        let library = LibrarySpec::polynomial(1, 0, 1).unwrap();
        let xi = Array2::zeros((1, 2));
        let model = SparseModel::new(
            CoefficientMatrix::new(xi, library).unwrap(),
            ModelMetadata {
                solver: "stlsq".into(),
                alpha_or_threshold: 0.0,
                seed: None,
                data_fingerprint: None,
                underdetermined: false,
            },
        );
        let traj = simulate(&model, &[2.5], |_| vec![], 1.0, 0.1).unwrap();
        for v in traj.states().iter() {
            assert_eq!(*v, 2.5);
        }
    }

    #[test]
    fn simulate_exact_decay_model() {
        let library = LibrarySpec::polynomial(1, 0, 2).unwrap();
        let mut xi = Array2::zeros((1, 3));
        xi[(0, 1)] = -2.0;
        let model = SparseModel::new(
            CoefficientMatrix::new(xi, library).unwrap(),
            ModelMetadata {
                solver: "stlsq".into(),
                alpha_or_threshold: 0.1,
                seed: None,
                data_fingerprint: None,
                underdetermined: false,
            },
        );
        let traj = simulate(&model, &[1.0], |_| vec![], 1.0, 0.01).unwrap();
        let last = traj.states()[(0, traj.len() - 1)];
        assert!((last - (-2.0_f64).exp()).abs() < 1e-8, "final {last}");
    }

    #[test]
    fn simulate_unstable_model_diverges() {
        let library = LibrarySpec::polynomial(1, 0, 2).unwrap();
        let mut xi = Array2::zeros((1, 3));
        xi[(0, 2)] = 1.0; // dx/dt = x^2 blows up in finite time
        let model = SparseModel::new(
            CoefficientMatrix::new(xi, library).unwrap(),
            ModelMetadata {
                solver: "stlsq".into(),
                alpha_or_threshold: 0.1,
                seed: None,
                data_fingerprint: None,
                underdetermined: false,
            },
        );
        let err = simulate(&model, &[1.0], |_| vec![], 5.0, 0.001).unwrap_err();
        match err {
            Error::Divergence { time, limit } => {
                assert!(time > 0.5 && time < 1.5, "blow-up time {time}");
                assert_eq!(limit, MODEL_DIVERGENCE_LIMIT);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn equations_text_forms() {
        let library = LibrarySpec::polynomial(2, 1, 2).unwrap();
        let mut xi = Array2::zeros((2, library.term_count()));
        // terms: 1, x1, x2, u, x1^2, x1*x2, x1*u, x2^2, x2*u, u^2
        xi[(0, 1)] = 0.5;
        xi[(0, 5)] = -0.025;
        xi[(0, 9)] = 1.0;
        xi[(1, 2)] = -0.5;
        xi[(1, 5)] = 0.005;
        let model = SparseModel::new(
            CoefficientMatrix::new(xi, library).unwrap(),
            ModelMetadata {
                solver: "stlsq".into(),
                alpha_or_threshold: 0.1,
                seed: None,
                data_fingerprint: None,
                underdetermined: false,
            },
        );
        let names: Vec<String> = vec!["x1".into(), "x2".into(), "u".into()];
        let text = model_to_equations(&model, &names);
        assert_eq!(
            text,
            "dx1/dt = 0.5*x1 - 0.025*x1*x2 + 1*u^2\ndx2/dt = -0.5*x2 + 0.005*x1*x2"
        );
    }

    #[test]
    fn equations_zero_model() {
        let library = LibrarySpec::polynomial(1, 0, 1).unwrap();
        let xi = Array2::zeros((1, 2));
        let model = SparseModel::new(
            CoefficientMatrix::new(xi, library).unwrap(),
            ModelMetadata {
                solver: "stlsq".into(),
                alpha_or_threshold: 0.1,
                seed: None,
                data_fingerprint: None,
                underdetermined: false,
            },
        );
        assert_eq!(
            model_to_equations(&model, &["x1".to_string()]),
            "dx1/dt = 0"
        );
    }

    #[test]
    fn lorenz_equations_have_three_lines() {
        let model = lorenz_model();
        let names: Vec<String> = vec!["x".into(), "y".into(), "z".into()];
        let text = model_to_equations(&model, &names);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "dx/dt = -10*x + 10*y");
        assert_eq!(lines[1], "dy/dt = 28*x - 1*y - 1*x*z");
        assert_eq!(lines[2], "dz/dt = -2.66666666667*z + 1*x*y");
    }

    #[test]
    fn model_save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = lorenz_model();
        save_model(&model, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn truncated_model_file_is_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&lorenz_model(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Schema(_))));
    }

    #[test]
    fn version_mismatch_is_schema_error_with_message() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&lorenz_model(), &path).unwrap();
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace("\"version\": 1", "\"version\": 99");
        std::fs::write(&path, text).unwrap();
        match load_model(&path) {
            Err(Error::Schema(msg)) => assert!(msg.contains("version"), "{msg}"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    /// Random planted models over a degree-2 library are recovered from
    /// their own trajectories when the data is informative.
    #[test]
    fn planted_model_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(2025);
        let mut recovered = 0;
        let mut attempts = 0;
        while recovered < 50 && attempts < 400 {
            attempts += 1;
            let n = rng.random_range(1..=3);
            let library = LibrarySpec::polynomial(n, 0, 2).unwrap();
            let p = library.term_count();
            let mut xi = Array2::zeros((n, p));
            for i in 0..n {
                let k_terms = rng.random_range(1..=2);
                for _ in 0..k_terms {
                    let j = rng.random_range(0..p);
                    let mag = rng.random_range(0.5..5.0);
                    xi[(i, j)] = if rng.random_bool(0.5) { mag } else { -mag };
                }
            }
            let model = SparseModel::new(
                CoefficientMatrix::new(xi.clone(), library.clone()).unwrap(),
                ModelMetadata {
                    solver: "stlsq".into(),
                    alpha_or_threshold: 0.1,
                    seed: None,
                    data_fingerprint: None,
                    underdetermined: false,
                },
            );
            let x0: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
            let Ok(series) = simulate(&model, &x0, |_| vec![], 1.0, 0.001) else {
                continue; // blew up; draw another model
            };
            if series.states().iter().any(|v| v.abs() > 10.0) {
                continue;
            }
            // analytic derivatives from the planted right-hand side
            let mut xdot = Array2::zeros((n, series.len()));
            for k in 0..series.len() {
                let x: Vec<f64> = (0..n).map(|i| series.states()[(i, k)]).collect();
                let d = model_rhs(&model, &x, &[]).unwrap();
                for i in 0..n {
                    xdot[(i, k)] = d[i];
                }
            }
            // skip uninformative trajectories (near-collinear library rows)
            let theta = library.evaluate(series.states().view(), None).unwrap();
            let mut scaled = theta.values.clone();
            for mut row in scaled.rows_mut() {
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    row.mapv_inplace(|v| v / norm);
                }
            }
            let (_, sv, _) = crate::linalg::economy_svd(scaled.view()).unwrap();
            let smax = sv.iter().cloned().fold(0.0_f64, f64::max);
            if sv.iter().any(|&s| s < 1e-6 * smax) {
                continue;
            }

            let fitted =
                identify_with_derivatives(&series, &xdot, &library, &SparseSolver::stlsq(0.1))
                    .unwrap();
            for (a, b) in fitted.coefficients().values().iter().zip(xi.iter()) {
                assert!(
                    (a - b).abs() < 1e-8,
                    "attempt {attempts}: recovered {a} vs planted {b}"
                );
            }
            recovered += 1;
        }
        assert!(recovered >= 50, "only {recovered} informative trials");
    }

    /// Scaling every state channel by c rescales a degree-d monomial
    /// coefficient by c^(1-d).
    #[test]
    fn monomial_coefficients_follow_scaling_law() {
        let library = LibrarySpec::polynomial(2, 0, 2).unwrap();
        let mut xi = Array2::zeros((2, library.term_count()));
        xi[(0, 1)] = 1.2; // x1
        xi[(0, 5)] = -0.7; // x1*x2
        xi[(1, 2)] = -0.9; // x2
        xi[(1, 4)] = 0.6; // x1^2
        let model = SparseModel::new(
            CoefficientMatrix::new(xi.clone(), library.clone()).unwrap(),
            ModelMetadata {
                solver: "stlsq".into(),
                alpha_or_threshold: 0.05,
                seed: None,
                data_fingerprint: None,
                underdetermined: false,
            },
        );
        let series = simulate(&model, &[0.8, 1.1], |_| vec![], 1.0, 0.001).unwrap();
        let mut xdot = Array2::zeros((2, series.len()));
        for k in 0..series.len() {
            let x = [series.states()[(0, k)], series.states()[(1, k)]];
            let d = model_rhs(&model, &x, &[]).unwrap();
            xdot[(0, k)] = d[0];
            xdot[(1, k)] = d[1];
        }
        let c = 2.0;
        let scaled_series = TimeSeries::new(
            series.times().clone(),
            series.states().mapv(|v| c * v),
            None,
        )
        .unwrap();
        let scaled_xdot = xdot.mapv(|v| c * v);

        let base = identify_with_derivatives(&series, &xdot, &library, &SparseSolver::stlsq(0.05))
            .unwrap();
        let scaled = identify_with_derivatives(
            &scaled_series,
            &scaled_xdot,
            &library,
            &SparseSolver::stlsq(0.05),
        )
        .unwrap();
        for (j, term) in library.terms().iter().enumerate() {
            let degree = i32::try_from(term.degree()).unwrap();
            let factor = c.powi(1 - degree);
            for i in 0..2 {
                let expect = base.coefficients().values()[(i, j)] * factor;
                let got = scaled.coefficients().values()[(i, j)];
                assert!(
                    (got - expect).abs() < 1e-8 * expect.abs().max(1.0),
                    "term {j} row {i}: {got} vs {expect}"
                );
            }
        }
    }

    /// With a zero input channel, the input-aware fit restricted to
    /// state-only terms matches the state-only fit.
    #[test]
    fn zero_input_channel_matches_state_only_fit() {
        let (series_plain, xdot) = exponential_decay_series(-1.5, 400, 0.005);
        let zero_inputs = Array2::zeros((1, series_plain.len()));
        let series_with_u = TimeSeries::new(
            series_plain.times().clone(),
            series_plain.states().clone(),
            Some(zero_inputs),
        )
        .unwrap();

        let lib_q0 = LibrarySpec::polynomial(1, 0, 2).unwrap();
        let lib_q1 = LibrarySpec::polynomial(1, 1, 2).unwrap();
        let solver = SparseSolver::stlsq(0.1);
        let m0 = identify_with_derivatives(&series_plain, &xdot, &lib_q0, &solver).unwrap();
        let m1 = identify_with_derivatives(&series_with_u, &xdot, &lib_q1, &solver).unwrap();

        for (j1, term) in lib_q1.terms().iter().enumerate() {
            let state_only = match term {
                Term::Constant => Some(Term::Constant),
                Term::Monomial { exponents } => {
                    if exponents[1] == 0 {
                        Some(Term::Monomial {
                            exponents: vec![exponents[0]],
                        })
                    } else {
                        None
                    }
                }
                Term::Trig { .. } => None,
            };
            match state_only {
                Some(t) => {
                    let j0 = lib_q0.terms().iter().position(|x| *x == t).unwrap();
                    let a = m0.coefficients().values()[(0, j0)];
                    let b = m1.coefficients().values()[(0, j1)];
                    assert!((a - b).abs() < 1e-10, "term {j1}: {a} vs {b}");
                }
                None => {
                    assert_eq!(m1.coefficients().values()[(0, j1)], 0.0);
                }
            }
        }
    }
}
