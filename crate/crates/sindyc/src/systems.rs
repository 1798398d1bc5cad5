//! Ground-truth benchmark systems, forcing-signal generators, and a
//! fixed-step RK4 integrator used to produce training and validation data.

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::TimeSeries;

/// Blow-up cutoff for the integrator.
pub const INTEGRATION_DIVERGENCE_LIMIT: f64 = 1e8;

/// Predator-prey growth/death rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LotkaVolterraParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Default for LotkaVolterraParams {
    fn default() -> Self {
        // Produces visible oscillations at population scale; overridable in
        // configs.
        LotkaVolterraParams {
            a: 0.5,
            b: 0.025,
            c: 0.5,
            d: 0.005,
        }
    }
}

/// How the scalar input enters the first Lorenz equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMap {
    None,
    Identity,
    Cubic,
}

impl InputMap {
    pub fn apply(self, u: f64) -> f64 {
        match self {
            InputMap::None => 0.0,
            InputMap::Identity => u,
            InputMap::Cubic => u * u * u,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorenzParams {
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
    pub input_map: InputMap,
}

impl Default for LorenzParams {
    fn default() -> Self {
        LorenzParams {
            sigma: 10.0,
            rho: 28.0,
            beta: 8.0 / 3.0,
            input_map: InputMap::Identity,
        }
    }
}

/// Right-hand side of the forced predator-prey model: the prey channel is
/// driven by the square of the input.
pub fn lotka_volterra_rhs(x: &[f64], u: f64, p: &LotkaVolterraParams) -> Vec<f64> {
    debug_assert_eq!(x.len(), 2);
    vec![
        p.a * x[0] - p.b * x[0] * x[1] + u * u,
        -p.c * x[1] + p.d * x[0] * x[1],
    ]
}

/// Conserved quantity of the unforced predator-prey model, used to gauge
/// integrator drift.
pub fn lotka_volterra_first_integral(x: &[f64], p: &LotkaVolterraParams) -> f64 {
    p.d * x[0] - p.c * x[0].ln() + p.b * x[1] - p.a * x[1].ln()
}

/// Right-hand side of the Lorenz system with the input entering the first
/// equation through the configured map.
pub fn lorenz_rhs(x: &[f64], u: f64, p: &LorenzParams) -> Vec<f64> {
    debug_assert_eq!(x.len(), 3);
    vec![
        p.sigma * (x[1] - x[0]) + p.input_map.apply(u),
        x[0] * (p.rho - x[2]) - x[1],
        x[0] * x[1] - p.beta * x[2],
    ]
}

/// Forcing-signal description. Deterministic kinds are pure functions of
/// time; stochastic kinds draw one sample per integration step from a
/// seeded generator and are held constant over the step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Signal {
    /// `offset + sum_i amp_i * sin(freq_i * t)`, `(amp, freq)` pairs in
    /// `components`.
    SumOfSinusoids {
        #[serde(default)]
        offset: f64,
        components: Vec<(f64, f64)>,
    },
    Constant {
        value: f64,
    },
    /// Gaussian samples `mean + std * N(0,1)`, one per step.
    WhiteNoise {
        #[serde(default)]
        mean: f64,
        #[serde(default = "default_noise_std")]
        std: f64,
        #[serde(default)]
        seed: u64,
    },
    /// `offset + gains . x(t) + noise_std * N(0,1)`; requires a state probe.
    StateFeedbackPlusNoise {
        offset: f64,
        gains: Vec<f64>,
        #[serde(default = "default_noise_std")]
        noise_std: f64,
        #[serde(default)]
        seed: u64,
    },
    /// `offset + amplitude` while `t mod period < width`, `offset` otherwise.
    StepTrain {
        amplitude: f64,
        period: f64,
        width: f64,
        #[serde(default)]
        offset: f64,
    },
}

impl Signal {
    pub fn is_stochastic(&self) -> bool {
        matches!(
            self,
            Signal::WhiteNoise { .. } | Signal::StateFeedbackPlusNoise { .. }
        )
    }

    fn deterministic_value(&self, t: f64) -> f64 {
        match self {
            Signal::SumOfSinusoids { offset, components } => {
                offset
                    + components
                        .iter()
                        .map(|(amp, freq)| amp * (freq * t).sin())
                        .sum::<f64>()
            }
            Signal::Constant { value } => *value,
            Signal::StepTrain {
                amplitude,
                period,
                width,
                offset,
            } => {
                if t.rem_euclid(*period) < *width {
                    offset + amplitude
                } else {
                    *offset
                }
            }
            Signal::WhiteNoise { .. } | Signal::StateFeedbackPlusNoise { .. } => {
                unreachable!("stochastic signals are sampled per step")
            }
        }
    }
}

/// Accessor for the current state, used by feedback signals.
pub type StateProbe = Box<dyn Fn() -> Vec<f64>>;

/// Turn a signal description into a callable `t -> u`.
///
/// Deterministic kinds may be called at any time, any number of times.
/// Stochastic kinds draw a fresh sample on every call and are meant to be
/// called once per integration step; the stream is reproducible from the
/// seed.
pub fn make_signal(
    signal: &Signal,
    state_probe: Option<StateProbe>,
) -> Result<Box<dyn FnMut(f64) -> f64>> {
    match signal {
        Signal::StateFeedbackPlusNoise {
            offset,
            gains,
            noise_std,
            seed,
        } => {
            let probe = state_probe
                .ok_or_else(|| Error::Param("state-feedback signal needs a state probe".into()))?;
            let offset = *offset;
            let gains = gains.clone();
            let noise_std = *noise_std;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            Ok(Box::new(move |_t| {
                let x = probe();
                let fb: f64 = gains.iter().zip(&x).map(|(g, xi)| g * xi).sum();
                offset + fb + noise_std * rng.sample::<f64, _>(StandardNormal)
            }))
        }
        Signal::WhiteNoise { mean, std, seed } => {
            let (mean, std) = (*mean, *std);
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            Ok(Box::new(move |_t| {
                mean + std * rng.sample::<f64, _>(StandardNormal)
            }))
        }
        deterministic => {
            let sig = deterministic.clone();
            Ok(Box::new(move |t| sig.deterministic_value(t)))
        }
    }
}

/// Classical fixed-step RK4 over `[0, t_span]`.
///
/// Deterministic signals are evaluated at the substep times; stochastic
/// signals are sampled once per step and held (zero-order hold), and the
/// held value is what lands in the returned input channel, so the recorded
/// data is exactly what drove the integration. Passing no signal integrates
/// the unforced system and omits the input channel.
pub fn rk4_integrate(
    rhs: impl Fn(&[f64], f64, f64) -> Vec<f64>,
    x0: &[f64],
    signal: Option<&Signal>,
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
    let steps = (t_span / dt).round() as usize;
    let n = x0.len();
    let mut states = Array2::zeros((n, steps + 1));
    let mut inputs = signal.map(|_| Array2::zeros((1, steps + 1)));
    let times = Array1::from_iter((0..=steps).map(|k| k as f64 * dt));

    let mut rng = signal.and_then(|s| match s {
        Signal::WhiteNoise { seed, .. } | Signal::StateFeedbackPlusNoise { seed, .. } => {
            Some(ChaCha8Rng::seed_from_u64(*seed))
        }
        _ => None,
    });

    let mut x = x0.to_vec();
    for k in 0..=steps {
        let t = times[k];
        for (i, &v) in x.iter().enumerate() {
            states[(i, k)] = v;
        }
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > INTEGRATION_DIVERGENCE_LIMIT {
            return Err(Error::Divergence {
                time: t,
                limit: INTEGRATION_DIVERGENCE_LIMIT,
            });
        }
        // input for this step (and the value recorded at this sample)
        let u_here = match signal {
            None => 0.0,
            Some(s) if s.is_stochastic() => sample_stochastic(s, &x, rng.as_mut().unwrap()),
            Some(s) => s.deterministic_value(t),
        };
        if let Some(u) = inputs.as_mut() {
            u[(0, k)] = u_here;
        }
        if k == steps {
            break;
        }

        let held = signal.is_some_and(Signal::is_stochastic);
        let u_mid;
        let u_end;
        if held {
            u_mid = u_here;
            u_end = u_here;
        } else {
            u_mid = signal.map_or(0.0, |s| s.deterministic_value(t + 0.5 * dt));
            u_end = signal.map_or(0.0, |s| s.deterministic_value(t + dt));
        }

        let k1 = rhs(&x, u_here, t);
        let x2: Vec<f64> = x
            .iter()
            .zip(&k1)
            .map(|(xi, ki)| xi + 0.5 * dt * ki)
            .collect();
        let k2 = rhs(&x2, u_mid, t + 0.5 * dt);
        let x3: Vec<f64> = x
            .iter()
            .zip(&k2)
            .map(|(xi, ki)| xi + 0.5 * dt * ki)
            .collect();
        let k3 = rhs(&x3, u_mid, t + 0.5 * dt);
        let x4: Vec<f64> = x.iter().zip(&k3).map(|(xi, ki)| xi + dt * ki).collect();
        let k4 = rhs(&x4, u_end, t + dt);
        for i in 0..n {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                time: t + dt,
                limit: INTEGRATION_DIVERGENCE_LIMIT,
            });
        }
    }

    TimeSeries::new(times, states, inputs)
}

fn sample_stochastic(signal: &Signal, x: &[f64], rng: &mut ChaCha8Rng) -> f64 {
    match signal {
        Signal::WhiteNoise { mean, std, .. } => mean + std * rng.sample::<f64, _>(StandardNormal),
        Signal::StateFeedbackPlusNoise {
            offset,
            gains,
            noise_std,
            ..
        } => {
            let fb: f64 = gains.iter().zip(x).map(|(g, xi)| g * xi).sum();
            offset + fb + noise_std * rng.sample::<f64, _>(StandardNormal)
        }
        _ => unreachable!(),
    }
}
