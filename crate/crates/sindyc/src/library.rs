//! Candidate-function libraries over states and (optionally) inputs.
//!
//! A library is an ordered list of scalar terms — constant, monomials up to
//! a total degree, and sinusoids of integer frequency — evaluated on every
//! snapshot column. Inputs are treated as extra channels in one joint
//! monomial enumeration, which is what produces the state-input cross terms
//! needed when identifying forced systems.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrigKind {
    Sin,
    Cos,
}

/// One scalar term of the library.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Constant,
    /// Product of channel powers; `exponents` has one entry per channel,
    /// states first, then inputs.
    Monomial {
        exponents: Vec<u32>,
    },
    Trig {
        channel: usize,
        frequency: u32,
        kind: TrigKind,
    },
}

impl Term {
    pub fn degree(&self) -> u32 {
        match self {
            Term::Constant => 0,
            Term::Monomial { exponents } => exponents.iter().sum(),
            Term::Trig { .. } => 0,
        }
    }
}

/// Parameters that generate a library; the term list is derived from these.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct LibraryParams {
    state_dim: usize,
    input_dim: usize,
    poly_degree: u32,
    #[serde(default)]
    trig_frequencies: Vec<u32>,
    include_constant: bool,
}

/// Symbolic description of a candidate-function library.
///
/// The term order is canonical: the constant first (when enabled), then
/// monomials in graded lexicographic order over `(x1..xn, u1..uq)`, then
/// trig terms by channel, then frequency, sin before cos. Two specs built
/// from equal parameters are identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LibraryParams", into = "LibraryParams")]
pub struct LibrarySpec {
    state_dim: usize,
    input_dim: usize,
    poly_degree: u32,
    trig_frequencies: Vec<u32>,
    include_constant: bool,
    terms: Vec<Term>,
}

impl TryFrom<LibraryParams> for LibrarySpec {
    type Error = Error;
    fn try_from(p: LibraryParams) -> Result<Self> {
        LibrarySpec::build(
            p.state_dim,
            p.input_dim,
            p.poly_degree,
            &p.trig_frequencies,
            p.include_constant,
        )
    }
}

impl From<LibrarySpec> for LibraryParams {
    fn from(s: LibrarySpec) -> Self {
        LibraryParams {
            state_dim: s.state_dim,
            input_dim: s.input_dim,
            poly_degree: s.poly_degree,
            trig_frequencies: s.trig_frequencies,
            include_constant: s.include_constant,
        }
    }
}

impl LibrarySpec {
    /// Enumerate the terms for the given parameters.
    pub fn build(
        state_dim: usize,
        input_dim: usize,
        poly_degree: u32,
        trig_frequencies: &[u32],
        include_constant: bool,
    ) -> Result<Self> {
        if state_dim < 1 {
            return Err(Error::Param("state_dim must be at least 1".into()));
        }
        if poly_degree < 1 {
            return Err(Error::Param("poly_degree must be at least 1".into()));
        }
        if trig_frequencies.contains(&0) {
            return Err(Error::Param("trig frequencies must be positive".into()));
        }
        let channels = state_dim + input_dim;
        let mut terms = Vec::new();
        if include_constant {
            terms.push(Term::Constant);
        }
        for degree in 1..=poly_degree {
            let mut exps = vec![0u32; channels];
            push_monomials(&mut terms, &mut exps, 0, degree);
        }
        for channel in 0..channels {
            for &frequency in trig_frequencies {
                terms.push(Term::Trig {
                    channel,
                    frequency,
                    kind: TrigKind::Sin,
                });
                terms.push(Term::Trig {
                    channel,
                    frequency,
                    kind: TrigKind::Cos,
                });
            }
        }
        Ok(Self {
            state_dim,
            input_dim,
            poly_degree,
            trig_frequencies: trig_frequencies.to_vec(),
            include_constant,
            terms,
        })
    }

    /// Polynomial library with constant term and no trig rows.
    pub fn polynomial(state_dim: usize, input_dim: usize, degree: u32) -> Result<Self> {
        Self::build(state_dim, input_dim, degree, &[], true)
    }

    /// Pure linear library (no constant): evaluating it returns the state
    /// matrix itself when there are no inputs.
    pub fn linear(state_dim: usize, input_dim: usize) -> Result<Self> {
        Self::build(state_dim, input_dim, 1, &[], false)
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn poly_degree(&self) -> u32 {
        self.poly_degree
    }

    pub fn include_constant(&self) -> bool {
        self.include_constant
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Evaluate every term at every snapshot column. `inputs` must be given
    /// exactly when the library has input channels.
    pub fn evaluate(
        &self,
        states: ArrayView2<'_, f64>,
        inputs: Option<ArrayView2<'_, f64>>,
    ) -> Result<LibraryMatrix> {
        if states.nrows() != self.state_dim {
            return Err(Error::Shape(format!(
                "states have {} channels, library expects {}",
                states.nrows(),
                self.state_dim
            )));
        }
        match &inputs {
            None if self.input_dim == 0 => {}
            None => {
                return Err(Error::Param(format!(
                    "library has {} input channels but no inputs were supplied",
                    self.input_dim
                )))
            }
            Some(_) if self.input_dim == 0 => {
                return Err(Error::Param(
                    "library has no input channels but inputs were supplied".into(),
                ))
            }
            Some(u) => {
                if u.nrows() != self.input_dim {
                    return Err(Error::Shape(format!(
                        "inputs have {} channels, library expects {}",
                        u.nrows(),
                        self.input_dim
                    )));
                }
                if u.ncols() != states.ncols() {
                    return Err(Error::Shape(format!(
                        "inputs have {} columns, states have {}",
                        u.ncols(),
                        states.ncols()
                    )));
                }
            }
        }
        let m = states.ncols();
        let p = self.term_count();
        let mut values = Array2::zeros((p, m));
        let mut point = vec![0.0; self.state_dim + self.input_dim];
        for k in 0..m {
            for i in 0..self.state_dim {
                point[i] = states[(i, k)];
            }
            if let Some(u) = &inputs {
                for i in 0..self.input_dim {
                    point[self.state_dim + i] = u[(i, k)];
                }
            }
            for (j, term) in self.terms.iter().enumerate() {
                values[(j, k)] = eval_term(term, &point);
            }
        }
        Ok(LibraryMatrix {
            values,
            spec: self.clone(),
        })
    }

    /// Evaluate every term at a single point.
    pub fn evaluate_point(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.state_dim {
            return Err(Error::Shape(format!(
                "point has {} state entries, library expects {}",
                x.len(),
                self.state_dim
            )));
        }
        if u.len() != self.input_dim {
            return Err(Error::Shape(format!(
                "point has {} input entries, library expects {}",
                u.len(),
                self.input_dim
            )));
        }
        let mut point = Vec::with_capacity(x.len() + u.len());
        point.extend_from_slice(x);
        point.extend_from_slice(u);
        Ok(self.terms.iter().map(|t| eval_term(t, &point)).collect())
    }

    /// Default channel names: `x1..xn`, then `u` (single input) or `u1..uq`.
    pub fn default_channel_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (1..=self.state_dim).map(|i| format!("x{i}")).collect();
        if self.input_dim == 1 {
            names.push("u".into());
        } else {
            names.extend((1..=self.input_dim).map(|i| format!("u{i}")));
        }
        names
    }
}

// Graded lexicographic enumeration: exponent of the current channel runs
// from the remaining degree down to zero.
fn push_monomials(terms: &mut Vec<Term>, exps: &mut Vec<u32>, channel: usize, remaining: u32) {
    if channel == exps.len() - 1 {
        exps[channel] = remaining;
        terms.push(Term::Monomial {
            exponents: exps.clone(),
        });
        exps[channel] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        exps[channel] = e;
        push_monomials(terms, exps, channel + 1, remaining - e);
    }
    exps[channel] = 0;
}

fn eval_term(term: &Term, point: &[f64]) -> f64 {
    match term {
        Term::Constant => 1.0,
        Term::Monomial { exponents } => {
            let mut v = 1.0;
            for (i, &e) in exponents.iter().enumerate() {
                if e > 0 {
                    v *= point[i].powi(e as i32);
                }
            }
            v
        }
        Term::Trig {
            channel,
            frequency,
            kind,
        } => {
            let arg = *frequency as f64 * point[*channel];
            match kind {
                TrigKind::Sin => arg.sin(),
                TrigKind::Cos => arg.cos(),
            }
        }
    }
}

/// Human-readable name of a term, e.g. `x1*x2`, `u^2`, `sin(2*x1)`.
pub fn term_name(term: &Term, channel_names: &[String]) -> String {
    match term {
        Term::Constant => "1".to_string(),
        Term::Monomial { exponents } => {
            let parts: Vec<String> = exponents
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(i, &e)| {
                    if e == 1 {
                        channel_names[i].clone()
                    } else {
                        format!("{}^{e}", channel_names[i])
                    }
                })
                .collect();
            if parts.is_empty() {
                "1".to_string()
            } else {
                parts.join("*")
            }
        }
        Term::Trig {
            channel,
            frequency,
            kind,
        } => {
            let f = match kind {
                TrigKind::Sin => "sin",
                TrigKind::Cos => "cos",
            };
            if *frequency == 1 {
                format!("{f}({})", channel_names[*channel])
            } else {
                format!("{f}({frequency}*{})", channel_names[*channel])
            }
        }
    }
}

/// A library evaluated on snapshot data: one row per term, one column per
/// snapshot.
#[derive(Debug, Clone)]
pub struct LibraryMatrix {
    pub values: Array2<f64>,
    pub spec: LibrarySpec,
}
