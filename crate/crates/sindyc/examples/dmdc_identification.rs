//! Separate internal dynamics from actuation in a driven linear system.
//!
//! A persistently exciting white-noise input makes the stacked regression
//! `x_{k+1} = A x_k + B u_k` well posed, so both operators come back
//! exactly. Dropping the input and decomposing the same trajectory instead
//! folds the actuation into a distorted `A` — the comparison shows why the
//! input channel matters.

use ndarray::{array, Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use sindyc::*;

fn main() -> Result<()> {
    let a = array![[0.9, 0.1], [0.0, 0.8]];
    let b = array![[1.0], [0.5]];
    println!("planted A = {a:.4}");
    println!("planted B = {b:.4}");

    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let samples = 300;
    let mut states = Array2::zeros((2, samples));
    let mut inputs = Array2::zeros((1, samples));
    let mut x = array![1.0, -1.0];
    for k in 0..samples {
        let u: f64 = rng.sample(rand_distr::StandardNormal);
        states.column_mut(k).assign(&x);
        inputs[(0, k)] = u;
        x = a.dot(&x) + b.column(0).mapv(|v| v * u);
    }
    let times = Array1::from_iter((0..samples).map(|k| k as f64));
    let series = TimeSeries::new(times, states, Some(inputs))?;
    let pair = to_snapshot_pair(&series);

    let result = dmdc(&pair, None)?;
    println!("\nrecovered A = {:.4}", result.state_operator);
    println!("recovered B = {:.4}", result.input_operator);
    println!("ill-conditioned: {}", result.ill_conditioned);
    println!("eigenvalues of A:");
    for l in result.eigenvalues.iter() {
        println!("  {:+.6} {:+.6}i", l.re, l.im);
    }

    // ignoring the input folds the forcing into the state operator
    let blind = dmd(&pair, None)?;
    println!(
        "\ninput-blind one-step operator (distorted by the forcing):\n{:.4}",
        blind.operator()
    );
    Ok(())
}
