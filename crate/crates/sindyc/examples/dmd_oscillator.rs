//! Decompose a damped oscillation into modes and eigenvalues, then predict
//! forward from the identified spectrum.

use ndarray::{array, Array1, Array2};
use sindyc::*;

fn main() -> Result<()> {
    // planted one-step operator: rotation by 0.1 rad with 1% decay per step
    let theta = 0.1_f64;
    let decay = 0.99_f64;
    let a = array![
        [decay * theta.cos(), -decay * theta.sin()],
        [decay * theta.sin(), decay * theta.cos()]
    ];

    let samples = 120;
    let mut states = Array2::zeros((2, samples));
    let mut x = array![1.0, 0.3];
    for k in 0..samples {
        states.column_mut(k).assign(&x);
        x = a.dot(&x);
    }
    let times = Array1::from_iter((0..samples).map(|k| k as f64));
    let series = TimeSeries::new(times, states, None)?;

    let result = dmd(&to_snapshot_pair(&series), None)?;
    println!("retained rank: {}", result.rank);
    println!("eigenvalues (planted: {decay} * exp(+-{theta}i)):");
    for l in result.eigenvalues.iter() {
        println!("  {:+.6} {:+.6}i  |lambda| = {:.6}", l.re, l.im, l.norm());
    }

    let x0 = array![1.0, 0.3];
    let prediction = dmd_predict(&result, x0.view(), 20)?;
    println!("\n20-step prediction vs direct iteration:");
    let mut direct = x0.clone();
    for _ in 0..20 {
        direct = a.dot(&direct);
    }
    println!(
        "  predicted ({:+.6}, {:+.6}), direct ({:+.6}, {:+.6})",
        prediction[(0, 20)],
        prediction[(1, 20)],
        direct[0],
        direct[1]
    );
    Ok(())
}
