//! Choose the sparsity threshold by sweeping it against held-out error.
//!
//! On noisy data the threshold trades active-term count against fit
//! quality. The sweep records both on a log grid, refines around the best
//! point, and selects the sparsest model whose validation error is within
//! 5% of the minimum.

use ndarray::{Array2, Axis};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use sindyc::*;

fn main() -> Result<()> {
    let p = LotkaVolterraParams::default();
    let forcing = Signal::SumOfSinusoids {
        offset: 0.0,
        components: vec![(2.0, 1.0), (2.0, 0.1)],
    };
    let series = rk4_integrate(
        |x, u, _t| lotka_volterra_rhs(x, u, &p),
        &[60.0, 50.0],
        Some(&forcing),
        50.0,
        0.001,
    )?;

    // derivatives from slightly noisy states, the realistic setting
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noisy_states = series
        .states()
        .mapv(|v| v + 0.01 * rng.sample::<f64, _>(rand_distr::StandardNormal));
    let noisy = TimeSeries::new(
        series.times().clone(),
        noisy_states,
        series.inputs().cloned(),
    )?;
    let derivatives = differentiate(&noisy, &DiffMethod::Central)?;

    let library = LibrarySpec::polynomial(2, 1, 2)?;
    let len = noisy.len();
    let xdot = derivatives.values.slice(ndarray::s![.., 1..len - 1]);
    let states = noisy.states().slice(ndarray::s![.., 1..len - 1]);
    let inputs = noisy.inputs().map(|u| u.slice(ndarray::s![.., 1..len - 1]));
    let theta: Array2<f64> = library.evaluate(states, inputs)?.values;

    // hold out the final 20% of columns for validation
    let split = (theta.ncols() as f64 * 0.8) as usize;
    let (theta_train, theta_val) = theta.view().split_at(Axis(1), split);
    let (xdot_train, xdot_val) = xdot.split_at(Axis(1), split);

    let alphas = log_spaced(1e-2, 1e4, 13);
    let curve = pareto_sweep(
        theta_train,
        xdot_train,
        &alphas,
        SweepSolver::Stlsq { max_rounds: 10 },
        (theta_val, xdot_val),
    )?;

    println!("threshold      terms  train rms    validation rms");
    for (i, pt) in curve.points.iter().enumerate() {
        let marker = if i == curve.selected {
            "  <-- selected"
        } else {
            ""
        };
        println!(
            "{:>12.4e}  {:>5}  {:>10.4e}  {:>10.4e}{marker}",
            pt.alpha, pt.nnz, pt.train_error, pt.validation_error
        );
    }
    let sel = curve.selected_point();
    println!(
        "\nselected threshold {:.4e}: {} active terms (true model has 5)",
        sel.alpha, sel.nnz
    );
    Ok(())
}
