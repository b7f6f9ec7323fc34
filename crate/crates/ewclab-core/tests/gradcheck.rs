//! Finite-difference oracle for the backward pass.
//!
//! For a hundred seed-enumerated small networks and all three scalar
//! objectives, the analytic gradient must match central finite
//! differences of the objective value within relative 1e-4.
//!
//! leakyReLU is not differentiable at zero, so a finite-difference probe
//! straddling a kink measures a slope mixture rather than the one-sided
//! derivative the analytic gradient is defined to be. Candidate networks
//! whose hidden pre-activations come within 1e-3 of zero (two orders of
//! magnitude above any probe-induced shift) are therefore skipped and
//! regenerated from the next derived seed; the enumeration stays fully
//! deterministic.

use ewclab_core::rng::{derive_seed, Xoshiro256StarStar};
use ewclab_core::{forward, DenseMatrix, NetworkParams, Objective};

const FD_H: f64 = 1e-5;
const REL_TOL: f64 = 1e-4;
const KINK_MARGIN: f64 = 1e-3;

fn objective_at(params: &NetworkParams, batch: &DenseMatrix, objective: &Objective) -> f64 {
    let trace = forward(params, batch).unwrap();
    ewclab_core::nn::objective_value(&trace, objective).unwrap()
}

/// Central finite differences over every weight and bias.
fn fd_gradient(params: &NetworkParams, batch: &DenseMatrix, objective: &Objective) -> NetworkParams {
    let mut grad = params.zeros_like();
    for l in 0..params.layer_count() {
        let (rows, cols) = params.layers()[l].weights.shape();
        for r in 0..rows {
            for c in 0..cols {
                let mut plus = params.clone();
                plus.layers_mut()[l].weights[(r, c)] += FD_H;
                let mut minus = params.clone();
                minus.layers_mut()[l].weights[(r, c)] -= FD_H;
                grad.layers_mut()[l].weights[(r, c)] = (objective_at(&plus, batch, objective)
                    - objective_at(&minus, batch, objective))
                    / (2.0 * FD_H);
            }
        }
        for b in 0..params.layers()[l].bias.len() {
            let mut plus = params.clone();
            plus.layers_mut()[l].bias[b] += FD_H;
            let mut minus = params.clone();
            minus.layers_mut()[l].bias[b] -= FD_H;
            grad.layers_mut()[l].bias[b] = (objective_at(&plus, batch, objective)
                - objective_at(&minus, batch, objective))
                / (2.0 * FD_H);
        }
    }
    grad
}

fn max_rel_error(analytic: &NetworkParams, numeric: &NetworkParams) -> f64 {
    analytic
        .param_iter()
        .zip(numeric.param_iter())
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

/// Network + batch from one seed, regenerated until every hidden
/// pre-activation clears the kink margin.
fn sample_case(case_seed: u64, arch: &[usize], batch_rows: usize) -> (NetworkParams, DenseMatrix, Vec<u8>) {
    let mut attempt = 0u64;
    loop {
        let seed = derive_seed(case_seed, 0x4744_4348, attempt, 0); // "GDCH"
        let params = NetworkParams::init(arch, seed).unwrap();
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed ^ 0xFFFF);
        let width = arch[0];
        let batch = DenseMatrix::from_vec(
            batch_rows,
            width,
            (0..batch_rows * width).map(|_| rng.uniform_in(-1.0, 1.0)).collect(),
        )
        .unwrap();
        let classes = *arch.last().unwrap() as u64;
        let labels: Vec<u8> = (0..batch_rows).map(|_| rng.next_below(classes) as u8).collect();

        let trace = forward(&params, &batch).unwrap();
        let hidden_layers = arch.len() - 2;
        let clear = (0..hidden_layers).all(|l| {
            trace.pre(l).data().iter().all(|z| z.abs() > KINK_MARGIN)
        });
        if clear {
            return (params, batch, labels);
        }
        attempt += 1;
    }
}

#[test]
fn analytic_gradients_match_finite_differences_on_100_networks() {
    let architectures: [&[usize]; 5] =
        [&[4, 3, 2], &[5, 8, 3], &[3, 4, 4, 2], &[6, 2], &[2, 7, 5, 3]];
    let mut worst = 0.0f64;
    for case in 0..100u64 {
        let arch = architectures[case as usize % architectures.len()];
        let (params, batch, labels) = sample_case(case, arch, 4);
        let trace = forward(&params, &batch).unwrap();
        for objective in [
            Objective::CrossEntropy { labels: &labels },
            Objective::LogLabeledProb { labels: &labels },
            Objective::SquaredOutputNorm,
        ] {
            let analytic = ewclab_core::backward(&params, &trace, &objective).unwrap();
            let numeric = fd_gradient(&params, &batch, &objective);
            let rel = max_rel_error(&analytic, &numeric);
            assert!(
                rel < REL_TOL,
                "case {case} arch {arch:?} objective {objective:?}: max rel error {rel}"
            );
            worst = worst.max(rel);
        }
    }
    println!("gradient suite worst relative error: {worst:.3e}");
}

#[test]
fn cross_entropy_gradient_at_stationary_point_is_tiny() {
    // A saturated network sits at a (numerical) stationary point of the
    // labeled log-likelihood: the gradient norm collapses.
    let mut params = NetworkParams::zeros(&[2, 2]).unwrap();
    params.layers_mut()[0].weights[(0, 0)] = 800.0;
    params.layers_mut()[0].weights[(0, 1)] = -800.0;
    let batch = DenseMatrix::from_vec(1, 2, vec![1.0, 0.0]).unwrap();
    let labels = [0u8];
    let trace = forward(&params, &batch).unwrap();
    let grad = ewclab_core::backward(&params, &trace, &Objective::CrossEntropy { labels: &labels })
        .unwrap();
    let norm = grad.param_iter().map(|g| g * g).sum::<f64>().sqrt();
    assert!(norm < 1e-8, "gradient norm {norm}");
}
