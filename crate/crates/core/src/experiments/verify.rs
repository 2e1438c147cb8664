//! Self-check suites run by `vqe-robust verify`.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ansatz::{apply, build_locally_surjective, local_surjectivity_rank, su_dimension, Circuit, Layer, ProductLayer};
use crate::engine::{fd_gradient, gradient, train, OptimizerConfig};
use crate::equivalence::{
    first_order_observable, incoherent_to_observable, perturbation_level_for_depth, push_channel_to_last,
    pushed_coherent_apply,
};
use crate::error::Result;
use crate::experiments::problems::{make_closed_form, make_random_vqe};
use crate::noise::{bit_flip_prob_for_epsilon, noisy_apply, CoherentError, ControlErrorSpec, KrausChannel, NoiseModel};
use crate::operators::{max_abs_diff, HermitianOperator, random_hermitian, trace_product, DensityMatrix, QubitCount};
use crate::pauli::{Pauli, PauliString};

#[derive(Debug, Clone, Default)]
pub struct VerifyOptions {
    /// Builds a channel whose weights sum to 0.9; the channel check must fail.
    pub corrupt_channel: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {:<28} measured={:.3e} threshold={:.3e} {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.measured,
                c.threshold,
                c.detail
            )?;
        }
        Ok(())
    }
}

fn at_most(name: &'static str, measured: f64, threshold: f64, detail: String) -> CheckResult {
    CheckResult {
        name,
        passed: measured <= threshold,
        measured,
        threshold,
        detail,
    }
}

fn random_theta(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-PI..PI)).collect()
}

fn instances(rng: &mut ChaCha8Rng) -> Vec<(usize, usize, Circuit, Vec<f64>)> {
    (0..20)
        .map(|i| {
            let n = 1 + i % 2;
            let depth = 1 + (i / 2) % 3;
            let c = build_locally_surjective(n, depth).expect("small builder");
            let theta = random_theta(c.total_params(), rng);
            (n, depth, c, theta)
        })
        .collect()
}

fn coherent_exactness(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for (n, depth, c, theta) in instances(rng) {
        let q = QubitCount::new(n)?;
        let errors = (0..depth)
            .map(|j| CoherentError::new(j, random_hermitian(q, rng.random()), rng.random_range(-0.3..0.3)))
            .collect::<Result<Vec<_>>>()?;
        let model = errors.iter().cloned().fold(NoiseModel::new(), |m, e| m.with_coherent(e));
        let rho0 = DensityMatrix::zero_state(q);
        let a = noisy_apply(&c, &theta, &model, &rho0)?;
        let b = pushed_coherent_apply(&c, &theta, &errors, &rho0)?;
        worst = worst.max(max_abs_diff(a.matrix(), b.matrix()));
    }
    Ok(at_most("coherent_push_exactness", worst, 1e-10, "20 instances".into()))
}

fn channel_exactness(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for (n, depth, c, theta) in instances(rng) {
        let mut model = NoiseModel::new();
        for j in 0..depth {
            let p = rng.random_range(0.0..0.3);
            let ch = if j % 2 == 0 {
                KrausChannel::bit_flip(n, p, &(0..n).collect::<Vec<_>>())?
            } else {
                KrausChannel::depolarizing(n, p)?
            };
            model = model.with_channel(j, ch)?;
        }
        let rho0 = DensityMatrix::zero_state(QubitCount::new(n)?);
        let a = noisy_apply(&c, &theta, &model, &rho0)?;
        let b = push_channel_to_last(&c, &theta, &model)?.apply(&apply(&c, &theta, &rho0)?)?;
        worst = worst.max(max_abs_diff(a.matrix(), b.matrix()));
    }
    Ok(at_most("channel_push_exactness", worst, 1e-10, "20 instances".into()))
}

fn incoherent_exactness(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let c = build_locally_surjective(2, 2)?;
    let q = c.qubits();
    let o = random_hermitian(q, 17);
    let rho0 = DensityMatrix::zero_state(q);
    let mut worst = 0.0f64;
    for p in [0.05, 0.3] {
        let ch = KrausChannel::bit_flip(2, p, &[0, 1])?;
        let obs = incoherent_to_observable(&o, &ch)?;
        let model = NoiseModel::new().with_channel(1, ch)?;
        for _ in 0..20 {
            let theta = random_theta(c.total_params(), rng);
            let noisy = trace_product(o.matrix(), noisy_apply(&c, &theta, &model, &rho0)?.matrix()).re;
            worst = worst.max((noisy - obs.cost(&c, &theta, &rho0)?).abs());
        }
    }
    Ok(at_most("output_channel_observable", worst, 1e-10, "p in {0.05, 0.3}".into()))
}

/// Random Hermitian rescaled to spectral norm 1, so that the angle alone
/// sets the size of a coherent error.
pub fn unit_hermitian(q: QubitCount, seed: u64) -> HermitianOperator {
    let h = random_hermitian(q, seed);
    let norm = h.spectral_norm();
    h.scaled(1.0 / norm)
}

fn first_order_ratios(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut ratios = Vec::new();
    let mut degenerate = 0;
    for i in 0..20 {
        let n = 1 + i % 2;
        let q = QubitCount::new(n)?;
        let c = build_locally_surjective(n, 2)?;
        let theta = random_theta(c.total_params(), rng);
        let o = random_hermitian(q, rng.random());
        let rho0 = DensityMatrix::zero_state(q);
        let gens = [unit_hermitian(q, rng.random()), unit_hermitian(q, rng.random())];
        let residual = |eta: f64| -> Result<f64> {
            let errors = (0..2)
                .map(|j| CoherentError::new(j, gens[j].clone(), eta * (1.0 - 0.5 * j as f64)))
                .collect::<Result<Vec<_>>>()?;
            let model = errors.iter().cloned().fold(NoiseModel::new(), |m, e| m.with_coherent(e));
            let exact = trace_product(o.matrix(), noisy_apply(&c, &theta, &model, &rho0)?.matrix()).re;
            let approx = first_order_observable(&o, &c, &errors)?.cost(&c, &theta, &rho0)?;
            Ok((exact - approx).abs())
        };
        for eta in [1e-2, 1e-3] {
            let big = residual(eta)?;
            if big <= 1e-12 {
                degenerate += 1;
                continue;
            }
            ratios.push(big / residual(eta / 2.0)?);
        }
    }
    let worst = ratios.iter().map(|r| (r - 4.0).abs()).fold(0.0, f64::max);
    let (lo, hi) = ratios
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(*r), b.max(*r)));
    Ok(at_most(
        "first_order_residual_ratio",
        worst,
        0.5,
        format!("|ratio - 4|; ratios in [{lo:.3}, {hi:.3}], {degenerate} degenerate"),
    ))
}

fn gradient_agreement(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let n = 1 + (seed as usize % 2);
        let mut problem = make_random_vqe(n, 2, seed)?;
        if seed % 2 == 1 {
            let q = QubitCount::new(n)?;
            problem = problem.with_noise(
                NoiseModel::new()
                    .with_coherent(CoherentError::new(0, random_hermitian(q, seed + 100), 0.05)?)
                    .with_channel(1, KrausChannel::depolarizing(n, 0.1)?)?,
            )?;
        }
        let theta = random_theta(problem.num_params(), rng);
        let a = gradient(&problem, &theta)?;
        let f = fd_gradient(&problem, &theta, 1e-5)?;
        for (x, y) in a.iter().zip(&f) {
            // relative error, with absolute 1e-9 accepted near zero
            worst = worst.max((x - y).abs() / x.abs().max(y.abs()).max(1e-3));
        }
    }
    Ok(at_most("gradient_vs_finite_difference", worst, 1e-6, "max relative error".into()))
}

fn depolarizing_proportionality(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let clean = make_random_vqe(2, 2, 21)?;
    let mut worst = 0.0f64;
    for p in [0.1, 0.3, 0.6] {
        let noisy = clean
            .clone()
            .with_noise(NoiseModel::new().with_channel(1, KrausChannel::depolarizing(2, p)?)?)?;
        for _ in 0..10 {
            let theta = random_theta(clean.num_params(), rng);
            let gc = gradient(&clean, &theta)?;
            let gn = gradient(&noisy, &theta)?;
            for (a, b) in gc.iter().zip(&gn) {
                worst = worst.max((b - (1.0 - p) * a).abs());
            }
        }
    }
    Ok(at_most("depolarizing_gradient_scale", worst, 1e-10, "p in {0.1, 0.3, 0.6}".into()))
}

fn control_law() -> Result<CheckResult> {
    let clean = make_closed_form()?;
    let config = OptimizerConfig {
        grad_tol: 1e-12,
        ..OptimizerConfig::new(0.5)
    };
    let mut worst = 0.0f64;
    for eta in [0.05, 0.1, 0.2] {
        let noisy = clean
            .clone()
            .with_noise(NoiseModel::new().with_control(ControlErrorSpec::new(vec![eta])?))?;
        let trace = train(&noisy, &[2.0], &config)?;
        worst = worst.max((trace.final_theta[0] - PI / (1.0 + eta)).abs());
    }
    Ok(at_most("control_error_optimum", worst, 1e-6, "eta in {0.05, 0.1, 0.2}".into()))
}

fn surjectivity(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut failures = 0usize;
    for n in 1..=2 {
        let c = build_locally_surjective(n, 1)?;
        for _ in 0..10 {
            let theta = random_theta(c.total_params(), rng);
            if local_surjectivity_rank(&c, &theta)? != su_dimension(c.dim()) {
                failures += 1;
            }
        }
    }
    let z = PauliString::single(1, 0, Pauli::Z, 1.0)?.to_operator();
    let zc = Circuit::new(
        QubitCount::new(1)?,
        vec![Layer::Product(ProductLayer::new(vec![z.clone()])?), Layer::Product(ProductLayer::new(vec![z])?)],
    )?;
    let z_rank = local_surjectivity_rank(&zc, &[0.4, 1.3])?;
    if z_rank != 1 {
        failures += 1;
    }
    Ok(at_most(
        "local_surjectivity_rank",
        failures as f64,
        0.0,
        format!("failed samples; Z-only rank {z_rank}"),
    ))
}

fn depth_scaling() -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for depth in 1..=30 {
        for i in 0..=50 {
            let p = 0.5 * i as f64 / 50.0;
            let eps = perturbation_level_for_depth(p, depth)?;
            worst = worst.max((bit_flip_prob_for_epsilon(eps, depth)? - p).abs());
        }
    }
    Ok(at_most("depth_scaling_inverse", worst, 1e-12, "p in [0, 0.5], L in [1, 30]".into()))
}

fn channel_validation(options: &VerifyOptions) -> CheckResult {
    let x = PauliString::single(1, 0, Pauli::X, 1.0).expect("qubit 0 exists").matrix();
    let weight = if options.corrupt_channel { 0.9 } else { 1.0 };
    let built = KrausChannel::mixture(0.1, vec![weight], vec![x]);
    CheckResult {
        name: "channel_validation",
        passed: built.is_ok(),
        measured: weight,
        threshold: 1.0,
        detail: match built {
            Ok(_) => "bit-flip channel weights sum to 1".into(),
            Err(e) => e.to_string(),
        },
    }
}

/// Runs every suite. Errors inside a suite are reported as failed checks.
pub fn verify_all(options: &VerifyOptions) -> VerifyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checks = vec![channel_validation(options)];
    type Suite = fn(&mut ChaCha8Rng) -> Result<CheckResult>;
    let suites: [(&'static str, Suite); 9] = [
        ("coherent_push_exactness", coherent_exactness),
        ("channel_push_exactness", channel_exactness),
        ("output_channel_observable", incoherent_exactness),
        ("first_order_residual_ratio", first_order_ratios),
        ("gradient_vs_finite_difference", gradient_agreement),
        ("depolarizing_gradient_scale", depolarizing_proportionality),
        ("control_error_optimum", |_| control_law()),
        ("local_surjectivity_rank", surjectivity),
        ("depth_scaling_inverse", |_| depth_scaling()),
    ];
    for (name, suite) in suites {
        checks.push(suite(&mut rng).unwrap_or_else(|e| CheckResult {
            name,
            passed: false,
            measured: f64::NAN,
            threshold: f64::NAN,
            detail: format!("error: {e}"),
        }));
    }
    VerifyReport { checks }
}
