//! One-hidden-layer ReLU perceptron regressor trained with full-batch L-BFGS
//! on squared error plus a small L2 penalty.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{self, LbfgsConfig};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerceptronConfig {
    pub hidden: usize,
    /// L2 penalty, scaled by 1/(2n) like the usual squared-error objective.
    pub l2: f64,
    pub restarts: usize,
    pub lbfgs: LbfgsConfig,
}

impl Default for PerceptronConfig {
    fn default() -> Self {
        PerceptronConfig {
            hidden: 50,
            l2: 1e-4,
            restarts: 3,
            lbfgs: LbfgsConfig::default(),
        }
    }
}

/// Per-column standardization applied before the network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Standardizer {
        let n = x.len().max(1) as f64;
        let p = x.first().map_or(0, Vec::len);
        let mean: Vec<f64> = (0..p).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let scale = (0..p)
            .map(|j| {
                let var = x.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
                if var > 1e-24 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn apply(&self, row: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = (row[j] - self.mean[j]) / self.scale[j];
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Perceptron {
    pub inputs: usize,
    pub hidden: usize,
    /// hidden × inputs, row-major
    pub hidden_weights: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    pub output_weights: Vec<f64>,
    pub output_bias: f64,
}

impl Perceptron {
    fn from_flat(inputs: usize, hidden: usize, theta: &[f64]) -> Perceptron {
        let (w1, rest) = theta.split_at(hidden * inputs);
        let (b1, rest) = rest.split_at(hidden);
        let (w2, rest) = rest.split_at(hidden);
        Perceptron {
            inputs,
            hidden,
            hidden_weights: w1.to_vec(),
            hidden_bias: b1.to_vec(),
            output_weights: w2.to_vec(),
            output_bias: rest[0],
        }
    }

    pub fn param_count(inputs: usize, hidden: usize) -> usize {
        hidden * inputs + 2 * hidden + 1
    }

    /// `x` is already standardized.
    pub fn forward(&self, x: &[f64]) -> f64 {
        let mut out = self.output_bias;
        for h in 0..self.hidden {
            let row = &self.hidden_weights[h * self.inputs..(h + 1) * self.inputs];
            let z = self.hidden_bias[h] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            if z > 0.0 {
                out += self.output_weights[h] * z;
            }
        }
        out
    }

    /// Absorbs the standardization into the first layer so the network takes
    /// raw feature values.
    pub fn fold(&self, st: &Standardizer) -> Perceptron {
        let mut out = self.clone();
        for h in 0..self.hidden {
            let row = &mut out.hidden_weights[h * self.inputs..(h + 1) * self.inputs];
            let mut shift = 0.0;
            for (j, w) in row.iter_mut().enumerate() {
                *w /= st.scale[j];
                shift += *w * st.mean[j];
            }
            out.hidden_bias[h] -= shift;
        }
        out
    }

    pub fn check_shape(&self) -> Result<()> {
        let ok = self.hidden_weights.len() == self.hidden * self.inputs
            && self.hidden_bias.len() == self.hidden
            && self.output_weights.len() == self.hidden;
        if ok {
            Ok(())
        } else {
            Err(Error::Config("perceptron parameter shapes do not match its layer sizes".into()))
        }
    }
}

/// Objective and gradient over standardized rows.
fn objective(theta: &[f64], grad: &mut [f64], x: &[Vec<f64>], y: &[f64], inputs: usize, hidden: usize, l2: f64) -> f64 {
    let n = x.len() as f64;
    let (w1, rest) = theta.split_at(hidden * inputs);
    let (b1, rest) = rest.split_at(hidden);
    let (w2, rest) = rest.split_at(hidden);
    let b2 = rest[0];
    grad.iter_mut().for_each(|g| *g = 0.0);
    let (gw1, grest) = grad.split_at_mut(hidden * inputs);
    let (gb1, grest) = grest.split_at_mut(hidden);
    let (gw2, gb2) = grest.split_at_mut(hidden);

    let mut z = vec![0.0; hidden];
    let mut loss = 0.0;
    for (row, &target) in x.iter().zip(y) {
        let mut pred = b2;
        for h in 0..hidden {
            let w = &w1[h * inputs..(h + 1) * inputs];
            z[h] = b1[h] + w.iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
            if z[h] > 0.0 {
                pred += w2[h] * z[h];
            }
        }
        let err = pred - target;
        loss += err * err;
        let e = err / n;
        gb2[0] += e;
        for h in 0..hidden {
            if z[h] > 0.0 {
                gw2[h] += e * z[h];
                let dz = e * w2[h];
                gb1[h] += dz;
                for (g, v) in gw1[h * inputs..(h + 1) * inputs].iter_mut().zip(row) {
                    *g += dz * v;
                }
            }
        }
    }
    let mut penalty = 0.0;
    for (g, w) in gw1.iter_mut().zip(w1) {
        penalty += w * w;
        *g += l2 * w / n;
    }
    for (g, w) in gw2.iter_mut().zip(w2) {
        penalty += w * w;
        *g += l2 * w / n;
    }
    0.5 * loss / n + 0.5 * l2 * penalty / n
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerceptronFit {
    pub network: Perceptron,
    pub standardizer: Standardizer,
    /// Mean squared error on the training rows.
    pub train_mse: f64,
    pub converged: bool,
}

impl PerceptronFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut buf = vec![0.0; x.len()];
        self.standardizer.apply(x, &mut buf);
        self.network.forward(&buf)
    }
}

fn init_params<R: Rng>(inputs: usize, hidden: usize, rng: &mut R) -> Vec<f64> {
    let b1 = (6.0 / (inputs + hidden) as f64).sqrt();
    let b2 = (6.0 / (hidden + 1) as f64).sqrt();
    let mut theta = Vec::with_capacity(Perceptron::param_count(inputs, hidden));
    for _ in 0..hidden * inputs + hidden {
        theta.push(rng.random_range(-b1..b1));
    }
    for _ in 0..hidden + 1 {
        theta.push(rng.random_range(-b2..b2));
    }
    theta
}

/// Trains `cfg.restarts` networks from seeds derived from `seed` and keeps
/// the one with the lowest training objective.
pub fn fit_perceptron(x: &[Vec<f64>], y: &[f64], seed: u64, cfg: &PerceptronConfig) -> Result<PerceptronFit> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::InsufficientData(format!("{} rows for {} targets", x.len(), y.len())));
    }
    let inputs = x[0].len();
    let hidden = cfg.hidden;
    let standardizer = Standardizer::fit(x);
    let xs: Vec<Vec<f64>> = x
        .iter()
        .map(|r| {
            let mut o = vec![0.0; inputs];
            standardizer.apply(r, &mut o);
            o
        })
        .collect();

    let mut best: Option<(f64, optim::LbfgsOutcome)> = None;
    for restart in 0..cfg.restarts.max(1) {
        let mut rng = seed::rng(seed::derive(seed, "perceptron-init", restart as u64));
        let theta0 = init_params(inputs, hidden, &mut rng);
        let out = optim::minimize(
            |theta, grad| objective(theta, grad, &xs, y, inputs, hidden, cfg.l2),
            theta0,
            &cfg.lbfgs,
        );
        if best.as_ref().is_none_or(|(v, _)| out.value < *v) {
            best = Some((out.value, out));
        }
    }
    let (_, out) = best.expect("at least one restart");
    if !out.converged {
        log::debug!(
            "perceptron did not converge in {} iterations (gradient {:.2e}); keeping the best iterate",
            out.iterations,
            out.grad_norm
        );
    }
    let network = Perceptron::from_flat(inputs, hidden, &out.x);
    let train_mse = xs
        .iter()
        .zip(y)
        .map(|(r, t)| (network.forward(r) - t).powi(2))
        .sum::<f64>()
        / y.len() as f64;
    Ok(PerceptronFit {
        network,
        standardizer,
        train_mse,
        converged: out.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_matches_finite_differences() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()]).collect();
        let y: Vec<f64> = (0..8).map(|i| i as f64 * 0.3).collect();
        let (inputs, hidden) = (2, 4);
        let theta = init_params(inputs, hidden, &mut seed::rng(9));
        let mut g = vec![0.0; theta.len()];
        objective(&theta, &mut g, &x, &y, inputs, hidden, 0.1);
        let h = 1e-6;
        let mut scratch = vec![0.0; theta.len()];
        for i in 0..theta.len() {
            let mut tp = theta.clone();
            tp[i] += h;
            let fp = objective(&tp, &mut scratch, &x, &y, inputs, hidden, 0.1);
            tp[i] -= 2.0 * h;
            let fm = objective(&tp, &mut scratch, &x, &y, inputs, hidden, 0.1);
            let fd = (fp - fm) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6, "param {i}: fd {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn fits_a_nonlinear_target() {
        let x: Vec<Vec<f64>> = (0..60).map(|i| vec![i as f64 / 10.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| (r[0] - 3.0).abs()).collect();
        let fit = fit_perceptron(&x, &y, 1, &PerceptronConfig::default()).unwrap();
        assert!(fit.train_mse < 1e-3, "{}", fit.train_mse);
    }

    #[test]
    fn folded_network_matches_standardized_one() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![50.0 + i as f64, (i % 2) as f64, 3.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| 0.1 * r[0] - r[1]).collect();
        let fit = fit_perceptron(&x, &y, 2, &PerceptronConfig { restarts: 1, ..Default::default() }).unwrap();
        let folded = fit.network.fold(&fit.standardizer);
        for r in &x {
            assert!((folded.forward(r) - fit.predict(r)).abs() < 1e-9);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let y: Vec<f64> = (0..20).map(|i| (i % 4) as f64).collect();
        let cfg = PerceptronConfig {
            restarts: 1,
            ..PerceptronConfig::default()
        };
        let a = fit_perceptron(&x, &y, 5, &cfg).unwrap();
        let b = fit_perceptron(&x, &y, 5, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
