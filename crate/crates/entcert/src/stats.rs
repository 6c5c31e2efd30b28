//! Statistical harness: bootstrap standard errors and least-squares fits.

use crate::error::{Error, Result};
use crate::util::{par_map_indexed, stream_rng};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

/// Bootstrap resampling plan. Position and momentum shot sets are resampled
/// independently, whole shots at a time.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct BootstrapPlan {
    /// Number of replicas.
    pub replicas: usize,
    /// Base seed; replica `r` uses stream `r`.
    pub seed: u64,
}

impl Default for BootstrapPlan {
    fn default() -> Self {
        BootstrapPlan { replicas: 10_000, seed: 0 }
    }
}

/// Multinomial draw of `n` items over `weights` (unnormalized), via the
/// conditional-binomial chain.
pub fn multinomial(rng: &mut impl Rng, n: u64, weights: &[f64]) -> Vec<u64> {
    let mut out = vec![0u64; weights.len()];
    let mut remaining = n;
    let mut wsum: f64 = weights.iter().sum();
    for (i, &w) in weights.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if w >= wsum || i == weights.len() - 1 {
            out[i] = remaining;
            break;
        }
        if w <= 0.0 {
            continue;
        }
        let draw = Binomial::new(remaining, (w / wsum).min(1.0)).expect("valid binomial").sample(rng);
        out[i] = draw;
        remaining -= draw;
        wsum -= w;
    }
    out
}

/// Bootstrap standard error of a bound.
///
/// `counts` are position-shot configuration counts; `per_shot` holds each
/// momentum shot's (numerator, denominator) contribution to the coherence
/// ratio; `eval(probs, coherence)` assembles the bound from resampled
/// position probabilities and the resampled coherence term.
pub fn bootstrap_se<F>(
    counts: &[u64],
    per_shot: &[(Complex64, Complex64)],
    eval: F,
    plan: &BootstrapPlan,
) -> Result<f64>
where
    F: Fn(&[f64], f64) -> f64 + Sync + Send,
{
    if plan.replicas < 2 {
        return Err(Error::config("bootstrap needs at least two replicas"));
    }
    if per_shot.is_empty() && counts.iter().all(|&c| c == 0) {
        return Err(Error::data("no shots to resample"));
    }
    let n_pos: u64 = counts.iter().sum();
    let weights: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    // Canonical shot order, so the estimate is invariant under reordering
    // of the input shot set.
    let mut per_shot: Vec<(Complex64, Complex64)> = per_shot.to_vec();
    per_shot.sort_by(|a, b| {
        (a.0.re, a.0.im, a.1.re, a.1.im)
            .partial_cmp(&(b.0.re, b.0.im, b.1.re, b.1.im))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let per_shot = &per_shot;
    let n_mom = per_shot.len();
    let values = par_map_indexed(plan.replicas, |r| {
        let mut rng = stream_rng(plan.seed, r as u64);
        let probs: Vec<f64> = if n_pos > 0 {
            multinomial(&mut rng, n_pos, &weights).iter().map(|&c| c as f64 / n_pos as f64).collect()
        } else {
            vec![0.0; counts.len()]
        };
        let coherence = if n_mom > 0 {
            let mut num = Complex64::new(0.0, 0.0);
            let mut den = Complex64::new(0.0, 0.0);
            for _ in 0..n_mom {
                let idx = rng.gen_range(0..n_mom);
                num += per_shot[idx].0;
                den += per_shot[idx].1;
            }
            (num / den).re
        } else {
            0.0
        };
        eval(&probs, coherence)
    });
    let mean: f64 = values.iter().sum::<f64>() / values.len() as f64;
    let var: f64 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    Ok(var.sqrt())
}

/// Ordinary least-squares line fit: returns `(slope, intercept,
/// slope standard error, intercept standard error)`.
pub fn fit_linear(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::config("linear fit needs at least three (x, y) points"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::config("degenerate x values in linear fit"));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let dof = (xs.len() - 2).max(1) as f64;
    let s2: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>() / dof;
    let se_slope = (s2 / sxx).sqrt();
    let se_intercept = (s2 * (1.0 / n + mx * mx / sxx)).sqrt();
    Ok((slope, intercept, se_slope, se_intercept))
}

/// Power-law fit `y = a · x^b` via a log-log linear fit: returns
/// `(exponent b, prefactor a, exponent standard error)`.
pub fn fit_powerlaw(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.iter().chain(ys).any(|&v| v <= 0.0) {
        return Err(Error::config("power-law fit requires strictly positive data"));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let (slope, intercept, se_slope, _) = fit_linear(&lx, &ly)?;
    Ok((slope, intercept.exp(), se_slope))
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
