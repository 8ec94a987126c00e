//! Cosine noise schedule and the forward noising step.

use std::f64::consts::FRAC_PI_2;

use super::tape::Tensor;
use super::DiffusionError;

/// K-step schedule holding alpha_bar_0..alpha_bar_K with alpha_bar_0 = 1.
/// Per-step alpha_k = alpha_bar_k / alpha_bar_{k-1} and beta_k = 1 - alpha_k
/// are derived, so the product identity holds to machine precision.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule {
    alpha_bar: Vec<f64>,
}

/// Offset of the squared-cosine profile.
pub const COSINE_OFFSET: f64 = 0.008;
/// Per-step beta values are clipped to this ceiling near the end of the
/// schedule, keeping every alpha_bar strictly positive.
pub const BETA_MAX: f64 = 0.999;

/// alpha_bar_k = f(k)/f(0) with f(k) = cos^2(((k/K + s)/(1 + s)) * pi/2),
/// s = 0.008, betas clipped to 0.999.
pub fn cosine_schedule(k_steps: usize) -> DiffusionSchedule {
    assert!(k_steps >= 2, "schedule needs at least 2 steps");
    let f = |k: f64| -> f64 {
        let angle = ((k / k_steps as f64 + COSINE_OFFSET) / (1.0 + COSINE_OFFSET)) * FRAC_PI_2;
        angle.cos().powi(2)
    };
    let f0 = f(0.0);
    let mut alpha_bar = Vec::with_capacity(k_steps + 1);
    alpha_bar.push(1.0);
    for k in 1..=k_steps {
        let raw = f(k as f64) / f0;
        let beta = (1.0 - raw / alpha_bar[k - 1]).min(BETA_MAX);
        alpha_bar.push(alpha_bar[k - 1] * (1.0 - beta));
    }
    DiffusionSchedule { alpha_bar }
}

impl DiffusionSchedule {
    pub fn len(&self) -> usize {
        self.alpha_bar.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// alpha_bar_k for k in 0..=K.
    pub fn alpha_bar(&self, k: usize) -> f64 {
        self.alpha_bar[k]
    }

    /// Per-step alpha_k = alpha_bar_k / alpha_bar_{k-1}, k in 1..=K.
    pub fn alpha(&self, k: usize) -> f64 {
        self.alpha_bar[k] / self.alpha_bar[k - 1]
    }

    pub fn beta(&self, k: usize) -> f64 {
        1.0 - self.alpha(k)
    }

    /// Posterior mean coefficients (c0, ck) of
    /// mu = c0 * x0_hat + ck * z_k for the reverse step k -> k-1.
    pub fn posterior_mean_coeffs(&self, k: usize) -> (f64, f64) {
        let ab_prev = self.alpha_bar(k - 1);
        let ab = self.alpha_bar(k);
        let beta = self.beta(k);
        let denom = 1.0 - ab;
        (ab_prev.sqrt() * beta / denom, self.alpha(k).sqrt() * (1.0 - ab_prev) / denom)
    }

    /// Posterior variance beta_tilde_k = (1 - alpha_bar_{k-1}) / (1 - alpha_bar_k) * beta_k.
    pub fn posterior_variance(&self, k: usize) -> f64 {
        (1.0 - self.alpha_bar(k - 1)) / (1.0 - self.alpha_bar(k)) * self.beta(k)
    }
}

/// Eq-style forward noising: z_k = sqrt(alpha_bar_k) z0 + sqrt(1 - alpha_bar_k) eps.
/// Noise is injected by the caller, keeping the function pure.
pub fn forward_noise(
    z0: &Tensor,
    k: usize,
    eps: &Tensor,
    sched: &DiffusionSchedule,
) -> Result<Tensor, DiffusionError> {
    if z0.shape() != eps.shape() {
        return Err(DiffusionError::ShapeMismatch {
            expected: z0.shape(),
            got: eps.shape(),
        });
    }
    let ab = sched.alpha_bar(k);
    let (ca, ce) = (ab.sqrt(), (1.0 - ab).sqrt());
    let data = z0
        .data
        .iter()
        .zip(&eps.data)
        .map(|(z, e)| ca * z + ce * e)
        .collect();
    Ok(Tensor::from_vec(z0.rows, z0.cols, data))
}
