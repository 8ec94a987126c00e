//! Ancestral sampling: iteratively denoise pure Gaussian noise through the
//! reverse process using the x0-predicting model.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use super::model::Denoiser;
use super::schedule::DiffusionSchedule;
use super::tape::Tensor;
use super::DiffusionError;

/// Draws one normalized channels x t_len series. All noise flows from the
/// seed, so a fixed seed gives bit-identical output on one platform.
///
/// z_K ~ N(0, I); for k = K..1:
///   z_{k-1} = c0 * x0_hat + ck * z_k + sigma_k * eps   (eps = 0 at k = 1)
/// with (c0, ck) the posterior mean coefficients and sigma_k^2 the posterior
/// variance of the schedule.
pub fn sample(
    model: &dyn Denoiser,
    sched: &DiffusionSchedule,
    t_len: usize,
    channels: usize,
    seed: u64,
) -> Result<Tensor, DiffusionError> {
    if channels != model.channels() {
        return Err(DiffusionError::ShapeMismatch {
            expected: (model.channels(), t_len),
            got: (channels, t_len),
        });
    }
    let k_steps = sched.len();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut normal = |n: usize| -> Vec<f64> {
        (0..n).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect()
    };
    let mut z = Tensor::from_vec(channels, t_len, normal(channels * t_len));

    for k in (1..=k_steps).rev() {
        let x0 = model.predict_x0(&z, k, k_steps);
        debug_assert_eq!(x0.shape(), z.shape());
        let (c0, ck) = sched.posterior_mean_coeffs(k);
        let sigma = sched.posterior_variance(k).max(0.0).sqrt();
        let eps = if k > 1 { normal(channels * t_len) } else { vec![0.0; channels * t_len] };
        for i in 0..z.data.len() {
            z.data[i] = c0 * x0.data[i] + ck * z.data[i] + sigma * eps[i];
        }
    }
    Ok(z)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Draws `count` independent series in parallel with per-series derived
/// seeds; output order is deterministic.
pub fn sample_many(
    model: &(dyn Denoiser + Sync),
    sched: &DiffusionSchedule,
    t_len: usize,
    channels: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<Tensor>, DiffusionError> {
    (0..count)
        .into_par_iter()
        .map(|i| sample(model, sched, t_len, channels, splitmix64(seed ^ (i as u64))))
        .collect()
}
