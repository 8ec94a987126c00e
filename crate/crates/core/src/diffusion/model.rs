//! The x0-predicting denoiser: channel embedding, sinusoidal step embedding,
//! self-attention mixing blocks over time positions, and decomposed output
//! heads (polynomial trend, Fourier seasonality, per-position residual).

use std::collections::HashMap;
use std::f64::consts::TAU;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::tape::{Tape, Tensor, Var};
use super::DiffusionError;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub channels: usize,
    /// Sequence length the seasonality head was sized for.
    pub seq_len: usize,
    pub width: usize,
    pub blocks: usize,
    pub heads: usize,
    pub poly_degree: usize,
    pub enable_trend: bool,
    pub enable_seasonal: bool,
    pub enable_residual: bool,
}

impl ModelConfig {
    /// Reference architecture: 4 attention blocks, 4 heads, width 96,
    /// degree-3 trend basis, floor(T/2) seasonal frequencies.
    pub fn reference(channels: usize, seq_len: usize) -> Self {
        Self {
            channels,
            seq_len,
            width: 96,
            blocks: 4,
            heads: 4,
            poly_degree: 3,
            enable_trend: true,
            enable_seasonal: true,
            enable_residual: true,
        }
    }

    pub fn frequencies(&self) -> usize {
        (self.seq_len / 2).max(1)
    }

    pub fn validate(&self) -> Result<(), DiffusionError> {
        if self.channels == 0 || self.seq_len < 2 || self.width == 0 || self.blocks == 0 {
            return Err(DiffusionError::InvalidConfig(
                "channels, width, blocks must be positive and seq_len >= 2".into(),
            ));
        }
        if self.heads == 0 || self.width % self.heads != 0 {
            return Err(DiffusionError::InvalidConfig(format!(
                "width {} must be divisible by heads {}",
                self.width, self.heads
            )));
        }
        if !(self.enable_trend || self.enable_seasonal || self.enable_residual) {
            return Err(DiffusionError::InvalidConfig("all output heads disabled".into()));
        }
        Ok(())
    }
}

/// Named parameter tensors in a fixed order (checkpoint layout order).
#[derive(Debug, Clone)]
pub struct DenoiserModel {
    pub cfg: ModelConfig,
    params: Vec<(String, Tensor)>,
    index: HashMap<String, usize>,
}

/// Decomposed forward output; `pred = trend + seasonal + residual`
/// (disabled components are zero).
pub struct ForwardOutput {
    pub pred: Var,
    pub trend: Var,
    pub seasonal: Var,
    pub residual: Var,
}

/// Plain-tensor prediction with retrievable components, rows = channels.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub pred: Tensor,
    pub trend: Tensor,
    pub seasonal: Tensor,
    pub residual: Tensor,
}

/// Anything that can estimate the clean signal from a noisy one; the sampler
/// only needs this surface.
pub trait Denoiser {
    fn channels(&self) -> usize;
    /// z is channels x T; returns the x0 estimate with the same shape.
    fn predict_x0(&self, z: &Tensor, k: usize, k_steps: usize) -> Tensor;
}

impl DenoiserModel {
    pub fn init(cfg: ModelConfig, seed: u64) -> Result<Self, DiffusionError> {
        cfg.validate()?;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut params: Vec<(String, Tensor)> = Vec::new();
        let w = cfg.width;
        let c = cfg.channels;

        let weight = |params: &mut Vec<(String, Tensor)>, name: String, rows: usize, cols: usize, rng: &mut ChaCha12Rng| {
            let scale = (2.0 / (rows + cols) as f64).sqrt();
            let data = (0..rows * cols).map(|_| scale * normal(rng)).collect();
            params.push((name, Tensor::from_vec(rows, cols, data)));
        };
        let zeros = |params: &mut Vec<(String, Tensor)>, name: String, rows: usize, cols: usize| {
            params.push((name, Tensor::zeros(rows, cols)));
        };
        let ones = |params: &mut Vec<(String, Tensor)>, name: String, cols: usize| {
            params.push((name, Tensor::from_vec(1, cols, vec![1.0; cols])));
        };

        weight(&mut params, "embed.w".into(), c, w, &mut rng);
        zeros(&mut params, "embed.b".into(), 1, w);
        for l in 0..cfg.blocks {
            weight(&mut params, format!("block{l}.step.w"), w, w, &mut rng);
            zeros(&mut params, format!("block{l}.step.b"), 1, w);
            ones(&mut params, format!("block{l}.ln1.g"), w);
            zeros(&mut params, format!("block{l}.ln1.b"), 1, w);
            weight(&mut params, format!("block{l}.attn.wq"), w, w, &mut rng);
            weight(&mut params, format!("block{l}.attn.wk"), w, w, &mut rng);
            weight(&mut params, format!("block{l}.attn.wv"), w, w, &mut rng);
            weight(&mut params, format!("block{l}.attn.wo"), w, w, &mut rng);
            ones(&mut params, format!("block{l}.ln2.g"), w);
            zeros(&mut params, format!("block{l}.ln2.b"), 1, w);
            weight(&mut params, format!("block{l}.ffn.w1"), w, 2 * w, &mut rng);
            zeros(&mut params, format!("block{l}.ffn.b1"), 1, 2 * w);
            weight(&mut params, format!("block{l}.ffn.w2"), 2 * w, w, &mut rng);
            zeros(&mut params, format!("block{l}.ffn.b2"), 1, w);
        }
        ones(&mut params, "final.ln.g".into(), w);
        zeros(&mut params, "final.ln.b".into(), 1, w);
        let p1 = cfg.poly_degree + 1;
        weight(&mut params, "trend.w".into(), w, p1 * c, &mut rng);
        zeros(&mut params, "trend.b".into(), 1, p1 * c);
        let f2 = 2 * cfg.frequencies();
        weight(&mut params, "seasonal.w".into(), w, f2 * c, &mut rng);
        zeros(&mut params, "seasonal.b".into(), 1, f2 * c);
        weight(&mut params, "out.w".into(), w, c, &mut rng);
        zeros(&mut params, "out.b".into(), 1, c);

        Ok(Self::from_params(cfg, params))
    }

    pub fn from_params(cfg: ModelConfig, params: Vec<(String, Tensor)>) -> Self {
        let index = params.iter().enumerate().map(|(i, (n, _))| (n.clone(), i)).collect();
        Self { cfg, params, index }
    }

    pub fn params(&self) -> &[(String, Tensor)] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [(String, Tensor)] {
        &mut self.params
    }

    pub fn param(&self, name: &str) -> &Tensor {
        &self.params[self.index[name]].1
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|(_, t)| t.len()).sum()
    }

    /// Pushes every parameter onto the tape, returning their vars in
    /// parameter order (gradient extraction uses the same order).
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.params.iter().map(|(_, t)| tape.input(t.clone())).collect()
    }

    fn var(&self, bound: &[Var], name: &str) -> Var {
        bound[self.index[name]]
    }

    /// Forward pass on the tape. `x` is T x channels (time rows); the
    /// diffusion step enters through a sinusoidal embedding added per block.
    pub fn forward(&self, tape: &mut Tape, bound: &[Var], x: Var, k: usize, t_len: usize) -> ForwardOutput {
        let cfg = &self.cfg;
        let w = cfg.width;
        let dh = w / cfg.heads;

        let step = tape.input(step_embedding(k, w));
        let embed_w = self.var(bound, "embed.w");
        let embed_b = self.var(bound, "embed.b");
        let mut h = tape.matmul(x, embed_w);
        h = tape.add_row(h, embed_b);

        for l in 0..cfg.blocks {
            let sw = self.var(bound, &format!("block{l}.step.w"));
            let sb = self.var(bound, &format!("block{l}.step.b"));
            let cond = tape.matmul(step, sw);
            let cond = tape.add_row(cond, sb);
            // cond is 1 x W; broadcast over time rows.
            h = tape.add_row(h, cond);

            let g1 = self.var(bound, &format!("block{l}.ln1.g"));
            let b1 = self.var(bound, &format!("block{l}.ln1.b"));
            let a = tape.layer_norm(h, g1, b1);
            let q = tape.matmul(a, self.var(bound, &format!("block{l}.attn.wq")));
            let key = tape.matmul(a, self.var(bound, &format!("block{l}.attn.wk")));
            let v = tape.matmul(a, self.var(bound, &format!("block{l}.attn.wv")));
            let mut heads = Vec::with_capacity(cfg.heads);
            for i in 0..cfg.heads {
                let (from, to) = (i * dh, (i + 1) * dh);
                let qi = tape.slice_cols(q, from, to);
                let ki = tape.slice_cols(key, from, to);
                let vi = tape.slice_cols(v, from, to);
                let kt = tape.transpose(ki);
                let s = tape.matmul(qi, kt);
                let s = tape.scale(s, 1.0 / (dh as f64).sqrt());
                let p = tape.softmax_rows(s);
                heads.push(tape.matmul(p, vi));
            }
            let cat = tape.concat_cols(&heads);
            let attn = tape.matmul(cat, self.var(bound, &format!("block{l}.attn.wo")));
            h = tape.add(h, attn);

            let g2 = self.var(bound, &format!("block{l}.ln2.g"));
            let b2 = self.var(bound, &format!("block{l}.ln2.b"));
            let a2 = tape.layer_norm(h, g2, b2);
            let f = tape.matmul(a2, self.var(bound, &format!("block{l}.ffn.w1")));
            let f = tape.add_row(f, self.var(bound, &format!("block{l}.ffn.b1")));
            let f = tape.gelu(f);
            let f = tape.matmul(f, self.var(bound, &format!("block{l}.ffn.w2")));
            let f = tape.add_row(f, self.var(bound, &format!("block{l}.ffn.b2")));
            h = tape.add(h, f);
        }

        let gf = self.var(bound, "final.ln.g");
        let bf = self.var(bound, "final.ln.b");
        let h = tape.layer_norm(h, gf, bf);
        let pooled = tape.mean_rows(h);

        let c = cfg.channels;
        let zero = tape.input(Tensor::zeros(t_len, c));

        let trend = if cfg.enable_trend {
            let coef = tape.matmul(pooled, self.var(bound, "trend.w"));
            let coef = tape.add_row(coef, self.var(bound, "trend.b"));
            let coef = tape.reshape(coef, cfg.poly_degree + 1, c);
            let basis = tape.input(poly_basis(t_len, cfg.poly_degree));
            tape.matmul(basis, coef)
        } else {
            zero
        };
        let seasonal = if cfg.enable_seasonal {
            let coef = tape.matmul(pooled, self.var(bound, "seasonal.w"));
            let coef = tape.add_row(coef, self.var(bound, "seasonal.b"));
            let coef = tape.reshape(coef, 2 * cfg.frequencies(), c);
            let basis = tape.input(fourier_basis(t_len, cfg.frequencies()));
            tape.matmul(basis, coef)
        } else {
            zero
        };
        let residual = if cfg.enable_residual {
            let r = tape.matmul(h, self.var(bound, "out.w"));
            tape.add_row(r, self.var(bound, "out.b"))
        } else {
            zero
        };

        let ts = tape.add(trend, seasonal);
        let pred = tape.add(ts, residual);
        ForwardOutput { pred, trend, seasonal, residual }
    }

    /// Deterministic prediction with retrievable decomposition components.
    /// `z` is channels x T.
    pub fn predict(&self, z: &Tensor, k: usize) -> Result<Prediction, DiffusionError> {
        if z.rows != self.cfg.channels {
            return Err(DiffusionError::ShapeMismatch {
                expected: (self.cfg.channels, z.cols),
                got: z.shape(),
            });
        }
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let x = tape.input(z.transpose());
        let out = self.forward(&mut tape, &bound, x, k, z.cols);
        Ok(Prediction {
            pred: tape.value(out.pred).transpose(),
            trend: tape.value(out.trend).transpose(),
            seasonal: tape.value(out.seasonal).transpose(),
            residual: tape.value(out.residual).transpose(),
        })
    }
}

impl Denoiser for DenoiserModel {
    fn channels(&self) -> usize {
        self.cfg.channels
    }

    fn predict_x0(&self, z: &Tensor, k: usize, _k_steps: usize) -> Tensor {
        self.predict(z, k).expect("channel count checked by sampler").pred
    }
}

fn normal(rng: &mut ChaCha12Rng) -> f64 {
    rng.sample::<f64, _>(rand_distr::StandardNormal)
}

/// Sinusoidal embedding of the diffusion step index.
pub fn step_embedding(k: usize, width: usize) -> Tensor {
    let mut e = Tensor::zeros(1, width);
    let half = width / 2;
    for i in 0..half {
        let freq = (10_000f64).powf(-(i as f64) / half as f64);
        e.data[2 * i] = (k as f64 * freq).sin();
        e.data[2 * i + 1] = (k as f64 * freq).cos();
    }
    e
}

/// T x (degree+1) powers of the normalized frame index.
pub fn poly_basis(t_len: usize, degree: usize) -> Tensor {
    let mut b = Tensor::zeros(t_len, degree + 1);
    for t in 0..t_len {
        let u = if t_len > 1 { t as f64 / (t_len - 1) as f64 } else { 0.0 };
        let mut p = 1.0;
        for d in 0..=degree {
            b.set(t, d, p);
            p *= u;
        }
    }
    b
}

/// T x 2F window-relative Fourier basis: cos/sin at f = 1..=F cycles.
pub fn fourier_basis(t_len: usize, frequencies: usize) -> Tensor {
    let mut b = Tensor::zeros(t_len, 2 * frequencies);
    for t in 0..t_len {
        for f in 1..=frequencies {
            let angle = TAU * f as f64 * t as f64 / t_len as f64;
            b.set(t, 2 * (f - 1), angle.cos());
            b.set(t, 2 * (f - 1) + 1, angle.sin());
        }
    }
    b
}
