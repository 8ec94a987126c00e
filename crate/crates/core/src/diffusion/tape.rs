//! Minimal reverse-mode autodiff over dense f64 matrices. A forward pass
//! pushes nodes onto a tape; `backward` walks it in reverse and accumulates
//! gradients. Only the ops the denoiser needs are implemented.

use matrixmultiply::dgemm;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "tensor data length mismatch");
        Self { rows, cols, data }
    }

    pub fn scalar(v: f64) -> Self {
        Self { rows: 1, cols: 1, data: vec![v] }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn transpose(&self) -> Tensor {
        let mut out = Tensor::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// self (m x k) * other (k x n).
    pub fn matmul(&self, other: &Tensor) -> Tensor {
        assert_eq!(self.cols, other.rows, "matmul inner dimension mismatch");
        let mut out = Tensor::zeros(self.rows, other.cols);
        unsafe {
            dgemm(
                self.rows,
                self.cols,
                other.cols,
                1.0,
                self.data.as_ptr(),
                self.cols as isize,
                1,
                other.data.as_ptr(),
                other.cols as isize,
                1,
                0.0,
                out.data.as_mut_ptr(),
                other.cols as isize,
                1,
            );
        }
        out
    }

    /// self + alpha * other, accumulated in place.
    pub fn axpy(&mut self, alpha: f64, other: &Tensor) {
        assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

#[derive(Debug, Clone)]
enum Op {
    Input,
    Add(usize, usize),
    Sub(usize, usize),
    Scale(usize, f64),
    /// Matrix plus a 1 x cols row vector broadcast over rows.
    AddRow(usize, usize),
    Matmul(usize, usize),
    Gelu(usize),
    SoftmaxRows(usize),
    LayerNorm { x: usize, gain: usize, bias: usize },
    MeanRows(usize),
    MeanAll(usize),
    Square(usize),
    SliceCols { x: usize, from: usize, to: usize },
    ConcatCols(Vec<usize>),
    Transpose(usize),
    Reshape(usize),
}

struct Node {
    op: Op,
    value: Tensor,
}

/// Wengert list; values are computed eagerly on push.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

const GELU_C: f64 = 0.7978845608028654; // sqrt(2/pi)
const GELU_A: f64 = 0.044715;

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    let t = u.tanh();
    let sech2 = 1.0 - t * t;
    0.5 * (1.0 + t) + 0.5 * x * sech2 * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(Op::Input, t)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut v = self.nodes[a.0].value.clone();
        v.axpy(1.0, &self.nodes[b.0].value);
        self.push(Op::Add(a.0, b.0), v)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let mut v = self.nodes[a.0].value.clone();
        v.axpy(-1.0, &self.nodes[b.0].value);
        self.push(Op::Sub(a.0, b.0), v)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let mut v = self.nodes[a.0].value.clone();
        for x in &mut v.data {
            *x *= c;
        }
        self.push(Op::Scale(a.0, c), v)
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let r = &self.nodes[row.0].value;
        let m = &self.nodes[a.0].value;
        assert_eq!(r.rows, 1);
        assert_eq!(r.cols, m.cols);
        let mut v = m.clone();
        for i in 0..v.rows {
            for j in 0..v.cols {
                v.data[i * v.cols + j] += r.data[j];
            }
        }
        self.push(Op::AddRow(a.0, row.0), v)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.nodes[a.0].value.matmul(&self.nodes[b.0].value);
        self.push(Op::Matmul(a.0, b.0), v)
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let mut v = self.nodes[a.0].value.clone();
        for x in &mut v.data {
            *x = gelu(*x);
        }
        self.push(Op::Gelu(a.0), v)
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let m = &self.nodes[a.0].value;
        let mut v = m.clone();
        for r in 0..m.rows {
            let row = &mut v.data[r * m.cols..(r + 1) * m.cols];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                sum += *x;
            }
            for x in row.iter_mut() {
                *x /= sum;
            }
        }
        self.push(Op::SoftmaxRows(a.0), v)
    }

    const LN_EPS: f64 = 1e-5;

    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Var {
        let m = &self.nodes[x.0].value;
        let g = &self.nodes[gain.0].value;
        let b = &self.nodes[bias.0].value;
        assert_eq!(g.rows, 1);
        assert_eq!(g.cols, m.cols);
        assert_eq!(b.shape(), g.shape());
        let mut v = m.clone();
        for r in 0..m.rows {
            let row = &mut v.data[r * m.cols..(r + 1) * m.cols];
            let mean = row.iter().sum::<f64>() / m.cols as f64;
            let var = row.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m.cols as f64;
            let inv = 1.0 / (var + Self::LN_EPS).sqrt();
            for (j, x) in row.iter_mut().enumerate() {
                *x = (*x - mean) * inv * g.data[j] + b.data[j];
            }
        }
        self.push(Op::LayerNorm { x: x.0, gain: gain.0, bias: bias.0 }, v)
    }

    pub fn mean_rows(&mut self, a: Var) -> Var {
        let m = &self.nodes[a.0].value;
        let mut v = Tensor::zeros(1, m.cols);
        for r in 0..m.rows {
            for c in 0..m.cols {
                v.data[c] += m.data[r * m.cols + c];
            }
        }
        for x in &mut v.data {
            *x /= m.rows as f64;
        }
        self.push(Op::MeanRows(a.0), v)
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let m = &self.nodes[a.0].value;
        let v = Tensor::scalar(m.data.iter().sum::<f64>() / m.len() as f64);
        self.push(Op::MeanAll(a.0), v)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let mut v = self.nodes[a.0].value.clone();
        for x in &mut v.data {
            *x *= *x;
        }
        self.push(Op::Square(a.0), v)
    }

    pub fn slice_cols(&mut self, a: Var, from: usize, to: usize) -> Var {
        let m = &self.nodes[a.0].value;
        assert!(from < to && to <= m.cols);
        let mut v = Tensor::zeros(m.rows, to - from);
        for r in 0..m.rows {
            v.data[r * (to - from)..(r + 1) * (to - from)]
                .copy_from_slice(&m.data[r * m.cols + from..r * m.cols + to]);
        }
        self.push(Op::SliceCols { x: a.0, from, to }, v)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let rows = self.nodes[parts[0].0].value.rows;
        let cols: usize = parts.iter().map(|p| self.nodes[p.0].value.cols).sum();
        let mut v = Tensor::zeros(rows, cols);
        let mut off = 0;
        for p in parts {
            let m = &self.nodes[p.0].value;
            assert_eq!(m.rows, rows);
            for r in 0..rows {
                v.data[r * cols + off..r * cols + off + m.cols]
                    .copy_from_slice(&m.data[r * m.cols..(r + 1) * m.cols]);
            }
            off += m.cols;
        }
        self.push(Op::ConcatCols(parts.iter().map(|p| p.0).collect()), v)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.nodes[a.0].value.transpose();
        self.push(Op::Transpose(a.0), v)
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let m = &self.nodes[a.0].value;
        assert_eq!(m.len(), rows * cols);
        let v = Tensor::from_vec(rows, cols, m.data.clone());
        self.push(Op::Reshape(a.0), v)
    }

    /// Reverse pass from a scalar loss. Returns one gradient slot per node.
    pub fn backward(&self, loss: Var) -> Vec<Option<Tensor>> {
        assert_eq!(self.nodes[loss.0].value.shape(), (1, 1), "loss must be scalar");
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        let add_grad = |grads: &mut Vec<Option<Tensor>>, id: usize, g: Tensor| match &mut grads[id] {
            Some(acc) => acc.axpy(1.0, &g),
            slot @ None => *slot = Some(g),
        };

        for id in (0..self.nodes.len()).rev() {
            let Some(g) = grads[id].clone() else { continue };
            match &self.nodes[id].op {
                Op::Input => {}
                Op::Add(a, b) => {
                    add_grad(&mut grads, *a, g.clone());
                    add_grad(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    let mut neg = g.clone();
                    for x in &mut neg.data {
                        *x = -*x;
                    }
                    add_grad(&mut grads, *a, g);
                    add_grad(&mut grads, *b, neg);
                }
                Op::Scale(a, c) => {
                    let mut ga = g;
                    for x in &mut ga.data {
                        *x *= c;
                    }
                    add_grad(&mut grads, *a, ga);
                }
                Op::AddRow(a, row) => {
                    let mut gr = Tensor::zeros(1, g.cols);
                    for r in 0..g.rows {
                        for c in 0..g.cols {
                            gr.data[c] += g.data[r * g.cols + c];
                        }
                    }
                    add_grad(&mut grads, *a, g);
                    add_grad(&mut grads, *row, gr);
                }
                Op::Matmul(a, b) => {
                    let av = &self.nodes[*a].value;
                    let bv = &self.nodes[*b].value;
                    add_grad(&mut grads, *a, g.matmul(&bv.transpose()));
                    add_grad(&mut grads, *b, av.transpose().matmul(&g));
                }
                Op::Gelu(a) => {
                    let xv = &self.nodes[*a].value;
                    let mut ga = g;
                    for (gx, x) in ga.data.iter_mut().zip(&xv.data) {
                        *gx *= gelu_grad(*x);
                    }
                    add_grad(&mut grads, *a, ga);
                }
                Op::SoftmaxRows(a) => {
                    let y = &self.nodes[id].value;
                    let mut ga = Tensor::zeros(y.rows, y.cols);
                    for r in 0..y.rows {
                        let yr = &y.data[r * y.cols..(r + 1) * y.cols];
                        let gr = &g.data[r * g.cols..(r + 1) * g.cols];
                        let dot: f64 = yr.iter().zip(gr).map(|(y, g)| y * g).sum();
                        for c in 0..y.cols {
                            ga.data[r * y.cols + c] = yr[c] * (gr[c] - dot);
                        }
                    }
                    add_grad(&mut grads, *a, ga);
                }
                Op::LayerNorm { x, gain, bias } => {
                    let xv = &self.nodes[*x].value;
                    let gv = &self.nodes[*gain].value;
                    let n = xv.cols as f64;
                    let mut gx = Tensor::zeros(xv.rows, xv.cols);
                    let mut ggain = Tensor::zeros(1, xv.cols);
                    let mut gbias = Tensor::zeros(1, xv.cols);
                    for r in 0..xv.rows {
                        let row = &xv.data[r * xv.cols..(r + 1) * xv.cols];
                        let gr = &g.data[r * g.cols..(r + 1) * g.cols];
                        let mean = row.iter().sum::<f64>() / n;
                        let var = row.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                        let inv = 1.0 / (var + Self::LN_EPS).sqrt();
                        // y_hat = normalized pre-gain value
                        let yhat: Vec<f64> = row.iter().map(|x| (x - mean) * inv).collect();
                        let gy: Vec<f64> = gr.iter().zip(&gv.data).map(|(g, w)| g * w).collect();
                        let mean_gy = gy.iter().sum::<f64>() / n;
                        let mean_gy_y = gy.iter().zip(&yhat).map(|(a, b)| a * b).sum::<f64>() / n;
                        for c in 0..xv.cols {
                            gx.data[r * xv.cols + c] = inv * (gy[c] - mean_gy - yhat[c] * mean_gy_y);
                            ggain.data[c] += gr[c] * yhat[c];
                            gbias.data[c] += gr[c];
                        }
                    }
                    add_grad(&mut grads, *x, gx);
                    add_grad(&mut grads, *gain, ggain);
                    add_grad(&mut grads, *bias, gbias);
                }
                Op::MeanRows(a) => {
                    let m = &self.nodes[*a].value;
                    let mut ga = Tensor::zeros(m.rows, m.cols);
                    for r in 0..m.rows {
                        for c in 0..m.cols {
                            ga.data[r * m.cols + c] = g.data[c] / m.rows as f64;
                        }
                    }
                    add_grad(&mut grads, *a, ga);
                }
                Op::MeanAll(a) => {
                    let m = &self.nodes[*a].value;
                    let v = g.data[0] / m.len() as f64;
                    let ga = Tensor::from_vec(m.rows, m.cols, vec![v; m.len()]);
                    add_grad(&mut grads, *a, ga);
                }
                Op::Square(a) => {
                    let xv = &self.nodes[*a].value;
                    let mut ga = g;
                    for (gx, x) in ga.data.iter_mut().zip(&xv.data) {
                        *gx *= 2.0 * x;
                    }
                    add_grad(&mut grads, *a, ga);
                }
                Op::SliceCols { x, from, to } => {
                    let m = &self.nodes[*x].value;
                    let mut ga = Tensor::zeros(m.rows, m.cols);
                    for r in 0..m.rows {
                        ga.data[r * m.cols + from..r * m.cols + to]
                            .copy_from_slice(&g.data[r * (to - from)..(r + 1) * (to - from)]);
                    }
                    add_grad(&mut grads, *x, ga);
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let m = &self.nodes[*p].value;
                        let mut gp = Tensor::zeros(m.rows, m.cols);
                        for r in 0..m.rows {
                            gp.data[r * m.cols..(r + 1) * m.cols]
                                .copy_from_slice(&g.data[r * g.cols + off..r * g.cols + off + m.cols]);
                        }
                        add_grad(&mut grads, *p, gp);
                        off += m.cols;
                    }
                }
                Op::Transpose(a) => {
                    add_grad(&mut grads, *a, g.transpose());
                }
                Op::Reshape(a) => {
                    let m = &self.nodes[*a].value;
                    let ga = Tensor::from_vec(m.rows, m.cols, g.data.clone());
                    add_grad(&mut grads, *a, ga);
                }
            }
        }
        grads
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    /// Central finite differences over every input entry.
    fn fd_check(build: impl Fn(&mut Tape, &[Var]) -> Var, shapes: &[(usize, usize)], seed: u64) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let inputs: Vec<Tensor> = shapes
            .iter()
            .map(|&(r, c)| Tensor::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-1.5..1.5)).collect()))
            .collect();

        let eval = |tensors: &[Tensor]| -> f64 {
            let mut tape = Tape::new();
            let vars: Vec<Var> = tensors.iter().map(|t| tape.input(t.clone())).collect();
            let loss = build(&mut tape, &vars);
            tape.value(loss).data[0]
        };

        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.input(t.clone())).collect();
        let loss = build(&mut tape, &vars);
        let grads = tape.backward(loss);

        let h = 1e-5;
        for (vi, var) in vars.iter().enumerate() {
            let g = grads[var.0].as_ref().expect("input gradient");
            for e in 0..inputs[vi].len() {
                let mut plus = inputs.clone();
                plus[vi].data[e] += h;
                let mut minus = inputs.clone();
                minus[vi].data[e] -= h;
                let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
                let got = g.data[e];
                let denom = fd.abs().max(got.abs()).max(1e-6);
                assert!(
                    (fd - got).abs() / denom < 1e-5,
                    "input {vi} entry {e}: fd {fd} vs analytic {got}"
                );
            }
        }
    }

    #[test]
    fn grad_matmul_chain() {
        fd_check(
            |tape, v| {
                let y = tape.matmul(v[0], v[1]);
                let s = tape.square(y);
                tape.mean_all(s)
            },
            &[(3, 4), (4, 2)],
            1,
        );
    }

    #[test]
    fn grad_gelu_softmax() {
        fd_check(
            |tape, v| {
                let g = tape.gelu(v[0]);
                let s = tape.softmax_rows(g);
                let q = tape.square(s);
                tape.mean_all(q)
            },
            &[(3, 5)],
            2,
        );
    }

    #[test]
    fn grad_layer_norm() {
        fd_check(
            |tape, v| {
                let y = tape.layer_norm(v[0], v[1], v[2]);
                let s = tape.square(y);
                tape.mean_all(s)
            },
            &[(4, 6), (1, 6), (1, 6)],
            3,
        );
    }

    #[test]
    fn grad_attention_shaped() {
        fd_check(
            |tape, v| {
                let q = tape.slice_cols(v[0], 0, 2);
                let k = tape.slice_cols(v[0], 2, 4);
                let kt = tape.transpose(k);
                let s = tape.matmul(q, kt);
                let sc = tape.scale(s, 1.0 / 2.0f64.sqrt());
                let p = tape.softmax_rows(sc);
                let vv = tape.slice_cols(v[0], 4, 6);
                let o = tape.matmul(p, vv);
                let both = tape.concat_cols(&[o, q]);
                let sq = tape.square(both);
                tape.mean_all(sq)
            },
            &[(3, 6)],
            4,
        );
    }

    #[test]
    fn grad_broadcast_and_reductions() {
        fd_check(
            |tape, v| {
                let y = tape.add_row(v[0], v[1]);
                let m = tape.mean_rows(y);
                let r = tape.reshape(m, 2, 2);
                let d = tape.sub(r, v[2]);
                let s = tape.square(d);
                tape.mean_all(s)
            },
            &[(3, 4), (1, 4), (2, 2)],
            5,
        );
    }
}
