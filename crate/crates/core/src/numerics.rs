//! Dense linear algebra and the three-layer sigmoid perceptron.
//!
//! The perceptron computes
//!
//! - `hidden = sigmoid(W_h · input + b_h)`
//! - `output = sigmoid(W_p · hidden + b_p)`
//!
//! and is trained on the summed squared error `Σ (output − target)²`.
//!
//! Shape mismatches are programmer error and panic via `assert!`.

use rand::Rng;
use rand_distr::{Distribution, Uniform};

/// Logistic function. Saturates to exactly 0 or 1 for large |x| and never
/// produces NaN for finite input.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { 1.0 } else { 0.0 })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `self · x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec: vector length != cols");
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `selfᵀ · y`.
    pub fn matvec_transposed(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows, "matvec_transposed: vector length != rows");
        let mut out = vec![0.0; self.cols];
        for (r, &yr) in y.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(r)) {
                *o += a * yr;
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul: inner dimensions differ");
        Matrix::from_fn(self.rows, other.cols, |r, c| {
            (0..self.cols).map(|k| self.get(r, k) * other.get(k, c)).sum()
        })
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Determinant of a 3×3 matrix.
    pub fn det3(&self) -> f64 {
        assert_eq!((self.rows, self.cols), (3, 3), "det3 needs a 3x3 matrix");
        let m = |r, c| self.get(r, c);
        m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1))
            - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
            + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
    }
}

/// Gradients of the squared-error loss, shape-matched to [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradients {
    pub w_hidden: Matrix,
    pub b_hidden: Vec<f64>,
    pub w_out: Matrix,
    pub b_out: Vec<f64>,
}

/// Three-layer perceptron with sigmoid hidden and output neurons.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub w_hidden: Matrix,
    pub b_hidden: Vec<f64>,
    pub w_out: Matrix,
    pub b_out: Vec<f64>,
}

impl Mlp {
    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        Self {
            w_hidden: Matrix::zeros(hidden, input),
            b_hidden: vec![0.0; hidden],
            w_out: Matrix::zeros(output, hidden),
            b_out: vec![0.0; output],
        }
    }

    /// Uniform init in `[-1/√fan_in, 1/√fan_in]` for every weight and bias.
    pub fn random<R: Rng + ?Sized>(input: usize, hidden: usize, output: usize, rng: &mut R) -> Self {
        let mut mlp = Self::zeros(input, hidden, output);
        let lim_h = 1.0 / (input as f64).sqrt();
        let lim_p = 1.0 / (hidden as f64).sqrt();
        let dist_h = Uniform::new_inclusive(-lim_h, lim_h).expect("finite bounds");
        let dist_p = Uniform::new_inclusive(-lim_p, lim_p).expect("finite bounds");
        for w in mlp.w_hidden.as_mut_slice() {
            *w = dist_h.sample(rng);
        }
        for b in &mut mlp.b_hidden {
            *b = dist_h.sample(rng);
        }
        for w in mlp.w_out.as_mut_slice() {
            *w = dist_p.sample(rng);
        }
        for b in &mut mlp.b_out {
            *b = dist_p.sample(rng);
        }
        mlp
    }

    pub fn input_size(&self) -> usize {
        self.w_hidden.cols()
    }

    pub fn hidden_size(&self) -> usize {
        self.w_hidden.rows()
    }

    pub fn output_size(&self) -> usize {
        self.w_out.rows()
    }

    pub fn forward(&self, input: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let hidden = self.hidden_from(input);
        let output = self.output_from(&hidden);
        (hidden, output)
    }

    pub fn hidden_from(&self, input: &[f64]) -> Vec<f64> {
        let mut z = self.w_hidden.matvec(input);
        for (z, b) in z.iter_mut().zip(&self.b_hidden) {
            *z = sigmoid(*z + b);
        }
        z
    }

    pub fn output_from(&self, hidden: &[f64]) -> Vec<f64> {
        let mut z = self.w_out.matvec(hidden);
        for (z, b) in z.iter_mut().zip(&self.b_out) {
            *z = sigmoid(*z + b);
        }
        z
    }

    /// Loss `Σ (output − target)²` and its exact gradient w.r.t. every
    /// parameter block.
    pub fn backward(&self, input: &[f64], target: &[f64]) -> (MlpGradients, f64) {
        assert_eq!(target.len(), self.output_size(), "target length != output size");
        let (hidden, output) = self.forward(input);

        let mut loss = 0.0;
        let delta_out: Vec<f64> = output
            .iter()
            .zip(target)
            .map(|(&o, &t)| {
                let e = o - t;
                loss += e * e;
                2.0 * e * o * (1.0 - o)
            })
            .collect();

        let back = self.w_out.matvec_transposed(&delta_out);
        let delta_hidden: Vec<f64> = back
            .iter()
            .zip(&hidden)
            .map(|(&g, &h)| g * h * (1.0 - h))
            .collect();

        let w_out = Matrix::from_fn(self.output_size(), self.hidden_size(), |r, c| {
            delta_out[r] * hidden[c]
        });
        let w_hidden = Matrix::from_fn(self.hidden_size(), self.input_size(), |r, c| {
            delta_hidden[r] * input[c]
        });

        (
            MlpGradients {
                w_hidden,
                b_hidden: delta_hidden,
                w_out,
                b_out: delta_out,
            },
            loss,
        )
    }

    /// Plain gradient descent: every parameter moves by `-rate × gradient`.
    pub fn sgd_step(&mut self, grads: &MlpGradients, rate: f64) {
        fn descend(p: &mut [f64], g: &[f64], rate: f64) {
            assert_eq!(p.len(), g.len(), "gradient shape mismatch");
            for (p, g) in p.iter_mut().zip(g) {
                *p -= rate * g;
            }
        }
        descend(self.w_hidden.as_mut_slice(), grads.w_hidden.as_slice(), rate);
        descend(&mut self.b_hidden, &grads.b_hidden, rate);
        descend(self.w_out.as_mut_slice(), grads.w_out.as_slice(), rate);
        descend(&mut self.b_out, &grads.b_out, rate);
    }

    /// All parameters in a fixed order: `W_h`, `b_h`, `W_p`, `b_p`.
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.w_hidden
            .as_slice()
            .iter()
            .chain(&self.b_hidden)
            .chain(self.w_out.as_slice())
            .chain(&self.b_out)
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w_hidden
            .as_mut_slice()
            .iter_mut()
            .chain(self.b_hidden.iter_mut())
            .chain(self.w_out.as_mut_slice().iter_mut())
            .chain(self.b_out.iter_mut())
    }

    pub fn param_count(&self) -> usize {
        self.w_hidden.as_slice().len()
            + self.b_hidden.len()
            + self.w_out.as_slice().len()
            + self.b_out.len()
    }
}

impl MlpGradients {
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.w_hidden
            .as_slice()
            .iter()
            .chain(&self.b_hidden)
            .chain(self.w_out.as_slice())
            .chain(&self.b_out)
    }
}

/// Central finite-difference gradient of the squared-error loss, in the same
/// parameter order as [`Mlp::params`]. Test oracle for [`Mlp::backward`].
pub fn numeric_gradient(mlp: &Mlp, input: &[f64], target: &[f64], h: f64) -> Vec<f64> {
    let loss = |m: &Mlp| -> f64 {
        let (_, out) = m.forward(input);
        out.iter().zip(target).map(|(o, t)| (o - t) * (o - t)).sum()
    };
    let mut probe = mlp.clone();
    let n = mlp.param_count();
    let mut grad = Vec::with_capacity(n);
    for i in 0..n {
        let orig = *probe.params_mut().nth(i).unwrap();
        *probe.params_mut().nth(i).unwrap() = orig + h;
        let up = loss(&probe);
        *probe.params_mut().nth(i).unwrap() = orig - h;
        let down = loss(&probe);
        *probe.params_mut().nth(i).unwrap() = orig;
        grad.push((up - down) / (2.0 * h));
    }
    grad
}

/// Worst relative error between analytic and numeric gradients, with
/// denominator `max(1e-8, |analytic| + |numeric|)`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / (a.abs() + n.abs()).max(1e-8))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sigmoid_reference_points() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(50.0) - 1.0).abs() <= 1e-15);
        // 1/(1+e^-1) from a 30-digit evaluation
        assert!((sigmoid(1.0) - 0.731_058_578_630_004_9).abs() < 1e-15);
        assert!(sigmoid(-1000.0) == 0.0);
        assert!(sigmoid(1000.0) == 1.0);
    }

    #[test]
    fn sigmoid_symmetry() {
        for i in -400..=400 {
            let x = i as f64 * 0.05;
            assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() <= 1e-15, "x={x}");
        }
    }

    #[test]
    fn zero_network_outputs_half() {
        let mlp = Mlp::zeros(7, 3, 4);
        let (h, o) = mlp.forward(&[0.3, -2.0, 5.0, 0.0, 1.0, 1.0, 9.0]);
        assert!(h.iter().chain(&o).all(|&v| v == 0.5));
    }

    #[test]
    fn scalar_hidden_at_zero_input() {
        let mut mlp = Mlp::zeros(1, 1, 1);
        mlp.w_hidden.set(0, 0, 4.0);
        let (h, _) = mlp.forward(&[0.0]);
        assert_eq!(h, vec![0.5]);
    }

    #[test]
    fn forward_matches_scripted_reference() {
        // Reference values computed with numpy from the same closed-form weights.
        let mlp = Mlp {
            w_hidden: Matrix::from_fn(3, 6, |r, c| (0.37 * (r * 6 + c) as f64 + 0.1).sin()),
            b_hidden: (0..3).map(|r| 0.05 * r as f64 - 0.1).collect(),
            w_out: Matrix::from_fn(2, 3, |r, c| (0.53 * (r * 3 + c) as f64).cos()),
            b_out: vec![0.2, -0.3],
        };
        let x: Vec<f64> = (0..6).map(|i| 0.1 * i as f64).collect();
        let (h, o) = mlp.forward(&x);
        let want_h = [0.7754534586067792, 0.321176678291576, 0.37872506070164824];
        let want_o = [0.8081005685289641, 0.30652311028751095];
        for (a, b) in h.iter().zip(want_h).chain(o.iter().zip(want_o)) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
    }

    #[test]
    fn forward_is_pure() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mlp = Mlp::random(9, 4, 5, &mut rng);
        let x: Vec<f64> = (0..9).map(|i| i as f64 / 9.0).collect();
        let a = mlp.forward(&x);
        let b = mlp.forward(&x);
        assert_eq!(a.0.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.0.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(a.1.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.1.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn perfect_prediction_has_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mlp = Mlp::random(4, 3, 2, &mut rng);
        let x = [0.1, 0.9, 0.4, 0.5];
        let (_, target) = mlp.forward(&x);
        let (g, loss) = mlp.backward(&x, &target);
        assert_eq!(loss, 0.0);
        assert!(g.params().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_chain_rule_by_hand() {
        // h = σ(a x + b), o = σ(c h + d), L = (o − y)²
        // ∂L/∂d = 2(o − y) o (1 − o)
        // ∂L/∂c = ∂L/∂d · h
        // ∂L/∂b = ∂L/∂d · c · h (1 − h)
        // ∂L/∂a = ∂L/∂b · x
        let (a, b, c, d, x, y) = (0.7f64, -0.2f64, 1.3f64, 0.4f64, 0.8f64, 0.1f64);
        let h = 1.0 / (1.0 + (-(a * x + b)).exp());
        let o = 1.0 / (1.0 + (-(c * h + d)).exp());
        let dd = 2.0 * (o - y) * o * (1.0 - o);
        let dc = dd * h;
        let db = dd * c * h * (1.0 - h);
        let da = db * x;

        let mlp = Mlp {
            w_hidden: Matrix::from_vec(1, 1, vec![a]),
            b_hidden: vec![b],
            w_out: Matrix::from_vec(1, 1, vec![c]),
            b_out: vec![d],
        };
        let (g, loss) = mlp.backward(&[x], &[y]);
        assert!((loss - (o - y) * (o - y)).abs() < 1e-15);
        assert!((g.w_hidden.get(0, 0) - da).abs() < 1e-15);
        assert!((g.b_hidden[0] - db).abs() < 1e-15);
        assert!((g.w_out.get(0, 0) - dc).abs() < 1e-15);
        assert!((g.b_out[0] - dd).abs() < 1e-15);
    }

    #[test]
    fn finite_difference_check_8_4_4() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mlp = Mlp::random(8, 4, 4, &mut rng);
        let x: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
        let t: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
        let (g, _) = mlp.backward(&x, &t);
        let analytic: Vec<f64> = g.params().copied().collect();
        let numeric = numeric_gradient(&mlp, &x, &t, 1e-6);
        assert!(max_relative_error(&analytic, &numeric) <= 1e-4);
    }

    #[test]
    fn sgd_zero_gradient_is_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut mlp = Mlp::random(3, 2, 3, &mut rng);
        let before = mlp.clone();
        let zero = MlpGradients {
            w_hidden: Matrix::zeros(2, 3),
            b_hidden: vec![0.0; 2],
            w_out: Matrix::zeros(3, 2),
            b_out: vec![0.0; 3],
        };
        mlp.sgd_step(&zero, 0.5);
        assert_eq!(mlp, before);
    }

    #[test]
    fn sgd_unit_rate_with_self_gradient_zeroes_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut mlp = Mlp::random(3, 2, 3, &mut rng);
        let g = MlpGradients {
            w_hidden: mlp.w_hidden.clone(),
            b_hidden: mlp.b_hidden.clone(),
            w_out: mlp.w_out.clone(),
            b_out: mlp.b_out.clone(),
        };
        mlp.sgd_step(&g, 1.0);
        assert!(mlp.params().all(|&v| v == 0.0));
    }

    #[test]
    fn small_step_decreases_scalar_loss() {
        let mut mlp = Mlp {
            w_hidden: Matrix::from_vec(1, 1, vec![0.7]),
            b_hidden: vec![-0.2],
            w_out: Matrix::from_vec(1, 1, vec![1.3]),
            b_out: vec![0.4],
        };
        let (g, before) = mlp.backward(&[0.8], &[0.1]);
        mlp.sgd_step(&g, 1e-2);
        let (_, after) = mlp.backward(&[0.8], &[0.1]);
        assert!(after < before);
    }

    #[test]
    #[should_panic]
    fn matvec_rejects_wrong_length() {
        Matrix::zeros(2, 3).matvec(&[1.0, 2.0]);
    }

    #[test]
    fn init_respects_fan_in_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mlp = Mlp::random(16, 4, 3, &mut rng);
        assert!(mlp.w_hidden.as_slice().iter().all(|w| w.abs() <= 0.25));
        assert!(mlp.w_out.as_slice().iter().all(|w| w.abs() <= 0.5));
    }
}
