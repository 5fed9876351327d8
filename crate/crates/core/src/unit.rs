//! A single predictive unit.
//!
//! Each step the unit receives a primary signal `P_t` (a raw pixel tile or the
//! concatenated hidden states of its children) and a context vector (hidden
//! states of its context sources from the previous step). From its recurrent
//! memory it derives three more layers, all affine maps into `[0, 1]`:
//!
//! | layer      | definition                    |
//! |------------|-------------------------------|
//! | integral   | `τ·I_{t−1} + (1−τ)·P_t`       |
//! | derivative | `0.5 + (P_t − P_{t−1})/2`     |
//! | error      | `0.5 + (P*_t − P_t)/2`        |
//!
//! The perceptron input is the concatenation `[P; D; I; E; C]`; its hidden
//! layer is the unit's state `H_t` and its output is the prediction
//! `P*_{t+1}` of the next signal.
//!
//! Training is local and truncated: the loss `Σ (P*_{t+1} − P_{t+1})²` is
//! backpropagated through this unit's perceptron only, treating the cached
//! input vector as a constant.

use rand::Rng;

use crate::numerics::{sigmoid, Mlp};

/// Signal and context presented to a unit at one time step.
#[derive(Debug, Clone, Copy)]
pub struct UnitStepInput<'a> {
    pub signal: &'a [f64],
    pub context: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivedLayers {
    pub integral: Vec<f64>,
    pub derivative: Vec<f64>,
    pub error: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitState {
    pub mlp: Mlp,
    pub tau: f64,
    /// `P_{t−1}`.
    pub signal_prev: Vec<f64>,
    /// `I_{t−1}` until the next forward pass, then `I_t`.
    pub integral: Vec<f64>,
    /// `P*_t`: the prediction emitted last step, awaiting comparison.
    pub prediction_pending: Vec<f64>,
    pub hidden: Vec<f64>,
    /// Perceptron input that produced `prediction_pending`. `None` right
    /// after a reset, when the pending prediction comes from the initial
    /// biases and there is nothing to train.
    pub last_input: Option<Vec<f64>>,
    /// Unit ids whose previous-step hidden states form the context, in order.
    pub context_sources: Vec<usize>,
}

impl UnitState {
    pub fn new<R: Rng + ?Sized>(
        signal_dim: usize,
        context_dim: usize,
        hidden_size: usize,
        tau: f64,
        context_sources: Vec<usize>,
        rng: &mut R,
    ) -> Self {
        let mlp = Mlp::random(4 * signal_dim + context_dim, hidden_size, signal_dim, rng);
        Self::with_mlp(mlp, tau, context_sources)
    }

    pub fn with_mlp(mlp: Mlp, tau: f64, context_sources: Vec<usize>) -> Self {
        assert!((0.0..1.0).contains(&tau), "tau must lie in [0, 1)");
        let n = mlp.output_size();
        assert!(
            mlp.input_size() >= 4 * n,
            "perceptron input too small for signal dimension"
        );
        let mut unit = Self {
            mlp,
            tau,
            signal_prev: vec![0.5; n],
            integral: vec![0.5; n],
            prediction_pending: vec![0.5; n],
            hidden: Vec::new(),
            last_input: None,
            context_sources,
        };
        unit.reset();
        unit
    }

    pub fn signal_dim(&self) -> usize {
        self.mlp.output_size()
    }

    pub fn context_dim(&self) -> usize {
        self.mlp.input_size() - 4 * self.signal_dim()
    }

    pub fn hidden_size(&self) -> usize {
        self.mlp.hidden_size()
    }

    /// Warm-up state: memories at 0.5, hidden at `σ(b_h)`, pending
    /// prediction equal to the output computed from that hidden state.
    pub fn reset(&mut self) {
        let n = self.signal_dim();
        self.signal_prev = vec![0.5; n];
        self.integral = vec![0.5; n];
        self.hidden = self.initial_hidden();
        self.prediction_pending = self.mlp.output_from(&self.hidden);
        self.last_input = None;
    }

    pub fn initial_hidden(&self) -> Vec<f64> {
        self.mlp.b_hidden.iter().map(|&b| sigmoid(b)).collect()
    }

    pub fn derive_layers(&self, signal: &[f64]) -> DerivedLayers {
        assert_eq!(signal.len(), self.signal_dim(), "signal dimension mismatch");
        let tau = self.tau;
        let integral = self
            .integral
            .iter()
            .zip(signal)
            .map(|(&i, &p)| tau * i + (1.0 - tau) * p)
            .collect();
        let derivative = signal
            .iter()
            .zip(&self.signal_prev)
            .map(|(&p, &prev)| 0.5 + (p - prev) / 2.0)
            .collect();
        let error = self
            .prediction_pending
            .iter()
            .zip(signal)
            .map(|(&pred, &p)| 0.5 + (pred - p) / 2.0)
            .collect();
        DerivedLayers {
            integral,
            derivative,
            error,
        }
    }

    /// `Σ (P*_t − P_t)²` for the pending prediction against the actual signal.
    pub fn prediction_loss(&self, signal: &[f64]) -> f64 {
        assert_eq!(signal.len(), self.signal_dim(), "signal dimension mismatch");
        self.prediction_pending
            .iter()
            .zip(signal)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// Advances the unit by one step; returns `(H_t, P*_{t+1})`.
    pub fn forward(&mut self, input: UnitStepInput<'_>) -> (Vec<f64>, Vec<f64>) {
        assert_eq!(input.context.len(), self.context_dim(), "context dimension mismatch");
        let layers = self.derive_layers(input.signal);

        let mut x = Vec::with_capacity(self.mlp.input_size());
        x.extend_from_slice(input.signal);
        x.extend_from_slice(&layers.derivative);
        x.extend_from_slice(&layers.integral);
        x.extend_from_slice(&layers.error);
        x.extend_from_slice(input.context);

        let (hidden, prediction) = self.mlp.forward(&x);

        self.signal_prev.copy_from_slice(input.signal);
        self.integral = layers.integral;
        self.hidden.clone_from(&hidden);
        self.prediction_pending.clone_from(&prediction);
        self.last_input = Some(x);
        (hidden, prediction)
    }

    /// One SGD step of the pending prediction toward the observed next
    /// signal. Returns the loss before the update. Without a cached input
    /// (right after reset) nothing is learned and the plain prediction loss
    /// is returned.
    pub fn train(&mut self, observed_next: &[f64], rate: f64) -> f64 {
        match &self.last_input {
            Some(x) => {
                let (grads, loss) = self.mlp.backward(x, observed_next);
                self.mlp.sgd_step(&grads, rate);
                loss
            }
            None => self.prediction_loss(observed_next),
        }
    }
}
