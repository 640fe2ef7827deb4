//! Explicit affine + activation layer stacks and their JSON weight format.
//!
//! A stack is a list of affine layers, each followed by a per-channel
//! activation, plus output heads that read the post-activation state after a
//! chosen layer. JSON layout:
//!
//! ```json
//! {
//!   "input_dim": 1,
//!   "width": 7,
//!   "nonnegative_inputs": true,
//!   "layers": [
//!     {"rows": 7, "cols": 1, "weights": [...row-major...], "bias": [...],
//!      "activations": ["sin", "sin", "relu", ...]}
//!   ],
//!   "heads": [
//!     {"label": "level-0", "after_layer": 1, "rows": 1, "cols": 7,
//!      "weights": [...], "bias": [...]}
//!   ]
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Sin,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sin => z.sin(),
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineLayer {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activations: Vec<Activation>,
}

impl AffineLayer {
    pub fn zeros(rows: usize, cols: usize, activations: Vec<Activation>) -> Self {
        debug_assert_eq!(activations.len(), rows);
        Self {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
            activations,
        }
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.weights[row * self.cols + col] = v;
    }

    #[inline]
    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        self.weights[row * self.cols + col] += v;
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.cols + col]
    }

    pub fn forward(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for r in 0..self.rows {
            let row = &self.weights[r * self.cols..(r + 1) * self.cols];
            let z = row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + self.bias[r];
            out.push(self.activations[r].apply(z));
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.rows * self.cols + self.rows
    }

    fn validate(&self, expected_cols: usize, idx: usize) -> Result<()> {
        if self.cols != expected_cols
            || self.weights.len() != self.rows * self.cols
            || self.bias.len() != self.rows
            || self.activations.len() != self.rows
        {
            return Err(Error::InvalidArgument(format!(
                "layer {idx} has inconsistent shape ({}x{}, {} weights, {} biases, {} activations; expected {expected_cols} columns)",
                self.rows,
                self.cols,
                self.weights.len(),
                self.bias.len(),
                self.activations.len()
            )));
        }
        Ok(())
    }
}

/// Affine map applied to the state after layer `after_layer` (0-based).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputHead {
    pub label: String,
    pub after_layer: usize,
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl OutputHead {
    pub fn zeros(label: impl Into<String>, after_layer: usize, rows: usize, cols: usize) -> Self {
        Self {
            label: label.into(),
            after_layer,
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.weights[row * self.cols + col] = v;
    }

    pub fn apply(&self, state: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| {
                let row = &self.weights[r * self.cols..(r + 1) * self.cols];
                row.iter().zip(state).map(|(w, x)| w * x).sum::<f64>() + self.bias[r]
            })
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.rows * self.cols + self.rows
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerStack {
    pub input_dim: usize,
    /// Largest layer output dimension.
    pub width: usize,
    /// The realization is only exact on inputs with nonnegative coordinates.
    pub nonnegative_inputs: bool,
    pub layers: Vec<AffineLayer>,
    pub heads: Vec<OutputHead>,
}

impl LayerStack {
    pub fn new(
        input_dim: usize,
        nonnegative_inputs: bool,
        layers: Vec<AffineLayer>,
        heads: Vec<OutputHead>,
    ) -> Result<Self> {
        let width = layers.iter().map(|l| l.rows).max().unwrap_or(0);
        let s = Self {
            input_dim,
            width,
            nonnegative_inputs,
            layers,
            heads,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let mut cols = self.input_dim;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.validate(cols, i)?;
            cols = layer.rows;
        }
        for h in &self.heads {
            let layer = self.layers.get(h.after_layer).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "head `{}` reads layer {} of {}",
                    h.label,
                    h.after_layer,
                    self.layers.len()
                ))
            })?;
            if h.cols != layer.rows || h.weights.len() != h.rows * h.cols || h.bias.len() != h.rows
            {
                return Err(Error::InvalidArgument(format!(
                    "head `{}` has inconsistent shape",
                    h.label
                )));
            }
        }
        Ok(())
    }

    /// Post-activation state after every layer.
    pub fn hidden_states(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if x.len() != self.input_dim {
            return Err(Error::Domain(format!(
                "input has dimension {}, stack expects {}",
                x.len(),
                self.input_dim
            )));
        }
        if self.nonnegative_inputs && x.iter().any(|v| *v < 0.0) {
            return Err(Error::Domain(format!(
                "weights realization is only valid on nonnegative inputs, got {x:?}"
            )));
        }
        let mut states = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        for layer in &self.layers {
            let mut next = Vec::with_capacity(layer.rows);
            layer.forward(&cur, &mut next);
            states.push(next.clone());
            cur = next;
        }
        Ok(states)
    }

    /// Evaluate every head at `x`, in head order.
    pub fn eval_heads(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let states = self.hidden_states(x)?;
        Ok(self
            .heads
            .iter()
            .map(|h| h.apply(&states[h.after_layer]))
            .collect())
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(AffineLayer::parameter_count)
            .sum::<usize>()
            + self
                .heads
                .iter()
                .map(OutputHead::parameter_count)
                .sum::<usize>()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let stack: LayerStack = serde_json::from_str(s)?;
        stack.validate()?;
        Ok(stack)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> LayerStack {
        let mut l0 = AffineLayer::zeros(2, 1, vec![Activation::Relu, Activation::Sin]);
        l0.set(0, 0, 2.0);
        l0.bias[0] = -1.0;
        l0.set(1, 0, 1.0);
        let mut h = OutputHead::zeros("out", 0, 1, 2);
        h.set(0, 0, 1.0);
        h.set(0, 1, 3.0);
        h.bias[0] = 0.5;
        LayerStack::new(1, true, vec![l0], vec![h]).unwrap()
    }

    #[test]
    fn forward_applies_per_channel_activation() {
        let s = tiny();
        let x = 0.8;
        let expect = (2.0 * x - 1.0f64).max(0.0) + 3.0 * x.sin() + 0.5;
        let got = s.eval_heads(&[x]).unwrap()[0][0];
        assert!((got - expect).abs() < 1e-15);
        assert_eq!(s.parameter_count(), 4 + 3);
        assert_eq!(s.width, 2);
    }

    #[test]
    fn negative_input_is_rejected() {
        assert!(matches!(tiny().eval_heads(&[-0.1]), Err(Error::Domain(_))));
    }

    #[test]
    fn json_roundtrip_and_shape_check() {
        let s = tiny();
        let back = LayerStack::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back, s);
        let mut broken = s.clone();
        broken.layers[0].bias.pop();
        let text = serde_json::to_string(&broken).unwrap();
        assert!(LayerStack::from_json(&text).is_err());
    }
}
