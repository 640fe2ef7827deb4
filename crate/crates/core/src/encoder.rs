//! Coordinate encoder: the step proxy `h`, the two-variable refinement map
//! `h_l(x, y) = (x, N^{-l} h(N^l (x - y)) + y)`, the per-coordinate encoder
//! `psi_l` obtained by composing `h_1, ..., h_l` on `(x, 0)`, and its
//! realization as a ReLU layer stack.
//!
//! The functional form is the reference; the weights form is checked against it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PartitionConfig, MIN_DELTA};
use crate::weights::{Activation, AffineLayer, LayerStack, OutputHead};

/// Continuous piecewise-linear surrogate of `floor` on `[0, N-1]`:
/// equal to `j` on `[j, j+1-delta]`, ramping with slope `1/delta` on
/// `[j+1-delta, j+1]`, `0` below zero and `N-1` above `N-1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepProxy {
    pub n: u64,
    pub delta: f64,
}

impl StepProxy {
    pub fn new(n: u64, delta: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument("step proxy needs N >= 2".into()));
        }
        if !(MIN_DELTA..1.0).contains(&delta) {
            return Err(Error::InvalidArgument(format!(
                "step proxy gap must lie in [{MIN_DELTA:e}, 1), got {delta}"
            )));
        }
        Ok(Self { n, delta })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let top = (self.n - 1) as f64;
        if x <= 0.0 {
            0.0
        } else if x >= top {
            top
        } else {
            let j = x.floor();
            let knee = j + 1.0 - self.delta;
            if x <= knee {
                j
            } else {
                j + (x - knee) / self.delta
            }
        }
    }

    /// The same function written as `(1/delta) sum_j [ReLU(x - j + delta) - ReLU(x - j)]`.
    pub fn eval_relu_sum(&self, x: f64) -> f64 {
        let relu = |z: f64| z.max(0.0);
        (1..self.n)
            .map(|j| {
                let j = j as f64;
                relu(x - (j - self.delta)) - relu(x - j)
            })
            .sum::<f64>()
            / self.delta
    }

    /// Number of linear pieces, `2N - 1`.
    pub fn pieces(&self) -> u64 {
        2 * self.n - 1
    }
}

/// `(x, y)`: the pass-through coordinate and the accumulated left endpoint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderState {
    pub x: f64,
    pub y: f64,
}

impl EncoderState {
    pub fn start(x: f64) -> Self {
        Self { x, y: 0.0 }
    }
}

/// One refinement step `h_level`. Defined on all of R^2.
pub fn h_ell_apply(cfg: &PartitionConfig, state: EncoderState, level: usize) -> EncoderState {
    let h = StepProxy {
        n: cfg.n,
        delta: cfg.delta,
    };
    let s = cfg.scale(level) as f64;
    EncoderState {
        x: state.x,
        y: h.eval(s * (state.x - state.y)) / s + state.y,
    }
}

/// `psi_level(x)`: the left endpoint `j / N^level` of the interval containing
/// `x` when `x` lies in `I_{level,j}`, continuous in between.
pub fn encode_coordinate(cfg: &PartitionConfig, x: f64, level: usize) -> f64 {
    let mut st = EncoderState::start(x);
    for l in 1..=level {
        st = h_ell_apply(cfg, st, l);
    }
    st.y
}

/// `Psi_level(x) = (psi_level(x_1), ..., psi_level(x_d))`; equals `beta / N^level` on `Q_{level,beta}`.
pub fn encode(cfg: &PartitionConfig, x: &[f64], level: usize) -> Result<Vec<f64>> {
    if level == 0 || level > cfg.depth {
        return Err(Error::Range(format!(
            "encoder levels run from 1 to {}, got {level}",
            cfg.depth
        )));
    }
    if x.len() != cfg.d {
        return Err(Error::Domain(format!(
            "point has dimension {}, expected {}",
            x.len(),
            cfg.d
        )));
    }
    Ok(x.iter()
        .map(|&xi| encode_coordinate(cfg, xi, level))
        .collect())
}

/// Affine form `constant + sum coeff * state[col]` over the previous layer's output.
#[derive(Clone, Debug, Default, PartialEq)]
pub(crate) struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn var(col: usize) -> Self {
        Self {
            terms: vec![(col, 1.0)],
            constant: 0.0,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            terms: self.terms.iter().map(|&(c, w)| (c, a * w)).collect(),
            constant: a * self.constant,
        }
    }

    pub fn plus(&self, other: &Affine) -> Self {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Self {
            terms,
            constant: self.constant + other.constant,
        }
    }

    pub fn write_row(&self, layer: &mut AffineLayer, row: usize) {
        for &(c, w) in &self.terms {
            layer.add(row, c, w);
        }
        layer.bias[row] += self.constant;
    }

    pub fn write_head_row(&self, head: &mut OutputHead, row: usize) {
        for &(c, w) in &self.terms {
            head.weights[row * head.cols + c] += w;
        }
        head.bias[row] += self.constant;
    }
}

/// Hidden units of one `h_l` block for one coordinate: `[x, y, (up_1, down_1), ..., (up_{N-1}, down_{N-1})]`.
pub(crate) const fn block_units(n: u64) -> usize {
    2 * n as usize
}

/// Write the pre-activations of the `h_level` block starting at `row`, given
/// affine expressions for its inputs `x` and `y`.
pub(crate) fn write_h_block(
    layer: &mut AffineLayer,
    row: usize,
    cfg: &PartitionConfig,
    level: usize,
    x: &Affine,
    y: &Affine,
) {
    let s = cfg.scale(level) as f64;
    x.write_row(layer, row);
    y.write_row(layer, row + 1);
    // a = s (x - y)
    let a = x.plus(&y.scaled(-1.0)).scaled(s);
    for j in 1..cfg.n {
        let jf = j as f64;
        let up = row + 2 + 2 * (j as usize - 1);
        a.plus(&Affine::constant(-(jf - cfg.delta)))
            .write_row(layer, up);
        a.plus(&Affine::constant(-jf)).write_row(layer, up + 1);
    }
}

/// `x` after the block whose units start at column `col`.
pub(crate) fn block_x(col: usize) -> Affine {
    Affine::var(col)
}

/// `y' = y + (1 / (N^level delta)) sum_j (up_j - down_j)` for the block at `col`.
pub(crate) fn block_y(col: usize, cfg: &PartitionConfig, level: usize) -> Affine {
    let c = 1.0 / (cfg.scale(level) as f64 * cfg.delta);
    let mut terms = vec![(col + 1, 1.0)];
    for j in 1..cfg.n as usize {
        let up = col + 2 + 2 * (j - 1);
        terms.push((up, c));
        terms.push((up + 1, -c));
    }
    Affine {
        terms,
        constant: 0.0,
    }
}

/// ReLU realization of `Psi_1, ..., Psi_L` on `[0, inf)^d`.
///
/// Layer `m` (0-based) holds the hidden units of `h_{m+1}` for every
/// coordinate; head `level-l` reads `Psi_l` after layer `l - 1`.
pub fn build_encoder_weights(cfg: &PartitionConfig) -> Result<LayerStack> {
    cfg.validate()?;
    let d = cfg.d;
    let bu = block_units(cfg.n);
    let width = d * bu;
    let mut layers = Vec::with_capacity(cfg.depth);
    for m in 0..cfg.depth {
        let level = m + 1;
        let cols = if m == 0 { d } else { width };
        let mut layer = AffineLayer::zeros(width, cols, vec![Activation::Relu; width]);
        for i in 0..d {
            let (x, y) = if m == 0 {
                (Affine::var(i), Affine::constant(0.0))
            } else {
                (block_x(i * bu), block_y(i * bu, cfg, level - 1))
            };
            write_h_block(&mut layer, i * bu, cfg, level, &x, &y);
        }
        layers.push(layer);
    }
    let heads = (1..=cfg.depth)
        .map(|level| {
            let mut head = OutputHead::zeros(format!("psi-{level}"), level - 1, d, width);
            for i in 0..d {
                block_y(i * bu, cfg, level).write_head_row(&mut head, i);
            }
            head
        })
        .collect();
    LayerStack::new(d, true, layers, heads)
}

/// `Psi_level(x)` evaluated through the weight stack.
pub fn encode_with_weights(stack: &LayerStack, x: &[f64], level: usize) -> Result<Vec<f64>> {
    let head = stack
        .heads
        .iter()
        .find(|h| h.label == format!("psi-{level}"))
        .ok_or_else(|| Error::Range(format!("no encoder head for level {level}")))?;
    let states = stack.hidden_states(x)?;
    Ok(head.apply(&states[head.after_layer]))
}
