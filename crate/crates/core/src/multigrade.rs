//! The multigrade construction: residual recursion over levels, correction
//! terms `Gamma_l`, readouts `Phi_l = Gamma_0 + ... + Gamma_l`, and the
//! shared-width mixed-activation network realizing them.
//!
//! Exported layout (width `W = 2dN + d + 2`), layers `i = -1..=L`:
//!
//! ```text
//! channel 0        sin   w_{i+1} Lambda_{i+1}(Psi_{i+1})   (bias w_0 at i = -1)
//! channel 1        sin   v_i * channel 0 of layer i-1      (zero at i = -1)
//! 2 + c(2N+1) ..   relu  [x_c, y_c, ramps of h_{i+2}, spare]
//! ```
//!
//! Head `j` reads layer `j` and returns `u_j * channel 1 = Gamma_j`.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoder::{fit_two_sine, Decoder, FitBudget, TableDecoder};
use crate::encoder::{block_units, block_x, block_y, encode_coordinate, write_h_block, Affine};
use crate::error::{Error, Result};
use crate::geometry::{sup_bound, PartitionConfig};
use crate::quadrature::{CellAverageEngine, Cuboid, ProductSet};
use crate::targets::TargetFunction;
use crate::weights::{Activation, AffineLayer, LayerStack, OutputHead};

/// Levels with more cells than this are refused by [`MultigradeNet::build`].
pub const MAX_CELLS_PER_LEVEL: u64 = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum DecoderMode {
    Table,
    Sine {
        eps: f64,
        budget: FitBudget,
        fallback_to_table: bool,
    },
}

impl DecoderMode {
    pub fn sine(eps: f64) -> Self {
        DecoderMode::Sine {
            eps,
            budget: FitBudget::default(),
            fallback_to_table: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradeTerm {
    pub level: usize,
    pub decoder: Decoder,
    /// Residual cell averages `y_{l,k}`, indexed by `k - 1`.
    pub cell_values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultigradeNet {
    pub config: PartitionConfig,
    pub p: f64,
    pub mode: DecoderMode,
    pub engine: CellAverageEngine,
    pub grades: Vec<GradeTerm>,
    /// `||f||_p` over the unit cube, as integrated during the build.
    pub f_norm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_stack: Option<LayerStack>,
}

impl MultigradeNet {
    /// Run the residual recursion for levels `0..=L`.
    pub fn build(
        f: &TargetFunction,
        config: &PartitionConfig,
        p: f64,
        engine: &CellAverageEngine,
        mode: DecoderMode,
    ) -> Result<Self> {
        config.validate()?;
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::Domain(format!("p must lie in [1, inf), got {p}")));
        }
        if f.dim() != config.d {
            return Err(Error::InvalidArgument(format!(
                "target dimension {} differs from partition dimension {}",
                f.dim(),
                config.d
            )));
        }
        if let DecoderMode::Sine { eps, .. } = mode {
            if !(eps > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "decoder eps must be positive, got {eps}"
                )));
            }
        }
        let top = config.cube_count(config.depth);
        if top > MAX_CELLS_PER_LEVEL {
            return Err(Error::Config(format!(
                "{top} cells at the finest level exceed the limit of {MAX_CELLS_PER_LEVEL}"
            )));
        }
        let g = |x: &[f64]| f.eval(x);
        let abs_p = |x: &[f64]| f.eval(x).abs().powf(p);
        let f_norm = engine
            .integrate(&ProductSet::from(&Cuboid::unit(config.d)), u64::MAX, &abs_p)
            .powf(1.0 / p);

        let mut net = MultigradeNet {
            config: config.clone(),
            p,
            mode,
            engine: *engine,
            grades: Vec::with_capacity(config.depth + 1),
            f_norm,
            weight_stack: None,
        };
        for level in 0..=config.depth {
            let count = config.cube_count(level);
            let values: Vec<f64> = (1..=count)
                .into_par_iter()
                .map(|k| -> Result<f64> {
                    let beta = config.index_to_label(k, level)?;
                    let cube = config.cube(level, &beta);
                    let avg = engine.average(&cube, cell_stream(level, k), &g)?;
                    Ok(avg - net.cell_constant(level, &beta, level)?)
                })
                .collect::<Result<_>>()?;
            let decoder = match mode {
                DecoderMode::Table => Decoder::Table(TableDecoder::new(values.clone())),
                DecoderMode::Sine {
                    eps,
                    budget,
                    fallback_to_table,
                } => match fit_two_sine(&values, eps, &budget) {
                    Ok(s) => Decoder::Sine(s),
                    Err(Error::DecoderFit(_)) if fallback_to_table => {
                        Decoder::Table(TableDecoder::new(values.clone()))
                    }
                    Err(Error::DecoderFit(failure)) => {
                        return Err(Error::Fit {
                            level,
                            achieved_eps: failure.best.achieved_eps,
                            requested_eps: eps,
                            partial: Some(Box::new(net)),
                        });
                    }
                    Err(e) => return Err(e),
                },
            };
            net.grades.push(GradeTerm {
                level,
                decoder,
                cell_values: values,
            });
        }
        Ok(net)
    }

    pub fn depth(&self) -> usize {
        self.config.depth
    }

    /// Constant value of `Phi_{upto - 1}` on the cube `Q_{level,beta}`, read
    /// from the decoders along the chain of parent cubes. Zero for `upto = 0`.
    pub fn cell_constant(&self, level: usize, beta: &[u64], upto: usize) -> Result<f64> {
        let mut acc = 0.0;
        for j in 0..upto.min(self.grades.len()) {
            let shrink = self.config.scale(level - j.min(level));
            let parent: Vec<u64> = beta.iter().map(|&b| b / shrink).collect();
            let k = self.config.label_to_index(&parent, j)?;
            acc += self.grades[j].decoder.decode(k)?;
        }
        Ok(acc)
    }

    /// Value of `Phi_level` on `Q_{level,beta}`.
    pub fn readout_on_cell(&self, level: usize, beta: &[u64]) -> Result<f64> {
        self.cell_constant(level, beta, level + 1)
    }

    /// Continuous code `Lambda_level(Psi_level(x))`; equals the label `k` on interior cubes.
    pub fn code(&self, x: &[f64], level: usize) -> f64 {
        if level == 0 {
            return 1.0;
        }
        let s = self.config.scale(level) as f64;
        let mut place = s;
        let mut code = 1.0;
        for &xi in x {
            code += place * encode_coordinate(&self.config, xi, level);
            place *= s;
        }
        code
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.config.d {
            return Err(Error::Domain(format!(
                "point has dimension {}, expected {}",
                x.len(),
                self.config.d
            )));
        }
        if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Domain(format!("point {x:?} is outside [0,1]^d")));
        }
        Ok(())
    }

    fn check_level(&self, level: usize) -> Result<()> {
        if level >= self.grades.len() {
            return Err(Error::Range(format!(
                "level {level} outside 0..={}",
                self.grades.len() as isize - 1
            )));
        }
        Ok(())
    }

    /// `Gamma_level(x)`.
    pub fn correction(&self, level: usize, x: &[f64]) -> Result<f64> {
        self.check_level(level)?;
        self.check_point(x)?;
        Ok(self.grades[level].decoder.eval(self.code(x, level)))
    }

    /// `Phi_level(x) = sum_{j <= level} Gamma_j(x)`.
    pub fn readout(&self, x: &[f64], level: usize) -> Result<f64> {
        self.check_level(level)?;
        self.check_point(x)?;
        Ok((0..=level)
            .map(|j| self.grades[j].decoder.eval(self.code(x, j)))
            .sum())
    }

    /// `Phi_0(x), ..., Phi_L(x)` in one pass.
    pub fn readouts(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let mut acc = 0.0;
        Ok(self
            .grades
            .iter()
            .enumerate()
            .map(|(j, g)| {
                acc += g.decoder.eval(self.code(x, j));
                acc
            })
            .collect())
    }

    /// `M_{f,N,L,d,p}`, the bound on every `|Gamma_l|`.
    pub fn sup_bound(&self) -> f64 {
        sup_bound(self.config.d, self.config.n, self.config.depth, self.f_norm)
    }

    pub fn decoder_eps(&self) -> Vec<f64> {
        self.grades.iter().map(|g| g.decoder.eps()).collect()
    }

    /// Realize the readouts as one mixed-activation stack of width `2dN + d + 2`.
    pub fn export_weights(&self) -> Result<LayerStack> {
        if self.grades.len() != self.config.depth + 1 {
            return Err(Error::Config(format!(
                "net has {} grades but depth {} needs {}",
                self.grades.len(),
                self.config.depth,
                self.config.depth + 1
            )));
        }
        let sines = self
            .grades
            .iter()
            .map(|g| {
                g.decoder.as_sine().copied().ok_or_else(|| {
                    Error::UnsupportedMode(format!(
                        "level {} uses a table decoder; weights need fitted sine decoders",
                        g.level
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let cfg = &self.config;
        let (d, depth) = (cfg.d, cfg.depth);
        let width = shared_width(d, cfg.n);
        let block = block_units(cfg.n) + 1;
        let base = |c: usize| 2 + c * block;
        let mut acts = vec![Activation::Relu; width];
        acts[0] = Activation::Sin;
        acts[1] = Activation::Sin;

        // code_{level} as an affine form of the previous layer's units
        let code_form = |level: usize| -> Affine {
            let s = cfg.scale(level) as f64;
            let mut form = Affine::constant(1.0);
            let mut place = s;
            for c in 0..d {
                form = form.plus(&block_y(base(c), cfg, level).scaled(place));
                place *= s;
            }
            form
        };

        let mut layers = Vec::with_capacity(depth + 2);
        // i = -1
        let mut first = AffineLayer::zeros(width, d, acts.clone());
        first.bias[0] = sines[0].w;
        if depth >= 1 {
            for c in 0..d {
                write_h_block(
                    &mut first,
                    base(c),
                    cfg,
                    1,
                    &Affine::var(c),
                    &Affine::constant(0.0),
                );
            }
        }
        layers.push(first);
        for i in 0..=depth {
            let mut layer = AffineLayer::zeros(width, width, acts.clone());
            if i < depth {
                code_form(i + 1)
                    .scaled(sines[i + 1].w)
                    .write_row(&mut layer, 0);
            }
            layer.set(1, 0, sines[i].v);
            if i + 2 <= depth {
                for c in 0..d {
                    let x = block_x(base(c));
                    let y = block_y(base(c), cfg, i + 1);
                    write_h_block(&mut layer, base(c), cfg, i + 2, &x, &y);
                }
            }
            layers.push(layer);
        }
        let heads = (0..=depth)
            .map(|j| {
                let mut h = OutputHead::zeros(format!("level-{j}"), j + 1, 1, width);
                h.set(0, 1, sines[j].u);
                h
            })
            .collect();
        LayerStack::new(d, true, layers, heads)
    }

    /// Export and keep the stack inside the bundle.
    pub fn attach_weights(&mut self) -> Result<()> {
        self.weight_stack = Some(self.export_weights()?);
        Ok(())
    }

    /// Entries of all affine maps in the exported layout.
    pub fn count_parameters(&self) -> u64 {
        layout_parameter_count(self.config.d, self.config.n, self.config.depth)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let net: MultigradeNet = serde_json::from_str(s)?;
        net.config.validate()?;
        if net.grades.len() > net.config.depth + 1 {
            return Err(Error::Config("more grades than levels".into()));
        }
        Ok(net)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// `Phi_l(x)` for every head, summed from a stack produced by [`MultigradeNet::export_weights`].
pub fn stack_readouts(stack: &LayerStack, x: &[f64]) -> Result<Vec<f64>> {
    let mut acc = 0.0;
    Ok(stack
        .eval_heads(x)?
        .into_iter()
        .map(|g| {
            acc += g[0];
            acc
        })
        .collect())
}

fn cell_stream(level: usize, k: u64) -> u64 {
    ((level as u64) << 48) ^ k
}

/// `2dN + d + 2`.
pub fn shared_width(d: usize, n: u64) -> usize {
    2 * d * n as usize + d + 2
}

/// `W(d+1) + (L+1)(W+1)^2` for the exported layout of width `W`.
pub fn layout_parameter_count(d: usize, n: u64, depth: usize) -> u64 {
    let w = shared_width(d, n) as u64;
    w * (d as u64 + 1) + (depth as u64 + 1) * (w + 1) * (w + 1)
}

/// Constant `C` with `count <= C W^2 (L + 2)` for every layout.
pub const PARAMETER_CONSTANT: f64 = 2.0;

/// `m = max{1, ceil((1/alpha) log_N((2d+1) lambda / eps))}`.
pub fn depth_for_accuracy(alpha: f64, lambda: f64, d: usize, n: u64, eps: f64) -> Result<usize> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    if !(lambda > 0.0 && eps > 0.0) || n < 2 || d == 0 {
        return Err(Error::InvalidArgument(
            "need lambda > 0, eps > 0, N >= 2, d >= 1".into(),
        ));
    }
    let ratio = (2 * d + 1) as f64 * lambda / eps;
    let raw = ratio.ln() / (n as f64).ln() / alpha;
    // absorb rounding when the ratio is an exact power of N
    let snapped = if (raw - raw.round()).abs() < 1e-9 {
        raw.round()
    } else {
        raw
    };
    Ok((snapped.ceil().max(1.0)) as usize)
}
