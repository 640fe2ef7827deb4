//! Constructive multigrade networks with mixed sine/ReLU activation.
//!
//! A target `f` on `[0,1]^d` is approximated level by level: level `l` splits
//! the cube into `N^{dl}` interior cubes separated by gaps of width `delta`,
//! a ReLU encoder maps each cube to an integer code, and a two-sine decoder
//! (or an exact table) returns the residual cell average for that code. The
//! readout after level `l` is the sum of the first `l + 1` correction terms.

pub mod analysis;
pub mod decoder;
pub mod encoder;
pub mod error;
pub mod geometry;
pub mod multigrade;
pub mod quadrature;
pub mod targets;
pub mod weights;

pub use analysis::{
    box_rescale_verify, check_oscillation_inequality, estimate_modulus, lp_norm,
    piecewise_average_diagnostic, verify_bounds, BoundMode, BoundReport, ModulusEstimate,
    SamplingPlan,
};
pub use decoder::{fit_two_sine, Decoder, FitBudget, FitFailure, SineDecoder, TableDecoder};
pub use encoder::{build_encoder_weights, encode, StepProxy};
pub use error::{Error, Result};
pub use geometry::{choose_delta, PartitionConfig};
pub use multigrade::{depth_for_accuracy, DecoderMode, GradeTerm, MultigradeNet};
pub use quadrature::{CellAverageEngine, Cuboid};
pub use targets::{catalog, load_target, lookup, TargetFunction, TargetSpec};
pub use weights::LayerStack;
