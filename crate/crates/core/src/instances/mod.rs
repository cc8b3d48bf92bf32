//! Concrete actions: the germ action with a base point, and the small-divisor
//! right inverse on Fourier scales.

pub mod cohomological;
pub mod germ;

pub use cohomological::{
    build_cohomological_j, diophantine_margin, scan_loss_exponent, small_divisor, CohomologicalInverse, CohomologicalJ,
    DiophantineSpec, LossExponentScan,
};
pub use germ::{
    build_germ_instance, reversion_oracle, GermAction, GermActionSpec, GermInstance, MeasurementConfig,
    MeasurementReport,
};
