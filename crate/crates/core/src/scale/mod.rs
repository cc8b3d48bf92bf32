//! Scaled spaces realized as truncated series with analytic weighted norms.

mod operator;
mod series;
pub mod text;

pub use operator::{
    measure_operator_norm, measure_operator_norms, verify_linearity, BoundedOperatorEstimate, FnOperator, GridPoint,
    LinearOperator, ScaleGrid, LINEARITY_TOLERANCE,
};
pub use text::{read_series, write_series};
pub use series::{ScaleIndex, ScaledSeries, SeriesKind, FOURIER_WIDTH, INVERTIBILITY_THRESHOLD};
