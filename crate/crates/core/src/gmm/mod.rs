//! Structural estimation of switching costs from contract data.

pub mod counterfactual;
pub mod estimate;
pub mod model;
pub mod moments;
pub mod observation;
pub mod optimize;
pub mod params;
pub mod report;

pub use counterfactual::{counterfactual_margins, AverageContract, CounterfactualReport, Scenario};
pub use estimate::{estimate, EstimationConfig, GmmResult, WeightProvenance};
pub use model::{forward_b, horizon_weights, predicted_price, recover_sigma, residuals, switching_cost, Residuals};
pub use moments::{stack_moments, InstrumentScheme, MomentData};
pub use observation::{Dataset, Forward, Observation, DEFAULT_INSTRUMENTS};
pub use params::StructuralParams;
pub use report::ResultsTable;
