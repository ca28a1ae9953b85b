//! Contract data: service mix, costs and margins, portability timing,
//! market series and synthetic samples.

pub mod contract;
pub mod costs;
pub mod market;
pub mod portability;
pub mod synth;
pub mod weights;

pub use contract::{derive_contract, load_contracts, save_contracts, DeriveConfig, DerivedContract, TariffOption};
pub use costs::CostTable;
pub use market::{default_retention, load_market_series, MarketSeries};
pub use portability::{portability_vars, PortabilityTimeline, PortabilityVars};
pub use synth::{synthesize_dataset, SynthConfig};
pub use weights::{solve_weights, ServiceWeights, WeightScheme};
