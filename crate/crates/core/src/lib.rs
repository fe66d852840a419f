//! Max-min SINR beamforming for amplify-and-forward relays in an underlay
//! cognitive radio network.
//!
//! Secondary transmitter/receiver pairs share the band of a primary link.
//! A bank of relays forwards everything it hears; the relay weights are
//! chosen to maximize the weakest secondary SINR while keeping the
//! interference at the primary receiver under a cap and the total relay
//! power under a budget. Each target SINR is tested with a second-order cone
//! program and the best target is found by bisection.
//!
//! ```
//! use relay_beamform_core::{optimizer, scenario, signal};
//!
//! let config = scenario::ScenarioConfig { seed: 3, ..scenario::ScenarioConfig::new(4, 2) };
//! let channels = scenario::sample_channels(&config);
//! let forms = signal::forms_for(&config, &channels).unwrap();
//! let sol = optimizer::maximize_min_sinr(
//!     &forms,
//!     config.interference_cap,
//!     config.power_budget,
//!     &optimizer::SolverSettings::default(),
//! )
//! .unwrap();
//! assert!(sol.gamma_star > 0.0);
//! ```

pub mod error;
pub mod harness;
pub mod optimizer;
pub mod scenario;
pub mod signal;
pub mod socp;
pub mod units;

pub use error::{Error, Result};
pub use optimizer::{maximize_min_sinr, BeamSolution, SolverSettings};
pub use scenario::{ChannelSet, ScenarioConfig};
pub use signal::{BeamVector, ReceiverForms};
