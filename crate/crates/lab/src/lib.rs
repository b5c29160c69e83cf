//! Experiment harness for the CO-OFDM PAPR-reduction lab: configuration,
//! seeded CCDF and BER-vs-OSNR sweeps, CSV/SVG emission and the `coofdm`
//! command-line interface.

pub mod config;
pub mod emit;
pub mod experiments;
