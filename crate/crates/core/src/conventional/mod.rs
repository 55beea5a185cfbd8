//! Conventional baselines: SLR and adiabatic pulses.

pub mod adiabatic;
pub mod fir;
pub mod grid_search;
pub mod slr;

pub use adiabatic::{adiabatic_pulse, AdiabaticParams, AdiabaticShape};
pub use grid_search::{adiabatic_grid_search, target_region, ParamAxis, SearchRanges, SearchResult};
pub use slr::{design_slr, forward_slr, FirFilter, SlrSpec};
