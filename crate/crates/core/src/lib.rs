//! MRI RF pulse design: Bloch simulation, adjoint gradients, reward functions,
//! conventional designers (SLR, adiabatic), gradient-ascent refinement, a
//! recurrent policy-gradient pulse generator and profile analysis.

pub mod analysis;
pub mod conventional;
pub mod drl;
pub mod error;
pub mod grad;
pub mod io;
pub mod profile;
pub mod pulse;
pub mod refine;
pub mod rewards;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use grad::{reward_gradient, Parameterization, PulseGradient};
pub use profile::{EvalGrid, MagnetizationProfile, SpinTrajectory};
pub use pulse::RfPulse;
pub use refine::{refine_pulses, AdamConfig, RefineConfig, RefineReport};
pub use rewards::{evaluate_reward, RewardKind, RewardSpec};
pub use scalar::{Scalar, GAMMA_HZ_PER_GAUSS};
pub use sim::{pulse_energy, simulate_profile, simulate_trajectory};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type RfPulse64 = RfPulse<f64>;
pub type RfPulse32 = RfPulse<f32>;
pub type EvalGrid64 = EvalGrid<f64>;
pub type EvalGrid32 = EvalGrid<f32>;
pub type Profile64 = MagnetizationProfile<f64>;
pub type Profile32 = MagnetizationProfile<f32>;
pub type Trajectory64 = SpinTrajectory<f64>;
pub type Gradient64 = PulseGradient<f64>;
