//! Numerical library for the four Euler-Maruyama discretizations of the
//! uncorrelated Hull-White (lognormal) stochastic volatility model
//!
//! ```text
//!     dS_t = sigma_t S_t dW_t,      dsigma_t = omega sigma_t dZ_t,
//! ```
//!
//! simulated on a uniform grid with n steps of size tau. Each of asset and
//! volatility may be updated with either an Euler or a log-Euler step, giving
//! four schemes. The library computes, analytically and by simulation:
//!
//! * moment Lyapunov exponents lambda(rho, beta; q) = lim (1/n) log E[(S_n)^q]
//!   in the scaling regime rho = sigma0 sqrt(tau), beta = omega^2 n^2 tau / 2;
//! * the phase-transition curves beta_cr(rho) and critical points (rho_c, beta_c)
//!   where the growth rate of the moments switches branches ("moment explosion");
//! * exact finite-n moments E[(S_n)^q] for the Euler-log-Euler scheme;
//! * law-of-large-numbers slopes and central-limit variances of log|S_n|;
//! * reproducible parallel Monte Carlo estimates cross-checking all of the above.

pub mod error;
pub mod exact_moments;
pub mod limit_laws;
pub mod lyapunov_euler;
pub mod lyapunov_lognormal;
pub mod mc_engine;
pub mod numerics;
pub mod params;
pub mod rate_functions;
pub mod schemes;

pub use error::{Error, Result};
pub use lyapunov_euler::{LyapunovResult, PhaseCurve};
pub use mc_engine::{Estimate, McConfig};
pub use params::{ModelParams, Regime, Scaling};
pub use schemes::SchemeKind;
