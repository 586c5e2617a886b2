//! Energy-aware trajectory planning for fixed-wing gliders.
//!
//! Trajectories are composite Bernstein polynomials in flat-output
//! (position) space. The planner shapes them under heading-rate, ground
//! speed, sink-rate and obstacle constraints; the simulator flies them in a
//! point-mass model with wind while a netto variometer estimates air mass
//! motion.

pub mod autodiff;
pub mod bernstein;
pub mod aero;
pub mod flatness;
pub mod dubins;
pub mod planner;
pub mod simulator;
pub mod mission;
