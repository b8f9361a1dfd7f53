//! Self-similar expanding solutions of mean curvature flow asymptotic to
//! minimal cones over LOMSE maps.

pub mod barrier;
pub mod dynamics;
pub mod integrator;
pub mod params;
pub mod solver;
pub mod stable_curve;
