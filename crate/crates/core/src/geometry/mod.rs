//! Curves `t ↦ (u(t), v(t))` with their germ at the maximum of `u`, and
//! angular densities on `[0, 1]`.

mod angular;
mod curve;

pub use angular::{AngularLaw, PowerAngular, TabulatedAngular};
pub use curve::{elliptical_curve, loglog_slope, lp_curve, power_curve, CurveGerm, CurveSpec, Side};
