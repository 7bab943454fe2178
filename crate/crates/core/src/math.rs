//! Float helpers routed through `libm` so the crate builds without `std`.

pub(crate) use libm::{asin, atan2, cos, floor, log, sin, sqrt};

use core::f64::consts::PI;

/// Wraps an angle into `(-pi, pi]`.
pub(crate) fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut r = a - two_pi * floor((a + PI) / two_pi);
    // floor maps the -pi boundary to -pi; the interval is half-open at -pi
    if r <= -PI {
        r += two_pi;
    }
    if r > PI {
        r -= two_pi;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_angle_half_open_interval() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(0.5) - 0.5).abs() < 1e-15);
        assert!((wrap_angle(-0.5 - 4.0 * PI) + 0.5).abs() < 1e-12);
    }
}
