//! Spherical directions in the toolkit's coordinate convention.
//!
//! `theta` is the polar angle measured down from +z, `phi` the azimuth
//! measured from +x toward +y. Both are stored in degrees. The horizontal
//! plane is `theta = 90`, the frontal direction `(90, 0)`, the listener's
//! left `(90, 90)`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub theta_deg: f64,
    pub phi_deg: f64,
}

impl Direction {
    pub const fn new(theta_deg: f64, phi_deg: f64) -> Self {
        Self { theta_deg, phi_deg }
    }

    pub const fn horizontal(phi_deg: f64) -> Self {
        Self::new(90.0, phi_deg)
    }

    /// Cartesian unit vector.
    pub fn unit(&self) -> [f64; 3] {
        let (st, ct) = self.theta_deg.to_radians().sin_cos();
        let (sp, cp) = self.phi_deg.to_radians().sin_cos();
        [st * cp, st * sp, ct]
    }

    /// Direction of a (not necessarily normalized) nonzero vector.
    pub fn from_vector(v: [f64; 3]) -> Self {
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let theta = (v[2] / r).clamp(-1.0, 1.0).acos().to_degrees();
        let phi = v[1].atan2(v[0]).to_degrees();
        Self::new(theta, wrap_degrees(phi))
    }

    /// Azimuthal rotation by `deg` (counter-clockwise seen from +z).
    pub fn rotated_azimuth(&self, deg: f64) -> Self {
        Self::new(self.theta_deg, wrap_degrees(self.phi_deg + deg))
    }

    /// Same direction with `phi` wrapped to [-180, 180).
    pub fn normalized(&self) -> Self {
        Self::new(self.theta_deg, wrap_degrees(self.phi_deg))
    }

    pub fn cos_angle_to(&self, other: &Direction) -> f64 {
        dot(self.unit(), other.unit()).clamp(-1.0, 1.0)
    }

    /// Great-circle distance in degrees.
    pub fn angle_to(&self, other: &Direction) -> f64 {
        // atan2 of cross/dot keeps precision for tiny angles
        let a = self.unit();
        let b = other.unit();
        let c = cross(a, b);
        let s = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
        s.atan2(dot(a, b)).to_degrees()
    }
}

/// Wraps an angle in degrees to [-180, 180).
pub fn wrap_degrees(deg: f64) -> f64 {
    let w = (deg + 180.0).rem_euclid(360.0) - 180.0;
    if w >= 180.0 {
        w - 360.0
    } else {
        w
    }
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Near-uniform spherical grid of `n` points on a golden-angle spiral.
pub fn fibonacci_grid(n: usize) -> Vec<Direction> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let a = golden * i as f64;
            Direction::from_vector([r * a.cos(), r * a.sin(), z])
        })
        .collect()
}

/// Ring of `n` equally spaced horizontal directions starting at azimuth 0.
pub fn azimuth_ring(n: usize) -> Vec<Direction> {
    (0..n)
        .map(|i| Direction::horizontal(wrap_degrees(360.0 * i as f64 / n as f64)))
        .collect()
}
