//! Plane-wave scattering by a rigid sphere.
//!
//! Time convention `e^{+iωt}`: a pure delay τ is `exp(-iωτ)` and the
//! outgoing spherical Hankel function is `h_n^{(2)} = j_n - i y_n`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::geometry::{dot, Direction};

pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;

/// Truncation order used for a given `k·r`.
pub fn truncation_order(kr: f64) -> usize {
    kr.ceil() as usize + 10
}

/// Spherical Bessel functions `j_0..=j_n` at `x > 0` by Miller's downward
/// recurrence.
pub fn spherical_jn(n: usize, x: f64) -> Vec<f64> {
    assert!(x > 0.0, "spherical_jn needs x > 0");
    let start = n + 20 + x.ceil() as usize + (x.sqrt() * 4.0) as usize;
    let mut vals = vec![0.0; start + 2];
    vals[start] = 1.0;
    for k in (1..=start).rev() {
        vals[k - 1] = (2 * k + 1) as f64 / x * vals[k] - vals[k + 1];
        if vals[k - 1].abs() > 1e100 {
            for v in vals[k - 1..].iter_mut() {
                *v *= 1e-100;
            }
        }
    }
    // Σ (2k+1) j_k² = 1 fixes the magnitude; the sign comes from whichever
    // of j_0, j_1 is better conditioned
    let norm: f64 = vals
        .iter()
        .enumerate()
        .map(|(k, v)| (2 * k + 1) as f64 * v * v)
        .sum::<f64>()
        .sqrt();
    let j0 = x.sin() / x;
    let j1 = x.sin() / (x * x) - x.cos() / x;
    let sign = if j0.abs() >= j1.abs() {
        j0.signum() * vals[0].signum()
    } else {
        j1.signum() * vals[1].signum()
    };
    let scale = sign / norm;
    vals.truncate(n + 1);
    vals.iter_mut().for_each(|v| *v *= scale);
    vals
}

/// Spherical Neumann functions `y_0..=y_n` by upward recurrence.
pub fn spherical_yn(n: usize, x: f64) -> Vec<f64> {
    assert!(x > 0.0, "spherical_yn needs x > 0");
    let mut vals = Vec::with_capacity(n + 1);
    vals.push(-x.cos() / x);
    if n >= 1 {
        vals.push(-x.cos() / (x * x) - x.sin() / x);
    }
    for k in 1..n {
        let next = (2 * k + 1) as f64 / x * vals[k] - vals[k - 1];
        vals.push(next);
    }
    vals
}

/// Derivatives from `f_n' = f_{n-1} - (n+1)/x f_n`, with `f_0' = -f_1`.
/// `vals` must hold orders `0..=n+1`.
fn derivatives(vals: &[f64], n: usize, x: f64) -> Vec<f64> {
    (0..=n)
        .map(|k| {
            if k == 0 {
                -vals[1]
            } else {
                vals[k - 1] - (k + 1) as f64 / x * vals[k]
            }
        })
        .collect()
}

/// Legendre polynomials `P_0..=P_n` at `x`.
pub fn legendre(n: usize, x: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(n + 1);
    p.push(1.0);
    if n >= 1 {
        p.push(x);
    }
    for k in 1..n {
        let next = ((2 * k + 1) as f64 * x * p[k] - k as f64 * p[k - 1]) / (k + 1) as f64;
        p.push(next);
    }
    p
}

/// Modal coefficients `i^n (2n+1) b_n(kr)` of the surface pressure for one
/// value of `k·r`. The response to a unit plane wave at angle Θ between the
/// observation point and the arrival direction is `Σ coeff_n P_n(cos Θ)`.
#[derive(Debug, Clone)]
pub struct SphereModes {
    coeffs: Vec<Complex64>,
}

impl SphereModes {
    pub fn new(kr: f64) -> Self {
        Self::with_order(kr, truncation_order(kr))
    }

    pub fn with_order(kr: f64, order: usize) -> Self {
        if kr <= 0.0 {
            // long-wavelength limit: only the monopole survives, b_0 -> 1
            return Self {
                coeffs: vec![Complex64::new(1.0, 0.0)],
            };
        }
        let j = spherical_jn(order + 1, kr);
        let y = spherical_yn(order + 1, kr);
        let dj = derivatives(&j, order, kr);
        let dy = derivatives(&y, order, kr);
        let mut i_pow = Complex64::new(1.0, 0.0);
        let coeffs = (0..=order)
            .map(|n| {
                let dh = Complex64::new(dj[n], -dy[n]);
                let b = Complex64::new(0.0, -1.0) / (dh * (kr * kr));
                let c = i_pow * (2 * n + 1) as f64 * b;
                i_pow *= Complex64::i();
                c
            })
            .collect();
        Self { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn response(&self, cos_angle: f64) -> Complex64 {
        let x = cos_angle.clamp(-1.0, 1.0);
        let mut p_prev = 1.0;
        let mut p = x;
        let mut acc = self.coeffs[0];
        for (n, c) in self.coeffs.iter().enumerate().skip(1) {
            acc += c * p;
            let next = ((2 * n + 1) as f64 * x * p - n as f64 * p_prev) / (n + 1) as f64;
            p_prev = p;
            p = next;
        }
        acc
    }
}

/// Rigid spherical microphone array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub radius: f64,
    pub mic_directions: Vec<Direction>,
    /// Rigid azimuthal rotation applied to every microphone, degrees.
    #[serde(default)]
    pub yaw_deg: f64,
}

impl Default for ArrayGeometry {
    fn default() -> Self {
        Self::semicircle(6, 0.10)
    }
}

impl ArrayGeometry {
    /// `m` microphones on the horizontal great circle from azimuth +90 to
    /// -90 degrees.
    pub fn semicircle(m: usize, radius: f64) -> Self {
        let mic_directions = (0..m)
            .map(|i| {
                let phi = if m == 1 {
                    0.0
                } else {
                    90.0 - 180.0 * i as f64 / (m - 1) as f64
                };
                Direction::horizontal(phi)
            })
            .collect();
        Self {
            radius,
            mic_directions,
            yaw_deg: 0.0,
        }
    }

    pub fn mic_count(&self) -> usize {
        self.mic_directions.len()
    }

    pub fn with_yaw(&self, yaw_deg: f64) -> Self {
        Self {
            yaw_deg,
            ..self.clone()
        }
    }

    /// Microphone directions after applying the yaw.
    pub fn world_mic_directions(&self) -> Vec<Direction> {
        self.mic_directions
            .iter()
            .map(|d| d.rotated_azimuth(self.yaw_deg))
            .collect()
    }

    pub(crate) fn world_mic_units(&self) -> Vec<[f64; 3]> {
        self.world_mic_directions().iter().map(|d| d.unit()).collect()
    }
}

/// Per-frequency responses of every microphone to a plane wave arriving
/// from `direction`, shape `[freq][mic]`.
pub fn rigid_sphere_steering(
    geom: &ArrayGeometry,
    direction: &Direction,
    freqs: &[f64],
    speed_of_sound: f64,
) -> Vec<Vec<Complex64>> {
    let mics = geom.world_mic_units();
    let u = direction.unit();
    freqs
        .iter()
        .map(|&f| {
            let modes = SphereModes::new(2.0 * std::f64::consts::PI * f * geom.radius / speed_of_sound);
            mics.iter().map(|m| modes.response(dot(*m, u))).collect()
        })
        .collect()
}

/// Steering matrices `V(k)` on a frequency grid, each `M × D` row-major.
#[derive(Debug, Clone)]
pub struct SteeringSet {
    pub freqs: Vec<f64>,
    pub mics: usize,
    pub directions: usize,
    /// `[bin][mic * directions + dir]`
    pub matrices: Vec<Vec<Complex64>>,
}

impl SteeringSet {
    pub fn new(
        geom: &ArrayGeometry,
        directions: &[Direction],
        freqs: &[f64],
        speed_of_sound: f64,
    ) -> Self {
        use rayon::prelude::*;
        let mics = geom.world_mic_units();
        let dirs: Vec<[f64; 3]> = directions.iter().map(|d| d.unit()).collect();
        let matrices = freqs
            .par_iter()
            .map(|&f| {
                let modes =
                    SphereModes::new(2.0 * std::f64::consts::PI * f * geom.radius / speed_of_sound);
                let mut v = Vec::with_capacity(mics.len() * dirs.len());
                for m in &mics {
                    for d in &dirs {
                        v.push(modes.response(dot(*m, *d)));
                    }
                }
                v
            })
            .collect();
        Self {
            freqs: freqs.to_vec(),
            mics: mics.len(),
            directions: dirs.len(),
            matrices,
        }
    }

    pub fn get(&self, bin: usize, mic: usize, dir: usize) -> Complex64 {
        self.matrices[bin][mic * self.directions + dir]
    }
}
