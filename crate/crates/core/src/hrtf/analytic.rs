use std::f64::consts::PI;

use num_complex::Complex64;
use realfft::RealFftPlanner;

use super::{HrtfProvider, HrtfQuery, HrtfSet, IrPair, Lookup};
use crate::acoustics::{band_edge_taper, SphereModes, DEFAULT_SPEED_OF_SOUND};
use crate::error::Result;
use crate::geometry::Direction;

pub const DEFAULT_HEAD_RADIUS: f64 = 0.0875;

const LEFT_EAR: Direction = Direction::new(90.0, 90.0);
const RIGHT_EAR: Direction = Direction::new(90.0, -90.0);

/// Rigid-sphere head response at both ears, `(left, right)` per frequency.
/// Phase is referenced to the head centre.
pub fn analytic_sphere_hrtf(
    direction: &Direction,
    head_radius: f64,
    freqs: &[f64],
    speed_of_sound: f64,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let cl = LEFT_EAR.cos_angle_to(direction);
    let cr = RIGHT_EAR.cos_angle_to(direction);
    freqs
        .iter()
        .map(|&f| {
            let modes = SphereModes::new(2.0 * PI * f * head_radius / speed_of_sound);
            (modes.response(cl), modes.response(cr))
        })
        .unzip()
}

/// Spherical-head HRIR generator, evaluated at any direction without a grid.
#[derive(Debug, Clone)]
pub struct AnalyticHrtf {
    head_radius: f64,
    sample_rate: u32,
    ir_len: usize,
    /// Samples of delay added so the ipsilateral ear's advance stays causal.
    bulk_delay: usize,
    design_len: usize,
    modes: Vec<SphereModes>,
}

impl Default for AnalyticHrtf {
    fn default() -> Self {
        Self::new(DEFAULT_HEAD_RADIUS, 16_000)
    }
}

impl AnalyticHrtf {
    pub fn new(head_radius: f64, sample_rate: u32) -> Self {
        let ir_len = 128;
        let design_len = 2 * ir_len;
        let modes = (0..=design_len / 2)
            .map(|k| {
                let f = k as f64 * sample_rate as f64 / design_len as f64;
                SphereModes::new(2.0 * PI * f * head_radius / DEFAULT_SPEED_OF_SOUND)
            })
            .collect();
        Self {
            head_radius,
            sample_rate,
            ir_len,
            bulk_delay: 32,
            design_len,
            modes,
        }
    }

    pub fn head_radius(&self) -> f64 {
        self.head_radius
    }

    pub fn ir_len(&self) -> usize {
        self.ir_len
    }

    pub fn bulk_delay(&self) -> usize {
        self.bulk_delay
    }

    /// IR pair for a head-relative direction.
    pub fn impulse_responses(&self, direction: &Direction) -> IrPair {
        let n = self.design_len;
        let cl = LEFT_EAR.cos_angle_to(direction);
        let cr = RIGHT_EAR.cos_angle_to(direction);
        let mut planner = RealFftPlanner::<f64>::new();
        let ifft = planner.plan_fft_inverse(n);
        let fade = 16.min(self.ir_len);
        let make = |c: f64| {
            let mut spec: Vec<Complex64> = self
                .modes
                .iter()
                .enumerate()
                .map(|(k, m)| {
                    let f = k as f64 * self.sample_rate as f64 / n as f64;
                    let shift =
                        Complex64::from_polar(1.0, -2.0 * PI * (k * self.bulk_delay) as f64 / n as f64);
                    m.response(c) * shift * band_edge_taper(f, self.sample_rate)
                })
                .collect();
            spec[0].im = 0.0;
            spec[n / 2].im = 0.0;
            let mut out = vec![0.0; n];
            ifft.process(&mut spec, &mut out)
                .expect("fft buffer sizes are fixed by the plan");
            let mut ir: Vec<f64> = out[..self.ir_len].iter().map(|x| x / n as f64).collect();
            for i in 0..fade {
                let w = 0.5 + 0.5 * (PI * (i + 1) as f64 / (fade + 1) as f64).cos();
                ir[self.ir_len - fade + i] *= w;
            }
            ir
        };
        IrPair {
            left: make(cl),
            right: make(cr),
        }
    }

    /// Tabulates the model on a grid, e.g. to write an HRIR pack.
    pub fn to_set(&self, grid: &[Direction]) -> Result<HrtfSet> {
        let irs = grid.iter().map(|d| self.impulse_responses(d)).collect();
        HrtfSet::new(grid.to_vec(), irs, self.sample_rate)
    }
}

impl HrtfProvider for AnalyticHrtf {
    fn name(&self) -> String {
        "analytic".into()
    }

    fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    fn lookup(&self, query: &HrtfQuery) -> Result<Lookup> {
        let direction = query.rotated();
        Ok(Lookup {
            pair: self.impulse_responses(&direction),
            direction,
            index: None,
            error_deg: 0.0,
        })
    }
}
