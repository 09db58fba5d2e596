//! Head-related transfer functions: measured sets, the analytic spherical
//! head, rotated lookup and conversion to STFT bins.

mod analytic;
mod pack;
mod set;

pub use analytic::{analytic_sphere_hrtf, AnalyticHrtf, DEFAULT_HEAD_RADIUS};
pub use pack::{load_hrir_pack, read_hrir_pack, write_hrir_pack, HRIR_PACK_VERSION};
pub use set::HrtfSet;

use num_complex::Complex64;
use rayon::prelude::*;
use realfft::RealFftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Direction;
use crate::signal::StftConfig;

/// Left and right impulse responses of one direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrPair {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

/// Direction of arrival plus a rightward head rotation in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HrtfQuery {
    pub doa: Direction,
    pub rotation_deg: f64,
}

impl HrtfQuery {
    pub fn new(doa: Direction, rotation_deg: f64) -> Self {
        Self { doa, rotation_deg }
    }

    /// Direction relative to the rotated head. A head turned right by φ_rot
    /// sees a source at azimuth φ at φ + φ_rot.
    pub fn rotated(&self) -> Direction {
        self.doa.rotated_azimuth(self.rotation_deg)
    }
}

/// Result of resolving a query against an HRTF source.
#[derive(Debug, Clone, PartialEq)]
pub struct Lookup {
    pub pair: IrPair,
    /// Direction the returned responses belong to.
    pub direction: Direction,
    /// Grid index for tabulated sets.
    pub index: Option<usize>,
    /// Great-circle distance between the requested and returned direction.
    pub error_deg: f64,
}

/// Anything that can produce HRIR pairs for rotated queries.
pub trait HrtfProvider: Send + Sync {
    fn name(&self) -> String;

    fn sample_rate(&self) -> u32;

    fn lookup(&self, query: &HrtfQuery) -> Result<Lookup>;
}

/// Zero-padded DFT of an IR pair on the STFT bin grid.
pub fn hrtf_to_bins(pair: &IrPair, cfg: &StftConfig) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let n = cfg.fft_len;
    let len = pair.left.len().max(pair.right.len());
    if len > n {
        return Err(Error::IrTooLong { len, fft_len: n });
    }
    let mut planner = RealFftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let run = |ir: &[f64]| {
        let mut buf = vec![0.0; n];
        buf[..ir.len()].copy_from_slice(ir);
        let mut out = fft.make_output_vec();
        fft.process(&mut buf, &mut out)
            .expect("fft buffer sizes are fixed by the plan");
        out
    };
    Ok((run(&pair.left), run(&pair.right)))
}

/// HRTFs of every design direction on the STFT bin grid, `[bin][dir]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HrtfTargets {
    pub left: Vec<Vec<Complex64>>,
    pub right: Vec<Vec<Complex64>>,
    pub rotation_deg: f64,
    /// Largest lookup error over the design directions, degrees.
    pub max_lookup_error_deg: f64,
    /// Resolved grid indices (tabulated providers only).
    pub indices: Vec<Option<usize>>,
}

impl HrtfTargets {
    pub fn n_bins(&self) -> usize {
        self.left.len()
    }

    pub fn n_directions(&self) -> usize {
        self.left.first().map_or(0, |r| r.len())
    }
}

/// Looks up every design direction with the given head rotation and
/// transforms the responses to bins.
pub fn design_targets(
    provider: &dyn HrtfProvider,
    directions: &[Direction],
    rotation_deg: f64,
    cfg: &StftConfig,
) -> Result<HrtfTargets> {
    if provider.sample_rate() != cfg.sample_rate {
        return Err(Error::SampleRateMismatch {
            expected: cfg.sample_rate,
            actual: provider.sample_rate(),
        });
    }
    let per_dir: Vec<(Vec<Complex64>, Vec<Complex64>, f64, Option<usize>)> = directions
        .par_iter()
        .map(|d| {
            let l = provider.lookup(&HrtfQuery::new(*d, rotation_deg))?;
            let (hl, hr) = hrtf_to_bins(&l.pair, cfg)?;
            Ok((hl, hr, l.error_deg, l.index))
        })
        .collect::<Result<_>>()?;
    let n_bins = cfg.n_bins();
    let mut left = vec![Vec::with_capacity(directions.len()); n_bins];
    let mut right = vec![Vec::with_capacity(directions.len()); n_bins];
    let mut max_err: f64 = 0.0;
    let mut indices = Vec::with_capacity(directions.len());
    for (hl, hr, err, idx) in &per_dir {
        for k in 0..n_bins {
            left[k].push(hl[k]);
            right[k].push(hr[k]);
        }
        max_err = max_err.max(*err);
        indices.push(*idx);
    }
    Ok(HrtfTargets {
        left,
        right,
        rotation_deg,
        max_lookup_error_deg: max_err,
        indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn unit_impulse_is_flat() {
        let cfg = StftConfig::default();
        let mut ir = vec![0.0; 128];
        ir[0] = 1.0;
        let (l, _) = hrtf_to_bins(&IrPair { left: ir.clone(), right: ir }, &cfg).unwrap();
        assert_eq!(l.len(), 513);
        for z in l {
            assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn delayed_impulse_has_linear_phase() {
        let cfg = StftConfig::default();
        let d = 7;
        let mut ir = vec![0.0; 128];
        ir[d] = 1.0;
        let (l, _) = hrtf_to_bins(&IrPair { left: ir.clone(), right: ir }, &cfg).unwrap();
        for (k, z) in l.iter().enumerate() {
            let f = cfg.bin_frequency(k);
            let expect = Complex64::from_polar(1.0, -2.0 * PI * f * d as f64 / 16000.0);
            assert!((z.norm() - 1.0).abs() < 1e-12);
            assert!((z - expect).norm() < 1e-10);
        }
    }

    #[test]
    fn random_ir_matches_direct_dft() {
        let cfg = StftConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ir: Vec<f64> = (0..128).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (l, _) = hrtf_to_bins(&IrPair { left: ir.clone(), right: ir.clone() }, &cfg).unwrap();
        for k in (0..513).step_by(37) {
            let direct: Complex64 = ir
                .iter()
                .enumerate()
                .map(|(n, x)| Complex64::from_polar(*x, -2.0 * PI * (k * n) as f64 / 1024.0))
                .sum();
            assert!((l[k] - direct).norm() < 1e-10, "bin {k}");
        }
    }

    #[test]
    fn long_ir_rejected() {
        let cfg = StftConfig::default();
        let pair = IrPair { left: vec![0.0; 1025], right: vec![0.0; 1025] };
        assert!(matches!(hrtf_to_bins(&pair, &cfg), Err(Error::IrTooLong { .. })));
    }
}
