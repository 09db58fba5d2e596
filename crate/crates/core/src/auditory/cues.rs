use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::filters::{dc_blocked_gammatone, Biquad};
use super::{AuditoryConfig, BandSignals, IldSmoothing, EPS, ITF_FLOOR};

/// ILD of one band from the compressed complex signals: both sides are
/// smoothed by the Butterworth low-pass, then de-compressed in the log.
pub fn ild_band(left: &[Complex64], right: &[Complex64], sample_rate: u32, cfg: &AuditoryConfig) -> Vec<f64> {
    let lp = Biquad::butter2_lowpass(cfg.ild_cutoff_hz, sample_rate as f64);
    let smooth = |x: &[Complex64]| -> Vec<f64> {
        match cfg.ild_smoothing {
            IldSmoothing::Complex => {
                let mut a = x.to_vec();
                lp.run(&mut a);
                a.iter().map(|v| v.norm()).collect()
            }
            IldSmoothing::Envelope => {
                let mut a: Vec<f64> = x.iter().map(|v| v.norm()).collect();
                lp.run(&mut a);
                a.iter().map(|v| v.abs()).collect()
            }
        }
    };
    let scale = 20.0 / cfg.compression_exp;
    smooth(left)
        .iter()
        .zip(&smooth(right))
        .map(|(l, r)| scale * (r.max(EPS) / l.max(EPS)).log10())
        .collect()
}

pub fn extract_ild(
    left: &BandSignals,
    right: &BandSignals,
    sample_rate: u32,
    cfg: &AuditoryConfig,
) -> Vec<Vec<f64>> {
    left.bands
        .par_iter()
        .zip(&right.bands)
        .map(|(l, r)| ild_band(l, r, sample_rate, cfg))
        .collect()
}

/// Interaural transfer function `g_l · conj(g_r)` per band, where `g` is a
/// second, DC-blocked gammatone pass over the hair-cell output.
pub fn extract_itf(
    left_hc: &[Vec<f64>],
    right_hc: &[Vec<f64>],
    centers: &[f64],
    sample_rate: u32,
    cfg: &AuditoryConfig,
) -> Vec<Vec<Complex64>> {
    centers
        .par_iter()
        .zip(left_hc.par_iter().zip(right_hc))
        .map(|(&fc, (l, r))| {
            let fs = sample_rate as f64;
            let gl = dc_blocked_gammatone(fc, cfg.itf_gammatone_order, fs, l);
            let gr = dc_blocked_gammatone(fc, cfg.itf_gammatone_order, fs, r);
            gl.iter().zip(&gr).map(|(a, b)| a * b.conj()).collect()
        })
        .collect()
}

/// `arg(itf)` in (-π, π]; 0 where the ITF is below the floor.
pub fn ipd_sample(itf: Complex64) -> f64 {
    if itf.norm() <= ITF_FLOOR {
        return 0.0;
    }
    let a = itf.arg();
    if a <= -PI {
        PI
    } else {
        a
    }
}

pub fn extract_ipd(itf: &[Vec<Complex64>], n_bands: usize) -> Vec<Vec<f64>> {
    itf.iter()
        .take(n_bands)
        .map(|b| b.iter().map(|z| ipd_sample(*z)).collect())
        .collect()
}

/// Interaural vector strength with exponential integration over
/// `tau_cycles / fc` seconds.
pub fn ivs_band(itf: &[Complex64], fc: f64, sample_rate: u32, tau_cycles: f64) -> Vec<f64> {
    let decay = (-fc / (tau_cycles * sample_rate as f64)).exp();
    let mut num = Complex64::new(0.0, 0.0);
    let mut den = 0.0;
    itf.iter()
        .map(|z| {
            num = num * decay + z;
            den = den * decay + z.norm();
            if den > ITF_FLOOR {
                (num.norm() / den).min(1.0)
            } else {
                0.0
            }
        })
        .collect()
}

pub fn extract_ivs(itf: &[Vec<Complex64>], centers: &[f64], sample_rate: u32, cfg: &AuditoryConfig) -> Vec<Vec<f64>> {
    itf.par_iter()
        .zip(centers)
        .map(|(b, &fc)| ivs_band(b, fc, sample_rate, cfg.ivs_tau_cycles))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const FS: u32 = 16000;

    #[test]
    fn ild_of_scaled_tone() {
        for mode in [IldSmoothing::Envelope, IldSmoothing::Complex] {
            scaled_tone_case(AuditoryConfig {
                ild_smoothing: mode,
                ..AuditoryConfig::default()
            });
        }
    }

    #[test]
    fn envelope_smoothing_tracks_slow_level_changes_only() {
        // 4 Hz level swing of ±6 dB on the right, 200 Hz swing on the left
        let cfg = AuditoryConfig::default();
        let fc = 2000.0;
        let sig = |rate: f64, depth: f64| -> Vec<Complex64> {
            (0..32000)
                .map(|i| {
                    let t = i as f64 / FS as f64;
                    let a = 10f64.powf(depth * (2.0 * PI * rate * t).sin() / 20.0);
                    Complex64::from_polar(a.powf(cfg.compression_exp), 2.0 * PI * fc * t)
                })
                .collect()
        };
        let flat = sig(0.0, 0.0);
        let slow = ild_band(&flat, &sig(4.0, 6.0), FS, &cfg);
        let fast = ild_band(&flat, &sig(200.0, 6.0), FS, &cfg);
        let swing = |v: &[f64]| v[16000..].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(swing(&slow) > 5.0 && swing(&slow) < 6.5, "{}", swing(&slow));
        assert!(swing(&fast) < 1.0, "{}", swing(&fast));
    }

    fn scaled_tone_case(cfg: AuditoryConfig) {
        let tone: Vec<Complex64> = (0..16000)
            .map(|i| Complex64::from_polar(1.0, 2.0 * PI * 500.0 * i as f64 / FS as f64))
            .collect();
        let p = cfg.compression_exp;
        let right: Vec<Complex64> = tone.iter().map(|z| z * 2f64.powf(p)).collect();
        let ild = ild_band(&tone, &right, FS, &cfg);
        for v in &ild[8000..] {
            assert!((v - 20.0 * 2f64.log10()).abs() < 1e-9);
        }
        let back = ild_band(&right, &tone, FS, &cfg);
        for (a, b) in ild.iter().zip(&back) {
            assert!((a + b).abs() < 1e-12);
        }
    }

    #[test]
    fn silent_band_is_floored() {
        let cfg = AuditoryConfig::default();
        let z = vec![Complex64::new(0.0, 0.0); 100];
        assert!(ild_band(&z, &z, FS, &cfg).iter().all(|v| *v == 0.0));
        assert!(ivs_band(&z, 500.0, FS, 5.0).iter().all(|v| *v == 0.0));
        assert_eq!(ipd_sample(Complex64::new(0.0, 0.0)), 0.0);
    }

    #[test]
    fn ipd_wraps_into_half_open_interval() {
        assert_eq!(ipd_sample(Complex64::new(-1.0, 0.0)), PI);
        assert_eq!(ipd_sample(Complex64::new(-1.0, -0.0)), PI);
        assert!((ipd_sample(Complex64::from_polar(1.0, 3.0)) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn ivs_of_constant_phase_is_one() {
        let itf = vec![Complex64::from_polar(0.3, 1.1); 2000];
        let ivs = ivs_band(&itf, 500.0, FS, 5.0);
        assert!(ivs.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn ivs_of_spinning_phase_decays() {
        // a phase rotating at fc averages out over five cycles
        let fc = 500.0;
        let itf: Vec<Complex64> = (0..4000)
            .map(|i| Complex64::from_polar(1.0, 2.0 * PI * fc * i as f64 / FS as f64))
            .collect();
        let ivs = ivs_band(&itf, fc, FS, 5.0);
        // closed form of the discrete steady state: |1 - d e^{iw}|^{-1} (1 - d)
        let d = (-fc / (5.0 * FS as f64)).exp();
        let w = 2.0 * PI * fc / FS as f64;
        let expect = (1.0 - d) / (Complex64::new(1.0, 0.0) - Complex64::from_polar(d, -w)).norm();
        assert!((ivs[3999] - expect).abs() < 1e-3, "{} vs {expect}", ivs[3999]);
        assert!(ivs[3999] < 0.05);
    }
}
