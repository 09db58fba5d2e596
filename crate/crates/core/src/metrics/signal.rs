use crate::error::{Error, Result};
use crate::signal::{AudioBuffer, ComplexSpectrogram};

use super::EarWeights;

pub const SI_SDR_CLAMP_DB: f64 = 120.0;
/// Floor for spectral magnitudes in logs and ratios.
pub const SPEC_EPS: f64 = 1e-8;

/// Scale-invariant SDR of `estimate` against `reference`, dB, clamped to
/// ±120.
pub fn si_sdr(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    if reference.len() != estimate.len() {
        return Err(Error::LengthMismatch(format!(
            "reference {} vs estimate {} samples",
            reference.len(),
            estimate.len()
        )));
    }
    let rr: f64 = reference.iter().map(|v| v * v).sum();
    if rr == 0.0 {
        return Err(Error::ZeroReference);
    }
    let alpha = reference.iter().zip(estimate).map(|(r, e)| r * e).sum::<f64>() / rr;
    let (mut num, mut den) = (0.0, 0.0);
    for (r, e) in reference.iter().zip(estimate) {
        let p = alpha * r;
        num += p * p;
        den += (p - e) * (p - e);
    }
    let db = if num == 0.0 {
        -SI_SDR_CLAMP_DB
    } else if den == 0.0 {
        SI_SDR_CLAMP_DB
    } else {
        10.0 * (num / den).log10()
    };
    Ok(db.clamp(-SI_SDR_CLAMP_DB, SI_SDR_CLAMP_DB))
}

/// Per-ear SI-SDR of a binaural pair, `(right, left)`.
pub fn si_sdr_ears(reference: &AudioBuffer, estimate: &AudioBuffer) -> Result<(f64, f64)> {
    check_binaural(reference, estimate)?;
    Ok((
        si_sdr(reference.channel(1), estimate.channel(1))?,
        si_sdr(reference.channel(0), estimate.channel(0))?,
    ))
}

/// Negative ear-weighted SI-SDR.
pub fn weighted_si_sdr_loss(reference: &AudioBuffer, estimate: &AudioBuffer, w: EarWeights) -> Result<f64> {
    let (r, l) = si_sdr_ears(reference, estimate)?;
    Ok(-(w.right * r + w.left * l))
}

pub(crate) fn check_binaural(reference: &AudioBuffer, estimate: &AudioBuffer) -> Result<()> {
    for b in [reference, estimate] {
        if b.num_channels() != 2 {
            return Err(Error::ChannelCount {
                expected: 2,
                actual: b.num_channels(),
            });
        }
    }
    if reference.len() != estimate.len() {
        return Err(Error::LengthMismatch(format!(
            "reference {} vs estimate {} samples",
            reference.len(),
            estimate.len()
        )));
    }
    if reference.sample_rate() != estimate.sample_rate() {
        return Err(Error::SampleRateMismatch {
            expected: reference.sample_rate(),
            actual: estimate.sample_rate(),
        });
    }
    Ok(())
}

fn bins_where(spec: &ComplexSpectrogram, keep: impl Fn(f64) -> bool) -> Vec<usize> {
    let cfg = spec.config();
    (0..spec.n_bins()).filter(|&k| keep(cfg.bin_frequency(k))).collect()
}

/// Mean entry-wise L1 distance (|ΔRe| + |ΔIm|) over all channels and frames
/// in bins below `cutoff_hz`.
pub fn stft_loss(reference: &ComplexSpectrogram, estimate: &ComplexSpectrogram, cutoff_hz: f64) -> Result<f64> {
    reference.check_same_grid(estimate)?;
    let bins = bins_where(reference, |f| f < cutoff_hz);
    let mut sum = 0.0;
    let mut n = 0usize;
    for ch in 0..reference.n_channels() {
        for t in 0..reference.n_frames() {
            let (a, b) = (reference.frame(ch, t), estimate.frame(ch, t));
            for &k in &bins {
                let d = a[k] - b[k];
                sum += d.re.abs() + d.im.abs();
                n += 1;
            }
        }
    }
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

/// Mean absolute log-magnitude difference plus spectral convergence, over
/// bins at or above `cutoff_hz`.
pub fn mag_stft_loss(reference: &ComplexSpectrogram, estimate: &ComplexSpectrogram, cutoff_hz: f64) -> Result<f64> {
    reference.check_same_grid(estimate)?;
    let bins = bins_where(reference, |f| f >= cutoff_hz);
    let (mut log_sum, mut diff2, mut ref2) = (0.0, 0.0, 0.0);
    let mut n = 0usize;
    for ch in 0..reference.n_channels() {
        for t in 0..reference.n_frames() {
            let (a, b) = (reference.frame(ch, t), estimate.frame(ch, t));
            for &k in &bins {
                let (ma, mb) = (a[k].norm(), b[k].norm());
                log_sum += ((ma + SPEC_EPS).ln() - (mb + SPEC_EPS).ln()).abs();
                diff2 += (ma - mb) * (ma - mb);
                ref2 += ma * ma;
                n += 1;
            }
        }
    }
    if n == 0 {
        return Ok(0.0);
    }
    Ok(log_sum / n as f64 + diff2.sqrt() / ref2.sqrt().max(SPEC_EPS))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::StftConfig;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::E;

    fn rand_vec(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn spec(seed: u64, frames: usize) -> ComplexSpectrogram {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = ComplexSpectrogram::zeros(StftConfig::default(), 2, frames, frames * 256);
        for z in s.data_mut() {
            *z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        s
    }

    #[test]
    fn si_sdr_of_scaled_copy_hits_the_clamp() {
        let r = rand_vec(1, 1000);
        let e: Vec<f64> = r.iter().map(|v| v * 3.7).collect();
        assert_eq!(si_sdr(&r, &e).unwrap(), 120.0);
        assert_eq!(si_sdr(&r, &vec![0.0; 1000]).unwrap(), -120.0);
    }

    #[test]
    fn si_sdr_of_orthogonal_noise_is_zero() {
        let r = rand_vec(2, 1000);
        let mut n = rand_vec(3, 1000);
        // Gram-Schmidt, then match the reference norm
        let rr: f64 = r.iter().map(|v| v * v).sum();
        let proj = n.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / rr;
        for (v, rv) in n.iter_mut().zip(&r) {
            *v -= proj * rv;
        }
        let nn: f64 = n.iter().map(|v| v * v).sum();
        let e: Vec<f64> = r.iter().zip(&n).map(|(a, b)| a + b * (rr / nn).sqrt()).collect();
        assert!(si_sdr(&r, &e).unwrap().abs() < 1e-9);
    }

    #[test]
    fn si_sdr_matches_angle_closed_form() {
        // SDR = cos²θ / sin²θ of the angle between the two signals, so only
        // the degenerate zero signal breaks the symmetry
        let x = rand_vec(6, 300);
        let y: Vec<f64> = x.iter().zip(rand_vec(7, 300)).map(|(a, b)| a + 0.8 * b).collect();
        let dot: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let nx: f64 = x.iter().map(|v| v * v).sum();
        let ny: f64 = y.iter().map(|v| v * v).sum();
        let c2 = dot * dot / (nx * ny);
        let expect = 10.0 * (c2 / (1.0 - c2)).log10();
        assert!((si_sdr(&x, &y).unwrap() - expect).abs() < 1e-9);
        assert!((si_sdr(&y, &x).unwrap() - expect).abs() < 1e-9);
        let z = vec![0.0; 300];
        assert_eq!(si_sdr(&x, &z).unwrap(), -120.0);
        assert!(si_sdr(&z, &x).is_err());
    }

    #[test]
    fn si_sdr_errors() {
        assert!(matches!(si_sdr(&[0.0; 4], &[1.0; 4]), Err(Error::ZeroReference)));
        assert!(matches!(si_sdr(&[1.0; 4], &[1.0; 3]), Err(Error::LengthMismatch(_))));
    }

    #[test]
    fn weighted_loss_examples() {
        let l = rand_vec(4, 500);
        let r = rand_vec(5, 500);
        let refb = AudioBuffer::new(vec![l.clone(), r.clone()], 16000).unwrap();
        let w = EarWeights::training();
        assert!((weighted_si_sdr_loss(&refb, &refb, w).unwrap() + 120.0).abs() < 1e-12);
        assert!((-(w.right * 1.87 + w.left * 8.47) + 4.07).abs() < 5e-3);

        let estb = AudioBuffer::new(
            vec![l.iter().map(|v| v + 0.3).collect(), r.iter().map(|v| v * 0.5 - 0.1).collect()],
            16000,
        )
        .unwrap();
        let swap = |b: &AudioBuffer| AudioBuffer::new(vec![b.channel(1).to_vec(), b.channel(0).to_vec()], 16000).unwrap();
        let eq = EarWeights::evaluation();
        let a = weighted_si_sdr_loss(&refb, &estb, eq).unwrap();
        let b = weighted_si_sdr_loss(&swap(&refb), &swap(&estb), eq).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn stft_loss_examples() {
        let a = spec(1, 3);
        assert_eq!(stft_loss(&a, &a, 1500.0).unwrap(), 0.0);

        let mut only200 = ComplexSpectrogram::zeros(StftConfig::default(), 2, 3, 768);
        only200.set(0, 1, 200, Complex64::new(5.0, -2.0));
        let zero = ComplexSpectrogram::zeros(StftConfig::default(), 2, 3, 768);
        assert_eq!(stft_loss(&only200, &zero, 1500.0).unwrap(), 0.0);

        let mut b = a.clone();
        let z = b.get(1, 2, 10);
        b.set(1, 2, 10, z + Complex64::new(1.0, 1.0));
        let count = (2 * 3 * 96) as f64;
        assert!((stft_loss(&a, &b, 1500.0).unwrap() - 2.0 / count).abs() < 1e-15);
    }

    #[test]
    fn mag_stft_loss_examples() {
        let a = spec(2, 3);
        assert_eq!(mag_stft_loss(&a, &a, 1500.0).unwrap(), 0.0);

        let mut scaled = a.clone();
        for z in scaled.data_mut() {
            *z *= E;
        }
        assert!((mag_stft_loss(&a, &scaled, 1500.0).unwrap() - (1.0 + E - 1.0)).abs() < 1e-6);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut rotated = a.clone();
        for z in rotated.data_mut() {
            *z *= Complex64::from_polar(1.0, rng.gen_range(-3.0..3.0));
        }
        assert!(mag_stft_loss(&a, &rotated, 1500.0).unwrap() < 1e-12);
    }

    #[test]
    fn grid_mismatch() {
        let a = spec(3, 3);
        let b = spec(3, 4);
        assert!(matches!(stft_loss(&a, &b, 1500.0), Err(Error::GridMismatch(_))));
        assert!(matches!(mag_stft_loss(&a, &b, 1500.0), Err(Error::GridMismatch(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn si_sdr_ignores_estimate_scale(seed in 0u64..1000, g in 0.01f64..100.0) {
            let r = rand_vec(seed, 200);
            let e: Vec<f64> = r.iter().zip(rand_vec(seed + 1, 200)).map(|(a, b)| a + 0.3 * b).collect();
            let s: Vec<f64> = e.iter().map(|v| v * g).collect();
            prop_assert!((si_sdr(&r, &e).unwrap() - si_sdr(&r, &s).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn spectral_losses_are_nonnegative(s1 in 0u64..1000, s2 in 0u64..1000) {
            let (a, b) = (spec(s1, 2), spec(s2 + 5000, 2));
            prop_assert!(stft_loss(&a, &b, 1500.0).unwrap() >= 0.0);
            prop_assert!(mag_stft_loss(&a, &b, 1500.0).unwrap() >= 0.0);
        }
    }
}
