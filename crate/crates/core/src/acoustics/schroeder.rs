use std::f64::consts::PI;

use super::room::ImageSourceList;
use crate::error::{Error, Result};

const SINC_HALF_WIDTH: i64 = 32;

/// Omnidirectional (free-field point receiver) impulse response of an image
/// list, each arrival placed with a Hann-windowed sinc.
pub fn omni_rir(images: &ImageSourceList, sample_rate: u32, len: usize) -> Vec<f64> {
    omni_rir_from(
        images.entries.iter().map(|e| (e.delay, e.gain)),
        sample_rate,
        len,
    )
}

pub(crate) fn omni_rir_from(
    arrivals: impl Iterator<Item = (f64, f64)>,
    sample_rate: u32,
    len: usize,
) -> Vec<f64> {
    let mut rir = vec![0.0; len];
    for (delay, gain) in arrivals {
        let d = delay * sample_rate as f64;
        let center = d.round() as i64;
        for t in center - SINC_HALF_WIDTH..=center + SINC_HALF_WIDTH {
            if t < 0 || t as usize >= len {
                continue;
            }
            let x = t as f64 - d;
            let sinc = if x.abs() < 1e-12 {
                1.0
            } else {
                (PI * x).sin() / (PI * x)
            };
            let w = 0.5 + 0.5 * (PI * x / (SINC_HALF_WIDTH as f64 + 1.0)).cos();
            rir[t as usize] += gain * sinc * w;
        }
    }
    rir
}

/// Backward-integrated energy decay in dB relative to the total energy.
pub fn schroeder_curve_db(rir: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut edc: Vec<f64> = rir
        .iter()
        .rev()
        .map(|x| {
            acc += x * x;
            acc
        })
        .collect();
    edc.reverse();
    let total = edc.first().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    edc.iter()
        .map(|e| 10.0 * (e.max(f64::MIN_POSITIVE) / total).log10())
        .collect()
}

/// Reverberation time from a least-squares line through the -5 to -35 dB
/// span of the Schroeder curve, extrapolated to 60 dB.
pub fn measure_t60(rir: &[f64], sample_rate: u32) -> Result<f64> {
    let curve = schroeder_curve_db(rir);
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .enumerate()
        .filter(|(_, &db)| (-35.0..=-5.0).contains(&db))
        .map(|(i, &db)| (i as f64 / sample_rate as f64, db))
        .collect();
    if pts.len() < 2 || curve.last().map_or(true, |&db| db > -35.0) {
        return Err(Error::InvalidBuffer(
            "impulse response does not decay by 35 dB".into(),
        ));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(Error::InvalidBuffer("energy does not decay".into()));
    }
    Ok(-60.0 / slope)
}
