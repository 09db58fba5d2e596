use num_complex::Complex64;

use super::bank::BsmFilterBank;
use crate::error::{Error, Result};
use crate::signal::ComplexSpectrogram;

/// Binaural STFT `cᴴx` per bin and frame; channel 0 is left, 1 is right.
pub fn render_binaural(bank: &BsmFilterBank, mics: &ComplexSpectrogram) -> Result<ComplexSpectrogram> {
    if mics.n_channels() != bank.mics {
        return Err(Error::ChannelCount {
            expected: bank.mics,
            actual: mics.n_channels(),
        });
    }
    let cfg = mics.config();
    if mics.n_bins() != bank.n_bins() || cfg.fft_len != bank.stft.fft_len || cfg.sample_rate != bank.stft.sample_rate {
        return Err(Error::GridMismatch(format!(
            "spectrogram has {} bins at {} Hz, filter bank {} bins at {} Hz",
            mics.n_bins(),
            cfg.sample_rate,
            bank.n_bins(),
            bank.stft.sample_rate
        )));
    }
    let mut out = ComplexSpectrogram::zeros(*cfg, 2, mics.n_frames(), mics.signal_len());
    for ear in 0..2 {
        let filters = bank.ear(ear);
        for t in 0..mics.n_frames() {
            let row = out.frame_mut(ear, t);
            for (k, y) in row.iter_mut().enumerate() {
                let c = &filters[k];
                let mut acc = Complex64::new(0.0, 0.0);
                for (m, cm) in c.iter().enumerate() {
                    acc += cm.conj() * mics.get(m, t, k);
                }
                *y = acc;
            }
        }
    }
    Ok(out)
}
