use std::f64::consts::{PI, SQRT_2};
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

/// Glasberg–Moore equivalent rectangular bandwidth, Hz.
pub fn erb_hz(f: f64) -> f64 {
    24.7 * (4.37 * f / 1000.0 + 1.0)
}

/// ERB-rate (number of ERBs below `f`).
pub fn erb_number(f: f64) -> f64 {
    21.4 * (4.37 * f / 1000.0 + 1.0).log10()
}

pub fn erb_number_to_hz(e: f64) -> f64 {
    (10f64.powf(e / 21.4) - 1.0) * 1000.0 / 4.37
}

/// Samples a filter can run over: real or complex.
pub trait Sample: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    const ZERO: Self;
}

impl Sample for f64 {
    const ZERO: Self = 0.0;
}

impl Sample for Complex64 {
    const ZERO: Self = Complex64::new(0.0, 0.0);
}

/// Real-coefficient biquad, transposed direct form II. First-order sections
/// leave `b2` and `a2` at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Bilinear first-order low-pass, -3 dB at `fc`.
    pub fn lowpass1(fc: f64, fs: f64) -> Self {
        let k = (PI * fc / fs).tan();
        let n = 1.0 / (1.0 + k);
        Self {
            b: [k * n, k * n, 0.0],
            a: [(k - 1.0) * n, 0.0],
        }
    }

    /// Bilinear first-order high-pass, -3 dB at `fc`.
    pub fn highpass1(fc: f64, fs: f64) -> Self {
        let k = (PI * fc / fs).tan();
        let n = 1.0 / (1.0 + k);
        Self {
            b: [n, -n, 0.0],
            a: [(k - 1.0) * n, 0.0],
        }
    }

    /// Second-order Butterworth low-pass.
    pub fn butter2_lowpass(fc: f64, fs: f64) -> Self {
        let k = (PI * fc / fs).tan();
        let n = 1.0 / (1.0 + SQRT_2 * k + k * k);
        let b0 = k * k * n;
        Self {
            b: [b0, 2.0 * b0, b0],
            a: [2.0 * (k * k - 1.0) * n, (1.0 - SQRT_2 * k + k * k) * n],
        }
    }

    pub fn scaled(mut self, g: f64) -> Self {
        for b in &mut self.b {
            *b *= g;
        }
        self
    }

    /// Complex frequency response at `f` Hz.
    pub fn response(&self, f: f64, fs: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -2.0 * PI * f / fs);
        let z2 = z1 * z1;
        (self.b[0] + z1 * self.b[1] + z2 * self.b[2]) / (1.0 + z1 * self.a[0] + z2 * self.a[1])
    }

    pub fn run<T: Sample>(&self, x: &mut [T]) {
        let (mut s1, mut s2) = (T::ZERO, T::ZERO);
        for v in x.iter_mut() {
            let input = *v;
            let y = input * self.b[0] + s1;
            s1 = input * self.b[1] - y * self.a[0] + s2;
            s2 = input * self.b[2] - y * self.a[1];
            *v = y;
        }
    }
}

/// First-order 500 Hz high-pass into first-order 2 kHz low-pass, scaled to
/// unity gain at 1 kHz.
pub fn middle_ear_filter(lo_hz: f64, hi_hz: f64, fs: f64) -> [Biquad; 2] {
    let hp = Biquad::highpass1(lo_hz, fs);
    let lp = Biquad::lowpass1(hi_hz, fs);
    let centre = (lo_hz * hi_hz).sqrt();
    let g = (hp.response(centre, fs) * lp.response(centre, fs)).norm();
    [hp.scaled(1.0 / g), lp]
}

/// Ratio of a gammatone's ERB to its bandwidth parameter `b` for the given
/// order: `π (2n-2)! / (2^(2n-2) ((n-1)!)^2)`.
pub fn gammatone_erb_factor(order: usize) -> f64 {
    let fact = |n: usize| (1..=n).map(|i| i as f64).product::<f64>();
    let n = order.max(1);
    PI * fact(2 * n - 2) / (2f64.powi(2 * n as i32 - 2) * fact(n - 1).powi(2))
}

/// All-pole complex gammatone: `order` identical one-pole resonators at
/// `fc`. A real tone at `fc` comes out as an analytic signal of the same
/// amplitude.
#[derive(Debug, Clone, Copy)]
pub struct Gammatone {
    pub center_hz: f64,
    pub order: usize,
    pole: Complex64,
    gain: f64,
}

impl Gammatone {
    pub fn new(center_hz: f64, order: usize, fs: f64) -> Self {
        let b = erb_hz(center_hz) / gammatone_erb_factor(order);
        let r = (-2.0 * PI * b / fs).exp();
        Self {
            center_hz,
            order,
            pole: Complex64::from_polar(r, 2.0 * PI * center_hz / fs),
            gain: 2.0 * (1.0 - r).powi(order as i32),
        }
    }

    pub fn response(&self, f: f64, fs: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -2.0 * PI * f / fs);
        self.gain / (1.0 - self.pole * z1).powi(self.order as i32)
    }

    pub fn filter(&self, x: &[f64]) -> Vec<Complex64> {
        let mut state = vec![Complex64::new(0.0, 0.0); self.order];
        x.iter()
            .map(|&v| {
                let mut u = Complex64::new(v * self.gain, 0.0);
                for s in state.iter_mut() {
                    *s = u + self.pole * *s;
                    u = *s;
                }
                u
            })
            .collect()
    }
}

/// Gammatone preceded by a zero at DC (`1 - z^-1`, unity gain at `fc`).
/// Used to re-analyse hair-cell output, whose rectified DC and envelope
/// would otherwise leak through the all-pole response and swamp the
/// carrier in bands above the hair-cell cutoff.
pub fn dc_blocked_gammatone(center_hz: f64, order: usize, fs: f64, x: &[f64]) -> Vec<Complex64> {
    let g = 1.0 / (2.0 * (PI * center_hz / fs).sin());
    let mut prev = 0.0;
    let d: Vec<f64> = x
        .iter()
        .map(|&v| {
            let y = (v - prev) * g;
            prev = v;
            y
        })
        .collect();
    Gammatone::new(center_hz, order, fs).filter(&d)
}

/// `|x|^p e^{i arg x}`.
pub fn compress_sample(x: Complex64, p: f64) -> Complex64 {
    let m = x.norm();
    if m == 0.0 {
        x
    } else {
        x * m.powf(p - 1.0)
    }
}

/// Real part, half-wave rectified, then `order` first-order low-passes.
pub fn haircell_band(x: &[Complex64], cutoff_hz: f64, order: usize, fs: f64) -> Vec<f64> {
    let mut y: Vec<f64> = x.iter().map(|z| z.re.max(0.0)).collect();
    let lp = Biquad::lowpass1(cutoff_hz, fs);
    for _ in 0..order {
        lp.run(&mut y);
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    const FS: f64 = 16000.0;

    fn tone(f: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * f * i as f64 / FS).sin()).collect()
    }

    fn steady_rms(x: &[f64]) -> f64 {
        let tail = &x[x.len() / 2..];
        (tail.iter().map(|v| v * v).sum::<f64>() / tail.len() as f64).sqrt()
    }

    fn run_chain(chain: &[Biquad], x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for s in chain {
            s.run(&mut y);
        }
        y
    }

    #[test]
    fn erb_number_round_trips() {
        for f in [0.0, 50.0, 440.0, 1000.0, 6000.0] {
            assert!((erb_number_to_hz(erb_number(f)) - f).abs() < 1e-9);
        }
        // derivative of the ERB-rate is 1 / ERB; the published constants
        // agree to about 0.3%
        for f in [100.0, 1000.0, 5000.0] {
            let d = (erb_number(f + 1e-3) - erb_number(f - 1e-3)) / 2e-3;
            assert!((d * erb_hz(f) - 1.0).abs() < 5e-3, "{f}: {d}");
        }
    }

    #[test]
    fn erb_factors() {
        assert!((gammatone_erb_factor(2) - PI / 2.0).abs() < 1e-12);
        assert!((gammatone_erb_factor(3) - 3.0 * PI / 8.0).abs() < 1e-12);
        // classic 1.019 bandwidth of the fourth-order filter
        assert!((1.0 / gammatone_erb_factor(4) - 1.019).abs() < 2e-3);
    }

    #[test]
    fn gammatone_erb_matches_numeric_integral() {
        // equivalent rectangular bandwidth of the power response
        for order in [2, 3, 4] {
            for fc in [200.0, 1000.0, 4000.0] {
                let g = Gammatone::new(fc, order, FS);
                let peak = g.response(fc, FS).norm_sqr();
                let df = 0.05;
                let area: f64 = (0..(FS / 2.0 / df) as usize)
                    .map(|i| g.response(i as f64 * df, FS).norm_sqr() * df)
                    .sum();
                let erb = area / peak;
                assert!((erb / erb_hz(fc) - 1.0).abs() < 0.02, "order {order} fc {fc}: {erb}");
            }
        }
    }

    #[test]
    fn gammatone_peaks_at_centre() {
        for order in [2, 3] {
            for fc in [50.0, 310.0, 1400.0, 6000.0] {
                let g = Gammatone::new(fc, order, FS);
                // direct DTFT of the impulse response
                let mut imp = vec![0.0; 16000];
                imp[0] = 1.0;
                let h = g.filter(&imp);
                let (mut best, mut best_f) = (0.0, 0.0);
                for i in 0..=400 {
                    let f = fc * (0.8 + 0.001 * i as f64);
                    let w = -2.0 * PI * f / FS;
                    let v: Complex64 = h
                        .iter()
                        .enumerate()
                        .map(|(n, x)| x * Complex64::from_polar(1.0, w * n as f64))
                        .sum();
                    if v.norm() > best {
                        best = v.norm();
                        best_f = f;
                    }
                }
                assert!((best_f / fc - 1.0).abs() < 0.01, "order {order} fc {fc}: peak {best_f}");
                assert!((best / 2.0 - 1.0).abs() < 0.01);
            }
        }
    }

    #[test]
    fn real_tone_gives_unit_envelope() {
        let g = Gammatone::new(1000.0, 3, FS);
        let y = g.filter(&tone(1000.0, 8000));
        for z in &y[4000..] {
            assert!((z.norm() - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn impulse_envelope_rises_then_decays() {
        for fc in [100.0, 1000.0, 5000.0] {
            let g = Gammatone::new(fc, 3, FS);
            let mut imp = vec![0.0; 4000];
            imp[0] = 1.0;
            let env: Vec<f64> = g.filter(&imp).iter().map(|z| z.norm()).collect();
            let peak = env.iter().enumerate().fold(0, |b, (i, v)| if *v > env[b] { i } else { b });
            assert!(peak > 0);
            assert!(env[..=peak].windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-3)));
            assert!(env[peak..].windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn middle_ear_response() {
        let me = middle_ear_filter(500.0, 2000.0, FS);
        let rms = |f: f64| steady_rms(&run_chain(&me, &tone(f, 32000))) * SQRT_2;
        assert!((20.0 * rms(1000.0).log10()).abs() < 0.5);
        assert!(20.0 * (rms(1000.0) / rms(50.0)).log10() >= 15.0);
        let dc = run_chain(&me, &vec![1.0; 32000]);
        assert!(dc[31999].abs() < 1e-9);
    }

    #[test]
    fn butterworth_response() {
        let b = Biquad::butter2_lowpass(30.0, FS);
        assert!((b.response(0.0, FS).norm() - 1.0).abs() < 1e-12);
        assert!((b.response(30.0, FS).norm() - 0.5f64.sqrt()).abs() < 1e-9);
        // prewarped analog magnitude 1 / sqrt(1 + (W / Wc)^4)
        let wc = (PI * 30.0 / FS).tan();
        for f in [10.0, 100.0, 3000.0, 7000.0] {
            let w = (PI * f / FS).tan();
            let expect = 1.0 / (1.0 + (w / wc).powi(4)).sqrt();
            assert!((b.response(f, FS).norm() / expect - 1.0).abs() < 1e-9, "{f}");
        }
    }

    #[test]
    fn compression() {
        let z = Complex64::from_polar(1.0, 0.7);
        assert!((compress_sample(z, 0.4) - z).norm() < 1e-15);
        let big = compress_sample(z * 32.0, 0.4);
        assert!((big.norm() - 4.0).abs() < 1e-12 && (big.arg() - 0.7).abs() < 1e-12);
        assert_eq!(compress_sample(Complex64::new(0.0, 0.0), 0.4), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn haircell_stages() {
        let neg = vec![Complex64::new(-1.0, 0.3); 1000];
        assert!(haircell_band(&neg, 770.0, 5, FS).iter().all(|v| *v == 0.0));

        let analytic = |f: f64| -> Vec<Complex64> {
            (0..16000).map(|i| Complex64::from_polar(1.0, 2.0 * PI * f * i as f64 / FS)).collect()
        };
        // 100 Hz fine structure survives
        let lo = haircell_band(&analytic(100.0), 770.0, 5, FS);
        let tail = &lo[8000..];
        let (mx, mn) = tail.iter().fold((f64::MIN, f64::MAX), |(a, b), v| (a.max(*v), b.min(*v)));
        assert!(mx - mn > 0.5 * mx);
        // the 4 kHz carrier is gone, leaving the envelope
        let hi = haircell_band(&analytic(4000.0), 770.0, 5, FS);
        let tail = &hi[8000..];
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        let w = -2.0 * PI * 4000.0 / FS;
        let carrier = tail
            .iter()
            .enumerate()
            .map(|(n, v)| Complex64::from_polar(*v, w * n as f64))
            .sum::<Complex64>()
            .norm()
            * 2.0
            / tail.len() as f64;
        assert!(mean > 0.2);
        assert!(20.0 * (carrier / mean).log10() < -35.0, "{carrier}");
    }
}
