use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::solve::{MaglsBin, MaglsOrigin};
use crate::error::{Error, Result};
use crate::signal::StftConfig;

pub const BANK_FORMAT: &str = "bsm-filter-bank";
pub const BANK_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterMethod {
    Ls,
    Magls,
}

impl FilterMethod {
    /// LS strictly below the cutoff, MagLS at and above it. A cutoff at or
    /// beyond Nyquist means LS everywhere.
    pub fn for_frequency(f: f64, cutoff_hz: f64, nyquist: f64) -> Self {
        if f < cutoff_hz || cutoff_hz >= nyquist {
            FilterMethod::Ls
        } else {
            FilterMethod::Magls
        }
    }
}

/// First bin designed by MagLS for a cutoff (`n_bins` when none is).
pub fn magls_start_bin(stft: &StftConfig, cutoff_hz: f64) -> usize {
    (0..stft.n_bins())
        .find(|&k| {
            FilterMethod::for_frequency(stft.bin_frequency(k), cutoff_hz, stft.nyquist()) == FilterMethod::Magls
        })
        .unwrap_or(stft.n_bins())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaglsStats {
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
    pub ls_residual: f64,
    pub origin: MaglsOrigin,
}

impl From<&MaglsBin> for MaglsStats {
    fn from(b: &MaglsBin) -> Self {
        Self {
            iterations: b.iterations,
            converged: b.converged,
            residual: b.residual,
            ls_residual: b.ls_residual,
            origin: b.origin,
        }
    }
}

/// Provenance carried with a bank.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BankMeta {
    pub design: String,
    pub hrtf: String,
    /// Head rotation the HRTF targets were looked up with, degrees.
    pub hrtf_rotation_deg: f64,
    pub max_lookup_error_deg: f64,
    pub snr_ratio: f64,
    pub design_directions: usize,
}

/// Per-bin filters for both ears, `[bin][mic]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BsmFilterBank {
    pub stft: StftConfig,
    pub cutoff_hz: f64,
    pub mics: usize,
    pub left: Vec<Vec<Complex64>>,
    pub right: Vec<Vec<Complex64>>,
    pub methods: Vec<FilterMethod>,
    pub magls_left: Vec<Option<MaglsStats>>,
    pub magls_right: Vec<Option<MaglsStats>>,
    pub meta: BankMeta,
}

/// LS filters for every bin plus MagLS designs for the bins at and above
/// the cutoff (`None` elsewhere), one ear.
pub struct EarDesigns<'a> {
    pub ls: &'a [Vec<Complex64>],
    pub magls: &'a [Option<MaglsBin>],
}

pub fn assemble_filterbank(
    stft: &StftConfig,
    cutoff_hz: f64,
    left: EarDesigns<'_>,
    right: EarDesigns<'_>,
    meta: BankMeta,
) -> Result<BsmFilterBank> {
    let n = stft.n_bins();
    for (name, e) in [("left", &left), ("right", &right)] {
        if e.ls.len() != n || e.magls.len() != n {
            return Err(Error::GridMismatch(format!(
                "{name} ear: {} LS and {} MagLS bins for a {n}-bin grid",
                e.ls.len(),
                e.magls.len()
            )));
        }
    }
    let mics = left.ls.first().map_or(0, |c| c.len());
    let mut bank = BsmFilterBank {
        stft: *stft,
        cutoff_hz,
        mics,
        left: Vec::with_capacity(n),
        right: Vec::with_capacity(n),
        methods: Vec::with_capacity(n),
        magls_left: Vec::with_capacity(n),
        magls_right: Vec::with_capacity(n),
        meta,
    };
    for k in 0..n {
        let method = FilterMethod::for_frequency(stft.bin_frequency(k), cutoff_hz, stft.nyquist());
        bank.methods.push(method);
        for (e, filters, stats) in [
            (&left, &mut bank.left, &mut bank.magls_left),
            (&right, &mut bank.right, &mut bank.magls_right),
        ] {
            match method {
                FilterMethod::Ls => {
                    filters.push(e.ls[k].clone());
                    stats.push(None);
                }
                FilterMethod::Magls => {
                    let m = e.magls[k].as_ref().ok_or_else(|| {
                        Error::GridMismatch(format!("bin {k} needs a MagLS design"))
                    })?;
                    filters.push(m.filter.clone());
                    stats.push(Some(MaglsStats::from(m)));
                }
            }
        }
    }
    for row in bank.left.iter().chain(&bank.right) {
        if row.len() != mics {
            return Err(Error::GridMismatch("filters differ in microphone count".into()));
        }
    }
    Ok(bank)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    stft: StftConfig,
    cutoff_hz: f64,
    mics: usize,
    bins: usize,
    methods: Vec<FilterMethod>,
    magls_left: Vec<Option<MaglsStats>>,
    magls_right: Vec<Option<MaglsStats>>,
    meta: BankMeta,
}

impl BsmFilterBank {
    pub fn n_bins(&self) -> usize {
        self.left.len()
    }

    /// Filters of one ear, 0 = left, 1 = right.
    pub fn ear(&self, ear: usize) -> &[Vec<Complex64>] {
        if ear == 0 {
            &self.left
        } else {
            &self.right
        }
    }

    /// u32 header length, JSON header, then f32 samples ordered
    /// `[bin][mic][ear][re, im]`.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            format: BANK_FORMAT.into(),
            version: BANK_VERSION,
            stft: self.stft,
            cutoff_hz: self.cutoff_hz,
            mics: self.mics,
            bins: self.n_bins(),
            methods: self.methods.clone(),
            magls_left: self.magls_left.clone(),
            magls_right: self.magls_right.clone(),
            meta: self.meta.clone(),
        };
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(4 + json.len() + self.n_bins() * self.mics * 16);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for k in 0..self.n_bins() {
            for m in 0..self.mics {
                for z in [self.left[k][m], self.right[k][m]] {
                    out.extend_from_slice(&(z.re as f32).to_le_bytes());
                    out.extend_from_slice(&(z.im as f32).to_le_bytes());
                }
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::FilterBankFormat(m.to_string());
        if bytes.len() < 4 {
            return Err(bad("missing header length"));
        }
        let hlen = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
        if bytes.len() < 4 + hlen {
            return Err(bad("truncated header"));
        }
        let header: Header = serde_json::from_slice(&bytes[4..4 + hlen])?;
        if header.format != BANK_FORMAT || header.version != BANK_VERSION {
            return Err(bad(&format!(
                "unsupported format {} v{}",
                header.format, header.version
            )));
        }
        let (n, m) = (header.bins, header.mics);
        let blob = &bytes[4 + hlen..];
        if blob.len() != n * m * 16 {
            return Err(bad(&format!("expected {} blob bytes, found {}", n * m * 16, blob.len())));
        }
        if header.methods.len() != n || header.magls_left.len() != n || header.magls_right.len() != n {
            return Err(bad("per-bin metadata length mismatch"));
        }
        let at = |i: usize| f32::from_le_bytes(blob[4 * i..4 * i + 4].try_into().unwrap()) as f64;
        let mut left = vec![Vec::with_capacity(m); n];
        let mut right = vec![Vec::with_capacity(m); n];
        for k in 0..n {
            for mic in 0..m {
                let base = ((k * m + mic) * 2) * 2;
                left[k].push(Complex64::new(at(base), at(base + 1)));
                right[k].push(Complex64::new(at(base + 2), at(base + 3)));
            }
        }
        Ok(Self {
            stft: header.stft,
            cutoff_hz: header.cutoff_hz,
            mics: m,
            left,
            right,
            methods: header.methods,
            magls_left: header.magls_left,
            magls_right: header.magls_right,
            meta: header.meta,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
