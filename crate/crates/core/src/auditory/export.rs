use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AuditoryCueMaps;
use crate::error::{Error, Result};

pub const CUE_MAP_FORMAT: &str = "auditory-cue-maps";
pub const CUE_MAP_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    sample_rate: u32,
    center_freqs: Vec<f64>,
    ipd_bands: usize,
    samples: usize,
    /// Order of the float32 tensors following the header.
    layout: Vec<String>,
}

/// u32 header length, JSON header, then float32 ILD `[band][t]`, IPD, IVS.
pub fn write_cue_maps(path: impl AsRef<Path>, maps: &AuditoryCueMaps) -> Result<()> {
    let header = Header {
        format: CUE_MAP_FORMAT.into(),
        version: CUE_MAP_VERSION,
        sample_rate: maps.sample_rate,
        center_freqs: maps.center_freqs.clone(),
        ipd_bands: maps.n_ipd_bands(),
        samples: maps.n_samples(),
        layout: vec!["ild".into(), "ipd".into(), "ivs".into()],
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::new();
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for band in maps.ild.iter().chain(&maps.ipd).chain(&maps.ivs) {
        for v in band {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_cue_maps(path: impl AsRef<Path>) -> Result<AuditoryCueMaps> {
    let bytes = fs::read(path)?;
    let bad = |m: &str| Error::CueMapFormat(m.to_string());
    if bytes.len() < 4 {
        return Err(bad("missing header"));
    }
    let hlen = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
    if bytes.len() < 4 + hlen {
        return Err(bad("truncated header"));
    }
    let h: Header = serde_json::from_slice(&bytes[4..4 + hlen])?;
    if h.format != CUE_MAP_FORMAT || h.version != CUE_MAP_VERSION {
        return Err(bad("unsupported format"));
    }
    let n_bands = h.center_freqs.len();
    let blob = &bytes[4 + hlen..];
    let total = (2 * n_bands + h.ipd_bands) * h.samples;
    if blob.len() != total * 4 {
        return Err(bad("blob size does not match header"));
    }
    let mut vals = blob
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64);
    let mut take = |bands: usize| -> Vec<Vec<f64>> {
        (0..bands).map(|_| vals.by_ref().take(h.samples).collect()).collect()
    };
    let ild = take(n_bands);
    let ipd = take(h.ipd_bands);
    let ivs = take(n_bands);
    Ok(AuditoryCueMaps {
        sample_rate: h.sample_rate,
        center_freqs: h.center_freqs,
        ild,
        ipd,
        ivs,
    })
}
