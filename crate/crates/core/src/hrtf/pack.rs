//! HRIR-pack container: little-endian `"HRIR"`, u32 version, u32 count,
//! u32 ir_len, u32 sample_rate, count × (θ, φ) as f64 degrees, then
//! count × (left, right) × ir_len f32 samples.

use std::fs;
use std::path::Path;

use super::{HrtfSet, IrPair};
use crate::error::{Error, Result};
use crate::geometry::Direction;
use crate::signal::{resample, AudioBuffer, WORKING_RATE};

pub const HRIR_PACK_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"HRIR";
const HEADER_LEN: usize = 20;

pub fn write_hrir_pack(path: impl AsRef<Path>, set: &HrtfSet) -> Result<()> {
    let n = set.len();
    let len = set.ir_len();
    let mut buf = Vec::with_capacity(HEADER_LEN + n * 16 + n * 2 * len * 4);
    buf.extend_from_slice(MAGIC);
    for v in [HRIR_PACK_VERSION, n as u32, len as u32, set.sample_rate()] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for d in set.grid() {
        buf.extend_from_slice(&d.theta_deg.to_le_bytes());
        buf.extend_from_slice(&d.phi_deg.to_le_bytes());
    }
    for p in set.irs() {
        for x in p.left.iter().chain(&p.right) {
            buf.extend_from_slice(&(*x as f32).to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

/// Parses a pack at its stored sample rate.
pub fn read_hrir_pack(path: impl AsRef<Path>) -> Result<HrtfSet> {
    let bytes = fs::read(path)?;
    if bytes.len() < HEADER_LEN {
        return Err(Error::HrirPack("file shorter than header".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::HrirPack("bad magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let version = word(0);
    if version != HRIR_PACK_VERSION {
        return Err(Error::HrirPack(format!("unsupported version {version}")));
    }
    let n = word(1) as usize;
    let len = word(2) as usize;
    let rate = word(3);
    let expected = HEADER_LEN + n * 16 + n * 2 * len * 4;
    if bytes.len() != expected {
        return Err(Error::HrirPack(format!(
            "expected {expected} bytes for {n} directions of {len} samples, found {}",
            bytes.len()
        )));
    }
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let grid = (0..n)
        .map(|i| {
            let o = HEADER_LEN + 16 * i;
            Direction::new(f64_at(o), f64_at(o + 8))
        })
        .collect();
    let base = HEADER_LEN + 16 * n;
    let f32_at = |i: usize| {
        let o = base + 4 * i;
        f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as f64
    };
    let irs = (0..n)
        .map(|i| {
            let start = 2 * len * i;
            IrPair {
                left: (start..start + len).map(f32_at).collect(),
                right: (start + len..start + 2 * len).map(f32_at).collect(),
            }
        })
        .collect();
    HrtfSet::new(grid, irs, rate)
}

/// Reads a pack and resamples it to the working rate when needed.
pub fn load_hrir_pack(path: impl AsRef<Path>) -> Result<HrtfSet> {
    let set = read_hrir_pack(path)?;
    if set.sample_rate() == WORKING_RATE {
        return Ok(set);
    }
    let irs = set
        .irs()
        .iter()
        .map(|p| {
            let buf = AudioBuffer::new(vec![p.left.clone(), p.right.clone()], set.sample_rate())?;
            let mut ch = resample(&buf, WORKING_RATE)?.into_channels();
            let right = ch.pop().expect("two channels");
            let left = ch.pop().expect("two channels");
            Ok(IrPair { left, right })
        })
        .collect::<Result<Vec<_>>>()?;
    HrtfSet::new(set.grid().to_vec(), irs, WORKING_RATE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::fibonacci_grid;
    use crate::hrtf::AnalyticHrtf;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_set(n: usize, len: usize, rate: u32) -> HrtfSet {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let mut ir = || -> Vec<f64> {
            (0..len).map(|_| rng.gen_range(-1.0f32..1.0) as f64).collect()
        };
        let irs = (0..n).map(|_| IrPair { left: ir(), right: ir() }).collect();
        HrtfSet::new(fibonacci_grid(n), irs, rate).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.hrir");
        let set = random_set(50, 64, 16000);
        write_hrir_pack(&path, &set).unwrap();
        let back = load_hrir_pack(&path).unwrap();
        assert_eq!(back.grid(), set.grid());
        assert_eq!(back.irs(), set.irs());
    }

    #[test]
    fn dense_pack_loads_every_direction() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dense.hrir");
        let set = AnalyticHrtf::default().to_set(&fibonacci_grid(2702)).unwrap();
        write_hrir_pack(&path, &set).unwrap();
        let back = load_hrir_pack(&path).unwrap();
        assert_eq!(back.len(), 2702);
        assert_eq!(back.ir_len(), 128);
    }

    #[test]
    fn duplicate_direction_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dup.hrir");
        let set = random_set(4, 8, 16000);
        write_hrir_pack(&path, &set).unwrap();
        // overwrite direction 3 with direction 1
        let mut bytes = fs::read(&path).unwrap();
        let src = bytes[HEADER_LEN + 16..HEADER_LEN + 32].to_vec();
        bytes[HEADER_LEN + 48..HEADER_LEN + 64].copy_from_slice(&src);
        fs::write(&path, bytes).unwrap();
        assert!(matches!(load_hrir_pack(&path), Err(Error::DuplicateDirection { .. })));
    }

    #[test]
    fn header_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.hrir");
        let set = random_set(4, 8, 16000);
        write_hrir_pack(&path, &set).unwrap();
        let good = fs::read(&path).unwrap();

        let mut b = good.clone();
        b[0] = b'X';
        fs::write(&path, &b).unwrap();
        assert!(matches!(read_hrir_pack(&path), Err(Error::HrirPack(_))));

        let mut b = good.clone();
        b[4] = 2;
        fs::write(&path, &b).unwrap();
        assert!(matches!(read_hrir_pack(&path), Err(Error::HrirPack(_))));

        fs::write(&path, &good[..good.len() - 4]).unwrap();
        assert!(matches!(read_hrir_pack(&path), Err(Error::HrirPack(_))));
    }

    #[test]
    fn foreign_rate_is_resampled() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("48k.hrir");
        let len = 384;
        let grid = fibonacci_grid(3);
        // 1 kHz tone bursts survive the rate change with their amplitude
        let tone: Vec<f64> = (0..len)
            .map(|i| ((2.0 * std::f64::consts::PI * 1000.0 * i as f64 / 48000.0).sin() as f32) as f64)
            .collect();
        let irs = vec![IrPair { left: tone.clone(), right: tone }; 3];
        write_hrir_pack(&path, &HrtfSet::new(grid, irs, 48000).unwrap()).unwrap();
        let set = load_hrir_pack(&path).unwrap();
        assert_eq!(set.sample_rate(), 16000);
        assert!((set.ir_len() as i64 - 128).abs() <= 1);
        let mid = &set.ir(0).left[40..90];
        let peak = mid.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!((peak - 1.0).abs() < 0.02, "peak {peak}");
    }
}
