use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acoustics::RoomSpec;
use crate::error::{Error, Result};
use crate::geometry::wrap_degrees;

pub const MAX_REJECTIONS: usize = 10_000;

/// Which subset a scene belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Closed interval `[lo, hi]`; `lo == hi` pins the value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub const fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.gen_range(self.lo..=self.hi)
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi) {
            return Err(Error::Config(format!("{what}: invalid range [{}, {}]", self.lo, self.hi)));
        }
        Ok(())
    }
}

/// Sampling ranges for scene generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneRanges {
    pub lx: Range,
    pub ly: Range,
    pub lz: Range,
    pub t60: Range,
    /// Source distance from the array centre, meters.
    pub distance: Range,
    pub array_wall_margin: f64,
    pub source_wall_margin: f64,
    /// Source azimuth to the right of the array's front, degrees.
    pub doa_deg: Range,
    /// Rightward head rotation, degrees.
    pub rotation_deg: Range,
    /// Height of array and source, meters.
    pub height: f64,
}

impl Default for SceneRanges {
    fn default() -> Self {
        Self {
            lx: Range::new(6.0, 10.0),
            ly: Range::new(6.0, 10.0),
            lz: Range::new(3.0, 4.0),
            t60: Range::new(0.3, 0.8),
            distance: Range::new(1.5, 4.0),
            array_wall_margin: 1.0,
            source_wall_margin: 0.5,
            doa_deg: Range::new(0.0, 60.0),
            rotation_deg: Range::new(21.0, 60.0),
            height: 1.7,
        }
    }
}

impl SceneRanges {
    pub fn validate(&self) -> Result<()> {
        for (n, r) in [
            ("lx", self.lx),
            ("ly", self.ly),
            ("lz", self.lz),
            ("t60", self.t60),
            ("distance", self.distance),
            ("doa_deg", self.doa_deg),
            ("rotation_deg", self.rotation_deg),
        ] {
            r.validate(n)?;
        }
        if self.lx.lo <= 0.0 || self.ly.lo <= 0.0 || self.lz.lo <= 0.0 || self.t60.lo <= 0.0 {
            return Err(Error::Config("room dimensions and t60 must be positive".into()));
        }
        if self.distance.lo <= 0.0 || self.array_wall_margin < 0.0 || self.source_wall_margin < 0.0 {
            return Err(Error::Config("distances and wall margins must be positive".into()));
        }
        Ok(())
    }
}

/// One simulated scene. The array yaw places the source `doa_deg` to the
/// right of the array's front.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub id: String,
    pub index: u64,
    pub room: RoomSpec,
    pub source_pos: [f64; 3],
    pub array_pos: [f64; 3],
    pub array_yaw_deg: f64,
    pub doa_deg: f64,
    pub rotation_deg: f64,
    #[serde(default)]
    pub speech_ref: String,
    pub split: Split,
}

impl SceneSpec {
    pub fn source_distance(&self) -> f64 {
        let d: Vec<f64> = (0..3).map(|i| self.source_pos[i] - self.array_pos[i]).collect();
        d.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

pub fn scene_id(master_seed: u64, index: u64) -> String {
    format!("s{master_seed:x}-{index:06}")
}

/// Per-scene generator: ChaCha8 keyed by the master seed, stream = scene
/// index. Scenes are independent of each other and of evaluation order.
pub fn scene_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Samples scene `index` by rejection. Room, T60, DOA and rotation are
/// drawn once; positions are redrawn until every margin holds. `split`
/// and `speech_ref` are left for the caller.
pub fn sample_scene(master_seed: u64, index: u64, ranges: &SceneRanges) -> Result<SceneSpec> {
    ranges.validate()?;
    let mut rng = scene_rng(master_seed, index);
    let dims = [ranges.lx.sample(&mut rng), ranges.ly.sample(&mut rng), ranges.lz.sample(&mut rng)];
    let t60 = ranges.t60.sample(&mut rng);
    let doa = ranges.doa_deg.sample(&mut rng);
    let rot = ranges.rotation_deg.sample(&mut rng);
    let h = ranges.height;

    let inside = |p: [f64; 3], m: f64| (0..3).all(|i| p[i] >= m && p[i] <= dims[i] - m);
    for _ in 0..MAX_REJECTIONS {
        let am = ranges.array_wall_margin;
        if dims[0] < 2.0 * am || dims[1] < 2.0 * am {
            break;
        }
        let array = [rng.gen_range(am..=dims[0] - am), rng.gen_range(am..=dims[1] - am), h];
        let d = ranges.distance.sample(&mut rng);
        let az: f64 = rng.gen_range(0.0..360.0);
        let (s, c) = az.to_radians().sin_cos();
        let source = [array[0] + d * c, array[1] + d * s, h];
        if !inside(array, am) || !inside(source, ranges.source_wall_margin) {
            continue;
        }
        return Ok(SceneSpec {
            id: scene_id(master_seed, index),
            index,
            room: RoomSpec::new(dims, t60),
            source_pos: source,
            array_pos: array,
            array_yaw_deg: wrap_degrees(az + doa),
            doa_deg: doa,
            rotation_deg: rot,
            speech_ref: String::new(),
            split: Split::Train,
        });
    }
    Err(Error::Infeasible(MAX_REJECTIONS))
}
