use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Direction;

use super::sphere::DEFAULT_SPEED_OF_SOUND;

fn default_speed_of_sound() -> f64 {
    DEFAULT_SPEED_OF_SOUND
}

/// Shoebox room with uniform wall reflection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    /// (Lx, Ly, Lz) in meters.
    pub dims: [f64; 3],
    pub t60: f64,
    #[serde(default = "default_speed_of_sound")]
    pub speed_of_sound: f64,
}

impl RoomSpec {
    pub fn new(dims: [f64; 3], t60: f64) -> Self {
        Self {
            dims,
            t60,
            speed_of_sound: DEFAULT_SPEED_OF_SOUND,
        }
    }

    pub fn volume(&self) -> f64 {
        self.dims.iter().product()
    }

    pub fn surface(&self) -> f64 {
        let [x, y, z] = self.dims;
        2.0 * (x * y + x * z + y * z)
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        p.iter().zip(&self.dims).all(|(&v, &l)| v > 0.0 && v < l)
    }

    /// Smallest distance from `p` to any of the six walls.
    pub fn wall_distance(&self, p: [f64; 3]) -> f64 {
        p.iter()
            .zip(&self.dims)
            .map(|(&v, &l)| v.min(l - v))
            .fold(f64::INFINITY, f64::min)
    }

    fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::Config(format!("invalid room dims {:?}", self.dims)));
        }
        if !(self.speed_of_sound > 0.0) {
            return Err(Error::Config("speed of sound must be positive".into()));
        }
        Ok(())
    }
}

/// Uniform wall reflection magnitude from Eyring's reverberation formula.
pub fn t60_to_reflection(room: &RoomSpec) -> Result<f64> {
    room.validate()?;
    if !(room.t60 > 0.0) {
        return Err(Error::InvalidT60(room.t60));
    }
    let remaining = (-0.161 * room.volume() / (room.surface() * room.t60)).exp();
    let absorption = 1.0 - remaining;
    if absorption >= 1.0 {
        return Err(Error::InvalidT60(room.t60));
    }
    Ok(remaining.sqrt())
}

/// How a room's target T60 is turned into a wall reflection magnitude.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReflectionModel {
    /// Eyring's statistical formula.
    Eyring,
    /// Eyring as the starting point, then adjusted until the Schroeder
    /// decay of the rendered omnidirectional response has the requested T60.
    #[default]
    Calibrated,
}

/// Reflection magnitude for `room.t60` under `model`, for the given source
/// and array positions.
pub fn reflection_for(
    room: &RoomSpec,
    src: [f64; 3],
    array: [f64; 3],
    model: ReflectionModel,
    sample_rate: u32,
) -> Result<f64> {
    let eyring = t60_to_reflection(room)?;
    match model {
        ReflectionModel::Eyring => Ok(eyring),
        ReflectionModel::Calibrated => calibrate_reflection(room, src, array, eyring, sample_rate),
    }
}

fn calibrate_reflection(
    room: &RoomSpec,
    src: [f64; 3],
    array: [f64; 3],
    initial: f64,
    sample_rate: u32,
) -> Result<f64> {
    if initial == 0.0 || !room.t60.is_finite() {
        return Ok(initial);
    }
    let images = enumerate_images(
        room,
        initial,
        src,
        array,
        ImageLimits {
            max_delay: room.t60,
            max_order: None,
        },
    )?;
    let len = (room.t60 * sample_rate as f64).ceil() as usize + 1;
    let decay_t60 = |a: f64| -> Option<f64> {
        let arrivals = images.entries.iter().map(|e| {
            let gain = (-a * e.order as f64).exp() / (4.0 * std::f64::consts::PI * e.distance);
            (e.delay, gain)
        });
        let rir = super::schroeder::omni_rir_from(arrivals, sample_rate, len);
        super::schroeder::measure_t60(&rir, sample_rate).ok()
    };
    // absorption exponent a = -ln R; T60 scales roughly as 1/a
    let mut a = -initial.ln();
    for _ in 0..30 {
        match decay_t60(a) {
            Some(t) => {
                let ratio = t / room.t60;
                if (ratio - 1.0).abs() < 2e-3 {
                    break;
                }
                a *= ratio.clamp(0.5, 2.0);
            }
            None => a *= 1.5,
        }
    }
    Ok((-a).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageSource {
    /// Arrival direction seen from the array center.
    pub direction: Direction,
    pub delay: f64,
    pub gain: f64,
    pub order: u32,
    pub distance: f64,
    /// Lattice index of the image cell along x, y, z.
    pub index: [i32; 3],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImageSourceList {
    pub entries: Vec<ImageSource>,
}

impl ImageSourceList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_delay(&self) -> f64 {
        self.entries.iter().map(|e| e.delay).fold(0.0, f64::max)
    }
}

/// Bounds on image-source enumeration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageLimits {
    pub max_delay: f64,
    pub max_order: Option<u32>,
}

/// All image sources of the room within `max_delay`, using the Eyring
/// reflection magnitude of `room.t60`.
pub fn image_sources(
    room: &RoomSpec,
    src: [f64; 3],
    array: [f64; 3],
    max_delay: f64,
) -> Result<ImageSourceList> {
    let r = t60_to_reflection(room)?;
    enumerate_images(
        room,
        r,
        src,
        array,
        ImageLimits {
            max_delay,
            max_order: None,
        },
    )
}

/// Image sources for an explicit reflection magnitude. With `reflection`
/// equal to zero only the direct path is returned.
pub fn enumerate_images(
    room: &RoomSpec,
    reflection: f64,
    src: [f64; 3],
    array: [f64; 3],
    limits: ImageLimits,
) -> Result<ImageSourceList> {
    room.validate()?;
    for (name, p) in [("source", src), ("array", array)] {
        if !room.contains(p) {
            return Err(Error::OutsideRoom(format!("{name} at {p:?}")));
        }
    }
    let c = room.speed_of_sound;
    let radius = limits.max_delay * c;
    let max_order = if reflection == 0.0 {
        Some(0)
    } else {
        limits.max_order
    };

    // per-axis image coordinates and their reflection counts
    let axis = |a: usize| -> Vec<(i32, f64)> {
        let l = room.dims[a];
        let n_max = (radius / l).ceil() as i32 + 1;
        (-n_max..=n_max)
            .map(|n| {
                let x = if n % 2 == 0 {
                    n as f64 * l + src[a]
                } else {
                    (n + 1) as f64 * l - src[a]
                };
                (n, x - array[a])
            })
            .filter(|&(_, d)| d.abs() <= radius)
            .collect()
    };
    let (ax, ay, az) = (axis(0), axis(1), axis(2));

    let mut entries = Vec::new();
    for &(i, dx) in &ax {
        for &(j, dy) in &ay {
            let dxy = dx * dx + dy * dy;
            if dxy > radius * radius {
                continue;
            }
            for &(k, dz) in &az {
                let order = (i.unsigned_abs()) + (j.unsigned_abs()) + (k.unsigned_abs());
                if max_order.is_some_and(|m| order > m) {
                    continue;
                }
                let d2 = dxy + dz * dz;
                if d2 > radius * radius {
                    continue;
                }
                let distance = d2.sqrt();
                entries.push(ImageSource {
                    direction: Direction::from_vector([dx, dy, dz]),
                    delay: distance / c,
                    gain: reflection.powi(order as i32) / (4.0 * std::f64::consts::PI * distance),
                    order,
                    distance,
                    index: [i, j, k],
                });
            }
        }
    }
    entries.sort_by(|a, b| a.delay.total_cmp(&b.delay).then(a.index.cmp(&b.index)));
    Ok(ImageSourceList { entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn room() -> RoomSpec {
        RoomSpec::new([8.0, 6.0, 3.5], 0.5)
    }

    #[test]
    fn eyring_limits() {
        let mut r = room();
        r.t60 = f64::INFINITY;
        assert!((t60_to_reflection(&r).unwrap() - 1.0).abs() < 1e-12);
        r.t60 = 1e6;
        assert!(t60_to_reflection(&r).unwrap() > 0.9999);
        r.t60 = 0.0;
        assert!(t60_to_reflection(&r).is_err());
        r.t60 = 1e-5;
        assert!(matches!(t60_to_reflection(&r), Err(Error::InvalidT60(_))));
    }

    #[test]
    fn eyring_value() {
        let r = room();
        let expected = (-0.161f64 * 168.0 / (2.0 * (48.0 + 28.0 + 21.0) * 0.5)).exp().sqrt();
        assert!((t60_to_reflection(&r).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn anechoic_gives_direct_path_only() {
        let r = room();
        let src = [2.0, 3.0, 1.7];
        let arr = [5.0, 3.0, 1.7];
        let list = enumerate_images(
            &r,
            0.0,
            src,
            arr,
            ImageLimits {
                max_delay: 1.0,
                max_order: None,
            },
        )
        .unwrap();
        assert_eq!(list.len(), 1);
        assert!((list.entries[0].delay - 3.0 / 343.0).abs() < 1e-15);
        assert!((list.entries[0].direction.phi_deg.abs() - 180.0).abs() < 1e-9);
    }

    #[test]
    fn first_order_has_six_images() {
        let list = enumerate_images(
            &room(),
            0.7,
            [2.0, 2.5, 1.2],
            [5.0, 3.0, 1.7],
            ImageLimits {
                max_delay: 1.0,
                max_order: Some(1),
            },
        )
        .unwrap();
        assert_eq!(list.len(), 7);
        assert_eq!(list.entries.iter().filter(|e| e.order == 1).count(), 6);
        // first-order image across the x = 0 wall sits at (-2, 2.5, 1.2)
        let img = list.entries.iter().find(|e| e.index == [-1, 0, 0]).unwrap();
        let expected = ((7.0f64).powi(2) + 0.25 + 0.25).sqrt();
        assert!((img.distance - expected).abs() < 1e-12);
        assert!((img.gain - 0.7 / (4.0 * std::f64::consts::PI * expected)).abs() < 1e-15);
    }

    #[test]
    fn inverse_distance_law() {
        let lim = ImageLimits {
            max_delay: 1.0,
            max_order: Some(0),
        };
        let r = room();
        let a = enumerate_images(&r, 0.5, [1.0, 3.0, 1.7], [3.0, 3.0, 1.7], lim).unwrap();
        let b = enumerate_images(&r, 0.5, [1.0, 3.0, 1.7], [5.0, 3.0, 1.7], lim).unwrap();
        assert!((a.entries[0].gain / b.entries[0].gain - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ordering_and_delay_bound() {
        let list = image_sources(&room(), [2.0, 2.0, 1.7], [5.0, 4.0, 1.7], 0.1).unwrap();
        assert!(list.entries.windows(2).all(|w| w[0].delay <= w[1].delay));
        assert!(list.max_delay() <= 0.1);
        // brute force count over a generous lattice
        let mut count = 0;
        let r = room();
        for i in -20..=20i32 {
            for j in -20..=20i32 {
                for k in -40..=40i32 {
                    let img = |n: i32, l: f64, s: f64| {
                        if n.rem_euclid(2) == 0 {
                            n as f64 * l + s
                        } else {
                            (n + 1) as f64 * l - s
                        }
                    };
                    let p = [img(i, 8.0, 2.0), img(j, 6.0, 2.0), img(k, 3.5, 1.7)];
                    let d = ((p[0] - 5.0).powi(2) + (p[1] - 4.0).powi(2) + (p[2] - 1.7).powi(2)).sqrt();
                    if d / r.speed_of_sound <= 0.1 {
                        count += 1;
                    }
                }
            }
        }
        assert_eq!(list.len(), count);
    }

    #[test]
    fn outside_room_rejected() {
        assert!(matches!(
            image_sources(&room(), [9.0, 1.0, 1.0], [1.0, 1.0, 1.0], 0.5),
            Err(Error::OutsideRoom(_))
        ));
    }
}
