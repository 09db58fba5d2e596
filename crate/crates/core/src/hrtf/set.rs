use super::{HrtfProvider, HrtfQuery, IrPair, Lookup};
use crate::error::{Error, Result};
use crate::geometry::{dot, Direction};

/// Directions closer than this (as a chord on the unit sphere) count as
/// duplicates.
const DUPLICATE_CHORD: f64 = 1e-9;

/// Grid of direction-indexed HRIR pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct HrtfSet {
    grid: Vec<Direction>,
    irs: Vec<IrPair>,
    sample_rate: u32,
    ir_len: usize,
    units: Vec<[f64; 3]>,
}

impl HrtfSet {
    pub fn new(grid: Vec<Direction>, irs: Vec<IrPair>, sample_rate: u32) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::EmptyHrtfSet);
        }
        if grid.len() != irs.len() {
            return Err(Error::LengthMismatch(format!(
                "{} directions but {} ir pairs",
                grid.len(),
                irs.len()
            )));
        }
        if sample_rate == 0 {
            return Err(Error::HrirPack("sample rate must be positive".into()));
        }
        let ir_len = irs[0].left.len();
        for (i, p) in irs.iter().enumerate() {
            if p.left.len() != ir_len || p.right.len() != ir_len {
                return Err(Error::LengthMismatch(format!(
                    "ir pair {i} has lengths {}/{}, expected {ir_len}",
                    p.left.len(),
                    p.right.len()
                )));
            }
            if p.left.iter().chain(&p.right).any(|x| !x.is_finite()) {
                return Err(Error::HrirPack(format!("ir pair {i} has non-finite samples")));
            }
        }
        let grid: Vec<Direction> = grid.iter().map(|d| d.normalized()).collect();
        let units: Vec<[f64; 3]> = grid.iter().map(|d| d.unit()).collect();
        check_duplicates(&grid, &units)?;
        Ok(Self {
            grid,
            irs,
            sample_rate,
            ir_len,
            units,
        })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn grid(&self) -> &[Direction] {
        &self.grid
    }

    pub fn irs(&self) -> &[IrPair] {
        &self.irs
    }

    pub fn ir(&self, idx: usize) -> &IrPair {
        &self.irs[idx]
    }

    pub fn ir_len(&self) -> usize {
        self.ir_len
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// Index of the grid entry closest to `dir` (lowest index on ties) and the
    /// great-circle distance to it in degrees.
    pub fn nearest(&self, dir: &Direction) -> (usize, f64) {
        let u = dir.unit();
        let mut best = 0;
        let mut best_dot = f64::NEG_INFINITY;
        for (i, g) in self.units.iter().enumerate() {
            let d = dot(*g, u);
            if d > best_dot {
                best_dot = d;
                best = i;
            }
        }
        (best, self.grid[best].angle_to(dir))
    }

    /// Nearest entry to the query's rotated direction.
    pub fn lookup_rotated(&self, query: &HrtfQuery) -> Lookup {
        let target = query.rotated();
        let (index, error_deg) = self.nearest(&target);
        Lookup {
            pair: self.irs[index].clone(),
            direction: self.grid[index],
            index: Some(index),
            error_deg,
        }
    }
}

fn check_duplicates(grid: &[Direction], units: &[[f64; 3]]) -> Result<()> {
    // sort by z so only a narrow band of neighbours needs comparing
    let mut order: Vec<usize> = (0..units.len()).collect();
    order.sort_by(|&a, &b| units[a][2].total_cmp(&units[b][2]));
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if units[j][2] - units[i][2] > DUPLICATE_CHORD {
                break;
            }
            let d: f64 = (0..3).map(|k| (units[i][k] - units[j][k]).powi(2)).sum::<f64>().sqrt();
            if d <= DUPLICATE_CHORD {
                let g = grid[i.max(j)];
                return Err(Error::DuplicateDirection {
                    theta: g.theta_deg,
                    phi: g.phi_deg,
                });
            }
        }
    }
    Ok(())
}

impl HrtfProvider for HrtfSet {
    fn name(&self) -> String {
        format!("set[{}]", self.len())
    }

    fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    fn lookup(&self, query: &HrtfQuery) -> Result<Lookup> {
        Ok(self.lookup_rotated(query))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{azimuth_ring, fibonacci_grid};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tagged_set(grid: Vec<Direction>) -> HrtfSet {
        let irs = (0..grid.len())
            .map(|i| IrPair {
                left: vec![i as f64, 0.0],
                right: vec![0.0, i as f64],
            })
            .collect();
        HrtfSet::new(grid, irs, 16000).unwrap()
    }

    /// 3-degree latitude/longitude grid plus the two poles.
    fn dense_grid() -> Vec<Direction> {
        let mut grid = vec![Direction::new(0.0, 0.0), Direction::new(180.0, 0.0)];
        for ti in 1..60 {
            for pi in 0..120 {
                grid.push(Direction::new(3.0 * ti as f64, -180.0 + 3.0 * pi as f64));
            }
        }
        grid
    }

    #[test]
    fn identity_on_grid_point() {
        let set = tagged_set(fibonacci_grid(500));
        for i in [0, 17, 250, 499] {
            let l = set.lookup_rotated(&HrtfQuery::new(set.grid()[i], 0.0));
            assert_eq!(l.index, Some(i));
            assert_eq!(l.error_deg, 0.0);
            assert_eq!(l.pair.left[0], i as f64);
        }
    }

    #[test]
    fn ring_rotation_shifts_by_whole_steps() {
        let set = tagged_set(azimuth_ring(72));
        let start = 2;
        let l = set.lookup_rotated(&HrtfQuery::new(set.grid()[start], 15.0));
        assert_eq!(l.index, Some(start + 3));
        assert!(l.error_deg < 1e-9);
    }

    #[test]
    fn lookup_error_within_covering_radius() {
        let set = tagged_set(dense_grid());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            let z: f64 = rng.gen_range(-1.0..1.0);
            let q = Direction::new(z.acos().to_degrees(), rng.gen_range(-180.0..180.0));
            let rot = rng.gen_range(-60.0..60.0);
            let l = set.lookup_rotated(&HrtfQuery::new(q, rot));
            let target = q.rotated_azimuth(rot);
            // brute-force oracle over the grid
            let best = set
                .grid()
                .iter()
                .map(|g| g.angle_to(&target))
                .fold(f64::INFINITY, f64::min);
            assert!((l.error_deg - best).abs() < 1e-9);
            assert!(l.error_deg <= 3.0);
        }
    }

    #[test]
    fn duplicate_directions_rejected() {
        let mut grid = fibonacci_grid(10);
        grid.push(grid[4]);
        let irs = vec![IrPair { left: vec![0.0], right: vec![0.0] }; 11];
        assert!(matches!(
            HrtfSet::new(grid, irs, 16000),
            Err(Error::DuplicateDirection { .. })
        ));
        // the same direction written with a wrapped azimuth
        let grid = vec![Direction::horizontal(180.0), Direction::horizontal(-180.0)];
        let irs = vec![IrPair { left: vec![0.0], right: vec![0.0] }; 2];
        assert!(HrtfSet::new(grid, irs, 16000).is_err());
    }

    #[test]
    fn length_mismatch_rejected() {
        let grid = fibonacci_grid(2);
        let irs = vec![
            IrPair { left: vec![0.0; 4], right: vec![0.0; 4] },
            IrPair { left: vec![0.0; 4], right: vec![0.0; 3] },
        ];
        assert!(matches!(HrtfSet::new(grid, irs, 16000), Err(Error::LengthMismatch(_))));
        assert!(matches!(HrtfSet::new(vec![], vec![], 16000), Err(Error::EmptyHrtfSet)));
    }

    proptest! {
        #[test]
        fn lookup_is_idempotent(theta in 0.0f64..180.0, phi in -180.0f64..180.0, rot in -90.0f64..90.0) {
            let set = tagged_set(fibonacci_grid(400));
            let first = set.lookup_rotated(&HrtfQuery::new(Direction::new(theta, phi), rot));
            let again = set.lookup_rotated(&HrtfQuery::new(first.direction, 0.0));
            prop_assert_eq!(first.index, again.index);
        }

        #[test]
        fn ring_rotations_compose(start in 0usize..72, a in -12i32..12, b in -12i32..12) {
            let set = tagged_set(azimuth_ring(72));
            let q = HrtfQuery::new(set.grid()[start], 5.0 * a as f64);
            let step = set.lookup_rotated(&q);
            let two = set.lookup_rotated(&HrtfQuery::new(step.direction, 5.0 * b as f64));
            let once = set.lookup_rotated(&HrtfQuery::new(set.grid()[start], 5.0 * (a + b) as f64));
            prop_assert_eq!(two.index, once.index);
        }
    }
}
