//! Unscrambled Sobol low-discrepancy sequence for up to six dimensions.
//!
//! Points are produced in Gray-code order. Index zero (the origin) is never
//! returned: with `skip = 0` the first point is `(0.5, ..., 0.5)`.

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Highest supported dimension.
pub const MAX_SOBOL_DIMS: usize = 6;

const BITS: usize = 32;

// (degree s, polynomial coefficient a, initial direction numbers m_1..m_s),
// from the new-joe-kuo-6.21201 table. Dimension 1 is the van der Corput sequence.
const DIRECTION_TABLE: [(u32, &[u32]); MAX_SOBOL_DIMS - 1] = [
    (0, &[1]),
    (1, &[1, 3]),
    (1, &[1, 3, 1]),
    (2, &[1, 1, 1]),
    (1, &[1, 1, 3, 3]),
];

fn direction_numbers(dim: usize) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    if dim == 0 {
        for (k, vk) in v.iter_mut().enumerate() {
            *vk = 1 << (31 - k);
        }
        return v;
    }
    let (a, m) = DIRECTION_TABLE[dim - 1];
    let s = m.len();
    for k in 0..s {
        v[k] = m[k] << (31 - k);
    }
    for k in s..BITS {
        v[k] = v[k - s] ^ (v[k - s] >> s);
        for j in 1..s {
            if (a >> (s - 1 - j)) & 1 == 1 {
                v[k] ^= v[k - j];
            }
        }
    }
    v
}

/// Deterministic Sobol generator over a fixed number of dimensions.
#[derive(Debug, Clone)]
pub struct Sobol {
    directions: Vec<[u32; BITS]>,
}

impl Sobol {
    pub fn new(dims: usize) -> Result<Self> {
        if dims == 0 || dims > MAX_SOBOL_DIMS {
            return Err(Error::UnsupportedDimension {
                dims,
                max: MAX_SOBOL_DIMS,
            });
        }
        Ok(Self {
            directions: (0..dims).map(direction_numbers).collect(),
        })
    }

    pub fn dims(&self) -> usize {
        self.directions.len()
    }

    /// The point at sequence position `index`, with `index >= 1`.
    pub fn point(&self, index: u64) -> Point {
        assert!(
            (1..(1u64 << BITS)).contains(&index),
            "Sobol index out of range"
        );
        let gray = index ^ (index >> 1);
        let coords = self
            .directions
            .iter()
            .map(|v| {
                let mut x = 0u32;
                let mut bits = gray;
                let mut k = 0;
                while bits != 0 {
                    if bits & 1 == 1 {
                        x ^= v[k];
                    }
                    bits >>= 1;
                    k += 1;
                }
                f64::from(x) / 4_294_967_296.0
            })
            .collect();
        Point::new(coords)
    }

    /// Iterator over points starting after `skip` discarded points.
    pub fn iter_from(&self, skip: u64) -> impl Iterator<Item = Point> + '_ {
        (skip + 1..).map(move |i| self.point(i))
    }
}

/// The first `n` Sobol points in `[0,1)^dims` after discarding `skip`.
pub fn sobol_sequence(n: usize, dims: usize, skip: u64) -> Result<Vec<Point>> {
    let sobol = Sobol::new(dims)?;
    Ok(sobol.iter_from(skip).take(n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn star_discrepancy_1d(xs: &[f64]) -> f64 {
        let mut s = xs.to_vec();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = s.len() as f64;
        let worst = s
            .iter()
            .enumerate()
            .map(|(i, x)| (x - (2.0 * i as f64 + 1.0) / (2.0 * n)).abs())
            .fold(0.0, f64::max);
        1.0 / (2.0 * n) + worst
    }

    #[test]
    fn first_point_is_center() {
        let pts = sobol_sequence(1, 2, 0).unwrap();
        assert_eq!(pts[0].coords(), &[0.5, 0.5]);
    }

    #[test]
    fn known_prefix_dim2() {
        // Gray-code Sobol, second coordinate uses m = [1].
        let pts = sobol_sequence(4, 2, 0).unwrap();
        let expect = [[0.5, 0.5], [0.75, 0.25], [0.25, 0.75], [0.375, 0.375]];
        for (p, e) in pts.iter().zip(expect.iter()) {
            assert_eq!(p.coords(), e);
        }
    }

    #[test]
    fn unsupported_dims() {
        assert!(matches!(
            sobol_sequence(3, 7, 0),
            Err(Error::UnsupportedDimension { dims: 7, .. })
        ));
        assert!(sobol_sequence(3, 0, 0).is_err());
    }

    #[test]
    fn beats_pseudo_random_discrepancy() {
        let sob: Vec<f64> = sobol_sequence(4, 1, 0)
            .unwrap()
            .iter()
            .map(|p| p[0])
            .collect();
        let d_sobol = star_discrepancy_1d(&sob);
        let mut total = 0.0;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xs: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
            total += star_discrepancy_1d(&xs);
        }
        assert!(d_sobol < total / 100.0, "{d_sobol} vs {}", total / 100.0);
    }

    #[test]
    fn skip_matches_offset_prefix() {
        let long = sobol_sequence(20, 6, 0).unwrap();
        let tail = sobol_sequence(10, 6, 10).unwrap();
        assert_eq!(&long[10..], &tail[..]);
    }

    #[test]
    fn coordinates_distinct_and_in_unit_cube() {
        for dims in 1..=MAX_SOBOL_DIMS {
            let pts = sobol_sequence(1024, dims, 0).unwrap();
            for p in &pts {
                assert!(p.iter().all(|&x| x > 0.0 && x < 1.0));
            }
            // A (0,m,s)-style net: every coordinate takes 1024 distinct dyadic values.
            for d in 0..dims {
                let mut col: Vec<f64> = pts.iter().map(|p| p[d]).collect();
                col.sort_by(|a, b| a.partial_cmp(b).unwrap());
                col.dedup();
                assert_eq!(col.len(), 1024);
            }
        }
    }
}
