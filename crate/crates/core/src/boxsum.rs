//! Summed-area tables for constant-time box sums over grid cubes.

use crate::grid::{Cube, MAX_DIM};
use crate::Real;

pub(crate) struct BoxSums<T> {
    dim: usize,
    n: usize,
    /// Prefix sums on the `(N+1)^d` lattice, zero on the lower faces.
    table: Vec<T>,
}

impl<T: Real> BoxSums<T> {
    pub(crate) fn new(dim: usize, n: usize, values: &[T]) -> Self {
        debug_assert_eq!(values.len(), n.pow(dim as u32));
        let m = n + 1;
        let mut table = vec![T::zero(); m.pow(dim as u32)];
        // Scatter values into the shifted lattice, then prefix-sum axis by axis.
        let mut idx = [0usize; MAX_DIM];
        for (flat, &v) in values.iter().enumerate() {
            let mut rest = flat;
            for k in (0..dim).rev() {
                idx[k] = rest % n + 1;
                rest /= n;
            }
            let t = idx[..dim].iter().fold(0, |acc, &i| acc * m + i);
            table[t] = v;
        }
        for axis in 0..dim {
            let stride = m.pow((dim - 1 - axis) as u32);
            for t in 0..table.len() {
                if (t / stride) % m != 0 {
                    let prev = table[t - stride];
                    table[t] += prev;
                }
            }
        }
        Self { dim, n, table }
    }

    pub(crate) fn sum(&self, q: &Cube) -> T {
        let m = self.n + 1;
        let d = self.dim;
        let corner = q.corner();
        let extent = q.extent();
        let mut total = T::zero();
        for mask in 0..(1usize << d) {
            let mut t = 0;
            let mut negative = false;
            for k in 0..d {
                let hi = mask >> k & 1 == 1;
                let i = if hi {
                    (corner[k] + extent[k]) as usize
                } else {
                    negative = !negative;
                    corner[k] as usize
                };
                t = t * m + i;
            }
            // `negative` flips once per low corner, so it tracks (-1)^{d - popcount}.
            if negative {
                total -= self.table[t];
            } else {
                total += self.table[t];
            }
        }
        total
    }

    pub(crate) fn mean(&self, q: &Cube) -> T {
        self.sum(q) / T::from_count(q.cells())
    }
}

/// Sparse table for range minima on a 1-D array.
pub(crate) struct RangeMin<T> {
    levels: Vec<Vec<T>>,
}

impl<T: Real> RangeMin<T> {
    pub(crate) fn new(values: &[T]) -> Self {
        let mut levels = vec![values.to_vec()];
        let mut width = 1;
        while 2 * width <= values.len() {
            let prev = levels.last().expect("nonempty");
            let next = (0..=values.len() - 2 * width)
                .map(|i| prev[i].min(prev[i + width]))
                .collect();
            levels.push(next);
            width *= 2;
        }
        Self { levels }
    }

    /// Minimum over `start..start + len`.
    pub(crate) fn min(&self, start: usize, len: usize) -> T {
        let k = (usize::BITS - 1 - len.leading_zeros()) as usize;
        let row = &self.levels[k];
        row[start].min(row[start + len - (1 << k)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_sums_match_direct_sums_2d() {
        let n = 7;
        let values: Vec<f64> = (0..n * n).map(|i| ((i * 37 % 11) as f64) - 3.5).collect();
        let sums = BoxSums::new(2, n, &values);
        for (corner, ext) in [([0, 0], [7, 7]), ([2, 3], [3, 2]), ([6, 0], [1, 5]), ([1, 1], [1, 1])] {
            let q = Cube::from_extents(&corner, &ext);
            let mut direct = 0.0;
            q.for_each_cell(n, |c| direct += values[c]);
            assert!((sums.sum(&q) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn box_sums_3d_total() {
        let n = 4;
        let values = vec![1.0f64; 64];
        let sums = BoxSums::new(3, n, &values);
        assert_eq!(sums.sum(&Cube::new(&[0, 0, 0], 4)), 64.0);
        assert_eq!(sums.sum(&Cube::new(&[1, 2, 0], 2)), 8.0);
    }

    #[test]
    fn range_min_matches_scan() {
        let values: Vec<f64> = (0..29).map(|i| ((i * 13 % 17) as f64).sin()).collect();
        let rm = RangeMin::new(&values);
        for a in 0..29 {
            for len in 1..=29 - a {
                let direct = values[a..a + len].iter().cloned().fold(f64::INFINITY, f64::min);
                assert_eq!(rm.min(a, len), direct);
            }
        }
    }
}
