//! Box minima of per-grid-point ranks.
//!
//! One sparse table per grid row along the last axis answers interval minima
//! in constant time; a box query loops over the rows it covers.

use crate::geometry::Grid;

#[derive(Clone, Debug)]
pub(crate) struct RangeMin {
    row_len: usize,
    /// `levels[k][i]` is the minimum of `ranks[i..i + 2^k]` within a row.
    levels: Vec<Vec<u32>>,
}

impl RangeMin {
    pub(crate) fn new(grid: &Grid, ranks: Vec<u32>) -> Self {
        let row_len = *grid.points_per_axis().last().expect("nonempty grid");
        let mut levels = vec![ranks];
        let mut width = 1;
        while 2 * width <= row_len {
            let prev = levels.last().expect("level 0 exists");
            let next: Vec<u32> = (0..prev.len())
                .map(|i| {
                    let j = i % row_len;
                    if j + 2 * width <= row_len {
                        prev[i].min(prev[i + width])
                    } else {
                        prev[i]
                    }
                })
                .collect();
            levels.push(next);
            width *= 2;
        }
        RangeMin { row_len, levels }
    }

    /// Minimum over the row slice `[start, start + len)`, `len ≥ 1`.
    fn row_min(&self, start: usize, len: usize) -> u32 {
        debug_assert!(len >= 1 && (start % self.row_len) + len <= self.row_len);
        let k = usize::BITS - 1 - len.leading_zeros();
        let level = &self.levels[k as usize];
        level[start].min(level[start + len - (1 << k)])
    }

    /// Minimum over the box with inclusive per-axis index ranges.
    pub(crate) fn box_min(&self, grid: &Grid, ranges: &[(usize, usize)]) -> u32 {
        let (last_lo, last_hi) = *ranges.last().expect("nonempty ranges");
        let len = last_hi - last_lo + 1;
        let outer = &ranges[..ranges.len() - 1];
        let mut multi: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        let mut best = u32::MAX;
        loop {
            best = best.min(self.row_min(grid.ravel(&multi), len));
            let mut axis = outer.len();
            loop {
                if axis == 0 {
                    return best;
                }
                axis -= 1;
                if multi[axis] < outer[axis].1 {
                    multi[axis] += 1;
                    break;
                }
                multi[axis] = outer[axis].0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::geometry::CompactBox;

    fn brute(grid: &Grid, ranks: &[u32], ranges: &[(usize, usize)]) -> u32 {
        (0..grid.len())
            .filter(|&i| {
                grid.unravel(i)
                    .iter()
                    .zip(ranges)
                    .all(|(j, (lo, hi))| lo <= j && j <= hi)
            })
            .map(|i| ranks[i])
            .min()
            .unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn box_min_matches_scan(
            m0 in 2usize..9,
            m1 in 2usize..13,
            seed in any::<u64>(),
            a in any::<(usize, usize, usize, usize)>(),
        ) {
            let dom = CompactBox::cube(2, 0.0, 1.0).unwrap();
            let grid = Grid::new(&dom, vec![m0, m1]).unwrap();
            let ranks: Vec<u32> = (0..grid.len())
                .map(|i| ((i as u64).wrapping_mul(6364136223846793005).wrapping_add(seed) >> 40) as u32 % 50)
                .collect();
            let rm = RangeMin::new(&grid, ranks.clone());
            let (x0, x1) = (a.0 % m0, a.1 % m0);
            let (y0, y1) = (a.2 % m1, a.3 % m1);
            let ranges = [(x0.min(x1), x0.max(x1)), (y0.min(y1), y0.max(y1))];
            prop_assert_eq!(rm.box_min(&grid, &ranges), brute(&grid, &ranks, &ranges));
        }
    }

    #[test]
    fn one_dimensional_queries() {
        let dom = CompactBox::cube(1, 0.0, 1.0).unwrap();
        let grid = Grid::uniform(&dom, 7).unwrap();
        let ranks = vec![5, 3, 8, 1, 9, 2, 7];
        let rm = RangeMin::new(&grid, ranks.clone());
        for lo in 0..7 {
            for hi in lo..7 {
                assert_eq!(rm.box_min(&grid, &[(lo, hi)]), *ranks[lo..=hi].iter().min().unwrap());
            }
        }
    }
}
