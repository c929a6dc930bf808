//! Acceleration for spaces whose sample lies on a line with the plain
//! Euclidean distance. There every open ball is a contiguous run of sample
//! indices, so hole and packing queries reduce to range queries.

/// Sparse table answering range-maximum queries in O(1).
#[derive(Clone, Debug)]
pub(crate) struct SparseMax {
    levels: Vec<Vec<f64>>,
}

impl SparseMax {
    pub(crate) fn new(values: &[f64]) -> Self {
        let mut levels = vec![values.to_vec()];
        let mut width = 1;
        while 2 * width <= values.len() {
            let prev = levels.last().unwrap();
            let next: Vec<f64> = (0..prev.len() - width).map(|i| prev[i].max(prev[i + width])).collect();
            levels.push(next);
            width *= 2;
        }
        SparseMax { levels }
    }

    /// Maximum over the inclusive index range `lo..=hi`.
    pub(crate) fn max(&self, lo: usize, hi: usize) -> f64 {
        debug_assert!(lo <= hi);
        let len = hi - lo + 1;
        let level = (usize::BITS - 1 - len.leading_zeros()) as usize;
        let row = &self.levels[level];
        row[lo].max(row[hi + 1 - (1 << level)])
    }

    /// Smallest index `j` in `lo..=hi` with `values[j] >= threshold`.
    pub(crate) fn first_at_least(&self, lo: usize, hi: usize, threshold: f64) -> Option<usize> {
        if lo > hi || self.max(lo, hi) < threshold {
            return None;
        }
        let (mut a, mut b) = (lo, hi);
        while a < b {
            let mid = a + (b - a) / 2;
            if self.max(lo, mid) >= threshold {
                b = mid;
            } else {
                a = mid + 1;
            }
        }
        Some(a)
    }
}

/// Sorted sample positions plus a range-max structure over the distance of
/// each sample point to the obstacle set.
#[derive(Clone, Debug)]
pub(crate) struct LineIndex {
    pub(crate) pos: Vec<f64>,
    pub(crate) obstacle_dist: SparseMax,
}

impl LineIndex {
    pub(crate) fn new(pos: Vec<f64>, dist_to_obstacles: &[f64]) -> Self {
        LineIndex { pos, obstacle_dist: SparseMax::new(dist_to_obstacles) }
    }

    #[inline]
    fn gap(&self, i: usize, j: usize) -> f64 {
        (self.pos[i] - self.pos[j]).abs()
    }

    /// Largest value of `min(dist(y,E), dist(y, sample \ [lo,hi]))` over
    /// `y` in `lo..=hi`, together with the smallest index achieving it.
    pub(crate) fn hole(&self, lo: usize, hi: usize) -> (f64, usize) {
        let n = self.pos.len();
        let left = lo.checked_sub(1);
        let right = if hi + 1 < n { Some(hi + 1) } else { None };
        let tent = |y: usize| -> f64 {
            let a = left.map_or(f64::INFINITY, |l| self.gap(y, l));
            let b = right.map_or(f64::INFINITY, |r| self.gap(y, r));
            a.min(b)
        };

        // The distance to the outside is nondecreasing on [lo, split) and
        // nonincreasing on [split, hi].
        let split = match (left, right) {
            (None, None) => {
                let best = self.obstacle_dist.max(lo, hi).max(0.0);
                let w = self.obstacle_dist.first_at_least(lo, hi, best).unwrap_or(lo);
                return (best, w);
            }
            (Some(_), None) => hi + 1,
            (None, Some(_)) => lo,
            (Some(l), Some(r)) => {
                let (mut a, mut b) = (lo, hi + 1);
                while a < b {
                    let mid = a + (b - a) / 2;
                    if self.gap(mid, l) < self.gap(mid, r) {
                        a = mid + 1;
                    } else {
                        b = mid;
                    }
                }
                a
            }
        };

        let mut best: f64 = 0.0;
        if split > lo {
            best = best.max(self.increasing_half(lo, split - 1, &tent));
        }
        if split <= hi {
            best = best.max(self.decreasing_half(split, hi, &tent));
        }

        let (a, b) = self.tent_window(lo, hi, split, best, &tent);
        let witness = self.obstacle_dist.first_at_least(a, b, best).unwrap_or(lo);
        (best, witness)
    }

    /// On a run where `tent` is nondecreasing, max_y min(f(y), tent(y)) equals
    /// max_s min(tent(s), max_{y>=s} f(y)); the two arguments cross once.
    fn increasing_half(&self, lo: usize, hi: usize, tent: &dyn Fn(usize) -> f64) -> f64 {
        let (mut a, mut b) = (lo, hi);
        while a < b {
            let mid = a + (b - a) / 2;
            if tent(mid) >= self.obstacle_dist.max(mid, hi) {
                b = mid;
            } else {
                a = mid + 1;
            }
        }
        let mut best = tent(a).min(self.obstacle_dist.max(a, hi));
        if a > lo {
            best = best.max(tent(a - 1).min(self.obstacle_dist.max(a - 1, hi)));
        }
        best
    }

    fn decreasing_half(&self, lo: usize, hi: usize, tent: &dyn Fn(usize) -> f64) -> f64 {
        let (mut a, mut b) = (lo, hi);
        while a < b {
            let mid = a + (b - a).div_ceil(2);
            if tent(mid) >= self.obstacle_dist.max(lo, mid) {
                a = mid;
            } else {
                b = mid - 1;
            }
        }
        let mut best = tent(a).min(self.obstacle_dist.max(lo, a));
        if a < hi {
            best = best.max(tent(a + 1).min(self.obstacle_dist.max(lo, a + 1)));
        }
        best
    }

    /// Index window on which `tent >= target`; nonempty whenever some point
    /// of the run attains `target`.
    fn tent_window(
        &self,
        lo: usize,
        hi: usize,
        split: usize,
        target: f64,
        tent: &dyn Fn(usize) -> f64,
    ) -> (usize, usize) {
        let first_up = if split > lo {
            let (mut a, mut b) = (lo, split);
            while a < b {
                let mid = a + (b - a) / 2;
                if tent(mid) >= target {
                    b = mid;
                } else {
                    a = mid + 1;
                }
            }
            a
        } else {
            split
        };
        let last_down = if split <= hi {
            // last index in [split, hi] with tent >= target, or split - 1
            let (mut a, mut b) = (split, hi + 1);
            while a < b {
                let mid = a + (b - a) / 2;
                if tent(mid) >= target {
                    a = mid + 1;
                } else {
                    b = mid;
                }
            }
            a.wrapping_sub(1)
        } else {
            hi
        };
        let start = first_up;
        let end = if last_down == usize::MAX || last_down < start { start } else { last_down };
        (start.min(hi), end.min(hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_max_matches_scan() {
        let v = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
        let t = SparseMax::new(&v);
        for lo in 0..v.len() {
            for hi in lo..v.len() {
                let m = v[lo..=hi].iter().cloned().fold(f64::MIN, f64::max);
                assert_eq!(t.max(lo, hi), m);
            }
        }
        assert_eq!(t.first_at_least(0, 7, 5.0), Some(4));
        assert_eq!(t.first_at_least(5, 7, 7.0), Some(5));
        assert_eq!(t.first_at_least(6, 7, 7.0), None);
    }

    fn brute_hole(idx: &LineIndex, de: &[f64], lo: usize, hi: usize) -> (f64, usize) {
        let n = idx.pos.len();
        let mut best = (f64::NEG_INFINITY, lo);
        for y in lo..=hi {
            let mut dc = f64::INFINITY;
            for z in (0..n).filter(|z| *z < lo || *z > hi) {
                dc = dc.min((idx.pos[y] - idx.pos[z]).abs());
            }
            let v = de[y].min(dc);
            if v > best.0 {
                best = (v, y);
            }
        }
        (best.0.max(0.0), best.1)
    }

    #[test]
    fn hole_matches_brute_force_on_irregular_line() {
        let pos: Vec<f64> = vec![0.1, 0.15, 0.3, 0.31, 0.5, 0.72, 0.8, 0.95, 1.3, 1.31, 1.7, 2.0];
        let obstacles = [0.0, 0.33, 0.9, 1.5];
        let de: Vec<f64> =
            pos.iter().map(|p| obstacles.iter().map(|e| (p - e).abs()).fold(f64::INFINITY, f64::min)).collect();
        let idx = LineIndex::new(pos.clone(), &de);
        for lo in 0..pos.len() {
            for hi in lo..pos.len() {
                assert_eq!(idx.hole(lo, hi), brute_hole(&idx, &de, lo, hi), "[{lo},{hi}]");
            }
        }
    }
}
