//! Canonical ball enumeration and the doubling constant of the measure.
//!
//! For each center the other sample points are sorted by `(distance, index)`
//! and every distinct prefix of that order is one open ball.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::space::{AugmentedSpace, PointId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanonicalBall {
    pub center: PointId,
    pub radius: f64,
    pub members: Vec<PointId>,
}

/// Which balls an exhaustive scan visits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BallScope {
    /// Every canonical ball.
    #[default]
    Exhaustive,
    /// Per center, the canonical balls realised by radii
    /// `g * 2^(j / per_octave)`, `g` the smallest sample gap, plus the full ball.
    Geometric { per_octave: u32 },
}

/// Sample points sorted by distance from one center.
#[derive(Clone, Debug)]
pub struct CenterView {
    pub center: usize,
    /// Sample indices, `order[0] == center`.
    pub order: Vec<usize>,
    pub dist: Vec<f64>,
    full_radius: f64,
}

impl CenterView {
    pub fn new(space: &AugmentedSpace, center: usize) -> Self {
        let n = space.n_sample();
        let (order, dist) = if let Some(line) = space.line() {
            // merge the two sides of the center
            let pos = &line.pos;
            let mut order = Vec::with_capacity(n);
            let mut dist = Vec::with_capacity(n);
            order.push(center);
            dist.push(0.0);
            let (mut l, mut r) = (center, center + 1);
            while l > 0 || r < n {
                let dl = if l > 0 { pos[center] - pos[l - 1] } else { f64::INFINITY };
                let dr = if r < n { pos[r] - pos[center] } else { f64::INFINITY };
                if dl <= dr {
                    l -= 1;
                    order.push(l);
                    dist.push(dl);
                } else {
                    order.push(r);
                    dist.push(dr);
                    r += 1;
                }
            }
            (order, dist)
        } else {
            let mut pairs: Vec<(f64, usize)> = (0..n).map(|y| (space.dist(center, y), y)).collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            debug_assert_eq!(pairs[0].1, center);
            pairs.into_iter().map(|(d, y)| (y, d)).unzip()
        };
        CenterView { center, order, dist, full_radius: space.full_radius() }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Number of sample points at distance `< r`.
    pub fn prefix_len(&self, r: f64) -> usize {
        self.dist.partition_point(|&d| d < r)
    }

    /// Representative radius of the prefix of length `m`.
    pub fn radius_of(&self, m: usize) -> f64 {
        if m == self.order.len() {
            self.full_radius
        } else {
            self.dist[m]
        }
    }

    /// Lengths of all distinct prefixes, ascending.
    pub fn canonical_sizes(&self) -> Vec<usize> {
        let n = self.order.len();
        (1..=n).filter(|&m| m == n || self.dist[m] > self.dist[m - 1]).collect()
    }

    pub fn sizes(&self, scope: BallScope, min_gap: f64) -> Vec<usize> {
        match scope {
            BallScope::Exhaustive => self.canonical_sizes(),
            BallScope::Geometric { per_octave } => {
                let n = self.order.len();
                let k = per_octave.max(1) as f64;
                let mut out = Vec::new();
                let mut j = 0u32;
                loop {
                    let r = min_gap * (j as f64 / k).exp2();
                    let m = self.prefix_len(r).max(1);
                    if out.last() != Some(&m) {
                        out.push(m);
                    }
                    if m == n || !r.is_finite() {
                        break;
                    }
                    j += 1;
                }
                if out.last() != Some(&n) {
                    out.push(n);
                }
                out
            }
        }
    }
}

/// Every canonical ball of the space, ordered by center id then radius.
pub fn canonical_balls(space: &AugmentedSpace) -> Vec<CanonicalBall> {
    canonical_balls_in(space, BallScope::Exhaustive)
}

pub fn canonical_balls_in(space: &AugmentedSpace, scope: BallScope) -> Vec<CanonicalBall> {
    let gap = space.min_sample_gap();
    (0..space.n_sample())
        .flat_map(|c| {
            let view = CenterView::new(space, c);
            view.sizes(scope, gap)
                .into_iter()
                .map(|m| {
                    let mut members: Vec<PointId> = view.order[..m].iter().map(|&y| space.id(y)).collect();
                    members.sort_unstable();
                    CanonicalBall { center: space.id(c), radius: view.radius_of(m), members }
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Number of canonical balls in scope.
pub fn ball_count(space: &AugmentedSpace, scope: BallScope) -> usize {
    let gap = space.min_sample_gap();
    (0..space.n_sample()).into_par_iter().map(|c| CenterView::new(space, c).sizes(scope, gap).len()).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingReport {
    #[serde(rename = "A")]
    pub a: f64,
    pub worst_center: PointId,
    pub worst_radius: f64,
}

/// Doubling constant: max of `mu(B(x,2r)) / mu(B(x,r))` over canonical
/// balls, clamped below at 1.
pub fn doubling_constant(space: &AugmentedSpace) -> f64 {
    doubling_report(space, BallScope::Exhaustive).a
}

pub fn doubling_report(space: &AugmentedSpace, scope: BallScope) -> DoublingReport {
    let gap = space.min_sample_gap();
    let w = space.weights();
    let per_center: Vec<(f64, f64)> = (0..space.n_sample())
        .into_par_iter()
        .map(|c| {
            let view = CenterView::new(space, c);
            let mut prefix = Vec::with_capacity(view.len() + 1);
            prefix.push(0.0);
            let mut acc = 0.0;
            for &y in &view.order {
                acc += w[y];
                prefix.push(acc);
            }
            let mut best = (1.0, f64::INFINITY);
            for m in view.sizes(scope, gap) {
                let r = view.radius_of(m);
                let m2 = view.prefix_len(2.0 * r);
                let ratio = prefix[m2] / prefix[m];
                if ratio > best.0 {
                    best = (ratio, r);
                }
            }
            best
        })
        .collect();
    let mut out = DoublingReport { a: 1.0, worst_center: space.id(0), worst_radius: space.full_radius() };
    for (c, &(ratio, r)) in per_center.iter().enumerate() {
        if ratio > out.a {
            out = DoublingReport { a: ratio, worst_center: space.id(c), worst_radius: r };
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{Metric, Point};

    fn line(xs: &[f64], w: &[f64]) -> AugmentedSpace {
        let sample = xs.iter().enumerate().map(|(i, &x)| Point::at(i as u64 + 1, vec![x])).collect();
        AugmentedSpace::new(sample, w.to_vec(), vec![], Metric::euclidean()).unwrap()
    }

    #[test]
    fn line_of_four_from_first_point() {
        let s = line(&[1.0, 2.0, 3.0, 4.0], &[1.0; 4]);
        let balls: Vec<_> = canonical_balls(&s).into_iter().filter(|b| b.center == 1).collect();
        let got: Vec<(f64, Vec<u64>)> = balls.into_iter().map(|b| (b.radius, b.members)).collect();
        assert_eq!(got, vec![(1.0, vec![1]), (2.0, vec![1, 2]), (3.0, vec![1, 2, 3]), (6.0, vec![1, 2, 3, 4])]);
    }

    #[test]
    fn single_point_has_one_ball() {
        let s = line(&[0.5], &[2.0]);
        let balls = canonical_balls(&s);
        assert_eq!(balls.len(), 1);
        assert_eq!(balls[0].members, vec![1]);
        assert_eq!(doubling_constant(&s), 1.0);
    }

    #[test]
    fn two_points_prefix_rule() {
        let s = line(&[0.0, 1.0], &[1.0, 1.0]);
        let got: Vec<(u64, f64, usize)> =
            canonical_balls(&s).into_iter().map(|b| (b.center, b.radius, b.members.len())).collect();
        assert_eq!(got, vec![(1, 1.0, 1), (1, 2.0, 2), (2, 1.0, 1), (2, 2.0, 2)]);
    }

    #[test]
    fn uniform_line_doubling_is_three() {
        // center 2 at r = 1: {2} doubles to {1, 2, 3}
        let s = line(&[1.0, 2.0, 3.0, 4.0], &[1.0; 4]);
        let rep = doubling_report(&s, BallScope::Exhaustive);
        assert_eq!(rep.a, 3.0);
        assert_eq!((rep.worst_center, rep.worst_radius), (2, 1.0));
    }

    #[test]
    fn heavy_endpoint_doubling() {
        let s = line(&[1.0, 2.0, 3.0, 4.0], &[1.0, 1.0, 1.0, 8.0]);
        assert!(doubling_constant(&s) >= 5.5);
    }

    #[test]
    fn geometric_scope_is_a_subset() {
        let xs: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin() + i as f64).collect();
        let s = line(&xs, &vec![1.0; 40]);
        let all = canonical_balls(&s);
        let some = canonical_balls_in(&s, BallScope::Geometric { per_octave: 2 });
        assert!(some.len() < all.len());
        for b in &some {
            assert!(all.contains(b));
        }
    }

    #[test]
    fn midpoint_radii_realise_emitted_balls() {
        let s = line(&[0.0, 0.3, 1.1, 1.2, 2.9], &[1.0; 5]);
        let balls = canonical_balls(&s);
        for c in 0..5 {
            let mut ds: Vec<f64> = (0..5).map(|y| s.dist(c, y)).collect();
            ds.sort_by(f64::total_cmp);
            ds.push(ds[4] + 1.0);
            for w in ds.windows(2) {
                let r = 0.5 * (w[0] + w[1]);
                let members: Vec<u64> = s.ball_members(c, r).iter().map(|&y| s.id(y)).collect();
                assert!(balls.iter().any(|b| b.center == s.id(c) && b.members == members));
            }
        }
    }
}
