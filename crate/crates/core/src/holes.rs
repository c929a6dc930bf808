//! The maximal obstacle-free hole function, its doubling constant and the
//! comparison constant between `dist(x, E)` and the hole of a ball.
//!
//! For a ball `B` the hole is
//! `min(2K r, max_{y in B, dE(y) > 0} min(dE(y), dist(y, sample \ B)))`,
//! hole centers range over sample points only.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balls::{BallScope, CenterView};
use crate::error::{Error, Result};
use crate::space::{AugmentedSpace, PointId};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoleValue {
    pub rho: f64,
    pub witness: Option<PointId>,
    pub lambda_cap: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoleEntry {
    pub center: PointId,
    pub radius: f64,
    pub rho: f64,
    pub witness: Option<PointId>,
    pub lambda_cap: f64,
}

/// Hole value of `B(center, radius)`; `center` is a sample or obstacle id.
pub fn hole_radius(space: &AugmentedSpace, center: PointId, radius: f64) -> Result<HoleValue> {
    space.require_obstacles()?;
    if !(radius > 0.0) {
        return Err(Error::NonPositiveRadius(radius));
    }
    let c = space.index_of(center)?;
    let members = space.ball_members(c, radius);
    let cap = 2.0 * space.triangular_constant()? * radius;
    let (best, w) = uncapped_hole_of(space, &members);
    Ok(finish(space, best, w, cap))
}

fn finish(space: &AugmentedSpace, best: f64, w: usize, cap: f64) -> HoleValue {
    let rho = best.min(cap);
    let witness = (rho > 0.0).then(|| space.id(w));
    HoleValue { rho, witness, lambda_cap: cap }
}

/// Uncapped hole of an arbitrary member set (sample indices, ascending).
fn uncapped_hole_of(space: &AugmentedSpace, members: &[usize]) -> (f64, usize) {
    if members.is_empty() {
        return (0.0, 0);
    }
    if let Some(line) = space.line() {
        let (lo, hi) = (members[0], members[members.len() - 1]);
        if hi - lo + 1 == members.len() {
            return line.hole(lo, hi);
        }
    }
    let n = space.n_sample();
    let mut inside = vec![false; n];
    for &y in members {
        inside[y] = true;
    }
    let mut best = (0.0, members[0]);
    for &y in members {
        let de = space.dist_to_obstacles(y);
        if de <= best.0 {
            continue;
        }
        let dc = (0..n).filter(|&z| !inside[z]).map(|z| space.dist(y, z)).fold(f64::INFINITY, f64::min);
        let v = de.min(dc);
        if v > best.0 {
            best = (v, y);
        }
    }
    best
}

/// Uncapped holes of the prefixes of one center's order, computed lazily.
pub(crate) struct CenterHoles<'a> {
    space: &'a AugmentedSpace,
    pub(crate) view: CenterView,
    /// Running min/max sample index of each prefix (line spaces only).
    bounds: Vec<(usize, usize)>,
    memo: Vec<Option<(f64, usize)>>,
}

impl<'a> CenterHoles<'a> {
    pub(crate) fn new(space: &'a AugmentedSpace, center: usize) -> Self {
        let view = CenterView::new(space, center);
        let n = view.len();
        let mut bounds = Vec::new();
        if space.line().is_some() {
            bounds.reserve(n + 1);
            bounds.push((center, center));
            let (mut lo, mut hi) = (center, center);
            for &y in &view.order {
                lo = lo.min(y);
                hi = hi.max(y);
                bounds.push((lo, hi));
            }
        }
        CenterHoles { space, view, bounds, memo: vec![None; n + 1] }
    }

    /// `(value, witness index)` for the prefix of length `m >= 1`.
    pub(crate) fn uncapped(&mut self, m: usize) -> (f64, usize) {
        if let Some(v) = self.memo[m] {
            return v;
        }
        if let Some(line) = self.space.line() {
            let (lo, hi) = self.bounds[m];
            let v = line.hole(lo, hi);
            self.memo[m] = Some(v);
            return v;
        }
        self.fill_all();
        self.memo[m].expect("filled")
    }

    /// Backward scan: shrink the prefix one point at a time, tracking each
    /// member's distance to the removed points.
    fn fill_all(&mut self) {
        let space = self.space;
        let order = &self.view.order;
        let n = order.len();
        let de: Vec<f64> = order.iter().map(|&y| space.dist_to_obstacles(y)).collect();
        let mut dc = vec![f64::INFINITY; n];
        for m in (1..=n).rev() {
            let mut best = (0.0, usize::MAX);
            for k in 0..m {
                let v = de[k].min(dc[k]);
                let y = order[k];
                if v > best.0 || (v == best.0 && v > 0.0 && y < best.1) {
                    best = (v, y);
                }
            }
            if best.1 == usize::MAX {
                best.1 = *order[..m].iter().min().unwrap();
            }
            self.memo[m] = Some(best);
            let z = order[m - 1];
            for k in 0..m - 1 {
                let d = space.dist(order[k], z);
                if d < dc[k] {
                    dc[k] = d;
                }
            }
        }
    }

    /// Sample index range `lo..=hi` of the prefix on line spaces.
    pub(crate) fn bounds(&self, m: usize) -> Option<(usize, usize)> {
        self.bounds.get(m).copied()
    }

    pub(crate) fn max_obstacle_dist(&self, m: usize) -> f64 {
        if let Some(line) = self.space.line() {
            let (lo, hi) = self.bounds[m];
            return line.obstacle_dist.max(lo, hi);
        }
        self.view.order[..m].iter().map(|&y| self.space.dist_to_obstacles(y)).fold(0.0, f64::max)
    }
}

/// Hole values of every ball in scope, ordered by center id then radius.
pub fn hole_profile(space: &AugmentedSpace, scope: BallScope) -> Result<Vec<HoleEntry>> {
    space.require_obstacles()?;
    let k = space.triangular_constant()?;
    let gap = space.min_sample_gap();
    let per: Vec<Vec<HoleEntry>> = (0..space.n_sample())
        .into_par_iter()
        .map(|c| {
            let mut h = CenterHoles::new(space, c);
            h.view
                .sizes(scope, gap)
                .into_iter()
                .map(|m| {
                    let r = h.view.radius_of(m);
                    let (best, w) = h.uncapped(m);
                    let v = finish(space, best, w, 2.0 * k * r);
                    HoleEntry {
                        center: space.id(c),
                        radius: r,
                        rho: v.rho,
                        witness: v.witness,
                        lambda_cap: v.lambda_cap,
                    }
                })
                .collect()
        })
        .collect();
    Ok(per.into_iter().flatten().collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallRef {
    pub center: PointId,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoleDoublingReport {
    #[serde(rename = "C")]
    pub c: f64,
    pub worst_pair: BallRef,
    /// Balls with zero hole whose double has a positive hole (capped list).
    pub violations: Vec<BallRef>,
    pub violation_count: usize,
    pub balls_checked: usize,
}

const VIOLATION_LIST_CAP: usize = 1000;

/// Max of `rho(B(x, 2r)) / rho(B(x, r))` over balls in scope with a
/// positive denominator.
pub fn hole_doubling_constant(space: &AugmentedSpace, scope: BallScope) -> Result<HoleDoublingReport> {
    space.require_obstacles()?;
    let k = space.triangular_constant()?;
    let gap = space.min_sample_gap();
    struct Acc {
        best: Option<(f64, f64)>,
        violations: Vec<f64>,
        checked: usize,
    }
    let per: Vec<Acc> = (0..space.n_sample())
        .into_par_iter()
        .map(|c| {
            let mut h = CenterHoles::new(space, c);
            let mut acc = Acc { best: None, violations: Vec::new(), checked: 0 };
            for m in h.view.sizes(scope, gap) {
                let r = h.view.radius_of(m);
                let m2 = h.view.prefix_len(2.0 * r);
                let den = h.uncapped(m).0.min(2.0 * k * r);
                let num = h.uncapped(m2).0.min(4.0 * k * r);
                acc.checked += 1;
                if den > 0.0 {
                    let ratio = num / den;
                    if acc.best.is_none_or(|(b, _)| ratio > b) {
                        acc.best = Some((ratio, r));
                    }
                } else if num > 0.0 {
                    acc.violations.push(r);
                }
            }
            acc
        })
        .collect();

    let mut best: Option<(f64, BallRef)> = None;
    let mut violations = Vec::new();
    let mut count = 0;
    let mut checked = 0;
    for (c, acc) in per.into_iter().enumerate() {
        checked += acc.checked;
        count += acc.violations.len();
        for r in acc.violations {
            if violations.len() < VIOLATION_LIST_CAP {
                violations.push(BallRef { center: space.id(c), radius: r });
            }
        }
        if let Some((ratio, r)) = acc.best {
            if best.as_ref().is_none_or(|(b, _)| ratio > *b) {
                best = Some((ratio, BallRef { center: space.id(c), radius: r }));
            }
        }
    }
    let (c, worst_pair) = best.ok_or(Error::NoPositiveDenominators)?;
    Ok(HoleDoublingReport { c, worst_pair, violations, violation_count: count, balls_checked: checked })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma33Report {
    #[serde(rename = "C0")]
    pub c0: f64,
    pub worst: BallRef,
}

/// Max of `dist(x, E) / rho(B)` over balls in scope that have an obstacle
/// within their radius of the center and a positive hole.
pub fn lemma33_constant(space: &AugmentedSpace, scope: BallScope) -> Result<Lemma33Report> {
    space.require_obstacles()?;
    let k = space.triangular_constant()?;
    let gap = space.min_sample_gap();
    let per: Vec<Option<(f64, f64)>> = (0..space.n_sample())
        .into_par_iter()
        .map(|c| {
            let mut h = CenterHoles::new(space, c);
            let reach = space.dist_to_obstacles(c);
            let mut best: Option<(f64, f64)> = None;
            for m in h.view.sizes(scope, gap) {
                let r = h.view.radius_of(m);
                if reach >= r {
                    continue;
                }
                let rho = h.uncapped(m).0.min(2.0 * k * r);
                if rho <= 0.0 {
                    continue;
                }
                let ratio = h.max_obstacle_dist(m) / rho;
                if best.is_none_or(|(b, _)| ratio > b) {
                    best = Some((ratio, r));
                }
            }
            best
        })
        .collect();
    let mut out: Option<Lemma33Report> = None;
    for (c, b) in per.into_iter().enumerate() {
        if let Some((ratio, r)) = b {
            if out.is_none_or(|o| ratio > o.c0) {
                out = Some(Lemma33Report { c0: ratio, worst: BallRef { center: space.id(c), radius: r } });
            }
        }
    }
    out.ok_or(Error::NoQualifyingBalls)
}

/// Smallest `m` with `v <= 2^m`, i.e. `2^(m-1) < v <= 2^m`, for `v > 0`.
pub fn dyadic_exponent(v: f64) -> i32 {
    assert!(v > 0.0 && v.is_finite(), "dyadic exponent of {v}");
    let mut m = v.log2().ceil() as i32;
    while (m as f64).exp2() < v {
        m += 1;
    }
    while ((m - 1) as f64).exp2() >= v {
        m -= 1;
    }
    m
}

/// Upper bound for the comparison constant implied by hole doubling:
/// `max(C, 2)^m` with `2^(m-1) < K(2K+1) <= 2^m`.
pub fn lemma33_ceiling(c: f64, k: f64) -> f64 {
    c.max(2.0).powi(dyadic_exponent(k * (2.0 * k + 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{Metric, Point};

    fn line(xs: &[f64], obstacles: &[f64]) -> AugmentedSpace {
        let sample = xs.iter().enumerate().map(|(i, &x)| Point::at(i as u64 + 1, vec![x])).collect();
        let obs = obstacles.iter().enumerate().map(|(i, &x)| Point::at(100 + i as u64, vec![x])).collect();
        AugmentedSpace::new(sample, vec![1.0; xs.len()], obs, Metric::euclidean()).unwrap()
    }

    /// Same distances through a table, so the general path runs.
    fn as_table(s: &AugmentedSpace) -> AugmentedSpace {
        let sample: Vec<Point> = s.sample().iter().map(|p| Point::new(p.id)).collect();
        let obs: Vec<Point> = s.obstacles().iter().map(|p| Point::new(p.id)).collect();
        AugmentedSpace::new(sample, s.weights().to_vec(), obs, Metric::Table(s.to_table())).unwrap()
    }

    /// Sup over candidate hole radii `s` of admissible `B(y, s)`.
    fn brute(s: &AugmentedSpace, center: usize, radius: f64) -> f64 {
        let k = s.triangular_constant().unwrap();
        let members = s.ball_members(center, radius);
        let n = s.n_total();
        let mut cands = vec![2.0 * k * radius];
        for i in 0..n {
            for j in 0..n {
                cands.push(s.dist(i, j));
            }
        }
        let mut best: f64 = 0.0;
        for &y in &members {
            for &t in &cands {
                if t <= 0.0 || t > 2.0 * k * radius {
                    continue;
                }
                let ok = (0..n).all(|z| s.dist(y, z) >= t || (!s.is_obstacle(z) && members.contains(&z)));
                if ok {
                    best = best.max(t);
                }
            }
        }
        best
    }

    #[test]
    fn whole_line_hole() {
        let s = line(&[1.0, 2.0, 3.0, 4.0], &[0.0]);
        let v = hole_radius(&s, 1, 4.0).unwrap();
        assert_eq!((v.rho, v.witness, v.lambda_cap), (4.0, Some(4), 8.0));
        let t = as_table(&s);
        assert_eq!(hole_radius(&t, 1, 4.0).unwrap(), v);
    }

    #[test]
    fn three_point_ball_hole() {
        let s = line(&[1.0, 2.0, 3.0, 4.0], &[0.0]);
        let v = hole_radius(&s, 4, 3.0).unwrap();
        assert_eq!((v.rho, v.witness), (3.0, Some(4)));
        assert_eq!(hole_radius(&as_table(&s), 4, 3.0).unwrap(), v);
    }

    #[test]
    fn ball_inside_obstacles_has_no_hole() {
        let s = line(&[1.0, 2.0], &[1.0, 2.0]);
        let v = hole_radius(&s, 1, 5.0).unwrap();
        assert_eq!((v.rho, v.witness), (0.0, None));
    }

    #[test]
    fn missing_obstacles_is_an_error() {
        let s = line(&[1.0, 2.0], &[]);
        assert!(matches!(hole_radius(&s, 1, 1.0), Err(Error::EmptyObstacleSet)));
        assert!(matches!(hole_radius(&line(&[1.0], &[0.0]), 1, 0.0), Err(Error::NonPositiveRadius(_))));
    }

    #[test]
    fn profile_matches_brute_force_on_both_paths() {
        let s = line(&[0.1, 0.2, 0.45, 0.5, 0.9, 1.3, 1.35, 2.0], &[0.0, 0.47, 1.6]);
        for space in [s.clone(), as_table(&s)] {
            for e in hole_profile(&space, BallScope::Exhaustive).unwrap() {
                let c = space.index_of(e.center).unwrap();
                assert_eq!(e.rho, brute(&space, c, e.radius), "{e:?}");
                assert_eq!(e.witness.is_some(), e.rho > 0.0);
            }
        }
    }

    #[test]
    fn monotone_in_radius() {
        let s = line(&[0.1, 0.2, 0.45, 0.5, 0.9, 1.3, 1.35, 2.0], &[0.0, 0.47, 1.6]);
        let prof = hole_profile(&s, BallScope::Exhaustive).unwrap();
        for w in prof.windows(2) {
            if w[0].center == w[1].center {
                assert!(w[0].rho <= w[1].rho);
            }
        }
    }

    #[test]
    fn grid_with_origin_obstacle_doubles_at_most_four() {
        // attained by B(1/n, 1/2), whose double is the whole sample
        let mut cs = Vec::new();
        for n in [16, 32, 64] {
            let xs: Vec<f64> = (1..=n).map(|k| k as f64 / n as f64).collect();
            let s = line(&xs, &[0.0]);
            let rep = hole_doubling_constant(&s, BallScope::Exhaustive).unwrap();
            assert!(rep.c <= 4.0 && rep.c >= 1.0, "n={n} {rep:?}");
            assert_eq!(rep.violation_count, 0);
            cs.push(rep.c);
        }
        assert!(cs.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn general_and_line_paths_agree_on_constants() {
        let s = line(&[0.1, 0.2, 0.45, 0.5, 0.9, 1.3, 1.35, 2.0], &[0.0, 0.47, 1.6]);
        let t = as_table(&s);
        assert_eq!(
            hole_doubling_constant(&s, BallScope::Exhaustive).unwrap(),
            hole_doubling_constant(&t, BallScope::Exhaustive).unwrap()
        );
        assert_eq!(
            lemma33_constant(&s, BallScope::Exhaustive).unwrap(),
            lemma33_constant(&t, BallScope::Exhaustive).unwrap()
        );
    }

    #[test]
    fn lemma33_on_quarter_grid() {
        let s = line(&[0.25, 0.5, 0.75, 1.0], &[0.0]);
        let rep = lemma33_constant(&s, BallScope::Exhaustive).unwrap();
        assert!(rep.c0.is_finite() && rep.c0 >= 1.0);
        let c = hole_doubling_constant(&s, BallScope::Exhaustive).unwrap().c;
        assert!(rep.c0 <= lemma33_ceiling(c, 1.0));
    }

    #[test]
    fn dyadic_exponent_boundaries() {
        assert_eq!(dyadic_exponent(1.0), 0);
        assert_eq!(dyadic_exponent(2.0), 1);
        assert_eq!(dyadic_exponent(2.0000001), 2);
        assert_eq!(dyadic_exponent(3.0), 2);
        assert_eq!(dyadic_exponent(4.0), 2);
        assert_eq!(dyadic_exponent(0.5), -1);
    }
}
