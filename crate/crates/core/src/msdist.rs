//! Chain quasi-distance built from shrinking compositions of distance balls.
//!
//! A pair `(x, y)` is related at level `r` when a chain
//! `x = w0, ..., w_{2n+1} = y` exists whose steps obey the bounds
//! `a^n r, ..., a r, r, a r, ..., a^n r`. Stays are free, so the relation
//! at depth `n` contains every shallower one. The smallest admissible `r`
//! over chains of depth `n_max` is the bottleneck value
//! `min over chains of max_i d_i / a^(e_i)`, computed here with
//! (min, max) matrix products.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{AugmentedSpace, DistTable, Metric, PointId};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MsParams {
    pub a: f64,
    pub n_max: u32,
}

impl MsParams {
    /// `a = 1/(4K)` and the smallest depth past which flank bounds fall
    /// below the smallest positive distance.
    pub fn default_for(space: &AugmentedSpace) -> Result<Self> {
        let k = space.triangular_constant()?;
        let a = 1.0 / (4.0 * k);
        let (min_pos, diam) = extent(space);
        let n = if min_pos.is_finite() && diam > 0.0 {
            ((min_pos / (2.0 * diam)).ln() / a.ln()).ceil().max(1.0) as u32
        } else {
            1
        };
        Ok(MsParams { a, n_max: n })
    }

    pub fn validate(&self, k: f64) -> Result<()> {
        if !(self.a > 0.0 && self.a * 2.0 * k < 1.0) {
            return Err(Error::InvalidParams(format!("a = {} must lie in (0, 1/(2K)) with K = {k}", self.a)));
        }
        if self.n_max < 1 {
            return Err(Error::InvalidParams("n_max must be at least 1".into()));
        }
        Ok(())
    }
}

/// Smallest positive and largest distance over sample and obstacles.
fn extent(space: &AugmentedSpace) -> (f64, f64) {
    let n = space.n_total();
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let d = space.dist(i, j);
            if d > 0.0 {
                lo = lo.min(d);
            }
            hi = hi.max(d);
        }
    }
    (lo, hi)
}

/// Layered reachability: is `(x, y)` related at level `r`?
pub fn ms_membership(space: &AugmentedSpace, params: &MsParams, r: f64, x: PointId, y: PointId) -> Result<bool> {
    if !(r > 0.0) {
        return Err(Error::NonPositiveRadius(r));
    }
    params.validate(space.triangular_constant()?)?;
    let (xi, yi) = (space.index_of(x)?, space.index_of(y)?);
    let n = space.n_total();
    let depth = params.n_max as i32;
    let bounds: Vec<f64> = (-depth..=depth).map(|e| params.a.powi(e.abs()) * r).collect();
    let mut reached = vec![false; n];
    reached[xi] = true;
    for bound in bounds {
        let prev: Vec<usize> = (0..n).filter(|&v| reached[v]).collect();
        for w in 0..n {
            if !reached[w] && prev.iter().any(|&v| space.dist(v, w) < bound) {
                reached[w] = true;
            }
        }
    }
    Ok(reached[yi])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MsDistanceResult {
    /// Point ids in table order (sample first, then obstacles).
    pub ids: Vec<PointId>,
    pub delta: Vec<Vec<f64>>,
    pub beta: f64,
    #[serde(rename = "K_delta_bound")]
    pub k_delta_bound: f64,
    pub params: MsParams,
}

impl MsDistanceResult {
    pub fn table(&self) -> DistTable {
        DistTable::from_rows(&self.delta).expect("square by construction")
    }
}

/// Dense row-major matrix used by the products.
struct Mat {
    n: usize,
    v: Vec<f64>,
}

impl Mat {
    fn row(&self, i: usize) -> &[f64] {
        &self.v[i * self.n..(i + 1) * self.n]
    }

    fn transpose(&self) -> Mat {
        let n = self.n;
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                v[j * n + i] = self.v[i * n + j];
            }
        }
        Mat { n, v }
    }
}

/// `C(x, y) = min_w max(s * L(x, w), R(w, y))`.
fn minmax_product(left: &Mat, s: f64, right: &Mat) -> Mat {
    let n = left.n;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|x| {
            let lrow = left.row(x);
            let mut ws: Vec<usize> = (0..n).collect();
            ws.sort_by(|&a, &b| lrow[a].total_cmp(&lrow[b]));
            let mut best = vec![f64::INFINITY; n];
            for (step, &w) in ws.iter().enumerate() {
                let lv = s * lrow[w];
                if step % 32 == 0 && step > 0 {
                    let worst = best.iter().cloned().fold(0.0, f64::max);
                    if lv >= worst {
                        break;
                    }
                }
                for (b, &rv) in best.iter_mut().zip(right.row(w)) {
                    let c = if lv > rv { lv } else { rv };
                    if c < *b {
                        *b = c;
                    }
                }
            }
            best
        })
        .collect();
    Mat { n, v: rows.concat() }
}

/// Chain quasi-distance on sample and obstacles.
pub fn ms_distance(space: &AugmentedSpace, params: &MsParams) -> Result<MsDistanceResult> {
    let k = space.triangular_constant()?;
    params.validate(k)?;
    let n = space.n_total();
    let d = Mat { n, v: space.to_table().rows().concat() };
    let a = params.a;

    // outer[x][w]: cheapest path x -> w through steps of exponents n_max..1
    let mut outer = Mat { n, v: d.v.iter().map(|&v| v / a).collect() };
    for e in 2..=params.n_max {
        outer = minmax_product(&d, a.powi(-(e as i32)), &outer);
    }
    let delta = close(&outer, &d);

    let max_delta = delta.v.iter().cloned().fold(0.0, f64::max);
    let (min_pos, _) = extent(space);
    if min_pos / a.powi(params.n_max as i32 + 1) < max_delta {
        let deeper = minmax_product(&d, a.powi(-(params.n_max as i32 + 1)), &outer);
        if close(&deeper, &d).v != delta.v {
            return Err(Error::DepthCapTooSmall(params.n_max));
        }
    }

    Ok(MsDistanceResult {
        ids: space.all_ids(),
        delta: (0..n).map(|i| delta.row(i).to_vec()).collect(),
        beta: beta(a, k),
        k_delta_bound: 3.0 * k.powi(3),
        params: *params,
    })
}

/// `outer * d * outer^T` in the (min, max) algebra.
fn close(outer: &Mat, d: &Mat) -> Mat {
    let mid = minmax_product(outer, 1.0, d);
    minmax_product(&mid, 1.0, &outer.transpose())
}

/// Hole-shrinking constant `a^(3-p) / (3 K^4)`, `p` the integer with
/// `a^p < 2K <= a^(p-1)`.
pub fn beta(a: f64, k: f64) -> f64 {
    let mut p = (1.0 - (2.0 * k).ln() / (1.0 / a).ln()).floor() as i32;
    while a.powi(p) >= 2.0 * k {
        p += 1;
    }
    while 2.0 * k > a.powi(p - 1) {
        p -= 1;
    }
    a.powi(3 - p) / (3.0 * k.powi(4))
}

/// The same sample, weights and obstacles measured with `delta`.
pub fn delta_space(space: &AugmentedSpace, result: &MsDistanceResult) -> Result<AugmentedSpace> {
    AugmentedSpace::new(
        space.sample().to_vec(),
        space.weights().to_vec(),
        space.obstacles().to_vec(),
        Metric::Table(result.table()),
    )
}

/// `delta <= d <= 3 K^2 delta` on every pair.
pub fn sandwich_holds(space: &AugmentedSpace, result: &MsDistanceResult) -> Result<bool> {
    let k = space.triangular_constant()?;
    let n = space.n_total();
    Ok((0..n).all(|i| {
        (0..n).all(|j| {
            let (d, del) = (space.dist(i, j), result.delta[i][j]);
            del <= d && d <= 3.0 * k * k * del
        })
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Point;

    fn table_space(rows: Vec<Vec<f64>>) -> AugmentedSpace {
        let n = rows.len();
        AugmentedSpace::new(
            (0..n as u64).map(Point::new).collect(),
            vec![1.0; n],
            vec![],
            Metric::Table(DistTable::from_rows(&rows).unwrap()),
        )
        .unwrap()
    }

    fn quarter() -> MsParams {
        MsParams { a: 0.25, n_max: 3 }
    }

    #[test]
    fn two_point_membership() {
        let s = table_space(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!(ms_membership(&s, &quarter(), 1.5, 0, 1).unwrap());
        assert!(!ms_membership(&s, &quarter(), 0.9, 0, 1).unwrap());
        assert!(ms_membership(&s, &quarter(), 1e-9, 1, 1).unwrap());
        assert!(matches!(ms_membership(&s, &quarter(), 0.0, 0, 1), Err(Error::NonPositiveRadius(_))));
    }

    #[test]
    fn two_point_distance_is_one() {
        let s = table_space(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let res = ms_distance(&s, &quarter()).unwrap();
        assert_eq!(res.delta, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn beta_for_metric_quarter() {
        assert_eq!(beta(0.25, 1.0), 1.0 / 192.0);
    }

    #[test]
    fn invalid_a_rejected() {
        let s = table_space(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let p = MsParams { a: 0.5, n_max: 2 };
        assert!(matches!(ms_distance(&s, &p), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn shallow_depth_detected() {
        // far chain of small hops: deeper layers keep shortening the route
        let xs: Vec<f64> = (0..41).map(|i| i as f64).collect();
        let rows: Vec<Vec<f64>> = xs.iter().map(|x| xs.iter().map(|y| (x - y).abs()).collect()).collect();
        let s = table_space(rows);
        let p = MsParams { a: 0.25, n_max: 1 };
        assert!(matches!(ms_distance(&s, &p), Err(Error::DepthCapTooSmall(1))));
    }

    #[test]
    fn agrees_with_layered_search_and_sandwich() {
        let xs: [f64; 8] = [0.0, 0.1, 0.35, 0.4, 1.0, 1.7, 1.75, 3.0];
        let rows: Vec<Vec<f64>> = xs.iter().map(|x| xs.iter().map(|y| (x - y).abs()).collect()).collect();
        let s = table_space(rows);
        let p = MsParams::default_for(&s).unwrap();
        let res = ms_distance(&s, &p).unwrap();
        assert!(sandwich_holds(&s, &res).unwrap());
        for i in 0..xs.len() {
            for j in 0..xs.len() {
                let d = res.delta[i][j];
                let (x, y) = (i as u64, j as u64);
                if i == j {
                    assert_eq!(d, 0.0);
                    continue;
                }
                assert!(ms_membership(&s, &p, d * (1.0 + 1e-9), x, y).unwrap());
                assert!(!ms_membership(&s, &p, d * (1.0 - 1e-9), x, y).unwrap());
            }
        }
    }
}
