//! A1 constants of distance weights, neighbourhood decay, and the closed-form
//! decay constants.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balls::{BallScope, CenterView};
use crate::error::{Error, Result};
use crate::holes::{dyadic_exponent, hole_radius, BallRef};
use crate::space::{AugmentedSpace, PointId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub alpha: f64,
    /// One value per sample point, in id order.
    pub values: Vec<f64>,
}

/// `w(x) = dist(x, E)^(-alpha)` on the sample.
pub fn distance_weight(space: &AugmentedSpace, alpha: f64) -> Result<WeightVector> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::ParamOutOfRange(format!("alpha = {alpha} must be positive")));
    }
    space.require_obstacles()?;
    let values = (0..space.n_sample())
        .map(|i| {
            let d = space.dist_to_obstacles(i);
            if d == 0.0 {
                Err(Error::SampleOnObstacle(space.id(i)))
            } else {
                Ok(d.powf(-alpha))
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(WeightVector { alpha, values })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallRatio {
    pub center: PointId,
    pub radius: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct A1Report {
    pub constant: f64,
    pub worst_ball: BallRef,
    pub balls_checked: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_ball_ratio: Option<Vec<BallRatio>>,
}

/// Compensated running sum.
#[derive(Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Max over balls in scope of `(mean of w over B) / (min of w over B)`.
/// `detail_limit` bounds the number of balls whose ratios are returned.
pub fn a1_constant(
    space: &AugmentedSpace,
    weight: &WeightVector,
    scope: BallScope,
    detail_limit: usize,
) -> Result<A1Report> {
    let w = &weight.values;
    if w.len() != space.n_sample() {
        return Err(Error::ParamOutOfRange(format!("{} weights for {} sample points", w.len(), space.n_sample())));
    }
    if let Some(i) = w.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidWeight { id: space.id(i), value: w[i] });
    }
    let mu = space.weights();
    let gap = space.min_sample_gap();
    let keep = crate::balls::ball_count(space, scope) <= detail_limit;
    let per: Vec<(Vec<BallRatio>, (f64, f64), usize)> = (0..space.n_sample())
        .into_par_iter()
        .map(|c| {
            let view = CenterView::new(space, c);
            let sizes = view.sizes(scope, gap);
            let mut rows = Vec::new();
            let mut best = (0.0, 0.0);
            let mut num = Neumaier::default();
            let mut den = Neumaier::default();
            let mut low = f64::INFINITY;
            let mut done = 0;
            for &m in &sizes {
                for &y in &view.order[done..m] {
                    num.add(w[y] * mu[y]);
                    den.add(mu[y]);
                    low = low.min(w[y]);
                }
                done = m;
                let ratio = (num.value() / den.value()) / low;
                let r = view.radius_of(m);
                if ratio > best.0 {
                    best = (ratio, r);
                }
                if keep {
                    rows.push(BallRatio { center: space.id(c), radius: r, ratio });
                }
            }
            (rows, best, sizes.len())
        })
        .collect();
    let mut worst = (0.0, BallRef { center: space.id(0), radius: 0.0 });
    let mut detail = Vec::new();
    let mut checked = 0;
    for (c, (rows, (ratio, r), count)) in per.into_iter().enumerate() {
        checked += count;
        if ratio > worst.0 {
            worst = (ratio, BallRef { center: space.id(c), radius: r });
        }
        detail.extend(rows);
    }
    Ok(A1Report {
        constant: worst.0,
        worst_ball: worst.1,
        balls_checked: checked,
        per_ball_ratio: keep.then_some(detail),
    })
}

/// `mu{x in B(center, radius) : dist(x, E) < epsilon}`.
pub fn neighborhood_measure(space: &AugmentedSpace, ball: BallRef, epsilon: f64) -> Result<f64> {
    let c = space.index_of(ball.center)?;
    let members = space.ball_members(c, ball.radius);
    Ok(members.iter().filter(|&&y| space.dist_to_obstacles(y) < epsilon).map(|&y| space.weights()[y]).sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayStep {
    pub k: u32,
    pub epsilon: f64,
    pub measure: f64,
}

/// Measures of the neighbourhoods `dist(., E) < p^k rho(B) / 2` inside `B`.
pub fn decay_profile(space: &AugmentedSpace, ball: BallRef, p: f64, k_max: u32) -> Result<Vec<DecayStep>> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::ParamOutOfRange(format!("p = {p} outside (0, 1)")));
    }
    space.require_obstacles()?;
    let c = space.index_of(ball.center)?;
    let reach = (space.n_sample()..space.n_total()).map(|e| space.dist(c, e)).fold(f64::INFINITY, f64::min);
    if reach >= ball.radius {
        return Err(Error::BallMissesE(ball.center));
    }
    let rho = hole_radius(space, ball.center, ball.radius)?.rho;
    let members = space.ball_members(c, ball.radius);
    let mut by_dist: Vec<(f64, f64)> =
        members.iter().map(|&y| (space.dist_to_obstacles(y), space.weights()[y])).collect();
    by_dist.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut steps = Vec::with_capacity(k_max as usize + 1);
    for k in 0..=k_max {
        let epsilon = p.powi(k as i32) * rho / 2.0;
        let measure = by_dist.iter().take_while(|(d, _)| *d < epsilon).fold(0.0, |s, (_, w)| s + w);
        steps.push(DecayStep { k, epsilon, measure });
    }
    Ok(steps)
}

/// Smallest positive `dist(x, E)` over the ball's members.
pub fn obstacle_mesh(space: &AugmentedSpace, ball: BallRef) -> Result<f64> {
    let c = space.index_of(ball.center)?;
    Ok(space
        .ball_members(c, ball.radius)
        .iter()
        .map(|&y| space.dist_to_obstacles(y))
        .filter(|&d| d > 0.0)
        .fold(f64::INFINITY, f64::min))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayInputs {
    pub sigma0: f64,
    pub gamma0: f64,
    #[serde(rename = "K_delta")]
    pub k_delta: f64,
    #[serde(rename = "A_delta")]
    pub a_delta: f64,
    #[serde(rename = "C_delta_E")]
    pub c_delta_e: f64,
    pub beta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayConstants {
    #[serde(flatten)]
    pub inputs: DecayInputs,
    pub eta0: f64,
    pub theta_eta0: f64,
    pub p: f64,
    pub q: f64,
    pub alpha_star: f64,
}

/// `[2K/eta + 26 K^4 / beta]^(-log2 C)`.
pub fn theta(eta: f64, k: f64, beta: f64, c: f64) -> f64 {
    (2.0 * k / eta + 26.0 * k.powi(4) / beta).powf(-c.log2())
}

pub fn theoretical_constants(inp: DecayInputs) -> Result<DecayConstants> {
    let DecayInputs { sigma0, gamma0, k_delta: k, a_delta, c_delta_e: c, beta } = inp;
    let open_unit = |v: f64| v > 0.0 && v < 1.0;
    if !open_unit(sigma0) || !open_unit(gamma0) || !open_unit(beta) {
        return Err(Error::ParamOutOfRange(format!(
            "sigma0 = {sigma0}, gamma0 = {gamma0}, beta = {beta} must lie in (0, 1)"
        )));
    }
    if !(k >= 1.0 && a_delta >= 1.0 && c > 1.0) {
        return Err(Error::ParamOutOfRange(format!("K = {k}, A = {a_delta} must be >= 1 and C = {c} > 1")));
    }
    let rhs = |eta: f64| (1.0 / k - gamma0 / (2.0 * k) * theta(eta, k, beta, c)) / (k + 13.0 * k.powi(4) / beta);
    let cap = beta / (12.0 * k.powi(3));
    // theta -> 0 as eta -> 0
    if 1.0 / k / (k + 13.0 * k.powi(4) / beta) <= 0.0 {
        return Err(Error::NoAdmissibleEta("right-hand side is not positive near zero".into()));
    }
    let eta0 = if cap <= rhs(cap) {
        cap
    } else {
        let (mut lo, mut hi) = (0.0, cap);
        for _ in 0..200 {
            if hi - lo <= 1e-15 {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= rhs(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if lo <= 0.0 {
            return Err(Error::NoAdmissibleEta("bisection found no admissible eta".into()));
        }
        lo
    };
    let theta_eta0 = theta(eta0, k, beta, c);
    let p = gamma0 / (2.0 * k) * theta_eta0;
    let kk = dyadic_exponent(2.0 * k);
    let l = dyadic_exponent(5.0 * k * k / beta);
    let q = 1.0 - sigma0 * a_delta.powi(-(kk + l));
    let alpha_star = alpha_star(p, q)?;
    Ok(DecayConstants { inputs: inp, eta0, theta_eta0, p, q, alpha_star })
}

/// `ln(1/q) / ln(1/p)`: every smaller alpha has `p^(-alpha) q < 1`.
pub fn alpha_star(p: f64, q: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0) {
        return Err(Error::ParamOutOfRange(format!("p = {p}, q = {q} must lie in (0, 1)")));
    }
    Ok((1.0 / q).ln() / (1.0 / p).ln())
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

    #[test]
    fn weights_on_four_points() {
        let s = line(&[1.0, 2.0, 3.0, 4.0], &[0.0]);
        let w = distance_weight(&s, 1.0).unwrap();
        assert_eq!(w.values, vec![1.0, 0.5, 1.0 / 3.0, 0.25]);
        assert!(matches!(distance_weight(&s, 0.0), Err(Error::ParamOutOfRange(_))));
        let two = line(&[2.0], &[0.0, 5.0]);
        assert_eq!(distance_weight(&two, 0.7).unwrap().values, vec![2f64.powf(-0.7)]);
        let on = line(&[1.0, 2.0], &[2.0]);
        assert!(matches!(distance_weight(&on, 1.0), Err(Error::SampleOnObstacle(2))));
    }

    #[test]
    fn four_point_constant_is_25_over_12() {
        let s = line(&[1.0, 2.0, 3.0, 4.0], &[0.0]);
        let w = distance_weight(&s, 1.0).unwrap();
        let rep = a1_constant(&s, &w, BallScope::Exhaustive, usize::MAX).unwrap();
        assert_eq!(rep.constant, 25.0 / 12.0);
        assert_eq!(rep.worst_ball, BallRef { center: 1, radius: 6.0 });
        let mut ratios: Vec<f64> = rep.per_ball_ratio.unwrap().iter().map(|b| b.ratio).collect();
        ratios.sort_by(f64::total_cmp);
        ratios.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let expect = [1.0, 7.0 / 6.0, 13.0 / 9.0, 1.5, 11.0 / 6.0, 25.0 / 12.0];
        assert_eq!(ratios.len(), expect.len());
        for (a, b) in ratios.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn constant_weight_has_unit_ratio() {
        let s = line(&[1.0, 2.0, 3.0], &[0.0]);
        let w = WeightVector { alpha: 1.0, values: vec![3.0; 3] };
        let rep = a1_constant(&s, &w, BallScope::Exhaustive, usize::MAX).unwrap();
        assert_eq!(rep.constant, 1.0);
        assert!(rep.per_ball_ratio.unwrap().iter().all(|b| b.ratio == 1.0));
    }

    #[test]
    fn neighborhood_counts() {
        let s = line(&[1.0, 2.0, 3.0, 4.0], &[0.0]);
        let all = BallRef { center: 1, radius: 6.0 };
        assert_eq!(neighborhood_measure(&s, all, 2.5).unwrap(), 2.0);
        assert_eq!(neighborhood_measure(&s, all, 1.0).unwrap(), 0.0);
        assert_eq!(neighborhood_measure(&s, all, 4.5).unwrap(), 4.0);
    }

    #[test]
    fn decay_is_nonincreasing() {
        let xs: Vec<f64> = (1..=32).map(|k| k as f64 / 32.0).collect();
        let s = line(&xs, &[0.0]);
        let prof = decay_profile(&s, BallRef { center: 1, radius: 2.0 }, 0.5, 8).unwrap();
        assert!(prof[0].measure <= 32.0);
        assert!(prof.windows(2).all(|w| w[1].measure <= w[0].measure));
        assert_eq!(prof.last().unwrap().measure, 0.0);
        let far = line(&[5.0, 6.0], &[0.0]);
        assert!(matches!(decay_profile(&far, BallRef { center: 1, radius: 1.5 }, 0.5, 3), Err(Error::BallMissesE(1))));
    }

    #[test]
    fn closed_forms() {
        assert!((theta(1.0 / 24.0, 1.0, 0.5, 2.0) - 0.01).abs() < 1e-15);
        let dc = theoretical_constants(DecayInputs {
            sigma0: 0.5,
            gamma0: 1e-300,
            k_delta: 1.0,
            a_delta: 2.0,
            c_delta_e: 2.0,
            beta: 0.5,
        })
        .unwrap();
        assert!((dc.eta0 - 1.0 / 27.0).abs() < 1e-12);
        assert!(dc.p > 0.0 && dc.p < 1.0 && dc.q > 0.0 && dc.q < 1.0);
        assert!((alpha_star(0.5, 0.75).unwrap() - (4.0f64 / 3.0).ln() / 2f64.ln()).abs() < 1e-12);
        assert!((alpha_star(0.3, 0.3).unwrap() - 1.0).abs() < 1e-15);
        assert!(alpha_star(0.5, 1.0 - 1e-12).unwrap() < 1e-10);
        assert!(matches!(alpha_star(1.0, 0.5), Err(Error::ParamOutOfRange(_))));
    }

    #[test]
    fn eta0_respects_cap_and_fixed_point() {
        let dc = theoretical_constants(DecayInputs {
            sigma0: 0.5,
            gamma0: 0.5,
            k_delta: 1.0,
            a_delta: 2.0,
            c_delta_e: 2.0,
            beta: 0.01,
        })
        .unwrap();
        assert!(dc.eta0 <= 0.01 / 12.0);
        assert!(dc.eta0 <= (1.0 - 0.25 * theta(dc.eta0, 1.0, 0.01, 2.0)) / (1.0 + 1300.0) + 1e-15);
    }
}
