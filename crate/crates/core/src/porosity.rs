//! Weak-porosity certificates.
//!
//! Each ball `B` with hole `rho` gets a family of obstacle-free balls of
//! radius `gamma * rho`: a greedy `2 gamma rho`-separated net of the points
//! of `B` that are `gamma rho` away from both the obstacles and the sample
//! outside `B`, followed by a first-fit disjoint extraction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balls::BallScope;
use crate::error::{Error, Result};
use crate::holes::{hole_radius, BallRef, CenterHoles};
use crate::space::{AugmentedSpace, PointId};

/// Largest ball the exhaustive oracle accepts.
pub const ORACLE_MAX_MEMBERS: usize = 18;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PackMethod {
    Greedy,
    Exhaustive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyBall {
    pub center: PointId,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackingOutcome {
    pub family: Vec<FamilyBall>,
    pub achieved_sigma: f64,
    pub method: PackMethod,
    pub rho: f64,
}

/// Member set of a ball: an index interval on line spaces, a sorted list otherwise.
enum Members<'a> {
    Interval(usize, usize),
    Set(&'a [usize]),
}

fn packed_family(space: &AugmentedSpace, ball: &Members, t: f64) -> (Vec<usize>, f64) {
    if t <= 0.0 {
        return (Vec::new(), 0.0);
    }
    match (ball, space.line()) {
        (Members::Interval(lo, hi), Some(line)) => {
            let (lo, hi) = (*lo, *hi);
            let pos = &line.pos;
            let n = pos.len();
            // D: far enough from both outside neighbours and from E
            let a = if lo > 0 { lo + pos[lo..=hi].partition_point(|&p| p - pos[lo - 1] < t) } else { lo };
            let b = if hi + 1 < n { lo + pos[lo..=hi].partition_point(|&p| pos[hi + 1] - p >= t) } else { hi + 1 };
            let mut chosen = Vec::new();
            let mut measure = 0.0;
            let mut cur = a;
            let mut occupied_to = lo; // family balls are index intervals, kept in order
            while cur < b {
                let Some(j) = line.obstacle_dist.first_at_least(cur, b - 1, t) else { break };
                let blo = pos[..j].partition_point(|&p| pos[j] - p >= t);
                let bhi = j + 1 + pos[j + 1..].partition_point(|&p| p - pos[j] < t);
                if blo >= occupied_to {
                    chosen.push(j);
                    measure += space.range_measure(blo, bhi);
                    occupied_to = bhi;
                }
                let next = pos[j] + 2.0 * t;
                cur = j + 1 + pos[j + 1..].partition_point(|&p| p < next);
            }
            (chosen, measure)
        }
        (ball, _) => {
            let owned;
            let members: &[usize] = match ball {
                Members::Set(m) => m,
                Members::Interval(lo, hi) => {
                    owned = (*lo..=*hi).collect::<Vec<_>>();
                    &owned
                }
            };
            let n = space.n_sample();
            let mut inside = vec![false; n];
            for &y in members {
                inside[y] = true;
            }
            let whole = members.len() == n;
            let far_from_outside = |y: usize| whole || (0..n).all(|z| inside[z] || space.dist(y, z) >= t);
            let mut net: Vec<usize> = Vec::new();
            for &y in members {
                if space.dist_to_obstacles(y) >= t
                    && far_from_outside(y)
                    && net.iter().rev().all(|&s| space.dist(y, s) >= 2.0 * t)
                {
                    net.push(y);
                }
            }
            let mut occupied = vec![false; n];
            let mut chosen = Vec::new();
            let mut measure = 0.0;
            for &x in &net {
                let ball = space.ball_members(x, t);
                if ball.iter().all(|&z| !occupied[z]) {
                    for &z in &ball {
                        occupied[z] = true;
                    }
                    measure += space.measure_of(&ball);
                    chosen.push(x);
                }
            }
            (chosen, measure)
        }
    }
}

fn members_of(space: &AugmentedSpace, center: usize, radius: f64) -> Vec<usize> {
    space.ball_members(center, radius)
}

fn as_members(members: &[usize]) -> Members<'_> {
    match (members.first(), members.last()) {
        (Some(&lo), Some(&hi)) if hi - lo + 1 == members.len() => Members::Interval(lo, hi),
        _ => Members::Set(members),
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::GammaOutOfRange { gamma, upper: 1.0 });
    }
    Ok(())
}

/// Greedy packing of one ball.
pub fn free_ball_packing(space: &AugmentedSpace, ball: BallRef, gamma: f64) -> Result<PackingOutcome> {
    check_gamma(gamma)?;
    let rho = hole_radius(space, ball.center, ball.radius)?.rho;
    let c = space.index_of(ball.center)?;
    let members = members_of(space, c, ball.radius);
    let t = gamma * rho;
    let (chosen, measure) = packed_family(space, &as_members(&members), t);
    Ok(PackingOutcome {
        family: chosen.iter().map(|&x| FamilyBall { center: space.id(x), radius: t }).collect(),
        achieved_sigma: if members.is_empty() { 0.0 } else { measure / space.measure_of(&members) },
        method: PackMethod::Greedy,
        rho,
    })
}

/// Maximum-measure disjoint family of obstacle-free balls of radius
/// `gamma * rho` centered in the ball, by exhaustive search.
pub fn exact_packing_oracle(space: &AugmentedSpace, ball: BallRef, gamma: f64) -> Result<PackingOutcome> {
    check_gamma(gamma)?;
    let c = space.index_of(ball.center)?;
    let members = members_of(space, c, ball.radius);
    if members.len() > ORACLE_MAX_MEMBERS {
        return Err(Error::BallTooLarge(members.len(), ORACLE_MAX_MEMBERS));
    }
    let rho = hole_radius(space, ball.center, ball.radius)?.rho;
    let t = gamma * rho;
    let total = space.measure_of(&members);
    let slot = |y: usize| members.iter().position(|&m| m == y);

    // candidate balls with their member masks over `members`
    let mut cands: Vec<(usize, u32, f64)> = Vec::new();
    if t > 0.0 {
        for &y in &members {
            if space.dist_to_obstacles(y) < t {
                continue;
            }
            let b = space.ball_members(y, t);
            let mut mask = 0u32;
            let mut inside = true;
            for &z in &b {
                match slot(z) {
                    Some(k) => mask |= 1 << k,
                    None => inside = false,
                }
            }
            if inside {
                cands.push((y, mask, space.measure_of(&b)));
            }
        }
    }
    cands.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
    let suffix: Vec<f64> = {
        let mut s = vec![0.0; cands.len() + 1];
        for i in (0..cands.len()).rev() {
            s[i] = s[i + 1] + cands[i].2;
        }
        s
    };

    struct Search<'a> {
        cands: &'a [(usize, u32, f64)],
        suffix: &'a [f64],
        best: f64,
        best_set: Vec<usize>,
        cur: Vec<usize>,
    }
    impl Search<'_> {
        fn go(&mut self, i: usize, used: u32, value: f64) {
            if value > self.best {
                self.best = value;
                self.best_set = self.cur.clone();
            }
            if i == self.cands.len() || value + self.suffix[i] <= self.best {
                return;
            }
            let (_, mask, w) = self.cands[i];
            if used & mask == 0 {
                self.cur.push(i);
                self.go(i + 1, used | mask, value + w);
                self.cur.pop();
            }
            self.go(i + 1, used, value);
        }
    }
    let mut s = Search { cands: &cands, suffix: &suffix, best: 0.0, best_set: Vec::new(), cur: Vec::new() };
    s.go(0, 0, 0.0);
    let mut family: Vec<FamilyBall> =
        s.best_set.iter().map(|&i| FamilyBall { center: space.id(cands[i].0), radius: t }).collect();
    family.sort_by_key(|f| f.center);
    Ok(PackingOutcome {
        family,
        achieved_sigma: if total > 0.0 { s.best / total } else { 0.0 },
        method: PackMethod::Exhaustive,
        rho,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallCertificate {
    pub center: PointId,
    pub radius: f64,
    pub rho: f64,
    pub family: Vec<FamilyBall>,
    pub packed_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallFailure {
    pub center: PointId,
    pub radius: f64,
    pub members: usize,
    pub achieved_sigma: f64,
    /// Oracle optimum when the ball is small enough to search.
    pub oracle_sigma: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PorosityStatus {
    Certified,
    NotCertified,
    Disproved,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PorosityReport {
    pub sigma: f64,
    pub gamma: f64,
    pub status: PorosityStatus,
    pub scope: BallScope,
    pub balls_checked: usize,
    /// Smallest packed fraction over all balls in scope and where it occurs.
    pub min_fraction: f64,
    pub worst_ball: BallRef,
    pub failures: Vec<BallFailure>,
    /// Per-ball families, kept when the scope holds at most `detail_limit` balls.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_ball: Option<Vec<BallCertificate>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    pub scope: BallScope,
    pub detail_limit: usize,
    pub failure_limit: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions { scope: BallScope::Exhaustive, detail_limit: 100_000, failure_limit: 200 }
    }
}

/// Runs the greedy packing on every ball in scope.
pub fn certify_porosity(
    space: &AugmentedSpace,
    sigma: f64,
    gamma: f64,
    opts: &CertifyOptions,
) -> Result<PorosityReport> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::ParamOutOfRange(format!("sigma {sigma} outside (0, 1)")));
    }
    check_gamma(gamma)?;
    space.require_obstacles()?;
    let k = space.triangular_constant()?;
    let gap = space.min_sample_gap();
    let keep = crate::balls::ball_count(space, opts.scope) <= opts.detail_limit;

    struct Row {
        ball: BallCertificate,
        members: usize,
    }
    let per: Vec<(Vec<Row>, (f64, f64), usize)> = (0..space.n_sample())
        .into_par_iter()
        .map(|c| {
            let mut h = CenterHoles::new(space, c);
            let mut rows = Vec::new();
            let mut worst = (f64::INFINITY, 0.0);
            let mut count = 0;
            for m in h.view.sizes(opts.scope, gap) {
                let r = h.view.radius_of(m);
                let rho = h.uncapped(m).0.min(2.0 * k * r);
                let t = gamma * rho;
                let (chosen, measure) = match h.bounds(m) {
                    Some((lo, hi)) => packed_family(space, &Members::Interval(lo, hi), t),
                    None => {
                        let mut members = h.view.order[..m].to_vec();
                        members.sort_unstable();
                        packed_family(space, &Members::Set(&members), t)
                    }
                };
                let mu = match h.bounds(m) {
                    Some((lo, hi)) => space.range_measure(lo, hi + 1),
                    None => space.measure_of(&h.view.order[..m]),
                };
                let fraction = measure / mu;
                count += 1;
                if fraction < worst.0 {
                    worst = (fraction, r);
                }
                if keep || fraction < sigma {
                    rows.push(Row {
                        ball: BallCertificate {
                            center: space.id(c),
                            radius: r,
                            rho,
                            family: chosen.iter().map(|&x| FamilyBall { center: space.id(x), radius: t }).collect(),
                            packed_fraction: fraction,
                        },
                        members: m,
                    });
                }
            }
            (rows, worst, count)
        })
        .collect();

    let mut per_ball = Vec::new();
    let mut failures = Vec::new();
    let mut worst = (f64::INFINITY, BallRef { center: space.id(0), radius: 0.0 });
    let mut checked = 0;
    let mut disproved = false;
    for (c, (rows, (w, r), count)) in per.into_iter().enumerate() {
        checked += count;
        if w < worst.0 {
            worst = (w, BallRef { center: space.id(c), radius: r });
        }
        for row in rows {
            if row.ball.packed_fraction < sigma && failures.len() < opts.failure_limit {
                let b = BallRef { center: row.ball.center, radius: row.ball.radius };
                let oracle = if row.members <= ORACLE_MAX_MEMBERS {
                    Some(exact_packing_oracle(space, b, gamma)?.achieved_sigma)
                } else {
                    None
                };
                disproved |= oracle.is_some_and(|o| o < sigma);
                failures.push(BallFailure {
                    center: b.center,
                    radius: b.radius,
                    members: row.members,
                    achieved_sigma: row.ball.packed_fraction,
                    oracle_sigma: oracle,
                });
            } else if row.ball.packed_fraction < sigma {
                // beyond the listing cap; still decide disproof on small balls
                if row.members <= ORACLE_MAX_MEMBERS && !disproved {
                    let b = BallRef { center: row.ball.center, radius: row.ball.radius };
                    disproved |= exact_packing_oracle(space, b, gamma)?.achieved_sigma < sigma;
                }
            }
            if keep {
                per_ball.push(row.ball);
            }
        }
    }
    let status = if worst.0 >= sigma {
        PorosityStatus::Certified
    } else if disproved {
        PorosityStatus::Disproved
    } else {
        PorosityStatus::NotCertified
    };
    Ok(PorosityReport {
        sigma,
        gamma,
        status,
        scope: opts.scope,
        balls_checked: checked,
        min_fraction: worst.0,
        worst_ball: worst.1,
        failures,
        per_ball: keep.then_some(per_ball),
    })
}

/// Re-verifies one ball certificate from raw distances and weights:
/// disjoint, obstacle-free family inside the ball, radii between
/// `gamma * rho` and `2 K r`, packed measure at least `sigma mu(B)`.
pub fn verify_ball_certificate(
    space: &AugmentedSpace,
    sigma: f64,
    gamma: f64,
    cert: &BallCertificate,
) -> std::result::Result<(), String> {
    let k = space.triangular_constant().map_err(|e| e.to_string())?;
    let n = space.n_sample();
    let c = space.index_of(cert.center).map_err(|e| e.to_string())?;
    let in_ball: Vec<bool> = (0..n).map(|y| space.dist(c, y) < cert.radius).collect();
    let mu_b: f64 = (0..n).filter(|&y| in_ball[y]).map(|y| space.weights()[y]).sum();

    // hole recomputed by the closed form with plain scans
    let mut rho: f64 = 0.0;
    for y in (0..n).filter(|&y| in_ball[y]) {
        let de = space.dist_to_obstacles(y);
        let dc = (0..n).filter(|&z| !in_ball[z]).map(|z| space.dist(y, z)).fold(f64::INFINITY, f64::min);
        rho = rho.max(de.min(dc));
    }
    let rho = rho.min(2.0 * k * cert.radius);
    if rho != cert.rho {
        return Err(format!("hole {} recorded as {}", rho, cert.rho));
    }

    let mut owner: Vec<Option<PointId>> = vec![None; n];
    let mut packed = 0.0;
    for f in &cert.family {
        let z = space.index_of(f.center).map_err(|e| e.to_string())?;
        if z >= n || !in_ball[z] {
            return Err(format!("family center {} outside the ball", f.center));
        }
        if f.radius < gamma * rho {
            return Err(format!("family radius {} below gamma * rho = {}", f.radius, gamma * rho));
        }
        if f.radius > 2.0 * k * cert.radius {
            return Err(format!("family radius {} above 2K r", f.radius));
        }
        let ns = space.n_total();
        if let Some(e) = (n..ns).find(|&e| space.dist(z, e) < f.radius) {
            return Err(format!("family ball at {} contains obstacle {}", f.center, space.id(e)));
        }
        for y in (0..n).filter(|&y| space.dist(z, y) < f.radius) {
            if !in_ball[y] {
                return Err(format!("family ball at {} leaves the ball at {}", f.center, space.id(y)));
            }
            if let Some(o) = owner[y] {
                return Err(format!("family balls at {o} and {} share {}", f.center, space.id(y)));
            }
            owner[y] = Some(f.center);
            packed += space.weights()[y];
        }
    }
    let fraction = packed / mu_b;
    if (fraction - cert.packed_fraction).abs() > 1e-9 {
        return Err(format!("packed fraction {} recorded as {}", fraction, cert.packed_fraction));
    }
    if fraction < sigma - 1e-12 {
        return Err(format!("packed fraction {fraction} below sigma {sigma}"));
    }
    Ok(())
}

/// Lower bound on the porosity constant implied by an A1 constant of the
/// distance weight with exponent `alpha`.
pub fn porosity_from_a1(a1: f64, alpha: f64, k: f64, a_doubling: f64, gamma: f64) -> Result<f64> {
    for (name, v) in [("a1", a1), ("alpha", alpha), ("K", k), ("A", a_doubling)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::ParamOutOfRange(format!("{name} = {v} must be positive")));
        }
    }
    let upper = 1.0 / (4.0 * k * k);
    if !(gamma > 0.0 && gamma < upper) {
        return Err(Error::GammaOutOfRange { gamma, upper });
    }
    let c_alpha = 4f64.powf(alpha) * k.powf(alpha) * a1;
    let kk = crate::holes::dyadic_exponent(2.0 * k);
    let m = crate::holes::dyadic_exponent(k * (3.0 * k + 1.0));
    let s = a_doubling.powi(-m) * (a_doubling.powi(-kk) - c_alpha * gamma.powf(alpha));
    Ok(s.max(0.0))
}
