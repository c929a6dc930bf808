//! Whitney-type ball covers of a proper subset of the sample.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{AugmentedSpace, PointId};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhitneyBall {
    pub center: PointId,
    pub radius: f64,
    /// A nearest sample point outside the set.
    pub witness: PointId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhitneyCover {
    pub family: Vec<WhitneyBall>,
    #[serde(rename = "K")]
    pub k: f64,
}

fn omega_mask(space: &AugmentedSpace, omega: &[PointId]) -> Result<Vec<bool>> {
    let mut mask = vec![false; space.n_sample()];
    for &id in omega {
        mask[space.sample_index_of(id)?] = true;
    }
    if !mask.iter().any(|&b| b) {
        return Err(Error::EmptyOmega);
    }
    if mask.iter().all(|&b| b) {
        return Err(Error::OmegaIsEverything);
    }
    Ok(mask)
}

/// Distance to the nearest sample point outside the set, and that point.
fn nearest_outside(space: &AugmentedSpace, mask: &[bool], x: usize) -> (f64, usize) {
    let mut best = (f64::INFINITY, usize::MAX);
    for z in (0..mask.len()).filter(|&z| !mask[z]) {
        let d = space.dist(x, z);
        if d < best.0 {
            best = (d, z);
        }
    }
    best
}

/// Radii `dist(x, outside) / (8 K^2)`, greedy disjoint selection by
/// decreasing radius (smaller id first on ties).
pub fn whitney_cover(space: &AugmentedSpace, omega: &[PointId]) -> Result<WhitneyCover> {
    let mask = omega_mask(space, omega)?;
    let k = space.triangular_constant()?;
    let n = space.n_sample();
    let mut cands: Vec<(f64, usize, usize)> = (0..n)
        .filter(|&x| mask[x])
        .map(|x| {
            let (d, y) = nearest_outside(space, &mask, x);
            (d / (8.0 * k * k), x, y)
        })
        .collect();
    cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut occupied = vec![false; n];
    let mut family = Vec::new();
    for (r, x, y) in cands {
        let ball = space.ball_members(x, r);
        if ball.iter().any(|&z| occupied[z]) {
            continue;
        }
        for z in ball {
            occupied[z] = true;
        }
        family.push(WhitneyBall { center: space.id(x), radius: r, witness: space.id(y) });
    }
    Ok(WhitneyCover { family, k })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<String>,
}

impl Check {
    fn pass() -> Self {
        Check { ok: true, counterexample: None }
    }

    fn fail(msg: String) -> Self {
        Check { ok: false, counterexample: Some(msg) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverVerdict {
    pub disjoint: Check,
    pub covers: Check,
    pub comparable: Check,
    pub witnesses: Check,
}

impl CoverVerdict {
    pub fn all_ok(&self) -> bool {
        self.disjoint.ok && self.covers.ok && self.comparable.ok && self.witnesses.ok
    }
}

/// Checks (a) disjoint balls, (b) dilations by `4K` cover exactly the set,
/// (c) `4K r <= dist(x, outside) <= 12 K^3 r` on each dilation,
/// (d) `dist(x_i, y_i) < 12 K^2 r_i` with `y_i` outside.
pub fn verify_cover(space: &AugmentedSpace, omega: &[PointId], cover: &WhitneyCover, k: f64) -> Result<CoverVerdict> {
    let mask = omega_mask(space, omega)?;
    let n = space.n_sample();
    let centers: Vec<usize> = cover.family.iter().map(|b| space.sample_index_of(b.center)).collect::<Result<_>>()?;
    let members: Vec<HashSet<usize>> = cover
        .family
        .iter()
        .zip(&centers)
        .map(|(b, &c)| (0..n).filter(|&y| space.dist(c, y) < b.radius).collect())
        .collect();

    let mut disjoint = Check::pass();
    'outer: for i in 0..members.len() {
        for j in i + 1..members.len() {
            if let Some(&y) = members[i].intersection(&members[j]).next() {
                disjoint = Check::fail(format!(
                    "balls at {} and {} share {}",
                    cover.family[i].center,
                    cover.family[j].center,
                    space.id(y)
                ));
                break 'outer;
            }
        }
    }

    let mut covered = vec![false; n];
    let mut comparable = Check::pass();
    for (b, &c) in cover.family.iter().zip(&centers) {
        for x in (0..n).filter(|&x| space.dist(c, x) < 4.0 * k * b.radius) {
            covered[x] = true;
            let d = if mask[x] { nearest_outside(space, &mask, x).0 } else { 0.0 };
            if comparable.ok && !(4.0 * k * b.radius <= d && d <= 12.0 * k.powi(3) * b.radius) {
                comparable = Check::fail(format!(
                    "point {} in the dilation of the ball at {} has distance {} to the outside",
                    space.id(x),
                    b.center,
                    d
                ));
            }
        }
    }
    let covers = match (0..n).find(|&x| covered[x] != mask[x]) {
        None => Check::pass(),
        Some(x) if mask[x] => Check::fail(format!("point {} of the set is not covered", space.id(x))),
        Some(x) => Check::fail(format!("point {} outside the set is covered", space.id(x))),
    };

    let mut witnesses = Check::pass();
    for (b, &c) in cover.family.iter().zip(&centers) {
        let y = space.sample_index_of(b.witness)?;
        if mask[y] {
            witnesses = Check::fail(format!("witness {} lies in the set", b.witness));
            break;
        }
        if !(space.dist(c, y) < 12.0 * k * k * b.radius) {
            witnesses = Check::fail(format!("witness {} too far from {}", b.witness, b.center));
            break;
        }
    }
    Ok(CoverVerdict { disjoint, covers, comparable, witnesses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{Metric, Point};

    fn line(n: u64) -> AugmentedSpace {
        let sample = (1..=n).map(|i| Point::at(i, vec![i as f64])).collect();
        AugmentedSpace::new(sample, vec![1.0; n as usize], vec![], Metric::euclidean()).unwrap()
    }

    #[test]
    fn ten_point_line() {
        let s = line(10);
        let omega: Vec<u64> = (3..=7).collect();
        let cover = whitney_cover(&s, &omega).unwrap();
        let first = cover.family[0];
        assert_eq!((first.center, first.radius), (5, 3.0 / 8.0));
        let centers: Vec<u64> = cover.family.iter().map(|b| b.center).collect();
        assert!(centers.contains(&3) && centers.contains(&7));
        assert!(verify_cover(&s, &omega, &cover, 1.0).unwrap().all_ok());
    }

    #[test]
    fn single_point_set() {
        let s = line(6);
        let cover = whitney_cover(&s, &[4]).unwrap();
        assert_eq!(cover.family.len(), 1);
        assert_eq!(cover.family[0].radius, 1.0 / 8.0);
        assert_eq!(cover.family[0].witness, 3);
        assert!(verify_cover(&s, &[4], &cover, 1.0).unwrap().all_ok());
    }

    #[test]
    fn degenerate_sets_rejected() {
        let s = line(3);
        assert!(matches!(whitney_cover(&s, &[]), Err(Error::EmptyOmega)));
        assert!(matches!(whitney_cover(&s, &[1, 2, 3]), Err(Error::OmegaIsEverything)));
    }

    #[test]
    fn broken_covers_are_caught() {
        let s = line(10);
        let omega: Vec<u64> = (3..=7).collect();
        let overlapping = WhitneyCover {
            family: vec![
                WhitneyBall { center: 5, radius: 1.5, witness: 2 },
                WhitneyBall { center: 6, radius: 0.5, witness: 8 },
            ],
            k: 1.0,
        };
        let v = verify_cover(&s, &omega, &overlapping, 1.0).unwrap();
        assert!(!v.disjoint.ok);
        assert!(v.disjoint.counterexample.unwrap().contains("5 and 6"));

        let mut short = whitney_cover(&s, &omega).unwrap();
        short.family.retain(|b| b.center != 3);
        let v = verify_cover(&s, &omega, &short, 1.0).unwrap();
        assert!(!v.covers.ok);
    }
}
