//! Random instances and brute-force oracles written from the definitions,
//! independent of the library's algorithms.

#![allow(dead_code)]

use porosity_lab::space::{AugmentedSpace, DistTable, Metric, Point};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random points in the unit square; the last `n_obs` are obstacles.
pub fn random_planar(rng: &mut ChaCha8Rng, n_sample: usize, n_obs: usize) -> AugmentedSpace {
    let sample = (0..n_sample).map(|i| Point::at(i as u64, vec![rng.gen(), rng.gen()])).collect();
    let obstacles = (0..n_obs).map(|j| Point::at((n_sample + j) as u64, vec![rng.gen(), rng.gen()])).collect();
    let weights = (0..n_sample).map(|_| rng.gen_range(0.5..2.0)).collect();
    AugmentedSpace::new(sample, weights, obstacles, Metric::euclidean()).unwrap()
}

/// Same points and weights, distances read from a table.
pub fn tabulated(space: &AugmentedSpace, f: impl Fn(f64) -> f64) -> AugmentedSpace {
    let n = space.n_total();
    let t = DistTable::from_fn(n, |i, j| if i == j { 0.0 } else { f(space.dist(i, j)) });
    AugmentedSpace::new(space.sample().to_vec(), space.weights().to_vec(), space.obstacles().to_vec(), Metric::Table(t))
        .unwrap()
}

/// Symmetric table with off-diagonal entries in `[lo, 1]`; every such table
/// is a quasi-metric with `K <= 1 / (2 lo)`.
pub fn random_table(rng: &mut ChaCha8Rng, n_sample: usize, n_obs: usize, lo: f64) -> AugmentedSpace {
    let n = n_sample + n_obs;
    let mut rows = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = rng.gen_range(lo..=1.0);
            rows[i][j] = v;
            rows[j][i] = v;
        }
    }
    let sample = (0..n_sample as u64).map(Point::new).collect();
    let obstacles = (n_sample as u64..n as u64).map(Point::new).collect();
    let weights = (0..n_sample).map(|_| rng.gen_range(0.5..2.0)).collect();
    AugmentedSpace::new(sample, weights, obstacles, Metric::Table(DistTable::from_rows(&rows).unwrap())).unwrap()
}

/// Least `K >= 1` over ordered triples of distinct points.
pub fn naive_k(space: &AugmentedSpace) -> f64 {
    let n = space.n_total();
    let mut k: f64 = 1.0;
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                if x != y && y != z && x != z {
                    k = k.max(space.dist(x, z) / (space.dist(x, y) + space.dist(y, z)));
                }
            }
        }
    }
    k
}

/// Sample indices strictly closer than `r` to `c`.
pub fn members(space: &AugmentedSpace, c: usize, r: f64) -> Vec<usize> {
    (0..space.n_sample()).filter(|&y| space.dist(c, y) < r).collect()
}

/// All (center, radius) pairs of the canonical ball list, built from the
/// prefix rule: radius of a proper prefix = first excluded distance, full
/// ball = twice the largest sample distance.
pub fn naive_canonical(space: &AugmentedSpace) -> Vec<(usize, f64)> {
    let ns = space.n_sample();
    let diam = (0..ns).flat_map(|i| (0..ns).map(move |j| (i, j))).map(|(i, j)| space.dist(i, j)).fold(0.0, f64::max);
    let full = if diam > 0.0 { 2.0 * diam } else { 1.0 };
    let mut out = Vec::new();
    for c in 0..ns {
        let mut ds: Vec<f64> = (0..ns).filter(|&y| y != c).map(|y| space.dist(c, y)).collect();
        ds.sort_by(f64::total_cmp);
        ds.dedup();
        for &d in &ds {
            out.push((c, d));
        }
        out.push((c, full));
    }
    out
}

/// Sup of the admissible hole radii of `B(c, r)` by testing every candidate
/// `s` in the pairwise distances and the cap `2 K r`.
pub fn brute_force_hole(space: &AugmentedSpace, k: f64, c: usize, r: f64) -> f64 {
    let n = space.n_total();
    let ball = members(space, c, r);
    let in_ball = |z: usize| ball.contains(&z);
    let cap = 2.0 * k * r;
    let mut cands: Vec<f64> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| space.dist(i, j)).collect();
    cands.push(cap);
    let mut best: f64 = 0.0;
    for &y in &ball {
        for &s in &cands {
            if s <= 0.0 || s > cap || s <= best {
                continue;
            }
            // B(y, s) over sample and obstacles must avoid E and stay in B
            let ok = (0..n).filter(|&z| space.dist(y, z) < s).all(|z| !space.is_obstacle(z) && in_ball(z));
            if ok {
                best = s;
            }
        }
    }
    best
}

/// `max over balls of mean(w) / min(w)` from raw member sets.
pub fn naive_a1(space: &AugmentedSpace, w: &[f64]) -> f64 {
    let mu = space.weights();
    naive_canonical(space)
        .into_iter()
        .map(|(c, r)| {
            let m = members(space, c, r);
            let mass: f64 = m.iter().map(|&y| mu[y]).sum();
            let mean = m.iter().map(|&y| w[y] * mu[y]).sum::<f64>() / mass;
            mean / m.iter().map(|&y| w[y]).fold(f64::INFINITY, f64::min)
        })
        .fold(1.0, f64::max)
}

pub fn naive_dist_to_e(space: &AugmentedSpace, y: usize) -> f64 {
    (space.n_sample()..space.n_total()).map(|e| space.dist(y, e)).fold(f64::INFINITY, f64::min)
}

/// Re-checks a porosity family for `B(c, r)` from raw distances: disjoint
/// member sets, each ball inside `B` and free of `E`, radii in
/// `[gamma rho, 2 K r]`, packed measure at least `sigma mu(B)`.
pub fn check_family(
    space: &AugmentedSpace,
    k: f64,
    c: usize,
    r: f64,
    rho: f64,
    gamma: f64,
    sigma: f64,
    family: &[(usize, f64)],
) -> Result<(), String> {
    let mu = space.weights();
    let ball = members(space, c, r);
    let mut used = vec![false; space.n_sample()];
    let mut packed = 0.0;
    for &(x, s) in family {
        if s < gamma * rho * (1.0 - 1e-12) || s > 2.0 * k * r {
            return Err(format!("radius {s} outside [gamma rho, 2Kr]"));
        }
        if (space.n_sample()..space.n_total()).any(|e| space.dist(x, e) < s) {
            return Err(format!("ball at {x} meets E"));
        }
        for y in members(space, x, s) {
            if !ball.contains(&y) {
                return Err(format!("ball at {x} leaves B"));
            }
            if used[y] {
                return Err(format!("point {y} covered twice"));
            }
            used[y] = true;
            packed += mu[y];
        }
    }
    let total: f64 = ball.iter().map(|&y| mu[y]).sum();
    if packed < sigma * total * (1.0 - 1e-12) {
        return Err(format!("packed {packed} < sigma * {total}"));
    }
    Ok(())
}

/// Largest packed measure over every subset of candidate balls
/// `B(y, gamma rho)` that are free, inside `B` and pairwise disjoint.
pub fn brute_force_packing(space: &AugmentedSpace, c: usize, r: f64, rho: f64, gamma: f64) -> f64 {
    let mu = space.weights();
    let ball = members(space, c, r);
    let s = gamma * rho;
    let cands: Vec<Vec<usize>> = ball
        .iter()
        .filter(|&&y| naive_dist_to_e(space, y) >= s && s > 0.0)
        .map(|&y| members(space, y, s))
        .filter(|m| m.iter().all(|z| ball.contains(z)))
        .collect();
    let total: f64 = ball.iter().map(|&y| mu[y]).sum();
    let mut best: f64 = 0.0;
    for mask in 0u32..(1 << cands.len()) {
        let mut used = vec![false; space.n_sample()];
        let mut mass = 0.0;
        let mut ok = true;
        'sets: for (i, m) in cands.iter().enumerate() {
            if mask >> i & 1 == 1 {
                for &z in m {
                    if used[z] {
                        ok = false;
                        break 'sets;
                    }
                    used[z] = true;
                    mass += mu[z];
                }
            }
        }
        if ok {
            best = best.max(mass / total);
        }
    }
    best
}
