mod common;

use common::*;
use porosity_lab::balls::{canonical_balls, doubling_constant, BallScope};
use porosity_lab::generators::snowflake_space;
use porosity_lab::generators::{GeneratorKind, GeneratorSpec};
use porosity_lab::holes::{hole_doubling_constant, hole_radius};
use porosity_lab::msdist::{delta_space, ms_distance, ms_membership, MsParams};
use porosity_lab::muckenhoupt::{a1_constant, distance_weight};
use porosity_lab::pipeline::{resolution_sweep, run_pipeline, transfer_porosity, PipelineConfig, Section, SweepConfig};
use porosity_lab::porosity::{certify_porosity, porosity_from_a1, CertifyOptions, PorosityStatus};
use porosity_lab::report::to_json;
use porosity_lab::space::{equivalence_constants, AugmentedSpace, Point};
use proptest::prelude::*;
use rand::Rng;

fn space_for(seed: u64, kind: u8, n_sample: usize, n_obs: usize) -> AugmentedSpace {
    let mut r = rng(seed);
    match kind % 3 {
        0 => random_planar(&mut r, n_sample, n_obs),
        1 => {
            let base = random_planar(&mut r, n_sample, n_obs);
            tabulated(&base, |d| d * d)
        }
        _ => random_table(&mut r, n_sample, n_obs, 0.3),
    }
}

fn cfg() -> ProptestConfig {
    ProptestConfig { cases: 48, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(cfg())]

    #[test]
    fn balls_grow_with_radius(seed: u64, kind in 0u8..3, n in 2usize..15, r1 in 0.01f64..1.5, dr in 0.0f64..1.0) {
        let s = space_for(seed, kind, n, 1);
        for c in 0..s.n_sample() {
            let small = s.ball_members(c, r1);
            let big = s.ball_members(c, r1 + dr);
            prop_assert!(small.iter().all(|y| big.contains(y)));
        }
    }

    #[test]
    fn every_ball_is_canonical(seed: u64, kind in 0u8..3, n in 2usize..12, r in 0.001f64..3.0) {
        let s = space_for(seed, kind, n, 2);
        let canon = canonical_balls(&s);
        for c in 0..s.n_sample() {
            let mut m: Vec<u64> = members(&s, c, r).iter().map(|&y| s.id(y)).collect();
            m.sort_unstable();
            let found = canon.iter().any(|b| {
                let mut bm = b.members.clone();
                bm.sort_unstable();
                b.center == s.id(c) && bm == m
            });
            prop_assert!(found, "ball ({}, {}) has no canonical twin", c, r);
        }
    }

    #[test]
    fn more_obstacles_shrink_holes(seed: u64, n in 2usize..14, extra in 1usize..4) {
        // Euclidean keeps K = 1, so the cap does not move
        let s = random_planar(&mut rng(seed), n, 1);
        let mut r = rng(seed ^ 0x5eed);
        let mut obs = s.obstacles().to_vec();
        for j in 0..extra {
            obs.push(Point::at(1000 + j as u64, vec![r.gen(), r.gen()]));
        }
        let more = s.with_obstacles(obs).unwrap();
        for (c, rad) in naive_canonical(&s) {
            let a = hole_radius(&s, s.id(c), rad).unwrap().rho;
            let b = hole_radius(&more, s.id(c), rad).unwrap().rho;
            prop_assert!(b <= a, "ball ({c}, {rad}): {b} > {a}");
        }
    }

    #[test]
    fn membership_is_monotone(seed: u64, kind in 0u8..3, n in 2usize..9, r in 0.01f64..1.0, dr in 0.0f64..1.0) {
        let s = space_for(seed, kind, n, 1);
        let p = MsParams::default_for(&s).unwrap();
        for x in 0..s.n_total() {
            for y in 0..s.n_total() {
                let (ix, iy) = (s.id(x), s.id(y));
                if ms_membership(&s, &p, r, ix, iy).unwrap() {
                    prop_assert!(ms_membership(&s, &p, r + dr, ix, iy).unwrap());
                }
            }
        }
    }

    #[test]
    fn a1_ratio_at_least_one(seed: u64, kind in 0u8..3, n in 2usize..12, alpha in 0.05f64..1.0) {
        let s = space_for(seed, kind, n, 2);
        let w = distance_weight(&s, alpha).unwrap();
        let rep = a1_constant(&s, &w, BallScope::Exhaustive, usize::MAX).unwrap();
        for b in rep.per_ball_ratio.unwrap() {
            prop_assert!(b.ratio >= 1.0 - 1e-12);
        }
        let flat = porosity_lab::muckenhoupt::WeightVector { alpha, values: vec![2.5; s.n_sample()] };
        let rep = a1_constant(&s, &flat, BallScope::Exhaustive, usize::MAX).unwrap();
        prop_assert!(rep.per_ball_ratio.unwrap().iter().all(|b| (b.ratio - 1.0).abs() <= 1e-12));
    }

    #[test]
    fn far_balls_have_small_ratio(seed: u64, kind in 0u8..3, n in 4usize..20, alpha in 0.05f64..1.0) {
        let s = space_for(seed, kind, n, 2);
        let ms = ms_distance(&s, &MsParams::default_for(&s).unwrap()).unwrap();
        let d = delta_space(&s, &ms).unwrap();
        let k = d.triangular_constant().unwrap();
        let w = distance_weight(&d, alpha).unwrap().values;
        for (c, rad) in naive_canonical(&d) {
            let m = members(&d, c, rad);
            let far = m.iter().map(|&y| d.dist_to_obstacles(y)).fold(f64::INFINITY, f64::min);
            if far < 4.0 * k * k * rad {
                continue;
            }
            let mass: f64 = m.iter().map(|&y| d.weights()[y]).sum();
            let mean = m.iter().map(|&y| w[y] * d.weights()[y]).sum::<f64>() / mass;
            let low = m.iter().map(|&y| w[y]).fold(f64::INFINITY, f64::min);
            prop_assert!(mean / low <= (2.0 * k).powf(alpha) * (1.0 + 1e-12));
        }
    }
}

/// For x, a canonical radius r, y in B(x, r) and t <= 2K r there should be a
/// sample z with B(z, beta t) inside B(y, t) and B(x, r). Only sample points
/// are candidates, so misses are counted separately when beta t is below the
/// smallest positive distance.
#[test]
fn chain_distance_shrinks_holes() {
    let mut sub_mesh = 0;
    let mut checked = 0;
    for seed in 0..25u64 {
        let s = space_for(seed, seed as u8, 6 + (seed as usize % 10), 2);
        let ms = ms_distance(&s, &MsParams::default_for(&s).unwrap()).unwrap();
        let d = delta_space(&s, &ms).unwrap();
        let k = d.triangular_constant().unwrap();
        let n = d.n_sample();
        let mesh = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| d.dist(i, j))
            .filter(|&v| v > 0.0)
            .fold(f64::INFINITY, f64::min);
        let mut r = rng(seed + 100);
        for (x, rad) in naive_canonical(&d) {
            for y in members(&d, x, rad) {
                let t = r.gen_range(0.0..1.0) * 2.0 * k * rad;
                if t <= 0.0 {
                    continue;
                }
                let by = members(&d, y, t);
                let bx = members(&d, x, rad);
                let ok = (0..n).any(|z| {
                    members(&d, z, ms.beta * t).iter().all(|v| by.contains(v) && bx.contains(v))
                        && !members(&d, z, ms.beta * t).is_empty()
                });
                checked += 1;
                if !ok {
                    assert!(ms.beta * t < mesh, "seed {seed}: no witness for x={x} r={rad} y={y} t={t}");
                    sub_mesh += 1;
                }
            }
        }
    }
    if sub_mesh > 0 {
        eprintln!("warning: {sub_mesh} of {checked} probes had no sample witness below the mesh");
    }
}

#[test]
fn porosity_transfers_to_snowflakes() {
    for seed in 0..12u64 {
        let d = random_planar(&mut rng(seed), 8 + seed as usize % 6, 2);
        let gamma = 0.25;
        let opts = CertifyOptions::default();
        let sigma = certify_porosity(&d, f64::MIN_POSITIVE, gamma, &opts).unwrap().min_fraction;
        if sigma <= 0.0 {
            continue;
        }
        let a_d = doubling_constant(&d);
        let c_d = hole_doubling_constant(&d, BallScope::Exhaustive).unwrap().c;
        for (s, c) in [(0.5, 1.0), (1.0, 3.0)] {
            let dt = snowflake_space(&d, s, c).unwrap();
            let (c1, c2) = equivalence_constants(&d.to_table(), &dt.to_table()).unwrap();
            let a_t = doubling_constant(&dt);
            let (s0, g0) = transfer_porosity(sigma, gamma, c1, c2, a_d, a_t, c_d);
            let rep = certify_porosity(&dt, s0, g0, &opts).unwrap();
            assert_eq!(rep.status, PorosityStatus::Certified, "seed {seed} s={s}: {} < {s0}", rep.min_fraction);
            // hole doubling bound (c2/c1) C^m
            let m = porosity_lab::holes::dyadic_exponent(c2 / c1);
            let c_t = hole_doubling_constant(&dt, BallScope::Exhaustive).unwrap().c;
            assert!(c_t <= c2 / c1 * c_d.powi(m) * (1.0 + 1e-9), "seed {seed} s={s}: C {c_t} vs {c_d}");
        }
    }
}

#[test]
fn a1_bound_implies_certificate() {
    let mut positive = 0;
    for seed in 0..20u64 {
        let s = random_planar(&mut rng(seed), 5 + seed as usize % 8, 1);
        let alpha = 0.1;
        let w = distance_weight(&s, alpha).unwrap();
        let a1 = a1_constant(&s, &w, BallScope::Exhaustive, 0).unwrap().constant;
        let k = s.triangular_constant().unwrap();
        let a = doubling_constant(&s);
        let gamma = 1e-60;
        let sg = porosity_from_a1(a1, alpha, k, a, gamma).unwrap();
        if sg > 0.0 {
            positive += 1;
            let rep = certify_porosity(&s, sg, gamma, &CertifyOptions::default()).unwrap();
            assert_eq!(rep.status, PorosityStatus::Certified, "seed {seed}: {} < {sg}", rep.min_fraction);
        }
    }
    assert!(positive > 0);
}

fn sweep(kind: GeneratorKind, alpha: f64, depths: Vec<u32>) -> Vec<f64> {
    let cfg = SweepConfig {
        generator: GeneratorSpec::new(kind),
        alphas: vec![alpha],
        depths,
        gamma: None,
        scope: BallScope::Exhaustive,
        porosity_scope: None,
    };
    resolution_sweep(&cfg).unwrap().trends.a1_ratios.remove(0)
}

#[test]
fn cantor_sweep_is_bounded() {
    let ratios = sweep(GeneratorKind::Cantor { ratio: 1.0 / 3.0, depth: 4, mesh_factor: 1 }, 0.1, vec![4, 5, 6]);
    assert!(ratios.iter().all(|&q| q < 1.1), "{ratios:?}");
}

#[test]
fn lacunary_sweep_diverges() {
    let cfg = SweepConfig {
        generator: GeneratorSpec::new(GeneratorKind::Lacunary { depth: 4 }),
        alphas: vec![0.1],
        depths: vec![4, 6, 8, 10],
        gamma: None,
        scope: BallScope::Exhaustive,
        porosity_scope: None,
    };
    let rep = resolution_sweep(&cfg).unwrap();
    let first = rep.rows[0].a1[0];
    let last = rep.rows[3].a1[0];
    assert!(last >= 2.0 * first, "{first} -> {last}");
    // the lacunary obstacle set is porous: holes stay comparable to radii
    assert!(rep.rows.iter().all(|r| r.hole_c <= 4.0 + 1e-9 && r.hole_violations == 0));
}

#[test]
fn dyadic_grid_sweep_is_bounded() {
    let grid = GeneratorKind::Grid { dimension: 1, n_per_side: 16, measure_exponent: 0.0, obstacles: vec![vec![0.0]] };
    let ratios = sweep(grid, 0.5, vec![4, 5, 6, 7]);
    assert!(ratios.iter().all(|&q| q < 1.1), "{ratios:?}");
}

fn cantor_pipeline() -> PipelineConfig {
    let mut cfg = PipelineConfig::from_generator(GeneratorSpec::new(GeneratorKind::Cantor {
        ratio: 1.0 / 3.0,
        depth: 5,
        mesh_factor: 1,
    }));
    cfg.alphas = vec![0.05, 0.1];
    cfg.sigma = Some(0.2);
    cfg.gamma = Some(1.0 / 12.0);
    cfg.sections = vec![Section::Constants, Section::Holes, Section::Porosity, Section::A1];
    cfg
}

#[test]
fn cantor_pipeline_certifies() {
    let rep = run_pipeline(&cantor_pipeline()).unwrap();
    assert_eq!(rep.porosity_status(), Some(PorosityStatus::Certified));
    let a1 = rep.a1.as_ref().unwrap();
    assert_eq!(a1.len(), 2);
    assert!(a1.iter().all(|e| e.report.constant.is_finite() && e.report.constant >= 1.0));
}

#[test]
fn pipeline_is_idempotent() {
    let cfg = cantor_pipeline();
    let a = to_json(&run_pipeline(&cfg).unwrap());
    let b = to_json(&run_pipeline(&cfg).unwrap());
    assert_eq!(a, b);
    let rep = run_pipeline(&cfg).unwrap();
    assert_eq!(rep.summary_csv(), run_pipeline(&cfg).unwrap().summary_csv());
}
