use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ringbump::energy::{energy, interaction_term};
use ringbump::geometry::{bump_centers, sector_membership, Symmetry};
use ringbump::grid::{inner0, norm_e, quad_product, Field, Grid};
use ringbump::model::{bump_radius_interval, derive_exponents, ModelParams};
use ringbump::radial::solve_ground_state;

fn random_field(grid: &Arc<Grid>, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Field::from_values(grid, values).unwrap()
}

fn small_grid() -> Arc<Grid> {
    Grid::new(2, 3.0, 0.25).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exponents_are_admissible(m in 0.5001f64..=5.0, theta in 0.001f64..=5.0) {
        let e = derive_exponents(m, theta).unwrap();
        prop_assert!(e.tau0 > 0.5 && e.tau0 < 1.0);
        prop_assert!(e.delta0 > 0.0);
        prop_assert!(e.p > 0.0);
        prop_assert!(e.tau0 * m - 0.5 > 0.0);
        let four = (e.tau0 * m - 0.5).min(e.tau0 - 0.5).min(theta);
        prop_assert!((4.0 * e.delta0 - four).abs() <= 1e-15 * four.max(1.0));
    }

    #[test]
    fn radius_interval_is_ordered(k in 2usize..64, m in 0.51f64..5.0, theta in 0.01f64..5.0) {
        let e = derive_exponents(m, theta).unwrap();
        let s = bump_radius_interval(k, m, e.delta0).unwrap();
        prop_assert!(s.lo < s.hi);
        prop_assert!(s.contains(s.mid()));
        let kl = k as f64 * (k as f64).ln();
        prop_assert!((s.hi - s.lo - 2.0 * e.delta0 / (2.0 * PI) * kl).abs() < 1e-12 * kl);
    }

    #[test]
    fn inner0_is_positive_definite(seed in any::<u64>(), lambda in 0.01f64..10.0) {
        let g = small_grid();
        let u = random_field(&g, seed);
        prop_assert!(inner0(&u, &u, lambda) > 0.0);
    }

    #[test]
    fn norm_e_is_homogeneous(seed in any::<u64>(), s in 0.1f64..10.0) {
        let g = small_grid();
        let u = random_field(&g, seed);
        let v = random_field(&g, seed ^ 0x5555);
        let mu = Field::constant(&g, 1.5);
        let a = norm_e(&u, &v, 1.0, &mu);
        let b = norm_e(&u.scaled(s), &v.scaled(s), 1.0, &mu);
        prop_assert!((b - s * a).abs() <= 1e-12 * b);
    }

    #[test]
    fn energy_is_additive_without_coupling(seed in any::<u64>(), a0 in 0.1f64..3.0, a1 in 0.1f64..3.0) {
        let g = small_grid();
        let u = random_field(&g, seed);
        let v = random_field(&g, seed.wrapping_add(1));
        let mu = random_field(&g, seed.wrapping_add(2)).map(|x| 1.0 + 0.5 * x.abs());
        let p = ModelParams { alpha0: a0, alpha1: a1, beta: 0.0, ..Default::default() };
        let z = Field::zeros(&g);
        prop_assert_eq!(energy(&u, &v, &mu, &p), energy(&u, &z, &mu, &p) + energy(&z, &v, &mu, &p));
    }

    #[test]
    fn exact_projection_is_orthogonal(seed in any::<u64>(), k in prop::sample::select(vec![1usize, 2, 3, 4, 6, 8, 12, 16])) {
        let g = small_grid();
        let s = Symmetry::new(&g, k);
        let f = random_field(&g, seed);
        let h = random_field(&g, seed.wrapping_add(7));
        let pf = Field::from_values(&g, s.project_exact(f.values())).unwrap();
        let ph = Field::from_values(&g, s.project_exact(h.values())).unwrap();
        let ppf = Field::from_values(&g, s.project_exact(pf.values())).unwrap();
        prop_assert!(ppf.sub(&pf).max_abs() <= 1e-15);
        let lhs = quad_product(&pf, &h);
        let rhs = quad_product(&f, &ph);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn energy_is_invariant_under_exact_symmetries(seed in any::<u64>(), beta in -0.5f64..0.5) {
        // y -> (y2, y1) and y -> (-y1, y2) map nodes to nodes; the weights,
        // the stencil and the coefficient field are invariant.
        let g = small_grid();
        let n = g.nodes_per_axis();
        let u = random_field(&g, seed);
        let v = random_field(&g, seed.wrapping_add(3));
        let mu = Field::sample(&g, |y| 1.0 + 1.0 / (1.0 + y[0] * y[0] + y[1] * y[1]));
        let p = ModelParams { beta, ..Default::default() };
        let swap = |f: &Field| {
            let vals = (0..g.len()).map(|i| f.values()[(i % n) * n + i / n]).collect();
            Field::from_values(&g, vals).unwrap()
        };
        let flip = |f: &Field| {
            let vals = (0..g.len()).map(|i| f.values()[(n - 1 - i / n) * n + i % n]).collect();
            Field::from_values(&g, vals).unwrap()
        };
        let e = energy(&u, &v, &mu, &p);
        for (a, b) in [(swap(&u), swap(&v)), (flip(&u), flip(&v))] {
            let e2 = energy(&a, &b, &mu, &p);
            prop_assert!((e - e2).abs() <= 1e-12 * e.abs().max(1.0));
        }
    }

    #[test]
    fn odd_integrands_vanish(seed in any::<u64>()) {
        let g = small_grid();
        let n = g.nodes_per_axis();
        let f = random_field(&g, seed);
        let odd: Vec<f64> = (0..g.len()).map(|i| f.values()[i] - f.values()[(n - 1 - i / n) * n + i % n]).collect();
        let odd = Field::from_values(&g, odd).unwrap();
        prop_assert!(odd.quad().abs() < 1e-13);
    }

    #[test]
    fn sectors_partition_the_plane(k in 1usize..40, r in 0.1f64..50.0, x in -100.0f64..100.0, y in -100.0f64..100.0) {
        let c = bump_centers(k, r, 2);
        let i = sector_membership(&[x, y], &c);
        prop_assert!(i < k);
        // The assigned center is a nearest one.
        let d = c.distance_to(i, &[x, y]);
        for j in 0..k {
            prop_assert!(d <= c.distance_to(j, &[x, y]) + 1e-9 * (1.0 + d));
        }
    }

    #[test]
    fn centers_lie_on_the_circle_and_rotate_into_each_other(k in 1usize..40, r in 0.1f64..50.0) {
        let c = bump_centers(k, r, 2);
        let t = 2.0 * PI / k as f64;
        for x in &c.centers {
            prop_assert!((x[0].hypot(x[1]) - r).abs() < 1e-12 * r);
            let rot = [t.cos() * x[0] - t.sin() * x[1], t.sin() * x[0] + t.cos() * x[1]];
            let hit = c.centers.iter().any(|y| (y[0] - rot[0]).hypot(y[1] - rot[1]) < 1e-10 * r);
            prop_assert!(hit);
        }
    }
}

#[test]
fn interaction_is_positive_and_decreasing_in_radius() {
    let p = solve_ground_state(1.0, 1.0, 2).unwrap();
    let g = Grid::new(2, 18.0, 0.25).unwrap();
    for k in [3, 6, 12] {
        let sums: Vec<f64> =
            [3.0, 4.0, 5.0, 6.0].iter().map(|&r| interaction_term(&p, &bump_centers(k, r, 2), &g, 1.0).sum).collect();
        assert!(sums.iter().all(|&s| s > 0.0), "{sums:?}");
        assert!(sums.windows(2).all(|w| w[1] < w[0]), "k={k}: {sums:?}");
    }
}

#[test]
fn scaling_covariance_of_ground_states() {
    for dim in [1, 2] {
        let w = solve_ground_state(1.0, 1.0, dim).unwrap();
        for (c, alpha) in [(4.0, 1.0), (1.0, 2.0), (2.0, 3.0)] {
            let p = solve_ground_state(c, alpha, dim).unwrap();
            let scale = (c / alpha).sqrt();
            for r in [0.0, 0.3, 1.0, 2.5, 4.0] {
                let want = scale * w.eval(c.sqrt() * r);
                assert!((p.eval(r) - want).abs() <= 1e-6 * want, "N={dim} c={c} alpha={alpha} r={r}");
            }
        }
    }
}
