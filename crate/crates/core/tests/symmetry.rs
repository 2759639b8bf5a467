use ringbump::geometry::{bump_centers, symmetrize, BumpFields, Symmetry};
use ringbump::grid::{Field, Grid};
use ringbump::radial::solve_ground_state;

const TOL: f64 = 1e-10;

fn defect(f: &Field, k: usize) -> f64 {
    symmetrize(f, k).sub(f).max_abs() / f.max_abs()
}

#[test]
fn bump_sum_is_symmetric_for_node_preserving_k() {
    let p = solve_ground_state(1.0, 1.0, 2).unwrap();
    let g = Grid::new(2, 12.0, 0.125).unwrap();
    for k in [2, 4] {
        let bf = BumpFields::new(&g, &p, &bump_centers(k, 3.0, 2));
        assert!(defect(&bf.sum, k) < TOL);
        assert!(defect(&bf.z, k) < TOL);
    }
}

#[test]
fn bump_sum_is_symmetric() {
    let p = solve_ground_state(1.0, 1.0, 2).unwrap();
    let g = Grid::new(2, 14.0, 0.125).unwrap();
    let bf = BumpFields::new(&g, &p, &bump_centers(6, 4.0, 2));
    let d = defect(&bf.sum, 6);
    assert!(d < TOL, "symmetrize(W) − W = {d:e}");
}

#[test]
fn constraint_field_is_symmetric() {
    let p = solve_ground_state(1.0, 1.0, 2).unwrap();
    let g = Grid::new(2, 14.0, 0.125).unwrap();
    let bf = BumpFields::new(&g, &p, &bump_centers(6, 4.0, 2));
    let d = defect(&bf.z, 6);
    assert!(d < TOL, "symmetrize(Z) − Z = {d:e}");
}

#[test]
fn symmetrize_defect_is_fourth_order_interpolation_error() {
    // The group average interpolates at rotated points, so the defect on an
    // exactly symmetric field is the interpolation error, O(h^4).
    let p = solve_ground_state(1.0, 1.0, 2).unwrap();
    let at = |h: f64| {
        let g = Grid::new(2, 14.0, h).unwrap();
        defect(&BumpFields::new(&g, &p, &bump_centers(6, 4.0, 2)).sum, 6)
    };
    let (coarse, fine) = (at(0.25), at(0.125));
    assert!(coarse / fine > 10.0, "{coarse:e} {fine:e}");
}

#[test]
fn laplacian_commutes_with_symmetrize() {
    let g = Grid::new(2, 10.0, 0.125).unwrap();
    let f = Field::sample(&g, |y| (-((y[0] - 2.0).powi(2) + 2.0 * (y[1] - 0.7).powi(2))).exp());
    let s = Symmetry::new(&g, 6);
    let a = s.apply(&f).laplacian();
    let b = s.apply(&f.laplacian());
    let d = a.sub(&b).max_abs() / a.max_abs();
    assert!(d < TOL, "commutator {d:e}");
}

#[test]
fn laplacian_commutes_with_node_preserving_group() {
    let g = Grid::new(2, 6.0, 0.25).unwrap();
    let f = Field::sample(&g, |y| (-((y[0] - 2.0).powi(2) + 2.0 * (y[1] - 0.7).powi(2))).exp());
    for k in [2, 4, 8, 12] {
        let s = Symmetry::new(&g, k);
        let a = Field::from_values(&g, s.project_exact(f.values())).unwrap().laplacian();
        let b = Field::from_values(&g, s.project_exact(f.laplacian().values())).unwrap();
        assert!(a.sub(&b).max_abs() < 1e-12 * a.max_abs());
    }
}
