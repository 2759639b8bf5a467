//! Bump placement on the circle of radius `R`, sectors, the symmetry
//! projection onto `H_s`, and the fields built from translated bumps.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::grid::{Field, Grid, MAX_DIM};
use crate::radial::RadialProfile;

#[derive(Debug, Clone, Serialize)]
pub struct BumpConfiguration {
    pub k: usize,
    pub radius: f64,
    pub dim: usize,
    pub centers: Vec<[f64; MAX_DIM]>,
    pub normals: Vec<[f64; 2]>,
}

/// `x_i = R(cos 2(i−1)π/k, sin 2(i−1)π/k, 0)`.
pub fn bump_centers(k: usize, radius: f64, dim: usize) -> BumpConfiguration {
    assert!(k >= 1 && radius > 0.0);
    let mut centers = Vec::with_capacity(k);
    let mut normals = Vec::with_capacity(k);
    for i in 0..k {
        let t = 2.0 * PI * i as f64 / k as f64;
        let (s, c) = t.sin_cos();
        centers.push([radius * c, radius * s, 0.0]);
        normals.push([c, s]);
    }
    BumpConfiguration { k, radius, dim, centers, normals }
}

impl BumpConfiguration {
    pub fn nearest_neighbor_distance(&self) -> f64 {
        2.0 * self.radius * (PI / self.k as f64).sin()
    }

    pub fn distance_to(&self, i: usize, y: &[f64]) -> f64 {
        let x = &self.centers[i];
        (0..self.dim).map(|d| (y[d] - x[d]).powi(2)).sum::<f64>().sqrt()
    }
}

/// 0-based index of the sector `{z : z_i·z ≥ R|z| cos(π/k)}` containing `y`;
/// the origin and boundary ties go to the smaller index.
pub fn sector_membership(y: &[f64], config: &BumpConfiguration) -> usize {
    let (a, b) = (y[0], y[1]);
    let norm = a.hypot(b);
    if norm == 0.0 {
        return 0;
    }
    let cos_half = (PI / config.k as f64).cos();
    let tol = 1e-12 * norm;
    for (i, n) in config.normals.iter().enumerate() {
        if n[0] * a + n[1] * b >= norm * cos_half - tol {
            return i;
        }
    }
    // Unreachable up to rounding: fall back to the closest normal.
    config
        .normals
        .iter()
        .enumerate()
        .map(|(i, n)| (i, n[0] * a + n[1] * b))
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc })
        .0
}

/// `∂V_i/∂R (y) = −V0'(|y−x_i|)·((y−x_i)·n_i)/|y−x_i|`, zero at `y = x_i`.
pub fn d_bump_dr(profile: &RadialProfile, config: &BumpConfiguration, i: usize, y: &[f64]) -> f64 {
    let x = &config.centers[i];
    let n = &config.normals[i];
    let d = config.distance_to(i, y);
    if d == 0.0 {
        return 0.0;
    }
    let proj = (y[0] - x[0]) * n[0] + (y[1] - x[1]) * n[1];
    -profile.eval_deriv(d) * proj / d
}

/// Signed permutation of the first two axes, optionally with `y3 → −y3`.
#[derive(Debug, Clone, Copy)]
struct Exact {
    swap: bool,
    s0: i64,
    s1: i64,
    s2: i64,
}

/// Projection onto fields invariant under the rotation by `2π/k` in the
/// `(y1, y2)` plane and the reflections `y_n → −y_n`, `n ≥ 2`.
///
/// Group elements that map grid nodes to nodes (the intersection with the
/// symmetry group of the square) are applied exactly; the remaining rotation
/// cosets are evaluated by 4-point Lagrange interpolation in the plane.
pub struct Symmetry {
    grid: Arc<Grid>,
    k: usize,
    exact: Vec<Exact>,
    rotations: Vec<(f64, f64)>,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl Symmetry {
    pub fn new(grid: &Arc<Grid>, k: usize) -> Symmetry {
        assert!(k >= 1);
        assert!(grid.dim() >= 2, "symmetry needs at least two dimensions");
        let g = gcd(k, 4);
        let mut planar: Vec<(bool, i64, i64)> = Vec::new();
        // Rotations by multiples of 2π/g, each with and without y2 → −y2.
        for q in 0..g {
            let quarter = (q * 4 / g) % 4;
            let rot = match quarter {
                0 => (false, 1, 1),
                1 => (true, -1, 1),
                2 => (false, -1, -1),
                _ => (true, 1, -1),
            };
            planar.push(rot);
            // Reflection y2 → −y2 applied first.
            let (swap, a, b) = rot;
            planar.push(if swap { (true, -a, b) } else { (false, a, -b) });
        }
        let mut exact = Vec::new();
        for &(swap, s0, s1) in &planar {
            exact.push(Exact { swap, s0, s1, s2: 1 });
            if grid.dim() == 3 {
                exact.push(Exact { swap, s0, s1, s2: -1 });
            }
        }
        let cosets = k / g;
        let rotations = (0..cosets)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / k as f64;
                (t.cos(), t.sin())
            })
            .collect();
        Symmetry { grid: grid.clone(), k, exact, rotations }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// True when every group element maps nodes to nodes (`k ∈ {1, 2, 4}`).
    pub fn is_exact(&self) -> bool {
        self.rotations.len() == 1
    }

    /// Node index of the image of `node` under an exact element.
    #[inline]
    fn image(&self, e: &Exact, node: usize) -> usize {
        let g = &self.grid;
        let n = g.nodes_per_axis();
        let c = g.center_index() as i64;
        let i0 = g.axis_index(node, 0) as i64 - c;
        let i1 = g.axis_index(node, 1) as i64 - c;
        let (a, b) = if e.swap { (i1, i0) } else { (i0, i1) };
        let j0 = (e.s0 * a + c) as usize;
        let j1 = (e.s1 * b + c) as usize;
        let mut out = j0 * n + j1;
        if g.dim() == 3 {
            let i2 = g.axis_index(node, 2) as i64 - c;
            out = out * n + (e.s2 * i2 + c) as usize;
        }
        out
    }

    /// Average over the node-preserving subgroup (an orthogonal projection).
    pub fn project_exact(&self, values: &[f64]) -> Vec<f64> {
        let inv = 1.0 / self.exact.len() as f64;
        (0..values.len())
            .into_par_iter()
            .map(|node| {
                let mut s = 0.0;
                for e in &self.exact {
                    s += values[self.image(e, node)];
                }
                s * inv
            })
            .collect()
    }

    pub fn project_exact_in_place(&self, values: &mut [f64]) {
        let p = self.project_exact(values);
        values.copy_from_slice(&p);
    }

    /// Full group average.
    pub fn apply(&self, f: &Field) -> Field {
        assert!(f.grid().as_ref() == self.grid.as_ref());
        let base = self.project_exact(f.values());
        if self.is_exact() {
            return Field::from_values(&self.grid, base).unwrap();
        }
        let g = &self.grid;
        let inv = 1.0 / self.rotations.len() as f64;
        let avg: Vec<f64> = (0..base.len())
            .into_par_iter()
            .map(|node| {
                let p = g.point(node);
                let mut s = base[node];
                for &(c, sn) in &self.rotations[1..] {
                    let x = c * p[0] - sn * p[1];
                    let y = sn * p[0] + c * p[1];
                    s += interpolate_plane(g, &base, node, x, y);
                }
                s * inv
            })
            .collect();
        let out = self.project_exact(&avg);
        Field::from_values(&self.grid, out).unwrap()
    }
}

/// Lagrange weights for nodes `-1, 0, 1, 2` at offset `t ∈ [0, 1)`.
#[inline]
fn lagrange4(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

/// Bicubic Lagrange interpolation of `values` at `(x, y)` in the plane of
/// `node` (same third coordinate); zero outside the box.
fn interpolate_plane(g: &Grid, values: &[f64], node: usize, x: f64, y: f64) -> f64 {
    let n = g.nodes_per_axis() as i64;
    let h = g.spacing();
    let l = g.half_width();
    let fx = (x + l) / h;
    let fy = (y + l) / h;
    let ix = fx.floor();
    let iy = fy.floor();
    let wx = lagrange4(fx - ix);
    let wy = lagrange4(fy - iy);
    let (ix, iy) = (ix as i64, iy as i64);
    let (s0, s1) = (g.stride(0), g.stride(1));
    let rest = node % s1;
    let mut acc = 0.0;
    for (a, wa) in wx.iter().enumerate() {
        let i = ix - 1 + a as i64;
        if i < 0 || i >= n {
            continue;
        }
        let mut row = 0.0;
        for (b, wb) in wy.iter().enumerate() {
            let j = iy - 1 + b as i64;
            if j < 0 || j >= n {
                continue;
            }
            row += wb * values[i as usize * s0 + j as usize * s1 + rest];
        }
        acc += wa * row;
    }
    acc
}

/// Full group average of `f` for the `k`-fold symmetry.
pub fn symmetrize(f: &Field, k: usize) -> Field {
    Symmetry::new(f.grid(), k).apply(f)
}

/// Fields of the ansatz on a grid: `W = ΣV_i`, `ΣV_i³`, and `Z = ΣV_i² ∂V_i/∂R`.
#[derive(Debug, Clone)]
pub struct BumpFields {
    pub sum: Field,
    pub cube_sum: Field,
    pub z: Field,
}

impl BumpFields {
    pub fn new(grid: &Arc<Grid>, profile: &RadialProfile, config: &BumpConfiguration) -> BumpFields {
        let dim = grid.dim();
        let k = config.k;
        let triples: Vec<[f64; 3]> = (0..grid.len())
            .into_par_iter()
            .map(|node| {
                let y = grid.point(node);
                let (mut w, mut c3, mut z) = (0.0, 0.0, 0.0);
                for i in 0..k {
                    let x = &config.centers[i];
                    let d = (0..dim).map(|j| (y[j] - x[j]).powi(2)).sum::<f64>().sqrt();
                    let v = profile.eval(d);
                    w += v;
                    c3 += v * v * v;
                    if d > 0.0 {
                        let nn = &config.normals[i];
                        let proj = (y[0] - x[0]) * nn[0] + (y[1] - x[1]) * nn[1];
                        z += v * v * (-profile.eval_deriv(d) * proj / d);
                    }
                }
                [w, c3, z]
            })
            .collect();
        let pick = |j: usize| Field::from_values(grid, triples.iter().map(|t| t[j]).collect()).unwrap();
        BumpFields { sum: pick(0), cube_sum: pick(1), z: pick(2) }
    }

    /// Removes rounding-level asymmetry under the node-preserving subgroup.
    pub fn project_exact(&mut self, sym: &Symmetry) {
        sym.project_exact_in_place(self.sum.values_mut());
        sym.project_exact_in_place(self.cube_sum.values_mut());
        sym.project_exact_in_place(self.z.values_mut());
    }
}

/// Single translated bump `V_i` sampled on a grid.
pub fn single_bump(grid: &Arc<Grid>, profile: &RadialProfile, config: &BumpConfiguration, i: usize) -> Field {
    Field::sample(grid, |y| profile.eval(config.distance_to(i, y)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::solve_ground_state;
    use approx::assert_relative_eq;

    fn max_diff(a: &Field, b: &Field) -> f64 {
        a.sub(b).max_abs()
    }

    #[test]
    fn centers() {
        let c = bump_centers(4, 2.0, 2);
        let want = [[2.0, 0.0], [0.0, 2.0], [-2.0, 0.0], [0.0, -2.0]];
        for (x, w) in c.centers.iter().zip(want) {
            assert!((x[0] - w[0]).abs() < 1e-15 && (x[1] - w[1]).abs() < 1e-15);
        }
        let c = bump_centers(2, 1.0, 3);
        assert_eq!(c.centers[0], [1.0, 0.0, 0.0]);
        assert!((c.centers[1][0] + 1.0).abs() < 1e-15 && c.centers[1][1].abs() < 1e-15);
        let c = bump_centers(6, 1.0, 2);
        let d = c.distance_to(1, &c.centers[0]);
        assert_relative_eq!(d, 1.0, max_relative = 1e-14);
        assert_relative_eq!(c.nearest_neighbor_distance(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn sectors() {
        let c = bump_centers(4, 1.0, 2);
        assert_eq!(sector_membership(&[1.0, 0.1], &c), 0);
        assert_eq!(sector_membership(&[0.0, 3.0], &c), 1);
        let t = PI / 4.0;
        assert_eq!(sector_membership(&[t.cos(), t.sin()], &c), 0);
        assert_eq!(sector_membership(&[0.0, 0.0], &c), 0);
        assert_eq!(sector_membership(&[0.3, -1.0], &c), 3);
    }

    #[test]
    fn exact_group_is_a_projection() {
        let g = Grid::new(2, 2.0, 0.25).unwrap();
        let f = Field::sample(&g, |y| (y[0] + 0.3 * y[1] * y[1] + 0.1 * y[0] * y[1]).sin());
        for k in [1, 2, 4] {
            let s = Symmetry::new(&g, k);
            assert!(s.is_exact());
            let once = s.apply(&f);
            let twice = s.apply(&once);
            assert!(max_diff(&once, &twice) < 1e-13);
        }
    }

    #[test]
    fn exact_k4_orbit_average() {
        // A bump at x_1 only becomes four bumps of amplitude 1/4 (group order 8,
        // stabilizer of x_1 of order 2).
        let g = Grid::new(2, 4.0, 0.5).unwrap();
        let f = Field::sample(&g, |y| (-((y[0] - 2.0).powi(2) + y[1] * y[1])).exp());
        let s = symmetrize(&f, 4);
        let c = g.center_index();
        let n = g.nodes_per_axis();
        let at = |i: usize, j: usize| s.values()[i * n + j];
        for (i, j) in [(c + 4, c), (c, c + 4), (c - 4, c), (c, c - 4)] {
            assert_relative_eq!(
                at(i, j),
                0.25 * (1.0 + 2.0 * (-8.0f64).exp() + (-16.0f64).exp()),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn interpolated_projection_is_nearly_idempotent() {
        let g = Grid::new(2, 6.0, 0.125).unwrap();
        let f = Field::sample(&g, |y| (-((y[0] - 2.0).powi(2) + (y[1] - 0.5).powi(2))).exp());
        let s = Symmetry::new(&g, 6);
        let once = s.apply(&f);
        let twice = s.apply(&once);
        assert!(max_diff(&once, &twice) < 1e-4 * once.max_abs());
    }

    #[test]
    fn d_bump_dr_matches_finite_difference() {
        let p = solve_ground_state(1.0, 1.0, 2).unwrap();
        let (k, r, e) = (5, 4.0, 1e-4);
        let c = bump_centers(k, r, 2);
        let cp = bump_centers(k, r + e, 2);
        let cm = bump_centers(k, r - e, 2);
        for y in [[1.0, 0.3], [5.0, 0.0], [-2.0, 2.5], [4.0, 0.0]] {
            for i in 0..k {
                let fd = (p.eval(cp.distance_to(i, &y)) - p.eval(cm.distance_to(i, &y))) / (2.0 * e);
                assert!((fd - d_bump_dr(&p, &c, i, &y)).abs() < 1e-7);
            }
        }
        // Beyond x_1 on its ray the bump approaches, so the value rises.
        assert!(d_bump_dr(&p, &c, 0, &[5.0, 0.0]) > 0.0);
        assert_eq!(d_bump_dr(&p, &c, 0, &[4.0, 0.0]), 0.0);
    }

    #[test]
    fn bump_sum_matches_direct_summation() {
        let p = solve_ground_state(1.0, 1.0, 2).unwrap();
        let g = Grid::new(2, 8.0, 0.5).unwrap();
        let c = bump_centers(3, 3.0, 2);
        let bf = BumpFields::new(&g, &p, &c);
        let mut direct = Field::zeros(&g);
        for i in 0..3 {
            direct = direct.add(&single_bump(&g, &p, &c, i));
        }
        assert!(max_diff(&bf.sum, &direct) < 1e-14);
    }
}
