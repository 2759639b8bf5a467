//! Exact inverse of the shifted Dirichlet Laplacian `-Δ_h + s` by separable
//! type-I sine transforms. Used as the Krylov preconditioner.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid;

pub struct HelmholtzSolver {
    grid: Arc<Grid>,
    shift: f64,
    fft: Arc<dyn Fft<f64>>,
    /// 1-D eigenvalues `(4/h²) sin²(π(j+1)/(2(n+1)))` of `-D_hh`.
    eig: Vec<f64>,
}

impl HelmholtzSolver {
    pub fn new(grid: &Arc<Grid>, shift: f64) -> Self {
        assert!(shift > 0.0, "shift must be positive");
        let n = grid.nodes_per_axis();
        let h = grid.spacing();
        let fft = FftPlanner::new().plan_fft_forward(2 * (n + 1));
        let eig = (0..n)
            .map(|j| {
                let s = (std::f64::consts::PI * (j + 1) as f64 / (2.0 * (n + 1) as f64)).sin();
                4.0 * s * s / (h * h)
            })
            .collect();
        HelmholtzSolver { grid: grid.clone(), shift, fft, eig }
    }

    /// `out = (-Δ_h + s)^{-1} f`.
    pub fn solve(&self, f: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let n = g.nodes_per_axis();
        let dim = g.dim();
        out.copy_from_slice(f);
        for d in 0..dim {
            self.transform_axis(out, d);
        }
        let eig = &self.eig;
        let shift = self.shift;
        let scale = (2.0 / (n + 1) as f64).powi(dim as i32);
        out.par_iter_mut().enumerate().for_each(|(node, x)| {
            let mut lam = shift;
            let mut rest = node;
            for _ in 0..dim {
                lam += eig[rest % n];
                rest /= n;
            }
            *x *= scale / lam;
        });
        for d in 0..dim {
            self.transform_axis(out, d);
        }
    }

    /// Unnormalized DST-I along axis `d`, in place.
    fn transform_axis(&self, data: &mut [f64], d: usize) {
        let g = &self.grid;
        let n = g.nodes_per_axis();
        let s = g.stride(d);
        let lines = data.len() / n;
        let m = 2 * (n + 1);
        let fft = &self.fft;
        let src: &[f64] = data;
        let mut transformed = vec![0.0; data.len()];
        transformed.par_chunks_mut(n).enumerate().for_each_init(
            || (vec![Complex::new(0.0, 0.0); m], vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()]),
            |(buf, scratch), (line, out)| {
                let base = (line / s) * n * s + line % s;
                buf[0] = Complex::new(0.0, 0.0);
                buf[n + 1] = Complex::new(0.0, 0.0);
                for i in 0..n {
                    let x = src[base + i * s];
                    buf[i + 1] = Complex::new(x, 0.0);
                    buf[m - 1 - i] = Complex::new(-x, 0.0);
                }
                fft.process_with_scratch(buf, scratch);
                for (j, o) in out.iter_mut().enumerate() {
                    *o = -0.5 * buf[j + 1].im;
                }
            },
        );
        if s == 1 {
            data.copy_from_slice(&transformed);
            return;
        }
        for line in 0..lines {
            let base = (line / s) * n * s + line % s;
            for i in 0..n {
                data[base + i * s] = transformed[line * n + i];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Field;

    #[test]
    fn inverts_the_shifted_laplacian() {
        for (dim, l, h) in [(1, 3.0, 0.25), (2, 2.0, 0.125), (3, 1.0, 0.25)] {
            let g = Grid::new(dim, l, h).unwrap();
            let f = Field::sample(&g, |y| {
                y.iter().enumerate().map(|(i, x)| ((i + 1) as f64 * x).sin() + 0.3).product::<f64>()
            });
            let solver = HelmholtzSolver::new(&g, 1.5);
            let mut u = vec![0.0; g.len()];
            solver.solve(f.values(), &mut u);
            let uf = Field::from_values(&g, u).unwrap();
            let back = uf.laplacian().zip_map(&uf, |lap, x| -lap + 1.5 * x);
            for (a, b) in back.values().iter().zip(f.values()) {
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
        }
    }
}
