use crate::binning::tent;
use crate::grid::Grid;

/// A map f: C → ℝ^m.
pub trait VectorField {
    fn dim(&self) -> usize;

    fn eval_into(&self, x: &[f64], out: &mut [f64]);

    fn is_continuous(&self) -> bool {
        true
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(x, &mut out);
        out
    }
}

/// A field given by a closure.
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnField { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> VectorField for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

/// f(x) = A x + b with A row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineField {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl VectorField for AffineField {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let m = self.b.len();
        for i in 0..m {
            out[i] = self.b[i] + (0..m).map(|j| self.a[i * m + j] * x[j]).sum::<f64>();
        }
    }
}

/// f̃(c) = Σ_d Λ(c,d) f(d) / Σ_d Λ(c,d): the tent interpolation of grid values.
pub struct TentInterpolant<'a> {
    grid: &'a Grid,
    values: &'a [Vec<f64>],
    width: f64,
}

impl<'a> TentInterpolant<'a> {
    /// `width` must exceed the grid covering radius so the denominator stays positive.
    pub fn new(grid: &'a Grid, values: &'a [Vec<f64>], width: f64) -> Self {
        debug_assert!(width > grid.covering_radius());
        TentInterpolant { grid, values, width }
    }

    /// Normalized tent weights at c, as (grid index, weight).
    pub fn weights(&self, c: &[f64]) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = self
            .grid
            .points()
            .iter()
            .enumerate()
            .filter_map(|(i, d)| {
                let l = tent(c, d, self.width);
                (l > 0.0).then_some((i, l))
            })
            .collect();
        let total: f64 = out.iter().map(|p| p.1).sum();
        for p in &mut out {
            p.1 /= total;
        }
        out
    }
}

impl VectorField for TentInterpolant<'_> {
    fn dim(&self) -> usize {
        self.grid.domain().dim()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut total = 0.0;
        for (d, v) in self.grid.points().iter().zip(self.values) {
            let l = tent(x, d, self.width);
            if l > 0.0 {
                total += l;
                crate::point::axpy(out, l, v);
            }
        }
        if total > 0.0 {
            out.iter_mut().for_each(|v| *v /= total);
        }
    }
}
