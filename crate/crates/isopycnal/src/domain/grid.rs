use crate::error::{Error, Result};
use crate::sum::pairwise_sum_by;

/// A scalar field stored level by level: index `k * plane + j`, with `k` the
/// vertical level (r outermost) and `j` the row-major horizontal index.
pub type Field = Vec<f64>;

/// Tensor grid on `T^d x [0, 1]`.
///
/// The horizontal torus has period `length` in every direction and `nx`
/// points per direction. The vertical grid is uniform and collocated: rows
/// `0` and `nr - 1` sit on `r = 0` and `r = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub d: usize,
    pub nx: usize,
    pub length: f64,
    pub nr: usize,
}

impl Grid {
    pub fn new(d: usize, nx: usize, length: f64, nr: usize) -> Result<Self> {
        if d != 1 && d != 2 {
            return Err(Error::InvalidGrid(format!("d = {d}, expected 1 or 2")));
        }
        if nx < 8 || !nx.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "Nx = {nx}, expected a power of two >= 8"
            )));
        }
        if nr < 5 {
            return Err(Error::InvalidGrid(format!("Nr = {nr}, expected >= 5")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("L = {length}, expected > 0")));
        }
        Ok(Self { d, nx, length, nr })
    }

    /// One horizontal direction on the standard `2 pi` torus.
    pub fn line(nx: usize, nr: usize) -> Result<Self> {
        Self::new(1, nx, 2.0 * std::f64::consts::PI, nr)
    }

    pub fn dr(&self) -> f64 {
        1.0 / (self.nr - 1) as f64
    }

    pub fn dx(&self) -> f64 {
        self.length / self.nx as f64
    }

    /// Number of points on one level.
    pub fn plane(&self) -> usize {
        self.nx.pow(self.d as u32)
    }

    pub fn len(&self) -> usize {
        self.nr * self.plane()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn r(&self, k: usize) -> f64 {
        k as f64 * self.dr()
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    /// Horizontal coordinates of plane index `j`; the second entry is 0 when d = 1.
    pub fn coords(&self, j: usize) -> [f64; 2] {
        if self.d == 1 {
            [self.x(j), 0.0]
        } else {
            [self.x(j / self.nx), self.x(j % self.nx)]
        }
    }

    pub fn zeros(&self) -> Field {
        vec![0.0; self.len()]
    }

    /// Samples `f(x, r)` on the grid; `x` has `d` meaningful entries.
    pub fn sample(&self, f: impl Fn([f64; 2], f64) -> f64) -> Field {
        let m = self.plane();
        let mut out = Vec::with_capacity(self.len());
        for k in 0..self.nr {
            let r = self.r(k);
            for j in 0..m {
                out.push(f(self.coords(j), r));
            }
        }
        out
    }

    /// Trapezoid weights in r (sum to 1).
    pub fn trapezoid(&self) -> Vec<f64> {
        let h = self.dr();
        let mut w = vec![h; self.nr];
        w[0] = 0.5 * h;
        w[self.nr - 1] = 0.5 * h;
        w
    }

    /// Area of one horizontal cell.
    pub fn cell_area(&self) -> f64 {
        self.dx().powi(self.d as i32)
    }

    /// Trapezoid-in-r, rectangle-in-x quadrature of `f(i)` over all points.
    ///
    /// Each level is summed pairwise, then the levels are combined pairwise,
    /// so the result does not depend on how the work is scheduled.
    pub fn quadrature(&self, f: impl Fn(usize) -> f64) -> f64 {
        let m = self.plane();
        let last = self.nr - 1;
        let levels = pairwise_sum_by(self.nr, &|k| {
            let s = pairwise_sum_by(m, &|j| f(k * m + j));
            if k == 0 || k == last {
                0.5 * s
            } else {
                s
            }
        });
        levels * self.dr() * self.cell_area()
    }

    /// Discrete L² inner product: trapezoid in r, rectangle rule in x.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.quadrature(|i| a[i] * b[i])
    }

    pub fn inner_weighted(&self, a: &[f64], b: &[f64], weight: &[f64]) -> f64 {
        self.quadrature(|i| weight[i] * a[i] * b[i])
    }

    pub fn norm(&self, a: &[f64]) -> f64 {
        self.inner(a, a).max(0.0).sqrt()
    }

    /// Integral of a field over the whole strip.
    pub fn integral(&self, a: &[f64]) -> f64 {
        self.quadrature(|i| a[i])
    }

    /// Slice of one vertical level.
    pub fn level<'a>(&self, f: &'a [f64], k: usize) -> &'a [f64] {
        let m = self.plane();
        &f[k * m..(k + 1) * m]
    }

    /// Copies the column at plane index `j`.
    pub fn column(&self, f: &[f64], j: usize) -> Vec<f64> {
        let m = self.plane();
        (0..self.nr).map(|k| f[k * m + j]).collect()
    }

    pub fn set_column(&self, f: &mut [f64], j: usize, col: &[f64]) {
        let m = self.plane();
        for (k, &v) in col.iter().enumerate() {
            f[k * m + j] = v;
        }
    }

    /// Sets rows r = 0 and r = 1 to zero.
    pub fn zero_boundary_rows(&self, f: &mut [f64]) {
        let m = self.plane();
        let n = self.len();
        f[..m].iter_mut().for_each(|v| *v = 0.0);
        f[n - m..].iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn boundary_max(&self, f: &[f64]) -> f64 {
        let m = self.plane();
        let n = self.len();
        f[..m]
            .iter()
            .chain(f[n - m..].iter())
            .fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

pub fn max_abs(f: &[f64]) -> f64 {
    f.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid::new(3, 16, 1.0, 9).is_err());
        assert!(Grid::new(1, 12, 1.0, 9).is_err());
        assert!(Grid::new(1, 4, 1.0, 9).is_err());
        assert!(Grid::new(1, 16, 1.0, 4).is_err());
        assert!(Grid::new(2, 16, 1.0, 5).is_ok());
    }

    #[test]
    fn spacing() {
        let g = Grid::line(64, 33).unwrap();
        assert_eq!(g.dr(), 1.0 / 32.0);
        assert!((g.dx() - 2.0 * PI / 64.0).abs() < 1e-15);
        assert_eq!(g.len(), 64 * 33);
    }

    #[test]
    fn integral_of_sin_squared() {
        // int_0^{2pi} sin^2 x dx * int_0^1 dr = pi
        let g = Grid::line(32, 9).unwrap();
        let f = g.sample(|x, _| x[0].sin());
        assert!((g.inner(&f, &f) - PI).abs() < 1e-12);
    }

    #[test]
    fn two_dimensional_layout() {
        let g = Grid::new(2, 8, 2.0 * PI, 5).unwrap();
        let f = g.sample(|x, r| x[0] + 10.0 * x[1] + 100.0 * r);
        let m = g.plane();
        let j = 3 * 8 + 5;
        let expect = g.x(3) + 10.0 * g.x(5) + 100.0 * g.r(2);
        assert!((f[2 * m + j] - expect).abs() < 1e-12);
    }
}
