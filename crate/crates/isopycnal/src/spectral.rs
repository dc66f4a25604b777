//! Horizontal Fourier transforms and multipliers, applied level by level.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::domain::{Field, Grid};

/// Smooth cutoff: 1 on `[0, 1]`, 0 on `[2, inf)`, smooth in between.
pub fn chi(t: f64) -> f64 {
    if t <= 1.0 {
        return 1.0;
    }
    if t >= 2.0 {
        return 0.0;
    }
    let psi = |u: f64| if u > 0.0 { (-1.0 / u).exp() } else { 0.0 };
    let a = psi(2.0 - t);
    a / (a + psi(t - 1.0))
}

/// FFT plans and wavenumber tables for one grid.
///
/// Buffers are allocated per call, so a workspace can be shared by
/// reference between threads.
#[derive(Clone)]
pub struct SpectralWorkspace {
    grid: Grid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Signed integer index per position along one axis.
    m: Vec<i64>,
    /// Wavenumber `2 pi m / L` per position along one axis.
    k: Vec<f64>,
}

impl std::fmt::Debug for SpectralWorkspace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralWorkspace")
            .field("grid", &self.grid)
            .finish()
    }
}

impl SpectralWorkspace {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        let n = grid.nx;
        let m: Vec<i64> = (0..n as i64)
            .map(|i| if i < n as i64 / 2 { i } else { i - n as i64 })
            .collect();
        let base = 2.0 * std::f64::consts::PI / grid.length;
        let k = m.iter().map(|&v| base * v as f64).collect();
        Self {
            grid: *grid,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            m,
            k,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Integer mode indices of plane position `j` (second entry 0 when d = 1).
    pub fn mode_index(&self, j: usize) -> [i64; 2] {
        if self.grid.d == 1 {
            [self.m[j], 0]
        } else {
            [self.m[j / self.grid.nx], self.m[j % self.grid.nx]]
        }
    }

    /// Wavevector of plane position `j`.
    pub fn wavevector(&self, j: usize) -> [f64; 2] {
        if self.grid.d == 1 {
            [self.k[j], 0.0]
        } else {
            [self.k[j / self.grid.nx], self.k[j % self.grid.nx]]
        }
    }

    pub fn is_nyquist(&self, m: i64) -> bool {
        m == -(self.grid.nx as i64) / 2
    }

    /// Wavevector with Nyquist components set to zero, as seen by first derivatives.
    pub fn derivative_wavevector(&self, j: usize) -> [f64; 2] {
        let m = self.mode_index(j);
        let mut k = self.wavevector(j);
        for a in 0..2 {
            if self.is_nyquist(m[a]) {
                k[a] = 0.0;
            }
        }
        k
    }

    /// True when the mode survives the 2/3 rule.
    pub fn resolved(&self, j: usize) -> bool {
        let cut = self.grid.nx as i64 / 3;
        let m = self.mode_index(j);
        m[0].abs() <= cut && m[1].abs() <= cut && !self.is_nyquist(m[0]) && !self.is_nyquist(m[1])
    }

    /// Transforms a block of whole levels in place.
    fn fft_block(&self, buf: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.grid.nx;
        // rows are contiguous, so one call covers every row of every level
        plan.process(buf);
        if self.grid.d == 1 {
            return;
        }
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for plane in buf.chunks_mut(n * n) {
            for c in 0..n {
                for r in 0..n {
                    col[r] = plane[r * n + c];
                }
                plan.process(&mut col);
                for r in 0..n {
                    plane[r * n + c] = col[r];
                }
            }
        }
    }

    fn forward_into(&self, x: &[f64], buf: &mut [Complex64]) {
        buf.iter_mut().zip(x).for_each(|(b, &v)| *b = Complex64::new(v, 0.0));
        self.fft_block(buf, &self.fwd);
    }

    /// Inverse transform in place; writes the normalized real part to `out`.
    fn inverse_into(&self, buf: &mut [Complex64], out: &mut [f64]) {
        self.fft_block(buf, &self.inv);
        let scale = 1.0 / self.grid.plane() as f64;
        out.iter_mut().zip(buf.iter()).for_each(|(o, v)| *o = v.re * scale);
    }

    /// Forward transform of one level (unnormalized).
    pub fn forward_plane(&self, x: &[f64]) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); x.len()];
        self.forward_into(x, &mut buf);
        buf
    }

    /// Inverse transform of one level, normalized, real part.
    pub fn inverse_plane(&self, mut c: Vec<Complex64>) -> Vec<f64> {
        let mut out = vec![0.0; c.len()];
        self.inverse_into(&mut c, &mut out);
        out
    }

    /// Runs `f` over blocks of whole levels, in parallel once the field
    /// spans several blocks of about 8192 points.
    fn for_blocks<A: Sync, B: Send>(&self, out: &mut [B], inp: &[A], f: impl Fn(&mut [B], &[A]) + Sync) {
        let m = self.grid.plane();
        let block = m * (8192 / m).max(1);
        if out.len() <= block {
            f(out, inp);
        } else {
            out.par_chunks_mut(block).zip(inp.par_chunks(block)).for_each(|(o, x)| f(o, x));
        }
    }

    /// Forward transform of every level.
    pub fn forward(&self, f: &[f64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); f.len()];
        self.for_blocks(&mut out, f, |o, x| self.forward_into(x, o));
        out
    }

    pub fn inverse(&self, c: &[Complex64]) -> Field {
        let mut out = vec![0.0; c.len()];
        self.for_blocks(&mut out, c, |o, x| {
            let mut buf = x.to_vec();
            self.inverse_into(&mut buf, o);
        });
        out
    }

    /// Multiplies each horizontal mode by `sym(j)`, where `j` is the plane position.
    pub fn apply(&self, f: &[f64], sym: impl Fn(usize) -> Complex64 + Sync) -> Field {
        let m = self.grid.plane();
        let table: Vec<Complex64> = (0..m).map(&sym).collect();
        let mut out = vec![0.0; f.len()];
        self.for_blocks(&mut out, f, |o, x| {
            let mut buf = vec![Complex64::new(0.0, 0.0); x.len()];
            self.forward_into(x, &mut buf);
            for level in buf.chunks_mut(m) {
                level.iter_mut().zip(&table).for_each(|(a, b)| *a *= b);
            }
            self.inverse_into(&mut buf, o);
        });
        out
    }

    pub fn apply_real(&self, f: &[f64], sym: impl Fn(usize) -> f64 + Sync) -> Field {
        self.apply(f, |j| Complex64::new(sym(j), 0.0))
    }

    /// Spectral derivative along `axis`; the Nyquist mode is dropped.
    pub fn dx(&self, f: &[f64], axis: usize) -> Field {
        self.apply(f, |j| {
            Complex64::new(0.0, self.derivative_wavevector(j)[axis])
        })
    }

    pub fn grad_x(&self, f: &[f64]) -> Vec<Field> {
        (0..self.grid.d).map(|a| self.dx(f, a)).collect()
    }

    pub fn div_x(&self, v: &[Field]) -> Field {
        let mut out = self.dx(&v[0], 0);
        for (a, f) in v.iter().enumerate().skip(1) {
            let g = self.dx(f, a);
            out.iter_mut().zip(g).for_each(|(o, x)| *o += x);
        }
        out
    }

    fn xi2(&self, j: usize) -> f64 {
        let k = self.wavevector(j);
        k[0] * k[0] + k[1] * k[1]
    }

    /// `Lambda^s`: symbol `(1 + |xi|^2)^(s/2)`.
    pub fn lambda_pow(&self, f: &[f64], s: f64) -> Field {
        if s == 0.0 {
            return f.to_vec();
        }
        self.apply_real(f, |j| (1.0 + self.xi2(j)).powf(0.5 * s))
    }

    /// `|D|^2 Lambda^(s-2)`: symbol `|xi|^2 (1 + |xi|^2)^((s-2)/2)`.
    pub fn dsq_lambda(&self, f: &[f64], s: f64) -> Field {
        self.apply_real(f, |j| {
            let x = self.xi2(j);
            x * (1.0 + x).powf(0.5 * (s - 2.0))
        })
    }

    /// Mollifier `J_delta`: symbol `chi(delta |xi|)`.
    pub fn mollify(&self, f: &[f64], delta: f64) -> Field {
        if delta == 0.0 {
            return f.to_vec();
        }
        self.apply_real(f, |j| chi(delta * self.xi2(j).sqrt()))
    }

    /// 2/3-rule truncation.
    pub fn dealias(&self, f: &[f64]) -> Field {
        self.apply_real(f, |j| if self.resolved(j) { 1.0 } else { 0.0 })
    }

    /// Dealiased product: inputs and output truncated by the 2/3 rule.
    pub fn product(&self, a: &[f64], b: &[f64]) -> Field {
        let a = self.dealias(a);
        let b = self.dealias(b);
        let p: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        self.dealias(&p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn round_trip_is_identity() {
        let g = Grid::new(2, 16, 3.0, 5).unwrap();
        let ws = SpectralWorkspace::new(&g);
        let f = g.sample(|x, r| (x[0] * 2.1).sin() * (1.0 + r) + x[1].cos());
        let back = ws.inverse(&ws.forward(&f));
        assert!(max_diff(&f, &back) < 1e-13);
    }

    #[test]
    fn derivative_of_sine() {
        let g = Grid::line(32, 5).unwrap();
        let ws = SpectralWorkspace::new(&g);
        let f = g.sample(|x, _| x[0].sin());
        let c = g.sample(|x, _| x[0].cos());
        assert!(max_diff(&ws.dx(&f, 0), &c) < 1e-13);
        let one = vec![1.0; g.len()];
        assert!(max_diff(&ws.dx(&one, 0), &g.zeros()) < 1e-15);
    }

    #[test]
    fn second_axis_derivative() {
        let g = Grid::new(2, 16, 2.0 * PI, 5).unwrap();
        let ws = SpectralWorkspace::new(&g);
        let f = g.sample(|x, _| (2.0 * x[1]).sin() * x[0].cos());
        let e = g.sample(|x, _| 2.0 * (2.0 * x[1]).cos() * x[0].cos());
        assert!(max_diff(&ws.dx(&f, 1), &e) < 1e-12);
    }

    #[test]
    fn multipliers_on_one_mode() {
        let g = Grid::line(32, 5).unwrap();
        let ws = SpectralWorkspace::new(&g);
        let f = g.sample(|x, _| x[0].sin());
        let l = ws.lambda_pow(&f, 1.0);
        let e: Vec<f64> = f.iter().map(|v| 2f64.sqrt() * v).collect();
        assert!(max_diff(&l, &e) < 1e-13);
        assert_eq!(ws.lambda_pow(&f, 0.0), f);
        let one = vec![1.0; g.len()];
        assert!(max_diff(&ws.dsq_lambda(&one, 3.0), &g.zeros()) < 1e-15);
    }

    #[test]
    fn mollifier_cases() {
        let g = Grid::line(32, 5).unwrap();
        let ws = SpectralWorkspace::new(&g);
        let f = g.sample(|x, _| x[0].sin());
        assert_eq!(ws.mollify(&f, 0.0), f);
        assert!(max_diff(&ws.mollify(&f, 0.5), &f) < 1e-14);
        let h = g.sample(|x, _| (8.0 * x[0]).cos());
        assert!(max_diff(&ws.mollify(&h, 0.5), &g.zeros()) < 1e-14);
    }

    #[test]
    fn chi_is_smooth_step() {
        assert_eq!(chi(0.3), 1.0);
        assert_eq!(chi(2.5), 0.0);
        assert!((chi(1.5) - 0.5).abs() < 1e-15);
        let mut prev = 1.0;
        for i in 0..=100 {
            let v = chi(1.0 + i as f64 / 100.0);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn dealias_cuts_high_modes() {
        let g = Grid::line(24usize.next_power_of_two(), 5).unwrap();
        let ws = SpectralWorkspace::new(&g);
        let lo = g.sample(|x, _| (3.0 * x[0]).sin());
        let hi = g.sample(|x, _| (12.0 * x[0]).sin());
        assert!(max_diff(&ws.dealias(&lo), &lo) < 1e-14);
        assert!(max_diff(&ws.dealias(&hi), &g.zeros()) < 1e-14);
    }
}
