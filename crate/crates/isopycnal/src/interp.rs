//! Shape-preserving cubic Hermite interpolation on a 1-D column.
//!
//! Node slopes come from five-point Lagrange differentiation, so smooth data
//! are reproduced to fourth order. When the whole column is monotone the
//! slopes are clipped with the Fritsch-Carlson bound, which keeps the
//! interpolant monotone. Columns with extrema are interpolated unclipped:
//! there is no shape to preserve, and clipping next to an extremum would cost
//! two orders of accuracy there.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

/// Weights of the derivative at `at` of the Lagrange polynomial through `xs`.
fn lagrange_derivative_weights(xs: &[f64], at: f64) -> Vec<f64> {
    let n = xs.len();
    let mut w = vec![0.0; n];
    for j in 0..n {
        let mut denom = 1.0;
        for m in 0..n {
            if m != j {
                denom *= xs[j] - xs[m];
            }
        }
        let mut num = 0.0;
        for i in 0..n {
            if i == j {
                continue;
            }
            let mut p = 1.0;
            for m in 0..n {
                if m != j && m != i {
                    p *= at - xs[m];
                }
            }
            num += p;
        }
        w[j] = num / denom;
    }
    w
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::InsufficientData {
                needed: 2,
                got: n.min(y.len()),
            });
        }
        if x.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(Error::InvalidParameter {
                key: "interpolation nodes".into(),
                reason: "abscissae must be strictly increasing".into(),
            });
        }
        let width = n.min(5);
        let mut d = vec![0.0; n];
        for i in 0..n {
            let lo = i.saturating_sub(width / 2).min(n - width);
            let xs = &x[lo..lo + width];
            let w = lagrange_derivative_weights(xs, x[i]);
            d[i] = w.iter().zip(&y[lo..lo + width]).map(|(a, b)| a * b).sum();
        }
        let secant: Vec<f64> = (0..n - 1)
            .map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i]))
            .collect();
        let monotone = secant.iter().all(|&v| v >= 0.0) || secant.iter().all(|&v| v <= 0.0);
        if !monotone {
            return Ok(Self { x, y, d });
        }
        for i in 0..n {
            let left = if i > 0 { Some(secant[i - 1]) } else { None };
            let right = if i < n - 1 { Some(secant[i]) } else { None };
            let (s, bound) = match (left, right) {
                (Some(a), Some(b)) => {
                    if a * b == 0.0 {
                        d[i] = 0.0;
                        continue;
                    }
                    (a.signum(), 3.0 * a.abs().min(b.abs()))
                }
                (Some(a), None) | (None, Some(a)) => {
                    if a == 0.0 {
                        d[i] = 0.0;
                        continue;
                    }
                    (a.signum(), 3.0 * a.abs())
                }
                (None, None) => unreachable!(),
            };
            if d[i] * s < 0.0 {
                d[i] = 0.0;
            } else if d[i].abs() > bound {
                d[i] = s * bound;
            }
        }
        Ok(Self { x, y, d })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn lo(&self) -> f64 {
        self.x[0]
    }

    pub fn hi(&self) -> f64 {
        self.x[self.x.len() - 1]
    }

    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let (lo, hi) = (self.lo(), self.hi());
        let slack = 1e-12 * (hi - lo);
        if !(t >= lo - slack && t <= hi + slack) {
            return Err(Error::InterpolationDomain { value: t, lo, hi });
        }
        let t = t.clamp(lo, hi);
        let i = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            p => (p - 1).min(self.x.len() - 2),
        };
        Ok((i, t))
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let (i, t) = self.locate(t)?;
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        Ok(h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1])
    }

    pub fn deriv(&self, t: f64) -> Result<f64> {
        let (i, t) = self.locate(t)?;
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let s2 = s * s;
        let g00 = (6.0 * s2 - 6.0 * s) / h;
        let g10 = 3.0 * s2 - 4.0 * s + 1.0;
        let g01 = (-6.0 * s2 + 6.0 * s) / h;
        let g11 = 3.0 * s2 - 2.0 * s;
        Ok(g00 * self.y[i] + g10 * self.d[i] + g01 * self.y[i + 1] + g11 * self.d[i + 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nodes(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn reproduces_cubics_away_from_limiting() {
        let x = nodes(11);
        let f = |t: f64| 1.0 + 2.0 * t + 0.5 * t * t + 0.25 * t * t * t;
        let c = MonotoneCubic::new(x.clone(), x.iter().map(|&t| f(t)).collect()).unwrap();
        for k in 0..50 {
            let t = k as f64 / 49.0;
            assert!((c.eval(t).unwrap() - f(t)).abs() < 1e-13);
        }
    }

    #[test]
    fn fourth_order_on_smooth_data() {
        let err = |n: usize| {
            let x = nodes(n);
            let y = x.iter().map(|t| (3.0 * t).sin()).collect();
            let c = MonotoneCubic::new(x, y).unwrap();
            (0..400)
                .map(|k| {
                    let t = (k as f64 + 0.5) / 400.0;
                    (c.eval(t).unwrap() - (3.0 * t).sin()).abs()
                })
                .fold(0.0, f64::max)
        };
        let slope = (err(17) / err(33)).log2();
        assert!(slope > 3.7, "slope {slope}");
    }

    #[test]
    fn monotone_data_stay_monotone() {
        let x = nodes(9);
        let y = vec![0.0, 0.0, 0.0, 0.1, 1.0, 1.0, 1.0, 1.0, 1.5];
        let c = MonotoneCubic::new(x, y).unwrap();
        let mut prev = c.eval(0.0).unwrap();
        for k in 1..=800 {
            let v = c.eval(k as f64 / 800.0).unwrap();
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn outside_range_is_an_error() {
        let c = MonotoneCubic::new(nodes(5), vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(matches!(
            c.eval(1.5),
            Err(Error::InterpolationDomain { .. })
        ));
    }
}
