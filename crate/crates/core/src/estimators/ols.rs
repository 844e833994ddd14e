//! Small dense least squares through the normal equations.

/// Packed upper triangle accumulator for `XᵀX` and `Xᵀy`.
#[derive(Debug, Clone)]
pub(crate) struct NormalEquations {
    k: usize,
    xtx: Vec<f64>,
    xty: Vec<f64>,
}

impl NormalEquations {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            xtx: vec![0.0; k * (k + 1) / 2],
            xty: vec![0.0; k],
        }
    }

    /// From an already accumulated packed upper triangle and `Xᵀy`.
    pub fn from_parts(k: usize, xtx: Vec<f64>, xty: Vec<f64>) -> Self {
        debug_assert_eq!(xtx.len(), k * (k + 1) / 2);
        Self { k, xtx, xty }
    }

    #[inline]
    pub fn add(&mut self, x: &[f64], y: f64, weight: f64) {
        let mut idx = 0;
        for a in 0..self.k {
            let wa = weight * x[a];
            self.xty[a] += wa * y;
            for &xb in &x[a..self.k] {
                self.xtx[idx] += wa * xb;
                idx += 1;
            }
        }
    }

    /// Solve for the coefficients. `None` when `XᵀX` is numerically singular.
    pub fn solve(&self) -> Option<Vec<f64>> {
        let k = self.k;
        let mut a = vec![0.0; k * k];
        let mut idx = 0;
        for r in 0..k {
            for c in r..k {
                a[r * k + c] = self.xtx[idx];
                a[c * k + r] = self.xtx[idx];
                idx += 1;
            }
        }
        cholesky_solve(&mut a, &self.xty, k)
    }
}

/// Solve `A x = b` for symmetric positive definite `A` (row-major, `k × k`),
/// after scaling to unit diagonal. Returns `None` on a pivot below `1e-10`.
fn cholesky_solve(a: &mut [f64], b: &[f64], k: usize) -> Option<Vec<f64>> {
    let scale: Vec<f64> = (0..k)
        .map(|i| {
            let d = a[i * k + i];
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    if scale.iter().any(|&s| s == 0.0 || !s.is_finite()) {
        return None;
    }
    for r in 0..k {
        for c in 0..k {
            a[r * k + c] *= scale[r] * scale[c];
        }
    }
    // In-place lower Cholesky factor.
    for j in 0..k {
        let mut d = a[j * k + j];
        for p in 0..j {
            d -= a[j * k + p] * a[j * k + p];
        }
        if !(d > 1e-10) {
            return None;
        }
        let d = d.sqrt();
        a[j * k + j] = d;
        for i in j + 1..k {
            let mut s = a[i * k + j];
            for p in 0..j {
                s -= a[i * k + p] * a[j * k + p];
            }
            a[i * k + j] = s / d;
        }
    }
    let mut z: Vec<f64> = (0..k).map(|i| b[i] * scale[i]).collect();
    for i in 0..k {
        for p in 0..i {
            z[i] -= a[i * k + p] * z[p];
        }
        z[i] /= a[i * k + i];
    }
    for i in (0..k).rev() {
        for p in i + 1..k {
            z[i] -= a[p * k + i] * z[p];
        }
        z[i] /= a[i * k + i];
    }
    Some(z.into_iter().zip(&scale).map(|(v, s)| v * s).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_line() {
        let mut ne = NormalEquations::new(2);
        for i in 0..10 {
            let x = i as f64;
            ne.add(&[1.0, x], 3.0 - 2.0 * x, 1.0);
        }
        let beta = ne.solve().unwrap();
        assert!((beta[0] - 3.0).abs() < 1e-10);
        assert!((beta[1] + 2.0).abs() < 1e-10);
    }

    #[test]
    fn collinear_columns_are_singular() {
        let mut ne = NormalEquations::new(3);
        for i in 0..10 {
            let x = i as f64;
            ne.add(&[1.0, x, 2.0 * x], x, 1.0);
        }
        assert!(ne.solve().is_none());
        let mut constant = NormalEquations::new(2);
        for _ in 0..5 {
            constant.add(&[1.0, 0.0], 1.0, 1.0);
        }
        assert!(constant.solve().is_none());
    }
}
