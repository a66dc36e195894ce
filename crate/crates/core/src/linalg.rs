//! Small dense kernels: tridiagonal solves and symmetric tridiagonal
//! eigenpairs.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Scalars the tridiagonal solver runs over.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + From<f64>
{
    fn modulus(self) -> f64;
    fn is_finite(self) -> bool;
}

impl Scalar for f64 {
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl Scalar for Complex64 {
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// A tridiagonal matrix stored by diagonals. `lower[i]` couples row `i + 1`
/// to column `i`; `upper[i]` couples row `i` to column `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal<T> {
    pub lower: Vec<T>,
    pub diag: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Scalar> Tridiagonal<T> {
    pub fn new(lower: Vec<T>, diag: Vec<T>, upper: Vec<T>) -> Self {
        assert_eq!(lower.len() + 1, diag.len());
        assert_eq!(upper.len() + 1, diag.len());
        Tridiagonal { lower, diag, upper }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let n = self.len();
        assert_eq!(x.len(), n);
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i] * x[i];
                if i > 0 {
                    acc = acc + self.lower[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    acc = acc + self.upper[i] * x[i + 1];
                }
                acc
            })
            .collect()
    }

    /// Thomas algorithm without pivoting. Suitable for the diagonally
    /// dominant systems produced by implicit radial steps.
    pub fn solve(&self, rhs: &[T]) -> Result<Vec<T>> {
        let n = self.len();
        if rhs.len() != n {
            return Err(Error::LinearSolve(format!(
                "rhs length {} does not match matrix size {n}",
                rhs.len()
            )));
        }
        if n == 0 {
            return Ok(Vec::new());
        }
        let mut c = vec![T::from(0.0); n];
        let mut d = vec![T::from(0.0); n];
        let mut denom = self.diag[0];
        if denom.modulus() == 0.0 {
            return Err(Error::LinearSolve("zero pivot in row 0".into()));
        }
        if n > 1 {
            c[0] = self.upper[0] / denom;
        }
        d[0] = rhs[0] / denom;
        for i in 1..n {
            denom = self.diag[i] - self.lower[i - 1] * c[i - 1];
            if denom.modulus() == 0.0 {
                return Err(Error::LinearSolve(format!("zero pivot in row {i}")));
            }
            if i + 1 < n {
                c[i] = self.upper[i] / denom;
            }
            d[i] = (rhs[i] - self.lower[i - 1] * d[i - 1]) / denom;
        }
        for i in (0..n - 1).rev() {
            d[i] = d[i] - c[i] * d[i + 1];
        }
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolve("non-finite solution".into()));
        }
        Ok(d)
    }
}

/// A tridiagonal matrix reduced by the forward sweep of the Thomas
/// algorithm, for repeated solves with one matrix.
#[derive(Debug, Clone)]
pub struct TridiagonalFactor<T> {
    lower: Vec<T>,
    /// Normalised super-diagonal `c_i`.
    c: Vec<T>,
    inv_pivot: Vec<T>,
}

impl<T: Scalar> Tridiagonal<T> {
    pub fn factorize(&self) -> Result<TridiagonalFactor<T>> {
        let n = self.len();
        let one = T::from(1.0);
        let mut c = vec![T::from(0.0); n];
        let mut inv_pivot = vec![T::from(0.0); n];
        for i in 0..n {
            let denom = if i == 0 {
                self.diag[0]
            } else {
                self.diag[i] - self.lower[i - 1] * c[i - 1]
            };
            if denom.modulus() == 0.0 || !denom.is_finite() {
                return Err(Error::LinearSolve(format!("zero pivot in row {i}")));
            }
            inv_pivot[i] = one / denom;
            if i + 1 < n {
                c[i] = self.upper[i] * inv_pivot[i];
            }
        }
        Ok(TridiagonalFactor {
            lower: self.lower.clone(),
            c,
            inv_pivot,
        })
    }
}

impl<T: Scalar> TridiagonalFactor<T> {
    /// Solves in place.
    pub fn solve_in_place(&self, x: &mut [T]) -> Result<()> {
        let n = self.c.len();
        if x.len() != n {
            return Err(Error::LinearSolve(format!(
                "rhs length {} does not match matrix size {n}",
                x.len()
            )));
        }
        if n == 0 {
            return Ok(());
        }
        x[0] = x[0] * self.inv_pivot[0];
        for i in 1..n {
            x[i] = (x[i] - self.lower[i - 1] * x[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            x[i] = x[i] - self.c[i] * x[i + 1];
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolve("non-finite solution".into()));
        }
        Ok(())
    }
}

impl Tridiagonal<f64> {
    /// `self + shift * I`.
    pub fn shifted(&self, shift: f64) -> Self {
        Tridiagonal {
            lower: self.lower.clone(),
            diag: self.diag.iter().map(|d| d + shift).collect(),
            upper: self.upper.clone(),
        }
    }

    /// `scale * self + I`.
    pub fn scaled_plus_identity(&self, scale: f64) -> Self {
        Tridiagonal {
            lower: self.lower.iter().map(|v| scale * v).collect(),
            diag: self.diag.iter().map(|v| 1.0 + scale * v).collect(),
            upper: self.upper.iter().map(|v| scale * v).collect(),
        }
    }

    pub fn to_complex(&self) -> Tridiagonal<Complex64> {
        let c = |v: &Vec<f64>| v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Tridiagonal {
            lower: c(&self.lower),
            diag: c(&self.diag),
            upper: c(&self.upper),
        }
    }
}

/// Symmetric tridiagonal matrix: `diag` and the shared off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i] * x[i];
                if i > 0 {
                    acc += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    acc += self.off[i] * x[i + 1];
                }
                acc
            })
            .collect()
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0_f64;
        for i in 0..self.len() {
            let b2 = if i > 0 { self.off[i - 1].powi(2) } else { 0.0 };
            q = self.diag[i] - x - if i > 0 { b2 / q } else { 0.0 };
            if q == 0.0 {
                q = -f64::EPSILON * (self.diag[i].abs() + x.abs() + 1.0);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        let scale = lo.abs().max(hi.abs()).max(1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 4.0 * f64::EPSILON * scale {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// Lowest `k` eigenpairs: bisection for the values, then shifted
    /// inverse iteration for unit-norm vectors with a Rayleigh refinement.
    pub fn lowest_eigenpairs(&self, k: usize) -> Result<Vec<(f64, Vec<f64>)>> {
        let n = self.len();
        let k = k.min(n);
        let mut pairs: Vec<(f64, Vec<f64>)> = Vec::with_capacity(k);
        for idx in 0..k {
            let lambda = self.eigenvalue(idx);
            let vec = self.inverse_iteration(lambda, &pairs)?;
            let av = self.matvec(&vec);
            let rq: f64 = av.iter().zip(&vec).map(|(a, b)| a * b).sum();
            pairs.push((rq, vec));
        }
        Ok(pairs)
    }

    fn inverse_iteration(&self, lambda: f64, previous: &[(f64, Vec<f64>)]) -> Result<Vec<f64>> {
        let n = self.len();
        let scale = self.gershgorin().1.abs().max(1.0);
        let shift = lambda - 1e-10 * scale;
        let tri = Tridiagonal::new(
            self.off.clone(),
            self.diag.iter().map(|d| d - shift).collect(),
            self.off.clone(),
        );
        // Deterministic, non-degenerate start vector.
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 101) as f64 / 101.0).collect();
        for _ in 0..8 {
            for (mu, v) in previous {
                if (mu - lambda).abs() < 1e-6 * scale {
                    let dot: f64 = x.iter().zip(v).map(|(a, b)| a * b).sum();
                    x.iter_mut().zip(v).for_each(|(a, b)| *a -= dot * b);
                }
            }
            let y = tri.solve(&x)?;
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !norm.is_finite() || norm == 0.0 {
                return Err(Error::Eigen("inverse iteration breakdown".into()));
            }
            x = y.into_iter().map(|v| v / norm).collect();
        }
        // Fix the sign so the largest-magnitude entry is positive.
        let (imax, _) = x
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
        if x[imax] < 0.0 {
            x.iter_mut().for_each(|v| *v = -*v);
        }
        Ok(x)
    }
}
