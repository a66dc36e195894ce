use num_complex::Complex64;

use crate::geometry::{potential_for_dim, ModelParams, RadialGrid};
use crate::linalg::{SymTridiagonal, Tridiagonal};

/// Finite-volume discretisation of `-u'' - ((d-1)/r) u' + c2(r) u` on a
/// cell-centred grid, `c2 = mu + V_d`.
///
/// Row `i` reads `(1/V_i) [a_{i-1/2}(u_i - u_{i-1}) + a_{i+1/2}(u_i - u_{i+1})]`
/// with shell volume `V_i`, face coefficient `a_j = (j h)^{d-1} / h`,
/// `a_0 = 0` (regularity at the origin) and the ghost `u_n = -u_{n-1}`
/// (Dirichlet at `r_max`). The operator is symmetric in the inner product
/// weighted by `V_i`.
#[derive(Debug, Clone)]
pub struct DiscreteRadialOperator {
    pub grid: RadialGrid,
    pub d: usize,
    /// The kinetic part `A` alone.
    pub kinetic: Tridiagonal<f64>,
    /// `mu + V_d` at the nodes.
    pub potential: Vec<f64>,
    /// Shell volumes `V_i` (without the sphere factor).
    pub volumes: Vec<f64>,
    /// Face coefficients `a_j`, `j = 0..=n`, with `a_0 = 0`.
    pub faces: Vec<f64>,
    pub lambda: f64,
}

pub fn assemble_operator(grid: &RadialGrid, params: &ModelParams) -> DiscreteRadialOperator {
    let n = grid.n;
    let d = params.d;
    let h = grid.h();
    let di = d as i32;
    let volumes: Vec<f64> = (0..n)
        .map(|i| ((i as f64 + 1.0).powi(di) - (i as f64).powi(di)) * h.powi(di) / d as f64)
        .collect();
    let faces: Vec<f64> = (0..=n)
        .map(|j| if j == 0 { 0.0 } else { grid.face(j).powi(di - 1) / h })
        .collect();
    let face = |j: usize| faces[j];
    let mut diag = vec![0.0; n];
    let mut lower = vec![0.0; n - 1];
    let mut upper = vec![0.0; n - 1];
    for i in 0..n {
        let left = if i == 0 { 0.0 } else { face(i) };
        let right = face(i + 1);
        let ghost = if i + 1 == n { 2.0 * right } else { right };
        diag[i] = (left + ghost) / volumes[i];
        if i + 1 < n {
            upper[i] = -right / volumes[i];
            lower[i] = -right / volumes[i + 1];
        }
    }
    let potential = grid
        .nodes()
        .iter()
        .map(|&r| params.mu + potential_for_dim(r, d))
        .collect();
    DiscreteRadialOperator {
        grid: *grid,
        d,
        kinetic: Tridiagonal::new(lower, diag, upper),
        potential,
        volumes,
        faces,
        lambda: params.lambda,
    }
}

impl DiscreteRadialOperator {
    /// `A + c2`, i.e. `H + lambda` in the stationary equation.
    pub fn matrix(&self) -> Tridiagonal<f64> {
        let mut m = self.kinetic.clone();
        m.diag.iter_mut().zip(&self.potential).for_each(|(d, c)| *d += c);
        m
    }

    /// `H = A + (d-1)²/4 + V_d`, independent of `lambda`.
    pub fn hamiltonian(&self) -> Tridiagonal<f64> {
        self.matrix().shifted(-self.lambda)
    }

    /// `A u` in flux form: differences are taken before scaling by
    /// `1/h²`, which keeps the round-off proportional to `u'` rather than
    /// to `u`.
    pub fn apply_kinetic(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        let a = &self.faces;
        (0..n)
            .map(|i| {
                let left = if i == 0 { 0.0 } else { a[i] * (u[i] - u[i - 1]) };
                let right = if i + 1 == n {
                    2.0 * a[n] * u[i]
                } else {
                    a[i + 1] * (u[i] - u[i + 1])
                };
                (left + right) / self.volumes[i]
            })
            .collect()
    }

    /// `(A + c2) u`.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = self.apply_kinetic(u);
        out.iter_mut()
            .zip(&self.potential)
            .zip(u)
            .for_each(|((o, c), x)| *o += c * x);
        out
    }

    /// `H u`.
    pub fn apply_h(&self, u: &[f64]) -> Vec<f64> {
        let mut out = self.apply(u);
        out.iter_mut().zip(u).for_each(|(o, x)| *o -= self.lambda * x);
        out
    }

    /// `H u` for complex samples.
    pub fn apply_h_complex(&self, u: &[Complex64]) -> Vec<Complex64> {
        let re: Vec<f64> = u.iter().map(|z| z.re).collect();
        let im: Vec<f64> = u.iter().map(|z| z.im).collect();
        self.apply_h(&re)
            .into_iter()
            .zip(self.apply_h(&im))
            .map(|(a, b)| Complex64::new(a, b))
            .collect()
    }

    /// `V^{1/2} M V^{-1/2}` for `M = A + diag(shift)`: a symmetric matrix
    /// with the same spectrum.
    pub fn symmetrized(&self, shift: &[f64]) -> SymTridiagonal {
        let n = self.grid.n;
        let diag = (0..n).map(|i| self.kinetic.diag[i] + shift[i]).collect();
        let off = (0..n - 1)
            .map(|i| self.kinetic.upper[i] * (self.volumes[i] / self.volumes[i + 1]).sqrt())
            .collect();
        SymTridiagonal { diag, off }
    }

    /// `max_i |V_i A_{i,i+1} - V_{i+1} A_{i+1,i}| / max|V_i A_ii|`.
    pub fn symmetry_defect(&self) -> f64 {
        let k = &self.kinetic;
        let scale = (0..self.grid.n)
            .map(|i| (self.volumes[i] * k.diag[i]).abs())
            .fold(0.0, f64::max);
        (0..self.grid.n - 1)
            .map(|i| (self.volumes[i] * k.upper[i] - self.volumes[i + 1] * k.lower[i]).abs())
            .fold(0.0, f64::max)
            / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(d: usize, lambda: f64, r_max: f64, n: usize) -> DiscreteRadialOperator {
        assemble_operator(
            &RadialGrid::new(r_max, n).unwrap(),
            &ModelParams::new(d, 1.0, lambda).unwrap(),
        )
    }

    #[test]
    fn weighted_symmetry() {
        for d in 2..=5 {
            assert!(op(d, 1.0, 20.0, 500).symmetry_defect() < 1e-12);
        }
    }

    #[test]
    fn potential_is_effective_potential() {
        let o = op(3, 0.0, 10.0, 100);
        assert!(o.potential.iter().all(|&c| c == 1.0));
        let params = ModelParams::new(2, 1.0, 0.5).unwrap();
        let o = assemble_operator(&RadialGrid::new(10.0, 100).unwrap(), &params);
        for (r, c) in o.grid.nodes().iter().zip(&o.potential) {
            assert_eq!(*c, crate::geometry::effective_potential(*r, &params));
        }
    }

    #[test]
    fn gaussian_second_order() {
        // -Δ e^{-r²} = (2d - 4r²) e^{-r²}.
        let mut errs = Vec::new();
        for n in [200, 400] {
            let o = op(3, 0.0, 8.0, n);
            let r = o.grid.nodes();
            let u: Vec<f64> = r.iter().map(|x| (-x * x).exp()).collect();
            let au = o.apply(&u);
            let err = r
                .iter()
                .zip(&au)
                .map(|(x, a)| (a - (6.0 - 4.0 * x * x + 1.0) * (-x * x).exp()).abs())
                .fold(0.0, f64::max);
            errs.push(err);
        }
        assert!(errs[0] < 1e-2);
        assert!(errs[0] / errs[1] > 3.5, "{errs:?}");
    }

    #[test]
    fn lowest_eigenvalue_above_potential_floor() {
        let o = op(3, 0.0, 20.0, 400);
        let s = o.symmetrized(&o.potential);
        let low = s.eigenvalue(0);
        assert!(low >= 1.0 - 1e-9);
        assert!(low < 1.0 + 0.03);
    }
}
