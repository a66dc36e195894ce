use std::io::Write;

use serde::Serialize;

use crate::error::Result;

use super::{
    eval_offset, eval_v_tilde, ln_r_over_sinh, potential_for_dim, sphere_area, ModelParams, RadialGrid, SpaceTag,
};

/// Samples of every conjugation quantity on one grid, plus the quadrature
/// weights shared by all functionals.
#[derive(Debug, Clone, Serialize)]
pub struct GeometryTables {
    pub grid: RadialGrid,
    pub params: ModelParams,
    pub r: Vec<f64>,
    pub phi: Vec<f64>,
    pub v_d: Vec<f64>,
    pub v_tilde: Vec<f64>,
    pub k_tilde: Vec<f64>,
    pub k_big: Vec<f64>,
    pub jac_hyp: Vec<f64>,
    pub jac_euc: Vec<f64>,
    pub c2: Vec<f64>,
    pub offset_a: Vec<f64>,
    /// `|S^{d-1}|` times the Euclidean volume of shell `i`.
    pub weights_euc: Vec<f64>,
    /// `weights_euc / phi²`, so that `phi` is an exact isometry of the
    /// discrete weighted spaces.
    pub weights_hyp: Vec<f64>,
    /// `|S^{d-1}| f^{d-1} / h` at faces `f = j h`, `j = 0..=n`.
    pub faces_euc: Vec<f64>,
    /// `|S^{d-1}| sinh^{d-1}(f) / h` at faces.
    pub faces_hyp: Vec<f64>,
}

impl GeometryTables {
    pub fn new(grid: RadialGrid, params: ModelParams) -> Self {
        let d = params.d;
        let dm1 = d as f64 - 1.0;
        let h = grid.h();
        let area = sphere_area(d);
        let r = grid.nodes();
        let ln_ratio: Vec<f64> = r.iter().map(|&x| ln_r_over_sinh(x)).collect();
        let phi: Vec<f64> = ln_ratio.iter().map(|l| (0.5 * dm1 * l).exp()).collect();
        let v_tilde: Vec<f64> = r.iter().map(|&x| eval_v_tilde(x)).collect();
        let v_d: Vec<f64> = r.iter().map(|&x| potential_for_dim(x, d)).collect();
        let k_tilde: Vec<f64> = ln_ratio.iter().map(|l| (0.5 * params.p * dm1 * l).exp()).collect();
        let k_big = k_tilde.iter().map(|k| k / (params.p + 2.0)).collect();
        let jac_euc: Vec<f64> = r.iter().map(|&x| x.powi(d as i32 - 1)).collect();
        let jac_hyp = r.iter().map(|&x| x.sinh().powi(d as i32 - 1)).collect();
        let c2 = v_d.iter().map(|v| params.mu + v).collect();
        let offset_a = r.iter().map(|&x| eval_offset(x)).collect();
        let df = d as f64;
        let weights_euc: Vec<f64> = (0..grid.n)
            .map(|i| {
                let (a, b) = (i as f64, i as f64 + 1.0);
                area * (b.powi(d as i32) - a.powi(d as i32)) * h.powi(d as i32) / df
            })
            .collect();
        let weights_hyp = weights_euc
            .iter()
            .zip(&ln_ratio)
            .map(|(w, l)| w * (-dm1 * l).exp())
            .collect();
        let faces_euc = (0..=grid.n)
            .map(|j| area * grid.face(j).powi(d as i32 - 1) / h)
            .collect();
        let faces_hyp = (0..=grid.n)
            .map(|j| area * grid.face(j).sinh().powi(d as i32 - 1) / h)
            .collect();
        GeometryTables {
            grid,
            params,
            r,
            phi,
            v_d,
            v_tilde,
            k_tilde,
            k_big,
            jac_hyp,
            jac_euc,
            c2,
            offset_a,
            weights_euc,
            weights_hyp,
            faces_euc,
            faces_hyp,
        }
    }

    pub fn weights(&self, tag: SpaceTag) -> &[f64] {
        match tag {
            SpaceTag::Euclidean => &self.weights_euc,
            SpaceTag::Hyperbolic => &self.weights_hyp,
        }
    }

    pub fn face_weights(&self, tag: SpaceTag) -> &[f64] {
        match tag {
            SpaceTag::Euclidean => &self.faces_euc,
            SpaceTag::Hyperbolic => &self.faces_hyp,
        }
    }

    /// `Σ w_i u_i v_i` in the Euclidean measure.
    pub fn dot(&self, u: &[f64], v: &[f64]) -> f64 {
        self.weights_euc.iter().zip(u).zip(v).map(|((w, a), b)| w * a * b).sum()
    }

    /// Weighted L² norm in the Euclidean measure.
    pub fn norm(&self, u: &[f64]) -> f64 {
        self.dot(u, u).sqrt()
    }

    /// Writes `r, phi, v_d, v_tilde, k_tilde, c2, jac_hyp, jac_euc, offset_a`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# d={} p={} lambda={} mu={}",
            self.params.d, self.params.p, self.params.lambda, self.params.mu
        )?;
        writeln!(out, "# r_max={} n={}", self.grid.r_max, self.grid.n)?;
        writeln!(out, "r,phi,v_d,v_tilde,k_tilde,c2,jac_hyp,jac_euc,offset_a")?;
        for i in 0..self.grid.n {
            writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                self.r[i],
                self.phi[i],
                self.v_d[i],
                self.v_tilde[i],
                self.k_tilde[i],
                self.c2[i],
                self.jac_hyp[i],
                self.jac_euc[i],
                self.offset_a[i]
            )?;
        }
        Ok(())
    }
}
