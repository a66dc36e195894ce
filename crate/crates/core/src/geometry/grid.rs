use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Scalar;

use super::GeometryTables;

/// Uniform cell-centred radial grid on `(0, r_max)`.
///
/// Node `i` sits at `(i + 1/2) h` with `h = r_max / n`, the centre of the
/// shell `[i h, (i + 1) h]`. The origin is a cell face, so the reflection
/// `u_{-1} = u_0` imposes `u'(0) = 0`; the face at `r_max` carries the
/// Dirichlet condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub r_max: f64,
    pub n: usize,
}

impl RadialGrid {
    pub fn new(r_max: f64, n: usize) -> Result<Self> {
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(Error::invalid(
                "r_max",
                format!("must be positive and finite, got {r_max}"),
            ));
        }
        if n < 8 {
            return Err(Error::invalid("n", format!("need at least 8 nodes, got {n}")));
        }
        Ok(RadialGrid { r_max, n })
    }

    /// Grid with spacing close to `h` on `(0, r_max)`.
    pub fn with_spacing(r_max: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::invalid("h", format!("must be positive, got {h}")));
        }
        RadialGrid::new(r_max, (r_max / h).round().max(8.0) as usize)
    }

    pub fn h(&self) -> f64 {
        self.r_max / self.n as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// Cell face `j h`, `j = 0..=n`.
    pub fn face(&self, j: usize) -> f64 {
        j as f64 * self.h()
    }

    /// Same extent, spacing halved.
    pub fn refined(&self) -> Self {
        RadialGrid {
            r_max: self.r_max,
            n: 2 * self.n,
        }
    }
}

/// Which Jacobian weights a field's norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceTag {
    /// `sinh^{d-1} r dr dω`.
    Hyperbolic,
    /// `r^{d-1} dr dω`.
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    ToEuclidean,
    ToHyperbolic,
}

/// Samples of a radial function on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialField<T = f64> {
    pub grid: RadialGrid,
    pub values: Vec<T>,
    pub tag: SpaceTag,
}

impl<T: Scalar> RadialField<T> {
    pub fn new(grid: RadialGrid, values: Vec<T>, tag: SpaceTag) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::Misuse(format!(
                "{} samples for a grid of {} nodes",
                values.len(),
                grid.n
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Misuse(format!("non-finite sample at node {i}")));
        }
        Ok(RadialField { grid, values, tag })
    }

    pub fn from_fn(grid: RadialGrid, tag: SpaceTag, f: impl Fn(f64) -> T) -> Self {
        let values = grid.nodes().into_iter().map(f).collect();
        RadialField { grid, values, tag }
    }

    pub fn zeros(grid: RadialGrid, tag: SpaceTag) -> Self {
        RadialField {
            grid,
            values: vec![T::from(0.0); grid.n],
            tag,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.modulus()))
    }
}

impl RadialField<f64> {
    pub fn to_complex(&self) -> RadialField<num_complex::Complex64> {
        RadialField {
            grid: self.grid,
            values: self.values.iter().map(|&v| v.into()).collect(),
            tag: self.tag,
        }
    }
}

/// Multiplies by `phi` (to hyperbolic) or `1/phi` (to Euclidean) and retags.
pub fn conjugate<T: Scalar>(
    field: &RadialField<T>,
    direction: Direction,
    tables: &GeometryTables,
) -> Result<RadialField<T>> {
    if field.grid != tables.grid {
        return Err(Error::Misuse("field and tables live on different grids".into()));
    }
    let (from, to) = match direction {
        Direction::ToHyperbolic => (SpaceTag::Euclidean, SpaceTag::Hyperbolic),
        Direction::ToEuclidean => (SpaceTag::Hyperbolic, SpaceTag::Euclidean),
    };
    if field.tag != from {
        return Err(Error::Misuse(format!(
            "cannot map a {:?} field {:?}",
            field.tag, direction
        )));
    }
    let values = field
        .values
        .iter()
        .zip(&tables.phi)
        .map(|(&v, &phi)| match direction {
            Direction::ToHyperbolic => v * T::from(phi),
            Direction::ToEuclidean => v / T::from(phi),
        })
        .collect();
    Ok(RadialField {
        grid: field.grid,
        values,
        tag: to,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldNorms {
    pub l2: f64,
    /// `(∫ |∂_r u|²)^{1/2}` in the tagged measure.
    pub h1_seminorm: f64,
    /// `(∫ |u|^{p+2})^{1/(p+2)}` in the tagged measure.
    pub lp2: f64,
}

/// Norms of `field` in the measure named by its tag. Cell integrals use the
/// exact shell volumes; the gradient lives on cell faces, with the
/// Dirichlet ghost `u_n = -u_{n-1}` at `r_max`.
pub fn norms<T: Scalar>(field: &RadialField<T>, tables: &GeometryTables) -> Result<FieldNorms> {
    if field.grid != tables.grid {
        return Err(Error::Misuse("field and tables live on different grids".into()));
    }
    let w = tables.weights(field.tag);
    let faces = tables.face_weights(field.tag);
    let q = tables.params.p + 2.0;
    let mut l2 = 0.0;
    let mut lp = 0.0;
    for (v, wi) in field.values.iter().zip(w) {
        let m = v.modulus();
        l2 += wi * m * m;
        lp += wi * m.powf(q);
    }
    Ok(FieldNorms {
        l2: l2.sqrt(),
        h1_seminorm: dirichlet_form(&field.values, faces).sqrt(),
        lp2: lp.powf(1.0 / q),
    })
}

/// `Σ_faces c_j |u_j - u_{j-1}|²`; the last face sees the wall at distance
/// `h/2`, contributing `2 c_n |u_{n-1}|²`.
/// `faces[j]` is the coefficient of face `j` (`faces[0]`, the origin, is
/// never used).
pub(crate) fn dirichlet_form<T: Scalar>(u: &[T], faces: &[f64]) -> f64 {
    let n = u.len();
    let mut acc = 0.0;
    for j in 1..n {
        let m = (u[j] - u[j - 1]).modulus();
        acc += faces[j] * m * m;
    }
    let m = u[n - 1].modulus();
    acc + faces[n] * 2.0 * m * m
}
