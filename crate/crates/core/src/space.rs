//! Finite surrogate normed spaces: weighted `ℓ_p`, Schatten classes and
//! Bochner arrays, together with their elements, norms and norm gradients.

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("exponent p = {0} must be a finite real >= 1")]
    InvalidExponent(f64),
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("weight {index} = {value} is not strictly positive and finite")]
    InvalidWeight { index: usize, value: f64 },
    #[error("shape mismatch: space expects {expected}, element has {found}")]
    ShapeMismatch { expected: Shape, found: Shape },
    #[error("element has a non-finite entry at flat index {0}")]
    NonFinite(usize),
    #[error("index {index} out of range for {len} atoms")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("operation not supported for this space: {0}")]
    Unsupported(&'static str),
    #[error("basis is not orthonormal (deviation {0:e})")]
    NotOrthonormal(f64),
    #[error("functional has length {found}, expected {expected}")]
    FunctionalLength { expected: usize, found: usize },
}

/// Array shape of an [`Element`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Vector(usize),
    Matrix { rows: usize, cols: usize },
}

impl Shape {
    pub fn len(&self) -> usize {
        match *self {
            Shape::Vector(n) => n,
            Shape::Matrix { rows, cols } => rows * cols,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Shape::Vector(n) => write!(f, "vector[{n}]"),
            Shape::Matrix { rows, cols } => write!(f, "matrix[{rows}x{cols}]"),
        }
    }
}

/// Inner `ℓ_q^M` space of a Bochner surrogate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InnerSpec {
    pub p: f64,
    pub dim: usize,
}

/// A finite surrogate normed space.
///
/// Coordinate spaces (`EllP`, `WeightedLp`) hold vectors; `Schatten` holds
/// `rows x cols` matrices normed by the `ℓ_p` norm of their singular values;
/// `Bochner` holds `N x M` arrays whose row `ω` is a point of the inner
/// `ℓ_q^M`, normed by the weighted outer `ℓ_p` norm of the row norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceRepr", into = "SpaceRepr")]
pub enum SpaceSpec {
    EllP { p: f64, dim: usize },
    WeightedLp { p: f64, weights: Vec<f64> },
    Schatten { p: f64, rows: usize, cols: usize },
    Bochner { p: f64, weights: Vec<f64>, inner: InnerSpec },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
enum SpaceRepr {
    EllP { p: f64, dim: usize },
    WeightedLp { p: f64, weights: Vec<f64> },
    Schatten { p: f64, rows: usize, cols: usize },
    Bochner { p: f64, weights: Vec<f64>, inner: InnerSpec },
}

impl TryFrom<SpaceRepr> for SpaceSpec {
    type Error = SpaceError;

    fn try_from(repr: SpaceRepr) -> Result<Self, SpaceError> {
        let space = match repr {
            SpaceRepr::EllP { p, dim } => SpaceSpec::EllP { p, dim },
            SpaceRepr::WeightedLp { p, weights } => SpaceSpec::WeightedLp { p, weights },
            SpaceRepr::Schatten { p, rows, cols } => SpaceSpec::Schatten { p, rows, cols },
            SpaceRepr::Bochner { p, weights, inner } => SpaceSpec::Bochner { p, weights, inner },
        };
        space.validate()?;
        Ok(space)
    }
}

impl From<SpaceSpec> for SpaceRepr {
    fn from(space: SpaceSpec) -> Self {
        match space {
            SpaceSpec::EllP { p, dim } => SpaceRepr::EllP { p, dim },
            SpaceSpec::WeightedLp { p, weights } => SpaceRepr::WeightedLp { p, weights },
            SpaceSpec::Schatten { p, rows, cols } => SpaceRepr::Schatten { p, rows, cols },
            SpaceSpec::Bochner { p, weights, inner } => SpaceRepr::Bochner { p, weights, inner },
        }
    }
}

fn check_exponent(p: f64) -> Result<(), SpaceError> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(SpaceError::InvalidExponent(p))
    }
}

fn check_weights(weights: &[f64]) -> Result<(), SpaceError> {
    if weights.is_empty() {
        return Err(SpaceError::ZeroDimension);
    }
    for (index, &value) in weights.iter().enumerate() {
        if !(value.is_finite() && value > 0.0) {
            return Err(SpaceError::InvalidWeight { index, value });
        }
    }
    Ok(())
}

impl SpaceSpec {
    pub fn ell_p(p: f64, dim: usize) -> Result<Self, SpaceError> {
        let s = SpaceSpec::EllP { p, dim };
        s.validate()?;
        Ok(s)
    }

    pub fn weighted_lp(p: f64, weights: Vec<f64>) -> Result<Self, SpaceError> {
        let s = SpaceSpec::WeightedLp { p, weights };
        s.validate()?;
        Ok(s)
    }

    pub fn schatten(p: f64, rows: usize, cols: usize) -> Result<Self, SpaceError> {
        let s = SpaceSpec::Schatten { p, rows, cols };
        s.validate()?;
        Ok(s)
    }

    pub fn bochner(p: f64, weights: Vec<f64>, q: f64, inner_dim: usize) -> Result<Self, SpaceError> {
        let s = SpaceSpec::Bochner { p, weights, inner: InnerSpec { p: q, dim: inner_dim } };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SpaceError> {
        check_exponent(self.p())?;
        match self {
            SpaceSpec::EllP { dim, .. } => {
                if *dim == 0 {
                    return Err(SpaceError::ZeroDimension);
                }
            }
            SpaceSpec::WeightedLp { weights, .. } => check_weights(weights)?,
            SpaceSpec::Schatten { rows, cols, .. } => {
                if *rows == 0 || *cols == 0 {
                    return Err(SpaceError::ZeroDimension);
                }
            }
            SpaceSpec::Bochner { weights, inner, .. } => {
                check_weights(weights)?;
                check_exponent(inner.p)?;
                if inner.dim == 0 {
                    return Err(SpaceError::ZeroDimension);
                }
            }
        }
        Ok(())
    }

    /// Outer exponent `p`.
    pub fn p(&self) -> f64 {
        match self {
            SpaceSpec::EllP { p, .. }
            | SpaceSpec::WeightedLp { p, .. }
            | SpaceSpec::Schatten { p, .. }
            | SpaceSpec::Bochner { p, .. } => *p,
        }
    }

    pub fn shape(&self) -> Shape {
        match self {
            SpaceSpec::EllP { dim, .. } => Shape::Vector(*dim),
            SpaceSpec::WeightedLp { weights, .. } => Shape::Vector(weights.len()),
            SpaceSpec::Schatten { rows, cols, .. } => Shape::Matrix { rows: *rows, cols: *cols },
            SpaceSpec::Bochner { weights, inner, .. } => Shape::Matrix { rows: weights.len(), cols: inner.dim },
        }
    }

    /// Real dimension of the space (number of scalar coordinates).
    pub fn dimension(&self) -> usize {
        self.shape().len()
    }

    /// Number of measure atoms, i.e. the index range of coordinate blocks.
    /// `None` for Schatten spaces, which have no atoms.
    pub fn atoms(&self) -> Option<usize> {
        match self {
            SpaceSpec::EllP { dim, .. } => Some(*dim),
            SpaceSpec::WeightedLp { weights, .. } | SpaceSpec::Bochner { weights, .. } => Some(weights.len()),
            SpaceSpec::Schatten { .. } => None,
        }
    }

    /// Measure of atom `i` (1 for `EllP`).
    pub fn weight(&self, i: usize) -> f64 {
        match self {
            SpaceSpec::WeightedLp { weights, .. } | SpaceSpec::Bochner { weights, .. } => weights[i],
            _ => 1.0,
        }
    }

    /// Flat entries per atom (1 for scalar spaces, `M` for Bochner).
    pub fn atom_width(&self) -> usize {
        match self {
            SpaceSpec::Bochner { inner, .. } => inner.dim,
            _ => 1,
        }
    }

    /// True when the norm is exactly the Euclidean norm of the flat coordinates.
    pub fn is_euclidean(&self) -> bool {
        match self {
            SpaceSpec::EllP { p, .. } | SpaceSpec::Schatten { p, .. } => *p == 2.0,
            SpaceSpec::WeightedLp { p, weights } => *p == 2.0 && weights.iter().all(|&w| w == 1.0),
            SpaceSpec::Bochner { p, weights, inner } => {
                *p == 2.0 && inner.p == 2.0 && weights.iter().all(|&w| w == 1.0)
            }
        }
    }

    /// True for `EllP` and `WeightedLp`.
    pub fn is_scalar_lp(&self) -> bool {
        matches!(self, SpaceSpec::EllP { .. } | SpaceSpec::WeightedLp { .. })
    }

    pub fn zeros(&self) -> Element {
        Element::zeros(self.shape())
    }

    /// Element with a single 1 at flat index `i`.
    pub fn unit(&self, i: usize) -> Element {
        let mut e = self.zeros();
        e.data[i] = 1.0;
        e
    }

    pub fn check(&self, f: &Element) -> Result<(), SpaceError> {
        if f.shape != self.shape() {
            return Err(SpaceError::ShapeMismatch { expected: self.shape(), found: f.shape });
        }
        if let Some(i) = f.data.iter().position(|v| !v.is_finite()) {
            return Err(SpaceError::NonFinite(i));
        }
        Ok(())
    }

    /// The norm of `f`.
    pub fn norm(&self, f: &Element) -> Result<f64, SpaceError> {
        self.check(f)?;
        Ok(self.norm_unchecked(f))
    }

    /// Norm without shape or finiteness validation.
    pub fn norm_unchecked(&self, f: &Element) -> f64 {
        match self {
            SpaceSpec::EllP { p, .. } => weighted_lp(*p, f.data.iter().map(|&v| (1.0, v))),
            SpaceSpec::WeightedLp { p, weights } => {
                weighted_lp(*p, weights.iter().copied().zip(f.data.iter().copied()))
            }
            SpaceSpec::Schatten { p, .. } => {
                let s = singular_values(f);
                weighted_lp(*p, s.iter().map(|&v| (1.0, v)))
            }
            SpaceSpec::Bochner { p, weights, inner } => {
                let rows = f.data.chunks(inner.dim).map(|row| inner_norm(inner.p, row));
                weighted_lp(*p, weights.iter().copied().zip(rows))
            }
        }
    }

    /// `‖f‖^p`, summed atom by atom without taking the root.
    pub fn mass(&self, f: &Element) -> Result<f64, SpaceError> {
        self.check(f)?;
        let p = self.p();
        Ok(match self {
            SpaceSpec::EllP { .. } | SpaceSpec::WeightedLp { .. } => {
                (0..f.len()).map(|i| self.weight(i) * f.data[i].abs().powf(p)).sum()
            }
            SpaceSpec::Schatten { .. } => singular_values(f).iter().map(|s| s.powf(p)).sum(),
            SpaceSpec::Bochner { weights, inner, .. } => weights
                .iter()
                .zip(f.data.chunks(inner.dim))
                .map(|(w, row)| w * inner_norm(inner.p, row).powf(p))
                .sum(),
        })
    }

    /// A subgradient of the norm at `f` (zero at the origin).
    pub fn norm_gradient(&self, f: &Element) -> Element {
        let mut g = Element::zeros(f.shape);
        let p = self.p();
        match self {
            SpaceSpec::EllP { .. } | SpaceSpec::WeightedLp { .. } => {
                let n = self.norm_unchecked(f);
                if n == 0.0 {
                    return g;
                }
                for (i, (gi, &fi)) in g.data.iter_mut().zip(&f.data).enumerate() {
                    *gi = self.weight(i) * lp_derivative(p, fi, n);
                }
            }
            SpaceSpec::Schatten { .. } => {
                let m = f.to_matrix();
                let svd = m.svd(true, true);
                let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
                let n = weighted_lp(p, svd.singular_values.iter().map(|&s| (1.0, s)));
                if n == 0.0 {
                    return g;
                }
                let scaled: Vec<f64> = svd.singular_values.iter().map(|&s| lp_derivative(p, s, n)).collect();
                let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(scaled));
                g = Element::from_matrix(&(u * d * vt));
            }
            SpaceSpec::Bochner { weights, inner, .. } => {
                let row_norms: Vec<f64> = f.data.chunks(inner.dim).map(|r| inner_norm(inner.p, r)).collect();
                let n = weighted_lp(p, weights.iter().copied().zip(row_norms.iter().copied()));
                if n == 0.0 {
                    return g;
                }
                for (w, ((grow, frow), &rn)) in weights
                    .iter()
                    .zip(g.data.chunks_mut(inner.dim).zip(f.data.chunks(inner.dim)).zip(&row_norms))
                {
                    if rn == 0.0 {
                        continue;
                    }
                    let outer = w * lp_derivative(p, rn, n);
                    for (gi, &fi) in grow.iter_mut().zip(frow) {
                        *gi = outer * lp_derivative(inner.p, fi, rn);
                    }
                }
            }
        }
        g
    }
}

/// `∂/∂v (Σ|v|^p)^{1/p}` for one coordinate, given the total norm.
fn lp_derivative(p: f64, v: f64, norm: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else if p == 1.0 {
        v.signum()
    } else {
        v.signum() * (v.abs() / norm).powf(p - 1.0)
    }
}

fn inner_norm(q: f64, row: &[f64]) -> f64 {
    weighted_lp(q, row.iter().map(|&v| (1.0, v)))
}

/// `(Σ μ_i |v_i|^p)^{1/p}`, scaled by the largest entry against overflow.
fn weighted_lp(p: f64, terms: impl Iterator<Item = (f64, f64)> + Clone) -> f64 {
    let scale = terms.clone().fold(0.0_f64, |m, (_, v)| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    if p == 1.0 {
        return terms.map(|(w, v)| w * v.abs()).sum();
    }
    let sum: f64 = if p == 2.0 {
        terms.map(|(w, v)| w * (v / scale) * (v / scale)).sum()
    } else {
        terms.map(|(w, v)| w * (v.abs() / scale).powf(p)).sum()
    };
    if p == 2.0 {
        scale * sum.sqrt()
    } else {
        scale * sum.powf(1.0 / p)
    }
}

/// Singular values of a matrix element.
pub fn singular_values(f: &Element) -> Vec<f64> {
    f.to_matrix().singular_values().iter().copied().collect()
}

/// A point of a surrogate space: dense real coordinates, row-major for matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    shape: Shape,
    data: Vec<f64>,
}

impl Element {
    pub fn zeros(shape: Shape) -> Self {
        Element { shape, data: vec![0.0; shape.len()] }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Element { shape: Shape::Vector(data.len()), data }
    }

    /// Row-major matrix element. Panics if `data.len() != rows * cols`.
    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Element { shape: Shape::Matrix { rows, cols }, data }
    }

    /// Element of the given shape built from flat row-major data.
    pub fn from_flat(shape: Shape, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), shape.len(), "flat data length");
        Element { shape, data }
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let (rows, cols) = m.shape();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(m[(i, j)]);
            }
        }
        Element::matrix(rows, cols, data)
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        match self.shape {
            Shape::Vector(n) => DMatrix::from_row_slice(n, 1, &self.data),
            Shape::Matrix { rows, cols } => DMatrix::from_row_slice(rows, cols, &self.data),
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// Euclidean (Frobenius) inner product of the flat coordinates.
    pub fn dot(&self, other: &Element) -> f64 {
        debug_assert_eq!(self.shape, other.shape);
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn euclidean_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scaled(&self, s: f64) -> Element {
        Element { shape: self.shape, data: self.data.iter().map(|v| v * s).collect() }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Element) -> Element {
        debug_assert_eq!(self.shape, other.shape);
        Element {
            shape: self.shape,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + s * b).collect(),
        }
    }

    pub fn add(&self, other: &Element) -> Element {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Element) -> Element {
        self.axpy(-1.0, other)
    }
}

impl Serialize for Element {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self.shape {
            Shape::Vector(_) => self.data.serialize(serializer),
            Shape::Matrix { cols, .. } => {
                let rows: Vec<&[f64]> = self.data.chunks(cols).collect();
                rows.serialize(serializer)
            }
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ElementRepr {
    Vector(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

impl<'de> Deserialize<'de> for Element {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        match ElementRepr::deserialize(deserializer)? {
            ElementRepr::Vector(v) => Ok(Element::vector(v)),
            ElementRepr::Matrix(rows) => {
                let cols = rows.first().map_or(0, Vec::len);
                if cols == 0 || rows.iter().any(|r| r.len() != cols) {
                    return Err(serde::de::Error::custom("ragged or empty matrix element"));
                }
                let n = rows.len();
                Ok(Element::matrix(n, cols, rows.into_iter().flatten().collect()))
            }
        }
    }
}
