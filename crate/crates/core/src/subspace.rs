//! Finite-codimension subspaces with a dual representation: an orthonormal
//! basis and the functionals whose common kernel it spans.

use serde::{Deserialize, Serialize};

use crate::linalg::{self, dot};
use crate::space::{Element, SpaceError, SpaceSpec};

/// Tolerance for `φ_i(b) = 0` on basis vectors and for membership checks.
pub const KERNEL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Subspace {
    ambient: SpaceSpec,
    basis: Vec<Vec<f64>>,
    functionals: Vec<Vec<f64>>,
}

impl Subspace {
    /// The common kernel of `functionals`, given as coefficient vectors over the
    /// flat coordinates of `space`. Rank-deficient lists are fine.
    pub fn from_kernel(space: &SpaceSpec, functionals: Vec<Vec<f64>>) -> Result<Self, SpaceError> {
        if matches!(space, SpaceSpec::Schatten { .. }) {
            return Err(SpaceError::Unsupported("kernel subspaces need a coordinate space"));
        }
        let n = space.dimension();
        for f in &functionals {
            if f.len() != n {
                return Err(SpaceError::FunctionalLength { expected: n, found: f.len() });
            }
            if let Some(i) = f.iter().position(|v| !v.is_finite()) {
                return Err(SpaceError::NonFinite(i));
            }
        }
        let basis = linalg::kernel_basis(&functionals, n);
        Ok(Subspace { ambient: space.clone(), basis, functionals })
    }

    /// Whole space (no functionals).
    pub fn full(space: &SpaceSpec) -> Result<Self, SpaceError> {
        Self::from_kernel(space, Vec::new())
    }

    /// The span of `vectors`; its functionals are an orthonormal basis of the
    /// orthogonal complement.
    pub fn span(space: &SpaceSpec, vectors: &[Vec<f64>]) -> Result<Self, SpaceError> {
        let n = space.dimension();
        for v in vectors {
            if v.len() != n {
                return Err(SpaceError::FunctionalLength { expected: n, found: v.len() });
            }
        }
        let complement = linalg::kernel_basis(vectors, n);
        Self::from_kernel(space, complement)
    }

    /// Span of the coordinate vectors with the given flat indices.
    pub fn coordinate_span(space: &SpaceSpec, indices: &[usize]) -> Result<Self, SpaceError> {
        let n = space.dimension();
        let mut keep = vec![false; n];
        for &i in indices {
            if i >= n {
                return Err(SpaceError::IndexOutOfRange { index: i, len: n });
            }
            keep[i] = true;
        }
        let functionals = (0..n).filter(|&i| !keep[i]).map(|i| unit(n, i)).collect();
        Self::from_kernel(space, functionals)
    }

    /// `A ∩ B`: the kernel of the union of both functional lists.
    pub fn intersect(&self, other: &Subspace) -> Result<Subspace, SpaceError> {
        if self.ambient != other.ambient {
            return Err(SpaceError::Unsupported("intersection of subspaces of different spaces"));
        }
        let mut functionals = self.functionals.clone();
        functionals.extend(other.functionals.iter().cloned());
        Self::from_kernel(&self.ambient, functionals)
    }

    /// This subspace cut by one more functional.
    pub fn with_functional(&self, functional: Vec<f64>) -> Result<Subspace, SpaceError> {
        let mut functionals = self.functionals.clone();
        functionals.push(functional);
        Self::from_kernel(&self.ambient, functionals)
    }

    pub fn ambient(&self) -> &SpaceSpec {
        &self.ambient
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn functionals(&self) -> &[Vec<f64>] {
        &self.functionals
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// `N - dim`, equal to the rank of the functional list.
    pub fn codim(&self) -> usize {
        self.ambient.dimension() - self.basis.len()
    }

    /// Basis vector `j` as an element of the ambient space.
    pub fn basis_element(&self, j: usize) -> Element {
        Element::from_flat(self.ambient.shape(), self.basis[j].clone())
    }

    /// `Σ_j z_j b_j`.
    pub fn combine(&self, z: &[f64]) -> Element {
        let mut out = vec![0.0; self.ambient.dimension()];
        for (zj, b) in z.iter().zip(&self.basis) {
            if *zj != 0.0 {
                for (o, bi) in out.iter_mut().zip(b) {
                    *o += zj * bi;
                }
            }
        }
        Element::from_flat(self.ambient.shape(), out)
    }

    /// Basis coordinates of the Euclidean projection of `u` onto the subspace.
    pub fn coordinates(&self, u: &Element) -> Vec<f64> {
        self.basis.iter().map(|b| dot(b, u.as_slice())).collect()
    }

    /// `|φ_i(u)| ≤ tol · max(1, ‖φ_i‖)` for every functional.
    pub fn contains(&self, u: &Element, tol: f64) -> bool {
        u.shape() == self.ambient.shape()
            && self.functionals.iter().all(|f| {
                let scale = dot(f, f).sqrt().max(1.0);
                dot(f, u.as_slice()).abs() <= tol * scale
            })
    }

    /// Checks the dual-representation invariants.
    pub fn verify(&self) -> Result<(), SpaceError> {
        let defect = linalg::orthonormality_defect(&self.basis);
        if defect > KERNEL_TOL {
            return Err(SpaceError::NotOrthonormal(defect));
        }
        for b in &self.basis {
            if !self.contains(&Element::from_flat(self.ambient.shape(), b.clone()), KERNEL_TOL) {
                return Err(SpaceError::NotOrthonormal(f64::NAN));
            }
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SubspaceRepr {
    ambient: SpaceSpec,
    #[allow(dead_code)]
    #[serde(default)]
    basis: Vec<Vec<f64>>,
    functionals: Vec<Vec<f64>>,
}

impl<'de> Deserialize<'de> for Subspace {
    /// The basis is recomputed from the functionals, so a deserialized subspace
    /// always satisfies its invariants.
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = SubspaceRepr::deserialize(deserializer)?;
        Subspace::from_kernel(&repr.ambient, repr.functionals).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}
