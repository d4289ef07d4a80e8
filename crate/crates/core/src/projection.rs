//! Contractive block projections: `f ↦ f·1_E` for a set of atoms `E`, or the
//! Euclidean orthogonal projection onto the span of an orthonormal family.

use crate::linalg::{self, dot};
use crate::space::{Element, SpaceError, SpaceSpec};
use crate::subspace::Subspace;

#[derive(Debug, Clone, PartialEq)]
pub enum BlockKind {
    /// Sorted, deduplicated atom indices.
    Coordinates(Vec<usize>),
    /// Euclidean-orthonormal vectors over the flat coordinates.
    Orthogonal(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockProjection {
    ambient: SpaceSpec,
    kind: BlockKind,
}

impl BlockProjection {
    /// `P f = f·1_E`. For Bochner spaces the atoms are rows, so whole rows are kept.
    pub fn coordinates(ambient: &SpaceSpec, mut block: Vec<usize>) -> Result<Self, SpaceError> {
        let atoms = ambient
            .atoms()
            .ok_or(SpaceError::Unsupported("coordinate blocks need an atomic space"))?;
        block.sort_unstable();
        block.dedup();
        if let Some(&index) = block.iter().find(|&&i| i >= atoms) {
            return Err(SpaceError::IndexOutOfRange { index, len: atoms });
        }
        Ok(BlockProjection { ambient: ambient.clone(), kind: BlockKind::Coordinates(block) })
    }

    /// Orthogonal projection onto `span(basis)`; only contractive for Euclidean norms.
    pub fn orthogonal(ambient: &SpaceSpec, basis: Vec<Vec<f64>>) -> Result<Self, SpaceError> {
        if !ambient.is_euclidean() {
            return Err(SpaceError::Unsupported("orthogonal blocks need a Euclidean ambient norm"));
        }
        let n = ambient.dimension();
        for b in &basis {
            if b.len() != n {
                return Err(SpaceError::FunctionalLength { expected: n, found: b.len() });
            }
        }
        let defect = linalg::orthonormality_defect(&basis);
        if defect > 1e-10 {
            return Err(SpaceError::NotOrthonormal(defect));
        }
        Ok(BlockProjection { ambient: ambient.clone(), kind: BlockKind::Orthogonal(basis) })
    }

    pub fn ambient(&self) -> &SpaceSpec {
        &self.ambient
    }

    pub fn kind(&self) -> &BlockKind {
        &self.kind
    }

    /// Atom indices for coordinate blocks.
    pub fn block(&self) -> Option<&[usize]> {
        match &self.kind {
            BlockKind::Coordinates(b) => Some(b),
            BlockKind::Orthogonal(_) => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.kind {
            BlockKind::Coordinates(b) => b.is_empty(),
            BlockKind::Orthogonal(b) => b.is_empty(),
        }
    }

    /// Flat coordinate indices kept by a coordinate block.
    pub fn flat_indices(&self) -> Option<Vec<usize>> {
        let w = self.ambient.atom_width();
        self.block().map(|b| b.iter().flat_map(|&i| i * w..(i + 1) * w).collect())
    }

    pub fn project(&self, f: &Element) -> Result<Element, SpaceError> {
        self.ambient.check(f)?;
        Ok(self.project_unchecked(f))
    }

    pub(crate) fn project_unchecked(&self, f: &Element) -> Element {
        let mut out = Element::zeros(f.shape());
        match &self.kind {
            BlockKind::Coordinates(_) => {
                let src = f.as_slice();
                let dst = out.as_mut_slice();
                for i in self.flat_indices().unwrap() {
                    dst[i] = src[i];
                }
            }
            BlockKind::Orthogonal(basis) => {
                let dst = out.as_mut_slice();
                for b in basis {
                    let c = dot(b, f.as_slice());
                    for (o, bi) in dst.iter_mut().zip(b) {
                        *o += c * bi;
                    }
                }
            }
        }
        out
    }

    /// The range of the projection as a subspace.
    pub fn range(&self) -> Result<Subspace, SpaceError> {
        match &self.kind {
            BlockKind::Coordinates(_) => Subspace::coordinate_span(&self.ambient, &self.flat_indices().unwrap()),
            BlockKind::Orthogonal(basis) => Subspace::span(&self.ambient, basis),
        }
    }
}

/// `P f`.
pub fn project(p: &BlockProjection, f: &Element) -> Result<Element, SpaceError> {
    p.project(f)
}
