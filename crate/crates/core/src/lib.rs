//! Finite surrogate Banach spaces (`ℓ_p`, weighted `L_p`, Schatten, Bochner
//! `L_p(ℓ_q)`), explicit convex coverings of their unit balls by norm-cap sets,
//! certified bounds on a codimension-budget inradius of those sets, and
//! numerical moduli of smoothness.

pub mod coverings;
pub mod inradius;
pub mod linalg;
pub mod moduli;
pub mod optimize;
pub mod projection;
pub mod sampling;
pub mod space;
pub mod subspace;

pub use coverings::{
    build_block_covering, build_hilbert_two_cover, build_hilbert_two_cover_orthogonal, contiguous_partition,
    membership, pullback_covering, verify_cover, BochnerProjection, CapProjection, ContractiveMap, CoverError,
    CoverReport, CoveringFamily, NormCapSet, Provenance,
};
pub use inradius::{
    certify_lower, certify_pullback, estimate_inradius, recheck_certificate, refute_hilbert, refute_lp,
    CertificateStatus, InradiusConfig, InradiusError, InradiusEstimate, RefutationWitness, Rigor, SectionCertificate,
};
pub use moduli::{
    asymptotic_modulus_surrogate, clarkson_check, power_type_fit, symmetric_modulus, AsymptoticConfig,
    CandidateFamily, ClarksonReport, ModuliError, ModulusKind, ModulusSample, PowerFit, XDomain,
};
pub use optimize::AscentConfig;
pub use projection::BlockProjection;
pub use space::{Element, InnerSpec, Shape, SpaceError, SpaceSpec};
pub use subspace::Subspace;
