//! Embedded manifolds with elliptic frames and the connection, `omega^{jk}`,
//! `B^{jk}` and Ricci quantities built from them.

mod builtin;
mod cache;
mod calculus;
mod checks;
mod manifold;

pub use builtin::{so3_algebra_basis, so3_flatten, so3_unflatten, Circle, FlatTorus, So3, Sphere2};
pub use cache::{GeometryCache, DEFAULT_FIRST_STEP, DEFAULT_SECOND_STEP};
pub use calculus::{BTerms, Geometry, SecondCovariant, ELLIPTICITY_TOL};
pub use checks::{
    check_axioms, check_closed_forms, check_frame_metric, AxiomReport, ClosedFormReport,
    FrameMetricReport, AXIOM_TOL, FRAME_METRIC_TOL, LINEARITY_TOL,
};
pub use manifold::{
    constraint_projector, Coeffs, FieldMatrix, Frame, Manifold, NumericOnly, Point, ScaledFrame,
    TangentVector, TOL_CONSTRAINT,
};
