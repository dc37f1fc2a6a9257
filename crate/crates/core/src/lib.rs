//! Exact condition measures of small dense full-column-rank matrices.
//!
//! For `A` in `R^{m x n}` this crate computes, by finite enumeration over row
//! subsets and nonnegative eigenvector supports:
//!
//! * `chi(A)` and `chibar(A)`, the worst-case norms of weighted least-squares
//!   solution maps and projectors;
//! * `H(A)` and `Hbar(A)`, the Hoffman error-bound constants of `A x <= b`;
//! * `R(A)`, the distance to infeasibility of `A x > 0`, and the
//!   range-only Grassmann variant `G(A)`.
//!
//! [`signed`] checks the identities tying them together (for example
//! `chi(A) = max_S H(SA)` over row-sign matrices `S`), and [`oracle`] holds
//! sampling-based cross-checks that do not share code paths with the
//! enumeration.

pub mod coneig;
pub mod densela;
pub mod error;
pub mod measures;
pub mod oracle;
pub mod signed;

pub use coneig::{cone_candidates, cone_max, cone_min, ConeGram, SupportCertificate};
pub use densela::{
    operator_norm, qr_orthonormal, rank_of, sigma_extremes, solve_square, sym_eig, Caps,
    EigenPair, Matrix, Tolerances,
};
pub use error::{Error, Result};
pub use measures::{
    chi, chibar, grassmann, hoffman, hoffman_simple, hoffmanbar, renegar_distance, stack_pm,
    strip_zero_rows, wls_pseudoinverse, MeasureKind, MeasureResult,
};
pub use oracle::{constrained_lsq, LsqSolution, RngConfig};
pub use signed::{
    apply_signature, enumerate_signatures, signed_max_hoffman, signed_scan, strictly_feasible,
    verify_identities, Feasibility, Signature, SignedEntry, SignedMax, Verification,
    VerificationReport,
};
