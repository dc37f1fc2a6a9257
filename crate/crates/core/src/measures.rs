//! The six condition measures, each returned with the subset or vector that
//! certifies its value.
//!
//! * `chi`: max of `|A_J^{-1}|` over non-singular n x n row submatrices.
//! * `hoffman`: the same scan, with the inner maximum restricted to
//!   nonnegative multipliers, i.e. `1 / cone_min(A_J A_J^T)`.
//! * `renegar_distance`: `min |A^T v|` over unit `v >= 0`.
//! * `chibar`, `hoffmanbar`, `grassmann`: the above evaluated on an
//!   orthonormal basis of `range(A)`, which makes them depend on the range
//!   only.

use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::coneig::{ConeGram, SupportCertificate};
use crate::densela::{
    operator_norm, qr_orthonormal, rank_of, singular_pairs, thin_qr, Matrix,
    Tolerances,
};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureKind {
    Chi,
    Chibar,
    Hoffman,
    Hoffmanbar,
    Renegar,
    Grassmann,
}

impl MeasureKind {
    pub const ALL: [MeasureKind; 6] = [
        MeasureKind::Chi,
        MeasureKind::Chibar,
        MeasureKind::Hoffman,
        MeasureKind::Hoffmanbar,
        MeasureKind::Renegar,
        MeasureKind::Grassmann,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MeasureKind::Chi => "chi",
            MeasureKind::Chibar => "chibar",
            MeasureKind::Hoffman => "hoffman",
            MeasureKind::Hoffmanbar => "hoffmanbar",
            MeasureKind::Renegar => "renegar",
            MeasureKind::Grassmann => "grassmann",
        }
    }

    /// Evaluates this measure on `a`.
    pub fn compute(self, a: &Matrix, tol: &Tolerances) -> Result<MeasureResult> {
        match self {
            MeasureKind::Chi => chi(a, tol),
            MeasureKind::Chibar => chibar(a, tol),
            MeasureKind::Hoffman => hoffman(a, tol),
            MeasureKind::Hoffmanbar => hoffmanbar(a, tol),
            MeasureKind::Renegar => renegar_distance(a, tol),
            MeasureKind::Grassmann => grassmann(a, tol),
        }
    }
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MeasureKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        MeasureKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown measure '{s}'"))
    }
}

/// A measure value with its optimality certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureResult {
    pub kind: MeasureKind,
    pub value: f64,
    /// Row subset attaining the value; lexicographically first among ties.
    pub argmax_subset: Option<Vec<usize>>,
    /// All subsets within `verify_rtol` of the value, in enumeration order.
    pub ties: Vec<Vec<usize>>,
    pub witness: Option<Vec<f64>>,
    pub degenerate: bool,
    pub notes: Vec<String>,
}

impl MeasureResult {
    fn bare(kind: MeasureKind, value: f64) -> Self {
        Self {
            kind,
            value,
            argmax_subset: None,
            ties: Vec::new(),
            witness: None,
            degenerate: false,
            notes: Vec::new(),
        }
    }
}

pub(crate) fn binomial(m: usize, k: usize) -> u128 {
    if k > m {
        return 0;
    }
    let k = k.min(m - k);
    (0..k).fold(1u128, |acc, i| acc * (m - i) as u128 / (i + 1) as u128)
}

pub fn check_full_column_rank(a: &Matrix, tol: &Tolerances) -> Result<()> {
    let rank = rank_of(a, tol);
    if rank < a.cols() {
        return Err(Error::RankDeficient {
            rank,
            cols: a.cols(),
        });
    }
    Ok(())
}

fn check_subset_cap(a: &Matrix, tol: &Tolerances) -> Result<()> {
    let count = binomial(a.rows(), a.cols());
    if count > tol.caps.subsets as u128 {
        return Err(Error::CapExceeded {
            what: "row subset enumeration",
            requested: count,
            cap: tol.caps.subsets as u128,
        });
    }
    Ok(())
}

/// Calls `f(J, A_J, sigma_min(A_J))` for every n-row subset whose submatrix
/// is non-singular under the global rule `sigma_min(A_J) > rank_rtol * |A|`.
fn for_each_nonsingular(
    a: &Matrix,
    tol: &Tolerances,
    mut f: impl FnMut(&[usize], Matrix, f64, &[Vec<f64>]) -> Result<()>,
) -> Result<()> {
    check_full_column_rank(a, tol)?;
    check_subset_cap(a, tol)?;
    let threshold = tol.rank_rtol * operator_norm(a);
    for subset in (0..a.rows()).combinations(a.cols()) {
        let aj = a.select_rows(&subset);
        let (values, right) = singular_pairs(&aj);
        let smin = *values.last().unwrap();
        if smin > threshold {
            f(&subset, aj, smin, &right)?;
        }
    }
    Ok(())
}

struct Scan<T> {
    entries: Vec<(Vec<usize>, f64, T)>,
}

/// `(value, argmax subset, payload, ties)` of a finished scan.
type ScanOutcome<T> = (f64, Vec<usize>, T, Vec<Vec<usize>>);

impl<T> Scan<T> {
    fn new() -> Self {
        Self {
            entries: Vec::new(),
        }
    }

    /// Largest value, lexicographically first subset within `rtol` of it,
    /// and the full tie list.
    fn finish(self, rtol: f64) -> Result<ScanOutcome<T>> {
        let best = self
            .entries
            .iter()
            .map(|e| e.1)
            .fold(f64::NEG_INFINITY, f64::max);
        if !best.is_finite() {
            return Err(Error::Internal("no non-singular row subset".into()));
        }
        let cut = best - rtol * best.abs();
        let ties: Vec<Vec<usize>> = self
            .entries
            .iter()
            .filter(|e| e.1 >= cut)
            .map(|e| e.0.clone())
            .collect();
        let (subset, _, data) = self.entries.into_iter().find(|e| e.1 >= cut).unwrap();
        Ok((best, subset, data, ties))
    }
}

fn pad(m: usize, subset: &[usize], local: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut out = vec![0.0; m];
    for (&i, x) in subset.iter().zip(local) {
        out[i] = x;
    }
    out
}

/// `max |A_J^{-1}|` over non-singular n x n row submatrices.
///
/// The witness `v` is supported on the argmax subset with `|A_J^T v| = 1`
/// and `|v| = chi`.
pub fn chi(a: &Matrix, tol: &Tolerances) -> Result<MeasureResult> {
    let mut scan = Scan::new();
    for_each_nonsingular(a, tol, |subset, aj, smin, right| {
        // Left singular vector scaled so that |A_J^T v| = 1.
        let w = right.last().unwrap();
        let v: Vec<f64> = aj.mul_vec(w).iter().map(|x| x / (smin * smin)).collect();
        scan.entries.push((subset.to_vec(), 1.0 / smin, v));
        Ok(())
    })?;
    let (value, subset, v, ties) = scan.finish(tol.verify_rtol)?;
    let mut res = MeasureResult::bare(MeasureKind::Chi, value);
    res.witness = Some(pad(a.rows(), &subset, v));
    res.argmax_subset = Some(subset);
    res.ties = ties;
    Ok(res)
}

/// `chi` of an orthonormal basis of `range(A)`.
pub fn chibar(a: &Matrix, tol: &Tolerances) -> Result<MeasureResult> {
    check_full_column_rank(a, tol)?;
    let q = qr_orthonormal(a, tol)?;
    let mut res = chi(&q, tol)?;
    res.kind = MeasureKind::Chibar;
    res.notes
        .push("evaluated as chi(Q) for an orthonormal basis Q of range(A)".into());
    Ok(res)
}

/// `max_J max { |v| : v >= 0 on J, |A_J^T v| = 1 }` over non-singular `A_J`.
pub fn hoffman(a: &Matrix, tol: &Tolerances) -> Result<MeasureResult> {
    HoffmanTable::new(a, tol)?.evaluate(None, tol)
}

/// Cone decompositions of every non-singular `A_J`, reusable across row-sign
/// patterns: `(S A)_J` is non-singular exactly when `A_J` is.
pub struct HoffmanTable {
    rows: usize,
    subsets: Vec<(Vec<usize>, ConeGram)>,
}

impl HoffmanTable {
    pub fn new(a: &Matrix, tol: &Tolerances) -> Result<Self> {
        let mut subsets = Vec::new();
        for_each_nonsingular(a, tol, |subset, aj, _, _| {
            subsets.push((subset.to_vec(), ConeGram::from_factor(&aj, tol)?));
            Ok(())
        })?;
        Ok(Self {
            rows: a.rows(),
            subsets,
        })
    }

    /// `H(S A)` with `S = diag(signs)`, or `H(A)` for `None`.
    pub fn evaluate(&self, signs: Option<&[f64]>, tol: &Tolerances) -> Result<MeasureResult> {
        if let Some(s) = signs {
            if s.len() != self.rows {
                return Err(Error::DimensionMismatch {
                    what: "sign vector",
                    expected: self.rows,
                    found: s.len(),
                });
            }
        }
        let mut scan = Scan::new();
        for (subset, cone) in &self.subsets {
            let cert = match signs {
                Some(s) => {
                    let local: Vec<f64> = subset.iter().map(|&i| s[i]).collect();
                    cone.min_signed(&local, tol)?
                }
                None => cone.min(tol)?,
            };
            if cert.value.is_nan() || cert.value <= 0.0 {
                return Err(Error::Internal(format!(
                    "zero cone minimum on non-singular subset {subset:?}"
                )));
            }
            scan.entries.push((subset.clone(), 1.0 / cert.value, cert));
        }
        let (value, subset, cert, ties) = scan.finish(tol.verify_rtol)?;
        let mut res = MeasureResult::bare(MeasureKind::Hoffman, value);
        res.witness = Some(pad(
            self.rows,
            &subset,
            cert.witness.iter().map(|x| x / cert.value),
        ));
        res.degenerate = cert.degenerate;
        res.argmax_subset = Some(subset);
        res.ties = ties;
        Ok(res)
    }
}

/// Smallest `|A^T v|` over unit `v >= 0`; fails with the Gordan certificate
/// when that minimum is within `feas_tol` of zero.
pub(crate) fn gordan_gap(a: &Matrix, tol: &Tolerances) -> Result<SupportCertificate> {
    gordan_gap_signed(a, &ConeGram::from_factor(a, tol)?, None, tol)
}

/// [`gordan_gap`] of `S A` from the prepared cone of `A`.
pub(crate) fn gordan_gap_signed(
    a: &Matrix,
    cone: &ConeGram,
    signs: Option<&[f64]>,
    tol: &Tolerances,
) -> Result<SupportCertificate> {
    let cert = match signs {
        Some(s) => cone.min_signed(s, tol)?,
        None => cone.min(tol)?,
    };
    if cert.value <= tol.feas_tol {
        let certificate = cert.witness.iter().map(|x| x.max(0.0)).collect::<Vec<_>>();
        let n = crate::densela::norm(&certificate);
        let certificate: Vec<f64> = certificate.iter().map(|x| x / n).collect();
        // (S A)^T c = A^T (S c)
        let sc: Vec<f64> = match signs {
            Some(s) => certificate.iter().zip(s).map(|(c, s)| c * s).collect(),
            None => certificate.clone(),
        };
        let residual = crate::densela::norm(&a.tr_mul_vec(&sc));
        return Err(Error::NotStrictlyFeasible {
            certificate,
            residual,
        });
    }
    Ok(cert)
}

/// `max { |v| : v >= 0, |A^T v| = 1 }`, valid when `A x > 0` is solvable.
///
/// Independent of [`hoffman`]: one cone enumeration over all of `A A^T`
/// instead of a scan over square submatrices.
pub fn hoffman_simple(a: &Matrix, tol: &Tolerances) -> Result<MeasureResult> {
    check_full_column_rank(a, tol)?;
    let cert = gordan_gap(a, tol)?;
    let mut res = MeasureResult::bare(MeasureKind::Hoffman, 1.0 / cert.value);
    res.witness = Some(cert.witness.iter().map(|x| x / cert.value).collect());
    res.argmax_subset = Some(cert.support.clone());
    res.degenerate = cert.degenerate;
    res.notes
        .push("evaluated as 1 / min{|A^T v| : v >= 0, |v| = 1}".into());
    Ok(res)
}

/// `hoffman` of an orthonormal basis of `range(A)`; `A` may be rank deficient.
pub fn hoffmanbar(a: &Matrix, tol: &Tolerances) -> Result<MeasureResult> {
    let q = qr_orthonormal(a, tol)?;
    let mut res = hoffman(&q, tol)?;
    res.kind = MeasureKind::Hoffmanbar;
    res.notes
        .push("evaluated as H(Q) for an orthonormal basis Q of range(A)".into());
    Ok(res)
}

pub const RENEGAR_NOTE: &str = "distance to infeasibility evaluated as min{|A^T v| : v >= 0, |v| = 1}; \
the max-form expression max{|A^T v| : v >= 0, |v| = 1} is not its reciprocal and is not used";

/// Distance to infeasibility of `A x > 0`.
pub fn renegar_distance(a: &Matrix, tol: &Tolerances) -> Result<MeasureResult> {
    let cert = gordan_gap(a, tol)?;
    let mut res = MeasureResult::bare(MeasureKind::Renegar, cert.value);
    res.witness = Some(cert.witness.clone());
    res.argmax_subset = Some(cert.support.clone());
    res.degenerate = cert.degenerate;
    res.notes.push(RENEGAR_NOTE.into());
    Ok(res)
}

/// `1 / R(Q)` for an orthonormal basis `Q` of `range(A)`.
pub fn grassmann(a: &Matrix, tol: &Tolerances) -> Result<MeasureResult> {
    gordan_gap(a, tol)?;
    let q = qr_orthonormal(a, tol)?;
    let cert = gordan_gap(&q, tol)?;
    let mut res = MeasureResult::bare(MeasureKind::Grassmann, 1.0 / cert.value);
    res.witness = Some(cert.witness.clone());
    res.argmax_subset = Some(cert.support.clone());
    res.degenerate = cert.degenerate;
    res.notes
        .push("evaluated as 1 / R(Q) for an orthonormal basis Q of range(A)".into());
    Ok(res)
}

/// `[A; -A]`.
pub fn stack_pm(a: &Matrix) -> Matrix {
    a.vstack(&a.scale(-1.0)).expect("same column count")
}

/// Drops rows with norm at most `1e-12 * |A|`, returning the kept indices.
pub fn strip_zero_rows(a: &Matrix) -> Result<(Matrix, Vec<usize>)> {
    let threshold = 1e-12 * operator_norm(a);
    let kept: Vec<usize> = (0..a.rows())
        .filter(|&i| a.row_norm(i) > threshold)
        .collect();
    if kept.is_empty() {
        return Err(Error::AllRowsZero);
    }
    Ok((a.select_rows(&kept), kept))
}

/// Weighted pseudo-inverse `(A^T D A)^{-1} A^T D` for `D = diag(d)`.
///
/// Computed from a thin QR of `D^{1/2} A` (weights normalized by their
/// maximum), which squares neither the weights nor the conditioning.
pub fn wls_pseudoinverse(a: &Matrix, d: &[f64], tol: &Tolerances) -> Result<Matrix> {
    let (m, n) = a.shape();
    if d.len() != m {
        return Err(Error::DimensionMismatch {
            what: "weight vector",
            expected: m,
            found: d.len(),
        });
    }
    if let Some((index, &value)) = d
        .iter()
        .enumerate()
        .find(|(_, &x)| !(x > 0.0 && x.is_finite()))
    {
        return Err(Error::NonPositiveWeight { index, value });
    }
    check_full_column_rank(a, tol)?;
    let dmax = d.iter().cloned().fold(0.0, f64::max);
    let w: Vec<f64> = d.iter().map(|x| (x / dmax).sqrt()).collect();
    let b = a.scale_rows(&w);
    let (q, r) = thin_qr(&b, tol)?;
    // A_D^+ = R^{-1} Q^T W, by back substitution on the columns of Q^T W.
    let mut out = Matrix::zeros(n, m);
    for i in 0..m {
        let mut col: Vec<f64> = (0..n).map(|k| q[(i, k)] * w[i]).collect();
        for k in (0..n).rev() {
            let s: f64 = (k + 1..n).map(|j| r[(k, j)] * col[j]).sum();
            col[k] = (col[k] - s) / r[(k, k)];
        }
        for k in 0..n {
            out[(k, i)] = col[k];
        }
    }
    Ok(out)
}
