//! Row-sign scans, strict feasibility via Gordan's alternative, and
//! executable checks of the identities linking chi, Hoffman, Renegar and
//! Grassmann measures.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::densela::{thin_qr, Matrix, Tolerances};
use crate::error::{Error, Result};
use crate::coneig::ConeGram;
use crate::densela::qr_orthonormal;
use crate::measures::{
    self, check_full_column_rank, gordan_gap, gordan_gap_signed, hoffman, hoffmanbar, stack_pm,
    strip_zero_rows, HoffmanTable, MeasureResult,
};
use crate::oracle::constrained_lsq;

/// A diagonal matrix of +1/-1 entries, stored as its diagonal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct Signature(Vec<i8>);

impl Signature {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if let Some(bad) = signs.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::InvalidMatrix(format!(
                "signature entries must be +1 or -1, found {bad}"
            )));
        }
        Ok(Self(signs))
    }

    pub fn positive(m: usize) -> Self {
        Self(vec![1; m])
    }

    /// The `index`-th signature in binary-counter order: row `i` is negated
    /// when bit `m - 1 - i` of `index` is set.
    pub fn from_index(m: usize, index: u64) -> Self {
        Self(
            (0..m)
                .map(|i| if index >> (m - 1 - i) & 1 == 1 { -1 } else { 1 })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn signs(&self) -> &[i8] {
        &self.0
    }

    pub fn factors(&self) -> Vec<f64> {
        self.0.iter().map(|&s| s as f64).collect()
    }
}

impl TryFrom<Vec<i8>> for Signature {
    type Error = Error;

    fn try_from(v: Vec<i8>) -> Result<Self> {
        Signature::new(v)
    }
}

impl From<Signature> for Vec<i8> {
    fn from(s: Signature) -> Self {
        s.0
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &s in &self.0 {
            f.write_str(if s > 0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

fn check_signature_cap(m: usize, tol: &Tolerances) -> Result<()> {
    if m > tol.caps.signature_rows {
        return Err(Error::CapExceeded {
            what: "signature scan rows",
            requested: m as u128,
            cap: tol.caps.signature_rows as u128,
        });
    }
    Ok(())
}

/// All `2^m` signatures in binary-counter order.
pub fn enumerate_signatures(
    m: usize,
    tol: &Tolerances,
) -> Result<Vec<Signature>> {
    check_signature_cap(m, tol)?;
    Ok((0..1u64 << m).map(|k| Signature::from_index(m, k)).collect())
}

/// Scales row `i` of `a` by the `i`-th sign.
pub fn apply_signature(s: &Signature, a: &Matrix) -> Result<Matrix> {
    if s.len() != a.rows() {
        return Err(Error::DimensionMismatch {
            what: "signature length",
            expected: a.rows(),
            found: s.len(),
        });
    }
    Ok(a.scale_rows(&s.factors()))
}

/// Outcome of the strict feasibility test for `A x > 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Feasibility {
    /// `x` satisfies `min_i (A x)_i = margin > 0`; `gap` is `min |A^T v|`
    /// over unit `v >= 0`.
    Strict { x: Vec<f64>, margin: f64, gap: f64 },
    /// Gordan certificate: unit `v >= 0` with `|A^T v| = residual <= feas_tol`.
    Infeasible { certificate: Vec<f64>, residual: f64 },
}

impl Feasibility {
    pub fn is_strict(&self) -> bool {
        matches!(self, Feasibility::Strict { .. })
    }

    pub fn gap(&self) -> Option<f64> {
        match self {
            Feasibility::Strict { gap, .. } => Some(*gap),
            Feasibility::Infeasible { .. } => None,
        }
    }
}

fn margin(a: &Matrix, x: &[f64]) -> f64 {
    a.mul_vec(x).into_iter().fold(f64::INFINITY, f64::min)
}

/// Decides whether `A x > 0` has a solution.
///
/// The decision is `min_{v >= 0, |v| = 1} |A^T v| > feas_tol`. A positive
/// answer is backed by an explicit `x`, first from the least-squares fit of
/// `A x = 1` and otherwise from the minimum-norm solution of `A x >= 1`;
/// either way it is checked by substitution before being returned.
pub fn strictly_feasible(a: &Matrix, tol: &Tolerances) -> Result<Feasibility> {
    let m = a.rows();
    if let Some(i) = (0..m).find(|&i| a.row(i).iter().all(|&x| x == 0.0)) {
        let mut certificate = vec![0.0; m];
        certificate[i] = 1.0;
        return Ok(Feasibility::Infeasible {
            certificate,
            residual: 0.0,
        });
    }
    let cert = match gordan_gap(a, tol) {
        Ok(c) => c,
        Err(Error::NotStrictlyFeasible {
            certificate,
            residual,
        }) => {
            return Ok(Feasibility::Infeasible {
                certificate,
                residual,
            })
        }
        Err(e) => return Err(e),
    };
    let ones = vec![1.0; m];
    if let Ok((q, r)) = thin_qr(a, tol) {
        let n = a.cols();
        let mut x = q.tr_mul_vec(&ones);
        for k in (0..n).rev() {
            let s: f64 = (k + 1..n).map(|j| r[(k, j)] * x[j]).sum();
            x[k] = (x[k] - s) / r[(k, k)];
        }
        let mg = margin(a, &x);
        if mg > 0.0 {
            return Ok(Feasibility::Strict {
                x,
                margin: mg,
                gap: cert.value,
            });
        }
    }
    let n = a.cols();
    let neg = a.scale(-1.0);
    let minus_ones = vec![-1.0; m];
    match constrained_lsq(&Matrix::identity(n), &vec![0.0; n], &neg, &minus_ones, tol) {
        Ok(sol) => {
            let mg = margin(a, &sol.z);
            if mg > 0.0 {
                return Ok(Feasibility::Strict {
                    x: sol.z,
                    margin: mg,
                    gap: cert.value,
                });
            }
            Err(Error::Internal(format!(
                "cone gap {:e} exceeds feas_tol but the recovered point has margin {mg:e}",
                cert.value
            )))
        }
        Err(e) => Err(Error::Internal(format!(
            "cone gap {:e} exceeds feas_tol but A x >= 1 was not solved: {e}",
            cert.value
        ))),
    }
}

/// One identity check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// Short label, e.g. `"i"`.
    pub id: String,
    pub identity: String,
    pub lhs: f64,
    pub rhs: f64,
    pub abs_err: f64,
    pub rel_err: f64,
    pub pass: bool,
    pub witness_signature: Option<Signature>,
    pub witness_subset: Option<Vec<usize>>,
    pub witness_vector: Option<Vec<f64>>,
    pub notes: Vec<String>,
}

impl VerificationReport {
    /// Equality check: relative error against `rtol`, or absolute error when
    /// both sides are below one.
    pub fn compare(id: &str, identity: &str, lhs: f64, rhs: f64, rtol: f64) -> Self {
        let abs_err = (lhs - rhs).abs();
        let scale = lhs.abs().max(rhs.abs());
        let rel_err = if scale > 0.0 { abs_err / scale } else { 0.0 };
        let pass = if lhs.abs() < 1.0 && rhs.abs() < 1.0 {
            abs_err <= rtol
        } else {
            rel_err <= rtol
        };
        Self {
            id: id.into(),
            identity: identity.into(),
            lhs,
            rhs,
            abs_err,
            rel_err,
            pass,
            witness_signature: None,
            witness_subset: None,
            witness_vector: None,
            notes: Vec::new(),
        }
    }

    /// One-sided check `lhs <= rhs (1 + rtol)` for nonnegative `rhs`.
    pub fn bound(id: &str, identity: &str, lhs: f64, rhs: f64, rtol: f64) -> Self {
        let mut r = Self::compare(id, identity, lhs, rhs, rtol);
        r.pass = lhs <= rhs + rtol * rhs.abs();
        r
    }

    pub fn with_signature(mut self, s: Option<Signature>) -> Self {
        self.witness_signature = s;
        self
    }

    pub fn with_subset(mut self, j: Option<Vec<usize>>) -> Self {
        self.witness_subset = j;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

/// Largest value and the first index attaining it within `rtol`.
fn first_max(values: impl IntoIterator<Item = (usize, f64)>, rtol: f64) -> Option<(usize, f64)> {
    let values: Vec<(usize, f64)> = values.into_iter().collect();
    let best = values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        return None;
    }
    let cut = best - rtol * best.abs();
    values
        .iter()
        .find(|v| v.1 >= cut)
        .map(|&(i, _)| (i, best))
}

/// Result of [`signed_max_hoffman`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignedMax {
    pub value: f64,
    /// First attaining signature in enumeration order; `None` when the
    /// filtered scan admits no signature.
    pub signature: Option<Signature>,
    pub subset: Option<Vec<usize>>,
    pub feasible_count: usize,
    pub report: VerificationReport,
}

/// `max_S H(SA)`, optionally over strictly feasible `SA` only, compared with
/// `chi(A)`.
pub fn signed_max_hoffman(a: &Matrix, filter_feasible: bool, tol: &Tolerances) -> Result<SignedMax> {
    let m = a.rows();
    check_full_column_rank(a, tol)?;
    check_signature_cap(m, tol)?;
    if filter_feasible {
        if let Some(i) = (0..m).find(|&i| a.row(i).iter().all(|&x| x == 0.0)) {
            return Err(Error::InvalidMatrix(format!(
                "row {i} is zero; the feasible-signature scan needs nonzero rows"
            )));
        }
    }
    let chi = measures::chi(a, tol)?;
    let table = HoffmanTable::new(a, tol)?;
    let cone = if filter_feasible {
        Some(ConeGram::from_factor(a, tol)?)
    } else {
        None
    };
    let entries: Vec<Option<(f64, Vec<usize>)>> = (0..1u64 << m)
        .into_par_iter()
        .map(|k| {
            let signs = Signature::from_index(m, k).factors();
            if let Some(cone) = &cone {
                if feasibility_gap(a, cone, &signs, tol)?.is_none() {
                    return Ok(None);
                }
            }
            let h = table.evaluate(Some(&signs), tol)?;
            Ok(Some((h.value, h.argmax_subset.unwrap_or_default())))
        })
        .collect::<Result<_>>()?;
    let feasible_count = entries.iter().filter(|e| e.is_some()).count();
    let best = first_max(
        entries
            .iter()
            .enumerate()
            .filter_map(|(i, e)| e.as_ref().map(|e| (i, e.0))),
        tol.verify_rtol,
    );
    let name = if filter_feasible {
        "chi(A) = max over strictly feasible S of H(SA)"
    } else {
        "chi(A) = max over S of H(SA)"
    };
    let id = if filter_feasible { "iii" } else { "i" };
    let Some((index, value)) = best else {
        let report = VerificationReport::compare(id, name, chi.value, 0.0, tol.verify_rtol)
            .with_note("no strictly feasible signature exists");
        return Ok(SignedMax {
            value: 0.0,
            signature: None,
            subset: None,
            feasible_count,
            report,
        });
    };
    let signature = Signature::from_index(m, index as u64);
    let subset = entries[index].as_ref().map(|e| e.1.clone());
    let report = VerificationReport::compare(id, name, chi.value, value, tol.verify_rtol)
        .with_signature(Some(signature.clone()))
        .with_subset(subset.clone());
    Ok(SignedMax {
        value,
        signature: Some(signature),
        subset,
        feasible_count,
        report,
    })
}

/// Per-signature quantities gathered by [`signed_scan`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignedEntry {
    pub signature: Signature,
    pub strictly_feasible: bool,
    /// `H(SA)` by the submatrix scan.
    pub hoffman: f64,
    pub hoffman_subset: Vec<usize>,
    pub hoffmanbar: f64,
    /// `R(SA)`, when strictly feasible.
    pub renegar: Option<f64>,
    /// `G(SA)`, when strictly feasible.
    pub grassmann: Option<f64>,
}

/// Evaluates every signature of `a`. Entries are in enumeration order
/// regardless of how the work is scheduled.
pub fn signed_scan(a: &Matrix, tol: &Tolerances) -> Result<Vec<SignedEntry>> {
    let m = a.rows();
    check_full_column_rank(a, tol)?;
    check_signature_cap(m, tol)?;
    let q = qr_orthonormal(a, tol)?;
    // The orthonormal basis of range(S A) is S Q, so every table below is
    // built once and queried per signature.
    let h_table = HoffmanTable::new(a, tol)?;
    let hbar_table = HoffmanTable::new(&q, tol)?;
    let cone_a = ConeGram::from_factor(a, tol)?;
    let cone_q = ConeGram::from_factor(&q, tol)?;
    (0..1u64 << m)
        .into_par_iter()
        .map(|k| {
            let signature = Signature::from_index(m, k);
            let signs = signature.factors();
            let h = h_table.evaluate(Some(&signs), tol)?;
            let hbar = hbar_table.evaluate(Some(&signs), tol)?;
            let renegar = feasibility_gap(a, &cone_a, &signs, tol)?;
            let grassmann = match renegar {
                Some(_) => Some(1.0 / gordan_gap_signed(&q, &cone_q, Some(&signs), tol)?.value),
                None => None,
            };
            Ok(SignedEntry {
                signature,
                strictly_feasible: renegar.is_some(),
                hoffman: h.value,
                hoffman_subset: h.argmax_subset.unwrap_or_default(),
                hoffmanbar: hbar.value,
                renegar,
                grassmann,
            })
        })
        .collect()
}

/// `R(S A)` when `S A x > 0` is solvable, `None` otherwise.
fn feasibility_gap(a: &Matrix, cone: &ConeGram, signs: &[f64], tol: &Tolerances) -> Result<Option<f64>> {
    match gordan_gap_signed(a, cone, Some(signs), tol) {
        Ok(cert) => Ok(Some(cert.value)),
        Err(Error::NotStrictlyFeasible { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Everything [`verify_identities`] computed, for callers that want more
/// than the pass/fail records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub chi: MeasureResult,
    pub chibar: MeasureResult,
    pub scan: Vec<SignedEntry>,
    pub reports: Vec<VerificationReport>,
}

impl Verification {
    pub fn all_pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }
}

fn max_over(
    scan: &[SignedEntry],
    rtol: f64,
    pick: impl Fn(&SignedEntry) -> Option<f64>,
) -> Option<(&SignedEntry, f64)> {
    first_max(
        scan.iter().enumerate().filter_map(|(i, e)| pick(e).map(|v| (i, v))),
        rtol,
    )
    .map(|(i, v)| (&scan[i], v))
}

fn has_zero_row(a: &Matrix) -> bool {
    (0..a.rows()).any(|i| a.row(i).iter().all(|&x| x == 0.0))
}

/// Checks, on `a`, every applicable identity:
///
/// * (i) `chi(A) = max_S H(SA)` and (ii) `chi(A) = H([A; -A])`
/// * (iii) the same maximum over strictly feasible `SA` (nonzero rows)
/// * (iv) `chibar(A) = max_S Hbar(SA) = Hbar([A; -A])`
/// * (v) `H(SA) R(SA) = 1` for every strictly feasible `SA`
/// * (vi) `chi(A) = max 1/R(SA)` and (vii) `chibar(A) = max G(SA)` over
///   strictly feasible `SA` (nonzero rows)
/// * (viii) (iii) and (vi) on the matrix with zero rows removed, when `A`
///   has zero rows
pub fn verify_identities(a: &Matrix, tol: &Tolerances) -> Result<Verification> {
    tol.validate()?;
    let rtol = tol.verify_rtol;
    let chi = measures::chi(a, tol)?;
    let chibar = measures::chibar(a, tol)?;
    let scan = signed_scan(a, tol)?;
    let mut reports = Vec::new();

    let (best, h_max) = max_over(&scan, rtol, |e| Some(e.hoffman)).expect("nonempty scan");
    reports.push(
        VerificationReport::compare("i", "chi(A) = max over S of H(SA)", chi.value, h_max, rtol)
            .with_signature(Some(best.signature.clone()))
            .with_subset(Some(best.hoffman_subset.clone())),
    );

    let stacked = hoffman(&stack_pm(a), tol)?;
    reports.push(
        VerificationReport::compare("ii", "chi(A) = H([A; -A])", chi.value, stacked.value, rtol)
            .with_subset(stacked.argmax_subset.clone()),
    );

    let nonzero_rows = !has_zero_row(a);
    if nonzero_rows {
        reports.push(feasible_max_report(
            "iii",
            "chi(A) = max over strictly feasible S of H(SA)",
            chi.value,
            &scan,
            rtol,
            |e| e.renegar.map(|_| e.hoffman),
        ));
    }

    let (best, hbar_max) =
        max_over(&scan, rtol, |e| Some(e.hoffmanbar)).expect("nonempty scan");
    reports.push(
        VerificationReport::compare(
            "iv.a",
            "chibar(A) = max over S of Hbar(SA)",
            chibar.value,
            hbar_max,
            rtol,
        )
        .with_signature(Some(best.signature.clone())),
    );
    // The range of [A; -A] holds (y, -y), whose norm is sqrt(2)|y|, so the
    // stacked constant carries that factor relative to chibar(A).
    let stacked_bar = hoffmanbar(&stack_pm(a), tol)?;
    let mut report = VerificationReport::compare(
        "iv.b",
        "sqrt(2) * chibar(A) = Hbar([A; -A])",
        std::f64::consts::SQRT_2 * chibar.value,
        stacked_bar.value,
        rtol,
    );
    report.notes.push("distances in the stacked range are scaled by sqrt(2)".into());
    reports.push(report);

    // Worst deviation of H(SA) R(SA) from one.
    let worst = scan
        .iter()
        .filter_map(|e| e.renegar.map(|r| (e, e.hoffman * r)))
        .fold(None::<(&SignedEntry, f64)>, |acc, (e, p)| match acc {
            Some((_, q)) if (q - 1.0).abs() >= (p - 1.0).abs() => acc,
            _ => Some((e, p)),
        });
    if let Some((e, product)) = worst {
        reports.push(
            VerificationReport::compare(
                "v",
                "H(SA) * R(SA) = 1 for every strictly feasible S",
                product,
                1.0,
                rtol,
            )
            .with_signature(Some(e.signature.clone()))
            .with_note(format!(
                "{} strictly feasible signatures checked; worst shown",
                scan.iter().filter(|e| e.strictly_feasible).count()
            )),
        );
    }

    if nonzero_rows {
        reports.push(feasible_max_report(
            "vi",
            "chi(A) = max over strictly feasible S of 1/R(SA)",
            chi.value,
            &scan,
            rtol,
            |e| e.renegar.map(|r| 1.0 / r),
        ));
        reports.push(feasible_max_report(
            "vii",
            "chibar(A) = max over strictly feasible S of G(SA)",
            chibar.value,
            &scan,
            rtol,
            |e| e.grassmann,
        ));
    } else {
        let (stripped, kept) = strip_zero_rows(a)?;
        let sub_scan = signed_scan(&stripped, tol)?;
        let note = format!("zero rows removed; kept rows {kept:?}");
        reports.push(
            feasible_max_report(
                "viii.a",
                "chi(A) = max over S with S*A~ strictly feasible of H(S*A~)",
                chi.value,
                &sub_scan,
                rtol,
                |e| e.renegar.map(|_| e.hoffman),
            )
            .with_note(note.clone()),
        );
        reports.push(
            feasible_max_report(
                "viii.b",
                "chi(A) = max over S with S*A~ strictly feasible of 1/R(S*A~)",
                chi.value,
                &sub_scan,
                rtol,
                |e| e.renegar.map(|r| 1.0 / r),
            )
            .with_note(note),
        );
    }

    Ok(Verification {
        chi,
        chibar,
        scan,
        reports,
    })
}

fn feasible_max_report(
    id: &str,
    identity: &str,
    lhs: f64,
    scan: &[SignedEntry],
    rtol: f64,
    pick: impl Fn(&SignedEntry) -> Option<f64>,
) -> VerificationReport {
    match max_over(scan, rtol, pick) {
        Some((e, v)) => VerificationReport::compare(id, identity, lhs, v, rtol)
            .with_signature(Some(e.signature.clone()))
            .with_subset(Some(e.hoffman_subset.clone())),
        None => {
            let mut r = VerificationReport::compare(id, identity, lhs, 0.0, rtol)
                .with_note("no strictly feasible signature exists although all rows are nonzero");
            r.pass = false;
            r
        }
    }
}
