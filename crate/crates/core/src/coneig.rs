//! Extremes of the Rayleigh quotient `v^T G v` over unit vectors in the
//! nonnegative orthant.
//!
//! Any local extremum `v` of `v^T G v` on `{|v| = 1, v >= 0}` with support `K`
//! is an eigenvector of the principal submatrix `G[K, K]`. Enumerating every
//! support and keeping the eigenvectors that have a nonnegative representative
//! therefore yields a finite candidate set containing both the minimum and
//! the maximum.
//!
//! When the Gram matrix comes with a factor (`G = B B^T`) candidate values are
//! recomputed as `|B[K]^T v|` instead of `sqrt(lambda)`, which keeps small
//! values relatively accurate.

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::densela::{dot, jacobi_eigen, norm, Matrix, Tolerances};
use crate::error::{Error, Result};

/// Eigenvalues of `G[K, K]` closer than this (relative to `|G|`) share an
/// eigenspace.
const DEGENERACY_RTOL: f64 = 1e-9;
const PROJECTION_STARTS: usize = 64;
const PROJECTION_ITERS: usize = 400;
/// Values closer than this (relative) are ties; the earlier candidate wins.
const TIE_RTOL: f64 = 1e-12;
/// Relative gap between a group's eigenvalue bracket and the value of any
/// vector found in it, covering rounding in the factored evaluation.
const GROUP_SLACK: f64 = 1e-9;

/// A nonnegative unit eigenvector of a principal submatrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportCertificate {
    /// Sorted row indices `K` (0-based).
    pub support: Vec<usize>,
    pub eigenvalue: f64,
    /// Unit vector of the full dimension, zero outside `support`.
    pub witness: Vec<f64>,
    /// `sqrt(eigenvalue)`.
    pub value: f64,
    /// Found through the eigenspace projection search rather than a sign check.
    pub degenerate: bool,
}

/// Eigen-data of one principal block, computed once and reused for every
/// row-sign pattern.
#[derive(Clone, Debug)]
enum Block {
    /// A simple eigenvalue with unit eigenvector `vector` on `support`.
    Simple {
        support: Vec<usize>,
        vector: Vec<f64>,
        eigenvalue: f64,
        value: f64,
    },
    /// A repeated nonzero eigenvalue; `basis` spans its eigenspace and
    /// `range` brackets its eigenvalues.
    Group {
        support: Vec<usize>,
        basis: Vec<Vec<f64>>,
        range: (f64, f64),
    },
}

/// A PSD Gram matrix prepared for cone enumeration.
///
/// Flipping row signs (`G -> S G S` for a signature `S`) leaves every
/// principal eigenvalue unchanged and maps eigenvectors `u` to `S u`, so the
/// decomposition is computed once and the `*_signed` queries only redo the
/// sign checks.
#[derive(Clone, Debug)]
pub struct ConeGram {
    gram: Matrix,
    factor: Option<Matrix>,
    blocks: Vec<Block>,
}

impl ConeGram {
    /// Validates symmetry, positive semidefiniteness and the dimension cap.
    pub fn new(gram: Matrix, tol: &Tolerances) -> Result<Self> {
        check_cap(gram.rows(), tol)?;
        let pairs = crate::densela::sym_eig(&gram)?;
        let top = pairs.first().map_or(0.0, |p| p.value.max(0.0));
        let bottom = pairs.last().map_or(0.0, |p| p.value);
        if bottom < -1e-9 * top.max(f64::MIN_POSITIVE) {
            return Err(Error::NotPsd(bottom));
        }
        Ok(Self::build(gram, None, top))
    }

    /// Gram matrix `B B^T` of the rows of `b`, keeping `b` for value refinement.
    pub fn from_factor(b: &Matrix, tol: &Tolerances) -> Result<Self> {
        check_cap(b.rows(), tol)?;
        let gram = b.outer_gram();
        let top = crate::densela::operator_norm(b).powi(2);
        Ok(Self::build(gram, Some(b.clone()), top))
    }

    pub fn dim(&self) -> usize {
        self.gram.rows()
    }

    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    /// Supports by increasing cardinality then lexicographically,
    /// eigenvalues descending within a support.
    fn build(gram: Matrix, factor: Option<Matrix>, top: f64) -> Self {
        let m = gram.rows();
        let gap = DEGENERACY_RTOL * top.max(f64::MIN_POSITIVE);
        let mut blocks = Vec::new();
        for k in 1..=m {
            for support in (0..m).combinations(k) {
                let sub = gram.principal(&support);
                let (values, vectors) = jacobi_eigen(sub.as_slice(), k);
                let mut start = 0;
                while start < k {
                    let mut end = start + 1;
                    while end < k && values[end - 1] - values[end] <= gap {
                        end += 1;
                    }
                    if end - start == 1 {
                        let vector = vectors[start].clone();
                        let value = match &factor {
                            Some(b) => factored_value(b, &support, &vector),
                            None => values[start].max(0.0).sqrt(),
                        };
                        blocks.push(Block::Simple {
                            support: support.clone(),
                            vector,
                            eigenvalue: values[start],
                            value,
                        });
                    } else if values[start] > gap {
                        blocks.push(Block::Group {
                            support: support.clone(),
                            basis: vectors[start..end].to_vec(),
                            range: (values[end - 1], values[start]),
                        });
                    }
                    // Otherwise a multi-dimensional null space of a PSD block.
                    // Null spaces of nested principal blocks are nested, and
                    // every nonnegative null vector combines extreme rays whose
                    // supports carry a one-dimensional null space, so smaller
                    // supports already cover it.
                    start = end;
                }
            }
        }
        Self {
            gram,
            factor,
            blocks,
        }
    }

    /// Calls `f` on every candidate of `S G S` in enumeration order, where
    /// `signs` holds the diagonal of `S` (all `+1` when `None`).
    ///
    /// `skip(lo, hi)` may veto the projection search for an eigenvalue group
    /// whose values lie in `[sqrt(lo), sqrt(hi)]`.
    fn for_each_candidate(
        &self,
        signs: Option<&[f64]>,
        tol: &Tolerances,
        skip: impl Fn(f64, f64) -> bool,
        mut f: impl FnMut(SupportCertificate),
    ) {
        let atol = tol.nonneg_atol;
        let flip = |support: &[usize], u: &[f64]| -> Vec<f64> {
            match signs {
                Some(s) => support.iter().zip(u).map(|(&i, x)| s[i] * x).collect(),
                None => u.to_vec(),
            }
        };
        for block in &self.blocks {
            match block {
                Block::Simple {
                    support,
                    vector,
                    eigenvalue,
                    value,
                } => {
                    let u = flip(support, vector);
                    let rep = if u.iter().all(|&x| x >= -atol) {
                        u
                    } else if u.iter().all(|&x| x <= atol) {
                        u.iter().map(|x| -x).collect()
                    } else {
                        continue;
                    };
                    f(self.certificate(support, rep, *eigenvalue, *value, false));
                }
                Block::Group {
                    support,
                    basis,
                    range,
                } => {
                    let (lo, hi) = (range.0.max(0.0).sqrt(), range.1.max(0.0).sqrt());
                    if skip(lo, hi) {
                        continue;
                    }
                    let flipped: Vec<Vec<f64>> = basis.iter().map(|q| flip(support, q)).collect();
                    if let Some(rep) = nonneg_in_span(&flipped, support, atol) {
                        // Values are sign invariant, so evaluate on the
                        // unflipped vector.
                        let unflipped = flip(support, &rep);
                        let (lambda, value) = match &self.factor {
                            Some(b) => {
                                let v = factored_value(b, support, &unflipped);
                                (v * v, v)
                            }
                            None => {
                                let l = rayleigh(&self.gram.principal(support), &unflipped);
                                (l, l.max(0.0).sqrt())
                            }
                        };
                        f(self.certificate(support, rep, lambda, value, true));
                    }
                }
            }
        }
    }

    fn certificate(
        &self,
        support: &[usize],
        local: Vec<f64>,
        lambda: f64,
        value: f64,
        degenerate: bool,
    ) -> SupportCertificate {
        let mut witness = vec![0.0; self.dim()];
        for (&i, &x) in support.iter().zip(&local) {
            witness[i] = x;
        }
        SupportCertificate {
            support: support.to_vec(),
            eigenvalue: if self.factor.is_some() { value * value } else { lambda },
            witness,
            value,
            degenerate,
        }
    }

    pub fn candidates(&self, tol: &Tolerances) -> Vec<SupportCertificate> {
        let mut out = Vec::new();
        self.for_each_candidate(None, tol, |_, _| false, |c| out.push(c));
        out
    }

    pub fn max(&self, tol: &Tolerances) -> Result<SupportCertificate> {
        self.extreme(None, tol, Direction::Max)
    }

    pub fn min(&self, tol: &Tolerances) -> Result<SupportCertificate> {
        self.extreme(None, tol, Direction::Min)
    }

    /// [`ConeGram::max`] of `S G S` with `S = diag(signs)`.
    pub fn max_signed(&self, signs: &[f64], tol: &Tolerances) -> Result<SupportCertificate> {
        self.check_signs(signs)?;
        self.extreme(Some(signs), tol, Direction::Max)
    }

    /// [`ConeGram::min`] of `S G S` with `S = diag(signs)`.
    pub fn min_signed(&self, signs: &[f64], tol: &Tolerances) -> Result<SupportCertificate> {
        self.check_signs(signs)?;
        self.extreme(Some(signs), tol, Direction::Min)
    }

    fn check_signs(&self, signs: &[f64]) -> Result<()> {
        if signs.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "sign vector",
                expected: self.dim(),
                found: signs.len(),
            });
        }
        if signs.iter().any(|&s| s != 1.0 && s != -1.0) {
            return Err(Error::InvalidMatrix("signs must be +1 or -1".into()));
        }
        Ok(())
    }

    /// Running extreme over the candidates. An eigenvalue group that cannot
    /// beat the current best is not searched; it could not have replaced it.
    fn extreme(
        &self,
        signs: Option<&[f64]>,
        tol: &Tolerances,
        dir: Direction,
    ) -> Result<SupportCertificate> {
        let best = std::cell::RefCell::new(None::<SupportCertificate>);
        let skip = |lo: f64, hi: f64| match &*best.borrow() {
            Some(b) => match dir {
                Direction::Min => lo * (1.0 - GROUP_SLACK) >= b.value,
                Direction::Max => hi * (1.0 + GROUP_SLACK) <= b.value,
            },
            None => false,
        };
        self.for_each_candidate(signs, tol, skip, |c| {
            let mut best = best.borrow_mut();
            match &*best {
                Some(b) if !dir.better(c.value, b.value) => {}
                _ => *best = Some(c),
            }
        });
        best.into_inner()
            .ok_or_else(|| Error::Internal("empty cone candidate list".into()))
    }
}

#[derive(Clone, Copy)]
enum Direction {
    Min,
    Max,
}

impl Direction {
    /// Strictly better beyond the tie tolerance.
    fn better(self, a: f64, b: f64) -> bool {
        match self {
            Direction::Max => a > b + TIE_RTOL * b.abs(),
            Direction::Min => a < b - TIE_RTOL * b.abs(),
        }
    }
}

/// `|B[K]^T u|` for `u` supported on `K`.
fn factored_value(b: &Matrix, support: &[usize], u: &[f64]) -> f64 {
    let mut acc = vec![0.0; b.cols()];
    for (&i, &x) in support.iter().zip(u) {
        acc.iter_mut().zip(b.row(i)).for_each(|(a, bij)| *a += x * bij);
    }
    norm(&acc)
}

fn check_cap(m: usize, tol: &Tolerances) -> Result<()> {
    if m > tol.caps.cone_dim {
        return Err(Error::CapExceeded {
            what: "cone enumeration dimension",
            requested: m as u128,
            cap: tol.caps.cone_dim as u128,
        });
    }
    Ok(())
}

fn rayleigh(g: &Matrix, v: &[f64]) -> f64 {
    dot(v, &g.mul_vec(v))
}

/// Searches a multi-dimensional eigenspace for a nonnegative unit vector by
/// alternating projection between the span and the orthant from seeded
/// random starts.
fn nonneg_in_span(basis: &[Vec<f64>], support: &[usize], atol: f64) -> Option<Vec<f64>> {
    let k = basis[0].len();
    let seed = support
        .iter()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, &i| (h ^ i as u64).wrapping_mul(0x100_0000_01b3));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let project = |x: &[f64]| {
        let mut y = vec![0.0; k];
        for q in basis {
            let c = dot(q, x);
            y.iter_mut().zip(q).for_each(|(yi, qi)| *yi += c * qi);
        }
        y
    };
    for _ in 0..PROJECTION_STARTS {
        let mut x: Vec<f64> = (0..k)
            .map(|_| rng.sample::<f64, _>(StandardNormal).abs())
            .collect();
        for _ in 0..PROJECTION_ITERS {
            let mut y = project(&x);
            let ny = norm(&y);
            if ny < 1e-14 {
                break;
            }
            y.iter_mut().for_each(|v| *v /= ny);
            if y.iter().all(|&v| v >= -atol) {
                return Some(y);
            }
            if y.iter().all(|&v| v <= atol) {
                return Some(y.iter().map(|v| -v).collect());
            }
            x = y.iter().map(|v| v.max(0.0)).collect();
        }
    }
    None
}

/// Every support/eigenvector pair with a nonnegative representative.
pub fn cone_candidates(g: &Matrix, tol: &Tolerances) -> Result<Vec<SupportCertificate>> {
    Ok(ConeGram::new(g.clone(), tol)?.candidates(tol))
}

/// `max sqrt(v^T G v)` over unit `v >= 0`.
pub fn cone_max(g: &Matrix, tol: &Tolerances) -> Result<(f64, SupportCertificate)> {
    let cert = ConeGram::new(g.clone(), tol)?.max(tol)?;
    Ok((cert.value, cert))
}

/// `min sqrt(v^T G v)` over unit `v >= 0`.
pub fn cone_min(g: &Matrix, tol: &Tolerances) -> Result<(f64, SupportCertificate)> {
    let cert = ConeGram::new(g.clone(), tol)?.min(tol)?;
    Ok((cert.value, cert))
}
