//! Independent cross-checks for the enumeration formulas: random weights for
//! the weighted pseudo-inverse, exact polyhedral projections for empirical
//! error-bound ratios, and random cone samples for the Rayleigh extremes.
//!
//! Sampling is split into a fixed number of ChaCha streams derived from the
//! seed, so aggregates do not depend on the thread count.

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::densela::{cholesky, cholesky_solve, dot, norm, operator_norm, rank_of, Matrix, Tolerances};
use crate::error::{Error, Result};
use crate::measures::{check_full_column_rank, hoffman, wls_pseudoinverse};

const STREAMS: u64 = 64;
const DIRECTED_WEIGHT: f64 = 1e8;
/// The directed limit has relative error about `(|A| |A_J^{-1}|)^2 / w`.
const DIRECTED_ACCURACY: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RngConfig {
    pub seed: u64,
    pub sample_count: usize,
    /// Weights are drawn log-uniformly from `[10^-r, 10^r]`.
    pub weight_log_range: f64,
}

impl Default for RngConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            sample_count: 10_000,
            weight_log_range: 6.0,
        }
    }
}

impl RngConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.sample_count == 0 {
            return Err(Error::InvalidTolerance {
                name: "sample_count",
                value: 0.0,
            });
        }
        Ok(())
    }

    fn stream(&self, s: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(s);
        rng
    }

    /// Runs `f(rng, count)` once per stream, splitting `sample_count`.
    fn par_streams<T: Send>(&self, f: impl Fn(&mut ChaCha8Rng, usize) -> T + Sync) -> Vec<T> {
        let total = self.sample_count as u64;
        (0..STREAMS)
            .into_par_iter()
            .map(|s| {
                let count = total / STREAMS + u64::from(s < total % STREAMS);
                let mut rng = self.stream(s);
                f(&mut rng, count as usize)
            })
            .collect()
    }
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn log_uniform_weights(rng: &mut ChaCha8Rng, m: usize, range: f64) -> Vec<f64> {
    (0..m)
        .map(|_| 10f64.powf(rng.random_range(-range..=range)))
        .collect()
}

/// Best of the sampled `|A_D^+|` and the weights that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSample {
    pub best: f64,
    pub weights: Vec<f64>,
    pub evaluated: usize,
}

fn sample_weights(
    a: &Matrix,
    rng_cfg: &RngConfig,
    tol: &Tolerances,
    eval: impl Fn(&Matrix) -> f64 + Sync,
) -> Result<WeightSample> {
    rng_cfg.validate()?;
    check_full_column_rank(a, tol)?;
    let per_stream = rng_cfg.par_streams(|rng, count| {
        let mut best = (f64::NEG_INFINITY, Vec::new());
        let mut evaluated = 0;
        for _ in 0..count {
            let d = log_uniform_weights(rng, a.rows(), rng_cfg.weight_log_range);
            let Ok(p) = wls_pseudoinverse(a, &d, tol) else {
                continue;
            };
            evaluated += 1;
            let v = eval(&p);
            if v > best.0 {
                best = (v, d);
            }
        }
        (best, evaluated)
    });
    let evaluated = per_stream.iter().map(|s| s.1).sum();
    let ((best, weights), _) = per_stream
        .into_iter()
        .reduce(|x, y| if y.0 .0 > x.0 .0 { y } else { x })
        .expect("at least one stream");
    Ok(WeightSample {
        best,
        weights,
        evaluated,
    })
}

/// Lower bound for `chi(A)`: the largest `|A_D^+|` over random weights.
pub fn sample_chi_lower(a: &Matrix, rng: &RngConfig, tol: &Tolerances) -> Result<WeightSample> {
    sample_weights(a, rng, tol, operator_norm)
}

/// Lower bound for `chibar(A)`: the largest `|A A_D^+|` over random weights.
pub fn sample_chibar_lower(a: &Matrix, rng: &RngConfig, tol: &Tolerances) -> Result<WeightSample> {
    sample_weights(a, rng, tol, |p| operator_norm(&a.matmul(p).expect("shapes agree")))
}

/// `|A_D^+|` with a large weight `w` on the rows in `subset` and `1`
/// elsewhere. As `w` grows this tends to `|A_J^{-1}|`, with relative error
/// about `(|A| |A_J^{-1}|)^2 / w`, so `w` is `1e8` or large enough to push
/// that estimate below `1e-6`.
pub fn directed_chi_witness(a: &Matrix, subset: &[usize], tol: &Tolerances) -> Result<f64> {
    if let Some(&i) = subset.iter().find(|&&i| i >= a.rows()) {
        return Err(Error::DimensionMismatch {
            what: "subset index",
            expected: a.rows(),
            found: i,
        });
    }
    let (sigma_min, _) = crate::densela::sigma_extremes(&a.select_rows(subset));
    let amplification = operator_norm(a) / sigma_min.max(f64::MIN_POSITIVE);
    let weight = DIRECTED_WEIGHT.max(amplification * amplification / DIRECTED_ACCURACY);
    let mut d = vec![1.0; a.rows()];
    for &i in subset {
        d[i] = weight;
    }
    Ok(operator_norm(&wls_pseudoinverse(a, &d, tol)?))
}

/// Solution of `min |C z - d|` subject to `G z <= h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LsqSolution {
    pub z: Vec<f64>,
    /// Constraint rows held at equality, lexicographically first valid set.
    pub active: Vec<usize>,
    pub multipliers: Vec<f64>,
}

/// Exact inequality-constrained least squares by active-set enumeration.
///
/// Every row subset `F` with `G_F` of full row rank (sizes `0..=n`, then
/// lexicographic) gives the equality-constrained minimizer through its KKT
/// system; the first one that is primal and dual feasible is optimal since
/// the problem is convex. `C` must have full column rank.
pub fn constrained_lsq(
    c: &Matrix,
    d: &[f64],
    g: &Matrix,
    h: &[f64],
    tol: &Tolerances,
) -> Result<LsqSolution> {
    let n = c.cols();
    let p = g.rows();
    if d.len() != c.rows() {
        return Err(Error::DimensionMismatch {
            what: "constrained_lsq target",
            expected: c.rows(),
            found: d.len(),
        });
    }
    if g.cols() != n {
        return Err(Error::DimensionMismatch {
            what: "constrained_lsq constraint columns",
            expected: n,
            found: g.cols(),
        });
    }
    if h.len() != p {
        return Err(Error::DimensionMismatch {
            what: "constrained_lsq bounds",
            expected: p,
            found: h.len(),
        });
    }
    if p > tol.caps.constraint_rows {
        return Err(Error::CapExceeded {
            what: "active-set constraint rows",
            requested: p as u128,
            cap: tol.caps.constraint_rows as u128,
        });
    }

    let hess = c.gram();
    let l = cholesky(hess.as_slice(), n, tol.rank_rtol * tol.rank_rtol).ok_or(
        Error::RankDeficient {
            rank: rank_of(c, tol),
            cols: n,
        },
    )?;
    let mut z_free = c.tr_mul_vec(d);
    cholesky_solve(&l, n, &mut z_free);

    // y[j] = H^{-1} g_j, and the reduced matrix M = G H^{-1} G^T.
    let y: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            let mut col = g.row(j).to_vec();
            cholesky_solve(&l, n, &mut col);
            col
        })
        .collect();
    let mm: Vec<f64> = (0..p)
        .flat_map(|i| (0..p).map(move |j| (i, j)))
        .map(|(i, j)| dot(g.row(i), &y[j]))
        .collect();
    let resid: Vec<f64> = (0..p).map(|j| dot(g.row(j), &z_free) - h[j]).collect();
    let row_norms: Vec<f64> = (0..p).map(|j| norm(g.row(j))).collect();

    for size in 0..=p.min(n) {
        for active in (0..p).combinations(size) {
            let mut sub = vec![0.0; size * size];
            for (a, &i) in active.iter().enumerate() {
                for (b, &j) in active.iter().enumerate() {
                    sub[a * size + b] = mm[i * p + j];
                }
            }
            let Some(lf) = cholesky(&sub, size, 1e-12) else {
                continue;
            };
            let mut mu: Vec<f64> = active.iter().map(|&j| resid[j]).collect();
            cholesky_solve(&lf, size, &mut mu);
            let mu_scale = mu.iter().fold(1.0f64, |s, x| s.max(x.abs()));
            if mu.iter().any(|&x| x < -1e-9 * mu_scale) {
                continue;
            }
            let mut z = z_free.clone();
            for (&j, &mj) in active.iter().zip(&mu) {
                z.iter_mut().zip(&y[j]).for_each(|(zi, yi)| *zi -= mj * yi);
            }
            let zn = norm(&z);
            let primal = (0..p).all(|j| {
                dot(g.row(j), &z) <= h[j] + 1e-9 * (1.0 + h[j].abs() + row_norms[j] * zn)
            });
            if primal {
                return Ok(LsqSolution {
                    z,
                    active,
                    multipliers: mu,
                });
            }
        }
    }
    Err(Error::Infeasible)
}

/// Largest observed error-bound ratio.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioSample {
    pub max_ratio: f64,
    /// Samples that produced a ratio (infeasible starting points only).
    pub samples: usize,
}

fn positive_part_norm(r: &[f64]) -> f64 {
    norm(&r.iter().map(|x| x.max(0.0)).collect::<Vec<_>>())
}

/// Right-hand side `b = A xhat + p` with a sparse nonnegative `p`, so that
/// `{x : A x <= b}` is nonempty by construction.
fn feasible_rhs(a: &Matrix, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let xhat = gaussian(rng, a.cols());
    let scale = 10f64.powf(rng.random_range(-2.0..=1.0));
    a.mul_vec(&xhat)
        .into_iter()
        .map(|v| {
            if rng.random_bool(0.5) {
                v
            } else {
                v + scale * rng.sample::<f64, _>(StandardNormal).abs()
            }
        })
        .collect()
}

fn ratio_samples(
    rng_cfg: &RngConfig,
    one: impl Fn(&mut ChaCha8Rng) -> Result<Option<f64>> + Sync,
) -> Result<RatioSample> {
    rng_cfg.validate()?;
    let per_stream = rng_cfg.par_streams(|rng, count| {
        let mut best = f64::NEG_INFINITY;
        let mut samples = 0;
        for _ in 0..count {
            if let Some(r) = one(rng)? {
                samples += 1;
                best = best.max(r);
            }
        }
        Ok::<_, Error>((best, samples))
    });
    let mut out = RatioSample {
        max_ratio: f64::NEG_INFINITY,
        samples: 0,
    };
    for s in per_stream {
        let (best, samples) = s?;
        out.max_ratio = out.max_ratio.max(best);
        out.samples += samples;
    }
    if out.samples == 0 {
        out.max_ratio = 0.0;
    }
    Ok(out)
}

/// `dist(x0, {x : A x <= b}) / |(A x0 - b)_+|` over random `b` in
/// `A(R^n) + R^m_+` and random `x0`. Never exceeds `H(A)`.
pub fn hoffman_ratio_sample(a: &Matrix, rng: &RngConfig, tol: &Tolerances) -> Result<RatioSample> {
    check_full_column_rank(a, tol)?;
    let n = a.cols();
    let eye = Matrix::identity(n);
    ratio_samples(rng, |r| {
        let b = feasible_rhs(a, r);
        let spread = 10f64.powf(r.random_range(-2.0..=1.0));
        let x0: Vec<f64> = gaussian(r, n).iter().map(|x| x * spread).collect();
        let viol: Vec<f64> = a.mul_vec(&x0).iter().zip(&b).map(|(p, q)| p - q).collect();
        let denom = positive_part_norm(&viol);
        if denom == 0.0 {
            return Ok(None);
        }
        let sol = constrained_lsq(&eye, &x0, a, &b, tol)?;
        let dist = norm(&sol.z.iter().zip(&x0).map(|(p, q)| p - q).collect::<Vec<_>>());
        Ok(Some(dist / denom))
    })
}

/// `dist(y, A P_A(b)) / |(y - b)_+|` for random `y` in `range(A)`, with the
/// distance measured in the image (`min |A z - y|` subject to `A z <= b`).
/// Never exceeds `Hbar(A)`.
pub fn hoffmanbar_ratio_sample(a: &Matrix, rng: &RngConfig, tol: &Tolerances) -> Result<RatioSample> {
    check_full_column_rank(a, tol)?;
    let n = a.cols();
    ratio_samples(rng, |r| {
        let b = feasible_rhs(a, r);
        let spread = 10f64.powf(r.random_range(-2.0..=1.0));
        let zhat: Vec<f64> = gaussian(r, n).iter().map(|x| x * spread).collect();
        let y = a.mul_vec(&zhat);
        let viol: Vec<f64> = y.iter().zip(&b).map(|(p, q)| p - q).collect();
        let denom = positive_part_norm(&viol);
        if denom == 0.0 {
            return Ok(None);
        }
        let sol = constrained_lsq(a, &y, a, &b, tol)?;
        let az = a.mul_vec(&sol.z);
        let dist = norm(&az.iter().zip(&y).map(|(p, q)| p - q).collect::<Vec<_>>());
        Ok(Some(dist / denom))
    })
}

/// The error-bound ratio at the instance built from the Hoffman certificate:
/// `x0 = 0`, `b_J = -v_J` on the argmax subset and slack elsewhere. By
/// duality its ratio equals `H(A)`.
pub fn hoffman_ratio_adversarial(a: &Matrix, tol: &Tolerances) -> Result<f64> {
    let h = hoffman(a, tol)?;
    let subset = h.argmax_subset.expect("hoffman reports its subset");
    let v = h.witness.expect("hoffman reports its witness");
    let aj = a.select_rows(&subset);
    let rhs: Vec<f64> = subset.iter().map(|&i| -v[i]).collect();
    let xt = crate::densela::solve_square(&aj, &rhs, tol)?;
    let axt = a.mul_vec(&xt);
    let b: Vec<f64> = (0..a.rows())
        .map(|i| {
            if subset.contains(&i) {
                -v[i]
            } else {
                axt[i].max(0.0) + 1.0
            }
        })
        .collect();
    let n = a.cols();
    let x0 = vec![0.0; n];
    let denom = positive_part_norm(&b.iter().map(|x| -x).collect::<Vec<_>>());
    let sol = constrained_lsq(&Matrix::identity(n), &x0, a, &b, tol)?;
    Ok(norm(&sol.z) / denom)
}

/// Smallest and largest `sqrt(v^T G v)` over random unit `v >= 0`.
pub fn cone_sample_check(g: &Matrix, rng: &RngConfig, tol: &Tolerances) -> Result<(f64, f64)> {
    rng.validate()?;
    crate::coneig::ConeGram::new(g.clone(), tol)?;
    let m = g.rows();
    let per_stream = rng.par_streams(|r, count| {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for _ in 0..count {
            let mut v: Vec<f64> = gaussian(r, m).into_iter().map(f64::abs).collect();
            let nv = norm(&v);
            if nv == 0.0 {
                continue;
            }
            v.iter_mut().for_each(|x| *x /= nv);
            let q = dot(&v, &g.mul_vec(&v)).max(0.0).sqrt();
            lo = lo.min(q);
            hi = hi.max(q);
        }
        (lo, hi)
    });
    Ok(per_stream
        .into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| {
            (lo.min(a), hi.max(b))
        }))
}

/// Standard normal matrix, redrawn until it has full column rank.
pub fn random_full_rank(rng: &mut ChaCha8Rng, m: usize, n: usize, tol: &Tolerances) -> Matrix {
    loop {
        let a = Matrix::new(m, n, gaussian(rng, m * n)).expect("finite entries");
        if rank_of(&a, tol) == n {
            return a;
        }
    }
}

/// Random non-singular `n x n` matrix with condition number at most `max_cond`.
pub fn random_nonsingular(rng: &mut ChaCha8Rng, n: usize, max_cond: f64) -> Matrix {
    loop {
        let r = Matrix::new(n, n, gaussian(rng, n * n)).expect("finite entries");
        let (lo, hi) = crate::densela::sigma_extremes(&r);
        if lo > 0.0 && hi / lo <= max_cond {
            return r;
        }
    }
}

/// Seeded corpus of standard normal full-column-rank matrices with
/// `m` in `2..=7` and `n` in `1..=min(4, m)`.
pub fn random_corpus(seed: u64, count: usize, tol: &Tolerances) -> Vec<Matrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let m = rng.random_range(2..=7);
            let n = rng.random_range(1..=m.min(4));
            random_full_rank(&mut rng, m, n, tol)
        })
        .collect()
}
