//! `condmeas`: compute condition measures of a small dense matrix, scan row
//! signatures, and verify the identities linking the measures.

mod input;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use condmeas_core::measures::RENEGAR_NOTE;
use condmeas_core::oracle::{
    cone_sample_check, constrained_lsq, directed_chi_witness, hoffman_ratio_sample,
    hoffmanbar_ratio_sample, sample_chi_lower, sample_chibar_lower, RngConfig,
};
use condmeas_core::{
    chi, cone_max, cone_min, hoffman, hoffmanbar, signed_max_hoffman, verify_identities,
    wls_pseudoinverse, Caps, Error, Matrix, MeasureKind, MeasureResult, Tolerances,
    VerificationReport,
};
use serde_json::Value;

use crate::input::{load_matrix, parse_vector, Format, Loaded};
use crate::report::{to_value, Phases, ReportDocument};

const EXIT_INPUT: u8 = 1;
const EXIT_VERIFICATION: u8 = 2;
const EXIT_CAP: u8 = 3;

#[derive(Debug)]
pub enum CliError {
    /// I/O, parsing, or flag validation failure.
    Input(String),
    /// A library error, with the flag or file it concerns.
    Core { context: String, error: Error },
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(msg) => f.write_str(msg),
            CliError::Core { context, error } => write!(f, "{context}: {error}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core { error, .. } if error.is_cap() => EXIT_CAP,
            _ => EXIT_INPUT,
        }
    }
}

fn core_err(context: impl Into<String>) -> impl FnOnce(Error) -> CliError {
    let context = context.into();
    move |error| CliError::Core { context, error }
}

#[derive(Parser)]
#[command(name = "condmeas", version, about = "Exact condition measures of small dense matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Matrix file (.csv: one row per line; .json: {"rows": [[...], ...]}).
    #[arg(long)]
    input: PathBuf,
    /// Override the format inferred from the file extension.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Indent the JSON report.
    #[arg(long)]
    pretty: bool,
    /// Raise the enumeration caps; validation still applies.
    #[arg(long)]
    force: bool,
    /// Relative singularity threshold for square submatrices.
    #[arg(long = "tol", alias = "rank-rtol", default_value_t = Tolerances::default().rank_rtol)]
    rank_rtol: f64,
    /// Slack for nonnegativity of cone eigenvectors.
    #[arg(long, default_value_t = Tolerances::default().nonneg_atol)]
    nonneg_atol: f64,
    /// Threshold on R(A) below which A x > 0 counts as infeasible.
    #[arg(long, default_value_t = Tolerances::default().feas_tol)]
    feas_tol: f64,
    /// Relative tolerance for identity checks.
    #[arg(long, default_value_t = Tolerances::default().verify_rtol)]
    verify_rtol: f64,
    /// Add wall-clock phase timings (makes the report non-reproducible).
    #[arg(long)]
    timings: bool,
}

impl Common {
    fn tolerances(&self) -> Result<Tolerances, CliError> {
        let tol = Tolerances {
            rank_rtol: self.rank_rtol,
            nonneg_atol: self.nonneg_atol,
            feas_tol: self.feas_tol,
            verify_rtol: self.verify_rtol,
            caps: if self.force { Caps::forced() } else { Caps::default() },
        };
        tol.validate().map_err(|e| match e {
            Error::InvalidTolerance { name, value } => {
                let flag = if name == "rank_rtol" { "tol".to_string() } else { name.replace('_', "-") };
                CliError::Input(format!("--{flag}: {value} is outside (0, 1e-2)"))
            }
            other => CliError::Input(other.to_string()),
        })?;
        Ok(tol)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compute condition measures.
    Compute {
        #[command(flatten)]
        common: Common,
        /// Comma-separated subset of chi,chibar,hoffman,hoffmanbar,renegar,grassmann.
        #[arg(long, value_delimiter = ',', value_parser = parse_kind)]
        measures: Option<Vec<MeasureKind>>,
    },
    /// Maximize H(SA) over row-sign matrices S and compare with chi(A).
    ScanSigned {
        #[command(flatten)]
        common: Common,
        /// Only consider signatures with S A x > 0 solvable.
        #[arg(long)]
        filter_feasible: bool,
        /// Recorded in the report; the scan itself is deterministic.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check every identity between the measures plus sampling bounds.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Samples per oracle.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    /// Euclidean projection of a point onto {x : A x <= b}.
    Project {
        #[command(flatten)]
        common: Common,
        /// Comma-separated point x0 (n entries).
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        /// Comma-separated right-hand side b (m entries).
        #[arg(long, allow_hyphen_values = true)]
        rhs: String,
    },
    /// Weighted least-squares solution (A^T D A)^{-1} A^T D b.
    Wls {
        #[command(flatten)]
        common: Common,
        /// Comma-separated positive weights (m entries).
        #[arg(long, allow_hyphen_values = true)]
        weights: String,
        /// Comma-separated right-hand side b (m entries).
        #[arg(long, allow_hyphen_values = true)]
        rhs: String,
    },
}

fn parse_kind(s: &str) -> Result<MeasureKind, String> {
    s.parse()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code());
    }
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("CONDMEAS_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Input(format!("CONDMEAS_THREADS: expected a positive integer, found {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Input(format!("CONDMEAS_THREADS: {e}")))
}

fn run(command: Command) -> Result<u8, CliError> {
    let (common, doc) = match command {
        Command::Compute { common, measures } => {
            let doc = compute(&common, measures.unwrap_or_else(|| MeasureKind::ALL.to_vec()))?;
            (common, doc)
        }
        Command::ScanSigned {
            common,
            filter_feasible,
            seed,
        } => {
            let doc = scan_signed(&common, filter_feasible, seed)?;
            (common, doc)
        }
        Command::Verify {
            common,
            seed,
            samples,
        } => {
            let doc = verify(&common, seed, samples)?;
            (common, doc)
        }
        Command::Project { common, point, rhs } => {
            let doc = project(&common, &point, &rhs)?;
            (common, doc)
        }
        Command::Wls {
            common,
            weights,
            rhs,
        } => {
            let doc = wls(&common, &weights, &rhs)?;
            (common, doc)
        }
    };
    let text = doc.render(common.pretty);
    match &common.output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Input(format!("--output {}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    Ok(if doc.all_pass() { 0 } else { EXIT_VERIFICATION })
}

struct Session {
    tol: Tolerances,
    a: Matrix,
    doc: ReportDocument,
    phases: Phases,
}

fn open(common: &Common, command: &'static str) -> Result<Session, CliError> {
    let tol = common.tolerances()?;
    let mut phases = Phases::new(common.timings);
    let Loaded { bytes, matrix } = load_matrix(&common.input, common.format)?;
    phases.mark("parse");
    let mut doc = ReportDocument::new(
        command,
        &common.input.display().to_string(),
        &bytes,
        &matrix,
        tol,
    );
    if common.force {
        doc.warn("--force: enumeration caps raised");
    }
    Ok(Session {
        tol,
        a: matrix,
        doc,
        phases,
    })
}

impl Session {
    fn input_ctx(&self) -> String {
        format!("--input {}", self.doc.input["path"].as_str().unwrap_or_default())
    }

    fn push_measure(&mut self, r: MeasureResult) {
        if r.degenerate {
            self.doc.warn(format!(
                "{}: certificate found in a repeated eigenvalue group; the support search there is heuristic",
                r.kind
            ));
        }
        if r.kind == MeasureKind::Renegar {
            self.doc.warn(format!("renegar: {RENEGAR_NOTE}"));
        }
        self.doc.measures.push(r);
    }

    /// Renegar and Grassmann need `A x > 0` solvable; otherwise R(A) = 0
    /// and G(A) is unbounded.
    fn measure(&mut self, kind: MeasureKind) -> Result<(), CliError> {
        match kind.compute(&self.a, &self.tol) {
            Ok(r) => self.push_measure(r),
            Err(Error::NotStrictlyFeasible {
                certificate,
                residual,
            }) => {
                let note = format!(
                    "A x > 0 has no solution: v >= 0 with |A^T v| = {residual:e} certifies it"
                );
                if kind == MeasureKind::Renegar {
                    self.push_measure(MeasureResult {
                        kind,
                        value: 0.0,
                        argmax_subset: None,
                        ties: Vec::new(),
                        witness: Some(certificate),
                        degenerate: false,
                        notes: vec![note],
                    });
                } else {
                    self.doc.warn(format!("{kind}: omitted, unbounded; {note}"));
                }
            }
            Err(e) => return Err(core_err(format!("{} ({kind})", self.input_ctx()))(e)),
        }
        Ok(())
    }

    fn finish(mut self) -> ReportDocument {
        self.phases.mark("emit");
        self.doc.timings = self.phases.finish();
        self.doc
    }
}

fn compute(common: &Common, kinds: Vec<MeasureKind>) -> Result<ReportDocument, CliError> {
    let mut s = open(common, "compute")?;
    let mut seen = Vec::new();
    for kind in kinds {
        if !seen.contains(&kind) {
            seen.push(kind);
            s.measure(kind)?;
            s.phases.mark(kind.name());
        }
    }
    Ok(s.finish())
}

fn scan_signed(common: &Common, filter: bool, seed: Option<u64>) -> Result<ReportDocument, CliError> {
    let mut s = open(common, "scan-signed")?;
    s.doc.seed = seed;
    let ctx = s.input_ctx();
    let max = signed_max_hoffman(&s.a, filter, &s.tol).map_err(core_err(ctx.clone()))?;
    s.phases.mark("scan");
    s.measure(MeasureKind::Chi)?;
    s.doc.verifications.push(max.report.clone());
    s.doc.result.insert("filter_feasible".into(), filter.into());
    s.doc.result.insert("signed_max".into(), to_value(&max));
    Ok(s.finish())
}

fn verify(common: &Common, seed: u64, samples: usize) -> Result<ReportDocument, CliError> {
    let mut s = open(common, "verify")?;
    s.doc.seed = Some(seed);
    if samples == 0 {
        return Err(CliError::Input("--samples: must be at least 1".into()));
    }
    let ctx = s.input_ctx();
    let (a, tol) = (s.a.clone(), s.tol);
    let v = verify_identities(&a, &tol).map_err(core_err(ctx.clone()))?;
    s.phases.mark("identities");
    let h = hoffman(&a, &tol).map_err(core_err(ctx.clone()))?;
    let hb = hoffmanbar(&a, &tol).map_err(core_err(ctx.clone()))?;
    let chi_value = v.chi.value;
    let chibar_value = v.chibar.value;
    let chi_subset = v.chi.argmax_subset.clone().unwrap_or_default();
    s.push_measure(v.chi.clone());
    s.push_measure(v.chibar.clone());
    s.push_measure(h.clone());
    s.push_measure(hb.clone());
    s.measure(MeasureKind::Renegar)?;
    s.measure(MeasureKind::Grassmann)?;
    s.doc.verifications.extend(v.reports.iter().cloned());

    let rng = RngConfig {
        seed,
        sample_count: samples,
        ..RngConfig::default()
    };
    let rtol = tol.verify_rtol;
    let mut oracle = Vec::new();
    let w = sample_chi_lower(&a, &rng, &tol).map_err(core_err(ctx.clone()))?;
    oracle.push(VerificationReport::bound(
        "oracle.chi",
        "sampled |A_D^+| <= chi(A)",
        w.best,
        chi_value,
        rtol,
    ));
    let w = sample_chibar_lower(&a, &rng, &tol).map_err(core_err(ctx.clone()))?;
    oracle.push(VerificationReport::bound(
        "oracle.chibar",
        "sampled |A A_D^+| <= chibar(A)",
        w.best,
        chibar_value,
        rtol,
    ));
    let d = directed_chi_witness(&a, &chi_subset, &tol).map_err(core_err(ctx.clone()))?;
    oracle.push(
        VerificationReport::bound(
            "oracle.directed",
            "0.999 chi(A) <= |A_D^+| with weight 1e8 on the argmax rows",
            0.999 * chi_value,
            d,
            0.0,
        )
        .with_subset(Some(chi_subset)),
    );
    s.phases.mark("oracle.weights");
    let r = hoffman_ratio_sample(&a, &rng, &tol).map_err(core_err(ctx.clone()))?;
    oracle.push(VerificationReport::bound(
        "oracle.hoffman",
        "sampled dist(x, P(b)) / |(A x - b)_+| <= H(A)",
        r.max_ratio,
        h.value,
        rtol,
    ));
    let r = hoffmanbar_ratio_sample(&a, &rng, &tol).map_err(core_err(ctx.clone()))?;
    oracle.push(VerificationReport::bound(
        "oracle.hoffmanbar",
        "sampled dist(y, A P(b)) / |(y - b)_+| <= Hbar(A)",
        r.max_ratio,
        hb.value,
        rtol,
    ));
    s.phases.mark("oracle.projections");
    let g = a.outer_gram();
    let (lo, hi) = cone_sample_check(&g, &rng, &tol).map_err(core_err(ctx.clone()))?;
    let (cmax, _) = cone_max(&g, &tol).map_err(core_err(ctx.clone()))?;
    let (cmin, _) = cone_min(&g, &tol).map_err(core_err(ctx.clone()))?;
    oracle.push(VerificationReport::bound(
        "oracle.cone.max",
        "sampled |A^T v| <= max over unit v >= 0",
        hi,
        cmax,
        rtol,
    ));
    oracle.push(VerificationReport::bound(
        "oracle.cone.min",
        "min over unit v >= 0 <= sampled |A^T v|",
        cmin,
        lo,
        rtol,
    ));
    s.phases.mark("oracle.cone");
    s.doc.verifications.extend(oracle);
    s.doc.result.insert("signed_scan".into(), to_value(&v.scan));
    s.doc.result.insert("samples".into(), Value::from(samples));
    Ok(s.finish())
}

fn project(common: &Common, point: &str, rhs: &str) -> Result<ReportDocument, CliError> {
    let mut s = open(common, "project")?;
    let (a, tol) = (s.a.clone(), s.tol);
    let x0 = parse_vector("--point", point, a.cols())?;
    let b = parse_vector("--rhs", rhs, a.rows())?;
    let sol = match constrained_lsq(&Matrix::identity(a.cols()), &x0, &a, &b, &tol) {
        Err(Error::Infeasible) => {
            return Err(CliError::Input(
                "--rhs: the system A x <= b has no solution".into(),
            ))
        }
        other => other.map_err(core_err(s.input_ctx()))?,
    };
    s.phases.mark("projection");
    let diff: Vec<f64> = sol.z.iter().zip(&x0).map(|(p, q)| p - q).collect();
    let dist = condmeas_core::densela::norm(&diff);
    let viol: Vec<f64> = a
        .mul_vec(&x0)
        .iter()
        .zip(&b)
        .map(|(p, q)| (p - q).max(0.0))
        .collect();
    let viol = condmeas_core::densela::norm(&viol);
    s.measure(MeasureKind::Hoffman)?;
    let h = s.doc.measures[0].value;
    s.doc.verifications.push(VerificationReport::bound(
        "project.hoffman",
        "dist(x0, {x : A x <= b}) <= H(A) |(A x0 - b)_+|",
        dist,
        h * viol,
        tol.verify_rtol,
    ));
    s.doc.result.insert("projection".into(), to_value(&sol));
    s.doc.result.insert("distance".into(), dist.into());
    s.doc.result.insert("violation".into(), viol.into());
    Ok(s.finish())
}

fn wls(common: &Common, weights: &str, rhs: &str) -> Result<ReportDocument, CliError> {
    let mut s = open(common, "wls")?;
    let (a, tol) = (s.a.clone(), s.tol);
    let d = parse_vector("--weights", weights, a.rows())?;
    let b = parse_vector("--rhs", rhs, a.rows())?;
    let p = wls_pseudoinverse(&a, &d, &tol).map_err(|e| match e {
        Error::NonPositiveWeight { index, value } => CliError::Input(format!(
            "--weights: entry {} is {value}; weights must be positive",
            index + 1
        )),
        other => core_err(s.input_ctx())(other),
    })?;
    s.phases.mark("wls");
    let x = p.mul_vec(&b);
    let pn = condmeas_core::operator_norm(&p);
    let c = chi(&a, &tol).map_err(core_err(s.input_ctx()))?;
    s.doc.verifications.push(VerificationReport::bound(
        "wls.chi",
        "|A_D^+| <= chi(A)",
        pn,
        c.value,
        tol.verify_rtol,
    ));
    s.push_measure(c);
    s.doc.result.insert("solution".into(), to_value(&x));
    s.doc.result.insert("pseudoinverse_norm".into(), pn.into());
    Ok(s.finish())
}
