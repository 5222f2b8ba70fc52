//! Command-line front end and the `analyze` pipeline.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::blowup::{chart_table, ChartTable};
use crate::error::{Error, Result};
use crate::fenergy::{estimate_lambda, FEnergyConfig, FEnergyEstimate};
use crate::kseries::{
    k_expansion, leading_form, verify_prop1, verify_prop_taylor, verify_vanishing, KExpansion,
    Prop1Report, PropTaylorReport, VanishingReport, MAX_ENUMERATION_ORDER,
};
use crate::modelspec::{parse_model, ModelSpec};
use crate::normalize::{
    audit, check_assumption3, normalize_model, Assumption3Config, Assumption3Status, NormalizationResult,
    NormalizeConfig, VanishingOrder, DEFAULT_M_CAP,
};
use crate::par::Exec;
use crate::rlct::{assemble_report, AnalysisReport, CheckStatus, KChecks, Semantics};
use crate::scalar::Q;
use crate::stochlin::{gram, gram_rank_kernel, span_dimension};

#[derive(Parser, Debug)]
#[command(name = "rlct", version, about = "Real log canonical thresholds of semi-regular models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Full pipeline: normalization, checks, charts and the λ report.
    Analyze(CommonArgs),
    /// Taylor coefficients of K and the vanishing-pattern check.
    Ktaylor(CommonArgs),
    /// Blow-up chart table.
    Blowup(CommonArgs),
    /// Empirical λ from free-energy growth.
    Fenergy(FenergyArgs),
    /// Identity oracles only.
    Verify(CommonArgs),
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    pub model: PathBuf,
    #[arg(long, default_value_t = DEFAULT_M_CAP)]
    pub m_cap: u32,
    #[arg(long)]
    pub cap: Option<u32>,
    #[arg(long)]
    pub json: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Run every loop on one thread.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Args, Debug, Clone)]
pub struct FenergyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    #[arg(long, default_value_t = 200)]
    pub replicates: usize,
    #[arg(long, value_delimiter = ',')]
    pub n_schedule: Option<Vec<usize>>,
}

impl CommonArgs {
    fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::Parallel
        }
    }

    pub fn options(&self) -> AnalyzeOptions {
        AnalyzeOptions {
            normalize: NormalizeConfig {
                m_cap: self.m_cap,
                cap: self.cap,
                exec: self.exec(),
            },
            assumption3: Assumption3Config {
                seed: self.seed,
                exec: self.exec(),
                ..Default::default()
            },
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct AnalyzeOptions {
    pub normalize: NormalizeConfig,
    pub assumption3: Assumption3Config,
}

#[derive(Clone, Debug)]
pub struct Analysis {
    pub report: AnalysisReport,
    pub normalization: NormalizationResult,
    pub k: KExpansion,
    pub vanishing: VanishingReport,
    pub prop1: Prop1Report,
    pub prop_taylor: Option<PropTaylorReport>,
    pub table: Option<ChartTable>,
}

pub fn load_model(path: &Path) -> Result<(String, ModelSpec)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidModel(format!("{}: {e}", path.display())))?;
    let id = path
        .file_stem()
        .map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned());
    Ok((id, parse_model(&text)?))
}

fn check_inputs(spec: &ModelSpec) -> Result<()> {
    let diag = spec.check_model(MAX_ENUMERATION_ORDER as u32)?;
    if !diag.passed() {
        return Err(Error::InvalidModel(format!(
            "probabilities do not sum to one (first offending index {:?}), negative outcomes {:?}",
            diag.offending_index, diag.negative_outcomes
        )));
    }
    Ok(())
}

pub fn analyze(id: &str, spec: &ModelSpec, opts: &AnalyzeOptions) -> Result<Analysis> {
    check_inputs(spec)?;
    let res = normalize_model(spec, &opts.normalize)?;
    let a3 = check_assumption3(&res, &opts.assumption3)?;
    let k = k_expansion(&res)?;
    let vanishing = verify_vanishing(&k);
    let leading_ok = match res.m {
        VanishingOrder::Finite(m) => {
            match leading_form(&res.f_jets, &res.support, &k.poly, res.r, m) {
                Ok(_) => true,
                Err(Error::MismatchDetected { .. }) => false,
                Err(e) => return Err(e),
            }
        }
        VanishingOrder::MaxedOut(_) => true,
    };
    let prop1 = verify_prop1(spec, MAX_ENUMERATION_ORDER as u32)?;
    let prop_taylor = match res.m {
        VanishingOrder::Finite(m) if 2 * m as usize <= MAX_ENUMERATION_ORDER => {
            Some(verify_prop_taylor(&res)?)
        }
        _ => None,
    };
    let aud = audit(&res)?;
    let table = match res.m {
        VanishingOrder::Finite(_) => Some(chart_table(&k.poly, &res, &a3, opts.normalize.exec)?),
        VanishingOrder::MaxedOut(_) => None,
    };
    let checks = KChecks {
        vanishing: (vanishing.passed() && leading_ok).into(),
        prop1: prop1.passed().into(),
        prop_taylor: prop_taylor
            .as_ref()
            .map_or(CheckStatus::Skipped, |p| p.passed().into()),
        normalization: (aud.lower_orders_vanish && aud.full_rank).into(),
    };
    let report = assemble_report(id, &res, &a3, &checks, table.as_ref())?;
    Ok(Analysis {
        report,
        normalization: res,
        k,
        vanishing,
        prop1,
        prop_taylor,
        table,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub model_id: String,
    pub prop1: Prop1Report,
    pub prop_taylor: Option<PropTaylorReport>,
    /// `rank(Gram) = dim span` for the first derivatives at θ*.
    pub rank_identity: bool,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.prop1.passed() && self.prop_taylor.as_ref().is_none_or(|p| p.passed()) && self.rank_identity
    }
}

pub fn verify(id: &str, spec: &ModelSpec, opts: &AnalyzeOptions) -> Result<VerifyReport> {
    check_inputs(spec)?;
    let prop1 = verify_prop1(spec, MAX_ENUMERATION_ORDER as u32)?;
    let d = spec.dim();
    let jets = spec.support_f_jets::<crate::scalar::Rational>(1)?;
    let rvs: Vec<_> = (0..d)
        .map(|k| crate::normalize::derivative_rv(&jets, &crate::jets::MultiIndex::unit(d, k)))
        .collect();
    let support = crate::stochlin::Support::from_true_distribution(&spec.true_distribution());
    let (rank, _) = gram_rank_kernel(&gram(&rvs, &support)?);
    let rank_identity = rank == span_dimension(&rvs);
    let prop_taylor = match normalize_model(spec, &opts.normalize) {
        Ok(res) => match res.m {
            VanishingOrder::Finite(m) if 2 * m as usize <= MAX_ENUMERATION_ORDER => {
                Some(verify_prop_taylor(&res)?)
            }
            _ => None,
        },
        Err(Error::NotSemiRegular) => None,
        Err(e) => return Err(e),
    };
    Ok(VerifyReport {
        model_id: id.into(),
        prop1,
        prop_taylor,
        rank_identity,
    })
}

fn status_word(s: CheckStatus) -> &'static str {
    match s {
        CheckStatus::Pass => "pass",
        CheckStatus::Fail => "FAIL",
        CheckStatus::Skipped => "skipped",
    }
}

fn ratio_text(q: &Option<Q>) -> String {
    q.as_ref().map_or_else(|| "inf".into(), |v| v.to_string())
}

fn assumption3_text(a: &Assumption3Status) -> String {
    match a {
        Assumption3Status::AllDirectionsII => "AllDirectionsII".into(),
        Assumption3Status::DirectionIFound(t) => {
            let parts: Vec<String> = t.iter().map(|v| v.to_string()).collect();
            format!("DirectionIFound ({})", parts.join(", "))
        }
        Assumption3Status::NumericallyVerifiedII { min_value, samples } => {
            format!("NumericallyVerifiedII (min {min_value:.3e} over {samples} starts)")
        }
        Assumption3Status::Inconclusive => "Inconclusive".into(),
    }
}

pub fn report_text(a: &AnalysisReport) -> String {
    let mut s = String::new();
    let m = match a.vanishing_order {
        VanishingOrder::Finite(m) => m.to_string(),
        VanishingOrder::MaxedOut(c) => format!("> {c} (maxed out)"),
    };
    s += &format!("model: {}\n", a.model_id);
    s += &format!("d = {}, r = {}, m = {}\n", a.d, a.r, m);
    s += &format!("lambda = {} (multiplicity {})\n", a.lambda, a.multiplicity);
    s += &format!("assumption 3: {}\n", assumption3_text(&a.assumption3));
    s += &format!(
        "semantics: {}\n",
        match a.semantics {
            Semantics::ExactRLCTAtPoint => "ExactRLCTAtPoint",
            Semantics::UpperBoundOnly => "UpperBoundOnly",
        }
    );
    if a.global {
        s += "realizable set is the single point θ*: lambda is the learning coefficient\n";
    }
    if !a.transforms.is_empty() {
        s += "transforms:\n";
        for t in &a.transforms {
            let coeffs: Vec<String> = t.coefficients.iter().map(|c| c.to_string()).collect();
            s += &format!(
                "  targets {:?} += [{}] * {} * θ^{:?}\n",
                t.targets,
                coeffs.join(", "),
                t.normalizer,
                t.monomial.exponents()
            );
        }
    }
    s += "verifications:\n";
    for v in &a.verifications {
        s += &format!("  {:<18} {}\n", v.name, status_word(v.status));
    }
    for c in &a.caveats {
        s += &format!("note: {c}\n");
    }
    s
}

pub fn table_text(t: &ChartTable) -> String {
    let fmt = |v: &[u32]| {
        let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        format!("({})", parts.join(","))
    };
    let mut s = format!("{:<10} {:<14} {:<14} {:<8} unit\n", "chart", "k", "h", "lambda");
    for r in &t.rows {
        s += &format!(
            "{:<10} {:<14} {:<14} {:<8} {}\n",
            r.label,
            fmt(r.k.exponents()),
            fmt(r.h.exponents()),
            ratio_text(&r.chart_lambda),
            if r.unit.passed {
                "positive".to_string()
            } else {
                format!("vanishes at {} grid point(s)", r.unit.failing_points.len())
            }
        );
    }
    s += &format!(
        "overall lambda = {} (multiplicity {})\n",
        ratio_text(&t.lambda),
        t.multiplicity
    );
    s
}

#[derive(Serialize)]
struct KTaylorOut<'a> {
    model_id: &'a str,
    cap: u32,
    r: usize,
    m: VanishingOrder,
    coefficients: Vec<(Vec<u32>, Q)>,
    vanishing: &'a VanishingReport,
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes")
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InconsistentVerifications(_) | Error::MismatchDetected { .. } => 2,
        _ => 1,
    }
}

fn execute(cmd: &Command, out: &mut dyn Write) -> Result<i32> {
    let io = |e: std::io::Error| Error::InvalidConfig(e.to_string());
    match cmd {
        Command::Analyze(c) => {
            let (id, spec) = load_model(&c.model)?;
            let a = analyze(&id, &spec, &c.options())?;
            if c.json {
                writeln!(out, "{}", to_json(&a.report)).map_err(io)?;
            } else {
                write!(out, "{}", report_text(&a.report)).map_err(io)?;
            }
            Ok(if a.report.all_passed() { 0 } else { 2 })
        }
        Command::Ktaylor(c) => {
            let (id, spec) = load_model(&c.model)?;
            check_inputs(&spec)?;
            let res = normalize_model(&spec, &c.options().normalize)?;
            let k = k_expansion(&res)?;
            let van = verify_vanishing(&k);
            let mut coefficients: Vec<(Vec<u32>, Q)> = k
                .poly
                .terms()
                .map(|(a, v)| (a.exponents().to_vec(), Q(v.clone())))
                .collect();
            coefficients.sort_by(|a, b| {
                let da: u32 = a.0.iter().sum();
                let db: u32 = b.0.iter().sum();
                da.cmp(&db).then_with(|| b.0.cmp(&a.0))
            });
            if c.json {
                let o = KTaylorOut {
                    model_id: &id,
                    cap: k.cap,
                    r: k.r,
                    m: k.m,
                    coefficients,
                    vanishing: &van,
                };
                writeln!(out, "{}", to_json(&o)).map_err(io)?;
            } else {
                writeln!(out, "K up to total degree {} (normalized coordinates)", k.cap).map_err(io)?;
                for (a, v) in &coefficients {
                    writeln!(out, "  {:?}  {}", a, v).map_err(io)?;
                }
                writeln!(
                    out,
                    "vanishing pattern: {} ({} coefficients checked, {} nonzero)",
                    if van.passed() { "pass" } else { "FAIL" },
                    van.checked,
                    van.violations.len()
                )
                .map_err(io)?;
            }
            Ok(if van.passed() { 0 } else { 2 })
        }
        Command::Blowup(c) => {
            let (_, spec) = load_model(&c.model)?;
            check_inputs(&spec)?;
            let opts = c.options();
            let res = normalize_model(&spec, &opts.normalize)?;
            let a3 = check_assumption3(&res, &opts.assumption3)?;
            let k = k_expansion(&res)?;
            let t = chart_table(&k.poly, &res, &a3, opts.normalize.exec)?;
            if c.json {
                writeln!(out, "{}", to_json(&t)).map_err(io)?;
            } else {
                write!(out, "{}", table_text(&t)).map_err(io)?;
            }
            Ok(0)
        }
        Command::Fenergy(f) => {
            let c = &f.common;
            let (id, spec) = load_model(&c.model)?;
            check_inputs(&spec)?;
            let mut cfg = FEnergyConfig {
                grid_points_per_dim: f.grid,
                replicates: f.replicates,
                rng_seed: c.seed,
                exec: c.exec(),
                ..Default::default()
            };
            if let Some(ns) = &f.n_schedule {
                cfg.n_schedule = ns.clone();
            }
            let theory = analyze(&id, &spec, &c.options())
                .ok()
                .filter(|a| a.report.semantics == Semantics::ExactRLCTAtPoint)
                .map(|a| a.report.lambda.0);
            let est: FEnergyEstimate = estimate_lambda(&spec, &cfg, theory)?;
            if c.json {
                writeln!(out, "{}", to_json(&est)).map_err(io)?;
            } else {
                writeln!(out, "box half-width: {}", est.half_width).map_err(io)?;
                for (n, v) in &est.per_n_means {
                    writeln!(out, "  n = {:<6} mean F0 = {:.6}", n, v).map_err(io)?;
                }
                writeln!(out, "lambda_hat = {:.4} (std error {:.4})", est.lambda_hat, est.std_error)
                    .map_err(io)?;
                if let Some(t) = &est.theoretical_lambda {
                    writeln!(
                        out,
                        "theoretical lambda = {} -> {}",
                        t,
                        if est.verdict == Some(true) { "within tolerance" } else { "OUTSIDE tolerance" }
                    )
                    .map_err(io)?;
                }
            }
            Ok(if est.verdict == Some(false) { 2 } else { 0 })
        }
        Command::Verify(c) => {
            let (id, spec) = load_model(&c.model)?;
            let v = verify(&id, &spec, &c.options())?;
            if c.json {
                writeln!(out, "{}", to_json(&v)).map_err(io)?;
            } else {
                writeln!(
                    out,
                    "prop1: {} ({} identities)",
                    if v.prop1.passed() { "pass" } else { "FAIL" },
                    v.prop1.checked
                )
                .map_err(io)?;
                match &v.prop_taylor {
                    Some(p) => writeln!(
                        out,
                        "prop-taylor: {} ({} identities)",
                        if p.passed() { "pass" } else { "FAIL" },
                        p.checked
                    ),
                    None => writeln!(out, "prop-taylor: skipped"),
                }
                .map_err(io)?;
                writeln!(out, "rank identity: {}", if v.rank_identity { "pass" } else { "FAIL" })
                    .map_err(io)?;
            }
            Ok(if v.passed() { 0 } else { 2 })
        }
    }
}

/// Parses `argv`, runs the subcommand and returns the exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}
