//! The experiment subcommands. Each returns the full output text; the caller
//! writes it to `out` or stdout.

use std::fmt::Write as _;

use kpolar::asymptotics::{loglog, polar_threshold, predicted_cdf, q_inverse, Side};
use kpolar::becpolar::{enumerate_level_with_budget, sample_level, LevelCdf};
use kpolar::codec::{simulate, PolarCode, SimulationReport};
use kpolar::construct::{
    hybrid_selection, hybrid_selection_recursive, overlap_fraction, polar_selection, rm_selection, selection_bounds, SelectionBounds,
    SelectionSet,
};
use kpolar::numfmt::sig17;
use kpolar::{BitMatrix, Error, ExtendedUnitValue, KernelProfile};
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    KernelAnalyze,
    Polarize,
    ScalingVerify,
    ExponentVerify,
    SelectionCompare,
    CodecSim,
    MapBound,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid kernel: {0}")]
    InvalidKernel(Error),
    #[error("{0}")]
    Budget(Error),
    #[error("bad config: {0}")]
    Config(#[from] ConfigError),
    #[error("parameters rejected: {0}")]
    Parameters(Error),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::InvalidKernel(_) => 2,
            CliError::Budget(_) => 3,
            CliError::Config(_) | CliError::Parameters(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::BudgetExceeded { .. } | Error::PrefixTooDeep { .. } => CliError::Budget(e),
            Error::NotPolarizing | Error::SingularMatrix | Error::DimensionTooLarge { .. } | Error::AssumptionUnmet(_) => {
                CliError::InvalidKernel(e)
            }
            other => CliError::Parameters(other),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn load_profile(cfg: &ExperimentConfig) -> Result<KernelProfile> {
    let g: BitMatrix = cfg.kernel.parse().map_err(CliError::InvalidKernel)?;
    kpolar::gf2kernel::kernel_profile(&g).map_err(CliError::InvalidKernel)
}

fn exact_level(profile: &KernelProfile, cfg: &ExperimentConfig, n: usize) -> Result<LevelCdf> {
    Ok(enumerate_level_with_budget(&profile.kernel, cfg.eps, n, cfg.budget)?)
}

/// `mode,payload,loglog`; `loglog` is `log_ℓ(-log2 z)`.
fn extended_cells(z: &ExtendedUnitValue, ell: usize) -> String {
    format!("{},{},{}", z.mode().as_str(), sig17(z.payload()), sig17(loglog(z, ell)))
}

pub fn run(cmd: Command, cfg: &ExperimentConfig) -> Result<String> {
    match cmd {
        Command::KernelAnalyze => kernel_analyze(cfg),
        Command::Polarize => polarize(cfg),
        Command::ScalingVerify => scaling_verify(cfg),
        Command::ExponentVerify => exponent_verify(cfg),
        Command::SelectionCompare => selection_compare(cfg),
        Command::CodecSim => codec_sim(cfg),
        Command::MapBound => map_bound(cfg),
    }
}

pub fn kernel_analyze(cfg: &ExperimentConfig) -> Result<String> {
    let mut s = load_profile(cfg)?.to_json();
    s.push('\n');
    Ok(s)
}

/// Per-channel values at each depth: exact leaf order when `ℓ^n` fits the
/// budget, otherwise `samples` Monte Carlo paths.
pub fn polarize(cfg: &ExperimentConfig) -> Result<String> {
    let profile = load_profile(cfg)?;
    let ell = profile.ell();
    let mut s = String::from("n,source,index,mode,payload,loglog\n");
    for &n in &cfg.n {
        let fits = (ell as u128).checked_pow(n as u32).is_some_and(|size| size <= cfg.budget as u128);
        let (source, cdf) = if fits {
            ("exact", exact_level(&profile, cfg, n)?)
        } else {
            ("montecarlo", sample_level(&profile.kernel, cfg.eps, n, cfg.samples, cfg.seed)?)
        };
        for (k, z) in cdf.values().iter().enumerate() {
            let _ = writeln!(s, "{n},{source},{},{}", k + 1, extended_cells(z, ell));
        }
    }
    Ok(s)
}

pub fn scaling_verify(cfg: &ExperimentConfig) -> Result<String> {
    let profile = load_profile(cfg)?;
    let capacity = 1.0 - cfg.eps;
    let mut s = String::from("n,t,exact_F,predicted,abs_error\n");
    for &n in &cfg.n {
        let cdf = exact_level(&profile, cfg, n)?;
        for &t in &cfg.t {
            let threshold = polar_threshold(n, t, &profile, Side::Good, 0.0)?;
            let exact = cdf.fraction_below_double_exponent(threshold.nu);
            let predicted = predicted_cdf(n, threshold.nu, capacity, &profile, Side::Good)?.predicted_probability;
            let _ = writeln!(s, "{n},{},{},{},{}", sig17(t), sig17(exact), sig17(predicted), sig17((exact - predicted).abs()));
        }
    }
    Ok(s)
}

pub fn exponent_verify(cfg: &ExperimentConfig) -> Result<String> {
    let profile = load_profile(cfg)?;
    let mut s = String::from("n,beta,fraction\n");
    for &n in &cfg.n {
        let cdf = exact_level(&profile, cfg, n)?;
        for &beta in &cfg.beta {
            let _ = writeln!(s, "{n},{},{}", sig17(beta), sig17(cdf.fraction_below_double_exponent(beta * n as f64)));
        }
    }
    Ok(s)
}

fn optional_cells(z: Option<&ExtendedUnitValue>, ell: usize) -> String {
    z.map_or_else(|| ",,".to_string(), |z| extended_cells(z, ell))
}

fn selection_row(n: usize, sel: &SelectionSet, b: &SelectionBounds, overlap: f64, ell: usize) -> String {
    format!(
        "{n},{},{},{},{},{},{},{},{}\n",
        sel.rule.name(),
        sig17(sel.rate),
        sel.len(),
        sig17(b.union_bound_log2),
        optional_cells(b.union_bound.as_ref(), ell),
        b.dmin_upper,
        extended_cells(&b.map_lower, ell),
        sig17(overlap)
    )
}

/// Polar, RM and hybrid selections at each depth, their bounds, and their
/// overlap with the RM selection at `rm_rate`.
pub fn selection_compare(cfg: &ExperimentConfig) -> Result<String> {
    let profile = load_profile(cfg)?;
    let ell = profile.ell();
    let mut s = String::from(
        "n,rule,rate,size,union_bound_log2,union_bound_mode,union_bound_payload,union_bound_loglog,dmin,map_lower_mode,map_lower_payload,map_lower_loglog,overlap_with_rm\n",
    );
    for &n in &cfg.n {
        let full = exact_level(&profile, cfg, n)?;
        let rm = rm_selection(&profile.kernel, n, cfg.rm_rate)?;
        let mut rows = vec![rm.clone()];
        for &rate in &cfg.rate {
            rows.push(polar_selection(&full, rate)?);
        }
        if cfg.hybrid_m < n {
            let prefix = exact_level(&profile, cfg, cfg.hybrid_m)?;
            for &rate in &cfg.rate {
                rows.push(hybrid_selection(&prefix, &profile, n, rate, cfg.hybrid_beta, cfg.hybrid_t, Some(&full))?);
            }
        }
        if let (Some(&first), Some(&last)) = (cfg.schedule.first(), cfg.schedule.last()) {
            if last < n {
                let prefix = exact_level(&profile, cfg, first)?;
                for &rate in &cfg.rate {
                    rows.push(hybrid_selection_recursive(
                        &prefix,
                        &profile,
                        n,
                        rate,
                        &cfg.schedule,
                        cfg.hybrid_beta,
                        cfg.epsilon_slack,
                        cfg.hybrid_t,
                        Some(&full),
                    )?);
                }
            }
        }
        for sel in &rows {
            let b = selection_bounds(sel, &full, &profile, cfg.eps)?;
            s.push_str(&selection_row(n, sel, &b, overlap_fraction(sel, &rm)?, ell));
        }
    }
    Ok(s)
}

/// SC and MAP simulation of the polar code at each depth and rate.
pub fn codec_sim(cfg: &ExperimentConfig) -> Result<String> {
    let profile = load_profile(cfg)?;
    let mut s = format!("{},union_bound_log2,sc_lower,map_lower,dominance_violations\n", SimulationReport::CSV_HEADER);
    for &n in &cfg.n {
        let full = exact_level(&profile, cfg, n)?;
        for &rate in &cfg.rate {
            let sel = polar_selection(&full, rate)?;
            let b = selection_bounds(&sel, &full, &profile, cfg.eps)?;
            let code = PolarCode::from_selection(profile.clone(), &sel)?;
            let report = simulate(&code, cfg.eps, cfg.trials, cfg.seed)?;
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                report.csv_row(),
                sig17(b.union_bound_log2),
                sig17(b.sc_lower.value()),
                sig17(b.map_lower.value()),
                report.dominance_violations
            );
        }
    }
    Ok(s)
}

/// `log_ℓ(-log2 P)` of the MAP lower bound against `nE_w + √(nV_w) Q^{-1}(R/I)`.
pub fn map_bound(cfg: &ExperimentConfig) -> Result<String> {
    let profile = load_profile(cfg)?;
    let ell = profile.ell();
    let capacity = 1.0 - cfg.eps;
    let mut s = String::from("n,rate,dmin_upper,map_lower_mode,map_lower_payload,map_lower_loglog,sc_union_loglog,weight_prediction\n");
    for &n in &cfg.n {
        let full = exact_level(&profile, cfg, n)?;
        for &rate in &cfg.rate {
            let sel = polar_selection(&full, rate)?;
            let b = selection_bounds(&sel, &full, &profile, cfg.eps)?;
            let nf = n as f64;
            let rhs = nf * profile.weight_exponent + (nf * profile.weight_second_exponent).sqrt() * q_inverse(rate / capacity)?;
            let union = b.union_bound.as_ref().map_or(String::new(), |u| sig17(loglog(u, ell)));
            let _ = writeln!(s, "{n},{},{},{},{union},{}", sig17(rate), b.dmin_upper, extended_cells(&b.map_lower, ell), sig17(rhs));
        }
    }
    Ok(s)
}
