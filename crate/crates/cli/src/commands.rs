//! Command dispatch. `execute` is pure: it maps a resolved config to report
//! text, so the same config always yields the same bytes.

use std::f64::consts::PI;

use bell_hv_core::estimators::{chain_stats, chsh, estimate_pair, ChshSettings, SignPattern};
use bell_hv_core::geometry::{build_chain, build_theorem2prime_layout};
use bell_hv_core::models::{schulman_ratio, RatioMethod, SchulmanKernel};
use bell_hv_core::signalling::{channel_sweep, run_protocol, BitString, ProtocolConfig};
use bell_hv_core::theorems::{
    thm0prime_bound, thm1prime_detect, thm2_certify, CertificationVerdict, Verdict,
};
use bell_hv_core::{ChainSpec, Direction, RngStream, Setting, Source, Theorem2PrimeLayout};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Command, GeometryConfig, RunConfig};
use crate::report::{format_float, to_canonical_json, Table};
use crate::{CliError, TOOL_NAME, VERSION};

/// Report text and status flags of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub json: String,
    pub csv: Option<String>,
    /// `Some` for certify only.
    pub certified: Option<bool>,
    pub check_failed: bool,
    pub summary: String,
}

struct Outcome {
    results: Value,
    csv: Option<Table>,
    certified: Option<bool>,
    check_failed: bool,
    summary: String,
}

impl Outcome {
    fn new(results: Value, csv: Option<Table>, summary: String) -> Self {
        Self {
            results,
            csv,
            certified: None,
            check_failed: false,
            summary,
        }
    }
}

fn to_value<T: Serialize>(value: &T) -> Result<Value, CliError> {
    serde_json::to_value(value).map_err(|e| CliError::Internal(e.to_string()))
}

fn missing(block: &str) -> CliError {
    CliError::Internal(format!("resolved config lacks `{block}`"))
}

/// Runs `command` on an already resolved config.
pub fn execute(config: &RunConfig, command: Command) -> Result<Execution, CliError> {
    let outcome = match command {
        Command::Chsh => run_chsh(config)?,
        Command::Chain => run_chain(config)?,
        Command::Equiprob => run_equiprob(config)?,
        Command::Certify => run_certify(config)?,
        Command::Signal => run_signal(config)?,
        Command::SchulmanCheck => run_schulman_check(config)?,
    };
    let report = json!({
        "tool": TOOL_NAME,
        "version": VERSION,
        "command": command.name(),
        "config": to_value(config)?,
        "results": outcome.results,
    });
    Ok(Execution {
        json: to_canonical_json(&report)?,
        csv: outcome.csv.map(|t| t.to_csv()).transpose()?,
        certified: outcome.certified,
        check_failed: outcome.check_failed,
        summary: outcome.summary,
    })
}

fn source(config: &RunConfig) -> Result<&Source, CliError> {
    config.source.as_ref().ok_or_else(|| missing("source"))
}

fn mode(config: &RunConfig) -> Result<bell_hv_core::estimators::Mode, CliError> {
    let seed = config.seed.ok_or_else(|| missing("seed"))?;
    config.mode.ok_or_else(|| missing("mode"))?.to_mode(seed)
}

fn geometry(config: &RunConfig) -> Result<&GeometryConfig, CliError> {
    config.geometry.as_ref().ok_or_else(|| missing("geometry"))
}

fn start(geom: &GeometryConfig) -> Result<Direction, CliError> {
    Ok(Direction::new(geom.start_rad.unwrap_or(0.0))?)
}

fn chain_spec(geom: &GeometryConfig) -> Result<ChainSpec, CliError> {
    match &geom.layout {
        Some(doc) => Ok(ChainSpec::from_document(doc)?),
        None => Ok(build_chain(geom.n.ok_or_else(|| missing("geometry.n"))?, start(geom)?)?),
    }
}

fn layout(geom: &GeometryConfig) -> Result<Theorem2PrimeLayout, CliError> {
    match &geom.layout {
        Some(doc) => Ok(Theorem2PrimeLayout::from_document(doc)?),
        None => Ok(build_theorem2prime_layout(start(geom)?)),
    }
}

fn directions<const N: usize>(angles: [f64; N]) -> Result<[Direction; N], CliError> {
    let mut out = [Direction::new(0.0)?; N];
    for (d, a) in out.iter_mut().zip(angles) {
        *d = Direction::new(a)?;
    }
    Ok(out)
}

fn run_chsh(config: &RunConfig) -> Result<Outcome, CliError> {
    let chsh_cfg = config.chsh.as_ref().ok_or_else(|| missing("chsh"))?;
    let (alice, bob) = match (chsh_cfg.alice_rad, chsh_cfg.bob_rad) {
        (Some(a), Some(b)) => (directions(a)?, directions(b)?),
        _ => {
            let dirs = layout(geometry(config)?)?.chsh_directions();
            (dirs.alice, dirs.bob)
        }
    };
    let pattern = SignPattern::from_signs(chsh_cfg.signs.ok_or_else(|| missing("chsh.signs"))?)?;
    let est = chsh(
        source(config)?,
        &ChshSettings::from_directions(alice, bob),
        &mode(config)?,
        pattern,
    )?;
    let summary = format!("S = {} ± {}", format_float(est.s_value), format_float(est.half_width));
    Ok(Outcome::new(to_value(&est)?, None, summary))
}

fn link_table(stats: &bell_hv_core::estimators::ChainStats) -> Table {
    let mut table = Table::new(vec!["link_index", "side_pair", "angle_rad", "correlation", "half_width"]);
    for l in &stats.links {
        table.push(vec![
            l.link_index.to_string(),
            l.side_pair.clone(),
            format_float(l.angle_rad),
            format_float(l.correlation),
            format_float(l.half_width),
        ]);
    }
    table
}

fn run_chain(config: &RunConfig) -> Result<Outcome, CliError> {
    let chain = chain_spec(geometry(config)?)?;
    let stats = chain_stats(source(config)?, &chain, &mode(config)?)?;
    let summary = format!("n = {}, delta_hat = {}", stats.n, format_float(stats.delta_hat));
    Ok(Outcome::new(to_value(&stats)?, Some(link_table(&stats)), summary))
}

fn combine(a: Verdict, b: Verdict) -> Verdict {
    match (a, b) {
        (Verdict::Signalling, _) | (_, Verdict::Signalling) => Verdict::Signalling,
        (Verdict::NoViolation, Verdict::NoViolation) => Verdict::NoViolation,
        _ => Verdict::Inconclusive,
    }
}

fn run_equiprob(config: &RunConfig) -> Result<Outcome, CliError> {
    let src = source(config)?;
    let mode = mode(config)?;
    let chain = chain_spec(geometry(config)?)?;
    let stats = chain_stats(src, &chain, &mode)?;
    let first = &chain.links()[0];
    let pair = estimate_pair(
        src,
        &Setting::new(first.measured_alice()),
        &Setting::new(first.bob().direction),
        &mode,
        "equiprob/marginal",
    )?;
    let n = chain.n();
    let verdict_a = thm1prime_detect(&stats, &pair.marginal_a, n)?;
    let verdict_b = thm1prime_detect(&stats, &pair.marginal_b, n)?;
    let verdict = combine(verdict_a, verdict_b);
    let results = json!({
        "chain": to_value(&stats)?,
        "marginal_a": to_value(&pair.marginal_a)?,
        "marginal_b": to_value(&pair.marginal_b)?,
        "marginal_link_index": first.index,
        "bound": thm0prime_bound(n, stats.delta_hat)?,
        "verdict_a": to_value(&verdict_a)?,
        "verdict_b": to_value(&verdict_b)?,
        "verdict": to_value(&verdict)?,
    });
    let summary = format!(
        "<A> = {}, bound 2n*delta_hat = {}, verdict {}",
        format_float(pair.marginal_a.value),
        format_float(thm0prime_bound(n, stats.delta_hat)?),
        results["verdict"].as_str().unwrap_or("?")
    );
    Ok(Outcome::new(results, Some(link_table(&stats)), summary))
}

fn run_certify(config: &RunConfig) -> Result<Outcome, CliError> {
    let layout = layout(geometry(config)?)?;
    let report = thm2_certify(source(config)?, &layout, &mode(config)?)?;

    let mut table = Table::new(vec!["kind", "index", "alice_angle", "bob_angle", "correlation", "half_width"]);
    for l in &report.chain.links {
        table.push(vec![
            "chain".into(),
            l.link_index.to_string(),
            format_float(l.alice_angle),
            format_float(l.bob_angle),
            format_float(l.correlation),
            format_float(l.half_width),
        ]);
    }
    for (k, t) in report.chsh.terms.iter().enumerate() {
        table.push(vec![
            "chsh".into(),
            k.to_string(),
            format_float(t.alice_angle),
            format_float(t.bob_angle),
            format_float(t.estimate.value),
            format_float(t.estimate.half_width),
        ]);
    }

    let certified = report.verdict == CertificationVerdict::SignallingCertified;
    let results = to_value(&report)?;
    let summary = format!(
        "verdict {}, ratio {}",
        results["verdict"].as_str().unwrap_or("?"),
        report.ratio.map_or_else(|| "n/a".to_string(), format_float)
    );
    let mut outcome = Outcome::new(results, Some(table), summary);
    outcome.certified = Some(certified);
    Ok(outcome)
}

fn run_signal(config: &RunConfig) -> Result<Outcome, CliError> {
    let signal = config.signal.as_ref().ok_or_else(|| missing("signal"))?;
    let seed = config.seed.ok_or_else(|| missing("seed"))?;
    let protocol = ProtocolConfig {
        source: source(config)?.clone(),
        alice_settings: directions(signal.alice_rad.ok_or_else(|| missing("signal.alice_rad"))?)?,
        bob_setting: Direction::new(signal.bob_rad.ok_or_else(|| missing("signal.bob_rad"))?)?,
        pairs_per_bit: signal.pairs_per_bit.ok_or_else(|| missing("signal.pairs_per_bit"))?,
        decode_threshold: signal.decode_threshold,
        confidence: signal.confidence.ok_or_else(|| missing("signal.confidence"))?,
    };
    let bits = match (&signal.bits, signal.random_bits) {
        (Some(bits), _) => bits.clone(),
        (None, Some(k)) => BitString::random(k, &mut RngStream::new(seed, "signal/bits")),
        (None, None) => return Err(missing("signal.bits")),
    };
    let report = run_protocol(&protocol, &bits, seed)?;
    let summary = format!("{} errors in {} bits", report.errors, bits.len());

    let mut results = json!({ "transmission": to_value(&report)? });
    let table = if let Some(sweep) = &signal.sweep {
        let rows = channel_sweep(&protocol, &sweep.n_values, sweep.trials, sweep.bits_per_trial, seed)?;
        let mut table = Table::new(vec!["N", "trial", "ber_empirical", "ber_bound"]);
        for r in &rows {
            table.push(vec![
                r.n.to_string(),
                r.trial.to_string(),
                format_float(r.ber_empirical),
                format_float(r.ber_bound),
            ]);
        }
        results["sweep"] = to_value(&rows)?;
        table
    } else {
        let mut table = Table::new(vec!["bit_index", "sent", "decoded", "bob_mean"]);
        for (i, ((sent, decoded), mean)) in report
            .sent_bits
            .bits()
            .iter()
            .zip(report.decoded_bits.bits())
            .zip(&report.bob_means)
            .enumerate()
        {
            table.push(vec![
                i.to_string(),
                u8::from(*sent).to_string(),
                u8::from(*decoded).to_string(),
                format_float(*mean),
            ]);
        }
        table
    };
    Ok(Outcome::new(results, Some(table), summary))
}

#[derive(Debug, Clone, Serialize)]
struct GridRow {
    gamma_s: f64,
    theta: f64,
    closed_form: f64,
    truncated: f64,
    rel_err: f64,
}

fn run_schulman_check(config: &RunConfig) -> Result<Outcome, CliError> {
    let cfg = config.schulman.as_ref().ok_or_else(|| missing("schulman"))?;
    let gammas = cfg.gamma_s.as_ref().ok_or_else(|| missing("schulman.gamma_s"))?;
    let points = cfg.theta_points.ok_or_else(|| missing("schulman.theta_points"))?;
    let truncation = cfg.truncation.ok_or_else(|| missing("schulman.truncation"))?;
    let tolerance = cfg.tolerance.ok_or_else(|| missing("schulman.tolerance"))?;
    let thetas: Vec<f64> = (0..points)
        .map(|k| PI * k as f64 / (points - 1) as f64)
        .collect();

    let mut rows = Vec::with_capacity(gammas.len() * points);
    for &gamma_s in gammas {
        for &theta in &thetas {
            let closed_form = schulman_ratio(theta, gamma_s, RatioMethod::ClosedForm)?;
            let truncated = schulman_ratio(theta, gamma_s, RatioMethod::Truncated(truncation))?;
            rows.push(GridRow {
                gamma_s,
                theta,
                closed_form,
                truncated,
                rel_err: ((truncated - closed_form) / closed_form).abs(),
            });
        }
    }
    let max_rel_err = rows.iter().map(|r| r.rel_err).fold(0.0, f64::max);

    let ideal = SchulmanKernel::ideal();
    let mut ideal_exact = true;
    for &theta in &thetas {
        let (s, c) = (theta / 2.0).sin_cos();
        ideal_exact &= ideal.probs(theta)? == (c * c, s * s);
    }
    let grid_ok = max_rel_err < tolerance;

    let mut table = Table::new(vec!["gamma_s", "theta", "closed_form", "truncated", "rel_err"]);
    for r in &rows {
        table.push(vec![
            format_float(r.gamma_s),
            format_float(r.theta),
            format_float(r.closed_form),
            format_float(r.truncated),
            format_float(r.rel_err),
        ]);
    }
    let results = json!({
        "grid": to_value(&rows)?,
        "max_rel_err": max_rel_err,
        "tolerance": tolerance,
        "grid_within_tolerance": grid_ok,
        "ideal_kernel_exact": ideal_exact,
        "passed": grid_ok && ideal_exact,
    });
    let summary = format!(
        "max relative error {} (tolerance {}), ideal kernel exact: {ideal_exact}",
        format_float(max_rel_err),
        format_float(tolerance)
    );
    let mut outcome = Outcome::new(results, Some(table), summary);
    outcome.check_failed = !(grid_ok && ideal_exact);
    Ok(outcome)
}
