//! The end-to-end experiment: for each window length of the ladder,
//! solve the tilt, importance-sample conditioned paths, build the
//! conditional laws, and compare the rescaled first non-occurrence time
//! against the hitting-time law of the limiting fractional Brownian
//! motion.
//!
//! Replica streams are derived by counter-based splitting from the master
//! seed and merged in replica order, so reports are byte-identical across
//! thread counts.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::fbm::{tau_law, TauSampler};
use crate::law::{ks_against_exponential, ks_distance, wasserstein1, EmpiricalLaw, LawMeta};
use crate::ma::{build_coefficients, default_horizon};
use crate::rare_event::{
    conditional_law, estimate_event_probability, sample_until_in_event, solve_tilt,
    ConditionedSampler, ConditionedStatistic,
};
use crate::report::{
    compute_checks, ExperimentReport, PerWindowReport, Quantiles, TauSummary, SCHEMA_VERSION,
};
use crate::rng::StreamDomain;

/// Report plus the raw laws it was computed from.
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    /// Keyed by law name; these are exactly the CSVs `emit_plot_data`
    /// writes.
    pub laws: BTreeMap<String, EmpiricalLaw>,
}

/// Stream-index namespace per ladder position, so replicas of different
/// window sizes never share a stream.
fn window_stream_base(ladder_position: usize) -> u64 {
    (ladder_position as u64) << 40
}

/// Run the configured experiment. Deterministic in `config.run.seed`;
/// progress and timings go to stderr.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    run_experiment_flushing(config, None)
}

/// As [`run_experiment`], but every law is written into `flush_dir` as
/// soon as it is computed, so partial results survive a mid-ladder error.
pub fn run_experiment_flushing(
    config: &ExperimentConfig,
    flush_dir: Option<&Path>,
) -> Result<ExperimentOutput> {
    if let Some(dir) = flush_dir {
        std::fs::create_dir_all(dir)?;
    }
    let flush = |name: &str, law: &EmpiricalLaw| -> Result<()> {
        if let Some(dir) = flush_dir {
            write_law_csv(law, &dir.join(format!("{name}.csv")))?;
        }
        Ok(())
    };
    let derived = config.validate()?;
    let noise = config.resolve_noise()?;
    let seed = config.run.seed;
    let eps = config.model.epsilon;
    let mut laws: BTreeMap<String, EmpiricalLaw> = BTreeMap::new();

    // reference law of the limit object
    let t0 = Instant::now();
    let tau_sampler = TauSampler::with_horizon(
        &derived,
        config.model.sigma_z2,
        eps,
        config.dt(),
        config.fbm.base_horizon_units,
        config.fbm.cap_horizon_units,
    )?;
    let (tau_reference, tau_stats) = tau_law(&tau_sampler, config.fbm.tau_samples, seed, 0)?;
    eprintln!(
        "tau law: {} samples at dt=2^{} in {:.1?} (censored {}, zero hits {})",
        tau_stats.samples,
        config.fbm.dt_log2,
        t0.elapsed(),
        tau_stats.censored,
        tau_stats.zero_hits,
    );
    let tau_summary = TauSummary {
        dt: config.dt(),
        samples: tau_stats.samples,
        censored: tau_stats.censored,
        zero_hits: tau_stats.zero_hits,
        max_extensions: tau_stats.max_extensions,
        quantiles: Quantiles::of(&tau_reference),
    };
    flush("tau", &tau_reference)?;
    laws.insert("tau".into(), tau_reference.clone());

    let mut per_n = Vec::with_capacity(config.sampler.n_ladder.len());
    for (pos, &n) in config.sampler.n_ladder.iter().enumerate() {
        let t0 = Instant::now();
        let j_max = config.sampler.j_max_multiplier * n;
        let horizon = default_horizon(n, derived.beta, config.sampler.horizon_units);
        let table = Arc::new(
            build_coefficients(
                config.model.alpha,
                j_max,
                n + horizon,
                config.sampler.coefficients,
            )
            .map_err(|e| Error::Config(format!("coefficients for n={n}: {e}")))?,
        );
        let tilt = solve_tilt(&table, n, eps, &noise)
            .map_err(|e| Error::Config(format!("tilt solve for n={n}: {e}")))?;
        let sampler = ConditionedSampler::new(table, tilt, noise.clone(), horizon)?;
        let samples = sample_until_in_event(
            &sampler,
            seed,
            StreamDomain::Window,
            window_stream_base(pos),
            config.sampler.in_event_target,
            config.sampler.batch_size,
            config.sampler.max_replicas,
        )?;
        let prob = estimate_event_probability(&samples)?;

        let meta = |source: String| LawMeta {
            source,
            scale: Some(n as f64),
            censored_fraction: 0.0,
            seed: Some(seed),
        };
        let overshoot = conditional_law(
            &samples,
            ConditionedStatistic::OvershootScaled,
            meta(format!("overshoot_n{n}")),
        )?;
        let in_scaled = conditional_law(
            &samples,
            ConditionedStatistic::InScaled,
            meta(format!("in_scaled_n{n}")),
        )?;

        let row = PerWindowReport {
            n,
            j_max,
            horizon,
            replicas: samples.len(),
            in_event: prob.in_event,
            p_e0: prob.p_hat,
            p_e0_std_err: prob.std_err,
            p_e0_asymptotic: tilt.event_probability_asymptotic(),
            tau_n: tilt.tau_n,
            theta_n: tilt.theta_n,
            zeta_n: tilt.zeta_n,
            sigma_n2: tilt.sigma_n2,
            sigma_tail_bound: crate::ma::sigma_n2(
                sampler.simulator().table(),
                n,
                noise.variance(),
            )?
            .tail_bound,
            z_n: n as f64 * eps / tilt.sigma_n2.sqrt(),
            ks_overshoot_exp1: ks_against_exponential(&overshoot)?,
            ks_in_scaled_vs_tau: ks_distance(&in_scaled, &tau_reference)?,
            wasserstein_in_scaled_vs_tau: wasserstein1(&in_scaled, &tau_reference)?,
            censored_fraction: in_scaled.meta.censored_fraction,
            ess: in_scaled.effective_sample_size(),
        };
        eprintln!(
            "n={n}: {} replicas ({} in event) in {:.1?}; KS(in_scaled, tau) = {:.4}, KS(overshoot, Exp(1)) = {:.4}",
            row.replicas,
            row.in_event,
            t0.elapsed(),
            row.ks_in_scaled_vs_tau,
            row.ks_overshoot_exp1,
        );
        flush(&format!("in_scaled_n{n}"), &in_scaled)?;
        flush(&format!("overshoot_n{n}"), &overshoot)?;
        laws.insert(format!("in_scaled_n{n}"), in_scaled);
        laws.insert(format!("overshoot_n{n}"), overshoot);
        per_n.push(row);
    }

    let checks = compute_checks(&config.run.tolerances, &per_n);
    let passed = checks.iter().all(|c| c.passed);
    // thread count is operational, not part of the experiment: normalize
    // it in the echo so reports stay byte-identical across pool sizes
    let mut echo = config.clone();
    echo.run.threads = 0;
    let report = ExperimentReport {
        schema_version: SCHEMA_VERSION,
        config: echo,
        noise_resolved: noise,
        derived,
        per_n,
        tau_summary,
        checks,
        passed,
    };
    Ok(ExperimentOutput { report, laws })
}

/// Write one law as `value,cdf,weight` CSV rows (RFC-4180 style, UTF-8,
/// '.' decimal separator, shortest round-trip float formatting).
pub fn write_law_csv(law: &EmpiricalLaw, path: &Path) -> Result<()> {
    let mut out = String::from("value,cdf,weight\n");
    for (value, cdf, weight) in law.cdf_rows() {
        out.push_str(&format!("{value},{cdf},{weight}\n"));
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

/// Read a law back from its CSV emission.
pub fn read_law_csv(path: &Path, meta: LawMeta) -> Result<EmpiricalLaw> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("value,cdf,weight") => {}
        other => {
            return Err(Error::ConfigParse(format!(
                "unexpected CSV header {other:?} in {}",
                path.display()
            )))
        }
    }
    let mut values = Vec::new();
    let mut weights = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let (v, _cdf, w) = match (cols.next(), cols.next(), cols.next()) {
            (Some(v), Some(c), Some(w)) => (v, c, w),
            _ => {
                return Err(Error::ConfigParse(format!(
                    "malformed CSV row {} in {}",
                    i + 2,
                    path.display()
                )))
            }
        };
        let v: f64 = v
            .parse()
            .map_err(|e| Error::ConfigParse(format!("bad value in row {}: {e}", i + 2)))?;
        let w: f64 = w
            .parse()
            .map_err(|e| Error::ConfigParse(format!("bad weight in row {}: {e}", i + 2)))?;
        values.push(v);
        weights.push(w);
    }
    EmpiricalLaw::from_weighted(values, weights, meta)
}

/// Write the JSON report and one CDF CSV per law into `out_dir`; returns
/// the created paths.
pub fn emit_plot_data(output: &ExperimentOutput, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let report_path = out_dir.join("report.json");
    std::fs::write(&report_path, output.report.to_json())?;
    written.push(report_path);
    for (name, law) in &output.laws {
        let path = out_dir.join(format!("{name}.csv"));
        write_law_csv(law, &path)?;
        written.push(path);
    }
    Ok(written)
}
