use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use longmem::config::ExperimentConfig;
use longmem::fbm::{tau_law, TauSampler};
use longmem::ma::{build_coefficients, default_horizon};
use longmem::noise::check_assumptions;
use longmem::params::{derive_constants, kappa, pickard_integral_check};
use longmem::rare_event::{
    estimate_event_probability, sample_until_in_event, solve_tilt, ConditionedSampler,
};
use longmem::report::Quantiles;
use longmem::rng::StreamDomain;
use longmem::runner::{emit_plot_data, run_experiment_flushing, write_law_csv};
use longmem::special::normal_tail;

/// Monte Carlo study of moderate-deviation clusters in long-memory
/// moving averages and their fractional-Brownian-motion limit law.
#[derive(Parser)]
#[command(name = "longmem", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores). The LONGMEM_THREADS environment
    /// variable takes precedence.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the closed-form constants and the integral cross-check.
    Constants {
        #[command(flatten)]
        common: Common,
    },
    /// Check the configured noise against the standing assumptions.
    CheckNoise {
        #[command(flatten)]
        common: Common,
        /// Tilt radius for the characteristic-function integrability bound.
        #[arg(long, default_value_t = 1.0)]
        theta0: f64,
    },
    /// Importance-sampling estimate of P(E_0) for each ladder window.
    ProbE0 {
        #[command(flatten)]
        common: Common,
    },
    /// Sample the limiting hitting-time law and write its CDF.
    TauLaw {
        #[command(flatten)]
        common: Common,
    },
    /// Run the full verification pipeline: conditional laws per window
    /// size against the limit law, with pass/fail per declared tolerance.
    Verify {
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_path(path)
            .with_context(|| format!("loading config {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.run.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.run.out_dir = out.display().to_string();
    }
    if let Some(threads) = common.threads {
        cfg.run.threads = threads;
    }
    if let Ok(env_threads) = std::env::var("LONGMEM_THREADS") {
        cfg.run.threads = env_threads
            .parse()
            .context("LONGMEM_THREADS must be an integer")?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn install_pool(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.run.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.run.threads)
            .build_global()
            .context("thread pool already initialized")?;
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Constants { common } => constants_cmd(&common),
        Command::CheckNoise { common, theta0 } => check_noise_cmd(&common, theta0),
        Command::ProbE0 { common } => prob_e0_cmd(&common),
        Command::TauLaw { common } => tau_law_cmd(&common),
        Command::Verify { common } => verify_cmd(&common),
    }
}

fn constants_cmd(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    let d = derive_constants(cfg.model.alpha, cfg.model.sigma_z2)?;
    let pickard = pickard_integral_check(d.hurst, 1e-9)?;
    let identity_rhs = (1.0 - cfg.model.alpha).powi(2) * d.c_alpha;
    let out = serde_json::json!({
        "alpha": cfg.model.alpha,
        "beta": d.beta,
        "hurst": d.hurst,
        "kappa": d.kappa,
        "c_alpha": d.c_alpha,
        "k1": d.k1,
        "pickard": {
            "numeric": pickard.numeric,
            "closed_form": pickard.closed_form,
            "error_estimate": pickard.error_estimate,
            "identity_rhs": identity_rhs,
            "numeric_vs_closed": (pickard.numeric - pickard.closed_form).abs(),
        },
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn check_noise_cmd(common: &Common, theta0: f64) -> Result<()> {
    let cfg = load_config(common)?;
    let noise = cfg.resolve_noise()?;
    let k = kappa(cfg.model.alpha)?;
    let report = check_assumptions(&noise, k, theta0);
    let out = serde_json::json!({
        "noise": noise,
        "kappa": k,
        "report": report,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    if !(report.moments_pass && report.chf_finite) {
        bail!("noise fails the standing assumptions");
    }
    Ok(())
}

fn prob_e0_cmd(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    install_pool(&cfg)?;
    let noise = cfg.resolve_noise()?;
    let derived = cfg.validate()?;
    let mut rows = Vec::new();
    for (pos, &n) in cfg.sampler.n_ladder.iter().enumerate() {
        let j_max = cfg.sampler.j_max_multiplier * n;
        let horizon = default_horizon(n, derived.beta, cfg.sampler.horizon_units);
        let table = std::sync::Arc::new(build_coefficients(
            cfg.model.alpha,
            j_max,
            n + horizon,
            cfg.sampler.coefficients,
        )?);
        let tilt = solve_tilt(&table, n, cfg.model.epsilon, &noise)?;
        let sampler = ConditionedSampler::new(table, tilt, noise.clone(), horizon)?;
        let samples = sample_until_in_event(
            &sampler,
            cfg.run.seed,
            StreamDomain::Window,
            (pos as u64) << 40,
            cfg.sampler.in_event_target,
            cfg.sampler.batch_size,
            cfg.sampler.max_replicas,
        )?;
        let est = estimate_event_probability(&samples)?;
        let gaussian_exact = matches!(noise, longmem::noise::NoiseSpec::Gaussian { .. })
            .then(|| normal_tail(n as f64 * cfg.model.epsilon / tilt.sigma_n2.sqrt()));
        rows.push(serde_json::json!({
            "n": n,
            "replicas": est.replicas,
            "in_event": est.in_event,
            "p_e0": est.p_hat,
            "std_err": est.std_err,
            "asymptotic": tilt.event_probability_asymptotic(),
            "gaussian_exact_tail": gaussian_exact,
            "tau_n": tilt.tau_n,
            "theta_n": tilt.theta_n,
            "zeta_n": tilt.zeta_n,
            "z_n": n as f64 * cfg.model.epsilon / tilt.sigma_n2.sqrt(),
        }));
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::json!({ "rows": rows }))?
    );
    Ok(())
}

fn tau_law_cmd(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    install_pool(&cfg)?;
    let derived = cfg.validate()?;
    let sampler = TauSampler::with_horizon(
        &derived,
        cfg.model.sigma_z2,
        cfg.model.epsilon,
        cfg.dt(),
        cfg.fbm.base_horizon_units,
        cfg.fbm.cap_horizon_units,
    )?;
    let (law, stats) = tau_law(&sampler, cfg.fbm.tau_samples, cfg.run.seed, 0)?;
    let out_dir = PathBuf::from(&cfg.run.out_dir);
    std::fs::create_dir_all(&out_dir)?;
    let csv_path = out_dir.join("tau.csv");
    write_law_csv(&law, &csv_path)?;
    let out = serde_json::json!({
        "dt": cfg.dt(),
        "samples": stats.samples,
        "censored": stats.censored,
        "zero_hits": stats.zero_hits,
        "max_extensions": stats.max_extensions,
        "quantiles": Quantiles::of(&law),
        "csv": csv_path.display().to_string(),
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn verify_cmd(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    install_pool(&cfg)?;
    let out_dir = PathBuf::from(&cfg.run.out_dir);
    // laws flush to disk as they are produced, so a mid-ladder failure
    // still leaves the completed window sizes on disk
    let output = run_experiment_flushing(&cfg, Some(&out_dir))?;
    let written = emit_plot_data(&output, &out_dir)?;
    for row in &output.report.per_n {
        println!(
            "n={}: P(E0)={:.5e} (se {:.1e}), z_n={:.3}, KS(in_scaled, tau)={:.4}, KS(overshoot, Exp1)={:.4}, censored={:.4}",
            row.n,
            row.p_e0,
            row.p_e0_std_err,
            row.z_n,
            row.ks_in_scaled_vs_tau,
            row.ks_overshoot_exp1,
            row.censored_fraction,
        );
    }
    for check in &output.report.checks {
        println!(
            "check {}: {} (value {:.5}, threshold {:.5})",
            check.name,
            if check.passed { "PASS" } else { "FAIL" },
            check.value,
            check.threshold,
        );
    }
    println!(
        "report: {} ({} files)",
        out_dir.join("report.json").display(),
        written.len()
    );
    if !output.report.passed {
        std::process::exit(2);
    }
    Ok(())
}
