//! The saddle-point change of measure as a rare-event sampler.
//!
//! With `S_n = sum_j (A_j - A_{j-n}) Z_{n-1-j}` (truncated consistently
//! with [`crate::ma::sigma_n2`]), the scaled cumulant generating function
//! is
//!
//! `psi_n(s) = (sigma_n^2 / n^2) sum_j phi_Z(sigma_n^{-2} n (A_j - A_{j-n}) s)`.
//!
//! The tilt solves `psi_n'(tau_n) = eps`, giving `theta_n = n tau_n /
//! sigma_n^2`; each past coordinate is then sampled from the tilted law
//! `G_{theta_n (A_j - A_{j-n})}`, which centres the window average at the
//! threshold. The likelihood ratio back to the original measure is
//! `exp(log E e^{theta_n S_n} - theta_n S_n)`, kept in log space
//! end-to-end.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::law::{EmpiricalLaw, LawMeta};
use crate::ma::{sigma_n2, CoefficientTable, Kahan, WindowPath, WindowSimulator};
use crate::noise::NoiseSpec;
use crate::params;
use crate::rng::{stream, StreamDomain};

/// The saddle-point package for one `(n, epsilon)` pair.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TiltSolution {
    pub n: usize,
    pub epsilon: f64,
    /// Root of `psi_n'(tau) = epsilon`.
    pub tau_n: f64,
    /// `n tau_n / sigma_n^2`.
    pub theta_n: f64,
    /// `n epsilon / sigma_n^2`, the overshoot scale.
    pub zeta_n: f64,
    /// `log E exp(theta_n S_n)` over the truncated index set.
    pub log_mgf_sn: f64,
    /// Truncated `sigma_n^2` used in every formula above.
    pub sigma_n2: f64,
}

impl TiltSolution {
    /// Zero tilt: the sampler degenerates to plain Monte Carlo.
    pub fn untilted(
        table: &CoefficientTable,
        n: usize,
        epsilon: f64,
        noise: &NoiseSpec,
    ) -> Result<Self> {
        let sig = sigma_n2(table, n, noise.variance())?;
        Ok(Self {
            n,
            epsilon,
            tau_n: 0.0,
            theta_n: 0.0,
            zeta_n: n as f64 * epsilon / sig.value,
            log_mgf_sn: 0.0,
            sigma_n2: sig.value,
        })
    }

    /// First-order approximation of `P(E_0)`:
    /// `(2 pi)^{-1/2} e^{-theta_n n eps + log E e^{theta_n S_n}} / (sigma_n theta_n)`.
    /// For Gaussian noise this is the Mills-ratio approximation of the
    /// normal tail, accurate only once `n eps / sigma_n` is large.
    pub fn event_probability_asymptotic(&self) -> f64 {
        let sigma_n = self.sigma_n2.sqrt();
        (2.0 * std::f64::consts::PI).sqrt().recip()
            * (-self.theta_n * self.n as f64 * self.epsilon + self.log_mgf_sn).exp()
            / (sigma_n * self.theta_n)
    }
}

fn psi_terms(
    table: &CoefficientTable,
    n: usize,
    noise: &NoiseSpec,
    s: f64,
    sigma_n2_value: f64,
    deriv: u8,
) -> f64 {
    let limit = table.past_len(n);
    let factor = n as f64 / sigma_n2_value;
    let mut acc = Kahan::default();
    match deriv {
        0 => {
            for j in 0..limit {
                let inc = table.increment(j, n);
                acc.add(noise.log_mgf(factor * inc * s));
            }
            acc.value() * sigma_n2_value / (n as f64 * n as f64)
        }
        1 => {
            for j in 0..limit {
                let inc = table.increment(j, n);
                acc.add(noise.log_mgf_prime(factor * inc * s) * inc);
            }
            acc.value() / n as f64
        }
        _ => {
            for j in 0..limit {
                let inc = table.increment(j, n);
                acc.add(noise.log_mgf_second(factor * inc * s) * inc * inc);
            }
            acc.value() / sigma_n2_value
        }
    }
}

/// `psi_n(s)`, the scaled cumulant generating function of the truncated
/// window sum.
pub fn psi_n(table: &CoefficientTable, n: usize, noise: &NoiseSpec, s: f64) -> Result<f64> {
    let sig = sigma_n2(table, n, noise.variance())?;
    Ok(psi_terms(table, n, noise, s, sig.value, 0))
}

/// `psi_n'(s)`, differentiated term by term.
pub fn psi_n_prime(table: &CoefficientTable, n: usize, noise: &NoiseSpec, s: f64) -> Result<f64> {
    let sig = sigma_n2(table, n, noise.variance())?;
    Ok(psi_terms(table, n, noise, s, sig.value, 1))
}

/// `psi_n''(s)` (strictly positive for non-degenerate noise).
pub fn psi_n_second(table: &CoefficientTable, n: usize, noise: &NoiseSpec, s: f64) -> Result<f64> {
    let sig = sigma_n2(table, n, noise.variance())?;
    Ok(psi_terms(table, n, noise, s, sig.value, 2))
}

/// Solve `psi_n'(tau_n) = epsilon` by bracketing plus safeguarded Newton,
/// then assemble the tilt package.
pub fn solve_tilt(
    table: &CoefficientTable,
    n: usize,
    epsilon: f64,
    noise: &NoiseSpec,
) -> Result<TiltSolution> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            value: epsilon,
            constraint: "threshold must be positive",
        });
    }
    let sig = sigma_n2(table, n, noise.variance())?;
    let sv = sig.value;
    let fp = |s: f64| psi_terms(table, n, noise, s, sv, 1) - epsilon;

    // psi' is continuous and strictly increasing with psi'(0) = 0 < eps;
    // expand the bracket geometrically until psi'(hi) clears the target
    let mut lo = 0.0f64;
    let mut hi = 10.0 * epsilon;
    let mut f_hi = fp(hi);
    let mut expansions = 0;
    while f_hi < 0.0 {
        expansions += 1;
        if expansions > 60 {
            return Err(Error::BracketFailure {
                target: epsilon,
                scanned_to: hi,
            });
        }
        hi *= 2.0;
        f_hi = fp(hi);
    }

    let tol = 1e-12 * epsilon.max(1.0);
    let mut s = epsilon.min(hi * 0.5).max(hi * 1e-6);
    let mut residual = fp(s);
    let mut converged = residual.abs() <= tol;
    let mut iterations = 0usize;
    while !converged {
        iterations += 1;
        if iterations > 200 {
            return Err(Error::SolverConvergence {
                iterations,
                residual,
            });
        }
        if residual > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let slope = psi_terms(table, n, noise, s, sv, 2);
        let newton = s - residual / slope;
        s = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        residual = fp(s);
        converged = residual.abs() <= tol;
    }

    let tau_n = s;
    let theta_n = n as f64 * tau_n / sv;
    let zeta_n = n as f64 * epsilon / sv;
    let mut log_mgf = Kahan::default();
    for j in 0..table.past_len(n) {
        log_mgf.add(noise.log_mgf(theta_n * table.increment(j, n)));
    }
    Ok(TiltSolution {
        n,
        epsilon,
        tau_n,
        theta_n,
        zeta_n,
        log_mgf_sn: log_mgf.value(),
        sigma_n2: sv,
    })
}

/// One importance-sampled path, reduced to the statistics the estimators
/// consume. The full path is available via
/// [`ConditionedSampler::sample_with_path`].
#[derive(Debug, Clone, Copy)]
pub struct ConditionedPathSample {
    /// `S_n(0)`.
    pub s0: f64,
    /// `S_n(0) >= n eps`.
    pub in_event: bool,
    /// `log E e^{theta_n S_n} - theta_n S_n(0)`, the log likelihood ratio
    /// back to the original measure.
    pub log_weight: f64,
    /// `zeta_n (S_n(0) - n eps)`.
    pub overshoot_scaled: f64,
    /// `n^{-beta} I_n`; `None` when the window event still held at the
    /// horizon (censored).
    pub in_scaled: Option<f64>,
    pub i_n: Option<usize>,
}

enum PastSampler {
    /// Per-coordinate mean shifts `theta_n (A_j - A_{j-n}) sigma_Z^2`.
    Gaussian { sd: f64, means: Vec<f64> },
    /// Per-coordinate tilted mixtures: cumulative weights (k per
    /// coordinate) plus the coordinate tilt for the mean shifts.
    Mixture {
        base_means: Vec<f64>,
        base_sds: Vec<f64>,
        cumulative: Vec<f64>,
        thetas: Vec<f64>,
    },
}

/// Sampler for paths conditioned (by tilting) to make `E_0` likely.
pub struct ConditionedSampler {
    sim: WindowSimulator,
    tilt: TiltSolution,
    noise: NoiseSpec,
    past: PastSampler,
    n_beta: f64,
    n_eps: f64,
}

impl ConditionedSampler {
    pub fn new(
        table: Arc<CoefficientTable>,
        tilt: TiltSolution,
        noise: NoiseSpec,
        horizon: usize,
    ) -> Result<Self> {
        let n = tilt.n;
        let consts = params::derive_constants(table.alpha, noise.variance())?;
        let sim = WindowSimulator::new(table, n, horizon, tilt.epsilon)?;
        let past_len = sim.past_len();
        let past = match &noise {
            NoiseSpec::Gaussian { sigma2 } => {
                let mut means = Vec::with_capacity(past_len);
                for j in 0..past_len {
                    means.push(tilt.theta_n * sim.table().increment(j, n) * sigma2);
                }
                PastSampler::Gaussian {
                    sd: sigma2.sqrt(),
                    means,
                }
            }
            NoiseSpec::SymmetricGaussianMixture { components } => {
                let k = components.len();
                let mut cumulative = Vec::with_capacity(past_len * k);
                let mut thetas = Vec::with_capacity(past_len);
                for j in 0..past_len {
                    let theta_j = tilt.theta_n * sim.table().increment(j, n);
                    thetas.push(theta_j);
                    // tilted component weights w_k e^{theta mu_k + theta^2 s_k^2/2}
                    let mut logits: Vec<f64> = components
                        .iter()
                        .map(|c| {
                            c.weight.ln() + theta_j * c.mean + 0.5 * theta_j * theta_j * c.sd * c.sd
                        })
                        .collect();
                    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let mut total = 0.0;
                    for l in logits.iter_mut() {
                        *l = (*l - max).exp();
                        total += *l;
                    }
                    let mut acc = 0.0;
                    for l in logits.iter() {
                        acc += l / total;
                        cumulative.push(acc);
                    }
                }
                PastSampler::Mixture {
                    base_means: components.iter().map(|c| c.mean).collect(),
                    base_sds: components.iter().map(|c| c.sd).collect(),
                    cumulative,
                    thetas,
                }
            }
        };
        let n_eps = n as f64 * tilt.epsilon;
        Ok(Self {
            sim,
            tilt,
            noise,
            past,
            n_beta: (n as f64).powf(consts.beta),
            n_eps,
        })
    }

    /// Plain Monte Carlo sampler (zero tilt), the rejection-sampling
    /// workhorse.
    pub fn untilted(
        table: Arc<CoefficientTable>,
        n: usize,
        epsilon: f64,
        noise: NoiseSpec,
        horizon: usize,
    ) -> Result<Self> {
        let tilt = TiltSolution::untilted(&table, n, epsilon, &noise)?;
        Self::new(table, tilt, noise, horizon)
    }

    pub fn tilt(&self) -> &TiltSolution {
        &self.tilt
    }

    pub fn simulator(&self) -> &WindowSimulator {
        &self.sim
    }

    fn draw_past<R: Rng + ?Sized>(&self, rng: &mut R, buf: &mut Vec<f64>) {
        buf.clear();
        match &self.past {
            PastSampler::Gaussian { sd, means } => {
                for m in means {
                    let g: f64 = rng.sample(StandardNormal);
                    buf.push(m + sd * g);
                }
            }
            PastSampler::Mixture {
                base_means,
                base_sds,
                cumulative,
                thetas,
            } => {
                let k = base_means.len();
                for (j, theta_j) in thetas.iter().enumerate() {
                    let u: f64 = rng.random();
                    let row = &cumulative[j * k..(j + 1) * k];
                    let mut idx = k - 1;
                    for (i, c) in row.iter().enumerate() {
                        if u < *c {
                            idx = i;
                            break;
                        }
                    }
                    let g: f64 = rng.sample(StandardNormal);
                    let mean = base_means[idx] + theta_j * base_sds[idx] * base_sds[idx];
                    buf.push(mean + base_sds[idx] * g);
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ConditionedPathSample> {
        Ok(self.sample_with_path(rng)?.0)
    }

    pub fn sample_with_path<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
    ) -> Result<(ConditionedPathSample, WindowPath)> {
        let mut past = Vec::new();
        self.draw_past(rng, &mut past);
        // future noises do not enter S_n(0); they stay untilted
        let future = self.noise.sample(rng, self.sim.horizon());
        let path = self.sim.simulate(&past, &future)?;
        let s0 = path.s[0];
        let sample = ConditionedPathSample {
            s0,
            in_event: s0 >= self.n_eps,
            log_weight: self.tilt.log_mgf_sn - self.tilt.theta_n * s0,
            overshoot_scaled: self.tilt.zeta_n * (s0 - self.n_eps),
            in_scaled: path.i_n.map(|j| j as f64 / self.n_beta),
            i_n: path.i_n,
        };
        Ok((sample, path))
    }
}

/// Simulate replicas `first_index .. first_index + count` in parallel with
/// per-replica derived streams; output order is by replica index, so the
/// result is independent of the thread count.
pub fn sample_batch(
    sampler: &ConditionedSampler,
    master_seed: u64,
    domain: StreamDomain,
    first_index: u64,
    count: usize,
) -> Result<Vec<ConditionedPathSample>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(master_seed, domain, first_index + i);
            sampler.sample(&mut rng)
        })
        .collect()
}

/// Keep sampling batches until at least `target_in_event` samples hit the
/// event (or `max_replicas` is reached); deterministic in the master
/// seed. `first_index` namespaces the replica streams (window sizes in a
/// ladder use disjoint index ranges).
pub fn sample_until_in_event(
    sampler: &ConditionedSampler,
    master_seed: u64,
    domain: StreamDomain,
    first_index: u64,
    target_in_event: usize,
    batch: usize,
    max_replicas: usize,
) -> Result<Vec<ConditionedPathSample>> {
    let mut out: Vec<ConditionedPathSample> = Vec::new();
    let mut in_event = 0usize;
    let mut next = 0u64;
    while in_event < target_in_event && (next as usize) < max_replicas {
        let take = batch.min(max_replicas - next as usize);
        let chunk = sample_batch(sampler, master_seed, domain, first_index + next, take)?;
        next += take as u64;
        in_event += chunk.iter().filter(|s| s.in_event).count();
        out.extend(chunk);
    }
    Ok(out)
}

/// Unnormalized importance-sampling estimate of `P(E_0)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProbabilityEstimate {
    pub p_hat: f64,
    pub std_err: f64,
    pub replicas: usize,
    pub in_event: usize,
    /// True when no replica hit the event (estimate collapsed to zero).
    pub degenerate: bool,
}

/// Estimate `P(E_0)` from importance-sampled replicas.
pub fn estimate_event_probability(
    samples: &[ConditionedPathSample],
) -> Result<ProbabilityEstimate> {
    if samples.len() < 100 {
        return Err(Error::TooFewSamples {
            needed: 100,
            got: samples.len(),
        });
    }
    let n = samples.len() as f64;
    let mut sum = Kahan::default();
    let mut in_event = 0usize;
    for s in samples {
        if s.in_event {
            in_event += 1;
            sum.add(s.log_weight.exp());
        }
    }
    let p_hat = sum.value() / n;
    let mut var = Kahan::default();
    for s in samples {
        let w = if s.in_event { s.log_weight.exp() } else { 0.0 };
        var.add((w - p_hat) * (w - p_hat));
    }
    let std_err = (var.value() / (n * (n - 1.0))).sqrt();
    Ok(ProbabilityEstimate {
        p_hat,
        std_err,
        replicas: samples.len(),
        in_event,
        degenerate: in_event == 0,
    })
}

/// Statistics whose conditional law (given `E_0`) is of interest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionedStatistic {
    /// `n^{-beta} I_n`.
    InScaled,
    /// `zeta_n T_n^*`.
    OvershootScaled,
}

/// Self-normalized weighted law of a statistic over the in-event samples.
/// Censored `I_n` values are excluded with their weight fraction recorded
/// in the law metadata.
pub fn conditional_law(
    samples: &[ConditionedPathSample],
    statistic: ConditionedStatistic,
    mut meta: LawMeta,
) -> Result<EmpiricalLaw> {
    let hits: Vec<&ConditionedPathSample> = samples.iter().filter(|s| s.in_event).collect();
    if hits.is_empty() {
        return Err(Error::NoInEventSamples(format!(
            "{} replicas, none in event",
            samples.len()
        )));
    }
    // weights in log space, stabilized by the max before exponentiation
    let max_lw = hits
        .iter()
        .map(|s| s.log_weight)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut values = Vec::with_capacity(hits.len());
    let mut weights = Vec::with_capacity(hits.len());
    let mut censored_weight = 0.0;
    let mut total_weight = 0.0;
    for s in &hits {
        let w = (s.log_weight - max_lw).exp();
        total_weight += w;
        match statistic {
            ConditionedStatistic::InScaled => match s.in_scaled {
                Some(v) => {
                    values.push(v);
                    weights.push(w);
                }
                None => censored_weight += w,
            },
            ConditionedStatistic::OvershootScaled => {
                values.push(s.overshoot_scaled);
                weights.push(w);
            }
        }
    }
    meta.censored_fraction = censored_weight / total_weight;
    if values.is_empty() {
        return Err(Error::NoInEventSamples(
            "every in-event replica was censored at the horizon".into(),
        ));
    }
    EmpiricalLaw::from_weighted(values, weights, meta)
}

/// Result of brute-force rejection sampling.
#[derive(Debug, Clone)]
pub struct RejectionOutcome {
    pub samples: Vec<ConditionedPathSample>,
    pub attempts: usize,
    pub acceptance_rate: f64,
}

/// Simulate `budget` unconditioned paths and keep those in the event
/// (unit weights). The sampler must carry the zero tilt.
pub fn rejection_sample(
    sampler: &ConditionedSampler,
    master_seed: u64,
    budget: usize,
) -> Result<RejectionOutcome> {
    if budget < 1 {
        return Err(Error::InvalidParameter {
            name: "budget",
            value: budget as f64,
            constraint: "rejection sampling needs a positive budget",
        });
    }
    if sampler.tilt().theta_n != 0.0 {
        return Err(Error::Config(
            "rejection_sample requires the untilted sampler".into(),
        ));
    }
    let all = sample_batch(sampler, master_seed, StreamDomain::Rejection, 0, budget)?;
    let samples: Vec<ConditionedPathSample> = all.into_iter().filter(|s| s.in_event).collect();
    if samples.is_empty() {
        // 95% upper confidence bound on the acceptance rate
        return Err(Error::RejectionExhausted {
            budget,
            rate_bound: 3.0 / budget as f64,
        });
    }
    let acceptance_rate = samples.len() as f64 / budget as f64;
    Ok(RejectionOutcome {
        samples,
        attempts: budget,
        acceptance_rate,
    })
}
