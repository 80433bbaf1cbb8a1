//! Noise families with analytic log-MGFs and exact exponential tilting.
//!
//! Two families are supported: centred Gaussians and finite symmetric
//! Gaussian mixtures. Both are entire (all exponential moments finite),
//! have smooth densities, closed-form moments of every order, and are
//! closed under exponential tilting, so the change of measure used by the
//! rare-event sampler is exact rather than approximate.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;
use crate::special;

/// One Gaussian component `weight * N(mean, sd^2)`; wire names `w`, `mu`,
/// `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    #[serde(rename = "w")]
    pub weight: f64,
    #[serde(rename = "mu")]
    pub mean: f64,
    #[serde(rename = "s")]
    pub sd: f64,
}

/// A centred noise distribution with finite exponential moments.
///
/// Wire format: `{family = "gaussian", sigma_Z2 = ...}` or
/// `{family = "symmetric_gaussian_mixture", components = [{w, mu, s}, ..]}`.
/// Deserialized values must pass [`NoiseSpec::validate`] before use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NoiseSpec {
    Gaussian {
        #[serde(rename = "sigma_Z2")]
        sigma2: f64,
    },
    SymmetricGaussianMixture {
        components: Vec<MixtureComponent>,
    },
}

impl NoiseSpec {
    pub fn gaussian(sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) {
            return Err(Error::InvalidParameter {
                name: "sigma2",
                value: sigma2,
                constraint: "variance must be positive",
            });
        }
        Ok(NoiseSpec::Gaussian { sigma2 })
    }

    /// Build a symmetric mixture. Components with `mean != 0` must appear
    /// in exact `(weight, -mean, sd)` / `(weight, +mean, sd)` pairs.
    pub fn symmetric_mixture(components: Vec<MixtureComponent>) -> Result<Self> {
        let components: Vec<MixtureComponent> =
            components.into_iter().filter(|c| c.weight != 0.0).collect();
        let spec = NoiseSpec::SymmetricGaussianMixture { components };
        spec.validate()?;
        Ok(spec)
    }

    /// Check the structural invariants (positive variance, weights summing
    /// to one, exact mirror symmetry). Required after deserializing.
    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseSpec::Gaussian { sigma2 } => {
                if !(*sigma2 > 0.0) || !sigma2.is_finite() {
                    return Err(Error::InvalidParameter {
                        name: "sigma_Z2",
                        value: *sigma2,
                        constraint: "variance must be positive",
                    });
                }
            }
            NoiseSpec::SymmetricGaussianMixture { components } => {
                if components.is_empty() {
                    return Err(Error::Config("mixture needs at least one component".into()));
                }
                let mut total = 0.0;
                for c in components {
                    if !(c.weight > 0.0) || !c.weight.is_finite() {
                        return Err(Error::Config(format!("bad component weight {}", c.weight)));
                    }
                    if !(c.sd > 0.0) || !c.sd.is_finite() {
                        return Err(Error::Config(format!("bad component sd {}", c.sd)));
                    }
                    if !c.mean.is_finite() {
                        return Err(Error::Config(format!("bad component mean {}", c.mean)));
                    }
                    total += c.weight;
                }
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::Config(format!(
                        "component weights sum to {total}, not 1"
                    )));
                }
                // symmetry: every off-centre component needs its mirror
                let mut unmatched: Vec<&MixtureComponent> =
                    components.iter().filter(|c| c.mean != 0.0).collect();
                while let Some(c) = unmatched.pop() {
                    let pos = unmatched
                        .iter()
                        .position(|d| d.weight == c.weight && d.sd == c.sd && d.mean == -c.mean);
                    match pos {
                        Some(p) => {
                            unmatched.swap_remove(p);
                        }
                        None => {
                            return Err(Error::Config(format!(
                                "component at mean {} has no mirror image",
                                c.mean
                            )))
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn variance(&self) -> f64 {
        match self {
            NoiseSpec::Gaussian { sigma2 } => *sigma2,
            NoiseSpec::SymmetricGaussianMixture { components } => components
                .iter()
                .map(|c| c.weight * (c.mean * c.mean + c.sd * c.sd))
                .sum(),
        }
    }

    /// Probability density at `z`.
    pub fn density(&self, z: f64) -> f64 {
        let phi = |z: f64, m: f64, s: f64| {
            ((z - m) / s).powi(2).mul_add(-0.5, 0.0).exp()
                / (s * (2.0 * std::f64::consts::PI).sqrt())
        };
        match self {
            NoiseSpec::Gaussian { sigma2 } => phi(z, 0.0, sigma2.sqrt()),
            NoiseSpec::SymmetricGaussianMixture { components } => components
                .iter()
                .map(|c| c.weight * phi(z, c.mean, c.sd))
                .sum(),
        }
    }

    /// Log-Laplace transform `phi_Z(t) = log E exp(t Z)`.
    pub fn log_mgf(&self, t: f64) -> f64 {
        match self {
            NoiseSpec::Gaussian { sigma2 } => 0.5 * t * t * sigma2,
            NoiseSpec::SymmetricGaussianMixture { components } => {
                let mut max = f64::NEG_INFINITY;
                for c in components {
                    let e = c.weight.ln() + t * c.mean + 0.5 * t * t * c.sd * c.sd;
                    if e > max {
                        max = e;
                    }
                }
                let sum: f64 = components
                    .iter()
                    .map(|c| (c.weight.ln() + t * c.mean + 0.5 * t * t * c.sd * c.sd - max).exp())
                    .sum();
                max + sum.ln()
            }
        }
    }

    /// `phi_Z'(t)`, the mean of the `t`-tilted law; continuous and
    /// nondecreasing, with `phi_Z'(0) = 0`.
    pub fn log_mgf_prime(&self, t: f64) -> f64 {
        match self {
            NoiseSpec::Gaussian { sigma2 } => t * sigma2,
            NoiseSpec::SymmetricGaussianMixture { components } => {
                let w = tilted_log_weights(components, t);
                components
                    .iter()
                    .zip(w.iter())
                    .map(|(c, lw)| lw.exp() * (c.mean + t * c.sd * c.sd))
                    .sum()
            }
        }
    }

    /// `phi_Z''(t)`, the variance of the `t`-tilted law.
    pub fn log_mgf_second(&self, t: f64) -> f64 {
        match self {
            NoiseSpec::Gaussian { sigma2 } => *sigma2,
            NoiseSpec::SymmetricGaussianMixture { components } => {
                let w = tilted_log_weights(components, t);
                let mean: f64 = components
                    .iter()
                    .zip(w.iter())
                    .map(|(c, lw)| lw.exp() * (c.mean + t * c.sd * c.sd))
                    .sum();
                let second: f64 = components
                    .iter()
                    .zip(w.iter())
                    .map(|(c, lw)| {
                        let m = c.mean + t * c.sd * c.sd;
                        lw.exp() * (m * m + c.sd * c.sd)
                    })
                    .sum();
                second - mean * mean
            }
        }
    }

    /// Exact raw moment `E Z^k`.
    pub fn moment(&self, k: u32) -> f64 {
        match self {
            NoiseSpec::Gaussian { sigma2 } => gaussian_raw_moment(k, 0.0, sigma2.sqrt()),
            NoiseSpec::SymmetricGaussianMixture { components } => components
                .iter()
                .map(|c| c.weight * gaussian_raw_moment(k, c.mean, c.sd))
                .sum(),
        }
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseSpec::Gaussian { sigma2 } => {
                let g: f64 = rng.sample(StandardNormal);
                g * sigma2.sqrt()
            }
            NoiseSpec::SymmetricGaussianMixture { components } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut chosen = &components[components.len() - 1];
                for c in components {
                    acc += c.weight;
                    if u < acc {
                        chosen = c;
                        break;
                    }
                }
                let g: f64 = rng.sample(StandardNormal);
                chosen.mean + chosen.sd * g
            }
        }
    }

    /// `count` i.i.d. draws.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<f64> {
        (0..count).map(|_| self.sample_one(rng)).collect()
    }
}

fn tilted_log_weights(components: &[MixtureComponent], t: f64) -> Vec<f64> {
    let mut lw: Vec<f64> = components
        .iter()
        .map(|c| c.weight.ln() + t * c.mean + 0.5 * t * t * c.sd * c.sd)
        .collect();
    let max = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_norm = lw.iter().map(|l| (l - max).exp()).sum::<f64>().ln() + max;
    for l in lw.iter_mut() {
        *l -= log_norm;
    }
    lw
}

/// Raw moment of `N(mean, sd^2)` by binomial expansion over the location.
fn gaussian_raw_moment(k: u32, mean: f64, sd: f64) -> f64 {
    let mut acc = 0.0;
    for j in (0..=k).step_by(2) {
        // E G^j = (j-1)!! for standard normal, odd moments vanish
        let central = special::odd_double_factorial(j / 2) * sd.powi(j as i32);
        acc += binomial(k, j) * central * mean.powi((k - j) as i32);
    }
    acc
}

fn binomial(n: u32, k: u32) -> f64 {
    let mut acc = 1.0;
    for i in 0..k.min(n - k) {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Raw moment of `N(0, sigma2)`, the matching target.
pub fn gaussian_moment(k: u32, sigma2: f64) -> f64 {
    gaussian_raw_moment(k, 0.0, sigma2.sqrt())
}

/// The exponentially tilted law `G_theta(dz) ∝ e^{theta z} F_Z(dz)`,
/// resolved into closed form: a Gaussian tilts into a mean-shifted
/// Gaussian, a mixture into a mixture with reweighted components and
/// shifted component means.
#[derive(Debug, Clone)]
pub struct TiltedNoise {
    pub theta: f64,
    kind: TiltedKind,
}

#[derive(Debug, Clone)]
enum TiltedKind {
    Gaussian {
        mean: f64,
        sd: f64,
    },
    Mixture {
        cumulative: Vec<f64>,
        means: Vec<f64>,
        sds: Vec<f64>,
    },
}

impl TiltedNoise {
    pub fn new(spec: &NoiseSpec, theta: f64) -> Self {
        let kind = match spec {
            NoiseSpec::Gaussian { sigma2 } => TiltedKind::Gaussian {
                mean: theta * sigma2,
                sd: sigma2.sqrt(),
            },
            NoiseSpec::SymmetricGaussianMixture { components } => {
                let weights: Vec<f64> = if theta == 0.0 {
                    components.iter().map(|c| c.weight).collect()
                } else {
                    tilted_log_weights(components, theta)
                        .iter()
                        .map(|l| l.exp())
                        .collect()
                };
                let mut cumulative = Vec::with_capacity(weights.len());
                let mut acc = 0.0;
                for w in &weights {
                    acc += w;
                    cumulative.push(acc);
                }
                TiltedKind::Mixture {
                    cumulative,
                    means: components
                        .iter()
                        .map(|c| c.mean + theta * c.sd * c.sd)
                        .collect(),
                    sds: components.iter().map(|c| c.sd).collect(),
                }
            }
        };
        Self { theta, kind }
    }

    /// Exact mean of the tilted law; equals `phi_Z'(theta)`.
    pub fn mean(&self) -> f64 {
        match &self.kind {
            TiltedKind::Gaussian { mean, .. } => *mean,
            TiltedKind::Mixture {
                cumulative, means, ..
            } => {
                let mut prev = 0.0;
                let mut acc = 0.0;
                for (c, m) in cumulative.iter().zip(means.iter()) {
                    acc += (c - prev) * m;
                    prev = *c;
                }
                acc
            }
        }
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            TiltedKind::Gaussian { mean, sd } => {
                let g: f64 = rng.sample(StandardNormal);
                mean + sd * g
            }
            TiltedKind::Mixture {
                cumulative,
                means,
                sds,
            } => {
                let u: f64 = rng.random();
                let mut idx = cumulative.len() - 1;
                for (i, c) in cumulative.iter().enumerate() {
                    if u < *c {
                        idx = i;
                        break;
                    }
                }
                let g: f64 = rng.sample(StandardNormal);
                means[idx] + sds[idx] * g
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<f64> {
        (0..count).map(|_| self.sample_one(rng)).collect()
    }
}

/// A matched mixture together with its achieved-moment report.
#[derive(Debug, Clone)]
pub struct MatchedMixture {
    pub spec: NoiseSpec,
    pub report: MomentMatchReport,
}

/// How far the constructed mixture is from the Gaussian moment targets.
#[derive(Debug, Clone, Serialize)]
pub struct MomentMatchReport {
    /// Highest order through which all residuals are below tolerance.
    pub matched_through: u32,
    /// `|E Z^i - E G^i| / sigma^i` for `i = 1..=kappa`.
    pub residuals: Vec<f64>,
    /// True when every requested order is matched.
    pub feasible: bool,
}

/// Build a non-Gaussian symmetric mixture whose moments `1..=kappa` match
/// `N(0, sigma_z2)` where the three-component family permits.
///
/// The family is `w N(0, s^2) + (1-w)/2 N(+mu, s^2) + (1-w)/2 N(-mu, s^2)`
/// with `mu = spread * sigma_Z`; the variance constraint fixes `s` for
/// each `w`, odd moments vanish by symmetry, and the fourth moment is
/// driven to `3 sigma_z2^2` by bisection in `w`. Sixth and higher even
/// moments generally cannot be matched by this family; when `kappa >= 6`
/// the report carries the achieved residuals with `feasible = false`
/// instead of failing.
pub fn build_matched_mixture(sigma_z2: f64, kappa: u32, spread: f64) -> Result<MatchedMixture> {
    if kappa < 2 {
        return Err(Error::InvalidParameter {
            name: "kappa",
            value: kappa as f64,
            constraint: "moment matching starts at kappa = 2",
        });
    }
    if !(sigma_z2 > 0.0) {
        return Err(Error::InvalidParameter {
            name: "sigma_z2",
            value: sigma_z2,
            constraint: "variance must be positive",
        });
    }
    if !(spread > 0.0) || !(spread < 3f64.sqrt()) {
        return Err(Error::InvalidParameter {
            name: "spread",
            value: spread,
            constraint: "location spread must lie in (0, sqrt(3)) sigma units",
        });
    }
    let sigma = sigma_z2.sqrt();
    let mu = spread * sigma;

    let family = |w: f64| -> Result<NoiseSpec> {
        let s2 = sigma_z2 - (1.0 - w) * mu * mu;
        if !(s2 > 0.0) {
            return Err(Error::MomentMatchInfeasible {
                kappa,
                achieved: vec![],
            });
        }
        let s = s2.sqrt();
        NoiseSpec::symmetric_mixture(vec![
            MixtureComponent {
                weight: w,
                mean: 0.0,
                sd: s,
            },
            MixtureComponent {
                weight: (1.0 - w) / 2.0,
                mean: mu,
                sd: s,
            },
            MixtureComponent {
                weight: (1.0 - w) / 2.0,
                mean: -mu,
                sd: s,
            },
        ])
    };

    let target4 = 3.0 * sigma_z2 * sigma_z2;
    let resid =
        |w: f64| -> Result<f64> { Ok((family(w)?.moment(4) - target4) / (sigma_z2 * sigma_z2)) };

    // bracket must keep s^2 > 0: (1 - w) spread^2 < 1
    let mut lo = if spread <= 1.0 {
        1e-6
    } else {
        1.0 - 1.0 / (spread * spread) + 1e-6
    };
    let mut hi = 1.0 - 1e-6;
    let (flo, fhi) = (resid(lo)?, resid(hi)?);
    if flo.signum() == fhi.signum() {
        let achieved: Vec<f64> = (1..=kappa)
            .map(|i| family(lo).map(|s| s.moment(i)).unwrap_or(f64::NAN))
            .collect();
        return Err(Error::MomentMatchInfeasible { kappa, achieved });
    }
    let increasing = fhi > flo;
    let mut w = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = resid(w)?;
        if f.abs() <= 1e-12 {
            break;
        }
        if (f > 0.0) == increasing {
            hi = w;
        } else {
            lo = w;
        }
        w = 0.5 * (lo + hi);
    }

    let spec = family(w)?;
    let mut residuals = Vec::with_capacity(kappa as usize);
    let mut matched_through = 0;
    let mut feasible = true;
    for i in 1..=kappa {
        let r = (spec.moment(i) - gaussian_moment(i, sigma_z2)).abs() / sigma.powi(i as i32);
        residuals.push(r);
        if r <= 1e-10 && matched_through == i - 1 {
            matched_through = i;
        } else if r > 1e-10 {
            feasible = false;
        }
    }
    Ok(MatchedMixture {
        spec,
        report: MomentMatchReport {
            matched_through,
            residuals,
            feasible,
        },
    })
}

/// Verdict of the analytic and numeric assumption checks for one noise
/// specification.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    /// Entire MGF (true for both supported families, stated analytically).
    pub exp_moments_finite: bool,
    /// `|E Z^i - E G^i| / sigma^i` for `i = 1..=kappa`.
    pub moment_residuals: Vec<f64>,
    /// First moment order whose residual exceeds tolerance, if any.
    pub first_failed_moment: Option<u32>,
    pub moments_pass: bool,
    /// Numerical bound on `sup_{|theta| <= theta0} int t^2 |chf_theta(t)| dt`.
    pub chf_integral_bound: f64,
    pub chf_finite: bool,
    pub theta0: f64,
}

/// Check the standing noise assumptions: entire MGF, Gaussian moment
/// matching through `kappa`, and integrability of `t^2` times the tilted
/// characteristic function.
pub fn check_assumptions(spec: &NoiseSpec, kappa: u32, theta0: f64) -> AssumptionReport {
    let sigma2 = spec.variance();
    let sigma = sigma2.sqrt();
    let mut moment_residuals = Vec::with_capacity(kappa as usize);
    let mut first_failed = None;
    for i in 1..=kappa {
        let r = (spec.moment(i) - gaussian_moment(i, sigma2)).abs() / sigma.powi(i as i32);
        if r > 1e-8 && first_failed.is_none() {
            first_failed = Some(i);
        }
        moment_residuals.push(r);
    }

    let components: Vec<MixtureComponent> = match spec {
        NoiseSpec::Gaussian { sigma2 } => vec![MixtureComponent {
            weight: 1.0,
            mean: 0.0,
            sd: sigma2.sqrt(),
        }],
        NoiseSpec::SymmetricGaussianMixture { components } => components.clone(),
    };
    let s_min = components
        .iter()
        .map(|c| c.sd)
        .fold(f64::INFINITY, f64::min);
    let mu_max = components.iter().map(|c| c.mean.abs()).fold(0.0, f64::max);
    let s_max = components.iter().map(|c| c.sd).fold(0.0, f64::max);
    let theta0 = theta0.abs().max(1e-6);

    // |sum_k w_k exp((theta + it) mu_k + (theta + it)^2 s_k^2 / 2)|
    let chf_mod = |theta: f64, t: f64| -> f64 {
        let mut re = 0.0;
        let mut im = 0.0;
        for c in &components {
            let r = c.weight * (theta * c.mean + 0.5 * (theta * theta - t * t) * c.sd * c.sd).exp();
            let phase = t * c.mean + theta * t * c.sd * c.sd;
            re += r * phase.cos();
            im += r * phase.sin();
        }
        (re * re + im * im).sqrt()
    };

    // envelope exp(theta0 mu_max + theta0^2 s_max^2/2 - t^2 s_min^2/2) t^2
    // falls below 1e-30 once t^2 s_min^2 / 2 exceeds the head room
    let head = theta0 * mu_max + 0.5 * theta0 * theta0 * s_max * s_max + 75.0;
    let t_max = (2.0 * head / (s_min * s_min)).sqrt().max(10.0);

    let mut bound = 0.0f64;
    let grid = 9;
    for k in 0..=grid {
        let theta = -theta0 + 2.0 * theta0 * (k as f64) / (grid as f64);
        let integral = quad::integrate(|t| t * t * chf_mod(theta, t), 0.0, t_max, 1e-8)
            .map(|(v, _)| 2.0 * v)
            .unwrap_or(f64::INFINITY);
        bound = bound.max(integral);
    }

    AssumptionReport {
        exp_moments_finite: true,
        moments_pass: first_failed.is_none(),
        first_failed_moment: first_failed,
        moment_residuals,
        chf_integral_bound: bound,
        chf_finite: bound.is_finite(),
        theta0,
    }
}
