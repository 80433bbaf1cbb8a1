//! The limit objects: fractional Brownian motion on a grid, sampled
//! exactly by circulant embedding of the fractional Gaussian noise
//! covariance, and the first hitting time of the randomly shifted
//! polynomial barrier
//!
//! `tau = inf{ t >= 0 : B_H(t) <= (2 C_a)^{-1/2} eps t^{2H}
//!                               - (C_a/2)^{1/2} sigma_Z^2 eps^{-1} T_0 }`
//!
//! with `T_0` a standard exponential independent of `B_H`.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;
use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};
use crate::law::{EmpiricalLaw, LawMeta};
use crate::params::DerivedConstants;
use crate::rng::{stream, StreamDomain};

/// One fBM path on a uniform grid, `values[k] = B_H(k dt)`.
#[derive(Debug, Clone)]
pub struct FbmGrid {
    pub hurst: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl FbmGrid {
    /// Number of grid points including `t = 0`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest time on the grid.
    pub fn horizon(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.dt
    }
}

enum Factorization {
    /// Davies-Harte: spectral square root of the circulant embedding,
    /// `sqrt(lambda_k / M)` pre-scaled.
    Circulant {
        scaled_sqrt_eigs: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
    },
    /// Dense Cholesky factor of the increment covariance (row-packed
    /// lower triangle), for short grids or failed embeddings.
    Cholesky { factor: Vec<f64>, steps: usize },
}

/// Reusable exact sampler of fractional Gaussian noise with `steps`
/// increments of size `dt`.
pub struct FbmSampler {
    pub hurst: f64,
    pub dt: f64,
    steps: usize,
    factorization: Factorization,
}

/// Autocovariance of fGN increments at lag `k` (unit grid scale applied).
fn fgn_autocov(h: f64, dt: f64, k: usize) -> f64 {
    let two_h = 2.0 * h;
    let k = k as f64;
    0.5 * dt.powf(two_h)
        * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).abs().powf(two_h))
}

const CHOLESKY_CAP: usize = 4096;

impl FbmSampler {
    pub fn new(hurst: f64, dt: f64, steps: usize) -> Result<Self> {
        if !(hurst > 0.0) || !(hurst < 1.0) {
            return Err(Error::InvalidParameter {
                name: "hurst",
                value: hurst,
                constraint: "H must lie in (0, 1)",
            });
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter {
                name: "dt",
                value: dt,
                constraint: "grid step must be positive",
            });
        }
        if steps == 0 {
            return Err(Error::InvalidParameter {
                name: "steps",
                value: 0.0,
                constraint: "need at least one increment",
            });
        }
        // very short grids go straight to the dense factorization
        if steps <= 16 {
            return Self::new_cholesky(hurst, dt, steps);
        }
        let m = 2 * steps;
        let mut row: Vec<Complex<f64>> = Vec::with_capacity(m);
        for k in 0..=steps {
            row.push(Complex::new(fgn_autocov(hurst, dt, k), 0.0));
        }
        for k in (1..steps).rev() {
            row.push(Complex::new(fgn_autocov(hurst, dt, k), 0.0));
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        fft.process(&mut row);
        let max_eig = row.iter().map(|c| c.re).fold(0.0f64, f64::max);
        let min_eig = row.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
        if min_eig < -1e-9 * max_eig {
            // genuinely indefinite embedding
            return Self::new_cholesky(hurst, dt, steps);
        }
        let scaled_sqrt_eigs: Vec<f64> = row
            .iter()
            .map(|c| (c.re.max(0.0) / m as f64).sqrt())
            .collect();
        Ok(Self {
            hurst,
            dt,
            steps,
            factorization: Factorization::Circulant {
                scaled_sqrt_eigs,
                fft,
            },
        })
    }

    fn new_cholesky(hurst: f64, dt: f64, steps: usize) -> Result<Self> {
        if steps > CHOLESKY_CAP {
            return Err(Error::FbmResource(format!(
                "circulant embedding indefinite and {steps} steps exceeds the dense fallback cap {CHOLESKY_CAP}"
            )));
        }
        // dense Cholesky of the Toeplitz increment covariance
        let n = steps;
        let mut l = vec![0.0f64; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = fgn_autocov(hurst, dt, i - j);
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if sum <= 0.0 {
                        return Err(Error::FbmResource(format!(
                            "increment covariance lost positive definiteness at row {i}"
                        )));
                    }
                    l[i * n + j] = sum.sqrt();
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        Ok(Self {
            hurst,
            dt,
            steps,
            factorization: Factorization::Cholesky { factor: l, steps },
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn uses_dense_fallback(&self) -> bool {
        matches!(self.factorization, Factorization::Cholesky { .. })
    }

    /// One exact draw of the `steps` fGN increments.
    pub fn sample_increments<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.factorization {
            Factorization::Circulant {
                scaled_sqrt_eigs,
                fft,
            } => {
                let n = self.steps;
                let m = 2 * n;
                let mut w = vec![Complex::new(0.0, 0.0); m];
                let g0: f64 = rng.sample(StandardNormal);
                w[0] = Complex::new(scaled_sqrt_eigs[0] * g0, 0.0);
                let gn: f64 = rng.sample(StandardNormal);
                w[n] = Complex::new(scaled_sqrt_eigs[n] * gn, 0.0);
                let half = std::f64::consts::FRAC_1_SQRT_2;
                for k in 1..n {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    let a = scaled_sqrt_eigs[k] * half;
                    w[k] = Complex::new(a * re, a * im);
                    w[m - k] = w[k].conj();
                }
                fft.process(&mut w);
                w[..n].iter().map(|c| c.re).collect()
            }
            Factorization::Cholesky { factor, steps } => {
                let n = *steps;
                let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                let mut out = vec![0.0; n];
                for i in 0..n {
                    let mut acc = 0.0;
                    for k in 0..=i {
                        acc += factor[i * n + k] * g[k];
                    }
                    out[i] = acc;
                }
                out
            }
        }
    }

    /// One fBM path: cumulative sum of the increments with `B(0) = 0`.
    pub fn sample_grid<R: Rng + ?Sized>(&self, rng: &mut R) -> FbmGrid {
        let inc = self.sample_increments(rng);
        let mut values = Vec::with_capacity(inc.len() + 1);
        values.push(0.0);
        let mut acc = 0.0;
        for x in inc {
            acc += x;
            values.push(acc);
        }
        FbmGrid {
            hurst: self.hurst,
            dt: self.dt,
            values,
        }
    }
}

/// One-shot grid sample: `length` points including `t = 0`.
pub fn sample_fbm<R: Rng + ?Sized>(h: f64, dt: f64, length: usize, rng: &mut R) -> Result<FbmGrid> {
    if length < 1 {
        return Err(Error::InvalidParameter {
            name: "length",
            value: length as f64,
            constraint: "grid needs at least the origin",
        });
    }
    if length == 1 {
        return Ok(FbmGrid {
            hurst: h,
            dt,
            values: vec![0.0],
        });
    }
    Ok(FbmSampler::new(h, dt, length - 1)?.sample_grid(rng))
}

/// Barrier parameters of the hitting problem.
#[derive(Debug, Clone, Copy)]
pub struct Barrier {
    /// `(2 C_alpha)^{-1/2} eps`, the polynomial drift coefficient.
    pub drift: f64,
    /// `(C_alpha / 2)^{1/2} sigma_Z^2 / eps`, the shift multiplying `T_0`.
    pub shift: f64,
    /// `2H = 3 - 2 alpha`, the drift exponent.
    pub exponent: f64,
}

impl Barrier {
    pub fn new(constants: &DerivedConstants, sigma_z2: f64, epsilon: f64) -> Self {
        Self {
            drift: epsilon / (2.0 * constants.c_alpha).sqrt(),
            shift: (constants.c_alpha / 2.0).sqrt() * sigma_z2 / epsilon,
            exponent: 2.0 * constants.hurst,
        }
    }

    #[inline]
    pub fn at(&self, t: f64, t0: f64) -> f64 {
        self.drift * t.powf(self.exponent) - self.shift * t0
    }
}

/// First grid time with `B_H(t) <= barrier(t)`, if any on this grid.
pub fn hitting_time_on_grid(grid: &FbmGrid, barrier: &Barrier, t0: f64) -> Option<f64> {
    for (k, &b) in grid.values.iter().enumerate() {
        let t = k as f64 * grid.dt;
        if b <= barrier.at(t, t0) {
            return Some(t);
        }
    }
    None
}

/// One hitting-time draw.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HittingSample {
    /// The exponential shift actually used.
    pub t0: f64,
    /// First grid time at or below the barrier.
    pub tau: f64,
    pub grid_dt: f64,
    /// Grid horizon (in limiting-time units) at termination.
    pub horizon_used: f64,
    /// Number of doublings needed before the hit.
    pub extensions: u32,
    /// `T0 = 0` boundary case (hit at the origin, measure zero).
    pub hit_at_zero: bool,
}

/// Sampler of the hitting time `tau_eps`, with horizon doubling and
/// per-length factorization caching.
pub struct TauSampler {
    pub barrier: Barrier,
    pub hurst: f64,
    pub dt: f64,
    /// Initial horizon in limiting-time units.
    pub base_units: f64,
    /// Hard cap; exceeding it is a non-termination error.
    pub cap_units: f64,
    levels: RwLock<Vec<Arc<FbmSampler>>>,
}

impl TauSampler {
    pub fn new(constants: &DerivedConstants, sigma_z2: f64, epsilon: f64, dt: f64) -> Result<Self> {
        Self::with_horizon(constants, sigma_z2, epsilon, dt, 8.0, 1024.0)
    }

    pub fn with_horizon(
        constants: &DerivedConstants,
        sigma_z2: f64,
        epsilon: f64,
        dt: f64,
        base_units: f64,
        cap_units: f64,
    ) -> Result<Self> {
        if !(epsilon > 0.0) || !(dt > 0.0) || !(sigma_z2 > 0.0) {
            return Err(Error::InvalidParameter {
                name: "epsilon/dt/sigma_z2",
                value: epsilon.min(dt).min(sigma_z2),
                constraint: "must be positive",
            });
        }
        Ok(Self {
            barrier: Barrier::new(constants, sigma_z2, epsilon),
            hurst: constants.hurst,
            dt,
            base_units,
            cap_units,
            levels: RwLock::new(Vec::new()),
        })
    }

    fn sampler_for_level(&self, level: u32) -> Result<Arc<FbmSampler>> {
        {
            let levels = self.levels.read().expect("lock poisoned");
            if let Some(s) = levels.get(level as usize) {
                return Ok(s.clone());
            }
        }
        let mut levels = self.levels.write().expect("lock poisoned");
        while levels.len() <= level as usize {
            let units = self.base_units * (1u64 << levels.len()) as f64;
            let steps = (units / self.dt).ceil() as usize;
            levels.push(Arc::new(FbmSampler::new(self.hurst, self.dt, steps)?));
        }
        Ok(levels[level as usize].clone())
    }

    /// Draw `T0 ~ Exp(1)` then the hitting time.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<HittingSample> {
        let t0: f64 = rng.sample(Exp1);
        self.sample_with_t0(t0, rng)
    }

    /// Hitting time for a forced shift `T0 = t0` (used by coupling tests
    /// and the `t0 = 0` boundary).
    pub fn sample_with_t0<R: Rng + ?Sized>(&self, t0: f64, rng: &mut R) -> Result<HittingSample> {
        if t0 <= 0.0 {
            // barrier(0) = -shift * t0 >= 0 = B(0): hit at the origin
            return Ok(HittingSample {
                t0,
                tau: 0.0,
                grid_dt: self.dt,
                horizon_used: 0.0,
                extensions: 0,
                hit_at_zero: true,
            });
        }
        let mut level: u32 = 0;
        loop {
            let units = self.base_units * (1u64 << level) as f64;
            if units > self.cap_units {
                return Err(Error::HorizonCap {
                    cap_units: self.cap_units,
                    t0,
                });
            }
            // regenerate the whole path at the doubled length with fresh
            // draws from the replica's stream
            let sampler = self.sampler_for_level(level)?;
            let grid = sampler.sample_grid(rng);
            if let Some(tau) = hitting_time_on_grid(&grid, &self.barrier, t0) {
                debug_assert!(tau > 0.0, "positive shift must not hit at the origin");
                return Ok(HittingSample {
                    t0,
                    tau,
                    grid_dt: self.dt,
                    horizon_used: grid.horizon(),
                    extensions: level,
                    hit_at_zero: false,
                });
            }
            level += 1;
        }
    }
}

/// One-shot hitting-time draw with the default horizon policy (8 units,
/// doubling, hard cap 1024). For repeated sampling build a [`TauSampler`]
/// once and reuse its cached factorizations.
pub fn sample_tau<R: Rng + ?Sized>(
    constants: &DerivedConstants,
    sigma_z2: f64,
    epsilon: f64,
    dt: f64,
    rng: &mut R,
) -> Result<HittingSample> {
    TauSampler::new(constants, sigma_z2, epsilon, dt)?.sample(rng)
}

/// Summary counters from a tau-law run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TauLawStats {
    pub samples: usize,
    pub censored: usize,
    pub max_extensions: u32,
    pub zero_hits: usize,
}

/// Unweighted empirical law of `n_samples` independent hitting times,
/// sampled in parallel on derived streams `first_index ..`.
pub fn tau_law(
    sampler: &TauSampler,
    n_samples: usize,
    master_seed: u64,
    first_index: u64,
) -> Result<(EmpiricalLaw, TauLawStats)> {
    if n_samples < 1 {
        return Err(Error::InvalidParameter {
            name: "n_samples",
            value: 0.0,
            constraint: "need at least one tau sample",
        });
    }
    let draws: Vec<Result<HittingSample>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(master_seed, StreamDomain::Fbm, first_index + i);
            sampler.sample(&mut rng)
        })
        .collect();
    let mut values = Vec::with_capacity(n_samples);
    let mut censored = 0usize;
    let mut max_ext = 0u32;
    let mut zero_hits = 0usize;
    for d in draws {
        match d {
            Ok(h) => {
                values.push(h.tau);
                max_ext = max_ext.max(h.extensions);
                if h.hit_at_zero {
                    zero_hits += 1;
                }
            }
            Err(Error::HorizonCap { .. }) => censored += 1,
            Err(e) => return Err(e),
        }
    }
    let stats = TauLawStats {
        samples: n_samples,
        censored,
        max_extensions: max_ext,
        zero_hits,
    };
    let meta = LawMeta {
        source: "tau_law".into(),
        scale: Some(sampler.dt),
        censored_fraction: censored as f64 / n_samples as f64,
        seed: Some(master_seed),
    };
    Ok((EmpiricalLaw::from_unweighted(values, meta)?, stats))
}
