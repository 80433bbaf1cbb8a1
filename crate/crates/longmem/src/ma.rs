//! Moving-average machinery: coefficient tables, window-sum variance,
//! finite-n asymptotic diagnostics, and fast window simulation with
//! sliding partial sums and first non-occurrence detection.
//!
//! Notation: `a_i` are the MA coefficients, `A_j = a_0 + ... + a_j` their
//! prefix sums (zero for negative index), and the window sum over the
//! shifted window starting at `j` is `S_n(j) = X_j + ... + X_{j+n-1}`.
//! The j-th past noise `Z_{n-1-j}` enters `S_n(0)` with weight
//! `A_j - A_{j-n}`.
//!
//! The infinite past is truncated at depth `j_max` lags before `X_0`, so
//! every sum over past coordinates runs over `j = 0 .. j_max + n - 1`;
//! the same index set is used for the variance, the cumulant sums and the
//! tilted sampler, which is what makes the Gaussian algebra exact.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::conv::{convolve_direct, FftConvolver, FFT_CROSSOVER};
use crate::error::{Error, Result};
use crate::params;

/// Concrete coefficient families with `a_i ~ i^{-alpha}`, positive and
/// eventually monotone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientKind {
    /// `a_i = ((i+1)^{1-alpha} - i^{1-alpha}) / (1-alpha)`, so that
    /// `A_j = (j+1)^{1-alpha} / (1-alpha)` exactly. Monotone from `i = 0`
    /// and free of the slowly-decaying prefix-sum offset that the plain
    /// power families carry, which keeps the finite-n diagnostic ratios
    /// close to their limits at desk-scale `n`.
    #[default]
    SmoothedPower,
    /// `a_i = (i+1)^{-alpha}`.
    PowerShift,
    /// `a_0 = 1`, `a_i = i^{-alpha}` for `i >= 1`.
    PowerAtOne,
}

/// Coefficients and prefix sums out to `j_max + extent`.
#[derive(Debug, Clone)]
pub struct CoefficientTable {
    pub alpha: f64,
    pub kind: CoefficientKind,
    pub j_max: usize,
    a: Vec<f64>,
    prefix: Vec<f64>,
}

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Build the coefficient table for lags `0 ..= j_max + extent`.
pub fn build_coefficients(
    alpha: f64,
    j_max: usize,
    extent: usize,
    kind: CoefficientKind,
) -> Result<CoefficientTable> {
    if !(alpha > 0.5 && alpha < 1.0) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            value: alpha,
            constraint: "alpha must lie strictly inside (1/2, 1)",
        });
    }
    if j_max < 1 {
        return Err(Error::InvalidParameter {
            name: "j_max",
            value: j_max as f64,
            constraint: "past truncation depth must be at least 1",
        });
    }
    let len = j_max + extent + 1;
    let mut a = Vec::with_capacity(len);
    let mut prefix = Vec::with_capacity(len);
    match kind {
        CoefficientKind::SmoothedPower => {
            // prefix sums in closed form, coefficients by differencing
            let p = 1.0 - alpha;
            let inv = 1.0 / p;
            let mut prev = 0.0;
            for i in 0..len {
                let cum = ((i + 1) as f64).powf(p) * inv;
                a.push(cum - prev);
                prefix.push(cum);
                prev = cum;
            }
        }
        CoefficientKind::PowerShift => {
            let mut acc = Kahan::default();
            for i in 0..len {
                let ai = ((i + 1) as f64).powf(-alpha);
                acc.add(ai);
                a.push(ai);
                prefix.push(acc.value());
            }
        }
        CoefficientKind::PowerAtOne => {
            let mut acc = Kahan::default();
            for i in 0..len {
                let ai = if i == 0 { 1.0 } else { (i as f64).powf(-alpha) };
                acc.add(ai);
                a.push(ai);
                prefix.push(acc.value());
            }
        }
    }
    Ok(CoefficientTable {
        alpha,
        kind,
        j_max,
        a,
        prefix,
    })
}

impl CoefficientTable {
    /// Largest lag stored.
    pub fn max_index(&self) -> usize {
        self.a.len() - 1
    }

    #[inline]
    pub fn a(&self, i: usize) -> f64 {
        self.a[i]
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.a
    }

    /// `A_j`, with the convention `A_j = 0` for `j < 0`.
    #[inline]
    pub fn big_a(&self, j: i64) -> f64 {
        if j < 0 {
            0.0
        } else {
            self.prefix[j as usize]
        }
    }

    /// Weight of `Z_{n-1-j}` in `S_n(0)`: `A_j - A_{j-n}`.
    #[inline]
    pub fn increment(&self, j: usize, n: usize) -> f64 {
        let head = self.prefix[j];
        if j >= n {
            head - self.prefix[j - n]
        } else {
            head
        }
    }

    /// Number of modelled past coordinates of `S_n(0)`.
    pub fn past_len(&self, n: usize) -> usize {
        self.j_max + n
    }
}

/// Truncated variance of `S_n` and an analytic bound on the omitted tail.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SigmaN2 {
    /// `sigma_Z^2 sum_{j < j_max + n} (A_j - A_{j-n})^2`.
    pub value: f64,
    /// Bound on the discarded tail via `(A_j - A_{j-n}) <= n a_{j-n+1}`.
    pub tail_bound: f64,
}

/// Variance of the truncated window sum.
pub fn sigma_n2(table: &CoefficientTable, n: usize, sigma_z2: f64) -> Result<SigmaN2> {
    if table.j_max < n {
        return Err(Error::Config(format!(
            "j_max = {} must be at least the window length n = {n}",
            table.j_max
        )));
    }
    let limit = table.past_len(n);
    if limit - 1 > table.max_index() {
        return Err(Error::Dimension(format!(
            "table extends to lag {} but the variance sum needs {}",
            table.max_index(),
            limit - 1
        )));
    }
    let mut acc = Kahan::default();
    for j in 0..limit {
        let inc = table.increment(j, n);
        acc.add(inc * inc);
    }
    // sum_{m > j_max} a_m^2 <= sum_{m > j_max} m^{-2 alpha}
    //                       <= j_max^{1-2 alpha} / (2 alpha - 1)
    let two_alpha = 2.0 * table.alpha;
    let tail = (n as f64).powi(2) * (table.j_max as f64).powf(1.0 - two_alpha) / (two_alpha - 1.0);
    Ok(SigmaN2 {
        value: sigma_z2 * acc.value(),
        tail_bound: sigma_z2 * tail,
    })
}

/// Finite-n ratios of the window-sum asymptotics (left side over claimed
/// limit), used to watch the asymptotics approach 1.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DiagnosticsReport {
    pub n: usize,
    pub t: f64,
    /// `floor(n^beta t)`.
    pub m: usize,
    /// `A_n` over `(1-alpha)^{-1} n^{1-alpha}`.
    pub prefix_ratio: f64,
    /// truncated `sigma_n^2 / sigma_Z^2` over `C_alpha n^{3-2 alpha}`.
    pub variance_ratio: f64,
    /// head sum `sum_{i<=m} (A_i - A_{i-n})^2` over `K_1 t^{3-2a} n^{4-4a}`.
    pub head_sum_ratio: Option<f64>,
    /// trailing-window sum over `(1-alpha)^{-2} n^{2-2a+beta} t` (left of n).
    pub edge_sum_ratio_left: Option<f64>,
    /// leading-window sum over the same limit (right of n).
    pub edge_sum_ratio_right: Option<f64>,
    /// `(1 - inner/sum_sq)` over `n^{1-2 alpha} t^{3-2 alpha}`.
    pub shift_correlation_ratio: Option<f64>,
    /// `sum_j (A_j - A_{j-n})(A_{j+m} - A_{j+m-n})` over the truncated range.
    pub inner_product: f64,
    /// `sum_j (A_j - A_{j-n})^2` over the truncated range.
    pub sum_squares: f64,
}

/// Evaluate the finite-n diagnostic ratios at shift scale `t`.
pub fn asymptotic_diagnostics(
    table: &CoefficientTable,
    n: usize,
    t: f64,
) -> Result<DiagnosticsReport> {
    if t < 0.0 {
        return Err(Error::InvalidParameter {
            name: "t",
            value: t,
            constraint: "diagnostic time must be nonnegative",
        });
    }
    let consts = params::derive_constants(table.alpha, 1.0)?;
    let alpha = table.alpha;
    let nf = n as f64;
    let m = (nf.powf(consts.beta) * t).floor() as usize;
    let limit = table.past_len(n);
    if limit - 1 + m > table.max_index() {
        return Err(Error::Dimension(format!(
            "diagnostics at t = {t} need lag {} but table stops at {}",
            limit - 1 + m,
            table.max_index()
        )));
    }

    let one_minus = 1.0 - alpha;
    let prefix_ratio = table.big_a(n as i64) * one_minus / nf.powf(one_minus);

    let mut sum_sq = Kahan::default();
    let mut inner = Kahan::default();
    for j in 0..limit {
        let inc = table.increment(j, n);
        sum_sq.add(inc * inc);
        inner.add(inc * table.increment(j + m, n));
    }
    let sum_squares = sum_sq.value();
    let inner_product = inner.value();

    let variance_ratio = sum_squares / (consts.c_alpha * nf.powf(3.0 - 2.0 * alpha));

    let (head_sum_ratio, edge_left, edge_right, shift_ratio) = if t > 0.0 {
        let mut head = Kahan::default();
        for i in 0..=m.min(limit - 1) {
            let inc = table.increment(i, n);
            head.add(inc * inc);
        }
        let head_denom = consts.k1 * t.powf(3.0 - 2.0 * alpha) * nf.powf(4.0 - 4.0 * alpha);

        let mut left = Kahan::default();
        for i in (n - m.min(n) + 1)..=n {
            let inc = table.increment(i, n);
            left.add(inc * inc);
        }
        let mut right = Kahan::default();
        for i in (n + 1)..=(n + m) {
            let inc = table.increment(i, n);
            right.add(inc * inc);
        }
        let edge_denom = nf.powf(2.0 - 2.0 * alpha + consts.beta) * t / (one_minus * one_minus);

        let lhs = 1.0 - inner_product / sum_squares;
        let shift_denom = nf.powf(1.0 - 2.0 * alpha) * t.powf(3.0 - 2.0 * alpha);

        (
            Some(head.value() / head_denom),
            Some(left.value() / edge_denom),
            Some(right.value() / edge_denom),
            Some(lhs / shift_denom),
        )
    } else {
        (None, None, None, None)
    };

    Ok(DiagnosticsReport {
        n,
        t,
        m,
        prefix_ratio,
        variance_ratio,
        head_sum_ratio,
        edge_sum_ratio_left: edge_left,
        edge_sum_ratio_right: edge_right,
        shift_correlation_ratio: shift_ratio,
        inner_product,
        sum_squares,
    })
}

/// One simulated window path.
#[derive(Debug, Clone)]
pub struct WindowPath {
    pub n: usize,
    pub horizon: usize,
    /// `S_n(j)` for `j = 0 ..= horizon`.
    pub s: Vec<f64>,
    /// First `j >= 1` with `S_n(j) < n eps`; `None` when censored at the
    /// horizon.
    pub i_n: Option<usize>,
    /// `S_n(0) - n eps` (meaningful on the event `S_n(0) >= n eps`).
    pub overshoot: f64,
}

impl WindowPath {
    /// Recompute the first non-occurrence time from the stored partial
    /// sums; must reproduce `i_n`.
    pub fn recompute_first_nonoccurrence(&self, n_eps: f64) -> Option<usize> {
        (1..=self.horizon).find(|&j| self.s[j] < n_eps)
    }
}

enum ConvEngine {
    Direct,
    Fft(FftConvolver),
}

/// Reusable simulator for one `(table, n, horizon, epsilon)` choice: the
/// coefficient spectrum is transformed once and shared across replicas.
pub struct WindowSimulator {
    table: Arc<CoefficientTable>,
    n: usize,
    horizon: usize,
    epsilon: f64,
    n_eps: f64,
    signal_len: usize,
    conv: ConvEngine,
}

impl WindowSimulator {
    pub fn new(
        table: Arc<CoefficientTable>,
        n: usize,
        horizon: usize,
        epsilon: f64,
    ) -> Result<Self> {
        if n < 1 || horizon < 1 {
            return Err(Error::InvalidParameter {
                name: "n/horizon",
                value: n.min(horizon) as f64,
                constraint: "window length and horizon must be positive",
            });
        }
        if table.j_max < n {
            return Err(Error::Config(format!(
                "j_max = {} must be at least the window length n = {n}",
                table.j_max
            )));
        }
        let signal_len = table.j_max + n + horizon;
        if signal_len - 1 > table.max_index() {
            return Err(Error::Dimension(format!(
                "table extends to lag {} but simulation needs {}",
                table.max_index(),
                signal_len - 1
            )));
        }
        let out_len = 2 * signal_len - 1;
        let conv = if out_len <= FFT_CROSSOVER {
            ConvEngine::Direct
        } else {
            ConvEngine::Fft(FftConvolver::new(
                &table.coefficients()[..signal_len],
                signal_len,
            ))
        };
        Ok(Self {
            table,
            n,
            horizon,
            epsilon,
            n_eps: n as f64 * epsilon,
            signal_len,
            conv,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn table(&self) -> &CoefficientTable {
        &self.table
    }

    /// Length required of `noise_past`: `j_max + n` values, `noise_past[j]`
    /// holding `Z_{n-1-j}`.
    pub fn past_len(&self) -> usize {
        self.table.past_len(self.n)
    }

    /// Simulate the window path; `noise_future[k]` holds `Z_{n+k}`.
    pub fn simulate(&self, noise_past: &[f64], noise_future: &[f64]) -> Result<WindowPath> {
        Ok(self.simulate_with_xs(noise_past, noise_future)?.0)
    }

    /// As [`simulate`](Self::simulate) but also returns the process values
    /// `X_0 .. X_{n+horizon-1}`.
    pub fn simulate_with_xs(
        &self,
        noise_past: &[f64],
        noise_future: &[f64],
    ) -> Result<(WindowPath, Vec<f64>)> {
        let j_max = self.table.j_max;
        let n = self.n;
        if noise_past.len() != self.past_len() {
            return Err(Error::Dimension(format!(
                "noise_past has {} values, expected {}",
                noise_past.len(),
                self.past_len()
            )));
        }
        if noise_future.len() != self.horizon {
            return Err(Error::Dimension(format!(
                "noise_future has {} values, expected {}",
                noise_future.len(),
                self.horizon
            )));
        }

        // time-ordered noise: z[idx] = Z_{idx - j_max}
        let mut z = vec![0.0; self.signal_len];
        for (j, &v) in noise_past.iter().enumerate() {
            z[j_max + n - 1 - j] = v;
        }
        z[j_max + n..].copy_from_slice(noise_future);

        let out = match &self.conv {
            ConvEngine::Direct => {
                convolve_direct(&self.table.coefficients()[..self.signal_len], &z)
            }
            ConvEngine::Fft(c) => c.convolve(&z),
        };
        let xs: Vec<f64> = out[j_max..j_max + n + self.horizon].to_vec();

        // S_n(0) from the weighted representation over the same index set
        let mut s0 = Kahan::default();
        for (j, &v) in noise_past.iter().enumerate() {
            s0.add(self.table.increment(j, n) * v);
        }
        let s0 = s0.value();

        #[cfg(debug_assertions)]
        {
            let mut direct = Kahan::default();
            for &x in &xs[..n] {
                direct.add(x);
            }
            let scale = s0
                .abs()
                .max(xs[..n].iter().map(|x| x.abs()).sum::<f64>())
                .max(1e-12);
            debug_assert!(
                (direct.value() - s0).abs() <= 1e-8 * scale,
                "window sum mismatch: {} vs {}",
                direct.value(),
                s0
            );
        }

        let mut s = Vec::with_capacity(self.horizon + 1);
        s.push(s0);
        let mut cur = s0;
        for j in 0..self.horizon {
            cur += xs[n + j] - xs[j];
            s.push(cur);
        }

        let i_n = (1..=self.horizon).find(|&j| s[j] < self.n_eps);
        let overshoot = s0 - self.n_eps;
        Ok((
            WindowPath {
                n,
                horizon: self.horizon,
                s,
                i_n,
                overshoot,
            },
            xs,
        ))
    }
}

/// Default horizon: `units` limiting-time units of `ceil(n^beta)` shifts.
pub fn default_horizon(n: usize, beta: f64, units: usize) -> usize {
    (units as f64 * (n as f64).powf(beta).ceil()) as usize
}
