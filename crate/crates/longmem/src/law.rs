//! Weighted empirical laws: CDF evaluation, quantiles, Kolmogorov-Smirnov
//! and Wasserstein-1 distances.
//!
//! Laws are finalized at construction: points sorted by value, weights
//! normalized to sum one. Distances are computed by a single merge scan
//! over the union of support points, exact for weighted step CDFs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Provenance carried alongside a law so reports are self-describing.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct LawMeta {
    /// Human-readable tag, e.g. `in_scaled@n=2000`.
    pub source: String,
    /// The resolution parameter behind the sample (window length n, or
    /// grid step dt), when there is one.
    pub scale: Option<f64>,
    /// Weight fraction excluded because the underlying statistic was
    /// censored (horizon exhausted).
    pub censored_fraction: f64,
    /// Master seed of the producing run.
    pub seed: Option<u64>,
}

/// A weighted sample set with normalized weights.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EmpiricalLaw {
    points: Vec<(f64, f64)>,
    pub normalized: bool,
    pub meta: LawMeta,
}

impl EmpiricalLaw {
    /// Build from values and positive weights (need not sum to one).
    pub fn from_weighted(values: Vec<f64>, weights: Vec<f64>, meta: LawMeta) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyLaw("no sample points".into()));
        }
        if values.len() != weights.len() {
            return Err(Error::Dimension(format!(
                "{} values vs {} weights",
                values.len(),
                weights.len()
            )));
        }
        let mut points = Vec::with_capacity(values.len());
        let mut total = 0.0;
        for (v, w) in values.into_iter().zip(weights) {
            if !v.is_finite() {
                return Err(Error::EmptyLaw(format!("non-finite sample value {v}")));
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::EmptyLaw(format!("bad weight {w}")));
            }
            if w > 0.0 {
                points.push((v, w));
                total += w;
            }
        }
        if points.is_empty() || !(total > 0.0) {
            return Err(Error::EmptyLaw("total weight is zero".into()));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        // skip the division for already-normalized input so that emitted
        // laws read back bit-identically
        if (total - 1.0).abs() > 1e-9 {
            for p in points.iter_mut() {
                p.1 /= total;
            }
        }
        Ok(Self {
            points,
            normalized: true,
            meta,
        })
    }

    pub fn from_unweighted(values: Vec<f64>, meta: LawMeta) -> Result<Self> {
        let w = vec![1.0; values.len()];
        Self::from_weighted(values, w, meta)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Sorted `(value, normalized weight)` pairs.
    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn total_weight(&self) -> f64 {
        self.points.iter().map(|p| p.1).sum()
    }

    pub fn min_value(&self) -> f64 {
        self.points[0].0
    }

    pub fn max_value(&self) -> f64 {
        self.points[self.points.len() - 1].0
    }

    /// Right-continuous CDF.
    pub fn cdf(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (v, w) in &self.points {
            if *v <= x {
                acc += w;
            } else {
                break;
            }
        }
        acc
    }

    /// Smallest support value whose CDF reaches `p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        let mut acc = 0.0;
        for (v, w) in &self.points {
            acc += w;
            if acc >= p - 1e-15 {
                return *v;
            }
        }
        self.max_value()
    }

    /// Effective sample size `1 / sum w_i^2` of the normalized weights.
    pub fn effective_sample_size(&self) -> f64 {
        let s2: f64 = self.points.iter().map(|p| p.1 * p.1).sum();
        1.0 / s2
    }

    /// Weighted mean of the support.
    pub fn mean(&self) -> f64 {
        self.points.iter().map(|(v, w)| v * w).sum()
    }

    /// Rows `(value, cdf, weight)` with duplicate values merged, for CSV
    /// emission; the cdf column is nondecreasing and ends at 1.
    pub fn cdf_rows(&self) -> Vec<(f64, f64, f64)> {
        let mut rows: Vec<(f64, f64, f64)> = Vec::with_capacity(self.points.len());
        let mut acc = 0.0;
        for &(v, w) in &self.points {
            acc += w;
            match rows.last_mut() {
                Some(last) if last.0 == v => {
                    last.1 = acc;
                    last.2 += w;
                }
                _ => rows.push((v, acc, w)),
            }
        }
        if let Some(last) = rows.last_mut() {
            // absorb cumulative rounding in the final row
            if (last.1 - 1.0).abs() < 1e-12 {
                last.1 = 1.0;
            }
        }
        rows
    }
}

/// Kolmogorov-Smirnov distance between two weighted step CDFs, exact via
/// a merge scan over the union of support points.
pub fn ks_distance(a: &EmpiricalLaw, b: &EmpiricalLaw) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyLaw("KS distance needs non-empty laws".into()));
    }
    let pa = a.points();
    let pb = b.points();
    let (mut ia, mut ib) = (0usize, 0usize);
    let (mut fa, mut fb) = (0.0f64, 0.0f64);
    let mut sup = 0.0f64;
    while ia < pa.len() || ib < pb.len() {
        let va = pa.get(ia).map(|p| p.0).unwrap_or(f64::INFINITY);
        let vb = pb.get(ib).map(|p| p.0).unwrap_or(f64::INFINITY);
        let v = va.min(vb);
        // sum each tie group before accumulating, so a law with merged
        // duplicate points produces bit-identical CDF values
        let mut jump_a = 0.0;
        while ia < pa.len() && pa[ia].0 == v {
            jump_a += pa[ia].1;
            ia += 1;
        }
        fa += jump_a;
        let mut jump_b = 0.0;
        while ib < pb.len() && pb[ib].0 == v {
            jump_b += pb[ib].1;
            ib += 1;
        }
        fb += jump_b;
        let d = (fa - fb).abs();
        if d > sup {
            sup = d;
        }
    }
    Ok(sup.min(1.0))
}

/// KS distance between a law on nonnegative support and the standard
/// exponential. Against a continuous CDF the supremum is attained at a
/// jump of the step CDF, approached from either side.
pub fn ks_against_exponential(law: &EmpiricalLaw) -> Result<f64> {
    if law.is_empty() {
        return Err(Error::EmptyLaw(
            "KS against Exp(1) needs a non-empty law".into(),
        ));
    }
    if law.min_value() < 0.0 {
        return Err(Error::LawSupport(format!(
            "negative support value {} in a nonnegative statistic",
            law.min_value()
        )));
    }
    let mut sup = 0.0f64;
    let mut below = 0.0f64; // F(x-)
    let pts = law.points();
    let mut i = 0usize;
    while i < pts.len() {
        let v = pts[i].0;
        let mut jump = 0.0;
        while i < pts.len() && pts[i].0 == v {
            jump += pts[i].1;
            i += 1;
        }
        let target = 1.0 - (-v).exp();
        sup = sup
            .max((below - target).abs())
            .max((below + jump - target).abs());
        below += jump;
    }
    // past the largest support point the step CDF sits at 1 and the
    // exponential CDF increases towards 1, so no larger gap hides there
    Ok(sup.min(1.0))
}

/// Wasserstein-1 distance: the integral of `|F_a - F_b|`.
pub fn wasserstein1(a: &EmpiricalLaw, b: &EmpiricalLaw) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyLaw("Wasserstein needs non-empty laws".into()));
    }
    let pa = a.points();
    let pb = b.points();
    let (mut ia, mut ib) = (0usize, 0usize);
    let (mut fa, mut fb) = (0.0f64, 0.0f64);
    let mut prev: Option<f64> = None;
    let mut acc = 0.0f64;
    while ia < pa.len() || ib < pb.len() {
        let va = pa.get(ia).map(|p| p.0).unwrap_or(f64::INFINITY);
        let vb = pb.get(ib).map(|p| p.0).unwrap_or(f64::INFINITY);
        let v = va.min(vb);
        if let Some(p) = prev {
            acc += (fa - fb).abs() * (v - p);
        }
        while ia < pa.len() && pa[ia].0 == v {
            fa += pa[ia].1;
            ia += 1;
        }
        while ib < pb.len() && pb[ib].0 == v {
            fb += pb[ib].1;
            ib += 1;
        }
        prev = Some(v);
    }
    Ok(acc)
}
