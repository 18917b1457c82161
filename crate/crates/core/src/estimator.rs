//! Two-step density estimator for identical auctions with `N` bidders.
//!
//! First step: the inverse bidding strategy
//! `ξ̂(b) = b + Ĝ(b) / ((N-1) ĝ(b))` built from the empirical bid CDF and a
//! kernel bid density maps every bid to a pseudo-valuation. Bids within the
//! trimming width of the observed bid range are dropped. Second step: a kernel
//! density estimate over the kept pseudo-valuations, normalized by the full
//! sample size `N·L`.

use crate::error::{Error, Result};
use crate::kernels::{triweight_order4, KernelSpec};
use crate::sample::BidData;

/// Observations whose kernel bid density falls below this value are trimmed
/// rather than mapped to an enormous pseudo-valuation.
pub const DENSITY_FLOOR: f64 = 1e-10;

/// Silverman constants for the triweight kernels of order 4 and 2.
pub const ROT_CONST_ORDER4: f64 = 3.72;
pub const ROT_CONST_ORDER2: f64 = 3.15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bandwidths {
    /// First step (bid density).
    pub h_g: f64,
    /// Second step (valuation density).
    pub h_f: f64,
}

impl Bandwidths {
    pub fn new(h_g: f64, h_f: f64) -> Result<Self> {
        check_bandwidth(h_g)?;
        check_bandwidth(h_f)?;
        Ok(Bandwidths { h_g, h_f })
    }
}

pub(crate) fn check_bandwidth(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("bandwidth must be positive and finite, got {h}")))
    }
}

/// `Ĝ(b)`: fraction of bids `≤ b`.
pub fn ecdf(bids: &[f64], b: f64) -> Result<f64> {
    if bids.is_empty() {
        return Err(Error::Empty("bids"));
    }
    Ok(bids.iter().filter(|&&x| x <= b).count() as f64 / bids.len() as f64)
}

/// `ĝ(b) = (1/(n h)) Σ K((B - b)/h)`.
pub fn kde(bids: &[f64], b: f64, h: f64, k: &KernelSpec) -> Result<f64> {
    check_bandwidth(h)?;
    if bids.is_empty() {
        return Err(Error::Empty("bids"));
    }
    let s: f64 = bids.iter().map(|&x| k.eval((x - b) / h)).sum();
    Ok(s / (bids.len() as f64 * h))
}

/// Index range of `sorted` that can lie within `h` of `center`. Slightly
/// wider than the open interval; the kernel zeroes anything outside.
#[inline]
pub(crate) fn window(sorted: &[f64], center: f64, h: f64) -> (usize, usize) {
    let pad = h * (1.0 + 1e-12);
    let lo = sorted.partition_point(|&x| x < center - pad);
    let hi = sorted.partition_point(|&x| x <= center + pad);
    (lo, hi)
}

/// Trimming rule: keep bids in `[lower + width, upper - width]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrimRule {
    pub lower: f64,
    pub upper: f64,
    pub width: f64,
}

impl TrimRule {
    #[inline]
    pub fn keeps(&self, b: f64) -> bool {
        self.lower + self.width <= b && b <= self.upper - self.width
    }
}

/// First-step options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub h_g: f64,
    /// Trimming width; `None` trims with `h_g`.
    pub trim_width: Option<f64>,
    /// Support bounds for trimming; `None` uses the sample min and max.
    /// Bootstrap replicates pass the original sample's bounds here.
    pub bounds: Option<(f64, f64)>,
}

impl FitOptions {
    pub fn new(h_g: f64) -> Self {
        FitOptions { h_g, trim_width: None, bounds: None }
    }

    pub fn trim_width(mut self, w: f64) -> Self {
        self.trim_width = Some(w);
        self
    }

    pub fn bounds(mut self, lower: f64, upper: f64) -> Self {
        self.bounds = Some((lower, upper));
        self
    }
}

/// Pseudo-valuations, trimming flags and first-step quantities for one
/// sample. Immutable once built.
#[derive(Debug, Clone)]
pub struct GpvFit {
    n_bidders: usize,
    n_auctions: usize,
    bids: Vec<f64>,
    sorted_bids: Vec<f64>,
    bid_cdf: Vec<f64>,
    bid_pdf: Vec<f64>,
    pseudo: Vec<f64>,
    keep: Vec<bool>,
    kept_sorted: Vec<f64>,
    trim: TrimRule,
    h_g: f64,
    b_min: f64,
    b_max: f64,
}

impl GpvFit {
    pub fn build(data: &BidData, opts: &FitOptions, k_g: &KernelSpec) -> Result<Self> {
        let n = data.common_bidder_count()?;
        Self::from_pooled(data.pooled(), n, opts, k_g, true)
    }

    /// `all_pseudo = false` skips the pseudo-valuations of trimmed bids,
    /// which no downstream quantity reads; those entries are NaN.
    pub(crate) fn from_pooled(
        bids: Vec<f64>,
        n_bidders: usize,
        opts: &FitOptions,
        k_g: &KernelSpec,
        all_pseudo: bool,
    ) -> Result<Self> {
        check_bandwidth(opts.h_g)?;
        if n_bidders < 2 {
            return Err(Error::InvalidParameter("need at least two bidders".into()));
        }
        if bids.is_empty() || !bids.len().is_multiple_of(n_bidders) {
            return Err(Error::Data("bid count is not a multiple of the bidder count".into()));
        }
        let mut sorted_bids = bids.clone();
        sorted_bids.sort_by(f64::total_cmp);
        let b_min = sorted_bids[0];
        let b_max = *sorted_bids.last().unwrap();
        if b_max <= b_min {
            return Err(Error::DegenerateSupport);
        }
        let (lower, upper) = opts.bounds.unwrap_or((b_min, b_max));
        let trim = TrimRule { lower, upper, width: opts.trim_width.unwrap_or(opts.h_g) };
        if !(trim.width.is_finite() && trim.width >= 0.0) {
            return Err(Error::InvalidParameter(format!("trimming width must be non-negative, got {}", trim.width)));
        }

        let total = bids.len() as f64;
        let h = opts.h_g;
        let inv_norm = 1.0 / (total * h);
        let n1 = (n_bidders - 1) as f64;
        let mut bid_cdf = vec![f64::NAN; bids.len()];
        let mut bid_pdf = vec![f64::NAN; bids.len()];
        let mut pseudo = vec![f64::NAN; bids.len()];
        let mut keep = vec![false; bids.len()];
        for (idx, &b) in bids.iter().enumerate() {
            let inside = trim.keeps(b);
            if !inside && !all_pseudo {
                continue;
            }
            let count = sorted_bids.partition_point(|&x| x <= b);
            let g_cdf = count as f64 / total;
            let (lo, hi) = window(&sorted_bids, b, h);
            let mut s = 0.0;
            for &x in &sorted_bids[lo..hi] {
                s += k_g.eval((x - b) / h);
            }
            let g_pdf = s * inv_norm;
            bid_cdf[idx] = g_cdf;
            bid_pdf[idx] = g_pdf;
            if g_pdf >= DENSITY_FLOOR {
                pseudo[idx] = b + g_cdf / (n1 * g_pdf);
                keep[idx] = inside;
            }
        }
        let mut kept_sorted: Vec<f64> =
            pseudo.iter().zip(&keep).filter(|(_, &k)| k).map(|(&v, _)| v).collect();
        kept_sorted.sort_by(f64::total_cmp);
        debug_assert!(kept_sorted.iter().all(|v| v.is_finite()));
        Ok(GpvFit {
            n_bidders,
            n_auctions: bids.len() / n_bidders,
            bids,
            sorted_bids,
            bid_cdf,
            bid_pdf,
            pseudo,
            keep,
            kept_sorted,
            trim,
            h_g: opts.h_g,
            b_min,
            b_max,
        })
    }

    pub fn n_bidders(&self) -> usize {
        self.n_bidders
    }

    pub fn n_auctions(&self) -> usize {
        self.n_auctions
    }

    pub fn n_observations(&self) -> usize {
        self.bids.len()
    }

    /// Pooled bids, auction-major.
    pub fn bids(&self) -> &[f64] {
        &self.bids
    }

    pub fn sorted_bids(&self) -> &[f64] {
        &self.sorted_bids
    }

    /// `Ĝ(B_il)` per observation.
    pub fn bid_cdf(&self) -> &[f64] {
        &self.bid_cdf
    }

    /// `ĝ(B_il)` per observation.
    pub fn bid_pdf(&self) -> &[f64] {
        &self.bid_pdf
    }

    /// `V̂_il`; NaN where the bid density fell below [`DENSITY_FLOOR`].
    pub fn pseudo_values(&self) -> &[f64] {
        &self.pseudo
    }

    /// `𝕋_il`: true when the observation enters the second step.
    pub fn trim_flags(&self) -> &[bool] {
        &self.keep
    }

    pub fn kept_count(&self) -> usize {
        self.kept_sorted.len()
    }

    /// Kept pseudo-valuations in ascending order.
    pub fn kept_sorted(&self) -> &[f64] {
        &self.kept_sorted
    }

    pub fn trim_rule(&self) -> TrimRule {
        self.trim
    }

    pub fn h_g(&self) -> f64 {
        self.h_g
    }

    /// Smallest observed bid.
    pub fn b_min(&self) -> f64 {
        self.b_min
    }

    /// Largest observed bid.
    pub fn b_max(&self) -> f64 {
        self.b_max
    }

    /// `f̂(v) = (1/(N L h)) Σ 𝕋 K((V̂ - v)/h)`.
    pub fn density(&self, v: f64, h_f: f64, k_f: &KernelSpec) -> f64 {
        let (lo, hi) = window(&self.kept_sorted, v, h_f);
        let mut s = 0.0;
        for &x in &self.kept_sorted[lo..hi] {
            s += k_f.eval((x - v) / h_f);
        }
        s / (self.bids.len() as f64 * h_f)
    }
}

/// First step with the default trimming (width `h_g`, sample bounds).
pub fn pseudo_values(data: &BidData, h_g: f64, k_g: &KernelSpec) -> Result<GpvFit> {
    GpvFit::build(data, &FitOptions::new(h_g), k_g)
}

/// Second step at one point.
pub fn gpv_density(fit: &GpvFit, v: f64, h_f: f64, k_f: &KernelSpec) -> Result<f64> {
    check_bandwidth(h_f)?;
    Ok(fit.density(v, h_f, k_f))
}

/// Sample standard deviation with the `n - 1` divisor.
pub fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// `h_g = 3.72 σ̂_b (NL)^{-1/5}`.
pub fn rule_of_thumb_h_g(data: &BidData) -> Result<f64> {
    let bids = data.pooled();
    let sd = sample_sd(&bids);
    if !(sd > 0.0) {
        return Err(Error::DegenerateSupport);
    }
    Ok(ROT_CONST_ORDER4 * sd * (bids.len() as f64).powf(-0.2))
}

/// `h_f = 3.15 σ̂_v ((NL)_𝕋)^{-1/5}` over the kept pseudo-valuations.
pub fn rule_of_thumb_h_f(fit: &GpvFit) -> Result<f64> {
    let kept = fit.kept_sorted();
    if kept.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "only {} observations survive trimming",
            kept.len()
        )));
    }
    let sd = sample_sd(kept);
    if !(sd > 0.0) {
        return Err(Error::DegenerateSupport);
    }
    Ok(ROT_CONST_ORDER2 * sd * (kept.len() as f64).powf(-0.2))
}

/// Both rule-of-thumb bandwidths. Without a first-step fit, one is built
/// with `h_g`, the order-4 triweight and default trimming.
pub fn rule_of_thumb_bandwidths(data: &BidData, stage1: Option<&GpvFit>) -> Result<Bandwidths> {
    let h_g = rule_of_thumb_h_g(data)?;
    let h_f = match stage1 {
        Some(fit) => rule_of_thumb_h_f(fit)?,
        None => rule_of_thumb_h_f(&pseudo_values(data, h_g, &triweight_order4())?)?,
    };
    Bandwidths::new(h_g, h_f)
}

/// The fitted homogeneous estimator: first-step fit plus second-step
/// bandwidth and kernel.
#[derive(Debug, Clone)]
pub struct GpvEstimator {
    pub fit: GpvFit,
    pub bandwidths: Bandwidths,
    pub k_f: KernelSpec,
    pub k_g: KernelSpec,
}

impl GpvEstimator {
    /// Fit with given bandwidths and trimming width (`None` = `h_g`).
    pub fn with_bandwidths(
        data: &BidData,
        bandwidths: Bandwidths,
        trim_width: Option<f64>,
        k_f: KernelSpec,
        k_g: KernelSpec,
    ) -> Result<Self> {
        let mut opts = FitOptions::new(bandwidths.h_g);
        opts.trim_width = trim_width;
        let fit = GpvFit::build(data, &opts, &k_g)?;
        Ok(GpvEstimator { fit, bandwidths, k_f, k_g })
    }

    /// Rule-of-thumb bandwidths; `trim_scale` multiplies `h_g` to give the
    /// trimming width.
    pub fn rule_of_thumb(data: &BidData, trim_scale: f64, k_f: KernelSpec, k_g: KernelSpec) -> Result<Self> {
        let h_g = rule_of_thumb_h_g(data)?;
        let opts = FitOptions::new(h_g).trim_width(trim_scale * h_g);
        let fit = GpvFit::build(data, &opts, &k_g)?;
        let h_f = rule_of_thumb_h_f(&fit)?;
        Ok(GpvEstimator { fit, bandwidths: Bandwidths::new(h_g, h_f)?, k_f, k_g })
    }

    pub fn density(&self, v: f64) -> f64 {
        self.fit.density(v, self.bandwidths.h_f, &self.k_f)
    }

    pub fn density_on(&self, grid: &[f64]) -> Vec<f64> {
        grid.iter().map(|&v| self.density(v)).collect()
    }
}
