//! Auctions with covariates `X_l ∈ ℝ^d` and varying numbers of bidders.
//!
//! First step: for each observation the conditional bid CDF and density
//! given `(X_l, N_l)` are Nadaraya-Watson ratios over auctions with the same
//! bidder count, weighted by a covariate kernel. Second step: a product
//! kernel in `(v, x)` over the kept pseudo-valuations, divided by the
//! covariate density estimate.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::estimator::{check_bandwidth, sample_sd, DENSITY_FLOOR, ROT_CONST_ORDER2, ROT_CONST_ORDER4};
use crate::kernels::{triweight, triweight_order4, KernelSpec};
use crate::sample::BidData;
use crate::sum::KahanSum;
use crate::variance::VarianceEstimate;

/// Covariate density estimates below this are treated as zero.
pub const NEIGHBORHOOD_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeteroBandwidths {
    /// First step, bids.
    pub h_g: f64,
    /// First step, covariates.
    pub h_x1: f64,
    /// Second step, pseudo-valuations.
    pub h_f: f64,
    /// Second step, covariates.
    pub h_x2: f64,
    /// Covariate density and bidder-count probabilities in the second step.
    pub h_x3: f64,
    /// Side of the cells used for the support boundaries.
    pub h_boundary: f64,
}

impl HeteroBandwidths {
    fn check(&self) -> Result<()> {
        for h in [self.h_g, self.h_x1, self.h_f, self.h_x2, self.h_x3, self.h_boundary] {
            check_bandwidth(h)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeteroKernels {
    pub k_g: KernelSpec,
    pub k_x1: KernelSpec,
    pub k_f: KernelSpec,
    pub k_x2: KernelSpec,
    pub k_phi: KernelSpec,
}

impl Default for HeteroKernels {
    /// Order 4 in the first step and for the covariate density, order 2 for
    /// the second-step product kernel.
    fn default() -> Self {
        HeteroKernels {
            k_g: triweight_order4(),
            k_x1: triweight_order4(),
            k_f: triweight(),
            k_x2: triweight(),
            k_phi: triweight_order4(),
        }
    }
}

/// An observation `(b, x)` is kept when the box
/// `[b - bid_radius, b + bid_radius] × Π [x_i - covariate_radius, x_i + covariate_radius]`
/// lies inside the estimated support of `(B, X)` given `N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeteroTrim {
    /// `None` uses `h_g`.
    pub bid_radius: Option<f64>,
    pub covariate_radius: f64,
}

impl Default for HeteroTrim {
    fn default() -> Self {
        HeteroTrim { bid_radius: None, covariate_radius: 0.0 }
    }
}

/// `λ (log L / L)^{1/(1+d)}`.
pub fn boundary_width(n_auctions: usize, d: usize, lambda: f64) -> f64 {
    let l = n_auctions as f64;
    lambda * (l.ln() / l).powf(1.0 / (1.0 + d as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellBounds {
    /// Smallest bid over all auctions in the cell.
    pub lower: f64,
    /// Largest bid per bidder count.
    pub upper: BTreeMap<usize, f64>,
}

/// Support boundaries on the partition of `ℝ^d` into half-open cubes
/// `[k_1 h, (k_1+1) h) × … × [k_d h, (k_d+1) h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTable {
    side: f64,
    dim: usize,
    cells: BTreeMap<Vec<i64>, CellBounds>,
}

impl BoundaryTable {
    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cell_of(&self, x: &[f64]) -> Vec<i64> {
        x.iter().map(|&xi| (xi / self.side).floor() as i64).collect()
    }

    pub fn cells(&self) -> &BTreeMap<Vec<i64>, CellBounds> {
        &self.cells
    }

    /// `b̲̂(x)`; `None` when the cell holds no auction.
    pub fn lower(&self, x: &[f64]) -> Option<f64> {
        self.cells.get(&self.cell_of(x)).map(|c| c.lower)
    }

    /// `b̂̄(x, n)`; `None` when the cell holds no auction with `n` bidders.
    pub fn upper(&self, x: &[f64], n: usize) -> Option<f64> {
        self.cells.get(&self.cell_of(x)).and_then(|c| c.upper.get(&n).copied())
    }

    /// Containment of the box around `(b, x)` in the estimated support.
    /// Every cell the covariate box touches must exist and bound the bid box.
    pub fn contains(&self, b: f64, x: &[f64], n: usize, bid_radius: f64, covariate_radius: f64) -> bool {
        let lo: Vec<i64> = x.iter().map(|&xi| ((xi - covariate_radius) / self.side).floor() as i64).collect();
        let hi: Vec<i64> = x.iter().map(|&xi| ((xi + covariate_radius) / self.side).floor() as i64).collect();
        let mut cell = lo.clone();
        loop {
            match self.cells.get(&cell) {
                Some(c) => {
                    let Some(&up) = c.upper.get(&n) else { return false };
                    if !(c.lower <= b - bid_radius && b + bid_radius <= up) {
                        return false;
                    }
                }
                None => return false,
            }
            // odometer over the touched cells
            let mut k = 0;
            loop {
                if k == cell.len() {
                    return true;
                }
                if cell[k] < hi[k] {
                    cell[k] += 1;
                    break;
                }
                cell[k] = lo[k];
                k += 1;
            }
        }
    }
}

fn covariates_of(data: &BidData) -> Result<&[Vec<f64>]> {
    match data.covariates() {
        Some(x) if data.covariate_dim() >= 1 => Ok(x),
        _ => Err(Error::InvalidParameter("covariates are required".into())),
    }
}

/// Per-cell minimum bid and per-(cell, n) maximum bid.
pub fn boundary_hat(data: &BidData, h_boundary: f64) -> Result<BoundaryTable> {
    check_bandwidth(h_boundary)?;
    let xs = covariates_of(data)?;
    let mut table = BoundaryTable { side: h_boundary, dim: data.covariate_dim(), cells: BTreeMap::new() };
    for (row, x) in data.rows().iter().zip(xs) {
        let key = table.cell_of(x);
        let n = row.len();
        let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let cell = table
            .cells
            .entry(key)
            .or_insert_with(|| CellBounds { lower: f64::INFINITY, upper: BTreeMap::new() });
        cell.lower = cell.lower.min(lo);
        let up = cell.upper.entry(n).or_insert(f64::NEG_INFINITY);
        *up = up.max(hi);
    }
    Ok(table)
}

#[inline]
fn scaled_product(k: &KernelSpec, a: &[f64], b: &[f64], h: f64) -> f64 {
    let mut acc = 1.0;
    for (&ai, &bi) in a.iter().zip(b) {
        let u = (ai - bi) / h;
        if u.abs() >= 1.0 {
            return 0.0;
        }
        acc *= k.eval_inside(u);
    }
    acc
}

fn kernel_sums(xs: &[Vec<f64>], x: &[f64], h: f64, k: &KernelSpec) -> Result<Vec<f64>> {
    check_bandwidth(h)?;
    if x.len() != xs[0].len() {
        return Err(Error::DimensionMismatch { expected: xs[0].len(), got: x.len() });
    }
    Ok(xs.iter().map(|xl| scaled_product(k, xl, x, h)).collect())
}

/// `φ̂(x) = (1/L) Σ h^{-d} K((X_l - x)/h)`.
pub fn phi_hat(data: &BidData, x: &[f64], h: f64, k: &KernelSpec) -> Result<f64> {
    let xs = covariates_of(data)?;
    let w = kernel_sums(xs, x, h, k)?;
    Ok(w.iter().sum::<f64>() / (xs.len() as f64 * h.powi(x.len() as i32)))
}

/// `π̂(n|x)`: kernel-weighted share of auctions with `n` bidders.
pub fn pi_hat(data: &BidData, n: usize, x: &[f64], h: f64, k: &KernelSpec) -> Result<f64> {
    let xs = covariates_of(data)?;
    let w = kernel_sums(xs, x, h, k)?;
    let den: f64 = w.iter().sum();
    if den / (xs.len() as f64 * h.powi(x.len() as i32)) < NEIGHBORHOOD_FLOOR {
        return Err(Error::EmptyNeighborhood);
    }
    let num: f64 = w.iter().zip(data.rows()).filter(|(_, r)| r.len() == n).map(|(w, _)| w).sum();
    Ok(num / den)
}

/// Numerators and denominator of the conditional bid CDF and density at
/// `b` given `(x, n)`.
#[allow(clippy::too_many_arguments)]
fn conditional_parts(
    data: &BidData,
    b: f64,
    x: &[f64],
    n: usize,
    h_g: f64,
    h_x: f64,
    k_g: &KernelSpec,
    k_x: &KernelSpec,
) -> Result<(f64, f64, f64)> {
    check_bandwidth(h_g)?;
    let xs = covariates_of(data)?;
    let w = kernel_sums(xs, x, h_x, k_x)?;
    let (mut num_cdf, mut num_pdf, mut den) = (0.0, 0.0, 0.0);
    for (wl, row) in w.iter().zip(data.rows()) {
        if row.len() != n || *wl == 0.0 {
            continue;
        }
        let m = row.len() as f64;
        let count = row.iter().filter(|&&bi| bi <= b).count() as f64;
        let ks: f64 = row.iter().map(|&bi| k_g.eval((bi - b) / h_g)).sum();
        num_cdf += wl * count / m;
        num_pdf += wl * ks / (m * h_g);
        den += wl;
    }
    let scale = xs.len() as f64 * h_x.powi(x.len() as i32);
    if den / scale < NEIGHBORHOOD_FLOOR {
        return Err(Error::EmptyNeighborhood);
    }
    Ok((num_cdf, num_pdf, den))
}

/// `Ĝ(b|x,n)`.
#[allow(clippy::too_many_arguments)]
pub fn big_g_hat_cond(
    data: &BidData,
    b: f64,
    x: &[f64],
    n: usize,
    h_g: f64,
    h_x: f64,
    k_g: &KernelSpec,
    k_x: &KernelSpec,
) -> Result<f64> {
    let (c, _, d) = conditional_parts(data, b, x, n, h_g, h_x, k_g, k_x)?;
    Ok(c / d)
}

/// `ĝ(b|x,n)`.
#[allow(clippy::too_many_arguments)]
pub fn g_hat_cond(
    data: &BidData,
    b: f64,
    x: &[f64],
    n: usize,
    h_g: f64,
    h_x: f64,
    k_g: &KernelSpec,
    k_x: &KernelSpec,
) -> Result<f64> {
    let (_, p, d) = conditional_parts(data, b, x, n, h_g, h_x, k_g, k_x)?;
    Ok(p / d)
}

/// The covariate and bid model fitted once: pseudo-valuations, trimming and
/// the first-step quantities the variance estimator reuses.
#[derive(Debug, Clone)]
pub struct HeteroFit {
    dim: usize,
    xs: Vec<Vec<f64>>,
    counts: Vec<usize>,
    offsets: Vec<usize>,
    bids: Vec<f64>,
    cond_cdf: Vec<f64>,
    cond_pdf: Vec<f64>,
    /// `Ĝ(B, X, N) / ĝ(B, X, N)²` with the joint (unconditional) estimates.
    joint_ratio: Vec<f64>,
    pseudo: Vec<f64>,
    keep: Vec<bool>,
    evaluated: Vec<bool>,
    bandwidths: HeteroBandwidths,
    kernels: HeteroKernels,
    trim: HeteroTrim,
    boundary: BoundaryTable,
}

impl HeteroFit {
    /// Fit on `data`. `boundary` overrides the support table estimated
    /// from `data` (bootstrap replicates pass the original one).
    pub fn build(
        data: &BidData,
        bandwidths: HeteroBandwidths,
        kernels: HeteroKernels,
        trim: HeteroTrim,
        boundary: Option<&BoundaryTable>,
    ) -> Result<Self> {
        Self::build_focused(data, bandwidths, kernels, trim, boundary, None)
    }

    /// With `focus = Some(x)` only auctions that can enter the second step
    /// at `x` get pseudo-valuations, and only kept observations are mapped.
    pub(crate) fn build_focused(
        data: &BidData,
        bandwidths: HeteroBandwidths,
        kernels: HeteroKernels,
        trim: HeteroTrim,
        boundary: Option<&BoundaryTable>,
        focus: Option<&[f64]>,
    ) -> Result<Self> {
        bandwidths.check()?;
        let xs = covariates_of(data)?.to_vec();
        let dim = data.covariate_dim();
        let l_total = xs.len();
        let boundary = match boundary {
            Some(b) => {
                if b.dim != dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: b.dim });
                }
                b.clone()
            }
            None => boundary_hat(data, bandwidths.h_boundary)?,
        };
        let bid_radius = trim.bid_radius.unwrap_or(bandwidths.h_g);
        if !(bid_radius >= 0.0 && trim.covariate_radius >= 0.0) {
            return Err(Error::InvalidParameter("trimming radii must be non-negative".into()));
        }
        let counts = data.bidder_counts();
        let mut offsets = Vec::with_capacity(l_total + 1);
        let mut acc = 0;
        for &c in &counts {
            offsets.push(acc);
            acc += c;
        }
        offsets.push(acc);
        let bids = data.pooled();
        let total = bids.len();

        let h_g = bandwidths.h_g;
        let h_x = bandwidths.h_x1;
        let scale = l_total as f64 * h_x.powi(dim as i32);
        let mut order: Vec<usize> = (0..l_total).collect();
        order.sort_by(|&a, &b| xs[a][0].total_cmp(&xs[b][0]).then(a.cmp(&b)));
        let first_coord: Vec<f64> = order.iter().map(|&l| xs[l][0]).collect();
        let sorted_rows: Vec<Vec<f64>> = data
            .rows()
            .iter()
            .map(|r| {
                let mut s = r.clone();
                s.sort_by(f64::total_cmp);
                s
            })
            .collect();

        let mut cond_cdf = vec![f64::NAN; total];
        let mut cond_pdf = vec![f64::NAN; total];
        let mut joint_ratio = vec![f64::NAN; total];
        let mut pseudo = vec![f64::NAN; total];
        let mut keep = vec![false; total];
        let mut evaluated = vec![false; l_total];
        let mut neigh: Vec<(usize, f64)> = Vec::new();
        for l in 0..l_total {
            if let Some(fx) = focus {
                if scaled_product(&kernels.k_x2, &xs[l], fx, bandwidths.h_x2) == 0.0 {
                    continue;
                }
            }
            evaluated[l] = true;
            let n = counts[l];
            if n < 2 {
                continue;
            }
            neigh.clear();
            let pad = h_x * (1.0 + 1e-12);
            let lo = first_coord.partition_point(|&v| v < xs[l][0] - pad);
            let hi = first_coord.partition_point(|&v| v <= xs[l][0] + pad);
            let mut den = 0.0;
            for &k in &order[lo..hi] {
                if counts[k] != n {
                    continue;
                }
                let w = scaled_product(&kernels.k_x1, &xs[k], &xs[l], h_x);
                if w != 0.0 {
                    neigh.push((k, w));
                    den += w;
                }
            }
            if den / scale < NEIGHBORHOOD_FLOOR {
                continue;
            }
            let n1 = (n - 1) as f64;
            for p in offsets[l]..offsets[l + 1] {
                let b = bids[p];
                let inside = boundary.contains(b, &xs[l], n, bid_radius, trim.covariate_radius);
                if focus.is_some() && !inside {
                    continue;
                }
                let mut num_cdf = 0.0;
                let mut num_pdf = 0.0;
                for &(k, w) in &neigh {
                    let row = &sorted_rows[k];
                    let m = row.len() as f64;
                    let count = row.partition_point(|&bi| bi <= b) as f64;
                    let mut ks = 0.0;
                    for &bi in row {
                        ks += kernels.k_g.eval((bi - b) / h_g);
                    }
                    num_cdf += w * count / m;
                    num_pdf += w * ks / (m * h_g);
                }
                let g_cdf = num_cdf / den;
                let g_pdf = num_pdf / den;
                cond_cdf[p] = g_cdf;
                cond_pdf[p] = g_pdf;
                let joint_pdf = num_pdf / scale;
                joint_ratio[p] = (num_cdf / scale) / (joint_pdf * joint_pdf);
                if g_pdf >= DENSITY_FLOOR {
                    pseudo[p] = b + g_cdf / (n1 * g_pdf);
                    keep[p] = inside;
                }
            }
        }
        Ok(HeteroFit {
            dim,
            xs,
            counts,
            offsets,
            bids,
            cond_cdf,
            cond_pdf,
            joint_ratio,
            pseudo,
            keep,
            evaluated,
            bandwidths,
            kernels,
            trim,
            boundary,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_auctions(&self) -> usize {
        self.xs.len()
    }

    pub fn covariates(&self) -> &[Vec<f64>] {
        &self.xs
    }

    pub fn bidder_counts(&self) -> &[usize] {
        &self.counts
    }

    /// Distinct bidder counts in ascending order.
    pub fn observed_counts(&self) -> Vec<usize> {
        let mut c = self.counts.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    /// Pooled bids, auction-major.
    pub fn bids(&self) -> &[f64] {
        &self.bids
    }

    /// Range of pooled indices belonging to auction `l`.
    pub fn auction_range(&self, l: usize) -> std::ops::Range<usize> {
        self.offsets[l]..self.offsets[l + 1]
    }

    /// `Ĝ(B_il | X_l, N_l)`.
    pub fn cond_cdf(&self) -> &[f64] {
        &self.cond_cdf
    }

    /// `ĝ(B_il | X_l, N_l)`.
    pub fn cond_pdf(&self) -> &[f64] {
        &self.cond_pdf
    }

    pub fn pseudo_values(&self) -> &[f64] {
        &self.pseudo
    }

    pub fn trim_flags(&self) -> &[bool] {
        &self.keep
    }

    pub fn bandwidths(&self) -> HeteroBandwidths {
        self.bandwidths
    }

    pub fn kernels(&self) -> HeteroKernels {
        self.kernels
    }

    pub fn trim(&self) -> HeteroTrim {
        self.trim
    }

    pub fn boundary(&self) -> &BoundaryTable {
        &self.boundary
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        if !self.evaluated.iter().zip(&self.xs).all(|(&e, xl)| {
            e || scaled_product(&self.kernels.k_x2, xl, x, self.bandwidths.h_x2) == 0.0
        }) {
            return Err(Error::InvalidParameter("fit was not evaluated near this covariate value".into()));
        }
        Ok(())
    }

    fn phi_weights(&self, x: &[f64]) -> Vec<f64> {
        self.xs.iter().map(|xl| scaled_product(&self.kernels.k_phi, xl, x, self.bandwidths.h_x3)).collect()
    }

    /// `φ̂(x)` with the second-step covariate bandwidth.
    pub fn phi_hat(&self, x: &[f64]) -> f64 {
        let w = self.phi_weights(x);
        w.iter().sum::<f64>() / (self.xs.len() as f64 * self.bandwidths.h_x3.powi(self.dim as i32))
    }

    /// `π̂(n|x)` for every observed `n`, sharing one denominator.
    pub fn pi_hat(&self, x: &[f64]) -> Result<Vec<(usize, f64)>> {
        let w = self.phi_weights(x);
        let den: f64 = w.iter().sum();
        if den / (self.xs.len() as f64 * self.bandwidths.h_x3.powi(self.dim as i32)) < NEIGHBORHOOD_FLOOR {
            return Err(Error::EmptyNeighborhood);
        }
        Ok(self
            .observed_counts()
            .into_iter()
            .map(|n| {
                let num: f64 =
                    w.iter().zip(&self.counts).filter(|(_, &c)| c == n).map(|(w, _)| w).sum();
                (n, num / den)
            })
            .collect())
    }

    /// `(1/L) Σ_{l: N_l = n} (1/N_l) Σ_i 𝕋 K_f K_X / (h_f h_x^d)`; `n = None`
    /// sums over all auctions.
    fn joint_density(&self, v: f64, x: &[f64], n: Option<usize>) -> f64 {
        let bw = &self.bandwidths;
        let mut total = 0.0;
        for l in 0..self.xs.len() {
            if n.is_some_and(|n| self.counts[l] != n) {
                continue;
            }
            let wx = scaled_product(&self.kernels.k_x2, &self.xs[l], x, bw.h_x2);
            if wx == 0.0 {
                continue;
            }
            let mut s = 0.0;
            for p in self.auction_range(l) {
                if self.keep[p] {
                    s += self.kernels.k_f.eval((self.pseudo[p] - v) / bw.h_f);
                }
            }
            total += wx * s / self.counts[l] as f64;
        }
        total / (self.xs.len() as f64 * bw.h_f * bw.h_x2.powi(self.dim as i32))
    }

    /// `f̂(v|x,n)`.
    pub fn density_cond(&self, v: f64, x: &[f64], n: usize) -> Result<f64> {
        self.check_point(x)?;
        let phi = self.phi_hat(x);
        let pi = self.pi_hat(x)?.into_iter().find(|(m, _)| *m == n).map_or(0.0, |(_, p)| p);
        if pi * phi < NEIGHBORHOOD_FLOOR {
            return Err(Error::EmptyNeighborhood);
        }
        Ok(self.joint_density(v, x, Some(n)) / (pi * phi))
    }

    /// `f̂(v|x)` as one pooled sum divided by `φ̂(x)`.
    pub fn density(&self, v: f64, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let phi = self.phi_hat(x);
        if phi < NEIGHBORHOOD_FLOOR {
            return Err(Error::EmptyNeighborhood);
        }
        Ok(self.joint_density(v, x, None) / phi)
    }

    /// `Σ_n π̂(n|x) f̂(v|x,n)`, skipping counts with zero weight.
    pub fn density_weighted(&self, v: f64, x: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for (n, p) in self.pi_hat(x)? {
            if p != 0.0 {
                total += p * self.density_cond(v, x, n)?;
            }
        }
        Ok(total)
    }

    /// `Σ_n π̂(n|x)² V̂(v|x,n)` over counts with positive weight.
    pub fn variance_mixture(&self, v: f64, x: &[f64]) -> Result<f64> {
        let pis = self.pi_hat(x)?;
        let mut per_n = Vec::new();
        for &(n, p) in &pis {
            if p != 0.0 {
                per_n.push((n, variance_sum(self, v, x, n, false)?.value));
            }
        }
        crate::variance::variance_hat_mixture(&per_n, &pis)
    }
}

/// Shared implementation of the covariate variance estimator.
pub(crate) fn variance_sum(
    fit: &HeteroFit,
    v: f64,
    x: &[f64],
    n: usize,
    brute: bool,
) -> Result<VarianceEstimate> {
    fit.check_point(x)?;
    let same: Vec<usize> = (0..fit.xs.len()).filter(|&l| fit.counts[l] == n).collect();
    if same.len() < 3 {
        return Err(Error::TooFewObservations);
    }
    let bw = fit.bandwidths;
    let ks = fit.kernels;
    let d = fit.dim as i32;
    let phi = fit.phi_hat(x);
    let pi = fit.pi_hat(x)?.into_iter().find(|(m, _)| *m == n).map_or(0.0, |(_, p)| p);
    if pi * phi < NEIGHBORHOOD_FLOOR {
        return Err(Error::EmptyNeighborhood);
    }
    // a_jk = 𝕋 K_f'((V̂ - v)/h_f) K_X((X_k - x)/h_x2) Ĝ/ĝ²
    let coef = |p: usize, wx: f64| {
        if fit.keep[p] {
            ks.k_f.deriv((fit.pseudo[p] - v) / bw.h_f) * wx * fit.joint_ratio[p]
        } else {
            0.0
        }
    };
    let eta = |il: usize, l: usize, k: usize, a: &[f64]| {
        let wx = scaled_product(&ks.k_x1, &fit.xs[l], &fit.xs[k], bw.h_x1);
        if wx == 0.0 {
            return 0.0;
        }
        let b = fit.bids[il];
        let mut s = 0.0;
        for (j, p) in fit.auction_range(k).enumerate() {
            s += a[j] * ks.k_g.eval((b - fit.bids[p]) / bw.h_g);
        }
        s * wx / fit.counts[k] as f64
    };
    let coefs_of = |k: usize| -> Vec<f64> {
        let wx = scaled_product(&ks.k_x2, &fit.xs[k], x, bw.h_x2);
        fit.auction_range(k).map(|p| if wx == 0.0 { 0.0 } else { coef(p, wx) }).collect()
    };

    let mut total = KahanSum::new();
    let mut visited = 0usize;
    let active: Vec<(usize, Vec<f64>)> =
        same.iter().map(|&k| (k, coefs_of(k))).filter(|(_, a)| a.iter().any(|&c| c != 0.0)).collect();
    let degenerate = active.is_empty();
    if brute {
        let all: Vec<(usize, Vec<f64>)> = same.iter().map(|&k| (k, coefs_of(k))).collect();
        for &l in &same {
            let inv_n = 1.0 / fit.counts[l] as f64;
            for il in fit.auction_range(l) {
                for (k, ak) in &all {
                    if *k == l {
                        continue;
                    }
                    let e1 = eta(il, l, *k, ak);
                    visited += 1;
                    for (k2, ak2) in &all {
                        if *k2 == l || k2 == k {
                            continue;
                        }
                        total.add(inv_n * e1 * eta(il, l, *k2, ak2));
                    }
                }
            }
        }
    } else if !degenerate {
        for &l in &same {
            let near: Vec<&(usize, Vec<f64>)> = active
                .iter()
                .filter(|(k, _)| *k != l && scaled_product(&ks.k_x1, &fit.xs[l], &fit.xs[*k], bw.h_x1) != 0.0)
                .collect();
            if near.is_empty() {
                continue;
            }
            let inv_n = 1.0 / fit.counts[l] as f64;
            for il in fit.auction_range(l) {
                let mut s = 0.0;
                let mut cross = 0.0;
                for (k, ak) in &near {
                    let e = eta(il, l, *k, ak);
                    cross += e * s;
                    s += e;
                }
                visited += near.len();
                total.add(inv_n * 2.0 * cross);
            }
        }
    }
    let nf = n as f64;
    let lf = fit.xs.len() as f64;
    let pref = 1.0
        / (nf * (nf - 1.0).powi(2))
        / (pi * pi * phi * phi)
        / (bw.h_f * bw.h_x2.powi(d) * bw.h_g * bw.h_g * bw.h_x1.powi(2 * d))
        / (lf * (lf - 1.0) * (lf - 2.0));
    Ok(VarianceEstimate { v, value: total.value() * pref, n_terms_visited: visited, degenerate })
}

/// Mean of the per-dimension standard deviations of the auction covariates.
fn covariate_spread(xs: &[Vec<f64>]) -> f64 {
    let d = xs[0].len();
    (0..d).map(|i| sample_sd(&xs.iter().map(|x| x[i]).collect::<Vec<_>>())).sum::<f64>() / d as f64
}

/// Rule-of-thumb bandwidths for the covariate model:
/// `h_g = 3.72 σ̂_b (NL)^{-1/6}`, `h_x1 = 3.72 σ̂_X (NL)^{-1/6}`,
/// `h_f = 3.15 σ̂_v ((NL)_𝕋)^{-1/5}`, `h_x2 = 3.15 σ̂_X (NL)^{-1/6}`,
/// `h_x3 = 3.72 σ̂_X (NL)^{-1/5}`. The boundary cells have side
/// `λ (log L / L)^{1/(1+d)}`.
pub fn rule_of_thumb_hetero(
    data: &BidData,
    kernels: HeteroKernels,
    trim: HeteroTrim,
    lambda_boundary: f64,
) -> Result<HeteroBandwidths> {
    let xs = covariates_of(data)?;
    let bids = data.pooled();
    let nl = bids.len() as f64;
    let sd_b = sample_sd(&bids);
    let sd_x = covariate_spread(xs);
    if !(sd_b > 0.0 && sd_x > 0.0) {
        return Err(Error::DegenerateSupport);
    }
    let mut bw = HeteroBandwidths {
        h_g: ROT_CONST_ORDER4 * sd_b * nl.powf(-1.0 / 6.0),
        h_x1: ROT_CONST_ORDER4 * sd_x * nl.powf(-1.0 / 6.0),
        h_f: 1.0,
        h_x2: ROT_CONST_ORDER2 * sd_x * nl.powf(-1.0 / 6.0),
        h_x3: ROT_CONST_ORDER4 * sd_x * nl.powf(-0.2),
        h_boundary: boundary_width(xs.len(), data.covariate_dim(), lambda_boundary),
    };
    let fit = HeteroFit::build(data, bw, kernels, trim, None)?;
    let kept: Vec<f64> =
        fit.pseudo.iter().zip(&fit.keep).filter(|(_, &k)| k).map(|(&p, _)| p).collect();
    if kept.len() < 2 {
        return Err(Error::InvalidParameter(format!("only {} observations survive trimming", kept.len())));
    }
    let sd_v = sample_sd(&kept);
    if !(sd_v > 0.0) {
        return Err(Error::DegenerateSupport);
    }
    bw.h_f = ROT_CONST_ORDER2 * sd_v * (kept.len() as f64).powf(-0.2);
    Ok(bw)
}
