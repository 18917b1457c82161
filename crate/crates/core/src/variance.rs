//! Triple-sum variance estimators.
//!
//! For the homogeneous model
//!
//! ```text
//! V̂(v) = 1/(N (N-1)² h_f h_g²) · 1/(NL (NL-1) (NL-2))
//!        Σ_{il} Σ_{jk ≠ il} Σ_{j'k' ∉ {il, jk}} η_{il,jk} η_{il,j'k'}
//! η_{il,jk} = 𝕋_jk K_f'((V̂_jk - v)/h_f) Ĝ(B_jk)/ĝ(B_jk)² K_g((B_il - B_jk)/h_g)
//! ```
//!
//! With a single bandwidth the prefactor is the usual `1/(N(N-1)²h³)`. The
//! pruned path visits only kept observations whose pseudo-valuation lies
//! within `h_f` of `v` and, for each of them, the bids within `h_g`; the
//! distinct-index restriction is handled as `Σ_il (S_il² - Q_il)` where
//! `S_il = Σ_{jk≠il} η` and `Q_il = Σ_{jk≠il} η²`.

use crate::error::{Error, Result};
use crate::estimator::{check_bandwidth, window, GpvFit};
use crate::hetero::HeteroFit;
use crate::kernels::KernelSpec;
use crate::sum::KahanSum;

/// Floor applied to variance estimates before square roots.
pub const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceEstimate {
    pub v: f64,
    /// Raw statistic; may be slightly negative in small samples.
    pub value: f64,
    /// Number of `(il, jk)` kernel pairs evaluated.
    pub n_terms_visited: usize,
    /// No kept pseudo-valuation within `h_f` of `v`; `value` is 0.
    pub degenerate: bool,
}

impl VarianceEstimate {
    /// `max(value, VARIANCE_FLOOR)`.
    pub fn floored(&self) -> f64 {
        self.value.max(VARIANCE_FLOOR)
    }
}

#[derive(Debug, Clone, Copy)]
struct Obs {
    pseudo: f64,
    bid: f64,
    ratio: f64,
    idx: usize,
}

/// Precomputed orderings for repeated evaluation on a grid.
#[derive(Debug, Clone)]
pub struct VariancePlan<'a> {
    fit: &'a GpvFit,
    h_f: f64,
    k_f: KernelSpec,
    k_g: KernelSpec,
    /// Kept observations ordered by pseudo-valuation.
    kept: Vec<Obs>,
    kept_pseudo: Vec<f64>,
    /// All observations ordered by bid.
    all_bids: Vec<f64>,
    all_idx: Vec<usize>,
    prefactor: f64,
}

impl<'a> VariancePlan<'a> {
    pub fn new(fit: &'a GpvFit, h_f: f64, k_f: KernelSpec, k_g: KernelSpec) -> Result<Self> {
        check_bandwidth(h_f)?;
        let total = fit.n_observations();
        if total < 3 {
            return Err(Error::TooFewObservations);
        }
        let mut kept: Vec<Obs> = (0..total)
            .filter(|&i| fit.trim_flags()[i])
            .map(|i| Obs {
                pseudo: fit.pseudo_values()[i],
                bid: fit.bids()[i],
                ratio: fit.bid_cdf()[i] / (fit.bid_pdf()[i] * fit.bid_pdf()[i]),
                idx: i,
            })
            .collect();
        kept.sort_by(|a, b| a.pseudo.total_cmp(&b.pseudo).then(a.idx.cmp(&b.idx)));
        let kept_pseudo = kept.iter().map(|o| o.pseudo).collect();
        let mut all_idx: Vec<usize> = (0..total).collect();
        all_idx.sort_by(|&a, &b| fit.bids()[a].total_cmp(&fit.bids()[b]).then(a.cmp(&b)));
        let all_bids = all_idx.iter().map(|&i| fit.bids()[i]).collect();
        let n = fit.n_bidders() as f64;
        let t = total as f64;
        let h_g = fit.h_g();
        let prefactor =
            1.0 / (n * (n - 1.0).powi(2) * h_f * h_g * h_g) / (t * (t - 1.0) * (t - 2.0));
        Ok(VariancePlan { fit, h_f, k_f, k_g, kept, kept_pseudo, all_bids, all_idx, prefactor })
    }

    pub fn at(&self, v: f64) -> VarianceEstimate {
        let h_f = self.h_f;
        let h_g = self.fit.h_g();
        let (lo, hi) = window(&self.kept_pseudo, v, h_f);
        // (bid, coefficient, index) of the active set, ordered by bid
        let mut active: Vec<(f64, f64, usize)> = self.kept[lo..hi]
            .iter()
            .map(|o| (o.bid, self.k_f.deriv((o.pseudo - v) / h_f) * o.ratio, o.idx))
            .filter(|a| a.1 != 0.0)
            .collect();
        if active.is_empty() {
            return VarianceEstimate { v, value: 0.0, n_terms_visited: 0, degenerate: true };
        }
        active.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
        let active_bids: Vec<f64> = active.iter().map(|a| a.0).collect();
        let pad = h_g * (1.0 + 1e-12);
        let first = self.all_bids.partition_point(|&b| b < active_bids[0] - pad);
        let last = self.all_bids.partition_point(|&b| b <= active_bids[active_bids.len() - 1] + pad);
        let mut total = KahanSum::new();
        let mut visited = 0usize;
        for p in first..last {
            let b = self.all_bids[p];
            let i = self.all_idx[p];
            let (alo, ahi) = window(&active_bids, b, h_g);
            // Σ_{j≠j'} η_j η_j' as 2 Σ_j η_j (η_1 + … + η_{j-1}); s² - Σ η² cancels badly
            let mut s = 0.0;
            let mut cross = 0.0;
            for &(bj, a, j) in &active[alo..ahi] {
                if j == i {
                    continue;
                }
                let eta = a * self.k_g.eval((b - bj) / h_g);
                cross += eta * s;
                s += eta;
            }
            visited += ahi - alo;
            total.add(2.0 * cross);
        }
        VarianceEstimate { v, value: total.value() * self.prefactor, n_terms_visited: visited, degenerate: false }
    }
}

/// `V̂(v)` by the pruned sum.
pub fn variance_hat(
    fit: &GpvFit,
    v: f64,
    h_f: f64,
    k_f: &KernelSpec,
    k_g: &KernelSpec,
) -> Result<VarianceEstimate> {
    Ok(VariancePlan::new(fit, h_f, *k_f, *k_g)?.at(v))
}

/// `V̂(v)` by the literal loop over ordered distinct triples.
pub fn variance_hat_brute(
    fit: &GpvFit,
    v: f64,
    h_f: f64,
    k_f: &KernelSpec,
    k_g: &KernelSpec,
) -> Result<VarianceEstimate> {
    check_bandwidth(h_f)?;
    let total = fit.n_observations();
    if total < 3 {
        return Err(Error::TooFewObservations);
    }
    let h_g = fit.h_g();
    let bids = fit.bids();
    let eta = |il: usize, jk: usize| {
        if !fit.trim_flags()[jk] {
            return 0.0;
        }
        let g = fit.bid_pdf()[jk];
        let a = k_f.deriv((fit.pseudo_values()[jk] - v) / h_f) * (fit.bid_cdf()[jk] / (g * g));
        a * k_g.eval((bids[il] - bids[jk]) / h_g)
    };
    let mut sum = KahanSum::new();
    for il in 0..total {
        for jk in 0..total {
            if jk == il {
                continue;
            }
            let e1 = eta(il, jk);
            for jk2 in 0..total {
                if jk2 == il || jk2 == jk {
                    continue;
                }
                sum.add(e1 * eta(il, jk2));
            }
        }
    }
    let n = fit.n_bidders() as f64;
    let t = total as f64;
    let pref = 1.0 / (n * (n - 1.0).powi(2) * h_f * h_g * h_g) / (t * (t - 1.0) * (t - 2.0));
    let degenerate = !(0..total).any(|jk| {
        fit.trim_flags()[jk] && k_f.deriv((fit.pseudo_values()[jk] - v) / h_f) != 0.0
    });
    Ok(VarianceEstimate { v, value: sum.value() * pref, n_terms_visited: total * (total - 1), degenerate })
}

/// `Σ_n π̂(n|x)² V̂(v|x,n)`. Components with zero weight are skipped.
pub fn variance_hat_mixture(per_n: &[(usize, f64)], pi_hat: &[(usize, f64)]) -> Result<f64> {
    let mut total = 0.0;
    for &(n, p) in pi_hat {
        if p == 0.0 {
            continue;
        }
        let v = per_n
            .iter()
            .find(|(m, _)| *m == n)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::InvalidParameter(format!("no variance for bidder count {n}")))?;
        total += p * p * v;
    }
    Ok(total)
}

/// Sum over distinct auctions `l, k, k'` (all with `n` bidders) of
/// `(1/N_l) Σ_i η_{il,k} η_{il,k'}`, scaled as a variance of
/// `f̂(v|x,n)`. `brute` selects the literal triple loop.
pub fn variance_hat_hetero(fit: &HeteroFit, v: f64, x: &[f64], n: usize) -> Result<VarianceEstimate> {
    crate::hetero::variance_sum(fit, v, x, n, false)
}

/// Reference implementation of [`variance_hat_hetero`].
pub fn variance_hat_hetero_brute(fit: &HeteroFit, v: f64, x: &[f64], n: usize) -> Result<VarianceEstimate> {
    crate::hetero::variance_sum(fit, v, x, n, true)
}
