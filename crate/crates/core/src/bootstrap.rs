//! Empirical bootstrap: percentile and studentized pointwise intervals and
//! uniform confidence bands over a grid.
//!
//! Every replicate keeps the original bandwidths and the original support
//! bounds for trimming. Replicate `r` draws from its own stream
//! `(seed, r)`, so results do not depend on how replicates are scheduled.

use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimator::{Bandwidths, FitOptions, GpvEstimator, GpvFit};
use crate::hetero::{HeteroBandwidths, HeteroFit, HeteroKernels, HeteroTrim};
use crate::kernels::KernelSpec;
use crate::rng::{self, StreamRng};
use crate::sample::BidData;
use crate::variance::{VariancePlan, VARIANCE_FLOOR};

/// Slack when turning `(1-α)B` into an order-statistic index, so that
/// `0.95 * 500` is not rounded up to 476.
const QUANTILE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub replications: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl BootstrapConfig {
    pub fn new(replications: usize, alpha: f64, seed: u64) -> Result<Self> {
        if replications < 1 {
            return Err(Error::InvalidParameter("need at least one bootstrap replication".into()));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        Ok(BootstrapConfig { replications, alpha, seed })
    }
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig { replications: 500, alpha: 0.05, seed: 0 }
    }
}

/// Smallest `z` with empirical CDF at least `p`: `s_⌈pB⌉` of the sorted
/// values.
pub fn inf_quantile(sorted: &[f64], p: f64) -> f64 {
    let b = sorted.len();
    let idx = ((p * b as f64) - QUANTILE_SLACK).ceil().max(1.0) as usize;
    sorted[idx.min(b) - 1]
}

/// The definition scanned directly: the first value whose empirical CDF
/// reaches `p`.
pub fn inf_quantile_scan(values: &[f64], p: f64) -> f64 {
    let b = values.len() as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    for &z in &sorted {
        let cdf = values.iter().filter(|&&s| s <= z).count() as f64 / b;
        if cdf >= p - QUANTILE_SLACK / b {
            return z;
        }
    }
    sorted[sorted.len() - 1]
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// `NL` bids drawn with replacement from the pooled bids, `L × N`.
pub fn resample_homogeneous(data: &BidData, r: &mut StreamRng) -> Result<BidData> {
    let n = data.common_bidder_count()?;
    let pool = data.pooled();
    let rows = (0..data.n_auctions())
        .map(|_| (0..n).map(|_| pool[r.random_range(0..pool.len())]).collect())
        .collect();
    BidData::homogeneous(rows)
}

/// Draw `L` auctions `(X, N)` with replacement, then the bids of each drawn
/// auction with replacement from that auction's bids.
pub fn resample_hetero(data: &BidData, r: &mut StreamRng) -> Result<BidData> {
    let xs = data
        .covariates()
        .ok_or_else(|| Error::InvalidParameter("covariates are required".into()))?;
    let l = data.n_auctions();
    let mut rows = Vec::with_capacity(l);
    let mut cov = Vec::with_capacity(l);
    for _ in 0..l {
        let src = r.random_range(0..l);
        let row = &data.rows()[src];
        rows.push((0..row.len()).map(|_| row[r.random_range(0..row.len())]).collect());
        cov.push(xs[src].clone());
    }
    BidData::new(rows, Some(cov))
}

fn run_replicates<T, F>(replications: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..replications).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..replications).map(f).collect()
    }
}

/// Bandwidths, trimming and kernels shared by the original fit and every
/// replicate in the homogeneous model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setup {
    pub bandwidths: Bandwidths,
    /// `None` trims with `h_g`.
    pub trim_width: Option<f64>,
    pub k_f: KernelSpec,
    pub k_g: KernelSpec,
}

impl Setup {
    pub fn of(est: &GpvEstimator) -> Self {
        Setup {
            bandwidths: est.bandwidths,
            trim_width: Some(est.fit.trim_rule().width),
            k_f: est.k_f,
            k_g: est.k_g,
        }
    }

    fn fit(&self, data: &BidData) -> Result<GpvFit> {
        let mut opts = FitOptions::new(self.bandwidths.h_g);
        opts.trim_width = self.trim_width;
        GpvFit::build(data, &opts, &self.k_g)
    }

    /// Scale `L h_f³` of the variance estimate.
    fn normalizer(&self, n_auctions: usize) -> f64 {
        n_auctions as f64 * self.bandwidths.h_f.powi(3)
    }
}

/// Replicate fit on resampled bids, trimmed with the original bounds.
fn replicate_fit(orig: &GpvFit, setup: &Setup, seed: u64, rep: usize) -> Result<GpvFit> {
    let mut r = rng::stream(seed, &[rng::tag::BOOTSTRAP, rep as u64]);
    let pool = orig.bids();
    let bids: Vec<f64> = (0..pool.len()).map(|_| pool[r.random_range(0..pool.len())]).collect();
    let rule = orig.trim_rule();
    let opts = FitOptions::new(setup.bandwidths.h_g).trim_width(rule.width).bounds(rule.lower, rule.upper);
    GpvFit::from_pooled(bids, orig.n_bidders(), &opts, &setup.k_g, false)
}

fn check_point(v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("evaluation point must be finite, got {v}")))
    }
}

/// `[q*_{α/2}, q*_{1-α/2}]` of the replicate estimates `f̂*(v)`.
pub fn percentile_ci(data: &BidData, v: f64, cfg: &BootstrapConfig, setup: &Setup) -> Result<(f64, f64)> {
    check_point(v)?;
    if cfg.replications < 2 {
        return Err(Error::InvalidParameter("percentile intervals need at least two replications".into()));
    }
    let orig = setup.fit(data)?;
    let reps = run_replicates(cfg.replications, |rep| {
        replicate_fit(&orig, setup, cfg.seed, rep).map(|f| f.density(v, setup.bandwidths.h_f, &setup.k_f))
    });
    let vals = sorted(reps.into_iter().collect::<Result<Vec<_>>>()?);
    Ok((inf_quantile(&vals, cfg.alpha / 2.0), inf_quantile(&vals, 1.0 - cfg.alpha / 2.0)))
}

/// Critical values for [`studentized_ci`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Critical {
    /// Quantile of `|Z**|` across replicates.
    Bootstrap,
    /// `z_{1-α/2}` of the standard normal.
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudentizedCi {
    pub lower: f64,
    pub upper: f64,
    pub f_hat: f64,
    pub critical_value: f64,
    /// Replicates dropped because their variance estimate was below the floor.
    pub dropped: usize,
}

/// `f̂ ± c √(V̂/(L h_f³))` with `c` the `(1-α)` quantile of
/// `|Z**| = |f̂* - f̂| / √(V̂*/(L h_f³))`, or the normal value.
pub fn studentized_ci(
    data: &BidData,
    v: f64,
    cfg: &BootstrapConfig,
    setup: &Setup,
    critical: Critical,
) -> Result<StudentizedCi> {
    check_point(v)?;
    if cfg.replications < 2 {
        return Err(Error::InvalidParameter("studentized intervals need at least two replications".into()));
    }
    let orig = setup.fit(data)?;
    let h_f = setup.bandwidths.h_f;
    let f_hat = orig.density(v, h_f, &setup.k_f);
    let var = VariancePlan::new(&orig, h_f, setup.k_f, setup.k_g)?.at(v).value;
    let norm = setup.normalizer(orig.n_auctions());
    let se = (var.max(VARIANCE_FLOOR) / norm).sqrt();
    let (c, dropped) = match critical {
        Critical::Normal => {
            let z = Normal::standard().inverse_cdf(1.0 - cfg.alpha / 2.0);
            (z, 0)
        }
        Critical::Bootstrap => {
            let reps = run_replicates(cfg.replications, |rep| -> Result<Option<f64>> {
                let f = replicate_fit(&orig, setup, cfg.seed, rep)?;
                let vs = VariancePlan::new(&f, h_f, setup.k_f, setup.k_g)?.at(v).value;
                if vs <= VARIANCE_FLOOR {
                    return Ok(None);
                }
                Ok(Some((f.density(v, h_f, &setup.k_f) - f_hat).abs() / (vs / norm).sqrt()))
            });
            let reps = reps.into_iter().collect::<Result<Vec<_>>>()?;
            let dropped = reps.iter().filter(|z| z.is_none()).count();
            let z = sorted(reps.into_iter().flatten().collect());
            if z.is_empty() {
                return Err(Error::ZeroVariance);
            }
            (inf_quantile(&z, 1.0 - cfg.alpha), dropped)
        }
    };
    Ok(StudentizedCi { lower: f_hat - c * se, upper: f_hat + c * se, f_hat, critical_value: c, dropped })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandResult {
    pub grid: Vec<f64>,
    pub f_hat: Vec<f64>,
    pub v_hat: Vec<f64>,
    pub zeta_star: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Grid points left out of the supremum for a variance below the floor.
    pub excluded: usize,
}

impl BandResult {
    pub fn contains(&self, truth: impl Fn(f64) -> f64) -> bool {
        self.grid
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&v, (&lo, &hi))| lo <= truth(v) && truth(v) <= hi)
    }

    pub fn mean_width(&self) -> f64 {
        self.upper.iter().zip(&self.lower).map(|(u, l)| u - l).sum::<f64>() / self.grid.len() as f64
    }
}

/// Original estimates on the grid and the replicate suprema
/// `sup_v |Z*(v)|`, from which bands at any level follow.
#[derive(Debug, Clone, PartialEq)]
pub struct BandReplicates {
    pub grid: Vec<f64>,
    pub f_hat: Vec<f64>,
    pub v_hat: Vec<f64>,
    /// Sorted replicate suprema.
    pub sups: Vec<f64>,
    /// `L h_f³` (times `h_x^d` with covariates).
    pub normalizer: f64,
    pub excluded: usize,
    /// Replicate estimates at each grid point, sorted.
    pub columns: Vec<Vec<f64>>,
}

impl BandReplicates {
    fn assemble(
        grid: &[f64],
        f_hat: Vec<f64>,
        v_hat: Vec<f64>,
        normalizer: f64,
        replicates: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let se: Vec<Option<f64>> =
            v_hat.iter().map(|&v| (v > VARIANCE_FLOOR).then(|| (v / normalizer).sqrt())).collect();
        let excluded = se.iter().filter(|s| s.is_none()).count();
        if excluded == grid.len() {
            return Err(Error::ZeroVariance);
        }
        let sups = replicates
            .iter()
            .map(|fs| {
                fs.iter()
                    .zip(&f_hat)
                    .zip(&se)
                    .filter_map(|((fs, f), s)| s.map(|s| (fs - f).abs() / s))
                    .fold(0.0, f64::max)
            })
            .collect();
        let columns = (0..grid.len()).map(|i| sorted(replicates.iter().map(|r| r[i]).collect())).collect();
        Ok(BandReplicates { grid: grid.to_vec(), f_hat, v_hat, sups: sorted(sups), normalizer, excluded, columns })
    }

    /// Pointwise percentile intervals `(q_{α/2}, q_{1-α/2})` at each grid point.
    pub fn percentile_intervals(&self, alpha: f64) -> Vec<(f64, f64)> {
        self.columns
            .iter()
            .map(|c| (inf_quantile(c, alpha / 2.0), inf_quantile(c, 1.0 - alpha / 2.0)))
            .collect()
    }

    pub fn zeta_star(&self, alpha: f64) -> f64 {
        inf_quantile(&self.sups, 1.0 - alpha)
    }

    pub fn band(&self, alpha: f64) -> BandResult {
        let z = self.zeta_star(alpha);
        let half: Vec<f64> =
            self.v_hat.iter().map(|&v| z * (v.max(VARIANCE_FLOOR) / self.normalizer).sqrt()).collect();
        BandResult {
            grid: self.grid.clone(),
            lower: self.f_hat.iter().zip(&half).map(|(f, h)| f - h).collect(),
            upper: self.f_hat.iter().zip(&half).map(|(f, h)| f + h).collect(),
            f_hat: self.f_hat.clone(),
            v_hat: self.v_hat.clone(),
            zeta_star: z,
            excluded: self.excluded,
        }
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Empty("grid"));
    }
    if grid.iter().any(|v| !v.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// Replicate suprema for the homogeneous band.
pub fn band_replicates(data: &BidData, grid: &[f64], cfg: &BootstrapConfig, setup: &Setup) -> Result<BandReplicates> {
    check_grid(grid)?;
    let orig = setup.fit(data)?;
    let h_f = setup.bandwidths.h_f;
    let f_hat: Vec<f64> = grid.iter().map(|&v| orig.density(v, h_f, &setup.k_f)).collect();
    let plan = VariancePlan::new(&orig, h_f, setup.k_f, setup.k_g)?;
    let v_hat: Vec<f64> = grid.iter().map(|&v| plan.at(v).value).collect();
    let reps = run_replicates(cfg.replications, |rep| {
        replicate_fit(&orig, setup, cfg.seed, rep)
            .map(|f| grid.iter().map(|&v| f.density(v, h_f, &setup.k_f)).collect::<Vec<f64>>())
    });
    let reps = reps.into_iter().collect::<Result<Vec<_>>>()?;
    BandReplicates::assemble(grid, f_hat, v_hat, setup.normalizer(orig.n_auctions()), reps)
}

/// `f̂ ± ζ* √(V̂/(L h_f³))` on `grid`.
pub fn uniform_band(data: &BidData, grid: &[f64], cfg: &BootstrapConfig, setup: &Setup) -> Result<BandResult> {
    Ok(band_replicates(data, grid, cfg, setup)?.band(cfg.alpha))
}

/// Configuration of the covariate model shared by the fit and replicates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeteroSetup {
    pub bandwidths: HeteroBandwidths,
    pub kernels: HeteroKernels,
    pub trim: HeteroTrim,
}

/// Replicate suprema for the band of `f(·|x)`.
pub fn band_replicates_hetero(
    data: &BidData,
    grid: &[f64],
    x: &[f64],
    cfg: &BootstrapConfig,
    setup: &HeteroSetup,
) -> Result<BandReplicates> {
    check_grid(grid)?;
    let orig = HeteroFit::build(data, setup.bandwidths, setup.kernels, setup.trim, None)?;
    let f_hat = grid.iter().map(|&v| orig.density(v, x)).collect::<Result<Vec<f64>>>()?;
    let v_hat = grid.iter().map(|&v| orig.variance_mixture(v, x)).collect::<Result<Vec<f64>>>()?;
    let boundary = orig.boundary().clone();
    let reps = run_replicates(cfg.replications, |rep| -> Result<Vec<f64>> {
        let mut r = rng::stream(cfg.seed, &[rng::tag::BOOTSTRAP, rep as u64]);
        let boot = resample_hetero(data, &mut r)?;
        let fit = HeteroFit::build_focused(&boot, setup.bandwidths, setup.kernels, setup.trim, Some(&boundary), Some(x))?;
        grid.iter().map(|&v| fit.density(v, x)).collect()
    });
    let reps = reps.into_iter().collect::<Result<Vec<_>>>()?;
    let bw = setup.bandwidths;
    let norm = data.n_auctions() as f64 * bw.h_f.powi(3) * bw.h_x2.powi(x.len() as i32);
    BandReplicates::assemble(grid, f_hat, v_hat, norm, reps)
}

/// `f̂(·|x) ± ζ* √(V̂(·|x)/(L h_f³ h_x^d))` on `grid`.
pub fn uniform_band_hetero(
    data: &BidData,
    grid: &[f64],
    x: &[f64],
    cfg: &BootstrapConfig,
    setup: &HeteroSetup,
) -> Result<BandResult> {
    Ok(band_replicates_hetero(data, grid, x, cfg, setup)?.band(cfg.alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{self, DgpSpec};
    use crate::kernels::{triweight, triweight_order4};

    fn homogeneous(l: usize, seed: u64) -> (BidData, Setup) {
        let spec = DgpSpec::homogeneous(1.0, 3, l, seed).unwrap();
        let data = dgp::sample(&spec).unwrap().into_observed();
        let est = GpvEstimator::rule_of_thumb(&data, 1.0, triweight(), triweight_order4()).unwrap();
        (data, Setup::of(&est))
    }

    #[test]
    fn quantile_matches_the_definition() {
        let mut r = rng::stream(5, &[0]);
        for b in [1usize, 2, 7, 20, 500] {
            let vals: Vec<f64> = (0..b).map(|_| (r.random_range(0..30) as f64) / 7.0).collect();
            let s = sorted(vals.clone());
            for p in [0.01, 0.05, 0.1, 0.5, 0.9, 0.95, 0.99, 0.999999, 1.0] {
                assert_eq!(inf_quantile(&s, p), inf_quantile_scan(&vals, p), "b={b} p={p}");
            }
        }
        let s: Vec<f64> = (1..=500).map(|i| i as f64).collect();
        assert_eq!(inf_quantile(&s, 0.95), 475.0);
        assert_eq!(inf_quantile(&s, 0.999999), 500.0);
    }

    #[test]
    fn homogeneous_resample_support_and_constant_sample() {
        let (data, _) = homogeneous(30, 1);
        let pool = data.pooled();
        let mut r = rng::stream(2, &[3]);
        let b = resample_homogeneous(&data, &mut r).unwrap();
        assert_eq!(b.n_auctions(), 30);
        assert!(b.pooled().iter().all(|x| pool.contains(x)));
        let c = BidData::homogeneous(vec![vec![0.4, 0.4]; 5]).unwrap();
        assert_eq!(resample_homogeneous(&c, &mut r).unwrap(), c);
    }

    #[test]
    fn resample_mean_is_unbiased() {
        let (data, _) = homogeneous(50, 4);
        let pool = data.pooled();
        let mean = pool.iter().sum::<f64>() / pool.len() as f64;
        let sd = crate::estimator::sample_sd(&pool);
        let mut r = rng::stream(6, &[0]);
        let reps = 1000;
        let grand: f64 = (0..reps)
            .map(|_| {
                let b = resample_homogeneous(&data, &mut r).unwrap().pooled();
                b.iter().sum::<f64>() / b.len() as f64
            })
            .sum::<f64>()
            / reps as f64;
        let se = sd / ((pool.len() * reps) as f64).sqrt();
        assert!((grand - mean).abs() < 3.0 * se, "{grand} vs {mean}");
    }

    #[test]
    fn hetero_resample_structure() {
        let spec = DgpSpec::hetero(1.0, 3, 1, 7).unwrap();
        let one = dgp::sample(&spec).unwrap().into_observed();
        let mut r = rng::stream(1, &[1]);
        let b = resample_hetero(&one, &mut r).unwrap();
        assert_eq!(b.covariates().unwrap(), one.covariates().unwrap());
        assert!(b.rows()[0].iter().all(|x| one.rows()[0].contains(x)));

        let rows = vec![vec![0.1, 0.2], vec![0.3, 0.4, 0.5], vec![0.15, 0.25, 0.35, 0.45]];
        let xs = vec![vec![0.5], vec![1.0], vec![1.5]];
        let data = BidData::new(rows.clone(), Some(xs.clone())).unwrap();
        for _ in 0..20 {
            let b = resample_hetero(&data, &mut r).unwrap();
            for (row, x) in b.rows().iter().zip(b.covariates().unwrap()) {
                let src = xs.iter().position(|y| y == x).unwrap();
                assert_eq!(row.len(), rows[src].len());
                assert!(row.iter().all(|v| rows[src].contains(v)));
            }
        }
    }

    #[test]
    fn percentile_interval_is_deterministic_and_collapses() {
        let (data, setup) = homogeneous(200, 3);
        let cfg = BootstrapConfig::new(60, 0.1, 9).unwrap();
        let a = percentile_ci(&data, 0.5, &cfg, &setup).unwrap();
        let b = percentile_ci(&data, 0.5, &cfg, &setup).unwrap();
        assert_eq!(a, b);
        assert!(a.0 <= a.1);
        let narrow = percentile_ci(&data, 0.5, &BootstrapConfig::new(60, 0.999, 9).unwrap(), &setup).unwrap();
        assert!(narrow.1 - narrow.0 <= a.1 - a.0);
        assert!(narrow.1 - narrow.0 < 1e-12 || (narrow.0 >= a.0 && narrow.1 <= a.1));
        assert!(percentile_ci(&data, 0.5, &BootstrapConfig::new(1, 0.1, 9).unwrap(), &setup).is_err());
    }

    #[test]
    fn studentized_interval_contains_the_estimate() {
        let (data, setup) = homogeneous(200, 5);
        let cfg = BootstrapConfig::new(50, 0.05, 2).unwrap();
        let s = studentized_ci(&data, 0.5, &cfg, &setup, Critical::Bootstrap).unwrap();
        assert!(s.lower <= s.f_hat && s.f_hat <= s.upper);
        let n = studentized_ci(&data, 0.5, &cfg, &setup, Critical::Normal).unwrap();
        assert!((n.critical_value - 1.959963984540054).abs() < 1e-9);
        assert_eq!(n.f_hat, s.f_hat);
        assert!(((n.upper - n.lower) / (s.upper - s.lower) - n.critical_value / s.critical_value).abs() < 1e-9);
    }

    #[test]
    fn band_structure_and_nesting() {
        let (data, setup) = homogeneous(300, 8);
        let grid: Vec<f64> = (0..=20).map(|i| 0.3 + 0.02 * i as f64).collect();
        let cfg = BootstrapConfig::new(80, 0.05, 4).unwrap();
        let reps = band_replicates(&data, &grid, &cfg, &setup).unwrap();
        let b = reps.band(0.05);
        for i in 0..grid.len() {
            assert!(b.lower[i] <= b.f_hat[i] && b.f_hat[i] <= b.upper[i]);
            let w = 2.0 * b.zeta_star * (b.v_hat[i].max(VARIANCE_FLOOR) / reps.normalizer).sqrt();
            assert!((b.upper[i] - b.lower[i] - w).abs() < 1e-12);
        }
        let b01 = reps.band(0.01);
        let b10 = reps.band(0.10);
        for i in 0..grid.len() {
            assert!(b01.lower[i] <= b.lower[i] && b.lower[i] <= b10.lower[i]);
            assert!(b01.upper[i] >= b.upper[i] && b.upper[i] >= b10.upper[i]);
        }
        assert_eq!(reps.zeta_star(1e-6), *reps.sups.last().unwrap());
        assert_eq!(uniform_band(&data, &grid, &cfg, &setup).unwrap(), b);
        assert!(uniform_band(&data, &[], &cfg, &setup).is_err());
        let cis = reps.percentile_intervals(0.05);
        assert_eq!(cis[10], percentile_ci(&data, grid[10], &cfg, &setup).unwrap());
    }

    #[test]
    fn supremum_dominates_each_point_and_grows_with_the_grid() {
        let (data, setup) = homogeneous(300, 10);
        let cfg = BootstrapConfig::new(60, 0.1, 1).unwrap();
        let coarse: Vec<f64> = (0..=8).map(|i| 0.3 + 0.05 * i as f64).collect();
        let fine: Vec<f64> = (0..=40).map(|i| 0.3 + 0.01 * i as f64).collect();
        let zc = band_replicates(&data, &coarse, &cfg, &setup).unwrap().zeta_star(0.1);
        let zf = band_replicates(&data, &fine, &cfg, &setup).unwrap().zeta_star(0.1);
        assert!(zf >= zc);
        for &v in &coarse {
            let p = band_replicates(&data, &[v], &cfg, &setup).unwrap().zeta_star(0.1);
            assert!(zc >= p);
        }
    }

    #[test]
    fn hetero_band_is_symmetric() {
        let spec = DgpSpec::hetero(1.0, 5, 200, 3).unwrap();
        let data = dgp::sample(&spec).unwrap().into_observed();
        let kernels = HeteroKernels::default();
        let trim = HeteroTrim::default();
        let bw = crate::hetero::rule_of_thumb_hetero(&data, kernels, trim, 1.0).unwrap();
        let setup = HeteroSetup { bandwidths: bw, kernels, trim };
        let grid: Vec<f64> = (0..=8).map(|i| 0.3 + 0.05 * i as f64).collect();
        let cfg = BootstrapConfig::new(30, 0.05, 3).unwrap();
        let b = uniform_band_hetero(&data, &grid, &[1.0], &cfg, &setup).unwrap();
        for i in 0..grid.len() {
            assert!(((b.upper[i] - b.f_hat[i]) - (b.f_hat[i] - b.lower[i])).abs() < 1e-12);
        }
        assert_eq!(b, uniform_band_hetero(&data, &grid, &[1.0], &cfg, &setup).unwrap());
    }
}
