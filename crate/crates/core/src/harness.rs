//! Monte Carlo coverage experiments, the variance-ratio table, estimation
//! from a bid file and a quick self test.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::bootstrap::{band_replicates, band_replicates_hetero, BandReplicates, BootstrapConfig, HeteroSetup, Setup};
use crate::dgp::{self, DgpSpec, Model};
use crate::error::{Error, Result};
use crate::estimator::{rule_of_thumb_h_f, Bandwidths, FitOptions, GpvEstimator, GpvFit};
use crate::hetero::{rule_of_thumb_hetero, HeteroKernels, HeteroTrim};
use crate::kernels::{triweight, triweight_order4};
use crate::oracles::ratio_qb_over_gpv;
use crate::rng;
use crate::sample::BidData;

/// Floats in every CSV this module writes: 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: Model,
    pub n_bidders: usize,
    /// `N·L`; the number of auctions is `total_obs / n_bidders`.
    pub total_obs: usize,
    pub range: (f64, f64),
    pub grid_step: f64,
    pub nominal: Vec<f64>,
    pub mc_reps: usize,
    pub boot_reps: usize,
    pub seed: u64,
    /// 0 uses every available core.
    pub threads: usize,
    pub out: Option<PathBuf>,
    /// Trimming width as a multiple of `h_g` (homogeneous design).
    pub trim_scale: f64,
    /// Covariate value at which the heterogeneous band is built.
    pub x: f64,
    pub lambda_boundary: f64,
    /// Hetero trimming: bid radius as a multiple of `h_g`.
    pub hetero_bid_scale: f64,
    /// Hetero trimming: covariate radius as a multiple of `h_x1`.
    pub hetero_cov_scale: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: Model::PowerHomogeneous { theta: 1.0 },
            n_bidders: 5,
            total_obs: 2100,
            range: (0.3, 0.7),
            grid_step: 0.005,
            nominal: vec![0.90, 0.95, 0.99],
            mc_reps: 200,
            boot_reps: 500,
            seed: 20240501,
            threads: 0,
            out: None,
            trim_scale: DEFAULT_TRIM_SCALE,
            x: 1.0,
            lambda_boundary: 1.0,
            hetero_bid_scale: DEFAULT_HETERO_BID_SCALE,
            hetero_cov_scale: 0.0,
        }
    }
}

/// Homogeneous trimming width in units of `h_g`.
pub const DEFAULT_TRIM_SCALE: f64 = 0.5;
/// Hetero trimming bid radius in units of `h_g`.
pub const DEFAULT_HETERO_BID_SCALE: f64 = 0.5;

fn config_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("line {line}: {msg}"))
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| config_err(line, format!("invalid value `{value}` for `{key}`")))
}

fn parse_list(line: usize, key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| parse_num(line, key, v)).collect()
}

impl ExperimentConfig {
    pub fn n_auctions(&self) -> usize {
        self.total_obs / self.n_bidders
    }

    pub fn grid(&self) -> Vec<f64> {
        make_grid(self.range.0, self.range.1, self.grid_step)
    }

    pub fn is_hetero(&self) -> bool {
        matches!(self.model, Model::PowerHetero { .. })
    }

    /// Set one key. `line` only labels errors.
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        let value = value.trim();
        match key {
            "design" => {
                self.model = match value {
                    "homogeneous" => Model::PowerHomogeneous { theta: self.parameter() },
                    "hetero" | "heterogeneous" => Model::PowerHetero { sigma: self.parameter() },
                    _ => return Err(config_err(line, format!("unknown design `{value}`"))),
                }
            }
            "theta" => self.model = Model::PowerHomogeneous { theta: parse_num(line, key, value)? },
            "sigma" => self.model = Model::PowerHetero { sigma: parse_num(line, key, value)? },
            "n_bidders" => self.n_bidders = parse_num(line, key, value)?,
            "total_obs" => self.total_obs = parse_num(line, key, value)?,
            "range" => {
                let r = parse_list(line, key, value)?;
                if r.len() != 2 {
                    return Err(config_err(line, "range needs two values `lo,hi`"));
                }
                self.range = (r[0], r[1]);
            }
            "grid_step" => self.grid_step = parse_num(line, key, value)?,
            "nominal" => self.nominal = parse_list(line, key, value)?,
            "alpha" => {
                self.nominal = parse_list(line, key, value)?.into_iter().map(|a| 1.0 - a).collect();
            }
            "mc_reps" => self.mc_reps = parse_num(line, key, value)?,
            "boot_reps" => self.boot_reps = parse_num(line, key, value)?,
            "seed" => self.seed = parse_num(line, key, value)?,
            "threads" => self.threads = parse_num(line, key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "trim_scale" => self.trim_scale = parse_num(line, key, value)?,
            "x" => self.x = parse_num(line, key, value)?,
            "lambda_boundary" => self.lambda_boundary = parse_num(line, key, value)?,
            "hetero_bid_scale" => self.hetero_bid_scale = parse_num(line, key, value)?,
            "hetero_cov_scale" => self.hetero_cov_scale = parse_num(line, key, value)?,
            _ => return Err(config_err(line, format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    fn parameter(&self) -> f64 {
        match self.model {
            Model::PowerHomogeneous { theta } => theta,
            Model::PowerHetero { sigma } => sigma,
        }
    }

    /// `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        cfg.apply(text)?;
        Ok(cfg)
    }

    pub fn apply(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| config_err(i + 1, format!("expected `key = value`, got `{line}`")))?;
            self.set(k.trim(), v, i + 1)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let (lo, hi) = self.range;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return bad(format!("range must satisfy 0 < lo < hi < 1, got [{lo}, {hi}]"));
        }
        if !(self.grid_step > 0.0 && self.grid_step <= hi - lo) {
            return bad(format!("grid_step must lie in (0, {}], got {}", hi - lo, self.grid_step));
        }
        if self.nominal.is_empty() || self.nominal.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return bad("nominal levels must lie in (0, 1)".into());
        }
        if self.mc_reps < 1 || self.boot_reps < 1 {
            return bad("mc_reps and boot_reps must be positive".into());
        }
        if self.n_bidders < 2 || self.n_auctions() < 3 {
            return bad("need at least two bidders and three auctions".into());
        }
        if !(self.trim_scale >= 0.0 && self.hetero_bid_scale >= 0.0 && self.hetero_cov_scale >= 0.0) {
            return bad("trimming scales must be non-negative".into());
        }
        if !(self.lambda_boundary > 0.0) {
            return bad("lambda_boundary must be positive".into());
        }
        DgpSpec::new(self.model, self.n_bidders, self.n_auctions(), self.seed)
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.is_hetero() && !(self.x > 0.0 && self.x < 2.0) {
            return bad(format!("x must lie in (0, 2), got {}", self.x));
        }
        Ok(())
    }
}

/// `lo, lo + step, …` up to `hi` (included when it falls on the grid).
pub fn make_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

/// Run `f` on a pool with `threads` workers (0 = default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        Ok(pool.install(f))
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        Ok(f())
    }
}

fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRow {
    pub design: String,
    pub n: usize,
    pub theta_or_sigma: f64,
    pub range_lo: f64,
    pub range_hi: f64,
    pub nominal: f64,
    pub coverage: f64,
    pub mc_reps: usize,
    pub mean_zeta: f64,
    pub mean_width: f64,
    /// Binomial standard error `√(p(1-p)/mc_reps)`.
    pub se: f64,
}

pub const COVERAGE_HEADER: [&str; 11] = [
    "design",
    "n",
    "theta_or_sigma",
    "range_lo",
    "range_hi",
    "nominal",
    "coverage",
    "mc_reps",
    "mean_zeta",
    "mean_width",
    "se",
];

/// Per-replication outcome at each nominal level: (covered, ζ*, mean width).
type RepOutcome = Vec<(bool, f64, f64)>;

fn truth_density(model: Model, x: f64) -> impl Fn(f64) -> f64 {
    let exponent = match model {
        Model::PowerHomogeneous { theta } => theta,
        Model::PowerHetero { .. } => x,
    };
    move |v: f64| exponent * v.powf(exponent - 1.0)
}

/// Replicate set of one Monte Carlo replication.
pub fn coverage_replicates(cfg: &ExperimentConfig, rep: usize) -> Result<BandReplicates> {
    let spec = DgpSpec::new(cfg.model, cfg.n_bidders, cfg.n_auctions(), rng::child_seed(cfg.seed, &[rep as u64]))?;
    let data = dgp::sample(&spec)?.into_observed();
    let boot = BootstrapConfig::new(
        cfg.boot_reps,
        1.0 - cfg.nominal[0],
        rng::child_seed(cfg.seed, &[rng::tag::BOOTSTRAP, rep as u64]),
    )?;
    let grid = cfg.grid();
    if cfg.is_hetero() {
        let kernels = HeteroKernels::default();
        let pilot = rule_of_thumb_hetero(&data, kernels, HeteroTrim::default(), cfg.lambda_boundary)?;
        let trim = HeteroTrim {
            bid_radius: Some(cfg.hetero_bid_scale * pilot.h_g),
            covariate_radius: cfg.hetero_cov_scale * pilot.h_x1,
        };
        // h_f depends on the kept pseudo-values
        let bw = rule_of_thumb_hetero(&data, kernels, trim, cfg.lambda_boundary)?;
        band_replicates_hetero(&data, &grid, &[cfg.x], &boot, &HeteroSetup { bandwidths: bw, kernels, trim })
    } else {
        let est = GpvEstimator::rule_of_thumb(&data, cfg.trim_scale, triweight(), triweight_order4())?;
        band_replicates(&data, &grid, &boot, &Setup::of(&est))
    }
}

/// Simulate, fit and build the band `mc_reps` times; one row per nominal
/// level.
pub fn run_coverage(cfg: &ExperimentConfig) -> Result<Vec<CoverageRow>> {
    cfg.validate()?;
    let truth = truth_density(cfg.model, cfg.x);
    let outcomes: Vec<Result<RepOutcome>> = with_threads(cfg.threads, || {
        par_map(cfg.mc_reps, |rep| {
            let r = coverage_replicates(cfg, rep)?;
            Ok(cfg
                .nominal
                .iter()
                .map(|&p| {
                    let band = r.band(1.0 - p);
                    (band.contains(&truth), band.zeta_star, band.mean_width())
                })
                .collect())
        })
    })?;
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let m = cfg.mc_reps as f64;
    let (design, param) = match cfg.model {
        Model::PowerHomogeneous { theta } => ("homogeneous", theta),
        Model::PowerHetero { sigma } => ("hetero", sigma),
    };
    Ok(cfg
        .nominal
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let hits = outcomes.iter().filter(|o| o[k].0).count() as f64;
            let coverage = hits / m;
            CoverageRow {
                design: design.to_string(),
                n: cfg.n_bidders,
                theta_or_sigma: param,
                range_lo: cfg.range.0,
                range_hi: cfg.range.1,
                nominal: p,
                coverage,
                mc_reps: cfg.mc_reps,
                mean_zeta: outcomes.iter().map(|o| o[k].1).sum::<f64>() / m,
                mean_width: outcomes.iter().map(|o| o[k].2).sum::<f64>() / m,
                se: (coverage * (1.0 - coverage) / m).sqrt(),
            }
        })
        .collect())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

pub fn write_coverage_csv<W: Write>(rows: &[CoverageRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COVERAGE_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.design.clone(),
            r.n.to_string(),
            fmt_float(r.theta_or_sigma),
            fmt_float(r.range_lo),
            fmt_float(r.range_hi),
            fmt_float(r.nominal),
            fmt_float(r.coverage),
            r.mc_reps.to_string(),
            fmt_float(r.mean_zeta),
            fmt_float(r.mean_width),
            fmt_float(r.se),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `V_QB / V_GPV` over a `(θ, N)` grid that contains (1, 2) and (2, 7).
pub fn run_ratio_check() -> Result<Vec<(f64, usize, f64)>> {
    let k = triweight();
    let mut rows = Vec::new();
    for theta in [0.5, 1.0, 2.0, 3.0, 5.0] {
        for n in 2..=7 {
            rows.push((theta, n, ratio_qb_over_gpv(theta, n, &k)?));
        }
    }
    Ok(rows)
}

pub fn write_ratio_csv<W: Write>(rows: &[(f64, usize, f64)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["theta", "n", "ratio"]).map_err(csv_err)?;
    for &(t, n, r) in rows {
        w.write_record([fmt_float(t), n.to_string(), fmt_float(r)]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Parse `auction,bidder,bid[,x]`. Auctions are grouped by id in order of
/// first appearance; a covariate, when present, must be constant within an
/// auction.
pub fn read_bids<R: Read>(input: R) -> Result<BidData> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(input);
    let header = rdr.headers().map_err(|e| Error::Data(format!("line 1: {e}")))?.clone();
    let names: Vec<&str> = header.iter().collect();
    let has_x = match names.as_slice() {
        ["auction", "bidder", "bid"] => false,
        ["auction", "bidder", "bid", "x"] => true,
        _ => {
            return Err(Error::Data(format!(
                "line 1: expected header `auction,bidder,bid[,x]`, got `{}`",
                names.join(",")
            )))
        }
    };
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut xs: Vec<f64> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Data(format!("line {line}: {e}"))
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |what: &str| Error::Data(format!("line {line}: {what}"));
        let id = rec.get(0).ok_or_else(|| bad("missing auction id"))?.to_string();
        let bid: f64 = rec
            .get(2)
            .and_then(|s| s.parse().ok())
            .filter(|b: &f64| b.is_finite() && *b > 0.0)
            .ok_or_else(|| bad("bid must be a positive number"))?;
        let x = if has_x {
            Some(rec.get(3).and_then(|s| s.parse::<f64>().ok()).filter(|x| x.is_finite()).ok_or_else(|| bad("invalid covariate"))?)
        } else {
            None
        };
        let l = match index.get(&id) {
            Some(&l) => l,
            None => {
                index.insert(id, rows.len());
                rows.push(Vec::new());
                xs.push(x.unwrap_or(0.0));
                rows.len() - 1
            }
        };
        if let Some(x) = x {
            if x != xs[l] {
                return Err(bad("covariate differs within an auction"));
            }
        }
        rows[l].push(bid);
    }
    if rows.len() < 3 {
        return Err(Error::Data(format!("need at least three auctions, found {}", rows.len())));
    }
    let cov = has_x.then(|| xs.into_iter().map(|x| vec![x]).collect());
    BidData::new(rows, cov)
}

pub fn write_bids<W: Write>(data: &BidData, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let has_x = data.covariates().is_some();
    if has_x {
        w.write_record(["auction", "bidder", "bid", "x"]).map_err(csv_err)?;
    } else {
        w.write_record(["auction", "bidder", "bid"]).map_err(csv_err)?;
    }
    for (l, row) in data.rows().iter().enumerate() {
        for (i, &b) in row.iter().enumerate() {
            let mut rec = vec![l.to_string(), i.to_string(), fmt_float(b)];
            if let Some(xs) = data.covariates() {
                rec.push(fmt_float(xs[l][0]));
            }
            w.write_record(&rec).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateOptions {
    /// Evaluation range; defaults to the kept pseudo-valuations shrunk by
    /// `h_f` on each side.
    pub range: Option<(f64, f64)>,
    pub grid_step: Option<f64>,
    /// Grid size when no step is given.
    pub points: usize,
    pub alpha: f64,
    pub boot_reps: usize,
    pub seed: u64,
    pub h_g: Option<f64>,
    pub h_f: Option<f64>,
    pub trim_scale: f64,
    /// Covariate value for data with an `x` column; defaults to the median.
    pub x: Option<f64>,
    pub lambda_boundary: f64,
    pub threads: usize,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            range: None,
            grid_step: None,
            points: 101,
            alpha: 0.05,
            boot_reps: 500,
            seed: 0,
            h_g: None,
            h_f: None,
            trim_scale: DEFAULT_TRIM_SCALE,
            x: None,
            lambda_boundary: 1.0,
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRow {
    pub v: f64,
    pub f_hat: f64,
    pub var_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub band_lo: f64,
    pub band_hi: f64,
}

pub const ESTIMATE_HEADER: [&str; 7] = ["v", "f_hat", "var_hat", "ci_lo", "ci_hi", "band_lo", "band_hi"];

fn grid_for(opts: &EstimateOptions, lo: f64, hi: f64) -> Result<Vec<f64>> {
    if !(lo < hi) {
        return Err(Error::Data(format!("empty evaluation range [{lo}, {hi}]")));
    }
    Ok(match opts.grid_step {
        Some(step) if step > 0.0 => make_grid(lo, hi, step),
        Some(step) => return Err(Error::Config(format!("grid step must be positive, got {step}"))),
        None => {
            let m = opts.points.max(2) - 1;
            (0..=m).map(|i| lo + (hi - lo) * i as f64 / m as f64).collect()
        }
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Full pipeline on one data set: point estimate, variance estimate,
/// pointwise percentile intervals and the uniform band.
pub fn estimate(data: &BidData, opts: &EstimateOptions) -> Result<Vec<EstimateRow>> {
    let cfg = BootstrapConfig::new(opts.boot_reps, opts.alpha, opts.seed)?;
    let (reps, grid) = if data.covariates().is_some() {
        let kernels = HeteroKernels::default();
        let pilot = rule_of_thumb_hetero(data, kernels, HeteroTrim::default(), opts.lambda_boundary)?;
        let h_g = opts.h_g.unwrap_or(pilot.h_g);
        let trim = HeteroTrim { bid_radius: Some(opts.trim_scale * h_g), covariate_radius: 0.0 };
        let mut bw = rule_of_thumb_hetero(data, kernels, trim, opts.lambda_boundary)?;
        bw.h_g = h_g;
        if let Some(h) = opts.h_f {
            bw.h_f = h;
        }
        let x = opts.x.unwrap_or_else(|| median(data.covariates().unwrap().iter().map(|x| x[0]).collect()));
        let (lo, hi) = match opts.range {
            Some(r) => r,
            None => {
                let fit = crate::hetero::HeteroFit::build(data, bw, kernels, trim, None)?;
                kept_range(fit.pseudo_values(), fit.trim_flags(), bw.h_f)?
            }
        };
        let grid = grid_for(opts, lo, hi)?;
        let setup = HeteroSetup { bandwidths: bw, kernels, trim };
        (with_threads(opts.threads, || band_replicates_hetero(data, &grid, &[x], &cfg, &setup))??, grid)
    } else {
        let k_f = triweight();
        let k_g = triweight_order4();
        let h_g = match opts.h_g {
            Some(h) => h,
            None => crate::estimator::rule_of_thumb_h_g(data)?,
        };
        let fit = GpvFit::build(data, &FitOptions::new(h_g).trim_width(opts.trim_scale * h_g), &k_g)?;
        let h_f = match opts.h_f {
            Some(h) => h,
            None => rule_of_thumb_h_f(&fit)?,
        };
        let (lo, hi) = match opts.range {
            Some(r) => r,
            None => kept_range(fit.pseudo_values(), fit.trim_flags(), h_f)?,
        };
        let grid = grid_for(opts, lo, hi)?;
        let setup = Setup { bandwidths: Bandwidths::new(h_g, h_f)?, trim_width: Some(opts.trim_scale * h_g), k_f, k_g };
        (with_threads(opts.threads, || band_replicates(data, &grid, &cfg, &setup))??, grid)
    };
    let band = reps.band(opts.alpha);
    let cis = reps.percentile_intervals(opts.alpha);
    Ok(grid
        .iter()
        .enumerate()
        .map(|(i, &v)| EstimateRow {
            v,
            f_hat: band.f_hat[i],
            var_hat: band.v_hat[i],
            ci_lo: cis[i].0,
            ci_hi: cis[i].1,
            band_lo: band.lower[i],
            band_hi: band.upper[i],
        })
        .collect())
}

fn kept_range(pseudo: &[f64], keep: &[bool], h_f: f64) -> Result<(f64, f64)> {
    let kept: Vec<f64> = pseudo.iter().zip(keep).filter(|(_, &k)| k).map(|(&p, _)| p).collect();
    if kept.is_empty() {
        return Err(Error::Data("no observation survives trimming".into()));
    }
    let lo = kept.iter().copied().fold(f64::INFINITY, f64::min) + h_f;
    let hi = kept.iter().copied().fold(f64::NEG_INFINITY, f64::max) - h_f;
    Ok((lo, hi))
}

/// Read `path` and run [`estimate`].
pub fn estimate_file(path: &Path, opts: &EstimateOptions) -> Result<Vec<EstimateRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    estimate(&read_bids(file)?, opts)
}

pub fn write_estimate_csv<W: Write>(rows: &[EstimateRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ESTIMATE_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([r.v, r.f_hat, r.var_hat, r.ci_lo, r.ci_hi, r.band_lo, r.band_hi].map(fmt_float))
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Quick internal consistency checks; one `(name, passed, detail)` per check.
pub fn selftest() -> Vec<(String, bool, String)> {
    let mut out = Vec::new();
    for k in [triweight(), triweight_order4()] {
        let r = k.verify_moments();
        out.push((format!("moments {}", k.name()), r.is_ok(), r.err().map_or(String::new(), |e| e.to_string())));
    }
    for (theta, n, want) in [(1.0, 2, 1.3259), (2.0, 7, 2.3038)] {
        match ratio_qb_over_gpv(theta, n, &triweight()) {
            Ok(r) => out.push((format!("ratio theta={theta} n={n}"), (r - want).abs() < 0.005, format!("{r:.4}"))),
            Err(e) => out.push((format!("ratio theta={theta} n={n}"), false, e.to_string())),
        }
    }
    let check = || -> Result<(bool, String)> {
        let spec = DgpSpec::homogeneous(1.0, 3, 8, 1)?;
        let data = dgp::sample(&spec)?.into_observed();
        let fit = GpvFit::build(&data, &FitOptions::new(0.3).trim_width(0.0), &triweight_order4())?;
        let a = crate::variance::variance_hat(&fit, 0.4, 0.3, &triweight(), &triweight_order4())?.value;
        let b = crate::variance::variance_hat_brute(&fit, 0.4, 0.3, &triweight(), &triweight_order4())?.value;
        let rel = (a - b).abs() / b.abs().max(1e-300);
        Ok((rel <= 1e-10, format!("relative difference {rel:.1e}")))
    };
    match check() {
        Ok((ok, d)) => out.push(("pruned variance sum".into(), ok, d)),
        Err(e) => out.push(("pruned variance sum".into(), false, e.to_string())),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let cfg = ExperimentConfig::parse(
            "# desk run\ntheta = 2\nn_bidders = 7\nrange = 0.2, 0.8  # wide\nnominal = 0.9,0.95\nmc_reps=10\n",
        )
        .unwrap();
        assert_eq!(cfg.model, Model::PowerHomogeneous { theta: 2.0 });
        assert_eq!(cfg.n_bidders, 7);
        assert_eq!(cfg.n_auctions(), 300);
        assert_eq!(cfg.range, (0.2, 0.8));
        assert_eq!(cfg.nominal, vec![0.9, 0.95]);
        assert_eq!(cfg.mc_reps, 10);
        cfg.validate().unwrap();
        let e = ExperimentConfig::parse("theta = 1\nbogus = 3\n").unwrap_err();
        assert_eq!(e, Error::Config("line 2: unknown key `bogus`".into()));
        let e = ExperimentConfig::parse("mc_reps = ten\n").unwrap_err();
        assert!(matches!(e, Error::Config(m) if m.starts_with("line 1:")));
        assert!(ExperimentConfig::parse("range = 0.7,0.3").unwrap().validate().is_err());
        let h = ExperimentConfig::parse("sigma = 1\n").unwrap();
        assert!(h.is_hetero());
    }

    #[test]
    fn grid_endpoints() {
        let g = make_grid(0.3, 0.7, 0.005);
        assert_eq!(g.len(), 81);
        assert!((g[80] - 0.7).abs() < 1e-12);
        assert_eq!(make_grid(0.3, 0.7, 0.001).len(), 401);
    }

    #[test]
    fn bid_file_parsing() {
        let text = "auction,bidder,bid\na,1,0.1\na,2,0.2\nb,1,0.3\nb,2,0.25\nc,1,0.4\nc,2,0.15\n";
        let d = read_bids(text.as_bytes()).unwrap();
        assert_eq!(d.n_observations(), 6);
        assert_eq!(d.n_auctions(), 3);
        let e = read_bids("auc,bidder,bid\n1,1,0.1\n".as_bytes()).unwrap_err();
        assert!(matches!(&e, Error::Data(m) if m.contains("auction,bidder,bid[,x]")), "{e}");
        let e = read_bids("auction,bidder,bid\na,1,0.1\na,2,zz\n".as_bytes()).unwrap_err();
        assert!(matches!(&e, Error::Data(m) if m.starts_with("line 3")), "{e}");
        let e = read_bids("auction,bidder,bid\na,1,0.1\nb,1,0.2\n".as_bytes()).unwrap_err();
        assert!(matches!(&e, Error::Data(m) if m.contains("three auctions")));
        let d = read_bids("auction,bidder,bid,x\na,1,0.1,1.5\na,2,0.2,1.5\nb,1,0.3,0.5\nc,1,0.2,1\n".as_bytes()).unwrap();
        assert_eq!(d.covariates().unwrap()[1], vec![0.5]);
        assert!(read_bids("auction,bidder,bid,x\na,1,0.1,1.5\na,2,0.2,1.4\nb,1,0.3,0.5\nc,1,0.2,1\n".as_bytes()).is_err());
    }

    #[test]
    fn bid_file_round_trip_is_exact() {
        let spec = DgpSpec::homogeneous(1.0, 3, 40, 2).unwrap();
        let data = dgp::sample(&spec).unwrap().into_observed();
        let mut buf = Vec::new();
        write_bids(&data, &mut buf).unwrap();
        assert_eq!(read_bids(buf.as_slice()).unwrap(), data);
        let spec = DgpSpec::hetero(1.0, 3, 40, 2).unwrap();
        let data = dgp::sample(&spec).unwrap().into_observed();
        let mut buf = Vec::new();
        write_bids(&data, &mut buf).unwrap();
        assert_eq!(read_bids(buf.as_slice()).unwrap(), data);
    }

    #[test]
    fn ratio_table() {
        let rows = run_ratio_check().unwrap();
        let get = |t: f64, n: usize| rows.iter().find(|r| r.0 == t && r.1 == n).unwrap().2;
        assert!((get(1.0, 2) - 1.3259).abs() < 0.005);
        assert!((get(2.0, 7) - 2.3038).abs() < 0.005);
        let mut buf = Vec::new();
        write_ratio_csv(&rows, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("theta,n,ratio\n"));
    }

    #[test]
    fn coverage_rows_and_header() {
        let cfg = ExperimentConfig {
            nominal: vec![0.999999],
            mc_reps: 3,
            boot_reps: 20,
            grid_step: 0.05,
            total_obs: 600,
            ..ExperimentConfig::default()
        };
        let rows = run_coverage(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        let mut buf = Vec::new();
        write_coverage_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(
            "design,n,theta_or_sigma,range_lo,range_hi,nominal,coverage,mc_reps,mean_zeta,mean_width,se\n"
        ));
        assert!(rows[0].mean_zeta > 0.0);
        assert!((0.0..=1.0).contains(&rows[0].coverage));
    }

    #[test]
    fn coverage_is_independent_of_thread_count() {
        let base = ExperimentConfig {
            mc_reps: 4,
            boot_reps: 15,
            grid_step: 0.05,
            total_obs: 500,
            ..ExperimentConfig::default()
        };
        let one = run_coverage(&ExperimentConfig { threads: 1, ..base.clone() }).unwrap();
        let two = run_coverage(&ExperimentConfig { threads: 2, ..base }).unwrap();
        assert_eq!(one, two);
    }

    #[test]
    fn file_estimate_matches_in_memory() {
        let spec = DgpSpec::homogeneous(1.0, 4, 60, 5).unwrap();
        let data = dgp::sample(&spec).unwrap().into_observed();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bids.csv");
        write_bids(&data, std::fs::File::create(&path).unwrap()).unwrap();
        let opts = EstimateOptions { boot_reps: 20, points: 11, ..EstimateOptions::default() };
        let a = estimate_file(&path, &opts).unwrap();
        let b = estimate(&data, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 11);
        for r in &a {
            assert!(r.band_lo <= r.f_hat && r.f_hat <= r.band_hi);
            assert!(r.ci_lo <= r.ci_hi && r.var_hat >= 0.0);
        }
        let mut buf = Vec::new();
        write_estimate_csv(&a, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("v,f_hat,var_hat,ci_lo,ci_hi,band_lo,band_hi\n"));
        assert_eq!(text.lines().count(), 12);
        assert!(estimate_file(&dir.path().join("missing.csv"), &opts).is_err());
    }

    #[test]
    fn selftest_passes() {
        for (name, ok, detail) in selftest() {
            assert!(ok, "{name}: {detail}");
        }
    }
}
