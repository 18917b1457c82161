//! Monte Carlo designs built on the power family `F(v) = v^θ` on [0, 1].
//!
//! With `N` bidders the equilibrium bid is linear, `s(v) = c v` with
//! `c = 1 - 1/(θ(N-1)+1)`, so every quantity of interest has a closed form.
//! The heterogeneous design draws an auction covariate `X` from a normal
//! distribution with mean 1 truncated to [0, 2] and uses `θ = X`.

use rand::Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};
use crate::sample::{AuctionSample, BidData};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    PowerHomogeneous { theta: f64 },
    PowerHetero { sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DgpSpec {
    model: Model,
    n_bidders: usize,
    n_auctions: usize,
    seed: u64,
}

impl DgpSpec {
    pub fn new(model: Model, n_bidders: usize, n_auctions: usize, seed: u64) -> Result<Self> {
        match model {
            Model::PowerHomogeneous { theta } if !(theta.is_finite() && theta > 0.0) => {
                return Err(Error::InvalidParameter(format!("theta must be positive, got {theta}")))
            }
            Model::PowerHetero { sigma } if !(sigma.is_finite() && sigma > 0.0) => {
                return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")))
            }
            _ => {}
        }
        if n_bidders < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least two bidders, got {n_bidders}"
            )));
        }
        if n_auctions < 1 {
            return Err(Error::InvalidParameter("need at least one auction".into()));
        }
        Ok(DgpSpec { model, n_bidders, n_auctions, seed })
    }

    pub fn homogeneous(theta: f64, n_bidders: usize, n_auctions: usize, seed: u64) -> Result<Self> {
        Self::new(Model::PowerHomogeneous { theta }, n_bidders, n_auctions, seed)
    }

    pub fn hetero(sigma: f64, n_bidders: usize, n_auctions: usize, seed: u64) -> Result<Self> {
        Self::new(Model::PowerHetero { sigma }, n_bidders, n_auctions, seed)
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn n_bidders(&self) -> usize {
        self.n_bidders
    }

    pub fn n_auctions(&self) -> usize {
        self.n_auctions
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_auctions(mut self, n_auctions: usize) -> Self {
        self.n_auctions = n_auctions.max(1);
        self
    }

    pub fn is_hetero(&self) -> bool {
        matches!(self.model, Model::PowerHetero { .. })
    }
}

/// Slope of the linear equilibrium strategy.
pub fn bid_slope(theta: f64, n: usize) -> f64 {
    1.0 - 1.0 / (theta * (n as f64 - 1.0) + 1.0)
}

/// Equilibrium bid of a bidder with valuation `v`.
pub fn bne_bid(v: f64, theta: f64, n: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Domain { value: v, domain: "[0, 1]".into() });
    }
    Ok(bid_slope(theta, n) * v)
}

fn auction_rng(spec: &DgpSpec, l: usize) -> StreamRng {
    rng::stream(spec.seed, &[rng::tag::SIMULATE, l as u64])
}

/// Valuations `U^{1/θ}` and their bids, one stream per auction.
pub fn sample_homogeneous(spec: &DgpSpec) -> Result<AuctionSample> {
    let Model::PowerHomogeneous { theta } = spec.model else {
        return Err(Error::InvalidParameter("sample_homogeneous needs a homogeneous design".into()));
    };
    let c = bid_slope(theta, spec.n_bidders);
    let mut bids = Vec::with_capacity(spec.n_auctions);
    let mut vals = Vec::with_capacity(spec.n_auctions);
    for l in 0..spec.n_auctions {
        let mut r = auction_rng(spec, l);
        let v: Vec<f64> = (0..spec.n_bidders).map(|_| positive_uniform(&mut r).powf(1.0 / theta)).collect();
        bids.push(v.iter().map(|x| c * x).collect());
        vals.push(v);
    }
    AuctionSample::with_valuations(BidData::homogeneous(bids)?, vals)
}

/// Covariate from the truncated normal, then valuations `U^{1/X}` and bids
/// `(1 - 1/(X(N-1)+1)) V`.
pub fn sample_hetero(spec: &DgpSpec) -> Result<AuctionSample> {
    let Model::PowerHetero { sigma } = spec.model else {
        return Err(Error::InvalidParameter("sample_hetero needs a heterogeneous design".into()));
    };
    let tn = TruncatedNormal::new(1.0, sigma, 0.0, 2.0)?;
    let mut bids = Vec::with_capacity(spec.n_auctions);
    let mut vals = Vec::with_capacity(spec.n_auctions);
    let mut xs = Vec::with_capacity(spec.n_auctions);
    for l in 0..spec.n_auctions {
        let mut r = auction_rng(spec, l);
        let x = tn.sample(&mut r);
        let c = bid_slope(x, spec.n_bidders);
        let v: Vec<f64> = (0..spec.n_bidders).map(|_| positive_uniform(&mut r).powf(1.0 / x)).collect();
        bids.push(v.iter().map(|y| c * y).collect());
        vals.push(v);
        xs.push(vec![x]);
    }
    AuctionSample::with_valuations(BidData::new(bids, Some(xs))?, vals)
}

pub fn sample(spec: &DgpSpec) -> Result<AuctionSample> {
    match spec.model {
        Model::PowerHomogeneous { .. } => sample_homogeneous(spec),
        Model::PowerHetero { .. } => sample_hetero(spec),
    }
}

/// Uniform on the open interval (0, 1), so every bid is strictly positive.
fn positive_uniform(r: &mut StreamRng) -> f64 {
    loop {
        let u: f64 = r.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Normal distribution truncated to `[lo, hi]`, sampled by inverting its CDF.
#[derive(Debug, Clone)]
pub struct TruncatedNormal {
    normal: Normal,
    lo: f64,
    hi: f64,
    cdf_lo: f64,
    mass: f64,
}

impl TruncatedNormal {
    pub fn new(mean: f64, sd: f64, lo: f64, hi: f64) -> Result<Self> {
        let normal =
            Normal::new(mean, sd).map_err(|e| Error::InvalidParameter(format!("normal: {e}")))?;
        if !(lo < hi) {
            return Err(Error::InvalidParameter("truncation bounds must satisfy lo < hi".into()));
        }
        let cdf_lo = normal.cdf(lo);
        let mass = normal.cdf(hi) - cdf_lo;
        Ok(TruncatedNormal { normal, lo, hi, cdf_lo, mass })
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.normal
            .inverse_cdf(self.cdf_lo + p * self.mass)
            .clamp(self.lo, self.hi)
    }

    pub fn sample(&self, r: &mut StreamRng) -> f64 {
        self.quantile(r.random::<f64>())
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x < self.lo || x > self.hi {
            0.0
        } else {
            self.normal.pdf(x) / self.mass
        }
    }
}

/// Density of the covariate in the heterogeneous design.
pub fn covariate_pdf(sigma: f64, x: f64) -> Result<f64> {
    Ok(TruncatedNormal::new(1.0, sigma, 0.0, 2.0)?.pdf(x))
}

/// Analytic quantities at valuation `v` (and covariate `x` in the
/// heterogeneous design).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truth {
    /// F(v)
    pub cdf: f64,
    /// f(v)
    pub pdf: f64,
    /// s(v)
    pub bid: f64,
    /// s'(v)
    pub bid_slope: f64,
    /// G(s(v))
    pub bid_cdf: f64,
    /// g(s(v))
    pub bid_pdf: f64,
}

fn power_truth(theta: f64, n: usize, v: f64) -> Truth {
    let c = bid_slope(theta, n);
    let cdf = v.powf(theta);
    let pdf = theta * v.powf(theta - 1.0);
    Truth { cdf, pdf, bid: c * v, bid_slope: c, bid_cdf: cdf, bid_pdf: pdf / c }
}

fn exponent(spec: &DgpSpec, x: Option<f64>) -> Result<f64> {
    match (spec.model, x) {
        (Model::PowerHomogeneous { theta }, None) => Ok(theta),
        (Model::PowerHetero { .. }, Some(x)) if x > 0.0 && x <= 2.0 => Ok(x),
        (Model::PowerHetero { .. }, Some(x)) => Err(Error::Domain { value: x, domain: "(0, 2]".into() }),
        (Model::PowerHomogeneous { .. }, Some(_)) => {
            Err(Error::InvalidParameter("homogeneous design takes no covariate".into()))
        }
        (Model::PowerHetero { .. }, None) => {
            Err(Error::InvalidParameter("heterogeneous design needs a covariate".into()))
        }
    }
}

pub fn truth(spec: &DgpSpec, v: f64, x: Option<f64>) -> Result<Truth> {
    let theta = exponent(spec, x)?;
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Domain { value: v, domain: "[0, 1]".into() });
    }
    Ok(power_truth(theta, spec.n_bidders, v))
}

/// Bid CDF and density `(G(b), g(b))` of the power family.
pub fn bid_distribution(theta: f64, n: usize, b: f64) -> (f64, f64) {
    let c = bid_slope(theta, n);
    let v = (b / c).clamp(0.0, 1.0);
    if b < 0.0 || b > c {
        return (if b > c { 1.0 } else { 0.0 }, 0.0);
    }
    (v.powf(theta), theta * v.powf(theta - 1.0) / c)
}
