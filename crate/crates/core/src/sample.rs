//! Observed auction data.

use crate::error::{Error, Result};

/// What the econometrician sees: bids per auction, plus optional auction
/// covariates. The number of bidders in auction `l` is the length of row `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct BidData {
    bids: Vec<Vec<f64>>,
    covariates: Option<Vec<Vec<f64>>>,
}

impl BidData {
    pub fn new(bids: Vec<Vec<f64>>, covariates: Option<Vec<Vec<f64>>>) -> Result<Self> {
        if bids.is_empty() {
            return Err(Error::Empty("no auctions"));
        }
        for (l, row) in bids.iter().enumerate() {
            if row.is_empty() {
                return Err(Error::Data(format!("auction {l} has no bids")));
            }
            if let Some(b) = row.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
                return Err(Error::Data(format!(
                    "auction {l}: bid {b} is not a finite non-negative number"
                )));
            }
        }
        if let Some(x) = &covariates {
            if x.len() != bids.len() {
                return Err(Error::DimensionMismatch { expected: bids.len(), got: x.len() });
            }
            let d = x[0].len();
            if d == 0 {
                return Err(Error::Data("covariate vectors are empty".into()));
            }
            for (l, xl) in x.iter().enumerate() {
                if xl.len() != d {
                    return Err(Error::DimensionMismatch { expected: d, got: xl.len() });
                }
                if xl.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Data(format!("auction {l}: non-finite covariate")));
                }
            }
        }
        Ok(BidData { bids, covariates })
    }

    /// Homogeneous data: `bids` must be rectangular.
    pub fn homogeneous(bids: Vec<Vec<f64>>) -> Result<Self> {
        let d = BidData::new(bids, None)?;
        d.common_bidder_count()?;
        Ok(d)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.bids
    }

    pub fn covariates(&self) -> Option<&[Vec<f64>]> {
        self.covariates.as_deref()
    }

    pub fn covariate_dim(&self) -> usize {
        self.covariates.as_ref().map_or(0, |x| x[0].len())
    }

    pub fn n_auctions(&self) -> usize {
        self.bids.len()
    }

    pub fn n_observations(&self) -> usize {
        self.bids.iter().map(Vec::len).sum()
    }

    pub fn bidder_counts(&self) -> Vec<usize> {
        self.bids.iter().map(Vec::len).collect()
    }

    /// The common number of bidders when all auctions have the same size.
    pub fn common_bidder_count(&self) -> Result<usize> {
        let n = self.bids[0].len();
        if self.bids.iter().any(|r| r.len() != n) {
            return Err(Error::Data("auctions have different numbers of bidders".into()));
        }
        if n < 2 {
            return Err(Error::Data("need at least two bidders per auction".into()));
        }
        Ok(n)
    }

    /// All bids in auction-major order.
    pub fn pooled(&self) -> Vec<f64> {
        self.bids.iter().flatten().copied().collect()
    }
}

/// Simulated data: the observed part plus the latent valuations, which only
/// oracle checks may read.
#[derive(Debug, Clone, PartialEq)]
pub struct AuctionSample {
    observed: BidData,
    valuations: Option<Vec<Vec<f64>>>,
}

impl AuctionSample {
    pub fn from_observed(observed: BidData) -> Self {
        AuctionSample { observed, valuations: None }
    }

    pub fn with_valuations(observed: BidData, valuations: Vec<Vec<f64>>) -> Result<Self> {
        let same_shape = valuations.len() == observed.n_auctions()
            && valuations.iter().zip(observed.rows()).all(|(v, b)| v.len() == b.len());
        if !same_shape {
            return Err(Error::Data("valuations do not match the bid layout".into()));
        }
        Ok(AuctionSample { observed, valuations: Some(valuations) })
    }

    /// Blinded view handed to every estimator.
    pub fn observed(&self) -> &BidData {
        &self.observed
    }

    /// Latent valuations, for oracle comparisons only.
    pub fn oracle_valuations(&self) -> Option<&[Vec<f64>]> {
        self.valuations.as_deref()
    }

    pub fn into_observed(self) -> BidData {
        self.observed
    }
}
