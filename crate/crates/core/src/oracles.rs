//! Closed-form quantities for the power-family designs, used as test
//! oracles: the asymptotic variance of the density estimator, the variance
//! ratio against the infeasible quantile-based estimator and the exact
//! inverse bidding strategy.

use crate::dgp::{self, bid_slope, DgpSpec};
use crate::error::{Error, Result};
use crate::kernels::{kernel_derivative_roughness, KernelSpec};
use crate::quadrature::{adaptive_simpson, gauss_legendre_64, integrate_piecewise};

const OUTER_TOL: f64 = 1e-11;
const OUTER_DEPTH: u32 = 40;

/// `∫ { ∫ a(u) b(w - c u) du }² dw` for functions supported on [-1, 1].
fn nested_square<A, B>(a: A, b: B, c: f64) -> f64
where
    A: Fn(f64) -> f64,
    B: Fn(f64) -> f64,
{
    let rule = gauss_legendre_64();
    let inner = |w: f64| {
        // b(w - c u) has kinks where w - c u = ±1
        let breaks = [(w - 1.0) / c, (w + 1.0) / c, 0.0];
        integrate_piecewise(rule, |u| a(u) * b(w - c * u), -1.0, 1.0, &breaks)
    };
    let reach = 1.0 + c;
    // split at the points where the inner support changes shape
    let mut pts = vec![-reach, -(1.0 - c).abs(), 0.0, (1.0 - c).abs(), reach];
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts.windows(2)
        .filter(|p| p[1] > p[0])
        .map(|p| adaptive_simpson(|w| inner(w).powi(2), p[0], p[1], OUTER_TOL, OUTER_DEPTH))
        .sum()
}

/// `C(c) = ∫ { ∫ K_f'(u) K_g(w - c u) du }² dw`.
pub fn convolution_constant(s_prime: f64, k_f: &KernelSpec, k_g: &KernelSpec) -> Result<f64> {
    if !(s_prime.is_finite() && s_prime > 0.0) {
        return Err(Error::InvalidParameter(format!("slope must be positive, got {s_prime}")));
    }
    Ok(nested_square(|u| k_f.deriv(u), |x| k_g.eval(x), s_prime))
}

/// The same construction with the derivative on the inner kernel:
/// `∫ { ∫ K_f(u) K_g'(w - c u) du }² dw`.
pub fn convolution_constant_swapped(s_prime: f64, k_f: &KernelSpec, k_g: &KernelSpec) -> Result<f64> {
    if !(s_prime.is_finite() && s_prime > 0.0) {
        return Err(Error::InvalidParameter(format!("slope must be positive, got {s_prime}")));
    }
    Ok(nested_square(|u| k_f.eval(u), |x| k_g.deriv(x), s_prime))
}

/// Asymptotic variance of `f̂(v)` scaled by `L h³` with a common bandwidth.
pub fn analytic_variance(spec: &DgpSpec, v: f64, k_f: &KernelSpec, k_g: &KernelSpec) -> Result<f64> {
    analytic_variance_ratio(spec, v, None, 1.0, k_f, k_g)
}

/// Asymptotic variance of `f̂(v)` scaled by `L h_f³` when the two steps use
/// bandwidths with ratio `rho = h_f / h_g`:
/// `ρ F² f² C(ρ s') / (N (N-1)² g(s(v))³)`. At `rho = 1` this is
/// [`analytic_variance`]. In the heterogeneous design `x` selects the
/// conditional distribution.
pub fn analytic_variance_ratio(
    spec: &DgpSpec,
    v: f64,
    x: Option<f64>,
    rho: f64,
    k_f: &KernelSpec,
    k_g: &KernelSpec,
) -> Result<f64> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::Domain { value: v, domain: "(0, 1)".into() });
    }
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::InvalidParameter(format!("bandwidth ratio must be positive, got {rho}")));
    }
    let t = dgp::truth(spec, v, x)?;
    let n = spec.n_bidders() as f64;
    let pre = t.cdf.powi(2) * t.pdf.powi(2) / (n * (n - 1.0).powi(2) * t.bid_pdf.powi(3));
    Ok(rho * pre * convolution_constant(rho * t.bid_slope, k_f, k_g)?)
}

/// `V_QB / V_GPV = s'² ∫K'² / C(s')` with one second-order kernel for both
/// steps.
pub fn ratio_qb_over_gpv(theta: f64, n: usize, k: &KernelSpec) -> Result<f64> {
    if !(theta.is_finite() && theta > 0.0) {
        return Err(Error::InvalidParameter(format!("theta must be positive, got {theta}")));
    }
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least two bidders, got {n}")));
    }
    if k.order() != 2 {
        return Err(Error::InvalidParameter("the ratio is defined for a second-order kernel".into()));
    }
    let c = bid_slope(theta, n);
    Ok(c * c * kernel_derivative_roughness(k) / convolution_constant(c, k, k)?)
}

/// Exact inverse of the equilibrium bid, `ξ(b) = b (1 + 1/(θ(N-1)))`.
pub fn analytic_xi(b: f64, theta: f64, n: usize) -> Result<f64> {
    if !(theta.is_finite() && theta > 0.0) || n < 2 {
        return Err(Error::InvalidParameter("need theta > 0 and at least two bidders".into()));
    }
    let top = bid_slope(theta, n);
    if !(0.0..=top).contains(&b) {
        return Err(Error::Domain { value: b, domain: format!("[0, {top}]") });
    }
    Ok(b * (1.0 + 1.0 / (theta * (n - 1) as f64)))
}
