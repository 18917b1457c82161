//! Symmetric kernels supported on [-1, 1].
//!
//! Both kernels are polynomials times `(1 - u²)³`, so they and their first two
//! derivatives vanish at the support edges.
//!
//! | kernel            | K(u)                                   | order |
//! |-------------------|----------------------------------------|-------|
//! | triweight         | (35/32) (1 - u²)³                      | 2     |
//! | triweight order 4 | (315/512) (3 - 11 u²) (1 - u²)³        | 4     |
//!
//! The order-4 coefficients solve `a m0 + b m2 = 1`, `a m2 + b m4 = 0` with
//! `m_k = ∫ u^k (1-u²)³ du` (m0 = 32/35, m2 = 32/315, m4 = 32/1155), giving
//! `a = 945/512`, `b = -3465/512`. Moments are re-checked numerically whenever
//! a kernel is constructed.

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre_64;

const TRIWEIGHT_C: f64 = 35.0 / 32.0;
const ORDER4_A: f64 = 945.0 / 512.0;
const ORDER4_B: f64 = -3465.0 / 512.0;
const MOMENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Triweight,
    TriweightOrder4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelSpec {
    kind: KernelKind,
    order: u32,
}

impl KernelSpec {
    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            KernelKind::Triweight => "triweight",
            KernelKind::TriweightOrder4 => "triweight4",
        }
    }

    /// Index of the first non-vanishing moment beyond the zeroth.
    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn support_radius(&self) -> f64 {
        1.0
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        if u.abs() >= 1.0 {
            0.0
        } else {
            self.eval_inside(u)
        }
    }

    /// Kernel value for `|u| < 1`; callers guarantee the range.
    #[inline(always)]
    pub fn eval_inside(&self, u: f64) -> f64 {
        let u2 = u * u;
        let t = 1.0 - u2;
        let t3 = t * t * t;
        match self.kind {
            KernelKind::Triweight => TRIWEIGHT_C * t3,
            KernelKind::TriweightOrder4 => (ORDER4_A + ORDER4_B * u2) * t3,
        }
    }

    #[inline]
    pub fn deriv(&self, u: f64) -> f64 {
        if u.abs() >= 1.0 {
            0.0
        } else {
            self.deriv_inside(u)
        }
    }

    #[inline(always)]
    pub fn deriv_inside(&self, u: f64) -> f64 {
        let u2 = u * u;
        let t = 1.0 - u2;
        let t2 = t * t;
        match self.kind {
            KernelKind::Triweight => -6.0 * TRIWEIGHT_C * u * t2,
            KernelKind::TriweightOrder4 => {
                2.0 * ORDER4_B * u * t2 * t - 6.0 * u * (ORDER4_A + ORDER4_B * u2) * t2
            }
        }
    }

    fn checked(kind: KernelKind, order: u32) -> Self {
        let k = KernelSpec { kind, order };
        if let Err(e) = k.verify_moments() {
            panic!("kernel {} failed its moment check: {e}", k.name());
        }
        k
    }

    /// Check `∫K = 1`, `∫u^p K = 0` for `1 ≤ p < order` and a non-zero
    /// `order`-th moment.
    pub fn verify_moments(&self) -> Result<()> {
        let m0 = kernel_moment(self, 0);
        if (m0 - 1.0).abs() > MOMENT_TOL {
            return Err(Error::InvalidParameter(format!("zeroth moment {m0}")));
        }
        for p in 1..self.order {
            let m = kernel_moment(self, p);
            if m.abs() > MOMENT_TOL {
                return Err(Error::InvalidParameter(format!("moment {p} = {m}")));
            }
        }
        let m = kernel_moment(self, self.order);
        if m.abs() <= MOMENT_TOL {
            return Err(Error::InvalidParameter(format!(
                "moment {} vanishes, order is higher than declared",
                self.order
            )));
        }
        Ok(())
    }
}

/// Second-order triweight kernel `(35/32)(1-u²)³`.
pub fn triweight() -> KernelSpec {
    KernelSpec::checked(KernelKind::Triweight, 2)
}

/// Fourth-order triweight kernel `(315/512)(3-11u²)(1-u²)³`.
pub fn triweight_order4() -> KernelSpec {
    KernelSpec::checked(KernelKind::TriweightOrder4, 4)
}

/// `∫ u^p K(u) du` over the support, by 64-node Gauss–Legendre (exact for
/// these polynomial kernels up to p = 8 and well beyond).
pub fn kernel_moment(k: &KernelSpec, p: u32) -> f64 {
    assert!(p <= 8, "moments are only supported up to p = 8");
    gauss_legendre_64().integrate(|u| u.powi(p as i32) * k.eval(u), -1.0, 1.0)
}

/// `∫ K(u)² du`.
pub fn kernel_roughness(k: &KernelSpec) -> f64 {
    gauss_legendre_64().integrate(|u| k.eval(u).powi(2), -1.0, 1.0)
}

/// `∫ K'(u)² du`.
pub fn kernel_derivative_roughness(k: &KernelSpec) -> f64 {
    gauss_legendre_64().integrate(|u| k.deriv(u).powi(2), -1.0, 1.0)
}

/// Product kernel `Π_k K(point_k)` in `dim` dimensions.
pub fn product_kernel(k: &KernelSpec, dim: usize, point: &[f64]) -> Result<f64> {
    if point.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: point.len() });
    }
    Ok(product_eval(k, point))
}

#[inline]
pub(crate) fn product_eval(k: &KernelSpec, point: &[f64]) -> f64 {
    let mut acc = 1.0;
    for &u in point {
        if u.abs() >= 1.0 {
            return 0.0;
        }
        acc *= k.eval_inside(u);
    }
    acc
}
