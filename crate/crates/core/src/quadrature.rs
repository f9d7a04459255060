//! Quadrature and root-finding utilities shared by the action-angle and
//! averaged-dynamics machinery.
//!
//! Integrals with square-root turning-point singularities are evaluated by
//! substituting `x = mid + half·sin s`, which cancels the endpoint zeros and
//! leaves a smooth integrand for Gauss-Legendre nodes (all strictly
//! interior).

use std::f64::consts::FRAC_PI_2;
use std::sync::OnceLock;

use crate::error::{NhError, Result};

/// Gauss-Legendre rule with nodes and weights mapped from [-1, 1].
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        let rule = gauss_quad::GaussLegendre::new(n).expect("Gauss-Legendre degree must be >= 2");
        let (nodes, weights) = rule.iter().map(|(x, w)| (*x, *w)).unzip();
        GaussRule { nodes, weights }
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut sum = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            sum += w * f(mid + half * x);
        }
        half * sum
    }
}

fn rule_cached(cell: &OnceLock<GaussRule>, n: usize) -> &GaussRule {
    cell.get_or_init(|| GaussRule::new(n))
}

/// 256-node rule; spectrally accurate for integrands analytic near the
/// interval.
pub fn integrate_256(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    static RULE: OnceLock<GaussRule> = OnceLock::new();
    rule_cached(&RULE, 256).integrate(a, b, f)
}

/// 2048-node rule for integrands with complex singularities close to the
/// real axis (pendulum levels near the separatrix).
pub fn integrate_2048(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    static RULE: OnceLock<GaussRule> = OnceLock::new();
    rule_cached(&RULE, 2048).integrate(a, b, f)
}

/// ∫_lo^hi g(x) dx with g vanishing like a square root at both endpoints.
/// The caller supplies g; the substitution renders the integrand smooth.
pub fn turning_point_integral(lo: f64, hi: f64, g: impl Fn(f64) -> f64) -> f64 {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    integrate_256(-FRAC_PI_2, FRAC_PI_2, |s| {
        g(mid + half * s.sin()) * half * s.cos()
    })
}

/// Composite Gauss-Legendre over panels delimited by `breaks` (sorted,
/// including both endpoints), `n` nodes per panel. Used when the integrand
/// is only piecewise smooth.
pub fn integrate_panels(breaks: &[f64], n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let rule = GaussRule::new(n);
    breaks
        .windows(2)
        .map(|w| rule.integrate(w[0], w[1], &f))
        .sum()
}

/// Bisection on a bracketing interval. Requires f(lo)·f(hi) ≤ 0.
pub fn bisect_root(mut lo: f64, mut hi: f64, xtol: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(NhError::NoRootBracketed { lo, hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= xtol || mid == lo || mid == hi {
            return Ok(mid);
        }
        let fmid = f(mid);
        if fmid == 0.0 {
            return Ok(mid);
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// div(ρ·f) at z by centered finite differences of each product component.
pub fn divergence_of_weighted_field(
    n: usize,
    z: &[f64],
    step: f64,
    rho: impl Fn(&[f64]) -> f64,
    field: impl Fn(&[f64]) -> Vec<f64>,
) -> f64 {
    let mut div = 0.0;
    let mut zp = z.to_vec();
    let mut zm = z.to_vec();
    for i in 0..n {
        zp[i] = z[i] + step;
        zm[i] = z[i] - step;
        let plus = rho(&zp) * field(&zp)[i];
        let minus = rho(&zm) * field(&zm)[i];
        div += (plus - minus) / (2.0 * step);
        zp[i] = z[i];
        zm[i] = z[i];
    }
    div
}
