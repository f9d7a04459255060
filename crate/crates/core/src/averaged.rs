//! The averaged slow dynamics obtained in the large-thermostat-mass limit,
//! its conserved quantities, the period function of the closed orbits
//! around a well of W, and the well-width isochrony residual.
//!
//! In the slow variables the one-dimensional system reads σ̇ = −α,
//! α̇ = U′(σ) with U(σ) = W(a₀ e^σ) anchored at a local minimizer a₀ of W,
//! conserving G = α²/2 + U(σ). The planar system evolves (L, H, α) with the
//! kinetic-moment interpolant and conserves E = α²/2 + H − (2/β)ln|L|.

use crate::actionlib::WFunction;
use crate::error::{NhError, Result};
use crate::integrators::rk4_step;
use crate::interp::PiecewiseLinear;
use crate::quadrature::{bisect_root, integrate_256, GaussRule};

/// Slow variables of the one-dimensional averaged system: σ = ln(a/a₀) and
/// the rescaled thermostat momentum α = ξ/√Q.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragedState1D {
    pub sigma: f64,
    pub alpha: f64,
}

/// Slow variables of the planar averaged system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragedState2D {
    pub l: f64,
    pub h: f64,
    pub alpha: f64,
}

/// The well U(σ) = W(a₀ e^σ) seen by the averaged dynamics around the
/// anchor action a₀. The validated σ window is the image of the table's
/// action range; orbits touching its edge are rejected, never extrapolated.
///
/// Confinement positions are resolved at construction: on each side of the
/// anchor the well extends to the nearest local maximum of W (where k
/// crosses zero downward), or to the window edge when W never turns over on
/// that side. U is monotone between the anchor and either confinement
/// position because k keeps one sign between adjacent critical points.
#[derive(Debug, Clone)]
pub struct LogActionWell {
    w: WFunction,
    a0: f64,
    sigma_confine_lo: f64,
    sigma_confine_hi: f64,
    barrier: f64,
}

impl LogActionWell {
    pub fn new(w: WFunction, a0: f64) -> Result<Self> {
        if !(a0 > w.a_min() && a0 < w.a_max()) {
            return Err(NhError::OutOfRange {
                x: a0,
                lo: w.a_min(),
                hi: w.a_max(),
            });
        }
        let local_max = |seg: &[f64]| -> Option<f64> {
            let k0 = w.k(seg[0]).expect("knot in range");
            let k1 = w.k(seg[1]).expect("knot in range");
            if k0 > 0.0 && k1 < 0.0 {
                Some(
                    bisect_root(seg[0], seg[1], 1e-12, |x| w.k(x).expect("in range"))
                        .expect("bracketed"),
                )
            } else {
                None
            }
        };
        let knots = w.a_knots().to_vec();
        let a_hi = knots
            .windows(2)
            .filter(|seg| seg[1] > a0)
            .find_map(local_max)
            .unwrap_or_else(|| w.a_max());
        let a_lo = knots
            .windows(2)
            .rev()
            .filter(|seg| seg[0] < a0)
            .find_map(local_max)
            .unwrap_or_else(|| w.a_min());
        let barrier = w
            .eval(a_lo)
            .expect("in range")
            .min(w.eval(a_hi).expect("in range"));
        Ok(LogActionWell {
            w,
            a0,
            sigma_confine_lo: (a_lo / a0).ln(),
            sigma_confine_hi: (a_hi / a0).ln(),
            barrier,
        })
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn w(&self) -> &WFunction {
        &self.w
    }

    pub fn sigma_min(&self) -> f64 {
        (self.w.a_min() / self.a0).ln()
    }

    pub fn sigma_max(&self) -> f64 {
        (self.w.a_max() / self.a0).ln()
    }

    pub fn action_of_sigma(&self, sigma: f64) -> f64 {
        // The exp/ln roundtrip at the window edges can land one ulp outside
        // the tabulated action range; snap such values back.
        let a = self.a0 * sigma.exp();
        let (lo, hi) = (self.w.a_min(), self.w.a_max());
        if a < lo && a > lo * (1.0 - 1e-12) {
            return lo;
        }
        if a > hi && a < hi * (1.0 + 1e-12) {
            return hi;
        }
        a
    }

    pub fn u(&self, sigma: f64) -> Result<f64> {
        self.w.eval(self.action_of_sigma(sigma))
    }

    /// U′(σ) = k(a₀ e^σ).
    pub fn u_prime(&self, sigma: f64) -> Result<f64> {
        self.w.k(self.action_of_sigma(sigma))
    }

    /// Well bottom value G₀ = U(0) = W(a₀).
    pub fn g0(&self) -> f64 {
        self.u(0.0).expect("anchor inside range")
    }

    /// Conserved quantity G(σ, α) = α²/2 + U(σ).
    pub fn g(&self, s: &AveragedState1D) -> Result<f64> {
        Ok(0.5 * s.alpha * s.alpha + self.u(s.sigma)?)
    }

    /// Largest level value G whose curve closes inside this well.
    pub fn barrier(&self) -> f64 {
        self.barrier
    }

    /// Turning points σ₁ < 0 < σ₂ of the level curve U(σ) = g, bisected on
    /// the monotone stretches between the anchor and the confinement
    /// positions.
    pub fn turning_points(&self, g: f64) -> Result<(f64, f64)> {
        let g0 = self.g0();
        if !(g > g0 && g < self.barrier) {
            return Err(NhError::LevelOutOfWindow {
                g,
                lo: g0,
                hi: self.barrier,
            });
        }
        let f = |sigma: f64| self.u(sigma).expect("inside window") - g;
        let sigma1 = bisect_root(self.sigma_confine_lo, 0.0, 1e-14, f)?;
        let sigma2 = bisect_root(0.0, self.sigma_confine_hi, 1e-14, f)?;
        Ok((sigma1, sigma2))
    }
}

/// Right-hand side of the averaged one-dimensional system: (σ̇, α̇) =
/// (−α, U′(σ)). In the action itself this is ȧ = −α·a, α̇ = k(a).
pub fn averaged_rhs_1d(s: &AveragedState1D, well: &LogActionWell) -> Result<(f64, f64)> {
    Ok((-s.alpha, well.u_prime(s.sigma)?))
}

/// Right-hand side of the planar averaged system:
/// (L̇, Ḣ, α̇) = (−αL, −α·k₀app(H), k₀app(H) − 2/β).
pub fn averaged_rhs_2d(
    s: &AveragedState2D,
    k0app: &PiecewiseLinear,
    beta: f64,
) -> Result<(f64, f64, f64)> {
    let k0 = k0app.eval(s.h)?;
    Ok((-s.alpha * s.l, -s.alpha * k0, k0 - 2.0 / beta))
}

/// First integrals of the averaged system ȧ = −αa, α̇ = k(a): the ratios
/// a_i/a_N, and G_N = α²/2 plus the ray integral of k(s·a/a_N)/s up to a_N.
/// The lower limit sits at ±1 on the ray (matching the sign of a_N) so that
/// values are comparable along a trajectory.
pub fn averaged_first_integrals(
    actions: &[f64],
    alpha: f64,
    k: impl Fn(&[f64]) -> f64,
) -> Result<Vec<f64>> {
    let n = actions.len();
    if n == 0 {
        return Err(NhError::InvalidParameter("empty action vector".into()));
    }
    let a_n = actions[n - 1];
    if a_n == 0.0 {
        return Err(NhError::InvalidParameter(
            "last action component must be nonzero".into(),
        ));
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n - 1 {
        out.push(actions[i] / a_n);
    }
    let ray: Vec<f64> = actions.iter().map(|a| a / a_n).collect();
    let from = a_n.signum();
    let integral = integrate_256(from, a_n, |s| {
        let point: Vec<f64> = ray.iter().map(|r| r * s).collect();
        k(&point) / s
    });
    out.push(0.5 * alpha * alpha + integral);
    Ok(out)
}

fn sigma_breakpoints(well: &LogActionWell, sigma1: f64, sigma2: f64) -> Vec<f64> {
    // Substitution σ = mid + half·sin t; panels split at the table knots
    // where the piecewise potential changes curvature.
    let mid = 0.5 * (sigma1 + sigma2);
    let half = 0.5 * (sigma2 - sigma1);
    let mut ts = vec![-std::f64::consts::FRAC_PI_2];
    for &a in well.w.a_knots() {
        let sigma = (a / well.a0()).ln();
        let u = (sigma - mid) / half;
        if u > -1.0 + 1e-12 && u < 1.0 - 1e-12 {
            ts.push(u.asin());
        }
    }
    ts.push(std::f64::consts::FRAC_PI_2);
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    ts
}

/// Period of the closed averaged orbit at level G = g, by turning-point
/// quadrature with panels aligned to the table knots; `nodes_per_panel`
/// controls the convergence test.
pub fn period_t1_with_nodes(g: f64, well: &LogActionWell, nodes_per_panel: usize) -> Result<f64> {
    let (sigma1, sigma2) = well.turning_points(g)?;
    let mid = 0.5 * (sigma1 + sigma2);
    let half = 0.5 * (sigma2 - sigma1);
    let breaks = sigma_breakpoints(well, sigma1, sigma2);
    let rule = GaussRule::new(nodes_per_panel);
    let mut total = 0.0;
    for w in breaks.windows(2) {
        total += rule.integrate(w[0], w[1], |t| {
            let sigma = mid + half * t.sin();
            let head = (g - well.u(sigma).expect("inside window")).max(0.0);
            half * t.cos() / (2.0 * head).sqrt().max(1e-300)
        });
    }
    Ok(2.0 * total)
}

/// Period of the closed averaged orbit at level g (64 nodes per knot panel).
pub fn period_t1(g: f64, well: &LogActionWell) -> Result<f64> {
    period_t1_with_nodes(g, well, 64)
}

/// Independent period estimate: integrate the averaged field from the left
/// turning point and time the second return of α to zero, refining each
/// crossing on the integration substeps.
pub fn period_t1_first_return(g: f64, well: &LogActionWell) -> Result<f64> {
    let (sigma1, _) = well.turning_points(g)?;
    let t1_hint = period_t1(g, well)?;
    let dt = t1_hint / 20_000.0;
    let field = |y: &[f64; 2]| -> Result<[f64; 2]> {
        Ok([-y[1], well.u_prime(y[0])?])
    };
    // Starting at a turning point, α returns to zero at each half period;
    // the second crossing closes the orbit.
    let mut y = [sigma1, 0.0];
    let mut t = 0.0;
    let mut crossings = Vec::new();
    let max_steps = 200_000;
    for _ in 0..max_steps {
        let y_next = rk4_step(field, &y, dt)?;
        if y[1] != 0.0 && y[1].signum() != y_next[1].signum() {
            // Secant refinement of the α zero crossing inside the step.
            let frac = y[1] / (y[1] - y_next[1]);
            crossings.push(t + frac * dt);
            if crossings.len() == 2 {
                return Ok(crossings[1]);
            }
        }
        y = y_next;
        t += dt;
    }
    Err(NhError::SectionStall {
        max_steps: max_steps as u64,
    })
}

/// Width of the potential well at level g together with the isochrony
/// residual L(g) − (T₁(g)/π)·√(2(g − G₀)); the residual vanishes exactly
/// when the well is quadratic.
pub fn well_width_and_isochrony(g: f64, well: &LogActionWell) -> Result<(f64, f64)> {
    let (sigma1, sigma2) = well.turning_points(g)?;
    let width = sigma2 - sigma1;
    let t1 = period_t1(g, well)?;
    let residual = width - t1 / std::f64::consts::PI * (2.0 * (g - well.g0())).sqrt();
    Ok((width, residual))
}

/// The level grid for the period function: `n` values from G₀ + 1e-3 up to
/// the confining barrier minus 1e-4, with the period at each node.
pub fn period_grid(well: &LogActionWell, n: usize) -> Result<Vec<(f64, f64)>> {
    if n < 2 {
        return Err(NhError::InvalidParameter(
            "period grid needs at least two nodes".into(),
        ));
    }
    let lo = well.g0() + 1e-3;
    let hi = well.barrier() - 1e-4;
    if !(hi > lo) {
        return Err(NhError::LevelOutOfWindow {
            g: hi,
            lo: well.g0(),
            hi: well.barrier(),
        });
    }
    (0..n)
        .map(|i| {
            let g = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            Ok((g, period_t1(g, well)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actionlib::{
        build_action_table, canonical_pendulum_grid, ActionEntry, ActionTable, WFunction,
    };
    use crate::integrators::symplectic_euler_step;
    use crate::models::{ModelKind, ModelSpec};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn harmonic_well(beta: f64) -> LogActionWell {
        let m = ModelSpec::new(ModelKind::Harmonic1d, 1.0, 1.0).unwrap();
        let grid: Vec<f64> = (1..=240).map(|i| 0.025 * i as f64).collect();
        let table = build_action_table(&m, &grid).unwrap();
        let w = WFunction::new(&table, beta, 1).unwrap();
        let a0 = w.minimizers()[0];
        LogActionWell::new(w, a0).unwrap()
    }

    fn pendulum_well() -> LogActionWell {
        let m = ModelSpec::new(ModelKind::Pendulum1d, 1.0, 1.0).unwrap();
        let table = build_action_table(&m, &canonical_pendulum_grid()).unwrap();
        let w = WFunction::new(&table, 1.0, 1).unwrap();
        let a0 = w.minimizers()[0];
        LogActionWell::new(w, a0).unwrap()
    }

    /// Dense synthetic table whose k is c·ln(a/a0), making U exactly
    /// quadratic: U(σ) = c·σ²/2. The kinetic-moment column is shifted so it
    /// stays positive; the shift cancels through N/β = 2.
    fn quadratic_well(c: f64, a0: f64) -> LogActionWell {
        let n = 4000;
        let entries: Vec<ActionEntry> = (0..n)
            .map(|i| {
                let a = a0 * (-1.5 + 3.0 * i as f64 / (n - 1) as f64).exp();
                ActionEntry {
                    h: a,
                    action: a,
                    k0: c * (a / a0).ln() + 2.0,
                    period: 1.0,
                    components: 1,
                }
            })
            .collect();
        let table = ActionTable::from_entries(entries).unwrap();
        let w = WFunction::new(&table, 0.5, 1).unwrap();
        LogActionWell::new(w, a0).unwrap()
    }

    #[test]
    fn rhs_fixed_point_at_minimizer() {
        let well = pendulum_well();
        let (ds, da) = averaged_rhs_1d(
            &AveragedState1D {
                sigma: 0.0,
                alpha: 0.0,
            },
            &well,
        )
        .unwrap();
        assert_eq!(ds, 0.0);
        assert!(da.abs() < 1e-9, "U'(0) = {da}");
    }

    #[test]
    fn rhs_conserves_g_along_field() {
        let well = pendulum_well();
        let s = AveragedState1D {
            sigma: 0.21,
            alpha: -0.13,
        };
        let (ds, da) = averaged_rhs_1d(&s, &well).unwrap();
        // Centered difference of G along the field direction.
        let d = 1e-6;
        let gp = well
            .g(&AveragedState1D {
                sigma: s.sigma + d * ds,
                alpha: s.alpha + d * da,
            })
            .unwrap();
        let gm = well
            .g(&AveragedState1D {
                sigma: s.sigma - d * ds,
                alpha: s.alpha - d * da,
            })
            .unwrap();
        assert!(
            ((gp - gm) / (2.0 * d)).abs() < 1e-10,
            "dG/dt = {}",
            (gp - gm) / (2.0 * d)
        );
    }

    #[test]
    fn rhs_in_action_form_scales_with_action() {
        // σ̇ = −α means ȧ = −α·a for a = a0·e^σ.
        let well = pendulum_well();
        let s = AveragedState1D {
            sigma: 0.4,
            alpha: 0.25,
        };
        let (ds, _) = averaged_rhs_1d(&s, &well).unwrap();
        let a = well.action_of_sigma(s.sigma);
        assert_abs_diff_eq!(a * ds, -s.alpha * a, epsilon = 1e-14);
    }

    #[test]
    fn rhs_2d_alpha_zero_freezes_l_and_h() {
        let k0app = PiecewiseLinear::new(vec![0.0, 4.0], vec![1.5, 3.0]).unwrap();
        let s = AveragedState2D {
            l: 0.75,
            h: 2.0,
            alpha: 0.0,
        };
        let (dl, dh, dalpha) = averaged_rhs_2d(&s, &k0app, 1.0).unwrap();
        assert_eq!((dl, dh), (0.0, 0.0));
        assert_abs_diff_eq!(dalpha, k0app.eval(2.0).unwrap() - 2.0, epsilon = 1e-15);
    }

    #[test]
    fn rhs_2d_conserves_e_and_sign_of_l() {
        let k0app = PiecewiseLinear::new(
            vec![0.0, 1.0, 2.0, 3.0, 4.0, 6.0],
            vec![1.2, 1.9, 2.5, 3.0, 3.4, 4.1],
        )
        .unwrap();
        let beta = 1.0;
        let field = |y: &[f64; 3]| -> crate::error::Result<[f64; 3]> {
            let (dl, dh, da) = averaged_rhs_2d(
                &AveragedState2D {
                    l: y[0],
                    h: y[1],
                    alpha: y[2],
                },
                &k0app,
                beta,
            )?;
            Ok([dl, dh, da])
        };
        let mut y = [-0.75, 2.5625, 0.0];
        let e0 = crate::invariants::averaged_e(y[0], y[1], y[2], beta).unwrap();
        let dt = 1e-4;
        let mut max_drift: f64 = 0.0;
        for _ in 0..1_000_000 {
            y = rk4_step(field, &y, dt).unwrap();
            assert!(y[0] < 0.0, "L changed sign");
            let e = crate::invariants::averaged_e(y[0], y[1], y[2], beta).unwrap();
            max_drift = max_drift.max((e - e0).abs());
        }
        assert!(max_drift < 1e-6, "E drift {max_drift}");
    }

    #[test]
    fn first_integrals_collapse_and_conserve() {
        // N = 1: the ray integral reproduces W up to its anchor constant.
        let well = pendulum_well();
        let k1 = |a: &[f64]| well.w().k(a[0]).unwrap_or(f64::NAN);
        let a_hi = 9.0;
        let a_lo = 7.0;
        let g_hi = averaged_first_integrals(&[a_hi], 0.0, k1).unwrap()[0];
        let g_lo = averaged_first_integrals(&[a_lo], 0.0, k1).unwrap()[0];
        let w_diff = well.w().eval(a_hi).unwrap() - well.w().eval(a_lo).unwrap();
        assert_abs_diff_eq!(g_hi - g_lo, w_diff, epsilon = 5e-6);

        // N = 2 with a synthetic smooth k: ratios stay exactly constant and
        // G_N is conserved along ȧ = −α·a, α̇ = k(a).
        let k2 = |a: &[f64]| 0.7 * (a[1].abs()).ln() + 0.3 * a[0] / a[1] - 0.9;
        let field = |y: &[f64; 3]| -> crate::error::Result<[f64; 3]> {
            Ok([
                -y[2] * y[0],
                -y[2] * y[1],
                k2(&[y[0], y[1]]),
            ])
        };
        let mut y = [1.1, 2.3, 0.05];
        let g0 = averaged_first_integrals(&[y[0], y[1]], y[2], k2).unwrap();
        let dt = 1e-3;
        let mut max_ratio_drift: f64 = 0.0;
        let mut max_gn_drift: f64 = 0.0;
        for _ in 0..20_000 {
            y = rk4_step(field, &y, dt).unwrap();
            let g = averaged_first_integrals(&[y[0], y[1]], y[2], k2).unwrap();
            max_ratio_drift = max_ratio_drift.max((g[0] - g0[0]).abs());
            max_gn_drift = max_gn_drift.max((g[1] - g0[1]).abs());
        }
        assert!(max_ratio_drift < 1e-12, "ratio drift {max_ratio_drift}");
        assert!(max_gn_drift < 1e-6, "G_N drift {max_gn_drift}");
    }

    #[test]
    fn first_integrals_reject_zero_last_action() {
        assert!(averaged_first_integrals(&[1.0, 0.0], 0.1, |_| 0.0).is_err());
    }

    #[test]
    fn harmonic_small_oscillation_period() {
        // U''(0) = a0·k'(a0) = 1/β, so the period tends to 2π√β.
        for beta in [1.0, 0.25] {
            let well = harmonic_well(beta);
            let t1 = period_t1(well.g0() + 1e-6, &well).unwrap();
            let expected = 2.0 * PI * beta.sqrt();
            assert!(
                (t1 / expected - 1.0).abs() < 0.01,
                "beta = {beta}: T1 = {t1}, expected ~{expected}"
            );
        }
    }

    #[test]
    fn period_quadrature_node_doubling_converged() {
        let well = pendulum_well();
        let (lo, hi) = (well.g0() + 1e-3, well.barrier() - 1e-4);
        for frac in [0.0, 0.3, 0.6, 0.9, 1.0] {
            let g = lo + (hi - lo) * frac;
            let a = period_t1_with_nodes(g, &well, 64).unwrap();
            let b = period_t1_with_nodes(g, &well, 128).unwrap();
            assert!(
                (a - b).abs() < 1e-8 * a,
                "node doubling moved T1 at g = {g}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn period_quadrature_matches_first_return() {
        let well = pendulum_well();
        let (lo, hi) = (well.g0() + 1e-3, well.barrier() - 1e-4);
        for frac in [0.0, 0.5, 1.0] {
            let g = lo + (hi - lo) * frac;
            let quad = period_t1(g, &well).unwrap();
            let ret = period_t1_first_return(g, &well).unwrap();
            assert!(
                (quad / ret - 1.0).abs() < 1e-3,
                "at g = {g}: quadrature {quad} vs return {ret}"
            );
        }
    }

    #[test]
    fn period_rejects_levels_outside_window() {
        let well = pendulum_well();
        assert!(period_t1(well.g0() - 0.01, &well).is_err());
        assert!(period_t1(well.barrier() + 0.01, &well).is_err());
    }

    #[test]
    fn isochrony_residual_vanishes_for_quadratic_well() {
        let well = quadratic_well(0.8, 5.0);
        let t_expected = 2.0 * PI / 0.8_f64.sqrt();
        for g in [well.g0() + 0.01, well.g0() + 0.05, well.g0() + 0.2] {
            let (width, residual) = well_width_and_isochrony(g, &well).unwrap();
            assert!(width > 0.0);
            assert!(
                residual.abs() < 1e-4,
                "quadratic residual {residual} at g = {g}"
            );
            let t1 = period_t1(g, &well).unwrap();
            assert!((t1 / t_expected - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn pendulum_residual_bounded_away_from_zero() {
        // Anharmonicity vanishes quadratically at the well bottom, so the
        // residual is small at the lowest node but must stay nonzero
        // everywhere and grow well clear of quadrature noise.
        let well = pendulum_well();
        let grid = period_grid(&well, 20).unwrap();
        let mut max_residual: f64 = 0.0;
        for (g, _) in grid {
            let (_, residual) = well_width_and_isochrony(g, &well).unwrap();
            assert!(
                residual.abs() > 1e-6,
                "residual suspiciously small at g = {g}: {residual}"
            );
            max_residual = max_residual.max(residual.abs());
        }
        assert!(max_residual > 0.01, "max residual {max_residual}");
    }

    #[test]
    fn width_shrinks_to_zero_at_the_bottom() {
        let well = pendulum_well();
        let (w1, _) = well_width_and_isochrony(well.g0() + 1e-3, &well).unwrap();
        let (w2, _) = well_width_and_isochrony(well.g0() + 1e-5, &well).unwrap();
        assert!(w2 < w1 && w2 < 0.05, "widths {w1}, {w2}");
    }

    #[test]
    fn symplectic_euler_respects_averaged_well() {
        // No secular growth of G over a long symplectic-Euler run in the
        // pendulum well.
        let well = pendulum_well();
        let mut sigma = 0.3;
        let mut alpha = 0.0;
        let g0 = well
            .g(&AveragedState1D { sigma, alpha })
            .unwrap();
        let dt = 1e-2;
        let mut max_dev: f64 = 0.0;
        for _ in 0..100_000 {
            let (s, a) =
                symplectic_euler_step(|x| well.u_prime(x), sigma, alpha, dt).unwrap();
            sigma = s;
            alpha = a;
            let g = well.g(&AveragedState1D { sigma, alpha }).unwrap();
            max_dev = max_dev.max((g - g0).abs());
        }
        assert!(max_dev < 5e-3, "G deviation {max_dev}");
    }
}
