//! Poincaré return map of the thermostatted pendulum flow on the angle
//! section, realized as q ≡ 0 (mod 2π) with positive orientation q̇ > 0.
//!
//! Crossings are detected through the surrogate sin(q/2), which vanishes
//! exactly on the section for unreduced q, and refined by bisection on a
//! cubic Hermite interpolant of the step — the main trajectory is never
//! re-stepped. Each emitted crossing carries the time, the action assigned
//! to the energy at the crossing, the rescaled thermostat momentum
//! α = ξ/√Q, and the refined state itself.

use crate::actionlib::action_1d;
use crate::averaged::LogActionWell;
use crate::error::{NhError, Result};
use crate::integrators::{nh_step, verlet_step};
use crate::models::{ModelKind, ModelSpec, ThermostatState};

/// One section sample.
#[derive(Debug, Clone, Copy)]
pub struct SectionCrossing {
    pub t: f64,
    pub a: f64,
    pub alpha: f64,
    pub h: f64,
    pub state: ThermostatState,
}

/// Section-map parameters.
#[derive(Debug, Clone, Copy)]
pub struct PoincareConfig {
    pub n_crossings: usize,
    pub dt: f64,
    /// Abort when no crossing is emitted for this many steps.
    pub max_steps_between: u64,
    /// When false, the thermostat substep is skipped entirely (ξ frozen,
    /// no damping): a constant-energy diagnostic mode.
    pub thermostat_coupled: bool,
    /// Crossings whose energy leaves this window abort the run (the orbit
    /// has left the validated table range).
    pub h_limits: Option<(f64, f64)>,
}

impl Default for PoincareConfig {
    fn default() -> Self {
        PoincareConfig {
            n_crossings: 2000,
            dt: 1e-3,
            max_steps_between: 1_000_000,
            thermostat_coupled: true,
            h_limits: None,
        }
    }
}

/// The crossings plus diagnostics about discarded events.
#[derive(Debug, Clone)]
pub struct PoincareRun {
    pub crossings: Vec<SectionCrossing>,
    /// Crossings rejected because the energy fell inside the excluded
    /// separatrix band, where no action can be assigned.
    pub rejected_separatrix: usize,
}

fn wrap_to_pi(q: f64) -> f64 {
    q - 2.0 * std::f64::consts::PI * (q / (2.0 * std::f64::consts::PI)).round()
}

fn section_surrogate(q: f64) -> f64 {
    (0.5 * q).sin()
}

/// Cubic Hermite value at fraction s of a step of length dt.
fn hermite(x0: f64, v0: f64, x1: f64, v1: f64, dt: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * x0
        + (s3 - 2.0 * s2 + s) * dt * v0
        + (-2.0 * s3 + 3.0 * s2) * x1
        + (s3 - s2) * dt * v1
}

fn interpolate_state(
    model: &ModelSpec,
    coupled: bool,
    s0: &ThermostatState,
    s1: &ThermostatState,
    dt: f64,
    frac: f64,
) -> ThermostatState {
    let deriv = |s: &ThermostatState| -> ThermostatState {
        if coupled {
            model.nh_vector_field(s)
        } else {
            let grad = model.grad_potential(&s.phase.q);
            ThermostatState::new_2d(s.phase.p, [-grad[0], -grad[1]], 0.0)
        }
    };
    let d0 = deriv(s0);
    let d1 = deriv(s1);
    let comp = |x0, v0, x1, v1| hermite(x0, v0, x1, v1, dt, frac);
    ThermostatState::new_2d(
        [
            comp(s0.phase.q[0], d0.phase.q[0], s1.phase.q[0], d1.phase.q[0]),
            comp(s0.phase.q[1], d0.phase.q[1], s1.phase.q[1], d1.phase.q[1]),
        ],
        [
            comp(s0.phase.p[0], d0.phase.p[0], s1.phase.p[0], d1.phase.p[0]),
            comp(s0.phase.p[1], d0.phase.p[1], s1.phase.p[1], d1.phase.p[1]),
        ],
        comp(s0.xi, d0.xi, s1.xi, d1.xi),
    )
}

/// Refine the crossing inside [t, t+dt] to |q mod 2π| < 1e-9 by bisection on
/// the interpolated surrogate; returns the step fraction.
fn refine_crossing(
    model: &ModelSpec,
    coupled: bool,
    s0: &ThermostatState,
    s1: &ThermostatState,
    dt: f64,
) -> f64 {
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut glo = section_surrogate(s0.phase.q[0]);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let q_mid = interpolate_state(model, coupled, s0, s1, dt, mid).phase.q[0];
        if wrap_to_pi(q_mid).abs() < 1e-9 {
            return mid;
        }
        let gm = section_surrogate(q_mid);
        if gm == 0.0 {
            return mid;
        }
        if gm.signum() == glo.signum() {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Collect `n_crossings` positively oriented section crossings of the
/// thermostatted pendulum flow started at `init`.
pub fn poincare_map(
    model: &ModelSpec,
    init: &ThermostatState,
    cfg: &PoincareConfig,
) -> Result<PoincareRun> {
    if model.kind != ModelKind::Pendulum1d {
        return Err(NhError::InvalidParameter(
            "the angle section is defined for the pendulum model".into(),
        ));
    }
    if !(cfg.dt > 0.0) || cfg.n_crossings == 0 {
        return Err(NhError::InvalidParameter(
            "section map needs a positive step and at least one crossing".into(),
        ));
    }
    let mut crossings = Vec::with_capacity(cfg.n_crossings);
    let mut rejected = 0usize;
    let mut state = *init;
    let mut g_prev = section_surrogate(state.phase.q[0]);
    let mut t = 0.0;
    let mut steps_since_emit = 0u64;

    while crossings.len() < cfg.n_crossings {
        let next = if cfg.thermostat_coupled {
            nh_step(model, &state, cfg.dt)
        } else {
            ThermostatState {
                phase: verlet_step(model, &state.phase, cfg.dt),
                xi: state.xi,
            }
        };
        if !next.is_finite() {
            return Err(NhError::Diverged { t: t + cfg.dt });
        }
        let g_next = section_surrogate(next.phase.q[0]);
        let crossed = (g_prev != 0.0 && g_prev.signum() != g_next.signum()) || g_next == 0.0;
        if crossed {
            let frac = if g_next == 0.0 {
                1.0
            } else {
                refine_crossing(model, cfg.thermostat_coupled, &state, &next, cfg.dt)
            };
            let at = interpolate_state(model, cfg.thermostat_coupled, &state, &next, cfg.dt, frac);
            // Positive orientation only.
            if at.phase.p[0] > 0.0 {
                let h = model.hamiltonian(&at.phase);
                if let Some((lo, hi)) = cfg.h_limits {
                    if h < lo || h > hi {
                        return Err(NhError::EnergyOutOfRange { h, lo, hi });
                    }
                }
                match action_1d(model, h) {
                    Ok(a) => {
                        crossings.push(SectionCrossing {
                            t: t + frac * cfg.dt,
                            a,
                            alpha: at.xi / model.thermostat_mass.sqrt(),
                            h,
                            state: at,
                        });
                        steps_since_emit = 0;
                    }
                    Err(NhError::SeparatrixBand { .. }) => rejected += 1,
                    Err(e) => return Err(e),
                }
            }
        }
        state = next;
        g_prev = g_next;
        t += cfg.dt;
        steps_since_emit += 1;
        if steps_since_emit > cfg.max_steps_between {
            return Err(NhError::SectionStall {
                max_steps: cfg.max_steps_between,
            });
        }
    }
    Ok(PoincareRun {
        crossings,
        rejected_separatrix: rejected,
    })
}

/// Tube-thickness measure around the initial averaged level curve: the
/// maximum over crossings of |G(a, α) − G(a_init, α_init)| normalized by
/// the height of the confining well.
pub fn match_to_averaged(
    crossings: &[SectionCrossing],
    init_action: f64,
    init_alpha: f64,
    well: &LogActionWell,
) -> Result<f64> {
    if crossings.is_empty() {
        return Err(NhError::InvalidParameter(
            "no crossings to compare against the averaged flow".into(),
        ));
    }
    let g_of = |a: f64, alpha: f64| -> Result<f64> {
        Ok(0.5 * alpha * alpha + well.u((a / well.a0()).ln())?)
    };
    let g_ref = g_of(init_action, init_alpha)?;
    let window = well.barrier() - well.g0();
    let mut max_dev: f64 = 0.0;
    for c in crossings {
        max_dev = max_dev.max((g_of(c.a, c.alpha)? - g_ref).abs());
    }
    Ok(max_dev / window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actionlib::{build_action_table, canonical_pendulum_grid, WFunction};
    use crate::averaged::AveragedState1D;
    use crate::integrators::rk4_step;
    use crate::models::PhaseState;

    fn pendulum(q_mass: f64) -> ModelSpec {
        ModelSpec::new(ModelKind::Pendulum1d, 1.0, q_mass).unwrap()
    }

    fn pendulum_well() -> LogActionWell {
        let table = build_action_table(&pendulum(1.0), &canonical_pendulum_grid()).unwrap();
        let w = WFunction::new(&table, 1.0, 1).unwrap();
        let a0 = w.minimizers()[0];
        LogActionWell::new(w, a0).unwrap()
    }

    #[test]
    fn requires_pendulum_model() {
        let m = ModelSpec::new(ModelKind::Harmonic1d, 1.0, 1.0).unwrap();
        let init = ThermostatState::new_1d(0.0, 1.0, 0.0);
        assert!(poincare_map(&m, &init, &PoincareConfig::default()).is_err());
    }

    #[test]
    fn uncoupled_mode_keeps_action_constant() {
        let m = pendulum(1.0);
        let init = ThermostatState::new_1d(0.0, 1.5, 0.0);
        let cfg = PoincareConfig {
            n_crossings: 50,
            thermostat_coupled: false,
            ..Default::default()
        };
        let run = poincare_map(&m, &init, &cfg).unwrap();
        assert_eq!(run.crossings.len(), 50);
        let a0 = run.crossings[0].a;
        for c in &run.crossings {
            assert!((c.a - a0).abs() < 1e-6, "action wandered: {} vs {a0}", c.a);
            assert_eq!(c.alpha, 0.0);
        }
    }

    #[test]
    fn crossing_structure_invariants() {
        let m = pendulum(1.0);
        let init = ThermostatState::new_1d(0.0, 1.5, 0.0);
        let cfg = PoincareConfig {
            n_crossings: 120,
            ..Default::default()
        };
        let run = poincare_map(&m, &init, &cfg).unwrap();
        let mut t_prev = -1.0;
        for c in &run.crossings {
            assert!(c.t > t_prev + cfg.dt * 0.5, "crossings not separated");
            t_prev = c.t;
            assert!(
                wrap_to_pi(c.state.phase.q[0]).abs() < 1e-9,
                "refinement missed the section: {}",
                wrap_to_pi(c.state.phase.q[0])
            );
            assert!(c.state.phase.p[0] > 0.0, "orientation violated");
            let h_again = m.hamiltonian(&c.state.phase);
            assert!((c.h - h_again).abs() < 1e-12);
            assert_eq!(c.alpha, c.state.xi / m.thermostat_mass.sqrt());
        }
    }

    #[test]
    fn per_return_action_change_scales_with_coupling() {
        // At Q = 1e5 the per-return change of the action is O(1/sqrt(Q)).
        let q_mass = 1e5;
        let m = pendulum(q_mass);
        let init = ThermostatState::new_1d(0.0, 1.5, 0.0);
        let cfg = PoincareConfig {
            n_crossings: 60,
            ..Default::default()
        };
        let run = poincare_map(&m, &init, &cfg).unwrap();
        let eps = 1.0 / q_mass.sqrt();
        let mut max_jump: f64 = 0.0;
        for w in run.crossings.windows(2) {
            max_jump = max_jump.max((w[1].a - w[0].a).abs());
        }
        // Regression constant frozen from this configuration.
        assert!(
            max_jump < 10.0 * eps,
            "per-return action jump {max_jump} vs eps {eps}"
        );
        assert!(max_jump > 0.0, "thermostat had no effect at all");
    }

    #[test]
    fn averaged_flow_scores_zero_tube_thickness() {
        // Feed samples of the averaged flow itself through the measure.
        let well = pendulum_well();
        let a_init = 9.0;
        let field = |y: &[f64; 2]| -> Result<[f64; 2]> { Ok([-y[1], well.u_prime(y[0])?]) };
        let mut y = [(a_init / well.a0()).ln(), 0.0];
        let mut fake = Vec::new();
        for i in 0..4000 {
            y = rk4_step(field, &y, 2e-3).unwrap();
            if i % 40 == 0 {
                fake.push(SectionCrossing {
                    t: i as f64,
                    a: well.a0() * y[0].exp(),
                    alpha: y[1],
                    h: 0.0,
                    state: ThermostatState {
                        phase: PhaseState::new_1d(0.0, 0.0),
                        xi: 0.0,
                    },
                });
            }
        }
        let thickness = match_to_averaged(&fake, a_init, 0.0, &well).unwrap();
        assert!(thickness < 1e-7, "averaged flow thickness {thickness}");
        // Consistency of the conserved value along the sampled orbit.
        let g_start = well
            .g(&AveragedState1D {
                sigma: (a_init / well.a0()).ln(),
                alpha: 0.0,
            })
            .unwrap();
        let g_end = well
            .g(&AveragedState1D {
                sigma: y[0],
                alpha: y[1],
            })
            .unwrap();
        assert!((g_end - g_start).abs() < 1e-8);
    }

    #[test]
    fn empty_crossing_set_is_an_error() {
        let well = pendulum_well();
        assert!(match_to_averaged(&[], 9.0, 0.0, &well).is_err());
    }
}
