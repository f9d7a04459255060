//! Fixed-step time integration.
//!
//! The thermostatted flow is advanced by a symmetric splitting
//! T(dt/2) ∘ K(dt/2) ∘ D(dt) ∘ K(dt/2) ∘ T(dt/2) with
//!
//! - D(h): q ← q + h·p (free drift)
//! - K(h): p ← p − h·∇V(q) (potential kick)
//! - T(h): half-kick ξ, exact exponential damping of p, half-kick ξ
//!
//! Each substep is reversible and the palindromic composition makes the
//! scheme second order and time-reversible. Constant-energy runs use
//! kick-drift-kick velocity Verlet, and the averaged slow system uses
//! symplectic Euler.

use crate::error::{NhError, Result};
use crate::models::{ModelSpec, PhaseState, ThermostatState};

/// Fixed-step loop parameters.
#[derive(Debug, Clone, Copy)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_final: f64,
    pub sample_stride: usize,
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_final: f64, sample_stride: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(NhError::InvalidParameter(format!(
                "dt must be positive and finite, got {dt}"
            )));
        }
        if !(t_final >= dt) || !t_final.is_finite() {
            return Err(NhError::InvalidParameter(format!(
                "t_final must be at least dt, got {t_final}"
            )));
        }
        if sample_stride == 0 {
            return Err(NhError::InvalidParameter(
                "sample_stride must be at least 1".into(),
            ));
        }
        Ok(IntegratorConfig {
            dt,
            t_final,
            sample_stride,
        })
    }

    pub fn steps(&self) -> u64 {
        (self.t_final / self.dt).round().max(1.0) as u64
    }
}

/// Uniformly sampled states along one integration.
#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
}

impl<S> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &S)> {
        self.times.iter().cloned().zip(self.states.iter())
    }
}

fn thermostat_half(model: &ModelSpec, p: &mut [f64; 2], xi: &mut f64, h: f64) {
    let target = model.target_kinetic();
    *xi += 0.5 * h * (p[0] * p[0] + p[1] * p[1] - target);
    let scale = (-(*xi / model.thermostat_mass) * h).exp();
    p[0] *= scale;
    p[1] *= scale;
    *xi += 0.5 * h * (p[0] * p[0] + p[1] * p[1] - target);
}

fn kick(model: &ModelSpec, q: &[f64; 2], p: &mut [f64; 2], h: f64) {
    let grad = model.grad_potential(q);
    p[0] -= h * grad[0];
    p[1] -= h * grad[1];
}

/// One step of the thermostatted splitting scheme.
pub fn nh_step(model: &ModelSpec, s: &ThermostatState, dt: f64) -> ThermostatState {
    let mut q = s.phase.q;
    let mut p = s.phase.p;
    let mut xi = s.xi;
    let h = 0.5 * dt;

    thermostat_half(model, &mut p, &mut xi, h);
    kick(model, &q, &mut p, h);
    q[0] += dt * p[0];
    q[1] += dt * p[1];
    kick(model, &q, &mut p, h);
    thermostat_half(model, &mut p, &mut xi, h);

    ThermostatState {
        phase: PhaseState { q, p },
        xi,
    }
}

/// One kick-drift-kick leapfrog step of the plain Hamiltonian flow.
pub fn verlet_step(model: &ModelSpec, s: &PhaseState, dt: f64) -> PhaseState {
    let mut q = s.q;
    let mut p = s.p;
    kick(model, &q, &mut p, 0.5 * dt);
    q[0] += dt * p[0];
    q[1] += dt * p[1];
    kick(model, &q, &mut p, 0.5 * dt);
    PhaseState { q, p }
}

/// Symplectic Euler step for the averaged slow system
/// σ̇ = −α, α̇ = U′(σ): the momentum-like variable α updates first and the
/// new value feeds the σ update.
pub fn symplectic_euler_step(
    u_prime: impl Fn(f64) -> Result<f64>,
    sigma: f64,
    alpha: f64,
    dt: f64,
) -> Result<(f64, f64)> {
    let alpha_new = alpha + dt * u_prime(sigma)?;
    Ok((sigma - dt * alpha_new, alpha_new))
}

/// Classical RK4 step for a small autonomous system, used for conservation
/// cross-checks on the averaged fields.
pub fn rk4_step<const N: usize>(
    f: impl Fn(&[f64; N]) -> Result<[f64; N]>,
    y: &[f64; N],
    dt: f64,
) -> Result<[f64; N]> {
    let add = |a: &[f64; N], b: &[f64; N], c: f64| {
        let mut out = *a;
        for i in 0..N {
            out[i] += c * b[i];
        }
        out
    };
    let k1 = f(y)?;
    let k2 = f(&add(y, &k1, 0.5 * dt))?;
    let k3 = f(&add(y, &k2, 0.5 * dt))?;
    let k4 = f(&add(y, &k3, dt))?;
    let mut out = *y;
    for i in 0..N {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

/// A fixed-step one-step map over some state type.
pub trait Stepper {
    type State: Clone;

    fn step(&self, s: &Self::State, dt: f64) -> Self::State;
    fn state_finite(s: &Self::State) -> bool;
}

/// Thermostatted dynamics stepper.
pub struct NoseHoover<'a> {
    pub model: &'a ModelSpec,
}

impl Stepper for NoseHoover<'_> {
    type State = ThermostatState;

    fn step(&self, s: &ThermostatState, dt: f64) -> ThermostatState {
        nh_step(self.model, s, dt)
    }

    fn state_finite(s: &ThermostatState) -> bool {
        s.is_finite()
    }
}

/// Constant-energy stepper.
pub struct VelocityVerlet<'a> {
    pub model: &'a ModelSpec,
}

impl Stepper for VelocityVerlet<'_> {
    type State = PhaseState;

    fn step(&self, s: &PhaseState, dt: f64) -> PhaseState {
        verlet_step(self.model, s, dt)
    }

    fn state_finite(s: &PhaseState) -> bool {
        s.is_finite()
    }
}

/// Fixed-step integration loop. The observer is invoked at every step
/// (including the initial state); the returned trajectory keeps every
/// `sample_stride`-th state. A non-finite state aborts with the failure
/// time rather than clamping.
pub fn integrate<St: Stepper>(
    stepper: &St,
    init: St::State,
    cfg: &IntegratorConfig,
    mut observer: impl FnMut(f64, &St::State),
) -> Result<Trajectory<St::State>> {
    let steps = cfg.steps();
    let mut times = Vec::with_capacity(steps as usize / cfg.sample_stride + 2);
    let mut states = Vec::with_capacity(steps as usize / cfg.sample_stride + 2);

    let mut state = init;
    observer(0.0, &state);
    times.push(0.0);
    states.push(state.clone());

    for k in 1..=steps {
        state = stepper.step(&state, cfg.dt);
        let t = k as f64 * cfg.dt;
        if !St::state_finite(&state) {
            return Err(NhError::Diverged { t });
        }
        observer(t, &state);
        if k % cfg.sample_stride as u64 == 0 {
            times.push(t);
            states.push(state.clone());
        }
    }
    Ok(Trajectory { times, states })
}
