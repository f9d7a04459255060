//! Numerical action-angle machinery: level-set actions, orbit periods,
//! time-averaged kinetic moments, the averaged thermostat force k, its
//! log-potential W, and the kinetic-moment interpolant with its τ change of
//! variable.
//!
//! Conventions. Angles have period 1, so the action assigned to a level set
//! is the full loop integral ∮p dq summed over every connected component of
//! the level set on the reduced configuration space. For the pendulum this
//! counts both rotation branches above the separatrix, which makes a(h)
//! continuous through h = 1 (value 16 on both sides). For the planar
//! central-force model the one-dimensional routines describe the motion on
//! the invariant set L = 0, i.e. the even oscillator V(x) = x² + x⁴ on the
//! line through the origin.

use rayon::prelude::*;

use crate::error::{NhError, Result};
use crate::integrators::verlet_step;
use crate::interp::PiecewiseLinear;
use crate::models::{ModelKind, ModelSpec, PhaseState};
use crate::quadrature::{
    bisect_root, integrate_2048, integrate_256, turning_point_integral,
};

/// Half-width of the excluded energy band around the pendulum separatrix.
/// Quadrature and time-averaging are ill-conditioned where the period
/// diverges; the band is kept narrow enough that both solutions of
/// k₀(a) = β⁻¹ adjacent to the separatrix stay inside the table.
pub const SEPARATRIX_HALF_WIDTH: f64 = 0.005;

/// Default integration step for kinetic-moment time averages.
pub const K0_AVERAGE_DT: f64 = 1e-3;

/// Default horizon for kinetic-moment time averages.
pub const K0_AVERAGE_HORIZON: f64 = 1e4;

/// Agreement tolerance between the half- and full-horizon averages.
pub const K0_CONVERGENCE_TOL: f64 = 1e-3;

fn sqrt_pos(x: f64) -> f64 {
    x.max(0.0).sqrt()
}

fn near_separatrix(model: &ModelSpec, h: f64) -> bool {
    model.kind == ModelKind::Pendulum1d && (h - 1.0).abs() < 0.05
}

fn check_energy_1d(model: &ModelSpec, h: f64) -> Result<()> {
    let lo = model.energy_min();
    if !(h > lo) || !h.is_finite() {
        return Err(NhError::EnergyOutOfRange {
            h,
            lo,
            hi: f64::INFINITY,
        });
    }
    if model.kind == ModelKind::Pendulum1d && (h - 1.0).abs() < SEPARATRIX_HALF_WIDTH {
        return Err(NhError::SeparatrixBand {
            h,
            half_width: SEPARATRIX_HALF_WIDTH,
        });
    }
    Ok(())
}

/// Positive turning point of the symmetric 1D oscillation at energy h.
fn oscillation_turning_point(model: &ModelSpec, h: f64) -> f64 {
    match model.kind {
        ModelKind::Harmonic1d => (2.0 * h).sqrt(),
        ModelKind::Pendulum1d => (-h).clamp(-1.0, 1.0).acos(),
        ModelKind::CentralForce2d => {
            // x² + x⁴ = h solved through u = x².
            let u = 0.5 * ((1.0 + 4.0 * h).sqrt() - 1.0);
            u.max(0.0).sqrt()
        }
    }
}

fn is_rotation(model: &ModelSpec, h: f64) -> bool {
    model.kind == ModelKind::Pendulum1d && h > 1.0
}

/// Canonical energy grid for the pendulum tables: coarse over the
/// oscillation range, refined on both approaches to the separatrix (kept
/// just outside the excluded band), and coarse again over rotation up to
/// h = 2 where the action reaches ≈ 25.
pub fn canonical_pendulum_grid() -> Vec<f64> {
    fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
        (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
    }
    let mut g: Vec<f64> = linspace(-0.95, 0.90, 38).collect();
    g.extend(linspace(0.9055, 0.9945, 19));
    g.extend(linspace(1.0055, 1.0945, 19));
    g.extend(linspace(1.10, 2.00, 19));
    g
}

fn action_1d_raw(model: &ModelSpec, h: f64) -> f64 {
    if is_rotation(model, h) {
        // Two rotation branches, each contributing the full circuit of the
        // reduced configuration circle.
        let f = |q: f64| sqrt_pos(2.0 * (h + q.cos()));
        let one = if near_separatrix(model, h) {
            integrate_2048(0.0, 2.0 * std::f64::consts::PI, f)
        } else {
            integrate_256(0.0, 2.0 * std::f64::consts::PI, f)
        };
        2.0 * one
    } else {
        let qt = oscillation_turning_point(model, h);
        let f = |q: f64| sqrt_pos(2.0 * (h - model.potential(&[q, 0.0])));
        2.0 * turning_point_integral(-qt, qt, f)
    }
}

/// Loop action a(h) = ∮ p dq over all connected components of the level set.
pub fn action_1d(model: &ModelSpec, h: f64) -> Result<f64> {
    check_energy_1d(model, h)?;
    Ok(action_1d_raw(model, h))
}

/// Period of one closed component of the 1D level set, or of the reduced
/// radial orbit when an angular momentum is supplied. Pendulum rotation uses
/// a single branch.
pub fn orbit_period(model: &ModelSpec, h: f64, l: Option<f64>) -> Result<f64> {
    if let Some(l) = l {
        return radial_period(model, h, l);
    }
    check_energy_1d(model, h)?;
    if is_rotation(model, h) {
        let f = |q: f64| 1.0 / sqrt_pos(2.0 * (h + q.cos())).max(1e-300);
        Ok(if near_separatrix(model, h) {
            integrate_2048(0.0, 2.0 * std::f64::consts::PI, f)
        } else {
            integrate_256(0.0, 2.0 * std::f64::consts::PI, f)
        })
    } else {
        let qt = oscillation_turning_point(model, h);
        let f = |q: f64| 1.0 / sqrt_pos(2.0 * (h - model.potential(&[q, 0.0]))).max(1e-300);
        Ok(2.0 * turning_point_integral(-qt, qt, f))
    }
}

/// Effective radial potential L²/(2r²) + V(r).
fn radial_effective(model: &ModelSpec, l: f64, r: f64) -> f64 {
    0.5 * l * l / (r * r) + model.radial_potential(r)
}

fn radial_effective_slope(model: &ModelSpec, l: f64, r: f64) -> f64 {
    -l * l / (r * r * r) + model.grad_potential(&[r, 0.0])[0]
}

/// Radius of the circular orbit at angular momentum l ≠ 0.
pub fn circular_radius(model: &ModelSpec, l: f64) -> Result<f64> {
    if l == 0.0 {
        return Err(NhError::ZeroAngularMomentum);
    }
    let mut hi = 1.0;
    let mut iter = 0;
    while radial_effective_slope(model, l, hi) < 0.0 {
        hi *= 2.0;
        iter += 1;
        if iter > 200 {
            return Err(NhError::NoClosedOrbit { h: f64::NAN, l });
        }
    }
    let mut lo = hi;
    iter = 0;
    while radial_effective_slope(model, l, lo) > 0.0 {
        lo *= 0.5;
        iter += 1;
        if iter > 600 {
            return Err(NhError::NoClosedOrbit { h: f64::NAN, l });
        }
    }
    bisect_root(lo, hi, 1e-14 * hi.max(1.0), |r| {
        radial_effective_slope(model, l, r)
    })
}

/// Energy of the circular orbit at angular momentum l, the minimum of the
/// reduced radial Hamiltonian.
pub fn circular_energy(model: &ModelSpec, l: f64) -> Result<f64> {
    let r = circular_radius(model, l)?;
    Ok(radial_effective(model, l, r))
}

fn degenerate_radial(h: f64, e_circ: f64) -> bool {
    h - e_circ <= 1e-12 * e_circ.abs().max(1.0)
}

/// Inner and outer turning radii of the reduced orbit at (h, l).
pub fn radial_turning_points(model: &ModelSpec, h: f64, l: f64) -> Result<(f64, f64)> {
    let r_circ = circular_radius(model, l)?;
    let e_circ = radial_effective(model, l, r_circ);
    if h < e_circ {
        return Err(NhError::NoClosedOrbit { h, l });
    }
    if degenerate_radial(h, e_circ) {
        return Ok((r_circ, r_circ));
    }
    let mut lo = r_circ;
    let mut iter = 0;
    while radial_effective(model, l, lo) < h {
        lo *= 0.5;
        iter += 1;
        if iter > 600 {
            return Err(NhError::NoClosedOrbit { h, l });
        }
    }
    let r_minus = bisect_root(lo, r_circ, 1e-13 * r_circ.max(1.0), |r| {
        radial_effective(model, l, r) - h
    })?;
    let mut hi = r_circ;
    iter = 0;
    while radial_effective(model, l, hi) < h {
        hi *= 2.0;
        iter += 1;
        if iter > 200 {
            return Err(NhError::NoClosedOrbit { h, l });
        }
    }
    let r_plus = bisect_root(r_circ, hi, 1e-13 * hi.max(1.0), |r| {
        radial_effective(model, l, r) - h
    })?;
    Ok((r_minus, r_plus))
}

/// Radial action a₁(h, L) = ∮ p_r dr over the closed reduced orbit.
pub fn radial_action(model: &ModelSpec, h: f64, l: f64) -> Result<f64> {
    if l == 0.0 {
        return Err(NhError::ZeroAngularMomentum);
    }
    let (r_minus, r_plus) = radial_turning_points(model, h, l)?;
    if r_minus == r_plus {
        return Ok(0.0);
    }
    let f = |r: f64| sqrt_pos(2.0 * (h - radial_effective(model, l, r)));
    Ok(2.0 * turning_point_integral(r_minus, r_plus, f))
}

/// Period of the reduced radial oscillation at (h, l).
pub fn radial_period(model: &ModelSpec, h: f64, l: f64) -> Result<f64> {
    if l == 0.0 {
        return Err(NhError::ZeroAngularMomentum);
    }
    let (r_minus, r_plus) = radial_turning_points(model, h, l)?;
    if r_minus == r_plus {
        // Limit of small radial oscillations around the circular orbit.
        let d = 1e-6 * r_minus;
        let curv = (radial_effective_slope(model, l, r_minus + d)
            - radial_effective_slope(model, l, r_minus - d))
            / (2.0 * d);
        return Ok(2.0 * std::f64::consts::PI / curv.max(1e-300).sqrt());
    }
    let f = |r: f64| 1.0 / sqrt_pos(2.0 * (h - radial_effective(model, l, r))).max(1e-300);
    Ok(2.0 * turning_point_integral(r_minus, r_plus, f))
}

fn initial_state_on_level(model: &ModelSpec, h: f64, l: Option<f64>) -> Result<PhaseState> {
    match l {
        Some(l) => {
            let (r_minus, _) = radial_turning_points(model, h, l)?;
            Ok(PhaseState::new_2d([r_minus, 0.0], [0.0, l / r_minus]))
        }
        None => {
            let p = sqrt_pos(2.0 * (h - model.potential(&[0.0, 0.0])));
            Ok(PhaseState::new_1d(0.0, p))
        }
    }
}

/// Time average of |p(t)|² along a constant-energy trajectory on the level
/// set (h, l). The horizon is snapped to a whole number of orbit periods so
/// the average converges at the integrator's order, and the half-horizon
/// average must agree with the full one to within the tolerance.
pub fn k0_time_average(model: &ModelSpec, h: f64, l: Option<f64>, horizon: f64) -> Result<f64> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(NhError::InvalidParameter(format!(
            "horizon must be positive and finite, got {horizon}"
        )));
    }
    if l.is_none() {
        let floor = model.energy_min();
        if (h - floor).abs() <= 1e-12 * floor.abs().max(1.0) {
            // Rest point: the orbit is a single equilibrium.
            return Ok(0.0);
        }
    }
    if let Some(l) = l {
        let e_circ = circular_energy(model, l)?;
        if degenerate_radial(h, e_circ) {
            // Circular orbit: |p|² = L²/r² is constant in time.
            let r = circular_radius(model, l)?;
            return Ok(l * l / (r * r));
        }
    }
    let period = orbit_period(model, h, l)?;
    let cycles = 2 * ((horizon / (2.0 * period)).floor() as u64).max(1);
    let span = cycles as f64 * period;
    let mut steps = (span / K0_AVERAGE_DT).ceil() as u64;
    if steps % 2 == 1 {
        steps += 1;
    }
    let dt = span / steps as f64;

    let mut s = initial_state_on_level(model, h, l)?;
    let mut sum = 0.5 * s.p_norm2();
    let mut half_sum = f64::NAN;
    for k in 1..=steps {
        s = verlet_step(model, &s, dt);
        if !s.is_finite() {
            return Err(NhError::Diverged {
                t: k as f64 * dt,
            });
        }
        let w = if k == steps { 0.5 } else { 1.0 };
        sum += w * s.p_norm2();
        if k == steps / 2 {
            // Trapezoid closure of the first half.
            half_sum = sum - 0.5 * s.p_norm2();
        }
    }
    let full = sum * dt / span;
    let half = half_sum * dt / (0.5 * span);
    let diff = (full - half).abs();
    let tol = K0_CONVERGENCE_TOL * full.abs().max(1.0);
    if diff > tol {
        return Err(NhError::NonConvergence {
            first: half,
            second: full,
            diff,
            tol,
        });
    }
    Ok(full)
}

/// One tabulated energy level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionEntry {
    pub h: f64,
    pub action: f64,
    pub k0: f64,
    pub period: f64,
    /// Connected components of the level set (2 for pendulum rotation).
    pub components: u32,
}

/// Monotone tabulation h ↦ (a, k₀, T) with piecewise-linear lookups in both
/// directions. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionTable {
    entries: Vec<ActionEntry>,
}

impl ActionTable {
    pub fn from_entries(entries: Vec<ActionEntry>) -> Result<Self> {
        if entries.len() < 2 {
            return Err(NhError::InvalidTable(
                "action table needs at least two entries".into(),
            ));
        }
        for e in &entries {
            if !(e.h.is_finite() && e.action.is_finite() && e.k0.is_finite() && e.period.is_finite())
            {
                return Err(NhError::InvalidTable("non-finite table entry".into()));
            }
            if e.k0 < 0.0 {
                return Err(NhError::InvalidTable(format!(
                    "kinetic moment must be nonnegative, got {} at h = {}",
                    e.k0, e.h
                )));
            }
            if e.components != 1 && e.components != 2 {
                return Err(NhError::InvalidTable(format!(
                    "component count must be 1 or 2, got {}",
                    e.components
                )));
            }
        }
        for w in entries.windows(2) {
            if !(w[1].h > w[0].h) {
                return Err(NhError::InvalidTable(format!(
                    "energies must be strictly increasing: {} then {}",
                    w[0].h, w[1].h
                )));
            }
            if !(w[1].action > w[0].action) {
                return Err(NhError::InvalidTable(format!(
                    "actions must be strictly increasing: {} then {}",
                    w[0].action, w[1].action
                )));
            }
        }
        Ok(ActionTable { entries })
    }

    pub fn entries(&self) -> &[ActionEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h_range(&self) -> (f64, f64) {
        (self.entries[0].h, self.entries.last().unwrap().h)
    }

    pub fn action_range(&self) -> (f64, f64) {
        (
            self.entries[0].action,
            self.entries.last().unwrap().action,
        )
    }

    fn pl_over_h(&self, f: impl Fn(&ActionEntry) -> f64) -> PiecewiseLinear {
        PiecewiseLinear::new(
            self.entries.iter().map(|e| e.h).collect(),
            self.entries.iter().map(f).collect(),
        )
        .expect("validated table")
    }

    fn pl_over_action(&self, f: impl Fn(&ActionEntry) -> f64) -> PiecewiseLinear {
        PiecewiseLinear::new(
            self.entries.iter().map(|e| e.action).collect(),
            self.entries.iter().map(f).collect(),
        )
        .expect("validated table")
    }

    pub fn action_of_h(&self, h: f64) -> Result<f64> {
        self.pl_over_h(|e| e.action).eval(h)
    }

    pub fn h_of_action(&self, a: f64) -> Result<f64> {
        self.pl_over_action(|e| e.h).eval(a)
    }

    pub fn k0_of_h(&self, h: f64) -> Result<f64> {
        self.pl_over_h(|e| e.k0).eval(h)
    }

    /// k₀ as a function of the action: the inverse lookup h(a) composed with
    /// the nodewise interpolation, which collapses to a single
    /// piecewise-linear map on the action knots.
    pub fn k0_of_action(&self, a: f64) -> Result<f64> {
        self.pl_over_action(|e| e.k0).eval(a)
    }

    pub fn period_of_h(&self, h: f64) -> Result<f64> {
        self.pl_over_h(|e| e.period).eval(h)
    }

    /// a′(h) from centered differences at interior nodes (one-sided at the
    /// ends), evaluated by interpolation.
    pub fn action_derivative(&self, h: f64) -> Result<f64> {
        let e = &self.entries;
        let n = e.len();
        let mut slopes = Vec::with_capacity(n);
        slopes.push((e[1].action - e[0].action) / (e[1].h - e[0].h));
        for i in 1..n - 1 {
            slopes.push((e[i + 1].action - e[i - 1].action) / (e[i + 1].h - e[i - 1].h));
        }
        slopes.push((e[n - 1].action - e[n - 2].action) / (e[n - 1].h - e[n - 2].h));
        PiecewiseLinear::new(e.iter().map(|x| x.h).collect(), slopes)?.eval(h)
    }

    /// Serialize in the experiment CSV contract (comma separator, single
    /// header row, LF endings, shortest round-trip floats).
    pub fn write_csv(&self, out: &mut impl std::io::Write) -> Result<()> {
        writeln!(out, "h,action,k0,period,components")?;
        for e in &self.entries {
            writeln!(
                out,
                "{},{},{},{},{}",
                e.h, e.action, e.k0, e.period, e.components
            )?;
        }
        Ok(())
    }

    pub fn read_csv(input: &str) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| NhError::InvalidTable("empty table file".into()))?;
        if header != "h,action,k0,period,components" {
            return Err(NhError::InvalidTable(format!(
                "unexpected table header '{header}'"
            )));
        }
        let mut entries = Vec::new();
        for (ln, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(NhError::InvalidTable(format!(
                    "line {}: expected 5 fields, got {}",
                    ln + 2,
                    fields.len()
                )));
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse().map_err(|_| {
                    NhError::InvalidTable(format!("line {}: bad float '{s}'", ln + 2))
                })
            };
            entries.push(ActionEntry {
                h: parse(fields[0])?,
                action: parse(fields[1])?,
                k0: parse(fields[2])?,
                period: parse(fields[3])?,
                components: fields[4].parse().map_err(|_| {
                    NhError::InvalidTable(format!("line {}: bad component count", ln + 2))
                })?,
            });
        }
        ActionTable::from_entries(entries)
    }
}

/// Build a one-dimensional action table over a strictly increasing energy
/// grid. The k₀ column uses the per-component quadrature identity
/// k₀ = (a / components) / T, which is spectrally accurate; the independent
/// time-average route stays available through `k0_time_average` for
/// cross-validation.
pub fn build_action_table(model: &ModelSpec, h_grid: &[f64]) -> Result<ActionTable> {
    if h_grid.len() < 2 {
        return Err(NhError::InvalidTable(
            "energy grid needs at least two nodes".into(),
        ));
    }
    for w in h_grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(NhError::InvalidTable(format!(
                "energy grid must be strictly increasing: {} then {}",
                w[0], w[1]
            )));
        }
    }
    let entries = h_grid
        .iter()
        .map(|&h| -> Result<ActionEntry> {
            let action = action_1d(model, h).map_err(|e| e.in_stage(&format!("node h = {h}")))?;
            let period =
                orbit_period(model, h, None).map_err(|e| e.in_stage(&format!("node h = {h}")))?;
            let components = if is_rotation(model, h) { 2 } else { 1 };
            let k0 = (action / components as f64) / period;
            Ok(ActionEntry {
                h,
                action,
                k0,
                period,
                components,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ActionTable::from_entries(entries)
}

/// One kinetic-moment sample of the planar model at fixed (H, L).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct K0Sample {
    pub h: f64,
    pub l: f64,
    pub k0: f64,
}

/// Tables for the planar central-force model: a summary `ActionTable`, the
/// L-averaged kinetic-moment interpolant, and the raw per-(H, L) samples.
#[derive(Debug, Clone)]
pub struct CentralForceTables {
    pub table: ActionTable,
    pub k0app: PiecewiseLinear,
    pub samples: Vec<K0Sample>,
}

/// Build the planar tables: for each energy node, sample several angular
/// momenta below the circular-orbit bound, time-average |p|² along each
/// constant-energy trajectory, and average over L to obtain the
/// piecewise-linear interpolant of the kinetic moment.
pub fn build_action_table_2d(
    model: &ModelSpec,
    h_grid: &[f64],
    l_samples: usize,
    avg_horizon: f64,
) -> Result<CentralForceTables> {
    if model.dim() != 2 {
        return Err(NhError::NotTwoDimensional);
    }
    if h_grid.len() < 2 || l_samples == 0 {
        return Err(NhError::InvalidTable(
            "planar table needs at least two energies and one L sample per energy".into(),
        ));
    }
    for w in h_grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(NhError::InvalidTable(format!(
                "energy grid must be strictly increasing: {} then {}",
                w[0], w[1]
            )));
        }
    }
    let l_max_of = |h: f64| -> Result<f64> {
        // circular_energy is increasing in L; bracket then bisect.
        let mut hi = 1.0;
        let mut iter = 0;
        while circular_energy(model, hi)? < h {
            hi *= 2.0;
            iter += 1;
            if iter > 100 {
                return Err(NhError::NoClosedOrbit { h, l: hi });
            }
        }
        bisect_root(1e-9, hi, 1e-12 * hi, |l| {
            circular_energy(model, l).unwrap_or(f64::INFINITY) - h
        })
    };

    let mut jobs = Vec::new();
    for (i, &h) in h_grid.iter().enumerate() {
        let l_max = l_max_of(h).map_err(|e| e.in_stage(&format!("node h = {h}")))?;
        for j in 1..=l_samples {
            let l = l_max * j as f64 / (l_samples + 1) as f64;
            jobs.push((i, h, l));
        }
    }
    let sampled: Vec<Result<K0Sample>> = jobs
        .par_iter()
        .map(|&(_, h, l)| {
            let k0 = k0_time_average(model, h, Some(l), avg_horizon)
                .map_err(|e| e.in_stage(&format!("node (h, L) = ({h}, {l})")))?;
            Ok(K0Sample { h, l, k0 })
        })
        .collect();
    let mut samples = Vec::with_capacity(sampled.len());
    for s in sampled {
        samples.push(s?);
    }

    let mut k0app_vals = Vec::with_capacity(h_grid.len());
    for &h in h_grid {
        let row: Vec<f64> = samples
            .iter()
            .filter(|s| s.h == h)
            .map(|s| s.k0)
            .collect();
        k0app_vals.push(row.iter().sum::<f64>() / row.len() as f64);
    }
    let k0app = PiecewiseLinear::new(h_grid.to_vec(), k0app_vals.clone())?;

    // Summary columns at a fixed reference angular momentum valid for every
    // node (half the circular bound of the lowest energy).
    let l_ref = 0.5 * l_max_of(h_grid[0])?;
    let entries = h_grid
        .iter()
        .zip(&k0app_vals)
        .map(|(&h, &k0)| -> Result<ActionEntry> {
            Ok(ActionEntry {
                h,
                action: radial_action(model, h, l_ref)?,
                k0,
                period: radial_period(model, h, l_ref)?,
                components: 1,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CentralForceTables {
        table: ActionTable::from_entries(entries)?,
        k0app,
        samples,
    })
}

/// Averaged thermostat force k(a) = k₀(a) − N/β.
pub fn k_of_a(a: f64, table: &ActionTable, beta: f64, n_dof: usize) -> Result<f64> {
    Ok(table.k0_of_action(a)? - n_dof as f64 / beta)
}

/// The log-potential W(a) = ∫ k(s)/s ds anchored at the lowest table action,
/// evaluated in closed form on every piecewise-linear segment of k.
#[derive(Debug, Clone)]
pub struct WFunction {
    a_knots: Vec<f64>,
    k_knots: Vec<f64>,
    w_knots: Vec<f64>,
}

fn segment_w_integral(a0: f64, k0: f64, a1: f64, k1: f64, from: f64, to: f64) -> f64 {
    // On the segment k(s) = c + m·s, so ∫ k/s ds = c·ln s + m·s.
    let m = (k1 - k0) / (a1 - a0);
    let c = k0 - m * a0;
    c * (to / from).ln() + m * (to - from)
}

impl WFunction {
    pub fn new(table: &ActionTable, beta: f64, n_dof: usize) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(NhError::InvalidParameter(format!(
                "beta must be positive, got {beta}"
            )));
        }
        let a_knots: Vec<f64> = table.entries().iter().map(|e| e.action).collect();
        if a_knots[0] <= 0.0 {
            return Err(NhError::InvalidTable(
                "actions must be positive for the logarithmic potential".into(),
            ));
        }
        let k_knots: Vec<f64> = table
            .entries()
            .iter()
            .map(|e| e.k0 - n_dof as f64 / beta)
            .collect();
        let mut w_knots = vec![0.0];
        for i in 0..a_knots.len() - 1 {
            let inc = segment_w_integral(
                a_knots[i],
                k_knots[i],
                a_knots[i + 1],
                k_knots[i + 1],
                a_knots[i],
                a_knots[i + 1],
            );
            w_knots.push(w_knots[i] + inc);
        }
        Ok(WFunction {
            a_knots,
            k_knots,
            w_knots,
        })
    }

    pub fn a_min(&self) -> f64 {
        self.a_knots[0]
    }

    pub fn a_max(&self) -> f64 {
        *self.a_knots.last().unwrap()
    }

    pub fn a_knots(&self) -> &[f64] {
        &self.a_knots
    }

    fn check_range(&self, a: f64) -> Result<()> {
        if !(a >= self.a_min() && a <= self.a_max()) {
            return Err(NhError::OutOfRange {
                x: a,
                lo: self.a_min(),
                hi: self.a_max(),
            });
        }
        Ok(())
    }

    fn segment(&self, a: f64) -> usize {
        match self.a_knots.partition_point(|&k| k <= a) {
            0 => 0,
            i => (i - 1).min(self.a_knots.len() - 2),
        }
    }

    /// k(a) by linear interpolation on the knots.
    pub fn k(&self, a: f64) -> Result<f64> {
        self.check_range(a)?;
        let i = self.segment(a);
        let t = (a - self.a_knots[i]) / (self.a_knots[i + 1] - self.a_knots[i]);
        Ok(self.k_knots[i] + t * (self.k_knots[i + 1] - self.k_knots[i]))
    }

    /// W(a), with W(a_min) = 0. Only differences and critical points carry
    /// meaning; the additive anchor is immaterial.
    pub fn eval(&self, a: f64) -> Result<f64> {
        self.check_range(a)?;
        let i = self.segment(a);
        Ok(self.w_knots[i]
            + segment_w_integral(
                self.a_knots[i],
                self.k_knots[i],
                self.a_knots[i + 1],
                self.k_knots[i + 1],
                self.a_knots[i],
                a,
            ))
    }

    /// W′(a) = k(a)/a.
    pub fn derivative(&self, a: f64) -> Result<f64> {
        Ok(self.k(a)? / a)
    }

    /// Local minimizers of W: upward sign changes of k, refined by bisection
    /// to 1e-10 in the action.
    pub fn minimizers(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for i in 0..self.a_knots.len() - 1 {
            let (k0, k1) = (self.k_knots[i], self.k_knots[i + 1]);
            if k0 < 0.0 && k1 > 0.0 {
                let root = bisect_root(self.a_knots[i], self.a_knots[i + 1], 1e-10, |a| {
                    self.k(a).expect("in range")
                })
                .expect("bracketed by construction");
                out.push(root);
            } else if k0 == 0.0
                && i > 0
                && self.k_knots[i - 1] < 0.0
                && k1 > 0.0
            {
                out.push(self.a_knots[i]);
            }
        }
        out
    }
}

/// W(a) for a one-degree-of-freedom table (N = 1 in the thermostat force).
pub fn w_of_a(a: f64, table: &ActionTable, beta: f64) -> Result<f64> {
    WFunction::new(table, beta, 1)?.eval(a)
}

/// Local minimizers of W for a one-degree-of-freedom table.
pub fn find_w_minimizers(table: &ActionTable, beta: f64) -> Result<Vec<f64>> {
    Ok(WFunction::new(table, beta, 1)?.minimizers())
}

/// τ(H) = exp(∫ ds / k₀app(s)) with the lower limit at the interpolant's
/// left endpoint, so τ there equals 1. Strictly increasing because the
/// integrand is positive.
pub fn tau_of_h(h: f64, k0app: &PiecewiseLinear) -> Result<f64> {
    let min_y = k0app.y_min();
    if !(min_y > 0.0) {
        return Err(NhError::NonpositiveKineticMoment(min_y));
    }
    if !k0app.contains(h) {
        return Err(NhError::OutOfRange {
            x: h,
            lo: k0app.x_min(),
            hi: k0app.x_max(),
        });
    }
    let xs = k0app.xs();
    let ys = k0app.ys();
    let mut integral = 0.0;
    for i in 0..xs.len() - 1 {
        let hi = xs[i + 1].min(h);
        if hi <= xs[i] {
            break;
        }
        let m = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
        let c = ys[i] - m * xs[i];
        // ∫ ds/(c + m·s) on [xs_i, hi]
        integral += if m.abs() < 1e-300 {
            (hi - xs[i]) / c
        } else {
            ((c + m * hi) / (c + m * xs[i])).ln() / m
        };
        if hi == h {
            break;
        }
    }
    Ok(integral.exp())
}
