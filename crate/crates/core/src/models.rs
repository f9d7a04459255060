//! Model Hamiltonians and the Nosé-Hoover vector field.
//!
//! Three systems are supported, all with unit mass matrix: the 1D harmonic
//! oscillator `V(q) = q²/2`, the 1D pendulum `V(q) = -cos q`, and a 2D
//! central-force system `V(q) = r² + r⁴` with `r = |q|`. The thermostat
//! extends the phase space by one scalar momentum ξ whose dynamics drives
//! the kinetic energy toward `N/β`.

use crate::actionlib::ActionTable;
use crate::error::{NhError, Result};

/// Which model Hamiltonian to simulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Harmonic1d,
    Pendulum1d,
    CentralForce2d,
}

impl ModelKind {
    /// Number of position degrees of freedom.
    pub fn dim(self) -> usize {
        match self {
            ModelKind::Harmonic1d | ModelKind::Pendulum1d => 1,
            ModelKind::CentralForce2d => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Harmonic1d => "harmonic",
            ModelKind::Pendulum1d => "pendulum",
            ModelKind::CentralForce2d => "centralforce",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = NhError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "harmonic" | "harmonic1d" => Ok(ModelKind::Harmonic1d),
            "pendulum" | "pendulum1d" => Ok(ModelKind::Pendulum1d),
            "centralforce" | "centralforce2d" | "central-force" => Ok(ModelKind::CentralForce2d),
            other => Err(NhError::InvalidParameter(format!(
                "unknown model kind '{other}' (expected harmonic | pendulum | centralforce)"
            ))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A model plus its thermostat parameters.
///
/// `beta` is the inverse temperature with the Boltzmann constant folded in
/// (k_B = 1), and `thermostat_mass` is the mass Q of the bath variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub beta: f64,
    pub thermostat_mass: f64,
}

/// Physical phase point. Positions and momenta are stored in fixed two-slot
/// arrays; one-dimensional models use slot 0 and keep slot 1 identically
/// zero, so dot products and gradients are valid for every model without
/// branching on the dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseState {
    pub q: [f64; 2],
    pub p: [f64; 2],
}

/// Extended phase point: physical state plus thermostat momentum ξ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermostatState {
    pub phase: PhaseState,
    pub xi: f64,
}

impl PhaseState {
    pub fn new_1d(q: f64, p: f64) -> Self {
        PhaseState {
            q: [q, 0.0],
            p: [p, 0.0],
        }
    }

    pub fn new_2d(q: [f64; 2], p: [f64; 2]) -> Self {
        PhaseState { q, p }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.p.iter()).all(|v| v.is_finite())
    }

    /// Squared momentum norm |p|².
    pub fn p_norm2(&self) -> f64 {
        self.p[0] * self.p[0] + self.p[1] * self.p[1]
    }
}

impl ThermostatState {
    pub fn new_1d(q: f64, p: f64, xi: f64) -> Self {
        ThermostatState {
            phase: PhaseState::new_1d(q, p),
            xi,
        }
    }

    pub fn new_2d(q: [f64; 2], p: [f64; 2], xi: f64) -> Self {
        ThermostatState {
            phase: PhaseState::new_2d(q, p),
            xi,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.phase.is_finite() && self.xi.is_finite()
    }
}

impl ModelSpec {
    pub fn new(kind: ModelKind, beta: f64, thermostat_mass: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(NhError::InvalidParameter(format!(
                "beta must be positive and finite, got {beta}"
            )));
        }
        if !(thermostat_mass > 0.0) || !thermostat_mass.is_finite() {
            return Err(NhError::InvalidParameter(format!(
                "thermostat mass must be positive and finite, got {thermostat_mass}"
            )));
        }
        Ok(ModelSpec {
            kind,
            beta,
            thermostat_mass,
        })
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    /// Target kinetic energy N/β of the thermostat.
    pub fn target_kinetic(&self) -> f64 {
        self.dim() as f64 / self.beta
    }

    /// Potential energy V(q).
    pub fn potential(&self, q: &[f64; 2]) -> f64 {
        match self.kind {
            ModelKind::Harmonic1d => 0.5 * q[0] * q[0],
            ModelKind::Pendulum1d => -q[0].cos(),
            ModelKind::CentralForce2d => {
                let r2 = q[0] * q[0] + q[1] * q[1];
                r2 + r2 * r2
            }
        }
    }

    /// Potential as a function of the radius (identical to `potential` on
    /// the ray q = (r, 0)).
    pub fn radial_potential(&self, r: f64) -> f64 {
        self.potential(&[r, 0.0])
    }

    /// Analytic gradient ∇V(q). For the central-force model the gradient is
    /// `(2 + 4r²)·q`, which extends smoothly through the origin.
    pub fn grad_potential(&self, q: &[f64; 2]) -> [f64; 2] {
        match self.kind {
            ModelKind::Harmonic1d => [q[0], 0.0],
            ModelKind::Pendulum1d => [q[0].sin(), 0.0],
            ModelKind::CentralForce2d => {
                let r2 = q[0] * q[0] + q[1] * q[1];
                let c = 2.0 + 4.0 * r2;
                [c * q[0], c * q[1]]
            }
        }
    }

    /// Total energy H(q, p) = |p|²/2 + V(q).
    pub fn hamiltonian(&self, s: &PhaseState) -> f64 {
        0.5 * s.p_norm2() + self.potential(&s.q)
    }

    /// Minimum of the potential (the bottom of the accessible energy range).
    pub fn energy_min(&self) -> f64 {
        match self.kind {
            ModelKind::Harmonic1d | ModelKind::CentralForce2d => 0.0,
            ModelKind::Pendulum1d => -1.0,
        }
    }

    /// Angular momentum L = q₁p₂ − q₂p₁ of a planar state.
    pub fn angular_momentum(&self, s: &PhaseState) -> Result<f64> {
        if self.dim() != 2 {
            return Err(NhError::NotTwoDimensional);
        }
        Ok(s.q[0] * s.p[1] - s.q[1] * s.p[0])
    }

    /// Reduced radial energy H_L(r, p_r) = p_r²/2 + L²/(2r²) + V(r).
    pub fn effective_radial_hamiltonian(&self, r: f64, p_r: f64, l: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(NhError::NonpositiveRadius(r));
        }
        Ok(0.5 * p_r * p_r + 0.5 * l * l / (r * r) + self.radial_potential(r))
    }

    /// Time derivative of an extended state under the thermostatted flow:
    /// q̇ = p, ṗ = −∇V(q) − (ξ/Q)p, ξ̇ = |p|² − N/β.
    ///
    /// The returned value reuses the state layout, with derivatives in the
    /// corresponding slots.
    pub fn nh_vector_field(&self, s: &ThermostatState) -> ThermostatState {
        let grad = self.grad_potential(&s.phase.q);
        let damp = s.xi / self.thermostat_mass;
        ThermostatState {
            phase: PhaseState {
                q: s.phase.p,
                p: [
                    -grad[0] - damp * s.phase.p[0],
                    -grad[1] - damp * s.phase.p[1],
                ],
            },
            xi: s.phase.p_norm2() - self.target_kinetic(),
        }
    }
}

/// Unnormalized energy density exp(−βh)·a′(h) of the canonical ensemble,
/// with a′ taken from centered differences on the table nodes.
pub fn gibbs_energy_density(h: f64, table: &ActionTable, beta: f64) -> Result<f64> {
    let slope = table.action_derivative(h)?;
    Ok((-beta * h).exp() * slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actionlib::build_action_table;
    use crate::sampling::splitmix_points;
    use approx::assert_abs_diff_eq;

    fn models() -> Vec<ModelSpec> {
        vec![
            ModelSpec::new(ModelKind::Harmonic1d, 1.0, 1.0).unwrap(),
            ModelSpec::new(ModelKind::Pendulum1d, 1.0, 1.0).unwrap(),
            ModelSpec::new(ModelKind::CentralForce2d, 1.0, 1.0).unwrap(),
        ]
    }

    #[test]
    fn parameter_validation() {
        assert!(ModelSpec::new(ModelKind::Pendulum1d, 0.0, 1.0).is_err());
        assert!(ModelSpec::new(ModelKind::Pendulum1d, 1.0, -2.0).is_err());
        assert!(ModelSpec::new(ModelKind::Pendulum1d, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn potential_values() {
        let pend = ModelSpec::new(ModelKind::Pendulum1d, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(pend.potential(&[0.0, 0.0]), -1.0);
        assert_abs_diff_eq!(pend.potential(&[std::f64::consts::PI, 0.0]), 1.0);
        let cf = ModelSpec::new(ModelKind::CentralForce2d, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(cf.potential(&[1.0, 0.0]), 2.0);
    }

    #[test]
    fn gradient_values() {
        let pend = ModelSpec::new(ModelKind::Pendulum1d, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(pend.grad_potential(&[0.0, 0.0])[0], 0.0);
        let harm = ModelSpec::new(ModelKind::Harmonic1d, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(harm.grad_potential(&[3.0, 0.0])[0], 3.0);
        let cf = ModelSpec::new(ModelKind::CentralForce2d, 1.0, 1.0).unwrap();
        assert_eq!(cf.grad_potential(&[0.0, 0.0]), [0.0, 0.0]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let step = 1e-5;
        // Centered differences carry an O(step²)-scaled truncation error;
        // 1e-8 is ten times a conservative bound for these potentials.
        let tol = 1e-8;
        for model in models() {
            for pt in splitmix_points(7, 100, 4) {
                let q = [pt[0], if model.dim() == 2 { pt[1] } else { 0.0 }];
                let grad = model.grad_potential(&q);
                for i in 0..model.dim() {
                    let mut qp = q;
                    let mut qm = q;
                    qp[i] += step;
                    qm[i] -= step;
                    let fd = (model.potential(&qp) - model.potential(&qm)) / (2.0 * step);
                    assert!(
                        (fd - grad[i]).abs() < tol,
                        "{:?} grad mismatch at {:?}: {} vs {}",
                        model.kind,
                        q,
                        grad[i],
                        fd
                    );
                }
            }
        }
    }

    #[test]
    fn hamiltonian_values() {
        let pend = ModelSpec::new(ModelKind::Pendulum1d, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(
            pend.hamiltonian(&PhaseState::new_1d(0.0, 1.5)),
            0.125,
            epsilon = 1e-15
        );
        let harm = ModelSpec::new(ModelKind::Harmonic1d, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(
            harm.hamiltonian(&PhaseState::new_1d(0.0, 2.0_f64.sqrt())),
            1.0,
            epsilon = 1e-15
        );
        let cf = ModelSpec::new(ModelKind::CentralForce2d, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(
            cf.hamiltonian(&PhaseState::new_2d([0.0, 0.5], [-1.5, 1.5])),
            2.5625,
            epsilon = 1e-15
        );
    }

    #[test]
    fn hamiltonian_even_in_momentum() {
        for model in models() {
            for pt in splitmix_points(11, 50, 4) {
                let s = PhaseState::new_2d(
                    [pt[0], if model.dim() == 2 { pt[1] } else { 0.0 }],
                    [pt[2], if model.dim() == 2 { pt[3] } else { 0.0 }],
                );
                let flipped = PhaseState::new_2d(s.q, [-s.p[0], -s.p[1]]);
                assert_eq!(model.hamiltonian(&s), model.hamiltonian(&flipped));
            }
        }
    }

    #[test]
    fn angular_momentum_values() {
        let cf = ModelSpec::new(ModelKind::CentralForce2d, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(
            cf.angular_momentum(&PhaseState::new_2d([0.0, 0.5], [-1.5, 1.5]))
                .unwrap(),
            0.75
        );
        assert_abs_diff_eq!(
            cf.angular_momentum(&PhaseState::new_2d([-0.5, 0.5], [-1.0, 1.0]))
                .unwrap(),
            0.0
        );
        assert_abs_diff_eq!(
            cf.angular_momentum(&PhaseState::new_2d([1.0, 0.0], [0.0, 1.0]))
                .unwrap(),
            1.0
        );
        let pend = ModelSpec::new(ModelKind::Pendulum1d, 1.0, 1.0).unwrap();
        assert!(pend
            .angular_momentum(&PhaseState::new_1d(0.3, 0.7))
            .is_err());
    }

    #[test]
    fn angular_momentum_rotation_invariant() {
        let cf = ModelSpec::new(ModelKind::CentralForce2d, 1.0, 1.0).unwrap();
        let s = PhaseState::new_2d([0.3, -0.8], [1.1, 0.4]);
        let l0 = cf.angular_momentum(&s).unwrap();
        for angle in [0.3, 1.2, 2.9, -0.7] {
            let (c, sn) = (f64::cos(angle), f64::sin(angle));
            let rot = |v: [f64; 2]| [c * v[0] - sn * v[1], sn * v[0] + c * v[1]];
            let rotated = PhaseState::new_2d(rot(s.q), rot(s.p));
            assert_abs_diff_eq!(
                cf.angular_momentum(&rotated).unwrap(),
                l0,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn nh_field_values() {
        let harm = ModelSpec::new(ModelKind::Harmonic1d, 1.0, 1.0).unwrap();
        let d = harm.nh_vector_field(&ThermostatState::new_1d(0.0, 1.0, 0.0));
        assert_eq!((d.phase.q[0], d.phase.p[0], d.xi), (1.0, 0.0, 0.0));

        let pend = ModelSpec::new(ModelKind::Pendulum1d, 1.0, 1.0).unwrap();
        let d = pend.nh_vector_field(&ThermostatState::new_1d(0.0, 1.5, 0.0));
        assert_eq!((d.phase.q[0], d.phase.p[0], d.xi), (1.5, 0.0, 1.25));

        let cf = ModelSpec::new(ModelKind::CentralForce2d, 1.0, 1.0).unwrap();
        let d = cf.nh_vector_field(&ThermostatState::new_2d([0.0, 0.5], [-1.5, 1.5], 0.0));
        assert_abs_diff_eq!(d.xi, 2.5, epsilon = 1e-15);
    }

    #[test]
    fn nh_field_reduces_to_hamiltonian_flow_at_zero_xi() {
        for model in models() {
            for pt in splitmix_points(13, 40, 4) {
                let s = ThermostatState::new_2d(
                    [pt[0], if model.dim() == 2 { pt[1] } else { 0.0 }],
                    [pt[2], if model.dim() == 2 { pt[3] } else { 0.0 }],
                    0.0,
                );
                let d = model.nh_vector_field(&s);
                let grad = model.grad_potential(&s.phase.q);
                for i in 0..model.dim() {
                    assert_eq!(d.phase.q[i], s.phase.p[i]);
                    assert_eq!(d.phase.p[i], -grad[i]);
                }
            }
        }
    }

    #[test]
    fn angular_momentum_decay_rate_along_field() {
        // dL/dt along the thermostatted field equals -(xi/Q)·L.
        let cf = ModelSpec::new(ModelKind::CentralForce2d, 1.0, 2.5).unwrap();
        for pt in splitmix_points(17, 40, 5) {
            let s = ThermostatState::new_2d([pt[0], pt[1]], [pt[2], pt[3]], pt[4]);
            let l = cf.angular_momentum(&s.phase).unwrap();
            let d = cf.nh_vector_field(&s);
            let ldot = d.phase.q[0] * s.phase.p[1] + s.phase.q[0] * d.phase.p[1]
                - d.phase.q[1] * s.phase.p[0]
                - s.phase.q[1] * d.phase.p[0];
            assert_abs_diff_eq!(ldot, -(s.xi / cf.thermostat_mass) * l, epsilon = 1e-12);
        }
    }

    #[test]
    fn effective_radial_hamiltonian_values() {
        let cf = ModelSpec::new(ModelKind::CentralForce2d, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(cf.effective_radial_hamiltonian(1.0, 0.0, 0.0).unwrap(), 2.0);
        assert_abs_diff_eq!(cf.effective_radial_hamiltonian(1.0, 1.0, 1.0).unwrap(), 3.0);
        assert_abs_diff_eq!(
            cf.effective_radial_hamiltonian(0.5, 0.0, 0.75).unwrap(),
            1.4375
        );
        assert!(cf.effective_radial_hamiltonian(0.0, 1.0, 1.0).is_err());
        assert!(cf.effective_radial_hamiltonian(-0.3, 1.0, 1.0).is_err());
    }

    #[test]
    fn gibbs_density_harmonic_ratio() {
        let harm = ModelSpec::new(ModelKind::Harmonic1d, 1.0, 1.0).unwrap();
        let grid: Vec<f64> = (0..40).map(|i| 0.05 + 0.05 * i as f64).collect();
        let table = build_action_table(&harm, &grid).unwrap();
        // a'(h) = 2π for every h, so the density ratio is the Boltzmann factor.
        let r = gibbs_energy_density(0.5, &table, 1.0).unwrap()
            / gibbs_energy_density(1.5, &table, 1.0).unwrap();
        assert_abs_diff_eq!(r, std::f64::consts::E, epsilon = 1e-8);
    }

    #[test]
    fn gibbs_density_pendulum_decreasing() {
        // Away from the separatrix the density-of-states factor varies slowly
        // and the Boltzmann factor dominates, so the density decreases in h.
        let pend = ModelSpec::new(ModelKind::Pendulum1d, 1.0, 1.0).unwrap();
        let grid: Vec<f64> = (0..33).map(|i| -0.9 + 0.05 * i as f64).collect();
        let table = build_action_table(&pend, &grid).unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..200 {
            let h = -0.89 + (1.58 / 199.0) * i as f64;
            let rho = gibbs_energy_density(h, &table, 1.0).unwrap();
            assert!(rho < prev, "density not decreasing at h = {h}");
            prev = rho;
        }
        assert!(gibbs_energy_density(5.0, &table, 1.0).is_err());
    }

    #[test]
    fn action_derivative_matches_secant_slopes() {
        let pend = ModelSpec::new(ModelKind::Pendulum1d, 1.0, 1.0).unwrap();
        let grid: Vec<f64> = (0..30).map(|i| -0.9 + 0.05 * i as f64).collect();
        let table = build_action_table(&pend, &grid).unwrap();
        let entries = table.entries();
        for i in 1..entries.len() - 1 {
            let secant = (entries[i + 1].action - entries[i - 1].action)
                / (entries[i + 1].h - entries[i - 1].h);
            let slope = table.action_derivative(entries[i].h).unwrap();
            assert_abs_diff_eq!(slope, secant, epsilon = 1e-12);
        }
    }
}
