//! Experiment runner: reproduces each figure of the study as CSV data,
//! provides the energy-histogram diagnostic, and drives the property
//! checks.
//!
//! Every experiment is deterministic (no seeds anywhere), writes one CSV
//! per plotted curve plus a `manifest.txt` echoing all physical inputs, and
//! reruns byte-identically. Floats are written in shortest round-trip
//! decimal form with comma separators and LF line endings.

use std::fmt;
use std::path::{Path, PathBuf};

use crate::actionlib::{
    action_1d, build_action_table, build_action_table_2d, canonical_pendulum_grid,
    k0_time_average, orbit_period, ActionTable, CentralForceTables, WFunction,
};
use crate::averaged::{period_grid, period_t1_first_return, well_width_and_isochrony, LogActionWell};
use crate::error::{NhError, Result};
use crate::integrators::{
    integrate, nh_step, symplectic_euler_step, IntegratorConfig, NoseHoover, Trajectory,
};
use crate::invariants::{
    e1_e2, g1, homogeneous_invariant, measure_divergence, measure_divergence_with_rho_beta,
};
use crate::models::{gibbs_energy_density, ModelKind, ModelSpec, ThermostatState};
use crate::poincare::{poincare_map, PoincareConfig};
use crate::quadrature::integrate_256;
use crate::sampling::splitmix_points;

/// CSV writing and parsing for the experiment contract: comma separator,
/// one header row, LF endings, shortest round-trip float formatting.
pub mod csv {
    use super::*;

    pub fn format_rows(header: &[&str], rows: &[Vec<f64>]) -> String {
        let mut out = String::new();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in rows {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(',');
                }
                out.push_str(&v.to_string());
                first = false;
            }
            out.push('\n');
        }
        out
    }

    pub fn write_rows(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        std::fs::write(path, format_rows(header, rows))?;
        Ok(())
    }

    pub fn parse(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| NhError::InvalidTable("empty CSV".into()))?
            .split(',')
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row = line
                .split(',')
                .map(|f| {
                    f.parse::<f64>().map_err(|_| {
                        NhError::InvalidTable(format!("line {}: bad float '{f}'", i + 2))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok((header, rows))
    }
}

/// Which experiment to run. The figure ids follow the study's numbering;
/// `Histogram` is the canonical-density comparison and `Properties` drives
/// the self-check battery.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentId {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig8,
    Fig9,
    Fig10,
    Fig11,
    Fig12,
    Fig13,
    Histogram,
    Properties,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 14] = [
        ExperimentId::Fig1,
        ExperimentId::Fig2,
        ExperimentId::Fig3,
        ExperimentId::Fig4,
        ExperimentId::Fig5,
        ExperimentId::Fig6,
        ExperimentId::Fig8,
        ExperimentId::Fig9,
        ExperimentId::Fig10,
        ExperimentId::Fig11,
        ExperimentId::Fig12,
        ExperimentId::Fig13,
        ExperimentId::Histogram,
        ExperimentId::Properties,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Fig1 => "fig1",
            ExperimentId::Fig2 => "fig2",
            ExperimentId::Fig3 => "fig3",
            ExperimentId::Fig4 => "fig4",
            ExperimentId::Fig5 => "fig5",
            ExperimentId::Fig6 => "fig6",
            ExperimentId::Fig8 => "fig8",
            ExperimentId::Fig9 => "fig9",
            ExperimentId::Fig10 => "fig10",
            ExperimentId::Fig11 => "fig11",
            ExperimentId::Fig12 => "fig12",
            ExperimentId::Fig13 => "fig13",
            ExperimentId::Histogram => "histogram",
            ExperimentId::Properties => "properties",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ExperimentId {
    type Err = NhError;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .iter()
            .copied()
            .find(|id| id.name() == s)
            .ok_or_else(|| {
                NhError::InvalidParameter(format!(
                    "unknown experiment id '{s}' (expected fig1..fig6, fig8..fig13, histogram, properties)"
                ))
            })
    }
}

/// Optional parameter overrides; anything left unset uses the experiment's
/// defaults.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub beta: Option<f64>,
    pub thermostat_mass: Option<f64>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub crossings: Option<usize>,
    pub bins: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub id: ExperimentId,
    pub out_dir: PathBuf,
    /// Run the long horizons of the original study instead of desk scale.
    pub paper_scale: bool,
    pub overrides: Overrides,
}

impl ExperimentConfig {
    pub fn new(id: ExperimentId, out_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            id,
            out_dir: out_dir.into(),
            paper_scale: false,
            overrides: Overrides::default(),
        }
    }
}

/// Canonical energy grid for the planar tables, wide enough to cover the
/// energies visited by the reference trajectories.
pub fn canonical_central_grid() -> Vec<f64> {
    (0..15).map(|i| 0.3 + (7.0 - 0.3) * i as f64 / 14.0).collect()
}

/// Default number of angular-momentum samples per planar energy node.
pub const CENTRAL_L_SAMPLES: usize = 8;

/// Default time-averaging horizon for the planar kinetic moments. The
/// average is exact over whole radial periods, so a moderate horizon
/// suffices.
pub const CENTRAL_K0_HORIZON: f64 = 200.0;

/// Build the canonical planar tables.
pub fn canonical_central_tables(beta: f64) -> Result<CentralForceTables> {
    let model = ModelSpec::new(ModelKind::CentralForce2d, beta, 1.0)?;
    build_action_table_2d(
        &model,
        &canonical_central_grid(),
        CENTRAL_L_SAMPLES,
        CENTRAL_K0_HORIZON,
    )
}

/// Build the canonical pendulum table.
pub fn canonical_pendulum_table(beta: f64) -> Result<ActionTable> {
    let model = ModelSpec::new(ModelKind::Pendulum1d, beta, 1.0)?;
    build_action_table(&model, &canonical_pendulum_grid())
}

/// Normalized energy histogram of a trajectory against the canonical
/// reference density exp(−βh)·a′(h), both normalized over the table's
/// energy range. Samples outside the range are dropped (and counted).
#[derive(Debug, Clone)]
pub struct EnergyHistogram {
    pub bin_edges: Vec<f64>,
    pub empirical: Vec<f64>,
    pub reference: Vec<f64>,
    pub total_variation: f64,
    pub dropped_samples: usize,
}

pub fn energy_histogram(
    model: &ModelSpec,
    traj: &Trajectory<ThermostatState>,
    bins: usize,
    table: &ActionTable,
    beta: f64,
) -> Result<EnergyHistogram> {
    if traj.is_empty() {
        return Err(NhError::InvalidParameter("empty trajectory".into()));
    }
    if bins == 0 {
        return Err(NhError::InvalidParameter("need at least one bin".into()));
    }
    let (lo, hi) = table.h_range();
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    let mut dropped = 0usize;
    for s in &traj.states {
        let h = model.hamiltonian(&s.phase);
        if h < lo || h > hi {
            dropped += 1;
            continue;
        }
        let i = (((h - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    let kept: u64 = counts.iter().sum();
    if kept == 0 {
        return Err(NhError::InvalidParameter(
            "no trajectory samples inside the table energy range".into(),
        ));
    }
    let empirical: Vec<f64> = counts.iter().map(|&c| c as f64 / kept as f64).collect();
    // Midpoint reference mass per bin, normalized across the range.
    let mut reference: Vec<f64> = (0..bins)
        .map(|i| {
            let mid = lo + (i as f64 + 0.5) * width;
            gibbs_energy_density(mid, table, beta).map(|rho| rho * width)
        })
        .collect::<Result<_>>()?;
    let z: f64 = reference.iter().sum();
    for r in &mut reference {
        *r /= z;
    }
    let total_variation = 0.5
        * empirical
            .iter()
            .zip(&reference)
            .map(|(e, r)| (e - r).abs())
            .sum::<f64>();
    let bin_edges = (0..=bins).map(|i| lo + i as f64 * width).collect();
    Ok(EnergyHistogram {
        bin_edges,
        empirical,
        reference,
        total_variation,
        dropped_samples: dropped,
    })
}

/// Outcome of one self-check property.
#[derive(Debug, Clone)]
pub struct PropertyResult {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    /// When true the value must stay below the threshold, otherwise above.
    pub upper_bound: bool,
}

impl PropertyResult {
    pub fn passed(&self) -> bool {
        if self.upper_bound {
            self.value <= self.threshold
        } else {
            self.value >= self.threshold
        }
    }
}

/// The deterministic self-check battery behind the `check` subcommand.
pub fn property_report() -> Result<Vec<PropertyResult>> {
    let mut out = Vec::new();
    let kinds = [
        ModelKind::Harmonic1d,
        ModelKind::Pendulum1d,
        ModelKind::CentralForce2d,
    ];

    // Time reversibility of the thermostatted step.
    let mut rev_err: f64 = 0.0;
    for kind in kinds {
        let m = ModelSpec::new(kind, 1.0, 1.0)?;
        for pt in splitmix_points(23, 25, 5) {
            let s = ThermostatState::new_2d(
                [pt[0], if m.dim() == 2 { pt[1] } else { 0.0 }],
                [pt[2], if m.dim() == 2 { pt[3] } else { 0.0 }],
                pt[4],
            );
            let back = nh_step(&m, &nh_step(&m, &s, 0.05), -0.05);
            for (a, b) in [
                (back.phase.q[0], s.phase.q[0]),
                (back.phase.q[1], s.phase.q[1]),
                (back.phase.p[0], s.phase.p[0]),
                (back.phase.p[1], s.phase.p[1]),
                (back.xi, s.xi),
            ] {
                rev_err = rev_err.max((a - b).abs());
            }
        }
    }
    out.push(PropertyResult {
        name: "nh_step_reversibility".into(),
        value: rev_err,
        threshold: 1e-12,
        upper_bound: true,
    });

    // Stationarity of the extended canonical density, and its sensitivity
    // to a wrong temperature.
    let mut max_div: f64 = 0.0;
    let mut min_separated = usize::MAX;
    for kind in kinds {
        let m = ModelSpec::new(kind, 1.0, 1.0)?;
        let mut separated = 0;
        for pt in splitmix_points(43, 100, 5) {
            let s = ThermostatState::new_2d(
                [0.8 * pt[0], if m.dim() == 2 { 0.8 * pt[1] } else { 0.0 }],
                [0.8 * pt[2], if m.dim() == 2 { 0.8 * pt[3] } else { 0.0 }],
                (0.2 + 0.8 * pt[4].abs()) * pt[4].signum(),
            );
            max_div = max_div.max(measure_divergence(&m, &s).abs());
            if measure_divergence_with_rho_beta(&m, &s, 2.0).abs() > 1e-6 {
                separated += 1;
            }
        }
        min_separated = min_separated.min(separated);
    }
    out.push(PropertyResult {
        name: "invariant_measure_divergence".into(),
        value: max_div,
        threshold: 1e-6,
        upper_bound: true,
    });
    out.push(PropertyResult {
        name: "perturbed_density_detected_of_100".into(),
        value: min_separated as f64,
        threshold: 95.0,
        upper_bound: false,
    });

    // Exact-symplectic loop-integral identity on the period-1 chart.
    let mut s_err: f64 = 0.0;
    for a in [0.5, 2.0 * std::f64::consts::PI, 10.0] {
        let amp = (a / std::f64::consts::PI).sqrt();
        let integral = integrate_256(0.0, 1.0, |theta| {
            let angle = 2.0 * std::f64::consts::PI * theta;
            (-amp * 2.0 * std::f64::consts::PI * angle.sin()) * (-amp * angle.sin())
        });
        s_err = s_err.max((integral - a).abs() / a.max(1.0));
    }
    out.push(PropertyResult {
        name: "loop_integral_identity".into(),
        value: s_err,
        threshold: 1e-10,
        upper_bound: true,
    });

    // Harmonic-oscillator closed forms.
    let harmonic = ModelSpec::new(ModelKind::Harmonic1d, 1.0, 1.0)?;
    let grid: Vec<f64> = (1..=120).map(|i| 0.05 * i as f64).collect();
    let h_table = build_action_table(&harmonic, &grid)?;
    let mut a_err: f64 = 0.0;
    for e in h_table.entries() {
        a_err = a_err.max((e.action / (2.0 * std::f64::consts::PI * e.h) - 1.0).abs());
    }
    out.push(PropertyResult {
        name: "harmonic_action_closed_form".into(),
        value: a_err,
        threshold: 1e-8,
        upper_bound: true,
    });
    let w = WFunction::new(&h_table, 1.0, 1)?;
    let mins = w.minimizers();
    let min_err = if mins.len() == 1 {
        (mins[0] - 2.0 * std::f64::consts::PI).abs()
    } else {
        f64::INFINITY
    };
    out.push(PropertyResult {
        name: "harmonic_w_minimizer".into(),
        value: min_err,
        threshold: 1e-6,
        upper_bound: true,
    });

    // Cross-route agreement of the kinetic moment at a few pendulum levels.
    let pendulum = ModelSpec::new(ModelKind::Pendulum1d, 1.0, 1.0)?;
    let mut k0_err: f64 = 0.0;
    for h in [-0.5, 0.125, 0.5, 1.5] {
        let avg = k0_time_average(&pendulum, h, None, 1e4)?;
        let comps = if h > 1.0 { 2.0 } else { 1.0 };
        let quad = action_1d(&pendulum, h)? / comps / orbit_period(&pendulum, h, None)?;
        k0_err = k0_err.max((avg - quad).abs());
    }
    out.push(PropertyResult {
        name: "kinetic_moment_cross_route".into(),
        value: k0_err,
        threshold: 1e-3,
        upper_bound: true,
    });

    // CSV round-trip stability.
    let text = csv::format_rows(&["a", "b"], &[vec![0.1, 2.0], vec![-3.5e-9, 7.25]]);
    let (hdr, rows) = csv::parse(&text)?;
    let again = csv::format_rows(
        &hdr.iter().map(String::as_str).collect::<Vec<_>>(),
        &rows,
    );
    out.push(PropertyResult {
        name: "csv_roundtrip_identical".into(),
        value: if text == again { 0.0 } else { 1.0 },
        threshold: 0.5,
        upper_bound: true,
    });

    Ok(out)
}

struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    fn new(cfg: &ExperimentConfig) -> Self {
        let mut m = Manifest {
            entries: Vec::new(),
        };
        m.put("experiment", cfg.id.name());
        m.put("paper_scale", if cfg.paper_scale { "true" } else { "false" });
        m
    }

    fn put(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    fn put_model(&mut self, model: &ModelSpec) {
        self.put("model", model.kind.name());
        self.put("beta", model.beta);
        self.put("Q", model.thermostat_mass);
    }

    fn put_init(&mut self, s: &ThermostatState, dim: usize) {
        let fields: Vec<String> = s.phase.q[..dim]
            .iter()
            .chain(s.phase.p[..dim].iter())
            .chain(std::iter::once(&s.xi))
            .map(|v| v.to_string())
            .collect();
        self.put("init", fields.join(","));
    }

    fn write(&self, dir: &Path, files: &[PathBuf]) -> Result<PathBuf> {
        let mut text = String::new();
        for (k, v) in &self.entries {
            text.push_str(&format!("{k} = {v}\n"));
        }
        for f in files {
            let name = f.file_name().unwrap_or_default().to_string_lossy();
            text.push_str(&format!("file = {name}\n"));
        }
        let path = dir.join("manifest.txt");
        std::fs::write(&path, text)?;
        Ok(path)
    }
}

fn central_model(cfg: &ExperimentConfig, default_q: f64) -> Result<ModelSpec> {
    ModelSpec::new(
        ModelKind::CentralForce2d,
        cfg.overrides.beta.unwrap_or(1.0),
        cfg.overrides.thermostat_mass.unwrap_or(default_q),
    )
}

fn pendulum_model(cfg: &ExperimentConfig, default_q: f64) -> Result<ModelSpec> {
    ModelSpec::new(
        ModelKind::Pendulum1d,
        cfg.overrides.beta.unwrap_or(1.0),
        cfg.overrides.thermostat_mass.unwrap_or(default_q),
    )
}

fn horizon(cfg: &ExperimentConfig, desk: f64, paper: f64) -> f64 {
    cfg.overrides
        .t_final
        .unwrap_or(if cfg.paper_scale { paper } else { desk })
}

/// The reference planar initial condition with L = 0.75, H = 2.5625.
pub fn central_reference_init() -> ThermostatState {
    ThermostatState::new_2d([0.0, 0.5], [-1.5, 1.5], 0.0)
}

/// The planar initial condition on the invariant set L = 0, H = 1.75.
pub fn central_l0_init() -> ThermostatState {
    ThermostatState::new_2d([-0.5, 0.5], [-1.0, 1.0], 0.0)
}

/// Pendulum initial condition with the given energy, started on the section.
pub fn pendulum_init_at_energy(h: f64) -> ThermostatState {
    ThermostatState::new_1d(0.0, (2.0 * (h + 1.0)).sqrt(), 0.0)
}

/// The three reference actions whose orbits the section maps trace.
pub const SECTION_REFERENCE_ACTIONS: [f64; 3] = [7.72, 10.72, 13.6];

fn nh_run(
    model: &ModelSpec,
    init: ThermostatState,
    dt: f64,
    t_final: f64,
    stride: usize,
) -> Result<Trajectory<ThermostatState>> {
    let stepper = NoseHoover { model };
    let cfg = IntegratorConfig::new(dt, t_final, stride)?;
    integrate(&stepper, init, &cfg, |_, _| {})
}

fn sample_stride(dt: f64, t_final: f64, target_rows: usize) -> usize {
    (((t_final / dt) as usize) / target_rows).max(1)
}

fn invariant_drift_experiment(cfg: &ExperimentConfig, q_mass: f64) -> Result<Vec<PathBuf>> {
    let model = central_model(cfg, q_mass)?;
    let dt = cfg.overrides.dt.unwrap_or(1e-3);
    let t_final = horizon(cfg, 5e3, 5e4);
    let init = central_reference_init();
    let traj = nh_run(&model, init, dt, t_final, sample_stride(dt, t_final, 5000))?;
    let ang = |p: &crate::models::PhaseState| model.angular_momentum(p).unwrap();
    let g0 = homogeneous_invariant(&model, &init, ang, 1.0)?;
    let g1_0 = g1(&model, &init.phase)?;
    let rows: Vec<Vec<f64>> = traj
        .iter()
        .map(|(t, s)| -> Result<Vec<f64>> {
            let g = homogeneous_invariant(&model, s, ang, 1.0)?;
            let g1v = g1(&model, &s.phase)?;
            Ok(vec![t, g / g0, g1v / g1_0])
        })
        .collect::<Result<_>>()?;
    let path = cfg.out_dir.join(format!("{}.csv", cfg.id.name()));
    csv::write_rows(&path, &["t", "g_rel", "g1_rel"], &rows)?;
    let mut man = Manifest::new(cfg);
    man.put_model(&model);
    man.put("dt", dt);
    man.put("t_final", t_final);
    man.put_init(&init, 2);
    let manifest = man.write(&cfg.out_dir, std::slice::from_ref(&path))?;
    Ok(vec![path, manifest])
}

fn kinetic_moment_experiment(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let beta = cfg.overrides.beta.unwrap_or(1.0);
    let tables = canonical_central_tables(beta)?;
    let sample_rows: Vec<Vec<f64>> = tables
        .samples
        .iter()
        .map(|s| vec![s.h, s.l, s.k0])
        .collect();
    let samples_path = cfg.out_dir.join("fig3.csv");
    csv::write_rows(&samples_path, &["h", "l", "k0"], &sample_rows)?;
    let app_rows: Vec<Vec<f64>> = tables
        .k0app
        .xs()
        .iter()
        .zip(tables.k0app.ys())
        .map(|(&h, &k)| vec![h, k])
        .collect();
    let app_path = cfg.out_dir.join("fig3_k0app.csv");
    csv::write_rows(&app_path, &["h", "k0app"], &app_rows)?;
    let mut man = Manifest::new(cfg);
    man.put("model", "centralforce");
    man.put("beta", beta);
    man.put("l_samples", CENTRAL_L_SAMPLES);
    man.put("k0_horizon", CENTRAL_K0_HORIZON);
    let manifest = man.write(&cfg.out_dir, &[samples_path.clone(), app_path.clone()])?;
    Ok(vec![samples_path, app_path, manifest])
}

fn e1_band_experiment(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let beta = cfg.overrides.beta.unwrap_or(1.0);
    let tables = canonical_central_tables(beta)?;
    let dt = cfg.overrides.dt.unwrap_or(1e-3);
    let t_final = horizon(cfg, 5e3, 5e4);
    let init = central_reference_init();
    let mut files = Vec::new();
    let mut man = Manifest::new(cfg);
    for q_mass in [1.0, 100.0] {
        let model = ModelSpec::new(ModelKind::CentralForce2d, beta, q_mass)?;
        let traj = nh_run(&model, init, dt, t_final, sample_stride(dt, t_final, 5000))?;
        let (e1_0, _) = e1_e2(&model, &init, &tables.k0app)?;
        let e1_0 = e1_0.ok_or(NhError::ZeroAngularMomentum)?;
        let rows: Vec<Vec<f64>> = traj
            .iter()
            .map(|(t, s)| -> Result<Vec<f64>> {
                let (e1, _) = e1_e2(&model, s, &tables.k0app)?;
                Ok(vec![t, e1.ok_or(NhError::ZeroAngularMomentum)? / e1_0])
            })
            .collect::<Result<_>>()?;
        let path = cfg.out_dir.join(format!("fig4_Q{q_mass}.csv"));
        csv::write_rows(&path, &["t", "e1_rel"], &rows)?;
        files.push(path);
    }
    man.put("model", "centralforce");
    man.put("beta", beta);
    man.put("Q", "1,100");
    man.put("dt", dt);
    man.put("t_final", t_final);
    man.put_init(&init, 2);
    let manifest = man.write(&cfg.out_dir, &files)?;
    files.push(manifest);
    Ok(files)
}

fn e2_band_experiment(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let beta = cfg.overrides.beta.unwrap_or(1.0);
    let tables = canonical_central_tables(beta)?;
    let dt = cfg.overrides.dt.unwrap_or(1e-3);
    let t_final = horizon(cfg, 5e3, 5e4);
    let init = central_l0_init();
    let mut files = Vec::new();
    let mut man = Manifest::new(cfg);
    for q_mass in [1.0, 100.0] {
        let model = ModelSpec::new(ModelKind::CentralForce2d, beta, q_mass)?;
        let traj = nh_run(&model, init, dt, t_final, sample_stride(dt, t_final, 5000))?;
        let (_, e2_0) = e1_e2(&model, &init, &tables.k0app)?;
        let rows: Vec<Vec<f64>> = traj
            .iter()
            .map(|(t, s)| -> Result<Vec<f64>> {
                let (_, e2) = e1_e2(&model, s, &tables.k0app)?;
                Ok(vec![t, e2 / e2_0])
            })
            .collect::<Result<_>>()?;
        let path = cfg.out_dir.join(format!("fig5_Q{q_mass}.csv"));
        csv::write_rows(&path, &["t", "e2_rel"], &rows)?;
        files.push(path);
    }
    man.put("model", "centralforce");
    man.put("beta", beta);
    man.put("Q", "1,100");
    man.put("dt", dt);
    man.put("t_final", t_final);
    man.put_init(&init, 2);
    let manifest = man.write(&cfg.out_dir, &files)?;
    files.push(manifest);
    Ok(files)
}

fn l0_energy_experiment(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let model = central_model(cfg, 1.0)?;
    let dt = cfg.overrides.dt.unwrap_or(1e-3);
    let t_final = horizon(cfg, 5e3, 5e4);
    let init = central_l0_init();
    let traj = nh_run(&model, init, dt, t_final, sample_stride(dt, t_final, 5000))?;
    let rows: Vec<Vec<f64>> = traj
        .iter()
        .map(|(t, s)| vec![t, model.hamiltonian(&s.phase)])
        .collect();
    let path = cfg.out_dir.join("fig6.csv");
    csv::write_rows(&path, &["t", "h"], &rows)?;
    let mut man = Manifest::new(cfg);
    man.put_model(&model);
    man.put("dt", dt);
    man.put("t_final", t_final);
    man.put_init(&init, 2);
    let manifest = man.write(&cfg.out_dir, std::slice::from_ref(&path))?;
    Ok(vec![path, manifest])
}

fn action_table_experiment(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let beta = cfg.overrides.beta.unwrap_or(1.0);
    let table = canonical_pendulum_table(beta)?;
    let path = cfg.out_dir.join("fig8.csv");
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    std::fs::write(&path, buf)?;
    let mut man = Manifest::new(cfg);
    man.put("model", "pendulum");
    man.put("beta", beta);
    man.put("nodes", table.len());
    let manifest = man.write(&cfg.out_dir, std::slice::from_ref(&path))?;
    Ok(vec![path, manifest])
}

fn pendulum_well(beta: f64) -> Result<LogActionWell> {
    let table = canonical_pendulum_table(beta)?;
    let w = WFunction::new(&table, beta, 1)?;
    let mins = w.minimizers();
    let a0 = *mins.first().ok_or_else(|| {
        NhError::InvalidTable("the averaged potential has no local minimizer".into())
    })?;
    LogActionWell::new(w, a0)
}

fn averaged_orbits_experiment(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let beta = cfg.overrides.beta.unwrap_or(1.0);
    let well = pendulum_well(beta)?;
    let dt = cfg.overrides.dt.unwrap_or(1e-3);
    let t_final = cfg.overrides.t_final.unwrap_or(40.0);
    let steps = (t_final / dt) as usize;
    let stride = sample_stride(dt, t_final, 4000);
    let mut files = Vec::new();
    let mut man = Manifest::new(cfg);
    man.put("model", "pendulum (averaged)");
    man.put("beta", beta);
    man.put("a0_anchor", well.a0());
    man.put("dt", dt);
    man.put("t_final", t_final);
    for (idx, a_init) in SECTION_REFERENCE_ACTIONS.iter().enumerate() {
        let mut sigma = (a_init / well.a0()).ln();
        let mut alpha = 0.0;
        let mut rows = vec![vec![0.0, well.action_of_sigma(sigma), alpha]];
        for k in 1..=steps {
            let (s, a) = symplectic_euler_step(|x| well.u_prime(x), sigma, alpha, dt)?;
            sigma = s;
            alpha = a;
            if k % stride == 0 {
                rows.push(vec![k as f64 * dt, well.action_of_sigma(sigma), alpha]);
            }
        }
        let path = cfg.out_dir.join(format!("fig9_{}.csv", idx + 1));
        csv::write_rows(&path, &["t", "a", "alpha"], &rows)?;
        man.put(&format!("a_init_{}", idx + 1), *a_init);
        files.push(path);
    }
    let manifest = man.write(&cfg.out_dir, &files)?;
    files.push(manifest);
    Ok(files)
}

fn section_map_experiment(cfg: &ExperimentConfig, q_mass: f64) -> Result<Vec<PathBuf>> {
    let beta = cfg.overrides.beta.unwrap_or(1.0);
    let model = pendulum_model(cfg, q_mass)?;
    let table = canonical_pendulum_table(beta)?;
    let n_crossings = cfg.overrides.crossings.unwrap_or(2000);
    let dt = cfg.overrides.dt.unwrap_or(1e-3);
    let (h_lo, h_hi) = table.h_range();
    let mut files = Vec::new();
    let mut man = Manifest::new(cfg);
    man.put_model(&model);
    man.put("dt", dt);
    man.put("crossings", n_crossings);
    for (idx, a_init) in SECTION_REFERENCE_ACTIONS.iter().enumerate() {
        let h = table.h_of_action(*a_init)?;
        let init = pendulum_init_at_energy(h);
        let pc = PoincareConfig {
            n_crossings,
            dt,
            h_limits: Some((h_lo, h_hi)),
            ..Default::default()
        };
        let run = poincare_map(&model, &init, &pc)
            .map_err(|e| e.in_stage(&format!("section map from a = {a_init}")))?;
        let rows: Vec<Vec<f64>> = run
            .crossings
            .iter()
            .map(|c| vec![c.t, c.a, c.alpha, c.h])
            .collect();
        let path = cfg
            .out_dir
            .join(format!("{}_{}.csv", cfg.id.name(), idx + 1));
        csv::write_rows(&path, &["t", "a", "alpha", "h"], &rows)?;
        man.put(&format!("a_init_{}", idx + 1), *a_init);
        man.put(
            &format!("rejected_separatrix_{}", idx + 1),
            run.rejected_separatrix,
        );
        files.push(path);
    }
    let manifest = man.write(&cfg.out_dir, &files)?;
    files.push(manifest);
    Ok(files)
}

fn period_function_experiment(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let beta = cfg.overrides.beta.unwrap_or(1.0);
    let well = pendulum_well(beta)?;
    let grid = period_grid(&well, 50)?;
    let mut rows = Vec::with_capacity(grid.len());
    let mut iso_rows = Vec::with_capacity(grid.len());
    for (g, t1) in &grid {
        let t_return = period_t1_first_return(*g, &well)?;
        rows.push(vec![*g, *t1, t_return]);
        let (width, residual) = well_width_and_isochrony(*g, &well)?;
        iso_rows.push(vec![*g, width, residual]);
    }
    let path = cfg.out_dir.join("fig12.csv");
    csv::write_rows(&path, &["g", "t1", "t1_first_return"], &rows)?;
    let iso_path = cfg.out_dir.join("fig12_isochrony.csv");
    csv::write_rows(&iso_path, &["g", "well_width", "residual"], &iso_rows)?;
    let mut man = Manifest::new(cfg);
    man.put("model", "pendulum (averaged)");
    man.put("beta", beta);
    man.put("a0_anchor", well.a0());
    man.put("g0", well.g0());
    man.put("barrier", well.barrier());
    let manifest = man.write(&cfg.out_dir, &[path.clone(), iso_path.clone()])?;
    Ok(vec![path, iso_path, manifest])
}

fn energy_floor_experiment(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let model = pendulum_model(cfg, 1.0)?;
    let dt = cfg.overrides.dt.unwrap_or(1e-3);
    let t_final = horizon(cfg, 1e4, 5e5);
    let init = pendulum_init_at_energy(0.125);
    let stride = sample_stride(dt, t_final, 5000);
    let stepper = NoseHoover { model: &model };
    let icfg = IntegratorConfig::new(dt, t_final, stride)?;
    // Track the running minimum over every step, not only samples.
    let mut h_min = f64::INFINITY;
    let mut mins_at_samples = Vec::new();
    let mut step_count = 0u64;
    let traj = integrate(&stepper, init, &icfg, |_, s| {
        h_min = h_min.min(model.hamiltonian(&s.phase));
        if step_count % stride as u64 == 0 {
            mins_at_samples.push(h_min);
        }
        step_count += 1;
    })?;
    let rows: Vec<Vec<f64>> = traj
        .iter()
        .zip(&mins_at_samples)
        .map(|((t, s), &hm)| vec![t, model.hamiltonian(&s.phase), hm])
        .collect();
    let path = cfg.out_dir.join("fig13.csv");
    csv::write_rows(&path, &["t", "h", "h_min_so_far"], &rows)?;
    let mut man = Manifest::new(cfg);
    man.put_model(&model);
    man.put("dt", dt);
    man.put("t_final", t_final);
    man.put_init(&init, 1);
    man.put("h_min_final", h_min);
    let manifest = man.write(&cfg.out_dir, std::slice::from_ref(&path))?;
    Ok(vec![path, manifest])
}

fn histogram_experiment(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let beta = cfg.overrides.beta.unwrap_or(1.0);
    let model = pendulum_model(cfg, 1.0)?;
    let table = canonical_pendulum_table(beta)?;
    let dt = cfg.overrides.dt.unwrap_or(1e-3);
    let t_final = horizon(cfg, 1e4, 5e5);
    let bins = cfg.overrides.bins.unwrap_or(59);
    let init = pendulum_init_at_energy(0.125);
    let traj = nh_run(&model, init, dt, t_final, 100)?;
    let hist = energy_histogram(&model, &traj, bins, &table, beta)?;
    let rows: Vec<Vec<f64>> = (0..bins)
        .map(|i| {
            vec![
                hist.bin_edges[i],
                hist.bin_edges[i + 1],
                hist.empirical[i],
                hist.reference[i],
            ]
        })
        .collect();
    let path = cfg.out_dir.join("histogram.csv");
    csv::write_rows(&path, &["bin_lo", "bin_hi", "empirical", "reference"], &rows)?;
    let mut man = Manifest::new(cfg);
    man.put_model(&model);
    man.put("dt", dt);
    man.put("t_final", t_final);
    man.put_init(&init, 1);
    man.put("bins", bins);
    man.put("total_variation", hist.total_variation);
    man.put("dropped_samples", hist.dropped_samples);
    let manifest = man.write(&cfg.out_dir, std::slice::from_ref(&path))?;
    Ok(vec![path, manifest])
}

fn properties_experiment(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let report = property_report()?;
    let mut text = String::from("name,value,threshold,pass\n");
    for r in &report {
        text.push_str(&format!(
            "{},{},{},{}\n",
            r.name,
            r.value,
            r.threshold,
            if r.passed() { 1 } else { 0 }
        ));
    }
    let path = cfg.out_dir.join("properties.csv");
    std::fs::write(&path, text)?;
    let mut man = Manifest::new(cfg);
    man.put(
        "all_passed",
        report.iter().all(PropertyResult::passed),
    );
    let manifest = man.write(&cfg.out_dir, std::slice::from_ref(&path))?;
    Ok(vec![path, manifest])
}

/// Run one experiment, writing its CSV files and manifest under the
/// configured output directory. Returns the written paths.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    let stage = cfg.id.name();
    let result = match cfg.id {
        ExperimentId::Fig1 => invariant_drift_experiment(cfg, 100.0),
        ExperimentId::Fig2 => invariant_drift_experiment(cfg, 1.0),
        ExperimentId::Fig3 => kinetic_moment_experiment(cfg),
        ExperimentId::Fig4 => e1_band_experiment(cfg),
        ExperimentId::Fig5 => e2_band_experiment(cfg),
        ExperimentId::Fig6 => l0_energy_experiment(cfg),
        ExperimentId::Fig8 => action_table_experiment(cfg),
        ExperimentId::Fig9 => averaged_orbits_experiment(cfg),
        ExperimentId::Fig10 => section_map_experiment(cfg, 1e5),
        ExperimentId::Fig11 => section_map_experiment(cfg, 1.0),
        ExperimentId::Fig12 => period_function_experiment(cfg),
        ExperimentId::Fig13 => energy_floor_experiment(cfg),
        ExperimentId::Histogram => histogram_experiment(cfg),
        ExperimentId::Properties => properties_experiment(cfg),
    };
    result.map_err(|e| e.in_stage(stage))
}

/// Emit a gnuplot-style command file referencing the CSVs of an experiment
/// directory. Plotting itself stays outside the tool.
pub fn write_plot_script(dir: &Path, files: &[PathBuf]) -> Result<PathBuf> {
    let mut text = String::from("set datafile separator ','\nset key autotitle columnhead\n");
    for f in files {
        let name = f.file_name().unwrap_or_default().to_string_lossy();
        if name.ends_with(".csv") {
            text.push_str(&format!("# plot '{name}' using 1:2 with lines\n"));
        }
    }
    let path = dir.join("plot.gp");
    std::fs::write(&path, text)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrators::VelocityVerlet;

    fn tmpdir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("nhdyn-test-{tag}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn experiment_ids_roundtrip() {
        for id in ExperimentId::ALL {
            let back: ExperimentId = id.name().parse().unwrap();
            assert_eq!(back, id);
        }
        assert!("fig7".parse::<ExperimentId>().is_err());
    }

    #[test]
    fn csv_parse_and_reemit_is_identity() {
        let text = csv::format_rows(
            &["t", "x"],
            &[vec![0.0, 1.5], vec![0.1, -2.25e-7], vec![0.2, 0.1 + 0.2]],
        );
        let (hdr, rows) = csv::parse(&text).unwrap();
        let again =
            csv::format_rows(&hdr.iter().map(String::as_str).collect::<Vec<_>>(), &rows);
        assert_eq!(text, again);
    }

    #[test]
    fn reruns_are_byte_identical() {
        let dir = tmpdir("determinism");
        let mut cfg = ExperimentConfig::new(ExperimentId::Fig1, dir.join("a"));
        cfg.overrides.t_final = Some(5.0);
        let files_a = run_experiment(&cfg).unwrap();
        let mut cfg_b = cfg.clone();
        cfg_b.out_dir = dir.join("b");
        let files_b = run_experiment(&cfg_b).unwrap();
        assert_eq!(files_a.len(), files_b.len());
        for (a, b) in files_a.iter().zip(&files_b) {
            let ca = std::fs::read(a).unwrap();
            let cb = std::fs::read(b).unwrap();
            assert_eq!(ca, cb, "{a:?} differs from {b:?}");
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn manifest_echoes_parameters() {
        let dir = tmpdir("manifest");
        let mut cfg = ExperimentConfig::new(ExperimentId::Fig6, &dir);
        cfg.overrides.t_final = Some(2.0);
        run_experiment(&cfg).unwrap();
        let text = std::fs::read_to_string(dir.join("manifest.txt")).unwrap();
        for key in ["experiment", "model", "beta", "Q", "dt", "t_final", "init", "file"] {
            assert!(text.contains(&format!("{key} = ")), "missing {key}: {text}");
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn histogram_constant_energy_occupies_one_bin() {
        let model = ModelSpec::new(ModelKind::Pendulum1d, 1.0, 1.0).unwrap();
        let table = build_action_table(
            &model,
            &(0..30).map(|i| -0.9 + 0.05 * i as f64).collect::<Vec<_>>(),
        )
        .unwrap();
        let stepper = VelocityVerlet { model: &model };
        let cfg = IntegratorConfig::new(1e-3, 50.0, 10).unwrap();
        let phase = crate::models::PhaseState::new_1d(0.0, (2.0f64 * 1.125).sqrt());
        let traj = integrate(&stepper, phase, &cfg, |_, _| {}).unwrap();
        let wrapped = Trajectory {
            times: traj.times.clone(),
            states: traj
                .states
                .iter()
                .map(|p| ThermostatState { phase: *p, xi: 0.0 })
                .collect(),
        };
        let hist = energy_histogram(&model, &wrapped, 28, &table, 1.0).unwrap();
        let occupied = hist.empirical.iter().filter(|&&e| e > 0.0).count();
        assert_eq!(occupied, 1);
        let total: f64 = hist.empirical.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let ref_total: f64 = hist.reference.iter().sum();
        assert!((ref_total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn property_battery_passes() {
        for r in property_report().unwrap() {
            assert!(
                r.passed(),
                "property {} failed: value {} vs threshold {}",
                r.name,
                r.value,
                r.threshold
            );
        }
    }
}
