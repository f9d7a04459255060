//! Command-line front end: deterministic simulations, table construction,
//! averaged runs, section maps, the period function, figure experiments,
//! the energy histogram, and the self-check battery.
//!
//! A plain-text configuration file (`key = value`, one per line) can seed
//! any flag; explicit command-line flags override file values. Exit code 0
//! on success; on failure one machine-parsable line
//! `error[<category>]: <message>` goes to stderr.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nhdyn::actionlib::{build_action_table, build_action_table_2d, WFunction};
use nhdyn::averaged::LogActionWell;
use nhdyn::error::{NhError, Result};
use nhdyn::experiments::{
    self, canonical_pendulum_table, run_experiment, write_plot_script, ExperimentConfig,
    ExperimentId, Overrides,
};
use nhdyn::integrators::{integrate, IntegratorConfig, NoseHoover, VelocityVerlet};
use nhdyn::models::{ModelKind, ModelSpec, PhaseState, ThermostatState};
use nhdyn::poincare::{poincare_map, PoincareConfig};

#[derive(Parser)]
#[command(
    name = "nhdyn",
    about = "Thermostatted dynamics simulations and ergodicity diagnostics",
    version
)]
struct Cli {
    /// Plain-text configuration file (key = value per line); flags override.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct CommonArgs {
    /// Model kind: harmonic | pendulum | centralforce.
    #[arg(long)]
    model: Option<String>,

    /// Inverse temperature.
    #[arg(long)]
    beta: Option<f64>,

    /// Thermostat mass.
    #[arg(long = "Q", alias = "thermostat-mass")]
    q_mass: Option<f64>,

    /// Integration step.
    #[arg(long)]
    dt: Option<f64>,

    /// Integration horizon.
    #[arg(long = "t-final")]
    t_final: Option<f64>,

    /// Initial extended state: comma-separated q..,p..,xi (2N+1 values).
    #[arg(long)]
    init: Option<String>,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and write it as CSV.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Store every k-th step.
        #[arg(long)]
        stride: Option<usize>,
        /// Integration scheme: nh (thermostatted) | verlet (constant energy).
        #[arg(long)]
        scheme: Option<String>,
    },
    /// Build and write an action table.
    Table {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long = "h-min")]
        h_min: Option<f64>,
        #[arg(long = "h-max")]
        h_max: Option<f64>,
        /// Number of energy nodes (uniform grid when explicit bounds given).
        #[arg(long)]
        nodes: Option<usize>,
        /// Angular-momentum samples per energy (planar model only).
        #[arg(long = "l-samples")]
        l_samples: Option<usize>,
    },
    /// Integrate the averaged slow system from an initial action.
    Averaged {
        #[command(flatten)]
        common: CommonArgs,
        /// Initial action a(0).
        #[arg(long = "a-init")]
        a_init: Option<f64>,
        /// Initial rescaled thermostat momentum.
        #[arg(long = "alpha-init")]
        alpha_init: Option<f64>,
    },
    /// Compute the section return map of the thermostatted pendulum.
    Poincare {
        #[command(flatten)]
        common: CommonArgs,
        /// Initial action (alternative to --init).
        #[arg(long = "a-init")]
        a_init: Option<f64>,
        /// Number of crossings to collect.
        #[arg(long)]
        crossings: Option<usize>,
    },
    /// Tabulate the period function of the averaged well.
    Period {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of level-grid nodes.
        #[arg(long)]
        nodes: Option<usize>,
    },
    /// Reproduce one figure experiment (fig1..fig6, fig8..fig13, histogram,
    /// properties).
    Experiment {
        id: String,
        #[command(flatten)]
        common: CommonArgs,
        /// Use the long horizons of the original study.
        #[arg(long = "paper-scale")]
        paper_scale: bool,
        /// Also emit a gnuplot-style command file.
        #[arg(long = "plot-script")]
        plot_script: bool,
        #[arg(long)]
        crossings: Option<usize>,
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Energy histogram of a thermostatted pendulum run vs the canonical
    /// density.
    Histogram {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Run the self-check battery and exit nonzero on any failure.
    Check {
        #[command(flatten)]
        common: CommonArgs,
    },
}

/// key = value file, one pair per line; '#' starts a comment line.
struct FileConfig {
    map: BTreeMap<String, String>,
}

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        let mut map = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)?;
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    NhError::Config(format!(
                        "{}:{}: expected 'key = value', got '{line}'",
                        path.display(),
                        i + 1
                    ))
                })?;
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        Ok(FileConfig { map })
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                NhError::Config(format!("config key '{key}': cannot parse '{raw}'"))
            }),
        }
    }
}

fn pick<T: std::str::FromStr>(flag: Option<T>, file: &FileConfig, key: &str) -> Result<Option<T>> {
    match flag {
        Some(v) => Ok(Some(v)),
        None => file.get(key),
    }
}

fn require<T>(v: Option<T>, what: &str) -> Result<T> {
    v.ok_or_else(|| NhError::Config(format!("missing required parameter '{what}'")))
}

struct Resolved {
    model: ModelSpec,
    dt: f64,
    t_final: f64,
    init: Option<ThermostatState>,
    out: PathBuf,
}

fn resolve_common(common: &CommonArgs, file: &FileConfig, default_model: &str) -> Result<Resolved> {
    let kind: ModelKind = pick(common.model.clone(), file, "model")?
        .unwrap_or_else(|| default_model.to_string())
        .parse()?;
    let beta = pick(common.beta, file, "beta")?.unwrap_or(1.0);
    let q_mass = pick(common.q_mass, file, "q")?.unwrap_or(1.0);
    let model = ModelSpec::new(kind, beta, q_mass)?;
    let dt = pick(common.dt, file, "dt")?.unwrap_or(1e-3);
    let t_final = pick(common.t_final, file, "t_final")?.unwrap_or(100.0);
    let init = match pick(common.init.clone(), file, "init")? {
        Some(text) => Some(parse_init(&model, &text)?),
        None => None,
    };
    let out = pick(common.out.clone(), file, "out")?.unwrap_or_else(|| PathBuf::from("out"));
    Ok(Resolved {
        model,
        dt,
        t_final,
        init,
        out,
    })
}

fn parse_init(model: &ModelSpec, text: &str) -> Result<ThermostatState> {
    let vals: Vec<f64> = text
        .split(',')
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|_| NhError::Config(format!("bad init component '{f}'")))
        })
        .collect::<Result<_>>()?;
    let n = model.dim();
    if vals.len() != 2 * n + 1 {
        return Err(NhError::Config(format!(
            "init needs {} values (q..,p..,xi) for this model, got {}",
            2 * n + 1,
            vals.len()
        )));
    }
    let mut q = [0.0; 2];
    let mut p = [0.0; 2];
    q[..n].copy_from_slice(&vals[..n]);
    p[..n].copy_from_slice(&vals[n..2 * n]);
    Ok(ThermostatState {
        phase: PhaseState { q, p },
        xi: vals[2 * n],
    })
}

fn write_manifest(dir: &Path, entries: &[(&str, String)]) -> Result<()> {
    let mut text = String::new();
    for (k, v) in entries {
        text.push_str(&format!("{k} = {v}\n"));
    }
    std::fs::write(dir.join("manifest.txt"), text)?;
    Ok(())
}

fn cmd_simulate(
    common: &CommonArgs,
    stride: Option<usize>,
    scheme: Option<String>,
    file: &FileConfig,
) -> Result<()> {
    let r = resolve_common(common, file, "pendulum")?;
    let stride = pick(stride, file, "stride")?.unwrap_or(100);
    let scheme = pick(scheme, file, "scheme")?.unwrap_or_else(|| "nh".to_string());
    let init = require(r.init, "init")?;
    std::fs::create_dir_all(&r.out)?;
    let cfg = IntegratorConfig::new(r.dt, r.t_final, stride)?;
    let n = r.model.dim();

    let mut header = vec!["t".to_string()];
    for i in 0..n {
        header.push(format!("q{}", i + 1));
    }
    for i in 0..n {
        header.push(format!("p{}", i + 1));
    }
    header.push("xi".into());
    header.push("h".into());
    if n == 2 {
        header.push("l".into());
    }

    let mut rows = Vec::new();
    let mut push_row = |t: f64, s: &ThermostatState| {
        let mut row = vec![t];
        row.extend_from_slice(&s.phase.q[..n]);
        row.extend_from_slice(&s.phase.p[..n]);
        row.push(s.xi);
        row.push(r.model.hamiltonian(&s.phase));
        if n == 2 {
            row.push(r.model.angular_momentum(&s.phase).expect("planar"));
        }
        rows.push(row);
    };
    match scheme.as_str() {
        "nh" => {
            let stepper = NoseHoover { model: &r.model };
            let traj = integrate(&stepper, init, &cfg, |_, _| {})?;
            for (t, s) in traj.iter() {
                push_row(t, s);
            }
        }
        "verlet" => {
            let stepper = VelocityVerlet { model: &r.model };
            let traj = integrate(&stepper, init.phase, &cfg, |_, _| {})?;
            for (t, p) in traj.iter() {
                push_row(t, &ThermostatState { phase: *p, xi: init.xi });
            }
        }
        other => {
            return Err(NhError::Config(format!(
                "unknown scheme '{other}' (expected nh | verlet)"
            )))
        }
    }

    let path = r.out.join("trajectory.csv");
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    experiments::csv::write_rows(&path, &header_refs, &rows)?;
    write_manifest(
        &r.out,
        &[
            ("command", "simulate".into()),
            ("model", r.model.kind.to_string()),
            ("beta", r.model.beta.to_string()),
            ("Q", r.model.thermostat_mass.to_string()),
            ("dt", r.dt.to_string()),
            ("t_final", r.t_final.to_string()),
            ("stride", stride.to_string()),
            ("scheme", scheme),
            ("file", "trajectory.csv".into()),
        ],
    )?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_table(
    common: &CommonArgs,
    h_min: Option<f64>,
    h_max: Option<f64>,
    nodes: Option<usize>,
    l_samples: Option<usize>,
    file: &FileConfig,
) -> Result<()> {
    let r = resolve_common(common, file, "pendulum")?;
    std::fs::create_dir_all(&r.out)?;
    let h_min = pick(h_min, file, "h_min")?;
    let h_max = pick(h_max, file, "h_max")?;
    let nodes = pick(nodes, file, "nodes")?;
    let l_samples = pick(l_samples, file, "l_samples")?
        .unwrap_or(experiments::CENTRAL_L_SAMPLES);

    let grid: Vec<f64> = match (h_min, h_max) {
        (Some(lo), Some(hi)) => {
            let n = nodes.unwrap_or(40);
            (0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect()
        }
        _ => match r.model.kind {
            ModelKind::Pendulum1d => nhdyn::actionlib::canonical_pendulum_grid(),
            ModelKind::Harmonic1d => (1..=40).map(|i| 0.05 * i as f64).collect(),
            ModelKind::CentralForce2d => experiments::canonical_central_grid(),
        },
    };

    let table_path = r.out.join("table.csv");
    match r.model.kind {
        ModelKind::CentralForce2d => {
            let tables = build_action_table_2d(
                &r.model,
                &grid,
                l_samples,
                experiments::CENTRAL_K0_HORIZON,
            )?;
            let mut buf = Vec::new();
            tables.table.write_csv(&mut buf)?;
            std::fs::write(&table_path, buf)?;
            let rows: Vec<Vec<f64>> = tables
                .k0app
                .xs()
                .iter()
                .zip(tables.k0app.ys())
                .map(|(&h, &k)| vec![h, k])
                .collect();
            experiments::csv::write_rows(&r.out.join("k0app.csv"), &["h", "k0app"], &rows)?;
        }
        _ => {
            let table = build_action_table(&r.model, &grid)?;
            let mut buf = Vec::new();
            table.write_csv(&mut buf)?;
            std::fs::write(&table_path, buf)?;
        }
    }
    write_manifest(
        &r.out,
        &[
            ("command", "table".into()),
            ("model", r.model.kind.to_string()),
            ("beta", r.model.beta.to_string()),
            ("nodes", grid.len().to_string()),
            ("file", "table.csv".into()),
        ],
    )?;
    println!("{}", table_path.display());
    Ok(())
}

/// Pick the minimizer whose basin contains the requested initial action.
fn well_for_action(w: WFunction, a_init: f64, alpha_init: f64) -> Result<LogActionWell> {
    let minimizers = w.minimizers();
    if minimizers.is_empty() {
        return Err(NhError::InvalidTable(
            "the averaged potential has no local minimizer".into(),
        ));
    }
    let mut best: Option<LogActionWell> = None;
    for a0 in minimizers {
        let candidate = LogActionWell::new(w.clone(), a0)?;
        let g = 0.5 * alpha_init * alpha_init + candidate.u((a_init / a0).ln())?;
        if g < candidate.barrier() {
            let better = match &best {
                None => true,
                Some(b) => (a_init / a0).ln().abs() < (a_init / b.a0()).ln().abs(),
            };
            if better {
                best = Some(candidate);
            }
        }
    }
    best.ok_or_else(|| {
        NhError::InvalidParameter(format!(
            "initial action {a_init} is not confined by any well of the averaged potential"
        ))
    })
}

fn cmd_averaged(
    common: &CommonArgs,
    a_init: Option<f64>,
    alpha_init: Option<f64>,
    file: &FileConfig,
) -> Result<()> {
    let r = resolve_common(common, file, "pendulum")?;
    let a_init = require(pick(a_init, file, "a_init")?, "a-init")?;
    let alpha_init = pick(alpha_init, file, "alpha_init")?.unwrap_or(0.0);
    std::fs::create_dir_all(&r.out)?;
    let table = canonical_pendulum_table(r.model.beta)?;
    let w = WFunction::new(&table, r.model.beta, 1)?;
    let well = well_for_action(w, a_init, alpha_init)?;

    let mut sigma = (a_init / well.a0()).ln();
    let mut alpha = alpha_init;
    let steps = (r.t_final / r.dt) as usize;
    let stride = (steps / 5000).max(1);
    let mut rows = vec![vec![0.0, a_init, alpha]];
    for k in 1..=steps {
        let (s, a) = nhdyn::integrators::symplectic_euler_step(
            |x| well.u_prime(x),
            sigma,
            alpha,
            r.dt,
        )?;
        sigma = s;
        alpha = a;
        if k % stride == 0 {
            rows.push(vec![k as f64 * r.dt, well.action_of_sigma(sigma), alpha]);
        }
    }
    let path = r.out.join("averaged.csv");
    experiments::csv::write_rows(&path, &["t", "a", "alpha"], &rows)?;
    write_manifest(
        &r.out,
        &[
            ("command", "averaged".into()),
            ("beta", r.model.beta.to_string()),
            ("a_init", a_init.to_string()),
            ("alpha_init", alpha_init.to_string()),
            ("a0_anchor", well.a0().to_string()),
            ("dt", r.dt.to_string()),
            ("t_final", r.t_final.to_string()),
            ("file", "averaged.csv".into()),
        ],
    )?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_poincare(
    common: &CommonArgs,
    a_init: Option<f64>,
    crossings: Option<usize>,
    file: &FileConfig,
) -> Result<()> {
    let r = resolve_common(common, file, "pendulum")?;
    std::fs::create_dir_all(&r.out)?;
    let crossings = pick(crossings, file, "crossings")?.unwrap_or(2000);
    let table = canonical_pendulum_table(r.model.beta)?;
    let init = match (r.init, pick(a_init, file, "a_init")?) {
        (Some(init), _) => init,
        (None, Some(a)) => {
            let h = table.h_of_action(a)?;
            experiments::pendulum_init_at_energy(h)
        }
        (None, None) => {
            return Err(NhError::Config(
                "poincare needs either --init or --a-init".into(),
            ))
        }
    };
    let (h_lo, h_hi) = table.h_range();
    let cfg = PoincareConfig {
        n_crossings: crossings,
        dt: r.dt,
        h_limits: Some((h_lo, h_hi)),
        ..Default::default()
    };
    let run = poincare_map(&r.model, &init, &cfg)?;
    let rows: Vec<Vec<f64>> = run
        .crossings
        .iter()
        .map(|c| vec![c.t, c.a, c.alpha, c.h])
        .collect();
    let path = r.out.join("poincare.csv");
    experiments::csv::write_rows(&path, &["t", "a", "alpha", "h"], &rows)?;
    write_manifest(
        &r.out,
        &[
            ("command", "poincare".into()),
            ("beta", r.model.beta.to_string()),
            ("Q", r.model.thermostat_mass.to_string()),
            ("dt", r.dt.to_string()),
            ("crossings", crossings.to_string()),
            ("rejected_separatrix", run.rejected_separatrix.to_string()),
            ("file", "poincare.csv".into()),
        ],
    )?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_period(common: &CommonArgs, nodes: Option<usize>, file: &FileConfig) -> Result<()> {
    let r = resolve_common(common, file, "pendulum")?;
    std::fs::create_dir_all(&r.out)?;
    let nodes = pick(nodes, file, "nodes")?.unwrap_or(50);
    let table = canonical_pendulum_table(r.model.beta)?;
    let w = WFunction::new(&table, r.model.beta, 1)?;
    let mins = w.minimizers();
    let a0 = *mins.first().ok_or_else(|| {
        NhError::InvalidTable("the averaged potential has no local minimizer".into())
    })?;
    let well = LogActionWell::new(w, a0)?;
    let grid = nhdyn::averaged::period_grid(&well, nodes)?;
    let mut rows = Vec::with_capacity(grid.len());
    for (g, t1) in &grid {
        let t_ret = nhdyn::averaged::period_t1_first_return(*g, &well)?;
        let (width, residual) = nhdyn::averaged::well_width_and_isochrony(*g, &well)?;
        rows.push(vec![*g, *t1, t_ret, width, residual]);
    }
    let path = r.out.join("period.csv");
    experiments::csv::write_rows(
        &path,
        &["g", "t1", "t1_first_return", "well_width", "residual"],
        &rows,
    )?;
    write_manifest(
        &r.out,
        &[
            ("command", "period".into()),
            ("beta", r.model.beta.to_string()),
            ("a0_anchor", well.a0().to_string()),
            ("nodes", nodes.to_string()),
            ("file", "period.csv".into()),
        ],
    )?;
    println!("{}", path.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_experiment(
    id: &str,
    common: &CommonArgs,
    paper_scale: bool,
    plot_script: bool,
    crossings: Option<usize>,
    bins: Option<usize>,
    file: &FileConfig,
) -> Result<()> {
    let id: ExperimentId = id.parse()?;
    let out = pick(common.out.clone(), file, "out")?
        .unwrap_or_else(|| PathBuf::from("out").join(id.name()));
    let cfg = ExperimentConfig {
        id,
        out_dir: out,
        paper_scale: paper_scale || file.get::<bool>("paper_scale")?.unwrap_or(false),
        overrides: Overrides {
            beta: pick(common.beta, file, "beta")?,
            thermostat_mass: pick(common.q_mass, file, "q")?,
            dt: pick(common.dt, file, "dt")?,
            t_final: pick(common.t_final, file, "t_final")?,
            crossings: pick(crossings, file, "crossings")?,
            bins: pick(bins, file, "bins")?,
        },
    };
    let files = run_experiment(&cfg)?;
    if plot_script {
        write_plot_script(&cfg.out_dir, &files)?;
    }
    for f in &files {
        println!("{}", f.display());
    }
    Ok(())
}

fn cmd_histogram(common: &CommonArgs, bins: Option<usize>, file: &FileConfig) -> Result<()> {
    let out = pick(common.out.clone(), file, "out")?
        .unwrap_or_else(|| PathBuf::from("out").join("histogram"));
    let cfg = ExperimentConfig {
        id: ExperimentId::Histogram,
        out_dir: out,
        paper_scale: false,
        overrides: Overrides {
            beta: pick(common.beta, file, "beta")?,
            thermostat_mass: pick(common.q_mass, file, "q")?,
            dt: pick(common.dt, file, "dt")?,
            t_final: pick(common.t_final, file, "t_final")?,
            crossings: None,
            bins: pick(bins, file, "bins")?,
        },
    };
    for f in run_experiment(&cfg)? {
        println!("{}", f.display());
    }
    Ok(())
}

fn cmd_check(common: &CommonArgs, file: &FileConfig) -> Result<()> {
    let report = experiments::property_report()?;
    let mut all_ok = true;
    for r in &report {
        let status = if r.passed() { "PASS" } else { "FAIL" };
        println!(
            "{status}  {:<36} value {:>12.3e}  threshold {:>9.1e}",
            r.name, r.value, r.threshold
        );
        all_ok &= r.passed();
    }
    if let Some(out) = pick(common.out.clone(), file, "out")? {
        let cfg = ExperimentConfig::new(ExperimentId::Properties, out);
        run_experiment(&cfg)?;
    }
    if all_ok {
        Ok(())
    } else {
        Err(NhError::InvalidParameter(
            "one or more self-checks failed".into(),
        ))
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Simulate {
            common,
            stride,
            scheme,
        } => cmd_simulate(common, *stride, scheme.clone(), &file),
        Command::Table {
            common,
            h_min,
            h_max,
            nodes,
            l_samples,
        } => cmd_table(common, *h_min, *h_max, *nodes, *l_samples, &file),
        Command::Averaged {
            common,
            a_init,
            alpha_init,
        } => cmd_averaged(common, *a_init, *alpha_init, &file),
        Command::Poincare {
            common,
            a_init,
            crossings,
        } => cmd_poincare(common, *a_init, *crossings, &file),
        Command::Period { common, nodes } => cmd_period(common, *nodes, &file),
        Command::Experiment {
            id,
            common,
            paper_scale,
            plot_script,
            crossings,
            bins,
        } => cmd_experiment(
            id,
            common,
            *paper_scale,
            *plot_script,
            *crossings,
            *bins,
            &file,
        ),
        Command::Histogram { common, bins } => cmd_histogram(common, *bins, &file),
        Command::Check { common } => cmd_check(common, &file),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::FAILURE
        }
    }
}
