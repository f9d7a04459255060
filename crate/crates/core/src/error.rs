use thiserror::Error;

/// Errors produced by the simulation and diagnostics routines.
#[derive(Debug, Error)]
pub enum NhError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operation requires a two-dimensional model")]
    NotTwoDimensional,

    #[error("radius must be positive, got r = {0}")]
    NonpositiveRadius(f64),

    #[error("energy {h} outside valid range [{lo}, {hi}]")]
    EnergyOutOfRange { h: f64, lo: f64, hi: f64 },

    #[error("value {x} outside interpolation range [{lo}, {hi}]")]
    OutOfRange { x: f64, lo: f64, hi: f64 },

    #[error("energy {h} lies inside the excluded separatrix band |h - 1| < {half_width}")]
    SeparatrixBand { h: f64, half_width: f64 },

    #[error("angular momentum is zero")]
    ZeroAngularMomentum,

    #[error("first integral vanishes at the evaluation point")]
    ZeroFirstIntegral,

    #[error("no closed orbit at (h, L) = ({h}, {l})")]
    NoClosedOrbit { h: f64, l: f64 },

    #[error("interpolated kinetic moment must be positive, got {0}")]
    NonpositiveKineticMoment(f64),

    #[error("level value {g} does not bound a closed level curve (valid window ({lo}, {hi}))")]
    LevelOutOfWindow { g: f64, lo: f64, hi: f64 },

    #[error("state diverged at t = {t}")]
    Diverged { t: f64 },

    #[error(
        "time average did not converge: half-horizon {first} vs full-horizon {second} \
         (difference {diff}, tolerance {tol})"
    )]
    NonConvergence {
        first: f64,
        second: f64,
        diff: f64,
        tol: f64,
    },

    #[error("no section crossing within {max_steps} steps")]
    SectionStall { max_steps: u64 },

    #[error("no root bracketed on [{lo}, {hi}]")]
    NoRootBracketed { lo: f64, hi: f64 },

    #[error("invalid table: {0}")]
    InvalidTable(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<NhError>,
    },

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl NhError {
    /// Attach the name of the failing stage (used by the experiment runner).
    pub fn in_stage(self, stage: &str) -> NhError {
        NhError::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }

    /// Stable machine-parsable category for CLI exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            NhError::InvalidParameter(_) => "invalid-parameter",
            NhError::NotTwoDimensional => "dimension",
            NhError::NonpositiveRadius(_) => "invalid-parameter",
            NhError::EnergyOutOfRange { .. } => "out-of-range",
            NhError::OutOfRange { .. } => "out-of-range",
            NhError::SeparatrixBand { .. } => "separatrix",
            NhError::ZeroAngularMomentum => "singular",
            NhError::ZeroFirstIntegral => "singular",
            NhError::NoClosedOrbit { .. } => "no-closed-orbit",
            NhError::NonpositiveKineticMoment(_) => "invalid-table",
            NhError::LevelOutOfWindow { .. } => "out-of-range",
            NhError::Diverged { .. } => "diverged",
            NhError::NonConvergence { .. } => "non-convergence",
            NhError::SectionStall { .. } => "stall",
            NhError::NoRootBracketed { .. } => "root-finding",
            NhError::InvalidTable(_) => "invalid-table",
            NhError::Stage { source, .. } => source.category(),
            NhError::Config(_) => "config",
            NhError::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, NhError>;
