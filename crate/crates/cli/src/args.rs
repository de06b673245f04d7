use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Clone, Parser, Serialize)]
#[command(
    name = "mms-lab",
    version,
    about = "Experiments on finite metric measure spaces"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

/// Flags shared by every verb.
#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Report path; stdout when absent.
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    /// Write the tabular section as CSV instead of the JSON report.
    #[arg(long, global = true)]
    pub csv: bool,
    /// Exit with status 2 when a verdict is inconclusive.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Seed for randomized instances.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "group", content = "verb", rename_all = "lowercase")]
pub enum Command {
    /// Build and check spaces.
    #[command(subcommand)]
    Space(SpaceCmd),
    /// Optimal transport.
    #[command(subcommand)]
    Ot(OtCmd),
    /// Measure contraction.
    #[command(subcommand)]
    Mcp(McpCmd),
    /// Isometries and fixed sets.
    #[command(subcommand)]
    Iso(IsoCmd),
    /// Gromov-Hausdorff distances and regular points.
    #[command(subcommand)]
    Gh(GhCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Segment,
    Circle,
    Earring,
    Necklace,
    Ball,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Segment => "segment",
            Self::Circle => "circle",
            Self::Earring => "earring",
            Self::Necklace => "necklace",
            Self::Ball => "ball",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(transparent)]
pub struct SpaceArg {
    /// Space file in the JSON space format.
    #[arg(long)]
    pub space: PathBuf,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "verb", rename_all = "kebab-case")]
pub enum SpaceCmd {
    Gen {
        #[arg(long, value_enum)]
        kind: Kind,
        /// Generator parameters as a JSON object.
        #[arg(long)]
        params: String,
        #[arg(long)]
        out: PathBuf,
    },
    Validate {
        #[command(flatten)]
        space: SpaceArg,
    },
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OtArgs {
    #[command(flatten)]
    pub space: SpaceArg,
    /// Measure as inline JSON or a file path.
    #[arg(long)]
    pub mu0: String,
    #[arg(long)]
    pub mu1: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantArg {
    Point,
    Ball,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "verb", rename_all = "kebab-case")]
pub enum OtCmd {
    Solve(OtArgs),
    Probe {
        #[command(flatten)]
        ot: OtArgs,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Symmetrized competitor of the optimal plan from A to a target split between x and f(x).
    Competitor {
        #[command(flatten)]
        space: SpaceArg,
        /// Isometry as a permutation (inline JSON or file).
        #[arg(long)]
        f: String,
        /// Cell selector for A.
        #[arg(long = "A")]
        a: String,
        #[arg(long)]
        x: usize,
        #[arg(long, value_enum, default_value_t = VariantArg::Point)]
        variant: VariantArg,
        /// Radius for the ball variant.
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanKind {
    Auto,
    Schedule,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Samples {
    /// Chebyshev samples of t in [0,1].
    #[arg(long, default_value_t = mms_lab::contraction::DEFAULT_T_SAMPLES)]
    pub t_samples: usize,
    /// Absolute slack allowance in mass units.
    #[arg(long, default_value_t = 0.0)]
    pub allowance: f64,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "verb", rename_all = "kebab-case")]
pub enum McpCmd {
    Verify {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long)]
        x: usize,
        #[arg(long = "A")]
        a: String,
        #[arg(long, value_enum, default_value_t = PlanKind::Auto)]
        plan: PlanKind,
        #[command(flatten)]
        samples: Samples,
    },
    /// Fiberwise density check of the necklace schedule from z to A.
    Schedule {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long)]
        z: usize,
        #[arg(long = "A")]
        a: String,
        #[command(flatten)]
        samples: Samples,
    },
    ScalarBound {
        #[arg(long, default_value_t = 1001)]
        t_grid: usize,
        #[arg(long, default_value_t = 1001)]
        d_grid: usize,
    },
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct IsoTols {
    #[arg(long, default_value_t = mms_lab::symmetry::DEFAULT_ISO_TOL)]
    pub iso_tol: f64,
    /// Search node budget for enumeration.
    #[arg(long, default_value_t = 1 << 22)]
    pub budget: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GroupArg {
    /// Generator permutations (inline JSON or files); all enumerated isometries when absent.
    #[arg(long = "gen")]
    pub gens: Vec<String>,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "verb", rename_all = "kebab-case")]
pub enum IsoCmd {
    Enum {
        #[command(flatten)]
        space: SpaceArg,
        #[command(flatten)]
        tols: IsoTols,
    },
    /// Fixed sets of one permutation, or of every enumerated isometry.
    Fix {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long)]
        g: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        fix_tol: f64,
        /// With --big-n, also test the large-fixed-set implication at this point.
        #[arg(long)]
        x: Option<usize>,
        #[arg(long)]
        big_n: Option<u32>,
        #[command(flatten)]
        tols: IsoTols,
    },
    Displacement {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long)]
        x: usize,
        #[arg(long)]
        r: f64,
        #[command(flatten)]
        group: GroupArg,
        #[command(flatten)]
        tols: IsoTols,
    },
    ConditionA {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long)]
        x: usize,
        #[arg(long)]
        s: f64,
        #[arg(long, default_value_t = 0.0)]
        fix_tol: f64,
        #[command(flatten)]
        tols: IsoTols,
    },
    /// Nontrivial subgroup moving the selected cells by less than eps.
    Probe {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long)]
        eps: f64,
        /// Cell selector for the compact set.
        #[arg(long, default_value = "all")]
        k: String,
        #[command(flatten)]
        tols: IsoTols,
    },
    /// Power escape of random Euclidean isometries close to the identity.
    Escape {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0.01)]
        max_angle: f64,
        #[arg(long, default_value_t = 0.005)]
        max_shift: f64,
        #[arg(long, default_value_t = 0.05)]
        threshold: f64,
        #[arg(long, default_value_t = 1_000_000)]
        max_pow: u64,
    },
    CriticalScale {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long)]
        x: usize,
        #[arg(long)]
        lo: f64,
        #[arg(long)]
        hi: f64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[command(flatten)]
        group: GroupArg,
        #[command(flatten)]
        tols: IsoTols,
    },
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScanArgs {
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub delta: f64,
    /// Model dimensions, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    pub k: Vec<usize>,
    #[arg(long, default_value_t = 12)]
    pub r_samples: usize,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "verb", rename_all = "kebab-case")]
pub enum GhCmd {
    Exact {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long)]
        space2: PathBuf,
    },
    Scan {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long)]
        x: usize,
        #[command(flatten)]
        scan: ScanArgs,
    },
    RegularMass {
        #[command(flatten)]
        space: SpaceArg,
        #[command(flatten)]
        scan: ScanArgs,
        /// Largest number of points scanned.
        #[arg(long, default_value_t = 64)]
        budget: usize,
    },
}
