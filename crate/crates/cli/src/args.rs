use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "morseflow", version, about = "Morse homology from gradient flows")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Serialize)]
pub struct Common {
    /// Scenario document (JSON).
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    /// Output directory; each subcommand writes into its own child directory.
    #[arg(long, global = true, env = "MORSEFLOW_OUT", default_value = "morseflow-out")]
    pub out: PathBuf,
    /// JSON document overriding any subset of the tolerances.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Recorded in the manifest; every algorithm is deterministic.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Locate and classify critical points.
    CriticalPoints,
    /// Integrate one trajectory of the scenario field.
    Flow(FlowArgs),
    /// Connecting orbits, signs and one-dimensional arc families.
    Moduli(ModuliArgs),
    /// The Morse chain complex.
    Complex,
    /// Integer homology, optionally of sublevel complexes.
    Homology(HomologyArgs),
    /// Inclination experiment on the planar model field.
    Inclination(InclinationArgs),
    /// Quadratic normalization residual near critical points.
    NormalForm(NormalFormArgs),
    /// Connection counts along a field homotopy.
    HomotopyCheck(HomotopyArgs),
    /// Aggregate earlier outputs into a bundle.
    Report(ReportArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct FlowArgs {
    /// Start point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub start: Vec<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub stop_level: Option<f64>,
    /// Ball center followed by its radius, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub stop_ball: Option<Vec<f64>>,
    #[arg(long)]
    pub t_max: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct ModuliArgs {
    #[arg(long)]
    pub source: Option<usize>,
    #[arg(long)]
    pub target: Option<usize>,
    #[arg(long)]
    pub sphere_count: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct HomologyArgs {
    /// Coefficients in the field with two elements.
    #[arg(long)]
    pub mod2: bool,
    /// Sublevel caps, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub levels: Vec<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct InclinationArgs {
    #[arg(long, default_value_t = 1.0)]
    pub alpha0: f64,
    #[arg(long, default_value_t = 2.0)]
    pub alpha1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, value_delimiter = ',')]
    pub r_list: Option<Vec<f64>>,
    /// Start points per axis.
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct NormalFormArgs {
    /// Critical point id; all points when omitted.
    #[arg(long)]
    pub point: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub per_axis: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct HomotopyArgs {
    /// Critical point id; the first index-one point when omitted.
    #[arg(long)]
    pub point: Option<usize>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub s_grid: Option<Vec<f64>>,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// Directory holding earlier outputs; defaults to the output directory.
    #[arg(long)]
    pub input: Option<PathBuf>,
}
