use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use funreg::operators::RegularizationScheme;

#[derive(Debug, Parser)]
#[command(name = "funreg", version, about = "Function-on-function linear regression by spectral cut")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a dataset from a scenario file.
    Simulate(SimulateArgs),
    /// Estimate the operator and write a model file.
    Fit(FitArgs),
    /// Predict output curves, optionally with confidence intervals.
    Predict(PredictArgs),
    /// Cross-validated risk curve over cut levels.
    SelectK(SelectKArgs),
    /// Monte Carlo prediction risk over a range of sample sizes.
    Rates(RatesArgs),
    /// Monte Carlo coverage of the confidence intervals.
    Coverage(CoverageArgs),
}

fn parse_scheme(s: &str) -> Result<RegularizationScheme, String> {
    s.parse().map_err(|e: funreg::Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Replaces the seed stored in the scenario.
    #[arg(long)]
    pub seed: u64,
    /// Directory receiving x.csv, y.csv and kernel.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("cut").required(true).args(["k", "cv"]))]
pub struct FitArgs {
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub y: PathBuf,
    #[arg(long)]
    pub k: Option<usize>,
    /// Choose k by cross-validation over 1..=k-max.
    #[arg(long, requires = "seed")]
    pub cv: bool,
    #[arg(long, default_value_t = 20)]
    pub k_max: usize,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// cut, ridge:ALPHA or tikhonov:ALPHA
    #[arg(long, default_value = "cut", value_parser = parse_scheme)]
    pub scheme: RegularizationScheme,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Curve file whose single row is the weight m of ∫ Y m.
    #[arg(long, conflicts_with = "ci_point")]
    pub ci: Option<PathBuf>,
    /// Interval for Y(t0).
    #[arg(long)]
    pub ci_point: Option<f64>,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
}

#[derive(Debug, Args)]
pub struct SelectKArgs {
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub y: PathBuf,
    /// Comma-separated cut levels; defaults to 1..=k-max.
    #[arg(long, value_delimiter = ',')]
    pub k_grid: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    pub k_max: usize,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value = "cut", value_parser = parse_scheme)]
    pub scheme: RegularizationScheme,
    /// CSV file with columns k,risk.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RatesArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Comma-separated sample sizes; defaults to the scenario's n.
    #[arg(long = "n", value_delimiter = ',')]
    pub n_values: Vec<usize>,
    /// Comma-separated fixed cut levels; defaults to the scenario's rule.
    #[arg(long = "k", value_delimiter = ',')]
    pub k_values: Vec<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.95])]
    pub level: Vec<f64>,
    /// Comma-separated evaluation points for pointwise intervals.
    #[arg(long, value_delimiter = ',', default_values_t = [0.5])]
    pub t0: Vec<f64>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn fit_needs_exactly_one_cut_rule() {
        let base = ["funreg", "fit", "--x", "a", "--y", "b", "--out", "m"];
        assert!(Cli::try_parse_from(base).is_err());
        assert!(Cli::try_parse_from(base.iter().chain(&["--k", "3", "--cv", "--seed", "1"])).is_err());
        assert!(Cli::try_parse_from(base.iter().chain(&["--cv"])).is_err());
        let ok = Cli::try_parse_from(base.iter().chain(&["--k", "3", "--scheme", "ridge:0.1"])).unwrap();
        match ok.command {
            Command::Fit(f) => assert_eq!(f.scheme, RegularizationScheme::Ridge { alpha: 0.1 }),
            other => panic!("{other:?}"),
        }
        assert!(Cli::try_parse_from(base.iter().chain(&["--k", "3", "--scheme", "ridge"])).is_err());
    }

    #[test]
    fn seed_is_mandatory_for_randomized_commands() {
        assert!(Cli::try_parse_from(["funreg", "simulate", "--scenario", "s", "--out", "d"]).is_err());
        assert!(Cli::try_parse_from(["funreg", "coverage", "--scenario", "s", "--out", "d"]).is_err());
        assert!(Cli::try_parse_from(["funreg", "select-k", "--x", "a", "--y", "b"]).is_err());
        let c = Cli::try_parse_from(["funreg", "rates", "--scenario", "s", "--out", "r", "--seed", "4", "--n", "10,20"])
            .unwrap();
        match c.command {
            Command::Rates(r) => assert_eq!(r.n_values, vec![10, 20]),
            other => panic!("{other:?}"),
        }
    }
}
