//! Command-line surface. Every flag is long-form; the flags shared by the
//! experiment commands mirror the keys of the config file.

use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use sigtail::asymptotics::Reparametrization;
use sigtail::NormKind;

use crate::config::{parse_list, parse_norm, parse_window, Overrides};
use crate::verify::Tier;

#[derive(Debug, Parser)]
#[command(name = "sigtail", version, about = "Signature tail-asymptotics experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug)]
pub struct List(pub Vec<f64>);

#[derive(Clone, Copy, Debug)]
pub struct WindowArg(pub usize, pub usize);

fn list(v: &str) -> Result<List, String> {
    parse_list(v).map(List)
}

fn window(v: &str) -> Result<WindowArg, String> {
    parse_window(v).map(|(a, b)| WindowArg(a, b))
}

/// Settings shared by the experiment commands.
#[derive(Clone, Debug, Default, Args)]
pub struct Common {
    /// Flat key=value file; flags given on the command line win.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory (falls back to the config file, then $SIGTAIL_OUT).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Path dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Interval start.
    #[arg(long)]
    pub s: Option<f64>,
    /// Interval end.
    #[arg(long)]
    pub t: Option<f64>,
    /// Dyadic depth of Brownian samples.
    #[arg(long)]
    pub k: Option<u32>,
    /// Truncation depth.
    #[arg(long = "N", value_name = "N")]
    pub depth: Option<usize>,
    /// Levels lo,hi over which a_n is maximized.
    #[arg(long, value_parser = window, value_name = "LO,HI")]
    pub window: Option<WindowArg>,
    /// L1_PROJ, L2_COORD, L1_OF_COORDS_UPPER or SAMPLED_DUAL_LOWER(m).
    #[arg(long, value_parser = parse_norm)]
    pub norm: Option<NormKind>,
    /// Normalization exponent.
    #[arg(long)]
    pub p: Option<f64>,
    /// Comma-separated λ values.
    #[arg(long, value_parser = list, value_name = "LIST")]
    pub lambda: Option<List>,
    /// Comma-separated μ values.
    #[arg(long, value_parser = list, value_name = "LIST")]
    pub mu: Option<List>,
    /// Number of trials.
    #[arg(long = "M", value_name = "M")]
    pub trials: Option<usize>,
    /// Overrides the global lower slack factor. Discouraged.
    #[arg(long)]
    pub slack_lower: Option<f64>,
    /// Overrides the global upper slack factor. Discouraged.
    #[arg(long)]
    pub slack_upper: Option<f64>,
}

impl Common {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            d: self.d,
            s: self.s,
            t: self.t,
            k: self.k,
            depth: self.depth,
            window: self.window.map(|w| (w.0, w.1)),
            norm: self.norm,
            p: self.p,
            lambdas: self.lambda.clone().map(|l| l.0),
            mus: self.mu.clone().map(|l| l.0),
            trials: self.trials,
            seed: self.seed,
            out: self.out.clone(),
            slack_lower: self.slack_lower,
            slack_upper: self.slack_upper,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReparamArg {
    Identity,
    Squared,
}

impl From<ReparamArg> for Reparametrization {
    fn from(r: ReparamArg) -> Self {
        match r {
            ReparamArg::Identity => Reparametrization::Identity,
            ReparamArg::Squared => Reparametrization::Squared,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Signature of a line, a path CSV or a Brownian sample.
    #[command(group(ArgGroup::new("input").required(true).args(["line", "brownian", "path"])))]
    Signature {
        /// Increment of a single straight chord, e.g. 1,0.
        #[arg(long, value_parser = list, value_name = "VECTOR")]
        line: Option<List>,
        /// Sample a Brownian path on [s, t] at dyadic depth k.
        #[arg(long)]
        brownian: bool,
        /// Path CSV with header t,x1,..,xd.
        #[arg(long, value_name = "FILE")]
        path: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Closed-form expected Brownian signature against Monte Carlo.
    ExpectedSignature {
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo word moments against their bounds.
    #[command(group(ArgGroup::new("choice").required(true).args(["words", "random_words"])))]
    Moments {
        /// Words with 1-based letters, e.g. 1-2-1,2-2.
        #[arg(long, value_name = "WORDS")]
        words: Option<String>,
        /// Draw this many random words instead.
        #[arg(long, value_name = "COUNT")]
        random_words: Option<usize>,
        /// Longest random word.
        #[arg(long, default_value_t = 8, requires = "random_words")]
        max_len: usize,
        /// Bound E sup |B^w| over [s, t] instead of the second moment at t.
        #[arg(long)]
        sup: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Hyperbolic development: triangle sweep, height decay or a path trace.
    #[command(group(ArgGroup::new("mode").required(true).args(["triangle_sweep", "height_decay", "develop"])))]
    Hyperbolic {
        /// Number of random triangles to test against the defect bound.
        #[arg(long, value_name = "COUNT")]
        triangle_sweep: Option<usize>,
        /// Empirical E[h^-μ] against its exponential bound for every λ, μ.
        #[arg(long)]
        height_decay: bool,
        /// Develop the path in FILE at every λ.
        #[arg(long, value_name = "FILE")]
        develop: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Windowed limsup estimates and the bound sandwich.
    Limsup {
        /// Estimate on this path CSV instead of Brownian samples.
        #[arg(long, value_name = "FILE")]
        path: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Dispersion of the estimate across samples and half-intervals.
    Concentration {
        #[command(flatten)]
        common: Common,
    },
    /// Estimates for the Itô signature and their sandwich.
    Ito {
        #[command(flatten)]
        common: Common,
    },
    /// Recovers a time change from the signature.
    RecoverSigma {
        #[arg(long, value_enum, default_value = "identity")]
        reparam: ReparamArg,
        /// Grid size on (0, 1].
        #[arg(long, default_value_t = 10)]
        points: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Runs every registered check of a tier and writes the manifest.
    Verify {
        #[arg(long, value_enum)]
        tier: Tier,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Config file; only `seed` and `out` apply since tiers pin everything else.
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Signature { .. } => "signature",
            Command::ExpectedSignature { .. } => "expected-signature",
            Command::Moments { .. } => "moments",
            Command::Hyperbolic { .. } => "hyperbolic",
            Command::Limsup { .. } => "limsup",
            Command::Concentration { .. } => "concentration",
            Command::Ito { .. } => "ito",
            Command::RecoverSigma { .. } => "recover-sigma",
            Command::Verify { .. } => "verify",
        }
    }
}
