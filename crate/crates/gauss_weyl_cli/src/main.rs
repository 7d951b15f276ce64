//! `gauss-weyl`: batch driver for quantization, ladder convergence and the verification suite.

mod commands;
mod config;
mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use gauss_weyl::checks::Mutation;
use gauss_weyl::Result;
use serde_json::json;

use config::{Overrides, RunConfig};
use output::{Metadata, OutDir};

#[derive(Parser, Debug)]
#[command(name = "gauss-weyl", version, about = "Gaussian-measure Weyl calculus at finite truncation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    dim: Option<usize>,
    #[arg(long, global = true)]
    h: Option<f64>,
    /// Per-coordinate Hermite degree cap.
    #[arg(long, global = true)]
    degree: Option<usize>,
    /// Gauss-Hermite order per axis.
    #[arg(long, global = true)]
    order: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Check id or tag for `verify`.
    #[arg(long, global = true)]
    filter: Option<String>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Operator matrix of a symbol, with the oracle residual when one exists.
    Quantize,
    /// Dimension-ladder run with per-step bounds.
    Converge,
    /// Wick symbol of the Weyl operator against the heat-smoothed symbol.
    Wick,
    /// Wigner-Gauss transform of two functions on a grid.
    Wigner,
    /// Heat semigroup: closed form against quadrature.
    Heat,
    /// Monte Carlo: Brownian ensembles or lattice norm probabilities.
    Mc,
    /// Runs the invariant suite.
    Verify {
        /// Inject a fault; a sound suite then reports failures.
        #[arg(long, value_enum)]
        mutation: Option<MutationArg>,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum MutationArg {
    SignFlip,
    Eps,
}

impl Cmd {
    fn name(self) -> &'static str {
        match self {
            Cmd::Quantize => "quantize",
            Cmd::Converge => "converge",
            Cmd::Wick => "wick",
            Cmd::Wigner => "wigner",
            Cmd::Heat => "heat",
            Cmd::Mc => "mc",
            Cmd::Verify { .. } => "verify",
        }
    }
}

fn execute(cli: Cli) -> Result<i32> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides {
        dim: cli.dim,
        h: cli.h,
        degree: cli.degree,
        order: cli.order,
        seed: cli.seed,
        out: cli.out.clone(),
        filter: cli.filter.clone(),
    });
    cfg.validate()?;
    let mut out = OutDir::create(cfg.out(), Metadata::new(cli.cmd.name(), &cfg))?;
    out.json("config.json", json!({ "config": cfg }))?;
    match cli.cmd {
        Cmd::Quantize => commands::quantize(&cfg, &mut out),
        Cmd::Converge => commands::converge(&cfg, &mut out),
        Cmd::Wick => commands::wick(&cfg, &mut out),
        Cmd::Wigner => commands::wigner(&cfg, &mut out),
        Cmd::Heat => commands::heat(&cfg, &mut out),
        Cmd::Mc => commands::mc(&cfg, &mut out),
        Cmd::Verify { mutation } => {
            let m = mutation.map(|m| match m {
                MutationArg::SignFlip => Mutation::SignFlip,
                MutationArg::Eps => Mutation::Eps,
            });
            commands::verify(&cfg, m, &mut out)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match execute(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("gauss-weyl: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
