use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use isq_cli::config::{parse_seed, ExperimentConfig, ExperimentId};
use isq_cli::experiments::{run, run_in};
use isq_cli::report::{all_pass, write_csv, ReportRow};
use isq_cli::session::Session;
use isq_cli::tools::{apconst, find_input, norms, sqfn_eval, SquareFunction};
use isq_cli::{CliError, Result};
use isq_core::weights::Weight;

/// Numerical checks of intrinsic square function estimates.
///
/// Every command writes CSV rows `experiment,input_id,lhs,rhs,ratio,tolerance,pass`
/// and exits with status 0 iff every row passes.
#[derive(Debug, Parser)]
#[command(name = "isq", version)]
struct Cli {
    /// Sectioned `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// CSV output path (default: standard output).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Divides the grid spacing and smallest scale by this factor.
    #[arg(long, global = true)]
    resolution_scale: Option<u32>,
    /// Seed of randomized suite members (decimal or 0x-hex).
    #[arg(long, global = true, value_parser = seed)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

fn seed(s: &str) -> std::result::Result<u64, String> {
    parse_seed(s).map_err(|e| e.to_string())
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Muckenhoupt characteristic constant of a weight.
    Apconst {
        /// Weight descriptor, e.g. `power center=0 gamma=0.5`.
        #[arg(long, default_value = "const c=1")]
        weight: String,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 8)]
        depth: u32,
        #[arg(long, default_value_t = 4.0)]
        root_side: f64,
    },
    /// Weighted strong and weak norms of a suite input.
    Norms {
        #[arg(long)]
        input: String,
        #[arg(long, default_value = "const c=1")]
        weight: String,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
    },
    /// Square function evaluations.
    Sqfn {
        #[command(subcommand)]
        command: SqfnCommand,
    },
    /// Far-field decay fits of a single atom.
    Decay {
        #[command(subcommand)]
        command: DecayCommand,
    },
    /// Norm-ratio sweeps of the theorems and of the g* lemma.
    Theorem {
        #[arg(value_enum)]
        which: Theorem,
    },
    /// Convergence certification under refinement.
    Cert,
    /// Closed-form anchors and weight machinery.
    Check {
        #[arg(value_enum)]
        which: Check,
    },
    /// Every experiment in sequence.
    All,
}

#[derive(Debug, Subcommand)]
enum SqfnCommand {
    /// One value of a square function of a suite input.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    input: String,
    #[arg(long)]
    x: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = Kind::Area)]
    kind: Kind,
    /// Aperture of `area` and `poisson`.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Exponent of `gstar`.
    #[arg(long, default_value_t = 6.0)]
    lambda: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Area,
    G,
    Gstar,
    Poisson,
}

#[derive(Debug, Subcommand)]
enum DecayCommand {
    /// Slopes of the area function (`3.1`) or of the aperture family (`4.2`).
    Fit {
        #[arg(long, default_value = "3.1")]
        lemma: String,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Theorem {
    A,
    #[value(name = "1.1")]
    T11,
    #[value(name = "1.2")]
    T12,
    #[value(name = "cor1.3")]
    Cor13,
    #[value(name = "lemma4.1")]
    Lemma41,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Check {
    Anchors,
    Weights,
}

impl Cli {
    fn config(&self, id: ExperimentId) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::for_experiment(&std::fs::read_to_string(path)?, id)?,
            None => ExperimentConfig::default_for(id),
        };
        if let Some(k) = self.resolution_scale {
            cfg.resolution_scale = k;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        Ok(cfg)
    }

    fn execute(&self) -> Result<(Vec<ReportRow>, Option<PathBuf>)> {
        let experiment = |id| -> Result<_> {
            let cfg = self.config(id)?;
            Ok((run(&cfg)?, cfg.out))
        };
        match &self.command {
            Command::Apconst { weight, p, depth, root_side } => {
                let w: Weight = weight.parse()?;
                Ok((apconst(&w, *p, *depth, *root_side)?, self.out.clone()))
            }
            Command::Norms { input, weight, p } => {
                let cfg = self.config(ExperimentId::TheoremA)?;
                let w: Weight = weight.parse()?;
                Ok((norms(&cfg, &find_input(input, cfg.seed)?, &w, *p)?, cfg.out))
            }
            Command::Sqfn { command: SqfnCommand::Eval(a) } => {
                let cfg = self.config(ExperimentId::TheoremA)?;
                let which = match a.kind {
                    Kind::Area => SquareFunction::Area(a.beta),
                    Kind::G => SquareFunction::G,
                    Kind::Gstar => SquareFunction::GStar(a.lambda),
                    Kind::Poisson => SquareFunction::Poisson(a.beta),
                };
                Ok((sqfn_eval(&cfg, &find_input(&a.input, cfg.seed)?, a.alpha, a.x, which)?, cfg.out))
            }
            Command::Decay { command: DecayCommand::Fit { lemma } } => match lemma.parse()? {
                id @ (ExperimentId::Lemma31 | ExperimentId::Lemma42) => experiment(id),
                other => Err(CliError::Config(format!("decay fits cover lemma 3.1 and 4.2, not {other}"))),
            },
            Command::Theorem { which } => experiment(match which {
                Theorem::A => ExperimentId::TheoremA,
                Theorem::T11 => ExperimentId::Theorem11,
                Theorem::T12 => ExperimentId::Theorem12,
                Theorem::Cor13 => ExperimentId::Corollary13,
                Theorem::Lemma41 => ExperimentId::Lemma41,
            }),
            Command::Cert => experiment(ExperimentId::Cert),
            Command::Check { which: Check::Anchors } => experiment(ExperimentId::Anchors),
            Command::Check { which: Check::Weights } => experiment(ExperimentId::Weights),
            Command::All => {
                let mut rows = Vec::new();
                let mut session: Option<Session> = None;
                for id in ExperimentId::ALL {
                    let cfg = self.config(id)?;
                    match id {
                        ExperimentId::TheoremA
                        | ExperimentId::Theorem11
                        | ExperimentId::Theorem12
                        | ExperimentId::Corollary13
                        | ExperimentId::Lemma41 => {
                            let s = match &mut session {
                                Some(s) => s,
                                None => session.insert(Session::new(&cfg)?),
                            };
                            rows.extend(run_in(s, &cfg)?);
                        }
                        _ => rows.extend(run(&cfg)?),
                    }
                }
                Ok((rows, self.out.clone()))
            }
        }
    }
}

fn emit(rows: &[ReportRow], out: Option<PathBuf>) -> Result<()> {
    match out {
        Some(path) => write_csv(rows, BufWriter::new(File::create(path)?)),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write_csv(rows, &mut lock)?;
            lock.flush()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = cli.execute().and_then(|(rows, out)| {
        emit(&rows, out)?;
        Ok(rows)
    });
    match result {
        Ok(rows) => {
            if all_pass(&rows) {
                ExitCode::SUCCESS
            } else {
                eprintln!("{} of {} rows failed", rows.iter().filter(|r| !r.pass).count(), rows.len());
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_subcommands() {
        let cli = Cli::parse_from(["isq", "--seed", "0x10", "theorem", "cor1.3"]);
        assert_eq!(cli.seed, Some(16));
        assert!(matches!(cli.command, Command::Theorem { which: Theorem::Cor13 }));
        let cli = Cli::parse_from(["isq", "sqfn", "eval", "--input", "bump", "--x", "0.5", "--kind", "gstar"]);
        assert!(matches!(cli.command, Command::Sqfn { .. }));
        assert!(Cli::try_parse_from(["isq", "theorem", "2.0"]).is_err());
    }
}
