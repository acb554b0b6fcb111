use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gigaqbx::driver::Config;
use gigaqbx::geometry::write_centers_csv;
use gigaqbx_cli::{
    chain_csv, chain_reference, green_test, mc_stats, op_counts, op_counts_recount, parse_chain, ChainArgs, CliError,
    Problem, REFERENCE_ORDER,
};
use num_complex::Complex64;

#[derive(Parser)]
#[command(name = "gigaqbx", version, about = "Layer-potential experiments on starfish curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Shared {
    #[arg(long, default_value_t = 5)]
    pqbx: usize,
    #[arg(long, default_value_t = 15)]
    pfmm: usize,
    #[arg(long, default_value_t = 33)]
    pquad: usize,
    #[arg(long, default_value_t = 0.9)]
    tf: f64,
    #[arg(long, default_value_t = 64)]
    nmax: usize,
    #[arg(long, default_value_t = 250)]
    panels: usize,
    #[arg(long, default_value_t = 5)]
    arms: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    deterministic: bool,
    /// Output file (directory for `geom`); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

impl Shared {
    fn config(&self) -> Config {
        Config {
            p_qbx: self.pqbx,
            p_fmm: self.pfmm,
            p_quad: self.pquad,
            t_f: self.tf,
            n_max: self.nmax,
            deterministic: self.deterministic,
            ..Config::default()
        }
    }

    fn problem(&self) -> Result<Problem, CliError> {
        Problem::starfish(self.arms, self.panels, self.pquad)
    }

    fn writer(&self) -> Result<Box<dyn Write>, CliError> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Green's identity residual table
    Green {
        #[command(flatten)]
        shared: Shared,
        #[arg(long, value_delimiter = ',', default_value = "3,5,7,9")]
        qbx_orders: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "3,5,10,15,20")]
        fmm_orders: Vec<usize>,
        #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
        charge_x: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        charge_y: f64,
    },
    /// Modeled operation counts per interaction list
    Counts {
        #[command(flatten)]
        shared: Shared,
    },
    /// Source counts near QBX centers
    Mc {
        #[command(flatten)]
        shared: Shared,
    },
    /// Randomized translation-chain error study
    Chain {
        #[command(flatten)]
        shared: Shared,
        #[arg(long)]
        chain: String,
        #[arg(long, default_value_t = 8)]
        p: usize,
        #[arg(long, default_value_t = 3)]
        q: usize,
        #[arg(long, default_value_t = 2.0)]
        c: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// Export the refined discretization and centers
    Geom {
        #[command(flatten)]
        shared: Shared,
    },
}

impl Command {
    fn shared(&self) -> &Shared {
        match self {
            Command::Green { shared, .. }
            | Command::Counts { shared }
            | Command::Mc { shared }
            | Command::Chain { shared, .. }
            | Command::Geom { shared } => shared,
        }
    }
}

fn run(cmd: Command) -> Result<(), CliError> {
    let shared = cmd.shared().clone();
    if let Some(n) = shared.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    match cmd {
        Command::Green {
            qbx_orders,
            fmm_orders,
            charge_x,
            charge_y,
            ..
        } => {
            let problem = shared.problem()?;
            let table = green_test(&problem, Complex64::new(charge_x, charge_y), &qbx_orders, &fmm_orders, &shared.config())?;
            table.write_csv(shared.writer()?)?;
        }
        Command::Counts { .. } => {
            let config = shared.config();
            config.validate()?;
            let problem = shared.problem()?;
            let et = problem.eval_tree(&config)?;
            let cost = op_counts(&et.tree, &et.lists, config.p_qbx, config.p_fmm);
            if cost != op_counts_recount(&et.tree, &et.lists, config.p_qbx, config.p_fmm) {
                return Err(CliError::Internal("operation recount disagrees".into()));
            }
            cost.write_csv(problem.n_particles(), shared.writer()?)?;
        }
        Command::Mc { .. } => {
            let problem = shared.problem()?;
            let sources: Vec<_> = problem.fine.nodes().map(|n| n.position).collect();
            mc_stats(&sources, &problem.centers, shared.tf)?.write_csv(shared.writer()?)?;
        }
        Command::Chain {
            chain,
            p,
            q,
            c,
            lambda,
            trials,
            ..
        } => {
            let args = ChainArgs {
                chain: parse_chain(&chain)?,
                p,
                q,
                c,
                lambda,
                trials,
                seed: shared.seed,
                t_f: None,
            };
            let mut out = shared.writer()?;
            chain_csv(&args, &mut out)?;
            out.flush()?;
            eprintln!("point-fmm reference (p = {REFERENCE_ORDER}): {:.6e}", chain_reference());
        }
        Command::Geom { .. } => {
            let problem = shared.problem()?;
            match &shared.out {
                Some(dir) => {
                    fs::create_dir_all(dir)?;
                    problem.base.write_csv(BufWriter::new(File::create(dir.join("nodes.csv"))?))?;
                    problem.fine.write_csv(BufWriter::new(File::create(dir.join("sources.csv"))?))?;
                    write_centers_csv(&problem.centers, BufWriter::new(File::create(dir.join("centers.csv"))?))?;
                }
                None => problem.base.write_csv(BufWriter::new(io::stdout().lock()))?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
