use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gdmopt::analysis::{render_csv, render_diagnostics_csv};
use gdmopt::cases::CaseId;
use gdmopt::control::PdasConfig;
use gdmopt::gd::SchemeKind;
use gdmopt::study::{run_diagnostics, run_study, StudyConfig};

#[derive(Parser)]
#[command(
    name = "gdmopt",
    version,
    about = "Convergence studies for gradient-scheme discretisations of optimal control problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve every level and write the error/EOC table.
    Run {
        #[command(flatten)]
        common: Common,
        /// Also compute C_D, W_D and S_D per level.
        #[arg(long)]
        diagnostics: bool,
    },
    /// Write C_D, W_D and S_D per level.
    Diagnose {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CaseArg {
    Example1,
    #[value(name = "example2-lshape")]
    Example2Lshape,
    #[value(name = "example3-neumann")]
    Example3Neumann,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    P1,
    Ncp1,
    Hmm,
}

#[derive(Args)]
struct Common {
    #[arg(long, value_enum)]
    case: CaseArg,
    #[arg(long, value_enum)]
    scheme: SchemeArg,
    /// Inclusive level range `A..B`; level ℓ has 2^ℓ subdivisions per unit length.
    #[arg(long, value_parser = parse_levels, default_value = "2..6")]
    levels: (usize, usize),
    /// Cell-point shift of a Cartesian HMM mesh.
    #[arg(long)]
    shift: Option<f64>,
    /// Output CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pdas_max_iter: usize,
    #[arg(long, default_value_t = 1e-10)]
    pdas_tol: f64,
}

fn parse_levels(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected A..B, got `{s}`"))?;
    let a: usize = a
        .trim()
        .parse()
        .map_err(|e| format!("bad level `{a}`: {e}"))?;
    let b: usize = b
        .trim()
        .parse()
        .map_err(|e| format!("bad level `{b}`: {e}"))?;
    if a > b {
        return Err(format!("empty level range {a}..{b}"));
    }
    Ok((a, b))
}

impl Common {
    fn config(&self) -> StudyConfig {
        let case = match self.case {
            CaseArg::Example1 => CaseId::Example1,
            CaseArg::Example2Lshape => CaseId::Example2LShape,
            CaseArg::Example3Neumann => CaseId::Example3Neumann,
        };
        let scheme = match self.scheme {
            SchemeArg::P1 => SchemeKind::ConformingP1,
            SchemeArg::Ncp1 => SchemeKind::NonConformingP1,
            SchemeArg::Hmm => SchemeKind::Hmm,
        };
        let mut config = StudyConfig::new(case, scheme, self.levels.0, self.levels.1);
        config.shift = self.shift;
        config.pdas = PdasConfig {
            max_iter: self.pdas_max_iter,
            tol: self.pdas_tol,
        };
        config
    }
}

fn write_output(out: Option<&Path>, text: &str) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn diagnostics_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}.diagnostics.csv"))
}

const S_D_NOTE: &str = "note: s_d_y and s_d_p are least-squares upper bounds of S_D, \
within a factor sqrt(2) of the minimum (sqrt(3) with a trace term)";

fn diagnose(config: &StudyConfig, out: Option<&Path>) -> Result<bool, Box<dyn std::error::Error>> {
    let (rows, failures) = run_diagnostics(config)?;
    write_output(out, &render_diagnostics_csv(&rows, &failures))?;
    eprintln!("{S_D_NOTE}");
    for (level, msg) in &failures {
        eprintln!("level {level} failed: {msg}");
    }
    Ok(failures.is_empty())
}

fn execute(cli: Cli) -> Result<bool, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Run {
            common,
            diagnostics,
        } => {
            let config = common.config();
            let study = run_study(&config)?;
            write_output(common.out.as_deref(), &render_csv(&study))?;
            for (level, msg) in &study.failures {
                eprintln!("level {level} failed: {msg}");
            }
            let mut ok = study.failures.is_empty();
            if diagnostics {
                let path = common.out.as_deref().map(diagnostics_path);
                ok &= diagnose(&config, path.as_deref())?;
            }
            Ok(ok)
        }
        Command::Diagnose { common } => diagnose(&common.config(), common.out.as_deref()),
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
