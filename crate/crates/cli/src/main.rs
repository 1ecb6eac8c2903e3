use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qcverify::{run, Command, RunConfig, Tamper};

#[derive(Parser, Debug)]
#[command(name = "qcverify", version, about = "Checks for quaternionic contact geometry on G(H)")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Quaternionic dimension n of G(H).
    #[arg(long, global = true, default_value_t = 1)]
    n: usize,
    #[arg(long, global = true, default_value_t = 2024)]
    seed: u64,
    /// Number of sample points (per-command default when omitted).
    #[arg(long, global = true)]
    points: Option<usize>,
    /// Half-width of the sampling box.
    #[arg(long = "box", global = true, default_value_t = 2.0)]
    box_half_width: f64,
    /// Comma-separated values of c0.
    #[arg(long, global = true, value_delimiter = ',', default_value = "1")]
    c0: Vec<f64>,
    /// Comma-separated values of sigma.
    #[arg(long, global = true, value_delimiter = ',', default_value = "1")]
    sigma: Vec<f64>,
    /// Base point q0 as 4n comma-separated reals (seeded random when omitted).
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    q0: Option<Vec<f64>>,
    /// Base point w0 as 3 comma-separated reals (seeded random when omitted).
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    w0: Option<Vec<f64>>,
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol_exact: f64,
    #[arg(long, global = true, default_value_t = 1e-4)]
    tol_quad: f64,
    /// Random polynomial conformal factors used by `identities`.
    #[arg(long, global = true, default_value_t = 200)]
    polys: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Replace one matrix entry: `row,col,value` with an exact value.
    #[arg(long, global = true, hide = true)]
    tamper_q: Option<String>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Exact audit of the left-invariant frame.
    Audit,
    /// Yamabe equation residual of the extremal family.
    Residual,
    /// Scalar curvature of the conformal extremal.
    Scal,
    /// Torsion of the conformal extremal, with a negative control.
    Torsion,
    /// Torsion-tensor and universal identities.
    Identities,
    /// Exact spectral certificate of the matrix Q.
    Qmatrix,
    /// Invariance and extremality of the Folland–Stein ratio.
    Functional,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Format {
    Json,
    Csv,
}

fn parse_tamper(s: &str) -> Result<Tamper, String> {
    let parts: Vec<&str> = s.splitn(3, ',').collect();
    if parts.len() != 3 {
        return Err(format!("tamper needs row,col,value: {s}"));
    }
    let idx = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("bad index {t}"));
    Ok(Tamper {
        row: idx(parts[0])?,
        col: idx(parts[1])?,
        value: parts[2].trim().to_string(),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Audit => Command::Audit,
        Cmd::Residual => Command::Residual,
        Cmd::Scal => Command::Scal,
        Cmd::Torsion => Command::Torsion,
        Cmd::Identities => Command::Identities,
        Cmd::Qmatrix => Command::Qmatrix,
        Cmd::Functional => Command::Functional,
    };
    let tamper = match cli.tamper_q.as_deref().map(parse_tamper).transpose() {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cfg = RunConfig {
        n: cli.n,
        seed: cli.seed,
        points: cli.points,
        box_half_width: cli.box_half_width,
        c0: cli.c0,
        sigma: cli.sigma,
        q0: cli.q0,
        w0: cli.w0,
        tol_exact: cli.tol_exact,
        tol_quad: cli.tol_quad,
        polys: cli.polys,
        tamper,
    };
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let report = match run(command, &cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let text = match cli.format {
        Format::Json => report.to_json() + "\n",
        Format::Csv => report.to_csv(),
    };
    match &cli.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, text) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{text}"),
    }
    if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
