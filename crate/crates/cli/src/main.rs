mod config;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

use latquant::continuum::{continuum_norm, norm_csv, ClassicalGerm, QuantumGerm};
use latquant::cylinder::sup_norm;
use latquant::io::{
    function_to_json, lattice_to_json, load_function, load_lattice, load_operator, operator_to_json, FileError,
};
use latquant::lattice::{leq, refine_uniform, Lattice, LatticeError, RefinementPath};
use latquant::verify::{self, summarize, to_csv, ReportRow, SweepConfig};
use latquant::weylq::{
    dequantize, dequantize_with_cap, export_window, operator_norm_grown, quantize, HbarParam, Window,
};

#[derive(Parser, Debug)]
#[command(name = "latquant", version, about = "Quantized abelian lattice gauge fields: refinement, quantization, norms and checks")]
struct Cli {
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true, env = "LATQUANT_JOBS")]
    jobs: Option<usize>,
    /// key = value file supplying defaults for any long flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a lattice file and list every violated invariant.
    Validate {
        #[arg(long)]
        lattice: PathBuf,
    },
    /// Write the uniform refinement l^R.
    Refine {
        #[arg(long)]
        lattice: PathBuf,
        #[arg(long = "R")]
        r: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the sup norm of a function.
    Sup {
        #[arg(long)]
        f: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quantize a function in the operator system.
    Quantize {
        #[arg(long)]
        f: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        hbar: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recover a function from its quantization.
    Dequantize {
        #[arg(long)]
        op: PathBuf,
        /// Estimate each band's atom count from the data, up to this many.
        #[arg(long)]
        cap: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Norm bounds of an operator (or of a function quantized at --hbar)
    /// on the uniform refinements R = 1..=rmax.
    Norm {
        #[arg(long, required_unless_present = "f")]
        op: Option<PathBuf>,
        #[arg(long, conflicts_with = "op", requires = "hbar")]
        f: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        hbar: Option<f64>,
        #[arg(long, default_value_t = 1)]
        rmax: usize,
        /// Window radius; when absent, radii 16, 32, 64, 128 are tried until
        /// the bound settles.
        #[arg(long)]
        window: Option<usize>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        center: Option<Vec<i64>>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Also write the window truncation in Matrix Market format.
        #[arg(long)]
        export_window: Option<PathBuf>,
        /// CSV with columns R, window, lower, upper.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Push a function or operator along a refinement.
    Embed {
        #[arg(long, required_unless_present = "op")]
        f: Option<PathBuf>,
        #[arg(long, conflicts_with = "f")]
        op: Option<PathBuf>,
        /// Target lattice; must refine the source.
        #[arg(long, required_unless_present = "r")]
        to: Option<PathBuf>,
        #[arg(long = "R", conflicts_with = "to")]
        r: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Free electric flow of a function, or its unitary conjugation for an operator.
    Flow {
        #[arg(long, required_unless_present = "op")]
        f: Option<PathBuf>,
        #[arg(long, conflicts_with = "f")]
        op: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Product defect Q(f)Q(g) − Q(fg) against its first-order bound.
    VerifyVn {
        #[command(flatten)]
        pair: Pair,
        #[command(flatten)]
        sweep: Sweep,
    },
    /// Bracket defect (−iℏ)⁻¹[Q(f),Q(g)] − Q({f,g}) against its second-order bound.
    VerifyDirac {
        #[command(flatten)]
        pair: Pair,
        #[command(flatten)]
        sweep: Sweep,
    },
    /// Norms of Q_ℏ(f) on refinements against the sup norm of f as ℏ → 0.
    VerifyRieffel0 {
        #[arg(long)]
        f: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0.1,0.05,0.02,0.01")]
        hbar_grid: Vec<f64>,
        #[arg(long, default_value_t = 6)]
        rmax: usize,
        #[arg(long, default_value_t = 64)]
        window: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Local modulus of continuity of refined norms around hbar1.
    VerifyRieffel1 {
        #[arg(long)]
        f: PathBuf,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.7)]
        hbar1: f64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0.65,0.675,0.7,0.725,0.75")]
        hbar_grid: Vec<f64>,
        #[arg(long, default_value_t = 4)]
        rmax: usize,
        #[arg(long, default_value_t = 64)]
        window: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Unitary conjugation by the free evolution against the quantized classical flow.
    VerifyDynamics {
        #[arg(long)]
        f: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0.1,1,10")]
        times: Vec<f64>,
        #[arg(long, allow_hyphen_values = true)]
        hbar: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::Args, Debug)]
struct Pair {
    #[arg(long)]
    f: PathBuf,
    #[arg(long)]
    g: PathBuf,
}

#[derive(clap::Args, Debug)]
struct Sweep {
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0.4,0.2,0.1,0.05")]
    hbar_grid: Vec<f64>,
    #[arg(long, default_value_t = 32)]
    window: usize,
    #[arg(long, default_value_t = 1)]
    rmax: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long)]
    out: PathBuf,
}

impl Sweep {
    fn config(&self) -> SweepConfig {
        SweepConfig {
            hbar_grid: self.hbar_grid.clone(),
            rmax: self.rmax,
            window: Window::new(self.window),
            tol: self.tol,
            seed: 0,
        }
    }
}

/// Bad input (exit 2) versus a completed run whose checks failed (exit 1).
enum Outcome {
    Ok,
    Failed,
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating temp file in {}", dir.display()))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.persist(path).map_err(|e| anyhow!("writing {}: {}", path.display(), e.error))?;
    Ok(())
}

fn hbar(value: f64) -> Result<HbarParam> {
    Ok(HbarParam::new(value)?)
}

fn germ(path: &Path) -> Result<ClassicalGerm> {
    Ok(ClassicalGerm::new(load_function(path)?).with_context(|| path.display().to_string())?)
}

fn path_for(source: &Lattice, to: Option<&PathBuf>, r: Option<usize>) -> Result<RefinementPath> {
    match (to, r) {
        (Some(target), _) => {
            let target = load_lattice(target)?;
            leq(source, &target)?.ok_or_else(|| anyhow!("target lattice does not refine the source"))
        }
        (None, Some(r)) if r >= 1 => Ok(refine_uniform(source, r).1),
        _ => bail!("--R must be at least 1"),
    }
}

fn report(rows: &[ReportRow], experiment: &str, out: &Path) -> Result<Outcome> {
    write_atomic(out, &to_csv(rows))?;
    let summary = summarize(experiment, rows);
    let mut summary_path = out.as_os_str().to_owned();
    summary_path.push(".summary.json");
    let summary_path = PathBuf::from(summary_path);
    write_atomic(&summary_path, &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    println!("{}", out.display());
    println!("{}: {}", experiment, summary.verdict);
    Ok(if verify::all_passed(rows) { Outcome::Ok } else { Outcome::Failed })
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Validate { lattice } => {
            let text = fs::read_to_string(&lattice).with_context(|| lattice.display().to_string())?;
            let file: latquant::lattice::LatticeFile =
                serde_json::from_str(&text).with_context(|| lattice.display().to_string())?;
            match Lattice::try_from(file) {
                Ok(l) => {
                    println!("valid: {} edges in R^{}, gauge dimension {}", l.num_edges(), l.ambient_dim(), l.gauge_dim());
                    Ok(Outcome::Ok)
                }
                Err(LatticeError::Invalid(violations)) => {
                    for v in violations {
                        println!("{v}");
                    }
                    Ok(Outcome::Failed)
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Refine { lattice, r, out } => {
            if r == 0 {
                bail!("--R must be at least 1");
            }
            let l = load_lattice(&lattice)?;
            write_atomic(&out, &lattice_to_json(&refine_uniform(&l, r).0))?;
            println!("{}", out.display());
            Ok(Outcome::Ok)
        }
        Command::Sup { f, tol, out } => {
            let f = load_function(&f)?;
            let s = sup_norm(&f, tol);
            let json = serde_json::json!({
                "lower": s.lower,
                "upper": s.upper,
                "slack": s.slack,
                "argmax_q": s.argmax_q,
                "argmax_v": s.argmax_v,
            });
            println!("lower {:.16e} upper {:.16e}", s.lower, s.upper);
            if let Some(out) = out {
                write_atomic(&out, &(serde_json::to_string_pretty(&json)? + "\n"))?;
                println!("{}", out.display());
            }
            Ok(Outcome::Ok)
        }
        Command::Quantize { f, hbar: h, out } => {
            let h = hbar(h)?;
            let f = load_function(&f)?;
            write_atomic(&out, &operator_to_json(&quantize(&f, h)?))?;
            println!("{}", out.display());
            Ok(Outcome::Ok)
        }
        Command::Dequantize { op, cap, out } => {
            let op = load_operator(&op)?;
            let f = match cap {
                Some(k) => dequantize_with_cap(&op, k)?,
                None => dequantize(&op)?,
            };
            write_atomic(&out, &function_to_json(&f))?;
            println!("{}", out.display());
            Ok(Outcome::Ok)
        }
        Command::Norm {
            op,
            f,
            hbar: h,
            rmax,
            window,
            center,
            tol,
            export_window: export,
            out,
        } => {
            let op = match (op, f) {
                (Some(p), _) => load_operator(&p)?,
                (None, Some(f)) => {
                    let h = hbar(h.ok_or_else(|| anyhow!("--f needs --hbar"))?)?;
                    quantize(&load_function(&f)?, h)?
                }
                (None, None) => bail!("one of --op or --f is required"),
            };
            let radius = match window {
                Some(r) => r,
                None => operator_norm_grown(&op, center.clone(), tol)?.1,
            };
            let window = match center {
                Some(c) => Window::centered(radius, c),
                None => Window::new(radius),
            };
            if let Some(path) = export {
                write_atomic(&path, &export_window(&op, &window)?)?;
                println!("{}", path.display());
            }
            let germ = QuantumGerm::new(op)?;
            let rows = continuum_norm(&germ, rmax, &window, tol)?;
            for row in &rows {
                println!("R {} lower {:.16e} upper {:.16e}", row.r, row.lower, row.upper);
            }
            if let Some(out) = out {
                write_atomic(&out, &norm_csv(&rows))?;
                println!("{}", out.display());
            }
            Ok(Outcome::Ok)
        }
        Command::Embed { f, op, to, r, out } => {
            let text = match (f, op) {
                (Some(f), _) => {
                    let f = load_function(&f)?;
                    let path = path_for(f.lattice(), to.as_ref(), r)?;
                    function_to_json(&f.classical_embed(&path)?)
                }
                (None, Some(op)) => {
                    let op = load_operator(&op)?;
                    let path = path_for(op.lattice(), to.as_ref(), r)?;
                    operator_to_json(&op.quantum_embed(&path)?)
                }
                (None, None) => bail!("one of --f or --op is required"),
            };
            write_atomic(&out, &text)?;
            println!("{}", out.display());
            Ok(Outcome::Ok)
        }
        Command::Flow { f, op, t, out } => {
            let text = match (f, op) {
                (Some(f), _) => function_to_json(&load_function(&f)?.classical_flow(t)),
                (None, Some(op)) => operator_to_json(&load_operator(&op)?.quantum_flow_conjugate(t)),
                (None, None) => bail!("one of --f or --op is required"),
            };
            write_atomic(&out, &text)?;
            println!("{}", out.display());
            Ok(Outcome::Ok)
        }
        Command::VerifyVn { pair, sweep } => {
            let rows = verify::run_von_neumann(&germ(&pair.f)?, &germ(&pair.g)?, &sweep.config())?;
            report(&rows, "von-neumann", &sweep.out)
        }
        Command::VerifyDirac { pair, sweep } => {
            let rows = verify::run_dirac(&germ(&pair.f)?, &germ(&pair.g)?, &sweep.config())?;
            report(&rows, "dirac", &sweep.out)
        }
        Command::VerifyRieffel0 {
            f,
            hbar_grid,
            rmax,
            window,
            tol,
            out,
        } => {
            let cfg = SweepConfig {
                hbar_grid,
                rmax,
                window: Window::new(window),
                tol,
                seed: 0,
            };
            let rows = verify::run_rieffel_zero(&germ(&f)?, &cfg)?;
            report(&rows, "rieffel0", &out)
        }
        Command::VerifyRieffel1 {
            f,
            hbar1,
            delta,
            hbar_grid,
            rmax,
            window,
            tol,
            out,
        } => {
            let cfg = SweepConfig {
                hbar_grid,
                rmax,
                window: Window::new(window),
                tol,
                seed: 0,
            };
            let rows = verify::run_rieffel_away(&germ(&f)?, hbar1, delta, &cfg)?;
            report(&rows, "rieffel1", &out)
        }
        Command::VerifyDynamics { f, times, hbar: h, out } => {
            let rows = verify::run_dynamics(&germ(&f)?, &times, hbar(h)?);
            report(&rows, "dynamics", &out)
        }
    }
}

fn main() -> ExitCode {
    let argv = match config::merge(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(1),
        Err(e) => {
            // File errors already carry the path.
            if e.downcast_ref::<FileError>().is_some() {
                eprintln!("error: {e}");
            } else {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(2)
        }
    }
}
