use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use curva::config::{parse_config, RunConfig};
use curva::output::{read_solution, write_atomic, write_report, write_solution, write_trace};
use curva::scenario::{certify_max_c, first_eigenpair, Scenario};
use curva::verify::residual_and_curvature_report;
use curva::{build_domain, Error};

#[derive(Parser)]
#[command(name = "curva", about = "Prescribed curvature by monotone iteration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Principal eigenvalue of the background operator and its Robin sweep.
    Eigen {
        #[arg(long)]
        config: PathBuf,
        /// Points in the β sweep over [-1, 1].
        #[arg(long, default_value_t = 20)]
        betas: usize,
    },
    /// Solve at a fixed boundary scale.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Largest certifiable boundary scale in (0, c_hi].
    Certify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        c_hi: Option<f64>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Recompute the report for a stored solution.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        solution: PathBuf,
        #[arg(long)]
        c: Option<f64>,
        /// Write the report here instead of printing it.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Curvature errors over successively halved grids.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Scenario(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            e @ (Error::Stage { .. } | Error::AllFailed(_)) => Failure::Scenario(e),
            e => Failure::Usage(e.to_string()),
        }
    }
}

fn load(path: &Path) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    Ok(parse_config(&text)?)
}

fn scale(flag: Option<f64>, cfg: Option<f64>, name: &str) -> Result<f64, Failure> {
    flag.or(cfg).ok_or_else(|| Failure::Usage(format!("no `{name}` given on the command line or in the config")))
}

fn eigen(cfg: &RunConfig, betas: usize) -> Result<(), Failure> {
    let spec = cfg.scenario_spec()?;
    let (_, base) = build_domain(&spec.domain)?;
    let m = match spec.normal_form {
        Some(nf) => base.with_constant_background(nf.interior, nf.boundary)?,
        None => base,
    };
    let e = first_eigenpair(&m, 0.0)?;
    println!("eta1 = {:e} ({} iterations, residual {:e})", e.eta, e.iterations, e.residual);
    println!("beta,eta_beta");
    for k in 0..betas {
        let beta = if betas == 1 { 0.0 } else { -1.0 + 2.0 * k as f64 / (betas - 1) as f64 };
        println!("{beta},{}", first_eigenpair(&m, beta)?.eta);
    }
    Ok(())
}

fn solve(cfg: &RunConfig, c: f64, out: &Path) -> Result<(), Failure> {
    let start = Instant::now();
    let sc = Scenario::new(cfg.scenario_spec()?)?;
    let mut res = sc.run(c)?;
    if cfg.output.record_runtime {
        res.report.runtime_s = Some(start.elapsed().as_secs_f64());
    }
    write_trace(&out.join(&cfg.output.trace), &res.trace)?;
    write_report(&out.join(&cfg.output.report), &res.report)?;
    write_solution(&out.join(&cfg.output.solution), &sc.metric.grid, &res.u)?;
    println!(
        "{} certified at c = {c}: {} steps, curvature errors {:e} / {:e}",
        cfg.scenario,
        res.trace.steps.len(),
        res.report.errors.interior_sup,
        res.report.errors.boundary_sup
    );
    Ok(())
}

fn certify(cfg: &RunConfig, c_hi: f64, out: &Path) -> Result<(), Failure> {
    let start = Instant::now();
    let cert = certify_max_c(cfg.scenario_spec()?, c_hi)?;
    let mut transcript = BTreeMap::new();
    for (k, p) in cert.transcript.iter().enumerate() {
        transcript.insert(format!("bisection_{k:02}_c"), p.c);
        transcript.insert(format!("bisection_{k:02}_certified"), if p.certified { 1.0 } else { 0.0 });
        let verdict = p.message.clone().unwrap_or_else(|| "certified".into());
        println!("probe c = {:e}: {verdict}", p.c);
    }
    let mut report = cert.result.report.with_constants(&transcript);
    if cfg.output.record_runtime {
        report.runtime_s = Some(start.elapsed().as_secs_f64());
    }
    write_trace(&out.join(&cfg.output.trace), &cert.result.trace)?;
    write_report(&out.join(&cfg.output.report), &report)?;
    let (g, _) = build_domain(&cfg.domain_spec()?)?;
    write_solution(&out.join(&cfg.output.solution), &g, &cert.result.u)?;
    println!("{} certified up to c = {:e}", cfg.scenario, cert.c_star);
    Ok(())
}

fn verify(cfg: &RunConfig, solution: &Path, c: f64, report: Option<&Path>) -> Result<(), Failure> {
    let sc = Scenario::new(cfg.scenario_spec()?)?;
    let u = read_solution(solution, &sc.metric.grid)?;
    let rep = residual_and_curvature_report(&u, &sc, c)?.with_constants(&sc.constants);
    match report {
        Some(path) => write_report(path, &rep)?,
        None => print!("{}", String::from_utf8_lossy(&curva::output::report_json(&rep)?)),
    }
    Ok(())
}

fn sweep(cfg: &RunConfig, c: f64, levels: usize, out: &Path) -> Result<(), Failure> {
    let rows: Vec<String> = (0..levels)
        .into_par_iter()
        .map(|level| {
            let fine = cfg.refined(level);
            let g = fine.domain_spec().and_then(|d| build_domain(&d)).map(|(g, _)| g);
            let head = match &g {
                Ok(g) => format!("{level},{},{},{},{}", g.n_r, g.n_theta, g.h, g.len()),
                Err(_) => format!("{level},,,,"),
            };
            let outcome = fine.scenario_spec().and_then(|s| Scenario::new(s)?.run(c));
            match outcome {
                Ok(r) => {
                    let e = r.report.errors;
                    format!(
                        "{head},certified,{},{},{},{}",
                        e.interior_sup, e.interior_l2, e.boundary_sup, e.boundary_l2
                    )
                }
                Err(e) => {
                    let stage = e.stage().map(|s| s.to_string()).unwrap_or_else(|| "Input".into());
                    format!("{head},failed:{stage},,,,")
                }
            }
        })
        .collect();
    let mut text =
        String::from("level,n_r,n_theta,h,nodes,status,interior_sup,interior_l2,boundary_sup,boundary_l2\n");
    for r in &rows {
        text.push_str(r);
        text.push('\n');
    }
    write_atomic(&out.join(&cfg.output.sweep), text.as_bytes())?;
    print!("{text}");
    Ok(())
}

fn threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("CURVA_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| Failure::Usage(format!("CURVA_THREADS={v} is not a count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    threads()?;
    match cli.command {
        Command::Eigen { config, betas } => eigen(&load(&config)?, betas),
        Command::Solve { config, c, out_dir } => {
            let cfg = load(&config)?;
            solve(&cfg, scale(c, cfg.c, "c")?, &out_dir)
        }
        Command::Certify { config, c_hi, out_dir } => {
            let cfg = load(&config)?;
            certify(&cfg, scale(c_hi, cfg.c_hi, "c_hi")?, &out_dir)
        }
        Command::Verify { config, solution, c, report } => {
            let cfg = load(&config)?;
            verify(&cfg, &solution, scale(c, cfg.c, "c")?, report.as_deref())
        }
        Command::Sweep { config, c, levels, out_dir } => {
            let cfg = load(&config)?;
            let levels = levels.unwrap_or(cfg.sweep.levels);
            sweep(&cfg, scale(c, cfg.c, "c")?, levels, &out_dir)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Scenario(e)) => {
            eprintln!("failed: {e}");
            ExitCode::from(2)
        }
    }
}
