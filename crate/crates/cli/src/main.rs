//! `strataforms`: runs verification checks declared in a project file.
//!
//! Exit status is 0 when every requested check passes, 1 when some check
//! fails and 2 when the project or the arguments are invalid.

mod commands;
mod project;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Ctx;
use project::{PoincareCheck, Project, SmoothCheck, StokesCheck};
use report::{Check, Report};

#[derive(Parser)]
#[command(
    name = "strataforms",
    version,
    about = "Verify stratified polynomial forms"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Project file (JSON).
    #[arg(long, global = true, default_value = "project.json")]
    project: PathBuf,
    /// Write the full machine-readable report here.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    /// Random seed; overrides the project's run seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Tolerance; overrides the project's run tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Quadrature order; overrides the automatic choice.
    #[arg(long, global = true)]
    quad_order: Option<usize>,
    /// Worker threads.
    #[arg(long, global = true, env = "STRATAFORMS_JOBS")]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Frontier condition, form continuity, chain cells and retraction audits.
    Validate,
    /// Betti numbers of every complex.
    Betti,
    /// Stokes residual of a form over a chain.
    Stokes {
        #[arg(long)]
        form: Option<String>,
        #[arg(long)]
        chain: Option<String>,
    },
    /// Whitney forms, de Rham pairing ranks and periods of declared forms.
    Derham,
    /// Primitive of a closed form under a retraction.
    Poincare {
        #[arg(long)]
        form: Option<String>,
        #[arg(long)]
        retraction: Option<String>,
        /// Primitive of the form on the retraction's target, as a JSON
        /// object of basis labels to polynomials.
        #[arg(long)]
        gamma_prime: Option<String>,
    },
    /// Mollifier smoothing of a grid form.
    Smooth {
        #[arg(long)]
        grid: Option<String>,
        /// Comma-separated radii.
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Betti => "betti",
            Command::Stokes { .. } => "stokes",
            Command::Derham => "derham",
            Command::Poincare { .. } => "poincare",
            Command::Smooth { .. } => "smooth",
        }
    }
}

fn pair<'a>(
    a: &'a Option<String>,
    b: &'a Option<String>,
    what: &str,
) -> Result<Option<(&'a str, &'a str)>, String> {
    match (a, b) {
        (Some(a), Some(b)) => Ok(Some((a, b))),
        (None, None) => Ok(None),
        _ => Err(format!("{what} must be given together")),
    }
}

fn run(cli: &Cli) -> Result<Report, String> {
    let g = &cli.global;
    if let Some(n) = g.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| format!("cannot start {n} workers: {e}"))?;
    }
    let project = Project::load(&g.project).map_err(|e| format!("invalid project: {e}"))?;
    let run = &project.file.run;
    let ctx = Ctx {
        project: &project,
        tol: g.tol.unwrap_or(run.tol),
        seed: g.seed.unwrap_or(run.seed),
        quad_order: g.quad_order,
    };
    let checks_decl = &project.file.checks;
    let fail = |e: strataforms::Error| e.to_string();
    let checks: Vec<Check> = match &cli.command {
        Command::Validate => commands::validate(&ctx),
        Command::Betti => commands::betti_cmd(&ctx),
        Command::Stokes { form, chain } => {
            let reqs = match pair(form, chain, "--form and --chain")? {
                Some((f, c)) => vec![StokesCheck {
                    form: f.into(),
                    chain: c.into(),
                }],
                None => checks_decl.stokes.clone(),
            };
            reqs.iter()
                .map(|r| commands::stokes(&ctx, r))
                .collect::<Result<_, _>>()
                .map_err(fail)?
        }
        Command::Derham => {
            let reqs = if checks_decl.derham.is_empty() {
                project
                    .file
                    .complexes
                    .iter()
                    .filter(|c| c.points.is_some())
                    .map(|c| project::DerhamCheck {
                        complex: c.id.clone(),
                        forms: vec![],
                        expect_rank: None,
                        cochains: vec![],
                    })
                    .collect()
            } else {
                checks_decl.derham.clone()
            };
            let mut out = Vec::new();
            for r in &reqs {
                out.extend(commands::derham(&ctx, r).map_err(fail)?);
            }
            out
        }
        Command::Poincare {
            form,
            retraction,
            gamma_prime,
        } => {
            let reqs = match pair(form, retraction, "--form and --retraction")? {
                Some((f, r)) => vec![PoincareCheck {
                    form: f.into(),
                    retraction: r.into(),
                    gamma_prime: gamma_prime
                        .as_deref()
                        .map(serde_json::from_str)
                        .transpose()
                        .map_err(|e| format!("--gamma-prime: {e}"))?,
                }],
                None => checks_decl.poincare.clone(),
            };
            reqs.iter()
                .map(|r| commands::poincare(&ctx, r))
                .collect::<Result<_, _>>()
                .map_err(fail)?
        }
        Command::Smooth { grid, eps } => {
            let reqs = match grid {
                Some(gid) if !eps.is_empty() => vec![SmoothCheck {
                    grid: gid.clone(),
                    eps: eps.clone(),
                }],
                Some(_) => return Err("--grid needs --eps".into()),
                None => checks_decl.smooth.clone(),
            };
            let mut out = Vec::new();
            for r in &reqs {
                out.extend(commands::smooth(&ctx, r).map_err(fail)?);
            }
            out
        }
    };
    if checks.is_empty() {
        return Err(format!("nothing to check for `{}`", cli.command.name()));
    }
    Ok(Report {
        tool: format!("strataforms {}", env!("CARGO_PKG_VERSION")),
        command: cli.command.name().into(),
        project: g.project.display().to_string(),
        seed: ctx.seed,
        tol: ctx.tol,
        pass: checks.iter().all(|c| c.pass),
        checks,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let report = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    print!("{}", report.summary());
    if let Some(path) = &cli.global.report {
        let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
        text.push('\n');
        if let Err(e) = std::fs::write(path, text) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return ExitCode::from(2);
        }
    }
    if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
