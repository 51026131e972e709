//! Command implementations behind the `reqsel` binary, and the HTTP service.

pub mod api;

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use reqsel_core::clustering::{Algorithm, Linkage};
use reqsel_core::pipeline::DEFAULT_SEED;
use reqsel_core::report;
use reqsel_core::{load_problem_path, run_pipeline, Error, KChoice, PipelineOptions, Warning};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_IO: u8 = 2;
pub const EXIT_INTERNAL: u8 = 3;

pub fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Parse(_)
        | Error::Validation { .. }
        | Error::DegenerateInput(_)
        | Error::InvalidArgument(_)
        | Error::UnknownId(_)
        | Error::StaleRevision { .. } => EXIT_VALIDATION,
        Error::Io { .. } => EXIT_IO,
        Error::Stage { .. } => EXIT_INTERNAL,
    }
}

#[derive(Debug, Clone)]
pub struct AnalyzeArgs {
    pub problem: PathBuf,
    pub k: KChoice,
    pub algorithms: Vec<Algorithm>,
    pub linkage: Linkage,
    pub connectivity_l: usize,
    pub gap_b: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

impl AnalyzeArgs {
    pub fn new(problem: PathBuf) -> Self {
        let d = PipelineOptions::default();
        AnalyzeArgs {
            problem,
            k: d.k,
            algorithms: d.algorithms,
            linkage: d.linkage,
            connectivity_l: d.connectivity_l,
            gap_b: d.gap_b,
            seed: DEFAULT_SEED,
            out: None,
            csv: None,
        }
    }

    pub fn options(&self) -> PipelineOptions {
        PipelineOptions {
            k: self.k,
            algorithms: self.algorithms.clone(),
            linkage: self.linkage,
            connectivity_l: self.connectivity_l,
            gap_b: self.gap_b,
            seed: self.seed,
            ..PipelineOptions::default()
        }
    }
}

fn print_warnings(err: &mut dyn Write, warnings: &[Warning]) {
    for w in warnings {
        let _ = writeln!(err, "warning: {w}");
    }
}

fn write_file(path: &Path, body: &str) -> Result<(), Error> {
    std::fs::write(path, body).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Runs the pipeline and writes the JSON report to `--out` or `out`.
pub fn analyze(args: &AnalyzeArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Error> {
    let loaded = load_problem_path(&args.problem)?;
    print_warnings(err, &loaded.warnings);
    let report = run_pipeline(&loaded.problem, &args.options())?;
    print_warnings(err, &report.warnings);
    let json = report::to_json(&report);
    match &args.out {
        Some(path) => write_file(path, &json)?,
        None => out.write_all(json.as_bytes()).map_err(|e| Error::Io {
            path: "<stdout>".into(),
            source: e,
        })?,
    }
    if let Some(path) = &args.csv {
        write_file(path, &report::scoreboard_csv(&report))?;
    }
    Ok(())
}

/// Loads and checks a problem, printing a one-line summary.
pub fn validate(problem: &Path, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Error> {
    let loaded = load_problem_path(problem)?;
    print_warnings(err, &loaded.warnings);
    let p = &loaded.problem;
    let _ = writeln!(
        out,
        "ok: {} requirements, {} stakeholders, {} dependencies, effort {}, satisfaction {}",
        p.len(),
        p.stakeholders().len(),
        p.dependencies().len(),
        p.total_effort(),
        p.total_satisfaction()
    );
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ServeArgs {
    pub port: u16,
    pub problem: Option<PathBuf>,
    pub snapshot_dir: Option<PathBuf>,
}

pub async fn serve(args: ServeArgs) -> Result<(), Error> {
    let state = api::AppState::new(PipelineOptions::default(), args.snapshot_dir.clone());
    let (problems, sessions) = state.restore_snapshots()?;
    if problems + sessions > 0 {
        eprintln!("restored {problems} problems and {sessions} sessions");
    }
    if let Some(path) = &args.problem {
        let loaded = load_problem_path(path)?;
        print_warnings(&mut std::io::stderr(), &loaded.warnings);
        let id = state.add_problem(loaded.problem, loaded.warnings);
        eprintln!("loaded {} as {id}", path.display());
    }
    let addr = SocketAddr::from(([0, 0, 0, 0], args.port));
    let io = |e| Error::Io {
        path: format!("tcp://{addr}").into(),
        source: e,
    };
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(io)?;
    eprintln!("listening on http://{}", listener.local_addr().map_err(io)?);
    axum::serve(listener, api::router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(io)
}
