//! The `mfgkit` command line: argument grammar, dispatch, artifact output and
//! run manifests.

pub mod commands;
pub mod manifest;
pub mod output;

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{ArgAction, Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use commands::{BskCommand, DynamicsCommand, MfgCommand, MkvCommand, NplayerCommand};
use manifest::RunManifest;
use output::Output;

pub const EXIT_OK: u8 = 0;
pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_NOT_CONVERGED: u8 = 2;
pub const EXIT_INTERNAL: u8 = 3;

/// Output directory used when `--out-dir` is not given.
pub const DEFAULT_OUT_DIR: &str = "mfgkit-out";

#[derive(Debug, Parser)]
#[command(name = "mfgkit", version, about = "Mean field game solvers and simulators")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Base seed for every random stream of the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for parallel replications; results do not depend on it.
    #[arg(long, global = true, env = "MFGKIT_THREADS")]
    pub threads: Option<usize>,
    /// Directory receiving the artifacts and the manifest.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Write `manifest.json` next to the artifacts.
    #[arg(long, global = true, default_value_t = true, action = ArgAction::Set)]
    pub emit_manifest: bool,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Evolutionary dynamics on the simplex.
    #[command(subcommand)]
    Dynamics(DynamicsCommand),
    /// Discrete-time mean field equilibria.
    #[command(subcommand)]
    Bsk(BskCommand),
    /// Continuous-time mean field games and population control.
    #[command(subcommand)]
    Mfg(MfgCommand),
    /// Finite-n Monte Carlo simulation and studies.
    #[command(subcommand)]
    Nplayer(NplayerCommand),
    /// McKean-Vlasov particle systems.
    #[command(subcommand)]
    Mkv(MkvCommand),
    /// Re-run a manifest and compare its artifacts byte for byte.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
}

impl Command {
    /// Space-separated subcommand path, e.g. `bsk solve`.
    pub fn name(&self) -> String {
        match self {
            Command::Dynamics(c) => format!("dynamics {}", c.verb()),
            Command::Bsk(c) => format!("bsk {}", c.verb()),
            Command::Mfg(c) => format!("mfg {}", c.verb()),
            Command::Nplayer(c) => format!("nplayer {}", c.verb()),
            Command::Mkv(c) => format!("mkv {}", c.verb()),
            Command::Replay(_) => "replay".into(),
        }
    }

    fn paths_mut(&mut self) -> Vec<&mut PathBuf> {
        match self {
            Command::Dynamics(c) => c.paths_mut(),
            Command::Bsk(c) => c.paths_mut(),
            Command::Mfg(c) => c.paths_mut(),
            Command::Nplayer(c) => c.paths_mut(),
            Command::Mkv(c) => c.paths_mut(),
            Command::Replay(r) => vec![&mut r.manifest],
        }
    }

    /// Replaces input paths by absolute ones so the recorded command can be
    /// replayed from any directory.
    pub fn resolve_paths(&mut self) -> Result<(), CliError> {
        for p in self.paths_mut() {
            *p = std::fs::canonicalize(&*p)
                .map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?;
        }
        Ok(())
    }

    pub fn inputs(&mut self) -> Vec<PathBuf> {
        self.paths_mut().into_iter().map(|p| p.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Validation(String),
    NotConverged(String),
    Internal(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::NotConverged(_) => EXIT_NOT_CONVERGED,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::NotConverged(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

impl From<mfgkit_core::Error> for CliError {
    fn from(e: mfgkit_core::Error) -> Self {
        match e {
            mfgkit_core::Error::NotConverged { .. } => CliError::NotConverged(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<mfgkit_sim::SimError> for CliError {
    fn from(e: mfgkit_sim::SimError) -> Self {
        match e {
            mfgkit_sim::SimError::Core(inner) => inner.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

/// How a command finished after writing its artifacts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Completion {
    Done,
    /// A solver stopped at its iteration budget; the best iterate was written.
    NotConverged,
    /// A verification ran and found violations; its report was written.
    CheckFailed,
}

impl Completion {
    pub fn code(self) -> u8 {
        match self {
            Completion::Done => EXIT_OK,
            Completion::NotConverged => EXIT_NOT_CONVERGED,
            Completion::CheckFailed => EXIT_VALIDATION,
        }
    }
}

/// Shared state handed to every command.
pub struct Context {
    pub seed: u64,
    pub out: Output,
}

fn thread_count(requested: Option<usize>) -> usize {
    requested
        .filter(|&t| t > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs a parsed command line and returns the process exit code.
pub fn execute(cli: Cli) -> u8 {
    let Cli { global, command } = cli;
    let threads = thread_count(global.threads);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start {threads} worker threads: {e}");
            return EXIT_INTERNAL;
        }
    };
    pool.install(|| match command {
        Command::Replay(args) => replay(&args, &global, threads),
        command => match run(command, &global, threads) {
            Ok((code, _)) => code,
            Err(e) => {
                eprintln!("error: {e}");
                e.code()
            }
        },
    })
}

/// Executes one command, writes its artifacts and (optionally) its manifest.
pub fn run(mut command: Command, global: &GlobalArgs, threads: usize) -> Result<(u8, Option<RunManifest>), CliError> {
    command.resolve_paths()?;
    let inputs = command
        .inputs()
        .iter()
        .map(|p| manifest::describe_input(p))
        .collect::<Result<Vec<_>, _>>()?;
    let dir = global.out_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    std::fs::create_dir_all(&dir)?;
    let mut ctx = Context {
        seed: global.seed,
        out: Output::new(&dir),
    };
    let start = Instant::now();
    let outcome = commands::dispatch(&command, &mut ctx);
    let duration = start.elapsed().as_secs_f64();
    let code = match &outcome {
        Ok(c) => c.code(),
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    };
    if outcome.is_err() && ctx.out.artifacts().is_empty() {
        return Ok((code, None));
    }
    let manifest = RunManifest::new(&command, global.seed, threads, inputs, ctx.out.artifacts().to_vec(), code, duration);
    if global.emit_manifest {
        manifest.write(&dir.join(manifest::MANIFEST_FILE))?;
    }
    Ok((code, Some(manifest)))
}

fn replay(args: &ReplayArgs, global: &GlobalArgs, threads: usize) -> u8 {
    match replay_inner(args, global, threads) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

fn replay_inner(args: &ReplayArgs, global: &GlobalArgs, threads: usize) -> Result<u8, CliError> {
    let original = RunManifest::read(&args.manifest)?;
    let dir = global.out_dir.clone().unwrap_or_else(|| {
        args.manifest
            .parent()
            .unwrap_or(Path::new("."))
            .join("replay")
    });
    for input in &original.inputs {
        let now = manifest::describe_input(Path::new(&input.path))?;
        if now.sha256 != input.sha256 {
            return Err(CliError::Validation(format!("input {} changed since the recorded run", input.path)));
        }
    }
    let replay_global = GlobalArgs {
        seed: original.seed,
        threads: Some(threads),
        out_dir: Some(dir.clone()),
        emit_manifest: global.emit_manifest,
    };
    let (code, manifest) = run(original.config.clone(), &replay_global, threads)?;
    let fresh = manifest.map(|m| m.artifacts).unwrap_or_default();
    let mut identical = code == original.exit_code;
    if !identical {
        println!("exit code {code} differs from recorded {}", original.exit_code);
    }
    for a in &original.artifacts {
        match fresh.iter().find(|b| b.path == a.path) {
            Some(b) if b.sha256 == a.sha256 => println!("identical {}", a.path),
            Some(_) => {
                identical = false;
                println!("differs   {}", a.path);
            }
            None => {
                identical = false;
                println!("missing   {}", a.path);
            }
        }
    }
    if fresh.len() != original.artifacts.len() {
        identical = false;
        println!("artifact count {} differs from recorded {}", fresh.len(), original.artifacts.len());
    }
    println!("replayed into {}", dir.display());
    Ok(if identical { EXIT_OK } else { EXIT_VALIDATION })
}
