use std::collections::BTreeMap;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use hypodb_core::analytics::{self, AnalyticsError};
use hypodb_core::{build, Engine, Observation, RankedPrediction};
use serde::Serialize;

use crate::manifest::LoadedManifest;
use crate::report;
use crate::state::{State, StateLock};
use crate::CliError;

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";

#[derive(Debug, Parser)]
#[command(name = "hypodb", version, about = "Hypothesis management on a probabilistic database")]
pub struct Cli {
    /// Project state file.
    #[arg(long, global = true, env = "HYPODB_STATE", default_value = "hypodb-state.json")]
    pub state: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the database from a manifest and write the state file.
    Build { manifest: PathBuf },
    /// Print the synthesized schemes without writing state.
    Synth {
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Rank the predictions of an output attribute by confidence.
    Query {
        #[arg(long)]
        phi: Option<u64>,
        #[arg(long)]
        attr: String,
        /// Dimension filter, e.g. `--at t=3`.
        #[arg(long = "at", value_parser = parse_dim)]
        at: Vec<(String, f64)>,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Condition the ranking on an observed value; `--commit` writes the
    /// posteriors back.
    Observe {
        #[arg(long)]
        phi: Option<u64>,
        #[arg(long)]
        attr: String,
        #[arg(long = "at", value_parser = parse_dim)]
        at: Vec<(String, f64)>,
        #[arg(long, allow_negative_numbers = true)]
        y: f64,
        #[arg(long, allow_negative_numbers = true)]
        sigma: f64,
        #[arg(long)]
        commit: bool,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// List committed conditioning steps.
    History {
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Discard every committed conditioning step.
    Reset,
    /// Serve the HTTP JSON API.
    Serve {
        #[arg(long, env = "HYPODB_BIND", default_value = DEFAULT_BIND)]
        bind: SocketAddr,
        /// Directory of static files served under `/`.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
    },
}

fn parse_dim(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("`{v}` is not a number"))?;
    Ok((k.trim().to_string(), v))
}

pub enum PhiError {
    Unknown(u64),
    Ambiguous,
}

impl From<PhiError> for CliError {
    fn from(e: PhiError) -> Self {
        match e {
            PhiError::Unknown(phi) => CliError::Failed(format!("unknown phenomenon {phi}")),
            PhiError::Ambiguous => CliError::Validation("the project has several phenomena; pass --phi".into()),
        }
    }
}

/// The requested phenomenon, or the only one when none is given.
pub fn resolve_phi(engine: &Engine, phi: Option<u64>) -> Result<u64, PhiError> {
    match (phi, engine.phenomena()) {
        (Some(phi), ps) if ps.iter().any(|p| p.phi == phi) => Ok(phi),
        (Some(phi), _) => Err(PhiError::Unknown(phi)),
        (None, [only]) => Ok(only.phi),
        (None, _) => Err(PhiError::Ambiguous),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservationResult {
    pub phi: u64,
    pub attr: String,
    pub dims: BTreeMap<String, f64>,
    pub y: f64,
    pub sigma: f64,
    pub committed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
    pub rows: Vec<RankedPrediction>,
}

/// Conditions on `obs`, writing the posteriors into `engine` if `commit`.
pub fn apply_observation(engine: &mut Engine, phi: u64, obs: &Observation, commit: bool) -> Result<ObservationResult, AnalyticsError> {
    let rows = analytics::condition(engine, phi, obs)?;
    let step = if commit { Some(analytics::writeback_posteriors(engine, obs, &rows)?.step) } else { None };
    Ok(ObservationResult { phi, attr: obs.attr.clone(), dims: obs.dims.clone(), y: obs.y, sigma: obs.sigma, committed: commit, step, rows })
}

fn json<T: Serialize>(out: &mut dyn Write, v: &T) -> Result<(), CliError> {
    let s = serde_json::to_string_pretty(v).expect("views serialize");
    writeln!(out, "{s}").map_err(io)
}

fn io(e: std::io::Error) -> CliError {
    CliError::Failed(e.to_string())
}

fn load_shared(path: &Path) -> Result<State, CliError> {
    let _lock = StateLock::shared(path)?;
    State::load(path)
}

fn build_engine(manifest: &Path) -> Result<(LoadedManifest, Engine), CliError> {
    let loaded = LoadedManifest::load(manifest)?;
    let project = loaded.project()?;
    let engine = build(&project)?;
    Ok((loaded, engine))
}

/// Runs one command, writing its normal output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let state_path = cli.state;
    match cli.command {
        Command::Build { manifest } => {
            let (loaded, engine) = build_engine(&manifest)?;
            let text = report::render_synthesis(&report::synthesis(&engine));
            let state = State::new(manifest, loaded.hash, engine);
            {
                let _lock = StateLock::exclusive(&state_path)?;
                state.save(&state_path)?;
            }
            write!(out, "{text}").map_err(io)?;
            writeln!(out, "state written to {}", state_path.display()).map_err(io)
        }
        Command::Synth { manifest, format } => {
            let (_, engine) = build_engine(&manifest)?;
            let r = report::synthesis(&engine);
            match format {
                Format::Json => json(out, &r),
                Format::Table => write!(out, "{}", report::render_synthesis(&r)).map_err(io),
            }
        }
        Command::Query { phi, attr, at, format } => {
            let state = load_shared(&state_path)?;
            let engine = &state.current;
            let phi = resolve_phi(engine, phi)?;
            let rows = analytics::rank_predictions(engine, phi, &attr, &at.into_iter().collect())?;
            match format {
                Format::Json => json(out, &rows),
                Format::Table => write!(out, "{}", report::render_ranking(&rows)).map_err(io),
            }
        }
        Command::Observe { phi, attr, at, y, sigma, commit, format } => {
            let obs = Observation { attr, dims: at.into_iter().collect(), y, sigma };
            obs.validate()?;
            let result = if commit {
                let _lock = StateLock::exclusive(&state_path)?;
                let mut state = State::load(&state_path)?;
                let phi = resolve_phi(&state.current, phi)?;
                let result = apply_observation(&mut state.current, phi, &obs, true)?;
                state.save(&state_path)?;
                result
            } else {
                let mut state = load_shared(&state_path)?;
                let phi = resolve_phi(&state.current, phi)?;
                apply_observation(&mut state.current, phi, &obs, false)?
            };
            match format {
                Format::Json => json(out, &result),
                Format::Table => {
                    write!(out, "{}", report::render_ranking(&result.rows)).map_err(io)?;
                    match result.step {
                        Some(step) => writeln!(out, "committed as step {step}").map_err(io),
                        None => writeln!(out, "dry run; pass --commit to write the posteriors back").map_err(io),
                    }
                }
            }
        }
        Command::History { format } => {
            let state = load_shared(&state_path)?;
            match format {
                Format::Json => json(out, &state.current.history),
                Format::Table => write!(out, "{}", report::render_history(&state.current.history)).map_err(io),
            }
        }
        Command::Reset => {
            let _lock = StateLock::exclusive(&state_path)?;
            let mut state = State::load(&state_path)?;
            let discarded = state.current.history.len();
            state.current = state.baseline.clone();
            state.save(&state_path)?;
            writeln!(out, "discarded {discarded} conditioning step(s)").map_err(io)
        }
        Command::Serve { bind, static_dir } => {
            let rt = tokio::runtime::Runtime::new().map_err(io)?;
            rt.block_on(crate::server::serve(state_path, bind, static_dir))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_filters_parse() {
        assert_eq!(parse_dim("t=3").unwrap(), ("t".to_string(), 3.0));
        assert_eq!(parse_dim(" t = -1.5").unwrap(), ("t".to_string(), -1.5));
        assert!(parse_dim("t").is_err());
        assert!(parse_dim("t=x").is_err());
    }

    #[test]
    fn arguments_parse() {
        let cli = Cli::try_parse_from([
            "hypodb", "--state", "s.json", "observe", "--attr", "s", "--at", "t=3", "--y", "-5", "--sigma", "400", "--commit",
        ])
        .unwrap();
        match cli.command {
            Command::Observe { y, sigma, commit, at, .. } => {
                assert_eq!((y, sigma, commit), (-5.0, 400.0, true));
                assert_eq!(at, [("t".to_string(), 3.0)]);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(cli.state, PathBuf::from("s.json"));
    }
}
