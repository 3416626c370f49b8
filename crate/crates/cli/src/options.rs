//! Shared instance and search flags, their JSON config-file form, and the
//! resolved settings the commands run with.

use std::path::{Path, PathBuf};

use clap::Args;
use meshplan::construct::{ConstructConfig, GatewayCount};
use meshplan::instance::{
    build_grid_instance, load_instance, GridSpec, MatrixMode, PlanningInstance, RadioParams,
};
use meshplan::model::{CoverageMode, ModelVariant};
use meshplan::mopso::MopsoConfig;
use serde::{Deserialize, Deserializer};

use crate::CliError;

pub const DEFAULT_GRID: (usize, usize) = (6, 6);
pub const DEFAULT_DPS: usize = 200;
pub const DEFAULT_OUT: &str = "meshplan-out";

/// Flags shared by every command. A JSON config file with the same keys
/// (kebab-case, `"mut"` for the mutation factor) supplies values for flags
/// not given on the command line.
#[derive(Args, Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Options {
    /// Grid size as RxC, e.g. 6x6.
    #[arg(long, value_name = "RxC")]
    pub grid: Option<String>,
    /// Load the instance from a JSON file instead of generating a grid.
    #[arg(long, value_name = "FILE")]
    pub instance: Option<PathBuf>,
    /// Number of demand points.
    #[arg(long, value_name = "N")]
    pub dps: Option<usize>,
    /// Traffic per demand point (Mb/s).
    #[arg(long, value_name = "T")]
    pub traffic: Option<f64>,
    /// Radio interface capacity (Mb/s).
    #[arg(long, value_name = "C")]
    pub capacity: Option<f64>,
    /// Radio interfaces per node.
    #[arg(long, value_name = "R")]
    pub radios: Option<usize>,
    /// Available channels.
    #[arg(long, value_name = "K")]
    pub channels: Option<usize>,
    /// Hop bound between an AP and its gateway.
    #[arg(long, value_name = "A")]
    pub hops: Option<usize>,
    /// Objective set: cov, llb, glb or lglb.
    #[arg(long, value_name = "MODEL")]
    pub model: Option<String>,
    /// Coverage objective: assigned or literal.
    #[arg(long, value_name = "MODE")]
    pub coverage_mode: Option<String>,
    /// Gateway count: a number or auto.
    #[arg(long, value_name = "N|auto")]
    #[serde(deserialize_with = "count_or_word")]
    pub gateways: Option<String>,
    /// Swarm size.
    #[arg(long, value_name = "N")]
    pub swarm: Option<usize>,
    /// Generations, the initial swarm included.
    #[arg(long, value_name = "N")]
    pub gmax: Option<usize>,
    /// Mutation probability.
    #[arg(long = "mut", value_name = "F")]
    #[serde(rename = "mut")]
    pub mutation: Option<f64>,
    /// Pareto archive capacity.
    #[arg(long, value_name = "N")]
    pub archive_cap: Option<usize>,
    /// Seed for instance generation and search.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Repetitions; repetition r uses seed + r.
    #[arg(long, value_name = "N")]
    pub reps: Option<usize>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Draw coverage and connectivity as seeded Bernoulli matrices
    /// (density 0.5 when no value is given).
    #[arg(long, value_name = "DENSITY", num_args = 0..=1, require_equals = true,
          default_missing_value = "0.5")]
    pub random_matrices: Option<f64>,
    /// Cross particles with archive leaders before mutating.
    #[arg(long)]
    pub recombine: bool,
    /// Evaluate particles on one thread.
    #[arg(long)]
    pub serial: bool,
    /// Construction attempts before giving up.
    #[arg(long, value_name = "N")]
    pub retries: Option<usize>,
    /// JSON file with default values for these flags.
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

fn count_or_word<'de, D: Deserializer<'de>>(d: D) -> Result<Option<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Count(usize),
        Word(String),
    }
    Ok(Option::<Raw>::deserialize(d)?.map(|r| match r {
        Raw::Count(n) => n.to_string(),
        Raw::Word(w) => w,
    }))
}

impl Options {
    /// Fills unset flags from the `--config` file, if one was given.
    pub fn with_config_file(self) -> Result<Options, CliError> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let file: Options = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))?;
        Ok(self.over(file))
    }

    /// Field-wise merge; values in `self` win.
    fn over(self, file: Options) -> Options {
        Options {
            grid: self.grid.or(file.grid),
            instance: self.instance.or(file.instance),
            dps: self.dps.or(file.dps),
            traffic: self.traffic.or(file.traffic),
            capacity: self.capacity.or(file.capacity),
            radios: self.radios.or(file.radios),
            channels: self.channels.or(file.channels),
            hops: self.hops.or(file.hops),
            model: self.model.or(file.model),
            coverage_mode: self.coverage_mode.or(file.coverage_mode),
            gateways: self.gateways.or(file.gateways),
            swarm: self.swarm.or(file.swarm),
            gmax: self.gmax.or(file.gmax),
            mutation: self.mutation.or(file.mutation),
            archive_cap: self.archive_cap.or(file.archive_cap),
            seed: self.seed.or(file.seed),
            reps: self.reps.or(file.reps),
            out: self.out.or(file.out),
            random_matrices: self.random_matrices.or(file.random_matrices),
            recombine: self.recombine || file.recombine,
            serial: self.serial || file.serial,
            retries: self.retries.or(file.retries),
            config: None,
        }
    }
}

/// Where instances come from.
#[derive(Debug, Clone)]
pub enum Source {
    Grid {
        rows: usize,
        cols: usize,
        dps: usize,
        matrices: MatrixMode,
    },
    File(PathBuf),
}

/// Fully resolved settings for one command.
#[derive(Debug, Clone)]
pub struct Settings {
    pub source: Source,
    pub radio: RadioParams,
    pub search: MopsoConfig,
    pub seed: u64,
    pub reps: usize,
    pub out: Option<PathBuf>,
}

impl Settings {
    pub fn resolve(options: Options) -> Result<Settings, CliError> {
        let o = options.with_config_file()?;
        let defaults = RadioParams::default();
        let radio = RadioParams {
            traffic: o.traffic.unwrap_or(defaults.traffic),
            capacity: o.capacity.unwrap_or(defaults.capacity),
            radios: o.radios.unwrap_or(defaults.radios),
            channels: o.channels.unwrap_or(defaults.channels),
            hop_bound: o.hops.unwrap_or(defaults.hop_bound),
            big_m: None,
        };
        let source = match (&o.grid, &o.instance) {
            (Some(_), Some(_)) => {
                return Err(CliError::Usage(
                    "--grid and --instance are exclusive".into(),
                ))
            }
            (None, Some(path)) => Source::File(path.clone()),
            (grid, None) => {
                let (rows, cols) = match grid {
                    Some(g) => parse_grid(g)?,
                    None => DEFAULT_GRID,
                };
                let matrices = match o.random_matrices {
                    Some(density) => MatrixMode::Random { density },
                    None => MatrixMode::Geometric,
                };
                Source::Grid {
                    rows,
                    cols,
                    dps: o.dps.unwrap_or(DEFAULT_DPS),
                    matrices,
                }
            }
        };
        let variant: ModelVariant = o.model.as_deref().unwrap_or("lglb").parse()?;
        let coverage_mode: CoverageMode =
            o.coverage_mode.as_deref().unwrap_or("assigned").parse()?;
        let gateways = parse_gateways(o.gateways.as_deref().unwrap_or("auto"))?;
        let base = MopsoConfig::default();
        let seed = o.seed.unwrap_or(0);
        let search = MopsoConfig {
            swarm_size: o.swarm.unwrap_or(base.swarm_size),
            gmax: o.gmax.unwrap_or(base.gmax),
            mutation: o.mutation.unwrap_or(base.mutation),
            archive_capacity: o.archive_cap.unwrap_or(base.archive_capacity),
            seed,
            variant,
            coverage_mode,
            construct: ConstructConfig {
                gateways,
                max_retries: o.retries.unwrap_or(ConstructConfig::default().max_retries),
            },
            parallel: !o.serial,
            recombine: o.recombine,
            ..base
        };
        search.validate()?;
        let reps = o.reps.unwrap_or(1);
        if reps == 0 {
            return Err(CliError::Usage("--reps must be at least 1".into()));
        }
        Ok(Settings {
            source,
            radio,
            search,
            seed,
            reps,
            out: o.out,
        })
    }

    /// Instance for one repetition seed, optionally on another grid size.
    pub fn instance(
        &self,
        seed: u64,
        grid: Option<(usize, usize)>,
    ) -> Result<PlanningInstance, CliError> {
        match (&self.source, grid) {
            (Source::File(path), None) => Ok(load_instance(path)?),
            (Source::File(_), Some(_)) => Err(CliError::Usage(
                "a grid axis cannot be used with --instance".into(),
            )),
            (
                Source::Grid {
                    rows,
                    cols,
                    dps,
                    matrices,
                },
                grid,
            ) => {
                let (rows, cols) = grid.unwrap_or((*rows, *cols));
                let spec = GridSpec::new(rows, cols, *dps).with_matrices(*matrices);
                Ok(build_grid_instance(&spec, &self.radio, seed)?)
            }
        }
    }

    pub fn out_dir(&self) -> &Path {
        self.out.as_deref().unwrap_or(Path::new(DEFAULT_OUT))
    }
}

pub fn parse_grid(text: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("grid `{text}` is not of the form RxC"));
    let (r, c) = text.trim().split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((
        r.trim().parse().map_err(|_| bad())?,
        c.trim().parse().map_err(|_| bad())?,
    ))
}

pub fn parse_gateways(text: &str) -> Result<GatewayCount, CliError> {
    if text.eq_ignore_ascii_case("auto") {
        return Ok(GatewayCount::Auto);
    }
    match text.parse::<usize>() {
        Ok(n) if n > 0 => Ok(GatewayCount::Fixed(n)),
        _ => Err(CliError::Usage(format!(
            "--gateways expects a positive number or auto, got `{text}`"
        ))),
    }
}

/// Splits a comma list, dropping empty items.
pub fn split_list(text: &str) -> Vec<String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}
