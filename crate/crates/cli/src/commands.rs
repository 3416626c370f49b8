//! Command implementations. Every command is deterministic given `--seed`:
//! repetitions run in order and rows are written in (axis value, seed,
//! model) order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use meshplan::flow::route_flows;
use meshplan::instance::PlanningInstance;
use meshplan::model::{ModelVariant, Solution};
use meshplan::mopso::{cheapest_solution, run, ArchiveEntry, MopsoConfig, RunResult};
use meshplan::oracle::{
    true_pareto_front, verify_archive, EnumerationLimits, FrontFixture, MATCH_TOL,
};
use serde::Serialize;

use crate::options::{parse_grid, split_list, Options, Settings, Source};
use crate::{CliError, Command};

/// Search budget for `verify` when `--swarm` / `--gmax` are not given. The
/// exact fronts of tiny instances contain plans that need several
/// coordinated moves (every site a gateway, evenly split loads), which the
/// default budget reaches only on some seeds.
pub const VERIFY_SWARM: usize = 200;
pub const VERIFY_GMAX: usize = 1000;

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Instance { options } => cmd_instance(options),
        Command::Plan {
            options,
            dump_routes,
        } => cmd_plan(options, dump_routes),
        Command::Sweep {
            options,
            axis,
            values,
        } => cmd_sweep(options, &axis, &values),
        Command::Compare { options, models } => cmd_compare(options, &models),
        Command::Verify {
            options,
            threshold,
            fixture,
        } => cmd_verify(options, threshold, fixture.as_deref()),
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn cmd_instance(options: Options) -> Result<(), CliError> {
    let settings = Settings::resolve(options)?;
    let instance = settings.instance(settings.seed, None)?;
    let dir = settings.out_dir();
    write_file(dir, "instance.json", &instance.to_json()?)?;
    println!(
        "instance {} ({} sites, {} DPs) written to {}",
        instance.content_hash(),
        instance.num_sites(),
        instance.num_dps(),
        dir.join("instance.json").display()
    );
    Ok(())
}

/// Node counts and objective values of one run's cheapest plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub aps: usize,
    pub relays: usize,
    pub gateways: usize,
    /// Installed nodes; a gateway is a flag on an AP or relay.
    pub total: usize,
    pub coverage: u64,
    pub link_residual: f64,
    pub gateway_balance: f64,
}

impl Observation {
    pub fn of(entry: &ArchiveEntry) -> Self {
        let s = &entry.solution;
        Observation {
            aps: s.count_aps(),
            relays: s.count_relays(),
            gateways: s.count_gateways(),
            total: s.count_installed(),
            coverage: entry.metrics.coverage,
            link_residual: entry.metrics.link_residual,
            gateway_balance: entry.metrics.gateway_balance,
        }
    }
}

fn cheapest_observation(
    instance: &PlanningInstance,
    config: &MopsoConfig,
) -> Result<Observation, CliError> {
    let result = run(instance, config)?;
    Ok(Observation::of(cheapest_solution(&result.archive)?))
}

/// Statistics CSV: one row per generation.
pub fn stats_csv(result: &RunResult) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in &result.stats {
        w.serialize(s)?;
    }
    Ok(
        String::from_utf8(w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?)
            .expect("csv is utf-8"),
    )
}

fn summary(
    instance: &PlanningInstance,
    config: &MopsoConfig,
    result: &RunResult,
    best: &ArchiveEntry,
) -> String {
    let s = &best.solution;
    let m = &best.metrics;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "instance   {}x{} grid, {} sites, {} DPs, hash {}",
        instance.rows,
        instance.cols,
        instance.num_sites(),
        instance.num_dps(),
        instance.content_hash()
    );
    let _ = writeln!(
        out,
        "search     model {}, coverage {}, swarm {}, gmax {}, mut {}, seed {}",
        config.variant,
        config.coverage_mode,
        config.swarm_size,
        config.gmax,
        config.mutation,
        config.seed
    );
    let _ = writeln!(out, "archive    {} solutions", result.archive.len());
    let _ = writeln!(
        out,
        "cheapest   {} APs, {} relays, {} gateways, {} nodes installed",
        s.count_aps(),
        s.count_relays(),
        s.count_gateways(),
        s.count_installed()
    );
    let _ = writeln!(
        out,
        "objectives cost {}, coverage {}, link residual {}, gateway balance {}",
        m.cost, m.coverage, m.link_residual, m.gateway_balance
    );
    let _ = writeln!(out, "vector     {}", best.objectives);
    out
}

fn cmd_plan(options: Options, dump_routes: bool) -> Result<(), CliError> {
    let settings = Settings::resolve(options)?;
    let instance = settings.instance(settings.seed, None)?;
    let result = run(&instance, &settings.search)?;
    let best = cheapest_solution(&result.archive)?;
    let dir = settings.out_dir();
    write_file(dir, "instance.json", &instance.to_json()?)?;
    write_file(
        dir,
        "archive.json",
        &result.archive.to_json(settings.search.coverage_mode),
    )?;
    write_file(dir, "stats.csv", &stats_csv(&result)?)?;
    write_file(dir, "cheapest.json", &best.solution.to_json()?)?;
    if dump_routes {
        let mut routed: Solution = best.solution.clone();
        let traces = route_flows(&mut routed, &instance)?;
        let json = serde_json::to_string_pretty(&traces).expect("routes serialize");
        write_file(dir, "routes.json", &json)?;
    }
    let text = summary(&instance, &settings.search, &result, best);
    write_file(dir, "summary.txt", &text)?;
    print!("{text}");
    println!("artifacts  {}", dir.display());
    Ok(())
}

/// Row of `sweep.csv`.
#[derive(Debug, Serialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: String,
    pub seed: u64,
    pub aps: usize,
    pub relays: usize,
    pub gateways: usize,
    pub total: usize,
    pub coverage: u64,
    pub link_residual: f64,
    pub gateway_balance: f64,
}

fn write_rows<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join(name))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    println!("wrote {} rows to {}", rows.len(), dir.join(name).display());
    Ok(())
}

fn cmd_sweep(options: Options, axis: &str, values: &str) -> Result<(), CliError> {
    let settings = Settings::resolve(options)?;
    let values = split_list(values);
    if values.is_empty() {
        return Err(CliError::Usage("--values is empty".into()));
    }
    if matches!(settings.source, Source::File(_)) {
        return Err(CliError::Usage(
            "sweep generates its own instances; drop --instance".into(),
        ));
    }
    let mut rows = Vec::new();
    for value in &values {
        let mut point = settings.clone();
        let mut grid = None;
        let bad = || CliError::Usage(format!("bad {axis} value `{value}`"));
        match axis {
            "grid" => grid = Some(parse_grid(value)?),
            "traffic" => point.radio.traffic = value.parse().map_err(|_| bad())?,
            "radios" => point.radio.radios = value.parse().map_err(|_| bad())?,
            _ => {
                return Err(CliError::Usage(format!(
                    "unknown axis `{axis}`; expected grid, traffic or radios"
                )))
            }
        }
        for rep in 0..settings.reps {
            let seed = settings.seed + rep as u64;
            let instance = point.instance(seed, grid)?;
            let config = MopsoConfig {
                seed,
                ..point.search.clone()
            };
            let o = cheapest_observation(&instance, &config)?;
            rows.push(SweepRow {
                axis: axis.to_string(),
                value: value.clone(),
                seed,
                aps: o.aps,
                relays: o.relays,
                gateways: o.gateways,
                total: o.total,
                coverage: o.coverage,
                link_residual: o.link_residual,
                gateway_balance: o.gateway_balance,
            });
        }
    }
    write_rows(settings.out_dir(), "sweep.csv", &rows)
}

/// Row of `compare.csv`.
#[derive(Debug, Serialize)]
pub struct CompareRow {
    pub grid: String,
    pub seed: u64,
    pub model: String,
    pub instance_hash: String,
    pub aps: usize,
    pub relays: usize,
    pub gateways: usize,
    pub total: usize,
    pub coverage: u64,
    pub link_residual: f64,
    pub gateway_balance: f64,
}

fn cmd_compare(options: Options, models: &str) -> Result<(), CliError> {
    let mut options = options.with_config_file()?;
    let grids: Vec<Option<(usize, usize)>> = match options.grid.take() {
        Some(list) => split_list(&list)
            .iter()
            .map(|g| parse_grid(g).map(Some))
            .collect::<Result<_, _>>()?,
        None => vec![None],
    };
    let settings = Settings::resolve(options)?;
    let variants: Vec<ModelVariant> = split_list(models)
        .iter()
        .map(|m| m.parse())
        .collect::<Result<_, meshplan::Error>>()?;
    if variants.len() < 2 {
        return Err(CliError::Usage("compare needs at least two models".into()));
    }
    if grids.is_empty() {
        return Err(CliError::Usage("--grid is empty".into()));
    }
    let mut rows = Vec::new();
    for &grid in &grids {
        for rep in 0..settings.reps {
            let seed = settings.seed + rep as u64;
            // One instance per (grid, rep), shared by every model.
            let instance = settings.instance(seed, grid)?;
            let hash = instance.content_hash();
            for &variant in &variants {
                let config = MopsoConfig {
                    seed,
                    variant,
                    ..settings.search.clone()
                };
                let o = cheapest_observation(&instance, &config)?;
                rows.push(CompareRow {
                    grid: format!("{}x{}", instance.rows, instance.cols),
                    seed,
                    model: variant.to_string(),
                    instance_hash: hash.clone(),
                    aps: o.aps,
                    relays: o.relays,
                    gateways: o.gateways,
                    total: o.total,
                    coverage: o.coverage,
                    link_residual: o.link_residual,
                    gateway_balance: o.gateway_balance,
                });
            }
        }
    }
    write_rows(settings.out_dir(), "compare.csv", &rows)
}

/// Per-seed outcome of `verify`.
#[derive(Debug, Serialize)]
struct VerifyLine {
    seed: u64,
    passed: bool,
    #[serde(flatten)]
    report: meshplan::oracle::VerificationReport,
}

fn cmd_verify(options: Options, threshold: f64, fixture: Option<&Path>) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(CliError::Usage(format!(
            "--threshold {threshold} outside [0, 1]"
        )));
    }
    let mut options = options.with_config_file()?;
    options.swarm.get_or_insert(VERIFY_SWARM);
    options.gmax.get_or_insert(VERIFY_GMAX);
    let settings = Settings::resolve(options)?;
    let instance = settings.instance(settings.seed, None)?;
    let variant = settings.search.variant;
    let limits = EnumerationLimits {
        coverage_mode: settings.search.coverage_mode,
        ..EnumerationLimits::default()
    };
    let truth = true_pareto_front(&instance, variant, &limits)?;

    if let Some(path) = fixture {
        let text = fs::read_to_string(path)?;
        let stored = FrontFixture::from_json(&text)?;
        if stored.instance_hash != truth.instance_hash {
            return Err(CliError::Usage(format!(
                "fixture {} belongs to instance {}, not {}",
                path.display(),
                stored.instance_hash,
                truth.instance_hash
            )));
        }
        let committed = stored
            .front(variant)
            .ok_or_else(|| CliError::Usage(format!("fixture has no {variant} front")))?;
        let same = committed.points.len() == truth.points.len()
            && committed
                .points
                .iter()
                .all(|p| truth.points.iter().any(|t| t.approx_eq(p, MATCH_TOL)));
        if !same {
            return Err(CliError::VerificationFailed(format!(
                "enumerated {variant} front differs from {}",
                path.display()
            )));
        }
        println!(
            "fixture    {} front matches {} ({} points)",
            variant,
            path.display(),
            committed.points.len()
        );
    }

    println!("exact front ({} points):", truth.points.len());
    for p in &truth.points {
        println!("  {p}");
    }
    let mut lines = Vec::new();
    for rep in 0..settings.reps {
        let seed = settings.seed + rep as u64;
        let result = run(
            &instance,
            &MopsoConfig {
                seed,
                ..settings.search.clone()
            },
        )?;
        let report = verify_archive(&result.archive, &truth)?;
        let passed = report.on_front_fraction == 1.0 && report.front_coverage_fraction >= threshold;
        println!(
            "seed {seed}: on_front {:.6} front_coverage {:.6} archive {} front {} {}",
            report.on_front_fraction,
            report.front_coverage_fraction,
            report.archive_size,
            report.front_size,
            if passed { "PASS" } else { "FAIL" }
        );
        for v in &report.violations {
            println!("  dominated: {v}");
        }
        lines.push(VerifyLine {
            seed,
            passed,
            report,
        });
    }
    if let Some(dir) = &settings.out {
        write_file(
            dir,
            "verify.json",
            &serde_json::to_string_pretty(&lines).expect("report serializes"),
        )?;
    }
    let failed = lines.iter().filter(|l| !l.passed).count();
    if failed > 0 {
        return Err(CliError::VerificationFailed(format!(
            "{failed} of {} seeds missed the front",
            lines.len()
        )));
    }
    Ok(())
}
