use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use basket_core::design::Design;
use basket_core::{Pattern, Scenario, SizeFamily};
use basketsim::config::param_json;
use basketsim::output::{fixed6, read_oc_file, write_oc, write_table, Provenance};
use basketsim::report::{self, Table};
use basketsim::{LoadedConfig, RunError, Runner};
use clap::{Parser, Subcommand};

const DEFAULT_SEED: u64 = 20240101;
const DEFAULT_REPS: u32 = 10_000;
const DEFAULT_MCMC_SAMPLES: usize = 10_000;

/// Operating characteristics of Bayesian basket trial designs.
#[derive(Debug, Parser)]
#[command(name = "basketsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Design name or `all`.
    #[arg(long, global = true, default_value = "all", value_name = "NAME|all")]
    design: String,

    /// Scenario id, comma-separated ids, size family or `all`.
    #[arg(long, global = true, default_value = "all", value_name = "ID|family|all")]
    scenario: String,

    /// Replicates per scenario [default: 10000].
    #[arg(long, global = true, value_name = "N")]
    reps: Option<u32>,

    /// Master seed [default: 20240101].
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Worker threads [default: available cores].
    #[arg(long, global = true, env = "BASKETSIM_JOBS", value_name = "N")]
    jobs: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out", value_name = "DIR")]
    out: PathBuf,

    /// MCMC iterations per chain, burn-in included [default: 10000].
    #[arg(long, global = true, value_name = "N")]
    mcmc_samples: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate operating characteristics and write simulate.csv.
    Simulate,
    /// Calibrate decision thresholds under the global null and write calibrate.csv.
    Calibrate,
    /// Grid search over design parameters and write tune.csv.
    Tune,
    /// Render a stored simulate.csv as a text table.
    Report {
        /// ecd, rejection, bias or weights.
        #[arg(long)]
        table: String,
        /// Size family of the table.
        #[arg(long, default_value = "grouped")]
        family: String,
        /// Simulation CSV [default: DIR/simulate.csv].
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
    },
}

fn parse_designs(s: &str) -> Result<Vec<Design>, RunError> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(Design::ALL.to_vec());
    }
    s.split(',')
        .map(|name| Design::parse(name.trim()).ok_or_else(|| RunError::Usage(format!("unknown design `{name}`"))))
        .collect()
}

fn select_scenarios(s: &str, catalog: &[Scenario]) -> Result<Vec<Scenario>, RunError> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(catalog.to_vec());
    }
    if let Some(family) = SizeFamily::parse(s) {
        return Ok(catalog.iter().filter(|c| c.size_family == family).cloned().collect());
    }
    s.split(',')
        .map(|part| {
            let id: u32 = part.trim().parse().map_err(|_| RunError::Usage(format!("unknown scenario `{part}`")))?;
            catalog
                .iter()
                .find(|c| c.id == id)
                .cloned()
                .ok_or_else(|| RunError::Usage(format!("unknown scenario id {id}")))
        })
        .collect()
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, RunError> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn run(cli: Cli) -> Result<(), RunError> {
    let config = match &cli.config {
        Some(path) => LoadedConfig::from_path(path)?,
        None => LoadedConfig::builtin(),
    };
    let seed = cli.seed.or(config.config.seed).unwrap_or(DEFAULT_SEED);
    let reps = cli.reps.or(config.config.reps).unwrap_or(DEFAULT_REPS);
    let mcmc_samples = cli.mcmc_samples.or(config.config.mcmc_samples).unwrap_or(DEFAULT_MCMC_SAMPLES);
    let jobs = cli.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let provenance = |command: &str| Provenance {
        command: command.into(),
        seed,
        reps,
        config_sha256: config.sha256.clone(),
    };

    if let Command::Report { table, family, input } = &cli.command {
        let table = Table::parse(table).ok_or_else(|| RunError::Usage(format!("unknown table `{table}`")))?;
        let family = SizeFamily::parse(family).ok_or_else(|| RunError::Usage(format!("unknown size family `{family}`")))?;
        let stdout = io::stdout();
        let mut out = stdout.lock();
        if table == Table::Weights {
            write_table(&mut out, &provenance("report --table weights"), &report::WEIGHT_COLUMNS, report::weights_rows())?;
            return Ok(());
        }
        let path = input.clone().unwrap_or_else(|| cli.out.join("simulate.csv"));
        let rows = read_oc_file(&path)?;
        let text = match table {
            Table::Ecd => report::ecd_table(&rows, family),
            Table::Rejection => report::rejection_table(&rows, family),
            Table::Bias => report::bias_table(&rows, family),
            Table::Weights => unreachable!(),
        };
        out.write_all(text.as_bytes())?;
        return Ok(());
    }

    let designs = parse_designs(&cli.design)?;
    let runner = Runner::new(config.clone(), seed, reps, mcmc_samples, jobs)?;
    let scenarios = select_scenarios(&cli.scenario, &runner.catalog()?)?;

    match cli.command {
        Command::Simulate => {
            let rows = runner.simulate(&designs, &scenarios)?;
            let mut file = create(&cli.out, "simulate.csv")?;
            write_oc(&mut file, &provenance("simulate"), &rows)?;
            file.flush()?;
            eprintln!("wrote {} rows to {}", rows.len(), cli.out.join("simulate.csv").display());
        }
        Command::Calibrate => {
            let calibrations = runner.calibrate(&designs, &scenarios)?;
            let rows = calibrations.iter().map(|c| {
                vec![
                    c.design.name().to_string(),
                    c.null_scenario.size_family.name().to_string(),
                    c.null_scenario.id.to_string(),
                    format!("{:.3}", c.lambda),
                    fixed6(c.fwer),
                    param_json(&c.params),
                ]
            });
            let mut file = create(&cli.out, "calibrate.csv")?;
            let columns = ["design", "size_family", "null_scenario_id", "lambda", "fwer", "param_json"];
            write_table(&mut file, &provenance("calibrate"), &columns, rows)?;
            file.flush()?;
            for c in &calibrations {
                eprintln!("{:<9} {:<14} lambda {:.3}  fwer {:.3}", c.design.name(), c.null_scenario.size_family.name(), c.lambda, c.fwer);
            }
        }
        Command::Tune => {
            let results = runner.tune(&designs, &scenarios)?;
            let mut columns: Vec<String> = ["size_family", "design", "combination", "param_json", "lambda", "min_fwer"]
                .iter()
                .map(|s| s.to_string())
                .collect();
            columns.extend(Pattern::ALL.iter().map(|p| format!("ecd_{}", p.name())));
            columns.extend(["mean_ecd".to_string(), "selected".to_string()]);
            let mut rows = Vec::new();
            for t in &results {
                for (i, rec) in t.result.records.iter().enumerate() {
                    let mut row = vec![
                        t.family.name().to_string(),
                        t.result.design.name().to_string(),
                        i.to_string(),
                        param_json(&rec.params),
                        rec.lambda.map(|l| format!("{l:.3}")).unwrap_or_default(),
                        rec.min_fwer.map(fixed6).unwrap_or_default(),
                    ];
                    for p in Pattern::ALL {
                        let value = t.patterns.iter().position(|&q| q == p).and_then(|j| rec.ecd.get(j));
                        row.push(value.map(|&v| fixed6(v)).unwrap_or_default());
                    }
                    row.push(rec.mean_ecd.map(fixed6).unwrap_or_default());
                    row.push((t.result.selected == Some(i)).to_string());
                    rows.push(row);
                }
                match t.result.best() {
                    Some(best) => eprintln!(
                        "{:<9} {:<14} best {} lambda {:.3} mean ECD {:.3}",
                        t.result.design.name(),
                        t.family.name(),
                        param_json(&best.params),
                        best.lambda.unwrap_or(f64::NAN),
                        best.mean_ecd.unwrap_or(f64::NAN)
                    ),
                    None => eprintln!("{:<9} {:<14} no feasible combination", t.result.design.name(), t.family.name()),
                }
            }
            let columns: Vec<&str> = columns.iter().map(String::as_str).collect();
            let mut file = create(&cli.out, "tune.csv")?;
            write_table(&mut file, &provenance("tune"), &columns, rows)?;
            file.flush()?;
        }
        Command::Report { .. } => unreachable!(),
    }
    if runner.mcmc_warnings() > 0 {
        eprintln!("warning: {} MCMC chains had acceptance rates outside [0.05, 0.95]", runner.mcmc_warnings());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
