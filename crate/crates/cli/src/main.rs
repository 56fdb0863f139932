use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use qmcar::criterion::{self, DEFAULT_COST_CAP};
use qmcar::density::DensitySpec;
use qmcar::discrepancy::{self, DiscrepancyResult};
use qmcar::experiments::{self, ExperimentConfig};
use qmcar::integration::{self, Integrand};
use qmcar::io::{self as qio, RealFormat};
use qmcar::sampler::{ar_deterministic, SampleSet};
use qmcar::{Density, DriverSet, DriverSpec, Error, Family, Point2};

#[derive(Parser)]
#[command(name = "qmcar", version, about = "Acceptance-rejection sampling with low-discrepancy drivers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a driver point set as `j,x1,x2` CSV.
    Driver {
        #[command(flatten)]
        driver: DriverArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Run acceptance-rejection and print the accepted samples.
    Sample {
        #[command(flatten)]
        density: DensityArgs,
        #[command(flatten)]
        driver: DriverArgs,
        #[command(flatten)]
        out: OutputArgs,
        /// Where to write the `{M, N, L, C, rate}` JSON sidecar. Defaults to
        /// the `--output` path with a `.json` extension.
        #[arg(long)]
        sidecar: Option<PathBuf>,
    },
    /// Star discrepancy of samples (1d), of driver points (2d) or by grid search (oracle).
    Discrepancy {
        #[arg(long, value_parser = ["1d", "2d", "oracle"])]
        mode: String,
        /// Samples (1d, oracle --dim 1) or `j,x1,x2` points (2d, oracle --dim 2).
        /// Without it the input is generated from the driver flags.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Dimension checked by the oracle.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
        dim: u8,
        /// Oracle grid size; defaults to 100000 in 1d and 2000 in 2d.
        #[arg(long)]
        grid: Option<usize>,
        #[command(flatten)]
        density: OptionalDensityArgs,
        #[command(flatten)]
        driver: OptionalDriverArgs,
    },
    /// The exponential-sum quality criterion of a driver set.
    Criterion {
        #[command(flatten)]
        driver: DriverArgs,
        /// Frequency cut-off, or `auto` for the Fibonacci default.
        #[arg(long = "R", default_value = "auto")]
        r: String,
        #[arg(long, default_value_t = DEFAULT_COST_CAP)]
        cost_cap: u128,
    },
    /// Estimate a reference integral and audit the Koksma-Hlawka bound.
    Integrate {
        /// Integrand: 1, x, x2, xc2 or sinpi.
        #[arg(long = "f")]
        f: String,
        #[command(flatten)]
        density: DensityArgs,
        #[command(flatten)]
        driver: DriverArgs,
    },
    /// Run a convergence sweep described by a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Regenerate both discrepancy figures (figure1.csv, figure2.csv, summary.json).
    Figures {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct DriverArgs {
    /// fibonacci, kronecker, grid or random.
    #[arg(long)]
    family: String,
    /// Fibonacci index.
    #[arg(long)]
    k: Option<u64>,
    /// Number of points for the other families.
    #[arg(long)]
    m: Option<u64>,
    /// Seed of the random family.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct OptionalDriverArgs {
    /// fibonacci, kronecker, grid or random.
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    k: Option<u64>,
    #[arg(long)]
    m: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct DensityArgs {
    /// Built-in density name, or a JSON file with an inline definition.
    #[arg(long)]
    density: String,
    /// Override of the density bound.
    #[arg(long = "L")]
    bound: Option<f64>,
}

#[derive(Args)]
struct OptionalDensityArgs {
    #[arg(long)]
    density: Option<String>,
    #[arg(long = "L")]
    bound: Option<f64>,
}

#[derive(Args)]
struct OutputArgs {
    /// Write reals as hex floats instead of 17-digit decimals.
    #[arg(long)]
    hex: bool,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

impl OutputArgs {
    fn format(&self) -> RealFormat {
        if self.hex {
            RealFormat::HexFloat
        } else {
            RealFormat::Decimal17
        }
    }
}

enum Failure {
    Domain(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io { .. } | Error::Parse(_) => Failure::Io(e.to_string()),
            _ => Failure::Domain(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::from(Error::io(path, e))
}

fn parse_family(name: &str) -> CliResult<Family> {
    Ok(name.parse::<Family>()?)
}

fn driver_spec(family: &str, k: Option<u64>, m: Option<u64>, seed: Option<u64>) -> CliResult<DriverSpec> {
    let family = parse_family(family)?;
    let parameter = match (family, k, m) {
        (Family::Fibonacci, Some(k), None) => k,
        (Family::Fibonacci, _, _) => return Err(Failure::Domain("the fibonacci family takes --k (and not --m)".into())),
        (_, None, Some(m)) => m,
        (f, _, _) => return Err(Failure::Domain(format!("the {f} family takes --m (and not --k)"))),
    };
    if seed.is_some() && family != Family::Random {
        return Err(Failure::Domain("--seed only applies to the random family".into()));
    }
    let seed = (family == Family::Random).then(|| seed.unwrap_or(1));
    Ok(DriverSpec { family, parameter, seed })
}

impl DriverArgs {
    fn generate(&self) -> CliResult<DriverSet> {
        Ok(driver_spec(&self.family, self.k, self.m, self.seed)?.generate()?)
    }
}

impl OptionalDriverArgs {
    fn generate(&self) -> CliResult<Option<DriverSet>> {
        match &self.family {
            Some(f) => Ok(Some(driver_spec(f, self.k, self.m, self.seed)?.generate()?)),
            None if self.k.is_some() || self.m.is_some() || self.seed.is_some() => {
                Err(Failure::Domain("--k, --m and --seed need --family".into()))
            }
            None => Ok(None),
        }
    }
}

fn build_density(name: &str, bound: Option<f64>) -> CliResult<Density> {
    let spec = if name.ends_with(".json") {
        let path = Path::new(name);
        let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
        serde_json::from_str::<DensitySpec>(&text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?
    } else {
        DensitySpec::Named(name.to_string())
    };
    Ok(spec.build(bound)?)
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| io_failure(path, e))
}

/// Runs `write` against the `--output` file or stdout.
fn emit<F>(output: Option<&Path>, write: F) -> CliResult<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    match output {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path).map_err(|e| io_failure(path, e))?);
            write(&mut w).and_then(|_| w.flush()).map_err(|e| io_failure(path, e))
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            write(&mut w).and_then(|_| w.flush()).map_err(|e| io_failure(Path::new("<stdout>"), e))
        }
    }
}

fn print_json(value: &impl serde::Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Domain(e.to_string()))?;
    emit(None, |w| writeln!(w, "{text}"))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Domain(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| io_failure(path, e))
}

fn samples_from(input: Option<&Path>, density: &Density, driver: &OptionalDriverArgs) -> CliResult<SampleSet> {
    match (input, driver.generate()?) {
        (Some(_), Some(_)) => Err(Failure::Domain("give either --input or driver flags, not both".into())),
        (Some(path), None) => {
            let samples = qio::read_samples(open(path)?)?;
            Ok(SampleSet {
                proposed: samples.len(),
                samples,
                bound: density.bound(),
                density: density.name().to_string(),
            })
        }
        (None, Some(d)) => Ok(ar_deterministic(density, &d.points)),
        (None, None) => Err(Failure::Domain("discrepancy needs --input or driver flags".into())),
    }
}

fn points_from(input: Option<&Path>, driver: &OptionalDriverArgs) -> CliResult<Vec<Point2>> {
    match (input, driver.generate()?) {
        (Some(_), Some(_)) => Err(Failure::Domain("give either --input or driver flags, not both".into())),
        (Some(path), None) => Ok(qio::read_points(open(path)?)?),
        (None, Some(d)) => Ok(d.points),
        (None, None) => Err(Failure::Domain("discrepancy needs --input or driver flags".into())),
    }
}

fn required_density(args: &OptionalDensityArgs) -> CliResult<Density> {
    let name = args
        .density
        .as_deref()
        .ok_or_else(|| Failure::Domain("this mode needs --density".into()))?;
    build_density(name, args.bound)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Driver { driver, out } => {
            let set = driver.generate()?;
            let fmt = out.format();
            emit(out.output.as_deref(), |w| qio::write_points(w, &set.points, fmt))
        }
        Command::Sample {
            density,
            driver,
            out,
            sidecar,
        } => {
            let density = build_density(&density.density, density.bound)?;
            let set = driver.generate()?;
            let samples = ar_deterministic(&density, &set.points);
            let fmt = out.format();
            emit(out.output.as_deref(), |w| qio::write_samples(w, &samples.samples, fmt))?;
            let sidecar = sidecar.or_else(|| out.output.as_ref().map(|p| p.with_extension("json")));
            if let Some(path) = sidecar {
                let meta = json!({
                    "M": samples.proposed,
                    "N": samples.accepted(),
                    "L": density.bound(),
                    "C": density.norm(),
                    "rate": samples.acceptance_rate(),
                });
                write_json(&path, &meta)?;
            }
            Ok(())
        }
        Command::Discrepancy {
            mode,
            input,
            dim,
            grid,
            density,
            driver,
        } => {
            let input = input.as_deref();
            let result: DiscrepancyResult = match (mode.as_str(), dim) {
                ("1d", _) | ("oracle", 1) => {
                    let d = required_density(&density)?;
                    let set = samples_from(input, &d, &driver)?;
                    if mode == "1d" {
                        discrepancy::star_discrepancy_1d(&d, &set)?
                    } else {
                        discrepancy::grid_oracle_1d(&d, &set, grid.unwrap_or(100_000))?
                    }
                }
                _ => {
                    if density.density.is_some() {
                        return Err(Failure::Domain("2-D discrepancy is uniform; drop --density".into()));
                    }
                    let points = points_from(input, &driver)?;
                    if mode == "2d" {
                        discrepancy::star_discrepancy_2d_uniform(&points)?
                    } else {
                        discrepancy::grid_oracle_2d(&points, grid.unwrap_or(2000))?
                    }
                }
            };
            print_json(&result)
        }
        Command::Criterion { driver, r, cost_cap } => {
            let spec = driver_spec(&driver.family, driver.k, driver.m, driver.seed)?;
            let fixed = match r.as_str() {
                "auto" => None,
                s => Some(
                    s.parse::<u64>()
                        .map_err(|_| Failure::Domain(format!("--R must be a positive integer or `auto`, got `{s}`")))?,
                ),
            };
            let result = if spec.family == Family::Fibonacci {
                let k = u32::try_from(spec.parameter).map_err(|_| Failure::Domain(format!("k = {} is too large", spec.parameter)))?;
                let r = match fixed {
                    Some(r) => r,
                    None => criterion::default_r_for_fibonacci(k)?,
                };
                criterion::qr_fibonacci(k, r)?
            } else {
                let r = fixed.ok_or_else(|| {
                    Failure::Domain(format!("--R auto is only defined for fibonacci; pass --R for {}", spec.family))
                })?;
                let set = spec.generate()?;
                criterion::qr_general(&set.points, r, cost_cap)?
            };
            print_json(&result)
        }
        Command::Integrate { f, density, driver } => {
            let integrand = Integrand::builtin(&f)?;
            let density = build_density(&density.density, density.bound)?;
            let set = driver.generate()?;
            let samples = ar_deterministic(&density, &set.points);
            print_json(&integration::integration_report(&integrand, &density, &samples)?)
        }
        Command::Experiment { config, out } => {
            let text = fs::read_to_string(&config).map_err(|e| io_failure(&config, e))?;
            let cfg: ExperimentConfig =
                serde_json::from_str(&text).map_err(|e| Failure::Io(format!("{}: {e}", config.display())))?;
            cfg.validate()?;
            let report = experiments::run_convergence(&cfg)?;
            fs::create_dir_all(&out).map_err(|e| io_failure(&out, e))?;
            let csv = out.join("rows.csv");
            fs::write(&csv, report.to_csv()).map_err(|e| io_failure(&csv, e))?;
            write_json(&out.join("report.json"), &report)
        }
        Command::Figures { out } => {
            let summaries = experiments::reproduce_figures(&out)?;
            print_json(&summaries)
        }
    }
}

fn configure_threads() -> std::result::Result<(), String> {
    let Ok(value) = std::env::var("QMCAR_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("QMCAR_THREADS must be a positive integer, got `{value}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn one_line(s: &str) -> String {
    s.lines().map(str::trim).filter(|l| !l.is_empty()).collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("usage error");
            eprintln!("{}", first.trim());
            return ExitCode::from(1);
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Domain(msg)) => {
            eprintln!("error: {}", one_line(&msg));
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {}", one_line(&msg));
            ExitCode::from(3)
        }
    }
}
