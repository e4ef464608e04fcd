use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use kkmw_core::delta::{
    envy_free_nested_allocation, hyperplane_piercing_search, nested_partition, DMeasure, PolytopeFamily, PreparedDMeasure,
};
use kkmw_core::engine::{verify_cover, ArgmaxOracle, ArgminOracle, CoverOracle, CoverReport, Mode, Schedule, DEFAULT_SLACK};
use kkmw_core::fair::{envy_free_cake, greedy_division, rental_harmony, CakePlayers, PlayerCover, QuasilinearCover, RentalInstance};
use kkmw_core::interval::{brute_nu, brute_tau, colorful_matching, gallai_oracle, kkm_matching, IntervalInstance, Matching};
use kkmw_core::lines::t4_solve;
use kkmw_core::mass::mass_partition_solve;
use kkmw_core::planar::{ConvexPolygon, PlanarMeasure, Point2};
use kkmw_core::{BarycentricPoint, Error};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::Config;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, files or documents: exit 2.
    Input(String),
    /// The solver could not certify an outcome: exit 3.
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Input(_) => 2,
            Self::Solver(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Input(m) => write!(f, "invalid input: {m}"),
            Self::Solver(m) => write!(f, "solver failure: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::ResolutionExceeded { .. } | Error::AdmissibilityViolation { .. } => Self::Solver(e.to_string()),
            _ => Self::Input(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "kkmw", version, about = "KKM-method solvers for piercing, mass partition and fair division")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Finest grid resolution any solve may use.
    #[arg(long, global = true)]
    pub max_resolution: Option<u32>,
    #[arg(long, global = true)]
    pub log_level: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Piercing numbers and KKM matchings of interval families (`intervals.v1`).
    PierceIntervals {
        #[arg(long)]
        input: PathBuf,
        /// One interval from each family, pairwise disjoint.
        #[arg(long)]
        colorful: bool,
    },
    /// Envy-free cake division (`cake_players.v1`).
    CakeCut {
        #[arg(long)]
        players: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Envy-free rent division (`rental.v1`).
    Rent {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Knife-sliding division with target shares (`cake_players.v1`).
    GreedyDivision {
        #[arg(long)]
        players: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        alphas: Vec<f64>,
    },
    /// Partition of the disk into 2k convex pieces (list of `measure.v1`).
    MassPartition {
        #[arg(long)]
        measures: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        alphas: Vec<f64>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Two-line piercing or a colorful witness for four families (`polygons.v1`).
    LinePierceT4 {
        #[arg(long)]
        families: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.0, 1.0])]
        direction: Vec<f64>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// The nested hyperplane partition at a point of the simplex.
    NestedPartition {
        #[arg(long, value_delimiter = ',', required = true)]
        x: Vec<f64>,
        #[command(flatten)]
        directions: Directions,
        /// Also report the mass of each region (list of `measure.v1`, any dimension).
        #[arg(long)]
        measures: Option<PathBuf>,
    },
    /// Hyperplane piercing or saturation for a family of polytopes (`polytopes.v1`).
    HyperplanePierce {
        #[arg(long)]
        polytopes: PathBuf,
        /// Number of regions; defaults to the dimension plus one.
        #[arg(long)]
        regions: Option<usize>,
        #[command(flatten)]
        directions: Directions,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Envy-free allocation of nested partition regions to measures.
    EnvyAllocate {
        #[arg(long)]
        measures: PathBuf,
        #[command(flatten)]
        directions: Directions,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Samples a built-in cover for covering-condition violations.
    VerifyCover {
        #[arg(long, value_enum)]
        cover: CoverKind,
        /// Instance for gallai, cake and rent covers.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Arity for argmax and argmin; piercing points plus one for gallai.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// HTTP session service for interactive cake and rent solves.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct Directions {
    /// A cut direction `a,b[,c]`; repeat once per cut. Defaults to alternating axes.
    #[arg(long = "direction", value_name = "V")]
    pub direction: Vec<String>,
}

impl Directions {
    fn parse(&self, cuts: usize, dim: usize) -> Result<Vec<Vec<f64>>, CliError> {
        if self.direction.is_empty() {
            return Ok(kkmw_core::delta::default_directions(cuts + 1, dim));
        }
        self.direction
            .iter()
            .map(|s| {
                s.split(',')
                    .map(|t| t.trim().parse::<f64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| CliError::Input(format!("bad direction {s:?}")))
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CoverKind {
    Argmax,
    Argmin,
    Gallai,
    Cake,
    Rent,
}

/// `polygons.v1`.
#[derive(Debug, Deserialize)]
struct PolygonFamilies {
    families: Vec<Vec<Vec<[f64; 2]>>>,
}

#[derive(Serialize)]
struct FamilyPiercing {
    tau: usize,
    nu: usize,
    matching: Matching,
}

#[derive(Serialize)]
#[serde(untagged)]
enum IntervalResult {
    Families { schema: &'static str, families: Vec<FamilyPiercing> },
    Colorful { schema: &'static str, colorful: Matching },
}

#[derive(Serialize)]
struct NestedPartitionOutput {
    schema: &'static str,
    partition: kkmw_core::delta::NestedPartition,
    #[serde(skip_serializing_if = "Option::is_none")]
    masses: Option<Vec<Vec<f64>>>,
}

#[derive(Serialize)]
struct CoverCheck {
    schema: &'static str,
    cover: String,
    passed: bool,
    #[serde(flatten)]
    report: CoverReport,
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de)
        .map_err(|e| CliError::Input(format!("{}: at `{}`: {}", path.display(), e.path(), e.inner())))
}

/// Pretty JSON with a trailing newline, the exact bytes every command prints.
pub fn render<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("results serialize");
    s.push('\n');
    s
}

fn schedule(cfg: &Config) -> Schedule {
    Schedule::doubling(8, cfg.max_resolution)
}

/// Loads the configuration: file, then environment, then flags.
pub fn load_config(cli: &Cli, env: impl Fn(&str) -> Option<String>) -> Result<Config, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => Config::from_file(p)?,
        None => Config::default(),
    }
    .with_env(env)?;
    if let Some(m) = cli.max_resolution {
        cfg.max_resolution = m;
    }
    if let Some(l) = &cli.log_level {
        cfg.log_level = l.clone();
    }
    if let Command::Serve { port, data_dir, ui_dir } = &cli.command {
        if let Some(p) = port {
            cfg.port = *p;
        }
        if let Some(d) = data_dir {
            cfg.data_dir = d.clone();
        }
        if let Some(u) = ui_dir {
            cfg.ui_dir = Some(u.clone());
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one command and returns the document it produces.
pub fn execute(command: &Command, cfg: &Config) -> Result<String, CliError> {
    let tol = |t: &Option<f64>| t.unwrap_or(cfg.default_tolerance);
    Ok(match command {
        Command::PierceIntervals { input, colorful } => {
            let inst: IntervalInstance = read_json(input)?;
            if inst.families.is_empty() {
                return Err(CliError::Input("no families".into()));
            }
            let out = if *colorful {
                IntervalResult::Colorful {
                    schema: "interval_piercing.v1",
                    colorful: colorful_matching(&inst.families)?,
                }
            } else {
                let families = inst
                    .families
                    .iter()
                    .map(|f| {
                        Ok(FamilyPiercing {
                            tau: brute_tau(f),
                            nu: brute_nu(f),
                            matching: kkm_matching(f)?,
                        })
                    })
                    .collect::<Result<_, Error>>()?;
                IntervalResult::Families {
                    schema: "interval_piercing.v1",
                    families,
                }
            };
            render(&out)
        }
        Command::CakeCut { players, tol: t } => {
            let doc: CakePlayers = read_json(players)?;
            doc.validate()?;
            render(&envy_free_cake(&doc.players, tol(t), &schedule(cfg))?)
        }
        Command::Rent { input, tol: t } => {
            let inst: RentalInstance = read_json(input)?;
            render(&rental_harmony(&inst, tol(t), &schedule(cfg))?)
        }
        Command::GreedyDivision { players, alphas } => {
            let doc: CakePlayers = read_json(players)?;
            doc.validate()?;
            render(&greedy_division(&doc.players, alphas)?)
        }
        Command::MassPartition { measures, alphas, tol: t } => {
            let ms: Vec<PlanarMeasure> = read_json(measures)?;
            render(&mass_partition_solve(&ms, alphas, tol(t), &schedule(cfg))?)
        }
        Command::LinePierceT4 { families, direction, tol: t } => {
            let doc: PolygonFamilies = read_json(families)?;
            let fams = doc
                .families
                .into_iter()
                .map(|f| {
                    f.into_iter()
                        .map(|p| ConvexPolygon::new(p.into_iter().map(Point2::from).collect()))
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()?;
            let v = Point2::new(direction[0], direction[1]);
            render(&t4_solve(&fams, v, &schedule(cfg).up_to_tolerance(4, tol(t)))?)
        }
        Command::NestedPartition { x, directions, measures } => {
            let ms: Option<Vec<DMeasure>> = measures.as_deref().map(read_json).transpose()?;
            let dim = ms.as_ref().and_then(|m| m.first()).map_or(2, DMeasure::dim);
            let dirs = directions.parse(x.len().saturating_sub(1), dim)?;
            let x = BarycentricPoint::new(x.clone())?;
            let partition = nested_partition(&x, &dirs)?;
            let masses = ms
                .map(|ms| {
                    ms.iter()
                        .map(|m| {
                            let p = PreparedDMeasure::new(m)?;
                            Ok(partition.regions.iter().map(|r| p.measure(r)).collect())
                        })
                        .collect::<Result<Vec<Vec<f64>>, Error>>()
                })
                .transpose()?;
            render(&NestedPartitionOutput {
                schema: "nested_partition.v1",
                partition,
                masses,
            })
        }
        Command::HyperplanePierce { polytopes, regions, directions, tol: t } => {
            let fam: PolytopeFamily = read_json(polytopes)?;
            let n = regions.unwrap_or(fam.dimension + 1);
            let dirs = directions.parse(n.saturating_sub(1), fam.dimension)?;
            let sched = schedule(cfg).up_to_tolerance(dirs.len() + 1, tol(t));
            render(&hyperplane_piercing_search(&fam, &dirs, &sched)?)
        }
        Command::EnvyAllocate { measures, directions, tol: t } => {
            let ms: Vec<DMeasure> = read_json(measures)?;
            let dim = ms.first().map_or(2, DMeasure::dim);
            let dirs = directions.parse(ms.len().saturating_sub(1), dim)?;
            render(&envy_free_nested_allocation(&ms, &dirs, tol(t), &schedule(cfg))?)
        }
        Command::VerifyCover { cover, input, k, samples, seed } => {
            let need_input = || input.as_deref().ok_or_else(|| CliError::Input("--input is required for this cover".into()));
            let need_k = || k.ok_or_else(|| CliError::Input("--k is required for this cover".into()));
            let report = match cover {
                CoverKind::Argmax => check(&ArgmaxOracle::colorful(need_k()?), *samples, *seed),
                CoverKind::Argmin => check(
                    &ArgminOracle {
                        k: need_k()?,
                        n: 1,
                        slack: DEFAULT_SLACK,
                    },
                    *samples,
                    *seed,
                ),
                CoverKind::Gallai => {
                    let inst: IntervalInstance = read_json(need_input()?)?;
                    let fam = inst.families.first().ok_or_else(|| CliError::Input("no families".into()))?;
                    let k = match k {
                        Some(k) => *k,
                        None => brute_tau(fam).max(2),
                    };
                    check(&gallai_oracle(fam, k), *samples, *seed)
                }
                CoverKind::Cake => {
                    let doc: CakePlayers = read_json(need_input()?)?;
                    doc.validate()?;
                    check(&PlayerCover::new(&doc.players), *samples, *seed)
                }
                CoverKind::Rent => {
                    let inst: RentalInstance = read_json(need_input()?)?;
                    inst.validate()?;
                    check(&QuasilinearCover::new(&inst), *samples, *seed)
                }
            };
            render(&CoverCheck {
                schema: "cover_report.v1",
                cover: format!("{cover:?}").to_lowercase(),
                passed: report.passed(),
                report,
            })
        }
        Command::Serve { .. } => return Err(CliError::Input("serve does not produce a document".into())),
    })
}

fn check<O: CoverOracle + ?Sized>(oracle: &O, samples: usize, seed: u64) -> CoverReport {
    let mode: Mode = oracle.mode();
    verify_cover(oracle, samples, mode, seed)
}

/// Entry point shared by the binary and tests; returns the exit code.
pub fn run(cli: Cli, env: impl Fn(&str) -> Option<String>) -> i32 {
    let result = load_config(&cli, env).and_then(|cfg| {
        if let Command::Serve { .. } = cli.command {
            return crate::server::serve_blocking(cfg).map(|()| None);
        }
        execute(&cli.command, &cfg).map(Some)
    });
    match result {
        Ok(None) => 0,
        Ok(Some(doc)) => {
            let written = match &cli.out {
                Some(path) => std::fs::write(path, &doc).map_err(|e| format!("{}: {e}", path.display())),
                None => {
                    use std::io::Write;
                    std::io::stdout().write_all(doc.as_bytes()).map_err(|e| e.to_string())
                }
            };
            match written {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("kkmw: cannot write output: {e}");
                    2
                }
            }
        }
        Err(e) => {
            eprintln!("kkmw: {e}");
            e.exit_code()
        }
    }
}
