use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use porosity_lab::balls::{ball_count, BallScope};
use porosity_lab::error::Error;
use porosity_lab::generators::{GeneratorKind, GeneratorSpec};
use porosity_lab::holes::{hole_doubling_constant, hole_profile, lemma33_constant, BallRef};
use porosity_lab::io::{load_augmented_space, save_augmented_space, space_to_json};
use porosity_lab::msdist::{delta_space, ms_distance, sandwich_holds, MsParams};
use porosity_lab::muckenhoupt::{a1_constant, decay_profile, distance_weight};
use porosity_lab::pipeline::{resolution_sweep, run_pipeline, PipelineConfig, SweepConfig};
use porosity_lab::porosity::{certify_porosity, CertifyOptions, PorosityStatus};
use porosity_lab::report::to_json;
use porosity_lab::space::{validate_quasi_metric, AugmentedSpace, PointId};
use porosity_lab::whitney::{verify_cover, whitney_cover};

const EXIT_NOT_CERTIFIED: u8 = 2;
const EXIT_DISPROVED: u8 = 3;
const EXIT_VALIDATION: u8 = 4;
const EXIT_CONFIG: u8 = 5;

#[derive(Parser)]
#[command(name = "porosity-lab", version, about = "Holes, weak porosity and A1 weights on finite quasi-metric spaces")]
struct Cli {
    /// Space file (JSON or CSV).
    #[arg(long, global = true)]
    space: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// CSV trend table; defaults to the output path with a .csv extension.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// Worker threads (POROSITY_LAB_THREADS takes precedence).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Reserved; every generator is deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Balls to scan: `exhaustive` or `geometric:<per_octave>`.
    #[arg(long, global = true, value_parser = parse_scope, default_value = "exhaustive")]
    scope: BallScope,
    #[command(subcommand)]
    cmd: Command,
}

fn parse_scope(s: &str) -> Result<BallScope, String> {
    match s.split_once(':') {
        None if s == "exhaustive" => Ok(BallScope::Exhaustive),
        Some(("geometric", k)) => match k.parse::<u32>() {
            Ok(per_octave) if per_octave > 0 => Ok(BallScope::Geometric { per_octave }),
            _ => Err(format!("bad per_octave {k:?}")),
        },
        _ => Err(format!("unknown scope {s:?}; use exhaustive or geometric:<k>")),
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Grid,
    Cantor,
    Lacunary,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum, required_unless_present = "spec")]
    kind: Option<Kind>,
    /// Generator spec file (JSON or TOML) instead of flags.
    #[arg(long, conflicts_with = "kind")]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    ratio: f64,
    #[arg(long, default_value_t = 4)]
    depth: u32,
    #[arg(long, default_value_t = 1)]
    mesh_factor: u32,
    #[arg(long, default_value_t = 1)]
    dimension: usize,
    #[arg(long, default_value_t = 16)]
    n_per_side: usize,
    #[arg(long, default_value_t = 0.0)]
    measure_exponent: f64,
    /// Obstacle at the origin (grid only).
    #[arg(long)]
    origin_obstacle: bool,
    #[arg(long, default_value_t = 1.0)]
    snowflake: f64,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a space file.
    Gen(GenArgs),
    /// Check the space and report K and A.
    Validate,
    /// Hole of every ball, hole doubling constant and C0.
    Holes {
        /// Omit the per-ball list above this many balls.
        #[arg(long, default_value_t = 100_000)]
        per_ball_limit: usize,
    },
    /// Certify weak porosity.
    Certify {
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        gamma: f64,
    },
    /// A1 constant of dist(., E)^(-alpha).
    A1 {
        #[arg(long, required = true, num_args = 1..)]
        alpha: Vec<f64>,
    },
    /// Measures of obstacle neighbourhoods in one ball.
    Decay {
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 20)]
        kmax: u32,
        /// Ball center; the first sample point when absent.
        #[arg(long)]
        center: Option<PointId>,
        /// Ball radius; the whole space when absent.
        #[arg(long)]
        radius: Option<f64>,
    },
    /// Whitney cover of a set of sample points.
    Whitney {
        /// JSON list of ids, or whitespace/comma separated ids.
        #[arg(long)]
        omega: PathBuf,
    },
    /// Chain quasi-distance.
    MsDistance {
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        n_max: Option<u32>,
    },
    /// Resolution sweep.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Config-driven pipeline.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Self {
        let code = match err.downcast_ref::<Error>().map(Error::root) {
            Some(e) if e.is_validation() || matches!(e, Error::Parse { .. }) => EXIT_VALIDATION,
            _ => EXIT_CONFIG,
        };
        Failure { code, err }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::new(e).into()
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

fn threads(cli: &Cli) -> Result<Option<usize>, Failure> {
    match std::env::var("POROSITY_LAB_THREADS") {
        Ok(v) => v
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("POROSITY_LAB_THREADS = {v:?} is not a count")).into()),
        Err(_) => Ok(cli.threads),
    }
}

fn space(cli: &Cli) -> Result<AugmentedSpace, Failure> {
    let path = cli.space.as_ref().ok_or_else(|| Error::Config("--space is required".into()))?;
    Ok(load_augmented_space(path)?)
}

fn emit<T: Serialize>(cli: &Cli, value: &T) -> Result<(), Failure> {
    let text = to_json(value);
    match &cli.out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn emit_csv(cli: &Cli, text: &str) -> Result<(), Failure> {
    let path = cli.csv.clone().or_else(|| cli.out.as_ref().map(|p| p.with_extension("csv")));
    if let Some(p) = path {
        fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn status_code(s: PorosityStatus) -> u8 {
    match s {
        PorosityStatus::Certified => 0,
        PorosityStatus::NotCertified => EXIT_NOT_CERTIFIED,
        PorosityStatus::Disproved => EXIT_DISPROVED,
    }
}

fn read_omega(path: &Path) -> Result<Vec<PointId>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    if let Ok(ids) = serde_json::from_str::<Vec<PointId>>(&text) {
        return Ok(ids);
    }
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| Error::Config(format!("{}: {t:?} is not a point id", path.display())).into()))
        .collect()
}

fn gen_spec(a: &GenArgs) -> Result<GeneratorSpec, Failure> {
    if let Some(p) = &a.spec {
        let text = fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
        let toml = p.extension().is_some_and(|e| e == "toml");
        let spec = if toml {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        } else {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        };
        return Ok(spec);
    }
    let kind = match a.kind.expect("clap enforces --kind or --spec") {
        Kind::Grid => GeneratorKind::Grid {
            dimension: a.dimension,
            n_per_side: a.n_per_side,
            measure_exponent: a.measure_exponent,
            obstacles: if a.origin_obstacle { vec![vec![0.0; a.dimension]] } else { vec![] },
        },
        Kind::Cantor => GeneratorKind::Cantor { ratio: a.ratio, depth: a.depth, mesh_factor: a.mesh_factor },
        Kind::Lacunary => GeneratorKind::Lacunary { depth: a.depth },
    };
    Ok(GeneratorSpec { kind, snowflake: a.snowflake, scale: a.scale })
}

#[derive(Serialize)]
struct ValidateOut {
    valid: bool,
    n_sample: usize,
    n_obstacles: usize,
    #[serde(rename = "K")]
    k: f64,
    #[serde(rename = "A")]
    a: f64,
}

#[derive(Serialize)]
struct HolesOut {
    #[serde(skip_serializing_if = "Option::is_none")]
    per_ball: Option<Vec<porosity_lab::holes::HoleEntry>>,
    doubling: porosity_lab::holes::HoleDoublingReport,
    lemma33: porosity_lab::holes::Lemma33Report,
}

#[derive(Serialize)]
struct MsChecks {
    sandwich: bool,
    k_bound: bool,
}

#[derive(Serialize)]
struct MsOut {
    ids: Vec<PointId>,
    delta_table: Vec<Vec<f64>>,
    beta: f64,
    #[serde(rename = "K_delta")]
    k_delta: f64,
    #[serde(rename = "K_delta_bound")]
    k_delta_bound: f64,
    params: MsParams,
    checks: MsChecks,
}

#[derive(Serialize)]
struct WhitneyOut {
    cover: porosity_lab::whitney::WhitneyCover,
    verdict: porosity_lab::whitney::CoverVerdict,
}

#[derive(Serialize)]
struct DecayOut {
    ball: BallRef,
    p: f64,
    steps: Vec<porosity_lab::muckenhoupt::DecayStep>,
}

fn run(cli: Cli) -> Result<u8, Failure> {
    if let Some(n) = threads(&cli)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match &cli.cmd {
        Command::Gen(a) => {
            let s = gen_spec(a)?.build()?;
            match &cli.out {
                Some(p) => save_augmented_space(&s, p)?,
                None => print!("{}", space_to_json(&s)),
            }
        }
        Command::Validate => {
            let s = space(&cli)?;
            let k = validate_quasi_metric(&s)?;
            let a = porosity_lab::balls::doubling_report(&s, cli.scope).a;
            emit(&cli, &ValidateOut { valid: true, n_sample: s.n_sample(), n_obstacles: s.n_obstacles(), k, a })?;
        }
        Command::Holes { per_ball_limit } => {
            let s = space(&cli)?;
            let per_ball =
                if ball_count(&s, cli.scope) <= *per_ball_limit { Some(hole_profile(&s, cli.scope)?) } else { None };
            let out = HolesOut {
                per_ball,
                doubling: hole_doubling_constant(&s, cli.scope)?,
                lemma33: lemma33_constant(&s, cli.scope)?,
            };
            emit(&cli, &out)?;
        }
        Command::Certify { sigma, gamma } => {
            let s = space(&cli)?;
            let opts = CertifyOptions { scope: cli.scope, ..CertifyOptions::default() };
            let r = certify_porosity(&s, *sigma, *gamma, &opts)?;
            emit(&cli, &r)?;
            return Ok(status_code(r.status));
        }
        Command::A1 { alpha } => {
            let s = space(&cli)?;
            let reports = alpha
                .iter()
                .map(|&al| {
                    let w = distance_weight(&s, al)?;
                    Ok(porosity_lab::pipeline::A1Entry { alpha: al, report: a1_constant(&s, &w, cli.scope, 0)? })
                })
                .collect::<Result<Vec<_>, Error>>()?;
            emit(&cli, &reports)?;
        }
        Command::Decay { p, kmax, center, radius } => {
            let s = space(&cli)?;
            let ball = BallRef {
                center: center.unwrap_or_else(|| s.id(0)),
                radius: radius.unwrap_or_else(|| s.full_radius()),
            };
            let steps = decay_profile(&s, ball, *p, *kmax)?;
            emit(&cli, &DecayOut { ball, p: *p, steps })?;
        }
        Command::Whitney { omega } => {
            let s = space(&cli)?;
            let ids = read_omega(omega)?;
            let cover = whitney_cover(&s, &ids)?;
            let verdict = verify_cover(&s, &ids, &cover, cover.k)?;
            emit(&cli, &WhitneyOut { cover, verdict })?;
        }
        Command::MsDistance { a, n_max } => {
            let s = space(&cli)?;
            let mut params = MsParams::default_for(&s)?;
            if let Some(a) = a {
                params.a = *a;
            }
            if let Some(n) = n_max {
                params.n_max = *n;
            }
            let r = ms_distance(&s, &params)?;
            let sandwich = sandwich_holds(&s, &r)?;
            let k_delta = validate_quasi_metric(&delta_space(&s, &r)?)?;
            let out = MsOut {
                ids: r.ids.clone(),
                delta_table: r.delta.clone(),
                beta: r.beta,
                k_delta,
                k_delta_bound: r.k_delta_bound,
                params: r.params,
                checks: MsChecks { sandwich, k_bound: k_delta <= r.k_delta_bound + 1e-9 },
            };
            emit(&cli, &out)?;
        }
        Command::Sweep { spec } => {
            let mut cfg = SweepConfig::load(spec)?;
            if let GeneratorKind::File { .. } = cfg.generator.kind {
                return Err(Error::Config("a sweep needs a generator with a depth".into()).into());
            }
            if cfg.scope == BallScope::Exhaustive && cli.scope != BallScope::Exhaustive {
                cfg.scope = cli.scope;
            }
            let r = resolution_sweep(&cfg)?;
            emit(&cli, &r)?;
            emit_csv(&cli, &r.trend_csv())?;
        }
        Command::Run { config } => {
            let cfg = PipelineConfig::load(config)?;
            let r = run_pipeline(&cfg)?;
            emit(&cli, &r)?;
            emit_csv(&cli, &r.summary_csv())?;
            return Ok(r.porosity_status().map_or(0, status_code));
        }
    }
    Ok(0)
}
