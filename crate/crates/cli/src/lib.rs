//! Command-line front end for `betageo`.
//!
//! Single results are printed as one JSON object; grids and paths as CSV
//! with a header row. Exit codes: 0 success, 1 invalid input, 2 numerical
//! failure, 64 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};

use betageo::canonical::{from_canonical, to_canonical, CanonicalSequence, MomentSequence};
use betageo::embedding::{moment_centroid, rho_distance};
use betageo::frechet::karcher_flow;
use betageo::geodesy::{clt_limit_distance, distance, exp_map, exp_point, log_map, unit_direction, TangentVector};
use betageo::metric::{
    curvature_limit_k1, curvature_limit_k2, det_metric, det_metric_lower_bound, det_metric_quadrature,
    metric_tensor, sectional_curvature,
};
use betageo::{BetaPoint, Error};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(name = "betageo", version, about = "Fisher-Rao geometry of beta distributions and canonical moments")]
struct Cli {
    /// Tolerance passed to iterative commands (det-quad, mean, centroid)
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Worker threads for parallel commands (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for commands that sample; none of the current commands do
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy)]
struct Pair(f64, f64);

#[derive(Debug, Clone)]
struct PairList(Vec<Pair>);

#[derive(Debug, Clone)]
struct Numbers(Vec<f64>);

#[derive(Debug, Clone)]
struct NumberLists(Vec<Vec<f64>>);

fn parse_numbers(s: &str) -> Result<Numbers, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("invalid number '{}': {e}", t.trim())))
        .collect::<Result<Vec<_>, _>>()
        .map(Numbers)
}

fn parse_pair(s: &str) -> Result<Pair, String> {
    match parse_numbers(s)?.0.as_slice() {
        [a, b] => Ok(Pair(*a, *b)),
        _ => Err(format!("expected 'a,b', got '{s}'")),
    }
}

fn parse_pair_list(s: &str) -> Result<PairList, String> {
    s.split(';').filter(|t| !t.trim().is_empty()).map(parse_pair).collect::<Result<_, _>>().map(PairList)
}

fn parse_number_lists(s: &str) -> Result<NumberLists, String> {
    s.split(';')
        .filter(|t| !t.trim().is_empty())
        .map(|t| parse_numbers(t).map(|n| n.0))
        .collect::<Result<_, _>>()
        .map(NumberLists)
}

#[derive(Args, Debug)]
struct PointArg {
    /// Point as alpha,beta
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    point: Pair,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum Spacing {
    Linear,
    Log,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fisher metric tensor and its determinant
    Metric(PointArg),
    /// Closed-form metric determinant
    Det(PointArg),
    /// Lower bound (1+α+β)/(2αβ(α+β)²) on the determinant
    DetBound(PointArg),
    /// Determinant from its integral representation
    DetQuad(PointArg),
    /// Sectional curvature at a point, or one of the boundary limits
    #[command(group(ArgGroup::new("which").required(true)))]
    Curvature {
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true, group = "which")]
        point: Option<Pair>,
        /// Limit of K along β → ∞ at this α
        #[arg(long, group = "which")]
        k1: Option<f64>,
        /// Limit of K along β → 0 at this α
        #[arg(long, group = "which")]
        k2: Option<f64>,
    },
    /// Curvature over a grid, as CSV alpha,beta,curvature
    CurvatureGrid {
        #[arg(long, default_value_t = 1e-3)]
        alpha_min: f64,
        #[arg(long, default_value_t = 1e3)]
        alpha_max: f64,
        #[arg(long, default_value_t = 1e-3)]
        beta_min: f64,
        #[arg(long, default_value_t = 1e3)]
        beta_max: f64,
        #[arg(long, default_value_t = 100)]
        resolution: usize,
        #[arg(long, value_enum, default_value_t = Spacing::Log)]
        spacing: Spacing,
    },
    /// Geodesic from a point with an initial velocity, as CSV t,alpha,beta,dalpha,dbeta
    Geodesic {
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        point: Pair,
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        velocity: Pair,
        #[arg(long, default_value_t = 100)]
        steps: usize,
    },
    /// Initial velocity of the geodesic between two points
    Log {
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        from: Pair,
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        to: Pair,
    },
    /// Fisher-Rao distance between two points
    Distance {
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        from: Pair,
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        to: Pair,
    },
    /// Geodesic sphere of a given radius, as CSV theta,alpha,beta
    Ball {
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        center: Pair,
        #[arg(long)]
        radius: f64,
        #[arg(long, default_value_t = 256)]
        directions: usize,
    },
    /// Fréchet mean of points given as 'a,b;c,d;…' or one per line in a file
    Mean {
        #[arg(long, value_parser = parse_pair_list, allow_hyphen_values = true, required_unless_present = "file")]
        points: Option<PairList>,
        #[arg(long, conflicts_with = "points")]
        file: Option<PathBuf>,
        #[arg(long, value_parser = parse_numbers, allow_hyphen_values = true)]
        weights: Option<Numbers>,
        /// Starting point of the Karcher flow (default: Euclidean mean)
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        init: Option<Pair>,
    },
    /// Canonical moments of a moment sequence c1,c2,…
    Canonical {
        #[arg(long, value_parser = parse_numbers, allow_hyphen_values = true)]
        moments: Numbers,
    },
    /// Moment sequence of canonical moments p1,p2,…
    Moments {
        #[arg(long, value_parser = parse_numbers, allow_hyphen_values = true)]
        canonical: Numbers,
    },
    /// Dissimilarity between two moment sequences
    Rho {
        #[arg(long, value_parser = parse_numbers, allow_hyphen_values = true)]
        first: Numbers,
        #[arg(long, value_parser = parse_numbers, allow_hyphen_values = true)]
        second: Numbers,
    },
    /// Centroid of moment sequences given as 'c1,c2;c1,c2;…' or one per line in a file
    Centroid {
        #[arg(long, value_parser = parse_number_lists, allow_hyphen_values = true, required_unless_present = "file")]
        sequences: Option<NumberLists>,
        #[arg(long, conflicts_with = "sequences")]
        file: Option<PathBuf>,
    },
    /// Distance between B(nα, nλα) and B(nα′, nλα′) against its large-n limit
    CltCheck {
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 2.0)]
        alpha_prime: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, value_parser = parse_numbers, allow_hyphen_values = true, default_value = "10,100,1000")]
        n: Numbers,
    },
}

/// Failure of a command, mapped to an exit code.
#[derive(Debug)]
enum Failure {
    Lib(Error),
    Input(String),
    Io(std::io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

type Outcome = Result<(), Failure>;

fn point(p: Pair) -> Result<BetaPoint, Error> {
    BetaPoint::new(p.0, p.1)
}

fn write_json(out: &mut dyn Write, v: Value) -> Outcome {
    writeln!(out, "{v}")?;
    Ok(())
}

fn csv_row(out: &mut dyn Write, values: &[f64]) -> std::io::Result<()> {
    let cells: Vec<String> = values.iter().map(|v| format!("{v:.16e}")).collect();
    writeln!(out, "{}", cells.join(","))
}

fn read_lines(path: &PathBuf) -> Result<Vec<String>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

fn grid(min: f64, max: f64, n: usize, spacing: Spacing) -> Vec<f64> {
    let f = |i: usize| i as f64 / (n - 1) as f64;
    let mut g: Vec<f64> = match spacing {
        Spacing::Linear => (0..n).map(|i| min + f(i) * (max - min)).collect(),
        Spacing::Log => (0..n).map(|i| (min.ln() + f(i) * (max / min).ln()).exp()).collect(),
    };
    g[0] = min;
    g[n - 1] = max;
    g
}

fn execute(cli: Cli, out: &mut dyn Write) -> Outcome {
    match cli.command {
        Command::Metric(PointArg { point: p }) => {
            let g = metric_tensor(&point(p)?);
            write_json(out, json!({"g_aa": g.g_aa, "g_ab": g.g_ab, "g_bb": g.g_bb, "det": g.det()}))
        }
        Command::Det(PointArg { point: p }) => write_json(out, json!({"det": det_metric(&point(p)?)})),
        Command::DetBound(PointArg { point: p }) => {
            write_json(out, json!({"det_lower_bound": det_metric_lower_bound(&point(p)?)}))
        }
        Command::DetQuad(PointArg { point: p }) => {
            let b = point(p)?;
            let q = det_metric_quadrature(&b, cli.tol.unwrap_or(1e-8))?;
            write_json(out, json!({"det_quadrature": q, "det": det_metric(&b)}))
        }
        Command::Curvature { point: Some(p), .. } => {
            write_json(out, json!({"curvature": sectional_curvature(&point(p)?)}))
        }
        Command::Curvature { k1: Some(a), .. } => write_json(out, json!({"k1": curvature_limit_k1(a)?})),
        Command::Curvature { k2: Some(a), .. } => write_json(out, json!({"k2": curvature_limit_k2(a)?})),
        Command::Curvature { .. } => unreachable!("clap requires one of --point, --k1, --k2"),
        Command::CurvatureGrid { alpha_min, alpha_max, beta_min, beta_max, resolution, spacing } => {
            let valid = |lo: f64, hi: f64| lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi;
            if !valid(alpha_min, alpha_max) || !valid(beta_min, beta_max) || resolution < 2 {
                return Err(Failure::Input("grid needs 0 < min < max on both axes and resolution ≥ 2".into()));
            }
            let alphas = grid(alpha_min, alpha_max, resolution, spacing);
            let betas = grid(beta_min, beta_max, resolution, spacing);
            let rows: Vec<[f64; 3]> = alphas
                .par_iter()
                .flat_map_iter(|&a| {
                    betas.iter().map(move |&b| {
                        let k = sectional_curvature(&BetaPoint::new(a, b).expect("grid is positive"));
                        [a, b, k]
                    })
                })
                .collect();
            writeln!(out, "alpha,beta,curvature")?;
            for r in rows {
                csv_row(out, &r)?;
            }
            Ok(())
        }
        Command::Geodesic { point: p, velocity, steps } => {
            let v = TangentVector::new(point(p)?, velocity.0, velocity.1)?;
            let path = exp_map(&v, steps)?;
            writeln!(out, "t,alpha,beta,dalpha,dbeta")?;
            for ((t, x), dx) in path.times.iter().zip(&path.points).zip(&path.velocities) {
                csv_row(out, &[*t, x.alpha(), x.beta(), dx.d_alpha(), dx.d_beta()])?;
            }
            Ok(())
        }
        Command::Log { from, to } => {
            let v = log_map(&point(from)?, &point(to)?)?;
            write_json(out, json!({"dalpha": v.d_alpha(), "dbeta": v.d_beta(), "norm": v.fisher_norm()}))
        }
        Command::Distance { from, to } => {
            write_json(out, json!({"distance": distance(&point(from)?, &point(to)?)?}))
        }
        Command::Ball { center, radius, directions } => {
            if !(radius.is_finite() && radius >= 0.0) || directions == 0 {
                return Err(Failure::Input("ball needs a nonnegative radius and at least one direction".into()));
            }
            let c = point(center)?;
            let thetas: Vec<f64> =
                (0..directions).map(|i| std::f64::consts::TAU * i as f64 / directions as f64).collect();
            let rows = thetas
                .par_iter()
                .map(|&th| exp_point(&unit_direction(&c, th).scaled(radius)).map(|q| [th, q.alpha(), q.beta()]))
                .collect::<Result<Vec<_>, _>>()?;
            writeln!(out, "theta,alpha,beta")?;
            for r in rows {
                csv_row(out, &r)?;
            }
            Ok(())
        }
        Command::Mean { points, file, weights, init } => {
            let pairs = match (points, file) {
                (Some(p), _) => p.0,
                (None, Some(f)) => read_lines(&f)?
                    .iter()
                    .map(|l| parse_pair(l).map_err(Failure::Input))
                    .collect::<Result<_, _>>()?,
                (None, None) => unreachable!("clap requires one of --points, --file"),
            };
            let pts = pairs.into_iter().map(point).collect::<Result<Vec<_>, _>>()?;
            let init = init.map(point).transpose()?;
            let r = karcher_flow(&pts, weights.as_ref().map(|w| w.0.as_slice()), cli.tol.unwrap_or(1e-10), init)?;
            write_json(
                out,
                json!({
                    "alpha": r.mean.alpha(),
                    "beta": r.mean.beta(),
                    "gradient_norm": r.gradient_norm,
                    "iterations": r.iterations,
                }),
            )
        }
        Command::Canonical { moments } => {
            let p = to_canonical(&MomentSequence::new(moments.0)?)?;
            write_json(out, json!({"p": p.values()}))
        }
        Command::Moments { canonical } => {
            let c = from_canonical(&CanonicalSequence::new(canonical.0)?)?;
            write_json(out, json!({"c": c.values()}))
        }
        Command::Rho { first, second } => {
            let rho = rho_distance(&MomentSequence::new(first.0)?, &MomentSequence::new(second.0)?)?;
            write_json(out, json!({"rho": rho}))
        }
        Command::Centroid { sequences, file } => {
            let lists = match (sequences, file) {
                (Some(s), _) => s.0,
                (None, Some(f)) => read_lines(&f)?
                    .iter()
                    .map(|l| parse_numbers(l).map(|n| n.0).map_err(Failure::Input))
                    .collect::<Result<_, _>>()?,
                (None, None) => unreachable!("clap requires one of --sequences, --file"),
            };
            let cs = lists.into_iter().map(MomentSequence::new).collect::<Result<Vec<_>, _>>()?;
            let c = moment_centroid(&cs, cli.tol.unwrap_or(1e-10))?;
            let p = to_canonical(&c)?;
            write_json(out, json!({"c": c.values(), "p": p.values()}))
        }
        Command::CltCheck { alpha, alpha_prime, lambda, n } => {
            let limit = clt_limit_distance(alpha, alpha_prime)?;
            if !(lambda.is_finite() && lambda > 0.0) {
                return Err(Failure::Input(format!("lambda must be positive, got {lambda}")));
            }
            let mut rows = Vec::new();
            let mut errors = Vec::new();
            for &k in &n.0 {
                let a = BetaPoint::new(k * alpha, k * lambda * alpha)?;
                let b = BetaPoint::new(k * alpha_prime, k * lambda * alpha_prime)?;
                let d = distance(&a, &b)?;
                errors.push((d - limit).abs());
                rows.push(json!({"n": k, "distance": d, "error": (d - limit).abs()}));
            }
            let monotone = errors.windows(2).all(|w| w[1] < w[0]);
            write_json(out, json!({"limit": limit, "rows": rows, "monotone": monotone}))
        }
    }
}

/// Parse `args` (including the program name), run the command, and return
/// the process exit code. Results go to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    let pool = match cli.threads {
        Some(0) => {
            let _ = writeln!(err, "error: --threads must be at least 1");
            return EXIT_USAGE;
        }
        Some(t) => rayon::ThreadPoolBuilder::new().num_threads(t).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: cannot start thread pool: {e}");
            return EXIT_NUMERICAL;
        }
    };
    // Output is buffered so a failing command never leaves a partial table.
    let mut buffer = Vec::new();
    let result = pool.install(|| execute(cli, &mut buffer));
    match result.and_then(|()| out.write_all(&buffer).map_err(Failure::Io)) {
        Ok(()) => EXIT_OK,
        Err(Failure::Lib(e)) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_DOMAIN
            }
        }
        Err(Failure::Input(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_DOMAIN
        }
        Err(Failure::Io(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_DOMAIN
        }
    }
}
