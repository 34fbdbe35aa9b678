//! Command-line front end.
//!
//! Reports are JSON with keys in declaration order and every float written
//! as `{:.16e}`; tables are CSV with the same float format. Exit codes: 0 on
//! success, 2 when the marginals fail convex order or a dispersion
//! assumption (a JSON diagnostic is written to the output), 1 otherwise.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::ser::Formatter;
use serde_json::Value;

use crate::bounds::{report_for, BoundOptions, BoundReport};
use crate::curve::Side;
use crate::error::Error;
use crate::hedge::{HedgePair, SUBHEDGE_TOL};
use crate::lower::CouplingMap;
use crate::measure::{decompose_with, Measure, MeasureSpec, ORDER_TOL};
use crate::multiperiod::{bound_sequence, MarginalSequence};
use crate::oracle::{oracle_bound, Sense, DEFAULT_CELLS};
use crate::potential::Potential;
use crate::upper::{check_strengthened, jensen_bound, UpperCouplingMap, UpperVerdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// `NxM` grid size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSize {
    pub nx: usize,
    pub ny: usize,
}

impl FromStr for GridSize {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected NxM, got {s:?}"))?;
        let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
        Ok(GridSize {
            nx: parse(a)?,
            ny: parse(b)?,
        })
    }
}

impl std::fmt::Display for GridSize {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.nx, self.ny)
    }
}

#[derive(Debug, Parser)]
#[command(name = "straddle-bounds", version, about = "Robust price bounds for forward-start straddles")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,

    /// Write the main output to this file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Output format of the main output (reports default to json, tables to csv).
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Seed for sampling.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Slack allowed in `C_mu <= C_nu`.
    #[arg(long, global = true, default_value_t = ORDER_TOL)]
    pub tol_order: f64,

    /// A hedge is certified when the Lagrangian is at least `-tol` on the grid
    /// and at most `tol` in absolute value on the coupling's support.
    #[arg(long, global = true, default_value_t = SUBHEDGE_TOL)]
    pub tol_subhedge: f64,
}

#[derive(Debug, Args)]
pub struct Pair {
    /// Law of the forward at the first date (JSON).
    pub mu: PathBuf,
    /// Law of the forward at the second date (JSON).
    pub nu: PathBuf,
}

#[derive(Debug, Args)]
pub struct Axis {
    /// Left end of the evaluation grid.
    #[arg(long, allow_hyphen_values = true)]
    pub from: Option<f64>,
    /// Right end of the evaluation grid.
    #[arg(long, allow_hyphen_values = true)]
    pub to: Option<f64>,
    /// Number of grid points.
    #[arg(long, default_value_t = 201)]
    pub points: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check convex order and the dispersion assumptions.
    Check {
        #[command(flatten)]
        pair: Pair,
    },
    /// Lower bound: price, dual value, duality gap and subhedge certificate.
    Lower {
        #[command(flatten)]
        pair: Pair,
        /// Lagrangian grid used for the certificate.
        #[arg(long, default_value = "200x200")]
        grid: GridSize,
        /// Number of quantiles at which the coupling's second marginal is compared with nu.
        #[arg(long, default_value_t = 200)]
        quantiles: usize,
        /// Write u, x_u, P, Q, phi, zeta, w to this CSV file.
        #[arg(long)]
        curves: Option<PathBuf>,
        /// Draw this many pairs from the coupling.
        #[arg(long, requires = "sample_out")]
        sample: Option<usize>,
        /// CSV file for the pairs drawn with --sample.
        #[arg(long)]
        sample_out: Option<PathBuf>,
    },
    /// Upper bound under the strengthened dispersion assumption.
    Upper {
        #[command(flatten)]
        pair: Pair,
        /// Write u, x_u, G, H, phi to this CSV file.
        #[arg(long)]
        curves: Option<PathBuf>,
    },
    /// Hedge table x, psi(x), delta(x).
    Hedge {
        #[command(flatten)]
        pair: Pair,
        #[command(flatten)]
        axis: Axis,
        /// Emit the Lagrangian certificate on an NX by NY grid instead of the table.
        #[arg(long, num_args = 2, value_names = ["NX", "NY"])]
        lagrangian_grid: Option<Vec<usize>>,
    },
    /// Draw pairs (X, Y) from the optimal coupling.
    Sample {
        #[command(flatten)]
        pair: Pair,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Sample the maximising coupling instead of the minimising one.
        #[arg(long)]
        upper: bool,
    },
    /// Minimum of the hedge Lagrangian over a grid and the coupling's support.
    Verify {
        #[command(flatten)]
        pair: Pair,
        #[arg(long, default_value = "1000x1000")]
        grid: GridSize,
    },
    /// Sum of lower bounds over consecutive pairs of a sequence of marginals.
    Multi {
        /// Marginals in time order.
        #[arg(num_args = 2.., required = true)]
        measures: Vec<PathBuf>,
        #[arg(long, default_value = "200x200")]
        grid: GridSize,
        #[arg(long, default_value_t = 200)]
        quantiles: usize,
    },
    /// Discretised linear-programming bound.
    Oracle {
        #[command(flatten)]
        pair: Pair,
        /// Cells per piece of each marginal.
        #[arg(long, default_value_t = DEFAULT_CELLS)]
        n: usize,
        #[arg(long, value_enum, default_value_t = SenseArg::Min)]
        sense: SenseArg,
    },
    /// Table x, D(x), D'(x-), D'(x+) of D = C_nu - C_mu.
    Curves {
        #[command(flatten)]
        pair: Pair,
        #[command(flatten)]
        axis: Axis,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SenseArg {
    Min,
    Max,
}

#[derive(Debug)]
enum Failure {
    /// Bad flags, unreadable files or malformed JSON.
    Input(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// Writes floats as `{:.16e}`; everything else as compact JSON.
struct Fixed;

impl Formatter for Fixed {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{}", num(v))
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(v))
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Fixed);
    v.serialize(&mut ser).expect("in-memory serialisation");
    let mut s = String::from_utf8(buf).expect("JSON is UTF-8");
    s.push('\n');
    s
}

struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(columns: &[&'static str]) -> Table {
        Table {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    fn csv(&self) -> Outcome<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|&v| num(v)))?;
        }
        w.into_inner().map_err(|e| Failure::Input(e.to_string()))
    }

    fn json(&self) -> Vec<u8> {
        #[derive(Serialize)]
        struct Body<'a> {
            columns: &'a [&'static str],
            rows: &'a [Vec<f64>],
        }
        to_json(&Body {
            columns: &self.columns,
            rows: &self.rows,
        })
        .into_bytes()
    }
}

/// A flat report as one CSV header plus one row.
fn report_csv<T: Serialize>(v: &T) -> Outcome<Vec<u8>> {
    let Ok(Value::Object(map)) = serde_json::to_value(v) else {
        return Err(Failure::Input("report is not a JSON object".into()));
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(map.keys())?;
    let mut row = Vec::with_capacity(map.len());
    for (k, v) in &map {
        row.push(match v {
            Value::Number(n) if n.is_f64() => num(n.as_f64().unwrap_or(f64::NAN)),
            Value::Number(n) => n.to_string(),
            Value::Bool(b) => b.to_string(),
            Value::String(s) => s.clone(),
            Value::Null => String::new(),
            _ => return Err(Failure::Input(format!("field {k} is not a scalar; use --format json"))),
        });
    }
    w.write_record(&row)?;
    w.into_inner().map_err(|e| Failure::Input(e.to_string()))
}

enum Output {
    Report(Vec<u8>),
    Table(Table),
}

fn report<T: Serialize>(cfg: &RunConfig, v: &T) -> Outcome<Output> {
    Ok(Output::Report(match cfg.format.unwrap_or(Format::Json) {
        Format::Json => to_json(v).into_bytes(),
        Format::Csv => report_csv(v)?,
    }))
}

fn read_measure(path: &Path) -> Outcome<Measure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let spec = MeasureSpec::from_json(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    spec.to_measure()
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn read_pair(p: &Pair) -> Outcome<(Measure, Measure)> {
    Ok((read_measure(&p.mu)?, read_measure(&p.nu)?))
}

fn write_file(path: &Path, bytes: &[u8]) -> Outcome<()> {
    fs::write(path, bytes).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn check_grid(name: &str, nx: usize, ny: usize) -> Outcome<()> {
    if nx < 2 || ny < 2 {
        return Err(Failure::Input(format!("--{name} needs at least 2 points per axis")));
    }
    Ok(())
}

fn axis_points(axis: &Axis, default: (f64, f64)) -> Outcome<Vec<f64>> {
    if axis.points < 2 {
        return Err(Failure::Input("--points must be at least 2".into()));
    }
    let lo = axis.from.unwrap_or(default.0);
    let hi = axis.to.unwrap_or(default.1);
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Failure::Input(format!("empty grid [{lo}, {hi}]")));
    }
    let n = axis.points;
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

#[derive(Serialize)]
struct CheckReport {
    convex_order: bool,
    dispersion: bool,
    kappa: f64,
    a: f64,
    b: f64,
    gamma_a: f64,
    /// The strengthened assumption needed by `upper`.
    upper_assumption: bool,
    upper_detail: String,
}

#[derive(Serialize)]
struct LowerReport {
    #[serde(flatten)]
    bound: BoundReport,
    certified: bool,
}

#[derive(Serialize)]
struct UpperReport {
    price: f64,
    jensen_bound: f64,
}

#[derive(Serialize)]
struct Certificate {
    min_lagrangian: f64,
    argmin_x: f64,
    argmin_y: f64,
    support_max_abs: f64,
    passed: bool,
}

#[derive(Serialize)]
struct MultiReport {
    total: f64,
    steps: Vec<BoundReport>,
}

#[derive(Serialize)]
struct Diagnostic {
    condition: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    step: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    violated_at: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    interval: Option<[f64; 2]>,
    message: String,
}

fn diagnostic(e: &Error) -> Diagnostic {
    let mut d = Diagnostic {
        condition: "",
        step: None,
        violated_at: None,
        interval: None,
        message: e.to_string(),
    };
    let mut cur = e;
    while let Error::Step { step, source } = cur {
        d.step.get_or_insert(*step);
        cur = source;
    }
    match cur {
        Error::ConvexOrder { at } => {
            d.condition = "convex_order";
            d.violated_at = Some(*at);
        }
        Error::Dispersion { lo, hi } => {
            d.condition = "dispersion";
            d.interval = Some([*lo, *hi]);
        }
        _ => d.condition = "strengthened_dispersion",
    }
    d
}

fn describe(v: UpperVerdict) -> String {
    match v {
        UpperVerdict::Holds => String::new(),
        UpperVerdict::PointMass(x) => format!("mu is a point mass at {x}"),
        UpperVerdict::CommonMass(k) => format!("common mass {k:e} is positive"),
        UpperVerdict::NuInsideHull { a, b, mass } => format!("nu puts mass {mass:e} inside ({a}, {b})"),
    }
}

fn certificate(hedge: &HedgePair<'_>, nx: usize, ny: usize, tol: f64) -> Outcome<Certificate> {
    let c = hedge.verify_subhedge(nx, ny)?;
    Ok(Certificate {
        min_lagrangian: c.min_lagrangian,
        argmin_x: c.argmin.0,
        argmin_y: c.argmin.1,
        support_max_abs: c.support_max_abs,
        passed: c.min_lagrangian >= -tol && c.support_max_abs <= tol,
    })
}

fn lower_map(cfg: &RunConfig, p: &Pair) -> Outcome<CouplingMap> {
    let (mu, nu) = read_pair(p)?;
    let pair = decompose_with(&mu, &nu, cfg.tol_order)?;
    Ok(CouplingMap::build(&pair)?)
}

fn execute(cfg: &RunConfig) -> Outcome<Output> {
    if !(cfg.tol_order > 0.0 && cfg.tol_subhedge > 0.0) {
        return Err(Failure::Input("tolerances must be positive".into()));
    }
    match &cfg.command {
        Command::Check { pair } => {
            let (mu, nu) = read_pair(pair)?;
            let pair = decompose_with(&mu, &nu, cfg.tol_order)?;
            let v = check_strengthened(&pair);
            report(
                cfg,
                &CheckReport {
                    convex_order: true,
                    dispersion: true,
                    kappa: pair.kappa,
                    a: pair.a,
                    b: pair.b,
                    gamma_a: pair.gamma_a,
                    upper_assumption: v.holds(),
                    upper_detail: describe(v),
                },
            )
        }
        Command::Lower {
            pair,
            grid,
            quantiles,
            curves,
            sample,
            sample_out,
        } => {
            check_grid("grid", grid.nx, grid.ny)?;
            let map = lower_map(cfg, pair)?;
            let opts = BoundOptions {
                grid_nx: grid.nx,
                grid_ny: grid.ny,
                quantiles: *quantiles,
            };
            let bound = report_for(&map, &opts)?;
            if let Some(path) = curves {
                let mut t = Table::new(&["u", "x_u", "P", "Q", "phi", "zeta", "w"]);
                for r in map.records() {
                    t.rows.push(vec![r.u, r.x, r.p, r.q, r.phi, r.zeta, r.down_weight()]);
                }
                write_file(path, &t.csv()?)?;
            }
            if let (Some(n), Some(path)) = (sample, sample_out) {
                write_file(path, &pairs_table(map.sample(cfg.seed, *n)?).csv()?)?;
            }
            let certified = bound.min_lagrangian >= -cfg.tol_subhedge;
            report(cfg, &LowerReport { bound, certified })
        }
        Command::Upper { pair, curves } => {
            let (mu, nu) = read_pair(pair)?;
            let map = UpperCouplingMap::from_marginals_with(&mu, &nu, cfg.tol_order)?;
            if let Some(path) = curves {
                let mut t = Table::new(&["u", "x_u", "G", "H", "phi"]);
                for r in map.records() {
                    t.rows.push(vec![r.u, r.x, r.g, r.h, r.phi]);
                }
                write_file(path, &t.csv()?)?;
            }
            report(
                cfg,
                &UpperReport {
                    price: map.price(),
                    jensen_bound: jensen_bound(&mu, &nu),
                },
            )
        }
        Command::Hedge {
            pair,
            axis,
            lagrangian_grid,
        } => {
            let map = lower_map(cfg, pair)?;
            let hedge = HedgePair::new(&map)?;
            if let Some(g) = lagrangian_grid {
                check_grid("lagrangian-grid", g[0], g[1])?;
                return report(cfg, &certificate(&hedge, g[0], g[1], cfg.tol_subhedge)?);
            }
            let mut t = Table::new(&["x", "psi", "delta"]);
            for x in axis_points(axis, hedge.verification_box())? {
                t.rows.push(vec![x, hedge.psi(x)?, hedge.delta(x)?]);
            }
            Ok(Output::Table(t))
        }
        Command::Sample { pair, n, upper } => {
            let draws = if *upper {
                let (mu, nu) = read_pair(pair)?;
                UpperCouplingMap::from_marginals_with(&mu, &nu, cfg.tol_order)?.sample(cfg.seed, *n)?
            } else {
                lower_map(cfg, pair)?.sample(cfg.seed, *n)?
            };
            Ok(Output::Table(pairs_table(draws)))
        }
        Command::Verify { pair, grid } => {
            check_grid("grid", grid.nx, grid.ny)?;
            let map = lower_map(cfg, pair)?;
            let hedge = HedgePair::new(&map)?;
            report(cfg, &certificate(&hedge, grid.nx, grid.ny, cfg.tol_subhedge)?)
        }
        Command::Multi {
            measures,
            grid,
            quantiles,
        } => {
            check_grid("grid", grid.nx, grid.ny)?;
            let ms = measures.iter().map(|p| read_measure(p)).collect::<Outcome<Vec<_>>>()?;
            let seq = MarginalSequence::new(ms)?;
            let opts = BoundOptions {
                grid_nx: grid.nx,
                grid_ny: grid.ny,
                quantiles: *quantiles,
            };
            let b = bound_sequence(&seq, &opts)?;
            report(
                cfg,
                &MultiReport {
                    total: b.total,
                    steps: b.steps,
                },
            )
        }
        Command::Oracle { pair, n, sense } => {
            let (mu, nu) = read_pair(pair)?;
            let sense = match sense {
                SenseArg::Min => Sense::Min,
                SenseArg::Max => Sense::Max,
            };
            report(cfg, &oracle_bound(&mu, &nu, *n, sense)?)
        }
        Command::Curves { pair, axis } => {
            let (mu, nu) = read_pair(pair)?;
            let m = mu.mean();
            let d = Potential::from_parts(&mu, &nu, m, m);
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for m in [&mu, &nu] {
                if let Some((l, h)) = m.support() {
                    lo = lo.min(if l.is_finite() { l } else { m.quantile_left(1e-3)? });
                    hi = hi.max(if h.is_finite() { h } else { m.quantile_left(1.0 - 1e-3)? });
                }
            }
            let mut t = Table::new(&["x", "D", "D_left", "D_right"]);
            for x in axis_points(axis, (lo - 1.0, hi + 1.0))? {
                t.rows.push(vec![x, d.value(x), d.slope(x, Side::Left), d.slope(x, Side::Right)]);
            }
            Ok(Output::Table(t))
        }
    }
}

fn pairs_table(draws: Vec<(f64, f64)>) -> Table {
    let mut t = Table::new(&["x", "y"]);
    t.rows = draws.into_iter().map(|(x, y)| vec![x, y]).collect();
    t
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let sink = |bytes: &[u8], stdout: &mut dyn Write| -> io::Result<()> {
        match &cfg.out {
            Some(p) => fs::write(p, bytes),
            None => stdout.write_all(bytes),
        }
    };
    let (bytes, code) = match execute(&cfg) {
        Ok(Output::Report(b)) => (Ok(b), 0),
        Ok(Output::Table(t)) => (
            match cfg.format.unwrap_or(Format::Csv) {
                Format::Csv => t.csv(),
                Format::Json => Ok(t.json()),
            },
            0,
        ),
        Err(Failure::Lib(e)) if e.is_validation() => {
            let _ = writeln!(stderr, "error: {e}");
            (Ok(to_json(&diagnostic(&e)).into_bytes()), 2)
        }
        Err(f) => (Err(f), 1),
    };
    let written = bytes.and_then(|b| sink(&b, stdout).map_err(Failure::from));
    match written {
        Ok(()) => code,
        Err(f) => {
            let msg = match f {
                Failure::Input(m) => m,
                Failure::Lib(e) => e.to_string(),
            };
            let _ = writeln!(stderr, "error: {msg}");
            1
        }
    }
}
