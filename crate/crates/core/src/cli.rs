//! Command-line front end. Every report embeds the resolved [`RunConfig`].
//!
//! Exit statuses: 0 success, 2 usage error, 3 numerical failure, 4 budget
//! exceeded, 5 a Gaussian-energy or optimizer-floor violation in `d = 8` or
//! `d = 24`.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{Command, Format, Params, RunConfig, SCHEMA_VERSION};
use crate::energy::{
    ck_probe, ck_probe_cost, ck_probe_lattices, lattice_config, multi_start, EnergyModel,
    MinimizeOptions, TorusConfiguration,
};
use crate::error::{Error, Result};
use crate::green::{
    epstein_zeta, epstein_zeta_direct, epstein_zeta_ewald, epstein_zeta_punctured,
    epstein_zeta_punctured_direct, green_ewald, green_fourier, green_mellin, madelung_with,
    FourierOptions, GreenEvaluation, Torus, DEFAULT_SPLIT,
};
use crate::jellium::{jellium_minimize, jellium_vs_periodic, particle_count, JelliumOptions};
use crate::kernels::{
    gaussian_superposition, heat_kernel, mellin_kernel, riesz_kernel, upper_incomplete_gamma,
    RieszParams,
};
use crate::lattice::Lattice;
use crate::theta::{shells, theta_enumerated};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;
pub const EXIT_THEOREM_VIOLATION: i32 = 5;

/// Gap below the lattice energy that counts as an optimizer-floor violation.
const FLOOR_SLACK: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(
    name = "torus-energy",
    version,
    about = "Periodic Riesz and Coulomb energies on flat tori"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Lattice data: covolume, minimal norm, kissing number, basis
    Lattice(Flags),
    /// Shell counts (norm, count) of the theta series
    Theta(Flags),
    /// Epstein zeta function
    Zeta(Flags),
    /// Periodic Green function at a point
    Green(Flags),
    /// Madelung constant of the torus
    Madelung(Flags),
    /// Periodic energy of a configuration
    Energy(Flags),
    /// Multi-start energy minimization
    Optimize(Flags),
    /// Gaussian-energy probe against the lattice configuration
    ProbeCk(Flags),
    /// Finite-volume jellium minimization
    Jellium(Flags),
    /// Kernel identity checks
    KernelCheck(Flags),
}

#[derive(Debug, Args)]
struct Flags {
    /// `key = value` configuration file; flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named lattice: Z1..Z24, A2, D4, E8, Leech
    #[arg(long)]
    name: Option<String>,
    /// Lattice file: `d` then `d` basis rows
    #[arg(long)]
    lattice_file: Option<String>,
    /// Dimension, checked against the lattice
    #[arg(long)]
    d: Option<usize>,
    /// Riesz exponent(s), comma separated; 0 in d = 2 is the log kernel
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    s: Option<Vec<f64>>,
    /// Torus scale(s) n, comma separated
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<u32>>,
    /// Gaussian parameter(s) t, comma separated
    #[arg(long, value_delimiter = ',')]
    t: Option<Vec<f64>>,
    /// Jellium box side(s) R, comma separated
    #[arg(short = 'R', long = "R", alias = "r", value_delimiter = ',')]
    r: Option<Vec<f64>>,
    /// Point coordinates, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x: Option<Vec<f64>>,
    /// Random seed
    #[arg(long)]
    seed: Option<u64>,
    /// Absolute tolerance
    #[arg(long)]
    tol: Option<f64>,
    /// Enumeration budget (number of lattice vectors)
    #[arg(long)]
    budget: Option<f64>,
    /// json or csv
    #[arg(long)]
    format: Option<String>,
    /// Cap on worker threads
    #[arg(long)]
    threads: Option<usize>,
    /// Optimizer restarts
    #[arg(long)]
    restarts: Option<usize>,
    /// Random trials
    #[arg(long)]
    trials: Option<usize>,
    /// Iteration cap per optimizer run
    #[arg(long)]
    max_iters: Option<usize>,
    /// Largest squared norm of theta shells
    #[arg(long)]
    max_norm: Option<f64>,
    /// Evaluation route; depends on the command
    #[arg(long)]
    route: Option<String>,
    /// Cutoff radius for direct zeta sums
    #[arg(long)]
    radius: Option<f64>,
    /// Configuration file: one point per line, coordinates separated by spaces
    #[arg(long)]
    points_file: Option<String>,
    /// Report lattice invariants
    #[arg(long)]
    info: bool,
    /// Also report the dual lattice
    #[arg(long)]
    dual: bool,
    /// Uniform random configuration of nᵈ points
    #[arg(long)]
    random: bool,
    /// Also report the energy gradient
    #[arg(long)]
    gradient: bool,
    /// Compare jellium energies with periodic minima
    #[arg(long)]
    compare: bool,
}

impl Flags {
    fn params(&self) -> Result<Params> {
        let mut p = match &self.config {
            Some(path) => Params::from_file(path)?,
            None => Params::default(),
        };
        let flag = |b: bool| if b { Some(true) } else { None };
        p.overlay(&Params {
            name: self.name.clone(),
            lattice_file: self.lattice_file.clone(),
            d: self.d,
            s: self.s.clone(),
            n: self.n.clone(),
            t: self.t.clone(),
            r: self.r.clone(),
            x: self.x.clone(),
            seed: self.seed,
            tol: self.tol,
            budget: self.budget,
            format: self.format.as_deref().map(str::parse).transpose()?,
            threads: self.threads,
            restarts: self.restarts,
            trials: self.trials,
            max_iters: self.max_iters,
            max_norm: self.max_norm,
            route: self.route.clone(),
            radius: self.radius,
            points_file: self.points_file.clone(),
            info: flag(self.info),
            dual: flag(self.dual),
            random: flag(self.random),
            gradient: flag(self.gradient),
            compare: flag(self.compare),
        });
        Ok(p)
    }
}

/// Maps library errors onto exit statuses.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::BudgetExceeded { .. } => EXIT_BUDGET,
        Error::SingularBasis { .. }
        | Error::BadShape { .. }
        | Error::UnknownLattice(_)
        | Error::DimensionMismatch { .. }
        | Error::NonPositiveDistance(_)
        | Error::NonPositiveTime(_)
        | Error::OutOfRange(_)
        | Error::OnLattice(_)
        | Error::Pole(_)
        | Error::LogUnsupported
        | Error::Parse(_)
        | Error::Io(_) => EXIT_USAGE,
        _ => EXIT_NUMERICAL,
    }
}

/// CSV cell text; floats use the shortest round-trip form.
trait Cell {
    fn cell(&self) -> String;
}

impl Cell for f64 {
    fn cell(&self) -> String {
        serde_json::to_string(self).unwrap_or_else(|_| self.to_string())
    }
}

macro_rules! plain_cell {
    ($($t:ty),*) => { $( impl Cell for $t { fn cell(&self) -> String { self.to_string() } } )* };
}
plain_cell!(u32, u64, usize, u128, bool);

/// A table for CSV output.
struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

struct Outcome {
    result: Value,
    table: Option<Table>,
    exit: i32,
}

impl Outcome {
    fn json(result: Value) -> Self {
        Outcome {
            result,
            table: None,
            exit: EXIT_OK,
        }
    }
}

/// Parses `args` (including the program name), runs the command and writes
/// the report to `out` and diagnostics to `err`. Returns the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let (command, flags) = match cli.command {
        Sub::Lattice(f) => (Command::Lattice, f),
        Sub::Theta(f) => (Command::Theta, f),
        Sub::Zeta(f) => (Command::Zeta, f),
        Sub::Green(f) => (Command::Green, f),
        Sub::Madelung(f) => (Command::Madelung, f),
        Sub::Energy(f) => (Command::Energy, f),
        Sub::Optimize(f) => (Command::Optimize, f),
        Sub::ProbeCk(f) => (Command::ProbeCk, f),
        Sub::Jellium(f) => (Command::Jellium, f),
        Sub::KernelCheck(f) => (Command::KernelCheck, f),
    };
    let config = match flags.params().and_then(|p| RunConfig::resolve(command, p)) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let outcome = match config.params.threads {
        Some(t) => match rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
        {
            Ok(pool) => pool.install(|| execute(&config)),
            Err(e) => {
                let _ = writeln!(err, "error: thread pool: {e}");
                return EXIT_USAGE;
            }
        },
        None => execute(&config),
    };
    match outcome {
        Ok(o) => {
            if let Err(e) = write_report(&config, &o, out) {
                let _ = writeln!(err, "error: {e}");
                return exit_code(&e);
            }
            o.exit
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn write_report(config: &RunConfig, o: &Outcome, out: &mut dyn Write) -> Result<()> {
    match config.format() {
        Format::Json => {
            let report = json!({ "schema": SCHEMA_VERSION, "config": config, "result": o.result });
            let text =
                serde_json::to_string_pretty(&report).map_err(|e| Error::Parse(e.to_string()))?;
            writeln!(out, "{text}")?;
        }
        Format::Csv => {
            let table = o.table.as_ref().ok_or_else(|| {
                Error::Parse(format!(
                    "CSV output is limited to tabular sweeps; `{}` has none",
                    config.command
                ))
            })?;
            let cfg = serde_json::to_string(config).map_err(|e| Error::Parse(e.to_string()))?;
            writeln!(out, "# schema={SCHEMA_VERSION} config={cfg}")?;
            writeln!(out, "{}", table.header.join(","))?;
            for row in &table.rows {
                writeln!(out, "{}", row.join(","))?;
            }
        }
    }
    Ok(())
}

fn execute(c: &RunConfig) -> Result<Outcome> {
    match c.command {
        Command::Lattice => cmd_lattice(c),
        Command::Theta => cmd_theta(c),
        Command::Zeta => cmd_zeta(c),
        Command::Green => cmd_green(c),
        Command::Madelung => cmd_madelung(c),
        Command::Energy => cmd_energy(c),
        Command::Optimize => cmd_optimize(c),
        Command::ProbeCk => cmd_probe_ck(c),
        Command::Jellium => cmd_jellium(c),
        Command::KernelCheck => cmd_kernel_check(c),
    }
}

fn budget(c: &RunConfig) -> f64 {
    c.params.budget.unwrap_or(crate::lattice::DEFAULT_BUDGET)
}

fn first_s(c: &RunConfig) -> Result<RieszParams> {
    let s = c
        .s_list()
        .first()
        .copied()
        .ok_or_else(|| Error::Parse("missing --s".into()))?;
    c.riesz(s)
}

fn lattice_info(lat: &Lattice, budget: f64) -> Result<Value> {
    let min = lat.minimal_norm();
    let sh = shells(lat, min * (1.0 + 1e-9), budget)?;
    let kissing: u128 = sh
        .entries
        .iter()
        .filter(|e| e.norm > 1e-9 * min)
        .map(|e| e.count)
        .sum();
    let basis: Vec<Vec<f64>> = (0..lat.dim())
        .map(|i| lat.basis().row(i).iter().copied().collect())
        .collect();
    Ok(json!({
        "name": lat.name(),
        "dim": lat.dim(),
        "covolume": lat.covolume(),
        "minimal_norm": min,
        "kissing": kissing,
        "basis": basis,
    }))
}

fn cmd_lattice(c: &RunConfig) -> Result<Outcome> {
    let lat = c.lattice()?;
    let mut result = lattice_info(&lat, budget(c))?;
    if c.params.dual == Some(true) {
        result["dual"] = lattice_info(&lat.dual(), budget(c))?;
    }
    Ok(Outcome::json(result))
}

fn cmd_theta(c: &RunConfig) -> Result<Outcome> {
    let lat = c.lattice()?;
    let max_norm = c.params.max_norm.unwrap_or(8.0);
    let b = budget(c);
    let route = c.params.route.as_deref().unwrap_or("auto");
    let rows = |s: &crate::lattice::ShellSeries| -> Vec<Vec<String>> {
        s.entries
            .iter()
            .map(|e| vec![e.norm.cell(), e.count.cell()])
            .collect()
    };
    let modular = || {
        if lat.modular().is_none() {
            return Err(Error::Parse(
                "this lattice has no closed-form theta series; use --route enumerated".into(),
            ));
        }
        shells(&lat, max_norm, b)
    };
    match route {
        "auto" | "modular" | "enumerated" => {
            let s = match route {
                "modular" => modular()?,
                "enumerated" => theta_enumerated(&lat, max_norm, b)?,
                _ => shells(&lat, max_norm, b)?,
            };
            let table = Table {
                header: vec!["norm", "count"],
                rows: rows(&s),
            };
            Ok(Outcome {
                result: json!({ "route": route, "shells": s }),
                table: Some(table),
                exit: EXIT_OK,
            })
        }
        "both" => {
            let m = modular()?;
            let e = theta_enumerated(&lat, max_norm, b)?;
            let agree = m.same_shells(&e, 1e-9);
            let norms: Vec<f64> = {
                let mut v: Vec<f64> = m.entries.iter().chain(&e.entries).map(|s| s.norm).collect();
                v.sort_by(f64::total_cmp);
                v.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs().max(1.0));
                v
            };
            let count = |s: &crate::lattice::ShellSeries, q: f64| {
                s.entries
                    .iter()
                    .find(|e| (e.norm - q).abs() <= 1e-9 * q.max(1.0))
                    .map_or(0, |e| e.count)
            };
            let table = Table {
                header: vec!["norm", "modular", "enumerated"],
                rows: norms
                    .iter()
                    .map(|&q| vec![q.cell(), count(&m, q).cell(), count(&e, q).cell()])
                    .collect(),
            };
            let exit = if agree { EXIT_OK } else { EXIT_NUMERICAL };
            Ok(Outcome {
                result: json!({ "route": "both", "agree": agree, "modular": m, "enumerated": e }),
                table: Some(table),
                exit,
            })
        }
        other => Err(Error::Parse(format!(
            "unknown theta route `{other}` (auto, modular, enumerated, both)"
        ))),
    }
}

fn green_json(e: &GreenEvaluation) -> Value {
    json!({
        "value": e.value,
        "route": e.route,
        "error_estimate": e.abs_error_estimate,
        "terms": e.terms_used,
    })
}

fn cmd_zeta(c: &RunConfig) -> Result<Outcome> {
    let lat = c.lattice()?;
    let route = c.params.route.as_deref().unwrap_or("auto");
    let radius = c.params.radius;
    let mut results = Vec::new();
    let mut rows = Vec::new();
    for &s in c.s_list() {
        let e = match (&c.params.x, route) {
            (None, "auto" | "ewald") => epstein_zeta_punctured(&lat, s)?,
            (None, "direct") => epstein_zeta_punctured_direct(&lat, s, radius)?,
            (Some(x), "auto") => epstein_zeta(&lat, s, x)?,
            (Some(x), "ewald") => epstein_zeta_ewald(&lat, s, x)?,
            (Some(x), "direct") => epstein_zeta_direct(&lat, s, x, radius)?,
            (_, other) => {
                return Err(Error::Parse(format!(
                    "unknown zeta route `{other}` (auto, ewald, direct)"
                )))
            }
        };
        let mut v = green_json(&e);
        v["s"] = json!(s);
        results.push(v);
        rows.push(vec![
            s.cell(),
            e.value.cell(),
            e.abs_error_estimate.cell(),
            e.route.to_string(),
        ]);
    }
    let table = Table {
        header: vec!["s", "value", "error_estimate", "route"],
        rows,
    };
    Ok(Outcome {
        result: json!({ "punctured": c.params.x.is_none(), "results": results }),
        table: Some(table),
        exit: EXIT_OK,
    })
}

fn cmd_green(c: &RunConfig) -> Result<Outcome> {
    let lat = c.lattice()?;
    let params = first_s(c)?;
    let n = c.n();
    let x = c.params.x.clone().unwrap_or_default();
    let tol = c.params.tol.unwrap_or(1e-12);
    let fourier = || green_fourier(&lat, n, &params, &x, &FourierOptions::for_dim(lat.dim()));
    match c.params.route.as_deref().unwrap_or("ewald") {
        "ewald" => Ok(Outcome::json(green_json(&green_ewald(
            &lat, n, &params, &x,
        )?))),
        "mellin" => Ok(Outcome::json(green_json(&green_mellin(
            &lat, n, &params, &x, tol,
        )?))),
        "fourier" => Ok(Outcome::json(green_json(&fourier()?))),
        "all" => {
            let evals = [
                green_ewald(&lat, n, &params, &x)?,
                green_mellin(&lat, n, &params, &x, tol)?,
                fourier()?,
            ];
            let lo = evals.iter().map(|e| e.value).fold(f64::INFINITY, f64::min);
            let hi = evals
                .iter()
                .map(|e| e.value)
                .fold(f64::NEG_INFINITY, f64::max);
            Ok(Outcome::json(json!({
                "routes": evals.iter().map(green_json).collect::<Vec<_>>(),
                "max_discrepancy": hi - lo,
            })))
        }
        other => Err(Error::Parse(format!(
            "unknown green route `{other}` (ewald, mellin, fourier, all)"
        ))),
    }
}

fn cmd_madelung(c: &RunConfig) -> Result<Outcome> {
    let lat = c.lattice()?;
    let mut results = Vec::new();
    let mut rows = Vec::new();
    for n in c.n_list() {
        let torus = Torus::new(&lat, n)?;
        for &s in c.s_list() {
            let params = c.riesz(s)?;
            let m = madelung_with(&torus, &params, DEFAULT_SPLIT, budget(c))?;
            results.push(json!({
                "s": s,
                "n": n,
                "value": m.value,
                "energy_scale": m.energy_scale,
                "error_estimate": m.abs_error_estimate,
                "shells_used": m.shells_used,
            }));
            rows.push(vec![
                s.cell(),
                n.cell(),
                m.value.cell(),
                m.energy_scale.cell(),
                m.abs_error_estimate.cell(),
            ]);
        }
    }
    let table = Table {
        header: vec!["s", "n", "value", "energy_scale", "error_estimate"],
        rows,
    };
    Ok(Outcome {
        result: json!({ "results": results }),
        table: Some(table),
        exit: EXIT_OK,
    })
}

fn parse_points(text: &str) -> Result<Vec<Vec<f64>>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .enumerate()
        .map(|(i, l)| {
            l.split(|ch: char| ch.is_whitespace() || ch == ',')
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("point {i}: {e}")))
                })
                .collect()
        })
        .collect()
}

fn build_config(c: &RunConfig, torus: &Torus) -> Result<TorusConfiguration> {
    if let Some(path) = &c.params.points_file {
        return TorusConfiguration::on(torus, parse_points(&std::fs::read_to_string(path)?)?);
    }
    if c.params.random == Some(true) {
        let mut rng = ChaCha8Rng::seed_from_u64(c.seed());
        return TorusConfiguration::random(torus, torus.points(), &mut rng);
    }
    lattice_config(torus.base(), torus.n())
}

fn cmd_energy(c: &RunConfig) -> Result<Outcome> {
    let lat = c.lattice()?;
    let params = first_s(c)?;
    let torus = Torus::new(&lat, c.n())?;
    let config = build_config(c, &torus)?;
    let model = EnergyModel::new(&torus, &params)?;
    let report = if c.params.gradient == Some(true) {
        model.energy_and_gradient(&config)?
    } else {
        model.energy(&config)?
    };
    let lattice_energy = model.energy(&lattice_config(&lat, c.n())?)?.value;
    Ok(Outcome::json(json!({
        "points": config.points(),
        "value": report.value,
        "error_estimate": report.abs_error_estimate,
        "per_pair_error": report.per_pair_error,
        "route": report.route,
        "gradient": report.gradient,
        "madelung": report.madelung,
        "lattice_energy": lattice_energy,
        "density_one": config.is_density_one(),
    })))
}

/// Exit status and report fields for a result that may contradict a proven
/// inequality (`d = 8, 24`) or a conjectured one (other dimensions).
fn violation_fields(d: usize, violations: usize, result: &mut Value) -> i32 {
    if violations == 0 {
        return EXIT_OK;
    }
    if d == 8 || d == 24 {
        result["theorem-violation"] = json!(true);
        EXIT_THEOREM_VIOLATION
    } else {
        result["conjecture-counterexample-candidate"] = json!(true);
        EXIT_OK
    }
}

fn cmd_optimize(c: &RunConfig) -> Result<Outcome> {
    let lat = c.lattice()?;
    let params = first_s(c)?;
    let torus = Torus::new(&lat, c.n())?;
    let opts = MinimizeOptions {
        grad_tol: c.params.tol.unwrap_or(1e-8),
        max_iters: c.params.max_iters.unwrap_or(2000),
        seed: c.seed(),
        ..MinimizeOptions::default()
    };
    let restarts = c.params.restarts.unwrap_or(8);
    let model = EnergyModel::new(&torus, &params)?;
    let lattice_energy = model.energy(&lattice_config(&lat, c.n())?)?.value;
    let runs = multi_start(&torus, &params, restarts, &opts)?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (i, m) in runs.iter().enumerate() {
        let seed = opts.seed.wrapping_add(i as u64);
        summary.push(json!({
            "seed": seed,
            "value": m.report.value,
            "error_estimate": m.report.abs_error_estimate,
            "status": m.status,
            "iterations": m.trace.len(),
        }));
        rows.push(vec![
            seed.cell(),
            m.report.value.cell(),
            (m.report.value - lattice_energy).cell(),
        ]);
    }
    let below = runs
        .iter()
        .filter(|m| m.report.value < lattice_energy - FLOOR_SLACK)
        .count();
    let near = runs
        .iter()
        .filter(|m| (m.report.value - lattice_energy).abs() <= 1e-6)
        .count();
    let best = runs
        .iter()
        .min_by(|a, b| a.report.value.total_cmp(&b.report.value));
    let mut result = json!({
        "lattice_energy": lattice_energy,
        "restarts": summary,
        "below_lattice": below,
        "within_1e-6_of_lattice": near,
        "best": best.map(|m| json!({ "value": m.report.value, "points": m.config.points() })),
    });
    let exit = violation_fields(lat.dim(), below, &mut result);
    let table = Table {
        header: vec!["seed", "value", "gap_to_lattice"],
        rows,
    };
    Ok(Outcome {
        result,
        table: Some(table),
        exit,
    })
}

fn cmd_probe_ck(c: &RunConfig) -> Result<Outcome> {
    let lat = c.lattice()?;
    let t = c.params.t.clone().unwrap_or_default();
    let (n, trials) = (c.n(), c.params.trials.unwrap_or(500));
    let estimated = ck_probe_cost(&lat, n, &t, trials);
    let budget = budget(c);
    if estimated > budget {
        return Err(Error::BudgetExceeded { estimated, budget });
    }
    let report = if n == 1 {
        ck_probe_lattices(&lat, &t, trials, c.seed())?
    } else {
        ck_probe(&lat, n, &t, trials, c.seed())?
    };
    let rows = report
        .entries
        .iter()
        .map(|e| {
            vec![
                e.t.cell(),
                e.baseline.cell(),
                e.trials.cell(),
                e.violations.cell(),
                e.min_gap.map_or(String::new(), |g| g.cell()),
            ]
        })
        .collect();
    let mut result = serde_json::to_value(&report).map_err(|e| Error::Parse(e.to_string()))?;
    let exit = violation_fields(lat.dim(), report.violations, &mut result);
    let table = Table {
        header: vec!["t", "baseline", "trials", "violations", "min_gap"],
        rows,
    };
    Ok(Outcome {
        result,
        table: Some(table),
        exit,
    })
}

fn cmd_jellium(c: &RunConfig) -> Result<Outcome> {
    let params = first_s(c)?;
    let opts = JelliumOptions {
        restarts: c.params.restarts.unwrap_or(4),
        seed: c.seed(),
        max_iters: c.params.max_iters.unwrap_or(400),
        tol: c.params.tol.unwrap_or(1e-11),
        ..JelliumOptions::default()
    };
    let r_list = c.params.r.clone().unwrap_or_default();
    if c.params.compare == Some(true) {
        let lat = c.lattice()?;
        let n_list = c.params.n.clone().unwrap_or_default();
        let cmp = jellium_vs_periodic(&params, &r_list, &lat, &n_list, &opts)?;
        let rows = cmp
            .jellium
            .iter()
            .map(|(r, e)| vec![r.cell(), e.cell()])
            .collect();
        let result = serde_json::to_value(&cmp).map_err(|e| Error::Parse(e.to_string()))?;
        return Ok(Outcome {
            result,
            table: Some(Table {
                header: vec!["R", "per_volume"],
                rows,
            }),
            exit: EXIT_OK,
        });
    }
    let mut results = Vec::new();
    let mut rows = Vec::new();
    let mut previous: Option<f64> = None;
    for &r in &r_list {
        let m = jellium_minimize(&params, r, &opts)?;
        let change = previous.map(|p| (m.per_volume - p).abs() / p.abs());
        previous = Some(m.per_volume);
        let n = particle_count(params.d(), r)?;
        rows.push(vec![
            r.cell(),
            n.cell(),
            m.value.cell(),
            m.per_volume.cell(),
            change.map_or(String::new(), |v| v.cell()),
        ]);
        results.push(json!({
            "R": r,
            "N": n,
            "value": m.value,
            "per_volume": m.per_volume,
            "relative_change": change,
            "best_by_restart": m.best_by_restart,
            "points": m.points,
        }));
    }
    let table = Table {
        header: vec!["R", "N", "value", "per_volume", "relative_change"],
        rows,
    };
    Ok(Outcome {
        result: json!({ "results": results }),
        table: Some(table),
        exit: EXIT_OK,
    })
}

fn cmd_kernel_check(c: &RunConfig) -> Result<Outcome> {
    let d = c.d();
    let tol = c.params.tol.unwrap_or(1e-9);
    let trials = c.params.trials.unwrap_or(10);
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed());
    let mut checks = Vec::new();
    let mut push =
        |name: &str, s: Option<f64>, arg: Vec<f64>, lhs: f64, rhs: f64, err: f64, bound: f64| {
            checks.push((name.to_string(), s, arg, lhs, rhs, err, err <= bound));
        };
    for &s in c.s_list() {
        let params = c.riesz(s)?;
        for _ in 0..trials {
            let r = rng.gen_range(0.3..3.0);
            let lhs = mellin_kernel(&params, r, 0.01 * tol)?;
            let rhs = if params.is_log() {
                (riesz_kernel(&params, r)? - riesz_kernel(&params, 1.0)?) / params.c()
            } else {
                riesz_kernel(&params, r)? / params.c()
            };
            push("mellin", Some(s), vec![r], lhs, rhs, (lhs - rhs).abs(), tol);
            if s > 0.0 {
                let lhs = gaussian_superposition(r, s, 0.01 * tol)?;
                let rhs = riesz_kernel(&params, r)?;
                push(
                    "superposition",
                    Some(s),
                    vec![r],
                    lhs,
                    rhs,
                    (lhs - rhs).abs(),
                    tol,
                );
            }
        }
    }
    for _ in 0..trials {
        let a: f64 = rng.gen_range(-2.0..4.0);
        let x: f64 = rng.gen_range(0.1..10.0);
        let lhs = upper_incomplete_gamma(a + 1.0, x)?;
        let rhs = a * upper_incomplete_gamma(a, x)? + x.powf(a) * (-x).exp();
        push(
            "gamma-recurrence",
            None,
            vec![a, x],
            lhs,
            rhs,
            (lhs - rhs).abs() / lhs.abs(),
            1e-12,
        );
    }
    for dim in [1usize, 2] {
        let t: f64 = rng.gen_range(0.1..2.0);
        let surface = if dim == 1 {
            2.0
        } else {
            2.0 * std::f64::consts::PI
        };
        let q = crate::quad::integrate(
            |r| surface * r.powi(dim as i32 - 1) * heat_kernel(dim, t, r).unwrap_or(0.0),
            0.0,
            60.0 * t.sqrt(),
            1e-13,
            0.0,
        )?;
        push(
            "heat-mass",
            None,
            vec![dim as f64, t],
            q.value,
            1.0,
            (q.value - 1.0).abs(),
            1e-10,
        );
    }
    let failures = checks.iter().filter(|c| !c.6).count();
    let rows = checks
        .iter()
        .map(|(name, s, arg, lhs, rhs, err, pass)| {
            vec![
                name.clone(),
                s.map_or(String::new(), |v| v.cell()),
                arg.iter().map(f64::to_string).collect::<Vec<_>>().join(" "),
                lhs.cell(),
                rhs.cell(),
                err.cell(),
                pass.cell(),
            ]
        })
        .collect();
    let list: Vec<Value> = checks
        .iter()
        .map(|(name, s, arg, lhs, rhs, err, pass)| {
            json!({ "check": name, "s": s, "args": arg, "lhs": lhs, "rhs": rhs, "error": err, "pass": pass })
        })
        .collect();
    let exit = if failures == 0 {
        EXIT_OK
    } else {
        EXIT_NUMERICAL
    };
    Ok(Outcome {
        result: json!({ "d": d, "checks": list, "failures": failures }),
        table: Some(Table {
            header: vec!["check", "s", "args", "lhs", "rhs", "error", "pass"],
            rows,
        }),
        exit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            std::iter::once("torus-energy").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        let (code, _, err) = run_str(&["lattice", "--bogus"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("Usage"));
    }

    #[test]
    fn e8_info() {
        let (code, out, _) = run_str(&["lattice", "--name", "E8", "--info"]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["schema"], 1);
        assert!((v["result"]["covolume"].as_f64().unwrap() - 1.0).abs() < 1e-12);
        assert!((v["result"]["minimal_norm"].as_f64().unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(v["result"]["kissing"], 240);
        assert_eq!(v["config"]["params"]["name"], "E8");
    }

    #[test]
    fn theta_csv_rows() {
        let (code, out, _) = run_str(&[
            "theta",
            "--name",
            "Z2",
            "--max-norm",
            "2",
            "--format",
            "csv",
        ]);
        assert_eq!(code, 0);
        let lines: Vec<&str> = out.lines().collect();
        assert!(lines[0].starts_with("# schema=1"));
        assert_eq!(&lines[1..], ["norm,count", "0.0,1", "1.0,4", "2.0,4"]);
    }

    #[test]
    fn csv_refused_for_single_reports() {
        let (code, _, err) = run_str(&["lattice", "--name", "A2", "--format", "csv"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("CSV"));
    }

    #[test]
    fn bad_parameters_are_usage_errors() {
        assert_eq!(
            run_str(&["madelung", "--name", "A2", "--d", "3"]).0,
            EXIT_USAGE
        );
        assert_eq!(run_str(&["madelung", "--name", "nope"]).0, EXIT_USAGE);
        assert_eq!(run_str(&["green", "--name", "Z2"]).0, EXIT_USAGE);
        assert_eq!(run_str(&["zeta", "--name", "Z2", "--s", "2"]).0, EXIT_USAGE);
    }

    #[test]
    fn budget_overrun_exit_code() {
        let (code, _, _) = run_str(&[
            "theta",
            "--name",
            "Z4",
            "--route",
            "enumerated",
            "--max-norm",
            "50",
            "--budget",
            "10",
        ]);
        assert_eq!(code, EXIT_BUDGET);
    }

    #[test]
    fn green_negative_coordinates() {
        let (code, out, _) = run_str(&[
            "green", "--name", "Z2", "--s", "1", "--x", "-0.3,0.2", "--route", "all",
        ]);
        assert_eq!(code, 0, "{out}");
        let v: Value = serde_json::from_str(&out).unwrap();
        assert!(v["result"]["max_discrepancy"].as_f64().unwrap() < 1e-8);
    }

    #[test]
    fn points_file_parsing() {
        assert_eq!(
            parse_points("# c\n0 0\n0.5, 0.25\n").unwrap(),
            vec![vec![0.0, 0.0], vec![0.5, 0.25]]
        );
        assert!(parse_points("0 x").is_err());
    }
}
