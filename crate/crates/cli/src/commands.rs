use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use anyhow::{anyhow, Context};
use pulsed_qfi::dynamics::{kick_matrix, CycleMap, DEFAULT_REGIME_FACTOR};
use pulsed_qfi::gaussian::{moments_to_covariance, squeezing_decomposition, wigner};
use pulsed_qfi::metrology::{qfi_bures_oracle, saturation, sweep, Quantity, SweepAxis, SweepSpec};
use pulsed_qfi::{
    fit_scaling_exponent, monte_carlo_moments, qfi_vs_pulses, squeezing_trajectory, stroboscopic, validate_regime,
    Convention, McOptions, MomentVector, NoiseModel, QfiRow, QfiTrajectory, RegimeStatus, Sampling,
    SensitivityMethod,
};
use serde::Serialize;
use serde_json::json;

use crate::config::{ConfigError, RunConfig};
use crate::output::{float, optional, read_header, write_csv, write_json, Header};

/// Failure classes, each with its own exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Io,
    Config,
    Numeric,
    Oracle,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Io => 1,
            Kind::Config => 2,
            Kind::Numeric => 3,
            Kind::Oracle => 4,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn config(error: impl Into<anyhow::Error>) -> Self {
        CliError { kind: Kind::Config, error: error.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::config(e)
    }
}

impl From<pulsed_qfi::Error> for CliError {
    fn from(e: pulsed_qfi::Error) -> Self {
        CliError { kind: Kind::Numeric, error: e.into() }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError { kind: Kind::Io, error: e }
    }
}

pub type CmdResult = Result<(), CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Step-halved central differences in omega_m.
    Fd,
    /// Forward sensitivity propagation.
    Exact,
}

impl Method {
    fn resolve(self, config: &RunConfig) -> SensitivityMethod {
        match self {
            Method::Fd => SensitivityMethod::FiniteDifference { h_rel: config.h_rel },
            Method::Exact => SensitivityMethod::Exact,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SamplingArg {
    After,
    Before,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum NoiseArg {
    HighTemperature,
    QuantumConsistent,
    None,
}

fn announce(path: &Path) {
    println!("wrote {}", path.display());
}

fn phi_columns(phi: Option<f64>) -> [String; 2] {
    [optional(phi), optional(phi.map(|p| p / PI))]
}

pub fn validate(config: &RunConfig) -> CmdResult {
    let params = config.params()?;
    let checks: Vec<_> = validate_regime(&params, DEFAULT_REGIME_FACTOR)
        .into_iter()
        .map(|c| {
            println!("{:<18} {:?} (ratio {})", c.condition.description(), c.status, optional(c.margin));
            json!({
                "condition": c.condition.description(),
                "status": c.status,
                "ratio": c.margin,
            })
        })
        .collect();
    let all = validate_regime(&params, DEFAULT_REGIME_FACTOR).iter().all(|c| c.status == RegimeStatus::Satisfied);
    let report = json!({
        "params": params,
        "omega_m_rad_s": params.omega_m,
        "period_s": params.period(),
        "tau_s": params.tau,
        "factor": DEFAULT_REGIME_FACTOR,
        "checks": checks,
        "all_satisfied": all,
    });
    let header = Header::new("validate", config, json!({ "factor": DEFAULT_REGIME_FACTOR }));
    announce(&write_json(&config.out_dir, "validate.json", &header, &report)?);
    Ok(())
}

pub fn evolve(config: &RunConfig) -> CmdResult {
    let params = config.params()?;
    let v0 = params.thermal_state()?;
    let states = CycleMap::new(&params)?.iterate(&v0.to_vec3(), config.n_max as usize)?;
    let rows = states.iter().enumerate().map(|(n, v)| vec![n.to_string(), float(v[0]), float(v[1]), float(v[2])]);
    let header = Header::new("evolve", config, json!({ "initial": "thermal" }));
    announce(&write_csv(&config.out_dir, "evolve.csv", &header, &["n", "qq", "qp", "pp"], rows)?);
    Ok(())
}

pub fn qfi(config: &RunConfig, method: Method) -> CmdResult {
    let params = config.params()?;
    let traj = qfi_vs_pulses(&params, config.n_max as usize, method.resolve(config))?;
    let rows = traj.rows.iter().map(|r| {
        let [phi, phi_pi] = phi_columns(r.phi);
        vec![r.n.to_string(), float(r.f), float(r.r), phi, phi_pi, float(r.purity)]
    });
    let header = Header::new("qfi", config, json!({ "method": method }));
    let columns = ["n", "F", "r", "phi_rad", "phi_over_pi", "purity"];
    announce(&write_csv(&config.out_dir, "qfi.csv", &header, &columns, rows)?);
    println!("max F = {:.6e} (s/rad)^2", traj.max_f());
    Ok(())
}

pub fn squeeze(config: &RunConfig, sampling: SamplingArg) -> CmdResult {
    let params = config.params()?;
    let s = match sampling {
        SamplingArg::After => Sampling::AfterKick,
        SamplingArg::Before => Sampling::BeforeKick,
    };
    let traj = squeezing_trajectory(&params, config.n_max as usize, s)?;
    let rows = traj.iter().map(|r| {
        let [phi, phi_pi] = phi_columns(r.phi);
        vec![r.n.to_string(), float(r.r), phi, phi_pi]
    });
    let header = Header::new("squeeze", config, json!({ "sampling": sampling }));
    announce(&write_csv(&config.out_dir, "squeeze.csv", &header, &["n", "r", "phi_rad", "phi_over_pi"], rows)?);
    Ok(())
}

pub struct WignerArgs {
    pub n: u64,
    pub grid: usize,
    pub extent: Option<f64>,
}

/// `W` over a square `(q, p)` window just before and just after the `n`-th
/// kick.
pub fn wigner_grid(config: &RunConfig, args: &WignerArgs) -> CmdResult {
    if args.n < 1 {
        return Err(CliError::config(anyhow!("--n must be >= 1")));
    }
    if args.grid < 2 {
        return Err(CliError::config(anyhow!("--grid must be >= 2")));
    }
    let params = config.params()?;
    let before = stroboscopic(&params.thermal_state()?, &params, args.n - 1)?;
    let after = MomentVector::from_vec3(&(kick_matrix(params.theta) * before.to_vec3()));
    let (cb, ca) = (moments_to_covariance(before, Convention::Moment), moments_to_covariance(after, Convention::Moment));
    let extent = match args.extent {
        Some(e) if e > 0.0 && e.is_finite() => e,
        Some(e) => return Err(CliError::config(anyhow!("--extent must be > 0, got {e}"))),
        // four standard deviations along the widest direction of either state
        None => 4.0 * [before.qq, before.pp, after.qq, after.pp].into_iter().fold(0.0, f64::max).sqrt(),
    };
    let axis: Vec<f64> = (0..args.grid).map(|i| -extent + 2.0 * extent * i as f64 / (args.grid - 1) as f64).collect();
    let mut rows = Vec::with_capacity(args.grid * args.grid);
    for &q in &axis {
        for &p in &axis {
            rows.push(vec![float(q), float(p), float(wigner(&cb, q, p)?), float(wigner(&ca, q, p)?)]);
        }
    }
    let sq = squeezing_decomposition(&ca)?;
    let header = Header::new("wigner", config, json!({ "n": args.n, "grid": args.grid, "extent": extent }));
    announce(&write_csv(&config.out_dir, "wigner.csv", &header, &["q", "p", "W_before", "W_after"], rows)?);
    println!("after kick {}: r = {:.6}, phi = {} rad", args.n, sq.r, optional(sq.phi));
    Ok(())
}

fn read_qfi_csv(path: &Path) -> Result<(Header, QfiTrajectory), CliError> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(CliError::config)?;
    let header = read_header(&text).map_err(CliError::config)?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let columns = reader.headers().map_err(|e| CliError::config(anyhow!(e)))?.clone();
    let find = |name: &str| {
        columns.iter().position(|c| c == name).ok_or_else(|| CliError::config(anyhow!("{} has no `{name}` column", path.display())))
    };
    let (i_n, i_f) = (find("n")?, find("F")?);
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::config(anyhow!(e)))?;
        let bad = || CliError::config(anyhow!("{}: malformed data row {}", path.display(), line + 1));
        let n: u64 = record.get(i_n).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let f: f64 = record.get(i_f).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        if rows.last().is_some_and(|last: &QfiRow| last.n >= n) {
            return Err(CliError::config(anyhow!("{}: pulse numbers must increase (row {})", path.display(), line + 1)));
        }
        rows.push(QfiRow { n, f, r: f64::NAN, phi: None, purity: f64::NAN });
    }
    Ok((header, QfiTrajectory { rows }))
}

pub fn fit(config: &RunConfig, input: &Path) -> CmdResult {
    let (source, traj) = read_qfi_csv(input)?;
    let result = fit_scaling_exponent(&traj, config.fit_window.0)?;
    let sat = saturation(&traj);
    println!(
        "alpha = {:.4} (R^2 = {:.4}{}) on n in [{}, {}]",
        result.alpha,
        result.r_squared,
        if result.low_confidence { ", low confidence" } else { "" },
        result.window.0,
        result.window.1
    );
    let header = Header::new("fit", config, json!({ "input": input }));
    let body = json!({ "fit": result, "saturation": sat, "source": source });
    announce(&write_json(&config.out_dir, "fit.json", &header, &body)?);
    Ok(())
}

/// `name=v1,v2,...` with `name` one of k, theta, gamma_m, n_th, n_pulses.
pub fn parse_axis(text: &str) -> Result<SweepAxis, String> {
    let (name, values) = text.split_once('=').ok_or_else(|| format!("expected name=v1,v2,..., got `{text}`"))?;
    let floats = || -> Result<Vec<f64>, String> {
        values
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| format!("axis `{name}`: `{v}` is not a number")))
            .collect()
    };
    let axis = match name.trim() {
        "k" => SweepAxis::K(floats()?),
        "theta" => SweepAxis::Theta(floats()?),
        "gamma_m" => SweepAxis::GammaM(floats()?),
        "n_th" => SweepAxis::NTh(floats()?),
        "n_pulses" => SweepAxis::NPulses(
            values
                .split(',')
                .map(|v| v.trim().parse::<u64>().map_err(|_| format!("axis `n_pulses`: `{v}` is not an integer")))
                .collect::<Result<_, _>>()?,
        ),
        other => return Err(format!("unknown sweep axis `{other}` (k, theta, gamma_m, n_th, n_pulses)")),
    };
    Ok(axis)
}

pub fn parse_quantity(text: &str) -> Result<Quantity, String> {
    Quantity::parse(text.trim())
        .ok_or_else(|| format!("unknown quantity `{text}` (F, F_max, F_sat, r, phi_rad, purity, alpha)"))
}

pub fn run_sweep(config: &RunConfig, axes: Vec<SweepAxis>, quantities: Vec<Quantity>, method: Method) -> CmdResult {
    if axes.is_empty() {
        return Err(CliError::config(anyhow!("at least one --axis is required")));
    }
    let quantities = if quantities.is_empty() { vec![Quantity::Qfi] } else { quantities };
    let spec = SweepSpec {
        axes,
        quantities,
        n_pulses: config.n_max,
        method: method.resolve(config),
        window: config.fit_window.0,
    };
    let base = config.params()?;
    let points = sweep(&base, &spec)?;
    let axis_names: Vec<&str> = spec.axes.iter().map(SweepAxis::name).collect();
    // a pulse-count axis already supplies the n_pulses column
    let pulse_axis = axis_names.contains(&"n_pulses");
    let mut columns = vec!["point"];
    columns.extend(&axis_names);
    if !pulse_axis {
        columns.push("n_pulses");
    }
    columns.extend(["quantity", "value", "error"]);
    let mut failures = 0;
    let mut rows = Vec::new();
    for point in &points {
        for v in &point.values {
            let mut row = vec![point.index.to_string()];
            row.extend(point.coordinates.iter().map(|(name, x)| {
                if name == "n_pulses" {
                    point.n_pulses.to_string()
                } else {
                    float(*x)
                }
            }));
            if !pulse_axis {
                row.push(point.n_pulses.to_string());
            }
            row.push(v.quantity.name().to_string());
            row.push(optional(v.value));
            row.push(v.error.clone().unwrap_or_default());
            failures += usize::from(v.error.is_some());
            rows.push(row);
        }
    }
    let options = json!({
        "axes": spec.axes.iter().map(|a| serde_json::to_value(a).unwrap_or_default()).collect::<Vec<_>>(),
        "quantities": spec.quantities.iter().map(|q| q.name()).collect::<Vec<_>>(),
        "method": method,
    });
    let header = Header::new("sweep", config, options);
    announce(&write_csv(&config.out_dir, "sweep.csv", &header, &columns, rows)?);
    if failures > 0 {
        log::warn!("{failures} sweep values failed; see the error column");
    }
    Ok(())
}

pub struct OracleArgs {
    pub trajectories: usize,
    pub mc_pulses: u64,
    pub noise: NoiseArg,
    pub z_max: f64,
    pub bures_n: Vec<u64>,
    pub bures_tol: f64,
}

#[derive(Debug, Serialize)]
struct Comparison {
    name: String,
    reference: Vec<f64>,
    estimate: Vec<f64>,
    metric: f64,
    tolerance: f64,
    pass: bool,
}

/// Monte Carlo moments against the moment map, and the closed-form QFI
/// against the Bures-distance estimate. Disagreement exits with code 4.
pub fn oracle(config: &RunConfig, args: &OracleArgs) -> CmdResult {
    let params = config.params()?;
    let v0 = params.thermal_state()?;
    let mut comparisons = Vec::new();

    if args.trajectories > 0 {
        let options = McOptions {
            trajectories: args.trajectories,
            seed: config.seed,
            noise: match args.noise {
                NoiseArg::HighTemperature => NoiseModel::HighTemperature,
                NoiseArg::QuantumConsistent => NoiseModel::QuantumConsistent,
                NoiseArg::None => NoiseModel::None,
            },
            ..McOptions::default()
        };
        let est = monte_carlo_moments(&params, &v0, args.mc_pulses, &options)?;
        let exact = stroboscopic(&v0, &params, args.mc_pulses)?;
        let z = est.max_z_score(&exact);
        comparisons.push(Comparison {
            name: format!("monte carlo vs moments after {} pulses (max |z|)", args.mc_pulses),
            reference: vec![exact.qq, exact.qp, exact.pp],
            estimate: vec![est.moments.qq, est.moments.qp, est.moments.pp],
            metric: z,
            tolerance: args.z_max,
            pass: z < args.z_max,
        });
    }

    let n_max = args.bures_n.iter().copied().max().unwrap_or(0);
    if n_max > 0 {
        let traj = qfi_vs_pulses(&params, n_max as usize, SensitivityMethod::FiniteDifference { h_rel: config.h_rel })?;
        for &n in &args.bures_n {
            if n == 0 {
                return Err(CliError::config(anyhow!("--bures-n values must be >= 1")));
            }
            let f = traj.rows[n as usize - 1].f;
            let b = qfi_bures_oracle(&params, n)?.value;
            let gap = if f == b { 0.0 } else { (f - b).abs() / f.abs().max(b.abs()) };
            comparisons.push(Comparison {
                name: format!("closed-form vs Bures QFI at n = {n} (relative gap)"),
                reference: vec![f],
                estimate: vec![b],
                metric: gap,
                tolerance: args.bures_tol,
                pass: gap <= args.bures_tol,
            });
        }
    }

    for c in &comparisons {
        println!("{} {}: {:.3e} (tolerance {:.1e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.metric, c.tolerance);
    }
    let options = json!({
        "trajectories": args.trajectories,
        "mc_pulses": args.mc_pulses,
        "noise": args.noise,
        "z_max": args.z_max,
        "bures_n": args.bures_n,
        "bures_tol": args.bures_tol,
    });
    let header = Header::new("oracle", config, options);
    announce(&write_json(&config.out_dir, "oracle.json", &header, &comparisons)?);
    let failed: Vec<&str> = comparisons.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError { kind: Kind::Oracle, error: anyhow!("oracle disagreement: {}", failed.join("; ")) })
    }
}
