//! Experiment plumbing: seeded streams, log-log fits, versioned configs, a scenario registry and
//! reports written as CSV plus a JSON summary.

use crate::eigenbounds::{delta_well, eigen_ensemble, lt_epsilon_check, locator_rows, EnsembleConfig};
use crate::evolution::{check_strichartz_pair, strichartz_experiment, TorusGrid};
use crate::hartree::{density_from_orbitals, evolve, Interaction, StepControl};
use crate::resolvent::{
    alpha_q, lap_boundary, resolvent_jump_vs_extension, sobolev_exponents, uniform_resolvent_1d, uniform_sobolev_sweep,
    BoundarySide, PotentialField, SobolevConfig, SpectralParameter,
};
use crate::restriction::{
    check_restriction_q, duality_check, knapp_witness_ratios, optimality_slope, verify_restriction, RaySampling,
};
use crate::scatter::{deficit_scaling, smatrix, smatrix_1d, square_well_transmission};
use crate::specmat::{schatten_mat, WeightedOperator, WeightedSpace};
use crate::surface::{build_surface, SpatialGrid, SurfaceKind, SurfaceSpec};
use crate::{invalid, LabError, Result, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

/// Independent deterministic stream per (seed, index), so results do not depend on scheduling.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// largest |residual| in log space
    pub max_residual: f64,
    /// standard error of the slope (0 with exactly two points)
    pub std_error: f64,
}

/// Least-squares fit of log y = a + s log x on at least three points with strictly monotone x.
pub fn slope_fit(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return invalid("slope fit needs at least three matched samples");
    }
    let up = xs.windows(2).all(|w| w[1] > w[0]);
    let down = xs.windows(2).all(|w| w[1] < w[0]);
    if !(up || down) {
        return invalid("slope fit needs strictly monotone abscissae");
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return invalid("slope fit needs positive finite samples");
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let res: Vec<f64> = lx.iter().zip(&ly).map(|(x, y)| y - intercept - slope * x).collect();
    let max_residual = res.iter().map(|r| r.abs()).fold(0.0, f64::max);
    let ssr: f64 = res.iter().map(|r| r * r).sum();
    let std_error = (ssr / (n - 2.0) / sxx).sqrt();
    Ok(SlopeFit { slope, intercept, max_residual, std_error })
}

pub const SCHEMA_VERSION: u32 = 1;

pub const SCENARIOS: &[&str] = &["restriction", "optimality", "strichartz", "sobolev", "lap", "eigen", "hartree", "scatter", "selftest"];

/// On-disk experiment description. `params` holds the scenario parameters; omitted fields take
/// their defaults and unknown fields are rejected.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub scenario: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default)]
    pub params: Value,
}

impl ExperimentConfig {
    pub fn new(scenario: &str, seed: u64) -> Self {
        Self { schema_version: SCHEMA_VERSION, scenario: scenario.to_string(), seed, output: None, params: Value::Null }
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Check {
    pub name: String,
    /// the property under test
    pub tag: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct NamedSlope {
    pub name: String,
    pub fit: SlopeFit,
    pub expected: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub scenario: String,
    /// the resolved config, defaults filled in; parsing it back reproduces the run
    pub config: ExperimentConfig,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub checks: Vec<Check>,
    pub slopes: Vec<NamedSlope>,
    pub wall_time: f64,
}

impl Report {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.pass)
    }

    /// One row per measurement; contains nothing run-dependent beyond (config, seed).
    pub fn csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.iter().map(|c| csv_cell(c)).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }

    pub fn summary_json(&self) -> String {
        let v = serde_json::json!({
            "scenario": self.scenario,
            "config": self.config,
            "passed": self.passed(),
            "checks": self.checks,
            "slopes": self.slopes,
            "rows": self.rows.len(),
            "wall_time_seconds": self.wall_time,
        });
        serde_json::to_string_pretty(&v).expect("report serializes") + "\n"
    }

    /// Writes `results.csv` and `summary.json` into `dir`, each through a temporary file and a rename.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(io_err)?;
        write_atomic(&dir.join("results.csv"), self.csv().as_bytes())?;
        write_atomic(&dir.join("summary.json"), self.summary_json().as_bytes())
    }
}

fn csv_cell(c: &str) -> String {
    if c.contains([',', '"', '\n']) {
        format!("\"{}\"", c.replace('"', "\"\""))
    } else {
        c.to_string()
    }
}

fn io_err(e: std::io::Error) -> LabError {
    LabError::Invalid(format!("i/o: {e}"))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(io_err)?;
    std::fs::rename(&tmp, path).map_err(io_err)
}

fn num(x: f64) -> String {
    format!("{x:.12e}")
}

struct Sheet {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    checks: Vec<Check>,
    slopes: Vec<NamedSlope>,
}

impl Sheet {
    fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new(), checks: Vec::new(), slopes: Vec::new() }
    }

    fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    fn check(&mut self, name: &str, tag: &str, pass: bool, detail: String) {
        self.checks.push(Check { name: name.into(), tag: tag.into(), pass, detail });
    }

    /// Runs one section; an error becomes a failed check instead of aborting the report.
    fn section(&mut self, name: &str, tag: &str, f: impl FnOnce(&mut Sheet) -> Result<()>) {
        if let Err(e) = f(self) {
            self.check(name, tag, false, format!("error: {e}"));
        }
    }

    fn slope(&mut self, name: &str, fit: SlopeFit, expected: Option<f64>) {
        self.slopes.push(NamedSlope { name: name.into(), fit, expected });
    }
}

fn parse<P: DeserializeOwned + Default>(v: &Value) -> Result<P> {
    if v.is_null() {
        return Ok(P::default());
    }
    serde_json::from_value(v.clone()).map_err(|e| LabError::Invalid(format!("params: {e}")))
}

fn unknown(scenario: &str) -> LabError {
    LabError::Invalid(format!("unknown scenario '{scenario}'; registered: {}", SCENARIOS.join(", ")))
}

/// Default parameters of a scenario as JSON.
pub fn default_params(scenario: &str) -> Result<Value> {
    let v = match scenario {
        "restriction" => serde_json::to_value(RestrictionParams::default()),
        "optimality" => serde_json::to_value(OptimalityParams::default()),
        "strichartz" => serde_json::to_value(StrichartzParams::default()),
        "sobolev" => serde_json::to_value(SobolevParams::default()),
        "lap" => serde_json::to_value(LapParams::default()),
        "eigen" => serde_json::to_value(EigenParams::default()),
        "hartree" => serde_json::to_value(HartreeParams::default()),
        "scatter" => serde_json::to_value(ScatterParams::default()),
        "selftest" => serde_json::to_value(SelftestParams::default()),
        _ => return Err(unknown(scenario)),
    };
    Ok(v.expect("params serialize"))
}

/// Reduced parameters that finish in seconds, for smoke and determinism tests.
pub fn quick_params(scenario: &str) -> Result<Value> {
    let v = match scenario {
        "restriction" => serde_json::to_value(RestrictionParams {
            levels: vec![16, 20, 24],
            half_width: 4.0,
            surface_resolution: 48,
            trials: 2,
            tolerance: 0.5,
            knapp_per_axis: 16,
            ..Default::default()
        }),
        "optimality" => serde_json::to_value(OptimalityParams { resolution: 256, h_list: vec![0.8, 0.4, 0.2, 0.1], ..Default::default() }),
        "strichartz" => serde_json::to_value(StrichartzParams { m_max: 8, ..Default::default() }),
        "sobolev" => serde_json::to_value(SobolevParams {
            n: 2,
            q: 1.5,
            levels: vec![10, 12],
            args: vec![PI / 2.0, PI, 3.0 * PI / 2.0],
            moduli: vec![1.0],
            pairs: 1,
            hs1d_cells: 200,
            ..Default::default()
        }),
        "lap" => serde_json::to_value(LapParams { grid_n: 8, ..Default::default() }),
        "eigen" => serde_json::to_value(EigenParams {
            count: 3,
            n_coarse: 128,
            n_fine: 256,
            delta_h: 0.01,
            locator_members: 1,
            n_det_points: 64,
            contour_m: 32,
            ..Default::default()
        }),
        "hartree" => serde_json::to_value(HartreeParams { n: 64, t_final: 0.05, tau: 0.01, ..Default::default() }),
        "scatter" => serde_json::to_value(ScatterParams {
            grid_n: 8,
            lambdas: vec![2.0, 4.0, 8.0],
            unitarity_grids: vec![6, 8],
            ..Default::default()
        }),
        "selftest" => serde_json::to_value(SelftestParams::default()),
        _ => return Err(unknown(scenario)),
    };
    Ok(v.expect("params serialize"))
}

/// Validates the config fully (schema, scenario, parameters and their mathematical preconditions)
/// and returns it with defaults filled in.
pub fn resolve(cfg: &ExperimentConfig) -> Result<ExperimentConfig> {
    if cfg.schema_version != SCHEMA_VERSION {
        return invalid(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", cfg.schema_version));
    }
    let params = match cfg.scenario.as_str() {
        "restriction" => validated::<RestrictionParams>(&cfg.params)?,
        "optimality" => validated::<OptimalityParams>(&cfg.params)?,
        "strichartz" => validated::<StrichartzParams>(&cfg.params)?,
        "sobolev" => validated::<SobolevParams>(&cfg.params)?,
        "lap" => validated::<LapParams>(&cfg.params)?,
        "eigen" => validated::<EigenParams>(&cfg.params)?,
        "hartree" => validated::<HartreeParams>(&cfg.params)?,
        "scatter" => validated::<ScatterParams>(&cfg.params)?,
        "selftest" => validated::<SelftestParams>(&cfg.params)?,
        other => return Err(unknown(other)),
    };
    Ok(ExperimentConfig { params, ..cfg.clone() })
}

trait Scenario: Serialize + DeserializeOwned + Default {
    fn validate(&self) -> Result<()>;
    fn execute(&self, seed: u64, sheet: &mut Sheet);
}

fn validated<P: Scenario>(v: &Value) -> Result<Value> {
    let p: P = parse(v)?;
    p.validate()?;
    Ok(serde_json::to_value(&p).expect("params serialize"))
}

fn execute<P: Scenario>(v: &Value, seed: u64, sheet: &mut Sheet) -> Result<()> {
    let p: P = parse(v)?;
    p.execute(seed, sheet);
    Ok(())
}

fn header_for(scenario: &str) -> &'static [&'static str] {
    match scenario {
        "restriction" => &["section", "index", "grid_n", "surface_nodes", "delta", "ratio"],
        "optimality" => &["r", "h", "density_norm", "gamma_norm", "ratio"],
        "strichartz" => &["m", "lhs_uniform", "rhs_uniform", "ratio_uniform", "lhs_random", "rhs_random", "ratio_random"],
        "sobolev" => &["section", "level", "pair", "modulus", "arg", "norm", "ratio"],
        "lap" => &["section", "index", "parameter", "value"],
        "eigen" => &["section", "index", "a", "b", "c", "d"],
        "hartree" => &["t", "trace", "schatten", "hermiticity", "min_eigenvalue"],
        "scatter" => &["section", "index", "parameter", "value", "aux"],
        _ => &["name", "value", "reference"],
    }
}

/// Validates, then runs the scenario on a pool of `workers` threads (0 = rayon default).
pub fn run(cfg: &ExperimentConfig, workers: usize) -> Result<Report> {
    let resolved = resolve(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| LabError::Invalid(format!("worker pool: {e}")))?;
    let start = Instant::now();
    let scenario = resolved.scenario.clone();
    let mut sheet = Sheet::new(header_for(&scenario));
    pool.install(|| -> Result<()> {
        let (p, s, sh) = (&resolved.params, resolved.seed, &mut sheet);
        match scenario.as_str() {
            "restriction" => execute::<RestrictionParams>(p, s, sh),
            "optimality" => execute::<OptimalityParams>(p, s, sh),
            "strichartz" => execute::<StrichartzParams>(p, s, sh),
            "sobolev" => execute::<SobolevParams>(p, s, sh),
            "lap" => execute::<LapParams>(p, s, sh),
            "eigen" => execute::<EigenParams>(p, s, sh),
            "hartree" => execute::<HartreeParams>(p, s, sh),
            "scatter" => execute::<ScatterParams>(p, s, sh),
            _ => execute::<SelftestParams>(p, s, sh),
        }
    })?;
    Ok(Report {
        scenario,
        config: resolved,
        header: sheet.header,
        rows: sheet.rows,
        checks: sheet.checks,
        slopes: sheet.slopes,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn need(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        invalid(msg.to_string())
    }
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

// ---------------------------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RestrictionParams {
    pub n_dim: usize,
    pub q: f64,
    pub half_width: f64,
    /// points per axis, one entry per refinement level
    pub levels: Vec<usize>,
    /// circle nodes at the first level; scaled with the grid
    pub surface_resolution: usize,
    pub trials: usize,
    pub tolerance: f64,
    pub knapp_q: f64,
    pub knapp_deltas: Vec<f64>,
    pub knapp_per_axis: usize,
}

impl Default for RestrictionParams {
    fn default() -> Self {
        Self {
            n_dim: 2,
            q: 1.5,
            half_width: 6.0,
            levels: vec![48, 64, 80],
            surface_resolution: 96,
            trials: 4,
            tolerance: 0.1,
            knapp_q: 2.0,
            knapp_deltas: vec![0.4, 0.2, 0.1, 0.05],
            knapp_per_axis: 48,
        }
    }
}

impl Scenario for RestrictionParams {
    fn validate(&self) -> Result<()> {
        check_restriction_q(SurfaceKind::SphereCompact, self.n_dim, self.q)?;
        need(self.n_dim == 2 || self.n_dim == 3, "n_dim must be 2 or 3")?;
        need(self.levels.len() >= 2 && self.levels.windows(2).all(|w| w[1] > w[0]), "levels must increase, at least two")?;
        need(self.half_width > 0.0 && self.surface_resolution >= 8 && self.trials >= 1, "positive sizes required")?;
        need(self.tolerance > 0.0, "tolerance must be positive")?;
        need(self.knapp_q > 0.0 && self.knapp_per_axis >= 4, "knapp_q > 0 and knapp_per_axis ≥ 4")?;
        need(!self.knapp_deltas.is_empty() && self.knapp_deltas.iter().all(|d| *d > 0.0 && *d < 1.0), "knapp deltas in (0, 1)")?;
        need(strictly_decreasing(&self.knapp_deltas), "knapp deltas must decrease")
    }

    fn execute(&self, seed: u64, sh: &mut Sheet) {
        sh.section("refinement", "restriction-schatten-bound", |sh| {
            let levels: Vec<SpatialGrid> = self.levels.iter().map(|n| SpatialGrid::new(self.n_dim, self.half_width, *n)).collect::<Result<_>>()?;
            let rep = verify_restriction(&SurfaceSpec::sphere(self.n_dim, self.surface_resolution), self.q, &levels, self.trials, seed, self.tolerance)?;
            for l in &rep.levels {
                for (t, r) in l.ratios.iter().enumerate() {
                    sh.row(vec!["trial".into(), t.to_string(), l.n.to_string(), l.surface_nodes.to_string(), String::new(), num(*r)]);
                }
            }
            let maxima: Vec<String> = rep.levels.iter().map(|l| format!("{:.4}", l.max_ratio)).collect();
            let changes: Vec<String> = rep.changes.iter().map(|c| format!("{c:.3}")).collect();
            sh.check(
                "max ratio stable under refinement",
                "restriction-schatten-bound",
                rep.pass,
                format!("S^{} maxima {maxima:?}, changes {changes:?}, tolerance {}", rep.exponent, self.tolerance),
            );
            Ok(())
        });
        sh.section("knapp", "knapp-witness", |sh| {
            let circle = build_surface(&SurfaceSpec::sphere(self.n_dim, 512))?;
            let ratios = knapp_witness_ratios(&circle, self.knapp_q, &self.knapp_deltas, self.knapp_per_axis)?;
            for (i, (d, r)) in self.knapp_deltas.iter().zip(&ratios).enumerate() {
                sh.row(vec!["knapp".into(), i.to_string(), String::new(), circle.len().to_string(), num(*d), num(*r)]);
            }
            let grows = ratios.windows(2).all(|w| w[1] > w[0]);
            sh.check("Knapp witness grows as δ shrinks", "knapp-witness", grows, format!("q = {}", self.knapp_q));
            Ok(())
        });
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimalityParams {
    pub q: f64,
    pub r_values: Vec<f64>,
    pub h_list: Vec<f64>,
    pub resolution: usize,
    pub ray: RaySampling,
}

impl Default for OptimalityParams {
    fn default() -> Self {
        Self { q: 1.5, r_values: vec![3.0, 1.5], h_list: vec![0.4, 0.2, 0.1, 0.05], resolution: 1024, ray: RaySampling::default() }
    }
}

impl Scenario for OptimalityParams {
    fn validate(&self) -> Result<()> {
        check_restriction_q(SurfaceKind::SphereCompact, 2, self.q)?;
        need(!self.r_values.is_empty() && self.r_values.iter().all(|r| *r >= 1.0), "r values must be ≥ 1")?;
        need(self.h_list.len() >= 4 && strictly_decreasing(&self.h_list) && self.h_list.iter().all(|h| *h > 0.0), "at least 4 decreasing positive h")?;
        need(self.ray.dr > 0.0 && self.ray.radius_factor > 0.0, "ray sampling must be positive")?;
        let spacing = 2.0 * PI / self.resolution as f64;
        need(spacing <= self.h_list.last().unwrap() / 4.0, "circle resolution too coarse for the smallest h")
    }

    fn execute(&self, _seed: u64, sh: &mut Sheet) {
        let circle = match build_surface(&SurfaceSpec::sphere(2, self.resolution)) {
            Ok(c) => c,
            Err(e) => return sh.check("surface", "optimality-exponent", false, format!("error: {e}")),
        };
        for &r in &self.r_values {
            sh.section(&format!("slope r = {r}"), "optimality-exponent", |sh| {
                let rep = optimality_slope(&circle, self.q, r, &self.h_list, self.ray)?;
                for row in &rep.rows {
                    sh.row(vec![num(r), num(row.h), num(row.density_norm), num(row.gamma_norm), num(row.ratio)]);
                }
                sh.check(
                    &format!("divergence slope at r = {r}"),
                    "optimality-exponent",
                    rep.pass,
                    format!("slope {:.4}, expected {:.4}", rep.slope, rep.expected_slope),
                );
                sh.slope(&format!("ratio vs 1/h, r = {r}"), rep.trimmed_fit.clone().unwrap_or(rep.raw_fit.clone()), Some(rep.expected_slope));
                Ok(())
            });
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrichartzParams {
    pub d: usize,
    pub p: f64,
    pub q: f64,
    pub m_max: usize,
    pub spread_limit: f64,
    pub slope_margin: f64,
}

impl Default for StrichartzParams {
    fn default() -> Self {
        Self { d: 1, p: 4.0, q: 2.0, m_max: 64, spread_limit: 3.0, slope_margin: 0.05 }
    }
}

impl Scenario for StrichartzParams {
    fn validate(&self) -> Result<()> {
        need(self.d == 1 || self.d == 2, "d must be 1 or 2")?;
        check_strichartz_pair(self.d, self.p, self.q)?;
        need(self.m_max >= 4, "m_max must be at least 4 for a slope")
    }

    fn execute(&self, seed: u64, sh: &mut Sheet) {
        sh.section("experiment", "orthonormal-strichartz", |sh| {
            let rep = strichartz_experiment(self.d, self.p, self.q, self.m_max, seed)?;
            for r in &rep.rows {
                sh.row(vec![
                    r.m.to_string(),
                    num(r.lhs_uniform),
                    num(r.rhs_uniform),
                    num(r.ratio_uniform),
                    num(r.lhs_random),
                    num(r.rhs_random),
                    num(r.ratio_random),
                ]);
            }
            sh.check("LHS/RHS bounded in M", "orthonormal-strichartz", rep.ratio_spread <= self.spread_limit, format!("max/min {:.3}", rep.ratio_spread));
            let bound = rep.gain_bound + self.slope_margin;
            sh.check(
                "slope below the orthonormal gain",
                "orthonormal-strichartz",
                self.d != 1 || (rep.fit_uniform.slope <= bound && rep.fit_uniform.slope < 1.0),
                format!("slope {:.4}, bound {bound:.3}", rep.fit_uniform.slope),
            );
            sh.check("no wrap-around on the torus", "orthonormal-strichartz", rep.wrap_free, String::new());
            sh.slope("LHS vs M, ν ≡ 1", rep.fit_uniform.clone(), Some(rep.gain_bound));
            Ok(())
        });
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SobolevParams {
    pub n: usize,
    pub q: f64,
    pub moduli: Vec<f64>,
    pub args: Vec<f64>,
    pub pairs: usize,
    pub levels: Vec<usize>,
    pub support_radius: f64,
    pub spread_factor: f64,
    pub refinement_tolerance: f64,
    /// cells of the 1D Hilbert–Schmidt check (0 skips it)
    pub hs1d_cells: usize,
}

impl Default for SobolevParams {
    fn default() -> Self {
        let s = SobolevConfig::standard(3, 2.0, 0);
        Self {
            n: s.n,
            q: s.q,
            moduli: s.moduli,
            args: s.args,
            pairs: s.pairs,
            levels: s.levels,
            support_radius: s.support_radius,
            spread_factor: s.spread_factor,
            refinement_tolerance: s.refinement_tolerance,
            hs1d_cells: 1000,
        }
    }
}

impl Scenario for SobolevParams {
    fn validate(&self) -> Result<()> {
        sobolev_exponents(self.n, self.q)?;
        need(!self.moduli.is_empty() && self.moduli.iter().all(|m| *m > 0.0), "moduli must be positive")?;
        need(!self.args.is_empty() && self.args.iter().all(|a| *a > 0.0 && *a < 2.0 * PI), "args must lie in (0, 2π)")?;
        need(self.pairs >= 1 && !self.levels.is_empty() && self.support_radius > 0.0, "pairs, levels and radius required")?;
        need(self.hs1d_cells == 0 || self.hs1d_cells >= 8, "hs1d_cells must be 0 or ≥ 8")
    }

    fn execute(&self, seed: u64, sh: &mut Sheet) {
        sh.section("sweep", "uniform-sobolev", |sh| {
            let cfg = SobolevConfig {
                n: self.n,
                q: self.q,
                moduli: self.moduli.clone(),
                args: self.args.clone(),
                pairs: self.pairs,
                levels: self.levels.clone(),
                support_radius: self.support_radius,
                spread_factor: self.spread_factor,
                refinement_tolerance: self.refinement_tolerance,
                seed,
            };
            let rep = uniform_sobolev_sweep(&cfg)?;
            for p in &rep.points {
                sh.row(vec!["sweep".into(), p.level.to_string(), p.pair.to_string(), num(p.modulus), num(p.arg), num(p.norm), num(p.ratio)]);
            }
            let detail = format!("S^{} spread {:.3}, refinement changes {:?}", rep.alpha, rep.spread, rep.refinement_changes);
            match rep.pass {
                Some(ok) => sh.check("ratio spread and refinement", "uniform-sobolev", ok, detail),
                None => sh.check("outside the proven range (reported only)", "uniform-sobolev", true, detail),
            }
            Ok(())
        });
        if self.hs1d_cells > 0 {
            sh.section("one-dimensional", "uniform-resolvent-1d", |sh| {
                let lambdas = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0];
                let mut zs = Vec::new();
                for &m in &self.moduli {
                    for &a in &self.args {
                        zs.push(SpectralParameter::polar(m, a)?);
                    }
                }
                for l in lambdas {
                    zs.push(SpectralParameter::boundary(l, BoundarySide::Upper)?);
                }
                let w1 = |x: f64| C64::from_polar((-(x + 0.4) * (x + 0.4) / 0.98).exp(), 0.3 * x);
                let w2 = |x: f64| C64::new((-(x - 0.5) * (x - 0.5) / 1.62).exp(), 0.0);
                let rep = uniform_resolvent_1d(w1, w2, 6.0, self.hs1d_cells, &zs)?;
                for (i, r) in rep.rows.iter().enumerate() {
                    sh.row(vec!["hs1d".into(), String::new(), i.to_string(), num(r.modulus), num(r.arg), num(r.hs_norm), num(r.hs_norm / r.bound)]);
                }
                let k = zs.len() - lambdas.len();
                let fit = slope_fit(&lambdas, &rep.rows[k..].iter().map(|r| r.hs_norm).collect::<Vec<_>>())?;
                sh.check("bound (1/2)|z|^{-1/2}‖W₁‖₂‖W₂‖₂ never exceeded", "uniform-resolvent-1d", rep.violations == 0, format!("max ratio {:.4}", rep.max_ratio));
                sh.check("|z| scaling on the boundary", "uniform-resolvent-1d", (fit.slope + 0.5).abs() <= 0.02, format!("slope {:.4}", fit.slope));
                sh.slope("S² norm vs λ on the boundary", fit, Some(-0.5));
                Ok(())
            });
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LapParams {
    pub lambda: f64,
    pub q: f64,
    pub eps: Vec<f64>,
    pub radius: f64,
    pub grid_n: usize,
    pub amplitude: f64,
    pub jump_t: Vec<f64>,
    pub sphere_resolution: usize,
    pub jump_tolerance: f64,
}

impl Default for LapParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            q: 2.0,
            eps: vec![0.1, 0.05, 0.025, 0.0125],
            radius: 1.5,
            grid_n: 12,
            amplitude: 0.5,
            jump_t: vec![0.1, 0.05, 0.025],
            sphere_resolution: 16,
            jump_tolerance: 0.05,
        }
    }
}

fn smooth_bump(p: &[f64; 3], radius: f64) -> f64 {
    let r2 = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) / (radius * radius);
    if r2 < 1.0 {
        (1.0 - r2).powi(3)
    } else {
        0.0
    }
}

fn ball(grid: &SpatialGrid, radius: f64) -> Arc<WeightedSpace> {
    grid.space_where(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() <= radius)
}

impl Scenario for LapParams {
    fn validate(&self) -> Result<()> {
        need(self.lambda > 0.0 && self.radius > 0.0 && self.grid_n >= 4, "λ, radius > 0 and grid_n ≥ 4")?;
        alpha_q(3, self.q)?;
        need(self.eps.len() >= 3 && strictly_decreasing(&self.eps) && self.eps.iter().all(|e| *e > 0.0), "at least 3 decreasing positive ε")?;
        need(!self.jump_t.is_empty() && self.jump_t.iter().all(|t| *t > 0.0), "jump t values must be positive")?;
        need(self.sphere_resolution >= 4 && self.jump_tolerance > 0.0, "sphere resolution ≥ 4 and positive tolerance")
    }

    fn execute(&self, _seed: u64, sh: &mut Sheet) {
        let grid = match SpatialGrid::new(3, self.radius, self.grid_n) {
            Ok(g) => g,
            Err(e) => return sh.check("grid", "limiting-absorption", false, format!("error: {e}")),
        };
        let space = ball(&grid, self.radius);
        sh.section("Cauchy differences", "limiting-absorption", |sh| {
            let v = PotentialField::from_fn(space.clone(), |p| C64::new(self.amplitude * smooth_bump(p, self.radius), 0.0));
            let rep = lap_boundary(&v, self.lambda, BoundarySide::Upper, &self.eps, self.q)?;
            for (i, (e, n)) in rep.eps.iter().zip(&rep.norms).enumerate() {
                sh.row(vec!["norm".into(), i.to_string(), num(*e), num(*n)]);
            }
            for (i, c) in rep.cauchy.iter().enumerate() {
                sh.row(vec!["cauchy".into(), i.to_string(), num(rep.eps[i]), num(*c)]);
            }
            sh.check("Cauchy differences decrease", "limiting-absorption", rep.monotone, format!("S^{} differences {:?}", rep.alpha, rep.cauchy));
            sh.check(
                "(1+A)^{-1}A bound",
                "limiting-absorption",
                rep.perturbed.holds,
                format!("‖A‖ = {:.4}, applicable {}", rep.perturbed.a_norm, rep.perturbed.applicable),
            );
            Ok(())
        });
        sh.section("jump", "resolvent-jump", |sh| {
            let sphere = build_surface(&SurfaceSpec {
                kind: SurfaceKind::SphereQuadratic,
                ambient_dim: 3,
                truncation_radius: 0.0,
                resolution: self.sphere_resolution,
            })?;
            let w: Vec<C64> = space.points.iter().map(|p| C64::new(smooth_bump(p, self.radius), 0.0)).collect();
            let rep = resolvent_jump_vs_extension(&space, &sphere, &w, &w, &self.jump_t)?;
            for (i, (t, d)) in rep.t.iter().zip(&rep.distances).enumerate() {
                sh.row(vec!["jump".into(), i.to_string(), num(*t), num(*d)]);
            }
            sh.check(
                "jump approaches 2πi·T_S",
                "resolvent-jump",
                rep.final_distance < self.jump_tolerance,
                format!("relative HS distance {:.4} at t = {}", rep.final_distance, rep.t.last().unwrap()),
            );
            Ok(())
        });
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigenParams {
    pub count: usize,
    pub depth: f64,
    pub n_coarse: usize,
    pub n_fine: usize,
    pub eps: f64,
    pub filter_tol: f64,
    pub lt_tolerance: f64,
    pub delta_coupling: f64,
    pub delta_width: f64,
    pub delta_h: f64,
    /// ensemble members cross-checked by the determinant locator
    pub locator_members: usize,
    pub n_det_points: usize,
    pub contour_m: usize,
}

impl Default for EigenParams {
    fn default() -> Self {
        let e = EnsembleConfig::default();
        Self {
            count: e.count,
            depth: e.depth,
            n_coarse: e.n_coarse,
            n_fine: e.n_fine,
            eps: e.eps,
            filter_tol: e.filter_tol,
            lt_tolerance: 0.05,
            delta_coupling: 2.0,
            delta_width: 0.02,
            delta_h: 0.005,
            locator_members: e.count,
            n_det_points: 128,
            contour_m: 64,
        }
    }
}

impl Scenario for EigenParams {
    fn validate(&self) -> Result<()> {
        lt_epsilon_check(1, 1.0, self.eps)?;
        need(self.count >= 1 && self.n_fine > self.n_coarse && self.n_coarse >= 32, "count ≥ 1 and n_fine > n_coarse ≥ 32")?;
        need(self.depth > 0.0 && self.filter_tol > 0.0 && self.lt_tolerance > 0.0, "positive depth and tolerances")?;
        need(self.delta_coupling > 0.0 && self.delta_width > 0.0 && self.delta_h > 0.0 && self.delta_h <= self.delta_width, "delta well needs 0 < h ≤ width")?;
        need(self.locator_members <= self.count, "locator_members cannot exceed count")?;
        need(self.n_det_points >= 16 && self.contour_m >= 8, "n_det_points ≥ 16 and contour_m ≥ 8")
    }

    fn execute(&self, seed: u64, sh: &mut Sheet) {
        sh.section("delta well", "single-eigenvalue-sharpness", |sh| {
            let d = delta_well(self.delta_coupling, self.delta_width, self.delta_h)?;
            sh.row(vec!["delta".into(), "0".into(), num(d.width), num(d.coupling), num(d.lowest), num(d.ratio)]);
            sh.check("|λ|^{1/2}/∫|V| near 1/2", "single-eigenvalue-sharpness", (d.ratio - 0.5).abs() <= 0.025, format!("ratio {:.4}", d.ratio));
            Ok(())
        });
        let cfg = EnsembleConfig {
            count: self.count,
            depth: self.depth,
            n_coarse: self.n_coarse,
            n_fine: self.n_fine,
            eps: self.eps,
            filter_tol: self.filter_tol,
            seed,
        };
        sh.section("ensemble", "lieb-thirring-sum", |sh| {
            let ens = eigen_ensemble(&cfg)?;
            for m in &ens.members {
                sh.row(vec!["member".into(), m.index.to_string(), num(m.l1_norm), num(m.lt_coarse), num(m.lt_fine), num(m.lt_change)]);
            }
            sh.check(
                "LT sum stable under refinement",
                "lieb-thirring-sum",
                ens.max_lt_change <= self.lt_tolerance,
                format!("max change {:.2e}, max ratio to bound {:.4}", ens.max_lt_change, ens.max_lt_ratio),
            );
            sh.check("fine clouds certified by winding", "lieb-thirring-sum", ens.all_certified, String::new());
            sh.check(
                "single-eigenvalue ratio at most 1/2",
                "single-eigenvalue-bound",
                ens.single_max_fine <= 0.5 + 1e-9,
                format!("max {:.4}", ens.single_max_fine),
            );
            let mut mismatches = 0;
            for m in ens.members.iter().take(self.locator_members) {
                for (k, row) in locator_rows(&cfg, m.index, &m.coarse, self.n_det_points, self.contour_m)?.into_iter().enumerate() {
                    if row.det_count != row.cloud_count as i64 {
                        mismatches += 1;
                    }
                    sh.row(vec!["locator".into(), m.index.to_string(), k.to_string(), row.det_count.to_string(), row.cloud_count.to_string(), num(row.raw_winding)]);
                }
            }
            sh.check(
                "determinant zero counts equal eigensolver counts",
                "determinant-zero-count",
                mismatches == 0,
                format!("{mismatches} mismatching rectangles over {} members", self.locator_members),
            );
            Ok(())
        });
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HartreeParams {
    pub length: f64,
    pub n: usize,
    pub t_final: f64,
    pub tau: f64,
    pub interaction_amplitude: f64,
    pub occupations: Vec<f64>,
    pub trace_tolerance: f64,
    pub schatten_tolerance: f64,
}

impl Default for HartreeParams {
    fn default() -> Self {
        Self {
            length: 20.0,
            n: 128,
            t_final: 0.5,
            tau: 0.01,
            interaction_amplitude: 4.0,
            occupations: vec![0.6, 0.4],
            trace_tolerance: 1e-10,
            schatten_tolerance: 1e-6,
        }
    }
}

fn packet(xs: &[f64], x0: f64, s: f64, k0: f64) -> Vec<C64> {
    let h = xs[1] - xs[0];
    let u: Vec<C64> = xs.iter().map(|x| C64::from_polar((-((x - x0) / s).powi(2)).exp(), k0 * x)).collect();
    let nrm = (u.iter().map(|v| v.norm_sqr()).sum::<f64>() * h).sqrt();
    u.into_iter().map(|v| v / nrm).collect()
}

impl Scenario for HartreeParams {
    fn validate(&self) -> Result<()> {
        need(self.length > 0.0 && self.n >= 16 && self.n % 2 == 0, "length > 0 and even n ≥ 16")?;
        need(self.t_final > 0.0 && self.tau > 0.0 && self.tau <= self.t_final, "0 < tau ≤ t_final")?;
        need(!self.occupations.is_empty() && self.occupations.len() <= 4, "1 to 4 occupations")?;
        need(self.occupations.iter().all(|o| *o > 0.0), "occupations must be positive")
    }

    fn execute(&self, seed: u64, sh: &mut Sheet) {
        sh.section("flow", "hartree-conservation", |sh| {
            let g = TorusGrid::new(1, self.length, self.n)?;
            let amp = self.interaction_amplitude;
            let w = Interaction::from_fn(g, 2.0, |x| amp * (-x * x).exp())?;
            let mut rng = rng_for(seed, 0);
            let half = self.length / 4.0;
            let orbitals: Vec<Vec<C64>> = self
                .occupations
                .iter()
                .map(|_| packet(&g.axis(), half * (2.0 * rng.random::<f64>() - 1.0), 0.7 + 0.5 * rng.random::<f64>(), 3.0 * rng.random::<f64>() - 1.5))
                .collect();
            let gamma0 = density_from_orbitals(&g, &orbitals, &self.occupations)?;
            let traj = evolve(&gamma0, &w, self.t_final, Some(self.tau), (4.0, 2.0), StepControl::default())?;
            for s in &traj.report.samples {
                sh.row(vec![num(s.t), num(s.trace), num(s.schatten), num(s.hermiticity), s.min_eigenvalue.map(num).unwrap_or_default()]);
            }
            let r = &traj.report;
            sh.check("trace conserved", "hartree-conservation", r.trace_drift < self.trace_tolerance, format!("drift {:.2e}", r.trace_drift));
            sh.check(
                "Schatten norm conserved",
                "hartree-conservation",
                r.schatten_drift < self.schatten_tolerance,
                format!("S^{} drift {:.2e}", r.schatten_exponent, r.schatten_drift),
            );
            sh.check("Picard iteration contracts", "hartree-well-posedness", r.contraction_factor < 1.0, format!("factor {:.3}", r.contraction_factor));
            Ok(())
        });
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScatterParams {
    pub q: f64,
    pub lambdas: Vec<f64>,
    pub radius: f64,
    pub grid_n: usize,
    pub amplitude: f64,
    pub width: f64,
    pub slope_tolerance: f64,
    pub unitarity_coupling: f64,
    pub unitarity_lambda: f64,
    /// points per axis of the unitarity runs, one per refinement level
    pub unitarity_grids: Vec<usize>,
    pub unitarity_tolerance: f64,
}

impl Default for ScatterParams {
    fn default() -> Self {
        Self {
            q: 2.0,
            lambdas: vec![8.0, 16.0, 32.0],
            radius: 1.6,
            grid_n: 16,
            amplitude: -0.25,
            width: 0.5,
            slope_tolerance: 0.1,
            unitarity_coupling: 10.0,
            unitarity_lambda: 4.0,
            unitarity_grids: vec![10, 13, 16],
            unitarity_tolerance: 5e-3,
        }
    }
}

impl Scenario for ScatterParams {
    fn validate(&self) -> Result<()> {
        need((1.5..=2.0).contains(&self.q), "q must lie in [3/2, 2] for N = 3")?;
        need(self.lambdas.len() >= 3 && self.lambdas.windows(2).all(|w| w[1] > w[0]) && self.lambdas[0] > 0.0, "at least 3 increasing positive λ")?;
        need(self.radius > 0.0 && self.width > 0.0 && self.grid_n >= 4, "positive sizes")?;
        need(self.unitarity_lambda > 0.0 && !self.unitarity_grids.is_empty(), "unitarity λ > 0 and grids")?;
        need(self.unitarity_grids.windows(2).all(|w| w[1] > w[0]) && self.unitarity_grids[0] >= 4, "unitarity grids must increase from ≥ 4")
    }

    fn execute(&self, _seed: u64, sh: &mut Sheet) {
        sh.section("square well", "scattering-1d", |sh| {
            let (v0, a, lambda) = (3.0, 1.3, 2.2);
            let cells = 64;
            let h = a / cells as f64;
            let pts: Vec<[f64; 3]> = (0..cells).map(|i| [(i as f64 + 0.5) * h, 0.0, 0.0]).collect();
            let well = PotentialField::new(Arc::new(WeightedSpace::new(1, pts, vec![h; cells])?), vec![C64::new(-v0, 0.0); cells])?;
            let s = smatrix_1d(&well, lambda)?;
            let exact = square_well_transmission(v0, a, lambda);
            let err = (s.t - exact).norm() / exact.norm();
            let flux = (s.r.norm_sqr() + s.t.norm_sqr() - 1.0).abs();
            sh.row(vec!["square_well".into(), "0".into(), num(lambda), num(err), num(flux)]);
            sh.check("transmission matches the closed form", "scattering-1d", err < 1e-6 && flux < 1e-10, format!("rel err {err:.2e}, flux {flux:.2e}"));
            Ok(())
        });
        sh.section("weak coupling", "scattering-deficit", |sh| {
            let grid = SpatialGrid::new(3, self.radius, self.grid_n)?;
            let (amp, s2) = (self.amplitude, self.width * self.width);
            let v = PotentialField::from_fn(ball(&grid, self.radius), |p| C64::new(amp * (-(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) / s2).exp(), 0.0));
            let sc = deficit_scaling(&v, &self.lambdas, self.q)?;
            for (i, (l, d)) in sc.lambdas.iter().zip(&sc.deficits).enumerate() {
                sh.row(vec!["deficit".into(), i.to_string(), num(*l), num(*d), num(sc.max_a_norm)]);
            }
            let ok = (sc.fit.slope - sc.expected_slope).abs() <= self.slope_tolerance * sc.expected_slope.abs();
            sh.check("deficit slope in λ", "scattering-deficit", ok, format!("slope {:.4}, expected {:.4}", sc.fit.slope, sc.expected_slope));
            sh.slope("‖S − 1‖ vs λ", sc.fit.clone(), Some(sc.expected_slope));
            Ok(())
        });
        sh.section("unitarity", "scattering-unitarity", |sh| {
            let c = self.unitarity_coupling;
            let mut res = Vec::new();
            for &n in &self.unitarity_grids {
                let grid = SpatialGrid::new(3, 1.0, n)?;
                let v = PotentialField::from_fn(ball(&grid, 1.0), |p| C64::new(c * (-(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) / 0.25).exp(), 0.0));
                let rep = smatrix(&v, self.unitarity_lambda, self.q)?;
                sh.row(vec!["unitarity".into(), n.to_string(), num(self.unitarity_lambda), num(rep.unitarity_residual), rep.sphere_nodes.to_string()]);
                res.push(rep.unitarity_residual);
            }
            let ok = res.windows(2).all(|w| w[1] < w[0]) && *res.last().unwrap() < self.unitarity_tolerance;
            sh.check("S*S − 1 small and decreasing", "scattering-unitarity", ok, format!("residuals {res:?}"));
            Ok(())
        });
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelftestParams {
    pub size: usize,
    pub trials: usize,
}

impl Default for SelftestParams {
    fn default() -> Self {
        Self { size: 24, trials: 20 }
    }
}

impl Scenario for SelftestParams {
    fn validate(&self) -> Result<()> {
        need(self.size >= 2 && self.size <= 400 && self.trials >= 1, "2 ≤ size ≤ 400 and trials ≥ 1")
    }

    fn execute(&self, seed: u64, sh: &mut Sheet) {
        sh.section("schatten", "spectral-core", |sh| {
            // diagonal matrix with known singular values
            let n = self.size;
            let d: Vec<f64> = (1..=n).map(|k| 1.0 / k as f64).collect();
            let m = faer::Mat::from_fn(n, n, |i, j| if i == j { C64::new(0.0, d[i]) } else { C64::new(0.0, 0.0) });
            let mut worst = 0.0f64;
            for alpha in [1.0, 2.0, 3.0, 4.0] {
                let exact = d.iter().map(|s| s.powf(alpha)).sum::<f64>().powf(1.0 / alpha);
                let got = schatten_mat(m.as_ref(), alpha)?;
                worst = worst.max((got - exact).abs() / exact);
                sh.row(vec![format!("schatten_{alpha}"), num(got), num(exact)]);
            }
            sh.check("diagonal Schatten norms", "spectral-core", worst < 1e-12, format!("max rel err {worst:.2e}"));
            Ok(())
        });
        sh.section("duality", "duality-identity", |sh| {
            let mut rng = rng_for(seed, 1);
            let n = self.size;
            let dom = Arc::new(WeightedSpace::new(1, vec![[0.0; 3]; n], (0..n).map(|_| 0.1 + rng.random::<f64>()).collect())?);
            let cod = Arc::new(WeightedSpace::new(1, vec![[0.0; 3]; 2 * n], (0..2 * n).map(|_| 0.1 + rng.random::<f64>()).collect())?);
            let k = faer::Mat::from_fn(2 * n, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let rep = duality_check(&WeightedOperator::new(k, dom, cod)?, 2.0, self.trials, seed)?;
            sh.row(vec!["duality_residual".into(), num(rep.max_identity_residual), num(0.0)]);
            sh.check(
                "trace identity and Hölder",
                "duality-identity",
                rep.max_identity_residual < 1e-10 && rep.holder_violations == 0,
                format!("residual {:.2e}", rep.max_identity_residual),
            );
            Ok(())
        });
        sh.section("square well", "scattering-1d", |sh| {
            let (v0, a, lambda) = (2.0, 1.0, 1.5);
            let cells = 8;
            let h = a / cells as f64;
            let pts: Vec<[f64; 3]> = (0..cells).map(|i| [(i as f64 + 0.5) * h, 0.0, 0.0]).collect();
            let well = PotentialField::new(Arc::new(WeightedSpace::new(1, pts, vec![h; cells])?), vec![C64::new(-v0, 0.0); cells])?;
            let t = smatrix_1d(&well, lambda)?.t;
            let exact = square_well_transmission(v0, a, lambda);
            sh.row(vec!["square_well_abs_t".into(), num(t.norm()), num(exact.norm())]);
            sh.check("square well transmission", "scattering-1d", (t - exact).norm() < 1e-10, String::new());
            Ok(())
        });
        sh.section("fit", "slope-fit", |sh| {
            let xs = [1.0, 2.0, 4.0, 8.0];
            let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.25)).collect();
            let f = slope_fit(&xs, &ys)?;
            sh.row(vec!["fit_slope".into(), num(f.slope), num(-0.25)]);
            sh.check("exact power law", "slope-fit", (f.slope + 0.25).abs() < 1e-12, String::new());
            Ok(())
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits() {
        let xs = [1.0, 2.0, 3.0, 5.0];
        let f = slope_fit(&xs, &xs).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-14 && f.max_residual < 1e-14 && f.std_error < 1e-14);
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
        let f = slope_fit(&xs, &ys).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-13 && (f.intercept - 3f64.ln()).abs() < 1e-13);
        assert!(slope_fit(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(slope_fit(&[1.0, 3.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(slope_fit(&[1.0, 2.0, 3.0], &[1.0, 0.0, 3.0]).is_err());
    }

    #[test]
    fn registry_errors() {
        let err = run(&ExperimentConfig::new("nope", 0), 1).unwrap_err().to_string();
        for s in SCENARIOS {
            assert!(err.contains(s));
        }
        let mut bad = ExperimentConfig::new("strichartz", 0);
        bad.params = serde_json::json!({ "m_max": 8, "bogus": 1 });
        assert!(resolve(&bad).is_err());
        bad.params = serde_json::json!({ "q": 5.0 });
        assert!(matches!(resolve(&bad), Err(LabError::Inadmissible(_))));
        let mut old = ExperimentConfig::new("selftest", 0);
        old.schema_version = 0;
        assert!(resolve(&old).is_err());
    }

    #[test]
    fn selftest_passes_and_echo_round_trips() {
        let rep = run(&ExperimentConfig::new("selftest", 4), 1).unwrap();
        assert!(rep.passed(), "{:?}", rep.checks);
        let echoed: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&rep.config).unwrap()).unwrap();
        let again = run(&echoed, 1).unwrap();
        assert_eq!(rep.csv(), again.csv());
        assert!(rep.csv().lines().next().unwrap().starts_with("name,value"));
    }

    #[test]
    fn every_scenario_has_valid_defaults() {
        for s in SCENARIOS {
            let mut c = ExperimentConfig::new(s, 1);
            c.params = default_params(s).unwrap();
            resolve(&c).unwrap();
            c.params = quick_params(s).unwrap();
            resolve(&c).unwrap();
        }
    }
}
