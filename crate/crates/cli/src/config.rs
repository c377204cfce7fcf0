//! The flat JSON run configuration and its up-front validation.

use std::path::{Path, PathBuf};

use cauchy_core::kernel::KernelParams;
use cauchy_core::oracle::{Family, ProblemGrids};
use cauchy_core::solver::{Coefficients, Mode};
use cauchy_core::spectral::TimeGrid;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Largest `shift·t` allowed in output before undamping would overflow.
const UNDAMP_LIMIT: f64 = 700.0;

/// Every key is optional in the document; each subcommand checks the ones it needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Option<String>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub q: Option<f64>,
    pub y: Option<f64>,
    pub dt: Option<f64>,
    pub n: Option<usize>,
    pub dx: Option<f64>,
    pub ds: Option<f64>,
    pub mode: Option<Mode>,
    pub family: Option<String>,
    pub input_g0: Option<PathBuf>,
    pub input_g1: Option<PathBuf>,
    /// Long-format `x,t,value` source samples on a uniform `x`-grid from 0.
    pub input_f: Option<PathBuf>,
    pub input_series: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub shift: Option<f64>,
    pub max_gain: Option<f64>,
    pub noise_level: Option<f64>,
    pub seed: Option<u64>,
    pub alpha_list: Option<Vec<f64>>,
    pub omega_grid: Option<Vec<f64>>,
    pub probe_x: Option<f64>,
    pub plots: Option<bool>,
    pub strict_q: Option<bool>,
    /// Rows with `t` above this are left out of field CSVs.
    pub output_t_max: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(vec![format!("{}: {e}", path.display())]))
    }

    /// Relative input paths resolve against the config file's directory.
    pub fn resolve_paths(&mut self, base: &Path) {
        for path in [
            &mut self.input_g0,
            &mut self.input_g1,
            &mut self.input_f,
            &mut self.input_series,
            &mut self.output_dir,
        ]
        .into_iter()
        .flatten()
        {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }
}

/// Collects messages so that every problem is reported at once.
#[derive(Debug, Default)]
pub struct Problems(Vec<String>);

impl Problems {
    pub fn push(&mut self, message: impl Into<String>) {
        self.0.push(message.into());
    }

    fn require<T: Copy>(&mut self, value: Option<T>, key: &str) -> Option<T> {
        if value.is_none() {
            self.push(format!("missing required key `{key}`"));
        }
        value
    }

    fn finish<T>(self, value: impl FnOnce() -> T) -> Result<T, CliError> {
        if self.0.is_empty() {
            Ok(value())
        } else {
            Err(CliError::Config(self.0))
        }
    }
}

fn positive(problems: &mut Problems, value: Option<f64>, key: &str) -> Option<f64> {
    let v = problems.require(value, key)?;
    if !(v > 0.0 && v.is_finite()) {
        problems.push(format!("`{key}` must be positive and finite, got {v}"));
        return None;
    }
    Some(v)
}

fn kernel(problems: &mut Problems, config: &RunConfig, strict_q: bool) -> Option<KernelParams> {
    let alpha = problems.require(config.alpha, "alpha");
    let beta = problems.require(config.beta, "beta");
    let q = problems.require(config.q, "q");
    let params = KernelParams {
        alpha: alpha?,
        beta: beta?,
        q: q?,
    };
    let errors = params.errors();
    let ok = errors.is_empty();
    for e in errors {
        problems.push(e.to_string());
    }
    if ok && strict_q {
        if let Err(e) = params.validate_strict() {
            problems.push(e.to_string());
            return None;
        }
    }
    ok.then_some(params)
}

fn coefficients(problems: &mut Problems, config: &RunConfig) -> Option<Coefficients> {
    let a = problems.require(config.a, "a");
    let b = problems.require(config.b, "b");
    let c = problems.require(config.c, "c");
    let coeffs = Coefficients { a: a?, b: b?, c: c? };
    if let Err(e) = coeffs.validate() {
        problems.push(e.to_string());
        return None;
    }
    Some(coeffs)
}

fn time_grid(problems: &mut Problems, config: &RunConfig) -> Option<TimeGrid> {
    let dt = problems.require(config.dt, "dt");
    let n = problems.require(config.n, "n");
    match TimeGrid::new(dt?, n?) {
        Ok(grid) => Some(grid),
        Err(e) => {
            problems.push(e.to_string());
            None
        }
    }
}

fn family(problems: &mut Problems, id: &str) -> Option<Family> {
    match Family::from_id(id).and_then(|f| f.validate().map(|_| f)) {
        Ok(f) => Some(f),
        Err(e) => {
            problems.push(e.to_string());
            None
        }
    }
}

/// Where the boundary data of a solve comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Manufactured { family: Family, grids: ProblemGrids },
    Files {
        g0: PathBuf,
        g1: PathBuf,
        source: Option<PathBuf>,
        dx: f64,
        depth: f64,
    },
}

/// A validated `solve` or `alpha-study` configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveSetup {
    pub experiment: String,
    pub coeffs: Coefficients,
    pub params: KernelParams,
    pub mode: Mode,
    pub data: DataSource,
    pub shift: Option<f64>,
    pub max_gain: f64,
    pub noise_level: f64,
    pub seed: u64,
    pub plots: bool,
    pub output_t_max: Option<f64>,
    pub strict_q: bool,
}

fn strict(config: &RunConfig, flag: bool) -> bool {
    flag || config.strict_q.unwrap_or(false)
}

pub fn solve_setup(config: &RunConfig, strict_q: bool) -> Result<SolveSetup, CliError> {
    let mut problems = Problems::default();
    let strict_q = strict(config, strict_q);
    let coeffs = coefficients(&mut problems, config);
    let params = kernel(&mut problems, config, strict_q);
    let depth = positive(&mut problems, config.y, "y");
    let dx = positive(&mut problems, config.dx, "dx");

    let shift = config.shift;
    if let Some(s) = shift {
        if !(s > 0.0 && s.is_finite()) {
            problems.push(format!("`shift` must be positive and finite, got {s}"));
        }
    }
    if let Some(coeffs) = coeffs {
        let mu_after = coeffs.mu() + coeffs.a * shift.unwrap_or(0.0);
        if !(mu_after > 0.0) {
            problems.push(format!(
                "mu = b^2/4 - c = {} is not positive; set `shift` above {}",
                coeffs.mu(),
                coeffs.required_shift()
            ));
        }
    }
    if let Some(s) = shift.filter(|s| *s > 0.0) {
        match config.output_t_max {
            Some(t) if s * t <= UNDAMP_LIMIT => {}
            _ => problems.push(format!(
                "`shift` requires `output_t_max` with shift * output_t_max <= {UNDAMP_LIMIT}"
            )),
        }
    }
    // Undamping turns K(p) into K(p - shift), which stays a causal smoother only while beta > shift.
    if let (Some(s), Some(beta)) = (shift, config.beta) {
        if config.mode != Some(Mode::Raw) && s >= beta {
            problems.push(format!(
                "`shift` = {s} must be below `beta` = {beta} in premollified mode; \
                 the original-frame output is smoothed with beta - shift"
            ));
        }
    }
    if let Some(t) = config.output_t_max {
        if !(t >= 0.0) {
            problems.push(format!("`output_t_max` must be non-negative, got {t}"));
        }
    }

    let noise_level = config.noise_level.unwrap_or(0.0);
    if !(noise_level >= 0.0 && noise_level.is_finite()) {
        problems.push(format!("`noise_level` must be non-negative, got {noise_level}"));
    }
    let max_gain = config.max_gain.unwrap_or(if noise_level > 0.0 {
        1.0 / noise_level
    } else {
        1.0 / f64::EPSILON
    });
    if !(max_gain > 1.0) {
        problems.push(format!("`max_gain` must exceed 1, got {max_gain}"));
    }

    let data = match (&config.family, &config.input_g0, &config.input_g1) {
        (Some(id), None, None) => {
            let family = family(&mut problems, id);
            let grid = time_grid(&mut problems, config);
            let ds = positive(&mut problems, config.ds, "ds");
            match (family, grid, ds, depth, dx) {
                (Some(family), Some(time), Some(ds), Some(depth), Some(dx)) => {
                    let grids = ProblemGrids { time, ds, depth, dx };
                    if let Err(e) = grids.validate() {
                        problems.push(e.to_string());
                    }
                    Some(DataSource::Manufactured { family, grids })
                }
                _ => None,
            }
        }
        (None, Some(g0), Some(g1)) => {
            if config.input_f.is_some() && noise_level > 0.0 {
                log::info!("noise is applied to g0 and g1 only");
            }
            match (depth, dx) {
                (Some(depth), Some(dx)) => Some(DataSource::Files {
                    g0: g0.clone(),
                    g1: g1.clone(),
                    source: config.input_f.clone(),
                    dx,
                    depth,
                }),
                _ => None,
            }
        }
        (Some(_), _, _) => {
            problems.push("give either `family` or `input_g0`/`input_g1`, not both");
            None
        }
        _ => {
            problems.push("boundary data missing: set `family` or both `input_g0` and `input_g1`");
            None
        }
    };
    if let (Some(depth), Some(dx)) = (depth, dx) {
        let cells = depth / dx;
        if (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) || cells.round() < 1.0 {
            problems.push(format!("`y` = {depth} must be a positive integer multiple of `dx` = {dx}"));
        }
    }

    problems.finish(|| SolveSetup {
        experiment: config.experiment.clone().unwrap_or_else(|| "solve".into()),
        coeffs: coeffs.expect("validated"),
        params: params.expect("validated"),
        mode: config.mode.unwrap_or(Mode::Premollified),
        data: data.expect("validated"),
        shift,
        max_gain,
        noise_level,
        seed: config.seed.unwrap_or(0),
        plots: config.plots.unwrap_or(true),
        output_t_max: config.output_t_max,
        strict_q,
    })
}

/// `solve` setup plus the list of `α` to sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct StudySetup {
    pub solve: SolveSetup,
    pub alphas: Vec<f64>,
}

pub fn study_setup(config: &RunConfig, strict_q: bool) -> Result<StudySetup, CliError> {
    let mut problems = Problems::default();
    let alphas = config.alpha_list.clone().unwrap_or_default();
    if alphas.is_empty() {
        problems.push("missing required key `alpha_list`");
    }
    if alphas.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
        problems.push("`alpha_list` entries must be positive and finite");
    }
    if alphas.windows(2).any(|w| !(w[1] < w[0])) {
        problems.push("`alpha_list` must be strictly decreasing");
    }
    if config.family.is_none() {
        problems.push("`alpha-study` needs `family` so that errors can be measured");
    }
    // Take the first alpha as the nominal kernel when `alpha` is absent.
    let mut nominal = config.clone();
    if nominal.alpha.is_none() {
        nominal.alpha = alphas.first().copied();
    }
    let solve = match solve_setup(&nominal, strict_q) {
        Ok(s) => Some(s),
        Err(CliError::Config(list)) => {
            list.into_iter().for_each(|m| problems.push(m));
            None
        }
        Err(other) => return Err(other),
    };
    problems.finish(|| StudySetup {
        solve: solve.expect("validated"),
        alphas,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MollifySetup {
    pub params: KernelParams,
    pub input: PathBuf,
    pub plots: bool,
}

pub fn mollify_setup(config: &RunConfig, strict_q: bool) -> Result<MollifySetup, CliError> {
    let mut problems = Problems::default();
    let params = kernel(&mut problems, config, strict(config, strict_q));
    if config.input_series.is_none() {
        problems.push("missing required key `input_series`");
    }
    problems.finish(|| MollifySetup {
        params: params.expect("validated"),
        input: config.input_series.clone().expect("validated"),
        plots: config.plots.unwrap_or(true),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManufactureSetup {
    pub coeffs: Coefficients,
    pub family: Family,
    pub grids: ProblemGrids,
}

pub fn manufacture_setup(config: &RunConfig) -> Result<ManufactureSetup, CliError> {
    let mut problems = Problems::default();
    let coeffs = coefficients(&mut problems, config);
    let id = problems.require(config.family.as_deref(), "family");
    let family = id.and_then(|id| family(&mut problems, id));
    let time = time_grid(&mut problems, config);
    let ds = positive(&mut problems, config.ds, "ds");
    let depth = positive(&mut problems, config.y, "y");
    let dx = positive(&mut problems, config.dx, "dx");
    let grids = match (time, ds, depth, dx) {
        (Some(time), Some(ds), Some(depth), Some(dx)) => {
            let grids = ProblemGrids { time, ds, depth, dx };
            if let Err(e) = grids.validate() {
                problems.push(e.to_string());
            }
            Some(grids)
        }
        _ => None,
    };
    problems.finish(|| ManufactureSetup {
        coeffs: coeffs.expect("validated"),
        family: family.expect("validated"),
        grids: grids.expect("validated"),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSetup {
    pub coeffs: Coefficients,
    pub params: KernelParams,
    pub omegas: Vec<f64>,
    pub x: f64,
    pub plots: bool,
}

pub fn probe_setup(config: &RunConfig, strict_q: bool) -> Result<ProbeSetup, CliError> {
    let mut problems = Problems::default();
    let coeffs = coefficients(&mut problems, config);
    if let Some(c) = coeffs {
        if !(c.mu() > 0.0) {
            problems.push(format!("mu = b^2/4 - c = {} must be positive for the probe", c.mu()));
        }
    }
    let params = kernel(&mut problems, config, strict(config, strict_q));
    let omegas = problems.require(config.omega_grid.as_ref(), "omega_grid").cloned();
    if let Some(list) = &omegas {
        if list.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            problems.push("`omega_grid` entries must be finite and non-negative");
        }
    }
    let x = config.probe_x.or(config.y).unwrap_or(1.0);
    if !(x > 0.0 && x.is_finite()) {
        problems.push(format!("`probe_x` must be positive, got {x}"));
    }
    problems.finish(|| ProbeSetup {
        coeffs: coeffs.expect("validated"),
        params: params.expect("validated"),
        omegas: omegas.expect("validated"),
        x,
        plots: config.plots.unwrap_or(true),
    })
}
