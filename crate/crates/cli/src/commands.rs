//! The five subcommands. Each validates its whole configuration before any
//! numerical work and writes its artifacts into the output directory.

use std::path::{Path, PathBuf};

use cauchy_core::kernel::{class_c_diagnostic, mollify, KernelParams, DEFAULT_TAIL_THRESHOLD};
use cauchy_core::oracle::{
    add_white_noise, amplification_probe, manufacture_problem, mollified_reference, mollify_series,
    pde_residual, source_field,
};
use cauchy_core::kernel::kernel_multiplier;
use cauchy_core::solver::{
    damp_field, exp_shift_precondition, reconstruct_from_spectra, stability_functional, undamp_field,
    w_norm, w_norm_terms, BoundaryData, BoundarySpectra, Coefficients, Component, Mode,
    ReconstructOptions, Reconstruction, SolutionField, StabilityFunctional,
};
use cauchy_core::spectral::{l2_norm, relative_l2, TimeSeries};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{
    manufacture_setup, mollify_setup, probe_setup, solve_setup, study_setup, DataSource, RunConfig,
    SolveSetup,
};
use crate::data;
use crate::svg::{LineChart, Series};
use crate::CliError;

/// Number of `u(x_i, ·)` slices drawn in the solve plot.
const PLOTTED_SLICES: usize = 5;

pub struct Invocation {
    pub config: RunConfig,
    pub out: Option<PathBuf>,
    pub strict_q: bool,
}

impl Invocation {
    /// Resolves the output directory and merges a missing one into `setup`'s errors.
    fn validated<T>(&self, setup: Result<T, CliError>) -> Result<(T, PathBuf), CliError> {
        let out = self.out.clone().or_else(|| self.config.output_dir.clone());
        match (setup, out) {
            (Ok(setup), Some(out)) => Ok((setup, out)),
            (Err(CliError::Config(mut list)), None) => {
                list.push(MISSING_OUT.into());
                Err(CliError::Config(list))
            }
            (Err(e), _) => Err(e),
            (Ok(_), None) => Err(CliError::Config(vec![MISSING_OUT.into()])),
        }
    }
}

const MISSING_OUT: &str = "no output directory: pass --out or set `output_dir`";

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write_manifest(dir: &Path, manifest: &Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(manifest).expect("json values serialize");
    write_text(&dir.join("manifest.json"), &(text + "\n"))
}

fn tool() -> Value {
    json!({ "name": env!("CARGO_PKG_NAME"), "version": env!("CARGO_PKG_VERSION") })
}

fn coefficients_json(c: &Coefficients) -> Value {
    json!({ "a": c.a, "b": c.b, "c": c.c, "mu": c.mu() })
}

fn kernel_json(p: &KernelParams) -> Value {
    json!({ "alpha": p.alpha, "beta": p.beta, "q": p.q, "decay_margin": p.decay_margin() })
}

/// Boundary data as handed to the solver, plus what is known about the truth.
struct Prepared {
    /// Coefficients of the problem actually solved (after any shift).
    coeffs: Coefficients,
    data: BoundaryData,
    /// `g0` before noise, in the solved frame.
    clean_g0: TimeSeries,
    spectra: BoundarySpectra,
    x_grid: Vec<f64>,
    /// Exact field in the solved frame, for manufactured problems.
    truth: Option<SolutionField>,
    source_description: Value,
}

fn x_grid(depth: f64, dx: f64) -> Vec<f64> {
    let cells = (depth / dx).round() as usize;
    (0..=cells).map(|k| k as f64 * dx).collect()
}

fn prepare(setup: &SolveSetup) -> Result<Prepared, CliError> {
    let (clean, truth, x_grid, source_description) = match &setup.data {
        DataSource::Manufactured { family, grids } => {
            let problem = manufacture_problem(*family, &setup.coeffs, grids)?;
            let description = json!({ "family": family, "ds": grids.ds });
            let x_grid = problem.exact.x_grid.clone();
            (problem.data, Some(problem.exact), x_grid, description)
        }
        DataSource::Files { g0, g1, source, dx, depth } => {
            let data = data::load_boundary(g0, g1, source.as_deref())?;
            if let Some(available) = data.depth() {
                if *depth > available * (1.0 + 1e-9) {
                    return Err(CliError::Input(format!(
                        "y = {depth} exceeds the source depth {available}"
                    )));
                }
            }
            let description = json!({
                "g0": g0.display().to_string(),
                "g1": g1.display().to_string(),
                "f": source.as_ref().map(|p| p.display().to_string()),
                "ds": data.depth().map(|_| data.ds),
            });
            (data, None, x_grid(*depth, *dx), description)
        }
    };

    let mut noisy = clean.clone();
    if setup.noise_level > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
        noisy.g0 = add_white_noise(&clean.g0, setup.noise_level, &mut rng);
        noisy.g1 = add_white_noise(&clean.g1, setup.noise_level, &mut rng);
    }

    let (coeffs, data, clean_g0, truth) = match setup.shift {
        Some(shift) => {
            let (coeffs, data) = exp_shift_precondition(&setup.coeffs, &noisy, shift)?;
            let (_, clean) = exp_shift_precondition(&setup.coeffs, &clean, shift)?;
            (coeffs, data, clean.g0, truth.map(|t| damp_field(&t, shift)))
        }
        None => (setup.coeffs, noisy, clean.g0, truth),
    };
    let spectra = BoundarySpectra::from_data(&data)?;
    Ok(Prepared {
        coeffs,
        data,
        clean_g0,
        spectra,
        x_grid,
        truth,
        source_description,
    })
}

/// Relative errors per component against the mollified reference and the truth.
struct Errors {
    reference: [f64; 4],
    truth: [f64; 4],
}

struct Outcome {
    reconstruction: Reconstruction,
    stability: StabilityFunctional,
    w_norm: f64,
    errors: Option<Errors>,
    residual: f64,
    data_error: f64,
}

impl Outcome {
    fn stability_ratio(&self) -> Option<f64> {
        let ratio = self.w_norm / self.stability.value;
        (ratio.is_finite() && self.stability.value > 0.0).then_some(ratio)
    }
}

fn component_errors(field: &SolutionField, reference: &SolutionField) -> [f64; 4] {
    Component::ALL.map(|c| {
        relative_l2(
            field.component(c).as_slice().expect("standard layout"),
            reference.component(c).as_slice().expect("standard layout"),
        )
    })
}

fn reconstruct(setup: &SolveSetup, prepared: &Prepared, params: &KernelParams) -> Result<Outcome, CliError> {
    let spectra = match setup.mode {
        Mode::Raw => prepared.spectra.clone(),
        Mode::Premollified => prepared.spectra.mollified(params),
    };
    let options = ReconstructOptions {
        max_gain: setup.max_gain,
        ..ReconstructOptions::new(setup.mode)
    };
    let reconstruction =
        reconstruct_from_spectra(&spectra, &prepared.coeffs, params, &prepared.x_grid, &options)?;
    if reconstruction.diagnostics.max_asymmetry() > cauchy_core::spectral::DEFAULT_ASYMMETRY_WARNING {
        return Err(CliError::Invariant(format!(
            "reconstructed spectra are not Hermitian (relative asymmetry {:.3e})",
            reconstruction.diagnostics.max_asymmetry()
        )));
    }
    let field = &reconstruction.field;
    let mollifier = (setup.mode == Mode::Premollified).then_some(params);
    let errors = prepared.truth.as_ref().map(|truth| {
        let reference = match mollifier {
            Some(p) => mollified_reference(truth, p),
            None => truth.clone(),
        };
        Errors {
            reference: component_errors(field, &reference),
            truth: component_errors(field, truth),
        }
    });
    let source = source_field(&prepared.data, &prepared.x_grid, mollifier);
    let multiplier = kernel_multiplier(&prepared.data.grid(), params);
    let data_error = relative_l2(
        &mollify_series(&prepared.data.g0, &multiplier),
        prepared.clean_g0.values(),
    );
    Ok(Outcome {
        stability: stability_functional(&spectra, params),
        w_norm: w_norm(field),
        residual: pde_residual(field, &source, &prepared.coeffs),
        errors,
        data_error,
        reconstruction,
    })
}

fn named(values: [f64; 4]) -> Value {
    let mut map = serde_json::Map::new();
    for (c, v) in Component::ALL.iter().zip(values) {
        map.insert(c.name().into(), json!(v));
    }
    Value::Object(map)
}

fn outcome_json(outcome: &Outcome) -> Value {
    json!({
        "diagnostics": outcome.reconstruction.diagnostics,
        "w_norm": outcome.w_norm,
        "stability_functional": outcome.stability,
        "stability_ratio": outcome.stability_ratio(),
        "pde_residual": outcome.residual,
        "data_error": outcome.data_error,
        "error_vs_reference": outcome.errors.as_ref().map(|e| named(e.reference)),
        "error_vs_truth": outcome.errors.as_ref().map(|e| named(e.truth)),
    })
}

fn setup_json(setup: &SolveSetup, prepared: &Prepared) -> Value {
    let grid = prepared.data.grid();
    json!({
        "tool": tool(),
        "experiment": setup.experiment,
        "coefficients": coefficients_json(&setup.coeffs),
        "solved_coefficients": coefficients_json(&prepared.coeffs),
        "kernel": kernel_json(&setup.params),
        "strict_q": setup.strict_q,
        "grids": {
            "dt": grid.dt(),
            "n": grid.n(),
            "horizon": grid.horizon(),
            "x": prepared.x_grid,
            "output_t_max": setup.output_t_max,
        },
        "mode": setup.mode,
        "shift": setup.shift,
        "output_kernel_beta": setup.params.beta - setup.shift.unwrap_or(0.0),
        "undamping_factor": setup.shift.zip(setup.output_t_max).map(|(s, t)| (s * t).exp()),
        "max_gain": setup.max_gain,
        "noise": { "level": setup.noise_level, "seed": setup.seed, "applied_to": ["g0", "g1"] },
        "data": prepared.source_description,
    })
}

fn slices_chart(field: &SolutionField, t_max: Option<f64>) -> LineChart {
    let times = field.t_grid.times();
    let columns = times
        .iter()
        .take_while(|t| t_max.is_none_or(|m| **t <= m))
        .count();
    let rows = field.x_grid.len();
    let picks: Vec<usize> = if rows <= PLOTTED_SLICES {
        (0..rows).collect()
    } else {
        (0..PLOTTED_SLICES).map(|k| k * (rows - 1) / (PLOTTED_SLICES - 1)).collect()
    };
    LineChart {
        title: "u(x, t) slices".into(),
        x_label: "t".into(),
        y_label: "u".into(),
        series: picks
            .into_iter()
            .map(|r| Series {
                label: format!("x = {}", field.x_grid[r]),
                points: times[..columns].iter().copied().zip(field.u.row(r).iter().copied()).collect(),
            })
            .collect(),
    }
}

fn stability_chart(field: &SolutionField) -> LineChart {
    let terms = w_norm_terms(field);
    LineChart {
        title: "L2-in-time norms of the reconstructed components".into(),
        x_label: "x".into(),
        y_label: "norm".into(),
        series: Component::ALL
            .iter()
            .enumerate()
            .map(|(c, component)| Series {
                label: component.name().into(),
                points: field.x_grid.iter().zip(&terms).map(|(x, t)| (*x, t[c])).collect(),
            })
            .collect(),
    }
}

pub fn run_solve(invocation: &Invocation) -> Result<(), CliError> {
    let (setup, out) = invocation.validated(solve_setup(&invocation.config, invocation.strict_q))?;
    prepare_dir(&out)?;
    let prepared = prepare(&setup)?;
    let outcome = reconstruct(&setup, &prepared, &setup.params)?;

    let field = match setup.shift {
        Some(shift) => undamp_field(&outcome.reconstruction.field, shift),
        None => outcome.reconstruction.field.clone(),
    };
    data::write_field(&out, &field, setup.output_t_max)?;

    let mut manifest = setup_json(&setup, &prepared);
    manifest["command"] = json!("solve");
    manifest["result"] = outcome_json(&outcome);
    manifest["errors_frame"] = json!(if setup.shift.is_some() { "shifted" } else { "original" });
    write_manifest(&out, &manifest)?;

    if setup.plots {
        write_text(&out.join("u_slices.svg"), &slices_chart(&field, setup.output_t_max).render())?;
        write_text(
            &out.join("stability.svg"),
            &stability_chart(&outcome.reconstruction.field).render(),
        )?;
    }
    log::info!("wrote solution bundle to {}", out.display());
    Ok(())
}

fn csv_value(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// One `alpha-study` row; errors are relative L2 of `u` (or `g0` for data).
struct StudyRow {
    alpha: f64,
    data_error: Option<f64>,
    reconstruction_error: Option<f64>,
    truth_error: Option<f64>,
    stability_ratio: Option<f64>,
    status: String,
}

pub fn run_alpha_study(invocation: &Invocation) -> Result<(), CliError> {
    let (study, out) = invocation.validated(study_setup(&invocation.config, invocation.strict_q))?;
    prepare_dir(&out)?;
    let setup = &study.solve;
    let prepared = prepare(setup)?;

    let rows: Vec<StudyRow> = study
        .alphas
        .iter()
        .map(|&alpha| match reconstruct(setup, &prepared, &setup.params.with_alpha(alpha)) {
            Ok(outcome) => {
                let errors = outcome.errors.as_ref().expect("study runs on manufactured data");
                StudyRow {
                    alpha,
                    data_error: Some(outcome.data_error),
                    reconstruction_error: Some(errors.reference[0]),
                    truth_error: Some(errors.truth[0]),
                    stability_ratio: outcome.stability_ratio(),
                    status: "ok".into(),
                }
            }
            Err(e) => {
                log::warn!("alpha = {alpha}: {e}");
                StudyRow {
                    alpha,
                    data_error: None,
                    reconstruction_error: None,
                    truth_error: None,
                    stability_ratio: None,
                    status: e.to_string().replace([',', '\n'], ";"),
                }
            }
        })
        .collect();

    let mut csv = String::from("alpha,data_error,reconstruction_error,truth_error,stability_ratio,status\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.alpha,
            csv_value(row.data_error),
            csv_value(row.reconstruction_error),
            csv_value(row.truth_error),
            csv_value(row.stability_ratio),
            row.status
        ));
    }
    write_text(&out.join("alpha_study.csv"), &csv)?;

    let best = rows
        .iter()
        .filter_map(|r| r.truth_error.map(|e| (r.alpha, e)))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    let mut manifest = setup_json(setup, &prepared);
    manifest["command"] = json!("alpha-study");
    manifest["alpha_list"] = json!(study.alphas);
    manifest["best_alpha"] = json!(best.map(|(alpha, error)| json!({ "alpha": alpha, "truth_error": error })));
    write_manifest(&out, &manifest)?;

    if setup.plots {
        let curve = |label: &str, pick: fn(&StudyRow) -> Option<f64>| Series {
            label: label.into(),
            points: rows
                .iter()
                .filter_map(|r| pick(r).filter(|v| *v > 0.0).map(|v| (r.alpha.log10(), v.log10())))
                .collect(),
        };
        let chart = LineChart {
            title: "Errors versus regularization".into(),
            x_label: "log10 alpha".into(),
            y_label: "log10 relative error".into(),
            series: vec![
                curve("data", |r| r.data_error),
                curve("vs mollified reference", |r| r.reconstruction_error),
                curve("vs truth", |r| r.truth_error),
            ],
        };
        write_text(&out.join("alpha_study.svg"), &chart.render())?;
    }
    match best {
        Some((alpha, error)) => println!("minimum truth error {error:.6e} at alpha = {alpha}"),
        None => println!("no alpha completed"),
    }
    Ok(())
}

pub fn run_mollify(invocation: &Invocation) -> Result<(), CliError> {
    let (setup, out) = invocation.validated(mollify_setup(&invocation.config, invocation.strict_q))?;
    let input = data::read_series(&setup.input)?;
    prepare_dir(&out)?;
    let smoothed = mollify(&input, &setup.params);
    data::write_series(&out.join("mollified.csv"), &smoothed)?;

    let diagnostic = |v: &TimeSeries| {
        let d = class_c_diagnostic(v, &setup.params, DEFAULT_TAIL_THRESHOLD);
        json!({
            "norm_estimate": d.norm_estimate,
            "tail_fraction": d.tail_fraction,
            "in_class": d.in_class,
            "overflow_omega": d.overflow_omega,
        })
    };
    let grid = input.grid();
    let manifest = json!({
        "tool": tool(),
        "command": "mollify",
        "experiment": invocation.config.experiment,
        "kernel": kernel_json(&setup.params),
        "grids": { "dt": grid.dt(), "n": grid.n() },
        "input": setup.input.display().to_string(),
        "l2_norm": { "input": l2_norm(&input), "mollified": l2_norm(&smoothed) },
        "relative_change": relative_l2(smoothed.values(), input.values()),
        "class_diagnostic": { "input": diagnostic(&input), "mollified": diagnostic(&smoothed) },
    });
    write_manifest(&out, &manifest)?;
    if setup.plots {
        let series = |label: &str, v: &TimeSeries| Series {
            label: label.into(),
            points: grid.times().into_iter().zip(v.values().iter().copied()).collect(),
        };
        let chart = LineChart {
            title: "Mollified series".into(),
            x_label: "t".into(),
            y_label: "value".into(),
            series: vec![series("input", &input), series("mollified", &smoothed)],
        };
        write_text(&out.join("mollified.svg"), &chart.render())?;
    }
    Ok(())
}

pub fn run_manufacture(invocation: &Invocation) -> Result<(), CliError> {
    let (setup, out) = invocation.validated(manufacture_setup(&invocation.config))?;
    prepare_dir(&out)?;
    let problem = manufacture_problem(setup.family, &setup.coeffs, &setup.grids)?;
    data::write_series(&out.join("g0.csv"), &problem.data.g0)?;
    data::write_series(&out.join("g1.csv"), &problem.data.g1)?;
    data::write_source(&out.join("f.csv"), &problem.data)?;
    data::write_long(
        &out.join("u_exact.csv"),
        &problem.exact.x_grid,
        &problem.exact.t_grid,
        &problem.exact.u,
        None,
    )?;
    let grids = &setup.grids;
    let manifest = json!({
        "tool": tool(),
        "command": "manufacture",
        "experiment": invocation.config.experiment,
        "family": setup.family,
        "coefficients": coefficients_json(&setup.coeffs),
        "grids": {
            "dt": grids.time.dt(),
            "n": grids.time.n(),
            "ds": grids.ds,
            "y": grids.depth,
            "dx": grids.dx,
        },
    });
    write_manifest(&out, &manifest)
}

pub fn run_probe(invocation: &Invocation) -> Result<(), CliError> {
    let (setup, out) = invocation.validated(probe_setup(&invocation.config, invocation.strict_q))?;
    prepare_dir(&out)?;
    let gains = setup
        .omegas
        .iter()
        .map(|&w| amplification_probe(w, setup.x, &setup.coeffs, &setup.params))
        .collect::<Result<Vec<_>, _>>()?;
    let mut csv = String::from("omega0,raw_gain_log,regularized_gain_log\n");
    for g in &gains {
        csv.push_str(&format!("{},{},{}\n", g.omega0, g.raw_log_gain, g.regularized_log_gain));
    }
    write_text(&out.join("probe.csv"), &csv)?;
    let manifest = json!({
        "tool": tool(),
        "command": "probe",
        "experiment": invocation.config.experiment,
        "coefficients": coefficients_json(&setup.coeffs),
        "kernel": kernel_json(&setup.params),
        "x": setup.x,
        "points": gains.len(),
    });
    write_manifest(&out, &manifest)?;
    if setup.plots {
        let series = |label: &str, pick: fn(&cauchy_core::oracle::Amplification) -> f64| Series {
            label: label.into(),
            points: gains.iter().map(|g| (g.omega0, pick(g))).collect(),
        };
        let chart = LineChart {
            title: format!("Mode gains at x = {}", setup.x),
            x_label: "omega".into(),
            y_label: "ln gain".into(),
            series: vec![
                series("raw", |g| g.raw_log_gain),
                series("regularized", |g| g.regularized_log_gain),
            ],
        };
        write_text(&out.join("probe.svg"), &chart.render())?;
    }
    Ok(())
}
