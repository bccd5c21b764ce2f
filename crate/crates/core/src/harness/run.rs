use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use serde_json::{json, Value};

use super::config::{ExperimentConfig, ExperimentKind, PanelConfig};
use super::output::{fmt_f64, OutputSink, RunManifest, Taint};
use super::validation::{
    bessel_checks, bessel_reference_params, chebyshev_checks, dispersion_checks, dispersion_table,
    eigensolver_checks, mode_checks, CheckRow, DispersionTable,
};
use super::HarnessError;
use crate::crystal::build_hamiltonian;
use crate::dynamics::{
    propagate_with, single_site_state, two_site_phase_state, ObservableSeries, Propagation, PropagationMethod,
    PropagationOptions, SiteWindow, LEAKAGE_THRESHOLD,
};
use crate::dynamics::state::NORM_TOLERANCE;

/// Clean runs have no taints; tainted runs completed but breached a
/// tolerance that matters for the results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Clean,
    Tainted,
}

impl RunStatus {
    pub fn exit_code(self) -> u8 {
        match self {
            RunStatus::Clean => 0,
            RunStatus::Tainted => 2,
        }
    }
}

struct Run {
    sink: OutputSink,
    taints: Vec<Taint>,
    metrics: BTreeMap<String, BTreeMap<String, Value>>,
    checks: Vec<CheckRow>,
    tolerances: BTreeMap<String, f64>,
}

impl Run {
    fn taint(&mut self, kind: &str, detail: String) {
        self.taints.push(Taint { kind: kind.to_string(), detail });
    }

    fn metric(&mut self, group: &str, key: &str, value: Value) {
        self.metrics.entry(group.to_string()).or_default().insert(key.to_string(), value);
    }

    fn add_checks(&mut self, rows: Vec<CheckRow>) {
        for r in rows.iter().filter(|r| !r.passed) {
            self.taints.push(Taint {
                kind: "check_failed".into(),
                detail: format!("{} [{}]: {:e} vs threshold {:e}", r.check, r.subject, r.value, r.threshold),
            });
        }
        self.checks.extend(rows);
    }
}

/// Runs an experiment into `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(RunManifest, RunStatus), HarnessError> {
    run_experiment_in(cfg, &cfg.output_dir)
}

pub fn run_experiment_in(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(RunManifest, RunStatus), HarnessError> {
    let started = chrono::Utc::now();
    let clock = Instant::now();
    let mut run = Run {
        sink: OutputSink::create(out_dir)?,
        taints: Vec::new(),
        metrics: BTreeMap::new(),
        checks: Vec::new(),
        tolerances: BTreeMap::new(),
    };
    let mut echo = cfg.clone();
    echo.output_dir = out_dir.to_path_buf();
    run.sink.write_bytes("config.json", format!("{}\n", echo.to_json()).as_bytes())?;

    match cfg.experiment {
        ExperimentKind::Fig2Dispersion => fig2(cfg, &mut run)?,
        ExperimentKind::Fig3SingleSite | ExperimentKind::Fig4Ratchet => panels(cfg, &mut run)?,
        ExperimentKind::SpectrumCompare => spectrum_compare(cfg, &mut run)?,
        ExperimentKind::ModeValidate => mode_validate(cfg, &mut run)?,
    }

    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: cfg.experiment.name().to_string(),
        config: echo,
        started_at: started.to_rfc3339(),
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
        tolerances: run.tolerances,
        taints: run.taints,
        metrics: run.metrics,
        checks: run.checks,
        files: run.sink.files().to_vec(),
    };
    let path = out_dir.join("manifest.json");
    let mut data = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    data.push(b'\n');
    std::fs::write(&path, data).map_err(|e| HarnessError::io(&path, e))?;
    let status = if manifest.is_tainted() { RunStatus::Tainted } else { RunStatus::Clean };
    Ok((manifest, status))
}

fn write_dispersion(run: &mut Run, table: &DispersionTable) -> Result<(), HarnessError> {
    let header: Vec<String> = ["q", "rwa_exact", "perturb_zeroth", "perturb_second", "numerical_oracle"]
        .map(String::from)
        .to_vec();
    let rows: Vec<Vec<String>> = (0..table.oracle.values.len())
        .map(|q| {
            vec![
                q.to_string(),
                fmt_f64(table.rwa.values[q]),
                fmt_f64(table.zeroth.values[q]),
                fmt_f64(table.second.values[q]),
                fmt_f64(table.oracle.values[q]),
            ]
        })
        .collect();
    run.sink.write_csv("dispersion.csv", &header, &rows)
}

fn dispersion_metrics(run: &mut Run, table: &DispersionTable) {
    let max_rwa = (0..table.oracle.values.len())
        .map(|q| (table.rwa.values[q] - table.oracle.values[q]).abs())
        .fold(0.0, f64::max);
    let improved = (0..table.oracle.values.len())
        .filter(|&q| {
            (table.second.values[q] - table.oracle.values[q]).abs()
                < (table.zeroth.values[q] - table.oracle.values[q]).abs()
        })
        .count();
    run.metric("dispersion", "max_rwa_oracle_difference", json!(max_rwa));
    run.metric("dispersion", "modes_improved_by_second_order", json!(improved));
    run.metric("dispersion", "modes", json!(table.oracle.values.len()));
}

fn fig2(cfg: &ExperimentConfig, run: &mut Run) -> Result<(), HarnessError> {
    let params = cfg.params.expect("validated");
    let table = dispersion_table(&params, cfg.mode_count)?;
    write_dispersion(run, &table)?;
    dispersion_metrics(run, &table);
    run.tolerances.insert("rwa_pairing".into(), super::validation::RWA_PAIRING_TOLERANCE);
    run.add_checks(dispersion_checks(&params, &table));
    Ok(())
}

fn write_validation(run: &mut Run) -> Result<(), HarnessError> {
    let header: Vec<String> = ["check", "subject", "value", "threshold", "passed"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = run
        .checks
        .iter()
        .map(|r| {
            vec![r.check.clone(), r.subject.clone(), fmt_f64(r.value), fmt_f64(r.threshold), r.passed.to_string()]
        })
        .collect();
    run.sink.write_csv("validation.csv", &header, &rows)
}

fn spectrum_compare(cfg: &ExperimentConfig, run: &mut Run) -> Result<(), HarnessError> {
    let params = cfg.params.expect("validated");
    let table = dispersion_table(&params, cfg.mode_count)?;
    write_dispersion(run, &table)?;
    dispersion_metrics(run, &table);
    run.add_checks(dispersion_checks(&params, &table));
    run.add_checks(eigensolver_checks(&params)?);
    if params.coupling > 0.0 {
        let lam = params.coupling;
        run.add_checks(chebyshev_checks(lam, &[-1.5 * lam, 0.0, 0.7 * lam, 1.99 * lam], 400)?);
    }
    run.tolerances.insert("rwa_pairing".into(), super::validation::RWA_PAIRING_TOLERANCE);
    run.tolerances.insert("eigen_residual_relative".into(), crate::spectrum::RESIDUAL_TOLERANCE);
    write_validation(run)
}

fn mode_validate(cfg: &ExperimentConfig, run: &mut Run) -> Result<(), HarnessError> {
    let params = cfg.params.expect("validated");
    let (rows, converged) = mode_checks(&params, cfg.mode_count, cfg.depth, cfg.tolerance)?;
    if !converged {
        run.taint("non_convergence", "a continued fraction reached its depth cap without converging".into());
    }
    run.add_checks(rows);
    run.add_checks(bessel_checks(&bessel_reference_params(), 10.0)?);
    run.add_checks(chebyshev_checks(1.0, &[-1.5, 0.0, 0.7, 1.99], 400)?);
    run.tolerances.insert("mode_overlap".into(), super::validation::MODE_OVERLAP_TOLERANCE);
    run.tolerances.insert("bessel_agreement".into(), super::validation::BESSEL_AGREEMENT_TOLERANCE);
    run.tolerances.insert("continued_fraction".into(), cfg.tolerance);
    write_validation(run)
}

fn propagate_panel(cfg: &ExperimentConfig, panel: &PanelConfig) -> Result<Propagation, HarnessError> {
    let op = build_hamiltonian(&panel.params)?;
    let n = panel.params.n_sites;
    let initial = match panel.phase {
        Some(phi) => two_site_phase_state(n, panel.input_site, phi)?,
        None => single_site_state(n, panel.input_site)?,
    };
    let options = PropagationOptions {
        method: cfg.method,
        window: SiteWindow::Range { start: panel.window.start, end: panel.window.end },
        keep_snapshots: false,
        step_tolerance: cfg.step_tolerance,
    };
    Ok(propagate_with(&op, &initial, &panel.time_grid.times(), &options)?)
}

/// Summary numbers of one propagation run.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelSummary {
    pub first_minimum: Option<(f64, f64)>,
    pub first_revival: Option<(f64, f64)>,
    pub max_return_after_half: f64,
    pub max_fidelity_after_half: f64,
    pub max_outside_input_pair: f64,
    pub center_of_mass_initial: f64,
    /// Closest output time to one Bloch period `2π/ω_f`, with fidelity and
    /// centre of mass there.
    pub at_period: Option<(f64, f64, f64)>,
    /// Largest fidelity for `π/ω_f ≤ t ≤ 4π/ω_f`.
    pub max_fidelity_revival_window: Option<f64>,
    pub max_fidelity_after_start: f64,
    /// Largest per-site mismatch between the intensities at the output time
    /// closest to half a Bloch period and their mirror image about the
    /// initial centre of mass.
    pub half_period_asymmetry: Option<f64>,
}

fn closest_index(times: &[f64], target: f64) -> Option<usize> {
    let i = (0..times.len()).min_by(|&a, &b| (times[a] - target).abs().total_cmp(&(times[b] - target).abs()))?;
    // Only trust it when the grid actually resolves the target.
    let spacing = if times.len() > 1 { (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64 } else { 0.0 };
    ((times[i] - target).abs() <= spacing.max(1e-12)).then_some(i)
}

pub fn summarize(series: &ObservableSeries, panel: &PanelConfig) -> PanelSummary {
    let t = &series.times;
    let k = panel.input_site;
    let i_k: Vec<f64> = series
        .site_intensity(k)
        .unwrap_or_else(|_| t.iter().zip(&series.fidelity).map(|(_, f)| *f).collect());
    let mut first_minimum = None;
    let mut first_revival = None;
    for i in 1..t.len().saturating_sub(1) {
        if first_minimum.is_none() {
            if i_k[i] <= i_k[i - 1] && i_k[i] < i_k[i + 1] {
                first_minimum = Some((t[i], i_k[i]));
            }
        } else if series.fidelity[i] >= series.fidelity[i - 1] && series.fidelity[i] > series.fidelity[i + 1] {
            first_revival = Some((t[i], series.fidelity[i]));
            break;
        }
    }
    let after = |v: &[f64], from: f64| {
        t.iter().zip(v).filter(|(&s, _)| s > from).map(|(_, &x)| x).fold(0.0, f64::max)
    };
    let pair_end = (k + 2).min(series.window.1);
    let outside: Vec<f64> = (0..t.len())
        .map(|i| {
            let inside: f64 = (k.max(series.window.0)..pair_end).map(|j| series.intensities[i][j - series.window.0]).sum();
            series.norm[i] - inside
        })
        .collect();
    let omega_f = panel.params.omega_f;
    let period = if omega_f > 0.0 { 2.0 * PI / omega_f } else { f64::INFINITY };
    let x0 = series.center_of_mass.first().copied().unwrap_or(f64::NAN);
    let at_period = period
        .is_finite()
        .then(|| closest_index(t, period))
        .flatten()
        .map(|i| (t[i], series.fidelity[i], series.center_of_mass[i]));
    let max_fidelity_revival_window = period.is_finite().then(|| {
        t.iter()
            .zip(&series.fidelity)
            .filter(|(&s, _)| s >= 0.5 * period && s <= 2.0 * period)
            .map(|(_, &f)| f)
            .fold(0.0, f64::max)
    });
    let half_period_asymmetry = period
        .is_finite()
        .then(|| closest_index(t, 0.5 * period))
        .flatten()
        .map(|i| {
            let (lo, hi) = series.window;
            let row = &series.intensities[i];
            let mut worst = 0.0_f64;
            for j in lo..hi {
                let mirror = 2.0 * x0 - j as f64;
                let m = mirror.round();
                if (mirror - m).abs() < 1e-9 && m >= lo as f64 && m < hi as f64 {
                    worst = worst.max((row[j - lo] - row[m as usize - lo]).abs());
                }
            }
            worst
        });
    PanelSummary {
        first_minimum,
        first_revival,
        max_return_after_half: after(&i_k, 0.5),
        max_fidelity_after_half: after(&series.fidelity, 0.5),
        max_outside_input_pair: outside.iter().cloned().fold(0.0, f64::max),
        center_of_mass_initial: x0,
        at_period,
        max_fidelity_revival_window,
        max_fidelity_after_start: after(&series.fidelity, t.first().copied().unwrap_or(0.0)),
        half_period_asymmetry,
    }
}

fn write_series(run: &mut Run, prefix: &str, series: &ObservableSeries, input_site: usize) -> Result<(), HarnessError> {
    let header: Vec<String> = ["time", "fidelity", "center_of_mass", "norm", "boundary_leakage", "return_intensity"]
        .map(String::from)
        .to_vec();
    let ret = series.site_intensity(input_site).ok();
    let rows: Vec<Vec<String>> = (0..series.times.len())
        .map(|i| {
            vec![
                fmt_f64(series.times[i]),
                fmt_f64(series.fidelity[i]),
                fmt_f64(series.center_of_mass[i]),
                fmt_f64(series.norm[i]),
                fmt_f64(series.boundary_leakage[i]),
                ret.as_ref().map_or_else(String::new, |r| fmt_f64(r[i])),
            ]
        })
        .collect();
    run.sink.write_csv(&format!("{prefix}/observables.csv"), &header, &rows)?;

    let mut header = vec!["time".to_string()];
    header.extend((series.window.0..series.window.1).map(|j| format!("site_{j}")));
    let rows: Vec<Vec<String>> = series
        .times
        .iter()
        .zip(&series.intensities)
        .map(|(t, row)| std::iter::once(fmt_f64(*t)).chain(row.iter().map(|x| fmt_f64(*x))).collect())
        .collect();
    run.sink.write_csv(&format!("{prefix}/intensity_window.csv"), &header, &rows)
}

fn opt_pair(v: Option<(f64, f64)>) -> Value {
    v.map_or(Value::Null, |(t, x)| json!({ "time": t, "value": x }))
}

fn panels(cfg: &ExperimentConfig, run: &mut Run) -> Result<(), HarnessError> {
    let mut summaries = BTreeMap::new();
    for panel in &cfg.panels {
        let prop = propagate_panel(cfg, panel)?;
        let series = &prop.series;
        write_series(run, &panel.name, series, panel.input_site)?;
        let s = summarize(series, panel);
        let g = panel.name.as_str();
        run.metric(g, "method", json!(prop.method));
        run.metric(g, "max_boundary_leakage", json!(series.max_leakage()));
        run.metric(g, "max_norm_drift", json!(series.max_norm_drift()));
        run.metric(g, "center_of_mass_initial", json!(s.center_of_mass_initial));
        run.metric(g, "first_minimum", opt_pair(s.first_minimum));
        run.metric(g, "first_revival", opt_pair(s.first_revival));
        run.metric(g, "max_return_intensity_after_0_5", json!(s.max_return_after_half));
        run.metric(g, "max_fidelity_after_0_5", json!(s.max_fidelity_after_half));
        run.metric(g, "max_intensity_outside_input_pair", json!(s.max_outside_input_pair));
        run.metric(g, "max_fidelity_after_start", json!(s.max_fidelity_after_start));
        run.metric(
            g,
            "at_bloch_period",
            s.at_period.map_or(Value::Null, |(t, f, x)| json!({ "time": t, "fidelity": f, "center_of_mass": x })),
        );
        run.metric(g, "max_fidelity_revival_window", json!(s.max_fidelity_revival_window));
        run.metric(g, "half_period_asymmetry", json!(s.half_period_asymmetry));
        if series.leakage_tainted() {
            run.taint("boundary_leakage", format!("{g}: {:e} exceeds {LEAKAGE_THRESHOLD:e}", series.max_leakage()));
        }
        let drift_limit = match prop.method {
            PropagationMethod::SpectralExact => 1e-9,
            PropagationMethod::SteppedIntegrator => NORM_TOLERANCE,
        };
        if series.max_norm_drift() > drift_limit {
            run.taint("norm_drift", format!("{g}: {:e} exceeds {drift_limit:e}", series.max_norm_drift()));
        }
        summaries.insert(panel.name.clone(), (panel.clone(), s));
    }
    run.tolerances.insert("boundary_leakage".into(), LEAKAGE_THRESHOLD);
    run.tolerances.insert("step_tolerance".into(), cfg.step_tolerance);
    run.tolerances.insert("norm_drift_spectral".into(), 1e-9);
    run.tolerances.insert("norm_drift_stepped".into(), NORM_TOLERANCE);
    let checks = match cfg.experiment {
        ExperimentKind::Fig3SingleSite => fig3_checks(&summaries),
        _ => fig4_checks(&summaries),
    };
    run.add_checks(checks);
    Ok(())
}

/// Thresholds for the strong-coupling panel, frozen after calibration.
pub const STRONG_MAX_RETURN: f64 = 0.9;
pub const STRONG_MAX_FIDELITY: f64 = 0.95;

fn fig3_checks(summaries: &BTreeMap<String, (PanelConfig, PanelSummary)>) -> Vec<CheckRow> {
    let mut rows = Vec::new();
    if let Some((p, s)) = summaries.get("weak") {
        let lam = p.params.coupling;
        if lam > 0.0 {
            let (t_min, v_min) = s.first_minimum.unwrap_or((f64::INFINITY, f64::INFINITY));
            let (t_rev, v_rev) = s.first_revival.unwrap_or((f64::INFINITY, 0.0));
            let t_min_ref = PI / (2.0 * lam);
            let t_rev_ref = PI / lam;
            rows.push(CheckRow::below("first_minimum_depth", "weak", v_min, 0.05));
            rows.push(CheckRow::below("first_minimum_time", "weak", (t_min - t_min_ref).abs() / t_min_ref, 0.02));
            rows.push(CheckRow::above("first_revival_height", "weak", v_rev, 0.95));
            rows.push(CheckRow::below("first_revival_time", "weak", (t_rev - t_rev_ref).abs() / t_rev_ref, 0.02));
            rows.push(CheckRow::below("two_state_confinement", "weak", s.max_outside_input_pair, 0.05));
        }
    }
    if let Some((_, s)) = summaries.get("strong") {
        rows.push(CheckRow::below("partial_reconstruction", "strong", s.max_return_after_half, STRONG_MAX_RETURN));
        rows.push(CheckRow::below("fidelity_bounded", "strong", s.max_fidelity_after_half, STRONG_MAX_FIDELITY));
    }
    rows
}

fn fig4_checks(summaries: &BTreeMap<String, (PanelConfig, PanelSummary)>) -> Vec<CheckRow> {
    let mut rows = Vec::new();
    let mut revival = None;
    if let Some((p, s)) = summaries.get("omega0_zero") {
        let expected = p.input_site as f64 + if p.phase.is_some() { 0.5 } else { 0.0 };
        rows.push(CheckRow::below(
            "initial_center_of_mass",
            "omega0_zero",
            (s.center_of_mass_initial - expected).abs(),
            1e-12,
        ));
        if let Some((_, f, x)) = s.at_period {
            revival = Some(f);
            rows.push(CheckRow::above("bloch_revival", "omega0_zero", f, 0.99));
            rows.push(CheckRow::below(
                "center_of_mass_return",
                "omega0_zero",
                (x - s.center_of_mass_initial).abs(),
                0.05,
            ));
        }
    }
    if let Some((_, s)) = summaries.get("omega0_resonant") {
        if let (Some(r), Some(m)) = (revival, s.max_fidelity_revival_window) {
            rows.push(CheckRow::above("reconstruction_gap", "omega0_resonant", r - m, 0.05));
        }
        if let Some(a) = s.half_period_asymmetry {
            rows.push(CheckRow::above("ratchet_asymmetry", "omega0_resonant", a, 1e-2));
        }
    }
    rows
}
