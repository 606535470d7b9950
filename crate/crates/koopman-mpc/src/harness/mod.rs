//! Scenario execution: data generation, inline fitting, the offset-free MPC
//! closed loop, scenario comparison and benchmark suites.
//!
//! `run_closed_loop` executes the receding-horizon loop against the sampled
//! ground truth: measure, update the reference (solving the steady-state
//! problem in unknown-equilibrium mode), solve the OCP, actuate, update the
//! disturbance observer. Standard (non-offset-free) mode skips the observer
//! and reference updates and holds the disturbance at zero.

pub mod data;
pub mod scenario;
pub mod suites;
pub mod trace;

use nalgebra::DVector;
use std::fmt::Write as _;
use std::path::Path;

use crate::edmd::SurrogateModel;
use crate::error::{Error, Result};
use crate::mpc::{MpcController, PropagationMode};
use crate::observer::{Observer, ObserverSpace};
use crate::refcalc::{solve_reference, RefCalcOptions, ReferencePair};

pub use data::{fit_model, generate_datasets, GeneratedData};
pub use scenario::{
    ControllerMode, EquilibriumMode, ModelKind, Scenario, SystemConfig, SystemKind,
};
pub use trace::{ClosedLoopTrace, PhaseStamps, StepRecord};

/// Fit the scenario's model from its data spec, then run the closed loop.
pub fn run_closed_loop(scenario: &Scenario) -> Result<ClosedLoopTrace> {
    let (model, resamples) = data::fit_model(scenario)?;
    let mut trace = run_closed_loop_with_model(scenario, &model)?;
    trace.resamples = resamples;
    Ok(trace)
}

/// Run the closed loop with a prefitted surrogate.
pub fn run_closed_loop_with_model(
    scenario: &Scenario,
    model: &SurrogateModel,
) -> Result<ClosedLoopTrace> {
    scenario.validate()?;
    let (n, m) = scenario.system.dims();
    if model.state_dim() != n || model.input_dim() != m {
        return Err(Error::Config(format!(
            "model dimensions ({}, {}) do not match the scenario system ({n}, {m})",
            model.state_dim(),
            model.input_dim()
        )));
    }

    let system = scenario.build_system()?;
    let (x_eq, u_eq) = scenario.equilibrium_pair()?;
    let output_map = scenario.output_map()?;
    let y_target = scenario.y_target()?;
    let mode = scenario.propagation_mode();
    let offset_free = scenario.controller.mode == ControllerMode::OffsetFree;
    let ocp_spec = scenario.build_ocp_spec()?;
    let input_lo = DVector::from_column_slice(&scenario.mpc.u_lo);
    let input_hi = DVector::from_column_slice(&scenario.mpc.u_hi);

    // A configured "known" equilibrium should actually be one.
    if scenario.equilibrium.mode == EquilibriumMode::Known {
        if let Ok(next) = system.step(&x_eq, &u_eq) {
            let residual = (next - &x_eq).norm();
            if residual >= 1e-3 {
                eprintln!(
                    "warning: configured equilibrium has fixed-point residual {residual:.3e} \
                     against the ground truth"
                );
            }
        }
    }

    let (obs_space, d_dim) = match mode {
        PropagationMode::Projected => (ObserverSpace::State, n),
        PropagationMode::Lifted => (ObserverSpace::Lifted, model.lifted_dim()),
    };
    let mut observer = Observer::new(obs_space, d_dim);
    let mut controller = MpcController::new(ocp_spec, mode);
    let refcalc_opts = RefCalcOptions::default();
    let mut ref_guess = ReferencePair::guess(x_eq.clone(), u_eq.clone());

    let steps = scenario.sim.steps;
    let mut records: Vec<StepRecord> = Vec::with_capacity(steps);
    let mut x = DVector::from_column_slice(&scenario.sim.x0);
    let mut stamp = 0u64;

    for k in 0..steps {
        // (5) of the previous cycle: fold the new measurement into d_hat.
        if k > 0 {
            if offset_free {
                observer = observer.update(model, &x).map_err(|e| e.at_step(k))?;
            }
            records[k - 1].stamps.observer = stamp;
            stamp += 1;
        }
        let d_hat = if offset_free {
            observer.d_hat().clone()
        } else {
            DVector::zeros(d_dim)
        };

        // (2) reference update.
        let stamp_reference = stamp;
        stamp += 1;
        let (x_ref, u_ref, refcalc_iters) = match (scenario.equilibrium.mode, offset_free) {
            (EquilibriumMode::Known, _) | (EquilibriumMode::Unknown, false) => {
                (x_eq.clone(), u_eq.clone(), None)
            }
            (EquilibriumMode::Unknown, true) => {
                let pair = solve_reference(
                    model,
                    &d_hat,
                    mode,
                    &output_map,
                    &y_target,
                    (&input_lo, &input_hi),
                    None,
                    &ref_guess,
                    &refcalc_opts,
                )
                .map_err(|e| e.at_step(k))?;
                let out = (pair.x_ref.clone(), pair.u_ref.clone(), Some(pair.iterations));
                ref_guess = pair;
                out
            }
        };

        // (3) optimal control problem.
        let stamp_ocp = stamp;
        stamp += 1;
        let (u, solution) = controller
            .step(model, &x, &d_hat, &x_ref, &u_ref)
            .map_err(|e| e.at_step(k))?;

        // (4) actuation.
        let stamp_actuation = stamp;
        stamp += 1;
        if offset_free {
            observer = observer.record(model, &x, &u).map_err(|e| e.at_step(k))?;
        }

        records.push(StepRecord {
            k,
            x: x.clone(),
            u: u.clone(),
            d_hat: d_hat.clone(),
            x_ref: x_ref.clone(),
            u_ref: u_ref.clone(),
            err_state_norm: (&x - &x_ref).norm(),
            err_output_norm: (output_map.eval(&x) - &y_target).norm(),
            ocp_iters: solution.iterations,
            ocp_stationarity: solution.stationarity,
            refcalc_iters,
            stamps: PhaseStamps {
                reference: stamp_reference,
                ocp: stamp_ocp,
                actuation: stamp_actuation,
                observer: u64::MAX,
            },
        });

        x = system.step(&x, &u).map_err(|e| e.at_step(k))?;
    }

    // Close out the final cycle's observer phase with the last measurement.
    if offset_free {
        observer = observer.update(model, &x).map_err(|e| e.at_step(steps))?;
        let _ = observer;
    }
    if let Some(last) = records.last_mut() {
        last.stamps.observer = stamp;
    }

    Ok(ClosedLoopTrace {
        records,
        resamples: 0,
    })
}

/// One labelled closed-loop outcome inside a comparison.
#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub label: String,
    pub trace: ClosedLoopTrace,
}

#[derive(Debug, Clone)]
pub struct ComparisonSummary {
    pub results: Vec<ScenarioResult>,
}

impl ComparisonSummary {
    pub fn get(&self, label: &str) -> Option<&ScenarioResult> {
        self.results.iter().find(|r| r.label == label)
    }

    /// Aligned per-step output-error columns, one per scenario.
    pub fn aligned_csv(&self) -> String {
        let mut out = String::new();
        let mut header = vec!["k".to_string()];
        header.extend(self.results.iter().map(|r| r.label.clone()));
        out.push_str(&header.join(","));
        out.push('\n');
        let steps = self
            .results
            .iter()
            .map(|r| r.trace.len())
            .max()
            .unwrap_or(0);
        for k in 0..steps {
            let mut row = vec![k.to_string()];
            for r in &self.results {
                match r.trace.records.get(k) {
                    Some(rec) => row.push(format!("{:.16e}", rec.err_output_norm)),
                    None => row.push(String::new()),
                }
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Final-error table, one line per scenario.
    pub fn summary_text(&self) -> String {
        let width = self
            .results
            .iter()
            .map(|r| r.label.len())
            .max()
            .unwrap_or(8)
            .max(8);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:width$}  {:>13}  {:>13}  {:>9}",
            "scenario", "final |x-xref|", "final |r-y|", "resamples"
        );
        for r in &self.results {
            let _ = writeln!(
                out,
                "{:width$}  {:>13.6e}  {:>13.6e}  {:>9}",
                r.label,
                r.trace.final_err_state(),
                r.trace.final_err_output(),
                r.trace.resamples
            );
        }
        out
    }
}

/// Sub-configuration that determines a fitted model; scenarios sharing it
/// reuse one fit inside a comparison.
fn fit_key(scenario: &Scenario) -> Result<String> {
    let transform = scenario.build_transform()?;
    let key = (
        &scenario.system,
        &scenario.dictionary,
        &scenario.data,
        scenario.model.kind,
        scenario.model.ridge.to_bits(),
        transform.x_shift.iter().copied().collect::<Vec<_>>(),
        transform.u_shift.iter().copied().collect::<Vec<_>>(),
        transform.u_scale.iter().copied().collect::<Vec<_>>(),
    );
    serde_json::to_string(&key).map_err(|e| Error::Config(e.to_string()))
}

/// Run every scenario (sharing fitted models where the data campaign and
/// model kind coincide) and collect the per-step error columns.
///
/// All scenarios must share the ground-truth system and the initial state.
pub fn compare_scenarios(items: &[(String, Scenario)]) -> Result<ComparisonSummary> {
    if items.is_empty() {
        return Err(Error::Config("no scenarios to compare".into()));
    }
    for (label, sc) in items {
        sc.validate()
            .map_err(|e| Error::Config(format!("scenario {label}: {e}")))?;
    }
    let (first_label, first) = &items[0];
    for (label, sc) in &items[1..] {
        if sc.system != first.system || sc.sim.x0 != first.sim.x0 {
            return Err(Error::Config(format!(
                "scenarios {first_label} and {label} do not share the system and initial state"
            )));
        }
    }

    let mut cache: Vec<(String, SurrogateModel)> = Vec::new();
    let mut results = Vec::with_capacity(items.len());
    for (label, sc) in items {
        let key = fit_key(sc)?;
        let (model, resamples) = match cache.iter().find(|(k, _)| k == &key) {
            Some((_, m)) => (m.clone(), 0),
            None => {
                let (m, r) = data::fit_model(sc)?;
                cache.push((key, m.clone()));
                (m, r)
            }
        };
        let mut trace = run_closed_loop_with_model(sc, &model)?;
        trace.resamples = resamples;
        results.push(ScenarioResult {
            label: label.clone(),
            trace,
        });
    }
    Ok(ComparisonSummary { results })
}

/// Compare a scenario list and write per-scenario traces, the aligned error
/// table, a text summary and a gnuplot script into `out_dir`.
pub fn run_suite_to_dir(
    items: &[(String, Scenario)],
    title: &str,
    out_dir: &Path,
) -> Result<ComparisonSummary> {
    std::fs::create_dir_all(out_dir)?;
    let summary = compare_scenarios(items)?;
    let mut csv_names = Vec::new();
    for r in &summary.results {
        let name = format!("{}.csv", r.label);
        r.trace.write_csv(&out_dir.join(&name))?;
        csv_names.push(name);
    }
    std::fs::write(out_dir.join("summary.csv"), summary.aligned_csv())?;
    std::fs::write(out_dir.join("summary.txt"), summary.summary_text())?;
    std::fs::write(
        out_dir.join("plot.gp"),
        trace::gnuplot_script(&csv_names, title),
    )?;
    Ok(summary)
}

/// Run a named benchmark suite ("vdp" or "four-tanks").
pub fn run_benchmark_suite(suite: &str, out_dir: &Path) -> Result<ComparisonSummary> {
    let items = match suite {
        "vdp" => suites::vdp_suite(),
        "four-tanks" => suites::four_tanks_suite(),
        other => {
            return Err(Error::Config(format!(
                "unknown suite {other:?}; expected \"vdp\" or \"four-tanks\""
            )))
        }
    };
    run_suite_to_dir(&items, suite, out_dir)
}
