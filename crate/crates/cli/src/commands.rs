//! One function per subcommand. Each returns the JSON report for standard
//! output and the exit code, or a [`CliError`] carrying its own code.

use std::fs;
use std::path::Path;

use advbound::adversary::{
    adversary_bound, check_catalyst, check_gamma, validate, AdversaryResult, AdversaryStatus, ConversionProblem,
};
use advbound::linalg::{unitarity_deviation, ComplexMatrix};
use advbound::par::Execution;
use advbound::problems::by_name;
use advbound::sdp::SolverSettings;
use advbound::simulator::{las_vegas_mass, metrics, per_subspace_error, run, run_on_input};
use advbound::synthesis::{build_rdm_sequence, compile_plan, steps_for_epsilon};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::wire::{matrix_from_wire, CertificateFile, PlanFile, PlanMetadata, ProblemFile, SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable, malformed or dimensionally inconsistent input.
    #[error("{0}")]
    Input(String),
    /// Well-formed input for which the requested result does not hold.
    #[error("{0}")]
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Input(_) => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug)]
pub struct Outcome {
    pub report: Value,
    pub exit_code: i32,
    /// Printed to standard error when the exit code is nonzero.
    pub diagnostic: Option<String>,
}

impl Outcome {
    fn ok(report: Value) -> Self {
        Outcome { report, exit_code: 0, diagnostic: None }
    }

    fn fail(report: Value, diagnostic: String) -> Self {
        Outcome { report, exit_code: 1, diagnostic: Some(diagnostic) }
    }
}

/// A float rounded to 12 significant digits; non-finite values become strings.
pub fn num(x: f64) -> Value {
    if x.is_nan() {
        Value::String("nan".into())
    } else if x.is_infinite() {
        Value::String(if x > 0.0 { "infinity" } else { "-infinity" }.into())
    } else {
        let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
        json!(rounded + 0.0)
    }
}

fn opt_num(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("cannot parse {}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string(value).expect("wire types serialize");
    fs::write(path, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

pub fn load_problem(path: &Path) -> CliResult<ConversionProblem> {
    let file: ProblemFile = read_json(path)?;
    file.to_problem().map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn settings(problem: &ConversionProblem) -> SolverSettings {
    let t = problem.tolerances;
    SolverSettings {
        feas_tol: t.feas_tol,
        gap_tol: t.gap_tol,
        psd_tol: t.psd_tol,
        hermitian_tol: t.hermitian_tol,
        ..SolverSettings::default()
    }
}

fn require_valid(problem: &ConversionProblem) -> CliResult<()> {
    let report = validate(problem);
    if report.passed() {
        return Ok(());
    }
    let failed: Vec<String> = report.failures().map(|c| format!("{} ({})", c.name, c.detail)).collect();
    Err(CliError::Domain(format!("problem fails validation: {}", failed.join("; "))))
}

fn solve(problem: &ConversionProblem) -> CliResult<AdversaryResult> {
    adversary_bound(problem, &settings(problem)).map_err(|e| CliError::Domain(e.to_string()))
}

fn status_name(status: AdversaryStatus) -> &'static str {
    match status {
        AdversaryStatus::Optimal => "optimal",
        AdversaryStatus::Infeasible { .. } => "infeasible",
        AdversaryStatus::Uncertified => "uncertified",
    }
}

pub fn cmd_validate(path: &Path) -> CliResult<Outcome> {
    let problem = load_problem(path)?;
    let report = validate(&problem);
    let checks: Vec<Value> = report
        .checks
        .iter()
        .map(|c| json!({"name": c.name, "passed": c.passed, "residual": num(c.residual), "detail": c.detail}))
        .collect();
    let out = json!({"schema_version": SCHEMA_VERSION, "passed": report.passed(), "checks": checks});
    if report.passed() {
        Ok(Outcome::ok(out))
    } else {
        let names: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
        Ok(Outcome::fail(out, format!("validation failed: {}", names.join(", "))))
    }
}

pub fn cmd_bound(path: &Path, refined: bool, certificates_out: Option<&Path>) -> CliResult<Outcome> {
    let problem = load_problem(path)?;
    require_valid(&problem)?;
    let r = solve(&problem)?;
    if !r.is_finite() {
        let reason = r.explanation.clone().unwrap_or_else(|| "no feasible catalyst exists".into());
        let certified = matches!(r.status, AdversaryStatus::Infeasible { certified: true });
        return Ok(Outcome::ok(json!({
            "schema_version": SCHEMA_VERSION,
            "value": "infinity",
            "status": status_name(r.status),
            "certified": certified,
            "reason": reason,
        })));
    }
    let mut out = json!({
        "schema_version": SCHEMA_VERSION,
        "value": num(r.value),
        "duality_gap": num(r.duality_gap),
        "status": status_name(r.status),
        "primal_objective": num(r.primal_objective),
        "dual_objective": num(r.dual_objective),
        "primal_residual": num(r.primal_residual),
        "gamma_slack": num(r.gamma_slack),
    });
    if refined {
        out["refined"] = match &r.refined {
            Some(table) => json!({
                "refined_value": opt_num(table.refined_value),
                "has_violation": table.has_violation(),
                "subspaces": table.per_subspace.iter().map(|e| json!({
                    "index": e.index,
                    "pibar_mass": num(e.pibar_mass),
                    "xi_mass": num(e.xi_mass),
                    "ratio": opt_num(e.ratio),
                    "violation": e.violation,
                })).collect::<Vec<_>>(),
            }),
            None => json!({"note": "the problem declares no subspaces"}),
        };
    }
    if let Some(p) = certificates_out {
        write_json(p, &CertificateFile::new(Some(&r.pibar), Some(&r.gamma)))?;
    }
    if r.status == AdversaryStatus::Uncertified {
        let why = r.explanation.clone().unwrap_or_else(|| "no dual point closes the gap".into());
        return Ok(Outcome::fail(out, format!("bound is not certified: {why}")));
    }
    Ok(Outcome::ok(out))
}

pub enum Steps {
    Epsilon(f64),
    Fixed(usize),
}

/// Solves for the bound and compiles a plan of the requested length.
pub fn synthesize(problem: &ConversionProblem, steps: Steps) -> CliResult<PlanFile> {
    require_valid(problem)?;
    let r = solve(problem)?;
    if !r.is_finite() {
        return Err(CliError::Domain("the adversary bound is infinite; no finite-step algorithm exists".into()));
    }
    let (t_prime, epsilon) = match steps {
        Steps::Fixed(0) => return Err(CliError::Input("--steps must be at least 1".into())),
        Steps::Fixed(t) => (t, None),
        Steps::Epsilon(eps) => (steps_for_epsilon(r.value, eps).map_err(|e| CliError::Input(e.to_string()))?, Some(eps)),
    };
    let seq = build_rdm_sequence(problem, &r.pibar, t_prime).map_err(|e| CliError::Domain(e.to_string()))?;
    let plan = compile_plan(problem, &seq, &r.pibar, Execution::available()).map_err(|e| CliError::Domain(e.to_string()))?;
    let metadata = PlanMetadata {
        adv_value: r.value,
        t_prime,
        predicted_error: (r.value.max(0.0) / t_prime as f64).sqrt(),
        epsilon,
    };
    Ok(PlanFile::from_plan(&plan, metadata))
}

pub fn cmd_synthesize(path: &Path, steps: Steps, plan_out: Option<&Path>) -> CliResult<Outcome> {
    let problem = load_problem(path)?;
    let plan = synthesize(&problem, steps)?;
    match plan_out {
        Some(p) => {
            write_json(p, &plan)?;
            let m = &plan.metadata;
            Ok(Outcome::ok(json!({
                "schema_version": SCHEMA_VERSION,
                "adv_value": num(m.adv_value),
                "t_prime": m.t_prime,
                "predicted_error": num(m.predicted_error),
                "epsilon": opt_num(m.epsilon),
                "unitaries": plan.unitaries.len(),
                "plan": p.display().to_string(),
            })))
        }
        // the plan itself is the report; it keeps full precision
        None => Ok(Outcome::ok(serde_json::to_value(&plan).expect("plan serializes"))),
    }
}

pub fn cmd_simulate(plan_path: &Path, problem_path: &Path, trace_out: Option<&Path>) -> CliResult<Outcome> {
    let problem = load_problem(problem_path)?;
    let file: PlanFile = read_json(plan_path)?;
    let plan = file.to_plan(&problem).map_err(|e| CliError::Input(format!("{}: {e}", plan_path.display())))?;
    let trace = run_on_input(&plan, &problem).map_err(|e| CliError::Input(e.to_string()))?;
    let m = metrics(&trace, &problem).map_err(|e| CliError::Input(e.to_string()))?;
    let per_subspace = if problem.subspaces.is_empty() {
        Vec::new()
    } else {
        per_subspace_error(&trace, &plan, &problem)
            .map_err(|e| CliError::Domain(e.to_string()))?
            .into_iter()
            .map(|e| json!({"index": e.index, "error": opt_num(e.error), "bound": opt_num(e.bound), "note": e.note}))
            .collect()
    };
    // the intermediate states of the algorithm proper are those of the run on
    // the perturbed input; the run on xi is reported alongside
    let perturbed = run(&plan, &plan.perturbed_input).map_err(|e| CliError::Input(e.to_string()))?;
    let unitarity = plan.unitaries.iter().map(unitarity_deviation).fold(0.0, f64::max);
    let within = m.final_error <= m.theoretical_bound + 1e-6;
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "t_prime": trace.steps(),
        "final_error": num(m.final_error),
        "theoretical_bound": num(m.theoretical_bound),
        "within_bound": within,
        "las_vegas_mass": num(las_vegas_mass(&perturbed, &problem)),
        "las_vegas_mass_on_xi": num(m.las_vegas_mass),
        "unprojected_error": num(m.unprojected_error),
        "max_unitarity_deviation": num(unitarity),
        "per_subspace_errors": per_subspace,
    });
    if let Some(p) = trace_out {
        let v = |s: &advbound::linalg::StateVector| crate::wire::vector_to_wire(s);
        let trace_json = json!({
            "schema_version": SCHEMA_VERSION,
            "dims": crate::wire::Dims::from(problem.shape),
            "work_dim": trace.work_dim,
            "t_prime": trace.steps(),
            "norms": trace.norms,
            "idle_mass": trace.idle_mass,
            "initial": v(&trace.initial),
            "pre_query": trace.pre_query.iter().map(v).collect::<Vec<_>>(),
            "final_state": v(&trace.final_state),
            "final_projected": v(&trace.final_projected),
            "metrics": {
                "final_error": m.final_error,
                "theoretical_bound": m.theoretical_bound,
                "las_vegas_mass": m.las_vegas_mass,
                "unprojected_error": m.unprojected_error,
            },
        });
        write_json(p, &trace_json)?;
    }
    if within {
        Ok(Outcome::ok(report))
    } else {
        let msg = format!("final error {:.6e} exceeds the bound {:.6e}", m.final_error, m.theoretical_bound);
        Ok(Outcome::fail(report, msg))
    }
}

fn certificate(path: &Path, field: &str) -> CliResult<ComplexMatrix> {
    let file: CertificateFile = read_json(path)?;
    crate::wire::check_schema(&file.schema_version).map_err(CliError::Input)?;
    let m = match field {
        "pibar" => file.pibar,
        _ => file.gamma,
    }
    .ok_or_else(|| CliError::Input(format!("{} has no {field} entry", path.display())))?;
    matrix_from_wire(&m, field).map_err(CliError::Input)
}

pub fn cmd_certify(path: &Path, pibar: Option<&Path>, gamma: Option<&Path>) -> CliResult<Outcome> {
    let problem = load_problem(path)?;
    let tol = problem.tolerances;
    let mut out = json!({"schema_version": SCHEMA_VERSION});
    let mut failures = Vec::new();
    if let Some(p) = pibar {
        let m = certificate(p, "pibar")?;
        let c = check_catalyst(&problem, &m).map_err(|e| CliError::Input(e.to_string()))?;
        let feasible = c.feasible(tol.feas_tol, tol.psd_tol);
        if !feasible {
            failures.push(format!("catalyst residual {:.3e}, min eigenvalue {:.3e}", c.residual, c.min_eigenvalue));
        }
        out["pibar"] = json!({
            "feasible": feasible,
            "residual": num(c.residual),
            "min_eigenvalue": num(c.min_eigenvalue),
            "objective": num(c.objective),
        });
    }
    if let Some(p) = gamma {
        let m = certificate(p, "gamma")?;
        let g = check_gamma(&problem, &m).map_err(|e| CliError::Input(e.to_string()))?;
        let feasible = g.feasible(tol.psd_tol, tol.hermitian_tol);
        if !feasible {
            failures.push(format!("dual max eigenvalue {:.3e}, hermitian deviation {:.3e}", g.max_eigenvalue, g.hermitian_deviation));
        }
        out["gamma"] = json!({
            "feasible": feasible,
            "max_eigenvalue": num(g.max_eigenvalue),
            "slack": num(g.slack),
            "objective": num(g.objective),
            "hermitian_deviation": num(g.hermitian_deviation),
        });
    }
    if failures.is_empty() {
        Ok(Outcome::ok(out))
    } else {
        Ok(Outcome::fail(out, format!("certificate rejected: {}", failures.join("; "))))
    }
}

pub fn cmd_export(name: &str, out: Option<&Path>, certificates_out: Option<&Path>) -> CliResult<Outcome> {
    let inst = by_name(name).map_err(|e| CliError::Input(e.to_string()))?;
    let file = ProblemFile::from_problem(&inst.problem);
    if let Some(p) = certificates_out {
        let certs = inst
            .certificates
            .as_ref()
            .ok_or_else(|| CliError::Domain(format!("{} has no bundled certificates", inst.name)))?;
        write_json(p, &CertificateFile::new(Some(&certs.pibar), Some(&certs.gamma)))?;
    }
    match out {
        Some(p) => {
            write_json(p, &file)?;
            Ok(Outcome::ok(json!({
                "schema_version": SCHEMA_VERSION,
                "name": inst.name,
                "expected_bound": opt_num(inst.expected_bound.as_ref().map(|b| b.value)),
                "problem": p.display().to_string(),
            })))
        }
        None => Ok(Outcome::ok(serde_json::to_value(&file).expect("problem serializes"))),
    }
}
