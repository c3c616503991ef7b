//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::time::Instant;

use advbound::adversary::{
    adversary_bound, check_catalyst, check_gamma, validate, AdversaryResult, AdversaryStatus, ConversionProblem,
};
use advbound::linalg::{
    apply_local, basis_vector, connect_purifications, identity, kron, max_abs, purify, reduce_to_left,
    unitarity_deviation, ComplexMatrix, StateVector, C64,
};
use advbound::par::Execution;
use advbound::problems::{corpus, deutsch_phase, grover_phase, noisy_damp, NamedInstance};
use advbound::sdp::SolverSettings;
use advbound::simulator::{final_error, per_subspace_error, run, run_on_input, sequence_las_vegas_mass};
use advbound::synthesis::{
    build_rdm_sequence, compile_plan, steps_for_epsilon, verify_sequence, verify_synthesized, RdmSequence,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn bound(p: &ConversionProblem) -> Result<AdversaryResult, String> {
    adversary_bound(p, &SolverSettings::default()).map_err(|e| e.to_string())
}

fn projector(v: &StateVector) -> ComplexMatrix {
    v * v.adjoint()
}

fn plus() -> StateVector {
    StateVector::from_element(2, C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0))
}

fn deutsch_bound() -> Outcome {
    let inst = deutsch_phase();
    let start = Instant::now();
    let r = bound(&inst.problem)?;
    let elapsed = start.elapsed().as_secs_f64();
    ensure(r.status == AdversaryStatus::Optimal, format!("status {:?}", r.status))?;
    ensure((r.value - 0.5).abs() <= 1e-5, format!("value {}", r.value))?;
    ensure(r.duality_gap <= 1e-7, format!("gap {:e}", r.duality_gap))?;
    let cert = inst.certificates.as_ref().ok_or("no bundled certificates")?;
    let expected_pibar = kron(&projector(&plus()), &projector(&basis_vector(2, 1))).scale(0.5);
    ensure(max_abs(&(&cert.pibar - expected_pibar)) == 0.0, "bundled catalyst differs from the closed form")?;
    let c = check_catalyst(&inst.problem, &cert.pibar).map_err(|e| e.to_string())?;
    ensure(c.residual <= 1e-10 && c.min_eigenvalue >= -1e-12, format!("catalyst {c:?}"))?;
    let g = check_gamma(&inst.problem, &cert.gamma).map_err(|e| e.to_string())?;
    ensure(g.slack >= -1e-12, format!("certificate slack {:e}", g.slack))?;
    ensure(elapsed < 1.0, format!("took {elapsed:.3}s"))?;
    Ok(format!(
        "value {:.9}, gap {:.1e}, catalyst residual {:.1e}, certificate slack {:.1e}, {elapsed:.3}s",
        r.value, r.duality_gap, c.residual, g.slack
    ))
}

fn error_scaling() -> Outcome {
    let inst = deutsch_phase();
    let r = bound(&inst.problem)?;
    let mut errors = Vec::new();
    let mut slowest = 0.0f64;
    for eps in [0.3, 0.1, 0.05] {
        let t = steps_for_epsilon(0.5, eps).map_err(|e| e.to_string())?;
        let start = Instant::now();
        let seq = build_rdm_sequence(&inst.problem, &r.pibar, t).map_err(|e| e.to_string())?;
        let plan = compile_plan(&inst.problem, &seq, &r.pibar, Execution::available()).map_err(|e| e.to_string())?;
        let trace = run_on_input(&plan, &inst.problem).map_err(|e| e.to_string())?;
        let err = final_error(&trace, &inst.problem).map_err(|e| e.to_string())?;
        slowest = slowest.max(start.elapsed().as_secs_f64());
        ensure(err <= eps + 1e-6, format!("eps {eps}, T' {t}: error {err}"))?;
        errors.push((t, err));
    }
    let ratio = errors[0].1 / errors[2].1;
    ensure((ratio / 6.0 - 1.0).abs() <= 0.2, format!("error ratio {ratio:.3} is not within 20% of 6"))?;
    ensure(slowest < 30.0, format!("slowest run {slowest:.2}s"))?;
    Ok(format!(
        "T' {}/{}/{} errors {:.4}/{:.4}/{:.4}, ratio {ratio:.2}",
        errors[0].0, errors[1].0, errors[2].0, errors[0].1, errors[1].1, errors[2].1
    ))
}

struct Synthesized {
    name: String,
    problem: ConversionProblem,
    pibar: ComplexMatrix,
    value: f64,
    sequences: Vec<RdmSequence>,
}

fn exactness(out: &mut Vec<Synthesized>) -> Outcome {
    let mut worst = 0.0f64;
    let mut worst_unitarity = 0.0f64;
    for NamedInstance { name, problem, .. } in corpus() {
        let r = bound(&problem)?;
        ensure(r.status == AdversaryStatus::Optimal, format!("{name}: status {:?}", r.status))?;
        let mut sequences = Vec::new();
        for t in [1, 2, 10] {
            let seq = build_rdm_sequence(&problem, &r.pibar, t).map_err(|e| format!("{name}: {e}"))?;
            let plan = compile_plan(&problem, &seq, &r.pibar, Execution::available()).map_err(|e| format!("{name}: {e}"))?;
            let trace = run(&plan, &plan.perturbed_input).map_err(|e| e.to_string())?;
            let err = (&trace.final_state - &plan.perturbed_target).norm();
            ensure(err <= 1e-8, format!("{name}, T' {t}: perturbed target missed by {err:e}"))?;
            worst = worst.max(err);
            for w in &plan.unitaries {
                worst_unitarity = worst_unitarity.max(unitarity_deviation(w));
            }
            sequences.push(seq);
        }
        out.push(Synthesized { name, problem, pibar: r.pibar, value: r.value, sequences });
    }
    ensure(worst_unitarity <= 1e-8, format!("unitarity deviation {worst_unitarity:e}"))?;
    Ok(format!("{} instances x T' in {{1, 2, 10}}: max error {worst:.1e}, max unitarity deviation {worst_unitarity:.1e}", out.len()))
}

fn consistency(all: &[Synthesized]) -> Outcome {
    ensure(!all.is_empty(), "no synthesized sequences (exactness run failed)")?;
    let (mut eq1, mut endpoints, mut count) = (0.0f64, 0.0f64, 0);
    for s in all {
        for seq in &s.sequences {
            let r = verify_synthesized(seq, &s.problem, &s.pibar).map_err(|e| e.to_string())?;
            ensure(r.max_consistency() <= 1e-9, format!("{}: consistency {:e}", s.name, r.max_consistency()))?;
            ensure(r.max_endpoint() <= 1e-9, format!("{}: endpoints {:e}", s.name, r.max_endpoint()))?;
            ensure(r.max_psd_violation() <= 1e-9, format!("{}: eigenvalue {:e}", s.name, -r.max_psd_violation()))?;
            eq1 = eq1.max(r.max_consistency());
            endpoints = endpoints.max(r.max_endpoint());
            count += 1;
        }
    }
    Ok(format!("{count} sequences: max update residual {eq1:.1e}, max endpoint residual {endpoints:.1e}"))
}

/// `|u><u| (x) |b><b|` with `b` half on each marked direction and the rest idle.
fn one_query(n: usize) -> ComplexMatrix {
    let b = n + 1;
    let mut beta = StateVector::from_element(b, C64::new(0.5, 0.0));
    beta[0] = C64::new((1.0 - 0.25 * n as f64).sqrt(), 0.0);
    let u = StateVector::from_element(n, C64::new(1.0 / (n as f64).sqrt(), 0.0));
    kron(&projector(&u), &projector(&beta))
}

fn lower_bound_coherence(all: &[Synthesized]) -> Outcome {
    let tol = 1e-9;
    let deutsch = deutsch_phase();
    let hand = kron(&projector(&plus()), &projector(&plus()));
    let seq = RdmSequence::user_supplied(deutsch.problem.shape, vec![hand]).map_err(|e| e.to_string())?;
    let report = verify_sequence(&seq, &deutsch.problem).map_err(|e| e.to_string())?;
    ensure(report.passed(tol, tol), format!("hand Deutsch sequence fails: {report:?}"))?;
    let adv = bound(&deutsch.problem)?.value;
    ensure(1.0 >= adv - 1e-7, format!("one step is below the bound {adv}"))?;

    let mut negatives = 0;
    for n in 2..=4 {
        let inst = grover_phase(n).map_err(|e| e.to_string())?;
        let p = &inst.problem;
        let adv = bound(p)?.value;
        let needed = (adv - 1e-7).ceil() as usize;
        let idle_step = kron(&p.rdm_xi(), &projector(&p.idle));
        let valid = vec![
            vec![one_query(n)],
            vec![idle_step.clone(), one_query(n)],
        ];
        for steps in &valid {
            let seq = RdmSequence::user_supplied(p.shape, steps.clone()).map_err(|e| e.to_string())?;
            let r = verify_sequence(&seq, p).map_err(|e| e.to_string())?;
            ensure(r.passed(tol, tol), format!("grover({n}) valid sequence fails: {r:?}"))?;
            ensure(steps.len() >= needed, format!("grover({n}): {} steps beat the bound {adv}", steps.len()))?;
            // dropping the query step leaves only idle steps, which cannot reach tau
            for keep in 1..steps.len() {
                let cut = RdmSequence::user_supplied(p.shape, steps[..keep].to_vec()).map_err(|e| e.to_string())?;
                let r = verify_sequence(&cut, p).map_err(|e| e.to_string())?;
                ensure(!r.passed(tol, tol), format!("grover({n}): prefix of {keep} steps passes"))?;
                negatives += 1;
            }
        }
        ensure(RdmSequence::user_supplied(p.shape, Vec::new()).is_err(), "empty sequence accepted")?;
        negatives += 1;
    }
    for s in all.iter().filter(|s| s.name.starts_with("grover_phase(") && s.problem.shape.dim_a <= 4) {
        let seq = s.sequences.last().expect("three step counts");
        let dropped = RdmSequence::user_supplied(s.problem.shape, seq.steps[..seq.len() - 1].to_vec()).map_err(|e| e.to_string())?;
        let r = verify_synthesized(&dropped, &s.problem, &s.pibar).map_err(|e| e.to_string())?;
        ensure(!r.passed(tol, tol), format!("{}: truncated synthesized sequence passes", s.name))?;
        negatives += 1;
    }
    Ok(format!("1-step Deutsch sequence certified (1 >= {adv:.6}); {negatives} truncated sequences rejected"))
}

fn idle_mass(all: &[Synthesized]) -> Outcome {
    ensure(!all.is_empty(), "no synthesized sequences (exactness run failed)")?;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_drift = 0.0f64;
    for s in all {
        for t in [3, 7] {
            let a = sequence_las_vegas_mass(&build_rdm_sequence(&s.problem, &s.pibar, t).map_err(|e| e.to_string())?, &s.problem);
            let b = sequence_las_vegas_mass(&build_rdm_sequence(&s.problem, &s.pibar, 2 * t).map_err(|e| e.to_string())?, &s.problem);
            ensure(a <= s.value + 1e-8, format!("{}: mass {a} exceeds bound {}", s.name, s.value))?;
            ensure((a - b).abs() <= 1e-8, format!("{}: mass changes from {a} to {b} when doubling", s.name))?;
            worst_excess = worst_excess.max(a - s.value);
            worst_drift = worst_drift.max((a - b).abs());
        }
    }
    Ok(format!("max (mass - bound) {worst_excess:.1e}, max change under doubling {worst_drift:.1e}"))
}

fn refinement() -> Outcome {
    let inst = deutsch_phase();
    let blocks = (0..2).map(|a| projector(&basis_vector(2, a))).collect();
    let p = inst.problem.with_subspaces(blocks).map_err(|e| e.to_string())?;
    let r = bound(&p)?;
    let refined = r.refined.as_ref().ok_or("no refinement table")?;
    for e in &refined.per_subspace {
        let ratio = e.ratio.ok_or("block without xi mass")?;
        ensure((ratio - 0.5).abs() <= 1e-6, format!("block {} ratio {ratio}", e.index))?;
    }
    let value = refined.refined_value.ok_or("no refined value")?;
    ensure((value - 0.5).abs() <= 1e-6, format!("refined value {value}"))?;
    let t = 50;
    let seq = build_rdm_sequence(&p, &r.pibar, t).map_err(|e| e.to_string())?;
    let plan = compile_plan(&p, &seq, &r.pibar, Execution::available()).map_err(|e| e.to_string())?;
    let trace = run_on_input(&plan, &p).map_err(|e| e.to_string())?;
    let limit = (r.value / t as f64).sqrt() + 1e-6;
    let mut errors = Vec::new();
    for e in per_subspace_error(&trace, &plan, &p).map_err(|e| e.to_string())? {
        let err = e.error.ok_or("block skipped")?;
        ensure(err <= limit, format!("block {} error {err} above {limit}", e.index))?;
        errors.push(format!("{err:.4}"));
    }
    Ok(format!("ratios 0.5/0.5, refined {value:.6}, block errors {} <= {limit:.4}", errors.join("/")))
}

fn infeasibility() -> Outcome {
    let inst = deutsch_phase();
    let p = ConversionProblem { interaction: identity(4), ..inst.problem };
    ensure(max_abs(&(p.rdm_tau() - p.rdm_xi())) > 0.1, "endpoint states on A coincide")?;
    let start = Instant::now();
    let r = bound(&p)?;
    let elapsed = start.elapsed().as_secs_f64();
    ensure(r.value == f64::INFINITY, format!("value {}", r.value))?;
    ensure(matches!(r.status, AdversaryStatus::Infeasible { .. }), format!("status {:?}", r.status))?;
    ensure(elapsed < 1.0, format!("took {elapsed:.3}s"))?;
    Ok(format!("bound = infinity ({:?}), {elapsed:.3}s", r.status))
}

fn noise_model() -> Outcome {
    const ORACLE: f64 = 0.5882352941176757;
    let inst = noisy_damp(0.3).map_err(|e| e.to_string())?;
    let report = validate(&inst.problem);
    ensure(report.passed(), "noisy_damp(0.3) fails validation")?;
    let r = bound(&inst.problem)?;
    ensure(r.value.is_finite() && (r.value - ORACLE).abs() <= 1e-5, format!("value {} vs oracle {ORACLE}", r.value))?;
    let seq = build_rdm_sequence(&inst.problem, &r.pibar, 10).map_err(|e| e.to_string())?;
    let plan = compile_plan(&inst.problem, &seq, &r.pibar, Execution::available()).map_err(|e| e.to_string())?;
    let trace = run_on_input(&plan, &inst.problem).map_err(|e| e.to_string())?;
    let rise = trace.max_norm_increase();
    ensure(rise <= 1e-12, format!("norm increases by {rise:e}"))?;
    let first = trace.norms.first().copied().unwrap_or(0.0);
    let last = trace.norms.last().copied().unwrap_or(0.0);
    Ok(format!("validates, bound {:.9} (oracle {ORACLE:.9}), norms {first:.4} -> {last:.4} non-increasing", r.value))
}

fn properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst_round = 0.0f64;
    for i in 0..200 {
        let dim = 1 + i % 5;
        let rank = 1 + (i / 5) % dim;
        let rho = common::random_psd(&mut rng, dim, rank, 1.0 + (i % 4) as f64);
        let env = rank + i % 3;
        let v = purify(&rho, env, 1e-8, 1e-9).map_err(|e| e.to_string())?;
        worst_round = worst_round.max(max_abs(&(reduce_to_left(&v, dim, env).map_err(|e| e.to_string())? - &rho)));
    }
    ensure(worst_round <= 1e-10, format!("round trip error {worst_round:e}"))?;

    let (mut worst_contract, mut worst_unitary) = (0.0f64, 0.0f64);
    for i in 0..200 {
        let (sys, env) = (1 + i % 3, 1 + (i / 3) % 6);
        let phi = common::random_state(&mut rng, sys * env);
        let psi = apply_local(&phi, sys, env, &common::random_unitary(&mut rng, env));
        let w = connect_purifications(&phi, &psi, sys, env, 1e-8, 1e-8).map_err(|e| e.to_string())?;
        worst_contract = worst_contract.max((apply_local(&phi, sys, env, &w) - &psi).norm());
        worst_unitary = worst_unitary.max(unitarity_deviation(&w));
    }
    ensure(worst_contract <= 1e-10 && worst_unitary <= 1e-10, format!("connection {worst_contract:e} / {worst_unitary:e}"))?;

    let mut worst_gap = f64::NEG_INFINITY;
    for i in 0..50 {
        let inst = common::random_instance(&mut rng);
        let r = bound(&inst.problem)?;
        ensure(r.status == AdversaryStatus::Optimal, format!("random instance {i}: {:?}", r.status))?;
        ensure(r.dual_objective <= r.primal_objective + 1e-7, format!("random instance {i}: weak duality"))?;
        worst_gap = worst_gap.max(r.dual_objective - r.primal_objective);
    }
    Ok(format!(
        "round trips {worst_round:.1e}, connections {worst_contract:.1e} (unitarity {worst_unitary:.1e}), max dual - primal {worst_gap:.1e}"
    ))
}

fn main() {
    let mut synthesized = Vec::new();
    let exact = exactness(&mut synthesized);
    let results: Vec<(usize, &str, Outcome)> = vec![
        (1, "Deutsch-phase bound and certificates", deutsch_bound()),
        (2, "error decays as T'^-1/2", error_scaling()),
        (3, "exactness on the perturbed pair", exact),
        (4, "update-rule consistency of synthesized sequences", consistency(&synthesized)),
        (5, "lower-bound coherence", lower_bound_coherence(&synthesized)),
        (6, "idle-mass bound", idle_mass(&synthesized)),
        (7, "subspace refinement", refinement()),
        (8, "infeasible conversion", infeasibility()),
        (9, "noise model", noise_model()),
        (10, "property suite", properties()),
    ];
    let mut failed = 0;
    for (n, title, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS criterion {n:>2}: {title}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {n:>2}: {title}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
