use advbound::adversary::{adversary_bound, check_catalyst, check_gamma, validate, AdversaryStatus};
use advbound::problems::{by_name, corpus, deutsch_phase, grover_phase, noisy_damp};
use advbound::sdp::SolverSettings;

// Values printed by tests/oracle/adversary_oracle.py (cvxpy + Clarabel, primal then dual).
const ORACLE: &[(&str, f64, f64)] = &[
    ("deutsch_phase", 0.49999999999985845, 0.49999999999987743),
    ("grover_phase(2)", 0.499999999999867, 0.4999999982188673),
    ("grover_phase(3)", 0.7071067811862948, 0.7071067811782451),
    ("grover_phase(4)", 0.8660254037493518, 0.8660254037512864),
    ("grover_phase(5)", 0.9999999999556609, 0.9999999999973751),
    ("grover_phase(6)", 1.118033983417196, 1.1180339887453514),
    ("grover_phase(7)", 1.224744865174171, 1.2247448713824431),
    ("grover_phase(8)", 1.3228756484395923, 1.3228756184567863),
    ("noisy_damp(0.1)", 0.5263157894737038, 0.5263157894687035),
    ("noisy_damp(0.3)", 0.5882352941176757, 0.5882352941139594),
    ("noisy_damp(0.5)", 0.666666666670284, 0.6666666666652746),
    ("noisy_damp(0.9)", 0.9090909090976218, 0.909090909088051),
];

#[test]
fn every_instance_validates() {
    for inst in corpus() {
        let report = validate(&inst.problem);
        assert!(report.passed(), "{}: {:?}", inst.name, report.failures().collect::<Vec<_>>());
    }
}

#[test]
fn expected_bounds_match_oracle() {
    for inst in corpus() {
        let (_, primal, dual) = ORACLE.iter().find(|(n, _, _)| *n == inst.name).expect("oracle row");
        let expected = inst.expected_bound.as_ref().unwrap().value;
        assert!((expected - primal).abs() < 1e-7, "{}", inst.name);
        assert!((expected - dual).abs() < 1e-7, "{}", inst.name);
    }
}

#[test]
fn hand_certificates_are_feasible_and_tight() {
    for inst in corpus() {
        let cert = inst.certificates.as_ref().unwrap();
        let expected = inst.expected_bound.as_ref().unwrap().value;
        let c = check_catalyst(&inst.problem, &cert.pibar).unwrap();
        assert!(c.residual < 1e-12 && c.min_eigenvalue > -1e-12, "{}: {c:?}", inst.name);
        assert!((c.objective - expected).abs() < 1e-12, "{}", inst.name);
        let g = check_gamma(&inst.problem, &cert.gamma).unwrap();
        assert!(g.slack > -1e-12, "{}: {g:?}", inst.name);
        assert!((g.objective - expected).abs() < 1e-12, "{}", inst.name);
    }
}

#[test]
fn solver_reproduces_expected_bounds() {
    let settings = SolverSettings::default();
    for inst in corpus() {
        let r = adversary_bound(&inst.problem, &settings).unwrap();
        let expected = inst.expected_bound.as_ref().unwrap().value;
        assert_eq!(r.status, AdversaryStatus::Optimal, "{}", inst.name);
        assert!((r.value - expected).abs() < 1e-5, "{}: {} vs {expected}", inst.name, r.value);
        assert!(r.duality_gap <= 1e-7 * expected.max(1.0), "{}: gap {}", inst.name, r.duality_gap);
        assert!(r.primal_residual < 1e-12, "{}: residual {}", inst.name, r.primal_residual);
    }
}

#[test]
fn deutsch_is_grover_two_up_to_relabeling() {
    let d = deutsch_phase().expected_bound.unwrap().value;
    let g = grover_phase(2).unwrap().expected_bound.unwrap().value;
    assert_eq!(d, g);
}

#[test]
fn parameters_out_of_range_are_rejected() {
    assert!(grover_phase(1).is_err());
    assert!(grover_phase(9).is_err());
    assert!(noisy_damp(1.0).is_err());
    assert!(noisy_damp(-0.1).is_err());
}

#[test]
fn instances_resolve_by_name() {
    assert_eq!(by_name("grover_phase:3").unwrap().name, "grover_phase(3)");
    assert_eq!(by_name("noisy_damp:0.3").unwrap().name, "noisy_damp(0.3)");
    assert_eq!(by_name("deutsch_phase").unwrap().name, "deutsch_phase");
    assert!(by_name("grover_phase:x").is_err());
    assert!(by_name("shor").is_err());
}
