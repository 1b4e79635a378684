use ch_gsav::adaptive::run_with_policy_observed;
use ch_gsav::experiments::{count_positive_components, run_scenario, Scenario, ScenarioName};
use ch_gsav::monitor::{check_records, MonitorTolerances};
use ch_gsav::StepPolicy;

#[test]
fn kissing_bubbles_merge_into_one_component() {
    let mut s = Scenario::defaults(ScenarioName::KissingBubbles);
    s.n = 64;
    let out = run_scenario(&s).unwrap();
    let last = out.snapshots.last().unwrap();
    assert_eq!(last.t, 1.0);
    assert_eq!(count_positive_components(&last.field).unwrap(), 1);
    assert_eq!(out.snapshots.len(), s.snapshot_times.len());
}

fn reduced(name: ScenarioName) -> Scenario {
    let mut s = Scenario::defaults(name);
    match name {
        ScenarioName::Convergence => s.n = 32,
        ScenarioName::KissingBubbles => {
            s.n = 32;
            s.horizon = 0.2;
        }
        ScenarioName::Coarsening2d => {
            s.n = 32;
            s.horizon = 0.02;
        }
        ScenarioName::Coarsening3d => {
            s.n = 16;
            s.horizon = 0.01;
        }
    }
    s.snapshot_times.retain(|&t| t <= s.horizon);
    s
}

#[test]
fn every_scenario_satisfies_the_invariant_suite() {
    for name in ScenarioName::ALL {
        let s = reduced(name);
        let mut state = s.initial_state().unwrap();
        let mut tol = MonitorTolerances { mass_scale: Some(state.grid().volume()), ..MonitorTolerances::default() };
        if let StepPolicy::Adaptive(p) = &s.policy {
            tol.max_ratio = p.r_max_eff;
        }
        let h1_start = state.phi().h1_norm();
        let bound = h1_start.max((2.0 * state.gamma0()).sqrt() + 2.0 * state.grid().volume().sqrt());
        let mut h1_max: f64 = 0.0;
        let records = run_with_policy_observed(&mut state, &s.policy, s.horizon, &s.snapshot_times, |_, st| {
            h1_max = h1_max.max(st.phi().h1_norm());
            Ok(())
        })
        .unwrap();
        let violations = check_records(&records, &tol);
        assert!(violations.is_empty(), "{name}: {:?}", &violations[..violations.len().min(5)]);
        assert!(h1_max.is_finite() && h1_max <= bound, "{name}: H1 {h1_max} above {bound}");
        assert!((records.last().unwrap().t - s.horizon).abs() < 1e-12 * s.horizon);
    }
}

#[test]
fn adaptive_steps_stay_in_bounds_except_landing_steps() {
    let s = reduced(ScenarioName::Coarsening2d);
    let StepPolicy::Adaptive(p) = s.policy.clone() else { unreachable!() };
    let out = run_scenario(&s).unwrap();
    let stops: Vec<f64> = s.snapshot_times.iter().copied().chain([s.horizon]).collect();
    for (i, r) in out.records.iter().enumerate() {
        assert!(r.tau <= p.tau_max * (1.0 + 1e-12));
        let lands = stops.iter().any(|&t| (r.t - t).abs() < 1e-12);
        let after_landing = i > 0 && stops.iter().any(|&t| (out.records[i - 1].t - t).abs() < 1e-12);
        if !lands && !after_landing {
            assert!(r.tau >= p.tau_min * (1.0 - 1e-12), "step {} tau {}", r.n, r.tau);
        }
    }
}

#[test]
fn random_mesh_run_satisfies_a1_and_invariants() {
    let s = reduced(ScenarioName::Convergence);
    let StepPolicy::Prescribed(mesh) = s.policy.clone() else { unreachable!() };
    let out = run_scenario(&s).unwrap();
    assert_eq!(out.records.len(), mesh.len());
    assert!(mesh.max_ratio() < 4.86);
    let tol = MonitorTolerances { max_ratio: 4.86, mass_scale: Some(out.final_state.grid().volume()), ..MonitorTolerances::default() };
    assert!(check_records(&out.records, &tol).is_empty());
}
