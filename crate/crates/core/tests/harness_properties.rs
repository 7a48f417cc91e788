use ppfe::channel::OutcomeTrace;
use ppfe::codec::CodecParams;
use ppfe::harness::{build_worst_case, run_monte_carlo, run_trial, secrecy_report, Scenario};
use ppfe::report::{events_csv, mse_csv};
use ppfe::scenario::{preset, ScenarioFile};

fn scalar(a: f64, gamma: f64, transparent: bool, trials: usize, horizon: usize) -> Scenario {
    scalar_tapped(a, gamma, gamma, transparent, trials, horizon)
}

fn scalar_tapped(a: f64, gamma: f64, gamma_e: f64, transparent: bool, trials: usize, horizon: usize) -> Scenario {
    let text = format!(
        r#"
        name = "scalar"
        [model]
        a = [[{a}]]
        q = [[1.0]]
        x0 = [0.0]
        p0 = [[1.0]]
        [[sensors]]
        c = [[1.0]]
        r = [[1.0]]
        [channels]
        gamma = [{gamma}]
        gamma_e = [{gamma_e}]
        [codec]
        a = [2.0]
        delta = [0.01]
        s = 1.0
        transparent = {transparent}
        [run]
        horizon = {horizon}
        trials = {trials}
        seed = 11
        bound = false
        "#
    );
    ScenarioFile::parse(&text).unwrap().build().unwrap()
}

fn small_a1() -> Scenario {
    let mut s = preset("three-tank-groupA1").unwrap();
    s.trials = 16;
    s.horizon = 120;
    s
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let mut s = small_a1();
    let mut outputs = Vec::new();
    for workers in [1, 2, 8] {
        s.workers = workers;
        let r = run_monte_carlo(&s).unwrap();
        outputs.push((mse_csv(&r), events_csv(&r)));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn single_trial_run_matches_run_trial() {
    let mut s = small_a1();
    s.trials = 1;
    let r = run_monte_carlo(&s).unwrap();
    let t = run_trial(&s, 0).unwrap();
    for k in 0..s.horizon {
        let err = (&t.trajectory.states[k] - &t.legit.posterior[k].x).norm_squared();
        assert_eq!(r.mse_legit[k], err);
    }
}

#[test]
fn eavesdropper_with_legitimate_information_matches_exactly() {
    // Lossless and transparent.
    let mut s = preset("three-tank").unwrap();
    s.codec = CodecParams::new(vec![0.5, 0.5, 5.0], vec![0.01; 3], 1.0).unwrap().transparent();
    s.channels = ppfe::channel::ChannelModel::new(vec![1.0; 3], vec![1.0; 3]).unwrap();
    s.trials = 4;
    s.horizon = 80;
    s.with_bound = false;
    let t = run_trial(&s, 0).unwrap();
    for k in 0..s.horizon {
        assert_eq!(t.eve.posterior[k].x, t.legit.posterior[k].x);
    }
    let r = run_monte_carlo(&s).unwrap();
    assert_eq!(r.mse_eve, r.mse_legit);

    // Identical drop patterns with the real quantizer.
    let mut s = preset("three-tank").unwrap();
    s.trials = 4;
    s.horizon = 80;
    s.with_bound = false;
    let mut trace = OutcomeTrace::all_ones(3, s.horizon);
    for k in (3..s.horizon).step_by(7) {
        trace.authorized[k % 3][k] = false;
    }
    trace.wiretap = trace.authorized.clone();
    s.outcome_override = Some(trace);
    let r = run_monte_carlo(&s).unwrap();
    assert_eq!(r.mse_eve, r.mse_legit);
    assert!(r.events.is_empty());
}

#[test]
fn legitimate_mse_matches_filter_covariance() {
    let s = scalar(0.9, 1.0, true, 2000, 200);
    let r = run_monte_carlo(&s).unwrap();
    let p = run_trial(&s, 0).unwrap().legit.posterior[s.horizon - 1].p[(0, 0)];
    let mse: f64 = r.mse_legit[100..].iter().sum::<f64>() / 100.0;
    assert!((mse / p - 1.0).abs() < 0.05, "mse {mse} vs P {p}");
}

#[test]
fn fine_quantization_with_contracting_codec_keeps_eavesdropper_close() {
    let mut s = scalar_tapped(0.9, 0.9, 0.8, false, 200, 200);
    s.codec = CodecParams::new(vec![0.5], vec![1e-6], 1.0).unwrap();
    let r = run_monte_carlo(&s).unwrap();
    assert!(r.eve_saturated.iter().all(|&n| n == 0));
    assert!(!r.events.is_empty());
    for k in 0..s.horizon {
        assert!(r.mse_eve[k] <= 10.0 * r.mse_legit[k], "k = {k}: eve {} legit {}", r.mse_eve[k], r.mse_legit[k]);
    }
}

#[test]
fn worst_case_decode_error_grows_by_a() {
    let k_bar = 10;
    let mut s = scalar(0.9, 1.0, false, 1, 60);
    s.codec = CodecParams::new(vec![5.0], vec![0.01], 1.0).unwrap();
    s.outcome_override = Some(build_worst_case(1, s.horizon, 0, k_bar).unwrap());
    let t = run_trial(&s, 0).unwrap();
    let errs = &t.eve_decode_error[0];
    let mut checked = 0;
    for k in k_bar + 2..s.horizon - 1 {
        let (Some(e0), Some(e1)) = (&errs[k], &errs[k + 1]) else { break };
        if e0.norm() > 100.0 * 0.01 {
            let ratio = e1.norm() / e0.norm();
            assert!((ratio / 5.0 - 1.0).abs() < 0.01, "k = {k}: ratio {ratio}");
            checked += 1;
        }
    }
    assert!(checked >= 5, "only {checked} steps checked");
}

#[test]
fn secrecy_holds_for_the_first_group() {
    let mut s = preset("three-tank-groupA1").unwrap();
    s.trials = 50;
    let r = run_monte_carlo(&s).unwrap();
    let rep = secrecy_report(&r, r.bound.as_ref().unwrap(), &s.codec);
    assert!(rep.legitimate_bounded.pass, "{}", rep.legitimate_bounded.detail);
    assert!(rep.eavesdropper_diverges.pass, "{}", rep.eavesdropper_diverges.detail);
    assert!(rep.secrecy());
}

#[test]
fn contracting_codec_gives_no_divergence() {
    let mut s = preset("three-tank").unwrap();
    s.codec = CodecParams::new(vec![0.5; 3], vec![0.01; 3], 1.0).unwrap();
    s.trials = 50;
    s.horizon = 200;
    let r = run_monte_carlo(&s).unwrap();
    let rep = secrecy_report(&r, r.bound.as_ref().unwrap(), &s.codec);
    assert!(!rep.eavesdropper_diverges.pass);
    assert!(!rep.secrecy());
}

#[test]
fn open_transmission_is_bounded_but_not_secret() {
    let mut s = preset("three-tank").unwrap();
    s.codec = CodecParams::new(vec![1.0; 3], vec![0.01; 3], 1.0).unwrap().transparent();
    s.channels = ppfe::channel::ChannelModel::new(vec![1.0; 3], vec![1.0; 3]).unwrap();
    s.trials = 50;
    s.horizon = 200;
    let r = run_monte_carlo(&s).unwrap();
    let rep = secrecy_report(&r, r.bound.as_ref().unwrap(), &s.codec);
    assert!(rep.legitimate_bounded.pass, "{}", rep.legitimate_bounded.detail);
    assert!(!rep.eavesdropper_diverges.pass);
}
