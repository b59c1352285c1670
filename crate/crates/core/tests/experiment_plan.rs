use nvdnp::dnp::{dnp_spectrum, simulate_buildup, DnpSpectrum, SampleParams};
use nvdnp::plan::{
    compile_timeline, execute_plan, parse_plan, sweep_frequencies, Channel, CompileDefaults,
    Duration, Event, FreqUnit, Frequency, Payload, Phase, PhysicsConfig, PlanAst, Stmt, TimeUnit,
    Timeline,
};
use nvdnp::spectra::{Enrichment, GridPolicy, LineshapeParams, OdmrModel};
use nvdnp::spin::{Branch, HyperfineTensor, NvParameters};
use nvdnp::Error;
use proptest::prelude::*;

fn sample() -> SampleParams {
    SampleParams {
        label: "test".into(),
        enrichment: 0.011,
        t_dnp_s: 22.34,
        t1n_s: 13.08,
        enhancement: 1264.0,
        field_t: 0.472,
        mass_mg: None,
        enhancement_bounds: None,
        printed_p_enh_percent: None,
        t2_pair_ms: None,
        correction_factor: None,
        small_flip_deg: None,
        recovery_time_s: None,
    }
}

fn pump_profile() -> DnpSpectrum {
    let nv = NvParameters::default();
    let tensors: Vec<_> = (0..3).map(|s| HyperfineTensor::first_shell_site(199.7, 120.3, s).unwrap()).collect();
    let model = OdmrModel::new(nv, &tensors, Branch::Plus).unwrap();
    let grid = model.auto_grid(60.0, 0.25).unwrap();
    let odmr = model
        .spectrum(Enrichment::new(0.011).unwrap(), &LineshapeParams::default(), &grid, &GridPolicy::default())
        .unwrap();
    dnp_spectrum(&odmr.grid, nv.nuclear_larmor_mhz(), 1.0).unwrap()
}

fn physics() -> PhysicsConfig {
    PhysicsConfig::for_sample(&sample(), pump_profile(), 8.085e-7)
}

fn peak_frequency(s: &DnpSpectrum) -> f64 {
    let i = s.signal.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    s.mw_frequencies_ghz[i]
}

fn cw_plan(f_ghz: f64, wait_s: f64) -> String {
    format!("laser on\nmw on {f_ghz}GHz\nsaturate 8\nwait {wait_s}s\npulse 90 x\nacquire 32 0.5us\n")
}

#[test]
fn parse_examples() {
    let ast = parse_plan("saturate 8\nwait 60s\npulse 90 x\nacquire 32 0.5us").unwrap();
    assert_eq!(ast.stmts.len(), 4);
    match parse_plan("pulze 90 x") {
        Err(Error::Parse { line: 1, message, .. }) => assert!(message.contains("pulze")),
        other => panic!("{other:?}"),
    }
    let nested = parse_plan("loop 2 {\n  loop 3 { pulse 90 y; wait 40us }\n}\n").unwrap();
    assert_eq!(nested.stmts.len(), 1);
    assert!(matches!(parse_plan("pulse 360 x"), Err(Error::Parse { .. })));
    assert!(matches!(parse_plan("pulse 90 z"), Err(Error::Parse { .. })));
    assert!(matches!(parse_plan("mw on 16.1THz"), Err(Error::Parse { .. })));
    assert!(matches!(parse_plan("saturate 2.5"), Err(Error::Parse { .. })));
}

#[test]
fn example_plans_parse() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../plans");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "plan") {
            let text = std::fs::read_to_string(&path).unwrap();
            let ast = parse_plan(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert_eq!(parse_plan(&ast.to_string()).unwrap(), ast);
            n += 1;
        }
    }
    assert!(n >= 2);
}

fn positive() -> impl Strategy<Value = f64> {
    prop_oneof![
        (1u32..100_000).prop_map(|v| f64::from(v) / 100.0),
        1e-9f64..1e6,
    ]
}

fn leaf() -> impl Strategy<Value = Stmt> {
    let unit = prop_oneof![Just(TimeUnit::S), Just(TimeUnit::Ms), Just(TimeUnit::Us)];
    let funit = prop_oneof![Just(FreqUnit::GHz), Just(FreqUnit::MHz)];
    let phase = prop_oneof![Just(Phase::X), Just(Phase::Y), Just(Phase::MinusX), Just(Phase::MinusY)];
    prop_oneof![
        (1u32..20).prop_map(Stmt::Saturate),
        (positive(), unit.clone()).prop_map(|(v, u)| Stmt::Wait(Duration::new(v, u))),
        (positive(), funit).prop_map(|(v, u)| Stmt::MwOn(Frequency::new(v, u))),
        Just(Stmt::MwOff),
        Just(Stmt::LaserOn),
        Just(Stmt::LaserOff),
        ((1e-6f64..359.999), phase).prop_map(|(a, p)| Stmt::Pulse { angle_deg: a, phase: p }),
        (1u32..4096, positive(), unit).prop_map(|(n, v, u)| Stmt::Acquire { n_points: n, dwell: Duration::new(v, u) }),
    ]
}

fn stmt() -> impl Strategy<Value = Stmt> {
    leaf().prop_recursive(3, 24, 6, |inner| {
        (1u32..6, prop::collection::vec(inner, 0..6)).prop_map(|(count, body)| Stmt::Loop { count, body })
    })
}

fn plan() -> impl Strategy<Value = PlanAst> {
    prop::collection::vec(stmt(), 0..12).prop_map(|stmts| PlanAst { stmts })
}

/// Independent sum of statement durations.
fn nominal_duration(stmts: &[Stmt], d: &CompileDefaults) -> f64 {
    stmts
        .iter()
        .map(|s| match s {
            Stmt::Saturate(n) => f64::from(*n) * d.saturation_spacing_s,
            Stmt::Wait(w) => w.seconds(),
            Stmt::Pulse { .. } => d.pulse_length_s,
            Stmt::Acquire { n_points, dwell } => f64::from(*n_points) * dwell.seconds(),
            Stmt::Loop { count, body } => f64::from(*count) * nominal_duration(body, d),
            _ => 0.0,
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn print_parse_round_trip(ast in plan()) {
        let text = ast.to_string();
        let back = parse_plan(&text).unwrap();
        prop_assert_eq!(&back, &ast);
        prop_assert_eq!(back.to_string(), text);
    }

    #[test]
    fn duration_is_additive(ast in plan()) {
        let d = CompileDefaults { pulse_length_s: 2e-6, ..CompileDefaults::default() };
        let t = compile_timeline(&ast, &d).unwrap();
        let want = nominal_duration(&ast.stmts, &d);
        prop_assert!((t.duration_s - want).abs() <= 1e-12 * want.max(f64::MIN_POSITIVE));
        prop_assert!(t.events.windows(2).all(|w| w[0].t_start_s <= w[1].t_start_s));
    }
}

#[test]
fn empty_plan() {
    let t = compile_timeline(&parse_plan("# nothing\n").unwrap(), &CompileDefaults::default()).unwrap();
    assert!(t.events.is_empty());
    assert_eq!(t.duration_s, 0.0);
}

#[test]
fn loop_unrolling() {
    let t = compile_timeline(&parse_plan("loop 4 { pulse 90 y; wait 40us }").unwrap(), &CompileDefaults::default())
        .unwrap();
    assert_eq!(t.events.len(), 8);
    let pulses: Vec<f64> = t.events_on(Channel::Rf).map(|e| e.t_start_s).collect();
    assert_eq!(pulses.len(), 4);
    for w in pulses.windows(2) {
        assert!((w[1] - w[0] - 40e-6).abs() < 1e-15);
    }
    assert!((t.duration_s - 160e-6).abs() < 1e-15);
}

#[test]
fn cw_plan_keeps_microwave_on_during_wait() {
    let t = compile_timeline(&parse_plan(&cw_plan(16.1, 60.0)).unwrap(), &CompileDefaults::default()).unwrap();
    let wait = t.events_on(Channel::Delay).next().unwrap();
    let mw = t.mw_intervals();
    assert_eq!(mw.len(), 1);
    assert!(mw[0].0 <= wait.t_start_s && mw[0].1 >= wait.t_end_s());
    assert_eq!(mw[0].2, 16.1);
    let json = t.to_json().unwrap();
    let back: Timeline = serde_json::from_str(&json).unwrap();
    assert_eq!(back, t);
}

#[test]
fn overlapping_events_are_reported() {
    let pulse = |t: f64| Event {
        t_start_s: t,
        duration_s: 2e-6,
        channel: Channel::Rf,
        payload: Payload::Pulse { angle_deg: 90.0, phase: Phase::X, saturation: false },
    };
    let t = Timeline { events: vec![pulse(0.0), pulse(1e-6)], duration_s: 3e-6 };
    match t.validate() {
        Err(Error::Compile(m)) => assert!(m.contains("event 0") && m.contains("event 1"), "{m}"),
        other => panic!("{other:?}"),
    }
    let acq = Event {
        t_start_s: 1e-6,
        duration_s: 1e-5,
        channel: Channel::Acq,
        payload: Payload::Acquire { n_points: 10, dwell_s: 1e-6, index: 0 },
    };
    let t = Timeline { events: vec![pulse(0.0), acq], duration_s: 2e-5 };
    assert!(matches!(t.validate(), Err(Error::Compile(_))));
    let bad = CompileDefaults { pulse_length_s: 0.1, saturation_spacing_s: 0.01 };
    assert!(compile_timeline(&parse_plan("saturate 2").unwrap(), &bad).is_err());
}

#[test]
fn saturate_then_acquire_is_silent() {
    let t = compile_timeline(&parse_plan("saturate 8\nacquire 32 0.5us").unwrap(), &CompileDefaults::default())
        .unwrap();
    let mut ph = physics();
    ph.noise_sigma = 1e-3;
    let run = execute_plan(&t, &sample(), &ph, 1).unwrap();
    assert_eq!(run.acquisitions.len(), 1);
    assert_eq!(run.acquisitions[0].amplitude, 0.0);
    assert!(!run.warnings.is_empty());
    let fid = &run.acquisitions[0].fid;
    let rms = (fid.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / (2.0 * fid.len() as f64)).sqrt();
    assert!(rms > 0.0 && rms < 3e-3);
}

#[test]
fn plan_without_acquisition_warns() {
    let t = compile_timeline(&parse_plan("wait 1s").unwrap(), &CompileDefaults::default()).unwrap();
    let run = execute_plan(&t, &sample(), &physics(), 0).unwrap();
    assert!(run.acquisitions.is_empty() && !run.warnings.is_empty());
}

#[test]
fn four_time_constants_reach_expected_fraction() {
    let ph = physics();
    let f = peak_frequency(&ph.pump_profile);
    let s = sample();
    let t = compile_timeline(&parse_plan(&cw_plan(f, 4.0 * s.t_dnp_s)).unwrap(), &CompileDefaults::default()).unwrap();
    let run = execute_plan(&t, &s, &ph, 0).unwrap();
    let frac = run.acquisitions[0].amplitude / ph.pump_target(f);
    assert!((frac - (1.0 - (-4.0f64).exp())).abs() < 1e-4, "{frac}");
}

#[test]
fn executor_matches_buildup_simulation() {
    let ph = physics();
    let f = peak_frequency(&ph.pump_profile);
    let s = sample();
    let d = CompileDefaults::default();
    let waits = [1.0, 5.0, 10.0, 30.0, 80.0];
    let times: Vec<f64> = waits.iter().map(|w| w + d.saturation_spacing_s).collect();
    let reference = simulate_buildup(s.t_dnp_s, ph.pump_target(f), &times, 0.0, 0).unwrap();
    for (w, want) in waits.iter().zip(&reference.polarization) {
        let t = compile_timeline(&parse_plan(&cw_plan(f, *w)).unwrap(), &d).unwrap();
        let got = execute_plan(&t, &s, &ph, 0).unwrap().acquisitions[0].amplitude;
        assert!((got - want).abs() <= 1e-9 * want.abs(), "{got} vs {want}");
    }
}

#[test]
fn repeated_saturation_is_idempotent() {
    let ph = physics();
    let f = peak_frequency(&ph.pump_profile);
    let once = cw_plan(f, 20.0);
    let twice = once.replace("saturate 8\n", "saturate 8\nsaturate 8\n");
    let d = CompileDefaults::default();
    let a = execute_plan(&compile_timeline(&parse_plan(&once).unwrap(), &d).unwrap(), &sample(), &ph, 3).unwrap();
    let b = execute_plan(&compile_timeline(&parse_plan(&twice).unwrap(), &d).unwrap(), &sample(), &ph, 3).unwrap();
    assert_eq!(a.acquisitions[0].amplitude, b.acquisitions[0].amplitude);
}

#[test]
fn sweep_reproduces_dnp_spectrum() {
    let ph = physics();
    let s = sample();
    let t = compile_timeline(&parse_plan(&cw_plan(16.0, 4.0 * s.t_dnp_s)).unwrap(), &CompileDefaults::default())
        .unwrap();
    let spec = &ph.pump_profile;
    let freqs: Vec<f64> = spec.mw_frequencies_ghz.iter().step_by(4).copied().collect();
    let runs = sweep_frequencies(&t, &s, &ph, &freqs, 11).unwrap();
    let amps: Vec<f64> = runs.iter().map(|r| r.acquisitions[0].amplitude).collect();
    let a_max = amps.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let s_max = spec.max_abs();
    for (f, a) in freqs.iter().zip(&amps) {
        let want = spec.interpolate(*f) / s_max;
        assert!((a / a_max - want).abs() < 0.01, "{f}: {} vs {want}", a / a_max);
    }
    // Sign of the response follows the DNP lobes.
    assert!(amps.iter().any(|a| *a < 0.0) && amps.iter().any(|a| *a > 0.0));
}

#[test]
fn sweep_is_deterministic() {
    let mut ph = physics();
    ph.noise_sigma = 1e-8;
    let t = compile_timeline(&parse_plan(&cw_plan(16.0, 10.0)).unwrap(), &CompileDefaults::default()).unwrap();
    let f = [16.09, 16.1, 16.11];
    let a = sweep_frequencies(&t, &sample(), &ph, &f, 5).unwrap();
    let b = sweep_frequencies(&t, &sample(), &ph, &f, 5).unwrap();
    assert_eq!(a, b);
    assert_ne!(a[0].acquisitions[0].fid, a[1].acquisitions[0].fid);
}
