//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fail.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use vo2_lif::circuit::{solve_operating_point, Branch};
use vo2_lif::device::{channel_thermal_step, threshold_voltage, Phase, SwitchParams, SwitchState};
use vo2_lif::engine::{firing_window, sweep_delta_t};
use vo2_lif::experiments::config::delay_grid;
use vo2_lif::experiments::output::render;
use vo2_lif::experiments::presets::PresetName;
use vo2_lif::experiments::{run_scenario, RunArtifact, ScenarioPreset};
use vo2_lif::thermal::{membrane_potential, pulse_response, EmissionRecord, ThermalKernel};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn within(name: &str, got: f64, want: f64, rel: f64) -> Check {
    let err = (got - want).abs() / want.abs();
    let line = format!("{name} {got:.6} vs {want:.6} (rel {err:.2e}, tol {rel:.0e})");
    if err <= rel {
        Ok(line)
    } else {
        Err(line)
    }
}

fn ensure(ok: bool, what: impl Into<String>) -> Check {
    let what = what.into();
    if ok {
        Ok(what)
    } else {
        Err(what)
    }
}

fn timed<T>(limit: Duration, f: impl FnOnce() -> T) -> (T, Check) {
    let start = Instant::now();
    let value = f();
    let took = start.elapsed();
    (value, ensure(took < limit, format!("{:.3} s < {:.1} s", took.as_secs_f64(), limit.as_secs_f64())))
}

fn preset(name: PresetName) -> RunArtifact {
    run_scenario(&ScenarioPreset::new(name)).unwrap()
}

fn scalar(a: &RunArtifact, key: &str) -> f64 {
    a.summary.get(key).unwrap_or(f64::NAN)
}

fn all(checks: Vec<Check>) -> Check {
    let mut lines = Vec::new();
    let mut ok = true;
    for c in checks {
        match c {
            Ok(l) => lines.push(l),
            Err(l) => {
                ok = false;
                lines.push(format!("!! {l}"));
            }
        }
    }
    let text = lines.join("; ");
    if ok {
        Ok(text)
    } else {
        Err(text)
    }
}

fn iv_curve() -> Check {
    let (a, t) = timed(Duration::from_millis(100), || preset(PresetName::IvCurve));
    all(vec![
        within("V_on", scalar(&a, "v_switch_on_V"), 5.0, 5e-3),
        within("V_off", scalar(&a, "v_switch_off_V"), 1.45, 5e-3),
        within("R_off", scalar(&a, "r_off_measured_ohm"), 57.6e3, 5e-3),
        within("R_on", scalar(&a, "r_on_measured_ohm"), 630.0, 5e-3),
        t,
    ])
}

fn threshold_law() -> Check {
    let p = SwitchParams::default();
    all(vec![
        within("V_th(310 K)", threshold_voltage(&p, 310.0).unwrap(), 2.5, 2e-2),
        ensure(threshold_voltage(&p, 340.0).unwrap() == 0.0, "V_th(340 K) = 0"),
    ])
}

fn operating_points() -> Check {
    let p = SwitchParams::default();
    let mut worst: f64 = 0.0;
    let mut stability_ok = true;
    for v_dd in [0.5, 1.8, 3.0, 5.9, 6.0, 12.0] {
        for r_s in [1.0, 500.0, 1e3, 5e3, 1e5] {
            for phase in [Phase::Insulating, Phase::Metallic] {
                let op = solve_operating_point(v_dd, r_s, phase, &p, 300.0).unwrap();
                let r_b = p.branch_resistance(phase);
                let i = v_dd / (r_s + r_b);
                worst = worst.max((op.i_sw - i).abs() / i).max((op.v_sw - i * r_b).abs() / (i * r_b));
                if phase == Phase::Insulating {
                    stability_ok &= op.branch == Branch::HighR && op.stable == (op.v_sw < 5.0);
                }
            }
        }
    }
    all(vec![
        ensure(worst <= 1e-9, format!("max relative error {worst:.2e} <= 1e-9")),
        ensure(stability_ok, "insulating point stable iff below threshold"),
    ])
}

fn thermal_ode() -> Check {
    let p = SwitchParams::default();
    let (power, amb, dt) = (8.5e-3, 305.0, 1e-9);
    let mut s = SwitchState::new(300.0);
    let t0 = s.channel_temp;
    let steady = amb + power / p.thermal_conductance;
    let mut worst: f64 = 0.0;
    for k in 1..=10_000 {
        s = channel_thermal_step(&s, power, amb, &p, dt);
        let exact = steady + (t0 - steady) * (-(k as f64) * dt / p.thermal_time_constant).exp();
        worst = worst.max((s.channel_temp - exact).abs() / exact);
    }
    ensure(worst <= 1e-9, format!("max relative error over 1e4 steps {worst:.2e} <= 1e-9"))
}

fn single_neuron_response() -> Check {
    let (a, ta) = timed(Duration::from_secs(5), || preset(PresetName::Fig4aSubthreshold));
    let (b, tb) = timed(Duration::from_secs(5), || preset(PresetName::Fig4bFire));
    all(vec![
        within("short pulse peak T_P", scalar(&a, "n3.peak_t_p_K"), 14.0, 0.10),
        ensure(scalar(&a, "n3.fired") == 0.0, "short pulse: no spike"),
        ensure(scalar(&b, "n3.fired") == 1.0, "long pulse: spike"),
        within("T_P at onset", scalar(&b, "n3.t_p_at_onset_K"), 17.0, 0.10),
        ta,
        tb,
    ])
}

fn summation() -> Check {
    let (c, tc) = timed(Duration::from_secs(30), || preset(PresetName::Fig4cSummation));
    let (s, ts) = timed(Duration::from_secs(30), || preset(PresetName::Fig5Sweep));
    let window = firing_window(&s.summary.sweep);
    all(vec![
        ensure(scalar(&c, "emitter_a_alone.fired") == 0.0, "emitter 1 alone: no spike"),
        ensure(scalar(&c, "emitter_b_alone.fired") == 0.0, "emitter 2 alone: no spike"),
        ensure(scalar(&c, "combined.fired") == 1.0, "combined: spike"),
        ensure(s.summary.sweep.len() == 40, format!("{} sweep points", s.summary.sweep.len())),
        ensure(
            window.is_some_and(|w| w.contiguous),
            match window {
                Some(w) => format!("window {:.0}..{:.0} ns, contiguous {}", w.start * 1e9, w.end * 1e9, w.contiguous),
                None => "no firing window".into(),
            },
        ),
        tc,
        ts,
    ])
}

fn window_asymmetry() -> Check {
    let s = preset(PresetName::Fig5Sweep);
    let Some(w) = firing_window(&s.summary.sweep) else {
        return Err("no firing window".into());
    };
    let lag = scalar(&s, "arrival_lag_difference_s");
    let step = 20e-9;

    let mut doc = PresetName::Fig5Sweep.document();
    doc.neurons.get_mut("n2").unwrap().x_um = 2.0;
    let base = doc.to_sim_config().unwrap();
    let offsets = delay_grid(-600.0, 600.0, 20.0).unwrap();
    let sym = sweep_delta_t(&base, &doc.sweep.unwrap().roles(), &offsets).unwrap();
    let sym_mid = firing_window(&sym).map_or(f64::NAN, |w| w.midpoint());

    all(vec![
        ensure(
            w.midpoint().signum() == -lag.signum(),
            format!("midpoint {:.0} ns opposite to lag difference {:.0} ns", w.midpoint() * 1e9, lag * 1e9),
        ),
        ensure(
            (w.midpoint() + lag).abs() <= 2.0 * step,
            format!("|midpoint + lag| = {:.1} ns <= 40 ns", (w.midpoint() + lag).abs() * 1e9),
        ),
        ensure(sym_mid.abs() <= step, format!("equal distances: midpoint {:.1} ns", sym_mid * 1e9)),
        ensure(
            (0.05e-6..=0.4e-6).contains(&w.span()),
            format!("span {:.3} us in [0.05, 0.4]", w.span() * 1e6),
        ),
    ])
}

fn kernel_properties() -> Check {
    let start = Instant::now();
    let kernel_s = (0.5f64..50.0, 0.2e-6f64..10e-6, 0.0f64..2e4, 10e-9f64..1e-6, 1.0f64..5.0).prop_map(
        |(wave_speed, decay_length, coupling_gain, rise_tau, ratio)| ThermalKernel {
            wave_speed,
            decay_length,
            coupling_gain,
            rise_tau,
            fall_tau: rise_tau * ratio,
        },
    );
    let emission = |id: &'static str| {
        (0.0f64..2e-6, prop::option::of(1e-9f64..2e-6), 0.0f64..2e-2).prop_map(move |(t_on, len, power_level)| {
            EmissionRecord {
                emitter_id: id.into(),
                t_on,
                t_off: len.map(|l| t_on + l),
                power_level,
            }
        })
    };
    let draw = (
        kernel_s,
        prop::collection::vec(emission("a"), 0..4),
        prop::collection::vec(emission("b"), 0..4),
        0.0f64..5e-6,
        0.1e-6f64..20e-6,
        0.0f64..1.0,
    );
    let d = BTreeMap::from([("a".to_string(), 1.5e-6), ("b".to_string(), 2.5e-6)]);
    let mut runner = TestRunner::new_with_rng(
        Config { cases: 1000, failure_persistence: None, ..Config::default() },
        proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    );
    let result = runner.run(&draw, |(kernel, a, b, t, r, frac)| {
        let both: Vec<_> = a.iter().chain(&b).cloned().collect();
        let whole = membrane_potential(&kernel, &both, &d, t).unwrap();
        let parts = membrane_potential(&kernel, &a, &d, t).unwrap() + membrane_potential(&kernel, &b, &d, t).unwrap();
        prop_assert!((whole - parts).abs() <= 4.0 * f64::EPSILON * whole.abs().max(1e-300));
        for e in &both {
            let early = (e.t_on + r / kernel.wave_speed) * frac;
            prop_assert_eq!(pulse_response(&kernel, e, r, early).unwrap(), 0.0);
        }
        Ok(())
    });
    let took = start.elapsed();
    all(vec![
        ensure(result.is_ok(), format!("superposition and causality over 1000 draws {result:?}")),
        ensure(took < Duration::from_secs(1), format!("{:.3} s < 1 s", took.as_secs_f64())),
    ])
}

fn oscillation() -> Check {
    let (a, t) = timed(Duration::from_secs(5), || preset(PresetName::Oscillation));
    let count = scalar(&a, "n1.spike_count");
    let cv = scalar(&a, "n1.interval_cv");
    all(vec![
        ensure(scalar(&a, "n1.oscillation_regime") == 1.0, "no stable branch"),
        ensure(count >= 3.0, format!("{count} spikes >= 3")),
        ensure(cv < 0.01, format!("interval CV {cv:.2e} < 1%")),
        t,
    ])
}

fn byte_stability() -> Check {
    let mut differing = Vec::new();
    for name in PresetName::ALL {
        if render(&preset(name)) != render(&preset(name)) {
            differing.push(name.as_str());
        }
    }
    ensure(differing.is_empty(), format!("all {} presets identical across runs {differing:?}", PresetName::ALL.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("I-V curve", iv_curve),
        ("threshold law", threshold_law),
        ("operating points", operating_points),
        ("channel thermal step", thermal_ode),
        ("single-neuron response", single_neuron_response),
        ("spatiotemporal summation", summation),
        ("window asymmetry", window_asymmetry),
        ("kernel superposition and causality", kernel_properties),
        ("oscillation", oscillation),
        ("byte-stable output", byte_stability),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
