mod common;

use common::*;
use irshp::alamouti::{effective_channel, optimal_precoder, PhaseConfig};
use irshp::hybrid::{
    analog_coordinate_update, analog_objective, build_lift, digital_update, normalize_beta,
    run_second_subproblem, solve_sdr_analog, AnalogInit, HybridSettings,
};
use irshp::joint::alternating_start;
use irshp::linalg::{frob, frob_sq, unit_phases, HermitianEigen};
use irshp::CMat;
use nalgebra::Complex;
use proptest::prelude::*;
use rand::Rng;

fn random_analog(r: &mut impl Rng, m: usize, n: usize) -> CMat {
    CMat::from_fn(m, n, |_, _| {
        let t = r.random_range(0.0..std::f64::consts::TAU);
        Complex::new(t.cos(), t.sin())
    })
}

fn unit_power(f: CMat) -> CMat {
    let p = frob_sq(&f);
    f.scale((2.0 / p).sqrt())
}

#[test]
fn exact_fit_and_normal_equations() {
    let mut r = rng(1);
    let f_rf = random_analog(&mut r, 8, 3);
    let c = random_matrix(&mut r, 3, 2);
    let bb = digital_update(&f_rf, &(&f_rf * &c)).unwrap();
    assert!(max_abs_diff(&bb, &c) < 1e-10);
    let f = random_matrix(&mut r, 8, 2);
    let bb = digital_update(&f_rf, &f).unwrap();
    let resid = f_rf.adjoint() * (&f - &f_rf * &bb);
    assert!(frob(&resid) < 1e-10 * frob(&f));
}

#[test]
fn analog_objective_is_shifted_residual() {
    let mut r = rng(2);
    for _ in 0..20 {
        let f_rf = random_analog(&mut r, 6, 2);
        let bb = random_matrix(&mut r, 2, 2);
        let f = random_matrix(&mut r, 6, 2);
        let lhs = analog_objective(&f_rf, &bb, &f);
        let rhs = frob_sq(&(&f - &f_rf * &bb)) - frob_sq(&f);
        assert!((lhs - rhs).abs() < 1e-10 * (1.0 + rhs.abs()));
    }
}

#[test]
fn lift_reproduces_objective() {
    let mut r = rng(3);
    let (m, n_rf) = (6, 3);
    let bb = random_matrix(&mut r, n_rf, 2);
    let f = random_matrix(&mut r, m, 2);
    let lift = build_lift(&bb, &f, m).unwrap();
    for _ in 0..50 {
        let f_rf = random_analog(&mut r, m, n_rf);
        let x = lift.lift_x(&f_rf).unwrap();
        let obj = analog_objective(&f_rf, &bb, &f);
        // the trace form carries an overall 1/M against the residual form
        let t = lift.value(&x) * m as f64;
        assert!((t - obj).abs() < 1e-10 * (1.0 + obj.abs()), "{t} vs {obj}");
        for i in 0..m + n_rf {
            assert!((x[(i, i)].re - 1.0).abs() < 1e-12);
        }
        let lo = *HermitianEigen::new(&x).values.as_slice().last().unwrap();
        assert!(lo > -1e-10);
        let block = x.view((n_rf, 0), (m, n_rf));
        assert!(block.iter().all(|z| (z.norm() - 1.0 / (m as f64).sqrt()).abs() < 1e-12));
    }
}

#[test]
fn coordinate_sweeps_descend_and_fix() {
    let mut r = rng(4);
    let f = random_matrix(&mut r, 8, 2);
    let mut f_rf = random_analog(&mut r, 8, 3);
    let bb = digital_update(&f_rf, &f).unwrap();
    let mut prev = analog_objective(&f_rf, &bb, &f);
    for _ in 0..200 {
        f_rf = analog_coordinate_update(&f_rf, &bb, &f).unwrap();
        let now = analog_objective(&f_rf, &bb, &f);
        assert!(now <= prev + 1e-10 * prev.abs().max(1.0));
        prev = now;
    }
    let again = analog_coordinate_update(&f_rf, &bb, &f).unwrap();
    assert!(max_abs_diff(&again, &f_rf) < 1e-8);
    assert!(f_rf.iter().all(|z| (z.norm() - 1.0).abs() < 1e-10));
}

/// One RF chain, one stream: the analog vector must carry the phases of `f`;
/// checked against a 1-degree grid with the first entry pinned (the common
/// phase is absorbed by the digital gain).
#[test]
fn single_chain_matches_phase_grid() {
    let mut r = rng(5);
    let f = random_matrix(&mut r, 3, 1);
    let settings = HybridSettings::default();
    let (set, _) = run_second_subproblem(&unit_power_one(&f), 1, &settings).unwrap();
    let ours = frob_sq(&(&unit_power_one(&f) - set.product()));
    let mut best = f64::INFINITY;
    for a in 0..360 {
        for b in 0..360 {
            let (ta, tb) = ((a as f64).to_radians(), (b as f64).to_radians());
            let v = CMat::from_column_slice(
                3,
                1,
                &[Complex::new(1.0, 0.0), Complex::new(ta.cos(), ta.sin()), Complex::new(tb.cos(), tb.sin())],
            );
            let bb = digital_update(&v, &unit_power_one(&f)).unwrap();
            let (_, fbb) = normalize_beta(&v, &bb).unwrap();
            best = best.min(frob_sq(&(&unit_power_one(&f) - &v * fbb)));
        }
    }
    assert!(ours <= best + 1e-6, "{ours} vs grid {best}");
    let expect = unit_phases(&f.column(0).into_owned());
    let rot = expect[0] / set.f_rf[(0, 0)];
    for i in 0..3 {
        assert!((set.f_rf[(i, 0)] * rot - expect[i]).norm() < 1e-6);
    }
}

fn unit_power_one(f: &CMat) -> CMat {
    f.scale((2.0 / frob_sq(f)).sqrt())
}

#[test]
fn planted_square_factorization_is_exact() {
    let mut r = rng(6);
    for _ in 0..10 {
        let f_rf = random_analog(&mut r, 4, 4);
        let f = unit_power(&f_rf * random_matrix(&mut r, 4, 2));
        let (set, rep) = run_second_subproblem(&f, 4, &HybridSettings::default()).unwrap();
        assert!(rep.residual < 1e-6);
        assert!((frob_sq(&set.product()) - 2.0).abs() < 1e-8);
    }
}

#[test]
fn sdr_initialized_tiny_case_matches_grid() {
    let mut r = rng(7);
    let settings = HybridSettings {
        init: AnalogInit::Sdr,
        ..HybridSettings::default()
    };
    for _ in 0..5 {
        let f = unit_power(random_analog(&mut r, 2, 2) * random_matrix(&mut r, 2, 2));
        let (set, rep) = run_second_subproblem(&f, 2, &settings).unwrap();
        assert!(!rep.sdr_fallback);
        assert!(rep.residual < 1e-3);
        let bb = digital_update(&set.f_rf, &f).unwrap();
        let ours = analog_objective(&set.f_rf, &bb, &f);
        let step = std::f64::consts::TAU / 64.0;
        let mut best = f64::INFINITY;
        for a in 0..64 {
            for b in 0..64 {
                let (ta, tb) = (a as f64 * step, b as f64 * step);
                let g = CMat::from_row_slice(
                    2,
                    2,
                    &[1.0.into(), 1.0.into(), Complex::new(ta.cos(), ta.sin()), Complex::new(tb.cos(), tb.sin())],
                );
                if let Ok(bb) = digital_update(&g, &f) {
                    best = best.min(analog_objective(&g, &bb, &f));
                }
            }
        }
        assert!(ours <= best + 0.01 * best.abs(), "{ours} vs {best}");
    }
}

#[test]
fn sdr_output_is_unit_modulus() {
    let mut r = rng(8);
    let f = unit_power(random_matrix(&mut r, 6, 2));
    let f_rf0 = random_analog(&mut r, 6, 2);
    let bb = digital_update(&f_rf0, &f).unwrap();
    let lift = build_lift(&bb, &f, 6).unwrap();
    let (f_rf, _) = solve_sdr_analog(&lift, &Default::default()).unwrap();
    assert!(f_rf.iter().all(|z| (z.norm() - 1.0).abs() < 1e-10));
}

#[test]
fn hybrid_never_beats_fully_digital() {
    for seed in 0..5 {
        let ch = table1_channels(seed);
        let (p, _) = alternating_start(&ch, 100, 1e-10).unwrap();
        let (f, g_fd) = optimal_precoder(&ch, &p).unwrap();
        let (set, rep) = run_second_subproblem(&f, 2, &HybridSettings::default()).unwrap();
        let g_hp = frob_sq(&effective_channel(&ch, &p, &set.product()).unwrap());
        assert!(g_hp <= g_fd * (1.0 + 1e-9));
        assert!(rep.unit_modulus_violation < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ao_residual_is_monotone(seed in 0u64..10_000, m in 3usize..9, n_rf in 1usize..4) {
        prop_assume!(n_rf <= m);
        let mut r = rng(seed);
        let f = unit_power(random_matrix(&mut r, m, 2));
        let (set, rep) = run_second_subproblem(&f, n_rf, &HybridSettings::default()).unwrap();
        for w in rep.residual_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9);
        }
        prop_assert!((frob_sq(&set.product()) - 2.0).abs() < 1e-8);
        prop_assert!(rep.unit_modulus_violation < 1e-10);
    }

    #[test]
    fn beta_normalizes_power(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let f_rf = random_analog(&mut r, 5, 2);
        let bb = random_matrix(&mut r, 2, 2);
        let (_, fbb) = normalize_beta(&f_rf, &bb).unwrap();
        prop_assert!((frob_sq(&(&f_rf * fbb)) - 2.0).abs() < 1e-12);
    }
}

#[test]
fn phases_reach_effective_channel() {
    let ch = table1_channels(9);
    let p = PhaseConfig::ones(ch.r1(), ch.r2());
    let (f, g) = optimal_precoder(&ch, &p).unwrap();
    assert!((frob_sq(&effective_channel(&ch, &p, &f).unwrap()) - g).abs() < 1e-9 * g);
}
