mod common;

use cascade_restore::blur::BlurKernel1D;
use cascade_restore::solve::{schedule_for, smooth};
use cascade_restore::{cg_smooth, iteration_schedule, mr_smooth, ImageGrid, RmsScalar, Schedule, Smoother, StopReason};
use common::oracles::random_spd;
use common::{random_vec, rng, Dense};
use nalgebra::{DMatrix, DVector};

fn as_image(v: Vec<f64>) -> ImageGrid {
    ImageGrid::new(8, 8, v).unwrap()
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

#[test]
fn cg_on_identity_is_exact_in_one_step() {
    let mut r = rng(20);
    let id = BlurKernel1D::from_taps(8, vec![1.0]).unwrap();
    let rhs = as_image(random_vec(&mut r, 64));
    let out = cg_smooth(&id, &rhs, &ImageGrid::zeros(8, 8), RmsScalar::ZERO, 1.1, 10).unwrap();
    assert_eq!(out.iterations, 1);
    assert!(common::max_abs_diff(out.solution.data(), rhs.data()) < 1e-15);
    assert_eq!(out.residual_history.len(), 2);
}

#[test]
fn mr_on_scaled_identity_takes_half_steps() {
    let mut r = rng(21);
    let mut two = Dense::zeros(64);
    for i in 0..64 {
        two.set(i, i, 2.0);
    }
    let rhs = as_image(random_vec(&mut r, 64));
    let out = mr_smooth(&two, &rhs, &ImageGrid::zeros(8, 8), RmsScalar::ZERO, 1.1, 10).unwrap();
    assert_eq!(out.iterations, 1);
    for (u, b) in out.solution.data().iter().zip(rhs.data()) {
        assert!((u - 0.5 * b).abs() < 1e-14);
    }
    let constant = ImageGrid::filled(8, 8, 3.0);
    let id = BlurKernel1D::from_taps(8, vec![1.0]).unwrap();
    let out = mr_smooth(&id, &constant, &ImageGrid::zeros(8, 8), RmsScalar::ZERO, 1.1, 10).unwrap();
    assert_eq!((out.iterations, out.solution), (1, constant));
}

#[test]
fn cg_matches_a_direct_solve_on_spd_systems() {
    let mut r = rng(22);
    for _ in 0..20 {
        let a = random_spd(&mut r, 64);
        let b = random_vec(&mut r, 64);
        let rhs = as_image(b.clone());
        let out = cg_smooth(&a, &rhs, &ImageGrid::zeros(8, 8), RmsScalar::ZERO, 1.1, 64).unwrap();
        assert!(
            out.final_residual() <= 1e-10 * rms(&b),
            "residual {}",
            out.final_residual()
        );
        let direct = DMatrix::from_row_slice(64, 64, &a.a)
            .lu()
            .solve(&DVector::from_vec(b))
            .unwrap();
        let rel = common::rel_diff(out.solution.data(), direct.as_slice());
        assert!(rel <= 1e-8, "relative error {rel}");
        assert_eq!(out.residual_history.len(), out.iterations + 1);
    }
}

#[test]
fn mr_residuals_never_increase() {
    let mut r = rng(23);
    for _ in 0..20 {
        let a = random_spd(&mut r, 64);
        let rhs = as_image(random_vec(&mut r, 64));
        let out = mr_smooth(&a, &rhs, &ImageGrid::zeros(8, 8), RmsScalar::ZERO, 1.1, 100).unwrap();
        assert!(out.residual_history.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn discrepancy_stop_is_honoured() {
    let mut r = rng(24);
    for trial in 0..20 {
        let a = random_spd(&mut r, 64);
        let rhs = as_image(random_vec(&mut r, 64));
        let delta = RmsScalar::new(0.01 + 0.02 * trial as f64).unwrap();
        for smoother in [Smoother::Cg, Smoother::Mr] {
            let out = smooth(smoother, &a, &rhs, &ImageGrid::zeros(8, 8), delta, 1.1, 200).unwrap();
            match out.stop_reason {
                StopReason::Discrepancy => assert!(out.final_residual() <= 1.1 * delta.value()),
                other => panic!("{smoother:?} stopped by {other}"),
            }
            // the previous residual was still above the threshold
            if out.iterations > 0 {
                let prev = out.residual_history[out.iterations - 1];
                assert!(prev > 1.1 * delta.value());
            }
        }
    }
}

#[test]
fn already_converged_start_is_left_alone() {
    let id = BlurKernel1D::from_taps(8, vec![1.0]).unwrap();
    let rhs = ImageGrid::filled(8, 8, 1.0);
    let start = ImageGrid::filled(8, 8, 1.05);
    let delta = RmsScalar::new(0.05).unwrap();
    for smoother in [Smoother::Cg, Smoother::Mr] {
        let out = smooth(smoother, &id, &rhs, &start, delta, 1.1, 10).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.stop_reason, StopReason::Discrepancy);
        assert_eq!(out.solution, start);
    }
}

#[test]
fn budget_exhaustion_reports_the_cap() {
    let mut r = rng(25);
    let a = random_spd(&mut r, 64);
    let rhs = as_image(random_vec(&mut r, 64));
    let out = cg_smooth(&a, &rhs, &ImageGrid::zeros(8, 8), RmsScalar::ZERO, 1.1, 3).unwrap();
    assert_eq!((out.iterations, out.stop_reason), (3, StopReason::IterationCap));
}

#[test]
fn zero_operator_stagnates() {
    let zero = BlurKernel1D::from_taps(8, vec![0.0]).unwrap();
    let rhs = ImageGrid::filled(8, 8, 1.0);
    for smoother in [Smoother::Cg, Smoother::Mr] {
        let out = smooth(smoother, &zero, &rhs, &ImageGrid::zeros(8, 8), RmsScalar::ZERO, 1.1, 5).unwrap();
        assert_eq!((out.iterations, out.stop_reason), (0, StopReason::Stagnation));
    }
}

#[test]
fn histories_are_reproducible() {
    let mut r = rng(26);
    let a = random_spd(&mut r, 64);
    let rhs = as_image(random_vec(&mut r, 64));
    let run = || cg_smooth(&a, &rhs, &ImageGrid::zeros(8, 8), RmsScalar::ZERO, 1.1, 30).unwrap();
    let (x, y) = (run(), run());
    assert_eq!(x.residual_history, y.residual_history);
    assert_eq!(x.solution, y.solution);
}

#[test]
fn schedule_matches_golden_table() {
    let golden = include_str!("golden/schedule.txt");
    let mut seen = 0;
    for line in golden.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let (head, values) = line.split_once(':').unwrap();
        let levels: usize = head.trim_start_matches("L=").parse().unwrap();
        let want: Vec<usize> = values.split_whitespace().map(|v| v.parse().unwrap()).collect();
        assert_eq!(
            schedule_for(levels, &Schedule::default()).unwrap(),
            want,
            "L = {levels}"
        );
        seen += 1;
    }
    assert_eq!(seen, 5);
}

#[test]
fn schedule_finest_level_is_squared_gap() {
    for levels in 1..=10usize {
        let l0 = levels.div_ceil(2);
        let m = iteration_schedule(levels, levels, &Schedule::default()).unwrap();
        assert_eq!(m, ((levels - l0) * (levels - l0)).max(1));
    }
    assert!(iteration_schedule(4, 0, &Schedule::default()).is_err());
    assert!(iteration_schedule(4, 5, &Schedule::default()).is_err());
}
