mod common;

use common::oracle::{self, Instance};
use isac_core::sim::trial_rng;
use isac_core::transceiver::{
    self, achieved_dg, kkt_residual, total_mse, waterfill_dg, waterfill_mse,
};
use isac_core::{ChannelRealization, Criterion, Error, TransceiverDesign};
use proptest::prelude::*;

fn solve(criterion: Criterion, inst: &Instance) -> (ChannelRealization, TransceiverDesign) {
    let ch = ChannelRealization::new(inst.gains.clone(), inst.noise).unwrap();
    let d = transceiver::design(
        criterion,
        &ch,
        &inst.second_moments,
        &inst.variances,
        &inst.gaps,
        inst.power,
    )
    .unwrap();
    (ch, d)
}

#[test]
fn matches_projected_gradient_on_random_instances() {
    for k in 0..25 {
        let inst = oracle::random_instance(&mut trial_rng(2024, k), 8);
        for criterion in Criterion::ALL {
            let (_, d) = solve(criterion, &inst);
            let ours = oracle::utility_of_precoders(criterion, &inst, &d.precoders);
            let reference = oracle::utility_of_precoders(
                criterion,
                &inst,
                &oracle::projected_gradient(criterion, &inst),
            );
            let rel = (ours - reference).abs() / reference.abs();
            assert!(
                rel < 1e-5,
                "instance {k} {criterion}: {ours} vs {reference}"
            );
            // the oracle is a feasible point, so it cannot beat the optimum
            assert!(ours >= reference - 1e-9 * reference.abs());
        }
    }
}

#[test]
fn simplex_projection_oracle_is_sound() {
    let p = oracle::project_simplex(&[0.5, 2.0, -1.0], 1.0);
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    assert_eq!(p, vec![0.0, 1.0, 0.0]);
    let p = oracle::project_simplex(&[0.2, 0.3], 1.0);
    assert!((p[0] - 0.45).abs() < 1e-15 && (p[1] - 0.55).abs() < 1e-15);
}

#[test]
fn each_design_wins_its_own_objective() {
    for k in 0..50 {
        let inst = oracle::random_instance(&mut trial_rng(77, k), 8);
        let (ch, mse) = solve(Criterion::Mse, &inst);
        let (_, dg) = solve(Criterion::Dg, &inst);
        let dg_of = |d: &TransceiverDesign| {
            achieved_dg(d, &ch, &inst.variances, &inst.gaps)
                .unwrap()
                .total
        };
        assert!(dg_of(&dg) >= dg_of(&mse) * (1.0 - 1e-12));
        assert!(
            total_mse(&mse, &ch, &inst.variances)
                <= total_mse(&dg, &ch, &inst.variances) * (1.0 + 1e-12)
        );
    }
}

#[test]
fn dead_channel_reports_error() {
    let ch = ChannelRealization::new(vec![0.0, 1e-13], 0.1).unwrap();
    let err = waterfill_mse(&ch, &[1.0, 1.0], &[1.0, 1.0], 1.0).unwrap_err();
    assert!(matches!(err, Error::DeadChannel { .. }));
    assert!(!err.is_numerical());
}

#[test]
fn mismatched_lengths_are_rejected() {
    let ch = ChannelRealization::new(vec![1.0, 1.0], 0.1).unwrap();
    assert!(waterfill_dg(&ch, &[1.0], &[1.0, 1.0], &[1.0, 1.0], 1.0).is_err());
    assert!(waterfill_dg(&ch, &[1.0, 1.0], &[1.0, 1.0], &[1.0], 1.0).is_err());
}

#[test]
fn extreme_dynamic_range_still_spends_budget() {
    let ch = ChannelRealization::new(vec![1e-6, 1.0, 1e4], 1e-8).unwrap();
    for power in [1e-9, 1.0, 1e9] {
        let d = waterfill_dg(
            &ch,
            &[1.0, 2.0, 3.0],
            &[0.5, 1.0, 2.0],
            &[1.0, 3.0, 0.1],
            power,
        )
        .unwrap();
        let spent = d.transmit_power(&[1.0, 2.0, 3.0]);
        assert!((spent - power).abs() <= 1e-9 * power, "{spent} vs {power}");
    }
}

fn instance_strategy() -> impl Strategy<Value = Instance> {
    let n = 1usize..10;
    n.prop_flat_map(|n| {
        (
            prop::collection::vec(0.01f64..5.0, n),
            prop::collection::vec(0.05f64..5.0, n),
            prop::collection::vec(0.0f64..5.0, n),
            prop::collection::vec(0.0f64..3.0, n),
            1e-3f64..2.0,
            1e-2f64..100.0,
        )
    })
    .prop_map(|(gains, variances, gaps, extra, noise, power)| {
        let second_moments = variances.iter().zip(&extra).map(|(v, e)| v + e).collect();
        Instance {
            gains,
            noise,
            second_moments,
            variances,
            gaps,
            power,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn designs_spend_the_budget_and_satisfy_kkt(inst in instance_strategy()) {
        for criterion in Criterion::ALL {
            let (ch, d) = solve(criterion, &inst);
            prop_assert!(d.precoders.iter().all(|&b| b >= 0.0 && b.is_finite()));
            prop_assert!(d.scalings.iter().all(|&a| a >= 0.0 && a.is_finite()));
            if criterion == Criterion::Dg && inst.gaps.iter().all(|&g| g == 0.0) {
                continue;
            }
            let spent = d.transmit_power(&inst.second_moments);
            prop_assert!((spent - inst.power).abs() <= 1e-9 * inst.power);
            let kkt = kkt_residual(&d, &ch, &inst.second_moments, &inst.variances, &inst.gaps);
            prop_assert!(kkt < 1e-6, "kkt residual {}", kkt);
        }
    }

    #[test]
    fn more_power_never_hurts(inst in instance_strategy(), factor in 1.0f64..10.0) {
        let mut richer = inst.clone();
        richer.power *= factor;
        let (ch, lo) = solve(Criterion::Dg, &inst);
        let (_, hi) = solve(Criterion::Dg, &richer);
        let dg = |d: &TransceiverDesign| achieved_dg(d, &ch, &inst.variances, &inst.gaps).unwrap().total;
        prop_assert!(dg(&hi) >= dg(&lo) * (1.0 - 1e-9));
        let (_, lo) = solve(Criterion::Mse, &inst);
        let (_, hi) = solve(Criterion::Mse, &richer);
        prop_assert!(total_mse(&hi, &ch, &inst.variances) <= total_mse(&lo, &ch, &inst.variances) * (1.0 + 1e-9));
    }

    #[test]
    fn scaling_gains_and_noise_together_is_invariant(inst in instance_strategy(), c in 0.1f64..10.0) {
        // |h|^2 and sigma_w^2 scaled by the same factor leave the problem unchanged
        let mut scaled = inst.clone();
        scaled.gains.iter_mut().for_each(|h| *h *= c.sqrt());
        scaled.noise *= c;
        for criterion in Criterion::ALL {
            let (_, a) = solve(criterion, &inst);
            let (_, b) = solve(criterion, &scaled);
            for (x, y) in a.precoders.iter().zip(&b.precoders) {
                prop_assert!((x - y).abs() <= 1e-6 * (1.0 + x.abs()));
            }
        }
    }
}
