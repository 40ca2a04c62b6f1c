use proptest::prelude::*;
use sraf::metrics::{average_traces, first_crossing, nmsd, steady_state, NmsdTrace};

fn nonzero_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, len)
        .prop_filter("non-zero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-6)
}

proptest! {
    #[test]
    fn nmsd_ignores_common_scaling(w_o in nonzero_vec(12), w in prop::collection::vec(-10.0f64..10.0, 12), c in 0.01f64..100.0) {
        let scaled_o: Vec<f64> = w_o.iter().map(|x| c * x).collect();
        let scaled: Vec<f64> = w.iter().map(|x| c * x).collect();
        let a = nmsd(&w_o, &w).unwrap();
        let b = nmsd(&scaled_o, &scaled).unwrap();
        prop_assert!((a - b).abs() < 1e-9 || (a <= -300.0 && b <= -300.0));
    }

    #[test]
    fn nmsd_is_bounded(w_o in nonzero_vec(6), w in prop::collection::vec(-1e6f64..1e6, 6)) {
        let v = nmsd(&w_o, &w).unwrap();
        prop_assert!((-400.0..=400.0).contains(&v));
        prop_assert_eq!(nmsd(&w_o, &[0.0; 6]).unwrap(), 0.0);
    }

    #[test]
    fn averaging_ignores_run_order(
        runs in prop::collection::vec(prop::collection::vec(-60.0f64..20.0, 5), 1..8),
        rot in 0usize..8,
    ) {
        let traces: Vec<NmsdTrace> = runs.iter().map(|v| NmsdTrace::new("a", v.clone(), false)).collect();
        let mut rotated = traces.clone();
        rotated.rotate_left(rot % traces.len());
        let x = average_traces(&traces).unwrap();
        let y = average_traces(&rotated).unwrap();
        for (p, q) in x.values_db.iter().zip(&y.values_db) {
            prop_assert!((p - q).abs() < 1e-9);
        }
        // Linear-domain mean lies between the extremes and above the dB mean.
        for t in 0..5 {
            let col: Vec<f64> = runs.iter().map(|r| r[t]).collect();
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let db_mean = col.iter().sum::<f64>() / col.len() as f64;
            prop_assert!(x.values_db[t] >= lo - 1e-9 && x.values_db[t] <= hi + 1e-9);
            prop_assert!(x.values_db[t] >= db_mean - 1e-9);
        }
    }

    #[test]
    fn steady_state_of_constant_tail(level in -80.0f64..10.0, head in prop::collection::vec(-80.0f64..10.0, 0..50)) {
        let mut v = head;
        v.extend(std::iter::repeat_n(level, 500));
        prop_assert!((steady_state(&v, 500).unwrap() - level).abs() < 1e-9);
    }
}

#[test]
fn crossing_reports_first_block() {
    let v = [5.0, -10.0, -25.0, -15.0, -30.0];
    assert_eq!(first_crossing(&v, -20.0), Some(2));
    assert_eq!(first_crossing(&v, -40.0), None);
}
