use fcm_wave::harness::{relative_error, sample_observers, SignalMatrix};
use fcm_wave::linalg::{mm, SparseSym};
use proptest::prelude::*;

fn signals(n_p: usize, n_s: usize) -> impl Strategy<Value = SignalMatrix> {
    proptest::collection::vec(proptest::collection::vec(-1e3f64..1e3, n_s), n_p).prop_map(move |values| SignalMatrix {
        times: (1..=n_s).map(|j| j as f64 / n_s as f64).collect(),
        values,
    })
}

proptest! {
    #[test]
    fn error_is_nonnegative_and_zero_on_identity(a in signals(3, 8), b in signals(3, 8)) {
        prop_assume!(b.values.iter().all(|r| r.iter().any(|&v| v != 0.0)));
        prop_assert!(relative_error(&a, &b).unwrap() >= 0.0);
        prop_assert_eq!(relative_error(&b, &b).unwrap(), 0.0);
    }

    #[test]
    fn error_of_a_scaled_reference(r in signals(4, 6), c in -5.0f64..5.0) {
        prop_assume!(r.values.iter().all(|row| row.iter().any(|&v| v != 0.0)));
        let scaled = SignalMatrix { times: r.times.clone(), values: r.values.iter().map(|v| v.iter().map(|x| c * x).collect()).collect() };
        let e = relative_error(&scaled, &r).unwrap();
        prop_assert!((e - (c - 1.0).abs()).abs() <= 1e-12 * (1.0 + c.abs()));
    }

    #[test]
    fn signals_csv_round_trip(s in signals(11, 5)) {
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        prop_assert_eq!(SignalMatrix::read_csv(buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn sampling_commutes_with_resampling(n_s in 1usize..6, stride in 1usize..5, mult in 1usize..4, seed in any::<u64>()) {
        let n_t = n_s * stride * mult;
        let traj: Vec<Vec<f64>> = (0..=n_t).map(|k| vec![(k as f64 * 0.37 + seed as f64 * 1e-9).sin(), k as f64]).collect();
        let w = vec![vec![(0, 0.3), (1, 0.7)], vec![(1, 1.0)]];
        let fine = sample_observers(&traj, &w, n_s * stride, 1.0 / n_t as f64).unwrap();
        let coarse = sample_observers(&traj, &w, n_s, 1.0 / n_t as f64).unwrap();
        prop_assert_eq!(fine.resample(n_s).unwrap(), coarse);
    }

    #[test]
    fn matrix_market_round_trip(n in 1usize..12, entries in proptest::collection::vec((0usize..12, 0usize..12, -10.0f64..10.0), 0..40)) {
        let mut t: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, v) in entries {
            let (i, j) = (i % n, j % n);
            t.push((i, j, v));
            if i != j {
                t.push((j, i, v));
            }
        }
        let a = SparseSym::from_triplets(n, &t).unwrap();
        let mut buf = Vec::new();
        mm::write_matrix(&mut buf, &a).unwrap();
        let b = mm::read_matrix(buf.as_slice()).unwrap();
        prop_assert_eq!(a.to_dense(), b.to_dense());
    }
}
