use cauchy_core::spectral::{
    forward_transform, inverse_transform, l2_norm, laplace_on_line, relative_l2, TimeGrid, TimeSeries,
};
use proptest::prelude::*;

fn series(len_log2: u32) -> impl Strategy<Value = TimeSeries> {
    let n = 1usize << len_log2;
    (proptest::collection::vec(-1.0f64..1.0, n), 1e-3f64..1.0).prop_map(move |(values, dt)| {
        // Zero the tail so the horizon check stays quiet.
        let mut values = values;
        values[n - 4..].iter_mut().for_each(|v| *v = 0.0);
        TimeSeries::new(TimeGrid::new(dt, n).unwrap(), values).unwrap()
    })
}

proptest! {
    #[test]
    fn parseval(v in series(8)) {
        let line = forward_transform(&v);
        let time = l2_norm(&v);
        prop_assume!(time > 0.0);
        prop_assert!((line.l2_norm() - time).abs() <= 1e-10 * time);
    }

    #[test]
    fn inverse_undoes_forward(v in series(9)) {
        let back = inverse_transform(&forward_transform(&v)).unwrap();
        prop_assert!(relative_l2(back.series.values(), v.values()) <= 1e-10);
        prop_assert!(back.asymmetry < 1e-12);
    }

    #[test]
    fn real_input_gives_hermitian_line(v in series(8)) {
        let line = forward_transform(&v);
        prop_assert!(line.asymmetry() < 1e-12);
    }

    #[test]
    fn laplace_at_zero_frequency_is_monotone_in_sigma(
        v in series(7),
        s1 in 1e-3f64..5.0,
        ds in 1e-3f64..5.0,
    ) {
        let nonnegative = TimeSeries::new(v.grid(), v.values().iter().map(|x| x.abs()).collect()).unwrap();
        let at = |sigma: f64| {
            let line = laplace_on_line(&nonnegative, sigma).unwrap();
            line.values()[v.grid().position(0)].re
        };
        let (low, high) = (at(s1), at(s1 + ds));
        prop_assert!(high <= low * (1.0 + 1e-12));
    }
}
