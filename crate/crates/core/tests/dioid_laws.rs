use proptest::prelude::*;

use snrcalc::process::{
    backlog_of, delay_of, minplus_convolve, minplus_convolve_at, mx_convolve, mx_deconvolve, to_bit, to_snr,
    BitProcess, SnrProcess, VirtualDelay,
};

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

fn same(x: &SnrProcess, y: &SnrProcess) -> bool {
    (0..=x.horizon()).all(|t| (0..=t).all(|tau| close(x.get(tau, t), y.get(tau, t))))
}

fn process(h: usize) -> impl Strategy<Value = SnrProcess> {
    prop::collection::vec(-2.0..2.0f64, (h + 1) * (h + 2) / 2).prop_map(move |v| {
        let mut it = v.into_iter();
        SnrProcess::from_fn(h, |_, _| it.next().unwrap().exp()).unwrap()
    })
}

fn triple() -> impl Strategy<Value = (SnrProcess, SnrProcess, SnrProcess)> {
    (1usize..7).prop_flat_map(|h| (process(h), process(h), process(h)))
}

fn path(h: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..2.0f64, h)
}

proptest! {
    #[test]
    fn convolution_is_associative((x, y, z) in triple()) {
        let l = mx_convolve(&mx_convolve(&x, &y).unwrap(), &z).unwrap();
        let r = mx_convolve(&x, &mx_convolve(&y, &z).unwrap()).unwrap();
        prop_assert!(same(&l, &r));
    }

    #[test]
    fn convolution_distributes_over_min((x, y, z) in triple()) {
        let l = mx_convolve(&x.pointwise_min(&y).unwrap(), &z).unwrap();
        let r = mx_convolve(&x, &z).unwrap().pointwise_min(&mx_convolve(&y, &z).unwrap()).unwrap();
        prop_assert!(same(&l, &r));
    }

    #[test]
    fn unity_and_null((x, _, _) in triple()) {
        let h = x.horizon();
        prop_assert!(same(&mx_convolve(&SnrProcess::unity(h), &x).unwrap(), &x));
        prop_assert!(same(&mx_convolve(&x, &SnrProcess::unity(h)).unwrap(), &x));
        prop_assert!(same(&mx_convolve(&SnrProcess::null(h), &x).unwrap(), &SnrProcess::null(h)));
        prop_assert!(same(&x.pointwise_min(&SnrProcess::null(h)).unwrap(), &x));
    }

    #[test]
    fn convolution_preserves_order((x, y, z) in triple()) {
        // min(x, y) ≤ x pointwise, so the convolutions keep the order
        let lower = x.pointwise_min(&y).unwrap();
        let a = mx_convolve(&lower, &z).unwrap();
        let b = mx_convolve(&x, &z).unwrap();
        for t in 0..=x.horizon() {
            for tau in 0..=t {
                prop_assert!(a.get(tau, t) <= b.get(tau, t) * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn exp_maps_minplus_to_min_times(a in path(12), s in path(12)) {
        let (a, s) = (BitProcess::from_increments(&a).unwrap(), BitProcess::from_increments(&s).unwrap());
        let bit = minplus_convolve(&a, &s).unwrap();
        let snr = mx_convolve(&to_snr(&a), &to_snr(&s)).unwrap();
        prop_assert!(same(&to_snr(&bit), &snr));
        let back = to_bit(&snr).unwrap();
        for t in 0..=12 {
            for tau in 0..=t {
                prop_assert!((back.get(tau, t) - bit.get(tau, t)).abs() <= 1e-12 * (1.0 + bit.get(tau, t).abs()));
            }
        }
    }

    #[test]
    fn bit_snr_round_trip(a in path(10)) {
        let a = BitProcess::from_increments(&a).unwrap();
        prop_assert_eq!(to_bit(&to_snr(&a)).unwrap(), a);
    }

    /// With the tightest departures `D = A ∗ S`, the backlog is exactly the
    /// deconvolution at `(t, t)` and the virtual delay is the first `w` at
    /// which the deconvolution at `(t + w, t)` drops to one.
    #[test]
    fn deconvolution_reads_backlog_and_delay(a in path(14), s in path(14)) {
        let h = 14;
        let a = BitProcess::from_increments(&a).unwrap();
        let s = BitProcess::from_increments(&s).unwrap();
        let d = BitProcess::from_cumulative(
            (0..=h).map(|t| minplus_convolve_at(&a, &s, 0, t).unwrap().value).collect(),
        ).unwrap();
        let (sa, ss) = (to_snr(&a), to_snr(&s));
        for t in 0..=h {
            let b = backlog_of(&a, &d, t).unwrap();
            let via = mx_deconvolve(&sa, &ss, t, t).unwrap().ln();
            prop_assert!((b - via).abs() <= 1e-9 * (1.0 + b), "t={} backlog {} vs {}", t, b, via);

            let delay = delay_of(&a, &d, t).unwrap();
            let first = (0..=h - t).find(|&w| mx_deconvolve(&sa, &ss, t + w, t).unwrap() <= 1.0 + 1e-12);
            match (delay, first) {
                (VirtualDelay::Exact(w), Some(f)) => prop_assert_eq!(w, f),
                (VirtualDelay::Censored { .. }, None) => {}
                other => prop_assert!(false, "t={}: {:?}", t, other),
            }
        }
    }

    #[test]
    fn departures_respect_causality(a in path(10), s in path(10)) {
        let a = BitProcess::from_increments(&a).unwrap();
        let s = BitProcess::from_increments(&s).unwrap();
        let d = minplus_convolve(&a, &s).unwrap();
        prop_assert!(d.satisfies_invariants());
        for t in 0..=10 {
            prop_assert!(d.get(0, t) <= a.get(0, t) + 1e-12);
        }
    }
}
