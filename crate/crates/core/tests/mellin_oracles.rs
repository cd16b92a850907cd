use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use snrcalc::fading::{rayleigh_g_mellin, rayleigh_service_model, sample_gamma, FadingChannel, Rayleigh};
use snrcalc::mellin::{conv_bound, deconv_bound, mellin_product, mellin_quotient, moment_bound};
use snrcalc::process::{mx_convolve_at, mx_deconvolve, SnrProcess};
use snrcalc::traffic::TrafficSpec;

/// `E[(1+γ)^{s−1}] = ∫_0^∞ (1+γ̄y)^{s−1} e^{−y} dy`, by composite Simpson
/// after substituting `1 + γ̄y = e^v`, which flattens the peak at `y = 0`.
fn g_mellin_quadrature(mean: f64, s: f64) -> f64 {
    let upper = (1.0 + 80.0 * mean).ln();
    let n = 400_000;
    let h = upper / n as f64;
    let f = |v: f64| (s * v).exp() * (-(v.exp_m1()) / mean).exp() / mean;
    let mut sum = f(0.0) + f(upper);
    for i in 1..n {
        sum += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    sum * h / 3.0
}

struct Moments {
    mean: f64,
    stderr: f64,
}

fn moments(v: &[f64]) -> Moments {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Moments {
        mean,
        stderr: (var / n).sqrt(),
    }
}

#[test]
fn g_mellin_matches_quadrature() {
    for mean in [0.5, 1.0, 10.0, 100.0] {
        for s in [-3.0, -1.0, 0.0, 0.5, 1.5, 2.5] {
            let got = rayleigh_g_mellin(mean, s).unwrap();
            let want = g_mellin_quadrature(mean, s);
            assert!(((got - want) / want).abs() < 1e-9, "γ̄={mean}, s={s}: {got} vs {want}");
        }
    }
}

#[test]
fn monte_carlo_channel() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g: Vec<f64> = (0..1_000_000).map(|_| sample_gamma(10.0, &mut rng)).collect();
    let snr = moments(&g);
    assert!((snr.mean - 10.0).abs() < 4.0 * snr.stderr, "sample mean {}", snr.mean);

    let half: Vec<f64> = g.iter().map(|x| (1.0 + x).powf(-0.5)).collect();
    let m = moments(&half);
    let want = rayleigh_g_mellin(10.0, 0.5).unwrap();
    assert!(
        (m.mean - want).abs() < 4.0 * m.stderr,
        "𝓜_g(0.5): MC {} vs {want}",
        m.mean
    );

    let cap: Vec<f64> = g.iter().map(|x| x.ln_1p()).collect();
    let c = moments(&cap);
    let want = Rayleigh::new(10.0).unwrap().mean_capacity();
    assert!(
        (c.mean - want).abs() < 4.0 * c.stderr,
        "E[ln(1+γ)]: MC {} vs {want}",
        c.mean
    );
    assert!((want - 2.014_642_544_708_451_6).abs() < 1e-10);
}

/// Per-slot gains `1 + γ` for `slots` slots.
fn gains(rng: &mut ChaCha8Rng, mean: f64, slots: usize) -> Vec<f64> {
    (0..slots).map(|_| 1.0 + sample_gamma(mean, rng)).collect()
}

#[test]
fn product_and_quotient_rules() {
    let (gx, gy) = (10.0, 3.0);
    let (x, y) = (rayleigh_service_model(gx).unwrap(), rayleigh_service_model(gy).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut prod, mut quot) = (Vec::new(), Vec::new());
    for _ in 0..400_000 {
        let a: f64 = gains(&mut rng, gx, 2).iter().product();
        let b: f64 = gains(&mut rng, gy, 2).iter().product();
        prod.push((a * b).powf(0.5 - 1.0));
        quot.push((a / b).powf(0.7 - 1.0));
    }
    let (p, q) = (moments(&prod), moments(&quot));
    let wp = mellin_product(&x, &y, 0.5, 0, 2);
    let wq = mellin_quotient(&x, &y, 0.7, 0, 2);
    assert!((p.mean - wp).abs() < 4.0 * p.stderr, "product {} vs {wp}", p.mean);
    assert!((q.mean - wq).abs() < 4.0 * q.stderr, "quotient {} vs {wq}", q.mean);
}

#[test]
fn convolution_bound_dominates_monte_carlo() {
    let (g1, g2) = (10.0, 4.0);
    let (x, y) = (rayleigh_service_model(g1).unwrap(), rayleigh_service_model(g2).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for s in [0.2, 0.6, 0.9] {
        let samples: Vec<f64> = (0..100_000)
            .map(|_| {
                let a = SnrProcess::from_factors(&gains(&mut rng, g1, 4)).unwrap();
                let b = SnrProcess::from_factors(&gains(&mut rng, g2, 4)).unwrap();
                mx_convolve_at(&a, &b, 0, 4).unwrap().value.powf(s - 1.0)
            })
            .collect();
        let m = moments(&samples);
        let bound = conv_bound(&x, &y, s, 0, 4).unwrap();
        assert!(
            m.mean <= bound + 4.0 * m.stderr,
            "s={s}: MC {} above bound {bound}",
            m.mean
        );
        // the bound is a sum of five terms, one of which is the exact transform of a
        // fixed split, so it cannot be more than five times the true value
        assert!(bound <= 5.0 * (m.mean + 4.0 * m.stderr));
    }
}

#[test]
fn deconvolution_bound_dominates_monte_carlo() {
    let traffic = TrafficSpec::constant(0.5, 0.8).unwrap();
    let arrivals = traffic.mellin_model();
    let service = rayleigh_service_model(10.0).unwrap();
    let a = SnrProcess::from_fn(4, |tau, t| (0.5 + 0.8 * (t - tau) as f64).exp()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for (s, tau, t) in [(1.3, 4, 4), (1.8, 4, 4), (1.5, 3, 2), (1.5, 4, 1)] {
        let samples: Vec<f64> = (0..100_000)
            .map(|_| {
                let sv = SnrProcess::from_factors(&gains(&mut rng, 10.0, 4)).unwrap();
                mx_deconvolve(&a, &sv, tau, t).unwrap().powf(s - 1.0)
            })
            .collect();
        let m = moments(&samples);
        let bound = deconv_bound(&arrivals, &service, s, tau, t).unwrap();
        assert!(
            m.mean <= bound + 4.0 * m.stderr,
            "s={s} ({tau},{t}): MC {} above bound {bound}",
            m.mean
        );
    }
}

#[test]
fn moment_bound_dominates_tail() {
    let service = rayleigh_service_model(10.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 200_000;
    let v: Vec<f64> = (0..n).map(|_| gains(&mut rng, 10.0, 4).iter().product()).collect();
    for a in [50.0, 500.0, 5_000.0, 50_000.0] {
        let freq = v.iter().filter(|&&x| x >= a).count() as f64 / n as f64;
        let best = [0.25, 0.5, 1.0, 1.5, 2.0]
            .iter()
            .map(|&s| moment_bound(&service, a, s, 0, 4).unwrap())
            .fold(1.0, f64::min);
        let slack = 4.0 * (freq * (1.0 - freq) / n as f64).sqrt() + 1e-5;
        assert!(freq <= best + slack, "a={a}: tail {freq} above bound {best}");
    }
}

proptest! {
    #[test]
    fn g_mellin_monotone_in_mean(s in -3.0..3.0f64, g in 0.1..200.0f64, dg in 0.01..50.0f64) {
        let lo = rayleigh_g_mellin(g, s).unwrap();
        let hi = rayleigh_g_mellin(g + dg, s).unwrap();
        // (1+γ)^{s−1} falls with γ for s < 1 and rises for s > 1
        if s < 1.0 - 1e-9 {
            prop_assert!(hi < lo);
        } else if s > 1.0 + 1e-9 {
            prop_assert!(hi > lo);
        }
    }

    #[test]
    fn g_mellin_log_convex(s in -2.5..2.5f64, g in 0.5..100.0f64) {
        let h = 0.25;
        let f = |x: f64| rayleigh_g_mellin(g, x).unwrap().ln();
        prop_assert!(f(s - h) + f(s + h) >= 2.0 * f(s) - 1e-10);
    }
}
