//! End-to-end backlog, delay and output bounds for a tandem of fading channels.
//!
//! All quantities are in internal units: nats for data, slots for time. Each
//! bound minimizes a log-space objective over `s > 0` with [`optimize_s`].

pub mod optimize;

use std::sync::Arc;

pub use optimize::{optimize_s, Optimum, SCAN_POINTS, S_CAP, S_MAX, S_MIN, S_REL_TOL};

use crate::error::{Error, Result};
use crate::fading::{ChannelSpec, FadingChannel};
use crate::mellin::{MellinModel, SlotMellin, Validity};
use crate::special::ln_binomial;
use crate::traffic::{traffic_mellin, Envelope, TrafficSpec};

/// `V(s)` is treated as stable only when it is at most `1 − FEASIBILITY_MARGIN`.
pub const FEASIBILITY_MARGIN: f64 = 1e-12;

/// A tandem of `hops` identical fading channels crossed by one through flow
/// and, optionally, an identical cross flow at every hop.
#[derive(Debug, Clone)]
pub struct NetworkSpec {
    pub hops: u32,
    pub channel: ChannelSpec,
    pub through: TrafficSpec,
    pub cross: Option<TrafficSpec>,
    pub epsilon: f64,
}

impl NetworkSpec {
    pub fn new(
        hops: u32,
        channel: ChannelSpec,
        through: TrafficSpec,
        cross: Option<TrafficSpec>,
        epsilon: f64,
    ) -> Result<Self> {
        if hops == 0 {
            return Err(Error::domain("a network needs at least one hop"));
        }
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::domain(format!(
                "violation probability {epsilon} must lie in (0, 1]"
            )));
        }
        Ok(Self {
            hops,
            channel,
            through,
            cross,
            epsilon,
        })
    }

    pub fn with_hops(&self, hops: u32) -> Self {
        Self { hops, ..self.clone() }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self {
            epsilon,
            ..self.clone()
        }
    }

    fn cross_sigma(&self, s: f64) -> f64 {
        self.cross.as_ref().map_or(0.0, |c| c.sigma(s))
    }

    fn cross_rho(&self, s: f64) -> f64 {
        self.cross.as_ref().map_or(0.0, |c| c.rho(s))
    }

    /// `σ(s) + N σ_c(s)`: total burst a through bit can meet end to end.
    fn burst(&self, s: f64) -> f64 {
        self.through.sigma(s) + self.hops as f64 * self.cross_sigma(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    /// Smallest and largest scan points of `s` with `V(s) < 1`.
    pub feasible: Option<(f64, f64)>,
    /// Objective evaluations, summed over all probes.
    pub evaluations: usize,
    pub s_upper: f64,
    /// Delay solver only: number of values of `w` probed.
    pub probes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundResult {
    /// Nats for backlog and output bounds, slots for the delay bound.
    pub value: f64,
    pub s_star: f64,
    pub stable: bool,
    /// `V(s*)`, or `V_o(s*)` with cross traffic.
    pub kernel_at_s_star: f64,
    pub diagnostics: Diagnostics,
}

impl BoundResult {
    fn unstable(diagnostics: Diagnostics) -> Self {
        BoundResult {
            value: f64::INFINITY,
            s_star: f64::NAN,
            stable: false,
            kernel_at_s_star: f64::NAN,
            diagnostics,
        }
    }
}

/// `ln V(s)`, with `V(s) = e^{s(ρ(s)+ρ_c(s))} 𝓜_g(1−s)`.
pub fn ln_kernel_v(net: &NetworkSpec, s: f64) -> f64 {
    let model = net.channel.model();
    s * (net.through.rho(s) + net.cross_rho(s)) + model.ln_mellin(1.0 - s)
}

/// `V(s)`, or `V_o(s)` when the network carries cross traffic.
pub fn kernel_v(net: &NetworkSpec, s: f64) -> f64 {
    ln_kernel_v(net, s).exp()
}

/// `ln(1 − V(s))`, or `None` when `V(s)` is not below `1 − margin`.
fn ln_one_minus_v(ln_v: f64) -> Option<f64> {
    if ln_v.exp() <= 1.0 - FEASIBILITY_MARGIN {
        Some((-ln_v.exp_m1()).ln())
    } else {
        None
    }
}

/// `ln 𝖬(s, τ, t)` for the N-hop network.
///
/// For `τ ≤ t` this is `s(ρ(t−τ) + σ + Nσ_c) − N ln(1−V)`. For `τ = t + w`
/// the tail of the binomial series is bounded by both `1` and
/// `V^w C(N−1+w, w)`, whichever is smaller.
pub fn ln_m_kernel(net: &NetworkSpec, s: f64, tau: usize, t: usize) -> f64 {
    if !(s > 0.0) {
        return f64::INFINITY;
    }
    let ln_v = ln_kernel_v(net, s);
    let Some(l1v) = ln_one_minus_v(ln_v) else {
        return f64::INFINITY;
    };
    let n = net.hops as f64;
    let head = s * net.burst(s) - n * l1v;
    if tau <= t {
        head + s * net.through.rho(s) * (t - tau) as f64
    } else {
        let w = tau - t;
        let tail = w as f64 * ln_v + ln_binomial(net.hops as u64 - 1 + w as u64, w as u64);
        head - s * net.through.rho(s) * w as f64 + tail.min(0.0)
    }
}

pub fn m_kernel(net: &NetworkSpec, s: f64, tau: usize, t: usize) -> f64 {
    ln_m_kernel(net, s, tau, t).exp()
}

/// Single-node `𝖬(s, τ, t) = e^{s(ρ(t−τ)+σ)} V^{[τ−t]₊}/(1−V)`, evaluated
/// without the cascade machinery. Ignores `net.hops`.
pub fn ln_m_kernel_single_hop(net: &NetworkSpec, s: f64, tau: usize, t: usize) -> f64 {
    if !(s > 0.0) {
        return f64::INFINITY;
    }
    let ln_v = ln_kernel_v(net, s);
    let Some(l1v) = ln_one_minus_v(ln_v) else {
        return f64::INFINITY;
    };
    let gap = t as f64 - tau as f64;
    let w = tau.saturating_sub(t) as f64;
    s * (net.through.rho(s) * gap + net.through.sigma(s) + net.cross_sigma(s)) + w * ln_v - l1v
}

/// Per-slot Mellin factor of the leftover service, `𝓜_g(s)·e^{(1−s)ρ_c(1−s)}`.
#[derive(Debug, Clone)]
pub struct LeftoverSlot {
    pub channel: Arc<dyn FadingChannel>,
    pub cross_rho: Envelope,
}

impl SlotMellin for LeftoverSlot {
    fn ln_mellin(&self, s: f64) -> f64 {
        self.channel.ln_mellin(s) + (1.0 - s) * self.cross_rho.eval(1.0 - s)
    }
}

/// Per-hop burst penalty of the leftover service, `e^{(1−s)σ_c(1−s)}`.
#[derive(Debug, Clone)]
pub struct CrossBurst(pub Envelope);

impl SlotMellin for CrossBurst {
    fn ln_mellin(&self, s: f64) -> f64 {
        (1.0 - s) * self.0.eval(1.0 - s)
    }
}

/// `𝓜_{𝒮_o}(s, τ, t) = 𝓜_𝒮(s, τ, t)·𝓜_{𝒜_c}(2−s, τ, t)`, for `s < 1`.
pub fn leftover_service(service: &MellinModel, cross: &TrafficSpec, s: f64, tau: usize, t: usize) -> Result<f64> {
    if !(s < 1.0) {
        return Err(Error::precondition(format!("leftover service needs s < 1 (got {s})")));
    }
    if tau > t {
        return Err(Error::precondition(format!("τ={tau} > t={t}")));
    }
    Ok(service.eval(s, tau, t) * traffic_mellin(cross, 2.0 - s, tau, t)?)
}

/// Model form of the per-hop leftover service of a channel under cross traffic.
pub fn leftover_model(channel: &ChannelSpec, cross: &TrafficSpec) -> MellinModel {
    MellinModel::IidSlotPower {
        base: Arc::new(LeftoverSlot {
            channel: channel.model(),
            cross_rho: cross.rho.clone(),
        }),
        prefactor: Some(Arc::new(CrossBurst(cross.sigma.clone()))),
        validity: Validity::below(1.0),
    }
}

/// Mellin model of the end-to-end service of the cascade, valid for `s < 1`.
pub fn cascade_model(net: &NetworkSpec) -> MellinModel {
    let (base, prefactor): (Arc<dyn SlotMellin>, Option<Arc<dyn SlotMellin>>) = match &net.cross {
        None => (net.channel.model(), None),
        Some(c) => (
            Arc::new(LeftoverSlot {
                channel: net.channel.model(),
                cross_rho: c.rho.clone(),
            }),
            Some(Arc::new(CrossBurst(c.sigma.clone()))),
        ),
    };
    MellinModel::CascadeBinomial {
        base,
        prefactor,
        hops: net.hops,
        validity: Validity::below(1.0),
    }
}

/// `C(N−1+t−τ, t−τ)·(𝓜_g(s)·e^{(1−s)ρ_c(1−s)})^{t−τ}·e^{(1−s)Nσ_c(1−s)}`.
pub fn cascade_mellin(net: &NetworkSpec, s: f64, tau: usize, t: usize) -> Result<f64> {
    if !(s < 1.0) {
        return Err(Error::precondition(format!(
            "cascade Mellin bound needs s < 1 (got {s})"
        )));
    }
    if tau > t {
        return Err(Error::precondition(format!("τ={tau} > t={t}")));
    }
    Ok(cascade_model(net).eval(s, tau, t))
}

/// Scan-grid stability: some `s` on the scan has `V(s) ≤ 1 − margin`.
pub fn is_stable(net: &NetworkSpec) -> bool {
    optimize::log_grid(S_MIN, S_MAX, SCAN_POINTS).any(|s| ln_one_minus_v(ln_kernel_v(net, s)).is_some())
}

fn run(net: &NetworkSpec, objective: impl Fn(f64) -> f64) -> BoundResult {
    let opt = optimize_s(objective);
    let diagnostics = Diagnostics {
        feasible: opt.feasible,
        evaluations: opt.evaluations,
        s_upper: opt.s_upper,
        probes: 0,
    };
    if !opt.is_feasible() {
        return BoundResult::unstable(diagnostics);
    }
    BoundResult {
        value: opt.value,
        s_star: opt.s_star,
        stable: true,
        kernel_at_s_star: kernel_v(net, opt.s_star),
        diagnostics,
    }
}

/// `b^ε = inf_s {σ + Nσ_c − (N ln(1−V) + ln ε)/s}` in nats.
pub fn backlog_bound(net: &NetworkSpec) -> BoundResult {
    output_bound_span(net, 0)
}

/// `d^ε(τ, t)`: bound on the departures of the through flow in `(τ, t]`, in nats.
pub fn output_bound(net: &NetworkSpec, tau: usize, t: usize) -> Result<BoundResult> {
    if tau > t {
        return Err(Error::precondition(format!(
            "output bound needs τ ≤ t (got τ={tau}, t={t})"
        )));
    }
    Ok(output_bound_span(net, t - tau))
}

fn output_bound_span(net: &NetworkSpec, span: usize) -> BoundResult {
    let ln_eps = net.epsilon.ln();
    run(net, |s| (ln_m_kernel(net, s, 0, span) - ln_eps) / s)
}

/// `inf_s ln 𝖬(s, t+w, t)`: log of the delay violation bound at `w` slots.
pub fn ln_delay_violation(net: &NetworkSpec, w: usize) -> Optimum {
    optimize_s(|s| ln_m_kernel(net, s, w, 0))
}

/// Largest `w` the delay solver will probe.
pub const MAX_DELAY_SLOTS: usize = 1 << 48;

/// `w^ε`: smallest integer `w` whose delay violation bound is at most `ε`, in
/// slots. Exponential ramp on `w` then integer bisection, re-optimizing `s`
/// at every probe.
pub fn delay_bound(net: &NetworkSpec) -> BoundResult {
    let ln_eps = net.epsilon.ln();
    let mut evaluations = 0;
    let mut probes = 0;
    let mut probe = |w: usize| {
        let opt = ln_delay_violation(net, w);
        evaluations += opt.evaluations;
        probes += 1;
        opt
    };

    let first = probe(0);
    if !first.is_feasible() {
        return BoundResult::unstable(Diagnostics {
            feasible: None,
            evaluations,
            s_upper: first.s_upper,
            probes,
        });
    }
    let feasible = first.feasible;
    let (w, opt) = if first.value <= ln_eps {
        (0, first)
    } else {
        let mut lo = 0;
        let mut hi = 1;
        let mut hit = loop {
            let opt = probe(hi);
            if opt.value <= ln_eps {
                break opt;
            }
            lo = hi;
            if hi >= MAX_DELAY_SLOTS {
                break opt;
            }
            hi *= 2;
        };
        if hit.value > ln_eps {
            return BoundResult {
                value: f64::INFINITY,
                s_star: hit.s_star,
                stable: true,
                kernel_at_s_star: kernel_v(net, hit.s_star),
                diagnostics: Diagnostics {
                    feasible,
                    evaluations,
                    s_upper: hit.s_upper,
                    probes,
                },
            };
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            let opt = probe(mid);
            if opt.value <= ln_eps {
                hi = mid;
                hit = opt;
            } else {
                lo = mid;
            }
        }
        (hi, hit)
    };
    BoundResult {
        value: w as f64,
        s_star: opt.s_star,
        stable: true,
        kernel_at_s_star: kernel_v(net, opt.s_star),
        diagnostics: Diagnostics {
            feasible,
            evaluations,
            s_upper: opt.s_upper,
            probes,
        },
    }
}

/// Bisects a scalar parameter for the boundary between unstable (`lo`) and
/// stable (`hi`) networks, to absolute width `tol`.
pub fn stability_boundary(mut lo: f64, mut hi: f64, tol: f64, make: impl Fn(f64) -> NetworkSpec) -> Option<f64> {
    let stable_lo = is_stable(&make(lo));
    let stable_hi = is_stable(&make(hi));
    if stable_lo == stable_hi {
        return None;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if is_stable(&make(mid)) == stable_hi {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traffic::{to_internal, Unit, UnitContext};

    fn reference(snr_db: f64, hops: u32) -> NetworkSpec {
        let channel = ChannelSpec::rayleigh_db(snr_db, 20.0).unwrap();
        let ctx = UnitContext::new(20_000.0).unwrap();
        let through =
            TrafficSpec::constant(to_internal(50.0, Unit::Kb, &ctx), to_internal(30.0, Unit::Kbps, &ctx)).unwrap();
        NetworkSpec::new(hops, channel, through, None, 1e-4).unwrap()
    }

    #[test]
    fn kernel_boundary_and_reduction() {
        let mut net = reference(10.0, 1);
        net.through = TrafficSpec::constant(1.0, 0.0).unwrap();
        assert!((kernel_v(&net, 1e-9) - 1.0).abs() < 1e-8);
        let plain = reference(10.0, 3);
        let mut crossed = plain.clone();
        crossed.cross = Some(TrafficSpec::zero());
        for s in [0.01, 0.3, 0.9, 2.0] {
            assert_eq!(kernel_v(&plain, s), kernel_v(&crossed, s));
        }
    }

    #[test]
    fn single_hop_kernel_at_diagonal() {
        let net = reference(10.0, 1);
        let s = 0.2;
        let v = kernel_v(&net, s);
        let want = s * net.through.sigma(s) - (1.0 - v).ln();
        let got = ln_m_kernel(&net, s, 5, 5);
        assert!(((got - want) / want).abs() < 1e-12);
        for (tau, t) in [(0, 0), (3, 9), (9, 3)] {
            let a = ln_m_kernel(&net, s, tau, t);
            let b = ln_m_kernel_single_hop(&net, s, tau, t);
            assert!(((a - b) / b).abs() < 1e-12, "τ={tau} t={t}");
        }
    }

    #[test]
    fn unstable_kernel_is_infinite() {
        let net = reference(0.0, 1);
        assert!(!is_stable(&net));
        assert_eq!(ln_m_kernel(&net, 0.1, 0, 0), f64::INFINITY);
        let b = backlog_bound(&net);
        assert!(!b.stable && b.value.is_infinite());
        let d = delay_bound(&net);
        assert!(!d.stable && d.value.is_infinite());
    }

    #[test]
    fn reference_single_hop_is_finite() {
        let b = backlog_bound(&reference(10.0, 1));
        assert!(b.stable && b.value.is_finite());
        assert!(b.kernel_at_s_star < 1.0);
        assert!(b.value > reference(10.0, 1).through.sigma(1.0));
    }

    #[test]
    fn epsilon_one_backlog_at_least_sigma() {
        let net = reference(10.0, 2).with_epsilon(1.0);
        let b = backlog_bound(&net);
        assert!(b.value >= net.through.sigma(1.0));
    }

    #[test]
    fn output_examples() {
        let net = reference(10.0, 2);
        let b = backlog_bound(&net);
        let d0 = output_bound(&net, 7, 7).unwrap();
        assert_eq!(b.value, d0.value);
        let d1 = output_bound(&net, 7, 8).unwrap();
        let d5 = output_bound(&net, 7, 12).unwrap();
        assert!(d0.value <= d1.value && d1.value <= d5.value);
        assert!(output_bound(&net, 3, 2).is_err());
    }

    #[test]
    fn delay_epsilon_one_is_zero() {
        let mut net = reference(10.0, 1).with_epsilon(1.0);
        net.through = TrafficSpec::constant(0.0, 0.2).unwrap();
        // with no burst the s-infimum of the prefactor tends to 1 as s → 0
        let d = delay_bound(&net);
        assert!(d.value <= 1.0, "{}", d.value);
    }

    #[test]
    fn delay_is_smallest_passing_w() {
        let net = reference(10.0, 2).with_epsilon(1e-2);
        let d = delay_bound(&net);
        let w = d.value as usize;
        assert!(w > 0);
        let ln_eps = net.epsilon.ln();
        assert!(ln_delay_violation(&net, w).value <= ln_eps);
        assert!(ln_delay_violation(&net, w - 1).value > ln_eps);
    }

    #[test]
    fn cascade_examples() {
        let net = reference(10.0, 1);
        let s = 0.4;
        let base = net.channel.model().mellin(s);
        assert!((cascade_mellin(&net, s, 0, 3).unwrap() - base.powi(3)).abs() < 1e-12 * base.powi(3));
        assert_eq!(cascade_mellin(&net.with_hops(2), s, 4, 4).unwrap(), 1.0);
        let c3 = cascade_mellin(&net.with_hops(3), s, 0, 4).unwrap();
        assert!((c3 - 15.0 * base.powi(4)).abs() < 1e-12 * c3);
        assert!(cascade_mellin(&net, 1.0, 0, 1).is_err());
    }

    #[test]
    fn leftover_reductions() {
        let net = reference(10.0, 1);
        let service = crate::fading::rayleigh_service_model(net.channel.mean_snr).unwrap();
        let s = 0.3;
        let raw = service.eval(s, 2, 6);
        let none = leftover_service(&service, &TrafficSpec::zero(), s, 2, 6).unwrap();
        assert!((raw - none).abs() < 1e-15 * raw);
        let burst = TrafficSpec::constant(0.8, 0.0).unwrap();
        let diag = leftover_service(&service, &burst, s, 3, 3).unwrap();
        assert!((diag - ((1.0 - s) * 0.8).exp()).abs() < 1e-14);
        assert!(leftover_service(&service, &burst, 1.0, 3, 3).is_err());
        let cross = TrafficSpec::constant(0.8, 0.1).unwrap();
        let model = leftover_model(&net.channel, &cross);
        let direct = leftover_service(&service, &cross, s, 1, 5).unwrap();
        assert!((model.eval(s, 1, 5) - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn stability_threshold_brackets_mean_capacity() {
        let rho = reference(10.0, 1).through.rho(1.0);
        let snr = stability_boundary(0.0, 10.0, 1e-4, |db| reference(db, 1)).unwrap();
        let lin = 10f64.powf(snr / 10.0);
        let cap = crate::fading::Rayleigh::new(lin).unwrap().mean_capacity();
        assert!((cap - rho).abs() < 1e-3, "threshold {snr} dB, capacity {cap}, ρ {rho}");
    }
}
