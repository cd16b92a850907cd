//! (σ(s), ρ(s))-bounded traffic and engineering-unit conversion.
//!
//! Internally burst sizes are nats, rates are nats per slot and the slot
//! length is `Δt = 1/W`, so that one slot of a channel with SNR `γ` carries
//! exactly `ln(1+γ)` nats.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mellin::{MellinModel, Validity};

/// A nonnegative, nondecreasing function of `s`; usually a constant.
#[derive(Clone)]
pub enum Envelope {
    Constant(f64),
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Envelope {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Envelope::Constant(c) => *c,
            Envelope::Function(f) => f(s),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Envelope::Constant(c) => Some(*c),
            Envelope::Function(_) => None,
        }
    }

    fn sum(parts: Vec<Envelope>) -> Envelope {
        if let Some(total) = parts.iter().map(Envelope::as_constant).sum::<Option<f64>>() {
            return Envelope::Constant(total);
        }
        Envelope::Function(Arc::new(move |s| parts.iter().map(|p| p.eval(s)).sum()))
    }
}

impl fmt::Debug for Envelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Envelope::Constant(c) => write!(f, "Constant({c})"),
            Envelope::Function(_) => f.write_str("Function(..)"),
        }
    }
}

/// Arrivals with `E[e^{sA(τ,t)}] ≤ e^{s(ρ(s)(t−τ) + σ(s))}`.
#[derive(Clone, Debug)]
pub struct TrafficSpec {
    pub sigma: Envelope,
    pub rho: Envelope,
}

impl TrafficSpec {
    /// Deterministic envelope: burst `sigma` nats, rate `rho` nats/slot.
    pub fn constant(sigma: f64, rho: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !(rho >= 0.0) || sigma.is_infinite() || rho.is_infinite() {
            return Err(Error::domain(format!(
                "traffic envelope needs finite σ ≥ 0, ρ ≥ 0 (got σ={sigma}, ρ={rho})"
            )));
        }
        Ok(Self {
            sigma: Envelope::Constant(sigma),
            rho: Envelope::Constant(rho),
        })
    }

    /// Function-valued envelope. The caller is responsible for σ, ρ being
    /// nonnegative and nondecreasing.
    pub fn from_fns(
        sigma: impl Fn(f64) -> f64 + Send + Sync + 'static,
        rho: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            sigma: Envelope::Function(Arc::new(sigma)),
            rho: Envelope::Function(Arc::new(rho)),
        }
    }

    pub fn zero() -> Self {
        Self {
            sigma: Envelope::Constant(0.0),
            rho: Envelope::Constant(0.0),
        }
    }

    pub fn sigma(&self, s: f64) -> f64 {
        self.sigma.eval(s)
    }

    pub fn rho(&self, s: f64) -> f64 {
        self.rho.eval(s)
    }

    /// SNR-domain Mellin model, valid for `s > 1`.
    pub fn mellin_model(&self) -> MellinModel {
        MellinModel::SigmaRho {
            sigma: self.sigma.clone(),
            rho: self.rho.clone(),
            validity: Validity::above(1.0),
        }
    }
}

/// `e^{(s−1)(ρ(s−1)(t−τ) + σ(s−1))}`, the Mellin bound of the SNR arrival process.
pub fn traffic_mellin(spec: &TrafficSpec, s: f64, tau: usize, t: usize) -> Result<f64> {
    if !(s > 1.0) {
        return Err(Error::precondition(format!(
            "traffic Mellin bound needs s > 1 (got {s})"
        )));
    }
    if tau > t {
        return Err(Error::precondition(format!("τ={tau} > t={t}")));
    }
    Ok(spec.mellin_model().eval(s, tau, t))
}

/// Multiplexing in the SNR domain is a product of arrival processes, i.e. a
/// sum of envelopes.
pub fn aggregate_traffic(specs: &[TrafficSpec]) -> TrafficSpec {
    TrafficSpec {
        sigma: Envelope::sum(specs.iter().map(|t| t.sigma.clone()).collect()),
        rho: Envelope::sum(specs.iter().map(|t| t.rho.clone()).collect()),
    }
}

/// Slot geometry shared by every conversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitContext {
    pub bandwidth_hz: f64,
}

impl UnitContext {
    pub fn new(bandwidth_hz: f64) -> Result<Self> {
        if !(bandwidth_hz > 0.0) || bandwidth_hz.is_infinite() {
            return Err(Error::domain(format!("bandwidth {bandwidth_hz} Hz must be positive")));
        }
        Ok(Self { bandwidth_hz })
    }

    /// `Δt = 1/W` seconds.
    pub fn slot_seconds(&self) -> f64 {
        1.0 / self.bandwidth_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Unit {
    /// Kilobits (burst); internal nats.
    Kb,
    /// Kilobits per second; internal nats per slot.
    Kbps,
    /// SNR in dB; internal linear ratio.
    Db,
    /// Milliseconds; internal slots.
    Ms,
    /// Kilohertz; internal Hz.
    KHz,
}

impl FromStr for Unit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kb" => Ok(Unit::Kb),
            "kbps" => Ok(Unit::Kbps),
            "dB" | "db" => Ok(Unit::Db),
            "ms" => Ok(Unit::Ms),
            "kHz" | "khz" => Ok(Unit::KHz),
            other => Err(Error::config("unit", format!("unknown unit `{other}`"))),
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Unit::Kb => "kb",
            Unit::Kbps => "kbps",
            Unit::Db => "dB",
            Unit::Ms => "ms",
            Unit::KHz => "kHz",
        })
    }
}

const NATS_PER_KB: f64 = 1000.0 * std::f64::consts::LN_2;

/// Engineering value to internal units. Milliseconds map to a (possibly
/// fractional) slot count; use [`ms_to_slots_ceil`] where an integer is needed.
pub fn to_internal(value: f64, unit: Unit, ctx: &UnitContext) -> f64 {
    match unit {
        Unit::Kb => value * NATS_PER_KB,
        Unit::Kbps => value * NATS_PER_KB * ctx.slot_seconds(),
        Unit::Db => 10f64.powf(value / 10.0),
        Unit::Ms => value * 1e-3 / ctx.slot_seconds(),
        Unit::KHz => value * 1e3,
    }
}

pub fn from_internal(value: f64, unit: Unit, ctx: &UnitContext) -> f64 {
    match unit {
        Unit::Kb => value / NATS_PER_KB,
        Unit::Kbps => value / (NATS_PER_KB * ctx.slot_seconds()),
        Unit::Db => 10.0 * value.log10(),
        Unit::Ms => value * ctx.slot_seconds() * 1e3,
        Unit::KHz => value * 1e-3,
    }
}

/// Whole slots covering `ms` milliseconds.
pub fn ms_to_slots_ceil(ms: f64, ctx: &UnitContext) -> u64 {
    let slots = to_internal(ms, Unit::Ms, ctx);
    // guard against 1e-3/Δt landing a hair above an integer
    let r = slots.round();
    if (slots - r).abs() <= 1e-9 * r.max(1.0) {
        r as u64
    } else {
        slots.ceil() as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> UnitContext {
        UnitContext::new(20_000.0).unwrap()
    }

    #[test]
    fn reference_units() {
        assert!((to_internal(50.0, Unit::Kb, &ctx()) - 34_657.359_027_997_26).abs() < 1e-8);
        assert!((to_internal(30.0, Unit::Kbps, &ctx()) - 1.039_720_770_839_917_9).abs() < 1e-12);
        assert!((to_internal(10.0, Unit::Db, &ctx()) - 10.0).abs() < 1e-12);
        assert_eq!(to_internal(20.0, Unit::KHz, &ctx()), 20_000.0);
        assert!((to_internal(10.0, Unit::Ms, &ctx()) - 200.0).abs() < 1e-9);
        assert_eq!(ms_to_slots_ceil(10.0, &ctx()), 200);
        assert_eq!(ms_to_slots_ceil(10.01, &ctx()), 201);
    }

    #[test]
    fn round_trip() {
        for unit in [Unit::Kb, Unit::Kbps, Unit::Db, Unit::Ms, Unit::KHz] {
            for v in [0.3, 1.0, 17.5, 250.0] {
                let back = from_internal(to_internal(v, unit, &ctx()), unit, &ctx());
                assert!(((back - v) / v).abs() < 1e-12, "{unit} {v}");
            }
        }
    }

    #[test]
    fn unit_parsing() {
        assert_eq!("kbps".parse::<Unit>().unwrap(), Unit::Kbps);
        assert_eq!("dB".parse::<Unit>().unwrap(), Unit::Db);
        assert!(matches!("furlongs".parse::<Unit>(), Err(Error::Config { .. })));
    }

    #[test]
    fn mellin_examples() {
        let empty = TrafficSpec::zero();
        assert_eq!(traffic_mellin(&empty, 2.5, 0, 9).unwrap(), 1.0);
        let burst = TrafficSpec::constant(0.7, 3.0).unwrap();
        let s = 1.8;
        assert!((traffic_mellin(&burst, s, 4, 4).unwrap() - ((s - 1.0) * 0.7).exp()).abs() < 1e-13);
        assert!(traffic_mellin(&burst, 1.0, 0, 1).is_err());
    }

    #[test]
    fn aggregation() {
        let a = TrafficSpec::constant(1.0, 1.0).unwrap();
        let agg = aggregate_traffic(&[a.clone(), a.clone()]);
        assert_eq!(agg.sigma(3.0), 2.0);
        assert_eq!(agg.rho(3.0), 2.0);
        let single = aggregate_traffic(std::slice::from_ref(&a));
        assert_eq!(single.sigma(1.0), 1.0);
        let f = TrafficSpec::from_fns(|s| s, |s| 2.0 * s);
        let mixed = aggregate_traffic(&[a, f]);
        assert!(mixed.sigma.as_constant().is_none());
        assert_eq!(mixed.rho(2.0), 5.0);
    }

    #[test]
    fn rejects_negative_envelopes() {
        assert!(TrafficSpec::constant(-1.0, 0.0).is_err());
        assert!(TrafficSpec::constant(0.0, f64::NAN).is_err());
        assert!(UnitContext::new(0.0).is_err());
    }
}
