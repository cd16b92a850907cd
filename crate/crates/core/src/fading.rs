//! Fading channel models.
//!
//! A channel is described by its per-slot gain `g(γ) = 1 + γ` in the SNR
//! domain. A model couples a sampler for `γ` with the Mellin transform of
//! `g(γ)`; Rayleigh fading is the one model provided.

use std::fmt;
use std::sync::Arc;

use rand::RngCore;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::mellin::{MellinModel, SlotMellin, Validity};
use crate::special::ln_upper_incomplete_gamma;
use crate::traffic::{to_internal, Unit, UnitContext};

/// A fading law: how to draw an SNR and what `E[g(γ)^{s−1}]` is.
pub trait FadingChannel: SlotMellin {
    /// One linear SNR sample.
    fn sample_snr(&self, rng: &mut dyn RngCore) -> f64;

    /// `E[ln(1+γ)]`, the mean per-slot capacity in nats.
    fn mean_capacity(&self) -> f64;
}

/// `γ = γ̄·|h|²` with `|h|²` unit-mean exponential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rayleigh {
    mean_snr: f64,
}

impl Rayleigh {
    pub fn new(mean_snr: f64) -> Result<Self> {
        if !(mean_snr > 0.0) || mean_snr.is_infinite() {
            return Err(Error::domain(format!(
                "average SNR {mean_snr} must be positive and finite"
            )));
        }
        Ok(Self { mean_snr })
    }

    pub fn mean_snr(&self) -> f64 {
        self.mean_snr
    }

    /// `ln(e^{1/γ̄} γ̄^{s−1} Γ(s, 1/γ̄))`.
    pub fn ln_g_mellin(&self, s: f64) -> f64 {
        let x = 1.0 / self.mean_snr;
        match ln_upper_incomplete_gamma(s, x) {
            Ok(lg) => x + (s - 1.0) * self.mean_snr.ln() + lg,
            Err(_) => f64::INFINITY,
        }
    }
}

impl SlotMellin for Rayleigh {
    fn ln_mellin(&self, s: f64) -> f64 {
        self.ln_g_mellin(s)
    }
}

impl FadingChannel for Rayleigh {
    fn sample_snr(&self, rng: &mut dyn RngCore) -> f64 {
        let e: f64 = Exp1.sample(rng);
        self.mean_snr * e
    }

    fn mean_capacity(&self) -> f64 {
        // E[ln(1+γ̄E)] = e^{1/γ̄} E₁(1/γ̄) = e^{1/γ̄} Γ(0, 1/γ̄)
        let x = 1.0 / self.mean_snr;
        (x + ln_upper_incomplete_gamma(0.0, x).expect("x > 0")).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FadingKind {
    Rayleigh,
}

/// A fading channel of a given kind, average SNR and bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    pub kind: FadingKind,
    /// Linear average SNR `γ̄`.
    pub mean_snr: f64,
    pub bandwidth_hz: f64,
}

impl ChannelSpec {
    pub fn rayleigh(mean_snr: f64, bandwidth_hz: f64) -> Result<Self> {
        Rayleigh::new(mean_snr)?;
        UnitContext::new(bandwidth_hz)?;
        Ok(Self {
            kind: FadingKind::Rayleigh,
            mean_snr,
            bandwidth_hz,
        })
    }

    /// Rayleigh channel with `γ̄` given in dB and `W` in kHz.
    pub fn rayleigh_db(snr_db: f64, bandwidth_khz: f64) -> Result<Self> {
        let ctx = UnitContext::new(1.0)?;
        Self::rayleigh(
            to_internal(snr_db, Unit::Db, &ctx),
            to_internal(bandwidth_khz, Unit::KHz, &ctx),
        )
    }

    pub fn units(&self) -> UnitContext {
        UnitContext {
            bandwidth_hz: self.bandwidth_hz,
        }
    }

    pub fn model(&self) -> Arc<dyn FadingChannel> {
        match self.kind {
            FadingKind::Rayleigh => Arc::new(Rayleigh {
                mean_snr: self.mean_snr,
            }),
        }
    }
}

impl fmt::Display for ChannelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}(γ̄={}, W={} Hz)", self.kind, self.mean_snr, self.bandwidth_hz)
    }
}

/// `𝓜_{g(γ)}(s) = e^{1/γ̄} γ̄^{s−1} Γ(s, 1/γ̄)`; `+∞` where it diverges.
pub fn rayleigh_g_mellin(mean_snr: f64, s: f64) -> Result<f64> {
    Ok(Rayleigh::new(mean_snr)?.ln_g_mellin(s).exp())
}

/// `𝓜_𝒮(s, τ, t) = 𝓜_{g(γ)}(s)^{t−τ}` for the Rayleigh dynamic server.
pub fn rayleigh_service_mellin(mean_snr: f64, s: f64, tau: usize, t: usize) -> Result<f64> {
    if tau > t {
        return Err(Error::precondition(format!("τ={tau} > t={t}")));
    }
    Ok(rayleigh_service_model(mean_snr)?.eval(s, tau, t))
}

/// Model form of [`rayleigh_service_mellin`].
pub fn rayleigh_service_model(mean_snr: f64) -> Result<MellinModel> {
    Ok(MellinModel::IidSlotPower {
        base: Arc::new(Rayleigh::new(mean_snr)?),
        prefactor: None,
        validity: Validity::ALL,
    })
}

/// `γ̄·E` with `E ~ Exp(1)`.
pub fn sample_gamma<R: RngCore + ?Sized>(mean_snr: f64, rng: &mut R) -> f64 {
    let e: f64 = Exp1.sample(rng);
    mean_snr * e
}
