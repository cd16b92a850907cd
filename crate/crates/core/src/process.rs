//! Sample-path arithmetic on bivariate processes.
//!
//! A process is indexed by slot pairs `(τ, t)` with `0 ≤ τ ≤ t ≤ horizon`.
//! Paths built from per-slot increments are stored as a single cumulative
//! vector; outputs of convolutions are genuinely bivariate and stored as a
//! packed upper-triangular matrix.
//!
//! Bit-domain values are in nats. SNR-domain values are positive reals and
//! `f64::INFINITY` plays the role of the null element of the (min, ×) dioid:
//! it absorbs under multiplication and loses under `min`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    /// `F(0, t)` for `t = 0..=horizon`; `F(τ, t) = F(0, t) − F(0, τ)`.
    Cumulative(Vec<f64>),
    /// Packed rows `τ = 0..=horizon`, each holding `t = τ..=horizon`.
    Triangular(Vec<f64>),
}

#[inline]
fn tri_index(horizon: usize, tau: usize, t: usize) -> usize {
    tau * (2 * horizon + 3 - tau) / 2 + (t - tau)
}

fn tri_len(horizon: usize) -> usize {
    (horizon + 1) * (horizon + 2) / 2
}

fn tri_from_fn(horizon: usize, mut f: impl FnMut(usize, usize) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(tri_len(horizon));
    for tau in 0..=horizon {
        for t in tau..=horizon {
            out.push(f(tau, t));
        }
    }
    out
}

fn check_horizons(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Dimension { left: a, right: b });
    }
    Ok(())
}

/// Bit-domain bivariate process (cumulative arrivals, departures, service).
#[derive(Debug, Clone, PartialEq)]
pub struct BitProcess {
    horizon: usize,
    repr: Repr,
}

impl BitProcess {
    /// Builds an additive path from per-slot increments; `increments[i]` is
    /// the amount in slot `i`, so `F(τ, t) = Σ_{i=τ}^{t−1} increments[i]`.
    pub fn from_increments(increments: &[f64]) -> Result<Self> {
        let mut cum = Vec::with_capacity(increments.len() + 1);
        let mut acc = 0.0;
        cum.push(0.0);
        for (i, &x) in increments.iter().enumerate() {
            if !(x >= 0.0) || x.is_infinite() {
                return Err(Error::domain(format!(
                    "slot {i}: increment {x} is not a finite nonnegative amount"
                )));
            }
            acc += x;
            cum.push(acc);
        }
        Ok(Self {
            horizon: increments.len(),
            repr: Repr::Cumulative(cum),
        })
    }

    /// Builds an additive path from cumulative values `F(0, t)`, `t = 0..=horizon`.
    pub fn from_cumulative(cumulative: Vec<f64>) -> Result<Self> {
        if cumulative.is_empty() {
            return Err(Error::domain("cumulative path needs at least F(0,0)"));
        }
        if cumulative[0] != 0.0 {
            return Err(Error::domain("cumulative path must start at 0"));
        }
        if cumulative.windows(2).any(|w| !(w[1] >= w[0])) {
            return Err(Error::domain("cumulative path must be nondecreasing"));
        }
        Ok(Self {
            horizon: cumulative.len() - 1,
            repr: Repr::Cumulative(cumulative),
        })
    }

    /// Builds a general bivariate process from `f(τ, t)`.
    pub fn from_fn(horizon: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let values = tri_from_fn(horizon, f);
        if let Some(v) = values.iter().find(|v| v.is_nan()) {
            return Err(Error::domain(format!("process value {v}")));
        }
        Ok(Self {
            horizon,
            repr: Repr::Triangular(values),
        })
    }

    /// The all-zero path.
    pub fn zero(horizon: usize) -> Self {
        Self {
            horizon,
            repr: Repr::Cumulative(vec![0.0; horizon + 1]),
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// `F(τ, t)`; panics if `τ > t` or `t > horizon`.
    pub fn get(&self, tau: usize, t: usize) -> f64 {
        assert!(tau <= t && t <= self.horizon, "index ({tau},{t}) out of range");
        match &self.repr {
            Repr::Cumulative(c) => c[t] - c[tau],
            Repr::Triangular(v) => v[tri_index(self.horizon, tau, t)],
        }
    }

    /// `F(0, t)`.
    pub fn cumulative(&self, t: usize) -> f64 {
        self.get(0, t)
    }

    pub fn is_additive(&self) -> bool {
        matches!(self.repr, Repr::Cumulative(_))
    }

    /// Nonnegativity, vanishing diagonal and monotonicity in `t`.
    pub fn satisfies_invariants(&self) -> bool {
        (0..=self.horizon).all(|tau| {
            self.get(tau, tau) == 0.0
                && (tau..=self.horizon)
                    .all(|t| self.get(tau, t) >= 0.0 && (t == tau || self.get(tau, t) >= self.get(tau, t - 1)))
        })
    }
}

/// SNR-domain bivariate process taking values in ℝ⁺ ∪ {∞}.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrProcess {
    horizon: usize,
    repr: SnrRepr,
}

#[derive(Debug, Clone, PartialEq)]
enum SnrRepr {
    /// Log of the cumulative product: `X(τ, t) = exp(L(t) − L(τ))`.
    LogCumulative(Vec<f64>),
    Triangular(Vec<f64>),
}

impl SnrProcess {
    /// Builds a multiplicative path from per-slot factors (`X(τ,t) = ∏ factors[τ..t]`).
    pub fn from_factors(factors: &[f64]) -> Result<Self> {
        let mut logs = Vec::with_capacity(factors.len() + 1);
        logs.push(0.0);
        let mut acc = 0.0;
        for (i, &g) in factors.iter().enumerate() {
            if !(g > 0.0) || g.is_infinite() {
                return Err(Error::domain(format!(
                    "slot {i}: factor {g} must be positive and finite"
                )));
            }
            acc += g.ln();
            logs.push(acc);
        }
        Ok(Self {
            horizon: factors.len(),
            repr: SnrRepr::LogCumulative(logs),
        })
    }

    /// Builds a general process from `f(τ, t)`; every value must be positive (∞ allowed).
    pub fn from_fn(horizon: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let values = tri_from_fn(horizon, f);
        if let Some(v) = values.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::domain(format!("SNR process value {v} is not positive")));
        }
        Ok(Self {
            horizon,
            repr: SnrRepr::Triangular(values),
        })
    }

    /// The process identically equal to 1 (aggregate of no flows).
    pub fn ones(horizon: usize) -> Self {
        Self {
            horizon,
            repr: SnrRepr::LogCumulative(vec![0.0; horizon + 1]),
        }
    }

    /// The unity element Δ of (𝓕⁺, min, ⊗): 1 on the diagonal, ∞ above it.
    pub fn unity(horizon: usize) -> Self {
        Self {
            horizon,
            repr: SnrRepr::Triangular(tri_from_fn(
                horizon,
                |tau, t| {
                    if tau >= t {
                        1.0
                    } else {
                        f64::INFINITY
                    }
                },
            )),
        }
    }

    /// The null element: +∞ everywhere.
    pub fn null(horizon: usize) -> Self {
        Self {
            horizon,
            repr: SnrRepr::Triangular(vec![f64::INFINITY; tri_len(horizon)]),
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn get(&self, tau: usize, t: usize) -> f64 {
        assert!(tau <= t && t <= self.horizon, "index ({tau},{t}) out of range");
        match &self.repr {
            SnrRepr::LogCumulative(l) => (l[t] - l[tau]).exp(),
            SnrRepr::Triangular(v) => v[tri_index(self.horizon, tau, t)],
        }
    }

    /// Pointwise minimum, the "addition" of the dioid.
    pub fn pointwise_min(&self, other: &SnrProcess) -> Result<SnrProcess> {
        check_horizons(self.horizon, other.horizon)?;
        SnrProcess::from_fn(self.horizon, |tau, t| self.get(tau, t).min(other.get(tau, t)))
    }

    pub fn is_monotone(&self) -> bool {
        (0..=self.horizon).all(|tau| (tau + 1..=self.horizon).all(|t| self.get(tau, t) >= self.get(tau, t - 1)))
    }
}

/// Value of an inf/sup together with the earliest index realizing it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub value: f64,
    pub at: usize,
}

/// `inf_{τ ≤ u ≤ t} A(τ, u) + S(u, t)` with the earliest minimizer.
pub fn minplus_convolve_at(a: &BitProcess, s: &BitProcess, tau: usize, t: usize) -> Result<Extremum> {
    check_horizons(a.horizon, s.horizon)?;
    let mut best = Extremum {
        value: f64::INFINITY,
        at: tau,
    };
    for u in tau..=t {
        let v = a.get(tau, u) + s.get(u, t);
        if v < best.value {
            best = Extremum { value: v, at: u };
        }
    }
    Ok(best)
}

/// (min, +) convolution `A ∗ S`.
pub fn minplus_convolve(a: &BitProcess, s: &BitProcess) -> Result<BitProcess> {
    check_horizons(a.horizon, s.horizon)?;
    BitProcess::from_fn(a.horizon, |tau, t| {
        minplus_convolve_at(a, s, tau, t).map(|e| e.value).unwrap_or(f64::NAN)
    })
}

/// `inf_{τ ≤ u ≤ t} X(τ, u) · Y(u, t)` with the earliest minimizer.
pub fn mx_convolve_at(x: &SnrProcess, y: &SnrProcess, tau: usize, t: usize) -> Result<Extremum> {
    check_horizons(x.horizon, y.horizon)?;
    let mut best = Extremum {
        value: f64::INFINITY,
        at: tau,
    };
    for u in tau..=t {
        let v = x.get(tau, u) * y.get(u, t);
        if v < best.value {
            best = Extremum { value: v, at: u };
        }
    }
    Ok(best)
}

/// (min, ×) convolution `X ⊗ Y`.
pub fn mx_convolve(x: &SnrProcess, y: &SnrProcess) -> Result<SnrProcess> {
    check_horizons(x.horizon, y.horizon)?;
    let values = tri_from_fn(x.horizon, |tau, t| {
        let mut best = f64::INFINITY;
        for u in tau..=t {
            best = best.min(x.get(tau, u) * y.get(u, t));
        }
        best
    });
    Ok(SnrProcess {
        horizon: x.horizon,
        repr: SnrRepr::Triangular(values),
    })
}

/// (min, ×) deconvolution `X ⊘ Y (τ, t) = sup_{0 ≤ u ≤ τ} X(u, t) / Y(u, τ)`.
///
/// `τ` may exceed `t` (the delay read-out); there `X(u, t)` is taken as 1 for
/// `u > t`, the SNR image of an empty interval.
pub fn mx_deconvolve_at(x: &SnrProcess, y: &SnrProcess, tau: usize, t: usize) -> Result<Extremum> {
    check_horizons(x.horizon, y.horizon)?;
    if tau > x.horizon || t > x.horizon {
        return Err(Error::domain(format!("({tau},{t}) beyond horizon {}", x.horizon)));
    }
    let mut best = Extremum {
        value: f64::NEG_INFINITY,
        at: 0,
    };
    for u in 0..=tau {
        let num = if u <= t { x.get(u, t) } else { 1.0 };
        let den = y.get(u, tau);
        if !(den > 0.0) {
            return Err(Error::domain(format!("Y({u},{tau}) = {den} is not positive")));
        }
        let v = num / den;
        if v > best.value {
            best = Extremum { value: v, at: u };
        }
    }
    Ok(best)
}

pub fn mx_deconvolve(x: &SnrProcess, y: &SnrProcess, tau: usize, t: usize) -> Result<f64> {
    mx_deconvolve_at(x, y, tau, t).map(|e| e.value)
}

/// Backlog `B(t) = A(0, t) − D(0, t)` in nats.
pub fn backlog_of(a: &BitProcess, d: &BitProcess, t: usize) -> Result<f64> {
    check_horizons(a.horizon, d.horizon)?;
    let arr = a.cumulative(t);
    let dep = d.cumulative(t);
    if dep > arr + CAUSALITY_SLACK * arr.abs().max(1.0) {
        return Err(Error::InconsistentTrace {
            slot: t,
            arrivals: arr,
            departures: dep,
        });
    }
    Ok((arr - dep).max(0.0))
}

/// Relative slack under which departures are still treated as equal to arrivals.
pub const CAUSALITY_SLACK: f64 = 1e-12;

/// Virtual delay of the traffic that arrived before slot `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VirtualDelay {
    Exact(usize),
    /// Not cleared by the end of the trace; the delay is at least this many slots.
    Censored {
        at_least: usize,
    },
}

impl VirtualDelay {
    pub fn exceeds(&self, w: usize) -> Option<bool> {
        match *self {
            VirtualDelay::Exact(d) => Some(d > w),
            VirtualDelay::Censored { at_least } if at_least > w => Some(true),
            VirtualDelay::Censored { .. } => None,
        }
    }
}

/// `W(t) = inf{u ≥ 0 : A(0, t) ≤ D(0, t + u)}`.
pub fn delay_of(a: &BitProcess, d: &BitProcess, t: usize) -> Result<VirtualDelay> {
    check_horizons(a.horizon, d.horizon)?;
    let target = a.cumulative(t);
    let slack = CAUSALITY_SLACK * target.abs().max(1.0);
    for tt in t..=d.horizon {
        if d.cumulative(tt) + slack >= target {
            return Ok(VirtualDelay::Exact(tt - t));
        }
    }
    Ok(VirtualDelay::Censored {
        at_least: d.horizon - t + 1,
    })
}

/// Elementwise `exp`, mapping a bit-domain process to the SNR domain.
pub fn to_snr(p: &BitProcess) -> SnrProcess {
    match &p.repr {
        Repr::Cumulative(c) => SnrProcess {
            horizon: p.horizon,
            repr: SnrRepr::LogCumulative(c.clone()),
        },
        Repr::Triangular(v) => SnrProcess {
            horizon: p.horizon,
            repr: SnrRepr::Triangular(v.iter().map(|x| x.exp()).collect()),
        },
    }
}

/// Elementwise `ln`, mapping an SNR process back to the bit domain.
pub fn to_bit(q: &SnrProcess) -> Result<BitProcess> {
    match &q.repr {
        SnrRepr::LogCumulative(l) => Ok(BitProcess {
            horizon: q.horizon,
            repr: Repr::Cumulative(l.clone()),
        }),
        SnrRepr::Triangular(v) => {
            if let Some(x) = v.iter().find(|x| !(**x > 0.0)) {
                return Err(Error::domain(format!("log of nonpositive value {x}")));
            }
            Ok(BitProcess {
                horizon: q.horizon,
                repr: Repr::Triangular(v.iter().map(|x| x.ln()).collect()),
            })
        }
    }
}

/// Product of SNR arrival processes, the SNR image of summing flows.
/// An empty list yields the all-ones process over `horizon`.
pub fn aggregate_snr(horizon: usize, flows: &[SnrProcess]) -> Result<SnrProcess> {
    for f in flows {
        check_horizons(horizon, f.horizon)?;
    }
    if flows.iter().all(|f| matches!(f.repr, SnrRepr::LogCumulative(_))) {
        let mut logs = vec![0.0; horizon + 1];
        for f in flows {
            if let SnrRepr::LogCumulative(l) = &f.repr {
                for (acc, v) in logs.iter_mut().zip(l) {
                    *acc += v;
                }
            }
        }
        return Ok(SnrProcess {
            horizon,
            repr: SnrRepr::LogCumulative(logs),
        });
    }
    SnrProcess::from_fn(horizon, |tau, t| flows.iter().map(|f| f.get(tau, t)).product())
}
