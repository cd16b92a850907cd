//! Mellin-transform models of SNR processes.
//!
//! `𝓜_X(s) = E[X^{s−1}]`. For a bivariate process the model gives
//! `𝓜_X(s, τ, t)`, the transform of `X(τ, t)`. Models are evaluated in log
//! space; every evaluation outside the validity interval of a model is `+∞`
//! so that optimizers can treat infeasible `s` uniformly.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::special::ln_binomial;
use crate::traffic::Envelope;

/// Interval of `s` on which a model is finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Validity {
    pub lo: f64,
    pub hi: f64,
    pub lo_inclusive: bool,
    pub hi_inclusive: bool,
}

impl Validity {
    pub const ALL: Validity = Validity {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
        lo_inclusive: false,
        hi_inclusive: false,
    };

    /// `s > lo`
    pub fn above(lo: f64) -> Self {
        Validity { lo, ..Self::ALL }
    }

    /// `s < hi`
    pub fn below(hi: f64) -> Self {
        Validity { hi, ..Self::ALL }
    }

    pub fn closed(lo: f64, hi: f64) -> Self {
        Validity {
            lo,
            hi,
            lo_inclusive: true,
            hi_inclusive: true,
        }
    }

    pub fn contains(&self, s: f64) -> bool {
        let lo_ok = if self.lo_inclusive { s >= self.lo } else { s > self.lo };
        let hi_ok = if self.hi_inclusive { s <= self.hi } else { s < self.hi };
        lo_ok && hi_ok
    }

    pub fn intersect(&self, other: &Validity) -> Validity {
        let (lo, lo_inclusive) = if self.lo > other.lo {
            (self.lo, self.lo_inclusive)
        } else if other.lo > self.lo {
            (other.lo, other.lo_inclusive)
        } else {
            (self.lo, self.lo_inclusive && other.lo_inclusive)
        };
        let (hi, hi_inclusive) = if self.hi < other.hi {
            (self.hi, self.hi_inclusive)
        } else if other.hi < self.hi {
            (other.hi, other.hi_inclusive)
        } else {
            (self.hi, self.hi_inclusive && other.hi_inclusive)
        };
        Validity {
            lo,
            hi,
            lo_inclusive,
            hi_inclusive,
        }
    }
}

/// Mellin transform of a single-slot factor, e.g. `𝓜_{g(γ)}(s)`.
pub trait SlotMellin: Send + Sync + fmt::Debug {
    /// `ln 𝓜(s)`; `+∞` where the transform diverges.
    fn ln_mellin(&self, s: f64) -> f64;

    fn mellin(&self, s: f64) -> f64 {
        self.ln_mellin(s).exp()
    }
}

/// The degenerate factor `c`, with `𝓜(s) = c^{s−1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantFactor(pub f64);

impl SlotMellin for ConstantFactor {
    fn ln_mellin(&self, s: f64) -> f64 {
        (s - 1.0) * self.0.ln()
    }
}

/// A per-slot transform sampled on a geometric `s` grid.
///
/// `ln 𝓜` is interpolated linearly in `ln s`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedMellin {
    s_min: f64,
    s_max: f64,
    ln_s: Vec<f64>,
    ln_values: Vec<f64>,
}

impl TabulatedMellin {
    /// Samples `ln_mellin` at `points` geometrically spaced values in `[s_min, s_max]`.
    pub fn sample(ln_mellin: impl Fn(f64) -> f64, s_min: f64, s_max: f64, points: usize) -> Result<Self> {
        if !(s_min > 0.0 && s_max > s_min) || points < 3 {
            return Err(Error::domain(format!(
                "tabulation needs 0 < s_min < s_max and ≥ 3 points (got {s_min}, {s_max}, {points})"
            )));
        }
        let (a, b) = (s_min.ln(), s_max.ln());
        let ln_s: Vec<f64> = (0..points)
            .map(|i| a + (b - a) * i as f64 / (points - 1) as f64)
            .collect();
        let ln_values = ln_s.iter().map(|&l| ln_mellin(l.exp())).collect();
        Ok(Self {
            s_min,
            s_max,
            ln_s,
            ln_values,
        })
    }

    pub fn validity(&self) -> Validity {
        Validity::closed(self.s_min, self.s_max)
    }

    fn interp(&self, ls: f64) -> f64 {
        let n = self.ln_s.len();
        let step = self.ln_s[1] - self.ln_s[0];
        let pos = ((ls - self.ln_s[0]) / step).clamp(0.0, (n - 1) as f64);
        let i = (pos.floor() as usize).min(n - 2);
        let w = pos - i as f64;
        self.ln_values[i] * (1.0 - w) + self.ln_values[i + 1] * w
    }

    /// Largest gap between the linear and the local quadratic interpolant at
    /// cell midpoints, in units of `ln 𝓜`.
    pub fn interpolation_error(&self) -> f64 {
        let n = self.ln_values.len();
        let mut worst = 0.0_f64;
        for i in 0..n - 1 {
            let j = if i + 2 < n { i } else { n - 3 };
            let (y0, y1, y2) = (self.ln_values[j], self.ln_values[j + 1], self.ln_values[j + 2]);
            // midpoint of cell i expressed in local coordinates of (j, j+1, j+2)
            let x = i as f64 + 0.5 - j as f64;
            let quad = y0 * (x - 1.0) * (x - 2.0) / 2.0 - y1 * x * (x - 2.0) + y2 * x * (x - 1.0) / 2.0;
            let lin = 0.5 * (self.ln_values[i] + self.ln_values[i + 1]);
            worst = worst.max((quad - lin).abs());
        }
        worst
    }
}

impl SlotMellin for TabulatedMellin {
    fn ln_mellin(&self, s: f64) -> f64 {
        if !self.validity().contains(s) {
            return f64::INFINITY;
        }
        self.interp(s.ln())
    }
}

/// Closed-form family bounding `𝓜_X(s, τ, t)` for a class of processes.
#[derive(Clone, Debug)]
pub enum MellinModel {
    /// `prefactor(s) · base(s)^{t−τ}`: products of i.i.d. per-slot factors.
    IidSlotPower {
        base: Arc<dyn SlotMellin>,
        prefactor: Option<Arc<dyn SlotMellin>>,
        validity: Validity,
    },
    /// `exp((s−1)·(ρ(s−1)(t−τ) + σ(s−1)))`: SNR image of (σ(s), ρ(s)) traffic.
    SigmaRho {
        sigma: Envelope,
        rho: Envelope,
        validity: Validity,
    },
    /// `prefactor(s)^N · C(N−1+t−τ, t−τ) · base(s)^{t−τ}`: cascade of N
    /// i.i.d. servers.
    CascadeBinomial {
        base: Arc<dyn SlotMellin>,
        prefactor: Option<Arc<dyn SlotMellin>>,
        hops: u32,
        validity: Validity,
    },
    /// `table(s)^{t−τ}` from a sampled per-slot transform.
    Tabulated { table: Arc<TabulatedMellin> },
}

impl MellinModel {
    pub fn iid(base: Arc<dyn SlotMellin>) -> Self {
        MellinModel::IidSlotPower {
            base,
            prefactor: None,
            validity: Validity::ALL,
        }
    }

    pub fn validity(&self) -> Validity {
        match self {
            MellinModel::IidSlotPower { validity, .. }
            | MellinModel::SigmaRho { validity, .. }
            | MellinModel::CascadeBinomial { validity, .. } => *validity,
            MellinModel::Tabulated { table } => table.validity(),
        }
    }

    /// Per-slot base factor when the model is a pure per-slot power law in `t − τ`.
    fn ln_slot_factor(&self, s: f64) -> Option<f64> {
        match self {
            MellinModel::IidSlotPower { base, .. } => Some(base.ln_mellin(s)),
            MellinModel::SigmaRho { rho, .. } => Some((s - 1.0) * rho.eval(s - 1.0)),
            MellinModel::Tabulated { table } => Some(table.ln_mellin(s)),
            MellinModel::CascadeBinomial { .. } => None,
        }
    }

    /// `ln 𝓜_X(s, τ, t)`; `+∞` outside the validity interval.
    pub fn ln_eval(&self, s: f64, tau: usize, t: usize) -> f64 {
        assert!(tau <= t, "Mellin model evaluated at τ={tau} > t={t}");
        if !self.validity().contains(s) {
            return f64::INFINITY;
        }
        let n = (t - tau) as f64;
        let power = |ln_base: f64| if t == tau { 0.0 } else { n * ln_base };
        let pre = |p: &Option<Arc<dyn SlotMellin>>| p.as_ref().map_or(0.0, |p| p.ln_mellin(s));
        let v = match self {
            MellinModel::IidSlotPower { base, prefactor, .. } => power(base.ln_mellin(s)) + pre(prefactor),
            MellinModel::SigmaRho { sigma, rho, .. } => (s - 1.0) * (rho.eval(s - 1.0) * n + sigma.eval(s - 1.0)),
            MellinModel::CascadeBinomial {
                base, prefactor, hops, ..
            } => {
                let k = (t - tau) as u64;
                let hops = *hops as u64;
                ln_binomial(hops - 1 + k, k) + power(base.ln_mellin(s)) + hops as f64 * pre(prefactor)
            }
            MellinModel::Tabulated { table } => power(table.ln_mellin(s)),
        };
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }

    pub fn eval(&self, s: f64, tau: usize, t: usize) -> f64 {
        self.ln_eval(s, tau, t).exp()
    }
}

/// Model of the constant random variable `c`: `𝓜(s) = c^{s−1}` for all `(τ, t)`.
pub fn mellin_constant(c: f64) -> Result<MellinModel> {
    if !(c > 0.0) || c.is_infinite() {
        return Err(Error::domain(format!("constant {c} must be positive and finite")));
    }
    Ok(MellinModel::SigmaRho {
        sigma: Envelope::Constant(c.ln()),
        rho: Envelope::Constant(0.0),
        validity: Validity::ALL,
    })
}

/// `𝓜_{X·Y}(s) = 𝓜_X(s)·𝓜_Y(s)` for independent processes.
pub fn mellin_product(x: &MellinModel, y: &MellinModel, s: f64, tau: usize, t: usize) -> f64 {
    (x.ln_eval(s, tau, t) + y.ln_eval(s, tau, t)).exp()
}

/// `𝓜_{X/Y}(s) = 𝓜_X(s)·𝓜_Y(2−s)` for independent processes.
pub fn mellin_quotient(x: &MellinModel, y: &MellinModel, s: f64, tau: usize, t: usize) -> f64 {
    (x.ln_eval(s, tau, t) + y.ln_eval(2.0 - s, tau, t)).exp()
}

/// Moment bound `P(X(τ,t) ≥ a) ≤ min(1, a^{−s}·𝓜_X(1+s, τ, t))`.
pub fn moment_bound(x: &MellinModel, a: f64, s: f64, tau: usize, t: usize) -> Result<f64> {
    if !(a > 0.0) || !(s > 0.0) {
        return Err(Error::precondition(format!(
            "moment bound needs a > 0 and s > 0 (got a={a}, s={s})"
        )));
    }
    if a.is_infinite() {
        return Ok(0.0);
    }
    let ln = -s * a.ln() + x.ln_eval(1.0 + s, tau, t);
    Ok(ln.min(0.0).exp())
}

/// `ln Σ_{k=0}^{n} r^k` given `ln r`.
pub(crate) fn ln_geometric_sum(ln_r: f64, n: usize) -> f64 {
    if n == 0 || ln_r == f64::NEG_INFINITY {
        return 0.0;
    }
    if ln_r == f64::INFINITY {
        return f64::INFINITY;
    }
    if ln_r == 0.0 {
        return ((n + 1) as f64).ln();
    }
    if ln_r > 0.0 {
        return n as f64 * ln_r + ln_geometric_sum(-ln_r, n);
    }
    let num = ((n + 1) as f64 * ln_r).exp_m1();
    let den = ln_r.exp_m1();
    (num / den).ln()
}

/// `ln Σ exp(x_i)`.
pub(crate) fn ln_sum_exp(terms: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = terms.into_iter().collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m.is_infinite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Bound on `𝓜_{X⊗Y}(s, τ, t)`: `Σ_{u=τ}^{t} 𝓜_X(s,τ,u)·𝓜_Y(s,u,t)`, for `s < 1`.
pub fn conv_bound(x: &MellinModel, y: &MellinModel, s: f64, tau: usize, t: usize) -> Result<f64> {
    ln_conv_bound(x, y, s, tau, t).map(f64::exp)
}

pub fn ln_conv_bound(x: &MellinModel, y: &MellinModel, s: f64, tau: usize, t: usize) -> Result<f64> {
    if !(s < 1.0) {
        return Err(Error::precondition(format!("convolution bound needs s < 1 (got {s})")));
    }
    if tau > t {
        return Err(Error::precondition(format!("τ={tau} > t={t}")));
    }
    if !x.validity().contains(s) || !y.validity().contains(s) {
        return Ok(f64::INFINITY);
    }
    if let (
        MellinModel::IidSlotPower {
            base: bx,
            prefactor: px,
            ..
        },
        MellinModel::IidSlotPower {
            base: by,
            prefactor: py,
            ..
        },
    ) = (x, y)
    {
        let n = t - tau;
        let (lx, ly) = (bx.ln_mellin(s), by.ln_mellin(s));
        let pre = px.as_ref().map_or(0.0, |p| p.ln_mellin(s)) + py.as_ref().map_or(0.0, |p| p.ln_mellin(s));
        if n == 0 {
            return Ok(pre);
        }
        return Ok(n as f64 * ly + ln_geometric_sum(lx - ly, n) + pre);
    }
    Ok(ln_sum_exp((tau..=t).map(|u| x.ln_eval(s, tau, u) + y.ln_eval(s, u, t))))
}

/// Bound on `𝓜_{X⊘Y}(s, τ, t)`: `Σ_{u=0}^{τ} 𝓜_X(s,u,t)·𝓜_Y(2−s,u,τ)`, for `s > 1`.
///
/// For `τ > t` the factor `𝓜_X(s,u,t)` with `u > t` is taken as 1 (the
/// transform of an empty interval).
pub fn deconv_bound(x: &MellinModel, y: &MellinModel, s: f64, tau: usize, t: usize) -> Result<f64> {
    ln_deconv_bound(x, y, s, tau, t).map(f64::exp)
}

pub fn ln_deconv_bound(x: &MellinModel, y: &MellinModel, s: f64, tau: usize, t: usize) -> Result<f64> {
    if !(s > 1.0) {
        return Err(Error::precondition(format!(
            "deconvolution bound needs s > 1 (got {s})"
        )));
    }
    let s2 = 2.0 - s;
    if !x.validity().contains(s) || !y.validity().contains(s2) {
        return Ok(f64::INFINITY);
    }
    if tau <= t {
        if let (Some(lx1), MellinModel::IidSlotPower { base, prefactor, .. }) = (x.ln_slot_factor(s), y) {
            let head = x.ln_eval(s, tau, t) + prefactor.as_ref().map_or(0.0, |p| p.ln_mellin(s2));
            return Ok(head + ln_geometric_sum(lx1 + base.ln_mellin(s2), tau));
        }
    }
    Ok(ln_sum_exp((0..=tau).map(|u| {
        let xs = if u <= t { x.ln_eval(s, u, t) } else { 0.0 };
        xs + y.ln_eval(s2, u, tau)
    })))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iid_const(c: f64) -> MellinModel {
        MellinModel::iid(Arc::new(ConstantFactor(c)))
    }

    #[test]
    fn constants() {
        let one = mellin_constant(1.0).unwrap();
        assert_eq!(one.eval(3.7, 0, 5), 1.0);
        let e = mellin_constant(std::f64::consts::E).unwrap();
        assert!((e.eval(2.0, 0, 0) - std::f64::consts::E).abs() < 1e-15);
        assert!((mellin_constant(2.0).unwrap().eval(3.0, 1, 4) - 4.0).abs() < 1e-15);
        assert!(mellin_constant(0.0).is_err());
        assert!(mellin_constant(-1.0).is_err());
    }

    #[test]
    fn products_and_quotients_of_constants() {
        let (two, three) = (mellin_constant(2.0).unwrap(), mellin_constant(3.0).unwrap());
        assert!((mellin_product(&two, &three, 2.0, 0, 1) - 6.0).abs() < 1e-14);
        let (six, one) = (mellin_constant(6.0).unwrap(), mellin_constant(1.0).unwrap());
        assert!((mellin_quotient(&six, &two, 2.0, 0, 1) - 3.0).abs() < 1e-14);
        assert!((mellin_quotient(&six, &one, 2.5, 0, 1) - six.eval(2.5, 0, 1)).abs() < 1e-12);
    }

    #[test]
    fn moment_bound_limits() {
        let two = mellin_constant(2.0).unwrap();
        assert_eq!(moment_bound(&two, 1.0, 1.0, 0, 0).unwrap(), 1.0);
        assert_eq!(moment_bound(&two, f64::INFINITY, 1.0, 0, 0).unwrap(), 0.0);
        assert!(moment_bound(&two, 1e300, 1.0, 0, 0).unwrap() < 1e-299);
        assert!(moment_bound(&two, 0.0, 1.0, 0, 0).is_err());
    }

    #[test]
    fn outside_validity_is_infinite() {
        let m = MellinModel::SigmaRho {
            sigma: Envelope::Constant(1.0),
            rho: Envelope::Constant(1.0),
            validity: Validity::above(1.0),
        };
        assert_eq!(m.ln_eval(0.5, 0, 3), f64::INFINITY);
        assert!(m.ln_eval(1.5, 0, 3).is_finite());
    }

    #[test]
    fn iid_power_diagonal_is_one() {
        let m = iid_const(3.0);
        assert_eq!(m.eval(0.3, 4, 4), 1.0);
        assert!((m.eval(2.0, 1, 4) - 27.0).abs() < 1e-12);
    }

    #[test]
    fn conv_single_term_and_equal_bases() {
        let b = iid_const(1.7);
        assert!((conv_bound(&b, &b, 0.5, 3, 3).unwrap() - 1.0).abs() < 1e-15);
        let s = 0.4;
        let base = 1.7f64.powf(s - 1.0);
        for big_t in [1usize, 2, 7, 30] {
            let want = (big_t + 1) as f64 * base.powi(big_t as i32);
            let got = conv_bound(&b, &b, s, 0, big_t).unwrap();
            assert!(((got - want) / want).abs() < 1e-13, "T={big_t}");
        }
        assert!(conv_bound(&b, &b, 1.0, 0, 3).is_err());
    }

    #[test]
    fn conv_closed_form_matches_direct_sum() {
        let x = iid_const(1.3);
        let y = iid_const(2.9);
        let s = -0.7;
        let direct: f64 = (2..=9).map(|u| x.eval(s, 2, u) * y.eval(s, u, 9)).sum();
        let got = conv_bound(&x, &y, s, 2, 9).unwrap();
        assert!(((got - direct) / direct).abs() < 1e-13);
    }

    #[test]
    fn deconv_tau_zero_single_term() {
        let x = MellinModel::SigmaRho {
            sigma: Envelope::Constant(0.3),
            rho: Envelope::Constant(0.2),
            validity: Validity::above(1.0),
        };
        let y = iid_const(2.0);
        let got = deconv_bound(&x, &y, 1.6, 0, 5).unwrap();
        assert!((got - x.eval(1.6, 0, 5)).abs() < 1e-12);
        assert!(deconv_bound(&x, &y, 1.0, 0, 5).is_err());
    }

    #[test]
    fn deconv_closed_form_matches_direct_sum() {
        let x = MellinModel::SigmaRho {
            sigma: Envelope::Constant(0.3),
            rho: Envelope::Constant(0.2),
            validity: Validity::above(1.0),
        };
        let y = iid_const(2.0);
        let s = 1.4;
        for (tau, t) in [(3usize, 7usize), (7, 7), (0, 0)] {
            let direct: f64 = (0..=tau).map(|u| x.eval(s, u, t) * y.eval(2.0 - s, u, tau)).sum();
            let got = deconv_bound(&x, &y, s, tau, t).unwrap();
            assert!(((got - direct) / direct).abs() < 1e-13);
        }
        // τ > t falls back to direct summation with unit factors
        let got = deconv_bound(&x, &y, s, 6, 2).unwrap();
        let direct: f64 = (0..=6)
            .map(|u| if u <= 2 { x.eval(s, u, 2) } else { 1.0 } * y.eval(2.0 - s, u, 6))
            .sum();
        assert!(((got - direct) / direct).abs() < 1e-13);
    }

    #[test]
    fn cascade_binomial_prefactor() {
        let m = MellinModel::CascadeBinomial {
            base: Arc::new(ConstantFactor(2.0)),
            prefactor: None,
            hops: 3,
            validity: Validity::below(1.0),
        };
        let s = 0.5;
        let want = 15.0 * 2f64.powf(s - 1.0).powi(4);
        assert!((m.eval(s, 2, 6) - want).abs() < 1e-12);
        assert_eq!(m.eval(1.5, 2, 6), f64::INFINITY);
    }

    #[test]
    fn tabulated_tracks_source() {
        let f = |s: f64| (s - 1.0) * 2f64.ln() + 0.1 * s * s;
        let t = TabulatedMellin::sample(f, 0.05, 5.0, 400).unwrap();
        for &s in &[0.05, 0.1, 0.77, 2.5, 5.0] {
            assert!((t.ln_mellin(s) - f(s)).abs() < 1e-3);
        }
        assert!(t.interpolation_error() < 1e-3);
        assert!(t.interpolation_error() > 0.0);
        assert_eq!(t.ln_mellin(6.0), f64::INFINITY);
        let m = MellinModel::Tabulated { table: Arc::new(t) };
        assert_eq!(m.eval(0.5, 3, 3), 1.0);
    }

    #[test]
    fn geometric_sums() {
        for &(r, n) in &[(0.5f64, 10usize), (1.0, 4), (2.0, 6), (0.999_999, 1000)] {
            let direct: f64 = (0..=n).map(|k| r.powi(k as i32)).sum();
            let got = ln_geometric_sum(r.ln(), n).exp();
            assert!(((got - direct) / direct).abs() < 1e-12, "r={r}");
        }
    }
}
