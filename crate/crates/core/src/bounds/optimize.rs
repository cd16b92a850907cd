//! One-dimensional minimization over the free parameter `s > 0`.

/// Lower end of the log-spaced scan.
pub const S_MIN: f64 = 1e-6;
/// Initial upper end of the scan.
pub const S_MAX: f64 = 64.0;
/// Hard cap for the upper end after doubling.
pub const S_CAP: f64 = 4096.0;
pub const SCAN_POINTS: usize = 256;
/// Golden-section stops when the bracket is this small relative to `s`.
pub const S_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Optimum {
    pub s_star: f64,
    /// `+∞` when the objective is infinite everywhere on the scan.
    pub value: f64,
    /// Smallest and largest scan points with a finite objective.
    pub feasible: Option<(f64, f64)>,
    pub evaluations: usize,
    /// Upper end of the final scan.
    pub s_upper: f64,
}

impl Optimum {
    pub fn is_feasible(&self) -> bool {
        self.value.is_finite()
    }
}

pub(crate) fn log_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(move |i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
}

/// Minimizes `objective` over `s ∈ [S_MIN, S_MAX]`, extending the upper end
/// by doubling (up to [`S_CAP`]) while the minimum sits on it.
///
/// The objective should return `+∞` outside its feasible set. NaN is treated
/// as `+∞`.
pub fn optimize_s(objective: impl Fn(f64) -> f64) -> Optimum {
    let f = |s: f64| {
        let v = objective(s);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut evaluations = 0;
    let mut upper = S_MAX;
    loop {
        let grid: Vec<f64> = log_grid(S_MIN, upper, SCAN_POINTS).collect();
        let values: Vec<f64> = grid.iter().map(|&s| f(s)).collect();
        evaluations += grid.len();

        let mut best = 0;
        for (i, v) in values.iter().enumerate() {
            if *v < values[best] {
                best = i;
            }
        }
        let feasible = {
            let mut idx = values.iter().enumerate().filter(|(_, v)| v.is_finite()).map(|(i, _)| i);
            idx.next().map(|first| {
                let last = idx.next_back().unwrap_or(first);
                (grid[first], grid[last])
            })
        };
        if feasible.is_none() {
            return Optimum {
                s_star: f64::NAN,
                value: f64::INFINITY,
                feasible: None,
                evaluations,
                s_upper: upper,
            };
        }
        if best == SCAN_POINTS - 1 && upper < S_CAP {
            upper = (upper * 2.0).min(S_CAP);
            continue;
        }

        let lo = grid[best.saturating_sub(1)];
        let hi = grid[(best + 1).min(SCAN_POINTS - 1)];
        let (s_star, value, n) = golden_section(&f, lo, hi, grid[best], values[best]);
        evaluations += n;
        return Optimum {
            s_star,
            value,
            feasible,
            evaluations,
            s_upper: upper,
        };
    }
}

/// Golden-section search on `[lo, hi]`; never returns worse than the seed point.
fn golden_section(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, seed_s: f64, seed_v: f64) -> (f64, f64, usize) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut n = 0;
    let mut best = (seed_s, seed_v);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    n += 2;
    while (hi - lo) > S_REL_TOL * 0.5 * (hi + lo) {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
        n += 1;
        for (x, v) in [(x1, f1), (x2, f2)] {
            if v < best.1 {
                best = (x, v);
            }
        }
    }
    (best.0, best.1, n)
}
