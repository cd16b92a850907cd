//! Discrete-time fluid simulation of the fading tandem.
//!
//! Every slot, hop `n` draws `γ ~ Rayleigh(γ̄)` and can move `ln(1+γ)` nats.
//! Traffic served at hop `n` enters hop `n+1` in the same slot. Queues start
//! empty. Replications are independent, each seeded from the master seed by
//! `splitmix64(seed + index)`, and are merged in index order.

mod stats;

use std::collections::VecDeque;
use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use stats::{violation_from_indicators, wilson_interval, Quantiles, Violation, BATCHES_PER_REPLICATION, Z95};

use crate::bounds::{delay_bound, NetworkSpec};
use crate::error::{Error, Result};
use crate::process::VirtualDelay;
use crate::traffic::TrafficSpec;

/// How a hop shares its capacity between cross and through traffic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheduling {
    /// Cross traffic is served first; the through flow gets what is left.
    #[default]
    PriorityToCross,
    /// One FIFO queue for both flows.
    FifoAggregate,
}

/// Sample path used for the through flow and for every cross flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SourceKind {
    /// Burst `σ` in the first slot, then `ρ` every slot.
    #[default]
    ConstantRate,
    /// A token bucket of depth `σ` refilled by `ρ` per slot, starting full,
    /// that releases its whole content whenever it is full. Produces a burst
    /// of `σ` every `⌈σ/ρ⌉` slots.
    TokenBucketGreedy,
}

/// Default cap on retained steady-state values across all replications.
pub const DEFAULT_MAX_RETAINED: usize = 25_000_000;

/// Relative tolerance when deciding that departures have caught up with arrivals.
pub const DELAY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub net: NetworkSpec,
    /// Slots per replication, warmup included.
    pub slots: usize,
    pub replications: usize,
    pub warmup: usize,
    /// Extra slots simulated after `slots` so that late delays resolve.
    pub drain: usize,
    pub seed: u64,
    pub scheduling: Scheduling,
    pub source: SourceKind,
    /// Window lengths `k` for which `D_N(t−k, t)` is recorded.
    pub output_windows: Vec<usize>,
    /// Trace rows are kept for the first `trace_slots` slots of replication 0.
    pub trace_slots: usize,
    pub max_retained: usize,
}

impl SimConfig {
    /// Configuration with `steady_slots` sampled slots per replication and the
    /// default warmup: ten times the delay bound, at least 10⁴ slots.
    pub fn new(net: NetworkSpec, steady_slots: usize, replications: usize, seed: u64) -> Self {
        let warmup = default_warmup(&net);
        SimConfig {
            net,
            slots: warmup + steady_slots,
            replications,
            warmup,
            drain: warmup,
            seed,
            scheduling: Scheduling::default(),
            source: SourceKind::default(),
            output_windows: Vec::new(),
            trace_slots: 0,
            max_retained: DEFAULT_MAX_RETAINED,
        }
    }

    pub fn steady_slots(&self) -> usize {
        self.slots.saturating_sub(self.warmup)
    }

    pub fn validate(&self) -> Result<()> {
        if self.slots <= self.warmup {
            return Err(Error::config(
                "sim.slots",
                format!("{} slots do not exceed warmup {}", self.slots, self.warmup),
            ));
        }
        if self.replications == 0 {
            return Err(Error::config("sim.replications", "at least one replication is needed"));
        }
        let per_slot = 2 + self.net.hops as usize + self.output_windows.len();
        let retained = self
            .replications
            .saturating_mul(self.steady_slots())
            .saturating_mul(per_slot);
        if retained > self.max_retained {
            return Err(Error::ResourceLimit(format!(
                "{retained} retained values exceed the limit of {}",
                self.max_retained
            )));
        }
        Ok(())
    }
}

/// `max(10·w^ε, 10⁴)` slots; `10⁴` when the delay bound is infinite.
pub fn default_warmup(net: &NetworkSpec) -> usize {
    let w = delay_bound(net).value;
    if w.is_finite() {
        ((10.0 * w) as usize).max(10_000)
    } else {
        10_000
    }
}

/// `splitmix64(seed + index)`.
pub fn replication_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed.wrapping_add(index as u64).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One slot at one hop, for audit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub slot: usize,
    pub hop: usize,
    /// Through traffic entering the hop in this slot.
    pub arrivals_nats: f64,
    pub capacity_nats: f64,
    /// Through traffic leaving the hop in this slot.
    pub served_nats: f64,
    /// Through traffic queued at the hop after this slot.
    pub queue_nats: f64,
    pub cross_arrivals_nats: f64,
    pub cross_served_nats: f64,
}

pub fn write_trace_csv(rows: &[TraceRow], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "slot,hop,arrivals_nats,capacity_nats,served_nats,queue_nats")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.slot, r.hop, r.arrivals_nats, r.capacity_nats, r.served_nats, r.queue_nats
        )?;
    }
    Ok(())
}

/// Steady-state samples of one replication; index `i` is slot `warmup + 1 + i`.
#[derive(Debug, Clone, Default)]
pub struct ReplicationSamples {
    /// End-to-end through backlog `A(0,t) − D_N(0,t)`.
    pub backlog: Vec<f64>,
    pub delay: Vec<VirtualDelay>,
    /// Per hop, through queue after the slot.
    pub hop_queue: Vec<Vec<f64>>,
    /// Per requested window, `D_N(t−k, t)`.
    pub output: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub replications: Vec<ReplicationSamples>,
    pub output_windows: Vec<usize>,
    pub backlog_quantiles: Option<Quantiles>,
    /// Quantiles of the resolved delays, in slots.
    pub delay_quantiles: Option<Quantiles>,
    pub hop_backlog_quantiles: Vec<Option<Quantiles>>,
    /// Delay samples that did not resolve before the end of the run.
    pub censored_delays: usize,
    pub trace: Vec<TraceRow>,
}

impl SimOutcome {
    pub fn samples(&self) -> usize {
        self.replications.iter().map(|r| r.backlog.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    Backlog,
    Delay,
    /// Departures of the through flow over the last `window` slots.
    Output {
        window: usize,
    },
}

/// Fraction of steady-state slots whose metric exceeds `threshold`, with a
/// Wilson 95% interval on the correlation-adjusted sample size. Delays that
/// are censored below the threshold count as violations.
pub fn empirical_violation(outcome: &SimOutcome, metric: Metric, threshold: f64) -> Result<Violation> {
    let series: Vec<Vec<bool>> = match metric {
        Metric::Backlog => outcome
            .replications
            .iter()
            .map(|r| r.backlog.iter().map(|&b| b > threshold).collect())
            .collect(),
        Metric::Delay => outcome
            .replications
            .iter()
            .map(|r| {
                r.delay
                    .iter()
                    .map(|d| match *d {
                        VirtualDelay::Exact(d) => d as f64 > threshold,
                        VirtualDelay::Censored { .. } => threshold.is_finite(),
                    })
                    .collect()
            })
            .collect(),
        Metric::Output { window } => {
            let Some(idx) = outcome.output_windows.iter().position(|&k| k == window) else {
                return Err(Error::precondition(format!("output window {window} was not recorded")));
            };
            outcome
                .replications
                .iter()
                .map(|r| r.output[idx].iter().map(|&d| d > threshold).collect())
                .collect()
        }
    };
    Ok(violation_from_indicators(series.iter().map(Vec::as_slice)))
}

struct Source {
    kind: SourceKind,
    sigma: f64,
    rho: f64,
    tokens: f64,
    started: bool,
}

impl Source {
    fn new(kind: SourceKind, spec: &TrafficSpec) -> Self {
        // sample paths use the envelope at s = 1
        let (sigma, rho) = (spec.sigma(1.0), spec.rho(1.0));
        Source {
            kind,
            sigma,
            rho,
            tokens: sigma,
            started: false,
        }
    }

    fn next(&mut self) -> f64 {
        match self.kind {
            SourceKind::ConstantRate => {
                if self.started {
                    self.rho
                } else {
                    self.started = true;
                    self.sigma + self.rho
                }
            }
            SourceKind::TokenBucketGreedy => {
                if self.started {
                    self.tokens = (self.tokens + self.rho).min(self.sigma);
                }
                self.started = true;
                if self.sigma == 0.0 {
                    return self.rho;
                }
                if self.tokens >= self.sigma {
                    self.tokens = 0.0;
                    self.sigma
                } else {
                    0.0
                }
            }
        }
    }
}

/// One hop's state.
#[derive(Default)]
struct Hop {
    through: f64,
    cross: f64,
    /// FIFO segments `(amount, is_through)`.
    fifo: VecDeque<(f64, bool)>,
}

impl Hop {
    /// Serves one slot; returns `(through served, cross served)`.
    fn serve(&mut self, scheduling: Scheduling, capacity: f64, through_in: f64, cross_in: f64) -> (f64, f64) {
        match scheduling {
            Scheduling::PriorityToCross => {
                let cross_total = self.cross + cross_in;
                let sc = cross_total.min(capacity);
                self.cross = cross_total - sc;
                let left = capacity - sc;
                let total = self.through + through_in;
                let so = total.min(left);
                self.through = total - so;
                (so, sc)
            }
            Scheduling::FifoAggregate => {
                if cross_in > 0.0 {
                    self.fifo.push_back((cross_in, false));
                }
                if through_in > 0.0 {
                    self.fifo.push_back((through_in, true));
                }
                let mut budget = capacity;
                let (mut so, mut sc) = (0.0, 0.0);
                while budget > 0.0 {
                    let Some(front) = self.fifo.front_mut() else { break };
                    let take = front.0.min(budget);
                    if front.1 {
                        so += take;
                    } else {
                        sc += take;
                    }
                    budget -= take;
                    if take >= front.0 {
                        self.fifo.pop_front();
                    } else {
                        front.0 -= take;
                    }
                }
                self.through = (self.through + through_in - so).max(0.0);
                self.cross = (self.cross + cross_in - sc).max(0.0);
                if self.fifo.is_empty() {
                    self.through = 0.0;
                    self.cross = 0.0;
                }
                (so, sc)
            }
        }
    }
}

fn run_replication(cfg: &SimConfig, index: usize) -> (ReplicationSamples, Vec<TraceRow>) {
    let mut rng = ChaCha8Rng::seed_from_u64(replication_seed(cfg.seed, index));
    let channel = cfg.net.channel.model();
    let hops = cfg.net.hops as usize;
    let total = cfg.slots + cfg.drain;
    let steady = cfg.steady_slots();

    let mut source = Source::new(cfg.source, &cfg.net.through);
    let mut cross: Vec<Source> = match &cfg.net.cross {
        Some(c) => (0..hops).map(|_| Source::new(cfg.source, c)).collect(),
        None => Vec::new(),
    };
    let mut state: Vec<Hop> = (0..hops).map(|_| Hop::default()).collect();
    let mut cum_a = vec![0.0; total + 1];
    let mut cum_d = vec![0.0; total + 1];

    let mut out = ReplicationSamples {
        backlog: Vec::with_capacity(steady),
        delay: Vec::with_capacity(steady),
        hop_queue: vec![Vec::with_capacity(steady); hops],
        output: vec![Vec::with_capacity(steady); cfg.output_windows.len()],
    };
    let mut trace = Vec::new();

    for i in 1..=total {
        let mut a = source.next();
        cum_a[i] = cum_a[i - 1] + a;
        for (h, hop) in state.iter_mut().enumerate() {
            let capacity = channel.sample_snr(&mut rng).ln_1p();
            let ac = cross.get_mut(h).map_or(0.0, Source::next);
            let (so, sc) = hop.serve(cfg.scheduling, capacity, a, ac);
            if index == 0 && i <= cfg.trace_slots {
                trace.push(TraceRow {
                    slot: i,
                    hop: h + 1,
                    arrivals_nats: a,
                    capacity_nats: capacity,
                    served_nats: so,
                    queue_nats: hop.through,
                    cross_arrivals_nats: ac,
                    cross_served_nats: sc,
                });
            }
            a = so;
        }
        cum_d[i] = cum_d[i - 1] + a;

        if i > cfg.warmup && i <= cfg.slots {
            out.backlog.push(state.iter().map(|h| h.through).sum());
            for (q, hop) in out.hop_queue.iter_mut().zip(&state) {
                q.push(hop.through);
            }
            for (o, &k) in out.output.iter_mut().zip(&cfg.output_windows) {
                o.push(cum_d[i] - cum_d[i.saturating_sub(k)]);
            }
        }
    }

    // smallest d with A(0,t) ≤ D(0,t+d); the pointer only moves forward
    let mut ptr = 0;
    #[allow(clippy::needless_range_loop)]
    for t in cfg.warmup + 1..=cfg.slots {
        let target = cum_a[t];
        let slack = DELAY_SLACK * target.max(1.0);
        ptr = ptr.max(t);
        while ptr <= total && cum_d[ptr] + slack < target {
            ptr += 1;
        }
        out.delay.push(if ptr > total {
            VirtualDelay::Censored {
                at_least: total - t + 1,
            }
        } else {
            VirtualDelay::Exact(ptr - t)
        });
    }
    (out, trace)
}

/// Runs all replications on the global rayon pool.
pub fn run_tandem(cfg: &SimConfig) -> Result<SimOutcome> {
    cfg.validate()?;
    let runs: Vec<(ReplicationSamples, Vec<TraceRow>)> = (0..cfg.replications)
        .into_par_iter()
        .map(|i| run_replication(cfg, i))
        .collect();

    let mut replications = Vec::with_capacity(runs.len());
    let mut trace = Vec::new();
    for (i, (samples, t)) in runs.into_iter().enumerate() {
        if i == 0 {
            trace = t;
        }
        replications.push(samples);
    }

    let all_backlog: Vec<f64> = replications.iter().flat_map(|r| r.backlog.iter().copied()).collect();
    let mut censored = 0;
    let resolved: Vec<f64> = replications
        .iter()
        .flat_map(|r| r.delay.iter())
        .filter_map(|d| match d {
            VirtualDelay::Exact(d) => Some(*d as f64),
            VirtualDelay::Censored { .. } => {
                censored += 1;
                None
            }
        })
        .collect();
    let hop_backlog_quantiles = (0..cfg.net.hops as usize)
        .map(|h| {
            let v: Vec<f64> = replications
                .iter()
                .flat_map(|r| r.hop_queue[h].iter().copied())
                .collect();
            Quantiles::of(&v)
        })
        .collect();

    Ok(SimOutcome {
        backlog_quantiles: Quantiles::of(&all_backlog),
        delay_quantiles: Quantiles::of(&resolved),
        hop_backlog_quantiles,
        censored_delays: censored,
        output_windows: cfg.output_windows.clone(),
        replications,
        trace,
    })
}

/// Like [`run_tandem`] on a dedicated pool of `jobs` threads.
pub fn run_tandem_with_jobs(cfg: &SimConfig, jobs: usize) -> Result<SimOutcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::ResourceLimit(format!("thread pool: {e}")))?;
    pool.install(|| run_tandem(cfg))
}
