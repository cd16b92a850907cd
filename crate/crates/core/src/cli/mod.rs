//! Scenario configuration and the commands behind the `snrcalc` binary.
//!
//! Configuration is flat `key = value` text. Keys are dotted
//! (`channel.snr_db`, `traffic.sigma_kb`); `#` starts a comment. Values are
//! in engineering units and converted once, when the network is built.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::bounds::{backlog_bound, delay_bound, output_bound, BoundResult, NetworkSpec};
use crate::error::{Error, Result};
use crate::fading::ChannelSpec;
use crate::sim::{
    empirical_violation, run_tandem, run_tandem_with_jobs, Metric, Scheduling, SimConfig, SimOutcome, SourceKind,
    TraceRow, Violation,
};
use crate::traffic::{from_internal, ms_to_slots_ceil, to_internal, TrafficSpec, Unit, UnitContext};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const UNSTABLE: i32 = 3;
    pub const VALIDATION_FAIL: i32 = 4;
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } => exit::CONFIG,
        Error::Unstable(_) => exit::UNSTABLE,
        _ => exit::FAILURE,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    SnrDb,
    RhoKbps,
    SigmaKb,
    Epsilon,
    CrossRhoKbps,
    CrossSigmaKb,
}

impl SweepAxis {
    const ALL: [(SweepAxis, &'static str); 6] = [
        (SweepAxis::SnrDb, "snr_db"),
        (SweepAxis::RhoKbps, "rho_kbps"),
        (SweepAxis::SigmaKb, "sigma_kb"),
        (SweepAxis::Epsilon, "epsilon"),
        (SweepAxis::CrossRhoKbps, "cross_rho_kbps"),
        (SweepAxis::CrossSigmaKb, "cross_sigma_kb"),
    ];

    pub fn name(self) -> &'static str {
        Self::ALL
            .iter()
            .find(|(a, _)| *a == self)
            .map(|(_, n)| *n)
            .unwrap_or("?")
    }

    fn parse(key: &str, v: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .find(|(_, n)| *n == v)
            .map(|(a, _)| *a)
            .ok_or_else(|| Error::config(key, format!("unknown sweep axis `{v}`")))
    }

    fn apply(self, cfg: &mut ScenarioConfig, v: f64) {
        match self {
            SweepAxis::SnrDb => cfg.snr_db = v,
            SweepAxis::RhoKbps => cfg.rho_kbps = v,
            SweepAxis::SigmaKb => cfg.sigma_kb = v,
            SweepAxis::Epsilon => cfg.epsilon = v,
            SweepAxis::CrossRhoKbps => cfg.cross_rho_kbps = Some(v),
            SweepAxis::CrossSigmaKb => cfg.cross_sigma_kb = Some(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMetric {
    Backlog,
    Delay,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Sweep {
    /// `start, start + step, …` up to `stop`; empty when `start > stop`.
    pub fn values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut i = 0u32;
        loop {
            let v = self.start + f64::from(i) * self.step;
            if v > self.stop + 1e-9 * self.step {
                return out;
            }
            out.push(v);
            i += 1;
        }
    }
}

/// Everything a command needs, in engineering units.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub hops: u32,
    pub epsilon: f64,
    pub snr_db: f64,
    pub bandwidth_khz: f64,
    pub sigma_kb: f64,
    pub rho_kbps: f64,
    pub cross_sigma_kb: Option<f64>,
    pub cross_rho_kbps: Option<f64>,
    /// Interval lengths for output bounds.
    pub output_ms: Vec<f64>,
    pub sweep: Option<Sweep>,
    pub sweep_hops: Vec<u32>,
    pub sweep_metric: SweepMetric,
    /// Sampled slots per replication.
    pub sim_slots: usize,
    pub sim_replications: usize,
    /// `None` picks the default warmup.
    pub sim_warmup: Option<usize>,
    pub sim_seed: u64,
    pub sim_scheduling: Scheduling,
    pub sim_source: SourceKind,
    pub sim_trace_slots: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            hops: 1,
            epsilon: 1e-4,
            snr_db: 10.0,
            bandwidth_khz: 20.0,
            sigma_kb: 50.0,
            rho_kbps: 30.0,
            cross_sigma_kb: None,
            cross_rho_kbps: None,
            output_ms: Vec::new(),
            sweep: None,
            sweep_hops: vec![1],
            sweep_metric: SweepMetric::Backlog,
            sim_slots: 125_000,
            sim_replications: 8,
            sim_warmup: None,
            sim_seed: 1,
            sim_scheduling: Scheduling::PriorityToCross,
            sim_source: SourceKind::ConstantRate,
            sim_trace_slots: 0,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::config(key, format!("cannot parse `{v}`")))
}

fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// Splits config text into `(key, value)` pairs in file order.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::config(
                format!("line {}", i + 1),
                format!("expected `key = value`, got `{line}`"),
            ));
        };
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl ScenarioConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, v) in parse_pairs(text)? {
            cfg.set(&k, &v)?;
        }
        cfg.check()?;
        Ok(cfg)
    }

    /// Applies a single `key = value` override.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "network.hops" => self.hops = num(key, v)?,
            "network.epsilon" => self.epsilon = num(key, v)?,
            "channel.model" => {
                if !v.eq_ignore_ascii_case("rayleigh") {
                    return Err(Error::config(key, format!("unsupported fading model `{v}`")));
                }
            }
            "channel.snr_db" => self.snr_db = num(key, v)?,
            "channel.bandwidth_khz" => self.bandwidth_khz = num(key, v)?,
            "traffic.sigma_kb" => self.sigma_kb = num(key, v)?,
            "traffic.rho_kbps" => self.rho_kbps = num(key, v)?,
            "cross.sigma_kb" => self.cross_sigma_kb = Some(num(key, v)?),
            "cross.rho_kbps" => self.cross_rho_kbps = Some(num(key, v)?),
            "bound.output_ms" => self.output_ms = list(key, v)?,
            "sweep.axis" => {
                let axis = SweepAxis::parse(key, v)?;
                self.sweep_mut().axis = axis;
            }
            "sweep.start" => self.sweep_mut().start = num(key, v)?,
            "sweep.stop" => self.sweep_mut().stop = num(key, v)?,
            "sweep.step" => self.sweep_mut().step = num(key, v)?,
            "sweep.hops" => self.sweep_hops = list(key, v)?,
            "sweep.metric" => {
                self.sweep_metric = match v {
                    "backlog" => SweepMetric::Backlog,
                    "delay" => SweepMetric::Delay,
                    _ => return Err(Error::config(key, format!("unknown metric `{v}`"))),
                }
            }
            "sim.slots" => self.sim_slots = num(key, v)?,
            "sim.replications" => self.sim_replications = num(key, v)?,
            "sim.warmup" => {
                self.sim_warmup = if v == "auto" { None } else { Some(num(key, v)?) };
            }
            "sim.seed" => self.sim_seed = num(key, v)?,
            "sim.scheduling" => {
                self.sim_scheduling = match v {
                    "priority-to-cross" => Scheduling::PriorityToCross,
                    "fifo-aggregate" => Scheduling::FifoAggregate,
                    _ => return Err(Error::config(key, format!("unknown discipline `{v}`"))),
                }
            }
            "sim.source" => {
                self.sim_source = match v {
                    "constant-rate" => SourceKind::ConstantRate,
                    "token-bucket-greedy" => SourceKind::TokenBucketGreedy,
                    _ => return Err(Error::config(key, format!("unknown source `{v}`"))),
                }
            }
            "sim.trace_slots" => self.sim_trace_slots = num(key, v)?,
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    fn sweep_mut(&mut self) -> &mut Sweep {
        self.sweep.get_or_insert(Sweep {
            axis: SweepAxis::SnrDb,
            start: 0.0,
            stop: 0.0,
            step: 1.0,
        })
    }

    /// Validates ranges and units; errors name the offending key.
    pub fn check(&self) -> Result<()> {
        if self.hops == 0 {
            return Err(Error::config("network.hops", "must be at least 1"));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::config("network.epsilon", "must lie in (0, 1]"));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::config("channel.snr_db", "must be finite"));
        }
        if !(self.bandwidth_khz > 0.0 && self.bandwidth_khz.is_finite()) {
            return Err(Error::config("channel.bandwidth_khz", "must be positive"));
        }
        for (key, v) in [
            ("traffic.sigma_kb", Some(self.sigma_kb)),
            ("traffic.rho_kbps", Some(self.rho_kbps)),
            ("cross.sigma_kb", self.cross_sigma_kb),
            ("cross.rho_kbps", self.cross_rho_kbps),
        ] {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::config(key, "must be finite and nonnegative"));
                }
            }
        }
        if self.output_ms.iter().any(|&m| !(m >= 0.0 && m.is_finite())) {
            return Err(Error::config("bound.output_ms", "intervals must be nonnegative"));
        }
        if let Some(s) = &self.sweep {
            if !(s.step > 0.0 && s.step.is_finite()) {
                return Err(Error::config("sweep.step", "must be positive"));
            }
            if !s.start.is_finite() || !s.stop.is_finite() {
                return Err(Error::config("sweep.start", "range must be finite"));
            }
        }
        if self.sweep_hops.is_empty() || self.sweep_hops.contains(&0) {
            return Err(Error::config("sweep.hops", "needs one or more hop counts ≥ 1"));
        }
        if self.sim_replications == 0 {
            return Err(Error::config("sim.replications", "must be at least 1"));
        }
        if self.sim_slots == 0 {
            return Err(Error::config("sim.slots", "must be at least 1"));
        }
        Ok(())
    }

    pub fn units(&self) -> UnitContext {
        UnitContext {
            bandwidth_hz: self.bandwidth_khz * 1e3,
        }
    }

    /// The network in internal units.
    pub fn network(&self) -> Result<NetworkSpec> {
        self.check()?;
        let ctx = self.units();
        let channel = ChannelSpec::rayleigh_db(self.snr_db, self.bandwidth_khz)
            .map_err(|e| Error::config("channel.snr_db", e.to_string()))?;
        let through = TrafficSpec::constant(
            to_internal(self.sigma_kb, Unit::Kb, &ctx),
            to_internal(self.rho_kbps, Unit::Kbps, &ctx),
        )
        .map_err(|e| Error::config("traffic", e.to_string()))?;
        let cross = if self.cross_sigma_kb.is_some() || self.cross_rho_kbps.is_some() {
            Some(
                TrafficSpec::constant(
                    to_internal(self.cross_sigma_kb.unwrap_or(0.0), Unit::Kb, &ctx),
                    to_internal(self.cross_rho_kbps.unwrap_or(0.0), Unit::Kbps, &ctx),
                )
                .map_err(|e| Error::config("cross", e.to_string()))?,
            )
        } else {
            None
        };
        NetworkSpec::new(self.hops, channel, through, cross, self.epsilon)
            .map_err(|e| Error::config("network", e.to_string()))
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let net = self.network()?;
        let mut cfg = SimConfig::new(net, self.sim_slots, self.sim_replications, self.sim_seed);
        if let Some(w) = self.sim_warmup {
            cfg.warmup = w;
            cfg.drain = w.max(10_000);
            cfg.slots = w + self.sim_slots;
        }
        cfg.scheduling = self.sim_scheduling;
        cfg.source = self.sim_source;
        cfg.trace_slots = self.sim_trace_slots;
        Ok(cfg)
    }

    /// The resolved configuration as `key = value` lines, engineering units
    /// followed by the derived internal quantities.
    pub fn resolved_lines(&self) -> Vec<String> {
        let mut v = vec![
            format!("network.hops = {}", self.hops),
            format!("network.epsilon = {:e}", self.epsilon),
            "channel.model = rayleigh".to_string(),
            format!("channel.snr_db = {}", self.snr_db),
            format!("channel.bandwidth_khz = {}", self.bandwidth_khz),
            format!("traffic.sigma_kb = {}", self.sigma_kb),
            format!("traffic.rho_kbps = {}", self.rho_kbps),
        ];
        if let Some(c) = self.cross_sigma_kb {
            v.push(format!("cross.sigma_kb = {c}"));
        }
        if let Some(c) = self.cross_rho_kbps {
            v.push(format!("cross.rho_kbps = {c}"));
        }
        if !self.output_ms.is_empty() {
            v.push(format!("bound.output_ms = {}", join(&self.output_ms)));
        }
        if let Some(s) = &self.sweep {
            v.push(format!("sweep.axis = {}", s.axis.name()));
            v.push(format!("sweep.start = {}", s.start));
            v.push(format!("sweep.stop = {}", s.stop));
            v.push(format!("sweep.step = {}", s.step));
        }
        v.push(format!("sweep.hops = {}", join(&self.sweep_hops)));
        v.push(format!(
            "sweep.metric = {}",
            match self.sweep_metric {
                SweepMetric::Backlog => "backlog",
                SweepMetric::Delay => "delay",
            }
        ));
        v.push(format!("sim.slots = {}", self.sim_slots));
        v.push(format!("sim.replications = {}", self.sim_replications));
        v.push(format!(
            "sim.warmup = {}",
            self.sim_warmup.map_or("auto".to_string(), |w| w.to_string())
        ));
        v.push(format!("sim.seed = {}", self.sim_seed));
        v.push(format!(
            "sim.scheduling = {}",
            match self.sim_scheduling {
                Scheduling::PriorityToCross => "priority-to-cross",
                Scheduling::FifoAggregate => "fifo-aggregate",
            }
        ));
        v.push(format!(
            "sim.source = {}",
            match self.sim_source {
                SourceKind::ConstantRate => "constant-rate",
                SourceKind::TokenBucketGreedy => "token-bucket-greedy",
            }
        ));
        v.push(format!("sim.trace_slots = {}", self.sim_trace_slots));

        let ctx = self.units();
        v.push(format!("internal.slot_seconds = {:e}", ctx.slot_seconds()));
        v.push(format!(
            "internal.mean_snr = {}",
            to_internal(self.snr_db, Unit::Db, &ctx)
        ));
        v.push(format!(
            "internal.sigma_nats = {}",
            to_internal(self.sigma_kb, Unit::Kb, &ctx)
        ));
        v.push(format!(
            "internal.rho_nats_per_slot = {}",
            to_internal(self.rho_kbps, Unit::Kbps, &ctx)
        ));
        if self.cross_sigma_kb.is_some() || self.cross_rho_kbps.is_some() {
            v.push(format!(
                "internal.cross_sigma_nats = {}",
                to_internal(self.cross_sigma_kb.unwrap_or(0.0), Unit::Kb, &ctx)
            ));
            v.push(format!(
                "internal.cross_rho_nats_per_slot = {}",
                to_internal(self.cross_rho_kbps.unwrap_or(0.0), Unit::Kbps, &ctx)
            ));
        }
        v
    }

    fn csv_preamble(&self) -> String {
        let mut s = String::new();
        for line in self.resolved_lines() {
            let _ = writeln!(s, "# {line}");
        }
        s
    }
}

fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Clone)]
pub struct OutputEntry {
    pub ms: f64,
    pub slots: u64,
    pub result: BoundResult,
}

#[derive(Debug, Clone)]
pub struct BoundReport {
    pub config: ScenarioConfig,
    pub backlog: BoundResult,
    pub delay: BoundResult,
    pub outputs: Vec<OutputEntry>,
}

impl BoundReport {
    pub fn stable(&self) -> bool {
        self.backlog.stable
    }

    fn kb(&self, nats: f64) -> f64 {
        from_internal(nats, Unit::Kb, &self.config.units())
    }

    fn ms(&self, slots: f64) -> f64 {
        from_internal(slots, Unit::Ms, &self.config.units())
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "stable: {}", self.stable());
        let _ = writeln!(
            s,
            "backlog: {} kb (s* = {}, V(s*) = {})",
            fmt_value(self.kb(self.backlog.value)),
            fmt_value(self.backlog.s_star),
            fmt_value(self.backlog.kernel_at_s_star)
        );
        let _ = writeln!(
            s,
            "delay: {} ms, {} slots (s* = {})",
            fmt_value(self.ms(self.delay.value)),
            fmt_value(self.delay.value),
            fmt_value(self.delay.s_star)
        );
        for o in &self.outputs {
            let _ = writeln!(
                s,
                "output over {} ms ({} slots): {} kb (s* = {})",
                o.ms,
                o.slots,
                fmt_value(self.kb(o.result.value)),
                fmt_value(o.result.s_star)
            );
        }
        s
    }

    pub fn render_csv(&self) -> String {
        let mut s = self.config.csv_preamble();
        s.push_str("metric,interval_ms,value,unit,value_internal,unit_internal,s_star,kernel_at_s_star,stable\n");
        let mut row = |metric: &str, interval: f64, v: f64, unit: &str, vi: f64, ui: &str, r: &BoundResult| {
            let _ = writeln!(
                s,
                "{metric},{},{},{unit},{},{ui},{},{},{}",
                fmt_value(interval),
                fmt_value(v),
                fmt_value(vi),
                fmt_value(r.s_star),
                fmt_value(r.kernel_at_s_star),
                r.stable
            );
        };
        row(
            "backlog",
            0.0,
            self.kb(self.backlog.value),
            "kb",
            self.backlog.value,
            "nats",
            &self.backlog,
        );
        row(
            "delay",
            0.0,
            self.ms(self.delay.value),
            "ms",
            self.delay.value,
            "slots",
            &self.delay,
        );
        for o in &self.outputs {
            row(
                "output",
                o.ms,
                self.kb(o.result.value),
                "kb",
                o.result.value,
                "nats",
                &o.result,
            );
        }
        s
    }
}

pub fn cmd_bound(cfg: &ScenarioConfig) -> Result<BoundReport> {
    let net = cfg.network()?;
    let ctx = cfg.units();
    let outputs = cfg
        .output_ms
        .iter()
        .map(|&ms| {
            let slots = ms_to_slots_ceil(ms, &ctx);
            output_bound(&net, 0, slots as usize).map(|result| OutputEntry { ms, slots, result })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport {
        config: cfg.clone(),
        backlog: backlog_bound(&net),
        delay: delay_bound(&net),
        outputs,
    })
}

/// One CSV table of a sweep, for one hop count.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub hops: u32,
    pub csv: String,
}

pub fn cmd_sweep(cfg: &ScenarioConfig) -> Result<Vec<SweepTable>> {
    cfg.check()?;
    let sweep = cfg
        .sweep
        .clone()
        .ok_or_else(|| Error::config("sweep.axis", "a sweep needs an axis"))?;
    let values = sweep.values();
    let (metric, unit) = match cfg.sweep_metric {
        SweepMetric::Backlog => ("backlog", "kb"),
        SweepMetric::Delay => ("delay", "ms"),
    };
    let mut tables = Vec::new();
    for &hops in &cfg.sweep_hops {
        // build every point up front so config errors surface before any work
        let points: Vec<(f64, NetworkSpec, ScenarioConfig)> = values
            .iter()
            .map(|&v| {
                let mut c = cfg.clone();
                c.hops = hops;
                sweep.axis.apply(&mut c, v);
                c.network().map(|n| (v, n, c))
            })
            .collect::<Result<_>>()?;
        let rows: Vec<String> = points
            .par_iter()
            .map(|(v, net, c)| {
                let (value, r) = match cfg.sweep_metric {
                    SweepMetric::Backlog => {
                        let r = backlog_bound(net);
                        (from_internal(r.value, Unit::Kb, &c.units()), r)
                    }
                    SweepMetric::Delay => {
                        let r = delay_bound(net);
                        (from_internal(r.value, Unit::Ms, &c.units()), r)
                    }
                };
                let axis_value = match sweep.axis {
                    SweepAxis::Epsilon => format!("{v:e}"),
                    _ => fmt_value(*v),
                };
                format!(
                    "{axis_value},{hops},{},{},{}\n",
                    fmt_value(value),
                    fmt_value(r.s_star),
                    r.stable
                )
            })
            .collect();
        let mut c = cfg.clone();
        c.hops = hops;
        let mut csv = c.csv_preamble();
        let _ = writeln!(csv, "{},hops,{metric}_{unit},s_star,stable", sweep.axis.name());
        for r in rows {
            csv.push_str(&r);
        }
        tables.push(SweepTable { hops, csv });
    }
    Ok(tables)
}

#[derive(Debug, Clone)]
pub struct SimulateReport {
    pub config: ScenarioConfig,
    pub warmup: usize,
    pub outcome: SimOutcome,
}

impl SimulateReport {
    pub fn trace(&self) -> &[TraceRow] {
        &self.outcome.trace
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let o = &self.outcome;
        let _ = writeln!(s, "samples: {} (warmup {} slots)", o.samples(), self.warmup);
        if let Some(q) = o.backlog_quantiles {
            let _ = writeln!(
                s,
                "end-to-end backlog nats: p50 {} p90 {} p99 {} p99.9 {} max {}",
                q.p50, q.p90, q.p99, q.p999, q.max
            );
        }
        if let Some(q) = o.delay_quantiles {
            let _ = writeln!(
                s,
                "end-to-end delay slots: p50 {} p90 {} p99 {} p99.9 {} max {}",
                q.p50, q.p90, q.p99, q.p999, q.max
            );
        }
        for (h, q) in o.hop_backlog_quantiles.iter().enumerate() {
            if let Some(q) = q {
                let _ = writeln!(
                    s,
                    "hop {} backlog nats: p50 {} p99 {} max {}",
                    h + 1,
                    q.p50,
                    q.p99,
                    q.max
                );
            }
        }
        let _ = writeln!(s, "censored delays: {}", o.censored_delays);
        s
    }

    pub fn render_csv(&self) -> String {
        let mut s = self.config.csv_preamble();
        s.push_str("series,hop,p50,p90,p99,p999,max\n");
        let o = &self.outcome;
        let mut row = |name: &str, hop: usize, q: &crate::sim::Quantiles| {
            let _ = writeln!(s, "{name},{hop},{},{},{},{},{}", q.p50, q.p90, q.p99, q.p999, q.max);
        };
        if let Some(q) = &o.backlog_quantiles {
            row("backlog_nats", 0, q);
        }
        if let Some(q) = &o.delay_quantiles {
            row("delay_slots", 0, q);
        }
        for (h, q) in o.hop_backlog_quantiles.iter().enumerate() {
            if let Some(q) = q {
                row("hop_backlog_nats", h + 1, q);
            }
        }
        s
    }
}

fn run(cfg: &SimConfig, jobs: Option<usize>) -> Result<SimOutcome> {
    match jobs {
        Some(0) => Err(Error::config("--jobs", "must be at least 1")),
        Some(j) => run_tandem_with_jobs(cfg, j),
        None => run_tandem(cfg),
    }
}

pub fn cmd_simulate(cfg: &ScenarioConfig, jobs: Option<usize>) -> Result<SimulateReport> {
    let sim = cfg.sim_config()?;
    let outcome = run(&sim, jobs)?;
    Ok(SimulateReport {
        config: cfg.clone(),
        warmup: sim.warmup,
        outcome,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ValidationRow {
    pub metric: &'static str,
    /// Internal units: nats or slots.
    pub bound: f64,
    pub violation: Violation,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub config: ScenarioConfig,
    pub bound_factor: f64,
    pub rows: Vec<ValidationRow>,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{}: bound {} frequency {:e} (95% CI [{:e}, {:e}], n_eff {:.0}) vs ε {:e}: {}",
                r.metric,
                fmt_value(r.bound),
                r.violation.frequency,
                r.violation.ci_low,
                r.violation.ci_high,
                r.violation.effective_samples,
                self.config.epsilon,
                if r.pass { "PASS" } else { "FAIL" }
            );
        }
        let _ = writeln!(s, "{}", if self.pass() { "PASS" } else { "FAIL" });
        s
    }

    pub fn render_csv(&self) -> String {
        let mut s = self.config.csv_preamble();
        let _ = writeln!(s, "# validate.bound_factor = {}", self.bound_factor);
        s.push_str(
            "metric,bound_internal,frequency,ci_low,ci_high,half_width,samples,effective_samples,epsilon,pass\n",
        );
        for r in &self.rows {
            let v = &r.violation;
            let _ = writeln!(
                s,
                "{},{},{:e},{:e},{:e},{:e},{},{:.0},{:e},{}",
                r.metric,
                fmt_value(r.bound),
                v.frequency,
                v.ci_low,
                v.ci_high,
                v.half_width(),
                v.samples,
                v.effective_samples,
                self.config.epsilon,
                r.pass
            );
        }
        s
    }
}

/// Bounds plus simulation; each bound is scaled by `bound_factor` before it is
/// compared with the simulated frequencies (1 for a real check).
pub fn cmd_validate(cfg: &ScenarioConfig, bound_factor: f64, jobs: Option<usize>) -> Result<ValidationReport> {
    let net = cfg.network()?;
    let backlog = backlog_bound(&net);
    if !backlog.stable {
        return Err(Error::Unstable(format!(
            "no s makes V(s) < 1 at {} dB with ρ = {} kbps; there is nothing to validate",
            cfg.snr_db, cfg.rho_kbps
        )));
    }
    let delay = delay_bound(&net);
    let sim = cfg.sim_config()?;
    let outcome = run(&sim, jobs)?;
    let mut rows = Vec::new();
    for (metric, m, bound) in [
        ("backlog", Metric::Backlog, backlog.value * bound_factor),
        ("delay", Metric::Delay, (delay.value * bound_factor).floor()),
    ] {
        let violation = empirical_violation(&outcome, m, bound)?;
        rows.push(ValidationRow {
            metric,
            bound,
            violation,
            pass: violation.dominated_by(cfg.epsilon),
        });
    }
    Ok(ValidationReport {
        config: cfg.clone(),
        bound_factor,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_config() {
        let cfg = ScenarioConfig::from_text(
            "# fig 4\nnetwork.hops = 5\nchannel.snr_db = 12.5  # trailing\n\ncross.rho_kbps=10\nsweep.hops = 1, 2,5\n",
        )
        .unwrap();
        assert_eq!(cfg.hops, 5);
        assert_eq!(cfg.snr_db, 12.5);
        assert_eq!(cfg.cross_rho_kbps, Some(10.0));
        assert_eq!(cfg.sweep_hops, vec![1, 2, 5]);
        assert!(cfg.network().unwrap().cross.is_some());
    }

    #[test]
    fn errors_name_the_key() {
        for (text, key) in [
            ("network.hops = two", "network.hops"),
            ("bogus.key = 1", "bogus.key"),
            ("network.epsilon = 2", "network.epsilon"),
            ("sweep.step = 0", "sweep.step"),
            ("just words", "line 1"),
            ("sim.source = bursty", "sim.source"),
        ] {
            match ScenarioConfig::from_text(text) {
                Err(Error::Config { key: k, .. }) => assert_eq!(k, key, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn sweep_values() {
        let s = Sweep {
            axis: SweepAxis::SnrDb,
            start: 0.0,
            stop: 1.0,
            step: 0.1,
        };
        assert_eq!(s.values().len(), 11);
        let empty = Sweep { start: 2.0, ..s };
        assert!(empty.values().is_empty());
    }

    #[test]
    fn bound_report_defaults() {
        let r = cmd_bound(&ScenarioConfig::default()).unwrap();
        assert!(r.stable());
        assert!(r.backlog.value.is_finite());
        let csv = r.render_csv();
        assert!(csv.starts_with("# network.hops = 1\n"));
        assert!(csv.contains("internal.sigma_nats = 34657.359"));
    }

    #[test]
    fn unstable_report() {
        let cfg = ScenarioConfig {
            hops: 20,
            snr_db: 0.0,
            ..Default::default()
        };
        let r = cmd_bound(&cfg).unwrap();
        assert!(!r.stable());
        assert!(r.backlog.value.is_infinite());
        assert!(r.render_text().contains("inf"));
        assert!(matches!(cmd_validate(&cfg, 1.0, Some(1)), Err(Error::Unstable(_))));
    }

    #[test]
    fn empty_sweep_is_header_only() {
        let cfg = ScenarioConfig::from_text("sweep.axis = rho_kbps\nsweep.start = 5\nsweep.stop = 1\nsweep.step = 1")
            .unwrap();
        let t = cmd_sweep(&cfg).unwrap();
        assert_eq!(t.len(), 1);
        let body: Vec<&str> = t[0].csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body, vec!["rho_kbps,hops,backlog_kb,s_star,stable"]);
    }

    #[test]
    fn sweep_needs_axis() {
        assert!(matches!(
            cmd_sweep(&ScenarioConfig::default()),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::config("k", "m")), exit::CONFIG);
        assert_eq!(exit_code(&Error::Unstable("x".into())), exit::UNSTABLE);
        assert_eq!(exit_code(&Error::domain("x")), exit::FAILURE);
    }
}
