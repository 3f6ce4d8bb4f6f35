//! Parameter sweeps timing pruned and unpruned query and join variants.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::irq::{irq, irq_unpruned};
use crate::metric::QueryParams;
use crate::sft::{irjq, irjq_unpruned, SftConfig};
use crate::store::{MemoryBackend, SegmentStore};
use crate::synth::{generate, GenConfig, Generated};
use crate::trajectory::{SegmentationConfig, Trajectory};
use crate::xz::XzConfig;

pub const SUITES: &[&str] = &["lambda", "theta", "theta_d", "theta_t", "resolution", "query_size", "data_size"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Irq,
    IrqUp,
    Irjq,
    IrjqUp,
}

impl Algo {
    pub const ALL: [Algo; 4] = [Algo::Irq, Algo::IrqUp, Algo::Irjq, Algo::IrjqUp];
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algo::Irq => "irq",
            Algo::IrqUp => "irq_up",
            Algo::Irjq => "irjq",
            Algo::IrjqUp => "irjq_up",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub sweep_param: String,
    pub value: String,
    pub algo: Algo,
    pub median_ms: f64,
    pub result_count: usize,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub gen: GenConfig,
    pub query_size: usize,
    pub reps: usize,
    pub params: QueryParams,
    pub xz: XzConfig,
    pub seg: SegmentationConfig,
    pub sft: SftConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            gen: GenConfig {
                n_traj: 2000,
                points: (60, 200),
                n_patients: 20,
                contact_fraction: 0.05,
                crosser_fraction: 0.1,
                ..GenConfig::default()
            },
            query_size: 10,
            reps: 5,
            params: QueryParams::default(),
            xz: XzConfig::default(),
            seg: SegmentationConfig::default(),
            sft: SftConfig::default(),
        }
    }
}

/// Generated data ingested into an in-memory store.
pub struct Workload {
    pub store: SegmentStore<MemoryBackend>,
    pub data: Generated,
}

impl Workload {
    pub fn build(gen: &GenConfig, xz: XzConfig, seg: SegmentationConfig) -> Result<Workload> {
        let data = generate(gen)?;
        let mut store = SegmentStore::create(MemoryBackend::new(), xz, seg)?;
        store.ingest(data.trajectories.iter().cloned())?;
        Ok(Workload { store, data })
    }

    /// The first `n` trajectories; patients come first.
    pub fn queries(&self, n: usize) -> &[Trajectory] {
        &self.data.trajectories[..n.min(self.data.trajectories.len())]
    }
}

pub fn median(samples: &mut [f64]) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        (samples[n / 2 - 1] + samples[n / 2]) / 2.0
    }
}

/// Runs one algorithm once; returns the number of results.
pub fn run_algo(
    algo: Algo,
    store: &SegmentStore<MemoryBackend>,
    queries: &[Trajectory],
    params: &QueryParams,
    sft: &SftConfig,
) -> Result<usize> {
    Ok(match algo {
        Algo::Irq => queries.iter().map(|q| irq(store, q, params).map(|o| o.results.len())).sum::<Result<usize>>()?,
        Algo::IrqUp => {
            queries.iter().map(|q| irq_unpruned(store, q, params).map(|o| o.results.len())).sum::<Result<usize>>()?
        }
        Algo::Irjq => irjq(store, queries, params, sft)?.results.len(),
        Algo::IrjqUp => irjq_unpruned(store, queries, params, sft)?.results.len(),
    })
}

/// Times every algorithm `reps` times, interleaving repetitions so drift hits all alike.
pub fn time_algos(
    store: &SegmentStore<MemoryBackend>,
    queries: &[Trajectory],
    params: &QueryParams,
    sft: &SftConfig,
    reps: usize,
) -> Result<Vec<(Algo, f64, usize)>> {
    let mut samples = vec![Vec::with_capacity(reps); Algo::ALL.len()];
    let mut counts = [0usize; 4];
    for _ in 0..reps.max(1) {
        for (k, algo) in Algo::ALL.into_iter().enumerate() {
            let start = Instant::now();
            counts[k] = run_algo(algo, store, queries, params, sft)?;
            samples[k].push(start.elapsed().as_secs_f64() * 1e3);
        }
    }
    Ok(Algo::ALL.into_iter().zip(samples).zip(counts).map(|((a, mut s), c)| (a, median(&mut s), c)).collect())
}

fn rows(sweep: &str, value: String, timed: Vec<(Algo, f64, usize)>) -> impl Iterator<Item = BenchRow> + '_ {
    timed.into_iter().map(move |(algo, median_ms, result_count)| BenchRow {
        sweep_param: sweep.to_string(),
        value: value.clone(),
        algo,
        median_ms,
        result_count,
    })
}

/// Runs a named sweep, or all of them for `"all"`.
pub fn run_suite(name: &str, cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if name == "all" {
        let mut out = Vec::new();
        for s in SUITES {
            out.extend(run_suite(s, cfg)?);
        }
        return Ok(out);
    }
    if !SUITES.contains(&name) {
        return Err(Error::InvalidParam(format!("unknown bench suite {name:?}; expected one of {SUITES:?} or all")));
    }
    log::info!("bench suite {name}");
    let mut out = Vec::new();
    match name {
        "resolution" => {
            for g in [12u8, 15, 18] {
                let w = Workload::build(&cfg.gen, XzConfig { resolution: g, ..cfg.xz }, cfg.seg)?;
                let sft = SftConfig { resolution: g, ..cfg.sft };
                let timed = time_algos(&w.store, w.queries(cfg.query_size), &cfg.params, &sft, cfg.reps)?;
                out.extend(rows(name, g.to_string(), timed));
            }
        }
        "data_size" => {
            let n = cfg.gen.n_traj;
            for size in [n / 4, n / 2, n] {
                let gen = GenConfig { n_traj: size.max(cfg.gen.n_patients), ..cfg.gen.clone() };
                let w = Workload::build(&gen, cfg.xz, cfg.seg)?;
                let timed = time_algos(&w.store, w.queries(cfg.query_size), &cfg.params, &cfg.sft, cfg.reps)?;
                out.extend(rows(name, gen.n_traj.to_string(), timed));
            }
        }
        _ => {
            let w = Workload::build(&cfg.gen, cfg.xz, cfg.seg)?;
            let base = cfg.params;
            let sweep: Vec<(String, QueryParams, usize)> = match name {
                "lambda" => [0.1, 0.3, 0.5, 0.7, 0.9]
                    .map(|v| (v.to_string(), QueryParams { lambda: v, ..base }, cfg.query_size))
                    .into(),
                "theta" => [0.3, 0.4, 0.5, 0.6, 0.7]
                    .map(|v| (v.to_string(), QueryParams { theta: v, ..base }, cfg.query_size))
                    .into(),
                "theta_d" => [25.0, 50.0, 100.0, 200.0]
                    .map(|v| (v.to_string(), QueryParams { theta_d: v, ..base }, cfg.query_size))
                    .into(),
                "theta_t" => [60.0, 120.0, 240.0, 480.0]
                    .map(|v| (v.to_string(), QueryParams { theta_t: v, ..base }, cfg.query_size))
                    .into(),
                _ => [1usize, 5, 10, 20].map(|n| (n.to_string(), base, n)).into(),
            };
            for (value, params, qn) in sweep {
                let timed = time_algos(&w.store, w.queries(qn), &params, &cfg.sft, cfg.reps)?;
                out.extend(rows(name, value, timed));
            }
        }
    }
    Ok(out)
}

pub fn write_csv<W: Write>(w: W, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["sweep_param", "value", "algo", "median_ms", "result_count"])?;
    for r in rows {
        w.write_record([
            r.sweep_param.clone(),
            r.value.clone(),
            r.algo.to_string(),
            format!("{:.3}", r.median_ms),
            r.result_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
