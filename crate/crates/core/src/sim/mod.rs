//! Seeded Monte Carlo experiments on simulated regressions.
//!
//! Each replicate draws a dataset, scores every model, and compares the posteriors
//! obtained under each prior in the configuration with the posterior under the
//! generating inclusion probability. Replicates depend only on `(seed, rep)`, so they
//! may run in any order on any number of workers.

mod config;
mod generate;
mod rng;

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use config::{PLaw, ScenarioConfig, COST_LIMIT, TABLE_ONE_SIGNAL};
pub use generate::{generate_replicate, Replicate, MAX_REDRAWS};
pub use rng::{Purpose, Substream};

use crate::divergence::posterior_gap;
use crate::error::{Error, Result};
use crate::marginal::Scorer;
use crate::parallel::{self, Backend};
use crate::posterior::{false_positive_count, l1_oracle_distance, posterior_with};
use crate::priors::PriorSpec;
use crate::regression::enumerate_r2;

pub const HISTOGRAM_BINS: usize = 20;
pub const ORACLE_LABEL: &str = "oracle";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodMetrics {
    pub label: String,
    pub inclusion: Vec<f64>,
    /// `NaN` when the generating `p` is 0 or 1 and no oracle exists.
    pub l1_to_oracle: f64,
    pub false_positives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepRecord {
    pub rep_index: usize,
    pub p_true: f64,
    pub k_true: usize,
    pub p_hat: f64,
    pub fb_p_mean: f64,
    pub degenerate: bool,
    /// `KL(FB posterior ∥ EB posterior)`.
    pub kl_fb_eb: f64,
    pub redraws: u8,
    /// One entry per prior under test, in configuration order, then the oracle if present.
    pub methods: Vec<MethodMetrics>,
}

impl RepRecord {
    pub fn method(&self, label: &str) -> Option<&MethodMetrics> {
        self.methods.iter().find(|m| m.label == label)
    }
}

/// Counts on `[0, 1]` with separate counters for the exact endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bins: Vec<u64>,
    pub exact_zero: u64,
    pub exact_one: u64,
}

impl Histogram {
    pub fn new() -> Self {
        Self {
            bins: vec![0; HISTOGRAM_BINS],
            exact_zero: 0,
            exact_one: 0,
        }
    }

    pub fn add(&mut self, v: f64) {
        if v == 0.0 {
            self.exact_zero += 1;
        } else if v == 1.0 {
            self.exact_one += 1;
        } else if v > 0.0 && v < 1.0 {
            let i = ((v * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
            self.bins[i] += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.bins.iter().sum::<u64>() + self.exact_zero + self.exact_one
    }
}

impl Default for Histogram {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodAggregate {
    pub label: String,
    /// Replicates that had an oracle.
    pub l1_reps: usize,
    pub mean_l1: f64,
    pub median_l1: f64,
    pub mean_false_positives: f64,
    pub mean_inclusion: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub reps: usize,
    pub m: usize,
    pub n: usize,
    pub degenerate_count: usize,
    pub degeneracy_fraction: f64,
    pub degenerate_zero: usize,
    pub degenerate_one: usize,
    pub mean_k_true: f64,
    pub mean_kl_fb_eb_finite: f64,
    pub infinite_kl_count: usize,
    pub p_hat_histogram: Histogram,
    pub fb_p_mean_histogram: Histogram,
    pub methods: Vec<MethodAggregate>,
}

impl AggregateReport {
    pub fn method(&self, label: &str) -> Option<&MethodAggregate> {
        self.methods.iter().find(|m| m.label == label)
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub records: Vec<RepRecord>,
    pub aggregate: AggregateReport,
}

fn run_replicate(cfg: &ScenarioConfig, scorer: &Scorer, rep: usize) -> Result<RepRecord> {
    let r = generate_replicate(cfg, rep)?;
    let r2 = enumerate_r2(&r.dataset, Backend::Sequential)?;
    let table = scorer.score_r2(r2, Backend::Sequential)?;

    let summaries = cfg
        .prior_under_test
        .iter()
        .map(|&p| posterior_with(&table, p, 0))
        .collect::<Result<Vec<_>>>()?;
    let oracle = if r.p_true > 0.0 && r.p_true < 1.0 {
        Some(posterior_with(&table, PriorSpec::fixed_p(r.p_true)?, 0)?)
    } else {
        None
    };

    let labelled = summaries
        .iter()
        .map(|s| (s.prior.label(), s))
        .chain(oracle.iter().map(|o| (ORACLE_LABEL.to_string(), o)));
    let mut methods = Vec::with_capacity(summaries.len() + 1);
    for (label, s) in labelled {
        let l1 = match &oracle {
            Some(o) => l1_oracle_distance(s, o)?,
            None => f64::NAN,
        };
        methods.push(MethodMetrics {
            label,
            inclusion: s.inclusion.clone(),
            l1_to_oracle: l1,
            false_positives: false_positive_count(s, r.true_model),
        });
    }

    let find = |pred: fn(&PriorSpec) -> bool| {
        summaries
            .iter()
            .find(|s| pred(&s.prior))
            .ok_or_else(|| Error::invalid("prior list lacks a required method"))
    };
    let eb = find(|p| matches!(p, PriorSpec::EmpiricalBayes))?;
    let fb = find(|p| matches!(p, PriorSpec::BetaBinomial { .. }))?;
    let gap = posterior_gap(fb, eb)?;

    Ok(RepRecord {
        rep_index: rep,
        p_true: r.p_true,
        k_true: r.true_model.size(),
        p_hat: eb.p_point,
        fb_p_mean: fb.p_point,
        degenerate: eb.degenerate,
        kl_fb_eb: gap.kl,
        redraws: r.redraws,
        methods,
    })
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, c) = xs.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    if c == 0 {
        f64::NAN
    } else {
        s / c as f64
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let h = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[h]
    } else {
        0.5 * (xs[h - 1] + xs[h])
    }
}

/// Summaries over replicates, accumulated in `rep_index` order.
pub fn aggregate(cfg: &ScenarioConfig, records: &[RepRecord]) -> AggregateReport {
    let reps = records.len();
    let mut p_hat_histogram = Histogram::new();
    let mut fb_p_mean_histogram = Histogram::new();
    for r in records {
        p_hat_histogram.add(r.p_hat);
        fb_p_mean_histogram.add(r.fb_p_mean);
    }
    let degenerate_count = records.iter().filter(|r| r.degenerate).count();
    let labels: Vec<String> = records
        .first()
        .map(|r| r.methods.iter().map(|m| m.label.clone()).collect())
        .unwrap_or_default();
    let mut all_labels = labels;
    for r in records {
        for m in &r.methods {
            if !all_labels.contains(&m.label) {
                all_labels.push(m.label.clone());
            }
        }
    }
    let methods = all_labels
        .into_iter()
        .map(|label| {
            let rows: Vec<&MethodMetrics> =
                records.iter().filter_map(|r| r.method(&label)).collect();
            let l1: Vec<f64> = rows
                .iter()
                .map(|m| m.l1_to_oracle)
                .filter(|v| !v.is_nan())
                .collect();
            let mean_inclusion = (0..cfg.m)
                .map(|j| mean(rows.iter().map(|m| m.inclusion[j])))
                .collect();
            MethodAggregate {
                label,
                l1_reps: l1.len(),
                mean_l1: mean(l1.iter().copied()),
                median_l1: median(l1),
                mean_false_positives: mean(rows.iter().map(|m| m.false_positives as f64)),
                mean_inclusion,
            }
        })
        .collect();
    AggregateReport {
        reps,
        m: cfg.m,
        n: cfg.n,
        degenerate_count,
        degeneracy_fraction: degenerate_count as f64 / reps.max(1) as f64,
        degenerate_zero: p_hat_histogram.exact_zero as usize,
        degenerate_one: p_hat_histogram.exact_one as usize,
        mean_k_true: mean(records.iter().map(|r| r.k_true as f64)),
        mean_kl_fb_eb_finite: mean(
            records
                .iter()
                .map(|r| r.kl_fb_eb)
                .filter(|v| v.is_finite()),
        ),
        infinite_kl_count: records.iter().filter(|r| r.kl_fb_eb.is_infinite()).count(),
        p_hat_histogram,
        fb_p_mean_histogram,
        methods,
    }
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    run_scenario_with(cfg, Backend::Parallel)
}

/// Validate, check the cost guard, then run every replicate on `backend`.
pub fn run_scenario_with(cfg: &ScenarioConfig, backend: Backend) -> Result<ScenarioOutput> {
    let cost = cfg.check_cost()?;
    cfg.validate()?;
    let scorer = Scorer::for_workload(cfg.g_spec, cfg.n, cfg.m, cost)?;
    let records = parallel::map_indexed(backend, cfg.reps, |rep| run_replicate(cfg, &scorer, rep))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let aggregate = aggregate(cfg, &records);
    Ok(ScenarioOutput { records, aggregate })
}

fn cell(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        v.to_string()
    }
}

/// One row per replicate. Method columns are prefixed by the method label.
pub fn write_records_csv<W: Write>(records: &[RepRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let Some(first) = records.first() else {
        w.flush().map_err(io_err("<records>"))?;
        return Ok(());
    };
    let m = first.methods.first().map_or(0, |x| x.inclusion.len());
    let mut header: Vec<String> = [
        "rep_index",
        "p_true",
        "k_true",
        "p_hat",
        "fb_p_mean",
        "degenerate",
        "kl_fb_eb",
        "redraws",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let labels: Vec<&str> = first.methods.iter().map(|x| x.label.as_str()).collect();
    for l in &labels {
        header.push(format!("{l}_l1"));
        header.push(format!("{l}_fp"));
        header.extend((0..m).map(|j| format!("{l}_incl_{j}")));
    }
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.rep_index.to_string(),
            cell(r.p_true),
            r.k_true.to_string(),
            cell(r.p_hat),
            cell(r.fb_p_mean),
            u8::from(r.degenerate).to_string(),
            cell(r.kl_fb_eb),
            r.redraws.to_string(),
        ];
        for l in &labels {
            match r.method(l) {
                Some(x) => {
                    row.push(cell(x.l1_to_oracle));
                    row.push(x.false_positives.to_string());
                    row.extend(x.inclusion.iter().map(|&v| cell(v)));
                }
                None => row.extend(std::iter::repeat_n(String::new(), m + 2)),
            }
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(io_err("<records>"))
}

fn io_err(path: &str) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.into(),
        source,
    }
}

/// Write `records.csv` and `aggregate.json` into `dir`, creating it if needed.
pub fn write_outputs(output: &ScenarioOutput, dir: &Path) -> Result<()> {
    let dir_s = dir.display().to_string();
    fs::create_dir_all(dir).map_err(io_err(&dir_s))?;
    let rec_path = dir.join("records.csv");
    let rec_s = rec_path.display().to_string();
    let f = fs::File::create(&rec_path).map_err(io_err(&rec_s))?;
    write_records_csv(&output.records, std::io::BufWriter::new(f))?;
    let agg_path = dir.join("aggregate.json");
    let agg_s = agg_path.display().to_string();
    let json = serde_json::to_string_pretty(&output.aggregate)?;
    fs::write(&agg_path, json + "\n").map_err(io_err(&agg_s))?;
    Ok(())
}
