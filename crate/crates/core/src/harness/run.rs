//! Experiment driver: builds the data pipeline per seed, runs every round,
//! and writes all result artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{dirichlet_partition, generate_synthetic, load_any_dataset, Dataset};
use crate::error::{Error, Result};
use crate::fl::{run_experiment, Experiment, RoundRecord, Strategy, TrainSettings};
use crate::metrics::{bwt_forgetting, summarize, ForgettingSummary};
use crate::nn::MlpSpec;
use crate::rng::{stream, StreamId};

use super::config::{ExperimentConfig, GLOBAL_TEST_FRACTION, LOCAL_TEST_FRACTION};
use super::csvio::{read_trajectory_csv, CsvSink};

/// One seed's results.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub strategy: String,
    pub summary: ForgettingSummary,
}

/// Mean/stdev across seeds for one metric (sample standard deviation; zero
/// for a single seed).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub per_seed: Vec<f64>,
}

impl Stat {
    fn from_values(per_seed: Vec<f64>) -> Stat {
        let n = per_seed.len() as f64;
        let mean = per_seed.iter().sum::<f64>() / n;
        let std = if per_seed.len() < 2 {
            0.0
        } else {
            (per_seed.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Stat { mean, std, per_seed }
    }
}

/// Cross-seed aggregate for one strategy, in report column order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateSummary {
    pub strategy: String,
    pub seeds: Vec<u64>,
    pub global_accuracy: Stat,
    /// `None` when undefined for every seed (single-round runs).
    pub bwt_forgetting: Option<Stat>,
    pub consistency: Stat,
    pub aipfr: Stat,
    pub local_accuracy: Stat,
    pub worst_client_accuracy: Stat,
    pub local_consistency: Stat,
    pub local_aipfr: Stat,
    pub balance: Stat,
}

impl AggregateSummary {
    pub fn from_seed_results(strategy: &str, results: &[SeedResult]) -> AggregateSummary {
        let pick = |f: fn(&ForgettingSummary) -> f64| {
            Stat::from_values(results.iter().map(|r| f(&r.summary)).collect())
        };
        let bwt: Vec<f64> =
            results.iter().filter_map(|r| r.summary.bwt_forgetting).collect();
        AggregateSummary {
            strategy: strategy.to_string(),
            seeds: results.iter().map(|r| r.seed).collect(),
            global_accuracy: pick(|s| s.global_accuracy),
            bwt_forgetting: if bwt.is_empty() { None } else { Some(Stat::from_values(bwt)) },
            consistency: pick(|s| s.consistency),
            aipfr: pick(|s| s.aipfr),
            local_accuracy: pick(|s| s.local_accuracy),
            worst_client_accuracy: pick(|s| s.worst_client_accuracy),
            local_consistency: pick(|s| s.local_consistency),
            local_aipfr: pick(|s| s.local_aipfr),
            balance: pick(|s| s.balance),
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::validation(format!("json encoding failed: {e}")))?;
    write_text(path, &(text + "\n"))
}

/// Client pool plus held-out global test set. Synthetic runs draw the test
/// set from the same class means on a disjoint sample stream; file-backed
/// runs carve it out of the file.
fn source_data(config: &ExperimentConfig, seed: u64) -> Result<(Dataset, Dataset)> {
    match &config.dataset {
        Some(path) => {
            let full = load_any_dataset(path)?;
            let mut rng = stream(seed, StreamId::GlobalSplit, 0, 0);
            let (pool, test) =
                crate::data::split_local_with_rng(&full, GLOBAL_TEST_FRACTION, &mut rng)?;
            Ok((pool, test))
        }
        None => {
            let pool = generate_synthetic(
                config.classes,
                config.dim,
                config.per_class,
                config.spread,
                seed,
            )?;
            let test_per_class =
                ((config.per_class as f64 * GLOBAL_TEST_FRACTION).round() as usize).max(1);
            let test = crate::data::generate_synthetic_holdout(
                config.classes,
                config.dim,
                test_per_class,
                config.spread,
                seed,
            )?;
            Ok((pool, test))
        }
    }
}

/// Assemble the fully resolved experiment for `(config, strategy, seed)`:
/// source data → held-out global test set → Dirichlet client partition.
/// Every stream is keyed off `seed` independently of `strategy`, so
/// comparisons hold data and schedules fixed.
pub fn build_experiment(
    config: &ExperimentConfig,
    strategy: Strategy,
    seed: u64,
) -> Result<Experiment> {
    let (pool, global_test) = source_data(config, seed)?;
    let clients = dirichlet_partition(
        &pool,
        config.clients,
        config.alpha,
        config.min_per_client,
        LOCAL_TEST_FRACTION,
        seed,
    )?;
    let mlp = MlpSpec::new(pool.dim(), &config.hidden, pool.class_count())?;
    Ok(Experiment {
        mlp,
        strategy,
        clients,
        global_test,
        rounds: config.rounds,
        sample_fraction: config.sample_fraction,
        settings: TrainSettings {
            epochs: config.epochs,
            lr: config.lr,
            batch_size: config.batch_size,
            max_grad_norm: config.max_grad_norm,
            lambda_cap: config.lambda_cap,
        },
        seed,
        parallel: config.parallel,
        strict_transmission: config.strict_transmission,
    })
}

fn run_one_seed(
    config: &ExperimentConfig,
    strategy: Strategy,
    seed: u64,
    dir: &Path,
) -> Result<SeedResult> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let mut echo = config.echo();
    echo.push_str(&format!("# resolved seed\nseed = {seed}\n"));
    write_text(&dir.join("config.txt"), &echo)?;

    let experiment = build_experiment(config, strategy, seed)?;
    let mut sink = CsvSink::create(dir, experiment.clients.len())?;
    let records = run_experiment(&experiment, &mut sink)
        .map_err(|e| Error::numeric(format!("seed {seed}: {e}")))?;
    let summary = summarize(&records)?;
    let result =
        SeedResult { seed, strategy: strategy.name().to_string(), summary };
    write_json(&dir.join("summary.json"), &result)?;
    Ok(result)
}

/// Run the configured strategy over every seed; artifacts land under
/// `dir/seed_<s>/` with the cross-seed aggregate at `dir/summary.json`.
pub fn run(config: &ExperimentConfig, dir: &Path) -> Result<AggregateSummary> {
    config.validate()?;
    let strategy = config.strategy()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    write_text(&dir.join("config.txt"), &config.echo())?;

    let mut results = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let seed_dir = dir.join(format!("seed_{seed}"));
        results.push(run_one_seed(config, strategy, seed, &seed_dir)?);
    }
    let aggregate = AggregateSummary::from_seed_results(strategy.name(), &results);
    write_json(&dir.join("summary.json"), &aggregate)?;
    Ok(aggregate)
}

/// Run several strategies on identical data partitions and seed schedules and
/// emit a side-by-side report (text + CSV).
pub fn compare(
    config: &ExperimentConfig,
    strategies: &[Strategy],
    dir: &Path,
) -> Result<Vec<AggregateSummary>> {
    if strategies.len() < 2 {
        return Err(Error::config(Some("strategies"), "compare needs at least two".to_string()));
    }
    let mut aggregates = Vec::with_capacity(strategies.len());
    for &strategy in strategies {
        let mut cfg = config.clone();
        cfg.strategy = strategy.name().to_string();
        if let Strategy::FedProx { mu } = strategy {
            cfg.mu = mu;
        }
        let sub = dir.join(strategy.name());
        aggregates.push(run(&cfg, &sub)?);
    }
    write_text(&dir.join("report.txt"), &render_report_text(&aggregates))?;
    write_text(&dir.join("report.csv"), &render_report_csv(&aggregates))?;
    Ok(aggregates)
}

const REPORT_COLUMNS: [&str; 7] = [
    "global_acc",
    "global_bwt",
    "global_consistency",
    "local_acc",
    "worst_client_acc",
    "local_consistency",
    "balance",
];

fn report_cells(a: &AggregateSummary) -> Vec<(f64, f64)> {
    let bwt = a.bwt_forgetting.as_ref();
    vec![
        (a.global_accuracy.mean, a.global_accuracy.std),
        (bwt.map_or(f64::NAN, |s| s.mean), bwt.map_or(f64::NAN, |s| s.std)),
        (a.consistency.mean, a.consistency.std),
        (a.local_accuracy.mean, a.local_accuracy.std),
        (a.worst_client_accuracy.mean, a.worst_client_accuracy.std),
        (a.local_consistency.mean, a.local_consistency.std),
        (a.balance.mean, a.balance.std),
    ]
}

/// Fixed-width table, one row per strategy.
pub fn render_report_text(aggregates: &[AggregateSummary]) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<10}", "strategy"));
    for c in REPORT_COLUMNS {
        out.push_str(&format!(" {c:>20}"));
    }
    out.push('\n');
    for a in aggregates {
        out.push_str(&format!("{:<10}", a.strategy));
        for (mean, std) in report_cells(a) {
            out.push_str(&format!(" {:>20}", format!("{mean:+.3} ± {std:.3}")));
        }
        out.push('\n');
    }
    out
}

pub fn render_report_csv(aggregates: &[AggregateSummary]) -> String {
    let mut out = String::from("strategy");
    for c in REPORT_COLUMNS {
        out.push_str(&format!(",{c}_mean,{c}_std"));
    }
    out.push('\n');
    for a in aggregates {
        out.push_str(&a.strategy);
        for (mean, std) in report_cells(a) {
            out.push_str(&format!(",{}", super::csvio::format_float(mean)));
            out.push_str(&format!(",{}", super::csvio::format_float(std)));
        }
        out.push('\n');
    }
    out
}

/// Metrics computed from a standalone trajectory CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreOutput {
    pub rounds: usize,
    pub aipfr: f64,
    pub consistency: f64,
    pub interval_count: usize,
    /// Present only when the CSV carries per-client history columns.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bwt_forgetting: Option<f64>,
}

/// Score a trajectory CSV: consistency/AIPFR, plus backward-transfer
/// forgetting when per-client history columns are present.
pub fn score(path: &Path) -> Result<ScoreOutput> {
    let parsed = read_trajectory_csv(path)?;
    let (aipfr, consistency) = crate::metrics::consistency(&parsed.trajectory)?;
    let interval_count = crate::metrics::find_recovery_intervals(&parsed.trajectory).len();
    let bwt = if parsed.sampled_history.is_empty() {
        None
    } else {
        let final_acc: BTreeMap<usize, f64> = parsed
            .sampled_history
            .keys()
            .filter_map(|k| parsed.final_accuracy.get(k).map(|&v| (*k, v)))
            .collect();
        Some(bwt_forgetting(&parsed.sampled_history, &final_acc)?)
    };
    Ok(ScoreOutput {
        rounds: parsed.trajectory.len(),
        aipfr,
        consistency,
        interval_count,
        bwt_forgetting: bwt,
    })
}

/// Convenience for tests: collect per-round records for one (strategy, seed).
pub fn run_records(
    config: &ExperimentConfig,
    strategy: Strategy,
    seed: u64,
) -> Result<Vec<RoundRecord>> {
    let experiment = build_experiment(config, strategy, seed)?;
    run_experiment(&experiment, &mut crate::fl::DiscardSink)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            classes: 4,
            dim: 6,
            per_class: 40,
            clients: 4,
            min_per_client: 10,
            sample_fraction: 0.5,
            rounds: 3,
            epochs: 1,
            batch_size: 16,
            hidden: vec![8],
            seeds: vec![0, 1],
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn run_writes_every_artifact() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = tiny_config();
        config.output_dir = dir.path().to_path_buf();
        let aggregate = run(&config, dir.path()).unwrap();
        assert_eq!(aggregate.seeds, vec![0, 1]);
        for seed in [0u64, 1] {
            let sub = dir.path().join(format!("seed_{seed}"));
            for f in ["rounds.csv", "weights.csv", "timing.csv", "summary.json", "config.txt"] {
                assert!(sub.join(f).exists(), "missing {f} for seed {seed}");
            }
        }
        assert!(dir.path().join("summary.json").exists());
        assert!(dir.path().join("config.txt").exists());
    }

    #[test]
    fn rerun_is_byte_identical() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let config = tiny_config();
        run(&config, dir_a.path()).unwrap();
        run(&config, dir_b.path()).unwrap();
        for f in ["rounds.csv", "weights.csv"] {
            let a = fs::read(dir_a.path().join("seed_0").join(f)).unwrap();
            let b = fs::read(dir_b.path().join("seed_0").join(f)).unwrap();
            assert_eq!(a, b, "{f} differs between reruns");
        }
    }

    #[test]
    fn single_round_run_has_no_bwt() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = tiny_config();
        config.rounds = 1;
        config.seeds = vec![0];
        let aggregate = run(&config, dir.path()).unwrap();
        assert!(aggregate.bwt_forgetting.is_none());
        let rounds = fs::read_to_string(dir.path().join("seed_0/rounds.csv")).unwrap();
        assert_eq!(rounds.lines().count(), 2); // header + one record
    }

    #[test]
    fn aggregate_balance_recomputes_from_per_seed_values() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config();
        let aggregate = run(&config, dir.path()).unwrap();
        let recomputed =
            (aggregate.global_accuracy.mean + aggregate.local_accuracy.mean) / 2.0;
        assert!((aggregate.balance.mean - recomputed).abs() < 1e-12);
    }

    #[test]
    fn compare_emits_one_row_per_strategy() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = tiny_config();
        config.seeds = vec![0];
        let aggregates = compare(
            &config,
            &[Strategy::FedAvg, Strategy::FedProx { mu: 0.0 }, Strategy::FedKPer],
            dir.path(),
        )
        .unwrap();
        assert_eq!(aggregates.len(), 3);
        let report = fs::read_to_string(dir.path().join("report.csv")).unwrap();
        assert_eq!(report.lines().count(), 4); // header + 3 strategies
    }

    #[test]
    fn fedprox_zero_mu_row_matches_fedavg_row() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = tiny_config();
        config.seeds = vec![0];
        let aggregates =
            compare(&config, &[Strategy::FedAvg, Strategy::FedProx { mu: 0.0 }], dir.path())
                .unwrap();
        let a = &aggregates[0];
        let b = &aggregates[1];
        assert_eq!(a.global_accuracy.mean.to_bits(), b.global_accuracy.mean.to_bits());
        assert_eq!(a.balance.mean.to_bits(), b.balance.mean.to_bits());
        assert_eq!(
            a.bwt_forgetting.as_ref().unwrap().mean.to_bits(),
            b.bwt_forgetting.as_ref().unwrap().mean.to_bits()
        );
    }

    #[test]
    fn score_matches_the_hand_trajectory() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        fs::write(&path, "round,accuracy\n1,0.5\n2,0.6\n3,0.4\n4,0.7\n").unwrap();
        let out = score(&path).unwrap();
        assert!((out.consistency - 0.75).abs() < 1e-12);
        assert!((out.aipfr - 0.25).abs() < 1e-12);
        assert!(out.bwt_forgetting.is_none());
    }

    #[test]
    fn score_reads_our_own_rounds_csv() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config();
        run(&config, dir.path()).unwrap();
        let out = score(&dir.path().join("seed_0").join("rounds.csv")).unwrap();
        assert_eq!(out.rounds, 3);
        assert!(out.bwt_forgetting.is_some());
    }
}
