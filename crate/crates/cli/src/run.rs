//! Subcommand implementations.

use std::path::Path;

use rayon::prelude::*;

use mmnoma::dataset::{load_dataset, save_dataset};
use mmnoma::pipeline::{
    comparison_trial, run_stale_csi_scenario, stage1_training_set, summarize, Scheme, TrialResult,
};
use mmnoma::predictor::{
    init_classifier, load_model, save_model, top1_accuracy, train, Architecture,
};

use crate::config::{parse_config, ExperimentConfig};
use crate::output::{write_csv, write_manifest, ResultRow};
use crate::CliError;

/// Runs `task` over all inputs on a private pool of `jobs` threads,
/// preserving input order in the output.
fn run_parallel<T, R, F>(tasks: &[T], jobs: usize, task: F) -> Result<Vec<R>, CliError>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R, CliError> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
    pool.install(|| tasks.par_iter().map(&task).collect())
}

fn ensure_out_dir(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))
}

fn load_config(
    config_path: &Path,
    seeds_override: Option<Vec<u64>>,
    jobs_override: Option<usize>,
) -> Result<ExperimentConfig, CliError> {
    let mut config = parse_config(config_path)?;
    if let Some(seeds) = seeds_override {
        config.seeds = seeds;
    }
    if let Some(jobs) = jobs_override {
        config.jobs = jobs;
    }
    config.validate()?;
    Ok(config)
}

fn result_rows(
    results: &[TrialResult],
    sweep_var: &'static str,
    sweep_value: u64,
    n_train: usize,
) -> Vec<ResultRow> {
    results
        .iter()
        .map(|r| ResultRow {
            scheme: r.scheme.label(),
            seed: r.seed,
            sweep_var,
            sweep_value,
            n_train,
            avg_se_bps_hz: r.metrics.avg_se,
            beam_acc: r.beam_accuracy,
            clusters: r.cluster_count,
            slots: r.slot_count,
        })
        .collect()
}

/// `gen-data`: write the stage-1 dataset for the first seed plus its
/// manifest.
pub fn cmd_gen_data(
    config_path: &Path,
    out: &Path,
    samples: Option<usize>,
    seeds_override: Option<Vec<u64>>,
) -> Result<(), CliError> {
    let mut config = load_config(config_path, seeds_override, None)?;
    if let Some(n) = samples {
        config.n_train = n;
        config.validate()?;
    }
    ensure_out_dir(out)?;
    let seed = config.seeds[0];
    let pipeline = config.pipeline_config(config.scene.user_count);
    let samples = stage1_training_set(&pipeline, seed)?;
    let dataset_path = out.join("dataset.bin");
    save_dataset(&dataset_path, &samples, config.codebook.beam_count)?;
    write_manifest(
        &out.join("dataset_manifest.txt"),
        "gen-data",
        "none",
        &[seed],
        1,
        &config.to_toml()?,
    )?;
    println!(
        "wrote {} samples ({}x{} rasters, {} beams) to {}",
        samples.len(),
        config.render.width,
        config.render.height,
        config.codebook.beam_count,
        dataset_path.display()
    );
    Ok(())
}

/// `train`: fit the classifier on a dataset file and persist the model.
pub fn cmd_train(config_path: &Path, data: &Path, model: &Path) -> Result<(), CliError> {
    let config = parse_config(config_path)?;
    let (samples, beam_count) = load_dataset(data)?;
    if samples.is_empty() {
        return Err(CliError::Config(format!("{}: dataset is empty", data.display())));
    }
    let arch = Architecture {
        input: samples[0].image.width * samples[0].image.height,
        hidden: config.model.hidden.clone(),
        output: beam_count,
    };
    let params = init_classifier(&arch, config.training.weight_init_scale, config.training.seed)?;
    let trained = train(params, &samples, &config.training)?;
    let accuracy = top1_accuracy(&trained, &samples)?;
    save_model(model, &trained)?;
    println!(
        "trained on {} samples, training accuracy {:.4}, model written to {}",
        samples.len(),
        accuracy,
        model.display()
    );
    Ok(())
}

/// `evaluate`: top-1 accuracy of a saved model on a dataset.
pub fn cmd_evaluate(model: &Path, data: &Path) -> Result<(), CliError> {
    let params = load_model(model)?;
    let (samples, beam_count) = load_dataset(data)?;
    if params.arch.output != beam_count {
        return Err(CliError::Config(format!(
            "model predicts {} beams but dataset was labeled over {beam_count}",
            params.arch.output
        )));
    }
    let accuracy = top1_accuracy(&params, &samples)?;
    println!("accuracy={accuracy} samples={}", samples.len());
    Ok(())
}

/// `compare`: snapshot comparison of the configured schemes over the
/// user-count sweep, one trial per (user_count, seed).
pub fn cmd_compare(
    config_path: &Path,
    out: &Path,
    seeds_override: Option<Vec<u64>>,
    jobs_override: Option<usize>,
) -> Result<(), CliError> {
    let config = load_config(config_path, seeds_override, jobs_override)?;
    ensure_out_dir(out)?;

    let tasks: Vec<(usize, u64)> = config
        .user_counts
        .iter()
        .flat_map(|&u| config.seeds.iter().map(move |&s| (u, s)))
        .collect();
    let schemes = config.schemes.clone();
    let per_task = run_parallel(&tasks, config.jobs, |&(user_count, seed)| {
        let pipeline = config.pipeline_config(user_count);
        let outcomes = comparison_trial(&pipeline, seed, &schemes)?;
        let results: Vec<TrialResult> = outcomes
            .iter()
            .map(|o| TrialResult {
                scheme: o.scheme,
                seed,
                metrics: o.metrics.clone(),
                beam_accuracy: o.beam_accuracy,
                cluster_count: o.schedule.cluster_count(),
                slot_count: o.schedule.depth(),
                config: pipeline.clone(),
            })
            .collect();
        Ok((user_count, results))
    })?;

    let mut rows = Vec::new();
    let mut flat = Vec::new();
    for (user_count, results) in &per_task {
        rows.extend(result_rows(results, "user_count", *user_count as u64, config.n_train));
        flat.extend(results.iter().cloned());
    }
    write_csv(&out.join("compare.csv"), &mut rows)?;
    write_manifest(
        &out.join("compare_manifest.txt"),
        "compare",
        "user_count",
        &config.seeds,
        config.jobs,
        &config.to_toml()?,
    )?;

    let summaries = summarize(&flat);
    for s in &summaries {
        println!(
            "scheme={} trials={} mean_avg_se={:.6} std_avg_se={:.6} mean_beam_acc={:.6}",
            s.scheme.label(),
            s.trials,
            s.mean_avg_se,
            s.std_avg_se,
            s.mean_beam_accuracy
        );
    }
    let mean_of = |scheme: Scheme| {
        summaries.iter().find(|s| s.scheme == scheme).map(|s| s.mean_avg_se)
    };
    if let (Some(vision), Some(csi)) = (mean_of(Scheme::Vision), mean_of(Scheme::CsiFresh)) {
        if csi > 0.0 {
            println!("ratio vision/csi_fresh mean_avg_se = {:.6}", vision / csi);
        }
    }
    println!("results written to {}", out.join("compare.csv").display());
    Ok(())
}

/// `stale-sweep`: the mobility scenario across the staleness sweep, one
/// trial per (staleness, seed).
pub fn cmd_stale_sweep(
    config_path: &Path,
    out: &Path,
    seeds_override: Option<Vec<u64>>,
    jobs_override: Option<usize>,
) -> Result<(), CliError> {
    let config = load_config(config_path, seeds_override, jobs_override)?;
    ensure_out_dir(out)?;

    let tasks: Vec<(usize, u64)> = config
        .staleness_values
        .iter()
        .flat_map(|&v| config.seeds.iter().map(move |&s| (v, s)))
        .collect();
    let per_task = run_parallel(&tasks, config.jobs, |&(staleness, seed)| {
        let mut pipeline = config.pipeline_config(config.scene.user_count);
        pipeline.mobility.staleness = staleness;
        Ok((staleness, run_stale_csi_scenario(&pipeline, seed)?))
    })?;

    let mut rows = Vec::new();
    for (staleness, results) in &per_task {
        rows.extend(result_rows(results, "staleness", *staleness as u64, config.n_train));
    }
    write_csv(&out.join("stale_sweep.csv"), &mut rows)?;
    write_manifest(
        &out.join("stale_sweep_manifest.txt"),
        "stale-sweep",
        "staleness",
        &config.seeds,
        config.jobs,
        &config.to_toml()?,
    )?;

    for &staleness in &config.staleness_values {
        let stale_se: Vec<f64> = per_task
            .iter()
            .filter(|(v, _)| *v == staleness)
            .flat_map(|(_, results)| results.iter())
            .filter(|r| r.scheme == Scheme::CsiStale)
            .map(|r| r.metrics.avg_se)
            .collect();
        let mean = stale_se.iter().sum::<f64>() / stale_se.len() as f64;
        println!("staleness={staleness} csi_stale mean_avg_se={mean:.6}");
    }
    println!("results written to {}", out.join("stale_sweep.csv").display());
    Ok(())
}
