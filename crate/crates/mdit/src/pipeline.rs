//! End-to-end orchestration: corpus -> embedder -> interpolator ->
//! diversity -> trainer, plus the sweep harness and projection export.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::artifacts::{self, ManifestEntry};
use crate::config::PipelineConfig;
use crate::corpus::{self, Vocabulary};
use crate::diversity::{self, CandidatePool, ClusterModel, PoolRef, SelectedSet};
use crate::embedder::{self, EmbeddedSample};
use crate::error::{Error, Result};
use crate::interpolator::{self, GeneratedSet, InterpolationConfig};
use crate::projection;
use crate::seed::{self, stage_seed};
use crate::trainer::{self, EvalMetrics, ToyModel, TrainConfig};

fn tag_stage(stage: &str, e: Error) -> Error {
    match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("stage {stage}: {io}"))),
        Error::Config(m) => Error::Config(format!("stage {stage}: {m}")),
        Error::EmptyDataset(m) => Error::EmptyDataset(format!("stage {stage}: {m}")),
        Error::InvalidParameter(m) => Error::InvalidParameter(format!("stage {stage}: {m}")),
        Error::CorruptInput(m) => Error::CorruptInput(format!("stage {stage}: {m}")),
        Error::DegenerateInput(m) => Error::DegenerateInput(format!("stage {stage}: {m}")),
        Error::Divergence(m) => Error::Divergence(format!("stage {stage}: {m}")),
        Error::Internal(m) => Error::Internal(format!("stage {stage}: {m}")),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Counts {
    pub originals: usize,
    pub generated: usize,
    pub selected: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterSummary {
    pub cluster_count: usize,
    pub iterations_run: usize,
    pub objective: f64,
    pub sizes: Vec<usize>,
    pub quotas: Vec<usize>,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub config: PipelineConfig,
    pub counts: Counts,
    pub malformed_lines: BTreeMap<String, usize>,
    pub selection_enabled: bool,
    pub cluster: Option<ClusterSummary>,
    pub epoch_mean_losses: Vec<f64>,
    pub loss_curve: String,
    pub metrics: EvalMetrics,
    /// The only timing-dependent field; everything else is reproducible
    /// byte-for-byte from (config, seed).
    pub wall_clock_secs: BTreeMap<String, f64>,
}

/// In-memory result of the corpus + embed + interpolate stages. Samples
/// `0..n_originals` are originals in task order; the rest are generated.
pub struct Prepared {
    pub vocab: Vocabulary,
    pub samples: Vec<EmbeddedSample>,
    pub n_originals: usize,
    pub gen_meta: Vec<ManifestEntry>,
    pub malformed_lines: BTreeMap<String, usize>,
}

impl Prepared {
    pub fn n_generated(&self) -> usize {
        self.samples.len() - self.n_originals
    }
}

pub fn prepare(config: &PipelineConfig) -> Result<Prepared> {
    config.validate()?;
    // Corpus: tasks in name order, file order within a task.
    let mut datasets = Vec::new();
    let mut malformed_lines = BTreeMap::new();
    for (name, path) in &config.tasks {
        let (ds, malformed) =
            corpus::load_jsonl(path, name).map_err(|e| tag_stage("corpus", e))?;
        malformed_lines.insert(name.clone(), malformed);
        datasets.push(ds);
    }
    let vocab = corpus::build_vocab(&datasets, config.vocab_min_freq)
        .map_err(|e| tag_stage("corpus", e))?;

    let mut tokenized = Vec::new();
    let mut task_ranges: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for ds in &datasets {
        let start = tokenized.len();
        for s in &ds.samples {
            tokenized.push(corpus::tokenize(s, &vocab));
        }
        task_ranges.insert(ds.task_id.clone(), (start, tokenized.len()));
    }

    // Embedder.
    let table = embedder::init_embedding_table(
        vocab.size(),
        config.training.dim,
        stage_seed(config.seed, seed::STAGE_EMBED),
    )
    .map_err(|e| tag_stage("embedder", e))?;
    let mut samples: Vec<EmbeddedSample> = tokenized
        .iter()
        .map(|t| embedder::embed(t, &table))
        .collect::<Result<_>>()
        .map_err(|e| tag_stage("embedder", e))?;
    let n_originals = samples.len();

    // Interpolator.
    let buckets = corpus::build_length_buckets(&tokenized, config.interpolation.bucket_width)
        .map_err(|e| tag_stage("interpolator", e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(stage_seed(config.seed, seed::STAGE_INTERPOLATE));
    let mut gen_meta = Vec::new();
    for (task_a, task_b) in config.task_pairs() {
        let (a_start, a_end) = *task_ranges
            .get(&task_a)
            .ok_or_else(|| Error::Config(format!("unknown task in pair: {task_a}")))?;
        let (b_start, b_end) = *task_ranges
            .get(&task_b)
            .ok_or_else(|| Error::Config(format!("unknown task in pair: {task_b}")))?;
        let interp = InterpolationConfig {
            alpha: config.interpolation.alpha,
            per_pair: config.interpolation.per_pair,
            bucket_width: config.interpolation.bucket_width,
            seed: config.seed,
            task_pairs: vec![(task_a.clone(), task_b.clone())],
        };
        let set = interpolator::generate_cross_task(
            &samples[a_start..a_end],
            &samples[b_start..b_end],
            &buckets,
            &interp,
            &mut rng,
        )
        .map_err(|e| tag_stage("interpolator", e))?;
        for g in set.samples {
            gen_meta.push(ManifestEntry {
                lambda: g.lambda,
                parent_i: a_start + g.parent_i,
                parent_j: b_start + g.parent_j,
                tasks: g.parent_tasks,
            });
            samples.push(g.embedded);
        }
    }
    Ok(Prepared {
        vocab,
        samples,
        n_originals,
        gen_meta,
        malformed_lines,
    })
}

pub fn save_prepared(config: &PipelineConfig, prepared: &Prepared) -> Result<()> {
    let out = &config.out_dir;
    fs::create_dir_all(out)?;
    prepared.vocab.write_to(&out.join("vocab.txt"))?;
    let dim = config.training.dim;
    let vocab_size = prepared.vocab.size();
    artifacts::save_set(
        &out.join("original"),
        prepared.samples[..prepared.n_originals].iter(),
        dim,
        vocab_size,
    )?;
    let set = GeneratedSet {
        samples: prepared.samples[prepared.n_originals..]
            .iter()
            .zip(&prepared.gen_meta)
            .map(|(embedded, m)| interpolator::GeneratedSample {
                embedded: embedded.clone(),
                lambda: m.lambda,
                parent_i: m.parent_i,
                parent_j: m.parent_j,
                parent_tasks: m.tasks.clone(),
            })
            .collect(),
    };
    artifacts::save_generated(&out.join("generated"), &set, dim, vocab_size)?;
    Ok(())
}

/// Reloads what `save_prepared` wrote.
pub fn load_prepared(config: &PipelineConfig) -> Result<Prepared> {
    let out = &config.out_dir;
    let vocab = Vocabulary::read_from(&out.join("vocab.txt"))?;
    let mut samples = artifacts::load_set(&out.join("original"))?;
    let n_originals = samples.len();
    let generated = artifacts::load_generated(&out.join("generated"))?;
    let mut gen_meta = Vec::with_capacity(generated.count());
    for g in generated.samples {
        gen_meta.push(ManifestEntry {
            lambda: g.lambda,
            parent_i: g.parent_i,
            parent_j: g.parent_j,
            tasks: g.parent_tasks,
        });
        samples.push(g.embedded);
    }
    Ok(Prepared {
        vocab,
        samples,
        n_originals,
        gen_meta,
        malformed_lines: BTreeMap::new(),
    })
}

pub fn build_pool(prepared: &Prepared) -> Result<CandidatePool> {
    let mut vectors = Vec::with_capacity(prepared.samples.len());
    let mut refs = Vec::with_capacity(prepared.samples.len());
    for (i, s) in prepared.samples.iter().enumerate() {
        vectors.push(embedder::pool(s, i)?);
        refs.push(PoolRef {
            sample_index: i,
            provenance: s.provenance,
        });
    }
    Ok(CandidatePool { vectors, refs })
}

pub fn default_cluster_count(pool_size: usize) -> usize {
    ((pool_size as f64 / 2.0).sqrt() as usize).max(2).min(pool_size)
}

pub fn default_budget(n_originals: usize, n_generated: usize) -> usize {
    (n_originals + n_generated / 2).max(1)
}

pub struct SelectionOutcome {
    pub model: ClusterModel,
    pub selection: SelectedSet,
}

pub fn cluster_and_select(
    config: &PipelineConfig,
    prepared: &Prepared,
    pool: &CandidatePool,
) -> Result<SelectionOutcome> {
    let m = config
        .clustering
        .cluster_count
        .unwrap_or_else(|| default_cluster_count(pool.len()));
    let budget = config
        .clustering
        .budget
        .unwrap_or_else(|| default_budget(prepared.n_originals, prepared.n_generated()));
    let model = diversity::kmeans(
        pool,
        m,
        config.clustering.max_iter,
        config.clustering.tol,
        stage_seed(config.seed, seed::STAGE_CLUSTER),
    )?;
    let selection = diversity::select_diverse(&model, pool, budget)?;
    Ok(SelectionOutcome { model, selection })
}

pub fn write_selection(
    dir: &Path,
    outcome: &SelectionOutcome,
    pool: &CandidatePool,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = std::io::BufWriter::new(fs::File::create(dir.join("selection.csv"))?);
    writeln!(w, "pool_index,provenance,cluster,distance")?;
    for &i in &outcome.selection.indices {
        let cluster = outcome.model.assignments[i];
        let center = &outcome.model.centers[cluster];
        let dist: f64 = pool.vectors[i]
            .values
            .iter()
            .zip(center)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        writeln!(w, "{i},{},{cluster},{dist}", pool.refs[i].provenance)?;
    }
    drop(w);
    let report = serde_json::json!({
        "m": outcome.model.cluster_count(),
        "iterations_run": outcome.model.iterations_run,
        "objective": outcome.model.objective,
        "sizes": outcome.model.cluster_sizes(),
        "quotas": outcome.selection.per_cluster_quota,
    });
    fs::write(
        dir.join("cluster_report.json"),
        serde_json::to_string_pretty(&report)?.as_bytes(),
    )?;
    Ok(())
}

pub fn read_selection_indices(dir: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(dir.join("selection.csv"))?;
    let mut indices = Vec::new();
    for line in text.lines().skip(1) {
        let first = line.split(',').next().ok_or_else(|| {
            Error::CorruptInput("selection.csv: empty row".into())
        })?;
        indices.push(first.parse::<usize>().map_err(|e| {
            Error::CorruptInput(format!("selection.csv: bad pool index {first}: {e}"))
        })?);
    }
    Ok(indices)
}

fn train_and_report(
    config: &PipelineConfig,
    prepared: &Prepared,
    training_set: &[&EmbeddedSample],
) -> Result<(ToyModel, trainer::LossReport, EvalMetrics)> {
    let mut model = ToyModel::new(
        config.training.dim,
        config.training.hidden_width,
        prepared.vocab.size(),
        stage_seed(config.seed, seed::STAGE_MODEL_INIT),
    )?;
    let train_config = TrainConfig {
        learning_rate: config.training.learning_rate,
        epochs: config.training.epochs,
        batch_size: config.training.batch_size,
        seed: stage_seed(config.seed, seed::STAGE_TRAIN),
    };
    let report = trainer::train(&mut model, training_set, &train_config)?;
    let originals: Vec<&EmbeddedSample> = prepared.samples[..prepared.n_originals].iter().collect();
    let metrics = trainer::evaluate(&model, &originals)?;
    Ok((model, report, metrics))
}

fn write_training_outputs(
    dir: &Path,
    model: &ToyModel,
    report: &trainer::LossReport,
    metrics: &EvalMetrics,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    model.save(dir, report.step_losses.len())?;
    let mut w = std::io::BufWriter::new(fs::File::create(dir.join("loss.csv"))?);
    writeln!(w, "step,loss")?;
    for (i, loss) in report.step_losses.iter().enumerate() {
        writeln!(w, "{i},{loss}")?;
    }
    drop(w);
    fs::write(
        dir.join("metrics.json"),
        serde_json::to_string_pretty(metrics)?.as_bytes(),
    )?;
    Ok(())
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<RunReport> {
    let mut wall = BTreeMap::new();
    let t0 = Instant::now();
    let prepared = prepare(config)?;
    save_prepared(config, &prepared)?;
    wall.insert("prepare".to_string(), t0.elapsed().as_secs_f64());

    let t1 = Instant::now();
    let pool = build_pool(&prepared).map_err(|e| tag_stage("diversity", e))?;
    let (selected_indices, cluster_summary) = if config.clustering.selection_enabled {
        let outcome =
            cluster_and_select(config, &prepared, &pool).map_err(|e| tag_stage("diversity", e))?;
        write_selection(&config.out_dir.join("selection"), &outcome, &pool)
            .map_err(|e| tag_stage("diversity", e))?;
        let summary = ClusterSummary {
            cluster_count: outcome.model.cluster_count(),
            iterations_run: outcome.model.iterations_run,
            objective: outcome.model.objective,
            sizes: outcome.model.cluster_sizes(),
            quotas: outcome.selection.per_cluster_quota.clone(),
        };
        (outcome.selection.indices, Some(summary))
    } else {
        ((0..prepared.samples.len()).collect(), None)
    };
    wall.insert("diversity".to_string(), t1.elapsed().as_secs_f64());

    let t2 = Instant::now();
    let training_set: Vec<&EmbeddedSample> = selected_indices
        .iter()
        .map(|&i| &prepared.samples[i])
        .collect();
    let (model, loss_report, metrics) = train_and_report(config, &prepared, &training_set)
        .map_err(|e| tag_stage("trainer", e))?;
    write_training_outputs(&config.out_dir.join("train"), &model, &loss_report, &metrics)
        .map_err(|e| tag_stage("trainer", e))?;
    wall.insert("trainer".to_string(), t2.elapsed().as_secs_f64());

    let t3 = Instant::now();
    projection::export_projection(&pool, &config.out_dir.join("projection.csv"))
        .map_err(|e| tag_stage("projection", e))?;
    wall.insert("projection".to_string(), t3.elapsed().as_secs_f64());

    let report = RunReport {
        config: config.clone(),
        counts: Counts {
            originals: prepared.n_originals,
            generated: prepared.n_generated(),
            selected: training_set.len(),
        },
        malformed_lines: prepared.malformed_lines.clone(),
        selection_enabled: config.clustering.selection_enabled,
        cluster: cluster_summary,
        epoch_mean_losses: loss_report.epoch_means.clone(),
        loss_curve: "train/loss.csv".to_string(),
        metrics,
        wall_clock_secs: wall,
    };
    fs::write(
        config.out_dir.join("report.json"),
        serde_json::to_string_pretty(&report)?.as_bytes(),
    )?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Alpha,
    PerPair,
    Budget,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(SweepAxis::Alpha),
            "t" | "per-pair" | "per_pair" => Ok(SweepAxis::PerPair),
            "budget" => Ok(SweepAxis::Budget),
            other => Err(Error::Config(format!(
                "unknown sweep axis {other}; expected alpha, t, or budget"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Alpha => "alpha",
            SweepAxis::PerPair => "t",
            SweepAxis::Budget => "budget",
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub status: String,
    pub originals: Option<usize>,
    pub generated: Option<usize>,
    pub selected: Option<usize>,
    pub final_loss: Option<f64>,
    pub nll: Option<f64>,
    pub accuracy: Option<f64>,
}

/// One pipeline run per value under a shared base seed; per-run failures
/// are recorded in their row and the sweep continues.
pub fn sweep(base: &PipelineConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::Config("sweep requires a non-empty value list".into()));
    }
    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        let mut config = base.clone();
        match axis {
            SweepAxis::Alpha => config.interpolation.alpha = value,
            SweepAxis::PerPair => config.interpolation.per_pair = value as usize,
            SweepAxis::Budget => config.clustering.budget = Some(value as usize),
        }
        let label = if value.fract() == 0.0 {
            format!("{}", value as i64)
        } else {
            format!("{value}").replace('.', "_")
        };
        config.out_dir = base.out_dir.join(format!("sweep_{}_{label}", axis.name()));
        match run_pipeline(&config) {
            Ok(report) => rows.push(SweepRow {
                axis: axis.name().to_string(),
                value,
                status: "ok".to_string(),
                originals: Some(report.counts.originals),
                generated: Some(report.counts.generated),
                selected: Some(report.counts.selected),
                final_loss: report.epoch_mean_losses.last().copied(),
                nll: Some(report.metrics.nll),
                accuracy: Some(report.metrics.accuracy),
            }),
            Err(e) => rows.push(SweepRow {
                axis: axis.name().to_string(),
                value,
                status: format!("error: {e}"),
                originals: None,
                generated: None,
                selected: None,
                final_loss: None,
                nll: None,
                accuracy: None,
            }),
        }
    }
    fs::create_dir_all(&base.out_dir)?;
    let csv_path = base.out_dir.join(format!("sweep_{}.csv", axis.name()));
    let mut w = std::io::BufWriter::new(fs::File::create(&csv_path)?);
    writeln!(
        w,
        "axis,value,status,originals,generated,selected,final_loss,nll,accuracy"
    )?;
    for r in &rows {
        let opt_u = |v: Option<usize>| v.map_or(String::new(), |x| x.to_string());
        let opt_f = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.axis,
            r.value,
            r.status.replace(',', ";"),
            opt_u(r.originals),
            opt_u(r.generated),
            opt_u(r.selected),
            opt_f(r.final_loss),
            opt_f(r.nll),
            opt_f(r.accuracy)
        )?;
    }
    Ok(rows)
}

/// `select` subcommand body: cluster and select over saved artifacts.
pub fn run_select(config: &PipelineConfig) -> Result<()> {
    let prepared = load_prepared(config)?;
    let pool = build_pool(&prepared)?;
    let outcome = cluster_and_select(config, &prepared, &pool)?;
    write_selection(&config.out_dir.join("selection"), &outcome, &pool)
}

/// `train` subcommand body: train on the saved selection (or everything
/// when selection is disabled or absent).
pub fn run_train(config: &PipelineConfig) -> Result<()> {
    let prepared = load_prepared(config)?;
    let selection_dir = config.out_dir.join("selection");
    let indices: Vec<usize> =
        if config.clustering.selection_enabled && selection_dir.join("selection.csv").exists() {
            read_selection_indices(&selection_dir)?
        } else {
            (0..prepared.samples.len()).collect()
        };
    let training_set: Vec<&EmbeddedSample> =
        indices.iter().map(|&i| &prepared.samples[i]).collect();
    let (model, report, metrics) = train_and_report(config, &prepared, &training_set)?;
    write_training_outputs(&config.out_dir.join("train"), &model, &report, &metrics)
}

pub fn run_project(config: &PipelineConfig) -> Result<()> {
    let prepared = load_prepared(config)?;
    let pool = build_pool(&prepared)?;
    projection::export_projection(&pool, &config.out_dir.join("projection.csv"))
}

/// Consistency helper used by reports and tests: counts of persisted
/// records under the output directory.
pub fn persisted_counts(config: &PipelineConfig) -> Result<Counts> {
    let prepared = load_prepared(config)?;
    let selection_csv = config.out_dir.join("selection").join("selection.csv");
    let selected = if selection_csv.exists() {
        read_selection_indices(&config.out_dir.join("selection"))?.len()
    } else {
        prepared.samples.len()
    };
    Ok(Counts {
        originals: prepared.n_originals,
        generated: prepared.n_generated(),
        selected,
    })
}
