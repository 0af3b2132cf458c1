//! Training and re-evaluation drivers.
//!
//! One run trains the configured model once per seed on a deterministic
//! split, keeps the parameters from the best validation epoch, scores the
//! three splits (plus the noisy test score when a noise preset is
//! configured), and writes the artifacts described in `results`. Every
//! random choice is keyed off the run seed, so a repeated run reproduces
//! result.txt byte for byte.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::data::{make_split, GraphDataset, Split, Standardizer};
use crate::error::{Error, Result};
use crate::grad::hybrid_backward;
use crate::model::{
    accuracy, accuracy_with_noise, predict, prepare_graphs, ForwardMode, Model, PreparedGraph,
};
use crate::nn::{adam_step, AdamHyper, AdamState, ModelParams};
use crate::seeding;

use super::checkpoint::{load_checkpoint, save_checkpoint};
use super::config::{NoiseSpec, RunConfig};
use super::results::{self, mean_std, parse_result, write_run, RESULT_FILE};
use super::resolve_dataset;

/// Per-seed training summary; `flagged` marks a seed whose optimization hit
/// a numerical failure and is excluded from aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedOutcome {
    pub seed: u64,
    pub train_acc: f64,
    pub val_acc: f64,
    pub test_acc: f64,
    pub noisy_test_acc: Option<f64>,
    pub best_epoch: usize,
    pub final_loss: f64,
    pub flagged: bool,
}

impl SeedOutcome {
    fn flagged(seed: u64) -> Self {
        SeedOutcome {
            seed,
            train_acc: f64::NAN,
            val_acc: f64::NAN,
            test_acc: f64::NAN,
            noisy_test_acc: None,
            best_epoch: 0,
            final_loss: f64::NAN,
            flagged: true,
        }
    }

    fn describe(&self) -> String {
        if self.flagged {
            return format!("seed {}: numerical failure, excluded from aggregates", self.seed);
        }
        let noisy = match self.noisy_test_acc {
            Some(v) => format!(" noisy_test {v:.4}"),
            None => String::new(),
        };
        format!(
            "seed {}: train {:.4} val {:.4} test {:.4}{noisy} (best epoch {}, final loss {:.4})",
            self.seed, self.train_acc, self.val_acc, self.test_acc, self.best_epoch, self.final_loss
        )
    }
}

/// The per-seed deterministic pipeline: split, standardize, prepare, train
/// full-batch with Adam, restore the best-validation parameters, score.
/// Validation accuracy on a small split is coarse, so epochs tying on
/// accuracy are ranked by validation loss.
pub fn train_seed(
    dataset: &GraphDataset,
    cfg: &RunConfig,
    seed: u64,
) -> Result<(SeedOutcome, ModelParams)> {
    let split = make_split(dataset, cfg.ratios(), seed)?;
    let standardizer = Standardizer::fit(&dataset.graphs, &split.train)?;
    let model = Model::new(cfg.model_config(dataset.feature_dim(), dataset.num_classes))?;
    let graphs = prepare_graphs(dataset, &standardizer, &model.config)?;
    let mut params = model.init_params(seed)?;

    let hyper = AdamHyper {
        lr: cfg.lr,
        beta1: cfg.beta1,
        beta2: cfg.beta2,
        epsilon: cfg.eps,
    };
    let mut adam = AdamState::new(params.len());
    let policy = cfg.injection_policy();

    let n_train = split.train.len() as f64;
    let mut best_val = f64::NEG_INFINITY;
    let mut best_val_loss = f64::INFINITY;
    let mut best_values: Vec<f64> = params.values().to_vec();
    let mut best_epoch = 0usize;
    let mut final_loss = f64::NAN;

    let mut grad = vec![0.0; params.len()];
    for epoch in 0..cfg.epochs {
        grad.fill(0.0);
        let mut loss_sum = 0.0;
        for &gi in &split.train {
            let mode = ForwardMode {
                injection: policy
                    .as_ref()
                    .map(|p| (p, seeding::mix3(seed, epoch as u64, gi as u64))),
                noise: None,
            };
            let fwd = model.forward_with(&graphs[gi], &params, mode)?;
            loss_sum += fwd.loss();
            let report = hybrid_backward(&model, &graphs[gi], &params, &fwd)?;
            for (g, r) in grad.iter_mut().zip(report.grad.iter()) {
                *g += r;
            }
        }
        for g in grad.iter_mut() {
            *g /= n_train;
        }
        final_loss = loss_sum / n_train;
        adam_step(&mut params, &grad, &mut adam, &hyper)?;

        let (val_acc, val_loss) = val_score(&model, &params, &graphs, &split.val)?;
        if val_acc > best_val || (val_acc == best_val && val_loss < best_val_loss) {
            best_val = val_acc;
            best_val_loss = val_loss;
            best_values = params.values().to_vec();
            best_epoch = epoch + 1;
        }
    }
    params.set_values(&best_values)?;

    let noise = cfg.noise_model();
    let outcome = SeedOutcome {
        seed,
        train_acc: accuracy(&model, &params, &graphs, &split.train)?,
        val_acc: accuracy(&model, &params, &graphs, &split.val)?,
        test_acc: accuracy(&model, &params, &graphs, &split.test)?,
        noisy_test_acc: match &noise {
            Some(nm) => Some(accuracy_with_noise(
                &model,
                &params,
                &graphs,
                &split.test,
                Some(nm),
                cfg.noise_seed,
            )?),
            None => None,
        },
        best_epoch,
        final_loss,
        flagged: false,
    };
    Ok((outcome, params))
}

/// Noiseless accuracy and mean loss over one index list, in a single pass.
fn val_score(
    model: &Model,
    params: &ModelParams,
    graphs: &[PreparedGraph],
    indices: &[usize],
) -> Result<(f64, f64)> {
    let mut correct = 0usize;
    let mut loss_sum = 0.0;
    for &gi in indices {
        let fwd = model.forward(&graphs[gi], params)?;
        if predict(fwd.logits()) == graphs[gi].label {
            correct += 1;
        }
        loss_sum += fwd.loss();
    }
    let n = indices.len() as f64;
    Ok((correct as f64 / n, loss_sum / n))
}

fn checkpoint_header(cfg: &RunConfig, seed: u64) -> String {
    let mut h = format!("seed = {seed}\n");
    for (k, v) in cfg.echo() {
        h.push_str(&format!("{k} = {v}\n"));
    }
    h
}

/// One seed of `cmd_train`: numerical failures become a flagged outcome and
/// a diagnostic on stderr instead of aborting the whole run.
fn train_seed_guarded(
    dataset: &GraphDataset,
    cfg: &RunConfig,
    seed: u64,
) -> Result<(SeedOutcome, Option<ModelParams>)> {
    match train_seed(dataset, cfg, seed) {
        Ok((outcome, params)) => {
            println!("{}", outcome.describe());
            Ok((outcome, Some(params)))
        }
        Err(Error::Numeric(msg)) => {
            eprintln!("seed {seed}: numerical failure: {msg}");
            let outcome = SeedOutcome::flagged(seed);
            println!("{}", outcome.describe());
            Ok((outcome, None))
        }
        Err(other) => Err(other),
    }
}

/// Trains every configured seed and writes the run directory. Refuses to
/// overwrite an existing result unless `force` is set. With `parallel`,
/// seeds run on the rayon pool; outcomes are identical either way because
/// all randomness is keyed per seed.
pub fn cmd_train(cfg: &RunConfig, out_dir: &Path, force: bool, parallel: bool) -> Result<()> {
    cfg.validate()?;
    let (dataset, source) = resolve_dataset(&cfg.data_root, &cfg.dataset)?;
    println!(
        "dataset {} ({source}): {} graphs, {} classes, feature dim {}",
        dataset.name,
        dataset.len(),
        dataset.num_classes,
        dataset.feature_dim()
    );
    // Validate the model against the real dimensions before any filesystem
    // work, so a bad run leaves nothing behind.
    Model::new(cfg.model_config(dataset.feature_dim(), dataset.num_classes))?;

    let result_path = out_dir.join(RESULT_FILE);
    if result_path.exists() && !force {
        return Err(Error::config(format!(
            "{} already exists; pass --force to overwrite",
            result_path.display()
        )));
    }
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::io(out_dir.display().to_string(), e))?;

    let started = Instant::now();
    let trained: Vec<(SeedOutcome, Option<ModelParams>)> = if parallel {
        cfg.seeds
            .par_iter()
            .map(|&seed| train_seed_guarded(&dataset, cfg, seed))
            .collect::<Result<Vec<_>>>()?
    } else {
        let mut acc = Vec::with_capacity(cfg.seeds.len());
        for &seed in &cfg.seeds {
            acc.push(train_seed_guarded(&dataset, cfg, seed)?);
        }
        acc
    };
    let wall = started.elapsed().as_secs_f64();

    let mut outcomes = Vec::with_capacity(trained.len());
    for (outcome, params) in &trained {
        if let Some(params) = params {
            let path = out_dir.join(results::checkpoint_file(outcome.seed));
            save_checkpoint(&path, &checkpoint_header(cfg, outcome.seed), params.values())?;
        }
        outcomes.push(outcome.clone());
    }
    write_run(out_dir, cfg, &outcomes, wall)?;

    let used: Vec<&SeedOutcome> = outcomes.iter().filter(|o| !o.flagged).collect();
    if used.is_empty() {
        eprintln!("all seeds failed numerically; aggregates are empty");
    } else {
        let (mean, std) = mean_std(&used.iter().map(|o| o.test_acc).collect::<Vec<_>>());
        let spread = std.map(|s| format!(" ± {s:.4}")).unwrap_or_default();
        println!(
            "test accuracy {mean:.4}{spread} over {}/{} seeds ({wall:.1}s)",
            used.len(),
            outcomes.len()
        );
        let noisy_vals: Vec<f64> = used.iter().filter_map(|o| o.noisy_test_acc).collect();
        if !noisy_vals.is_empty() {
            let (nmean, nstd) = mean_std(&noisy_vals);
            let nspread = nstd.map(|s| format!(" ± {s:.4}")).unwrap_or_default();
            println!("noisy test accuracy {nmean:.4}{nspread}");
        }
    }
    println!("wrote {}", result_path.display());
    Ok(())
}

/// One seed's re-evaluation scores.
#[derive(Debug, Clone)]
pub struct EvalRow {
    pub seed: u64,
    pub stored_test: f64,
    pub clean_test: f64,
    pub noisy_test: Option<f64>,
}

/// Re-scores the checkpoints of a finished run, optionally under a different
/// noise preset (`noise_arg` accepts the same forms as the config key).
/// Returns the rendered report; the caller prints it.
pub fn cmd_eval(out_dir: &Path, noise_arg: Option<&str>) -> Result<String> {
    let parsed = parse_result(&out_dir.join(RESULT_FILE))?;
    let cfg = parsed.config()?;
    let (dataset, source) = resolve_dataset(&cfg.data_root, &cfg.dataset)?;
    let model = Model::new(cfg.model_config(dataset.feature_dim(), dataset.num_classes))?;

    let noise_spec: Option<NoiseSpec> = match noise_arg {
        Some(text) => NoiseSpec::parse(text)?,
        None => cfg.noise.clone(),
    };
    let noise = noise_spec.as_ref().map(|s| s.to_model(cfg.noise_seed));

    let mut report = format!(
        "run {} (dataset {} from {source}, model {})\n",
        out_dir.display(),
        dataset.name,
        cfg.model.name()
    );
    report.push_str(&match &noise_spec {
        Some(s) => format!("noise {} (seed {})\n", s.canonical(), cfg.noise_seed),
        None => "noise none\n".to_string(),
    });

    let mut rows = Vec::new();
    for stored in parsed.rows.iter().filter(|r| !r.flagged) {
        let seed = stored.seed;
        let split = make_split(&dataset, cfg.ratios(), seed)?;
        let standardizer = Standardizer::fit(&dataset.graphs, &split.train)?;
        let graphs = prepare_graphs(&dataset, &standardizer, &model.config)?;
        let mut params = model.build_params()?;
        let ck = out_dir.join(results::checkpoint_file(seed));
        let (_header, values) = load_checkpoint(&ck)?;
        if values.len() != params.len() {
            return Err(Error::Version(format!(
                "{}: holds {} parameters but the model needs {}",
                ck.display(),
                values.len(),
                params.len()
            )));
        }
        params.set_values(&values)?;

        let clean = accuracy(&model, &params, &graphs, &split.test)?;
        let noisy = match &noise {
            Some(nm) => Some(accuracy_with_noise(
                &model,
                &params,
                &graphs,
                &split.test,
                Some(nm),
                cfg.noise_seed,
            )?),
            None => None,
        };
        let drift = if (clean - stored.test_acc).abs() > 1e-12 {
            " DRIFT from stored value"
        } else {
            ""
        };
        let noisy_txt = noisy.map(|v| format!(" noisy {v:.4}")).unwrap_or_default();
        report.push_str(&format!(
            "seed {seed}: clean {clean:.4} (stored {:.4}){noisy_txt}{drift}\n",
            stored.test_acc
        ));
        rows.push(EvalRow {
            seed,
            stored_test: stored.test_acc,
            clean_test: clean,
            noisy_test: noisy,
        });
    }
    if rows.is_empty() {
        return Err(Error::MissingRuns(format!(
            "{}: every seed row is flagged; nothing to evaluate",
            out_dir.display()
        )));
    }

    let (cmean, cstd) = mean_std(&rows.iter().map(|r| r.clean_test).collect::<Vec<_>>());
    let cspread = cstd.map(|s| format!(" ± {s:.4}")).unwrap_or_default();
    report.push_str(&format!("clean test mean {cmean:.4}{cspread} (n={})\n", rows.len()));
    let noisy_vals: Vec<f64> = rows.iter().filter_map(|r| r.noisy_test).collect();
    if !noisy_vals.is_empty() {
        let (nmean, nstd) = mean_std(&noisy_vals);
        let nspread = nstd.map(|s| format!(" ± {s:.4}")).unwrap_or_default();
        report.push_str(&format!(
            "noisy test mean {nmean:.4}{nspread} (n={})\n",
            noisy_vals.len()
        ));
    }
    Ok(report)
}

/// Deterministic split/standardizer/prepared-graph bundle for tests and
/// external tools that need the exact training-time view of one seed.
pub fn prepared_view(
    dataset: &GraphDataset,
    cfg: &RunConfig,
    seed: u64,
) -> Result<(Split, Vec<PreparedGraph>, Model)> {
    let split = make_split(dataset, cfg.ratios(), seed)?;
    let standardizer = Standardizer::fit(&dataset.graphs, &split.train)?;
    let model = Model::new(cfg.model_config(dataset.feature_dim(), dataset.num_classes))?;
    let graphs = prepare_graphs(dataset, &standardizer, &model.config)?;
    Ok((split, graphs, model))
}
