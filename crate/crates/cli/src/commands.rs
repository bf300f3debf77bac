// SPDX-License-Identifier: Apache-2.0

//! Subcommand implementations. Each one is a function of the config and the
//! files already in the output directory.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use tvopt_core::corpus::{self, CorpusEntry};
use tvopt_core::dataset::{self, Dataset, DatasetError, Standardization};
use tvopt_core::diagnosis::{write_traces_csv, DiagnosisTrace};
use tvopt_core::evaluation::{
    self, check_disjoint, select_tau, AlphaPoint, CurvePoint, Scorer, SweepData, TerminationPolicy,
    TerminationReport, TAU_GRID,
};
use tvopt_core::models::{
    fit_kernel_logistic, fit_penalized_linear, read_model, write_model, Model, TrainedModel,
};
use tvopt_core::netlist::{parse_bench, Circuit};

use crate::config::{ModelKind, RunConfig, TauSetting};

/// File layout of an output directory.
#[derive(Debug, Clone)]
pub struct OutputDir {
    pub root: PathBuf,
}

impl OutputDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        OutputDir { root: root.into() }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn config(&self) -> PathBuf {
        self.path("config.toml")
    }
    pub fn dataset(&self) -> PathBuf {
        self.path("dataset.csv")
    }
    pub fn traces(&self) -> PathBuf {
        self.path("traces.csv")
    }
    pub fn manifest(&self) -> PathBuf {
        self.path("circuits.csv")
    }
    pub fn model(&self) -> PathBuf {
        self.path("model.txt")
    }
}

fn write_file(path: &Path, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    let mut out = BufWriter::new(file);
    body(&mut out).with_context(|| format!("writing {}", path.display()))?;
    out.flush()
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn open(path: &Path, hint: &str) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("missing {} ({hint})", path.display()))?;
    Ok(BufReader::new(f))
}

fn load_netlists(dir: &Path) -> Result<Vec<Circuit>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("cannot read netlist directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "bench"))
        .collect();
    files.sort();
    ensure!(!files.is_empty(), "no .bench files in {}", dir.display());
    files
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let stem = p.file_stem().unwrap_or_default().to_string_lossy();
            Ok(parse_bench(&text)
                .with_context(|| format!("unparseable netlist {}", p.display()))?
                .with_name(stem))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateSummary {
    pub circuits: usize,
    pub rows: usize,
}

/// Build the corpus and write netlists, dictionaries, traces and the dataset.
pub fn generate(cfg: &RunConfig, out: &OutputDir) -> Result<GenerateSummary> {
    cfg.validate()?;
    let corpus_cfg = cfg.corpus();
    let generated = cfg.netlist_dir.is_empty();
    let entries: Vec<CorpusEntry> = if generated {
        corpus::generate_corpus(&corpus_cfg)?
    } else {
        let netlists = load_netlists(Path::new(&cfg.netlist_dir))?;
        corpus::corpus_from_netlists(&netlists, &corpus_cfg)?
    };
    fs::create_dir_all(&out.root)
        .with_context(|| format!("cannot create output directory {}", out.root.display()))?;
    write_file(&out.config(), |w| w.write_all(cfg.to_toml().as_bytes()))?;

    for e in &entries {
        let id = &e.trace.circuit_id;
        if generated {
            let path = out.path(&format!("netlists/{id}.bench"));
            write_file(&path, |w| w.write_all(e.circuit.to_bench().as_bytes()))?;
        }
        if cfg.write_dictionaries {
            let path = out.path(&format!("dictionaries/{id}.dict"));
            write_file(&path, |w| e.dictionary.write_export(w))?;
        }
    }
    let traces: Vec<DiagnosisTrace> = entries.iter().map(|e| e.trace.clone()).collect();
    write_file(&out.manifest(), |w| corpus::write_manifest(&entries, w))?;
    write_file(&out.traces(), |w| write_traces_csv(&traces, w))?;
    let ds = Dataset::from_traces(&traces);
    write_file(&out.dataset(), |w| ds.write_csv(w))?;

    let summary = GenerateSummary {
        circuits: traces.len(),
        rows: ds.len(),
    };
    log::info!(
        "generated {} circuits, {} dataset rows (seed {})",
        summary.circuits,
        summary.rows,
        cfg.corpus_seed
    );
    Ok(summary)
}

/// Dataset and traces split into fit / validation / test circuits.
pub struct Splits {
    pub fit: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
    pub standardization: Standardization,
    pub fit_std: Dataset,
    pub test_std: Dataset,
    pub validation_traces: Vec<DiagnosisTrace>,
    pub test_traces: Vec<DiagnosisTrace>,
}

impl Splits {
    pub fn train_circuits(&self) -> Vec<String> {
        let mut ids = self.fit.circuit_ids();
        for id in self.validation.circuit_ids() {
            if !ids.contains(&id) {
                ids.push(id);
            }
        }
        ids
    }
}

pub fn load_traces(out: &OutputDir) -> Result<Vec<DiagnosisTrace>> {
    let hint = "run `generate` first";
    Ok(corpus::read_traces(
        open(&out.manifest(), hint)?,
        open(&out.traces(), hint)?,
    )?)
}

pub fn load_splits(cfg: &RunConfig, out: &OutputDir) -> Result<Splits> {
    let ds = Dataset::read_csv(open(&out.dataset(), "run `generate` first")?)?;
    let traces = load_traces(out)?;
    let ids: HashSet<String> = ds.circuit_ids().into_iter().collect();
    ensure!(
        traces.len() == ids.len() && traces.iter().all(|t| ids.contains(&t.circuit_id)),
        "dataset and trace files describe different circuits"
    );

    let (train, test) = dataset::split(&ds, cfg.train_fraction, cfg.split_seed)?;
    let (fit, validation) = if cfg.validation_fraction == 0.0 {
        (train.clone(), train)
    } else {
        match dataset::split(&train, 1.0 - cfg.validation_fraction, cfg.split_seed + 1) {
            Ok(parts) => parts,
            Err(DatasetError::EmptySplit { .. }) => {
                log::warn!("too few training circuits for a validation split; choosing tau on the training circuits");
                (train.clone(), train)
            }
            Err(e) => return Err(e.into()),
        }
    };
    let (standardization, fit_std, others) = dataset::standardize_fit_apply(&fit, &[&test]);
    let pick = |d: &Dataset| -> Vec<DiagnosisTrace> {
        let ids: HashSet<String> = d.circuit_ids().into_iter().collect();
        traces
            .iter()
            .filter(|t| ids.contains(&t.circuit_id))
            .cloned()
            .collect()
    };
    Ok(Splits {
        validation_traces: pick(&validation),
        test_traces: pick(&test),
        fit,
        validation,
        test,
        standardization,
        fit_std,
        test_std: others.into_iter().next().expect("one extra dataset"),
    })
}

/// Fit the configured model on the fit split.
pub fn fit_model(cfg: &RunConfig, splits: &Splits) -> Result<Model> {
    let x = splits.fit_std.features();
    Ok(match cfg.model {
        ModelKind::Linear => Model::Linear(fit_penalized_linear(
            &x,
            &splits.fit_std.labels(),
            cfg.alpha,
            cfg.linear_options(),
        )?),
        ModelKind::KernelLogistic => Model::KernelLogistic(fit_kernel_logistic(
            &x,
            &splits.fit_std.binary_labels(),
            cfg.kernel(),
        )?),
    })
}

/// Fit the model, pick tau and write the model file.
pub fn train(cfg: &RunConfig, out: &OutputDir) -> Result<TrainedModel> {
    cfg.validate()?;
    let splits = load_splits(cfg, out)?;
    let model = fit_model(cfg, &splits)?;
    let policy = TerminationPolicy::new(
        Scorer::Model(model.clone()),
        splits.standardization.clone(),
        0.5,
    )?;
    let tau = match cfg.tau {
        TauSetting::Fixed(t) => t,
        TauSetting::Auto => {
            let (tau, report) = select_tau(&policy, &splits.validation_traces, &TAU_GRID)?;
            log::info!(
                "selected tau {tau}: validation accuracy {:.4}, reduction {:.4}",
                report.diagnosis_accuracy,
                report.volume_reduction
            );
            tau
        }
    };
    let trained = TrainedModel {
        model,
        standardization: splits.standardization.clone(),
        tau,
        train_circuits: splits.train_circuits(),
    };
    write_file(&out.model(), |w| write_model(&trained, w))?;
    Ok(trained)
}

fn write_reports(out: &OutputDir, prefix: &str, report: &TerminationReport) -> Result<()> {
    write_file(&out.path(&format!("{prefix}report.csv")), |w| {
        report.write_per_circuit_csv(w)
    })?;
    write_file(&out.path(&format!("{prefix}summary.csv")), |w| {
        report.write_summary_csv(w)
    })
}

/// Score the trained policy on the held-out test circuits.
pub fn evaluate(cfg: &RunConfig, out: &OutputDir) -> Result<TerminationReport> {
    let trained = read_model(open(&out.model(), "run `train` first")?)?;
    let splits = load_splits(cfg, out)?;
    check_disjoint(&trained.train_circuits, &splits.test_traces)?;
    let policy = TerminationPolicy::new(
        Scorer::Model(trained.model),
        trained.standardization,
        trained.tau,
    )?;
    let mut report = evaluation::evaluate(&policy, &splits.test_traces)?;
    report.corpus_seed = Some(cfg.corpus_seed);
    write_reports(out, "", &report)?;
    log::info!(
        "test circuits {}: diagnosis accuracy {:.4}, volume reduction {:.4}",
        report.per_circuit.len(),
        report.diagnosis_accuracy,
        report.volume_reduction
    );
    Ok(report)
}

/// Ground-truth scorer (scores = y, tau = 1) on the test circuits.
pub fn oracle_eval(cfg: &RunConfig, out: &OutputDir) -> Result<TerminationReport> {
    let splits = load_splits(cfg, out)?;
    let mut report = evaluation::evaluate(&TerminationPolicy::oracle(), &splits.test_traces)?;
    report.corpus_seed = Some(cfg.corpus_seed);
    write_reports(out, "oracle_", &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub alpha: Vec<AlphaPoint>,
    pub betas: Vec<(f64, Vec<f64>)>,
    pub curve: Vec<CurvePoint>,
}

/// Learning-curve sizes from fractions of the fit rows, ascending and unique.
pub fn curve_sizes(fractions: &[f64], rows: usize) -> Vec<usize> {
    let mut sizes: Vec<usize> = fractions
        .iter()
        .map(|f| ((f * rows as f64).round() as usize).clamp(1, rows))
        .collect();
    sizes.sort_unstable();
    sizes.dedup();
    sizes
}

/// Alpha sweep, beta weights and learning curve.
pub fn sweep(cfg: &RunConfig, out: &OutputDir) -> Result<SweepOutput> {
    cfg.validate()?;
    if cfg.sweep_alphas.is_empty() {
        bail!("sweep_alphas is empty");
    }
    let splits = load_splits(cfg, out)?;
    let data = SweepData {
        train: &splits.fit_std,
        test_rows: &splits.test_std,
        standardization: &splits.standardization,
        validation: &splits.validation_traces,
        test: &splits.test_traces,
    };
    let alpha = evaluation::sweep_alpha(&cfg.sweep_alphas, &data, cfg.sweep_options())?;
    let betas =
        evaluation::beta_weight_report(&cfg.sweep_alphas, &splits.fit_std, cfg.sweep_options())?;
    let sizes = curve_sizes(&cfg.curve_fractions, splits.fit_std.len());
    let curve = evaluation::learning_curve(
        &sizes,
        &splits.fit_std,
        &splits.test_std,
        cfg.kernel(),
        cfg.curve_seed,
    )?;
    write_file(&out.path("sweep_alpha.csv"), |w| {
        evaluation::write_sweep_alpha_csv(&alpha, w)
    })?;
    write_file(&out.path("beta_weights.csv"), |w| {
        evaluation::write_beta_weights_csv(&betas, w)
    })?;
    write_file(&out.path("learning_curve.csv"), |w| {
        evaluation::write_learning_curve_csv(&curve, w)
    })?;
    Ok(SweepOutput {
        alpha,
        betas,
        curve,
    })
}
