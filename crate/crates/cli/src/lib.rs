//! `bdt` command-line tool: train an ensemble, classify with the uncertainty
//! envelope, extract a single tree, rank features, cross-validate and
//! generate synthetic data.

pub mod crossval;
pub mod diagram;
pub mod error;
pub mod model;
pub mod seed;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use bdt_core::data::{generate_synthetic_stca, load_csv, read_table, write_csv, FoldStrategy, SynthConfig};
use bdt_core::selection::{map_scores, select_mapw, select_sc};
use bdt_core::{
    run_chain, select_map, BdtError, Dataset, Ensemble, EnsembleMeta, Exec, Hyperparameters, MoveProbs, PriorConfig,
    PriorKind, SelectionMethod,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::crossval::{crossval, CrossvalConfig};
pub use crate::error::{CliError, Result};
use crate::model::{ChainSummary, ModelFile, SelectionRecord};

#[derive(Debug, Parser)]
#[command(name = "bdt", version, about = "Bayesian decision-tree averaging")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample an ensemble from labeled data.
    Train(TrainArgs),
    /// Classify rows and report the uncertainty envelope.
    Predict(PredictArgs),
    /// Extract a single tree from an ensemble.
    Select(SelectArgs),
    /// Posterior feature weights.
    Importance(ImportanceArgs),
    /// Compare the ensemble with single-tree selections over train/test folds.
    Crossval(CrossvalArgs),
    /// Generate a synthetic conflict-alert dataset.
    Synth(SynthArgs),
}

fn parse_move_probs(s: &str) -> std::result::Result<MoveProbs, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("'{p}' is not a number")))
        .collect::<std::result::Result<_, _>>()?;
    match v[..] {
        [birth, death, change_split, change_rule] => Ok(MoveProbs { birth, death, change_split, change_rule }),
        _ => Err("expected four comma-separated probabilities: birth,death,change-split,change-rule".into()),
    }
}

fn parse_prior(s: &str) -> std::result::Result<PriorKind, String> {
    if s == "uniform-leaves" {
        return Ok(PriorKind::UniformLeaves);
    }
    let rest = s.strip_prefix("chipman:").ok_or("expected 'uniform-leaves' or 'chipman:GAMMA,DELTA'")?;
    let (g, d) = rest.split_once(',').ok_or("expected 'chipman:GAMMA,DELTA'")?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("'{t}' is not a number"));
    Ok(PriorKind::Chipman { gamma: num(g)?, delta: num(d)? })
}

#[derive(Debug, Clone, Args)]
pub struct ChainArgs {
    /// Minimum number of training rows in a terminal node.
    #[arg(long, default_value_t = 15)]
    pub pmin: usize,
    #[arg(long, default_value_t = 100_000)]
    pub burnin: usize,
    #[arg(long, default_value_t = 10_000)]
    pub postburnin: usize,
    /// Keep every n-th post burn-in tree.
    #[arg(long, default_value_t = 7)]
    pub thin: usize,
    /// Change-rule step std on the [0, 1] feature scale.
    #[arg(long, default_value_t = 0.3)]
    pub proposal_std: f64,
    /// Birth, death, change-split and change-rule probabilities.
    #[arg(long, default_value = "0.1,0.1,0.2,0.6", value_parser = parse_move_probs)]
    pub move_probs: MoveProbs,
    /// Dirichlet concentration of the terminal-node class probabilities.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// `uniform-leaves` or `chipman:GAMMA,DELTA`.
    #[arg(long, default_value = "uniform-leaves", value_parser = parse_prior)]
    pub prior: PriorKind,
    #[arg(long, env = "BDT_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Confidence threshold of the uncertainty envelope.
    #[arg(long, default_value_t = 0.99)]
    pub gamma0: f64,
}

impl ChainArgs {
    pub fn hyperparameters(&self) -> Hyperparameters {
        Hyperparameters {
            p_min: self.pmin,
            move_probs: self.move_probs,
            proposal_std: self.proposal_std,
            burn_in: self.burnin,
            post_burn_in: self.postburnin,
            thin: self.thin,
            gamma0: self.gamma0,
            alpha: self.alpha,
            prior: self.prior,
            seed: self.seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Name of the label column.
    #[arg(long, default_value = "alert")]
    pub label: String,
    #[command(flatten)]
    pub chain: ChainArgs,
    /// Model file to write; the diagnostics trace goes next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0.99)]
    pub gamma0: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Method {
    Sc,
    Map,
    Mapw,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Training data; required by `sc` and `map`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Method,
    #[arg(long, default_value_t = 0.99)]
    pub gamma0: f64,
    /// Threshold tolerance of `mapw` on the normalized feature scale.
    #[arg(long, default_value_t = 0.05)]
    pub tol: f64,
    /// Single-tree model file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Diagram file; defaults to the model path with a `.txt` extension.
    #[arg(long)]
    pub diagram: Option<PathBuf>,
    /// Write every tree's selection score to this CSV.
    #[arg(long)]
    pub audit: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ImportanceArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Strategy {
    RepeatedHalves,
    StratifiedKfold,
}

#[derive(Debug, Args)]
pub struct CrossvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "alert")]
    pub label: String,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, value_enum, default_value = "repeated-halves")]
    pub strategy: Strategy,
    #[arg(long, default_value_t = 0.05)]
    pub tol: f64,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 60)]
    pub pairs: usize,
    #[arg(long, default_value_t = 40)]
    pub cycles: usize,
    #[arg(long, default_value_t = 1500.0)]
    pub alert_distance: f64,
    #[arg(long, default_value_t = 750.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.05)]
    pub flip_rate: f64,
    #[arg(long, env = "BDT_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Train(a) => train(&a, out),
        Command::Predict(a) => predict(&a, out),
        Command::Select(a) => select(&a, out),
        Command::Importance(a) => importance(&a, out),
        Command::Crossval(a) => cross_validate(&a, out),
        Command::Synth(a) => synth(&a, out),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(CliError::io(path))
}

fn say(out: &mut dyn Write, text: std::fmt::Arguments) -> Result<()> {
    out.write_fmt(text).map_err(CliError::io("<stdout>"))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Io { path: path.to_path_buf(), source: e.into() }
}

/// Path of the diagnostics trace written next to a model file.
pub fn diagnostics_path(model: &Path) -> PathBuf {
    model.with_extension("diagnostics.csv")
}

fn train(a: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let data = load_csv(&a.data, &a.label)?;
    let hyper = a.chain.hyperparameters();
    let run = run_chain(&data, &hyper)?;
    let summary = ChainSummary::from_diagnostics(&run.diagnostics);
    ModelFile::from_ensemble(&run.ensemble, Some(summary.clone())).save(&a.out)?;
    let trace = diagnostics_path(&a.out);
    let mut w = create(&trace)?;
    run.diagnostics.write_csv(&mut w).map_err(csv_err(&trace))?;
    w.flush().map_err(CliError::io(&trace))?;

    let converged = match summary.converged {
        Some(true) => "yes",
        Some(false) => "no",
        None => "n/a (no burn-in)",
    };
    say(out, format_args!("trees: {}\n", run.ensemble.len()))?;
    if hyper.burn_in > 0 {
        say(out, format_args!("acceptance burn-in: {:.4}\n", summary.acceptance_burn_in))?;
    }
    say(out, format_args!("acceptance post-burn-in: {:.4}\n", summary.acceptance_post_burn_in))?;
    say(out, format_args!("converged: {converged}\n"))?;
    say(out, format_args!("model: {}\ndiagnostics: {}\n", a.out.display(), trace.display()))
}

/// Features of a CSV file checked against a model's schema, plus its labels
/// encoded with the model's class names when the label column is present.
fn read_for_model(path: &Path, meta: &EnsembleMeta) -> Result<(Vec<f64>, Option<Vec<usize>>)> {
    let table = read_table(path, &meta.label_name, false).map_err(BdtError::from)?;
    if table.feature_names.len() != meta.n_features() {
        return Err(BdtError::Schema { expected: meta.n_features(), actual: table.feature_names.len() }.into());
    }
    let labels = table
        .labels
        .map(|raw| {
            raw.iter()
                .map(|l| {
                    meta.class_names
                        .iter()
                        .position(|c| c == l)
                        .ok_or_else(|| BdtError::Input(format!("label '{l}' is not one of the model's classes")).into())
                })
                .collect::<Result<Vec<usize>>>()
        })
        .transpose()?;
    Ok((table.features, labels))
}

fn labeled_for_model(path: &Path, meta: &EnsembleMeta) -> Result<Dataset> {
    let (features, labels) = read_for_model(path, meta)?;
    let labels =
        labels.ok_or_else(|| BdtError::Load(bdt_core::LoadError::UnknownLabelColumn(meta.label_name.clone())))?;
    Ok(Dataset::from_flat(
        features,
        labels,
        meta.feature_names.clone(),
        meta.label_name.clone(),
        meta.class_names.clone(),
    )?)
}

fn predict(a: &PredictArgs, out: &mut dyn Write) -> Result<()> {
    let ens = ModelFile::load(&a.model)?.ensemble()?;
    let meta = ens.meta();
    let (features, labels) = read_for_model(&a.data, meta)?;
    let report = ens.envelope(&features, labels.as_deref(), a.gamma0, Exec::default())?;

    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(create(&a.out)?);
    let mut header = vec!["row".to_string(), "predicted".to_string()];
    header.extend(meta.class_names.iter().map(|c| format!("p_{c}")));
    header.extend(["gamma".to_string(), "status".to_string()]);
    if labels.is_some() {
        header.push("label".into());
    }
    let err = csv_err(&a.out);
    w.write_record(&header).map_err(&err)?;
    for (i, o) in report.outcomes.iter().enumerate() {
        let mut cells = vec![i.to_string(), meta.class_names[o.predicted].clone()];
        cells.extend(o.probabilities.iter().map(|p| p.to_string()));
        cells.extend([o.gamma.to_string(), o.status.name().to_string()]);
        if let Some(l) = &labels {
            cells.push(meta.class_names[l[i]].clone());
        }
        w.write_record(&cells).map_err(&err)?;
    }
    w.flush().map_err(CliError::io(&a.out))?;

    say(out, format_args!("rows: {}\n", report.outcomes.len()))?;
    say(out, format_args!("confident: {:.4}\n", report.confident_fraction()))?;
    if let Some(c) = report.counts {
        say(out, format_args!("confident correct: {:.4}\n", c.confident_correct_rate()))?;
        say(out, format_args!("confident incorrect: {:.4}\n", c.confident_incorrect_rate()))?;
        say(out, format_args!("uncertain: {:.4}\n", c.uncertain_rate()))?;
        say(out, format_args!("misclassification: {:.4}\n", c.misclassification_rate()))?;
    }
    Ok(())
}

fn select(a: &SelectArgs, out: &mut dyn Write) -> Result<()> {
    let model = ModelFile::load(&a.model)?;
    let ens = model.ensemble()?;
    let train = match (a.method, &a.data) {
        (Method::Mapw, _) => None,
        (_, Some(path)) => Some(labeled_for_model(path, ens.meta())?),
        (m, None) => return Err(CliError::Usage(format!("--method {m:?} needs --data").to_lowercase())),
    };
    let prior_kind = ens.meta().hyper.as_ref().map_or(PriorKind::UniformLeaves, |h| h.prior);
    let report = match a.method {
        Method::Sc => select_sc(&ens, train.as_ref().unwrap(), a.gamma0)?,
        Method::Map => {
            let train = train.as_ref().unwrap();
            select_map(&ens, train, &PriorConfig::for_data(prior_kind, train))?
        }
        Method::Mapw => select_mapw(&ens, a.tol)?,
    };

    let single = Ensemble::new(vec![report.tree.clone()], ens.meta().clone())?;
    let mut file = ModelFile::from_ensemble(&single, None);
    file.selection = Some(SelectionRecord { method: report.method.name().into(), source_index: report.index });
    file.save(&a.out)?;
    let diagram_path = a.diagram.clone().unwrap_or_else(|| a.out.with_extension("txt"));
    std::fs::write(&diagram_path, diagram::render(&report.tree, ens.meta())).map_err(CliError::io(&diagram_path))?;

    if let Some(path) = &a.audit {
        let scores = match (report.method, &train) {
            (SelectionMethod::Map, _) => report.scores.clone(),
            (SelectionMethod::Mapw, _) => report.scores.clone(),
            (SelectionMethod::Sc, Some(t)) => {
                map_scores(&ens, t, &PriorConfig::for_data(prior_kind, t), Exec::default())?
            }
            (SelectionMethod::Sc, None) => unreachable!(),
        };
        let mut w = create(path)?;
        writeln!(w, "tree,score,nodes").map_err(CliError::io(path))?;
        for (i, (s, t)) in scores.iter().zip(ens.trees()).enumerate() {
            writeln!(w, "{i},{s},{}", t.node_count()).map_err(CliError::io(path))?;
        }
        w.flush().map_err(CliError::io(path))?;
    }

    say(out, format_args!("method: {}\n", report.method.name()))?;
    say(out, format_args!("tree: {} of {}\n", report.index, ens.len()))?;
    say(out, format_args!("nodes: {}\nleaves: {}\n", report.tree_size, report.tree.leaf_count()))?;
    if let Some([s1, s2, s3]) = report.set_sizes {
        say(out, format_args!("S1: {s1}\nS2: {s2}\nS3: {s3}\n"))?;
    }
    say(out, format_args!("model: {}\ndiagram: {}\n", a.out.display(), diagram_path.display()))
}

fn importance(a: &ImportanceArgs, out: &mut dyn Write) -> Result<()> {
    let ens = ModelFile::load(&a.model)?.ensemble()?;
    let imp = ens.feature_importance();
    let names = &ens.meta().feature_names;
    let width = names.iter().map(String::len).max().unwrap_or(0).max("feature".len());
    say(out, format_args!("{:<width$}  {:>8}  {:>4}\n", "feature", "weight", "rank"))?;
    for j in imp.order() {
        say(out, format_args!("{:<width$}  {:>8.4}  {:>4}\n", names[j], imp.weights[j], imp.ranks[j]))?;
    }
    if let Some(path) = &a.out {
        let mut w = create(path)?;
        writeln!(w, "feature,weight,rank").map_err(CliError::io(path))?;
        for j in imp.order() {
            writeln!(w, "{},{},{}", names[j], imp.weights[j], imp.ranks[j]).map_err(CliError::io(path))?;
        }
        w.flush().map_err(CliError::io(path))?;
    }
    Ok(())
}

fn cross_validate(a: &CrossvalArgs, out: &mut dyn Write) -> Result<()> {
    let data = load_csv(&a.data, &a.label)?;
    let cfg = CrossvalConfig {
        folds: a.folds,
        strategy: match a.strategy {
            Strategy::RepeatedHalves => FoldStrategy::RepeatedHalves,
            Strategy::StratifiedKfold => FoldStrategy::StratifiedKFold,
        },
        hyper: a.chain.hyperparameters(),
        mapw_tol: a.tol,
        exec: Exec::default(),
    };
    let table = crossval(&data, &cfg)?;
    let mut w = create(&a.out)?;
    table.write_csv(&mut w).map_err(csv_err(&a.out))?;
    w.flush().map_err(CliError::io(&a.out))?;

    say(out, format_args!("{:>5}  {:>8}  {:>8}  {:>8}  {:>8}\n", "fold", "ensemble", "sc", "map", "mapw"))?;
    for r in &table.rows {
        say(
            out,
            format_args!(
                "{:>5}  {:>8.4}  {:>8.4}  {:>8.4}  {:>8.4}\n",
                r.fold, r.ensemble_error, r.sc_error, r.map_error, r.mapw_error
            ),
        )?;
    }
    say(
        out,
        format_args!(
            "{:>5}  {:>8.4}  {:>8.4}  {:>8.4}  {:>8.4}\n",
            "mean",
            table.mean(|r| r.ensemble_error),
            table.mean(|r| r.sc_error),
            table.mean(|r| r.map_error),
            table.mean(|r| r.mapw_error)
        ),
    )
}

fn synth(a: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = SynthConfig {
        pair_count: a.pairs,
        cycles_per_pair: a.cycles,
        alert_distance: a.alert_distance,
        noise_std: a.noise,
        label_flip_rate: a.flip_rate,
        seed: a.seed,
    };
    let data = generate_synthetic_stca(&cfg)?;
    let mut w = create(&a.out)?;
    write_csv(&data, &mut w).map_err(BdtError::from)?;
    w.flush().map_err(CliError::io(&a.out))?;
    let alerts = data.labels().iter().filter(|&&y| y == 1).count();
    say(out, format_args!("rows: {}\nalert rate: {:.4}\n", data.n_rows(), alerts as f64 / data.n_rows() as f64))
}
