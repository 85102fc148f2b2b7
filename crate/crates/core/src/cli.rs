//! `cfpt` command-line interface.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, Mode};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::{self, cohort_km};
use crate::io;
use crate::labels::derive_cohort_labels;
use crate::loss::{cel, cel_grad_logit, crl, crl_grad, sigmoid};
use crate::model::{run_crossval, snapshot};
use crate::synth::{calibrate_onset_scale, cohort_summary, generate_cohort, CohortSummary};

#[derive(Debug, Parser)]
#[command(name = "cfpt", version, about = "Censored multi-task learning of malignancy and cancer-free progression time")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort: patients.csv, scans.csv, truth.csv.
    Synth(SynthArgs),
    /// Derive per-scan labels from a patients CSV.
    Label(LabelArgs),
    /// Patient-level k-fold cross-validation with pooled test predictions.
    Crossval(CrossvalArgs),
    /// Evaluate pooled predictions against labels.
    Eval(EvalArgs),
    /// Kaplan-Meier curve of the cohort's baseline-scan survival data.
    Km(KmArgs),
    /// Check loss gradients against finite differences; optionally dump a loss curve.
    Losscheck(LosscheckArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fit onset_scale to the configured cancer_fraction_target first.
    #[arg(long)]
    pub calibrate: bool,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    #[arg(long)]
    pub patients: PathBuf,
    /// Output labels CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CrossvalArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub scans: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// single_task or multi_task.
    #[arg(long)]
    pub mode: Option<Mode>,
    /// Overrides both model and training seeds.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write one parameter snapshot per fold.
    #[arg(long)]
    pub save_models: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    /// Second prediction set for a paired McNemar comparison.
    #[arg(long)]
    pub predictions_b: Option<PathBuf>,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = eval::DEFAULT_THRESHOLDS.to_vec())]
    pub thresholds: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub operating_point: f64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct KmArgs {
    #[arg(long)]
    pub labels: PathBuf,
    /// Output km CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LosscheckArgs {
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `t_d,p,epsilon`: write the loss and gradient over t_pred in [-5, 10].
    #[arg(long)]
    pub curve: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn print_summary(s: &CohortSummary) {
    println!(
        "patients={} scans={} cancer_patients={} malignant_scans={} cancer_fraction={:.4} censoring_rate={:.4} mean_scans_per_patient={:.3}",
        s.patients,
        s.scans,
        s.cancer_patients,
        s.malignant_scans,
        s.cancer_fraction,
        s.censoring_rate,
        s.mean_scans_per_patient
    );
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

pub fn cmd_synth(args: &SynthArgs) -> Result<CohortSummary> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.cohort.seed = seed;
    }
    if args.calibrate {
        cfg.cohort.onset_scale = calibrate_onset_scale(&cfg.cohort, 0.005)?;
        println!("onset_scale={}", cfg.cohort.onset_scale);
    }
    let cohort = generate_cohort(&cfg.cohort)?;
    let summary = cohort_summary(&cohort.records)?;
    create_dir(&args.out)?;
    io::write_patients(&args.out.join("patients.csv"), &cohort.records)?;
    io::write_scans(&args.out.join("scans.csv"), &cohort.features)?;
    io::write_truth(&args.out.join("truth.csv"), &cohort.truth)?;
    Ok(summary)
}

pub fn cmd_label(args: &LabelArgs) -> Result<usize> {
    let records = io::read_patients(&args.patients)?;
    let labels = derive_cohort_labels(&records)?;
    io::write_labels(&args.out, &labels)?;
    Ok(labels.len())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossvalSummary {
    pub mode: Mode,
    pub folds: usize,
    pub scans: usize,
    /// `None` when the labels hold a single class.
    pub pooled_auc: Option<f64>,
}

pub fn cmd_crossval(args: &CrossvalArgs) -> Result<CrossvalSummary> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(mode) = args.mode {
        cfg = cfg.with_mode(mode);
    }
    if let Some(seed) = args.seed {
        cfg.model.seed = seed;
        cfg.train.seed = seed;
    }
    cfg.validate()?;
    let need = |flag: &Option<PathBuf>, from_cfg: &Option<PathBuf>, name: &str| {
        flag.clone()
            .or_else(|| from_cfg.clone())
            .ok_or_else(|| Error::Config(format!("no {name} path: pass --{name} or set paths.{name}")))
    };
    let labels_path = need(&args.labels, &cfg.paths.labels, "labels")?;
    let scans_path = need(&args.scans, &cfg.paths.scans, "scans")?;
    let out = need(&args.out, &cfg.paths.out, "out")?;

    let labels = io::read_labels(&labels_path)?;
    let features = io::read_scans(&scans_path)?;
    let dataset = Dataset::join(labels, features)?;
    let mut mcfg = cfg.model.clone();
    mcfg.input_dim = dataset.dim();
    let tcfg = cfg.effective_train()?;

    let result = run_crossval(&dataset, &mcfg, &tcfg, cfg.k_folds)?;
    create_dir(&out)?;
    io::write_predictions(&out.join("predictions.csv"), &result.predictions)?;
    for (fold, hist) in result.histories.iter().enumerate() {
        io::write_history(&out.join(format!("history_fold{fold}.csv")), fold, hist)?;
    }
    let mut folds = io::Table::new(&["patient_id", "fold", "role"]);
    for f in &result.folds {
        for (role, ids) in [("train", &f.train), ("val", &f.val), ("test", &f.test)] {
            for id in ids {
                folds.row([id.as_str(), &f.fold.to_string(), role]);
            }
        }
    }
    folds.save(&out.join("folds.csv"))?;
    if args.save_models {
        for (fold, m) in result.models.iter().enumerate() {
            snapshot::save(m, &out.join(format!("model_fold{fold}.txt")))?;
        }
    }

    let scores: Vec<f64> = result.predictions.iter().map(|p| p.prediction.y_hat).collect();
    let ys: Vec<bool> = dataset.labels().map(|l| l.y).collect();
    Ok(CrossvalSummary {
        mode: cfg.mode,
        folds: cfg.k_folds,
        scans: scores.len(),
        pooled_auc: eval::roc_auc(&scores, &ys).ok().map(|r| r.auc),
    })
}

pub fn cmd_eval(args: &EvalArgs) -> Result<eval::EvalReport> {
    let labels = io::read_labels(&args.labels)?;
    let preds: Vec<_> = io::read_predictions(&args.predictions)?
        .into_iter()
        .map(|(p, _)| p)
        .collect();
    let preds_b = match &args.predictions_b {
        Some(path) => Some(
            io::read_predictions(path)?
                .into_iter()
                .map(|(p, _)| p)
                .collect::<Vec<_>>(),
        ),
        None => None,
    };
    let report = eval::evaluate(
        &preds,
        &labels,
        preds_b.as_deref(),
        &args.thresholds,
        args.operating_point,
    )?;
    create_dir(&args.out)?;
    io::write_report(&args.out.join("report.json"), &report)?;
    io::write_roc(&args.out.join("roc.csv"), &report.roc)?;
    io::write_km(&args.out.join("km.csv"), &report.km)?;
    io::threshold_table_csv(&report.threshold_table).save(&args.out.join("thresholds.csv"))?;
    let pairs = eval::report::align(&preds, &labels)?;
    let points = eval::report::scatter(&pairs);
    let (cancer, non): (Vec<_>, Vec<_>) = points.into_iter().partition(|p| p.cancer);
    io::write_scatter(&args.out.join("scatter_cancer.csv"), &cancer)?;
    io::write_scatter(&args.out.join("scatter_noncancer.csv"), &non)?;

    Ok(report)
}

pub fn cmd_km(args: &KmArgs) -> Result<eval::KmCurve> {
    let labels = io::read_labels(&args.labels)?;
    let km = cohort_km(&labels)?;
    io::write_km(&args.out, &km)?;
    Ok(km)
}

/// Largest finite-difference discrepancy seen by [`cmd_losscheck`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LosscheckSummary {
    pub checked: usize,
    pub max_crl_rel_err: f64,
    pub max_cel_rel_err: f64,
}

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-5;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

pub fn cmd_losscheck(args: &LosscheckArgs) -> Result<LosscheckSummary> {
    if let Some(spec) = &args.curve {
        let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad --curve value {s:?}")))
        };
        if parts.len() != 3 {
            return Err(Error::InvalidArgument("--curve expects t_d,p,epsilon".into()));
        }
        let (t_d, p, eps) = (parse(parts[0])?, parse(parts[1])? != 0.0, parse(parts[2])?);
        let mut t = io::Table::new(&["t_pred", "loss", "grad"]);
        for i in 0..=300 {
            let x = -5.0 + 15.0 * i as f64 / 300.0;
            t.row([x.to_string(), crl(x, t_d, p, eps)?.to_string(), crl_grad(x, t_d, p, eps)?.to_string()]);
        }
        match &args.out {
            Some(path) => t.save(path)?,
            None => print!("{}", t.into_string()),
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let (mut max_crl, mut max_cel, mut checked) = (0.0f64, 0.0f64, 0);
    while checked < args.samples {
        let t_pred: f64 = rng.random_range(-5.0..10.0);
        let t_d: f64 = rng.random_range(-5.0..10.0);
        let eps: f64 = rng.random_range(1e-3..=3.0);
        let p: bool = rng.random();
        let kink = if p { t_d - eps } else { t_d + eps };
        if (t_pred - kink).abs() < 1e-3 {
            continue;
        }
        let fd = (crl(t_pred + FD_STEP, t_d, p, eps)? - crl(t_pred - FD_STEP, t_d, p, eps)?) / (2.0 * FD_STEP);
        max_crl = max_crl.max(rel_err(crl_grad(t_pred, t_d, p, eps)?, fd));

        let z: f64 = rng.random_range(-8.0..8.0);
        let y: bool = rng.random();
        let f = |z: f64| cel(sigmoid(z), y, 1e-300);
        let fd = (f(z + FD_STEP)? - f(z - FD_STEP)?) / (2.0 * FD_STEP);
        max_cel = max_cel.max(rel_err(cel_grad_logit(z, y)?, fd));
        checked += 1;
    }
    let summary = LosscheckSummary {
        checked,
        max_crl_rel_err: max_crl,
        max_cel_rel_err: max_cel,
    };
    if max_crl > FD_TOL || max_cel > FD_TOL {
        return Err(Error::Undefined(format!(
            "gradient check failed: tolerance {FD_TOL:e} exceeded"
        )));
    }
    Ok(summary)
}

fn print_report(report: &eval::EvalReport) {
    println!("auc={:.4} accuracy={:.4} scans={}", report.auc, report.accuracy, report.n_scans);
    for row in &report.threshold_table {
        println!(
            "threshold={} recall={:.4} noncancer_beyond={:.4}",
            row.threshold, row.recall, row.noncancer_beyond
        );
    }
    if let Some(c) = &report.comparison {
        println!(
            "mcnemar b={} c={} statistic={:.4} p_value={:.4} method={:?} auc_b={:.4}",
            c.mcnemar.b, c.mcnemar.c, c.mcnemar.statistic, c.mcnemar.p_value, c.mcnemar.method, c.auc_b
        );
    }
}

/// Runs the CLI and maps failures to `error[<class>]: <message>` on stderr.
pub fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(a) => {
            let s = cmd_synth(a)?;
            print_summary(&s);
        }
        Command::Label(a) => {
            let n = cmd_label(a)?;
            println!("labels={n}");
        }
        Command::Crossval(a) => {
            let s = cmd_crossval(a)?;
            let auc = s.pooled_auc.map_or("undefined".to_string(), |a| format!("{a:.4}"));
            println!("mode={:?} folds={} scans={} pooled_auc={auc}", s.mode, s.folds, s.scans);
        }
        Command::Eval(a) => print_report(&cmd_eval(a)?),
        Command::Km(a) => {
            let km = cmd_km(a)?;
            println!("patients={} events={} steps={}", km.n_total, km.n_events, km.steps.len());
        }
        Command::Losscheck(a) => {
            let s = cmd_losscheck(a)?;
            println!(
                "checked={} max_crl_grad_rel_err={:.3e} max_cel_grad_rel_err={:.3e}",
                s.checked, s.max_crl_rel_err, s.max_cel_rel_err
            );
        }
    }
    Ok(())
}
