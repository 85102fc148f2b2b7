//! CSV file formats. All files are UTF-8 with a header row; floats use `.`
//! and are written in shortest round-trip form, booleans as `0`/`1`.
//!
//! | file            | columns                                                     |
//! |-----------------|-------------------------------------------------------------|
//! | patients.csv    | patient_id,is_cancer,diagnosis_time,scan_id,scan_time       |
//! | scans.csv       | scan_id,f0,...,f{d-1}                                       |
//! | truth.csv       | patient_id,onset_time                                       |
//! | labels.csv      | scan_id,patient_id,t_d,p,y,right_censored                   |
//! | predictions.csv | scan_id,y_hat,t_pred,fold                                   |
//!
//! `patients.csv` has one row per scan with the patient fields repeated;
//! `diagnosis_time` is blank when absent. `fold` may be blank in predictions.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use csv::{ReaderBuilder, StringRecord, WriterBuilder};

use crate::error::{Error, Result};
use crate::eval::{EvalReport, KmCurve, RocPoint, ScatterPoint, ThresholdRow};
use crate::labels::{PatientRecord, ScanLabel};
use crate::loss::Prediction;
use crate::model::{FoldPrediction, TrainHistory};
use crate::synth::OnsetTruth;

fn b01(v: bool) -> &'static str {
    if v {
        "1"
    } else {
        "0"
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.line() as usize);
    Error::Schema {
        path: path.to_path_buf(),
        row,
        message: e.to_string(),
    }
}

/// Buffers CSV output in memory; [`Table::save`] writes it in one go.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = WriterBuilder::new().from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Self { writer }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).expect("in-memory write");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.writer.into_inner().expect("in-memory flush")
    }

    pub fn into_string(self) -> String {
        String::from_utf8(self.into_bytes()).expect("utf-8 fields")
    }

    pub fn save(self, path: &Path) -> Result<()> {
        let bytes = self.into_bytes();
        let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(path, e))
    }
}

/// Reader over a CSV source that resolves columns by header name and
/// reports errors with 1-based line numbers.
struct Rows {
    path: PathBuf,
    columns: HashMap<String, usize>,
    header: Vec<String>,
    records: Vec<(usize, StringRecord)>,
}

impl Rows {
    fn from_reader<R: Read>(path: &Path, reader: R) -> Result<Self> {
        let mut rdr = ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| csv_err(path, e))?
            .iter()
            .map(str::to_string)
            .collect();
        let columns = header.iter().enumerate().map(|(i, h)| (h.clone(), i)).collect();
        let mut records = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            records.push((line, rec));
        }
        Ok(Self {
            path: path.to_path_buf(),
            columns,
            header,
            records,
        })
    }

    fn open(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(path, f)
    }

    fn err(&self, row: usize, message: impl Into<String>) -> Error {
        Error::Schema {
            path: self.path.clone(),
            row,
            message: message.into(),
        }
    }

    fn require(&self, names: &[&str]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|n| {
                self.columns
                    .get(*n)
                    .copied()
                    .ok_or_else(|| self.err(1, format!("missing column {n}")))
            })
            .collect()
    }

    fn str<'a>(&self, line: usize, rec: &'a StringRecord, col: usize) -> Result<&'a str> {
        rec.get(col).ok_or_else(|| self.err(line, "too few fields"))
    }

    fn f64(&self, line: usize, rec: &StringRecord, col: usize) -> Result<f64> {
        let s = self.str(line, rec, col)?;
        let v: f64 = s
            .parse()
            .map_err(|_| self.err(line, format!("{}: not a number: {s:?}", self.header[col])))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.err(line, format!("{}: not finite", self.header[col])))
        }
    }

    fn opt_f64(&self, line: usize, rec: &StringRecord, col: usize) -> Result<Option<f64>> {
        if self.str(line, rec, col)?.is_empty() {
            Ok(None)
        } else {
            self.f64(line, rec, col).map(Some)
        }
    }

    fn bool(&self, line: usize, rec: &StringRecord, col: usize) -> Result<bool> {
        match self.str(line, rec, col)? {
            "0" | "false" => Ok(false),
            "1" | "true" => Ok(true),
            other => Err(self.err(line, format!("{}: expected 0 or 1, got {other:?}", self.header[col]))),
        }
    }

    fn id(&self, line: usize, rec: &StringRecord, col: usize) -> Result<String> {
        let s = self.str(line, rec, col)?;
        if s.is_empty() {
            Err(self.err(line, format!("{} is empty", self.header[col])))
        } else {
            Ok(s.to_string())
        }
    }
}

// ── patients.csv ────────────────────────────────────────────────────────────

pub fn patients_table(records: &[PatientRecord]) -> Table {
    let mut t = Table::new(&["patient_id", "is_cancer", "diagnosis_time", "scan_id", "scan_time"]);
    for r in records {
        let dx = r.diagnosis_time.map(|d| d.to_string()).unwrap_or_default();
        for (id, time) in r.scan_ids.iter().zip(&r.scan_times) {
            t.row([
                r.patient_id.as_str(),
                b01(r.is_cancer),
                dx.as_str(),
                id.as_str(),
                time.to_string().as_str(),
            ]);
        }
    }
    t
}

pub fn write_patients(path: &Path, records: &[PatientRecord]) -> Result<()> {
    patients_table(records).save(path)
}

fn parse_patients(rows: Rows) -> Result<Vec<PatientRecord>> {
    let c = rows.require(&["patient_id", "is_cancer", "diagnosis_time", "scan_id", "scan_time"])?;
    let mut order: Vec<String> = Vec::new();
    let mut by_id: HashMap<String, (usize, PatientRecord)> = HashMap::new();
    let mut last_patient: Option<String> = None;
    for (line, rec) in &rows.records {
        let line = *line;
        let pid = rows.id(line, rec, c[0])?;
        let is_cancer = rows.bool(line, rec, c[1])?;
        let dx = rows.opt_f64(line, rec, c[2])?;
        let scan_id = rows.id(line, rec, c[3])?;
        let time = rows.f64(line, rec, c[4])?;
        match by_id.get_mut(&pid) {
            Some((first, r)) => {
                if last_patient.as_deref() != Some(pid.as_str()) {
                    return Err(rows.err(line, format!("rows for patient {pid} are not contiguous")));
                }
                if r.is_cancer != is_cancer || r.diagnosis_time != dx {
                    return Err(rows.err(
                        line,
                        format!("patient {pid} fields disagree with line {first}"),
                    ));
                }
                r.scan_ids.push(scan_id);
                r.scan_times.push(time);
            }
            None => {
                order.push(pid.clone());
                by_id.insert(
                    pid.clone(),
                    (
                        line,
                        PatientRecord {
                            patient_id: pid.clone(),
                            scan_ids: vec![scan_id],
                            scan_times: vec![time],
                            is_cancer,
                            diagnosis_time: dx,
                        },
                    ),
                );
            }
        }
        last_patient = Some(pid);
    }
    Ok(order
        .into_iter()
        .map(|id| by_id.remove(&id).expect("recorded").1)
        .collect())
}

pub fn read_patients(path: &Path) -> Result<Vec<PatientRecord>> {
    parse_patients(Rows::open(path)?)
}

pub fn parse_patients_str(text: &str) -> Result<Vec<PatientRecord>> {
    parse_patients(Rows::from_reader(Path::new("<string>"), text.as_bytes())?)
}

// ── scans.csv ───────────────────────────────────────────────────────────────

pub fn scans_table(features: &[(String, Vec<f64>)]) -> Table {
    let dim = features.first().map_or(0, |f| f.1.len());
    let mut header = vec!["scan_id".to_string()];
    header.extend((0..dim).map(|i| format!("f{i}")));
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = Table::new(&refs);
    for (id, f) in features {
        let mut row = vec![id.clone()];
        row.extend(f.iter().map(ToString::to_string));
        t.row(row);
    }
    t
}

pub fn write_scans(path: &Path, features: &[(String, Vec<f64>)]) -> Result<()> {
    scans_table(features).save(path)
}

pub fn read_scans(path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    let rows = Rows::open(path)?;
    let id_col = rows.require(&["scan_id"])?[0];
    let mut feat_cols = Vec::new();
    for i in 0.. {
        match rows.columns.get(&format!("f{i}")) {
            Some(&c) => feat_cols.push(c),
            None => break,
        }
    }
    if feat_cols.is_empty() {
        return Err(rows.err(1, "no feature columns f0..f{d-1}"));
    }
    rows.records
        .iter()
        .map(|(line, rec)| {
            let id = rows.id(*line, rec, id_col)?;
            let f = feat_cols
                .iter()
                .map(|&c| rows.f64(*line, rec, c))
                .collect::<Result<Vec<_>>>()?;
            Ok((id, f))
        })
        .collect()
}

// ── truth.csv ───────────────────────────────────────────────────────────────

pub fn write_truth(path: &Path, truth: &[OnsetTruth]) -> Result<()> {
    let mut t = Table::new(&["patient_id", "onset_time"]);
    for o in truth {
        t.row([o.patient_id.clone(), o.onset_time.to_string()]);
    }
    t.save(path)
}

// ── labels.csv ──────────────────────────────────────────────────────────────

pub fn labels_table(labels: &[ScanLabel]) -> Table {
    let mut t = Table::new(&["scan_id", "patient_id", "t_d", "p", "y", "right_censored"]);
    for l in labels {
        t.row([
            l.scan_id.as_str(),
            l.patient_id.as_str(),
            l.t_d.to_string().as_str(),
            b01(l.p),
            b01(l.y),
            b01(l.right_censored),
        ]);
    }
    t
}

pub fn write_labels(path: &Path, labels: &[ScanLabel]) -> Result<()> {
    labels_table(labels).save(path)
}

fn parse_labels(rows: Rows) -> Result<Vec<ScanLabel>> {
    let c = rows.require(&["scan_id", "patient_id", "t_d", "p", "y", "right_censored"])?;
    rows.records
        .iter()
        .map(|(line, rec)| {
            let l = ScanLabel {
                scan_id: rows.id(*line, rec, c[0])?,
                patient_id: rows.id(*line, rec, c[1])?,
                t_d: rows.f64(*line, rec, c[2])?,
                p: rows.bool(*line, rec, c[3])?,
                y: rows.bool(*line, rec, c[4])?,
                right_censored: rows.bool(*line, rec, c[5])?,
            };
            if l.right_censored == l.p {
                return Err(rows.err(*line, "right_censored must equal 1 - p"));
            }
            if !l.p && l.y {
                return Err(rows.err(*line, "y = 1 for a non-cancer patient"));
            }
            Ok(l)
        })
        .collect()
}

pub fn read_labels(path: &Path) -> Result<Vec<ScanLabel>> {
    parse_labels(Rows::open(path)?)
}

pub fn parse_labels_str(text: &str) -> Result<Vec<ScanLabel>> {
    parse_labels(Rows::from_reader(Path::new("<string>"), text.as_bytes())?)
}

// ── predictions.csv ─────────────────────────────────────────────────────────

pub fn predictions_table(preds: &[FoldPrediction]) -> Table {
    let mut t = Table::new(&["scan_id", "y_hat", "t_pred", "fold"]);
    for p in preds {
        t.row([
            p.prediction.scan_id.clone(),
            p.prediction.y_hat.to_string(),
            p.prediction.t_pred.to_string(),
            p.fold.to_string(),
        ]);
    }
    t
}

pub fn write_predictions(path: &Path, preds: &[FoldPrediction]) -> Result<()> {
    predictions_table(preds).save(path)
}

/// Predictions with their fold, when the file records one.
pub fn read_predictions(path: &Path) -> Result<Vec<(Prediction, Option<usize>)>> {
    let rows = Rows::open(path)?;
    let c = rows.require(&["scan_id", "y_hat", "t_pred"])?;
    let fold_col = rows.columns.get("fold").copied();
    rows.records
        .iter()
        .map(|(line, rec)| {
            let y_hat = rows.f64(*line, rec, c[1])?;
            if !(0.0..=1.0).contains(&y_hat) {
                return Err(rows.err(*line, format!("y_hat {y_hat} outside [0, 1]")));
            }
            let fold = match fold_col {
                Some(fc) if !rows.str(*line, rec, fc)?.is_empty() => Some(
                    rows.str(*line, rec, fc)?
                        .parse()
                        .map_err(|_| rows.err(*line, "fold is not an integer"))?,
                ),
                _ => None,
            };
            Ok((
                Prediction {
                    scan_id: rows.id(*line, rec, c[0])?,
                    y_hat,
                    t_pred: rows.f64(*line, rec, c[2])?,
                },
                fold,
            ))
        })
        .collect()
}

// ── report outputs ──────────────────────────────────────────────────────────

pub fn write_roc(path: &Path, points: &[RocPoint]) -> Result<()> {
    let mut t = Table::new(&["threshold", "fpr", "tpr"]);
    for p in points {
        t.row([p.threshold.to_string(), p.fpr.to_string(), p.tpr.to_string()]);
    }
    t.save(path)
}

pub fn km_table(km: &KmCurve) -> Table {
    let mut t = Table::new(&["time", "n_risk", "n_events", "n_censored", "survival"]);
    for s in &km.steps {
        t.row([
            s.time.to_string(),
            s.n_risk.to_string(),
            s.n_events.to_string(),
            s.n_censored.to_string(),
            s.survival.to_string(),
        ]);
    }
    t
}

pub fn write_km(path: &Path, km: &KmCurve) -> Result<()> {
    km_table(km).save(path)
}

pub fn write_scatter(path: &Path, points: &[ScatterPoint]) -> Result<()> {
    let mut t = Table::new(&["scan_id", "t_pred", "x", "cancer"]);
    for p in points {
        t.row([p.scan_id.as_str(), &p.t_pred.to_string(), &p.x.to_string(), b01(p.cancer)]);
    }
    t.save(path)
}

pub fn threshold_table_csv(rows: &[ThresholdRow]) -> Table {
    let mut t = Table::new(&["threshold", "recall", "noncancer_beyond"]);
    for r in rows {
        t.row([r.threshold.to_string(), r.recall.to_string(), r.noncancer_beyond.to_string()]);
    }
    t
}

pub fn write_history(path: &Path, fold: usize, hist: &TrainHistory) -> Result<()> {
    let mut t = Table::new(&["fold", "epoch", "lr", "train_loss", "val_loss", "val_auc", "selected"]);
    for e in &hist.epochs {
        t.row([
            fold.to_string(),
            e.epoch.to_string(),
            e.lr.to_string(),
            e.train_loss.to_string(),
            e.val_loss.to_string(),
            e.val_auc.map(|a| a.to_string()).unwrap_or_default(),
            b01(e.epoch == hist.selected_epoch).to_string(),
        ]);
    }
    t.save(path)
}

pub fn write_report(path: &Path, report: &EvalReport) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report).expect("report serialises");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
