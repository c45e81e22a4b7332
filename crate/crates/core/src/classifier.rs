//! Inference and evaluation.
//!
//! Test-time coding is the single product `u = Ωx` (no sparse pursuit), and
//! the predicted class is `argmax(W·Q·u)` with ties going to the lowest class
//! index. [`Scorer`] folds the chain into one `c × m` matrix for speed.

use std::fmt::Write as _;
use std::hint::black_box;
use std::io::Write;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::ridge::RidgeClassifier;

/// Anything that maps a feature vector to per-class scores.
pub trait Classify: Sync {
    fn input_dim(&self) -> usize;

    fn classes(&self) -> usize;

    /// Scores without a dimension check.
    fn scores_unchecked(&self, x: DVectorView<'_, f64>) -> DVector<f64>;

    fn scores(&self, x: DVectorView<'_, f64>) -> Result<DVector<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::dims(
                "predict",
                format!("input of length {}", self.input_dim()),
                x.len().to_string(),
            ));
        }
        Ok(self.scores_unchecked(x))
    }

    fn predict(&self, x: DVectorView<'_, f64>) -> Result<usize> {
        Ok(argmax(&self.scores(x)?))
    }
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax(scores: &DVector<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in scores.iter().enumerate().skip(1) {
        if v > scores[best] {
            best = i;
        }
    }
    best
}

/// Analysis code `Ωx`.
pub fn encode(model: &Model, x: DVectorView<'_, f64>) -> Result<DVector<f64>> {
    if x.len() != model.input_dim() {
        return Err(Error::dims(
            "encode",
            format!("input of length {}", model.input_dim()),
            x.len().to_string(),
        ));
    }
    Ok(model.omega() * x)
}

/// Chained prediction `argmax(W·(Q·(Ω·x)))`.
pub fn predict(model: &Model, x: DVectorView<'_, f64>) -> Result<usize> {
    model.predict(x)
}

impl Classify for Model {
    fn input_dim(&self) -> usize {
        Model::input_dim(self)
    }

    fn classes(&self) -> usize {
        Model::classes(self)
    }

    fn scores_unchecked(&self, x: DVectorView<'_, f64>) -> DVector<f64> {
        let code = self.omega() * x;
        self.w() * (self.q() * code)
    }
}

/// Precomputed `S = W·Q·Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scorer {
    s: DMatrix<f64>,
}

impl Scorer {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.s
    }
}

pub fn precompute_scorer(model: &Model) -> Scorer {
    Scorer {
        s: model.w() * (model.q() * model.omega()),
    }
}

impl From<&Model> for Scorer {
    fn from(model: &Model) -> Self {
        precompute_scorer(model)
    }
}

impl Classify for Scorer {
    fn input_dim(&self) -> usize {
        self.s.ncols()
    }

    fn classes(&self) -> usize {
        self.s.nrows()
    }

    fn scores_unchecked(&self, x: DVectorView<'_, f64>) -> DVector<f64> {
        &self.s * x
    }
}

impl Classify for RidgeClassifier {
    fn input_dim(&self) -> usize {
        self.weights().ncols()
    }

    fn classes(&self) -> usize {
        self.weights().nrows()
    }

    fn scores_unchecked(&self, x: DVectorView<'_, f64>) -> DVector<f64> {
        self.weights() * x
    }
}

/// Predicted class of every column of `data`.
pub fn predict_all<C: Classify + ?Sized>(clf: &C, data: &Dataset) -> Result<Vec<usize>> {
    data.x().column_iter().map(|col| clf.predict(col)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    /// Wall time of training, when the caller measured it.
    pub train_seconds: Option<f64>,
    /// Median over repetitions of (predict-loop wall time / `n_test`).
    pub test_seconds_per_sample: f64,
    pub n_test: usize,
}

/// Accuracy, confusion matrix and per-sample prediction time.
pub fn evaluate<C: Classify + ?Sized>(clf: &C, test: &Dataset, timing_reps: usize) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::InvalidData("test set is empty".into()));
    }
    if timing_reps == 0 {
        return Err(Error::InvalidData("timing_reps must be ≥ 1".into()));
    }
    if test.dim() != clf.input_dim() {
        return Err(Error::dims(
            "evaluate",
            format!("features of length {}", clf.input_dim()),
            test.dim().to_string(),
        ));
    }
    let c = clf.classes();
    if let Some(&label) = test.labels().iter().find(|&&l| l >= c) {
        return Err(Error::LabelOutOfRange { label, classes: c });
    }

    let predicted = predict_all(clf, test)?;
    let mut confusion = vec![vec![0; c]; c];
    for (&truth, &pred) in test.labels().iter().zip(&predicted) {
        confusion[truth][pred] += 1;
    }
    let n = test.len();
    let correct: usize = (0..c).map(|i| confusion[i][i]).sum();

    let mut per_sample: Vec<f64> = (0..timing_reps)
        .map(|_| {
            let start = Instant::now();
            for col in test.x().column_iter() {
                black_box(argmax(&clf.scores_unchecked(black_box(col))));
            }
            start.elapsed().as_secs_f64() / n as f64
        })
        .collect();

    Ok(EvalReport {
        accuracy: correct as f64 / n as f64,
        confusion,
        train_seconds: None,
        test_seconds_per_sample: median(&mut per_sample),
        n_test: n,
    })
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        (values[k / 2 - 1] + values[k / 2]) / 2.0
    }
}

impl EvalReport {
    pub fn with_train_seconds(mut self, seconds: f64) -> Self {
        self.train_seconds = Some(seconds);
        self
    }

    pub fn correct(&self) -> usize {
        (0..self.confusion.len()).map(|i| self.confusion[i][i]).sum()
    }

    /// Method / accuracy / training / testing row layout.
    pub fn to_table(&self, method: &str) -> String {
        let train = self
            .train_seconds
            .map_or_else(|| "n/a".to_string(), |s| format!("{s:.2}"));
        let width = method.len().max(7);
        let mut out = String::new();
        writeln!(
            out,
            "{:<width$}  {:>12}  {:>12}  {:>11}",
            "Method", "Accuracy (%)", "Training (s)", "Testing (s)"
        )
        .unwrap();
        writeln!(
            out,
            "{:<width$}  {:>11.2}%  {:>12}  {:>11.2e}",
            method,
            100.0 * self.accuracy,
            train,
            self.test_seconds_per_sample
        )
        .unwrap();
        out
    }

    pub fn confusion_table(&self) -> String {
        let mut out = String::from("true\\pred");
        for j in 0..self.confusion.len() {
            write!(out, " {j:>5}").unwrap();
        }
        out.push('\n');
        for (i, row) in self.confusion.iter().enumerate() {
            write!(out, "{i:>9}").unwrap();
            for v in row {
                write!(out, " {v:>5}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// One header row and one value row; the confusion matrix is flattened
    /// row-major into `confusion_<true>_<pred>` columns.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let c = self.confusion.len();
        let mut header = vec![
            "accuracy".to_string(),
            "train_seconds".to_string(),
            "test_seconds_per_sample".to_string(),
            "n_test".to_string(),
        ];
        let mut row = vec![
            self.accuracy.to_string(),
            self.train_seconds.map_or_else(String::new, |s| s.to_string()),
            self.test_seconds_per_sample.to_string(),
            self.n_test.to_string(),
        ];
        for i in 0..c {
            for j in 0..c {
                header.push(format!("confusion_{i}_{j}"));
                row.push(self.confusion[i][j].to_string());
            }
        }
        wtr.write_record(&header)?;
        wtr.write_record(&row)?;
        wtr.flush()?;
        Ok(())
    }
}
