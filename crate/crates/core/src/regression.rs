//! Nearest-neighbour prediction of the stage-1 tolerance class.
//!
//! Features are min-max normalized over the training sample; a query is
//! classified by majority vote of its `k` nearest training points in
//! Euclidean distance. Evaluation reads the cost of the predicted class from
//! the stored sweep instead of re-solving.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{EpsilonGrid, SampleRecord};
use crate::features::FeatureVector;

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const NUM_FEATURES: usize = 5;

#[derive(Debug, Error)]
pub enum RegressionError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("sample too small to split: {units} unit(s)")]
    SampleTooSmall { units: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("record {matrix_id} has no cost for class {class}")]
    MissingCostEntry { matrix_id: String, class: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed model: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub min: [f64; NUM_FEATURES],
    pub max: [f64; NUM_FEATURES],
}

pub fn minimax_fit(train: &[FeatureVector]) -> Result<NormalizationParams, RegressionError> {
    if train.is_empty() {
        return Err(RegressionError::EmptyTrainingSet);
    }
    let mut min = [f64::INFINITY; NUM_FEATURES];
    let mut max = [f64::NEG_INFINITY; NUM_FEATURES];
    for f in train {
        for (k, v) in f.to_array().into_iter().enumerate() {
            min[k] = min[k].min(v);
            max[k] = max[k].max(v);
        }
    }
    Ok(NormalizationParams { min, max })
}

/// Maps each feature onto `[0, 1]`; degenerate features go to 0.5 and
/// out-of-range values are clamped.
pub fn minimax_apply(
    params: &NormalizationParams,
    features: &FeatureVector,
) -> [f64; NUM_FEATURES] {
    let raw = features.to_array();
    std::array::from_fn(|k| {
        let (lo, hi) = (params.min[k], params.max[k]);
        if hi > lo {
            ((raw[k] - lo) / (hi - lo)).clamp(0.0, 1.0)
        } else {
            0.5
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    /// Records sharing a `group_id` land on the same side.
    #[default]
    Group,
    Record,
}

/// Indices into the split sample, each in increasing order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded uniform split; the test side gets `round(test_fraction * units)`
/// units, clamped to leave at least one unit on each side.
pub fn split(
    records: &[SampleRecord],
    test_fraction: f64,
    seed: u64,
    mode: SplitMode,
) -> Result<Split, RegressionError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(RegressionError::InvalidArgument(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let (unit_of, units): (Vec<usize>, usize) = match mode {
        SplitMode::Record => ((0..records.len()).collect(), records.len()),
        SplitMode::Group => {
            let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
            let unit_of = records
                .iter()
                .map(|r| {
                    let next = ids.len();
                    *ids.entry(r.group_id.as_str()).or_insert(next)
                })
                .collect();
            (unit_of, ids.len())
        }
    };
    if units < 2 {
        return Err(RegressionError::SampleTooSmall { units });
    }
    let n_test = ((test_fraction * units as f64).round() as usize).clamp(1, units - 1);
    let mut order: Vec<usize> = (0..units).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_test = vec![false; units];
    for &u in &order[..n_test] {
        is_test[u] = true;
    }
    let (test, train): (Vec<usize>, Vec<usize>) =
        (0..records.len()).partition(|&i| is_test[unit_of[i]]);
    Ok(Split { train, test })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnPoint {
    pub features: [f64; NUM_FEATURES],
    pub class: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub format_version: u32,
    pub k: usize,
    pub normalization: NormalizationParams,
    /// Tolerances the class labels refer to.
    pub grid: EpsilonGrid,
    pub points: Vec<KnnPoint>,
}

impl KnnModel {
    /// Fits on the valid records of `train`.
    pub fn fit(
        train: &[&SampleRecord],
        k: usize,
        grid: &EpsilonGrid,
    ) -> Result<Self, RegressionError> {
        let valid: Vec<&SampleRecord> = train.iter().copied().filter(|r| r.valid).collect();
        if valid.is_empty() {
            return Err(RegressionError::EmptyTrainingSet);
        }
        if k == 0 || k > valid.len() {
            return Err(RegressionError::InvalidArgument(format!(
                "k = {k} must lie in 1..={} (training points)",
                valid.len()
            )));
        }
        let raw: Vec<FeatureVector> = valid.iter().map(|r| r.features).collect();
        let normalization = minimax_fit(&raw)?;
        let points = valid
            .iter()
            .map(|r| KnnPoint {
                features: minimax_apply(&normalization, &r.features),
                class: r.label,
            })
            .collect();
        Ok(KnnModel {
            format_version: MODEL_FORMAT_VERSION,
            k,
            normalization,
            grid: grid.clone(),
            points,
        })
    }

    /// Predicted class for raw features.
    pub fn predict(&self, features: &FeatureVector) -> usize {
        knn_predict(self, features)
    }

    pub fn predict_epsilon(&self, features: &FeatureVector) -> Option<f64> {
        self.grid.epsilon_for_class(self.predict(features))
    }

    pub fn save(&self, path: &Path) -> Result<(), RegressionError> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, RegressionError> {
        let model: KnnModel = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(RegressionError::InvalidArgument(format!(
                "unsupported model format version {}",
                model.format_version
            )));
        }
        if model.k == 0 || model.k > model.points.len() {
            return Err(RegressionError::InvalidArgument(
                "model k is inconsistent with its points".into(),
            ));
        }
        Ok(model)
    }
}

fn squared_distance(a: &[f64; NUM_FEATURES], b: &[f64; NUM_FEATURES]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Majority vote among the `k` nearest points. Distance ties keep training
/// order; vote ties go to the smaller class index (the looser tolerance).
pub fn knn_predict(model: &KnnModel, features: &FeatureVector) -> usize {
    let query = minimax_apply(&model.normalization, features);
    let mut ranked: Vec<(f64, usize)> = model
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| (squared_distance(&p.features, &query), i))
        .collect();
    let k = model.k.min(ranked.len());
    if k < ranked.len() {
        ranked.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    }
    let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
    for &(_, i) in &ranked[..k] {
        *votes.entry(model.points[i].class).or_default() += 1;
    }
    // BTreeMap iterates classes ascending, so the first maximum wins ties
    votes
        .into_iter()
        .fold(
            (0, 0),
            |best, (class, count)| if count > best.1 { (class, count) } else { best },
        )
        .0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalEntry {
    pub matrix_id: String,
    pub label: usize,
    pub predicted: usize,
    pub i_opt: f64,
    pub i_knn: f64,
    pub i_wrst: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub k: usize,
    pub entries: Vec<EvalEntry>,
    pub n_opt: f64,
    pub n_knn: f64,
    pub n_wrst: f64,
    /// `None` when `n_wrst` is zero.
    pub opt_over_wrst: Option<f64>,
    pub knn_over_wrst: Option<f64>,
    pub knn_minus_opt: f64,
    pub wrst_minus_knn: f64,
    /// `confusion[true - 1][predicted - 1]`.
    pub confusion: Vec<Vec<usize>>,
}

impl EvalReport {
    /// Every per-matrix and total ordering `I_opt <= I_knn <= I_wrst` holds.
    pub fn ordering_holds(&self) -> bool {
        self.entries
            .iter()
            .all(|e| e.i_opt <= e.i_knn && e.i_knn <= e.i_wrst)
            && self.n_opt <= self.n_knn
            && self.n_knn <= self.n_wrst
    }

    pub fn to_table(&self) -> String {
        let ratio = |r: Option<f64>| r.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
        let mut s = String::new();
        let _ = writeln!(s, "test matrices   {}", self.entries.len());
        let _ = writeln!(s, "k               {}", self.k);
        let _ = writeln!(s, "N_Opt           {}", self.n_opt);
        let _ = writeln!(s, "N_kNN           {}", self.n_knn);
        let _ = writeln!(s, "N_Wrst          {}", self.n_wrst);
        let _ = writeln!(s, "N_Opt / N_Wrst  {}", ratio(self.opt_over_wrst));
        let _ = writeln!(s, "N_kNN / N_Wrst  {}", ratio(self.knn_over_wrst));
        let _ = writeln!(s, "N_kNN - N_Opt   {}", self.knn_minus_opt);
        let _ = writeln!(s, "N_Wrst - N_kNN  {}", self.wrst_minus_knn);
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "confusion (rows: optimal class, columns: predicted class)"
        );
        let _ = write!(s, "     ");
        for c in 1..=self.confusion.len() {
            let _ = write!(s, "{c:>6}");
        }
        let _ = writeln!(s);
        for (t, row) in self.confusion.iter().enumerate() {
            let _ = write!(s, "{:>5}", t + 1);
            for count in row {
                let _ = write!(s, "{count:>6}");
            }
            let _ = writeln!(s);
        }
        s
    }

    /// Writes the table to `<stem>.txt` and the JSON record to `<stem>.json`.
    pub fn write(&self, stem: &Path) -> Result<(), RegressionError> {
        std::fs::write(stem.with_extension("txt"), self.to_table())?;
        let mut w = BufWriter::new(File::create(stem.with_extension("json"))?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }
}

/// Scores `model` on the valid records of `test`.
pub fn evaluate(model: &KnnModel, test: &[&SampleRecord]) -> Result<EvalReport, RegressionError> {
    let classes = model.grid.num_classes();
    let mut confusion = vec![vec![0usize; classes]; classes];
    let mut entries = Vec::with_capacity(test.len());
    for r in test.iter().filter(|r| r.valid) {
        let predicted = model.predict(&r.features);
        let i_knn =
            r.cost_for_class(predicted)
                .ok_or_else(|| RegressionError::MissingCostEntry {
                    matrix_id: r.matrix_id.clone(),
                    class: predicted,
                })?;
        if (1..=classes).contains(&r.label) && (1..=classes).contains(&predicted) {
            confusion[r.label - 1][predicted - 1] += 1;
        }
        entries.push(EvalEntry {
            matrix_id: r.matrix_id.clone(),
            label: r.label,
            predicted,
            i_opt: r.i_opt,
            i_knn,
            i_wrst: r.i_wrst,
        });
    }
    let n_opt: f64 = entries.iter().map(|e| e.i_opt).sum();
    let n_knn: f64 = entries.iter().map(|e| e.i_knn).sum();
    let n_wrst: f64 = entries.iter().map(|e| e.i_wrst).sum();
    let ratio = |x: f64| (n_wrst > 0.0).then(|| x / n_wrst);
    Ok(EvalReport {
        k: model.k,
        n_opt,
        n_knn,
        n_wrst,
        opt_over_wrst: ratio(n_opt),
        knn_over_wrst: ratio(n_knn),
        knn_minus_opt: n_knn - n_opt,
        wrst_minus_knn: n_wrst - n_knn,
        confusion,
        entries,
    })
}
