//! Three-class log-linear veridicality model.
//!
//! P(y = v | tweet) is proportional to exp(theta_v . f(tweet)). Training
//! maximizes the posterior under a Gaussian prior on the non-bias weights
//! (equivalently, minimizes NLL + ||theta||^2 / (2 sigma^2)), which is
//! convex, so zero initialization plus a deterministic quasi-Newton
//! minimizer yields a reproducible model.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::EventCategory;
use crate::error::{Error, Result};
use crate::features::{FeatureVocabulary, SparseVector};
use crate::io_util::atomic_write;
use crate::optim::{self, LbfgsOptions};
use crate::tagging::KeywordMatcher;

pub const MODEL_FORMAT_VERSION: u32 = 1;
/// Decision threshold on the positive-class probability used for
/// forecasting; overridable everywhere it is consumed.
pub const DEFAULT_THRESHOLD: f64 = 0.64;

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

/// Five-point veridicality annotation scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Veridicality5 {
    /// Definitely yes
    DY,
    /// Probably yes
    PY,
    /// Uncertain about the outcome
    UC,
    /// Probably no
    PN,
    /// Definitely no
    DN,
}

impl Veridicality5 {
    pub const ALL: [Veridicality5; 5] = [
        Veridicality5::DY,
        Veridicality5::PY,
        Veridicality5::UC,
        Veridicality5::PN,
        Veridicality5::DN,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Veridicality5::DY => "DY",
            Veridicality5::PY => "PY",
            Veridicality5::UC => "UC",
            Veridicality5::PN => "PN",
            Veridicality5::DN => "DN",
        }
    }
}

impl std::str::FromStr for Veridicality5 {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "DY" => Ok(Self::DY),
            "PY" => Ok(Self::PY),
            "UC" => Ok(Self::UC),
            "PN" => Ok(Self::PN),
            "DN" => Ok(Self::DN),
            other => Err(Error::InvalidArgument(format!(
                "unknown veridicality label `{other}`"
            ))),
        }
    }
}

/// Five-point desire annotation scale (orthogonal to veridicality).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Desire5 {
    /// Strongly wants the event to happen
    SW,
    /// Probably wants it
    PW,
    /// No desire either way
    ND,
    /// Probably does not want it
    PD,
    /// Strongly against
    SN,
}

impl Desire5 {
    pub const ALL: [Desire5; 5] = [
        Desire5::SW,
        Desire5::PW,
        Desire5::ND,
        Desire5::PD,
        Desire5::SN,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Desire5::SW => "SW",
            Desire5::PW => "PW",
            Desire5::ND => "ND",
            Desire5::PD => "PD",
            Desire5::SN => "SN",
        }
    }
}

impl std::str::FromStr for Desire5 {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "SW" => Ok(Self::SW),
            "PW" => Ok(Self::PW),
            "ND" => Ok(Self::ND),
            "PD" => Ok(Self::PD),
            "SN" => Ok(Self::SN),
            other => Err(Error::InvalidArgument(format!(
                "unknown desire label `{other}`"
            ))),
        }
    }
}

/// Collapsed three-class veridicality. Index order (negative, neutral,
/// positive) doubles as the pessimistic tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Veridicality3 {
    Negative,
    Neutral,
    Positive,
}

impl Veridicality3 {
    pub const CLASSES: [Veridicality3; 3] = [
        Veridicality3::Negative,
        Veridicality3::Neutral,
        Veridicality3::Positive,
    ];

    pub fn index(&self) -> usize {
        match self {
            Veridicality3::Negative => 0,
            Veridicality3::Neutral => 1,
            Veridicality3::Positive => 2,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Veridicality3::Negative => "negative",
            Veridicality3::Neutral => "neutral",
            Veridicality3::Positive => "positive",
        }
    }
}

/// DY/PY -> positive, UC -> neutral, PN/DN -> negative.
pub fn collapse_label(v5: Veridicality5) -> Veridicality3 {
    match v5 {
        Veridicality5::DY | Veridicality5::PY => Veridicality3::Positive,
        Veridicality5::UC => Veridicality3::Neutral,
        Veridicality5::PN | Veridicality5::DN => Veridicality3::Negative,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Self::Train),
            "dev" => Ok(Self::Dev),
            "test" => Ok(Self::Test),
            other => Err(Error::InvalidArgument(format!("unknown split `{other}`"))),
        }
    }
}

// ---------------------------------------------------------------------------
// Examples and annotations
// ---------------------------------------------------------------------------

/// A featurized, gold-labeled tweet.
#[derive(Debug, Clone)]
pub struct LabeledExample {
    pub tweet_id: String,
    pub features: SparseVector,
    pub veridicality5: Veridicality5,
    pub veridicality3: Veridicality3,
    pub desire5: Desire5,
    pub split: Split,
    pub category: EventCategory,
    /// Whether the queried contender ended up winning, when known. Drives
    /// the winners/losers annotation heatmaps.
    pub queried_contender_won: Option<bool>,
}

impl LabeledExample {
    pub fn new(
        tweet_id: impl Into<String>,
        features: SparseVector,
        veridicality5: Veridicality5,
        desire5: Desire5,
        split: Split,
    ) -> Self {
        Self {
            tweet_id: tweet_id.into(),
            features,
            veridicality3: collapse_label(veridicality5),
            veridicality5,
            desire5,
            split,
            category: EventCategory::Custom,
            queried_contender_won: None,
        }
    }
}

/// One row of the annotation TSV: `tweet_id <TAB> v5 <TAB> desire5 <TAB> split`.
#[derive(Debug, Clone)]
pub struct AnnotationRow {
    pub tweet_id: String,
    pub veridicality5: Veridicality5,
    pub desire5: Desire5,
    pub split: Split,
}

pub fn load_annotations(path: &Path) -> Result<Vec<AnnotationRow>> {
    let file = File::open(path).map_err(|_| Error::MissingInput(path.to_path_buf()))?;
    let reader = BufReader::new(file);
    let mut rows = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                line: lineno + 1,
                reason: format!("expected 4 tab-separated fields, found {}", fields.len()),
            });
        }
        let mk = |e: Error| Error::Schema {
            path: path.to_path_buf(),
            line: lineno + 1,
            reason: e.to_string(),
        };
        rows.push(AnnotationRow {
            tweet_id: fields[0].to_string(),
            veridicality5: fields[1].parse().map_err(mk)?,
            desire5: fields[2].parse().map_err(mk)?,
            split: fields[3].parse().map_err(mk)?,
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

/// Keyword settings baked into a model so inference featurizes exactly the
/// way training did.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KeywordConfig {
    pub keyword: String,
    pub fold_inflections: bool,
}

impl Default for KeywordConfig {
    fn default() -> Self {
        Self {
            keyword: "win".into(),
            fold_inflections: true,
        }
    }
}

impl KeywordConfig {
    pub fn matcher(&self) -> KeywordMatcher {
        KeywordMatcher::new(&self.keyword, self.fold_inflections)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Gaussian prior variance sigma^2 on non-bias weights.
    pub l2_sigma: f64,
    pub max_iter: usize,
    /// Gradient-norm convergence tolerance.
    pub tol: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            l2_sigma: 1.0,
            max_iter: 300,
            tol: 1e-6,
        }
    }
}

/// Trained per-class weights over a frozen vocabulary. The bias sits at the
/// last index of each class vector, excluded from the prior.
#[derive(Debug, Clone)]
pub struct Model {
    weights: [Vec<f64>; 3],
    vocab: FeatureVocabulary,
    pub hyperparams: Hyperparams,
    pub threshold: f64,
    pub keyword: KeywordConfig,
}

/// Class probabilities; sums to 1 within 1e-9.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distribution3 {
    pub p_positive: f64,
    pub p_neutral: f64,
    pub p_negative: f64,
}

impl Distribution3 {
    pub fn get(&self, class: Veridicality3) -> f64 {
        match class {
            Veridicality3::Negative => self.p_negative,
            Veridicality3::Neutral => self.p_neutral,
            Veridicality3::Positive => self.p_positive,
        }
    }
}

/// Decision for one tweet: the chosen label plus the positive-class
/// probability it was based on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: Veridicality3,
    pub confidence: f64,
}

impl Model {
    pub fn from_parts(
        vocab: FeatureVocabulary,
        weights: [Vec<f64>; 3],
        hyperparams: Hyperparams,
    ) -> Result<Self> {
        let dim = vocab.len() + 1;
        for (c, w) in weights.iter().enumerate() {
            if w.len() != dim {
                return Err(Error::VocabularyMismatch(format!(
                    "class {c} weight vector has {} entries, expected {dim}",
                    w.len()
                )));
            }
            if !w.iter().all(|x| x.is_finite()) {
                return Err(Error::VocabularyMismatch(format!(
                    "class {c} weight vector contains non-finite entries"
                )));
            }
        }
        Ok(Self {
            weights,
            vocab,
            hyperparams,
            threshold: DEFAULT_THRESHOLD,
            keyword: KeywordConfig::default(),
        })
    }

    pub fn vocab(&self) -> &FeatureVocabulary {
        &self.vocab
    }

    pub fn weights(&self) -> &[Vec<f64>; 3] {
        &self.weights
    }

    /// Weight vector dimension (vocabulary size + bias).
    pub fn dim(&self) -> usize {
        self.vocab.len() + 1
    }

    /// L2 norm of the non-bias weights, across all classes.
    pub fn weight_norm(&self) -> f64 {
        let v = self.vocab.len();
        self.weights
            .iter()
            .flat_map(|w| &w[..v])
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }
}

fn class_scores(weights: &[Vec<f64>; 3], vocab_len: usize, fv: &SparseVector) -> [f64; 3] {
    let mut scores = [0.0; 3];
    for (c, w) in weights.iter().enumerate() {
        scores[c] = fv.dot(&w[..vocab_len]) + w[vocab_len];
    }
    scores
}

fn softmax3(scores: [f64; 3]) -> [f64; 3] {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps = [
        (scores[0] - max).exp(),
        (scores[1] - max).exp(),
        (scores[2] - max).exp(),
    ];
    let sum = exps[0] + exps[1] + exps[2];
    [exps[0] / sum, exps[1] / sum, exps[2] / sum]
}

/// Softmax over the three class scores, with max-subtraction so large
/// weights cannot overflow.
pub fn predict_proba(model: &Model, fv: &SparseVector) -> Result<Distribution3> {
    if let Some(max_idx) = fv.max_index() {
        if max_idx as usize >= model.vocab.len() {
            return Err(Error::VocabularyMismatch(format!(
                "feature index {max_idx} out of range for vocabulary of {}",
                model.vocab.len()
            )));
        }
    }
    let p = softmax3(class_scores(&model.weights, model.vocab.len(), fv));
    Ok(Distribution3 {
        p_negative: p[0],
        p_neutral: p[1],
        p_positive: p[2],
    })
}

/// Threshold rule: positive iff p_positive is STRICTLY above the threshold,
/// otherwise the better of neutral/negative (ties fall to negative).
pub fn classify_distribution(dist: &Distribution3, threshold: f64) -> Classification {
    let label = if dist.p_positive > threshold {
        Veridicality3::Positive
    } else if dist.p_neutral > dist.p_negative {
        Veridicality3::Neutral
    } else {
        Veridicality3::Negative
    };
    Classification {
        label,
        confidence: dist.p_positive,
    }
}

pub fn classify(model: &Model, fv: &SparseVector, threshold: f64) -> Result<Classification> {
    Ok(classify_distribution(&predict_proba(model, fv)?, threshold))
}

// ---------------------------------------------------------------------------
// MAP objective
// ---------------------------------------------------------------------------

fn flat_nll_grad(
    flat: &[f64],
    dim: usize,
    examples: &[&LabeledExample],
    sigma_sq: f64,
) -> (f64, Vec<f64>) {
    let vocab_len = dim - 1;
    let mut nll = 0.0;
    let mut grad = vec![0.0; flat.len()];
    for ex in examples {
        let mut scores = [0.0; 3];
        for c in 0..3 {
            let w = &flat[c * dim..(c + 1) * dim];
            scores[c] = ex.features.dot(&w[..vocab_len]) + w[vocab_len];
        }
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps = [
            (scores[0] - max).exp(),
            (scores[1] - max).exp(),
            (scores[2] - max).exp(),
        ];
        let sum: f64 = exps.iter().sum();
        let gold = ex.veridicality3.index();
        nll += max + sum.ln() - scores[gold];
        for c in 0..3 {
            let coeff = exps[c] / sum - if c == gold { 1.0 } else { 0.0 };
            let base = c * dim;
            for (j, v) in ex.features.iter() {
                grad[base + j as usize] += coeff * v;
            }
            grad[base + vocab_len] += coeff;
        }
    }
    // Gaussian prior on non-bias weights.
    let inv_sigma_sq = 1.0 / sigma_sq;
    for c in 0..3 {
        let base = c * dim;
        for j in 0..vocab_len {
            let w = flat[base + j];
            nll += 0.5 * inv_sigma_sq * w * w;
            grad[base + j] += inv_sigma_sq * w;
        }
    }
    (nll, grad)
}

fn flatten(weights: &[Vec<f64>; 3]) -> Vec<f64> {
    weights.iter().flat_map(|w| w.iter().copied()).collect()
}

fn unflatten(flat: &[f64], dim: usize) -> [Vec<f64>; 3] {
    [
        flat[..dim].to_vec(),
        flat[dim..2 * dim].to_vec(),
        flat[2 * dim..3 * dim].to_vec(),
    ]
}

/// Negative log posterior: data NLL plus the Gaussian prior term
/// ||theta||^2 / (2 sigma^2) over non-bias weights.
pub fn neg_log_posterior(model: &Model, examples: &[LabeledExample]) -> f64 {
    let refs: Vec<&LabeledExample> = examples.iter().collect();
    let flat = flatten(&model.weights);
    flat_nll_grad(&flat, model.dim(), &refs, model.hyperparams.l2_sigma).0
}

/// Analytic gradient of [`neg_log_posterior`], per class (bias last).
pub fn gradient(model: &Model, examples: &[LabeledExample]) -> [Vec<f64>; 3] {
    let refs: Vec<&LabeledExample> = examples.iter().collect();
    let flat = flatten(&model.weights);
    let (_, g) = flat_nll_grad(&flat, model.dim(), &refs, model.hyperparams.l2_sigma);
    unflatten(&g, model.dim())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub initial_nll: f64,
    pub final_nll: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
    pub examples: usize,
}

/// MAP training from zero initialization. Deterministic: identical inputs
/// produce bit-identical models.
pub fn train(
    examples: &[LabeledExample],
    hyperparams: &Hyperparams,
    vocab: FeatureVocabulary,
) -> Result<(Model, TrainReport)> {
    if examples.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let dim = vocab.len() + 1;
    for ex in examples {
        if let Some(mi) = ex.features.max_index() {
            if mi as usize >= vocab.len() {
                return Err(Error::VocabularyMismatch(format!(
                    "example `{}` has feature index {mi} outside vocabulary of {}",
                    ex.tweet_id,
                    vocab.len()
                )));
            }
        }
    }
    let refs: Vec<&LabeledExample> = examples.iter().collect();
    let sigma_sq = hyperparams.l2_sigma;
    let objective = |x: &[f64]| flat_nll_grad(x, dim, &refs, sigma_sq);
    let opts = LbfgsOptions {
        max_iter: hyperparams.max_iter,
        grad_tol: hyperparams.tol,
        ..LbfgsOptions::default()
    };
    let min = optim::minimize(&objective, vec![0.0; 3 * dim], &opts)?;
    let report = TrainReport {
        initial_nll: min.initial_value,
        final_nll: min.value,
        iterations: min.iterations,
        grad_norm: min.grad_norm,
        converged: min.converged,
        examples: examples.len(),
    };
    let model = Model::from_parts(vocab, unflatten(&min.x, dim), hyperparams.clone())?;
    Ok((model, report))
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    keyword: KeywordConfig,
    hyperparams: Hyperparams,
    threshold: f64,
    vocab: Vec<String>,
    weights_negative: Vec<f64>,
    weights_neutral: Vec<f64>,
    weights_positive: Vec<f64>,
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        keyword: model.keyword.clone(),
        hyperparams: model.hyperparams.clone(),
        threshold: model.threshold,
        vocab: model.vocab.names().to_vec(),
        weights_negative: model.weights[0].clone(),
        weights_neutral: model.weights[1].clone(),
        weights_positive: model.weights[2].clone(),
    };
    let mut body = serde_json::to_string_pretty(&file)?;
    body.push('\n');
    atomic_write(path, body.as_bytes())
}

pub fn load_model(path: &Path) -> Result<Model> {
    let raw = std::fs::read_to_string(path).map_err(|_| Error::MissingInput(path.to_path_buf()))?;
    let value: serde_json::Value = serde_json::from_str(&raw).map_err(|e| Error::CorruptFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let version = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::CorruptFile {
            path: path.to_path_buf(),
            reason: "missing format_version".into(),
        })?;
    if version != MODEL_FORMAT_VERSION as u64 {
        return Err(Error::ModelVersion {
            found: version as u32,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| Error::CorruptFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let vocab = FeatureVocabulary::from_names(file.vocab)?;
    let mut model = Model::from_parts(
        vocab,
        [
            file.weights_negative,
            file.weights_neutral,
            file.weights_positive,
        ],
        file.hyperparams,
    )
    .map_err(|e| Error::CorruptFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    model.threshold = file.threshold;
    model.keyword = file.keyword;
    Ok(model)
}
