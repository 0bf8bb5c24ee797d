//! Training and prediction for one pair of dataset classes.
//!
//! Training pools and binarizes the images of the two classes, learns the
//! configured network, estimates its CPTs and compiles the circuit. The
//! circuit does not depend on the input, so its output distribution is read
//! once (exactly, or from simulated shots) and prediction looks up the two
//! basis states `|0 X*⟩` and `|1 X*⟩`.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bayesnet::{
    build_naive, build_spode, build_symmetric, build_tan, estimate_cpts, joint_probability, BayesNet,
    CmiWeighting, CptSet, NetworkKind, NodeId, SampleSet,
};
use crate::error::{invalid, QbcError, Result};
use crate::preprocess::{
    fit_binarizer_with, pool_features, BinarizerModel, FeatureSpec, ImageDataset, PooledVector, Raster,
    SIGMA_FLOOR, VALUE_RANGE,
};
use crate::qcircuit::{basis_index, compile_with, sample_shots, simulate, Circuit, CompileOptions};

/// Version of the model document written by [`TrainedQbc::save`].
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Centre block of the default 3×3 grid.
pub const DEFAULT_SUPERPARENT: usize = 5;
pub const DEFAULT_TAN_ROOT: usize = 1;
/// Blocks mirrored through the image centre in the default 3×3 grid.
pub const DEFAULT_SYMMETRIC_PAIRS: [(usize, usize); 4] = [(1, 9), (2, 8), (3, 7), (4, 6)];

/// Two dataset labels. The smaller label is encoded as bit 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[u8; 2]", into = "[u8; 2]")]
pub struct ClassPair {
    low: u8,
    high: u8,
}

impl ClassPair {
    pub fn new(a: u8, b: u8) -> Result<Self> {
        if a == b {
            return invalid(format!("class pair ({a}, {b}) needs two different classes"));
        }
        Ok(Self {
            low: a.min(b),
            high: a.max(b),
        })
    }

    /// `(label of bit 0, label of bit 1)`
    pub fn labels(self) -> (u8, u8) {
        (self.low, self.high)
    }

    pub fn bit(self, label: u8) -> Option<u8> {
        match label {
            l if l == self.low => Some(0),
            l if l == self.high => Some(1),
            _ => None,
        }
    }

    pub fn label(self, bit: u8) -> u8 {
        if bit == 0 {
            self.low
        } else {
            self.high
        }
    }
}

impl TryFrom<[u8; 2]> for ClassPair {
    type Error = QbcError;

    fn try_from(v: [u8; 2]) -> Result<Self> {
        ClassPair::new(v[0], v[1])
    }
}

impl From<ClassPair> for [u8; 2] {
    fn from(p: ClassPair) -> Self {
        [p.low, p.high]
    }
}

impl fmt::Display for ClassPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.low, self.high)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub network: NetworkKind,
    /// SPODE superparent feature (1-based).
    pub superparent: usize,
    /// TAN tree root feature (1-based).
    pub tan_root: usize,
    /// Feature pairs linked in the symmetric network (1-based).
    pub symmetric_pairs: Vec<(usize, usize)>,
    /// Laplace pseudocount for CPTs and CMI estimates.
    pub alpha: f64,
    pub cmi_weighting: CmiWeighting,
    pub feature_spec: FeatureSpec,
    /// Only density crossings inside this range become binarization
    /// thresholds; `None` uses every real crossing.
    pub crossing_range: Option<[f64; 2]>,
    /// Measurement shots used to estimate the circuit output; 0 reads the
    /// exact probabilities.
    pub shots: u64,
    pub seed: u64,
    pub elide_x_pairs: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            network: NetworkKind::Naive,
            superparent: DEFAULT_SUPERPARENT,
            tan_root: DEFAULT_TAN_ROOT,
            symmetric_pairs: DEFAULT_SYMMETRIC_PAIRS.to_vec(),
            alpha: 1.0,
            cmi_weighting: CmiWeighting::Joint,
            feature_spec: FeatureSpec::default(),
            crossing_range: Some(VALUE_RANGE),
            shots: 0,
            seed: 0,
            elide_x_pairs: false,
        }
    }
}

impl TrainConfig {
    pub fn with_network(network: NetworkKind) -> Self {
        Self {
            network,
            ..Self::default()
        }
    }

    /// Checks the settings used by the selected network kind.
    pub fn validate(&self) -> Result<()> {
        let n = self.feature_spec.n_features();
        if n == 0 {
            return invalid("feature spec has no blocks");
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return invalid(format!("alpha must be finite and >= 0, got {}", self.alpha));
        }
        if let Some([lo, hi]) = self.crossing_range {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return invalid(format!("crossing range [{lo}, {hi}] is empty or not finite"));
            }
        }
        match self.network {
            NetworkKind::Naive => Ok(()),
            NetworkKind::Spode => build_spode(n, NodeId(self.superparent)).map(drop),
            NetworkKind::Symmetric => build_symmetric(n, &self.pairs()).map(drop),
            NetworkKind::Tan if (1..=n).contains(&self.tan_root) => Ok(()),
            NetworkKind::Tan => invalid(format!("tan root {} is not a feature in 1..={n}", self.tan_root)),
        }
    }

    fn pairs(&self) -> Vec<(NodeId, NodeId)> {
        self.symmetric_pairs.iter().map(|&(a, b)| (NodeId(a), NodeId(b))).collect()
    }

    fn build_network(&self, samples: &SampleSet) -> Result<BayesNet> {
        let n = samples.n_features();
        match self.network {
            NetworkKind::Naive => build_naive(n),
            NetworkKind::Spode => build_spode(n, NodeId(self.superparent)),
            NetworkKind::Tan => build_tan(samples, NodeId(self.tan_root), self.alpha, self.cmi_weighting),
            NetworkKind::Symmetric => build_symmetric(n, &self.pairs()),
        }
    }
}

/// Misclassification losses: `get(i, j)` is the cost of deciding bit `i`
/// when the truth is bit `j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 2]; 2]", into = "[[f64; 2]; 2]")]
pub struct LossMatrix([[f64; 2]; 2]);

impl LossMatrix {
    pub fn new(values: [[f64; 2]; 2]) -> Result<Self> {
        if values.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return invalid("losses must be finite and nonnegative");
        }
        Ok(Self(values))
    }

    pub fn zero_one() -> Self {
        Self([[0.0, 1.0], [1.0, 0.0]])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[i][j]
    }

    /// Conditional risks `R(i) = Σ_j λ[i][j]·p_j` up to the shared factor
    /// `1/P(X)`.
    pub fn risks(&self, scores: (f64, f64)) -> [f64; 2] {
        let r = |i: usize| self.0[i][0] * scores.0 + self.0[i][1] * scores.1;
        [r(0), r(1)]
    }

    /// Risk-minimizing bit; ties go to bit 0.
    pub fn decide(&self, scores: (f64, f64)) -> u8 {
        let [r0, r1] = self.risks(scores);
        u8::from(r1 < r0)
    }
}

impl TryFrom<[[f64; 2]; 2]> for LossMatrix {
    type Error = QbcError;

    fn try_from(v: [[f64; 2]; 2]) -> Result<Self> {
        LossMatrix::new(v)
    }
}

impl From<LossMatrix> for [[f64; 2]; 2] {
    fn from(m: LossMatrix) -> Self {
        m.0
    }
}

/// Higher joint probability wins; ties go to bit 0.
fn argmax_bit(scores: (f64, f64)) -> u8 {
    u8::from(scores.1 > scores.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    /// Original dataset label.
    pub label: u8,
    pub bit: u8,
    /// `(P(y=0, X*), P(y=1, X*))`
    pub scores: (f64, f64),
}

/// Pooled feature vectors of a dataset, computed once and reused across
/// class pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledDataset {
    shape: (usize, usize),
    spec: FeatureSpec,
    labels: Vec<u8>,
    vectors: Vec<PooledVector>,
    digest: String,
}

impl PooledDataset {
    pub fn new(dataset: &ImageDataset, spec: &FeatureSpec) -> Result<Self> {
        Self::build(dataset, spec, None)
    }

    /// Pools only the images whose label is in `classes`. The digest still
    /// covers the whole dataset.
    pub fn with_classes(dataset: &ImageDataset, spec: &FeatureSpec, classes: &[u8]) -> Result<Self> {
        Self::build(dataset, spec, Some(classes))
    }

    fn build(dataset: &ImageDataset, spec: &FeatureSpec, classes: Option<&[u8]>) -> Result<Self> {
        spec.validate(dataset.rows(), dataset.cols())?;
        let mut labels = Vec::new();
        let mut vectors = Vec::new();
        for (label, image) in dataset.iter() {
            if classes.is_none_or(|c| c.contains(&label)) {
                labels.push(label);
                vectors.push(pool_features(&image, spec)?);
            }
        }
        Ok(Self {
            shape: (dataset.rows(), dataset.cols()),
            spec: spec.clone(),
            labels,
            vectors,
            digest: dataset.digest(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i]
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn feature_spec(&self) -> &FeatureSpec {
        &self.spec
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn contains_class(&self, class: u8) -> bool {
        self.labels.contains(&class)
    }
}

/// Training settings and provenance stored with a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelMetadata {
    pub network: NetworkKind,
    pub superparent: usize,
    pub tan_root: usize,
    pub symmetric_pairs: Vec<(usize, usize)>,
    pub alpha: f64,
    pub cmi_weighting: CmiWeighting,
    pub shots: u64,
    pub seed: u64,
    pub elide_x_pairs: bool,
    /// SHA-256 of the training dataset.
    pub dataset_digest: String,
    /// Training images of the bit-0 and bit-1 class.
    pub train_counts: [usize; 2],
}

impl ModelMetadata {
    pub fn from_config(config: &TrainConfig, dataset_digest: String, train_counts: [usize; 2]) -> Self {
        Self {
            network: config.network,
            superparent: config.superparent,
            tan_root: config.tan_root,
            symmetric_pairs: config.symmetric_pairs.clone(),
            alpha: config.alpha,
            cmi_weighting: config.cmi_weighting,
            shots: config.shots,
            seed: config.seed,
            elide_x_pairs: config.elide_x_pairs,
            dataset_digest,
            train_counts,
        }
    }
}

/// A trained quantum Bayes classifier for one class pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedQbc {
    class_pair: ClassPair,
    image_shape: (usize, usize),
    feature_spec: FeatureSpec,
    binarizer: BinarizerModel,
    net: BayesNet,
    cpts: CptSet,
    circuit: Circuit,
    metadata: ModelMetadata,
    /// Probability (or shot frequency) of every basis state.
    readout: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    format_version: u32,
    class_pair: ClassPair,
    image_shape: (usize, usize),
    feature_spec: FeatureSpec,
    binarizer: BinarizerModel,
    net: BayesNet,
    cpts: CptSet,
    circuit: Circuit,
    metadata: ModelMetadata,
}

fn inconsistent<T>(msg: impl Into<String>) -> Result<T> {
    Err(QbcError::Inconsistent(msg.into()))
}

fn read_out(circuit: &Circuit, shots: u64, seed: u64) -> Result<Vec<f64>> {
    let state = simulate(circuit)?;
    if shots == 0 {
        return Ok(state.probabilities());
    }
    let counts = sample_shots(&state, shots, seed)?;
    Ok(counts.iter().map(|&c| c as f64 / shots as f64).collect())
}

impl TrainedQbc {
    /// Assembles a model from trained parts, compiling the circuit.
    pub fn from_parts(
        class_pair: ClassPair,
        image_shape: (usize, usize),
        feature_spec: FeatureSpec,
        binarizer: BinarizerModel,
        net: BayesNet,
        cpts: CptSet,
        metadata: ModelMetadata,
    ) -> Result<Self> {
        feature_spec.validate(image_shape.0, image_shape.1)?;
        let circuit = compile_with(
            &net,
            &cpts,
            CompileOptions {
                elide_x_pairs: metadata.elide_x_pairs,
            },
        )?;
        Self::assemble(class_pair, image_shape, feature_spec, binarizer, net, cpts, circuit, metadata)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        class_pair: ClassPair,
        image_shape: (usize, usize),
        feature_spec: FeatureSpec,
        binarizer: BinarizerModel,
        net: BayesNet,
        cpts: CptSet,
        circuit: Circuit,
        metadata: ModelMetadata,
    ) -> Result<Self> {
        let n = net.n_features();
        if feature_spec.n_features() != n || binarizer.n_features() != n {
            return inconsistent(format!(
                "feature spec has {} blocks, binarizer {} features, network {n}",
                feature_spec.n_features(),
                binarizer.n_features()
            ));
        }
        if metadata.network != net.kind() {
            return inconsistent(format!(
                "metadata says {} but the network is {}",
                metadata.network,
                net.kind()
            ));
        }
        if metadata.alpha.to_bits() != cpts.alpha().to_bits() {
            return inconsistent("metadata alpha differs from the CPT alpha");
        }
        cpts.check_against(&net).map_err(|e| QbcError::Inconsistent(e.to_string()))?;
        let options = CompileOptions {
            elide_x_pairs: metadata.elide_x_pairs,
        };
        if compile_with(&net, &cpts, options)? != circuit {
            return inconsistent("stored circuit differs from the one compiled from the CPTs");
        }
        let readout = read_out(&circuit, metadata.shots, metadata.seed)?;
        Ok(Self {
            class_pair,
            image_shape,
            feature_spec,
            binarizer,
            net,
            cpts,
            circuit,
            metadata,
            readout,
        })
    }

    pub fn class_pair(&self) -> ClassPair {
        self.class_pair
    }

    pub fn image_shape(&self) -> (usize, usize) {
        self.image_shape
    }

    pub fn feature_spec(&self) -> &FeatureSpec {
        &self.feature_spec
    }

    pub fn binarizer(&self) -> &BinarizerModel {
        &self.binarizer
    }

    pub fn net(&self) -> &BayesNet {
        &self.net
    }

    pub fn cpts(&self) -> &CptSet {
        &self.cpts
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn metadata(&self) -> &ModelMetadata {
        &self.metadata
    }

    /// The training configuration this model was built with.
    pub fn config(&self) -> TrainConfig {
        let m = &self.metadata;
        TrainConfig {
            network: m.network,
            superparent: m.superparent,
            tan_root: m.tan_root,
            symmetric_pairs: m.symmetric_pairs.clone(),
            alpha: m.alpha,
            cmi_weighting: m.cmi_weighting,
            feature_spec: self.feature_spec.clone(),
            crossing_range: self.binarizer.crossing_range(),
            shots: m.shots,
            seed: m.seed,
            elide_x_pairs: m.elide_x_pairs,
        }
    }

    /// Pools and binarizes an image into the feature assignment `X*`.
    pub fn features<R: Raster + ?Sized>(&self, image: &R) -> Result<Vec<u8>> {
        if (image.rows(), image.cols()) != self.image_shape {
            return invalid(format!(
                "image is {}x{}, model expects {}x{}",
                image.rows(),
                image.cols(),
                self.image_shape.0,
                self.image_shape.1
            ));
        }
        self.binarizer.binarize_all(&pool_features(image, &self.feature_spec)?)
    }

    fn check_bits(&self, x: &[u8]) -> Result<()> {
        if x.len() != self.net.n_features() {
            return invalid(format!(
                "{} feature bits for a {}-feature model",
                x.len(),
                self.net.n_features()
            ));
        }
        if x.iter().any(|&b| b > 1) {
            return invalid("feature bits must be 0 or 1");
        }
        Ok(())
    }

    /// `(P(y=0, X), P(y=1, X))` read from the circuit output.
    pub fn circuit_scores(&self, x: &[u8]) -> Result<(f64, f64)> {
        self.check_bits(x)?;
        Ok((self.readout[basis_index(0, x)], self.readout[basis_index(1, x)]))
    }

    /// The same pair computed classically by the chain rule.
    pub fn classical_scores(&self, x: &[u8]) -> Result<(f64, f64)> {
        Ok((
            joint_probability(&self.net, &self.cpts, 0, x)?,
            joint_probability(&self.net, &self.cpts, 1, x)?,
        ))
    }

    fn decided(&self, scores: (f64, f64), bit: u8) -> Prediction {
        Prediction {
            label: self.class_pair.label(bit),
            bit,
            scores,
        }
    }

    pub fn predict_bits(&self, x: &[u8]) -> Result<Prediction> {
        let scores = self.circuit_scores(x)?;
        Ok(self.decided(scores, argmax_bit(scores)))
    }

    pub fn classical_predict_bits(&self, x: &[u8]) -> Result<Prediction> {
        let scores = self.classical_scores(x)?;
        Ok(self.decided(scores, argmax_bit(scores)))
    }

    /// Risk-minimizing label for a feature assignment.
    pub fn predict_bits_with_loss(&self, x: &[u8], loss: &LossMatrix) -> Result<u8> {
        Ok(self.class_pair.label(loss.decide(self.circuit_scores(x)?)))
    }

    pub fn predict_pooled(&self, pooled: &[f64]) -> Result<Prediction> {
        self.predict_bits(&self.binarizer.binarize_all(pooled)?)
    }

    pub fn predict<R: Raster + ?Sized>(&self, image: &R) -> Result<Prediction> {
        self.predict_bits(&self.features(image)?)
    }

    pub fn classical_predict<R: Raster + ?Sized>(&self, image: &R) -> Result<Prediction> {
        self.classical_predict_bits(&self.features(image)?)
    }

    pub fn predict_with_loss<R: Raster + ?Sized>(&self, image: &R, loss: &LossMatrix) -> Result<u8> {
        self.predict_bits_with_loss(&self.features(image)?, loss)
    }

    pub fn to_json(&self) -> String {
        let doc = ModelDoc {
            format_version: MODEL_FORMAT_VERSION,
            class_pair: self.class_pair,
            image_shape: self.image_shape,
            feature_spec: self.feature_spec.clone(),
            binarizer: self.binarizer.clone(),
            net: self.net.clone(),
            cpts: self.cpts.clone(),
            circuit: self.circuit.clone(),
            metadata: self.metadata.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("model document serializes")
    }

    /// Parses a model document and re-checks that its parts agree.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc =
            serde_json::from_str(text).map_err(|e| QbcError::Format(format!("model document: {e}")))?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(QbcError::Format(format!(
                "unsupported model format_version {}",
                doc.format_version
            )));
        }
        doc.feature_spec
            .validate(doc.image_shape.0, doc.image_shape.1)
            .map_err(|e| QbcError::Inconsistent(e.to_string()))?;
        Self::assemble(
            doc.class_pair,
            doc.image_shape,
            doc.feature_spec,
            doc.binarizer,
            doc.net,
            doc.cpts,
            doc.circuit,
            doc.metadata,
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Trains a classifier for `class_pair` on the images of those two classes.
pub fn train(dataset: &ImageDataset, class_pair: ClassPair, config: &TrainConfig) -> Result<TrainedQbc> {
    let (a, b) = class_pair.labels();
    for class in [a, b] {
        if !dataset.contains_class(class) {
            return invalid(format!("class {class} is absent from the training data"));
        }
    }
    config.validate()?;
    let pooled = PooledDataset::with_classes(dataset, &config.feature_spec, &[a, b])?;
    train_pooled(&pooled, class_pair, config)
}

/// [`train`] on features pooled in advance with `config.feature_spec`.
pub fn train_pooled(data: &PooledDataset, class_pair: ClassPair, config: &TrainConfig) -> Result<TrainedQbc> {
    config.validate()?;
    if data.feature_spec() != &config.feature_spec {
        return invalid("dataset was pooled with a different feature spec");
    }
    let (a, b) = class_pair.labels();
    let mut by_class: [Vec<PooledVector>; 2] = [Vec::new(), Vec::new()];
    for (i, &label) in data.labels().iter().enumerate() {
        if let Some(bit) = class_pair.bit(label) {
            by_class[bit as usize].push(data.vector(i).to_vec());
        }
    }
    for (bit, class) in [a, b].into_iter().enumerate() {
        if by_class[bit].is_empty() {
            return invalid(format!("class {class} is absent from the training data"));
        }
    }

    let binarizer = fit_binarizer_with(&by_class[0], &by_class[1], SIGMA_FLOOR, config.crossing_range)?;
    let mut samples = SampleSet::new(binarizer.n_features());
    for (bit, vectors) in by_class.iter().enumerate() {
        for v in vectors {
            samples.push(bit as u8, &binarizer.binarize_all(v)?)?;
        }
    }
    let net = config.build_network(&samples)?;
    let cpts = estimate_cpts(&net, &samples, config.alpha)?;
    if cpts.is_degenerate() {
        log::warn!("pair {class_pair}: some probabilities are exactly 0 or 1");
    }
    let metadata = ModelMetadata::from_config(
        config,
        data.digest().to_string(),
        [by_class[0].len(), by_class[1].len()],
    );
    let model = TrainedQbc::from_parts(
        class_pair,
        data.shape(),
        config.feature_spec.clone(),
        binarizer,
        net,
        cpts,
        metadata,
    )?;
    log::debug!(
        "pair {class_pair}: {} network, {} rotations, {} X gates",
        config.network,
        model.circuit.rotation_count(),
        model.circuit.x_count()
    );
    Ok(model)
}
