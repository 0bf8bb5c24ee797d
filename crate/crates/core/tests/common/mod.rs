//! Random model builders and dataset lookup shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use qbc::bayesnet::{build_naive, build_spode, build_symmetric, build_tan_from_tree, BayesNet, CptSet, NetworkKind, NodeId};
use qbc::classifier::{ClassPair, ModelMetadata, TrainConfig, TrainedQbc};
use qbc::preprocess::{load_split, BinarizerModel, Block, FeatureGaussians, FeatureSpec, ImageDataset, Pooling, Split};
use rand::seq::SliceRandom;
use rand::Rng;

/// A random network of the given family over `n` features.
pub fn random_net<R: Rng>(rng: &mut R, kind: NetworkKind, n: usize) -> BayesNet {
    match kind {
        NetworkKind::Naive => build_naive(n).unwrap(),
        NetworkKind::Spode => build_spode(n, NodeId(rng.random_range(1..=n))).unwrap(),
        NetworkKind::Tan => {
            let mut nodes: Vec<usize> = (1..=n).collect();
            nodes.shuffle(rng);
            let tree: Vec<_> = (1..n)
                .map(|k| (NodeId(nodes[k]), NodeId(nodes[rng.random_range(0..k)])))
                .collect();
            build_tan_from_tree(n, &tree, NodeId(rng.random_range(1..=n))).unwrap()
        }
        NetworkKind::Symmetric => {
            let mut nodes: Vec<usize> = (1..=n).collect();
            nodes.shuffle(rng);
            let k = rng.random_range(0..=n / 2);
            let pairs: Vec<_> = (0..k).map(|p| (NodeId(nodes[2 * p]), NodeId(nodes[2 * p + 1]))).collect();
            build_symmetric(n, &pairs).unwrap()
        }
    }
}

/// CPT entries drawn uniformly from `(lo, hi)`.
pub fn random_cpts<R: Rng>(rng: &mut R, net: &BayesNet, lo: f64, hi: f64) -> CptSet {
    let mut draw = || lo + (hi - lo) * rng.random::<f64>();
    let prior0 = draw();
    let tables = net
        .features()
        .map(|f| (0..1usize << net.parents(f).len()).map(|_| draw()).collect())
        .collect();
    CptSet::new(prior0, tables, 1.0).unwrap()
}

/// A complete synthetic classifier for 28×28 images: random blocks, random
/// Gaussian binarizer, random network and CPTs.
pub fn random_model<R: Rng>(rng: &mut R, kind: NetworkKind, n: usize) -> TrainedQbc {
    let blocks = (0..n)
        .map(|_| {
            let (h, w) = (rng.random_range(1..=8), rng.random_range(1..=8));
            Block::new(rng.random_range(0..=28 - h), rng.random_range(0..=28 - w), h, w)
        })
        .collect();
    let spec = FeatureSpec {
        blocks,
        pooling: Pooling::Average,
    };
    let features = (0..n)
        .map(|_| {
            let sigma = |rng: &mut R| 0.01 + 0.3 * rng.random::<f64>();
            let (mu0, s0, mu1, s1) = (rng.random::<f64>(), sigma(rng), rng.random::<f64>(), sigma(rng));
            FeatureGaussians::new(mu0, s0, mu1, s1).unwrap()
        })
        .collect();
    let binarizer = BinarizerModel::new(1e-3, None, features).unwrap();
    let net = random_net(rng, kind, n);
    let cpts = random_cpts(rng, &net, 0.01, 0.99);
    let config = TrainConfig {
        feature_spec: spec.clone(),
        ..TrainConfig::with_network(kind)
    };
    let metadata = ModelMetadata::from_config(&config, "synthetic".into(), [0, 0]);
    let a = rng.random_range(0..10u8);
    let b = (a + rng.random_range(1..10u8)) % 10;
    TrainedQbc::from_parts(ClassPair::new(a, b).unwrap(), (28, 28), spec, binarizer, net, cpts, metadata).unwrap()
}

pub fn random_image<R: Rng>(rng: &mut R) -> ImageDataset {
    let pixels: Vec<u8> = (0..28 * 28).map(|_| rng.random()).collect();
    ImageDataset::new(28, 28, vec![0], pixels).unwrap()
}

/// `$QBC_DATA_DIR`, or `data/` at the workspace root.
pub fn data_root() -> PathBuf {
    std::env::var_os("QBC_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

/// Train and test splits of `name` (`mnist` or `fashion-mnist`).
pub fn load_dataset(name: &str) -> Result<(ImageDataset, ImageDataset), String> {
    let dir = data_root().join(name);
    let load = |split| {
        load_split(&dir, split).map_err(|e| {
            format!("{name} not available under {} ({e}); run scripts/fetch_data.sh", dir.display())
        })
    };
    Ok((load(Split::Train)?, load(Split::Test)?))
}
