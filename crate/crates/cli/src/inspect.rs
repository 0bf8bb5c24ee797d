use std::fmt::Write;

use qbc::classifier::TrainedQbc;
use qbc::preprocess::Intersections;
use qbc::qcircuit::angle_from_probability;

use crate::Failure;

fn thresholds(t: &Intersections) -> String {
    match *t {
        Intersections::Single(a) => format!("threshold {a}"),
        Intersections::Pair(a, b) => format!("thresholds {a} {b}"),
        Intersections::Degenerate(m) => format!("midpoint {m}"),
    }
}

/// Human-readable dump of a model. Probabilities and angles are printed in
/// shortest round-trip form so they can be checked against each other.
pub fn render(model: &TrainedQbc) -> Result<String, Failure> {
    let mut out = String::new();
    let w = &mut out;
    let (a, b) = model.class_pair().labels();
    let net = model.net();
    let cpts = model.cpts();
    let meta = model.metadata();
    let bin = model.binarizer();

    let _ = writeln!(w, "classes {a},{b} (y=0 is class {a}, y=1 is class {b})");
    let _ = writeln!(w, "network {}, {} features", net.kind(), net.n_features());
    let edges: Vec<String> = net.edges().iter().map(|(p, c)| format!("{p}->{c}")).collect();
    let _ = writeln!(w, "edges {}", edges.join(" "));
    let _ = writeln!(
        w,
        "training alpha {}, shots {}, seed {}, images {} + {}, dataset sha256 {}",
        meta.alpha, meta.shots, meta.seed, meta.train_counts[0], meta.train_counts[1], meta.dataset_digest
    );
    let c = model.circuit();
    let _ = writeln!(
        w,
        "circuit {} qubits, {} rotations, {} X gates",
        c.n_qubits(),
        c.rotation_count(),
        c.x_count()
    );

    let range = match bin.crossing_range() {
        Some([lo, hi]) => format!("[{lo}, {hi}]"),
        None => "all".to_string(),
    };
    let _ = writeln!(w, "\nbinarizer (sigma floor {}, crossing range {range})", bin.sigma_floor());
    for (i, f) in bin.features().iter().enumerate() {
        let _ = writeln!(
            w,
            "  x{}: class {a} N({}, {}²), class {b} N({}, {}²), {}",
            i + 1,
            f.mu0,
            f.sigma0,
            f.mu1,
            f.sigma1,
            thresholds(&f.thresholds)
        );
    }

    let _ = writeln!(w, "\nprobability tables (theta = 2·arccos √p)");
    let p = cpts.prior0();
    let _ = writeln!(w, "y: P(y=0) = {p} theta = {}", angle_from_probability(p)?);
    for node in net.encode_order() {
        let parents = net.parents(*node);
        let names: Vec<String> = parents.iter().map(|p| p.to_string()).collect();
        let _ = writeln!(w, "{node} | {}:", names.join(","));
        let k = parents.len();
        for (assignment, &p) in cpts.table(*node).iter().enumerate() {
            let given: Vec<String> = parents
                .iter()
                .enumerate()
                .map(|(m, q)| format!("{q}={}", (assignment >> (k - 1 - m)) & 1))
                .collect();
            let _ = writeln!(
                w,
                "  {}: P({node}=0) = {p} theta = {}",
                given.join(","),
                angle_from_probability(p)?
            );
        }
    }
    Ok(out)
}
