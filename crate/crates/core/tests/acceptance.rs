//! Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and exits
//! non-zero if any criterion fails.
//!
//! The two dataset runs need the data on disk:
//! `OPLT_DATA_DIR/aloi/{train,test}.txt` and `OPLT_DATA_DIR/wiki10/{train,test}.txt`.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use oplt::data::Dataset;
use oplt::metrics::{entropy_reduction, precision_at_k, psp_at_k, PropensityModel};
use oplt::model_io::{from_bytes, to_bytes};
use oplt::predict::{
    path_estimation_bound, path_marginal, predict_marginals_bruteforce, topk_bruteforce,
};
use oplt::synth::{generate, SyntheticConfig};
use oplt::{
    check_properness, predict_topk, AuxRetention, Example, LabelTree, LearnerConfig,
    NodeClassifier, NodeId, OpltModel, PolicyConfig, PolicyKind, Prediction, Prefixes,
    PropernessReport, SparseVector,
};

type Criterion = (&'static str, fn() -> Verdict);

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("1 properness at every prefix", properness),
        ("2 update count and policy visits", efficiency),
        ("3 top-k search vs exhaustive scoring", ucs_oracle),
        ("4 node assignment vs indicator oracle", assign_oracle),
        ("5 path estimation bound", estimation_bound),
        ("6 ALOI accuracy", aloi),
        ("7 Wiki10 precision", wiki10),
        ("8 depth shrinks as alpha rises", depth_vs_alpha),
        ("9 model round trip and resumed training", serialization),
        ("10 entropy reduction and PSP formulas", formulas),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let verdict = f();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match verdict {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Verdict::Skip(d) => ("SKIP", d),
        };
        println!("criterion {name}: {tag} ({detail}) [{secs:.1}s]");
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

// streams for criteria 1 and 2

fn random_stream(seed: u64) -> Vec<Example> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let num_labels = rng.gen_range(2..=30);
    generate(&SyntheticConfig {
        num_examples: rng.gen_range(50..=200),
        num_labels,
        num_features: rng.gen_range(5..=50),
        min_labels: 1,
        max_labels: 4.min(num_labels as usize),
        prototype_size: rng.gen_range(1..=5),
        noise_features: rng.gen_range(0..=3),
        skew: rng.gen_range(0.0..1.5),
        seed,
    })
    .expect("valid synthetic config")
}

fn properness_grid() -> &'static [(String, PropernessReport)] {
    use std::sync::OnceLock;
    static RUNS: OnceLock<Vec<(String, PropernessReport)>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let threads = std::thread::available_parallelism().map_or(1, |n| n.get()) as u64;
        std::thread::scope(|scope| {
            let workers: Vec<_> = (0..threads)
                .map(|w| {
                    scope.spawn(move || {
                        (w..100)
                            .step_by(threads as usize)
                            .flat_map(runs_for_seed)
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            let mut runs: Vec<_> = workers
                .into_iter()
                .flat_map(|h| h.join().unwrap())
                .collect();
            runs.sort_by_key(|(seed, tag, _)| (*seed, tag.clone()));
            runs.into_iter().map(|(_, tag, r)| (tag, r)).collect()
        })
    })
}

fn runs_for_seed(seed: u64) -> Vec<(u64, String, PropernessReport)> {
    let stream = random_stream(seed);
    let mut runs = Vec::new();
    for kind in [PolicyKind::BestGreedy, PolicyKind::Random] {
        for alpha in [0.0, 0.5, 0.75, 1.0] {
            // b_max below b is not a valid configuration
            for (b, bmax) in [(2, 2), (2, 5), (3, 5)] {
                for aux in [AuxRetention::All, AuxRetention::Prune] {
                    let policy = PolicyConfig {
                        kind,
                        alpha,
                        arity: b,
                        preleaf_arity: bmax,
                        seed,
                    };
                    let mut m = OpltModel::init(LearnerConfig::default(), policy, aux).unwrap();
                    let r = check_properness(&mut m, &stream, &Prefixes::All).unwrap();
                    let tag =
                        format!("seed {seed} {kind:?} alpha {alpha} b {b} b_max {bmax} {aux:?}");
                    runs.push((seed, tag, r));
                }
            }
        }
    }
    runs
}

fn properness() -> Verdict {
    let runs = properness_grid();
    let prefixes: usize = runs.iter().map(|(_, r)| r.prefixes_checked).sum();
    match runs.iter().find(|(_, r)| r.mismatch.is_some()) {
        Some((tag, r)) => Verdict::Fail(format!("{tag}: {}", r.mismatch.unwrap())),
        None => Verdict::Pass(format!("{} runs, {prefixes} prefixes compared", runs.len())),
    }
}

fn efficiency() -> Verdict {
    let runs = properness_grid();
    let worst = runs
        .iter()
        .map(|(_, r)| r.update_ratio())
        .fold(0.0f64, f64::max);
    if let Some((tag, r)) = runs.iter().find(|(_, r)| !r.efficient()) {
        return Verdict::Fail(format!(
            "{tag}: {} online updates vs {} replayed",
            r.online_updates.total(),
            r.replay_updates
        ));
    }
    if let Some((tag, r)) = runs.iter().find(|(_, r)| r.visits_violation.is_some()) {
        let (i, v, d) = r.visits_violation.unwrap();
        return Verdict::Fail(format!("{tag}: example {i} visited {v} nodes, depth {d}"));
    }
    Verdict::Pass(format!(
        "{} runs, worst update ratio {worst:.4}",
        runs.len()
    ))
}

// random trees for criteria 3 to 5

fn random_tree(rng: &mut ChaCha8Rng, max_labels: u32) -> LabelTree {
    let m = rng.gen_range(1..=max_labels);
    let mut labels: Vec<u32> = (0..m).map(|i| i * 3 + 1).collect();
    labels.shuffle(rng);
    let mut tree = LabelTree::new();
    if m == 1 && rng.gen_bool(0.5) {
        tree.set_label(tree.root(), labels[0]).unwrap();
        return tree;
    }
    let root = tree.root();
    grow(&mut tree, root, &labels, rng);
    tree
}

fn grow(tree: &mut LabelTree, node: NodeId, labels: &[u32], rng: &mut ChaCha8Rng) {
    if labels.len() <= rng.gen_range(1..=6) {
        for &l in labels {
            tree.add_leaf(node, l).unwrap();
        }
        return;
    }
    // some labels hang directly off the node, the rest go to 1-4 subtrees
    let direct = rng.gen_range(0..=labels.len().min(2));
    for &l in &labels[..direct] {
        tree.add_leaf(node, l).unwrap();
    }
    let rest = &labels[direct..];
    if rest.is_empty() {
        return;
    }
    let parts = rng.gen_range(1..=4.min(rest.len()));
    let mut cuts: Vec<usize> = (1..rest.len()).collect();
    cuts.shuffle(rng);
    let mut cuts: Vec<usize> = cuts.into_iter().take(parts - 1).collect();
    cuts.sort_unstable();
    let mut start = 0;
    for end in cuts.into_iter().chain([rest.len()]) {
        let child = tree.add_child(node);
        grow(tree, child, &rest[start..end], rng);
        start = end;
    }
}

/// Classifiers drawn from a handful of short update histories, so many nodes
/// share a probability exactly and scores tie.
fn random_classifiers(
    tree: &LabelTree,
    x: &SparseVector,
    cfg: &LearnerConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<NodeClassifier> {
    (0..tree.len())
        .map(|_| {
            let mut c = NodeClassifier::new();
            for _ in 0..rng.gen_range(0..3) {
                c.update(x, rng.gen_bool(0.5), cfg);
            }
            if rng.gen_bool(0.3) {
                c = c.try_inverse().unwrap();
            }
            c
        })
        .collect()
}

fn ucs_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = LearnerConfig::default();
    let x = SparseVector::from_pairs(vec![(0, 1.0), (5, 0.5)]).unwrap();
    let mut ties = 0;
    for i in 0..1000 {
        let tree = random_tree(&mut rng, 200);
        let h = random_classifiers(&tree, &x, &cfg, &mut rng);
        let k = rng.gen_range(1..=tree.num_labels() + 2);
        let got = predict_topk(&tree, &h, &cfg, &x, k);
        let all = predict_marginals_bruteforce(&tree, &h, &cfg, &x);
        let want = topk_bruteforce(&all, k);
        if got != want {
            return Verdict::Fail(format!(
                "instance {i}, k {k}: {:?} vs {:?}",
                labels(&got),
                labels(&want)
            ));
        }
        let distinct: BTreeSet<u64> = all.values().map(|v| v.to_bits()).collect();
        ties += usize::from(distinct.len() < all.len());
    }
    Verdict::Pass(format!("1000 instances, {ties} with tied scores"))
}

fn labels(p: &Prediction) -> Vec<u32> {
    p.labels().collect()
}

fn assign_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for i in 0..1000 {
        let tree = random_tree(&mut rng, 200);
        let all = tree.labels();
        let n = rng.gen_range(0..=all.len().min(6));
        let chosen: Vec<u32> = all.choose_multiple(&mut rng, n).copied().collect();
        let (p, neg) = tree.assign_to_nodes(&chosen).unwrap();

        // z_v = 1 iff the subtree of v holds a relevant label
        let z: Vec<bool> = tree
            .node_ids()
            .map(|v| subtree_labels(&tree, v).iter().any(|l| chosen.contains(l)))
            .collect();
        let want_p: BTreeSet<NodeId> = tree.node_ids().filter(|v| z[v.index()]).collect();
        let want_n: BTreeSet<NodeId> = tree
            .node_ids()
            .filter(|&v| {
                !z[v.index()]
                    && match tree.parent(v) {
                        Some(pa) => z[pa.index()],
                        None => true,
                    }
            })
            .collect();
        let got_p: BTreeSet<NodeId> = p.iter().copied().collect();
        let got_n: BTreeSet<NodeId> = neg.iter().copied().collect();
        if got_p != want_p || got_n != want_n || got_p.len() != p.len() || got_n.len() != neg.len()
        {
            return Verdict::Fail(format!("instance {i}, labels {chosen:?}"));
        }
    }
    Verdict::Pass("1000 (tree, label set) pairs".into())
}

fn subtree_labels(tree: &LabelTree, v: NodeId) -> Vec<u32> {
    let mut out = Vec::new();
    let mut stack = vec![v];
    while let Some(u) = stack.pop() {
        out.extend(tree.label(u));
        stack.extend_from_slice(tree.children(u));
    }
    out
}

fn estimation_bound() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_gap = f64::INFINITY;
    for i in 0..1000 {
        let tree = random_tree(&mut rng, 200);
        let eta: Vec<f64> = (0..tree.len()).map(|_| rng.gen::<f64>()).collect();
        let scale = rng.gen_range(0.0..0.5);
        let eta_hat: Vec<f64> = eta
            .iter()
            .map(|&e| (e + rng.gen_range(-scale..=scale)).clamp(0.0, 1.0))
            .collect();
        for l in tree.labels() {
            let leaf = tree.leaf_of(l).unwrap();
            let lhs =
                (path_marginal(&tree, leaf, &eta) - path_marginal(&tree, leaf, &eta_hat)).abs();
            let rhs = path_estimation_bound(&tree, leaf, &eta, &eta_hat);
            if lhs > rhs + 1e-12 {
                return Verdict::Fail(format!("instance {i}, label {l}: {lhs} > {rhs}"));
            }
            worst_gap = worst_gap.min(rhs - lhs);
        }
    }
    Verdict::Pass(format!("1000 instances, tightest slack {worst_gap:.3e}"))
}

// dataset runs

fn data_dir(name: &str) -> Option<PathBuf> {
    let dir = PathBuf::from(std::env::var_os("OPLT_DATA_DIR")?).join(name);
    (dir.join("train.txt").is_file() && dir.join("test.txt").is_file()).then_some(dir)
}

fn cpu_seconds() -> f64 {
    // SAFETY: getrusage writes into the zeroed struct only.
    let u = unsafe {
        let mut u: libc::rusage = std::mem::zeroed();
        libc::getrusage(libc::RUSAGE_SELF, &mut u);
        u
    };
    let s = |t: libc::timeval| t.tv_sec as f64 + t.tv_usec as f64 * 1e-6;
    s(u.ru_utime) + s(u.ru_stime)
}

fn aloi() -> Verdict {
    let Some(dir) = data_dir("aloi") else {
        return Verdict::Skip("OPLT_DATA_DIR/aloi not present".into());
    };
    let train = Dataset::load(dir.join("train.txt")).unwrap().examples;
    let test = Dataset::load(dir.join("test.txt")).unwrap().examples;
    let mut best = 0.0f64;
    let mut worst_cpu = 0.0f64;
    for seed in 0..5 {
        let cpu = cpu_seconds();
        let mut data = train.clone();
        oplt::data::shuffle_examples(&mut data, seed);
        let policy = PolicyConfig {
            preleaf_arity: 10,
            seed,
            ..PolicyConfig::default()
        };
        let mut m = OpltModel::init(LearnerConfig::default(), policy, AuxRetention::All).unwrap();
        m.train_stream(&data, 3).unwrap();
        worst_cpu = worst_cpu.max(cpu_seconds() - cpu);
        let hits = test
            .iter()
            .filter(|e| m.predict_class(&e.features) == e.labels().first().copied())
            .count();
        best = best.max(100.0 * hits as f64 / test.len() as f64);
    }
    check(
        (best - 67.26).abs() <= 3.0 && worst_cpu < 600.0,
        format!("best accuracy {best:.2}%, slowest training {worst_cpu:.1}s cpu"),
    )
}

fn wiki10() -> Verdict {
    let Some(dir) = data_dir("wiki10") else {
        return Verdict::Skip("OPLT_DATA_DIR/wiki10 not present; waived".into());
    };
    let train = Dataset::load(dir.join("train.txt")).unwrap().examples;
    let test = Dataset::load(dir.join("test.txt")).unwrap().examples;
    let cpu = cpu_seconds();
    let mut m = OpltModel::init(
        LearnerConfig::default(),
        PolicyConfig::default(),
        AuxRetention::All,
    )
    .unwrap();
    m.train_stream(&train, 1).unwrap();
    let cpu = cpu_seconds() - cpu;
    let mut p = [0.0; 3];
    for e in &test {
        let top = m.predict_topk(&e.features, 5);
        for (i, k) in [1, 3, 5].into_iter().enumerate() {
            p[i] += precision_at_k(&top, e.labels(), k).unwrap();
        }
    }
    let p = p.map(|v| 100.0 * v / test.len() as f64);
    check(
        (p[0] - 84.47).abs() <= 2.0
            && (p[1] - 73.73).abs() <= 2.5
            && (p[2] - 64.39).abs() <= 2.5
            && cpu <= 7200.0,
        format!(
            "P@1 {:.2} P@3 {:.2} P@5 {:.2}, {cpu:.0}s cpu",
            p[0], p[1], p[2]
        ),
    )
}

fn depth_vs_alpha() -> Verdict {
    let data = generate(&SyntheticConfig {
        num_examples: 10_000,
        num_labels: 1000,
        num_features: 2000,
        prototype_size: 6,
        seed: 8,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let mut depths = Vec::new();
    for alpha in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let policy = PolicyConfig {
            alpha,
            preleaf_arity: 10,
            ..PolicyConfig::default()
        };
        let mut m = OpltModel::init(LearnerConfig::default(), policy, AuxRetention::Prune).unwrap();
        m.train_stream(&data, 1).unwrap();
        depths.push(m.tree().depth());
    }
    let monotone = depths.windows(2).all(|w| w[1] <= w[0] + 1);
    check(
        monotone && depths[4] < depths[0],
        format!("depths for alpha 0..1 step 0.25: {depths:?}"),
    )
}

fn serialization() -> Verdict {
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = random_stream(seed + 1000);
        let policy = PolicyConfig {
            kind: if seed % 2 == 0 {
                PolicyKind::BestGreedy
            } else {
                PolicyKind::Random
            },
            alpha: rng.gen_range(0.0..=1.0),
            arity: rng.gen_range(2..=3),
            preleaf_arity: rng.gen_range(3..=8),
            seed,
        };
        let aux = if seed % 3 == 0 {
            AuxRetention::Prune
        } else {
            AuxRetention::All
        };
        let mut m = OpltModel::init(LearnerConfig::default(), policy, aux).unwrap();
        let cut = rng.gen_range(0..=data.len());
        for ex in &data[..cut] {
            m.train_example(ex).unwrap();
        }
        let bytes = to_bytes(&m);
        let mut loaded = match from_bytes(&bytes) {
            Ok(l) => l,
            Err(e) => return Verdict::Fail(format!("model {seed}: {e}")),
        };
        if to_bytes(&loaded) != bytes {
            return Verdict::Fail(format!("model {seed}: re-encoding differs"));
        }
        for ex in &data[cut..] {
            m.train_example(ex).unwrap();
            loaded.train_example(ex).unwrap();
        }
        if to_bytes(&loaded) != to_bytes(&m) {
            return Verdict::Fail(format!("model {seed}: resumed training diverged"));
        }
    }
    Verdict::Pass("100 models".into())
}

fn formulas() -> Verdict {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    let mut ok = true;
    ok &= entropy_reduction(0.5, 0.125) == Some(2.0);
    ok &= entropy_reduction(0.3, 0.3) == Some(0.0);
    ok &= entropy_reduction(0.0, 0.2).is_none();
    ok &= close(
        entropy_reduction(0.9, 0.01).unwrap(),
        0.9f64.log2() - 0.01f64.log2(),
    );

    // Wiki10-like constants: N = 14146, A = 0.55, B = 1.5
    let prop = PropensityModel::new(0.55, 1.5, 14146, [(1, 3), (2, 900)].into_iter().collect());
    let c = (14146f64.ln() - 1.0) * 2.5f64.powf(0.55);
    ok &= close(prop.c, c);
    let q1 = 1.0 + c * 4.5f64.powf(-0.55);
    let q2 = 1.0 + c * 901.5f64.powf(-0.55);
    ok &= close(prop.inverse_propensity(1), q1);
    ok &= close(prop.inverse_propensity(2), q2);
    let pred = Prediction {
        items: vec![(2, 0.9), (7, 0.5), (1, 0.4)],
    };
    ok &= close(psp_at_k(&pred, &[1, 2], 3, &prop).unwrap(), (q1 + q2) / 3.0);
    ok &= close(psp_at_k(&pred, &[1, 2], 1, &prop).unwrap(), q2);
    ok &= close(precision_at_k(&pred, &[1, 2], 3).unwrap(), 2.0 / 3.0);
    check(ok, "scalar checks at 1e-12".into())
}
