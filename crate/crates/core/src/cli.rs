//! Command-line front end: `train`, `test`, `progressive` and
//! `properness-check`.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::data::{shuffle_examples, Dataset, Example};
use crate::error::{Error, Result};
use crate::iplt::{build_balanced_tree, iplt_train};
use crate::kmeans::{build_kmeans_tree, label_representations};
use crate::learner::LearnerConfig;
use crate::metrics::{
    checkpoint_grid, evaluate, progressive_validate, write_curve_csv, PropensityModel,
};
use crate::model_io::{load_model, save_model};
use crate::oplt::{warm_start, AuxRetention, OpltModel, PolicyConfig, PolicyKind};
use crate::properness::{check_properness, Prefixes};
use crate::synth::{generate, SyntheticConfig};

#[derive(Debug, Parser)]
#[command(
    name = "oplt",
    version,
    about = "Probabilistic label trees trained online"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write it to a file.
    Train(TrainArgs),
    /// Evaluate a saved model with precision@k (and PSP@k).
    Test(TestArgs),
    /// Test-then-train accuracy curve over a multi-class stream.
    Progressive(ProgressiveArgs),
    /// Check that online training matches incremental training on the emitted tree.
    PropernessCheck(PropernessArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Fixed tree built offline, then incremental training
    Iplt,
    /// Tree grown online
    Oplt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TreeKind {
    Balanced,
    Kmeans,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    BestGreedy,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AuxArg {
    /// Keep auxiliary classifiers everywhere
    All,
    /// Drop them where the policy can no longer extend the tree
    Prune,
}

/// Learner, policy and tree options shared by the training commands.
#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Tree-extension policy
    #[arg(long, value_enum, default_value_t = PolicyArg::BestGreedy)]
    pub policy: PolicyArg,
    /// Fit/balance trade-off of the best-greedy policy, in [0, 1]
    #[arg(long, default_value_t = 0.75)]
    pub alpha: f64,
    /// Maximum arity of internal nodes
    #[arg(long = "b", default_value_t = 2)]
    pub arity: usize,
    /// Maximum arity of pre-leaves (use 10 for few-shot streams)
    #[arg(long = "b-max", default_value_t = 100)]
    pub preleaf_arity: usize,
    /// Learning rate
    #[arg(long, default_value_t = 1.0)]
    pub lr: f64,
    /// AdaGrad epsilon
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    /// Disable the bias term
    #[arg(long)]
    pub no_bias: bool,
    /// Disable L2 normalization of feature vectors
    #[arg(long)]
    pub no_normalize: bool,
    /// Auxiliary classifier retention
    #[arg(long, value_enum, default_value_t = AuxArg::All)]
    pub aux: AuxArg,
    /// Seed for the random policy and tree builders
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Shuffle the input with this seed (file order otherwise)
    #[arg(long)]
    pub shuffle_seed: Option<u64>,
}

impl RunConfig {
    pub fn learner(&self) -> LearnerConfig {
        LearnerConfig {
            learning_rate: self.lr,
            adagrad_epsilon: self.eps,
            use_bias: !self.no_bias,
            normalize: !self.no_normalize,
        }
    }

    pub fn policy_config(&self) -> PolicyConfig {
        PolicyConfig {
            kind: match self.policy {
                PolicyArg::BestGreedy => PolicyKind::BestGreedy,
                PolicyArg::Random => PolicyKind::Random,
            },
            alpha: self.alpha,
            arity: self.arity,
            preleaf_arity: self.preleaf_arity,
            seed: self.seed,
        }
    }

    pub fn aux_mode(&self) -> AuxRetention {
        match self.aux {
            AuxArg::All => AuxRetention::All,
            AuxArg::Prune => AuxRetention::Prune,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.learner().validate()?;
        self.policy_config().validate()
    }

    fn new_model(&self) -> Result<OpltModel> {
        OpltModel::init(self.learner(), self.policy_config(), self.aux_mode())
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training data
    #[arg(long)]
    pub train: PathBuf,
    /// Where to write the model
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Oplt)]
    pub mode: Mode,
    /// Offline tree for --mode iplt
    #[arg(long, value_enum, default_value_t = TreeKind::Kmeans)]
    pub tree: TreeKind,
    /// Passes over the training data
    #[arg(long, default_value_t = 1)]
    pub passes: usize,
    /// Build a 2-means tree on this fraction of the data first (oplt only)
    #[arg(long)]
    pub warm_start: Option<f64>,
    /// Write a prediction-only model without auxiliary classifiers
    #[arg(long)]
    pub strip_aux: bool,
    #[command(flatten)]
    pub run: RunConfig,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Test data
    #[arg(long)]
    pub test: PathBuf,
    /// Cut-offs for P@k and PSP@k
    #[arg(long, value_delimiter = ',', default_values_t = vec![1, 3, 5])]
    pub k: Vec<usize>,
    /// Propensity parameter A (enables PSP@k, needs --psp-b)
    #[arg(long, requires = "psp_b")]
    pub psp_a: Option<f64>,
    /// Propensity parameter B
    #[arg(long, requires = "psp_a")]
    pub psp_b: Option<f64>,
    /// Data whose label frequencies define propensities (defaults to the test data)
    #[arg(long)]
    pub psp_data: Option<PathBuf>,
    /// Report file with `metric,k,value` rows
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProgressiveArgs {
    /// Multi-class stream
    #[arg(long)]
    pub data: PathBuf,
    /// CSV output (stdout when omitted)
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Explicit checkpoints; overrides --checkpoint-step
    #[arg(long, value_delimiter = ',')]
    pub checkpoints: Vec<usize>,
    /// Report every this many examples
    #[arg(long, default_value_t = 1000)]
    pub checkpoint_step: usize,
    #[command(flatten)]
    pub run: RunConfig,
}

#[derive(Debug, Args)]
pub struct PropernessArgs {
    /// Stream to check; a synthetic stream is generated when omitted
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub synthetic_examples: usize,
    #[arg(long, default_value_t = 30)]
    pub synthetic_labels: u32,
    #[arg(long, default_value_t = 50)]
    pub synthetic_features: u32,
    /// Maximum labels per synthetic example
    #[arg(long, default_value_t = 4)]
    pub synthetic_max_labels: usize,
    /// Compare at every n-th prefix (and at the end)
    #[arg(long, default_value_t = 1)]
    pub every: usize,
    /// Run once per value instead of the single --alpha
    #[arg(long, value_delimiter = ',')]
    pub alphas: Vec<f64>,
    /// Skip the n-th auxiliary update (fault injection)
    #[arg(long)]
    pub inject_fault: Option<u64>,
    #[command(flatten)]
    pub run: RunConfig,
}

/// Exit status of a completed command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// The command ran but a check failed.
    Failed,
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Test(a) => cmd_test(&a),
        Command::Progressive(a) => cmd_progressive(&a),
        Command::PropernessCheck(a) => cmd_properness_check(&a),
    }
}

/// Wall clock plus process CPU time.
struct Timer {
    wall: Instant,
    cpu: Duration,
}

impl Timer {
    fn start() -> Self {
        Self {
            wall: Instant::now(),
            cpu: cpu_time(),
        }
    }

    fn report(&self, what: &str) {
        let wall = self.wall.elapsed().as_secs_f64();
        let cpu = cpu_time().saturating_sub(self.cpu).as_secs_f64();
        println!("{what}: wall {wall:.3}s, cpu {cpu:.3}s");
    }
}

fn cpu_time() -> Duration {
    // SAFETY: getrusage only writes into the zeroed struct we pass.
    let usage = unsafe {
        let mut u: libc::rusage = std::mem::zeroed();
        if libc::getrusage(libc::RUSAGE_SELF, &mut u) != 0 {
            return Duration::ZERO;
        }
        u
    };
    let tv = |t: libc::timeval| Duration::new(t.tv_sec as u64, t.tv_usec as u32 * 1000);
    tv(usage.ru_utime) + tv(usage.ru_stime)
}

fn load(path: &Path, shuffle_seed: Option<u64>) -> Result<Vec<Example>> {
    let mut data = Dataset::load(path)?.examples;
    if let Some(seed) = shuffle_seed {
        shuffle_examples(&mut data, seed);
    }
    Ok(data)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn cmd_train(args: &TrainArgs) -> Result<Outcome> {
    args.run.validate()?;
    if args.passes == 0 {
        return Err(Error::Config("--passes must be at least 1".into()));
    }
    if args.warm_start.is_some() && args.mode == Mode::Iplt {
        return Err(Error::Config(
            "--warm-start applies to --mode oplt only".into(),
        ));
    }
    // fail on an unwritable model path before training
    drop(create(&args.model)?);

    let data = load(&args.train, args.run.shuffle_seed)?;
    let timer = Timer::start();
    let mut model = match args.mode {
        Mode::Iplt => train_iplt(args, &data)?,
        Mode::Oplt => train_oplt(args, &data)?,
    };
    timer.report("training");
    if args.strip_aux {
        model.strip_auxiliary();
    }
    save_model(&model, &args.model)?;
    let t = model.tree();
    println!(
        "nodes {}, depth {}, labels {}",
        t.len(),
        t.depth(),
        t.num_labels()
    );
    Ok(Outcome::Success)
}

fn train_iplt(args: &TrainArgs, data: &[Example]) -> Result<OpltModel> {
    let run = &args.run;
    let tree = match args.tree {
        TreeKind::Balanced => {
            let labels: Vec<u32> = data
                .iter()
                .flat_map(|e| e.labels().iter().copied())
                .collect();
            build_balanced_tree(&labels, run.arity, run.preleaf_arity, run.seed)?
        }
        TreeKind::Kmeans => {
            build_kmeans_tree(&label_representations(data), run.preleaf_arity, run.seed)?
        }
    };
    let learner = run.learner();
    let classifiers = iplt_train(&tree, &learner, data, args.passes)?;
    let seen = (data.len() * args.passes) as u64;
    OpltModel::from_classifiers(tree, classifiers, learner, run.policy_config(), seen)
}

fn train_oplt(args: &TrainArgs, data: &[Example]) -> Result<OpltModel> {
    let run = &args.run;
    let (mut model, skip) = match args.warm_start {
        Some(f) => warm_start(data, f, run.learner(), run.policy_config(), run.aux_mode())?,
        None => (run.new_model()?, 0),
    };
    for ex in &data[skip..] {
        model.train_example(ex)?;
    }
    for _ in 1..args.passes {
        for ex in data {
            model.train_example(ex)?;
        }
    }
    Ok(model)
}

pub fn cmd_test(args: &TestArgs) -> Result<Outcome> {
    if args.k.is_empty() || args.k.contains(&0) {
        return Err(Error::Config("--k needs positive cut-offs".into()));
    }
    let model = load_model(&args.model)?;
    let data = Dataset::load(&args.test)?.examples;
    let propensity = match (args.psp_a, args.psp_b) {
        (Some(a), Some(b)) => {
            let source = match &args.psp_data {
                Some(p) => Dataset::load(p)?.examples,
                None => data.clone(),
            };
            Some(PropensityModel::from_examples(a, b, &source))
        }
        _ => None,
    };

    let kmax = *args.k.iter().max().expect("checked non-empty");
    let start = Instant::now();
    let pairs: Vec<_> = data
        .iter()
        .map(|ex| (model.predict_topk(&ex.features, kmax), ex.labels().to_vec()))
        .collect();
    let elapsed = start.elapsed();
    let mut report = evaluate(&pairs, &args.k, propensity.as_ref())?;
    report.mean_predict_ms = elapsed.as_secs_f64() * 1e3 / data.len().max(1) as f64;

    let stdout = io::stdout();
    let mut out = stdout.lock();
    for (k, v) in &report.precision {
        writeln!(out, "P@{k},{v:.4}")?;
    }
    for (k, v) in &report.psp {
        writeln!(out, "PSP@{k},{v:.4}")?;
    }
    writeln!(
        out,
        "mean prediction time: {:.4} ms/example",
        report.mean_predict_ms
    )?;
    if let Some(path) = &args.output {
        let mut w = create(path)?;
        report.write_csv(&mut w)?;
        w.flush()?;
    }
    Ok(Outcome::Success)
}

pub fn cmd_progressive(args: &ProgressiveArgs) -> Result<Outcome> {
    args.run.validate()?;
    let mut model = args.run.new_model()?;
    let data = load(&args.data, args.run.shuffle_seed)?;
    let checkpoints = if args.checkpoints.is_empty() {
        checkpoint_grid(args.checkpoint_step, args.checkpoint_step, data.len())
    } else {
        let mut c = args.checkpoints.clone();
        c.sort_unstable();
        c
    };
    let timer = Timer::start();
    let curve = progressive_validate(&mut model, &data, &checkpoints)?;
    match &args.output {
        Some(path) => {
            let mut w = create(path)?;
            write_curve_csv(&mut w, &curve)?;
            w.flush()?;
            timer.report("progressive validation");
        }
        None => write_curve_csv(io::stdout().lock(), &curve)?,
    }
    Ok(Outcome::Success)
}

pub fn cmd_properness_check(args: &PropernessArgs) -> Result<Outcome> {
    args.run.validate()?;
    let alphas = if args.alphas.is_empty() {
        vec![args.run.alpha]
    } else {
        args.alphas.clone()
    };
    for &alpha in &alphas {
        RunConfig {
            alpha,
            ..args.run.clone()
        }
        .validate()?;
    }
    let data = match &args.data {
        Some(p) => load(p, args.run.shuffle_seed)?,
        None => generate(&SyntheticConfig {
            num_examples: args.synthetic_examples,
            num_labels: args.synthetic_labels,
            num_features: args.synthetic_features,
            max_labels: args.synthetic_max_labels,
            seed: args.run.seed,
            ..SyntheticConfig::default()
        })?,
    };
    let prefixes = if args.every <= 1 {
        Prefixes::All
    } else {
        Prefixes::Every(args.every)
    };

    let mut all_passed = true;
    for alpha in alphas {
        let cfg = RunConfig {
            alpha,
            ..args.run.clone()
        };
        let mut model = cfg.new_model()?;
        if let Some(n) = args.inject_fault {
            model.inject_skipped_aux_update(n);
        }
        let r = check_properness(&mut model, &data, &prefixes)?;
        let verdict = if r.passed() { "PASS" } else { "FAIL" };
        println!(
            "alpha {alpha}: {verdict} prefixes {} update ratio {:.4} ({} / {}) max policy visits {} depth {}",
            r.prefixes_checked,
            r.update_ratio(),
            r.online_updates.total(),
            r.replay_updates,
            r.max_policy_visits,
            model.tree().depth()
        );
        if let Some(m) = &r.mismatch {
            println!("  first mismatch: {m}");
        }
        if let Some((i, visits, depth)) = r.visits_violation {
            println!("  example {i}: {visits} policy visits exceed depth {depth}");
        }
        all_passed &= r.passed();
    }
    Ok(if all_passed {
        Outcome::Success
    } else {
        Outcome::Failed
    })
}
