//! `explain`: expert training, trajectory collection, distillation,
//! evaluation, bound verification and reporting from one INI config.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use explain_core::analysis::{
    bound_sweep, comparison_curve, evaluate_policy, imbalance_agreement, plot, weight_report, write_checks_csv,
    write_sweep_csv, Check, Curve, CurveConfig, Method, SweepConfig,
};
use explain_core::config::RunConfig;
use explain_core::distill::{explain_train, DistillConfig, DistilledPolicy, PreparedDataset, TrainingTrace};
use explain_core::env::{EnvConfig, EnvId};
use explain_core::expert::{collect_trajectories, QModel, TrajectoryDataset};

const EXPERT_FILE: &str = "expert.json";
const DATASET_FILE: &str = "dataset.jsonl";
const POLICY_FILE: &str = "policy.json";
const TRACE_FILE: &str = "trace.csv";
/// Minimum rule agreement reported as PASS by `report` on lob-synth.
const RULE_AGREEMENT_MIN: f64 = 0.95;

#[derive(Parser, Debug)]
#[command(name = "explain", version, about = "Distil interpretable softmax-linear policies from expert Q-functions")]
struct Cli {
    /// INI run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `[out] dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the expert, collect, distill, curve and bound-sweep seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train the expert and write expert.json.
    TrainExpert,
    /// Roll out the expert and write dataset.jsonl.
    Collect,
    /// Distil a policy from dataset.jsonl into policy.json and trace.csv.
    Distill {
        /// Drop the advantage term (behavioral cloning only).
        #[arg(long)]
        bc_only: bool,
    },
    /// Evaluate policy.json (or the expert) over the [eval] seeds.
    Eval {
        #[arg(long)]
        expert: bool,
    },
    /// Check the performance-difference lower bound on random tabular MDPs.
    VerifyBound(BoundArgs),
    /// Weight tables, order-book checks and SVG plots for a run directory.
    Report,
    /// Adv+BC against BC-only learning curves over dataset sizes.
    Curve,
}

#[derive(Args, Debug)]
struct BoundArgs {
    #[arg(long, default_value_t = 1000)]
    instances: usize,
    #[arg(long, default_value_t = 6)]
    max_states: usize,
    #[arg(long, default_value_t = 4)]
    max_actions: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.9,0.95")]
    gammas: Vec<f64>,
}

/// Error with the process exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

const INPUT: u8 = 2;
const COMPUTE: u8 = 3;
const VIOLATION: u8 = 4;

trait Classify<T> {
    fn code(self, code: u8) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn code(self, code: u8) -> Result<T, Failure> {
        self.map_err(|e| Failure { code, error: e.into() })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
}

impl Ctx {
    fn load(cli: &Cli) -> Result<Self, Failure> {
        let path = cli.config.as_ref().ok_or_else(|| anyhow!("--config is required")).code(INPUT)?;
        let mut cfg = RunConfig::load(path).with_context(|| format!("loading {}", path.display())).code(INPUT)?;
        if let Some(seed) = cli.seed {
            cfg.override_seed(seed);
        }
        let out = cli.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
        std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display())).code(INPUT)?;
        Ok(Self { cfg, out })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// Reads an artifact that an earlier subcommand must have written.
    fn input<T>(&self, name: &str, read: impl FnOnce(&Path) -> explain_core::Result<T>) -> Result<T, Failure> {
        let path = self.path(name);
        if !path.exists() {
            return Err(anyhow!("{} not found; run the producing subcommand first", path.display())).code(INPUT);
        }
        read(&path).with_context(|| format!("reading {}", path.display())).code(INPUT)
    }

    fn expert(&self) -> Result<QModel, Failure> {
        self.input(EXPERT_FILE, QModel::load)
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>, Failure> {
        let path = self.path(name);
        File::create(&path).map(BufWriter::new).with_context(|| format!("creating {}", path.display())).code(INPUT)
    }

    fn write_text(&self, name: &str, text: &str) -> Result<(), Failure> {
        let path = self.path(name);
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display())).code(INPUT)
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::TrainExpert => train_expert(&Ctx::load(cli)?),
        Command::Collect => collect(&Ctx::load(cli)?),
        Command::Distill { bc_only } => distill(&Ctx::load(cli)?, *bc_only),
        Command::Eval { expert } => eval(&Ctx::load(cli)?, *expert),
        Command::VerifyBound(args) => verify_bound(cli, args),
        Command::Report => report(&Ctx::load(cli)?),
        Command::Curve => curve(&Ctx::load(cli)?),
    }
}

fn train_expert(ctx: &Ctx) -> Result<(), Failure> {
    let spec = ctx.cfg.expert().code(INPUT)?;
    let model = spec.train(&ctx.cfg.env).context("training the expert").code(COMPUTE)?;
    model.save(&ctx.path(EXPERT_FILE)).code(INPUT)?;
    let (n_episodes, seeds) = match &ctx.cfg.eval {
        Some(e) => (e.n_episodes, e.seeds.clone()),
        None => (10, vec![0]),
    };
    let report = evaluate_policy(&ctx.cfg.env, &model, n_episodes, &seeds).code(COMPUTE)?;
    println!(
        "expert {} on {}: mean return {:.4} (std {:.4}) over {} seeds x {} episodes",
        model.describe(),
        ctx.cfg.env.id(),
        report.mean,
        report.std,
        report.n_seeds(),
        n_episodes
    );
    Ok(())
}

fn collect(ctx: &Ctx) -> Result<(), Failure> {
    let spec = ctx.cfg.collect().code(INPUT)?;
    let model = ctx.expert()?;
    let ds = collect_trajectories(&ctx.cfg.env, &model, spec.n_trajectories, spec.seed).code(COMPUTE)?;
    ds.write_jsonl(ctx.create(DATASET_FILE)?).code(INPUT)?;
    println!("collected {} rows from {} trajectories", ds.len(), spec.n_trajectories);
    Ok(())
}

fn distill(ctx: &Ctx, bc_only: bool) -> Result<(), Failure> {
    let cfg = DistillConfig { use_advantage: !bc_only, ..ctx.cfg.distill().code(INPUT)?.clone() };
    let ds = ctx.input(DATASET_FILE, TrajectoryDataset::load)?;
    let data = PreparedDataset::from_dataset(&ds).code(INPUT)?;
    let (policy, trace) = explain_train(&data, &cfg).context("distillation").code(COMPUTE)?;
    let distilled = DistilledPolicy { policy, standardizer: ds.meta.standardizer.clone() };
    distilled.save(&ctx.path(POLICY_FILE)).code(INPUT)?;
    trace.write_csv(ctx.create(TRACE_FILE)?).code(INPUT)?;
    let last = trace.records.last().expect("trace has the final iteration");
    println!(
        "distilled ({}) for {} iterations on {} rows: J_hat {:.6}, L_hat {:.6}",
        if bc_only { Method::BcOnly } else { Method::AdvBc },
        cfg.n_iterations,
        ds.len(),
        last.j_hat,
        last.l_hat
    );
    Ok(())
}

fn eval(ctx: &Ctx, expert: bool) -> Result<(), Failure> {
    let spec = ctx.cfg.eval().code(INPUT)?;
    let (report, file) = if expert {
        let model = ctx.expert()?;
        (evaluate_policy(&ctx.cfg.env, &model, spec.n_episodes, &spec.seeds), "eval_expert.csv")
    } else {
        let policy = ctx.input(POLICY_FILE, DistilledPolicy::load)?;
        (evaluate_policy(&ctx.cfg.env, &policy, spec.n_episodes, &spec.seeds), "eval.csv")
    };
    let report = report.code(COMPUTE)?;
    report.write_csv(ctx.create(file)?).code(INPUT)?;
    for (seed, ret) in report.seeds.iter().zip(&report.per_seed) {
        println!("seed {seed}: mean return {ret:.4}");
    }
    println!("mean {:.4} std {:.4} ({} seeds x {} episodes)", report.mean, report.std, report.n_seeds(), report.n_episodes);
    Ok(())
}

fn verify_bound(cli: &Cli, args: &BoundArgs) -> Result<(), Failure> {
    let out = match (&cli.out, &cli.config) {
        (Some(dir), _) => dir.clone(),
        (None, Some(path)) => RunConfig::load(path).code(INPUT)?.out_dir,
        (None, None) => PathBuf::from("."),
    };
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display())).code(INPUT)?;
    let cfg = SweepConfig {
        n_instances: args.instances,
        max_states: args.max_states,
        max_actions: args.max_actions,
        gammas: args.gammas.clone(),
        seed: cli.seed.unwrap_or(0),
    };
    let rows = bound_sweep(&cfg).code(INPUT)?;
    let path = out.join("bound_sweep.csv");
    let file = File::create(&path).with_context(|| format!("creating {}", path.display())).code(INPUT)?;
    write_sweep_csv(&rows, BufWriter::new(file)).code(INPUT)?;
    let violations = rows.iter().filter(|r| !r.report.holds).count();
    let min_slack = rows.iter().map(|r| r.report.slack).fold(f64::INFINITY, f64::min);
    println!("{} checks ({} instances), {violations} violations, min slack {min_slack:.3e}", rows.len(), cfg.n_instances);
    if violations > 0 {
        return Err(anyhow!("bound violated on {violations} checks")).code(VIOLATION);
    }
    Ok(())
}

fn report(ctx: &Ctx) -> Result<(), Failure> {
    let env = &ctx.cfg.env;
    let id = env.id();
    let policy = ctx.input(POLICY_FILE, DistilledPolicy::load)?;
    let names = env.build(0).code(INPUT)?.feature_names();
    let action_names: Option<Vec<String>> =
        (id == EnvId::LobSynth).then(|| ["long", "flat", "short"].map(String::from).to_vec());
    let table = weight_report(&policy.policy, &names, action_names.as_deref()).code(INPUT)?;
    table.write_csv(ctx.create(&format!("weights_{id}.csv"))?).code(INPUT)?;
    println!("wrote weights_{id}.csv");

    if let EnvConfig::Lob(lob) = env {
        let mut checks = table.lob_checks();
        let r = &ctx.cfg.report;
        let agreement = imbalance_agreement(&policy, lob, r.agreement_states, r.seed, r.margin).code(COMPUTE)?;
        checks.push(Check {
            name: "imbalance_rule_agreement".into(),
            value: agreement.rate(),
            pass: agreement.rate() >= RULE_AGREEMENT_MIN,
        });
        write_checks_csv(&checks, ctx.create(&format!("weights_{id}_checks.csv"))?).code(INPUT)?;
        for c in &checks {
            println!("{} {} ({})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value);
        }
    }

    if ctx.path(TRACE_FILE).exists() {
        let trace = ctx.input(TRACE_FILE, |p| TrainingTrace::read_csv(BufReader::new(File::open(p)?)))?;
        let series = |label: &str, f: fn(&explain_core::distill::TraceRecord) -> f64| plot::Series {
            label: label.into(),
            points: trace.records.iter().map(|r| (r.iter as f64, f(r))).collect(),
            band: None,
        };
        let svg = plot::line_chart(
            "Training objectives",
            "iteration",
            "value",
            &[series("J_hat", |r| r.j_hat), series("L_hat", |r| r.l_hat)],
        );
        ctx.write_text("trace.svg", &svg)?;
        println!("wrote trace.svg");
    }

    for (size, path) in curve_files(&ctx.out, id).code(INPUT)? {
        let curve = Curve::read_csv(BufReader::new(File::open(&path).code(INPUT)?), size)
            .with_context(|| format!("reading {}", path.display()))
            .code(INPUT)?;
        let series: Vec<plot::Series> = Method::ALL
            .into_iter()
            .map(|m| {
                let s = curve.summary(m);
                plot::Series {
                    label: m.as_str().into(),
                    points: s.iter().map(|&(it, mean, _)| (it as f64, mean)).collect(),
                    band: Some(s.iter().map(|&(_, _, std)| std).collect()),
                }
            })
            .filter(|s| !s.points.is_empty())
            .collect();
        let svg = plot::line_chart(&format!("{id}, dataset size {size}"), "iteration", "return", &series);
        ctx.write_text(&format!("curve_{id}_{size}.svg"), &svg)?;
        println!("wrote curve_{id}_{size}.svg");
    }
    Ok(())
}

/// `curve_<env>_<size>.csv` files in `dir`, sorted by size.
fn curve_files(dir: &Path, id: EnvId) -> std::io::Result<Vec<(usize, PathBuf)>> {
    let prefix = format!("curve_{id}_");
    let mut found = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if let Some(size) = name.strip_prefix(&prefix).and_then(|r| r.strip_suffix(".csv")).and_then(|s| s.parse().ok()) {
            found.push((size, path));
        }
    }
    found.sort();
    Ok(found)
}

fn curve(ctx: &Ctx) -> Result<(), Failure> {
    let settings = ctx.cfg.curve().code(INPUT)?;
    let distill = ctx.cfg.distill().code(INPUT)?.clone();
    let model = ctx.expert()?;
    let cfg = CurveConfig {
        dataset_sizes: settings.dataset_sizes.clone(),
        methods: Method::ALL.to_vec(),
        n_seeds: settings.n_seeds,
        seed: settings.seed,
        distill,
        n_eval_episodes: settings.n_eval_episodes,
    };
    let id = ctx.cfg.env.id();
    let curves = comparison_curve(&ctx.cfg.env, &model, &cfg).code(COMPUTE)?;
    for c in &curves {
        let name = format!("curve_{id}_{}.csv", c.dataset_size);
        c.write_csv(ctx.create(&name)?).code(INPUT)?;
        for m in Method::ALL {
            if let Some((mean, std)) = c.final_stats(m) {
                println!("size {} {m}: final mean {mean:.2} std {std:.2}", c.dataset_size);
            }
        }
    }
    Ok(())
}
