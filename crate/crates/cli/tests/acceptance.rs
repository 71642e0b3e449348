//! Acceptance suite: one PASS/FAIL line per criterion. Failing criteria make
//! the process exit non-zero only when `ACCEPTANCE_STRICT=1`.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use explain_core::analysis::{
    bound_check, bound_sweep, comparison_curve, evaluate_policy, imbalance_agreement, sweep_instance,
    weight_report, Curve, CurveConfig, Method, SweepConfig, BOUND_TOL,
};
use explain_core::config::RunConfig;
use explain_core::distill::{explain_train, grad_advantage, grad_bc, DistilledPolicy, PreparedDataset, SoftmaxLinearPolicy};
use explain_core::env::EnvConfig;
use explain_core::expert::{collect_trajectories, QModel};
use explain_core::mdp::{argmax, expected_advantage, performance_difference, random, solve_values};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn load(name: &str) -> RunConfig {
    RunConfig::load(&config_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

fn gradient_fidelity() -> Outcome {
    const H: f64 = 1e-5;
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.random_range(2..=10);
        let d = rng.random_range(1..=8);
        let n = rng.random_range(1..=25);
        let mut normal = || rng.sample::<f64, _>(StandardNormal);
        let rows: Vec<Vec<f64>> = (0..k).map(|_| (0..=d).map(|_| normal()).collect()).collect();
        let (mut x, mut adv, mut expert) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..n {
            let mut f: Vec<f64> = (0..d).map(|_| normal()).collect();
            f.push(1.0);
            let q: Vec<f64> = (0..k).map(|_| normal()).collect();
            let a = argmax(&q);
            adv.push(q.iter().map(|v| v - q[a]).collect());
            let mut onehot = vec![0.0; k];
            onehot[a] = 1.0;
            x.push(f);
            expert.push(onehot);
        }
        let policy = SoftmaxLinearPolicy::from_rows(rows).unwrap();
        let data = PreparedDataset::new(x, adv, expert).unwrap();
        let objectives: [fn(&SoftmaxLinearPolicy, &PreparedDataset) -> explain_core::distill::Gradient; 2] =
            [grad_advantage, grad_bc];
        for f in objectives {
            let analytic = f(&policy, &data).grad;
            let numeric: Vec<f64> = (0..analytic.len())
                .map(|i| {
                    let mut p = policy.clone();
                    p.weights_mut()[i] += H;
                    let up = f(&p, &data).value;
                    p.weights_mut()[i] -= 2.0 * H;
                    (up - f(&p, &data).value) / (2.0 * H)
                })
                .collect();
            let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
            let scale = norm(&analytic).max(norm(&numeric));
            if scale > 0.0 {
                worst = worst.max(norm(&diff) / scale);
            }
        }
    }
    let t = start.elapsed();
    outcome(worst <= 1e-6 && within(t, 10), format!("max relative error {worst:.2e} over 100 instances, {t:.1?}"))
}

fn bound_verification() -> Outcome {
    let start = Instant::now();
    let cfg = SweepConfig::default();
    let rows = bound_sweep(&cfg).unwrap();
    let violations = rows.iter().filter(|r| r.report.slack < -BOUND_TOL).count();
    let min_slack = rows.iter().map(|r| r.report.slack).fold(f64::INFINITY, f64::min);
    let mut worst_equal: f64 = 0.0;
    for i in 0..cfg.n_instances {
        let (mdp, pi_e, _) = sweep_instance(&cfg, i);
        let r = bound_check(&mdp, &pi_e, &pi_e).unwrap();
        worst_equal = worst_equal.max(r.slack.abs()).max(r.lhs.abs()).max(r.rhs.abs());
    }
    let t = start.elapsed();
    outcome(
        rows.len() == 1000 && violations == 0 && worst_equal <= 1e-9 && within(t, 30),
        format!(
            "{} instances, {violations} violations, min slack {min_slack:.3e}, max |slack| at pi_I = pi_E {worst_equal:.1e}, {t:.1?}",
            rows.len()
        ),
    )
}

fn exact_identity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst_pd, mut worst_adv, mut errors) = (0.0f64, 0.0f64, 0);
    for _ in 0..1000 {
        let n_s = rng.random_range(1..=6);
        let n_a = rng.random_range(1..=4);
        let gamma = rng.random_range(0.0..0.97);
        let mdp = random::mdp(&mut rng, n_s, n_a, gamma);
        let pi = random::policy(&mut rng, n_s, n_a);
        let pi_new = random::policy(&mut rng, n_s, n_a);
        match performance_difference(&mdp, &pi_new, &pi) {
            Ok(pd) => worst_pd = worst_pd.max((pd.direct - pd.decomposed).abs()),
            Err(_) => errors += 1,
        }
        for p in [&pi, &pi_new] {
            let adv = solve_values(&mdp, p).unwrap().adv;
            for (s, row) in adv.iter().enumerate() {
                worst_adv = worst_adv.max(expected_advantage(p.row(s), row).abs());
            }
        }
    }
    let t = start.elapsed();
    outcome(
        errors == 0 && worst_pd <= 1e-9 && worst_adv <= 1e-10 && within(t, 30),
        format!("1000 triples: max identity gap {worst_pd:.1e}, max |E_pi A| {worst_adv:.1e}, {errors} mismatches, {t:.1?}"),
    )
}

fn curve_config(cfg: &RunConfig, sizes: Vec<usize>) -> CurveConfig {
    let c = cfg.curve().unwrap();
    CurveConfig {
        dataset_sizes: sizes,
        methods: Method::ALL.to_vec(),
        n_seeds: c.n_seeds,
        seed: c.seed,
        distill: cfg.distill().unwrap().clone(),
        n_eval_episodes: c.n_eval_episodes,
    }
}

fn final_stats(curve: &Curve, m: Method) -> (f64, f64) {
    curve.final_stats(m).expect("curve has points")
}

fn mountain_car() -> Outcome {
    let start = Instant::now();
    let cfg = load("mountain_car_size5.ini");
    let expert = cfg.expert().unwrap().train(&cfg.env).unwrap();
    let eval = cfg.eval().unwrap();
    let expert_mean = evaluate_policy(&cfg.env, &expert, eval.n_episodes, &eval.seeds).unwrap().mean;
    let curves = comparison_curve(&cfg.env, &expert, &curve_config(&cfg, vec![5, 10])).unwrap();
    let mut pass = true;
    let mut parts = vec![format!("expert {expert_mean:.1}")];
    for c in &curves {
        for m in Method::ALL {
            let (mean, std) = final_stats(c, m);
            pass &= mean >= 90.0 && mean >= 0.9 * expert_mean;
            parts.push(format!("size {} {m} {mean:.1}+-{std:.1}", c.dataset_size));
        }
    }
    let t = start.elapsed();
    outcome(pass && within(t, 600), format!("{}, {t:.1?}", parts.join("; ")))
}

/// Criteria 5 and 6 share one sweep over dataset sizes 3, 5 and 10.
fn pendulum() -> (Outcome, Outcome) {
    let start = Instant::now();
    let cfg = load("pendulum_sweep.ini");
    let expert = cfg.expert().unwrap().train(&cfg.env).unwrap();
    let curves = comparison_curve(&cfg.env, &expert, &curve_config(&cfg, vec![3, 5, 10])).unwrap();
    let t = start.elapsed();
    let (adv_mean, adv_std) = final_stats(&curves[0], Method::AdvBc);
    let (bc_mean, bc_std) = final_stats(&curves[0], Method::BcOnly);
    let ordering = outcome(
        adv_mean >= bc_mean && adv_std <= bc_std && within(t, 900),
        format!("size 3: adv_bc {adv_mean:.1}+-{adv_std:.1}, bc_only {bc_mean:.1}+-{bc_std:.1}, sweep {t:.1?}"),
    );
    let bc: Vec<f64> = curves.iter().map(|c| final_stats(c, Method::BcOnly).0).collect();
    let monotone = outcome(
        bc.windows(2).all(|w| w[1] >= w[0]),
        format!("bc_only final means for sizes 3, 5, 10: {:.1}, {:.1}, {:.1}", bc[0], bc[1], bc[2]),
    );
    (ordering, monotone)
}

fn imbalance_rule() -> Outcome {
    let start = Instant::now();
    let cfg = load("lob_synth.ini");
    let expert: QModel = cfg.expert().unwrap().train(&cfg.env).unwrap();
    let collect = cfg.collect().unwrap();
    let ds = collect_trajectories(&cfg.env, &expert, collect.n_trajectories, collect.seed).unwrap();
    let (policy, _) = explain_train(&PreparedDataset::from_dataset(&ds).unwrap(), cfg.distill().unwrap()).unwrap();
    let names = cfg.env.build(0).unwrap().feature_names();
    let checks = weight_report(&policy, &names, None).unwrap().lob_checks();
    let distilled = DistilledPolicy { policy, standardizer: ds.meta.standardizer.clone() };
    let EnvConfig::Lob(lob) = &cfg.env else { panic!("lob_synth.ini is not a lob-synth config") };
    let r = &cfg.report;
    let agreement = imbalance_agreement(&distilled, lob, r.agreement_states, r.seed, r.margin).unwrap();
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    let t = start.elapsed();
    outcome(
        failed.is_empty() && agreement.rate() >= 0.95 && within(t, 300),
        format!(
            "sigma {}: weight checks {}/{} (failed: {failed:?}), rule agreement {:.4} on {} states, {t:.1?}",
            lob.sigma,
            checks.len() - failed.len(),
            checks.len(),
            agreement.rate(),
            agreement.n_considered
        ),
    )
}

fn run_cli(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_explain")).args(args).output().map(|o| o.status.success()).unwrap_or(false)
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let grid_cfg = tmp.path().join("grid.ini");
    let grid = std::fs::read_to_string(config_path("gridworld.ini")).unwrap().replace("n_iterations = 3000", "n_iterations = 300");
    std::fs::write(&grid_cfg, format!("{grid}\n[curve]\ndataset_sizes = 1, 2\nn_seeds = 2\nn_eval_episodes = 3\n")).unwrap();
    let lob_cfg = config_path("lob_synth.ini");
    let mut identical = true;
    let mut count = 0;
    let mut failed_runs = Vec::new();
    let jobs: [(&Path, &[&str]); 2] = [
        (&grid_cfg, &["train-expert", "collect", "distill", "eval", "curve", "report", "verify-bound"]),
        (&lob_cfg, &["train-expert", "collect", "distill", "eval", "report"]),
    ];
    for (k, (cfg, commands)) in jobs.iter().enumerate() {
        let mut runs = Vec::new();
        for rep in 0..2 {
            let out = tmp.path().join(format!("job{k}_run{rep}"));
            let cfg_arg = cfg.to_str().unwrap();
            let out_arg = out.to_str().unwrap();
            for cmd in commands.iter() {
                let mut args = vec![*cmd, "--config", cfg_arg, "--out", out_arg];
                if *cmd == "verify-bound" {
                    args.extend(["--instances", "50"]);
                }
                if !run_cli(&args) {
                    failed_runs.push(format!("{cmd} ({})", cfg.display()));
                }
            }
            runs.push(snapshot(&out));
        }
        count += runs[0].len();
        identical &= runs[0] == runs[1];
    }
    outcome(
        identical && failed_runs.is_empty(),
        format!("{count} output files compared across reruns, failed invocations: {failed_runs:?}"),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |n: usize, name: &'static str, o: Outcome| {
        println!("criterion {n} {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };
    report(1, "gradient fidelity", gradient_fidelity());
    report(2, "bound verification", bound_verification());
    report(3, "exact identity oracle", exact_identity());
    report(4, "mountain-car reproduction", mountain_car());
    let (ordering, monotone) = pendulum();
    report(5, "pendulum-sine ordering", ordering);
    report(6, "BC monotonicity in data", monotone);
    report(7, "imbalance-rule recovery", imbalance_rule());
    report(8, "CLI determinism", determinism());
    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("acceptance: {} of {} criteria pass", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        eprintln!("failing criteria: {failed:?}");
        if std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
            std::process::exit(1);
        }
    }
}
