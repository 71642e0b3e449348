//! Flat INI run configuration.
//!
//! ```ini
//! [env]
//! id = pendulum-sine
//! n_actions = 100
//!
//! [expert]
//! method = lqr
//!
//! [collect]
//! n_trajectories = 3
//! seed = 0
//!
//! [distill]
//! n_iterations = 2000
//! lambda = 0.01
//! eta = 0.01
//!
//! [eval]
//! n_episodes = 10
//! seeds = 0,1,2,3,4,5
//!
//! [out]
//! dir = runs/pendulum
//! ```
//!
//! Every section except `[env]` and `[out]` is optional until a subcommand
//! needs it. Unknown sections and keys are rejected.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::{Ini, Properties};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::distill::DistillConfig;
use crate::env::{EnvConfig, EnvId, GridEncoding, GridSpec, LobConfig};
use crate::error::{Error, Result};
use crate::expert::{
    collect_batch, collect_grid_batch, fitted_q_iteration, lqr_expert, value_iteration, FqiConfig, LqrConfig,
    QModel, RegressorConfig, Transition,
};
use crate::expert::trees::TreeConfig;
use crate::seeding::derive_seed;

const SECTIONS: [&str; 8] = ["env", "expert", "collect", "distill", "eval", "curve", "report", "out"];

/// One INI section whose keys are marked as they are read.
struct Section<'a> {
    name: &'static str,
    props: Option<&'a Properties>,
    used: RefCell<BTreeSet<String>>,
}

impl<'a> Section<'a> {
    fn new(ini: &'a Ini, name: &'static str) -> Self {
        Self { name, props: ini.section(Some(name)), used: RefCell::default() }
    }

    fn present(&self) -> bool {
        self.props.is_some()
    }

    fn raw(&self, key: &str) -> Option<&'a str> {
        let value = self.props?.get(key)?;
        self.used.borrow_mut().insert(key.to_string());
        Some(value.trim())
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| v.parse().map_err(|_| Error::Config(format!("[{}] {key}: cannot parse `{v}`", self.name))))
            .transpose()
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    fn required<T: FromStr>(&self, key: &str) -> Result<T> {
        self.parse(key)?.ok_or_else(|| Error::Config(format!("[{}] is missing `{key}`", self.name)))
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        let Some(v) = self.raw(key) else { return Ok(None) };
        v.split(',')
            .map(|x| {
                x.trim().parse().map_err(|_| Error::Config(format!("[{}] {key}: cannot parse `{}`", self.name, x.trim())))
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    fn pair(&self, key: &str, default: (usize, usize)) -> Result<(usize, usize)> {
        match self.list::<usize>(key)? {
            None => Ok(default),
            Some(v) if v.len() == 2 => Ok((v[0], v[1])),
            Some(_) => Err(Error::Config(format!("[{}] {key} must be `x,y`", self.name))),
        }
    }

    fn finish(self) -> Result<()> {
        let Some(props) = self.props else { return Ok(()) };
        if let Some((k, _)) = props.iter().find(|(k, _)| props.get_all(k).count() > 1) {
            return Err(Error::Config(format!("[{}] `{k}` is given twice", self.name)));
        }
        let used = self.used.borrow();
        match props.iter().map(|(k, _)| k).find(|k| !used.contains(*k)) {
            Some(k) => Err(Error::Config(format!("[{}] unknown key `{k}`", self.name))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BatchConfig {
    /// Random-action episodes, optionally followed by rounds of
    /// epsilon-greedy episodes under the current fit.
    Random { episodes: usize, max_steps: usize, exploring_starts: bool, refine_rounds: usize, epsilon: f64 },
    /// Every node of a regular state grid times every action.
    Grid { points: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExpertConfig {
    ValueIteration { tol: f64 },
    Lqr(LqrConfig),
    Fqi { fqi: FqiConfig, batch: BatchConfig, seed: u64 },
}

impl ExpertConfig {
    pub fn method(&self) -> &'static str {
        match self {
            ExpertConfig::ValueIteration { .. } => "value_iteration",
            ExpertConfig::Lqr(_) => "lqr",
            ExpertConfig::Fqi { .. } => "fqi",
        }
    }

    pub fn train(&self, env: &EnvConfig) -> Result<QModel> {
        let n_actions = env.spec()?.n_actions;
        match self {
            ExpertConfig::ValueIteration { tol } => {
                let EnvConfig::Gridworld(grid) = env else {
                    return Err(Error::Config("value_iteration needs a gridworld".into()));
                };
                let q = value_iteration(&grid.to_mdp()?, *tol)?.q;
                Ok(QModel::Table { q, decoder: grid.decoder() })
            }
            ExpertConfig::Lqr(cfg) => {
                if env.id() != EnvId::PendulumSine {
                    return Err(Error::Config("lqr needs pendulum-sine".into()));
                }
                lqr_expert(n_actions, cfg)
            }
            ExpertConfig::Fqi { fqi, batch, seed } => {
                let mut sim = env.build(derive_seed(*seed, 0))?;
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(*seed, 1));
                match batch {
                    BatchConfig::Grid { points } => {
                        let data = collect_grid_batch(sim.as_mut(), *points)?;
                        fitted_q_iteration(&data, n_actions, fqi)
                    }
                    BatchConfig::Random { episodes, max_steps, exploring_starts, refine_rounds, epsilon } => {
                        let mut data: Vec<Transition> =
                            collect_batch(sim.as_mut(), *episodes, *max_steps, *exploring_starts, None, &mut rng)?;
                        let mut model = fitted_q_iteration(&data, n_actions, fqi)?;
                        for _ in 0..*refine_rounds {
                            let more = collect_batch(
                                sim.as_mut(),
                                *episodes,
                                *max_steps,
                                *exploring_starts,
                                Some((&model, *epsilon)),
                                &mut rng,
                            )?;
                            data.extend(more);
                            model = fitted_q_iteration(&data, n_actions, fqi)?;
                        }
                        Ok(model)
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollectConfig {
    pub n_trajectories: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub n_episodes: usize,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveSettings {
    pub dataset_sizes: Vec<usize>,
    pub n_seeds: usize,
    pub seed: u64,
    pub n_eval_episodes: usize,
}

/// Order-book rule-agreement settings used by `report`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportConfig {
    pub agreement_states: usize,
    pub margin: f64,
    pub seed: u64,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self { agreement_states: 5000, margin: 0.1, seed: 12345 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub expert: Option<ExpertConfig>,
    pub collect: Option<CollectConfig>,
    pub distill: Option<DistillConfig>,
    pub eval: Option<EvalConfig>,
    pub curve: Option<CurveSettings>,
    pub report: ReportConfig,
    pub out_dir: PathBuf,
}

fn missing(section: &str) -> Error {
    Error::Config(format!("config has no [{section}] section"))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str_noescape(text).map_err(|e| Error::Config(format!("INI syntax: {e}")))?;
        if !ini.general_section().is_empty() {
            return Err(Error::Config("keys must live inside a [section]".into()));
        }
        let mut seen = BTreeSet::new();
        let headers = text.lines().filter_map(|l| l.trim().strip_prefix('[')?.strip_suffix(']'));
        for name in headers.map(str::trim) {
            if !SECTIONS.contains(&name) {
                return Err(Error::Config(format!("unknown section [{name}]")));
            }
            if !seen.insert(name) {
                return Err(Error::Config(format!("section [{name}] appears twice")));
            }
        }

        let env_sec = Section::new(&ini, "env");
        if !env_sec.present() {
            return Err(missing("env"));
        }
        let env = parse_env(&env_sec)?;
        env_sec.finish()?;

        let sec = Section::new(&ini, "expert");
        let expert = if sec.present() { Some(parse_expert(&sec, &env)?) } else { None };
        sec.finish()?;

        let sec = Section::new(&ini, "collect");
        let collect = if sec.present() {
            Some(CollectConfig { n_trajectories: sec.required("n_trajectories")?, seed: sec.or("seed", 0)? })
        } else {
            None
        };
        sec.finish()?;

        let sec = Section::new(&ini, "distill");
        let distill = if sec.present() {
            let d = DistillConfig::default();
            let cfg = DistillConfig {
                n_iterations: sec.or("n_iterations", d.n_iterations)?,
                learning_rate: sec.or("lambda", d.learning_rate)?,
                bc_weight: sec.or("eta", d.bc_weight)?,
                beta1: sec.or("beta1", d.beta1)?,
                beta2: sec.or("beta2", d.beta2)?,
                eps: sec.or("epsilon", d.eps)?,
                seed: sec.or("seed", d.seed)?,
                log_every: sec.or("log_every", d.log_every)?,
                use_advantage: true,
            };
            cfg.validate()?;
            Some(cfg)
        } else {
            None
        };
        sec.finish()?;

        let sec = Section::new(&ini, "eval");
        let eval = if sec.present() {
            let cfg = EvalConfig {
                n_episodes: sec.or("n_episodes", 10)?,
                seeds: sec.list("seeds")?.unwrap_or_else(|| (0..6).collect()),
            };
            if cfg.n_episodes == 0 || cfg.seeds.is_empty() {
                return Err(Error::Config("[eval] needs n_episodes >= 1 and seeds".into()));
            }
            Some(cfg)
        } else {
            None
        };
        sec.finish()?;

        let sec = Section::new(&ini, "curve");
        let curve = if sec.present() {
            let cfg = CurveSettings {
                dataset_sizes: sec.list("dataset_sizes")?.unwrap_or_else(|| vec![3, 5, 10]),
                n_seeds: sec.or("n_seeds", 6)?,
                seed: sec.or("seed", 0)?,
                n_eval_episodes: sec.or("n_eval_episodes", 10)?,
            };
            if cfg.dataset_sizes.is_empty() || cfg.dataset_sizes.contains(&0) || cfg.n_seeds == 0 {
                return Err(Error::Config("[curve] needs positive dataset_sizes and n_seeds".into()));
            }
            Some(cfg)
        } else {
            None
        };
        sec.finish()?;

        let sec = Section::new(&ini, "report");
        let d = ReportConfig::default();
        let report = ReportConfig {
            agreement_states: sec.or("agreement_states", d.agreement_states)?,
            margin: sec.or("margin", d.margin)?,
            seed: sec.or("seed", d.seed)?,
        };
        sec.finish()?;

        let sec = Section::new(&ini, "out");
        if !sec.present() {
            return Err(missing("out"));
        }
        let out_dir = PathBuf::from(sec.required::<String>("dir")?);
        sec.finish()?;

        Ok(Self { env, expert, collect, distill, eval, curve, report, out_dir })
    }

    /// Replaces every scalar seed (expert, collect, distill, curve).
    pub fn override_seed(&mut self, seed: u64) {
        if let Some(ExpertConfig::Fqi { seed: s, .. }) = &mut self.expert {
            *s = seed;
        }
        if let Some(c) = &mut self.collect {
            c.seed = seed;
        }
        if let Some(d) = &mut self.distill {
            d.seed = seed;
        }
        if let Some(c) = &mut self.curve {
            c.seed = seed;
        }
    }

    pub fn expert(&self) -> Result<&ExpertConfig> {
        self.expert.as_ref().ok_or_else(|| missing("expert"))
    }

    pub fn collect(&self) -> Result<&CollectConfig> {
        self.collect.as_ref().ok_or_else(|| missing("collect"))
    }

    pub fn distill(&self) -> Result<&DistillConfig> {
        self.distill.as_ref().ok_or_else(|| missing("distill"))
    }

    pub fn eval(&self) -> Result<&EvalConfig> {
        self.eval.as_ref().ok_or_else(|| missing("eval"))
    }

    pub fn curve(&self) -> Result<&CurveSettings> {
        self.curve.as_ref().ok_or_else(|| missing("curve"))
    }
}

fn parse_env(sec: &Section) -> Result<EnvConfig> {
    let id: EnvId = sec.required::<String>("id")?.parse()?;
    let env = match id {
        EnvId::PendulumSine => EnvConfig::Pendulum { n_actions: sec.or("n_actions", 100)? },
        EnvId::MountainCarDisc => EnvConfig::MountainCar { n_actions: sec.or("n_actions", 50)? },
        EnvId::LobSynth => {
            let d = LobConfig::default();
            let cfg = LobConfig {
                n_features: sec.or("n_features", d.n_features)?,
                episode_len: sec.or("episode_len", d.episode_len)?,
                sigma: sec.or("sigma", d.sigma)?,
                kappa: sec.or("kappa", d.kappa)?,
                min_volume: sec.or("min_volume", d.min_volume)?,
                max_volume: sec.or("max_volume", d.max_volume)?,
            };
            cfg.validate()?;
            EnvConfig::Lob(cfg)
        }
        EnvId::Gridworld => {
            let width = sec.or("width", 4)?;
            let height = sec.or("height", 4)?;
            let encoding = match sec.or("encoding", "xy".to_string())?.as_str() {
                "xy" => GridEncoding::Xy,
                "one_hot" => GridEncoding::OneHot,
                other => return Err(Error::Config(format!("[env] encoding `{other}` is not xy or one_hot"))),
            };
            let spec = GridSpec {
                width,
                height,
                start: sec.pair("start", (0, 0))?,
                goal: sec.pair("goal", (width.saturating_sub(1), height.saturating_sub(1)))?,
                goal_reward: sec.or("goal_reward", 1.0)?,
                slip: sec.or("slip", 0.0)?,
                gamma: sec.or("gamma", 0.9)?,
                horizon: sec.or("horizon", 100)?,
                encoding,
            };
            spec.validate()?;
            EnvConfig::Gridworld(spec)
        }
    };
    // Surfaces action-count errors at load time.
    env.spec()?;
    Ok(env)
}

fn parse_expert(sec: &Section, env: &EnvConfig) -> Result<ExpertConfig> {
    let default_method = match env {
        EnvConfig::Gridworld(_) => "value_iteration",
        EnvConfig::Pendulum { .. } => "lqr",
        _ => "fqi",
    };
    let method = sec.or("method", default_method.to_string())?;
    match method.as_str() {
        "value_iteration" => {
            let tol = sec.or("tol", 1e-10)?;
            if !(tol > 0.0) {
                return Err(Error::Config("[expert] tol must be > 0".into()));
            }
            Ok(ExpertConfig::ValueIteration { tol })
        }
        "lqr" => {
            let d = LqrConfig::default();
            let state_cost = match sec.list::<f64>("state_cost")? {
                None => d.state_cost,
                Some(v) => v.try_into().map_err(|_| Error::Config("[expert] state_cost needs 4 entries".into()))?,
            };
            Ok(ExpertConfig::Lqr(LqrConfig {
                state_cost,
                force_cost: sec.or("force_cost", d.force_cost)?,
                gamma: sec.or("gamma", d.gamma)?,
            }))
        }
        "fqi" => {
            let seed = sec.or("seed", 0)?;
            let regressor = match sec.or("regressor", "extra_trees".to_string())?.as_str() {
                "extra_trees" => {
                    let d = TreeConfig::default();
                    RegressorConfig::Trees(TreeConfig {
                        n_trees: sec.or("n_trees", d.n_trees)?,
                        max_depth: sec.or("max_depth", d.max_depth)?,
                        min_samples_split: sec.or("min_samples_split", d.min_samples_split)?,
                        seed,
                    })
                }
                "grid" => RegressorConfig::Grid { points: sec.or("grid_points", 41)? },
                other => return Err(Error::Config(format!("[expert] regressor `{other}` is not extra_trees or grid"))),
            };
            let fqi = FqiConfig { iterations: sec.or("iterations", 1)?, gamma: sec.or("gamma", 0.99)?, regressor };
            if fqi.iterations == 0 || !(0.0..1.0).contains(&fqi.gamma) {
                return Err(Error::Config("[expert] needs iterations >= 1 and gamma in [0, 1)".into()));
            }
            let batch = match sec.or("batch", "random".to_string())?.as_str() {
                "random" => BatchConfig::Random {
                    episodes: sec.or("batch_episodes", 20)?,
                    max_steps: sec.or("batch_steps", 200)?,
                    exploring_starts: sec.or("exploring_starts", false)?,
                    refine_rounds: sec.or("refine_rounds", 0)?,
                    epsilon: sec.or("epsilon", 0.1)?,
                },
                "grid" => BatchConfig::Grid { points: sec.or("batch_points", 41)? },
                other => return Err(Error::Config(format!("[expert] batch `{other}` is not random or grid"))),
            };
            Ok(ExpertConfig::Fqi { fqi, batch, seed })
        }
        other => Err(Error::Config(format!("[expert] unknown method `{other}`"))),
    }
}
