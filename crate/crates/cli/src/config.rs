//! Experiment configuration files.
//!
//! A config is a TOML document. Relative paths resolve against the directory
//! of the config file.
//!
//! ```toml
//! episodes = 2000
//! horizon = 200
//! seed = 1
//! output = "out/toy"
//!
//! [environment]
//! file = "toy.env.toml"
//!
//! [objective]
//! safety = "[]!u"
//! hoa = "inf_g.hoa"
//!
//! [hyper]
//! r_safety = 0.2
//! r_ltl = 0.05
//! alpha = { start = 0.5, end = 0.005 }
//! epsilon = 0.5
//! upsilon = 0.1
//! tau_safety = { start = 0.5, end = 0.03 }
//! tau_ltl = { start = 0.5, end = 0.05 }
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lexrl::automata::{parse_hoa, parse_ltl, safety_to_automaton};
use lexrl::learn::{Hyper, Schedule};
use lexrl::mdp::io::EnvSpec;
use lexrl::mdp::LabeledMdp;
use lexrl::product::{build_product, ProductMdp};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub episodes: usize,
    pub horizon: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    /// Environment state from whose first visit evaluation returns count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_start_after: Option<String>,
    #[serde(default = "default_stats_every")]
    pub stats_every: usize,
    pub environment: EnvSource,
    pub objective: Objective,
    pub hyper: HyperConfig,
    /// Applied by `--paper-scale`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paper_scale: Option<Scale>,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_eval_episodes() -> usize {
    1000
}

fn default_stats_every() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnvSource {
    File { file: PathBuf },
    Inline(EnvSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Objective {
    /// Safety formula over the environment's propositions.
    pub safety: String,
    /// LTL objective in the safety fragment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ltl: Option<String>,
    /// LTL objective as an LDBA in HOA format.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hoa: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scale {
    pub episodes: usize,
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_episodes: Option<usize>,
}

/// A constant or a decay whose horizon defaults to the episode count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScheduleConfig {
    Constant(f64),
    Decay {
        start: f64,
        end: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        horizon: Option<usize>,
    },
}

impl ScheduleConfig {
    pub fn resolve(self, episodes: usize) -> Schedule {
        match self {
            ScheduleConfig::Constant(v) => Schedule::constant(v),
            ScheduleConfig::Decay {
                start,
                end,
                horizon,
            } => Schedule::decay(start, end, horizon.unwrap_or(episodes)),
        }
    }

    /// `0.5` or `0.5:0.05`.
    pub fn parse_flag(text: &str) -> Result<Self, String> {
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
        match text.split_once(':') {
            None => Ok(ScheduleConfig::Constant(num(text)?)),
            Some((a, b)) => Ok(ScheduleConfig::Decay {
                start: num(a)?,
                end: num(b)?,
                horizon: None,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperConfig {
    /// Defaults to the environment's discount.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub r_safety: f64,
    pub r_ltl: f64,
    pub alpha: ScheduleConfig,
    pub epsilon: ScheduleConfig,
    pub upsilon: ScheduleConfig,
    pub tau_safety: ScheduleConfig,
    pub tau_ltl: ScheduleConfig,
    #[serde(default = "yes")]
    pub ltl_bootstrap_in_safe_set: bool,
}

fn yes() -> bool {
    true
}

/// Command-line values that replace config entries.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub gamma: Option<f64>,
    pub r_safety: Option<f64>,
    pub r_ltl: Option<f64>,
    pub alpha: Option<ScheduleConfig>,
    pub epsilon: Option<ScheduleConfig>,
    pub upsilon: Option<ScheduleConfig>,
    pub tau_safety: Option<ScheduleConfig>,
    pub tau_ltl: Option<ScheduleConfig>,
    pub episodes: Option<usize>,
    pub horizon: Option<usize>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub paper_scale: bool,
}

/// A config with every path resolved and every input read.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub env: EnvSpec,
    pub hoa_text: Option<String>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let c: ExperimentConfig = toml::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.objective.ltl, &self.objective.hoa) {
            (Some(_), Some(_)) => bail!("objective: give either `ltl` or `hoa`, not both"),
            (None, None) => bail!("objective: one of `ltl` or `hoa` is required"),
            _ => Ok(()),
        }
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if o.paper_scale {
            let Some(s) = self.paper_scale else {
                bail!("config has no [paper_scale] table")
            };
            self.episodes = s.episodes;
            self.horizon = s.horizon;
            if let Some(e) = s.eval_episodes {
                self.eval_episodes = e;
            }
        }
        let h = &mut self.hyper;
        set(&mut h.gamma, o.gamma.map(Some));
        set(&mut h.r_safety, o.r_safety);
        set(&mut h.r_ltl, o.r_ltl);
        set(&mut h.alpha, o.alpha);
        set(&mut h.epsilon, o.epsilon);
        set(&mut h.upsilon, o.upsilon);
        set(&mut h.tau_safety, o.tau_safety);
        set(&mut h.tau_ltl, o.tau_ltl);
        set(&mut self.episodes, o.episodes);
        set(&mut self.horizon, o.horizon);
        set(&mut self.seed, o.seed);
        set(&mut self.output, o.output.clone());
        Ok(())
    }

    /// Loads `path`, applies `o` and reads every referenced file.
    pub fn load(path: &Path, o: &Overrides) -> Result<Resolved> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut config =
            Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))?;
        config.apply(o)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut env = match &config.environment {
            EnvSource::Inline(spec) => spec.clone(),
            EnvSource::File { file } => {
                let file = base.join(file);
                let text = fs::read_to_string(&file)
                    .with_context(|| format!("reading environment {}", file.display()))?;
                EnvSpec::parse(&text)
                    .with_context(|| format!("parsing environment {}", file.display()))?
            }
        };
        if let Some(g) = o.gamma {
            match &mut env {
                EnvSpec::Grid(s) => s.gamma = g,
                EnvSpec::Explicit(s) => s.gamma = g,
            }
        }
        let hoa_text = match &config.objective.hoa {
            None => None,
            Some(file) => {
                let file = base.join(file);
                Some(
                    fs::read_to_string(&file)
                        .with_context(|| format!("reading automaton {}", file.display()))?,
                )
            }
        };
        Ok(Resolved {
            config,
            env,
            hoa_text,
        })
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

/// Pipeline inputs built from a resolved config.
pub struct Built {
    pub mdp: LabeledMdp,
    pub product: ProductMdp,
    pub hyper: Hyper,
}

impl Resolved {
    /// Everything a run needs in a canonical text form, for hashing.
    pub fn canonical(&self) -> Result<String> {
        let mut c = self.config.clone();
        c.environment = EnvSource::Inline(self.env.clone());
        c.output = PathBuf::new();
        let mut text = toml::to_string(&c)?;
        if let Some(h) = &self.hoa_text {
            text.push_str("\n# automaton\n");
            text.push_str(h);
        }
        Ok(text)
    }

    pub fn build(&self) -> Result<Built> {
        let c = &self.config;
        let mdp = self.env.build().context("stage environment")?;
        let ab = mdp.props().clone();
        let f = parse_ltl(&c.objective.safety, &ab).context("stage safety formula")?;
        let safety = safety_to_automaton(&f).context("stage safety translation")?;
        let ldba = match (&c.objective.ltl, &self.hoa_text) {
            (Some(text), _) => {
                let f = parse_ltl(text, &ab).context("stage objective formula")?;
                safety_to_automaton(&f)
                    .context("stage objective translation")?
                    .to_ldba()
            }
            (None, Some(text)) => parse_hoa(text).context("stage objective automaton")?,
            (None, None) => unreachable!("validated"),
        };
        let product = build_product(&mdp, &safety, &ldba).context("stage product")?;
        let h = &c.hyper;
        let hyper = Hyper {
            gamma: h.gamma.unwrap_or(mdp.gamma()),
            r_psi: h.r_safety,
            r_phi: h.r_ltl,
            alpha: h.alpha.resolve(c.episodes),
            epsilon: h.epsilon.resolve(c.episodes),
            upsilon: h.upsilon.resolve(c.episodes),
            tau_psi: h.tau_safety.resolve(c.episodes),
            tau_phi: h.tau_ltl.resolve(c.episodes),
            ltl_bootstrap_in_safe_set: h.ltl_bootstrap_in_safe_set,
        };
        hyper.validate().context("stage hyperparameters")?;
        Ok(Built {
            mdp,
            product,
            hyper,
        })
    }
}
