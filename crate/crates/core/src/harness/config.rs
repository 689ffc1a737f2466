//! Experiment definitions: one `key=value` per line, `#` comments, dotted keys.
//!
//! ```text
//! env=urllc
//! agent=ql
//! episodes=3000
//! seeds=1,2,3
//! strategy.kind=multiaction
//! strategy.n=4
//! env.urllc.ap.1.rate=50e6
//! ```
//!
//! Later lines override earlier ones, which is how `--override` works.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::agents::{DqnConfig, EpsilonSchedule, QlConfig};
use crate::env::{dbm_per_hz_to_watts, AccessPoint, UavConfig, UrllcConfig};
use crate::error::{Error, Result};
use crate::trainer::{AgentConfig, StrategyConfig, StrategyKind, TrainerConfig};
use crate::twin::NoiseModel;

#[derive(Debug, Clone, PartialEq)]
pub enum EnvConfig {
    Urllc(UrllcConfig),
    Uav(UavConfig),
}

impl EnvConfig {
    pub fn name(&self) -> &'static str {
        match self {
            EnvConfig::Urllc(_) => "urllc",
            EnvConfig::Uav(_) => "uav",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub agent: AgentConfig,
    pub strategy: StrategyConfig,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Share of the episode budget spent decaying epsilon.
    pub eps_decay_fraction: f64,
    /// Absolute decay length; wins over the fraction when set.
    pub eps_decay_episodes: Option<u64>,
    pub noise: NoiseModel,
    pub domains: Option<usize>,
    pub mirror: bool,
    pub twin_capacity: usize,
    pub episodes: u64,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub window: usize,
    pub checkpoint: bool,
}

/// `(key, default, meaning)` for every scalar key; printed by `--help`.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("env", "(required)", "urllc | uav"),
    ("agent", "(required)", "ql | dqn"),
    ("episodes", "(required)", "episodes per seed"),
    ("seeds", "0", "comma-separated 64-bit seeds"),
    ("output_dir", "twinforge-out", "directory for CSV output"),
    ("checkpoint", "false", "write params_seed<SEED>.bin after training"),
    ("metrics.window", "10", "moving-average window of smoothed_reward"),
    ("strategy.kind", "physical", "physical | multiaction | prediction"),
    ("strategy.n", "2", "actions tried per state (multiaction)"),
    ("strategy.k", "1", "prediction depth"),
    ("strategy.trajectories", "4", "rollouts averaged per target"),
    ("strategy.sample_mix", "0.5", "share of each DQN batch drawn from twin buffers"),
    ("strategy.include_taken", "true", "mirror the taken action inside the fanout budget"),
    ("strategy.dt_warmup_episodes", "0", "physical-only episodes before twin work starts"),
    ("strategy.replicas", "1", "noisy domains averaged per fanout action"),
    ("epsilon.start", "1", "initial exploration rate"),
    ("epsilon.end", "0.05", "final exploration rate"),
    ("epsilon.decay_fraction", "0.6", "share of the budget spent decaying"),
    ("epsilon.decay_episodes", "(unset)", "absolute decay length, overrides the fraction"),
    ("twin.domains", "(strategy)", "divergent domains; default max(n, trajectories)"),
    ("twin.mirror", "true", "run the identical domain"),
    ("twin.capacity", "50000", "per-domain buffer capacity"),
    ("twin.noise.state_std", "0", "state noise std, one value or one per feature"),
    ("twin.noise.reward_std", "0", "reward noise std"),
    ("twin.noise.bias", "0", "state bias, one value or one per feature"),
    ("agent.ql.alpha", "0.1", "learning rate"),
    ("agent.ql.gamma", "0.95", "discount"),
    ("agent.ql.init_q", "0", "initial Q value"),
    ("agent.dqn.hidden", "128,128", "hidden layer widths"),
    ("agent.dqn.replay_capacity", "50000", "physical replay size"),
    ("agent.dqn.batch_size", "64", "minibatch size"),
    ("agent.dqn.lr", "0.001", "Adam step size"),
    ("agent.dqn.target_sync", "500", "updates between target copies"),
    ("agent.dqn.gamma", "0.95", "discount"),
    ("env.urllc.road_length", "2000", "meters"),
    ("env.urllc.speed", "20", "vehicle speed, m/s"),
    ("env.urllc.bins", "100", "tabular position bins"),
    ("env.urllc.task.size", "20000000", "bits"),
    ("env.urllc.task.deadline", "6", "seconds"),
    ("env.urllc.w_success", "100", "reward for meeting the deadline"),
    ("env.urllc.w_lat", "5", "penalty per second of latency"),
    ("env.urllc.w_cost", "1", "penalty per unit of access cost"),
    ("env.urllc.aps", "4", "access point count"),
    ("env.urllc.ap.<i>.position", "400,900,1300,1800", "meters along the road"),
    ("env.urllc.ap.<i>.radius", "250,150,300,200", "coverage half-width, m"),
    ("env.urllc.ap.<i>.rate", "10e6,50e6,20e6,40e6", "bit/s"),
    ("env.urllc.ap.<i>.cost", "1,4,2,3", "cost per second of transmission"),
    ("env.uav.arena", "100,100", "width,height in meters"),
    ("env.uav.hangar", "0,0", "UAV start point"),
    ("env.uav.uavs", "4", "UAV count (joint action space 5^uavs)"),
    ("env.uav.users", "10", "ground users"),
    ("env.uav.horizon", "100", "steps per episode"),
    ("env.uav.height", "5", "altitude, m"),
    ("env.uav.speed", "8", "m/s"),
    ("env.uav.dt", "1", "seconds per step"),
    ("env.uav.link.power", "0.1", "transmit power, W"),
    ("env.uav.link.noise_psd", "3.98107e-21", "noise density, W/Hz"),
    ("env.uav.link.noise_dbm_hz", "-174", "noise density, dBm/Hz (alternative)"),
    ("env.uav.link.bandwidth", "1e6", "per-user bandwidth, Hz"),
    ("env.uav.link.wavelength", "0.125", "carrier wavelength, m"),
    ("env.uav.link.tx_gain", "1", "linear antenna gain"),
    ("env.uav.link.rx_gain", "1", "linear antenna gain"),
];

/// Key table as aligned text.
pub fn key_help() -> String {
    let width = KEYS.iter().map(|k| k.0.len()).max().unwrap_or(0);
    let mut s = String::new();
    for (key, default, meaning) in KEYS {
        let _ = writeln!(s, "  {key:<width$}  {default:<20}  {meaning}");
    }
    s
}

trait Value: Sized {
    const EXPECTED: &'static str;
    fn parse(s: &str) -> Option<Self>;
}

impl Value for f64 {
    const EXPECTED: &'static str = "a finite number";
    fn parse(s: &str) -> Option<Self> {
        s.parse::<f64>().ok().filter(|v| v.is_finite())
    }
}

macro_rules! int_value {
    ($t:ty, $what:literal) => {
        impl Value for $t {
            const EXPECTED: &'static str = $what;
            fn parse(s: &str) -> Option<Self> {
                s.parse().ok()
            }
        }
    };
}
int_value!(u64, "a non-negative integer");
int_value!(u32, "a non-negative integer");
int_value!(usize, "a non-negative integer");

impl Value for bool {
    const EXPECTED: &'static str = "true or false";
    fn parse(s: &str) -> Option<Self> {
        match s {
            "true" | "1" | "yes" => Some(true),
            "false" | "0" | "no" => Some(false),
            _ => None,
        }
    }
}

impl Value for String {
    const EXPECTED: &'static str = "a string";
    fn parse(s: &str) -> Option<Self> {
        Some(s.to_string())
    }
}

impl Value for Vec<f64> {
    const EXPECTED: &'static str = "a comma-separated list of numbers";
    fn parse(s: &str) -> Option<Self> {
        s.split(',').map(|x| f64::parse(x.trim())).collect()
    }
}

impl Value for Vec<usize> {
    const EXPECTED: &'static str = "a comma-separated list of integers";
    fn parse(s: &str) -> Option<Self> {
        s.split(',').map(|x| x.trim().parse().ok()).collect()
    }
}

impl Value for Vec<u64> {
    const EXPECTED: &'static str = "a comma-separated list of integers";
    fn parse(s: &str) -> Option<Self> {
        s.split(',').map(|x| x.trim().parse().ok()).collect()
    }
}

impl Value for [f64; 2] {
    const EXPECTED: &'static str = "two comma-separated numbers";
    fn parse(s: &str) -> Option<Self> {
        let v = <Vec<f64>>::parse(s)?;
        <[f64; 2]>::try_from(v).ok()
    }
}

struct Entry {
    line: usize,
    value: String,
    used: bool,
}

struct Entries {
    map: BTreeMap<String, Entry>,
    last_line: usize,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        let mut last_line = 0;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            last_line = line;
            let body = raw.split_once('#').map_or(raw, |(b, _)| b).trim();
            if body.is_empty() {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(Error::Config(format!("line {line}: expected key=value, got `{body}`")));
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Config(format!("line {line}: empty key")));
            }
            map.insert(
                key.to_string(),
                Entry {
                    line,
                    value: value.trim().to_string(),
                    used: false,
                },
            );
        }
        Ok(Self { map, last_line })
    }

    fn get<T: Value>(&mut self, key: &str) -> Result<Option<T>> {
        let Some(e) = self.map.get_mut(key) else {
            return Ok(None);
        };
        e.used = true;
        T::parse(&e.value).map(Some).ok_or_else(|| Error::TypeMismatch {
            line: e.line,
            key: key.to_string(),
            expected: T::EXPECTED,
            value: e.value.clone(),
        })
    }

    fn set<T: Value>(&mut self, key: &str, slot: &mut T) -> Result<()> {
        if let Some(v) = self.get(key)? {
            *slot = v;
        }
        Ok(())
    }

    fn require<T: Value>(&mut self, key: &str) -> Result<T> {
        self.get(key)?.ok_or_else(|| Error::MissingRequired {
            line: self.last_line,
            key: key.to_string(),
        })
    }

    fn line_of(&self, key: &str) -> usize {
        self.map.get(key).map_or(self.last_line, |e| e.line)
    }

    fn mismatch(&self, key: &str, expected: &'static str) -> Error {
        let e = &self.map[key];
        Error::TypeMismatch {
            line: e.line,
            key: key.to_string(),
            expected,
            value: e.value.clone(),
        }
    }

    /// Fail on the first (by line) key nobody consumed.
    fn finish(self) -> Result<()> {
        let leftover = self
            .map
            .iter()
            .filter(|(_, e)| !e.used)
            .min_by_key(|(_, e)| e.line);
        match leftover {
            Some((key, e)) => Err(Error::UnknownKey {
                line: e.line,
                key: key.clone(),
            }),
            None => Ok(()),
        }
    }
}

fn parse_urllc(en: &mut Entries) -> Result<UrllcConfig> {
    let mut c = UrllcConfig::default();
    en.set("env.urllc.road_length", &mut c.road_length)?;
    en.set("env.urllc.speed", &mut c.vehicle_speed)?;
    en.set("env.urllc.bins", &mut c.bins)?;
    en.set("env.urllc.task.size", &mut c.task.size)?;
    en.set("env.urllc.task.deadline", &mut c.task.deadline)?;
    en.set("env.urllc.w_success", &mut c.w_success)?;
    en.set("env.urllc.w_lat", &mut c.w_lat)?;
    en.set("env.urllc.w_cost", &mut c.w_cost)?;
    let count = en.get::<usize>("env.urllc.aps")?.unwrap_or(c.aps.len());
    let defaults = std::mem::take(&mut c.aps);
    for i in 0..count {
        let key = |field: &str| format!("env.urllc.ap.{i}.{field}");
        let mut field = |name: &str, fallback: Option<f64>| -> Result<f64> {
            match en.get(&key(name))? {
                Some(v) => Ok(v),
                None => fallback.ok_or_else(|| Error::MissingRequired {
                    line: en.line_of("env.urllc.aps"),
                    key: key(name),
                }),
            }
        };
        let d = defaults.get(i);
        c.aps.push(AccessPoint {
            position: field("position", d.map(|a| a.position))?,
            radius: field("radius", d.map(|a| a.radius))?,
            rate: field("rate", d.map(|a| a.rate))?,
            cost_per_second: field("cost", d.map(|a| a.cost_per_second))?,
        });
    }
    Ok(c)
}

fn parse_uav(en: &mut Entries) -> Result<UavConfig> {
    let mut c = UavConfig::default();
    en.set("env.uav.arena", &mut c.arena)?;
    en.set("env.uav.hangar", &mut c.hangar)?;
    en.set("env.uav.uavs", &mut c.uavs)?;
    en.set("env.uav.users", &mut c.users)?;
    en.set("env.uav.horizon", &mut c.horizon)?;
    en.set("env.uav.height", &mut c.height)?;
    en.set("env.uav.speed", &mut c.speed)?;
    en.set("env.uav.dt", &mut c.dt)?;
    let l = &mut c.link;
    en.set("env.uav.link.power", &mut l.tx_power)?;
    if let Some(dbm) = en.get::<f64>("env.uav.link.noise_dbm_hz")? {
        l.noise_psd = dbm_per_hz_to_watts(dbm);
    }
    en.set("env.uav.link.noise_psd", &mut l.noise_psd)?;
    en.set("env.uav.link.bandwidth", &mut l.bandwidth)?;
    en.set("env.uav.link.wavelength", &mut l.carrier_wavelength)?;
    en.set("env.uav.link.tx_gain", &mut l.tx_gain)?;
    en.set("env.uav.link.rx_gain", &mut l.rx_gain)?;
    Ok(c)
}

fn check(result: Result<()>, line: usize) -> Result<()> {
    result.map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("line {line}: {msg}")),
        other => other,
    })
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut en = Entries::parse(text)?;
        let env_name: String = en.require("env")?;
        let agent_name: String = en.require("agent")?;
        let episodes: u64 = en.require("episodes")?;

        let env = match env_name.as_str() {
            "urllc" => EnvConfig::Urllc(parse_urllc(&mut en)?),
            "uav" => EnvConfig::Uav(parse_uav(&mut en)?),
            _ => return Err(en.mismatch("env", "urllc or uav")),
        };
        let agent = match agent_name.as_str() {
            "ql" => {
                let mut c = QlConfig::default();
                en.set("agent.ql.alpha", &mut c.alpha)?;
                en.set("agent.ql.gamma", &mut c.gamma)?;
                en.set("agent.ql.init_q", &mut c.init_q)?;
                AgentConfig::Ql(c)
            }
            "dqn" => {
                let mut c = DqnConfig::default();
                en.set("agent.dqn.hidden", &mut c.hidden)?;
                en.set("agent.dqn.replay_capacity", &mut c.replay_capacity)?;
                en.set("agent.dqn.batch_size", &mut c.batch_size)?;
                en.set("agent.dqn.lr", &mut c.lr)?;
                en.set("agent.dqn.target_sync", &mut c.target_sync)?;
                en.set("agent.dqn.gamma", &mut c.gamma)?;
                AgentConfig::Dqn(c)
            }
            _ => return Err(en.mismatch("agent", "ql or dqn")),
        };

        let mut strategy = StrategyConfig::default();
        if let Some(kind) = en.get::<String>("strategy.kind")? {
            strategy.kind = StrategyKind::parse(&kind)
                .ok_or_else(|| en.mismatch("strategy.kind", "physical, multiaction or prediction"))?;
        }
        en.set("strategy.n", &mut strategy.n)?;
        en.set("strategy.k", &mut strategy.k)?;
        en.set("strategy.trajectories", &mut strategy.trajectories)?;
        en.set("strategy.sample_mix", &mut strategy.sample_mix)?;
        en.set("strategy.include_taken", &mut strategy.include_taken)?;
        en.set("strategy.dt_warmup_episodes", &mut strategy.dt_warmup_episodes)?;
        en.set("strategy.replicas", &mut strategy.replicas)?;

        let mut cfg = ExperimentConfig {
            env,
            agent,
            strategy,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_decay_fraction: 0.6,
            eps_decay_episodes: en.get("epsilon.decay_episodes")?,
            noise: NoiseModel::zero(),
            domains: en.get("twin.domains")?,
            mirror: true,
            twin_capacity: 50_000,
            episodes,
            seeds: vec![0],
            output_dir: PathBuf::from("twinforge-out"),
            window: 10,
            checkpoint: false,
        };
        en.set("epsilon.start", &mut cfg.eps_start)?;
        en.set("epsilon.end", &mut cfg.eps_end)?;
        en.set("epsilon.decay_fraction", &mut cfg.eps_decay_fraction)?;
        en.set("twin.mirror", &mut cfg.mirror)?;
        en.set("twin.capacity", &mut cfg.twin_capacity)?;
        en.set("twin.noise.state_std", &mut cfg.noise.state_noise_std)?;
        en.set("twin.noise.reward_std", &mut cfg.noise.reward_noise_std)?;
        en.set("twin.noise.bias", &mut cfg.noise.bias)?;
        en.set("seeds", &mut cfg.seeds)?;
        if let Some(dir) = en.get::<String>("output_dir")? {
            cfg.output_dir = PathBuf::from(dir);
        }
        en.set("metrics.window", &mut cfg.window)?;
        en.set("checkpoint", &mut cfg.checkpoint)?;

        let line = |key: &str| en.line_of(key);
        let (env_line, agent_line, strategy_line) = (line("env"), line("agent"), line("strategy.kind"));
        let (episodes_line, eps_line) = (line("episodes"), line("epsilon.start"));
        en.finish()?;

        check(
            match &cfg.env {
                EnvConfig::Urllc(c) => c.validate(),
                EnvConfig::Uav(c) => c.validate(),
            },
            env_line,
        )?;
        if matches!(cfg.env, EnvConfig::Uav(_)) && matches!(cfg.agent, AgentConfig::Ql(_)) {
            return Err(Error::Config(format!(
                "line {agent_line}: agent=ql needs a discrete-state environment; use agent=dqn with env=uav"
            )));
        }
        if let AgentConfig::Dqn(c) = &cfg.agent {
            check(c.validate(), agent_line)?;
        }
        check(cfg.strategy.validate(), strategy_line)?;
        if cfg.episodes == 0 {
            return Err(Error::Config(format!("line {episodes_line}: episodes must be >= 1")));
        }
        if cfg.seeds.is_empty() {
            return Err(Error::Config("seeds must be nonempty".into()));
        }
        if cfg.window == 0 {
            return Err(Error::Config("metrics.window must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&cfg.eps_decay_fraction) {
            return Err(Error::Config("epsilon.decay_fraction must lie in [0, 1]".into()));
        }
        check(cfg.schedule().map(|_| ()), eps_line)?;
        check(cfg.noise.validate(), line_of_noise(text))?;
        Ok(cfg)
    }

    /// Exploration schedule implied by the epsilon keys and the budget.
    pub fn schedule(&self) -> Result<EpsilonSchedule> {
        let decay = self
            .eps_decay_episodes
            .unwrap_or_else(|| ((self.episodes as f64 * self.eps_decay_fraction).round() as u64).max(1));
        EpsilonSchedule::new(self.eps_start, self.eps_end, decay)
    }

    pub fn trainer_config(&self) -> Result<TrainerConfig> {
        let mut t = TrainerConfig::new(self.agent.clone(), self.schedule()?, self.strategy.clone());
        t.noise = self.noise.clone();
        t.domains = self.domains;
        t.mirror = self.mirror;
        t.twin_capacity = self.twin_capacity;
        Ok(t)
    }

    /// Apply `key=value` overrides as if appended to the file.
    pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut full = text.to_string();
        if !full.is_empty() && !full.ends_with('\n') {
            full.push('\n');
        }
        for o in overrides {
            full.push_str(o);
            full.push('\n');
        }
        Self::parse(&full)
    }

    /// Canonical text form; `parse(to_text())` reproduces the config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        let list = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        put("env", self.env.name().into());
        match &self.agent {
            AgentConfig::Ql(c) => {
                put("agent", "ql".into());
                put("agent.ql.alpha", c.alpha.to_string());
                put("agent.ql.gamma", c.gamma.to_string());
                put("agent.ql.init_q", c.init_q.to_string());
            }
            AgentConfig::Dqn(c) => {
                put("agent", "dqn".into());
                let hidden: Vec<String> = c.hidden.iter().map(usize::to_string).collect();
                put("agent.dqn.hidden", hidden.join(","));
                put("agent.dqn.replay_capacity", c.replay_capacity.to_string());
                put("agent.dqn.batch_size", c.batch_size.to_string());
                put("agent.dqn.lr", c.lr.to_string());
                put("agent.dqn.target_sync", c.target_sync.to_string());
                put("agent.dqn.gamma", c.gamma.to_string());
            }
        }
        put("episodes", self.episodes.to_string());
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        put("seeds", seeds.join(","));
        put("output_dir", self.output_dir.display().to_string());
        put("checkpoint", self.checkpoint.to_string());
        put("metrics.window", self.window.to_string());
        let st = &self.strategy;
        put("strategy.kind", st.kind.as_str().into());
        put("strategy.n", st.n.to_string());
        put("strategy.k", st.k.to_string());
        put("strategy.trajectories", st.trajectories.to_string());
        put("strategy.sample_mix", st.sample_mix.to_string());
        put("strategy.include_taken", st.include_taken.to_string());
        put("strategy.dt_warmup_episodes", st.dt_warmup_episodes.to_string());
        put("strategy.replicas", st.replicas.to_string());
        put("epsilon.start", self.eps_start.to_string());
        put("epsilon.end", self.eps_end.to_string());
        put("epsilon.decay_fraction", self.eps_decay_fraction.to_string());
        if let Some(d) = self.eps_decay_episodes {
            put("epsilon.decay_episodes", d.to_string());
        }
        if let Some(d) = self.domains {
            put("twin.domains", d.to_string());
        }
        put("twin.mirror", self.mirror.to_string());
        put("twin.capacity", self.twin_capacity.to_string());
        if !self.noise.state_noise_std.is_empty() {
            put("twin.noise.state_std", list(&self.noise.state_noise_std));
        }
        put("twin.noise.reward_std", self.noise.reward_noise_std.to_string());
        if !self.noise.bias.is_empty() {
            put("twin.noise.bias", list(&self.noise.bias));
        }
        match &self.env {
            EnvConfig::Urllc(c) => {
                put("env.urllc.road_length", c.road_length.to_string());
                put("env.urllc.speed", c.vehicle_speed.to_string());
                put("env.urllc.bins", c.bins.to_string());
                put("env.urllc.task.size", c.task.size.to_string());
                put("env.urllc.task.deadline", c.task.deadline.to_string());
                put("env.urllc.w_success", c.w_success.to_string());
                put("env.urllc.w_lat", c.w_lat.to_string());
                put("env.urllc.w_cost", c.w_cost.to_string());
                put("env.urllc.aps", c.aps.len().to_string());
                for (i, ap) in c.aps.iter().enumerate() {
                    put(&format!("env.urllc.ap.{i}.position"), ap.position.to_string());
                    put(&format!("env.urllc.ap.{i}.radius"), ap.radius.to_string());
                    put(&format!("env.urllc.ap.{i}.rate"), ap.rate.to_string());
                    put(&format!("env.urllc.ap.{i}.cost"), ap.cost_per_second.to_string());
                }
            }
            EnvConfig::Uav(c) => {
                put("env.uav.arena", list(&c.arena));
                put("env.uav.hangar", list(&c.hangar));
                put("env.uav.uavs", c.uavs.to_string());
                put("env.uav.users", c.users.to_string());
                put("env.uav.horizon", c.horizon.to_string());
                put("env.uav.height", c.height.to_string());
                put("env.uav.speed", c.speed.to_string());
                put("env.uav.dt", c.dt.to_string());
                put("env.uav.link.power", c.link.tx_power.to_string());
                put("env.uav.link.noise_psd", c.link.noise_psd.to_string());
                put("env.uav.link.bandwidth", c.link.bandwidth.to_string());
                put("env.uav.link.wavelength", c.link.carrier_wavelength.to_string());
                put("env.uav.link.tx_gain", c.link.tx_gain.to_string());
                put("env.uav.link.rx_gain", c.link.rx_gain.to_string());
            }
        }
        s
    }
}

fn line_of_noise(text: &str) -> usize {
    text.lines()
        .position(|l| l.trim_start().starts_with("twin.noise."))
        .map_or(0, |i| i + 1)
}
