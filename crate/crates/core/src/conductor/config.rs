use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ConductorError;
use crate::agents::{AgentConfig, AgentKind, MAX_DENSITY_PER_MIN};
use crate::dsp::{DEFAULT_HOP_SIZE, DEFAULT_SAMPLE_RATE, DEFAULT_WINDOW_SIZE};
use crate::listening::SegmenterConfig;
use crate::netio::{DmxMapping, RoutingConfig};

/// An agent plus the corpus directory it plays from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "toml::Table", into = "toml::Table")]
pub struct AgentEntry {
    pub corpus: PathBuf,
    pub agent: AgentConfig,
}

impl TryFrom<toml::Table> for AgentEntry {
    type Error = String;

    fn try_from(mut t: toml::Table) -> Result<Self, String> {
        let corpus = match t.remove("corpus") {
            Some(toml::Value::String(s)) => PathBuf::from(s),
            Some(_) => return Err("agent corpus must be a path string".into()),
            None => return Err("agent is missing `corpus`".into()),
        };
        let agent = AgentConfig::deserialize(toml::Value::Table(t)).map_err(|e| e.to_string())?;
        Ok(Self { corpus, agent })
    }
}

impl From<AgentEntry> for toml::Table {
    fn from(e: AgentEntry) -> toml::Table {
        let mut t = match toml::Value::try_from(&e.agent) {
            Ok(toml::Value::Table(t)) => t,
            _ => toml::Table::new(),
        };
        t.insert("corpus".into(), toml::Value::String(e.corpus.to_string_lossy().into_owned()));
        t
    }
}

/// A live numeric parameter of one agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Param {
    Density,
    Continuity,
    /// Influence weight 0..4: rhythmic, spectral, melodic, harmonic.
    Weight(usize),
}

pub const WEIGHT_NAMES: [&str; 4] = ["rhythmic", "spectral", "melodic", "harmonic"];

impl Param {
    pub fn range(self) -> (f64, f64) {
        match self {
            Param::Density => (0.0, MAX_DENSITY_PER_MIN),
            Param::Continuity | Param::Weight(_) => (0.0, 1.0),
        }
    }

    pub fn applies_to(self, kind: AgentKind) -> bool {
        matches!(
            (self, kind),
            (Param::Density, AgentKind::Masom)
                | (Param::Continuity, AgentKind::Macat)
                | (Param::Weight(_), AgentKind::SpireMuse)
        )
    }
}

/// `<agent>.density`, `<agent>.continuity` or `<agent>.weights.<name>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamPath {
    pub agent: String,
    pub param: Param,
}

impl FromStr for ParamPath {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("parameter path {s:?} is not <agent>.density, <agent>.continuity or <agent>.weights.<name>");
        let (agent, rest) = s.split_once('.').ok_or_else(bad)?;
        let param = match rest {
            "density" => Param::Density,
            "continuity" => Param::Continuity,
            _ => {
                let w = rest.strip_prefix("weights.").ok_or_else(bad)?;
                Param::Weight(WEIGHT_NAMES.iter().position(|n| *n == w).ok_or_else(bad)?)
            }
        };
        if agent.is_empty() {
            return Err(bad());
        }
        Ok(ParamPath { agent: agent.to_string(), param })
    }
}

impl fmt::Display for ParamPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.param {
            Param::Density => write!(f, "{}.density", self.agent),
            Param::Continuity => write!(f, "{}.continuity", self.agent),
            Param::Weight(i) => write!(f, "{}.weights.{}", self.agent, WEIGHT_NAMES[i]),
        }
    }
}

/// Linear automation of one parameter over `[start_s, end_s]` of a scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ramp {
    pub path: String,
    pub from: f64,
    pub to: f64,
    pub start_s: f64,
    pub end_s: f64,
}

impl Ramp {
    pub fn value_at(&self, t_s: f64) -> f64 {
        if t_s <= self.start_s {
            self.from
        } else if t_s >= self.end_s {
            self.to
        } else {
            self.from + (self.to - self.from) * (t_s - self.start_s) / (self.end_s - self.start_s)
        }
    }
}

/// What a scene sets for one agent on entry. Missing fields keep their
/// current live value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneAgentParams {
    pub enable: Option<bool>,
    pub weights: Option<[f64; 4]>,
    pub density: Option<f64>,
    pub continuity: Option<f64>,
}

impl SceneAgentParams {
    pub fn base(&self, p: Param) -> Option<f64> {
        match p {
            Param::Density => self.density,
            Param::Continuity => self.continuity,
            Param::Weight(i) => self.weights.map(|w| w[i]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub name: String,
    /// 0 holds the scene until a trigger.
    #[serde(default)]
    pub duration_s: f64,
    #[serde(default)]
    pub agents: std::collections::BTreeMap<String, SceneAgentParams>,
    #[serde(default)]
    pub ramps: Vec<Ramp>,
}

/// Value of `path` at `t_s` into the scene: the ramp value if the path is
/// automated, else the scene's base value, else `None` (unchanged).
///
/// With several ramps on one path the latest one started wins; before the
/// first one its start value holds.
pub fn scene_value(scene: &Scene, path: &ParamPath, t_s: f64) -> Option<f64> {
    let key = path.to_string();
    let mut ramps: Vec<&Ramp> = scene.ramps.iter().filter(|r| r.path == key).collect();
    if ramps.is_empty() {
        return scene.agents.get(&path.agent).and_then(|a| a.base(path.param));
    }
    ramps.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    let r = ramps.iter().rev().find(|r| r.start_s <= t_s).unwrap_or(&ramps[0]);
    Some(r.value_at(t_s))
}

fn default_sample_rate() -> u32 {
    DEFAULT_SAMPLE_RATE
}
fn default_block() -> usize {
    DEFAULT_HOP_SIZE
}
fn default_window() -> usize {
    DEFAULT_WINDOW_SIZE
}
fn default_inputs() -> Vec<String> {
    vec!["performer".into()]
}

/// Session description, loaded from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    #[serde(default = "default_sample_rate")]
    pub sample_rate: u32,
    /// Samples per scheduling block; must equal the analysis hop.
    #[serde(default = "default_block")]
    pub block_size: usize,
    #[serde(default = "default_window")]
    pub window_size: usize,
    #[serde(default)]
    pub seed: u64,
    /// Live input names, in the order inputs are supplied.
    #[serde(default = "default_inputs")]
    pub inputs: Vec<String>,
    /// Affect model TOML; the bundled model when absent.
    #[serde(default)]
    pub affect_model: Option<PathBuf>,
    #[serde(default)]
    pub segmenter: SegmenterConfig,
    #[serde(default)]
    pub agents: Vec<AgentEntry>,
    #[serde(default)]
    pub routing: RoutingConfig,
    #[serde(default)]
    pub dmx: DmxMapping,
    pub scenes: Vec<Scene>,
}

impl SessionConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConductorError> {
        toml::from_str(text).map_err(|e| ConductorError::Config(vec![e.to_string()]))
    }

    /// Reads and validates a config file; relative paths in it are made
    /// relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConductorError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConductorError::Config(vec![format!("{}: {e}", path.display())]))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for a in &mut cfg.agents {
            if a.corpus.is_relative() {
                a.corpus = base.join(&a.corpus);
            }
        }
        if let Some(p) = &mut cfg.affect_model {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn agent(&self, id: &str) -> Option<&AgentEntry> {
        self.agents.iter().find(|a| a.agent.id == id)
    }

    /// Every problem found, not only the first.
    pub fn validate(&self) -> Result<(), ConductorError> {
        let mut errs = Vec::new();
        if self.scenes.is_empty() {
            errs.push("at least one scene is required".to_string());
        }
        if self.block_size != DEFAULT_HOP_SIZE {
            errs.push(format!("block_size {} must equal the analysis hop {DEFAULT_HOP_SIZE}", self.block_size));
        }
        if self.sample_rate == 0 {
            errs.push("sample_rate must be positive".into());
        }
        if !self.window_size.is_power_of_two() || self.window_size < self.block_size {
            errs.push(format!("window_size {} must be a power of two >= block_size", self.window_size));
        }
        if let Err(e) = self.segmenter.validate() {
            errs.push(format!("segmenter: {e}"));
        }
        let mut names = BTreeSet::new();
        for n in self.inputs.iter().chain(self.agents.iter().map(|a| &a.agent.id)) {
            if !names.insert(n.as_str()) {
                errs.push(format!("source name {n:?} is used twice"));
            }
            if n.is_empty() || n.contains('/') || n.contains(char::is_whitespace) {
                errs.push(format!("source name {n:?} must be non-empty without '/' or spaces"));
            }
        }
        for a in &self.agents {
            if let Err(e) = a.agent.validate() {
                errs.push(e.to_string());
            }
        }
        if let Err(e) = self.routing.validate() {
            errs.push(e.to_string());
        }
        for s in self.routing.destinations.keys() {
            if !names.contains(s.as_str()) {
                errs.push(format!("routing: unknown source {s:?}"));
            }
        }
        if let Err(e) = self.dmx.validate() {
            errs.push(e.to_string());
        }
        for e in &self.dmx.entries {
            if !names.contains(e.source.as_str()) {
                errs.push(format!("dmx channel {}: unknown source {:?}", e.channel, e.source));
            }
        }
        for (i, sc) in self.scenes.iter().enumerate() {
            self.validate_scene(i, sc, &mut errs);
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConductorError::Config(errs))
        }
    }

    fn validate_scene(&self, i: usize, sc: &Scene, errs: &mut Vec<String>) {
        let at = format!("scene {i} ({})", sc.name);
        if !(sc.duration_s >= 0.0 && sc.duration_s.is_finite()) {
            errs.push(format!("{at}: duration {} must be finite and >= 0", sc.duration_s));
        }
        let check = |path: &ParamPath, v: f64, errs: &mut Vec<String>| {
            let (lo, hi) = path.param.range();
            if !(lo..=hi).contains(&v) {
                errs.push(format!("{at}: {path} = {v} outside [{lo}, {hi}]"));
            }
        };
        for (id, p) in &sc.agents {
            let Some(a) = self.agent(id) else {
                errs.push(format!("{at}: unknown agent {id:?}"));
                continue;
            };
            let kind = a.agent.kind;
            for param in [Param::Density, Param::Continuity, Param::Weight(0), Param::Weight(1), Param::Weight(2), Param::Weight(3)] {
                let Some(v) = p.base(param) else { continue };
                let path = ParamPath { agent: id.clone(), param };
                if !param.applies_to(kind) {
                    // one message for the whole weights array
                    if !matches!(param, Param::Weight(k) if k > 0) {
                        errs.push(format!("{at}: {} is not a parameter of a {} agent", path, kind.as_str()));
                    }
                    continue;
                }
                check(&path, v, errs);
            }
            if p.weights.is_some_and(|w| w.iter().all(|x| *x == 0.0)) {
                errs.push(format!("{at}: {id} weights are all zero"));
            }
        }
        let mut windows: Vec<(String, f64, f64)> = Vec::new();
        for r in &sc.ramps {
            let path = match r.path.parse::<ParamPath>() {
                Ok(p) => p,
                Err(e) => {
                    errs.push(format!("{at}: {e}"));
                    continue;
                }
            };
            match self.agent(&path.agent) {
                None => errs.push(format!("{at}: ramp {}: unknown agent {:?}", r.path, path.agent)),
                Some(a) if !path.param.applies_to(a.agent.kind) => {
                    errs.push(format!("{at}: ramp {}: not a parameter of a {} agent", r.path, a.agent.kind.as_str()))
                }
                _ => {}
            }
            check(&path, r.from, errs);
            check(&path, r.to, errs);
            if !(r.start_s >= 0.0 && r.end_s >= r.start_s && r.end_s.is_finite()) {
                errs.push(format!("{at}: ramp {} window [{}, {}] is invalid", r.path, r.start_s, r.end_s));
            } else if sc.duration_s > 0.0 && r.end_s > sc.duration_s {
                errs.push(format!("{at}: ramp {} ends at {} after the scene's {} s", r.path, r.end_s, sc.duration_s));
            }
            let key = path.to_string();
            if windows.iter().any(|(k, s, e)| *k == key && r.start_s < *e && *s < r.end_s) {
                errs.push(format!("{at}: overlapping ramps on {key}"));
            }
            windows.push((key, r.start_s, r.end_s));
        }
    }

    /// Every automated or scene-set numeric parameter path.
    pub fn param_paths(&self) -> Vec<ParamPath> {
        let mut out = BTreeSet::new();
        for a in &self.agents {
            let params: &[Param] = match a.agent.kind {
                AgentKind::Masom => &[Param::Density],
                AgentKind::Macat => &[Param::Continuity],
                AgentKind::SpireMuse => &[Param::Weight(0), Param::Weight(1), Param::Weight(2), Param::Weight(3)],
            };
            for &param in params {
                out.insert(ParamPath { agent: a.agent.id.clone(), param });
            }
        }
        out.into_iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SAMPLE: &str = r#"
        seed = 3
        inputs = ["performer"]

        [[agents]]
        id = "muse"
        kind = "spiremuse"
        corpus = "corpus"

        [[agents]]
        id = "gen"
        kind = "masom"
        corpus = "corpus"
        density = 20

        [routing]
        feature_rate_hz = 30
        [routing.destinations]
        performer = ["127.0.0.1:9000"]

        [[dmx.entries]]
        source = "performer"
        feature = "loudness"
        channel = 1
        range = [-120.0, 0.0]

        [[scenes]]
        name = "intro"
        duration_s = 10
        [scenes.agents.gen]
        enable = true
        density = 10
        [[scenes.ramps]]
        path = "gen.density"
        from = 0
        to = 60
        start_s = 2
        end_s = 8

        [[scenes]]
        name = "hold"
    "#;

    fn scene() -> Scene {
        Scene {
            name: "s".into(),
            duration_s: 20.0,
            agents: [("a".to_string(), SceneAgentParams { density: Some(5.0), ..Default::default() })].into(),
            ramps: vec![Ramp { path: "a.continuity".into(), from: 0.0, to: 1.0, start_s: 0.0, end_s: 10.0 }],
        }
    }

    #[test]
    fn ramp_law() {
        let s = scene();
        let c: ParamPath = "a.continuity".parse().unwrap();
        assert_eq!(scene_value(&s, &c, 5.0), Some(0.5));
        assert_eq!(scene_value(&s, &c, 0.0), Some(0.0));
        assert_eq!(scene_value(&s, &c, 15.0), Some(1.0));
        let late = Ramp { start_s: 4.0, ..s.ramps[0].clone() };
        assert_eq!(late.value_at(1.0), 0.0);
        let d: ParamPath = "a.density".parse().unwrap();
        assert_eq!(scene_value(&s, &d, 3.0), Some(5.0));
        let w: ParamPath = "a.weights.melodic".parse().unwrap();
        assert_eq!(scene_value(&s, &w, 3.0), None);
    }

    #[test]
    fn paths_parse_and_print() {
        for p in ["x.density", "x.continuity", "x.weights.harmonic"] {
            assert_eq!(p.parse::<ParamPath>().unwrap().to_string(), p);
        }
        for p in ["x", ".density", "x.weights.tempo", "x.gain"] {
            assert!(p.parse::<ParamPath>().is_err(), "{p}");
        }
    }

    #[test]
    fn sample_config_loads() {
        let cfg = SessionConfig::from_toml(SAMPLE).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.agents[1].agent.density, 20.0);
        assert_eq!(cfg.agents[0].corpus, PathBuf::from("corpus"));
        assert_eq!(cfg.scenes[1].duration_s, 0.0);
        assert_eq!(cfg.block_size, 512);
        let back: SessionConfig = toml::from_str(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn validation_lists_all_problems() {
        let mut cfg = SessionConfig::from_toml(SAMPLE).unwrap();
        cfg.block_size = 256;
        cfg.scenes[0].ramps.push(Ramp { path: "muse.density".into(), from: 0.0, to: 1.0, start_s: 0.0, end_s: 1.0 });
        cfg.scenes[0].ramps.push(Ramp { path: "gen.density".into(), from: 0.0, to: 700.0, start_s: 5.0, end_s: 12.0 });
        cfg.scenes[0].agents.insert("ghost".into(), SceneAgentParams::default());
        let ConductorError::Config(errs) = cfg.validate().unwrap_err() else { panic!() };
        let all = errs.join("\n");
        for needle in ["block_size", "muse.density", "700", "after the scene", "overlapping", "ghost"] {
            assert!(all.contains(needle), "missing {needle}: {all}");
        }
        assert!(SessionConfig::from_toml("scenes = []\nbogus = 1").is_err());
        let none = SessionConfig::from_toml("scenes = []").unwrap();
        assert!(none.validate().is_err());
        assert!(SessionConfig::from_toml("[[scenes]]\nname='a'\n[[agents]]\nid='x'\nkind='masom'").is_err());
    }
}
