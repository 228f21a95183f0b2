use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::{scene_value, Param, ParamPath, SessionConfig};
use super::control::{Ack, Command, ControlError};
use super::ConductorError;
use crate::agents::{AgentKind, MacatAgent, MasomAgent, PlanEvent, PlanPlayer, PlaybackPlan, SpireMuseAgent};
use crate::corpus::{load_corpus, AudioStore, Corpus, LoadOptions};
use crate::dsp::{FrameAnalyzer, LOUDNESS_FLOOR_DB, NUM_BARK_BANDS};
use crate::listening::{annotate, AffectModel, InfluenceWeights, SegmentEvent, SourceId, StreamingSegmenter};
use crate::models::{load_models, models_present, TrainedModels};
use crate::netio::{
    artnet_packet, dmx_map, encode, feature_message, meter_message, FeatureSelector, OscBundle, OscMessage,
    OscPacket, RateTicker, Timetag,
};

/// What one agent plays from.
#[derive(Debug, Clone)]
pub struct AgentResources {
    pub corpus: Arc<Corpus>,
    pub store: Arc<AudioStore>,
    /// Required by the generator and the navigator.
    pub models: Option<Arc<TrainedModels>>,
}

/// Loads each agent's corpus, audio and models, sharing directories used
/// by several agents.
pub fn load_resources(cfg: &SessionConfig) -> Result<Vec<AgentResources>, ConductorError> {
    let mut cache: BTreeMap<PathBuf, AgentResources> = BTreeMap::new();
    let mut out = Vec::new();
    let mut errs = Vec::new();
    for a in &cfg.agents {
        let dir = &a.corpus;
        if !cache.contains_key(dir) {
            let res = (|| -> Result<AgentResources, String> {
                let corpus = load_corpus(dir, &LoadOptions::default()).map_err(|e| e.to_string())?;
                if corpus.engine.sample_rate != cfg.sample_rate || corpus.engine.hop_size != cfg.block_size {
                    return Err(format!(
                        "corpus runs at {} Hz / hop {}, session at {} Hz / block {}",
                        corpus.engine.sample_rate, corpus.engine.hop_size, cfg.sample_rate, cfg.block_size
                    ));
                }
                let store = AudioStore::open(&corpus, Some(dir)).map_err(|e| e.to_string())?;
                let models = if models_present(dir) {
                    Some(Arc::new(load_models(dir, &corpus).map_err(|e| e.to_string())?))
                } else {
                    None
                };
                Ok(AgentResources { corpus: Arc::new(corpus), store: Arc::new(store), models })
            })();
            match res {
                Ok(r) => {
                    cache.insert(dir.clone(), r);
                }
                Err(e) => {
                    errs.push(format!("agent {}: corpus {}: {e}", a.agent.id, dir.display()));
                    continue;
                }
            }
        }
        let r = cache[dir].clone();
        if a.agent.kind != AgentKind::SpireMuse && r.models.is_none() {
            errs.push(format!(
                "agent {}: corpus {} has no trained models (run `improv train` first)",
                a.agent.id,
                dir.display()
            ));
        }
        out.push(r);
    }
    if errs.is_empty() {
        Ok(out)
    } else {
        Err(ConductorError::Config(errs))
    }
}

/// One event-log record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    /// Session time of the event.
    pub t: f64,
    pub block: u64,
    pub source: String,
    pub kind: String,
    pub payload: Value,
}

impl LogRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("log record serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceMeter {
    pub loudness_db: f64,
    pub centroid_hz: f64,
    /// Affect of the last completed segment; `None` before the first.
    pub valence: Option<f64>,
    pub arousal: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub kind: AgentKind,
    pub enabled: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<[f64; 4]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub continuity: Option<f64>,
}

/// Live values as shown to control clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeterSnapshot {
    pub t: f64,
    pub scene: usize,
    pub scene_name: String,
    pub scenes: Vec<String>,
    pub sources: BTreeMap<String, SourceMeter>,
    pub agents: BTreeMap<String, AgentState>,
}

/// Everything one block produced.
#[derive(Debug, Clone, Default)]
pub struct BlockOutput {
    /// `(destination, encoded OSC bundle)`.
    pub osc: Vec<(String, Vec<u8>)>,
    /// ArtDMX packets.
    pub dmx: Vec<Vec<u8>>,
    /// `(agent index, event)` scheduled this block.
    pub plan: Vec<(usize, PlanEvent)>,
    /// One block of audio per agent.
    pub agent_audio: Vec<Vec<f32>>,
    pub meters: Option<MeterSnapshot>,
    pub log: Vec<LogRecord>,
}

enum Behaviour {
    Generator(MasomAgent),
    Responder(SpireMuseAgent),
    Navigator(MacatAgent),
}

struct AgentRuntime {
    id: String,
    kind: AgentKind,
    enabled: bool,
    behaviour: Behaviour,
    corpus: Arc<Corpus>,
    player: PlanPlayer,
    plan: PlaybackPlan,
    meter: SourceMeter,
    bark: [f64; NUM_BARK_BANDS],
}

impl AgentRuntime {
    fn state(&self) -> AgentState {
        let mut s = AgentState {
            kind: self.kind,
            enabled: self.enabled,
            weights: None,
            density: None,
            continuity: None,
        };
        match &self.behaviour {
            Behaviour::Generator(g) => s.density = Some(g.density()),
            Behaviour::Responder(r) => s.weights = Some(r.weights().to_array()),
            Behaviour::Navigator(n) => s.continuity = Some(n.continuity()),
        }
        s
    }
}

struct LiveInput {
    name: String,
    segmenter: StreamingSegmenter,
    meter: SourceMeter,
    bark: [f64; NUM_BARK_BANDS],
}

fn silent_meter() -> SourceMeter {
    SourceMeter {
        loudness_db: LOUDNESS_FLOOR_DB,
        centroid_hz: 0.0,
        valence: None,
        arousal: None,
    }
}

/// Per-agent seed: the session seed mixed with the agent's index and its
/// own seed.
pub fn agent_seed(session_seed: u64, index: usize, agent_seed: u64) -> u64 {
    let mut z = session_seed ^ agent_seed.rotate_left(29) ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The session runtime. Owns all live state and is advanced one block at
/// a time; commands are applied between blocks.
pub struct Session {
    cfg: SessionConfig,
    clock_origin_s: f64,
    block: u64,
    analyzer: FrameAnalyzer,
    affect: AffectModel,
    inputs: Vec<LiveInput>,
    agents: Vec<AgentRuntime>,
    scene: usize,
    scene_start_s: f64,
    automated: Vec<ParamPath>,
    feature_ticker: RateTicker,
    meter_ticker: RateTicker,
    dmx_sequence: u8,
    pending_log: Vec<LogRecord>,
}

impl Session {
    /// `resources[i]` backs `cfg.agents[i]`. `clock_origin_s` is added to
    /// session time for OSC timetags (0 in simulate mode).
    pub fn new(cfg: SessionConfig, resources: Vec<AgentResources>, clock_origin_s: f64) -> Result<Self, ConductorError> {
        cfg.validate()?;
        if resources.len() != cfg.agents.len() {
            return Err(ConductorError::Config(vec![format!(
                "{} agents configured but {} resource sets given",
                cfg.agents.len(),
                resources.len()
            )]));
        }
        let affect = match &cfg.affect_model {
            Some(p) => AffectModel::load(p).map_err(|e| ConductorError::Config(vec![format!("{}: {e}", p.display())]))?,
            None => AffectModel::bundled_default(),
        };
        let analyzer = FrameAnalyzer::new(cfg.sample_rate, cfg.window_size)
            .map_err(|e| ConductorError::Config(vec![e.to_string()]))?;
        let inputs = cfg
            .inputs
            .iter()
            .enumerate()
            .map(|(i, name)| LiveInput {
                name: name.clone(),
                segmenter: StreamingSegmenter::new(cfg.segmenter.clone(), cfg.sample_rate, cfg.block_size, SourceId(i as u32)),
                meter: silent_meter(),
                bark: [0.0; NUM_BARK_BANDS],
            })
            .collect();
        let mut errs = Vec::new();
        let mut agents = Vec::new();
        for (i, (entry, res)) in cfg.agents.iter().zip(resources).enumerate() {
            let mut ac = entry.agent.clone();
            ac.rng_seed = agent_seed(cfg.seed, i, ac.rng_seed);
            let behaviour = match ac.kind {
                AgentKind::SpireMuse => SpireMuseAgent::new(&ac, res.corpus.clone()).map(Behaviour::Responder),
                AgentKind::Masom | AgentKind::Macat => {
                    let Some(m) = &res.models else {
                        errs.push(format!("agent {}: no trained models", ac.id));
                        continue;
                    };
                    if ac.kind == AgentKind::Masom {
                        MasomAgent::new(&ac, res.corpus.clone(), &m.som, Arc::new(m.vmm.clone()), &m.labels, 0.0)
                            .map(Behaviour::Generator)
                    } else {
                        MacatAgent::new(&ac, res.corpus.clone(), Arc::new(m.oracle.clone()), m.oracle_segments.clone(), 0.0)
                            .map(Behaviour::Navigator)
                    }
                }
            };
            match behaviour {
                Ok(behaviour) => agents.push(AgentRuntime {
                    id: ac.id.clone(),
                    kind: ac.kind,
                    enabled: true,
                    behaviour,
                    corpus: res.corpus,
                    player: PlanPlayer::new(res.store, cfg.sample_rate),
                    plan: PlaybackPlan::new(),
                    meter: silent_meter(),
                    bark: [0.0; NUM_BARK_BANDS],
                }),
                Err(e) => errs.push(format!("agent {}: {e}", ac.id)),
            }
        }
        if !errs.is_empty() {
            return Err(ConductorError::Config(errs));
        }
        let mut s = Self {
            feature_ticker: RateTicker::new(cfg.routing.feature_rate_hz),
            meter_ticker: RateTicker::new(cfg.routing.meter_rate_hz),
            cfg,
            clock_origin_s,
            block: 0,
            analyzer,
            affect,
            inputs,
            agents,
            scene: 0,
            scene_start_s: 0.0,
            automated: Vec::new(),
            dmx_sequence: 0,
            pending_log: Vec::new(),
        };
        s.log(0.0, "session", "session_started", json!({"seed": s.cfg.seed, "agents": s.agents.iter().map(|a| &a.id).collect::<Vec<_>>(), "inputs": s.cfg.inputs}));
        s.enter_scene(0, "start");
        Ok(s)
    }

    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }

    /// Start time of the next block.
    pub fn clock_s(&self) -> f64 {
        self.block_time(self.block)
    }

    pub fn blocks_done(&self) -> u64 {
        self.block
    }

    fn block_time(&self, block: u64) -> f64 {
        (block * self.cfg.block_size as u64) as f64 / self.cfg.sample_rate as f64
    }

    pub fn scene(&self) -> usize {
        self.scene
    }

    pub fn agent_ids(&self) -> Vec<&str> {
        self.agents.iter().map(|a| a.id.as_str()).collect()
    }

    /// The plan each agent has emitted so far.
    pub fn plans(&self) -> Vec<(&str, &PlaybackPlan)> {
        self.agents.iter().map(|a| (a.id.as_str(), &a.plan)).collect()
    }

    pub fn agent_corpus(&self, index: usize) -> &Arc<Corpus> {
        &self.agents[index].corpus
    }

    fn log(&mut self, t: f64, source: &str, kind: &str, payload: Value) {
        self.pending_log.push(LogRecord {
            t,
            block: self.block,
            source: source.to_string(),
            kind: kind.to_string(),
            payload,
        });
    }

    fn agent_index(&self, id: &str) -> Result<usize, ControlError> {
        self.agents
            .iter()
            .position(|a| a.id == id)
            .ok_or_else(|| ControlError::UnknownAgent(id.to_string()))
    }

    fn enter_scene(&mut self, index: usize, cause: &str) {
        let now = self.clock_s();
        self.scene = index;
        self.scene_start_s = now;
        let sc = self.cfg.scenes[index].clone();
        for (id, p) in &sc.agents {
            let Ok(i) = self.agent_index(id) else { continue };
            if let Some(e) = p.enable {
                self.set_enabled(i, e, now);
            }
            if let Some(w) = p.weights {
                if let Behaviour::Responder(r) = &mut self.agents[i].behaviour {
                    let _ = r.set_weights(InfluenceWeights { rhythmic: w[0], spectral: w[1], melodic: w[2], harmonic: w[3] });
                }
            }
            for param in [Param::Density, Param::Continuity] {
                if let Some(v) = p.base(param) {
                    self.set_param(i, param, v, now);
                }
            }
        }
        self.automated = self
            .cfg
            .param_paths()
            .into_iter()
            .filter(|p| sc.ramps.iter().any(|r| r.path == p.to_string()))
            .collect();
        self.log(now, "conductor", "scene_changed", json!({"index": index, "name": sc.name, "cause": cause}));
    }

    fn set_enabled(&mut self, i: usize, on: bool, now: f64) {
        let a = &mut self.agents[i];
        if on && !a.enabled {
            match &mut a.behaviour {
                Behaviour::Generator(g) => g.reschedule(now),
                Behaviour::Navigator(n) => n.resume(now),
                Behaviour::Responder(_) => {}
            }
        }
        a.enabled = on;
    }

    /// Applies a value already known to be in range. Returns the value in
    /// effect.
    fn set_param(&mut self, i: usize, param: Param, v: f64, now: f64) -> f64 {
        match (&mut self.agents[i].behaviour, param) {
            (Behaviour::Generator(g), Param::Density) => {
                if g.density() != v {
                    g.set_density(v, now)
                } else {
                    v
                }
            }
            (Behaviour::Navigator(n), Param::Continuity) => n.set_continuity(v),
            (Behaviour::Responder(r), Param::Weight(k)) => {
                let mut w = r.weights().to_array();
                w[k] = v;
                if let Ok(w) = InfluenceWeights::from_array(w) {
                    let _ = r.set_weights(w);
                }
                r.weights().to_array()[k]
            }
            _ => v,
        }
    }

    fn apply_automation(&mut self) {
        let t = self.clock_s();
        let scene = self.cfg.scenes[self.scene].clone();
        for path in self.automated.clone() {
            if let (Some(v), Ok(i)) = (scene_value(&scene, &path, t - self.scene_start_s), self.agent_index(&path.agent)) {
                self.set_param(i, path.param, v, t);
            }
        }
    }

    /// Validates and applies a command now, which is always between blocks.
    /// `origin` names the client (e.g. `tcp`, `osc`) in the log.
    pub fn apply_control(&mut self, cmd: &Command, origin: &str) -> Result<Ack, ControlError> {
        let r = self.apply_inner(cmd);
        let t = self.clock_s();
        let payload = match &r {
            Ok(a) => json!({"command": cmd, "value": a.value, "clamped": a.clamped, "origin": origin}),
            Err(e) => json!({"command": cmd, "error": e.code(), "message": e.to_string(), "origin": origin}),
        };
        self.log(t, "control", "control", payload);
        r
    }

    fn apply_inner(&mut self, cmd: &Command) -> Result<Ack, ControlError> {
        let now = self.clock_s();
        let finite = |v: f64| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(ControlError::InvalidValue(format!("{v} is not finite")))
            }
        };
        let not_for = |a: &AgentRuntime| ControlError::NotApplicable {
            command: cmd.name(),
            agent: a.id.clone(),
            kind: a.kind.as_str(),
        };
        let ack = |value: Value, clamped: bool| Ack {
            op: cmd.name().to_string(),
            agent: cmd.agent().map(str::to_string),
            value,
            clamped,
            t: now,
        };
        match cmd {
            Command::TriggerScene { index } => {
                let count = self.cfg.scenes.len();
                if *index < 0 || *index as usize >= count {
                    return Err(ControlError::UnknownScene { index: *index, count });
                }
                self.enter_scene(*index as usize, "control");
                Ok(ack(json!(index), false))
            }
            Command::SetEnable { agent, enabled } => {
                let i = self.agent_index(agent)?;
                self.set_enabled(i, *enabled, now);
                Ok(ack(json!(enabled), false))
            }
            Command::SetWeights { agent, weights } => {
                let i = self.agent_index(agent)?;
                let a = &mut self.agents[i];
                let Behaviour::Responder(r) = &mut a.behaviour else { return Err(not_for(a)) };
                let mut w = [0.0; 4];
                let mut clamped = false;
                for (o, &v) in w.iter_mut().zip(weights) {
                    let v = finite(v)?;
                    *o = v.clamp(0.0, 1.0);
                    clamped |= *o != v;
                }
                let w = InfluenceWeights::from_array(w).map_err(|e| ControlError::InvalidValue(e.to_string()))?;
                r.set_weights(w).map_err(|e| ControlError::InvalidValue(e.to_string()))?;
                Ok(ack(json!(w.to_array()), clamped))
            }
            Command::SetDensity { agent, value } | Command::SetContinuity { agent, value } => {
                let param = if matches!(cmd, Command::SetDensity { .. }) { Param::Density } else { Param::Continuity };
                let i = self.agent_index(agent)?;
                if !param.applies_to(self.agents[i].kind) {
                    return Err(not_for(&self.agents[i]));
                }
                let v = finite(*value)?;
                let (lo, hi) = param.range();
                let c = v.clamp(lo, hi);
                let applied = self.set_param(i, param, c, now);
                Ok(ack(json!(applied), c != v))
            }
        }
    }

    /// Current live state.
    pub fn meters(&self) -> MeterSnapshot {
        MeterSnapshot {
            t: self.clock_s(),
            scene: self.scene,
            scene_name: self.cfg.scenes[self.scene].name.clone(),
            scenes: self.cfg.scenes.iter().map(|s| s.name.clone()).collect(),
            sources: self
                .inputs
                .iter()
                .map(|i| (i.name.clone(), i.meter.clone()))
                .chain(self.agents.iter().map(|a| (a.id.clone(), a.meter.clone())))
                .collect(),
            agents: self.agents.iter().map(|a| (a.id.clone(), a.state())).collect(),
        }
    }

    fn source_value(&self, name: &str, f: FeatureSelector) -> f64 {
        let (m, bark) = match self.inputs.iter().find(|i| i.name == name) {
            Some(i) => (&i.meter, &i.bark),
            None => match self.agents.iter().find(|a| a.id == name) {
                Some(a) => (&a.meter, &a.bark),
                None => return f64::NAN,
            },
        };
        match f {
            FeatureSelector::Loudness => m.loudness_db,
            FeatureSelector::Centroid => m.centroid_hz,
            FeatureSelector::Bark(b) => bark[b],
            FeatureSelector::Valence => m.valence.unwrap_or(f64::NAN),
            FeatureSelector::Arousal => m.arousal.unwrap_or(f64::NAN),
        }
    }

    fn handle_segment(&mut self, input: usize, ev: SegmentEvent, at_s: f64, out: &mut BlockOutput) {
        let SegmentEvent::Ended { segment, samples } = ev else { return };
        let feat = annotate(&samples, &self.analyzer, self.cfg.block_size, &self.affect);
        let (v, a) = (feat.valence(), feat.arousal());
        let name = self.inputs[input].name.clone();
        let m = &mut self.inputs[input].meter;
        m.valence = Some(v);
        m.arousal = Some(a);
        self.log(
            at_s,
            &name,
            "segment_ended",
            json!({"start_s": segment.start as f64 / self.cfg.sample_rate as f64, "duration_s": segment.duration_s, "valence": v, "arousal": a}),
        );
        for i in 0..self.agents.len() {
            let ag = &mut self.agents[i];
            if !ag.enabled {
                continue;
            }
            let Behaviour::Responder(r) = &mut ag.behaviour else { continue };
            match r.respond(&feat, at_s) {
                Ok((e, rank)) => self.schedule(i, e, json!({"rank": rank, "input": name}), out),
                Err(e) => log::warn!("responder {}: {e}", ag.id),
            }
        }
    }

    fn schedule(&mut self, i: usize, e: PlanEvent, extra: Value, out: &mut BlockOutput) {
        let a = &mut self.agents[i];
        if let Err(err) = a.player.add(&e).and_then(|_| a.plan.push(e.clone())) {
            log::warn!("agent {}: dropped event: {err}", a.id);
            return;
        }
        let f = &a.corpus.features[e.segment as usize];
        a.meter.valence = Some(f.valence());
        a.meter.arousal = Some(f.arousal());
        let mut payload = json!({"segment": e.segment, "start_s": e.start_s, "gain_db": e.gain_db, "crossfade_ms": e.crossfade_ms});
        if let (Some(p), Value::Object(x)) = (payload.as_object_mut(), extra) {
            p.extend(x);
        }
        let id = a.id.clone();
        self.log(e.start_s, &id, "plan", payload);
        out.plan.push((i, e));
    }

    /// Runs one block. `inputs[i]` is the block for live input `i`; short
    /// or missing blocks are zero-padded.
    pub fn advance(&mut self, inputs: &[&[f32]]) -> BlockOutput {
        let n = self.cfg.block_size;
        let t0 = self.clock_s();
        let t1 = self.block_time(self.block + 1);
        let mut out = BlockOutput::default();

        // scene timeline, then automation, both at the block boundary
        let mut hops = 0;
        loop {
            let sc = &self.cfg.scenes[self.scene];
            let due = sc.duration_s > 0.0 && t0 - self.scene_start_s >= sc.duration_s - 1e-9;
            if !due || self.scene + 1 >= self.cfg.scenes.len() || hops >= self.cfg.scenes.len() {
                break;
            }
            self.enter_scene(self.scene + 1, "timeline");
            hops += 1;
        }
        self.apply_automation();

        let mut buf = vec![0.0f32; n];
        for i in 0..self.inputs.len() {
            buf.fill(0.0);
            if let Some(b) = inputs.get(i) {
                let k = b.len().min(n);
                buf[..k].copy_from_slice(&b[..k]);
            }
            let (l, c, bark) = self.analyzer.describe_reactive(&buf);
            let inp = &mut self.inputs[i];
            inp.meter.loudness_db = l;
            inp.meter.centroid_hz = c;
            inp.bark = bark;
            for ev in inp.segmenter.push(&buf) {
                self.handle_segment(i, ev, t1, &mut out);
            }
        }

        for i in 0..self.agents.len() {
            if !self.agents[i].enabled {
                continue;
            }
            let events: Vec<(PlanEvent, Value)> = match &mut self.agents[i].behaviour {
                Behaviour::Generator(g) => g.step(t1).into_iter().map(|e| (e, json!({}))).collect(),
                Behaviour::Navigator(nv) => nv.step(t1).into_iter().map(|(s, e)| (e, json!({"state": s}))).collect(),
                Behaviour::Responder(_) => continue,
            };
            for (e, extra) in events {
                self.schedule(i, e, extra, &mut out);
            }
        }

        for a in &mut self.agents {
            let audio = a.player.next_block(n);
            let (l, c, bark) = self.analyzer.describe_reactive(&audio);
            a.meter.loudness_db = l;
            a.meter.centroid_hz = c;
            a.bark = bark;
            out.agent_audio.push(audio);
        }

        let mut per_dest: BTreeMap<String, Vec<OscMessage>> = BTreeMap::new();
        if self.feature_ticker.due(t0) {
            let all: Vec<(String, SourceMeter, [f64; NUM_BARK_BANDS])> = self
                .inputs
                .iter()
                .map(|i| (i.name.clone(), i.meter.clone(), i.bark))
                .chain(self.agents.iter().map(|a| (a.id.clone(), a.meter.clone(), a.bark)))
                .collect();
            for (name, m, bark) in &all {
                if let Some(dests) = self.cfg.routing.destinations.get(name) {
                    let msg = feature_message(name, m.loudness_db, m.centroid_hz, bark);
                    for d in dests {
                        per_dest.entry(d.clone()).or_default().push(msg.clone());
                    }
                }
            }
            if !self.cfg.dmx.entries.is_empty() {
                let mut ch = vec![0u8; self.cfg.dmx.frame_len()];
                for e in &self.cfg.dmx.entries {
                    ch[e.channel as usize - 1] = dmx_map(self.source_value(&e.source, e.feature), e);
                }
                match artnet_packet(self.dmx_sequence, self.cfg.routing.universe, &ch) {
                    Ok(p) => out.dmx.push(p),
                    Err(e) => log::warn!("dmx frame: {e}"),
                }
                self.dmx_sequence = self.dmx_sequence.wrapping_add(1);
            }
        }
        if self.meter_ticker.due(t0) {
            let snap = self.meters();
            for d in &self.cfg.routing.meter_destinations {
                for (name, m) in &snap.sources {
                    let affect = m.valence.zip(m.arousal);
                    per_dest
                        .entry(d.clone())
                        .or_default()
                        .push(meter_message(name, m.loudness_db, m.centroid_hz, affect));
                }
            }
            out.meters = Some(snap);
        }
        let timetag = Timetag::from_seconds(self.clock_origin_s + t0);
        for (d, msgs) in per_dest {
            let bundle = OscPacket::Bundle(OscBundle {
                timetag,
                elements: msgs.into_iter().map(OscPacket::Message).collect(),
            });
            match encode(&bundle) {
                Ok(b) => out.osc.push((d, b)),
                Err(e) => log::warn!("osc encode: {e}"),
            }
        }

        self.block += 1;
        out.log = std::mem::take(&mut self.pending_log);
        out
    }

    /// Closes open input segments (answered at the current clock) and
    /// ends the log.
    pub fn finish(&mut self) -> BlockOutput {
        let mut out = BlockOutput::default();
        let t = self.clock_s();
        for i in 0..self.inputs.len() {
            for ev in self.inputs[i].segmenter.flush() {
                self.handle_segment(i, ev, t, &mut out);
            }
        }
        let counts: BTreeMap<String, usize> = self.agents.iter().map(|a| (a.id.clone(), a.plan.len())).collect();
        self.log(t, "session", "session_ended", json!({"blocks": self.block, "events": counts}));
        out.log = std::mem::take(&mut self.pending_log);
        out
    }

    /// Log records not yet handed out by `advance` (e.g. controls applied
    /// since the last block).
    pub fn take_log(&mut self) -> Vec<LogRecord> {
        std::mem::take(&mut self.pending_log)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{toy_corpus, AgentConfig};
    use crate::conductor::{AgentEntry, Scene, SceneAgentParams};
    use crate::listening::{FeatureVector55, DURATION};
    use crate::models::{train_models, TrainOptions};
    use crate::signals;

    const SR: u32 = 48_000;
    const BLOCK_S: f64 = 512.0 / 48_000.0;

    fn resources(n: usize) -> AgentResources {
        let mut corpus = toy_corpus(n);
        let opts = TrainOptions { grid: Some((2, 1)), epochs: 5, ..Default::default() };
        let (models, _) = train_models(&mut corpus, &opts).unwrap();
        let audio = signals::sine(330.0, 0.3, n * SR as usize, SR);
        AgentResources {
            store: Arc::new(AudioStore::from_parts(vec![audio], corpus.segments.clone())),
            corpus: Arc::new(corpus),
            models: Some(Arc::new(models)),
        }
    }

    fn scene(name: &str, duration_s: f64) -> Scene {
        Scene { name: name.into(), duration_s, agents: Default::default(), ramps: vec![] }
    }

    fn config(kinds: &[(&str, AgentKind)], scenes: Vec<Scene>) -> SessionConfig {
        let mut cfg = SessionConfig::from_toml("[[scenes]]\nname = 'x'").unwrap();
        cfg.seed = 11;
        cfg.agents = kinds
            .iter()
            .map(|(id, k)| AgentEntry { corpus: "mem".into(), agent: AgentConfig::new(id, *k) })
            .collect();
        cfg.scenes = scenes;
        cfg
    }

    fn session(cfg: SessionConfig) -> Session {
        let res = (0..cfg.agents.len()).map(|_| resources(8)).collect();
        Session::new(cfg, res, 0.0).unwrap()
    }

    /// Quarter-second sine bursts every second then silence.
    fn performer(seconds: usize) -> Vec<f32> {
        let burst = signals::sine(440.0, 0.5, SR as usize / 4, SR);
        let parts: Vec<Vec<f32>> = (0..seconds).map(|_| signals::padded(&burst, 0, 3 * SR as usize / 4)).collect();
        signals::concat(&parts)
    }

    fn run(s: &mut Session, input: &[f32]) -> Vec<LogRecord> {
        let mut log = Vec::new();
        for b in input.chunks(512) {
            log.extend(s.advance(&[b]).log);
        }
        log.extend(s.finish().log);
        log
    }

    #[test]
    fn scene_switches_on_first_block_boundary_past_duration() {
        let mut s = session(config(&[], vec![scene("a", 0.1), scene("b", 0.0), scene("c", 0.0)]));
        let mut log = Vec::new();
        for _ in 0..20 {
            log.extend(s.advance(&[&[0.0; 512]]).log);
        }
        let changes: Vec<&LogRecord> = log.iter().filter(|r| r.kind == "scene_changed").collect();
        assert_eq!(changes.len(), 2);
        assert_eq!(changes[1].payload["name"], "b");
        let k = (0.1f64 / BLOCK_S).ceil() as u64;
        assert_eq!(changes[1].block, k);
        assert_eq!(changes[1].t, (k * 512) as f64 / SR as f64);
        assert_eq!(s.scene(), 1);
    }

    #[test]
    fn controls_ack_clamp_and_reject() {
        let mut s = session(config(
            &[("muse", AgentKind::SpireMuse), ("gen", AgentKind::Masom), ("nav", AgentKind::Macat)],
            vec![scene("a", 0.0), scene("b", 0.0), scene("c", 0.0)],
        ));
        let e = s.apply_control(&Command::TriggerScene { index: 99 }, "t").unwrap_err();
        assert_eq!(e, ControlError::UnknownScene { index: 99, count: 3 });
        let a = s.apply_control(&Command::SetDensity { agent: "gen".into(), value: -5.0 }, "t").unwrap();
        assert_eq!((a.value.clone(), a.clamped), (json!(0.0), true));
        let a = s.apply_control(&Command::SetWeights { agent: "muse".into(), weights: [1.0, 0.0, 0.0, 0.0] }, "t").unwrap();
        assert_eq!((a.value.clone(), a.clamped), (json!([1.0, 0.0, 0.0, 0.0]), false));
        let a = s.apply_control(&Command::SetWeights { agent: "muse".into(), weights: [2.0, 0.5, -1.0, 0.0] }, "t").unwrap();
        assert_eq!((a.value.clone(), a.clamped), (json!([1.0, 0.5, 0.0, 0.0]), true));
        assert!(matches!(
            s.apply_control(&Command::SetWeights { agent: "muse".into(), weights: [0.0; 4] }, "t"),
            Err(ControlError::InvalidValue(_))
        ));
        let a = s.apply_control(&Command::SetContinuity { agent: "nav".into(), value: 0.25 }, "t").unwrap();
        assert_eq!((a.value.clone(), a.clamped), (json!(0.25), false));
        assert!(matches!(
            s.apply_control(&Command::SetDensity { agent: "nav".into(), value: 1.0 }, "t"),
            Err(ControlError::NotApplicable { .. })
        ));
        assert_eq!(
            s.apply_control(&Command::SetEnable { agent: "ghost".into(), enabled: true }, "t").unwrap_err(),
            ControlError::UnknownAgent("ghost".into())
        );
        s.apply_control(&Command::TriggerScene { index: 2 }, "t").unwrap();
        let m = s.meters();
        assert_eq!(m.scene, 2);
        assert_eq!(m.agents["gen"].density, Some(0.0));
        assert_eq!(m.agents["muse"].weights, Some([1.0, 0.5, 0.0, 0.0]));
        let log = s.take_log();
        assert_eq!(log.iter().filter(|r| r.kind == "control").count(), 9);
    }

    #[test]
    fn disabled_agents_stay_silent_and_density_zero_stops_generator() {
        let mut s = session(config(&[("gen", AgentKind::Masom), ("nav", AgentKind::Macat)], vec![scene("a", 0.0)]));
        s.apply_control(&Command::SetDensity { agent: "gen".into(), value: 0.0 }, "t").unwrap();
        s.apply_control(&Command::SetEnable { agent: "nav".into(), enabled: false }, "t").unwrap();
        for _ in 0..400 {
            let o = s.advance(&[&[0.0; 512]]);
            assert!(o.plan.is_empty());
        }
        s.apply_control(&Command::SetEnable { agent: "nav".into(), enabled: true }, "t").unwrap();
        let o = s.advance(&[&[0.0; 512]]);
        assert_eq!(o.plan.len(), 1);
        assert!((o.plan[0].1.start_s - 400.0 * BLOCK_S).abs() < 1e-12);
    }

    #[test]
    fn meters_affect_matches_annotation_of_the_burst() {
        let mut s = session(config(&[], vec![scene("a", 0.0)]));
        let m = s.meters();
        assert_eq!((m.sources["performer"].valence, m.sources["performer"].arousal), (None, None));
        let input = performer(1);
        let log = run(&mut s, &input);
        let seg: Vec<&LogRecord> = log.iter().filter(|r| r.kind == "segment_ended").collect();
        assert_eq!(seg.len(), 1);
        let start = (seg[0].payload["start_s"].as_f64().unwrap() * SR as f64).round() as usize;
        let len = (seg[0].payload["duration_s"].as_f64().unwrap() * SR as f64).round() as usize;
        let analyzer = FrameAnalyzer::new(SR, 8192).unwrap();
        let f = annotate(&input[start..start + len], &analyzer, 512, &AffectModel::bundled_default());
        let m = s.meters();
        assert_eq!(m.sources["performer"].valence, Some(f.valence()));
        assert_eq!(m.sources["performer"].arousal, Some(f.arousal()));
    }

    #[test]
    fn responder_answers_in_the_block_that_closed_the_segment() {
        let cfg = config(&[("muse", AgentKind::SpireMuse)], vec![scene("a", 0.0)]);
        let log = run(&mut session(cfg), &performer(6));
        let ends: Vec<&LogRecord> = log.iter().filter(|r| r.kind == "segment_ended").collect();
        let plans: Vec<&LogRecord> = log.iter().filter(|r| r.kind == "plan").collect();
        assert_eq!(ends.len(), 6);
        assert_eq!(plans.len(), 6);
        for (e, p) in ends.iter().zip(&plans) {
            let lat = p.payload["start_s"].as_f64().unwrap() - e.t;
            assert!((0.0..=BLOCK_S).contains(&lat), "latency {lat}");
            assert_eq!(p.block, e.block);
        }
    }

    #[test]
    fn same_seed_same_log_and_bytes() {
        let cfg = config(
            &[("muse", AgentKind::SpireMuse), ("gen", AgentKind::Masom), ("nav", AgentKind::Macat)],
            vec![scene("a", 2.0), scene("b", 0.0)],
        );
        let mut cfg = cfg;
        cfg.routing.destinations.insert("performer".into(), vec!["127.0.0.1:9000".into()]);
        cfg.routing.destinations.insert("gen".into(), vec!["127.0.0.1:9001".into()]);
        cfg.routing.meter_destinations.push("127.0.0.1:9002".into());
        let go = |cfg: SessionConfig| {
            let mut s = session(cfg);
            let mut bytes = Vec::new();
            let mut lines = Vec::new();
            for b in performer(5).chunks(512) {
                let o = s.advance(&[b]);
                bytes.extend(o.osc.into_iter().flat_map(|(_, p)| p));
                lines.extend(o.log.iter().map(LogRecord::to_line));
            }
            (lines, bytes)
        };
        let a = go(cfg.clone());
        assert_eq!(a, go(cfg.clone()));
        assert!(a.0.iter().any(|l| l.contains("\"kind\":\"plan\"")));
        let mut other = cfg;
        other.seed = 12;
        assert_ne!(go(other).0, a.0);
    }

    #[test]
    fn meter_snapshot_rate() {
        for hz in [10.0, 30.0] {
            let mut cfg = config(&[], vec![scene("a", 0.0)]);
            cfg.routing.meter_rate_hz = hz;
            let mut s = session(cfg);
            let blocks = (10.0 / BLOCK_S) as usize;
            let n = (0..blocks).filter(|_| s.advance(&[&[0.0; 512]]).meters.is_some()).count();
            assert!((n as f64 - 10.0 * hz).abs() <= 1.0, "{hz} Hz: {n}");
        }
    }

    #[test]
    fn ramp_drives_density_and_scene_sets_weights() {
        let mut sc = scene("a", 10.0);
        sc.ramps.push(crate::conductor::Ramp { path: "gen.density".into(), from: 0.0, to: 60.0, start_s: 2.0, end_s: 6.0 });
        sc.agents.insert("muse".into(), SceneAgentParams { weights: Some([0.0, 1.0, 0.0, 0.0]), ..Default::default() });
        let mut s = session(config(&[("gen", AgentKind::Masom), ("muse", AgentKind::SpireMuse)], vec![sc]));
        assert_eq!(s.meters().agents["muse"].weights, Some([0.0, 1.0, 0.0, 0.0]));
        let at = |secs: f64, s: &mut Session| {
            while s.clock_s() < secs {
                s.advance(&[&[0.0; 512]]);
            }
            s.meters().agents["gen"].density.unwrap()
        };
        assert_eq!(at(1.0, &mut s), 0.0);
        let mid = at(4.0, &mut s);
        assert!((mid - 30.0).abs() < 60.0 * BLOCK_S / 4.0 + 1e-9, "{mid}");
        assert_eq!(at(7.0, &mut s), 60.0);
    }

    #[test]
    fn duration_weights_pick_nearest_duration() {
        let analyzer = FrameAnalyzer::new(SR, 8192).unwrap();
        let burst = signals::sine(440.0, 0.5, SR as usize * 6 / 10, SR);
        let q = annotate(&burst, &analyzer, 512, &AffectModel::bundled_default());
        // segment 0 matches in every block but duration; segment 2 only in duration
        let mut c = toy_corpus(3);
        let mut far = FeatureVector55([0.0; 55]);
        for (i, v) in far.0.iter_mut().enumerate() {
            *v = q.0[i] + 50.0;
        }
        c.features = vec![q.clone(), q.clone(), far];
        c.features[0].0[DURATION] = 0.2;
        c.features[1].0[DURATION] = 2.0;
        c.features[2].0[DURATION] = q.duration_s();
        c.norm = crate::corpus::normalization_stats(&c.features);
        let mut r = resources(3);
        r.corpus = Arc::new(c);
        let cfg = config(&[("muse", AgentKind::SpireMuse)], vec![scene("a", 0.0)]);
        let mut s = Session::new(cfg, vec![r], 0.0).unwrap();
        let input = signals::concat(&(0..8).map(|_| signals::padded(&burst, 0, SR as usize)).collect::<Vec<_>>());
        let top = |log: &[LogRecord]| -> Vec<u64> {
            log.iter()
                .filter(|r| r.kind == "plan" && r.payload["rank"] == 1)
                .map(|r| r.payload["segment"].as_u64().unwrap())
                .collect()
        };
        let half = input.len() / 2 / 512 * 512;
        let mut first = Vec::new();
        for b in input[..half].chunks(512) {
            first.extend(s.advance(&[b]).log);
        }
        s.apply_control(&Command::SetWeights { agent: "muse".into(), weights: [1.0, 0.0, 0.0, 0.0] }, "t").unwrap();
        let second = run(&mut s, &input[half..]);
        assert!(!top(&first).is_empty() && top(&first).iter().all(|&g| g == 0), "{:?}", top(&first));
        assert!(!top(&second).is_empty() && top(&second).iter().all(|&g| g == 2), "{:?}", top(&second));
    }
}
