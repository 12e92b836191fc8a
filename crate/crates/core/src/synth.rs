//! Deterministic synthetic trace generation: a points-of-interest model
//! whose defaults reproduce the qualitative findings on real lands
//! (hotspot concentration, short trips, sub-hour sessions), plus a classic
//! random-waypoint baseline.
//!
//! Generation is driven by a ChaCha8 stream cipher RNG seeded from the
//! config's `seed`, so identical configs produce byte-identical traces.

use std::collections::BTreeMap;
use std::io::{self, BufRead};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use thiserror::Error;

use crate::model::{LandConfig, Position, Snapshot, TraceSet, UserId};

/// Default ground elevation for generated avatars, in meters.
pub const DEFAULT_ELEVATION: f64 = 22.0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("missing `model=` key")]
    MissingModel,
    #[error("unknown model {0:?} (expected poi or rwp)")]
    UnknownModel(String),
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("invalid {field}: {reason}")]
    InvalidValue { field: &'static str, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue {
        field,
        reason: reason.into(),
    }
}

/// A point of interest: users gravitate to a uniform point within `radius`
/// of `center`, chosen with probability proportional to `weight`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hotspot {
    pub center: Position,
    pub weight: f64,
    pub radius: f64,
}

/// Points-of-interest mobility model configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PoiModelConfig {
    pub land: LandConfig,
    pub tau: u64,
    /// Simulated span in seconds; snapshots cover [0, duration) on the τ grid.
    pub duration: u64,
    /// Memoryless entry rate, users per second.
    pub user_arrival_rate: f64,
    /// Mean of the exponential session length, seconds.
    pub mean_session: f64,
    pub hotspots: Vec<Hotspot>,
    /// Walking speed, meters per second.
    pub speed: f64,
    /// Pause at each reached target: uniform in [min, max] seconds.
    pub pause_range: (f64, f64),
    pub seed: u64,
}

impl Default for PoiModelConfig {
    fn default() -> Self {
        PoiModelConfig {
            land: LandConfig::new("synthetic", LandConfig::DEFAULT_EXTENT).unwrap(),
            tau: 10,
            duration: 86_400,
            // about 100 users over a simulated day
            user_arrival_rate: 100.0 / 86_400.0,
            // ~91% of sessions stay under one hour
            mean_session: 1500.0,
            hotspots: vec![
                Hotspot {
                    center: Position::new(64.0, 64.0, DEFAULT_ELEVATION),
                    weight: 5.0,
                    radius: 15.0,
                },
                Hotspot {
                    center: Position::new(192.0, 64.0, DEFAULT_ELEVATION),
                    weight: 3.0,
                    radius: 15.0,
                },
                Hotspot {
                    center: Position::new(128.0, 192.0, DEFAULT_ELEVATION),
                    weight: 1.0,
                    radius: 15.0,
                },
            ],
            speed: 3.0,
            pause_range: (30.0, 300.0),
            seed: 42,
        }
    }
}

impl PoiModelConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.tau == 0 {
            return Err(invalid("tau", "must be positive"));
        }
        if !(self.user_arrival_rate.is_finite() && self.user_arrival_rate > 0.0) {
            return Err(invalid("arrival_rate", "must be positive"));
        }
        if !(self.mean_session.is_finite() && self.mean_session > 0.0) {
            return Err(invalid("mean_session", "must be positive"));
        }
        if !(self.speed.is_finite() && self.speed > 0.0) {
            return Err(invalid("speed", "must be positive"));
        }
        validate_pause(self.pause_range)?;
        if self.hotspots.is_empty() {
            return Err(invalid("hotspot", "at least one hotspot is required"));
        }
        for h in &self.hotspots {
            if !(h.weight.is_finite() && h.weight > 0.0) {
                return Err(invalid("hotspot", "weight must be positive"));
            }
            if !(h.radius.is_finite() && h.radius > 0.0) {
                return Err(invalid("hotspot", "radius must be positive"));
            }
            let c = h.center;
            if !c.is_finite()
                || c.x < 0.0
                || c.x > self.land.extent
                || c.y < 0.0
                || c.y > self.land.extent
            {
                return Err(invalid("hotspot", "center outside land bounds"));
            }
        }
        Ok(())
    }
}

/// Random-waypoint baseline configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RwpModelConfig {
    pub land: LandConfig,
    pub tau: u64,
    pub duration: u64,
    /// Users present for the whole simulated span.
    pub user_count: usize,
    /// Per-leg speed: uniform in [min, max] meters per second.
    pub speed_range: (f64, f64),
    pub pause_range: (f64, f64),
    pub seed: u64,
}

impl Default for RwpModelConfig {
    fn default() -> Self {
        RwpModelConfig {
            land: LandConfig::new("synthetic", LandConfig::DEFAULT_EXTENT).unwrap(),
            tau: 10,
            duration: 86_400,
            user_count: 100,
            speed_range: (1.0, 3.0),
            pause_range: (0.0, 120.0),
            seed: 42,
        }
    }
}

impl RwpModelConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.tau == 0 {
            return Err(invalid("tau", "must be positive"));
        }
        let (lo, hi) = self.speed_range;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
            return Err(invalid("speed_min/speed_max", "need 0 < min <= max"));
        }
        validate_pause(self.pause_range)?;
        Ok(())
    }
}

fn validate_pause(range: (f64, f64)) -> Result<(), ConfigError> {
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) {
        return Err(invalid("pause_min/pause_max", "need 0 <= min <= max"));
    }
    Ok(())
}

// One leg of a trajectory over continuous time [t0, t1).
struct Segment {
    t0: f64,
    t1: f64,
    from: Position,
    to: Position,
}

impl Segment {
    fn pause(at: Position, t0: f64, t1: f64) -> Self {
        Segment {
            t0,
            t1,
            from: at,
            to: at,
        }
    }

    fn at(&self, t: f64) -> Position {
        if self.t1 <= self.t0 {
            return self.to;
        }
        let f = ((t - self.t0) / (self.t1 - self.t0)).clamp(0.0, 1.0);
        Position::new(
            self.from.x + (self.to.x - self.from.x) * f,
            self.from.y + (self.to.y - self.from.y) * f,
            self.from.z + (self.to.z - self.from.z) * f,
        )
    }
}

// Samples a trajectory on the τ grid over [enter, leave) and records the
// positions, quantized to the stored precision. The exact origin is nudged
// away so the seated sentinel is never emitted.
fn record_samples(
    snapshots: &mut [Snapshot],
    user: &UserId,
    segments: &[Segment],
    enter: f64,
    leave: f64,
    tau: u64,
) {
    if segments.is_empty() {
        return;
    }
    let mut idx = (enter / tau as f64).ceil() as u64;
    let mut seg = 0usize;
    loop {
        let t = (idx * tau) as f64;
        if t >= leave || (idx as usize) >= snapshots.len() {
            break;
        }
        while seg + 1 < segments.len() && segments[seg].t1 <= t {
            seg += 1;
        }
        let mut p = segments[seg].at(t).quantized();
        if p.is_sit_sentinel() {
            p.z = 0.001;
        }
        snapshots[idx as usize].insert(user.clone(), Some(p));
        idx += 1;
    }
}

fn grid_snapshots(duration: u64, tau: u64) -> Vec<Snapshot> {
    (0..duration.div_ceil(tau)).map(|i| Snapshot::new(i * tau)).collect()
}

fn user_name(i: usize) -> UserId {
    UserId::new(format!("u{:05}", i)).expect("generated ids are valid")
}

fn dist3(p: Position, q: Position) -> f64 {
    crate::model::distance(p, q)
}

/// Generates a points-of-interest trace.
///
/// Users arrive by a Poisson process, stay for an exponential session,
/// and alternate weighted-hotspot walks with uniform pauses. Snapshots
/// cover [0, duration) on the τ grid; users who arrive late or leave early
/// simply do not appear in boundary snapshots.
pub fn generate_poi(cfg: &PoiModelConfig) -> Result<TraceSet, ConfigError> {
    cfg.validate()?;
    let mut snapshots = grid_snapshots(cfg.duration, cfg.tau);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let duration = cfg.duration as f64;

    let mut arrivals = Vec::new();
    if cfg.duration > 0 {
        let inter_arrival = Exp::new(cfg.user_arrival_rate).expect("validated rate");
        let mut t = inter_arrival.sample(&mut rng);
        while t < duration {
            arrivals.push(t);
            t += inter_arrival.sample(&mut rng);
        }
    }

    let session = Exp::new(1.0 / cfg.mean_session).expect("validated mean");
    let weights = WeightedIndex::new(cfg.hotspots.iter().map(|h| h.weight))
        .expect("validated weights");

    for (i, &arrival) in arrivals.iter().enumerate() {
        let user = user_name(i);
        let leave = (arrival + session.sample(&mut rng)).min(duration);

        // entry point: uniform over the land at the first target's elevation
        let first_target = sample_target(&cfg.hotspots, &weights, cfg.land.extent, &mut rng);
        let entry = Position::new(
            rng.gen_range(0.0..=cfg.land.extent),
            rng.gen_range(0.0..=cfg.land.extent),
            first_target.z,
        );

        let mut segments = Vec::new();
        let mut now = arrival;
        let mut pos = entry;
        let mut target = first_target;
        while now < leave {
            let walk_time = dist3(pos, target) / cfg.speed;
            segments.push(Segment {
                t0: now,
                t1: now + walk_time,
                from: pos,
                to: target,
            });
            now += walk_time;
            pos = target;
            if now >= leave {
                break;
            }
            let mut pause = rng.gen_range(cfg.pause_range.0..=cfg.pause_range.1);
            if walk_time + pause < 1e-6 {
                pause = 1e-6; // guard against zero-length segment loops
            }
            segments.push(Segment::pause(pos, now, now + pause));
            now += pause;
            target = sample_target(&cfg.hotspots, &weights, cfg.land.extent, &mut rng);
        }
        record_samples(&mut snapshots, &user, &segments, arrival, leave, cfg.tau);
    }

    Ok(TraceSet::new(cfg.land.clone(), cfg.tau, snapshots).expect("generated trace is valid"))
}

fn sample_target(
    hotspots: &[Hotspot],
    weights: &WeightedIndex<f64>,
    extent: f64,
    rng: &mut ChaCha8Rng,
) -> Position {
    let h = &hotspots[weights.sample(rng)];
    let r = h.radius * rng.gen_range(0.0..=1.0f64).sqrt();
    let theta = rng.gen_range(0.0..std::f64::consts::TAU);
    Position::new(
        (h.center.x + r * theta.cos()).clamp(0.0, extent),
        (h.center.y + r * theta.sin()).clamp(0.0, extent),
        h.center.z,
    )
}

/// Generates a classic random-waypoint trace: every user present for the
/// whole span, walking between uniform waypoints at a uniform per-leg speed
/// with uniform pauses.
pub fn generate_rwp(cfg: &RwpModelConfig) -> Result<TraceSet, ConfigError> {
    cfg.validate()?;
    let mut snapshots = grid_snapshots(cfg.duration, cfg.tau);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let duration = cfg.duration as f64;

    for i in 0..cfg.user_count {
        let user = user_name(i);
        let mut pos = Position::new(
            rng.gen_range(0.0..=cfg.land.extent),
            rng.gen_range(0.0..=cfg.land.extent),
            DEFAULT_ELEVATION,
        );
        let mut segments = Vec::new();
        let mut now = 0.0;
        while now < duration {
            let waypoint = Position::new(
                rng.gen_range(0.0..=cfg.land.extent),
                rng.gen_range(0.0..=cfg.land.extent),
                DEFAULT_ELEVATION,
            );
            let speed = rng.gen_range(cfg.speed_range.0..=cfg.speed_range.1);
            let walk_time = dist3(pos, waypoint) / speed;
            segments.push(Segment {
                t0: now,
                t1: now + walk_time,
                from: pos,
                to: waypoint,
            });
            now += walk_time;
            pos = waypoint;
            if now >= duration {
                break;
            }
            let mut pause = rng.gen_range(cfg.pause_range.0..=cfg.pause_range.1);
            if walk_time + pause < 1e-6 {
                pause = 1e-6; // guard against zero-length segment loops
            }
            segments.push(Segment::pause(pos, now, now + pause));
            now += pause;
        }
        record_samples(&mut snapshots, &user, &segments, 0.0, duration, cfg.tau);
    }

    Ok(TraceSet::new(cfg.land.clone(), cfg.tau, snapshots).expect("generated trace is valid"))
}

/// A parsed model configuration of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelConfig {
    Poi(PoiModelConfig),
    Rwp(RwpModelConfig),
}

impl ModelConfig {
    pub fn generate(&self) -> Result<TraceSet, ConfigError> {
        match self {
            ModelConfig::Poi(cfg) => generate_poi(cfg),
            ModelConfig::Rwp(cfg) => generate_rwp(cfg),
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            ModelConfig::Poi(cfg) => cfg.seed = seed,
            ModelConfig::Rwp(cfg) => cfg.seed = seed,
        }
    }
}

/// Parses a flat `key=value` model config. Blank lines and lines starting
/// with `#` are skipped; unknown keys are rejected. Hotspots are given as
/// repeated `hotspot=<x>:<y>:<z>:<weight>:<radius>` lines. Keys not present
/// keep their model defaults.
pub fn parse_model_config<R: BufRead>(reader: R) -> Result<ModelConfig, ConfigError> {
    let mut pairs: Vec<(String, String, usize)> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Format {
            line: i + 1,
            msg: "expected key=value".into(),
        })?;
        pairs.push((k.trim().to_string(), v.trim().to_string(), i + 1));
    }
    let model = pairs
        .iter()
        .find(|(k, _, _)| k == "model")
        .ok_or(ConfigError::MissingModel)?
        .1
        .clone();
    match model.as_str() {
        "poi" => parse_poi_pairs(&pairs).map(ModelConfig::Poi),
        "rwp" => parse_rwp_pairs(&pairs).map(ModelConfig::Rwp),
        other => Err(ConfigError::UnknownModel(other.to_string())),
    }
}

fn parse_f64(field: &'static str, v: &str) -> Result<f64, ConfigError> {
    v.parse().map_err(|_| invalid(field, format!("bad number {:?}", v)))
}

fn parse_u64(field: &'static str, v: &str) -> Result<u64, ConfigError> {
    v.parse().map_err(|_| invalid(field, format!("bad integer {:?}", v)))
}

fn parse_poi_pairs(pairs: &[(String, String, usize)]) -> Result<PoiModelConfig, ConfigError> {
    let mut cfg = PoiModelConfig::default();
    let mut hotspots = Vec::new();
    for (k, v, _) in pairs {
        match k.as_str() {
            "model" => {}
            "land_name" => cfg.land.name = v.clone(),
            "extent" => {
                cfg.land = LandConfig::new(cfg.land.name.clone(), parse_f64("extent", v)?)
                    .map_err(|e| invalid("extent", e.to_string()))?
            }
            "tau" => cfg.tau = parse_u64("tau", v)?,
            "duration" => cfg.duration = parse_u64("duration", v)?,
            "arrival_rate" => cfg.user_arrival_rate = parse_f64("arrival_rate", v)?,
            "mean_session" => cfg.mean_session = parse_f64("mean_session", v)?,
            "speed" => cfg.speed = parse_f64("speed", v)?,
            "pause_min" => cfg.pause_range.0 = parse_f64("pause_min", v)?,
            "pause_max" => cfg.pause_range.1 = parse_f64("pause_max", v)?,
            "seed" => cfg.seed = parse_u64("seed", v)?,
            "hotspot" => hotspots.push(parse_hotspot(v)?),
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
    }
    if !hotspots.is_empty() {
        cfg.hotspots = hotspots;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_hotspot(v: &str) -> Result<Hotspot, ConfigError> {
    let parts: Vec<&str> = v.split(':').collect();
    if parts.len() != 5 {
        return Err(invalid("hotspot", "expected <x>:<y>:<z>:<weight>:<radius>"));
    }
    let num = |s: &str| parse_f64("hotspot", s);
    Ok(Hotspot {
        center: Position::new(num(parts[0])?, num(parts[1])?, num(parts[2])?),
        weight: num(parts[3])?,
        radius: num(parts[4])?,
    })
}

fn parse_rwp_pairs(pairs: &[(String, String, usize)]) -> Result<RwpModelConfig, ConfigError> {
    let mut cfg = RwpModelConfig::default();
    for (k, v, _) in pairs {
        match k.as_str() {
            "model" => {}
            "land_name" => cfg.land.name = v.clone(),
            "extent" => {
                cfg.land = LandConfig::new(cfg.land.name.clone(), parse_f64("extent", v)?)
                    .map_err(|e| invalid("extent", e.to_string()))?
            }
            "tau" => cfg.tau = parse_u64("tau", v)?,
            "duration" => cfg.duration = parse_u64("duration", v)?,
            "user_count" => cfg.user_count = parse_u64("user_count", v)? as usize,
            "speed_min" => cfg.speed_range.0 = parse_f64("speed_min", v)?,
            "speed_max" => cfg.speed_range.1 = parse_f64("speed_max", v)?,
            "pause_min" => cfg.pause_range.0 = parse_f64("pause_min", v)?,
            "pause_max" => cfg.pause_range.1 = parse_f64("pause_max", v)?,
            "seed" => cfg.seed = parse_u64("seed", v)?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Per-user presence spans of a generated trace, handy for tests.
pub fn presence_spans(trace: &TraceSet) -> BTreeMap<UserId, (u64, u64)> {
    let mut spans: BTreeMap<UserId, (u64, u64)> = BTreeMap::new();
    for snap in trace.snapshots() {
        for (user, _) in snap.entries() {
            spans
                .entry(user.clone())
                .and_modify(|(_, last)| *last = snap.t)
                .or_insert((snap.t, snap.t));
        }
    }
    spans
}
