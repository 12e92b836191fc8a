//! Domain types shared by every analysis: positions, users, lands,
//! radio ranges, snapshots and traces.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid user id {0:?}: {1}")]
    InvalidUserId(String, &'static str),
    #[error("radio range must be a positive finite number of meters, got {0}")]
    InvalidRange(f64),
    #[error("land extent must be a positive finite number of meters, got {0}")]
    InvalidExtent(f64),
    #[error("land name must not contain line breaks")]
    InvalidLandName,
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
}

/// A 3D point in land-relative meters.
///
/// The exact triple (0,0,0) is the trace format's "seated" sentinel and is
/// never stored as a real position; ingest and generation enforce this.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Position { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// True iff this is the exact (0,0,0) seated sentinel.
    pub fn is_sit_sentinel(&self) -> bool {
        self.x == 0.0 && self.y == 0.0 && self.z == 0.0
    }

    /// Rounds each coordinate to 3 decimal places, the precision stored in
    /// trace files.
    pub fn quantized(&self) -> Self {
        fn q(v: f64) -> f64 {
            (v * 1000.0).round() / 1000.0
        }
        Position::new(q(self.x), q(self.y), q(self.z))
    }
}

/// 3D Euclidean distance between two positions.
pub fn distance(p: Position, q: Position) -> f64 {
    let dx = p.x - q.x;
    let dy = p.y - q.y;
    let dz = p.z - q.z;
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// True iff the distance between `p` and `q` is strictly less than `r`.
/// Compared in squared form, which spares the square root and avoids its
/// rounding step.
pub fn in_range(p: Position, q: Position, r: RadioRange) -> bool {
    let dx = p.x - q.x;
    let dy = p.y - q.y;
    let dz = p.z - q.z;
    dx * dx + dy * dy + dz * dz < r.meters() * r.meters()
}

/// Whether analyses measure distance in full 3D or on the ground plane only.
///
/// Avatars can stand at different elevations, so 3D is the default; 2D is
/// available for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceMode {
    #[default]
    ThreeD,
    TwoD,
}

impl DistanceMode {
    pub fn distance(self, p: Position, q: Position) -> f64 {
        match self {
            DistanceMode::ThreeD => distance(p, q),
            DistanceMode::TwoD => {
                let dx = p.x - q.x;
                let dy = p.y - q.y;
                (dx * dx + dy * dy).sqrt()
            }
        }
    }

    pub fn in_range(self, p: Position, q: Position, r: RadioRange) -> bool {
        let dx = p.x - q.x;
        let dy = p.y - q.y;
        let dz = match self {
            DistanceMode::ThreeD => p.z - q.z,
            DistanceMode::TwoD => 0.0,
        };
        dx * dx + dy * dy + dz * dz < r.meters() * r.meters()
    }
}

/// Opaque user identifier: a non-empty token with no commas or whitespace.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UserId(Arc<str>);

impl UserId {
    pub fn new(id: impl AsRef<str>) -> Result<Self, ModelError> {
        let id = id.as_ref();
        if id.is_empty() {
            return Err(ModelError::InvalidUserId(id.to_string(), "empty"));
        }
        if id.contains(',') {
            return Err(ModelError::InvalidUserId(id.to_string(), "contains comma"));
        }
        if id.chars().any(char::is_whitespace) {
            return Err(ModelError::InvalidUserId(
                id.to_string(),
                "contains whitespace",
            ));
        }
        Ok(UserId(Arc::from(id)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The monitored land: a named square of side `extent` meters.
#[derive(Debug, Clone, PartialEq)]
pub struct LandConfig {
    pub name: String,
    pub extent: f64,
}

impl LandConfig {
    pub const DEFAULT_EXTENT: f64 = 256.0;

    pub fn new(name: impl Into<String>, extent: f64) -> Result<Self, ModelError> {
        if !(extent.is_finite() && extent > 0.0) {
            return Err(ModelError::InvalidExtent(extent));
        }
        let name = name.into();
        // the trace header is a single line
        if name.contains('\n') || name.contains('\r') {
            return Err(ModelError::InvalidLandName);
        }
        Ok(LandConfig { name, extent })
    }
}

/// Communication range in meters; links exist strictly below this distance.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RadioRange(f64);

impl RadioRange {
    /// Bluetooth-class range preset.
    pub const BLUETOOTH: RadioRange = RadioRange(10.0);
    /// WiFi-class (802.11a) range preset.
    pub const WIFI: RadioRange = RadioRange(80.0);

    pub fn new(meters: f64) -> Result<Self, ModelError> {
        if !(meters.is_finite() && meters > 0.0) {
            return Err(ModelError::InvalidRange(meters));
        }
        Ok(RadioRange(meters))
    }

    pub fn meters(self) -> f64 {
        self.0
    }
}

impl fmt::Display for RadioRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// All user positions observed at one sampling instant.
///
/// An entry of `None` means the user is present but her position is unknown
/// (seated on an object, kept by the `keep-present` ingest policy).
/// Entries are kept sorted by user id in a flat vector: snapshots are built
/// once and then scanned by every analysis, so iteration speed wins.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Snapshot {
    pub t: u64,
    entries: Vec<(UserId, Option<Position>)>,
}

impl Snapshot {
    pub fn new(t: u64) -> Self {
        Snapshot {
            t,
            entries: Vec::new(),
        }
    }

    /// Inserts an entry, keeping the first one on duplicate user.
    /// Returns false if the user was already present.
    pub fn insert(&mut self, user: UserId, pos: Option<Position>) -> bool {
        match self.entries.binary_search_by(|(u, _)| u.cmp(&user)) {
            Ok(_) => false,
            Err(i) => {
                self.entries.insert(i, (user, pos));
                true
            }
        }
    }

    /// All entries, sorted by user id.
    pub fn entries(&self) -> impl Iterator<Item = (&UserId, Option<Position>)> {
        self.entries.iter().map(|(u, p)| (u, *p))
    }

    pub fn get(&self, user: &UserId) -> Option<Option<Position>> {
        self.entries
            .binary_search_by(|(u, _)| u.cmp(user))
            .ok()
            .map(|i| self.entries[i].1)
    }

    /// Number of present users, with or without a known position.
    pub fn present_count(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Users whose position is known at this instant, sorted by user id.
    pub fn known_positions(&self) -> impl Iterator<Item = (&UserId, Position)> {
        self.entries.iter().filter_map(|(u, p)| p.map(|p| (u, p)))
    }
}

/// A complete measurement: a gapless, τ-spaced sequence of snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSet {
    land: LandConfig,
    tau: u64,
    snapshots: Vec<Snapshot>,
}

impl TraceSet {
    /// Builds a trace, validating every invariant: positive τ, timestamps
    /// forming the exact arithmetic sequence t0, t0+τ, …, all timestamps
    /// multiples of τ, and every known position finite with x and y inside
    /// the land square.
    pub fn new(land: LandConfig, tau: u64, snapshots: Vec<Snapshot>) -> Result<Self, ModelError> {
        if tau == 0 {
            return Err(ModelError::InvalidTrace("tau must be positive".into()));
        }
        for (i, snap) in snapshots.iter().enumerate() {
            if snap.t % tau != 0 {
                return Err(ModelError::InvalidTrace(format!(
                    "timestamp {} is not a multiple of tau={}",
                    snap.t, tau
                )));
            }
            if i > 0 {
                let prev = snapshots[i - 1].t;
                if snap.t != prev + tau {
                    return Err(ModelError::InvalidTrace(format!(
                        "timestamps {} and {} are not consecutive at tau={}",
                        prev, snap.t, tau
                    )));
                }
            }
            for (user, pos) in snap.entries() {
                if let Some(p) = pos {
                    if !p.is_finite() {
                        return Err(ModelError::InvalidTrace(format!(
                            "non-finite position for {} at t={}",
                            user, snap.t
                        )));
                    }
                    if p.x < 0.0 || p.x > land.extent || p.y < 0.0 || p.y > land.extent {
                        return Err(ModelError::InvalidTrace(format!(
                            "position ({}, {}) for {} at t={} outside land extent {}",
                            p.x, p.y, user, snap.t, land.extent
                        )));
                    }
                }
            }
        }
        Ok(TraceSet {
            land,
            tau,
            snapshots,
        })
    }

    pub fn land(&self) -> &LandConfig {
        &self.land
    }

    pub fn tau(&self) -> u64 {
        self.tau
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn snapshot_count(&self) -> usize {
        self.snapshots.len()
    }

    /// Total covered time: (snapshot_count − 1)·τ, or 0 for an empty trace.
    pub fn duration(&self) -> u64 {
        match self.snapshots.len() {
            0 => 0,
            n => (n as u64 - 1) * self.tau,
        }
    }

    /// Every distinct user appearing anywhere in the trace.
    pub fn users(&self) -> BTreeSet<UserId> {
        let mut set = BTreeSet::new();
        for snap in &self.snapshots {
            for (user, _) in snap.entries() {
                set.insert(user.clone());
            }
        }
        set
    }

    /// Copy with leading and trailing empty snapshots removed.
    ///
    /// The trace file format only spans the first to the last populated
    /// snapshot, so `parse(write(t)) == t.trimmed()` in general.
    pub fn trimmed(&self) -> TraceSet {
        let first = self.snapshots.iter().position(|s| !s.is_empty());
        let snapshots = match first {
            None => Vec::new(),
            Some(first) => {
                let last = self
                    .snapshots
                    .iter()
                    .rposition(|s| !s.is_empty())
                    .expect("non-empty snapshot exists");
                self.snapshots[first..=last].to_vec()
            }
        };
        TraceSet {
            land: self.land.clone(),
            tau: self.tau,
            snapshots,
        }
    }
}

/// Stable dense indexing of a trace's users, sorted lexicographically.
#[derive(Debug, Clone)]
pub struct UserIndex {
    ids: Vec<UserId>,
    index: HashMap<UserId, usize>,
}

impl UserIndex {
    pub fn from_trace(trace: &TraceSet) -> Self {
        let ids: Vec<UserId> = trace.users().into_iter().collect();
        let index = ids
            .iter()
            .enumerate()
            .map(|(i, u)| (u.clone(), i))
            .collect();
        UserIndex { ids, index }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, idx: usize) -> &UserId {
        &self.ids[idx]
    }

    pub fn ids(&self) -> &[UserId] {
        &self.ids
    }

    pub fn index_of(&self, user: &UserId) -> Option<usize> {
        self.index.get(user).copied()
    }
}
