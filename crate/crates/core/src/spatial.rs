//! Trip metrics (travel length, effective travel time, travel time) and
//! grid-based zone occupancy.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::contact::Session;
use crate::model::{DistanceMode, LandConfig, Position, TraceSet, UserId};

/// Default per-step displacement below which a step counts as a pause;
/// avatar idle jitter stays under this.
pub const DEFAULT_PAUSE_EPSILON: f64 = 0.5;

/// Default occupancy cell side in meters.
pub const DEFAULT_CELL_SIZE: f64 = 20.0;

#[derive(Debug, Error)]
pub enum SpatialError {
    #[error("cell size must be in (0, extent], got {0}")]
    InvalidCellSize(f64),
    #[error("grid extent {grid} does not match trace extent {trace}")]
    ExtentMismatch { grid: f64, trace: f64 },
    #[error("bad heatmap file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Square grid partition of the land into L×L sub-cells; boundary cells may
/// be smaller when L does not divide the extent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub cell_size: f64,
    pub extent: f64,
}

impl GridSpec {
    pub fn new(cell_size: f64, extent: f64) -> Result<Self, SpatialError> {
        if !(cell_size.is_finite() && cell_size > 0.0 && cell_size <= extent) {
            return Err(SpatialError::InvalidCellSize(cell_size));
        }
        Ok(GridSpec { cell_size, extent })
    }

    pub fn for_land(land: &LandConfig, cell_size: f64) -> Result<Self, SpatialError> {
        GridSpec::new(cell_size, land.extent)
    }

    pub fn cells_per_axis(&self) -> usize {
        (self.extent / self.cell_size).ceil() as usize
    }

    /// Cell of a position: (floor(x/L), floor(y/L)), clamped so coordinates
    /// equal to the extent land in the last cell.
    pub fn cell_of(&self, p: Position) -> (usize, usize) {
        let n = self.cells_per_axis();
        let cx = ((p.x / self.cell_size).floor() as usize).min(n - 1);
        let cy = ((p.y / self.cell_size).floor() as usize).min(n - 1);
        (cx, cy)
    }
}

/// Time-averaged and peak user counts per grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub spec: GridSpec,
    cells: usize,
    mean: Vec<f64>,
    peak: Vec<u32>,
}

impl OccupancyGrid {
    pub fn cells_per_axis(&self) -> usize {
        self.cells
    }

    pub fn mean_at(&self, cx: usize, cy: usize) -> f64 {
        self.mean[cy * self.cells + cx]
    }

    pub fn peak_at(&self, cx: usize, cy: usize) -> u32 {
        self.peak[cy * self.cells + cx]
    }

    /// Row-major mean matrix, row index = y cell.
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn peak(&self) -> &[u32] {
        &self.peak
    }

    pub fn total_mean(&self) -> f64 {
        self.mean.iter().sum()
    }
}

/// Counts position-known users per cell in every snapshot; the mean is over
/// all snapshots (including empty ones) and the peak is per cell.
pub fn zone_occupation(trace: &TraceSet, spec: &GridSpec) -> Result<OccupancyGrid, SpatialError> {
    if spec.extent != trace.land().extent {
        return Err(SpatialError::ExtentMismatch {
            grid: spec.extent,
            trace: trace.land().extent,
        });
    }
    let n = spec.cells_per_axis();
    let mut totals = vec![0u64; n * n];
    let mut peak = vec![0u32; n * n];
    let mut counts = vec![0u32; n * n];
    for snap in trace.snapshots() {
        counts.iter_mut().for_each(|c| *c = 0);
        for (_, pos) in snap.known_positions() {
            let (cx, cy) = spec.cell_of(pos);
            counts[cy * n + cx] += 1;
        }
        for i in 0..n * n {
            totals[i] += u64::from(counts[i]);
            peak[i] = peak[i].max(counts[i]);
        }
    }
    let snaps = trace.snapshot_count();
    let mean = totals
        .into_iter()
        .map(|t| {
            if snaps == 0 {
                0.0
            } else {
                t as f64 / snaps as f64
            }
        })
        .collect();
    Ok(OccupancyGrid {
        spec: *spec,
        cells: n,
        mean,
        peak,
    })
}

// Returns the user's known position at snapshot index si, if any.
fn known_at(trace: &TraceSet, si: usize, user: &UserId) -> Option<Position> {
    trace.snapshots()[si].get(user).flatten()
}

fn session_step_indices(trace: &TraceSet, session: &Session) -> Option<(usize, usize)> {
    let snaps = trace.snapshots();
    let t0 = snaps.first()?.t;
    let tau = trace.tau();
    let first = ((session.start - t0) / tau) as usize;
    let last = ((session.end - tau - t0) / tau) as usize;
    Some((first, last))
}

/// Cumulative path length over the session: the sum of displacements
/// between consecutive snapshots where the user's position is known.
/// Steps longer than `teleport_cutoff` are dropped as teleports.
pub fn travel_length(
    trace: &TraceSet,
    session: &Session,
    mode: DistanceMode,
    teleport_cutoff: Option<f64>,
) -> f64 {
    let Some((first, last)) = session_step_indices(trace, session) else {
        return 0.0;
    };
    let mut total = 0.0;
    for si in first..last {
        let (Some(p), Some(q)) = (
            known_at(trace, si, &session.user),
            known_at(trace, si + 1, &session.user),
        ) else {
            continue;
        };
        let step = mode.distance(p, q);
        if teleport_cutoff.is_some_and(|cut| step > cut) {
            continue;
        }
        total += step;
    }
    total
}

/// Time spent moving: τ times the number of consecutive-snapshot steps with
/// displacement strictly greater than `pause_epsilon`.
pub fn effective_travel_time(
    trace: &TraceSet,
    session: &Session,
    pause_epsilon: f64,
    mode: DistanceMode,
) -> u64 {
    let Some((first, last)) = session_step_indices(trace, session) else {
        return 0;
    };
    let mut moving_steps = 0u64;
    for si in first..last {
        let (Some(p), Some(q)) = (
            known_at(trace, si, &session.user),
            known_at(trace, si + 1, &session.user),
        ) else {
            continue;
        };
        if mode.distance(p, q) > pause_epsilon {
            moving_steps += 1;
        }
    }
    moving_steps * trace.tau()
}

/// Total connection time: the summed span of the user's sessions.
pub fn travel_time(sessions: &[Session]) -> u64 {
    sessions.iter().map(Session::duration).sum()
}

/// Per-session trip metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct TripRecord {
    pub user: UserId,
    pub session: Session,
    pub travel_length: f64,
    pub effective_travel_time: u64,
    pub travel_time: u64,
}

/// One record per session, ordered by (user, session start). Computes both
/// step metrics in a single pass over the session.
pub fn trip_records(
    trace: &TraceSet,
    sessions: &BTreeMap<UserId, Vec<Session>>,
    mode: DistanceMode,
    pause_epsilon: f64,
    teleport_cutoff: Option<f64>,
) -> Vec<TripRecord> {
    let mut out = Vec::new();
    for sess_list in sessions.values() {
        for session in sess_list {
            let mut length = 0.0;
            let mut moving_steps = 0u64;
            if let Some((first, last)) = session_step_indices(trace, session) {
                let mut prev = known_at(trace, first, &session.user);
                for si in first..last {
                    let next = known_at(trace, si + 1, &session.user);
                    if let (Some(p), Some(q)) = (prev, next) {
                        let step = mode.distance(p, q);
                        if !teleport_cutoff.is_some_and(|cut| step > cut) {
                            length += step;
                        }
                        if step > pause_epsilon {
                            moving_steps += 1;
                        }
                    }
                    prev = next;
                }
            }
            out.push(TripRecord {
                user: session.user.clone(),
                session: session.clone(),
                travel_length: length,
                effective_travel_time: moving_steps * trace.tau(),
                travel_time: session.duration(),
            });
        }
    }
    out
}

/// Per-user trip totals across all sessions.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TripTotals {
    pub travel_length: f64,
    pub effective_travel_time: u64,
    pub travel_time: u64,
}

pub fn per_user_totals(records: &[TripRecord]) -> BTreeMap<UserId, TripTotals> {
    let mut out: BTreeMap<UserId, TripTotals> = BTreeMap::new();
    for rec in records {
        let tot = out.entry(rec.user.clone()).or_default();
        tot.travel_length += rec.travel_length;
        tot.effective_travel_time += rec.effective_travel_time;
        tot.travel_time += rec.travel_time;
    }
    out
}

fn write_grid_header<W: Write>(grid: &OccupancyGrid, mut w: W) -> io::Result<()> {
    let n = grid.cells_per_axis();
    writeln!(
        w,
        "#grid extent={} L={} rows={} cols={}",
        grid.spec.extent, grid.spec.cell_size, n, n
    )
}

/// Writes the mean-occupancy heatmap: header then one comma-separated line
/// per y cell, ascending.
pub fn write_heatmap_mean<W: Write>(grid: &OccupancyGrid, mut w: W) -> io::Result<()> {
    write_grid_header(grid, &mut w)?;
    let n = grid.cells_per_axis();
    for cy in 0..n {
        let row: Vec<String> = (0..n)
            .map(|cx| format!("{:.6}", grid.mean_at(cx, cy)))
            .collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Writes the peak-occupancy heatmap in the same layout, integer counts.
pub fn write_heatmap_peak<W: Write>(grid: &OccupancyGrid, mut w: W) -> io::Result<()> {
    write_grid_header(grid, &mut w)?;
    let n = grid.cells_per_axis();
    for cy in 0..n {
        let row: Vec<String> = (0..n)
            .map(|cx| grid.peak_at(cx, cy).to_string())
            .collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Parsed heatmap file: grid geometry plus the matrix, row index = y cell.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapFile {
    pub extent: f64,
    pub cell_size: f64,
    pub values: Vec<Vec<f64>>,
}

pub fn read_heatmap<R: BufRead>(r: R) -> Result<HeatmapFile, SpatialError> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| SpatialError::Format("empty file".into()))?;
    let rest = header
        .strip_prefix("#grid ")
        .ok_or_else(|| SpatialError::Format("missing #grid header".into()))?;
    let mut extent = None;
    let mut cell = None;
    let mut rows = None;
    let mut cols = None;
    for field in rest.split_whitespace() {
        let (k, v) = field
            .split_once('=')
            .ok_or_else(|| SpatialError::Format(format!("bad header field {:?}", field)))?;
        let parse =
            |v: &str| -> Result<f64, SpatialError> {
                v.parse()
                    .map_err(|_| SpatialError::Format(format!("bad header value {:?}", v)))
            };
        match k {
            "extent" => extent = Some(parse(v)?),
            "L" => cell = Some(parse(v)?),
            "rows" => rows = Some(parse(v)? as usize),
            "cols" => cols = Some(parse(v)? as usize),
            other => return Err(SpatialError::Format(format!("unknown header key {:?}", other))),
        }
    }
    let (Some(extent), Some(cell_size), Some(rows), Some(cols)) = (extent, cell, rows, cols) else {
        return Err(SpatialError::Format("incomplete #grid header".into()));
    };
    let mut values = Vec::with_capacity(rows);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.trim_end().split(',').map(str::parse::<f64>).collect();
        let row = row.map_err(|_| SpatialError::Format("bad matrix row".into()))?;
        if row.len() != cols {
            return Err(SpatialError::Format(format!(
                "expected {} columns, got {}",
                cols,
                row.len()
            )));
        }
        values.push(row);
    }
    if values.len() != rows {
        return Err(SpatialError::Format(format!(
            "expected {} rows, got {}",
            rows,
            values.len()
        )));
    }
    Ok(HeatmapFile {
        extent,
        cell_size,
        values,
    })
}
