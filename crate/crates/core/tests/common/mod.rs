//! Shared helpers for integration tests: randomized trace construction and
//! brute-force oracles kept independent of the library's implementations.

#![allow(dead_code)]

use mobitrace_core::contact::{ContactInterval, PairTimeline};
use mobitrace_core::model::{
    DistanceMode, LandConfig, Position, RadioRange, Snapshot, TraceSet, UserId,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EXTENT: f64 = 256.0;

/// Builds a randomized trace: users toggle presence, wander in small steps,
/// occasionally teleport, and (optionally) sit into an unknown position.
/// Coordinates are always on the millimeter grid the file format stores.
pub fn random_trace(
    rng: &mut ChaCha8Rng,
    max_users: usize,
    max_snapshots: usize,
    tau: u64,
    allow_unknown: bool,
) -> TraceSet {
    let n_users = rng.gen_range(1..=max_users);
    let n_snaps = rng.gen_range(1..=max_snapshots);
    let users: Vec<UserId> = (0..n_users)
        .map(|i| UserId::new(format!("u{i:03}")).unwrap())
        .collect();

    let extent_mm: i64 = (EXTENT * 1000.0) as i64;
    let mut present = vec![false; n_users];
    let mut x = vec![0i64; n_users];
    let mut y = vec![0i64; n_users];
    let mut z = vec![0i64; n_users];
    for i in 0..n_users {
        present[i] = rng.gen_bool(0.6);
        x[i] = rng.gen_range(0..=extent_mm);
        y[i] = rng.gen_range(0..=extent_mm);
        z[i] = rng.gen_range(1..=50_000);
    }

    let mut snaps = Vec::with_capacity(n_snaps);
    for k in 0..n_snaps {
        let mut snap = Snapshot::new(k as u64 * tau);
        for i in 0..n_users {
            if rng.gen_bool(0.15) {
                present[i] = !present[i];
            }
            if !present[i] {
                continue;
            }
            if rng.gen_bool(0.1) {
                x[i] = rng.gen_range(0..=extent_mm);
                y[i] = rng.gen_range(0..=extent_mm);
            } else {
                x[i] = (x[i] + rng.gen_range(-8_000..=8_000)).clamp(0, extent_mm);
                y[i] = (y[i] + rng.gen_range(-8_000..=8_000)).clamp(0, extent_mm);
                z[i] = (z[i] + rng.gen_range(-500..=500)).clamp(1, 50_000);
            }
            let entry = if allow_unknown && rng.gen_bool(0.05) {
                None
            } else {
                Some(Position::new(
                    x[i] as f64 / 1000.0,
                    y[i] as f64 / 1000.0,
                    z[i] as f64 / 1000.0,
                ))
            };
            snap.insert(users[i].clone(), entry);
        }
        snaps.push(snap);
    }
    let land = LandConfig::new("fuzz", EXTENT).unwrap();
    TraceSet::new(land, tau, snaps).unwrap()
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn known_at(trace: &TraceSet, si: usize, u: &UserId) -> Option<Position> {
    trace.snapshots()[si].get(u).flatten()
}

/// Brute-force contact oracle: evaluates every (pair, snapshot) cell
/// independently and merges boolean runs into intervals.
pub fn oracle_contacts(
    trace: &TraceSet,
    r: RadioRange,
    mode: DistanceMode,
) -> Vec<PairTimeline> {
    let users: Vec<UserId> = trace.users().into_iter().collect();
    let snaps = trace.snapshots();
    let tau = trace.tau();
    let mut timelines = Vec::new();
    for i in 0..users.len() {
        for j in (i + 1)..users.len() {
            let (u, v) = (&users[i], &users[j]);
            let linked: Vec<bool> = (0..snaps.len())
                .map(|si| match (known_at(trace, si, u), known_at(trace, si, v)) {
                    (Some(p), Some(q)) => mode.in_range(p, q, r),
                    _ => false,
                })
                .collect();
            let both_known = |si: usize| -> bool {
                known_at(trace, si, u).is_some() && known_at(trace, si, v).is_some()
            };
            let mut contacts = Vec::new();
            let mut k = 0;
            while k < linked.len() {
                if !linked[k] {
                    k += 1;
                    continue;
                }
                let first = k;
                while k < linked.len() && linked[k] {
                    k += 1;
                }
                let last = k - 1;
                contacts.push(ContactInterval {
                    u: u.clone(),
                    v: v.clone(),
                    start: snaps[first].t,
                    end: snaps[last].t + tau,
                    left_censored: first == 0 || !both_known(first - 1),
                    right_censored: last == snaps.len() - 1 || !both_known(last + 1),
                });
            }
            if !contacts.is_empty() {
                timelines.push(PairTimeline {
                    u: u.clone(),
                    v: v.clone(),
                    contacts,
                });
            }
        }
    }
    timelines
}

/// Adjacency matrix of a snapshot, built directly from positions.
pub fn oracle_adjacency(
    snap: &Snapshot,
    r: RadioRange,
    mode: DistanceMode,
) -> (Vec<UserId>, Vec<Vec<bool>>) {
    let mut nodes = Vec::new();
    let mut pos = Vec::new();
    for (u, p) in snap.known_positions() {
        nodes.push(u.clone());
        pos.push(p);
    }
    let n = nodes.len();
    let mut adj = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && mode.in_range(pos[i], pos[j], r) {
                adj[i][j] = true;
            }
        }
    }
    (nodes, adj)
}

fn oracle_components(adj: &[Vec<bool>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut comps = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        let mut comp = Vec::new();
        let mut queue = std::collections::VecDeque::from([s]);
        seen[s] = true;
        while let Some(i) = queue.pop_front() {
            comp.push(i);
            for j in 0..n {
                if adj[i][j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        comps.push(comp);
    }
    comps
}

/// Diameter by all-pairs BFS over the largest component (first maximal
/// component in smallest-member order).
pub fn oracle_diameter(adj: &[Vec<bool>]) -> Option<usize> {
    if adj.is_empty() {
        return None;
    }
    let mut lcc: &[usize] = &[];
    let comps = oracle_components(adj);
    for comp in &comps {
        if comp.len() > lcc.len() {
            lcc = comp;
        }
    }
    let n = adj.len();
    let mut best = 0;
    for &s in lcc {
        let mut dist = vec![usize::MAX; n];
        dist[s] = 0;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                if adj[i][j] && dist[j] == usize::MAX {
                    dist[j] = dist[i] + 1;
                    queue.push_back(j);
                }
            }
        }
        for &j in lcc {
            best = best.max(dist[j]);
        }
    }
    Some(best)
}

/// Mean clustering by direct triple enumeration over eligible nodes.
pub fn oracle_clustering(adj: &[Vec<bool>]) -> Option<f64> {
    let n = adj.len();
    let mut sum = 0.0;
    let mut eligible = 0;
    for i in 0..n {
        let neigh: Vec<usize> = (0..n).filter(|&j| adj[i][j]).collect();
        if neigh.len() < 2 {
            continue;
        }
        let mut links = 0;
        for a in 0..neigh.len() {
            for b in (a + 1)..neigh.len() {
                if adj[neigh[a]][neigh[b]] {
                    links += 1;
                }
            }
        }
        let possible = neigh.len() * (neigh.len() - 1) / 2;
        sum += links as f64 / possible as f64;
        eligible += 1;
    }
    if eligible == 0 {
        None
    } else {
        Some(sum / eligible as f64)
    }
}
