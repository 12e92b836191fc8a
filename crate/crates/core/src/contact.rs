//! Temporal analysis: presence sessions, pairwise contact reconstruction
//! and the contact-opportunity metrics (contact time, inter-contact time,
//! first contact time).

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use crate::model::{DistanceMode, Position, RadioRange, TraceSet, UserId, UserIndex};

/// One maximal presence run of a user. `end` is exclusive: the last present
/// snapshot plus τ.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub user: UserId,
    pub start: u64,
    pub end: u64,
}

impl Session {
    pub fn duration(&self) -> u64 {
        self.end - self.start
    }
}

/// One contact period of a user pair, `u < v`, half-open `[start, end)`
/// where `end` is the last in-range snapshot plus τ.
///
/// A contact is censored on a side when the neighbouring snapshot does not
/// show both users with known positions (trace boundary, a participant's
/// logout, or an unknown position), so the true extent on that side is
/// unobservable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContactInterval {
    pub u: UserId,
    pub v: UserId,
    pub start: u64,
    pub end: u64,
    pub left_censored: bool,
    pub right_censored: bool,
}

impl ContactInterval {
    pub fn duration(&self) -> u64 {
        self.end - self.start
    }

    pub fn is_censored(&self) -> bool {
        self.left_censored || self.right_censored
    }
}

/// Time-ordered, non-overlapping contacts of one pair; consecutive contacts
/// are separated by at least τ.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairTimeline {
    pub u: UserId,
    pub v: UserId,
    pub contacts: Vec<ContactInterval>,
}

/// Whether boundary-truncated contacts enter the sample collections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CensorPolicy {
    #[default]
    Include,
    ExcludeCensored,
}

/// Reconstructs presence sessions per user.
///
/// A session is a maximal run of snapshots where the user is present
/// (with or without a known position), allowing up to `gap_tolerance`
/// consecutive absent snapshots inside the run.
pub fn extract_sessions(
    trace: &TraceSet,
    gap_tolerance: usize,
) -> BTreeMap<UserId, Vec<Session>> {
    let tau = trace.tau();
    let mut presence: BTreeMap<UserId, Vec<u64>> = BTreeMap::new();
    for snap in trace.snapshots() {
        for (user, _) in snap.entries() {
            presence.entry(user.clone()).or_default().push(snap.t);
        }
    }
    let max_gap = (gap_tolerance as u64 + 1) * tau;
    presence
        .into_iter()
        .map(|(user, times)| {
            let mut sessions = Vec::new();
            let mut start = times[0];
            let mut last = times[0];
            for &t in &times[1..] {
                if t - last > max_gap {
                    sessions.push(Session {
                        user: user.clone(),
                        start,
                        end: last + tau,
                    });
                    start = t;
                }
                last = t;
            }
            sessions.push(Session {
                user: user.clone(),
                start,
                end: last + tau,
            });
            (user, sessions)
        })
        .collect()
}

struct OpenRun {
    start: u64,
    last: u64,
}

/// Reconstructs every pair's contact timeline at range `r`.
///
/// A contact is a maximal run of consecutive snapshots where both users
/// have known positions and are in range; pairs never in contact are
/// omitted. Results are sorted by (u, v).
pub fn extract_contacts(trace: &TraceSet, r: RadioRange, mode: DistanceMode) -> Vec<PairTimeline> {
    let snaps = trace.snapshots();
    if snaps.is_empty() {
        return Vec::new();
    }
    let index = UserIndex::from_trace(trace);
    let tau = trace.tau();
    let t0 = snaps[0].t;
    let t_last = snaps[snaps.len() - 1].t;

    // known-position users per snapshot, ascending by dense index; snapshot
    // entries and the index share the same sort order, so a binary search
    // on the id list resolves each entry without hashing
    struct SnapKnown {
        idx: Vec<u32>,
        pos: Vec<Position>,
    }
    let ids = index.ids();
    let known: Vec<SnapKnown> = snaps
        .iter()
        .map(|snap| {
            let mut idx = Vec::with_capacity(snap.present_count());
            let mut pos = Vec::with_capacity(snap.present_count());
            if snap.present_count() * 16 >= ids.len() {
                // dense snapshot: sweep the id table in lockstep
                let mut cursor = 0usize;
                for (u, p) in snap.known_positions() {
                    while ids[cursor] != *u {
                        cursor += 1;
                    }
                    idx.push(cursor as u32);
                    pos.push(p);
                }
            } else {
                for (u, p) in snap.known_positions() {
                    idx.push(ids.binary_search(u).expect("indexed user") as u32);
                    pos.push(p);
                }
            }
            SnapKnown { idx, pos }
        })
        .collect();

    let both_known = |t: u64, a: u32, b: u32| -> bool {
        let si = ((t - t0) / tau) as usize;
        let k = &known[si];
        k.idx.binary_search(&a).is_ok() && k.idx.binary_search(&b).is_ok()
    };

    let mut open: HashMap<u64, OpenRun> = HashMap::new();
    let mut finished: Vec<(u64, ContactInterval)> = Vec::new();

    let close = |key: u64, run: &OpenRun| -> ContactInterval {
        let (a, b) = ((key >> 32) as u32, key as u32);
        let left_censored = run.start == t0 || !both_known(run.start - tau, a, b);
        let right_censored = run.last == t_last || !both_known(run.last + tau, a, b);
        ContactInterval {
            u: index.id(a as usize).clone(),
            v: index.id(b as usize).clone(),
            start: run.start,
            end: run.last + tau,
            left_censored,
            right_censored,
        }
    };

    // enumerate in-range pairs in parallel, one chunk of snapshots at a
    // time to bound memory, then merge runs sequentially in time order
    const CHUNK: usize = 512;
    let mut base = 0;
    while base < known.len() {
        let end = (base + CHUNK).min(known.len());
        let chunk: Vec<Vec<u64>> = known[base..end]
            .par_iter()
            .map(|k| {
                let mut pairs = Vec::new();
                for i in 0..k.pos.len() {
                    let pi = k.pos[i];
                    for j in (i + 1)..k.pos.len() {
                        if mode.in_range(pi, k.pos[j], r) {
                            pairs.push((u64::from(k.idx[i]) << 32) | u64::from(k.idx[j]));
                        }
                    }
                }
                pairs
            })
            .collect();
        for (offset, pairs) in chunk.into_iter().enumerate() {
            let t = snaps[base + offset].t;
            for key in pairs {
                match open.entry(key) {
                    std::collections::hash_map::Entry::Occupied(mut e) => {
                        if e.get().last + tau == t {
                            e.get_mut().last = t;
                        } else {
                            let prev = e.insert(OpenRun { start: t, last: t });
                            finished.push((key, close(key, &prev)));
                        }
                    }
                    std::collections::hash_map::Entry::Vacant(e) => {
                        e.insert(OpenRun { start: t, last: t });
                    }
                }
            }
        }
        base = end;
    }
    for (key, run) in &open {
        finished.push((*key, close(*key, run)));
    }

    finished.sort_by_key(|(key, c)| (*key, c.start));
    let mut timelines: Vec<PairTimeline> = Vec::new();
    for (_key, contact) in finished {
        match timelines.last_mut() {
            Some(tl) if tl.u == contact.u && tl.v == contact.v => tl.contacts.push(contact),
            _ => timelines.push(PairTimeline {
                u: contact.u.clone(),
                v: contact.v.clone(),
                contacts: vec![contact],
            }),
        }
    }
    timelines
}

/// All contact intervals of all pairs, flattened.
pub fn all_intervals(timelines: &[PairTimeline]) -> Vec<ContactInterval> {
    timelines
        .iter()
        .flat_map(|tl| tl.contacts.iter().cloned())
        .collect()
}

/// One contact-time sample (seconds) per non-excluded interval.
pub fn contact_times(timelines: &[PairTimeline], policy: CensorPolicy) -> Vec<u64> {
    timelines
        .iter()
        .flat_map(|tl| tl.contacts.iter())
        .filter(|c| policy == CensorPolicy::Include || !c.is_censored())
        .map(|c| c.duration())
        .collect()
}

/// Inter-contact time samples: for each pair with n ≥ 2 contacts, the n−1
/// gaps contacts[k+1].start − contacts[k].end.
pub fn inter_contact_times(timelines: &[PairTimeline]) -> Vec<u64> {
    let mut out = Vec::new();
    for tl in timelines {
        for w in tl.contacts.windows(2) {
            out.push(w[1].start - w[0].end);
        }
    }
    out
}

/// First-contact waiting times per user, plus how many users never
/// contacted anyone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FirstContact {
    pub times: BTreeMap<UserId, u64>,
    pub never_contacted: usize,
}

/// FT(u) = earliest contact start over all timelines involving u, minus
/// u's first session start. Users with no contacts are excluded from the
/// map and counted.
pub fn first_contact_times(
    timelines: &[PairTimeline],
    sessions: &BTreeMap<UserId, Vec<Session>>,
) -> FirstContact {
    let mut earliest: BTreeMap<&UserId, u64> = BTreeMap::new();
    for tl in timelines {
        if let Some(first) = tl.contacts.first() {
            for user in [&tl.u, &tl.v] {
                earliest
                    .entry(user)
                    .and_modify(|e| *e = (*e).min(first.start))
                    .or_insert(first.start);
            }
        }
    }
    let mut times = BTreeMap::new();
    let mut never_contacted = 0;
    for (user, sess) in sessions {
        match earliest.get(user) {
            Some(&t) => {
                let first_seen = sess[0].start;
                debug_assert!(t >= first_seen);
                times.insert(user.clone(), t - first_seen);
            }
            None => never_contacted += 1,
        }
    }
    FirstContact {
        times,
        never_contacted,
    }
}
