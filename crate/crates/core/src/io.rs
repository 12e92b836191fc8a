//! The trace file format (parse + write), the contact-event export, and
//! ingest summary statistics.

use std::collections::{BTreeMap, HashSet};
use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::contact::ContactInterval;
use crate::model::{LandConfig, ModelError, Position, Snapshot, TraceSet, UserId};

const TRACE_MAGIC: &str = "#mobitrace ";
const COLUMNS_HEADER: &str = "t,user,x,y,z";
const EVENTS_HEADER: &str = "u,v,start,end";

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("missing trace header")]
    MissingHeader,
    #[error("bad trace header: {0}")]
    BadHeader(String),
    #[error("missing `{COLUMNS_HEADER}` columns header")]
    MissingColumnsHeader,
    #[error("{count} malformed rows exceed the limit of {limit}")]
    TooManyMalformed { count: u64, limit: u64 },
    #[error("bad contact-event file: {0}")]
    BadEvents(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// What to do with rows carrying the (0,0,0) seated sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SitPolicy {
    /// Drop the row: the user is absent at that snapshot.
    #[default]
    DropRow,
    /// Keep the user as present with an unknown position, so presence-based
    /// metrics still see her.
    KeepPresent,
}

/// Ingest knobs: seated-row handling and the malformed-row abort threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestPolicy {
    pub sit_policy: SitPolicy,
    pub malformed_limit: u64,
}

impl Default for IngestPolicy {
    fn default() -> Self {
        IngestPolicy {
            sit_policy: SitPolicy::DropRow,
            malformed_limit: 1000,
        }
    }
}

/// Ingest statistics of one parsed trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSummary {
    pub unique_users: usize,
    /// Average number of present users per snapshot.
    pub mean_concurrency: f64,
    pub duration: u64,
    pub snapshot_count: usize,
    pub malformed_rows: u64,
    pub seated_rows: u64,
}

impl TraceSummary {
    /// Recounts the trace-derived fields (users, concurrency, duration).
    pub fn of_trace(trace: &TraceSet, malformed_rows: u64, seated_rows: u64) -> Self {
        let snapshot_count = trace.snapshot_count();
        let present: usize = trace.snapshots().iter().map(Snapshot::present_count).sum();
        let mean_concurrency = if snapshot_count == 0 {
            0.0
        } else {
            present as f64 / snapshot_count as f64
        };
        TraceSummary {
            unique_users: trace.users().len(),
            mean_concurrency,
            duration: trace.duration(),
            snapshot_count,
            malformed_rows,
            seated_rows,
        }
    }
}

fn parse_header(line: &str) -> Result<(LandConfig, u64), ParseError> {
    let rest = line
        .strip_prefix(TRACE_MAGIC)
        .ok_or_else(|| ParseError::BadHeader(format!("expected `{TRACE_MAGIC}...`")))?;
    let rest = rest
        .strip_prefix("land=")
        .ok_or_else(|| ParseError::BadHeader("missing land=".into()))?;
    // the land name may contain spaces, so take the numeric fields from the right
    let (rest, tau_str) = rest
        .rsplit_once(" tau=")
        .ok_or_else(|| ParseError::BadHeader("missing tau=".into()))?;
    let (name, extent_str) = rest
        .rsplit_once(" extent=")
        .ok_or_else(|| ParseError::BadHeader("missing extent=".into()))?;
    let extent: f64 = extent_str
        .parse()
        .map_err(|_| ParseError::BadHeader(format!("bad extent {:?}", extent_str)))?;
    let tau: u64 = tau_str
        .parse()
        .map_err(|_| ParseError::BadHeader(format!("bad tau {:?}", tau_str)))?;
    if tau == 0 {
        return Err(ParseError::BadHeader("tau must be positive".into()));
    }
    let land = LandConfig::new(name, extent)
        .map_err(|e| ParseError::BadHeader(e.to_string()))?;
    Ok((land, tau))
}

/// Parses a trace stream into a gapless `TraceSet` plus its summary.
///
/// Malformed rows (bad fields, out-of-bounds x/y, off-grid timestamps,
/// duplicate (t, user) pairs) are counted and skipped until the policy's
/// limit is exceeded; seated (0,0,0) rows are handled per the sit policy.
/// Timestamps missing from the input appear as empty snapshots so the
/// timeline is gapless.
pub fn parse_trace<R: BufRead>(
    reader: R,
    policy: &IngestPolicy,
) -> Result<(TraceSet, TraceSummary), ParseError> {
    let mut lines = reader.lines();
    let header = lines.next().transpose()?.ok_or(ParseError::MissingHeader)?;
    let (land, tau) = parse_header(header.trim_end_matches('\r'))?;
    let columns = lines
        .next()
        .transpose()?
        .ok_or(ParseError::MissingColumnsHeader)?;
    if columns.trim_end_matches('\r') != COLUMNS_HEADER {
        return Err(ParseError::MissingColumnsHeader);
    }

    let mut by_time: BTreeMap<u64, Snapshot> = BTreeMap::new();
    let mut seen: HashSet<(u64, UserId)> = HashSet::new();
    let mut malformed: u64 = 0;
    let mut seated: u64 = 0;

    for line in lines {
        let line = line?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.is_empty() {
            continue;
        }
        let mut bad = false;
        if let Some(row) = parse_row(line, tau, land.extent, &mut bad) {
            let (t, user, pos) = row;
            if !seen.insert((t, user.clone())) {
                bad = true; // duplicate (t, user): keep the first occurrence
            } else if pos.is_sit_sentinel() {
                seated += 1;
                if policy.sit_policy == SitPolicy::KeepPresent {
                    by_time.entry(t).or_insert_with(|| Snapshot::new(t)).insert(user, None);
                }
            } else {
                by_time
                    .entry(t)
                    .or_insert_with(|| Snapshot::new(t))
                    .insert(user, Some(pos));
            }
        }
        if bad {
            malformed += 1;
            if malformed > policy.malformed_limit {
                return Err(ParseError::TooManyMalformed {
                    count: malformed,
                    limit: policy.malformed_limit,
                });
            }
        }
    }

    let snapshots = match (by_time.keys().next(), by_time.keys().next_back()) {
        (Some(&t_min), Some(&t_max)) => {
            let mut snaps = Vec::with_capacity(((t_max - t_min) / tau + 1) as usize);
            let mut t = t_min;
            while t <= t_max {
                snaps.push(by_time.remove(&t).unwrap_or_else(|| Snapshot::new(t)));
                t += tau;
            }
            snaps
        }
        _ => Vec::new(),
    };
    let trace = TraceSet::new(land, tau, snapshots)?;
    let summary = TraceSummary::of_trace(&trace, malformed, seated);
    Ok((trace, summary))
}

// Parses one data row. On any defect sets `bad` and returns None; a valid
// seated row is returned as the sentinel position for the caller to handle.
fn parse_row(line: &str, tau: u64, extent: f64, bad: &mut bool) -> Option<(u64, UserId, Position)> {
    let mut fields = line.split(',');
    let (Some(t), Some(user), Some(x), Some(y), Some(z), None) = (
        fields.next(),
        fields.next(),
        fields.next(),
        fields.next(),
        fields.next(),
        fields.next(),
    ) else {
        *bad = true;
        return None;
    };
    let Ok(t) = t.parse::<u64>() else {
        *bad = true;
        return None;
    };
    if t % tau != 0 {
        *bad = true;
        return None;
    }
    let Ok(user) = UserId::new(user) else {
        *bad = true;
        return None;
    };
    let (Ok(x), Ok(y), Ok(z)) = (x.parse::<f64>(), y.parse::<f64>(), z.parse::<f64>()) else {
        *bad = true;
        return None;
    };
    let pos = Position::new(x, y, z);
    if !pos.is_finite() {
        *bad = true;
        return None;
    }
    let pos = pos.quantized();
    if !pos.is_sit_sentinel() && (pos.x < 0.0 || pos.x > extent || pos.y < 0.0 || pos.y > extent) {
        *bad = true;
        return None;
    }
    Some((t, user, pos))
}

/// Writes a trace in the canonical text format: coordinates with exactly
/// 3 decimal places, rows ordered by time then user, present-but-unknown
/// users emitted as the (0,0,0) seated sentinel.
pub fn write_trace<W: Write>(trace: &TraceSet, mut w: W) -> io::Result<()> {
    writeln!(
        w,
        "{TRACE_MAGIC}land={} extent={} tau={}",
        trace.land().name,
        trace.land().extent,
        trace.tau()
    )?;
    writeln!(w, "{COLUMNS_HEADER}")?;
    for snap in trace.snapshots() {
        for (user, pos) in snap.entries() {
            let p = pos.unwrap_or(Position::new(0.0, 0.0, 0.0));
            writeln!(w, "{},{},{:.3},{:.3},{:.3}", snap.t, user, p.x, p.y, p.z)?;
        }
    }
    Ok(())
}

/// Writes contact events: `u,v,start,end` with each pair ordered
/// lexicographically (u < v) and lines sorted by (start, u, v);
/// `end` is exclusive.
pub fn write_contact_events<W: Write>(
    contacts: &[ContactInterval],
    mut w: W,
) -> io::Result<()> {
    let mut ordered: Vec<(&UserId, &UserId, u64, u64)> = contacts
        .iter()
        .map(|c| {
            let (u, v) = if c.u <= c.v { (&c.u, &c.v) } else { (&c.v, &c.u) };
            (u, v, c.start, c.end)
        })
        .collect();
    ordered.sort_by(|a, b| (a.2, a.0, a.1, a.3).cmp(&(b.2, b.0, b.1, b.3)));
    writeln!(w, "{EVENTS_HEADER}")?;
    for (u, v, start, end) in ordered {
        writeln!(w, "{},{},{},{}", u, v, start, end)?;
    }
    Ok(())
}

/// One exported contact event; censor flags are not part of the format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContactEvent {
    pub u: UserId,
    pub v: UserId,
    pub start: u64,
    pub end: u64,
}

/// Reads a contact-event file back.
pub fn read_contact_events<R: BufRead>(r: R) -> Result<Vec<ContactEvent>, ParseError> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| ParseError::BadEvents("empty file".into()))?;
    if header.trim_end_matches('\r') != EVENTS_HEADER {
        return Err(ParseError::BadEvents(format!(
            "expected `{EVENTS_HEADER}` header"
        )));
    }
    let mut events = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        let bad = |what: &str| ParseError::BadEvents(format!("line {}: {what}", lineno + 2));
        if parts.len() != 4 {
            return Err(bad("expected 4 fields"));
        }
        let u = UserId::new(parts[0]).map_err(|_| bad("bad user token"))?;
        let v = UserId::new(parts[1]).map_err(|_| bad("bad user token"))?;
        let start: u64 = parts[2].parse().map_err(|_| bad("bad start"))?;
        let end: u64 = parts[3].parse().map_err(|_| bad("bad end"))?;
        if u >= v {
            return Err(bad("pair not ordered u < v"));
        }
        if end <= start {
            return Err(bad("end not after start"));
        }
        events.push(ContactEvent { u, v, start, end });
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uid(s: &str) -> UserId {
        UserId::new(s).unwrap()
    }

    const HEADER: &str = "#mobitrace land=test extent=256 tau=10\nt,user,x,y,z\n";

    fn parse(text: &str) -> Result<(TraceSet, TraceSummary), ParseError> {
        parse_trace(text.as_bytes(), &IngestPolicy::default())
    }

    #[test]
    fn parses_three_row_fixture() {
        let text = format!(
            "{HEADER}0,a,10,10,20\n0,b,15,10,20\n10,a,10,10,20\n"
        );
        let (trace, summary) = parse(&text).unwrap();
        assert_eq!(trace.snapshot_count(), 2);
        assert_eq!(summary.unique_users, 2);
        assert_eq!(summary.mean_concurrency, 1.5);
        assert_eq!(summary.duration, 10);
        assert_eq!(summary.malformed_rows, 0);
        assert_eq!(summary.seated_rows, 0);
    }

    #[test]
    fn header_only_trace_is_empty() {
        let (trace, summary) = parse(HEADER).unwrap();
        assert_eq!(trace.snapshot_count(), 0);
        assert_eq!(summary.unique_users, 0);
        assert_eq!(summary.duration, 0);
        assert_eq!(summary.mean_concurrency, 0.0);
    }

    #[test]
    fn missing_or_bad_header_is_fatal() {
        assert!(matches!(
            parse(""),
            Err(ParseError::MissingHeader)
        ));
        assert!(matches!(
            parse("#wrong land=x extent=256 tau=10\nt,user,x,y,z\n"),
            Err(ParseError::BadHeader(_))
        ));
        assert!(matches!(
            parse("#mobitrace land=x extent=256 tau=10\nwrong\n"),
            Err(ParseError::MissingColumnsHeader)
        ));
        assert!(matches!(
            parse("#mobitrace land=x extent=-5 tau=10\nt,user,x,y,z\n"),
            Err(ParseError::BadHeader(_))
        ));
    }

    #[test]
    fn land_names_may_contain_spaces() {
        let text = "#mobitrace land=Isle of View extent=256 tau=10\nt,user,x,y,z\n";
        let (trace, _) = parse(text).unwrap();
        assert_eq!(trace.land().name, "Isle of View");
        let mut buf = Vec::new();
        write_trace(&trace, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), text);
    }

    #[test]
    fn seated_rows_dropped_by_default() {
        let text = format!("{HEADER}0,a,0,0,0\n0,b,1,1,1\n");
        let (trace, summary) = parse(&text).unwrap();
        assert_eq!(summary.seated_rows, 1);
        assert_eq!(summary.unique_users, 1);
        assert_eq!(trace.snapshots()[0].get(&uid("a")), None);
    }

    #[test]
    fn seated_rows_kept_as_present_on_request() {
        let text = format!("{HEADER}0,a,0,0,0\n0,b,1,1,1\n");
        let policy = IngestPolicy {
            sit_policy: SitPolicy::KeepPresent,
            ..Default::default()
        };
        let (trace, summary) = parse_trace(text.as_bytes(), &policy).unwrap();
        assert_eq!(summary.seated_rows, 1);
        assert_eq!(summary.unique_users, 2);
        assert_eq!(summary.mean_concurrency, 2.0);
        assert_eq!(trace.snapshots()[0].get(&uid("a")), Some(None));
    }

    #[test]
    fn duplicates_keep_first_and_count_malformed() {
        let text = format!("{HEADER}0,a,1,1,1\n0,a,9,9,9\n");
        let (trace, summary) = parse(&text).unwrap();
        assert_eq!(summary.malformed_rows, 1);
        assert_eq!(
            trace.snapshots()[0].get(&uid("a")),
            Some(Some(Position::new(1.0, 1.0, 1.0)))
        );
    }

    #[test]
    fn out_of_bounds_and_garbage_rows_are_malformed() {
        let text = format!(
            "{HEADER}0,a,300,10,20\n0,b,-1,0,0\n0,c,nan,1,1\nnot-a-row\n5,d,1,1,1\n0,e,1,1,1\n"
        );
        let (trace, summary) = parse(&text).unwrap();
        // out-of-bounds x, negative x, nan, bad columns, off-grid timestamp
        assert_eq!(summary.malformed_rows, 5);
        assert_eq!(summary.unique_users, 1);
        assert_eq!(trace.users().into_iter().next(), Some(uid("e")));
    }

    #[test]
    fn malformed_limit_aborts() {
        let text = format!("{HEADER}x\ny\nz\n");
        let policy = IngestPolicy {
            malformed_limit: 2,
            ..Default::default()
        };
        assert!(matches!(
            parse_trace(text.as_bytes(), &policy),
            Err(ParseError::TooManyMalformed { count: 3, limit: 2 })
        ));
    }

    #[test]
    fn missing_snapshots_become_empty_ones() {
        let text = format!("{HEADER}0,a,1,1,1\n30,a,1,1,1\n");
        let (trace, summary) = parse(&text).unwrap();
        assert_eq!(trace.snapshot_count(), 4);
        assert!(trace.snapshots()[1].is_empty());
        assert!(trace.snapshots()[2].is_empty());
        assert_eq!(summary.mean_concurrency, 0.5);
        let ts: Vec<u64> = trace.snapshots().iter().map(|s| s.t).collect();
        assert_eq!(ts, vec![0, 10, 20, 30]);
    }

    #[test]
    fn round_trips_exactly() {
        let text = format!("{HEADER}0,a,10,10,20\n0,b,15,10,20\n10,a,10,10,20\n");
        let (trace, _) = parse(&text).unwrap();
        let mut buf = Vec::new();
        write_trace(&trace, &mut buf).unwrap();
        let (reparsed, _) = parse_trace(&buf[..], &IngestPolicy::default()).unwrap();
        assert_eq!(reparsed, trace);
        let mut buf2 = Vec::new();
        write_trace(&reparsed, &mut buf2).unwrap();
        assert_eq!(buf, buf2, "re-emission is byte identical");
    }

    #[test]
    fn coordinates_are_stored_at_millimeter_precision() {
        let text = format!("{HEADER}0,a,1.23456,2,3\n");
        let (trace, _) = parse(&text).unwrap();
        assert_eq!(
            trace.snapshots()[0].get(&uid("a")),
            Some(Some(Position::new(1.235, 2.0, 3.0)))
        );
    }

    fn interval(u: &str, v: &str, start: u64, end: u64) -> ContactInterval {
        ContactInterval {
            u: uid(u),
            v: uid(v),
            start,
            end,
            left_censored: false,
            right_censored: false,
        }
    }

    #[test]
    fn contact_events_empty_body() {
        let mut buf = Vec::new();
        write_contact_events(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "u,v,start,end\n");
        assert!(read_contact_events(&buf[..]).unwrap().is_empty());
    }

    #[test]
    fn contact_events_are_sorted_and_pair_ordered() {
        let contacts = vec![interval("a", "b", 20, 30), interval("a", "b", 0, 10)];
        let mut buf = Vec::new();
        write_contact_events(&contacts, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "u,v,start,end\na,b,0,10\na,b,20,30\n");
    }

    #[test]
    fn contact_events_writer_normalizes_pair_order() {
        let contacts = vec![interval("b", "a", 0, 10)];
        let mut buf = Vec::new();
        write_contact_events(&contacts, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "u,v,start,end\na,b,0,10\n"
        );
    }

    #[test]
    fn contact_events_round_trip() {
        let contacts = vec![interval("a", "b", 0, 10), interval("b", "c", 0, 20)];
        let mut buf = Vec::new();
        write_contact_events(&contacts, &mut buf).unwrap();
        let events = read_contact_events(&buf[..]).unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(
            events[0],
            ContactEvent {
                u: uid("a"),
                v: uid("b"),
                start: 0,
                end: 10
            }
        );
    }

    #[test]
    fn contact_events_reader_rejects_malformed_files() {
        assert!(read_contact_events("nope\n".as_bytes()).is_err());
        assert!(read_contact_events("u,v,start,end\nb,a,0,10\n".as_bytes()).is_err());
        assert!(read_contact_events("u,v,start,end\na,b,10,10\n".as_bytes()).is_err());
        assert!(read_contact_events("u,v,start,end\na,b,ten,20\n".as_bytes()).is_err());
    }
}
