//! Empirical distribution machinery: CDF, CCDF and quantile queries over
//! sample collections, plus the plottable distribution file format.

use std::io::{self, BufRead, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("no samples")]
    NoSamples,
    #[error("sample {0} is not a finite non-negative number")]
    InvalidSample(f64),
    #[error("quantile {0} outside [0, 1]")]
    InvalidQuantile(f64),
    #[error("bad distribution file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A multiset of finite non-negative samples (seconds, meters or counts),
/// sorted at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    samples: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut samples: Vec<f64>) -> Result<Self, StatsError> {
        for &s in &samples {
            if !s.is_finite() || s < 0.0 {
                return Err(StatsError::InvalidSample(s));
            }
        }
        samples.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
        Ok(EmpiricalDistribution { samples })
    }

    pub fn from_counts<I: IntoIterator<Item = u64>>(counts: I) -> Self {
        let samples = counts.into_iter().map(|c| c as f64).collect();
        // u64 values are always finite and non-negative
        EmpiricalDistribution::new(samples).expect("counts are valid samples")
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    fn require_samples(&self) -> Result<(), StatsError> {
        if self.samples.is_empty() {
            Err(StatsError::NoSamples)
        } else {
            Ok(())
        }
    }

    fn distinct(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for &s in &self.samples {
            if out.last() != Some(&s) {
                out.push(s);
            }
        }
        out
    }

    // first index with samples[i] > x; samples are sorted ascending
    fn count_greater(&self, x: f64) -> usize {
        let i = self.samples.partition_point(|&s| s <= x);
        self.samples.len() - i
    }

    /// P(X > x) over the sample multiset.
    pub fn ccdf_at(&self, x: f64) -> Result<f64, StatsError> {
        self.require_samples()?;
        Ok(self.count_greater(x) as f64 / self.samples.len() as f64)
    }

    /// P(X ≤ x) over the sample multiset.
    pub fn cdf_at(&self, x: f64) -> Result<f64, StatsError> {
        self.require_samples()?;
        let below_or_eq = self.samples.len() - self.count_greater(x);
        Ok(below_or_eq as f64 / self.samples.len() as f64)
    }

    /// One point per distinct sample value, ascending: (x, P(X > x)).
    /// The first implicit point P(X > min−) = 1 is not emitted; the last
    /// point always has probability 0.
    pub fn ccdf_points(&self) -> Result<Vec<(f64, f64)>, StatsError> {
        self.require_samples()?;
        let n = self.samples.len() as f64;
        Ok(self
            .distinct()
            .into_iter()
            .map(|x| (x, self.count_greater(x) as f64 / n))
            .collect())
    }

    /// One point per distinct sample value, ascending: (x, P(X ≤ x)).
    pub fn cdf_points(&self) -> Result<Vec<(f64, f64)>, StatsError> {
        self.require_samples()?;
        let n = self.samples.len();
        Ok(self
            .distinct()
            .into_iter()
            .map(|x| (x, (n - self.count_greater(x)) as f64 / n as f64))
            .collect())
    }

    /// Lower empirical quantile: the smallest sample value v with
    /// cdf(v) ≥ q. No interpolation.
    pub fn quantile(&self, q: f64) -> Result<f64, StatsError> {
        self.require_samples()?;
        if !(0.0..=1.0).contains(&q) || q.is_nan() {
            return Err(StatsError::InvalidQuantile(q));
        }
        let n = self.samples.len();
        // smallest rank k (1-based) with k/n >= q, resolved with the same
        // float comparison cdf_at uses so the two can never disagree
        let mut k = ((q * n as f64).ceil() as usize).clamp(1, n);
        while k > 1 && (k - 1) as f64 / n as f64 >= q {
            k -= 1;
        }
        while k < n && (k as f64 / n as f64) < q {
            k += 1;
        }
        Ok(self.samples[k - 1])
    }

    pub fn median(&self) -> Result<f64, StatsError> {
        self.quantile(0.5)
    }
}

/// Which cumulative curve a distribution file carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistributionKind {
    Cdf,
    Ccdf,
}

impl DistributionKind {
    fn column(self) -> &'static str {
        match self {
            DistributionKind::Cdf => "cdf",
            DistributionKind::Ccdf => "ccdf",
        }
    }
}

/// Writes `value,cdf` / `value,ccdf` rows, one ascending row per distinct
/// value, probabilities with 6 decimal places.
pub fn write_distribution<W: Write>(
    points: &[(f64, f64)],
    kind: DistributionKind,
    mut w: W,
) -> io::Result<()> {
    writeln!(w, "value,{}", kind.column())?;
    for (value, p) in points {
        writeln!(w, "{},{:.6}", value, p)?;
    }
    Ok(())
}

/// Reads a distribution file back into (kind, points).
pub fn read_distribution<R: BufRead>(r: R) -> Result<(DistributionKind, Vec<(f64, f64)>), StatsError> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| StatsError::Format("empty file".into()))?;
    let kind = match header.trim_end() {
        "value,cdf" => DistributionKind::Cdf,
        "value,ccdf" => DistributionKind::Ccdf,
        other => return Err(StatsError::Format(format!("bad header {:?}", other))),
    };
    let mut points = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let (v, p) = line
            .split_once(',')
            .ok_or_else(|| StatsError::Format(format!("line {}: missing comma", lineno + 2)))?;
        let v: f64 = v
            .parse()
            .map_err(|_| StatsError::Format(format!("line {}: bad value", lineno + 2)))?;
        let p: f64 = p
            .parse()
            .map_err(|_| StatsError::Format(format!("line {}: bad probability", lineno + 2)))?;
        points.push((v, p));
    }
    Ok((kind, points))
}
