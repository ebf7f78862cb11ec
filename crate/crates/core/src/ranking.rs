//! Friendly-neighbour tables: per-target rankings of source datasets by one
//! metric or by a Borda vote over several.
//!
//! Lower is closer for every metric. CSID is special: a negative CSID marks
//! a source that is less diverse than the target, so negative sources rank
//! below every non-negative one (ordered among themselves by `|csid|`).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Fid,
    Kid,
    Csid,
    MinSin,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Fid, Metric::Kid, Metric::Csid, Metric::MinSin];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Fid => "fid",
            Metric::Kid => "kid",
            Metric::Csid => "csid",
            Metric::MinSin => "min_sin",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fid" => Ok(Metric::Fid),
            "kid" => Ok(Metric::Kid),
            "csid" => Ok(Metric::Csid),
            "min_sin" | "minsin" | "min_sin_theta" | "sintheta" => Ok(Metric::MinSin),
            _ => Err(Error::Lookup {
                kind: "metric",
                name: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricCell {
    pub fid: Option<f64>,
    pub kid: Option<f64>,
    pub csid: Option<f64>,
    pub min_sin: Option<f64>,
}

impl MetricCell {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Fid => self.fid,
            Metric::Kid => self.kid,
            Metric::Csid => self.csid,
            Metric::MinSin => self.min_sin,
        }
    }

    pub fn set(&mut self, metric: Metric, value: f64) {
        let slot = match metric {
            Metric::Fid => &mut self.fid,
            Metric::Kid => &mut self.kid,
            Metric::Csid => &mut self.csid,
            Metric::MinSin => &mut self.min_sin,
        };
        *slot = Some(value);
    }
}

type Pair = (String, String);

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricTable {
    cells: BTreeMap<Pair, MetricCell>,
    exclusions: BTreeMap<Pair, String>,
}

impl MetricTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, source: &str, target: &str, metric: Metric, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::InvalidParameter {
                name: "value",
                detail: format!("{source} -> {target} {metric} = {value}"),
            });
        }
        self.cells
            .entry((source.to_string(), target.to_string()))
            .or_default()
            .set(metric, value);
        Ok(())
    }

    pub fn cell(&self, source: &str, target: &str) -> Option<&MetricCell> {
        self.cells.get(&(source.to_string(), target.to_string()))
    }

    pub fn exclude(&mut self, source: &str, target: &str, reason: &str) {
        let reason = if reason.is_empty() { "excluded" } else { reason };
        self.exclusions
            .insert((source.to_string(), target.to_string()), reason.to_string());
    }

    pub fn exclusion(&self, source: &str, target: &str) -> Option<&str> {
        self.exclusions
            .get(&(source.to_string(), target.to_string()))
            .map(String::as_str)
    }

    /// Excludes every `(source, target)` where the source carries `tag` and
    /// the target does not, e.g. grayscale sources for color targets.
    pub fn exclude_tag_mismatch(&mut self, tags: &BTreeMap<String, BTreeSet<String>>, tag: &str, reason: &str) {
        let has = |label: &str| tags.get(label).is_some_and(|t| t.contains(tag));
        let pairs: Vec<Pair> = self
            .cells
            .keys()
            .filter(|(s, t)| has(s) && !has(t))
            .cloned()
            .collect();
        for (s, t) in pairs {
            self.exclude(&s, &t, reason);
        }
    }

    pub fn targets(&self) -> BTreeSet<&str> {
        self.cells.keys().map(|(_, t)| t.as_str()).collect()
    }

    pub fn sources(&self) -> BTreeSet<&str> {
        self.cells.keys().map(|(s, _)| s.as_str()).collect()
    }

    /// Sources eligible for ranking against `target`: a cell exists, the
    /// source is not the target itself, and the pair is not excluded.
    fn participants(&self, target: &str) -> Result<Vec<(&str, &MetricCell)>> {
        if !self.cells.keys().any(|(_, t)| t == target) {
            return Err(Error::Lookup {
                kind: "target",
                name: target.to_string(),
            });
        }
        Ok(self
            .cells
            .iter()
            .filter(|((s, t), _)| t == target && s != target && !self.exclusions.contains_key(&(s.clone(), t.clone())))
            .map(|((s, _), c)| (s.as_str(), c))
            .collect())
    }

    /// Parses `source,target,metric,value[,excluded,reason]` CSV with a header row.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            source: String,
            target: String,
            metric: Option<String>,
            value: Option<f64>,
            excluded: Option<String>,
            reason: Option<String>,
        }
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let mut table = Self::new();
        for (i, rec) in rdr.deserialize::<Row>().enumerate() {
            let row = rec.map_err(|e| Error::format(format!("row {}", i + 1), e.to_string()))?;
            if let (Some(m), Some(v)) = (row.metric.as_deref().filter(|m| !m.is_empty()), row.value) {
                table.set(&row.source, &row.target, m.parse()?, v)?;
            } else {
                table.cells.entry((row.source.clone(), row.target.clone())).or_default();
            }
            let excluded = row
                .excluded
                .as_deref()
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "1" | "true" | "yes" | "y"));
            if excluded {
                table.exclude(&row.source, &row.target, row.reason.as_deref().unwrap_or(""));
            }
        }
        Ok(table)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(std::io::BufReader::new(f))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RankMethod {
    SingleMetric(Metric),
    BordaVote(Vec<Metric>),
}

impl RankMethod {
    pub fn metrics(&self) -> Vec<Metric> {
        match self {
            RankMethod::SingleMetric(m) => vec![*m],
            RankMethod::BordaVote(ms) => ms.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSource {
    pub source: String,
    pub borda_score: usize,
    /// 1-based position per metric; absent when the source lacks that metric.
    pub metric_ranks: BTreeMap<Metric, usize>,
    pub values: BTreeMap<Metric, f64>,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingResult {
    pub target: String,
    pub ordered_sources: Vec<RankedSource>,
    pub method: RankMethod,
}

impl RankingResult {
    pub fn top(&self, k: usize) -> Vec<&str> {
        self.ordered_sources
            .iter()
            .take(k)
            .map(|r| r.source.as_str())
            .collect()
    }

    /// `rank,source,borda,<metric>_value,<metric>_rank,…,flags`
    pub fn to_csv(&self) -> String {
        let metrics = self.method.metrics();
        let mut out = String::from("rank,source,borda");
        for m in &metrics {
            out.push_str(&format!(",{m}_value,{m}_rank"));
        }
        out.push_str(",flags\n");
        for (i, r) in self.ordered_sources.iter().enumerate() {
            out.push_str(&format!("{},{},{}", i + 1, r.source, r.borda_score));
            for m in &metrics {
                let v = r.values.get(m).map(f64::to_string).unwrap_or_default();
                let k = r.metric_ranks.get(m).map(usize::to_string).unwrap_or_default();
                out.push_str(&format!(",{v},{k}"));
            }
            out.push_str(&format!(",{}\n", r.flags.join(";")));
        }
        out
    }
}

/// Sources carrying `metric`, closest first.
fn metric_order<'a>(participants: &[(&'a str, &MetricCell)], metric: Metric) -> Vec<(&'a str, f64)> {
    let mut present: Vec<(&str, f64)> = participants
        .iter()
        .filter_map(|(s, c)| c.get(metric).map(|v| (*s, v)))
        .collect();
    present.sort_by(|(sa, a), (sb, b)| {
        let key = |v: f64| {
            if metric == Metric::Csid {
                (v < 0.0, v.abs())
            } else {
                (false, v)
            }
        };
        let (na, va) = key(*a);
        let (nb, vb) = key(*b);
        na.cmp(&nb).then(va.total_cmp(&vb)).then(sa.cmp(sb))
    });
    present
}

fn rank(table: &MetricTable, target: &str, method: RankMethod) -> Result<RankingResult> {
    let metrics = method.metrics();
    if metrics.is_empty() {
        return Err(Error::InvalidParameter {
            name: "metrics",
            detail: "at least one metric is required".into(),
        });
    }
    let participants = table.participants(target)?;
    let mut rows: BTreeMap<&str, RankedSource> = participants
        .iter()
        .map(|(s, _)| {
            (
                *s,
                RankedSource {
                    source: s.to_string(),
                    borda_score: 0,
                    metric_ranks: BTreeMap::new(),
                    values: BTreeMap::new(),
                    flags: Vec::new(),
                },
            )
        })
        .collect();

    let mut any = false;
    for &metric in &metrics {
        let order = metric_order(&participants, metric);
        any |= !order.is_empty();
        let k_total = order.len();
        for (pos, (source, value)) in order.iter().enumerate() {
            let row = rows.get_mut(source).expect("participant");
            row.borda_score += k_total - (pos + 1);
            row.metric_ranks.insert(metric, pos + 1);
            row.values.insert(metric, *value);
            if metric == Metric::Csid && *value < 0.0 {
                row.flags.push("negative-csid".into());
            }
        }
        for row in rows.values_mut() {
            if !row.metric_ranks.contains_key(&metric) {
                row.flags.push(format!("missing:{metric}"));
            }
        }
    }
    if !any {
        return Err(Error::EmptyRanking {
            target: target.to_string(),
            metric: metrics.iter().map(|m| m.name()).collect::<Vec<_>>().join(","),
        });
    }

    let single = matches!(method, RankMethod::SingleMetric(_));
    let mut ordered: Vec<RankedSource> = rows.into_values().collect();
    ordered.sort_by(|a, b| {
        let by_score = b.borda_score.cmp(&a.borda_score);
        // With one metric the last-ranked source scores 0 like the sources
        // that lack the metric; keep it ahead of them.
        let by_presence = if single {
            b.metric_ranks.is_empty().cmp(&a.metric_ranks.is_empty()).reverse()
        } else {
            std::cmp::Ordering::Equal
        };
        by_score.then(by_presence).then_with(|| a.source.cmp(&b.source))
    });
    Ok(RankingResult {
        target: target.to_string(),
        ordered_sources: ordered,
        method,
    })
}

/// Ranks sources for `target` by a single metric.
pub fn rank_single(table: &MetricTable, target: &str, metric: Metric) -> Result<RankingResult> {
    rank(table, target, RankMethod::SingleMetric(metric))
}

/// Borda count over `metrics`: position `k` of `K` scores `K - k`.
pub fn rank_vote(table: &MetricTable, target: &str, metrics: &[Metric]) -> Result<RankingResult> {
    rank(table, target, RankMethod::BordaVote(metrics.to_vec()))
}
