//! Weighted combination of usage factors into a score, and ranking.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::usage::{NodeKey, Snapshot, DEFAULT_HALF_LIFE_F, DEFAULT_HALF_LIFE_R};

const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arrangement {
    /// Included nodes keep their definition order.
    #[default]
    Stable,
    /// Included items are reordered by rank within their container.
    Ranked,
}

impl Arrangement {
    pub fn as_str(self) -> &'static str {
        match self {
            Arrangement::Stable => "stable",
            Arrangement::Ranked => "ranked",
        }
    }
}

impl FromStr for Arrangement {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stable" => Ok(Arrangement::Stable),
            "ranked" => Ok(Arrangement::Ranked),
            other => Err(format!("unknown arrangement `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicConfig {
    pub w_f: f64,
    pub w_r: f64,
    pub w_t: f64,
    /// Half-life of decayed frequency, seconds.
    pub half_life_f: f64,
    /// Half-life of recency, seconds.
    pub half_life_r: f64,
    /// Adaptive slots in a short menu.
    pub k: usize,
    pub arrangement: Arrangement,
    /// Fixed offset added to UTC before hour bucketing, seconds.
    pub tz_offset: i64,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        Self {
            w_f: 0.5,
            w_r: 0.3,
            w_t: 0.2,
            half_life_f: DEFAULT_HALF_LIFE_F,
            half_life_r: DEFAULT_HALF_LIFE_R,
            k: 8,
            arrangement: Arrangement::Stable,
            tz_offset: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("weights must be non-negative and sum to 1 (got {0})")]
    Weights(f64),
    #[error("half-lives must be positive")]
    HalfLife,
}

impl HeuristicConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let weights = [self.w_f, self.w_r, self.w_t];
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| w.is_nan() || *w < 0.0) || (sum - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(ConfigError::Weights(sum));
        }
        if !(self.half_life_f > 0.0 && self.half_life_r > 0.0) {
            return Err(ConfigError::HalfLife);
        }
        Ok(())
    }

    /// Parses `key value` lines over the defaults. Recognized keys: `w_f`,
    /// `w_r`, `w_t`, `half_life_f`, `half_life_r`, `k`, `arrangement`,
    /// `tz_offset`.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = HeuristicConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let syntax = |reason: String| ConfigError::Syntax { line: idx + 1, reason };
            let mut parts = line.split_whitespace();
            let (Some(key), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(syntax("expected `key value`".into()));
            };
            let real = || value.parse::<f64>().map_err(|_| syntax(format!("bad number `{value}`")));
            match key {
                "w_f" => config.w_f = real()?,
                "w_r" => config.w_r = real()?,
                "w_t" => config.w_t = real()?,
                "half_life_f" => config.half_life_f = real()?,
                "half_life_r" => config.half_life_r = real()?,
                "k" => config.k = value.parse().map_err(|_| syntax(format!("bad count `{value}`")))?,
                "arrangement" => config.arrangement = value.parse().map_err(syntax)?,
                "tz_offset" => {
                    config.tz_offset = value.parse().map_err(|_| syntax(format!("bad offset `{value}`")))?
                }
                other => return Err(syntax(format!("unknown key `{other}`"))),
            }
        }
        config.validate()?;
        Ok(config)
    }
}

impl fmt::Display for HeuristicConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "w_f {}", self.w_f)?;
        writeln!(f, "w_r {}", self.w_r)?;
        writeln!(f, "w_t {}", self.w_t)?;
        writeln!(f, "half_life_f {}", self.half_life_f)?;
        writeln!(f, "half_life_r {}", self.half_life_r)?;
        writeln!(f, "k {}", self.k)?;
        writeln!(f, "arrangement {}", self.arrangement.as_str())?;
        writeln!(f, "tz_offset {}", self.tz_offset)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Score {
    pub node: NodeKey,
    pub f_hat: f64,
    pub r: f64,
    pub tau: f64,
    pub s: f64,
    pub last_t: Option<i64>,
    /// Position of the node in definition order; the final tie-break.
    pub order: usize,
}

/// Scores one node from a snapshot; nodes absent from it score zero.
pub fn score(snapshot: &Snapshot, node: &NodeKey, config: &HeuristicConfig) -> Score {
    score_at(snapshot, node, 0, config)
}

fn score_at(snapshot: &Snapshot, node: &NodeKey, order: usize, config: &HeuristicConfig) -> Score {
    let (f_hat, r, tau, last_t) = snapshot
        .row(node)
        .map_or((0.0, 0.0, 0.0, None), |row| (row.f_hat, row.r, row.tau, row.last_t));
    let s = (config.w_f * f_hat + config.w_r * r + config.w_t * tau).clamp(0.0, 1.0);
    Score {
        node: node.clone(),
        f_hat,
        r,
        tau,
        s,
        last_t,
        order,
    }
}

/// Ranking order: higher score, then more recent selection (never-selected
/// last), then earlier in the definition.
pub fn compare(a: &Score, b: &Score) -> Ordering {
    b.s.total_cmp(&a.s)
        .then_with(|| match (a.last_t, b.last_t) {
            (Some(x), Some(y)) => y.cmp(&x),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        })
        .then_with(|| a.order.cmp(&b.order))
}

/// Ranks nodes given in definition order, best first.
pub fn rank(snapshot: &Snapshot, nodes: &[NodeKey], config: &HeuristicConfig) -> Vec<Score> {
    let mut scores: Vec<Score> = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| score_at(snapshot, n, i, config))
        .collect();
    scores.sort_by(compare);
    scores
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::usage::{snapshot, UsageEvent, UsageLog, SECONDS_PER_DAY};

    fn key(n: &str) -> NodeKey {
        NodeKey::new("m", n)
    }

    #[test]
    fn never_selected_scores_zero() {
        let config = HeuristicConfig::default();
        let snap = snapshot(&UsageLog::default(), 0, &config);
        let s = score(&snap, &key("a"), &config);
        assert_eq!((s.f_hat, s.r, s.tau, s.s), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn sole_fresh_selection_scores_one() {
        let config = HeuristicConfig::default();
        let mut log = UsageLog::default();
        log.record(UsageEvent::select(500, "s", "m", "a")).unwrap();
        let s = score(&snapshot(&log, 500, &config), &key("a"), &config);
        assert_eq!((s.f_hat, s.r, s.tau, s.s), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn week_old_selection_against_fresh_one() {
        let config = HeuristicConfig::default();
        let now = 30 * SECONDS_PER_DAY + 9 * 3600;
        let mut log = UsageLog::default();
        log.record(UsageEvent::select(now - 7 * SECONDS_PER_DAY, "s", "m", "a"))
            .unwrap();
        log.record(UsageEvent::select(now, "s", "m", "b")).unwrap();
        let s = score(&snapshot(&log, now, &config), &key("a"), &config);
        assert_eq!(s.f_hat, 0.5);
        assert_eq!(s.r, 0.0078125);
        assert_eq!(s.tau, 1.0);
        assert!((s.s - 0.45234375).abs() < 1e-15, "{}", s.s);
    }

    #[test]
    fn full_tie_keeps_definition_order() {
        let config = HeuristicConfig::default();
        let snap = snapshot(&UsageLog::default(), 0, &config);
        let nodes: Vec<_> = ["c", "a", "b"].into_iter().map(key).collect();
        let ranked: Vec<_> = rank(&snap, &nodes, &config).into_iter().map(|s| s.node).collect();
        assert_eq!(ranked, nodes);
    }

    #[test]
    fn equal_scores_break_on_recency() {
        // Only time affinity counts, and both nodes were selected in the same
        // hour, so scores tie and the more recent selection wins.
        let config = HeuristicConfig {
            w_f: 0.0,
            w_r: 0.0,
            w_t: 1.0,
            ..HeuristicConfig::default()
        };
        let mut log = UsageLog::default();
        log.record(UsageEvent::select(0, "s", "m", "b")).unwrap();
        log.record(UsageEvent::select(60, "s", "m", "a")).unwrap();
        let snap = snapshot(&log, 120, &config);
        let ranked = rank(&snap, &[key("b"), key("a")], &config);
        assert_eq!(ranked[0].s, ranked[1].s);
        assert_eq!(ranked[0].node, key("a"));

        let a = Score { node: key("a"), f_hat: 0.5, r: 0.0, tau: 0.0, s: 0.5, last_t: Some(9), order: 1 };
        let b = Score { node: key("b"), f_hat: 0.5, r: 0.0, tau: 0.0, s: 0.5, last_t: Some(3), order: 0 };
        assert_eq!(compare(&a, &b), Ordering::Less);
        let never = Score { last_t: None, order: 0, ..b.clone() };
        assert_eq!(compare(&b, &never), Ordering::Less);
    }

    #[test]
    fn config_file_parsing() {
        let c = HeuristicConfig::parse(
            "# tuned\nw_f 0.6\nw_r 0.4\nw_t 0\nhalf_life_f 1000\nhalf_life_r 10\nk 3\narrangement ranked\ntz_offset -3600\n",
        )
        .unwrap();
        assert_eq!(c.k, 3);
        assert_eq!(c.arrangement, Arrangement::Ranked);
        assert_eq!(c.tz_offset, -3600);
        assert_eq!(HeuristicConfig::parse(&c.to_string()).unwrap(), c);
        assert_eq!(HeuristicConfig::parse("").unwrap(), HeuristicConfig::default());

        assert!(matches!(
            HeuristicConfig::parse("w_q 1\n"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(HeuristicConfig::parse("w_f 0.9\n"), Err(ConfigError::Weights(_))));
        assert!(matches!(
            HeuristicConfig::parse("half_life_r 0\n"),
            Err(ConfigError::HalfLife)
        ));
        assert!(HeuristicConfig::parse("k -1\n").is_err());
        assert!(HeuristicConfig::parse("k 1 2\n").is_err());
    }
}
