//! Append-only usage log and the per-item factors derived from it.
//!
//! Decayed frequency uses a half-life: a selection made `Δt` seconds ago
//! contributes `2^(−Δt/H_f)`. Recency is `2^(−Δt/H_r)` of the last selection,
//! and time affinity is the share of an item's selections that fell in the
//! current hour-of-day bucket. Only `select` events feed these factors.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::heuristics::HeuristicConfig;
use crate::model::{is_valid_id, MenuId, NodeId};

pub const SECONDS_PER_DAY: i64 = 86_400;
pub const DEFAULT_HALF_LIFE_F: f64 = 604_800.0;
pub const DEFAULT_HALF_LIFE_R: f64 = 86_400.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Select,
    Expand,
    Collapse,
    PinMenu,
    UnpinMenu,
    PinItem,
    UnpinItem,
    PanelExpand,
    PanelContract,
}

impl EventKind {
    pub const ALL: [EventKind; 9] = [
        EventKind::Select,
        EventKind::Expand,
        EventKind::Collapse,
        EventKind::PinMenu,
        EventKind::UnpinMenu,
        EventKind::PinItem,
        EventKind::UnpinItem,
        EventKind::PanelExpand,
        EventKind::PanelContract,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Select => "select",
            EventKind::Expand => "expand",
            EventKind::Collapse => "collapse",
            EventKind::PinMenu => "pin_menu",
            EventKind::UnpinMenu => "unpin_menu",
            EventKind::PinItem => "pin_item",
            EventKind::UnpinItem => "unpin_item",
            EventKind::PanelExpand => "panel_expand",
            EventKind::PanelContract => "panel_contract",
        }
    }

    /// Whether events of this kind address a node (item, link or panel).
    pub fn has_node(self) -> bool {
        !matches!(
            self,
            EventKind::Expand | EventKind::Collapse | EventKind::PinMenu | EventKind::UnpinMenu
        )
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown event kind `{s}`"))
    }
}

/// A node addressed by menu, the way usage records name items.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeKey {
    pub menu: MenuId,
    pub node: NodeId,
}

impl NodeKey {
    pub fn new(menu: impl Into<MenuId>, node: impl Into<NodeId>) -> Self {
        Self {
            menu: menu.into(),
            node: node.into(),
        }
    }
}

impl fmt::Display for NodeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.menu, self.node)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageEvent {
    /// Unix seconds, UTC.
    pub t: i64,
    pub session: String,
    pub kind: EventKind,
    pub menu: MenuId,
    pub node: Option<NodeId>,
}

impl UsageEvent {
    pub fn new(
        t: i64,
        session: impl Into<String>,
        kind: EventKind,
        menu: impl Into<MenuId>,
        node: Option<NodeId>,
    ) -> Self {
        Self {
            t,
            session: session.into(),
            kind,
            menu: menu.into(),
            node,
        }
    }

    pub fn select(t: i64, session: impl Into<String>, menu: impl Into<MenuId>, node: impl Into<NodeId>) -> Self {
        Self::new(t, session, EventKind::Select, menu, Some(node.into()))
    }

    pub fn key(&self) -> Option<NodeKey> {
        self.node.as_ref().map(|n| NodeKey {
            menu: self.menu.clone(),
            node: n.clone(),
        })
    }

    fn check(&self) -> Result<(), String> {
        if self.t < 0 {
            return Err(format!("negative timestamp {}", self.t));
        }
        if !is_valid_id(&self.session) {
            return Err(format!("invalid session id `{}`", self.session));
        }
        match (self.kind.has_node(), &self.node) {
            (true, None) => Err(format!("`{}` needs a node", self.kind.as_str())),
            (false, Some(_)) => Err(format!("`{}` takes no node", self.kind.as_str())),
            _ => Ok(()),
        }
    }
}

/// `<t> <session> <kind> <menu>[/<node>]`
impl fmt::Display for UsageEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {}", self.t, self.session, self.kind.as_str(), self.menu)?;
        if let Some(node) = &self.node {
            write!(f, "/{node}")?;
        }
        Ok(())
    }
}

impl FromStr for UsageEvent {
    type Err = String;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [t, session, kind, target] = fields[..] else {
            return Err(format!("expected 4 fields, found {}", fields.len()));
        };
        let t: i64 = t.parse().map_err(|_| format!("bad timestamp `{t}`"))?;
        let kind: EventKind = kind.parse()?;
        let (menu, node) = match target.split_once('/') {
            Some((m, n)) => (m, Some(n)),
            None => (target, None),
        };
        if !is_valid_id(menu) || node.is_some_and(|n| !is_valid_id(n)) {
            return Err(format!("bad target `{target}`"));
        }
        let event = UsageEvent::new(t, session, kind, menu, node.map(NodeId::new));
        event.check()?;
        Ok(event)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LogError {
    #[error("out-of-order event: t={t_new} precedes last event t={t_last}")]
    OutOfOrder { t_new: i64, t_last: i64 },
    #[error("invalid event: {0}")]
    InvalidEvent(String),
    #[error("line {line}: {source}")]
    Line {
        line: usize,
        #[source]
        source: Box<LogError>,
    },
}

impl LogError {
    fn at(self, line: usize) -> Self {
        LogError::Line {
            line,
            source: Box::new(self),
        }
    }

    /// The underlying error without line context.
    pub fn root(&self) -> &LogError {
        match self {
            LogError::Line { source, .. } => source.root(),
            other => other,
        }
    }
}

/// Parameters the incremental statistics are maintained under.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatsParams {
    pub half_life_f: f64,
    pub tz_offset: i64,
}

impl Default for StatsParams {
    fn default() -> Self {
        Self {
            half_life_f: DEFAULT_HALF_LIFE_F,
            tz_offset: 0,
        }
    }
}

impl From<&HeuristicConfig> for StatsParams {
    fn from(c: &HeuristicConfig) -> Self {
        Self {
            half_life_f: c.half_life_f,
            tz_offset: c.tz_offset,
        }
    }
}

/// Hour-of-day bucket (0..24) of a timestamp under a fixed offset.
pub fn hour_of(t: i64, tz_offset: i64) -> usize {
    ((t + tz_offset).rem_euclid(SECONDS_PER_DAY) / 3600) as usize
}

fn half_life_decay(dt: i64, half_life: f64) -> f64 {
    (-(dt as f64) / half_life).exp2()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItemStats {
    pub count: u64,
    pub last_t: Option<i64>,
    pub hour_counts: [u64; 24],
    /// Decayed frequency as of `decayed_f_at`.
    pub decayed_f: f64,
    pub decayed_f_at: i64,
}

impl Default for ItemStats {
    fn default() -> Self {
        Self {
            count: 0,
            last_t: None,
            hour_counts: [0; 24],
            decayed_f: 0.0,
            decayed_f_at: 0,
        }
    }
}

impl ItemStats {
    fn on_select(&mut self, t: i64, params: &StatsParams) {
        self.decayed_f = self.decayed_f * half_life_decay(t - self.decayed_f_at, params.half_life_f) + 1.0;
        self.decayed_f_at = t;
        self.count += 1;
        self.last_t = Some(t);
        self.hour_counts[hour_of(t, params.tz_offset)] += 1;
    }

    /// Decayed frequency carried forward to `t` (`t ≥ decayed_f_at`).
    pub fn decayed_at(&self, t: i64, half_life_f: f64) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        self.decayed_f * half_life_decay(t - self.decayed_f_at, half_life_f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UsageLog {
    params: StatsParams,
    events: Vec<UsageEvent>,
    stats: BTreeMap<NodeKey, ItemStats>,
}

impl Default for UsageLog {
    fn default() -> Self {
        Self::new(StatsParams::default())
    }
}

impl UsageLog {
    pub fn new(params: StatsParams) -> Self {
        Self {
            params,
            events: Vec::new(),
            stats: BTreeMap::new(),
        }
    }

    pub fn params(&self) -> StatsParams {
        self.params
    }

    pub fn events(&self) -> &[UsageEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn last_t(&self) -> Option<i64> {
        self.events.last().map(|e| e.t)
    }

    pub fn stats(&self, key: &NodeKey) -> Option<&ItemStats> {
        self.stats.get(key)
    }

    pub fn all_stats(&self) -> &BTreeMap<NodeKey, ItemStats> {
        &self.stats
    }

    /// Checks that `event` could be appended, without appending it.
    pub fn check_append(&self, event: &UsageEvent, after: Option<i64>) -> Result<(), LogError> {
        event.check().map_err(LogError::InvalidEvent)?;
        if let Some(t_last) = after.or(self.last_t()) {
            if event.t < t_last {
                return Err(LogError::OutOfOrder {
                    t_new: event.t,
                    t_last,
                });
            }
        }
        Ok(())
    }

    /// Appends an event, updating the incremental statistics for selects.
    pub fn record(&mut self, event: UsageEvent) -> Result<(), LogError> {
        self.check_append(&event, None)?;
        if event.kind == EventKind::Select {
            let key = event.key().expect("select carries a node");
            self.stats.entry(key).or_default().on_select(event.t, &self.params);
        }
        self.events.push(event);
        Ok(())
    }

    /// The same events with statistics maintained under other parameters.
    pub fn rebuilt(&self, params: StatsParams) -> UsageLog {
        let mut log = UsageLog::new(params);
        for e in &self.events {
            log.record(e.clone()).expect("events were already ordered");
        }
        log
    }

    /// Reads a log file: one event per line; blank lines and `#` comments skipped.
    pub fn parse(text: &str, params: StatsParams) -> Result<UsageLog, LogError> {
        let mut log = UsageLog::new(params);
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let event: UsageEvent = line
                .parse()
                .map_err(|e| LogError::InvalidEvent(e).at(idx + 1))?;
            log.record(event).map_err(|e| e.at(idx + 1))?;
        }
        Ok(log)
    }

    pub fn to_text(&self) -> String {
        self.events.iter().map(|e| format!("{e}\n")).collect()
    }
}

/// Batch decayed frequency: direct sum over every select of `key`.
pub fn decayed_frequency(log: &UsageLog, key: &NodeKey, t: i64, half_life_f: f64) -> f64 {
    log.events()
        .iter()
        .filter(|e| e.kind == EventKind::Select && e.menu == key.menu && e.node.as_ref() == Some(&key.node))
        .map(|e| half_life_decay(t - e.t, half_life_f))
        .sum()
}

pub fn recency(log: &UsageLog, key: &NodeKey, t: i64, half_life_r: f64) -> f64 {
    match log.stats(key).and_then(|s| s.last_t) {
        Some(last) => half_life_decay(t - last, half_life_r),
        None => 0.0,
    }
}

/// Share of the node's selections that fell in the hour bucket of `t`,
/// bucketed under the log's timezone offset.
pub fn time_affinity(log: &UsageLog, key: &NodeKey, t: i64) -> f64 {
    match log.stats(key) {
        Some(s) if s.count > 0 => s.hour_counts[hour_of(t, log.params().tz_offset)] as f64 / s.count as f64,
        _ => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorRow {
    /// Decayed frequency.
    pub f: f64,
    /// Decayed frequency normalized by the largest one in the snapshot.
    pub f_hat: f64,
    pub r: f64,
    pub tau: f64,
    pub count: u64,
    pub last_t: Option<i64>,
}

/// Factor table for every selected node at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: i64,
    pub rows: BTreeMap<NodeKey, FactorRow>,
}

impl Snapshot {
    pub fn row(&self, key: &NodeKey) -> Option<&FactorRow> {
        self.rows.get(key)
    }

    pub fn count(&self, key: &NodeKey) -> u64 {
        self.row(key).map_or(0, |r| r.count)
    }
}

/// Builds the factor table at `t` (`t` must not precede the last event).
pub fn snapshot(log: &UsageLog, t: i64, config: &HeuristicConfig) -> Snapshot {
    let params = StatsParams::from(config);
    let rebuilt;
    let log = if log.params() == params {
        log
    } else {
        rebuilt = log.rebuilt(params);
        &rebuilt
    };
    let mut rows: BTreeMap<NodeKey, FactorRow> = log
        .all_stats()
        .iter()
        .filter(|(_, s)| s.count > 0)
        .map(|(key, s)| {
            let last = s.last_t.expect("count > 0");
            let row = FactorRow {
                f: s.decayed_at(t, params.half_life_f),
                f_hat: 0.0,
                r: half_life_decay(t - last, config.half_life_r),
                tau: s.hour_counts[hour_of(t, params.tz_offset)] as f64 / s.count as f64,
                count: s.count,
                last_t: s.last_t,
            };
            (key.clone(), row)
        })
        .collect();
    let max = rows.values().map(|r| r.f).fold(0.0, f64::max);
    if max > 0.0 {
        for row in rows.values_mut() {
            row.f_hat = (row.f / max).min(1.0);
        }
    }
    Snapshot { t, rows }
}
