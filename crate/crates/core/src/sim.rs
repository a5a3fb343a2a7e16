//! Navigation cost, synthetic Zipf traces and trace replay.
//!
//! Cost of reaching a target: 1 to open the root menu, then for every menu
//! on the way the position of the next entry in the view the user sees. A
//! node missing from a short view costs the whole short view plus one
//! expansion before its long-view position is paid; a contracted panel costs
//! one more step to expand it.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::adaptation::{compose_view, AdaptError, SessionState, ViewMode};
use crate::heuristics::HeuristicConfig;
use crate::model::{ActionId, Item, Menu, MenuDefinition, MenuId, Node, NodeId, PanelState, Tier};
use crate::usage::{snapshot, EventKind, LogError, NodeKey, Snapshot, StatsParams, UsageEvent, UsageLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Policy {
    /// Short views driven by usage, expanded on demand.
    Adaptive,
    /// Always the full long view.
    Static,
}

impl Policy {
    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Adaptive => "adaptive",
            Policy::Static => "static",
        }
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "adaptive" => Ok(Policy::Adaptive),
            "static" => Ok(Policy::Static),
            other => Err(format!("unknown policy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("unknown target `{target}`{}", .line.map(|l| format!(" (trace line {l})")).unwrap_or_default())]
    UnknownTarget { target: String, line: Option<usize> },
    #[error("trace line {line}: {source}")]
    Replay {
        line: usize,
        #[source]
        source: AdaptError,
    },
    #[error(transparent)]
    Log(#[from] LogError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NavCost {
    pub cost: u64,
    /// Short-to-long expansions plus panel expansions needed on the way.
    pub expansions: u64,
}

/// Menus and nodes selected on the shortest link path from the root to the
/// target, ending with the target itself. Ties go to definition order.
pub fn route(def: &MenuDefinition, target: &NodeKey) -> Option<Vec<NodeKey>> {
    let unknown = || None;
    let menu = def.menu(&target.menu)?;
    if !menu.find(&target.node).is_some_and(|(_, n)| n.is_selectable()) {
        return unknown();
    }
    let root = def.root()?;
    let mut came_from: HashMap<&MenuId, NodeKey> = HashMap::new();
    let mut queue = VecDeque::from([&root.id]);
    let mut seen = vec![&root.id];
    while let Some(current) = queue.pop_front() {
        if current == &target.menu {
            break;
        }
        let Some(m) = def.menu(current) else { continue };
        for node in &m.nodes {
            if let Node::Submenu(link) = node {
                if !seen.contains(&&link.target) {
                    seen.push(&link.target);
                    came_from.insert(&link.target, NodeKey::new(current.clone(), link.id.clone()));
                    queue.push_back(&link.target);
                }
            }
        }
    }
    let mut steps = vec![target.clone()];
    let mut at = &target.menu;
    while at != &root.id {
        let link = came_from.get(at)?;
        steps.push(link.clone());
        at = &link.menu;
    }
    steps.reverse();
    Some(steps)
}

fn step_cost(
    def: &MenuDefinition,
    session: &SessionState,
    snap: &Snapshot,
    config: &HeuristicConfig,
    step: &NodeKey,
    policy: Policy,
) -> Result<NavCost, AdaptError> {
    let menu: &Menu = def.menu(&step.menu).ok_or_else(|| AdaptError::UnknownMenu(step.menu.clone()))?;
    let (panel, _) = menu
        .find(&step.node)
        .ok_or_else(|| AdaptError::UnknownNode(step.clone()))?;
    let contracted_panel = panel.filter(|p| {
        let default = menu.panel(p).map_or(PanelState::Contracted, |p| p.default_state);
        session.panel_state(&menu.id, p, default) == PanelState::Contracted
    });
    let opened;
    let with_panel_open = match contracted_panel {
        Some(p) => {
            let mut s = session.clone();
            s.panel_states
                .insert(NodeKey::new(menu.id.clone(), p.clone()), PanelState::Expanded);
            opened = s;
            &opened
        }
        None => session,
    };

    let mut out = NavCost::default();
    let mut mode = match policy {
        Policy::Static => ViewMode::Long,
        Policy::Adaptive => session.mode(&menu.id),
    };
    if mode == ViewMode::Short {
        let probe = compose_view(def, &menu.id, snap, with_panel_open, config, mode)?;
        if probe.position_of(&step.node).is_none() {
            let short = compose_view(def, &menu.id, snap, session, config, mode)?;
            out.cost += short.entries.len() as u64 + 1;
            out.expansions += 1;
            mode = ViewMode::Long;
        }
    }
    if contracted_panel.is_some() {
        out.cost += 1;
        out.expansions += 1;
    }
    let view = compose_view(def, &menu.id, snap, with_panel_open, config, mode)?;
    let pos = view
        .position_of(&step.node)
        .expect("long view with the panel open shows every node");
    out.cost += pos as u64;
    Ok(out)
}

/// Cost of reaching `target` from a closed root under the current state.
pub fn navigation_cost(
    def: &MenuDefinition,
    session: &SessionState,
    snap: &Snapshot,
    config: &HeuristicConfig,
    target: &NodeKey,
    policy: Policy,
) -> Result<NavCost, SimError> {
    let unknown = || SimError::UnknownTarget {
        target: target.to_string(),
        line: None,
    };
    let steps = route(def, target).ok_or_else(unknown)?;
    let mut total = NavCost { cost: 1, expansions: 0 };
    for step in &steps {
        let c = step_cost(def, session, snap, config, step, policy).map_err(|_| unknown())?;
        total.cost += c.cost;
        total.expansions += c.expansions;
    }
    Ok(total)
}

/// SplitMix64 generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// `next_u64() / 2^64`. Outputs within 2^10 of 2^64 round up to 1.0.
    pub fn next_unit(&mut self) -> f64 {
        self.next_u64() as f64 / 18_446_744_073_709_551_616.0
    }
}

/// Cumulative distribution of P(i) ∝ 1/i^s over ranks 1..=n.
pub fn zipf_cdf(n: usize, s: f64) -> Vec<f64> {
    let weights: Vec<f64> = (1..=n).map(|i| (i as f64).powf(-s)).collect();
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w;
            acc / total
        })
        .collect()
}

/// Smallest 1-based rank whose cumulative probability exceeds `u`.
pub fn zipf_pick(cdf: &[f64], u: f64) -> usize {
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1) + 1
}

pub const SYNTH_MENU: &str = "main";
pub const SYNTH_SESSION: &str = "synth";

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub n_items: usize,
    pub zipf_s: f64,
    pub n_events: usize,
    pub seed: u64,
    pub start_t: i64,
    pub step_s: i64,
}

/// Stream offset for [`synth_layout`], so the layout does not reuse the
/// trace's draws.
const LAYOUT_STREAM: u64 = 0xA5A5_A5A5_A5A5_A5A5;

/// Seeded Fisher-Yates permutation of the ranks `1..=n`: entry p is the
/// rank of the item shown at position p + 1.
pub fn synth_layout(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = SplitMix64::new(seed ^ LAYOUT_STREAM);
    let mut order: Vec<usize> = (1..=n).collect();
    for i in (1..n).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        order.swap(i, j);
    }
    order
}

/// The flat menu synthetic traces select from: adaptive items `i1..iN`,
/// where `iR` is the item of Zipf rank R. With a layout seed the items are
/// listed in [`synth_layout`] order, otherwise by rank.
pub fn synth_definition(n_items: usize, layout_seed: Option<u64>) -> MenuDefinition {
    let order = match layout_seed {
        Some(seed) => synth_layout(n_items, seed),
        None => (1..=n_items).collect(),
    };
    let mut menu = Menu::new(SYNTH_MENU, "Main");
    menu.nodes = order
        .into_iter()
        .map(|i| {
            Node::Item(Item {
                id: NodeId::new(format!("i{i}")),
                label: format!("Item {i}"),
                action: ActionId::new(format!("cmd.i{i}")),
                tier: Tier::Adaptive,
            })
        })
        .collect();
    MenuDefinition { menus: vec![menu] }
}

/// Zipf-distributed selections, one every `step_s` seconds from `start_t`.
pub fn synth(p: &SynthParams) -> Trace {
    assert!(p.n_items >= 1 && p.zipf_s > 0.0 && p.step_s >= 1);
    let cdf = zipf_cdf(p.n_items, p.zipf_s);
    let mut rng = SplitMix64::new(p.seed);
    let events = (0..p.n_events)
        .map(|k| {
            let rank = zipf_pick(&cdf, rng.next_unit());
            UsageEvent::select(p.start_t + k as i64 * p.step_s, SYNTH_SESSION, SYNTH_MENU, format!("i{rank}"))
        })
        .collect();
    Trace { events }
}

/// A scripted session in log-file format.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub events: Vec<UsageEvent>,
}

impl Trace {
    pub fn parse(text: &str) -> Result<Trace, LogError> {
        let log = UsageLog::parse(text, StatsParams::default())?;
        Ok(Trace {
            events: log.events().to_vec(),
        })
    }

    pub fn to_text(&self) -> String {
        self.events.iter().map(|e| format!("{e}\n")).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemCost {
    pub node: NodeKey,
    pub selections: u64,
    pub total_cost: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub policy: Policy,
    pub selections: u64,
    pub total_cost: u64,
    pub mean_cost: f64,
    pub expansions: u64,
    /// Selected nodes in definition order.
    pub rows: Vec<ItemCost>,
}

impl CostReport {
    /// Two tab-separated tables: the summary, then one row per selected node.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("policy\tselections\ttotal_cost\tmean_cost\texpansions\n");
        out.push_str(&format!(
            "{}\t{}\t{}\t{:.6}\t{}\n\nnode\tselections\ttotal_cost\tmean_cost\n",
            self.policy.as_str(),
            self.selections,
            self.total_cost,
            self.mean_cost,
            self.expansions
        ));
        for row in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{:.6}\n",
                row.node,
                row.selections,
                row.total_cost,
                row.total_cost as f64 / row.selections as f64
            ));
        }
        out
    }
}

impl fmt::Display for CostReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} selections, total cost {}, mean {:.6}, {} expansions",
            self.policy.as_str(),
            self.selections,
            self.total_cost,
            self.mean_cost,
            self.expansions
        )
    }
}

/// Replays a trace, charging each selection against the state built from
/// the events before it.
pub fn replay(def: &MenuDefinition, trace: &Trace, config: &HeuristicConfig, policy: Policy) -> Result<CostReport, SimError> {
    let mut log = UsageLog::new(StatsParams::from(config));
    let mut session = SessionState::new("replay", def);
    let mut per_node: HashMap<NodeKey, (u64, u64)> = HashMap::new();
    let mut report = CostReport {
        policy,
        selections: 0,
        total_cost: 0,
        mean_cost: 0.0,
        expansions: 0,
        rows: Vec::new(),
    };
    let empty = snapshot(&UsageLog::default(), 0, config);

    for (idx, event) in trace.events.iter().enumerate() {
        let line = idx + 1;
        let t = event.t;
        let replay_err = |source| SimError::Replay { line, source };
        let next = match (event.kind, event.node.as_ref()) {
            (EventKind::Select, Some(node)) => {
                let key = NodeKey::new(event.menu.clone(), node.clone());
                let snap = match policy {
                    Policy::Adaptive => snapshot(&log, t, config),
                    Policy::Static => empty.clone(),
                };
                let nav = navigation_cost(def, &session, &snap, config, &key, policy).map_err(|e| match e {
                    SimError::UnknownTarget { target, .. } => SimError::UnknownTarget {
                        target,
                        line: Some(line),
                    },
                    other => other,
                })?;
                report.selections += 1;
                report.total_cost += nav.cost;
                report.expansions += nav.expansions;
                let entry = per_node.entry(key).or_default();
                entry.0 += 1;
                entry.1 += nav.cost;
                match policy {
                    Policy::Adaptive => Some(session.select(def, &log, &event.menu, node, t)),
                    Policy::Static => None,
                }
            }
            (EventKind::PanelExpand | EventKind::PanelContract, Some(panel)) => {
                let state = if event.kind == EventKind::PanelExpand {
                    PanelState::Expanded
                } else {
                    PanelState::Contracted
                };
                Some(session.set_panel(def, &log, &event.menu, panel, state, t))
            }
            (_, _) if policy == Policy::Static => None,
            (EventKind::PinItem, Some(node)) => Some(session.pin_item(def, &log, &event.menu, node, t)),
            (EventKind::UnpinItem, Some(node)) => Some(session.unpin_item(def, &log, &event.menu, node, t)),
            (EventKind::PinMenu, None) => Some(
                session
                    .open_menu(def, &event.menu)
                    .and_then(|s| s.pin_menu(def, &log, &event.menu, t)),
            ),
            (EventKind::UnpinMenu, None) => Some(session.unpin_menu(def, &log, &event.menu, t)),
            (EventKind::Expand, None) => Some(session.expand(def, &log, &event.menu, t)),
            (EventKind::Collapse, None) => Some(session.collapse(def, &log, &event.menu, t)),
            _ => None,
        };
        if let Some(result) = next {
            session = result.map_err(replay_err)?.state;
        }
        log.record(event.clone())?;
    }

    report.mean_cost = if report.selections == 0 {
        0.0
    } else {
        report.total_cost as f64 / report.selections as f64
    };
    for menu in &def.menus {
        for (_, node) in menu.walk() {
            let Some(id) = node.id() else { continue };
            let key = NodeKey::new(menu.id.clone(), id.clone());
            if let Some(&(selections, total_cost)) = per_node.get(&key) {
                report.rows.push(ItemCost {
                    node: key,
                    selections,
                    total_cost,
                });
            }
        }
    }
    Ok(report)
}
