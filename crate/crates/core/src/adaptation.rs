//! Session state and short/long menu composition.
//!
//! A short view holds every core node, every pinned item, every panel header
//! and the top-K adaptive nodes by rank among those selected at least once.
//! The long view holds everything. Contracted panels render their header only,
//! in either mode.
//!
//! State transitions are pure: each operation returns a [`Transition`] with
//! the next state and the events to append, leaving the caller free to
//! persist the events before committing them.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::heuristics::{rank, Arrangement, HeuristicConfig};
use crate::model::{Menu, MenuDefinition, MenuId, Node, NodeId, NodeKind, PanelState, Tier};
use crate::usage::{EventKind, LogError, NodeKey, Snapshot, UsageEvent, UsageLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewMode {
    #[default]
    Short,
    Long,
}

impl ViewMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViewMode::Short => "short",
            ViewMode::Long => "long",
        }
    }
}

impl FromStr for ViewMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "short" => Ok(ViewMode::Short),
            "long" => Ok(ViewMode::Long),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdaptError {
    #[error("unknown menu `{0}`")]
    UnknownMenu(MenuId),
    #[error("unknown node `{0}`")]
    UnknownNode(NodeKey),
    #[error("unknown panel `{0}`")]
    UnknownPanel(NodeKey),
    #[error("menu `{0}` is not open")]
    MenuNotOpen(MenuId),
    #[error("`{0}` is a core node and always shown")]
    CorePinRedundant(NodeKey),
    #[error("`{0}` cannot be selected")]
    NotSelectable(NodeKey),
    #[error(transparent)]
    Log(#[from] LogError),
}

impl AdaptError {
    /// Stable kebab-case error kind, as reported over the wire.
    pub fn code(&self) -> &'static str {
        match self {
            AdaptError::UnknownMenu(_) => "unknown-menu",
            AdaptError::UnknownNode(_) => "unknown-node",
            AdaptError::UnknownPanel(_) => "unknown-panel",
            AdaptError::MenuNotOpen(_) => "menu-not-open",
            AdaptError::CorePinRedundant(_) => "core-pin-redundant",
            AdaptError::NotSelectable(_) => "not-selectable",
            AdaptError::Log(e) => match e.root() {
                LogError::OutOfOrder { .. } => "out-of-order",
                _ => "invalid-event",
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionState {
    pub session_id: String,
    /// Open menus in the order they were opened.
    pub open_menus: Vec<MenuId>,
    pub pinned_menus: BTreeSet<MenuId>,
    pub pinned_items: BTreeSet<NodeKey>,
    pub panel_states: BTreeMap<NodeKey, PanelState>,
    pub modes: BTreeMap<MenuId, ViewMode>,
    /// Simulated "now", the timestamp of the latest transition.
    pub clock: i64,
}

/// Next session state plus the events that produce it.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: SessionState,
    pub events: Vec<UsageEvent>,
}

impl Transition {
    pub fn commit(self, log: &mut UsageLog) -> Result<SessionState, LogError> {
        for e in self.events {
            log.record(e)?;
        }
        Ok(self.state)
    }
}

fn menu_of<'a>(def: &'a MenuDefinition, menu: &MenuId) -> Result<&'a Menu, AdaptError> {
    def.menu(menu).ok_or_else(|| AdaptError::UnknownMenu(menu.clone()))
}

fn node_of<'a>(def: &'a MenuDefinition, key: &NodeKey) -> Result<&'a Node, AdaptError> {
    menu_of(def, &key.menu)?
        .find(&key.node)
        .map(|(_, n)| n)
        .ok_or_else(|| AdaptError::UnknownNode(key.clone()))
}

impl SessionState {
    /// Fresh session with the root menu open.
    pub fn new(session_id: impl Into<String>, def: &MenuDefinition) -> Self {
        Self {
            session_id: session_id.into(),
            open_menus: def.root().map(|m| m.id.clone()).into_iter().collect(),
            pinned_menus: BTreeSet::new(),
            pinned_items: BTreeSet::new(),
            panel_states: BTreeMap::new(),
            modes: BTreeMap::new(),
            clock: 0,
        }
    }

    pub fn is_open(&self, menu: &MenuId) -> bool {
        self.open_menus.contains(menu)
    }

    pub fn mode(&self, menu: &MenuId) -> ViewMode {
        self.modes.get(menu).copied().unwrap_or_default()
    }

    pub fn panel_state(&self, menu: &MenuId, panel: &NodeId, default: PanelState) -> PanelState {
        self.panel_states
            .get(&NodeKey::new(menu.clone(), panel.clone()))
            .copied()
            .unwrap_or(default)
    }

    fn open(&mut self, menu: &MenuId) {
        if !self.is_open(menu) {
            self.open_menus.push(menu.clone());
        }
    }

    fn close(&mut self, menu: &MenuId) {
        if !self.pinned_menus.contains(menu) {
            self.open_menus.retain(|m| m != menu);
        }
    }

    fn transition(
        &self,
        log: &UsageLog,
        t: i64,
        kind: EventKind,
        menu: &MenuId,
        node: Option<&NodeId>,
        change: impl FnOnce(&mut SessionState),
    ) -> Result<Transition, AdaptError> {
        let event = UsageEvent::new(t, self.session_id.clone(), kind, menu.clone(), node.cloned());
        log.check_append(&event, None)?;
        let mut state = self.clone();
        state.clock = t;
        change(&mut state);
        Ok(Transition {
            state,
            events: vec![event],
        })
    }

    /// Selects an item or submenu link. A link opens its target menu; the
    /// menu the selection was made in closes unless it is pinned.
    pub fn select(
        &self,
        def: &MenuDefinition,
        log: &UsageLog,
        menu: &MenuId,
        node: &NodeId,
        t: i64,
    ) -> Result<Transition, AdaptError> {
        let key = NodeKey::new(menu.clone(), node.clone());
        let found = node_of(def, &key)?;
        if !found.is_selectable() {
            return Err(AdaptError::NotSelectable(key));
        }
        let opens = match found {
            Node::Submenu(link) => Some(link.target.clone()),
            _ => None,
        };
        self.transition(log, t, EventKind::Select, menu, Some(node), |s| {
            if let Some(target) = &opens {
                s.open(target);
            }
            s.close(menu);
        })
    }

    pub fn pin_menu(&self, def: &MenuDefinition, log: &UsageLog, menu: &MenuId, t: i64) -> Result<Transition, AdaptError> {
        menu_of(def, menu)?;
        if !self.is_open(menu) {
            return Err(AdaptError::MenuNotOpen(menu.clone()));
        }
        self.transition(log, t, EventKind::PinMenu, menu, None, |s| {
            s.pinned_menus.insert(menu.clone());
        })
    }

    pub fn unpin_menu(&self, def: &MenuDefinition, log: &UsageLog, menu: &MenuId, t: i64) -> Result<Transition, AdaptError> {
        menu_of(def, menu)?;
        self.transition(log, t, EventKind::UnpinMenu, menu, None, |s| {
            s.pinned_menus.remove(menu);
        })
    }

    /// Forces an adaptive item or link into every short view of its menu.
    pub fn pin_item(
        &self,
        def: &MenuDefinition,
        log: &UsageLog,
        menu: &MenuId,
        node: &NodeId,
        t: i64,
    ) -> Result<Transition, AdaptError> {
        let key = NodeKey::new(menu.clone(), node.clone());
        match node_of(def, &key)?.tier() {
            None => return Err(AdaptError::NotSelectable(key)),
            Some(Tier::Core) => return Err(AdaptError::CorePinRedundant(key)),
            Some(Tier::Adaptive) => {}
        }
        self.transition(log, t, EventKind::PinItem, menu, Some(node), |s| {
            s.pinned_items.insert(key);
        })
    }

    pub fn unpin_item(
        &self,
        def: &MenuDefinition,
        log: &UsageLog,
        menu: &MenuId,
        node: &NodeId,
        t: i64,
    ) -> Result<Transition, AdaptError> {
        let key = NodeKey::new(menu.clone(), node.clone());
        node_of(def, &key)?;
        self.transition(log, t, EventKind::UnpinItem, menu, Some(node), |s| {
            s.pinned_items.remove(&key);
        })
    }

    /// Expands or contracts one panel; other panels keep their state.
    pub fn set_panel(
        &self,
        def: &MenuDefinition,
        log: &UsageLog,
        menu: &MenuId,
        panel: &NodeId,
        state: PanelState,
        t: i64,
    ) -> Result<Transition, AdaptError> {
        let key = NodeKey::new(menu.clone(), panel.clone());
        if menu_of(def, menu)?.panel(panel).is_none() {
            return Err(AdaptError::UnknownPanel(key));
        }
        let kind = match state {
            PanelState::Expanded => EventKind::PanelExpand,
            PanelState::Contracted => EventKind::PanelContract,
        };
        self.transition(log, t, kind, menu, Some(panel), |s| {
            s.panel_states.insert(key, state);
        })
    }

    /// Switches a menu to long mode. The menu is shown, so it counts as open.
    pub fn expand(&self, def: &MenuDefinition, log: &UsageLog, menu: &MenuId, t: i64) -> Result<Transition, AdaptError> {
        self.set_mode(def, log, menu, ViewMode::Long, t)
    }

    pub fn collapse(&self, def: &MenuDefinition, log: &UsageLog, menu: &MenuId, t: i64) -> Result<Transition, AdaptError> {
        self.set_mode(def, log, menu, ViewMode::Short, t)
    }

    pub fn set_mode(
        &self,
        def: &MenuDefinition,
        log: &UsageLog,
        menu: &MenuId,
        mode: ViewMode,
        t: i64,
    ) -> Result<Transition, AdaptError> {
        menu_of(def, menu)?;
        let kind = match mode {
            ViewMode::Long => EventKind::Expand,
            ViewMode::Short => EventKind::Collapse,
        };
        self.transition(log, t, kind, menu, None, |s| {
            s.modes.insert(menu.clone(), mode);
            s.open(menu);
        })
    }

    /// Opens a menu without recording anything.
    pub fn open_menu(&self, def: &MenuDefinition, menu: &MenuId) -> Result<SessionState, AdaptError> {
        menu_of(def, menu)?;
        let mut s = self.clone();
        s.open(menu);
        Ok(s)
    }

    /// Closes a menu without recording anything; pinned menus stay open.
    pub fn close_menu(&self, def: &MenuDefinition, menu: &MenuId) -> Result<SessionState, AdaptError> {
        menu_of(def, menu)?;
        let mut s = self.clone();
        s.close(menu);
        Ok(s)
    }

    /// Replaces pinned items and panel states with persisted customization.
    pub fn with_customization(mut self, c: Customization) -> Self {
        self.pinned_items = c.pinned_items;
        self.panel_states = c.panel_states;
        self
    }

    pub fn customization(&self) -> Customization {
        Customization {
            pinned_items: self.pinned_items.clone(),
            panel_states: self.panel_states.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewEntry {
    /// 1-based, contiguous.
    pub pos: usize,
    /// Absent for separators.
    pub id: Option<NodeId>,
    pub kind: NodeKind,
    pub label: String,
    pub pinned: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub panel_state: Option<PanelState>,
    /// Containing panel, for panel children.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub panel: Option<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MenuView {
    pub menu: MenuId,
    pub mode: ViewMode,
    /// Whether the menu itself is pinned open.
    #[serde(default)]
    pub pinned: bool,
    /// True iff some adaptive node was left out.
    pub truncated: bool,
    pub entries: Vec<ViewEntry>,
}

impl MenuView {
    pub fn position_of(&self, node: &NodeId) -> Option<usize> {
        self.entries
            .iter()
            .find(|e| e.id.as_ref() == Some(node))
            .map(|e| e.pos)
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &NodeId> {
        self.entries.iter().filter_map(|e| e.id.as_ref())
    }

    /// Tab-separated rendering: a header line, then
    /// `pos kind id label panel_state pinned` per entry.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "menu {}\tmode={}\ttruncated={}\tpinned={}\n",
            self.menu,
            self.mode.as_str(),
            self.truncated,
            self.pinned
        );
        for e in &self.entries {
            let indent = if e.panel.is_some() { "  " } else { "" };
            out.push_str(&format!(
                "{}\t{}{}\t{}\t{}\t{}\t{}\n",
                e.pos,
                indent,
                e.kind.as_str(),
                e.id.as_ref().map_or("-", |i| i.as_str()),
                e.label,
                e.panel_state.map_or("-", |s| s.as_str()),
                if e.pinned { "pinned" } else { "-" },
            ));
        }
        out
    }
}

impl fmt::Display for MenuView {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Which selectable nodes of a menu a short view includes.
struct Inclusion {
    included: HashSet<NodeId>,
    /// Rank position of each included node, for the ranked arrangement.
    rank_pos: HashMap<NodeId, usize>,
    truncated: bool,
}

fn short_inclusion(menu: &Menu, snapshot: &Snapshot, session: &SessionState, config: &HeuristicConfig) -> Inclusion {
    let selectable: Vec<(&NodeId, Tier)> = menu
        .walk()
        .into_iter()
        .filter_map(|(_, n)| Some((n.id()?, n.tier()?)))
        .collect();
    let key = |id: &NodeId| NodeKey::new(menu.id.clone(), id.clone());

    let mut included = HashSet::new();
    let mut candidates = Vec::new();
    for &(id, tier) in &selectable {
        if tier == Tier::Core || session.pinned_items.contains(&key(id)) {
            included.insert(id.clone());
        } else if snapshot.count(&key(id)) >= 1 {
            candidates.push(key(id));
        }
    }
    for s in rank(snapshot, &candidates, config).into_iter().take(config.k) {
        included.insert(s.node.node);
    }
    let truncated = selectable
        .iter()
        .any(|(id, tier)| *tier == Tier::Adaptive && !included.contains(*id));

    let in_order: Vec<NodeKey> = selectable
        .iter()
        .filter(|(id, _)| included.contains(*id))
        .map(|(id, _)| key(id))
        .collect();
    let rank_pos = rank(snapshot, &in_order, config)
        .into_iter()
        .enumerate()
        .map(|(i, s)| (s.node.node, i))
        .collect();
    Inclusion {
        included,
        rank_pos,
        truncated,
    }
}

/// Drops leading and trailing separators and collapses runs of them.
fn tidy_separators(entries: Vec<ViewEntry>) -> Vec<ViewEntry> {
    let mut out: Vec<ViewEntry> = Vec::with_capacity(entries.len());
    for e in entries {
        if e.kind == NodeKind::Separator && out.last().is_none_or(|p| p.kind == NodeKind::Separator) {
            continue;
        }
        out.push(e);
    }
    while out.last().is_some_and(|e| e.kind == NodeKind::Separator) {
        out.pop();
    }
    out
}

struct Composer<'a> {
    menu: &'a Menu,
    session: &'a SessionState,
    /// `None` in long mode: everything is included in definition order.
    inclusion: Option<Inclusion>,
    ranked: bool,
}

impl Composer<'_> {
    fn entry(&self, node: &Node, panel: Option<&NodeId>) -> ViewEntry {
        let panel_state = match node {
            Node::Panel(p) => Some(self.session.panel_state(&self.menu.id, &p.id, p.default_state)),
            _ => None,
        };
        let pinned = node.is_selectable()
            && node.id().is_some_and(|id| {
                self.session
                    .pinned_items
                    .contains(&NodeKey::new(self.menu.id.clone(), id.clone()))
            });
        ViewEntry {
            pos: 0,
            id: node.id().cloned(),
            kind: node.kind(),
            label: node.label().to_owned(),
            pinned,
            panel_state,
            panel: panel.cloned(),
        }
    }

    fn keeps(&self, node: &Node) -> bool {
        match (&self.inclusion, node) {
            (None, _) => true,
            (Some(_), Node::Panel(_)) => true,
            (Some(_), Node::Separator) => !self.ranked,
            (Some(inc), n) => n.id().is_some_and(|id| inc.included.contains(id)),
        }
    }

    fn container(&self, nodes: &[Node], panel: Option<&NodeId>) -> Vec<ViewEntry> {
        let mut kept: Vec<&Node> = nodes.iter().filter(|n| self.keeps(n)).collect();
        if let (true, Some(inc)) = (self.ranked, &self.inclusion) {
            // Panels hold their slots; selectable nodes fill the rest by rank.
            let slots: Vec<usize> = (0..kept.len()).filter(|&i| kept[i].is_selectable()).collect();
            let mut movable: Vec<&Node> = slots.iter().map(|&i| kept[i]).collect();
            movable.sort_by_key(|n| n.id().map_or(usize::MAX, |id| inc.rank_pos[id]));
            for (slot, node) in slots.into_iter().zip(movable) {
                kept[slot] = node;
            }
        }
        let mut out = Vec::new();
        for node in kept {
            out.push(self.entry(node, panel));
            if let Node::Panel(p) = node {
                if self.session.panel_state(&self.menu.id, &p.id, p.default_state) == PanelState::Expanded {
                    out.extend(tidy_separators(self.container(&p.children, Some(&p.id))));
                }
            }
        }
        out
    }
}

/// Composes the view of `menu` in the given mode.
pub fn compose_view(
    def: &MenuDefinition,
    menu: &MenuId,
    snapshot: &Snapshot,
    session: &SessionState,
    config: &HeuristicConfig,
    mode: ViewMode,
) -> Result<MenuView, AdaptError> {
    let menu = menu_of(def, menu)?;
    let inclusion = match mode {
        ViewMode::Short => Some(short_inclusion(menu, snapshot, session, config)),
        ViewMode::Long => None,
    };
    let truncated = inclusion.as_ref().is_some_and(|i| i.truncated);
    let composer = Composer {
        menu,
        session,
        ranked: mode == ViewMode::Short && config.arrangement == Arrangement::Ranked,
        inclusion,
    };
    let mut entries = tidy_separators(composer.container(&menu.nodes, None));
    for (i, e) in entries.iter_mut().enumerate() {
        e.pos = i + 1;
    }
    Ok(MenuView {
        menu: menu.id.clone(),
        mode,
        pinned: session.pinned_menus.contains(&menu.id),
        truncated,
        entries,
    })
}

/// The persisted part of a session: pinned items and panel states.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Customization {
    pub pinned_items: BTreeSet<NodeKey>,
    pub panel_states: BTreeMap<NodeKey, PanelState>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("state file line {line}: {reason}")]
pub struct StateFileError {
    pub line: usize,
    pub reason: String,
}

fn parse_key(s: &str) -> Option<NodeKey> {
    let (m, n) = s.split_once('/')?;
    (crate::model::is_valid_id(m) && crate::model::is_valid_id(n)).then(|| NodeKey::new(m, n))
}

impl Customization {
    /// Reads a state file. Lines naming ids the definition does not have are
    /// skipped and reported as warnings.
    pub fn parse(text: &str, def: &MenuDefinition) -> Result<(Customization, Vec<String>), StateFileError> {
        let mut c = Customization::default();
        let mut warnings = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            let bad = |reason: &str| StateFileError {
                line,
                reason: reason.to_owned(),
            };
            match fields[..] {
                ["pin_item", target] => {
                    let key = parse_key(target).ok_or_else(|| bad("expected <menu>/<node>"))?;
                    match node_of(def, &key).map(|n| n.tier()) {
                        Ok(Some(Tier::Adaptive)) => {
                            c.pinned_items.insert(key);
                        }
                        Ok(_) => warnings.push(format!("line {line}: `{key}` cannot be pinned, ignored")),
                        Err(_) => warnings.push(format!("line {line}: unknown node `{key}`, ignored")),
                    }
                }
                ["panel", target, state] => {
                    let key = parse_key(target).ok_or_else(|| bad("expected <menu>/<panel>"))?;
                    let state: PanelState = state.parse().map_err(|e: String| bad(&e))?;
                    if def.menu(&key.menu).and_then(|m| m.panel(&key.node)).is_some() {
                        c.panel_states.insert(key, state);
                    } else {
                        warnings.push(format!("line {line}: unknown panel `{key}`, ignored"));
                    }
                }
                _ => return Err(bad("expected `pin_item <menu>/<node>` or `panel <menu>/<panel> <state>`")),
            }
        }
        Ok((c, warnings))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in &self.pinned_items {
            out.push_str(&format!("pin_item {key}\n"));
        }
        for (key, state) in &self.panel_states {
            out.push_str(&format!("panel {key} {}\n", state.as_str()));
        }
        out
    }
}
