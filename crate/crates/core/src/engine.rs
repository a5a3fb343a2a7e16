//! A single interactive session over a definition and its usage log, driven
//! by the request types of the HTTP interface.
//!
//! Mutations are split into [`Engine::plan`], which computes the next state
//! and the events to log without touching anything, and [`Engine::commit`].
//! The service writes the planned events to disk between the two.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adaptation::{compose_view, AdaptError, Customization, MenuView, SessionState, ViewMode};
use crate::heuristics::{rank, HeuristicConfig};
use crate::model::{MenuDefinition, MenuId, NodeId, PanelState};
use crate::usage::{snapshot, LogError, NodeKey, Snapshot, UsageEvent, UsageLog};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MenuSummary {
    pub id: MenuId,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MenusResponse {
    pub menus: Vec<MenuSummary>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectRequest {
    pub menu: MenuId,
    pub node: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpandRequest {
    pub menu: MenuId,
    pub mode: ViewMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PinKind {
    Menu,
    Item,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PinRequest {
    pub kind: PinKind,
    pub menu: MenuId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<NodeId>,
    pub on: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PanelRequest {
    pub menu: MenuId,
    pub panel: NodeId,
    pub state: PanelState,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClockRequest {
    pub at: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpenRequest {
    pub menu: MenuId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub node: NodeId,
    pub f_hat: f64,
    pub r: f64,
    pub tau: f64,
    pub s: f64,
    /// 1-based.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoresResponse {
    pub menu: MenuId,
    pub rows: Vec<ScoreRow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub clock: i64,
    pub open_menus: Vec<MenuId>,
    pub pinned_menus: Vec<MenuId>,
    pub pinned_items: Vec<String>,
    pub modes: BTreeMap<MenuId, ViewMode>,
    /// Events in the log.
    pub events: usize,
}

/// Reply to a mutating call: the state after it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationResponse {
    pub clock: i64,
    /// Log lines appended by the call.
    pub logged: Vec<String>,
    pub session: SessionSummary,
    /// The affected menu in its current mode; for a submenu link, the menu
    /// it opened.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub view: Option<MenuView>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Every mutating request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Select(SelectRequest),
    Expand(ExpandRequest),
    Pin(PinRequest),
    Panel(PanelRequest),
    Clock(ClockRequest),
    Open(OpenRequest),
    Close(OpenRequest),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Adapt(#[from] AdaptError),
    #[error("clock cannot move before the last logged event ({last}), got {at}")]
    ClockRegression { at: i64, last: i64 },
    #[error("bad request: {0}")]
    BadRequest(String),
}

impl From<LogError> for EngineError {
    fn from(e: LogError) -> Self {
        EngineError::Adapt(AdaptError::Log(e))
    }
}

impl EngineError {
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::Adapt(e) => e.code(),
            EngineError::ClockRegression { .. } => "clock-regression",
            EngineError::BadRequest(_) => "bad-request",
        }
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody {
            error: self.code().to_owned(),
            detail: Some(self.to_string()),
        }
    }
}

/// The outcome of a mutation, not yet applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub session: SessionState,
    pub events: Vec<UsageEvent>,
    /// Pinned items or panel states changed, so the state file is stale.
    pub customization_changed: bool,
    /// Menu whose view the reply carries.
    pub shown: Option<MenuId>,
}

pub const SERVICE_SESSION: &str = "web";

#[derive(Debug, Clone)]
pub struct Engine {
    def: MenuDefinition,
    config: HeuristicConfig,
    log: UsageLog,
    session: SessionState,
}

impl Engine {
    /// Starts a session at `clock`, which must not precede the log.
    pub fn new(
        def: MenuDefinition,
        config: HeuristicConfig,
        log: UsageLog,
        customization: Customization,
        clock: i64,
    ) -> Result<Self, EngineError> {
        if let Some(last) = log.last_t().filter(|&last| clock < last) {
            return Err(EngineError::ClockRegression { at: clock, last });
        }
        let log = log.rebuilt((&config).into());
        let mut session = SessionState::new(SERVICE_SESSION, &def).with_customization(customization);
        session.clock = clock;
        Ok(Self {
            def,
            config,
            log,
            session,
        })
    }

    pub fn definition(&self) -> &MenuDefinition {
        &self.def
    }

    pub fn config(&self) -> &HeuristicConfig {
        &self.config
    }

    pub fn log(&self) -> &UsageLog {
        &self.log
    }

    pub fn session(&self) -> &SessionState {
        &self.session
    }

    pub fn clock(&self) -> i64 {
        self.session.clock
    }

    pub fn menus(&self) -> MenusResponse {
        MenusResponse {
            menus: self
                .def
                .menus
                .iter()
                .map(|m| MenuSummary {
                    id: m.id.clone(),
                    label: m.label.clone(),
                })
                .collect(),
        }
    }

    fn snapshot(&self) -> Snapshot {
        snapshot(&self.log, self.clock(), &self.config)
    }

    /// The menu in `mode`, or in the session's current mode for it.
    pub fn view(&self, menu: &MenuId, mode: Option<ViewMode>) -> Result<MenuView, EngineError> {
        let mode = mode.unwrap_or_else(|| self.session.mode(menu));
        Ok(compose_view(&self.def, menu, &self.snapshot(), &self.session, &self.config, mode)?)
    }

    /// Selectable nodes of a menu, best first.
    pub fn scores(&self, menu: &MenuId) -> Result<ScoresResponse, EngineError> {
        let m = self
            .def
            .menu(menu)
            .ok_or_else(|| AdaptError::UnknownMenu(menu.clone()))?;
        let nodes: Vec<NodeKey> = m
            .walk()
            .into_iter()
            .filter(|(_, n)| n.is_selectable())
            .filter_map(|(_, n)| Some(NodeKey::new(menu.clone(), n.id()?.clone())))
            .collect();
        let rows = rank(&self.snapshot(), &nodes, &self.config)
            .into_iter()
            .enumerate()
            .map(|(i, s)| ScoreRow {
                node: s.node.node,
                f_hat: s.f_hat,
                r: s.r,
                tau: s.tau,
                s: s.s,
                rank: i + 1,
            })
            .collect();
        Ok(ScoresResponse {
            menu: menu.clone(),
            rows,
        })
    }

    pub fn summary(&self) -> SessionSummary {
        let s = &self.session;
        SessionSummary {
            clock: s.clock,
            open_menus: s.open_menus.clone(),
            pinned_menus: s.pinned_menus.iter().cloned().collect(),
            pinned_items: s.pinned_items.iter().map(|k| k.to_string()).collect(),
            modes: s.modes.clone(),
            events: self.log.len(),
        }
    }

    pub fn plan(&self, command: &Command) -> Result<Plan, EngineError> {
        let (def, log, s, t) = (&self.def, &self.log, &self.session, self.clock());
        let logged = |tr: crate::adaptation::Transition, shown: &MenuId| Plan {
            customization_changed: tr.state.customization() != s.customization(),
            session: tr.state,
            events: tr.events,
            shown: Some(shown.clone()),
        };
        let plan = match command {
            Command::Select(r) => {
                let tr = s.select(def, log, &r.menu, &r.node, t)?;
                let opened = tr.state.open_menus.iter().find(|m| !s.is_open(m)).cloned();
                logged(tr, opened.as_ref().unwrap_or(&r.menu))
            }
            Command::Expand(r) => logged(s.set_mode(def, log, &r.menu, r.mode, t)?, &r.menu),
            Command::Pin(r) => {
                let tr = match (r.kind, &r.node, r.on) {
                    (PinKind::Menu, None, true) => s.pin_menu(def, log, &r.menu, t)?,
                    (PinKind::Menu, None, false) => s.unpin_menu(def, log, &r.menu, t)?,
                    (PinKind::Item, Some(node), true) => s.pin_item(def, log, &r.menu, node, t)?,
                    (PinKind::Item, Some(node), false) => s.unpin_item(def, log, &r.menu, node, t)?,
                    (PinKind::Menu, Some(_), _) => {
                        return Err(EngineError::BadRequest("menu pins take no node".into()))
                    }
                    (PinKind::Item, None, _) => return Err(EngineError::BadRequest("item pins need a node".into())),
                };
                logged(tr, &r.menu)
            }
            Command::Panel(r) => logged(s.set_panel(def, log, &r.menu, &r.panel, r.state, t)?, &r.menu),
            Command::Clock(r) => {
                if let Some(last) = log.last_t().filter(|&last| r.at < last) {
                    return Err(EngineError::ClockRegression { at: r.at, last });
                }
                let mut session = s.clone();
                session.clock = r.at;
                Plan {
                    session,
                    events: Vec::new(),
                    customization_changed: false,
                    shown: None,
                }
            }
            Command::Open(r) | Command::Close(r) => {
                let session = match command {
                    Command::Open(_) => s.open_menu(def, &r.menu)?,
                    _ => s.close_menu(def, &r.menu)?,
                };
                Plan {
                    session,
                    events: Vec::new(),
                    customization_changed: false,
                    shown: Some(r.menu.clone()),
                }
            }
        };
        Ok(plan)
    }

    /// Applies a plan made against the current state.
    pub fn commit(&mut self, plan: Plan) -> Result<MutationResponse, EngineError> {
        let mut logged = Vec::with_capacity(plan.events.len());
        for e in plan.events {
            logged.push(e.to_string());
            self.log.record(e)?;
        }
        self.session = plan.session;
        let view = plan.shown.map(|m| self.view(&m, None)).transpose()?;
        Ok(MutationResponse {
            clock: self.clock(),
            logged,
            session: self.summary(),
            view,
        })
    }

    pub fn apply(&mut self, command: &Command) -> Result<MutationResponse, EngineError> {
        let plan = self.plan(command)?;
        self.commit(plan)
    }
}
