//! Random valid definitions, usage logs and edit operations for tests.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::adaptation::{AdaptError, SessionState, Transition, ViewMode};
use crate::editor::EditOp;
use crate::model::{
    ActionId, Item, Menu, MenuDefinition, MenuId, Node, NodeId, NodePath, Panel, PanelState, Segment, SubmenuLink,
    Tier,
};
use crate::usage::{EventKind, UsageEvent, UsageLog};

const LABEL_CHARS: &[char] = &['a', 'b', 'Z', ' ', '-', '.', '&', '/', '#', 'é', '9', '\t'];

pub fn random_label<R: Rng>(rng: &mut R) -> String {
    let len = rng.gen_range(0..8);
    (0..len).map(|_| *LABEL_CHARS.choose(rng).unwrap()).collect()
}

fn tier<R: Rng>(rng: &mut R) -> Tier {
    if rng.gen_bool(0.3) {
        Tier::Core
    } else {
        Tier::Adaptive
    }
}

fn item<R: Rng>(rng: &mut R, id: String) -> Node {
    Node::Item(Item {
        action: ActionId::new(format!("act.{id}")),
        id: NodeId::new(id),
        label: random_label(rng),
        tier: tier(rng),
    })
}

/// A valid definition with at most `max_nodes` nodes spread over one to
/// four menus. Links only point to later menus, so there are no cycles.
pub fn random_definition<R: Rng>(rng: &mut R, max_nodes: usize) -> MenuDefinition {
    let n_menus = rng.gen_range(1..=4);
    let mut budget = rng.gen_range(0..=max_nodes);
    let mut menus = Vec::with_capacity(n_menus);
    for m in 0..n_menus {
        let mut menu = Menu::new(format!("m{m}"), random_label(rng));
        let share = if m + 1 == n_menus { budget } else { rng.gen_range(0..=budget) };
        budget -= share;
        let mut left = share;
        let mut next_id = 0;
        let mut fresh = |prefix: &str| {
            next_id += 1;
            format!("{prefix}{next_id}")
        };
        while left > 0 {
            left -= 1;
            let roll = rng.gen_range(0..10);
            let node = match roll {
                0 | 1 => Node::Separator,
                2 if m + 1 < n_menus => Node::Submenu(SubmenuLink {
                    id: NodeId::new(fresh("s")),
                    label: random_label(rng),
                    target: MenuId::new(format!("m{}", rng.gen_range(m + 1..n_menus))),
                    tier: tier(rng),
                }),
                3 => {
                    let mut children = Vec::new();
                    let n_children = rng.gen_range(0..=left.min(5));
                    left -= n_children;
                    for _ in 0..n_children {
                        if rng.gen_bool(0.2) {
                            children.push(Node::Separator);
                        } else {
                            children.push(item(rng, fresh("i")));
                        }
                    }
                    Node::Panel(Panel {
                        id: NodeId::new(fresh("p")),
                        label: random_label(rng),
                        default_state: if rng.gen_bool(0.5) {
                            PanelState::Expanded
                        } else {
                            PanelState::Contracted
                        },
                        children,
                    })
                }
                _ => item(rng, fresh("i")),
            };
            menu.nodes.push(node);
        }
        menus.push(menu);
    }
    MenuDefinition::new(menus).expect("generated definitions are valid")
}

/// Selectable nodes of a definition as (menu, node) pairs.
pub fn selectable(def: &MenuDefinition) -> Vec<(MenuId, NodeId)> {
    def.menus
        .iter()
        .flat_map(|m| {
            m.walk()
                .into_iter()
                .filter(|(_, n)| n.is_selectable())
                .filter_map(move |(_, n)| Some((m.id.clone(), n.id()?.clone())))
        })
        .collect()
}

/// `n` selections of random selectable nodes with non-decreasing times
/// starting at `start`, gaps up to `max_gap` seconds.
pub fn random_selects<R: Rng>(rng: &mut R, def: &MenuDefinition, n: usize, start: i64, max_gap: i64) -> Vec<UsageEvent> {
    let targets = selectable(def);
    if targets.is_empty() {
        return Vec::new();
    }
    let mut t = start;
    (0..n)
        .map(|_| {
            t += rng.gen_range(0..=max_gap);
            let (m, node) = targets.choose(rng).unwrap().clone();
            UsageEvent::new(t, "gen", EventKind::Select, m, Some(node))
        })
        .collect()
}

pub fn log_of(events: Vec<UsageEvent>) -> UsageLog {
    let mut log = UsageLog::default();
    for e in events {
        log.record(e).expect("events are ordered");
    }
    log
}

/// Paths of every node, with separators addressed by index.
pub fn all_paths(def: &MenuDefinition) -> Vec<NodePath> {
    fn walk(base: &NodePath, nodes: &[Node], out: &mut Vec<NodePath>) {
        for (i, n) in nodes.iter().enumerate() {
            let seg = match n.id() {
                Some(id) => Segment::Id(id.clone()),
                None => Segment::Index(i),
            };
            let path = base.child(seg);
            out.push(path.clone());
            if let Node::Panel(p) = n {
                walk(&path, &p.children, out);
            }
        }
    }
    let mut out = Vec::new();
    for m in &def.menus {
        walk(&NodePath::menu(m.id.clone()), &m.nodes, &mut out);
    }
    out
}

/// Menus and panels, the containers nodes can be inserted into.
pub fn containers(def: &MenuDefinition) -> Vec<NodePath> {
    let mut out: Vec<NodePath> = def.menus.iter().map(|m| NodePath::menu(m.id.clone())).collect();
    for m in &def.menus {
        for n in &m.nodes {
            if let Node::Panel(p) = n {
                out.push(NodePath::node(m.id.clone(), p.id.clone()));
            }
        }
    }
    out
}

fn pick_or_new_id<R: Rng>(rng: &mut R, existing: &[NodePath]) -> String {
    // Reusing an existing id exercises duplicate detection.
    if rng.gen_bool(0.15) {
        if let Some(Segment::Id(id)) = existing.choose(rng).and_then(|p| p.segments.last()) {
            return id.to_string();
        }
    }
    if rng.gen_bool(0.02) {
        return "Bad Id".into();
    }
    format!("x{}", rng.gen_range(0..1000))
}

/// A random edit, mostly well-aimed at the definition but sometimes not.
pub fn random_edit<R: Rng>(rng: &mut R, def: &MenuDefinition) -> EditOp {
    let paths = all_paths(def);
    let containers = containers(def);
    let menu_ids: Vec<MenuId> = def.menus.iter().map(|m| m.id.clone()).collect();
    let any_path = |rng: &mut R| -> NodePath {
        if paths.is_empty() || rng.gen_bool(0.05) {
            NodePath::node("m0", "missing")
        } else {
            paths.choose(rng).unwrap().clone()
        }
    };
    let container = |rng: &mut R| containers.choose(rng).unwrap().clone();
    let index = |rng: &mut R| rng.gen_range(0..6);
    let target = |rng: &mut R| -> MenuId {
        if rng.gen_bool(0.05) {
            MenuId::new("nowhere")
        } else {
            menu_ids.choose(rng).unwrap().clone()
        }
    };
    match rng.gen_range(0..7) {
        0 => {
            let id = pick_or_new_id(rng, &paths);
            let node = match rng.gen_range(0..5) {
                0 => Node::Separator,
                1 => Node::Submenu(SubmenuLink {
                    id: NodeId::new(id),
                    label: random_label(rng),
                    target: target(rng),
                    tier: tier(rng),
                }),
                2 => Node::Panel(Panel {
                    id: NodeId::new(id),
                    label: random_label(rng),
                    default_state: PanelState::Contracted,
                    children: Vec::new(),
                }),
                _ => item(rng, id),
            };
            EditOp::InsertNode {
                parent: container(rng),
                index: index(rng),
                node,
            }
        }
        1 => EditOp::RemoveNode { path: any_path(rng) },
        2 => EditOp::MoveNode {
            src: any_path(rng),
            dst_parent: container(rng),
            index: index(rng),
        },
        3 => EditOp::Rename {
            path: if rng.gen_bool(0.2) {
                NodePath::menu(target(rng))
            } else {
                any_path(rng)
            },
            label: if rng.gen_bool(0.05) {
                "bad\"label".into()
            } else {
                random_label(rng)
            },
        },
        4 => EditOp::SetTier {
            path: any_path(rng),
            tier: tier(rng),
        },
        5 => EditOp::AddMenu {
            id: MenuId::new(if rng.gen_bool(0.2) {
                menu_ids.choose(rng).unwrap().to_string()
            } else {
                format!("n{}", rng.gen_range(0..1000))
            }),
            label: random_label(rng),
        },
        _ => EditOp::LinkSubmenu {
            path: container(rng).child(Segment::Id(NodeId::new(pick_or_new_id(rng, &paths)))),
            label: random_label(rng),
            target: target(rng),
        },
    }
}

/// One random session operation at time `t`. Operations the state rejects
/// (closed menus, core pins and so on) come back as errors.
pub fn random_transition<R: Rng>(
    rng: &mut R,
    def: &MenuDefinition,
    log: &UsageLog,
    session: &SessionState,
    t: i64,
) -> Result<Transition, AdaptError> {
    let menu = &def.menus.choose(rng).expect("definitions have a menu").id;
    let nodes: Vec<&Node> = def.menu(menu).unwrap().walk().into_iter().map(|(_, n)| n).collect();
    let node_id = |rng: &mut R, want: fn(&Node) -> bool| -> NodeId {
        nodes
            .iter()
            .filter(|n| want(n))
            .filter_map(|n| n.id())
            .collect::<Vec<_>>()
            .choose(rng)
            .map_or_else(|| NodeId::new("missing"), |id| (*id).clone())
    };
    match rng.gen_range(0..10) {
        0..=3 => session.select(def, log, menu, &node_id(rng, Node::is_selectable), t),
        4 => session.pin_item(def, log, menu, &node_id(rng, Node::is_selectable), t),
        5 => session.unpin_item(def, log, menu, &node_id(rng, Node::is_selectable), t),
        6 => {
            let state = if rng.gen_bool(0.5) { PanelState::Expanded } else { PanelState::Contracted };
            session.set_panel(def, log, menu, &node_id(rng, |n| matches!(n, Node::Panel(_))), state, t)
        }
        7 => {
            let mode = if rng.gen_bool(0.5) { ViewMode::Long } else { ViewMode::Short };
            session.set_mode(def, log, menu, mode, t)
        }
        8 => session.pin_menu(def, log, menu, t),
        _ => session.unpin_menu(def, log, menu, t),
    }
}
