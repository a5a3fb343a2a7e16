//! Menu definitions: the data model, the line-oriented definition format and
//! structural validation.
//!
//! A definition file looks like this:
//!
//! ```text
//! menu main "Main"
//!   item open "Open" action=file.open tier=core
//!   sep
//!   panel fmt "Format" default=contracted
//!     item bold "Bold" action=fmt.bold tier=adaptive
//!   end
//!   submenu tools "Tools" -> tools tier=adaptive
//! end
//!
//! menu tools "Tools"
//!   item spell "Spelling" action=tools.spell tier=adaptive
//! end
//! ```
//!
//! The first menu is the root. Node ids are unique within their menu, menu ids
//! are unique across the definition. Actions are opaque identifiers: nothing in
//! this crate ever resolves or runs them.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

string_id!(
    /// Identifier of a menu, unique across a definition.
    MenuId
);
string_id!(
    /// Identifier of a node, unique within its menu.
    NodeId
);
string_id!(
    /// Opaque handle naming the command an item stands for.
    ActionId
);

/// True for identifiers matching `[A-Za-z0-9_.-]+`.
pub fn is_valid_id(s: &str) -> bool {
    !s.is_empty()
        && s
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'.' | b'-'))
}

/// Labels are quoted in the file format, so they cannot contain quotes or line breaks.
pub fn is_valid_label(s: &str) -> bool {
    !s.contains(['"', '\n', '\r'])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Core,
    #[default]
    Adaptive,
}

impl Tier {
    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Core => "core",
            Tier::Adaptive => "adaptive",
        }
    }
}

impl FromStr for Tier {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "core" => Ok(Tier::Core),
            "adaptive" => Ok(Tier::Adaptive),
            other => Err(format!("unknown tier `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PanelState {
    Expanded,
    #[default]
    Contracted,
}

impl PanelState {
    pub fn as_str(self) -> &'static str {
        match self {
            PanelState::Expanded => "expanded",
            PanelState::Contracted => "contracted",
        }
    }
}

impl FromStr for PanelState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "expanded" => Ok(PanelState::Expanded),
            "contracted" => Ok(PanelState::Contracted),
            other => Err(format!("unknown panel state `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Item {
    pub id: NodeId,
    pub label: String,
    pub action: ActionId,
    pub tier: Tier,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Panel {
    pub id: NodeId,
    pub label: String,
    pub default_state: PanelState,
    /// Items and separators. Anything else is representable but fails validation.
    pub children: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubmenuLink {
    pub id: NodeId,
    pub label: String,
    pub target: MenuId,
    pub tier: Tier,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Item(Item),
    Separator,
    Panel(Panel),
    Submenu(SubmenuLink),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Item,
    #[serde(rename = "sep")]
    Separator,
    Panel,
    Submenu,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Item => "item",
            NodeKind::Separator => "sep",
            NodeKind::Panel => "panel",
            NodeKind::Submenu => "submenu",
        }
    }
}

impl Node {
    pub fn id(&self) -> Option<&NodeId> {
        match self {
            Node::Item(i) => Some(&i.id),
            Node::Separator => None,
            Node::Panel(p) => Some(&p.id),
            Node::Submenu(s) => Some(&s.id),
        }
    }

    pub fn label(&self) -> &str {
        match self {
            Node::Item(i) => &i.label,
            Node::Separator => "",
            Node::Panel(p) => &p.label,
            Node::Submenu(s) => &s.label,
        }
    }

    pub fn kind(&self) -> NodeKind {
        match self {
            Node::Item(_) => NodeKind::Item,
            Node::Separator => NodeKind::Separator,
            Node::Panel(_) => NodeKind::Panel,
            Node::Submenu(_) => NodeKind::Submenu,
        }
    }

    /// Tier of selectable nodes (items and submenu links).
    pub fn tier(&self) -> Option<Tier> {
        match self {
            Node::Item(i) => Some(i.tier),
            Node::Submenu(s) => Some(s.tier),
            _ => None,
        }
    }

    /// Items and submenu links: the nodes a user can select and that carry usage.
    pub fn is_selectable(&self) -> bool {
        matches!(self, Node::Item(_) | Node::Submenu(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Menu {
    pub id: MenuId,
    pub label: String,
    pub nodes: Vec<Node>,
}

impl Menu {
    pub fn new(id: impl Into<MenuId>, label: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            label: label.into(),
            nodes: Vec::new(),
        }
    }

    /// All nodes in definition order, panel children directly after their
    /// panel, each paired with the id of its containing panel.
    pub fn walk(&self) -> Vec<(Option<&NodeId>, &Node)> {
        let mut out = Vec::new();
        for node in &self.nodes {
            out.push((None, node));
            if let Node::Panel(p) = node {
                out.extend(p.children.iter().map(|c| (Some(&p.id), c)));
            }
        }
        out
    }

    /// Finds a node by id at any depth, returning it with its containing panel.
    pub fn find(&self, id: &NodeId) -> Option<(Option<&NodeId>, &Node)> {
        self.walk()
            .into_iter()
            .find(|(_, node)| node.id() == Some(id))
    }

    pub fn panel(&self, id: &NodeId) -> Option<&Panel> {
        self.nodes.iter().find_map(|n| match n {
            Node::Panel(p) if &p.id == id => Some(p),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MenuDefinition {
    /// Menus in file order; the first one is the root.
    pub menus: Vec<Menu>,
}

impl MenuDefinition {
    /// Builds a definition, rejecting it if any structural invariant fails.
    pub fn new(menus: Vec<Menu>) -> Result<Self, DefinitionError> {
        let def = Self { menus };
        let violations = validate(&def);
        if violations.is_empty() {
            Ok(def)
        } else {
            Err(DefinitionError::Invalid(violations))
        }
    }

    pub fn root(&self) -> Option<&Menu> {
        self.menus.first()
    }

    pub fn menu(&self, id: &MenuId) -> Option<&Menu> {
        self.menus.iter().find(|m| &m.id == id)
    }

    pub fn menu_mut(&mut self, id: &MenuId) -> Option<&mut Menu> {
        self.menus.iter_mut().find(|m| &m.id == id)
    }

    pub fn node_count(&self) -> usize {
        self.menus.iter().map(|m| m.walk().len()).sum()
    }
}

/// One step of a [`NodePath`]: a node id, or `@N` for the N-th (0-based)
/// node of the container, which is how separators are addressed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Segment {
    Id(NodeId),
    Index(usize),
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Segment::Id(id) => write!(f, "{id}"),
            Segment::Index(i) => write!(f, "@{i}"),
        }
    }
}

/// `menu/segment/...`; the segments follow the container structure, so a
/// panel child is `menu/panel/item`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NodePath {
    pub menu: MenuId,
    pub segments: Vec<Segment>,
}

impl NodePath {
    pub fn menu(menu: impl Into<MenuId>) -> Self {
        Self {
            menu: menu.into(),
            segments: Vec::new(),
        }
    }

    pub fn node(menu: impl Into<MenuId>, node: impl Into<NodeId>) -> Self {
        Self {
            menu: menu.into(),
            segments: vec![Segment::Id(node.into())],
        }
    }

    pub fn child(&self, segment: Segment) -> Self {
        let mut segments = self.segments.clone();
        segments.push(segment);
        Self {
            menu: self.menu.clone(),
            segments,
        }
    }

    /// Path of the container holding the addressed node.
    pub fn parent(&self) -> Self {
        let mut segments = self.segments.clone();
        segments.pop();
        Self {
            menu: self.menu.clone(),
            segments,
        }
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.menu)?;
        for s in &self.segments {
            write!(f, "/{s}")?;
        }
        Ok(())
    }
}

impl FromStr for NodePath {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split('/');
        let menu = parts.next().unwrap_or_default();
        if !is_valid_id(menu) {
            return Err(format!("bad path `{s}`"));
        }
        let segments = parts
            .map(|p| {
                if let Some(idx) = p.strip_prefix('@') {
                    idx.parse().map(Segment::Index).map_err(|_| format!("bad path `{s}`"))
                } else if is_valid_id(p) {
                    Ok(Segment::Id(NodeId::new(p)))
                } else {
                    Err(format!("bad path `{s}`"))
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(NodePath {
            menu: MenuId::new(menu),
            segments,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("not found: {0}")]
pub struct NotFound(pub NodePath);

pub(crate) fn locate<'a>(nodes: &'a [Node], segment: &Segment) -> Option<(usize, &'a Node)> {
    match segment {
        Segment::Id(id) => nodes.iter().enumerate().find(|(_, n)| n.id() == Some(id)),
        Segment::Index(i) => nodes.get(*i).map(|n| (*i, n)),
    }
}

/// Resolves a path to the unique node it addresses.
pub fn resolve_path<'a>(def: &'a MenuDefinition, path: &NodePath) -> Result<&'a Node, NotFound> {
    let not_found = || NotFound(path.clone());
    let menu = def.menu(&path.menu).ok_or_else(not_found)?;
    let (first, rest) = path.segments.split_first().ok_or_else(not_found)?;
    let mut node = locate(&menu.nodes, first).ok_or_else(not_found)?.1;
    for segment in rest {
        let Node::Panel(panel) = node else {
            return Err(not_found());
        };
        node = locate(&panel.children, segment).ok_or_else(not_found)?.1;
    }
    Ok(node)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ViolationKind {
    EmptyDefinition,
    DuplicateId,
    DanglingSubmenu,
    Cycle,
    NestedPanel,
    InvalidId,
    InvalidLabel,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::EmptyDefinition => "empty-definition",
            ViolationKind::DuplicateId => "duplicate-id",
            ViolationKind::DanglingSubmenu => "dangling-submenu",
            ViolationKind::Cycle => "cycle",
            ViolationKind::NestedPanel => "nested-panel",
            ViolationKind::InvalidId => "invalid-id",
            ViolationKind::InvalidLabel => "invalid-label",
        }
    }
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Slash-separated location, e.g. `m1/s1`.
    pub path: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}", self.kind, self.path)
    }
}

/// Checks every structural invariant; an empty result means the definition is valid.
pub fn validate(def: &MenuDefinition) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |kind, path: String| out.push(Violation { kind, path });

    if def.menus.is_empty() {
        push(ViolationKind::EmptyDefinition, String::new());
    }

    let menu_ids: HashSet<&MenuId> = def.menus.iter().map(|m| &m.id).collect();
    let mut seen_menus = HashSet::new();
    for menu in &def.menus {
        let mpath = menu.id.to_string();
        if !is_valid_id(menu.id.as_str()) {
            push(ViolationKind::InvalidId, mpath.clone());
        }
        if !is_valid_label(&menu.label) {
            push(ViolationKind::InvalidLabel, mpath.clone());
        }
        if !seen_menus.insert(&menu.id) {
            push(ViolationKind::DuplicateId, mpath.clone());
        }

        let mut seen_nodes = HashSet::new();
        // (container path, node, index in container, panels above the node)
        let mut stack: Vec<(String, &Node, usize, usize)> = menu
            .nodes
            .iter()
            .enumerate()
            .rev()
            .map(|(i, n)| (mpath.clone(), n, i, 0))
            .collect();
        while let Some((parent, node, index, depth)) = stack.pop() {
            let path = match node.id() {
                Some(id) => format!("{parent}/{id}"),
                None => format!("{parent}/@{index}"),
            };
            if let Some(id) = node.id() {
                if !is_valid_id(id.as_str()) {
                    push(ViolationKind::InvalidId, path.clone());
                }
                if !seen_nodes.insert(id) {
                    push(ViolationKind::DuplicateId, path.clone());
                }
            }
            if !is_valid_label(node.label()) {
                push(ViolationKind::InvalidLabel, path.clone());
            }
            match node {
                Node::Item(item) => {
                    if !is_valid_id(item.action.as_str()) {
                        push(ViolationKind::InvalidId, path.clone());
                    }
                }
                Node::Separator => {}
                Node::Panel(panel) => {
                    if depth > 0 {
                        push(ViolationKind::NestedPanel, path.clone());
                    }
                    for (i, child) in panel.children.iter().enumerate().rev() {
                        stack.push((path.clone(), child, i, depth + 1));
                    }
                }
                Node::Submenu(link) => {
                    if depth > 0 {
                        push(ViolationKind::NestedPanel, path.clone());
                    }
                    if !menu_ids.contains(&link.target) {
                        push(ViolationKind::DanglingSubmenu, path.clone());
                    }
                }
            }
        }
    }

    for path in cycle_witnesses(def) {
        push(ViolationKind::Cycle, path);
    }
    out
}

/// One witness link per strongly connected component of the submenu graph
/// that contains a cycle. The witness is the first link, in definition
/// order, whose source and target both lie in the component.
fn cycle_witnesses(def: &MenuDefinition) -> Vec<String> {
    let mut index_of: HashMap<&MenuId, usize> = HashMap::new();
    for (i, m) in def.menus.iter().enumerate() {
        index_of.entry(&m.id).or_insert(i);
    }
    let n = def.menus.len();
    // (source menu, target menu, link path)
    let mut edges: Vec<(usize, usize, String)> = Vec::new();
    for (src, menu) in def.menus.iter().enumerate() {
        if index_of[&menu.id] != src {
            continue;
        }
        for node in &menu.nodes {
            let mut visit = |node: &Node, path: String| {
                if let Node::Submenu(link) = node {
                    if let Some(&dst) = index_of.get(&link.target) {
                        edges.push((src, dst, path));
                    }
                }
            };
            match node {
                Node::Panel(p) => {
                    for c in &p.children {
                        if let Some(id) = c.id() {
                            visit(c, format!("{}/{}/{}", menu.id, p.id, id));
                        }
                    }
                }
                other => {
                    if let Some(id) = other.id() {
                        visit(other, format!("{}/{}", menu.id, id));
                    }
                }
            }
        }
    }
    let mut adj = vec![Vec::new(); n];
    for (s, d, _) in &edges {
        adj[*s].push(*d);
    }
    let comp = tarjan(&adj);

    let mut reported = HashSet::new();
    let mut out = Vec::new();
    for (s, d, path) in &edges {
        if comp[*s] == comp[*d] && reported.insert(comp[*s]) {
            out.push(path.clone());
        }
    }
    out
}

/// Strongly connected component label per vertex.
fn tarjan(adj: &[Vec<usize>]) -> Vec<usize> {
    struct State<'a> {
        adj: &'a [Vec<usize>],
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        comp: Vec<usize>,
        next_index: usize,
        next_comp: usize,
    }

    fn connect(st: &mut State<'_>, v: usize) {
        st.index[v] = Some(st.next_index);
        st.low[v] = st.next_index;
        st.next_index += 1;
        st.stack.push(v);
        st.on_stack[v] = true;
        for &w in &st.adj[v] {
            match st.index[w] {
                None => {
                    connect(st, w);
                    st.low[v] = st.low[v].min(st.low[w]);
                }
                Some(iw) if st.on_stack[w] => st.low[v] = st.low[v].min(iw),
                Some(_) => {}
            }
        }
        if Some(st.low[v]) == st.index[v] {
            while let Some(w) = st.stack.pop() {
                st.on_stack[w] = false;
                st.comp[w] = st.next_comp;
                if w == v {
                    break;
                }
            }
            st.next_comp += 1;
        }
    }

    let n = adj.len();
    let mut st = State {
        adj,
        index: vec![None; n],
        low: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        comp: vec![0; n],
        next_index: 0,
        next_comp: 0,
    };
    for v in 0..n {
        if st.index[v].is_none() {
            connect(&mut st, v);
        }
    }
    st.comp
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {reason}")]
pub struct ParseError {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DefinitionError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid definition: {}", .0.first().map(ToString::to_string).unwrap_or_default())]
    Invalid(Vec<Violation>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Token {
    Word(String),
    Quoted(String),
}

pub(crate) fn tokenize(line: &str) -> Result<Vec<Token>, String> {
    let mut tokens = Vec::new();
    let mut chars = line.char_indices().peekable();
    while let Some(&(start, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c == '"' {
            chars.next();
            let mut end = None;
            for (i, c) in chars.by_ref() {
                if c == '"' {
                    end = Some(i);
                    break;
                }
            }
            let end = end.ok_or("unterminated quoted label")?;
            if chars.peek().is_some_and(|(_, c)| !c.is_whitespace()) {
                return Err("missing space after quoted label".into());
            }
            tokens.push(Token::Quoted(line[start + 1..end].to_owned()));
        } else {
            let mut end = line.len();
            while let Some(&(i, c)) = chars.peek() {
                if c.is_whitespace() {
                    end = i;
                    break;
                }
                if c == '"' {
                    return Err("unexpected quote".into());
                }
                chars.next();
            }
            tokens.push(Token::Word(line[start..end].to_owned()));
        }
    }
    Ok(tokens)
}

/// Cursor over the tokens of one line.
pub(crate) struct Fields {
    tokens: std::vec::IntoIter<Token>,
}

impl Fields {
    pub(crate) fn new(tokens: Vec<Token>) -> Self {
        Self {
            tokens: tokens.into_iter(),
        }
    }

    pub(crate) fn id(&mut self, what: &str) -> Result<String, String> {
        match self.tokens.next() {
            Some(Token::Word(w)) if is_valid_id(&w) => Ok(w),
            Some(Token::Word(w)) => Err(format!("invalid {what} `{w}`")),
            _ => Err(format!("expected {what}")),
        }
    }

    pub(crate) fn word(&mut self, what: &str) -> Result<String, String> {
        match self.tokens.next() {
            Some(Token::Word(w)) => Ok(w),
            _ => Err(format!("expected {what}")),
        }
    }

    pub(crate) fn label(&mut self) -> Result<String, String> {
        match self.tokens.next() {
            Some(Token::Quoted(q)) => Ok(q),
            _ => Err("expected quoted label".into()),
        }
    }

    pub(crate) fn arrow(&mut self) -> Result<(), String> {
        match self.tokens.next() {
            Some(Token::Word(w)) if w == "->" => Ok(()),
            _ => Err("expected `->`".into()),
        }
    }

    /// Remaining `key=value` attributes; each allowed key at most once.
    pub(crate) fn attrs(self, allowed: &[&str]) -> Result<HashMap<String, String>, String> {
        let mut out = HashMap::new();
        for token in self.tokens {
            let Token::Word(w) = token else {
                return Err("unexpected quoted text".into());
            };
            let (key, value) = w
                .split_once('=')
                .ok_or_else(|| format!("unexpected `{w}`"))?;
            if !allowed.contains(&key) {
                return Err(format!("unknown attribute `{key}`"));
            }
            if out.insert(key.to_owned(), value.to_owned()).is_some() {
                return Err(format!("repeated attribute `{key}`"));
            }
        }
        Ok(out)
    }

    pub(crate) fn finish(mut self) -> Result<(), String> {
        match self.tokens.next() {
            None => Ok(()),
            Some(_) => Err("unexpected trailing text".into()),
        }
    }
}

fn tier_attr(attrs: &HashMap<String, String>) -> Result<Tier, String> {
    attrs.get("tier").map_or(Ok(Tier::Adaptive), |t| t.parse())
}

/// Parses a single node line (`item`, `sep`, `panel` or `submenu`). A panel
/// comes back with no children.
pub(crate) fn parse_node_line(keyword: &str, mut f: Fields) -> Result<Node, String> {
    match keyword {
        "item" => {
            let id = f.id("item id")?;
            let label = f.label()?;
            let attrs = f.attrs(&["action", "tier"])?;
            let action = attrs.get("action").ok_or("missing action=")?;
            if !is_valid_id(action) {
                return Err(format!("invalid action id `{action}`"));
            }
            Ok(Node::Item(Item {
                id: NodeId::new(id),
                label,
                action: ActionId::new(action.clone()),
                tier: tier_attr(&attrs)?,
            }))
        }
        "sep" => {
            f.finish()?;
            Ok(Node::Separator)
        }
        "panel" => {
            let id = f.id("panel id")?;
            let label = f.label()?;
            let attrs = f.attrs(&["default"])?;
            let default_state = attrs
                .get("default")
                .map_or(Ok(PanelState::default()), |s| s.parse())?;
            Ok(Node::Panel(Panel {
                id: NodeId::new(id),
                label,
                default_state,
                children: Vec::new(),
            }))
        }
        "submenu" => {
            let id = f.id("submenu id")?;
            let label = f.label()?;
            f.arrow()?;
            let target = f.id("target menu id")?;
            let attrs = f.attrs(&["tier"])?;
            Ok(Node::Submenu(SubmenuLink {
                id: NodeId::new(id),
                label,
                target: MenuId::new(target),
                tier: tier_attr(&attrs)?,
            }))
        }
        other => Err(format!("unknown keyword `{other}`")),
    }
}

/// Parses definition text without running structural validation.
pub fn parse_unvalidated(source: &str) -> Result<MenuDefinition, ParseError> {
    let mut menus = Vec::new();
    let mut current: Option<(usize, Menu)> = None;
    // Open panels, innermost last, with the line they were opened on.
    let mut panels: Vec<(usize, Panel)> = Vec::new();

    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let err = |reason: String| ParseError { line, reason };
        let text = raw.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let tokens = tokenize(text).map_err(err)?;
        let mut f = Fields::new(tokens);
        let keyword = f.word("keyword").map_err(err)?;
        match keyword.as_str() {
            "menu" => {
                if current.is_some() {
                    return Err(err("`menu` inside another menu block".into()));
                }
                let id = f.id("menu id").map_err(err)?;
                let label = f.label().map_err(err)?;
                f.finish().map_err(err)?;
                current = Some((line, Menu::new(id, label)));
            }
            "end" => {
                f.finish().map_err(err)?;
                if let Some((_, panel)) = panels.pop() {
                    let node = Node::Panel(panel);
                    match panels.last_mut() {
                        Some((_, outer)) => outer.children.push(node),
                        None => current.as_mut().expect("panel implies menu").1.nodes.push(node),
                    }
                } else if let Some((_, menu)) = current.take() {
                    menus.push(menu);
                } else {
                    return Err(err("`end` without an open block".into()));
                }
            }
            kw => {
                if current.is_none() {
                    return Err(err(format!("`{kw}` outside a menu block")));
                }
                let node = parse_node_line(kw, f).map_err(err)?;
                match node {
                    Node::Panel(p) => panels.push((line, p)),
                    node => match panels.last_mut() {
                        Some((_, panel)) => panel.children.push(node),
                        None => current.as_mut().expect("checked above").1.nodes.push(node),
                    },
                }
            }
        }
    }

    if let Some((line, _)) = panels.last() {
        return Err(ParseError {
            line: *line,
            reason: "unterminated panel block".into(),
        });
    }
    if let Some((line, _)) = current {
        return Err(ParseError {
            line,
            reason: "unterminated menu block".into(),
        });
    }
    Ok(MenuDefinition { menus })
}

/// Parses and validates a definition.
pub fn parse_definition(source: &str) -> Result<MenuDefinition, DefinitionError> {
    let def = parse_unvalidated(source)?;
    let violations = validate(&def);
    if violations.is_empty() {
        Ok(def)
    } else {
        Err(DefinitionError::Invalid(violations))
    }
}

/// Canonical single-line form of a node (panel header only for panels).
pub fn node_line(node: &Node) -> String {
    match node {
        Node::Item(i) => format!(
            "item {} \"{}\" action={} tier={}",
            i.id,
            i.label,
            i.action,
            i.tier.as_str()
        ),
        Node::Separator => "sep".to_owned(),
        Node::Panel(p) => format!(
            "panel {} \"{}\" default={}",
            p.id,
            p.label,
            p.default_state.as_str()
        ),
        Node::Submenu(s) => format!(
            "submenu {} \"{}\" -> {} tier={}",
            s.id,
            s.label,
            s.target,
            s.tier.as_str()
        ),
    }
}

fn write_nodes(out: &mut String, nodes: &[Node], depth: usize) {
    for node in nodes {
        let indent = "  ".repeat(depth);
        out.push_str(&indent);
        out.push_str(&node_line(node));
        out.push('\n');
        if let Node::Panel(p) = node {
            write_nodes(out, &p.children, depth + 1);
            out.push_str(&indent);
            out.push_str("end\n");
        }
    }
}

/// Canonical text: two-space indentation per level, every attribute spelled
/// out, menus separated by a blank line, one trailing newline.
pub fn serialize_definition(def: &MenuDefinition) -> String {
    let mut out = String::new();
    for (i, menu) in def.menus.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("menu {} \"{}\"\n", menu.id, menu.label));
        write_nodes(&mut out, &menu.nodes, 1);
        out.push_str("end\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "menu m1 \"File\"\n  item open \"Open\" action=act.open tier=core\nend\n";

    fn sample() -> MenuDefinition {
        parse_definition(
            "menu m1 \"Main\"\n\
             item a \"A\" action=x.a\n\
             panel p1 \"Panel\" default=expanded\n\
               item b \"B\" action=x.b\n\
               sep\n\
               item item3 \"C\" action=x.c tier=core\n\
             end\n\
             submenu s1 \"More\" -> m2\n\
             end\n\
             menu m2 \"More\"\n\
             item d \"D\" action=x.d\n\
             end\n",
        )
        .unwrap()
    }

    #[test]
    fn parses_minimal_definition() {
        let def = parse_definition("menu m1 \"File\"\n  item open \"Open\" action=act.open tier=core\nend").unwrap();
        assert_eq!(def.menus.len(), 1);
        assert_eq!(def.root().unwrap().id.as_str(), "m1");
        let Node::Item(item) = &def.menus[0].nodes[0] else {
            panic!("expected item");
        };
        assert_eq!(item.tier, Tier::Core);
        assert_eq!(item.action.as_str(), "act.open");
    }

    #[test]
    fn tier_defaults_to_adaptive() {
        let def = parse_definition("menu m \"M\"\nitem a \"A\" action=x\nsubmenu s \"S\" -> n\nend\nmenu n \"N\"\nend\n").unwrap();
        assert_eq!(def.menus[0].nodes[0].tier(), Some(Tier::Adaptive));
        assert_eq!(def.menus[0].nodes[1].tier(), Some(Tier::Adaptive));
    }

    #[test]
    fn dangling_submenu_is_a_validation_error() {
        let err = parse_definition("menu m1 \"A\"\n  submenu s1 \"B\" -> m2\nend\n").unwrap_err();
        assert_eq!(
            err,
            DefinitionError::Invalid(vec![Violation {
                kind: ViolationKind::DanglingSubmenu,
                path: "m1/s1".into()
            }])
        );
    }

    #[test]
    fn mutual_submenus_form_a_cycle() {
        let err = parse_definition(
            "menu a \"A\"\nsubmenu to_b \"B\" -> b\nend\nmenu b \"B\"\nsubmenu to_a \"A\" -> a\nend\n",
        )
        .unwrap_err();
        let DefinitionError::Invalid(v) = err else {
            panic!("expected validation failure")
        };
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::Cycle);
        assert_eq!(v[0].path, "a/to_b");
    }

    #[test]
    fn self_link_is_a_cycle() {
        let err = parse_definition("menu a \"A\"\nsubmenu me \"Me\" -> a\nend\n").unwrap_err();
        assert!(matches!(err, DefinitionError::Invalid(v) if v[0].kind == ViolationKind::Cycle));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let cases = [
            ("menu m \"M\"\n  item a \"A\"\nend\n", 2),
            ("menu m \"M\"\n\n  bogus\nend\n", 3),
            ("item a \"A\" action=x\n", 1),
            ("menu m \"M\n", 1),
            ("menu m \"M\"\n  panel p \"P\"\n", 2),
            ("menu m \"M\"\nend\nend\n", 3),
            ("menu m \"M\"\nitem a \"A\" action=x tier=sometimes\nend\n", 2),
            ("menu m \"M\"\nmenu n \"N\"\nend\n", 2),
        ];
        for (src, line) in cases {
            let err = parse_unvalidated(src).unwrap_err();
            assert_eq!(err.line, line, "{src:?}: {err}");
        }
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let def = parse_definition("# menus\n\nmenu m \"M\"\n   # inner\n item a \"A\" action=x\nend\n").unwrap();
        assert_eq!(def.menus[0].nodes.len(), 1);
    }

    #[test]
    fn canonical_serialization() {
        let def = parse_definition("menu m1 \"File\"\n  item open \"Open\" action=act.open tier=core\nend\n").unwrap();
        assert_eq!(serialize_definition(&def), MINIMAL);

        let messy = "menu   m1   \"File\"\nitem open   \"Open\"    tier=core action=act.open\n      end";
        assert_eq!(serialize_definition(&parse_definition(messy).unwrap()), MINIMAL);
    }

    #[test]
    fn round_trip_with_panels_and_submenus() {
        let def = sample();
        let text = serialize_definition(&def);
        assert_eq!(parse_definition(&text).unwrap(), def);
        assert_eq!(serialize_definition(&parse_definition(&text).unwrap()), text);
        assert!(text.contains("    item b \"B\" action=x.b tier=adaptive\n"));
    }

    #[test]
    fn duplicate_ids() {
        let def = parse_unvalidated("menu m \"M\"\nitem a \"A\" action=x\nitem a \"B\" action=y\nend\n").unwrap();
        assert_eq!(
            validate(&def),
            vec![Violation {
                kind: ViolationKind::DuplicateId,
                path: "m/a".into()
            }]
        );
        // Ids only need to be unique per menu.
        assert!(parse_definition("menu m \"M\"\nitem a \"A\" action=x\nend\nmenu n \"N\"\nitem a \"A\" action=x\nend\n").is_ok());
        let def = parse_unvalidated("menu m \"M\"\nend\nmenu m \"N\"\nend\n").unwrap();
        assert_eq!(validate(&def)[0].kind, ViolationKind::DuplicateId);
    }

    #[test]
    fn nested_panels_and_links_in_panels() {
        let def = parse_unvalidated(
            "menu m \"M\"\npanel p \"P\"\npanel q \"Q\"\nend\nsubmenu s \"S\" -> n\nend\nend\nmenu n \"N\"\nend\n",
        )
        .unwrap();
        let kinds: Vec<_> = validate(&def).into_iter().map(|v| (v.kind, v.path)).collect();
        assert_eq!(
            kinds,
            vec![
                (ViolationKind::NestedPanel, "m/p/q".to_owned()),
                (ViolationKind::NestedPanel, "m/p/s".to_owned()),
            ]
        );
    }

    #[test]
    fn valid_three_menu_definition() {
        let def = parse_unvalidated(
            "menu a \"A\"\nsubmenu b \"B\" -> b\nsubmenu c \"C\" -> c\nend\nmenu b \"B\"\nsubmenu c \"C\" -> c\nend\nmenu c \"C\"\nitem x \"X\" action=y\nend\n",
        )
        .unwrap();
        assert!(validate(&def).is_empty());
    }

    #[test]
    fn empty_definition_violation() {
        let def = MenuDefinition { menus: vec![] };
        assert_eq!(validate(&def)[0].kind, ViolationKind::EmptyDefinition);
    }

    #[test]
    fn resolve_paths() {
        let def = parse_definition(MINIMAL).unwrap();
        let node = resolve_path(&def, &"m1/open".parse().unwrap()).unwrap();
        assert!(matches!(node, Node::Item(i) if i.id.as_str() == "open"));
        assert!(resolve_path(&def, &"m1/missing".parse().unwrap()).is_err());
        assert!(resolve_path(&def, &"m1".parse().unwrap()).is_err());
        assert!(resolve_path(&def, &"zz/open".parse().unwrap()).is_err());

        let def = sample();
        let nested = resolve_path(&def, &"m1/p1/item3".parse().unwrap()).unwrap();
        assert_eq!(nested.label(), "C");
        let sep = resolve_path(&def, &"m1/p1/@1".parse().unwrap()).unwrap();
        assert_eq!(sep, &Node::Separator);
        // Panel children are not addressable from the menu top level.
        assert!(resolve_path(&def, &"m1/item3".parse().unwrap()).is_err());
        // Nor can you descend into a non-panel.
        assert!(resolve_path(&def, &"m1/a/b".parse().unwrap()).is_err());
    }

    #[test]
    fn node_path_text_form() {
        let p: NodePath = "m1/p1/@2".parse().unwrap();
        assert_eq!(p.to_string(), "m1/p1/@2");
        assert_eq!(p.parent().to_string(), "m1/p1");
        assert!("".parse::<NodePath>().is_err());
        assert!("m1/bad id".parse::<NodePath>().is_err());
        assert!("m1/@x".parse::<NodePath>().is_err());
    }

    #[test]
    fn walk_and_find_reach_panel_children() {
        let def = sample();
        let m = &def.menus[0];
        let ids: Vec<_> = m.walk().iter().filter_map(|(_, n)| n.id().map(|i| i.to_string())).collect();
        assert_eq!(ids, ["a", "p1", "b", "item3", "s1"]);
        let (parent, _) = m.find(&NodeId::new("item3")).unwrap();
        assert_eq!(parent.map(|p| p.as_str()), Some("p1"));
    }
}
