//! Structural editing of menu definitions.
//!
//! Edits address nodes by path and never touch action ids beyond copying
//! them. Every edit produces a new definition and is rejected as a whole if
//! the result would violate a structural invariant.

use std::fmt;

use thiserror::Error;

use crate::model::{
    locate, node_line, parse_node_line, resolve_path, tokenize, validate, Fields, Menu,
    MenuDefinition, MenuId, Node, NodePath, Segment, SubmenuLink, Tier, Token, ViolationKind,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EditOp {
    /// Insert into a menu (`parent` = menu path) or a panel (`menu/panel`).
    InsertNode { parent: NodePath, index: usize, node: Node },
    RemoveNode { path: NodePath },
    /// `index` counts positions in the destination after the node is removed.
    MoveNode { src: NodePath, dst_parent: NodePath, index: usize },
    /// Relabels a node, or the menu itself when the path has no segments.
    Rename { path: NodePath, label: String },
    SetTier { path: NodePath, tier: Tier },
    AddMenu { id: MenuId, label: String },
    /// Appends a new adaptive submenu link; the last path segment is its id.
    LinkSubmenu { path: NodePath, label: String, target: MenuId },
}

/// Script-line form, e.g. `move m1/f m1 3`.
impl fmt::Display for EditOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EditOp::InsertNode { parent, index, node } => write!(f, "insert {parent} {index} {}", node_line(node)),
            EditOp::RemoveNode { path } => write!(f, "remove {path}"),
            EditOp::MoveNode { src, dst_parent, index } => write!(f, "move {src} {dst_parent} {index}"),
            EditOp::Rename { path, label } => write!(f, "rename {path} \"{label}\""),
            EditOp::SetTier { path, tier } => write!(f, "set-tier {path} {}", tier.as_str()),
            EditOp::AddMenu { id, label } => write!(f, "add-menu {id} \"{label}\""),
            EditOp::LinkSubmenu { path, label, target } => write!(f, "link {path} \"{label}\" -> {target}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EditErrorKind {
    BadPath,
    BadIndex,
    WouldDangle,
    WouldCycle,
    DuplicateId,
    NestedPanel,
    /// An id or label the definition format cannot represent.
    InvalidToken,
}

impl EditErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EditErrorKind::BadPath => "bad-path",
            EditErrorKind::BadIndex => "bad-index",
            EditErrorKind::WouldDangle => "would-dangle",
            EditErrorKind::WouldCycle => "would-cycle",
            EditErrorKind::DuplicateId => "duplicate-id",
            EditErrorKind::NestedPanel => "nested-panel",
            EditErrorKind::InvalidToken => "invalid-token",
        }
    }
}

impl fmt::Display for EditErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind}: {detail}")]
pub struct EditError {
    pub kind: EditErrorKind,
    pub detail: String,
}

impl EditError {
    fn new(kind: EditErrorKind, detail: impl Into<String>) -> Self {
        Self {
            kind,
            detail: detail.into(),
        }
    }

    fn bad_path(path: &NodePath) -> Self {
        Self::new(EditErrorKind::BadPath, format!("no such location `{path}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("edit {index} failed: {error}")]
pub struct ScriptFailure {
    pub index: usize,
    pub error: EditError,
}

/// The node list a parent path addresses: a menu's top level or a panel's children.
fn container_mut<'a>(def: &'a mut MenuDefinition, parent: &NodePath) -> Result<&'a mut Vec<Node>, EditError> {
    let menu = def.menu_mut(&parent.menu).ok_or_else(|| EditError::bad_path(parent))?;
    match parent.segments.as_slice() {
        [] => Ok(&mut menu.nodes),
        [segment] => {
            let idx = locate(&menu.nodes, segment)
                .map(|(i, _)| i)
                .ok_or_else(|| EditError::bad_path(parent))?;
            match &mut menu.nodes[idx] {
                Node::Panel(p) => Ok(&mut p.children),
                _ => Err(EditError::bad_path(parent)),
            }
        }
        _ => Err(EditError::bad_path(parent)),
    }
}

fn node_mut<'a>(def: &'a mut MenuDefinition, path: &NodePath) -> Result<&'a mut Node, EditError> {
    let last = path.segments.last().ok_or_else(|| EditError::bad_path(path))?;
    let container = container_mut(def, &path.parent())?;
    let idx = locate(container, last)
        .map(|(i, _)| i)
        .ok_or_else(|| EditError::bad_path(path))?;
    Ok(&mut container[idx])
}

fn take_node(def: &mut MenuDefinition, path: &NodePath) -> Result<Node, EditError> {
    let last = path.segments.last().ok_or_else(|| EditError::bad_path(path))?;
    let container = container_mut(def, &path.parent())?;
    let idx = locate(container, last)
        .map(|(i, _)| i)
        .ok_or_else(|| EditError::bad_path(path))?;
    Ok(container.remove(idx))
}

fn put_node(def: &mut MenuDefinition, parent: &NodePath, index: usize, node: Node) -> Result<(), EditError> {
    let container = container_mut(def, parent)?;
    if index > container.len() {
        return Err(EditError::new(
            EditErrorKind::BadIndex,
            format!("index {index} out of bounds for `{parent}` (len {})", container.len()),
        ));
    }
    container.insert(index, node);
    Ok(())
}

fn mutate(def: &mut MenuDefinition, op: &EditOp) -> Result<(), EditError> {
    match op {
        EditOp::InsertNode { parent, index, node } => put_node(def, parent, *index, node.clone()),
        EditOp::RemoveNode { path } => take_node(def, path).map(drop),
        EditOp::MoveNode { src, dst_parent, index } => {
            let node = take_node(def, src)?;
            put_node(def, dst_parent, *index, node)
        }
        EditOp::Rename { path, label } => {
            if path.segments.is_empty() {
                let menu = def.menu_mut(&path.menu).ok_or_else(|| EditError::bad_path(path))?;
                menu.label = label.clone();
                return Ok(());
            }
            match node_mut(def, path)? {
                Node::Item(i) => i.label = label.clone(),
                Node::Panel(p) => p.label = label.clone(),
                Node::Submenu(s) => s.label = label.clone(),
                Node::Separator => return Err(EditError::new(EditErrorKind::BadPath, "separators have no label")),
            }
            Ok(())
        }
        EditOp::SetTier { path, tier } => match node_mut(def, path)? {
            Node::Item(i) => {
                i.tier = *tier;
                Ok(())
            }
            Node::Submenu(s) => {
                s.tier = *tier;
                Ok(())
            }
            _ => Err(EditError::new(
                EditErrorKind::BadPath,
                format!("`{path}` is not an item or submenu link"),
            )),
        },
        EditOp::AddMenu { id, label } => {
            def.menus.push(Menu::new(id.clone(), label.clone()));
            Ok(())
        }
        EditOp::LinkSubmenu { path, label, target } => {
            let Some(Segment::Id(id)) = path.segments.last() else {
                return Err(EditError::new(EditErrorKind::BadPath, format!("`{path}` does not end in a new id")));
            };
            let link = Node::Submenu(SubmenuLink {
                id: id.clone(),
                label: label.clone(),
                target: target.clone(),
                tier: Tier::Adaptive,
            });
            let parent = path.parent();
            let len = container_mut(def, &parent)?.len();
            put_node(def, &parent, len, link)
        }
    }
}

/// Applies one edit, returning the new definition; `def` is never modified.
pub fn apply_edit(def: &MenuDefinition, op: &EditOp) -> Result<MenuDefinition, EditError> {
    let mut next = def.clone();
    mutate(&mut next, op)?;
    if let Some(v) = validate(&next).into_iter().next() {
        let kind = match v.kind {
            ViolationKind::DuplicateId => EditErrorKind::DuplicateId,
            ViolationKind::DanglingSubmenu => EditErrorKind::WouldDangle,
            ViolationKind::Cycle => EditErrorKind::WouldCycle,
            ViolationKind::NestedPanel => EditErrorKind::NestedPanel,
            ViolationKind::InvalidId | ViolationKind::InvalidLabel => EditErrorKind::InvalidToken,
            ViolationKind::EmptyDefinition => EditErrorKind::BadPath,
        };
        return Err(EditError::new(kind, format!("`{op}` would leave {v}")));
    }
    Ok(next)
}

/// Applies edits in order, all or nothing.
pub fn apply_script(def: &MenuDefinition, ops: &[EditOp]) -> Result<MenuDefinition, ScriptFailure> {
    let mut current = def.clone();
    for (index, op) in ops.iter().enumerate() {
        current = apply_edit(&current, op).map_err(|error| ScriptFailure { index, error })?;
    }
    Ok(current)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("script line {line}: {reason}")]
pub struct ScriptParseError {
    pub line: usize,
    pub reason: String,
}

fn path_arg(f: &mut Fields, what: &str) -> Result<NodePath, String> {
    f.word(what)?.parse()
}

fn index_arg(f: &mut Fields) -> Result<usize, String> {
    let w = f.word("index")?;
    w.parse().map_err(|_| format!("bad index `{w}`"))
}

fn parse_op(tokens: Vec<Token>) -> Result<EditOp, String> {
    let mut f = Fields::new(tokens);
    let op = match f.word("command")?.as_str() {
        "insert" => {
            let parent = path_arg(&mut f, "parent path")?;
            let index = index_arg(&mut f)?;
            let keyword = f.word("node keyword")?;
            let node = parse_node_line(&keyword, f)?;
            return Ok(EditOp::InsertNode { parent, index, node });
        }
        "remove" => EditOp::RemoveNode {
            path: path_arg(&mut f, "path")?,
        },
        "move" => EditOp::MoveNode {
            src: path_arg(&mut f, "source path")?,
            dst_parent: path_arg(&mut f, "destination")?,
            index: index_arg(&mut f)?,
        },
        "rename" => EditOp::Rename {
            path: path_arg(&mut f, "path")?,
            label: f.label()?,
        },
        "set-tier" => EditOp::SetTier {
            path: path_arg(&mut f, "path")?,
            tier: f.word("tier")?.parse()?,
        },
        "add-menu" => EditOp::AddMenu {
            id: MenuId::new(f.id("menu id")?),
            label: f.label()?,
        },
        "link" => {
            let path = path_arg(&mut f, "link path")?;
            let label = f.label()?;
            f.arrow()?;
            let target = MenuId::new(f.id("target menu id")?);
            EditOp::LinkSubmenu { path, label, target }
        }
        other => return Err(format!("unknown command `{other}`")),
    };
    f.finish()?;
    Ok(op)
}

/// Parses an edit script: one op per line, `#` comments and blank lines skipped.
pub fn parse_script(text: &str) -> Result<Vec<EditOp>, ScriptParseError> {
    let mut ops = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason| ScriptParseError { line: idx + 1, reason };
        ops.push(tokenize(line).and_then(parse_op).map_err(err)?);
    }
    Ok(ops)
}

fn describe(node: &Node) -> String {
    match node {
        Node::Item(i) => format!("item {} \"{}\" [{}]", i.id, i.label, i.tier.as_str()),
        Node::Separator => "sep".to_owned(),
        Node::Panel(p) => format!("panel {} \"{}\" [{}]", p.id, p.label, p.default_state.as_str()),
        Node::Submenu(s) => format!("submenu {} \"{}\" [{}] -> {}", s.id, s.label, s.tier.as_str(), s.target),
    }
}

fn branch_lines(node: &Node, depth: usize, out: &mut Vec<String>) {
    out.push(format!("{}{}", "  ".repeat(depth), describe(node)));
    if let Node::Panel(p) = node {
        for child in &p.children {
            branch_lines(child, depth + 1, out);
        }
    }
}

/// Renders each requested branch (a menu or a node path) as an indented tree,
/// placing the trees side by side in request order.
pub fn render_branches(def: &MenuDefinition, branches: &[NodePath]) -> Result<String, crate::model::NotFound> {
    let mut columns: Vec<Vec<String>> = Vec::new();
    for path in branches {
        let mut lines = Vec::new();
        if path.segments.is_empty() {
            let menu = def
                .menu(&path.menu)
                .ok_or_else(|| crate::model::NotFound(path.clone()))?;
            lines.push(format!("menu {} \"{}\"", menu.id, menu.label));
            for node in &menu.nodes {
                branch_lines(node, 1, &mut lines);
            }
        } else {
            branch_lines(resolve_path(def, path)?, 0, &mut lines);
        }
        columns.push(lines);
    }

    let widths: Vec<usize> = columns
        .iter()
        .map(|c| c.iter().map(|l| l.chars().count()).max().unwrap_or(0))
        .collect();
    let height = columns.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = String::new();
    for row in 0..height {
        let mut line = String::new();
        for (i, column) in columns.iter().enumerate() {
            if i > 0 {
                line.push_str("  |  ");
            }
            let cell = column.get(row).map_or("", String::as_str);
            line.push_str(cell);
            line.extend(std::iter::repeat_n(' ', widths[i] - cell.chars().count()));
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_definition, serialize_definition, ActionId, Item, NodeId};

    fn def() -> MenuDefinition {
        parse_definition(
            "menu m1 \"Main\"\n\
             item a \"A\" action=x.a tier=core\n\
             panel p \"P\"\n\
               item b \"B\" action=x.b\n\
             end\n\
             submenu s \"S\" -> m2\n\
             end\n\
             menu m2 \"Two\"\n\
             item c \"C\" action=x.c\n\
             end\n",
        )
        .unwrap()
    }

    fn item(id: &str) -> Node {
        Node::Item(Item {
            id: NodeId::new(id),
            label: "New".into(),
            action: ActionId::new(format!("a.{id}")),
            tier: Tier::Adaptive,
        })
    }

    fn p(s: &str) -> NodePath {
        s.parse().unwrap()
    }

    fn kind_of(r: Result<MenuDefinition, EditError>) -> EditErrorKind {
        r.unwrap_err().kind
    }

    #[test]
    fn insert_at_front() {
        let d = def();
        let out = apply_edit(&d, &EditOp::InsertNode { parent: p("m1"), index: 0, node: item("f") }).unwrap();
        assert_eq!(out.menus[0].nodes[0].id().unwrap().as_str(), "f");
        assert_eq!(d, def());
    }

    #[test]
    fn removing_the_only_link_leaves_target_defined() {
        let out = apply_edit(&def(), &EditOp::RemoveNode { path: p("m1/s") }).unwrap();
        assert!(out.menu(&"m2".into()).is_some());
        assert!(validate(&out).is_empty());
    }

    #[test]
    fn link_creating_cycle_is_rejected() {
        let op = EditOp::LinkSubmenu {
            path: p("m2/back"),
            label: "Back".into(),
            target: "m1".into(),
        };
        assert_eq!(kind_of(apply_edit(&def(), &op)), EditErrorKind::WouldCycle);
    }

    #[test]
    fn error_kinds() {
        let d = def();
        let cases = [
            (EditOp::RemoveNode { path: p("m1/zz") }, EditErrorKind::BadPath),
            (EditOp::RemoveNode { path: p("m1") }, EditErrorKind::BadPath),
            (EditOp::InsertNode { parent: p("m1"), index: 9, node: item("f") }, EditErrorKind::BadIndex),
            (EditOp::InsertNode { parent: p("m1/a"), index: 0, node: item("f") }, EditErrorKind::BadPath),
            (EditOp::InsertNode { parent: p("m1"), index: 0, node: item("b") }, EditErrorKind::DuplicateId),
            (
                EditOp::LinkSubmenu { path: p("m1/l"), label: "L".into(), target: "m9".into() },
                EditErrorKind::WouldDangle,
            ),
            (EditOp::MoveNode { src: p("m1/s"), dst_parent: p("m1/p"), index: 0 }, EditErrorKind::NestedPanel),
            (EditOp::MoveNode { src: p("m1/p"), dst_parent: p("m1/p"), index: 0 }, EditErrorKind::BadPath),
            (EditOp::AddMenu { id: "m2".into(), label: "Dup".into() }, EditErrorKind::DuplicateId),
            (EditOp::AddMenu { id: "bad id".into(), label: "X".into() }, EditErrorKind::InvalidToken),
            (EditOp::Rename { path: p("m1/a"), label: "say \"hi\"".into() }, EditErrorKind::InvalidToken),
            (EditOp::SetTier { path: p("m1/p"), tier: Tier::Core }, EditErrorKind::BadPath),
        ];
        for (op, kind) in cases {
            assert_eq!(kind_of(apply_edit(&d, &op)), kind, "{op}");
        }
        assert_eq!(d, def());
    }

    #[test]
    fn moves_and_renames() {
        let d = def();
        let moved = apply_edit(&d, &EditOp::MoveNode { src: p("m1/a"), dst_parent: p("m1/p"), index: 1 }).unwrap();
        assert_eq!(moved.menus[0].panel(&"p".into()).unwrap().children.len(), 2);
        let back = apply_edit(&moved, &EditOp::MoveNode { src: p("m1/p/a"), dst_parent: p("m1"), index: 0 }).unwrap();
        assert_eq!(back, d);

        let renamed = apply_edit(&d, &EditOp::Rename { path: p("m1"), label: "Top".into() }).unwrap();
        assert_eq!(renamed.menus[0].label, "Top");
        let renamed = apply_edit(&d, &EditOp::Rename { path: p("m1/p/b"), label: "Bee".into() }).unwrap();
        assert_eq!(renamed.menus[0].find(&"b".into()).unwrap().1.label(), "Bee");
        let tiered = apply_edit(&d, &EditOp::SetTier { path: p("m1/s"), tier: Tier::Core }).unwrap();
        assert_eq!(tiered.menus[0].find(&"s".into()).unwrap().1.tier(), Some(Tier::Core));
    }

    #[test]
    fn cross_menu_move_to_colliding_id_is_rejected() {
        let d = apply_edit(&def(), &EditOp::InsertNode { parent: p("m2"), index: 0, node: item("a") }).unwrap();
        let err = apply_edit(&d, &EditOp::MoveNode { src: p("m2/a"), dst_parent: p("m1"), index: 0 }).unwrap_err();
        assert_eq!(err.kind, EditErrorKind::DuplicateId);
    }

    #[test]
    fn separators_are_addressed_by_index() {
        let d = apply_edit(&def(), &EditOp::InsertNode { parent: p("m1"), index: 1, node: Node::Separator }).unwrap();
        let back = apply_edit(&d, &EditOp::RemoveNode { path: p("m1/@1") }).unwrap();
        assert_eq!(back, def());
    }

    #[test]
    fn scripts_are_atomic() {
        let d = def();
        assert_eq!(apply_script(&d, &[]).unwrap(), d);
        let ok = apply_script(
            &d,
            &[
                EditOp::InsertNode { parent: p("m1"), index: 0, node: item("f") },
                EditOp::Rename { path: p("m1/f"), label: "Newer".into() },
            ],
        )
        .unwrap();
        assert_eq!(ok.menus[0].nodes[0].label(), "Newer");

        let failure = apply_script(
            &d,
            &[
                EditOp::InsertNode { parent: p("m1"), index: 0, node: item("f") },
                EditOp::MoveNode { src: p("m1/f"), dst_parent: p("m1"), index: 99 },
            ],
        )
        .unwrap_err();
        assert_eq!(failure.index, 1);
        assert_eq!(failure.error.kind, EditErrorKind::BadIndex);
        assert_eq!(d, def());
    }

    #[test]
    fn script_text_form() {
        let text = "# edits\n\
                    insert m1 0 item f \"New\" action=a.f tier=adaptive\n\
                    remove m1/f\n\
                    move m1/a m1/p 0\n\
                    rename m1/p/a \"Newer\"\n\
                    set-tier m1/p/a core\n\
                    add-menu m9 \"Extras\"\n\
                    link m1/s9 \"Extras\" -> m9\n\
                    insert m1 1 sep\n";
        let ops = parse_script(text).unwrap();
        assert_eq!(ops.len(), 8);
        let reprinted: String = ops.iter().map(|o| format!("{o}\n")).collect();
        assert_eq!(parse_script(&reprinted).unwrap(), ops);
        let out = apply_script(&def(), &ops).unwrap();
        assert!(serialize_definition(&out).contains("submenu s9 \"Extras\" -> m9 tier=adaptive"));

        for (bad, line) in [
            ("remove\n", 1),
            ("\nfrobnicate m1\n", 2),
            ("insert m1 x item f \"F\" action=a\n", 1),
            ("rename m1/a Newer\n", 1),
            ("link m1/x \"X\" m9\n", 1),
            ("remove m1/a extra\n", 1),
        ] {
            assert_eq!(parse_script(bad).unwrap_err().line, line, "{bad}");
        }
    }

    #[test]
    fn render_single_leaf() {
        assert_eq!(render_branches(&def(), &[p("m1/a")]).unwrap(), "item a \"A\" [core]\n");
    }

    #[test]
    fn render_two_menus_side_by_side() {
        let out = render_branches(&def(), &[p("m1"), p("m2")]).unwrap();
        let expected = "\
menu m1 \"Main\"                    |  menu m2 \"Two\"
  item a \"A\" [core]               |    item c \"C\" [adaptive]
  panel p \"P\" [contracted]        |
    item b \"B\" [adaptive]         |
  submenu s \"S\" [adaptive] -> m2  |\n";
        assert_eq!(out, expected);
        assert!(render_branches(&def(), &[p("m3")]).is_err());
    }

    #[test]
    fn render_panel_branch() {
        let out = render_branches(&def(), &[p("m1/p")]).unwrap();
        assert_eq!(out, "panel p \"P\" [contracted]\n  item b \"B\" [adaptive]\n");
    }
}
