use std::fs;
use std::path::Path;

use adaptmenu_core::model::{parse_definition, parse_unvalidated, serialize_definition, validate, ViolationKind};
use adaptmenu_core::testkit::random_definition;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn corpus() -> Vec<(String, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/corpus");
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "menu"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&p).unwrap()))
        .collect()
}

#[test]
fn corpus_files_are_fixed_points() {
    let files = corpus();
    assert_eq!(files.len(), 20);
    for (name, text) in files {
        let def = parse_definition(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(serialize_definition(&def), text, "{name}");
    }
}

#[test]
fn loose_formatting_canonicalizes() {
    let loose = "# leading comment\n\n   menu   m \"M\"\n item a \"A\"   action=x.a\n\t\tpanel p \"P\"\nitem b \"B\" action=x.b tier=core\n end\nend\n\n\n";
    let def = parse_definition(loose).unwrap();
    assert_eq!(
        serialize_definition(&def),
        "menu m \"M\"\n  item a \"A\" action=x.a tier=adaptive\n  panel p \"P\" default=contracted\n    item b \"B\" action=x.b tier=core\n  end\nend\n"
    );
}

/// Independent count of what a definition text declares, for comparison
/// with the parser.
fn declared(text: &str) -> (usize, usize, usize) {
    let (mut menus, mut nodes, mut ends) = (0, 0, 0);
    for line in text.lines().map(str::trim) {
        match line.split_whitespace().next() {
            Some("menu") => menus += 1,
            Some("item" | "sep" | "panel" | "submenu") => nodes += 1,
            Some("end") => ends += 1,
            _ => {}
        }
    }
    (menus, nodes, ends)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn serialize_parse_round_trip(seed in any::<u64>()) {
        let def = random_definition(&mut StdRng::seed_from_u64(seed), 50);
        let text = serialize_definition(&def);
        let back = parse_definition(&text).unwrap();
        prop_assert_eq!(&back, &def);
        prop_assert_eq!(serialize_definition(&back), text.clone());

        let (menus, nodes, _) = declared(&text);
        prop_assert_eq!(menus, def.menus.len());
        prop_assert_eq!(nodes, def.node_count());
        prop_assert!(text.ends_with("end\n") && !text.ends_with("\n\n"));
    }

    #[test]
    fn dropping_a_menu_only_dangles(seed in any::<u64>()) {
        let def = random_definition(&mut StdRng::seed_from_u64(seed), 50);
        prop_assume!(def.menus.len() > 1);
        let mut broken = def.clone();
        let gone = broken.menus.pop().unwrap();
        let linked = def.menus.iter().flat_map(|m| m.walk()).any(|(_, n)| {
            matches!(n, adaptmenu_core::Node::Submenu(s) if s.target == gone.id)
        });
        let kinds: Vec<_> = validate(&broken).into_iter().map(|v| v.kind).collect();
        prop_assert!(kinds.iter().all(|k| *k == ViolationKind::DanglingSubmenu));
        prop_assert_eq!(!kinds.is_empty(), linked);
        // The unvalidated parser still reads the text back.
        prop_assert_eq!(parse_unvalidated(&serialize_definition(&broken)).unwrap(), broken);
    }
}
