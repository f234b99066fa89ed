mod common;

use std::collections::BTreeSet;

use promise_core::prompt::{fact_names_in, MAX_RENDERED_TEMPLATES, SECTIONS};
use promise_core::prover::Prover;

use common::fixtures::{golden_path, prompt_nodes, render_prompt};
use common::toy_prover;

#[test]
fn prompts_match_goldens() {
    let update = std::env::var_os("PROMISE_UPDATE_GOLDENS").is_some();
    for node in prompt_nodes() {
        let (prompt, _) = render_prompt(&node);
        let path = golden_path(&node);
        if update {
            std::fs::write(&path, &prompt).unwrap();
        }
        let golden = std::fs::read_to_string(&path).unwrap();
        assert_eq!(prompt, golden, "{}", node.name);
        assert_eq!(render_prompt(&node).0, prompt);
    }
}

#[test]
fn sections_in_order_and_template_limit() {
    for node in prompt_nodes() {
        let (prompt, _) = render_prompt(&node);
        let mut from = 0;
        for s in SECTIONS {
            let at = prompt[from..].find(s).unwrap_or_else(|| panic!("{} lacks {s}", node.name));
            from += at + s.len();
        }
        let rendered = prompt.lines().filter(|l| l.starts_with("- T")).count();
        assert_eq!(rendered, node.templates.len().min(MAX_RENDERED_TEMPLATES));
        assert!(prompt.contains(&format!("exactly {} ", node.candidates)));
    }
}

#[test]
fn prompts_are_grounded_and_target_free() {
    let p = toy_prover();
    let universe: BTreeSet<String> = p.fact_table().into_iter().map(|f| f.name).collect();
    for node in prompt_nodes() {
        let (prompt, inventory) = render_prompt(&node);
        for name in fact_names_in(&prompt, &universe) {
            assert!(inventory.all.contains(&name), "{}: {name}", node.name);
        }
        assert!(!prompt.contains(&node.target), "{}", node.name);
    }
}

#[test]
fn diversity_names_every_family_from_four_candidates() {
    for node in prompt_nodes().iter().filter(|n| n.candidates >= 4) {
        let (prompt, _) = render_prompt(node);
        let line = prompt.lines().find(|l| l.starts_with("- Diversity: ")).unwrap();
        for f in ["simp", "rule", "wp", "struct"] {
            assert!(line.contains(f), "{}: {line}", node.name);
        }
    }
}
