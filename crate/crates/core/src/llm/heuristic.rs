use super::{GenerationRequest, LlmBackend, LlmError, QueryMeter};
use crate::names::Role;

/// Model-free backend that instantiates the prompt's own templates with the
/// prompt's inventory names.
#[derive(Debug)]
pub struct HeuristicBackend {
    meter: QueryMeter,
}

impl HeuristicBackend {
    pub fn new(cap: Option<u64>) -> Self {
        Self { meter: QueryMeter::new(cap) }
    }
}

fn row<'a>(prompt: &'a str, label: &str) -> Vec<&'a str> {
    prompt
        .lines()
        .find_map(|l| l.strip_prefix(label))
        .filter(|r| r.trim() != "none")
        .map(|r| r.split(", ").map(str::trim).filter(|s| !s.is_empty()).collect())
        .unwrap_or_default()
}

fn requested(prompt: &str) -> Option<usize> {
    let at = prompt.find("exactly ")? + "exactly ".len();
    prompt[at..].split_whitespace().next()?.parse().ok()
}

/// Fill every placeholder of `step` with the `i`-th name of its role.
fn instantiate(step: &str, i: usize, defs: &[&str], rules: &[&str], wp: &[&str]) -> Option<String> {
    let mut out = step.to_string();
    for (placeholder, names) in [
        (Role::Simp.placeholder(), defs),
        (Role::Rule.placeholder(), rules),
        (Role::Wp.placeholder(), wp),
    ] {
        if out.contains(placeholder) {
            if names.is_empty() {
                return None;
            }
            out = out.replace(placeholder, names[i % names.len()]);
        }
    }
    Some(out)
}

/// Candidate lines for `prompt`, pure in the prompt text.
pub fn heuristic_candidates(prompt: &str) -> Vec<String> {
    let c = requested(prompt).unwrap_or(12);
    let defs = row(prompt, "- Defs/Simp: ");
    let rules = row(prompt, "- Rules: ");
    let wp = row(prompt, "- WP/Ref.: ");
    let templates: Vec<Vec<&str>> = prompt
        .lines()
        .filter_map(|l| l.strip_prefix("- T"))
        .filter_map(|l| l.split_once(": ").map(|(_, steps)| steps.split(" → ").collect()))
        .collect();
    let widest = defs.len().max(rules.len()).max(wp.len()).max(1);
    let mut out: Vec<String> = Vec::new();
    for i in 0..widest {
        for t in &templates {
            let Some(first) = t.first() else { continue };
            let Some(step) = instantiate(first, i, &defs, &rules, &wp) else { continue };
            let line = match t.get(1) {
                Some(&"done") => format!("{step}; done"),
                _ => step,
            };
            if !out.contains(&line) {
                out.push(line);
            }
        }
    }
    for extra in ["apply simp", "apply assumption"] {
        if !out.iter().any(|l| l == extra) {
            out.push(extra.to_string());
        }
    }
    out.truncate(c);
    out
}

impl LlmBackend for HeuristicBackend {
    fn generate(&self, req: &GenerationRequest) -> Result<Vec<String>, LlmError> {
        self.meter.charge()?;
        let lines = heuristic_candidates(&req.prompt);
        let text = lines
            .iter()
            .enumerate()
            .map(|(i, l)| format!("{}. {l}", i + 1))
            .collect::<Vec<_>>()
            .join("\n");
        Ok(vec![text])
    }

    fn queries(&self) -> u64 {
        self.meter.used()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fills_templates_from_the_inventory() {
        let prompt = "Task. Give exactly 4 different candidates\n\
            - T1: apply (simp add: <Def/Simp names>) → done\n\
            - T2: apply (rule <Rule lemma>) → apply simp\n\
            - T3: apply (wp <WP/refinement lemma>)\n\
            - Defs/Simp: add_zero, plus_def\n\
            - Rules: conj_intro\n\
            - WP/Ref.: none\n";
        let c = heuristic_candidates(prompt);
        assert_eq!(
            c,
            [
                "apply (simp add: add_zero); done",
                "apply (rule conj_intro)",
                "apply (simp add: plus_def); done",
                "apply simp",
            ]
        );
    }
}
