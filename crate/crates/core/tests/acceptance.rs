//! Runs every experiment at its default (acceptance) settings and prints one
//! line per criterion.

use std::collections::BTreeMap;

use rough_pme::harness::{default_config, run_experiment, Summary};

struct Criterion {
    id: u32,
    title: &'static str,
    experiment: &'static str,
    /// Assertion names; empty means every assertion of the experiment.
    assertions: &'static [&'static str],
}

const CRITERIA: &[Criterion] = &[
    Criterion { id: 1, title: "deterministic ZKB oracle", experiment: "oracle", assertions: &[] },
    Criterion { id: 2, title: "self-convergence order", experiment: "self-convergence", assertions: &[] },
    Criterion { id: 3, title: "uniform bound X <= U", experiment: "bounds", assertions: &[] },
    Criterion { id: 4, title: "comparison of ordered data", experiment: "comparison", assertions: &[] },
    Criterion { id: 5, title: "L1 contraction constant", experiment: "contraction", assertions: &[] },
    Criterion {
        id: 6,
        title: "Wong-Zakai convergence",
        experiment: "wong-zakai",
        assertions: &["finest_level_distance", "nonmonotone_steps", "nonmonotone_increase"],
    },
    Criterion {
        id: 7,
        title: "sequence independence",
        experiment: "wong-zakai",
        assertions: &["mollified_vs_piecewise_linear"],
    },
    Criterion { id: 8, title: "transformation equivalence", experiment: "transformation", assertions: &[] },
    Criterion { id: 9, title: "cocycle property", experiment: "cocycle", assertions: &[] },
    Criterion { id: 10, title: "pullback absorption", experiment: "absorption", assertions: &[] },
    Criterion { id: 11, title: "attractor contraction", experiment: "attractor", assertions: &[] },
    Criterion { id: 12, title: "fast-diffusion bound", experiment: "fast-diffusion", assertions: &[] },
    Criterion { id: 13, title: "fBm covariance", experiment: "fbm-covariance", assertions: &[] },
    Criterion { id: 14, title: "very-weak residual slope", experiment: "residual", assertions: &[] },
];

fn verdict(c: &Criterion, summary: &Summary) -> (bool, String) {
    let picked: Vec<_> = summary
        .assertions
        .iter()
        .filter(|a| c.assertions.is_empty() || c.assertions.contains(&a.name.as_str()))
        .collect();
    assert!(!picked.is_empty(), "criterion {} selects no assertions", c.id);
    if let Some(name) = c.assertions.iter().find(|n| !picked.iter().any(|a| a.name == **n)) {
        panic!("criterion {}: missing assertion {name}", c.id);
    }
    let detail = picked
        .iter()
        .map(|a| {
            format!(
                "{}{} {:.4e} {} {:.4e}",
                if a.passed { "" } else { "!" },
                a.name,
                a.measured,
                a.relation.symbol(),
                a.bound
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    (picked.iter().all(|a| a.passed), detail)
}

#[test]
fn acceptance_criteria() {
    let mut runs: BTreeMap<&str, Result<Summary, String>> = BTreeMap::new();
    for c in CRITERIA {
        runs.entry(c.experiment).or_insert_with(|| {
            let cfg = default_config(c.experiment).expect("registered experiment");
            run_experiment(&cfg, None).map_err(|e| e.to_string())
        });
    }
    let mut failed = Vec::new();
    for c in CRITERIA {
        let (ok, detail) = match &runs[c.experiment] {
            Ok(s) => verdict(c, s),
            Err(e) => (false, format!("error: {e}")),
        };
        println!(
            "criterion {:>2} [{}] {} ({}): {}",
            c.id,
            if ok { "PASS" } else { "FAIL" },
            c.title,
            c.experiment,
            detail
        );
        if !ok {
            failed.push(c.id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
