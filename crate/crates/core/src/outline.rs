//! Hoare-triple and proof-outline checking over the reachable state graph.
//!
//! Both checks quantify over *reachable* configurations only ("reachable-OG"):
//! a violation is always a real, replayable execution, and a valid verdict on
//! an untruncated graph means every annotation is locally correct and
//! interference free along every execution.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::assertion::{eval_assertion, Assertion};
use crate::error::ModelError;
use crate::explore::{build_graph, Configuration, ExploreOptions, StateGraph, System, WitnessStep};
use crate::types::ThreadId;

#[derive(Clone, Debug, Default)]
pub struct ProofOutline {
    /// Annotation of each `(thread, label)`.
    pub annotations: BTreeMap<(ThreadId, u32), Assertion>,
    pub invariant: Option<Assertion>,
    pub pre: Option<Assertion>,
    pub post: Option<Assertion>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Valid,
    Violated,
    /// No violation found, but the depth bound cut off some executions.
    UnknownBeyondBound,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    /// Fails in the initial configuration.
    Initial,
    /// Broken by a step of its own thread.
    LocalCorrectness,
    /// Broken by a step of another thread.
    Interference,
    Postcondition,
}

#[derive(Clone, Debug, Serialize)]
pub struct Violation {
    pub check: String,
    pub kind: ViolationKind,
    pub witness: Vec<WitnessStep>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub check: String,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct OutlineReport {
    pub verdict: Verdict,
    pub checks: Vec<CheckResult>,
    pub violations: Vec<Violation>,
    pub states_explored: usize,
    pub truncated: bool,
}

impl OutlineReport {
    pub fn violation(&self, check: &str) -> Option<&Violation> {
        self.violations.iter().find(|v| v.check == check)
    }
}

fn annotation_name(t: ThreadId, l: u32) -> String {
    format!("thread {t} label {l}")
}

/// Check invariant, annotations and postcondition on every reachable
/// configuration, attributing each failure to the step that caused it.
pub fn check_outline(
    sys: &System,
    init: &Configuration,
    outline: &ProofOutline,
    opts: ExploreOptions,
) -> Result<OutlineReport, ModelError> {
    let mut names: Vec<String> = Vec::new();
    if outline.invariant.is_some() {
        names.push("invariant".into());
    }
    names.extend(outline.annotations.keys().map(|(t, l)| annotation_name(*t, *l)));
    if outline.post.is_some() {
        names.push("final".into());
    }

    if let Some(pre) = &outline.pre {
        if !eval_assertion(pre, init)? {
            return Ok(OutlineReport {
                verdict: Verdict::Valid,
                checks: names.into_iter().map(|check| CheckResult { check, holds: true }).collect(),
                violations: vec![],
                states_explored: 1,
                truncated: false,
            });
        }
    }

    let g = build_graph(sys, init, opts)?;
    let mut found: BTreeMap<String, Violation> = BTreeMap::new();
    let mut record = |check: String, kind: ViolationKind, witness: Vec<WitnessStep>| {
        found.entry(check.clone()).or_insert(Violation { check, kind, witness });
    };

    // checks at one node; `by` is the thread whose step led here
    let check_node = |g: &StateGraph, j: usize, by: Option<ThreadId>, witness: &dyn Fn() -> Vec<WitnessStep>, record: &mut dyn FnMut(String, ViolationKind, Vec<WitnessStep>)| -> Result<(), ModelError> {
        let cfg = &g.nodes[j];
        let kind_for = |t: Option<ThreadId>| match (by, t) {
            (None, _) => ViolationKind::Initial,
            (Some(b), Some(t)) if b != t => ViolationKind::Interference,
            _ => ViolationKind::LocalCorrectness,
        };
        if let Some(inv) = &outline.invariant {
            if !eval_assertion(inv, cfg)? {
                record("invariant".into(), kind_for(None), witness());
            }
        }
        for t in cfg.threads() {
            if let Some(l) = cfg.pc(t) {
                if let Some(a) = outline.annotations.get(&(t, l)) {
                    if !eval_assertion(a, cfg)? {
                        record(annotation_name(t, l), kind_for(Some(t)), witness());
                    }
                }
            }
        }
        if cfg.is_terminal() {
            if let Some(post) = &outline.post {
                if !eval_assertion(post, cfg)? {
                    record("final".into(), ViolationKind::Postcondition, witness());
                }
            }
        }
        Ok(())
    };

    check_node(&g, 0, None, &|| vec![], &mut record)?;
    for i in 0..g.len() {
        for (e, edge) in g.edges[i].iter().enumerate() {
            check_node(&g, edge.target, Some(edge.thread), &|| g.path_via(i, e), &mut record)?;
        }
    }

    let truncated = g.truncated();
    let verdict = if !found.is_empty() {
        Verdict::Violated
    } else if truncated {
        Verdict::UnknownBeyondBound
    } else {
        Verdict::Valid
    };
    Ok(OutlineReport {
        verdict,
        checks: names
            .into_iter()
            .map(|check| CheckResult {
                holds: !found.contains_key(&check),
                check,
            })
            .collect(),
        violations: found.into_values().collect(),
        states_explored: g.len(),
        truncated,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct HoareReport {
    pub verdict: Verdict,
    pub witness: Option<Vec<WitnessStep>>,
    pub states_explored: usize,
    pub truncated: bool,
}

/// Partial correctness of `{pre} program {post}` from `init`.
pub fn check_hoare(
    sys: &System,
    init: &Configuration,
    pre: &Assertion,
    post: &Assertion,
    opts: ExploreOptions,
) -> Result<HoareReport, ModelError> {
    if !eval_assertion(pre, init)? {
        return Ok(HoareReport {
            verdict: Verdict::Valid,
            witness: None,
            states_explored: 1,
            truncated: false,
        });
    }
    let g = build_graph(sys, init, opts)?;
    for (i, cfg) in g.nodes.iter().enumerate() {
        if cfg.is_terminal() && !eval_assertion(post, cfg)? {
            return Ok(HoareReport {
                verdict: Verdict::Violated,
                witness: Some(g.path_to(i)),
                states_explored: g.len(),
                truncated: g.truncated(),
            });
        }
    }
    let truncated = g.truncated();
    Ok(HoareReport {
        verdict: if truncated { Verdict::UnknownBeyondBound } else { Verdict::Valid },
        witness: None,
        states_explored: g.len(),
        truncated,
    })
}
