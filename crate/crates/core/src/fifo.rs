//! Brute-force FIFO oracle for the abstract queue.
//!
//! A workload assigns sequences of enqueues and dequeues to threads. The
//! oracle runs every interleaving of those sequences against a sequential
//! queue; the model explores the same workload under the abstract queue
//! rules. The two must agree on the set of per-thread dequeue results, and in
//! every reachable state the matched (enqueue, dequeue) pairs must preserve
//! order: an earlier enqueue is consumed by an earlier dequeue.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use crate::action::Action;
use crate::error::ModelError;
use crate::explore::{build_graph, Configuration, ExploreOptions, System};
use crate::objects::ObjectSpec;
use crate::program::{CExp, Call, Cmd, Expr, Hole, Method};
use crate::state::{InitSpec, ObjectKind};
use crate::types::{Reg, ThreadId, Value, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum QueueOp {
    Enq(i64),
    Deq,
}

/// Per-thread operation sequences.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Workload {
    pub threads: Vec<Vec<QueueOp>>,
}

/// Dequeued values per thread, in program order.
pub type DeqResults = Vec<Vec<Value>>;

impl fmt::Display for Workload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, ops) in self.threads.iter().enumerate() {
            if i > 0 {
                f.write_str(" || ")?;
            }
            let s: Vec<String> = ops
                .iter()
                .map(|o| match o {
                    QueueOp::Enq(v) => format!("enq({v})"),
                    QueueOp::Deq => "deq".to_string(),
                })
                .collect();
            f.write_str(&s.join("; "))?;
        }
        Ok(())
    }
}

impl Workload {
    /// Every two-thread workload with exactly `enqs` enqueues and `deqs`
    /// dequeues. Enqueued values are 1, 2, … in textual order.
    pub fn all(enqs: usize, deqs: usize) -> Vec<Workload> {
        let n = enqs + deqs;
        let mut out = Vec::new();
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != enqs {
                continue;
            }
            let mut next = 0;
            let word: Vec<QueueOp> = (0..n)
                .map(|i| {
                    if mask & (1 << i) != 0 {
                        next += 1;
                        QueueOp::Enq(next)
                    } else {
                        QueueOp::Deq
                    }
                })
                .collect();
            for cut in 0..=n {
                out.push(Workload {
                    threads: vec![word[..cut].to_vec(), word[cut..].to_vec()],
                });
            }
        }
        out
    }

    /// Dequeue results of every interleaving run on a sequential queue.
    pub fn fifo_outcomes(&self) -> BTreeSet<DeqResults> {
        fn go(w: &Workload, pos: &mut Vec<usize>, q: &mut VecDeque<i64>, res: &mut DeqResults, out: &mut BTreeSet<DeqResults>) {
            let mut moved = false;
            for t in 0..w.threads.len() {
                let Some(op) = w.threads[t].get(pos[t]).copied() else {
                    continue;
                };
                moved = true;
                pos[t] += 1;
                match op {
                    QueueOp::Enq(v) => {
                        q.push_back(v);
                        go(w, pos, q, res, out);
                        q.pop_back();
                    }
                    QueueOp::Deq => {
                        let front = q.pop_front();
                        res[t].push(front.map_or(Value::Empty, Value::Int));
                        go(w, pos, q, res, out);
                        res[t].pop();
                        if let Some(v) = front {
                            q.push_front(v);
                        }
                    }
                }
                pos[t] -= 1;
            }
            if !moved {
                out.insert(res.clone());
            }
        }
        let mut out = BTreeSet::new();
        let n = self.threads.len();
        go(self, &mut vec![0; n], &mut VecDeque::new(), &mut vec![vec![]; n], &mut out);
        out
    }

    fn queue() -> Var {
        Var::new("q")
    }

    fn deq_reg(i: usize) -> Reg {
        Reg::new(&format!("d{i}"))
    }

    /// The workload as a program over the abstract queue `q`.
    pub fn model(&self) -> Result<(System, Configuration), ModelError> {
        let q = Self::queue();
        let call = |method, arg: Option<i64>| {
            Hole::Call(Call {
                object: q.clone(),
                method,
                arg: arg.map(Expr::lit),
                version_out: None,
            })
        };
        let mut programs = BTreeMap::new();
        for (t, ops) in self.threads.iter().enumerate() {
            let cmds = ops
                .iter()
                .enumerate()
                .map(|(i, op)| match op {
                    QueueOp::Enq(v) => Cmd::Call(call(Method::Enq, Some(*v))),
                    QueueOp::Deq => Cmd::Assign {
                        reg: Self::deq_reg(i),
                        rhs: CExp::Hole(call(Method::Deq, None)),
                    },
                })
                .collect();
            programs.insert(ThreadId(t as u32 + 1), Cmd::seq_all(cmds));
        }
        let spec = InitSpec {
            globals: vec![],
            library_vars: BTreeSet::new(),
            object: Some((q.clone(), ObjectKind::Queue)),
            threads: programs.keys().copied().collect(),
        };
        let sys = System::new(vec![ObjectSpec::queue(q.as_str())]);
        let init = sys.initial(&spec, programs, &BTreeMap::new())?;
        Ok((sys, init))
    }

    fn results_of(&self, cfg: &Configuration) -> DeqResults {
        self.threads
            .iter()
            .enumerate()
            .map(|(t, ops)| {
                ops.iter()
                    .enumerate()
                    .filter(|(_, o)| **o == QueueOp::Deq)
                    .map(|(i, _)| cfg.local(ThreadId(t as u32 + 1), &Self::deq_reg(i)).unwrap_or(Value::Bot))
                    .collect()
            })
            .collect()
    }
}

/// Whether the matched pairs of queue `q` in `cfg` are order-preserving and
/// each dequeue returns the value of the enqueue it is matched with.
pub fn matched_pairs_ordered(cfg: &Configuration, q: &Var) -> bool {
    let lib = &cfg.library;
    let pairs: Vec<_> = lib.matched.iter().copied().collect();
    let ordered = pairs
        .iter()
        .all(|(e1, d1)| pairs.iter().all(|(e2, d2)| (e1 < e2) == (d1 < d2) || e1 == e2));
    let values_agree = pairs.iter().all(|(e, d)| {
        let enq = lib.ops_on(q).find(|(ts, _)| *ts == e).map(|(_, a)| a.clone());
        let deq = lib.ops_on(q).find(|(ts, _)| *ts == d).map(|(_, a)| a.clone());
        matches!(
            (enq, deq),
            (Some(Action::Enqueue { value: a, .. }), Some(Action::Dequeue { value: b, .. })) if a == b
        )
    });
    ordered && values_agree
}

#[derive(Clone, Debug)]
pub struct WorkloadResult {
    pub workload: Workload,
    pub states: usize,
    /// Outcomes produced by the model but not by any interleaving.
    pub unexpected: BTreeSet<DeqResults>,
    /// Interleaving outcomes the model never produced.
    pub missing: BTreeSet<DeqResults>,
    /// Reachable states whose matched pairs cross or disagree in value.
    pub disordered: usize,
    pub truncated: bool,
}

impl WorkloadResult {
    pub fn agrees(&self) -> bool {
        self.unexpected.is_empty() && self.missing.is_empty() && self.disordered == 0 && !self.truncated
    }
}

/// Compare the model of `w` against the oracle.
pub fn check_workload(w: &Workload, opts: ExploreOptions) -> Result<WorkloadResult, ModelError> {
    let (sys, init) = w.model()?;
    let g = build_graph(&sys, &init, opts)?;
    let q = Workload::queue();
    let mut model = BTreeSet::new();
    let mut disordered = 0;
    for cfg in &g.nodes {
        if !matched_pairs_ordered(cfg, &q) {
            disordered += 1;
        }
        if cfg.is_terminal() {
            model.insert(w.results_of(cfg));
        }
    }
    let oracle = w.fifo_outcomes();
    Ok(WorkloadResult {
        workload: w.clone(),
        states: g.len(),
        unexpected: model.difference(&oracle).cloned().collect(),
        missing: oracle.difference(&model).cloned().collect(),
        disordered,
        truncated: g.truncated(),
    })
}

#[derive(Clone, Debug, Default)]
pub struct FifoReport {
    pub workloads: usize,
    pub states: usize,
    pub failures: Vec<WorkloadResult>,
}

/// Run every two-thread workload with up to `enqs` enqueues and up to
/// `deqs` dequeues.
pub fn check_fifo(enqs: usize, deqs: usize, opts: ExploreOptions) -> Result<FifoReport, ModelError> {
    let mut rep = FifoReport::default();
    for e in 0..=enqs {
        for d in 0..=deqs {
            for w in Workload::all(e, d) {
                let r = check_workload(&w, opts)?;
                rep.workloads += 1;
                rep.states += r.states;
                if !r.agrees() {
                    rep.failures.push(r);
                }
            }
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_on_a_single_thread() {
        let w = Workload {
            threads: vec![vec![QueueOp::Enq(1), QueueOp::Deq, QueueOp::Deq]],
        };
        assert_eq!(
            w.fifo_outcomes(),
            BTreeSet::from([vec![vec![Value::Int(1), Value::Empty]]])
        );
    }

    #[test]
    fn oracle_counts_interleavings() {
        let w = Workload {
            threads: vec![vec![QueueOp::Enq(1), QueueOp::Enq(2)], vec![QueueOp::Deq]],
        };
        let expect: BTreeSet<DeqResults> = [Value::Empty, Value::Int(1)]
            .into_iter()
            .map(|v| vec![vec![], vec![v]])
            .collect();
        assert_eq!(w.fifo_outcomes(), expect);
    }

    #[test]
    fn workloads_enumerate_splits() {
        // C(3,1) words, each cut 4 ways
        assert_eq!(Workload::all(1, 2).len(), 12);
    }

    #[test]
    fn small_workloads_agree() {
        let rep = check_fifo(2, 2, ExploreOptions::default()).unwrap();
        let first = rep.failures.first().map(|f| (f.workload.to_string(), &f.unexpected, &f.missing));
        assert!(rep.failures.is_empty(), "{first:?}");
    }
}
