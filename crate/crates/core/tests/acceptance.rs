//! End-to-end acceptance run: one PASS/FAIL line per criterion, each under
//! a fixed wall-clock limit. Exits non-zero if anything fails.

mod common;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rarobj_core::assertion::eval_assertion;
use rarobj_core::explore::{build_graph, explore, ExploreOptions};
use rarobj_core::fifo::check_fifo;
use rarobj_core::litmus::{parse_litmus, LitmusFile};
use rarobj_core::lock_rules::{check_lock_rules, check_rule, Rule};
use rarobj_core::outline::{check_outline, Verdict};
use rarobj_core::refinement::{check_simulation, check_trace_inclusion, Instance, LockImpl};
use rarobj_core::{Value, Var};

use common::*;

type Check = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Check);

fn corpus(name: &str) -> Result<LitmusFile, String> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name);
    let src = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_litmus(&src).map_err(|e| format!("{name}: {e}"))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Terminal values of `regs`, plus the number of states explored.
fn terminal_values(file: &str, regs: &[&str]) -> Result<(BTreeSet<Vec<Value>>, usize), String> {
    let m = corpus(file)?.model().map_err(|e| e.to_string())?;
    let r = explore(&m.system, &m.init, &m.observe, ExploreOptions::default()).map_err(|e| e.to_string())?;
    ensure(!r.truncated, || format!("{file}: exploration truncated"))?;
    ensure(r.deadlocks.is_empty(), || format!("{file}: {} deadlocked states", r.deadlocks.len()))?;
    let vals = r.outcomes.keys().map(|o| regs.iter().map(|k| o[*k]).collect()).collect();
    Ok((vals, r.states()))
}

fn mp_relaxed() -> Check {
    let (seen, states) = terminal_values("mp-relaxed.lit", &["r1", "r2"])?;
    let after_flag: BTreeSet<Value> = seen.iter().filter(|v| v[0] == Value::Int(1)).map(|v| v[1]).collect();
    let want = BTreeSet::from([Value::Int(0), Value::Int(5)]);
    let all_r2: BTreeSet<Value> = seen.iter().map(|v| v[1]).collect();
    ensure(after_flag == want, || format!("r2 after flag: {after_flag:?}"))?;
    ensure(all_r2 == want, || format!("r2 overall: {all_r2:?}"))?;
    ensure(states < 10_000, || format!("{states} states"))?;
    Ok(format!("r2 in {{0, 5}}, both witnessed; {states} states"))
}

fn mp_relacq() -> Check {
    let (seen, states) = terminal_values("mp-relacq.lit", &["r2"])?;
    ensure(seen == BTreeSet::from([vec![Value::Int(5)]]), || format!("r2: {seen:?}"))?;
    Ok(format!("r2 = 5 only; {states} states"))
}

fn queue_mp() -> Check {
    let (seen, states) = terminal_values("queue-mp.lit", &["r1", "r2"])?;
    let after: BTreeSet<Value> = seen.iter().filter(|v| v[0] == Value::Int(1)).map(|v| v[1]).collect();
    ensure(after == BTreeSet::from([Value::Int(5)]), || format!("r2 after dequeue: {after:?}"))?;
    Ok(format!("r2 = 5 whenever the dequeue returns 1; {states} states"))
}

fn lock_client() -> Check {
    let f = corpus("lockmp.lit")?;
    let m = f.model().map_err(|e| e.to_string())?;
    let r = explore(&m.system, &m.init, &m.observe, ExploreOptions::default()).map_err(|e| e.to_string())?;
    ensure(!r.truncated, || "exploration truncated".into())?;
    let seen: BTreeSet<(Value, Value)> = r.outcomes.keys().map(|o| (o["r1"], o["r2"])).collect();
    let want = BTreeSet::from([(Value::Int(0), Value::Int(0)), (Value::Int(5), Value::Int(5))]);
    ensure(seen == want, || format!("(r1, r2): {seen:?}"))?;
    let inv = f.invariant.as_ref().ok_or("no invariant")?;
    let mut broken = 0;
    for cfg in &r.graph.nodes {
        if !eval_assertion(inv, cfg).map_err(|e| e.to_string())? {
            broken += 1;
        }
    }
    ensure(broken == 0, || format!("invariant fails in {broken} states"))?;
    Ok(format!("(r1, r2) in {{(0,0), (5,5)}}, both witnessed; Inv holds in all {} states", r.states()))
}

fn outline() -> Check {
    let m = corpus("lockmp.lit")?.model().map_err(|e| e.to_string())?;
    let rep = check_outline(&m.system, &m.init, &m.outline, ExploreOptions::default()).map_err(|e| e.to_string())?;
    let failed: Vec<&str> = rep.violations.iter().map(|v| v.check.as_str()).collect();
    ensure(rep.verdict == Verdict::Valid, || format!("outline {:?}: {failed:?}", rep.verdict))?;
    let checks = rep.checks.len();

    let weak = corpus("mutants/lockmp-weak-q1.lit")?.model().map_err(|e| e.to_string())?;
    let rep =
        check_outline(&weak.system, &weak.init, &weak.outline, ExploreOptions::default()).map_err(|e| e.to_string())?;
    ensure(rep.verdict == Verdict::Violated, || "weakened outline accepted".into())?;
    let v = rep.violation("thread 2 label 1").ok_or("weakened Q1 not reported")?;
    ensure(!v.witness.is_empty(), || "empty witness".into())?;
    Ok(format!(
        "{checks} checks valid; weakened Q1 violated after {} steps",
        v.witness.len()
    ))
}

fn lock_rules() -> Check {
    let m = corpus("lockmp.lit")?.model().map_err(|e| e.to_string())?;
    let g = build_graph(&m.system, &m.init, ExploreOptions::default()).map_err(|e| e.to_string())?;
    let l = Var::new("l");
    let mut instances = 0;
    for rep in check_lock_rules(&g, &l).map_err(|e| e.to_string())? {
        ensure(rep.holds(), || {
            format!("{} violated: {}", rep.rule, rep.violations[0].triple)
        })?;
        ensure(rep.instances > 0, || format!("{} never applies", rep.rule))?;
        instances += rep.instances;
    }
    for r in Rule::ALL {
        let rep = check_rule(&g, &l, r, true).map_err(|e| e.to_string())?;
        ensure(!rep.holds(), || format!("mutant of {r} survived"))?;
    }
    Ok(format!(
        "6 rules, {instances} instances over {} states, 0 violations; 6 mutants falsified",
        g.len()
    ))
}

fn refine(file: &str, expect_ok: bool, limit: Duration) -> Check {
    let f = corpus(file)?;
    let name = f
        .object
        .as_ref()
        .and_then(|o| o.implementation.clone())
        .ok_or_else(|| format!("{file}: no implementation"))?;
    let imp: LockImpl = name.parse().map_err(|e| format!("{e}"))?;
    ensure(imp.is_correct() == expect_ok, || format!("{imp} is the wrong kind of lock"))?;
    let inst = Instance::new(&f, &imp.implementation()).map_err(|e| e.to_string())?;
    let opts = ExploreOptions::default();

    let t0 = Instant::now();
    let sim = check_simulation(&inst, opts).map_err(|e| e.to_string())?;
    let sim_time = t0.elapsed();
    let t1 = Instant::now();
    let tr = check_trace_inclusion(&inst, opts).map_err(|e| e.to_string())?;
    let tr_time = t1.elapsed();
    ensure(sim_time < limit && tr_time < limit, || {
        format!("{imp}: simulation {sim_time:?}, trace {tr_time:?}")
    })?;

    let want = if expect_ok { Verdict::Valid } else { Verdict::Violated };
    ensure(sim.verdict == want, || format!("{imp}: simulation {:?}", sim.verdict))?;
    ensure(tr.verdict == want, || format!("{imp}: trace inclusion {:?}", tr.verdict))?;
    if expect_ok {
        Ok(format!(
            "{imp}: simulation found ({} pairs), traces included ({} sets)",
            sim.pairs, tr.explored
        ))
    } else {
        let cex = sim.counterexample.as_ref().ok_or("no counterexample")?;
        ensure(tr.witness.is_some(), || "no trace witness".into())?;
        Ok(format!("{imp}: rejected, {} ({} steps)", cex.reason, cex.steps.len()))
    }
}

fn refinement() -> Check {
    let limit = Duration::from_secs(60);
    let a = refine("seqlock-refine.lit", true, limit)?;
    let b = refine("ticketlock-refine.lit", true, limit)?;
    Ok(format!("{a}; {b}"))
}

fn negative_refinement() -> Check {
    let limit = Duration::from_secs(60);
    let a = refine("mutants/seqlock-relaxed-refine.lit", false, limit)?;
    let b = refine("mutants/ticketlock-relaxed-refine.lit", false, limit)?;
    Ok(format!("{a}; {b}"))
}

fn properties() -> Check {
    const N: usize = 1_000;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut bad = [0usize; 3];
    let mem = walk_memory(&mut rng, N, |s| {
        bad[0] += usize::from(!fresh_insertion(s));
        bad[1] += usize::from(!updates_atomic(s.post.0) || !updates_atomic(s.post.1));
        bad[2] += usize::from(!views_monotone(s));
    });
    ensure(bad == [0; 3], || format!("memory walk failures (fresh, atomic, monotone): {bad:?}"))?;

    let mut states = Vec::new();
    let progs = walk_programs(&mut rng, N, |_, cfg, _| states.push(cfg.clone()));
    let dp = states.iter().filter(|c| !definite_implies_possible(c)).count();
    ensure(dp == 0, || format!("definite without possible in {dp} states"))?;
    let ck = states.iter().filter(|c| !canonical_key_invariant(&mut rng, c)).count();
    ensure(ck == 0, || format!("canonical key not invariant in {ck} states"))?;

    for _ in 0..N {
        let (a, b) = (random_view(&mut rng), random_view(&mut rng));
        ensure(merge_is_pointwise_max(&a, &b), || format!("merge of {a:?} and {b:?}"))?;
    }

    let fifo = check_fifo(3, 3, ExploreOptions::default()).map_err(|e| e.to_string())?;
    ensure(fifo.failures.is_empty(), || {
        format!("FIFO oracle disagrees on {}", fifo.failures[0].workload)
    })?;
    ensure(fifo.states >= N, || format!("FIFO covered only {} states", fifo.states))?;
    Ok(format!(
        "{mem} memory steps, {progs} program states, {N} view merges, {} FIFO workloads / {} states",
        fifo.workloads, fifo.states
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("relaxed message passing", Duration::from_secs(1), mp_relaxed),
        ("release-acquire message passing", Duration::from_secs(1), mp_relacq),
        ("queue message passing", Duration::from_secs(5), queue_mp),
        ("lock client outcomes and invariant", Duration::from_secs(10), lock_client),
        ("lock client proof outline", Duration::from_secs(10), outline),
        ("abstract lock proof rules", Duration::from_secs(30), lock_rules),
        ("lock refinement", Duration::from_secs(120), refinement),
        ("relaxed-release lock mutants", Duration::from_secs(120), negative_refinement),
        ("property suites", Duration::from_secs(120), properties),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let res = run();
        let took = t0.elapsed();
        let res = match res {
            Ok(_) if took > *limit => Err(format!("took {took:.2?}, limit {limit:?}")),
            r => r,
        };
        match res {
            Ok(msg) => println!("PASS {} {name} ({took:.2?}): {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {} {name} ({took:.2?}): {msg}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
