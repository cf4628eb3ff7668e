//! Inputs shared by the benchmarks: the bundled corpus and a family of
//! message-passing programs whose state space grows with the number of
//! readers.

use std::path::PathBuf;

use rarobj_core::litmus::{parse_litmus, LitmusFile, Model};

/// Parse a file from the bundled corpus.
pub fn corpus(name: &str) -> LitmusFile {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name);
    let src = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    parse_litmus(&src).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// One writer publishing `d` through a release write to `f`, and `readers`
/// threads each acquiring `f` and then reading `d`.
pub fn fan_out_mp(readers: usize) -> LitmusFile {
    let mut src = String::from("litmus \"fan-out\"\ninit d := 0; f := 0;\nthread 1\n  d := 5;\n  f :=R 1\nend\n");
    for t in 0..readers {
        src.push_str(&format!("thread {}\n  a{t} <-A f;\n  b{t} <- d\nend\n", t + 2));
    }
    parse_litmus(&src).expect("generated program parses")
}

pub fn model(f: &LitmusFile) -> Model {
    f.model().expect("benchmark inputs build")
}
