//! MacKay's alist format for sparse parity-check matrices.
//!
//! ```text
//! N M
//! max_col_weight max_row_weight
//! col weights (N numbers)
//! row weights (M numbers)
//! N lines: 1-based row indices of each column
//! M lines: 1-based column indices of each row
//! ```
//!
//! Zero padding up to the maximum weight is accepted on read and never
//! written.

use std::fmt::Write as _;
use std::path::Path;

use stochdec_core::FactorGraph;

use crate::{LabError, Result};

fn bad(msg: impl Into<String>) -> LabError {
    LabError::Format(msg.into())
}

fn numbers(line: &str, what: &str) -> Result<Vec<usize>> {
    line.split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| bad(format!("{what}: not a number: {t:?}"))))
        .collect()
}

pub fn parse(text: &str) -> Result<FactorGraph> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let mut next =
        |what: &str| lines.next().ok_or_else(|| bad(format!("missing {what}"))).and_then(|l| numbers(l, what));

    let dims = next("dimensions")?;
    let [n, m] = dims[..] else {
        return Err(bad("first line must hold N and M"));
    };
    let maxw = next("maximum weights")?;
    if maxw.len() != 2 {
        return Err(bad("second line must hold two maximum weights"));
    }
    let col_w = next("column weights")?;
    let row_w = next("row weights")?;
    if col_w.len() != n || row_w.len() != m {
        return Err(bad("weight list lengths do not match N and M"));
    }

    let mut from_cols = Vec::new();
    for (i, &w) in col_w.iter().enumerate() {
        let idx: Vec<usize> = next("column list")?.into_iter().filter(|&x| x != 0).collect();
        if idx.len() != w {
            return Err(bad(format!("column {} lists {} rows, weight says {w}", i + 1, idx.len())));
        }
        for r in idx {
            if r > m {
                return Err(bad(format!("row index {r} exceeds M = {m}")));
            }
            from_cols.push((i, r - 1));
        }
    }
    let mut from_rows = Vec::new();
    for (a, &w) in row_w.iter().enumerate() {
        let idx: Vec<usize> = next("row list")?.into_iter().filter(|&x| x != 0).collect();
        if idx.len() != w {
            return Err(bad(format!("row {} lists {} columns, weight says {w}", a + 1, idx.len())));
        }
        for c in idx {
            if c > n {
                return Err(bad(format!("column index {c} exceeds N = {n}")));
            }
            from_rows.push((c - 1, a));
        }
    }
    from_cols.sort_unstable();
    from_rows.sort_unstable();
    if from_cols != from_rows {
        return Err(bad("column and row sections describe different matrices"));
    }
    Ok(FactorGraph::from_edges(n, m, &from_cols)?)
}

pub fn render(graph: &FactorGraph) -> String {
    let n = graph.n_vars();
    let m = graph.n_chks();
    let join = |it: &mut dyn Iterator<Item = usize>| it.map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    let mut s = String::new();
    writeln!(s, "{n} {m}").unwrap();
    writeln!(s, "{} {}", graph.max_var_degree(), graph.max_chk_degree()).unwrap();
    writeln!(s, "{}", join(&mut (0..n).map(|i| graph.var_degree(i)))).unwrap();
    writeln!(s, "{}", join(&mut (0..m).map(|a| graph.chk_degree(a)))).unwrap();
    for i in 0..n {
        writeln!(s, "{}", join(&mut graph.var_adj(i).iter().map(|a| a + 1))).unwrap();
    }
    for a in 0..m {
        writeln!(s, "{}", join(&mut graph.chk_adj(a).iter().map(|i| i + 1))).unwrap();
    }
    s
}

pub fn read(path: &Path) -> Result<FactorGraph> {
    parse(&std::fs::read_to_string(path)?)
}

pub fn write(path: &Path, graph: &FactorGraph) -> Result<()> {
    std::fs::write(path, render(graph))?;
    Ok(())
}
