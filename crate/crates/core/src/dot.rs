// SPDX-License-Identifier: Apache-2.0

//! Graphviz export of the causal graph. Exogenous variables are dashed.

use std::fmt::Write;

use crate::scm::{derive_graph, GraphError, GraphMode, Scm};

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

pub fn to_dot(scm: &Scm) -> Result<String, GraphError> {
    let g = derive_graph(scm, GraphMode::Syntactic)?;
    let mut s = String::new();
    writeln!(s, "digraph {} {{", quote(&scm.name)).unwrap();
    for v in &g.vertices {
        let style = if scm.is_exogenous(v) {
            "dashed"
        } else {
            "solid"
        };
        writeln!(
            s,
            "  {} [shape=circle, style={style}];",
            quote(&v.to_string())
        )
        .unwrap();
    }
    for (a, b) in &g.edges {
        writeln!(
            s,
            "  {} -> {};",
            quote(&a.to_string()),
            quote(&b.to_string())
        )
        .unwrap();
    }
    s.push_str("}\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo;

    #[test]
    fn dominoes_chain() {
        let d = to_dot(&zoo::dominoes(3).unwrap().scm).unwrap();
        assert_eq!(d.matches("style=dashed").count(), 1);
        assert_eq!(d.matches("style=solid").count(), 3);
        assert!(d.contains("\"push\" -> \"S_1\";"));
        assert!(d.contains("\"S_2\" -> \"S_3\";"));
        assert_eq!(d.matches("->").count(), 3);
        assert_eq!(d, to_dot(&zoo::dominoes(3).unwrap().scm).unwrap());
    }
}
