//! Graphviz rendering of a CRI's splitting tree.

use std::fmt::Write;

use super::trace::{CriTrace, NodeFate, SkipReason};
use super::Side;

/// DOT text of the full binary splitting tree of `trace`. Nodes show their
/// transmitter set and slot (`t=`); nodes that cost no slot are dashed.
pub fn export_tree(trace: &CriTrace) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph cri {{");
    let _ = writeln!(out, "  label=\"{} n={}\";", trace.protocol, trace.initial.len());
    let _ = writeln!(out, "  node [shape=circle, fontname=\"Helvetica\"];");
    for node in &trace.nodes {
        let members = node.members.to_string();
        let (label, style) = match node.fate {
            NodeFate::Transmitted { slot } => (format!("{members}\\nt={slot}"), "solid"),
            NodeFate::Skipped {
                reason: SkipReason::KnownCollision,
            } => (format!("{members}\\nsplit"), "dashed"),
            NodeFate::Skipped {
                reason: SkipReason::Cancelled,
            } => (format!("{members}\\nsic"), "dashed"),
            NodeFate::Pending => (members, "dotted"),
        };
        let _ = writeln!(out, "  n{} [label=\"{label}\", style={style}];", node.id);
    }
    for node in &trace.nodes {
        if let (Some(parent), Some(side)) = (node.parent, node.side) {
            let tag = match side {
                Side::Left => "L",
                Side::Right => "R",
            };
            let _ = writeln!(out, "  n{parent} -> n{} [label=\"{tag}\"];", node.id);
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crp::{run_cri, ProtocolKind, SeededCoins};
    use crate::signal::PacketId;

    #[test]
    fn empty_cri_renders_one_idle_node() {
        let t = run_cri(ProtocolKind::Bta, &[], 0.5, &mut SeededCoins::new(0)).unwrap();
        let dot = export_tree(&t);
        assert_eq!(dot.matches("[label=").count(), 1);
        assert!(dot.contains("∅\\nt=1"));
    }

    #[test]
    fn atic_pair_has_one_realized_child() {
        let t = run_cri(
            ProtocolKind::Atic,
            &[PacketId(1), PacketId(2)],
            0.5,
            &mut SeededCoins::new(0),
        )
        .unwrap();
        let dot = export_tree(&t);
        assert_eq!(dot.matches("style=solid").count(), 2);
        assert_eq!(dot.matches("style=dashed").count(), 1);
        assert!(dot.contains("{2}\\nt=2"));
    }
}
