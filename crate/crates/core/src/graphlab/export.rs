use std::fmt::Write;

use super::{LinkGraph, NodeClass};

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// GraphML with per-node status, source, degrees and class.
pub fn to_graphml(graph: &LinkGraph) -> String {
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    for (key, ty) in [("status", "string"), ("source", "string"), ("in", "int"), ("out", "int"), ("class", "string")] {
        let _ = writeln!(s, "  <key id=\"{key}\" for=\"node\" attr.name=\"{key}\" attr.type=\"{ty}\"/>");
    }
    s.push_str("  <graph id=\"G\" edgedefault=\"directed\">\n");
    for ((id, info), (_, i, o)) in graph.nodes().zip(graph.degrees()) {
        let _ = writeln!(s, "    <node id=\"{}\">", xml_escape(id.as_str()));
        let _ = writeln!(s, "      <data key=\"status\">{}</data>", info.status.as_str());
        let _ = writeln!(s, "      <data key=\"source\">{}</data>", info.source.as_str());
        let _ = writeln!(s, "      <data key=\"in\">{i}</data>");
        let _ = writeln!(s, "      <data key=\"out\">{o}</data>");
        let _ = writeln!(s, "      <data key=\"class\">{}</data>", NodeClass::of(i, o).as_str());
        s.push_str("    </node>\n");
    }
    for (n, (u, v)) in graph.edges().enumerate() {
        let _ = writeln!(
            s,
            "    <edge id=\"e{n}\" source=\"{}\" target=\"{}\"/>",
            xml_escape(u.as_str()),
            xml_escape(v.as_str())
        );
    }
    s.push_str("  </graph>\n</graphml>\n");
    s
}

/// Graphviz digraph with the same node attributes as the GraphML export.
pub fn to_dot(graph: &LinkGraph) -> String {
    let mut s = String::from("digraph eepsites {\n");
    for ((id, info), (_, i, o)) in graph.nodes().zip(graph.degrees()) {
        let _ = writeln!(
            s,
            "  \"{}\" [status=\"{}\", source=\"{}\", in={i}, out={o}, class=\"{}\"];",
            id,
            info.status.as_str(),
            info.source.as_str(),
            NodeClass::of(i, o).as_str()
        );
    }
    for (u, v) in graph.edges() {
        let _ = writeln!(s, "  \"{u}\" -> \"{v}\";");
    }
    s.push_str("}\n");
    s
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::model::EepsiteId;

    #[test]
    fn exports_list_every_node_and_edge_once() {
        let id = |s: &str| s.parse::<EepsiteId>().unwrap();
        let g = LinkGraph::from_parts(
            BTreeMap::new(),
            [(id("a.i2p"), id("b.i2p")), (id("a.i2p"), id("b.i2p")), (id("b.i2p"), id("c.i2p"))],
        );
        let xml = to_graphml(&g);
        assert_eq!(xml.matches("<node ").count(), 3);
        assert_eq!(xml.matches("<edge ").count(), 2);
        assert!(xml.contains("<data key=\"class\">CONNECTED</data>"));
        let dot = to_dot(&g);
        assert_eq!(dot.matches(" -> ").count(), 2);
        assert!(dot.contains("\"a.i2p\" [status=\"DISCOVERING\", source=\"DISCOVERED\", in=0, out=1, class=\"SOURCE\"];"));
    }
}
