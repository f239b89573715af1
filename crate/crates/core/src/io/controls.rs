//! UIX control hierarchies annotated with control groups.
//!
//! Both `controlGroup` and `testGroup` name a node's group; an empty value
//! means the node belongs to no group.

use roxmltree::{Document, Node};
use serde::{Deserialize, Serialize};

use crate::error::{LowerError, ParseError};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ControlDefinition {
    pub nodes: Vec<ControlNode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ControlNode {
    pub group: Option<String>,
    pub class: String,
    pub index: u32,
    pub text: String,
    pub resource_id: String,
    pub clickable: bool,
    pub long_clickable: bool,
    pub scrollable: bool,
    pub is_fixed_value: bool,
    pub pattern_or_value: String,
    pub children: Vec<ControlNode>,
}

impl ControlNode {
    /// The text a `setText` action should type, if the node carries one.
    pub fn parameter(&self) -> Result<Option<String>, LowerError> {
        if self.is_fixed_value {
            return Ok(Some(self.pattern_or_value.clone()));
        }
        if self.pattern_or_value.is_empty() {
            return Ok(None);
        }
        Err(LowerError::NotSupported {
            group: self.group.clone().unwrap_or_default(),
            what: format!("generated value pattern `{}`", self.pattern_or_value),
        })
    }
}

impl ControlDefinition {
    /// First node of `group` in document order.
    pub fn find_group(&self, group: &str) -> Option<&ControlNode> {
        fn walk<'a>(nodes: &'a [ControlNode], group: &str) -> Option<&'a ControlNode> {
            nodes.iter().find_map(|n| {
                if n.group.as_deref() == Some(group) {
                    Some(n)
                } else {
                    walk(&n.children, group)
                }
            })
        }
        walk(&self.nodes, group)
    }

    pub fn len(&self) -> usize {
        fn count(nodes: &[ControlNode]) -> usize {
            nodes.iter().map(|n| 1 + count(&n.children)).sum()
        }
        count(&self.nodes)
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn flag(node: Node, name: &str) -> bool {
    node.attribute(name) == Some("true")
}

fn read_node(doc: &Document, node: Node) -> Result<ControlNode, ParseError> {
    let line = doc.text_pos_at(node.range().start).row;
    let index = match node.attribute("index") {
        None | Some("") => 0,
        Some(i) => i
            .parse()
            .map_err(|_| ParseError::schema(line, format!("node index `{i}` is not a number")))?,
    };
    let group = node
        .attribute("controlGroup")
        .or_else(|| node.attribute("testGroup"))
        .filter(|g| !g.is_empty())
        .map(str::to_string);
    Ok(ControlNode {
        group,
        class: node.attribute("class").unwrap_or("").to_string(),
        index,
        text: node.attribute("text").unwrap_or("").to_string(),
        resource_id: node.attribute("resource-id").unwrap_or("").to_string(),
        clickable: flag(node, "clickable"),
        long_clickable: flag(node, "long-clickable"),
        scrollable: flag(node, "scrollable"),
        is_fixed_value: flag(node, "IsFixedValue"),
        pattern_or_value: node.attribute("PatternOrValue").unwrap_or("").to_string(),
        children: read_children(doc, node)?,
    })
}

fn read_children(doc: &Document, parent: Node) -> Result<Vec<ControlNode>, ParseError> {
    let mut out = Vec::new();
    for child in parent.children() {
        if child.is_element() {
            if child.tag_name().name() != "node" {
                return Err(ParseError::schema(
                    doc.text_pos_at(child.range().start).row,
                    format!("unexpected <{}> in the control tree", child.tag_name().name()),
                ));
            }
            out.push(read_node(doc, child)?);
        }
    }
    Ok(out)
}

/// Parses a UIX document whose root is `<hierarchy>` or a single `<node>`.
pub fn parse_controls(text: &str) -> Result<ControlDefinition, ParseError> {
    let doc = Document::parse(text).map_err(|e| ParseError::schema(e.pos().row, e.to_string()))?;
    let root = doc.root_element();
    let nodes = match root.tag_name().name() {
        "hierarchy" => read_children(&doc, root)?,
        "node" => vec![read_node(&doc, root)?],
        other => {
            return Err(ParseError::schema(
                doc.text_pos_at(root.range().start).row,
                format!("root element must be <hierarchy> or <node>, found <{other}>"),
            ))
        }
    };
    Ok(ControlDefinition { nodes })
}
