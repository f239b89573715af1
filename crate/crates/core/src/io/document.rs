//! The XML application-model dialect and its JSON mirror.
//!
//! ```xml
//! <Model>
//!   <Devices><Device id="d1" applications="Facebook"/></Devices>
//!   <Application name="Facebook" package="com.facebook.android">
//!     <Views>
//!       <View name="HomeView" controlsFile="Home.xml">
//!         <StateMachines>
//!           <StateMachine name="HomeUpdate">
//!             <States><State name="S0"/></States>
//!             <Transitions>
//!               <Transition ID="1" event="Swipe" prev="" next="S0" type="Simple"/>
//! ```
//!
//! A bare `<Application>` root is accepted as well. Attributes the dialect
//! does not know are kept in `extra` and written back unchanged.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use roxmltree::{Document, Node};
use serde::{Deserialize, Serialize};

use crate::error::ParseError;
use crate::model::EventKind;

pub type Attrs = Vec<(String, String)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransitionType {
    Simple,
    View,
    StateMachine,
}

impl TransitionType {
    pub fn as_str(self) -> &'static str {
        match self {
            TransitionType::Simple => "Simple",
            TransitionType::View => "View",
            TransitionType::StateMachine => "StateMachine",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelDocument {
    #[serde(default)]
    pub devices: Vec<DeviceDecl>,
    #[serde(default)]
    pub channels: Vec<ChannelDecl>,
    pub applications: Vec<Application>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DeviceDecl {
    pub id: String,
    pub applications: Vec<String>,
    #[serde(default)]
    pub extra: Attrs,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChannelDecl {
    pub name: String,
    pub sender: String,
    pub receiver: String,
    #[serde(default)]
    pub extra: Attrs,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Application {
    pub name: String,
    #[serde(default)]
    pub package: String,
    pub views: Vec<View>,
    #[serde(default)]
    pub extra: Attrs,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct View {
    pub name: String,
    #[serde(default)]
    pub controls_file: Option<String>,
    pub state_machines: Vec<StateMachineDecl>,
    #[serde(default)]
    pub extra: Attrs,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StateMachineDecl {
    pub name: String,
    pub states: Vec<StateDecl>,
    pub transitions: Vec<TransitionDecl>,
    #[serde(default)]
    pub extra: Attrs,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StateDecl {
    pub name: String,
    #[serde(default)]
    pub extra: Attrs,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TransitionDecl {
    pub id: String,
    pub event: String,
    /// Empty: leaves the machine's initial state.
    pub prev: String,
    /// Empty: enters a final state.
    pub next: String,
    #[serde(default)]
    pub through: Option<String>,
    #[serde(rename = "type")]
    pub kind_of_transition: TransitionType,
    #[serde(default)]
    pub kind: Option<EventKind>,
    #[serde(default)]
    pub channel: Option<String>,
    #[serde(default)]
    pub reuse: Option<bool>,
    #[serde(default)]
    pub auto_return: Option<bool>,
    #[serde(default)]
    pub control: Option<String>,
    #[serde(default)]
    pub action: Option<String>,
    #[serde(default)]
    pub extra: Attrs,
}

impl ModelDocument {
    pub fn transitions(&self) -> impl Iterator<Item = &TransitionDecl> {
        self.applications
            .iter()
            .flat_map(|a| &a.views)
            .flat_map(|v| &v.state_machines)
            .flat_map(|m| &m.transitions)
    }

    pub fn view(&self, name: &str) -> Option<&View> {
        self.applications.iter().flat_map(|a| &a.views).find(|v| v.name == name)
    }

    pub fn state_machine(&self, name: &str) -> Option<&StateMachineDecl> {
        self.applications
            .iter()
            .flat_map(|a| &a.views)
            .flat_map(|v| &v.state_machines)
            .find(|m| m.name == name)
    }
}

fn line_of(doc: &Document, node: Node) -> u32 {
    doc.text_pos_at(node.range().start).row
}

struct Reader<'a, 'i> {
    doc: &'a Document<'i>,
}

impl<'a, 'i> Reader<'a, 'i> {
    fn elements(&self, node: Node<'a, 'i>) -> Result<Vec<Node<'a, 'i>>, ParseError> {
        let mut out = Vec::new();
        for child in node.children() {
            if child.is_element() {
                out.push(child);
            } else if child.is_text() && !child.text().unwrap_or("").trim().is_empty() {
                return Err(ParseError::schema(
                    line_of(self.doc, child),
                    format!("unexpected text inside <{}>", node.tag_name().name()),
                ));
            }
        }
        Ok(out)
    }

    fn expect(&self, node: Node, name: &str) -> Result<(), ParseError> {
        if node.tag_name().name() != name {
            return Err(ParseError::schema(
                line_of(self.doc, node),
                format!("expected <{name}>, found <{}>", node.tag_name().name()),
            ));
        }
        Ok(())
    }

    fn required(&self, node: Node, attr: &str) -> Result<String, ParseError> {
        node.attribute(attr).map(str::to_string).ok_or_else(|| {
            ParseError::schema(
                line_of(self.doc, node),
                format!("<{}> is missing required attribute `{attr}`", node.tag_name().name()),
            )
        })
    }

    fn extra(node: Node, known: &[&str]) -> Attrs {
        node.attributes()
            .filter(|a| !known.contains(&a.name()))
            .map(|a| (a.name().to_string(), a.value().to_string()))
            .collect()
    }

    fn bool_attr(&self, node: Node, attr: &str) -> Result<Option<bool>, ParseError> {
        match node.attribute(attr) {
            None => Ok(None),
            Some("true") => Ok(Some(true)),
            Some("false") => Ok(Some(false)),
            Some(other) => Err(ParseError::schema(
                line_of(self.doc, node),
                format!("attribute `{attr}` must be true or false, found `{other}`"),
            )),
        }
    }

    /// The single child wrapper element `name` (e.g. `<Views>`), if present.
    fn wrapper(&self, node: Node<'a, 'i>, name: &str) -> Result<Vec<Node<'a, 'i>>, ParseError> {
        let mut out = Vec::new();
        for child in self.elements(node)? {
            self.expect(child, name)?;
            out.extend(self.elements(child)?);
        }
        Ok(out)
    }

    fn application(&self, node: Node<'a, 'i>) -> Result<Application, ParseError> {
        let mut views = Vec::new();
        for v in self.wrapper(node, "Views")? {
            self.expect(v, "View")?;
            views.push(self.view(v)?);
        }
        Ok(Application {
            name: self.required(node, "name")?,
            package: node.attribute("package").unwrap_or("").to_string(),
            views,
            extra: Self::extra(node, &["name", "package"]),
        })
    }

    fn view(&self, node: Node<'a, 'i>) -> Result<View, ParseError> {
        let mut machines = Vec::new();
        for m in self.wrapper(node, "StateMachines")? {
            self.expect(m, "StateMachine")?;
            machines.push(self.state_machine(m)?);
        }
        Ok(View {
            name: self.required(node, "name")?,
            controls_file: node.attribute("controlsFile").map(str::to_string),
            state_machines: machines,
            extra: Self::extra(node, &["name", "controlsFile"]),
        })
    }

    fn state_machine(&self, node: Node<'a, 'i>) -> Result<StateMachineDecl, ParseError> {
        let mut states = Vec::new();
        let mut transitions = Vec::new();
        for section in self.elements(node)? {
            match section.tag_name().name() {
                "States" => {
                    for s in self.elements(section)? {
                        self.expect(s, "State")?;
                        states.push(StateDecl {
                            name: self.required(s, "name")?,
                            extra: Self::extra(s, &["name"]),
                        });
                    }
                }
                "Transitions" => {
                    for t in self.elements(section)? {
                        self.expect(t, "Transition")?;
                        transitions.push(self.transition(t)?);
                    }
                }
                other => {
                    return Err(ParseError::schema(
                        line_of(self.doc, section),
                        format!("unexpected <{other}> in <StateMachine>"),
                    ))
                }
            }
        }
        Ok(StateMachineDecl {
            name: self.required(node, "name")?,
            states,
            transitions,
            extra: Self::extra(node, &["name"]),
        })
    }

    fn transition(&self, node: Node) -> Result<TransitionDecl, ParseError> {
        let line = line_of(self.doc, node);
        let kind_of_transition = match self.required(node, "type")?.as_str() {
            "Simple" => TransitionType::Simple,
            "View" => TransitionType::View,
            "StateMachine" => TransitionType::StateMachine,
            other => return Err(ParseError::schema(line, format!("unknown transition type `{other}`"))),
        };
        let through = node.attribute("through").map(str::to_string);
        match (kind_of_transition, &through) {
            (TransitionType::Simple, Some(_)) => {
                return Err(ParseError::schema(line, "a Simple transition cannot have `through`"))
            }
            (TransitionType::View | TransitionType::StateMachine, None) => {
                return Err(ParseError::schema(line, "a call transition needs `through`"))
            }
            _ => {}
        }
        let kind = match node.attribute("kind") {
            None => None,
            Some("user") => Some(EventKind::User),
            Some("system") => Some(EventKind::System),
            Some(other) => return Err(ParseError::schema(line, format!("unknown event kind `{other}`"))),
        };
        Ok(TransitionDecl {
            id: self.required(node, "ID")?,
            event: self.required(node, "event")?,
            prev: self.required(node, "prev")?,
            next: self.required(node, "next")?,
            through,
            kind_of_transition,
            kind,
            channel: node.attribute("channel").map(str::to_string),
            reuse: self.bool_attr(node, "reuse")?,
            auto_return: self.bool_attr(node, "autoReturn")?,
            control: node.attribute("control").map(str::to_string),
            action: node.attribute("action").map(str::to_string),
            extra: Self::extra(node, TRANSITION_ATTRS),
        })
    }
}

const TRANSITION_ATTRS: &[&str] = &[
    "ID",
    "event",
    "prev",
    "next",
    "through",
    "type",
    "kind",
    "channel",
    "reuse",
    "autoReturn",
    "control",
    "action",
];

/// Parses the XML dialect and checks names referenced across elements.
pub fn parse_model(text: &str) -> Result<ModelDocument, ParseError> {
    let doc = Document::parse(text).map_err(|e| ParseError::schema(e.pos().row, e.to_string()))?;
    let r = Reader { doc: &doc };
    let root = doc.root_element();
    let mut model = ModelDocument::default();
    match root.tag_name().name() {
        "Application" => model.applications.push(r.application(root)?),
        "Model" => {
            for child in r.elements(root)? {
                match child.tag_name().name() {
                    "Application" => model.applications.push(r.application(child)?),
                    "Devices" => {
                        for d in r.elements(child)? {
                            r.expect(d, "Device")?;
                            model.devices.push(DeviceDecl {
                                id: r.required(d, "id")?,
                                applications: split_list(&r.required(d, "applications")?),
                                extra: Reader::extra(d, &["id", "applications"]),
                            });
                        }
                    }
                    "Channels" => {
                        for c in r.elements(child)? {
                            r.expect(c, "Channel")?;
                            model.channels.push(ChannelDecl {
                                name: r.required(c, "name")?,
                                sender: r.required(c, "sender")?,
                                receiver: r.required(c, "receiver")?,
                                extra: Reader::extra(c, &["name", "sender", "receiver"]),
                            });
                        }
                    }
                    other => {
                        return Err(ParseError::schema(
                            line_of(&doc, child),
                            format!("unexpected <{other}> in <Model>"),
                        ))
                    }
                }
            }
        }
        other => {
            return Err(ParseError::schema(
                line_of(&doc, root),
                format!("root element must be <Model> or <Application>, found <{other}>"),
            ))
        }
    }
    check_references(&model, |index| {
        doc.descendants()
            .filter(|n| n.has_tag_name("Transition"))
            .nth(index)
            .map_or(0, |n| line_of(&doc, n))
    })?;
    Ok(model)
}

/// Parses the JSON mirror of the dialect.
pub fn parse_model_json(text: &str) -> Result<ModelDocument, ParseError> {
    let model: ModelDocument = serde_json::from_str(text)?;
    check_references(&model, |_| 0)?;
    Ok(model)
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Checks state, view, machine, device and channel references, and ID
/// uniqueness within each view. `line_of` maps a transition's document
/// index to its line.
fn check_references(model: &ModelDocument, line_of: impl Fn(usize) -> u32) -> Result<(), ParseError> {
    let dangling = |line, what, name: &str| ParseError::DanglingReference {
        line,
        what,
        name: name.to_string(),
    };
    let channels: BTreeSet<&str> = model.channels.iter().map(|c| c.name.as_str()).collect();
    let mut index = 0;
    for app in &model.applications {
        for view in &app.views {
            let mut ids = BTreeSet::new();
            for m in &view.state_machines {
                let states: BTreeSet<&str> = m.states.iter().map(|s| s.name.as_str()).collect();
                for t in &m.transitions {
                    let line = line_of(index);
                    index += 1;
                    if !ids.insert(t.id.as_str()) {
                        return Err(ParseError::schema(
                            line,
                            format!("transition ID `{}` is not unique in view `{}`", t.id, view.name),
                        ));
                    }
                    for s in [&t.prev, &t.next] {
                        if !s.is_empty() && !states.contains(s.as_str()) {
                            return Err(dangling(line, "state", s));
                        }
                    }
                    if let Some(through) = &t.through {
                        let found = match t.kind_of_transition {
                            TransitionType::View => model.view(through).is_some(),
                            TransitionType::StateMachine => model.state_machine(through).is_some(),
                            TransitionType::Simple => true,
                        };
                        if !found {
                            let what = if t.kind_of_transition == TransitionType::View {
                                "view"
                            } else {
                                "state machine"
                            };
                            return Err(dangling(line, what, through));
                        }
                    }
                    if let Some(c) = &t.channel {
                        if !channels.contains(c.as_str()) {
                            return Err(dangling(line, "channel", c));
                        }
                    }
                }
            }
        }
    }
    let devices: BTreeSet<&str> = model.devices.iter().map(|d| d.id.as_str()).collect();
    for d in &model.devices {
        for a in &d.applications {
            if !model.applications.iter().any(|app| &app.name == a) {
                return Err(dangling(0, "application", a));
            }
        }
    }
    for c in &model.channels {
        for d in [&c.sender, &c.receiver] {
            if !devices.contains(d.as_str()) {
                return Err(dangling(0, "device", d));
            }
        }
    }
    Ok(())
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn attrs(out: &mut String, pairs: &[(&str, &str)], extra: &Attrs) {
    for (k, v) in pairs {
        let _ = write!(out, " {k}=\"{}\"", escape(v));
    }
    for (k, v) in extra {
        let _ = write!(out, " {k}=\"{}\"", escape(v));
    }
}

/// Writes the canonical XML form: `<Model>` root, two-space indentation,
/// known attributes in schema order followed by preserved ones.
pub fn serialize_model(model: &ModelDocument) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<Model>\n");
    if !model.devices.is_empty() {
        out.push_str("  <Devices>\n");
        for d in &model.devices {
            out.push_str("    <Device");
            attrs(
                &mut out,
                &[("id", &d.id), ("applications", &d.applications.join(","))],
                &d.extra,
            );
            out.push_str("/>\n");
        }
        out.push_str("  </Devices>\n");
    }
    if !model.channels.is_empty() {
        out.push_str("  <Channels>\n");
        for c in &model.channels {
            out.push_str("    <Channel");
            attrs(
                &mut out,
                &[("name", &c.name), ("sender", &c.sender), ("receiver", &c.receiver)],
                &c.extra,
            );
            out.push_str("/>\n");
        }
        out.push_str("  </Channels>\n");
    }
    for app in &model.applications {
        out.push_str("  <Application");
        attrs(&mut out, &[("name", &app.name), ("package", &app.package)], &app.extra);
        out.push_str(">\n    <Views>\n");
        for view in &app.views {
            out.push_str("      <View");
            let mut known = vec![("name", view.name.as_str())];
            if let Some(c) = &view.controls_file {
                known.push(("controlsFile", c));
            }
            attrs(&mut out, &known, &view.extra);
            out.push_str(">\n        <StateMachines>\n");
            for m in &view.state_machines {
                write_machine(&mut out, m);
            }
            out.push_str("        </StateMachines>\n      </View>\n");
        }
        out.push_str("    </Views>\n  </Application>\n");
    }
    out.push_str("</Model>\n");
    out
}

fn write_machine(out: &mut String, m: &StateMachineDecl) {
    out.push_str("          <StateMachine");
    attrs(out, &[("name", &m.name)], &m.extra);
    out.push_str(">\n");
    if m.states.is_empty() {
        out.push_str("            <States/>\n");
    } else {
        out.push_str("            <States>\n");
        for s in &m.states {
            out.push_str("              <State");
            attrs(out, &[("name", &s.name)], &s.extra);
            out.push_str("/>\n");
        }
        out.push_str("            </States>\n");
    }
    if m.transitions.is_empty() {
        out.push_str("            <Transitions/>\n");
    } else {
        out.push_str("            <Transitions>\n");
        for t in &m.transitions {
            out.push_str("              <Transition");
            let mut known: Vec<(&str, String)> = vec![
                ("ID", t.id.clone()),
                ("event", t.event.clone()),
                ("prev", t.prev.clone()),
                ("next", t.next.clone()),
            ];
            if let Some(th) = &t.through {
                known.push(("through", th.clone()));
            }
            known.push(("type", t.kind_of_transition.as_str().to_string()));
            if let Some(k) = t.kind {
                known.push(("kind", k.to_string()));
            }
            if let Some(c) = &t.channel {
                known.push(("channel", c.clone()));
            }
            if let Some(r) = t.reuse {
                known.push(("reuse", r.to_string()));
            }
            if let Some(a) = t.auto_return {
                known.push(("autoReturn", a.to_string()));
            }
            if let Some(c) = &t.control {
                known.push(("control", c.clone()));
            }
            if let Some(a) = &t.action {
                known.push(("action", a.clone()));
            }
            let pairs: Vec<(&str, &str)> = known.iter().map(|(k, v)| (*k, v.as_str())).collect();
            attrs(out, &pairs, &t.extra);
            out.push_str("/>\n");
        }
        out.push_str("            </Transitions>\n");
    }
    out.push_str("          </StateMachine>\n");
}
