//! In-memory metamodel for data-aware process diagrams.
//!
//! A [`Diagram`] is built once from [`DiagramParts`] and is immutable
//! afterwards. Construction rejects duplicate identifiers, dangling
//! references and structural shape errors; the well-formedness rules that
//! have a catalog entry (optional outputs, ER structure, scoping, message
//! flows within a pool, ...) are left to [`crate::validator`] so that
//! ill-formed models can still be loaded and diagnosed.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use crate::expr::Expr;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("duplicate identifier `{0}`")]
    DuplicateId(String),
    #[error("invalid identifier `{0}`")]
    InvalidId(String),
    #[error("{element}: reference to unknown {expected} `{reference}`")]
    DanglingReference {
        element: String,
        reference: String,
        expected: &'static str,
    },
    #[error("{element}: {message}")]
    Shape { element: String, message: String },
    #[error("unknown {kind} `{id}`")]
    NotFound { kind: &'static str, id: String },
}

impl ModelError {
    /// Identifier of the element the error is about.
    pub fn element(&self) -> &str {
        match self {
            ModelError::DuplicateId(id) | ModelError::InvalidId(id) => id,
            ModelError::DanglingReference { element, .. } | ModelError::Shape { element, .. } => {
                element
            }
            ModelError::NotFound { id, .. } => id,
        }
    }
}

/// `[A-Za-z_][A-Za-z0-9_-]*`. Dots are reserved for qualified paths.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

/// A dot-qualified variable path with non-empty segments.
pub fn is_variable_path(s: &str) -> bool {
    !s.is_empty()
        && s.split('.').all(|seg| {
            let mut chars = seg.chars();
            matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
                && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeKind {
    Task,
    SubProcess,
    GatewayExclusiveData,
    GatewayParallel,
    StartEventNone,
    StartEventMessage,
    EndEvent,
    IntermediateMessage,
}

impl NodeKind {
    pub const ALL: [NodeKind; 8] = [
        NodeKind::Task,
        NodeKind::SubProcess,
        NodeKind::GatewayExclusiveData,
        NodeKind::GatewayParallel,
        NodeKind::StartEventNone,
        NodeKind::StartEventMessage,
        NodeKind::EndEvent,
        NodeKind::IntermediateMessage,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Task => "task",
            NodeKind::SubProcess => "sub_process",
            NodeKind::GatewayExclusiveData => "gateway_exclusive_data",
            NodeKind::GatewayParallel => "gateway_parallel",
            NodeKind::StartEventNone => "start_event_none",
            NodeKind::StartEventMessage => "start_event_message",
            NodeKind::EndEvent => "end_event",
            NodeKind::IntermediateMessage => "intermediate_message",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    pub fn is_start(self) -> bool {
        matches!(self, NodeKind::StartEventNone | NodeKind::StartEventMessage)
    }

    pub fn is_gateway(self) -> bool {
        matches!(
            self,
            NodeKind::GatewayExclusiveData | NodeKind::GatewayParallel
        )
    }

    pub fn is_event(self) -> bool {
        matches!(
            self,
            NodeKind::StartEventNone
                | NodeKind::StartEventMessage
                | NodeKind::EndEvent
                | NodeKind::IntermediateMessage
        )
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub name: String,
    pub kind: NodeKind,
    /// Nested nodes; sub-processes only.
    pub children: Vec<Node>,
    /// Stores declared at this sub-process level.
    pub local_stores: Vec<String>,
    /// Decision expression carried by a data-based exclusive gateway.
    /// Branch selection uses the guards on its outgoing flows.
    pub condition: Option<Expr>,
    /// Multi-instance marker; tasks only.
    pub multi_instance: bool,
}

impl Node {
    pub fn new(id: impl Into<String>, name: impl Into<String>, kind: NodeKind) -> Self {
        Node {
            id: id.into(),
            name: name.into(),
            kind,
            children: Vec::new(),
            local_stores: Vec::new(),
            condition: None,
            multi_instance: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pool {
    pub id: String,
    pub name: String,
    /// Black-box participant: no nodes, only a message-flow endpoint.
    pub external: bool,
    pub nodes: Vec<Node>,
    pub sequence_flows: Vec<SequenceFlow>,
    pub explicit_data_flows: Vec<ExplicitDataFlow>,
}

impl Pool {
    pub fn new(id: impl Into<String>, name: impl Into<String>) -> Self {
        Pool {
            id: id.into(),
            name: name.into(),
            external: false,
            nodes: Vec::new(),
            sequence_flows: Vec::new(),
            explicit_data_flows: Vec::new(),
        }
    }

    pub fn external(id: impl Into<String>, name: impl Into<String>) -> Self {
        Pool {
            external: true,
            ..Pool::new(id, name)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceFlow {
    pub id: String,
    pub source: String,
    pub target: String,
    pub attachments: Vec<ObjectAttachment>,
    /// Branch predicate on flows leaving a data-based exclusive gateway.
    pub guard: Option<Expr>,
}

impl SequenceFlow {
    pub fn new(
        id: impl Into<String>,
        source: impl Into<String>,
        target: impl Into<String>,
    ) -> Self {
        SequenceFlow {
            id: id.into(),
            source: source.into(),
            target: target.into(),
            attachments: Vec::new(),
            guard: None,
        }
    }
}

/// A flow between pools. Endpoints are node ids or, for black-box
/// participants, pool ids.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageFlow {
    pub id: String,
    pub source: String,
    pub target: String,
    pub attachments: Vec<ObjectAttachment>,
}

impl MessageFlow {
    pub fn new(
        id: impl Into<String>,
        source: impl Into<String>,
        target: impl Into<String>,
    ) -> Self {
        MessageFlow {
            id: id.into(),
            source: source.into(),
            target: target.into(),
            attachments: Vec::new(),
        }
    }
}

/// Dashed data connector. At most one endpoint is a store.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitDataFlow {
    pub id: String,
    pub source: String,
    pub target: String,
    pub object: String,
    pub optional: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Input,
    Output,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Input => "input",
            Direction::Output => "output",
        }
    }
}

/// An object drawn on a flow.
///
/// On a sequence flow an `output` attachment is produced by the flow's
/// source node and an `input` attachment is consumed by its target node. On
/// a message flow `output` means sent by the source, `input` means received
/// by the target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectAttachment {
    pub object: String,
    pub direction: Direction,
    pub optional: bool,
}

impl ObjectAttachment {
    pub fn input(object: impl Into<String>) -> Self {
        ObjectAttachment {
            object: object.into(),
            direction: Direction::Input,
            optional: false,
        }
    }

    pub fn optional_input(object: impl Into<String>) -> Self {
        ObjectAttachment {
            optional: true,
            ..Self::input(object)
        }
    }

    pub fn output(object: impl Into<String>) -> Self {
        ObjectAttachment {
            object: object.into(),
            direction: Direction::Output,
            optional: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stereotype {
    Generic,
    Document,
    Product,
    Message,
    Custom(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Physicality {
    Digital,
    Physical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarType {
    String,
    Number,
    Boolean,
    Record,
}

impl VarType {
    pub fn as_str(self) -> &'static str {
        match self {
            VarType::String => "string",
            VarType::Number => "number",
            VarType::Boolean => "boolean",
            VarType::Record => "record",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "string" => Some(VarType::String),
            "number" => Some(VarType::Number),
            "boolean" => Some(VarType::Boolean),
            "record" => Some(VarType::Record),
            _ => None,
        }
    }

    pub fn is_scalar(self) -> bool {
        self != VarType::Record
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub vtype: VarType,
    /// May be left unbound when the object enters the diagram from outside.
    pub optional: bool,
}

impl Variable {
    pub fn new(name: impl Into<String>, vtype: VarType) -> Self {
        Variable {
            name: name.into(),
            vtype,
            optional: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataObject {
    pub id: String,
    pub name: String,
    pub stereotype: Stereotype,
    pub physicality: Physicality,
    pub variables: Vec<Variable>,
    pub url: Option<String>,
    /// Inert BPMN 1.2 state label.
    pub state: Option<String>,
    pub origin_store: Option<String>,
    /// Message definition this object corresponds to when exported; the
    /// object id is used when absent.
    pub message_type: Option<String>,
}

impl DataObject {
    pub fn new(id: impl Into<String>, name: impl Into<String>) -> Self {
        DataObject {
            id: id.into(),
            name: name.into(),
            stereotype: Stereotype::Generic,
            physicality: Physicality::Digital,
            variables: Vec::new(),
            url: None,
            state: None,
            origin_store: None,
            message_type: None,
        }
    }

    pub fn with_vars(mut self, vars: &[(&str, VarType)]) -> Self {
        self.variables
            .extend(vars.iter().map(|(n, t)| Variable::new(*n, *t)));
        self
    }

    pub fn variable(&self, name: &str) -> Option<&Variable> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn message_type(&self) -> &str {
        self.message_type.as_deref().unwrap_or(&self.id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StoreIcon {
    Database,
    Warehouse,
    Folder,
    Custom(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StoreScope {
    Diagram,
    SubProcess(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entity {
    pub name: String,
    pub fields: Vec<Variable>,
}

impl Entity {
    pub fn new(name: impl Into<String>, fields: &[(&str, VarType)]) -> Self {
        Entity {
            name: name.into(),
            fields: fields.iter().map(|(n, t)| Variable::new(*n, *t)).collect(),
        }
    }

    pub fn field(&self, name: &str) -> Option<&Variable> {
        self.fields.iter().find(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relationship {
    pub name: String,
    pub left: String,
    pub right: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generalization {
    pub parent: String,
    pub child: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataStore {
    pub id: String,
    pub name: String,
    pub icon: StoreIcon,
    pub entities: Vec<Entity>,
    pub relationships: Vec<Relationship>,
    pub generalizations: Vec<Generalization>,
    pub scope: StoreScope,
    pub collapsed: bool,
}

impl DataStore {
    pub fn new(id: impl Into<String>, name: impl Into<String>) -> Self {
        DataStore {
            id: id.into(),
            name: name.into(),
            icon: StoreIcon::Database,
            entities: Vec::new(),
            relationships: Vec::new(),
            generalizations: Vec::new(),
            scope: StoreScope::Diagram,
            collapsed: false,
        }
    }

    pub fn entity(&self, name: &str) -> Option<&Entity> {
        self.entities.iter().find(|e| e.name == name)
    }

    /// Resolves `Entity.field` (field may itself be dotted).
    pub fn field(&self, qualified: &str) -> Option<&Variable> {
        let (entity, field) = qualified.split_once('.')?;
        self.entity(entity)?.field(field)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CopyRule {
    pub from: Expr,
    /// Object-qualified path in the mapping's target object.
    pub to: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataMapping {
    pub id: String,
    pub source_object: String,
    pub target_object: String,
    pub rules: Vec<CopyRule>,
}

/// Plain, mutable description of a diagram.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiagramParts {
    pub id: Option<String>,
    pub pools: Vec<Pool>,
    pub stores: Vec<DataStore>,
    pub objects: Vec<DataObject>,
    pub mappings: Vec<DataMapping>,
    pub message_flows: Vec<MessageFlow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    Pool,
    Node,
    SequenceFlow,
    MessageFlow,
    DataFlow,
    Store,
    Object,
    Mapping,
}

impl ElementKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ElementKind::Pool => "pool",
            ElementKind::Node => "node",
            ElementKind::SequenceFlow => "sequence flow",
            ElementKind::MessageFlow => "message flow",
            ElementKind::DataFlow => "data flow",
            ElementKind::Store => "store",
            ElementKind::Object => "object",
            ElementKind::Mapping => "mapping",
        }
    }
}

#[derive(Debug, Clone)]
struct NodeSlot {
    pool: usize,
    path: Vec<usize>,
    parent: Option<String>,
}

#[derive(Debug, Clone, Default)]
struct Index {
    kinds: HashMap<String, ElementKind>,
    nodes: HashMap<String, NodeSlot>,
    node_ids: Vec<String>,
    pools: HashMap<String, usize>,
    seq_flows: HashMap<String, (usize, usize)>,
    data_flows: HashMap<String, (usize, usize)>,
    message_flows: HashMap<String, usize>,
    stores: HashMap<String, usize>,
    objects: HashMap<String, usize>,
    mappings: HashMap<String, usize>,
    seq_in: HashMap<String, Vec<String>>,
    seq_out: HashMap<String, Vec<String>>,
    msg_in: HashMap<String, Vec<String>>,
    msg_out: HashMap<String, Vec<String>>,
    data_in: HashMap<String, Vec<String>>,
    data_out: HashMap<String, Vec<String>>,
}

/// Channel through which an object reaches or leaves a node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Via {
    Sequence(String),
    Message(String),
    DataFlow(String),
}

impl Via {
    pub fn flow(&self) -> &str {
        match self {
            Via::Sequence(f) | Via::Message(f) | Via::DataFlow(f) => f,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeInput {
    pub object: String,
    pub optional: bool,
    pub via: Via,
    /// Store the object is extracted from, for store-to-node data flows.
    pub store: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeOutput {
    pub object: String,
    pub via: Via,
    /// Store the object is inserted into, for node-to-store data flows.
    pub store: Option<String>,
}

/// One way a data object comes into existence in the diagram.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObjectSource {
    StoreExtraction {
        store: String,
        node: String,
        flow: String,
    },
    ActivityOutput {
        node: String,
        flow: String,
    },
    DataFlowOutput {
        node: String,
        flow: String,
    },
    MessageReceipt {
        receiver: String,
        flow: String,
    },
    MessageStart {
        node: String,
        flow: String,
    },
    MappingResult {
        mapping: String,
    },
}

impl ObjectSource {
    /// The flow carrying an attachment-derived record.
    pub fn flow(&self) -> Option<&str> {
        match self {
            ObjectSource::StoreExtraction { flow, .. }
            | ObjectSource::ActivityOutput { flow, .. }
            | ObjectSource::DataFlowOutput { flow, .. }
            | ObjectSource::MessageReceipt { flow, .. }
            | ObjectSource::MessageStart { flow, .. } => Some(flow),
            ObjectSource::MappingResult { .. } => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ObjectSource::StoreExtraction { .. } => "store extraction",
            ObjectSource::ActivityOutput { .. } => "activity output",
            ObjectSource::DataFlowOutput { .. } => "data flow output",
            ObjectSource::MessageReceipt { .. } => "message receipt",
            ObjectSource::MessageStart { .. } => "message start event",
            ObjectSource::MappingResult { .. } => "data mapping",
        }
    }
}

/// One way a data object is consumed in the diagram.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObjectTarget {
    StoreInsertion {
        store: String,
        node: String,
        flow: String,
    },
    ActivityInput {
        node: String,
        flow: String,
        optional: bool,
    },
    DataFlowInput {
        node: String,
        flow: String,
        optional: bool,
    },
    MessageSend {
        sender: String,
        flow: String,
    },
    MappingInput {
        mapping: String,
    },
}

impl ObjectTarget {
    pub fn flow(&self) -> Option<&str> {
        match self {
            ObjectTarget::StoreInsertion { flow, .. }
            | ObjectTarget::ActivityInput { flow, .. }
            | ObjectTarget::DataFlowInput { flow, .. }
            | ObjectTarget::MessageSend { flow, .. } => Some(flow),
            ObjectTarget::MappingInput { .. } => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ObjectTarget::StoreInsertion { .. } => "store insertion",
            ObjectTarget::ActivityInput { .. } => "activity input",
            ObjectTarget::DataFlowInput { .. } => "data flow input",
            ObjectTarget::MessageSend { .. } => "message send",
            ObjectTarget::MappingInput { .. } => "data mapping",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AccessKind {
    Read,
    Write,
}

/// A node reading from or writing to a store through an explicit data flow.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StoreAccess {
    pub store: String,
    pub node: String,
    pub flow: String,
    pub object: String,
    pub kind: AccessKind,
}

/// Immutable, indexed diagram.
#[derive(Debug, Clone)]
pub struct Diagram {
    parts: DiagramParts,
    index: Index,
}

impl PartialEq for Diagram {
    fn eq(&self, other: &Self) -> bool {
        self.parts == other.parts
    }
}

impl Diagram {
    pub fn empty() -> Self {
        Diagram::from_parts(DiagramParts::default()).expect("empty diagram is well formed")
    }

    pub fn from_parts(parts: DiagramParts) -> Result<Self, ModelError> {
        let index = build_index(&parts)?;
        let diagram = Diagram { parts, index };
        diagram.check_references()?;
        diagram.check_shape()?;
        Ok(diagram)
    }

    pub fn parts(&self) -> &DiagramParts {
        &self.parts
    }

    pub fn into_parts(self) -> DiagramParts {
        self.parts
    }

    pub fn id(&self) -> Option<&str> {
        self.parts.id.as_deref()
    }

    pub fn pools(&self) -> &[Pool] {
        &self.parts.pools
    }

    pub fn stores(&self) -> &[DataStore] {
        &self.parts.stores
    }

    pub fn objects(&self) -> &[DataObject] {
        &self.parts.objects
    }

    pub fn mappings(&self) -> &[DataMapping] {
        &self.parts.mappings
    }

    pub fn message_flows(&self) -> &[MessageFlow] {
        &self.parts.message_flows
    }

    pub fn is_empty(&self) -> bool {
        self.index.kinds.is_empty()
    }

    pub fn element_kind(&self, id: &str) -> Option<ElementKind> {
        self.index.kinds.get(id).copied()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.kinds.contains_key(id)
    }

    /// Every element id in the diagram, sorted.
    pub fn element_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.index.kinds.keys().map(String::as_str).collect();
        ids.sort_unstable();
        ids
    }

    pub fn pool(&self, id: &str) -> Option<&Pool> {
        self.index.pools.get(id).map(|&i| &self.parts.pools[i])
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        let slot = self.index.nodes.get(id)?;
        let pool = &self.parts.pools[slot.pool];
        let (first, rest) = slot.path.split_first()?;
        let mut node = &pool.nodes[*first];
        for &i in rest {
            node = &node.children[i];
        }
        Some(node)
    }

    pub fn store(&self, id: &str) -> Option<&DataStore> {
        self.index.stores.get(id).map(|&i| &self.parts.stores[i])
    }

    pub fn object(&self, id: &str) -> Option<&DataObject> {
        self.index.objects.get(id).map(|&i| &self.parts.objects[i])
    }

    pub fn mapping(&self, id: &str) -> Option<&DataMapping> {
        self.index
            .mappings
            .get(id)
            .map(|&i| &self.parts.mappings[i])
    }

    pub fn sequence_flow(&self, id: &str) -> Option<&SequenceFlow> {
        self.index
            .seq_flows
            .get(id)
            .map(|&(p, f)| &self.parts.pools[p].sequence_flows[f])
    }

    pub fn message_flow(&self, id: &str) -> Option<&MessageFlow> {
        self.index
            .message_flows
            .get(id)
            .map(|&i| &self.parts.message_flows[i])
    }

    pub fn data_flow(&self, id: &str) -> Option<&ExplicitDataFlow> {
        self.index
            .data_flows
            .get(id)
            .map(|&(p, f)| &self.parts.pools[p].explicit_data_flows[f])
    }

    /// All node ids in the diagram (any depth), sorted.
    pub fn node_ids(&self) -> &[String] {
        &self.index.node_ids
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.index.node_ids.iter().filter_map(|id| self.node(id))
    }

    pub fn sequence_flows(&self) -> impl Iterator<Item = &SequenceFlow> {
        self.parts
            .pools
            .iter()
            .flat_map(|p| p.sequence_flows.iter())
    }

    pub fn data_flows(&self) -> impl Iterator<Item = &ExplicitDataFlow> {
        self.parts
            .pools
            .iter()
            .flat_map(|p| p.explicit_data_flows.iter())
    }

    /// Pool that owns a node, or the pool itself for a pool id.
    pub fn pool_of(&self, id: &str) -> Option<&Pool> {
        if let Some(pool) = self.pool(id) {
            return Some(pool);
        }
        self.index
            .nodes
            .get(id)
            .map(|slot| &self.parts.pools[slot.pool])
    }

    /// Enclosing sub-process of a node.
    pub fn parent_of(&self, node: &str) -> Option<&str> {
        self.index.nodes.get(node)?.parent.as_deref()
    }

    /// Every node nested inside `node` (not including it).
    pub fn descendants(&self, node: &str) -> Vec<&str> {
        let mut out = Vec::new();
        if let Some(n) = self.node(node) {
            let mut stack: Vec<&Node> = n.children.iter().collect();
            while let Some(c) = stack.pop() {
                out.push(c.id.as_str());
                stack.extend(c.children.iter());
            }
        }
        out.sort_unstable();
        out
    }

    /// True when `node` is `ancestor` or nested (at any depth) inside it.
    pub fn is_within(&self, node: &str, ancestor: &str) -> bool {
        let mut cur = Some(node);
        while let Some(n) = cur {
            if n == ancestor {
                return true;
            }
            cur = self.parent_of(n);
        }
        false
    }

    pub fn incoming(&self, node: &str) -> Vec<&SequenceFlow> {
        self.flows_by_ids(self.index.seq_in.get(node))
    }

    pub fn outgoing(&self, node: &str) -> Vec<&SequenceFlow> {
        self.flows_by_ids(self.index.seq_out.get(node))
    }

    fn flows_by_ids(&self, ids: Option<&Vec<String>>) -> Vec<&SequenceFlow> {
        ids.map(|ids| ids.iter().filter_map(|f| self.sequence_flow(f)).collect())
            .unwrap_or_default()
    }

    pub fn incoming_messages(&self, endpoint: &str) -> Vec<&MessageFlow> {
        self.messages_by_ids(self.index.msg_in.get(endpoint))
    }

    pub fn outgoing_messages(&self, endpoint: &str) -> Vec<&MessageFlow> {
        self.messages_by_ids(self.index.msg_out.get(endpoint))
    }

    fn messages_by_ids(&self, ids: Option<&Vec<String>>) -> Vec<&MessageFlow> {
        ids.map(|ids| ids.iter().filter_map(|f| self.message_flow(f)).collect())
            .unwrap_or_default()
    }

    pub fn incoming_data(&self, endpoint: &str) -> Vec<&ExplicitDataFlow> {
        self.data_by_ids(self.index.data_in.get(endpoint))
    }

    pub fn outgoing_data(&self, endpoint: &str) -> Vec<&ExplicitDataFlow> {
        self.data_by_ids(self.index.data_out.get(endpoint))
    }

    fn data_by_ids(&self, ids: Option<&Vec<String>>) -> Vec<&ExplicitDataFlow> {
        ids.map(|ids| ids.iter().filter_map(|f| self.data_flow(f)).collect())
            .unwrap_or_default()
    }

    /// True for a message-flow endpoint that belongs to a black-box pool.
    pub fn is_external(&self, endpoint: &str) -> bool {
        self.pool_of(endpoint).is_some_and(|p| p.external)
    }

    /// Objects a node consumes, sorted by object then channel.
    pub fn inputs_of(&self, node: &str) -> Vec<NodeInput> {
        let mut out = Vec::new();
        for f in self.incoming(node) {
            for a in f
                .attachments
                .iter()
                .filter(|a| a.direction == Direction::Input)
            {
                out.push(NodeInput {
                    object: a.object.clone(),
                    optional: a.optional,
                    via: Via::Sequence(f.id.clone()),
                    store: None,
                });
            }
        }
        for m in self.incoming_messages(node) {
            for a in m
                .attachments
                .iter()
                .filter(|a| a.direction == Direction::Input)
            {
                out.push(NodeInput {
                    object: a.object.clone(),
                    optional: a.optional,
                    via: Via::Message(m.id.clone()),
                    store: None,
                });
            }
        }
        for d in self.incoming_data(node) {
            out.push(NodeInput {
                object: d.object.clone(),
                optional: d.optional,
                via: Via::DataFlow(d.id.clone()),
                store: self.store(&d.source).map(|s| s.id.clone()),
            });
        }
        out.sort();
        out
    }

    /// Objects a node produces, sorted by object then channel.
    pub fn outputs_of(&self, node: &str) -> Vec<NodeOutput> {
        let mut out = Vec::new();
        for f in self.outgoing(node) {
            for a in f
                .attachments
                .iter()
                .filter(|a| a.direction == Direction::Output)
            {
                out.push(NodeOutput {
                    object: a.object.clone(),
                    via: Via::Sequence(f.id.clone()),
                    store: None,
                });
            }
        }
        for m in self.outgoing_messages(node) {
            for a in m
                .attachments
                .iter()
                .filter(|a| a.direction == Direction::Output)
            {
                out.push(NodeOutput {
                    object: a.object.clone(),
                    via: Via::Message(m.id.clone()),
                    store: None,
                });
            }
        }
        for d in self.outgoing_data(node) {
            out.push(NodeOutput {
                object: d.object.clone(),
                via: Via::DataFlow(d.id.clone()),
                store: self.store(&d.target).map(|s| s.id.clone()),
            });
        }
        out.sort();
        out
    }

    /// Node ids permitted to read or write `store`.
    pub fn resolve_scope(&self, store: &str) -> Result<BTreeSet<String>, ModelError> {
        let s = self.store(store).ok_or_else(|| ModelError::NotFound {
            kind: "store",
            id: store.to_string(),
        })?;
        Ok(match &s.scope {
            StoreScope::Diagram => self.index.node_ids.iter().cloned().collect(),
            StoreScope::SubProcess(sp) => std::iter::once(sp.clone())
                .chain(self.descendants(sp).into_iter().map(str::to_string))
                .collect(),
        })
    }

    /// Every place `object` is produced.
    pub fn object_sources(&self, object: &str) -> Result<Vec<ObjectSource>, ModelError> {
        self.require_object(object)?;
        let mut out = Vec::new();
        for f in self.sequence_flows() {
            for a in &f.attachments {
                if a.object == object && a.direction == Direction::Output {
                    let starts_with_message = self
                        .node(&f.source)
                        .is_some_and(|n| n.kind == NodeKind::StartEventMessage);
                    out.push(if starts_with_message {
                        ObjectSource::MessageStart {
                            node: f.source.clone(),
                            flow: f.id.clone(),
                        }
                    } else {
                        ObjectSource::ActivityOutput {
                            node: f.source.clone(),
                            flow: f.id.clone(),
                        }
                    });
                }
            }
        }
        for m in self.message_flows() {
            for a in &m.attachments {
                if a.object == object && a.direction == Direction::Input {
                    let message_start = self
                        .node(&m.target)
                        .is_some_and(|n| n.kind == NodeKind::StartEventMessage);
                    out.push(if message_start {
                        ObjectSource::MessageStart {
                            node: m.target.clone(),
                            flow: m.id.clone(),
                        }
                    } else {
                        ObjectSource::MessageReceipt {
                            receiver: m.target.clone(),
                            flow: m.id.clone(),
                        }
                    });
                }
            }
        }
        for d in self.data_flows() {
            if d.object != object {
                continue;
            }
            if self.store(&d.source).is_some() {
                out.push(ObjectSource::StoreExtraction {
                    store: d.source.clone(),
                    node: d.target.clone(),
                    flow: d.id.clone(),
                });
            } else if self.store(&d.target).is_none() {
                out.push(ObjectSource::DataFlowOutput {
                    node: d.source.clone(),
                    flow: d.id.clone(),
                });
            }
        }
        for m in self.mappings() {
            if m.target_object == object {
                out.push(ObjectSource::MappingResult {
                    mapping: m.id.clone(),
                });
            }
        }
        out.sort();
        Ok(out)
    }

    /// Every place `object` is consumed.
    pub fn object_targets(&self, object: &str) -> Result<Vec<ObjectTarget>, ModelError> {
        self.require_object(object)?;
        let mut out = Vec::new();
        for f in self.sequence_flows() {
            for a in &f.attachments {
                if a.object == object && a.direction == Direction::Input {
                    out.push(ObjectTarget::ActivityInput {
                        node: f.target.clone(),
                        flow: f.id.clone(),
                        optional: a.optional,
                    });
                }
            }
        }
        for m in self.message_flows() {
            for a in &m.attachments {
                if a.object == object && a.direction == Direction::Output {
                    out.push(ObjectTarget::MessageSend {
                        sender: m.source.clone(),
                        flow: m.id.clone(),
                    });
                }
            }
        }
        for d in self.data_flows() {
            if d.object != object {
                continue;
            }
            if self.store(&d.target).is_some() {
                out.push(ObjectTarget::StoreInsertion {
                    store: d.target.clone(),
                    node: d.source.clone(),
                    flow: d.id.clone(),
                });
            } else if self.store(&d.source).is_none() {
                out.push(ObjectTarget::DataFlowInput {
                    node: d.target.clone(),
                    flow: d.id.clone(),
                    optional: d.optional,
                });
            }
        }
        for m in self.mappings() {
            if m.source_object == object {
                out.push(ObjectTarget::MappingInput {
                    mapping: m.id.clone(),
                });
            }
        }
        out.sort();
        Ok(out)
    }

    fn require_object(&self, object: &str) -> Result<&DataObject, ModelError> {
        self.object(object).ok_or_else(|| ModelError::NotFound {
            kind: "object",
            id: object.to_string(),
        })
    }

    /// Explicit data flows with one store endpoint, sorted.
    pub fn store_accesses(&self) -> Vec<StoreAccess> {
        let mut out = Vec::new();
        for d in self.data_flows() {
            if self.store(&d.source).is_some() {
                out.push(StoreAccess {
                    store: d.source.clone(),
                    node: d.target.clone(),
                    flow: d.id.clone(),
                    object: d.object.clone(),
                    kind: AccessKind::Read,
                });
            } else if self.store(&d.target).is_some() {
                out.push(StoreAccess {
                    store: d.target.clone(),
                    node: d.source.clone(),
                    flow: d.id.clone(),
                    object: d.object.clone(),
                    kind: AccessKind::Write,
                });
            }
        }
        out.sort();
        out
    }

    /// Elements reachable from `from` along sequence, message and data flows,
    /// entering sub-processes at their children and leaving them at the
    /// parent.
    pub fn reachable_from(&self, from: &str) -> BTreeSet<String> {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([from.to_string()]);
        while let Some(cur) = queue.pop_front() {
            let mut next: Vec<String> = Vec::new();
            next.extend(self.outgoing(&cur).iter().map(|f| f.target.clone()));
            next.extend(self.outgoing_data(&cur).iter().map(|f| f.target.clone()));
            for m in self.outgoing_messages(&cur) {
                if let Some(pool) = self.pool(&m.target) {
                    next.extend(pool.nodes.iter().map(|n| n.id.clone()));
                } else {
                    next.push(m.target.clone());
                }
            }
            if let Some(n) = self.node(&cur) {
                next.extend(n.children.iter().map(|c| c.id.clone()));
                if n.kind == NodeKind::EndEvent {
                    if let Some(parent) = self.parent_of(&cur) {
                        next.extend(self.outgoing(parent).iter().map(|f| f.target.clone()));
                    }
                }
            }
            for n in next {
                if seen.insert(n.clone()) {
                    queue.push_back(n);
                }
            }
        }
        seen
    }

    // -- construction checks -------------------------------------------------

    fn check_references(&self) -> Result<(), ModelError> {
        let dangling = |element: &str, reference: &str, expected: &'static str| {
            ModelError::DanglingReference {
                element: element.to_string(),
                reference: reference.to_string(),
                expected,
            }
        };
        let is_object = |id: &str| self.object(id).is_some();
        let check_attachments = |flow: &str, atts: &[ObjectAttachment]| {
            for a in atts {
                if !is_object(&a.object) {
                    return Err(dangling(flow, &a.object, "object"));
                }
            }
            Ok(())
        };
        for pool in &self.parts.pools {
            for f in &pool.sequence_flows {
                for end in [&f.source, &f.target] {
                    if self.node(end).is_none() {
                        return Err(dangling(&f.id, end, "node"));
                    }
                }
                check_attachments(&f.id, &f.attachments)?;
            }
            for d in &pool.explicit_data_flows {
                for end in [&d.source, &d.target] {
                    if self.node(end).is_none() && self.store(end).is_none() {
                        return Err(dangling(&d.id, end, "node or store"));
                    }
                }
                if !is_object(&d.object) {
                    return Err(dangling(&d.id, &d.object, "object"));
                }
            }
        }
        for n in self.nodes() {
            for s in &n.local_stores {
                if self.store(s).is_none() {
                    return Err(dangling(&n.id, s, "store"));
                }
            }
        }
        for m in &self.parts.message_flows {
            for end in [&m.source, &m.target] {
                if self.node(end).is_none() && self.pool(end).is_none() {
                    return Err(dangling(&m.id, end, "node or pool"));
                }
            }
            check_attachments(&m.id, &m.attachments)?;
        }
        for s in &self.parts.stores {
            if let StoreScope::SubProcess(sp) = &s.scope {
                if self.node(sp).is_none() {
                    return Err(dangling(&s.id, sp, "sub-process"));
                }
            }
        }
        for o in &self.parts.objects {
            if let Some(st) = &o.origin_store {
                if self.store(st).is_none() {
                    return Err(dangling(&o.id, st, "store"));
                }
            }
        }
        for m in &self.parts.mappings {
            for obj in [&m.source_object, &m.target_object] {
                if !is_object(obj) {
                    return Err(dangling(&m.id, obj, "object"));
                }
            }
        }
        Ok(())
    }

    fn check_shape(&self) -> Result<(), ModelError> {
        let shape = |element: &str, message: String| ModelError::Shape {
            element: element.to_string(),
            message,
        };
        for n in self.nodes() {
            if !n.children.is_empty() && n.kind != NodeKind::SubProcess {
                return Err(shape(&n.id, format!("{} cannot contain nodes", n.kind)));
            }
            if !n.local_stores.is_empty() && n.kind != NodeKind::SubProcess {
                return Err(shape(&n.id, format!("{} cannot declare stores", n.kind)));
            }
            if n.condition.is_some() && n.kind != NodeKind::GatewayExclusiveData {
                return Err(shape(
                    &n.id,
                    "only data-based exclusive gateways carry a condition".into(),
                ));
            }
            if n.multi_instance && n.kind != NodeKind::Task {
                return Err(shape(&n.id, "only tasks can be multi-instance".into()));
            }
        }
        for pool in &self.parts.pools {
            if pool.external && !pool.nodes.is_empty() {
                return Err(shape(
                    &pool.id,
                    "external pools cannot contain nodes".into(),
                ));
            }
            for f in &pool.sequence_flows {
                if f.source == f.target {
                    return Err(shape(&f.id, "sequence flow loops on a single node".into()));
                }
                for end in [&f.source, &f.target] {
                    if self.pool_of(end).map(|p| p.id.as_str()) != Some(pool.id.as_str()) {
                        return Err(shape(
                            &f.id,
                            format!("endpoint `{end}` is not in pool `{}`", pool.id),
                        ));
                    }
                }
                if self.parent_of(&f.source) != self.parent_of(&f.target) {
                    return Err(shape(
                        &f.id,
                        "sequence flow crosses a sub-process boundary".into(),
                    ));
                }
                if f.guard.is_some()
                    && self.node(&f.source).map(|n| n.kind) != Some(NodeKind::GatewayExclusiveData)
                {
                    return Err(shape(
                        &f.id,
                        "guards are only allowed on flows leaving a data-based gateway".into(),
                    ));
                }
                check_duplicate_attachments(&f.id, &f.attachments)?;
            }
            for d in &pool.explicit_data_flows {
                if self.store(&d.source).is_some() && self.store(&d.target).is_some() {
                    return Err(shape(&d.id, "data flow connects two stores".into()));
                }
                if d.source == d.target {
                    return Err(shape(&d.id, "data flow loops on a single node".into()));
                }
            }
        }
        for m in &self.parts.message_flows {
            if m.source == m.target {
                return Err(shape(
                    &m.id,
                    "message flow loops on a single element".into(),
                ));
            }
            check_duplicate_attachments(&m.id, &m.attachments)?;
        }
        for s in &self.parts.stores {
            if let StoreScope::SubProcess(sp) = &s.scope {
                if self.node(sp).map(|n| n.kind) != Some(NodeKind::SubProcess) {
                    return Err(shape(&s.id, format!("scope `{sp}` is not a sub-process")));
                }
            }
            for e in &s.entities {
                if !is_identifier(&e.name) || e.name.contains('-') {
                    return Err(shape(&s.id, format!("invalid entity name `{}`", e.name)));
                }
                for f in &e.fields {
                    if !is_variable_path(&f.name) {
                        return Err(shape(
                            &s.id,
                            format!("invalid field name `{}.{}`", e.name, f.name),
                        ));
                    }
                }
            }
        }
        for o in &self.parts.objects {
            for v in &o.variables {
                if !is_variable_path(&v.name) {
                    return Err(shape(&o.id, format!("invalid variable name `{}`", v.name)));
                }
            }
        }
        for m in &self.parts.mappings {
            for r in &m.rules {
                if !is_variable_path(&r.to) {
                    return Err(shape(&m.id, format!("invalid copy target `{}`", r.to)));
                }
            }
        }
        Ok(())
    }
}

fn check_duplicate_attachments(flow: &str, atts: &[ObjectAttachment]) -> Result<(), ModelError> {
    let mut seen = HashSet::new();
    for a in atts {
        if !seen.insert((a.object.as_str(), a.direction)) {
            return Err(ModelError::Shape {
                element: flow.to_string(),
                message: format!(
                    "object `{}` attached twice as {}",
                    a.object,
                    a.direction.as_str()
                ),
            });
        }
    }
    Ok(())
}

fn build_index(parts: &DiagramParts) -> Result<Index, ModelError> {
    let mut ix = Index::default();
    let mut claim = |ix: &mut Index, id: &str, kind: ElementKind| -> Result<(), ModelError> {
        if !is_identifier(id) {
            return Err(ModelError::InvalidId(id.to_string()));
        }
        if ix.kinds.insert(id.to_string(), kind).is_some() {
            return Err(ModelError::DuplicateId(id.to_string()));
        }
        Ok(())
    };

    fn walk(
        ix: &mut Index,
        claim: &mut dyn FnMut(&mut Index, &str, ElementKind) -> Result<(), ModelError>,
        pool: usize,
        nodes: &[Node],
        prefix: &[usize],
        parent: Option<&str>,
    ) -> Result<(), ModelError> {
        for (i, n) in nodes.iter().enumerate() {
            claim(ix, &n.id, ElementKind::Node)?;
            let mut path = prefix.to_vec();
            path.push(i);
            ix.nodes.insert(
                n.id.clone(),
                NodeSlot {
                    pool,
                    path: path.clone(),
                    parent: parent.map(str::to_string),
                },
            );
            walk(ix, claim, pool, &n.children, &path, Some(&n.id))?;
        }
        Ok(())
    }

    for (pi, pool) in parts.pools.iter().enumerate() {
        claim(&mut ix, &pool.id, ElementKind::Pool)?;
        ix.pools.insert(pool.id.clone(), pi);
        walk(&mut ix, &mut claim, pi, &pool.nodes, &[], None)?;
        for (fi, f) in pool.sequence_flows.iter().enumerate() {
            claim(&mut ix, &f.id, ElementKind::SequenceFlow)?;
            ix.seq_flows.insert(f.id.clone(), (pi, fi));
            ix.seq_out
                .entry(f.source.clone())
                .or_default()
                .push(f.id.clone());
            ix.seq_in
                .entry(f.target.clone())
                .or_default()
                .push(f.id.clone());
        }
        for (fi, d) in pool.explicit_data_flows.iter().enumerate() {
            claim(&mut ix, &d.id, ElementKind::DataFlow)?;
            ix.data_flows.insert(d.id.clone(), (pi, fi));
            ix.data_out
                .entry(d.source.clone())
                .or_default()
                .push(d.id.clone());
            ix.data_in
                .entry(d.target.clone())
                .or_default()
                .push(d.id.clone());
        }
    }
    for (i, s) in parts.stores.iter().enumerate() {
        claim(&mut ix, &s.id, ElementKind::Store)?;
        ix.stores.insert(s.id.clone(), i);
    }
    for (i, o) in parts.objects.iter().enumerate() {
        claim(&mut ix, &o.id, ElementKind::Object)?;
        ix.objects.insert(o.id.clone(), i);
    }
    for (i, m) in parts.mappings.iter().enumerate() {
        claim(&mut ix, &m.id, ElementKind::Mapping)?;
        ix.mappings.insert(m.id.clone(), i);
    }
    for (i, m) in parts.message_flows.iter().enumerate() {
        claim(&mut ix, &m.id, ElementKind::MessageFlow)?;
        ix.message_flows.insert(m.id.clone(), i);
        ix.msg_out
            .entry(m.source.clone())
            .or_default()
            .push(m.id.clone());
        ix.msg_in
            .entry(m.target.clone())
            .or_default()
            .push(m.id.clone());
    }
    for list in [
        &mut ix.seq_in,
        &mut ix.seq_out,
        &mut ix.msg_in,
        &mut ix.msg_out,
        &mut ix.data_in,
        &mut ix.data_out,
    ] {
        for v in list.values_mut() {
            v.sort();
        }
    }
    ix.node_ids = ix.nodes.keys().cloned().collect();
    ix.node_ids.sort();
    Ok(ix)
}
