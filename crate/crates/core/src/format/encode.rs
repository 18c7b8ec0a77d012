use serde::Serialize;

use crate::expr::Value;
use crate::model::*;
use crate::simulator::behavior::*;

fn is_false(b: &bool) -> bool {
    !*b
}

fn by_id<T: Clone>(items: &[T], id: impl Fn(&T) -> &str) -> Vec<T> {
    let mut v = items.to_vec();
    v.sort_by(|a, b| id(a).cmp(id(b)));
    v
}

#[derive(Serialize)]
pub(super) struct DocDto {
    bpdmn: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    pools: Vec<PoolDto>,
    stores: Vec<StoreDto>,
    objects: Vec<ObjectDto>,
    mappings: Vec<MappingDto>,
    message_flows: Vec<MessageFlowDto>,
    #[serde(skip_serializing_if = "Option::is_none")]
    behaviors: Option<BehaviorsDto>,
}

#[derive(Serialize)]
struct PoolDto {
    id: String,
    #[serde(skip_serializing_if = "String::is_empty")]
    name: String,
    #[serde(skip_serializing_if = "is_false")]
    external: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    nodes: Option<Vec<NodeDto>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sequence_flows: Option<Vec<SequenceFlowDto>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    explicit_data_flows: Option<Vec<DataFlowDto>>,
}

#[derive(Serialize)]
struct NodeDto {
    id: String,
    #[serde(skip_serializing_if = "String::is_empty")]
    name: String,
    kind: &'static str,
    #[serde(skip_serializing_if = "is_false")]
    multi_instance: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    condition: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    local_stores: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    children: Vec<NodeDto>,
}

#[derive(Serialize)]
struct AttachmentDto {
    object: String,
    direction: &'static str,
    #[serde(skip_serializing_if = "is_false")]
    optional: bool,
}

#[derive(Serialize)]
struct SequenceFlowDto {
    id: String,
    source: String,
    target: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    guard: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    attachments: Vec<AttachmentDto>,
}

#[derive(Serialize)]
struct MessageFlowDto {
    id: String,
    source: String,
    target: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    attachments: Vec<AttachmentDto>,
}

#[derive(Serialize)]
struct DataFlowDto {
    id: String,
    source: String,
    target: String,
    object: String,
    #[serde(skip_serializing_if = "is_false")]
    optional: bool,
}

#[derive(Serialize)]
struct VariableDto {
    name: String,
    #[serde(rename = "type")]
    vtype: &'static str,
    #[serde(skip_serializing_if = "is_false")]
    optional: bool,
}

#[derive(Serialize)]
struct EntityDto {
    name: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    fields: Vec<VariableDto>,
}

#[derive(Serialize)]
struct RelationshipDto {
    name: String,
    left: String,
    right: String,
}

#[derive(Serialize)]
struct GeneralizationDto {
    parent: String,
    child: String,
}

#[derive(Serialize)]
struct StoreDto {
    id: String,
    #[serde(skip_serializing_if = "String::is_empty")]
    name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    icon: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scope: Option<String>,
    #[serde(skip_serializing_if = "is_false")]
    collapsed: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    entities: Vec<EntityDto>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    relationships: Vec<RelationshipDto>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    generalizations: Vec<GeneralizationDto>,
}

#[derive(Serialize)]
struct ObjectDto {
    id: String,
    #[serde(skip_serializing_if = "String::is_empty")]
    name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    stereotype: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    physicality: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    message_type: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    origin_store: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    url: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    state: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    variables: Vec<VariableDto>,
}

#[derive(Serialize)]
struct CopyRuleDto {
    from: String,
    to: String,
}

#[derive(Serialize)]
struct MappingDto {
    id: String,
    source_object: String,
    target_object: String,
    rules: Vec<CopyRuleDto>,
}

#[derive(Serialize)]
pub(super) struct BehaviorsDto {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    tasks: Vec<TaskDto>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    initial_records: Vec<RecordDto>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    scenarios: Vec<ScenarioDto>,
}

#[derive(Serialize)]
struct TaskDto {
    task: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    instances: Option<u32>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    effects: Vec<EffectDto>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    store_actions: Vec<StoreActionDto>,
}

#[derive(Serialize)]
struct EffectDto {
    target: String,
    value: String,
}

#[derive(Serialize)]
struct FieldDto {
    field: String,
    value: String,
}

#[derive(Serialize)]
#[serde(tag = "action", rename_all = "lowercase")]
enum StoreActionDto {
    Insert {
        store: String,
        entity: String,
        fields: Vec<FieldDto>,
    },
    Read {
        store: String,
        entity: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        filter: Option<String>,
        into: String,
    },
}

#[derive(Serialize)]
struct RecordDto {
    store: String,
    entity: String,
    fields: serde_json::Map<String, serde_json::Value>,
}

#[derive(Serialize)]
struct ScenarioDto {
    name: String,
    #[serde(skip_serializing_if = "serde_json::Map::is_empty")]
    inputs: serde_json::Map<String, serde_json::Value>,
}

fn node(n: &Node) -> NodeDto {
    NodeDto {
        id: n.id.clone(),
        name: n.name.clone(),
        kind: n.kind.as_str(),
        multi_instance: n.multi_instance,
        condition: n.condition.as_ref().map(ToString::to_string),
        local_stores: n.local_stores.clone(),
        children: by_id(&n.children, |c| &c.id).iter().map(node).collect(),
    }
}

fn attachments(atts: &[ObjectAttachment]) -> Vec<AttachmentDto> {
    atts.iter()
        .map(|a| AttachmentDto {
            object: a.object.clone(),
            direction: a.direction.as_str(),
            optional: a.optional,
        })
        .collect()
}

fn variables(vars: &[Variable]) -> Vec<VariableDto> {
    vars.iter()
        .map(|v| VariableDto {
            name: v.name.clone(),
            vtype: v.vtype.as_str(),
            optional: v.optional,
        })
        .collect()
}

fn pool(p: &Pool) -> PoolDto {
    let lists = !p.external || !p.nodes.is_empty();
    PoolDto {
        id: p.id.clone(),
        name: p.name.clone(),
        external: p.external,
        nodes: lists.then(|| by_id(&p.nodes, |n| &n.id).iter().map(node).collect()),
        sequence_flows: lists.then(|| {
            by_id(&p.sequence_flows, |f| &f.id)
                .iter()
                .map(|f| SequenceFlowDto {
                    id: f.id.clone(),
                    source: f.source.clone(),
                    target: f.target.clone(),
                    guard: f.guard.as_ref().map(ToString::to_string),
                    attachments: attachments(&f.attachments),
                })
                .collect()
        }),
        explicit_data_flows: lists.then(|| {
            by_id(&p.explicit_data_flows, |f| &f.id)
                .iter()
                .map(|f| DataFlowDto {
                    id: f.id.clone(),
                    source: f.source.clone(),
                    target: f.target.clone(),
                    object: f.object.clone(),
                    optional: f.optional,
                })
                .collect()
        }),
    }
}

fn store(s: &DataStore) -> StoreDto {
    StoreDto {
        id: s.id.clone(),
        name: s.name.clone(),
        icon: match &s.icon {
            StoreIcon::Database => None,
            StoreIcon::Warehouse => Some("warehouse".into()),
            StoreIcon::Folder => Some("folder".into()),
            StoreIcon::Custom(c) => Some(format!("custom:{c}")),
        },
        scope: match &s.scope {
            StoreScope::Diagram => None,
            StoreScope::SubProcess(sp) => Some(format!("sub_process:{sp}")),
        },
        collapsed: s.collapsed,
        entities: s
            .entities
            .iter()
            .map(|e| EntityDto {
                name: e.name.clone(),
                fields: variables(&e.fields),
            })
            .collect(),
        relationships: s
            .relationships
            .iter()
            .map(|r| RelationshipDto {
                name: r.name.clone(),
                left: r.left.clone(),
                right: r.right.clone(),
            })
            .collect(),
        generalizations: s
            .generalizations
            .iter()
            .map(|g| GeneralizationDto {
                parent: g.parent.clone(),
                child: g.child.clone(),
            })
            .collect(),
    }
}

fn object(o: &DataObject) -> ObjectDto {
    ObjectDto {
        id: o.id.clone(),
        name: o.name.clone(),
        stereotype: match &o.stereotype {
            Stereotype::Generic => None,
            Stereotype::Document => Some("document".into()),
            Stereotype::Product => Some("product".into()),
            Stereotype::Message => Some("message".into()),
            Stereotype::Custom(c) => Some(format!("custom:{c}")),
        },
        physicality: match o.physicality {
            Physicality::Digital => None,
            Physicality::Physical => Some("physical"),
        },
        message_type: o.message_type.clone(),
        origin_store: o.origin_store.clone(),
        url: o.url.clone(),
        state: o.state.clone(),
        variables: variables(&o.variables),
    }
}

pub(super) fn diagram(d: &Diagram, behaviors: Option<&Behaviors>) -> DocDto {
    DocDto {
        bpdmn: "1.0",
        id: d.id().map(str::to_string),
        pools: by_id(d.pools(), |p| &p.id).iter().map(pool).collect(),
        stores: by_id(d.stores(), |s| &s.id).iter().map(store).collect(),
        objects: by_id(d.objects(), |o| &o.id).iter().map(object).collect(),
        mappings: by_id(d.mappings(), |m| &m.id)
            .iter()
            .map(|m| MappingDto {
                id: m.id.clone(),
                source_object: m.source_object.clone(),
                target_object: m.target_object.clone(),
                rules: m
                    .rules
                    .iter()
                    .map(|r| CopyRuleDto {
                        from: r.from.to_string(),
                        to: r.to.clone(),
                    })
                    .collect(),
            })
            .collect(),
        message_flows: by_id(d.message_flows(), |m| &m.id)
            .iter()
            .map(|m| MessageFlowDto {
                id: m.id.clone(),
                source: m.source.clone(),
                target: m.target.clone(),
                attachments: attachments(&m.attachments),
            })
            .collect(),
        behaviors: behaviors.map(behaviors_dto),
    }
}

fn json_value(v: &Value) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

fn scalar_map(items: &[(String, Value)]) -> serde_json::Map<String, serde_json::Value> {
    items
        .iter()
        .map(|(k, v)| (k.clone(), json_value(v)))
        .collect()
}

pub(super) fn behaviors_dto(b: &Behaviors) -> BehaviorsDto {
    BehaviorsDto {
        tasks: by_id(&b.tasks, |t| &t.task)
            .iter()
            .map(|t| TaskDto {
                task: t.task.clone(),
                instances: t.instances,
                effects: t
                    .effects
                    .iter()
                    .map(|e| EffectDto {
                        target: e.target.clone(),
                        value: e.value.to_string(),
                    })
                    .collect(),
                store_actions: t
                    .store_actions
                    .iter()
                    .map(|a| match a {
                        StoreAction::Insert {
                            store,
                            entity,
                            fields,
                        } => StoreActionDto::Insert {
                            store: store.clone(),
                            entity: entity.clone(),
                            fields: fields
                                .iter()
                                .map(|(f, v)| FieldDto {
                                    field: f.clone(),
                                    value: v.to_string(),
                                })
                                .collect(),
                        },
                        StoreAction::Read {
                            store,
                            entity,
                            filter,
                            into,
                        } => StoreActionDto::Read {
                            store: store.clone(),
                            entity: entity.clone(),
                            filter: filter.as_ref().map(ToString::to_string),
                            into: into.clone(),
                        },
                    })
                    .collect(),
            })
            .collect(),
        initial_records: b
            .initial_records
            .iter()
            .map(|r| RecordDto {
                store: r.store.clone(),
                entity: r.entity.clone(),
                fields: scalar_map(&r.fields),
            })
            .collect(),
        scenarios: b
            .scenarios
            .iter()
            .map(|s| ScenarioDto {
                name: s.name.clone(),
                inputs: scalar_map(&s.inputs),
            })
            .collect(),
    }
}
