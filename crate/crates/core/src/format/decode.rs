use std::collections::{BTreeMap, HashSet};

use super::json::{self, Json, Spanned};
use super::{ErrorKind, FormatError, FormatWarning, ParseOptions, SourceSpan};
use crate::expr::{parse_expr, Expr, Value};
use crate::model::*;
use crate::simulator::behavior::*;

type R<T> = Result<T, FormatError>;

pub(super) struct Ctx<'t> {
    text: &'t str,
    lenient: bool,
    pub warnings: Vec<FormatWarning>,
    pub spans: BTreeMap<String, SourceSpan>,
}

impl<'t> Ctx<'t> {
    pub fn new(text: &'t str, opts: ParseOptions) -> Self {
        Ctx {
            text,
            lenient: opts.lenient,
            warnings: Vec::new(),
            spans: BTreeMap::new(),
        }
    }

    pub fn span(&self, offset: usize) -> SourceSpan {
        let (line, column) = json::line_col(self.text, offset);
        SourceSpan { line, column }
    }

    fn error(&self, offset: usize, kind: ErrorKind, message: impl Into<String>) -> FormatError {
        FormatError {
            span: self.span(offset),
            kind,
            message: message.into(),
        }
    }

    fn schema(&self, v: &Spanned, message: impl Into<String>) -> FormatError {
        self.error(v.offset, ErrorKind::Schema, message)
    }

    pub fn read(&self) -> R<Spanned> {
        json::parse(self.text).map_err(|e| self.error(e.offset, ErrorKind::Syntax, e.message))
    }

    fn object<'a>(&self, v: &'a Spanned, what: &'static str) -> R<Obj<'a>> {
        match &v.value {
            Json::Object(members) => Ok(Obj {
                offset: v.offset,
                members,
                used: vec![false; members.len()],
                what,
            }),
            _ => Err(self.schema(v, format!("{what} must be an object, found {}", v.kind()))),
        }
    }

    fn array<'a>(&self, v: &'a Spanned, what: &str) -> R<&'a [Spanned]> {
        match &v.value {
            Json::Array(items) => Ok(items),
            _ => Err(self.schema(v, format!("`{what}` must be an array, found {}", v.kind()))),
        }
    }

    fn string(&self, v: &Spanned, what: &str) -> R<String> {
        v.as_str()
            .map(str::to_string)
            .ok_or_else(|| self.schema(v, format!("`{what}` must be a string, found {}", v.kind())))
    }

    fn boolean(&self, v: &Spanned, what: &str) -> R<bool> {
        match v.value {
            Json::Bool(b) => Ok(b),
            _ => Err(self.schema(v, format!("`{what}` must be a boolean, found {}", v.kind()))),
        }
    }

    fn scalar(&self, v: &Spanned, what: &str) -> R<Value> {
        Ok(match &v.value {
            Json::Null => Value::Null,
            Json::Bool(b) => Value::Bool(*b),
            Json::Number(n) => Value::Num(*n),
            Json::String(s) => Value::Str(s.clone()),
            _ => {
                return Err(self.schema(v, format!("`{what}` must be a scalar, found {}", v.kind())))
            }
        })
    }

    fn expr(&self, v: &Spanned, what: &str) -> R<Expr> {
        let text = self.string(v, what)?;
        parse_expr(&text).map_err(|e| {
            // +1 skips the opening quote of the JSON string; escapes make
            // this approximate, which is fine for a diagnostic.
            let offset = v.offset
                + 1
                + text
                    .char_indices()
                    .nth(e.offset)
                    .map_or(text.len(), |(i, _)| i);
            self.error(offset, ErrorKind::Schema, format!("`{what}`: {e}"))
        })
    }

    fn claim(&mut self, id: &str, offset: usize) {
        let span = self.span(offset);
        self.spans.entry(id.to_string()).or_insert(span);
    }

    fn list<T>(
        &mut self,
        obj: &mut Obj<'_>,
        key: &str,
        required: bool,
        mut f: impl FnMut(&mut Self, &Spanned) -> R<T>,
    ) -> R<Vec<T>> {
        let v = if required {
            Some(obj.req(self, key)?)
        } else {
            obj.opt(key)
        };
        let Some(v) = v else { return Ok(Vec::new()) };
        let items = self.array(v, key)?;
        items.iter().map(|item| f(self, item)).collect()
    }
}

pub(super) struct Obj<'a> {
    offset: usize,
    members: &'a [(Spanned, Spanned)],
    used: Vec<bool>,
    what: &'static str,
}

impl<'a> Obj<'a> {
    fn opt(&mut self, key: &str) -> Option<&'a Spanned> {
        let i = self
            .members
            .iter()
            .position(|(k, _)| k.as_str() == Some(key))?;
        self.used[i] = true;
        Some(&self.members[i].1)
    }

    fn req(&mut self, ctx: &Ctx<'_>, key: &str) -> R<&'a Spanned> {
        self.opt(key).ok_or_else(|| {
            ctx.error(
                self.offset,
                ErrorKind::Schema,
                format!("{} is missing required key `{key}`", self.what),
            )
        })
    }

    fn req_str(&mut self, ctx: &Ctx<'_>, key: &str) -> R<String> {
        let v = self.req(ctx, key)?;
        ctx.string(v, key)
    }

    fn opt_str(&mut self, ctx: &Ctx<'_>, key: &str) -> R<Option<String>> {
        self.opt(key).map(|v| ctx.string(v, key)).transpose()
    }

    fn opt_bool(&mut self, ctx: &Ctx<'_>, key: &str) -> R<bool> {
        Ok(match self.opt(key) {
            Some(v) => ctx.boolean(v, key)?,
            None => false,
        })
    }

    fn finish(self, ctx: &mut Ctx<'_>) -> R<()> {
        for ((k, _), used) in self.members.iter().zip(&self.used) {
            if !used {
                let message = format!(
                    "unknown key `{}` in {}",
                    k.as_str().unwrap_or_default(),
                    self.what
                );
                if ctx.lenient {
                    let span = ctx.span(k.offset);
                    ctx.warnings.push(FormatWarning { span, message });
                } else {
                    return Err(ctx.error(k.offset, ErrorKind::Schema, message));
                }
            }
        }
        Ok(())
    }
}

pub(super) fn document(ctx: &mut Ctx<'_>, root: &Spanned) -> R<(DiagramParts, Option<Behaviors>)> {
    let mut top = ctx.object(root, "document")?;
    let version = top.req(ctx, "bpdmn")?;
    if version.as_str() != Some("1.0") {
        return Err(ctx.schema(version, "unsupported `bpdmn` version, expected \"1.0\""));
    }
    let id = match top.opt("id") {
        Some(v) => {
            let id = ctx.string(v, "id")?;
            ctx.claim(&id, v.offset);
            Some(id)
        }
        None => None,
    };
    let pools = ctx.list(&mut top, "pools", true, pool)?;
    let stores = ctx.list(&mut top, "stores", true, store)?;
    let objects = ctx.list(&mut top, "objects", true, object)?;
    let mappings = ctx.list(&mut top, "mappings", true, mapping)?;
    let message_flows = ctx.list(&mut top, "message_flows", true, message_flow)?;
    let behaviors = top
        .opt("behaviors")
        .map(|v| behaviors(ctx, v))
        .transpose()?;
    top.finish(ctx)?;
    Ok((
        DiagramParts {
            id,
            pools,
            stores,
            objects,
            mappings,
            message_flows,
        },
        behaviors,
    ))
}

fn element_id(ctx: &mut Ctx<'_>, o: &mut Obj<'_>) -> R<String> {
    let v = o.req(ctx, "id")?;
    let id = ctx.string(v, "id")?;
    ctx.claim(&id, o.offset);
    Ok(id)
}

fn pool(ctx: &mut Ctx<'_>, v: &Spanned) -> R<Pool> {
    let mut o = ctx.object(v, "pool")?;
    let id = element_id(ctx, &mut o)?;
    let name = o.opt_str(ctx, "name")?.unwrap_or_default();
    let external = o.opt_bool(ctx, "external")?;
    let nodes = ctx.list(&mut o, "nodes", !external, node)?;
    let sequence_flows = ctx.list(&mut o, "sequence_flows", !external, sequence_flow)?;
    let explicit_data_flows = ctx.list(&mut o, "explicit_data_flows", !external, data_flow)?;
    o.finish(ctx)?;
    Ok(Pool {
        id,
        name,
        external,
        nodes,
        sequence_flows,
        explicit_data_flows,
    })
}

fn node(ctx: &mut Ctx<'_>, v: &Spanned) -> R<Node> {
    let mut o = ctx.object(v, "node")?;
    let id = element_id(ctx, &mut o)?;
    let name = o.opt_str(ctx, "name")?.unwrap_or_default();
    let kind_v = o.req(ctx, "kind")?;
    let kind_s = ctx.string(kind_v, "kind")?;
    let kind = NodeKind::parse(&kind_s)
        .ok_or_else(|| ctx.schema(kind_v, format!("unknown node kind `{kind_s}`")))?;
    let multi_instance = o.opt_bool(ctx, "multi_instance")?;
    let condition = o
        .opt("condition")
        .map(|c| ctx.expr(c, "condition"))
        .transpose()?;
    let local_stores = ctx.list(&mut o, "local_stores", false, |ctx, s| {
        ctx.string(s, "local_stores")
    })?;
    let children = ctx.list(&mut o, "children", false, node)?;
    o.finish(ctx)?;
    Ok(Node {
        id,
        name,
        kind,
        children,
        local_stores,
        condition,
        multi_instance,
    })
}

fn attachment(ctx: &mut Ctx<'_>, v: &Spanned) -> R<ObjectAttachment> {
    let mut o = ctx.object(v, "attachment")?;
    let object = o.req_str(ctx, "object")?;
    let dv = o.req(ctx, "direction")?;
    let direction = match dv.as_str() {
        Some("input") => Direction::Input,
        Some("output") => Direction::Output,
        _ => return Err(ctx.schema(dv, "`direction` must be \"input\" or \"output\"")),
    };
    let optional = o.opt_bool(ctx, "optional")?;
    o.finish(ctx)?;
    Ok(ObjectAttachment {
        object,
        direction,
        optional,
    })
}

fn sequence_flow(ctx: &mut Ctx<'_>, v: &Spanned) -> R<SequenceFlow> {
    let mut o = ctx.object(v, "sequence flow")?;
    let id = element_id(ctx, &mut o)?;
    let source = o.req_str(ctx, "source")?;
    let target = o.req_str(ctx, "target")?;
    let guard = o.opt("guard").map(|g| ctx.expr(g, "guard")).transpose()?;
    let attachments = ctx.list(&mut o, "attachments", false, attachment)?;
    o.finish(ctx)?;
    Ok(SequenceFlow {
        id,
        source,
        target,
        attachments,
        guard,
    })
}

fn message_flow(ctx: &mut Ctx<'_>, v: &Spanned) -> R<MessageFlow> {
    let mut o = ctx.object(v, "message flow")?;
    let id = element_id(ctx, &mut o)?;
    let source = o.req_str(ctx, "source")?;
    let target = o.req_str(ctx, "target")?;
    let attachments = ctx.list(&mut o, "attachments", false, attachment)?;
    o.finish(ctx)?;
    Ok(MessageFlow {
        id,
        source,
        target,
        attachments,
    })
}

fn data_flow(ctx: &mut Ctx<'_>, v: &Spanned) -> R<ExplicitDataFlow> {
    let mut o = ctx.object(v, "data flow")?;
    let id = element_id(ctx, &mut o)?;
    let source = o.req_str(ctx, "source")?;
    let target = o.req_str(ctx, "target")?;
    let object = o.req_str(ctx, "object")?;
    let optional = o.opt_bool(ctx, "optional")?;
    o.finish(ctx)?;
    Ok(ExplicitDataFlow {
        id,
        source,
        target,
        object,
        optional,
    })
}

fn variable(ctx: &mut Ctx<'_>, v: &Spanned) -> R<Variable> {
    let mut o = ctx.object(v, "variable")?;
    let name = o.req_str(ctx, "name")?;
    let tv = o.req(ctx, "type")?;
    let vtype = tv
        .as_str()
        .and_then(VarType::parse)
        .ok_or_else(|| ctx.schema(tv, "`type` must be one of string, number, boolean, record"))?;
    let optional = o.opt_bool(ctx, "optional")?;
    o.finish(ctx)?;
    Ok(Variable {
        name,
        vtype,
        optional,
    })
}

fn store(ctx: &mut Ctx<'_>, v: &Spanned) -> R<DataStore> {
    let mut o = ctx.object(v, "store")?;
    let id = element_id(ctx, &mut o)?;
    let name = o.opt_str(ctx, "name")?.unwrap_or_default();
    let icon = match o.opt("icon") {
        None => StoreIcon::Database,
        Some(iv) => match iv.as_str() {
            Some("database") => StoreIcon::Database,
            Some("warehouse") => StoreIcon::Warehouse,
            Some("folder") => StoreIcon::Folder,
            Some(s) if s.starts_with("custom:") => StoreIcon::Custom(s["custom:".len()..].into()),
            _ => {
                return Err(ctx.schema(
                    iv,
                    "`icon` must be database, warehouse, folder or custom:<label>",
                ))
            }
        },
    };
    let scope = match o.opt("scope") {
        None => StoreScope::Diagram,
        Some(sv) => match sv.as_str() {
            Some("diagram") => StoreScope::Diagram,
            Some(s) if s.starts_with("sub_process:") => {
                StoreScope::SubProcess(s["sub_process:".len()..].into())
            }
            _ => return Err(ctx.schema(sv, "`scope` must be diagram or sub_process:<id>")),
        },
    };
    let collapsed = o.opt_bool(ctx, "collapsed")?;
    let entities = ctx.list(&mut o, "entities", false, |ctx, ev| {
        let mut e = ctx.object(ev, "entity")?;
        let name = e.req_str(ctx, "name")?;
        let fields = ctx.list(&mut e, "fields", false, variable)?;
        e.finish(ctx)?;
        Ok(Entity { name, fields })
    })?;
    let relationships = ctx.list(&mut o, "relationships", false, |ctx, rv| {
        let mut r = ctx.object(rv, "relationship")?;
        let rel = Relationship {
            name: r.req_str(ctx, "name")?,
            left: r.req_str(ctx, "left")?,
            right: r.req_str(ctx, "right")?,
        };
        r.finish(ctx)?;
        Ok(rel)
    })?;
    let generalizations = ctx.list(&mut o, "generalizations", false, |ctx, gv| {
        let mut g = ctx.object(gv, "generalization")?;
        let gen = Generalization {
            parent: g.req_str(ctx, "parent")?,
            child: g.req_str(ctx, "child")?,
        };
        g.finish(ctx)?;
        Ok(gen)
    })?;
    o.finish(ctx)?;
    Ok(DataStore {
        id,
        name,
        icon,
        entities,
        relationships,
        generalizations,
        scope,
        collapsed,
    })
}

fn object(ctx: &mut Ctx<'_>, v: &Spanned) -> R<DataObject> {
    let mut o = ctx.object(v, "object")?;
    let id = element_id(ctx, &mut o)?;
    let name = o.opt_str(ctx, "name")?.unwrap_or_default();
    let stereotype = match o.opt("stereotype") {
        None => Stereotype::Generic,
        Some(sv) => match sv.as_str() {
            Some("generic") => Stereotype::Generic,
            Some("document") => Stereotype::Document,
            Some("product") => Stereotype::Product,
            Some("message") => Stereotype::Message,
            Some(s) if s.starts_with("custom:") => Stereotype::Custom(s["custom:".len()..].into()),
            _ => {
                return Err(ctx.schema(
                    sv,
                    "`stereotype` must be generic, document, product, message or custom:<label>",
                ))
            }
        },
    };
    let physicality = match o.opt("physicality") {
        None => Physicality::Digital,
        Some(pv) => match pv.as_str() {
            Some("digital") => Physicality::Digital,
            Some("physical") => Physicality::Physical,
            _ => return Err(ctx.schema(pv, "`physicality` must be digital or physical")),
        },
    };
    let message_type = o.opt_str(ctx, "message_type")?;
    let origin_store = o.opt_str(ctx, "origin_store")?;
    let url = o.opt_str(ctx, "url")?;
    let state = o.opt_str(ctx, "state")?;
    let variables = ctx.list(&mut o, "variables", false, variable)?;
    o.finish(ctx)?;
    Ok(DataObject {
        id,
        name,
        stereotype,
        physicality,
        variables,
        url,
        state,
        origin_store,
        message_type,
    })
}

fn mapping(ctx: &mut Ctx<'_>, v: &Spanned) -> R<DataMapping> {
    let mut o = ctx.object(v, "mapping")?;
    let id = element_id(ctx, &mut o)?;
    let source_object = o.req_str(ctx, "source_object")?;
    let target_object = o.req_str(ctx, "target_object")?;
    let rules = ctx.list(&mut o, "rules", true, |ctx, rv| {
        let mut r = ctx.object(rv, "copy rule")?;
        let fv = r.req(ctx, "from")?;
        let from = ctx.expr(fv, "from")?;
        let to = r.req_str(ctx, "to")?;
        r.finish(ctx)?;
        Ok(CopyRule { from, to })
    })?;
    o.finish(ctx)?;
    Ok(DataMapping {
        id,
        source_object,
        target_object,
        rules,
    })
}

pub(super) fn behaviors(ctx: &mut Ctx<'_>, v: &Spanned) -> R<Behaviors> {
    let mut o = ctx.object(v, "behaviors")?;
    let mut seen = HashSet::new();
    let tasks = ctx.list(&mut o, "tasks", false, |ctx, tv| {
        let mut t = ctx.object(tv, "task behavior")?;
        let task = t.req_str(ctx, "task")?;
        if !seen.insert(task.clone()) {
            return Err(ctx.schema(tv, format!("duplicate behavior for `{task}`")));
        }
        let instances = match t.opt("instances") {
            None => None,
            Some(iv) => match iv.value {
                Json::Number(n) if n >= 1.0 && n.fract() == 0.0 && n <= u32::MAX as f64 => {
                    Some(n as u32)
                }
                _ => return Err(ctx.schema(iv, "`instances` must be a positive integer")),
            },
        };
        let effects = ctx.list(&mut t, "effects", false, |ctx, ev| {
            let mut e = ctx.object(ev, "effect")?;
            let target = e.req_str(ctx, "target")?;
            let vv = e.req(ctx, "value")?;
            let value = ctx.expr(vv, "value")?;
            e.finish(ctx)?;
            Ok(Effect { target, value })
        })?;
        let store_actions = ctx.list(&mut t, "store_actions", false, store_action)?;
        t.finish(ctx)?;
        Ok(TaskBehavior {
            task,
            instances,
            effects,
            store_actions,
        })
    })?;
    let initial_records = ctx.list(&mut o, "initial_records", false, |ctx, rv| {
        let mut r = ctx.object(rv, "initial record")?;
        let store = r.req_str(ctx, "store")?;
        let entity = r.req_str(ctx, "entity")?;
        let fv = r.req(ctx, "fields")?;
        let fields = scalar_map(ctx, fv, "fields")?;
        r.finish(ctx)?;
        Ok(InitialRecord {
            store,
            entity,
            fields,
        })
    })?;
    let scenarios = ctx.list(&mut o, "scenarios", false, |ctx, sv| {
        let mut s = ctx.object(sv, "scenario")?;
        let name = s.req_str(ctx, "name")?;
        let inputs = match s.opt("inputs") {
            Some(iv) => scalar_map(ctx, iv, "inputs")?,
            None => Vec::new(),
        };
        s.finish(ctx)?;
        Ok(Scenario { name, inputs })
    })?;
    o.finish(ctx)?;
    Ok(Behaviors {
        tasks,
        initial_records,
        scenarios,
    })
}

fn scalar_map(ctx: &mut Ctx<'_>, v: &Spanned, what: &str) -> R<Vec<(String, Value)>> {
    match &v.value {
        Json::Object(members) => members
            .iter()
            .map(|(k, val)| {
                let key = k.as_str().unwrap_or_default().to_string();
                Ok((key.clone(), ctx.scalar(val, &key)?))
            })
            .collect(),
        _ => Err(ctx.schema(v, format!("`{what}` must be an object, found {}", v.kind()))),
    }
}

fn store_action(ctx: &mut Ctx<'_>, v: &Spanned) -> R<StoreAction> {
    let mut a = ctx.object(v, "store action")?;
    let kind_v = a.req(ctx, "action")?;
    let store = a.req_str(ctx, "store")?;
    let entity = a.req_str(ctx, "entity")?;
    let action = match kind_v.as_str() {
        Some("insert") => {
            let fields = ctx.list(&mut a, "fields", true, |ctx, fv| {
                let mut f = ctx.object(fv, "field assignment")?;
                let field = f.req_str(ctx, "field")?;
                let vv = f.req(ctx, "value")?;
                let value = ctx.expr(vv, "value")?;
                f.finish(ctx)?;
                Ok((field, value))
            })?;
            StoreAction::Insert {
                store,
                entity,
                fields,
            }
        }
        Some("read") => {
            let filter = a.opt("filter").map(|f| ctx.expr(f, "filter")).transpose()?;
            let into = a.req_str(ctx, "into")?;
            StoreAction::Read {
                store,
                entity,
                filter,
                into,
            }
        }
        _ => return Err(ctx.schema(kind_v, "`action` must be \"insert\" or \"read\"")),
    };
    a.finish(ctx)?;
    Ok(action)
}
