//! Minimal XML tree with deterministic, indented output.

#[derive(Debug, Clone, PartialEq)]
pub enum Child {
    Elem(Element),
    Text(String),
    Comment(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub name: &'static str,
    pub attrs: Vec<(&'static str, String)>,
    pub children: Vec<Child>,
}

impl Element {
    pub fn new(name: &'static str) -> Self {
        Element {
            name,
            attrs: Vec::new(),
            children: Vec::new(),
        }
    }

    pub fn attr(mut self, key: &'static str, value: impl Into<String>) -> Self {
        self.attrs.push((key, value.into()));
        self
    }

    pub fn attr_opt(self, key: &'static str, value: Option<impl Into<String>>) -> Self {
        match value {
            Some(v) => self.attr(key, v),
            None => self,
        }
    }

    pub fn child(mut self, e: Element) -> Self {
        self.push(e);
        self
    }

    pub fn push(&mut self, e: Element) {
        self.children.push(Child::Elem(e));
    }

    pub fn text(mut self, t: impl Into<String>) -> Self {
        self.children.push(Child::Text(t.into()));
        self
    }

    pub fn comment(&mut self, c: impl Into<String>) {
        self.children.push(Child::Comment(c.into()));
    }

    pub fn has_children(&self) -> bool {
        !self.children.is_empty()
    }

    /// Adds `e` only when it has content.
    pub fn push_nonempty(&mut self, e: Element) {
        if e.has_children() {
            self.push(e);
        }
    }

    /// Full document with an XML declaration.
    pub fn to_document(&self) -> String {
        let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        self.write(&mut out, 0);
        out
    }

    fn write(&self, out: &mut String, depth: usize) {
        indent(out, depth);
        out.push('<');
        out.push_str(self.name);
        for (k, v) in &self.attrs {
            out.push(' ');
            out.push_str(k);
            out.push_str("=\"");
            escape_into(out, v, true);
            out.push('"');
        }
        match self.children.as_slice() {
            [] => out.push_str("/>\n"),
            [Child::Text(t)] => {
                out.push('>');
                escape_into(out, t, false);
                out.push_str("</");
                out.push_str(self.name);
                out.push_str(">\n");
            }
            children => {
                out.push_str(">\n");
                for c in children {
                    match c {
                        Child::Elem(e) => e.write(out, depth + 1),
                        Child::Text(t) => {
                            indent(out, depth + 1);
                            escape_into(out, t, false);
                            out.push('\n');
                        }
                        Child::Comment(t) => {
                            indent(out, depth + 1);
                            out.push_str("<!-- ");
                            let mut body = String::new();
                            escape_into(&mut body, t, false);
                            // "--" is not allowed inside comments.
                            while body.contains("--") {
                                body = body.replace("--", "- -");
                            }
                            out.push_str(body.trim_end_matches('-'));
                            out.push_str(" -->\n");
                        }
                    }
                }
                indent(out, depth);
                out.push_str("</");
                out.push_str(self.name);
                out.push_str(">\n");
            }
        }
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn escape_into(out: &mut String, s: &str, attr: bool) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' if attr => out.push_str("&quot;"),
            '\n' if attr => out.push_str("&#10;"),
            '\t' if attr => out.push_str("&#9;"),
            '\r' => out.push_str("&#13;"),
            '\t' | '\n' => out.push(c),
            c if (c as u32) < 0x20 || c == '\u{FFFE}' || c == '\u{FFFF}' => out.push('\u{FFFD}'),
            c => out.push(c),
        }
    }
}
