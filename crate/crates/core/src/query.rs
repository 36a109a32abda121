//! Tree-pattern queries with `/` and `//` edges.
//!
//! Grammar (whitespace between tokens is ignored):
//!
//! ```text
//! node  := LABEL group*
//! group := '(' axis node ')'
//! axis  := '//' | ''
//! ```
//!
//! `A(B)(//C(D))` is an `A` with a child `B` and a descendant `C` that has a
//! child `D`.

use std::fmt;

use crate::subtrees::SubtreeShape;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axis {
    Child,
    Descendant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QueryNode {
    pub label: String,
    pub children: Vec<(Axis, QueryNode)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QueryError {
    #[error("query syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: &'static str },
    #[error("empty label at {pos}")]
    EmptyLabel { pos: usize },
}

impl QueryNode {
    pub fn leaf(label: impl Into<String>) -> Self {
        QueryNode {
            label: label.into(),
            children: Vec::new(),
        }
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(|(_, c)| c.size()).sum::<usize>()
    }

    pub fn has_descendant_edges(&self) -> bool {
        self.children
            .iter()
            .any(|(a, c)| *a == Axis::Descendant || c.has_descendant_edges())
    }

    /// Children sorted by (axis, rendering) at every level.
    pub fn canonical(&self) -> QueryNode {
        let mut kids: Vec<(Axis, QueryNode)> = self
            .children
            .iter()
            .map(|(a, c)| (*a, c.canonical()))
            .collect();
        kids.sort_by_cached_key(|(a, c)| (*a, c.to_string()));
        QueryNode {
            label: self.label.clone(),
            children: kids,
        }
    }
}

impl From<&SubtreeShape> for QueryNode {
    fn from(s: &SubtreeShape) -> Self {
        QueryNode {
            label: s.label.clone(),
            children: s.children.iter().map(|c| (Axis::Child, c.into())).collect(),
        }
    }
}

pub fn query_size(q: &QueryNode) -> usize {
    q.size()
}

impl fmt::Display for QueryNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)?;
        for (a, c) in &self.children {
            match a {
                Axis::Child => write!(f, "({c})")?,
                Axis::Descendant => write!(f, "(//{c})")?,
            }
        }
        Ok(())
    }
}

struct Parser<'a> {
    s: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.s[self.pos..].starts_with(|c: char| c.is_whitespace()) {
            self.pos += self.s[self.pos..].chars().next().unwrap().len_utf8();
        }
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.s[self.pos..].starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn label(&mut self) -> Result<&'a str, QueryError> {
        self.skip_ws();
        let rest = &self.s[self.pos..];
        let len = rest
            .find(|c: char| c.is_whitespace() || c == '(' || c == ')')
            .unwrap_or(rest.len());
        if len == 0 {
            return Err(QueryError::EmptyLabel { pos: self.pos });
        }
        self.pos += len;
        Ok(&rest[..len])
    }

    fn node(&mut self) -> Result<QueryNode, QueryError> {
        let mut q = QueryNode::leaf(self.label()?);
        while self.eat("(") {
            let axis = if self.eat("//") {
                Axis::Descendant
            } else {
                Axis::Child
            };
            let child = self.node()?;
            if !self.eat(")") {
                return Err(QueryError::Syntax {
                    pos: self.pos,
                    msg: "expected ')'",
                });
            }
            q.children.push((axis, child));
        }
        Ok(q)
    }
}

pub fn parse_query(text: &str) -> Result<QueryNode, QueryError> {
    let mut p = Parser { s: text, pos: 0 };
    p.skip_ws();
    if p.pos == text.len() {
        return Err(QueryError::Syntax {
            pos: 0,
            msg: "empty query",
        });
    }
    let q = p.node()?;
    p.skip_ws();
    if p.pos != text.len() {
        return Err(QueryError::Syntax {
            pos: p.pos,
            msg: "trailing input",
        });
    }
    Ok(q)
}

/// Pre-order flattening of a query; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryTree {
    pub nodes: Vec<QNode>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QNode {
    pub label: String,
    pub parent: Option<usize>,
    /// Axis of the edge from the parent; `Child` for the root.
    pub axis: Axis,
    pub children: Vec<usize>,
}

impl QueryTree {
    pub fn new(q: &QueryNode) -> Self {
        fn go(q: &QueryNode, parent: Option<usize>, axis: Axis, out: &mut Vec<QNode>) -> usize {
            let id = out.len();
            out.push(QNode {
                label: q.label.clone(),
                parent,
                axis,
                children: Vec::new(),
            });
            for (a, c) in &q.children {
                let cid = go(c, Some(id), *a, out);
                out[id].children.push(cid);
            }
            id
        }
        let mut nodes = Vec::with_capacity(q.size());
        go(q, None, Axis::Child, &mut nodes);
        QueryTree { nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn label(&self, v: usize) -> &str {
        &self.nodes[v].label
    }

    /// True iff `a` is a proper ancestor of `b`.
    pub fn is_ancestor(&self, a: usize, b: usize) -> bool {
        let mut x = self.nodes[b].parent;
        while let Some(p) = x {
            if p == a {
                return true;
            }
            x = self.nodes[p].parent;
        }
        false
    }

    /// Children reached by `/` edges.
    pub fn child_edges(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.nodes[v]
            .children
            .iter()
            .copied()
            .filter(move |&c| self.nodes[c].axis == Axis::Child)
    }

    pub fn to_query(&self, v: usize) -> QueryNode {
        QueryNode {
            label: self.nodes[v].label.clone(),
            children: self.nodes[v]
                .children
                .iter()
                .map(|&c| (self.nodes[c].axis, self.to_query(c)))
                .collect(),
        }
    }
}
