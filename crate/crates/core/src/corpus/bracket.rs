//! Penn-treebank style bracketed input.

use super::{number_nodes, CorpusError, ParseTree, TreeNode};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tok<'a> {
    Open,
    Close,
    Atom(&'a str),
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next(&mut self) -> Option<(usize, Tok<'a>)> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        match bytes.get(start)? {
            b'(' => {
                self.pos += 1;
                Some((start, Tok::Open))
            }
            b')' => {
                self.pos += 1;
                Some((start, Tok::Close))
            }
            _ => {
                let rest = &self.src[start..];
                let len = rest
                    .find(|c: char| c.is_whitespace() || c == '(' || c == ')')
                    .unwrap_or(rest.len());
                self.pos += len;
                Some((start, Tok::Atom(&rest[..len])))
            }
        }
    }
}

fn err(offset: usize, msg: &'static str) -> CorpusError {
    CorpusError::Parse { offset, msg }
}

/// Parses one bracketed tree. Node ids are assigned in textual pre-order;
/// pre/post/level are left at zero. The label-less outer wrapper used by
/// treebank files, `( (S ...) )`, is removed.
pub fn parse_bracketed(text: &str) -> Result<ParseTree, CorpusError> {
    let mut lx = Lexer { src: text, pos: 0 };
    // label None marks a label-less bracket
    let mut labels: Vec<Option<&str>> = Vec::new();
    let mut parents: Vec<Option<u32>> = Vec::new();
    let mut stack: Vec<u32> = Vec::new();
    let mut done = false;

    let first = lx.next().ok_or_else(|| err(text.len(), "empty input"))?;
    if first.1 != Tok::Open {
        return Err(err(first.0, "expected '('"));
    }
    let mut pending_open = Some(first.0);

    loop {
        let Some((off, tok)) = lx.next() else {
            if done {
                break;
            }
            return Err(err(text.len(), "unbalanced brackets: missing ')'"));
        };
        if done {
            return Err(err(off, "trailing input after tree"));
        }
        if let Some(open_off) = pending_open.take() {
            let id = labels.len() as u32;
            let label = match tok {
                Tok::Atom(a) => Some(a),
                Tok::Open if stack.is_empty() => None,
                Tok::Open => return Err(err(off, "missing label")),
                Tok::Close => return Err(err(open_off, "empty bracket")),
            };
            labels.push(label);
            parents.push(stack.last().copied());
            stack.push(id);
            if tok == Tok::Open {
                pending_open = Some(off);
            }
            continue;
        }
        match tok {
            Tok::Open => pending_open = Some(off),
            Tok::Close => {
                if stack.pop().is_none() {
                    return Err(err(off, "unbalanced brackets: unexpected ')'"));
                }
                done = stack.is_empty();
            }
            Tok::Atom(a) => {
                let Some(&top) = stack.last() else {
                    return Err(err(off, "token outside brackets"));
                };
                labels.push(Some(a));
                parents.push(Some(top));
            }
        }
    }

    // Unwrap the label-less outer bracket.
    let skip = if labels[0].is_none() {
        let kids = parents.iter().filter(|p| **p == Some(0)).count();
        if kids != 1 {
            return Err(err(0, "unlabeled bracket must wrap exactly one tree"));
        }
        1
    } else {
        0
    };
    let mut nodes = Vec::with_capacity(labels.len() - skip);
    for (i, (label, parent)) in labels.into_iter().zip(parents).enumerate().skip(skip) {
        let label = label.ok_or_else(|| err(0, "missing label"))?;
        let parent = parent.filter(|&p| p as usize >= skip).map(|p| p - skip as u32);
        nodes.push(TreeNode {
            id: (i - skip) as u32,
            parent,
            label: label.to_string(),
            pre: 0,
            post: 0,
            level: 0,
        });
    }
    Ok(ParseTree { tid: 0, nodes })
}

/// One tree per non-blank line; tids follow line order starting at 0.
/// Parse errors report the byte offset within the whole text.
pub fn parse_corpus_text(text: &str) -> Result<Vec<ParseTree>, CorpusError> {
    let mut trees = Vec::new();
    let mut line_start = 0;
    for line in text.split_inclusive('\n') {
        if !line.trim().is_empty() {
            let mut t = parse_bracketed(line).map_err(|e| match e {
                CorpusError::Parse { offset, msg } => CorpusError::Parse {
                    offset: offset + line_start,
                    msg,
                },
                other => other,
            })?;
            t.tid = trees.len() as u32;
            trees.push(number_nodes(t)?);
        }
        line_start += line.len();
    }
    Ok(trees)
}
