//! Newick dialect: genuine leaves are labelled `L`, truncation leaves `X`,
//! internal nodes `I`. The root carries no label or length; a bare root is `;`.

use super::{NodeId, Tree};
use crate::error::{Error, Result};

/// Canonical text: children ordered by subtree height, then edge length, then text.
pub fn to_newick(t: &Tree) -> String {
    let hb = t.heights_below();
    let mut text: Vec<Option<String>> = vec![None; t.len()];
    for id in (1..t.len()).rev() {
        let node = t.node(id);
        let mut s = String::new();
        if node.children.is_empty() {
            s.push(if node.truncated { 'X' } else { 'L' });
        } else {
            s.push('(');
            s.push_str(&joined_children(t, id, &hb, &mut text));
            s.push_str(")I");
        }
        s.push(':');
        s.push_str(&format!("{}", node.edge_length));
        text[id] = Some(s);
    }
    if t.children(0).is_empty() {
        return ";".to_string();
    }
    format!("({});", joined_children(t, 0, &hb, &mut text))
}

fn joined_children(t: &Tree, id: NodeId, hb: &[f64], text: &mut [Option<String>]) -> String {
    let mut parts: Vec<(f64, f64, String)> = t
        .children(id)
        .iter()
        .map(|&c| (hb[c] + t.edge_length(c), t.edge_length(c), text[c].take().unwrap()))
        .collect();
    parts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then_with(|| a.2.cmp(&b.2)));
    let strings: Vec<String> = parts.into_iter().map(|p| p.2).collect();
    strings.join(",")
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse { offset: self.pos, message: message.into() })
    }

    fn expect(&mut self, byte: u8) -> Result<()> {
        match self.peek() {
            Some(b) if b == byte => {
                self.pos += 1;
                Ok(())
            }
            Some(b) => self.error(format!("expected '{}', found '{}'", byte as char, b as char)),
            None => self.error(format!("expected '{}', found end of input", byte as char)),
        }
    }

    fn label(&mut self) -> &'a str {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && !b"(),:;".contains(&self.bytes[self.pos]) && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).unwrap_or("")
    }

    fn length(&mut self) -> Result<f64> {
        self.expect(b':')?;
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && matches!(self.bytes[self.pos], b'0'..=b'9' | b'.' | b'e' | b'E' | b'+' | b'-') {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap_or("");
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
            _ => Err(Error::Parse { offset: start, message: format!("invalid edge length '{text}'") }),
        }
    }
}

/// Parse the dialect written by [`to_newick`].
pub fn from_newick(text: &str) -> Result<Tree> {
    let mut cur = Cursor { bytes: text.as_bytes(), pos: 0 };
    let mut tree = Tree::new();
    if cur.peek() == Some(b';') {
        cur.pos += 1;
        return finish(cur, tree);
    }
    cur.expect(b'(')?;
    let mut open: Vec<NodeId> = vec![0];
    loop {
        // A node starts here.
        if cur.peek() == Some(b'(') {
            cur.pos += 1;
            let id = tree.add_child(*open.last().unwrap(), 0.0);
            open.push(id);
            continue;
        }
        let parent = *open.last().unwrap();
        let label = cur.label();
        let length = cur.length()?;
        let id = tree.add_child(parent, length);
        if label == "X" {
            tree.mark_truncated(id);
        }
        // Close as many nodes as the input does.
        loop {
            match cur.peek() {
                Some(b',') => {
                    cur.pos += 1;
                    break;
                }
                Some(b')') => {
                    cur.pos += 1;
                    let closed = open.pop().unwrap();
                    if closed == 0 {
                        cur.expect(b';')?;
                        return finish(cur, tree);
                    }
                    cur.label();
                    let length = cur.length()?;
                    tree.set_edge_length(closed, length);
                }
                Some(b) => return cur.error(format!("expected ',' or ')', found '{}'", b as char)),
                None => return cur.error("expected ',' or ')', found end of input"),
            }
        }
    }
}

fn finish(mut cur: Cursor<'_>, tree: Tree) -> Result<Tree> {
    match cur.peek() {
        None => Ok(tree),
        Some(_) => cur.error("trailing characters after ';'"),
    }
}
