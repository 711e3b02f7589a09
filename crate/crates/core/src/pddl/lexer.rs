use std::fmt;

use super::{ParseError, ParseErrorKind};

/// 1-based line/column in the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum SExpr {
    Symbol(String, Pos),
    List(Vec<SExpr>, Pos),
}

impl SExpr {
    pub fn pos(&self) -> Pos {
        match self {
            SExpr::Symbol(_, p) | SExpr::List(_, p) => *p,
        }
    }

    pub fn symbol(&self) -> Option<&str> {
        match self {
            SExpr::Symbol(s, _) => Some(s),
            SExpr::List(..) => None,
        }
    }

    pub fn list(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List(items, _) => Some(items),
            SExpr::Symbol(..) => None,
        }
    }

    /// The lower-cased head symbol of a list, if any.
    pub fn head(&self) -> Option<String> {
        self.list()?.first()?.symbol().map(str::to_ascii_lowercase)
    }
}

/// Reads every top-level s-expression of `text`. `;` starts a comment.
pub(crate) fn read_all(text: &str) -> Result<Vec<SExpr>, ParseError> {
    let mut stack: Vec<(Vec<SExpr>, Pos)> = Vec::new();
    let mut top = Vec::new();
    let mut line = 1;
    let mut column = 0;
    let mut chars = text.chars().peekable();
    let mut symbol: Option<(String, Pos)> = None;

    fn flush(symbol: &mut Option<(String, Pos)>, stack: &mut [(Vec<SExpr>, Pos)], top: &mut Vec<SExpr>) {
        if let Some((s, p)) = symbol.take() {
            let expr = SExpr::Symbol(s, p);
            match stack.last_mut() {
                Some((items, _)) => items.push(expr),
                None => top.push(expr),
            }
        }
    }

    while let Some(c) = chars.next() {
        column += 1;
        let pos = Pos { line, column };
        match c {
            '\n' => {
                flush(&mut symbol, &mut stack, &mut top);
                line += 1;
                column = 0;
            }
            ';' => {
                flush(&mut symbol, &mut stack, &mut top);
                while let Some(&n) = chars.peek() {
                    if n == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            '(' => {
                flush(&mut symbol, &mut stack, &mut top);
                stack.push((Vec::new(), pos));
            }
            ')' => {
                flush(&mut symbol, &mut stack, &mut top);
                let (items, open) = stack.pop().ok_or(ParseError {
                    pos,
                    kind: ParseErrorKind::Lexical("unbalanced `)`".to_string()),
                })?;
                let expr = SExpr::List(items, open);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(expr),
                    None => top.push(expr),
                }
            }
            c if c.is_whitespace() => flush(&mut symbol, &mut stack, &mut top),
            c if c.is_control() => {
                return Err(ParseError { pos, kind: ParseErrorKind::Lexical(format!("unexpected character {c:?}")) })
            }
            c => match &mut symbol {
                Some((s, _)) => s.push(c),
                None => symbol = Some((c.to_string(), pos)),
            },
        }
    }
    flush(&mut symbol, &mut stack, &mut top);
    if let Some((_, open)) = stack.pop() {
        return Err(ParseError { pos: open, kind: ParseErrorKind::Lexical("unclosed `(`".to_string()) });
    }
    Ok(top)
}
