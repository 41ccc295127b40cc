use super::ParseError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    /// Identifiers, numerals and rationals such as `-1`, `2/3` or `0.5`.
    Word(String),
    /// A parenthesised comma list, e.g. `(0,-1,1)`, `(0, top)` or `(2,)`.
    Tuple(Vec<String>),
    /// Raw contents of a quantifier restriction `[x2y1]`.
    Restriction(String),
    /// `%name` at the start of a line.
    Command(String),
    LParen,
    RParen,
    Not,
    And,
    Or,
    Implies,
    Iff,
    At,
    NotAt,
    Adj,
    NotAdj,
    Eq,
    NotEq,
    Define,
    Dot,
    Semi,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("`{w}`"),
            Tok::Tuple(items) => format!("`({})`", items.join(",")),
            Tok::Restriction(r) => format!("`[{r}]`"),
            Tok::Command(c) => format!("`%{c}`"),
            other => format!("`{}`", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::Not => "!",
            Tok::And => "&",
            Tok::Or => "|",
            Tok::Implies => "->",
            Tok::Iff => "<->",
            Tok::At => "@",
            Tok::NotAt => "!@",
            Tok::Adj => "~",
            Tok::NotAdj => "!~",
            Tok::Eq => "=",
            Tok::NotEq => "!=",
            Tok::Define => ":=",
            Tok::Dot => ".",
            Tok::Semi => ";",
            _ => "",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Splits source text into tokens. Comments run from `--` to the end of the line.
pub fn tokenize(source: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = source.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let mut col = 1;
    let mut line_start = true;

    macro_rules! advance {
        ($n:expr) => {{
            for _ in 0..$n {
                if chars[i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let peek = |k: usize| chars.get(i + k).copied();
        if c == '\n' {
            advance!(1);
            line_start = true;
            continue;
        }
        if c.is_whitespace() {
            advance!(1);
            continue;
        }
        if c == '-' && peek(1) == Some('-') {
            while i < chars.len() && chars[i] != '\n' {
                advance!(1);
            }
            continue;
        }
        let was_line_start = line_start;
        line_start = false;
        let push = |out: &mut Vec<Token>, tok: Tok| out.push(Token { tok, line: tl, col: tc });

        if c == '%' {
            if !was_line_start {
                return Err(ParseError::new(tl, tc, "`%` commands must start a line"));
            }
            let start = i + 1;
            let mut j = start;
            while j < chars.len() && is_word_char(chars[j]) {
                j += 1;
            }
            if j == start {
                return Err(ParseError::new(tl, tc, "missing command name after `%`"));
            }
            let name: String = chars[start..j].iter().collect();
            advance!(j - i);
            push(&mut out, Tok::Command(name));
            continue;
        }
        if is_word_char(c) || (c == '-' && peek(1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            let mut j = i + 1;
            while j < chars.len() && is_word_char(chars[j]) {
                j += 1;
            }
            let numeric = chars[start..j].iter().enumerate().all(|(k, ch)| ch.is_ascii_digit() || (k == 0 && *ch == '-'));
            if numeric
                && j + 1 < chars.len()
                && (chars[j] == '/' || chars[j] == '.')
                && chars[j + 1].is_ascii_digit()
            {
                j += 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
            }
            let w: String = chars[start..j].iter().collect();
            advance!(j - i);
            push(&mut out, Tok::Word(w));
            continue;
        }
        if c == '(' {
            if let Some((items, len)) = scan_tuple(&chars[i..]) {
                advance!(len);
                push(&mut out, Tok::Tuple(items));
                continue;
            }
            advance!(1);
            push(&mut out, Tok::LParen);
            continue;
        }
        if c == '[' {
            let mut j = i + 1;
            while j < chars.len() && chars[j] != ']' && chars[j] != '\n' {
                j += 1;
            }
            if j >= chars.len() || chars[j] != ']' {
                return Err(ParseError::new(tl, tc, "unterminated `[`"));
            }
            let body: String = chars[i + 1..j].iter().filter(|c| !c.is_whitespace()).collect();
            advance!(j + 1 - i);
            push(&mut out, Tok::Restriction(body));
            continue;
        }
        let two: String = chars[i..(i + 3).min(chars.len())].iter().collect();
        let (tok, len) = if two.starts_with("<->") {
            (Tok::Iff, 3)
        } else if two.starts_with("->") {
            (Tok::Implies, 2)
        } else if two.starts_with("!@") {
            (Tok::NotAt, 2)
        } else if two.starts_with("!~") {
            (Tok::NotAdj, 2)
        } else if two.starts_with("!=") {
            (Tok::NotEq, 2)
        } else if two.starts_with(":=") {
            (Tok::Define, 2)
        } else {
            match c {
                ')' => (Tok::RParen, 1),
                '!' => (Tok::Not, 1),
                '&' => (Tok::And, 1),
                '|' => (Tok::Or, 1),
                '@' => (Tok::At, 1),
                '~' => (Tok::Adj, 1),
                '=' => (Tok::Eq, 1),
                '.' => (Tok::Dot, 1),
                ';' => (Tok::Semi, 1),
                other => return Err(ParseError::new(tl, tc, format!("illegal character `{other}`"))),
            }
        };
        advance!(len);
        push(&mut out, tok);
    }
    Ok(out)
}

/// Recognises `(w, w, ...)` with at least one comma and no nesting.
fn scan_tuple(chars: &[char]) -> Option<(Vec<String>, usize)> {
    let close = chars.iter().position(|&c| c == ')')?;
    let inner: String = chars[1..close].iter().collect();
    if inner.contains('(') || !inner.contains(',') {
        return None;
    }
    let mut items: Vec<String> = inner.split(',').map(|s| s.trim().to_string()).collect();
    if items.last().is_some_and(|s| s.is_empty()) {
        items.pop();
    }
    let valid = !items.is_empty()
        && items.iter().all(|s| {
            let body = s.strip_prefix('-').unwrap_or(s);
            !body.is_empty() && body.chars().all(is_word_char)
        });
    valid.then_some((items, close + 1))
}
