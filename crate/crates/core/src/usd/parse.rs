use super::{is_identifier, is_prim_path, is_property_name, Attribute, Prim, Specifier, UsdDocument, UsdError, Value, ValueType};

const HEADER: &str = "#usda 1.0";

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Asset(String),
    Path(String),
    Num(String),
    Punct(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, UsdError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    // header line was checked by the caller; skip it
    while i < chars.len() && chars[i] != '\n' {
        i += 1;
    }

    let err = |line, column, message: String| UsdError::Lex { line, column, message };
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (tl, tc) = (line, col);
        let start = i;
        let tok = if c == '.' && !chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
            i += 1;
            Tok::Punct('.')
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == ':') {
                i += 1;
            }
            Tok::Ident(chars[start..i].iter().collect())
        } else if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' {
            i += 1;
            if c == '-' || c == '+' {
                if chars[i..].starts_with(&['i', 'n', 'f']) {
                    i += 3;
                }
            }
            while i < chars.len()
                && (chars[i].is_ascii_alphanumeric() || chars[i] == '.' || ((chars[i] == '-' || chars[i] == '+') && matches!(chars[i - 1], 'e' | 'E')))
            {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            if !valid_number(&s) {
                return Err(err(tl, tc, format!("malformed number `{s}`")));
            }
            Tok::Num(s)
        } else if c == '"' || c == '\'' {
            if chars[i..].starts_with(&[c, c, c]) {
                return Err(UsdError::Unsupported {
                    line: tl,
                    column: tc,
                    construct: "multi-line string".into(),
                });
            }
            i += 1;
            let mut s = String::new();
            loop {
                let Some(&d) = chars.get(i) else {
                    return Err(err(tl, tc, "unterminated string".into()));
                };
                i += 1;
                if d == c {
                    break;
                }
                match d {
                    '\n' => return Err(err(tl, tc, "newline in string".into())),
                    '\\' => {
                        let e = chars.get(i).copied();
                        i += 1;
                        s.push(match e {
                            Some('n') => '\n',
                            Some('t') => '\t',
                            Some('r') => '\r',
                            Some('\\') => '\\',
                            Some('"') => '"',
                            Some('\'') => '\'',
                            other => {
                                return Err(err(tl, tc, format!("bad escape `\\{}`", other.unwrap_or(' '))));
                            }
                        });
                    }
                    d => s.push(d),
                }
            }
            Tok::Str(s)
        } else if c == '@' {
            if chars[i..].starts_with(&['@', '@', '@']) {
                return Err(UsdError::Unsupported {
                    line: tl,
                    column: tc,
                    construct: "triple-quoted asset path".into(),
                });
            }
            i += 1;
            let s0 = i;
            while i < chars.len() && chars[i] != '@' && chars[i] != '\n' {
                i += 1;
            }
            if chars.get(i) != Some(&'@') {
                return Err(err(tl, tc, "unterminated asset path".into()));
            }
            let s: String = chars[s0..i].iter().collect();
            i += 1;
            Tok::Asset(s)
        } else if c == '<' {
            i += 1;
            let s0 = i;
            while i < chars.len() && chars[i] != '>' && chars[i] != '\n' {
                i += 1;
            }
            if chars.get(i) != Some(&'>') {
                return Err(err(tl, tc, "unterminated path".into()));
            }
            let s: String = chars[s0..i].iter().collect();
            i += 1;
            Tok::Path(s)
        } else if "(){}[]=,:;".contains(c) {
            i += 1;
            Tok::Punct(c)
        } else {
            return Err(err(tl, tc, format!("unexpected character `{c}`")));
        };
        col += i - start;
        out.push(Token { tok, line: tl, column: tc });
    }
    Ok(out)
}

fn valid_number(s: &str) -> bool {
    let t = s.strip_prefix(['-', '+']).unwrap_or(s);
    if t == "inf" {
        return true;
    }
    let (mant, exp) = match t.find(['e', 'E']) {
        Some(k) => (&t[..k], Some(&t[k + 1..])),
        None => (t, None),
    };
    let digits = mant.chars().filter(|c| c.is_ascii_digit()).count();
    let dots = mant.chars().filter(|&c| c == '.').count();
    let mant_ok = digits > 0 && dots <= 1 && digits + dots == mant.len();
    let exp_ok = exp.is_none_or(|e| {
        let e = e.strip_prefix(['-', '+']).unwrap_or(e);
        !e.is_empty() && e.chars().all(|c| c.is_ascii_digit())
    });
    mant_ok && exp_ok
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    eof: (usize, usize),
}

type R<T> = Result<T, UsdError>;

/// Parses the supported USDA subset. The first line must be exactly
/// `#usda 1.0`; other `#` lines are comments and are dropped.
pub fn parse_usda(text: &str) -> Result<UsdDocument, UsdError> {
    let first = text.split('\n').next().unwrap_or("");
    if first.trim_end_matches('\r') != HEADER {
        return Err(UsdError::Syntax {
            line: 1,
            column: 1,
            message: format!("expected header `{HEADER}`"),
        });
    }
    let toks = lex(text)?;
    let lines = text.split('\n').count();
    let mut p = Parser {
        toks,
        pos: 0,
        eof: (lines, text.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1),
    };
    let mut doc = UsdDocument::new();
    if p.peek_punct('(') {
        p.layer_metadata(&mut doc)?;
    }
    while !p.at_end() {
        let prim = p.prim()?;
        doc.root.children.push(prim);
    }
    doc.validate()?;
    Ok(doc)
}

impl Parser {
    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map_or(self.eof, |t| (t.line, t.column))
    }

    fn syntax<T>(&self, message: impl Into<String>) -> R<T> {
        let (line, column) = self.here();
        Err(UsdError::Syntax {
            line,
            column,
            message: message.into(),
        })
    }

    fn unsupported<T>(&self, construct: impl Into<String>) -> R<T> {
        let (line, column) = self.here();
        Err(UsdError::Unsupported {
            line,
            column,
            construct: construct.into(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_punct(&self, c: char) -> bool {
        self.peek() == Some(&Tok::Punct(c))
    }

    fn peek_ident(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(i)) if i == s)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        self.pos += 1;
        t
    }

    fn expect_punct(&mut self, c: char) -> R<()> {
        if self.peek_punct(c) {
            self.pos += 1;
            Ok(())
        } else {
            self.syntax(format!("expected `{c}`{}", self.found()))
        }
    }

    fn found(&self) -> String {
        match self.peek() {
            None => ", found end of file".into(),
            Some(Tok::Ident(s)) => format!(", found `{s}`"),
            Some(Tok::Str(s)) => format!(", found string {s:?}"),
            Some(Tok::Num(s)) => format!(", found `{s}`"),
            Some(Tok::Punct(c)) => format!(", found `{c}`"),
            Some(Tok::Asset(s)) => format!(", found @{s}@"),
            Some(Tok::Path(s)) => format!(", found <{s}>"),
        }
    }

    fn ident(&mut self) -> R<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.syntax(format!("expected identifier{}", self.found())),
        }
    }

    fn string(&mut self) -> R<String> {
        match self.peek() {
            Some(Tok::Str(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.syntax(format!("expected string{}", self.found())),
        }
    }

    fn layer_metadata(&mut self, doc: &mut UsdDocument) -> R<()> {
        self.expect_punct('(')?;
        while !self.peek_punct(')') {
            if matches!(self.peek(), Some(Tok::Str(_))) {
                return self.unsupported("doc");
            }
            let key = self.ident()?;
            match key.as_str() {
                "upAxis" => {
                    self.expect_punct('=')?;
                    let v = self.string()?;
                    if v != "Z" {
                        return Err(UsdError::Invalid(format!("upAxis must be \"Z\", found {v:?}")));
                    }
                }
                "metersPerUnit" => {
                    self.expect_punct('=')?;
                    let v = self.real()?;
                    if v != 1.0 {
                        return Err(UsdError::Invalid(format!("metersPerUnit must be 1, found {v}")));
                    }
                }
                "defaultPrim" => {
                    self.expect_punct('=')?;
                    doc.default_prim = Some(self.string()?);
                }
                _ => {
                    self.pos -= 1;
                    return self.unsupported(key);
                }
            }
        }
        self.expect_punct(')')
    }

    fn prim(&mut self) -> R<Prim> {
        let spec = match self.peek() {
            Some(Tok::Ident(s)) if s == "def" => Specifier::Def,
            Some(Tok::Ident(s)) if s == "over" => Specifier::Over,
            Some(Tok::Ident(s)) if s == "class" => return self.unsupported("class"),
            _ => return self.syntax(format!("expected `def` or `over`{}", self.found())),
        };
        self.pos += 1;
        let type_name = match self.peek() {
            Some(Tok::Ident(_)) => Some(self.ident()?),
            _ => None,
        };
        let name = self.string()?;
        if !is_identifier(&name) {
            self.pos -= 1;
            return self.syntax(format!("invalid prim name {name:?}"));
        }
        let mut prim = Prim {
            specifier: spec,
            name,
            type_name,
            ..Prim::default()
        };
        if self.peek_punct('(') {
            self.prim_metadata(&mut prim)?;
        }
        self.expect_punct('{')?;
        loop {
            match self.peek() {
                Some(Tok::Punct('}')) => {
                    self.pos += 1;
                    break;
                }
                None => return self.syntax("expected `}`, found end of file"),
                Some(Tok::Ident(s)) => match s.as_str() {
                    "def" | "over" | "class" => {
                        let c = self.prim()?;
                        prim.children.push(c);
                    }
                    "variantSet" | "variantSets" | "variants" => {
                        return self.unsupported("variantSet");
                    }
                    "rel" => self.relationship(&mut prim)?,
                    _ => self.attribute(&mut prim)?,
                },
                _ => return self.syntax(format!("expected property or prim{}", self.found())),
            }
        }
        Ok(prim)
    }

    fn prim_metadata(&mut self, prim: &mut Prim) -> R<()> {
        self.expect_punct('(')?;
        while !self.peek_punct(')') {
            let mut key = self.ident()?;
            let mut listop = None;
            if matches!(key.as_str(), "prepend" | "append" | "add" | "delete" | "reorder") {
                listop = Some(key);
                key = self.ident()?;
            }
            match key.as_str() {
                "apiSchemas" | "references" => {}
                _ => {
                    self.pos -= 1;
                    return self.unsupported(key);
                }
            }
            if let Some(op) = listop.filter(|o| o != "prepend") {
                self.pos -= 2;
                return self.unsupported(format!("{op} {key}"));
            }
            self.expect_punct('=')?;
            if key == "apiSchemas" {
                if !prim.api_schemas.is_empty() {
                    return self.syntax("duplicate apiSchemas");
                }
                self.expect_punct('[')?;
                let items = self.list(|p| p.string())?;
                if items.is_empty() {
                    return self.syntax("empty apiSchemas list");
                }
                prim.api_schemas = items;
            } else {
                if prim.references.is_some() {
                    return self.syntax("duplicate references");
                }
                let bracketed = self.peek_punct('[');
                if bracketed {
                    self.pos += 1;
                }
                let asset = match self.peek() {
                    Some(Tok::Asset(a)) => a.clone(),
                    Some(Tok::Path(_)) => return self.unsupported("internal reference"),
                    _ => return self.syntax(format!("expected asset path{}", self.found())),
                };
                self.pos += 1;
                if matches!(self.peek(), Some(Tok::Path(_))) {
                    return self.unsupported("reference prim path");
                }
                if bracketed {
                    if self.peek_punct(',') {
                        return self.unsupported("multiple references");
                    }
                    self.expect_punct(']')?;
                }
                prim.references = Some(asset);
            }
        }
        self.expect_punct(')')
    }

    fn relationship(&mut self, prim: &mut Prim) -> R<()> {
        self.pos += 1;
        let name = self.ident()?;
        if !is_property_name(&name) {
            self.pos -= 1;
            return self.syntax(format!("invalid relationship name `{name}`"));
        }
        if prim.relationships.contains_key(&name) || prim.attributes.contains_key(&name) {
            self.pos -= 1;
            return self.syntax(format!("duplicate property `{name}`"));
        }
        let mut target = None;
        if self.peek_punct('=') {
            self.pos += 1;
            match self.peek() {
                Some(Tok::Path(t)) => {
                    if !is_prim_path(t) {
                        return self.syntax(format!("invalid target path <{t}>"));
                    }
                    target = Some(t.clone());
                    self.pos += 1;
                }
                Some(Tok::Punct('[')) => return self.unsupported("relationship target list"),
                _ => return self.syntax(format!("expected target path{}", self.found())),
            }
        }
        if self.peek_punct('(') {
            return self.unsupported("relationship metadata");
        }
        prim.relationships.insert(name, target);
        Ok(())
    }

    fn attribute(&mut self, prim: &mut Prim) -> R<()> {
        let mut custom = false;
        let mut uniform = false;
        loop {
            if self.peek_ident("custom") && !custom {
                custom = true;
                self.pos += 1;
            } else if self.peek_ident("uniform") && !uniform {
                uniform = true;
                self.pos += 1;
            } else if self.peek_ident("varying") || self.peek_ident("config") {
                let q = self.ident()?;
                self.pos -= 1;
                return self.unsupported(q);
            } else {
                break;
            }
        }
        let mut tname = self.ident()?;
        if self.peek_punct('[') {
            self.pos += 1;
            self.expect_punct(']')?;
            tname.push_str("[]");
        }
        let Some(value_type) = ValueType::from_name(&tname) else {
            self.pos -= if tname.ends_with("[]") { 3 } else { 1 };
            return self.unsupported(format!("type {tname}"));
        };
        let name = self.ident()?;
        if !is_property_name(&name) {
            self.pos -= 1;
            return self.syntax(format!("invalid attribute name `{name}`"));
        }
        if self.peek_punct('.') {
            self.pos += 1;
            let suffix = self.ident()?;
            self.pos -= 1;
            return match suffix.as_str() {
                "timeSamples" | "connect" | "spline" => self.unsupported(suffix),
                _ => self.syntax(format!("unexpected `.{suffix}`")),
            };
        }
        if prim.attributes.contains_key(&name) || prim.relationships.contains_key(&name) {
            return self.syntax(format!("duplicate property `{name}`"));
        }
        let mut value = None;
        if self.peek_punct('=') {
            self.pos += 1;
            if self.peek_ident("None") {
                return self.unsupported("None");
            }
            value = Some(self.value(value_type)?);
        }
        if self.peek_punct('(') {
            return self.unsupported("attribute metadata");
        }
        prim.attributes.insert(
            name,
            Attribute {
                value_type,
                value,
                custom,
                uniform,
            },
        );
        Ok(())
    }

    fn value(&mut self, t: ValueType) -> R<Value> {
        Ok(match t {
            ValueType::Bool => match self.next() {
                Some(Tok::Ident(s)) if s == "true" => Value::Bool(true),
                Some(Tok::Ident(s)) if s == "false" => Value::Bool(false),
                Some(Tok::Num(s)) if s == "1" => Value::Bool(true),
                Some(Tok::Num(s)) if s == "0" => Value::Bool(false),
                _ => {
                    self.pos -= 1;
                    return self.syntax("expected bool");
                }
            },
            ValueType::Int => Value::Int(self.int()?),
            ValueType::Float | ValueType::Double => Value::Real(self.real()?),
            ValueType::String | ValueType::Token => Value::Text(self.string()?),
            ValueType::Double2 => Value::Vec2(self.tuple::<2>()?),
            ValueType::Float3 | ValueType::Double3 => Value::Vec3(self.tuple::<3>()?),
            ValueType::Quatf => Value::Vec4(self.tuple::<4>()?),
            ValueType::Matrix4d => {
                self.expect_punct('(')?;
                let mut rows = [[0.0; 4]; 4];
                for (i, row) in rows.iter_mut().enumerate() {
                    if i > 0 {
                        self.expect_punct(',')?;
                    }
                    *row = self.tuple::<4>()?;
                }
                self.expect_punct(')')?;
                Value::Matrix(rows)
            }
            ValueType::IntArray => {
                self.expect_punct('[')?;
                Value::IntArray(self.list(|p| p.int())?)
            }
            ValueType::Float3Array | ValueType::Point3fArray => {
                self.expect_punct('[')?;
                Value::Vec3Array(self.list(|p| p.tuple::<3>())?)
            }
            ValueType::TokenArray => {
                self.expect_punct('[')?;
                Value::TextArray(self.list(|p| p.string())?)
            }
        })
    }

    /// Items after an opening `[` up to and including the closing `]`.
    fn list<T>(&mut self, mut item: impl FnMut(&mut Self) -> R<T>) -> R<Vec<T>> {
        let mut out = Vec::new();
        loop {
            if self.peek_punct(']') {
                self.pos += 1;
                return Ok(out);
            }
            out.push(item(self)?);
            if self.peek_punct(',') {
                self.pos += 1;
            } else if !self.peek_punct(']') {
                return self.syntax(format!("expected `,` or `]`{}", self.found()));
            }
        }
    }

    fn tuple<const N: usize>(&mut self) -> R<[f64; N]> {
        self.expect_punct('(')?;
        let mut out = [0.0; N];
        for (i, x) in out.iter_mut().enumerate() {
            if i > 0 {
                self.expect_punct(',')?;
            }
            *x = self.real()?;
        }
        self.expect_punct(')')?;
        Ok(out)
    }

    fn real(&mut self) -> R<f64> {
        match self.peek() {
            Some(Tok::Num(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(parse_real(&s))
            }
            Some(Tok::Ident(s)) if s == "inf" || s == "nan" => {
                let v = if s == "inf" { f64::INFINITY } else { f64::NAN };
                self.pos += 1;
                Ok(v)
            }
            _ => self.syntax(format!("expected number{}", self.found())),
        }
    }

    fn int(&mut self) -> R<i64> {
        match self.peek() {
            Some(Tok::Num(s)) => match s.parse::<i64>() {
                Ok(v) => {
                    self.pos += 1;
                    Ok(v)
                }
                Err(_) => self.syntax(format!("expected integer, found `{s}`")),
            },
            _ => self.syntax(format!("expected integer{}", self.found())),
        }
    }
}

fn parse_real(s: &str) -> f64 {
    match s {
        "inf" | "+inf" => f64::INFINITY,
        "-inf" => f64::NEG_INFINITY,
        _ => s.parse().expect("validated by the lexer"),
    }
}
