use super::{Arg, Call, Import, Literal, ScriptProgram, Violation, ViolationReason};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Name(String),
    Str(String),
    Num(f64),
    Punct(char),
    Other(char),
}

/// Splits a program into import lines and call statements.
///
/// The language is one statement per line: `import <module>` or
/// `callee(arg, ...)` where every argument should be a string, a number or a
/// 3-tuple of numbers. Anything else is recorded as a `parse_error`
/// violation for that line; arguments that are well-formed but not literals
/// are kept as [`Arg::NonLiteral`] for the validator. Never fails.
pub fn parse_script(text: &str) -> ScriptProgram {
    let mut program = ScriptProgram::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let toks = match lex_line(raw) {
            Ok(t) => t,
            Err(msg) => {
                program.parse_errors.push(Violation::new(line, "", ViolationReason::ParseError, msg));
                continue;
            }
        };
        if toks.is_empty() {
            continue;
        }
        if matches!(&toks[0], Tok::Name(n) if n == "import" || n == "from") {
            program.imports.push(Import {
                line,
                text: raw.split('#').next().unwrap_or("").trim().to_string(),
                module: match toks.as_slice() {
                    [Tok::Name(kw), Tok::Name(m)] if kw == "import" => Some(m.clone()),
                    _ => None,
                },
            });
            continue;
        }
        match parse_call(&toks) {
            Ok((callee, args)) => program.statements.push(Call { line, callee, args }),
            Err(msg) => {
                let callee = match &toks[0] {
                    Tok::Name(n) => n.clone(),
                    _ => String::new(),
                };
                program
                    .parse_errors
                    .push(Violation::new(line, &callee, ViolationReason::ParseError, msg));
            }
        }
    }
    program
}

fn lex_line(line: &str) -> Result<Vec<Tok>, String> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '#' {
            break;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let s = i;
            loop {
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                // dotted name continues only with another identifier
                if i + 1 < chars.len() && chars[i] == '.' && (chars[i + 1].is_ascii_alphabetic() || chars[i + 1] == '_') {
                    i += 1;
                } else {
                    break;
                }
            }
            out.push(Tok::Name(chars[s..i].iter().collect()));
        } else if c.is_ascii_digit()
            || ((c == '-' || c == '+' || c == '.') && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit() || *d == '.'))
        {
            let s = i;
            i += 1;
            while i < chars.len()
                && (chars[i].is_ascii_alphanumeric()
                    || chars[i] == '.'
                    || ((chars[i] == '-' || chars[i] == '+') && matches!(chars[i - 1], 'e' | 'E')))
            {
                i += 1;
            }
            let text: String = chars[s..i].iter().collect();
            match parse_number(&text) {
                Some(v) => out.push(Tok::Num(v)),
                None => out.push(Tok::Other('?')),
            }
        } else if c == '"' || c == '\'' {
            i += 1;
            let mut s = String::new();
            loop {
                let Some(&d) = chars.get(i) else {
                    return Err("unterminated string".into());
                };
                i += 1;
                if d == c {
                    break;
                }
                if d == '\\' {
                    let e = chars.get(i).copied();
                    i += 1;
                    s.push(match e {
                        Some('n') => '\n',
                        Some('t') => '\t',
                        Some('\\') => '\\',
                        Some('"') => '"',
                        Some('\'') => '\'',
                        _ => return Err("unsupported escape in string".into()),
                    });
                } else {
                    s.push(d);
                }
            }
            out.push(Tok::Str(s));
        } else if "(),".contains(c) {
            out.push(Tok::Punct(c));
            i += 1;
        } else {
            out.push(Tok::Other(c));
            i += 1;
        }
    }
    Ok(out)
}

/// Plain decimal or exponent notation only; rejects `inf`, `nan`, hex,
/// underscores and the like.
fn parse_number(s: &str) -> Option<f64> {
    let t = s.strip_prefix(['-', '+']).unwrap_or(s);
    let (mant, exp) = match t.find(['e', 'E']) {
        Some(k) => (&t[..k], Some(&t[k + 1..])),
        None => (t, None),
    };
    let digits = mant.chars().filter(|c| c.is_ascii_digit()).count();
    let dots = mant.chars().filter(|&c| c == '.').count();
    if digits == 0 || dots > 1 || digits + dots != mant.len() {
        return None;
    }
    if let Some(e) = exp {
        let e = e.strip_prefix(['-', '+']).unwrap_or(e);
        if e.is_empty() || !e.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
    }
    s.parse().ok().filter(|v: &f64| v.is_finite())
}

fn parse_call(toks: &[Tok]) -> Result<(String, Vec<Arg>), String> {
    let Tok::Name(callee) = &toks[0] else {
        return Err("statement must start with a call".into());
    };
    if toks.get(1) != Some(&Tok::Punct('(')) {
        return Err(format!("expected `(` after `{callee}`"));
    }
    // find the matching close paren and split args at depth 1
    let mut depth = 0usize;
    let mut close = None;
    let mut spans: Vec<(usize, usize)> = Vec::new();
    let mut start = 2;
    for (k, t) in toks.iter().enumerate().skip(1) {
        match t {
            Tok::Punct('(') => depth += 1,
            Tok::Punct(')') => {
                depth -= 1;
                if depth == 0 {
                    if k > start || !spans.is_empty() {
                        spans.push((start, k));
                    }
                    close = Some(k);
                    break;
                }
            }
            Tok::Punct(',') if depth == 1 => {
                spans.push((start, k));
                start = k + 1;
            }
            _ => {}
        }
    }
    let Some(close) = close else {
        return Err("unbalanced parentheses".into());
    };
    if close + 1 != toks.len() {
        return Err("unexpected text after the call".into());
    }
    let mut args = Vec::new();
    for (a, b) in spans {
        if a == b {
            return Err("empty argument".into());
        }
        args.push(arg(&toks[a..b]).unwrap_or_else(|| Arg::NonLiteral(describe(&toks[a..b]))));
    }
    Ok((callee.clone(), args))
}

fn arg(toks: &[Tok]) -> Option<Arg> {
    Some(Arg::Literal(match toks {
        [Tok::Str(s)] => Literal::Str(s.clone()),
        [Tok::Num(x)] => Literal::Num(*x),
        [Tok::Punct('('), Tok::Num(a), Tok::Punct(','), Tok::Num(b), Tok::Punct(','), Tok::Num(c), Tok::Punct(')')] => {
            Literal::Tuple3([*a, *b, *c])
        }
        _ => return None,
    }))
}

fn describe(toks: &[Tok]) -> String {
    let mut s = String::new();
    for t in toks {
        match t {
            Tok::Name(n) => s.push_str(n),
            Tok::Str(x) => s.push_str(&format!("{x:?}")),
            Tok::Num(x) => s.push_str(&x.to_string()),
            Tok::Punct(c) | Tok::Other(c) => s.push(*c),
        }
    }
    s
}
