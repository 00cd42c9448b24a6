//! Line-oriented lexing of generator source: string literals and comments
//! are blanked out before any token is looked at.

/// Lexer state carried across lines (only triple-quoted strings span lines).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct LexState {
    open_triple: Option<char>,
}

/// Replaces string literals with spaces and drops `#` comments, returning
/// the code that remains on this line.
pub(crate) fn strip_line(state: &mut LexState, line: &str) -> String {
    let chars: Vec<char> = line.chars().collect();
    let mut out = String::with_capacity(line.len());
    let mut i = 0;
    let mut quote: Option<char> = None;

    while i < chars.len() {
        let c = chars[i];
        if let Some(q) = state.open_triple {
            if c == '\\' {
                out.push(' ');
                if i + 1 < chars.len() {
                    out.push(' ');
                }
                i += 2;
                continue;
            }
            if c == q && chars.get(i + 1) == Some(&q) && chars.get(i + 2) == Some(&q) {
                out.push_str("   ");
                state.open_triple = None;
                i += 3;
                continue;
            }
            out.push(' ');
            i += 1;
            continue;
        }
        if let Some(q) = quote {
            out.push(' ');
            if c == '\\' {
                if i + 1 < chars.len() {
                    out.push(' ');
                }
                i += 2;
                continue;
            }
            if c == q {
                quote = None;
            }
            i += 1;
            continue;
        }
        match c {
            '#' => break,
            '\'' | '"' => {
                if chars.get(i + 1) == Some(&c) && chars.get(i + 2) == Some(&c) {
                    state.open_triple = Some(c);
                    out.push_str("   ");
                    i += 3;
                } else {
                    quote = Some(c);
                    out.push(' ');
                    i += 1;
                }
            }
            _ => {
                out.push(c);
                i += 1;
            }
        }
    }
    out
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Names of every `identifier(` occurrence in stripped code, maximal munch.
/// Attribute calls such as `obj.fill(` yield the bare name `fill`.
pub(crate) fn call_names(code: &str) -> Vec<String> {
    let chars: Vec<char> = code.chars().collect();
    let mut names = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if is_ident_start(c) {
            let start = i;
            while i < chars.len() && is_ident_char(chars[i]) {
                i += 1;
            }
            if chars.get(i) == Some(&'(') {
                names.push(chars[start..i].iter().collect());
            }
        } else if c.is_ascii_digit() {
            // numeric literal: swallow trailing alphanumerics so `1e5` is one token
            while i < chars.len() && (is_ident_char(chars[i]) || chars[i] == '.') {
                i += 1;
            }
        } else {
            i += 1;
        }
    }
    names
}

/// Leading identifier of stripped code and the remainder after it.
pub(crate) fn leading_ident(code: &str) -> Option<(&str, &str)> {
    let t = code.trim_start();
    if !t.starts_with(is_ident_start) {
        return None;
    }
    let end = t.find(|c: char| !is_ident_char(c)).unwrap_or(t.len());
    Some((&t[..end], &t[end..]))
}

/// True when the line assigns to the bare name `go` (`go = ...`, not `go == ...`).
pub(crate) fn is_go_assignment(code: &str) -> bool {
    match leading_ident(code) {
        Some(("go", rest)) => {
            let rest = rest.trim_start();
            rest.starts_with('=') && !rest.starts_with("==")
        }
        _ => false,
    }
}

/// True when the code contains `&`, `|`, or a minus used as a binary operator.
pub(crate) fn has_infix_set_operator(code: &str) -> bool {
    if code.contains('&') || code.contains('|') {
        return true;
    }
    let chars: Vec<char> = code.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if c != '-' || chars.get(i + 1) == Some(&'>') {
            continue;
        }
        let prev = chars[..i].iter().rev().find(|c| !c.is_whitespace());
        if let Some(&p) = prev {
            if is_ident_char(p) || matches!(p, ')' | ']' | '}') {
                return true;
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strip(line: &str) -> String {
        strip_line(&mut LexState::default(), line)
    }

    #[test]
    fn strings_and_comments_are_blanked() {
        assert_eq!(strip("x = fill(g) # box(g)").trim_end(), "x = fill(g)");
        let line = "d = {'input': box(gi), \"crop(x)\": 1}";
        let s = strip(line);
        assert!(s.contains("box(gi)"));
        assert!(!s.contains("crop"));
        assert!(!s.contains("input"));
        assert_eq!(s.len(), line.len());
        assert_eq!(strip("s = 'a#b' + c").trim_end(), "s =       + c");
        assert_eq!(strip(r"s = 'it\'s' + f(x)").trim_end(), "s =         + f(x)");
    }

    #[test]
    fn triple_quoted_strings_span_lines() {
        let mut st = LexState::default();
        assert_eq!(strip_line(&mut st, "    \"\"\"docstring with fill(").trim(), "");
        assert_eq!(strip_line(&mut st, "    still box(x) inside").trim(), "");
        assert_eq!(strip_line(&mut st, "    end\"\"\" ; y = crop(g)").trim(), "; y = crop(g)");
        assert_eq!(st, LexState::default());
    }

    #[test]
    fn call_names_use_maximal_munch() {
        assert_eq!(call_names("go = paint(go, box(obj))"), vec!["paint", "box"]);
        assert_eq!(call_names("x = obj.fill(a)"), vec!["fill"]);
        assert_eq!(call_names("x = fill (a)"), Vec::<String>::new());
        assert_eq!(call_names("x = 1e5(a) + rot90(g)"), vec!["rot90"]);
        assert_eq!(call_names("x = a[0](b)"), Vec::<String>::new());
    }

    #[test]
    fn go_assignment_detection() {
        assert!(is_go_assignment("    go = fill(go, c, ixs)"));
        assert!(is_go_assignment("go=paint(go, obj)"));
        assert!(!is_go_assignment("    go == gi"));
        assert!(!is_go_assignment("    gone = fill(a)"));
        assert!(!is_go_assignment("    x = go"));
        assert!(!is_go_assignment("    go, gi = a, b"));
    }

    #[test]
    fn set_operator_detection() {
        assert!(has_infix_set_operator("a = set(x) & set(y)"));
        assert!(has_infix_set_operator("a = x | y"));
        assert!(has_infix_set_operator("a = set(x) - y"));
        assert!(has_infix_set_operator("a = f(x) -set(y)"));
        assert!(!has_infix_set_operator("a = -1"));
        assert!(!has_infix_set_operator("a = f(x, -1)"));
        assert!(!has_infix_set_operator("def f(x) -> int:"));
    }
}
