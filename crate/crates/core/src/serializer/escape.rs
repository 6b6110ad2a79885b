//! Field escaping shared by every section of the grammar.
//!
//! Escaped text never contains a raw newline or the field separator, and
//! every `<` in it is preceded by a backslash, so a line starting with `<` is
//! always a tag.

/// Field separator (SYMBOL FOR UNIT SEPARATOR).
pub const SEP: char = '\u{241F}';

pub fn escape(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for c in raw.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            SEP => out.push_str("\\f"),
            '<' => out.push_str("\\<"),
            c => out.push(c),
        }
    }
    out
}

/// Inverse of [`escape`]. Unknown escape sequences are kept literally and
/// reported through the returned flag.
pub fn unescape(text: &str) -> (String, bool) {
    let mut out = String::with_capacity(text.len());
    let mut clean = true;
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('f') => out.push(SEP),
            Some('<') => out.push('<'),
            Some(other) => {
                clean = false;
                out.push('\\');
                out.push(other);
            }
            None => {
                clean = false;
                out.push('\\');
            }
        }
    }
    (out, clean)
}

/// Joins escaped fields with the separator.
pub fn join_fields<'a>(fields: impl IntoIterator<Item = &'a str>) -> String {
    let mut line = String::new();
    for (i, f) in fields.into_iter().enumerate() {
        if i > 0 {
            line.push(SEP);
        }
        line.push_str(&escape(f));
    }
    line
}

/// Splits a line on the separator and unescapes every field.
pub fn split_fields(line: &str) -> (Vec<String>, bool) {
    let mut clean = true;
    let fields = line
        .split(SEP)
        .map(|f| {
            let (s, ok) = unescape(f);
            clean &= ok;
            s
        })
        .collect();
    (fields, clean)
}
