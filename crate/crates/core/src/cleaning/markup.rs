//! HTML residue removal.

const NAMED_ENTITIES: &[(&str, char)] = &[
    ("amp", '&'),
    ("lt", '<'),
    ("gt", '>'),
    ("quot", '"'),
    ("apos", '\''),
    ("nbsp", '\u{a0}'),
    ("ndash", '–'),
    ("mdash", '\u{2014}'),
    ("hellip", '…'),
    ("lsquo", '‘'),
    ("rsquo", '’'),
    ("ldquo", '“'),
    ("rdquo", '”'),
    ("laquo", '«'),
    ("raquo", '»'),
    ("middot", '·'),
    ("copy", '©'),
    ("reg", '®'),
    ("trade", '™'),
    ("deg", '°'),
    ("times", '×'),
];

/// Removes `<...>` tags, decodes named and numeric character entities, drops
/// control and zero-width characters, and collapses whitespace.
///
/// Passes repeat until the text stops changing, so decoded text that itself
/// looks like markup (`&lt;b&gt;`) is also removed and the function is
/// idempotent. Punctuation is left alone.
pub fn strip_markup(text: &str) -> String {
    let mut current = strip_once(text);
    loop {
        let next = strip_once(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}

fn strip_once(text: &str) -> String {
    let untagged = remove_tags(text);
    let decoded = decode_entities(&untagged);
    let mut out = String::with_capacity(decoded.len());
    for word in decoded
        .chars()
        .filter_map(|c| {
            if c.is_whitespace() {
                Some(' ')
            } else if c.is_control() || matches!(c, '\u{200B}' | '\u{FEFF}' | '\u{2060}') {
                None
            } else {
                Some(c)
            }
        })
        .collect::<String>()
        .split_whitespace()
    {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

fn remove_tags(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(pos) = rest.find('<') {
        out.push_str(&rest[..pos]);
        let after = &rest[pos + 1..];
        let opens_tag = after
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic() || matches!(c, '/' | '!' | '?'));
        let close = after.find(['>', '<']);
        match close {
            Some(end) if opens_tag && after.as_bytes()[end] == b'>' => {
                // A tag separates words: `a<br>b` should not become `ab`.
                out.push(' ');
                rest = &after[end + 1..];
            }
            _ => {
                out.push('<');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

fn decode_entity(body: &str) -> Option<char> {
    if let Some(num) = body.strip_prefix('#') {
        let code = match num.strip_prefix(['x', 'X']) {
            Some(hex) => u32::from_str_radix(hex, 16).ok()?,
            None => num.parse::<u32>().ok()?,
        };
        return char::from_u32(code);
    }
    NAMED_ENTITIES
        .iter()
        .find(|(name, _)| *name == body)
        .map(|&(_, c)| c)
}

fn decode_entities(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(pos) = rest.find('&') {
        out.push_str(&rest[..pos]);
        let after = &rest[pos + 1..];
        let decoded = after
            .char_indices()
            .take(12)
            .find(|&(_, c)| c == ';')
            .and_then(|(end, _)| decode_entity(&after[..end]).map(|c| (c, end)));
        match decoded {
            Some((c, end)) => {
                out.push(c);
                rest = &after[end + 1..];
            }
            None => {
                out.push('&');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decodes_entities() {
        assert_eq!(strip_markup("a &amp; b"), "a & b");
        assert_eq!(strip_markup("it&#39;s &#x4F60;&#22909;"), "it's 你好");
        assert_eq!(strip_markup("x&nbsp;&nbsp;y"), "x y");
    }

    #[test]
    fn removes_tags() {
        assert_eq!(strip_markup("<b>xin chào</b>"), "xin chào");
        assert_eq!(strip_markup("<p class=\"x\">一</p><br/>二"), "一 二");
        assert_eq!(strip_markup("<!-- note -->text"), "text");
    }

    #[test]
    fn collapses_whitespace() {
        assert_eq!(strip_markup("a\t\tb  c"), "a b c");
        assert_eq!(strip_markup("  \r\n lead and trail \n"), "lead and trail");
    }

    #[test]
    fn keeps_comparison_operators_and_punctuation() {
        assert_eq!(strip_markup("3 < 5 > 2"), "3 < 5 > 2");
        assert_eq!(strip_markup("a <b"), "a <b");
        assert_eq!(strip_markup("Giá: 5$, (tốt)!"), "Giá: 5$, (tốt)!");
        assert_eq!(strip_markup("AT&T &unknown; &"), "AT&T &unknown; &");
    }

    #[test]
    fn drops_control_characters() {
        assert_eq!(strip_markup("a\u{0007}b\u{200B}c\u{FEFF}"), "abc");
        assert_eq!(strip_markup("a&#7;b"), "ab");
    }

    #[test]
    fn escaped_markup_is_removed_too() {
        assert_eq!(strip_markup("&lt;b&gt;bold&lt;/b&gt;"), "bold");
        assert_eq!(strip_markup("&amp;amp;"), "&");
    }

    proptest! {
        #[test]
        fn idempotent(s in "([a-z ]|<b>|</b>|&amp;|&lt;|&gt;|&#39;|&|<|>|;|#|\t|\n){0,40}") {
            let once = strip_markup(&s);
            prop_assert_eq!(strip_markup(&once), once);
        }

        #[test]
        fn idempotent_any(s in "\\PC{0,60}") {
            let once = strip_markup(&s);
            prop_assert_eq!(strip_markup(&once), once);
        }
    }
}
