//! Reduces an HTML page to readable text.

use alloc::string::String;
use alloc::vec::Vec;

const DROPPED: &[&str] = &[
    "script", "style", "noscript", "svg", "head", "nav", "footer", "template", "iframe",
];
const BLOCK: &[&str] = &[
    "p",
    "div",
    "br",
    "li",
    "ul",
    "ol",
    "tr",
    "table",
    "section",
    "article",
    "main",
    "header",
    "h1",
    "h2",
    "h3",
    "h4",
    "h5",
    "h6",
    "pre",
    "blockquote",
    "dd",
    "dt",
    "hr",
    "code",
];

fn tag_name(tag: &str) -> (bool, String) {
    let t = tag.trim_start();
    let (closing, t) = match t.strip_prefix('/') {
        Some(r) => (true, r),
        None => (false, t),
    };
    let name: String = t
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect();
    (closing, name)
}

fn decode_entity(entity: &str) -> Option<char> {
    match entity {
        "amp" => Some('&'),
        "lt" => Some('<'),
        "gt" => Some('>'),
        "quot" => Some('"'),
        "apos" => Some('\''),
        "nbsp" => Some(' '),
        _ => {
            let num = entity.strip_prefix('#')?;
            let code = match num.strip_prefix(['x', 'X']) {
                Some(hex) => u32::from_str_radix(hex, 16).ok()?,
                None => num.parse().ok()?,
            };
            char::from_u32(code)
        }
    }
}

fn push_text(out: &mut String, text: &str, in_pre: bool) {
    let mut rest = text;
    while let Some(i) = rest.find('&') {
        push_raw(out, &rest[..i], in_pre);
        let after = &rest[i + 1..];
        match after
            .find(';')
            .filter(|&j| j <= 10)
            .and_then(|j| decode_entity(&after[..j]).map(|c| (j, c)))
        {
            Some((j, c)) => {
                let mut buf = [0u8; 4];
                push_raw(out, c.encode_utf8(&mut buf), in_pre);
                rest = &after[j + 1..];
            }
            None => {
                push_raw(out, "&", in_pre);
                rest = after;
            }
        }
    }
    push_raw(out, rest, in_pre);
}

fn push_raw(out: &mut String, text: &str, in_pre: bool) {
    if in_pre {
        out.push_str(text);
        return;
    }
    for c in text.chars() {
        if c.is_whitespace() {
            if !out.ends_with([' ', '\n']) && !out.is_empty() {
                out.push(' ');
            }
        } else {
            out.push(c);
        }
    }
}

/// Strips tags, drops script/style/navigation content, decodes common
/// entities, and keeps block structure as line breaks.
pub fn strip_html(html: &str) -> String {
    let mut out = String::with_capacity(html.len() / 2);
    let mut rest = html;
    let mut skip_until: Option<String> = None;
    let mut pre_depth = 0usize;
    while !rest.is_empty() {
        let Some(lt) = rest.find('<') else {
            if skip_until.is_none() {
                push_text(&mut out, rest, pre_depth > 0);
            }
            break;
        };
        if skip_until.is_none() {
            push_text(&mut out, &rest[..lt], pre_depth > 0);
        }
        let after = &rest[lt + 1..];
        if let Some(comment) = after.strip_prefix("!--") {
            rest = comment.find("-->").map_or("", |e| &comment[e + 3..]);
            continue;
        }
        let Some(gt) = after.find('>') else {
            if skip_until.is_none() {
                push_text(&mut out, &rest[lt..], pre_depth > 0);
            }
            break;
        };
        let (closing, name) = tag_name(&after[..gt]);
        rest = &after[gt + 1..];
        if let Some(target) = &skip_until {
            if closing && &name == target {
                skip_until = None;
            }
            continue;
        }
        let self_closing = after[..gt].trim_end().ends_with('/');
        if !closing && !self_closing && DROPPED.contains(&name.as_str()) {
            skip_until = Some(name);
            continue;
        }
        if name == "pre" {
            if closing {
                pre_depth = pre_depth.saturating_sub(1);
            } else {
                pre_depth += 1;
            }
        }
        if BLOCK.contains(&name.as_str()) && name != "code" {
            while out.ends_with(' ') {
                out.pop();
            }
            if !out.is_empty() && !out.ends_with('\n') {
                out.push('\n');
            }
        }
    }
    let lines: Vec<&str> = out.lines().map(str::trim_end).collect();
    let mut cleaned = String::with_capacity(out.len());
    let mut blank = 0;
    for line in lines {
        if line.trim().is_empty() {
            blank += 1;
            if blank > 1 {
                continue;
            }
        } else {
            blank = 0;
        }
        cleaned.push_str(line);
        cleaned.push('\n');
    }
    String::from(cleaned.trim())
}
