//! Marked-up exemplar sentences. The attending piece is wrapped in `**..**`
//! and the attended piece in `__..__`; a piece that is both gets both.

use super::{ExemplarRecord, HeadExemplars};

fn escape_text(piece: &str) -> String {
    let mut out = String::with_capacity(piece.len());
    for c in piece.chars() {
        if matches!(c, '\\' | '*' | '_') {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

fn escape_html(piece: &str) -> String {
    let mut out = String::with_capacity(piece.len());
    for c in piece.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

/// Pieces concatenated with markers around positions `i` and `j`. Leading
/// whitespace stays outside the markers.
fn mark(r: &ExemplarRecord, escape: fn(&str) -> String, attending: (&str, &str), attended: (&str, &str)) -> String {
    let mut out = String::new();
    for (p, piece) in r.pieces.iter().enumerate() {
        let body = piece.trim_start();
        let lead = &piece[..piece.len() - body.len()];
        out.push_str(&escape(lead));
        let mut s = escape(body);
        if p == r.j {
            s = format!("{}{s}{}", attended.0, attended.1);
        }
        if p == r.i {
            s = format!("{}{s}{}", attending.0, attending.1);
        }
        out.push_str(&s);
    }
    out
}

pub fn marked_text(r: &ExemplarRecord) -> String {
    mark(r, escape_text, ("**", "**"), ("__", "__"))
}

pub fn marked_html(r: &ExemplarRecord) -> String {
    mark(r, escape_html, ("<b>", "</b>"), ("<u>", "</u>"))
}

fn header(h: &HeadExemplars) -> String {
    let mut s = format!("layer {} head {} (top {})", h.layer, h.head, h.k);
    if h.fewer_than_k {
        s.push_str(&format!(", corpus has only {} sentences", h.records.len()));
    }
    s
}

pub fn render_text(heads: &[HeadExemplars]) -> String {
    let mut out = String::new();
    for h in heads {
        out.push_str(&header(h));
        out.push('\n');
        for r in &h.records {
            out.push_str(&format!(
                "{:>3}. [{}] {:.4} ({} -> {}) {}\n",
                r.rank,
                r.sentence_id,
                r.score,
                r.i,
                r.j,
                marked_text(r)
            ));
        }
        out.push('\n');
    }
    out
}

pub fn render_html(heads: &[HeadExemplars]) -> String {
    if heads.is_empty() {
        return String::new();
    }
    let mut out = String::from("<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>exemplars</title></head><body>\n");
    for h in heads {
        out.push_str(&format!("<h2>{}</h2>\n<ol>\n", escape_html(&header(h))));
        for r in &h.records {
            out.push_str(&format!(
                "<li data-sentence=\"{}\" data-score=\"{:.6}\">{}</li>\n",
                escape_html(&r.sentence_id),
                r.score,
                marked_html(r)
            ));
        }
        out.push_str("</ol>\n");
    }
    out.push_str("</body></html>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(pieces: &[&str], i: usize, j: usize) -> ExemplarRecord {
        ExemplarRecord {
            rank: 1,
            sentence_id: "s".into(),
            corpus_index: 0,
            pieces: pieces.iter().map(|p| p.to_string()).collect(),
            i,
            j,
            weight: 1.0,
            score: 1.0,
        }
    }

    #[test]
    fn single_piece_marked_both_ways() {
        assert_eq!(marked_text(&rec(&["Hello"], 0, 0)), "**__Hello__**");
        assert_eq!(marked_html(&rec(&["Hello"], 0, 0)), "<b><u>Hello</u></b>");
    }

    #[test]
    fn comma_to_place_name() {
        let r = rec(&["Production", " began", " in", " Mar", "iet", "ta", ",", " Georgia", "."], 6, 3);
        assert_eq!(marked_text(&r), "Production began in __Mar__ietta**,** Georgia.");
    }

    #[test]
    fn empty_input_renders_nothing() {
        assert_eq!(render_text(&[]), "");
        assert_eq!(render_html(&[]), "");
    }

    #[test]
    fn escaping() {
        assert_eq!(marked_text(&rec(&["a_b", "*"], 1, 0)), "__a\\_b__**\\***");
        assert_eq!(marked_html(&rec(&["<x>", " &"], 1, 0)), "<u>&lt;x&gt;</u> <b>&amp;</b>");
    }
}
