//! GPT-2 pre-tokenization, written out as a hand scanner.
//!
//! The released tokenizer splits text with the alternation
//!
//! ```text
//! 's|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+
//! ```
//!
//! evaluated leftmost-first at each position. The scanner below tries the
//! same alternatives in the same order. Character classes:
//!
//! * letter: general category Lu, Ll, Lt, Lm or Lo
//! * number: general category Nd, Nl or No
//! * space: the Unicode `White_Space` property (`char::is_whitespace`)
//!
//! Only U+0020 can be the optional leading space. See
//! `docs/pretokenization.md` for the full behaviour table.

use std::ops::Range;

use unicode_general_category::{get_general_category, GeneralCategory as Gc};

const CONTRACTIONS: [&str; 7] = ["'s", "'t", "'re", "'ve", "'m", "'ll", "'d"];

pub fn is_letter(c: char) -> bool {
    matches!(
        get_general_category(c),
        Gc::UppercaseLetter | Gc::LowercaseLetter | Gc::TitlecaseLetter | Gc::ModifierLetter | Gc::OtherLetter
    )
}

pub fn is_number(c: char) -> bool {
    matches!(get_general_category(c), Gc::DecimalNumber | Gc::LetterNumber | Gc::OtherNumber)
}

pub fn is_space(c: char) -> bool {
    c.is_whitespace()
}

fn is_other(c: char) -> bool {
    !is_space(c) && !is_letter(c) && !is_number(c)
}

/// Byte length of the longest prefix of `s` whose chars all satisfy `pred`.
fn run_len(s: &str, pred: impl Fn(char) -> bool) -> usize {
    s.char_indices().find(|&(_, c)| !pred(c)).map_or(s.len(), |(i, _)| i)
}

/// Length in bytes of the chunk starting at the beginning of `rest`.
fn chunk_len(rest: &str) -> usize {
    if let Some(c) = CONTRACTIONS.iter().find(|c| rest.starts_with(**c)) {
        return c.len();
    }

    let skip = usize::from(rest.starts_with(' '));
    if let Some(first) = rest[skip..].chars().next() {
        for class in [is_letter as fn(char) -> bool, is_number, is_other] {
            if class(first) {
                return skip + run_len(&rest[skip..], class);
            }
        }
    }

    // Whitespace run. `\s+(?!\S)` gives back the final space when the run is
    // followed by a non-space, unless that would leave it empty; then `\s+`
    // takes the single char.
    let run = run_len(rest, is_space);
    debug_assert!(run > 0);
    if run == rest.len() {
        return run;
    }
    let last = rest[..run].chars().next_back().map_or(0, char::len_utf8);
    if run > last {
        run - last
    } else {
        run
    }
}

/// Splits `text` into contiguous byte ranges covering it exactly.
pub fn pretokenize(text: &str) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < text.len() {
        let len = chunk_len(&text[pos..]);
        out.push(pos..pos + len);
        pos += len;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn split(s: &str) -> Vec<&str> {
        pretokenize(s).into_iter().map(|r| &s[r]).collect()
    }

    #[test]
    fn words_and_punctuation() {
        assert_eq!(split("Hello world"), ["Hello", " world"]);
        assert_eq!(split("Hello, world!"), ["Hello", ",", " world", "!"]);
        assert_eq!(split(""), Vec::<&str>::new());
    }

    #[test]
    fn contractions_are_lowercase_only() {
        assert_eq!(split("don't"), ["don", "'t"]);
        assert_eq!(split("DON'T"), ["DON", "'", "T"]);
        assert_eq!(split("we'll've"), ["we", "'ll", "'ve"]);
    }

    #[test]
    fn whitespace_runs() {
        assert_eq!(split("a  b"), ["a", " ", " b"]);
        assert_eq!(split("a\nb"), ["a", "\n", "b"]);
        assert_eq!(split("a \n\n b"), ["a", " \n\n", " b"]);
        assert_eq!(split("end   "), ["end", "   "]);
        assert_eq!(split("\t"), ["\t"]);
    }

    #[test]
    fn digits_and_symbols() {
        assert_eq!(split("in 1925, 3.5%"), ["in", " 1925", ",", " 3", ".", "5", "%"]);
        assert_eq!(split(" (AMSA)."), [" (", "AMSA", ")."]);
    }

    #[test]
    fn unicode_classes() {
        assert_eq!(split("naïve café"), ["naïve", " café"]);
        assert_eq!(split("½ Ⅻ"), ["½", " Ⅻ"]);
        assert_eq!(split("日本語 テキスト"), ["日本語", " テキスト"]);
        assert_eq!(split("a\u{3000}b"), ["a", "\u{3000}", "b"]);
    }
}
