//! CoNLL-U reader with tree validation.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One syntactic word. `head` is 1-based with 0 for the root, as in the file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Word {
    pub form: String,
    pub upos: String,
    pub head: usize,
    pub deprel: String,
}

/// A multiword token covering words `first..=last` (0-based) with surface `form`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiwordToken {
    pub first: usize,
    pub last: usize,
    pub form: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: String,
    pub text: String,
    pub words: Vec<Word>,
    pub multiword: Vec<MultiwordToken>,
}

impl Sentence {
    /// Head of word `w` (0-based) as a 0-based index, `None` for the root.
    pub fn head_of(&self, w: usize) -> Option<usize> {
        self.words[w].head.checked_sub(1)
    }

    /// Single root, heads in range, no cycles.
    pub fn validate(&self) -> Result<()> {
        let n = self.words.len();
        let tree_err = |message: String| Error::Tree {
            sentence: self.id.clone(),
            message,
        };
        if n == 0 {
            return Err(tree_err("no words".into()));
        }
        let roots: Vec<usize> = (0..n).filter(|&w| self.words[w].head == 0).collect();
        if roots.len() != 1 {
            return Err(tree_err(format!(
                "{} roots (words {:?})",
                roots.len(),
                roots.iter().map(|r| r + 1).collect::<Vec<_>>()
            )));
        }
        if let Some(w) = (0..n).find(|&w| self.words[w].head > n) {
            return Err(tree_err(format!(
                "word {} has head {} beyond the sentence",
                w + 1,
                self.words[w].head
            )));
        }
        // Every chain of heads must reach the root within n steps.
        let mut state = vec![0u8; n]; // 0 unseen, 1 on current path, 2 reaches root
        for start in 0..n {
            let mut path = Vec::new();
            let mut w = start;
            loop {
                match state[w] {
                    2 => break,
                    1 => {
                        return Err(tree_err(format!("cycle through word {}", w + 1)));
                    }
                    _ => {}
                }
                state[w] = 1;
                path.push(w);
                match self.head_of(w) {
                    Some(h) => w = h,
                    None => break,
                }
            }
            for p in path {
                state[p] = 2;
            }
        }
        Ok(())
    }
}

#[derive(Default)]
struct Builder {
    id: Option<String>,
    text: Option<String>,
    words: Vec<Word>,
    space_after: Vec<bool>,
    multiword: Vec<MultiwordToken>,
    mwt_space_after: Vec<bool>,
    start_line: usize,
}

impl Builder {
    fn finish(self, ordinal: usize) -> Result<Sentence> {
        let id = self.id.unwrap_or_else(|| ordinal.to_string());
        let text = match self.text {
            Some(t) => t,
            None => reconstruct(&self.words, &self.space_after, &self.multiword, &self.mwt_space_after),
        };
        let s = Sentence {
            id,
            text,
            words: self.words,
            multiword: self.multiword,
        };
        s.validate()?;
        Ok(s)
    }
}

/// Surface text from forms and `SpaceAfter=No`, with multiword tokens
/// contributing their surface form once.
fn reconstruct(words: &[Word], space_after: &[bool], mwts: &[MultiwordToken], mwt_space: &[bool]) -> String {
    let mut out = String::new();
    let mut w = 0;
    while w < words.len() {
        if let Some((k, m)) = mwts.iter().enumerate().find(|(_, m)| m.first == w) {
            out.push_str(&m.form);
            if mwt_space[k] {
                out.push(' ');
            }
            w = m.last + 1;
        } else {
            out.push_str(&words[w].form);
            if space_after[w] {
                out.push(' ');
            }
            w += 1;
        }
    }
    out.truncate(out.trim_end().len());
    out
}

fn space_after(misc: &str) -> bool {
    !misc.split('|').any(|f| f == "SpaceAfter=No")
}

/// Parses CoNLL-U text. `source_name` is used in error messages.
pub fn parse_conllu_str(input: &str, source_name: &str) -> Result<Vec<Sentence>> {
    let mut out = Vec::new();
    let mut cur: Option<Builder> = None;
    let bad = |line: usize, msg: String| Error::format(source_name, line, msg);

    for (idx, raw) in input.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            if let Some(b) = cur.take() {
                out.push(b.finish(out.len() + 1)?);
            }
            continue;
        }
        let b = cur.get_or_insert_with(|| Builder {
            start_line: lineno,
            ..Builder::default()
        });
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                match key.trim() {
                    "sent_id" => b.id = Some(value.trim().to_string()),
                    "text" => b.text = Some(value.trim().to_string()),
                    _ => {}
                }
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(bad(lineno, format!("expected 10 tab-separated columns, found {}", cols.len())));
        }
        let id = cols[0];
        if id.contains('.') {
            continue; // empty node
        }
        if let Some((a, z)) = id.split_once('-') {
            let parse = |s: &str| s.parse::<usize>().map_err(|_| bad(lineno, format!("bad token range `{id}`")));
            let (a, z) = (parse(a)?, parse(z)?);
            if a == 0 || z < a {
                return Err(bad(lineno, format!("bad token range `{id}`")));
            }
            b.multiword.push(MultiwordToken {
                first: a - 1,
                last: z - 1,
                form: cols[1].to_string(),
            });
            b.mwt_space_after.push(space_after(cols[9]));
            continue;
        }
        let n: usize = id.parse().map_err(|_| bad(lineno, format!("bad word id `{id}`")))?;
        if n != b.words.len() + 1 {
            return Err(bad(lineno, format!("word id {n} out of sequence (expected {})", b.words.len() + 1)));
        }
        let head: usize = cols[6].parse().map_err(|_| bad(lineno, format!("bad head `{}`", cols[6])))?;
        b.words.push(Word {
            form: cols[1].to_string(),
            upos: cols[3].to_string(),
            head,
            deprel: cols[7].to_string(),
        });
        b.space_after.push(space_after(cols[9]));
    }
    if let Some(b) = cur.take() {
        if b.words.is_empty() {
            // Trailing comments without tokens.
            let line = b.start_line;
            if b.id.is_some() || b.text.is_some() {
                return Err(bad(line, "sentence has no word lines".into()));
            }
        } else {
            out.push(b.finish(out.len() + 1)?);
        }
    }
    for m in out.iter().flat_map(|s| s.multiword.iter().map(move |m| (s, m))) {
        let (s, m) = m;
        if m.last >= s.words.len() {
            return Err(Error::Tree {
                sentence: s.id.clone(),
                message: format!("multiword token `{}` extends past the last word", m.form),
            });
        }
    }
    Ok(out)
}

pub fn parse_conllu(path: impl AsRef<Path>) -> Result<Vec<Sentence>> {
    let path = path.as_ref();
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(raw).map_err(|e| {
        let line = 1 + e.as_bytes()[..e.utf8_error().valid_up_to()].iter().filter(|&&b| b == b'\n').count();
        Error::format(path.display().to_string(), line, "invalid UTF-8")
    })?;
    parse_conllu_str(&text, &path.display().to_string())
}
