//! Word-piece to word alignment and the piece-level dependency relation.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::conllu::Sentence;
use crate::error::{Error, Result};
use crate::tokenizer::{BpeVocab, TokenSequence};

/// Which word of a dependency arc must be the parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    /// The attending piece `i` belongs to the head word.
    AttendingParent,
    /// The attended piece `j` belongs to the head word.
    AttendedParent,
    Either,
}

impl Formulation {
    pub const ALL: [Formulation; 3] = [Self::AttendingParent, Self::AttendedParent, Self::Either];

    pub fn name(self) -> &'static str {
        match self {
            Self::AttendingParent => "attending_parent",
            Self::AttendedParent => "attended_parent",
            Self::Either => "either",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedSentence {
    pub sentence: Sentence,
    pub pieces: TokenSequence,
    /// Word index (0-based) of every piece; non-decreasing.
    pub piece_to_word: Vec<usize>,
}

impl AlignedSentence {
    pub fn id(&self) -> &str {
        &self.sentence.id
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// UPOS tag of piece `i` (inherited from its word).
    pub fn pos(&self, i: usize) -> &str {
        &self.sentence.words[self.piece_to_word[i]].upos
    }

    /// Dependency relation label of the word piece `i` belongs to.
    pub fn deprel(&self, i: usize) -> &str {
        &self.sentence.words[self.piece_to_word[i]].deprel
    }

    /// Piece-level lift of the word-level arc relation.
    pub fn dep(&self, formulation: Formulation, i: usize, j: usize) -> bool {
        let (wi, wj) = (self.piece_to_word[i], self.piece_to_word[j]);
        if wi == wj {
            return false;
        }
        let parent_is_i = self.sentence.head_of(wj) == Some(wi);
        let parent_is_j = self.sentence.head_of(wi) == Some(wj);
        match formulation {
            Formulation::AttendingParent => parent_is_i,
            Formulation::AttendedParent => parent_is_j,
            Formulation::Either => parent_is_i || parent_is_j,
        }
    }

    /// Drops pieces beyond `n` (context-length truncation).
    pub fn truncate(&mut self, n: usize) {
        self.pieces.truncate(n);
        self.piece_to_word.truncate(n);
    }
}

/// Byte span of every word inside `s.text`. Words after the first in a
/// multiword token whose parts do not spell its surface get an empty span.
pub fn word_spans(s: &Sentence) -> Result<Vec<Range<usize>>> {
    let text = s.text.as_str();
    let fail = |message: String| Error::Alignment {
        sentence: s.id.clone(),
        message,
    };
    let locate = |needle: &str, cursor: usize| -> Result<Range<usize>> {
        let rest = &text[cursor..];
        let skipped = rest.len() - rest.trim_start().len();
        let at = cursor + skipped;
        if text[at..].starts_with(needle) {
            return Ok(at..at + needle.len());
        }
        match text[at..].find(needle) {
            Some(off) => {
                log::debug!("sentence {}: skipped {:?} before `{needle}`", s.id, &text[at..at + off]);
                Ok(at + off..at + off + needle.len())
            }
            None => Err(fail(format!("word `{needle}` not found in text after byte {cursor}"))),
        }
    };

    let mut spans = Vec::with_capacity(s.words.len());
    let mut cursor = 0;
    let mut w = 0;
    while w < s.words.len() {
        if let Some(m) = s.multiword.iter().find(|m| m.first == w) {
            let surface = locate(&m.form, cursor)?;
            let parts: String = s.words[m.first..=m.last].iter().map(|x| x.form.as_str()).collect();
            if parts == m.form {
                let mut at = surface.start;
                for word in &s.words[m.first..=m.last] {
                    spans.push(at..at + word.form.len());
                    at += word.form.len();
                }
            } else {
                spans.push(surface.clone());
                spans.extend((m.first + 1..=m.last).map(|_| surface.end..surface.end));
            }
            cursor = surface.end;
            w = m.last + 1;
        } else {
            let span = locate(&s.words[w].form, cursor)?;
            cursor = span.end;
            spans.push(span);
            w += 1;
        }
    }
    Ok(spans)
}

fn overlap(a: &Range<usize>, b: &Range<usize>) -> usize {
    a.end.min(b.end).saturating_sub(a.start.max(b.start))
}

fn gap(piece: &Range<usize>, word: &Range<usize>) -> usize {
    if piece.end <= word.start {
        word.start - piece.end
    } else {
        piece.start.saturating_sub(word.end)
    }
}

/// Maps piece byte spans onto word spans by maximal overlap; ties go to the
/// earlier word. Pieces touching no word (whitespace) go to the nearest word.
pub fn assign_pieces(sentence_id: &str, pieces: &[Range<usize>], words: &[Range<usize>]) -> Result<Vec<usize>> {
    let candidates: Vec<usize> = (0..words.len()).filter(|&w| !words[w].is_empty()).collect();
    if candidates.is_empty() && !pieces.is_empty() {
        return Err(Error::Alignment {
            sentence: sentence_id.to_string(),
            message: "no word has a location in the text".into(),
        });
    }
    let mut out = Vec::with_capacity(pieces.len());
    for p in pieces {
        let mut best: Option<(usize, usize)> = None;
        for &w in &candidates {
            let o = overlap(p, &words[w]);
            match best {
                Some((_, bo)) if o < bo => {}
                Some((bw, bo)) if o == bo && o > 0 => {
                    log::debug!("sentence {sentence_id}: piece {p:?} overlaps words {bw} and {w} equally; keeping {bw}");
                }
                Some((_, bo)) if o == bo => {}
                _ => best = Some((w, o)),
            }
        }
        let w = match best {
            Some((w, o)) if o > 0 => w,
            _ => *candidates
                .iter()
                .min_by_key(|&&w| (gap(p, &words[w]), w))
                .expect("candidates is non-empty"),
        };
        out.push(w);
    }
    if let Some(k) = (1..out.len()).find(|&k| out[k] < out[k - 1]) {
        return Err(Error::Alignment {
            sentence: sentence_id.to_string(),
            message: format!("piece {k} maps to an earlier word than piece {}", k - 1),
        });
    }
    Ok(out)
}

/// Tokenizes the sentence text verbatim and attaches pieces to words.
pub fn align(sentence: Sentence, vocab: &BpeVocab) -> Result<AlignedSentence> {
    let spans = word_spans(&sentence)?;
    let pieces = vocab.encode(&sentence.text);
    let piece_to_word = assign_pieces(&sentence.id, &pieces.spans, &spans)?;
    Ok(AlignedSentence {
        sentence,
        pieces,
        piece_to_word,
    })
}
