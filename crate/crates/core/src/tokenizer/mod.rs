//! Byte-level BPE compatible with the released GPT-2 `vocab.json` /
//! `merges.txt` assets.

mod bytes;
pub mod pretokenize;

use std::collections::HashMap;
use std::fs;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use self::bytes::ByteEncoder;
use crate::error::{Error, Result};

pub type TokenId = u32;

/// Vocabulary size of the released GPT-2 tokenizer.
pub const GPT2_VOCAB_SIZE: usize = 50257;

/// Token table plus rank-ordered merge rules. Immutable once loaded.
#[derive(Debug, Clone)]
pub struct BpeVocab {
    token_to_id: HashMap<String, TokenId>,
    id_to_token: Vec<String>,
    /// (left, right) -> (rank, merged id)
    merges: HashMap<(TokenId, TokenId), (u32, TokenId)>,
    n_merges: usize,
    bytes: ByteEncoder,
    byte_ids: [TokenId; 256],
}

/// Token ids of one text, with the decoded piece text and the byte range of
/// each piece in the source.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub ids: Vec<TokenId>,
    pub pieces: Vec<String>,
    pub spans: Vec<Range<usize>>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Keeps the first `n` tokens.
    pub fn truncate(&mut self, n: usize) {
        self.ids.truncate(n);
        self.pieces.truncate(n);
        self.spans.truncate(n);
    }
}

impl BpeVocab {
    /// Loads `vocab.json` and `merges.txt`.
    pub fn load(vocab_file: impl AsRef<Path>, merges_file: impl AsRef<Path>) -> Result<Self> {
        let (vp, mp) = (vocab_file.as_ref(), merges_file.as_ref());
        let vocab = fs::read_to_string(vp).map_err(|e| Error::io(vp, e))?;
        let merges = fs::read_to_string(mp).map_err(|e| Error::io(mp, e))?;
        Self::from_strs(&vocab, &merges).map_err(|e| relabel(e, &vp.display().to_string(), &mp.display().to_string()))
    }

    /// Builds a vocabulary from the contents of the two asset files.
    pub fn from_strs(vocab_json: &str, merges_txt: &str) -> Result<Self> {
        let raw: HashMap<String, i64> =
            serde_json::from_str(vocab_json).map_err(|e| Error::format("vocab.json", e.line(), e.to_string()))?;

        let size = raw.len();
        let mut id_to_token: Vec<Option<String>> = vec![None; size];
        for (tok, &id) in &raw {
            let slot = usize::try_from(id)
                .ok()
                .and_then(|i| id_to_token.get_mut(i))
                .ok_or_else(|| Error::Integrity(format!("token {tok:?} has id {id}, ids must be dense in [0, {size})")))?;
            if let Some(prev) = slot {
                return Err(Error::Integrity(format!("duplicate id {id} for tokens {prev:?} and {tok:?}")));
            }
            *slot = Some(tok.clone());
        }
        // With `size` distinct keys and every id in range, a missing id is
        // impossible unless some id was duplicated, which was caught above.
        let id_to_token: Vec<String> = id_to_token.into_iter().map(Option::unwrap).collect();
        let token_to_id: HashMap<String, TokenId> = raw.into_iter().map(|(t, id)| (t, id as TokenId)).collect();

        let bytes = ByteEncoder::new();
        let mut byte_ids = [0; 256];
        for b in 0..=255u8 {
            let c = bytes.encode_byte(b).to_string();
            byte_ids[b as usize] = *token_to_id
                .get(&c)
                .ok_or_else(|| Error::Integrity(format!("byte {b:#04x} ({c:?}) has no token; vocabulary is not byte-complete")))?;
        }

        let mut merges = HashMap::new();
        let mut rank = 0u32;
        for (n, line) in merges_txt.lines().enumerate() {
            let lineno = n + 1;
            if n == 0 && line.starts_with("#version") {
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(' ');
            let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::format(
                    "merges.txt",
                    lineno,
                    format!("expected two space-separated symbols, got {line:?}"),
                ));
            };
            if a.is_empty() || b.is_empty() {
                return Err(Error::format("merges.txt", lineno, "empty merge symbol"));
            }
            let lookup = |s: &str| {
                token_to_id
                    .get(s)
                    .copied()
                    .ok_or_else(|| Error::Integrity(format!("merges.txt:{lineno}: symbol {s:?} is not in the vocabulary")))
            };
            let (ia, ib) = (lookup(a)?, lookup(b)?);
            let merged = lookup(&format!("{a}{b}"))?;
            // Later duplicates overwrite earlier ones, as in the reference loader.
            merges.insert((ia, ib), (rank, merged));
            rank += 1;
        }

        Ok(Self {
            token_to_id,
            id_to_token,
            merges,
            n_merges: rank as usize,
            bytes,
            byte_ids,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn n_merges(&self) -> usize {
        self.n_merges
    }

    pub fn token_id(&self, token: &str) -> Option<TokenId> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.id_to_token.get(id as usize).map(String::as_str)
    }

    /// Applies merges to one pre-tokenized chunk.
    fn bpe(&self, chunk: &[u8]) -> Vec<TokenId> {
        let mut word: Vec<TokenId> = chunk.iter().map(|&b| self.byte_ids[b as usize]).collect();
        while word.len() > 1 {
            let best = word
                .windows(2)
                .filter_map(|w| self.merges.get(&(w[0], w[1])).map(|&(r, m)| (r, (w[0], w[1]), m)))
                .min_by_key(|&(r, _, _)| r);
            let Some((_, (a, b), merged)) = best else {
                break;
            };
            let mut next = Vec::with_capacity(word.len());
            let mut i = 0;
            while i < word.len() {
                if i + 1 < word.len() && word[i] == a && word[i + 1] == b {
                    next.push(merged);
                    i += 2;
                } else {
                    next.push(word[i]);
                    i += 1;
                }
            }
            word = next;
        }
        word
    }

    fn token_bytes(&self, id: TokenId) -> impl Iterator<Item = u8> + '_ {
        self.id_to_token[id as usize]
            .chars()
            .map(|c| self.bytes.decode_char(c).expect("vocabulary tokens are byte-encoded"))
    }

    /// Encodes `text` without adding any special tokens.
    pub fn encode(&self, text: &str) -> TokenSequence {
        let mut seq = TokenSequence::default();
        for chunk in pretokenize::pretokenize(text) {
            let mut start = chunk.start;
            for id in self.bpe(&text.as_bytes()[chunk.clone()]) {
                let piece: Vec<u8> = self.token_bytes(id).collect();
                let end = start + piece.len();
                seq.ids.push(id);
                seq.pieces.push(String::from_utf8_lossy(&piece).into_owned());
                seq.spans.push(start..end);
                start = end;
            }
            debug_assert_eq!(start, chunk.end);
        }
        seq
    }

    /// Raw bytes of a token id sequence.
    pub fn decode_bytes(&self, ids: &[TokenId]) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        for &id in ids {
            if id as usize >= self.vocab_size() {
                return Err(Error::Range {
                    what: "token id",
                    index: id as usize,
                    limit: self.vocab_size(),
                });
            }
            out.extend(self.token_bytes(id));
        }
        Ok(out)
    }

    /// Decodes ids to text. Byte sequences that are not valid UTF-8 (only
    /// possible for id lists that did not come from [`encode`](Self::encode))
    /// are decoded lossily.
    pub fn decode(&self, ids: &[TokenId]) -> Result<String> {
        let bytes = self.decode_bytes(ids)?;
        Ok(match String::from_utf8(bytes) {
            Ok(s) => s,
            Err(e) => String::from_utf8_lossy(e.as_bytes()).into_owned(),
        })
    }
}

fn relabel(e: Error, vocab: &str, merges: &str) -> Error {
    match e {
        Error::Format {
            source_name,
            line,
            message,
        } => Error::Format {
            source_name: match source_name.as_str() {
                "vocab.json" => vocab.to_owned(),
                "merges.txt" => merges.to_owned(),
                _ => source_name,
            },
            line,
            message,
        },
        other => other,
    }
}
