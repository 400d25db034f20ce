//! Reversible byte <-> printable codepoint mapping used by byte-level BPE.
//!
//! Printable Latin-1 bytes map to themselves; the remaining 68 bytes are
//! assigned codepoints 256.. in byte order.

use std::collections::HashMap;

#[derive(Debug, Clone)]
pub struct ByteEncoder {
    to_char: [char; 256],
    to_byte: HashMap<char, u8>,
}

fn is_printable_byte(b: u8) -> bool {
    matches!(b, b'!'..=b'~' | 0xA1..=0xAC | 0xAE..=0xFF)
}

impl ByteEncoder {
    pub fn new() -> Self {
        let mut to_char = ['\0'; 256];
        let mut extra = 0u32;
        for b in 0..=255u8 {
            to_char[b as usize] = if is_printable_byte(b) {
                char::from(b)
            } else {
                extra += 1;
                char::from_u32(255 + extra).expect("codepoints below 512 are valid")
            };
        }
        let to_byte = to_char.iter().enumerate().map(|(b, &c)| (c, b as u8)).collect();
        Self { to_char, to_byte }
    }

    pub fn encode_byte(&self, b: u8) -> char {
        self.to_char[b as usize]
    }

    pub fn decode_char(&self, c: char) -> Option<u8> {
        self.to_byte.get(&c).copied()
    }

    pub fn chars(&self) -> impl Iterator<Item = char> + '_ {
        self.to_char.iter().copied()
    }
}

impl Default for ByteEncoder {
    fn default() -> Self {
        Self::new()
    }
}
