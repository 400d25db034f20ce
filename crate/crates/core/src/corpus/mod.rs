//! Annotated corpus ingestion: CoNLL-U parsing, piece alignment, sampling.

pub mod align;
pub mod conllu;
pub mod sample;

pub use align::{align, AlignedSentence, Formulation};
pub use conllu::{parse_conllu, parse_conllu_str, MultiwordToken, Sentence, Word};
pub use sample::{sample_corpus, Manifest};

/// The seventeen Universal Dependencies part-of-speech tags.
pub const UPOS_TAGS: [&str; 17] = [
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM", "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
];
