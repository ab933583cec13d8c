//! Tokenizers used by the metrics and by self-ROUGE selection.
//!
//! The subword mode segments each whitespace-delimited word greedily, taking the
//! longest vocabulary piece at every position. A word's first piece carries the
//! word-boundary marker `▁`. When no piece matches, one character is emitted on
//! its own (together with the marker at a word start), so segmentation never
//! fails and never drops text.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

/// Word-boundary marker prefixed to the first piece of every word.
pub const WORD_BOUNDARY: char = '\u{2581}';

/// Subword piece vocabulary for greedy longest-match segmentation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    pieces: BTreeSet<String>,
    max_piece_chars: usize,
}

impl Vocab {
    pub fn new<I, S>(pieces: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut set = BTreeSet::new();
        let mut max_piece_chars = 0;
        for p in pieces {
            let p = p.into();
            if p.is_empty() {
                continue;
            }
            max_piece_chars = max_piece_chars.max(p.chars().count());
            set.insert(p);
        }
        Self {
            pieces: set,
            max_piece_chars,
        }
    }

    pub fn contains(&self, piece: &str) -> bool {
        self.pieces.contains(piece)
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    fn segment_word(&self, word: &str, out: &mut Vec<String>) {
        let mut marked = String::with_capacity(word.len() + WORD_BOUNDARY.len_utf8());
        marked.push(WORD_BOUNDARY);
        marked.push_str(word);

        let mut bounds: Vec<usize> = marked.char_indices().map(|(i, _)| i).collect();
        bounds.push(marked.len());
        let n_chars = bounds.len() - 1;

        let mut pos = 0;
        while pos < n_chars {
            let longest = self.max_piece_chars.min(n_chars - pos);
            let matched = (1..=longest).rev().find(|&len| {
                self.pieces
                    .contains(&marked[bounds[pos]..bounds[pos + len]])
            });
            let len = match matched {
                Some(len) => len,
                // The marker never stands alone as a fallback piece.
                None if pos == 0 && n_chars > 1 => 2,
                None => 1,
            };
            out.push(marked[bounds[pos]..bounds[pos + len]].to_string());
            pos += len;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tokenizer {
    /// Splits on Unicode whitespace.
    Whitespace { lowercase: bool },
    /// One token per non-whitespace character.
    Character { lowercase: bool },
    /// Greedy longest-match over a piece vocabulary.
    Subword { vocab: Vocab, lowercase: bool },
}

impl Default for Tokenizer {
    fn default() -> Self {
        Tokenizer::Whitespace { lowercase: false }
    }
}

impl Tokenizer {
    pub fn whitespace() -> Self {
        Tokenizer::Whitespace { lowercase: false }
    }

    pub fn lowercase(&self) -> bool {
        match self {
            Tokenizer::Whitespace { lowercase }
            | Tokenizer::Character { lowercase }
            | Tokenizer::Subword { lowercase, .. } => *lowercase,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Tokenizer::Whitespace { .. } => "whitespace",
            Tokenizer::Character { .. } => "character",
            Tokenizer::Subword { .. } => "subword_vocab",
        }
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let lowered;
        let text = if self.lowercase() {
            lowered = text.to_lowercase();
            lowered.as_str()
        } else {
            text
        };
        match self {
            Tokenizer::Whitespace { .. } => text.split_whitespace().map(String::from).collect(),
            Tokenizer::Character { .. } => text
                .chars()
                .filter(|c| !c.is_whitespace())
                .map(String::from)
                .collect(),
            Tokenizer::Subword { vocab, .. } => {
                let mut out = Vec::new();
                for word in text.split_whitespace() {
                    vocab.segment_word(word, &mut out);
                }
                out
            }
        }
    }

    /// Token count without keeping the tokens around.
    pub fn count(&self, text: &str) -> usize {
        match self {
            Tokenizer::Whitespace { .. } => text.split_whitespace().count(),
            Tokenizer::Character { .. } => text.chars().filter(|c| !c.is_whitespace()).count(),
            Tokenizer::Subword { .. } => self.tokenize(text).len(),
        }
    }
}

/// Rebuilds the whitespace-normalized text from subword pieces.
pub fn detokenize_subword(pieces: &[String]) -> String {
    let mut out = String::new();
    for p in pieces {
        for c in p.chars() {
            if c == WORD_BOUNDARY {
                if !out.is_empty() {
                    out.push(' ');
                }
            } else {
                out.push(c);
            }
        }
    }
    out
}
