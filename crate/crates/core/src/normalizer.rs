//! Whitespace normalization and word-boundary marking.
//!
//! Every whitespace-delimited word is prefixed with [`WORD_BOUNDARY`]
//! (U+2581), so any segmentation of the marked text can be turned back into
//! the original spacing. No other normalization (case, Unicode forms) is
//! applied.

use crate::error::{Error, Result};

/// Marker prepended to every word.
pub const WORD_BOUNDARY: char = '\u{2581}';

/// A sentence in marked form together with its word spans.
///
/// Spans are half-open character offsets into [`NormalizedText::chars`],
/// sorted, non-overlapping and covering the whole text. Segmentation never
/// crosses a span boundary.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NormalizedText {
    chars: Vec<char>,
    word_spans: Vec<(usize, usize)>,
}

impl NormalizedText {
    /// Wraps already-marked text, starting a new word at every marker.
    ///
    /// Text before the first marker (if any) forms its own span. This is
    /// the inverse of joining pieces and does not check for whitespace.
    pub fn from_marked(text: &str) -> Self {
        let chars: Vec<char> = text.chars().collect();
        let mut word_spans = Vec::new();
        let mut start = 0;
        for (i, &c) in chars.iter().enumerate() {
            if c == WORD_BOUNDARY && i > start {
                word_spans.push((start, i));
                start = i;
            }
        }
        if start < chars.len() {
            word_spans.push((start, chars.len()));
        }
        Self { chars, word_spans }
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn word_spans(&self) -> &[(usize, usize)] {
        &self.word_spans
    }

    /// Characters of each word, in order.
    pub fn words(&self) -> impl Iterator<Item = &[char]> + '_ {
        self.word_spans.iter().map(move |&(b, e)| &self.chars[b..e])
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn text(&self) -> String {
        self.chars.iter().collect()
    }
}

/// Normalizes one raw sentence.
///
/// Fails on input that already contains the boundary marker, since it
/// could not be told apart from a word start afterwards.
pub fn normalize(raw: &str) -> Result<NormalizedText> {
    if raw.contains(WORD_BOUNDARY) {
        return Err(Error::MalformedInput(format!(
            "input contains the reserved word-boundary marker U+2581: {raw:?}"
        )));
    }
    let mut chars = Vec::with_capacity(raw.len() + 1);
    let mut word_spans = Vec::new();
    for word in raw.split_whitespace() {
        let start = chars.len();
        chars.push(WORD_BOUNDARY);
        chars.extend(word.chars());
        word_spans.push((start, chars.len()));
    }
    Ok(NormalizedText { chars, word_spans })
}

/// Like [`normalize`], for raw bytes that must be valid UTF-8.
pub fn normalize_bytes(raw: &[u8]) -> Result<NormalizedText> {
    normalize(std::str::from_utf8(raw)?)
}

/// Turns marked text back into plain spaced text.
pub fn denormalize(text: &str) -> String {
    let spaced: String = text
        .chars()
        .map(|c| if c == WORD_BOUNDARY { ' ' } else { c })
        .collect();
    match spaced.strip_prefix(' ') {
        Some(rest) => rest.to_owned(),
        None => spaced,
    }
}

/// Joins pieces of a segmentation and restores the spacing.
pub fn decode_pieces<S: AsRef<str>>(pieces: &[S]) -> String {
    let joined: String = pieces.iter().map(AsRef::as_ref).collect();
    denormalize(&joined)
}

/// Trims and collapses whitespace runs into single spaces.
pub fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
