use std::ops::Range;

/// Byte spans of the whitespace-separated tokens of `text`.
pub fn whitespace_tokens(text: &str) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                spans.push(s..i);
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push(s..text.len());
    }
    spans
}

/// A window over a document body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkSpan {
    /// Full window, overlap included.
    pub window: Range<usize>,
    /// Start of the part not shared with the previous window.
    pub fresh_start: usize,
}

/// Sliding window of `size` tokens advancing by `size - overlap`.
///
/// Windows are cut at token starts so that the fresh parts of all chunks,
/// concatenated in order, give back `body` exactly. Caller guarantees
/// `size > overlap`.
pub fn chunk_document(body: &str, size: usize, overlap: usize) -> Vec<ChunkSpan> {
    debug_assert!(size > overlap);
    let tokens = whitespace_tokens(body);
    let n = tokens.len();
    if n <= size {
        return vec![ChunkSpan { window: 0..body.len(), fresh_start: 0 }];
    }
    let stride = size - overlap;
    let mut spans = Vec::new();
    let mut first = 0usize;
    let mut prev_end = 0usize;
    loop {
        let last = (first + size).min(n);
        let start = if first == 0 { 0 } else { tokens[first].start };
        let end = if last == n { body.len() } else { tokens[last].start };
        spans.push(ChunkSpan { window: start..end, fresh_start: prev_end });
        prev_end = end;
        if last == n {
            break;
        }
        first += stride;
    }
    spans
}
