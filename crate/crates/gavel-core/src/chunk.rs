//! Sliding-window chunk planning for over-length documents.
//!
//! Offsets are measured in estimated tokens (chars/4); mapping back to
//! character boundaries snaps to whitespace so a window never splits a word.

use serde::{Deserialize, Serialize};

use crate::prompt::estimate_tokens;

/// Half-open token range `[start, end)` of one window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub start: usize,
    pub end: usize,
}

impl Chunk {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// The ordered windows covering a document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkPlan {
    pub window: usize,
    pub chunks: Vec<Chunk>,
}

/// Plan sliding windows over a document of `doc_length` tokens.
///
/// A document that fits in one window yields a single chunk. Otherwise
/// windows start every `window / 2` tokens (50% overlap) and planning stops
/// at the first window whose end reaches the document end. Every token
/// offset is covered by at least one chunk and no chunk exceeds `window`.
pub fn plan_chunks(doc_length: usize, window: usize) -> ChunkPlan {
    assert!(window >= 2, "window must be at least 2 tokens");
    let mut chunks = Vec::new();
    if doc_length <= window {
        chunks.push(Chunk {
            start: 0,
            end: doc_length,
        });
        return ChunkPlan { window, chunks };
    }
    let stride = window / 2;
    let mut start = 0usize;
    loop {
        let end = (start + window).min(doc_length);
        chunks.push(Chunk { start, end });
        if end >= doc_length {
            break;
        }
        start += stride;
    }
    ChunkPlan { window, chunks }
}

/// Split a document into overlapping window texts following [`plan_chunks`]
/// over its estimated token length. Character boundaries snap to the nearest
/// whitespace edge so words stay intact; snapping is order-preserving, which
/// keeps the union of windows covering the whole document.
pub fn window_texts(document: &str, window_tokens: usize) -> Vec<String> {
    let plan = plan_chunks(estimate_tokens(document), window_tokens);
    let char_count = document.chars().count();
    // Byte offset of every char boundary, plus the end sentinel.
    let byte_at: Vec<usize> = document
        .char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(document.len()))
        .collect();
    let chars: Vec<char> = document.chars().collect();

    let snap = |target_chars: usize| -> usize {
        let target = target_chars.min(char_count);
        if target == 0 || target == char_count {
            return target;
        }
        let valid = |i: usize| -> bool {
            i == 0 || i == char_count || chars[i - 1].is_whitespace() || chars[i].is_whitespace()
        };
        if valid(target) {
            return target;
        }
        for delta in 1..=char_count {
            if target >= delta && valid(target - delta) {
                return target - delta;
            }
            if target + delta <= char_count && valid(target + delta) {
                return target + delta;
            }
        }
        target
    };

    plan.chunks
        .iter()
        .map(|chunk| {
            let start_char = snap(chunk.start * 4);
            let end_char = snap(chunk.end * 4);
            document[byte_at[start_char]..byte_at[end_char.max(start_char)]].to_string()
        })
        .collect()
}
