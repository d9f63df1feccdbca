//! Grounded prompt assembly under a character budget.
//!
//! Layout:
//!
//! ```text
//! <instruction>
//!
//! Retrieved news:
//! [1] Title: <title>
//! <body excerpt>
//!
//! Conversation so far:
//! User: ...
//! Assistant: ...
//!
//! User: <transcript>
//! Assistant:
//! ```
//!
//! Allocation order: instruction and transcript, then article titles, then
//! body excerpts, then history from the newest turn backwards. A history turn
//! that does not fit ends the history section, so only a contiguous run of
//! the most recent turns is kept.

use super::Turn;
use crate::index::RetrievalResult;
use crate::scalar::Scalar;

pub const SYSTEM_INSTRUCTION: &str = "You are a spoken news assistant. Answer the user's latest question in two or \
three short sentences suitable for reading aloud. Ground every statement in the retrieved news below; if the news \
does not cover the question, say so plainly.";

/// Separates the rank number from the title on article lines: `[1] Title: ...`.
pub const TITLE_MARKER: &str = " Title: ";

/// Upper bound on characters of body text quoted per article.
pub const EXCERPT_CHARS: usize = 600;

const NEWS_HEADER: &str = "\n\nRetrieved news:";
const HISTORY_HEADER: &str = "\n\nConversation so far:";
const USER_PREFIX: &str = "\n\nUser: ";
const ASSISTANT_SUFFIX: &str = "\nAssistant:";

fn chars(s: &str) -> usize {
    s.chars().count()
}

fn truncate_chars(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

fn history_block(turn: &Turn) -> String {
    format!("\nUser: {}\nAssistant: {}", turn.user_text, turn.system_text)
}

/// Builds the generation prompt; the result never exceeds `budget`
/// characters as long as `budget` covers the fixed instruction and framing.
pub fn build_llm_prompt<T: Scalar>(
    transcript: &str,
    retrieved: &[RetrievalResult<T>],
    history: &[Turn],
    budget: usize,
) -> String {
    let fixed = chars(SYSTEM_INSTRUCTION) + chars(USER_PREFIX) + chars(ASSISTANT_SUFFIX);
    let transcript = truncate_chars(transcript.trim(), budget.saturating_sub(fixed));
    let mut remaining = budget.saturating_sub(fixed + chars(transcript));

    // titles
    let mut title_lines = Vec::new();
    for (i, r) in retrieved.iter().enumerate() {
        let line = format!("\n[{}]{TITLE_MARKER}{}", i + 1, r.article.title.trim());
        let cost = chars(&line) + if title_lines.is_empty() { chars(NEWS_HEADER) } else { 0 };
        if cost > remaining {
            break;
        }
        remaining -= cost;
        title_lines.push(line);
    }

    // excerpts, in rank order
    let mut news = String::new();
    if !title_lines.is_empty() {
        news.push_str(NEWS_HEADER);
    }
    for (line, r) in title_lines.iter().zip(retrieved) {
        news.push_str(line);
        let body = r.article.body.trim();
        if remaining > 1 && !body.is_empty() {
            let excerpt = truncate_chars(body, EXCERPT_CHARS.min(remaining - 1));
            remaining -= 1 + chars(excerpt);
            news.push('\n');
            news.push_str(excerpt);
        }
    }

    // history, newest first, stop at the first turn that does not fit
    let mut kept = Vec::new();
    for turn in history.iter().rev() {
        let block = history_block(turn);
        let cost = chars(&block) + if kept.is_empty() { chars(HISTORY_HEADER) } else { 0 };
        if cost > remaining {
            break;
        }
        remaining -= cost;
        kept.push(block);
    }

    let mut prompt = String::new();
    prompt.push_str(SYSTEM_INSTRUCTION);
    prompt.push_str(&news);
    if !kept.is_empty() {
        prompt.push_str(HISTORY_HEADER);
        for block in kept.iter().rev() {
            prompt.push_str(block);
        }
    }
    prompt.push_str(USER_PREFIX);
    prompt.push_str(transcript);
    prompt.push_str(ASSISTANT_SUFFIX);
    prompt
}

/// Smallest budget that fits the instruction and an empty exchange.
pub fn min_prompt_budget() -> usize {
    chars(SYSTEM_INSTRUCTION) + chars(USER_PREFIX) + chars(ASSISTANT_SUFFIX)
}
