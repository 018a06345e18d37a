use super::{AnnotationContext, Article};
use crate::text::tokenize;
use crate::{Error, Result};

const ABBREVIATIONS: &[&str] = &["Mr.", "Mrs.", "Dr.", "U.S.", "e.g.", "i.e."];
const CLOSERS: &[char] = &['"', '\'', ')', '\u{201d}', '\u{2019}'];
const OPENERS: &[char] = &['"', '\'', '(', '\u{201c}', '\u{2018}'];

/// Splits on `.`, `!` or `?` followed by whitespace and an uppercase letter.
/// Closing quotes directly after the terminator stay with the sentence, and a
/// small fixed set of abbreviations never ends a sentence.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let (pos, ch) = chars[i];
        if matches!(ch, '.' | '!' | '?') {
            let mut end = i + 1;
            while end < chars.len() && CLOSERS.contains(&chars[end].1) {
                end += 1;
            }
            let mut next = end;
            while next < chars.len() && chars[next].1.is_whitespace() {
                next += 1;
            }
            let mut first = next;
            while first < chars.len() && OPENERS.contains(&chars[first].1) {
                first += 1;
            }
            let boundary = next > end
                && first < chars.len()
                && chars[first].1.is_uppercase()
                && !(ch == '.' && is_abbreviation(text, start, pos));
            if boundary {
                let end_byte = chars.get(end).map_or(text.len(), |c| c.0);
                push_trimmed(&mut sentences, &text[start..end_byte]);
                start = chars[next].0;
                i = next;
                continue;
            }
        }
        i += 1;
    }
    push_trimmed(&mut sentences, &text[start..]);
    sentences
}

fn push_trimmed(out: &mut Vec<String>, s: &str) {
    let s = s.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
}

/// Whether the word ending with the period at byte `dot` is a known abbreviation.
fn is_abbreviation(text: &str, sentence_start: usize, dot: usize) -> bool {
    let head = &text[sentence_start..=dot];
    let word_start = head
        .rfind(|c: char| c.is_whitespace() || OPENERS.contains(&c))
        .map_or(0, |p| p + head[p..].chars().next().map_or(1, char::len_utf8));
    ABBREVIATIONS.contains(&&head[word_start..])
}

/// Index of the first sentence containing the topic's tokens contiguously,
/// compared case-insensitively as whole tokens.
pub fn find_mention(sentences: &[String], topic: &str) -> Option<usize> {
    let needle = tokenize(topic);
    if needle.is_empty() {
        return None;
    }
    sentences.iter().position(|s| {
        let hay = tokenize(s);
        hay.windows(needle.len()).any(|w| w == needle.as_slice())
    })
}

/// Text up to the first blank line; without a blank line, the first three
/// sentences. The range is set in the sentence-based case.
pub fn first_paragraph(body: &str) -> (String, Option<(usize, usize)>) {
    let mut offset = 0usize;
    for line in body.split_inclusive('\n') {
        if line.trim().is_empty() && offset > 0 {
            let para = body[..offset].trim();
            if !para.is_empty() {
                return (para.to_string(), None);
            }
        }
        offset += line.len();
    }
    let sentences = split_sentences(body);
    let take = sentences.len().min(3);
    if take == 0 {
        return (String::new(), None);
    }
    (sentences[..take].join(" "), Some((0, take - 1)))
}

/// Sentences taken on each side of the first topic mention.
pub const DEFAULT_WINDOW: usize = 2;

/// Builds the annotation context for `article` with respect to `topic`: the
/// sentences within `window` of the first mention, or the first paragraph
/// when the topic is not mentioned. The headline is always carried along.
pub fn extract_context_window(
    article: &Article,
    topic: &str,
    window: usize,
) -> Result<AnnotationContext> {
    if window < 1 {
        return Err(Error::InvalidArgument("context window must be >= 1".into()));
    }
    let headline = article.headline.trim().to_string();
    let body = article.body.trim();
    if headline.is_empty() && body.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "article `{}` has neither headline nor body",
            article.id
        )));
    }
    if body.is_empty() {
        return Ok(AnnotationContext {
            excerpt: headline.clone(),
            headline,
            source_sentence_range: None,
        });
    }
    let sentences = split_sentences(body);
    let (excerpt, range) = match find_mention(&sentences, topic) {
        Some(i) => {
            let lo = i.saturating_sub(window);
            let hi = (i + window).min(sentences.len() - 1);
            (sentences[lo..=hi].join(" "), Some((lo, hi)))
        }
        None => first_paragraph(body),
    };
    Ok(AnnotationContext {
        headline,
        excerpt,
        source_sentence_range: range,
    })
}
