//! BIO label parsing, validity and span assembly.

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BioError {
    #[error("label {0:?} does not follow the B-/I-/O naming scheme")]
    UnknownPrefix(String),
    #[error("label {label:?} at position {position} is not preceded by B or I of the same class")]
    Invalid { position: usize, label: String },
    #[error("{tokens} tokens but {labels} labels")]
    LengthMismatch { tokens: usize, labels: usize },
}

/// A parsed BIO tag. Both `B-x` and `B_x` spellings are accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tag<'a> {
    Outside,
    Begin(&'a str),
    Inside(&'a str),
}

impl<'a> Tag<'a> {
    pub fn parse(label: &'a str) -> Result<Self, BioError> {
        if label == "O" {
            return Ok(Tag::Outside);
        }
        let mut chars = label.char_indices();
        let head = chars.next().map(|(_, c)| c);
        let sep = chars.next().map(|(_, c)| c);
        match (head, sep) {
            (Some('B'), Some('-' | '_')) if label.len() > 2 => Ok(Tag::Begin(&label[2..])),
            (Some('I'), Some('-' | '_')) if label.len() > 2 => Ok(Tag::Inside(&label[2..])),
            _ => Err(BioError::UnknownPrefix(label.to_string())),
        }
    }

    pub fn class(&self) -> Option<&'a str> {
        match *self {
            Tag::Outside => None,
            Tag::Begin(c) | Tag::Inside(c) => Some(c),
        }
    }

    /// Whether `self` may directly follow `prev` (`None` = sequence start).
    pub fn may_follow(&self, prev: Option<Tag<'_>>) -> bool {
        match (*self, prev) {
            (Tag::Inside(c), Some(Tag::Begin(p) | Tag::Inside(p))) => c == p,
            (Tag::Inside(_), _) => false,
            _ => true,
        }
    }
}

/// Position of the first BIO violation, if any.
pub fn first_violation<S: AsRef<str>>(labels: &[S]) -> Result<Option<usize>, BioError> {
    let mut prev = None;
    for (i, label) in labels.iter().enumerate() {
        let tag = Tag::parse(label.as_ref())?;
        if !tag.may_follow(prev) {
            return Ok(Some(i));
        }
        prev = Some(tag);
    }
    Ok(None)
}

/// True iff every `I-x` is preceded by `B-x` or `I-x`.
pub fn bio_valid<S: AsRef<str>>(labels: &[S]) -> Result<bool, BioError> {
    Ok(first_violation(labels)?.is_none())
}

/// One token of document text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Token {
    pub text: String,
    /// Set when the tokenizer split this piece off the previous token, so
    /// the two are glued back without a space.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub joins_previous: bool,
}

impl Token {
    pub fn new(text: impl Into<String>) -> Self {
        Self { text: text.into(), joins_previous: false }
    }

    pub fn joined(text: impl Into<String>) -> Self {
        Self { text: text.into(), joins_previous: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Span {
    pub text: String,
    pub tokens: Range<usize>,
}

pub type Spans = BTreeMap<String, Vec<Span>>;

/// Groups maximal `B-x I-x*` runs into spans keyed by class.
pub fn extract_spans<S: AsRef<str>>(tokens: &[Token], labels: &[S]) -> Result<Spans, BioError> {
    collect_spans(tokens, labels, true)
}

/// Like [`extract_spans`], but an `I-x` that cannot continue a span opens a new one.
pub fn extract_spans_lenient<S: AsRef<str>>(tokens: &[Token], labels: &[S]) -> Result<Spans, BioError> {
    collect_spans(tokens, labels, false)
}

fn collect_spans<S: AsRef<str>>(tokens: &[Token], labels: &[S], strict: bool) -> Result<Spans, BioError> {
    if tokens.len() != labels.len() {
        return Err(BioError::LengthMismatch { tokens: tokens.len(), labels: labels.len() });
    }
    let mut spans = Spans::new();
    let mut open: Option<(&str, usize)> = None;
    let mut prev = None;

    let close = |class: &str, range: Range<usize>, spans: &mut Spans| {
        let mut text = String::new();
        for (k, tok) in tokens[range.clone()].iter().enumerate() {
            if k > 0 && !tok.joins_previous {
                text.push(' ');
            }
            text.push_str(&tok.text);
        }
        spans.entry(class.to_string()).or_default().push(Span { text, tokens: range });
    };

    for (i, label) in labels.iter().enumerate() {
        let label = label.as_ref();
        let mut tag = Tag::parse(label)?;
        if !tag.may_follow(prev) {
            if strict {
                return Err(BioError::Invalid { position: i, label: label.to_string() });
            }
            if let Tag::Inside(class) = tag {
                tag = Tag::Begin(class);
            }
        }
        match tag {
            Tag::Inside(_) => {}
            Tag::Outside | Tag::Begin(_) => {
                if let Some((class, start)) = open.take() {
                    close(class, start..i, &mut spans);
                }
                if let Tag::Begin(class) = tag {
                    open = Some((class, i));
                }
            }
        }
        prev = Some(tag);
    }
    if let Some((class, start)) = open {
        close(class, start..labels.len(), &mut spans);
    }
    Ok(spans)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(parts: &[(&str, bool)]) -> Vec<Token> {
        parts.iter().map(|&(t, j)| Token { text: t.into(), joins_previous: j }).collect()
    }

    #[test]
    fn walkthrough_validity() {
        assert!(!bio_valid(&["B_cash", "I_total", "I_total"]).unwrap());
        assert!(bio_valid(&["B_total", "I_total", "I_total"]).unwrap());
        assert!(bio_valid(&["O", "O", "O"]).unwrap());
    }

    #[test]
    fn invalid_starts_and_unknown_prefix() {
        assert!(!bio_valid(&["I-x"]).unwrap());
        assert!(!bio_valid(&["O", "I-x"]).unwrap());
        assert!(bio_valid(&["B-x", "B-y", "I-y", "O", "B-x"]).unwrap());
        assert_eq!(bio_valid(&["X-total"]), Err(BioError::UnknownPrefix("X-total".into())));
        assert!(bio_valid(&["B-"]).is_err());
        assert_eq!(first_violation(&["B-a", "I-a", "I-b"]).unwrap(), Some(2));
    }

    #[test]
    fn spans_join_subtokens() {
        let t = toks(&[("56", false), (".", true), ("000", true)]);
        let s = extract_spans(&t, &["B_cash", "I_cash", "I_cash"]).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s["cash"], vec![Span { text: "56.000".into(), tokens: 0..3 }]);
    }

    #[test]
    fn all_outside_is_empty() {
        let t = toks(&[("a", false), ("b", false)]);
        assert!(extract_spans(&t, &["O", "O"]).unwrap().is_empty());
    }

    #[test]
    fn separate_runs_give_separate_spans() {
        let t = toks(&[
            ("TOTAL", false),
            ("12", false),
            (".", true),
            ("50", true),
            ("and", false),
            ("7", false),
            ("USD", false),
        ]);
        let labels = ["O", "B-total", "I-total", "I-total", "O", "B-total", "I-total"];
        let s = extract_spans(&t, &labels).unwrap();
        assert_eq!(
            s["total"],
            vec![Span { text: "12.50".into(), tokens: 1..4 }, Span { text: "7 USD".into(), tokens: 5..7 },]
        );
        // Adjacent B tags split spans too.
        let s = extract_spans(&t[..2], &["B-total", "B-total"]).unwrap();
        assert_eq!(s["total"].len(), 2);
    }

    #[test]
    fn lenient_spans_restart_on_stray_inside() {
        let t = toks(&[("a", false), ("b", false), ("c", false)]);
        let s = extract_spans_lenient(&t, &["O", "I-x", "I-y"]).unwrap();
        assert_eq!(s["x"][0].tokens, 1..2);
        assert_eq!(s["y"][0].tokens, 2..3);
    }

    #[test]
    fn spans_reject_invalid_input() {
        let t = toks(&[("a", false), ("b", false)]);
        assert!(matches!(extract_spans(&t, &["O", "I-x"]), Err(BioError::Invalid { position: 1, .. })));
        assert!(matches!(extract_spans(&t, &["O"]), Err(BioError::LengthMismatch { .. })));
    }
}
