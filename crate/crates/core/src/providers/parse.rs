//! Strict parsers for the tagged and JSON answer formats.
//!
//! Every parser rejects empty input with an error. None of them substitutes a
//! default value for something it could not read.

use serde_json::Value;
use thiserror::Error;

use crate::hypothesis::Strategy;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("response is empty")]
    EmptyInput,
    #[error("no <{tag}>...</{tag}> span in response")]
    MissingTag { tag: String },
    #[error("<{tag}> span is empty")]
    EmptyTag { tag: String },
    #[error("<{tag}> content `{content}` is not a number")]
    NonNumeric { tag: String, content: String },
    #[error("<{tag}> value {value} outside [{lo}, {hi}]")]
    OutOfRange {
        tag: String,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("<{tag}> value {value} is not 0 or 1")]
    NonBinary { tag: String, value: f64 },
    #[error("no JSON object in response")]
    NoJsonObject,
    #[error("JSON object is not closed")]
    UnbalancedJson,
    #[error("malformed JSON: {0}")]
    InvalidJson(String),
    #[error("JSON object lacks key `{0}`")]
    MissingKey(&'static str),
    #[error("`optimized hypothesis` is empty")]
    EmptyHypothesis,
    #[error("strategy `{0}` is not one of A, B, C")]
    InvalidStrategy(String),
    #[error("verdict `{0}` is not A or B")]
    InvalidVerdict(String),
}

/// Inclusive bounds for a tagged scalar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarRange {
    pub lo: f64,
    pub hi: f64,
}

impl ScalarRange {
    pub const UNIT: ScalarRange = ScalarRange { lo: 0.0, hi: 1.0 };
}

/// Content of the first complete `<tag>...</tag>` span, trimmed.
pub fn extract_tag<'a>(response: &'a str, tag: &str) -> Result<&'a str, ParseError> {
    if response.trim().is_empty() {
        return Err(ParseError::EmptyInput);
    }
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let mut search = response;
    while let Some(start) = search.find(&open) {
        let body = &search[start + open.len()..];
        match body.find(&close) {
            // A nested opening tag before the close means this span is not
            // well formed; skip to the inner one.
            Some(end) if !body[..end].contains(&open) => {
                let content = body[..end].trim();
                if content.is_empty() {
                    return Err(ParseError::EmptyTag { tag: tag.into() });
                }
                return Ok(content);
            }
            Some(_) => search = body,
            None => break,
        }
    }
    Err(ParseError::MissingTag { tag: tag.into() })
}

fn parse_number(tag: &str, content: &str) -> Result<f64, ParseError> {
    content
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| ParseError::NonNumeric {
            tag: tag.into(),
            content: content.into(),
        })
}

/// Reads a decimal scalar from `<tag>`. Out-of-range values are clamped when
/// `clamp` is set and rejected otherwise.
pub fn parse_tagged_scalar(
    response: &str,
    tag: &str,
    range: ScalarRange,
    clamp: bool,
) -> Result<f64, ParseError> {
    let value = parse_number(tag, extract_tag(response, tag)?)?;
    if value < range.lo || value > range.hi {
        if clamp {
            return Ok(value.clamp(range.lo, range.hi));
        }
        return Err(ParseError::OutOfRange {
            tag: tag.into(),
            value,
            lo: range.lo,
            hi: range.hi,
        });
    }
    Ok(value)
}

/// Reads a strictly binary `<tag>`: the value must equal 0 or 1.
pub fn parse_tagged_binary(response: &str, tag: &str) -> Result<bool, ParseError> {
    let value = parse_number(tag, extract_tag(response, tag)?)?;
    if value == 0.0 {
        Ok(false)
    } else if value == 1.0 {
        Ok(true)
    } else {
        Err(ParseError::NonBinary {
            tag: tag.into(),
            value,
        })
    }
}

/// Slice of the first brace-balanced `{...}` in `text`, honouring JSON string
/// literals and escapes.
pub fn first_json_object(text: &str) -> Result<&str, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::EmptyInput);
    }
    let start = text.find('{').ok_or(ParseError::NoJsonObject)?;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (offset, c) in text[start..].char_indices() {
        if in_string {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_string = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Ok(&text[start..start + offset + 1]);
                }
            }
            _ => {}
        }
    }
    Err(ParseError::UnbalancedJson)
}

/// Parsed answer of the refinement prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementReply {
    pub hypothesis: String,
    pub strategy: Strategy,
}

pub fn parse_refinement_json(response: &str) -> Result<RefinementReply, ParseError> {
    let object = first_json_object(response)?;
    let value: Value =
        serde_json::from_str(object).map_err(|e| ParseError::InvalidJson(e.to_string()))?;
    let map = value.as_object().ok_or(ParseError::NoJsonObject)?;

    let hypothesis = map
        .get("optimized hypothesis")
        .ok_or(ParseError::MissingKey("optimized hypothesis"))?
        .as_str()
        .ok_or_else(|| ParseError::InvalidJson("`optimized hypothesis` is not a string".into()))?
        .trim();
    if hypothesis.is_empty() {
        return Err(ParseError::EmptyHypothesis);
    }

    let raw = map.get("strategy").ok_or(ParseError::MissingKey("strategy"))?;
    let letter = raw.as_str().map(str::trim).unwrap_or_default();
    let strategy = match letter.chars().collect::<Vec<_>>().as_slice() {
        [c] => Strategy::from_letter(*c),
        _ => None,
    }
    .ok_or_else(|| ParseError::InvalidStrategy(raw.as_str().map_or_else(|| raw.to_string(), str::to_string)))?;

    Ok(RefinementReply {
        hypothesis: hypothesis.to_string(),
        strategy,
    })
}

/// Verdict of the pairwise judge prompt: `true` when the first-presented
/// hypothesis ("A") wins.
pub fn parse_verdict(response: &str) -> Result<bool, ParseError> {
    let content = extract_tag(response, "winner")?;
    match content {
        "A" | "a" => Ok(true),
        "B" | "b" => Ok(false),
        other => Err(ParseError::InvalidVerdict(other.to_string())),
    }
}
