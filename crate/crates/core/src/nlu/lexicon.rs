//! Keyword lexicon: entries fire when every keyword group is found in the
//! normalized utterance, optionally binding slot values through captures.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::Path;

use regex::{Regex, RegexBuilder};
use serde::Deserialize;

use crate::da::{parse_das, sanitize_value, validate_da, DialogueAct, Ontology, Speaker, Value};
use crate::error::NluError;

/// Case-folds and collapses whitespace.
pub fn normalize(text: &str) -> String {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

#[derive(Debug, Clone, Deserialize)]
struct LexiconDoc {
    #[serde(default)]
    entries: Vec<EntryDoc>,
}

#[derive(Debug, Clone, Deserialize)]
struct EntryDoc {
    keywords: Vec<Vec<String>>,
    #[serde(default)]
    captures: Vec<CaptureDoc>,
    da_template: String,
    #[serde(default)]
    priority: i32,
}

#[derive(Debug, Clone, Deserialize)]
struct CaptureDoc {
    slot: String,
    /// canonical value -> surface strings
    #[serde(default)]
    values: Option<BTreeMap<String, Vec<String>>>,
    #[serde(default)]
    regex: Option<String>,
}

#[derive(Debug, Clone)]
enum CapturePattern {
    Values(Vec<(String, String)>),
    Regex(Regex),
}

#[derive(Debug, Clone)]
pub struct Capture {
    slot: String,
    pattern: CapturePattern,
}

#[derive(Debug, Clone)]
pub struct LexiconEntry {
    keywords: Vec<Vec<String>>,
    captures: Vec<Capture>,
    template: Vec<DialogueAct>,
    pub priority: i32,
}

/// One fired entry.
#[derive(Debug, Clone)]
pub struct EntryMatch {
    pub entry: usize,
    pub das: Vec<DialogueAct>,
    pub score: u32,
    pub priority: i32,
    pub spans: Vec<Range<usize>>,
}

impl EntryMatch {
    pub fn first_position(&self) -> usize {
        self.spans.iter().map(|s| s.start).min().unwrap_or(0)
    }

    pub fn overlaps(&self, other: &EntryMatch) -> bool {
        self.spans
            .iter()
            .any(|a| other.spans.iter().any(|b| a.start < b.end && b.start < a.end))
    }
}

#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
}

fn placeholder(value: &Value) -> Option<&str> {
    value
        .as_text()?
        .strip_prefix('{')?
        .strip_suffix('}')
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric()
}

/// Finds `needle` in `hay`, requiring word boundaries where the needle
/// begins or ends with an ASCII alphanumeric character. Scripts without
/// spaces (Japanese) match as plain substrings.
pub fn find_keyword(hay: &str, needle: &str) -> Option<Range<usize>> {
    if needle.is_empty() {
        return None;
    }
    let starts_word = needle.chars().next().is_some_and(is_word_char);
    let ends_word = needle.chars().last().is_some_and(is_word_char);
    let mut from = 0;
    while let Some(rel) = hay[from..].find(needle) {
        let start = from + rel;
        let end = start + needle.len();
        let before_ok = !starts_word || !hay[..start].chars().last().is_some_and(is_word_char);
        let after_ok = !ends_word || !hay[end..].chars().next().is_some_and(is_word_char);
        if before_ok && after_ok {
            return Some(start..end);
        }
        from = start + needle.chars().next().map_or(1, char::len_utf8);
    }
    None
}

impl Lexicon {
    pub fn load(path: impl AsRef<Path>, ontology: &Ontology) -> Result<Self, NluError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| NluError::Io(path.display().to_string(), e.to_string()))?;
        Self::from_toml_str(&text, ontology)
    }

    pub fn from_toml_str(text: &str, ontology: &Ontology) -> Result<Self, NluError> {
        let doc: LexiconDoc = toml::from_str(text).map_err(|e| NluError::Lexicon {
            entry: 0,
            message: e.to_string(),
        })?;
        let entries = doc
            .entries
            .into_iter()
            .enumerate()
            .map(|(i, e)| build_entry(i, e, ontology))
            .collect::<Result<_, _>>()?;
        Ok(Lexicon { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Every entry that fires on the (raw) utterance, in file order.
    pub fn matches(&self, utterance: &str) -> Vec<EntryMatch> {
        let normalized = normalize(utterance);
        let spaced = utterance.split_whitespace().collect::<Vec<_>>().join(" ");
        self.entries
            .iter()
            .enumerate()
            .filter_map(|(i, entry)| entry.try_match(i, &normalized, &spaced))
            .collect()
    }
}

fn build_entry(index: usize, doc: EntryDoc, ontology: &Ontology) -> Result<LexiconEntry, NluError> {
    let fail = |message: String| NluError::Lexicon {
        entry: index,
        message,
    };
    if doc.keywords.is_empty() || doc.keywords.iter().any(|g| g.iter().all(|k| k.trim().is_empty())) {
        return Err(fail("keyword groups must be non-empty".into()));
    }
    let keywords = doc
        .keywords
        .into_iter()
        .map(|g| g.iter().map(|k| normalize(k)).filter(|k| !k.is_empty()).collect())
        .collect();

    let template = parse_das(&doc.da_template).map_err(|e| fail(format!("da_template: {e}")))?;

    let mut captures = Vec::new();
    for cap in doc.captures {
        let pattern = match (cap.values, cap.regex) {
            (Some(_), Some(_)) => {
                return Err(fail(format!("capture `{}` has both values and regex", cap.slot)))
            }
            (None, Some(re)) => CapturePattern::Regex(
                RegexBuilder::new(&re)
                    .case_insensitive(true)
                    .build()
                    .map_err(|e| fail(format!("capture `{}`: {e}", cap.slot)))?,
            ),
            (values, None) => {
                let table = match values {
                    Some(table) => table,
                    None => {
                        let def = ontology
                            .slot(&cap.slot)
                            .filter(|d| d.is_categorical())
                            .ok_or_else(|| {
                                fail(format!("capture `{}` needs values or regex", cap.slot))
                            })?;
                        def.allowed_values
                            .iter()
                            .map(|v| (v.clone(), vec![v.replace('_', " ")]))
                            .collect()
                    }
                };
                let mut surfaces: Vec<(String, String)> = table
                    .into_iter()
                    .flat_map(|(value, forms)| {
                        forms.into_iter().map(move |f| (normalize(&f), value.clone()))
                    })
                    .filter(|(f, _)| !f.is_empty())
                    .collect();
                // longest surface first so "tokyo water science museum" beats "museum"
                surfaces.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.cmp(b)));
                CapturePattern::Values(surfaces)
            }
        };
        captures.push(Capture {
            slot: cap.slot,
            pattern,
        });
    }

    // every placeholder must be bound by a capture, and the template must
    // validate once bound
    let mut probe = template.clone();
    for da in &mut probe {
        for pair in &mut da.pairs {
            if let Some(name) = placeholder(&pair.value) {
                let cap = captures
                    .iter()
                    .find(|c| c.slot == name)
                    .ok_or_else(|| fail(format!("placeholder `{{{name}}}` has no capture")))?;
                let sample = match &cap.pattern {
                    CapturePattern::Values(v) => v.first().map(|(_, value)| value.clone()),
                    CapturePattern::Regex(_) => None,
                };
                pair.value = Value::Text(sample.unwrap_or_else(|| "sample".to_string()));
            }
        }
        let report = validate_da(da, ontology, Some(Speaker::Customer));
        if !report.is_empty() {
            return Err(fail(format!("da_template `{da}`: {report}")));
        }
    }
    if let Some(cap) = captures.iter().find(|c| {
        !template
            .iter()
            .flat_map(|d| d.pairs.iter())
            .any(|p| placeholder(&p.value) == Some(c.slot.as_str()))
    }) {
        return Err(fail(format!("capture `{}` is never used", cap.slot)));
    }

    Ok(LexiconEntry {
        keywords,
        captures,
        template,
        priority: doc.priority,
    })
}

impl LexiconEntry {
    fn try_match(&self, index: usize, normalized: &str, spaced: &str) -> Option<EntryMatch> {
        let mut spans = Vec::new();
        for group in &self.keywords {
            let hit = group
                .iter()
                .filter_map(|k| find_keyword(normalized, k))
                .min_by_key(|r| (r.start, std::cmp::Reverse(r.end)))?;
            spans.push(hit);
        }
        let mut bound: Vec<(&str, String)> = Vec::new();
        for cap in &self.captures {
            let (value, span) = match &cap.pattern {
                CapturePattern::Values(surfaces) => surfaces
                    .iter()
                    .filter_map(|(surface, value)| {
                        find_keyword(normalized, surface).map(|r| (value.clone(), r))
                    })
                    .min_by_key(|(_, r)| (r.start, std::cmp::Reverse(r.end)))?,
                CapturePattern::Regex(re) => {
                    let caps = re.captures(spaced)?;
                    let group = caps.get(1).or_else(|| caps.get(0))?;
                    let text = group.as_str().trim_end_matches(['.', '!', '?', '。', '！', '？']);
                    (sanitize_value(text)?, group.range())
                }
            };
            spans.push(span);
            bound.push((cap.slot.as_str(), value));
        }
        let das = self
            .template
            .iter()
            .map(|da| {
                let mut da = da.clone();
                for pair in &mut da.pairs {
                    if let Some(name) = placeholder(&pair.value) {
                        let value = bound.iter().find(|(s, _)| *s == name).map(|(_, v)| v.clone())?;
                        pair.value = Value::Text(value);
                    }
                }
                Some(da)
            })
            .collect::<Option<Vec<_>>>()?;
        Some(EntryMatch {
            entry: index,
            das,
            score: self.keywords.len() as u32,
            priority: self.priority,
            spans,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::shipped_ontology;

    #[test]
    fn keyword_boundaries() {
        assert_eq!(find_keyword("is it open", "open"), Some(6..10));
        assert_eq!(find_keyword("opening hours", "open"), None);
        assert_eq!(find_keyword("i know", "no"), None);
        assert_eq!(find_keyword("no, thanks", "no"), Some(0..2));
        assert!(find_keyword("子供と行きます", "子供").is_some());
        assert!(find_keyword("hours?", "?").is_some());
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize("  What ARE\tits  hours? "), "what are its hours?");
    }

    #[test]
    fn placeholders_need_captures() {
        let err = Lexicon::from_toml_str(
            r#"
            [[entries]]
            keywords = [["steak"]]
            da_template = "inform (user_food_type={user_food_type})"
            "#,
            &shipped_ontology(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("no capture"), "{err}");
    }

    #[test]
    fn template_must_be_customer_valid() {
        let err = Lexicon::from_toml_str(
            r#"
            [[entries]]
            keywords = [["hello"]]
            da_template = "welcome ()"
            "#,
            &shipped_ontology(),
        )
        .unwrap_err();
        assert!(matches!(err, NluError::Lexicon { entry: 0, .. }));
    }

    #[test]
    fn empty_keyword_group_rejected() {
        let err = Lexicon::from_toml_str(
            r#"
            [[entries]]
            keywords = [[]]
            da_template = "greet ()"
            "#,
            &shipped_ontology(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("non-empty"));
    }

    #[test]
    fn captures_bind_values() {
        let lex = Lexicon::from_toml_str(
            r#"
            [[entries]]
            keywords = [["eat", "food"]]
            da_template = "inform (user_food_type={user_food_type})"
            [[entries.captures]]
            slot = "user_food_type"
            values = { steak = ["steak", "beef"], sushi = ["sushi"] }

            [[entries]]
            keywords = [["name"]]
            da_template = "inform (user_name={user_name})"
            [[entries.captures]]
            slot = "user_name"
            regex = "my name is (.+)"
            "#,
            &shipped_ontology(),
        )
        .unwrap();
        let m = lex.matches("I want to eat Beef tonight");
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].das[0].to_string(), "inform (user_food_type=steak)");
        assert_eq!(m[0].score, 1);

        let m = lex.matches("My name is Taro Yamada.");
        assert_eq!(m[0].das[0].to_string(), "inform (user_name=Taro Yamada)");

        assert!(lex.matches("I want to eat").is_empty());
    }
}
