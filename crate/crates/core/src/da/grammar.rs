//! Recursive-descent parser and canonical printer for dialogue-act lists.
//!
//! ```text
//! da_list := da ("," da)*
//! da      := intent [ "(" [ pair ("," pair)* ] ")" ]
//! pair    := slot "=" value
//! value   := "?" | value-string
//! ```
//!
//! Value strings run up to the next `,`, `(`, `)` or `=` and are trimmed.

use super::{
    is_token_char, validate_all, DialogueAct, Ontology, SlotValue, Value, REQUESTED_MARKER,
    RESERVED_CHARS,
};
use crate::error::{DaError, SyntaxError};

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn bump(&mut self) {
        if let Some(c) = self.peek() {
            self.pos += c.len_utf8();
        }
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
    }

    fn error(&self, expected: &'static str) -> SyntaxError {
        let found = match self.peek() {
            None => "end of input".to_string(),
            Some(c) => format!("`{c}`"),
        };
        SyntaxError {
            position: self.pos,
            expected,
            found,
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn token(&mut self, expected: &'static str) -> Result<&'a str, SyntaxError> {
        let start = self.pos;
        while self.peek().is_some_and(is_token_char) {
            self.bump();
        }
        if self.pos == start {
            return Err(self.error(expected));
        }
        Ok(&self.src[start..self.pos])
    }

    fn value(&mut self) -> Result<Value, SyntaxError> {
        let start = self.pos;
        while self.peek().is_some_and(|c| !RESERVED_CHARS.contains(&c)) {
            self.bump();
        }
        let raw = self.src[start..self.pos].trim();
        if raw.is_empty() {
            // report at the delimiter that ended the (empty) value
            return Err(self.error("value"));
        }
        Ok(if raw == REQUESTED_MARKER {
            Value::Requested
        } else {
            Value::Text(raw.to_string())
        })
    }

    fn pair(&mut self) -> Result<SlotValue, SyntaxError> {
        let slot = self.token("slot name")?.to_string();
        self.skip_ws();
        if !self.eat('=') {
            return Err(self.error("`=`"));
        }
        let value = self.value()?;
        Ok(SlotValue { slot, value })
    }

    fn act(&mut self) -> Result<DialogueAct, SyntaxError> {
        self.skip_ws();
        let intent = self.token("intent")?.to_string();
        self.skip_ws();
        let mut pairs = Vec::new();
        if self.eat('(') {
            self.skip_ws();
            if !self.eat(')') {
                loop {
                    self.skip_ws();
                    pairs.push(self.pair()?);
                    self.skip_ws();
                    if self.eat(',') {
                        continue;
                    }
                    if self.eat(')') {
                        break;
                    }
                    return Err(self.error("`,` or `)`"));
                }
            }
        }
        Ok(DialogueAct { intent, pairs })
    }
}

/// Parses a dialogue-act list without consulting an ontology.
pub fn parse_das(text: &str) -> Result<Vec<DialogueAct>, SyntaxError> {
    let mut cursor = Cursor { src: text, pos: 0 };
    let mut das = vec![cursor.act()?];
    loop {
        cursor.skip_ws();
        if cursor.peek().is_none() {
            return Ok(das);
        }
        if !cursor.eat(',') {
            return Err(cursor.error("`,` or end of input"));
        }
        das.push(cursor.act()?);
    }
}

/// Parses a dialogue-act list; with `validate` set every act must also pass
/// speaker-independent ontology validation.
pub fn parse_da_list(text: &str, ontology: &Ontology, validate: bool) -> Result<Vec<DialogueAct>, DaError> {
    let das = parse_das(text)?;
    if validate {
        validate_all(&das, ontology, None)?;
    }
    Ok(das)
}

/// Canonical surface form: `intent (slot=value, ...)` joined by `", "`.
pub fn serialize_da_list(das: &[DialogueAct]) -> String {
    das.iter()
        .map(|da| da.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bare_parentheses() {
        assert_eq!(parse_das("ask_question ()").unwrap(), vec![DialogueAct::new("ask_question")]);
    }

    #[test]
    fn two_pairs_in_order() {
        let das = parse_das("inform (user_accompany=child, user_food_type=steak)").unwrap();
        assert_eq!(
            das,
            vec![DialogueAct::new("inform")
                .with("user_accompany", "child")
                .with("user_food_type", "steak")]
        );
    }

    #[test]
    fn values_with_spaces_colons_hyphens() {
        let text = "inform (attraction_name=Tokyo Trick Art Museum, attraction_open_time=11:00-21:00), \
                    inform (attraction_name=Tokyo Water Science Museum, attraction_open_time=9:30-17:00)";
        let das = parse_das(text).unwrap();
        assert_eq!(das.len(), 2);
        assert_eq!(das[0].text_of("attraction_name"), Some("Tokyo Trick Art Museum"));
        assert_eq!(das[1].text_of("attraction_open_time"), Some("9:30-17:00"));
    }

    #[test]
    fn empty_value_is_syntax_error() {
        let err = parse_das("inform (user_accompany=)").unwrap_err();
        assert_eq!(err.expected, "value");
        assert_eq!(err.position, "inform (user_accompany=".len());
    }

    #[test]
    fn requested_marker() {
        let das = parse_das("request (attraction_open_time=?)").unwrap();
        assert_eq!(das[0].pairs[0].value, Value::Requested);
        let das = parse_das("request (attraction_open_time= ? )").unwrap();
        assert_eq!(das[0].pairs[0].value, Value::Requested);
    }

    #[test]
    fn bare_intents_and_whitespace() {
        let das = parse_das("  greet ,thankyou(  ) ,  goodbye").unwrap();
        let intents: Vec<_> = das.iter().map(|d| d.intent.as_str()).collect();
        assert_eq!(intents, ["greet", "thankyou", "goodbye"]);
        assert_eq!(serialize_da_list(&das), "greet (), thankyou (), goodbye ()");
    }

    #[test]
    fn non_ascii_values() {
        let das = parse_das("inform (user_name=山田 太郎)").unwrap();
        assert_eq!(das[0].text_of("user_name"), Some("山田 太郎"));
    }

    #[test]
    fn malformed_inputs() {
        for (text, expected) in [
            ("", "intent"),
            ("   ", "intent"),
            ("inform (", "slot name"),
            ("inform (a=1", "`,` or `)`"),
            ("inform (a 1)", "`=`"),
            ("inform (a=1,)", "slot name"),
            ("inform (a=b=c)", "`,` or `)`"),
            ("inform x", "`,` or end of input"),
            ("inform (),", "intent"),
            ("(a=1)", "intent"),
        ] {
            let err = parse_das(text).unwrap_err();
            assert_eq!(err.expected, expected, "input {text:?}");
        }
    }

    #[test]
    fn serialize_canonical_forms() {
        assert_eq!(serialize_da_list(&[DialogueAct::new("goodbye")]), "goodbye ()");
        let das = parse_das("good (user_food_type=steak)").unwrap();
        assert_eq!(serialize_da_list(&das), "good (user_food_type=steak)");
    }

    proptest! {
        #[test]
        fn never_panics(s in "\\PC*") {
            let _ = parse_das(&s);
        }

        #[test]
        fn never_panics_on_grammar_alphabet(s in "[a-z_=(),? \u{3042}]{0,40}") {
            let _ = parse_das(&s);
        }

        #[test]
        fn canonical_form_is_a_fixed_point(s in "[a-c_]{1,3}( ?\\(( ?[a-c]{1,2} ?= ?[a-z0-9: ?-]{1,6} ?,?){0,3}\\))?(, ?[a-c]{1,3})?") {
            if let Ok(das) = parse_das(&s) {
                let once = serialize_da_list(&das);
                let twice = serialize_da_list(&parse_das(&once).unwrap());
                prop_assert_eq!(once, twice);
            }
        }
    }
}
