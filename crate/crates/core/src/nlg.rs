//! Template realization of system acts plus expression/motion cues.
//!
//! A template is keyed by intent, the exact set of slot names and a language
//! tag. There is no nearest-match: an act whose key has no template is a
//! [`NlgError::TemplateMiss`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::da::{DialogueAct, Ontology, Speaker};
use crate::error::NlgError;

/// `(intent, slot names)`
pub type ActKey = (String, BTreeSet<String>);

pub fn act_key(da: &DialogueAct) -> ActKey {
    (da.intent.clone(), da.slot_names().map(str::to_string).collect())
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([A-Za-z0-9_-]+)\}").expect("valid regex"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub intent: String,
    pub required_slots: BTreeSet<String>,
    pub pattern: String,
    pub language: String,
}

#[derive(Debug, Clone, Deserialize)]
struct TemplateDoc {
    #[serde(default)]
    slots: Vec<String>,
    pattern: String,
    language: String,
}

#[derive(Debug, Clone, Default)]
pub struct TemplateSet {
    by_key: HashMap<(String, BTreeSet<String>, String), Template>,
}

impl TemplateSet {
    pub fn new(templates: impl IntoIterator<Item = Template>) -> Result<Self, NlgError> {
        let mut set = TemplateSet::default();
        for t in templates {
            set.insert(t)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, template: Template) -> Result<(), NlgError> {
        for cap in placeholder_re().captures_iter(&template.pattern) {
            let name = &cap[1];
            if !template.required_slots.contains(name) {
                return Err(NlgError::StrayPlaceholder {
                    intent: template.intent.clone(),
                    placeholder: name.to_string(),
                });
            }
        }
        let key = (
            template.intent.clone(),
            template.required_slots.clone(),
            template.language.clone(),
        );
        if self.by_key.contains_key(&key) {
            return Err(NlgError::DuplicateTemplate {
                intent: key.0,
                slots: key.1.into_iter().collect(),
                language: key.2,
            });
        }
        self.by_key.insert(key, template);
        Ok(())
    }

    /// Removes a template, returning it. Used to probe coverage.
    pub fn remove(&mut self, intent: &str, slots: &BTreeSet<String>, language: &str) -> Option<Template> {
        self.by_key
            .remove(&(intent.to_string(), slots.clone(), language.to_string()))
    }

    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, NlgError> {
        let mut set = TemplateSet::default();
        set.add_toml_str(text, origin)?;
        Ok(set)
    }

    pub fn add_toml_str(&mut self, text: &str, origin: &str) -> Result<(), NlgError> {
        let doc: BTreeMap<String, Vec<TemplateDoc>> =
            toml::from_str(text).map_err(|e| NlgError::Format(origin.to_string(), e.to_string()))?;
        for (intent, entries) in doc {
            for e in entries {
                self.insert(Template {
                    intent: intent.clone(),
                    required_slots: e.slots.into_iter().collect(),
                    pattern: e.pattern,
                    language: e.language,
                })?;
            }
        }
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(paths: &[P]) -> Result<Self, NlgError> {
        let mut set = TemplateSet::default();
        for path in paths {
            let path = path.as_ref();
            let text = std::fs::read_to_string(path)
                .map_err(|e| NlgError::Io(path.display().to_string(), e.to_string()))?;
            set.add_toml_str(&text, &path.display().to_string())?;
        }
        Ok(set)
    }

    pub fn get(&self, intent: &str, slots: &BTreeSet<String>, language: &str) -> Option<&Template> {
        self.by_key
            .get(&(intent.to_string(), slots.clone(), language.to_string()))
    }

    pub fn languages(&self) -> BTreeSet<String> {
        self.by_key.keys().map(|k| k.2.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.by_key.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_key.is_empty()
    }
}

/// Renders each act with its template and joins the results with a space.
pub fn realize(das: &[DialogueAct], templates: &TemplateSet, language: &str) -> Result<String, NlgError> {
    let mut parts = Vec::with_capacity(das.len());
    for da in das {
        let (intent, slots) = act_key(da);
        let template = templates
            .get(&intent, &slots, language)
            .ok_or_else(|| NlgError::TemplateMiss {
                intent: intent.clone(),
                slots: slots.iter().cloned().collect(),
                language: language.to_string(),
            })?;
        let text = placeholder_re().replace_all(&template.pattern, |cap: &regex::Captures<'_>| {
            da.get(&cap[1]).map(|v| v.to_string()).unwrap_or_default()
        });
        parts.push(text.into_owned());
    }
    Ok(parts.join(" "))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expression {
    Neutral,
    SmallSmile,
    LargeSmile,
    Concerned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Motion {
    None,
    Nod,
    Bow,
    GesturePoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gesture {
    pub expression: Expression,
    pub motion: Motion,
}

impl Gesture {
    pub const NEUTRAL: Gesture = Gesture {
        expression: Expression::Neutral,
        motion: Motion::None,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CueRule {
    pub during: Gesture,
    pub after: Gesture,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cue {
    pub intent: String,
    pub during: Gesture,
    pub after: Gesture,
}

/// Expression and motion rules for every system intent.
#[derive(Debug, Clone)]
pub struct CueRules {
    rules: BTreeMap<String, CueRule>,
}

impl CueRules {
    /// Fails unless every intent the system can produce has a rule.
    pub fn new(rules: BTreeMap<String, CueRule>, ontology: &Ontology) -> Result<Self, NlgError> {
        if let Some(missing) = ontology
            .intents_for(Speaker::System)
            .find(|i| !rules.contains_key(&i.name))
        {
            return Err(NlgError::MissingCue(missing.name.clone()));
        }
        Ok(CueRules { rules })
    }

    pub fn from_toml_str(text: &str, ontology: &Ontology) -> Result<Self, NlgError> {
        let rules = toml::from_str(text).map_err(|e| NlgError::Format("cue rules".into(), e.to_string()))?;
        Self::new(rules, ontology)
    }

    pub fn load(path: impl AsRef<Path>, ontology: &Ontology) -> Result<Self, NlgError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| NlgError::Io(path.display().to_string(), e.to_string()))?;
        Self::from_toml_str(&text, ontology)
    }

    pub fn rule(&self, intent: &str) -> Option<&CueRule> {
        self.rules.get(intent)
    }
}

/// One cue per act. Intents without a rule (only possible for acts outside
/// the system inventory) stay neutral.
pub fn cues_for(das: &[DialogueAct], rules: &CueRules) -> Vec<Cue> {
    das.iter()
        .map(|da| {
            let rule = rules.rule(&da.intent).copied().unwrap_or(CueRule {
                during: Gesture::NEUTRAL,
                after: Gesture::NEUTRAL,
            });
            Cue {
                intent: da.intent.clone(),
                during: rule.during,
                after: rule.after,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageGap {
    pub intent: String,
    pub slots: BTreeSet<String>,
    pub language: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub gaps: Vec<CoverageGap>,
}

impl CoverageReport {
    pub fn is_empty(&self) -> bool {
        self.gaps.is_empty()
    }
}

/// Lists every reachable act key lacking a template in one of `languages`.
/// Coverage is one-directional: unused templates are fine.
pub fn coverage_check<'a>(
    templates: &TemplateSet,
    reachable: impl IntoIterator<Item = &'a ActKey>,
    languages: &BTreeSet<String>,
) -> CoverageReport {
    let mut gaps = Vec::new();
    let keys: BTreeSet<&ActKey> = reachable.into_iter().collect();
    for (intent, slots) in keys {
        for language in languages {
            if templates.get(intent, slots, language).is_none() {
                gaps.push(CoverageGap {
                    intent: intent.clone(),
                    slots: slots.clone(),
                    language: language.clone(),
                });
            }
        }
    }
    CoverageReport { gaps }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::da::parse_das;
    use crate::testutil::{config_dir, shipped_ontology};

    fn shipped() -> TemplateSet {
        let dir = config_dir();
        TemplateSet::load(&[dir.join("templates.en.toml"), dir.join("templates.ja.toml")]).unwrap()
    }

    fn cues() -> CueRules {
        CueRules::load(config_dir().join("cues.toml"), &shipped_ontology()).unwrap()
    }

    #[test]
    fn tour_companion_question() {
        let das = parse_das("request (user_accompany=?)").unwrap();
        assert_eq!(realize(&das, &shipped(), "en").unwrap(), "Who would you like to tour with?");
    }

    #[test]
    fn goodbye_template() {
        let set = TemplateSet::from_toml_str(
            r#"
            [[goodbye]]
            pattern = "Goodbye."
            language = "en"
            "#,
            "inline",
        )
        .unwrap();
        let das = parse_das("goodbye ()").unwrap();
        assert_eq!(realize(&das, &set, "en").unwrap(), "Goodbye.");
        assert!(matches!(realize(&das, &set, "ja"), Err(NlgError::TemplateMiss { .. })));
    }

    #[test]
    fn dual_opening_hours() {
        let das = parse_das(
            "inform (attraction_name=Tokyo Trick Art Museum, attraction_open_time=11:00-21:00), \
             inform (attraction_name=Tokyo Water Science Museum, attraction_open_time=9:30-17:00)",
        )
        .unwrap();
        let text = realize(&das, &shipped(), "en").unwrap();
        let first = text.find("11:00-21:00").unwrap();
        let second = text.find("9:30-17:00").unwrap();
        assert!(first < second, "{text}");
        assert!(text.find("Tokyo Trick Art Museum").unwrap() < text.find("Tokyo Water Science Museum").unwrap());
    }

    #[test]
    fn exact_slot_set_lookup() {
        // a template for {attraction_name, attraction_open_time} does not serve a bare name
        let das = parse_das("inform (attraction_name=Tokyo Trick Art Museum)").unwrap();
        let err = realize(&das, &shipped(), "en").unwrap_err();
        assert_eq!(
            err,
            NlgError::TemplateMiss {
                intent: "inform".into(),
                slots: vec!["attraction_name".into()],
                language: "en".into()
            }
        );
    }

    #[test]
    fn stray_placeholder_rejected() {
        let err = TemplateSet::from_toml_str(
            r#"
            [[good]]
            slots = ["user_name"]
            pattern = "Nice, {user_food_type}!"
            language = "en"
            "#,
            "inline",
        )
        .unwrap_err();
        assert!(matches!(err, NlgError::StrayPlaceholder { .. }));
    }

    #[test]
    fn duplicate_template_rejected() {
        let err = TemplateSet::from_toml_str(
            r#"
            [[goodbye]]
            pattern = "Bye."
            language = "en"
            [[goodbye]]
            pattern = "See you."
            language = "en"
            "#,
            "inline",
        )
        .unwrap_err();
        assert!(matches!(err, NlgError::DuplicateTemplate { .. }));
    }

    #[test]
    fn good_nods_with_large_smile() {
        let cues = cues_for(&parse_das("good (user_food_type=steak)").unwrap(), &cues());
        assert_eq!(
            cues[0].during,
            Gesture {
                expression: Expression::LargeSmile,
                motion: Motion::Nod
            }
        );
    }

    #[test]
    fn goodbye_bows_after() {
        let cues = cues_for(&parse_das("goodbye ()").unwrap(), &cues());
        assert_eq!(
            cues[0].after,
            Gesture {
                expression: Expression::SmallSmile,
                motion: Motion::Bow
            }
        );
    }

    #[test]
    fn inform_is_neutral() {
        let cues = cues_for(&parse_das("inform (attraction_parking=yes)").unwrap(), &cues());
        assert_eq!(cues[0].during, Gesture::NEUTRAL);
        assert_eq!(cues[0].after, Gesture::NEUTRAL);
    }

    #[test]
    fn cue_rules_must_be_total() {
        let err = CueRules::from_toml_str(
            r#"
            [good]
            during = { expression = "large_smile", motion = "nod" }
            after = { expression = "neutral", motion = "none" }
            "#,
            &shipped_ontology(),
        )
        .unwrap_err();
        assert!(matches!(err, NlgError::MissingCue(_)));
    }

    #[test]
    fn cue_totality_over_system_intents() {
        let rules = cues();
        let ont = shipped_ontology();
        for intent in ont.intents_for(Speaker::System) {
            assert_eq!(cues_for(&[DialogueAct::new(intent.name.clone())], &rules).len(), 1);
            assert!(rules.rule(&intent.name).is_some());
        }
    }

    #[test]
    fn coverage_is_one_directional() {
        let set = shipped();
        let langs: BTreeSet<String> = ["en".to_string()].into();
        let goodbye: ActKey = ("goodbye".into(), BTreeSet::new());
        assert!(coverage_check(&set, [&goodbye], &langs).is_empty());

        let mut missing = set.clone();
        missing.remove("goodbye", &BTreeSet::new(), "en").unwrap();
        let report = coverage_check(&missing, [&goodbye], &langs);
        assert_eq!(
            report.gaps,
            vec![CoverageGap {
                intent: "goodbye".into(),
                slots: BTreeSet::new(),
                language: "en".into()
            }]
        );
    }
}
