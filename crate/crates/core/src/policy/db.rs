//! Attraction database the policy recommends from.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::da::{is_value_text, Ontology};
use crate::error::PolicyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parking {
    Unknown,
    Yes,
    No,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RainSuitability {
    Ok,
    No,
    Unknown,
}

impl Parking {
    pub fn as_str(self) -> &'static str {
        match self {
            Parking::Unknown => "unknown",
            Parking::Yes => "yes",
            Parking::No => "no",
        }
    }
}

impl RainSuitability {
    pub fn as_str(self) -> &'static str {
        match self {
            RainSuitability::Ok => "ok",
            RainSuitability::No => "no",
            RainSuitability::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RestaurantRecord {
    pub name: String,
    pub food_type: String,
    #[serde(default)]
    pub distance_note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttractionRecord {
    pub name: String,
    /// `HH:MM-HH:MM`
    pub open_time: String,
    pub parking: Parking,
    pub rain: RainSuitability,
    pub genre: String,
    pub description: String,
    #[serde(default)]
    pub suitable_accompany: Vec<String>,
    #[serde(default)]
    pub nearby_restaurants: Vec<RestaurantRecord>,
}

impl AttractionRecord {
    /// Value of an attraction attribute slot, if the slot describes one.
    pub fn attribute(&self, slot: &str) -> Option<&str> {
        let value = match slot {
            "attraction_open_time" => self.open_time.as_str(),
            "attraction_parking" => self.parking.as_str(),
            "attraction_rain" => self.rain.as_str(),
            "attraction_genre" => self.genre.as_str(),
            "attraction_description" => self.description.as_str(),
            _ => return None,
        };
        Some(if value.is_empty() { "unknown" } else { value })
    }

    pub fn restaurant_for(&self, food_type: &str) -> Option<&RestaurantRecord> {
        self.nearby_restaurants.iter().find(|r| r.food_type == food_type)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct DbDoc {
    #[serde(default)]
    attractions: Vec<AttractionRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AttractionDb {
    attractions: Vec<AttractionRecord>,
}

fn well_formed_clock(s: &str) -> bool {
    let Some((h, m)) = s.split_once(':') else {
        return false;
    };
    let digits = |x: &str| !x.is_empty() && x.len() <= 2 && x.bytes().all(|b| b.is_ascii_digit());
    digits(h) && m.len() == 2 && digits(m) && h.parse::<u32>().is_ok_and(|h| h <= 24) && m.parse::<u32>().is_ok_and(|m| m < 60)
}

/// Checks the `HH:MM-HH:MM` form (single-digit hours allowed, e.g. `9:30`).
pub fn well_formed_open_time(s: &str) -> bool {
    s.split_once('-')
        .is_some_and(|(a, b)| well_formed_clock(a) && well_formed_clock(b))
}

impl AttractionDb {
    pub fn new(attractions: Vec<AttractionRecord>, ontology: &Ontology) -> Result<Self, PolicyError> {
        if attractions.is_empty() {
            return Err(PolicyError::Database("no attractions".into()));
        }
        let food_types = ontology
            .slot("user_food_type")
            .map(|s| s.allowed_values.clone())
            .unwrap_or_default();
        let accompany = ontology
            .slot("user_accompany")
            .map(|s| s.allowed_values.clone())
            .unwrap_or_default();
        let mut names = HashSet::new();
        for a in &attractions {
            if !names.insert(a.name.as_str()) {
                return Err(PolicyError::Database(format!("duplicate attraction `{}`", a.name)));
            }
            if !well_formed_open_time(&a.open_time) {
                return Err(PolicyError::Database(format!(
                    "`{}` has malformed open_time `{}`",
                    a.name, a.open_time
                )));
            }
            for text in [&a.name, &a.genre, &a.description] {
                if !is_value_text(text) {
                    return Err(PolicyError::Database(format!(
                        "`{}`: `{text}` cannot be carried in a dialogue act",
                        a.name
                    )));
                }
            }
            if let Some(bad) = a.suitable_accompany.iter().find(|v| !accompany.contains(v)) {
                return Err(PolicyError::Database(format!(
                    "`{}` lists unknown accompany value `{bad}`",
                    a.name
                )));
            }
            for r in &a.nearby_restaurants {
                if !food_types.contains(&r.food_type) {
                    return Err(PolicyError::Database(format!(
                        "restaurant `{}` has unknown food type `{}`",
                        r.name, r.food_type
                    )));
                }
                if !is_value_text(&r.name) {
                    return Err(PolicyError::Database(format!("bad restaurant name `{}`", r.name)));
                }
            }
        }
        Ok(AttractionDb { attractions })
    }

    pub fn from_toml_str(text: &str, ontology: &Ontology) -> Result<Self, PolicyError> {
        let doc: DbDoc = toml::from_str(text).map_err(|e| PolicyError::Database(e.to_string()))?;
        Self::new(doc.attractions, ontology)
    }

    pub fn load(path: impl AsRef<Path>, ontology: &Ontology) -> Result<Self, PolicyError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| PolicyError::Database(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text, ontology)
    }

    pub fn attractions(&self) -> &[AttractionRecord] {
        &self.attractions
    }

    pub fn get(&self, name: &str) -> Option<&AttractionRecord> {
        self.attractions.iter().find(|a| a.name == name)
    }

    pub fn names(&self) -> Vec<String> {
        self.attractions.iter().map(|a| a.name.clone()).collect()
    }
}
