use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::emotion::Emotion;

/// The Justice bank shipped with the game.
pub const SHIPPED_BANK_JSON: &str = include_str!("../../data/justice_bank.json");

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QuestionId(pub String);

impl fmt::Display for QuestionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for QuestionId {
    fn from(s: &str) -> Self {
        QuestionId(s.to_owned())
    }
}

/// Names the animation the UI plays for an answer.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MediaCueId(pub String);

impl MediaCueId {
    pub fn default_for(emotion: Emotion) -> Self {
        MediaCueId(format!("anim/{emotion}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: QuestionId,
    pub text: String,
    /// Emotions that count as an appropriate reaction.
    pub probable: BTreeSet<Emotion>,
    /// Corrective text for each emotion outside `probable`.
    pub feedback: BTreeMap<Emotion, String>,
    #[serde(default)]
    pub media_cue: BTreeMap<Emotion, MediaCueId>,
}

impl Question {
    pub fn is_appropriate(&self, emotion: Emotion) -> bool {
        self.probable.contains(&emotion)
    }

    pub fn feedback_for(&self, emotion: Emotion) -> Option<&str> {
        if self.is_appropriate(emotion) {
            None
        } else {
            self.feedback.get(&emotion).map(String::as_str)
        }
    }

    pub fn media_cue_for(&self, emotion: Emotion) -> MediaCueId {
        self.media_cue
            .get(&emotion)
            .cloned()
            .unwrap_or_else(|| MediaCueId::default_for(emotion))
    }

    /// Probable emotions joined by `/`, e.g. `sad/angry`.
    pub fn probable_signature(&self) -> String {
        self.probable.iter().map(|e| e.name()).collect::<Vec<_>>().join("/")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionBank {
    pub version: String,
    pub topic: String,
    pub questions: Vec<Question>,
}

#[derive(Debug, thiserror::Error)]
pub enum BankError {
    #[error("malformed question bank: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("invalid question bank: {0}")]
    Validation(String),
}

/// Parses and validates a question-bank JSON document.
pub fn load_question_bank(document: &str) -> Result<QuestionBank, BankError> {
    let bank: QuestionBank = serde_json::from_str(document)?;
    bank.validate()?;
    Ok(bank)
}

impl QuestionBank {
    pub fn shipped() -> QuestionBank {
        load_question_bank(SHIPPED_BANK_JSON).expect("shipped bank is valid")
    }

    pub fn validate(&self) -> Result<(), BankError> {
        let fail = |msg: String| Err(BankError::Validation(msg));
        if self.version.trim().is_empty() {
            return fail("version must not be empty".into());
        }
        if self.questions.is_empty() {
            return fail("bank has no questions".into());
        }
        let mut seen = HashSet::new();
        for q in &self.questions {
            if q.id.0.trim().is_empty() {
                return fail("question id must not be empty".into());
            }
            if !seen.insert(&q.id) {
                return fail(format!("duplicate question id {}", q.id));
            }
            if q.text.trim().is_empty() {
                return fail(format!("question {} has no text", q.id));
            }
            if q.probable.is_empty() {
                return fail(format!("question {} has an empty probable set", q.id));
            }
            for e in Emotion::ALL {
                if q.probable.contains(&e) {
                    continue;
                }
                match q.feedback.get(&e) {
                    Some(text) if !text.trim().is_empty() => {}
                    _ => return fail(format!("question {} lacks feedback for {e}", q.id)),
                }
            }
            if let Some((e, _)) = q.media_cue.iter().find(|(_, cue)| cue.0.is_empty()) {
                return fail(format!("question {} has an empty media cue for {e}", q.id));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.questions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }

    pub fn get(&self, id: &QuestionId) -> Option<&Question> {
        self.questions.iter().find(|q| &q.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &QuestionId> {
        self.questions.iter().map(|q| &q.id)
    }
}
