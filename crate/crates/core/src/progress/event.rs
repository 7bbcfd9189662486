use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::emotion::Emotion;
use crate::game::{AnswerSource, ClassId, QuestionId, SessionId, StudentId};

/// One line of the event log: `{"seq": .., "ts": .., "kind": .., ...payload}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub ts: DateTime<Utc>,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum EventKind {
    ClassCreated {
        class_id: ClassId,
    },
    StudentRegistered {
        class_id: ClassId,
        student_id: StudentId,
        display_name: String,
    },
    SessionStarted {
        session_id: SessionId,
        class_id: ClassId,
        student_id: StudentId,
        bank_version: String,
        seed: u64,
    },
    QuestionAsked {
        session_id: SessionId,
        question_id: QuestionId,
    },
    CardDetected {
        session_id: SessionId,
        question_id: QuestionId,
        emotion: Emotion,
        confidence: f64,
        source: AnswerSource,
    },
    Evaluated {
        session_id: SessionId,
        question_id: QuestionId,
        emotion: Emotion,
        appropriate: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        feedback: Option<String>,
    },
    FeedbackAcknowledged {
        session_id: SessionId,
        question_id: QuestionId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        note: Option<String>,
    },
    SessionEnded {
        session_id: SessionId,
        completed: bool,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::ClassCreated { .. } => "ClassCreated",
            EventKind::StudentRegistered { .. } => "StudentRegistered",
            EventKind::SessionStarted { .. } => "SessionStarted",
            EventKind::QuestionAsked { .. } => "QuestionAsked",
            EventKind::CardDetected { .. } => "CardDetected",
            EventKind::Evaluated { .. } => "Evaluated",
            EventKind::FeedbackAcknowledged { .. } => "FeedbackAcknowledged",
            EventKind::SessionEnded { .. } => "SessionEnded",
        }
    }

    pub fn session_id(&self) -> Option<&SessionId> {
        match self {
            EventKind::ClassCreated { .. } | EventKind::StudentRegistered { .. } => None,
            EventKind::SessionStarted { session_id, .. }
            | EventKind::QuestionAsked { session_id, .. }
            | EventKind::CardDetected { session_id, .. }
            | EventKind::Evaluated { session_id, .. }
            | EventKind::FeedbackAcknowledged { session_id, .. }
            | EventKind::SessionEnded { session_id, .. } => Some(session_id),
        }
    }
}

impl Event {
    /// One JSON Lines record, newline included.
    pub fn to_line(&self) -> String {
        let mut line = serde_json::to_string(self).expect("events always serialize");
        line.push('\n');
        line
    }
}
