//! One student's pass through the question bank.
//!
//! ```text
//! AwaitingQuestion --next_question--> AwaitingCard
//! AwaitingCard --submit (appropriate)--> AwaitingQuestion | Complete
//! AwaitingCard --submit (not appropriate)--> ShowingFeedback
//! ShowingFeedback --acknowledge--> AwaitingQuestion | Complete
//! ```

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bank::{MediaCueId, Question, QuestionBank, QuestionId};
use super::roster::{ClassId, Roster, StudentId};
use super::GameError;
use crate::emotion::Emotion;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionId(pub String);

impl SessionId {
    pub fn random() -> Self {
        SessionId(uuid::Uuid::new_v4().to_string())
    }
}

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SessionId {
    fn from(s: &str) -> Self {
        SessionId(s.to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    AwaitingQuestion,
    AwaitingCard,
    ShowingFeedback,
    Complete,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Where an answer came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnswerSource {
    #[default]
    Camera,
    /// Entered by the teacher when the camera cannot read the card.
    Manual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub question_id: QuestionId,
    pub detected: Emotion,
    pub appropriate: bool,
    pub confidence: f64,
    pub source: AnswerSource,
    pub feedback_shown: Option<String>,
    pub teacher_note: Option<String>,
    pub timestamp: DateTime<Utc>,
}

/// Outcome of one answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub question_id: QuestionId,
    pub detected: Emotion,
    pub appropriate: bool,
    /// Animation for the raised card; played whether or not it fits.
    pub media_cue: MediaCueId,
    /// Present iff the answer was not appropriate.
    pub feedback: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub asked: usize,
    pub appropriate: usize,
    pub per_emotion: BTreeMap<Emotion, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: SessionId,
    pub class_id: ClassId,
    pub student_id: StudentId,
    pub bank_version: String,
    /// Unasked questions, in bank order.
    pub remaining: Vec<QuestionId>,
    pub current: Option<QuestionId>,
    pub phase: Phase,
    pub responses: Vec<ResponseRecord>,
    pub rng_seed: u64,
    pub started_at: DateTime<Utc>,
    /// Set once the session has been ended, finished or not.
    pub closed: bool,
}

/// Starts a session with a fresh random id at the current time.
pub fn start_session(
    roster: &Roster,
    student_id: &StudentId,
    bank: &QuestionBank,
    seed: u64,
) -> Result<Session, GameError> {
    Session::start(roster, student_id, bank, seed, SessionId::random(), Utc::now())
}

impl Session {
    pub fn start(
        roster: &Roster,
        student_id: &StudentId,
        bank: &QuestionBank,
        seed: u64,
        session_id: SessionId,
        now: DateTime<Utc>,
    ) -> Result<Session, GameError> {
        if !roster.contains(student_id) {
            return Err(GameError::UnknownStudent(student_id.clone()));
        }
        Ok(Session {
            session_id,
            class_id: roster.class_id.clone(),
            student_id: student_id.clone(),
            bank_version: bank.version.clone(),
            remaining: bank.ids().cloned().collect(),
            current: None,
            phase: Phase::AwaitingQuestion,
            responses: Vec::new(),
            rng_seed: seed,
            started_at: now,
            closed: false,
        })
    }

    fn check_bank(&self, bank: &QuestionBank) -> Result<(), GameError> {
        if bank.version != self.bank_version {
            return Err(GameError::BankMismatch {
                session: self.bank_version.clone(),
                bank: bank.version.clone(),
            });
        }
        Ok(())
    }

    fn expect_phase(&self, expected: Phase) -> Result<(), GameError> {
        if self.closed && self.phase != Phase::Complete {
            return Err(GameError::SessionClosed);
        }
        if self.phase == Phase::Complete {
            return Err(GameError::SessionComplete);
        }
        if self.phase != expected {
            return Err(GameError::WrongPhase {
                expected,
                actual: self.phase,
            });
        }
        Ok(())
    }

    fn current_question<'b>(&self, bank: &'b QuestionBank) -> Result<&'b Question, GameError> {
        let id = self.current.as_ref().ok_or(GameError::WrongPhase {
            expected: Phase::AwaitingCard,
            actual: self.phase,
        })?;
        bank.get(id).ok_or_else(|| GameError::UnknownQuestion(id.clone()))
    }

    /// The question being answered, if any.
    pub fn current<'b>(&self, bank: &'b QuestionBank) -> Option<&'b Question> {
        self.current.as_ref().and_then(|id| bank.get(id))
    }

    /// Index into `remaining` for the next draw. Each draw uses its own
    /// ChaCha stream, so the choice depends only on the seed and how many
    /// questions were already asked.
    fn draw_index(&self, bank: &QuestionBank) -> usize {
        let asked = bank.len() - self.remaining.len();
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        rng.set_stream(asked as u64);
        rng.random_range(0..self.remaining.len())
    }

    /// Draws uniformly without replacement from the unasked questions.
    pub fn next_question<'b>(&mut self, bank: &'b QuestionBank) -> Result<&'b Question, GameError> {
        self.check_bank(bank)?;
        self.expect_phase(Phase::AwaitingQuestion)?;
        if self.remaining.is_empty() {
            return Err(GameError::SessionComplete);
        }
        let idx = self.draw_index(bank);
        let id = self.remaining[idx].clone();
        self.ask(bank, &id)
    }

    /// Asks a specific question; used when replaying a recorded draw.
    pub fn ask<'b>(&mut self, bank: &'b QuestionBank, id: &QuestionId) -> Result<&'b Question, GameError> {
        self.check_bank(bank)?;
        self.expect_phase(Phase::AwaitingQuestion)?;
        let question = bank.get(id).ok_or_else(|| GameError::UnknownQuestion(id.clone()))?;
        let pos = self
            .remaining
            .iter()
            .position(|q| q == id)
            .ok_or_else(|| GameError::AlreadyAsked(id.clone()))?;
        self.remaining.remove(pos);
        self.current = Some(id.clone());
        self.phase = Phase::AwaitingCard;
        Ok(question)
    }

    /// What `next_question` would draw, without changing the session.
    pub fn peek_next(&self, bank: &QuestionBank) -> Option<QuestionId> {
        if self.phase != Phase::AwaitingQuestion || self.remaining.is_empty() || self.closed {
            return None;
        }
        Some(self.remaining[self.draw_index(bank)].clone())
    }

    fn finish_turn(&mut self) {
        self.current = None;
        self.phase = if self.remaining.is_empty() {
            Phase::Complete
        } else {
            Phase::AwaitingQuestion
        };
    }

    pub fn submit_detection(
        &mut self,
        bank: &QuestionBank,
        detected: Emotion,
        confidence: f64,
        now: DateTime<Utc>,
    ) -> Result<Evaluation, GameError> {
        self.submit_answer(bank, detected, confidence, AnswerSource::Camera, now)
    }

    /// Records the raised card and evaluates it against the current
    /// question's probable set.
    pub fn submit_answer(
        &mut self,
        bank: &QuestionBank,
        detected: Emotion,
        confidence: f64,
        source: AnswerSource,
        now: DateTime<Utc>,
    ) -> Result<Evaluation, GameError> {
        self.check_bank(bank)?;
        self.expect_phase(Phase::AwaitingCard)?;
        if !(0.0..=1.0).contains(&confidence) {
            return Err(GameError::InvalidConfidence(confidence));
        }
        let question = self.current_question(bank)?;
        let appropriate = question.is_appropriate(detected);
        let feedback = question.feedback_for(detected).map(str::to_owned);
        let evaluation = Evaluation {
            question_id: question.id.clone(),
            detected,
            appropriate,
            media_cue: question.media_cue_for(detected),
            feedback: feedback.clone(),
        };
        self.responses.push(ResponseRecord {
            question_id: question.id.clone(),
            detected,
            appropriate,
            confidence,
            source,
            feedback_shown: feedback,
            teacher_note: None,
            timestamp: now,
        });
        if appropriate {
            self.finish_turn();
        } else {
            self.phase = Phase::ShowingFeedback;
        }
        Ok(evaluation)
    }

    /// Closes the feedback step, keeping the teacher's note on the last
    /// response.
    pub fn acknowledge_feedback(&mut self, teacher_note: Option<String>) -> Result<(), GameError> {
        self.expect_phase(Phase::ShowingFeedback)?;
        if let Some(note) = teacher_note {
            if let Some(last) = self.responses.last_mut() {
                last.teacher_note = Some(note);
            }
        }
        self.finish_turn();
        Ok(())
    }

    pub fn close(&mut self) {
        self.closed = true;
    }

    pub fn is_active(&self) -> bool {
        !self.closed && self.phase != Phase::Complete
    }

    pub fn summary(&self) -> Summary {
        session_summary(self)
    }

    /// Remaining, closed and current questions partition the bank.
    pub fn check_invariants(&self, bank: &QuestionBank) -> bool {
        let mut seen: Vec<&QuestionId> = self.remaining.iter().collect();
        let answered: Vec<&QuestionId> = self.responses.iter().map(|r| &r.question_id).collect();
        seen.extend(answered.iter().copied());
        // During feedback the current question has a response already.
        if let Some(c) = &self.current {
            if self.phase == Phase::AwaitingCard {
                seen.push(c);
            } else if answered.last() != Some(&c) {
                return false;
            }
        }
        let mut all: Vec<&QuestionId> = bank.ids().collect();
        all.sort();
        seen.sort();
        let partition = seen == all;
        let complete = (self.phase == Phase::Complete) == (self.remaining.is_empty() && self.current.is_none());
        let current_ok = matches!(self.phase, Phase::AwaitingCard | Phase::ShowingFeedback) == self.current.is_some();
        partition && complete && current_ok
    }
}

pub fn session_summary(session: &Session) -> Summary {
    let mut per_emotion: BTreeMap<Emotion, usize> = Emotion::ALL.iter().map(|&e| (e, 0)).collect();
    for r in &session.responses {
        *per_emotion.entry(r.detected).or_default() += 1;
    }
    Summary {
        asked: session.responses.len(),
        appropriate: session.responses.iter().filter(|r| r.appropriate).count(),
        per_emotion,
    }
}
