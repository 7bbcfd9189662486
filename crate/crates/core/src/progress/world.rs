use std::collections::BTreeMap;
use std::sync::Arc;

use super::event::{Event, EventKind};
use super::StoreError;
use crate::emotion::Emotion;
use crate::game::{
    AnswerSource, ClassId, GameError, Phase, QuestionBank, QuestionId, Roster, Session, SessionId, StudentId,
};

/// A detection waiting for its evaluation event.
#[derive(Debug, Clone, PartialEq)]
struct PendingCard {
    question_id: QuestionId,
    emotion: Emotion,
    confidence: f64,
    source: AnswerSource,
}

/// Everything derivable from the event log.
#[derive(Debug, Clone)]
pub struct WorldState {
    bank: Arc<QuestionBank>,
    pub classes: BTreeMap<ClassId, Roster>,
    pub sessions: BTreeMap<SessionId, Session>,
    /// Session ids in start order.
    pub session_order: Vec<SessionId>,
    last_seq: u64,
    pending: BTreeMap<SessionId, PendingCard>,
}

/// Equality over the durable game state; sequence numbers and detections not
/// yet evaluated are bookkeeping.
impl PartialEq for WorldState {
    fn eq(&self, other: &Self) -> bool {
        self.classes == other.classes && self.sessions == other.sessions && self.session_order == other.session_order
    }
}

fn invalid(seq: u64, err: impl std::fmt::Display) -> StoreError {
    StoreError::InvalidEvent {
        seq,
        reason: err.to_string(),
    }
}

impl WorldState {
    pub fn new(bank: Arc<QuestionBank>) -> Self {
        Self {
            bank,
            classes: BTreeMap::new(),
            sessions: BTreeMap::new(),
            session_order: Vec::new(),
            last_seq: 0,
            pending: BTreeMap::new(),
        }
    }

    pub fn bank(&self) -> &Arc<QuestionBank> {
        &self.bank
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty() && self.sessions.is_empty()
    }

    pub fn student_exists(&self, student: &StudentId) -> bool {
        self.classes.values().any(|r| r.contains(student))
    }

    /// The student's unfinished, unended session in `class`, if any.
    pub fn active_session(&self, class: &ClassId, student: &StudentId) -> Option<&Session> {
        self.sessions
            .values()
            .find(|s| &s.class_id == class && &s.student_id == student && s.is_active())
    }

    /// Sessions of a student across classes, in start order.
    pub fn sessions_of<'a>(&'a self, student: &'a StudentId) -> impl Iterator<Item = &'a Session> + 'a {
        self.session_order
            .iter()
            .filter_map(|id| self.sessions.get(id))
            .filter(move |s| &s.student_id == student)
    }

    fn session_mut(&mut self, seq: u64, id: &SessionId) -> Result<&mut Session, StoreError> {
        self.sessions
            .get_mut(id)
            .ok_or_else(|| StoreError::UnknownEntity(format!("session {id} (seq {seq})")))
    }

    /// Applies one event, or leaves the state untouched and reports why the
    /// event does not fit.
    pub fn apply(&mut self, event: &Event) -> Result<(), StoreError> {
        let seq = event.seq;
        if seq != self.last_seq + 1 {
            return Err(StoreError::SequenceGap {
                expected: self.last_seq + 1,
                got: seq,
            });
        }
        let bank = Arc::clone(&self.bank);
        match &event.kind {
            EventKind::ClassCreated { class_id } => {
                if self.classes.contains_key(class_id) {
                    return Err(StoreError::Duplicate(format!("class {class_id}")));
                }
                self.classes.insert(class_id.clone(), Roster::new(class_id.clone()));
            }
            EventKind::StudentRegistered {
                class_id,
                student_id,
                display_name,
            } => {
                let roster = self
                    .classes
                    .get_mut(class_id)
                    .ok_or_else(|| StoreError::UnknownEntity(format!("class {class_id}")))?;
                roster
                    .add_student(student_id.clone(), display_name.clone())
                    .map_err(|e| match e {
                        GameError::DuplicateStudent(s) => StoreError::Duplicate(format!("student {s}")),
                        other => invalid(seq, other),
                    })?;
            }
            EventKind::SessionStarted {
                session_id,
                class_id,
                student_id,
                bank_version,
                seed,
            } => {
                if self.sessions.contains_key(session_id) {
                    return Err(StoreError::Duplicate(format!("session {session_id}")));
                }
                let roster = self
                    .classes
                    .get(class_id)
                    .ok_or_else(|| StoreError::UnknownEntity(format!("class {class_id}")))?;
                if !roster.contains(student_id) {
                    return Err(StoreError::UnknownEntity(format!("student {student_id} in {class_id}")));
                }
                if bank_version != &bank.version {
                    return Err(invalid(
                        seq,
                        format!("session uses bank {bank_version}, store has {}", bank.version),
                    ));
                }
                if let Some(active) = self.active_session(class_id, student_id) {
                    return Err(invalid(
                        seq,
                        format!("student {student_id} already has active session {}", active.session_id),
                    ));
                }
                let session = Session::start(roster, student_id, &bank, *seed, session_id.clone(), event.ts)
                    .map_err(|e| invalid(seq, e))?;
                self.sessions.insert(session_id.clone(), session);
                self.session_order.push(session_id.clone());
            }
            EventKind::QuestionAsked {
                session_id,
                question_id,
            } => {
                let session = self.session_mut(seq, session_id)?;
                session.ask(&bank, question_id).map_err(|e| invalid(seq, e))?;
            }
            EventKind::CardDetected {
                session_id,
                question_id,
                emotion,
                confidence,
                source,
            } => {
                let session = self.session_mut(seq, session_id)?;
                if session.phase != Phase::AwaitingCard || session.current.as_ref() != Some(question_id) {
                    return Err(invalid(seq, format!("no open question {question_id} in {session_id}")));
                }
                if !(0.0..=1.0).contains(confidence) {
                    return Err(invalid(seq, GameError::InvalidConfidence(*confidence)));
                }
                self.pending.insert(
                    session_id.clone(),
                    PendingCard {
                        question_id: question_id.clone(),
                        emotion: *emotion,
                        confidence: *confidence,
                        source: *source,
                    },
                );
            }
            EventKind::Evaluated {
                session_id,
                question_id,
                emotion,
                appropriate,
                ..
            } => {
                let pending = match self.pending.get(session_id) {
                    Some(p) if &p.question_id == question_id && p.emotion == *emotion => p.clone(),
                    _ => {
                        return Err(invalid(
                            seq,
                            format!("Evaluated for {question_id} without a matching CardDetected"),
                        ))
                    }
                };
                let session = self.session_mut(seq, session_id)?;
                let mut next = session.clone();
                let evaluation = next
                    .submit_answer(&bank, pending.emotion, pending.confidence, pending.source, event.ts)
                    .map_err(|e| invalid(seq, e))?;
                if evaluation.appropriate != *appropriate {
                    return Err(invalid(
                        seq,
                        format!("recorded appropriate={appropriate} disagrees with the bank for {question_id}"),
                    ));
                }
                *session = next;
                self.pending.remove(session_id);
            }
            EventKind::FeedbackAcknowledged {
                session_id,
                question_id,
                note,
            } => {
                let session = self.session_mut(seq, session_id)?;
                if session.current.as_ref() != Some(question_id) {
                    return Err(invalid(seq, format!("no feedback open for {question_id}")));
                }
                session.acknowledge_feedback(note.clone()).map_err(|e| invalid(seq, e))?;
            }
            EventKind::SessionEnded { session_id, completed } => {
                let session = self.session_mut(seq, session_id)?;
                if session.closed {
                    return Err(invalid(seq, format!("session {session_id} already ended")));
                }
                if *completed != (session.phase == Phase::Complete) {
                    return Err(invalid(seq, format!("completed={completed} but phase is {}", session.phase)));
                }
                session.close();
                self.pending.remove(session_id);
            }
        }
        self.last_seq = seq;
        Ok(())
    }
}

/// Folds `events` from an empty state. Any event that does not apply is
/// reported as [`StoreError::CorruptLog`] with its sequence number.
pub fn replay<'a>(events: impl IntoIterator<Item = &'a Event>, bank: Arc<QuestionBank>) -> Result<WorldState, StoreError> {
    let mut world = WorldState::new(bank);
    replay_onto(&mut world, events)?;
    Ok(world)
}

/// Continues a fold; `replay(a ++ b) == replay_onto(replay(a), b)`.
pub fn replay_onto<'a>(world: &mut WorldState, events: impl IntoIterator<Item = &'a Event>) -> Result<(), StoreError> {
    for event in events {
        world.apply(event).map_err(|e| StoreError::CorruptLog {
            line: None,
            seq: Some(event.seq),
            reason: e.to_string(),
        })?;
    }
    Ok(())
}
