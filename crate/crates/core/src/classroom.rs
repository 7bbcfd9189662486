//! Live classroom state: runs game operations and records the events that
//! replay to the same state.

use std::sync::Arc;

use chrono::{DateTime, Utc};

use crate::emotion::Emotion;
use crate::game::{
    AnswerSource, ClassId, Evaluation, GameError, Phase, Question, QuestionBank, Roster, Session, SessionId,
    StudentId,
};
use crate::progress::{progress_report, EventKind, EventLog, ProgressReport, StoreError, WorldState};

#[derive(Debug, thiserror::Error)]
pub enum ClassroomError {
    #[error("unknown class {0}")]
    UnknownClass(ClassId),
    #[error("unknown session {0}")]
    UnknownSession(SessionId),
    #[error("{0} already exists")]
    Duplicate(String),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug)]
pub struct Classroom {
    live: WorldState,
    log: EventLog,
}

impl Classroom {
    /// Resumes from whatever `log` already holds.
    pub fn new(log: EventLog) -> Self {
        Self {
            live: log.world().clone(),
            log,
        }
    }

    pub fn in_memory(bank: Arc<QuestionBank>) -> Self {
        Self::new(EventLog::in_memory(bank))
    }

    pub fn bank(&self) -> &Arc<QuestionBank> {
        self.live.bank()
    }

    /// State as maintained by the game operations.
    pub fn live(&self) -> &WorldState {
        &self.live
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn session(&self, id: &SessionId) -> Option<&Session> {
        self.live.sessions.get(id)
    }

    pub fn roster(&self, id: &ClassId) -> Option<&Roster> {
        self.live.classes.get(id)
    }

    fn session_clone(&self, id: &SessionId) -> Result<Session, ClassroomError> {
        self.live
            .sessions
            .get(id)
            .cloned()
            .ok_or_else(|| ClassroomError::UnknownSession(id.clone()))
    }

    pub fn create_class(&mut self, class_id: ClassId, now: DateTime<Utc>) -> Result<&Roster, ClassroomError> {
        if self.live.classes.contains_key(&class_id) {
            return Err(ClassroomError::Duplicate(format!("class {class_id}")));
        }
        self.log.record(
            EventKind::ClassCreated {
                class_id: class_id.clone(),
            },
            now,
        )?;
        Ok(self
            .live
            .classes
            .entry(class_id.clone())
            .or_insert_with(|| Roster::new(class_id)))
    }

    /// Returns the roster-size advisory, if any.
    pub fn register_student(
        &mut self,
        class_id: &ClassId,
        student_id: StudentId,
        display_name: String,
        now: DateTime<Utc>,
    ) -> Result<Option<String>, ClassroomError> {
        let mut roster = self
            .live
            .classes
            .get(class_id)
            .cloned()
            .ok_or_else(|| ClassroomError::UnknownClass(class_id.clone()))?;
        let warning = roster
            .add_student(student_id.clone(), display_name.clone())
            .map_err(|e| match e {
                GameError::DuplicateStudent(s) => ClassroomError::Duplicate(format!("student {s}")),
                other => other.into(),
            })?;
        self.log.record(
            EventKind::StudentRegistered {
                class_id: class_id.clone(),
                student_id,
                display_name,
            },
            now,
        )?;
        self.live.classes.insert(class_id.clone(), roster);
        Ok(warning)
    }

    /// Starts a session, first ending any unfinished one the student has in
    /// this class.
    pub fn start_session(
        &mut self,
        class_id: &ClassId,
        student_id: &StudentId,
        seed: u64,
        session_id: SessionId,
        now: DateTime<Utc>,
    ) -> Result<&Session, ClassroomError> {
        if self.live.sessions.contains_key(&session_id) {
            return Err(ClassroomError::Duplicate(format!("session {session_id}")));
        }
        let roster = self
            .live
            .classes
            .get(class_id)
            .ok_or_else(|| ClassroomError::UnknownClass(class_id.clone()))?;
        let session = Session::start(roster, student_id, self.live.bank(), seed, session_id.clone(), now)?;
        if let Some(previous) = self.live.active_session(class_id, student_id).map(|s| s.session_id.clone()) {
            self.end_session(&previous, now)?;
        }
        self.log.record(
            EventKind::SessionStarted {
                session_id: session_id.clone(),
                class_id: class_id.clone(),
                student_id: student_id.clone(),
                bank_version: session.bank_version.clone(),
                seed,
            },
            now,
        )?;
        self.live.sessions.insert(session_id.clone(), session);
        self.live.session_order.push(session_id.clone());
        Ok(&self.live.sessions[&session_id])
    }

    /// Draws the next question.
    pub fn next_question(&mut self, id: &SessionId, now: DateTime<Utc>) -> Result<Question, ClassroomError> {
        let mut session = self.session_clone(id)?;
        let question = session.next_question(self.live.bank())?.clone();
        self.log.record(
            EventKind::QuestionAsked {
                session_id: id.clone(),
                question_id: question.id.clone(),
            },
            now,
        )?;
        self.live.sessions.insert(id.clone(), session);
        Ok(question)
    }

    /// The open question, drawing a new one only when none is open. Repeated
    /// calls before an answer return the same question.
    pub fn current_or_next_question(&mut self, id: &SessionId, now: DateTime<Utc>) -> Result<Question, ClassroomError> {
        let session = self
            .live
            .sessions
            .get(id)
            .ok_or_else(|| ClassroomError::UnknownSession(id.clone()))?;
        if session.phase == Phase::AwaitingCard {
            if let Some(q) = session.current(self.live.bank()) {
                return Ok(q.clone());
            }
        }
        self.next_question(id, now)
    }

    fn finish_if_complete(&mut self, session: &Session, now: DateTime<Utc>) -> Result<(), ClassroomError> {
        if session.phase == Phase::Complete && !session.closed {
            self.log.record(
                EventKind::SessionEnded {
                    session_id: session.session_id.clone(),
                    completed: true,
                },
                now,
            )?;
        }
        Ok(())
    }

    /// Evaluates a raised card; finished sessions are ended in the same call.
    pub fn submit_answer(
        &mut self,
        id: &SessionId,
        emotion: Emotion,
        confidence: f64,
        source: AnswerSource,
        now: DateTime<Utc>,
    ) -> Result<Evaluation, ClassroomError> {
        let mut session = self.session_clone(id)?;
        let evaluation = session.submit_answer(self.live.bank(), emotion, confidence, source, now)?;
        self.log.record(
            EventKind::CardDetected {
                session_id: id.clone(),
                question_id: evaluation.question_id.clone(),
                emotion,
                confidence,
                source,
            },
            now,
        )?;
        self.log.record(
            EventKind::Evaluated {
                session_id: id.clone(),
                question_id: evaluation.question_id.clone(),
                emotion,
                appropriate: evaluation.appropriate,
                feedback: evaluation.feedback.clone(),
            },
            now,
        )?;
        self.finish_if_complete(&session, now)?;
        if session.phase == Phase::Complete {
            session.close();
        }
        self.live.sessions.insert(id.clone(), session);
        Ok(evaluation)
    }

    pub fn acknowledge_feedback(
        &mut self,
        id: &SessionId,
        note: Option<String>,
        now: DateTime<Utc>,
    ) -> Result<&Session, ClassroomError> {
        let mut session = self.session_clone(id)?;
        let question_id = session.current.clone();
        session.acknowledge_feedback(note.clone())?;
        self.log.record(
            EventKind::FeedbackAcknowledged {
                session_id: id.clone(),
                question_id: question_id.expect("feedback phase has a current question"),
                note,
            },
            now,
        )?;
        self.finish_if_complete(&session, now)?;
        if session.phase == Phase::Complete {
            session.close();
        }
        self.live.sessions.insert(id.clone(), session);
        Ok(&self.live.sessions[id])
    }

    /// Ends a session early. No-op for sessions already ended.
    pub fn end_session(&mut self, id: &SessionId, now: DateTime<Utc>) -> Result<(), ClassroomError> {
        let mut session = self.session_clone(id)?;
        if session.closed {
            return Ok(());
        }
        self.log.record(
            EventKind::SessionEnded {
                session_id: id.clone(),
                completed: session.phase == Phase::Complete,
            },
            now,
        )?;
        session.close();
        self.live.sessions.insert(id.clone(), session);
        Ok(())
    }

    pub fn progress(&self, student: &StudentId) -> Result<ProgressReport, StoreError> {
        progress_report(student, &self.live)
    }
}
