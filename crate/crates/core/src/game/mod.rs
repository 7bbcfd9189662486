//! Question bank, class rosters and the per-student session state machine.

pub mod bank;
pub mod roster;
pub mod session;

pub use bank::{load_question_bank, BankError, MediaCueId, Question, QuestionBank, QuestionId};
pub use roster::{ClassId, Roster, Student, StudentId, ADVISED_CLASS_SIZE};
pub use session::{
    session_summary, start_session, AnswerSource, Evaluation, Phase, ResponseRecord, Session, SessionId, Summary,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GameError {
    #[error("student {0} is not on the roster")]
    UnknownStudent(StudentId),
    #[error("student {0} is already on the roster")]
    DuplicateStudent(StudentId),
    #[error("operation needs phase {expected}, session is in {actual}")]
    WrongPhase { expected: Phase, actual: Phase },
    #[error("every question has been answered")]
    SessionComplete,
    #[error("session was ended")]
    SessionClosed,
    #[error("question {0} is not in the bank")]
    UnknownQuestion(QuestionId),
    #[error("question {0} was already asked")]
    AlreadyAsked(QuestionId),
    #[error("confidence {0} is outside [0, 1]")]
    InvalidConfidence(f64),
    #[error("session uses bank {session}, got {bank}")]
    BankMismatch { session: String, bank: String },
}
