use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::event::Event;
use super::world::{replay, WorldState};
use super::StoreError;
use crate::emotion::Emotion;
use crate::game::{AnswerSource, QuestionBank, StudentId};

/// Per-student statistics over every recorded answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressReport {
    pub student_id: StudentId,
    pub sessions_played: usize,
    pub questions_answered: usize,
    pub appropriate_count: usize,
    /// Absent until the student has answered something.
    pub appropriate_rate: Option<f64>,
    /// Answers entered by the teacher instead of read from a card.
    pub manual_answers: usize,
    /// Probable-set signature (e.g. `sad/angry`) → chosen emotion → count.
    pub per_emotion_confusion: BTreeMap<String, BTreeMap<Emotion, usize>>,
    /// Appropriate rate of each session with at least one answer, oldest
    /// first.
    pub trend: Vec<f64>,
}

pub fn progress_report(student_id: &StudentId, world: &WorldState) -> Result<ProgressReport, StoreError> {
    if !world.student_exists(student_id) {
        return Err(StoreError::UnknownEntity(format!("student {student_id}")));
    }
    let bank = world.bank();
    let mut sessions: Vec<_> = world.sessions_of(student_id).enumerate().collect();
    // start order breaks timestamp ties
    sessions.sort_by(|(ia, a), (ib, b)| a.started_at.cmp(&b.started_at).then(ia.cmp(ib)));

    let mut report = ProgressReport {
        student_id: student_id.clone(),
        sessions_played: sessions.len(),
        questions_answered: 0,
        appropriate_count: 0,
        appropriate_rate: None,
        manual_answers: 0,
        per_emotion_confusion: BTreeMap::new(),
        trend: Vec::new(),
    };
    for (_, session) in sessions {
        let answered = session.responses.len();
        let appropriate = session.responses.iter().filter(|r| r.appropriate).count();
        report.questions_answered += answered;
        report.appropriate_count += appropriate;
        if answered > 0 {
            report.trend.push(appropriate as f64 / answered as f64);
        }
        for r in &session.responses {
            if r.source == AnswerSource::Manual {
                report.manual_answers += 1;
            }
            let signature = bank
                .get(&r.question_id)
                .map(|q| q.probable_signature())
                .unwrap_or_else(|| r.question_id.0.clone());
            *report
                .per_emotion_confusion
                .entry(signature)
                .or_default()
                .entry(r.detected)
                .or_default() += 1;
        }
    }
    if report.questions_answered > 0 {
        report.appropriate_rate = Some(report.appropriate_count as f64 / report.questions_answered as f64);
    }
    Ok(report)
}

/// Replays `events` and reports on one student.
pub fn progress_report_from_events(
    student_id: &StudentId,
    events: &[Event],
    bank: Arc<QuestionBank>,
) -> Result<ProgressReport, StoreError> {
    progress_report(student_id, &replay(events, bank)?)
}

/// Plain-text table, one row per report.
pub fn format_report_table(reports: &[ProgressReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<16} {:>8} {:>8} {:>11} {:>6} {:>6}  trend",
        "student", "sessions", "answered", "appropriate", "rate", "manual"
    );
    for r in reports {
        let rate = r.appropriate_rate.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
        let trend = r.trend.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(" ");
        let _ = writeln!(
            out,
            "{:<16} {:>8} {:>8} {:>11} {:>6} {:>6}  {}",
            r.student_id.0, r.sessions_played, r.questions_answered, r.appropriate_count, rate, r.manual_answers, trend
        );
    }
    out
}
