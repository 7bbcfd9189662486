//! Whole-class simulation: synthetic students answer every question of one
//! session each, optionally through rendered and detected card frames.

use chrono::Utc;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classroom::{Classroom, ClassroomError};
use crate::emotion::Emotion;
use crate::game::{AnswerSource, ClassId, Phase, Question, SessionId, StudentId};
use crate::progress::ProgressReport;
use crate::vision::{detect, random_synthetic_frame, DetectionParams, MarkerSpec, PlacementRange, VisionError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimProfile {
    pub students: usize,
    /// Probability that a student raises one of the probable emotions.
    pub accuracy: f64,
    pub seed: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error(transparent)]
    Classroom(#[from] ClassroomError),
    #[error(transparent)]
    Vision(#[from] VisionError),
}

/// Marker spec, detector settings and frame size used when answers go
/// through the camera path.
#[derive(Debug, Clone)]
pub struct SimVision {
    pub spec: MarkerSpec,
    pub params: DetectionParams,
    pub width: usize,
    pub height: usize,
    pub max_noise_sigma: f64,
}

impl Default for SimVision {
    fn default() -> Self {
        Self {
            spec: MarkerSpec::default().with_module_size(20),
            params: DetectionParams::default(),
            width: 320,
            height: 240,
            max_noise_sigma: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub class_id: ClassId,
    pub reports: Vec<ProgressReport>,
    /// Answers that fell back to manual entry because no card was read.
    pub manual_fallbacks: usize,
    /// Frames where the detector read a different card than was shown.
    pub misreads: usize,
}

impl SimProfile {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.students == 0 {
            return Err(SimError::InvalidProfile("students must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.accuracy) {
            return Err(SimError::InvalidProfile(format!(
                "accuracy must be within [0, 1], got {}",
                self.accuracy
            )));
        }
        Ok(())
    }
}

pub fn student_id(index: usize) -> StudentId {
    StudentId(format!("s{:02}", index + 1))
}

/// Probable emotion with probability `accuracy`, otherwise a uniform pick
/// among the rest.
pub fn choose_answer(question: &Question, accuracy: f64, rng: &mut impl Rng) -> Emotion {
    let probable: Vec<Emotion> = question.probable.iter().copied().collect();
    let others: Vec<Emotion> = Emotion::ALL.into_iter().filter(|e| !question.probable.contains(e)).collect();
    let pool = if others.is_empty() || (!probable.is_empty() && rng.random_bool(accuracy)) {
        &probable
    } else {
        &others
    };
    *pool.choose(rng).expect("question has at least one emotion to pick")
}

fn read_card(
    vision: &SimVision,
    card: Emotion,
    rng: &mut ChaCha8Rng,
) -> Result<Option<(Emotion, f64)>, SimError> {
    let range = PlacementRange::default();
    for _ in 0..3 {
        let frame = random_synthetic_frame(
            rng,
            &vision.spec,
            card,
            &range,
            vision.width,
            vision.height,
            vision.max_noise_sigma,
        )?;
        if let Some(best) = detect(&frame.frame, &vision.spec, &vision.params).first() {
            return Ok(Some((best.card, best.confidence)));
        }
    }
    Ok(None)
}

/// Runs one full session per simulated student in a fresh class.
///
/// Session ids and answers depend only on `profile.seed`, so two runs with
/// the same profile write the same log apart from timestamps.
pub fn simulate(
    profile: &SimProfile,
    classroom: &mut Classroom,
    vision: Option<&SimVision>,
) -> Result<SimOutcome, SimError> {
    profile.validate()?;
    let class_id = ClassId(format!("sim-{}", profile.seed));
    classroom.create_class(class_id.clone(), Utc::now())?;
    for i in 0..profile.students {
        classroom.register_student(&class_id, student_id(i), format!("Student {}", i + 1), Utc::now())?;
    }

    let mut outcome = SimOutcome {
        class_id: class_id.clone(),
        reports: Vec::new(),
        manual_fallbacks: 0,
        misreads: 0,
    };
    for i in 0..profile.students {
        let student = student_id(i);
        let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
        rng.set_stream(i as u64);
        let session_id = SessionId(format!("{class_id}-{student}"));
        let session_seed = rng.random();
        classroom.start_session(&class_id, &student, session_seed, session_id.clone(), Utc::now())?;
        loop {
            let question = classroom.next_question(&session_id, Utc::now())?;
            let chosen = choose_answer(&question, profile.accuracy, &mut rng);
            let (answer, confidence, source) = match vision {
                // a perfect camera
                None => (chosen, 1.0, AnswerSource::Camera),
                Some(v) => match read_card(v, chosen, &mut rng)? {
                    Some((card, confidence)) => {
                        if card != chosen {
                            outcome.misreads += 1;
                        }
                        (card, confidence, AnswerSource::Camera)
                    }
                    None => {
                        outcome.manual_fallbacks += 1;
                        (chosen, 1.0, AnswerSource::Manual)
                    }
                },
            };
            classroom.submit_answer(&session_id, answer, confidence, source, Utc::now())?;
            let phase = classroom.session(&session_id).map(|s| s.phase);
            if phase == Some(Phase::ShowingFeedback) {
                classroom.acknowledge_feedback(&session_id, None, Utc::now())?;
            }
            if classroom.session(&session_id).map(|s| s.phase) == Some(Phase::Complete) {
                break;
            }
        }
        outcome.reports.push(classroom.progress(&student).map_err(ClassroomError::from)?);
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::game::QuestionBank;

    fn profile(students: usize, accuracy: f64) -> SimProfile {
        SimProfile {
            students,
            accuracy,
            seed: 11,
        }
    }

    #[test]
    fn perfect_accuracy_scores_one() {
        let mut room = Classroom::in_memory(Arc::new(QuestionBank::shipped()));
        let out = simulate(&profile(3, 1.0), &mut room, None).unwrap();
        assert_eq!(out.reports.len(), 3);
        for r in &out.reports {
            assert_eq!(r.appropriate_rate, Some(1.0));
            assert_eq!(r.questions_answered, 10);
        }
    }

    #[test]
    fn zero_accuracy_scores_zero() {
        let mut room = Classroom::in_memory(Arc::new(QuestionBank::shipped()));
        let out = simulate(&profile(2, 0.0), &mut room, None).unwrap();
        for r in &out.reports {
            assert_eq!(r.appropriate_rate, Some(0.0));
        }
    }

    #[test]
    fn live_state_matches_log_fold() {
        let mut room = Classroom::in_memory(Arc::new(QuestionBank::shipped()));
        simulate(&profile(4, 0.6), &mut room, None).unwrap();
        assert_eq!(room.live(), room.log().world());
    }

    #[test]
    fn rejects_bad_profiles() {
        assert!(profile(0, 0.5).validate().is_err());
        assert!(profile(1, 1.5).validate().is_err());
        assert!(profile(1, f64::NAN).validate().is_err());
    }

    #[test]
    fn camera_path_reads_every_card() {
        let mut room = Classroom::in_memory(Arc::new(QuestionBank::shipped()));
        let out = simulate(&profile(1, 1.0), &mut room, Some(&SimVision::default())).unwrap();
        assert_eq!(out.misreads, 0);
        assert_eq!(out.reports[0].appropriate_rate, Some(1.0));
        assert_eq!(room.live(), room.log().world());
    }
}
