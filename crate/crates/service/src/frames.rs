use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::Json;
use chrono::Utc;
use ethica_ar_core::game::{AnswerSource, Evaluation, Phase, SessionId};
use ethica_ar_core::vision::{detect, png_dimensions, Detection, GrayImage};
use ethica_ar_core::Emotion;
use serde::Serialize;

use crate::{ApiError, AppState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FrameStatus {
    NoCard,
    Ambiguous,
    Resolved,
}

#[derive(Debug, Clone, Serialize)]
pub struct FrameResult {
    pub status: FrameStatus,
    pub detections: Vec<Detection>,
    pub resolved: Option<Emotion>,
    /// Present iff `status` is `Resolved`.
    pub evaluation: Option<Evaluation>,
    pub phase: Phase,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Resolution {
    NoCard,
    Ambiguous,
    Resolved { card: Emotion, confidence: f64 },
}

/// Picks the most confident detection, unless a different card comes within
/// `margin` of it.
pub fn resolve(detections: &[Detection], margin: f64) -> Resolution {
    let Some(best) = detections.iter().max_by(|a, b| a.confidence.total_cmp(&b.confidence)) else {
        return Resolution::NoCard;
    };
    let contested = detections
        .iter()
        .any(|d| d.card != best.card && best.confidence - d.confidence <= margin);
    if contested {
        Resolution::Ambiguous
    } else {
        Resolution::Resolved {
            card: best.card,
            confidence: best.confidence,
        }
    }
}

fn require_awaiting_card(state: &AppState, id: &SessionId) -> Result<(), ApiError> {
    let room = state.classroom();
    let session = room
        .session(id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("unknown session {id}")))?;
    if session.closed && session.phase != Phase::Complete {
        return Err(ApiError::new(StatusCode::CONFLICT, "session_closed", "session was ended"));
    }
    if session.phase != Phase::AwaitingCard {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "wrong_phase",
            format!("frames are accepted while awaiting a card, session is in {}", session.phase),
        ));
    }
    Ok(())
}

fn decode_frame(state: &AppState, body: Result<Bytes, BytesRejection>) -> Result<GrayImage, ApiError> {
    let body = body.map_err(|e| {
        if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
            ApiError::new(StatusCode::PAYLOAD_TOO_LARGE, "frame_too_large", e.body_text())
        } else {
            ApiError::bad_request(e.body_text())
        }
    })?;
    let cfg = state.config();
    let (w, h) = png_dimensions(&body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_image", e.to_string()))?;
    if w > cfg.max_frame_width || h > cfg.max_frame_height {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            "frame_too_large",
            format!("frame is {w}x{h}, limit {}x{}", cfg.max_frame_width, cfg.max_frame_height),
        ));
    }
    GrayImage::from_png_bytes(&body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_image", e.to_string()))
}

/// Runs detection on an uploaded PNG and, when exactly one card wins,
/// submits it as the answer. Other outcomes leave the session untouched.
pub async fn post_frame(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Json<FrameResult>, ApiError> {
    let id = SessionId(id);
    require_awaiting_card(&state, &id)?;
    let frame = decode_frame(&state, body)?;

    let worker = state.clone();
    let detections = tokio::task::spawn_blocking(move || {
        let cfg = worker.config();
        detect(&frame, &cfg.spec, &cfg.params)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?;

    let resolution = resolve(&detections, state.config().ambiguity_margin);
    tracing::debug!(session = %id, found = detections.len(), ?resolution, "frame processed");
    let mut room = state.classroom();
    let (status, resolved, evaluation) = match resolution {
        Resolution::NoCard => (FrameStatus::NoCard, None, None),
        Resolution::Ambiguous => (FrameStatus::Ambiguous, None, None),
        Resolution::Resolved { card, confidence } => {
            let evaluation = room.submit_answer(&id, card, confidence, AnswerSource::Camera, Utc::now())?;
            (FrameStatus::Resolved, Some(card), Some(evaluation))
        }
    };
    let phase = room.session(&id).map_or(Phase::Complete, |s| s.phase);
    Ok(Json(FrameResult {
        status,
        detections,
        resolved,
        evaluation,
        phase,
    }))
}

#[cfg(test)]
mod tests {
    use ethica_ar_core::vision::{Homography, Point, Quad};

    use super::*;

    fn det(card: Emotion, confidence: f64) -> Detection {
        Detection {
            card,
            quad: Quad::canonical([
                Point::new(0.0, 0.0),
                Point::new(10.0, 0.0),
                Point::new(10.0, 10.0),
                Point::new(0.0, 10.0),
            ]),
            rotation: 0,
            confidence,
            hamming_distance: 0,
            homography: Homography::identity(),
        }
    }

    #[test]
    fn nothing_detected_is_no_card() {
        assert_eq!(resolve(&[], 0.1), Resolution::NoCard);
    }

    #[test]
    fn close_rivals_are_ambiguous() {
        let d = [det(Emotion::Happy, 1.0), det(Emotion::Sad, 0.95)];
        assert_eq!(resolve(&d, 0.1), Resolution::Ambiguous);
        let d = [det(Emotion::Sad, 0.5), det(Emotion::Happy, 0.75)];
        let got = resolve(&d, 0.1);
        assert_eq!(
            got,
            Resolution::Resolved {
                card: Emotion::Happy,
                confidence: 0.75
            }
        );
    }

    #[test]
    fn same_card_twice_is_not_a_conflict() {
        let d = [det(Emotion::Angry, 1.0), det(Emotion::Angry, 1.0)];
        assert!(matches!(resolve(&d, 0.1), Resolution::Resolved { card: Emotion::Angry, .. }));
    }
}
