use axum::body::Bytes;
use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Path, Request, State};
use axum::http::StatusCode;
use axum::Json;
use chrono::Utc;
use ethica_ar_core::game::{
    AnswerSource, ClassId, Evaluation, Phase, Question, ResponseRecord, Roster, Session, SessionId, StudentId, Summary,
};
use ethica_ar_core::progress::ProgressReport;
use ethica_ar_core::Emotion;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::{ApiError, AppState};

/// `Json` with malformed bodies reported in the service's error format.
pub struct JsonBody<T>(pub T);

impl<S, T> FromRequest<S> for JsonBody<T>
where
    T: DeserializeOwned,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Self(v)),
            Err(e) => Err(json_rejection(e)),
        }
    }
}

fn json_rejection(e: JsonRejection) -> ApiError {
    ApiError::bad_request(e.body_text())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionView {
    pub question_id: String,
    pub text: String,
}

impl From<&Question> for QuestionView {
    fn from(q: &Question) -> Self {
        Self {
            question_id: q.id.0.clone(),
            text: q.text.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionView {
    pub session_id: SessionId,
    pub class_id: ClassId,
    pub student_id: StudentId,
    pub bank_version: String,
    pub seed: u64,
    pub phase: Phase,
    pub closed: bool,
    pub remaining: usize,
    pub current: Option<QuestionView>,
    pub last_response: Option<ResponseRecord>,
    pub summary: Summary,
}

impl SessionView {
    pub fn of(session: &Session, bank: &ethica_ar_core::game::QuestionBank) -> Self {
        Self {
            session_id: session.session_id.clone(),
            class_id: session.class_id.clone(),
            student_id: session.student_id.clone(),
            bank_version: session.bank_version.clone(),
            seed: session.rng_seed,
            phase: session.phase,
            closed: session.closed,
            remaining: session.remaining.len(),
            current: session.current(bank).map(QuestionView::from),
            last_response: session.responses.last().cloned(),
            summary: session.summary(),
        }
    }
}

/// An evaluation together with the phase it left the session in.
#[derive(Debug, Clone, Serialize)]
pub struct EvaluationView {
    #[serde(flatten)]
    pub evaluation: Evaluation,
    pub phase: Phase,
}

pub(crate) fn session_view(state: &AppState, id: &SessionId) -> Result<SessionView, ApiError> {
    let room = state.classroom();
    let session = room
        .session(id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("unknown session {id}")))?;
    Ok(SessionView::of(session, room.bank()))
}

fn roster_json(roster: &Roster) -> Value {
    json!({
        "class_id": roster.class_id,
        "students": roster.students,
        "warning": roster.size_warning(),
    })
}

pub async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewClass {
    class_id: String,
}

pub async fn create_class(
    State(state): State<AppState>,
    JsonBody(body): JsonBody<NewClass>,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    if body.class_id.trim().is_empty() {
        return Err(ApiError::bad_request("class_id must not be empty"));
    }
    let mut room = state.classroom();
    let roster = room.create_class(ClassId(body.class_id), Utc::now())?;
    Ok((StatusCode::CREATED, Json(roster_json(roster))))
}

pub async fn list_classes(State(state): State<AppState>) -> Json<Value> {
    let room = state.classroom();
    Json(Value::Array(room.live().classes.values().map(roster_json).collect()))
}

pub async fn get_class(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let room = state.classroom();
    let roster = room
        .roster(&ClassId(id.clone()))
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("unknown class {id}")))?;
    Ok(Json(roster_json(roster)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewStudent {
    student_id: String,
    #[serde(default)]
    display_name: Option<String>,
}

pub async fn add_student(
    State(state): State<AppState>,
    Path(class): Path<String>,
    JsonBody(body): JsonBody<NewStudent>,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    if body.student_id.trim().is_empty() {
        return Err(ApiError::bad_request("student_id must not be empty"));
    }
    let class_id = ClassId(class);
    let name = body.display_name.unwrap_or_else(|| body.student_id.clone());
    let mut room = state.classroom();
    let warning = room.register_student(&class_id, StudentId(body.student_id.clone()), name.clone(), Utc::now())?;
    let size = room.roster(&class_id).map_or(0, Roster::len);
    Ok((
        StatusCode::CREATED,
        Json(json!({
            "class_id": class_id,
            "student_id": body.student_id,
            "display_name": name,
            "class_size": size,
            "warning": warning,
        })),
    ))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewSession {
    class_id: String,
    student_id: String,
    #[serde(default)]
    seed: Option<u64>,
}

pub async fn start_session(
    State(state): State<AppState>,
    JsonBody(body): JsonBody<NewSession>,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let seed = body.seed.unwrap_or_else(rand::random);
    let mut room = state.classroom();
    let session = room
        .start_session(
            &ClassId(body.class_id),
            &StudentId(body.student_id),
            seed,
            SessionId::random(),
            Utc::now(),
        )?
        .clone();
    let view = SessionView::of(&session, room.bank());
    Ok((StatusCode::CREATED, Json(view)))
}

pub async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    session_view(&state, &SessionId(id)).map(Json)
}

/// Draws the next question, or repeats the open one.
pub async fn get_question(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<QuestionView>, ApiError> {
    let id = SessionId(id);
    let mut room = state.classroom();
    match room.current_or_next_question(&id, Utc::now()) {
        Ok(q) => Ok(Json(QuestionView::from(&q))),
        Err(e) => {
            let err = ApiError::from(e);
            if err.status == StatusCode::GONE {
                if let Some(s) = room.session(&id) {
                    return Err(err.with_summary(s.summary()));
                }
            }
            Err(err)
        }
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Acknowledge {
    #[serde(default)]
    note: Option<String>,
}

/// Body is optional; empty or `null` acknowledges without a note.
pub async fn acknowledge(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<SessionView>, ApiError> {
    let ack: Acknowledge = if body.iter().all(u8::is_ascii_whitespace) {
        Acknowledge::default()
    } else {
        serde_json::from_slice::<Option<Acknowledge>>(&body)
            .map_err(|e| ApiError::bad_request(e.to_string()))?
            .unwrap_or_default()
    };
    let note = ack.note.filter(|n| !n.trim().is_empty());
    let mut room = state.classroom();
    let session = room.acknowledge_feedback(&SessionId(id), note, Utc::now())?.clone();
    let view = SessionView::of(&session, room.bank());
    Ok(Json(view))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manual {
    emotion: Emotion,
}

/// Teacher-entered answer for when the camera cannot read the card.
pub async fn manual(
    State(state): State<AppState>,
    Path(id): Path<String>,
    JsonBody(body): JsonBody<Manual>,
) -> Result<Json<EvaluationView>, ApiError> {
    let id = SessionId(id);
    let mut room = state.classroom();
    let evaluation = room.submit_answer(&id, body.emotion, 1.0, AnswerSource::Manual, Utc::now())?;
    let phase = room.session(&id).map(|s| s.phase).unwrap_or(Phase::Complete);
    Ok(Json(EvaluationView { evaluation, phase }))
}

pub async fn end_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    let id = SessionId(id);
    state.classroom().end_session(&id, Utc::now())?;
    session_view(&state, &id).map(Json)
}

pub async fn progress(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<ProgressReport>, ApiError> {
    Ok(Json(state.classroom().progress(&StudentId(id))?))
}
