use std::sync::Arc;

use chrono::{Duration, TimeZone, Utc};
use ethica_ar_core::classroom::{Classroom, ClassroomError};
use ethica_ar_core::game::*;
use ethica_ar_core::progress::*;
use ethica_ar_core::Emotion;
use proptest::prelude::*;

fn bank() -> Arc<QuestionBank> {
    Arc::new(QuestionBank::shipped())
}

fn t0() -> chrono::DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 5, 2, 8, 30, 0).unwrap()
}

fn class() -> ClassId {
    ClassId("preprimary-A".into())
}

fn student(i: usize) -> StudentId {
    StudentId(format!("st{i}"))
}

fn setup(room: &mut Classroom, students: usize) {
    room.create_class(class(), t0()).unwrap();
    for i in 0..students {
        room.register_student(&class(), student(i), format!("Student {i}"), t0()).unwrap();
    }
}

/// Plays a session answering the first `good` questions appropriately and the
/// rest not, returning the number of feedback acknowledgements.
fn play(room: &mut Classroom, who: &StudentId, id: &str, seed: u64, good: usize, start: chrono::DateTime<Utc>) -> usize {
    let sid = SessionId(id.into());
    room.start_session(&class(), who, seed, sid.clone(), start).unwrap();
    let mut acks = 0;
    let mut n = 0;
    while room.session(&sid).unwrap().phase != Phase::Complete {
        let q = room.next_question(&sid, start).unwrap();
        let e = if n < good {
            *q.probable.iter().next().unwrap()
        } else {
            Emotion::ALL.into_iter().find(|e| !q.probable.contains(e)).unwrap()
        };
        n += 1;
        let eval = room.submit_answer(&sid, e, 0.95, AnswerSource::Camera, start).unwrap();
        if !eval.appropriate {
            room.acknowledge_feedback(&sid, Some(format!("note {n}")), start).unwrap();
            acks += 1;
        }
    }
    acks
}

fn count(events: &[Event], name: &str) -> usize {
    events.iter().filter(|e| e.kind.name() == name).count()
}

#[test]
fn first_class_event_makes_a_log_of_one() {
    let mut log = EventLog::in_memory(bank());
    log.record(EventKind::ClassCreated { class_id: class() }, t0()).unwrap();
    assert_eq!(log.len(), 1);
    assert_eq!(log.events()[0].seq, 1);
}

#[test]
fn skipping_a_sequence_number_is_a_gap() {
    let mut log = EventLog::in_memory(bank());
    let err = log
        .append_event(Event {
            seq: 2,
            ts: t0(),
            kind: EventKind::ClassCreated { class_id: class() },
        })
        .unwrap_err();
    assert!(matches!(err, StoreError::SequenceGap { expected: 1, got: 2 }));
    assert!(log.is_empty());
}

#[test]
fn events_must_reference_known_entities() {
    let mut log = EventLog::in_memory(bank());
    let err = log
        .record(
            EventKind::StudentRegistered {
                class_id: class(),
                student_id: student(0),
                display_name: "x".into(),
            },
            t0(),
        )
        .unwrap_err();
    assert!(matches!(err, StoreError::UnknownEntity(_)));
    let err = log
        .record(
            EventKind::QuestionAsked {
                session_id: SessionId("nope".into()),
                question_id: QuestionId("q1".into()),
            },
            t0(),
        )
        .unwrap_err();
    assert!(matches!(err, StoreError::UnknownEntity(_)));
}

#[test]
fn evaluation_needs_a_matching_detection() {
    let mut room = Classroom::in_memory(bank());
    setup(&mut room, 1);
    let sid = SessionId("s".into());
    room.start_session(&class(), &student(0), 1, sid.clone(), t0()).unwrap();
    let q = room.next_question(&sid, t0()).unwrap();
    let mut log = EventLog::in_memory(bank());
    for e in room.log().events() {
        log.append_event(e.clone()).unwrap();
    }
    let err = log
        .record(
            EventKind::Evaluated {
                session_id: sid,
                question_id: q.id,
                emotion: Emotion::Happy,
                appropriate: true,
                feedback: None,
            },
            t0(),
        )
        .unwrap_err();
    assert!(matches!(err, StoreError::InvalidEvent { .. }));
}

#[test]
fn full_session_event_counts() {
    let mut room = Classroom::in_memory(bank());
    setup(&mut room, 1);
    let before = room.log().len();
    let acks = play(&mut room, &student(0), "s1", 7, 6, t0());
    let events = &room.log().events()[before..];
    assert_eq!(acks, 4);
    assert_eq!(count(events, "SessionStarted"), 1);
    assert_eq!(count(events, "QuestionAsked"), 10);
    assert_eq!(count(events, "CardDetected"), 10);
    assert_eq!(count(events, "Evaluated"), 10);
    assert_eq!(count(events, "FeedbackAcknowledged"), acks);
    assert_eq!(count(events, "SessionEnded"), 1);
    assert_eq!(events.len(), 32 + acks);
}

#[test]
fn replay_reconstructs_the_live_session_field_for_field() {
    let mut room = Classroom::in_memory(bank());
    setup(&mut room, 2);
    play(&mut room, &student(0), "a", 3, 5, t0());
    play(&mut room, &student(1), "b", 4, 8, t0());
    let world = replay(room.log().events(), bank()).unwrap();
    assert_eq!(&world, room.live());
    for (id, live) in &room.live().sessions {
        assert_eq!(&world.sessions[id], live);
    }
    assert!(replay([], bank()).unwrap().is_empty());
}

#[test]
fn truncated_log_reflects_the_last_event() {
    let mut room = Classroom::in_memory(bank());
    setup(&mut room, 1);
    play(&mut room, &student(0), "s", 5, 3, t0());
    let events = room.log().events();
    let sid = SessionId("s".into());
    for cut in 0..=events.len() {
        let world = replay(&events[..cut], bank()).unwrap();
        let Some(session) = world.sessions.get(&sid) else {
            assert!(events[..cut].iter().all(|e| e.kind.session_id() != Some(&sid)));
            continue;
        };
        let expected = match &events[cut - 1].kind {
            EventKind::SessionStarted { .. } => Phase::AwaitingQuestion,
            EventKind::FeedbackAcknowledged { .. } if session.remaining.is_empty() => Phase::Complete,
            EventKind::FeedbackAcknowledged { .. } => Phase::AwaitingQuestion,
            EventKind::QuestionAsked { .. } | EventKind::CardDetected { .. } => Phase::AwaitingCard,
            EventKind::Evaluated { appropriate: false, .. } => Phase::ShowingFeedback,
            EventKind::Evaluated { .. } if session.remaining.is_empty() => Phase::Complete,
            EventKind::Evaluated { .. } => Phase::AwaitingQuestion,
            EventKind::SessionEnded { .. } => Phase::Complete,
            other => panic!("unexpected {other:?}"),
        };
        assert_eq!(session.phase, expected, "cut {cut}");
        let answered = events[..cut].iter().filter(|e| e.kind.name() == "Evaluated").count();
        assert_eq!(session.responses.len(), answered);
    }
}

#[test]
fn file_appends_never_touch_earlier_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(log_file_name(&class()));
    assert!(path.ends_with("events-preprimary-A.jsonl"));
    let mut room = Classroom::new(EventLog::open(&path, bank()).unwrap());
    setup(&mut room, 1);
    let sid = SessionId("s".into());
    room.start_session(&class(), &student(0), 2, sid.clone(), t0()).unwrap();
    let mut prefix = std::fs::read(&path).unwrap();
    for _ in 0..10 {
        room.next_question(&sid, t0()).unwrap();
        let now = std::fs::read(&path).unwrap();
        assert!(now.len() > prefix.len());
        assert_eq!(&now[..prefix.len()], &prefix[..]);
        assert!(now.ends_with(b"\n"));
        let eval = room.submit_answer(&sid, Emotion::Angry, 1.0, AnswerSource::Manual, t0()).unwrap();
        if !eval.appropriate {
            room.acknowledge_feedback(&sid, None, t0()).unwrap();
        }
        prefix = now;
    }
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), room.log().len());
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["seq"].is_u64() && v["ts"].is_string() && v["kind"].is_string());
    }

    let reopened = EventLog::open(&path, bank()).unwrap();
    assert_eq!(reopened.world(), room.live());
    assert_eq!(read_events(&path).unwrap(), room.log().events());
}

#[test]
fn corrupt_line_is_reported_with_its_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.jsonl");
    let mut room = Classroom::new(EventLog::open(&path, bank()).unwrap());
    setup(&mut room, 2);
    let mut text = std::fs::read_to_string(&path).unwrap();
    text.push_str("{\"seq\": 4, \"ts\": \"garbage\"}\n");
    std::fs::write(&path, text).unwrap();
    match EventLog::open(&path, bank()) {
        Err(StoreError::CorruptLog { line: Some(4), .. }) => {}
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn student_without_sessions_has_no_rate() {
    let mut room = Classroom::in_memory(bank());
    setup(&mut room, 1);
    let r = room.progress(&student(0)).unwrap();
    assert_eq!((r.sessions_played, r.questions_answered, r.appropriate_rate), (0, 0, None));
    assert!(matches!(room.progress(&student(9)), Err(StoreError::UnknownEntity(_))));
}

#[test]
fn seven_of_ten_is_a_rate_of_point_seven() {
    let mut room = Classroom::in_memory(bank());
    setup(&mut room, 1);
    play(&mut room, &student(0), "s", 1, 7, t0());
    let r = progress_report_from_events(&student(0), room.log().events(), bank()).unwrap();
    assert_eq!(r.questions_answered, 10);
    assert_eq!(r.appropriate_count, 7);
    assert_eq!(r.appropriate_rate, Some(0.7));
    assert_eq!(r.per_emotion_confusion.values().flat_map(|m| m.values()).sum::<usize>(), 10);
}

#[test]
fn trend_follows_session_start_order() {
    let mut room = Classroom::in_memory(bank());
    setup(&mut room, 1);
    play(&mut room, &student(0), "first", 1, 5, t0());
    play(&mut room, &student(0), "second", 2, 9, t0() + Duration::days(7));
    let r = room.progress(&student(0)).unwrap();
    assert_eq!(r.trend, vec![0.5, 0.9]);
    assert_eq!(r.sessions_played, 2);
    assert_eq!(r.questions_answered, 20);
    assert_eq!(r.appropriate_rate, Some(0.7));
    let table = format_report_table(&[r]);
    assert!(table.contains("0.50 0.90"), "{table}");
}

#[test]
fn new_session_ends_the_unfinished_one() {
    let mut room = Classroom::in_memory(bank());
    setup(&mut room, 1);
    let first = SessionId("first".into());
    room.start_session(&class(), &student(0), 1, first.clone(), t0()).unwrap();
    room.next_question(&first, t0()).unwrap();
    room.start_session(&class(), &student(0), 2, SessionId("second".into()), t0()).unwrap();
    assert!(room.session(&first).unwrap().closed);
    assert!(matches!(
        room.log().events().iter().rev().nth(1).map(|e| &e.kind),
        Some(EventKind::SessionEnded { completed: false, .. })
    ));
    assert!(room.submit_answer(&first, Emotion::Sad, 1.0, AnswerSource::Camera, t0()).is_err());
    assert_eq!(room.live(), room.log().world());
}

#[test]
fn open_question_is_returned_until_answered() {
    let mut room = Classroom::in_memory(bank());
    setup(&mut room, 1);
    let sid = SessionId("s".into());
    room.start_session(&class(), &student(0), 8, sid.clone(), t0()).unwrap();
    let a = room.current_or_next_question(&sid, t0()).unwrap();
    let b = room.current_or_next_question(&sid, t0()).unwrap();
    assert_eq!(a, b);
    assert_eq!(count(room.log().events(), "QuestionAsked"), 1);
    assert!(matches!(
        room.register_student(&class(), student(0), "again".into(), t0()),
        Err(ClassroomError::Duplicate(_))
    ));
}

#[derive(Debug, Clone)]
enum Step {
    Start(usize, u64),
    Question(usize),
    Answer(usize, usize, bool),
    Ack(usize),
    End(usize),
}

fn step() -> impl Strategy<Value = Step> {
    prop_oneof![
        1 => (0usize..3, any::<u64>()).prop_map(|(s, seed)| Step::Start(s, seed)),
        4 => (0usize..3).prop_map(Step::Question),
        4 => (0usize..3, 0usize..4, any::<bool>()).prop_map(|(s, e, m)| Step::Answer(s, e, m)),
        2 => (0usize..3).prop_map(Step::Ack),
        1 => (0usize..3).prop_map(Step::End),
    ]
}

/// Applies steps, ignoring rejected ones, and returns the classroom.
fn drive(steps: &[Step]) -> Classroom {
    let mut room = Classroom::in_memory(bank());
    setup(&mut room, 3);
    let mut latest: Vec<Option<SessionId>> = vec![None; 3];
    for (i, s) in steps.iter().enumerate() {
        let now = t0() + Duration::seconds(i as i64);
        let _ = match s {
            Step::Start(who, seed) => {
                let id = SessionId(format!("sess-{i}"));
                room.start_session(&class(), &student(*who), *seed, id.clone(), now)
                    .map(|_| latest[*who] = Some(id))
            }
            Step::Question(who) => match &latest[*who] {
                Some(id) => room.next_question(id, now).map(|_| ()),
                None => Ok(()),
            },
            Step::Answer(who, e, manual) => match &latest[*who] {
                Some(id) => {
                    let src = if *manual { AnswerSource::Manual } else { AnswerSource::Camera };
                    room.submit_answer(id, Emotion::ALL[*e], 0.75, src, now).map(|_| ())
                }
                None => Ok(()),
            },
            Step::Ack(who) => match &latest[*who] {
                Some(id) => room.acknowledge_feedback(id, Some("why?".into()), now).map(|_| ()),
                None => Ok(()),
            },
            Step::End(who) => match &latest[*who] {
                Some(id) => room.end_session(id, now),
                None => Ok(()),
            },
        };
    }
    room
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn persisted_log_replays_to_the_live_state(steps in prop::collection::vec(step(), 0..120)) {
        let room = drive(&steps);
        let world = replay(room.log().events(), bank()).unwrap();
        prop_assert_eq!(&world, room.live());
        for s in room.live().sessions.values() {
            prop_assert!(s.check_invariants(&bank()));
        }
    }

    #[test]
    fn prefix_then_suffix_equals_whole(steps in prop::collection::vec(step(), 0..120), cut in 0.0..=1.0f64) {
        let room = drive(&steps);
        let events = room.log().events();
        let k = (cut * events.len() as f64) as usize;
        let mut world = replay(&events[..k], bank()).unwrap();
        replay_onto(&mut world, &events[k..]).unwrap();
        prop_assert_eq!(world, replay(events, bank()).unwrap());
    }

    #[test]
    fn reports_conserve_counts(steps in prop::collection::vec(step(), 0..120)) {
        let room = drive(&steps);
        for i in 0..3 {
            let r = room.progress(&student(i)).unwrap();
            let per_session: usize = room.live().sessions_of(&student(i)).map(|s| s.responses.len()).sum();
            prop_assert_eq!(r.questions_answered, per_session);
            prop_assert!(r.appropriate_count <= r.questions_answered);
            if let Some(rate) = r.appropriate_rate {
                prop_assert!((0.0..=1.0).contains(&rate));
            }
        }
    }
}
