mod support;

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Barrier};
use std::thread;
use std::time::Duration;

use emonews_core::backends::mock::MockLlm;
use emonews_core::backends::{BackendError, BackendRole, LlmBackend};
use emonews_core::evalkit::LikertItems;
use emonews_core::pipeline::SystemMode;
use emonews_core::sentiment::EmotionTag;
use emonews_service::service::{SdsService, ServiceError, TurnRequest};
use emonews_service::store::SessionEvent;

use support::{pipeline, pipeline_with, service, QUESTIONS};

fn items(v: i64) -> LikertItems {
    LikertItems::from_array([v; 7]).unwrap()
}

#[test]
fn created_sessions_are_distinct_empty_and_in_instance_mode() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service(dir.path(), SystemMode::Emotional, true);
    let a = svc.create_session().unwrap().session_id;
    let b = svc.create_session().unwrap().session_id;
    assert_ne!(a, b);
    assert_eq!(svc.turn_count(&a), Some(0));
    match &svc.store().events(&a).unwrap()[0] {
        SessionEvent::SessionCreated { mode, .. } => assert_eq!(*mode, SystemMode::Emotional),
        other => panic!("{other:?}"),
    }
}

#[test]
fn blinded_payload_omits_emotion_but_log_keeps_it() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service(dir.path(), SystemMode::Emotional, true);
    let id = svc.create_session().unwrap().session_id;
    let payload = svc.post_turn(&id, TurnRequest::text(QUESTIONS[0])).unwrap();
    let json = serde_json::to_value(&payload).unwrap();
    assert!(json.get("emotion").is_none());
    assert!(!serde_json::to_string(&svc.transcript(&id).unwrap()).unwrap().contains("emotion"));

    let events = svc.store().events(&id).unwrap();
    let SessionEvent::TurnCompleted { turn } = &events[1] else { panic!() };
    assert_eq!(turn.emotion, EmotionTag::Sad);
    assert!(!turn.style_text.is_empty());
    let audio = dir.path().join(turn.audio_ref.as_ref().unwrap());
    assert!(audio.is_file());
}

#[test]
fn unblinded_payload_carries_emotion() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service(dir.path(), SystemMode::Emotional, false);
    let id = svc.create_session().unwrap().session_id;
    let payload = svc.post_turn(&id, TurnRequest::text(QUESTIONS[0])).unwrap();
    assert_eq!(payload.emotion, Some(EmotionTag::Sad));
    assert_eq!(svc.transcript(&id).unwrap().turns[0].emotion, Some(EmotionTag::Sad));
}

/// Holds each generate call until released.
struct GatedLlm {
    entered: Arc<Barrier>,
    release: Arc<AtomicBool>,
}

impl LlmBackend for GatedLlm {
    fn generate(&self, prompt: &str) -> Result<String, BackendError> {
        self.entered.wait();
        while !self.release.load(Ordering::SeqCst) {
            thread::sleep(Duration::from_millis(5));
        }
        MockLlm.generate(prompt)
    }
}

#[test]
fn second_turn_while_in_flight_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let entered = Arc::new(Barrier::new(2));
    let release = Arc::new(AtomicBool::new(false));
    let llm = Arc::new(GatedLlm { entered: entered.clone(), release: release.clone() });
    let svc = Arc::new(SdsService::open(pipeline_with(SystemMode::Emotional, Some(llm)), dir.path(), true).unwrap());
    let id = svc.create_session().unwrap().session_id;

    let first = {
        let (svc, id) = (svc.clone(), id.clone());
        thread::spawn(move || svc.post_turn(&id, TurnRequest::text(QUESTIONS[1])))
    };
    entered.wait();
    let second = svc.post_turn(&id, TurnRequest::text(QUESTIONS[2]));
    assert!(matches!(second, Err(ServiceError::Busy)), "{second:?}");
    assert!(second.unwrap_err().to_string().contains("retry"));
    assert_eq!(svc.turn_count(&id), Some(0));

    release.store(true, Ordering::SeqCst);
    first.join().unwrap().unwrap();
    assert_eq!(svc.turn_count(&id), Some(1));
}

#[test]
fn interleaved_sessions_stay_isolated() {
    let dir = tempfile::tempdir().unwrap();
    let svc = Arc::new(service(dir.path(), SystemMode::Emotional, true));
    let ids: Vec<String> = (0..4).map(|_| svc.create_session().unwrap().session_id).collect();
    let handles: Vec<_> = ids
        .iter()
        .enumerate()
        .map(|(s, id)| {
            let (svc, id) = (svc.clone(), id.clone());
            thread::spawn(move || {
                for (t, q) in QUESTIONS.iter().enumerate() {
                    svc.post_turn(&id, TurnRequest::text(format!("{q} (session {s} turn {t})"))).unwrap();
                }
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    for (s, id) in ids.iter().enumerate() {
        let events = svc.store().events(id).unwrap();
        let turns: Vec<_> = events
            .iter()
            .filter_map(|e| match e {
                SessionEvent::TurnCompleted { turn } => Some(turn),
                _ => None,
            })
            .collect();
        assert_eq!(turns.len(), 5);
        for (t, turn) in turns.iter().enumerate() {
            assert_eq!(turn.index, t);
            assert!(turn.user_text.contains(&format!("session {s} turn {t}")));
            for other in (0..4).filter(|&o| o != s) {
                assert!(!turn.prompt.contains(&format!("session {other} ")), "history leaked into {id}");
            }
        }
    }
}

#[test]
fn questionnaire_rules() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service(dir.path(), SystemMode::Baseline, true);
    let id = svc.create_session().unwrap().session_id;
    assert!(matches!(svc.submit_questionnaire(&id, items(5)), Err(ServiceError::Unprocessable(_))));
    assert!(matches!(svc.submit_questionnaire("missing", items(5)), Err(ServiceError::NotFound)));

    svc.post_turn(&id, TurnRequest::text(QUESTIONS[4])).unwrap();
    let ack = svc.submit_questionnaire(&id, items(5)).unwrap();
    assert!(ack.ok && !ack.replaced_previous);
    let ack = svc.submit_questionnaire(&id, items(4)).unwrap();
    assert!(ack.replaced_previous);

    let flags: Vec<bool> = svc
        .store()
        .events(&id)
        .unwrap()
        .into_iter()
        .filter_map(|e| match e {
            SessionEvent::QuestionnaireSubmitted { replaces_previous, mode, .. } => {
                assert_eq!(mode, SystemMode::Baseline);
                Some(replaces_previous)
            }
            _ => None,
        })
        .collect();
    assert_eq!(flags, [false, true]);

    let (responses, sessions) = emonews_service::store::load_study(dir.path()).unwrap();
    assert_eq!(responses.len(), 1);
    assert_eq!(responses[0].items, items(4));
    assert_eq!(sessions[0].n_turn, 1);
}

#[test]
fn restart_replays_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let id = {
        let svc = service(dir.path(), SystemMode::Emotional, true);
        let id = svc.create_session().unwrap().session_id;
        svc.post_turn(&id, TurnRequest::text(QUESTIONS[0])).unwrap();
        svc.post_turn(&id, TurnRequest::text(QUESTIONS[3])).unwrap();
        id
    };
    let svc = service(dir.path(), SystemMode::Emotional, true);
    let t = svc.transcript(&id).unwrap();
    assert_eq!(t.turns.len(), 2);
    let next = svc.post_turn(&id, TurnRequest::text(QUESTIONS[1])).unwrap();
    assert_eq!(next.turn_index, 2);
    assert!(SdsService::open(pipeline(SystemMode::Baseline), dir.path(), true).is_err());
}

struct FailingLlm;

impl LlmBackend for FailingLlm {
    fn generate(&self, _: &str) -> Result<String, BackendError> {
        Err(BackendError::Timeout { role: BackendRole::Llm, attempts: 2 })
    }
}

#[test]
fn stage_failure_names_stage_and_stores_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let svc = SdsService::open(pipeline_with(SystemMode::Emotional, Some(Arc::new(FailingLlm))), dir.path(), true).unwrap();
    let id = svc.create_session().unwrap().session_id;
    let err = svc.post_turn(&id, TurnRequest::text(QUESTIONS[0])).unwrap_err();
    assert!(matches!(&err, ServiceError::Stage { stage, .. } if stage == "generate"));
    assert_eq!(err.to_string(), "turn failed at stage generate");
    assert_eq!(svc.turn_count(&id), Some(0));
    assert_eq!(svc.store().events(&id).unwrap().len(), 1);
    let trace = std::fs::read_to_string(dir.path().join("trace.jsonl")).unwrap();
    assert!(trace.contains("\"generate\""));
}
