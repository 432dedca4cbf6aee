mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use async_trait::async_trait;
use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

use common::{item_number, toy_math_dataset};
use mlicl_core::corpus::{LanguageRegistry, TaskKind, TemplateSet};
use mlicl_core::inference::{
    prompt_digest, read_log, run_eval, ClientError, GenerationConfig, HttpChatClient, InferenceError,
    ModelClient, RetryPolicy, RunOptions, RunStatus, ScriptedMock,
};
use mlicl_core::prompt::{ChatMessage, ChatPrompt, IclMode, ModeDescriptor, PromptContext};
use mlicl_core::sampling::make_plan;

fn prompts(n: usize) -> Vec<ChatPrompt> {
    let dataset = toy_math_dataset("toy", &["en", "sw"], 8, n.div_ceil(2));
    let (hrls, _) = LanguageRegistry::preset().partition("toy", &dataset.languages());
    let plan = make_plan(1, dataset.test_size(), 3, 8, &hrls, None).unwrap();
    let templates = TemplateSet::english_defaults();
    let ctx = PromptContext::new(&dataset, &templates, &plan);
    let mut all = ctx.build_all(ModeDescriptor::icl(IclMode::English), None).unwrap();
    all.truncate(n);
    all
}

fn options(max_in_flight: usize, retries: u32) -> RunOptions {
    RunOptions {
        run_id: "t".into(),
        max_in_flight,
        retry: RetryPolicy {
            retries,
            base_delay: Duration::from_millis(1),
        },
    }
}

fn gen() -> GenerationConfig {
    GenerationConfig::for_kind("m", TaskKind::MathCot)
}

#[tokio::test]
async fn fixed_mock_then_resume() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("run.jsonl");
    let mock = ScriptedMock::constant("The answer is 3.");
    let s = run_eval(prompts(100), &mock, &gen(), &options(4, 2), &log).await.unwrap();
    assert_eq!((s.completed, s.failed, s.skipped), (100, 0, 0));
    assert_eq!(read_log(&log).unwrap().len(), 100);

    let again = ScriptedMock::constant("unused");
    let s = run_eval(prompts(100), &again, &gen(), &options(4, 2), &log).await.unwrap();
    assert_eq!((s.completed, s.failed, s.skipped), (0, 0, 100));
    assert_eq!(again.calls(), 0);
    assert_eq!(read_log(&log).unwrap().len(), 100);
}

#[tokio::test]
async fn permanent_failures_are_recorded_and_retried_on_resume() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("run.jsonl");
    let failing = [3usize, 17, 40];
    let script = move |m: &[ChatMessage]| {
        let i = item_number(&m.last().unwrap().content);
        if failing.contains(&i) {
            Err(ClientError::Fatal("HTTP 400".into()))
        } else {
            Ok(format!("{i}"))
        }
    };
    let mock = ScriptedMock::new(script);
    let all = prompts(100);
    let expected_failed = all
        .iter()
        .filter(|p| failing.contains(&p.meta.test_index))
        .count();
    let s = run_eval(all.clone(), &mock, &gen(), &options(8, 2), &log).await.unwrap();
    assert_eq!(s.failed, expected_failed);
    assert_eq!(s.completed + s.failed + s.skipped, 100);
    // Fatal errors are not retried.
    assert_eq!(mock.calls(), 100);

    let records = read_log(&log).unwrap();
    let errors: Vec<_> = records.iter().filter(|r| !r.is_ok()).collect();
    assert_eq!(errors.len(), expected_failed);
    assert!(errors.iter().all(|r| matches!(&r.status, RunStatus::Error(e) if e.contains("400"))));

    let healed = ScriptedMock::constant("0");
    let s = run_eval(all, &healed, &gen(), &options(8, 2), &log).await.unwrap();
    assert_eq!((s.completed, s.skipped), (expected_failed, 100 - expected_failed));
    assert_eq!(healed.calls(), expected_failed);
}

#[tokio::test]
async fn transient_errors_retry_up_to_the_limit() {
    let dir = tempfile::tempdir().unwrap();
    let flaky_calls = Arc::new(AtomicUsize::new(0));
    let counter = flaky_calls.clone();
    let flaky = ScriptedMock::new(move |_| {
        if counter.fetch_add(1, Ordering::SeqCst) < 2 {
            Err(ClientError::Retryable("HTTP 429".into()))
        } else {
            Ok("1".into())
        }
    });
    let s = run_eval(prompts(1), &flaky, &gen(), &options(1, 2), &dir.path().join("a.jsonl"))
        .await
        .unwrap();
    assert_eq!((s.completed, s.failed), (1, 0));
    assert_eq!(flaky.calls(), 3);

    let always = ScriptedMock::new(|_| Err(ClientError::Retryable("HTTP 503".into())));
    let s = run_eval(prompts(1), &always, &gen(), &options(1, 2), &dir.path().join("b.jsonl"))
        .await
        .unwrap();
    assert_eq!((s.completed, s.failed), (0, 1));
    assert_eq!(always.calls(), 3);
}

struct Gauge {
    current: AtomicUsize,
    peak: AtomicUsize,
}

#[async_trait]
impl ModelClient for Gauge {
    async fn chat(&self, _: &[ChatMessage], _: &GenerationConfig) -> Result<String, ClientError> {
        let now = self.current.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        tokio::time::sleep(Duration::from_millis(5)).await;
        self.current.fetch_sub(1, Ordering::SeqCst);
        Ok("1".into())
    }
}

#[tokio::test]
async fn in_flight_requests_are_bounded() {
    let dir = tempfile::tempdir().unwrap();
    let gauge = Gauge {
        current: AtomicUsize::new(0),
        peak: AtomicUsize::new(0),
    };
    let s = run_eval(prompts(40), &gauge, &gen(), &options(3, 0), &dir.path().join("g.jsonl"))
        .await
        .unwrap();
    assert_eq!(s.completed, 40);
    let peak = gauge.peak.load(Ordering::SeqCst);
    assert!(peak <= 3 && peak >= 2, "peak {peak}");
}

#[tokio::test]
async fn duplicate_prompts_in_one_run_are_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let mut ps = prompts(5);
    ps.extend(prompts(5));
    let mock = ScriptedMock::constant("1");
    let s = run_eval(ps, &mock, &gen(), &options(2, 0), &dir.path().join("d.jsonl")).await.unwrap();
    assert_eq!((s.completed, s.skipped), (5, 5));
}

#[tokio::test]
async fn malformed_logs_refuse_to_resume() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("bad.jsonl");
    std::fs::write(&log, "not json\n").unwrap();
    let mock = ScriptedMock::constant("1");
    let err = run_eval(prompts(2), &mock, &gen(), &options(1, 0), &log).await.unwrap_err();
    assert!(matches!(err, InferenceError::MalformedLog { line: 1, .. }));
    assert_eq!(mock.calls(), 0);

    let good = dir.path().join("dup.jsonl");
    run_eval(prompts(1), &mock, &gen(), &options(1, 0), &good).await.unwrap();
    let line = std::fs::read_to_string(&good).unwrap();
    std::fs::write(&good, format!("{line}{line}")).unwrap();
    let err = read_log(&good).unwrap_err();
    assert!(matches!(err, InferenceError::MalformedLog { line: 2, .. }));

    let err = run_eval(prompts(1), &mock, &gen(), &options(0, 0), &dir.path().join("z.jsonl"))
        .await
        .unwrap_err();
    assert!(matches!(err, InferenceError::Config(_)));
}

#[tokio::test]
async fn unwritable_log_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let mock = ScriptedMock::constant("1");
    let err = run_eval(prompts(1), &mock, &gen(), &options(1, 0), &blocker.join("run.jsonl"))
        .await
        .unwrap_err();
    assert!(matches!(err, InferenceError::Io { .. }));
}

#[test]
fn digest_is_sixteen_hex_digits_and_content_sensitive() {
    let ps = prompts(2);
    let a = prompt_digest(&ps[0].messages);
    let b = prompt_digest(&ps[1].messages);
    assert_eq!(a.len(), 16);
    assert!(a.chars().all(|c| c.is_ascii_hexdigit()));
    assert_ne!(a, b);
    assert_eq!(a, prompt_digest(&ps[0].messages));
}

#[derive(Clone, Default)]
struct Server {
    bodies: Arc<Mutex<Vec<Value>>>,
    auth: Arc<Mutex<Vec<Option<String>>>>,
    statuses: Arc<Mutex<Vec<u16>>>,
}

async fn completions(
    State(s): State<Server>,
    headers: HeaderMap,
    Json(body): Json<Value>,
) -> (StatusCode, Json<Value>) {
    s.bodies.lock().unwrap().push(body);
    s.auth.lock().unwrap().push(
        headers
            .get("authorization")
            .map(|v| v.to_str().unwrap().to_string()),
    );
    let status = {
        let mut queue = s.statuses.lock().unwrap();
        if queue.is_empty() { 200 } else { queue.remove(0) }
    };
    let status = StatusCode::from_u16(status).unwrap();
    if status.is_success() {
        let reply = json!({"choices": [{"message": {"role": "assistant", "content": "The answer is 3."}}]});
        (status, Json(reply))
    } else {
        (status, Json(json!({"error": "scripted"})))
    }
}

async fn spawn(server: Server) -> String {
    let app = Router::new()
        .route("/v1/chat/completions", post(completions))
        .with_state(server);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    format!("http://{addr}/v1")
}

#[tokio::test]
async fn http_client_wire_format() {
    let server = Server::default();
    let base = spawn(server.clone()).await;
    let client = HttpChatClient::new(&base, None).unwrap();
    let ps = prompts(3);
    let text = client.chat(&ps[0].messages, &gen()).await.unwrap();
    assert_eq!(text, "The answer is 3.");

    let dir = tempfile::tempdir().unwrap();
    run_eval(ps.clone(), &client, &gen(), &options(2, 0), &dir.path().join("h.jsonl"))
        .await
        .unwrap();
    let bodies = server.bodies.lock().unwrap();
    assert_eq!(bodies.len(), 4);
    for body in bodies.iter() {
        assert_eq!(body["temperature"], json!(0));
        assert_eq!(body["max_tokens"], json!(500));
        assert_eq!(body["model"], json!("m"));
        assert_eq!(body["messages"][0]["role"], json!("system"));
    }
    assert_eq!(bodies[0]["messages"], serde_json::to_value(&ps[0].messages).unwrap());
    assert!(server.auth.lock().unwrap().iter().all(Option::is_none));
}

#[tokio::test]
async fn http_status_classes() {
    let server = Server::default();
    let base = spawn(server.clone()).await;
    let client = HttpChatClient::new(&base, None).unwrap();
    let dir = tempfile::tempdir().unwrap();

    server.statuses.lock().unwrap().extend([429, 500]);
    let s = run_eval(prompts(1), &client, &gen(), &options(1, 2), &dir.path().join("a.jsonl"))
        .await
        .unwrap();
    assert_eq!((s.completed, s.failed), (1, 0));
    assert_eq!(server.bodies.lock().unwrap().len(), 3);

    server.statuses.lock().unwrap().push(400);
    let s = run_eval(prompts(1), &client, &gen(), &options(1, 2), &dir.path().join("b.jsonl"))
        .await
        .unwrap();
    assert_eq!((s.completed, s.failed), (0, 1));
    assert_eq!(server.bodies.lock().unwrap().len(), 4);
}

#[tokio::test]
async fn http_client_api_key() {
    assert!(matches!(
        HttpChatClient::new("http://127.0.0.1:9", Some("MLICL_TEST_SURELY_UNSET_KEY")),
        Err(InferenceError::Config(_))
    ));

    let server = Server::default();
    let base = spawn(server.clone()).await;
    let var = "MLICL_TEST_API_KEY_PRESENT";
    std::env::set_var(var, "sk-test");
    let client = HttpChatClient::new(&base, Some(var)).unwrap();
    client.chat(&prompts(1)[0].messages, &gen()).await.unwrap();
    assert_eq!(server.auth.lock().unwrap()[0].as_deref(), Some("Bearer sk-test"));
}
