#![allow(dead_code)]

use std::collections::VecDeque;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

use roundtable::agents::{make_scripted_agent, Agent, Script};

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

/// The three scripted agents of the boat example, in table order.
pub fn boat_agents() -> Vec<Agent> {
    ["gpt", "claude", "mixtral"]
        .iter()
        .map(|name| {
            let script = Script::load(&fixture(&format!("boat/{name}.json"))).unwrap();
            make_scripted_agent(name, script).unwrap()
        })
        .collect()
}

pub fn chat_body(text: &str) -> String {
    json!({"choices": [{"index": 0, "message": {"role": "assistant", "content": text}}]}).to_string()
}

#[derive(Default)]
struct StubState {
    queue: Mutex<VecDeque<(u16, String)>>,
    fallback: Mutex<Option<(u16, String)>>,
    requests: Mutex<Vec<(Option<String>, Value)>>,
}

/// A local chat-completion endpoint that answers from a queue of canned
/// `(status, body)` pairs, then repeats its fallback.
pub struct StubServer {
    pub url: String,
    state: Arc<StubState>,
}

async fn handle(State(state): State<Arc<StubState>>, headers: HeaderMap, Json(body): Json<Value>) -> (StatusCode, String) {
    let auth = headers.get("authorization").and_then(|v| v.to_str().ok()).map(str::to_string);
    state.requests.lock().unwrap().push((auth, body));
    let next = state.queue.lock().unwrap().pop_front();
    let (status, body) = next
        .or_else(|| state.fallback.lock().unwrap().clone())
        .unwrap_or((500, "no scripted response".into()));
    (StatusCode::from_u16(status).unwrap(), body)
}

impl StubServer {
    pub async fn start(responses: Vec<(u16, String)>, fallback: Option<(u16, String)>) -> Self {
        let state = Arc::new(StubState::default());
        *state.queue.lock().unwrap() = responses.into();
        *state.fallback.lock().unwrap() = fallback;
        let app = Router::new()
            .route("/v1/chat/completions", post(handle))
            .with_state(state.clone());
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(async move {
            axum::serve(listener, app).await.unwrap();
        });
        StubServer {
            url: format!("http://{addr}/v1/chat/completions"),
            state,
        }
    }

    pub fn requests(&self) -> Vec<(Option<String>, Value)> {
        self.state.requests.lock().unwrap().clone()
    }
}
