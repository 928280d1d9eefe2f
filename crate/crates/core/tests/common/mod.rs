#![allow(dead_code)]

pub mod kernel;

use std::path::PathBuf;
use std::sync::Arc;
use std::thread;

use acd::backend::protocol;
use acd::backend::LogitBackend;
use acd::dataio::{ADVERSARIAL_FILE, DATASET_FILE, FEWSHOTS_FILE, WORLD_FILE};
use acd::harness::{BackendSpec, RunConfig, Workload};
use acd::Method;

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join("toy")
}

pub fn fixture_config(method: Method, out: impl Into<PathBuf>) -> RunConfig {
    let dir = fixture_dir();
    let mut config = RunConfig::new(method, dir.join(DATASET_FILE), BackendSpec::Toy(dir.join(WORLD_FILE)), out);
    config.fewshots = Some(dir.join(FEWSHOTS_FILE));
    config.adversarial_context = Some(dir.join(ADVERSARIAL_FILE));
    config
}

/// The shipped 400-example fixture on the toy backend.
pub fn fixture_workload() -> Workload {
    Workload::load(&fixture_config(Method::Acd, std::env::temp_dir())).expect("shipped fixture loads")
}

/// Serves `backend` over HTTP on an ephemeral local port and returns its base URL.
/// The server thread lives until the test process exits.
pub fn serve(backend: Arc<dyn LogitBackend>) -> String {
    let server = tiny_http::Server::http("127.0.0.1:0").expect("bind local port");
    let addr = server.server_addr().to_ip().expect("tcp listener");
    thread::spawn(move || {
        for mut request in server.incoming_requests() {
            let mut body = String::new();
            let _ = request.as_reader().read_to_string(&mut body);
            let reply = protocol::handle(backend.as_ref(), request.method().as_str(), request.url(), &body);
            let header = tiny_http::Header::from_bytes("Content-Type", "application/json").unwrap();
            let response =
                tiny_http::Response::from_string(reply.body).with_status_code(reply.status).with_header(header);
            let _ = request.respond(response);
        }
    });
    format!("http://{addr}")
}
