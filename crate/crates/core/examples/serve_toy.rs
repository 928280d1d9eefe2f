//! Serves the shipped toy world over the HTTP logit protocol.
//!
//! `cargo run --example serve_toy -- 8787`, then point `acd --backend remote`
//! or the `remote_decode` example at `http://127.0.0.1:8787`.

use std::path::PathBuf;

use acd::backend::protocol;
use acd::ToyBackend;

fn main() -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let port: u16 = std::env::args().nth(1).map(|p| p.parse()).transpose()?.unwrap_or(8787);
    let world = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/toy/toy_world.json");
    let backend = ToyBackend::from_path(world)?;
    let server = tiny_http::Server::http(("127.0.0.1", port))?;
    eprintln!("serving toy world on http://127.0.0.1:{port}");
    for mut request in server.incoming_requests() {
        let mut body = String::new();
        request.as_reader().read_to_string(&mut body)?;
        let reply = protocol::handle(&backend, request.method().as_str(), request.url(), &body);
        let header = tiny_http::Header::from_bytes("Content-Type", "application/json").expect("static header");
        request
            .respond(tiny_http::Response::from_string(reply.body).with_status_code(reply.status).with_header(header))?;
    }
    Ok(())
}
