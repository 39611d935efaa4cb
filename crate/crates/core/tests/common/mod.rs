//! Shared helpers: a minimal HTTP scoring service and synthetic datasets.
#![allow(dead_code)]

pub mod synth;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use chainbeam::scoring::{
    lexical_score, ScoreRequest, ScoreRequestBody, ScoreResponseBody, WirePassage,
};
use chainbeam::{Passage, Question};

#[derive(Debug, Clone, Copy)]
pub enum Behavior {
    /// Answers with in-process lexical scores.
    Lexical,
    /// Returns HTTP 503 for the first `n` score requests, then behaves like `Lexical`.
    FailFirst(usize),
    /// Always returns HTTP 503.
    AlwaysDown,
    /// Returns one score too few.
    ShortResponse,
    /// Returns a body that is not JSON.
    Garbage,
}

pub struct MockScorer {
    pub url: String,
    pub score_hits: Arc<AtomicUsize>,
}

impl MockScorer {
    pub fn start(behavior: Behavior) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let score_hits = Arc::new(AtomicUsize::new(0));
        let hits = score_hits.clone();
        thread::spawn(move || {
            for stream in listener.incoming().flatten() {
                let hits = hits.clone();
                thread::spawn(move || handle(stream, behavior, &hits));
            }
        });
        Self { url, score_hits }
    }

    pub fn hits(&self) -> usize {
        self.score_hits.load(Ordering::SeqCst)
    }
}

/// A local URL nothing listens on.
pub fn dead_url() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    url
}

fn handle(stream: TcpStream, behavior: Behavior, hits: &AtomicUsize) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut request_line = String::new();
    if reader.read_line(&mut request_line).is_err() {
        return;
    }
    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                content_length = v.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; content_length];
    if reader.read_exact(&mut body).is_err() {
        return;
    }

    let (status, payload) = if request_line.starts_with("GET /health") {
        match behavior {
            Behavior::AlwaysDown => (503, r#"{"status":"down"}"#.to_string()),
            _ => (200, r#"{"status":"ok"}"#.to_string()),
        }
    } else if request_line.starts_with("POST /score") {
        let n = hits.fetch_add(1, Ordering::SeqCst);
        match behavior {
            Behavior::AlwaysDown => (503, "unavailable".to_string()),
            Behavior::FailFirst(k) if n < k => (503, "warming up".to_string()),
            Behavior::Garbage => (200, "not json".to_string()),
            _ => match serde_json::from_slice::<ScoreRequestBody>(&body) {
                Ok(req) => {
                    let mut scores = lexical_scores(&req);
                    if matches!(behavior, Behavior::ShortResponse) {
                        scores.pop();
                    }
                    (
                        200,
                        serde_json::to_string(&ScoreResponseBody { scores }).unwrap(),
                    )
                }
                Err(e) => (400, format!("{{\"error\":\"{e}\"}}")),
            },
        }
    } else {
        (404, "{}".to_string())
    };
    respond(stream, status, &payload);
}

fn respond(mut stream: TcpStream, status: u16, body: &str) {
    let reason = match status {
        200 => "OK",
        400 => "Bad Request",
        404 => "Not Found",
        _ => "Service Unavailable",
    };
    let _ = write!(
        stream,
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    let _ = stream.flush();
}

fn passage(i: usize, w: &WirePassage) -> Passage {
    Passage::new(format!("p{i}"), w.title.clone(), w.text.clone())
}

fn lexical_scores(req: &ScoreRequestBody) -> Vec<f64> {
    req.items
        .iter()
        .map(|item| {
            let q = Question::new("wire", item.question.clone());
            let prefix: Vec<Passage> = item
                .chain
                .iter()
                .enumerate()
                .map(|(i, p)| passage(i, p))
                .collect();
            let cand = passage(prefix.len(), &item.candidate);
            lexical_score(&ScoreRequest::new(&q, prefix.iter().collect(), &cand)).unwrap_or(0.0)
        })
        .collect()
}
