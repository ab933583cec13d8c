#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use nlicur_core::entailment::{OracleScorer, Pair, Scorer};
use nlicur_core::Example;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Misbehaviour the stub scorer injects.
#[derive(Debug, Clone, Copy)]
pub enum Fault {
    None,
    /// Answer 503 to the first `n` requests.
    FailFirst(u64),
    /// Answer 503 to every `n`th request.
    EveryNth(u64),
    /// Drop the last score from every response.
    Short,
}

/// A local HTTP scorer that answers with oracle scores.
pub struct Stub {
    pub url: String,
    pub requests: Arc<AtomicU64>,
    pub injected: Arc<AtomicU64>,
    server: Arc<tiny_http::Server>,
    threads: Vec<JoinHandle<()>>,
}

impl Stub {
    pub fn start(fault: Fault) -> Self {
        let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").expect("bind stub"));
        let url = format!(
            "http://{}",
            server.server_addr().to_ip().expect("ip listener")
        );
        let requests = Arc::new(AtomicU64::new(0));
        let injected = Arc::new(AtomicU64::new(0));
        let threads = (0..8)
            .map(|_| {
                let (server, requests, injected) =
                    (server.clone(), requests.clone(), injected.clone());
                std::thread::spawn(move || {
                    while let Ok(req) = server.recv() {
                        let n = requests.fetch_add(1, Ordering::SeqCst);
                        let fail = match fault {
                            Fault::FailFirst(k) => n < k,
                            Fault::EveryNth(k) => n % k == k - 1,
                            _ => false,
                        };
                        if fail {
                            injected.fetch_add(1, Ordering::SeqCst);
                            let _ = req.respond(
                                tiny_http::Response::from_string("busy").with_status_code(503),
                            );
                            continue;
                        }
                        handle(req, matches!(fault, Fault::Short));
                    }
                })
            })
            .collect();
        Self {
            url,
            requests,
            injected,
            server,
            threads,
        }
    }
}

fn handle(mut req: tiny_http::Request, short: bool) {
    let mut body = String::new();
    if req.as_reader().read_to_string(&mut body).is_err() || req.url() != "/score" {
        let _ = req.respond(tiny_http::Response::from_string("bad request").with_status_code(400));
        return;
    }
    let v: serde_json::Value = match serde_json::from_str(&body) {
        Ok(v) => v,
        Err(_) => {
            let _ = req.respond(tiny_http::Response::from_string("bad json").with_status_code(400));
            return;
        }
    };
    let pairs: Vec<(String, String)> = v["pairs"]
        .as_array()
        .map(|a| {
            a.iter()
                .map(|p| {
                    (
                        p["premise"].as_str().unwrap_or_default().to_string(),
                        p["hypothesis"].as_str().unwrap_or_default().to_string(),
                    )
                })
                .collect()
        })
        .unwrap_or_default();
    let refs: Vec<Pair<'_>> = pairs.iter().map(|(p, h)| Pair::new(p, h)).collect();
    let mut scores = OracleScorer.score_batch(&refs).unwrap_or_default();
    if short {
        scores.pop();
    }
    let header = tiny_http::Header::from_bytes("Content-Type", "application/json").unwrap();
    let body = serde_json::json!({ "scores": scores }).to_string();
    let _ = req.respond(tiny_http::Response::from_string(body).with_header(header));
}

impl Drop for Stub {
    fn drop(&mut self) {
        for _ in &self.threads {
            self.server.unblock();
        }
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

const WORDS: &[&str] = &[
    "river", "council", "market", "storm", "school", "bridge", "election", "farmer", "harvest",
    "police", "court", "minister", "village", "festival", "museum", "train", "doctor", "hospital",
    "football", "coach", "mayor", "budget", "drought", "flood", "music", "library", "airport",
    "factory", "workers", "strike", "protest", "treaty", "border", "island", "mountain", "forest",
    "ocean", "harbour", "singer", "author", "novel", "prize", "bank", "loan", "price", "fuel",
    "road", "city", "rain", "night",
];

pub const LANGS: &[&str] = &["amharic", "english", "hausa", "japanese", "welsh"];

/// Deterministic synthetic example `i`: roughly half the summary words come
/// from the document so the oracle marks a share of pairs as entailed.
pub fn synthetic_example(i: u64, seed: u64) -> Example {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ i.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut below = |n: u64| (rng.next_u64() % n) as usize;
    let doc_len = 12 + below(28);
    let doc: Vec<&str> = (0..doc_len)
        .map(|_| WORDS[below(WORDS.len() as u64)])
        .collect();
    let sum_len = 3 + below(7);
    let copy_rate = below(11);
    let sum: Vec<&str> = (0..sum_len)
        .map(|_| {
            if below(10) < copy_rate {
                doc[below(doc.len() as u64)]
            } else {
                WORDS[below(WORDS.len() as u64)]
            }
        })
        .collect();
    let lang = LANGS[below(LANGS.len() as u64)];
    Example::new(format!("ex{i:07}"), lang, doc.join(" "), sum.join(" "))
}

pub fn synthetic_corpus(n: u64, seed: u64) -> Vec<Example> {
    (0..n).map(|i| synthetic_example(i, seed)).collect()
}

pub fn write_corpus(path: &Path, examples: &[Example]) {
    nlicur::corpus_io::write_corpus(path, examples).expect("write corpus");
}

/// Runs the `nlicur` binary with the given arguments.
pub fn nlicur<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_nlicur"))
        .args(args)
        .env_remove("NLICUR_SCORER_ENDPOINT")
        .output()
        .expect("run nlicur")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}
