//! Toy evaluation worker speaking the JSON-lines protocol.
//!
//! Scores are a fixed function of the request:
//!
//! ```text
//! h              = fnv1a64(code text) / 2^64 · 2π
//! mae            = 25 + 3·sin(h)
//! inference_time = 2 + 0.9·(number of st_block nodes in the graph)
//! ```
//!
//! `--mode` makes the worker misbehave for protocol tests: `wrong-id`,
//! `silent`, `garbage`, `no-hello`, `exit-after=N`, `error`.

use std::io::{self, BufRead, Write};

use serde_json::{json, Value};

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn toy_mae(code: &str) -> f64 {
    let h = fnv1a64(code.as_bytes()) as f64 / 2f64.powi(64) * std::f64::consts::TAU;
    25.0 + 3.0 * h.sin()
}

fn block_count(graph: &Value) -> usize {
    graph["nodes"]
        .as_array()
        .map(|nodes| nodes.iter().filter(|n| n["kind"] == "st_block").count())
        .unwrap_or(0)
}

fn main() {
    let mode = std::env::args()
        .skip(1)
        .find_map(|a| a.strip_prefix("--mode=").map(str::to_owned))
        .unwrap_or_default();
    let exit_after: Option<usize> = mode.strip_prefix("exit-after=").and_then(|n| n.parse().ok());
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut emit = |v: Value| {
        let _ = writeln!(out, "{v}");
        let _ = out.flush();
    };
    if mode != "no-hello" {
        emit(json!({"type": "hello", "protocol_version": 1, "name": "toy"}));
    }
    let mut served = 0usize;
    for line in io::stdin().lock().lines() {
        let Ok(line) = line else { break };
        let req: Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                emit(json!({"type": "error", "id": -1, "message": e.to_string()}));
                continue;
            }
        };
        match req["type"].as_str() {
            Some("shutdown") => break,
            Some("evaluate") => {}
            _ => {
                emit(json!({"type": "error", "id": req["id"].as_i64().unwrap_or(-1), "message": "unknown request"}));
                continue;
            }
        }
        if exit_after == Some(served) {
            std::process::exit(1);
        }
        served += 1;
        let id = req["id"].as_i64().unwrap_or(-1);
        let Some(code) = req["code"].as_str() else {
            emit(json!({"type": "error", "id": id, "message": "missing code"}));
            continue;
        };
        match mode.as_str() {
            "silent" => continue,
            "garbage" => {
                emit(json!("not a record"));
                continue;
            }
            "error" => {
                emit(json!({"type": "error", "id": id, "message": "refused"}));
                continue;
            }
            _ => {}
        }
        let reply_id = if mode == "wrong-id" { id + 1 } else { id };
        let time = 2.0 + 0.9 * block_count(&req["graph"]) as f64;
        emit(json!({"type": "result", "id": reply_id, "mae": toy_mae(code), "inference_time": time}));
    }
}
