//! Deterministic stand-ins for chat endpoints.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::Mutex;
use std::thread;

use sha2::{Digest, Sha256};
use userdrift::population::Persona;
use userdrift::respondent::{CallKey, ChatModel, Message};
use userdrift::Result;

/// Picks an offered option by hashing the prompt, so any change in context
/// changes the answer.
fn pick_option(last: &str, h: &[u8]) -> Option<String> {
    let options: Vec<String> = if let Some((_, opts)) = last.rsplit_once("following options: ") {
        opts.split(", ").map(str::to_string).collect()
    } else if let Some((_, rest)) = last.split_once("\nOptions: ") {
        rest.lines().next().unwrap_or("").split(", ").map(str::to_string).collect()
    } else if let Some((_, opts)) = last.split_once("Answer with one of:\n") {
        opts.lines().filter_map(|l| l.split_once(": ").map(|(_, o)| o.to_string())).collect()
    } else {
        return None;
    };
    Some(options[h[0] as usize % options.len()].clone())
}

#[derive(Default)]
pub struct FakeChat {
    pub calls: Mutex<Vec<(CallKey, Vec<Message>)>>,
    pub off_option: bool,
}

impl ChatModel for FakeChat {
    fn complete(&self, messages: &[Message], call: &CallKey) -> Result<String> {
        self.calls.lock().unwrap().push((call.clone(), messages.to_vec()));
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_vec(messages).unwrap());
        hasher.update(call.key());
        let h = hasher.finalize();
        if call.label != "answer" {
            return Ok(format!("[it{}] {} says {}", call.seed.iteration, call.label, hex::encode(&h[..4])));
        }
        if self.off_option {
            return Ok("I would rather not say.".into());
        }
        let last = messages.last().map(|m| m.content.as_str()).unwrap_or("");
        Ok(pick_option(last, &h).unwrap_or_else(|| format!("Something about {}", hex::encode(&h[..2]))))
    }
}

pub fn personas(n: usize) -> Vec<Persona> {
    (0..n)
        .map(|i| {
            Persona::new(
                format!("u{i:03}"),
                [("age", (20 + i % 50).to_string()), ("sex", ["Male", "Female"][i % 2].to_string())],
            )
            .unwrap()
        })
        .collect()
}

/// OpenAI-style chat endpoint on localhost whose replies hash the request
/// body. Returns the base URL.
pub fn hashing_server() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        for stream in listener.incoming().flatten() {
            thread::spawn(move || {
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 {
                        return;
                    }
                    if line.trim_end().is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut body = vec![0; len];
                reader.read_exact(&mut body).unwrap();
                let req: serde_json::Value = serde_json::from_slice(&body).unwrap();
                let last = req["messages"].as_array().unwrap().last().unwrap()["content"].as_str().unwrap().to_string();
                let h = Sha256::digest(&body);
                let answer = pick_option(&last, &h).unwrap_or_else(|| format!("free text {}", hex::encode(&h[..3])));
                let text = serde_json::json!({"choices": [{"message": {"content": answer}}]}).to_string();
                let mut s = stream;
                let _ = write!(
                    s,
                    "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                    text.len()
                );
            });
        }
    });
    format!("http://{addr}/v1")
}
