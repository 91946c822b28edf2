//! Scores documents through the HTTP provider. A tiny in-process server
//! stands in for a model endpoint; it fails the first request with 503 to
//! show the retry path.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;
use std::time::Duration;

use serde_json::{json, Value};
use spectra::providers::{HttpTransport, RemoteProvider, RetryPolicy, StatsProvider, SyntheticLm};
use spectra::records::{TokenizedDocument, Variant};
use spectra::scores::score_min_kpp;

fn read_request(stream: &mut TcpStream) -> std::io::Result<Value> {
    let mut reader = BufReader::new(stream);
    let mut len = 0;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line)?;
        if line == "\r\n" || line.is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                len = v.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body)?;
    Ok(serde_json::from_slice(&body).unwrap_or(Value::Null))
}

fn respond(stream: &mut TcpStream, status: &str, body: &Value) -> std::io::Result<()> {
    let body = body.to_string();
    write!(
        stream,
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
}

fn serve(listener: TcpListener, lm: Arc<SyntheticLm>) {
    for (n, stream) in listener.incoming().enumerate() {
        let Ok(mut stream) = stream else { continue };
        let Ok(req) = read_request(&mut stream) else { continue };
        if n == 0 {
            let _ = respond(&mut stream, "503 Service Unavailable", &json!({"error": "warming up"}));
            continue;
        }
        let tokens: Vec<u32> = serde_json::from_value(req["token_ids"].clone()).unwrap_or_default();
        let stats: Vec<[f64; 3]> = lm
            .synth_stats(&tokens)
            .map(|s| s.iter().map(|t| [t.gold_logprob, t.dist_mean, t.dist_std]).collect())
            .unwrap_or_default();
        let body = json!({"id": req["id"], "model_id": req["model_id"], "stats": stats});
        let _ = respond(&mut stream, "200 OK", &body);
    }
}

fn main() -> spectra::Result<()> {
    let lm = Arc::new(SyntheticLm::new(1, 20, 0.5)?.trained(&[[1u32, 2, 3, 4, 5, 1, 2, 3]], 3)?);
    let listener = TcpListener::bind("127.0.0.1:0").map_err(|e| spectra::Error::Argument(e.to_string()))?;
    let url = format!("http://{}/score", listener.local_addr().unwrap());
    std::thread::spawn(move || serve(listener, lm));

    let policy = RetryPolicy {
        base_delay: Duration::from_millis(20),
        ..RetryPolicy::default()
    };
    let transport = HttpTransport::new(Duration::from_secs(5), None);
    let provider = RemoteProvider::new(url, "toy-lm", 20, Box::new(transport), policy)?;

    for (i, tokens) in [vec![1, 2, 3, 4, 5], vec![7, 7, 9, 0, 4]].into_iter().enumerate() {
        let doc = TokenizedDocument {
            doc_id: format!("doc-{i}"),
            variant: Variant::Original,
            word_count: tokens.len() as u32,
            text: None,
            token_ids: tokens,
        };
        let record = provider.record(&doc)?;
        println!("{}: Min-K%++ (k = 20) = {:.4}", doc.doc_id, score_min_kpp(&record, 20.0)?);
    }
    println!("retries needed: {}", provider.retries_total());
    Ok(())
}
