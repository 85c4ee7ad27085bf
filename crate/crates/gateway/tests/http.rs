use std::net::SocketAddr;
use std::time::Duration;

use futures::StreamExt;
use ito_gateway::config::{DurabilityMode, GatewayConfig};
use reqwest::{Client, StatusCode};
use serde_json::{json, Value};

struct Gateway {
    base: String,
    client: Client,
    _dir: tempfile::TempDir,
}

/// Starts `serve` on an ephemeral port with a fresh ledger.
async fn start() -> Gateway {
    let dir = tempfile::tempdir().unwrap();
    let cfg = GatewayConfig {
        ledger: dir.path().join("http.ledger"),
        listen: "127.0.0.1:0".into(),
        durability: DurabilityMode::Flush,
        ..GatewayConfig::default()
    };
    let (tx, rx) = tokio::sync::oneshot::channel::<SocketAddr>();
    tokio::spawn(async move {
        ito_gateway::serve(cfg, move |addr| {
            let _ = tx.send(addr);
        })
        .await
        .unwrap();
    });
    let addr = rx.await.unwrap();
    Gateway { base: format!("http://{addr}"), client: Client::new(), _dir: dir }
}

impl Gateway {
    async fn get(&self, path: &str) -> (StatusCode, Value) {
        let r = self.client.get(format!("{}{path}", self.base)).send().await.unwrap();
        let status = r.status();
        (status, r.json().await.unwrap())
    }

    async fn post(&self, path: &str, body: Value) -> (StatusCode, Value) {
        self.post_keyed(path, body, None).await
    }

    async fn post_keyed(&self, path: &str, body: Value, key: Option<&str>) -> (StatusCode, Value) {
        let mut req = self.client.post(format!("{}{path}", self.base)).json(&body);
        if let Some(k) = key {
            req = req.header("Idempotency-Key", k);
        }
        let r = req.send().await.unwrap();
        let status = r.status();
        (status, r.json().await.unwrap())
    }

    /// USD quote currency and sponsored token T at 10, reserve rate 0.4,
    /// so the low-reserve trigger is live from the first round.
    async fn seed(&self) {
        let ok = |(s, v): (StatusCode, Value)| assert_eq!(s, StatusCode::OK, "{v}");
        ok(self.post("/tokens", json!({"kind": "quote", "token": "USD", "treasury": "treasury", "supply": "1000000"})).await);
        for (to, amount) in [("sp", "5000"), ("alice", "1000"), ("bob", "1000")] {
            ok(self.post("/transfers", json!({"from": "treasury", "to": to, "token": "USD", "amount": amount})).await);
        }
        ok(self
            .post(
                "/tokens",
                json!({
                    "kind": "sponsored",
                    "definition": {
                        "id": "T",
                        "inflation_rate": "0.01",
                        "inflation_recipient": "sponsor",
                        "redistribution": null,
                        "spending_domains": "universal",
                        "vesting_class": null
                    },
                    "sponsor": "sp",
                    "supply": "1000",
                    "issue_price": "10",
                    "collateral": "4000"
                }),
            )
            .await);
        ok(self.post("/transfers", json!({"from": "sp", "to": "bob", "token": "T", "amount": "50"})).await);
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn fresh_gateway_is_empty() {
    let g = start().await;
    let (s, tokens) = g.get("/tokens").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(tokens, json!([]));
    let (_, health) = g.get("/health").await;
    assert_eq!(health["status"], "ok");
    assert_eq!(health["entries"], 0);
    let (_, page) = g.get("/ledger").await;
    assert_eq!(page["entries"], json!([]));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn order_appears_in_the_round_with_its_arrival() {
    let g = start().await;
    g.seed().await;
    let (s, body) = g
        .post("/orders", json!({"account": "alice", "token": "T", "side": "buy", "quantity": "3", "limit_price": "10.5"}))
        .await;
    assert_eq!(s, StatusCode::OK, "{body}");
    assert_eq!(body["outcome"]["outcome"], "order_accepted");
    let (s, round) = g.get("/rounds/current?token=T").await;
    assert_eq!(s, StatusCode::OK);
    let orders = round["orders"].as_array().unwrap();
    assert_eq!(orders.len(), 1);
    assert_eq!(orders[0]["account"], "alice");
    assert_eq!(orders[0]["arrival"], 0);
    assert_eq!(round["reference"], "10.0000");
    assert_eq!(round["band"], json!(["9.0000", "11.0000"]));

    let (_, all) = g.get("/rounds/current").await;
    assert_eq!(all.as_array().unwrap().len(), 1);

    let (s, cleared) = g.post("/rounds/clear", json!({"token": "T"})).await;
    assert_eq!(s, StatusCode::OK, "{cleared}");
    // Nothing crossed; the sponsor fills alice at the reference.
    assert_eq!(cleared["outcome"]["sponsor_fills"][0]["account"], "alice");
    let (_, bal) = g.get("/balances?account=alice&token=T").await;
    assert_eq!(bal[0]["amount"], "3.000000");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn idempotency_key_applies_once() {
    let g = start().await;
    g.seed().await;
    let body = json!({"from": "alice", "to": "bob", "token": "USD", "amount": "7"});
    let (s, first) = g.post_keyed("/transfers", body.clone(), Some("pay-1")).await;
    assert_eq!(s, StatusCode::OK, "{first}");
    let (_, before) = g.get("/health").await;
    let (s, second) = g.post_keyed("/transfers", body, Some("pay-1")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(second["outcome"]["outcome"], "duplicate");
    let (_, after) = g.get("/health").await;
    assert_eq!(before["entries"], after["entries"]);
    let (_, bal) = g.get("/balances?account=bob&token=USD").await;
    assert_eq!(bal[0]["amount"], "1007.000000");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn commanding_price_links_to_the_next_round_and_band_is_enforced() {
    let g = start().await;
    g.seed().await;
    let (s, err) = g.post("/sponsor/commanding-price", json!({"token": "T", "price": "30"})).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["error"], "OutOfBand");
    assert!(err["message"].as_str().unwrap().contains("[9.0000, 11.0000]"), "{err}");

    let (s, ok) = g.post("/sponsor/commanding-price", json!({"token": "T", "price": "10.8"})).await;
    assert_eq!(s, StatusCode::OK, "{ok}");
    let (s, again) = g.post("/sponsor/commanding-price", json!({"token": "T", "price": "10.1"})).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(again["error"], "AlreadyCommandedThisRound");
    g.post("/rounds/clear", json!({"token": "T"})).await;
    let (_, round) = g.get("/rounds/current?token=T").await;
    assert_eq!(round["reference"], "10.8000");
    assert_eq!(round["round"], 1);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn errors_are_structured() {
    let g = start().await;
    let r = g.client.post(format!("{}/orders", g.base)).body("{not json").send().await.unwrap();
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);
    let v: Value = r.json().await.unwrap();
    assert_eq!(v["error"], "BadRequest");

    let (s, v) = g.post("/transfers", json!({"from": "a", "to": "b", "token": "USD", "amount": "1"})).await;
    assert_eq!(s, StatusCode::NOT_FOUND, "{v}");
    let (s, v) = g.get("/rounds/current?token=NOPE").await;
    assert_eq!(s, StatusCode::NOT_FOUND, "{v}");
    let (s, _) = g.get("/reserve/NOPE").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn stream_replays_then_follows_commits() {
    let g = start().await;
    g.seed().await;
    let (_, health) = g.get("/health").await;
    let committed = health["entries"].as_u64().unwrap();

    let resp = g.client.get(format!("{}/stream?from=2", g.base)).send().await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let mut body = resp.bytes_stream();
    let mut text = String::new();
    let mut ids = Vec::new();
    let mut sent = false;
    let deadline = tokio::time::Instant::now() + Duration::from_secs(10);
    while ids.last() != Some(&committed) {
        let chunk = tokio::time::timeout_at(deadline, body.next()).await.expect("stream stalled").unwrap().unwrap();
        text.push_str(std::str::from_utf8(&chunk).unwrap());
        while let Some(end) = text.find("\n\n") {
            let frame: String = text.drain(..end + 2).collect();
            if let Some(id) = frame.lines().find_map(|l| l.strip_prefix("id: ")) {
                assert!(frame.lines().any(|l| l == "event: entry"));
                ids.push(id.parse::<u64>().unwrap());
            }
        }
        if !sent && ids.last() == Some(&(committed - 1)) {
            g.post("/transfers", json!({"from": "alice", "to": "bob", "token": "USD", "amount": "1"})).await;
            sent = true;
        }
    }
    assert_eq!(ids, (2..=committed).collect::<Vec<_>>());
}
