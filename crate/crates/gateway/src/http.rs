//! HTTP interface: JSON bodies, JSON errors `{"error": code, "message": ...}`,
//! and a server-sent event stream of committed ledger entries.
//!
//! Mutations accept an optional `Idempotency-Key` header. A repeated key is
//! answered with outcome `duplicate` and changes nothing.

use std::collections::BTreeMap;
use std::convert::Infallible;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use ito_core::auction::{candidate_schedule, Order, ScheduleRow, Side};
use ito_core::incentives::{PerformanceEvent, VestingSchedule};
use ito_core::ledger::state::TokenRecord;
use ito_core::ledger::LedgerError;
use ito_core::policy::TokenDefinition;
use ito_core::sponsor::{CommandTrigger, CommandingPricePolicy, ReservePosition, RoundState};
use ito_core::{
    AccountId, Amount, Command, Digest, ExchangeError, Fraction, LedgerEntry, OrderId, Outcome, Price, TokenId,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast::error::RecvError;

use crate::service::{Service, ServiceError, Snapshot};

const LEDGER_PAGE_DEFAULT: usize = 1_000;
const LEDGER_PAGE_MAX: usize = 10_000;

#[derive(Clone)]
pub struct AppState {
    pub service: Service,
    /// Policy applied to sponsored issues that do not carry one.
    pub default_policy: CommandingPricePolicy,
}

pub fn router(service: Service, default_policy: CommandingPricePolicy) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/tokens", get(list_tokens).post(issue))
        .route("/orders", post(submit_order))
        .route("/rounds/current", get(current_round))
        .route("/rounds/clear", post(clear))
        .route("/sponsor/commanding-price", post(commanding_price))
        .route("/incentives/performance", post(performance))
        .route("/policy/tick", post(policy_tick))
        .route("/growth-pool", post(growth_pool))
        .route("/transfers", post(transfer))
        .route("/commands", post(raw_command))
        .route("/ledger", get(ledger))
        .route("/reserve/{token}", get(reserve))
        .route("/balances", get(balances))
        .route("/stream", get(event_stream))
        .with_state(Arc::new(AppState { service, default_policy }))
}

// ---- errors ----

#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    status: StatusCode,
    error: String,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError { status: StatusCode::BAD_REQUEST, error: "BadRequest".into(), message: message.into() }
    }

    fn not_found(code: &str, message: impl Into<String>) -> Self {
        ApiError { status: StatusCode::NOT_FOUND, error: code.into(), message: message.into() }
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Stopped => {
                ApiError { status: StatusCode::SERVICE_UNAVAILABLE, error: "ServiceStopped".into(), message: e.to_string() }
            }
            ServiceError::Rejected(e) => {
                let status = match &e {
                    ExchangeError::UnknownToken(_) | ExchangeError::NotSponsored(_) => StatusCode::NOT_FOUND,
                    ExchangeError::NoQuote => StatusCode::CONFLICT,
                    ExchangeError::Ledger(LedgerError::StorageFailed(_) | LedgerError::Corrupt { .. }) => {
                        StatusCode::INTERNAL_SERVER_ERROR
                    }
                    _ => StatusCode::UNPROCESSABLE_ENTITY,
                };
                ApiError { status, error: e.code(), message: e.to_string() }
            }
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let text: &[u8] = if body.iter().all(u8::is_ascii_whitespace) { b"{}" } else { body };
    serde_json::from_slice(text).map_err(|e| ApiError::bad_request(e.to_string()))
}

fn idempotency_key(headers: &HeaderMap) -> Result<Option<String>, ApiError> {
    match headers.get("idempotency-key") {
        None => Ok(None),
        Some(v) => {
            let s = v.to_str().map_err(|_| ApiError::bad_request("Idempotency-Key must be visible ASCII"))?;
            if s.is_empty() {
                return Err(ApiError::bad_request("Idempotency-Key must not be empty"));
            }
            Ok(Some(s.to_string()))
        }
    }
}

// ---- mutations ----

#[derive(Debug, Serialize)]
pub struct CommandResponse {
    pub outcome: Outcome,
    pub entries: Vec<LedgerEntry>,
}

async fn run(app: &AppState, headers: &HeaderMap, command: Command) -> Result<Json<CommandResponse>, ApiError> {
    let key = idempotency_key(headers)?;
    let receipt = app.service.submit(key, command).await?;
    Ok(Json(CommandResponse { outcome: receipt.outcome, entries: receipt.entries }))
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum IssueRequest {
    Quote {
        token: TokenId,
        treasury: AccountId,
        supply: Amount,
    },
    Sponsored {
        definition: TokenDefinition,
        sponsor: AccountId,
        supply: Amount,
        issue_price: Price,
        collateral: Amount,
        #[serde(default)]
        policy: Option<CommandingPricePolicy>,
    },
    Incentive {
        definition: TokenDefinition,
        sponsor: AccountId,
        schedule: VestingSchedule,
    },
}

async fn issue(State(app): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> Result<Json<CommandResponse>, ApiError> {
    let command = match parse::<IssueRequest>(&body)? {
        IssueRequest::Quote { token, treasury, supply } => Command::IssueQuote { token, treasury, supply },
        IssueRequest::Sponsored { definition, sponsor, supply, issue_price, collateral, policy } => Command::IssueToken {
            definition,
            sponsor,
            supply,
            issue_price,
            collateral,
            policy: policy.unwrap_or(app.default_policy),
        },
        IssueRequest::Incentive { definition, sponsor, schedule } => {
            Command::IssueIncentive { definition, sponsor, schedule }
        }
    };
    run(&app, &headers, command).await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OrderRequest {
    #[serde(default)]
    order_id: Option<OrderId>,
    account: AccountId,
    token: TokenId,
    side: Side,
    quantity: Amount,
    limit_price: Price,
}

async fn submit_order(State(app): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> Result<Json<CommandResponse>, ApiError> {
    let o: OrderRequest = parse(&body)?;
    let command = Command::SubmitOrder {
        order_id: o.order_id,
        account: o.account,
        token: o.token,
        side: o.side,
        quantity: o.quantity,
        limit_price: o.limit_price,
    };
    run(&app, &headers, command).await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TokenRequest {
    token: TokenId,
}

async fn clear(State(app): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> Result<Json<CommandResponse>, ApiError> {
    let r: TokenRequest = parse(&body)?;
    run(&app, &headers, Command::TriggerClear { token: r.token }).await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PriceRequest {
    token: TokenId,
    price: Price,
}

async fn commanding_price(State(app): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> Result<Json<CommandResponse>, ApiError> {
    let r: PriceRequest = parse(&body)?;
    run(&app, &headers, Command::SetCommandingPrice { token: r.token, price: r.price }).await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PerformanceRequest {
    grantee: AccountId,
    event: PerformanceEvent,
}

async fn performance(State(app): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> Result<Json<CommandResponse>, ApiError> {
    let r: PerformanceRequest = parse(&body)?;
    run(&app, &headers, Command::RecordPerformance { grantee: r.grantee, event: r.event }).await
}

async fn policy_tick(State(app): State<Arc<AppState>>, headers: HeaderMap) -> Result<Json<CommandResponse>, ApiError> {
    run(&app, &headers, Command::ApplyPolicyPeriod).await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GrowthRequest {
    token: TokenId,
    payer: AccountId,
    pool: Amount,
}

async fn growth_pool(State(app): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> Result<Json<CommandResponse>, ApiError> {
    let r: GrowthRequest = parse(&body)?;
    run(&app, &headers, Command::InjectGrowthPool { token: r.token, payer: r.payer, pool: r.pool }).await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransferRequest {
    from: AccountId,
    to: AccountId,
    token: TokenId,
    amount: Amount,
    #[serde(default)]
    category: Option<String>,
}

async fn transfer(State(app): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> Result<Json<CommandResponse>, ApiError> {
    let r: TransferRequest = parse(&body)?;
    run(&app, &headers, Command::Transfer { from: r.from, to: r.to, token: r.token, amount: r.amount, category: r.category })
        .await
}

/// Any command in its tagged form, e.g. `{"type": "apply_policy_period"}`.
async fn raw_command(State(app): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> Result<Json<CommandResponse>, ApiError> {
    let command: Command = parse(&body)?;
    run(&app, &headers, command).await
}

// ---- reads ----

#[derive(Debug, Serialize)]
struct Health {
    status: &'static str,
    entries: u64,
    head: Digest,
}

async fn health(State(app): State<Arc<AppState>>) -> Json<Health> {
    let s = app.service.snapshot();
    Json(Health { status: "ok", entries: s.len, head: s.head })
}

#[derive(Debug, Serialize)]
struct TokenView {
    id: TokenId,
    #[serde(flatten)]
    record: TokenRecord,
    reserve_rate: Option<Fraction>,
    reference: Option<Price>,
    round: Option<u64>,
}

async fn list_tokens(State(app): State<Arc<AppState>>) -> Json<Vec<TokenView>> {
    let snap = app.service.snapshot();
    let state = &snap.state;
    let views = state
        .tokens()
        .map(|t| {
            let market = state.market(t.id());
            TokenView {
                id: t.id().clone(),
                record: t.clone(),
                reserve_rate: state.reserve_position(t.id()).and_then(|p| p.reserve_rate().ok()),
                reference: market.map(|m| m.reference),
                round: market.map(|m| m.round),
            }
        })
        .collect();
    Json(views)
}

#[derive(Debug, Deserialize)]
struct RoundQuery {
    token: Option<TokenId>,
}

#[derive(Debug, Serialize)]
pub struct RoundView {
    pub token: TokenId,
    pub round: u64,
    pub reference: Price,
    pub commanded: Option<Price>,
    pub zero_volume_streak: u32,
    /// Open orders with their arrival sequence.
    pub orders: Vec<Order>,
    pub schedule: Vec<ScheduleRow>,
    /// Inclusive commanding-price band around the reference.
    pub band: Option<(Price, Price)>,
    /// Trigger under which a commanding price would be accepted now.
    pub trigger: Option<CommandTrigger>,
}

fn round_view(snap: &Snapshot, token: &TokenId) -> Option<RoundView> {
    let state = &snap.state;
    let market = state.market(token)?;
    let policy = state.token(token).and_then(|t| t.policy().copied());
    let round_state = state.round_state(token);
    let trigger = match (policy, round_state) {
        (Some(p), Some(rs)) if !rs.commanded_this_round => p.active_trigger(&rs),
        _ => None,
    };
    Some(RoundView {
        token: token.clone(),
        round: market.round,
        reference: market.reference,
        commanded: market.commanded,
        zero_volume_streak: market.zero_volume_streak,
        orders: market.open_orders.clone(),
        schedule: candidate_schedule(&market.open_orders, market.reference).unwrap_or_default(),
        band: policy.map(|p| p.band_edges(market.reference)),
        trigger,
    })
}

async fn current_round(State(app): State<Arc<AppState>>, Query(q): Query<RoundQuery>) -> Result<Response, ApiError> {
    let snap = app.service.snapshot();
    match q.token {
        Some(token) => round_view(&snap, &token)
            .map(|v| Json(v).into_response())
            .ok_or_else(|| ApiError::not_found("NotSponsored", format!("{token} has no auction market"))),
        None => {
            let ids: Vec<TokenId> = snap.state.tokens().map(|t| t.id().clone()).collect();
            let all: Vec<RoundView> = ids.iter().filter_map(|t| round_view(&snap, t)).collect();
            Ok(Json(all).into_response())
        }
    }
}

#[derive(Debug, Deserialize)]
struct LedgerQuery {
    #[serde(default)]
    from: u64,
    limit: Option<usize>,
}

#[derive(Debug, Serialize)]
struct LedgerPage {
    from: u64,
    entries: Vec<LedgerEntry>,
    len: u64,
    head: Digest,
}

async fn ledger(State(app): State<Arc<AppState>>, Query(q): Query<LedgerQuery>) -> Json<LedgerPage> {
    let snap = app.service.snapshot();
    let limit = q.limit.unwrap_or(LEDGER_PAGE_DEFAULT).min(LEDGER_PAGE_MAX);
    let mut entries = app.service.entries_from(q.from, limit);
    // Stay within the snapshot so len and head describe the same prefix.
    entries.retain(|e| e.sequence < snap.len);
    Json(LedgerPage { from: q.from, entries, len: snap.len, head: snap.head })
}

#[derive(Debug, Serialize)]
struct ReserveView {
    position: ReservePosition,
    reserve_rate: Option<Fraction>,
    policy: Option<CommandingPricePolicy>,
    round: Option<RoundState>,
}

async fn reserve(State(app): State<Arc<AppState>>, Path(token): Path<String>) -> Result<Json<ReserveView>, ApiError> {
    let snap = app.service.snapshot();
    let token = TokenId::new(token);
    let state = &snap.state;
    let position = state
        .reserve_position(&token)
        .ok_or_else(|| ApiError::not_found("NotSponsored", format!("{token} has no collateral reserve")))?;
    Ok(Json(ReserveView {
        reserve_rate: position.reserve_rate().ok(),
        policy: state.token(&token).and_then(|t| t.policy().copied()),
        round: state.round_state(&token),
        position,
    }))
}

#[derive(Debug, Deserialize)]
struct BalanceQuery {
    account: Option<AccountId>,
    token: Option<TokenId>,
}

#[derive(Debug, Serialize, PartialEq, Eq)]
pub struct BalanceRow {
    pub account: AccountId,
    pub token: TokenId,
    pub amount: Amount,
    pub available: Amount,
}

pub fn balance_rows(state: &ito_core::ledger::State, account: Option<&AccountId>, token: Option<&TokenId>) -> Vec<BalanceRow> {
    let mut rows: BTreeMap<(AccountId, TokenId), Amount> = BTreeMap::new();
    for (a, t, amount) in state.balances().iter() {
        if account.is_some_and(|x| x != a) || token.is_some_and(|x| x != t) {
            continue;
        }
        rows.insert((a.clone(), t.clone()), amount);
    }
    rows.into_iter()
        .map(|((account, token), amount)| BalanceRow {
            available: state.available(&account, &token),
            account,
            token,
            amount,
        })
        .collect()
}

async fn balances(State(app): State<Arc<AppState>>, Query(q): Query<BalanceQuery>) -> Json<Vec<BalanceRow>> {
    let snap = app.service.snapshot();
    Json(balance_rows(&snap.state, q.account.as_ref(), q.token.as_ref()))
}

#[derive(Debug, Deserialize)]
struct StreamQuery {
    from: Option<u64>,
}

/// Entries as they commit, as `event: entry` with the sequence as the
/// event id. `?from=n` (or `Last-Event-ID: n-1`) first replays committed
/// entries from `n`. A subscriber that falls too far behind is
/// disconnected and should reconnect with `from`.
async fn event_stream(
    State(app): State<Arc<AppState>>,
    headers: HeaderMap,
    Query(q): Query<StreamQuery>,
) -> Sse<impl Stream<Item = Result<SseEvent, Infallible>>> {
    let resume = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.parse::<u64>().ok())
        .map(|id| id + 1);
    let from = q.from.or(resume);
    // Subscribe before reading the backlog so nothing falls in between.
    let rx = app.service.subscribe();
    let backlog = match from {
        Some(f) => app.service.entries_from(f, usize::MAX),
        None => Vec::new(),
    };
    let next = backlog.last().map(|e| e.sequence + 1).or(from).unwrap_or(0);
    let live = stream::unfold((rx, next), |(mut rx, next)| async move {
        loop {
            match rx.recv().await {
                Ok(e) if e.sequence < next => continue,
                Ok(e) => {
                    let n = e.sequence + 1;
                    return Some((e, (rx, n)));
                }
                Err(RecvError::Lagged(_)) | Err(RecvError::Closed) => return None,
            }
        }
    });
    let events = stream::iter(backlog).chain(live).map(|e| {
        let data = serde_json::to_string(&e).expect("entries serialize");
        Ok(SseEvent::default().event("entry").id(e.sequence.to_string()).data(data))
    });
    Sse::new(events).keep_alive(KeepAlive::default())
}
