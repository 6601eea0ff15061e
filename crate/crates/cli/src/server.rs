//! Read-only JSON API over completed runs, plus optional static UI hosting.

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use lineup_core::diagnostics::{KsResult, MatchPitSummary, PitEntry};
use lineup_core::{
    Engine, LineupPosterior, MatchScenario, Metric, PredictiveSample, Roster, RosterEntry, RuleSet,
    SelectionConstraints,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::Mutex;
use tower_http::services::ServeDir;

use crate::error::CliError;
use crate::pipeline::{
    analyze, lineup_rows, pit_table, player_row, solve_predictive, LineupRow, PlayerRef, PlayerRow, QuerySpec,
};
use crate::run::{list_runs, load_run, numbered_entries};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<FieldError>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                error: message.into(),
                fields: Vec::new(),
            },
        }
    }

    fn fields(fields: Vec<FieldError>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            body: ErrorBody {
                error: "invalid request body".into(),
                fields,
            },
        }
    }
}

impl From<CliError> for ApiError {
    fn from(e: CliError) -> Self {
        use lineup_core::Error as E;
        let status = match &e {
            CliError::Usage(_) | CliError::Config { .. } => StatusCode::BAD_REQUEST,
            CliError::Core(E::UndefinedConditional(_) | E::Infeasible { .. }) => StatusCode::UNPROCESSABLE_ENTITY,
            CliError::Core(c) if c.is_input_error() => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl From<lineup_core::Error> for ApiError {
    fn from(e: lineup_core::Error) -> Self {
        CliError::from(e).into()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Per-metric predictive sample and its unconstrained line-up posterior.
struct MetricState {
    predictive: PredictiveSample,
    base: LineupPosterior,
}

/// A run loaded for serving; built once on first use.
struct RunState {
    dir: PathBuf,
    roster: Roster,
    rules: RuleSet,
    engine: Engine,
    metrics: Vec<Metric>,
    by_metric: HashMap<Metric, MetricState>,
    /// Constrained re-solves for one run are queued behind this lock.
    solve_lock: Mutex<()>,
}

impl RunState {
    fn build(dir: &Path) -> Result<Self, CliError> {
        let run = load_run(dir)?;
        let cfg = &run.meta.config;
        let rules = cfg.rules.to_rules()?;
        let engine = cfg.optimize.engine;
        let none = SelectionConstraints::default();
        let mut by_metric = HashMap::new();
        for (&metric, fitted) in &run.fitted {
            let a = analyze(&fitted.panel, &fitted.sample, cfg.scenario, &rules, &none, engine, cfg.optimize.seed)?;
            by_metric.insert(
                metric,
                MetricState {
                    predictive: a.predictive,
                    base: a.posterior,
                },
            );
        }
        Ok(RunState {
            dir: dir.to_path_buf(),
            roster: run.roster,
            rules,
            engine,
            metrics: run.meta.metrics,
            by_metric,
            solve_lock: Mutex::new(()),
        })
    }

    fn metric(&self, requested: Option<&str>) -> Result<(Metric, &MetricState), ApiError> {
        let metric = match requested {
            None => self.metrics[0],
            Some(s) => s
                .parse::<Metric>()
                .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("metric: {e}")))?,
        };
        self.by_metric
            .get(&metric)
            .map(|m| (metric, m))
            .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, format!("metric {metric} was not fitted in this run")))
    }
}

pub struct AppState {
    runs_dir: PathBuf,
    cache: Mutex<HashMap<String, Arc<RunState>>>,
}

impl AppState {
    pub fn new(runs_dir: impl Into<PathBuf>) -> Arc<Self> {
        Arc::new(AppState {
            runs_dir: runs_dir.into(),
            cache: Mutex::new(HashMap::new()),
        })
    }

    async fn run(&self, id: &str) -> Result<Arc<RunState>, ApiError> {
        // Only ids that list_runs reports are reachable, so no path escapes the runs directory.
        let dir = list_runs(&self.runs_dir)
            .into_iter()
            .find(|(name, _)| name == id)
            .map(|(_, p)| p)
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no run `{id}`")))?;
        let mut cache = self.cache.lock().await;
        if let Some(state) = cache.get(id) {
            return Ok(state.clone());
        }
        let state = tokio::task::spawn_blocking(move || RunState::build(&dir))
            .await
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
        let state = Arc::new(state);
        cache.insert(id.to_string(), state.clone());
        Ok(state)
    }
}

pub fn router(state: Arc<AppState>, ui_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/runs", get(runs))
        .route("/runs/{id}/lineups", get(lineups))
        .route("/runs/{id}/inclusion", get(inclusion))
        .route("/runs/{id}/pit", get(pit))
        .route("/runs/{id}/query", post(query))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(index)),
    }
}

pub async fn serve(runs_dir: PathBuf, host: &str, port: u16, ui_dir: Option<PathBuf>) -> Result<(), CliError> {
    if !runs_dir.is_dir() {
        return Err(CliError::Usage(format!("runs directory {} does not exist", runs_dir.display())));
    }
    let app = router(AppState::new(runs_dir), ui_dir.as_deref());
    let listener = tokio::net::TcpListener::bind((host, port))
        .await
        .map_err(|e| CliError::Runtime(format!("cannot bind {host}:{port}: {e}")))?;
    let addr = listener.local_addr().map_err(|e| CliError::Runtime(e.to_string()))?;
    eprintln!("serving on http://{addr}");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| CliError::Runtime(e.to_string()))
}

async fn index() -> Json<Value> {
    Json(serde_json::json!({
        "endpoints": [
            "GET /runs",
            "GET /runs/{id}/lineups?metric=&top=",
            "GET /runs/{id}/inclusion?metric=",
            "GET /runs/{id}/pit?metric=",
            "POST /runs/{id}/query",
        ]
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub id: String,
    pub metrics: Vec<Metric>,
    pub players: Vec<RosterEntry>,
    pub rules: RuleSet,
    pub scenario: MatchScenario,
    pub optimizations: usize,
}

async fn runs(State(app): State<Arc<AppState>>) -> ApiResult<Vec<RunSummary>> {
    let runs_dir = app.runs_dir.clone();
    let out = tokio::task::spawn_blocking(move || {
        list_runs(&runs_dir)
            .into_iter()
            .filter_map(|(id, dir)| {
                let meta: crate::run::RunMeta = crate::run::read_json(&dir.join(crate::run::META_FILE)).ok()?;
                let text = std::fs::read_to_string(dir.join("roster.csv")).ok()?;
                let roster = lineup_core::parse_roster(&text).ok()?;
                Some(RunSummary {
                    id,
                    metrics: meta.metrics,
                    players: roster.entries().to_vec(),
                    rules: meta.config.rules.to_rules().ok()?,
                    scenario: meta.config.scenario,
                    optimizations: numbered_entries(&dir.join("optimizations"), "").len(),
                })
            })
            .collect()
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(Json(out))
}

#[derive(Debug, Default, Deserialize)]
struct MetricParams {
    metric: Option<String>,
    top: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineupsResponse {
    pub run_id: String,
    pub metric: Metric,
    pub draws: usize,
    pub scenario: MatchScenario,
    pub lineups: Vec<LineupRow>,
}

async fn lineups(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<MetricParams>,
) -> ApiResult<LineupsResponse> {
    let run = app.run(&id).await?;
    let (metric, m) = run.metric(q.metric.as_deref())?;
    Ok(Json(LineupsResponse {
        run_id: id,
        metric,
        draws: m.base.draws(),
        scenario: m.base.scenario(),
        lineups: lineup_rows(&m.base, &run.roster, q.top),
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InclusionResponse {
    pub run_id: String,
    pub metric: Metric,
    pub draws: usize,
    pub players: Vec<PlayerRow>,
}

async fn inclusion(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<MetricParams>,
) -> ApiResult<InclusionResponse> {
    let run = app.run(&id).await?;
    let (metric, m) = run.metric(q.metric.as_deref())?;
    Ok(Json(InclusionResponse {
        run_id: id,
        metric,
        draws: m.base.draws(),
        players: m
            .base
            .inclusion_table()
            .into_iter()
            .map(|p| player_row(p.player, &run.roster, p.estimate))
            .collect(),
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PitResponse {
    pub run_id: String,
    pub metric: Metric,
    pub draws: usize,
    /// KS test of pooled unflagged values; absent when none remain.
    pub ks: Option<KsResult>,
    pub flagged: usize,
    pub entries: Vec<PitEntry>,
    pub matches: Vec<MatchPitSummary>,
}

async fn pit(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<MetricParams>,
) -> ApiResult<PitResponse> {
    let run = app.run(&id).await?;
    let (metric, m) = run.metric(q.metric.as_deref())?;
    let table = pit_table(&run.dir, metric, m.base.draws())?;
    Ok(Json(PitResponse {
        run_id: id,
        metric,
        draws: table.draws,
        ks: table.uniformity().ok(),
        flagged: table.flagged().count(),
        matches: table.match_summaries(),
        entries: table.entries,
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub run_id: String,
    pub metric: Metric,
    pub targets: Vec<usize>,
    pub given: Vec<usize>,
    pub banned: Vec<usize>,
    pub pinned: Vec<usize>,
    /// Whether the line-up posterior was re-solved under the constraints.
    pub resolved: bool,
    pub probability: f64,
    pub std_error: f64,
    pub count: usize,
    pub base: usize,
    pub draws: usize,
}

struct QueryBody {
    metric: Option<String>,
    targets: Vec<PlayerRef>,
    given: Vec<PlayerRef>,
    banned: Vec<PlayerRef>,
    pinned: Vec<PlayerRef>,
}

fn player_list(obj: &serde_json::Map<String, Value>, field: &str, errors: &mut Vec<FieldError>) -> Vec<PlayerRef> {
    let mut bad = |message: &str| {
        errors.push(FieldError {
            field: field.into(),
            message: message.into(),
        })
    };
    match obj.get(field) {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => {
            let mut out = Vec::new();
            for v in items {
                match v {
                    Value::Number(n) if n.as_u64().is_some_and(|i| i >= 1) => {
                        out.push(PlayerRef::Index(n.as_u64().unwrap() as usize))
                    }
                    Value::String(s) if !s.trim().is_empty() => out.push(PlayerRef::Name(s.trim().to_string())),
                    _ => {
                        bad("entries must be positive player indices or player names");
                        return Vec::new();
                    }
                }
            }
            out
        }
        Some(_) => {
            bad("must be an array");
            Vec::new()
        }
    }
}

fn parse_query_body(bytes: &[u8]) -> Result<QueryBody, ApiError> {
    let value: Value = serde_json::from_slice(bytes)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("body is not valid JSON: {e}")))?;
    let Value::Object(obj) = value else {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "body must be a JSON object"));
    };
    let mut errors = Vec::new();
    const KNOWN: [&str; 5] = ["targets", "given", "banned", "pinned", "metric"];
    for key in obj.keys().filter(|k| !KNOWN.contains(&k.as_str())) {
        errors.push(FieldError {
            field: key.clone(),
            message: "unknown field".into(),
        });
    }
    if !obj.contains_key("targets") {
        errors.push(FieldError {
            field: "targets".into(),
            message: "required".into(),
        });
    }
    let targets = player_list(&obj, "targets", &mut errors);
    if obj.contains_key("targets") && targets.is_empty() && !errors.iter().any(|e| e.field == "targets") {
        errors.push(FieldError {
            field: "targets".into(),
            message: "must name at least one player".into(),
        });
    }
    let given = player_list(&obj, "given", &mut errors);
    let banned = player_list(&obj, "banned", &mut errors);
    let pinned = player_list(&obj, "pinned", &mut errors);
    let metric = match obj.get("metric") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => {
            errors.push(FieldError {
                field: "metric".into(),
                message: "must be a string".into(),
            });
            None
        }
    };
    if !errors.is_empty() {
        return Err(ApiError::fields(errors));
    }
    Ok(QueryBody {
        metric,
        targets,
        given,
        banned,
        pinned,
    })
}

fn resolve_all(refs: &[PlayerRef], roster: &Roster, field: &str) -> Result<BTreeSet<usize>, ApiError> {
    refs.iter()
        .map(|r| r.resolve(roster))
        .collect::<Result<_, _>>()
        .map_err(|e| {
            ApiError::fields(vec![FieldError {
                field: field.into(),
                message: e.to_string(),
            }])
        })
}

async fn query(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult<QueryResponse> {
    let run = app.run(&id).await?;
    let body = parse_query_body(&body)?;
    let (metric, _) = run.metric(body.metric.as_deref())?;
    let spec = QuerySpec {
        targets: resolve_all(&body.targets, &run.roster, "targets")?,
        given: resolve_all(&body.given, &run.roster, "given")?,
    };
    let constraints = SelectionConstraints {
        banned: resolve_all(&body.banned, &run.roster, "banned")?,
        pinned: resolve_all(&body.pinned, &run.roster, "pinned")?,
    };
    constraints.validate(&run.roster, &run.rules).map_err(|e| {
        ApiError::fields(vec![FieldError {
            field: "pinned/banned".into(),
            message: e.to_string(),
        }])
    })?;

    let resolved = !constraints.is_empty();
    let estimate = if resolved {
        let _queued = run.solve_lock.lock().await;
        let state = run.clone();
        let c = constraints.clone();
        let s = spec.clone();
        tokio::task::spawn_blocking(move || -> Result<_, CliError> {
            let m = &state.by_metric[&metric];
            let post = solve_predictive(&m.predictive, &state.roster, &state.rules, &c, state.engine)?;
            Ok((post.conditional_probability(&s.targets, &s.given)?, post.draws()))
        })
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??
    } else {
        let m = &run.by_metric[&metric];
        (m.base.conditional_probability(&spec.targets, &spec.given)?, m.base.draws())
    };
    let (e, draws) = estimate;
    Ok(Json(QueryResponse {
        run_id: id,
        metric,
        targets: spec.targets.into_iter().collect(),
        given: spec.given.into_iter().collect(),
        banned: constraints.banned.into_iter().collect(),
        pinned: constraints.pinned.into_iter().collect(),
        resolved,
        probability: e.probability,
        std_error: e.std_error,
        count: e.count,
        base: e.base,
        draws,
    }))
}
