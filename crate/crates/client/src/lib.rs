//! Async client for the adaptive menu service.

use adaptmenu_core::adaptation::{MenuView, ViewMode};
use adaptmenu_core::engine::{
    ClockRequest, ErrorBody, ExpandRequest, MenusResponse, MutationResponse, OpenRequest, PanelRequest, PinKind,
    PinRequest, ScoresResponse, SelectRequest, SessionSummary,
};
use adaptmenu_core::model::{MenuId, NodeId, PanelState};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport: {0}")]
    Transport(#[from] reqwest::Error),
    /// The service answered with an error body.
    #[error("{status} {}{}", body.error, body.detail.as_deref().map(|d| format!(": {d}")).unwrap_or_default())]
    Api { status: u16, body: ErrorBody },
    #[error("unexpected reply ({status}): {text}")]
    Malformed { status: u16, text: String },
}

impl ClientError {
    /// The service's error kind, if it sent one.
    pub fn kind(&self) -> Option<&str> {
        match self {
            ClientError::Api { body, .. } => Some(&body.error),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the service root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Client {
        Client {
            base: base.into().trim_end_matches('/').to_owned(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    async fn decode<T: DeserializeOwned>(resp: reqwest::Response) -> Result<T, ClientError> {
        let status = resp.status();
        let text = resp.text().await?;
        if status.is_success() {
            return serde_json::from_str(&text).map_err(|_| ClientError::Malformed {
                status: status.as_u16(),
                text,
            });
        }
        match serde_json::from_str::<ErrorBody>(&text) {
            Ok(body) => Err(ClientError::Api {
                status: status.as_u16(),
                body,
            }),
            Err(_) => Err(ClientError::Malformed {
                status: status.as_u16(),
                text,
            }),
        }
    }

    async fn get<T: DeserializeOwned>(&self, path: &str, query: &[(&str, &str)]) -> Result<T, ClientError> {
        let resp = self.http.get(format!("{}{path}", self.base)).query(query).send().await?;
        Self::decode(resp).await
    }

    async fn post<B: Serialize>(&self, path: &str, body: &B) -> Result<MutationResponse, ClientError> {
        let resp = self.http.post(format!("{}{path}", self.base)).json(body).send().await?;
        Self::decode(resp).await
    }

    pub async fn menus(&self) -> Result<MenusResponse, ClientError> {
        self.get("/api/menus", &[]).await
    }

    /// The menu in `mode`, or in its current mode when `None`.
    pub async fn view(&self, menu: &str, mode: Option<ViewMode>) -> Result<MenuView, ClientError> {
        match mode {
            Some(m) => self.get("/api/view", &[("menu", menu), ("mode", m.as_str())]).await,
            None => self.get("/api/view", &[("menu", menu)]).await,
        }
    }

    pub async fn scores(&self, menu: &str) -> Result<ScoresResponse, ClientError> {
        self.get("/api/scores", &[("menu", menu)]).await
    }

    pub async fn session(&self) -> Result<SessionSummary, ClientError> {
        self.get("/api/session", &[]).await
    }

    pub async fn select(&self, menu: &str, node: &str) -> Result<MutationResponse, ClientError> {
        let body = SelectRequest {
            menu: MenuId::from(menu),
            node: NodeId::from(node),
        };
        self.post("/api/select", &body).await
    }

    pub async fn expand(&self, menu: &str, mode: ViewMode) -> Result<MutationResponse, ClientError> {
        let body = ExpandRequest {
            menu: MenuId::from(menu),
            mode,
        };
        self.post("/api/expand", &body).await
    }

    pub async fn pin_menu(&self, menu: &str, on: bool) -> Result<MutationResponse, ClientError> {
        let body = PinRequest {
            kind: PinKind::Menu,
            menu: MenuId::from(menu),
            node: None,
            on,
        };
        self.post("/api/pin", &body).await
    }

    pub async fn pin_item(&self, menu: &str, node: &str, on: bool) -> Result<MutationResponse, ClientError> {
        let body = PinRequest {
            kind: PinKind::Item,
            menu: MenuId::from(menu),
            node: Some(NodeId::from(node)),
            on,
        };
        self.post("/api/pin", &body).await
    }

    pub async fn panel(&self, menu: &str, panel: &str, state: PanelState) -> Result<MutationResponse, ClientError> {
        let body = PanelRequest {
            menu: MenuId::from(menu),
            panel: NodeId::from(panel),
            state,
        };
        self.post("/api/panel", &body).await
    }

    pub async fn clock(&self, at: i64) -> Result<MutationResponse, ClientError> {
        self.post("/api/clock", &ClockRequest { at }).await
    }

    pub async fn open(&self, menu: &str) -> Result<MutationResponse, ClientError> {
        self.post("/api/open", &OpenRequest { menu: MenuId::from(menu) }).await
    }

    pub async fn close(&self, menu: &str) -> Result<MutationResponse, ClientError> {
        self.post("/api/close", &OpenRequest { menu: MenuId::from(menu) }).await
    }
}
