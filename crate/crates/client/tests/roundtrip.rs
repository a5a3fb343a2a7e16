use adaptmenu_client::{Client, ClientError};
use adaptmenu_core::adaptation::ViewMode;
use adaptmenu_core::heuristics::HeuristicConfig;
use adaptmenu_core::model::PanelState;
use adaptmenu_server::{serve, Service, ServiceFiles};
use tempfile::TempDir;
use tokio::net::TcpListener;
use tokio::sync::oneshot;

const DEF: &str = "\
menu edit \"Edit\"
  item undo \"Undo\" action=undo tier=core
  item cut \"Cut\" action=cut
  item copy \"Copy\" action=copy
  panel find \"Find\"
    item replace \"Replace\" action=replace
  end
  submenu more \"More\" -> extra
end

menu extra \"Extra\"
  item x \"X\" action=x
end
";

struct Running {
    client: Client,
    stop: Option<oneshot::Sender<()>>,
    _dir: TempDir,
}

impl Drop for Running {
    fn drop(&mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
    }
}

async fn start() -> Running {
    let dir = TempDir::new().unwrap();
    let files = ServiceFiles {
        definition: dir.path().join("m.def"),
        log: dir.path().join("m.log"),
        state: dir.path().join("m.state"),
    };
    std::fs::write(&files.definition, DEF).unwrap();
    let service = Service::open(&files, HeuristicConfig::default(), Some(10_000)).unwrap();
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let (tx, rx) = oneshot::channel();
    tokio::spawn(serve(listener, service, async {
        let _ = rx.await;
    }));
    Running {
        client: Client::new(format!("http://{addr}/")),
        stop: Some(tx),
        _dir: dir,
    }
}

#[tokio::test]
async fn every_endpoint_round_trips() {
    let run = start().await;
    let c = &run.client;
    assert_eq!(c.menus().await.unwrap().menus.len(), 2);

    let reply = c.select("edit", "copy").await.unwrap();
    assert_eq!(reply.logged, ["10000 web select edit/copy"]);
    assert_eq!(reply.clock, 10_000);

    let reply = c.expand("edit", ViewMode::Long).await.unwrap();
    assert_eq!(reply.session.modes[&"edit".into()], ViewMode::Long);
    assert_eq!(c.view("edit", None).await.unwrap().mode, ViewMode::Long);
    assert_eq!(c.view("edit", Some(ViewMode::Short)).await.unwrap().mode, ViewMode::Short);

    c.panel("edit", "find", PanelState::Expanded).await.unwrap();
    c.pin_item("edit", "cut", true).await.unwrap();
    c.clock(10_060).await.unwrap();
    let reply = c.select("edit", "more").await.unwrap();
    assert_eq!(reply.view.unwrap().menu.as_str(), "extra");
    c.pin_menu("extra", true).await.unwrap();
    c.close("extra").await.unwrap();
    c.open("extra").await.unwrap();

    let s = c.session().await.unwrap();
    assert_eq!(s.clock, 10_060);
    assert_eq!(s.pinned_items, ["edit/cut"]);
    assert_eq!(s.pinned_menus, ["extra".into()]);

    let scores = c.scores("edit").await.unwrap();
    let row = |n: &str| scores.rows.iter().find(|r| r.node.as_str() == n).unwrap().clone();
    // One selection each; the older one has decayed a little.
    assert_eq!((row("more").rank, row("copy").rank), (1, 2));
    assert_eq!(row("more").f_hat, 1.0);
    assert!(row("copy").f_hat < 1.0 && row("copy").f_hat > 0.999);
}

#[tokio::test]
async fn service_errors_carry_their_kind() {
    let run = start().await;
    let c = &run.client;
    let err = c.view("nope", None).await.unwrap_err();
    assert_eq!(err.kind(), Some("unknown-menu"));
    assert!(matches!(err, ClientError::Api { status: 404, .. }));
    c.select("edit", "cut").await.unwrap();
    assert_eq!(c.clock(5).await.unwrap_err().kind(), Some("clock-regression"));
    assert_eq!(c.pin_menu("extra", true).await.unwrap_err().kind(), Some("menu-not-open"));
    assert!(c.select("edit", "find").await.unwrap_err().to_string().starts_with("400 not-selectable"));
}

#[tokio::test]
async fn unreachable_service_is_a_transport_error() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let err = Client::new(format!("http://{addr}")).menus().await.unwrap_err();
    assert!(matches!(err, ClientError::Transport(_)));
}
