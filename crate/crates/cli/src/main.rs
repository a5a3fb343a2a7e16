use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adaptmenu_client::Client;
use adaptmenu_core::adaptation::{Customization, ViewMode};
use adaptmenu_core::editor::{apply_script, parse_script, render_branches};
use adaptmenu_core::engine::Engine;
use adaptmenu_core::heuristics::HeuristicConfig;
use adaptmenu_core::model::{
    parse_definition, parse_unvalidated, serialize_definition, validate, DefinitionError, MenuDefinition, MenuId,
    NodePath, PanelState,
};
use adaptmenu_core::sim::{replay, synth, synth_definition, Policy, SynthParams, Trace};
use adaptmenu_core::usage::{StatsParams, UsageLog};
use adaptmenu_server::{serve, Service, ServiceFiles};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "adaptmenu", version, about = "Adaptive menus: validation, rendering, simulation and service")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Check a definition file and list every violation.
    Validate { file: PathBuf },
    /// Print one menu as seen at a given time.
    Render {
        file: PathBuf,
        #[arg(long)]
        menu: String,
        #[arg(long)]
        mode: ViewMode,
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        at: i64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        state: Option<PathBuf>,
    },
    /// Score table for every selectable node, as TSV.
    Scores {
        file: PathBuf,
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        at: i64,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write a synthetic Zipf-distributed selection trace.
    Synth {
        #[arg(long)]
        items: usize,
        #[arg(long)]
        zipf: f64,
        #[arg(long)]
        events: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        start: i64,
        #[arg(long)]
        step: i64,
        #[arg(long)]
        out: PathBuf,
        /// Also write a matching single-menu definition.
        #[arg(long)]
        def: Option<PathBuf>,
        /// List items in popularity order instead of a seeded shuffle.
        #[arg(long, requires = "def")]
        ordered: bool,
    },
    /// Replay a trace and report navigation costs.
    Replay {
        file: PathBuf,
        trace: PathBuf,
        #[arg(long)]
        policy: Policy,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
    },
    /// Apply an edit script, or show branches with `edit FILE show --path P`.
    Edit {
        file: PathBuf,
        /// Script file, or `show`.
        script: String,
        #[arg(long, conflicts_with = "out")]
        in_place: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "path")]
        paths: Vec<String>,
    },
    /// Run the HTTP service.
    Serve {
        file: PathBuf,
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Initial clock; defaults to the last logged event.
        #[arg(long)]
        at: Option<i64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Talk to a running service.
    Client {
        #[arg(long, default_value = "http://127.0.0.1:8080")]
        url: String,
        #[command(subcommand)]
        call: Call,
    },
}

#[derive(Debug, Subcommand)]
enum Call {
    Menus,
    View {
        menu: String,
        #[arg(long)]
        mode: Option<ViewMode>,
    },
    Scores {
        menu: String,
    },
    Session,
    Select {
        menu: String,
        node: String,
    },
    Expand {
        menu: String,
        #[arg(long, default_value = "long")]
        mode: ViewMode,
    },
    /// Pin a menu, or an item when NODE is given.
    Pin {
        menu: String,
        node: Option<String>,
        #[arg(long)]
        off: bool,
    },
    Panel {
        menu: String,
        panel: String,
        state: PanelState,
    },
    Clock {
        at: i64,
    },
    Open {
        menu: String,
    },
    Close {
        menu: String,
    },
}

/// A failure that maps to exit status 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_definition(path: &Path) -> Result<MenuDefinition> {
    let text = read(path)?;
    match parse_definition(&text) {
        Ok(def) => Ok(def),
        Err(DefinitionError::Invalid(violations)) => {
            let list: Vec<String> = violations.iter().map(ToString::to_string).collect();
            bail!("{}: invalid definition\n  {}", path.display(), list.join("\n  "))
        }
        Err(e) => Err(e).with_context(|| path.display().to_string()),
    }
}

fn load_config(path: Option<&Path>) -> Result<HeuristicConfig> {
    match path {
        Some(p) => HeuristicConfig::parse(&read(p)?).with_context(|| p.display().to_string()),
        None => Ok(HeuristicConfig::default()),
    }
}

fn load_log(path: &Path, config: &HeuristicConfig) -> Result<UsageLog> {
    UsageLog::parse(&read(path)?, StatsParams::from(config)).with_context(|| path.display().to_string())
}

fn offline_engine(
    file: &Path,
    log: &Path,
    at: i64,
    config: Option<&Path>,
    state: Option<&Path>,
) -> Result<Engine> {
    let def = load_definition(file)?;
    let config = load_config(config)?;
    let log = load_log(log, &config)?;
    let customization = match state {
        Some(p) => {
            let (c, warnings) = Customization::parse(&read(p)?, &def).with_context(|| p.display().to_string())?;
            for w in warnings {
                eprintln!("warning: {}: {w}", p.display());
            }
            c
        }
        None => Customization::default(),
    };
    Ok(Engine::new(def, config, log, customization, at)?)
}

fn validate_cmd(file: &Path) -> Result<ExitCode> {
    let text = read(file)?;
    let def = match parse_unvalidated(&text) {
        Ok(def) => def,
        Err(e) => {
            println!("{}: {e}", file.display());
            return Ok(ExitCode::FAILURE);
        }
    };
    let violations = validate(&def);
    if violations.is_empty() {
        println!("ok: {} menus, {} nodes", def.menus.len(), def.node_count());
        return Ok(ExitCode::SUCCESS);
    }
    for v in &violations {
        println!("{v}");
    }
    Ok(ExitCode::FAILURE)
}

fn scores_cmd(engine: &Engine) -> Result<String> {
    let mut out = String::from("node\tf_hat\tr\ttau\ts\trank\n");
    for m in &engine.definition().menus {
        for row in engine.scores(&m.id)?.rows {
            out.push_str(&format!(
                "{}/{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}\n",
                m.id, row.node, row.f_hat, row.r, row.tau, row.s, row.rank
            ));
        }
    }
    Ok(out)
}

fn edit_cmd(file: &Path, script: &str, in_place: bool, out: Option<&Path>, paths: &[String]) -> Result<ExitCode> {
    let def = load_definition(file)?;
    if script == "show" {
        if paths.is_empty() {
            return Err(Usage("`edit FILE show` needs at least one --path".into()).into());
        }
        let branches = paths
            .iter()
            .map(|p| p.parse::<NodePath>().map_err(|e| Usage(format!("--path {p}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        match render_branches(&def, &branches) {
            Ok(text) => {
                print!("{text}");
                return Ok(ExitCode::SUCCESS);
            }
            Err(e) => {
                eprintln!("error: {e}");
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    if !paths.is_empty() {
        return Err(Usage("--path is only used with `show`".into()).into());
    }
    let script_path = Path::new(script);
    let ops = match parse_script(&read(script_path)?) {
        Ok(ops) => ops,
        Err(e) => {
            eprintln!("error: {}: {e}", script_path.display());
            return Ok(ExitCode::FAILURE);
        }
    };
    let edited = match apply_script(&def, &ops) {
        Ok(d) => d,
        Err(failure) => {
            eprintln!("error: {failure} ({})", ops[failure.index]);
            return Ok(ExitCode::FAILURE);
        }
    };
    let text = serialize_definition(&edited);
    match (in_place, out) {
        (true, _) => write(file, &text)?,
        (false, Some(p)) => write(p, &text)?,
        (false, None) => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

async fn client_cmd(url: &str, call: Call) -> Result<()> {
    let c = Client::new(url);
    let json = match call {
        Call::Menus => serde_json::to_string_pretty(&c.menus().await?)?,
        Call::View { menu, mode } => {
            let view = c.view(&menu, mode).await?;
            print!("{}", view.to_text());
            return Ok(());
        }
        Call::Scores { menu } => serde_json::to_string_pretty(&c.scores(&menu).await?)?,
        Call::Session => serde_json::to_string_pretty(&c.session().await?)?,
        Call::Select { menu, node } => serde_json::to_string_pretty(&c.select(&menu, &node).await?)?,
        Call::Expand { menu, mode } => serde_json::to_string_pretty(&c.expand(&menu, mode).await?)?,
        Call::Pin { menu, node: None, off } => serde_json::to_string_pretty(&c.pin_menu(&menu, !off).await?)?,
        Call::Pin {
            menu,
            node: Some(node),
            off,
        } => serde_json::to_string_pretty(&c.pin_item(&menu, &node, !off).await?)?,
        Call::Panel { menu, panel, state } => serde_json::to_string_pretty(&c.panel(&menu, &panel, state).await?)?,
        Call::Clock { at } => serde_json::to_string_pretty(&c.clock(at).await?)?,
        Call::Open { menu } => serde_json::to_string_pretty(&c.open(&menu).await?)?,
        Call::Close { menu } => serde_json::to_string_pretty(&c.close(&menu).await?)?,
    };
    println!("{json}");
    Ok(())
}

async fn shutdown_signal() {
    let _ = tokio::signal::ctrl_c().await;
    tracing::info!("shutting down");
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Cmd::Validate { file } => validate_cmd(&file),
        Cmd::Render {
            file,
            menu,
            mode,
            log,
            at,
            config,
            state,
        } => {
            let engine = offline_engine(&file, &log, at, config.as_deref(), state.as_deref())?;
            print!("{}", engine.view(&MenuId::from(menu.as_str()), Some(mode))?.to_text());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Scores { file, log, at, config } => {
            let engine = offline_engine(&file, &log, at, config.as_deref(), None)?;
            print!("{}", scores_cmd(&engine)?);
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Synth {
            items,
            zipf,
            events,
            seed,
            start,
            step,
            out,
            def,
            ordered,
        } => {
            if items == 0 {
                return Err(Usage("--items must be at least 1".into()).into());
            }
            if !(zipf >= 0.0 && zipf.is_finite()) {
                return Err(Usage("--zipf must be a non-negative number".into()).into());
            }
            if step < 0 {
                return Err(Usage("--step must not be negative".into()).into());
            }
            let trace = synth(&SynthParams {
                n_items: items,
                zipf_s: zipf,
                n_events: events,
                seed,
                start_t: start,
                step_s: step,
            });
            write(&out, &trace.to_text())?;
            if let Some(path) = def {
                let layout = (!ordered).then_some(seed);
                write(&path, &serialize_definition(&synth_definition(items, layout)))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Replay {
            file,
            trace,
            policy,
            config,
            report,
        } => {
            let def = load_definition(&file)?;
            let config = load_config(config.as_deref())?;
            let trace_text = read(&trace)?;
            let trace = Trace::parse(&trace_text).with_context(|| trace.display().to_string())?;
            let result = replay(&def, &trace, &config, policy)?;
            write(&report, &result.to_tsv())?;
            println!("{result}");
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Edit {
            file,
            script,
            in_place,
            out,
            paths,
        } => edit_cmd(&file, &script, in_place, out.as_deref(), &paths),
        Cmd::Serve {
            file,
            log,
            state,
            port,
            host,
            at,
            config,
        } => {
            tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
                )
                .with_writer(std::io::stderr)
                .init();
            let config = load_config(config.as_deref())?;
            let files = ServiceFiles {
                definition: file,
                log,
                state,
            };
            let service = Service::open(&files, config, at)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port))
                    .await
                    .with_context(|| format!("binding {host}:{port}"))?;
                serve(listener, service, shutdown_signal()).await?;
                anyhow::Ok(())
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Client { url, call } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(client_cmd(&url, call))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<Usage>() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
