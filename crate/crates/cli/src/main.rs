//! `chai`: run and review Design Thinking sessions from the shell.
//!
//! Sessions live under the data directory (`--data-dir`, `CHAI_DATA_DIR`,
//! or the config file). Exit codes: 0 ok, 1 transport or I/O failure,
//! 2 validation or state error.

mod board;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use chai_core::activity::{builtin, builtin_names};
use chai_core::agent::{AgentError, TOKEN_ENV};
use chai_core::config::ConfigError;
use chai_core::session::{new_session_id, parse_event_log, ReplayError, SystemClock, TurnError};
use chai_core::store::StoreError;
use chai_core::{
    export_session, load_activity, replay, ActivityDefinition, ActivityError, AgentBinding,
    AgentProfile, AgentProvenance, Config, ExportFormat, FileStore, Mode, ReviewDecision, Session,
    SessionError,
};
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "chai",
    version,
    about = "Facilitate human-AI Design Thinking sessions"
)]
struct Cli {
    /// Config file (TOML).
    #[arg(long, global = true, env = "CHAI_CONFIG")]
    config: Option<PathBuf>,
    /// Session store directory; overrides the config file.
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct SessionArg {
    #[arg(long = "session")]
    id: String,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Built-in activities.
    Activities {
        #[command(subcommand)]
        command: ActivitiesCommand,
    },
    /// Start a session and print the initial prompt.
    Run(RunArgs),
    /// List stored sessions.
    Sessions,
    /// Send the pending request to the session's agent.
    Drive(SessionArg),
    /// Record a reply pasted from an external chat (manual mode).
    Respond {
        #[command(flatten)]
        session: SessionArg,
        #[arg(long)]
        file: PathBuf,
    },
    /// Move to the next step and print its outbound message.
    Advance(SessionArg),
    /// Print the board.
    Board(SessionArg),
    /// Accept, reject or amend a proposed artifact.
    Review {
        #[command(flatten)]
        session: SessionArg,
        #[arg(long)]
        artifact: String,
        #[arg(long, conflicts_with_all = ["reject", "amend"], required_unless_present_any = ["reject", "amend"])]
        accept: bool,
        #[arg(long, conflicts_with = "amend")]
        reject: bool,
        #[arg(long, value_name = "TEXT")]
        amend: Option<String>,
    },
    /// Add a human artifact.
    Add {
        #[command(flatten)]
        session: SessionArg,
        #[arg(long)]
        criterion: String,
        #[arg(long)]
        text: String,
        #[arg(long)]
        author: String,
    },
    /// Put artifacts into a labelled cluster.
    Cluster {
        #[command(flatten)]
        session: SessionArg,
        #[arg(long)]
        label: String,
        #[arg(long, value_delimiter = ',', required = true)]
        artifacts: Vec<String>,
    },
    /// Compose a Hill statement from accepted artifacts.
    Hill {
        #[command(flatten)]
        session: SessionArg,
        #[arg(long, value_delimiter = ',')]
        who: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        what: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        wow: Vec<String>,
        #[arg(long)]
        text: String,
    },
    /// Finish the session.
    Complete {
        #[command(flatten)]
        session: SessionArg,
        /// Finish before the last step.
        #[arg(long = "override")]
        override_early: bool,
    },
    /// Write a Markdown or CSV report.
    Export {
        #[command(flatten)]
        session: SessionArg,
        #[arg(long, default_value = "md")]
        format: String,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check an event log and print the board it rebuilds.
    Replay {
        #[arg(long)]
        log: PathBuf,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        listen: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
enum ActivitiesCommand {
    List,
    Show { name: String },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Built-in activity name.
    #[arg(
        long,
        required_unless_present = "definition",
        conflicts_with = "definition"
    )]
    activity: Option<String>,
    /// Activity document (JSON) to use instead of a built-in.
    #[arg(long)]
    definition: Option<PathBuf>,
    /// File holding the project context.
    #[arg(long)]
    context: PathBuf,
    #[arg(long, default_value = "stepwise")]
    mode: Mode,
    /// `manual`, `remote`, or `scripted:TRANSCRIPT.json`.
    #[arg(long, default_value = "manual")]
    agent: String,
    #[arg(long)]
    session_id: Option<String>,
    /// Keep advancing while the next step yields artifacts.
    #[arg(long)]
    auto: bool,
}

/// A failure with its exit code.
#[derive(Debug)]
enum Failure {
    Transport(String),
    Invalid(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Transport(_) => 1,
            Failure::Invalid(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Transport(m) | Failure::Invalid(m) => m,
        }
    }
}

impl From<SessionError> for Failure {
    fn from(e: SessionError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<AgentError> for Failure {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::Profile(_) | AgentError::Transcript(_) => Failure::Invalid(e.to_string()),
            _ => Failure::Transport(e.to_string()),
        }
    }
}

impl From<TurnError> for Failure {
    fn from(e: TurnError) -> Self {
        match e {
            TurnError::Agent(e) => e.into(),
            TurnError::Session(e) => e.into(),
        }
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(_)
            | StoreError::Exists(_)
            | StoreError::InvalidId(_)
            | StoreError::Replay { .. } => Failure::Invalid(e.to_string()),
            _ => Failure::Transport(e.to_string()),
        }
    }
}

impl From<ActivityError> for Failure {
    fn from(e: ActivityError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<ReplayError> for Failure {
    fn from(e: ReplayError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::Transport(format!("{}: {e}", path.display()))
}

type Outcome = Result<(), Failure>;

struct Ctx {
    config: Config,
    store: FileStore,
}

impl Ctx {
    fn open(cli: &Cli) -> Result<Self, Failure> {
        let mut config = Config::load(cli.config.as_deref())?;
        if let Some(dir) = &cli.data_dir {
            config.data_dir = dir.clone();
        }
        let store = FileStore::open(&config.data_dir)?;
        Ok(Self { config, store })
    }

    fn load(&self, id: &str) -> Result<Session, Failure> {
        Ok(self
            .store
            .load(id, self.config.parser(), Arc::new(SystemClock))?)
    }

    /// Loads a session, applies `op`, and appends whatever it emitted, even
    /// when `op` fails part way (e.g. advanced, then the agent timed out).
    fn with_session<T>(
        &self,
        id: &str,
        op: impl FnOnce(&mut Session, &Ctx) -> Result<T, Failure>,
    ) -> Result<T, Failure> {
        let mut session = self.load(id)?;
        let persisted = session.events().len() as u64;
        let result = op(&mut session, self);
        self.store.save(&session, persisted)?;
        result
    }

    fn agent(&self, id: &str) -> Result<Option<Box<dyn chai_core::ChatAgent>>, Failure> {
        match self.store.agent_binding(id)? {
            Some(binding) => Ok(Some(binding.connect()?)),
            None => Ok(None),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(io(path))
}

fn parse_agent(spec: &str, config: &Config) -> Result<Option<AgentBinding>, Failure> {
    match spec.split_once(':') {
        Some(("scripted", path)) => Ok(Some(
            AgentProfile::Scripted {
                transcript: PathBuf::from(path),
            }
            .bind()?,
        )),
        None if spec == "manual" => Ok(None),
        None if spec == "remote" => {
            let profile = config.agent.clone().ok_or_else(|| {
                Failure::Invalid(
                    "no remote agent configured; set [agent] in the config or CHAI_AGENT_ENDPOINT and CHAI_AGENT_MODEL".into(),
                )
            })?;
            if std::env::var_os(TOKEN_ENV).is_none() {
                eprintln!("warning: {TOKEN_ENV} is not set; sending requests without a token");
            }
            Ok(Some(AgentProfile::Remote(profile).bind()?))
        }
        _ => Err(Failure::Invalid(format!(
            "unknown agent {spec:?} (expected manual, remote or scripted:FILE)"
        ))),
    }
}

fn run(ctx: &Ctx, args: &RunArgs) -> Outcome {
    let activity: ActivityDefinition = match (&args.activity, &args.definition) {
        (_, Some(path)) => load_activity(&read(path)?)?,
        (Some(name), None) => builtin(name).ok_or_else(|| {
            Failure::Invalid(format!(
                "unknown activity {name:?} (available: {})",
                builtin_names().join(", ")
            ))
        })?,
        (None, None) => unreachable!("clap requires one"),
    };
    let context = read(&args.context)?;
    let binding = parse_agent(&args.agent, &ctx.config)?;
    let provenance = match &binding {
        Some(b) => b.connect()?.provenance(),
        None => AgentProvenance::manual(),
    };
    let clock = Arc::new(SystemClock);
    let id = args
        .session_id
        .clone()
        .unwrap_or_else(|| new_session_id(chai_core::session::Clock::now(&SystemClock)));
    let (session, prompt) = Session::start(
        id.clone(),
        activity,
        &context,
        args.mode,
        provenance,
        ctx.config.parser(),
        clock,
    )?;
    ctx.store.create(&session)?;
    if let Some(binding) = &binding {
        ctx.store.bind_agent(&id, binding)?;
    }
    print!("{prompt}");
    eprintln!("session {id}");
    if binding.is_none() {
        return Ok(());
    }
    drive(ctx, &id)?;
    if args.auto {
        loop {
            let session = ctx.load(&id)?;
            let state = session.state();
            let next = state.current_step.map(|n| n + 1);
            let yields = next
                .and_then(|n| state.activity.step(n))
                .is_some_and(|s| s.produces_criterion.is_some());
            if !yields {
                break;
            }
            advance(ctx, &id, false)?;
        }
    }
    Ok(())
}

fn report_turn(session: &Session) {
    let state = session.state();
    let recorded = state
        .step_commentary
        .last()
        .map(|c| (c.disclaimers.len(), c.unparsed.len()))
        .unwrap_or_default();
    let step = state
        .current_step
        .map(|n| format!("step {n}"))
        .unwrap_or_else(|| "full run".into());
    let counts = state
        .activity
        .criteria
        .iter()
        .map(|c| format!("{}={}", c.key, state.column(&c.key).count()))
        .collect::<Vec<_>>()
        .join(" ");
    eprintln!(
        "{step}: agent replied; {counts}; notes={} unparsed={}",
        recorded.0, recorded.1
    );
}

fn drive(ctx: &Ctx, id: &str) -> Outcome {
    let agent = ctx
        .agent(id)?
        .ok_or_else(|| Failure::Invalid(format!("session {id} has no agent; use respond")))?;
    ctx.with_session(id, |s, _| {
        s.request_reply(agent.as_ref())?;
        report_turn(s);
        Ok(())
    })
}

fn advance(ctx: &Ctx, id: &str, print_outbound: bool) -> Outcome {
    let agent = ctx.agent(id)?;
    ctx.with_session(id, |s, _| {
        let outbound = s.advance()?;
        if print_outbound {
            print!("{outbound}");
        }
        if let Some(agent) = &agent {
            s.request_reply(agent.as_ref())?;
            report_turn(s);
        }
        Ok(())
    })
}

fn execute(cli: Cli) -> Outcome {
    match &cli.command {
        Command::Activities { command } => {
            match command {
                ActivitiesCommand::List => {
                    for name in builtin_names() {
                        let def = builtin(name).expect("listed");
                        println!("{name}\t{} ({} steps)", def.name, def.step_count());
                    }
                }
                ActivitiesCommand::Show { name } => {
                    let def = builtin(name)
                        .ok_or_else(|| Failure::Invalid(format!("unknown activity {name:?}")))?;
                    print!("{}", def.to_document());
                }
            }
            return Ok(());
        }
        Command::Replay { log } => {
            let events = parse_event_log(&read(log)?)?;
            let state = replay(&events)?;
            state.check_invariants().map_err(Failure::Invalid)?;
            print!("{}", board::render(&state));
            eprintln!("{} events ok", events.len());
            return Ok(());
        }
        _ => {}
    }

    let ctx = Ctx::open(&cli)?;
    match cli.command {
        Command::Activities { .. } | Command::Replay { .. } => unreachable!(),
        Command::Run(args) => run(&ctx, &args),
        Command::Sessions => {
            for row in ctx.store.list()? {
                let counts = row
                    .counts
                    .iter()
                    .map(|(k, v)| format!("{k}={v}"))
                    .collect::<Vec<_>>()
                    .join(" ");
                println!(
                    "{}\t{}\t{}\t{}\t{counts}",
                    row.id, row.activity_name, row.mode, row.phase
                );
            }
            Ok(())
        }
        Command::Drive(s) => drive(&ctx, &s.id),
        Command::Respond { session, file } => {
            let reply = read(&file)?;
            ctx.with_session(&session.id, |s, _| {
                s.apply_agent_response(&reply)?;
                report_turn(s);
                Ok(())
            })
        }
        Command::Advance(s) => advance(&ctx, &s.id, true),
        Command::Board(s) => {
            print!("{}", board::render(ctx.load(&s.id)?.state()));
            Ok(())
        }
        Command::Review {
            session,
            artifact,
            accept: _,
            reject,
            amend,
        } => {
            let decision = match (reject, amend) {
                (true, _) => ReviewDecision::Reject,
                (false, Some(text)) => ReviewDecision::Amend(text),
                (false, None) => ReviewDecision::Accept,
            };
            ctx.with_session(&session.id, |s, _| {
                s.review_artifact(&artifact, decision)?;
                let a = s.state().artifact(&artifact).expect("just reviewed");
                println!("{} [{}] {}", a.id, a.status, a.text);
                Ok(())
            })
        }
        Command::Add {
            session,
            criterion,
            text,
            author,
        } => ctx.with_session(&session.id, |s, _| {
            println!("{}", s.submit_human_artifact(&criterion, &text, &author)?);
            Ok(())
        }),
        Command::Cluster {
            session,
            label,
            artifacts,
        } => ctx.with_session(&session.id, |s, _| {
            println!("{}", s.assign_cluster(&artifacts, &label)?);
            Ok(())
        }),
        Command::Hill {
            session,
            who,
            what,
            wow,
            text,
        } => ctx.with_session(&session.id, |s, _| {
            println!("{}", s.compose_hill(&who, &what, &wow, &text)?);
            Ok(())
        }),
        Command::Complete {
            session,
            override_early,
        } => ctx.with_session(&session.id, |s, _| Ok(s.complete(override_early)?)),
        Command::Export {
            session,
            format,
            out,
        } => {
            let format: ExportFormat = format
                .parse()
                .map_err(|e: chai_core::export::ExportError| Failure::Invalid(e.to_string()))?;
            let doc = export_session(ctx.load(&session.id)?.state(), format);
            match out {
                Some(path) => std::fs::write(&path, &doc.content).map_err(io(&path)),
                None => std::io::stdout()
                    .write_all(&doc.content)
                    .map_err(|e| Failure::Transport(e.to_string())),
            }
        }
        Command::Serve { listen } => {
            let mut config = ctx.config;
            if let Some(listen) = listen {
                config.listen = listen;
            }
            let runtime =
                tokio::runtime::Runtime::new().map_err(|e| Failure::Transport(e.to_string()))?;
            runtime
                .block_on(chai_service::serve(config))
                .map_err(|e| Failure::Transport(e.to_string()))
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("CHAI_LOG")
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn,chai_service=info")),
        )
        .with_writer(std::io::stderr)
        .init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}
