//! `qia` — experiment driver and wire deployment for the authentication
//! protocol laboratory.
//!
//! Experiment subcommands (`honest`, `attack`, `replay`) run seeded Monte
//! Carlo batches and print a report as JSON or CSV. Wire subcommands
//! (`serve`, `connect`, `proxy`) run one party per process over TCP and print
//! one JSON record per session. All randomness derives from `--seed`;
//! `QIA_KEYLEN_CAP` overrides the exhaustive-enumeration cap (default 24).

use std::io::Write as _;
use std::net::{TcpListener, TcpStream};
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use qia_core::adversary::{
    eliminate_evidence, intersect_sessions, likelihood_score, scores_to_csv, AdversaryStrategy,
    BasisPolicy, SessionEvidence,
};
use qia_core::bits::Bits;
use qia_core::experiment::{
    run_attack, run_honest, run_replay, AttackConfig, ExperimentReport, HonestConfig, ReplayConfig,
};
use qia_core::keyspace::{Key, KeySpace, DEFAULT_ENUMERATION_CAP};
use qia_core::protocol::{SessionParams, Variant};
use qia_core::qstate::Basis;
use qia_core::rng::{labels, substream_seed, Rng};
use qia_wire::{run_prover, run_proxy, run_verifier};

#[derive(Parser)]
#[command(name = "qia", version, about = "Quantum identity authentication laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    ZawadzkiBobNonce,
    ZawadzkiAliceNonce,
    HongDecoy,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Variant {
        match v {
            VariantArg::ZawadzkiBobNonce => Variant::ZawadzkiBobNonce,
            VariantArg::ZawadzkiAliceNonce => Variant::ZawadzkiAliceNonce,
            VariantArg::HongDecoy => Variant::HongDecoy,
        }
    }
}

/// `all-rectilinear`, `all-diagonal`, `uniform-random`, or `fixed:RDRD...`.
#[derive(Clone, Debug)]
struct PolicyArg(BasisPolicy);

impl FromStr for PolicyArg {
    type Err = String;

    fn from_str(s: &str) -> Result<PolicyArg, String> {
        let policy = match s {
            "all-rectilinear" => BasisPolicy::AllRectilinear,
            "all-diagonal" => BasisPolicy::AllDiagonal,
            "uniform-random" => BasisPolicy::UniformRandomPerQubit,
            other => match other.strip_prefix("fixed:") {
                Some(pattern) => {
                    let bases: Result<Vec<Basis>, String> = pattern
                        .chars()
                        .map(|c| match c {
                            'R' | 'r' => Ok(Basis::Rectilinear),
                            'D' | 'd' => Ok(Basis::Diagonal),
                            bad => Err(format!("bad basis character {bad:?} (use R or D)")),
                        })
                        .collect();
                    BasisPolicy::FixedPattern(bases?)
                }
                None => {
                    return Err(format!(
                        "unknown policy {other:?}; use all-rectilinear, all-diagonal, \
                         uniform-random or fixed:RDRD..."
                    ))
                }
            },
        };
        Ok(PolicyArg(policy))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Json,
    Csv,
}

#[derive(Args)]
struct ParamArgs {
    /// Protocol variant.
    #[arg(long, value_enum, default_value = "zawadzki-bob-nonce")]
    variant: VariantArg,
    /// Shared key length in bits.
    #[arg(long, default_value_t = 16)]
    key_len: usize,
    /// Number of authentication qubits per session.
    #[arg(long, default_value_t = 16)]
    d: usize,
    /// Nonce length in bits.
    #[arg(long, default_value_t = 128)]
    nonce_len: usize,
    /// Decoy probability (HongDecoy only).
    #[arg(long, default_value_t = 0.5)]
    decoy_prob: f64,
}

impl ParamArgs {
    fn to_params(&self) -> SessionParams {
        SessionParams {
            key_len: self.key_len,
            nonce_len: self.nonce_len,
            d: self.d,
            variant: self.variant.into(),
            decoy_prob: self.decoy_prob,
            short_circuit: false,
        }
    }
}

#[derive(Args)]
struct WireArgs {
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long)]
    port: u16,
    /// Sessions to run on this connection endpoint, sequentially.
    #[arg(long, default_value_t = 1)]
    sessions: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Key override as hex (length must match --key-len); by default the key
    /// derives from the seed, so parties sharing a seed share a key.
    #[arg(long)]
    key_hex: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Honest-run acceptance statistics (equal-key and unequal-key batches);
    /// with --policy, the equal-key batch runs under passive interception.
    Honest {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        policy: Option<PolicyArg>,
        #[arg(long, value_enum, default_value = "json")]
        out: OutFormat,
    },
    /// Key-space reduction: intercept sessions, eliminate candidates,
    /// intersect across sessions, report survival statistics.
    Attack(AttackArgs),
    /// Forgery statistics: quantum-memory replay and live relay.
    Replay {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value = "json")]
        out: OutFormat,
    },
    /// Run the verifier (Bob): listen and verify incoming sessions.
    Serve {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        wire: WireArgs,
    },
    /// Run the prover (Alice): connect and authenticate.
    Connect {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        wire: WireArgs,
    },
    /// Run Eve: listen for the prover, connect to the verifier, relay or
    /// intercept, and report observations per session.
    Proxy(ProxyArgs),
}

#[derive(Args)]
struct AttackArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value = "all-rectilinear")]
    policy: PolicyArg,
    #[arg(long, default_value_t = 1)]
    sessions: u32,
    #[arg(long, default_value_t = 200)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value = "json")]
    out: OutFormat,
    /// Also write trial 0's final survivor set as a JSON hex list.
    #[arg(long)]
    survivors_json: Option<std::path::PathBuf>,
    /// Also write trial 0's final survivor set as a binary bitset dump.
    #[arg(long)]
    survivors_bitset: Option<std::path::PathBuf>,
    /// Also write trial 0's likelihood scores as CSV.
    #[arg(long)]
    scores_csv: Option<std::path::PathBuf>,
}

#[derive(Args)]
struct ProxyArgs {
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    upstream_host: String,
    #[arg(long)]
    upstream_port: u16,
    /// `transparent` or `intercept` (see --policy).
    #[arg(long, default_value = "transparent")]
    strategy: String,
    #[arg(long, default_value = "all-rectilinear")]
    policy: PolicyArg,
    #[arg(long, default_value_t = 1)]
    sessions: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn keylen_cap() -> anyhow::Result<usize> {
    match std::env::var("QIA_KEYLEN_CAP") {
        Ok(v) => v
            .parse::<usize>()
            .with_context(|| format!("QIA_KEYLEN_CAP must be an integer, got {v:?}")),
        Err(_) => Ok(DEFAULT_ENUMERATION_CAP),
    }
}

/// Write to stdout, exiting quietly if the reader went away (`qia ... | head`).
fn print_out(text: &str) {
    let mut stdout = std::io::stdout().lock();
    if let Err(e) = stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        let _ = writeln!(std::io::stderr(), "error: cannot write to stdout: {e}");
        std::process::exit(1);
    }
}

fn emit_report(report: &ExperimentReport, out: OutFormat) {
    match out {
        OutFormat::Json => print_out(&format!("{}\n", report.to_json())),
        OutFormat::Csv => print_out(&report.to_csv()),
    }
}

fn party_key(wire: &WireArgs, params: &SessionParams) -> anyhow::Result<Key> {
    match &wire.key_hex {
        Some(hex) => {
            let bits = Bits::from_hex(params.key_len, hex).with_context(|| {
                format!("--key-hex must be {} hex digits for key_len {}", params.key_len.div_ceil(4), params.key_len)
            })?;
            Ok(Key::from_bits(bits))
        }
        None => {
            let mut rng = Rng::stream(wire.seed, labels::KEY);
            Ok(Key::random(&mut rng, params.key_len))
        }
    }
}

/// Session roots shared by the three wire processes: all derive session `i`
/// from the common seed the same way.
fn wire_session_root(seed: u64, index: u64) -> u64 {
    substream_seed(seed, (1 << 32) | index)
}

fn cmd_serve(params: ParamArgs, wire: WireArgs) -> anyhow::Result<()> {
    let params = params.to_params();
    let key = party_key(&wire, &params)?;
    let listener = TcpListener::bind((wire.host.as_str(), wire.port))
        .with_context(|| format!("cannot listen on {}:{}", wire.host, wire.port))?;
    for i in 0..wire.sessions {
        let (conn, peer) = listener.accept().context("accept failed")?;
        let streams = qia_core::protocol::SessionStreams::derive(wire_session_root(wire.seed, i));
        let view = match run_verifier(conn, &key, &params, streams.bob) {
            Ok(view) => view,
            Err(e) => {
                emit_abort_record(i, "verifier", &params, &e);
                return Err(e).with_context(|| format!("session {i} with {peer} aborted"));
            }
        };
        print_out(&format!(
            "{}\n",
            serde_json::json!({
                "session_id": i,
                "role": "verifier",
                "params": params,
                "view": view,
            })
        ));
    }
    Ok(())
}

/// Session abort record: a transcript stub with no outcome plus the reason.
fn emit_abort_record(session_id: u64, role: &str, params: &SessionParams, error: &qia_wire::WireError) {
    print_out(&format!(
        "{}\n",
        serde_json::json!({
            "session_id": session_id,
            "role": role,
            "params": params,
            "outcome": serde_json::Value::Null,
            "aborted": format!("{error}"),
        })
    ));
}

fn cmd_connect(params: ParamArgs, wire: WireArgs) -> anyhow::Result<()> {
    let params = params.to_params();
    let key = party_key(&wire, &params)?;
    for i in 0..wire.sessions {
        let conn = TcpStream::connect((wire.host.as_str(), wire.port))
            .with_context(|| format!("cannot connect to {}:{}", wire.host, wire.port))?;
        let streams = qia_core::protocol::SessionStreams::derive(wire_session_root(wire.seed, i));
        let view = match run_prover(conn, &key, &params, streams.alice) {
            Ok(view) => view,
            Err(e) => {
                emit_abort_record(i, "prover", &params, &e);
                return Err(e).with_context(|| format!("session {i} aborted"));
            }
        };
        print_out(&format!(
            "{}\n",
            serde_json::json!({
                "session_id": i,
                "role": "prover",
                "params": params,
                "view": view,
            })
        ));
    }
    Ok(())
}

fn cmd_proxy(args: ProxyArgs) -> anyhow::Result<()> {
    let ProxyArgs { host, port, upstream_host, upstream_port, strategy, policy, sessions, seed } =
        args;
    let strategy = match strategy.as_str() {
        "transparent" => AdversaryStrategy::Transparent,
        "intercept" => AdversaryStrategy::InterceptMeasure(policy.0),
        other => bail!("unknown strategy {other:?}; use transparent or intercept"),
    };
    let listener = TcpListener::bind((host.as_str(), port))
        .with_context(|| format!("cannot listen on {host}:{port}"))?;
    for i in 0..sessions {
        let (alice_conn, _) = listener.accept().context("accept failed")?;
        let bob_conn = TcpStream::connect((upstream_host.as_str(), upstream_port))
            .with_context(|| format!("cannot connect upstream to {upstream_host}:{upstream_port}"))?;
        let streams = qia_core::protocol::SessionStreams::derive(wire_session_root(seed, i));
        let from_prover = alice_conn.try_clone()?;
        let from_verifier = bob_conn.try_clone()?;
        let view = match run_proxy(from_prover, alice_conn, from_verifier, bob_conn, &strategy, streams.eve)
        {
            Ok(view) => view,
            Err(e) => {
                print_out(&format!(
                    "{}\n",
                    serde_json::json!({
                        "session_id": i,
                        "role": "proxy",
                        "outcome": serde_json::Value::Null,
                        "aborted": format!("{e}"),
                    })
                ));
                return Err(e).with_context(|| format!("session {i} aborted"));
            }
        };
        print_out(&format!(
            "{}\n",
            serde_json::json!({
                "session_id": i,
                "role": "proxy",
                "observations": view.observations(i),
                "view": view,
            })
        ));
    }
    Ok(())
}

fn cmd_attack(args: AttackArgs) -> anyhow::Result<()> {
    let AttackArgs { params, policy, sessions, trials, seed, out, survivors_json, survivors_bitset, scores_csv } =
        args;
    let cfg = AttackConfig {
        params: params.to_params(),
        policy: policy.0,
        sessions,
        trials,
        seed,
        keylen_cap: keylen_cap()?,
    };
    let report = run_attack(&cfg)?;
    emit_report(&report, out);

    if survivors_json.is_some() || survivors_bitset.is_some() || scores_csv.is_some() {
        let (survivors, evidence) = rebuild_first_trial(&cfg)?;
        if let Some(path) = survivors_json {
            std::fs::write(&path, survivors.to_json())
                .with_context(|| format!("writing {}", path.display()))?;
        }
        if let Some(path) = survivors_bitset {
            std::fs::write(&path, survivors.to_bitset_dump())
                .with_context(|| format!("writing {}", path.display()))?;
        }
        if let Some(path) = scores_csv {
            let keyspace = KeySpace::exhaustive_with_cap(cfg.params.key_len, cfg.keylen_cap);
            let scores = likelihood_score(&keyspace, &evidence)?;
            std::fs::write(&path, scores_to_csv(&scores))
                .with_context(|| format!("writing {}", path.display()))?;
        }
    }
    Ok(())
}

/// Re-run trial 0 of an attack config to materialize its survivor set and
/// evidence for the export flags.
fn rebuild_first_trial(
    cfg: &AttackConfig,
) -> anyhow::Result<(qia_core::keyspace::SurvivorSet, Vec<SessionEvidence>)> {
    let keyspace = KeySpace::exhaustive_with_cap(cfg.params.key_len, cfg.keylen_cap);
    let trial_root = substream_seed(cfg.seed, 0);
    let mut key_rng = Rng::stream(trial_root, labels::KEY);
    let true_key = Key::random(&mut key_rng, cfg.params.key_len);
    let adversary = AdversaryStrategy::InterceptMeasure(cfg.policy.clone());
    let mut evidence = Vec::new();
    let mut sets = Vec::new();
    for s in 0..cfg.sessions as u64 {
        let t = qia_core::protocol::run_session(
            &true_key,
            &true_key,
            &cfg.params,
            Some(&adversary),
            substream_seed(trial_root, (1 << 32) + s),
            s,
        )?;
        let ev = SessionEvidence::from_transcript(&t);
        sets.push(eliminate_evidence(&keyspace, &ev)?);
        evidence.push(ev);
    }
    Ok((intersect_sessions(&sets)?, evidence))
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Honest { params, trials, seed, policy, out } => {
            let cfg = HonestConfig {
                params: params.to_params(),
                trials,
                seed,
                policy: policy.map(|p| p.0),
            };
            run_honest(&cfg).map(|report| emit_report(&report, out)).map_err(Into::into)
        }
        Command::Attack(args) => cmd_attack(args),
        Command::Replay { params, trials, seed, out } => {
            let cfg = ReplayConfig { params: params.to_params(), trials, seed };
            run_replay(&cfg).map(|report| emit_report(&report, out)).map_err(Into::into)
        }
        Command::Serve { params, wire } => cmd_serve(params, wire),
        Command::Connect { params, wire } => cmd_connect(params, wire),
        Command::Proxy(args) => cmd_proxy(args),
    };
    if let Err(e) = result {
        let _ = writeln!(std::io::stderr(), "error: {e:#}");
        std::process::exit(1);
    }
}
