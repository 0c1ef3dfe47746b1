use std::io::Write;
use std::net::{SocketAddr, UdpSocket};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use edhoc_core::creds::{Credential, TrustStore};
use edhoc_core::handshake::{CompletedSession, SessionConfig};
use edhoc_core::harness::fixtures::honest_configs;
use edhoc_core::harness::{self, udp, AdversaryScript, PartyResult, RunOutcome};
use edhoc_core::suite::{lookup_suite, registry_json, supported_suites, AuthKind};
use edhoc_core::Error;

#[derive(Parser)]
#[command(name = "edhoc", version, about = "EDHOC handshake driver, attack catalog and UDP demo")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one honest handshake over the in-memory channel.
    Handshake {
        #[arg(long, default_value_t = 0)]
        method: u8,
        #[arg(long, default_value_t = 0)]
        suite: i32,
        /// Send the optional fourth message.
        #[arg(long)]
        msg4: bool,
        /// RNG seed as hex (up to 16 digits).
        #[arg(long, value_parser = parse_seed, default_value = "0")]
        seed: u64,
        /// Print the full run outcome as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run an attack scenario, or `all` of them.
    Attack {
        scenario: String,
        #[arg(long)]
        json: bool,
    },
    /// Emit deterministic regression vectors as JSON.
    ///
    /// With neither --suite nor --method, emits the pinned set (every method
    /// under suites 0, 2 and 3).
    Vectors {
        #[arg(long)]
        suite: Option<i32>,
        #[arg(long)]
        method: Option<u8>,
        /// Emit the method and suite registries instead.
        #[arg(long, conflicts_with_all = ["suite", "method"])]
        registry: bool,
    },
    /// Wire sizes of honest runs for every method and functional suite.
    BenchSize {
        #[arg(long)]
        json: bool,
    },
    /// Generate a credential file.
    Keygen {
        #[arg(long)]
        identity: String,
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long, default_value_t = 2)]
        suite: i32,
        /// Where to write the credential including its private key.
        #[arg(long)]
        out: PathBuf,
        /// Optionally also write a one-entry trust file with the public part.
        #[arg(long)]
        public: Option<PathBuf>,
    },
    /// Run one handshake over UDP.
    Udp {
        #[arg(long, value_enum)]
        role: RoleArg,
        /// Peer address for the initiator, bind address for the responder.
        #[arg(long)]
        addr: SocketAddr,
        #[arg(long)]
        cred: PathBuf,
        /// JSON array of trusted credentials.
        #[arg(long)]
        trust: PathBuf,
        #[arg(long, default_value_t = 0)]
        method: u8,
        /// Initiator: the suite to offer. Responder: ignored, every suite the
        /// credential fits is accepted.
        #[arg(long, default_value_t = 2)]
        suite: i32,
        #[arg(long)]
        msg4: bool,
        /// Identity the peer must authenticate as.
        #[arg(long)]
        expect_peer: Option<String>,
        #[arg(long, default_value_t = udp::DEFAULT_TIMEOUT.as_secs_f64())]
        timeout: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RoleArg {
    Initiator,
    Responder,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Signature,
    StaticDh,
}

fn parse_seed(s: &str) -> Result<u64, String> {
    let s = s.trim_start_matches("0x");
    u64::from_str_radix(s, 16).map_err(|e| format!("seed must be at most 16 hex digits: {e}"))
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}: {e}", e.name());
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Command) -> Result<ExitCode, Error> {
    match cmd {
        Command::Handshake { method, suite, msg4, seed, json } => {
            let (ic, rc) = honest_configs(method, suite, seed)?;
            let out = harness::run_handshake(ic.with_message_4(msg4), rc.with_message_4(msg4), &AdversaryScript::honest());
            if json {
                println!("{}", to_json(&out));
            } else {
                print_outcome(&out);
            }
            Ok(if out.agreed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Attack { scenario, json } => {
            let verdicts = if scenario == "all" { harness::run_all() } else { vec![harness::run_scenario(&scenario)?] };
            if json {
                println!("{}", to_json(&verdicts));
            } else {
                for v in &verdicts {
                    println!("{} {} ({})", if v.held { "HELD  " } else { "BROKEN" }, v.scenario, v.defense);
                    for line in &v.evidence {
                        println!("    {line}");
                    }
                }
            }
            Ok(if verdicts.iter().all(|v| v.held) { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Vectors { suite, method, registry } => {
            if registry {
                println!("{}", to_json(&registry_json()));
            } else if suite.is_none() && method.is_none() {
                print!("{}", harness::all_vectors_json()?);
            } else {
                let v = harness::vectors(method.unwrap_or(0), suite.unwrap_or(0))?;
                println!("{}", to_json(&v));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::BenchSize { json } => {
            let rows = harness::footprint_table()?;
            if json {
                println!("{}", to_json(&rows));
            } else {
                println!("{:>6} {:>5} {:>5} {:>5} {:>5} {:>6} {:>6} {:>6}", "method", "suite", "m1", "m2", "m3", "total", "auth2", "auth3");
                for r in &rows {
                    println!(
                        "{:>6} {:>5} {:>5} {:>5} {:>5} {:>6} {:>6} {:>6}",
                        r.method, r.suite, r.message_1, r.message_2, r.message_3, r.total, r.sig_or_mac_2, r.sig_or_mac_3
                    );
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Keygen { identity, kind, suite, out, public } => {
            let kind = match kind {
                KindArg::Signature => AuthKind::Signature,
                KindArg::StaticDh => AuthKind::StaticDh,
            };
            let p = lookup_suite(suite as i64)?.primitives()?;
            let cred = Credential::generate(identity, kind, &p, &mut rand_core::OsRng);
            std::fs::write(&out, to_json(&cred.to_file()) + "\n")?;
            if let Some(path) = public {
                std::fs::write(&path, to_json(&[cred.public_part().to_file()]) + "\n")?;
            }
            println!("id_cred {}", hex::encode(cred.id_cred()));
            Ok(ExitCode::SUCCESS)
        }
        Command::Udp { role, addr, cred, trust, method, suite, msg4, expect_peer, timeout } => {
            let own = Credential::load_json(&cred)?;
            let trust = TrustStore::load_json(&own, &trust)?;
            let timeout = Duration::from_secs_f64(timeout);
            let session = match role {
                RoleArg::Initiator => {
                    let mut c = SessionConfig::initiator(method, vec![suite], own, trust).with_message_4(msg4);
                    if let Some(p) = expect_peer {
                        c = c.with_expected_peer(p);
                    }
                    udp::run_initiator(c, addr, timeout)?
                }
                RoleArg::Responder => {
                    let mut c = SessionConfig::responder(method, supported_suites(), own, trust).with_message_4(msg4);
                    if let Some(p) = expect_peer {
                        c = c.with_expected_peer(p);
                    }
                    let sock = UdpSocket::bind(addr)?;
                    // Flushed so scripts can wait for the port before starting the initiator.
                    println!("listening   {}", sock.local_addr()?);
                    std::io::stdout().flush()?;
                    udp::run_responder_on(&sock, c, timeout)?
                }
            };
            print_session(&session);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn to_json<T: serde::Serialize + ?Sized>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn print_session(s: &CompletedSession) {
    println!("role        {:?}", s.role);
    println!("method      {}", s.method);
    println!("suite       {}", s.suite);
    println!("c_i         {}", hex::encode(&s.c_i));
    println!("c_r         {}", hex::encode(&s.c_r));
    println!("peer        {}", String::from_utf8_lossy(&s.peer_identity));
    println!("confirmed   {}", s.key_confirmed);
    println!("fingerprint {}", s.fingerprint());
}

fn print_outcome(out: &RunOutcome) {
    for e in &out.transcript {
        println!("{:?} {:>4} bytes  {}  -> {}", e.direction, e.bytes.len(), e.action, e.outcome);
    }
    println!("total {} bytes", out.footprint.total);
    for (name, r) in [("initiator", &out.initiator), ("responder", &out.responder)] {
        match r {
            PartyResult::Completed(s) => {
                println!("{name}: completed, fingerprint {} confirmed={}", s.fingerprint(), s.key_confirmed)
            }
            PartyResult::Aborted(e) => println!("{name}: aborted, {}", e.name()),
            PartyResult::Stalled(p) => println!("{name}: stalled in {p}"),
        }
    }
}
