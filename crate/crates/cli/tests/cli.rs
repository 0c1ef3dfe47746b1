use std::io::{BufRead, BufReader};
use std::net::UdpSocket;
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};
use std::thread;
use std::time::Duration;

fn edhoc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_edhoc"))
}

fn run(args: &[&str]) -> Output {
    edhoc().args(args).output().expect("spawn edhoc")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn fingerprint(o: &Output) -> String {
    stdout(o)
        .lines()
        .find_map(|l| l.strip_prefix("fingerprint ").map(|s| s.trim().to_string()))
        .unwrap_or_else(|| panic!("no fingerprint in {}", stdout(o)))
}

#[test]
fn handshake_completes() {
    let o = run(&["handshake", "--method", "3", "--suite", "2", "--msg4", "--seed", "0x2a"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    assert!(s.contains("initiator: completed"));
    assert!(s.contains("responder: completed"));
}

#[test]
fn handshake_json_agrees() {
    let o = run(&["handshake", "--method", "1", "--suite", "0", "--json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["initiator"]["detail"]["prk_out"], v["responder"]["detail"]["prk_out"]);
}

#[test]
fn unsupported_suite_names_the_error() {
    let o = run(&["handshake", "--suite", "25"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("UnsupportedSuite"));
}

#[test]
fn attack_single_and_unknown() {
    let o = run(&["attack", "salt_collision", "--json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v[0]["held"], true);

    let o = run(&["attack", "no_such_attack"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("UnknownScenario"));
}

#[test]
fn vectors_are_stable() {
    let a = run(&["vectors", "--suite", "2", "--method", "3"]);
    let b = run(&["vectors", "--suite", "2", "--method", "3"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["method"], 3);
    assert!(v["prks"]["prk_out"].as_str().is_some_and(|s| s.len() == 64));
}

#[test]
fn registry_export() {
    let o = run(&["vectors", "--registry"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["methods"].as_object().unwrap().len(), 4);
    assert_eq!(v["suites"]["2"]["ecdh_curve"], "P-256");
}

#[test]
fn bench_size_json() {
    let o = run(&["bench-size", "--json"]);
    assert!(o.status.success());
    let rows: Vec<serde_json::Value> = serde_json::from_slice(&o.stdout).unwrap();
    let row = |m: u64, s: i64| rows.iter().find(|r| r["method"] == m && r["suite"] == s).unwrap().clone();
    assert!(row(3, 2)["total"].as_u64().unwrap() < row(0, 2)["total"].as_u64().unwrap());
}

// ---- UDP between two processes ----

struct Creds {
    dir: tempfile::TempDir,
}

impl Creds {
    fn new(kind_i: &str, kind_r: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        for (name, kind) in [("alice", kind_i), ("bob", kind_r), ("mallory", kind_i)] {
            let o = run(&[
                "keygen",
                "--identity",
                name,
                "--kind",
                kind,
                "--suite",
                "2",
                "--out",
                dir.path().join(format!("{name}.json")).to_str().unwrap(),
                "--public",
                dir.path().join(format!("{name}.pub.json")).to_str().unwrap(),
            ]);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        }
        Self { dir }
    }

    fn path(&self, f: &str) -> String {
        self.dir.path().join(f).to_str().unwrap().to_string()
    }
}

fn responder(creds: &Creds, trust: &str, extra: &[&str]) -> (Child, String) {
    let mut child = edhoc()
        .args(["udp", "--role", "responder", "--addr", "127.0.0.1:0", "--timeout", "5"])
        .args(["--cred", &creds.path("bob.json"), "--trust", &creds.path(trust)])
        .args(extra)
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.as_mut().unwrap()).read_line(&mut line).unwrap();
    let addr = line.strip_prefix("listening").expect("listening line").trim().to_string();
    (child, addr)
}

fn initiator(creds: &Creds, own: &str, addr: &str, extra: &[&str]) -> Output {
    edhoc()
        .args(["udp", "--role", "initiator", "--addr", addr, "--timeout", "3"])
        .args(["--cred", &creds.path(own), "--trust", &creds.path("bob.pub.json")])
        .args(extra)
        .output()
        .unwrap()
}

fn finish(child: Child) -> Output {
    child.wait_with_output().unwrap()
}

#[test]
fn udp_two_processes_agree() {
    let creds = Creds::new("signature", "signature");
    let (r, addr) = responder(&creds, "alice.pub.json", &[]);
    let i = initiator(&creds, "alice.json", &addr, &["--method", "0", "--suite", "2"]);
    let r = finish(r);
    assert!(i.status.success(), "initiator: {}", String::from_utf8_lossy(&i.stderr));
    assert!(r.status.success(), "responder: {}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(fingerprint(&i), fingerprint(&r));
    assert!(stdout(&i).contains("peer        bob"));
}

#[test]
fn udp_static_dh_with_message_4() {
    let creds = Creds::new("static-dh", "static-dh");
    let (r, addr) = responder(&creds, "alice.pub.json", &["--method", "3", "--msg4"]);
    let i = initiator(&creds, "alice.json", &addr, &["--method", "3", "--msg4"]);
    let r = finish(r);
    assert!(i.status.success(), "{}", String::from_utf8_lossy(&i.stderr));
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(fingerprint(&i), fingerprint(&r));
    assert!(stdout(&i).contains("confirmed   true"));
}

#[test]
fn udp_untrusted_initiator_rejected() {
    let creds = Creds::new("signature", "signature");
    // Bob only trusts Mallory, so Alice is refused.
    let (r, addr) = responder(&creds, "mallory.pub.json", &[]);
    let i = initiator(&creds, "alice.json", &addr, &[]);
    let r = finish(r);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("UntrustedPeer"));
    assert!(!i.status.success());
}

#[test]
fn udp_mangling_proxy_aborts() {
    let creds = Creds::new("signature", "signature");
    let (r, addr) = responder(&creds, "alice.pub.json", &[]);
    let upstream: std::net::SocketAddr = addr.parse().unwrap();

    // Forwards datagrams both ways, flipping the last byte of everything
    // the responder sends.
    let proxy = UdpSocket::bind("127.0.0.1:0").unwrap();
    let proxy_addr = proxy.local_addr().unwrap().to_string();
    proxy.set_read_timeout(Some(Duration::from_secs(2))).unwrap();
    let relay = thread::spawn(move || {
        let mut client = None;
        let mut buf = [0u8; 2048];
        while let Ok((n, from)) = proxy.recv_from(&mut buf) {
            let mut msg = buf[..n].to_vec();
            if from == upstream {
                *msg.last_mut().unwrap() ^= 0x01;
                if let Some(c) = client {
                    let _ = proxy.send_to(&msg, c);
                }
            } else {
                client = Some(from);
                let _ = proxy.send_to(&msg, upstream);
            }
        }
    });

    let i = initiator(&creds, "alice.json", &proxy_addr, &[]);
    let r = finish(r);
    relay.join().unwrap();
    assert!(!i.status.success());
    assert!(String::from_utf8_lossy(&i.stderr).contains("AuthenticationFailed"));
    assert!(!r.status.success());
}

#[test]
fn keygen_writes_loadable_files() {
    let creds = Creds::new("signature", "static-dh");
    let text = std::fs::read_to_string(creds.path("bob.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["kind"], "static_dh");
    assert!(v["private_key_hex"].is_string());
    assert!(Path::new(&creds.path("bob.pub.json")).exists());
}
