//! Control protocol v1 and the OSC control addresses, exercised against a
//! running `improv serve`.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, UdpSocket};
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use improv_core::conductor::EVENT_LOG_FILE;
use improv_core::fixtures::build_fixture;
use improv_core::netio::{encode, OscArg, OscMessage, OscPacket};
use serde_json::{json, Value};

struct Client {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl Client {
    fn connect(addr: &str) -> Self {
        let s = TcpStream::connect(addr).unwrap();
        s.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
        Self {
            writer: s.try_clone().unwrap(),
            reader: BufReader::new(s),
        }
    }

    fn line(&mut self) -> Value {
        let mut l = String::new();
        self.reader.read_line(&mut l).unwrap();
        serde_json::from_str(&l).unwrap_or_else(|e| panic!("{e}: {l:?}"))
    }

    /// Next line that is not a pushed event.
    fn reply(&mut self) -> Value {
        loop {
            let v = self.line();
            if v.get("event").is_none() {
                return v;
            }
        }
    }

    fn send_raw(&mut self, s: &str) {
        self.writer.write_all(s.as_bytes()).unwrap();
        self.writer.write_all(b"\n").unwrap();
    }

    fn call(&mut self, v: Value) -> Value {
        self.send_raw(&v.to_string());
        self.reply()
    }
}

struct Server {
    child: Child,
    control: String,
    osc: String,
    lines: std::io::Lines<BufReader<std::process::ChildStdout>>,
}

fn start(dir: &std::path::Path) -> Server {
    let fx = build_fixture(dir, 5.0).unwrap();
    let text = std::fs::read_to_string(&fx.session)
        .unwrap()
        .replace("[routing]\n", "[routing]\nosc_listen = \"127.0.0.1:0\"\n");
    std::fs::write(&fx.session, text).unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_improv"))
        .args(["serve", "--config", fx.session.to_str().unwrap(), "--control", "127.0.0.1:0"])
        .args(["--input", fx.performer.to_str().unwrap(), "--loop"])
        .args(["--out", dir.join("out").to_str().unwrap()])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
    let control = lines.next().unwrap().unwrap().strip_prefix("control listening on ").unwrap().to_string();
    let osc = lines.next().unwrap().unwrap().strip_prefix("osc listening on ").unwrap().to_string();
    Server {
        child,
        control,
        osc,
        lines,
    }
}

fn interrupt(child: &Child) {
    let ok = Command::new("kill").args(["-INT", &child.id().to_string()]).status().unwrap();
    assert!(ok.success());
}

#[test]
fn control_session_over_tcp_and_osc() {
    let tmp = tempfile::tempdir().unwrap();
    let mut srv = start(tmp.path());
    let mut c = Client::connect(&srv.control);

    assert_eq!(c.line(), json!({"protocol": "improv-control", "version": 1}));
    assert_eq!(c.call(json!({"id": 1, "op": "ping"})), json!({"id": 1, "ok": true, "op": "pong"}));

    let r = c.call(json!({"id": 2, "op": "set_weights", "agent": "muse", "weights": [1, 0, 0, 0]}));
    assert_eq!(r["ok"], true, "{r}");
    assert_eq!((r["id"].clone(), r["op"].clone(), r["agent"].clone()), (json!(2), json!("set_weights"), json!("muse")));
    assert_eq!(r["value"], json!([1.0, 0.0, 0.0, 0.0]));
    assert_eq!(r["clamped"], false);
    assert!(r["t"].as_f64().unwrap() >= 0.0);

    let r = c.call(json!({"op": "set_weights", "agent": "muse", "weights": [2, 0.5, 0.5, 0.5]}));
    assert_eq!((r["value"].clone(), r["clamped"].clone()), (json!([1.0, 0.5, 0.5, 0.5]), json!(true)), "{r}");

    let r = c.call(json!({"op": "set_density", "agent": "gen", "value": -5}));
    assert_eq!((r["value"].clone(), r["clamped"].clone()), (json!(0.0), json!(true)), "{r}");

    let code = |r: &Value| r["error"]["code"].as_str().unwrap_or("").to_string();
    let r = c.call(json!({"id": "x", "op": "trigger_scene", "index": 99}));
    assert_eq!((r["ok"].clone(), r["id"].clone(), code(&r)), (json!(false), json!("x"), "unknown_scene".into()), "{r}");
    let r = c.call(json!({"op": "set_density", "agent": "muse", "value": 3}));
    assert_eq!(code(&r), "not_applicable", "{r}");
    let r = c.call(json!({"op": "set_enable", "agent": "zed", "enabled": true}));
    assert_eq!(code(&r), "unknown_agent", "{r}");
    let r = c.call(json!({"op": "set_weights", "agent": "muse", "weights": [0, 0, 0, 0]}));
    assert_eq!(code(&r), "invalid_value", "{r}");
    c.send_raw("this is not json");
    assert_eq!(code(&c.reply()), "bad_request");
    let r = c.call(json!({"op": "warp_drive"}));
    assert_eq!(code(&r), "bad_request", "{r}");

    // OSC control: weights reach the session and show up in state.
    let udp = UdpSocket::bind("127.0.0.1:0").unwrap();
    let msg = OscMessage::new(
        "/revival/agent/muse/weights",
        [0.1f32, 0.2, 0.3, 0.4].into_iter().map(OscArg::Float).collect(),
    );
    udp.send_to(&encode(&OscPacket::Message(msg)).unwrap(), &srv.osc).unwrap();
    let deadline = Instant::now() + Duration::from_secs(5);
    loop {
        let st = c.call(json!({"op": "state"}));
        let w: Vec<f64> = st["state"]["agents"]["muse"]["weights"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_f64().unwrap())
            .collect();
        if w.iter().zip([0.1, 0.2, 0.3, 0.4]).all(|(a, b)| (a - b).abs() < 1e-6) {
            assert_eq!(st["state"]["agents"]["gen"]["density"], 0.0);
            break;
        }
        assert!(Instant::now() < deadline, "OSC weights never applied: {st}");
        std::thread::sleep(Duration::from_millis(50));
    }
    let scene = OscMessage::new("/revival/scene", vec![OscArg::Int(1)]);
    udp.send_to(&encode(&OscPacket::Message(scene)).unwrap(), &srv.osc).unwrap();

    let r = c.call(json!({"op": "subscribe"}));
    assert_eq!(r["ok"], true);
    let t0 = Instant::now();
    let mut events = Vec::new();
    while events.len() < 3 {
        let v = c.line();
        if v["event"] == "meters" {
            events.push(v);
        }
    }
    assert!(t0.elapsed() < Duration::from_secs(3));
    let last = &events[2]["snapshot"];
    assert_eq!(last["scene"], 1, "{last}");
    assert_eq!(last["scene_name"], "converse");
    assert!(last["sources"]["performer"]["loudness_db"].is_number());

    interrupt(&srv.child);
    let status = srv.child.wait().unwrap();
    assert_eq!(status.code(), Some(0));
    let rest: Vec<String> = srv.lines.by_ref().map(|l| l.unwrap()).collect();
    assert!(rest.iter().any(|l| l.starts_with("stopped after")), "{rest:?}");

    let log = std::fs::read_to_string(tmp.path().join("out").join(EVENT_LOG_FILE)).unwrap();
    let recs: Vec<Value> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(recs.last().unwrap()["kind"], "session_ended");
    let controls = recs.iter().filter(|r| r["kind"] == "control").count();
    assert!(controls >= 9, "{controls} control records");
    assert!(recs
        .iter()
        .any(|r| r["kind"] == "scene_changed" && r["payload"]["cause"] == "control" && r["payload"]["index"] == 1));
    for id in ["muse", "gen", "nav"] {
        assert!(tmp.path().join("out").join(format!("response_{id}.wav")).exists());
    }
}

#[test]
fn second_client_and_early_disconnect() {
    let tmp = tempfile::tempdir().unwrap();
    let mut srv = start(tmp.path());
    {
        let mut a = Client::connect(&srv.control);
        a.line();
        // Dropped without a request.
    }
    let mut b = Client::connect(&srv.control);
    b.line();
    let r = b.call(json!({"op": "set_enable", "agent": "nav", "enabled": false}));
    assert_eq!(r["ok"], true, "{r}");
    let st = b.call(json!({"op": "state"}));
    assert_eq!(st["state"]["agents"]["nav"]["enabled"], false);
    assert_eq!(st["state"]["scenes"], json!(["listen", "converse", "tutti"]));
    interrupt(&srv.child);
    assert_eq!(srv.child.wait().unwrap().code(), Some(0));
}
