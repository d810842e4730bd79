use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use gradleak::experiment::ExperimentReport;

fn gradleak(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gradleak"))
        .args(args)
        .env_remove("PORT")
        .output()
        .expect("run gradleak")
}

#[test]
fn simulate_without_ldp_recovers_everything() {
    let out = gradleak(&[
        "simulate",
        "--mechanism",
        "none",
        "--model",
        "linear",
        "--users",
        "100",
        "--epochs",
        "1",
        "--seed",
        "42",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: ExperimentReport = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report.average_exp_hamming >= 0.99);
    assert_eq!(report.users, 100);
    assert_eq!(report.k, 0.5);
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let args = [
        "simulate",
        "--model",
        "svm",
        "--mechanism",
        "hybrid",
        "--epsilon",
        "3",
        "--users",
        "40",
        "--epochs",
        "2",
        "--seed",
        "5",
    ];
    let a = gradleak(&args);
    let b = gradleak(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn simulate_writes_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = gradleak(&[
        "simulate",
        "--model",
        "logistic",
        "--users",
        "10",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let report: ExperimentReport = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(report.users, 10);
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        &["simulate", "--model", "linear", "--mechanism", "duchi"][..],
        &[
            "simulate",
            "--model",
            "linear",
            "--mechanism",
            "laplace",
            "--epsilon",
            "0",
        ],
        &["simulate", "--model", "linear", "--users", "0"],
        &["simulate", "--model", "linear", "--k", "-1"],
        &["simulate", "--model", "perceptron"],
        &["sweep", "--model", "linear", "--mechanism", "duchi"],
        &[
            "sweep",
            "--model",
            "linear",
            "--epsilons",
            "1",
            "--seeds",
            "0",
        ],
    ] {
        let out = gradleak(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn runtime_errors_exit_two() {
    let out = gradleak(&[
        "simulate",
        "--model",
        "linear",
        "--out",
        "/nonexistent-dir/report.json",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_single_cell_and_row_parity() {
    let out = gradleak(&[
        "sweep",
        "--model",
        "linear",
        "--mechanism",
        "piecewise",
        "--epsilons",
        "2",
        "--seeds",
        "1",
        "--seed",
        "8",
        "--users",
        "30",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(
        lines[0],
        "epsilon,seed,final_cost,final_accuracy,avg_exp_hamming"
    );

    let single = gradleak(&[
        "simulate",
        "--model",
        "linear",
        "--mechanism",
        "piecewise",
        "--epsilon",
        "2",
        "--seed",
        "8",
        "--users",
        "30",
        "--format",
        "csv",
    ]);
    assert_eq!(String::from_utf8(single.stdout).unwrap(), text);
}

#[test]
fn sweep_shows_privacy_utility_trend() {
    let out = gradleak(&[
        "sweep",
        "--model",
        "linear",
        "--mechanism",
        "piecewise",
        "--epsilons",
        "0.5,8",
        "--seeds",
        "20",
        "--users",
        "100",
    ]);
    assert!(out.status.success());
    let mut reader = csv::Reader::from_reader(out.stdout.as_slice());
    let (mut low, mut high) = (Vec::new(), Vec::new());
    for row in reader.records() {
        let row = row.unwrap();
        let eps: f64 = row[0].parse().unwrap();
        let e: f64 = row[4].parse().unwrap();
        if eps == 0.5 {
            low.push(e)
        } else {
            high.push(e)
        }
    }
    assert_eq!((low.len(), high.len()), (20, 20));
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&high) > mean(&low));
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port()
}

fn http(port: u16, request: &str) -> Option<String> {
    let mut stream = TcpStream::connect(("127.0.0.1", port)).ok()?;
    stream.set_read_timeout(Some(Duration::from_secs(5))).ok()?;
    stream.write_all(request.as_bytes()).ok()?;
    let mut buf = String::new();
    stream.read_to_string(&mut buf).ok()?;
    Some(buf)
}

#[cfg(unix)]
#[test]
fn serve_honours_port_env_and_shuts_down_gracefully() {
    let port = free_port();
    let dir = tempfile::tempdir().unwrap();
    let snapshot = dir.path().join("sessions.json");
    let static_dir = dir.path().join("ui");
    std::fs::create_dir(&static_dir).unwrap();
    std::fs::write(static_dir.join("index.html"), "<html>ui</html>").unwrap();

    let mut child = Command::new(env!("CARGO_BIN_EXE_gradleak"))
        .args(["serve", "--port", "1", "--host", "127.0.0.1"])
        .arg("--snapshot-file")
        .arg(&snapshot)
        .arg("--static-dir")
        .arg(&static_dir)
        .env("PORT", port.to_string())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();

    let deadline = Instant::now() + Duration::from_secs(20);
    let health = loop {
        if let Some(resp) = http(
            port,
            "GET /api/v1/health HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n",
        ) {
            break resp;
        }
        assert!(Instant::now() < deadline, "server did not start");
        std::thread::sleep(Duration::from_millis(50));
    };
    assert!(health.starts_with("HTTP/1.1 200"), "{health}");

    let body = r#"{"model":"svm","mechanism":"none","seed":1}"#;
    let created = http(
        port,
        &format!(
            "POST /api/v1/sessions HTTP/1.1\r\nHost: x\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        ),
    )
    .unwrap();
    assert!(created.starts_with("HTTP/1.1 201"), "{created}");

    let index = http(
        port,
        "GET /index.html HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n",
    )
    .unwrap();
    assert!(index.contains("<html>ui</html>"));

    let killed = Command::new("kill")
        .arg("-TERM")
        .arg(child.id().to_string())
        .status()
        .unwrap();
    assert!(killed.success());
    let status = child.wait().unwrap();
    assert!(status.success(), "{status:?}");

    let saved: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&snapshot).unwrap()).unwrap();
    assert_eq!(saved.as_object().unwrap().len(), 1);
}
