use std::fs;
use std::io::{BufRead, BufReader};
use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_migp");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("RUST_LOG").output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Site {
    dir: TempDir,
}

impl Site {
    /// A directory with a synthetic corpus and a config using `extra` lines.
    fn new(extra: &str) -> Site {
        let dir = tempfile::tempdir().unwrap();
        let site = Site { dir };
        ok(&[
            "synth", "--seed", "5", "--size", "500", "--corpus-out", p(&site.path("corpus.txt")),
            "--corpus-size", "400",
        ]);
        site.write_config(extra);
        site
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write_config(&self, extra: &str) {
        let text = format!("store = store.bin\nkey = key.txt\nsidecar = store.sidecar\nprefix_bits = 8\n{extra}");
        fs::write(self.path("migp.conf"), text).unwrap();
    }

    fn config(&self) -> PathBuf {
        self.path("migp.conf")
    }

    fn build(&self, seed: &str) -> Output {
        run(&["build", "--config", p(&self.config()), "--corpus", p(&self.path("corpus.txt")), "--seed", seed])
    }

    fn first_credential(&self) -> (String, String) {
        let text = fs::read_to_string(self.path("corpus.txt")).unwrap();
        let (u, w) = text.lines().next().unwrap().split_once('\t').unwrap();
        (u.to_owned(), w.to_owned())
    }

    fn scalar_hex(&self) -> String {
        let text = fs::read_to_string(self.path("key.txt")).unwrap();
        text.lines()
            .find_map(|l| l.strip_prefix("scalar"))
            .map(|v| v.trim_start_matches([' ', '=']).trim().to_owned())
            .unwrap()
    }
}

struct Server {
    child: Child,
    endpoint: String,
}

impl Server {
    fn start(config: &Path) -> Server {
        let mut child = Command::new(BIN)
            .args(["serve", "--config", p(config), "--listen", "127.0.0.1:0"])
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let endpoint = line.trim().strip_prefix("listening on ").expect("listening line").to_owned();
        Server { child, endpoint }
    }

    fn query(&self, username: &str, password: &str) -> (i32, String) {
        let out = run(&["query", "--endpoint", &self.endpoint, "--username", username, "--password", password]);
        (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap())
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

#[test]
fn clean_reports_counts_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.txt");
    fs::write(&raw, "alice\thunter2\nno tab here\n\tpw\nbob\t\ncarol\tpässword\nbob\tsecret\n").unwrap();
    let once = dir.path().join("once.txt");
    let report = dir.path().join("report.txt");
    ok(&["clean", "--in", p(&raw), "--out", p(&once), "--report", p(&report)]);
    let cleaned = fs::read_to_string(&once).unwrap();
    assert_eq!(cleaned, "alice\thunter2\nbob\tsecret\n");
    let report = fs::read_to_string(&report).unwrap();
    for line in ["total\t6", "kept\t2", "malformed\t1", "empty_username\t1", "empty_password\t1", "non_ascii\t1"] {
        assert!(report.contains(line), "missing {line:?} in {report}");
    }
    let twice = dir.path().join("twice.txt");
    ok(&["clean", "--in", p(&once), "--out", p(&twice)]);
    assert_eq!(fs::read_to_string(&twice).unwrap(), cleaned);
}

#[test]
fn clean_accepts_empty_input() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.txt");
    fs::write(&raw, "").unwrap();
    let out = dir.path().join("out.txt");
    let r = run(&["clean", "--in", p(&raw), "--out", p(&out)]);
    assert!(r.status.success());
    assert_eq!(fs::read_to_string(&out).unwrap(), "");
    assert!(String::from_utf8_lossy(&r.stderr).contains("kept\t0"));
}

#[test]
fn synth_is_deterministic_and_mine_recovers_the_plant() {
    let dir = tempfile::tempdir().unwrap();
    let gen = |tag: &str| {
        let pairs = dir.path().join(format!("pairs{tag}.txt"));
        let dist = dir.path().join(format!("dist{tag}.txt"));
        ok(&[
            "synth", "--seed", "11", "--size", "800", "--out", p(&dist), "--pairs-out", p(&pairs), "--plant",
            "ins:#:1", "--plant-rate", "0.5",
        ]);
        (fs::read(&dist).unwrap(), fs::read(&pairs).unwrap(), pairs)
    };
    let (d1, p1, pairs) = gen("a");
    let (d2, p2, _) = gen("b");
    assert_eq!(d1, d2);
    assert_eq!(p1, p2);

    let rules = dir.path().join("mined.rules");
    ok(&["mine", "--pairs", p(&pairs), "--max-rules", "1", "--out", p(&rules)]);
    let text = fs::read_to_string(&rules).unwrap();
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#') && !l.is_empty()).collect();
    assert_eq!(body.len(), 1);
    assert!(body[0].ends_with("\tins:#:1"), "{text}");
}

#[test]
fn mine_rejects_zero_rules() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = dir.path().join("pairs.txt");
    fs::write(&pairs, "abc\tabc1\n").unwrap();
    let r = run(&["mine", "--pairs", p(&pairs), "--max-rules", "0", "--out", p(&dir.path().join("o"))]);
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn build_is_deterministic_under_a_seed() {
    let a = Site::new("");
    let b = Site::new("");
    assert!(a.build("7").status.success());
    assert!(b.build("7").status.success());
    assert_eq!(fs::read(a.path("store.bin")).unwrap(), fs::read(b.path("store.bin")).unwrap());
}

#[test]
fn blocklisting_shrinks_the_store() {
    let plain = Site::new("");
    let blocked = Site::new("beta = 20\n");
    let stats = |o: Output| {
        assert!(o.status.success());
        let text = String::from_utf8(o.stdout).unwrap();
        let row: Vec<String> = text.lines().nth(1).unwrap().split('\t').map(str::to_owned).collect();
        let entries: u64 = row[2].parse().unwrap();
        let unblocked: u64 = row[7].parse().unwrap();
        (entries, unblocked)
    };
    let (e0, u0) = stats(plain.build("1"));
    let (e1, u1) = stats(blocked.build("1"));
    assert_eq!(e0, u0);
    assert_eq!(u1, e0);
    assert!(e1 < e0, "{e1} vs {e0}");
}

#[test]
fn key_file_is_private_and_never_printed() {
    let site = Site::new("");
    let build = site.build("3");
    assert!(build.status.success());
    let mode = fs::metadata(site.path("key.txt")).unwrap().permissions().mode() & 0o777;
    assert_eq!(mode, 0o600);
    let scalar = site.scalar_hex();
    assert_eq!(scalar.len(), 64);
    let rotate = run(&["rotate", "--config", p(&site.config()), "--seed", "4", "--log-level", "trace"]);
    assert!(rotate.status.success());
    for out in [&build, &rotate] {
        for stream in [&out.stdout, &out.stderr] {
            assert!(!String::from_utf8_lossy(stream).contains(&scalar));
        }
    }
    let rotated = site.scalar_hex();
    for stream in [&rotate.stdout, &rotate.stderr] {
        assert!(!String::from_utf8_lossy(stream).contains(&rotated));
    }
}

#[test]
fn serve_and_query_exit_codes() {
    let site = Site::new("");
    assert!(site.build("2").status.success());
    let server = Server::start(&site.config());
    let (u, w) = site.first_credential();
    assert_eq!(server.query(&u, &w), (3, "match\n".to_owned()));
    let (code, text) = server.query(&u, &format!("{w}7"));
    assert_eq!(code, 2, "{text}");
    assert!(text.starts_with("similar"));
    assert_eq!(server.query(&u, "definitely-not-breached-Qz"), (0, "none\n".to_owned()));
    assert_eq!(server.query("nobody@example.org", &w).0, 0);
}

#[test]
fn rotation_bumps_epoch_and_keeps_answers() {
    let site = Site::new("");
    assert!(site.build("2").status.success());
    let before = fs::read(site.path("store.bin")).unwrap();
    let out = ok(&["rotate", "--config", p(&site.config()), "--seed", "8"]);
    assert!(out.starts_with("rotated to epoch 1 "), "{out}");
    assert_ne!(fs::read(site.path("store.bin")).unwrap(), before);
    assert!(!site.path("key.txt.next").exists());
    let server = Server::start(&site.config());
    let (u, w) = site.first_credential();
    assert_eq!(server.query(&u, &w).0, 3);
    drop(server);
    let out = ok(&["rotate", "--config", p(&site.config()), "--seed", "9"]);
    assert!(out.starts_with("rotated to epoch 2 "), "{out}");
}

#[test]
fn rotation_needs_the_sidecar() {
    let site = Site::new("");
    assert!(site.build("2").status.success());
    fs::remove_file(site.path("store.sidecar")).unwrap();
    let r = run(&["rotate", "--config", p(&site.config())]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("sidecar"));
}

#[test]
fn serve_rejects_a_mismatched_config() {
    let site = Site::new("");
    assert!(site.build("2").status.success());
    site.write_config("entry_mode = flag-byte\n");
    let r = run(&["serve", "--config", p(&site.config()), "--listen", "127.0.0.1:0"]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("entry mode"));
}

#[test]
fn attack_prints_the_grid_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let tsv = dir.path().join("rows.tsv");
    let args = [
        "attack", "--synth-size", "2000", "--targets", "50", "--folds", "5", "--q-grid", "10,100", "--tsv", p(&tsv),
    ];
    let first = ok(&args);
    let rows = fs::read_to_string(&tsv).unwrap();
    assert_eq!(ok(&args), first);
    assert_eq!(fs::read_to_string(&tsv).unwrap(), rows);
    let lines: Vec<&str> = rows.lines().collect();
    assert_eq!(lines[0], "n\tbeta\tq\tm\tsuccess_pct\tstd_pct\ttargets\tseed");
    assert_eq!(lines.len(), 1 + 2 * 2);
    for l in &lines[1..] {
        let pct: f64 = l.split('\t').nth(4).unwrap().parse().unwrap();
        assert!((0.0..=100.0).contains(&pct));
    }
}

#[test]
fn calibrate_persists_into_the_config() {
    let site = Site::new("# tuned below\n");
    let out = ok(&["calibrate", "--backend", "salted", "--target-ms", "20", "--config", p(&site.config())]);
    let bits: u8 = out.trim().strip_prefix("salt_bits = ").unwrap().parse().unwrap();
    assert!((1..=32).contains(&bits));
    let text = fs::read_to_string(site.config()).unwrap();
    assert!(text.contains("# tuned below\n"));
    assert!(text.contains("hash = salted\n"));
    assert!(text.contains(&format!("salt_bits = {bits}\n")));
    assert!(site.build("1").status.success());
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["bogus"]).status.code(), Some(1));
    assert_eq!(run(&["query", "--endpoint", "http://127.0.0.1:1"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
