use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
method = "igogm"
horizon = 20
seed = 7

[schedule]
kind = "ogm-a"
a = 4.0

[problem]
name = "quadratic-random"
dimension = 6

[oracle]
policy = "random-unit-sphere"
levels = { kind = "constant", level = 0.01 }
"#;

fn cli(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_inexact-pep"))
        .current_dir(dir)
        .env_remove("INEXACT_PEP_OUT")
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .unwrap()
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect()
}

fn footer(path: &Path, name: &str) -> f64 {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{name},")))
        .unwrap_or_else(|| panic!("no {name} row in {}", path.display()))
        .parse()
        .unwrap()
}

#[test]
fn run_passes_and_repeats_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.toml"), CONFIG).unwrap();
    let first = cli(dir.path(), &["run", "exp.toml", "--out", "a"]);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    assert!(stdout(&first).starts_with("PASS igogm K=20"), "{}", stdout(&first));
    let second = cli(dir.path(), &["run", "exp.toml", "--out", "b"]);
    assert_eq!(second.status.code(), Some(0));
    for name in ["trajectory.csv", "bound.csv", "summary.txt"] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    assert_eq!(rows(&dir.path().join("a/trajectory.csv")).len(), 21);

    let reseeded = cli(dir.path(), &["run", "exp.toml", "--seed", "8", "--out", "c"]);
    assert_eq!(reseeded.status.code(), Some(0));
    assert_ne!(
        std::fs::read(dir.path().join("a/trajectory.csv")).unwrap(),
        std::fs::read(dir.path().join("c/trajectory.csv")).unwrap()
    );
}

#[test]
fn config_errors_exit_two_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (CONFIG.replace("seed = 7", "seed = 7\ncolour = 1"), "colour"),
        (CONFIG.replace("a = 4.0", "a = 1.0"), "schedule:"),
        (CONFIG.replace("level = 0.01", "level = -0.5"), "oracle.levels.level:"),
        (CONFIG.replace("horizon = 20", "horizon = 0"), "horizon:"),
    ];
    for (i, (text, needle)) in cases.iter().enumerate() {
        let name = format!("bad{i}.toml");
        std::fs::write(dir.path().join(&name), text).unwrap();
        let o = cli(dir.path(), &["run", &name]);
        assert_eq!(o.status.code(), Some(2), "{needle}");
        assert!(stderr(&o).contains(needle), "{needle}: {}", stderr(&o));
        assert!(!dir.path().join("out").exists());
    }
    let missing = cli(dir.path(), &["run", "nowhere.toml"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn degenerate_schedule_runs_with_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let text = CONFIG.replace("kind = \"ogm-a\"\na = 4.0", "kind = \"lambda\"\nlambda = [1.0]");
    std::fs::write(dir.path().join("ogm.toml"), text).unwrap();
    let o = cli(dir.path(), &["run", "ogm.toml"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"), "{}", stderr(&o));
    assert!(stdout(&o).contains("N/A"), "{}", stdout(&o));
}

#[test]
fn certify_exit_status_follows_the_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let ok = cli(dir.path(), &["certify", "--schedule", "ogm-a:4", "--k", "10"]);
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));
    assert!(stdout(&ok).starts_with("PASS"));
    assert_eq!(rows(&dir.path().join("out/certificate.csv")).len(), 1);

    let degenerate = cli(dir.path(), &["certify", "--schedule", "ogm", "--k", "10"]);
    assert_eq!(degenerate.status.code(), Some(1));
    let text = stdout(&degenerate) + &stderr(&degenerate);
    assert!(text.contains("FAIL") && text.contains("u = infinity"), "{text}");

    let random = cli(dir.path(), &["certify", "--k", "8", "--random", "12", "--seed", "3"]);
    assert_eq!(random.status.code(), Some(0));
    assert!(stdout(&random).contains("12/12 certificates verified"));
}

#[test]
fn schedule_improves_on_constant_levels() {
    let dir = tempfile::tempdir().unwrap();
    let power = cli(
        dir.path(),
        &[
            "schedule",
            "--model",
            "power-law",
            "--c2",
            "1",
            "--k",
            "10,40",
            "--out",
            "p",
        ],
    );
    assert_eq!(power.status.code(), Some(0), "{}", stderr(&power));
    let r10 = footer(&dir.path().join("p/schedule_k10.csv"), "improvement_ratio");
    let r40 = footer(&dir.path().join("p/schedule_k40.csv"), "improvement_ratio");
    assert!(r10 > 1.0 && r40 > r10, "{r10} {r40}");
    let table = rows(&dir.path().join("p/schedule_k10.csv"));
    assert_eq!(table.iter().filter(|r| r.len() == 6).count(), 10);

    let exp = cli(
        dir.path(),
        &["schedule", "--model", "exponential", "--k", "40", "--out", "e"],
    );
    assert_eq!(exp.status.code(), Some(0), "{}", stderr(&exp));
    let e40 = footer(&dir.path().join("e/schedule_k40.csv"), "improvement_ratio");
    assert!(e40 >= 1.0 && e40 < r40, "{e40} vs {r40}");

    let bad = cli(
        dir.path(),
        &["schedule", "--model", "power-law", "--c2", "-1", "--k", "10"],
    );
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn tradeoff_orders_rate_against_accumulated_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(dir.path(), &["tradeoff", "--a", "3,10,1000", "--k", "20"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = rows(&dir.path().join("out/tradeoff.csv"));
    let col = |i: usize| table.iter().map(|r| r[i].parse::<f64>().unwrap()).collect::<Vec<_>>();
    let (tau, sum_u) = (col(2), col(3));
    assert!(tau[0] < tau[1] && tau[1] < tau[2], "{tau:?}");
    assert!(sum_u[0] > sum_u[1] && sum_u[1] > sum_u[2], "{sum_u:?}");
    assert_eq!(rows(&dir.path().join("out/tradeoff_u.csv")).len(), 3 * 20);

    let bad = cli(dir.path(), &["tradeoff", "--a", "2"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn export_sdp_honours_the_output_variable() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_inexact-pep"))
        .current_dir(dir.path())
        .env("INEXACT_PEP_OUT", "sdp")
        .args(["export-sdp", "--target", "primal-P", "--k", "1", "--b", "0.1"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("sdp/pep_primal-P_k1.dat-s")).unwrap();
    let header: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('"') && !l.starts_with('*'))
        .take(2)
        .collect();
    assert_eq!(header[0].trim(), "5");
    assert_eq!(header[1].trim(), "3");

    let dual = cli(
        dir.path(),
        &["export-sdp", "--target", "dual-D", "--k", "3", "--b", "0,0.1,0.2"],
    );
    assert_eq!(dual.status.code(), Some(0), "{}", stderr(&dual));
    assert!(dir.path().join("out/pep_dual-D_k3.dat-s").exists());

    let wrong = cli(
        dir.path(),
        &["export-sdp", "--target", "dual-D", "--k", "3", "--b", "0.1,0.2"],
    );
    assert_eq!(wrong.status.code(), Some(2));
}
