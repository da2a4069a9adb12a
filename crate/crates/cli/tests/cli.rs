use std::path::Path;
use std::process::{Command, Output};

use plasmon_core::io::CsvTable;

fn plasmon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plasmon")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.ptag"), dir.path().join("b.ptag"));
    for out in [&a, &b] {
        let o = plasmon(&["simulate", "--duration", "2s", "--seed", "7", "-o", path(out)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let bytes = std::fs::read(&a).unwrap();
    assert!(bytes.len() > 32);
    assert_eq!(bytes, std::fs::read(&b).unwrap());

    let c = dir.path().join("c.ptag");
    plasmon(&["simulate", "--duration", "2s", "--seed", "8", "-o", path(&c)]);
    assert_ne!(bytes, std::fs::read(&c).unwrap());

    let csv = |seed| plasmon(&["analyze", "waveform", "--tags", path(&a), "--seed", seed]).stdout;
    assert_eq!(csv("7"), csv("7"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&plasmon(&["simulate", "--bogus"])), 2);
    assert_eq!(code(&plasmon(&["simulate", "--duration", "60", "-o", path(&dir.path().join("x"))])), 2);

    let bad = dir.path().join("bad.conf");
    std::fs::write(&bad, "source.pair_rate = 2000\nsource.bogus = 1\n").unwrap();
    let o = plasmon(&["simulate", "--config", path(&bad), "-o", path(&dir.path().join("y"))]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("source.bogus"));
    std::fs::write(&bad, "source.pair_rate = -5\n").unwrap();
    assert_eq!(code(&plasmon(&["config", "--config", path(&bad)])), 3);

    let missing = dir.path().join("missing.ptag");
    assert_eq!(code(&plasmon(&["analyze", "g2", "--tags", path(&missing)])), 4);
    let garbage = dir.path().join("garbage.ptag");
    std::fs::write(&garbage, b"not a tag file").unwrap();
    assert_eq!(code(&plasmon(&["analyze", "g2", "--tags", path(&garbage)])), 4);

    let single = dir.path().join("single.conf");
    std::fs::write(&single, "optics.split_herald = false\n").unwrap();
    let tags = dir.path().join("single.ptag");
    let o = plasmon(&["simulate", "--config", path(&single), "--duration", "1s", "-o", path(&tags)]);
    assert_eq!(code(&o), 0);
    assert_eq!(code(&plasmon(&["analyze", "cs", "--tags", path(&tags), "--out-dir", path(dir.path())])), 5);
}

fn peak_near_zero(file: &Path) -> f64 {
    let t = CsvTable::parse(&std::fs::read(file).unwrap()).unwrap();
    assert_eq!(t.header, ["tau_ns", "value", "error"]);
    let tau = t.column_f64("tau_ns").unwrap();
    let c = t.column_f64("value").unwrap();
    tau.iter().zip(&c).filter(|(t, c)| t.abs() <= 25.0 && c.is_finite()).map(|(_, c)| *c).fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn cauchy_schwarz_curves_per_bin_width() {
    let dir = tempfile::tempdir().unwrap();
    let tags = dir.path().join("run.ptag");
    assert_eq!(code(&plasmon(&["simulate", "--duration", "60s", "-o", path(&tags)])), 0);
    let o = plasmon(&["analyze", "cs", "--tags", path(&tags), "--bins", "1,2,4,8", "--out-dir", path(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let peaks: Vec<f64> = ["1", "2", "4", "8"].iter().map(|b| peak_near_zero(&dir.path().join(format!("cs_{b}ns.csv")))).collect();
    assert!(peaks.windows(2).all(|w| w[1] < w[0]), "{peaks:?}");
    assert!(peaks[3] > 1.0);
}

#[test]
fn repro_table1() {
    let dir = tempfile::tempdir().unwrap();
    let o = plasmon(&["repro", "table1", "--out-dir", path(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let t = CsvTable::parse(&std::fs::read(dir.path().join("table1.csv")).unwrap()).unwrap();
    assert_eq!(t.rows.len(), 4);
    assert_eq!(&t.rows[0][..2], ["unshaped", "incident"]);
    let g = t.column_f64("g2").unwrap();
    let e = t.column_f64("error").unwrap();
    assert!((g[0] - 0.019).abs() <= 3.0 * e[0], "{} ± {}", g[0], e[0]);
    assert!(g.iter().zip(&e).all(|(g, e)| *g >= 0.0 && *g < 0.2 && *e > 0.0));
}

#[test]
fn spectrum_and_hom_commands_write_csv() {
    let o = plasmon(&["spectrum", "bethe", "--from", "795", "--to", "795"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let t = CsvTable::parse(&o.stdout).unwrap();
    assert_eq!(t.rows.len(), 1);

    let o = plasmon(&["hom", "curve", "--delay", "8"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let t = CsvTable::parse(&o.stdout).unwrap();
    assert_eq!(t.rows.len(), 241);

    let o = plasmon(&["config"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("source.pair_rate"));
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("echo.conf");
    std::fs::write(&f, &text).unwrap();
    assert_eq!(plasmon(&["config", "--config", path(&f)]).stdout, text.as_bytes());
}
