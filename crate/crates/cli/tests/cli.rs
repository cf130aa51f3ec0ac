use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

fn reduxcorr(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reduxcorr"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = reduxcorr(args, cwd);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// A small synthetic corpus shared by the tests in this file.
fn corpus() -> &'static Path {
    static DIR: OnceLock<(tempfile::TempDir, PathBuf)> = OnceLock::new();
    &DIR.get_or_init(|| {
        let tmp = tempfile::tempdir().unwrap();
        fs::write(
            tmp.path().join("synth.conf"),
            "seed=7\nsynth_conversations=LONG:300,SHORT:60\n",
        )
        .unwrap();
        ok(&["synth", "--config", "synth.conf", "--out", "corpus"], tmp.path());
        let root = tmp.path().join("corpus");
        (tmp, root)
    })
    .1
}

#[test]
fn failure_exits_nonzero_with_one_line() {
    let tmp = tempfile::tempdir().unwrap();
    let out = reduxcorr(&["extract", "--config", "missing.conf"], tmp.path());
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("reduxcorr: ") && err.contains("missing.conf"), "{err}");

    fs::write(tmp.path().join("bad.conf"), "colour=blue\n").unwrap();
    let out = reduxcorr(&["train", "--config", "bad.conf"], tmp.path());
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains("colour"), "{err}");
}

#[test]
fn extract_writes_one_matrix_per_channel_and_is_repeatable() {
    let root = corpus();
    fs::write(
        root.join("long.conf"),
        "manifest=long_manifest.csv\nout=extract_a\n",
    )
    .unwrap();
    fs::write(
        root.join("long_manifest.csv"),
        "conversation_id,wav_path,annotated_start_ms,annotated_end_ms\nLONG,audio/LONG.wav,0,300000\n",
    )
    .unwrap();
    let printed = ok(&["extract", "--config", "long.conf"], root);
    let files: Vec<&str> = printed.lines().filter(|l| l.ends_with(".csv")).collect();
    assert_eq!(files.len(), 2, "{printed}");
    for f in &files {
        let text = fs::read_to_string(root.join(f)).unwrap();
        assert_eq!(text.lines().count(), 30_000 + 1, "{f}");
        assert!(text.starts_with("conversation,channel,frame,tl_A,"));
    }
    ok(&["extract", "--config", "long.conf", "--out", "extract_b"], root);
    for ch in ["left", "right"] {
        let name = format!("features/LONG_{ch}.csv");
        let a = fs::read(root.join("extract_a").join(&name)).unwrap();
        let b = fs::read(root.join("extract_b").join(&name)).unwrap();
        assert!(a == b, "{name} differs between runs");
    }
}

#[test]
fn agreement_of_a_file_with_itself_is_diagonal() {
    let root = corpus();
    fs::write(root.join("self.conf"), "labels_b_dir=labels\nout=self_agreement\n").unwrap();
    let printed = ok(&["agreement", "--config", "self.conf"], root);
    assert!(printed.lines().any(|l| l == "r=1.000000"), "{printed}");
    let confusion = fs::read_to_string(root.join("self_agreement/confusion.csv")).unwrap();
    let mut lines = confusion.lines();
    assert_eq!(lines.next(), Some("a\\b,0,1,2,3"));
    for (i, line) in lines.take(4).enumerate() {
        let cells: Vec<usize> = line.split(',').skip(1).map(|c| c.parse().unwrap()).collect();
        for (j, c) in cells.iter().enumerate() {
            assert!(i == j || *c == 0, "{confusion}");
        }
        assert!(cells[i] > 0, "{confusion}");
    }
}

#[test]
fn functions_report_every_tag() {
    let root = corpus();
    fs::write(root.join("fn.conf"), "out=functions_run\n").unwrap();
    ok(&["functions", "--config", "fn.conf"], root);
    let text = fs::read_to_string(root.join("functions_run/function_stats.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let b = header.iter().position(|h| *h == "bonferroni").expect("bonferroni column");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 11);
    for r in &rows {
        assert_eq!(r.len(), header.len());
        assert!(["0", "1", "NA"].contains(&r[b]), "{r:?}");
    }
    assert!(root.join("functions_run/distribution.csv").exists());
}

#[test]
fn correlate_reports_all_columns() {
    let root = corpus();
    fs::write(root.join("corr.conf"), "out=corr_run\n").unwrap();
    ok(&["extract", "--config", "corr.conf"], root);
    ok(&["correlate", "--config", "corr.conf"], root);
    let text = fs::read_to_string(root.join("corr_run/correlations.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("language,kind,span,r,n"));
    assert_eq!(text.lines().count(), 85 + 1);
}
