use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SUBCOMMANDS: &[&str] = &[
    "ingest",
    "preprocess",
    "train-embeddings",
    "seeds",
    "gen-we",
    "gen-cs",
    "merge",
    "sweep",
    "featurize",
    "train",
    "evaluate",
    "compare",
    "report",
    "synthesize",
];

fn bin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_libertylex"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Set `UPDATE_GOLDEN=1` to rewrite the expected help texts.
#[test]
fn help_matches_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    let mut names = vec![None];
    names.extend(SUBCOMMANDS.iter().map(|s| Some(*s)));
    for name in names {
        let args: Vec<&str> = name.into_iter().chain(["--help"]).collect();
        let out = bin(dir.path(), &args);
        assert!(out.status.success());
        let text = String::from_utf8(out.stdout).unwrap();
        let path = golden_dir().join(format!("{}.txt", name.unwrap_or("main")));
        if update {
            std::fs::create_dir_all(golden_dir()).unwrap();
            std::fs::write(&path, &text).unwrap();
        } else {
            let expected = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing {}", path.display()));
            assert_eq!(text, expected, "help text for {:?} changed", name);
        }
    }
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bin(dir.path(), &["gen-cs"]).status.code(), Some(2));
    assert_eq!(bin(dir.path(), &["no-such-command"]).status.code(), Some(2));
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(dir.path(), &["gen-cs", "--dataset", "absent.jsonl", "--out", "x.tsv"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.jsonl"));
    assert!(!dir.path().join("x.tsv").exists());
}

#[test]
fn malformed_jsonl_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("d.jsonl"),
        "{\"id\":\"a\",\"text\":\"x\",\"label\":\"Libertarian\"}\n{not json\n",
    )
    .unwrap();
    let out = bin(dir.path(), &["gen-cs", "--dataset", "d.jsonl", "--scheme", "binary_side", "--out", "x.tsv"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":2"));
}

#[test]
fn empty_vocabulary_is_a_module_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("d.jsonl"),
        "{\"id\":\"a\",\"text\":\"alpha beta\",\"label\":\"Libertarian\"}\n{\"id\":\"b\",\"text\":\"gamma\",\"label\":\"Conservative\"}\n",
    )
    .unwrap();
    let out = bin(
        dir.path(),
        &["gen-cs", "--dataset", "d.jsonl", "--scheme", "binary_side", "--min-freq", "50", "--out", "x.tsv"],
    );
    assert_eq!(out.status.code(), Some(14), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn manifest_is_written_beside_the_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(
        dir.path(),
        &["--seed", "4", "synthesize", "--docs-per-class", "5", "--markers", "3", "--neutral", "10", "--out", "s.jsonl"],
    );
    assert!(out.status.success());
    let m = libertylex::manifest::RunManifest::load(&dir.path().join("s.jsonl.manifest.json")).unwrap();
    assert_eq!(m.command, "synthesize");
    assert_eq!(m.seeds.get("synthetic"), Some(&4));
    assert_eq!(m.outputs.len(), 1);
    assert_eq!(m.outputs[0].sha256, libertylex::digest::file_digest(&dir.path().join("s.jsonl")).unwrap());
}
