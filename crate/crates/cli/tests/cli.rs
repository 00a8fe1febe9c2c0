use std::path::{Path, PathBuf};
use std::process::Command;

fn corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn imp(args: &[&str], file: &Path) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_imp")).args(args).arg(file).output().expect("imp runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn programs() -> Vec<PathBuf> {
    let mut files = Vec::new();
    for dir in [corpus(), corpus().join("lint")] {
        for entry in std::fs::read_dir(dir).expect("corpus dir") {
            let path = entry.expect("entry").path();
            if matches!(path.extension().and_then(|e| e.to_str()), Some("imp" | "src")) {
                files.push(path);
            }
        }
    }
    files.sort();
    files
}

#[test]
fn json_dumps_reload_to_the_same_program() {
    let dir = std::env::temp_dir().join(format!("imp-json-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temp dir");
    let files = programs();
    assert!(files.len() >= 20, "{files:?}");
    for file in &files {
        let (code, json) = imp(&["--json", "check"], file);
        assert_eq!(code, 0, "{}", file.display());
        let dumped = dir.join(file.file_name().expect("name")).with_extension("json");
        std::fs::write(&dumped, &json).expect("write dump");
        let (code2, json2) = imp(&["--json", "check"], &dumped);
        assert_eq!((code2, &json2), (0, &json), "{}", file.display());
        assert_eq!(imp(&["check"], &dumped), imp(&["check"], file), "{}", file.display());
        assert_eq!(imp(&["run"], &dumped), imp(&["run"], file), "{}", file.display());
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn exit_codes() {
    let dir = std::env::temp_dir().join(format!("imp-exit-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temp dir");
    let bad = dir.join("bad.imp");
    std::fs::write(&bad, "(1, ").expect("write");
    assert_eq!(imp(&["check"], &bad).0, 2);
    assert_eq!(imp(&["check"], &dir.join("missing.imp")).0, 2);
    assert_eq!(imp(&["src-run"], &corpus().join("basic.imp")).0, 2);
    assert_eq!(imp(&["run"], &corpus().join("no_match.imp")).0, 1);
    assert_eq!(imp(&["diff"], &corpus().join("lint/incoherent.imp")).0, 3);
    assert_eq!(imp(&["lint"], &corpus().join("lint/looping.imp")).0, 0);
    assert_eq!(imp(&["lint", "--strict"], &corpus().join("lint/looping.imp")).0, 4);
    let (code, out) = imp(&["run"], &corpus().join("eq.src"));
    assert_eq!((code, out.trim()), (0, "(false, true)"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn source_encodings_reparse_as_core_programs() {
    let dir = std::env::temp_dir().join(format!("imp-enc-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temp dir");
    for name in ["eq.src", "show.src"] {
        let (code, out) = imp(&["src-elab"], &corpus().join(name));
        assert_eq!(code, 0);
        let body: Vec<&str> = out.lines().filter(|l| !l.starts_with(": ")).collect();
        let core = dir.join(name).with_extension("imp");
        std::fs::write(&core, body.join("\n")).expect("write");
        assert_eq!(imp(&["diff"], &core), imp(&["diff"], &corpus().join(name)), "{name}");
    }
    std::fs::remove_dir_all(&dir).ok();
}
