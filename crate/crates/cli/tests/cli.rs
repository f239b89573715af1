use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_mbtgen");

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn mbtgen(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn files(dir: &Path, prefix: &str) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with(prefix))
        .collect();
    names.sort();
    names
}

fn generate(model: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["generate", "--model", model, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    mbtgen(&args)
}

#[test]
fn validate_exit_codes() {
    assert_eq!(
        code(&mbtgen(&["validate", "--model", &fixture("facebook_youtube.xml")])),
        0
    );

    let bad = mbtgen(&["validate", "--model", &fixture("determinism_defect.xml")]);
    assert_eq!(code(&bad), 1);
    let shown = format!(
        "{}{}",
        String::from_utf8_lossy(&bad.stdout),
        String::from_utf8_lossy(&bad.stderr)
    );
    assert!(shown.contains("DeterminismViolation state=S1 event=Swipe"), "{shown}");
    assert!(shown.contains("at transitions HomeView:5, HomeView:7"), "{shown}");

    assert_eq!(code(&mbtgen(&["validate", "--model", "/nonexistent/model.xml"])), 2);
}

#[test]
fn unparsable_model_is_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("broken.xml");
    std::fs::write(&path, "<Model><Application").unwrap();
    assert_eq!(code(&mbtgen(&["validate", "--model", path.to_str().unwrap()])), 2);
}

#[test]
fn generate_writes_scripts_and_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let run = generate(&fixture("facebook_youtube.xml"), &out, &["--max-transitions", "6"]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(files(&out, "test_").len(), 6);
    assert_eq!(files(&out, "report"), ["report.csv", "report.json"]);
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!((row[0], row[2], row[3], row[5]), ("219dcac4", "6", "6", "59"));
    assert!(String::from_utf8_lossy(&run.stdout).contains("wrote 6 test case(s)"));
}

#[test]
fn channel_policies() {
    let tmp = tempfile::tempdir().unwrap();
    let relaxed = tmp.path().join("relaxed");
    assert_eq!(
        code(&generate(
            &fixture("send_receive.xml"),
            &relaxed,
            &["--policy", "relaxed"]
        )),
        0
    );
    assert_eq!(files(&relaxed, "test_").len(), 2);
    let strict = tmp.path().join("strict");
    assert_eq!(
        code(&generate(
            &fixture("send_receive.xml"),
            &strict,
            &["--policy", "strict"]
        )),
        0
    );
    assert_eq!(files(&strict, "test_").len(), 1);
}

#[test]
fn reduce_keeps_one_interleaving() {
    let tmp = tempfile::tempdir().unwrap();
    let full = tmp.path().join("full");
    assert_eq!(code(&generate(&fixture("independent.xml"), &full, &[])), 0);
    assert_eq!(files(&full, "test_").len(), 3);
    let reduced = tmp.path().join("reduced");
    assert_eq!(code(&generate(&fixture("independent.xml"), &reduced, &["--reduce"])), 0);
    assert_eq!(files(&reduced, "test_").len(), 1);
}

#[test]
fn emit_promela_and_overwrite() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("pml");
    let args = [
        "emit-promela",
        "--model",
        &fixture("facebook_youtube.xml"),
        "--out",
        out.to_str().unwrap(),
    ];
    assert_eq!(code(&mbtgen(&args)), 0);
    let pml = std::fs::read_to_string(out.join("model.pml")).unwrap();
    assert!(pml.contains("active proctype device_219dcac4()"));
    assert_eq!(code(&mbtgen(&args)), 4);
    let mut forced = args.to_vec();
    forced.push("--force");
    assert_eq!(code(&mbtgen(&forced)), 0);
}

#[test]
fn invalid_model_writes_no_promela() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("pml");
    let run = mbtgen(&[
        "emit-promela",
        "--model",
        &fixture("determinism_defect.xml"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&run), 1);
    assert!(!out.join("model.pml").exists());
}

#[test]
fn generate_refuses_to_overwrite() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let model = fixture("facebook_youtube.xml");
    assert_eq!(code(&generate(&model, &out, &["--max-transitions", "6"])), 0);
    assert_eq!(code(&generate(&model, &out, &["--max-transitions", "4"])), 4);
    assert_eq!(files(&out, "test_").len(), 6);
    assert_eq!(code(&generate(&model, &out, &["--max-transitions", "4", "--force"])), 0);
    assert_eq!(files(&out, "test_").len(), 2);
}

#[test]
fn cap_is_exit_3_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let run = generate(&fixture("facebook_youtube.xml"), &out, &["--global-cap", "10"]);
    assert_eq!(code(&run), 3);
    assert!(!out.exists());
}

#[test]
fn verify_replays_every_script() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let run = generate(
        &fixture("facebook_youtube.xml"),
        &out,
        &["--max-transitions", "8", "--verify"],
    );
    assert_eq!(code(&run), 0);
    assert!(String::from_utf8_lossy(&run.stdout).contains("verified 18 script(s)"));
}

#[test]
fn tampered_script_fails_verification_on_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(
        code(&generate(
            &fixture("facebook_youtube.xml"),
            &out,
            &["--max-transitions", "4"]
        )),
        0
    );
    let path = out.join("test_0001.json");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut script = mbtgen::emit::ActionScript::from_json(&text).unwrap();
    script.steps.pop();
    let model = {
        let text = std::fs::read_to_string(fixture("facebook_youtube.xml")).unwrap();
        let doc = mbtgen::io::parse_model(&text).unwrap();
        mbtgen::io::lower_structure(&doc).unwrap()
    };
    assert!(mbtgen::replay::replay(&model, &script).is_err());
}

#[test]
fn output_bytes_are_stable() {
    let tmp = tempfile::tempdir().unwrap();
    let model = fixture("facebook_youtube.xml");
    let read_all = |dir: &Path| -> Vec<(String, Vec<u8>)> {
        files(dir, "test_")
            .into_iter()
            .map(|n| (n.clone(), std::fs::read(dir.join(n)).unwrap()))
            .collect()
    };
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(
        code(&generate(&model, &a, &["--format", "json", "--format", "uiauto"])),
        0
    );
    assert_eq!(
        code(&generate(
            &model,
            &b,
            &["--format", "json", "--format", "uiauto", "--jobs", "4"]
        )),
        0
    );
    assert_eq!(read_all(&a), read_all(&b));
}
