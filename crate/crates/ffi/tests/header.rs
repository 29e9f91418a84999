use std::path::Path;
use std::process::Command;

const EXPORTED: [&str; 12] = [
    "locnet_last_error",
    "locnet_version",
    "locnet_path_loss_db",
    "locnet_dataset_generate",
    "locnet_dataset_load",
    "locnet_dataset_save",
    "locnet_dataset_shape",
    "locnet_dataset_free",
    "locnet_model_load",
    "locnet_model_param_count",
    "locnet_model_predict",
    "locnet_model_p90",
];

fn header() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/locnet.h")
}

#[test]
fn header_declares_every_export() {
    let text = std::fs::read_to_string(header()).unwrap();
    for name in EXPORTED.iter().chain(&["locnet_model_free", "LOCNET_STATUS_NULL_POINTER", "typedef struct LocnetModel"]) {
        assert!(text.contains(name), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let Some(cc) = which_cc() else { return };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(
        &src,
        "#include \"locnet.h\"\nint main(void) { LocnetStatus s = LOCNET_STATUS_OK; LocnetModel *m = 0; (void)m; return (int)s; }\n",
    )
    .unwrap();
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header().parent().unwrap())
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Option<&'static str> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok())
}
