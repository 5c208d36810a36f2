//! Compiles a C program against the generated header and, when the static
//! library is available, links and runs it.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "qoe3d.h"

int main(void) {
    const char *ply = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n1 0 0\n0 1 0\n";
    Qoe3dModel *model = NULL;
    if (qoe3d_model_parse((const uint8_t *)ply, strlen(ply), 0, &model) != QOE3D_STATUS_OK) return 1;
    size_t points = 0, faces = 0;
    qoe3d_model_counts(model, &points, &faces);
    char hash[65];
    if (qoe3d_model_content_hash(model, hash) != QOE3D_STATUS_OK) return 2;
    qoe3d_model_free(model);
    double a[3] = {1, 2, 3}, b[3] = {1, 3, 2}, r = 0;
    if (qoe3d_srocc(a, b, 3, &r) != QOE3D_STATUS_OK) return 3;
    if (qoe3d_srocc(a, b, 3, NULL) != QOE3D_STATUS_NULL_POINTER) return 4;
    printf("%zu %zu %.3f %s\n", points, faces, r, qoe3d_last_error());
    return 0;
}
"#;

fn compiler() -> Option<String> {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    Command::new(&cc).arg("--version").output().ok()?.status.success().then_some(cc)
}

fn static_lib() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let deps = exe.parent()?;
    [deps.parent()?.join("libqoe3d_ffi.a")]
        .into_iter()
        .chain(
            std::fs::read_dir(deps)
                .ok()?
                .flatten()
                .map(|e| e.path())
                .filter(|p| {
                    p.file_name()
                        .and_then(|n| n.to_str())
                        .is_some_and(|n| n.starts_with("libqoe3d_ffi") && n.ends_with(".a"))
                }),
        )
        .find(|p| p.is_file())
}

#[test]
fn header_compiles_and_links() {
    let Some(cc) = compiler() else {
        eprintln!("no C compiler found, skipping");
        return;
    };
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(&src, PROGRAM).unwrap();

    let status = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success(), "header does not compile");

    let Some(lib) = static_lib() else {
        eprintln!("static library not found, skipping link step");
        return;
    };
    let exe = dir.path().join("smoke");
    let status = Command::new(&cc)
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "link failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{out:?}");
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "3 0 0.500 out is null");
}
