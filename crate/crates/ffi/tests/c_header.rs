//! Compiles and runs a C program against the generated header and the static library.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include <string.h>
#include "hypdyn.h"

int main(void) {
    HdShift *shift = NULL;
    HdRpf *rpf = NULL;
    double lambda = 0.0;
    if (hd_shift_full(2, 3, &shift) != HD_STATUS_OK) return 1;
    if (hd_rpf_solve(shift, 1e-13, &rpf) != HD_STATUS_OK) return 2;
    if (hd_rpf_eigenvalue(rpf, &lambda) != HD_STATUS_OK) return 3;
    if (fabs(lambda - 2.0) > 1e-10) return 4;
    hd_rpf_free(rpf);
    hd_shift_free(shift);

    HdModulus *m = NULL;
    if (hd_modulus_power(2.0, &m) != HD_STATUS_INVALID_INPUT) return 5;
    if (hd_last_error_message() == NULL) return 6;

    char *report = NULL;
    if (hd_run_experiment_json("{\"experiment\":\"dini-certificate\"}", &report) != HD_STATUS_OK) return 7;
    if (strstr(report, "\"divergent\":true") == NULL) return 8;
    hd_string_free(report);
    printf("ok %s\n", hd_version());
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // Integration tests live in <target>/<profile>/deps.
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libhypdyn_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let work = tempfile::tempdir().unwrap();
    let src = work.path().join("main.c");
    let bin = work.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(crate_dir.join("include"))
        .arg(&src)
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&bin)
        .status()
        .expect("a C compiler is available as `cc`");
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), format!("ok {}", env!("CARGO_PKG_VERSION")));
}
