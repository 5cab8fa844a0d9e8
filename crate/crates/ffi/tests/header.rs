//! The generated header must compile as C and as C++.

use std::path::Path;
use std::process::Command;

const PROGRAM: &str = r#"
#include "auxspline.h"
int main(void) {
    AuxDataset *ds = NULL;
    AuxFit *fit = NULL;
    size_t len = 0;
    double buf[8];
    AuxStatus s = aux_dataset_simulate("sk1", 50, 1, &ds);
    if (s == AUX_STATUS_OK) s = aux_fit(ds, NULL, &fit);
    if (s == AUX_STATUS_OK) s = aux_fit_curve(fit, AUX_CURVE_BMA, buf, 8, &len);
    aux_fit_free(fit);
    aux_dataset_free(ds);
    return s == AUX_STATUS_OK ? 0 : (aux_last_error() != NULL);
}
"#;

#[test]
fn header_compiles() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let tmp = tempfile::tempdir().unwrap();
    for (compiler, file) in [("cc", "check.c"), ("c++", "check.cpp")] {
        let src = tmp.path().join(file);
        std::fs::write(&src, PROGRAM).unwrap();
        let out = match Command::new(compiler)
            .arg("-fsyntax-only")
            .arg("-Wall")
            .arg("-Werror")
            .arg("-I")
            .arg(&dir)
            .arg(&src)
            .output()
        {
            Ok(o) => o,
            Err(_) => {
                eprintln!("{compiler} not available, skipping");
                continue;
            }
        };
        assert!(
            out.status.success(),
            "{compiler}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}
