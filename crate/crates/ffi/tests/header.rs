use std::path::Path;
use std::process::Command;

// The header is regenerated by the build script; make sure a C compiler accepts it.
#[test]
fn header_compiles_as_c() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/deltashell.h");
    assert!(header.exists());
    let src = std::env::temp_dir().join("deltashell_header_check.c");
    std::fs::write(&src, "#include \"deltashell.h\"\nint main(void) { DsParams p = {1.0, 1.0, 0.0}; (void)p; return DS_STATUS_OK; }\n").unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let out = match Command::new(&cc).arg("-fsyntax-only").arg("-Wall").arg("-Werror").arg("-I").arg(dir.join("include")).arg(&src).output() {
        Ok(o) => o,
        Err(_) => {
            eprintln!("no C compiler ({cc}), skipping");
            return;
        }
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
