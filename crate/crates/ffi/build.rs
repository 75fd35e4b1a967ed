use std::env;
use std::path::PathBuf;

fn main() {
    let crate_dir = env::var("CARGO_MANIFEST_DIR").expect("CARGO_MANIFEST_DIR not set");
    let out_dir = PathBuf::from(&crate_dir).join("include");
    std::fs::create_dir_all(&out_dir).expect("cannot create include directory");

    cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_language(cbindgen::Language::C)
        .with_include_guard("CASIMIR_SPHERE_H")
        .with_documentation(true)
        .with_autogen_warning("/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */")
        .generate()
        .expect("unable to generate C bindings")
        .write_to_file(out_dir.join("casimir_sphere.h"));

    println!("cargo:rerun-if-changed=src/lib.rs");
}
