fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").unwrap();
    let config = cbindgen::Config {
        language: cbindgen::Language::C,
        header: Some("/* C interface for the mwchart control chart library. */".to_string()),
        include_guard: Some("MWCHART_H".to_string()),
        cpp_compat: true,
        enumeration: cbindgen::EnumConfig {
            prefix_with_name: true,
            ..Default::default()
        },
        ..Default::default()
    };
    cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
        .expect("cbindgen failed to generate mwchart.h")
        .write_to_file(std::path::Path::new(&crate_dir).join("include/mwchart.h"));
    println!("cargo:rerun-if-changed=src/lib.rs");
}
