fn main() {
    println!("cargo:rerun-if-changed=src/lib.rs");
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").unwrap();
    let header = std::path::Path::new(&crate_dir).join("include/ebot.h");
    let config = cbindgen::Config {
        language: cbindgen::Language::C,
        include_guard: Some("EBOT_H".to_string()),
        cpp_compat: true,
        documentation: true,
        ..Default::default()
    };
    match cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
    {
        Ok(bindings) => {
            bindings.write_to_file(header);
        }
        // keep the committed header when generation is unavailable
        Err(e) => println!("cargo:warning=cbindgen failed, using committed header: {e}"),
    }
}
