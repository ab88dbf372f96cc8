//! `CONFIG.md` must match the generated reference.
//! Regenerate with `UPDATE_CONFIG_MD=1 cargo test --test config_reference`.

use std::path::PathBuf;

use spectral_closure::config::{parse_config, reference_markdown};

fn config_md() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../CONFIG.md")
}

#[test]
fn config_md_is_current() {
    let generated = reference_markdown();
    if std::env::var_os("UPDATE_CONFIG_MD").is_some() {
        std::fs::write(config_md(), &generated).unwrap();
    }
    let on_disk = std::fs::read_to_string(config_md()).expect("CONFIG.md at the workspace root");
    assert_eq!(on_disk, generated, "CONFIG.md is stale; regenerate it");
}

#[test]
fn documented_examples_parse() {
    let text = reference_markdown();
    let mut blocks = text.split("```toml\n").skip(1);
    let mut count = 0;
    for block in blocks.by_ref() {
        let body = block.split("```").next().unwrap();
        parse_config(body, None).unwrap_or_else(|e| panic!("example does not parse: {e}\n{body}"));
        count += 1;
    }
    assert!(count >= 1);
}
