//! Replays the checked-in fuzz corpus through the properties the fuzz targets assert.

use std::path::PathBuf;

use kitaev_thermal::checkpoint::Checkpoint;
use kitaev_thermal::config::RunConfig;

fn corpus(target: &str) -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut files: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    files.into_iter().map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap())).collect()
}

#[test]
fn config_seeds_round_trip() {
    let mut accepted = 0;
    for (name, text) in corpus("parse_config") {
        if let Ok(config) = RunConfig::from_toml_str(&text) {
            let again = RunConfig::from_toml_str(&config.to_toml_string()).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(again, config, "{name}");
            accepted += 1;
        }
    }
    assert_eq!(accepted, 3);
}

#[test]
fn checkpoint_seeds_round_trip() {
    let mut accepted = 0;
    for (name, text) in corpus("parse_checkpoint") {
        if let Ok(ck) = Checkpoint::from_json_str(&text) {
            let again = Checkpoint::from_json_str(&ck.to_json_string()).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(again, ck, "{name}");
            ck.verify().unwrap();
            accepted += 1;
        }
    }
    assert_eq!(accepted, 3);
}
