//! The JSON files under `fixtures/` must match the built-in reference masks.
//! Run with `SUBDIVKIT_BLESS=1` to rewrite them.

use std::fs;
use std::path::PathBuf;

use subdivkit::fixtures;
use subdivkit::io::{self, SchemeFile};
use subdivkit::quasistat::SchemeSpec;

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn check(name: &str, text: String) {
    let path = dir().join(name);
    if std::env::var_os("SUBDIVKIT_BLESS").is_some() {
        fs::write(&path, text + "\n").unwrap();
        return;
    }
    let on_disk = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(on_disk.trim_end(), text, "{name} is stale; rerun with SUBDIVKIT_BLESS=1");
}

#[test]
fn stationary_mask_files() {
    for f in fixtures::stationary() {
        let text = io::mask_json(&f.mask, Some(f.name));
        check(&format!("{}.json", f.name), text.clone());
        assert_eq!(io::parse_mask(&text).unwrap(), f.mask);
    }
}

#[test]
fn scheme_files() {
    let schemes = [
        ("pair_c1", fixtures::quasi_pair_c1()),
        ("pair_c2", fixtures::quasi_pair_c2()),
        ("pair_c2_alt", fixtures::quasi_pair_c2_alt()),
        ("triple_c3", fixtures::quasi_triple_c3()),
    ];
    for (name, masks) in schemes {
        let spec = SchemeSpec::new(masks).unwrap();
        let text = serde_json::to_string_pretty(&SchemeFile::from_spec(&spec, Some(name))).unwrap();
        check(&format!("{name}.json"), text.clone());
        assert_eq!(io::parse_scheme(&text).unwrap(), spec);
    }
}

#[test]
fn polygon_files() {
    check("square.csv", "x,y\n0,0\n1,0\n1,1\n0,1".to_string());
    let p = io::parse_polygon(&fs::read_to_string(dir().join("square.csv")).unwrap()).unwrap();
    assert_eq!(p.points.len(), 4);
}
