//! Dataset export/import through PGM files, manifest.csv and config.json.

use std::fs;

use smiley_core::tessim::{export_dataset, generate_dataset, import_dataset, SimConfig};
use smiley_core::Error;

fn small() -> SimConfig {
    SimConfig {
        width: 9,
        height: 7,
        k_change: 3,
        rounds: 25,
        ..SimConfig::default()
    }
}

#[test]
fn round_trip_preserves_everything() {
    let dir = tempfile::tempdir().unwrap();
    let ds = generate_dataset(&small()).unwrap();
    let manifest = export_dataset(&ds, dir.path()).unwrap();
    assert_eq!(manifest.rows.len(), 25);
    assert!(dir.path().join("img_00000.pgm").exists());
    assert!(dir.path().join("img_00025.pgm").exists());
    let back = import_dataset(dir.path()).unwrap();
    assert_eq!(back, ds);
}

#[test]
fn manifest_format() {
    let dir = tempfile::tempdir().unwrap();
    let ds = generate_dataset(&small()).unwrap();
    export_dataset(&ds, dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join("manifest.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("round,filename,label,tea_count"));
    let first = lines.next().unwrap();
    assert_eq!(
        first,
        format!("1,img_00001.pgm,1,{}", ds.records[0].image.tea_count())
    );
    assert!(!text.contains('\r'));
}

#[test]
fn import_does_not_touch_the_directory() {
    let dir = tempfile::tempdir().unwrap();
    export_dataset(&generate_dataset(&small()).unwrap(), dir.path()).unwrap();
    let snapshot = |d: &std::path::Path| {
        let mut v: Vec<_> = fs::read_dir(d)
            .unwrap()
            .map(|e| {
                let p = e.unwrap().path();
                (p.clone(), fs::read(&p).unwrap())
            })
            .collect();
        v.sort();
        v
    };
    let before = snapshot(dir.path());
    import_dataset(dir.path()).unwrap();
    assert_eq!(snapshot(dir.path()), before);
}

#[test]
fn tampering_is_reported_with_location() {
    let dir = tempfile::tempdir().unwrap();
    export_dataset(&generate_dataset(&small()).unwrap(), dir.path()).unwrap();
    let manifest = dir.path().join("manifest.csv");
    let original = fs::read_to_string(&manifest).unwrap();

    let bad_label = original.replacen("2,img_00002.pgm,0,", "2,img_00002.pgm,7,", 1);
    fs::write(&manifest, bad_label).unwrap();
    match import_dataset(dir.path()).unwrap_err() {
        Error::Data { file, line, .. } => {
            assert_eq!(file, manifest);
            assert_eq!(line, Some(3));
        }
        other => panic!("unexpected {other}"),
    }

    fs::write(&manifest, &original).unwrap();
    let pgm = dir.path().join("img_00004.pgm");
    let mut bytes = fs::read(&pgm).unwrap();
    let last = bytes.len() - 1;
    bytes[last] = 17;
    fs::write(&pgm, bytes).unwrap();
    assert!(matches!(
        import_dataset(dir.path()).unwrap_err(),
        Error::Data { .. }
    ));

    fs::remove_file(&pgm).unwrap();
    assert!(matches!(
        import_dataset(dir.path()).unwrap_err(),
        Error::Io { .. }
    ));
}

#[test]
fn edited_config_fails_the_hash_check() {
    let dir = tempfile::tempdir().unwrap();
    export_dataset(&generate_dataset(&small()).unwrap(), dir.path()).unwrap();
    let path = dir.path().join("config.json");
    let text = fs::read_to_string(&path)
        .unwrap()
        .replace("\"k_change\": 3", "\"k_change\": 5");
    fs::write(&path, text).unwrap();
    let err = import_dataset(dir.path()).unwrap_err();
    assert!(err.to_string().contains("provenance_hash"), "{err}");
}
