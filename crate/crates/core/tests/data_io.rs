use std::fs;

use sraal_core::data::{generate, load_csv, read_csv, write_csv, SyntheticKind, SyntheticSpec};
use sraal_core::Error;

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn line_of(err: Error) -> usize {
    match err {
        Error::Data { line, .. } => line,
        other => panic!("expected a data error, got {other}"),
    }
}

#[test]
fn three_row_fixture_parses_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "a.csv", "f0,f1,label\n1.5,-2,0\n0,3.25,1\n# comment\n7,8e-3,1\n");
    let t = read_csv(&p, true).unwrap();
    assert_eq!(t.rows, vec![vec![1.5, -2.0], vec![0.0, 3.25], vec![7.0, 8e-3]]);
    assert_eq!(t.labels, Some(vec![0, 1, 1]));
    assert_eq!(t.ids, None);
}

#[test]
fn id_column_is_optional() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "a.csv", "id,f0\n10,1\n20,2\n");
    let t = read_csv(&p, false).unwrap();
    assert_eq!(t.ids, Some(vec![10, 20]));
}

#[test]
fn malformed_files_report_their_line() {
    let dir = tempfile::tempdir().unwrap();
    let header_only = write(&dir, "h.csv", "f0,f1,label\n");
    assert!(matches!(read_csv(&header_only, true), Err(Error::Data { .. })));

    let ragged = write(&dir, "r.csv", "f0,f1,label\n1,2,0\n1,2\n");
    assert_eq!(line_of(read_csv(&ragged, true).unwrap_err()), 3);

    let text = write(&dir, "t.csv", "f0,f1\n1,2\n3,abc\n");
    assert_eq!(line_of(read_csv(&text, false).unwrap_err()), 3);

    let label = write(&dir, "l.csv", "f0,label\n1,0\n2,1\n3,5\n");
    assert_eq!(line_of(load_csv(&label, true, Some(2), 0).unwrap_err()), 4);

    let header = write(&dir, "b.csv", "x,y\n1,2\n");
    assert_eq!(line_of(read_csv(&header, false).unwrap_err()), 1);
}

#[test]
fn write_read_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("rt.csv");
    let rows = vec![vec![0.1, -1.0 / 3.0, 1e-300], vec![2.5e10, 0.0, -7.125]];
    write_csv(&p, &rows, Some(&[1, 0])).unwrap();
    let t = read_csv(&p, true).unwrap();
    for (a, b) in t.rows.iter().flatten().zip(rows.iter().flatten()) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }
    assert_eq!(t.labels, Some(vec![1, 0]));
}

#[test]
fn loaded_csv_is_standardized_and_split() {
    let ds = generate(&SyntheticSpec {
        n: 120,
        d: 3,
        classes: 3,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("ds.csv");
    let rows: Vec<Vec<f64>> = (0..ds.len()).map(|i| ds.features(i).iter().map(|v| 4.0 * v + 1.0).collect()).collect();
    write_csv(&p, &rows, ds.labels()).unwrap();
    let loaded = load_csv(&p, true, None, 0).unwrap();
    assert_eq!(loaded.classes(), 3);
    assert_eq!(loaded.train_ids().len(), 96);
    assert_eq!(loaded.test_ids().len(), 24);
    for j in 0..3 {
        let col: Vec<f64> = (0..loaded.len()).map(|i| loaded.features(i)[j]).collect();
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
        assert!(mean.abs() < 1e-9);
        assert!((var - 1.0).abs() < 1e-6);
    }
}

#[test]
fn every_generator_kind_is_balanced_and_reproducible() {
    for (kind, classes) in [(SyntheticKind::GaussianBlobs, 3), (SyntheticKind::TwoMoons, 2), (SyntheticKind::Rings, 3)] {
        let spec = SyntheticSpec {
            kind,
            n: 90,
            d: 4,
            classes,
            ..SyntheticSpec::default()
        };
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a, b);
        let mut counts = vec![0; classes];
        for &y in a.labels().unwrap() {
            counts[y] += 1;
        }
        assert_eq!(counts, vec![90 / classes; classes], "{kind:?}");
    }
}
