use pyo3::prelude::*;
use pyo3::types::PyModule;

#[test]
fn plain_calls_match_core() {
    assert!((sraal::oui_score(vec![0.25; 4]).unwrap() - 0.75).abs() < 1e-12);
    assert!(sraal::oui_score(vec![0.5, 0.6]).is_err());
    let (ids, radius) = sraal::greedy_kcenter(vec![vec![0.0], vec![1.0], vec![10.0]], 2, 1, 0, Some(vec![0]), None).unwrap();
    assert_eq!(ids, vec![0, 2]);
    assert_eq!(radius, 1.0);
}

#[test]
fn module_registers_functions() {
    Python::initialize();
    Python::attach(|py| {
        let m = PyModule::new(py, "sraal").unwrap();
        sraal::sraal(&m).unwrap();
        for name in ["oui_score", "disc_loss", "greedy_kcenter", "gradcheck", "run_experiment", "Dataset"] {
            assert!(m.hasattr(name).unwrap(), "{name} missing");
        }
        let score: f64 = m.getattr("oui_score").unwrap().call1((vec![1.0, 0.0],)).unwrap().extract().unwrap();
        assert_eq!(score, 0.0);
    });
}
