use netspace::harness::{
    generate_corpus, verify_theorem1, Corpus, CorpusSpec, FreezeMode, FrozenConstants, GeneratorKind,
};
use netspace::report::Report;
use netspace::{SpacePair, Window};

fn corpus(seed: u64) -> Corpus {
    let w = Window::new(2, 2, 2).unwrap();
    generate_corpus(&CorpusSpec::new(w, seed, 8, false)).unwrap()
}

fn pairs() -> Vec<SpacePair> {
    [1.0, f64::INFINITY]
        .into_iter()
        .map(|q| SpacePair::new(1.2, f64::INFINITY, 4.0, f64::INFINITY, 0.5, q).unwrap())
        .collect()
}

#[test]
fn theorem1_report_round_trip_through_frozen_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("frozen.json");
    let c = corpus(11);

    let mut first = verify_theorem1(&c, &pairs()).unwrap();
    let mut fc = FrozenConstants::load(&path).unwrap();
    fc.apply(&mut first, &c.hash(), FreezeMode::Freeze).unwrap();
    assert!(first.all_pass());
    assert_eq!(FrozenConstants::load(&path).unwrap().len(), 4);

    let mut again = verify_theorem1(&c, &pairs()).unwrap();
    FrozenConstants::load(&path).unwrap().apply(&mut again, &c.hash(), FreezeMode::Check).unwrap();
    assert!(again.all_pass(), "{:?}", again.failures().collect::<Vec<_>>());
    assert_eq!(first.to_csv().unwrap(), again.to_csv().unwrap());
}

#[test]
fn reports_serialize_non_finite_values_as_strings() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(3);
    let r = verify_theorem1(&c, &pairs()).unwrap();
    let (csv, json) = r.write(dir.path(), "t1").unwrap();
    let text = std::fs::read_to_string(json).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["title"], "theorem1");
    // Rows built as verdicts carry no bound.
    assert!(text.contains("\"nan\""));
    assert!(std::fs::read_to_string(csv).unwrap().starts_with("name,params,value,bound,tolerance,pass,witness"));
}

#[test]
fn corpus_kinds_cycle_and_labels_match() {
    let w = Window::new(1, 3, 2).unwrap();
    let spec = CorpusSpec::new(w, 1, 7, true).with_kinds(&[GeneratorKind::Checkerboard, GeneratorKind::PowerSpike]);
    let c = generate_corpus(&spec).unwrap();
    assert_eq!(c.len(), 7);
    assert!(c.labels[0].ends_with("checkerboard"));
    assert!(c.labels[1].ends_with("spike"));
    assert!(c.functions.iter().all(|f| f.is_nonnegative()));
    let refined = c.refined().unwrap();
    assert_eq!(refined.spec.level, 4);
    for (a, b) in c.functions.iter().zip(&refined.functions) {
        assert!((a.integral() - b.integral()).abs() < 1e-12 * (1.0 + a.integral().abs()));
    }
}

#[test]
fn empty_report_passes_vacuously() {
    assert!(Report::new("empty").all_pass());
}
