use emphadet::corpus::{write_fixture_corpus, CorpusOptions};
use emphadet::{
    evaluate, load_manifest, AnalysisConfig, DatasetManifest, Error, ManifestEntry, ReferenceProvider, UtteranceKey,
};

#[test]
fn generated_manifest_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_fixture_corpus(dir.path(), &CorpusOptions::default()).unwrap();
    let loaded = load_manifest(&path).unwrap();
    assert_eq!(loaded.entries.len(), 100);

    let copy = dir.path().join("copy.json");
    loaded.save(&copy).unwrap();
    let again = load_manifest(&copy).unwrap();
    assert_eq!(again.entries, loaded.entries);
    assert_eq!(std::fs::read_to_string(&copy).unwrap(), std::fs::read_to_string(&path).unwrap());
}

#[test]
fn fixture_corpus_scores_well_and_order_does_not_matter() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_fixture_corpus(dir.path(), &CorpusOptions::default()).unwrap();
    let manifest = load_manifest(&path).unwrap();
    let outcome = evaluate(&manifest, &AnalysisConfig::default()).unwrap();
    assert_eq!(outcome.skipped, 0, "{:?}", outcome.skipped_entries);
    assert!(outcome.metrics.accuracy >= 95.0, "{}", outcome.table());

    let mut reversed = manifest.clone();
    reversed.entries.reverse();
    assert_eq!(evaluate(&reversed, &AnalysisConfig::default()).unwrap().metrics, outcome.metrics);

    let provider = ReferenceProvider::fixture(dir.path());
    let entry = &manifest.entries[0];
    let key = UtteranceKey::new(&entry.speaker_id, &entry.utterance_id);
    let query = emphadet::read_wav(manifest.resolve(&entry.query_path)).unwrap();
    assert_eq!(provider.transcribe(&query, &key).unwrap(), emphadet::tokenize(&entry.transcript));
}

fn write_manifest(dir: &std::path::Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("m.json");
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn manifest_guards() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("q.wav"), b"").unwrap();
    let entry = |idx: usize| ManifestEntry {
        speaker_id: "a".into(),
        utterance_id: "u".into(),
        query_path: "q.wav".into(),
        reference_path: "q.wav".into(),
        transcript: "one two three".into(),
        emphasized_indices: vec![idx],
    };

    let path = dir.path().join("ok.json");
    DatasetManifest::new(vec![entry(2)]).save(&path).unwrap();
    assert_eq!(load_manifest(&path).unwrap().entries.len(), 1);

    DatasetManifest::new(vec![entry(3)]).save(&path).unwrap();
    match load_manifest(&path) {
        Err(Error::InvalidIndex { speaker_id, utterance_id, .. }) => assert_eq!((speaker_id.as_str(), utterance_id.as_str()), ("a", "u")),
        other => panic!("{other:?}"),
    }

    DatasetManifest::new(vec![entry(0), entry(1)]).save(&path).unwrap();
    assert!(matches!(load_manifest(&path), Err(Error::InvalidManifest(_))));

    let bad_version = write_manifest(dir.path(), r#"{"version": 9, "entries": []}"#);
    assert!(matches!(load_manifest(bad_version), Err(Error::InvalidManifest(_))));

    let missing = write_manifest(
        dir.path(),
        r#"{"version": 1, "entries": [{"speaker_id": "a", "utterance_id": "u", "query_path": "nope.wav",
           "reference_path": "q.wav", "transcript": "x", "emphasized_indices": []}]}"#,
    );
    assert!(matches!(load_manifest(missing), Err(Error::MissingFile(_))));
}

#[test]
fn mostly_broken_dataset_is_unusable() {
    let dir = tempfile::tempdir().unwrap();
    let silent = emphadet::AudioBuffer::new(vec![0.0; 16_000], 16_000).unwrap();
    emphadet::write_wav(&silent, dir.path().join("s.wav")).unwrap();
    let entries = (0..3)
        .map(|i| ManifestEntry {
            speaker_id: "a".into(),
            utterance_id: format!("u{i}"),
            query_path: "s.wav".into(),
            reference_path: "s.wav".into(),
            transcript: "hello there".into(),
            emphasized_indices: vec![],
        })
        .collect();
    let manifest = DatasetManifest::new(entries).with_base_dir(dir.path());
    assert!(matches!(evaluate(&manifest, &AnalysisConfig::default()), Err(Error::DatasetUnusable { skipped: 3, total: 3 })));
}
