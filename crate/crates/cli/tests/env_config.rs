use emphadet_cli::run_with;

#[test]
fn config_file_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("env.json");
    std::fs::write(&cfg, r#"{"segmentation": {"min_gap_ms": 75}}"#).unwrap();
    std::env::set_var(emphadet_cli::settings::CONFIG_ENV, &cfg);

    let wav = dir.path().join("a.wav");
    let audio = emphadet::corpus::render_utterance(&emphadet::tokenize("one two"), &emphadet::corpus::Voice::new(140.0), 1).audio;
    emphadet::write_wav(&audio, &wav).unwrap();

    let (mut out, mut err) = (Vec::new(), Vec::new());
    let args = ["emphadet", "segment", "--input", wav.to_str().unwrap(), "--show-config", "--min-gap-ms", "90"];
    assert_eq!(run_with(args, &mut out, &mut err), 0);
    let out = String::from_utf8(out).unwrap();
    assert!(out.contains(&format!("config file: {}", cfg.display())), "{out}");
    assert!(out.contains("\"min_gap_ms\": 90.0"));

    let (mut out, mut err) = (Vec::new(), Vec::new());
    let args = ["emphadet", "segment", "--input", wav.to_str().unwrap(), "--show-config"];
    assert_eq!(run_with(args, &mut out, &mut err), 0);
    assert!(String::from_utf8(out).unwrap().contains("\"min_gap_ms\": 75.0"));
}
