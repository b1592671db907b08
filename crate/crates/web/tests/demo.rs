use cmtrace_web::{align_demo, frame_span, planted_trace};

#[test]
fn planted_trace_peaks_at_store_site() {
    let out = planted_trace(3.0, 0, 1).unwrap();
    assert_eq!(out["argmax"]["bucket"], "last_subject");
    assert_eq!(out["argmax"]["layer"], 1);
    assert!(out["svg"].as_str().unwrap().starts_with("<svg"));
    assert!(out["mean_p_clean"].as_f64().unwrap() > out["mean_p_corrupt"].as_f64().unwrap());
}

#[test]
fn planted_trace_rejects_bad_input() {
    assert!(planted_trace(-1.0, 0, 1).is_err());
    assert!(planted_trace(f64::NAN, 0, 1).is_err());
    assert!(planted_trace(3.0, 0, 2).is_err());
}

#[test]
fn align_demo_spans_each_word() {
    let out = align_demo("The capital of Roman Republic is", 7).unwrap();
    let words: Vec<&str> = out["spans"].as_array().unwrap().iter().map(|s| s["token"].as_str().unwrap()).collect();
    assert_eq!(words, ["THE", "CAPITAL", "OF", "ROMAN", "REPUBLIC", "IS"]);
    assert!(out["svg"].as_str().unwrap().contains("<polyline"));
    assert!(align_demo("   ", 0).is_err());
}

#[test]
fn frame_span_matches_worked_case() {
    let out = frame_span(9600, 16_000, 30, "25", 10, 23).unwrap();
    assert_eq!(out["seconds"][0], "1/5");
    assert_eq!(out["seconds"][1], "23/50");
    assert_eq!(out["speech_tokens"][0], 5);
    assert_eq!(out["speech_tokens"][1], 12);
    assert!(frame_span(9600, 16_000, 30, "0", 10, 23).is_err());
    assert!(frame_span(9600, 16_000, 30, "25", 23, 10).is_err());
}
