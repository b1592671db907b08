use cmtrace::model::{build_planted_fact_model, ComponentKind, PlantedFact, PlantedFactSpec, TokenSequence};
use cmtrace::tracer::{average_grids, CorruptionSpec, TokenBucket, TracePrompt, Tracer};

fn facts() -> Vec<PlantedFact> {
    (0..5).map(|i| PlantedFact { subject: 10 + i, object: 40 + i }).collect()
}

#[test]
fn mlp_grid_peaks_at_store_site() {
    let mut spec = PlantedFactSpec::new(facts(), 7, 4, 1);
    spec.n_layers = 4;
    let planted = build_planted_fact_model(&spec).unwrap();
    let m = &planted.model;
    let tracer = Tracer::new(m, CorruptionSpec::for_model(m, 3.0, 17));
    let mut results = Vec::new();
    for (i, f) in facts().iter().enumerate() {
        for (j, fill) in [[3usize, 4, 5, 6], [7, 8, 9, 5]].iter().enumerate() {
            let seq = TokenSequence::text(&[fill[0], fill[1], fill[2], f.subject, fill[3], 6], m.vocab());
            let p = TracePrompt::text(format!("f{i}-{j}"), seq, 4..5, vec![f.object]);
            let r = tracer.trace_prompt(&p, ComponentKind::MlpOut, 1).unwrap();
            assert!(r.p_clean > r.p_corrupt);
            results.push(r);
        }
    }
    let grid = average_grids(&results, ComponentKind::MlpOut).unwrap();
    let (b, l, v) = grid.argmax().unwrap();
    assert_eq!((b, l), (TokenBucket::LastSubject, 1));
    assert!(v >= 10.0 * grid.median().unwrap());
    assert!(grid.cells().filter(|c| c.2 == v).count() == 1);
}
