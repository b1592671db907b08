use cmtrace::dataset::{filter_dataset, wer, word_edit_distance, DatasetError, JudgeRules, KnownRecord, Verdict};
use cmtrace::model::{
    build_planted_fact_model, build_random_model, Lexicon, Modality, ModelConfig, ModelError, PlantedFact,
    PlantedFactSpec, VocabLayout,
};
use proptest::prelude::*;

const CITIES: [(&str, &str); 5] =
    [("italy", "rome"), ("france", "paris"), ("spain", "madrid"), ("peru", "lima"), ("chile", "santiago")];

fn planted() -> (cmtrace::model::Model, Lexicon, Vec<KnownRecord>) {
    let vocab = VocabLayout::standard(64, 16);
    let mut words: Vec<String> = ["the", "capital", "of", "is"].map(String::from).to_vec();
    for (c, o) in CITIES {
        words.push(c.into());
        words.push(o.into());
    }
    let lex = Lexicon::new(words, &vocab).unwrap();
    let facts = CITIES
        .iter()
        .map(|(c, o)| PlantedFact { subject: lex.lookup(c).unwrap(), object: lex.lookup(o).unwrap() })
        .collect();
    let mut spec = PlantedFactSpec::new(facts, 6, 4, 1);
    spec.vocab = vocab;
    let model = build_planted_fact_model(&spec).unwrap().model;
    let records = CITIES
        .iter()
        .enumerate()
        .map(|(i, (c, o))| {
            let subject = format!("{}{}", c[..1].to_uppercase(), &c[1..]);
            KnownRecord::new(i.to_string(), format!("The capital of {subject} is"), subject, *o).unwrap()
        })
        .collect();
    (model, lex, records)
}

#[test]
fn planted_records_are_all_retained() {
    let (model, lex, records) = planted();
    let out = filter_dataset(&model, &lex, &records, Modality::Text, 3, &JudgeRules::default()).unwrap();
    assert_eq!(out.records.len(), records.len());
    assert!(out.records.iter().all(|r| r.judgment.verdict == Verdict::Exact));
    assert_eq!(out.retention(), 1.0);
    assert_eq!(out, filter_dataset(&model, &lex, &records, Modality::Text, 3, &JudgeRules::default()).unwrap());
}

#[test]
fn random_model_completes_and_zero_budget_fails() {
    let (_, lex, records) = planted();
    let cfg = ModelConfig {
        n_layers: 2,
        d_model: 16,
        n_heads: 2,
        d_mlp: 32,
        vocab: VocabLayout::standard(64, 16),
        max_positions: 32,
        rng_seed: 5,
    };
    let model = build_random_model(&cfg).unwrap();
    for modality in [Modality::Text, Modality::Speech] {
        let out = filter_dataset(&model, &lex, &records, modality, 4, &JudgeRules::default()).unwrap();
        assert!(out.records.len() <= records.len());
        assert!(out.records.iter().all(|r| r.judgment.verdict.is_correct()));
    }
    assert_eq!(
        filter_dataset(&model, &lex, &records, Modality::Text, 0, &JudgeRules::default()),
        Err(DatasetError::Model(ModelError::NothingToGenerate))
    );
}

/// Full-table edit distance.
fn dp_oracle(a: &[u8], b: &[u8]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

fn sentence(ws: &[u8]) -> String {
    ws.iter().map(|w| format!("w{w}")).collect::<Vec<_>>().join(" ")
}

proptest! {
    #[test]
    fn wer_matches_dp(a in prop::collection::vec(0u8..5, 1..9), b in prop::collection::vec(0u8..5, 0..9)) {
        let w = wer(&sentence(&a), &sentence(&b)).unwrap();
        prop_assert_eq!(w.errors, dp_oracle(&a, &b));
        prop_assert_eq!(w.reference_words, a.len());
        prop_assert_eq!(wer(&sentence(&a), &sentence(&a)).unwrap().errors, 0);
    }

    #[test]
    fn edit_distance_is_a_metric(
        a in prop::collection::vec(0u8..4, 0..7),
        b in prop::collection::vec(0u8..4, 0..7),
        c in prop::collection::vec(0u8..4, 0..7),
    ) {
        let ab = word_edit_distance(&a, &b);
        prop_assert_eq!(ab, word_edit_distance(&b, &a));
        prop_assert!(word_edit_distance(&a, &c) <= ab + word_edit_distance(&b, &c));
    }
}
