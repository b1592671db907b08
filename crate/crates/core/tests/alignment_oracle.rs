use cmtrace::aligner::{
    align, backtrack, build_trellis, merge_repeats, merge_words, path_log_prob, subject_span, synthetic_emissions,
    AudioMeta, EmissionMatrix, LabelVocab, Rational,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Best score and advance frames over every monotone path, by enumeration.
fn brute_force(em: &EmissionMatrix, ids: &[usize]) -> Option<(f64, Vec<usize>)> {
    let t_max = em.frames();
    let n = ids.len();
    let blank = em.vocab().blank_index();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for mask in 0u32..(1 << t_max) {
        if mask.count_ones() as usize != n {
            continue;
        }
        let mut j = 0;
        let mut score = 0.0;
        let mut advances = Vec::new();
        for t in 0..t_max {
            if mask & (1 << t) != 0 {
                score += em.row(t)[ids[j]];
                j += 1;
                advances.push(t);
            } else {
                score += em.row(t)[blank];
            }
        }
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, advances));
        }
    }
    best
}

fn random_emissions(rng: &mut ChaCha8Rng, frames: usize, vocab: &LabelVocab) -> EmissionMatrix {
    let logits = (0..frames * vocab.len()).map(|_| rng.random_range(-4.0..4.0)).collect();
    EmissionMatrix::from_logits(logits, frames, vocab.clone()).unwrap()
}

fn small_vocab() -> LabelVocab {
    LabelVocab::new(vec!['-', '|', 'A', 'B', 'C'], '-', '|').unwrap()
}

#[test]
fn trellis_matches_enumeration() {
    let vocab = small_vocab();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..400 {
        let n = rng.random_range(1..=4);
        let t = rng.random_range(n..=8);
        let ids: Vec<usize> = (0..n).map(|_| rng.random_range(1..vocab.len())).collect();
        let em = random_emissions(&mut rng, t, &vocab);
        let trellis = build_trellis(&em, &ids).unwrap();
        let (want, advances) = brute_force(&em, &ids).unwrap();
        assert!((trellis.score() - want).abs() < 1e-9, "case {case}: {} vs {want}", trellis.score());

        let path = backtrack(&trellis, &em).unwrap();
        assert!((path_log_prob(&path, &em) - want).abs() < 1e-9, "case {case}");
        let lead = path[0].time_index - 1;
        assert_eq!(lead + path.len(), t);
        assert!(path
            .windows(2)
            .all(|w| w[1].time_index == w[0].time_index + 1 && w[1].label_index - w[0].label_index <= 1));
        let got: Vec<usize> = path
            .iter()
            .enumerate()
            .filter(|(i, p)| *i == 0 || p.label_index != path[i - 1].label_index)
            .map(|(_, p)| p.time_index - 1)
            .collect();
        assert_eq!(got, advances, "case {case}");
    }
}

#[test]
fn two_frame_single_label_enumeration() {
    let vocab = small_vocab();
    let rows = [[0.5, 0.1, 0.2, 0.1, 0.1], [0.3, 0.1, 0.4, 0.1, 0.1]];
    let lp = rows.iter().flatten().map(|p: &f64| p.ln()).collect();
    let em = EmissionMatrix::new(lp, 2, vocab).unwrap();
    let trellis = build_trellis(&em, &[2]).unwrap();
    let early = 0.2f64.ln() + 0.3f64.ln();
    let late = 0.5f64.ln() + 0.4f64.ln();
    assert!((trellis.score() - early.max(late)).abs() < 1e-12);
}

#[test]
fn synthetic_fixture_recovers_construction() {
    let vocab = LabelVocab::english();
    let joined = "THE|CAPITAL|OF|ROMAN|REPUBLIC|IS";
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let k: Vec<usize> = joined.chars().map(|_| rng.random_range(1..5)).collect();
    let fx = synthetic_emissions(joined, &vocab, &k, 3, 0.9).unwrap();
    let meta = AudioMeta {
        sample_count: 320 * fx.emissions.frames() as i64,
        sample_rate: 16000,
        frame_count: fx.emissions.frames(),
        token_rate: Rational::from_integer(25),
    };
    let al = align(&fx.emissions, "The capital of Roman Republic is", &meta).unwrap();
    let seg_frames: Vec<_> = al.segments.iter().map(|s| s.frame_start..s.frame_end).collect();
    assert_eq!(seg_frames, fx.label_frames);
    let words: Vec<_> = al.spans.iter().map(|s| (s.token_text.clone(), s.frame_start..s.frame_end)).collect();
    assert_eq!(words, fx.word_frames);
    assert_eq!(words.len(), 6);
    assert!(al
        .spans
        .windows(2)
        .all(|w| w[0].token_end <= w[1].token_start + 1 && w[0].token_start <= w[1].token_start));

    let (s0, s1) = subject_span(&al.spans, &["ROMAN".into(), "REPUBLIC".into()]).unwrap();
    assert_eq!(s0, al.spans[3].token_start);
    assert_eq!(s1, al.spans[4].token_end);
}

#[test]
fn one_word_one_span() {
    let vocab = LabelVocab::english();
    let fx = synthetic_emissions("HELLO", &vocab, &[2, 1, 3, 1, 2], 0, 0.8).unwrap();
    let meta = AudioMeta {
        sample_count: 16000,
        sample_rate: 16000,
        frame_count: fx.emissions.frames(),
        token_rate: Rational::from_integer(50),
    };
    let al = align(&fx.emissions, "hello", &meta).unwrap();
    assert_eq!(al.spans.len(), 1);
    assert_eq!(al.spans[0].token_text, "HELLO");
    assert_eq!((al.spans[0].frame_start, al.spans[0].frame_end), (0, 9));
    assert_eq!((al.spans[0].token_start, al.spans[0].token_end), (0, 50));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn segments_tile_the_path(seed in any::<u64>(), n in 1usize..6, extra in 0usize..10) {
        let vocab = small_vocab();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ids: Vec<usize> = (0..n).map(|_| rng.random_range(1..vocab.len())).collect();
        let em = random_emissions(&mut rng, n + extra, &vocab);
        let trellis = build_trellis(&em, &ids).unwrap();
        let path = backtrack(&trellis, &em).unwrap();
        let segs = merge_repeats(&path, &ids, &vocab);
        prop_assert_eq!(segs.len(), n);
        prop_assert_eq!(segs[0].frame_start, path[0].time_index - 1);
        prop_assert_eq!(segs.last().unwrap().frame_end, n + extra);
        for w in segs.windows(2) {
            prop_assert_eq!(w[0].frame_end, w[1].frame_start);
        }
        let spans = merge_words(&segs, &vocab);
        for w in spans.windows(2) {
            prop_assert!(w[0].frame_end <= w[1].frame_start);
        }
    }
}
