//! Demo bundle: a planted-fact model, its lexicon and matching prompts, plus
//! synthetic emissions for one transcript.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aligner::EmissionsFile;
use crate::aligner::{preprocess_transcript, synthetic_emissions, AlignError, AudioMeta, LabelVocab, Rational};
use crate::dataset::KnownRecord;
use crate::model::{
    build_planted_fact_model, Lexicon, ModelError, PlantedFact, PlantedFactSpec, PlantedModel, VocabLayout,
};

/// `(country, capital)` pairs planted in the demo model.
pub const CAPITALS: [(&str, &str); 8] = [
    ("Italy", "Rome"),
    ("France", "Paris"),
    ("Spain", "Madrid"),
    ("Peru", "Lima"),
    ("Chile", "Santiago"),
    ("Japan", "Tokyo"),
    ("Egypt", "Cairo"),
    ("Kenya", "Nairobi"),
];

const TEMPLATE_WORDS: [&str; 4] = ["the", "capital", "of", "is"];

/// Layer whose MLP stores the demo facts.
pub const STORE_LAYER: usize = 1;

#[derive(Debug, Clone)]
pub struct PlantedBundle {
    pub planted: PlantedModel,
    pub lexicon: Lexicon,
    pub records: Vec<KnownRecord>,
}

/// Prompts read "The capital of {country} is", so the subject always sits at
/// position 4 after the text marker.
pub fn planted_bundle(n_layers: usize, background: f64, seed: u64) -> Result<PlantedBundle, ModelError> {
    let vocab = VocabLayout::standard(64, 16);
    let mut words: Vec<String> = TEMPLATE_WORDS.map(String::from).to_vec();
    for (c, o) in CAPITALS {
        words.push(c.to_lowercase());
        words.push(o.to_lowercase());
    }
    let lexicon = Lexicon::new(words, &vocab)?;
    let id = |w: &str| lexicon.lookup(w).expect("word in lexicon");
    let facts = CAPITALS.iter().map(|(c, o)| PlantedFact { subject: id(c), object: id(o) }).collect();
    let mut spec = PlantedFactSpec::new(facts, 6, 4, STORE_LAYER);
    spec.vocab = vocab;
    spec.n_layers = n_layers;
    spec.background = background;
    spec.seed = seed;
    let planted = build_planted_fact_model(&spec)?;
    let records = CAPITALS
        .iter()
        .enumerate()
        .map(|(i, (c, o))| {
            let mut r = KnownRecord::new(i.to_string(), format!("The capital of {c} is"), *c, *o)
                .expect("subject occurs in prompt");
            r.extra.insert("relation_id".into(), "P36".into());
            r
        })
        .collect();
    Ok(PlantedBundle { planted, lexicon, records })
}

/// Transcript used by the alignment demo.
pub const DEMO_TRANSCRIPT: &str = "The capital of Roman Republic is";

/// Synthetic emissions for `transcript` at 16 kHz, 320 samples per frame and
/// 25 speech tokens per second; each label owns 1 to 4 frames drawn from
/// `seed`, after 3 frames of leading silence.
pub fn demo_emissions(transcript: &str, seed: u64) -> Result<EmissionsFile, AlignError> {
    let vocab = LabelVocab::english();
    let joined = preprocess_transcript(transcript, &vocab)?.joined;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames: Vec<usize> = joined.chars().map(|_| rng.random_range(1..=4)).collect();
    let fx = synthetic_emissions(&joined, &vocab, &frames, 3, 0.9)?;
    let t = fx.emissions.frames() as i64;
    Ok(EmissionsFile {
        emissions: fx.emissions,
        sample_rate: 16_000,
        sample_count: 320 * t,
        token_rate: Some(Rational::from_integer(25)),
    })
}

/// Metadata matching [`demo_emissions`].
pub fn demo_meta(file: &EmissionsFile) -> AudioMeta {
    file.meta(None).expect("demo emissions carry a token rate")
}
