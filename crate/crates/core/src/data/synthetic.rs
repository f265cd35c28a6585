//! Seeded synthetic corpora for tests, demos, and smoke runs.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Corpus, Label, NewsItem};

const NAMES: &[&str] = &[
    "Senator Harlow",
    "Mayor Quinn",
    "Governor Okafor",
    "Acme Energy",
    "Riverside Council",
    "Doctor Lindqvist",
    "Northgate University",
    "the Ministry of Transport",
    "Judge Moreau",
    "Bellweather Bank",
];

const VERBS: &[&str] = &[
    "announced",
    "questioned",
    "approved",
    "criticized",
    "reviewed",
    "postponed",
    "funded",
    "rejected",
];

const OBJECTS: &[&str] = &[
    "a new budget for public schools",
    "the bridge repair schedule",
    "plans for a regional rail link",
    "the annual water quality report",
    "a proposal to expand the harbor",
    "the hospital staffing review",
    "changes to the zoning rules",
    "an audit of city contracts",
];

const REAL_SIGNALS: &[&str] = &[
    "The figures were confirmed in the published meeting minutes.",
    "A spokesperson provided the full report to reporters on request.",
];

const FAKE_SIGNALS: &[&str] = &[
    "Insiders say the shocking truth is being hidden from everyone.",
    "Share this before it gets deleted by the people in charge!",
];

/// Parameters of a generated corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub name: String,
    pub n_real: usize,
    pub n_fake: usize,
    /// Probability that an item carries its class signature sentence; 1.0
    /// gives a perfectly separable corpus.
    pub signal: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Small balanced corpus where every item carries its class signature.
    pub fn separable(n: usize, seed: u64) -> Self {
        SyntheticSpec {
            name: format!("synthetic-separable-{n}"),
            n_real: n / 2,
            n_fake: n - n / 2,
            signal: 1.0,
            seed,
        }
    }

    /// Class sizes of the PolitiFact release (3,446 items), with a noisy
    /// signal.
    pub fn politifact_sized(seed: u64) -> Self {
        SyntheticSpec {
            name: "synthetic-politifact".into(),
            n_real: 1117 + 169 + 367,
            n_fake: 1295 + 175 + 323,
            signal: 0.7,
            seed,
        }
    }
}

fn filler(rng: &mut ChaCha8Rng) -> String {
    format!(
        "{} {} {}.",
        NAMES.choose(rng).expect("non-empty"),
        VERBS.choose(rng).expect("non-empty"),
        OBJECTS.choose(rng).expect("non-empty")
    )
}

fn article(rng: &mut ChaCha8Rng, label: Label, signal: f64) -> String {
    let n = rng.random_range(2..=5);
    let mut sentences: Vec<String> = (0..n).map(|_| filler(rng)).collect();
    let pool = match label {
        Label::Real => REAL_SIGNALS,
        Label::Fake => FAKE_SIGNALS,
    };
    if rng.random_bool(signal.clamp(0.0, 1.0)) {
        let at = rng.random_range(0..=sentences.len());
        sentences.insert(at, pool[0].to_string());
        if rng.random_bool(0.5) {
            sentences.push(pool[1].to_string());
        }
    }
    sentences.join(" ")
}

/// Generate a corpus with ascending timestamps (one per day from a fixed
/// origin) in shuffled label order.
pub fn generate(spec: &SyntheticSpec) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut labels: Vec<Label> = std::iter::repeat_n(Label::Real, spec.n_real)
        .chain(std::iter::repeat_n(Label::Fake, spec.n_fake))
        .collect();
    labels.shuffle(&mut rng);
    let origin = 1_500_000_000i64;
    let items = labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let text = article(&mut rng, label, spec.signal);
            NewsItem::new(format!("syn-{i:05}"), text, label).with_timestamp(origin + 86_400 * i as i64)
        })
        .collect();
    Corpus::new(spec.name.clone(), items).expect("generated ids are unique")
}
