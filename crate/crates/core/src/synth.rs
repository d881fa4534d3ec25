// Copyright 2026 The semloss Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Deterministic synthetic goal-oriented corpus.
//!
//! Dialogues follow a travel-booking script of four user/agent exchanges.
//! Every agent turn is drawn from at least two paraphrase templates whose
//! slots are filled from synonym groups, so a context admits several valid
//! targets. The companion embedding table places synonyms close together.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::{tokenize, Dialogue, Speaker, Turn};
use crate::embeddings::EmbeddingTable;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SynthConfig {
    pub dialogues: usize,
    pub seed: u64,
    pub embedding_dim: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            dialogues: 500,
            seed: 17,
            embedding_dim: 50,
        }
    }
}

const CITIES: [&str; 60] = [
    "paris",
    "london",
    "berlin",
    "rome",
    "madrid",
    "lisbon",
    "vienna",
    "prague",
    "dublin",
    "oslo",
    "stockholm",
    "helsinki",
    "warsaw",
    "budapest",
    "athens",
    "istanbul",
    "cairo",
    "toronto",
    "montreal",
    "vancouver",
    "chicago",
    "boston",
    "denver",
    "seattle",
    "miami",
    "dallas",
    "houston",
    "atlanta",
    "phoenix",
    "tokyo",
    "osaka",
    "seoul",
    "beijing",
    "shanghai",
    "sydney",
    "melbourne",
    "auckland",
    "lima",
    "bogota",
    "santiago",
    "munich",
    "zurich",
    "geneva",
    "milan",
    "naples",
    "venice",
    "florence",
    "barcelona",
    "seville",
    "porto",
    "brussels",
    "amsterdam",
    "copenhagen",
    "edinburgh",
    "manchester",
    "krakow",
    "bangkok",
    "singapore",
    "mumbai",
    "delhi",
];

const MONTHS: [&str; 12] = [
    "january",
    "february",
    "march",
    "april",
    "may",
    "june",
    "july",
    "august",
    "september",
    "october",
    "november",
    "december",
];

/// A cluster of interchangeable words. Agent turns draw from `agent`, user
/// turns from `user`; both sides share one centre in the embedding table, so
/// user-side words are valid synonyms that never occur in a target.
pub struct SynonymGroup {
    pub name: &'static str,
    pub agent: &'static [&'static str],
    pub user: &'static [&'static str],
}

const fn g(name: &'static str, agent: &'static [&'static str], user: &'static [&'static str]) -> SynonymGroup {
    SynonymGroup { name, agent, user }
}

pub const SYNONYM_GROUPS: &[SynonymGroup] = &[
    g("hi", &[], &["hi", "hello", "hey"]),
    g("want", &["want", "wish"], &["need", "plan"]),
    g("go", &["travel"], &["go", "fly", "head"]),
    g("leave", &["leave", "depart"], &["start", "begin"]),
    g("return", &["return"], &["come", "get"]),
    g("sure", &["sure", "certainly", "absolutely"], &["gladly"]),
    g("okay", &["okay", "alright", "understood"], &["fine", "ok"]),
    g(
        "nice",
        &["nice", "lovely", "cozy"],
        &["decent", "comfortable", "pleasant"],
    ),
    g("great", &["great", "wonderful"], &["fantastic", "awesome", "amazing"]),
    g("done", &["done", "finished"], &["complete"]),
    g(
        "hotel",
        &["hotel", "inn", "resort"],
        &["lodge", "place", "accommodation"],
    ),
    g("book", &["book", "reserve"], &["secure", "arrange"]),
    g("cheap", &["cheap", "affordable"], &["inexpensive", "reasonable"]),
    g("budget", &["budget"], &["limit", "allowance"]),
    g("trip", &["trip", "journey"], &["vacation", "holiday", "getaway"]),
    g("spend", &["spend"], &["pay", "afford"]),
    g("yes", &[], &["yes", "yeah", "yep"]),
    g("please", &[], &["please", "kindly"]),
    g("perfect", &["perfect"], &["excellent", "ideal"]),
    g("thanks", &["thanks"], &["cheers", "thank"]),
];

const ASK_DATES: &[&str] = &[
    "{sure} ! when would you like to {leave} ?",
    "{sure} , what dates are you looking at ?",
    "i can help with that . when do you {want} to {leave} and {return} ?",
    "{okay} , which dates work for your {trip} ?",
];

const ASK_BUDGET: &[&str] = &[
    "{okay} , what is your {budget} for this {trip} ?",
    "how much would you like to {spend} ?",
    "{okay} . do you have a {budget} in mind ?",
    "{sure} , how much can you {spend} on the {trip} ?",
];

const OFFER: &[&str] = &[
    "i found a {nice} {hotel} in {city} for {price} dollars . shall i {book} it ?",
    "there is a {nice} {hotel} in {city} at {price} dollars a night . should i {book} it ?",
    "{city} has a {cheap} {hotel} for {price} dollars . would you like me to {book} it ?",
    "the best option is a {nice} {hotel} in {city} for {price} dollars . {want} me to {book} it ?",
];

const CONFIRM: &[&str] = &[
    "{done} ! your {trip} to {city} is booked . anything else ?",
    "your {trip} to {city} is confirmed . have a {great} time !",
    "{perfect} . enjoy your {trip} in {city} !",
    "all set , the {hotel} in {city} is booked . {thanks} for choosing us !",
];

const USER_OPEN: &[&str] = &[
    "{hi} , i {want} to {go} to {city} from {origin} .",
    "{hi} . i would like a {trip} from {origin} to {city} .",
    "i {want} a {cheap} {hotel} in {city} , leaving from {origin} .",
];

const USER_DATES: &[&str] = &[
    "i {want} to {leave} on {month} {d1} and {return} back on {month2} {d2} .",
    "from {month} {d1} to {month2} {d2} , {please} .",
    "leaving {month} {d1} , back on {month2} {d2} for a {great} {trip} .",
];

const USER_BUDGET: &[&str] = &[
    "my {budget} is {amount} dollars .",
    "i can {spend} about {amount} dollars on a {nice} {hotel} .",
    "around {amount} dollars , {please} .",
];

const USER_ACCEPT: &[&str] = &[
    "{yes} , {please} {book} it .",
    "that sounds {great} , go ahead and {book} it .",
    "{perfect} , i will take the {hotel} . {thanks} !",
    "{yes} , that is {perfect} .",
];

/// Paraphrase templates for each agent turn, in dialogue order.
pub fn agent_templates() -> [&'static [&'static str]; 4] {
    [ASK_DATES, ASK_BUDGET, OFFER, CONFIRM]
}

fn group(name: &str, speaker: Speaker) -> &'static [&'static str] {
    let g = SYNONYM_GROUPS
        .iter()
        .find(|g| g.name == name)
        .unwrap_or_else(|| panic!("no synonym group named {name}"));
    let words = match speaker {
        Speaker::Agent => g.agent,
        Speaker::User => g.user,
    };
    assert!(!words.is_empty(), "group {name} has no {speaker:?} words");
    words
}

struct Slots<'a> {
    city: &'a str,
    origin: &'a str,
    month: &'a str,
    month2: &'a str,
    d1: String,
    d2: String,
    amount: String,
    price: String,
}

fn fill<R: Rng + ?Sized>(template: &str, speaker: Speaker, slots: &Slots<'_>, rng: &mut R) -> String {
    let mut out = Vec::new();
    for word in template.split(' ') {
        let filled = match word.strip_prefix('{').and_then(|w| w.strip_suffix('}')) {
            None => word.to_string(),
            Some("city") => slots.city.to_string(),
            Some("origin") => slots.origin.to_string(),
            Some("month") => slots.month.to_string(),
            Some("month2") => slots.month2.to_string(),
            Some("d1") => slots.d1.clone(),
            Some("d2") => slots.d2.clone(),
            Some("amount") => slots.amount.clone(),
            Some("price") => slots.price.clone(),
            Some(name) => group(name, speaker).choose(rng).expect("non-empty group").to_string(),
        };
        out.push(filled);
    }
    out.join(" ")
}

/// Generate `config.dialogues` dialogues; identical configs give identical output.
pub fn synth_dialogues(config: &SynthConfig) -> Vec<Dialogue> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    (0..config.dialogues)
        .map(|i| {
            let city = *CITIES.choose(&mut rng).expect("cities");
            let origin = loop {
                let c = *CITIES.choose(&mut rng).expect("cities");
                if c != city {
                    break c;
                }
            };
            let m = rng.random_range(0..MONTHS.len());
            let d1 = rng.random_range(1..=20u32);
            let span = rng.random_range(2..=8u32);
            let (month2, d2) = if d1 + span > 28 {
                (MONTHS[(m + 1) % 12], d1 + span - 28)
            } else {
                (MONTHS[m], d1 + span)
            };
            let amount = 250 * rng.random_range(2..=12u32);
            let price = 20 * rng.random_range(4..=30u32);
            let slots = Slots {
                city,
                origin,
                month: MONTHS[m],
                month2,
                d1: d1.to_string(),
                d2: d2.to_string(),
                amount: amount.to_string(),
                price: price.to_string(),
            };
            let user = [USER_OPEN, USER_DATES, USER_BUDGET, USER_ACCEPT];
            let mut turns = Vec::with_capacity(8);
            for (u, a) in user.iter().zip(agent_templates()) {
                let ut = u.choose(&mut rng).expect("templates");
                turns.push(Turn::new(Speaker::User, fill(ut, Speaker::User, &slots, &mut rng)));
                let at = a.choose(&mut rng).expect("templates");
                turns.push(Turn::new(Speaker::Agent, fill(at, Speaker::Agent, &slots, &mut rng)));
            }
            Dialogue {
                id: format!("synth-{i:04}"),
                turns,
            }
        })
        .collect()
}

/// Every token the generator can emit, sorted and deduplicated.
pub fn synth_lexicon() -> Vec<String> {
    let mut words: Vec<String> = Vec::new();
    let templates = [
        ASK_DATES,
        ASK_BUDGET,
        OFFER,
        CONFIRM,
        USER_OPEN,
        USER_DATES,
        USER_BUDGET,
        USER_ACCEPT,
    ];
    for t in templates.iter().flat_map(|t| t.iter()) {
        words.extend(tokenize(t).into_iter().filter(|w| w != "{" && w != "}"));
    }
    words.extend(
        SYNONYM_GROUPS
            .iter()
            .flat_map(|g| g.agent.iter().chain(g.user))
            .map(|w| w.to_string()),
    );
    words.extend(CITIES.iter().chain(MONTHS.iter()).map(|w| w.to_string()));
    words.extend((1..=28).map(|d: u32| d.to_string()));
    words.extend((2..=12).map(|k: u32| (250 * k).to_string()));
    words.extend((4..=30).map(|k: u32| (20 * k).to_string()));
    words.sort();
    words.dedup();
    words
}

pub const SYNTH_VECTOR_STD: f64 = 0.6;

fn gaussian_vector<R: Rng + ?Sized>(dim: usize, std: f64, rng: &mut R) -> Vec<f64> {
    let normal = Normal::new(0.0, std).expect("valid std");
    (0..dim).map(|_| normal.sample(rng)).collect()
}

/// Word vectors for [`synth_lexicon`]: synonyms sit near a shared centre,
/// cities, months and numbers near their class centre, everything else at
/// an independent random point. Coordinates have standard deviation about
/// [`SYNTH_VECTOR_STD`], giving norms near those of common pretrained
/// 50-dimensional vectors.
pub fn synth_embeddings(config: &SynthConfig) -> EmbeddingTable {
    let dim = config.embedding_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let unit = SYNTH_VECTOR_STD;
    let mut centres: Vec<(Vec<&str>, Vec<f64>, f64)> = Vec::new();
    for g in SYNONYM_GROUPS {
        let members = g.agent.iter().chain(g.user).copied().collect();
        centres.push((members, gaussian_vector(dim, unit, &mut rng), 0.15));
    }
    let numbers: Vec<String> = (1..=28u32)
        .chain((2..=12).map(|k| 250 * k))
        .chain((4..=30).map(|k| 20 * k))
        .map(|n| n.to_string())
        .collect();
    let number_refs: Vec<&str> = numbers.iter().map(String::as_str).collect();
    for class in [CITIES.to_vec(), MONTHS.to_vec(), number_refs] {
        centres.push((class, gaussian_vector(dim, unit, &mut rng), 0.5));
    }

    let mut table = EmbeddingTable::new(dim);
    for word in synth_lexicon() {
        // A word listed in several groups takes the first.
        let v = match centres.iter().find(|(members, _, _)| members.contains(&word.as_str())) {
            Some((_, centre, spread)) => {
                let noise = gaussian_vector(dim, unit * spread, &mut rng);
                centre.iter().zip(noise).map(|(c, n)| c + n).collect()
            }
            None => gaussian_vector(dim, unit, &mut rng),
        };
        table.insert(word, v);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::corpus_pairs;
    use crate::embeddings::l2_distance;

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig {
            dialogues: 20,
            ..SynthConfig::default()
        };
        assert_eq!(synth_dialogues(&cfg), synth_dialogues(&cfg));
        assert_eq!(synth_embeddings(&cfg).to_text(), synth_embeddings(&cfg).to_text());
    }

    #[test]
    fn default_corpus_has_expected_scale() {
        let cfg = SynthConfig::default();
        let dialogues = synth_dialogues(&cfg);
        let pairs = corpus_pairs(&dialogues, usize::MAX);
        assert_eq!(pairs.len(), 2000);
        let lexicon = synth_lexicon();
        for d in &dialogues {
            for t in &d.turns {
                for tok in &t.tokens {
                    assert!(lexicon.binary_search(tok).is_ok(), "{tok} missing from lexicon");
                }
            }
        }
        assert!((250..=350).contains(&lexicon.len()), "lexicon size {}", lexicon.len());
    }

    #[test]
    fn user_side_synonyms_never_reach_targets() {
        let dialogues = synth_dialogues(&SynthConfig::default());
        let pairs = corpus_pairs(&dialogues, usize::MAX);
        let user_only: Vec<&str> = SYNONYM_GROUPS
            .iter()
            .filter(|g| !g.agent.is_empty())
            .flat_map(|g| g.user.iter().copied())
            .filter(|w| SYNONYM_GROUPS.iter().all(|g| !g.agent.contains(w)))
            .collect();
        let mut in_context = 0;
        for p in &pairs {
            for w in &user_only {
                assert!(!p.response().iter().any(|t| t == w), "{w} in a target");
            }
            in_context += p.context.iter().filter(|t| user_only.contains(&t.as_str())).count();
        }
        assert!(in_context > 0);
    }

    #[test]
    fn every_agent_turn_has_paraphrases() {
        for templates in agent_templates() {
            assert!(templates.len() >= 2);
        }
    }

    #[test]
    fn synonyms_are_closer_than_strangers() {
        let table = synth_embeddings(&SynthConfig::default());
        let d = |a: &str, b: &str| l2_distance(table.get(a).unwrap(), table.get(b).unwrap());
        assert!(d("hotel", "inn") < d("hotel", "paris"));
        assert!(d("sure", "certainly") < d("sure", "dollars"));
    }
}
