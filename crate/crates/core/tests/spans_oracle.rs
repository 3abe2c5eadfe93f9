mod common;

use std::collections::BTreeSet;

use common::{load_fixture, oracle_spans, random_forms, random_tree, DEFAULT_POS};
use covcon::spans::{extract_spans, make_partial, PosConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tree_strategy() -> impl Strategy<Value = covcon::conllu::DepSentence> {
    (1usize..=12, any::<u64>()).prop_map(|(n, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let forms = random_forms(&mut rng, n);
        random_tree(&mut rng, "p", &forms)
    })
}

proptest! {
    #[test]
    fn extract_matches_brute_force(s in tree_strategy()) {
        prop_assert!(s.is_valid());
        let got: BTreeSet<(usize, Vec<usize>)> = extract_spans(&s, &PosConfig::default())
            .into_iter()
            .map(|c| (c.head_id, c.token_ids))
            .collect();
        prop_assert_eq!(got, oracle_spans(&s, DEFAULT_POS));
    }

    #[test]
    fn candidates_are_ordered_and_well_formed(s in tree_strategy()) {
        let spans = extract_spans(&s, &PosConfig::default());
        let full = s.reconstruct_text(&BTreeSet::new()).unwrap();
        for w in spans.windows(2) {
            let key = |c: &covcon::spans::ErrorSpanCandidate| (c.first_id(), std::cmp::Reverse(c.token_ids.len()), c.head_id);
            prop_assert!(key(&w[0]) < key(&w[1]));
        }
        for c in &spans {
            let text: String = full.chars().skip(c.char_start).take(c.char_end - c.char_start).collect();
            prop_assert_eq!(&text, &c.text);
            let partial = make_partial(&s, c).unwrap();
            prop_assert!(partial.chars().count() < full.chars().count());
        }
    }

    #[test]
    fn custom_pos_sets_match_brute_force(s in tree_strategy(), mask in 1u32..(1 << 6)) {
        let tags: Vec<&str> = ["NOUN", "VERB", "DET", "ADP", "PUNCT", "PRON"]
            .into_iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, t)| t)
            .collect();
        let cfg = PosConfig::new(tags.iter().copied()).unwrap();
        let got: BTreeSet<(usize, Vec<usize>)> = extract_spans(&s, &cfg)
            .into_iter()
            .map(|c| (c.head_id, c.token_ids))
            .collect();
        prop_assert_eq!(got, oracle_spans(&s, &tags));
    }
}

#[test]
fn six_token_fixture() {
    let s = load_fixture("six_tokens.conllu");
    let ids: Vec<Vec<usize>> = extract_spans(&s, &PosConfig::default())
        .into_iter()
        .map(|c| c.token_ids)
        .collect();
    assert_eq!(ids, vec![vec![1, 2], vec![1], vec![4], vec![5, 6]]);
}

#[test]
fn apple_fixture_follows_the_pos_rule() {
    let s = load_fixture("apple.conllu");
    let texts: Vec<String> = extract_spans(&s, &PosConfig::default())
        .into_iter()
        .map(|c| c.text)
        .collect();
    assert_eq!(texts, ["quickly", "the red apple", "red"]);
}

#[test]
fn offsets_count_characters_not_bytes() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let forms: Vec<String> = ["Über", "große", "Häuser", "schön", "ñandú"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for _ in 0..50 {
        let s = random_tree(&mut rng, "u", &forms);
        let full = s.reconstruct_text(&BTreeSet::new()).unwrap();
        for c in extract_spans(&s, &PosConfig::default()) {
            let text: String = full
                .chars()
                .skip(c.char_start)
                .take(c.char_end - c.char_start)
                .collect();
            assert_eq!(text, c.text);
        }
    }
}
