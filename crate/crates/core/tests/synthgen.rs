mod common;

use std::collections::{BTreeSet, HashMap};

use common::{load_fixture, toy_corpus};
use covcon::conllu::{DepSentence, DepToken};
use covcon::scoring::Direction;
use covcon::spans::{extract_spans, PosConfig};
use covcon::synthgen::{
    constructible_by_addition, dataset_stats, generate, samples_for_deletions, GenConfig, Label,
    LabelTokenizer, SampleKind, SynthSample, TsvTranslator, WordSubstitutionTranslator,
};

fn bad_tokens(tokens: &[String], labels: &[Label]) -> Vec<String> {
    tokens
        .iter()
        .zip(labels)
        .filter(|(_, l)| l.is_bad())
        .map(|(t, _)| t.clone())
        .collect()
}

fn by_kind(samples: &[SynthSample], kind: SampleKind) -> &SynthSample {
    samples.iter().find(|s| s.kind == kind).unwrap()
}

#[test]
fn en_de_masks() {
    let en = load_fixture("en_de.en.conllu");
    let span = extract_spans(&en, &PosConfig::default())
        .into_iter()
        .find(|c| c.text == "against a team like us")
        .unwrap();
    let mut tr = TsvTranslator::new();
    tr.insert(
        "But they haven't played against a team like us.",
        "Aber sie haben nicht gegen ein Team wie uns gespielt.",
    );
    tr.insert(
        "But they haven't played .",
        "Aber sie haben nicht gespielt.",
    );
    let cfg = GenConfig::new(Direction::new("en", "de").unwrap(), 0);
    let samples = samples_for_deletions(&en, &[span], &tr, &cfg).unwrap();
    let kinds: Vec<SampleKind> = samples.iter().map(|s| s.kind).collect();
    assert_eq!(
        kinds,
        [
            SampleKind::NegativeFull,
            SampleKind::NegativePartial,
            SampleKind::AdditionPositive,
            SampleKind::OmissionPositive
        ]
    );
    let add = by_kind(&samples, SampleKind::AdditionPositive);
    assert_eq!(add.source, "But they haven't played .");
    assert_eq!(
        bad_tokens(&add.tgt_tokens, &add.tgt_labels),
        ["gegen", "ein", "Team", "wie", "uns"]
    );
    let om = by_kind(&samples, SampleKind::OmissionPositive);
    assert_eq!(om.target, "Aber sie haben nicht gespielt.");
    assert_eq!(
        bad_tokens(&om.src_tokens, &om.src_labels),
        ["against", "a", "team", "like", "us"]
    );
    for s in &samples {
        s.check_invariants().unwrap();
    }
}

#[test]
fn en_de_addition_mask_by_subsequence() {
    let tok = LabelTokenizer::Word;
    let full = tok.tokens("Aber sie haben nicht gegen ein Team wie uns gespielt .");
    let partial = tok.tokens("Aber sie haben nicht gespielt .");
    let mask = constructible_by_addition(&partial, &full).unwrap();
    assert_eq!(
        bad_tokens(&full, &mask),
        ["gegen", "ein", "Team", "wie", "uns"]
    );
}

fn zh_sentence() -> DepSentence {
    let rows = [
        ("医院", "NOUN", 5),
        ("和", "CCONJ", 3),
        ("企业", "NOUN", 1),
        ("共同", "ADV", 5),
        ("研发", "VERB", 0),
        ("相关", "ADJ", 8),
        ("检测", "NOUN", 8),
        ("试剂盒", "NOUN", 5),
        ("，", "PUNCT", 10),
        ("惠及", "VERB", 5),
        ("更多", "ADJ", 13),
        ("肿瘤", "NOUN", 13),
        ("患者", "NOUN", 10),
        ("。", "PUNCT", 5),
    ];
    let tokens = rows
        .iter()
        .enumerate()
        .map(|(i, &(form, upos, head))| {
            DepToken::new(i + 1, form, upos, head, "dep").no_space_after()
        })
        .collect();
    DepSentence::new("zh-1", tokens)
}

#[test]
fn zh_en_masks() {
    let zh = zh_sentence();
    assert_eq!(
        zh.reconstruct_text(&BTreeSet::new()).unwrap(),
        "医院和企业共同研发相关检测试剂盒，惠及更多肿瘤患者。"
    );
    let span = extract_spans(&zh, &PosConfig::default())
        .into_iter()
        .find(|c| c.text == "肿瘤")
        .unwrap();
    let mut tr = TsvTranslator::new();
    tr.insert(
        "医院和企业共同研发相关检测试剂盒，惠及更多肿瘤患者。",
        "Hospitals and enterprises jointly develop related test kits to benefit more cancer patients.",
    );
    tr.insert(
        "医院和企业共同研发相关检测试剂盒，惠及更多患者。",
        "Hospitals and enterprises jointly develop related test kits to benefit more patients.",
    );
    let cfg = GenConfig::new(Direction::new("zh", "en").unwrap(), 0);
    assert_eq!(cfg.src_tokenizer, LabelTokenizer::Character);
    let samples = samples_for_deletions(&zh, &[span], &tr, &cfg).unwrap();
    assert_eq!(samples.len(), 4);
    let add = by_kind(&samples, SampleKind::AdditionPositive);
    assert_eq!(
        add.source,
        "医院和企业共同研发相关检测试剂盒，惠及更多患者。"
    );
    assert_eq!(bad_tokens(&add.tgt_tokens, &add.tgt_labels), ["cancer"]);
    let om = by_kind(&samples, SampleKind::OmissionPositive);
    assert_eq!(bad_tokens(&om.src_tokens, &om.src_labels), ["肿", "瘤"]);
    assert_eq!(om.src_tokens.len(), 26);
}

#[test]
fn identical_translations_yield_nothing() {
    let en = load_fixture("en_de.en.conllu");
    let span = extract_spans(&en, &PosConfig::default()).remove(0);
    let mut tr = TsvTranslator::new();
    tr.insert("But they haven't played against a team like us.", "gleich");
    tr.insert("But they haven't played .", "gleich");
    let cfg = GenConfig::new(Direction::new("en", "de").unwrap(), 0);
    assert!(samples_for_deletions(&en, &[span], &tr, &cfg)
        .unwrap()
        .is_empty());
}

fn toy_samples(
    seed: u64,
    sentences: usize,
) -> (Vec<SynthSample>, Vec<DepSentence>, HashMap<String, String>) {
    let toy = toy_corpus(seed, sentences);
    let tr = WordSubstitutionTranslator::new(toy.lexicon.clone());
    let cfg = GenConfig::new(Direction::new("en", "de").unwrap(), seed)
        .with_deletion_prob(0.3)
        .unwrap();
    let samples = generate(&toy.sentences, &tr, &cfg).unwrap();
    (samples, toy.sentences, toy.lexicon.into_iter().collect())
}

#[test]
fn toy_corpus_invariants() {
    let (samples, sentences, lex) = toy_samples(5, 50);
    assert!(!samples.is_empty());
    assert_eq!(samples.len() % 4, 0);
    let by_id: HashMap<&str, &DepSentence> =
        sentences.iter().map(|s| (s.sent_id.as_str(), s)).collect();
    for group in samples.chunks(4) {
        let sent = by_id[group[0].provenance.sent_id.as_str()];
        let deleted: BTreeSet<usize> = group[0]
            .provenance
            .deleted_spans
            .iter()
            .flatten()
            .copied()
            .collect();
        let deleted_forms: Vec<String> = deleted
            .iter()
            .map(|&id| sent.tokens[id - 1].form.clone())
            .collect();
        let deleted_mt: Vec<String> = deleted_forms.iter().map(|f| lex[f].clone()).collect();
        for s in group {
            s.check_invariants().unwrap();
            assert_eq!(s.provenance.sent_id, sent.sent_id);
            let src_bad = bad_tokens(&s.src_tokens, &s.src_labels);
            let tgt_bad = bad_tokens(&s.tgt_tokens, &s.tgt_labels);
            assert!(src_bad.is_empty() || tgt_bad.is_empty());
            match s.kind {
                SampleKind::OmissionPositive => assert_eq!(src_bad, deleted_forms),
                SampleKind::AdditionPositive => assert_eq!(tgt_bad, deleted_mt),
                _ => assert!(src_bad.is_empty() && tgt_bad.is_empty()),
            }
        }
    }
}

#[test]
fn seeded_generation_is_reproducible() {
    let dump = |s: &[SynthSample]| {
        s.iter()
            .map(|x| serde_json::to_string(x).unwrap() + "\n")
            .collect::<String>()
    };
    let (a, _, _) = toy_samples(9, 60);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let (b, _, _) = pool.install(|| toy_samples(9, 60));
    assert_eq!(dump(&a), dump(&b));
    let (c, _, _) = toy_samples(10, 60);
    assert_ne!(dump(&a), dump(&c));
}

#[test]
fn stats_match_a_recount() {
    let (samples, _, _) = toy_samples(21, 50);
    let st = dataset_stats(&samples);
    let count = |labels: &dyn Fn(&SynthSample) -> &Vec<Label>, bad: bool| -> usize {
        samples
            .iter()
            .map(|s| labels(s).iter().filter(|l| l.is_bad() == bad).count())
            .sum()
    };
    assert_eq!(st.segments, samples.len());
    assert_eq!(
        st.with_addition,
        samples
            .iter()
            .filter(|s| s.tgt_labels.contains(&Label::Bad))
            .count()
    );
    assert_eq!(
        st.with_omission,
        samples
            .iter()
            .filter(|s| s.src_labels.contains(&Label::Bad))
            .count()
    );
    assert_eq!(st.src_ok, count(&|s| &s.src_labels, false));
    assert_eq!(st.src_bad, count(&|s| &s.src_labels, true));
    assert_eq!(st.tgt_ok, count(&|s| &s.tgt_labels, false));
    assert_eq!(st.tgt_bad, count(&|s| &s.tgt_labels, true));
    assert_eq!(dataset_stats(&[]), Default::default());
}
