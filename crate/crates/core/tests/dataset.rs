use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;
use std::sync::OnceLock;

use cryptolang_core::cipher::{decipher_segment, encipher_segment, Inventory};
use cryptolang_core::dataset::{
    build_training_course, extract_incidental_bitexts, read_test_set, vary_grammar_excerpt, write_test_set,
    DatasetError, ResourcePack, TestSetBuilder, DEFAULT_SYMBOLS,
};
use cryptolang_core::evaluation::{extract_translation, normalize};
use cryptolang_core::instance::{Direction, Modality, PartitionId, PromptInstance, Track, Variant};
use cryptolang_core::keys::{assign_test_keys, KeyStore, Matrix};
use cryptolang_core::template::Template;
use regex::Regex;

const SEED: u64 = 7;

fn resources() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../resources")
}

fn pack() -> &'static ResourcePack {
    static PACK: OnceLock<ResourcePack> = OnceLock::new();
    PACK.get_or_init(|| ResourcePack::load(&resources()).expect("shipped pack loads"))
}

fn keys() -> &'static KeyStore {
    static KEYS: OnceLock<KeyStore> = OnceLock::new();
    KEYS.get_or_init(|| {
        let bases = TestSetBuilder::new(pack(), SEED).unwrap().base_instances();
        KeyStore::new(assign_test_keys(&bases, SEED, &Inventory::default()).unwrap()).unwrap()
    })
}

fn test_set() -> &'static Vec<PromptInstance> {
    static SET: OnceLock<Vec<PromptInstance>> = OnceLock::new();
    SET.get_or_init(|| TestSetBuilder::new(pack(), SEED).unwrap().build(keys()).unwrap())
}

#[test]
fn shipped_pack_has_the_full_grid() {
    let builder = TestSetBuilder::new(pack(), SEED).unwrap();
    assert_eq!(builder.len(), 1400);
    let bases = builder.base_instances();
    assert_eq!(bases.iter().filter(|(_, m)| *m == Matrix::Latin).count(), 400);
    assert_eq!(bases.iter().filter(|(_, m)| *m == Matrix::French).count(), 500);
    assert_eq!(bases.iter().filter(|(_, m)| *m == Matrix::ReversedFrench).count(), 500);

    let set = test_set();
    assert_eq!(set.len(), 33_600);
    let mut per_variant: HashMap<Variant, usize> = HashMap::new();
    for p in set {
        *per_variant.entry(p.variant()).or_default() += 1;
    }
    assert_eq!(per_variant.len(), 24);
    assert!(per_variant.values().all(|&n| n == 1400));
    let ids: BTreeSet<_> = set.iter().map(|p| p.instance_id.as_str()).collect();
    assert_eq!(ids.len(), set.len());
}

#[test]
fn every_prompt_is_consistent_with_its_key() {
    let builder = TestSetBuilder::new(pack(), SEED).unwrap();
    let keys = keys();
    let variants = Variant::all();
    let n = builder.len();
    for (k, inst) in test_set().iter().enumerate() {
        let (index, variant) = (k % n, &variants[k / n]);
        let key = &keys.get(&inst.key_ref).unwrap().key;
        let template = Template::parse(&builder.prompt_template(index, variant).unwrap()).unwrap();
        assert_eq!(template.render_with_case(key), inst.prompt, "{}", inst.instance_id);
        for span in template.encrypt_spans() {
            let enciphered = encipher_segment(key, span);
            let back = decipher_segment(key, &enciphered).unwrap();
            assert_eq!(back, span.to_lowercase(), "{}", inst.instance_id);
        }
    }
}

#[test]
fn references_are_well_formed() {
    let by_id: HashMap<_, _> = pack().test_bitexts.iter().map(|b| (b.id.as_str(), b)).collect();
    for inst in test_set() {
        let bitext = by_id[inst.base_instance_id.as_str()];
        assert!(!inst.reference.is_empty());
        assert!(!inst.reference.contains('@'));
        match inst.direction {
            Direction::EngToArt => {
                assert_ne!(inst.reference, bitext.english.to_lowercase(), "{}", inst.instance_id);
                assert_eq!(
                    inst.ad_order_error_reference.is_some(),
                    inst.partition.is_adjective(),
                    "{}",
                    inst.instance_id
                );
            }
            Direction::ArtToEng => {
                assert_eq!(inst.reference, bitext.english.to_lowercase());
                assert!(inst.ad_order_error_reference.is_none());
            }
        }
        if let Some(ad) = &inst.ad_order_error_reference {
            assert_ne!(ad, &inst.reference);
        }
    }
}

#[test]
fn baseline_and_fine_tuned_prompts_match() {
    let set = test_set();
    let mut by_key: HashMap<(String, Direction, Modality, bool), Vec<&str>> = HashMap::new();
    for p in set {
        by_key
            .entry((p.base_instance_id.clone(), p.direction, p.modality, p.cot))
            .or_default()
            .push(&p.prompt);
    }
    assert!(by_key.values().all(|v| v.len() == Track::ALL.len() && v[0] == v[1]));
}

#[test]
fn variant_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let subset: Vec<PromptInstance> = test_set().iter().step_by(97).cloned().collect();
    let paths = write_test_set(dir.path(), &subset).unwrap();
    assert_eq!(paths.len(), 24);
    let mut back = read_test_set(dir.path()).unwrap();
    let mut expected = subset.clone();
    back.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
    expected.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
    assert_eq!(back, expected);
}

#[test]
fn plural_exception_is_an_incidental_bitext() {
    let excerpt = pack().excerpt(Matrix::French, PartitionId::P1).unwrap();
    let lines: Vec<String> = extract_incidental_bitexts(&excerpt).iter().map(|b| b.line()).collect();
    assert!(
        extract_incidental_bitexts(&excerpt)
            .iter()
            .any(|b| b.conlang_template == "@pneu@ > @pneus@" && b.english == "tires"),
        "{lines:#?}"
    );
}

/// Independent oracle: a regex over the first paraphrase of each paragraph.
#[test]
fn incidental_bitexts_match_a_regex_scan() {
    let chain = Regex::new(r#"((?:@[^@]+@\s*(?:>|→|-->|becomes|gives)\s*)*@[^@]+@)(?:,\s*meaning\s*|\s*)['‘]([^'’]+)['’]"#)
        .unwrap();
    for m in [Matrix::French, Matrix::Latin] {
        for p in PartitionId::ALL.into_iter().filter(|p| p.admits(m)) {
            let excerpt = pack().excerpt(m, p).unwrap();
            let found: Vec<(String, String)> = extract_incidental_bitexts(&excerpt)
                .into_iter()
                .map(|b| (b.conlang_template, b.english))
                .collect();
            // Every regex hit on the canonical text must be reported.
            let canonical = excerpt.canonical().unwrap();
            for caps in chain.captures_iter(&canonical) {
                let pair = (caps[1].split_whitespace().collect::<Vec<_>>().join(" "), caps[2].to_string());
                assert!(found.contains(&pair), "{m} {p}: {pair:?} missing");
            }
            assert!(!found.is_empty());
        }
    }
}

#[test]
fn training_grammar_never_reuses_the_test_rendering() {
    let pack = pack();
    let builder = TestSetBuilder::new(pack, SEED).unwrap();
    let spec = pack.course("Course 1").unwrap();
    let course = build_training_course(spec, pack, SEED).unwrap();
    assert_eq!(course.instances.len(), 276);
    for (inst, grammar) in course.instances.iter().zip(&course.grammar_templates) {
        let canonical = builder.canonical_grammar(inst.instance.matrix, inst.instance.partition).unwrap();
        assert_ne!(grammar, canonical);
        assert_eq!(inst.instance.modality, Modality::WG);
        assert_eq!(inst.instance.track, Track::FineTuned);
    }
    let art_eng = course.instances.iter().filter(|t| t.instance.direction == Direction::ArtToEng).count();
    let spontaneous = course.instances.iter().filter(|t| !t.instance.cot).count();
    assert_eq!((art_eng, spontaneous), (25, 25));
    let french = course.instances.iter().filter(|t| t.instance.matrix == Matrix::French).count();
    assert_eq!(french, 138);
}

#[test]
fn training_completions_carry_the_reference() {
    let pack = pack();
    let course = build_training_course(pack.course("course-6").unwrap(), pack, 11).unwrap();
    assert_eq!(course.instances.len(), 326);
    let ids: BTreeSet<_> = course.keys.iter().map(|k| k.instance_id.as_str()).collect();
    assert_eq!(ids.len(), 326);
    for t in &course.instances {
        let answer = extract_translation(&t.completion).map(|a| normalize(&a));
        assert_eq!(answer, Some(normalize(&t.instance.reference)), "{}", t.instance.instance_id);
    }
}

#[test]
fn training_keys_differ_from_test_keys() {
    let pack = pack();
    let course = build_training_course(pack.course("Course 3").unwrap(), pack, SEED).unwrap();
    let test: BTreeSet<_> = keys().records().iter().map(|r| r.key.mapping().to_vec()).collect();
    assert!(course.keys.iter().all(|k| !test.contains(&k.key.mapping().to_vec())));
}

#[test]
fn latin_cannot_be_trained_on() {
    let mut spec = pack().course("Course 1").unwrap().clone();
    spec.partitions = vec![PartitionId::P8a];
    assert!(matches!(
        build_training_course(&spec, pack(), SEED),
        Err(DatasetError::InvalidResource { .. })
    ));
}

#[test]
fn every_course_builds_with_the_listed_count() {
    let pack = pack();
    let expected = [276, 1292, 754, 370, 286, 326, 376, 1408];
    assert_eq!(pack.courses.len(), expected.len());
    for (spec, n) in pack.courses.iter().zip(expected) {
        assert_eq!(spec.count, n);
        let course = build_training_course(spec, pack, 3).unwrap();
        assert_eq!(course.instances.len(), n, "{}", spec.name);
        let parts: BTreeSet<_> = course.instances.iter().map(|t| t.instance.partition).collect();
        assert_eq!(parts.len(), spec.partitions.len(), "{}", spec.name);
    }
}

#[test]
fn grammar_variation_is_deterministic_and_reorders_only() {
    let excerpt = pack().excerpt(Matrix::ReversedFrench, PartitionId::P7f).unwrap();
    let a = vary_grammar_excerpt(&excerpt, 99, &DEFAULT_SYMBOLS).unwrap();
    assert_eq!(a, vary_grammar_excerpt(&excerpt, 99, &DEFAULT_SYMBOLS).unwrap());
    assert_ne!(a, vary_grammar_excerpt(&excerpt, 100, &DEFAULT_SYMBOLS).unwrap());
    // Every section title survives any rendering.
    for title in ["ARTICLES AND DETERMINERS", "NOUNS", "ADJECTIVES", "RELATIVE CLAUSES"] {
        assert!(a.contains(title), "{title}");
    }
}

#[test]
fn reversed_french_grammar_mirrors_positions() {
    let fr = pack().excerpt(Matrix::French, PartitionId::P2m).unwrap().canonical().unwrap();
    let rev = pack().excerpt(Matrix::ReversedFrench, PartitionId::P2m).unwrap().canonical().unwrap();
    assert!(fr.contains("are placed after the noun"));
    assert!(rev.contains("are placed before the noun"));
    // Examples themselves are untouched; the cipher reverses them.
    assert!(fr.contains("@les chats noirs@") && rev.contains("@les chats noirs@"));
}
