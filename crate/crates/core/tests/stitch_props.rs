mod common;

use common::{mock_bank, TOY_WORDS};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stitchvox_core::audio::fade_len;
use stitchvox_core::{stitch_sentence, SpeakerPolicy, StitchConfig};

#[test]
fn speaker_choice_is_uniform() {
    let voices = ["v0", "v1", "v2", "v3", "v4"];
    let bank = mock_bank(&voices);
    let mut counts = [0usize; 5];
    for seed in 0..10_000u64 {
        let (_, report) = stitch_sentence(
            "cat",
            &bank,
            &SpeakerPolicy::UniformRandom,
            &StitchConfig::default(),
            seed,
        )
        .unwrap();
        let i = voices.iter().position(|v| *v == report.speaker_id).unwrap();
        counts[i] += 1;
    }
    let expected = 10_000.0 / 5.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 4 degrees of freedom, p = 0.001 critical value
    assert!(chi2 < 18.47, "chi2 = {chi2}, counts = {counts:?}");
    for c in counts {
        assert!((c as f64 / 10_000.0 - 0.2).abs() <= 0.03, "{counts:?}");
    }
}

#[test]
fn one_speaker_per_utterance() {
    let bank = mock_bank(&["v0", "v1", "v2"]);
    for seed in 0..200 {
        let (_, report) = stitch_sentence(
            "the cat sat on the mat and we go home quickly",
            &bank,
            &SpeakerPolicy::UniformRandom,
            &StitchConfig::default(),
            seed,
        )
        .unwrap();
        assert!(report.tokens.iter().all(|t| t.speaker_id == report.speaker_id));
    }
}

#[test]
fn resampled_output() {
    let bank = mock_bank(&["v0"]);
    let cfg = StitchConfig {
        output_rate_hz: Some(16000),
        ..StitchConfig::default()
    };
    let (native, _) = stitch_sentence(
        "translate this sentence",
        &bank,
        &SpeakerPolicy::UniformRandom,
        &StitchConfig::default(),
        4,
    )
    .unwrap();
    let (audio, report) =
        stitch_sentence("translate this sentence", &bank, &SpeakerPolicy::UniformRandom, &cfg, 4).unwrap();
    assert_eq!(audio.sample_rate_hz(), 16000);
    assert_eq!(report.sample_rate_hz, 16000);
    assert!((audio.len() as f64 - native.len() as f64 * 2.0 / 3.0).abs() <= 1.0);
}

fn sentence_strategy() -> impl Strategy<Value = (Vec<String>, u64)> {
    let extra = prop::sample::select(vec!["apples", "cats", "zzzq", "Hello,", "(data)", "42", "—"]);
    let word = prop_oneof![
        4 => prop::sample::select(TOY_WORDS.to_vec()).prop_map(str::to_string),
        1 => extra.prop_map(str::to_string),
    ];
    (prop::collection::vec(word, 1..25), any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn length_identity_and_counts((words, seed) in sentence_strategy()) {
        let bank = mock_bank(&["v0", "v1"]);
        let sentence = words.join(" ");
        let cfg = StitchConfig::default();
        match stitch_sentence(&sentence, &bank, &SpeakerPolicy::UniformRandom, &cfg, seed) {
            Ok((audio, report)) => {
                let lens: Vec<usize> = report
                    .tokens
                    .iter()
                    .map(|t| bank.get_snippet(&t.speaker_id, &t.resolution.matched_word).unwrap().unwrap().len())
                    .collect();
                let fade_n = fade_len(cfg.fade_ms, 24000, usize::MAX, usize::MAX);
                let k = lens.len();
                prop_assert_eq!(audio.len(), lens.iter().sum::<usize>() - (k - 1) * fade_n);
                prop_assert_eq!(report.exact + report.fuzzy + report.fallback, k);
                prop_assert_eq!(report.num_samples, audio.len());
            }
            Err(e) => {
                prop_assert_eq!(e.to_string(), "no stitchable tokens");
                prop_assert!(words.iter().all(|w| w == "—"));
            }
        }
    }
}

#[test]
fn determinism_across_many_seeds() {
    let bank = mock_bank(&["v0", "v1", "v2"]);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cfg = StitchConfig {
        distort: true,
        ..StitchConfig::default()
    };
    for _ in 0..10 {
        let seed: u64 = rng.random();
        let a = stitch_sentence(
            "we train a good model",
            &bank,
            &SpeakerPolicy::UniformRandom,
            &cfg,
            seed,
        )
        .unwrap();
        let b = stitch_sentence(
            "we train a good model",
            &bank,
            &SpeakerPolicy::UniformRandom,
            &cfg,
            seed,
        )
        .unwrap();
        assert_eq!(a, b);
    }
}
