use std::collections::BTreeSet;

use tiediv::encounter::{read_encounters, write_encounters};
use tiediv::experiments::{synth_generate, Archetype, SynthConfig};
use tiediv::features::{read_features, write_features};
use tiediv::preprocess::{read_clean_fixes, read_valid_days, write_clean_fixes, write_valid_days};
use tiediv::{run_pipeline, PipelineConfig};

fn small(seed: u64) -> SynthConfig {
    SynthConfig {
        pairs_per_archetype: 6,
        n_days: 9,
        seed,
        ..SynthConfig::default()
    }
}

#[test]
fn detected_encounters_are_the_planned_ones() {
    let data = synth_generate(&small(3)).unwrap();
    let out = run_pipeline(&data.fixes, &data.survey, &PipelineConfig::default()).unwrap();
    assert_eq!(out.dataset.pairs.len(), 12);
    for (pair, planned) in &data.planned {
        let want: BTreeSet<_> = planned.iter().copied().collect();
        let got: BTreeSet<_> = out.encounters[pair]
            .encounters
            .iter()
            .map(|e| (e.day, e.slot))
            .collect();
        assert_eq!(got, want, "{pair}");
    }
}

#[test]
fn a_fixed_daily_slot_has_diversity_one() {
    let cfg = SynthConfig {
        schedule_slots: 1,
        jitter_slots: 0,
        encounters_per_day: 1,
        meet_probability: 1.0,
        ..small(5)
    };
    let data = synth_generate(&cfg).unwrap();
    let out = run_pipeline(&data.fixes, &data.survey, &PipelineConfig::default()).unwrap();
    let rows = out
        .dataset
        .feature_rows(PipelineConfig::default().features)
        .unwrap();
    for row in rows {
        let f = &row.features;
        assert_eq!(f.mean_encounters, 1.0);
        if data.truth[&f.pair] == Archetype::Scheduled {
            assert_eq!(f.temporal_diversity, 1.0);
        } else {
            assert!(f.temporal_diversity >= 1.0);
        }
    }
}

#[test]
fn artifacts_round_trip() {
    let data = synth_generate(&small(11)).unwrap();
    let out = run_pipeline(&data.fixes, &data.survey, &PipelineConfig::default()).unwrap();

    let mut buf = Vec::new();
    write_clean_fixes(&mut buf, &out.preprocessed.fixes).unwrap();
    assert_eq!(read_clean_fixes(&buf[..]).unwrap(), out.preprocessed.fixes);

    buf.clear();
    write_valid_days(&mut buf, &out.preprocessed.valid_days).unwrap();
    assert_eq!(
        read_valid_days(&buf[..]).unwrap(),
        out.preprocessed.valid_days
    );

    buf.clear();
    write_encounters(&mut buf, out.encounters.values()).unwrap();
    let back = read_encounters(&buf[..]).unwrap();
    let nonempty: Vec<_> = out.encounters.values().filter(|s| !s.is_empty()).collect();
    assert_eq!(back.values().collect::<Vec<_>>(), nonempty);

    let rows = out
        .dataset
        .feature_rows(PipelineConfig::default().features)
        .unwrap();
    buf.clear();
    write_features(&mut buf, &rows).unwrap();
    assert_eq!(read_features(&buf[..]).unwrap(), rows);
}
