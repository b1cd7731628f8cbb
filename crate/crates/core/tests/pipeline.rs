use enzsim_core::engine::ObservationSeries;
use enzsim_core::harness::{run_trials, AveragedSeries};
use enzsim_core::io::{self, presets, ConfigDocument, ResultBundle};
use proptest::prelude::*;

fn small(name: &str) -> ConfigDocument {
    let mut doc = presets::document(name).unwrap();
    doc.enzymes.count = 2000;
    doc.emitter.molecule_count = 200;
    doc.time.duration_s = 10.0e-6;
    doc.experiment.trials = 4;
    doc.experiment.seed = 11;
    doc.experiment.workers = 1;
    doc
}

#[test]
fn preset_survives_toml_round_trip() {
    for name in presets::NAMES {
        let doc = presets::document(name).unwrap();
        let again = ConfigDocument::parse(&doc.to_toml(), "echo").unwrap();
        assert_eq!(doc, again, "{name}");
        let (a, b) = (doc.resolve().unwrap(), again.resolve().unwrap());
        assert_eq!(a.spec, b.spec);
        assert_eq!(a.derived, b.derived);
    }
}

#[test]
fn bundle_round_trips_through_disk() {
    for name in presets::NAMES {
        let loaded = small(name).resolve().unwrap();
        let bundle = io::run_bundle(&loaded).unwrap();
        let dir = tempfile::tempdir().unwrap();
        bundle.write(dir.path()).unwrap();
        let back = ResultBundle::read(dir.path()).unwrap();
        assert_eq!(bundle, back, "{name}");
        let echo = io::load_config(dir.path().join(io::CONFIG_FILE)).unwrap();
        assert_eq!(io::run_bundle(&echo).unwrap(), bundle, "{name}");
    }
}

#[test]
fn averages_do_not_depend_on_workers_or_chunking() {
    let loaded = small("fig3").resolve().unwrap();
    let config = loaded.spec.engine_config();
    let serial = run_trials(&config, 0..4, 1).unwrap();
    let pooled = run_trials(&config, 0..4, 2).unwrap();
    assert_eq!(serial, pooled);

    let whole = AveragedSeries::from_trials(config.dt, &serial).unwrap();
    let head = AveragedSeries::from_trials(config.dt, &serial[..1]).unwrap();
    let tail = AveragedSeries::from_trials(config.dt, &serial[1..]).unwrap();
    assert_eq!(head.merge(&tail).unwrap(), whole);
}

fn counts(receivers: usize, steps: usize) -> impl Strategy<Value = ObservationSeries> {
    proptest::collection::vec(proptest::collection::vec(0u32..500, steps), receivers)
        .prop_map(|counts| ObservationSeries { counts })
}

proptest! {
    #[test]
    fn merge_equals_pooled_average(
        trials in proptest::collection::vec(counts(2, 6), 2..12),
        split in 1usize..11,
    ) {
        let split = split.min(trials.len() - 1);
        let dt = 0.5e-6;
        let whole = AveragedSeries::from_trials(dt, &trials).unwrap();
        let left = AveragedSeries::from_trials(dt, &trials[..split]).unwrap();
        let right = AveragedSeries::from_trials(dt, &trials[split..]).unwrap();
        prop_assert_eq!(left.merge(&right).unwrap(), whole.clone());
        prop_assert_eq!(right.merge(&left).unwrap(), whole.clone());

        let n = trials.len() as f64;
        for r in 0..2 {
            for k in 0..6 {
                let xs: Vec<f64> = trials.iter().map(|t| t.counts[r][k] as f64).collect();
                let mean = xs.iter().sum::<f64>() / n;
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
                prop_assert!((whole.mean_counts[r][k] - mean).abs() <= 1e-12 * mean.max(1.0));
                prop_assert!((whole.std_error[r][k] - (var / n).sqrt()).abs() <= 1e-9);
            }
        }
    }
}
