use redrisk::config::{Config, ModelKind};
use redrisk::featurize::FeatureSet;
use redrisk::trees::LeafSize;

/// Published training settings are the defaults of an empty config.
#[test]
fn empty_config_carries_published_settings() {
    let cfg = Config::from_toml("").unwrap();
    let leaf = LeafSize::Fraction(1.0 / 64.0);

    assert_eq!(cfg.rf.n_trees, 25);
    assert_eq!(cfg.rf.features_per_split, None);
    assert_eq!(cfg.rf.split_features(134), 11);
    assert_eq!(cfg.rf.leaf_size, leaf);

    assert_eq!(cfg.gbm.n_learners, 200);
    assert_eq!(cfg.gbm.rho, 0.5);
    assert_eq!(cfg.gbm.lr_cap, 0.1);
    assert_eq!(cfg.gbm.leaf_size, leaf);
    assert_eq!(cfg.gbm.learner_subset(134, 5000), 44);
    assert_eq!(cfg.gbm.learner_subset(134, 900), 30);

    let d = &cfg.dnnd;
    assert_eq!(d.hidden, vec![50, 50]);
    assert_eq!(d.minibatch, 64);
    assert_eq!((d.lr_start, d.lr_stop), (0.1, 1e-4));
    assert_eq!(d.momentum, 0.9);
    assert_eq!(d.weight_decay, 1e-4);
    assert_eq!(d.max_norm, 1.0);
    assert_eq!(d.dropout_rate, 0.5);
    assert!(d.input_dropout);

    assert_eq!(cfg.experiment.horizons, vec![15, 30, 60, 90, 180, 360]);
    assert_eq!(cfg.experiment.feature_sets, FeatureSet::ALL.to_vec());
    assert_eq!(cfg.experiment.models, ModelKind::DEFAULT.to_vec());
    assert_eq!(cfg.cohort.synthetic.n_patients, 7399);
}

#[test]
fn out_of_range_values_name_their_key() {
    for (text, key) in [
        ("[gbm]\nrho = 1.5\n", "gbm.rho"),
        ("[dnnd]\ndropout_rate = 0.0\n", "dnnd.dropout_rate"),
        ("[rf]\nn_trees = 0\n", "rf.n_trees"),
        ("[experiment]\nhorizons = [30, 15]\n", "experiment.horizons"),
        ("[experiment]\ntrain_fraction = 1.0\n", "train_fraction"),
        ("[cohort.synthetic]\nsignal_strength = -1.0\n", "cohort.synthetic.signal_strength"),
    ] {
        let err = Config::from_toml(text).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{text}");
        assert!(err.to_string().contains(key), "{text}: {err}");
    }
}
