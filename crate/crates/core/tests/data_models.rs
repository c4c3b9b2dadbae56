use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use salnet::data::{
    augment_mirror, load_dataset, split, synth_generate, synth_samples, DatasetStats, Pipeline, Preprocessor,
    SynthConfig,
};
use salnet::models::{
    blob_rows, count_parameters, estimate_memory, load_model, predict_sample, preset, save_model, InitScheme,
    NetSpec, Network, PostProcess, ShallowConfig, PRESET_NAMES,
};

#[test]
fn synth_dataset_survives_disk() {
    let dir = tempfile::tempdir().unwrap();
    let written = synth_generate(5, 40, 17, dir.path()).unwrap();
    let mut read = load_dataset(dir.path()).unwrap();
    read.sort_by(|a, b| a.id.cmp(&b.id));
    assert_eq!(read, written);
    assert_eq!(synth_samples(&SynthConfig::new(5, 40, 17)).unwrap(), written);
    assert_ne!(synth_samples(&SynthConfig::new(5, 40, 18)).unwrap(), written);
}

#[test]
fn saved_model_predicts_identically() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ShallowConfig::tiny().build();
    let net = Network::<f32>::new(spec.clone(), InitScheme::He, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let path = dir.path().join("m.salnet");
    save_model(&net, &path).unwrap();
    let back = load_model(&path).unwrap();
    assert_eq!(back, net);
    for (a, b) in net.params().iter().flatten().zip(back.params().iter().flatten()) {
        let bits = |t: &salnet::Tensor<f32>| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.weights), bits(&b.weights));
        assert_eq!(bits(&a.bias), bits(&b.bias));
    }

    let samples = synth_samples(&SynthConfig::new(2, 48, 5)).unwrap();
    let pipeline = Pipeline::for_spec(&spec);
    let stats = DatasetStats::compute(&samples, pipeline).unwrap();
    let stats = DatasetStats::from_meta_text(&stats.to_meta_text()).unwrap();
    let pre = Preprocessor::new(pipeline, stats);
    for s in &samples {
        let p = predict_sample(&net, &pre, s, PostProcess::default()).unwrap();
        let q = predict_sample(&back, &pre, s, PostProcess::default()).unwrap();
        assert_eq!(p.to_bytes(), q.to_bytes());
        assert_eq!(p.extents(), (s.height(), s.width()));
    }
}

#[test]
fn presets_survive_text_and_account_consistently() {
    for name in PRESET_NAMES {
        let spec = preset(name).unwrap();
        assert_eq!(NetSpec::from_text(&spec.to_text()).unwrap(), spec, "{name}");
        let counts = count_parameters(&spec).unwrap();
        assert_eq!(counts.total, counts.per_layer.iter().map(|l| l.total()).sum::<u64>());
        for l in &counts.per_layer {
            assert_eq!(l.weights, l.fan_in * l.out);
            assert_eq!(l.biases, l.out);
        }
        let rows = blob_rows(&spec, spec.input_dims()).unwrap();
        for r in &rows {
            assert_eq!(r.values, r.shape.iter().map(|&d| d as u64).product::<u64>());
        }
        let mem = estimate_memory(&spec, spec.input_dims()).unwrap();
        assert_eq!(mem.blob_values, rows.iter().map(|r| r.values).sum::<u64>());
        assert_eq!(mem.blob_bytes_train, 2 * mem.blob_bytes_test);
        assert_eq!(mem.param_values, counts.total);
        let net = Network::<f32>::zeroed(spec).unwrap();
        assert_eq!(net.param_count() as u64, counts.total, "{name}");
    }
}

proptest! {
    #[test]
    fn split_partitions_the_samples(n in 2usize..12, frac in 0.05f64..0.95, seed in any::<u64>()) {
        let samples = synth_samples(&SynthConfig::new(n, 32, 1)).unwrap();
        let n_train = (n as f64 * frac).round() as usize;
        prop_assume!(n_train > 0 && n_train < n);
        let (train, val) = split(&samples, frac, seed).unwrap();
        prop_assert_eq!(train.len(), n_train);
        let a: BTreeSet<_> = train.iter().map(|s| s.id.clone()).collect();
        let b: BTreeSet<_> = val.iter().map(|s| s.id.clone()).collect();
        prop_assert!(a.is_disjoint(&b));
        let all: BTreeSet<_> = samples.iter().map(|s| s.id.clone()).collect();
        prop_assert_eq!(a.union(&b).cloned().collect::<BTreeSet<_>>(), all);
        prop_assert_eq!(split(&samples, frac, seed).unwrap(), (train, val));
    }

    #[test]
    fn mirroring_twice_restores_content(n in 1usize..4, seed in any::<u64>()) {
        let samples = synth_samples(&SynthConfig::new(n, 32, seed)).unwrap();
        let once = augment_mirror(&samples);
        prop_assert_eq!(once.len(), 2 * n);
        let twice = augment_mirror(&once[n..]);
        for (orig, back) in samples.iter().zip(&twice[n..]) {
            prop_assert_eq!(&orig.image, &back.image);
            prop_assert_eq!(&orig.gt_map, &back.gt_map);
            prop_assert_eq!(&orig.fixations, &back.fixations);
        }
    }
}
