mod common;

use std::time::{Duration, Instant};

use common::*;
use gphmm::artifact::{self, ClassifierFile, ModelFile};
use gphmm::config::{HmmMode, RunConfig};
use gphmm::evaluate::NegativeRule;
use gphmm::manifest::{Manifest, Role};
use gphmm::pipeline::{run_in_memory, run_pipeline, run_protocol};
use gphmm::Error;

#[test]
fn two_subjects_end_to_end_under_ten_seconds() {
    let (entries, images) = synthetic_set(2, 3, 2);
    let start = Instant::now();
    let a = run_in_memory(&entries, &images, &RunConfig::default()).unwrap();
    let elapsed = start.elapsed();
    println!("2 subjects x 3 images: {elapsed:?}");
    assert!(elapsed < Duration::from_secs(10));
    assert_eq!(a.sequences.len(), 6);
    assert!(a.sequences.iter().all(|s| s.len() == 500));
    assert_eq!(a.outcomes.len(), 2);
    assert_eq!(a.report.counts.total(), 2);
}

#[test]
fn reports_are_deterministic() {
    let (entries, images) = synthetic_set(3, 3, 2);
    let config = RunConfig::default();
    let r1 = artifact::to_json(&run_in_memory(&entries, &images, &config).unwrap().report);
    let r2 = artifact::to_json(&run_in_memory(&entries, &images, &config).unwrap().report);
    assert_eq!(r1, r2);
}

#[test]
fn empty_probe_set_gives_zero_counts_and_absent_ratios() {
    let (entries, images) = synthetic_set(2, 2, 2);
    let r = run_in_memory(&entries, &images, &RunConfig::default()).unwrap().report;
    assert_eq!(r.counts.total(), 0);
    assert_eq!(r.sensitivity, None);
    assert_eq!(r.specificity, None);
    assert_eq!(r.accuracy, None);
    assert_eq!(r.rank1_accuracy, None);
}

#[test]
fn far_negatives_are_rejected() {
    let (mut entries, mut images) = synthetic_set(2, 3, 2);
    // A checkerboard is nothing like any trained face.
    let far = gphmm::Grid::from_fn(W, H, |x, y| if (x / 3 + y / 3) % 2 == 0 { 255.0 } else { 0.0 });
    images.insert("far.pgm".into(), far);
    entries.push(entry("far.pgm", "other", Role::ProbeNeg, "s1"));
    entries.push(entry("far.pgm", "other", Role::ProbeNeg, "s2"));
    let r = run_in_memory(&entries, &images, &RunConfig::default()).unwrap().report;
    assert_eq!(r.counts.tn, 2);
    assert_eq!(r.specificity, Some(1.0));
}

#[test]
fn single_class_probes_of_training_images_are_accepted() {
    let (mut entries, images) = synthetic_set(1, 3, 3);
    let probes: Vec<_> = entries.iter().map(|e| entry(&e.path, "s1", Role::ProbePos, "s1")).collect();
    entries.extend(probes);
    let r = run_in_memory(&entries, &images, &RunConfig::default()).unwrap().report;
    assert_eq!(r.counts.tp, 3);
    assert_eq!(r.sensitivity, Some(1.0));
}

#[test]
fn synthetic_subjects_are_identified() {
    let (entries, images) = synthetic_set(4, 4, 3);
    let r = run_in_memory(&entries, &images, &RunConfig::default()).unwrap().report;
    assert_eq!(r.rank1_accuracy, Some(1.0));
}

#[test]
fn per_class_mode_runs() {
    let (entries, images) = synthetic_set(3, 4, 3);
    let mut config = RunConfig::default();
    config.hmm.mode = HmmMode::PerClass;
    config.hmm.max_iters = 10;
    let a = run_in_memory(&entries, &images, &config).unwrap();
    assert_eq!(a.system.training.len(), 3);
    assert!(a.model_file().is_none() && a.model_set_file().is_some());
    assert_eq!(a.report.counts.total(), 3);
}

#[test]
fn own_class_rule_counts_negatives_against_their_class() {
    let (mut entries, images) = synthetic_set(2, 3, 2);
    entries.push(entry("s1/1.pgm", "s1", Role::ProbeNeg, "s2"));
    let mut config = RunConfig::default();
    let any = run_in_memory(&entries, &images, &config).unwrap().report;
    config.eval.negative_rule = NegativeRule::OwnClass;
    let own = run_in_memory(&entries, &images, &config).unwrap().report;
    // A training image of s1 is within τ of s1, so AnyClass flags it.
    assert_eq!(any.counts.fp, 1);
    assert!(own.counts.fp <= any.counts.fp);
}

#[test]
fn missing_image_reports_stage_and_input() {
    let (entries, mut images) = synthetic_set(2, 2, 2);
    images.remove("s2/1.pgm");
    let err = run_in_memory(&entries, &images, &RunConfig::default()).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("features") && msg.contains("s2/1.pgm"), "{msg}");
}

#[test]
fn wrong_image_size_is_a_data_error() {
    let (entries, mut images) = synthetic_set(2, 2, 2);
    images.insert("s1/1.pgm".into(), gphmm::Grid::filled(10, 10, 0.0));
    let err = run_in_memory(&entries, &images, &RunConfig::default()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn manifest_run_writes_round_tripping_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    write_subject_tree(dir.path(), 3, 4);
    let m = Manifest::from_subject_dirs(dir.path(), 3, None, 1, 0).unwrap();
    let config = RunConfig::default();
    let a = run_pipeline(&m, &config).unwrap();
    assert_eq!(a.report.counts.total(), 6);
    let out = dir.path().join("out");
    a.write(&out).unwrap();

    let model_bytes = std::fs::read(out.join("model.json")).unwrap();
    let model: ModelFile = artifact::read_json(&out.join("model.json")).unwrap();
    assert_eq!(artifact::to_json(&model).as_bytes(), &model_bytes[..]);
    let (hmm, digest) = artifact::load_model(&out.join("model.json"), &a.fingerprint).unwrap();
    assert_eq!(hmm.n_states(), config.hmm.n_states);
    let cls: ClassifierFile = artifact::load_classifier(&out.join("classifier.json"), &a.fingerprint, &digest).unwrap();
    assert_eq!(cls.state.classes.len(), 3);

    let first = &a.features[0].0;
    let stem: String = first.chars().map(|c| if c == '/' { '_' } else { c }).collect();
    let gfi = out.join("features").join(format!("{stem}.gfi"));
    let bytes = std::fs::read(&gfi).unwrap();
    assert_eq!(artifact::encode_feature_image(&artifact::read_feature_image(&gfi).unwrap()), bytes);
    let seq = out.join("sequences").join(format!("{stem}.csv"));
    let text = std::fs::read_to_string(&seq).unwrap();
    assert_eq!(artifact::encode_sequence(&artifact::read_sequence(&seq).unwrap()), text);

    assert_eq!(run_protocol(&m, &config).unwrap(), a.report);
}

#[test]
fn fingerprint_mismatch_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    write_subject_tree(dir.path(), 2, 3);
    let m = Manifest::from_subject_dirs(dir.path(), 2, None, 0, 0).unwrap();
    let a = run_pipeline(&m, &RunConfig::default()).unwrap();
    a.write(dir.path()).unwrap();
    let mut other = RunConfig::default();
    other.sampling.scan = gphmm::sampling::ScanMode::Zigzag;
    assert_ne!(other.feature_fingerprint(), a.fingerprint);
    let err = artifact::load_model(&dir.path().join("model.json"), &other.feature_fingerprint()).unwrap_err();
    assert!(matches!(err, Error::FingerprintMismatch { .. }));
    let (_, digest) = artifact::load_model(&dir.path().join("model.json"), &a.fingerprint).unwrap();
    let err = artifact::load_classifier(&dir.path().join("classifier.json"), &a.fingerprint, "0000").unwrap_err();
    assert!(matches!(err, Error::FingerprintMismatch { .. }));
    assert!(artifact::load_classifier(&dir.path().join("classifier.json"), &a.fingerprint, &digest).is_ok());
}
