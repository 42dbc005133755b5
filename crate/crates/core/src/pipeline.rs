//! End-to-end composition: images → feature images → observation sequences
//! → HMM → paths → classifier → probe decisions → report.
//!
//! Feature extraction runs in parallel across images; training and report
//! assembly are sequential, and every reduction has a fixed order, so
//! identical inputs give byte-identical artifacts.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use crate::artifact::{self, ClassifierFile, ModelFile, ModelSetFile};
use crate::classify::{fit, Classification, ClassifierState};
use crate::config::{HmmMode, RunConfig};
use crate::error::{Error, Result};
use crate::evaluate::{build_report, calibrate_threshold, decisions_csv, EvalReport, ProbeKind, ProbeOutcome};
use crate::features::{extract_observations, ObservationSequence};
use crate::gabor::{fuse_with, make_bank, FeatureImage, GaborBank};
use crate::grid::Grid;
use crate::image_io::load_image;
use crate::manifest::{Manifest, ManifestEntry, Role};
use crate::phmm::{baum_welch, forward_log_likelihood, init_model, viterbi, CyclicHmm, TrainingOutcome};
use crate::sampling::{scan_order, SamplingPlan};

/// Image → feature image → observation sequence, for one configuration.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    config: RunConfig,
    bank: GaborBank,
    plan: SamplingPlan,
    order: Vec<usize>,
    fingerprint: String,
}

impl FeatureExtractor {
    pub fn new(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let bank = make_bank(&config.gabor.params(), config.gabor.kernel_size)?;
        let plan = config.plan()?;
        let order = scan_order(&plan, config.sampling.scan);
        Ok(FeatureExtractor {
            config: *config,
            bank,
            plan,
            order,
            fingerprint: config.feature_fingerprint(),
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn bank(&self) -> &GaborBank {
        &self.bank
    }

    pub fn plan(&self) -> &SamplingPlan {
        &self.plan
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn load(&self, path: &Path) -> Result<Grid<f64>> {
        load_image(path, Some((self.config.image.width, self.config.image.height)))
    }

    pub fn feature_image(&self, image: &Grid<f64>) -> Result<FeatureImage> {
        let (w, h) = (self.config.image.width, self.config.image.height);
        if (image.width(), image.height()) != (w, h) {
            return Err(Error::DimensionMismatch(format!(
                "image is {}x{}, configuration expects {w}x{h}",
                image.width(),
                image.height()
            )));
        }
        fuse_with(image, &self.bank, self.config.gabor.fuse_options())
    }

    pub fn observations(&self, gf: &FeatureImage, source_id: &str) -> Result<ObservationSequence> {
        extract_observations(gf, &self.plan, &self.order, self.config.features.fallback, source_id)
    }

    pub fn process(&self, image: &Grid<f64>, source_id: &str) -> Result<(FeatureImage, ObservationSequence)> {
        let gf = self.feature_image(image)?;
        let seq = self.observations(&gf, source_id)?;
        Ok((gf, seq))
    }
}

/// Maps an observation sequence to per-class scores (smaller is better).
#[derive(Debug, Clone)]
pub enum Recognizer {
    /// One HMM for all classes; sequences are compared by Viterbi path.
    Shared { hmm: CyclicHmm, classifier: ClassifierState },
    /// One HMM per class; the score is the negated per-observation
    /// log-likelihood.
    PerClass { classes: Vec<String>, models: Vec<CyclicHmm> },
}

impl Recognizer {
    pub fn classes(&self) -> Vec<String> {
        match self {
            Recognizer::Shared { classifier, .. } => classifier.classes.iter().map(|c| c.class_id.clone()).collect(),
            Recognizer::PerClass { classes, .. } => classes.clone(),
        }
    }

    pub fn score(&self, seq: &[f64]) -> Result<Classification> {
        match self {
            Recognizer::Shared { hmm, classifier } => {
                let path = viterbi(hmm, seq)?;
                classifier.classify(&path.to_reals())
            }
            Recognizer::PerClass { classes, models } => {
                let scores = models
                    .iter()
                    .map(|m| forward_log_likelihood(m, seq).map(|ll| -ll / seq.len() as f64))
                    .collect::<Result<Vec<_>>>()?;
                let mut best = 0;
                for (i, s) in scores.iter().enumerate().skip(1) {
                    if *s < scores[best] {
                        best = i;
                    }
                }
                Ok(Classification {
                    class_index: best,
                    class_id: classes[best].clone(),
                    scores,
                })
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedSystem {
    pub recognizer: Recognizer,
    /// One entry for the shared model, or one per class.
    pub training: Vec<TrainingOutcome>,
    /// Distance of every training sequence to its own class.
    pub self_distances: Vec<f64>,
    pub tau: f64,
}

/// Trains on sequences grouped by class; group order fixes class indices.
pub fn train(groups: &[(String, Vec<ObservationSequence>)], config: &RunConfig) -> Result<TrainedSystem> {
    if groups.is_empty() {
        return Err(Error::invalid("no training classes"));
    }
    let n = config.hmm.n_states;
    let bw = config.baum_welch();
    let (recognizer, training) = match config.hmm.mode {
        HmmMode::Global => {
            let all: Vec<&[f64]> = groups.iter().flat_map(|(_, s)| s.iter().map(|q| q.values.as_slice())).collect();
            let initial = init_model(n, &all, config.hmm.var_floor)?;
            let outcome = baum_welch(&initial, &all, &bw)?;
            let hmm = outcome.model.clone();
            let path_groups = groups
                .iter()
                .map(|(id, seqs)| {
                    let paths = seqs
                        .par_iter()
                        .map(|s| viterbi(&hmm, &s.values).map(|p| p.to_reals()))
                        .collect::<Result<Vec<_>>>()?;
                    Ok((id.clone(), paths))
                })
                .collect::<Result<Vec<_>>>()?;
            let classifier = fit(&path_groups, &config.fit_options())?;
            (Recognizer::Shared { hmm, classifier }, vec![outcome])
        }
        HmmMode::PerClass => {
            let trained = groups
                .iter()
                .map(|(id, seqs)| {
                    let values: Vec<&[f64]> = seqs.iter().map(|s| s.values.as_slice()).collect();
                    let initial = init_model(n, &values, config.hmm.var_floor)?;
                    baum_welch(&initial, &values, &bw).map_err(|e| e.in_stage("train", id.clone()))
                })
                .collect::<Result<Vec<_>>>()?;
            let recognizer = Recognizer::PerClass {
                classes: groups.iter().map(|(id, _)| id.clone()).collect(),
                models: trained.iter().map(|t| t.model.clone()).collect(),
            };
            (recognizer, trained)
        }
    };

    let mut self_distances = Vec::new();
    for (k, (_, seqs)) in groups.iter().enumerate() {
        for s in seqs {
            self_distances.push(recognizer.score(&s.values)?.scores[k]);
        }
    }
    let tau = calibrate_threshold(&self_distances, config.eval.threshold)?;
    Ok(TrainedSystem {
        recognizer,
        training,
        self_distances,
        tau,
    })
}

/// Everything one pipeline run produces.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub fingerprint: String,
    /// Keyed by manifest path, in order of first appearance.
    pub features: Vec<(String, FeatureImage)>,
    pub sequences: Vec<ObservationSequence>,
    pub system: TrainedSystem,
    pub outcomes: Vec<ProbeOutcome>,
    pub report: EvalReport,
}

impl Artifacts {
    pub fn model_file(&self) -> Option<ModelFile> {
        match &self.system.recognizer {
            Recognizer::Shared { hmm, .. } => Some(ModelFile::new(hmm, &self.fingerprint)),
            Recognizer::PerClass { .. } => None,
        }
    }

    pub fn model_set_file(&self) -> Option<ModelSetFile> {
        match &self.system.recognizer {
            Recognizer::PerClass { classes, models } => Some(ModelSetFile {
                version: artifact::MODEL_VERSION,
                fingerprint: self.fingerprint.clone(),
                classes: classes.clone(),
                models: models.iter().map(|m| ModelFile::new(m, &self.fingerprint)).collect(),
            }),
            Recognizer::Shared { .. } => None,
        }
    }

    pub fn classifier_file(&self) -> Option<ClassifierFile> {
        let model_json = artifact::to_json(&self.model_file()?);
        match &self.system.recognizer {
            Recognizer::Shared { classifier, .. } => Some(ClassifierFile {
                version: artifact::CLASSIFIER_VERSION,
                fingerprint: self.fingerprint.clone(),
                model_digest: artifact::digest(model_json.as_bytes()),
                tau: self.system.tau,
                state: classifier.clone(),
            }),
            Recognizer::PerClass { .. } => None,
        }
    }

    /// Writes feature images, sequences, model(s), classifier, report and
    /// per-probe decisions under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        for (id, gf) in &self.features {
            artifact::write_feature_image(&dir.join("features").join(format!("{}.gfi", file_stem(id))), gf)?;
        }
        for seq in &self.sequences {
            artifact::write_sequence(&dir.join("sequences").join(format!("{}.csv", file_stem(&seq.source_id))), seq)?;
        }
        if let Some(m) = self.model_file() {
            artifact::write_json(&dir.join("model.json"), &m)?;
        }
        if let Some(m) = self.model_set_file() {
            artifact::write_json(&dir.join("models.json"), &m)?;
        }
        if let Some(c) = self.classifier_file() {
            artifact::write_json(&dir.join("classifier.json"), &c)?;
        }
        artifact::write_json(&dir.join("report.json"), &self.report)?;
        artifact::write_bytes(
            &dir.join("decisions.csv"),
            decisions_csv(&self.outcomes, self.report.tau, self.report.negative_rule).as_bytes(),
        )
    }
}

fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

/// Runs the protocol over a manifest: loads every image, trains on the
/// `train` entries and scores every probe.
pub fn run_pipeline(manifest: &Manifest, config: &RunConfig) -> Result<Artifacts> {
    manifest.validate(true)?;
    let extractor = FeatureExtractor::new(config)?;
    let ids = unique_paths(&manifest.entries);
    let images = ids
        .par_iter()
        .map(|id| {
            let entry = manifest.entries.iter().find(|e| &e.path == id).expect("id from manifest");
            extractor
                .load(&manifest.resolve(entry))
                .map(|img| (id.clone(), img))
                .map_err(|e| e.in_stage("load", id.clone()))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    run_with_extractor(&manifest.entries, &images, &extractor)
}

/// [`run_pipeline`] over images already in memory, keyed by entry path.
pub fn run_in_memory(
    entries: &[ManifestEntry],
    images: &BTreeMap<String, Grid<f64>>,
    config: &RunConfig,
) -> Result<Artifacts> {
    let m = Manifest {
        entries: entries.to_vec(),
        base_dir: Default::default(),
    };
    m.validate(false)?;
    run_with_extractor(entries, images, &FeatureExtractor::new(config)?)
}

pub fn run_protocol(manifest: &Manifest, config: &RunConfig) -> Result<EvalReport> {
    run_pipeline(manifest, config).map(|a| a.report)
}

fn unique_paths(entries: &[ManifestEntry]) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    entries
        .iter()
        .filter(|e| seen.insert(e.path.as_str()))
        .map(|e| e.path.clone())
        .collect()
}

fn run_with_extractor(
    entries: &[ManifestEntry],
    images: &BTreeMap<String, Grid<f64>>,
    extractor: &FeatureExtractor,
) -> Result<Artifacts> {
    let config = extractor.config();
    let ids = unique_paths(entries);
    let processed = ids
        .par_iter()
        .map(|id| {
            images
                .get(id)
                .ok_or_else(|| Error::invalid(format!("no image loaded for '{id}'")))
                .and_then(|img| extractor.process(img, id))
                .map_err(|e| e.in_stage("features", id.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let index: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let seq_of = |id: &str| &processed[index[id]].1;

    let classes = {
        let m = Manifest {
            entries: entries.to_vec(),
            base_dir: Default::default(),
        };
        m.classes()
    };
    let groups: Vec<(String, Vec<ObservationSequence>)> = classes
        .iter()
        .map(|c| {
            let seqs = entries
                .iter()
                .filter(|e| e.role == Role::Train && &e.class == c)
                .map(|e| seq_of(&e.path).clone())
                .collect();
            (c.clone(), seqs)
        })
        .collect();
    let system = train(&groups, config).map_err(|e| e.in_stage("train", "training set"))?;

    let probes: Vec<&ManifestEntry> = entries.iter().filter(|e| e.role != Role::Train).collect();
    let outcomes = probes
        .par_iter()
        .map(|e| {
            let c = system
                .recognizer
                .score(&seq_of(&e.path).values)
                .map_err(|err| err.in_stage("classify", e.path.clone()))?;
            let own = classes.iter().position(|k| k == &e.class).expect("validated class");
            Ok(ProbeOutcome {
                probe_id: e.path.clone(),
                class_id: e.class.clone(),
                kind: if e.role == Role::ProbePos {
                    ProbeKind::Positive
                } else {
                    ProbeKind::Negative
                },
                predicted: c.class_id.clone(),
                best_score: c.best_score(),
                own_class_score: c.scores[own],
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let fingerprint = extractor.fingerprint().to_string();
    let echo = serde_json::to_value(config).expect("config serializes");
    let report = build_report(&outcomes, system.tau, config.eval.negative_rule, &fingerprint, echo);

    let (features, sequences): (Vec<_>, Vec<_>) = ids
        .into_iter()
        .zip(processed)
        .map(|(id, (gf, seq))| ((id, gf), seq))
        .unzip();
    Ok(Artifacts {
        fingerprint,
        features,
        sequences,
        system,
        outcomes,
        report,
    })
}
