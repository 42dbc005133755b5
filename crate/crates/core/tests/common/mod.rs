#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

use gphmm::grid::Grid;
use gphmm::image_io::encode_pgm;
use gphmm::manifest::{ManifestEntry, Role};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const W: usize = 92;
pub const H: usize = 112;

/// A smooth subject-specific pattern plus per-image noise.
pub fn synthetic_face(subject: u64, variant: u64) -> Grid<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(subject);
    let blobs: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.random_range(10.0..W as f64 - 10.0),
                rng.random_range(10.0..H as f64 - 10.0),
                rng.random_range(4.0..14.0),
                rng.random_range(-90.0..120.0),
            )
        })
        .collect();
    let mut noise = ChaCha8Rng::seed_from_u64(1000 + 97 * subject + variant);
    Grid::from_fn(W, H, |x, y| {
        let mut v = 100.0;
        for &(cx, cy, s, a) in &blobs {
            let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
            v += a * (-d2 / (2.0 * s * s)).exp();
        }
        (v + noise.random_range(-4.0..4.0)).clamp(0.0, 255.0).round()
    })
}

pub fn entry(path: &str, subject: &str, role: Role, class: &str) -> ManifestEntry {
    ManifestEntry {
        path: path.to_string(),
        subject: subject.to_string(),
        role,
        class: class.to_string(),
    }
}

/// `n_subjects` classes; the first `n_train` images of each train and the
/// rest are positive probes.
pub fn synthetic_set(
    n_subjects: u64,
    n_images: u64,
    n_train: u64,
) -> (Vec<ManifestEntry>, BTreeMap<String, Grid<f64>>) {
    let mut entries = Vec::new();
    let mut images = BTreeMap::new();
    for s in 0..n_subjects {
        let subject = format!("s{}", s + 1);
        for v in 0..n_images {
            let path = format!("{subject}/{}.pgm", v + 1);
            let role = if v < n_train { Role::Train } else { Role::ProbePos };
            entries.push(entry(&path, &subject, role, &subject));
            images.insert(path, synthetic_face(s, v));
        }
    }
    (entries, images)
}

pub fn write_pgm(path: &Path, img: &Grid<f64>) {
    let bytes = encode_pgm(&img.map(|&v| v as u8), true);
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, bytes).unwrap();
}

/// Writes a `root/s<i>/<j>.pgm` tree of synthetic faces.
pub fn write_subject_tree(root: &Path, n_subjects: u64, n_images: u64) {
    for s in 0..n_subjects {
        for v in 0..n_images {
            write_pgm(&root.join(format!("s{}", s + 1)).join(format!("{}.pgm", v + 1)), &synthetic_face(s, v));
        }
    }
}

/// Exhaustive reference computations over every state path.
pub mod oracle {
    use gphmm::phmm::CyclicHmm;
    use rand::Rng;
    use std::f64::consts::PI;

    fn pdf(mean: f64, var: f64, o: f64) -> f64 {
        (-(o - mean).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
    }

    pub fn path_probability(hmm: &CyclicHmm, seq: &[f64], path: &[usize]) -> f64 {
        let (m, v) = (hmm.emit_mean(), hmm.emit_var());
        let mut p = hmm.init()[path[0]] * pdf(m[path[0]], v[path[0]], seq[0]);
        for t in 1..seq.len() {
            p *= hmm.a(path[t - 1], path[t]) * pdf(m[path[t]], v[path[t]], seq[t]);
        }
        p
    }

    /// `(most probable path, its probability, total probability)`.
    pub fn exhaustive(hmm: &CyclicHmm, seq: &[f64]) -> (Vec<usize>, f64, f64) {
        let n = hmm.n_states();
        let t = seq.len();
        let mut path = vec![0usize; t];
        let (mut best, mut best_p, mut total) = (path.clone(), -1.0, 0.0);
        loop {
            let p = path_probability(hmm, seq, &path);
            total += p;
            if p > best_p {
                best_p = p;
                best = path.clone();
            }
            let mut i = t;
            loop {
                if i == 0 {
                    return (best, best_p, total);
                }
                i -= 1;
                path[i] += 1;
                if path[i] < n {
                    break;
                }
                path[i] = 0;
            }
        }
    }

    pub fn random_hmm(rng: &mut impl Rng, n: usize) -> CyclicHmm {
        let mut trans = vec![0.0; n * n];
        for i in 0..n {
            let next = (i + 1) % n;
            if next == i {
                trans[i * n + i] = 1.0;
            } else {
                let stay = rng.random_range(0.05..0.95);
                trans[i * n + i] = stay;
                trans[i * n + next] = 1.0 - stay;
            }
        }
        let mean = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
        let var = (0..n).map(|_| rng.random_range(0.5..4.0)).collect();
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let s: f64 = raw.iter().sum();
        let init = raw.iter().map(|r| r / s).collect();
        CyclicHmm::new(trans, mean, var, init, 1e-6).unwrap()
    }

    pub fn random_sequence(rng: &mut impl Rng, len: usize) -> Vec<f64> {
        (0..len).map(|_| rng.random_range(0.0..10.0)).collect()
    }
}
