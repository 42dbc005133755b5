//! Cyclic hidden Markov model with one-dimensional Gaussian emissions.
//!
//! State `i` may only stay in `i` or advance to `(i + 1) mod N`; every other
//! transition probability is exactly zero and stays zero through training.
//! Forward, backward and Viterbi recursions run in log space, so long
//! sequences of large-valued observations neither underflow nor need
//! rescaling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute lower bound on the emission variance floor, used when the
/// training data has (near) zero variance.
pub const MIN_VARIANCE: f64 = 1e-12;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Expected occupancy below which a state is treated as unused.
const DEGENERATE_OCCUPANCY: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct CyclicHmm {
    n_states: usize,
    trans: Vec<f64>,
    emit_mean: Vec<f64>,
    emit_var: Vec<f64>,
    init: Vec<f64>,
    var_floor: f64,
}

/// Whether the cyclic topology permits `i -> j` among `n` states.
#[inline]
pub fn transition_allowed(n: usize, i: usize, j: usize) -> bool {
    j == i || j == (i + 1) % n
}

impl CyclicHmm {
    /// `trans` is row-major `n × n`.
    pub fn new(
        trans: Vec<f64>,
        emit_mean: Vec<f64>,
        emit_var: Vec<f64>,
        init: Vec<f64>,
        var_floor: f64,
    ) -> Result<Self> {
        let hmm = CyclicHmm {
            n_states: emit_mean.len(),
            trans,
            emit_mean,
            emit_var,
            init,
            var_floor,
        };
        hmm.validate()?;
        Ok(hmm)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_states;
        if n == 0 {
            return Err(Error::invalid("model needs at least one state"));
        }
        if self.trans.len() != n * n || self.emit_var.len() != n || self.init.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{n}-state model with {} transition entries, {} variances, {} initial probabilities",
                self.trans.len(),
                self.emit_var.len(),
                self.init.len()
            )));
        }
        if !(self.var_floor > 0.0 && self.var_floor.is_finite()) {
            return Err(Error::invalid(format!("variance floor must be > 0, got {}", self.var_floor)));
        }
        for i in 0..n {
            let row = &self.trans[i * n..(i + 1) * n];
            for (j, &a) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&a) {
                    return Err(Error::invalid(format!("a[{i}][{j}] = {a} is not a probability")));
                }
                if a != 0.0 && !transition_allowed(n, i, j) {
                    return Err(Error::invalid(format!("a[{i}][{j}] = {a} violates the cyclic topology")));
                }
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!("transition row {i} sums to {s}")));
            }
            if !self.emit_mean[i].is_finite() {
                return Err(Error::invalid(format!("emission mean {i} is not finite")));
            }
            if !(self.emit_var[i] >= self.var_floor) || !self.emit_var[i].is_finite() {
                return Err(Error::invalid(format!(
                    "emission variance {i} = {} is below the floor {}",
                    self.emit_var[i], self.var_floor
                )));
            }
        }
        if self.init.iter().any(|p| !(0.0..=1.0).contains(p)) || (self.init.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("initial distribution is not a probability vector"));
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn trans(&self) -> &[f64] {
        &self.trans
    }

    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.trans[i * self.n_states + j]
    }

    pub fn emit_mean(&self) -> &[f64] {
        &self.emit_mean
    }

    pub fn emit_var(&self) -> &[f64] {
        &self.emit_var
    }

    pub fn init(&self) -> &[f64] {
        &self.init
    }

    pub fn var_floor(&self) -> f64 {
        self.var_floor
    }

    #[inline]
    pub fn log_emission(&self, state: usize, o: f64) -> f64 {
        let v = self.emit_var[state];
        let d = o - self.emit_mean[state];
        -0.5 * (LN_2PI + v.ln() + d * d / v)
    }

    /// Allowed predecessors of `j`, ascending.
    fn predecessors(&self, j: usize) -> ([usize; 2], usize) {
        let n = self.n_states;
        let prev = (j + n - 1) % n;
        match prev.cmp(&j) {
            std::cmp::Ordering::Equal => ([j, j], 1),
            std::cmp::Ordering::Less => ([prev, j], 2),
            std::cmp::Ordering::Greater => ([j, prev], 2),
        }
    }

    fn successors(&self, i: usize) -> ([usize; 2], usize) {
        let next = (i + 1) % self.n_states;
        if next == i {
            ([i, i], 1)
        } else {
            ([i, next], 2)
        }
    }

    fn log_tables(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.trans.iter().map(|a| a.ln()).collect(),
            self.init.iter().map(|p| p.ln()).collect(),
        )
    }

    fn log_emissions(&self, seq: &[f64]) -> Vec<f64> {
        let n = self.n_states;
        let mut out = Vec::with_capacity(seq.len() * n);
        for &o in seq {
            out.extend((0..n).map(|s| self.log_emission(s, o)));
        }
        out
    }

    /// Log forward variables (T × N) and the sequence log-likelihood.
    fn forward(&self, logb: &[f64], t_len: usize) -> (Vec<f64>, f64) {
        let n = self.n_states;
        let (ln_a, ln_pi) = self.log_tables();
        let mut alpha = vec![f64::NEG_INFINITY; t_len * n];
        for j in 0..n {
            alpha[j] = ln_pi[j] + logb[j];
        }
        for t in 1..t_len {
            for j in 0..n {
                let (preds, np) = self.predecessors(j);
                let acc = log_sum_exp(preds[..np].iter().map(|&i| alpha[(t - 1) * n + i] + ln_a[i * n + j]));
                alpha[t * n + j] = acc + logb[t * n + j];
            }
        }
        let ll = log_sum_exp(alpha[(t_len - 1) * n..].iter().copied());
        (alpha, ll)
    }

    fn backward(&self, logb: &[f64], t_len: usize) -> Vec<f64> {
        let n = self.n_states;
        let (ln_a, _) = self.log_tables();
        let mut beta = vec![0.0; t_len * n];
        for t in (0..t_len - 1).rev() {
            for i in 0..n {
                let (succ, ns) = self.successors(i);
                beta[t * n + i] = log_sum_exp(
                    succ[..ns]
                        .iter()
                        .map(|&j| ln_a[i * n + j] + logb[(t + 1) * n + j] + beta[(t + 1) * n + j]),
                );
            }
        }
        beta
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn check_sequence(seq: &[f64]) -> Result<()> {
    if seq.is_empty() {
        return Err(Error::invalid("empty observation sequence"));
    }
    if seq.iter().any(|o| !o.is_finite()) {
        return Err(Error::Numeric("observation sequence contains non-finite values".into()));
    }
    Ok(())
}

fn population_moments(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    let mean = sum / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (mean, var)
}

/// Variance floor for a data set: `relative * var(data)`, never below
/// [`MIN_VARIANCE`].
pub fn variance_floor<S: AsRef<[f64]>>(sequences: &[S], relative: f64) -> f64 {
    let (_, var) = population_moments(sequences.iter().flat_map(|s| s.as_ref().iter().copied()));
    (relative * var).max(MIN_VARIANCE)
}

/// Initial model: uniform over the allowed transitions, all mass on state 0
/// at `t = 0`, and emissions from splitting every sequence into `n_states`
/// equal contiguous chunks.
pub fn init_model<S: AsRef<[f64]>>(n_states: usize, sequences: &[S], var_floor_rel: f64) -> Result<CyclicHmm> {
    if n_states == 0 {
        return Err(Error::invalid("n_states must be >= 1"));
    }
    if sequences.is_empty() {
        return Err(Error::invalid("no training sequences"));
    }
    for s in sequences {
        check_sequence(s.as_ref())?;
        if s.as_ref().len() < n_states {
            return Err(Error::invalid(format!(
                "sequence of length {} is shorter than the {n_states} states",
                s.as_ref().len()
            )));
        }
    }
    let floor = variance_floor(sequences, var_floor_rel);

    let n = n_states;
    let mut trans = vec![0.0; n * n];
    for i in 0..n {
        if n == 1 {
            trans[0] = 1.0;
        } else {
            trans[i * n + i] = 0.5;
            trans[i * n + (i + 1) % n] = 0.5;
        }
    }
    let mut init = vec![0.0; n];
    init[0] = 1.0;

    let chunk_of = |t: usize, len: usize| t * n / len;
    let mut emit_mean = Vec::with_capacity(n);
    let mut emit_var = Vec::with_capacity(n);
    for state in 0..n {
        let values = sequences.iter().flat_map(|s| {
            let s = s.as_ref();
            s.iter()
                .enumerate()
                .filter(move |(t, _)| chunk_of(*t, s.len()) == state)
                .map(|(_, &o)| o)
        });
        let (mean, var) = population_moments(values);
        emit_mean.push(mean);
        emit_var.push(var.max(floor));
    }

    CyclicHmm::new(trans, emit_mean, emit_var, init, floor)
}

pub fn forward_log_likelihood(hmm: &CyclicHmm, seq: &[f64]) -> Result<f64> {
    check_sequence(seq)?;
    let logb = hmm.log_emissions(seq);
    let (_, ll) = hmm.forward(&logb, seq.len());
    if ll.is_nan() {
        return Err(Error::Numeric("log-likelihood is NaN".into()));
    }
    Ok(ll)
}

/// Most probable state sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathVector {
    pub states: Vec<usize>,
}

impl PathVector {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn to_reals(&self) -> Vec<f64> {
        self.states.iter().map(|&s| s as f64).collect()
    }

    pub fn respects_topology(&self, n_states: usize) -> bool {
        self.states.iter().all(|&s| s < n_states)
            && self.states.windows(2).all(|w| transition_allowed(n_states, w[0], w[1]))
    }
}

pub fn viterbi(hmm: &CyclicHmm, seq: &[f64]) -> Result<PathVector> {
    viterbi_with_score(hmm, seq).map(|(p, _)| p)
}

/// Viterbi path and its joint log-probability. On equal scores the lower
/// state index wins, both for back-pointers and for the final state.
pub fn viterbi_with_score(hmm: &CyclicHmm, seq: &[f64]) -> Result<(PathVector, f64)> {
    check_sequence(seq)?;
    let n = hmm.n_states;
    let t_len = seq.len();
    let (ln_a, ln_pi) = hmm.log_tables();
    let logb = hmm.log_emissions(seq);

    let mut delta: Vec<f64> = (0..n).map(|j| ln_pi[j] + logb[j]).collect();
    let mut next = vec![0.0; n];
    let mut back = vec![0usize; t_len * n];
    for t in 1..t_len {
        for j in 0..n {
            let (preds, np) = hmm.predecessors(j);
            let mut best = f64::NEG_INFINITY;
            let mut arg = preds[0];
            for &i in &preds[..np] {
                let s = delta[i] + ln_a[i * n + j];
                if s > best {
                    best = s;
                    arg = i;
                }
            }
            next[j] = best + logb[t * n + j];
            back[t * n + j] = arg;
        }
        std::mem::swap(&mut delta, &mut next);
    }

    let mut last = 0;
    for j in 1..n {
        if delta[j] > delta[last] {
            last = j;
        }
    }
    let score = delta[last];
    if !score.is_finite() {
        return Err(Error::Numeric("no finite-probability state path".into()));
    }
    let mut states = vec![0usize; t_len];
    states[t_len - 1] = last;
    for t in (1..t_len).rev() {
        states[t - 1] = back[t * n + states[t]];
    }
    Ok((PathVector { states }, score))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaumWelchOptions {
    pub max_iters: usize,
    /// Stop once the total log-likelihood improves by less than this.
    pub tol: f64,
    /// Seed for re-drawing the emission of a state that lost all occupancy.
    pub seed: u64,
}

impl Default for BaumWelchOptions {
    fn default() -> Self {
        BaumWelchOptions {
            max_iters: 50,
            tol: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reseed {
    pub iteration: usize,
    pub state: usize,
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub model: CyclicHmm,
    /// Total training log-likelihood; entry `i` is the model after `i`
    /// re-estimation steps.
    pub log_likelihoods: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub reseeded: Vec<Reseed>,
}

/// Expected sufficient statistics of one sequence. Observation moments are
/// taken around the current state means to limit cancellation.
struct SeqStats {
    ll: f64,
    first: Vec<f64>,
    occupancy: Vec<f64>,
    xi: Vec<f64>,
    shifted_sum: Vec<f64>,
    shifted_sq: Vec<f64>,
}

fn expected_counts(hmm: &CyclicHmm, seq: &[f64]) -> SeqStats {
    let n = hmm.n_states;
    let t_len = seq.len();
    let (ln_a, _) = hmm.log_tables();
    let logb = hmm.log_emissions(seq);
    let (alpha, ll) = hmm.forward(&logb, t_len);
    let beta = hmm.backward(&logb, t_len);

    let mut stats = SeqStats {
        ll,
        first: vec![0.0; n],
        occupancy: vec![0.0; n],
        xi: vec![0.0; n * n],
        shifted_sum: vec![0.0; n],
        shifted_sq: vec![0.0; n],
    };
    for t in 0..t_len {
        for i in 0..n {
            let g = (alpha[t * n + i] + beta[t * n + i] - ll).exp();
            if t == 0 {
                stats.first[i] = g;
            }
            let d = seq[t] - hmm.emit_mean[i];
            stats.occupancy[i] += g;
            stats.shifted_sum[i] += g * d;
            stats.shifted_sq[i] += g * d * d;
            if t + 1 < t_len {
                let (succ, ns) = hmm.successors(i);
                for &j in &succ[..ns] {
                    stats.xi[i * n + j] += (alpha[t * n + i]
                        + ln_a[i * n + j]
                        + logb[(t + 1) * n + j]
                        + beta[(t + 1) * n + j]
                        - ll)
                        .exp();
                }
            }
        }
    }
    stats
}

struct TotalStats {
    ll: f64,
    first: Vec<f64>,
    occupancy: Vec<f64>,
    xi: Vec<f64>,
    shifted_sum: Vec<f64>,
    shifted_sq: Vec<f64>,
}

fn e_step<S: AsRef<[f64]> + Sync>(hmm: &CyclicHmm, sequences: &[S]) -> Result<TotalStats> {
    let n = hmm.n_states;
    let per_seq: Vec<SeqStats> = sequences.par_iter().map(|s| expected_counts(hmm, s.as_ref())).collect();
    let mut total = TotalStats {
        ll: 0.0,
        first: vec![0.0; n],
        occupancy: vec![0.0; n],
        xi: vec![0.0; n * n],
        shifted_sum: vec![0.0; n],
        shifted_sq: vec![0.0; n],
    };
    // Fixed-order reduction keeps results independent of thread scheduling.
    for s in &per_seq {
        total.ll += s.ll;
        add_into(&mut total.first, &s.first);
        add_into(&mut total.occupancy, &s.occupancy);
        add_into(&mut total.xi, &s.xi);
        add_into(&mut total.shifted_sum, &s.shifted_sum);
        add_into(&mut total.shifted_sq, &s.shifted_sq);
    }
    if !total.ll.is_finite() {
        return Err(Error::Numeric(format!("training log-likelihood is {}", total.ll)));
    }
    Ok(total)
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

fn m_step(
    hmm: &CyclicHmm,
    stats: &TotalStats,
    global: (f64, f64),
    rng: &mut ChaCha8Rng,
    iteration: usize,
    reseeded: &mut Vec<Reseed>,
) -> Result<CyclicHmm> {
    let n = hmm.n_states;
    let mut next = hmm.clone();

    let init_total: f64 = stats.first.iter().sum();
    for i in 0..n {
        next.init[i] = stats.first[i] / init_total;
    }
    // Only allowed entries ever receive expected counts.
    for i in 0..n {
        let row = &stats.xi[i * n..(i + 1) * n];
        let total: f64 = row.iter().sum();
        if total > DEGENERATE_OCCUPANCY {
            for j in 0..n {
                next.trans[i * n + j] = row[j] / total;
            }
        }
    }

    let total_occupancy: f64 = stats.occupancy.iter().sum();
    let (g_mean, g_var) = global;
    for i in 0..n {
        let w = stats.occupancy[i];
        if w <= DEGENERATE_OCCUPANCY * total_occupancy.max(1.0) {
            let spread = Normal::new(g_mean, g_var.sqrt()).map_err(|e| Error::Numeric(e.to_string()))?;
            next.emit_mean[i] = spread.sample(rng);
            next.emit_var[i] = g_var.max(hmm.var_floor);
            log::warn!("state {i} lost all occupancy at iteration {iteration}; re-seeded its emission");
            reseeded.push(Reseed { iteration, state: i });
            continue;
        }
        let shift = stats.shifted_sum[i] / w;
        next.emit_mean[i] = hmm.emit_mean[i] + shift;
        next.emit_var[i] = (stats.shifted_sq[i] / w - shift * shift).max(hmm.var_floor);
    }
    next.validate().map_err(|e| Error::Numeric(format!("re-estimated model is invalid: {e}")))?;
    Ok(next)
}

pub fn baum_welch<S: AsRef<[f64]> + Sync>(
    hmm: &CyclicHmm,
    sequences: &[S],
    opts: &BaumWelchOptions,
) -> Result<TrainingOutcome> {
    if sequences.is_empty() {
        return Err(Error::invalid("no training sequences"));
    }
    for s in sequences {
        check_sequence(s.as_ref())?;
    }
    hmm.validate()?;

    let global = population_moments(sequences.iter().flat_map(|s| s.as_ref().iter().copied()));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut reseeded = Vec::new();

    let mut model = hmm.clone();
    let mut stats = e_step(&model, sequences)?;
    let mut history = vec![stats.ll];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        iterations += 1;
        model = m_step(&model, &stats, global, &mut rng, iterations, &mut reseeded)?;
        stats = e_step(&model, sequences)?;
        history.push(stats.ll);
        if history[iterations] - history[iterations - 1] < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(TrainingOutcome {
        model,
        log_likelihoods: history,
        iterations,
        converged,
        reseeded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal_ll(o: f64, m: f64, v: f64) -> f64 {
        -0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (o - m) * (o - m) / v)
    }

    #[test]
    fn single_state_initialisation() {
        let hmm = init_model(1, &[vec![1.0, 2.0, 3.0], vec![4.0]], 1e-6).unwrap();
        assert_eq!(hmm.trans(), &[1.0]);
        assert!((hmm.emit_mean()[0] - 2.5).abs() < 1e-15);
        assert!((hmm.emit_var()[0] - 1.25).abs() < 1e-15);
    }

    #[test]
    fn two_state_uniform_mask() {
        let hmm = init_model(2, &[vec![1.0, 2.0, 3.0, 4.0]], 1e-6).unwrap();
        assert_eq!(hmm.trans(), &[0.5, 0.5, 0.5, 0.5]);
        assert_eq!(hmm.init(), &[1.0, 0.0]);
        assert_eq!(hmm.emit_mean(), &[1.5, 3.5]);
    }

    #[test]
    fn seven_state_has_fourteen_transitions() {
        let seq: Vec<f64> = (0..50).map(|v| v as f64).collect();
        let hmm = init_model(7, &[seq], 1e-6).unwrap();
        assert_eq!(hmm.trans().iter().filter(|&&a| a != 0.0).count(), 14);
        for i in 0..7 {
            assert_eq!(hmm.a(i, (i + 1) % 7), 0.5);
        }
    }

    #[test]
    fn init_rejects_short_sequences() {
        assert!(init_model(3, &[vec![1.0, 2.0]], 1e-6).is_err());
        assert!(init_model::<Vec<f64>>(3, &[], 1e-6).is_err());
    }

    #[test]
    fn constructor_rejects_masked_mass() {
        let trans = vec![0.5, 0.5, 0.0, 0.0, 0.5, 0.5, 0.25, 0.25, 0.5];
        let r = CyclicHmm::new(trans, vec![0.0; 3], vec![1.0; 3], vec![1.0, 0.0, 0.0], 1e-6);
        assert!(r.is_err());
    }

    #[test]
    fn single_state_likelihood_is_closed_form() {
        let hmm = CyclicHmm::new(vec![1.0], vec![2.0], vec![0.5], vec![1.0], 1e-6).unwrap();
        let seq = [1.0, 2.5, 3.0, -1.0];
        let want: f64 = seq.iter().map(|&o| normal_ll(o, 2.0, 0.5)).sum();
        assert!((forward_log_likelihood(&hmm, &seq).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn duplicated_states_keep_likelihood() {
        let one = CyclicHmm::new(vec![1.0], vec![3.0], vec![2.0], vec![1.0], 1e-6).unwrap();
        let two = CyclicHmm::new(vec![0.3, 0.7, 0.6, 0.4], vec![3.0, 3.0], vec![2.0, 2.0], vec![1.0, 0.0], 1e-6)
            .unwrap();
        let seq = [1.0, 4.0, 2.0, 7.0, 3.3];
        let a = forward_log_likelihood(&one, &seq).unwrap();
        let b = forward_log_likelihood(&two, &seq).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn empty_sequence_is_an_error() {
        let hmm = CyclicHmm::new(vec![1.0], vec![0.0], vec![1.0], vec![1.0], 1e-6).unwrap();
        assert!(forward_log_likelihood(&hmm, &[]).is_err());
        assert!(viterbi(&hmm, &[]).is_err());
    }

    #[test]
    fn single_state_path_is_all_zero() {
        let hmm = CyclicHmm::new(vec![1.0], vec![0.0], vec![1.0], vec![1.0], 1e-6).unwrap();
        assert_eq!(viterbi(&hmm, &[5.0, -3.0, 1.0]).unwrap().states, vec![0, 0, 0]);
    }

    #[test]
    fn forced_advance_path() {
        let trans = vec![0.5, 0.5, 0.0, 0.0, 0.5, 0.5, 0.5, 0.0, 0.5];
        let hmm = CyclicHmm::new(trans, vec![0.0, 10.0, 20.0], vec![1.0; 3], vec![1.0, 0.0, 0.0], 1e-6).unwrap();
        assert_eq!(viterbi(&hmm, &[0.0, 10.0, 20.0]).unwrap().states, vec![0, 1, 2]);
    }

    #[test]
    fn exact_tie_prefers_lower_state() {
        // Identical states: every path of equal length scores the same.
        let hmm = CyclicHmm::new(vec![0.5, 0.5, 0.5, 0.5], vec![1.0, 1.0], vec![1.0, 1.0], vec![0.5, 0.5], 1e-6)
            .unwrap();
        assert_eq!(viterbi(&hmm, &[1.0, 2.0, 0.0]).unwrap().states, vec![0, 0, 0]);
    }

    #[test]
    fn single_state_baum_welch_is_population_mle() {
        let seqs = [vec![1.0, 2.0, 3.0]];
        let hmm = init_model(1, &seqs, 1e-6).unwrap();
        let out = baum_welch(&hmm, &seqs, &BaumWelchOptions::default()).unwrap();
        assert!((out.model.emit_mean()[0] - 2.0).abs() < 1e-12);
        assert!((out.model.emit_var()[0] - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(out.iterations, 1);
        assert!(out.converged);
    }

    #[test]
    fn variance_floor_has_absolute_minimum() {
        assert_eq!(variance_floor(&[vec![3.0, 3.0]], 1e-6), MIN_VARIANCE);
        let hmm = init_model(2, &[vec![3.0; 10]], 1e-6).unwrap();
        assert!(hmm.emit_var().iter().all(|&v| v == MIN_VARIANCE));
    }

    #[test]
    fn far_outlier_does_not_underflow() {
        let hmm = CyclicHmm::new(vec![0.5, 0.5, 0.5, 0.5], vec![0.0, 1.0], vec![1e-4, 1e-4], vec![1.0, 0.0], 1e-6)
            .unwrap();
        let seq = [0.0, 1e6, 1.0];
        let ll = forward_log_likelihood(&hmm, &seq).unwrap();
        assert!(ll.is_finite());
        assert!(viterbi(&hmm, &seq).unwrap().respects_topology(2));
    }
}
