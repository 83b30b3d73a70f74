//! Immutable hidden Markov model representation plus exact inference.
//!
//! A model couples an initial state distribution, a row-stochastic transition
//! matrix, and a per-state emission law (discrete symbol table, single
//! Gaussian, or Gaussian mixture). Models and observation sequences are
//! immutable after construction, so every operation here is a pure function
//! that is safe to call concurrently.
//!
//! Forward/backward run with per-step scaling (the log-likelihood falls out of
//! the scale factors); Viterbi runs in log-space. State indices are 1-based in
//! every external format (trajectories, errors, files) and 0-based internally.

mod gaussian;
mod inference;
mod sample;

pub use inference::Forward;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when checking that probability rows sum to one.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// Smallest admissible eigenvalue of an emission covariance matrix.
pub const MIN_COV_EIGENVALUE: f64 = 1e-8;

/// Floor applied to discrete emission probabilities during inference. Trained
/// models may assign exact zeros to symbols never seen in training; the floor
/// keeps such symbols from zeroing out an entire time step.
pub(crate) const EMISSION_FLOOR: f64 = 1e-12;

/// Version tag of the JSON model format.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Mean and covariance of one Gaussian component, in feature units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

/// Weighted Gaussian components modeling one state's observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    /// Non-negative component weights summing to one.
    pub weights: Vec<f64>,
    pub components: Vec<GaussianParams>,
}

/// State-conditional observation law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmissionModel {
    /// N x M row-stochastic table; `probs[i][k]` is the probability that
    /// state `i+1` emits symbol `k+1`.
    Discrete { probs: Vec<Vec<f64>> },
    /// One Gaussian per state.
    Gaussian { states: Vec<GaussianParams> },
    /// One Gaussian mixture per state; every state has the same number of
    /// components.
    Mixture { states: Vec<MixtureParams> },
}

impl EmissionModel {
    /// Number of states the emission law covers.
    pub fn num_states(&self) -> usize {
        match self {
            EmissionModel::Discrete { probs } => probs.len(),
            EmissionModel::Gaussian { states } => states.len(),
            EmissionModel::Mixture { states } => states.len(),
        }
    }

    /// Alphabet size for discrete emissions.
    pub fn num_symbols(&self) -> Option<usize> {
        match self {
            EmissionModel::Discrete { probs } => probs.first().map(Vec::len),
            _ => None,
        }
    }

    /// Feature dimension for continuous emissions.
    pub fn feature_dim(&self) -> Option<usize> {
        match self {
            EmissionModel::Discrete { .. } => None,
            EmissionModel::Gaussian { states } => states.first().map(|g| g.mean.len()),
            EmissionModel::Mixture { states } => states
                .first()
                .and_then(|m| m.components.first())
                .map(|g| g.mean.len()),
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, EmissionModel::Discrete { .. })
    }

    fn validate(&self, num_states: usize) -> Result<()> {
        if self.num_states() != num_states {
            return Err(Error::InvalidModel(format!(
                "emission model covers {} states, expected {num_states}",
                self.num_states()
            )));
        }
        match self {
            EmissionModel::Discrete { probs } => {
                let m = probs.first().map_or(0, Vec::len);
                if m == 0 {
                    return Err(Error::InvalidModel("emission alphabet is empty".into()));
                }
                for (i, row) in probs.iter().enumerate() {
                    if row.len() != m {
                        return Err(Error::InvalidModel(format!(
                            "emission row {} has {} entries, expected {m}",
                            i + 1,
                            row.len()
                        )));
                    }
                    check_stochastic(row, &format!("emission row {}", i + 1))?;
                }
            }
            EmissionModel::Gaussian { states } => {
                let dim = states.first().map_or(0, |g| g.mean.len());
                for (i, g) in states.iter().enumerate() {
                    validate_gaussian(g, dim, i)?;
                }
            }
            EmissionModel::Mixture { states } => {
                let dim = self.feature_dim().unwrap_or(0);
                let comps = states.first().map_or(0, |m| m.components.len());
                if comps == 0 {
                    return Err(Error::InvalidModel("mixture has no components".into()));
                }
                for (i, mix) in states.iter().enumerate() {
                    if mix.components.len() != comps {
                        return Err(Error::InvalidModel(format!(
                            "state {} has {} mixture components, expected {comps}",
                            i + 1,
                            mix.components.len()
                        )));
                    }
                    if mix.weights.len() != comps {
                        return Err(Error::InvalidModel(format!(
                            "state {} has {} mixture weights, expected {comps}",
                            i + 1,
                            mix.weights.len()
                        )));
                    }
                    check_stochastic(&mix.weights, &format!("mixture weights of state {}", i + 1))?;
                    for g in &mix.components {
                        validate_gaussian(g, dim, i)?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn validate_gaussian(g: &GaussianParams, dim: usize, state: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidModel("Gaussian feature dimension is zero".into()));
    }
    if g.mean.len() != dim {
        return Err(Error::InvalidModel(format!(
            "state {} mean has dimension {}, expected {dim}",
            state + 1,
            g.mean.len()
        )));
    }
    if g.mean.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidModel(format!("state {} mean is not finite", state + 1)));
    }
    gaussian::validate_covariance(&g.covariance, dim, state)
}

fn check_stochastic(row: &[f64], what: &str) -> Result<()> {
    for &p in row {
        if !p.is_finite() || p < 0.0 || p > 1.0 + 1e-12 {
            return Err(Error::InvalidModel(format!(
                "{what} contains probability {p} outside [0, 1]"
            )));
        }
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::InvalidModel(format!("{what} sums to {sum}, expected 1")));
    }
    Ok(())
}

/// A hidden Markov model: initial distribution, transition matrix, and
/// emission law. Validated on construction and immutable afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmModel {
    num_states: usize,
    initial: Vec<f64>,
    transitions: Vec<Vec<f64>>,
    emissions: EmissionModel,
}

impl HmmModel {
    /// Build a model after checking every invariant: `initial` and each row of
    /// `transitions` sum to one within [`STOCHASTIC_TOL`], all probabilities
    /// lie in `[0, 1]`, and the emission law covers exactly `num_states`
    /// states (covariances symmetric with smallest eigenvalue at least
    /// [`MIN_COV_EIGENVALUE`]).
    pub fn new(
        num_states: usize,
        initial: Vec<f64>,
        transitions: Vec<Vec<f64>>,
        emissions: EmissionModel,
    ) -> Result<Self> {
        if num_states == 0 {
            return Err(Error::InvalidModel("num_states must be at least 1".into()));
        }
        if initial.len() != num_states {
            return Err(Error::InvalidModel(format!(
                "initial distribution has {} entries, expected {num_states}",
                initial.len()
            )));
        }
        check_stochastic(&initial, "initial distribution")?;
        if transitions.len() != num_states {
            return Err(Error::InvalidModel(format!(
                "transition matrix has {} rows, expected {num_states}",
                transitions.len()
            )));
        }
        for (i, row) in transitions.iter().enumerate() {
            if row.len() != num_states {
                return Err(Error::InvalidModel(format!(
                    "transition row {} has {} entries, expected {num_states}",
                    i + 1,
                    row.len()
                )));
            }
            check_stochastic(row, &format!("transition row {}", i + 1))?;
        }
        emissions.validate(num_states)?;
        Ok(Self { num_states, initial, transitions, emissions })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn transitions(&self) -> &[Vec<f64>] {
        &self.transitions
    }

    pub fn emissions(&self) -> &EmissionModel {
        &self.emissions
    }

    /// Alphabet size for discrete models.
    pub fn num_symbols(&self) -> Option<usize> {
        self.emissions.num_symbols()
    }

    /// Relabel states: new state `r` takes the parameters of old state
    /// `perm[r]` (0-based). Transition rows and columns are permuted
    /// consistently, so the model's likelihood is unchanged.
    pub fn permute_states(&self, perm: &[usize]) -> Result<Self> {
        let n = self.num_states;
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidInput(format!(
                "permutation {perm:?} is not a permutation of 0..{n}"
            )));
        }
        let initial = perm.iter().map(|&p| self.initial[p]).collect();
        let transitions = perm
            .iter()
            .map(|&r| perm.iter().map(|&c| self.transitions[r][c]).collect())
            .collect();
        let emissions = match &self.emissions {
            EmissionModel::Discrete { probs } => EmissionModel::Discrete {
                probs: perm.iter().map(|&p| probs[p].clone()).collect(),
            },
            EmissionModel::Gaussian { states } => EmissionModel::Gaussian {
                states: perm.iter().map(|&p| states[p].clone()).collect(),
            },
            EmissionModel::Mixture { states } => EmissionModel::Mixture {
                states: perm.iter().map(|&p| states[p].clone()).collect(),
            },
        };
        Self::new(n, initial, transitions, emissions)
    }

    /// Serialize to the versioned JSON model format. Probabilities are written
    /// as decimal floats with shortest round-trip precision, so a load
    /// reproduces every value exactly.
    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            version: MODEL_FORMAT_VERSION,
            num_states: self.num_states,
            pi: self.initial.clone(),
            transitions: self.transitions.clone(),
            emission: self.emissions.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// Parse the versioned JSON model format, rejecting unknown versions and
    /// any document whose parameters violate a model invariant.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("malformed model JSON: {e}")))?;
        if file.version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
                file.version
            )));
        }
        Self::new(file.num_states, file.pi, file.transitions, file.emission)
            .map_err(|e| Error::Format(format!("model file violates an invariant: {e}")))
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    num_states: usize,
    pi: Vec<f64>,
    #[serde(rename = "A")]
    transitions: Vec<Vec<f64>>,
    emission: EmissionModel,
}

/// One student's per-level observations, ordered by level index.
#[derive(Debug, Clone, PartialEq)]
pub enum ObservationSequence {
    /// 1-based symbols in `{1..=M}`.
    Discrete(Vec<usize>),
    /// Fixed-dimension real feature vectors.
    Continuous(Vec<Vec<f64>>),
}

impl ObservationSequence {
    /// Build a discrete sequence, rejecting empty input and symbol 0.
    pub fn discrete(symbols: Vec<usize>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::InvalidInput("observation sequence is empty".into()));
        }
        if let Some(pos) = symbols.iter().position(|&s| s == 0) {
            return Err(Error::InvalidInput(format!(
                "symbol at step {} is 0; symbols are 1-based",
                pos + 1
            )));
        }
        Ok(ObservationSequence::Discrete(symbols))
    }

    /// Build a continuous sequence, rejecting empty input, ragged dimensions,
    /// and non-finite values.
    pub fn continuous(values: Vec<Vec<f64>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("observation sequence is empty".into()));
        }
        let dim = values[0].len();
        if dim == 0 {
            return Err(Error::InvalidInput("observation vectors are empty".into()));
        }
        for (t, v) in values.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "observation at step {} has dimension {}, expected {dim}",
                    t + 1,
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "observation at step {} is not finite",
                    t + 1
                )));
            }
        }
        Ok(ObservationSequence::Continuous(values))
    }

    /// Number of time steps.
    pub fn len(&self) -> usize {
        match self {
            ObservationSequence::Discrete(v) => v.len(),
            ObservationSequence::Continuous(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, ObservationSequence::Discrete(_))
    }
}

/// Viterbi-decoded state path for one observation sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    /// 1-based state indices, one per observation.
    pub states: Vec<usize>,
    /// Log of the joint probability of the best path and the observations.
    pub log_prob: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state_identity() -> HmmModel {
        HmmModel::new(
            2,
            vec![0.5, 0.5],
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            EmissionModel::Discrete { probs: vec![vec![1.0, 0.0], vec![0.0, 1.0]] },
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_row_sums() {
        let err = HmmModel::new(
            2,
            vec![0.6, 0.6],
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            EmissionModel::Discrete { probs: vec![vec![1.0, 0.0], vec![0.0, 1.0]] },
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidModel(_)), "got {err:?}");
    }

    #[test]
    fn rejects_dimension_mismatch() {
        assert!(HmmModel::new(
            2,
            vec![1.0],
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            EmissionModel::Discrete { probs: vec![vec![1.0, 0.0], vec![0.0, 1.0]] },
        )
        .is_err());
        assert!(HmmModel::new(
            2,
            vec![0.5, 0.5],
            vec![vec![1.0]],
            EmissionModel::Discrete { probs: vec![vec![1.0, 0.0], vec![0.0, 1.0]] },
        )
        .is_err());
        assert!(HmmModel::new(
            2,
            vec![0.5, 0.5],
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            EmissionModel::Discrete { probs: vec![vec![1.0, 0.0]] },
        )
        .is_err());
    }

    #[test]
    fn rejects_zero_states() {
        let err = HmmModel::new(0, vec![], vec![], EmissionModel::Discrete { probs: vec![] });
        assert!(err.is_err());
    }

    #[test]
    fn rejects_asymmetric_covariance() {
        let g = EmissionModel::Gaussian {
            states: vec![GaussianParams {
                mean: vec![0.0, 0.0],
                covariance: vec![vec![1.0, 0.5], vec![0.2, 1.0]],
            }],
        };
        assert!(HmmModel::new(1, vec![1.0], vec![vec![1.0]], g).is_err());
    }

    #[test]
    fn rejects_non_positive_definite_covariance() {
        let g = EmissionModel::Gaussian {
            states: vec![GaussianParams {
                mean: vec![0.0, 0.0],
                covariance: vec![vec![1.0, 2.0], vec![2.0, 1.0]],
            }],
        };
        assert!(HmmModel::new(1, vec![1.0], vec![vec![1.0]], g).is_err());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let model = HmmModel::new(
            2,
            vec![1.0 / 3.0, 2.0 / 3.0],
            vec![vec![0.1, 0.9], vec![0.7, 0.3]],
            EmissionModel::Discrete {
                probs: vec![vec![0.25, 0.25, 0.5], vec![0.6, 0.3, 0.1]],
            },
        )
        .unwrap();
        let restored = HmmModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(model, restored);
    }

    #[test]
    fn json_rejects_unknown_version() {
        let model = two_state_identity();
        let text = model.to_json().unwrap().replace("\"version\": 1", "\"version\": 99");
        let err = HmmModel::from_json(&text).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "got {err:?}");
    }

    #[test]
    fn json_rejects_tampered_row_sum() {
        let model = two_state_identity();
        let text = model.to_json().unwrap().replace("0.5", "0.6");
        let err = HmmModel::from_json(&text).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "got {err:?}");
    }

    #[test]
    fn permute_round_trip() {
        let model = HmmModel::new(
            2,
            vec![0.3, 0.7],
            vec![vec![0.1, 0.9], vec![0.6, 0.4]],
            EmissionModel::Discrete { probs: vec![vec![0.2, 0.8], vec![0.9, 0.1]] },
        )
        .unwrap();
        let swapped = model.permute_states(&[1, 0]).unwrap();
        assert_eq!(swapped.initial(), &[0.7, 0.3]);
        assert_eq!(swapped.transitions()[0], vec![0.4, 0.6]);
        let back = swapped.permute_states(&[1, 0]).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn permute_rejects_non_permutation() {
        let model = two_state_identity();
        assert!(model.permute_states(&[0, 0]).is_err());
        assert!(model.permute_states(&[0]).is_err());
    }

    #[test]
    fn sequence_constructors_validate() {
        assert!(ObservationSequence::discrete(vec![]).is_err());
        assert!(ObservationSequence::discrete(vec![1, 0, 2]).is_err());
        assert!(ObservationSequence::continuous(vec![vec![1.0], vec![]]).is_err());
        assert!(ObservationSequence::continuous(vec![vec![f64::NAN]]).is_err());
        assert_eq!(ObservationSequence::discrete(vec![1, 2]).unwrap().len(), 2);
    }
}
