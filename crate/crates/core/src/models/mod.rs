//! Hidden-variables models of bipartite spin measurements.
//!
//! A model is described at two levels, kept separate so the factorisability
//! conditions can be checked directly:
//!
//! - the hidden-state distribution `σ^{IJ}(λ)`, which may depend on both
//!   measurement settings (a Measurement Independence violation), and
//! - the conditional outcome distribution `p_λ^{IJ}(A, B)`.
//!
//! The operational joint distribution is their mixture, see
//! [`HiddenVariableModel::exact_joint`].

mod predicates;
mod sampling;
mod schulman;
mod source;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{same_direction, Direction};

pub use predicates::{
    measurement_independence, outcome_independence, parameter_independence, PredicateReport,
    PREDICATE_TOLERANCE,
};
pub use sampling::{sample_pair, OutcomeOrder, PairSampler, SampledPair};
pub use schulman::{
    schulman_ratio, schulman_single_probs, schulman_weight, RatioMethod, SchulmanKernel,
};
pub use source::{
    quantum_joint, CorrelationSign, MixtureParams, Source, SpinRelation, WhartonParams, WhartonTag,
};

/// Tolerance on the normalisation of probability vectors.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// A ±1 measurement outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub fn value(self) -> f64 {
        match self {
            Outcome::Plus => 1.0,
            Outcome::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Outcome::Plus => Outcome::Minus,
            Outcome::Minus => Outcome::Plus,
        }
    }
}

impl TryFrom<i8> for Outcome {
    type Error = String;

    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Outcome::Plus),
            -1 => Ok(Outcome::Minus),
            other => Err(format!("outcome must be +1 or -1, got {other}")),
        }
    }
}

impl From<Outcome> for i8 {
    fn from(o: Outcome) -> i8 {
        match o {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OutcomePair {
    pub a: Outcome,
    pub b: Outcome,
}

impl OutcomePair {
    /// All four pairs in the canonical order `++, +-, -+, --`.
    pub const ALL: [OutcomePair; 4] = [
        OutcomePair { a: Outcome::Plus, b: Outcome::Plus },
        OutcomePair { a: Outcome::Plus, b: Outcome::Minus },
        OutcomePair { a: Outcome::Minus, b: Outcome::Plus },
        OutcomePair { a: Outcome::Minus, b: Outcome::Minus },
    ];

    pub fn index(self) -> usize {
        match (self.a, self.b) {
            (Outcome::Plus, Outcome::Plus) => 0,
            (Outcome::Plus, Outcome::Minus) => 1,
            (Outcome::Minus, Outcome::Plus) => 2,
            (Outcome::Minus, Outcome::Minus) => 3,
        }
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }
}

/// Probabilities of `(+,+), (+,-), (-,+), (-,-)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "JointDocument", into = "JointDocument")]
pub struct JointDistribution([f64; 4]);

impl JointDistribution {
    pub fn new(p_pp: f64, p_pm: f64, p_mp: f64, p_mm: f64) -> Result<Self> {
        Self::from_array([p_pp, p_pm, p_mp, p_mm])
    }

    pub fn from_array(p: [f64; 4]) -> Result<Self> {
        if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "joint probabilities must be finite and non-negative: {p:?}"
            )));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "joint probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self(p))
    }

    pub fn from_counts(counts: [u64; 4]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::InvalidParameter("no samples".into()));
        }
        let n = total as f64;
        Ok(Self(counts.map(|c| c as f64 / n)))
    }

    /// Independent outcomes with `P(A=+1) = p_a`, `P(B=+1) = p_b`.
    pub fn product(p_a: f64, p_b: f64) -> Result<Self> {
        for p in [p_a, p_b] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::domain("marginal probability", p));
            }
        }
        Ok(Self([
            p_a * p_b,
            p_a * (1.0 - p_b),
            (1.0 - p_a) * p_b,
            (1.0 - p_a) * (1.0 - p_b),
        ]))
    }

    pub fn point(pair: OutcomePair) -> Self {
        let mut p = [0.0; 4];
        p[pair.index()] = 1.0;
        Self(p)
    }

    pub fn probabilities(&self) -> [f64; 4] {
        self.0
    }

    pub fn prob(&self, pair: OutcomePair) -> f64 {
        self.0[pair.index()]
    }

    pub fn p_pp(&self) -> f64 {
        self.0[0]
    }

    pub fn p_pm(&self) -> f64 {
        self.0[1]
    }

    pub fn p_mp(&self) -> f64 {
        self.0[2]
    }

    pub fn p_mm(&self) -> f64 {
        self.0[3]
    }

    /// `⟨AB⟩ = P(A=B) − P(A≠B)`.
    pub fn correlator(&self) -> f64 {
        let [pp, pm, mp, mm] = self.0;
        pp + mm - pm - mp
    }

    /// `(⟨A⟩, ⟨B⟩)`.
    pub fn marginals(&self) -> (f64, f64) {
        let [pp, pm, mp, mm] = self.0;
        (pp + pm - mp - mm, pp + mp - pm - mm)
    }

    /// Pointwise mixture `a·self + (1−a)·other`.
    pub fn mix(&self, a: f64, other: &Self) -> Result<Self> {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::domain("mixture weight", a));
        }
        let mut p = [0.0; 4];
        for (k, slot) in p.iter_mut().enumerate() {
            *slot = a * self.0[k] + (1.0 - a) * other.0[k];
        }
        Ok(Self(p))
    }

    pub fn max_abs_difference(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(other.0)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointDocument {
    p_pp: f64,
    p_pm: f64,
    p_mp: f64,
    p_mm: f64,
}

impl TryFrom<JointDocument> for JointDistribution {
    type Error = Error;

    fn try_from(d: JointDocument) -> Result<Self> {
        Self::new(d.p_pp, d.p_pm, d.p_mp, d.p_mm)
    }
}

impl From<JointDistribution> for JointDocument {
    fn from(j: JointDistribution) -> Self {
        let [p_pp, p_pm, p_mp, p_mm] = j.0;
        Self { p_pp, p_pm, p_mp, p_mm }
    }
}

/// A measurement context: the measured axis plus an opaque label for
/// anything else about the apparatus. Built-in models ignore the label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Setting {
    pub direction: Direction,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub context: String,
}

impl Setting {
    pub fn new(direction: Direction) -> Self {
        Self {
            direction,
            context: String::new(),
        }
    }

    pub fn with_context(direction: Direction, context: impl Into<String>) -> Self {
        Self {
            direction,
            context: context.into(),
        }
    }
}

impl From<Direction> for Setting {
    fn from(direction: Direction) -> Self {
        Self::new(direction)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    First,
    Second,
}

/// A hidden state λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HiddenState {
    /// The one-point hidden space of the quantum model.
    Trivial,
    /// A joint outcome value carried by the hidden state itself.
    JointValue(OutcomePair),
    /// The pre-selected first outcome of a sequential single-particle run.
    Preselected { outcome: Outcome },
    /// A pair of hidden spins (anti)parallel to the tagged measurement axis.
    Wharton {
        tag: WhartonTag,
        alice_spin: Direction,
        bob_spin: Direction,
    },
    /// A state drawn from one component of a mixture source.
    Component {
        branch: Branch,
        inner: Box<HiddenState>,
    },
}

impl HiddenState {
    /// Equality up to the angle tolerance on hidden spin directions.
    pub fn matches(&self, other: &HiddenState) -> bool {
        use HiddenState::*;
        match (self, other) {
            (Trivial, Trivial) => true,
            (JointValue(a), JointValue(b)) => a == b,
            (Preselected { outcome: a }, Preselected { outcome: b }) => a == b,
            (
                Wharton { tag: t1, alice_spin: a1, bob_spin: b1 },
                Wharton { tag: t2, alice_spin: a2, bob_spin: b2 },
            ) => t1 == t2 && same_direction(*a1, *a2) && same_direction(*b1, *b2),
            (
                Component { branch: b1, inner: i1 },
                Component { branch: b2, inner: i2 },
            ) => b1 == b2 && i1.matches(i2),
            _ => false,
        }
    }
}

impl fmt::Display for HiddenState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HiddenState::Trivial => write!(f, "trivial"),
            HiddenState::JointValue(p) => {
                write!(f, "({:+},{:+})", p.a.value() as i8, p.b.value() as i8)
            }
            HiddenState::Preselected { outcome } => write!(f, "pre({:+})", outcome.value() as i8),
            HiddenState::Wharton { tag, .. } => write!(f, "{tag:?}"),
            HiddenState::Component { branch, inner } => write!(f, "{branch:?}:{inner}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenAtom {
    pub state: HiddenState,
    pub weight: f64,
}

/// A finite distribution over hidden states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HiddenDistribution {
    atoms: Vec<HiddenAtom>,
}

impl HiddenDistribution {
    pub fn new(atoms: Vec<HiddenAtom>) -> Result<Self> {
        if atoms.iter().any(|a| !a.weight.is_finite() || a.weight < 0.0) {
            return Err(Error::InvalidWeights(
                "hidden-state weights must be finite and non-negative".into(),
            ));
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidWeights(format!(
                "hidden-state weights sum to {total}, not 1"
            )));
        }
        Ok(Self { atoms })
    }

    pub fn point(state: HiddenState) -> Self {
        Self {
            atoms: vec![HiddenAtom { state, weight: 1.0 }],
        }
    }

    /// Builds from `(state, weight)` pairs.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (HiddenState, f64)>) -> Result<Self> {
        Self::new(
            pairs
                .into_iter()
                .map(|(state, weight)| HiddenAtom { state, weight })
                .collect(),
        )
    }

    pub(crate) fn empty() -> Self {
        Self { atoms: Vec::new() }
    }

    pub(crate) fn unchecked(atoms: Vec<HiddenAtom>) -> Self {
        Self { atoms }
    }

    pub fn atoms(&self) -> &[HiddenAtom] {
        &self.atoms
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Atoms with strictly positive weight.
    pub fn support(&self) -> impl Iterator<Item = &HiddenAtom> {
        self.atoms.iter().filter(|a| a.weight > 0.0)
    }

    pub fn weight_of(&self, state: &HiddenState) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.state.matches(state))
            .map(|a| a.weight)
            .sum()
    }

    /// Largest weight difference over the union of both supports.
    pub fn max_abs_difference(&self, other: &Self) -> f64 {
        self.support()
            .chain(other.support())
            .map(|a| (self.weight_of(&a.state) - other.weight_of(&a.state)).abs())
            .fold(0.0, f64::max)
    }
}

/// A hidden-variables model of bipartite spin measurements.
///
/// Built-in models all have finite hidden supports. Externally supplied
/// models that cannot enumerate their support should return
/// [`Error::UnsupportedModel`] from `hidden_distribution`.
pub trait HiddenVariableModel: Send + Sync {
    fn name(&self) -> String;

    /// `σ^{IJ}(λ)` for Alice's setting `I` and Bob's setting `J`.
    fn hidden_distribution(&self, alice: &Setting, bob: &Setting) -> Result<HiddenDistribution>;

    /// `p_λ^{IJ}(A, B)`. Must be defined for hidden states outside the
    /// support of `σ^{IJ}` too, so that parameter independence can be tested.
    fn outcome_distribution(
        &self,
        hidden: &HiddenState,
        alice: &Setting,
        bob: &Setting,
    ) -> Result<JointDistribution>;

    /// `Σ_λ σ^{IJ}(λ) p_λ^{IJ}`.
    fn exact_joint(&self, alice: &Setting, bob: &Setting) -> Result<JointDistribution> {
        let sigma = self.hidden_distribution(alice, bob)?;
        let mut acc = [0.0; 4];
        for atom in sigma.support() {
            let p = self.outcome_distribution(&atom.state, alice, bob)?;
            for (slot, q) in acc.iter_mut().zip(p.probabilities()) {
                *slot += atom.weight * q;
            }
        }
        JointDistribution::from_array(acc)
    }

    /// Whether sub-ensembles selected on the hidden state can be prepared
    /// operationally by the source.
    fn sub_ensembles_preparable(&self) -> bool {
        false
    }
}
