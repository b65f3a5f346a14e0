//! Built-in sources (model + preparation parameters) and their JSON form.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{
    Branch, HiddenAtom, HiddenDistribution, HiddenState, HiddenVariableModel, JointDistribution,
    Outcome, OutcomePair, SchulmanKernel, Setting,
};
use crate::error::{Error, Result};
use crate::geometry::{angle_between, Direction};

/// Tolerance on the sum of user-supplied source weights before they are
/// renormalised.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum CorrelationSign {
    /// Perfect correlations at zero angle.
    Correlated,
    /// Perfect anticorrelations at zero angle.
    Anticorrelated,
}

impl CorrelationSign {
    pub fn value(self) -> f64 {
        match self {
            CorrelationSign::Correlated => 1.0,
            CorrelationSign::Anticorrelated => -1.0,
        }
    }
}

impl TryFrom<i64> for CorrelationSign {
    type Error = String;

    fn try_from(v: i64) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(CorrelationSign::Correlated),
            -1 => Ok(CorrelationSign::Anticorrelated),
            other => Err(format!("correlation_sign must be +1 or -1, got {other}")),
        }
    }
}

impl From<CorrelationSign> for i64 {
    fn from(s: CorrelationSign) -> i64 {
        match s {
            CorrelationSign::Correlated => 1,
            CorrelationSign::Anticorrelated => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpinRelation {
    #[default]
    Parallel,
    Antiparallel,
}

/// Which measurement axis (and sign) the pair of hidden spins is aligned
/// with at preparation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WhartonTag {
    Aplus,
    Bplus,
    Aminus,
    Bminus,
}

impl WhartonTag {
    /// Order of the weights vector.
    pub const ALL: [WhartonTag; 4] = [
        WhartonTag::Aplus,
        WhartonTag::Bplus,
        WhartonTag::Aminus,
        WhartonTag::Bminus,
    ];

    fn anchored_on_alice(self) -> bool {
        matches!(self, WhartonTag::Aplus | WhartonTag::Aminus)
    }
}

/// Perfectly (anti)correlated spin-½ pair: `P(A=B) = cos²(θ/2)` for the
/// correlated sign, marginals ½.
pub fn quantum_joint(theta: f64, sign: CorrelationSign) -> Result<JointDistribution> {
    if !(0.0..=PI).contains(&theta) {
        return Err(Error::domain("angle (must lie in [0, pi])", theta));
    }
    let (s, c) = (theta / 2.0).sin_cos();
    let (same, differ) = (c * c / 2.0, s * s / 2.0);
    match sign {
        CorrelationSign::Correlated => JointDistribution::new(same, differ, differ, same),
        CorrelationSign::Anticorrelated => JointDistribution::new(differ, same, same, differ),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WhartonParams {
    weights: [f64; 4],
    /// Weights as supplied; serialized in place of the normalized ones so
    /// that a parse/serialize round trip is exact.
    given: [f64; 4],
    spin_relation: SpinRelation,
    kernel: SchulmanKernel,
}

impl WhartonParams {
    /// Weights are for `[Aplus, Bplus, Aminus, Bminus]`.
    pub fn new(weights: [f64; 4], spin_relation: SpinRelation, kernel: SchulmanKernel) -> Result<Self> {
        Ok(Self {
            weights: normalized_weights(weights)?,
            given: weights,
            spin_relation,
            kernel,
        })
    }

    pub fn weights(&self) -> [f64; 4] {
        self.weights
    }

    pub fn spin_relation(&self) -> SpinRelation {
        self.spin_relation
    }

    pub fn kernel(&self) -> SchulmanKernel {
        self.kernel
    }

    /// Hidden spins `(Alice's, Bob's)` for a tag under the given axes.
    fn hidden_spins(&self, tag: WhartonTag, alice: Direction, bob: Direction) -> (Direction, Direction) {
        let axis = match tag {
            WhartonTag::Aplus => alice,
            WhartonTag::Aminus => alice.opposite(),
            WhartonTag::Bplus => bob,
            WhartonTag::Bminus => bob.opposite(),
        };
        match (self.spin_relation, tag.anchored_on_alice()) {
            (SpinRelation::Parallel, _) => (axis, axis),
            (SpinRelation::Antiparallel, true) => (axis, axis.opposite()),
            (SpinRelation::Antiparallel, false) => (axis.opposite(), axis),
        }
    }

    /// `P(+1)` for one particle. The anchored particle (hidden spin aligned
    /// with its own axis at preparation) is not rotated and follows the
    /// ideal rule; the other one carries the finite-width correction.
    fn p_plus(&self, spin: Direction, axis: Direction, anchored: bool) -> Result<f64> {
        let phi = angle_between(spin, axis);
        if anchored {
            let c = (phi / 2.0).cos();
            Ok(c * c)
        } else {
            self.kernel.p_same(phi)
        }
    }
}

fn normalized_weights(weights: [f64; 4]) -> Result<[f64; 4]> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidWeights(format!(
            "weights must be finite and non-negative: {weights:?}"
        )));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(Error::InvalidWeights(format!(
            "weights sum to {total}, expected 1 within {WEIGHT_SUM_TOLERANCE:e}"
        )));
    }
    Ok(weights.map(|w| w / total))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParams {
    weight: f64,
    first: Source,
    second: Source,
}

impl MixtureParams {
    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn first(&self) -> &Source {
        &self.first
    }

    pub fn second(&self) -> &Source {
        &self.second
    }
}

/// A source: a built-in model together with its preparation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SourceDocument", into = "SourceDocument")]
pub enum Source {
    /// The maximally entangled state as a trivial hidden-variables model.
    QuantumCorrelated { correlation_sign: CorrelationSign },
    /// λ is the joint outcome, distributed with the quantum probabilities
    /// of the current settings.
    ToyMi { correlation_sign: CorrelationSign },
    /// Sequential single-particle measurements under Schulman's rule.
    SchulmanSingle { kernel: SchulmanKernel },
    /// Two particles with (anti)parallel hidden spins aligned to one of
    /// the measurement axes.
    WhartonPair(WhartonParams),
    /// Pointwise mixture `a σ_1^{IJ} + (1−a) σ_2^{IJ}` for every setting.
    Mixture(Box<MixtureParams>),
}

impl Source {
    pub fn quantum(sign: CorrelationSign) -> Self {
        Source::QuantumCorrelated { correlation_sign: sign }
    }

    pub fn toy(sign: CorrelationSign) -> Self {
        Source::ToyMi { correlation_sign: sign }
    }

    pub fn schulman_single(gamma_s: f64) -> Result<Self> {
        Ok(Source::SchulmanSingle {
            kernel: SchulmanKernel::new(gamma_s, None)?,
        })
    }

    pub fn wharton(weights: [f64; 4], relation: SpinRelation, gamma_s: f64) -> Result<Self> {
        Ok(Source::WhartonPair(WhartonParams::new(
            weights,
            relation,
            SchulmanKernel::new(gamma_s, None)?,
        )?))
    }

    /// All weight on one hidden-spin tag.
    pub fn wharton_homogeneous(tag: WhartonTag, gamma_s: f64) -> Result<Self> {
        let mut weights = [0.0; 4];
        weights[WhartonTag::ALL.iter().position(|t| *t == tag).unwrap()] = 1.0;
        Self::wharton(weights, SpinRelation::Parallel, gamma_s)
    }

    pub fn mixture(weight: f64, first: Source, second: Source) -> Result<Self> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::domain("mixture weight", weight));
        }
        Ok(Source::Mixture(Box::new(MixtureParams {
            weight,
            first,
            second,
        })))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidParameter(e.to_string()))
    }

    pub fn model_name(&self) -> &'static str {
        match self {
            Source::QuantumCorrelated { .. } => "quantum_correlated",
            Source::ToyMi { .. } => "toy_mi",
            Source::SchulmanSingle { .. } => "schulman_single",
            Source::WhartonPair(_) => "wharton_pair",
            Source::Mixture(_) => "mixture",
        }
    }
}

fn foreign_state(model: &str, hidden: &HiddenState) -> Error {
    Error::InvalidParameter(format!("hidden state {hidden} does not belong to model {model}"))
}

impl HiddenVariableModel for Source {
    fn name(&self) -> String {
        self.model_name().to_string()
    }

    fn hidden_distribution(&self, alice: &Setting, bob: &Setting) -> Result<HiddenDistribution> {
        match self {
            Source::QuantumCorrelated { .. } => Ok(HiddenDistribution::point(HiddenState::Trivial)),
            Source::ToyMi { correlation_sign } => {
                let theta = angle_between(alice.direction, bob.direction);
                let joint = quantum_joint(theta, *correlation_sign)?;
                HiddenDistribution::from_pairs(
                    OutcomePair::ALL
                        .into_iter()
                        .map(|pair| (HiddenState::JointValue(pair), joint.prob(pair))),
                )
            }
            Source::SchulmanSingle { .. } => HiddenDistribution::from_pairs([
                (HiddenState::Preselected { outcome: Outcome::Plus }, 0.5),
                (HiddenState::Preselected { outcome: Outcome::Minus }, 0.5),
            ]),
            Source::WhartonPair(params) => HiddenDistribution::from_pairs(
                WhartonTag::ALL.into_iter().zip(params.weights).map(|(tag, w)| {
                    let (alice_spin, bob_spin) =
                        params.hidden_spins(tag, alice.direction, bob.direction);
                    (
                        HiddenState::Wharton {
                            tag,
                            alice_spin,
                            bob_spin,
                        },
                        w,
                    )
                }),
            ),
            Source::Mixture(mix) => {
                let mut atoms = Vec::new();
                for (branch, source, a) in [
                    (Branch::First, &mix.first, mix.weight),
                    (Branch::Second, &mix.second, 1.0 - mix.weight),
                ] {
                    for atom in source.hidden_distribution(alice, bob)?.atoms() {
                        atoms.push(HiddenAtom {
                            state: HiddenState::Component {
                                branch,
                                inner: Box::new(atom.state.clone()),
                            },
                            weight: a * atom.weight,
                        });
                    }
                }
                HiddenDistribution::new(atoms)
            }
        }
    }

    fn outcome_distribution(
        &self,
        hidden: &HiddenState,
        alice: &Setting,
        bob: &Setting,
    ) -> Result<JointDistribution> {
        let theta = angle_between(alice.direction, bob.direction);
        match (self, hidden) {
            (Source::QuantumCorrelated { correlation_sign }, HiddenState::Trivial) => {
                quantum_joint(theta, *correlation_sign)
            }
            (Source::ToyMi { .. }, HiddenState::JointValue(pair)) => {
                Ok(JointDistribution::point(*pair))
            }
            (Source::SchulmanSingle { kernel }, HiddenState::Preselected { outcome }) => {
                let p_same = kernel.p_same(theta)?;
                let mut p = [0.0; 4];
                p[OutcomePair { a: *outcome, b: *outcome }.index()] = p_same;
                p[OutcomePair { a: *outcome, b: outcome.flipped() }.index()] = 1.0 - p_same;
                JointDistribution::from_array(p)
            }
            (
                Source::WhartonPair(params),
                HiddenState::Wharton {
                    tag,
                    alice_spin,
                    bob_spin,
                },
            ) => {
                let alice_first = tag.anchored_on_alice();
                let p_a = params.p_plus(*alice_spin, alice.direction, alice_first)?;
                let p_b = params.p_plus(*bob_spin, bob.direction, !alice_first)?;
                JointDistribution::product(p_a, p_b)
            }
            (Source::Mixture(mix), HiddenState::Component { branch, inner }) => match branch {
                Branch::First => mix.first.outcome_distribution(inner, alice, bob),
                Branch::Second => mix.second.outcome_distribution(inner, alice, bob),
            },
            (source, hidden) => Err(foreign_state(source.model_name(), hidden)),
        }
    }

    fn exact_joint(&self, alice: &Setting, bob: &Setting) -> Result<JointDistribution> {
        match self {
            Source::QuantumCorrelated { correlation_sign } => {
                quantum_joint(angle_between(alice.direction, bob.direction), *correlation_sign)
            }
            _ => {
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
        }
    }

    fn sub_ensembles_preparable(&self) -> bool {
        match self {
            Source::WhartonPair(_) => true,
            Source::Mixture(mix) => {
                mix.first.sub_ensembles_preparable() && mix.second.sub_ensembles_preparable()
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ModelKind {
    QuantumCorrelated,
    ToyMi,
    SchulmanSingle,
    WhartonPair,
    Mixture,
}

/// Wire form of [`Source`]; which fields are required depends on `model`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceDocument {
    model: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spin_relation: Option<SpinRelation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truncation: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    correlation_sign: Option<CorrelationSign>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    first: Option<Box<SourceDocument>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    second: Option<Box<SourceDocument>>,
}

impl SourceDocument {
    fn empty(model: ModelKind) -> Self {
        Self {
            model,
            weights: None,
            spin_relation: None,
            gamma_s: None,
            truncation: None,
            correlation_sign: None,
            weight: None,
            first: None,
            second: None,
        }
    }

    fn present_fields(&self) -> Vec<&'static str> {
        let mut fields = Vec::new();
        let mut mark = |present: bool, name| {
            if present {
                fields.push(name)
            }
        };
        mark(self.weights.is_some(), "weights");
        mark(self.spin_relation.is_some(), "spin_relation");
        mark(self.gamma_s.is_some(), "gamma_s");
        mark(self.truncation.is_some(), "truncation");
        mark(self.correlation_sign.is_some(), "correlation_sign");
        mark(self.weight.is_some(), "weight");
        mark(self.first.is_some(), "first");
        mark(self.second.is_some(), "second");
        fields
    }

    fn allow_only(&self, allowed: &[&str]) -> Result<()> {
        for field in self.present_fields() {
            if !allowed.contains(&field) {
                return Err(Error::InvalidParameter(format!(
                    "field `{field}` does not apply to model {:?}",
                    self.model
                )));
            }
        }
        Ok(())
    }
}

fn required<T>(value: Option<T>, field: &str, model: ModelKind) -> Result<T> {
    value.ok_or_else(|| Error::InvalidParameter(format!("model {model:?} requires `{field}`")))
}

impl TryFrom<SourceDocument> for Source {
    type Error = Error;

    fn try_from(doc: SourceDocument) -> Result<Self> {
        let model = doc.model;
        match model {
            ModelKind::QuantumCorrelated | ModelKind::ToyMi => {
                doc.allow_only(&["correlation_sign"])?;
                let sign = required(doc.correlation_sign, "correlation_sign", model)?;
                Ok(if model == ModelKind::ToyMi {
                    Source::toy(sign)
                } else {
                    Source::quantum(sign)
                })
            }
            ModelKind::SchulmanSingle => {
                doc.allow_only(&["gamma_s", "truncation"])?;
                let gamma_s = required(doc.gamma_s, "gamma_s", model)?;
                Ok(Source::SchulmanSingle {
                    kernel: SchulmanKernel::new(gamma_s, doc.truncation)?,
                })
            }
            ModelKind::WhartonPair => {
                doc.allow_only(&["weights", "spin_relation", "gamma_s", "truncation"])?;
                let weights = required(doc.weights, "weights", model)?;
                let gamma_s = required(doc.gamma_s, "gamma_s", model)?;
                Ok(Source::WhartonPair(WhartonParams::new(
                    weights,
                    doc.spin_relation.unwrap_or_default(),
                    SchulmanKernel::new(gamma_s, doc.truncation)?,
                )?))
            }
            ModelKind::Mixture => {
                doc.allow_only(&["weight", "first", "second"])?;
                let weight = required(doc.weight, "weight", model)?;
                let first = Source::try_from(*required(doc.first, "first", model)?)?;
                let second = Source::try_from(*required(doc.second, "second", model)?)?;
                Source::mixture(weight, first, second)
            }
        }
    }
}

impl From<Source> for SourceDocument {
    fn from(source: Source) -> Self {
        match source {
            Source::QuantumCorrelated { correlation_sign } => Self {
                correlation_sign: Some(correlation_sign),
                ..Self::empty(ModelKind::QuantumCorrelated)
            },
            Source::ToyMi { correlation_sign } => Self {
                correlation_sign: Some(correlation_sign),
                ..Self::empty(ModelKind::ToyMi)
            },
            Source::SchulmanSingle { kernel } => Self {
                gamma_s: Some(kernel.gamma_s()),
                truncation: kernel.truncation(),
                ..Self::empty(ModelKind::SchulmanSingle)
            },
            Source::WhartonPair(p) => Self {
                weights: Some(p.given),
                spin_relation: Some(p.spin_relation),
                gamma_s: Some(p.kernel.gamma_s()),
                truncation: p.kernel.truncation(),
                ..Self::empty(ModelKind::WhartonPair)
            },
            Source::Mixture(mix) => {
                let MixtureParams {
                    weight,
                    first,
                    second,
                } = *mix;
                Self {
                    weight: Some(weight),
                    first: Some(Box::new(first.into())),
                    second: Some(Box::new(second.into())),
                    ..Self::empty(ModelKind::Mixture)
                }
            }
        }
    }
}
