//! Equiprobability and signalling bounds, the sign-split sub-distribution,
//! and certification of the 16-pair layout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    chain_stats, chsh, ChainStats, ChshEstimate, ChshSettings, CorrelatorEstimate, Mode, SignPattern,
};
use crate::geometry::{Side, Theorem2PrimeLayout};
use crate::models::{
    outcome_independence, HiddenAtom, HiddenDistribution, HiddenVariableModel, PredicateReport,
    Setting,
};

/// Largest `|⟨A⟩|` compatible with parameter and measurement independence
/// on an `n`-chain whose links are correlated up to slack `δ`: `2nδ`.
pub fn thm0prime_bound(n: usize, delta: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::domain("chain slack delta (must be >= 0)", delta));
    }
    Ok(2.0 * n as f64 * delta)
}

/// Slack of maximally entangled correlations on an `n`-chain over total
/// angle `θ`: `sin²(θ/(4n))`.
pub fn quantum_chain_slack(n: usize, theta: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    Ok((theta / (4 * n) as f64).sin().powi(2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Signalling,
    NoViolation,
    Inconclusive,
}

/// Compares a marginal against the chain bound `2n(δ̂ ± margin)`, with the
/// margin the largest link half-width.
pub fn thm1prime_detect(stats: &ChainStats, marginal: &CorrelatorEstimate, n: usize) -> Result<Verdict> {
    stats.uniform_orientation()?;
    if n != stats.n || stats.links.len() != 2 * n {
        return Err(Error::InvalidParameter(format!(
            "chain statistics are for n = {} with {} links, not n = {n}",
            stats.n,
            stats.links.len()
        )));
    }
    let margin = stats.max_half_width;
    let scale = 2.0 * n as f64;
    let size = marginal.value.abs();
    if size - marginal.half_width > scale * (stats.delta_hat + margin) {
        Ok(Verdict::Signalling)
    } else if size + marginal.half_width <= scale * (stats.delta_hat - margin) {
        Ok(Verdict::NoViolation)
    } else {
        Ok(Verdict::Inconclusive)
    }
}

/// Minimum `|⟨AB⟩|` in a sub-distribution of weight `α` whose parent has
/// `|⟨AB⟩| ≥ 1 − 2γ`.
pub fn lemma2_bound(gamma: f64, alpha: f64) -> Result<f64> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::domain("gamma (must be >= 0)", gamma));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::domain("sub-distribution weight (must lie in (0, 1])", alpha));
    }
    Ok(1.0 - 2.0 * gamma / alpha)
}

/// `σ = weight·sub + (1 − weight)·complement` at one setting pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubDistribution {
    pub weight: f64,
    pub sub: HiddenDistribution,
    /// Empty when the sub-distribution is the whole parent.
    pub complement: HiddenDistribution,
    pub parent: HiddenDistribution,
}

impl SubDistribution {
    /// Splits `parent` into the atoms selected by `keep` and the rest.
    pub fn split(parent: &HiddenDistribution, mut keep: impl FnMut(&HiddenAtom) -> bool) -> Result<Self> {
        let (inside, outside): (Vec<&HiddenAtom>, Vec<&HiddenAtom>) = parent.support().partition(|a| keep(a));
        let weight: f64 = inside.iter().map(|a| a.weight).sum();
        if weight <= 0.0 {
            return Err(Error::InvalidWeights("sub-distribution has zero weight".into()));
        }
        let renorm = |atoms: Vec<&HiddenAtom>, w: f64| {
            HiddenDistribution::unchecked(
                atoms
                    .into_iter()
                    .map(|a| HiddenAtom {
                        state: a.state.clone(),
                        weight: a.weight / w,
                    })
                    .collect(),
            )
        };
        let complement_weight = 1.0 - weight;
        let complement = if outside.is_empty() {
            HiddenDistribution::empty()
        } else {
            renorm(outside, complement_weight)
        };
        Ok(Self {
            weight,
            sub: renorm(inside, weight),
            complement,
            parent: parent.clone(),
        })
    }

    /// Largest pointwise deviation of `weight·sub + (1−weight)·complement`
    /// from the parent.
    pub fn decomposition_error(&self) -> f64 {
        self.parent
            .support()
            .map(|atom| {
                let rebuilt = self.weight * self.sub.weight_of(&atom.state)
                    + (1.0 - self.weight) * self.complement.weight_of(&atom.state);
                (rebuilt - self.parent.weight_of(&atom.state)).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `Σ_λ sub(λ) f(λ)`.
    pub fn average<M: HiddenVariableModel + ?Sized>(
        &self,
        model: &M,
        alice: &Setting,
        bob: &Setting,
        f: impl Fn(&crate::models::JointDistribution) -> f64,
    ) -> Result<f64> {
        let mut acc = 0.0;
        for atom in self.sub.support() {
            acc += atom.weight * f(&model.outcome_distribution(&atom.state, alice, bob)?);
        }
        Ok(acc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma1Witness {
    /// Index of the CHSH term whose setting pair carries the split.
    pub term: usize,
    pub alice_angle: f64,
    pub bob_angle: f64,
    pub side: Side,
    pub split: SubDistribution,
    /// `⟨A⟩` (or `⟨B⟩`) under the sub-distribution.
    pub sub_marginal: f64,
    pub sub_correlation: f64,
}

fn side_mean(p: &crate::models::JointDistribution, side: Side) -> f64 {
    let (ma, mb) = p.marginals();
    match side {
        Side::A => ma,
        Side::B => mb,
    }
}

/// The heavier half of the split of `σ^{IJ}` by the sign of `⟨X⟩_λ`
/// (non-negative half on ties).
pub fn sign_split<M: HiddenVariableModel + ?Sized>(
    model: &M,
    alice: &Setting,
    bob: &Setting,
    side: Side,
) -> Result<SubDistribution> {
    let sigma = model.hidden_distribution(alice, bob)?;
    let mut non_negative = Vec::new();
    let mut w_non_negative = 0.0;
    for atom in sigma.support() {
        let m = side_mean(&model.outcome_distribution(&atom.state, alice, bob)?, side);
        let positive = m >= 0.0;
        non_negative.push(positive);
        if positive {
            w_non_negative += atom.weight;
        }
    }
    let keep_non_negative = w_non_negative >= 0.5;
    let mut flags = non_negative.into_iter();
    SubDistribution::split(&sigma, |_| flags.next() == Some(keep_non_negative))
}

/// Searches the four CHSH setting pairs for a sign split whose marginal on
/// `side` exceeds `epsilon` in size, then tries the other side.
///
/// Returns `Ok(None)` only when `|CHSH| ≤ 4ε`; a failed search above that
/// threshold contradicts the lemma and is reported as an error. Models
/// violating outcome independence on these settings are refused.
pub fn lemma1_split<M: HiddenVariableModel + ?Sized>(
    model: &M,
    settings: &ChshSettings,
    pattern: SignPattern,
    side: Side,
    epsilon: f64,
) -> Result<Option<Lemma1Witness>> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::domain("epsilon (must be >= 0)", epsilon));
    }
    let pairs: Vec<(Setting, Setting)> = settings
        .term_pairs()
        .iter()
        .map(|(i, j)| ((*i).clone(), (*j).clone()))
        .collect();
    let oi = outcome_independence(model, &pairs)?;
    if !oi.holds {
        return Err(Error::OutcomeIndependenceViolated {
            pair: oi.worst.unwrap_or_default(),
            deviation: oi.max_deviation,
        });
    }
    let s_value = chsh(model, settings, &Mode::Exact, pattern)?.s_value;

    for side in [side, side.other()] {
        for (term, (i, j)) in pairs.iter().enumerate() {
            let split = sign_split(model, i, j, side)?;
            let sub_marginal = split.average(model, i, j, |p| side_mean(p, side))?;
            if sub_marginal.abs() > epsilon {
                let sub_correlation = split.average(model, i, j, |p| p.correlator())?;
                return Ok(Some(Lemma1Witness {
                    term,
                    alice_angle: i.direction.angle(),
                    bob_angle: j.direction.angle(),
                    side,
                    split,
                    sub_marginal,
                    sub_correlation,
                }));
            }
        }
    }
    if s_value.abs() > 4.0 * epsilon {
        Err(Error::Lemma1Contradiction {
            epsilon,
            chsh: s_value,
        })
    } else {
        Ok(None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificationVerdict {
    SignallingCertified,
    PremisesNotMet,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificationReport {
    pub model: String,
    pub mode: Mode,
    /// Confidence used for each of the 16 pair estimates.
    pub pair_confidence: Option<f64>,
    pub n: usize,
    pub chain: ChainStats,
    pub chsh: ChshEstimate,
    pub delta_hat: f64,
    pub chain_margin: f64,
    pub chsh_margin: f64,
    /// `δ̂` plus the largest link half-width.
    pub gamma_hat: f64,
    /// `(|CHSH| − margin)/4`.
    pub epsilon_hat: f64,
    /// `4nγ̂`.
    pub required_epsilon: f64,
    /// `ε̂/(4nγ̂)`; `None` when `γ̂ = 0`.
    pub ratio: Option<f64>,
    pub condition_met: bool,
    pub outcome_independence: PredicateReport,
    pub witness: Option<Lemma1Witness>,
    pub sub_ensembles_preparable: bool,
    pub verdict: CertificationVerdict,
    pub notes: Vec<String>,
}

/// Certifies signalling from the 12 chain links and 4 CHSH pairs of the
/// layout. In Monte Carlo mode every pair is estimated at the Bonferroni
/// level `1 − (1−c)/16` so the verdict holds at the declared confidence.
pub fn thm2_certify<M: HiddenVariableModel + ?Sized>(
    model: &M,
    layout: &Theorem2PrimeLayout,
    mode: &Mode,
) -> Result<CertificationReport> {
    mode.validate()?;
    let pair_mode = mode.bonferroni(16);
    let n = layout.chain().n();
    let mut notes = Vec::new();

    let chain = chain_stats(model, layout.chain(), &pair_mode)?;
    chain.uniform_orientation()?;
    let dirs = layout.chsh_directions();
    let settings = ChshSettings::from_directions(dirs.alice, dirs.bob);
    let pattern = SignPattern::new(dirs.minus_term)?;
    let chsh_est = chsh(model, &settings, &pair_mode, pattern)?;

    let gamma_hat = chain.delta_hat + chain.max_half_width;
    let epsilon_hat = (chsh_est.s_value.abs() - chsh_est.half_width) / 4.0;
    let required_epsilon = 4.0 * n as f64 * gamma_hat;
    let condition_met = epsilon_hat >= required_epsilon;
    let ratio = (gamma_hat > 0.0).then(|| epsilon_hat / required_epsilon);

    let pairs: Vec<(Setting, Setting)> = layout
        .measured_pairs()
        .into_iter()
        .map(|(a, b)| (Setting::new(a), Setting::new(b)))
        .collect();
    let oi = outcome_independence(model, &pairs)?;
    let witness = if !oi.holds {
        notes.push(format!(
            "outcome independence fails at the hidden level (max deviation {:e}); no sub-distribution witness attached",
            oi.max_deviation
        ));
        None
    } else if epsilon_hat <= 0.0 {
        notes.push("epsilon_hat is not positive; no witness searched".into());
        None
    } else {
        let w = lemma1_split(model, &settings, pattern, Side::A, epsilon_hat)?;
        if w.is_none() {
            notes.push("no sign split exceeds epsilon_hat".into());
        }
        w
    };
    if !condition_met {
        notes.push(format!(
            "epsilon_hat = {epsilon_hat} is below 4 n gamma_hat = {required_epsilon}"
        ));
    }
    let preparable = model.sub_ensembles_preparable();
    if witness.is_some() && !preparable {
        notes.push("the witness is a mathematical sub-distribution; the model does not declare it preparable".into());
    }
    let verdict = if condition_met && witness.is_some() {
        CertificationVerdict::SignallingCertified
    } else {
        CertificationVerdict::PremisesNotMet
    };
    Ok(CertificationReport {
        model: model.name(),
        mode: *mode,
        pair_confidence: pair_mode.confidence(),
        n,
        delta_hat: chain.delta_hat,
        chain_margin: chain.max_half_width,
        chsh_margin: chsh_est.half_width,
        chain,
        chsh: chsh_est,
        gamma_hat,
        epsilon_hat,
        required_epsilon,
        ratio,
        condition_met,
        outcome_independence: oi,
        witness,
        sub_ensembles_preparable: preparable,
        verdict,
        notes,
    })
}
