//! Two-stage Monte Carlo sampling: λ from σ^{IJ}, then outcomes from p_λ^{IJ}.

use rand::RngCore;

use super::{HiddenDistribution, HiddenVariableModel, JointDistribution, Outcome, OutcomePair, Setting};
use crate::error::Result;

/// Which party's outcome is drawn first given λ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeOrder {
    AliceFirst,
    BobFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampledPair {
    /// Index of λ in [`PairSampler::hidden`].
    pub hidden: usize,
    pub outcome: OutcomePair,
}

/// Precomputed sampling tables for one `(I, J)` setting pair.
///
/// The flat table holds the cumulative weight of every `(λ, a, b)` cell so
/// a single uniform draw produces both stages; [`sample_ordered`] draws
/// the stages explicitly instead.
///
/// [`sample_ordered`]: PairSampler::sample_ordered
#[derive(Debug, Clone)]
pub struct PairSampler {
    hidden: HiddenDistribution,
    hidden_cdf: Vec<f64>,
    conditionals: Vec<JointDistribution>,
    cells: Vec<(usize, OutcomePair)>,
    cell_cdf: Vec<f64>,
}

/// Uniform in `[0, 1)` with 53 random bits.
fn unit(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn pick(cdf: &[f64], u: f64) -> usize {
    // First slot whose cumulative weight exceeds u; the last slot absorbs
    // rounding in the total.
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
}

fn bernoulli(rng: &mut impl RngCore, p_plus: f64) -> Outcome {
    if unit(rng) < p_plus {
        Outcome::Plus
    } else {
        Outcome::Minus
    }
}

impl PairSampler {
    pub fn new<M: HiddenVariableModel + ?Sized>(model: &M, alice: &Setting, bob: &Setting) -> Result<Self> {
        let sigma = model.hidden_distribution(alice, bob)?;
        let support: Vec<_> = sigma.support().cloned().collect();
        let hidden = HiddenDistribution::unchecked(support);

        let mut hidden_cdf = Vec::with_capacity(hidden.atoms().len());
        let mut conditionals = Vec::with_capacity(hidden.atoms().len());
        let mut cells = Vec::new();
        let mut cell_cdf = Vec::new();
        let (mut acc_hidden, mut acc_cell) = (0.0, 0.0);
        for (k, atom) in hidden.atoms().iter().enumerate() {
            acc_hidden += atom.weight;
            hidden_cdf.push(acc_hidden);
            let p = model.outcome_distribution(&atom.state, alice, bob)?;
            for pair in OutcomePair::ALL {
                let w = atom.weight * p.prob(pair);
                if w > 0.0 {
                    acc_cell += w;
                    cells.push((k, pair));
                    cell_cdf.push(acc_cell);
                }
            }
            conditionals.push(p);
        }
        Ok(Self {
            hidden,
            hidden_cdf,
            conditionals,
            cells,
            cell_cdf,
        })
    }

    /// Support of σ^{IJ} in sampling order.
    pub fn hidden(&self) -> &HiddenDistribution {
        &self.hidden
    }

    pub fn sample(&self, rng: &mut impl RngCore) -> SampledPair {
        let (hidden, outcome) = self.cells[pick(&self.cell_cdf, unit(rng))];
        SampledPair { hidden, outcome }
    }

    /// Draws λ, then one party's outcome from its marginal given λ, then
    /// the other's conditional on the first.
    pub fn sample_ordered(&self, order: OutcomeOrder, rng: &mut impl RngCore) -> SampledPair {
        let hidden = pick(&self.hidden_cdf, unit(rng));
        let p = &self.conditionals[hidden];
        let [pp, pm, mp, _] = p.probabilities();
        let outcome = match order {
            OutcomeOrder::AliceFirst => {
                let p_a = pp + pm;
                let a = bernoulli(rng, p_a);
                let p_b = match a {
                    Outcome::Plus => pp / p_a,
                    Outcome::Minus => mp / (1.0 - p_a),
                };
                OutcomePair { a, b: bernoulli(rng, p_b) }
            }
            OutcomeOrder::BobFirst => {
                let p_b = pp + mp;
                let b = bernoulli(rng, p_b);
                let p_a = match b {
                    Outcome::Plus => pp / p_b,
                    Outcome::Minus => pm / (1.0 - p_b),
                };
                OutcomePair { a: bernoulli(rng, p_a), b }
            }
        };
        SampledPair { hidden, outcome }
    }

    /// Outcome counts in `ALL` order over `n` draws.
    pub fn counts(&self, n: u64, rng: &mut impl RngCore) -> [u64; 4] {
        let mut counts = [0u64; 4];
        for _ in 0..n {
            counts[self.sample(rng).outcome.index()] += 1;
        }
        counts
    }
}

/// One draw of `(λ, A, B)`; build a [`PairSampler`] for repeated draws.
pub fn sample_pair<M: HiddenVariableModel + ?Sized>(
    model: &M,
    alice: &Setting,
    bob: &Setting,
    rng: &mut impl RngCore,
) -> Result<SampledPair> {
    Ok(PairSampler::new(model, alice, bob)?.sample(rng))
}
