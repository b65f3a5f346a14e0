//! Exact and Monte Carlo correlators, CHSH sums and chain statistics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{angle_between, ChainSpec, Direction};
use crate::models::{HiddenVariableModel, JointDistribution, PairSampler, Setting};
use crate::rng::RngStream;

/// A ±1-valued mean (correlator or marginal) with its confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorEstimate {
    pub value: f64,
    /// 0 for exact values.
    pub n_samples: u64,
    pub half_width: f64,
    /// `None` for exact values.
    pub confidence: Option<f64>,
}

impl CorrelatorEstimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            n_samples: 0,
            half_width: 0.0,
            confidence: None,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.n_samples == 0
    }

    pub fn lower(&self) -> f64 {
        self.value - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.value + self.half_width
    }
}

fn check_confidence(confidence: f64) -> Result<()> {
    if confidence > 0.0 && confidence < 1.0 {
        Ok(())
    } else {
        Err(Error::domain("confidence (must lie in (0, 1))", confidence))
    }
}

/// Two-sided Hoeffding half-width for the mean of `n` independent ±1
/// variables: `2 sqrt(ln(2/(1−c)) / (2n))`.
pub fn hoeffding_half_width(n: u64, confidence: f64) -> Result<f64> {
    check_confidence(confidence)?;
    if n == 0 {
        return Err(Error::InvalidParameter("sample count must be at least 1".into()));
    }
    Ok(2.0 * ((2.0 / (1.0 - confidence)).ln() / (2.0 * n as f64)).sqrt())
}

/// How a quantity is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mode {
    Exact,
    #[serde(rename = "mc")]
    MonteCarlo {
        n_samples: u64,
        confidence: f64,
        seed: u64,
    },
}

impl Mode {
    pub fn mc(n_samples: u64, confidence: f64, seed: u64) -> Result<Self> {
        let mode = Mode::MonteCarlo {
            n_samples,
            confidence,
            seed,
        };
        mode.validate()?;
        Ok(mode)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Mode::Exact => Ok(()),
            Mode::MonteCarlo {
                n_samples,
                confidence,
                ..
            } => {
                check_confidence(confidence)?;
                if n_samples == 0 {
                    return Err(Error::InvalidParameter("n_samples must be at least 1".into()));
                }
                Ok(())
            }
        }
    }

    /// Same mode with the confidence raised so that `k` simultaneous
    /// statements hold jointly at the original level.
    pub fn bonferroni(&self, k: u32) -> Self {
        match *self {
            Mode::Exact => Mode::Exact,
            Mode::MonteCarlo {
                n_samples,
                confidence,
                seed,
            } => Mode::MonteCarlo {
                n_samples,
                confidence: 1.0 - (1.0 - confidence) / k as f64,
                seed,
            },
        }
    }

    pub fn confidence(&self) -> Option<f64> {
        match self {
            Mode::Exact => None,
            Mode::MonteCarlo { confidence, .. } => Some(*confidence),
        }
    }
}

/// Joint distribution at one setting pair with its derived means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointEstimate {
    pub joint: JointDistribution,
    pub correlator: CorrelatorEstimate,
    pub marginal_a: CorrelatorEstimate,
    pub marginal_b: CorrelatorEstimate,
}

impl JointEstimate {
    fn from_exact(joint: JointDistribution) -> Self {
        let (ma, mb) = joint.marginals();
        Self {
            correlator: CorrelatorEstimate::exact(joint.correlator()),
            marginal_a: CorrelatorEstimate::exact(ma),
            marginal_b: CorrelatorEstimate::exact(mb),
            joint,
        }
    }
}

/// Empirical joint over `n_samples` draws from `rng`.
pub fn mc_joint<M: HiddenVariableModel + ?Sized>(
    model: &M,
    alice: &Setting,
    bob: &Setting,
    n_samples: u64,
    confidence: f64,
    rng: &mut RngStream,
) -> Result<JointEstimate> {
    let half_width = hoeffding_half_width(n_samples, confidence)?;
    let sampler = PairSampler::new(model, alice, bob)?;
    let joint = JointDistribution::from_counts(sampler.counts(n_samples, rng))?;
    let (ma, mb) = joint.marginals();
    let est = |value| CorrelatorEstimate {
        value,
        n_samples,
        half_width,
        confidence: Some(confidence),
    };
    Ok(JointEstimate {
        correlator: est(joint.correlator()),
        marginal_a: est(ma),
        marginal_b: est(mb),
        joint,
    })
}

/// Evaluates one setting pair; Monte Carlo draws come from the stream
/// `stream` under the mode's seed.
pub fn estimate_pair<M: HiddenVariableModel + ?Sized>(
    model: &M,
    alice: &Setting,
    bob: &Setting,
    mode: &Mode,
    stream: &str,
) -> Result<JointEstimate> {
    mode.validate()?;
    match *mode {
        Mode::Exact => Ok(JointEstimate::from_exact(model.exact_joint(alice, bob)?)),
        Mode::MonteCarlo {
            n_samples,
            confidence,
            seed,
        } => mc_joint(model, alice, bob, n_samples, confidence, &mut RngStream::new(seed, stream)),
    }
}

/// Alice's `I, I'` and Bob's `J, J'`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshSettings {
    pub alice: [Setting; 2],
    pub bob: [Setting; 2],
}

impl ChshSettings {
    pub fn from_directions(alice: [Direction; 2], bob: [Direction; 2]) -> Self {
        Self {
            alice: alice.map(Setting::new),
            bob: bob.map(Setting::new),
        }
    }

    /// Setting pairs in term order `(I,J), (I',J), (I,J'), (I',J')`.
    pub fn term_pairs(&self) -> [(&Setting, &Setting); 4] {
        [
            (&self.alice[0], &self.bob[0]),
            (&self.alice[1], &self.bob[0]),
            (&self.alice[0], &self.bob[1]),
            (&self.alice[1], &self.bob[1]),
        ]
    }
}

/// Exactly one of the four CHSH terms carries a minus sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "[i8; 4]", into = "[i8; 4]")]
pub struct SignPattern {
    minus_term: usize,
}

impl SignPattern {
    pub fn new(minus_term: usize) -> Result<Self> {
        if minus_term > 3 {
            return Err(Error::InvalidParameter(format!(
                "minus term index must be 0..=3, got {minus_term}"
            )));
        }
        Ok(Self { minus_term })
    }

    pub fn from_signs(signs: [i8; 4]) -> Result<Self> {
        if let Some(bad) = signs.iter().find(|s| s.abs() != 1) {
            return Err(Error::InvalidParameter(format!("signs must be +1 or -1, got {bad}")));
        }
        let minus: Vec<usize> = (0..4).filter(|&k| signs[k] == -1).collect();
        match minus.as_slice() {
            [k] => Ok(Self { minus_term: *k }),
            _ => Err(Error::DuplicateSignPosition {
                minus_count: minus.len(),
            }),
        }
    }

    pub fn minus_term(&self) -> usize {
        self.minus_term
    }

    pub fn signs(&self) -> [i8; 4] {
        let mut s = [1; 4];
        s[self.minus_term] = -1;
        s
    }
}

impl Default for SignPattern {
    /// `⟨AB⟩ + ⟨A'B⟩ + ⟨AB'⟩ − ⟨A'B'⟩`.
    fn default() -> Self {
        Self { minus_term: 3 }
    }
}

impl TryFrom<[i8; 4]> for SignPattern {
    type Error = Error;

    fn try_from(signs: [i8; 4]) -> Result<Self> {
        Self::from_signs(signs)
    }
}

impl From<SignPattern> for [i8; 4] {
    fn from(p: SignPattern) -> Self {
        p.signs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshTerm {
    pub alice_angle: f64,
    pub bob_angle: f64,
    pub sign: i8,
    pub estimate: CorrelatorEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshEstimate {
    pub terms: Vec<ChshTerm>,
    pub s_value: f64,
    /// Sum of the term half-widths.
    pub half_width: f64,
    pub sign_pattern: SignPattern,
}

/// The CHSH combination, each term on its own setting pair (no
/// measurement independence assumed). Monte Carlo terms use the streams
/// `chsh/term/{k}`.
pub fn chsh<M: HiddenVariableModel + ?Sized>(
    model: &M,
    settings: &ChshSettings,
    mode: &Mode,
    pattern: SignPattern,
) -> Result<ChshEstimate> {
    let signs = pattern.signs();
    let terms = settings
        .term_pairs()
        .iter()
        .enumerate()
        .map(|(k, (i, j))| {
            let est = estimate_pair(model, i, j, mode, &format!("chsh/term/{k}"))?;
            Ok(ChshTerm {
                alice_angle: i.direction.angle(),
                bob_angle: j.direction.angle(),
                sign: signs[k],
                estimate: est.correlator,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ChshEstimate {
        s_value: terms.iter().map(|t| t.sign as f64 * t.estimate.value).sum(),
        half_width: terms.iter().map(|t| t.estimate.half_width).sum(),
        terms,
        sign_pattern: pattern,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Correlated,
    Anticorrelated,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Correlated => 1.0,
            Orientation::Anticorrelated => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkStat {
    pub link_index: usize,
    pub side_pair: String,
    /// Directions actually set on the apparatus.
    pub alice_angle: f64,
    pub bob_angle: f64,
    /// Angle between the link's two logical directions.
    pub angle_rad: f64,
    /// Correlation of the logical link (negated for the closing link).
    pub correlation: f64,
    pub half_width: f64,
    /// `(1 − s·correlation)/2` under the chain orientation `s`.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    pub n: usize,
    pub orientation: Orientation,
    pub links: Vec<LinkStat>,
    /// `(1 − s·mean correlation)/2`.
    pub delta_hat: f64,
    pub max_half_width: f64,
    pub confidence: Option<f64>,
}

impl ChainStats {
    /// Orientation, provided every link agrees with it in sign.
    pub fn uniform_orientation(&self) -> Result<Orientation> {
        let s = self.orientation.sign();
        if self.links.iter().any(|l| s * l.correlation < 0.0) {
            Err(Error::MixedOrientation)
        } else {
            Ok(self.orientation)
        }
    }

    pub fn link_correlations(&self) -> Vec<f64> {
        self.links.iter().map(|l| l.correlation).collect()
    }
}

/// Per-link correlations along a chain. Links are evaluated in parallel,
/// each Monte Carlo link on its own stream `chain/link/{i}`.
pub fn chain_stats<M: HiddenVariableModel + ?Sized>(
    model: &M,
    chain: &ChainSpec,
    mode: &Mode,
) -> Result<ChainStats> {
    mode.validate()?;
    let measured = chain
        .links()
        .par_iter()
        .map(|link| {
            let alice = Setting::new(link.measured_alice());
            let bob = Setting::new(link.bob().direction);
            let est = estimate_pair(model, &alice, &bob, mode, &format!("chain/link/{}", link.index))?;
            let sign = if link.negated { -1.0 } else { 1.0 };
            Ok((link, alice, bob, sign * est.correlator.value, est.correlator.half_width))
        })
        .collect::<Result<Vec<_>>>()?;

    let mean = measured.iter().map(|m| m.3).sum::<f64>() / measured.len() as f64;
    let orientation = if mean >= 0.0 {
        Orientation::Correlated
    } else {
        Orientation::Anticorrelated
    };
    let s = orientation.sign();
    let links: Vec<LinkStat> = measured
        .into_iter()
        .map(|(link, alice, bob, correlation, half_width)| LinkStat {
            link_index: link.index,
            side_pair: link.side_pair(),
            alice_angle: alice.direction.angle(),
            bob_angle: bob.direction.angle(),
            angle_rad: link.angle(),
            correlation,
            half_width,
            slack: ((1.0 - s * correlation) / 2.0).max(0.0),
        })
        .collect();
    Ok(ChainStats {
        n: chain.n(),
        orientation,
        delta_hat: ((1.0 - s * mean) / 2.0).max(0.0),
        max_half_width: links.iter().map(|l| l.half_width).fold(0.0, f64::max),
        links,
        confidence: mode.confidence(),
    })
}

/// Unsigned angle of a setting pair, for reports.
pub fn pair_angle(alice: &Setting, bob: &Setting) -> f64 {
    angle_between(alice.direction, bob.direction)
}
