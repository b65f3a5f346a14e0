//! Bit transmission by Alice's setting choice, decoded from Bob's marginal.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::hoeffding_half_width;
use crate::geometry::Direction;
use crate::models::{HiddenVariableModel, PairSampler, Setting, Source};
use crate::rng::RngStream;

/// Expected marginals closer than this carry no channel.
pub const MIN_SEPARATION: f64 = 1e-12;

/// `⟨B⟩` with Alice at `alice` and Bob at `bob`.
pub fn expected_bob_marginal<M: HiddenVariableModel + ?Sized>(
    model: &M,
    alice: Direction,
    bob: Direction,
) -> Result<f64> {
    Ok(model
        .exact_joint(&Setting::new(alice), &Setting::new(bob))?
        .marginals()
        .1)
}

/// A string of bits, written as `"0110…"`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn random(len: usize, rng: &mut impl RngCore) -> Self {
        Self((0..len).map(|_| rng.gen()).collect())
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn flipped(&self) -> Self {
        Self(self.0.iter().map(|b| !b).collect())
    }

    pub fn errors_against(&self, other: &BitString) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidParameter(format!(
                    "bit strings contain only 0 and 1, found {other:?}"
                ))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

impl TryFrom<String> for BitString {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<BitString> for String {
    fn from(b: BitString) -> String {
        b.to_string()
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            f.write_str(if *b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub source: Source,
    /// Alice's direction for bit 0 and for bit 1.
    pub alice_settings: [Direction; 2],
    pub bob_setting: Direction,
    pub pairs_per_bit: u64,
    /// Midpoint of the expected marginals when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decode_threshold: Option<f64>,
    pub confidence: f64,
}

/// The resolved channel: expected Bob means and the decision threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub expected: [f64; 2],
    pub separation: f64,
    pub threshold: f64,
}

impl Channel {
    /// Bit 1 iff Bob's mean lies beyond the threshold on bit 1's side. A
    /// mean exactly on the threshold decodes as 0.
    pub fn decode(&self, mean: f64) -> bool {
        (mean - self.threshold) * (self.expected[1] - self.expected[0]).signum() > 0.0
    }

    /// Per-bit error bound `exp(−NΔ²/8)` for the midpoint threshold.
    pub fn error_bound(&self, pairs_per_bit: u64) -> f64 {
        (-(pairs_per_bit as f64) * self.separation * self.separation / 8.0).exp()
    }
}

impl ProtocolConfig {
    /// Orthogonal bit settings `0` and `π/2` with Bob at `0`.
    pub fn orthogonal(source: Source, pairs_per_bit: u64) -> Result<Self> {
        Ok(Self {
            source,
            alice_settings: [Direction::new(0.0)?, Direction::new(std::f64::consts::FRAC_PI_2)?],
            bob_setting: Direction::new(0.0)?,
            pairs_per_bit,
            decode_threshold: None,
            confidence: 0.99,
        })
    }

    pub fn with_pairs_per_bit(&self, pairs_per_bit: u64) -> Self {
        Self {
            pairs_per_bit,
            ..self.clone()
        }
    }

    /// Bit-0 and bit-1 settings exchanged.
    pub fn swapped(&self) -> Self {
        let [a0, a1] = self.alice_settings;
        Self {
            alice_settings: [a1, a0],
            ..self.clone()
        }
    }

    /// Checks the configuration and resolves the channel.
    pub fn channel(&self) -> Result<Channel> {
        if self.pairs_per_bit == 0 {
            return Err(Error::InvalidParameter("pairs_per_bit must be at least 1".into()));
        }
        hoeffding_half_width(1, self.confidence)?;
        let [a0, a1] = self.alice_settings;
        let expected = [
            expected_bob_marginal(&self.source, a0, self.bob_setting)?,
            expected_bob_marginal(&self.source, a1, self.bob_setting)?,
        ];
        let separation = (expected[1] - expected[0]).abs();
        if separation <= MIN_SEPARATION {
            return Err(Error::NoChannel { separation });
        }
        let threshold = self
            .decode_threshold
            .unwrap_or((expected[0] + expected[1]) / 2.0);
        let (lo, hi) = (expected[0].min(expected[1]), expected[0].max(expected[1]));
        if !(threshold > lo && threshold < hi) {
            return Err(Error::InvalidParameter(format!(
                "decode_threshold {threshold} must lie strictly between {lo} and {hi}"
            )));
        }
        Ok(Channel {
            expected,
            separation,
            threshold,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalReport {
    pub sent_bits: BitString,
    pub decoded_bits: BitString,
    pub errors: usize,
    pub ber: f64,
    pub channel: Channel,
    pub pairs_per_bit: u64,
    /// `exp(−NΔ²/8)`.
    pub hoeffding_ber_bound: f64,
    /// Bob's empirical mean for each bit.
    pub bob_means: Vec<f64>,
    /// Hoeffding half-width of each mean at the configured confidence.
    pub bob_half_width: f64,
    pub confidence: f64,
}

/// Sends `bits`; bit `i` is simulated on the stream `signal/bit/{i}` so a
/// bit's samples depend only on the seed, its index and its settings.
pub fn run_protocol(config: &ProtocolConfig, bits: &BitString, seed: u64) -> Result<SignalReport> {
    let channel = config.channel()?;
    let bob = Setting::new(config.bob_setting);
    let samplers = [
        PairSampler::new(&config.source, &Setting::new(config.alice_settings[0]), &bob)?,
        PairSampler::new(&config.source, &Setting::new(config.alice_settings[1]), &bob)?,
    ];
    let n = config.pairs_per_bit;
    let mut bob_means = Vec::with_capacity(bits.len());
    let mut decoded = Vec::with_capacity(bits.len());
    for (i, &bit) in bits.bits().iter().enumerate() {
        let mut rng = RngStream::new(seed, format!("signal/bit/{i}"));
        let sampler = &samplers[bit as usize];
        let mut sum = 0i64;
        for _ in 0..n {
            sum += sampler.sample(&mut rng).outcome.b.value() as i64;
        }
        let mean = sum as f64 / n as f64;
        bob_means.push(mean);
        decoded.push(channel.decode(mean));
    }
    let decoded_bits = BitString::new(decoded);
    let errors = bits.errors_against(&decoded_bits);
    Ok(SignalReport {
        ber: if bits.is_empty() { 0.0 } else { errors as f64 / bits.len() as f64 },
        errors,
        sent_bits: bits.clone(),
        decoded_bits,
        channel,
        pairs_per_bit: n,
        hoeffding_ber_bound: channel.error_bound(n),
        bob_means,
        bob_half_width: hoeffding_half_width(n, config.confidence)?,
        confidence: config.confidence,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "N")]
    pub n: u64,
    pub trial: u32,
    pub ber_empirical: f64,
    pub ber_bound: f64,
}

/// Runs `trials` independent transmissions of `bits_per_trial` random bits
/// for each `N`. Trial `t` at `N` draws its seed and bits from streams named
/// after `(N, t)` only, so extending `trials` keeps earlier rows.
pub fn channel_sweep(
    template: &ProtocolConfig,
    n_values: &[u64],
    trials: u32,
    bits_per_trial: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    template.channel()?;
    let mut rows = Vec::with_capacity(n_values.len() * trials as usize);
    for &n in n_values {
        let config = template.with_pairs_per_bit(n);
        for trial in 0..trials {
            let mut stream = RngStream::new(seed, format!("sweep/N={n}/trial={trial}"));
            let bits = BitString::random(bits_per_trial, &mut stream.substream("bits"));
            let trial_seed = stream.next_u64();
            let report = run_protocol(&config, &bits, trial_seed)?;
            rows.push(SweepRow {
                n,
                trial,
                ber_empirical: report.ber,
                ber_bound: report.hoeffding_ber_bound,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;
    use crate::models::{CorrelationSign, OutcomeOrder, SpinRelation, WhartonTag};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn dir(a: f64) -> Direction {
        Direction::new(a).unwrap()
    }

    fn homogeneous() -> Source {
        Source::wharton_homogeneous(WhartonTag::Aplus, 0.0).unwrap()
    }

    #[test]
    fn expected_marginal_examples() {
        let h = homogeneous();
        assert_eq!(expected_bob_marginal(&h, dir(0.0), dir(0.0)).unwrap(), 1.0);
        assert!(expected_bob_marginal(&h, dir(PI / 2.0), dir(0.0)).unwrap().abs() < 1e-15);
        let born = Source::wharton([0.2, 0.3, 0.2, 0.3], SpinRelation::Parallel, 0.0).unwrap();
        assert!(expected_bob_marginal(&born, dir(1.0), dir(0.2)).unwrap().abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn no_signalling_negative_control(x in 0.0f64..0.5, a1 in 0.0f64..TAU, a2 in 0.0f64..TAU, b in 0.0f64..TAU, anti in any::<bool>()) {
            let rel = if anti { SpinRelation::Antiparallel } else { SpinRelation::Parallel };
            let born = Source::wharton([x, 0.5 - x, x, 0.5 - x], rel, 0.0).unwrap();
            let q = Source::quantum(CorrelationSign::Correlated);
            for m in [&born, &q] {
                let m1 = expected_bob_marginal(m, dir(a1), dir(b)).unwrap();
                let m2 = expected_bob_marginal(m, dir(a2), dir(b)).unwrap();
                prop_assert!((m1 - m2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn channel_less_sources_rejected() {
        let q = ProtocolConfig::orthogonal(Source::quantum(CorrelationSign::Correlated), 200).unwrap();
        assert!(matches!(q.channel(), Err(Error::NoChannel { .. })));
        let born = Source::wharton([0.25; 4], SpinRelation::Parallel, 0.0).unwrap();
        let cfg = ProtocolConfig::orthogonal(born, 200).unwrap();
        assert!(matches!(run_protocol(&cfg, &"01".parse().unwrap(), 0), Err(Error::NoChannel { .. })));
        assert!(matches!(channel_sweep(&cfg, &[10], 1, 4, 0), Err(Error::NoChannel { .. })));
    }

    #[test]
    fn config_validation() {
        let cfg = ProtocolConfig::orthogonal(homogeneous(), 0).unwrap();
        assert!(cfg.channel().is_err());
        let mut cfg = ProtocolConfig::orthogonal(homogeneous(), 10).unwrap();
        cfg.decode_threshold = Some(1.0);
        assert!(cfg.channel().is_err());
        cfg.decode_threshold = Some(0.25);
        assert_eq!(cfg.channel().unwrap().threshold, 0.25);
        cfg.confidence = 1.0;
        assert!(cfg.channel().is_err());
    }

    #[test]
    fn homogeneous_channel_is_error_free() {
        let cfg = ProtocolConfig::orthogonal(homogeneous(), 200).unwrap();
        let bits = BitString::random(64, &mut RngStream::new(1, "bits"));
        let report = run_protocol(&cfg, &bits, 7).unwrap();
        assert_eq!(report.errors, 0);
        assert_eq!(report.decoded_bits, bits);
        assert!((report.channel.separation - 1.0).abs() < 1e-15);
        assert!((report.hoeffding_ber_bound - (-25.0f64).exp()).abs() < 1e-20);
        assert!(report.hoeffding_ber_bound < 1.4e-11);
        assert_eq!(report.bob_means.len(), 64);
        assert_eq!(run_protocol(&cfg, &bits, 7).unwrap(), report);
    }

    #[test]
    fn single_pair_bound_is_vacuous() {
        let cfg = ProtocolConfig::orthogonal(homogeneous(), 1).unwrap();
        let report = run_protocol(&cfg, &"0101".parse().unwrap(), 3).unwrap();
        assert!((report.hoeffding_ber_bound - (-0.125f64).exp()).abs() < 1e-15);
        assert!((report.hoeffding_ber_bound - 0.88).abs() < 0.01);
    }

    #[test]
    fn swapping_settings_flips_decoding() {
        // Odd N keeps Bob's mean off the midpoint threshold.
        let cfg = ProtocolConfig::orthogonal(homogeneous(), 3).unwrap();
        let bits = BitString::random(500, &mut RngStream::new(2, "bits"));
        let swapped = run_protocol(&cfg.swapped(), &bits, 11).unwrap();
        let original = run_protocol(&cfg, &bits.flipped(), 11).unwrap();
        assert_eq!(swapped.decoded_bits, original.decoded_bits.flipped());
        assert_eq!(swapped.bob_means, original.bob_means);
        assert!(original.errors > 0);
    }

    #[test]
    fn time_order_independence() {
        let model = Source::wharton([0.7, 0.1, 0.1, 0.1], SpinRelation::Parallel, 0.2).unwrap();
        let (i, j) = (Setting::new(dir(0.0)), Setting::new(dir(1.2)));
        let sampler = PairSampler::new(&model, &i, &j).unwrap();
        let n = 500_000;
        let freq = |order| {
            let mut rng = RngStream::new(4, "order");
            let mut c = [0u64; 4];
            for _ in 0..n {
                c[sampler.sample_ordered(order, &mut rng).outcome.index()] += 1;
            }
            c.map(|x| x as f64 / n as f64)
        };
        let (a, b) = (freq(OutcomeOrder::AliceFirst), freq(OutcomeOrder::BobFirst));
        let exact = model.exact_joint(&i, &j).unwrap().probabilities();
        for k in 0..4 {
            let band = 4.0 * (exact[k] * (1.0 - exact[k]) / n as f64).sqrt() + 1e-9;
            assert!((a[k] - exact[k]).abs() < band && (b[k] - exact[k]).abs() < band);
        }
    }

    #[test]
    fn sweep_is_deterministic_and_extensible() {
        let cfg = ProtocolConfig::orthogonal(homogeneous(), 1).unwrap();
        let short = channel_sweep(&cfg, &[10, 50, 200], 3, 32, 5).unwrap();
        let long = channel_sweep(&cfg, &[10, 50, 200], 6, 32, 5).unwrap();
        for (k, row) in short.iter().enumerate() {
            let n_index = k / 3;
            assert_eq!(*row, long[n_index * 6 + row.trial as usize]);
        }
        let zero_at_200 = long.iter().filter(|r| r.n == 200 && r.ber_empirical == 0.0).count();
        assert_eq!(zero_at_200, 6);
        let mean_ber = |n| {
            let rows: Vec<_> = long.iter().filter(|r| r.n == n).collect();
            rows.iter().map(|r| r.ber_empirical).sum::<f64>() / rows.len() as f64
        };
        assert!(mean_ber(10) >= mean_ber(200));
    }

    #[test]
    fn bit_string_parsing() {
        let b: BitString = "0110".parse().unwrap();
        assert_eq!(b.bits(), &[false, true, true, false]);
        assert_eq!(b.to_string(), "0110");
        assert!("01a".parse::<BitString>().is_err());
        assert_eq!(serde_json::to_string(&b).unwrap(), "\"0110\"");
        assert!(serde_json::from_str::<BitString>("\"012\"").is_err());
        assert!("".parse::<BitString>().unwrap().is_empty());
    }
}
