//! Run configuration: parsing, validation and resolution of defaults.
//!
//! A resolved config has every default written out. Resolving it again is
//! a no-op, which is what lets a report's embedded config reproduce it.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::path::{Component, Path};

use bell_hv_core::estimators::Mode;
use bell_hv_core::geometry::LayoutDocument;
use bell_hv_core::signalling::BitString;
use bell_hv_core::Source;
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Chsh,
    Chain,
    Equiprob,
    Certify,
    Signal,
    SchulmanCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Chsh => "chsh",
            Command::Chain => "chain",
            Command::Equiprob => "equiprob",
            Command::Certify => "certify",
            Command::Signal => "signal",
            Command::SchulmanCheck => "schulman-check",
        }
    }

    fn has_csv(self) -> bool {
        matches!(
            self,
            Command::Chain | Command::Equiprob | Command::Certify | Command::SchulmanCheck | Command::Signal
        )
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Evaluation mode; the seed lives at the top level of the config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModeConfig {
    Exact,
    Mc { n_samples: u64, confidence: f64 },
}

impl ModeConfig {
    pub fn to_mode(self, seed: u64) -> Result<Mode, CliError> {
        let mode = match self {
            ModeConfig::Exact => Mode::Exact,
            ModeConfig::Mc {
                n_samples,
                confidence,
            } => Mode::MonteCarlo {
                n_samples,
                confidence,
                seed,
            },
        };
        mode.validate()?;
        Ok(mode)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_rad: Option<f64>,
    /// Explicit directions, in place of `n` and `start_rad`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<LayoutDocument>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChshConfig {
    /// `[I, I']`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alice_rad: Option<[f64; 2]>,
    /// `[J, J']`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bob_rad: Option<[f64; 2]>,
    /// Signs of the terms `(I,J), (I',J), (I,J'), (I',J')`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signs: Option<[i8; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub n_values: Vec<u64>,
    pub trials: u32,
    pub bits_per_trial: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alice_rad: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bob_rad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs_per_bit: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decode_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bits: Option<BitString>,
    /// Number of bits drawn from the run seed when `bits` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_bits: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchulmanConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_s: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<Source>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometryConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chsh: Option<ChshConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal: Option<SignalConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schulman: Option<SchulmanConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Validates the blocks `command` needs, rejects the ones it does not
    /// use, and fills in every default.
    pub fn resolve(&self, command: Command, seed_override: Option<u64>) -> Result<RunConfig, CliError> {
        if let Some(declared) = self.command {
            if declared != command {
                return Err(CliError::Config(format!(
                    "config is for command `{declared}` but `{command}` was requested"
                )));
            }
        }
        let uses = |block: &str| -> bool {
            match block {
                "source" | "mode" => command != Command::SchulmanCheck,
                "geometry" => matches!(
                    command,
                    Command::Chsh | Command::Chain | Command::Equiprob | Command::Certify
                ),
                "chsh" => command == Command::Chsh,
                "signal" => command == Command::Signal,
                "schulman" => command == Command::SchulmanCheck,
                _ => true,
            }
        };
        let present = [
            ("source", self.source.is_some()),
            ("mode", self.mode.is_some()),
            ("geometry", self.geometry.is_some()),
            ("chsh", self.chsh.is_some()),
            ("signal", self.signal.is_some()),
            ("schulman", self.schulman.is_some()),
        ];
        for (block, is_present) in present {
            if is_present && !uses(block) {
                return Err(CliError::Config(format!(
                    "block `{block}` does not apply to command `{command}`"
                )));
            }
        }
        if command == Command::Signal && self.mode.is_some() {
            return Err(CliError::Config(
                "command `signal` samples pairs_per_bit pairs; remove the `mode` block".into(),
            ));
        }

        let seed = seed_override.or(self.seed).unwrap_or(0);
        let mut resolved = RunConfig {
            command: Some(command),
            seed: Some(seed),
            source: None,
            mode: None,
            geometry: None,
            chsh: None,
            signal: None,
            schulman: None,
            output: Some(resolve_output(self.output.as_ref(), command)?),
        };

        if command != Command::SchulmanCheck {
            resolved.source = Some(
                self.source
                    .clone()
                    .ok_or_else(|| CliError::Config(format!("command `{command}` requires a `source` block")))?,
            );
        }
        if !matches!(command, Command::SchulmanCheck | Command::Signal) {
            let mode = self.mode.unwrap_or(ModeConfig::Exact);
            mode.to_mode(seed)?;
            resolved.mode = Some(mode);
        }
        if uses("geometry") {
            resolved.geometry = Some(resolve_geometry(self.geometry.as_ref(), command)?);
        }
        match command {
            Command::Chsh => resolved.chsh = Some(resolve_chsh(self.chsh.as_ref())?),
            Command::Signal => resolved.signal = Some(resolve_signal(self.signal.as_ref())?),
            Command::SchulmanCheck => resolved.schulman = Some(resolve_schulman(self.schulman.as_ref())?),
            _ => {}
        }
        Ok(resolved)
    }
}

fn check_output_name(name: &str) -> Result<(), CliError> {
    let path = Path::new(name);
    let plain = !name.is_empty()
        && path
            .components()
            .all(|c| matches!(c, Component::Normal(_)));
    if plain {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "output file `{name}` must be a relative path inside the output directory"
        )))
    }
}

fn resolve_output(output: Option<&OutputConfig>, command: Command) -> Result<OutputConfig, CliError> {
    let given = output.cloned().unwrap_or_default();
    let json = given.json.unwrap_or_else(|| format!("{command}.json"));
    check_output_name(&json)?;
    let csv = if command.has_csv() {
        let csv = given.csv.unwrap_or_else(|| format!("{command}.csv"));
        check_output_name(&csv)?;
        if csv == json {
            return Err(CliError::Config("json and csv outputs must differ".into()));
        }
        Some(csv)
    } else if given.csv.is_some() {
        return Err(CliError::Config(format!("command `{command}` writes no CSV")));
    } else {
        None
    };
    Ok(OutputConfig { json: Some(json), csv })
}

fn finite(what: &str, x: f64) -> Result<f64, CliError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::Config(format!("{what} must be finite")))
    }
}

fn resolve_geometry(geometry: Option<&GeometryConfig>, command: Command) -> Result<GeometryConfig, CliError> {
    let given = geometry.cloned().unwrap_or_default();
    if let Some(layout) = given.layout {
        if given.n.is_some() || given.start_rad.is_some() {
            return Err(CliError::Config(
                "geometry takes either `layout` or `n`/`start_rad`, not both".into(),
            ));
        }
        match command {
            Command::Certify | Command::Chsh => {
                bell_hv_core::geometry::Theorem2PrimeLayout::from_document(&layout)?;
            }
            _ => {
                bell_hv_core::ChainSpec::from_document(&layout)?;
            }
        }
        return Ok(GeometryConfig {
            n: None,
            start_rad: None,
            layout: Some(layout),
        });
    }
    let n = given.n.unwrap_or(6);
    if n == 0 {
        return Err(CliError::Config("geometry.n must be at least 1".into()));
    }
    if matches!(command, Command::Certify | Command::Chsh) && n != 6 {
        return Err(CliError::Config(format!(
            "command `{command}` uses the 12-direction layout; geometry.n must be 6"
        )));
    }
    Ok(GeometryConfig {
        n: Some(n),
        start_rad: Some(finite("geometry.start_rad", given.start_rad.unwrap_or(0.0))?),
        layout: None,
    })
}

fn resolve_chsh(chsh: Option<&ChshConfig>) -> Result<ChshConfig, CliError> {
    let given = chsh.cloned().unwrap_or_default();
    if given.alice_rad.is_some() != given.bob_rad.is_some() {
        return Err(CliError::Config(
            "chsh.alice_rad and chsh.bob_rad must be given together".into(),
        ));
    }
    for x in given.alice_rad.iter().chain(given.bob_rad.iter()).flatten() {
        finite("chsh direction", *x)?;
    }
    let signs = given.signs.unwrap_or([1, 1, -1, 1]);
    bell_hv_core::estimators::SignPattern::from_signs(signs)?;
    Ok(ChshConfig {
        alice_rad: given.alice_rad,
        bob_rad: given.bob_rad,
        signs: Some(signs),
    })
}

fn resolve_signal(signal: Option<&SignalConfig>) -> Result<SignalConfig, CliError> {
    let given = signal.cloned().unwrap_or_default();
    if given.bits.is_some() && given.random_bits.is_some() {
        return Err(CliError::Config(
            "signal takes either `bits` or `random_bits`, not both".into(),
        ));
    }
    let random_bits = match (&given.bits, given.random_bits) {
        (None, None) => Some(64),
        (_, r) => r,
    };
    let alice = given.alice_rad.unwrap_or([0.0, FRAC_PI_2]);
    for x in alice {
        finite("signal.alice_rad", x)?;
    }
    let bob = finite("signal.bob_rad", given.bob_rad.unwrap_or(0.0))?;
    let confidence = given.confidence.unwrap_or(0.99);
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(CliError::Config(format!(
            "signal.confidence must lie in (0, 1), got {confidence}"
        )));
    }
    let pairs_per_bit = given.pairs_per_bit.unwrap_or(200);
    if pairs_per_bit == 0 {
        return Err(CliError::Config("signal.pairs_per_bit must be at least 1".into()));
    }
    if let Some(sweep) = &given.sweep {
        if sweep.n_values.is_empty() || sweep.n_values.contains(&0) {
            return Err(CliError::Config("sweep.n_values must be non-empty and positive".into()));
        }
    }
    Ok(SignalConfig {
        alice_rad: Some(alice),
        bob_rad: Some(bob),
        pairs_per_bit: Some(pairs_per_bit),
        decode_threshold: given.decode_threshold,
        confidence: Some(confidence),
        bits: given.bits,
        random_bits,
        sweep: given.sweep,
    })
}

fn resolve_schulman(schulman: Option<&SchulmanConfig>) -> Result<SchulmanConfig, CliError> {
    let given = schulman.cloned().unwrap_or_default();
    let gamma_s = given.gamma_s.unwrap_or_else(|| vec![0.01, 0.1, 1.0]);
    if gamma_s.is_empty() || gamma_s.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
        return Err(CliError::Config("schulman.gamma_s must be non-empty and positive".into()));
    }
    let theta_points = given.theta_points.unwrap_or(25);
    if theta_points < 2 {
        return Err(CliError::Config("schulman.theta_points must be at least 2".into()));
    }
    let truncation = given.truncation.unwrap_or(100_000);
    if truncation == 0 {
        return Err(CliError::Config("schulman.truncation must be at least 1".into()));
    }
    let tolerance = given.tolerance.unwrap_or(1e-6);
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return Err(CliError::Config("schulman.tolerance must be positive".into()));
    }
    Ok(SchulmanConfig {
        gamma_s: Some(gamma_s),
        theta_points: Some(theta_points),
        truncation: Some(truncation),
        tolerance: Some(tolerance),
    })
}
