//! Outcome, parameter and measurement independence checked at the hidden
//! level over finite sets of settings.

use serde::Serialize;

use super::{HiddenAtom, HiddenVariableModel, Setting};
use crate::error::Result;

/// Absolute tolerance for the predicates; built-in models satisfy the
/// conditions they satisfy exactly up to rounding.
pub const PREDICATE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredicateReport {
    pub holds: bool,
    pub max_deviation: f64,
    /// Where the largest deviation occurred.
    pub worst: Option<String>,
}

impl PredicateReport {
    fn new() -> Self {
        Self {
            holds: true,
            max_deviation: 0.0,
            worst: None,
        }
    }

    fn record(&mut self, deviation: f64, place: impl FnOnce() -> String) {
        if deviation > self.max_deviation {
            self.max_deviation = deviation;
            self.worst = Some(place());
        }
        self.holds = self.max_deviation <= PREDICATE_TOLERANCE;
    }
}

fn angles(i: &Setting, j: &Setting) -> String {
    format!("({:.6}, {:.6})", i.direction.angle(), j.direction.angle())
}

/// `⟨AB⟩_λ = ⟨A⟩_λ ⟨B⟩_λ` for every λ in the support of every listed pair.
pub fn outcome_independence<M: HiddenVariableModel + ?Sized>(
    model: &M,
    pairs: &[(Setting, Setting)],
) -> Result<PredicateReport> {
    let mut report = PredicateReport::new();
    for (i, j) in pairs {
        for atom in model.hidden_distribution(i, j)?.support() {
            let p = model.outcome_distribution(&atom.state, i, j)?;
            let (ma, mb) = p.marginals();
            let dev = (p.correlator() - ma * mb).abs();
            report.record(dev, || format!("{} at {}", atom.state, angles(i, j)));
        }
    }
    Ok(report)
}

fn union_support<'a>(a: &'a [HiddenAtom], b: &'a [HiddenAtom]) -> Vec<&'a HiddenAtom> {
    let mut out: Vec<&HiddenAtom> = Vec::new();
    for atom in a.iter().chain(b).filter(|x| x.weight > 0.0) {
        if !out.iter().any(|o| o.state.matches(&atom.state)) {
            out.push(atom);
        }
    }
    out
}

/// `⟨A⟩_λ^{IJ}` independent of `J` and `⟨B⟩_λ^{IJ}` independent of `I`,
/// over λ in the union of the supports being compared.
pub fn parameter_independence<M: HiddenVariableModel + ?Sized>(
    model: &M,
    alice: &[Setting],
    bob: &[Setting],
) -> Result<PredicateReport> {
    let mut report = PredicateReport::new();
    for i in alice {
        for (k, j1) in bob.iter().enumerate() {
            for j2 in &bob[k + 1..] {
                let s1 = model.hidden_distribution(i, j1)?;
                let s2 = model.hidden_distribution(i, j2)?;
                for atom in union_support(s1.atoms(), s2.atoms()) {
                    let a1 = model.outcome_distribution(&atom.state, i, j1)?.marginals().0;
                    let a2 = model.outcome_distribution(&atom.state, i, j2)?.marginals().0;
                    report.record((a1 - a2).abs(), || {
                        format!("<A> of {} under {} vs {}", atom.state, angles(i, j1), angles(i, j2))
                    });
                }
            }
        }
    }
    for j in bob {
        for (k, i1) in alice.iter().enumerate() {
            for i2 in &alice[k + 1..] {
                let s1 = model.hidden_distribution(i1, j)?;
                let s2 = model.hidden_distribution(i2, j)?;
                for atom in union_support(s1.atoms(), s2.atoms()) {
                    let b1 = model.outcome_distribution(&atom.state, i1, j)?.marginals().1;
                    let b2 = model.outcome_distribution(&atom.state, i2, j)?.marginals().1;
                    report.record((b1 - b2).abs(), || {
                        format!("<B> of {} under {} vs {}", atom.state, angles(i1, j), angles(i2, j))
                    });
                }
            }
        }
    }
    Ok(report)
}

/// `σ^{IJ}` identical for every combination of the listed settings.
pub fn measurement_independence<M: HiddenVariableModel + ?Sized>(
    model: &M,
    alice: &[Setting],
    bob: &[Setting],
) -> Result<PredicateReport> {
    let mut report = PredicateReport::new();
    let mut reference = None;
    for i in alice {
        for j in bob {
            let sigma = model.hidden_distribution(i, j)?;
            match &reference {
                None => reference = Some((sigma, angles(i, j))),
                Some((first, at)) => {
                    let dev = sigma.max_abs_difference(first);
                    report.record(dev, || format!("sigma at {} vs {at}", angles(i, j)));
                }
            }
        }
    }
    Ok(report)
}
