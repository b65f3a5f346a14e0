//! Coplanar measurement directions, chains and the 16-pair layout.
//!
//! All directions live in a single plane and are stored as an angle in
//! `[0, 2π)`. A chain of half-count `n` is the alternating sequence
//! `A_0, B_0, A_1, …, B_{n-1}, A_n` stepping by `π/(2n)` from `A_0` to its
//! opposite `A_n`. Only `A_0` is physically measured on Alice's side for the
//! closing link: a measurement along `A_0` doubles as a measurement along
//! `A_n = -A_0` with its outcome negated, so that link is flagged `negated`.

use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for angle equality in construction and validation.
pub const ANGLE_TOLERANCE: f64 = 1e-12;

/// A planar spin measurement axis.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Direction(f64);

impl Direction {
    pub fn new(angle: f64) -> Result<Self> {
        if !angle.is_finite() {
            return Err(Error::domain("direction angle", angle));
        }
        let mut reduced = angle.rem_euclid(TAU);
        // rem_euclid can round up to exactly TAU for tiny negative inputs.
        if reduced >= TAU {
            reduced = 0.0;
        }
        Ok(Self(reduced))
    }

    pub fn angle(self) -> f64 {
        self.0
    }

    pub fn opposite(self) -> Self {
        self.rotated(PI)
    }

    pub fn rotated(self, phi: f64) -> Self {
        Self::new(self.0 + phi).unwrap_or(self)
    }
}

impl TryFrom<f64> for Direction {
    type Error = Error;

    fn try_from(angle: f64) -> Result<Self> {
        Self::new(angle)
    }
}

impl From<Direction> for f64 {
    fn from(d: Direction) -> f64 {
        d.0
    }
}

/// Unsigned angle between two oriented axes, in `[0, π]`.
pub fn angle_between(a: Direction, b: Direction) -> f64 {
    let delta = (a.0 - b.0).abs();
    delta.min(TAU - delta)
}

pub(crate) fn same_direction(a: Direction, b: Direction) -> bool {
    angle_between(a, b) <= ANGLE_TOLERANCE
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn other(self) -> Self {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::A => "A",
            Side::B => "B",
        })
    }
}

/// One named direction of a chain, e.g. `B_3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainEntry {
    pub side: Side,
    pub index: usize,
    pub direction: Direction,
}

impl ChainEntry {
    pub fn label(&self) -> String {
        format!("{}{}", self.side, self.index)
    }
}

/// A link between two adjacent chain entries, kept in chain order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainLink {
    pub index: usize,
    pub first: ChainEntry,
    pub second: ChainEntry,
    /// Alice's direction is realised as the opposite of a measured direction
    /// and the measured correlation must be negated.
    pub negated: bool,
}

impl ChainLink {
    pub fn alice(&self) -> ChainEntry {
        if self.first.side == Side::A {
            self.first
        } else {
            self.second
        }
    }

    pub fn bob(&self) -> ChainEntry {
        if self.first.side == Side::B {
            self.first
        } else {
            self.second
        }
    }

    /// The direction Alice's apparatus is actually set to.
    pub fn measured_alice(&self) -> Direction {
        let alice = self.alice().direction;
        if self.negated {
            alice.opposite()
        } else {
            alice
        }
    }

    /// Angle between the two logical directions of the link.
    pub fn angle(&self) -> f64 {
        angle_between(self.first.direction, self.second.direction)
    }

    pub fn side_pair(&self) -> String {
        format!("{}-{}", self.first.label(), self.second.label())
    }
}

/// The `2n`-link chain connecting `A_0` to `A_n = -A_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    n: usize,
    entries: Vec<ChainEntry>,
    links: Vec<ChainLink>,
}

/// Builds the chain stepping by `π/(2n)` from `start`.
pub fn build_chain(n: usize, start: Direction) -> Result<ChainSpec> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "chain half-count n must be at least 1".into(),
        ));
    }
    let step = PI / (2 * n) as f64;
    let directions = (0..=2 * n)
        .map(|k| Direction::new(start.angle() + k as f64 * step))
        .collect::<Result<Vec<_>>>()?;
    ChainSpec::from_directions(n, &directions)
}

impl ChainSpec {
    /// Validates `2n + 1` logical directions in chain order and attaches
    /// side labels and links.
    pub fn from_directions(n: usize, directions: &[Direction]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidLayout("n must be at least 1".into()));
        }
        if directions.len() != 2 * n + 1 {
            return Err(Error::InvalidLayout(format!(
                "expected {} directions for n = {n}, got {}",
                2 * n + 1,
                directions.len()
            )));
        }
        let step = PI / (2 * n) as f64;
        for (k, pair) in directions.windows(2).enumerate() {
            let angle = angle_between(pair[0], pair[1]);
            if (angle - step).abs() > ANGLE_TOLERANCE {
                return Err(Error::InvalidLayout(format!(
                    "link {k} subtends {angle} rad, expected {step}"
                )));
            }
        }
        if !same_direction(directions[2 * n], directions[0].opposite()) {
            return Err(Error::InvalidLayout(
                "last direction must be opposite to the first".into(),
            ));
        }

        let entries: Vec<ChainEntry> = directions
            .iter()
            .enumerate()
            .map(|(k, &direction)| ChainEntry {
                side: if k % 2 == 0 { Side::A } else { Side::B },
                index: k / 2,
                direction,
            })
            .collect();
        let links = entries
            .windows(2)
            .enumerate()
            .map(|(index, pair)| ChainLink {
                index,
                first: pair[0],
                second: pair[1],
                negated: index == 2 * n - 1,
            })
            .collect();
        Ok(Self { n, entries, links })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn start(&self) -> Direction {
        self.entries[0].direction
    }

    pub fn entries(&self) -> &[ChainEntry] {
        &self.entries
    }

    pub fn links(&self) -> &[ChainLink] {
        &self.links
    }

    /// Nominal angle of every link, `π/(2n)`.
    pub fn link_angle(&self) -> f64 {
        PI / (2 * self.n) as f64
    }

    pub fn rotated(&self, phi: f64) -> Self {
        let directions: Vec<Direction> =
            self.entries.iter().map(|e| e.direction.rotated(phi)).collect();
        Self::from_directions(self.n, &directions).expect("rotation preserves chain invariants")
    }

    pub fn to_document(&self) -> LayoutDocument {
        LayoutDocument {
            n: self.n,
            directions: self.entries.iter().map(DirectionEntry::from).collect(),
            chsh_pairs: None,
        }
    }

    pub fn from_document(doc: &LayoutDocument) -> Result<Self> {
        if doc.chsh_pairs.is_some() {
            return Err(Error::InvalidLayout(
                "a plain chain document has no chsh_pairs".into(),
            ));
        }
        check_alternation(&doc.directions, doc.directions.len())?;
        let directions = doc
            .directions
            .iter()
            .map(|e| Direction::new(e.angle_rad))
            .collect::<Result<Vec<_>>>()?;
        Self::from_directions(doc.n, &directions)
    }
}

fn check_alternation(entries: &[DirectionEntry], expected: usize) -> Result<()> {
    if entries.len() != expected {
        return Err(Error::InvalidLayout(format!(
            "expected {expected} directions, got {}",
            entries.len()
        )));
    }
    for (k, e) in entries.iter().enumerate() {
        let side = if k % 2 == 0 { Side::A } else { Side::B };
        if e.side != side || e.index != k / 2 {
            return Err(Error::InvalidLayout(format!(
                "entry {k} is {}{}, expected {side}{}",
                e.side,
                e.index,
                k / 2
            )));
        }
    }
    Ok(())
}

/// One Alice/Bob pair of a CHSH quadruple, by chain entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChshPair {
    pub alice: ChainEntry,
    pub bob: ChainEntry,
}

/// Alice's two and Bob's two CHSH directions, with the index of the term
/// carrying the minus sign in the order `(I,J), (I',J), (I,J'), (I',J')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChshDirections {
    pub alice: [Direction; 2],
    pub bob: [Direction; 2],
    pub minus_term: usize,
}

/// Twelve physical directions `A_0..A_5, B_0..B_5` at successive `π/12`
/// plus the CHSH pairs `(A_0,B_1), (A_0,B_4), (A_3,B_1), (A_3,B_4)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem2PrimeLayout {
    chain: ChainSpec,
    chsh_pairs: [ChshPair; 4],
}

const LAYOUT_N: usize = 6;
const LAYOUT_CHSH: [(usize, usize); 4] = [(0, 1), (0, 4), (3, 1), (3, 4)];

pub fn build_theorem2prime_layout(start: Direction) -> Theorem2PrimeLayout {
    let chain = build_chain(LAYOUT_N, start).expect("n = 6 is a valid chain");
    Theorem2PrimeLayout::from_chain(chain)
}

impl Theorem2PrimeLayout {
    fn from_chain(chain: ChainSpec) -> Self {
        let entry = |side: Side, index: usize| {
            let k = match side {
                Side::A => 2 * index,
                Side::B => 2 * index + 1,
            };
            chain.entries[k]
        };
        let chsh_pairs = LAYOUT_CHSH.map(|(a, b)| ChshPair {
            alice: entry(Side::A, a),
            bob: entry(Side::B, b),
        });
        Self { chain, chsh_pairs }
    }

    pub fn chain(&self) -> &ChainSpec {
        &self.chain
    }

    pub fn chsh_pairs(&self) -> &[ChshPair; 4] {
        &self.chsh_pairs
    }

    /// CHSH settings `I = A_0, I' = A_3, J = B_1, J' = B_4` with the minus
    /// sign on `(A_0, B_4)`, the only pair at `3π/4`.
    pub fn chsh_directions(&self) -> ChshDirections {
        let [a0b1, _, a3b1, a3b4] = self.chsh_pairs;
        ChshDirections {
            alice: [a0b1.alice.direction, a3b1.alice.direction],
            bob: [a0b1.bob.direction, a3b4.bob.direction],
            minus_term: 2,
        }
    }

    /// Every measured (Alice, Bob) direction pair: 12 chain links followed
    /// by the 4 CHSH pairs.
    pub fn measured_pairs(&self) -> Vec<(Direction, Direction)> {
        self.chain
            .links()
            .iter()
            .map(|l| (l.measured_alice(), l.bob().direction))
            .chain(
                self.chsh_pairs
                    .iter()
                    .map(|p| (p.alice.direction, p.bob.direction)),
            )
            .collect()
    }

    pub fn rotated(&self, phi: f64) -> Self {
        Self::from_chain(self.chain.rotated(phi))
    }

    /// The 12 physical directions in chain order (A_6 omitted).
    pub fn to_document(&self) -> LayoutDocument {
        LayoutDocument {
            n: LAYOUT_N,
            directions: self.chain.entries[..2 * LAYOUT_N]
                .iter()
                .map(DirectionEntry::from)
                .collect(),
            chsh_pairs: Some(
                self.chsh_pairs
                    .iter()
                    .map(|p| [p.alice.label(), p.bob.label()])
                    .collect(),
            ),
        }
    }

    pub fn from_document(doc: &LayoutDocument) -> Result<Self> {
        if doc.n != LAYOUT_N {
            return Err(Error::InvalidLayout(format!(
                "layout requires n = {LAYOUT_N}, got {}",
                doc.n
            )));
        }
        check_alternation(&doc.directions, 2 * LAYOUT_N)?;
        let mut directions = doc
            .directions
            .iter()
            .map(|e| Direction::new(e.angle_rad))
            .collect::<Result<Vec<_>>>()?;
        directions.push(directions[0].opposite());
        let layout = Self::from_chain(ChainSpec::from_directions(LAYOUT_N, &directions)?);

        let expected: Vec<[String; 2]> = layout
            .chsh_pairs
            .iter()
            .map(|p| [p.alice.label(), p.bob.label()])
            .collect();
        match &doc.chsh_pairs {
            Some(pairs) if *pairs == expected => Ok(layout),
            Some(pairs) => Err(Error::InvalidLayout(format!(
                "chsh_pairs must be {expected:?}, got {pairs:?}"
            ))),
            None => Err(Error::InvalidLayout("missing chsh_pairs".into())),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: LayoutDocument =
            serde_json::from_str(text).map_err(|e| Error::InvalidLayout(e.to_string()))?;
        Self::from_document(&doc)
    }
}

/// Serialized form of chains and layouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutDocument {
    pub n: usize,
    pub directions: Vec<DirectionEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chsh_pairs: Option<Vec<[String; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectionEntry {
    pub side: Side,
    pub index: usize,
    pub angle_rad: f64,
}

impl From<&ChainEntry> for DirectionEntry {
    fn from(e: &ChainEntry) -> Self {
        Self {
            side: e.side,
            index: e.index,
            angle_rad: e.direction.angle(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dir(angle: f64) -> Direction {
        Direction::new(angle).unwrap()
    }

    #[test]
    fn direction_reduction() {
        assert_eq!(dir(0.0).angle(), 0.0);
        assert!((dir(-PI / 2.0).angle() - 1.5 * PI).abs() < 1e-15);
        assert!((dir(5.0 * PI).angle() - PI).abs() < 1e-12);
        assert_eq!(dir(-1e-300).angle(), 0.0);
        assert!(Direction::new(f64::NAN).is_err());
        assert!(Direction::new(f64::INFINITY).is_err());
    }

    #[test]
    fn angle_between_examples() {
        assert_eq!(angle_between(dir(0.0), dir(0.0)), 0.0);
        assert!((angle_between(dir(0.0), dir(PI)) - PI).abs() < 1e-15);
        assert!((angle_between(dir(PI / 12.0), dir(PI / 3.0)) - PI / 4.0).abs() < 1e-15);
        // wraps through zero
        assert!((angle_between(dir(0.1), dir(TAU - 0.1)) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn smallest_chain() {
        let chain = build_chain(1, dir(0.0)).unwrap();
        let angles: Vec<f64> = chain.entries().iter().map(|e| e.direction.angle()).collect();
        assert_eq!(angles.len(), 3);
        assert!((angles[1] - PI / 2.0).abs() < 1e-15);
        assert!((angles[2] - PI).abs() < 1e-15);
        assert_eq!(chain.links().len(), 2);
        assert!(chain.links()[1].negated);
        assert!(!chain.links()[0].negated);
    }

    #[test]
    fn rejects_empty_chain() {
        assert!(matches!(
            build_chain(0, dir(0.0)),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn chain_of_six_steps_by_pi_over_twelve() {
        let chain = build_chain(6, dir(0.0)).unwrap();
        assert_eq!(chain.entries().len(), 13);
        for (k, e) in chain.entries().iter().enumerate() {
            assert!((e.direction.angle() - k as f64 * PI / 12.0).abs() < 1e-12);
        }
        let last = chain.entries()[12];
        assert_eq!(last.label(), "A6");
        let closing = chain.links()[11];
        assert_eq!(closing.side_pair(), "B5-A6");
        assert!(closing.negated);
        assert!(same_direction(closing.measured_alice(), dir(0.0)));
    }

    #[test]
    fn chain_from_offset_start() {
        let s = PI / 7.0;
        let chain = build_chain(2, dir(s)).unwrap();
        for pair in chain.entries().windows(2) {
            assert!((angle_between(pair[0].direction, pair[1].direction) - PI / 4.0).abs() < 1e-12);
        }
        assert!(same_direction(chain.entries()[4].direction, dir(s + PI)));
    }

    #[test]
    fn layout_chsh_angles() {
        let layout = build_theorem2prime_layout(dir(0.0));
        let angles: Vec<f64> = layout
            .chsh_pairs()
            .iter()
            .map(|p| angle_between(p.alice.direction, p.bob.direction))
            .collect();
        let expected = [PI / 4.0, 3.0 * PI / 4.0, PI / 4.0, PI / 4.0];
        for (a, e) in angles.iter().zip(expected) {
            assert!((a - e).abs() < 1e-12, "{angles:?}");
        }
        assert_eq!(layout.measured_pairs().len(), 16);
        let closing = layout.chain().links()[11];
        assert!((closing.angle() - PI / 12.0).abs() < 1e-12);
        assert!((closing.alice().direction.angle() - PI).abs() < 1e-12);
    }

    #[test]
    fn layout_successive_chsh_directions_quarter_turns() {
        let layout = build_theorem2prime_layout(dir(0.3));
        let c = layout.chsh_directions();
        let seq = [c.alice[0], c.bob[0], c.alice[1], c.bob[1]];
        for pair in seq.windows(2) {
            assert!((angle_between(pair[0], pair[1]) - PI / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn layout_document_round_trip_and_rejects() {
        let layout = build_theorem2prime_layout(dir(0.25));
        let text = serde_json::to_string(&layout.to_document()).unwrap();
        let back = Theorem2PrimeLayout::from_json(&text).unwrap();
        for (a, b) in back.measured_pairs().iter().zip(layout.measured_pairs()) {
            assert!(same_direction(a.0, b.0) && same_direction(a.1, b.1));
        }

        let mut doc = layout.to_document();
        doc.directions[3].angle_rad += 1e-6;
        assert!(Theorem2PrimeLayout::from_document(&doc).is_err());

        let mut doc = layout.to_document();
        doc.chsh_pairs.as_mut().unwrap()[0] = ["A1".into(), "B1".into()];
        assert!(Theorem2PrimeLayout::from_document(&doc).is_err());

        let mut doc = layout.to_document();
        doc.directions.swap(0, 1);
        assert!(Theorem2PrimeLayout::from_document(&doc).is_err());
    }

    #[test]
    fn chain_document_round_trip() {
        let chain = build_chain(5, dir(1.0)).unwrap();
        let back = ChainSpec::from_document(&chain.to_document()).unwrap();
        assert_eq!(back, chain);
    }

    proptest! {
        #[test]
        fn chain_invariants_hold(n in 1usize..=64, s in -10.0f64..10.0) {
            let chain = build_chain(n, dir(s)).unwrap();
            prop_assert_eq!(chain.entries().len(), 2 * n + 1);
            prop_assert_eq!(chain.links().len(), 2 * n);
            for link in chain.links() {
                prop_assert!((link.angle() - PI / (2 * n) as f64).abs() <= ANGLE_TOLERANCE);
            }
            prop_assert!(same_direction(chain.entries()[2 * n].direction, chain.start().opposite()));
        }

        #[test]
        fn angle_between_properties(a in -10.0f64..10.0, b in -10.0f64..10.0) {
            let (da, db) = (dir(a), dir(b));
            let ab = angle_between(da, db);
            prop_assert_eq!(ab, angle_between(db, da));
            prop_assert!((0.0..=PI).contains(&ab));
            prop_assert_eq!(angle_between(da, da), 0.0);
            prop_assert!((angle_between(da, da.opposite()) - PI).abs() < 1e-12);
        }

        #[test]
        fn rotation_preserves_pairwise_angles(s in 0.0f64..TAU, phi in -7.0f64..7.0) {
            let layout = build_theorem2prime_layout(dir(s));
            let rotated = layout.rotated(phi);
            let shifted = build_theorem2prime_layout(dir(s + phi));
            for ((a, b), (c, d)) in layout.measured_pairs().into_iter().zip(rotated.measured_pairs()) {
                prop_assert!((angle_between(a, b) - angle_between(c, d)).abs() < 1e-12);
            }
            for ((a, b), (c, d)) in rotated.measured_pairs().into_iter().zip(shifted.measured_pairs()) {
                prop_assert!(same_direction(a, c) && same_direction(b, d));
            }
        }
    }
}
