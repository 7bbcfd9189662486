//! Marker dictionary: one 16-bit codeword per flashcard, laid out on the 4×4
//! payload inside a 6×6 grid whose outer ring of modules is solid black.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::VisionError;
use crate::emotion::{CardId, Emotion};

/// Modules per side of the full marker, border included.
pub const GRID_MODULES: usize = 6;
/// Modules per side of the payload.
pub const PAYLOAD_SIDE: usize = 4;
/// Minimum Hamming distance between any two rotated codewords.
pub const MIN_DISTANCE: u32 = 8;
/// The dictionary seed used for printed cards.
pub const SHIPPED_SEED: u64 = 0;
/// Largest decode radius for which a distance-8 dictionary stays unambiguous.
pub const MAX_RADIUS: u32 = (MIN_DISTANCE - 1) / 2;

// Keeps all-white and all-black payloads at least 3 bits from every codeword.
const MIN_WEIGHT: u32 = 3;
const MAX_WEIGHT: u32 = 13;

/// A 4×4 payload, row-major with bit 15 holding module (row 0, col 0).
/// A set bit is a dark module.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PayloadBits(pub u16);

impl PayloadBits {
    #[inline]
    fn mask(row: usize, col: usize) -> u16 {
        debug_assert!(row < PAYLOAD_SIDE && col < PAYLOAD_SIDE);
        1 << (15 - (row * PAYLOAD_SIDE + col))
    }

    pub fn bit(self, row: usize, col: usize) -> bool {
        self.0 & Self::mask(row, col) != 0
    }

    pub fn with_bit(self, row: usize, col: usize, dark: bool) -> Self {
        if dark {
            PayloadBits(self.0 | Self::mask(row, col))
        } else {
            PayloadBits(self.0 & !Self::mask(row, col))
        }
    }

    /// The payload as seen after the card turns a quarter clockwise in the
    /// image.
    pub fn rotate_cw(self) -> Self {
        let mut out = PayloadBits(0);
        for r in 0..PAYLOAD_SIDE {
            for c in 0..PAYLOAD_SIDE {
                if self.bit(PAYLOAD_SIDE - 1 - c, r) {
                    out = out.with_bit(r, c, true);
                }
            }
        }
        out
    }

    pub fn rotated(self, quarter_turns: u8) -> Self {
        (0..quarter_turns % 4).fold(self, |b, _| b.rotate_cw())
    }

    /// All four orientations, index = quarter turns.
    pub fn rotations(self) -> [PayloadBits; 4] {
        let r1 = self.rotate_cw();
        let r2 = r1.rotate_cw();
        [self, r1, r2, r2.rotate_cw()]
    }

    pub fn hamming(self, other: PayloadBits) -> u32 {
        (self.0 ^ other.0).count_ones()
    }

    pub fn weight(self) -> u32 {
        self.0.count_ones()
    }
}

impl fmt::Debug for PayloadBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PayloadBits({:#06x})", self.0)
    }
}

/// Printable fiducial layout plus the per-card codewords.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkerSpec {
    pub seed: u64,
    /// Indexed by [`CardId::index`].
    pub codewords: [PayloadBits; 4],
    pub module_size_px: usize,
    pub quiet_zone: usize,
}

impl MarkerSpec {
    pub fn codeword(&self, card: CardId) -> PayloadBits {
        self.codewords[card.index()]
    }

    pub fn with_module_size(mut self, px: usize) -> Self {
        self.module_size_px = px;
        self
    }

    pub fn with_quiet_zone(mut self, modules: usize) -> Self {
        self.quiet_zone = modules;
        self
    }

    /// Side length in pixels of a rendered card, quiet zone included.
    pub fn rendered_side_px(&self) -> usize {
        (GRID_MODULES + 2 * self.quiet_zone) * self.module_size_px
    }

    /// Smallest pairwise distance across every rotation of every codeword.
    pub fn min_distance(&self) -> u32 {
        let all: Vec<PayloadBits> = self.codewords.iter().flat_map(|c| c.rotations()).collect();
        let mut best = u32::MAX;
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                best = best.min(all[i].hamming(all[j]));
            }
        }
        best
    }

    pub fn validate(&self) -> Result<(), VisionError> {
        if self.module_size_px == 0 || self.quiet_zone == 0 {
            return Err(VisionError::InvalidSpec(
                "module size and quiet zone must be at least 1".into(),
            ));
        }
        let d = self.min_distance();
        if d < MIN_DISTANCE {
            return Err(VisionError::InvalidSpec(format!(
                "rotated codewords are only {d} bits apart, need {MIN_DISTANCE}"
            )));
        }
        Ok(())
    }
}

impl Default for MarkerSpec {
    /// The shipped seed-0 dictionary at 10 px per module and a one-module
    /// quiet zone.
    fn default() -> Self {
        build_dictionary(SHIPPED_SEED).expect("shipped dictionary seed must be satisfiable")
    }
}

fn is_admissible(word: PayloadBits) -> bool {
    if !(MIN_WEIGHT..=MAX_WEIGHT).contains(&word.weight()) {
        return false;
    }
    let r = word.rotations();
    (0..4).all(|i| (i + 1..4).all(|j| r[i].hamming(r[j]) >= MIN_DISTANCE))
}

fn compatible(chosen: &[PayloadBits], word: PayloadBits) -> bool {
    let rotations = word.rotations();
    chosen
        .iter()
        .flat_map(|c| c.rotations())
        .all(|a| rotations.iter().all(|&b| a.hamming(b) >= MIN_DISTANCE))
}

fn search(candidates: &[PayloadBits], chosen: &mut Vec<PayloadBits>, budget: &mut usize) -> bool {
    if chosen.len() == Emotion::ALL.len() {
        return true;
    }
    for (i, &word) in candidates.iter().enumerate() {
        if *budget == 0 {
            return false;
        }
        *budget -= 1;
        if compatible(chosen, word) {
            chosen.push(word);
            if search(&candidates[i + 1..], chosen, budget) {
                return true;
            }
            chosen.pop();
        }
    }
    false
}

/// Searches for four codewords whose sixteen rotations are pairwise at least
/// [`MIN_DISTANCE`] apart. The candidate order is a seeded shuffle, so each
/// seed yields a fixed dictionary.
pub fn build_dictionary(seed: u64) -> Result<MarkerSpec, VisionError> {
    let mut candidates: Vec<PayloadBits> = (0..=u16::MAX)
        .map(PayloadBits)
        .filter(|&w| is_admissible(w))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    candidates.shuffle(&mut rng);

    let mut chosen = Vec::with_capacity(4);
    let mut budget = 5_000_000;
    if !search(&candidates, &mut chosen, &mut budget) {
        return Err(VisionError::DictionarySearchFailed { seed });
    }
    let spec = MarkerSpec {
        seed,
        codewords: [chosen[0], chosen[1], chosen[2], chosen[3]],
        module_size_px: 10,
        quiet_zone: 1,
    };
    debug_assert!(spec.validate().is_ok());
    Ok(spec)
}

/// A payload accepted by [`decode_payload`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PayloadMatch {
    pub card: CardId,
    /// Quarter turns clockwise of the card relative to its printed
    /// orientation.
    pub rotation: u8,
    pub distance: u32,
}

/// Decodes at the default radius of 2.
pub fn decode_payload(bits: PayloadBits, spec: &MarkerSpec) -> Option<PayloadMatch> {
    decode_payload_within(bits, spec, 2)
}

/// Returns the unique rotated codeword within `radius` bits of `bits`, or
/// `None` (reject). For `radius` ≤ [`MAX_RADIUS`] at most one candidate can
/// qualify.
pub fn decode_payload_within(bits: PayloadBits, spec: &MarkerSpec, radius: u32) -> Option<PayloadMatch> {
    let mut best: Option<PayloadMatch> = None;
    for card in Emotion::ALL {
        for (rotation, word) in spec.codeword(card).rotations().into_iter().enumerate() {
            let distance = word.hamming(bits);
            if distance <= radius && best.is_none_or(|b| distance < b.distance) {
                best = Some(PayloadMatch {
                    card,
                    rotation: rotation as u8,
                    distance,
                });
            }
        }
    }
    best
}
