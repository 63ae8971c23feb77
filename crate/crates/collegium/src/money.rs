//! Integer money and exact-fraction arithmetic.
//!
//! All balances and fees are integer micro-credits (10⁶ micro = 1
//! credit). Fractions that the protocol multiplies money or board sizes
//! by — fee percentages, quorum sizes — are held as parts-per-million,
//! so quorum ceilings and fee cuts are integer-exact and conservation
//! can be asserted with `==` rather than a tolerance.

use std::fmt;

use crate::canonical::{Canon, Writer};

/// One credit, in micro-credits.
pub const MICRO_PER_CREDIT: u64 = 1_000_000;

const PPM_SCALE: u64 = 1_000_000;

/// A fraction in [0, 1] held as parts-per-million.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ppm(u32);

impl Ppm {
    pub const ZERO: Ppm = Ppm(0);
    pub const ONE: Ppm = Ppm(PPM_SCALE as u32);

    pub fn new(ppm: u32) -> Option<Ppm> {
        (ppm as u64 <= PPM_SCALE).then_some(Ppm(ppm))
    }

    /// Nearest representable fraction; inputs are clamped into [0, 1].
    pub fn from_f64(f: f64) -> Ppm {
        let clamped = f.clamp(0.0, 1.0);
        Ppm((clamped * PPM_SCALE as f64).round() as u32)
    }

    pub fn ppm(&self) -> u32 {
        self.0
    }

    pub fn as_f64(&self) -> f64 {
        self.0 as f64 / PPM_SCALE as f64
    }

    /// 1 − q.
    pub fn complement(&self) -> Ppm {
        Ppm((PPM_SCALE - self.0 as u64) as u32)
    }

    /// ⌈q·n⌉ without going through floats: the number of approvals a
    /// quorum fraction demands from a board of `n`.
    pub fn ceil_count(&self, n: usize) -> usize {
        let num = self.0 as u128 * n as u128;
        num.div_ceil(PPM_SCALE as u128) as usize
    }

    /// round(q·amount), half away from zero.
    pub fn scale_round(&self, amount: u64) -> u64 {
        let num = self.0 as u128 * amount as u128;
        ((num + PPM_SCALE as u128 / 2) / PPM_SCALE as u128) as u64
    }
}

impl fmt::Display for Ppm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_f64())
    }
}

impl Canon for Ppm {
    fn encode(&self, w: &mut Writer) {
        w.u32(self.0);
    }
}

/// Split `total` into integer parts proportional to `weights`, with
/// largest-remainder rounding. The parts always sum to exactly `total`;
/// remainder ties go to the lower index. A zero weight vector splits
/// uniformly.
pub fn largest_remainder(total: u64, weights: &[u128]) -> Vec<u64> {
    if weights.is_empty() {
        return Vec::new();
    }
    let sum: u128 = weights.iter().sum();
    let uniform = vec![1u128; weights.len()];
    let weights = if sum == 0 { &uniform[..] } else { weights };
    let sum: u128 = weights.iter().sum();

    let mut parts = Vec::with_capacity(weights.len());
    let mut remainders = Vec::with_capacity(weights.len());
    let mut allocated: u64 = 0;
    for (i, &w) in weights.iter().enumerate() {
        let num = total as u128 * w;
        let floor = (num / sum) as u64;
        parts.push(floor);
        remainders.push((num % sum, i));
        allocated += floor;
    }
    // Hand out the leftover units to the largest fractional parts.
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut leftover = total - allocated;
    for &(_, i) in &remainders {
        if leftover == 0 {
            break;
        }
        parts[i] += 1;
        leftover -= 1;
    }
    parts
}
