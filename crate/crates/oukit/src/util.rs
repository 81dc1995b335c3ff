//! Small shared utilities: compensated summation, seed derivation, atomic file writes.

use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Neumaier-compensated accumulator. One running compensation term recovers
/// the low-order bits that plain summation drops, so pooled sums over millions
/// of transitions stay accurate to a few ulps.
#[derive(Debug, Clone, Copy, Default)]
pub struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// SplitMix64 finalizer: a bijection on u64 used to decorrelate derived seeds.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    z
}

/// Derives a child seed from a master seed, a purpose tag, and an index.
///
/// For a fixed master, distinct (tag, index) pairs with tag < 2^16 and
/// index < 2^48 map to distinct inputs of a bijective mixer, so derived
/// seeds are pairwise distinct by construction.
pub fn derive_seed(master: u64, tag: u16, index: u64) -> u64 {
    debug_assert!(index < 1 << 48);
    mix64(master ^ ((tag as u64) << 48 | (index & ((1 << 48) - 1))))
}

/// Writes a file atomically: the content goes to a temp file in the target's
/// directory, which is renamed over the destination only after a successful
/// write. On any error the destination is left untouched.
pub fn atomic_write(path: &Path, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        write(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path)
        .map_err(|e| Error::io(path, e.error))
        .map(|_| ())
}
