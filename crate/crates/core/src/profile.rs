//! Piecewise-constant crossing-count field over heights.
//!
//! `LocalTimeProfile` maintains the map `t ↦ number of completed path
//! segments covering height t`. Each linear segment of the exploration path,
//! rising or falling, contributes one crossing on the half-open interval
//! `[lower endpoint, upper endpoint)`. This reproduces the crossing-count
//! convention in which a local minimum counts twice and a local maximum not
//! at all, and gives every completed tree exactly two crossings at height 0.
//!
//! The unscaled local time is `count(t) / (2N)`; multiplying by `4/σ²` gives
//! the scaled, semimartingale-normalized version.

use std::collections::BTreeMap;
use std::ops::Bound;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("invalid interval [{lo}, {hi}): lo must satisfy 0 <= lo < hi")]
    InvalidInterval { lo: f64, hi: f64 },
}

/// Height key with a total order. Heights are finite and nonnegative by
/// construction; `-0.0` is normalized so it cannot split the key at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Height(f64);

impl Height {
    fn new(h: f64) -> Self {
        Height(h + 0.0)
    }
}

impl Eq for Height {}

impl PartialOrd for Height {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Height {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// A maximal constant piece of the count function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub lo: f64,
    /// `None` for the final unbounded piece, whose count is always 0.
    pub hi: Option<f64>,
    pub count: u32,
}

/// Step function `count: [0, ∞) → ℕ` with compact support, backed by an
/// ordered map from breakpoint to the count on `[breakpoint, next)`.
/// Neighboring pieces with the same count are coalesced.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTimeProfile {
    pieces: BTreeMap<Height, u32>,
}

impl Default for LocalTimeProfile {
    fn default() -> Self {
        Self::new()
    }
}

impl LocalTimeProfile {
    pub fn new() -> Self {
        let mut pieces = BTreeMap::new();
        pieces.insert(Height::new(0.0), 0);
        LocalTimeProfile { pieces }
    }

    /// Crossing count at height `t` (right-continuous step convention).
    /// Heights below 0 have count 0.
    pub fn query(&self, t: f64) -> u32 {
        self.pieces
            .range(..=Height::new(t))
            .next_back()
            .map_or(0, |(_, &c)| c)
    }

    /// Increments the count by one on `[lo, hi)`.
    pub fn add_segment(&mut self, lo: f64, hi: f64) -> Result<(), ProfileError> {
        if !lo.is_finite() || !hi.is_finite() || lo < 0.0 || lo >= hi {
            return Err(ProfileError::InvalidInterval { lo, hi });
        }
        let lo = Height::new(lo);
        let hi = Height::new(hi);
        self.ensure_key(lo);
        self.ensure_key(hi);
        for (_, c) in self.pieces.range_mut(lo..hi) {
            *c += 1;
        }
        self.coalesce_at(hi);
        self.coalesce_at(lo);
        Ok(())
    }

    /// Splits the piece containing `key` so that `key` becomes a breakpoint.
    fn ensure_key(&mut self, key: Height) {
        if !self.pieces.contains_key(&key) {
            let c = self.query(key.0);
            self.pieces.insert(key, c);
        }
    }

    /// Removes `key` if its piece now carries the same count as its
    /// predecessor. The breakpoint at 0 is kept as a sentinel.
    fn coalesce_at(&mut self, key: Height) {
        if key.0 == 0.0 {
            return;
        }
        let Some(&c) = self.pieces.get(&key) else {
            return;
        };
        let prev = self
            .pieces
            .range((Bound::Unbounded, Bound::Excluded(key)))
            .next_back()
            .map(|(_, &p)| p);
        if prev == Some(c) {
            self.pieces.remove(&key);
        }
    }

    /// `scale · Σ countᵢ · (tᵢ₊₁ − tᵢ)`. With `scale = 1/(2N)` this is
    /// `∫ Λ(t) dt`, the elapsed exploration time by the occupation formula.
    pub fn integral(&self, scale: f64) -> f64 {
        self.mass_between(0.0, f64::INFINITY) * scale
    }

    /// `Σ count · length` over `[lo, hi)`, exact on the constant pieces.
    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        if lo >= hi {
            return 0.0;
        }
        let mut total = 0.0;
        for piece in self.pieces_from(lo.max(0.0)) {
            let hi_p = match piece.hi {
                Some(h) => h.min(hi),
                None => {
                    // the unbounded piece has count 0 and contributes nothing
                    debug_assert_eq!(piece.count, 0);
                    break;
                }
            };
            if piece.lo < hi_p {
                total += piece.count as f64 * (hi_p - piece.lo);
            }
            if piece.hi.unwrap() >= hi {
                break;
            }
        }
        total
    }

    /// Maximal constant pieces of the count on `[h, ∞)` in increasing order,
    /// ending with the unbounded zero piece.
    pub fn pieces_from(&self, h: f64) -> PiecesFrom<'_> {
        let start = Height::new(h.max(0.0));
        PiecesFrom {
            cur_lo: start.0,
            cur_count: self.query(start.0),
            rest: self
                .pieces
                .range((Bound::Excluded(start), Bound::Unbounded)),
            done: false,
        }
    }

    /// Breakpoints and counts, for serialization.
    pub fn breakpoints(&self) -> impl Iterator<Item = (f64, u32)> + '_ {
        self.pieces.iter().map(|(h, &c)| (h.0, c))
    }

    /// Upper end of the support: counts vanish on `[support_end, ∞)`.
    pub fn support_end(&self) -> f64 {
        self.pieces.iter().next_back().map_or(0.0, |(h, _)| h.0)
    }
}

pub struct PiecesFrom<'a> {
    cur_lo: f64,
    cur_count: u32,
    rest: std::collections::btree_map::Range<'a, Height, u32>,
    done: bool,
}

impl Iterator for PiecesFrom<'_> {
    type Item = Piece;

    fn next(&mut self) -> Option<Piece> {
        if self.done {
            return None;
        }
        match self.rest.next() {
            Some((h, &c)) => {
                let piece = Piece {
                    lo: self.cur_lo,
                    hi: Some(h.0),
                    count: self.cur_count,
                };
                self.cur_lo = h.0;
                self.cur_count = c;
                Some(piece)
            }
            None => {
                self.done = true;
                Some(Piece {
                    lo: self.cur_lo,
                    hi: None,
                    count: self.cur_count,
                })
            }
        }
    }
}
