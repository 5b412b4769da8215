//! Words over the alphabet `a b c d A B C D` (uppercase = inverse).
//!
//! Letters are ordered `a < b < c < d < A < B < C < D`; canonical forms are
//! lexicographic minima in that order.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

pub const ALPHABET: [char; 8] = ['a', 'b', 'c', 'd', 'A', 'B', 'C', 'D'];

#[inline]
pub fn inverse_letter(l: u8) -> u8 {
    (l + 4) % 8
}

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Word(pub Vec<u8>);

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({self})")
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &l in &self.0 {
            write!(f, "{}", ALPHABET[l as usize])?;
        }
        Ok(())
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shorter words first, then lexicographic.
impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl Word {
    pub fn parse(s: &str) -> Result<Self> {
        s.chars()
            .enumerate()
            .map(|(pos, c)| {
                ALPHABET
                    .iter()
                    .position(|&a| a == c)
                    .map(|p| p as u8)
                    .ok_or_else(|| Error::Parse { pos, msg: format!("letter '{c}' not in alphabet") })
            })
            .collect::<Result<Vec<_>>>()
            .map(Word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|&l| inverse_letter(l)).collect())
    }

    pub fn is_reduced(&self) -> bool {
        self.0.windows(2).all(|w| w[1] != inverse_letter(w[0]))
    }

    pub fn is_cyclically_reduced(&self) -> bool {
        self.is_reduced()
            && (self.0.len() < 2 || self.0[0] != inverse_letter(*self.0.last().unwrap()))
    }

    /// Free reduction followed by cancellation around the cycle.
    pub fn cyclic_reduce(&self) -> Word {
        let mut out: Vec<u8> = Vec::with_capacity(self.0.len());
        for &l in &self.0 {
            if out.last() == Some(&inverse_letter(l)) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        let (mut i, mut j) = (0, out.len());
        while j - i >= 2 && out[i] == inverse_letter(out[j - 1]) {
            i += 1;
            j -= 1;
        }
        Word(out[i..j].to_vec())
    }

    pub fn rotate(&self, k: usize) -> Word {
        let mut v = self.0.clone();
        if !v.is_empty() {
            let n = v.len();
            v.rotate_left(k % n);
        }
        Word(v)
    }

    fn min_rotation(&self) -> Word {
        (0..self.0.len().max(1)).map(|k| self.rotate(k)).min_by(|a, b| a.0.cmp(&b.0)).unwrap()
    }

    /// Minimal cyclic rotation; with `unoriented` also over the inverse word.
    pub fn canonical(&self, unoriented: bool) -> Word {
        let w = self.cyclic_reduce();
        let a = w.min_rotation();
        if unoriented {
            let b = w.inverse().min_rotation();
            if b.0 < a.0 {
                return b;
            }
        }
        a
    }

    pub fn repeat(&self, m: usize) -> Word {
        Word(self.0.repeat(m))
    }

    /// Shortest `r` with `self = r^k`, together with `k`.
    pub fn primitive_root(&self) -> (Word, usize) {
        let n = self.0.len();
        for p in 1..=n {
            if n % p == 0 && (p..n).all(|i| self.0[i] == self.0[i - p]) {
                return (Word(self.0[..p].to_vec()), n / p);
            }
        }
        (self.clone(), 1)
    }
}

/// All cyclically reduced words of length exactly `n` starting with `prefix`.
pub fn cyclically_reduced_words(n: usize, prefix: &[u8]) -> Vec<Word> {
    let mut out = Vec::new();
    let mut cur = prefix.to_vec();
    if !Word(cur.clone()).is_reduced() || cur.len() > n {
        return out;
    }
    fn rec(cur: &mut Vec<u8>, n: usize, out: &mut Vec<Word>) {
        if cur.len() == n {
            if n < 2 || cur[0] != inverse_letter(cur[n - 1]) {
                out.push(Word(cur.clone()));
            }
            return;
        }
        for l in 0..8u8 {
            if let Some(&last) = cur.last() {
                if l == inverse_letter(last) {
                    continue;
                }
            }
            cur.push(l);
            rec(cur, n, out);
            cur.pop();
        }
    }
    rec(&mut cur, n, &mut out);
    out
}

/// Number of reduced words of length `n` (an upper bound for the
/// cyclically reduced ones).
pub fn reduced_word_count(n: usize) -> u128 {
    if n == 0 {
        1
    } else {
        8 * 7u128.pow(n as u32 - 1)
    }
}
