//! Conjugacy-class enumeration up to a length bound.
//!
//! Words up to a length bound are enumerated exhaustively and filtered by
//! translation length. Word-level canonical forms do not identify every
//! conjugate pair because of the octagon relation, so candidates with equal
//! length are compared geometrically: each is conjugated until its axis meets
//! the fundamental domain, after which two candidates are conjugate exactly
//! when some element of a bounded ball conjugates one onto the other.

use super::bolza::{circumradius, FundamentalDomain, GroupPresentation, BASE_POINT};
use super::mobius::{length_from_trace, Mobius};
use super::words::{cyclically_reduced_words, reduced_word_count, Word};
use super::{ConjClass, GeodesicRecord};
use crate::error::{Error, Result};
use crate::par::{self, ExecPolicy};

/// Lengths closer than this are treated as equal.
pub const LENGTH_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnumOptions {
    /// Identify a class with its orientation reversal.
    pub unoriented: bool,
    /// Extra word length on top of the default bound.
    pub extra_depth: usize,
    /// Maximum number of words the enumeration may visit.
    pub budget: u128,
    pub policy: ExecPolicy,
}

impl Default for EnumOptions {
    fn default() -> Self {
        Self { unoriented: false, extra_depth: 0, budget: 50_000_000, policy: ExecPolicy::Parallel }
    }
}

/// Word-length bound `ceil(L_max / ℓ_min) + 2`.
pub fn word_length_bound(group: &GroupPresentation, l_max: f64) -> usize {
    (l_max / group.min_generator_length()).ceil().max(0.0) as usize + 2
}

#[derive(Clone, Debug)]
struct Candidate {
    word: Word,
    length: f64,
    /// Conjugate of the word's matrix whose axis meets the domain.
    normal: Mobius,
}

pub fn enumerate_classes(
    group: &GroupPresentation,
    l_max: f64,
    opts: &EnumOptions,
) -> Result<Vec<GeodesicRecord>> {
    if !(l_max > 0.0) {
        return Err(Error::Precondition(format!("L_max must be positive, got {l_max}")));
    }
    let n_max = word_length_bound(group, l_max) + opts.extra_depth;
    let needed: u128 = (1..=n_max).map(reduced_word_count).sum();
    if needed > opts.budget {
        return Err(Error::Resource { needed, budget: opts.budget });
    }
    let fd = FundamentalDomain::new(group);

    // exhaustive scan, parallel over two-letter prefixes
    let mut prefixes: Vec<(usize, Vec<u8>)> = Vec::new();
    for n in 1..=n_max {
        if n == 1 {
            prefixes.extend((0..8u8).map(|l| (1, vec![l])));
        } else {
            for a in 0..8u8 {
                for b in 0..8u8 {
                    if b != super::words::inverse_letter(a) {
                        prefixes.push((n, vec![a, b]));
                    }
                }
            }
        }
    }
    let found: Vec<Vec<(Word, f64)>> = par::map(opts.policy, &prefixes, |(n, prefix)| {
        let mut out = Vec::new();
        for w in cyclically_reduced_words(*n, prefix) {
            let canon = w.canonical(opts.unoriented);
            if canon != w {
                continue;
            }
            if w.primitive_root().1 > 1 {
                continue;
            }
            let tr = group.eval_dd(&w).trace().to_f64();
            if let Ok(l) = length_from_trace(tr) {
                if l <= l_max + LENGTH_TOL {
                    out.push((w, l));
                }
            }
        }
        out
    });
    let mut raw: Vec<(Word, f64)> = found.into_iter().flatten().collect();
    raw.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));

    let clusters = cluster_by_length(&raw);
    let max_len = raw.last().map(|r| r.1).unwrap_or(0.0);
    let ball = fd.ball(2.0 * circumradius() + 0.5 * max_len + 0.1);

    // geometric deduplication inside each length cluster
    let cluster_reps: Vec<Vec<Candidate>> = par::map(opts.policy, &clusters, |range| {
        let mut members: Vec<Candidate> = raw[range.clone()]
            .iter()
            .map(|(w, l)| Candidate { word: w.clone(), length: *l, normal: normalize(&fd, &group.eval(w)) })
            .collect();
        members.sort_by(|a, b| a.word.cmp(&b.word));
        let mut reps: Vec<Candidate> = Vec::new();
        for c in members {
            if !reps.iter().any(|r| conjugate(&ball, &c.normal, &r.normal, c.length, opts.unoriented)) {
                reps.push(c);
            }
        }
        reps
    });

    // separate primitive classes from hidden proper powers, ascending in length
    let mut primitives: Vec<Candidate> = Vec::new();
    for reps in cluster_reps {
        for c in reps {
            let is_power = primitives.iter().any(|p| {
                let m = (c.length / p.length).round();
                m >= 2.0
                    && (c.length - m * p.length).abs() <= LENGTH_TOL * m
                    && conjugate(&ball, &c.normal, &p.normal.pow(m as u32), c.length, opts.unoriented)
            });
            if !is_power {
                primitives.push(c);
            }
        }
    }

    let mut records = Vec::new();
    for p in &primitives {
        let mut m = 1usize;
        while m as f64 * p.length <= l_max + LENGTH_TOL * m as f64 {
            let word = p.word.repeat(m);
            let matrix = group.eval(&word);
            let trace = group.eval_dd(&word).trace().to_f64();
            let length = length_from_trace(trace)?;
            records.push(GeodesicRecord {
                cls: ConjClass { word: word.canonical(opts.unoriented), primitive_root: p.word.clone(), m },
                matrix,
                trace,
                length,
                primitive_length: p.length,
                m,
            });
            m += 1;
        }
    }
    sort_records(&mut records);
    Ok(records)
}

/// Sorts by length cluster, then by word.
pub fn sort_records(records: &mut [GeodesicRecord]) {
    records.sort_by(|a, b| a.length.total_cmp(&b.length));
    let mut start = 0;
    while start < records.len() {
        let mut end = start + 1;
        while end < records.len() && records[end].length - records[end - 1].length <= LENGTH_TOL {
            end += 1;
        }
        records[start..end].sort_by(|a, b| a.cls.word.cmp(&b.cls.word));
        start = end;
    }
}

fn cluster_by_length(sorted: &[(Word, f64)]) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=sorted.len() {
        if i == sorted.len() || sorted[i].1 - sorted[i - 1].1 > LENGTH_TOL {
            if i > start {
                out.push(start..i);
            }
            start = i;
        }
    }
    out
}

/// Conjugate of `e` whose axis passes through the fundamental domain.
fn normalize(fd: &FundamentalDomain, e: &Mobius) -> Mobius {
    let ax = e.axis().expect("enumerated elements are hyperbolic");
    let p = ax.point(ax.foot(BASE_POINT));
    let (_, g) = fd.reduce(p);
    e.conjugate_by(&g.inverse())
}

fn same_map(a: &Mobius, b: &Mobius) -> bool {
    let scale = a.m.iter().flatten().fold(1.0f64, |s, v| s.max(v.abs()));
    a.dist(b) <= 1e-7 * scale
}

/// Whether normalized `a` and `b` of translation length `len` are conjugate
/// (or, if `unoriented`, `a` conjugate to `b^{±1}`).
fn conjugate(ball: &[Mobius], a: &Mobius, b: &Mobius, len: f64, unoriented: bool) -> bool {
    let r = 2.0 * circumradius() + 0.5 * len + 1e-6;
    let cosh_r = r.cosh();
    let b_inv = b.inverse();
    for g in ball {
        let c = g.apply(BASE_POINT);
        if super::mobius::hyp_cosh_dist(c, BASE_POINT) > cosh_r {
            break;
        }
        let conj = a.conjugate_by(g);
        if same_map(&conj, b) || (unoriented && same_map(&conj, &b_inv)) {
            return true;
        }
    }
    false
}

/// Whether two elements of the group are conjugate; brute force over a
/// conjugator ball large enough for elements of the given length.
pub fn are_conjugate(group: &GroupPresentation, a: &Mobius, b: &Mobius) -> bool {
    let (Ok(la), Ok(lb)) = (a.translation_length(), b.translation_length()) else {
        return false;
    };
    if (la - lb).abs() > LENGTH_TOL {
        return false;
    }
    let fd = FundamentalDomain::new(group);
    let ball = fd.ball(2.0 * circumradius() + 0.5 * la + 0.1);
    conjugate(&ball, &normalize(&fd, a), &normalize(&fd, b), la, false)
}
