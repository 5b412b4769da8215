//! Genus-two hyperbolic surface as a quotient of the upper half-plane.

pub mod bolza;
pub mod enumerate;
pub mod invariant;
pub mod mobius;
pub mod words;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use bolza::{bolza_generators, systole, FundamentalDomain, GroupPresentation};
pub use enumerate::{enumerate_classes, EnumOptions, LENGTH_TOL};
pub use mobius::{length_of, Axis, Mobius};
pub use words::Word;

use crate::dynamics::PhasePoint;
use crate::error::{Error, Result};

/// A conjugacy class: canonical word, primitive root and exponent.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConjClass {
    pub word: Word,
    pub primitive_root: Word,
    pub m: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicRecord {
    pub cls: ConjClass,
    pub matrix: Mobius,
    pub trace: f64,
    pub length: f64,
    pub primitive_length: f64,
    pub m: usize,
}

impl GeodesicRecord {
    /// `L# / |det(I - P^m)|` for curvature `-1`.
    pub fn weight_constant_curvature(&self) -> f64 {
        self.primitive_length / det_weight_constant_curvature(self.length).expect("positive length")
    }

    pub fn primitive_matrix(&self, group: &GroupPresentation) -> Mobius {
        group.eval(&self.cls.primitive_root)
    }
}

/// Serialized catalog row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub word: String,
    pub trace: f64,
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "L_primitive")]
    pub primitive_length: f64,
    pub m: usize,
    pub weight: f64,
}

impl CatalogEntry {
    pub fn from_record(r: &GeodesicRecord) -> Self {
        Self {
            word: r.cls.word.to_string(),
            trace: r.trace,
            length: r.length,
            primitive_length: r.primitive_length,
            m: r.m,
            weight: r.weight_constant_curvature(),
        }
    }

    /// Rebuilds the record, recomputing the matrix from the word.
    pub fn to_record(&self, group: &GroupPresentation) -> Result<GeodesicRecord> {
        let word = Word::parse(&self.word)?;
        let (root, m) = word.primitive_root();
        if m != self.m {
            return Err(Error::IncompleteCatalog(format!(
                "entry {} declares m = {} but the word is a {}-th power",
                self.word, self.m, m
            )));
        }
        Ok(GeodesicRecord {
            matrix: group.eval(&word),
            cls: ConjClass { word, primitive_root: root, m },
            trace: self.trace,
            length: self.length,
            primitive_length: self.primitive_length,
            m: self.m,
        })
    }
}

/// `|det(I - P^m)| = 4 sinh²(L/2)` in curvature `-1`, `L` the iterate length.
pub fn det_weight_constant_curvature(l: f64) -> Result<f64> {
    if !(l > 0.0) {
        return Err(Error::Precondition(format!("length must be positive, got {l}")));
    }
    let s = (0.5 * l).sinh();
    Ok(4.0 * s * s)
}

/// `n` equally spaced phase points along one period of the axis of `e`,
/// starting at the foot of the perpendicular from `i`.
pub fn axis_seed(e: &Mobius, n: usize) -> Result<Vec<PhasePoint>> {
    if n < 8 {
        return Err(Error::Precondition(format!("axis seed needs n >= 8, got {n}")));
    }
    let ax = e.axis()?;
    let l = length_of(e)?;
    let s0 = ax.foot(Complex64::new(0.0, 1.0));
    Ok((0..n)
        .map(|k| {
            let s = s0 + l * k as f64 / n as f64;
            let z = ax.point(s);
            PhasePoint::new(z.re, z.im, ax.angle(s))
        })
        .collect())
}
