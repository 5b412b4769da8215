//! The regular-octagon surface group and its Dirichlet domain about `i`.

use std::collections::{HashSet, VecDeque};

use num_complex::Complex64;

use super::mobius::{hyp_cosh_dist, Dd, DdMat, Mobius};
use super::words::Word;

/// Side pairings and relation of the regular hyperbolic octagon.
#[derive(Clone, Debug)]
pub struct GroupPresentation {
    /// Letter matrices indexed like [`super::words::ALPHABET`].
    letters_dd: [DdMat; 8],
    letters: [Mobius; 8],
    pub relation: Word,
}

/// Trace of each generator, `2(1 + √2)`.
pub fn generator_trace() -> f64 {
    2.0 * (1.0 + std::f64::consts::SQRT_2)
}

/// Length of the shortest closed geodesic, `2 arccosh(1 + √2)`.
pub fn systole() -> f64 {
    2.0 * (1.0 + std::f64::consts::SQRT_2).acosh()
}

/// Radius of the inscribed circle of the octagon.
pub fn inradius() -> f64 {
    (1.0 + std::f64::consts::SQRT_2).acosh()
}

/// Radius of the circumscribed circle, `cosh R = (1 + √2)²`.
pub fn circumradius() -> f64 {
    let a = 1.0 + std::f64::consts::SQRT_2;
    (a * a).acosh()
}

pub fn bolza_generators() -> GroupPresentation {
    let sqrt2 = Dd::new(2.0).sqrt();
    let alpha = Dd::new(1.0).add(sqrt2);
    let beta = alpha.mul_f64(2.0).sqrt();
    let gamma = alpha.sqrt();
    let gens = [
        DdMat([[alpha.add(beta), Dd::ZERO], [Dd::ZERO, alpha.sub(beta)]]),
        DdMat([[alpha.add(gamma), gamma.neg()], [gamma.neg(), alpha.sub(gamma)]]),
        DdMat([[alpha, beta.neg()], [beta.neg(), alpha]]),
        DdMat([[alpha.sub(gamma), gamma.neg()], [gamma.neg(), alpha.add(gamma)]]),
    ];
    let letters_dd = [
        gens[0],
        gens[1],
        gens[2],
        gens[3],
        gens[0].inverse(),
        gens[1].inverse(),
        gens[2].inverse(),
        gens[3].inverse(),
    ];
    GroupPresentation {
        letters: letters_dd.map(|m| m.to_mobius()),
        letters_dd,
        relation: Word::parse("aBcDAbCd").expect("static word"),
    }
}

impl GroupPresentation {
    pub fn generators(&self) -> [Mobius; 4] {
        [self.letters[0], self.letters[1], self.letters[2], self.letters[3]]
    }

    pub fn letter(&self, l: u8) -> Mobius {
        self.letters[l as usize]
    }

    pub fn letter_dd(&self, l: u8) -> DdMat {
        self.letters_dd[l as usize]
    }

    pub fn eval_dd(&self, w: &Word) -> DdMat {
        w.0.iter().fold(DdMat::identity(), |acc, &l| acc.mul(&self.letters_dd[l as usize]))
    }

    pub fn eval(&self, w: &Word) -> Mobius {
        self.eval_dd(w).to_mobius()
    }

    /// Max-norm distance of the relation word from `±I`.
    pub fn relation_residual(&self) -> f64 {
        self.eval(&self.relation).dist(&Mobius::identity())
    }

    /// Smallest translation length among the generators.
    pub fn min_generator_length(&self) -> f64 {
        self.generators()
            .iter()
            .map(|g| super::mobius::length_of(g).expect("generators are hyperbolic"))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Dirichlet domain of the group centred at `i`.
#[derive(Clone, Debug)]
pub struct FundamentalDomain {
    pairings: [Mobius; 8],
    centers: [Complex64; 8],
}

pub const BASE_POINT: Complex64 = Complex64 { re: 0.0, im: 1.0 };

impl FundamentalDomain {
    pub fn new(group: &GroupPresentation) -> Self {
        let pairings = std::array::from_fn(|k| group.letter(k as u8));
        let centers = pairings.map(|p: Mobius| p.apply(BASE_POINT));
        Self { pairings, centers }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        let d0 = hyp_cosh_dist(z, BASE_POINT);
        self.centers.iter().all(|&c| hyp_cosh_dist(z, c) >= d0 * (1.0 - 1e-13))
    }

    /// Returns `(w, γ)` with `w` in the domain and `z = γ(w)`.
    pub fn reduce(&self, z: Complex64) -> (Complex64, Mobius) {
        let mut w = z;
        let mut g = Mobius::identity();
        for _ in 0..10_000 {
            let d0 = hyp_cosh_dist(w, BASE_POINT);
            let mut best = None;
            let mut best_d = d0 * (1.0 - 1e-13);
            for (k, &c) in self.centers.iter().enumerate() {
                let d = hyp_cosh_dist(w, c);
                if d < best_d {
                    best_d = d;
                    best = Some(k);
                }
            }
            match best {
                None => return (w, g),
                Some(k) => {
                    w = self.pairings[k].inverse().apply(w);
                    g = g.mul(&self.pairings[k]);
                }
            }
        }
        (w, g)
    }

    /// Group elements `γ` with `d(γ i, i) <= radius`, sorted by that distance.
    pub fn ball(&self, radius: f64) -> Vec<Mobius> {
        let reach = radius + circumradius();
        let cosh_reach = reach.cosh();
        let key = |z: Complex64| ((z.im.ln() * 1e5).round() as i64, ((z.re / z.im) * 1e5).round() as i64);
        let mut seen = HashSet::new();
        let mut queue = VecDeque::new();
        let mut out = Vec::new();
        seen.insert(key(BASE_POINT));
        queue.push_back(Mobius::identity());
        while let Some(g) = queue.pop_front() {
            let c = g.apply(BASE_POINT);
            let cd = hyp_cosh_dist(c, BASE_POINT);
            if cd <= radius.cosh() {
                out.push((cd, g));
            }
            for p in &self.pairings {
                let h = g.mul(p);
                let hc = h.apply(BASE_POINT);
                if hyp_cosh_dist(hc, BASE_POINT) > cosh_reach {
                    continue;
                }
                if seen.insert(key(hc)) {
                    queue.push_back(h);
                }
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out.into_iter().map(|(_, g)| g).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn generators_and_relation() {
        let g = bolza_generators();
        for e in g.generators() {
            assert_relative_eq!(e.trace(), generator_trace(), epsilon = 1e-12);
            assert!((e.det() - 1.0).abs() < 1e-14);
            assert!(e.is_hyperbolic());
        }
        assert!(g.relation_residual() < 1e-12);
        for l in 0..4u8 {
            let p = g.letter(l).mul(&g.letter(l + 4));
            assert!(p.dist(&Mobius::identity()) < 1e-14);
        }
        assert_relative_eq!(g.min_generator_length(), systole(), epsilon = 1e-13);
        assert_relative_eq!(systole(), 3.0571418389619964, epsilon = 1e-15);
    }

    #[test]
    fn generators_translate_base_point_by_twice_the_inradius() {
        let g = bolza_generators();
        for l in 0..8u8 {
            let d = super::super::mobius::hyp_dist(g.letter(l).apply(BASE_POINT), BASE_POINT);
            assert_relative_eq!(d, 2.0 * inradius(), epsilon = 1e-12);
        }
    }

    #[test]
    fn reduction_lands_in_domain() {
        let g = bolza_generators();
        let f = FundamentalDomain::new(&g);
        for k in 0..50 {
            let z = Complex64::new(-3.0 + 0.13 * k as f64, 0.05 + 0.07 * k as f64);
            let (w, gam) = f.reduce(z);
            assert!(f.contains(w));
            assert!((gam.apply(w) - z).norm() < 1e-9 * (1.0 + z.norm()));
            assert!(super::super::mobius::hyp_dist(w, BASE_POINT) <= circumradius() + 1e-9);
        }
    }

    #[test]
    fn ball_is_sorted_and_complete_for_small_radius() {
        let g = bolza_generators();
        let f = FundamentalDomain::new(&g);
        let b = f.ball(2.0 * inradius() + 1e-6);
        // identity plus the eight neighbours
        assert_eq!(b.len(), 9);
        assert!(b[0].dist(&Mobius::identity()) < 1e-15);
    }
}
