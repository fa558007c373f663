use serde::Serialize;

use crate::dynamics::{LogProduct, Point, SkewProductMap};
use crate::error::{Error, Result};
use crate::measures::dictionary::{OrbitAccumulator, TestDictionary};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Atom {
    pub point: Point,
    pub weight: f64,
}

/// A probability measure represented by weighted atoms, or only by its
/// moment vector when it was accumulated in streaming mode.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmpiricalMeasure {
    degree: usize,
    /// Empty for streamed measures.
    atoms: Vec<Atom>,
    moments: Vec<f64>,
}

impl EmpiricalMeasure {
    /// Normalizes the weights to sum 1 and caches the moments.
    pub fn from_atoms(mut atoms: Vec<Atom>, dict: &TestDictionary) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        if atoms.iter().any(|a| !(a.weight >= 0.0) || !a.weight.is_finite()) {
            return Err(crate::error::invalid(
                "weight",
                "atom weights must be finite and nonnegative",
            ));
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if total <= 0.0 {
            return Err(Error::EmptyMeasure);
        }
        atoms.iter_mut().for_each(|a| a.weight /= total);
        let moments = atom_moments(&atoms, dict);
        Ok(Self {
            degree: dict.max_degree(),
            atoms,
            moments,
        })
    }

    /// Equal-weight atoms.
    pub fn uniform(points: &[Point], dict: &TestDictionary) -> Result<Self> {
        let atoms = points.iter().map(|&point| Atom { point, weight: 1.0 }).collect();
        Self::from_atoms(atoms, dict)
    }

    pub fn dirac(point: Point, dict: &TestDictionary) -> Self {
        Self {
            degree: dict.max_degree(),
            atoms: vec![Atom { point, weight: 1.0 }],
            moments: dict.eval(point),
        }
    }

    /// A streamed measure known only through its moments.
    pub fn from_moments(moments: Vec<f64>, dict: &TestDictionary) -> Result<Self> {
        if moments.len() != dict.len() {
            return Err(crate::error::invalid(
                "moments",
                format!("expected {} moments, got {}", dict.len(), moments.len()),
            ));
        }
        Ok(Self {
            degree: dict.max_degree(),
            atoms: Vec::new(),
            moments,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn is_streamed(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn moments(&self) -> &[f64] {
        &self.moments
    }

    /// Recompute the moments from the atoms (streamed measures return the
    /// cached vector).
    pub fn recompute_moments(&self, dict: &TestDictionary) -> Vec<f64> {
        if self.atoms.is_empty() {
            self.moments.clone()
        } else {
            atom_moments(&self.atoms, dict)
        }
    }

    /// Convex combination `Σ cᵢ μᵢ` of measures on the same dictionary;
    /// atoms are concatenated when every part carries them.
    pub fn mixture(parts: &[(f64, &EmpiricalMeasure)], dict: &TestDictionary) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        for (_, m) in parts {
            check_degree(m.degree, dict.max_degree())?;
        }
        let total: f64 = parts.iter().map(|(c, _)| c).sum();
        if total <= 0.0 || parts.iter().any(|(c, _)| *c < 0.0) {
            return Err(crate::error::invalid(
                "weights",
                "mixture weights must be nonnegative with positive sum",
            ));
        }
        let mut moments = vec![0.0; dict.len()];
        for (c, m) in parts {
            for (acc, x) in moments.iter_mut().zip(&m.moments) {
                *acc += c / total * x;
            }
        }
        let atoms = if parts.iter().all(|(_, m)| !m.is_streamed()) {
            parts
                .iter()
                .flat_map(|(c, m)| {
                    m.atoms.iter().map(move |a| Atom {
                        point: a.point,
                        weight: a.weight * c / total,
                    })
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok(Self {
            degree: dict.max_degree(),
            atoms,
            moments,
        })
    }
}

fn atom_moments(atoms: &[Atom], dict: &TestDictionary) -> Vec<f64> {
    let mut out = vec![0.0; dict.len()];
    let mut buf = vec![0.0; dict.len()];
    for a in atoms {
        dict.eval_into(a.point, &mut buf);
        for (o, b) in out.iter_mut().zip(&buf) {
            *o += a.weight * b;
        }
    }
    out
}

fn check_degree(left: usize, right: usize) -> Result<()> {
    if left != right {
        Err(Error::DictionaryMismatch { left, right })
    } else {
        Ok(())
    }
}

/// Weighted `ℓ²` distance between moment vectors: the weak-topology proxy.
pub fn weak_distance(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, dict: &TestDictionary) -> Result<f64> {
    check_degree(mu.degree, nu.degree)?;
    check_degree(mu.degree, dict.max_degree())?;
    Ok(dict.distance(&mu.moments, &nu.moments))
}

/// Birkhoff moments of an orbit at the full horizon and at its midpoint.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BirkhoffMoments {
    pub n: usize,
    pub full: Vec<f64>,
    pub half: Vec<f64>,
    /// Central Lyapunov estimate along the same orbit.
    pub lambda_hat: f64,
}

/// Time averages of the dictionary along `orbit(x0, n)` (the first `n`
/// points), with a checkpoint after `n / 2` points.
pub fn birkhoff_moments(map: &SkewProductMap, x0: Point, n: usize, dict: &TestDictionary) -> Result<BirkhoffMoments> {
    let mut acc = OrbitAccumulator::new(dict);
    birkhoff_moments_with(map, x0, n, dict, &mut acc)
}

/// As [`birkhoff_moments`], reusing an accumulator.
pub fn birkhoff_moments_with(
    map: &SkewProductMap,
    x0: Point,
    n: usize,
    dict: &TestDictionary,
    acc: &mut OrbitAccumulator,
) -> Result<BirkhoffMoments> {
    if n < 2 {
        return Err(crate::error::invalid("n", "Birkhoff horizon must be at least 2"));
    }
    acc.reset();
    let half_n = n / 2;
    let mut half = Vec::new();
    let mut x = map.normalize(x0);
    let mut log_sum = LogProduct::default();
    for i in 0..n {
        if i == half_n {
            half = acc.moments(dict);
        }
        let (s, c) = (std::f64::consts::TAU * x.theta).sin_cos();
        acc.push(s, c, x.t);
        let (next, dc) = map.step_given_cos(x, c);
        log_sum.push(dc);
        x = next;
    }
    Ok(BirkhoffMoments {
        n,
        full: acc.moments(dict),
        half,
        lambda_hat: log_sum.total() / n as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_moment_is_one() {
        let d = TestDictionary::default();
        let f = SkewProductMap::kan_cylinder(3, 0.5).unwrap();
        let b = birkhoff_moments(&f, Point::new(0.123, 0.4), 1000, &d).unwrap();
        assert!((b.full[0] - 1.0).abs() < 1e-15);
        assert!((b.half[0] - 1.0).abs() < 1e-15);
        assert!(birkhoff_moments(&f, Point::new(0.1, 0.1), 1, &d).is_err());
    }

    #[test]
    fn fixed_point_moments_are_function_values() {
        let d = TestDictionary::default();
        let f = SkewProductMap::kan_cylinder(3, 0.5).unwrap();
        let p = Point::new(0.0, 0.0);
        let b = birkhoff_moments(&f, p, 64, &d).unwrap();
        let v = d.eval(p);
        // binning error of the accumulator is below 1e-6
        assert!(d.distance(&b.full, &v) < 1e-6);
    }

    #[test]
    fn product_map_base_moment_decays() {
        let d = TestDictionary::default();
        let f = SkewProductMap::kan_cylinder(3, 0.0).unwrap();
        let n = 100_000;
        let b = birkhoff_moments(&f, Point::new(0.2718281828, 0.3), n, &d).unwrap();
        // cos(2πθ) is index 1
        assert!(b.full[1].abs() < 3.0 / (n as f64).sqrt(), "{}", b.full[1]);
        assert_eq!(b.lambda_hat, 0.0);
    }

    #[test]
    fn weak_distance_axioms_and_closed_form() {
        let d = TestDictionary::default();
        let a = EmpiricalMeasure::dirac(Point::new(0.0, 0.0), &d);
        let b = EmpiricalMeasure::dirac(Point::new(0.5, 0.0), &d);
        assert_eq!(weak_distance(&a, &a, &d).unwrap(), 0.0);
        // the cos terms differ by 1 − (−1)^k = 2 for odd k; sin terms vanish
        let mut expected = 0.0;
        for &(k, l) in d.pairs() {
            if k % 2 != 0 {
                expected += 4.0 / f64::from(1 + k * k + l * l);
            }
        }
        assert!((weak_distance(&a, &b, &d).unwrap() - expected.sqrt()).abs() < 1e-12);
        let other = TestDictionary::new(3);
        let c = EmpiricalMeasure::dirac(Point::new(0.5, 0.0), &other);
        assert!(matches!(
            weak_distance(&a, &c, &d),
            Err(Error::DictionaryMismatch { .. })
        ));
    }

    #[test]
    fn triangle_inequality_on_random_triples() {
        use rand::Rng;
        let d = TestDictionary::new(4);
        let mut rng = crate::seed::rng(5);
        let random_measure = |rng: &mut rand_chacha::ChaCha8Rng| {
            let pts: Vec<Point> = (0..5).map(|_| Point::new(rng.gen(), rng.gen())).collect();
            EmpiricalMeasure::uniform(&pts, &d).unwrap()
        };
        for _ in 0..100 {
            let (a, b, c) = (
                random_measure(&mut rng),
                random_measure(&mut rng),
                random_measure(&mut rng),
            );
            let ab = weak_distance(&a, &b, &d).unwrap();
            let bc = weak_distance(&b, &c, &d).unwrap();
            let ac = weak_distance(&a, &c, &d).unwrap();
            assert!(ac <= ab + bc + 1e-12);
            assert!((ab - weak_distance(&b, &a, &d).unwrap()).abs() < 1e-15);
        }
    }

    #[test]
    fn recompute_is_consistent() {
        let d = TestDictionary::new(3);
        let atoms = vec![
            Atom {
                point: Point::new(0.1, 0.2),
                weight: 2.0,
            },
            Atom {
                point: Point::new(0.7, 0.9),
                weight: 6.0,
            },
        ];
        let m = EmpiricalMeasure::from_atoms(atoms, &d).unwrap();
        assert!((m.atoms()[0].weight - 0.25).abs() < 1e-15);
        assert!(d.distance(m.moments(), &m.recompute_moments(&d)) < 1e-15);
        assert!(EmpiricalMeasure::from_atoms(vec![], &d).is_err());
    }
}
