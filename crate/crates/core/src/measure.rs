//! Finitely supported measures on the points of a space.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::space::FiniteMMS;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: usize,
    pub mass: f64,
}

/// A discrete measure, stored as atoms sorted by point with positive masses.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure")]
pub struct Measure {
    atoms: Vec<Atom>,
}

#[derive(Deserialize)]
struct RawMeasure {
    atoms: Vec<Atom>,
}

impl TryFrom<RawMeasure> for Measure {
    type Error = Error;

    fn try_from(raw: RawMeasure) -> Result<Self> {
        Measure::new(raw.atoms.into_iter().map(|a| (a.point, a.mass)))
    }
}

impl Measure {
    /// Merges repeated points and drops zero masses.
    pub fn new(atoms: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (p, m) in atoms {
            if !m.is_finite() || m < 0.0 {
                return Err(invalid("mass", format!("atom at point {p} has mass {m}")));
            }
            *acc.entry(p).or_insert(0.0) += m;
        }
        Ok(Self {
            atoms: acc
                .into_iter()
                .filter(|&(_, m)| m > 0.0)
                .map(|(point, mass)| Atom { point, mass })
                .collect(),
        })
    }

    pub fn dirac(point: usize) -> Self {
        Self {
            atoms: vec![Atom { point, mass: 1.0 }],
        }
    }

    /// The normalized restriction `m(A)^-1 m|_A`.
    pub fn normalized_restriction(space: &FiniteMMS, indices: &[usize]) -> Result<Self> {
        for &i in indices {
            space.check_index(i)?;
        }
        let total = space.mass_of(indices);
        if !(total > 0.0) {
            return Err(Error::EmptySupport);
        }
        Self::new(indices.iter().map(|&i| (i, space.weight(i) / total)))
    }

    pub fn from_dense(masses: &[f64]) -> Result<Self> {
        Self::new(masses.iter().copied().enumerate())
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn support(&self) -> Vec<usize> {
        self.atoms.iter().map(|a| a.point).collect()
    }

    pub fn masses(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.mass).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    pub fn mass_at(&self, point: usize) -> f64 {
        self.atoms
            .binary_search_by_key(&point, |a| a.point)
            .map(|k| self.atoms[k].mass)
            .unwrap_or(0.0)
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        for a in &self.atoms {
            if a.point < n {
                v[a.point] += a.mass;
            }
        }
        v
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.atoms.iter().map(|a| (a.point, a.mass * factor)))
    }

    pub fn normalized(&self) -> Result<Self> {
        let t = self.total();
        if !(t > 0.0) {
            return Err(Error::EmptySupport);
        }
        self.scaled(1.0 / t)
    }

    /// Image under a point map.
    pub fn pushforward(&self, perm: &[usize]) -> Result<Self> {
        Self::new(self.atoms.iter().map(|a| (perm[a.point], a.mass)))
    }

    pub fn check_support(&self, space: &FiniteMMS) -> Result<()> {
        for a in &self.atoms {
            space.check_index(a.point)?;
        }
        Ok(())
    }

    /// Largest pointwise mass difference.
    pub fn max_defect(&self, other: &Measure) -> f64 {
        let mut keys: Vec<usize> = self.support();
        keys.extend(other.support());
        keys.sort_unstable();
        keys.dedup();
        keys.iter()
            .map(|&p| (self.mass_at(p) - other.mass_at(p)).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merges_and_drops_zeros() {
        let m = Measure::new([(3, 0.25), (1, 0.5), (3, 0.25), (2, 0.0)]).unwrap();
        assert_eq!(m.support(), vec![1, 3]);
        assert_eq!(m.mass_at(3), 0.5);
        assert!(Measure::new([(0, -1.0)]).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let m: Measure =
            serde_json::from_str(r#"{"atoms":[{"point":2,"mass":0.5},{"point":0,"mass":0.5}]}"#)
                .unwrap();
        assert_eq!(m.support(), vec![0, 2]);
        let back: Measure = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<Measure>(r#"{"atoms":[{"point":0,"mass":-1}]}"#).is_err());
    }
}
