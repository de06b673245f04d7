//! Finite metric measure spaces.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Absolute slack used when checking the triangle inequality.
pub const TRIANGLE_TOL: f64 = 1e-9;

/// Provenance of a space: which generator built it, with which parameters,
/// and the discretization pitch it was built at.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Meta {
    pub generator: String,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pitch: Option<f64>,
}

impl Meta {
    pub fn new(
        generator: impl Into<String>,
        params: serde_json::Value,
        pitch: Option<f64>,
    ) -> Self {
        Self {
            generator: generator.into(),
            params,
            pitch,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Point {
    pub id: usize,
    pub coords: Option<Vec<f64>>,
    pub label: Option<String>,
}

impl Point {
    pub fn at(id: usize, coords: Vec<f64>) -> Self {
        Self {
            id,
            coords: Some(coords),
            label: None,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }
}

/// A finite metric measure space: points, a dense distance matrix and
/// positive point masses.
///
/// Construction only checks shapes. Metric axioms and positivity are
/// reported by [`FiniteMMS::validate`], so that broken inputs can still be
/// loaded and diagnosed.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMMS {
    points: Vec<Point>,
    dist: Vec<f64>,
    weights: Vec<f64>,
    meta: Meta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BallKind {
    Open,
    #[default]
    Closed,
}

/// A ball viewed as a space of its own, remembering where its points came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: usize,
    pub radius: f64,
    pub indices: Vec<usize>,
    pub space: FiniteMMS,
}

impl Ball {
    pub fn mass(&self) -> f64 {
        self.space.total_mass()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NonZeroDiagonal {
        i: usize,
        value: f64,
    },
    Asymmetric {
        i: usize,
        j: usize,
        defect: f64,
    },
    NegativeDistance {
        i: usize,
        j: usize,
        value: f64,
    },
    NonFinite {
        i: usize,
        j: usize,
    },
    Triangle {
        i: usize,
        j: usize,
        k: usize,
        defect: f64,
    },
    NonPositiveWeight {
        i: usize,
        value: f64,
    },
    InfiniteMass,
}

/// Result of [`FiniteMMS::validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Listed violations; triangle violations are capped at [`Diagnostics::TRIANGLE_LIST_CAP`].
    pub violations: Vec<Violation>,
    pub triangle_violations: usize,
    /// Largest `d(i,k) - d(i,j) - d(j,k)` over all triples (0 if none positive).
    pub worst_triangle_defect: f64,
}

impl Diagnostics {
    pub const TRIANGLE_LIST_CAP: usize = 64;

    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl FiniteMMS {
    pub fn new(
        points: Vec<Point>,
        dist: Vec<Vec<f64>>,
        weights: Vec<f64>,
        meta: Meta,
    ) -> Result<Self> {
        let n = points.len();
        if dist.len() != n || dist.iter().any(|row| row.len() != n) {
            return Err(invalid("dist", format!("expected a {n}x{n} matrix")));
        }
        if weights.len() != n {
            return Err(invalid(
                "weights",
                format!("expected {n} weights, got {}", weights.len()),
            ));
        }
        Ok(Self {
            points,
            dist: dist.into_iter().flatten().collect(),
            weights,
            meta,
        })
    }

    /// Builds a space from a distance function evaluated on every ordered pair.
    pub fn from_fn(
        points: Vec<Point>,
        weights: Vec<f64>,
        meta: Meta,
        d: impl Fn(usize, usize) -> f64,
    ) -> Result<Self> {
        let n = points.len();
        if weights.len() != n {
            return Err(invalid(
                "weights",
                format!("expected {n} weights, got {}", weights.len()),
            ));
        }
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = d(i, j);
                dist[i * n + j] = v;
                dist[j * n + i] = v;
            }
        }
        Ok(Self {
            points,
            dist,
            weights,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.len();
        &self.dist[i * n..(i + 1) * n]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn meta(&self) -> &Meta {
        &self.meta
    }

    pub fn pitch(&self) -> Option<f64> {
        self.meta.pitch
    }

    pub fn coords(&self, i: usize) -> Option<&[f64]> {
        self.points[i].coords.as_deref()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn mass_of(&self, indices: &[usize]) -> f64 {
        indices.iter().map(|&i| self.weights[i]).sum()
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    pub fn check_index(&self, index: usize) -> Result<()> {
        if index < self.len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index,
                len: self.len(),
            })
        }
    }

    /// Index of the point nearest to `target` in ambient coordinates.
    pub fn nearest_point(&self, target: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in self.points.iter().enumerate() {
            let Some(c) = &p.coords else { continue };
            if c.len() != target.len() {
                continue;
            }
            let d: f64 = c.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best.map(|(i, _)| i)
    }

    /// Restriction to the listed points, in the given order.
    pub fn subspace(&self, indices: &[usize]) -> FiniteMMS {
        let points = indices
            .iter()
            .enumerate()
            .map(|(k, &i)| Point {
                id: k,
                ..self.points[i].clone()
            })
            .collect();
        let weights = indices.iter().map(|&i| self.weights[i]).collect();
        let m = indices.len();
        let mut dist = vec![0.0; m * m];
        for (a, &i) in indices.iter().enumerate() {
            for (b, &j) in indices.iter().enumerate() {
                dist[a * m + b] = self.dist(i, j);
            }
        }
        FiniteMMS {
            points,
            dist,
            weights,
            meta: self.meta.clone(),
        }
    }

    pub fn validate(&self) -> Diagnostics {
        let n = self.len();
        let mut violations = Vec::new();
        for i in 0..n {
            let dii = self.dist(i, i);
            if dii != 0.0 {
                violations.push(Violation::NonZeroDiagonal { i, value: dii });
            }
            for j in (i + 1)..n {
                let (a, b) = (self.dist(i, j), self.dist(j, i));
                if !a.is_finite() || !b.is_finite() {
                    violations.push(Violation::NonFinite { i, j });
                    continue;
                }
                if a < 0.0 || b < 0.0 {
                    violations.push(Violation::NegativeDistance {
                        i,
                        j,
                        value: a.min(b),
                    });
                }
                if (a - b).abs() > TRIANGLE_TOL {
                    violations.push(Violation::Asymmetric {
                        i,
                        j,
                        defect: (a - b).abs(),
                    });
                }
            }
        }
        let mut worst = 0.0f64;
        let mut count = 0usize;
        for i in 0..n {
            let ri = self.row(i);
            for j in 0..n {
                let dij = ri[j];
                let rj = self.row(j);
                for k in 0..n {
                    let defect = ri[k] - dij - rj[k];
                    if defect > worst {
                        worst = defect;
                    }
                    if defect > TRIANGLE_TOL {
                        count += 1;
                        if count <= Diagnostics::TRIANGLE_LIST_CAP {
                            violations.push(Violation::Triangle { i, j, k, defect });
                        }
                    }
                }
            }
        }
        for (i, &w) in self.weights.iter().enumerate() {
            if !(w > 0.0) || !w.is_finite() {
                violations.push(Violation::NonPositiveWeight { i, value: w });
            }
        }
        if !self.total_mass().is_finite() {
            violations.push(Violation::InfiniteMass);
        }
        Diagnostics {
            violations,
            triangle_violations: count,
            worst_triangle_defect: worst,
        }
    }

    /// Divides every distance by `factor`, i.e. the rescaled space `(X, d/factor)`.
    pub fn scale(&self, factor: f64) -> Result<FiniteMMS> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(invalid("factor", "must be positive and finite"));
        }
        let mut out = self.clone();
        for d in &mut out.dist {
            *d /= factor;
        }
        out.meta.pitch = self.meta.pitch.map(|p| p / factor);
        Ok(out)
    }

    pub fn ball_indices(&self, center: usize, radius: f64, kind: BallKind) -> Vec<usize> {
        self.row(center)
            .iter()
            .enumerate()
            .filter(|(_, &d)| match kind {
                BallKind::Open => d < radius,
                BallKind::Closed => d <= radius,
            })
            .map(|(i, _)| i)
            .collect()
    }

    pub fn ball_mass(&self, center: usize, radius: f64, kind: BallKind) -> f64 {
        self.row(center)
            .iter()
            .zip(&self.weights)
            .filter(|(&d, _)| match kind {
                BallKind::Open => d < radius,
                BallKind::Closed => d <= radius,
            })
            .map(|(_, w)| w)
            .sum()
    }

    pub fn ball(&self, center: usize, radius: f64, kind: BallKind) -> Result<Ball> {
        self.check_index(center)?;
        if !(radius > 0.0) {
            return Err(invalid("radius", "must be positive"));
        }
        let indices = self.ball_indices(center, radius, kind);
        if indices.is_empty() {
            return Err(Error::EmptyBall { center, radius });
        }
        let space = self.subspace(&indices);
        Ok(Ball {
            center,
            radius,
            indices,
            space,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point(d: f64) -> FiniteMMS {
        FiniteMMS::new(
            vec![
                Point::default(),
                Point {
                    id: 1,
                    ..Default::default()
                },
            ],
            vec![vec![0.0, d], vec![d, 0.0]],
            vec![1.0, 1.0],
            Meta::default(),
        )
        .unwrap()
    }

    #[test]
    fn minimal_space_is_valid() {
        assert!(two_point(1.0).validate().is_valid());
    }

    #[test]
    fn triangle_violation_reports_defect() {
        let d = vec![
            vec![0.0, 1.0, 5.0],
            vec![1.0, 0.0, 1.0],
            vec![5.0, 1.0, 0.0],
        ];
        let pts = (0..3)
            .map(|id| Point {
                id,
                ..Default::default()
            })
            .collect();
        let s = FiniteMMS::new(pts, d, vec![1.0; 3], Meta::default()).unwrap();
        let diag = s.validate();
        assert!(!diag.is_valid());
        assert!((diag.worst_triangle_defect - 3.0).abs() < 1e-15);
        assert!(diag.violations.iter().any(
            |v| matches!(v, Violation::Triangle { defect, .. } if (*defect - 3.0).abs() < 1e-15)
        ));
    }

    #[test]
    fn nonpositive_weight_is_reported() {
        let mut s = two_point(1.0);
        s.weights[1] = 0.0;
        assert!(s
            .validate()
            .violations
            .contains(&Violation::NonPositiveWeight { i: 1, value: 0.0 }));
    }

    #[test]
    fn scale_divides_distances() {
        let s = two_point(1.0);
        assert_eq!(s.scale(1.0).unwrap(), s);
        assert_eq!(s.scale(0.5).unwrap().dist(0, 1), 2.0);
        assert!(s.scale(0.0).is_err());
        assert!(s.scale(-1.0).is_err());
    }

    #[test]
    fn ball_extremes() {
        let s = two_point(1.0);
        assert_eq!(
            s.ball(0, 10.0, BallKind::Closed).unwrap().indices,
            vec![0, 1]
        );
        assert_eq!(s.ball(0, 0.5, BallKind::Closed).unwrap().indices, vec![0]);
        assert_eq!(s.ball(0, 1.0, BallKind::Open).unwrap().indices, vec![0]);
        assert_eq!(
            s.ball(0, 1.0, BallKind::Closed).unwrap().indices,
            vec![0, 1]
        );
        assert!(s.ball(0, 0.0, BallKind::Closed).is_err());
        assert!(s.ball(5, 1.0, BallKind::Closed).is_err());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let r = FiniteMMS::new(
            vec![Point::default()],
            vec![vec![0.0, 1.0]],
            vec![1.0],
            Meta::default(),
        );
        assert!(r.is_err());
    }
}
