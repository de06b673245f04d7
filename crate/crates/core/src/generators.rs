//! Example spaces at finite resolution: the weighted segment, circles, wedges
//! of circles, necklaces of flat diamonds, and Euclidean grid balls.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::Range;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{invalid, Error, Result};
use crate::space::{FiniteMMS, Meta, Point};

/// Segment `[0, pi/2]` with density `cos^2(x)`: the necklace without beads.
pub fn segment_space(pitch: f64) -> Result<FiniteMMS> {
    if !(pitch > 0.0 && pitch < FRAC_PI_2) {
        return Err(invalid("pitch", "must lie in (0, pi/2)"));
    }
    Ok(Necklace::new(NecklaceParams {
        beads: Vec::new(),
        pitch,
        fiber_cells: None,
    })?
    .into_space())
}

/// Circle of the given radius with the intrinsic arc-length metric and
/// uniform length measure, sampled at `count` equally spaced points.
pub fn circle_space(radius: f64, count: usize) -> Result<FiniteMMS> {
    if !(radius > 0.0) {
        return Err(invalid("radius", "must be positive"));
    }
    if count < 3 {
        return Err(invalid("count", "need at least 3 points"));
    }
    let step = 2.0 * PI / count as f64;
    let points = (0..count)
        .map(|i| {
            let th = step * i as f64;
            Point::at(i, vec![radius * th.cos(), radius * th.sin()])
        })
        .collect();
    let cell = 2.0 * PI * radius / count as f64;
    let meta = Meta::new(
        "circle",
        json!({ "radius": radius, "count": count }),
        Some(cell),
    );
    FiniteMMS::from_fn(points, vec![cell; count], meta, |i, j| {
        let k = i.abs_diff(j);
        radius * step * k.min(count - k) as f64
    })
}

/// A finite wedge of the circles of radius `1/k^2`, `k = 1..=n`, glued at a
/// common base point.
#[derive(Debug, Clone)]
pub struct Earring {
    space: FiniteMMS,
    resolution: usize,
    radii: Vec<f64>,
}

impl Earring {
    pub const BASE: usize = 0;

    pub fn new(n: usize, resolution: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "need at least one circle"));
        }
        if resolution < 3 {
            return Err(invalid("resolution", "need at least 3 cells per circle"));
        }
        let radii: Vec<f64> = (1..=n).map(|k| 1.0 / (k * k) as f64).collect();
        let cells: Vec<f64> = radii
            .iter()
            .map(|r| 2.0 * PI * r / resolution as f64)
            .collect();
        let per = resolution - 1;

        // arc position of every point along its circle, and its circle
        let mut circle_of = vec![usize::MAX];
        let mut arc = vec![0.0];
        let mut points = vec![Point::at(0, vec![0.0, 0.0]).with_label("base")];
        let mut weights = vec![cells.iter().sum::<f64>()];
        for (c, (&r, &h)) in radii.iter().zip(&cells).enumerate() {
            for j in 1..resolution {
                let th = 2.0 * PI * j as f64 / resolution as f64;
                let id = points.len();
                points.push(
                    Point::at(id, vec![r * th.sin(), r * (1.0 - th.cos())]).with_label(format!(
                        "c{}:{}",
                        c + 1,
                        j
                    )),
                );
                circle_of.push(c);
                arc.push(h * j as f64);
                weights.push(h);
            }
        }
        let circumference: Vec<f64> = cells.iter().map(|h| h * resolution as f64).collect();
        let to_base = |i: usize| -> f64 {
            if i == 0 {
                0.0
            } else {
                let c = circle_of[i];
                arc[i].min(circumference[c] - arc[i])
            }
        };
        let meta = Meta::new(
            "earring",
            json!({ "n": n, "resolution": resolution }),
            cells.last().copied(),
        );
        let space = FiniteMMS::from_fn(points, weights, meta, |i, j| {
            if i == 0 || j == 0 || circle_of[i] != circle_of[j] {
                to_base(i) + to_base(j)
            } else {
                let c = circle_of[i];
                let da = (arc[i] - arc[j]).abs();
                da.min(circumference[c] - da)
            }
        })?;
        debug_assert_eq!(space.len(), 1 + n * per);
        Ok(Self {
            space,
            resolution,
            radii,
        })
    }

    pub fn from_space(space: &FiniteMMS) -> Result<Self> {
        let meta = space.meta();
        if meta.generator != "earring" {
            return Err(Error::Precondition(
                "space was not built as an earring".into(),
            ));
        }
        let n = meta.params["n"]
            .as_u64()
            .ok_or_else(|| Error::Parse("earring meta lacks `n`".into()))?;
        let res = meta.params["resolution"]
            .as_u64()
            .ok_or_else(|| Error::Parse("earring meta lacks `resolution`".into()))?;
        let e = Self::new(n as usize, res as usize)?;
        if e.space.len() != space.len() {
            return Err(Error::Precondition(
                "earring meta does not match point count".into(),
            ));
        }
        Ok(e)
    }

    pub fn space(&self) -> &FiniteMMS {
        &self.space
    }

    pub fn into_space(self) -> FiniteMMS {
        self.space
    }

    pub fn circles(&self) -> usize {
        self.radii.len()
    }

    pub fn radius(&self, circle: usize) -> f64 {
        self.radii[circle - 1]
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Mass (length) of circle `circle` (1-based).
    pub fn circle_mass(&self, circle: usize) -> f64 {
        2.0 * PI * self.radius(circle)
    }

    /// Point at step `j` (1..resolution) along circle `circle` (1-based).
    pub fn point(&self, circle: usize, j: usize) -> usize {
        assert!((1..=self.circles()).contains(&circle) && (1..self.resolution).contains(&j));
        1 + (circle - 1) * (self.resolution - 1) + (j - 1)
    }

    pub fn circle_points(&self, circle: usize) -> Range<usize> {
        let start = self.point(circle, 1);
        start..start + self.resolution - 1
    }

    /// Reflection of one circle across the diameter through the base point.
    pub fn reflection(&self, circle: usize) -> Vec<usize> {
        let mut perm: Vec<usize> = (0..self.space.len()).collect();
        for j in 1..self.resolution {
            perm[self.point(circle, j)] = self.point(circle, self.resolution - j);
        }
        perm
    }
}

pub fn hawaiian_truncation(n: usize, resolution: usize) -> Result<FiniteMMS> {
    Ok(Earring::new(n, resolution)?.into_space())
}

/// Grid points of spacing `pitch` inside the closed Euclidean ball of radius
/// `r` in dimension `k`, each weighted by the cell volume.
pub fn euclidean_ball_grid(k: usize, r: f64, pitch: f64) -> Result<FiniteMMS> {
    if !(1..=3).contains(&k) {
        return Err(invalid("k", "supported dimensions are 1, 2, 3"));
    }
    if !(r > 0.0) || !(pitch > 0.0) {
        return Err(invalid("r", "radius and pitch must be positive"));
    }
    let m = (r / pitch + 1e-9).floor() as i64;
    let mut coords: Vec<Vec<f64>> = Vec::new();
    let axis: Vec<i64> = (-m..=m).collect();
    let slack = r * r * (1.0 + 1e-12);
    let mut idx = vec![0usize; k];
    loop {
        let p: Vec<f64> = idx.iter().map(|&i| axis[i] as f64 * pitch).collect();
        if p.iter().map(|x| x * x).sum::<f64>() <= slack {
            coords.push(p);
        }
        // odometer increment
        let mut d = 0;
        loop {
            if d == k {
                break;
            }
            idx[d] += 1;
            if idx[d] < axis.len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == k {
            break;
        }
    }
    let n = coords.len();
    let points: Vec<Point> = coords
        .iter()
        .enumerate()
        .map(|(i, c)| Point::at(i, c.clone()))
        .collect();
    let meta = Meta::new(
        "ball",
        json!({ "k": k, "r": r, "pitch": pitch }),
        Some(pitch),
    );
    FiniteMMS::from_fn(points, vec![pitch.powi(k as i32); n], meta, |i, j| {
        coords[i]
            .iter()
            .zip(&coords[j])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bead {
    /// Center abscissa.
    pub x: f64,
    /// Size; the diamond spans `[x - r/4, x + r/4]`.
    pub r: f64,
}

impl Bead {
    pub fn left(&self) -> f64 {
        self.x - self.r / 4.0
    }

    pub fn right(&self) -> f64 {
        self.x + self.r / 4.0
    }

    /// Half-height of the diamond's fiber at abscissa `x`.
    pub fn half_height(&self, x: f64) -> f64 {
        ((self.r / 4.0 - (x - self.x).abs()) / 9.0).max(0.0)
    }

    pub fn contains_x(&self, x: f64) -> bool {
        self.left() < x && x < self.right()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NecklaceParams {
    #[serde(default)]
    pub beads: Vec<Bead>,
    pub pitch: f64,
    /// Cells per diamond fiber; chosen from the pitch when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fiber_cells: Option<usize>,
}

impl NecklaceParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.pitch > 0.0 && self.pitch < FRAC_PI_2) {
            return Err(invalid("pitch", "must lie in (0, pi/2)"));
        }
        if self.fiber_cells == Some(0) {
            return Err(invalid("fiber_cells", "must be positive"));
        }
        for (k, b) in self.beads.iter().enumerate() {
            if !(b.r > 0.0 && b.r <= 1.0) {
                return Err(invalid("beads", format!("bead {k}: need 0 < r <= 1")));
            }
            if !(b.r / 4.0 <= b.x && b.x <= FRAC_PI_2 - b.r / 4.0) {
                return Err(invalid(
                    "beads",
                    format!("bead {k}: need r/4 <= x <= pi/2 - r/4"),
                ));
            }
        }
        let mut sorted: Vec<&Bead> = self.beads.iter().collect();
        sorted.sort_by(|a, b| a.x.total_cmp(&b.x));
        for w in sorted.windows(2) {
            if !(w[0].right() < w[1].left()) {
                return Err(invalid("beads", "bead intervals must be pairwise disjoint"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Segment,
    /// Index into the bead list.
    Diamond(usize),
}

/// One x-cell of a necklace: a single point on the segment, or a stack of
/// equal-mass cells across a diamond's fiber.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub x: f64,
    pub kind: ColumnKind,
    /// Point indices of the column, bottom to top.
    pub cells: Range<usize>,
    pub half_height: f64,
}

impl Column {
    /// Fiber height covered by one cell (0 on the segment).
    pub fn cell_height(&self) -> f64 {
        match self.kind {
            ColumnKind::Segment => 0.0,
            ColumnKind::Diamond(_) => 2.0 * self.half_height / self.cells.len() as f64,
        }
    }
}

/// A necklace: the weighted segment with beads replaced by flat diamonds,
/// metrized by the length metric of the sup norm.
#[derive(Debug, Clone)]
pub struct Necklace {
    space: FiniteMMS,
    params: NecklaceParams,
    pitch: f64,
    columns: Vec<Column>,
    column_of: Vec<usize>,
}

impl Necklace {
    pub fn new(params: NecklaceParams) -> Result<Self> {
        params.validate()?;
        let ncol = (FRAC_PI_2 / params.pitch).ceil() as usize;
        let h = FRAC_PI_2 / ncol as f64;
        let fiber_cells: Vec<usize> = params
            .beads
            .iter()
            .map(|b| {
                params.fiber_cells.unwrap_or_else(|| {
                    let m = ((b.r / 18.0) / h).ceil() as usize;
                    let m = m.max(5);
                    if m % 2 == 0 {
                        m + 1
                    } else {
                        m
                    }
                })
            })
            .collect();

        let mut columns = Vec::with_capacity(ncol);
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut column_of = Vec::new();
        let mut bead_of = Vec::new();
        let mut hits = vec![0usize; params.beads.len()];
        for c in 0..ncol {
            let x = (c as f64 + 0.5) * h;
            let mass = x.cos().powi(2) * h;
            let start = points.len();
            match params.beads.iter().position(|b| b.contains_x(x)) {
                None => {
                    points.push(Point::at(start, vec![x, 0.0]).with_label(format!("s{c}")));
                    weights.push(mass);
                    column_of.push(c);
                    bead_of.push(usize::MAX);
                    columns.push(Column {
                        x,
                        kind: ColumnKind::Segment,
                        cells: start..start + 1,
                        half_height: 0.0,
                    });
                }
                Some(k) => {
                    hits[k] += 1;
                    let half = params.beads[k].half_height(x);
                    let m = fiber_cells[k];
                    let dy = 2.0 * half / m as f64;
                    for j in 0..m {
                        let y = -half + (j as f64 + 0.5) * dy;
                        let id = points.len();
                        points.push(
                            Point::at(id, vec![x, y]).with_label(format!("d{}:{c}:{j}", k + 1)),
                        );
                        weights.push(mass / m as f64);
                        column_of.push(c);
                        bead_of.push(k);
                    }
                    columns.push(Column {
                        x,
                        kind: ColumnKind::Diamond(k),
                        cells: start..points.len(),
                        half_height: half,
                    });
                }
            }
        }
        if let Some(k) = hits.iter().position(|&n| n == 0) {
            return Err(invalid(
                "beads",
                format!("bead {k} is narrower than one column at this pitch"),
            ));
        }

        let xy: Vec<(f64, f64)> = points
            .iter()
            .map(|p| {
                let c = p.coords.as_ref().unwrap();
                (c[0], c[1])
            })
            .collect();
        let meta = Meta::new(
            "necklace",
            serde_json::to_value(&params).unwrap_or_default(),
            Some(h),
        );
        let space = FiniteMMS::from_fn(points, weights, meta, |i, j| {
            let dx = (xy[i].0 - xy[j].0).abs();
            if bead_of[i] != usize::MAX && bead_of[i] == bead_of[j] {
                dx.max((xy[i].1 - xy[j].1).abs())
            } else {
                dx
            }
        })?;
        Ok(Self {
            space,
            params,
            pitch: h,
            columns,
            column_of,
        })
    }

    pub fn from_space(space: &FiniteMMS) -> Result<Self> {
        let meta = space.meta();
        if meta.generator != "necklace" {
            return Err(Error::Precondition(
                "space was not built as a necklace".into(),
            ));
        }
        let params: NecklaceParams =
            serde_json::from_value(meta.params.clone()).map_err(|e| Error::Parse(e.to_string()))?;
        let n = Self::new(params)?;
        if n.space.len() != space.len() {
            return Err(Error::Precondition(
                "necklace meta does not match point count".into(),
            ));
        }
        Ok(n)
    }

    pub fn space(&self) -> &FiniteMMS {
        &self.space
    }

    pub fn into_space(self) -> FiniteMMS {
        self.space
    }

    pub fn params(&self) -> &NecklaceParams {
        &self.params
    }

    pub fn beads(&self) -> &[Bead] {
        &self.params.beads
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, c: usize) -> &Column {
        &self.columns[c]
    }

    /// Column containing a point.
    pub fn column_of(&self, point: usize) -> usize {
        self.column_of[point]
    }

    /// Column whose center is nearest to `x`.
    pub fn nearest_column(&self, x: f64) -> usize {
        let c = (x / self.pitch - 0.5).round();
        c.clamp(0.0, (self.columns.len() - 1) as f64) as usize
    }

    /// Column centered at `w`; errors when `w` is off the grid.
    pub fn column_at(&self, w: f64) -> Result<usize> {
        let c = self.nearest_column(w);
        if (self.columns[c].x - w).abs() > 1e-9 * self.pitch.max(1.0) {
            return Err(invalid("w", format!("{w} is not a column abscissa")));
        }
        Ok(c)
    }

    /// Length of the part of `cells` lying on the fiber `{x = w}`.
    pub fn height(&self, w: f64, cells: &[usize]) -> Result<f64> {
        let c = self.column_at(w)?;
        let col = &self.columns[c];
        let count = cells.iter().filter(|i| col.cells.contains(i)).count();
        Ok(count as f64 * col.cell_height())
    }

    /// All point indices of bead `k`'s diamond.
    pub fn diamond_cells(&self, k: usize) -> Vec<usize> {
        self.columns
            .iter()
            .filter(|c| c.kind == ColumnKind::Diamond(k))
            .flat_map(|c| c.cells.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_cell_weights() {
        let s = segment_space(0.01).unwrap();
        let h = s.pitch().unwrap();
        assert!((s.weight(0) - h).abs() < h * h);
        assert!(s.weight(s.len() - 1) < h * h);
        assert!(s.validate().is_valid());
    }

    #[test]
    fn circle_metric() {
        let c = circle_space(2.0, 10).unwrap();
        assert!((c.dist(0, 5) - 2.0 * PI).abs() < 1e-12);
        assert!((c.total_mass() - 4.0 * PI).abs() < 1e-12);
        assert!(c.validate().is_valid());
    }

    #[test]
    fn earring_wedge_metric() {
        let e = Earring::new(2, 8).unwrap();
        let s = e.space();
        let (p, q) = (e.point(1, 1), e.point(2, 7));
        let d1 = s.dist(Earring::BASE, p);
        let d2 = s.dist(Earring::BASE, q);
        assert!((s.dist(p, q) - (d1 + d2)).abs() < 1e-15);
        assert!((s.total_mass() - 2.5 * PI).abs() < 1e-12);
        assert!(s.validate().is_valid());
        let one = hawaiian_truncation(1, 16).unwrap();
        assert!((one.diameter() - PI).abs() < 1e-12);
    }

    #[test]
    fn earring_reflection_is_involution() {
        let e = Earring::new(3, 8).unwrap();
        let r = e.reflection(2);
        let rr: Vec<usize> = r.iter().map(|&i| r[i]).collect();
        assert_eq!(rr, (0..e.space().len()).collect::<Vec<_>>());
        assert_eq!(r[e.point(2, 4)], e.point(2, 4));
    }

    #[test]
    fn ball_grid_shapes() {
        let b = euclidean_ball_grid(1, 1.0, 0.25).unwrap();
        assert_eq!(b.len(), 9);
        assert!((b.diameter() - 2.0).abs() < 1e-12);
        assert!(euclidean_ball_grid(4, 1.0, 0.5).is_err());
    }

    #[test]
    fn necklace_param_checks() {
        let bad = |beads: Vec<Bead>| {
            NecklaceParams {
                beads,
                pitch: 0.01,
                fiber_cells: None,
            }
            .validate()
            .is_err()
        };
        assert!(bad(vec![Bead { x: 0.4, r: 1.5 }]));
        assert!(bad(vec![Bead { x: 0.01, r: 0.3 }]));
        assert!(bad(vec![Bead { x: 0.4, r: 0.3 }, Bead { x: 0.5, r: 0.3 }]));
        assert!(!bad(vec![Bead { x: 0.4, r: 0.3 }, Bead { x: 1.1, r: 0.3 }]));
    }

    #[test]
    fn diamond_geometry() {
        let n = Necklace::new(NecklaceParams {
            beads: vec![Bead { x: 0.4, r: 0.3 }],
            pitch: 0.01,
            fiber_cells: None,
        })
        .unwrap();
        let b = n.beads()[0];
        assert!((b.half_height(b.x) - 0.3 / 36.0).abs() < 1e-15);
        let c = n.nearest_column(b.x);
        let col = n.column(c);
        let all: Vec<usize> = col.cells.clone().collect();
        let full = n.height(col.x, &all).unwrap();
        assert!((full - 2.0 * b.half_height(col.x)).abs() < 1e-15);
        assert!((full - 0.3 / 18.0).abs() <= 2.0 * n.pitch() / 9.0);
        let top: Vec<usize> = all[all.len() / 2 + 1..].to_vec();
        assert!(
            (n.height(col.x, &top).unwrap() - top.len() as f64 * col.cell_height()).abs() < 1e-15
        );
        // fiber mass does not depend on the diamond
        let fiber: f64 = all.iter().map(|&i| n.space().weight(i)).sum();
        assert!((fiber - col.x.cos().powi(2) * n.pitch()).abs() < 1e-15);
        // segment fibers have zero height
        let s = n.nearest_column(1.2);
        let seg: Vec<usize> = n.column(s).cells.clone().collect();
        assert_eq!(n.height(n.column(s).x, &seg).unwrap(), 0.0);
        assert!(n.height(col.x + 0.3 * n.pitch(), &all).is_err());
    }
}
