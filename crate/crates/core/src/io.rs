//! JSON formats for spaces, measures, permutations and generator requests,
//! plus the textual cell-selector syntax.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{invalid, Error, Result};
use crate::generators::{
    circle_space, euclidean_ball_grid, segment_space, Earring, Necklace, NecklaceParams,
};
use crate::measure::Measure;
use crate::space::{FiniteMMS, Meta, Point};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PointRecord {
    id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coords: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
enum DistMode {
    #[serde(rename = "ambient-L2")]
    AmbientL2,
    #[serde(rename = "ambient-Linf")]
    AmbientLinf,
    #[serde(rename = "graph")]
    Graph,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum DistSpec {
    Matrix(Vec<Vec<f64>>),
    Mode {
        mode: DistMode,
        #[serde(default)]
        edges: Vec<(usize, usize, f64)>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpaceFile {
    points: Vec<PointRecord>,
    dist: DistSpec,
    weights: Vec<f64>,
    #[serde(default)]
    meta: Meta,
}

fn parse_err(e: impl std::fmt::Display) -> Error {
    Error::Parse(e.to_string())
}

pub fn parse_space(text: &str) -> Result<FiniteMMS> {
    let file: SpaceFile = serde_json::from_str(text).map_err(parse_err)?;
    let n = file.points.len();
    for (i, p) in file.points.iter().enumerate() {
        if p.id != i {
            return Err(Error::Parse(format!(
                "point at position {i} has id {}",
                p.id
            )));
        }
    }
    let points: Vec<Point> = file
        .points
        .into_iter()
        .map(|p| Point {
            id: p.id,
            coords: p.coords,
            label: p.label,
        })
        .collect();
    match file.dist {
        DistSpec::Matrix(rows) => FiniteMMS::new(points, rows, file.weights, file.meta),
        DistSpec::Mode {
            mode: DistMode::Graph,
            edges,
        } => {
            let d = graph_metric(n, &edges)?;
            FiniteMMS::from_fn(points, file.weights, file.meta, |i, j| d[i * n + j])
        }
        DistSpec::Mode { mode, .. } => {
            let coords: Vec<Vec<f64>> = points
                .iter()
                .map(|p| {
                    p.coords
                        .clone()
                        .ok_or_else(|| Error::Parse(format!("point {} has no coords", p.id)))
                })
                .collect::<Result<_>>()?;
            let k = coords.first().map_or(0, Vec::len);
            if coords.iter().any(|c| c.len() != k) {
                return Err(Error::Parse("coordinate dimensions differ".into()));
            }
            let linf = mode == DistMode::AmbientLinf;
            FiniteMMS::from_fn(points, file.weights, file.meta, |i, j| {
                let it = coords[i].iter().zip(&coords[j]).map(|(a, b)| (a - b).abs());
                if linf {
                    it.fold(0.0, f64::max)
                } else {
                    it.map(|x| x * x).sum::<f64>().sqrt()
                }
            })
        }
    }
}

/// All-pairs shortest paths over an undirected weighted edge list.
fn graph_metric(n: usize, edges: &[(usize, usize, f64)]) -> Result<Vec<f64>> {
    let mut d = vec![f64::INFINITY; n * n];
    for i in 0..n {
        d[i * n + i] = 0.0;
    }
    for &(i, j, w) in edges {
        if i >= n || j >= n {
            return Err(Error::IndexOutOfRange {
                index: i.max(j),
                len: n,
            });
        }
        if !(w >= 0.0) || !w.is_finite() {
            return Err(invalid("edges", format!("edge ({i},{j}) has length {w}")));
        }
        let w = w.min(d[i * n + j]);
        d[i * n + j] = w;
        d[j * n + i] = w;
    }
    for k in 0..n {
        for i in 0..n {
            let dik = d[i * n + k];
            if dik.is_infinite() {
                continue;
            }
            for j in 0..n {
                let v = dik + d[k * n + j];
                if v < d[i * n + j] {
                    d[i * n + j] = v;
                }
            }
        }
    }
    if let Some(p) = d.iter().position(|v| v.is_infinite()) {
        return Err(Error::Disconnected {
            from: p / n,
            to: p % n,
        });
    }
    Ok(d)
}

/// Serializes a space with an explicit distance matrix at full precision.
pub fn space_to_json(space: &FiniteMMS) -> String {
    let file = SpaceFile {
        points: space
            .points()
            .iter()
            .map(|p| PointRecord {
                id: p.id,
                coords: p.coords.clone(),
                label: p.label.clone(),
            })
            .collect(),
        dist: DistSpec::Matrix((0..space.len()).map(|i| space.row(i).to_vec()).collect()),
        weights: space.weights().to_vec(),
        meta: space.meta().clone(),
    };
    serde_json::to_string(&file).expect("space serializes")
}

pub fn parse_measure(text: &str) -> Result<Measure> {
    serde_json::from_str(text).map_err(parse_err)
}

/// Parses a permutation given as a JSON array, or as `{"perm": [...]}`.
pub fn parse_permutation(text: &str) -> Result<Vec<usize>> {
    let v: Value = serde_json::from_str(text).map_err(parse_err)?;
    let arr = match &v {
        Value::Object(o) => o
            .get("perm")
            .cloned()
            .ok_or_else(|| Error::Parse("missing `perm`".into()))?,
        _ => v,
    };
    let perm: Vec<usize> = serde_json::from_value(arr).map_err(parse_err)?;
    check_permutation(&perm)?;
    Ok(perm)
}

pub fn check_permutation(perm: &[usize]) -> Result<()> {
    let mut seen = vec![false; perm.len()];
    for &p in perm {
        if p >= perm.len() || seen[p] {
            return Err(Error::Parse("not a bijection of 0..n".into()));
        }
        seen[p] = true;
    }
    Ok(())
}

/// A generator request as accepted by `space gen`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum GeneratorSpec {
    Segment { pitch: f64 },
    Circle { radius: f64, count: usize },
    Earring { n: usize, resolution: usize },
    Necklace(NecklaceParams),
    Ball { k: usize, r: f64, pitch: f64 },
}

impl GeneratorSpec {
    pub fn build(&self) -> Result<FiniteMMS> {
        match self {
            Self::Segment { pitch } => segment_space(*pitch),
            Self::Circle { radius, count } => circle_space(*radius, *count),
            Self::Earring { n, resolution } => Ok(Earring::new(*n, *resolution)?.into_space()),
            Self::Necklace(p) => Ok(Necklace::new(p.clone())?.into_space()),
            Self::Ball { k, r, pitch } => euclidean_ball_grid(*k, *r, *pitch),
        }
    }
}

/// Parses generator parameters for the named kind.
pub fn parse_generator_params(kind: &str, params: &str) -> Result<GeneratorSpec> {
    let mut v: Value = serde_json::from_str(params).map_err(parse_err)?;
    match &mut v {
        Value::Object(o) => {
            o.insert("kind".into(), Value::String(kind.to_string()));
        }
        _ => {
            return Err(Error::Parse(
                "generator params must be a JSON object".into(),
            ))
        }
    }
    serde_json::from_value(v).map_err(parse_err)
}

/// Which cells of a space a command acts on.
#[derive(Debug, Clone, PartialEq)]
pub enum CellSelector {
    All,
    Ids(Vec<usize>),
    /// Points whose coordinate `axis` lies in `[lo, hi]`.
    Interval {
        axis: usize,
        lo: f64,
        hi: f64,
    },
    /// Closed ball around a point.
    Ball {
        center: usize,
        radius: f64,
    },
    LabelPrefix(String),
}

impl CellSelector {
    /// Accepted forms: `all`, `3,4,10..20` (ranges inclusive), `x:[a,b]`
    /// (also `y`, `z`), `ball:<center>:<radius>`, `label:<prefix>`.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if t == "all" {
            return Ok(Self::All);
        }
        if let Some(rest) = t.strip_prefix("label:") {
            return Ok(Self::LabelPrefix(rest.to_string()));
        }
        if let Some(rest) = t.strip_prefix("ball:") {
            let (c, r) = rest
                .split_once(':')
                .ok_or_else(|| Error::Parse("expected ball:<center>:<radius>".into()))?;
            let center = c.trim().parse().map_err(parse_err)?;
            let radius: f64 = r.trim().parse().map_err(parse_err)?;
            if !(radius >= 0.0) {
                return Err(Error::Parse("ball radius must be nonnegative".into()));
            }
            return Ok(Self::Ball { center, radius });
        }
        for (axis, name) in ["x:", "y:", "z:"].iter().enumerate() {
            if let Some(rest) = t.strip_prefix(name) {
                let inner = rest
                    .trim()
                    .strip_prefix('[')
                    .and_then(|s| s.strip_suffix(']'))
                    .ok_or_else(|| Error::Parse("expected an interval [a,b]".into()))?;
                let (a, b) = inner
                    .split_once(',')
                    .ok_or_else(|| Error::Parse("expected an interval [a,b]".into()))?;
                let lo: f64 = a.trim().parse().map_err(parse_err)?;
                let hi: f64 = b.trim().parse().map_err(parse_err)?;
                if !(lo <= hi) {
                    return Err(Error::Parse("interval bounds out of order".into()));
                }
                return Ok(Self::Interval { axis, lo, hi });
            }
        }
        let mut ids = Vec::new();
        for part in t.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            if let Some((a, b)) = part.split_once("..") {
                let a: usize = a.trim().parse().map_err(parse_err)?;
                let b: usize = b.trim().parse().map_err(parse_err)?;
                if a > b || b - a > 1 << 24 {
                    return Err(Error::Parse(format!("bad range {part}")));
                }
                ids.extend(a..=b);
            } else {
                ids.push(part.parse().map_err(parse_err)?);
            }
        }
        if ids.is_empty() {
            return Err(Error::Parse("empty cell selector".into()));
        }
        Ok(Self::Ids(ids))
    }

    /// Selected indices, sorted and deduplicated.
    pub fn resolve(&self, space: &FiniteMMS) -> Result<Vec<usize>> {
        let n = space.len();
        let mut out: Vec<usize> = match self {
            Self::All => (0..n).collect(),
            Self::Ids(ids) => {
                for &i in ids {
                    space.check_index(i)?;
                }
                ids.clone()
            }
            Self::Interval { axis, lo, hi } => (0..n)
                .filter(|&i| {
                    space
                        .coords(i)
                        .and_then(|c| c.get(*axis))
                        .is_some_and(|v| *lo <= *v && *v <= *hi)
                })
                .collect(),
            Self::Ball { center, radius } => {
                space.check_index(*center)?;
                space.ball_indices(*center, *radius, crate::space::BallKind::Closed)
            }
            Self::LabelPrefix(p) => (0..n)
                .filter(|&i| {
                    space.points()[i]
                        .label
                        .as_deref()
                        .is_some_and(|l| l.starts_with(p.as_str()))
                })
                .collect(),
        };
        out.sort_unstable();
        out.dedup();
        if out.is_empty() {
            return Err(Error::EmptySupport);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_roundtrip() {
        let s = segment_space(0.3).unwrap();
        let back = parse_space(&space_to_json(&s)).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn ambient_and_graph_modes() {
        let txt = r#"{"points":[{"id":0,"coords":[0,0]},{"id":1,"coords":[3,4]}],
                      "dist":{"mode":"ambient-L2"},"weights":[1,1]}"#;
        assert_eq!(parse_space(txt).unwrap().dist(0, 1), 5.0);
        let txt = txt.replace("ambient-L2", "ambient-Linf");
        assert_eq!(parse_space(&txt).unwrap().dist(0, 1), 4.0);
        let g = r#"{"points":[{"id":0},{"id":1},{"id":2}],
                    "dist":{"mode":"graph","edges":[[0,1,1.0],[1,2,2.5]]},"weights":[1,1,1]}"#;
        assert_eq!(parse_space(g).unwrap().dist(0, 2), 3.5);
        let broken = g.replace(",[1,2,2.5]", "");
        assert!(matches!(
            parse_space(&broken),
            Err(Error::Disconnected { .. })
        ));
    }

    #[test]
    fn rejects_bad_ids_and_shapes() {
        assert!(parse_space(r#"{"points":[{"id":1}],"dist":[[0]],"weights":[1]}"#).is_err());
        assert!(parse_space(r#"{"points":[{"id":0}],"dist":[[0,1]],"weights":[1]}"#).is_err());
    }

    #[test]
    fn permutations() {
        assert_eq!(parse_permutation("[1,0,2]").unwrap(), vec![1, 0, 2]);
        assert_eq!(parse_permutation(r#"{"perm":[0]}"#).unwrap(), vec![0]);
        assert!(parse_permutation("[0,0]").is_err());
        assert!(parse_permutation("[2,0]").is_err());
    }

    #[test]
    fn generator_requests() {
        let spec = parse_generator_params("circle", r#"{"radius":1,"count":6}"#).unwrap();
        assert_eq!(spec.build().unwrap().len(), 6);
        let spec =
            parse_generator_params("necklace", r#"{"beads":[{"x":0.4,"r":0.3}],"pitch":0.05}"#)
                .unwrap();
        assert!(spec.build().unwrap().validate().is_valid());
        assert!(parse_generator_params("torus", "{}").is_err());
        assert!(parse_generator_params("segment", "[]").is_err());
    }

    #[test]
    fn selectors() {
        let s = segment_space(0.1).unwrap();
        assert_eq!(
            CellSelector::parse("1, 3..5").unwrap().resolve(&s).unwrap(),
            vec![1, 3, 4, 5]
        );
        let a = CellSelector::parse("x:[0.785398, 1.6]")
            .unwrap()
            .resolve(&s)
            .unwrap();
        assert!(a.iter().all(|&i| s.coords(i).unwrap()[0] >= 0.785398));
        assert_eq!(
            CellSelector::parse("ball:0:0.1")
                .unwrap()
                .resolve(&s)
                .unwrap()
                .len(),
            2
        );
        assert_eq!(
            CellSelector::parse("label:s1")
                .unwrap()
                .resolve(&s)
                .unwrap()[0],
            1
        );
        assert!(CellSelector::parse("").is_err());
        assert!(CellSelector::parse("x:[2,1]").is_err());
        assert!(CellSelector::parse("99").unwrap().resolve(&s).is_err());
    }
}
