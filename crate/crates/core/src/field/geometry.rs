//! Two-dimensional electrode layouts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    /// Cross-section perpendicular to the beam; axes (x, y).
    Transverse,
    /// Section containing the beam; axes (x, z).
    Longitudinal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Polygon(Vec<Point>),
    Rectangle { min: Point, max: Point },
    Circle {
        center: Point,
        radius: f64,
        #[serde(default = "default_segments")]
        segments: usize,
    },
}

fn default_segments() -> usize {
    256
}

impl Shape {
    /// Closed vertex loop (last vertex not repeated).
    pub fn vertices(&self) -> Vec<Point> {
        match self {
            Shape::Polygon(v) => v.clone(),
            Shape::Rectangle { min, max } => vec![
                [min[0], min[1]],
                [max[0], min[1]],
                [max[0], max[1]],
                [min[0], max[1]],
            ],
            Shape::Circle {
                center,
                radius,
                segments,
            } => (0..*segments)
                .map(|i| {
                    let t = 2.0 * std::f64::consts::PI * i as f64 / *segments as f64;
                    [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Electrode {
    #[serde(default)]
    pub name: String,
    /// Volts.
    pub potential: f64,
    pub shape: Shape,
    /// The conductor fills everything outside the shape instead of inside.
    #[serde(default)]
    pub outside: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub min: Point,
    pub max: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectrodeGeometry2D {
    pub plane: Plane,
    pub domain: Domain,
    pub electrodes: Vec<Electrode>,
    /// Domain edges held at 0 V; otherwise they are mirror (zero normal field) boundaries.
    #[serde(default)]
    pub grounded_boundary: bool,
}

/// Electrode with its polygon resolved.
#[derive(Debug, Clone)]
pub(crate) struct Conductor {
    pub potential: f64,
    pub vertices: Vec<Point>,
    pub outside: bool,
}

impl Conductor {
    pub fn contains(&self, p: Point) -> bool {
        point_in_polygon(&self.vertices, p) != self.outside
    }

    /// Inside, or within `tol` of the outline.
    pub fn covers(&self, p: Point, tol: f64) -> bool {
        self.contains(p) || self.edges().any(|(a, b)| point_segment_distance(p, a, b) <= tol)
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Smallest t in (0, 1] where the segment a→b crosses the boundary.
    pub fn crossing(&self, a: Point, b: Point) -> Option<f64> {
        self.edges()
            .filter_map(|(p, q)| segment_intersection(a, b, p, q))
            .filter(|t| *t > 0.0)
            .min_by(f64::total_cmp)
    }
}

impl ElectrodeGeometry2D {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = (self.domain.min, self.domain.max);
        if !(hi[0] > lo[0] && hi[1] > lo[1]) {
            return Err(Error::Domain("domain max must exceed min on both axes".into()));
        }
        if self.electrodes.is_empty() {
            return Err(Error::Domain("geometry has no electrodes".into()));
        }
        for (k, e) in self.electrodes.iter().enumerate() {
            let v = e.shape.vertices();
            let label = if e.name.is_empty() { format!("#{k}") } else { e.name.clone() };
            if v.len() < 3 {
                return Err(Error::Domain(format!("electrode {label}: fewer than 3 vertices")));
            }
            if !e.potential.is_finite() {
                return Err(Error::Domain(format!("electrode {label}: non-finite potential")));
            }
            if let Shape::Circle { radius, segments, .. } = e.shape {
                if !(radius > 0.0) || segments < 8 {
                    return Err(Error::Domain(format!(
                        "electrode {label}: circle needs radius > 0 and >= 8 segments"
                    )));
                }
            }
            if v.iter().any(|p| p[0] < lo[0] || p[0] > hi[0] || p[1] < lo[1] || p[1] > hi[1]) {
                return Err(Error::Domain(format!("electrode {label} leaves the domain")));
            }
            if self_intersects(&v) {
                return Err(Error::Domain(format!("electrode {label}: polygon self-intersects")));
            }
        }
        let mut potentials: Vec<f64> = self.electrodes.iter().map(|e| e.potential).collect();
        if self.grounded_boundary {
            potentials.push(0.0);
        }
        potentials.sort_by(f64::total_cmp);
        potentials.dedup();
        if potentials.len() < 2 {
            log::warn!("all conductors share one potential; the solution is field-free");
        }
        Ok(())
    }

    pub(crate) fn conductors(&self) -> Vec<Conductor> {
        self.electrodes
            .iter()
            .map(|e| Conductor {
                potential: e.potential,
                vertices: e.shape.vertices(),
                outside: e.outside,
            })
            .collect()
    }

    /// Smallest distance between boundaries of electrodes at different
    /// potentials.
    pub fn min_gap(&self) -> f64 {
        let cs = self.conductors();
        let mut gap = f64::INFINITY;
        for (i, a) in cs.iter().enumerate() {
            for b in cs.iter().skip(i + 1) {
                if a.potential == b.potential {
                    continue;
                }
                gap = gap.min(polygon_distance(&a.vertices, &b.vertices));
            }
        }
        gap
    }

    /// Same layout with every potential multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut g = self.clone();
        for e in &mut g.electrodes {
            e.potential *= factor;
        }
        g
    }

    /// Concentric cylinders: inner radius `r1` at `potential`, grounded
    /// conductor beyond `r2`.
    pub fn coaxial(r1: f64, r2: f64, potential: f64, segments: usize) -> Self {
        let margin = 0.1 * r2;
        let half = r2 + margin;
        Self {
            plane: Plane::Transverse,
            domain: Domain {
                min: [-half, -half],
                max: [half, half],
            },
            electrodes: vec![
                Electrode {
                    name: "inner".into(),
                    potential,
                    shape: Shape::Circle {
                        center: [0.0, 0.0],
                        radius: r1,
                        segments,
                    },
                    outside: false,
                },
                Electrode {
                    name: "outer".into(),
                    potential: 0.0,
                    shape: Shape::Circle {
                        center: [0.0, 0.0],
                        radius: r2,
                        segments,
                    },
                    outside: true,
                },
            ],
            grounded_boundary: true,
        }
    }

    /// Plates at ±U/2 filling x < −gap/2 and x > gap/2 across the full
    /// height, with mirror boundaries top and bottom.
    pub fn parallel_plates(gap: f64, thickness: f64, height: f64, voltage: f64) -> Self {
        let half = 0.5 * gap + thickness;
        let hh = 0.5 * height;
        Self {
            plane: Plane::Transverse,
            domain: Domain {
                min: [-half, -hh],
                max: [half, hh],
            },
            electrodes: vec![
                Electrode {
                    name: "low".into(),
                    potential: -0.5 * voltage,
                    shape: Shape::Rectangle {
                        min: [-half, -hh],
                        max: [-0.5 * gap, hh],
                    },
                    outside: false,
                },
                Electrode {
                    name: "high".into(),
                    potential: 0.5 * voltage,
                    shape: Shape::Rectangle {
                        min: [0.5 * gap, -hh],
                        max: [half, hh],
                    },
                    outside: false,
                },
            ],
            grounded_boundary: false,
        }
    }

    /// Surrogate deflector cross-section: a rod of radius 6 mm at
    /// `voltage` whose surface sits 6 mm above a grounded plate (x ≤ 0).
    /// Molecules fly between them and are pulled towards the rod (+x).
    pub fn surrogate_transverse(voltage: f64) -> Self {
        Self {
            plane: Plane::Transverse,
            domain: Domain {
                min: [-3e-3, -30e-3],
                max: [42e-3, 30e-3],
            },
            electrodes: vec![
                Electrode {
                    name: "plate".into(),
                    potential: 0.0,
                    shape: Shape::Rectangle {
                        min: [-3e-3, -30e-3],
                        max: [0.0, 30e-3],
                    },
                    outside: false,
                },
                Electrode {
                    name: "rod".into(),
                    potential: voltage,
                    shape: Shape::Circle {
                        center: [12e-3, 0.0],
                        radius: 6e-3,
                        segments: 256,
                    },
                    outside: false,
                },
            ],
            grounded_boundary: true,
        }
    }

    /// Longitudinal section of the surrogate deflector through the beam
    /// line: plate and rod, 6 mm apart and `length` long, in a grounded box.
    pub fn surrogate_longitudinal(voltage: f64, length: f64) -> Self {
        let hl = 0.5 * length;
        let box_half = hl + 30e-3;
        Self {
            plane: Plane::Longitudinal,
            domain: Domain {
                min: [-3e-3, -box_half],
                max: [42e-3, box_half],
            },
            electrodes: vec![
                Electrode {
                    name: "plate".into(),
                    potential: 0.0,
                    shape: Shape::Rectangle {
                        min: [-3e-3, -hl],
                        max: [0.0, hl],
                    },
                    outside: false,
                },
                Electrode {
                    name: "rod".into(),
                    potential: voltage,
                    shape: Shape::Rectangle {
                        min: [6e-3, -hl],
                        max: [18e-3, hl],
                    },
                    outside: false,
                },
            ],
            grounded_boundary: true,
        }
    }
}

fn point_in_polygon(v: &[Point], p: Point) -> bool {
    let mut inside = false;
    let n = v.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (v[i], v[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Parameter t along a→b where it meets segment p→q, if it does.
fn segment_intersection(a: Point, b: Point, p: Point, q: Point) -> Option<f64> {
    let r = [b[0] - a[0], b[1] - a[1]];
    let s = [q[0] - p[0], q[1] - p[1]];
    let denom = r[0] * s[1] - r[1] * s[0];
    if denom == 0.0 {
        return None;
    }
    let ap = [p[0] - a[0], p[1] - a[1]];
    let t = (ap[0] * s[1] - ap[1] * s[0]) / denom;
    let u = (ap[0] * r[1] - ap[1] * r[0]) / denom;
    ((0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u)).then_some(t)
}

fn self_intersects(v: &[Point]) -> bool {
    let n = v.len();
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (a, b) = (v[i], v[(i + 1) % n]);
            let (p, q) = (v[j], v[(j + 1) % n]);
            if segment_intersection(a, b, p, q).is_some() {
                return true;
            }
        }
    }
    false
}

fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    ((p[0] - a[0] - t * ab[0]).powi(2) + (p[1] - a[1] - t * ab[1]).powi(2)).sqrt()
}

fn polygon_distance(a: &[Point], b: &[Point]) -> f64 {
    let edges = |v: &[Point]| -> Vec<(Point, Point)> {
        (0..v.len()).map(|i| (v[i], v[(i + 1) % v.len()])).collect()
    };
    let (ea, eb) = (edges(a), edges(b));
    let d1 = a
        .iter()
        .flat_map(|p| eb.iter().map(move |(s, t)| point_segment_distance(*p, *s, *t)));
    let d2 = b
        .iter()
        .flat_map(|p| ea.iter().map(move |(s, t)| point_segment_distance(*p, *s, *t)));
    d1.chain(d2).fold(f64::INFINITY, f64::min)
}
