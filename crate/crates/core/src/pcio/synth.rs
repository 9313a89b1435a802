//! Synthetic part-labelled shapes built from surface primitives.
//!
//! Each part is sampled uniformly over its surface, either i.i.d. or
//! stratified (one point per cell of a near-square grid laid over the
//! primitive's parameter domain, with a small in-cell offset). The whole
//! sample is then perturbed by isotropic Gaussian jitter whose standard deviation is a
//! fraction of the sample's bounding-box diagonal. Adjacent primitives touch,
//! so part boundaries are geometric.

use rand::Rng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, Point3, PointCloud, Split};
use crate::error::{Error, Result};
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Primitive {
    /// Line segment from `a` to `b`.
    Segment { a: Point3, b: Point3 },
    /// Parallelogram `origin + s*u + t*v`, `s, t` in `[0, 1]`.
    Patch { origin: Point3, u: Point3, v: Point3 },
    /// Lateral surface of a cylinder from `base` to `base + axis`.
    Cylinder { base: Point3, axis: Point3, radius: f64 },
    /// Axis-aligned ellipsoid surface.
    Ellipsoid { center: Point3, radii: Point3 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthPart {
    pub primitive: Primitive,
    pub label: u32,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SynthSample {
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub category: Option<u32>,
    pub parts: Vec<SynthPart>,
}

/// Randomised shape families; each draw produces one [`SynthSample`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Fuselage (0), wings (1), tail surfaces (2), engines (3).
    Airplane,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub kind: Family,
    pub count: usize,
    pub points: usize,
}

fn default_jitter() -> f64 {
    0.002
}

fn default_true() -> bool {
    true
}

fn default_test_fraction() -> f64 {
    0.2
}

/// How points are placed on a primitive's surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    /// Independent uniform draws.
    #[default]
    Uniform,
    /// Stratified over a grid; ellipsoids always use independent draws.
    Stratified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub num_classes: usize,
    #[serde(default)]
    pub class_names: Option<Vec<String>>,
    /// Jitter standard deviation as a fraction of the bounding-box diagonal.
    #[serde(default = "default_jitter")]
    pub jitter: f64,
    /// Rescale every sample into a unit bounding box centred at the origin.
    #[serde(default = "default_true")]
    pub normalize: bool,
    #[serde(default)]
    pub sampling: Sampling,
    /// Fraction of samples assigned to the test split (rounded down).
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub samples: Vec<SynthSample>,
    #[serde(default)]
    pub family: Option<FamilySpec>,
}

impl SynthSpec {
    /// Airplane-like shapes with `count` samples of `points` points each.
    pub fn airplanes(count: usize, points: usize) -> Self {
        Self {
            num_classes: 4,
            class_names: Some(
                ["fuselage", "wing", "tail", "engine"]
                    .iter()
                    .map(|s| s.to_string())
                    .collect(),
            ),
            jitter: default_jitter(),
            normalize: true,
            sampling: Sampling::Stratified,
            test_fraction: default_test_fraction(),
            samples: Vec::new(),
            family: Some(FamilySpec {
                kind: Family::Airplane,
                count,
                points,
            }),
        }
    }
}

fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(a: Point3) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn cross(a: Point3, b: Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn scale(a: Point3, s: f64) -> Point3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Two unit vectors completing `axis` to an orthonormal frame.
fn frame(axis: Point3) -> (Point3, Point3) {
    let n = scale(axis, 1.0 / norm(axis));
    let helper = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let e1 = cross(n, helper);
    let e1 = scale(e1, 1.0 / norm(e1));
    (e1, cross(n, e1))
}

fn sample_primitive(p: &Primitive, rng: &mut ChaCha8Rng) -> Point3 {
    match *p {
        Primitive::Segment { a, b } => {
            let t: f64 = rng.random();
            [
                a[0] + t * (b[0] - a[0]),
                a[1] + t * (b[1] - a[1]),
                a[2] + t * (b[2] - a[2]),
            ]
        }
        Primitive::Patch { origin, u, v } => {
            let (s, t): (f64, f64) = (rng.random(), rng.random());
            [
                origin[0] + s * u[0] + t * v[0],
                origin[1] + s * u[1] + t * v[1],
                origin[2] + s * u[2] + t * v[2],
            ]
        }
        Primitive::Cylinder { base, axis, radius } => {
            let (e1, e2) = frame(axis);
            let t: f64 = rng.random();
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            let (s, c) = theta.sin_cos();
            [
                base[0] + t * axis[0] + radius * (c * e1[0] + s * e2[0]),
                base[1] + t * axis[1] + radius * (c * e1[1] + s * e2[1]),
                base[2] + t * axis[2] + radius * (c * e1[2] + s * e2[2]),
            ]
        }
        Primitive::Ellipsoid { center, radii } => {
            let [a, b, c] = radii;
            let gmax = (b * c).max(a * c).max(a * b);
            let normal = Normal::new(0.0, 1.0).unwrap();
            // Rejection on the area element of the sphere-to-ellipsoid map.
            loop {
                let d: Point3 = [normal.sample(rng), normal.sample(rng), normal.sample(rng)];
                let len = norm(d);
                if len < 1e-12 {
                    continue;
                }
                let [x, y, z] = scale(d, 1.0 / len);
                let g = ((b * c * x).powi(2) + (a * c * y).powi(2) + (a * b * z).powi(2)).sqrt();
                if rng.random::<f64>() * gmax <= g {
                    break [center[0] + a * x, center[1] + b * y, center[2] + c * z];
                }
            }
        }
    }
}

/// In-cell offset amplitude, as a fraction of a cell.
const CELL_JITTER: f64 = 0.2;

/// `n` cell coordinates in `[0, 1]^2` from an `m_u x m_v` grid whose aspect
/// follows `len_u / len_v`.
fn grid_samples(n: usize, len_u: f64, len_v: f64, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let m_u = ((n as f64 * len_u / len_v).sqrt().round() as usize).clamp(1, n);
    let m_v = n.div_ceil(m_u);
    let mut cells = rand::seq::index::sample(rng, m_u * m_v, n).into_vec();
    cells.sort_unstable();
    cells
        .into_iter()
        .map(|c| {
            let (a, b) = (c % m_u, c / m_u);
            let s = (a as f64 + 0.5 + CELL_JITTER * (rng.random::<f64>() - 0.5)) / m_u as f64;
            let t = (b as f64 + 0.5 + CELL_JITTER * (rng.random::<f64>() - 0.5)) / m_v as f64;
            (s, t)
        })
        .collect()
}

fn stratified(p: &Primitive, n: usize, rng: &mut ChaCha8Rng) -> Vec<Point3> {
    let lerp = |o: Point3, d: Point3, t: f64| [o[0] + t * d[0], o[1] + t * d[1], o[2] + t * d[2]];
    match *p {
        Primitive::Segment { a, b } => (0..n)
            .map(|i| {
                let t = (i as f64 + 0.5 + CELL_JITTER * (rng.random::<f64>() - 0.5)) / n as f64;
                lerp(a, sub(b, a), t)
            })
            .collect(),
        Primitive::Patch { origin, u, v } => grid_samples(n, norm(u), norm(v), rng)
            .into_iter()
            .map(|(s, t)| lerp(lerp(origin, u, s), v, t))
            .collect(),
        Primitive::Cylinder { base, axis, radius } => {
            let (e1, e2) = frame(axis);
            grid_samples(n, norm(axis), std::f64::consts::TAU * radius, rng)
                .into_iter()
                .map(|(s, t)| {
                    let (sn, cs) = (t * std::f64::consts::TAU).sin_cos();
                    let ring = [
                        radius * (cs * e1[0] + sn * e2[0]),
                        radius * (cs * e1[1] + sn * e2[1]),
                        radius * (cs * e1[2] + sn * e2[2]),
                    ];
                    lerp(lerp(base, axis, s), ring, 1.0)
                })
                .collect()
        }
        Primitive::Ellipsoid { .. } => (0..n).map(|_| sample_primitive(p, rng)).collect(),
    }
}

fn validate_primitive(p: &Primitive) -> Result<()> {
    let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
    match *p {
        Primitive::Segment { a, b } if norm(sub(a, b)) == 0.0 => bad("degenerate segment"),
        Primitive::Patch { u, v, .. } if norm(cross(u, v)) == 0.0 => bad("degenerate patch"),
        Primitive::Cylinder { axis, radius, .. } if norm(axis) == 0.0 || radius <= 0.0 => {
            bad("degenerate cylinder")
        }
        Primitive::Ellipsoid { radii, .. } if radii.iter().any(|&r| r <= 0.0) => {
            bad("degenerate ellipsoid")
        }
        _ => Ok(()),
    }
}

fn airplane(points: usize, rng: &mut ChaCha8Rng) -> SynthSample {
    let mut u = |lo: f64, hi: f64| lo + (hi - lo) * rng.random::<f64>();
    let len = u(3.0, 4.0);
    let r = u(0.12, 0.18);
    let chord = u(0.5, 0.8);
    let span = u(1.2, 1.8);
    let sweep = u(0.1, 0.5);
    let dihedral = u(-0.05, 0.15) * span;
    let wing_x = u(-0.35, 0.05) * len;
    let tail_chord = u(0.35, 0.55);
    let fin_h = u(0.45, 0.7);
    let stab_span = u(0.35, 0.6);
    let eng_len = u(0.35, 0.5);
    let eng_r = u(0.07, 0.1);
    let eng_pos = u(0.3, 0.45) * span;

    let half = len / 2.0;
    let budget = [0.40, 0.18, 0.18, 0.06, 0.03, 0.03, 0.06];
    let mut counts: Vec<usize> = budget.iter().map(|f| (f * points as f64).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    counts[0] += points - assigned;

    let eng_x = wing_x + 0.5 * chord + sweep * (eng_pos / span);
    let eng_z = dihedral * (eng_pos / span) - eng_r;
    let prims = [
        (Primitive::Cylinder { base: [-half, 0.0, 0.0], axis: [len, 0.0, 0.0], radius: r }, 0),
        (Primitive::Patch { origin: [wing_x, r, 0.0], u: [chord, 0.0, 0.0], v: [sweep, span, dihedral] }, 1),
        (Primitive::Patch { origin: [wing_x, -r, 0.0], u: [chord, 0.0, 0.0], v: [sweep, -span, dihedral] }, 1),
        (Primitive::Patch { origin: [half - tail_chord, 0.0, r], u: [tail_chord, 0.0, 0.0], v: [0.5 * tail_chord, 0.0, fin_h] }, 2),
        (Primitive::Patch { origin: [half - tail_chord, r, 0.0], u: [tail_chord, 0.0, 0.0], v: [0.3 * tail_chord, stab_span, 0.0] }, 2),
        (Primitive::Patch { origin: [half - tail_chord, -r, 0.0], u: [tail_chord, 0.0, 0.0], v: [0.3 * tail_chord, -stab_span, 0.0] }, 2),
        (Primitive::Ellipsoid { center: [eng_x, r + eng_pos, eng_z], radii: [eng_len, eng_r, eng_r] }, 3),
    ];
    // Second engine mirrors the first; it shares the engine budget.
    let mut parts: Vec<SynthPart> = prims
        .into_iter()
        .zip(counts)
        .map(|((primitive, label), points)| SynthPart { primitive, label, points })
        .collect();
    let engine = parts.pop().unwrap();
    let right = engine.points / 2;
    let Primitive::Ellipsoid { center, radii } = engine.primitive else { unreachable!() };
    parts.push(SynthPart { primitive: Primitive::Ellipsoid { center, radii }, label: 3, points: right });
    parts.push(SynthPart {
        primitive: Primitive::Ellipsoid { center: [center[0], -center[1], center[2]], radii },
        label: 3,
        points: engine.points - right,
    });
    parts.retain(|p| p.points > 0);
    SynthSample { id: None, category: Some(0), parts }
}

fn realize(sample: &SynthSample, id: String, spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Result<PointCloud> {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for part in &sample.parts {
        if part.points == 0 {
            return Err(Error::InvalidArgument(format!("{id}: zero-point primitive")));
        }
        validate_primitive(&part.primitive)?;
        match spec.sampling {
            Sampling::Uniform => points.extend((0..part.points).map(|_| sample_primitive(&part.primitive, rng))),
            Sampling::Stratified => points.extend(stratified(&part.primitive, part.points, rng)),
        }
        labels.extend(std::iter::repeat_n(part.label, part.points));
    }
    if points.is_empty() {
        return Err(Error::EmptySample(id));
    }
    let cloud = PointCloud::new(id, points, None, labels, sample.category)?;
    let (lo, hi) = cloud.bounding_box();
    let sigma = spec.jitter * norm(sub(hi, lo));
    let cloud = if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let jittered = cloud
            .points()
            .iter()
            .map(|p| [p[0] + normal.sample(rng), p[1] + normal.sample(rng), p[2] + normal.sample(rng)])
            .collect();
        cloud.with_points(jittered)?
    } else {
        cloud
    };
    Ok(if spec.normalize { cloud.normalized_unit_box() } else { cloud })
}

/// Builds the dataset described by `spec`; a pure function of `(spec, seed)`.
pub fn generate_synthetic(spec: &SynthSpec, seed: u64) -> Result<Dataset> {
    if spec.jitter < 0.0 || !(0.0..1.0).contains(&spec.test_fraction) {
        return Err(Error::InvalidArgument("jitter must be >= 0 and test_fraction in [0, 1)".into()));
    }
    let mut drafts: Vec<SynthSample> = spec.samples.clone();
    if let Some(fam) = &spec.family {
        for i in 0..fam.count {
            let mut rng = stream(seed, &[1, i as u64]);
            drafts.push(match fam.kind {
                Family::Airplane => airplane(fam.points, &mut rng),
            });
        }
    }
    let mut samples = Vec::with_capacity(drafts.len());
    for (i, draft) in drafts.iter().enumerate() {
        let id = draft.id.clone().unwrap_or_else(|| format!("shape{i:04}"));
        let mut rng = stream(seed, &[2, i as u64]);
        samples.push(realize(draft, id, spec, &mut rng)?);
    }
    let n_test = (spec.test_fraction * samples.len() as f64).floor() as usize;
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut stream(seed, &[3]));
    let mut splits = vec![Split::Train; samples.len()];
    for &i in &order[..n_test] {
        splits[i] = Split::Test;
    }
    Dataset::new(samples, splits, spec.num_classes, spec.class_names.clone())
}
