//! Polynomial vector fields on an affine two-dimensional complex chart:
//! singularity detection and classification, adaptive complex-time flow
//! integration along polylines, distance to the singular set, and flow boxes
//! with sampled plaques.
//!
//! The ambient metric is the Euclidean metric of the chart restricted to an
//! axis-aligned box; trajectories that leave the box or enter the guard
//! radius of a singular point stop with a typed event.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type ChartPoint = [Complex64; 2];

pub fn chart_distance(a: &ChartPoint, b: &ChartPoint) -> f64 {
    ((a[0] - b[0]).norm_sqr() + (a[1] - b[1]).norm_sqr()).sqrt()
}

pub fn chart_norm(v: &ChartPoint) -> f64 {
    (v[0].norm_sqr() + v[1].norm_sqr()).sqrt()
}

#[derive(Debug, Error)]
pub enum FoliationError {
    #[error("vector field is identically zero")]
    ZeroField,
    #[error("coefficient array for degree {degree} needs {expected} entries; got {got}")]
    BadCoefficients { degree: usize, expected: usize, got: usize },
    #[error("trajectory entered the singular guard radius near ({re}, {im}) at path time {time}")]
    SingularApproach { re: f64, im: f64, time: f64 },
    #[error("trajectory left the domain box at path time {time}")]
    DomainExit { time: f64 },
    #[error("step size underflow at path time {time}; the field is too stiff here")]
    StepUnderflow { time: f64 },
    #[error("start point is within the singular guard radius")]
    StartTooSingular,
    #[error("no plaque radius with an injective sampled plaque map was found")]
    NoInjectiveRadius,
}

/// One polynomial in two complex variables, dense coefficients in graded-lex
/// order: degree blocks ascending, within a block x-power descending
/// ((k,0), (k-1,1), ..., (0,k)).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Poly2 {
    pub degree: usize,
    pub coeffs: Vec<(f64, f64)>,
}

impl Poly2 {
    pub fn len_for_degree(degree: usize) -> usize {
        (degree + 1) * (degree + 2) / 2
    }

    pub fn validate(&self) -> Result<(), FoliationError> {
        let expected = Self::len_for_degree(self.degree);
        if self.coeffs.len() != expected {
            return Err(FoliationError::BadCoefficients {
                degree: self.degree,
                expected,
                got: self.coeffs.len(),
            });
        }
        Ok(())
    }

    pub fn eval(&self, x: Complex64, y: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut idx = 0;
        for k in 0..=self.degree {
            // powers x^(k-j) y^j
            let mut xp = vec![Complex64::new(1.0, 0.0); k + 1];
            for j in 1..=k {
                xp[j] = xp[j - 1] * x;
            }
            let mut yp = Complex64::new(1.0, 0.0);
            for j in 0..=k {
                let (re, im) = self.coeffs[idx];
                acc += Complex64::new(re, im) * xp[k - j] * yp;
                yp *= y;
                idx += 1;
            }
        }
        acc
    }

    /// Partial derivatives (d/dx, d/dy).
    pub fn grad(&self, x: Complex64, y: Complex64) -> (Complex64, Complex64) {
        self.grad_exact(x, y)
    }

    fn grad_exact(&self, x: Complex64, y: Complex64) -> (Complex64, Complex64) {
        let mut gx = Complex64::new(0.0, 0.0);
        let mut gy = Complex64::new(0.0, 0.0);
        let mut idx = 0;
        for k in 0..=self.degree {
            for j in 0..=k {
                let (re, im) = self.coeffs[idx];
                let c = Complex64::new(re, im);
                let px = (k - j) as f64;
                let py = j as f64;
                if px > 0.0 {
                    gx += c * px * powc(x, k - j - 1) * powc(y, j);
                }
                if py > 0.0 {
                    gy += c * py * powc(x, k - j) * powc(y, j - 1);
                }
                idx += 1;
            }
        }
        (gx, gy)
    }
}

fn powc(z: Complex64, n: usize) -> Complex64 {
    let mut acc = Complex64::new(1.0, 0.0);
    for _ in 0..n {
        acc *= z;
    }
    acc
}

/// Polynomial vector field `(P(x,y), Q(x,y))` on the chart.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolynomialVectorField {
    pub x_component: Poly2,
    pub y_component: Poly2,
}

impl PolynomialVectorField {
    pub fn new(x_component: Poly2, y_component: Poly2) -> Result<Self, FoliationError> {
        x_component.validate()?;
        y_component.validate()?;
        if x_component.coeffs.iter().all(|&(a, b)| a == 0.0 && b == 0.0)
            && y_component.coeffs.iter().all(|&(a, b)| a == 0.0 && b == 0.0)
        {
            return Err(FoliationError::ZeroField);
        }
        Ok(PolynomialVectorField { x_component, y_component })
    }

    pub fn eval(&self, p: &ChartPoint) -> ChartPoint {
        [
            self.x_component.eval(p[0], p[1]),
            self.y_component.eval(p[0], p[1]),
        ]
    }

    /// Complex Jacobian [[dP/dx, dP/dy], [dQ/dx, dQ/dy]].
    pub fn jacobian(&self, p: &ChartPoint) -> [[Complex64; 2]; 2] {
        let (pxx, pxy) = self.x_component.grad_exact(p[0], p[1]);
        let (qyx, qyy) = self.y_component.grad_exact(p[0], p[1]);
        [[pxx, pxy], [qyx, qyy]]
    }
}

/// Classification of an isolated zero by the eigenvalues of the linear part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SingularityClass {
    /// Invertible linear part.
    NonDegenerate,
    /// Exactly one vanishing eigenvalue.
    SaddleNode,
    /// Nilpotent or zero linear part.
    Degenerate,
}

#[derive(Debug, Clone)]
pub struct SingularPoint {
    pub location: ChartPoint,
    pub class: SingularityClass,
    pub eigenvalues: [Complex64; 2],
}

/// Axis-aligned box in the chart: bounds on Re/Im of both coordinates.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DomainBox {
    pub half_width: f64,
}

impl DomainBox {
    pub fn new(half_width: f64) -> Self {
        DomainBox { half_width }
    }

    pub fn contains(&self, p: &ChartPoint) -> bool {
        let h = self.half_width;
        p[0].re.abs() <= h && p[0].im.abs() <= h && p[1].re.abs() <= h && p[1].im.abs() <= h
    }

    pub fn diameter(&self) -> f64 {
        4.0 * self.half_width // diagonal of the 4-real-dimensional cube
    }
}

/// Eigenvalues of a complex 2x2 matrix, by the quadratic formula.
pub fn eigenvalues_2x2(m: &[[Complex64; 2]; 2]) -> [Complex64; 2] {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = (tr * tr - 4.0 * det).sqrt();
    [(tr + disc) / 2.0, (tr - disc) / 2.0]
}

const EIGEN_ZERO_TOL: f64 = 1e-8;
const NEWTON_TOL: f64 = 1e-12;
const ROOT_MERGE_TOL: f64 = 1e-6;
const RESIDUAL_TOL: f64 = 1e-10;

/// A polynomial vector field together with its domain box, singular set and
/// guard radius.
#[derive(Debug, Clone)]
pub struct FoliatedChart {
    pub field: PolynomialVectorField,
    pub domain: DomainBox,
    pub singular_points: Vec<SingularPoint>,
    pub guard_radius: f64,
}

impl FoliatedChart {
    pub fn new(
        field: PolynomialVectorField,
        domain: DomainBox,
        guard_radius: f64,
    ) -> Result<Self, FoliationError> {
        let singular_points = find_singularities(&field, &domain);
        Ok(FoliatedChart { field, domain, singular_points, guard_radius })
    }

    /// Euclidean distance to the nearest singular point (infinite when the
    /// singular set is empty).
    pub fn distance_to_singular(&self, p: &ChartPoint) -> f64 {
        self.singular_points
            .iter()
            .map(|s| chart_distance(p, &s.location))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Newton-refined common zeros of both components, seeded from a coarse grid;
/// duplicates merged by tolerance, non-converged seeds skipped.
pub fn find_singularities(
    field: &PolynomialVectorField,
    domain: &DomainBox,
) -> Vec<SingularPoint> {
    let h = domain.half_width;
    let n_grid = 6usize;
    let mut roots: Vec<ChartPoint> = Vec::new();
    let axis: Vec<f64> = (0..n_grid)
        .map(|i| -h + (2.0 * h) * (i as f64 + 0.5) / n_grid as f64)
        .collect();
    for &xr in &axis {
        for &xi in &axis {
            for &yr in &axis {
                for &yi in &axis {
                    let seed = [Complex64::new(xr, xi), Complex64::new(yr, yi)];
                    if let Some(root) = newton_refine(field, seed) {
                        let inside = root[0].re.abs() <= h * 1.001
                            && root[0].im.abs() <= h * 1.001
                            && root[1].re.abs() <= h * 1.001
                            && root[1].im.abs() <= h * 1.001;
                        if !inside {
                            continue;
                        }
                        if roots.iter().all(|r| chart_distance(r, &root) > ROOT_MERGE_TOL) {
                            roots.push(root);
                        }
                    }
                }
            }
        }
    }
    roots
        .into_iter()
        .filter(|r| chart_norm(&field.eval(r)) < RESIDUAL_TOL)
        .map(|location| {
            let jac = field.jacobian(&location);
            let eigenvalues = eigenvalues_2x2(&jac);
            let scale = eigenvalues[0].norm().max(eigenvalues[1].norm()).max(1.0);
            let zeros = eigenvalues
                .iter()
                .filter(|e| e.norm() < EIGEN_ZERO_TOL * scale)
                .count();
            let class = match zeros {
                0 => SingularityClass::NonDegenerate,
                1 => SingularityClass::SaddleNode,
                _ => SingularityClass::Degenerate,
            };
            SingularPoint { location, class, eigenvalues }
        })
        .collect()
}

fn newton_refine(field: &PolynomialVectorField, seed: ChartPoint) -> Option<ChartPoint> {
    let mut p = seed;
    for _ in 0..60 {
        let f = field.eval(&p);
        let j = field.jacobian(&p);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.norm() < 1e-14 {
            return None;
        }
        let dx = (f[0] * j[1][1] - f[1] * j[0][1]) / det;
        let dy = (j[0][0] * f[1] - j[1][0] * f[0]) / det;
        p = [p[0] - dx, p[1] - dy];
        if dx.norm() + dy.norm() < NEWTON_TOL {
            let res = field.eval(&p);
            if chart_norm(&res) < RESIDUAL_TOL {
                return Some(p);
            }
            return None;
        }
    }
    None
}

/// Recorded state along an integrated path.
#[derive(Debug, Clone)]
pub struct FlowTrace {
    /// (accumulated path parameter, chart point)
    pub samples: Vec<(f64, ChartPoint)>,
    /// conservative bound on the accumulated local error
    pub error_bound: f64,
}

/// Outcome of [`flow`] when the trajectory stops early.
#[derive(Debug, Clone)]
pub struct FlowStop {
    pub kind: FlowStopKind,
    /// fraction in [0, 1) of the total polyline length covered before the stop
    pub progress: f64,
    pub point: ChartPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowStopKind {
    SingularApproach,
    DomainExit,
    StepUnderflow,
}

/// Dormand-Prince 5(4) coefficients.
const DP_C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0,
    -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0,
];

/// Integration controls for [`flow`].
#[derive(Debug, Clone, Copy)]
pub struct FlowOptions {
    pub tolerance: f64,
    pub record_trace: bool,
    /// extra slack multiplied onto the domain box during boundary landing
    pub box_margin: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { tolerance: 1e-10, record_trace: false, box_margin: 0.0 }
    }
}

/// Integrate `dz/dt = X(z)` along a complex-time polyline from `start`.
///
/// Returns the endpoint and trace, or the stop event (with its trace) if the
/// trajectory exits the domain box or enters the singular guard. The stop
/// point is landed on the boundary by step bisection.
pub fn flow(
    chart: &FoliatedChart,
    start: &ChartPoint,
    path: &[Complex64],
    opts: &FlowOptions,
) -> (Result<ChartPoint, FlowStop>, FlowTrace) {
    let mut trace = FlowTrace { samples: vec![(0.0, *start)], error_bound: 0.0 };
    let guard = chart.guard_radius;
    let half = chart.domain.half_width * (1.0 + opts.box_margin);
    let inside = |p: &ChartPoint| -> bool {
        p[0].re.abs() <= half
            && p[0].im.abs() <= half
            && p[1].re.abs() <= half
            && p[1].im.abs() <= half
            && chart.distance_to_singular(p) > guard
    };
    if chart.distance_to_singular(start) <= guard {
        return (
            Err(FlowStop { kind: FlowStopKind::SingularApproach, progress: 0.0, point: *start }),
            trace,
        );
    }

    let total_len: f64 = path
        .windows(2)
        .map(|w| (w[1] - w[0]).norm())
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    let mut covered = 0.0;
    let mut z = *start;
    let mut prev_node = path.first().copied().unwrap_or(Complex64::new(0.0, 0.0));

    for &node in path.iter().skip(1) {
        let seg = node - prev_node;
        let seg_len = seg.norm();
        prev_node = node;
        if seg_len == 0.0 {
            continue;
        }
        let dir = seg / seg_len;
        let rhs = |p: &ChartPoint| -> ChartPoint {
            let v = chart.field.eval(p);
            [v[0] * dir, v[1] * dir]
        };
        let mut s = 0.0; // arclength along this segment
        let mut hstep = (seg_len / 16.0).min(0.1 / (chart_norm(&rhs(&z)).max(1e-12)));
        while s < seg_len {
            hstep = hstep.min(seg_len - s);
            if hstep < 1e-14 * seg_len.max(1.0) {
                let progress = (covered + s) / total_len;
                return (
                    Err(FlowStop { kind: FlowStopKind::StepUnderflow, progress, point: z }),
                    trace,
                );
            }
            let (z_new, err) = dp_step(&rhs, &z, hstep);
            let scale = opts.tolerance * (1.0 + chart_norm(&z));
            if err > scale && hstep > 1e-13 {
                hstep *= 0.5 * (scale / err).powf(0.2).clamp(0.1, 0.9);
                continue;
            }
            if !inside(&z_new) {
                // bisect the step to land on the boundary
                let mut lo = 0.0;
                let mut hi = hstep;
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    let (zm, _) = dp_step(&rhs, &z, mid);
                    if inside(&zm) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let (zb, _) = dp_step(&rhs, &z, lo.max(1e-300));
                let progress = (covered + s + lo) / total_len;
                let kind = if chart.distance_to_singular(&zb) <= guard * 1.01 {
                    FlowStopKind::SingularApproach
                } else {
                    FlowStopKind::DomainExit
                };
                if opts.record_trace {
                    trace.samples.push((covered + s + lo, zb));
                }
                return (Err(FlowStop { kind, progress, point: zb }), trace);
            }
            z = z_new;
            s += hstep;
            trace.error_bound += err;
            if opts.record_trace {
                trace.samples.push((covered + s, z));
            }
            let grow = if err > 0.0 { 0.9 * (scale / err).powf(0.2) } else { 2.0 };
            hstep *= grow.clamp(0.2, 2.5);
        }
        covered += seg_len;
    }
    if !opts.record_trace {
        trace.samples.push((covered, z));
    }
    (Ok(z), trace)
}

fn dp_step(
    rhs: &dyn Fn(&ChartPoint) -> ChartPoint,
    z: &ChartPoint,
    h: f64,
) -> (ChartPoint, f64) {
    let mut k = [[Complex64::new(0.0, 0.0); 2]; 7];
    k[0] = rhs(z);
    for stage in 0..6 {
        let mut zs = *z;
        for j in 0..=stage {
            let a = DP_A[stage][j] * h;
            zs[0] += k[j][0] * a;
            zs[1] += k[j][1] * a;
        }
        let _ = DP_C; // abscissae are implicit: the rhs is autonomous
        k[stage + 1] = rhs(&zs);
    }
    let mut z5 = *z;
    let mut z4 = *z;
    for j in 0..7 {
        z5[0] += k[j][0] * (DP_B5[j] * h);
        z5[1] += k[j][1] * (DP_B5[j] * h);
        z4[0] += k[j][0] * (DP_B4[j] * h);
        z4[1] += k[j][1] * (DP_B4[j] * h);
    }
    let err = chart_distance(&z5, &z4);
    (z5, err)
}

/// Convenience: flow along the straight segment `0 -> t`.
pub fn flow_segment(
    chart: &FoliatedChart,
    start: &ChartPoint,
    t: Complex64,
    opts: &FlowOptions,
) -> (Result<ChartPoint, FlowStop>, FlowTrace) {
    flow(chart, start, &[Complex64::new(0.0, 0.0), t], opts)
}

/// Flow box around a base point: a finite transversal and a complex-time
/// plaque radius such that the sampled plaque map is injective.
#[derive(Debug, Clone)]
pub struct FlowBox {
    pub center: ChartPoint,
    /// transversal points, index 0 is the center
    pub transversal: Vec<ChartPoint>,
    /// plaque coordinate is a complex time in the disk of this radius
    pub plaque_radius: f64,
    /// sampled plaque points: `plaque_samples[t][k]` lies on the plaque of
    /// transversal point `t`
    pub plaque_samples: Vec<Vec<ChartPoint>>,
    /// the complex times used for the samples (shared across plaques)
    pub sample_times: Vec<Complex64>,
}

impl FlowBox {
    /// Index of the plaque whose samples come closest to `p`, with the
    /// distance achieved.
    pub fn nearest_plaque(&self, p: &ChartPoint) -> (usize, f64) {
        let mut best = (0usize, f64::INFINITY);
        for (ti, samples) in self.plaque_samples.iter().enumerate() {
            for s in samples {
                let d = chart_distance(p, s);
                if d < best.1 {
                    best = (ti, d);
                }
            }
        }
        best
    }

    /// Nearest sample of one plaque: (sample-time index, distance).
    pub fn nearest_sample_on(&self, plaque: usize, p: &ChartPoint) -> (usize, f64) {
        let mut best = (0usize, f64::INFINITY);
        for (k, s) in self.plaque_samples[plaque].iter().enumerate() {
            let d = chart_distance(p, s);
            if d < best.1 {
                best = (k, d);
            }
        }
        best
    }

    /// Chart-space reach of a plaque: how far its samples extend from its
    /// transversal point. Used as the assignment cutoff scale.
    pub fn plaque_radius_chart_scale(&self) -> f64 {
        self.plaque_samples
            .first()
            .map(|samples| {
                samples
                    .iter()
                    .map(|s| chart_distance(s, &self.transversal[0]))
                    .fold(0.0, f64::max)
            })
            .unwrap_or(0.0)
    }
}

const MIN_CROSS_PLAQUE_FACTOR: f64 = 0.3;

/// Build a flow box at `x`: transversal offsets along a direction
/// Hermitian-orthogonal to `X(x)`, plaque radius found by bisection on the
/// sampled injectivity predicate.
pub fn build_flow_box(
    chart: &FoliatedChart,
    x: &ChartPoint,
    transversal_count: usize,
    transversal_radius: f64,
) -> Result<FlowBox, FoliationError> {
    if chart.distance_to_singular(x) <= chart.guard_radius * 2.0 {
        return Err(FoliationError::StartTooSingular);
    }
    let v = chart.field.eval(x);
    let vn = chart_norm(&v);
    if vn < 1e-14 {
        return Err(FoliationError::StartTooSingular);
    }
    // unit normal: <X, normal>_Hermitian = 0
    let normal = [-(v[1] / vn).conj(), (v[0] / vn).conj()];

    let mut transversal = vec![*x];
    let rings = 2usize;
    let per_ring = (transversal_count.saturating_sub(1)).max(4) / rings;
    for ring in 1..=rings {
        let rad = transversal_radius * ring as f64 / rings as f64;
        for k in 0..per_ring {
            let phase = Complex64::from_polar(rad, 2.0 * std::f64::consts::PI * k as f64 / per_ring as f64);
            transversal.push([x[0] + normal[0] * phase, x[1] + normal[1] * phase]);
        }
    }

    let sample_times_unit: Vec<Complex64> = {
        let mut v = vec![Complex64::new(0.0, 0.0)];
        for ring in [0.5, 1.0] {
            for k in 0..8 {
                v.push(Complex64::from_polar(ring, 2.0 * std::f64::consts::PI * k as f64 / 8.0));
            }
        }
        v
    };

    let opts = FlowOptions { tolerance: 1e-10, record_trace: false, box_margin: 0.05 };
    let sample_plaques = |r0: f64| -> Option<Vec<Vec<ChartPoint>>> {
        let mut all = Vec::with_capacity(transversal.len());
        for t in &transversal {
            let mut plaque = Vec::with_capacity(sample_times_unit.len());
            for &u in &sample_times_unit {
                match flow_segment(chart, t, u * r0, &opts) {
                    (Ok(p), _) => plaque.push(p),
                    (Err(_), _) => return None,
                }
            }
            all.push(plaque);
        }
        Some(all)
    };
    let injective = |samples: &[Vec<ChartPoint>]| -> bool {
        let spacing = transversal_radius / rings as f64;
        for i in 0..samples.len() {
            for j in (i + 1)..samples.len() {
                for a in &samples[i] {
                    for b in &samples[j] {
                        if chart_distance(a, b) < MIN_CROSS_PLAQUE_FACTOR * spacing {
                            return false;
                        }
                    }
                }
            }
        }
        true
    };

    // bisect on the plaque time-radius; start from the scale on which the
    // flow moves about one box width
    let mut hi = chart.domain.half_width / vn;
    let mut best: Option<(f64, Vec<Vec<ChartPoint>>)> = None;
    for _ in 0..10 {
        match sample_plaques(hi) {
            Some(samples) if injective(&samples) => {
                best = Some((hi, samples));
                break;
            }
            _ => hi *= 0.5,
        }
    }
    let (r0, plaque_samples) = best.ok_or(FoliationError::NoInjectiveRadius)?;
    let sample_times = sample_times_unit.iter().map(|&u| u * r0).collect();
    Ok(FlowBox {
        center: *x,
        transversal,
        plaque_radius: r0,
        plaque_samples,
        sample_times,
    })
}
