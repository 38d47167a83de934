//! Weighted point measures: Birkhoff-type kernel sampling on a uniformized
//! leaf, mass near the singular set, weak-convergence diagnostics against a
//! fixed test-function dictionary, and flow-box disintegration into a
//! transversal measure times per-plaque densities.
//!
//! The kernel measure `m_{x,R}` weights the disk point `zeta` by
//! `log^+(r/|zeta|)` against the hyperbolic area element, normalized by
//! `M_R = -2 pi log(1 - r^2)`, and pushes forward along the leaf map.

use crate::disk::HypRadius;
use crate::foliation::{chart_distance, ChartPoint, FlowBox, FoliatedChart};
use crate::uniformize::LeafUniformization;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("sample count must be positive")]
    EmptySample,
    #[error("flow box holds {got} assigned atoms; at least {minimum} required")]
    TooFewAtoms { got: usize, minimum: usize },
}

/// Where a measure came from, for manifests and reproducibility.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Provenance {
    /// Birkhoff-type kernel measure at the given radius
    Kernel { radius: f64, seed: u64, n: usize, log_radial: bool },
    /// stands in for the harmonic measure: kernel measure at the largest
    /// feasible radius from a recorded generic starting point
    Empirical { radius: f64, seed: u64, n: usize },
    Synthetic,
}

#[derive(Debug, Clone)]
pub struct MeasureAtom {
    pub position: ChartPoint,
    pub weight: f64,
    /// disk coordinate in the base leaf's uniformization, when the atom
    /// lives on a traced leaf
    pub zeta: Option<Complex64>,
}

/// Finite weighted point cloud with unit total mass.
#[derive(Debug, Clone)]
pub struct WeightedPointMeasure {
    pub atoms: Vec<MeasureAtom>,
    pub provenance: Provenance,
    /// effective sample size `(sum w)^2 / sum w^2` before normalization
    pub effective_sample_size: f64,
}

impl WeightedPointMeasure {
    pub fn normalize(&mut self) {
        let total: f64 = self.atoms.iter().map(|a| a.weight).sum();
        if total > 0.0 {
            for a in self.atoms.iter_mut() {
                a.weight /= total;
            }
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// Integral of a function of the chart position.
    pub fn integrate(&self, f: impl Fn(&ChartPoint) -> f64) -> f64 {
        self.atoms.iter().map(|a| a.weight * f(&a.position)).sum()
    }
}

/// Unnormalized radial cumulative mass of the kernel:
/// `F(rho) = 2 rho^2/(1-rho^2) log(r/rho) - log(1-rho^2)`, increasing on
/// `(0, r)` with `F(r) = -log(1 - r^2)`.
pub fn radial_kernel_cumulative(rho: f64, r: f64) -> f64 {
    if rho <= 0.0 {
        return 0.0;
    }
    let omr2 = (1.0 - rho) * (1.0 + rho);
    2.0 * rho * rho / omr2 * ((r - rho) / rho).ln_1p() - omr2.ln()
}

/// Normalized radial density of the kernel measure on `(0, r)`.
pub fn radial_kernel_density(rho: f64, r: f64) -> f64 {
    let omr2 = (1.0 - rho) * (1.0 + rho);
    (r / rho).ln() * 4.0 * rho / (omr2 * omr2) / radial_kernel_cumulative(r - f64::EPSILON, r).max(f64::MIN_POSITIVE)
}

fn radial_quantile(u: f64, r: f64) -> f64 {
    let total = radial_kernel_cumulative(r * (1.0 - 1e-15), r);
    let target = u * total;
    let mut lo = 0.0f64;
    let mut hi = r;
    for _ in 0..70 {
        let mid = 0.5 * (lo + hi);
        if radial_kernel_cumulative(mid, r) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Options for [`sample_kernel_measure`].
#[derive(Debug, Clone, Copy)]
pub struct KernelSampleOptions {
    pub n: usize,
    pub seed: u64,
    /// importance-sample the radius log-uniformly so Bowen-ball masses keep
    /// effective atoms at every scale `e^{-R}`; weights carry the density
    /// ratio (used by the entropy estimators, not the marginal tests)
    pub log_radial: bool,
    /// deepest log-radius for the log-radial proposal
    pub log_radial_depth: f64,
    /// compute chart positions (anchored flows); pure-disk uses can skip
    pub with_positions: bool,
}

impl Default for KernelSampleOptions {
    fn default() -> Self {
        KernelSampleOptions {
            n: 10_000,
            seed: 1,
            log_radial: false,
            log_radial_depth: 14.0,
            with_positions: true,
        }
    }
}

/// Sample the kernel measure `m_{x,R}` on a uniformized leaf.
///
/// Faithful mode draws `|zeta|` by inverse CDF (uniform weights); log-radial
/// mode draws `-log|zeta|` uniformly down to `log_radial_depth` and reweights.
/// Deterministic for a fixed seed, bit for bit.
pub fn sample_kernel_measure(
    chart: &FoliatedChart,
    leaf: &LeafUniformization,
    radius: &HypRadius,
    opts: &KernelSampleOptions,
) -> Result<WeightedPointMeasure, MeasureError> {
    if opts.n == 0 {
        return Err(MeasureError::EmptySample);
    }
    let r = radius.euclidean();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut atoms = Vec::with_capacity(opts.n);
    let total_mass = radial_kernel_cumulative(r * (1.0 - 1e-15), r);
    let v_min = -r.ln();
    let v_max = opts.log_radial_depth.max(v_min + 1.0);
    for _ in 0..opts.n {
        let (rho, weight) = if opts.log_radial {
            let v = v_min + rng.gen::<f64>() * (v_max - v_min);
            let rho = (-v).exp();
            // density ratio p/q with q the log-uniform radial proposal
            let omr2 = (1.0 - rho) * (1.0 + rho);
            let p = (r / rho).ln() * 4.0 * rho / (omr2 * omr2) / total_mass;
            let q = 1.0 / ((v_max - v_min) * rho);
            (rho, p / q)
        } else {
            (radial_quantile(rng.gen::<f64>(), r), 1.0)
        };
        let angle = rng.gen::<f64>() * 2.0 * PI;
        let zeta = Complex64::from_polar(rho, angle);
        let position = if opts.with_positions {
            leaf.evaluate_anchored(chart, zeta)
        } else {
            leaf.base
        };
        atoms.push(MeasureAtom { position, weight, zeta: Some(zeta) });
    }
    let sum: f64 = atoms.iter().map(|a| a.weight).sum();
    let sum2: f64 = atoms.iter().map(|a| a.weight * a.weight).sum();
    let mut measure = WeightedPointMeasure {
        atoms,
        provenance: Provenance::Kernel {
            radius: radius.hyperbolic(),
            seed: opts.seed,
            n: opts.n,
            log_radial: opts.log_radial,
        },
        effective_sample_size: if sum2 > 0.0 { sum * sum / sum2 } else { 0.0 },
    };
    measure.normalize();
    Ok(measure)
}

/// Total weight within distance `rho` of the singular set.
pub fn mass_near_singular(m: &WeightedPointMeasure, chart: &FoliatedChart, rho: f64) -> f64 {
    m.atoms
        .iter()
        .filter(|a| chart.distance_to_singular(&a.position) <= rho)
        .map(|a| a.weight)
        .sum()
}

/// One member of the fixed weak-convergence dictionary: a coordinate
/// monomial times a smooth bump supported in the domain box.
#[derive(Debug, Clone, Copy)]
pub struct TestFunction {
    /// exponents of (re x, im x, re y, im y), total degree <= 2
    pub exponents: [u8; 4],
}

impl TestFunction {
    pub fn eval(&self, p: &ChartPoint, half_width: f64) -> f64 {
        let coords = [p[0].re, p[0].im, p[1].re, p[1].im];
        let mut value = 1.0;
        for (c, &e) in coords.iter().zip(&self.exponents) {
            let u = c / half_width;
            if u.abs() >= 1.0 {
                return 0.0;
            }
            value *= (1.0 - 1.0 / (1.0 - u * u)).exp();
            for _ in 0..e {
                value *= u;
            }
        }
        value
    }
}

/// Dictionary v1: all monomials of total degree at most 2 in the four real
/// coordinates, bump-localized to the box. Fixed for reproducibility.
pub fn test_dictionary() -> Vec<TestFunction> {
    let mut dict = Vec::new();
    for a in 0..=2u8 {
        for b in 0..=2u8 {
            for c in 0..=2u8 {
                for d in 0..=2u8 {
                    if a + b + c + d <= 2 {
                        dict.push(TestFunction { exponents: [a, b, c, d] });
                    }
                }
            }
        }
    }
    dict
}

/// Cauchy-style weak gap: the largest difference of dictionary integrals.
pub fn weak_gap(
    m1: &WeightedPointMeasure,
    m2: &WeightedPointMeasure,
    dictionary: &[TestFunction],
    half_width: f64,
) -> f64 {
    dictionary
        .iter()
        .map(|f| {
            (m1.integrate(|p| f.eval(p, half_width)) - m2.integrate(|p| f.eval(p, half_width)))
                .abs()
        })
        .fold(0.0, f64::max)
}

/// Disintegration of a measure over a flow box: transversal weights plus
/// kernel-smoothed plaque densities normalized to 1 at the plaque center.
#[derive(Debug, Clone)]
pub struct Disintegration {
    /// raw transversal weights (not normalized; the transversal measure is a
    /// finite measure, not a probability)
    pub nu: Vec<f64>,
    /// per-plaque density samples on the plaque time-disk grid
    pub densities: Vec<Vec<f64>>,
    /// grid of complex plaque times shared by all densities
    pub density_grid: Vec<Complex64>,
    pub assigned: usize,
    pub ignored: usize,
    pub bandwidth: f64,
    /// per-plaque atom lists (indices into the source measure)
    pub members: Vec<Vec<usize>>,
}

impl Disintegration {
    /// sup/inf ratio of the smoothed density over the inner half-disk, for
    /// Harnack-type sanity checks
    pub fn density_ratio(&self, plaque: usize, r0: f64) -> Option<f64> {
        let mut sup = f64::NEG_INFINITY;
        let mut inf = f64::INFINITY;
        for (w, &t) in self.densities[plaque].iter().zip(&self.density_grid) {
            if t.norm() <= r0 / 2.0 && *w > 0.0 {
                sup = sup.max(*w);
                inf = inf.min(*w);
            }
        }
        (inf > 0.0 && inf.is_finite() && sup.is_finite()).then_some(sup / inf)
    }
}

/// Default smoothing bandwidth: a tenth of the plaque radius.
pub fn default_bandwidth(fb: &FlowBox) -> f64 {
    fb.plaque_radius / 10.0
}

/// Bin the atoms of `m` by nearest plaque of the flow box and smooth the
/// plaque densities. Atoms farther than the box's own sample spread are
/// ignored and counted.
pub fn disintegrate(
    m: &WeightedPointMeasure,
    fb: &FlowBox,
    bandwidth: f64,
    min_atoms: usize,
) -> Result<Disintegration, MeasureError> {
    let cutoff = 2.0 * fb.plaque_radius_chart_scale();
    let n_plaques = fb.transversal.len();
    let mut nu = vec![0.0; n_plaques];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_plaques];
    let mut atom_times: Vec<Complex64> = Vec::with_capacity(m.atoms.len());
    let mut assigned = 0;
    let mut ignored = 0;
    for (i, atom) in m.atoms.iter().enumerate() {
        let (plaque, dist) = fb.nearest_plaque(&atom.position);
        if dist <= cutoff {
            nu[plaque] += atom.weight;
            members[plaque].push(i);
            let (t_idx, _) = fb.nearest_sample_on(plaque, &atom.position);
            atom_times.push(fb.sample_times[t_idx]);
            assigned += 1;
        } else {
            atom_times.push(Complex64::new(0.0, 0.0));
            ignored += 1;
        }
    }
    if assigned < min_atoms {
        return Err(MeasureError::TooFewAtoms { got: assigned, minimum: min_atoms });
    }

    // density evaluation grid on the plaque time-disk
    let mut density_grid = vec![Complex64::new(0.0, 0.0)];
    for ring in 1..=3 {
        let rr = fb.plaque_radius * ring as f64 / 3.0;
        for k in 0..8 {
            density_grid.push(Complex64::from_polar(rr, 2.0 * PI * k as f64 / 8.0));
        }
    }
    let kernel = |d: f64| (-0.5 * (d / bandwidth) * (d / bandwidth)).exp();
    let mut densities = Vec::with_capacity(n_plaques);
    for plaque in 0..n_plaques {
        let raw: Vec<f64> = density_grid
            .iter()
            .map(|&t| {
                members[plaque]
                    .iter()
                    .map(|&i| m.atoms[i].weight * kernel((atom_times[i] - t).norm()))
                    .sum::<f64>()
            })
            .collect();
        let at_zero = raw[0];
        densities.push(if at_zero > 0.0 {
            raw.iter().map(|v| v / at_zero).collect()
        } else {
            raw
        });
    }
    Ok(Disintegration {
        nu,
        densities,
        density_grid,
        assigned,
        ignored,
        bandwidth,
        members,
    })
}

/// One-sample Kolmogorov-Smirnov test against an exact CDF; returns the
/// statistic and the asymptotic p-value.
pub fn ks_test(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i as f64 + 1.0) / n - f).abs());
    }
    let lambda = n.sqrt() * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        p += 2.0 * (-1.0f64).powi(k + 1) * (-2.0 * kf * kf * lambda * lambda).exp();
    }
    (d, p.clamp(0.0, 1.0))
}
