//! Strictly convex domains, discretized boundaries, curvature data, and the
//! support function used by the Rellich identity.
//!
//! Planar domains live in the z = 0 plane so that points, normals, and dot
//! products share one representation with the ball.

use crate::error::{Error, Result};
use crate::legendre::gauss_legendre;
use nalgebra::Vector3;
use std::f64::consts::PI;

pub type Point = Vector3<f64>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DomainKind {
    Disk { radius: f64 },
    Ball { radius: f64 },
    Ellipse { a: f64, b: f64 },
    /// Boundary radius r(theta) = radius * (1 + amplitude * cos(frequency * theta)).
    PerturbedDisk { radius: f64, amplitude: f64, frequency: u32 },
}

/// A validated strictly convex domain plus the interior base point x0 from
/// which the support function g(x) = <x - x0, nu(x)> is measured.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub dim: usize,
    pub x0: Point,
}

/// Number of samples used to certify strict convexity of a perturbed disk:
/// 16x the largest default boundary grid.
const CONVEXITY_SAMPLES: usize = 1 << 14;

impl DomainSpec {
    pub fn disk(radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "disk radius must be positive, got {radius}"
            )));
        }
        Ok(DomainSpec { kind: DomainKind::Disk { radius }, dim: 2, x0: Point::zeros() })
    }

    pub fn ball(radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(DomainSpec { kind: DomainKind::Ball { radius }, dim: 3, x0: Point::zeros() })
    }

    pub fn ellipse(a: f64, b: f64) -> Result<Self> {
        if !(b > 0.0 && a >= b) {
            return Err(Error::InvalidParameter(format!(
                "ellipse semi-axes must satisfy a >= b > 0, got a={a}, b={b}"
            )));
        }
        Ok(DomainSpec { kind: DomainKind::Ellipse { a, b }, dim: 2, x0: Point::zeros() })
    }

    pub fn perturbed_disk(radius: f64, amplitude: f64, frequency: u32) -> Result<Self> {
        if !(radius > 0.0) || !(amplitude >= 0.0) || amplitude >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "perturbed disk needs radius > 0 and 0 <= amplitude < 1, got R={radius}, eps={amplitude}"
            )));
        }
        if frequency < 2 {
            return Err(Error::InvalidParameter(format!(
                "perturbation frequency must be >= 2, got {frequency}"
            )));
        }
        let spec = DomainSpec {
            kind: DomainKind::PerturbedDisk { radius, amplitude, frequency },
            dim: 2,
            // The centroid is the origin exactly: the area moments of
            // r(theta)^3 against cos/sin pick out frequencies {1, p-1, p,
            // p+1, 2p+-1, 3p}, none of which is 0 when p >= 2.
            x0: Point::zeros(),
        };
        let mut kappa_min = f64::INFINITY;
        for i in 0..CONVEXITY_SAMPLES {
            let t = 2.0 * PI * i as f64 / CONVEXITY_SAMPLES as f64;
            kappa_min = kappa_min.min(spec.curvature_at(t));
        }
        if kappa_min <= 0.0 {
            return Err(Error::ConvexityViolation(format!(
                "perturbed disk R={radius}, eps={amplitude}, p={frequency} has min curvature {kappa_min:.3e}"
            )));
        }
        Ok(spec)
    }

    /// Replaces the base point; the point must be strictly interior.
    pub fn with_x0(mut self, x0: Point) -> Result<Self> {
        if self.dim == 2 && x0.z != 0.0 {
            return Err(Error::InvalidParameter(
                "planar base point must have zero z component".into(),
            ));
        }
        if !self.is_interior(&x0) {
            return Err(Error::InvalidParameter(format!(
                "base point ({}, {}, {}) is not strictly interior",
                x0.x, x0.y, x0.z
            )));
        }
        self.x0 = x0;
        Ok(self)
    }

    pub fn is_interior(&self, p: &Point) -> bool {
        match self.kind {
            DomainKind::Disk { radius } => p.z == 0.0 && p.xy().norm() < radius,
            DomainKind::Ball { radius } => p.norm() < radius,
            DomainKind::Ellipse { a, b } => {
                p.z == 0.0 && (p.x / a).powi(2) + (p.y / b).powi(2) < 1.0
            }
            DomainKind::PerturbedDisk { radius, amplitude, frequency } => {
                let r = p.xy().norm();
                let theta = p.y.atan2(p.x);
                p.z == 0.0 && r < radius * (1.0 + amplitude * (frequency as f64 * theta).cos())
            }
        }
    }

    /// Boundary point at curve parameter t (planar domains only).
    pub fn boundary_point(&self, t: f64) -> Point {
        match self.kind {
            DomainKind::Disk { radius } => Point::new(radius * t.cos(), radius * t.sin(), 0.0),
            DomainKind::Ellipse { a, b } => Point::new(a * t.cos(), b * t.sin(), 0.0),
            DomainKind::PerturbedDisk { .. } => {
                let r = self.polar_radius(t);
                Point::new(r * t.cos(), r * t.sin(), 0.0)
            }
            DomainKind::Ball { .. } => unreachable!("boundary_point is for planar domains"),
        }
    }

    /// dx/dt of the boundary parametrization (planar domains only).
    pub fn boundary_velocity(&self, t: f64) -> Point {
        match self.kind {
            DomainKind::Disk { radius } => Point::new(-radius * t.sin(), radius * t.cos(), 0.0),
            DomainKind::Ellipse { a, b } => Point::new(-a * t.sin(), b * t.cos(), 0.0),
            DomainKind::PerturbedDisk { .. } => {
                let (r, dr) = self.polar_radius_d1(t);
                Point::new(
                    dr * t.cos() - r * t.sin(),
                    dr * t.sin() + r * t.cos(),
                    0.0,
                )
            }
            DomainKind::Ball { .. } => unreachable!("boundary_velocity is for planar domains"),
        }
    }

    pub fn boundary_speed(&self, t: f64) -> f64 {
        self.boundary_velocity(t).norm()
    }

    /// Outward unit normal at curve parameter t (planar, counterclockwise
    /// parametrization: nu = (y', -x') / |v|).
    pub fn outward_normal(&self, t: f64) -> Point {
        let v = self.boundary_velocity(t);
        let s = v.norm();
        Point::new(v.y / s, -v.x / s, 0.0)
    }

    /// Curve curvature kappa at parameter t for planar domains; mean
    /// curvature H = 1/R for the ball (parameter ignored there).
    pub fn curvature_at(&self, t: f64) -> f64 {
        match self.kind {
            DomainKind::Disk { radius } => 1.0 / radius,
            DomainKind::Ball { radius } => 1.0 / radius,
            DomainKind::Ellipse { a, b } => {
                let s2 = (a * t.sin()).powi(2) + (b * t.cos()).powi(2);
                a * b / s2.powf(1.5)
            }
            DomainKind::PerturbedDisk { .. } => {
                let (r, dr, ddr) = self.polar_radius_d2(t);
                (r * r + 2.0 * dr * dr - r * ddr) / (r * r + dr * dr).powf(1.5)
            }
        }
    }

    fn polar_radius(&self, theta: f64) -> f64 {
        match self.kind {
            DomainKind::PerturbedDisk { radius, amplitude, frequency } => {
                radius * (1.0 + amplitude * (frequency as f64 * theta).cos())
            }
            _ => unreachable!("polar_radius is for perturbed disks"),
        }
    }

    fn polar_radius_d1(&self, theta: f64) -> (f64, f64) {
        match self.kind {
            DomainKind::PerturbedDisk { radius, amplitude, frequency } => {
                let p = frequency as f64;
                (
                    radius * (1.0 + amplitude * (p * theta).cos()),
                    -radius * amplitude * p * (p * theta).sin(),
                )
            }
            _ => unreachable!("polar_radius_d1 is for perturbed disks"),
        }
    }

    fn polar_radius_d2(&self, theta: f64) -> (f64, f64, f64) {
        match self.kind {
            DomainKind::PerturbedDisk { radius, amplitude, frequency } => {
                let p = frequency as f64;
                let (r, dr) = self.polar_radius_d1(theta);
                (r, dr, -radius * amplitude * p * p * (p * theta).cos())
            }
            _ => unreachable!("polar_radius_d2 is for perturbed disks"),
        }
    }

    /// |Omega|: area for planar domains, volume for the ball. The perturbed
    /// disk uses the periodic trapezoid rule on r^2/2, exact to machine
    /// precision for its finite Fourier content.
    pub fn volume(&self) -> f64 {
        match self.kind {
            DomainKind::Disk { radius } => PI * radius * radius,
            DomainKind::Ball { radius } => 4.0 / 3.0 * PI * radius.powi(3),
            DomainKind::Ellipse { a, b } => PI * a * b,
            DomainKind::PerturbedDisk { .. } => {
                let n = 4096;
                let mut s = 0.0;
                for i in 0..n {
                    let t = 2.0 * PI * i as f64 / n as f64;
                    s += 0.5 * self.polar_radius(t).powi(2);
                }
                s * 2.0 * PI / n as f64
            }
        }
    }

    /// |dOmega|: perimeter (d = 2) or surface area (d = 3). Non-circular
    /// perimeters come from the periodic trapezoid rule on the speed,
    /// refined by doubling until two consecutive levels agree to 1e-13.
    pub fn boundary_measure(&self) -> f64 {
        match self.kind {
            DomainKind::Disk { radius } => 2.0 * PI * radius,
            DomainKind::Ball { radius } => 4.0 * PI * radius * radius,
            DomainKind::Ellipse { .. } | DomainKind::PerturbedDisk { .. } => {
                let quad = |n: usize| -> f64 {
                    let mut s = 0.0;
                    for i in 0..n {
                        let t = 2.0 * PI * i as f64 / n as f64;
                        s += self.boundary_speed(t);
                    }
                    s * 2.0 * PI / n as f64
                };
                let mut n = 64;
                let mut prev = quad(n);
                loop {
                    n *= 2;
                    let next = quad(n);
                    if (next - prev).abs() <= 1e-13 * next.abs() || n >= (1 << 20) {
                        return next;
                    }
                    prev = next;
                }
            }
        }
    }

    /// Leading Weyl coefficient c with lambda_k ~ c k^{2/d}:
    /// c = 4 pi^2 (omega_d |Omega|)^{-2/d}, omega_d the unit-ball volume.
    pub fn weyl_reference(&self) -> f64 {
        let omega_d = match self.dim {
            2 => PI,
            3 => 4.0 / 3.0 * PI,
            _ => unreachable!(),
        };
        4.0 * PI * PI * (omega_d * self.volume()).powf(-2.0 / self.dim as f64)
    }

    /// Two-term Weyl counting estimate with the Dirichlet boundary
    /// correction: |Omega| Lambda / (4 pi) - |dOmega| sqrt(Lambda) / (4 pi)
    /// in the plane, |Omega| Lambda^{3/2} / (6 pi^2) - |dOmega| Lambda /
    /// (16 pi) in space.
    pub fn two_term_weyl(&self, lambda: f64) -> f64 {
        let vol = self.volume();
        let per = self.boundary_measure();
        match self.dim {
            2 => vol * lambda / (4.0 * PI) - per * lambda.sqrt() / (4.0 * PI),
            3 => vol * lambda.powf(1.5) / (6.0 * PI * PI) - per * lambda / (16.0 * PI),
            _ => unreachable!(),
        }
    }
}

/// Grid resolution request: node count along the curve (d = 2) or polar x
/// azimuthal counts on the sphere (d = 3).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GridSize {
    Curve(usize),
    Sphere { n_polar: usize, n_azimuth: usize },
}

/// Discretized boundary: nodes, arclength/area quadrature weights, outward
/// unit normals, mean curvature, and support function samples.
///
/// Invariants established at construction: all normals unit, support_g > 0
/// everywhere (else the build fails), quadrature weights positive and
/// summing to |dOmega| up to spectral quadrature error.
#[derive(Clone, Debug)]
pub struct BoundaryGrid {
    pub domain: DomainSpec,
    pub nodes: Vec<Point>,
    /// Curve parameter [t, 0] for planar grids; [theta, phi] on the sphere.
    pub params: Vec<[f64; 2]>,
    pub quad_weights: Vec<f64>,
    pub normals: Vec<Point>,
    pub curvature_h: Vec<f64>,
    pub support_g: Vec<f64>,
    pub h_bar: f64,
}

impl BoundaryGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Sum of quadrature weights; equals |dOmega| up to quadrature error.
    pub fn measure(&self) -> f64 {
        self.quad_weights.iter().sum()
    }

    /// (m, M) = (min g, max g); both strictly positive on a valid grid.
    pub fn g_bounds(&self) -> Result<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &g in &self.support_g {
            lo = lo.min(g);
            hi = hi.max(g);
        }
        if !(lo > 0.0) {
            return Err(Error::NonPositiveSupport(format!(
                "min support function {lo:.3e} <= 0; base point not strictly interior or boundary not convex"
            )));
        }
        Ok((lo, hi))
    }

    /// Boundary quadrature of arbitrary node samples.
    pub fn integrate(&self, samples: &[f64]) -> Result<f64> {
        if samples.len() != self.len() {
            return Err(Error::GridMismatch(format!(
                "sample vector has {} entries, grid has {}",
                samples.len(),
                self.len()
            )));
        }
        Ok(samples.iter().zip(&self.quad_weights).map(|(s, w)| s * w).sum())
    }
}

pub fn build_grid(domain: &DomainSpec, size: GridSize) -> Result<BoundaryGrid> {
    match (domain.dim, size) {
        (2, GridSize::Curve(n)) => {
            if n < 64 {
                return Err(Error::InvalidParameter(format!(
                    "planar grids need at least 64 nodes, got {n}"
                )));
            }
            build_curve_grid(domain, n)
        }
        (3, GridSize::Sphere { n_polar, n_azimuth }) => {
            if n_polar < 4 || n_azimuth < 8 {
                return Err(Error::InvalidParameter(format!(
                    "sphere grids need n_polar >= 4 and n_azimuth >= 8, got ({n_polar}, {n_azimuth})"
                )));
            }
            build_sphere_grid(domain, n_polar, n_azimuth)
        }
        (d, s) => Err(Error::InvalidParameter(format!(
            "grid size {s:?} does not match domain dimension {d}"
        ))),
    }
}

fn build_curve_grid(domain: &DomainSpec, n: usize) -> Result<BoundaryGrid> {
    let mut grid = BoundaryGrid {
        domain: domain.clone(),
        nodes: Vec::with_capacity(n),
        params: Vec::with_capacity(n),
        quad_weights: Vec::with_capacity(n),
        normals: Vec::with_capacity(n),
        curvature_h: Vec::with_capacity(n),
        support_g: Vec::with_capacity(n),
        h_bar: 0.0,
    };
    let dt = 2.0 * PI / n as f64;
    for i in 0..n {
        let t = dt * i as f64;
        let x = domain.boundary_point(t);
        let nu = domain.outward_normal(t);
        grid.nodes.push(x);
        grid.params.push([t, 0.0]);
        grid.quad_weights.push(domain.boundary_speed(t) * dt);
        grid.normals.push(nu);
        grid.curvature_h.push(domain.curvature_at(t));
        grid.support_g.push((x - domain.x0).dot(&nu));
    }
    finish_grid(grid)
}

fn build_sphere_grid(domain: &DomainSpec, n_polar: usize, n_azimuth: usize) -> Result<BoundaryGrid> {
    let radius = match domain.kind {
        DomainKind::Ball { radius } => radius,
        _ => unreachable!(),
    };
    let (cts, cws) = gauss_legendre(n_polar);
    let n = n_polar * n_azimuth;
    let mut grid = BoundaryGrid {
        domain: domain.clone(),
        nodes: Vec::with_capacity(n),
        params: Vec::with_capacity(n),
        quad_weights: Vec::with_capacity(n),
        normals: Vec::with_capacity(n),
        curvature_h: Vec::with_capacity(n),
        support_g: Vec::with_capacity(n),
        h_bar: 0.0,
    };
    let dphi = 2.0 * PI / n_azimuth as f64;
    for (ct, cw) in cts.iter().zip(&cws) {
        let theta = ct.acos();
        let st = (1.0 - ct * ct).sqrt();
        for i in 0..n_azimuth {
            let phi = dphi * i as f64;
            let nu = Point::new(st * phi.cos(), st * phi.sin(), *ct);
            let x = nu * radius;
            grid.nodes.push(x);
            grid.params.push([theta, phi]);
            grid.quad_weights.push(radius * radius * cw * dphi);
            grid.normals.push(nu);
            grid.curvature_h.push(1.0 / radius);
            grid.support_g.push((x - domain.x0).dot(&nu));
        }
    }
    finish_grid(grid)
}

fn finish_grid(mut grid: BoundaryGrid) -> Result<BoundaryGrid> {
    let measure = grid.measure();
    let h_total: f64 = grid
        .curvature_h
        .iter()
        .zip(&grid.quad_weights)
        .map(|(h, w)| h * w)
        .sum();
    grid.h_bar = h_total / measure;
    grid.g_bounds()?;
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Finite-difference curvature oracle for the parametrized curve:
    /// kappa = (x' y'' - y' x'') / |v|^3 with central differences.
    fn fd_curvature(domain: &DomainSpec, t: f64) -> f64 {
        let h = 1e-4;
        let p = |t: f64| domain.boundary_point(t);
        let v = (p(t + h) - p(t - h)) / (2.0 * h);
        let a = (p(t + h) - 2.0 * p(t) + p(t - h)) / (h * h);
        (v.x * a.y - v.y * a.x) / v.norm().powi(3)
    }

    #[test]
    fn canonical_domains_build() {
        assert_eq!(DomainSpec::disk(1.0).unwrap().dim, 2);
        assert_eq!(DomainSpec::ball(1.0).unwrap().dim, 3);
        assert_eq!(DomainSpec::ellipse(2.0, 1.0).unwrap().dim, 2);
        assert!(DomainSpec::disk(0.0).is_err());
        assert!(DomainSpec::ellipse(1.0, 2.0).is_err());
    }

    #[test]
    fn gentle_perturbation_is_convex_and_large_one_is_rejected() {
        // kappa(theta) of r = 1 + 0.05 cos(3 theta) stays positive (checked
        // against the finite-difference oracle below); eps = 0.5, p = 6
        // drives curvature negative.
        let ok = DomainSpec::perturbed_disk(1.0, 0.05, 3).unwrap();
        for i in 0..256 {
            let t = 2.0 * PI * i as f64 / 256.0;
            assert!(ok.curvature_at(t) > 0.0);
            assert_relative_eq!(ok.curvature_at(t), fd_curvature(&ok, t), max_relative = 1e-6);
        }
        match DomainSpec::perturbed_disk(1.0, 0.5, 6) {
            Err(Error::ConvexityViolation(_)) => {}
            other => panic!("expected ConvexityViolation, got {other:?}"),
        }
    }

    #[test]
    fn curvature_closed_forms_match_finite_differences() {
        let disk = DomainSpec::disk(1.0).unwrap();
        let ellipse = DomainSpec::ellipse(2.0, 1.0).unwrap();
        for i in 0..64 {
            let t = 2.0 * PI * i as f64 / 64.0;
            assert_relative_eq!(disk.curvature_at(t), 1.0, epsilon = 1e-14);
            assert_relative_eq!(
                ellipse.curvature_at(t),
                fd_curvature(&ellipse, t),
                max_relative = 1e-6
            );
        }
        // Frozen endpoints: kappa = a/b^2 at (a, 0), b/a^2 at (0, b).
        assert_relative_eq!(ellipse.curvature_at(0.0), 2.0, epsilon = 1e-13);
        assert_relative_eq!(ellipse.curvature_at(PI / 2.0), 0.25, epsilon = 1e-13);
    }

    #[test]
    fn grid_measures_match_analytic_boundaries() {
        let disk = DomainSpec::disk(1.0).unwrap();
        let g = build_grid(&disk, GridSize::Curve(256)).unwrap();
        assert_relative_eq!(g.measure(), 2.0 * PI, max_relative = 1e-12);

        let ellipse = DomainSpec::ellipse(2.0, 1.0).unwrap();
        let g = build_grid(&ellipse, GridSize::Curve(1024)).unwrap();
        // Converged-quadrature perimeter of the 2:1 ellipse, frozen.
        assert_relative_eq!(g.measure(), 9.688448220547675, max_relative = 1e-12);
        assert_relative_eq!(g.measure(), ellipse.boundary_measure(), max_relative = 1e-12);

        let ball = DomainSpec::ball(1.0).unwrap();
        let g = build_grid(&ball, GridSize::Sphere { n_polar: 64, n_azimuth: 128 }).unwrap();
        assert_relative_eq!(g.measure(), 4.0 * PI, max_relative = 1e-10);

        let pert = DomainSpec::perturbed_disk(1.0, 0.05, 3).unwrap();
        let g = build_grid(&pert, GridSize::Curve(512)).unwrap();
        assert_relative_eq!(g.measure(), pert.boundary_measure(), max_relative = 1e-10);
    }

    #[test]
    fn grids_have_unit_normals_and_positive_support() {
        let domains = [
            DomainSpec::disk(1.5).unwrap(),
            DomainSpec::ellipse(2.0, 1.0).unwrap(),
            DomainSpec::perturbed_disk(1.0, 0.05, 3).unwrap(),
        ];
        for d in &domains {
            let g = build_grid(d, GridSize::Curve(256)).unwrap();
            for nu in &g.normals {
                assert!((nu.norm() - 1.0).abs() <= 1e-12);
            }
            let (m, big_m) = g.g_bounds().unwrap();
            assert!(m > 0.0 && m <= big_m);
        }
        let ball = DomainSpec::ball(2.0).unwrap();
        let g = build_grid(&ball, GridSize::Sphere { n_polar: 16, n_azimuth: 32 }).unwrap();
        for nu in &g.normals {
            assert!((nu.norm() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn support_bounds_on_round_and_elliptic_domains() {
        let disk = DomainSpec::disk(1.0).unwrap();
        let g = build_grid(&disk, GridSize::Curve(128)).unwrap();
        let (m, big_m) = g.g_bounds().unwrap();
        assert_relative_eq!(m, 1.0, epsilon = 1e-13);
        assert_relative_eq!(big_m, 1.0, epsilon = 1e-13);

        let ball = DomainSpec::ball(1.0).unwrap();
        let g = build_grid(&ball, GridSize::Sphere { n_polar: 16, n_azimuth: 32 }).unwrap();
        let (m, big_m) = g.g_bounds().unwrap();
        assert_relative_eq!(m, 1.0, epsilon = 1e-13);
        assert_relative_eq!(big_m, 1.0, epsilon = 1e-13);

        // Centered ellipse: g = a b / speed, so g ranges over [b, a] for
        // a >= b (speed ranges over the same interval).
        let ell = DomainSpec::ellipse(1.0, 0.8).unwrap();
        let g = build_grid(&ell, GridSize::Curve(1024)).unwrap();
        let (m, big_m) = g.g_bounds().unwrap();
        assert_relative_eq!(m, 0.8, max_relative = 1e-6);
        assert_relative_eq!(big_m, 1.0, max_relative = 1e-6);
        assert!(0.0 < m && m < big_m && big_m <= 1.0 + 1e-12);
    }

    #[test]
    fn off_center_base_point_shifts_support_but_stays_positive() {
        let disk = DomainSpec::disk(1.0)
            .unwrap()
            .with_x0(Point::new(0.3, -0.2, 0.0))
            .unwrap();
        let g = build_grid(&disk, GridSize::Curve(256)).unwrap();
        let (m, big_m) = g.g_bounds().unwrap();
        assert!(m > 0.0 && big_m < 2.0 && m < big_m);

        // A base point outside (or on) the boundary is rejected up front.
        assert!(DomainSpec::disk(1.0)
            .unwrap()
            .with_x0(Point::new(1.0, 0.0, 0.0))
            .is_err());
    }

    #[test]
    fn curvature_average_is_constant_on_round_domains() {
        let disk = DomainSpec::disk(2.0).unwrap();
        let g = build_grid(&disk, GridSize::Curve(128)).unwrap();
        assert_relative_eq!(g.h_bar, 0.5, epsilon = 1e-13);
        for h in &g.curvature_h {
            assert_relative_eq!(*h, g.h_bar, epsilon = 1e-12);
        }
        let ball = DomainSpec::ball(2.0).unwrap();
        let g = build_grid(&ball, GridSize::Sphere { n_polar: 8, n_azimuth: 16 }).unwrap();
        assert_relative_eq!(g.h_bar, 0.5, epsilon = 1e-13);
    }

    #[test]
    fn weyl_reference_values() {
        assert_relative_eq!(DomainSpec::disk(1.0).unwrap().weyl_reference(), 4.0, epsilon = 1e-12);
        // ellipse(1,1) is the unit disk.
        assert_relative_eq!(
            DomainSpec::ellipse(1.0, 1.0).unwrap().weyl_reference(),
            4.0,
            epsilon = 1e-12
        );
        let ball = DomainSpec::ball(1.0).unwrap();
        let omega3 = 4.0 / 3.0 * PI;
        assert_relative_eq!(
            ball.weyl_reference(),
            4.0 * PI * PI * (omega3 * omega3).powf(-2.0 / 3.0),
            epsilon = 1e-12
        );
        // Perturbed-disk volume by quadrature against the closed form
        // pi R^2 (1 + eps^2 / 2).
        let pert = DomainSpec::perturbed_disk(1.0, 0.05, 3).unwrap();
        assert_relative_eq!(pert.volume(), PI * (1.0 + 0.00125), max_relative = 1e-12);
    }

    #[test]
    fn grid_size_validation() {
        let disk = DomainSpec::disk(1.0).unwrap();
        assert!(build_grid(&disk, GridSize::Curve(32)).is_err());
        assert!(build_grid(&disk, GridSize::Sphere { n_polar: 16, n_azimuth: 32 }).is_err());
        let ball = DomainSpec::ball(1.0).unwrap();
        assert!(build_grid(&ball, GridSize::Curve(128)).is_err());
    }
}
