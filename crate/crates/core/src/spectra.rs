//! Exact Dirichlet eigenpairs for the disk (d = 2) and ball (d = 3), with
//! evaluable boundary normal-derivative traces.
//!
//! Disk: lambda = (j_{m,n} / R)^2 with eigenfunctions J_m(sqrt(lambda) r)
//! {cos, sin}(m theta). Unit L^2 normalization makes the boundary trace
//! |d_n u| = A |trig(m theta)| with A^2 = 2 lambda / (alpha_m R^2),
//! alpha_m = 2 pi for m = 0 and pi otherwise; the Bessel derivative factor
//! cancels against the radial norm, so no derivative evaluation is needed.
//!
//! Ball: lambda = (j_{l+1/2,n} / R)^2 with multiplicity 2l + 1 and
//! |d_n u|^2 = (2 lambda / R^3) |Y_l^q|^2 for the unit-sphere orthonormal
//! real harmonics Y_l^q.

use crate::bessel::{bessel_zeros_upto, BesselOrder};
use crate::error::{Error, Result};
use crate::geometry::{BoundaryGrid, DomainKind, DomainSpec};
use crate::legendre::assoc_legendre_normalized;
use std::collections::HashMap;
use std::f64::consts::{PI, SQRT_2};
use std::ops::Range;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Parity {
    Cos,
    Sin,
}

impl Parity {
    pub fn label(self) -> &'static str {
        match self {
            Parity::Cos => "cos",
            Parity::Sin => "sin",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModeFamily {
    Disk { m: u32, n: u32, parity: Parity },
    Ball { l: u32, n: u32, q: i32 },
    /// Collocation-solver mode: `class` identifies the symmetry class of
    /// the basis, `index` its rank within that class. Its trace lives in
    /// the spectrum's numeric side table.
    Collocated { class: u8, index: u32 },
}

/// One eigenpair. `trace_coeff` is the amplitude A with
/// |d_n u| = A * |angular factor| on the boundary; the angular factor is
/// trig(m theta) on the circle and Y_l^q on the sphere.
#[derive(Clone, Debug)]
pub struct Mode {
    /// Global 1-based rank after sorting.
    pub k: usize,
    pub lambda: f64,
    pub family: ModeFamily,
    pub trace_coeff: f64,
}

/// Sorted eigenpair collection with eigenspace bookkeeping.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub domain: DomainSpec,
    pub modes: Vec<Mode>,
    /// Same length as `modes`; equal values mark modes of one degenerate
    /// eigenspace (one (m, n) pair on the disk, one (l, n) pair on the ball).
    pub eigenspace_index: Vec<usize>,
    /// Per-mode basis expansions for `Collocated` modes; empty for purely
    /// analytic spectra.
    pub numeric: Vec<Option<crate::mps::NumericTrace>>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn max_lambda(&self) -> f64 {
        self.modes.last().map_or(0.0, |m| m.lambda)
    }

    /// Counting function N(Lambda) = #{ lambda_j < Lambda }.
    pub fn count_below(&self, lambda: f64) -> usize {
        self.modes.partition_point(|m| m.lambda < lambda)
    }

    /// 0-based index ranges of the (possibly truncated) eigenspaces, in
    /// spectral order.
    pub fn eigenspace_ranges(&self) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0usize;
        for i in 1..=self.eigenspace_index.len() {
            if i == self.eigenspace_index.len() || self.eigenspace_index[i] != self.eigenspace_index[start] {
                out.push(start..i);
                start = i;
            }
        }
        out
    }

    /// Signed boundary trace d_n u of mode k (1-based) at the grid nodes.
    /// The overall sign is a basis convention; densities are its square.
    pub fn trace_at(&self, k: usize, grid: &BoundaryGrid) -> Result<Vec<f64>> {
        let mode = self.mode(k)?;
        if grid.domain.kind != self.domain.kind {
            return Err(Error::DomainMismatch(format!(
                "mode belongs to {:?}, grid to {:?}",
                self.domain.kind, grid.domain.kind
            )));
        }
        Ok(match mode.family {
            ModeFamily::Disk { m, parity, .. } => {
                let a = mode.trace_coeff;
                grid.params
                    .iter()
                    .map(|p| {
                        let arg = m as f64 * p[0];
                        a * match parity {
                            Parity::Cos => arg.cos(),
                            Parity::Sin => arg.sin(),
                        }
                    })
                    .collect()
            }
            ModeFamily::Ball { l, q, .. } => {
                ball_harmonic_samples(l, q, grid)
                    .into_iter()
                    .map(|y| mode.trace_coeff * y)
                    .collect()
            }
            ModeFamily::Collocated { .. } => {
                let nt = self
                    .numeric
                    .get(k - 1)
                    .and_then(|o| o.as_ref())
                    .ok_or_else(|| {
                        Error::InvalidParameter(format!(
                            "collocated mode {k} has no stored basis expansion"
                        ))
                    })?;
                crate::mps::normal_derivative_trace(nt, mode.lambda, grid)?
            }
        })
    }

    /// Boundary flux density rho_k = |d_n u_k|^2 at the grid nodes.
    pub fn rho_at(&self, k: usize, grid: &BoundaryGrid) -> Result<Vec<f64>> {
        let mut t = self.trace_at(k, grid)?;
        for v in t.iter_mut() {
            *v *= *v;
        }
        Ok(t)
    }

    pub fn mode(&self, k: usize) -> Result<&Mode> {
        if k == 0 || k > self.modes.len() {
            return Err(Error::SpectrumTooShort(format!(
                "mode index {k} outside computed range 1..={}",
                self.modes.len()
            )));
        }
        Ok(&self.modes[k - 1])
    }
}

/// Real spherical harmonic Y_l^q at the grid nodes. Values of the
/// normalized associated Legendre part are cached per distinct polar angle,
/// so latitude-band grids cost one recurrence per band.
fn ball_harmonic_samples(l: u32, q: i32, grid: &BoundaryGrid) -> Vec<f64> {
    let aq = q.unsigned_abs() as usize;
    let mut cache: HashMap<u64, f64> = HashMap::new();
    grid.params
        .iter()
        .map(|p| {
            let (theta, phi) = (p[0], p[1]);
            let plq = *cache.entry(theta.to_bits()).or_insert_with(|| {
                assoc_legendre_normalized(l as usize, theta.cos(), theta.sin())
                    .value(l as usize, aq)
            });
            if q == 0 {
                plq
            } else if q > 0 {
                SQRT_2 * plq * (aq as f64 * phi).cos()
            } else {
                SQRT_2 * plq * (aq as f64 * phi).sin()
            }
        })
        .collect()
}

/// First K disk eigenpairs, eigenvalues ascending.
pub fn disk_spectrum(radius: f64, k_count: usize) -> Result<Spectrum> {
    let domain = DomainSpec::disk(radius)?;
    if k_count == 0 {
        return Err(Error::InvalidParameter("spectrum size K must be >= 1".into()));
    }
    // Weyl estimate: modes with zero <= x number about x^2/4 - x/2.
    let mut x_max = 2.0 * (k_count as f64).sqrt() + 8.0;
    for _ in 0..6 {
        let groups = disk_zero_groups(x_max)?;
        let total: usize = groups.iter().map(|g| if g.1 == 0 { 1 } else { 2 }).sum();
        if total >= k_count {
            return Ok(assemble_disk(domain, groups, k_count));
        }
        x_max *= 1.3;
    }
    Err(Error::ConvergenceFailure(
        "disk spectrum enumeration failed to reach the requested count".into(),
    ))
}

/// All (j_{m,n}, m, n) with zero <= x_max, sorted by zero value.
fn disk_zero_groups(x_max: f64) -> Result<Vec<(f64, u32, u32)>> {
    let mut groups = Vec::new();
    let mut prev_first: Option<f64> = None;
    for m in 0u32.. {
        let zeros = bessel_zeros_upto(BesselOrder::Integer(m), x_max)?;
        let Some(&first) = zeros.first() else { break };
        // Interlacing guard: first zeros must increase strictly with the
        // order, else the scan skipped a zero.
        if let Some(p) = prev_first {
            debug_assert!(p < first, "zero enumeration broke interlacing at m={m}");
        }
        prev_first = Some(first);
        for (i, z) in zeros.iter().enumerate() {
            groups.push((*z, m, i as u32 + 1));
        }
    }
    groups.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(groups)
}

fn assemble_disk(domain: DomainSpec, groups: Vec<(f64, u32, u32)>, k_count: usize) -> Spectrum {
    let radius = match domain.kind {
        DomainKind::Disk { radius } => radius,
        _ => unreachable!(),
    };
    let mut modes = Vec::with_capacity(k_count);
    let mut eigenspace_index = Vec::with_capacity(k_count);
    'outer: for (esp, (zero, m, n)) in groups.into_iter().enumerate() {
        let lambda = (zero / radius).powi(2);
        let alpha = if m == 0 { 2.0 * PI } else { PI };
        let coeff = (2.0 * lambda / (alpha * radius * radius)).sqrt();
        let parities: &[Parity] = if m == 0 { &[Parity::Cos] } else { &[Parity::Cos, Parity::Sin] };
        for &parity in parities {
            modes.push(Mode {
                k: modes.len() + 1,
                lambda,
                family: ModeFamily::Disk { m, n, parity },
                trace_coeff: coeff,
            });
            eigenspace_index.push(esp);
            if modes.len() == k_count {
                break 'outer;
            }
        }
    }
    Spectrum { domain, modes, eigenspace_index, numeric: Vec::new() }
}

/// First K ball eigenpairs, eigenvalues ascending; eigenspace (l, n) carries
/// the 2l + 1 orders q = -l..=l.
pub fn ball_spectrum(radius: f64, k_count: usize) -> Result<Spectrum> {
    let domain = DomainSpec::ball(radius)?;
    if k_count == 0 {
        return Err(Error::InvalidParameter("spectrum size K must be >= 1".into()));
    }
    // Counting estimate N(x) ~ 2 x^3 / (9 pi).
    let mut x_max = (4.5 * PI * k_count as f64).cbrt() + 6.0;
    for _ in 0..6 {
        let groups = ball_zero_groups(x_max)?;
        let total: usize = groups.iter().map(|g| 2 * g.1 as usize + 1).sum();
        if total >= k_count {
            return Ok(assemble_ball(domain, groups, k_count));
        }
        x_max *= 1.3;
    }
    Err(Error::ConvergenceFailure(
        "ball spectrum enumeration failed to reach the requested count".into(),
    ))
}

fn ball_zero_groups(x_max: f64) -> Result<Vec<(f64, u32, u32)>> {
    let mut groups = Vec::new();
    for l in 0u32.. {
        let zeros = bessel_zeros_upto(BesselOrder::HalfInteger(l), x_max)?;
        if zeros.is_empty() {
            break;
        }
        for (i, z) in zeros.iter().enumerate() {
            groups.push((*z, l, i as u32 + 1));
        }
    }
    groups.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(groups)
}

fn assemble_ball(domain: DomainSpec, groups: Vec<(f64, u32, u32)>, k_count: usize) -> Spectrum {
    let radius = match domain.kind {
        DomainKind::Ball { radius } => radius,
        _ => unreachable!(),
    };
    let mut modes = Vec::with_capacity(k_count);
    let mut eigenspace_index = Vec::with_capacity(k_count);
    'outer: for (esp, (zero, l, n)) in groups.into_iter().enumerate() {
        let lambda = (zero / radius).powi(2);
        let coeff = (2.0 * lambda / radius.powi(3)).sqrt();
        for q in -(l as i32)..=(l as i32) {
            modes.push(Mode {
                k: modes.len() + 1,
                lambda,
                family: ModeFamily::Ball { l, n, q },
                trace_coeff: coeff,
            });
            eigenspace_index.push(esp);
            if modes.len() == k_count {
                break 'outer;
            }
        }
    }
    Spectrum { domain, modes, eigenspace_index, numeric: Vec::new() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bessel::{bessel_j_seq, bessel_zero, sph_j_seq};
    use crate::geometry::{build_grid, GridSize};
    use crate::legendre::gauss_legendre;
    use approx::assert_relative_eq;

    #[test]
    fn disk_spectrum_head_matches_squared_zeros() {
        let s = disk_spectrum(1.0, 12).unwrap();
        let j01 = bessel_zero(BesselOrder::Integer(0), 1).unwrap();
        assert_relative_eq!(s.modes[0].lambda, j01 * j01, max_relative = 1e-13);
        assert_relative_eq!(s.modes[0].lambda, 5.783185962946785, max_relative = 1e-12);
        // lambda_2 = lambda_3 = j_{1,1}^2, a cos/sin pair.
        let j11 = bessel_zero(BesselOrder::Integer(1), 1).unwrap();
        assert_relative_eq!(s.modes[1].lambda, j11 * j11, max_relative = 1e-13);
        assert_eq!(s.modes[1].lambda, s.modes[2].lambda);
        assert_eq!(s.eigenspace_index[1], s.eigenspace_index[2]);
        assert!(matches!(
            s.modes[1].family,
            ModeFamily::Disk { m: 1, n: 1, parity: Parity::Cos }
        ));
        assert!(matches!(
            s.modes[2].family,
            ModeFamily::Disk { m: 1, n: 1, parity: Parity::Sin }
        ));
        for w in s.modes.windows(2) {
            assert!(w[0].lambda <= w[1].lambda);
        }
    }

    #[test]
    fn disk_eigenvalues_scale_like_inverse_radius_squared() {
        let unit = disk_spectrum(1.0, 30).unwrap();
        let double = disk_spectrum(2.0, 30).unwrap();
        for (a, b) in unit.modes.iter().zip(&double.modes) {
            assert_relative_eq!(a.lambda / 4.0, b.lambda, max_relative = 1e-13);
        }
    }

    #[test]
    fn ball_spectrum_head() {
        let s = ball_spectrum(1.0, 10).unwrap();
        // j_{1/2,1} = pi, so lambda_1 = pi^2, simple.
        assert_relative_eq!(s.modes[0].lambda, PI * PI, max_relative = 1e-12);
        assert!(matches!(s.modes[0].family, ModeFamily::Ball { l: 0, n: 1, q: 0 }));
        // Second eigenvalue j_{3/2,1}^2 with multiplicity 3.
        let j32 = bessel_zero(BesselOrder::HalfInteger(1), 1).unwrap();
        assert_relative_eq!(j32, 4.493409457909064, max_relative = 1e-12);
        for k in 1..4 {
            assert_relative_eq!(s.modes[k].lambda, j32 * j32, max_relative = 1e-13);
        }
        assert_eq!(s.eigenspace_ranges()[1], 1..4);
        let qs: Vec<i32> = s.modes[1..4]
            .iter()
            .map(|m| match m.family {
                ModeFamily::Ball { q, .. } => q,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(qs, vec![-1, 0, 1]);
    }

    /// Independent amplitude oracle: build the eigenfunction from scratch
    /// (radial norm by quadrature, derivative by recurrence) and compare
    /// the boundary amplitude against the closed-form trace_coeff.
    #[test]
    fn disk_trace_amplitude_matches_radial_quadrature() {
        let radius = 1.3;
        let s = disk_spectrum(radius, 40).unwrap();
        let (gx, gw) = gauss_legendre(256);
        for mode in [&s.modes[0], &s.modes[7], &s.modes[24], &s.modes[39]] {
            let (m, _) = match mode.family {
                ModeFamily::Disk { m, n, .. } => (m as usize, n),
                _ => unreachable!(),
            };
            let kwave = mode.lambda.sqrt();
            // I_r = int_0^R J_m(k r)^2 r dr on a mapped Gauss grid.
            let mut i_r = 0.0;
            for (x, w) in gx.iter().zip(&gw) {
                let r = 0.5 * radius * (x + 1.0);
                let jr = bessel_j_seq(m, kwave * r)[m];
                i_r += 0.5 * radius * w * jr * jr * r;
            }
            let alpha = if m == 0 { 2.0 * PI } else { PI };
            let c2 = 1.0 / (alpha * i_r);
            let seq = bessel_j_seq(m + 1, kwave * radius);
            let deriv = if m == 0 {
                -seq[1]
            } else {
                0.5 * (bessel_j_seq(m - 1, kwave * radius)[m - 1] - seq[m + 1])
            };
            let amp2 = c2 * mode.lambda * deriv * deriv;
            assert_relative_eq!(amp2, mode.trace_coeff.powi(2), max_relative = 1e-10);
        }
    }

    #[test]
    fn ball_trace_amplitude_matches_radial_quadrature() {
        let radius = 0.9;
        let s = ball_spectrum(radius, 30).unwrap();
        let (gx, gw) = gauss_legendre(256);
        for mode in [&s.modes[0], &s.modes[4], &s.modes[20]] {
            let l = match mode.family {
                ModeFamily::Ball { l, .. } => l as usize,
                _ => unreachable!(),
            };
            let kwave = mode.lambda.sqrt();
            let mut i_r = 0.0;
            for (x, w) in gx.iter().zip(&gw) {
                let r = 0.5 * radius * (x + 1.0);
                let jr = sph_j_seq(l, kwave * r)[l];
                i_r += 0.5 * radius * w * jr * jr * r * r;
            }
            let c2 = 1.0 / i_r;
            // j_l'(x) = j_{l-1}(x) - (l+1)/x j_l(x); at a zero of j_l only
            // the first term survives for l >= 1, and j_0' = -j_1.
            let x = kwave * radius;
            let seq = sph_j_seq(l + 1, x);
            let deriv = if l == 0 {
                -seq[1]
            } else {
                sph_j_seq(l - 1, x)[l - 1] - (l as f64 + 1.0) / x * seq[l]
            };
            let amp2 = c2 * mode.lambda * deriv * deriv;
            assert_relative_eq!(amp2, mode.trace_coeff.powi(2), max_relative = 1e-10);
        }
    }

    #[test]
    fn radial_disk_mode_has_constant_density() {
        let s = disk_spectrum(1.0, 5).unwrap();
        let grid = build_grid(&s.domain, GridSize::Curve(128)).unwrap();
        let rho = s.rho_at(1, &grid).unwrap();
        for v in &rho {
            assert_relative_eq!(*v, rho[0], epsilon = 1e-12);
            assert!(*v >= 0.0);
        }
        // m=1 cos mode: rho proportional to cos^2, zero at theta = pi/2.
        let rho = s.rho_at(2, &grid).unwrap();
        assert!(rho[32].abs() < 1e-20 * rho[0]);
    }

    #[test]
    fn full_eigenspace_density_is_constant_on_the_sphere() {
        // Addition theorem: sum over q of |Y_l^q|^2 = (2l+1)/(4 pi).
        let s = ball_spectrum(1.0, 60).unwrap();
        let grid = build_grid(&s.domain, GridSize::Sphere { n_polar: 12, n_azimuth: 24 }).unwrap();
        for range in s.eigenspace_ranges() {
            if range.end > s.len() {
                continue;
            }
            let l = match s.modes[range.start].family {
                ModeFamily::Ball { l, .. } => l,
                _ => unreachable!(),
            };
            if range.len() != 2 * l as usize + 1 {
                continue; // truncated tail eigenspace
            }
            let mut total = vec![0.0; grid.len()];
            for i in range.clone() {
                for (t, r) in total.iter_mut().zip(s.rho_at(i + 1, &grid).unwrap()) {
                    *t += r;
                }
            }
            let amp2 = s.modes[range.start].trace_coeff.powi(2);
            let want = amp2 * (2.0 * l as f64 + 1.0) / (4.0 * PI);
            for v in &total {
                assert_relative_eq!(*v, want, max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn counting_function_matches_brute_force_zero_count() {
        let s = disk_spectrum(1.0, 800).unwrap();
        for cutoff in [100.0_f64, 900.0, 2500.0] {
            let mut brute = 0usize;
            for m in 0u32.. {
                let zeros = bessel_zeros_upto(BesselOrder::Integer(m), cutoff.sqrt()).unwrap();
                if zeros.is_empty() {
                    break;
                }
                let mult = if m == 0 { 1 } else { 2 };
                brute += zeros.iter().filter(|z| *z * *z < cutoff).count() * mult;
            }
            assert_eq!(s.count_below(cutoff), brute, "N({cutoff})");
        }
    }

    #[test]
    fn domain_mismatch_is_rejected() {
        let s = disk_spectrum(1.0, 5).unwrap();
        let other = DomainSpec::ellipse(2.0, 1.0).unwrap();
        let grid = build_grid(&other, GridSize::Curve(128)).unwrap();
        assert!(matches!(s.rho_at(1, &grid), Err(Error::DomainMismatch(_))));
    }

    #[test]
    fn rerun_is_identical() {
        let a = disk_spectrum(1.0, 300).unwrap();
        let b = disk_spectrum(1.0, 300).unwrap();
        for (x, y) in a.modes.iter().zip(&b.modes) {
            assert_eq!(x.lambda, y.lambda);
            assert_eq!(x.family, y.family);
            assert_eq!(x.trace_coeff, y.trace_coeff);
        }
    }
}
