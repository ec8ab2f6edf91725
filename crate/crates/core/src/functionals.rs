//! Boundary energies, weighted energies, correlation coefficients,
//! moment-projected weights, Rellich residuals, and cumulative boundary
//! spectral sums.

use crate::error::{Error, Result};
use crate::geometry::BoundaryGrid;
use crate::legendre::legendre_p;
use crate::spectra::Spectrum;

/// Absolute tolerance for moment certification, relative to the natural
/// scale of each moment (sup norm times boundary measure for mu0, sup norm
/// times the integral of |H| for mu1).
pub const MOMENT_TOL: f64 = 1e-10;

/// Boundary weight samples with certified vanishing-moment level.
///
/// level 0: no vanishing moment claimed; level 1: mu0 = int w dsigma
/// vanishes; level 2: additionally mu1 = int H w dsigma vanishes.
#[derive(Clone, Debug)]
pub struct Weight {
    pub name: String,
    pub samples: Vec<f64>,
    pub mu0: f64,
    pub mu1: f64,
    pub level: u8,
    pub sup_norm: f64,
}

impl Weight {
    /// Computes moments and sup norm, then certifies the highest level the
    /// samples actually satisfy.
    pub fn certify(name: &str, samples: Vec<f64>, grid: &BoundaryGrid) -> Result<Weight> {
        if samples.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "weight has {} samples, grid has {} nodes",
                samples.len(),
                grid.len()
            )));
        }
        let mu0 = grid.integrate(&samples)?;
        let hw: Vec<f64> = samples
            .iter()
            .zip(&grid.curvature_h)
            .map(|(w, h)| w * h)
            .collect();
        let mu1 = grid.integrate(&hw)?;
        let sup_norm = samples.iter().fold(0.0_f64, |a, w| a.max(w.abs()));
        let scale0 = sup_norm * grid.measure();
        let habs: f64 = grid
            .curvature_h
            .iter()
            .zip(&grid.quad_weights)
            .map(|(h, w)| h.abs() * w)
            .sum();
        let scale1 = sup_norm * habs;
        let level = if mu0.abs() <= MOMENT_TOL * scale0 {
            if mu1.abs() <= MOMENT_TOL * scale1 {
                2
            } else {
                1
            }
        } else {
            0
        };
        Ok(Weight { name: name.to_string(), samples, mu0, mu1, level, sup_norm })
    }
}

/// Named closed-form boundary weights available to experiments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeightForm {
    /// cos(p * theta) along a planar boundary parameter.
    CosTheta { p: u32 },
    /// sin(p * theta) along a planar boundary parameter.
    SinTheta { p: u32 },
    /// Legendre polynomial P_degree(cos theta) in the polar angle on the sphere.
    LegendrePolar { degree: u32 },
    /// Centered mean curvature H - H_bar.
    CurvatureCentered,
    /// Constant 1 (level 0; useful for unweighted reductions).
    Constant,
}

/// Samples a closed form at the grid nodes.
pub fn sample_weight_form(form: WeightForm, grid: &BoundaryGrid) -> Result<Vec<f64>> {
    let planar = grid.domain.dim == 2;
    match form {
        WeightForm::CosTheta { p } => {
            if !planar {
                return Err(Error::InvalidParameter(
                    "cos(p theta) weights are defined on planar boundaries".into(),
                ));
            }
            Ok(grid.params.iter().map(|t| (p as f64 * t[0]).cos()).collect())
        }
        WeightForm::SinTheta { p } => {
            if !planar {
                return Err(Error::InvalidParameter(
                    "sin(p theta) weights are defined on planar boundaries".into(),
                ));
            }
            Ok(grid.params.iter().map(|t| (p as f64 * t[0]).sin()).collect())
        }
        WeightForm::LegendrePolar { degree } => {
            if planar {
                return Err(Error::InvalidParameter(
                    "Legendre polar weights are defined on the sphere".into(),
                ));
            }
            Ok(grid
                .params
                .iter()
                .map(|t| legendre_p(degree as usize, t[0].cos()))
                .collect())
        }
        WeightForm::CurvatureCentered => {
            Ok(grid.curvature_h.iter().map(|h| h - grid.h_bar).collect())
        }
        WeightForm::Constant => Ok(vec![1.0; grid.len()]),
    }
}

/// Samples a form and projects it to the target moment level (level 0 means
/// certify as-is).
pub fn make_weight(
    name: &str,
    form: WeightForm,
    target_level: u8,
    grid: &BoundaryGrid,
) -> Result<Weight> {
    let raw = sample_weight_form(form, grid)?;
    if target_level == 0 {
        Weight::certify(name, raw, grid)
    } else {
        moment_project(name, &raw, grid, target_level)
    }
}

/// Orthogonal projection (boundary measure) onto the complement of span{1}
/// (level 1) or span{1, H} (level 2). On domains where H is constant the
/// two spans coincide and the level-2 step is a no-op; the second moment
/// then vanishes automatically.
pub fn moment_project(
    name: &str,
    raw: &[f64],
    grid: &BoundaryGrid,
    target_level: u8,
) -> Result<Weight> {
    if !(target_level == 1 || target_level == 2) {
        return Err(Error::InvalidParameter(format!(
            "projection target level must be 1 or 2, got {target_level}"
        )));
    }
    let raw_sup = raw.iter().fold(0.0_f64, |a, w| a.max(w.abs()));
    let measure = grid.measure();
    let mean = grid.integrate(raw)? / measure;
    let mut w: Vec<f64> = raw.iter().map(|v| v - mean).collect();
    if target_level == 2 {
        let h: Vec<f64> = grid.curvature_h.iter().map(|v| v - grid.h_bar).collect();
        let hh = grid.integrate(&h.iter().map(|v| v * v).collect::<Vec<_>>())?;
        let h2 = grid.integrate(&grid.curvature_h.iter().map(|v| v * v).collect::<Vec<_>>())?;
        // Centered H indistinguishable from zero means H is constant and
        // span{1, H} = span{1}.
        if hh > 1e-20 * h2 {
            let wh: f64 = w
                .iter()
                .zip(&h)
                .zip(&grid.quad_weights)
                .map(|((a, b), q)| a * b * q)
                .sum();
            let c = wh / hh;
            for (v, hv) in w.iter_mut().zip(&h) {
                *v -= c * hv;
            }
        }
    }
    let weight = Weight::certify(name, w, grid)?;
    if weight.sup_norm <= 1e-10 * raw_sup || raw_sup == 0.0 {
        return Err(Error::DegenerateWeight(format!(
            "projection of '{name}' to level {target_level} is numerically zero"
        )));
    }
    if weight.level < target_level {
        return Err(Error::DegenerateWeight(format!(
            "projection of '{name}' failed to certify level {target_level}: mu0={:.3e}, mu1={:.3e}",
            weight.mu0, weight.mu1
        )));
    }
    Ok(weight)
}

/// Total boundary energy E = int rho dsigma.
pub fn boundary_energy(rho: &[f64], grid: &BoundaryGrid) -> Result<f64> {
    if let Some(bad) = rho.iter().find(|v| **v < 0.0) {
        return Err(Error::NegativeDensity(format!(
            "flux density sample {bad} is negative"
        )));
    }
    grid.integrate(rho)
}

/// (E(w), E_abs(w)) = (int rho w dsigma, int rho |w| dsigma).
pub fn weighted_energy(rho: &[f64], weight: &Weight, grid: &BoundaryGrid) -> Result<(f64, f64)> {
    if rho.len() != grid.len() || weight.samples.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "density ({}), weight ({}), and grid ({}) sizes differ",
            rho.len(),
            weight.samples.len(),
            grid.len()
        )));
    }
    let mut ew = 0.0;
    let mut eabs = 0.0;
    for ((r, w), q) in rho.iter().zip(&weight.samples).zip(&grid.quad_weights) {
        ew += r * w * q;
        eabs += r * w.abs() * q;
    }
    Ok((ew, eabs))
}

/// Boundary correlation coefficient C = E(w) / E; defined only for weights
/// with a certified vanishing mean.
pub fn correlation(rho: &[f64], weight: &Weight, grid: &BoundaryGrid) -> Result<f64> {
    if weight.level < 1 {
        return Err(Error::MeanNotZero(format!(
            "weight '{}' has mu0 = {:.3e}; the correlation coefficient needs a zero-mean weight",
            weight.name, weight.mu0
        )));
    }
    let e = boundary_energy(rho, grid)?;
    if e <= 0.0 {
        return Err(Error::NegativeDensity(
            "boundary energy vanishes; correlation undefined".into(),
        ));
    }
    let (ew, _) = weighted_energy(rho, weight, grid)?;
    Ok(ew / e)
}

/// |int g rho dsigma - 2 lambda| / (2 lambda): the Rellich identity as a
/// relative accuracy certificate.
pub fn rellich_residual(rho: &[f64], lambda: f64, grid: &BoundaryGrid) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "eigenvalue must be positive, got {lambda}"
        )));
    }
    if rho.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "density has {} samples, grid has {} nodes",
            rho.len(),
            grid.len()
        )));
    }
    let mut s = 0.0;
    for ((r, g), q) in rho.iter().zip(&grid.support_g).zip(&grid.quad_weights) {
        s += r * g * q;
    }
    Ok((s - 2.0 * lambda).abs() / (2.0 * lambda))
}

/// Per-mode functional record as exported to CSV.
#[derive(Clone, Debug)]
pub struct FunctionalReport {
    pub k: usize,
    pub lambda: f64,
    pub energy: f64,
    pub weighted: f64,
    pub weighted_abs: f64,
    pub correlation: f64,
    pub rellich_residual: f64,
}

/// Precomputed per-mode boundary functionals for one (spectrum, grid) pair
/// and a list of weights. Cumulative sums and packet statistics read from
/// here instead of re-evaluating traces.
#[derive(Clone, Debug)]
pub struct SpectrumFunctionals {
    pub lambdas: Vec<f64>,
    pub energies: Vec<f64>,
    pub rellich: Vec<f64>,
    /// Per weight (same order as the input list): E_j(w) for every mode.
    pub weighted: Vec<Vec<f64>>,
    pub weighted_abs: Vec<Vec<f64>>,
    pub weight_names: Vec<String>,
    pub weight_levels: Vec<u8>,
    pub weight_sups: Vec<f64>,
}

pub fn compute_functionals(
    spectrum: &Spectrum,
    grid: &BoundaryGrid,
    weights: &[Weight],
) -> Result<SpectrumFunctionals> {
    let n = spectrum.len();
    let mut out = SpectrumFunctionals {
        lambdas: Vec::with_capacity(n),
        energies: Vec::with_capacity(n),
        rellich: Vec::with_capacity(n),
        weighted: vec![Vec::with_capacity(n); weights.len()],
        weighted_abs: vec![Vec::with_capacity(n); weights.len()],
        weight_names: weights.iter().map(|w| w.name.clone()).collect(),
        weight_levels: weights.iter().map(|w| w.level).collect(),
        weight_sups: weights.iter().map(|w| w.sup_norm).collect(),
    };
    for k in 1..=n {
        let mode = spectrum.mode(k)?;
        let rho = spectrum.rho_at(k, grid)?;
        out.lambdas.push(mode.lambda);
        out.energies.push(boundary_energy(&rho, grid)?);
        out.rellich.push(rellich_residual(&rho, mode.lambda, grid)?);
        for (i, w) in weights.iter().enumerate() {
            let (ew, eabs) = weighted_energy(&rho, w, grid)?;
            out.weighted[i].push(ew);
            out.weighted_abs[i].push(eabs);
        }
    }
    Ok(out)
}

impl SpectrumFunctionals {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn weight_index(&self, name: &str) -> Result<usize> {
        self.weight_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown weight '{name}'")))
    }

    fn check_cutoff(&self, lambda: f64) -> Result<usize> {
        let max = self.lambdas.last().copied().unwrap_or(0.0);
        if lambda > max {
            return Err(Error::SpectrumTooShort(format!(
                "cutoff {lambda} exceeds the largest computed eigenvalue {max}"
            )));
        }
        Ok(self.lambdas.partition_point(|l| *l < lambda))
    }

    /// S(Lambda) = sum of E_j over lambda_j < Lambda.
    pub fn s_lambda(&self, lambda: f64) -> Result<f64> {
        let n = self.check_cutoff(lambda)?;
        Ok(self.energies[..n].iter().sum())
    }

    /// Cumulative pairing sum_{lambda_j < Lambda} E_j(w): the discretized
    /// integral of Q_Lambda against w.
    pub fn q_lambda_pairing(&self, lambda: f64, weight_name: &str) -> Result<f64> {
        let n = self.check_cutoff(lambda)?;
        let wi = self.weight_index(weight_name)?;
        Ok(self.weighted[wi][..n].iter().sum())
    }

    /// Per-mode report rows for export (correlation only defined for
    /// level >= 1 weights; level-0 columns carry the weighted energies with
    /// correlation reported as E_w / E regardless, which callers exporting
    /// strictly per the definition should gate on the level).
    pub fn report(&self, k: usize, weight_idx: usize) -> FunctionalReport {
        let i = k - 1;
        FunctionalReport {
            k,
            lambda: self.lambdas[i],
            energy: self.energies[i],
            weighted: self.weighted[weight_idx][i],
            weighted_abs: self.weighted_abs[weight_idx][i],
            correlation: self.weighted[weight_idx][i] / self.energies[i],
            rellich_residual: self.rellich[i],
        }
    }
}

/// One-shot S(Lambda) without precomputation.
pub fn s_lambda(spectrum: &Spectrum, grid: &BoundaryGrid, lambda: f64) -> Result<f64> {
    if lambda > spectrum.max_lambda() {
        return Err(Error::SpectrumTooShort(format!(
            "cutoff {lambda} exceeds the largest computed eigenvalue {}",
            spectrum.max_lambda()
        )));
    }
    let mut s = 0.0;
    for k in 1..=spectrum.count_below(lambda) {
        let rho = spectrum.rho_at(k, grid)?;
        s += boundary_energy(&rho, grid)?;
    }
    Ok(s)
}

/// One-shot cumulative pairing without precomputation.
pub fn q_lambda_pairing(
    spectrum: &Spectrum,
    lambda: f64,
    weight: &Weight,
    grid: &BoundaryGrid,
) -> Result<f64> {
    if lambda > spectrum.max_lambda() {
        return Err(Error::SpectrumTooShort(format!(
            "cutoff {lambda} exceeds the largest computed eigenvalue {}",
            spectrum.max_lambda()
        )));
    }
    let mut s = 0.0;
    for k in 1..=spectrum.count_below(lambda) {
        let rho = spectrum.rho_at(k, grid)?;
        s += weighted_energy(&rho, weight, grid)?.0;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, DomainSpec, GridSize};
    use crate::spectra::{ball_spectrum, disk_spectrum, ModeFamily, Parity};
    use approx::assert_relative_eq;

    fn disk_fixture(k: usize, nodes: usize) -> (Spectrum, BoundaryGrid) {
        let s = disk_spectrum(1.0, k).unwrap();
        let g = build_grid(&s.domain, GridSize::Curve(nodes)).unwrap();
        (s, g)
    }

    #[test]
    fn disk_energy_is_twice_lambda() {
        let (s, g) = disk_fixture(60, 512);
        for k in 1..=s.len() {
            let rho = s.rho_at(k, &g).unwrap();
            let e = boundary_energy(&rho, &g).unwrap();
            assert_relative_eq!(e, 2.0 * s.modes[k - 1].lambda, max_relative = 1e-12);
        }
    }

    #[test]
    fn ball_energy_is_twice_lambda_over_radius() {
        let s = ball_spectrum(2.0, 40).unwrap();
        let g = build_grid(&s.domain, GridSize::Sphere { n_polar: 32, n_azimuth: 64 }).unwrap();
        for k in 1..=s.len() {
            let rho = s.rho_at(k, &g).unwrap();
            let e = boundary_energy(&rho, &g).unwrap();
            assert_relative_eq!(e, s.modes[k - 1].lambda, max_relative = 1e-11);
        }
    }

    #[test]
    fn rellich_residual_is_tiny_for_analytic_modes_and_large_for_bad_scale() {
        let (s, g) = disk_fixture(80, 1024);
        for k in 1..=s.len() {
            let rho = s.rho_at(k, &g).unwrap();
            let res = rellich_residual(&rho, s.modes[k - 1].lambda, &g).unwrap();
            assert!(res <= 1e-12, "mode {k}: residual {res}");
            let doubled: Vec<f64> = rho.iter().map(|v| 2.0 * v).collect();
            let res = rellich_residual(&doubled, s.modes[k - 1].lambda, &g).unwrap();
            assert!(res >= 0.5);
        }
    }

    #[test]
    fn rellich_holds_for_any_interior_base_point() {
        // g depends on x0 but the identity does not.
        let s = disk_spectrum(1.0, 25).unwrap();
        let shifted = DomainSpec::disk(1.0)
            .unwrap()
            .with_x0(crate::geometry::Point::new(0.4, 0.1, 0.0))
            .unwrap();
        let g = build_grid(&shifted, GridSize::Curve(2048)).unwrap();
        for k in 1..=s.len() {
            let rho = s.rho_at(k, &g).unwrap();
            let res = rellich_residual(&rho, s.modes[k - 1].lambda, &g).unwrap();
            assert!(res <= 1e-10, "mode {k}: residual {res}");
        }
    }

    #[test]
    fn weighted_energy_halves_for_matching_frequency() {
        let (s, g) = disk_fixture(10, 512);
        let w2 = make_weight("cos2", WeightForm::CosTheta { p: 2 }, 1, &g).unwrap();
        let w3 = make_weight("cos3", WeightForm::CosTheta { p: 3 }, 1, &g).unwrap();
        // Modes 2 and 3 are the (m=1) cos/sin pair.
        assert!(matches!(
            s.modes[1].family,
            ModeFamily::Disk { m: 1, parity: Parity::Cos, .. }
        ));
        let rho_cos = s.rho_at(2, &g).unwrap();
        let rho_sin = s.rho_at(3, &g).unwrap();
        let e = boundary_energy(&rho_cos, &g).unwrap();
        let (ew, eabs) = weighted_energy(&rho_cos, &w2, &g).unwrap();
        assert_relative_eq!(ew, e / 2.0, max_relative = 1e-12);
        assert!(ew.abs() <= eabs && eabs <= w2.sup_norm * e + 1e-12);
        // cos 3theta is orthogonal to cos^2(theta).
        let (ew3, _) = weighted_energy(&rho_cos, &w3, &g).unwrap();
        assert!(ew3.abs() <= 1e-12 * e);
        // Correlations: +1/2 for the cos mode, -1/2 for the sin mode.
        assert_relative_eq!(correlation(&rho_cos, &w2, &g).unwrap(), 0.5, epsilon = 1e-12);
        assert_relative_eq!(correlation(&rho_sin, &w2, &g).unwrap(), -0.5, epsilon = 1e-12);
        // Radial modes have constant density: zero correlation.
        let rho0 = s.rho_at(1, &g).unwrap();
        assert!(correlation(&rho0, &w2, &g).unwrap().abs() <= 1e-13);
    }

    #[test]
    fn zero_weight_gives_zero_energies() {
        let (s, g) = disk_fixture(5, 256);
        let w = Weight::certify("zero", vec![0.0; g.len()], &g).unwrap();
        let rho = s.rho_at(1, &g).unwrap();
        assert_eq!(weighted_energy(&rho, &w, &g).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn correlation_requires_zero_mean() {
        let (s, g) = disk_fixture(5, 256);
        let w = make_weight("one", WeightForm::Constant, 0, &g).unwrap();
        assert_eq!(w.level, 0);
        let rho = s.rho_at(1, &g).unwrap();
        assert!(matches!(correlation(&rho, &w, &g), Err(Error::MeanNotZero(_))));
    }

    #[test]
    fn projection_rejects_degenerate_inputs() {
        let d = DomainSpec::disk(1.0).unwrap();
        let g = build_grid(&d, GridSize::Curve(256)).unwrap();
        let ones = vec![1.0; g.len()];
        assert!(matches!(
            moment_project("const", &ones, &g, 1),
            Err(Error::DegenerateWeight(_))
        ));
        // H is constant on the disk, so H is also in span{1}.
        let h = g.curvature_h.clone();
        assert!(matches!(
            moment_project("h", &h, &g, 1),
            Err(Error::DegenerateWeight(_))
        ));
        // On the ellipse, H - H_bar is nonconstant but lies in span{1, H}.
        let e = DomainSpec::ellipse(2.0, 1.0).unwrap();
        let ge = build_grid(&e, GridSize::Curve(256)).unwrap();
        let hc = sample_weight_form(WeightForm::CurvatureCentered, &ge).unwrap();
        assert!(moment_project("hc", &hc, &ge, 1).is_ok());
        assert!(matches!(
            moment_project("hc", &hc, &ge, 2),
            Err(Error::DegenerateWeight(_))
        ));
    }

    #[test]
    fn projection_is_idempotent_and_certified() {
        let e = DomainSpec::ellipse(2.0, 1.0).unwrap();
        let g = build_grid(&e, GridSize::Curve(512)).unwrap();
        let raw = sample_weight_form(WeightForm::CosTheta { p: 2 }, &g).unwrap();
        for level in [1u8, 2] {
            let w = moment_project("c2", &raw, &g, level).unwrap();
            assert!(w.level >= level);
            assert!(w.mu0.abs() <= MOMENT_TOL * w.sup_norm * g.measure());
            let again = moment_project("c2", &w.samples, &g, level).unwrap();
            for (a, b) in w.samples.iter().zip(&again.samples) {
                assert!((a - b).abs() <= 1e-12 * w.sup_norm);
            }
        }
    }

    #[test]
    fn disk_trig_weight_is_already_level_two() {
        // cos(2 theta) on the unit disk has both moments zero (H constant),
        // so projection to level 2 changes nothing.
        let d = DomainSpec::disk(1.0).unwrap();
        let g = build_grid(&d, GridSize::Curve(256)).unwrap();
        let raw = sample_weight_form(WeightForm::CosTheta { p: 2 }, &g).unwrap();
        let w = moment_project("c2", &raw, &g, 2).unwrap();
        assert_eq!(w.level, 2);
        for (a, b) in raw.iter().zip(&w.samples) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn full_eigenspace_density_is_neutral() {
        let (s, g) = disk_fixture(40, 512);
        let w = make_weight("cos2", WeightForm::CosTheta { p: 2 }, 1, &g).unwrap();
        for range in s.eigenspace_ranges() {
            if range.len() < 2 {
                continue;
            }
            let mut total = vec![0.0; g.len()];
            for i in range {
                for (t, r) in total.iter_mut().zip(s.rho_at(i + 1, &g).unwrap()) {
                    *t += r;
                }
            }
            let mean = total.iter().sum::<f64>() / total.len() as f64;
            for v in &total {
                assert_relative_eq!(*v, mean, max_relative = 1e-12);
            }
            let c = correlation(&total, &w, &g).unwrap();
            assert!(c.abs() <= 1e-12);
        }
    }

    #[test]
    fn cumulative_sums_match_direct_accumulation() {
        let (s, g) = disk_fixture(120, 512);
        let w = make_weight("cos2", WeightForm::CosTheta { p: 2 }, 1, &g).unwrap();
        let f = compute_functionals(&s, &g, std::slice::from_ref(&w)).unwrap();
        for cutoff in [3.0, 50.0, 200.0, s.max_lambda()] {
            assert_relative_eq!(
                f.s_lambda(cutoff).unwrap(),
                s_lambda(&s, &g, cutoff).unwrap(),
                max_relative = 1e-13
            );
            let a = f.q_lambda_pairing(cutoff, "cos2").unwrap();
            let b = q_lambda_pairing(&s, cutoff, &w, &g).unwrap();
            assert!((a - b).abs() <= 1e-12 * f.s_lambda(cutoff).unwrap().max(1.0));
        }
        assert_eq!(f.s_lambda(1.0).unwrap(), 0.0);
        assert!(f.s_lambda(s.max_lambda() * 1.01).is_err());
        // Signed halves cancel pairwise below every cutoff on the disk.
        let q = f.q_lambda_pairing(200.0, "cos2").unwrap();
        assert!(q.abs() <= 1e-12 * f.s_lambda(200.0).unwrap());
    }

    #[test]
    fn report_invariants_hold() {
        let (s, g) = disk_fixture(50, 512);
        let w = make_weight("cos2", WeightForm::CosTheta { p: 2 }, 1, &g).unwrap();
        let f = compute_functionals(&s, &g, std::slice::from_ref(&w)).unwrap();
        for k in 1..=s.len() {
            let r = f.report(k, 0);
            assert!(r.energy > 0.0);
            assert!(r.weighted.abs() <= r.weighted_abs + 1e-14);
            assert!(r.weighted_abs <= w.sup_norm * r.energy * (1.0 + 1e-12));
            assert!(r.correlation.abs() <= w.sup_norm + 1e-12);
        }
    }
}
