//! Packet construction, mode-to-packet ratios, energy-weighted correlation
//! averages, threshold exponents, rate fits, Weyl-law fits, and
//! basis-mixing invariance checks.

use crate::error::{Error, Result};
use crate::functionals::{SpectrumFunctionals, Weight};
use crate::geometry::BoundaryGrid;
use crate::spectra::Spectrum;
use nalgebra::{DMatrix, Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Packet length schedule N_k = max(N_min, ceil(k^alpha)) evaluated on a
/// fixed index list. alpha < 1 keeps packets sublinear in k.
#[derive(Clone, Debug)]
pub struct PacketSchedule {
    pub alpha: f64,
    pub n_min: usize,
    pub k_list: Vec<usize>,
}

impl PacketSchedule {
    pub fn new(alpha: f64, n_min: usize, k_list: Vec<usize>) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!(
                "packet exponent alpha must satisfy 0 <= alpha < 1, got {alpha}"
            )));
        }
        if n_min < 2 {
            return Err(Error::InvalidParameter(format!(
                "minimal packet length must be >= 2, got {n_min}"
            )));
        }
        if k_list.iter().any(|k| *k == 0) {
            return Err(Error::InvalidParameter("packet indices are 1-based".into()));
        }
        Ok(PacketSchedule { alpha, n_min, k_list })
    }

    pub fn size(&self, k: usize) -> usize {
        packet_size(k, self.alpha, self.n_min)
    }
}

/// N_k = max(N_min, ceil(k^alpha)). The power is rounded to the nearest
/// integer first when it is within 1e-9 of one, so ceil never inflates an
/// exact integer power corrupted by floating-point (100^0.5 -> 10, not 11).
pub fn packet_size(k: usize, alpha: f64, n_min: usize) -> usize {
    let x = (k as f64).powf(alpha);
    let nearest = x.round();
    let ceil = if (x - nearest).abs() <= 1e-9 * x.max(1.0) { nearest } else { x.ceil() };
    (ceil as usize).max(n_min)
}

/// The index packet {k, ..., k + N_k - 1} as a 1-based half-open range.
pub fn packet_indices(
    k: usize,
    schedule: &PacketSchedule,
    spectrum_len: usize,
) -> Result<std::ops::Range<usize>> {
    if k == 0 {
        return Err(Error::InvalidParameter("packet start index is 1-based".into()));
    }
    let n = schedule.size(k);
    if k + n - 1 > spectrum_len {
        return Err(Error::SpectrumTooShort(format!(
            "packet {{{k}, ..., {}}} exceeds the {spectrum_len} computed modes",
            k + n - 1
        )));
    }
    Ok(k..k + n)
}

/// Packet energy sum over the explicit window {k, ..., k+n-1} by direct
/// per-mode summation.
pub fn window_energy(f: &SpectrumFunctionals, k: usize, n: usize) -> Result<f64> {
    if k == 0 || k + n - 1 > f.len() {
        return Err(Error::SpectrumTooShort(format!(
            "window {{{k}, ..., {}}} exceeds the {} computed modes",
            k + n - 1,
            f.len()
        )));
    }
    Ok(f.energies[k - 1..k + n - 1].iter().sum())
}

/// E_k divided by the packet energy for an explicit window size.
pub fn window_ratio(f: &SpectrumFunctionals, k: usize, n: usize) -> Result<f64> {
    Ok(f.energies[k - 1] / window_energy(f, k, n)?)
}

/// E_k / sum_{j in packet} E_j under the schedule.
pub fn mode_to_packet_ratio(
    f: &SpectrumFunctionals,
    k: usize,
    schedule: &PacketSchedule,
) -> Result<f64> {
    window_ratio(f, k, schedule.size(k))
}

/// Energy-weighted correlation average over the packet:
/// (sum E_j C_j(w)) / (sum E_j) = (sum E_j(w)) / (sum E_j).
/// Direct per-mode summation; no cumulative differencing.
pub fn packet_correlation_average(
    f: &SpectrumFunctionals,
    k: usize,
    schedule: &PacketSchedule,
    weight_name: &str,
) -> Result<f64> {
    let wi = f.weight_index(weight_name)?;
    if f.weight_levels[wi] < 1 {
        return Err(Error::MeanNotZero(format!(
            "weight '{weight_name}' is level 0; the correlation average needs a zero-mean weight"
        )));
    }
    let n = schedule.size(k);
    let den = window_energy(f, k, n)?;
    let num: f64 = f.weighted[wi][k - 1..k + n - 1].iter().sum();
    Ok(num / den)
}

/// Threshold exponent of the packet-growth condition N_k >> k^theta that
/// guarantees packet cancellation: theta = 1 - 2/d for single vanishing
/// moment, (d-3)/d for double vanishing moment. Negative values are floored
/// at zero for reporting (any N_k -> infinity already suffices).
pub fn threshold_exponent(d: u32, level: u8) -> Result<f64> {
    Ok(raw_threshold_exponent(d, level)?.max(0.0))
}

fn raw_threshold_exponent(d: u32, level: u8) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!(
            "threshold exponents are defined for dimension >= 2, got {d}"
        )));
    }
    match level {
        1 => Ok((d as f64 - 2.0) / d as f64),
        2 => Ok((d as f64 - 3.0) / d as f64),
        _ => Err(Error::InvalidParameter(format!(
            "moment level must be 1 or 2, got {level}"
        ))),
    }
}

/// Upper-bound envelope k^theta / N_k used to normalize measured
/// correlation averages; theta is the unfloored threshold exponent.
pub fn cancellation_rate_bound(k: usize, n_k: usize, d: u32, level: u8) -> Result<f64> {
    let theta = raw_threshold_exponent(d, level)?;
    Ok((k as f64).powf(theta) / n_k as f64)
}

/// Per-packet statistics row.
#[derive(Clone, Debug)]
pub struct PacketStats {
    pub k: usize,
    pub n_k: usize,
    pub lambda_k: f64,
    pub packet_energy: f64,
    pub ratio: f64,
    /// Correlation averages, one per requested weight.
    pub corr_avg: Vec<f64>,
    /// Envelope k^theta / N_k per requested weight, at its invoked level.
    pub envelope: Vec<f64>,
    /// True when the packet is a union of complete eigenspaces.
    pub aligned: bool,
}

/// Batch packet statistics over the schedule's index list.
///
/// `corr_weights` names the weights to correlate against, each with the
/// moment level to invoke for the envelope; invoking a level above the
/// weight's certified level is rejected.
pub fn packet_stats(
    spectrum: &Spectrum,
    f: &SpectrumFunctionals,
    schedule: &PacketSchedule,
    corr_weights: &[(String, u8)],
) -> Result<Vec<PacketStats>> {
    if spectrum.len() != f.len() {
        return Err(Error::GridMismatch(format!(
            "functionals cover {} modes, spectrum has {}",
            f.len(),
            spectrum.len()
        )));
    }
    let d = spectrum.domain.dim as u32;
    let mut widx = Vec::with_capacity(corr_weights.len());
    for (name, level) in corr_weights {
        let wi = f.weight_index(name)?;
        if f.weight_levels[wi] < 1 {
            return Err(Error::MeanNotZero(format!(
                "weight '{name}' is level 0; correlation averages need zero-mean weights"
            )));
        }
        if *level > f.weight_levels[wi] {
            return Err(Error::InvalidParameter(format!(
                "weight '{name}' is certified at level {} but level {level} was invoked",
                f.weight_levels[wi]
            )));
        }
        if !(*level == 1 || *level == 2) {
            return Err(Error::InvalidParameter(format!(
                "invoked level must be 1 or 2, got {level}"
            )));
        }
        widx.push(wi);
    }
    let mut out = Vec::with_capacity(schedule.k_list.len());
    for &k in &schedule.k_list {
        let range = packet_indices(k, schedule, f.len())?;
        let n = range.len();
        let den = window_energy(f, k, n)?;
        let mut corr = Vec::with_capacity(widx.len());
        let mut env = Vec::with_capacity(widx.len());
        for (pos, &wi) in widx.iter().enumerate() {
            let num: f64 = f.weighted[wi][k - 1..k + n - 1].iter().sum();
            corr.push(num / den);
            env.push(cancellation_rate_bound(k, n, d, corr_weights[pos].1)?);
        }
        out.push(PacketStats {
            k,
            n_k: n,
            lambda_k: f.lambdas[k - 1],
            packet_energy: den,
            ratio: f.energies[k - 1] / den,
            corr_avg: corr,
            envelope: env,
            aligned: is_eigenspace_aligned(spectrum, k, n),
        });
    }
    Ok(out)
}

/// True when the window {k, ..., k+n-1} starts and ends on eigenspace
/// boundaries, i.e. contains only whole degenerate eigenspaces.
pub fn is_eigenspace_aligned(spectrum: &Spectrum, k: usize, n: usize) -> bool {
    let esp = &spectrum.eigenspace_index;
    if k == 0 || k + n - 1 > esp.len() {
        return false;
    }
    let start_ok = k == 1 || esp[k - 2] != esp[k - 1];
    let end_ok = k + n - 1 == esp.len() || esp[k + n - 2] != esp[k + n - 1];
    start_ok && end_ok
}

/// Direct packet pairing versus cumulative differencing: returns
/// (sum_{j=k}^{k+n-1} E_j(w), Q(lambda_{k+n}) - Q(lambda_k)). The two agree
/// when the window is eigenspace-aligned, because eigenvalue cutoffs cannot
/// split a degenerate eigenspace.
pub fn telescoping_pair(
    spectrum: &Spectrum,
    f: &SpectrumFunctionals,
    k: usize,
    n: usize,
    weight_name: &str,
) -> Result<(f64, f64)> {
    if k + n > f.len() {
        return Err(Error::SpectrumTooShort(format!(
            "cumulative differencing needs mode {} beyond the window end",
            k + n
        )));
    }
    let wi = f.weight_index(weight_name)?;
    let direct: f64 = f.weighted[wi][k - 1..k + n - 1].iter().sum();
    let hi = spectrum.modes[k + n - 1].lambda;
    let lo = spectrum.modes[k - 1].lambda;
    let diff = f.q_lambda_pairing(hi, weight_name)? - f.q_lambda_pairing(lo, weight_name)?;
    Ok((direct, diff))
}

/// Least-squares line through (log x, log |y|).
#[derive(Clone, Copy, Debug)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

pub fn rate_fit(xs: &[f64], ys: &[f64]) -> Result<RateFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "rate fit needs two equally long series of at least 2 points, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let mut lx = Vec::with_capacity(xs.len());
    let mut ly = Vec::with_capacity(ys.len());
    for (x, y) in xs.iter().zip(ys) {
        if !(*x > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rate fit abscissae must be positive, got {x}"
            )));
        }
        if *y == 0.0 || !y.is_finite() {
            return Err(Error::InvalidParameter(
                "rate fit ordinates must be nonzero and finite; filter exact zeros first".into(),
            ));
        }
        lx.push(x.ln());
        ly.push(y.abs().ln());
    }
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 1e-24 * n {
        return Err(Error::DegenerateFit(
            "zero variance in the fit abscissae".into(),
        ));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let ss_tot: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    let r_squared = if ss_tot <= 1e-24 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(RateFit { slope, intercept, r_squared, n_points: xs.len() })
}

fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n as f64 - 1.0)))
        .collect()
}

fn check_fit_window(lo: f64, hi: f64, n_samples: usize, max_lambda: f64) -> Result<()> {
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidParameter(format!(
            "fit window must satisfy 0 < lo < hi, got [{lo}, {hi}]"
        )));
    }
    if n_samples < 5 {
        return Err(Error::InvalidParameter(format!(
            "fits need at least 5 samples, got {n_samples}"
        )));
    }
    if hi > max_lambda {
        return Err(Error::SpectrumTooShort(format!(
            "fit window reaches {hi} but the spectrum stops at {max_lambda}"
        )));
    }
    Ok(())
}

/// Counting-function fit N(Lambda) ~ constant * Lambda^{d/2}.
#[derive(Clone, Copy, Debug)]
pub struct CountingFit {
    /// Log-log slope; d/2 expected.
    pub exponent: f64,
    pub r_squared: f64,
    /// Least-squares coefficient of Lambda^{d/2} (no intercept).
    pub constant: f64,
    /// omega_d |Omega| / (2 pi)^d, the predicted constant.
    pub reference: f64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub n_samples: usize,
}

pub fn weyl_count_fit(
    spectrum: &Spectrum,
    lambda_lo: f64,
    lambda_hi: f64,
    n_samples: usize,
) -> Result<CountingFit> {
    check_fit_window(lambda_lo, lambda_hi, n_samples, spectrum.max_lambda())?;
    let d = spectrum.domain.dim;
    let lambdas = log_spaced(lambda_lo, lambda_hi, n_samples);
    let counts: Vec<f64> = lambdas.iter().map(|l| spectrum.count_below(*l) as f64).collect();
    if counts[0] == 0.0 {
        return Err(Error::InvalidParameter(format!(
            "fit window starts below the first eigenvalue (N({lambda_lo}) = 0)"
        )));
    }
    let fit = rate_fit(&lambdas, &counts)?;
    let half_d = d as f64 / 2.0;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (l, c) in lambdas.iter().zip(&counts) {
        let x = l.powf(half_d);
        sxy += x * c;
        sxx += x * x;
    }
    let omega_d = match d {
        2 => std::f64::consts::PI,
        3 => 4.0 / 3.0 * std::f64::consts::PI,
        _ => unreachable!(),
    };
    let reference = omega_d * spectrum.domain.volume() / (2.0 * std::f64::consts::PI).powi(d as i32);
    Ok(CountingFit {
        exponent: fit.slope,
        r_squared: fit.r_squared,
        constant: sxy / sxx,
        reference,
        lambda_lo,
        lambda_hi,
        n_samples,
    })
}

/// Integrated boundary-energy fit S(Lambda) ~ constant * Lambda^{1 + d/2}.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryFit {
    /// Log-log slope; 1 + d/2 expected.
    pub exponent: f64,
    pub r_squared: f64,
    /// Least-squares coefficient of Lambda^{1 + d/2} (no intercept);
    /// no closed form is claimed for it.
    pub constant: f64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub n_samples: usize,
}

pub fn weyl_boundary_fit(
    f: &SpectrumFunctionals,
    d: usize,
    lambda_lo: f64,
    lambda_hi: f64,
    n_samples: usize,
) -> Result<BoundaryFit> {
    let max = f.lambdas.last().copied().unwrap_or(0.0);
    check_fit_window(lambda_lo, lambda_hi, n_samples, max)?;
    let lambdas = log_spaced(lambda_lo, lambda_hi, n_samples);
    let sums: Vec<f64> = lambdas
        .iter()
        .map(|l| f.s_lambda(*l))
        .collect::<Result<_>>()?;
    if sums[0] <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "fit window starts below the first eigenvalue (S({lambda_lo}) = 0)"
        )));
    }
    let fit = rate_fit(&lambdas, &sums)?;
    let p = 1.0 + d as f64 / 2.0;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (l, s) in lambdas.iter().zip(&sums) {
        let x = l.powf(p);
        sxy += x * s;
        sxx += x * x;
    }
    Ok(BoundaryFit {
        exponent: fit.slope,
        r_squared: fit.r_squared,
        constant: sxy / sxx,
        lambda_lo,
        lambda_hi,
        n_samples,
    })
}

/// Two-term regression of the cumulative pairing
/// Q(Lambda) = leading * Lambda^{(d+1)/2} + second * Lambda^{d/2}.
/// For a weight with vanishing mean the leading coefficient should be
/// statistically indistinguishable from zero.
#[derive(Clone, Copy, Debug)]
pub struct PairingFit {
    pub leading: f64,
    pub leading_se: f64,
    pub second: f64,
    pub second_se: f64,
    pub r_squared: f64,
    /// |leading| Lambda_hi^{(d+1)/2} relative to the unweighted sum
    /// S(Lambda_hi): the share the leading term would contribute.
    pub leading_share: f64,
    /// |leading| <= 3 standard errors plus a numerical floor.
    pub consistent_with_zero: bool,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub n_samples: usize,
}

pub fn weyl_pairing_fit(
    f: &SpectrumFunctionals,
    d: usize,
    weight_name: &str,
    lambda_lo: f64,
    lambda_hi: f64,
    n_samples: usize,
) -> Result<PairingFit> {
    let max = f.lambdas.last().copied().unwrap_or(0.0);
    check_fit_window(lambda_lo, lambda_hi, n_samples, max)?;
    let lambdas = log_spaced(lambda_lo, lambda_hi, n_samples);
    let ys: Vec<f64> = lambdas
        .iter()
        .map(|l| f.q_lambda_pairing(*l, weight_name))
        .collect::<Result<_>>()?;
    let p_lead = (d as f64 + 1.0) / 2.0;
    let p_second = d as f64 / 2.0;
    let mut xtx = Matrix2::zeros();
    let mut xty = Vector2::zeros();
    for (l, y) in lambdas.iter().zip(&ys) {
        let x = Vector2::new(l.powf(p_lead), l.powf(p_second));
        xtx += x * x.transpose();
        xty += x * *y;
    }
    let inv = xtx.try_inverse().ok_or_else(|| {
        Error::DegenerateFit("singular normal equations in the pairing fit".into())
    })?;
    let beta = inv * xty;
    let mut rss = 0.0;
    let mut mean = 0.0;
    for y in &ys {
        mean += y;
    }
    mean /= ys.len() as f64;
    let mut tss = 0.0;
    for (l, y) in lambdas.iter().zip(&ys) {
        let fit = beta[0] * l.powf(p_lead) + beta[1] * l.powf(p_second);
        rss += (y - fit) * (y - fit);
        tss += (y - mean) * (y - mean);
    }
    let dof = (n_samples - 2) as f64;
    let sigma2 = rss / dof;
    let se0 = (sigma2 * inv[(0, 0)]).sqrt();
    let se1 = (sigma2 * inv[(1, 1)]).sqrt();
    let s_hi = f.s_lambda(lambda_hi)?;
    let lead_scale = lambda_hi.powf(p_lead);
    let leading_share = (beta[0] * lead_scale).abs() / s_hi;
    // The floor covers the exactly-cancelling case where both the estimate
    // and its standard error are pure roundoff.
    let floor = 1e-9 * s_hi / lead_scale;
    Ok(PairingFit {
        leading: beta[0],
        leading_se: se0,
        second: beta[1],
        second_se: se1,
        r_squared: if tss <= 1e-24 { 1.0 } else { 1.0 - rss / tss },
        leading_share,
        consistent_with_zero: beta[0].abs() <= 3.0 * se0 + floor,
        lambda_lo,
        lambda_hi,
        n_samples,
    })
}

/// Haar-distributed random orthogonal matrix (QR of a Gaussian matrix with
/// the R diagonal sign fixed), deterministic in the seed.
pub fn random_orthogonal(dim: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gaussian = || {
        // Box-Muller on open-interval uniforms.
        let u: f64 = loop {
            let u: f64 = rng.random();
            if u > 1e-300 {
                break u;
            }
        };
        let v: f64 = rng.random();
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    };
    let a = DMatrix::from_fn(dim, dim, |_, _| gaussian());
    let qr = a.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            for i in 0..dim {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Applies an explicit orthogonal mix to one eigenspace's trace functions
/// and returns the maximal relative deviation of whole-eigenspace
/// statistics: the summed density (nodewise), the eigenspace energy, and
/// the energy-weighted correlation with the supplied weight. Deviations of
/// the correlation are measured relative to the weight's sup norm, its
/// natural bound.
pub fn basis_mixing_deviation(
    spectrum: &Spectrum,
    grid: &BoundaryGrid,
    weight: &Weight,
    eigenspace_id: usize,
    mix: &DMatrix<f64>,
) -> Result<f64> {
    let ranges = spectrum.eigenspace_ranges();
    let range = ranges.get(eigenspace_id).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "eigenspace {eigenspace_id} outside the {} computed eigenspaces",
            ranges.len()
        ))
    })?;
    let dim = range.len();
    if dim < 2 {
        return Err(Error::InvalidParameter(format!(
            "eigenspace {eigenspace_id} has dimension {dim}; mixing needs >= 2"
        )));
    }
    if mix.nrows() != dim || mix.ncols() != dim {
        return Err(Error::InvalidParameter(format!(
            "mix matrix is {}x{}, eigenspace has dimension {dim}",
            mix.nrows(),
            mix.ncols()
        )));
    }
    if weight.samples.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "weight '{}' has {} samples, grid has {} nodes",
            weight.name,
            weight.samples.len(),
            grid.len()
        )));
    }
    let traces: Vec<Vec<f64>> = range
        .clone()
        .map(|i| spectrum.trace_at(i + 1, grid))
        .collect::<Result<_>>()?;
    let aggregate = |ts: &[Vec<f64>]| -> (Vec<f64>, f64, f64) {
        let mut density = vec![0.0; grid.len()];
        let mut energy = 0.0;
        let mut weighted = 0.0;
        for t in ts {
            for (i, v) in t.iter().enumerate() {
                let rho = v * v;
                density[i] += rho;
                energy += rho * grid.quad_weights[i];
                weighted += rho * weight.samples[i] * grid.quad_weights[i];
            }
        }
        (density, energy, weighted)
    };
    let (base_density, base_energy, base_weighted) = aggregate(&traces);
    let mixed: Vec<Vec<f64>> = (0..dim)
        .map(|i| {
            let mut t = vec![0.0; grid.len()];
            for (j, src) in traces.iter().enumerate() {
                let c = mix[(i, j)];
                for (out, s) in t.iter_mut().zip(src) {
                    *out += c * s;
                }
            }
            t
        })
        .collect();
    let (mix_density, mix_energy, mix_weighted) = aggregate(&mixed);
    let density_scale = base_density.iter().fold(0.0_f64, |a, v| a.max(*v));
    let mut dev = 0.0_f64;
    for (a, b) in base_density.iter().zip(&mix_density) {
        dev = dev.max((a - b).abs() / density_scale);
    }
    dev = dev.max((base_energy - mix_energy).abs() / base_energy);
    let sup = weight.sup_norm.max(1e-300);
    dev = dev.max(((base_weighted - mix_weighted) / base_energy).abs() / sup);
    Ok(dev)
}

/// Seeded random-mix version of [`basis_mixing_deviation`].
pub fn basis_mixing_check(
    spectrum: &Spectrum,
    grid: &BoundaryGrid,
    weight: &Weight,
    eigenspace_id: usize,
    seed: u64,
) -> Result<f64> {
    let ranges = spectrum.eigenspace_ranges();
    let dim = ranges
        .get(eigenspace_id)
        .map(|r| r.len())
        .ok_or_else(|| {
            Error::InvalidParameter(format!(
                "eigenspace {eigenspace_id} outside the {} computed eigenspaces",
                ranges.len()
            ))
        })?;
    basis_mixing_deviation(spectrum, grid, weight, eigenspace_id, &random_orthogonal(dim, seed))
}
