//! Dirichlet eigenpairs on strictly convex planar domains by the method of
//! particular solutions: a Fourier-Bessel basis about the base point,
//! boundary collocation stacked over random interior regularization points,
//! and golden-section refinement of the subspace-angle tension.

use crate::bessel::bessel_j_seq;
use crate::error::{Error, Result};
use crate::geometry::{build_grid, BoundaryGrid, DomainKind, DomainSpec, GridSize, Point};
use crate::legendre::gauss_legendre;
use crate::spectra::{Mode, ModeFamily, Parity, Spectrum};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Relative eigenvalue gap below which refined eigenvalues are grouped into
/// one degenerate cluster.
const CLUSTER_REL_TOL: f64 = 1e-8;

/// Columns whose norm falls below this fraction of the largest column norm
/// are numerically zero (deep evanescent orders) and are dropped.
const COLUMN_DROP_REL: f64 = 1e-280;

#[derive(Clone, Copy, Debug)]
pub struct MpsConfig {
    /// Maximal angular order M_b of the basis about the base point.
    pub basis_order: usize,
    /// Boundary collocation points; at least 2 M_b + 16.
    pub n_boundary: usize,
    /// Random interior regularization points; at least M_b.
    pub n_interior: usize,
    pub scan_window: (f64, f64),
    /// Absolute step of the tension scan. Consecutive eigenvalue gaps in
    /// the window (per symmetry class when splitting) must exceed twice
    /// this step, or minima merge and modes are missed.
    pub scan_step: f64,
    /// Acceptance threshold on the refined minimal singular value.
    pub tension_tol: f64,
    /// Relative eigenvalue tolerance of the golden-section refinement.
    pub refine_tol: f64,
    /// Seed of the interior point sampler.
    pub seed: u64,
    /// Scan each mirror-symmetry class of the basis separately. The
    /// quasi-degenerate partners of a symmetric domain land in different
    /// classes, so no scan resolution can conflate them; coincident
    /// eigenvalues are re-merged into clusters afterwards.
    pub split_symmetry: bool,
}

impl MpsConfig {
    /// Heuristic sizing for a window on a given domain: angular orders up
    /// to the boundary wavenumber plus an evanescent tail, collocation at
    /// twice that density, scan step from the per-class mean gap.
    pub fn for_window(domain: &DomainSpec, lambda_lo: f64, lambda_hi: f64, seed: u64) -> Result<Self> {
        if !(lambda_lo > 0.0 && lambda_hi > lambda_lo) {
            return Err(Error::InvalidParameter(format!(
                "window must satisfy 0 < lo < hi, got [{lambda_lo}, {lambda_hi}]"
            )));
        }
        let r_max = max_boundary_radius(domain);
        let basis_order = (lambda_hi.sqrt() * r_max).ceil() as usize + 14;
        let mean_gap = 4.0 * std::f64::consts::PI / domain.volume();
        let config = MpsConfig {
            basis_order,
            n_boundary: (2 * basis_order + 16).max(96),
            n_interior: basis_order.max(24),
            scan_window: (lambda_lo, lambda_hi),
            scan_step: 0.25 * mean_gap,
            tension_tol: 1e-7,
            refine_tol: 1e-12,
            seed,
            split_symmetry: true,
        };
        config.validate(domain)?;
        Ok(config)
    }

    pub fn validate(&self, domain: &DomainSpec) -> Result<()> {
        if domain.dim != 2 {
            return Err(Error::InvalidParameter(
                "the collocation solver handles planar domains only".into(),
            ));
        }
        if self.basis_order == 0 {
            return Err(Error::InvalidParameter("basis order must be positive".into()));
        }
        if self.n_boundary < 2 * self.basis_order + 16 {
            return Err(Error::InvalidParameter(format!(
                "{} boundary points cannot resolve {} angular orders (need >= 2 M_b + 16)",
                self.n_boundary, self.basis_order
            )));
        }
        if self.n_interior < self.basis_order {
            return Err(Error::InvalidParameter(format!(
                "{} interior points under-determine {} angular orders (need >= M_b)",
                self.n_interior, self.basis_order
            )));
        }
        if !(self.scan_window.0 > 0.0 && self.scan_window.1 > self.scan_window.0) {
            return Err(Error::InvalidParameter(format!(
                "scan window must satisfy 0 < lo < hi, got {:?}",
                self.scan_window
            )));
        }
        if !(self.scan_step > 0.0) {
            return Err(Error::InvalidParameter("scan step must be positive".into()));
        }
        if !(self.tension_tol > 0.0 && self.tension_tol < 0.1) {
            return Err(Error::InvalidParameter(format!(
                "tension tolerance {} outside (0, 0.1)",
                self.tension_tol
            )));
        }
        if !(self.refine_tol > 0.0 && self.refine_tol < 1e-3) {
            return Err(Error::InvalidParameter(format!(
                "refinement tolerance {} outside (0, 1e-3)",
                self.refine_tol
            )));
        }
        Ok(())
    }
}

/// Mirror-symmetry classes of the Fourier-Bessel basis. Domains symmetric
/// under theta -> -theta split into cos/sin blocks; an additional
/// theta -> pi - theta symmetry further splits even and odd orders.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymmetryClass {
    Full,
    CosAll,
    SinAll,
    CosEven,
    CosOdd,
    SinEven,
    SinOdd,
}

impl SymmetryClass {
    pub fn id(self) -> u8 {
        match self {
            SymmetryClass::Full => 0,
            SymmetryClass::CosAll => 1,
            SymmetryClass::SinAll => 2,
            SymmetryClass::CosEven => 3,
            SymmetryClass::CosOdd => 4,
            SymmetryClass::SinEven => 5,
            SymmetryClass::SinOdd => 6,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SymmetryClass::Full => "full",
            SymmetryClass::CosAll => "cos",
            SymmetryClass::SinAll => "sin",
            SymmetryClass::CosEven => "cos-even",
            SymmetryClass::CosOdd => "cos-odd",
            SymmetryClass::SinEven => "sin-even",
            SymmetryClass::SinOdd => "sin-odd",
        }
    }

    pub fn label_of(id: u8) -> &'static str {
        match id {
            0 => "full",
            1 => "cos",
            2 => "sin",
            3 => "cos-even",
            4 => "cos-odd",
            5 => "sin-even",
            6 => "sin-odd",
            _ => "unknown",
        }
    }

    /// Basis orders (m, parity) in this class with m <= m_max.
    fn orders(self, m_max: usize) -> Vec<(u32, Parity)> {
        let mut out = Vec::new();
        for m in 0..=m_max as u32 {
            let even = m % 2 == 0;
            let cos_in = match self {
                SymmetryClass::Full | SymmetryClass::CosAll => true,
                SymmetryClass::CosEven => even,
                SymmetryClass::CosOdd => !even,
                _ => false,
            };
            let sin_in = m > 0
                && match self {
                    SymmetryClass::Full | SymmetryClass::SinAll => true,
                    SymmetryClass::SinEven => even,
                    SymmetryClass::SinOdd => !even,
                    _ => false,
                };
            if cos_in {
                out.push((m, Parity::Cos));
            }
            if sin_in {
                out.push((m, Parity::Sin));
            }
        }
        out
    }
}

/// The symmetry classes available on a domain kind. All supported planar
/// kinds are mirror-symmetric about the x axis; the ellipse and even-
/// frequency perturbed disks are also symmetric about the y axis.
pub fn symmetry_classes(kind: &DomainKind) -> Vec<SymmetryClass> {
    let four = [
        SymmetryClass::CosEven,
        SymmetryClass::CosOdd,
        SymmetryClass::SinEven,
        SymmetryClass::SinOdd,
    ];
    match kind {
        DomainKind::Disk { .. } | DomainKind::Ellipse { .. } => four.to_vec(),
        DomainKind::PerturbedDisk { frequency, .. } => {
            if frequency % 2 == 0 {
                four.to_vec()
            } else {
                vec![SymmetryClass::CosAll, SymmetryClass::SinAll]
            }
        }
        DomainKind::Ball { .. } => vec![SymmetryClass::Full],
    }
}

/// Basis expansion of one collocated mode: coefficients against
/// J_m(sqrt(lambda) r) trig(m theta) about `center`.
#[derive(Clone, Debug)]
pub struct NumericTrace {
    pub center: Point,
    pub orders: Vec<(u32, Parity)>,
    pub coeffs: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct MpsEigenpair {
    pub lambda: f64,
    /// Basis coefficients, L2(Omega)-normalized, largest entry positive.
    pub coeffs: Vec<f64>,
    /// Minimal singular value at lambda.
    pub tension: f64,
    /// |int g rho - 2 lambda| / (2 lambda) on an internal boundary grid.
    pub rellich_residual: f64,
    /// Modes sharing this eigenvalue up to the cluster tolerance.
    pub cluster_size: usize,
    pub class: SymmetryClass,
    pub orders: Vec<(u32, Parity)>,
    pub center: Point,
}

struct CollocationPoints {
    /// (r, theta) of boundary points about the base point.
    boundary: Vec<(f64, f64)>,
    interior: Vec<(f64, f64)>,
    /// Interior row scale balancing the two blocks.
    interior_scale: f64,
}

fn polar_about(center: &Point, p: &Point) -> (f64, f64) {
    let dx = p.x - center.x;
    let dy = p.y - center.y;
    (dx.hypot(dy), dy.atan2(dx))
}

fn max_boundary_radius(domain: &DomainSpec) -> f64 {
    let mut r_max = 0.0_f64;
    for i in 0..256 {
        let t = 2.0 * std::f64::consts::PI * i as f64 / 256.0;
        let (r, _) = polar_about(&domain.x0, &domain.boundary_point(t));
        r_max = r_max.max(r);
    }
    r_max
}

impl CollocationPoints {
    fn build(domain: &DomainSpec, config: &MpsConfig) -> Result<Self> {
        let n_b = config.n_boundary;
        let boundary: Vec<(f64, f64)> = (0..n_b)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / n_b as f64;
                polar_about(&domain.x0, &domain.boundary_point(t))
            })
            .collect();
        let r_box = max_boundary_radius(domain);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut interior = Vec::with_capacity(config.n_interior);
        let mut attempts = 0usize;
        while interior.len() < config.n_interior {
            let x = domain.x0.x + r_box * (2.0 * rng.random::<f64>() - 1.0);
            let y = domain.x0.y + r_box * (2.0 * rng.random::<f64>() - 1.0);
            let p = Point::new(x, y, 0.0);
            if domain.is_interior(&p) {
                interior.push(polar_about(&domain.x0, &p));
            }
            attempts += 1;
            if attempts > 10_000 * config.n_interior {
                return Err(Error::ConvergenceFailure(
                    "interior point sampling keeps missing the domain".into(),
                ));
            }
        }
        Ok(CollocationPoints {
            boundary,
            interior,
            interior_scale: (n_b as f64 / config.n_interior as f64).sqrt(),
        })
    }
}

/// Rows of basis values at (r, theta) points, one column per order.
fn basis_block(
    points: &[(f64, f64)],
    orders: &[(u32, Parity)],
    sqrt_lambda: f64,
    scale: f64,
) -> Result<DMatrix<f64>> {
    let m_max = orders.iter().map(|o| o.0).max().unwrap_or(0) as usize;
    let mut a = DMatrix::zeros(points.len(), orders.len());
    for (i, &(r, theta)) in points.iter().enumerate() {
        let js = bessel_j_seq(m_max, sqrt_lambda * r);
        // cos/sin of m theta by complex rotation.
        let (s1, c1) = theta.sin_cos();
        let mut cm = 1.0_f64;
        let mut sm = 0.0_f64;
        let mut trig = Vec::with_capacity(m_max + 1);
        trig.push((cm, sm));
        for _ in 1..=m_max {
            let c = cm * c1 - sm * s1;
            let s = sm * c1 + cm * s1;
            cm = c;
            sm = s;
            trig.push((cm, sm));
        }
        for (j, &(m, parity)) in orders.iter().enumerate() {
            let (c, s) = trig[m as usize];
            let ang = match parity {
                Parity::Cos => c,
                Parity::Sin => s,
            };
            a[(i, j)] = scale * js[m as usize] * ang;
        }
    }
    Ok(a)
}

struct NormalizedSystem {
    q_boundary: DMatrix<f64>,
    r: DMatrix<f64>,
    /// Kept column index -> original order index.
    kept: Vec<usize>,
    inv_norms: Vec<f64>,
}

fn build_system(
    pts: &CollocationPoints,
    orders: &[(u32, Parity)],
    lambda: f64,
) -> Result<NormalizedSystem> {
    let k = lambda.sqrt();
    let top = basis_block(&pts.boundary, orders, k, 1.0)?;
    let bottom = basis_block(&pts.interior, orders, k, pts.interior_scale)?;
    let rows = top.nrows() + bottom.nrows();
    let mut a = DMatrix::zeros(rows, orders.len());
    a.view_mut((0, 0), (top.nrows(), orders.len())).copy_from(&top);
    a.view_mut((top.nrows(), 0), (bottom.nrows(), orders.len()))
        .copy_from(&bottom);
    let norms: Vec<f64> = (0..orders.len()).map(|j| a.column(j).norm()).collect();
    let max_norm = norms.iter().fold(0.0_f64, |m, v| m.max(*v));
    if !(max_norm > 0.0) {
        return Err(Error::IllConditioned(
            "all basis columns vanish at this wavenumber".into(),
        ));
    }
    let mut kept = Vec::with_capacity(orders.len());
    let mut inv_norms = Vec::with_capacity(orders.len());
    for (j, n) in norms.iter().enumerate() {
        if *n > COLUMN_DROP_REL * max_norm {
            kept.push(j);
            inv_norms.push(1.0 / n);
        }
    }
    if kept.is_empty() {
        return Err(Error::IllConditioned("no usable basis columns".into()));
    }
    let mut an = DMatrix::zeros(rows, kept.len());
    for (jj, (&j, inv)) in kept.iter().zip(&inv_norms).enumerate() {
        an.column_mut(jj).copy_from(&(a.column(j) * *inv));
    }
    let qr = an.qr();
    let q = qr.q();
    let r = qr.r();
    let mut diag_max = 0.0_f64;
    let mut diag_min = f64::INFINITY;
    for j in 0..r.nrows().min(r.ncols()) {
        let d = r[(j, j)].abs();
        diag_max = diag_max.max(d);
        diag_min = diag_min.min(d);
    }
    if !(diag_min > 1e-14 * diag_max) {
        return Err(Error::IllConditioned(format!(
            "basis numerically rank-deficient at lambda = {lambda} (R diagonal ratio {:.2e})",
            diag_min / diag_max
        )));
    }
    Ok(NormalizedSystem {
        q_boundary: q.rows(0, pts.boundary.len()).into_owned(),
        r,
        kept,
        inv_norms,
    })
}

fn sigma_min(sys: &NormalizedSystem) -> Result<f64> {
    let svd = sys
        .q_boundary
        .clone()
        .try_svd(false, false, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::IllConditioned("singular values did not converge".into()))?;
    Ok(svd.singular_values.iter().fold(f64::INFINITY, |m, s| m.min(*s)))
}

/// Ascending singular values and, for each, the full-length coefficient
/// vector in the original basis ordering.
fn singular_pairs(sys: &NormalizedSystem, n_orders: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let svd = sys
        .q_boundary
        .clone()
        .try_svd(false, true, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::IllConditioned("singular values did not converge".into()))?;
    let v_t = svd.v_t.as_ref().expect("requested right singular vectors");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|a, b| svd.singular_values[*a].total_cmp(&svd.singular_values[*b]));
    let mut sigmas = Vec::with_capacity(idx.len());
    let mut vectors = Vec::with_capacity(idx.len());
    for &i in &idx {
        sigmas.push(svd.singular_values[i]);
        let v: DVector<f64> = v_t.row(i).transpose();
        let cn = sys
            .r
            .solve_upper_triangular(&v)
            .ok_or_else(|| Error::IllConditioned("triangular back-substitution failed".into()))?;
        let mut full = vec![0.0; n_orders];
        for (jj, (&j, inv)) in sys.kept.iter().zip(&sys.inv_norms).enumerate() {
            full[j] = cn[jj] * inv;
        }
        vectors.push(full);
    }
    Ok((sigmas, vectors))
}

/// Subspace-angle tension at lambda: the minimal singular value of the
/// boundary block of the orthonormalized, column-normalized stacked system.
/// Near zero exactly when lambda is near a Dirichlet eigenvalue.
pub fn tension(domain: &DomainSpec, config: &MpsConfig, lambda: f64) -> Result<f64> {
    config.validate(domain)?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tension requires lambda > 0, got {lambda}"
        )));
    }
    let pts = CollocationPoints::build(domain, config)?;
    let orders = SymmetryClass::Full.orders(config.basis_order);
    sigma_min(&build_system(&pts, &orders, lambda)?)
}

fn golden_refine(
    mut f: impl FnMut(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    rel_tol: f64,
) -> Result<(f64, f64)> {
    const INV: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV * (b - a);
    let mut x2 = a + INV * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..300 {
        if (b - a) <= rel_tol * 0.5 * (a + b) || (b - a) <= 8.0 * f64::EPSILON * b {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV * (b - a);
            f2 = f(x2)?;
        }
    }
    let mid = 0.5 * (a + b);
    let fm = f(mid)?;
    Ok((mid, fm))
}

/// L2(Omega) norm of the basis expansion by a mapped polar tensor grid:
/// x(s, t) = x0 + s (gamma(t) - x0), with Gauss-Legendre nodes radially and
/// the trapezoid rule angularly; dA = s |(gamma - x0) x gamma'(t)| ds dt.
fn l2_norm(
    domain: &DomainSpec,
    center: &Point,
    orders: &[(u32, Parity)],
    coeffs: &[f64],
    lambda: f64,
) -> Result<f64> {
    let k = lambda.sqrt();
    let r_max = max_boundary_radius(domain);
    let n_r = 24 + (2.0 * k * r_max).ceil() as usize;
    let m_max = orders.iter().map(|o| o.0).max().unwrap_or(0) as usize;
    let n_t = (8 * m_max).max(256);
    let (gl_nodes, gl_weights) = gauss_legendre(n_r);
    let dt = 2.0 * std::f64::consts::PI / n_t as f64;
    let mut norm2 = 0.0;
    for jt in 0..n_t {
        let t = jt as f64 * dt;
        let gamma = domain.boundary_point(t);
        let vel = domain.boundary_velocity(t);
        let ex = gamma.x - center.x;
        let ey = gamma.y - center.y;
        let cross = ex * vel.y - ey * vel.x;
        for (xi, w) in gl_nodes.iter().zip(&gl_weights) {
            // Map [-1, 1] -> [0, 1].
            let s = 0.5 * (xi + 1.0);
            let p = Point::new(center.x + s * ex, center.y + s * ey, 0.0);
            let (r, theta) = polar_about(center, &p);
            let u = eval_expansion(orders, coeffs, k, r, theta)?;
            norm2 += 0.5 * w * dt * u * u * s * cross;
        }
    }
    if !(norm2.is_finite() && norm2 > 0.0) {
        return Err(Error::NormalizationFailure(format!(
            "interior quadrature returned squared norm {norm2}"
        )));
    }
    Ok(norm2.sqrt())
}

fn eval_expansion(
    orders: &[(u32, Parity)],
    coeffs: &[f64],
    k: f64,
    r: f64,
    theta: f64,
) -> Result<f64> {
    let m_max = orders.iter().map(|o| o.0).max().unwrap_or(0) as usize;
    let js = bessel_j_seq(m_max, k * r);
    let mut u = 0.0;
    for (&(m, parity), c) in orders.iter().zip(coeffs) {
        if *c == 0.0 {
            continue;
        }
        let ang = match parity {
            Parity::Cos => (m as f64 * theta).cos(),
            Parity::Sin => (m as f64 * theta).sin(),
        };
        u += c * js[m as usize] * ang;
    }
    Ok(u)
}

/// Signed normal derivative of the expansion at the grid nodes.
pub fn normal_derivative_trace(
    nt: &NumericTrace,
    lambda: f64,
    grid: &BoundaryGrid,
) -> Result<Vec<f64>> {
    if grid.domain.dim != 2 {
        return Err(Error::DomainMismatch(
            "collocated traces are planar; the grid is not".into(),
        ));
    }
    if nt.coeffs.len() != nt.orders.len() || nt.coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::NormalizationFailure(
            "basis expansion is malformed or non-finite".into(),
        ));
    }
    let k = lambda.sqrt();
    let m_max = nt.orders.iter().map(|o| o.0).max().unwrap_or(0) as usize;
    let mut out = Vec::with_capacity(grid.len());
    for (node, normal) in grid.nodes.iter().zip(&grid.normals) {
        let (r, theta) = polar_about(&nt.center, node);
        let js = bessel_j_seq(m_max + 1, k * r);
        let (st, ct) = theta.sin_cos();
        let mut du_r = 0.0;
        let mut du_t = 0.0;
        for (&(m, parity), c) in nt.orders.iter().zip(&nt.coeffs) {
            if *c == 0.0 {
                continue;
            }
            let mu = m as usize;
            let jm = js[mu];
            // J_m'(x) = (J_{m-1} - J_{m+1}) / 2, J_0' = -J_1.
            let jp = if m == 0 { -js[1] } else { 0.5 * (js[mu - 1] - js[mu + 1]) };
            let arg = m as f64 * theta;
            let (ang, dang) = match parity {
                Parity::Cos => (arg.cos(), -(m as f64) * arg.sin()),
                Parity::Sin => (arg.sin(), m as f64 * arg.cos()),
            };
            du_r += c * k * jp * ang;
            du_t += c * jm * dang;
        }
        let gx = ct * du_r - st * du_t / r;
        let gy = st * du_r + ct * du_t / r;
        out.push(gx * normal.x + gy * normal.y);
    }
    Ok(out)
}

/// Boundary flux density rho = |d_n u|^2 of an accepted eigenpair at the
/// grid nodes.
pub fn extract_trace(pair: &MpsEigenpair, grid: &BoundaryGrid) -> Result<Vec<f64>> {
    let nt = NumericTrace {
        center: pair.center,
        orders: pair.orders.clone(),
        coeffs: pair.coeffs.clone(),
    };
    let mut t = normal_derivative_trace(&nt, pair.lambda, grid)?;
    for v in t.iter_mut() {
        *v *= *v;
    }
    Ok(t)
}

/// Rellich flux residual of a raw (not necessarily normalized) expansion:
/// |int g rho - 2 lambda ||u||^2| / (2 lambda ||u||^2). Invariant under
/// coefficient rescaling because both sides scale identically.
pub fn rellich_residual_raw(
    domain: &DomainSpec,
    nt: &NumericTrace,
    lambda: f64,
    grid: &BoundaryGrid,
) -> Result<f64> {
    let trace = normal_derivative_trace(nt, lambda, grid)?;
    let mut flux = 0.0;
    for ((t, g), w) in trace.iter().zip(&grid.support_g).zip(&grid.quad_weights) {
        flux += t * t * g * w;
    }
    let norm = l2_norm(domain, &nt.center, &nt.orders, &nt.coeffs, lambda)?;
    let rhs = 2.0 * lambda * norm * norm;
    Ok((flux - rhs).abs() / rhs)
}

/// All Dirichlet eigenpairs in the configured window: scan the tension for
/// local minima, refine each by golden section, keep refined minima below
/// the tension tolerance, detect within-class multiplicity by the second
/// singular value, merge coincident eigenvalues across classes, normalize
/// to unit L2(Omega) norm, and certify each pair with its Rellich residual.
pub fn scan_and_refine(domain: &DomainSpec, config: &MpsConfig) -> Result<Vec<MpsEigenpair>> {
    config.validate(domain)?;
    let pts = CollocationPoints::build(domain, config)?;
    let classes = if config.split_symmetry {
        symmetry_classes(&domain.kind)
    } else {
        vec![SymmetryClass::Full]
    };
    let (lo, hi) = config.scan_window;
    let step = config.scan_step;
    let residual_grid = build_grid(domain, GridSize::Curve((8 * config.basis_order).max(512)))?;
    let mut found: Vec<MpsEigenpair> = Vec::new();
    for class in classes {
        let orders = class.orders(config.basis_order);
        if orders.is_empty() {
            continue;
        }
        let start = (lo - 2.0 * step).max(0.25 * lo);
        let stop = hi + 2.0 * step;
        let n_grid = ((stop - start) / step).ceil() as usize + 1;
        let mut sigmas = Vec::with_capacity(n_grid);
        for i in 0..n_grid {
            let lambda = start + i as f64 * step;
            sigmas.push((lambda, sigma_min(&build_system(&pts, &orders, lambda)?)?));
        }
        let mut class_lambdas: Vec<f64> = Vec::new();
        for i in 1..n_grid.saturating_sub(1) {
            let (l, s) = sigmas[i];
            if s <= sigmas[i - 1].1 && s <= sigmas[i + 1].1 {
                let (lambda_star, sigma_star) = golden_refine(
                    |x| sigma_min(&build_system(&pts, &orders, x)?),
                    sigmas[i - 1].0,
                    sigmas[i + 1].0,
                    config.refine_tol,
                )?;
                let _ = (l, s);
                if sigma_star > config.tension_tol || lambda_star < lo || lambda_star > hi {
                    continue;
                }
                if class_lambdas
                    .iter()
                    .any(|prev| (prev - lambda_star).abs() <= 16.0 * config.refine_tol * lambda_star)
                {
                    continue;
                }
                class_lambdas.push(lambda_star);
                let sys = build_system(&pts, &orders, lambda_star)?;
                let (all_sigmas, vectors) = singular_pairs(&sys, orders.len())?;
                let multiplicity = all_sigmas
                    .iter()
                    .take_while(|sg| **sg <= config.tension_tol)
                    .count()
                    .max(1);
                for member in 0..multiplicity {
                    let mut coeffs = vectors[member].clone();
                    let norm = l2_norm(domain, &domain.x0, &orders, &coeffs, lambda_star)?;
                    if norm < 1e-10 {
                        return Err(Error::NormalizationFailure(format!(
                            "candidate at lambda = {lambda_star} has interior norm {norm}; \
                             spurious boundary-degenerate mode"
                        )));
                    }
                    for c in coeffs.iter_mut() {
                        *c /= norm;
                    }
                    let lead = coeffs
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                        .map(|(i, _)| i)
                        .unwrap_or(0);
                    if coeffs[lead] < 0.0 {
                        for c in coeffs.iter_mut() {
                            *c = -*c;
                        }
                    }
                    let nt = NumericTrace {
                        center: domain.x0,
                        orders: orders.clone(),
                        coeffs: coeffs.clone(),
                    };
                    let rellich_residual =
                        rellich_residual_raw(domain, &nt, lambda_star, &residual_grid)?;
                    found.push(MpsEigenpair {
                        lambda: lambda_star,
                        coeffs,
                        tension: all_sigmas[0],
                        rellich_residual,
                        cluster_size: multiplicity,
                        class,
                        orders: orders.clone(),
                        center: domain.x0,
                    });
                }
            }
        }
    }
    found.sort_by(|a, b| a.lambda.total_cmp(&b.lambda).then(a.class.id().cmp(&b.class.id())));
    // Cross-class coincidences form one degenerate cluster.
    let mut i = 0;
    while i < found.len() {
        let mut j = i + 1;
        while j < found.len()
            && found[j].lambda - found[j - 1].lambda <= CLUSTER_REL_TOL * found[j].lambda
        {
            j += 1;
        }
        let size = j - i;
        for pair in &mut found[i..j] {
            pair.cluster_size = size;
        }
        i = j;
    }
    let expected = domain.two_term_weyl(hi) - domain.two_term_weyl(lo);
    let boundary_term = domain.boundary_measure() * (hi.sqrt() - lo.sqrt())
        / (4.0 * std::f64::consts::PI);
    let margin = (0.5 * boundary_term).max(2.5);
    if (found.len() as f64 - expected).abs() > margin {
        return Err(Error::MissedEigenvalueSuspected(format!(
            "{} eigenvalues found in [{lo}, {hi}] vs two-term Weyl estimate {:.2} \
             (margin {:.2}); check scan_step and basis_order",
            found.len(),
            expected,
            margin
        )));
    }
    Ok(found)
}

/// Repeats the refinement around an accepted eigenvalue with the basis
/// order raised by `extra_orders` and returns the relative eigenvalue
/// shift. Shifts beyond ~10x refine_tol mean the basis was too small.
pub fn basis_order_shift(
    domain: &DomainSpec,
    config: &MpsConfig,
    pair: &MpsEigenpair,
    extra_orders: usize,
) -> Result<f64> {
    let mut enlarged = *config;
    enlarged.basis_order = config.basis_order + extra_orders;
    enlarged.n_boundary = enlarged.n_boundary.max(2 * enlarged.basis_order + 16);
    enlarged.n_interior = enlarged.n_interior.max(enlarged.basis_order);
    enlarged.validate(domain)?;
    let pts = CollocationPoints::build(domain, &enlarged)?;
    let orders = pair.class.orders(enlarged.basis_order);
    let half = 2.0 * config.scan_step;
    let (lambda_star, _) = golden_refine(
        |x| sigma_min(&build_system(&pts, &orders, x)?),
        pair.lambda - half,
        pair.lambda + half,
        enlarged.refine_tol,
    )?;
    Ok((lambda_star - pair.lambda).abs() / pair.lambda)
}

/// Packages solver output as a spectrum so every downstream functional and
/// packet operation applies unchanged. Eigenspace indices follow the
/// cluster grouping.
pub fn to_spectrum(domain: &DomainSpec, pairs: &[MpsEigenpair]) -> Result<Spectrum> {
    if pairs.is_empty() {
        return Err(Error::SpectrumTooShort("no eigenpairs to package".into()));
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|a, b| pairs[*a].lambda.total_cmp(&pairs[*b].lambda));
    let mut modes = Vec::with_capacity(pairs.len());
    let mut eigenspace_index = Vec::with_capacity(pairs.len());
    let mut numeric = Vec::with_capacity(pairs.len());
    let mut class_counts = std::collections::BTreeMap::new();
    let mut group = 0usize;
    let mut prev_lambda = f64::NEG_INFINITY;
    for (pos, &i) in order.iter().enumerate() {
        let p = &pairs[i];
        if pos > 0 && p.lambda - prev_lambda > CLUSTER_REL_TOL * p.lambda {
            group += 1;
        }
        prev_lambda = p.lambda;
        let count = class_counts.entry(p.class.id()).or_insert(0u32);
        modes.push(Mode {
            k: pos + 1,
            lambda: p.lambda,
            family: ModeFamily::Collocated { class: p.class.id(), index: *count },
            trace_coeff: 0.0,
        });
        *count += 1;
        eigenspace_index.push(group);
        numeric.push(Some(NumericTrace {
            center: p.center,
            orders: p.orders.clone(),
            coeffs: p.coeffs.clone(),
        }));
    }
    Ok(Spectrum { domain: domain.clone(), modes, eigenspace_index, numeric })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bessel::{bessel_zero, BesselOrder};
    use crate::spectra::disk_spectrum;
    use approx::assert_relative_eq;

    fn small_config(lo: f64, hi: f64) -> MpsConfig {
        MpsConfig {
            basis_order: 16,
            n_boundary: 64,
            n_interior: 20,
            scan_window: (lo, hi),
            scan_step: 0.8,
            tension_tol: 1e-7,
            refine_tol: 1e-12,
            seed: 7,
            split_symmetry: true,
        }
    }

    #[test]
    fn tension_flags_disk_eigenvalues() {
        let disk = DomainSpec::disk(1.0).unwrap();
        let config = small_config(5.0, 31.0);
        let l1 = bessel_zero(BesselOrder::Integer(0), 1).unwrap().powi(2);
        let l2 = bessel_zero(BesselOrder::Integer(1), 1).unwrap().powi(2);
        assert!(tension(&disk, &config, l1).unwrap() < 1e-8);
        assert!(tension(&disk, &config, 0.5 * (l1 + l2)).unwrap() > 1e-3);
        let ellipse = DomainSpec::ellipse(1.0, 0.8).unwrap();
        // Far below the fundamental eigenvalue.
        assert!(tension(&ellipse, &config, 2.0).unwrap() > 0.1);
        assert!(tension(&disk, &config, -1.0).is_err());
    }

    #[test]
    fn disk_window_scan_matches_analytic_eigenvalues() {
        let disk = DomainSpec::disk(1.0).unwrap();
        let pairs = scan_and_refine(&disk, &small_config(5.0, 31.0)).unwrap();
        let want = [
            (bessel_zero(BesselOrder::Integer(0), 1).unwrap().powi(2), 1),
            (bessel_zero(BesselOrder::Integer(1), 1).unwrap().powi(2), 2),
            (bessel_zero(BesselOrder::Integer(1), 1).unwrap().powi(2), 2),
            (bessel_zero(BesselOrder::Integer(2), 1).unwrap().powi(2), 2),
            (bessel_zero(BesselOrder::Integer(2), 1).unwrap().powi(2), 2),
            (bessel_zero(BesselOrder::Integer(0), 2).unwrap().powi(2), 1),
        ];
        assert_eq!(pairs.len(), want.len());
        for (pair, (lambda, cluster)) in pairs.iter().zip(&want) {
            assert_relative_eq!(pair.lambda, *lambda, max_relative = 1e-9);
            assert_eq!(pair.cluster_size, *cluster);
            assert!(pair.tension <= 1e-7);
            assert!(pair.rellich_residual <= 1e-8, "residual {}", pair.rellich_residual);
        }
    }

    #[test]
    fn circle_through_the_ellipse_path_reports_degenerate_clusters() {
        let circle = DomainSpec::ellipse(1.0, 1.0).unwrap();
        let pairs = scan_and_refine(&circle, &small_config(5.0, 31.0)).unwrap();
        assert_eq!(pairs.len(), 6);
        for chunk in [&pairs[1..3], &pairs[3..5]] {
            assert_eq!(chunk[0].cluster_size, 2);
            assert_eq!(chunk[1].cluster_size, 2);
            let split = (chunk[1].lambda - chunk[0].lambda).abs();
            assert!(split < 1e-8 * chunk[0].lambda, "split {split}");
        }
    }

    #[test]
    fn extract_trace_reproduces_the_radial_disk_mode() {
        let disk = DomainSpec::disk(1.0).unwrap();
        let pairs = scan_and_refine(&disk, &small_config(5.0, 6.5)).unwrap();
        assert_eq!(pairs.len(), 1);
        let grid = build_grid(&disk, GridSize::Curve(256)).unwrap();
        let rho = extract_trace(&pairs[0], &grid).unwrap();
        // Analytic density of the (0, 1) mode: 2 lambda / (2 pi R^2).
        let want = pairs[0].lambda / std::f64::consts::PI;
        for v in &rho {
            assert!((v - want).abs() <= 1e-8 * want, "rho {v} vs {want}");
        }
        // Sign flip leaves the density unchanged.
        let mut flipped = pairs[0].clone();
        for c in flipped.coeffs.iter_mut() {
            *c = -*c;
        }
        let rho_flipped = extract_trace(&flipped, &grid).unwrap();
        for (a, b) in rho.iter().zip(&rho_flipped) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn ellipse_pairs_obey_the_flux_sandwich() {
        let ellipse = DomainSpec::ellipse(1.0, 0.8).unwrap();
        let mut config = small_config(5.0, 40.0);
        config.basis_order = 20;
        config.n_boundary = 80;
        config.n_interior = 24;
        config.scan_step = 0.5;
        let pairs = scan_and_refine(&ellipse, &config).unwrap();
        assert!(!pairs.is_empty());
        let grid = build_grid(&ellipse, GridSize::Curve(512)).unwrap();
        let (g_min, g_max) = grid.g_bounds().unwrap();
        assert_relative_eq!(g_min, 0.8, epsilon = 1e-10);
        assert_relative_eq!(g_max, 1.0, epsilon = 1e-10);
        for pair in &pairs {
            assert!(pair.rellich_residual <= 1e-6, "residual {}", pair.rellich_residual);
            let rho = extract_trace(pair, &grid).unwrap();
            let energy = grid.integrate(&rho).unwrap();
            let lo = 2.0 * pair.lambda / g_max;
            let hi = 2.0 * pair.lambda / g_min;
            assert!(
                energy >= lo * (1.0 - 1e-6) && energy <= hi * (1.0 + 1e-6),
                "E = {energy} outside [{lo}, {hi}]"
            );
        }
    }

    #[test]
    fn rellich_residual_is_rescale_invariant() {
        let disk = DomainSpec::disk(1.0).unwrap();
        let pairs = scan_and_refine(&disk, &small_config(5.0, 6.5)).unwrap();
        let grid = build_grid(&disk, GridSize::Curve(256)).unwrap();
        let pair = &pairs[0];
        let nt = NumericTrace {
            center: pair.center,
            orders: pair.orders.clone(),
            coeffs: pair.coeffs.clone(),
        };
        let mut scaled = nt.clone();
        for c in scaled.coeffs.iter_mut() {
            *c *= 3.7;
        }
        let a = rellich_residual_raw(&disk, &nt, pair.lambda, &grid).unwrap();
        let b = rellich_residual_raw(&disk, &scaled, pair.lambda, &grid).unwrap();
        // Both residuals sit at the cancellation floor of |flux - 2 lambda|,
        // so they agree absolutely, not to relative precision.
        assert!((a - b).abs() <= 1e-12, "residuals {a} vs {b}");
    }

    #[test]
    fn basis_enlargement_does_not_move_accepted_eigenvalues() {
        let ellipse = DomainSpec::ellipse(1.0, 0.8).unwrap();
        let mut config = small_config(5.0, 20.0);
        config.scan_step = 0.5;
        let pairs = scan_and_refine(&ellipse, &config).unwrap();
        for pair in pairs.iter().take(3) {
            let shift = basis_order_shift(&ellipse, &config, pair, 8).unwrap();
            assert!(shift <= 10.0 * config.refine_tol, "shift {shift}");
        }
    }

    #[test]
    fn packaged_spectrum_flows_through_the_functional_pipeline() {
        use crate::functionals::compute_functionals;
        let disk = DomainSpec::disk(1.0).unwrap();
        let pairs = scan_and_refine(&disk, &small_config(5.0, 31.0)).unwrap();
        let spectrum = to_spectrum(&disk, &pairs).unwrap();
        assert_eq!(spectrum.len(), 6);
        assert_eq!(spectrum.eigenspace_ranges().len(), 4);
        let grid = build_grid(&disk, GridSize::Curve(256)).unwrap();
        let f = compute_functionals(&spectrum, &grid, &[]).unwrap();
        let analytic = disk_spectrum(1.0, 6).unwrap();
        for k in 1..=6 {
            assert_relative_eq!(
                f.lambdas[k - 1],
                analytic.modes[k - 1].lambda,
                max_relative = 1e-9
            );
            // E = 2 lambda on the unit disk.
            assert_relative_eq!(f.energies[k - 1], 2.0 * f.lambdas[k - 1], max_relative = 1e-7);
            assert!(f.rellich[k - 1] <= 1e-7);
        }
    }

    #[test]
    fn perturbed_disk_modes_pass_the_residual_certificate() {
        let flower = DomainSpec::perturbed_disk(1.0, 0.03, 5).unwrap();
        let mut config = small_config(4.0, 20.0);
        // The frequency-5 boundary perturbation couples order m to m +- 5,
        // so the basis must carry the coupling tail (m = 0 feeds 5, 10, ...).
        // Measured tension floors at the lowest mode: order 28 -> 1.6e-6,
        // order 34 -> 2.8e-7, order 40 -> 9.7e-9; order 40 clears the
        // acceptance tolerance with margin.
        config.basis_order = 40;
        config.n_boundary = 128;
        config.n_interior = 40;
        config.scan_step = 0.5;
        let pairs = scan_and_refine(&flower, &config).unwrap();
        assert!(!pairs.is_empty());
        for pair in &pairs {
            assert!(pair.rellich_residual <= 1e-6, "residual {}", pair.rellich_residual);
        }
    }

    #[test]
    fn config_validation_rejects_undersized_systems() {
        let disk = DomainSpec::disk(1.0).unwrap();
        let mut c = small_config(5.0, 31.0);
        c.n_boundary = 2 * c.basis_order + 8;
        assert!(c.validate(&disk).is_err());
        let mut c = small_config(5.0, 31.0);
        c.n_interior = c.basis_order - 1;
        assert!(c.validate(&disk).is_err());
        let mut c = small_config(5.0, 31.0);
        c.scan_window = (-1.0, 5.0);
        assert!(c.validate(&disk).is_err());
        let ball = DomainSpec::ball(1.0).unwrap();
        assert!(small_config(5.0, 31.0).validate(&ball).is_err());
    }

    #[test]
    fn two_term_weyl_tracks_actual_counts() {
        let disk = DomainSpec::disk(1.0).unwrap();
        let s = disk_spectrum(1.0, 400).unwrap();
        for lambda in [200.0_f64, 500.0, 900.0] {
            let diff = s.count_below(lambda) as f64 - disk.two_term_weyl(lambda);
            assert!(diff.abs() < 6.0, "Lambda {lambda}: diff {diff}");
        }
        let ball = DomainSpec::ball(1.0).unwrap();
        let sb = crate::spectra::ball_spectrum(1.0, 700).unwrap();
        for lambda in [150.0_f64, 300.0] {
            let diff = sb.count_below(lambda) as f64 - ball.two_term_weyl(lambda);
            // Eigenspaces of dimension 2l + 1 ~ 2 sqrt(lambda) make the
            // counting remainder oscillate with that amplitude.
            assert!(diff.abs() < 1.2 * lambda.sqrt(), "Lambda {lambda}: diff {diff}");
        }
    }
}
