//! Legendre polynomials, Gauss-Legendre quadrature, and unit-sphere
//! normalized associated Legendre functions for real spherical harmonics.

/// P_n(x) by the three-term recurrence.
pub fn legendre_p(n: usize, x: f64) -> f64 {
    legendre_p_and_deriv(n, x).0
}

/// (P_n(x), P_n'(x)).
pub fn legendre_p_and_deriv(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut pm1 = 1.0_f64;
    let mut p = x;
    for k in 2..=n {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * pm1) / kf;
        pm1 = p;
        p = next;
    }
    // P_n'(x) = n (x P_n - P_{n-1}) / (x^2 - 1); at the endpoints use the
    // closed value n(n+1)/2 * (+-1)^{n+1}.
    let deriv = if (x * x - 1.0).abs() < 1e-14 {
        let sign = if x > 0.0 { 1.0 } else { (-1.0_f64).powi(n as i32 + 1) };
        sign * 0.5 * (n as f64) * (n as f64 + 1.0)
    } else {
        n as f64 * (x * p - pm1) / (x * x - 1.0)
    };
    (p, deriv)
}

/// Gauss-Legendre nodes (ascending in (-1, 1)) and weights for exact
/// integration of polynomials up to degree 2n - 1 on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Tricomi-style initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_p_and_deriv(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_p_and_deriv(n, x);
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Triangular table of unit-sphere normalized associated Legendre values
/// p[l][q] for 0 <= q <= l <= l_max at a fixed polar angle.
///
/// Normalization: with y_{l,0} = p[l][0], y_{l,q} = sqrt(2) p[l][q] cos(q phi)
/// and y_{l,-q} = sqrt(2) p[l][q] sin(q phi), the family {y} is orthonormal
/// in L^2 of the unit sphere. In particular
/// sum_q y_{l,q}(theta, phi)^2 = (2l + 1) / (4 pi) at every point.
pub struct AssocLegendreTable {
    l_max: usize,
    vals: Vec<f64>,
}

impl AssocLegendreTable {
    pub fn value(&self, l: usize, q: usize) -> f64 {
        debug_assert!(l <= self.l_max && q <= l);
        self.vals[l * (l + 1) / 2 + q]
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }
}

/// Builds the table at cos(theta) = ct, sin(theta) = st, using the
/// numerically stable normalized recurrences: the diagonal descends with
/// p[l][l] = -sqrt(1 + 1/(2l)) st p[l-1][l-1], and fixed-q columns ascend
/// with p[l][q] = a_{lq} (ct p[l-1][q] + b_{lq} p[l-2][q]).
pub fn assoc_legendre_normalized(l_max: usize, ct: f64, st: f64) -> AssocLegendreTable {
    let size = (l_max + 1) * (l_max + 2) / 2;
    let mut vals = vec![0.0; size];
    let idx = |l: usize, q: usize| l * (l + 1) / 2 + q;
    vals[0] = (1.0 / (4.0 * std::f64::consts::PI)).sqrt();
    for l in 1..=l_max {
        let lf = l as f64;
        vals[idx(l, l)] = -(1.0 + 0.5 / lf).sqrt() * st * vals[idx(l - 1, l - 1)];
        for q in 0..l {
            let qf = q as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - qf * qf)).sqrt();
            let term = if l >= 2 && q <= l - 2 {
                let lm1 = lf - 1.0;
                let b = -(((lm1 * lm1 - qf * qf) / (4.0 * lm1 * lm1 - 1.0)).sqrt());
                ct * vals[idx(l - 1, q)] + b * vals[idx(l - 2, q)]
            } else {
                ct * vals[idx(l - 1, q)]
            };
            vals[idx(l, q)] = a * term;
        }
    }
    AssocLegendreTable { l_max, vals }
}
