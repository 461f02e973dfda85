//! Small numerical kernels shared by the solvers.

/// Solve a tridiagonal system with the Thomas algorithm.
///
/// Row `i` reads `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`;
/// `lower[0]` and `upper[n-1]` are ignored. Returns `None` on a zero pivot.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    debug_assert!(lower.len() == n && upper.len() == n && rhs.len() == n);
    if n == 0 {
        return Some(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot == 0.0 || !pivot.is_finite() {
        return None;
    }
    c[0] = upper[0] / pivot;
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i] * c[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return None;
        }
        c[i] = upper[i] / pivot;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / pivot;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Some(x)
}

/// `e^x - 1 - x` without cancellation near zero.
pub fn exp_rem2(x: f64) -> f64 {
    if x.abs() < 0.05 {
        // Horner form of x^2/2! + x^3/3! + ... + x^9/9!
        let mut term = 1.0 / 362_880.0;
        for k in (2..9).rev() {
            term = term * x + 1.0 / factorial(k);
        }
        term * x * x
    } else {
        x.exp_m1() - x
    }
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// `r - 1 - ln r`, the Bregman divergence of `-ln`, accurate near `r = 1`.
pub fn bregman_log(r: f64) -> f64 {
    let d = r - 1.0;
    let v = if d.abs() < 1e-3 {
        d * d * (0.5 - d * (1.0 / 3.0 - d * (0.25 - d * 0.2)))
    } else {
        d - d.ln_1p()
    };
    v.max(0.0)
}

/// `s ln s - s + 1`, the Bregman divergence of `x ln x`, accurate near `s = 1`.
pub fn bregman_xlogx(s: f64) -> f64 {
    let d = s - 1.0;
    let v = if d.abs() < 1e-3 {
        d * d * (0.5 - d * (1.0 / 6.0 - d * (1.0 / 12.0 - d * 0.05)))
    } else {
        s * s.ln() - d
    };
    v.max(0.0)
}

pub fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Cubic Hermite interpolation on `[x0, x1]` from values and slopes.
pub fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> (f64, f64) {
    let h = x1 - x0;
    let s = (x - x0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let value = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
    let dh00 = (6.0 * s2 - 6.0 * s) / h;
    let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
    let dh01 = (-6.0 * s2 + 6.0 * s) / h;
    let dh11 = 3.0 * s2 - 2.0 * s;
    let slope = dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1;
    (value, slope)
}

/// Lagrange basis weights of the nodes `xs` evaluated at `x`.
pub fn lagrange_weights<const N: usize>(xs: [f64; N], x: f64) -> [f64; N] {
    let mut w = [1.0; N];
    for (i, wi) in w.iter_mut().enumerate() {
        for (j, &xj) in xs.iter().enumerate() {
            if i != j {
                *wi *= (x - xj) / (xs[i] - xj);
            }
        }
    }
    w
}

/// Index `k` of the interval `[xs[k], xs[k+1]]` containing `x`, clamped to the table.
pub fn locate(xs: &[f64], x: f64) -> usize {
    let n = xs.len();
    debug_assert!(n >= 2);
    if x <= xs[0] {
        return 0;
    }
    if x >= xs[n - 1] {
        return n - 2;
    }
    match xs.binary_search_by(|v| v.partial_cmp(&x).expect("finite abscissae")) {
        Ok(k) => k.min(n - 2),
        Err(k) => k - 1,
    }
}

/// First derivative at each interior node of a nonuniform 3-point stencil.
///
/// `nodes` and `values` include the two boundary points; the result has
/// `nodes.len() - 2` entries.
pub fn central_derivative(nodes: &[f64], values: &[f64]) -> Vec<f64> {
    (1..nodes.len() - 1)
        .map(|i| {
            let hm = nodes[i] - nodes[i - 1];
            let hp = nodes[i + 1] - nodes[i];
            (hm * hm * (values[i + 1] - values[i]) + hp * hp * (values[i] - values[i - 1]))
                / (hm * hp * (hm + hp))
        })
        .collect()
}

/// Second derivative at each interior node of a nonuniform 3-point stencil.
pub fn second_derivative(nodes: &[f64], values: &[f64]) -> Vec<f64> {
    (1..nodes.len() - 1)
        .map(|i| {
            let hm = nodes[i] - nodes[i - 1];
            let hp = nodes[i + 1] - nodes[i];
            2.0 / (hm + hp) * ((values[i + 1] - values[i]) / hp - (values[i] - values[i - 1]) / hm)
        })
        .collect()
}

/// Dormand-Prince 5(4) coefficients.
mod dp {
    pub const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    pub const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    pub const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
}

/// Adaptive Dormand-Prince integrator for an autonomous scalar ODE `y' = f(y)`.
///
/// Local error is controlled relative to `|y|`, so exponentially decaying
/// solutions keep their relative accuracy all the way down the tail.
pub struct ScalarDopri<F: Fn(f64) -> f64> {
    f: F,
    rtol: f64,
    h: f64,
}

impl<F: Fn(f64) -> f64> ScalarDopri<F> {
    pub fn new(f: F, rtol: f64, h0: f64) -> Self {
        Self { f, rtol, h: h0 }
    }

    /// Advance `y` from `z0` to `z1`, reusing the step size across calls.
    pub fn advance(&mut self, mut y: f64, z0: f64, z1: f64) -> f64 {
        let mut z = z0;
        if z1 <= z0 {
            return y;
        }
        let h_min = 1e-14 * (z1 - z0).max(1.0);
        let mut k1 = (self.f)(y);
        while z < z1 {
            let remaining = z1 - z;
            let clipped = self.h >= remaining;
            let h = if clipped { remaining } else { self.h };
            let mut k = [0.0; 7];
            k[0] = k1;
            for s in 1..7 {
                let mut ys = y;
                for j in 0..s {
                    ys += h * dp::A[s][j] * k[j];
                }
                k[s] = (self.f)(ys);
            }
            let mut y_new = y;
            let mut err = 0.0;
            for s in 0..7 {
                y_new += h * dp::B[s] * k[s];
                err += h * dp::E[s] * k[s];
            }
            let scale = self.rtol * y.abs().max(y_new.abs()).max(f64::MIN_POSITIVE);
            let ratio = err.abs() / scale;
            if ratio <= 1.0 || h <= h_min {
                z = if clipped { z1 } else { z + h };
                y = y_new;
                k1 = k[6];
                if !clipped {
                    let grow = if ratio == 0.0 { 5.0 } else { 0.9 * ratio.powf(-0.2) };
                    self.h = h * grow.clamp(0.2, 5.0);
                }
            } else {
                self.h = h * (0.9 * ratio.powf(-0.2)).clamp(0.1, 0.9);
            }
        }
        y
    }
}
