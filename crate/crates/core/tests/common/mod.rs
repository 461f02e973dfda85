#![allow(dead_code)]

//! Independent reference solutions used by the integration and acceptance tests.

/// `Φ(z) = 4 artanh(tanh(ψ/4) e^{-√2 z})`, the layer profile at `γ = T^i = 1`.
pub fn closed_form_profile(psi: f64, z: f64) -> f64 {
    4.0 * ((psi / 4.0).tanh() * (-(2f64.sqrt()) * z).exp()).atanh()
}

/// Right-hand side of the sheath ODE as a first-order system.
fn sheath_rhs(gamma: f64, temp: f64, y: [f64; 2]) -> [f64; 2] {
    [y[1], -gamma * ((-y[0]).exp() - (y[0] / temp).exp())]
}

fn rk4(gamma: f64, temp: f64, y: [f64; 2], h: f64) -> [f64; 2] {
    let add = |a: [f64; 2], b: [f64; 2], s: f64| [a[0] + s * b[0], a[1] + s * b[1]];
    let k1 = sheath_rhs(gamma, temp, y);
    let k2 = sheath_rhs(gamma, temp, add(y, k1, 0.5 * h));
    let k3 = sheath_rhs(gamma, temp, add(y, k2, 0.5 * h));
    let k4 = sheath_rhs(gamma, temp, add(y, k3, h));
    [
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Outcome of one shot from `(ψ, p0)`: +1 if the orbit crosses zero,
/// −1 if it turns back, 0 if neither happens before `z_end`.
fn classify(gamma: f64, temp: f64, psi: f64, p0: f64, h: f64, z_end: f64) -> i32 {
    let mut y = [psi, p0];
    let steps = (z_end / h) as usize;
    for _ in 0..steps {
        y = rk4(gamma, temp, y, h);
        if y[0] * psi < 0.0 {
            return 1;
        }
        if y[1] * psi > 0.0 {
            return -1;
        }
    }
    0
}

/// Shooting with bisection on the initial slope, RK4 with step `h`.
/// Returns `(z, Φ)` on `[0, z_end]`, truncated where the converged orbit
/// falls below `cutoff · |ψ|` (beyond that the shot is ill-conditioned).
pub fn shooting_profile(gamma: f64, temp: f64, psi: f64, h: f64, z_end: f64, cutoff: f64) -> Vec<(f64, f64)> {
    // overshoot for steep slopes, turn-back for slopes of the wrong sign
    let (mut lo, mut hi) = if psi > 0.0 { (-50.0 * psi.abs().max(1.0), 0.0) } else { (0.0, 50.0 * psi.abs().max(1.0)) };
    let overshoot_at_lo = psi > 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let c = classify(gamma, temp, psi, mid, h, 4.0 * z_end);
        let overshoot = c == 1;
        if overshoot == overshoot_at_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p0 = 0.5 * (lo + hi);
    let mut y = [psi, p0];
    let mut out = vec![(0.0, psi)];
    let steps = (z_end / h).round() as usize;
    for k in 1..=steps {
        y = rk4(gamma, temp, y, h);
        if y[0].abs() < cutoff * psi.abs() {
            break;
        }
        out.push((k as f64 * h, y[0]));
    }
    out
}

/// Exact solution of the isothermal Riemann problem with sound speed `c`,
/// sampled at `ξ = x/t`.
pub struct IsothermalRiemann {
    pub left: (f64, f64),
    pub right: (f64, f64),
    pub c: f64,
    pub n_star: f64,
    pub u_star: f64,
}

impl IsothermalRiemann {
    pub fn new(left: (f64, f64), right: (f64, f64), c: f64) -> Self {
        let wave = |n: f64, nk: f64| {
            if n > nk {
                c * (n - nk) / (n * nk).sqrt()
            } else {
                c * (n / nk).ln()
            }
        };
        // u* from the left minus u* from the right, increasing in n*
        let mismatch = |n: f64| (right.1 + wave(n, right.0)) - (left.1 - wave(n, left.0));
        let (mut a, mut b) = (1e-12f64.ln(), 1e6f64.ln());
        for _ in 0..300 {
            let m = 0.5 * (a + b);
            if mismatch(m.exp()) > 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        let n_star = (0.5 * (a + b)).exp();
        let u_star = left.1 - wave(n_star, left.0);
        Self { left, right, c, n_star, u_star }
    }

    pub fn sample(&self, xi: f64) -> (f64, f64) {
        let c = self.c;
        let (nl, ul) = self.left;
        let (nr, ur) = self.right;
        if xi <= self.u_star {
            if self.n_star > nl {
                let s = ul - c * (self.n_star / nl).sqrt();
                if xi < s { (nl, ul) } else { (self.n_star, self.u_star) }
            } else if xi < ul - c {
                (nl, ul)
            } else if xi > self.u_star - c {
                (self.n_star, self.u_star)
            } else {
                let u = xi + c;
                (nl * ((ul - u) / c).exp(), u)
            }
        } else if self.n_star > nr {
            let s = ur + c * (self.n_star / nr).sqrt();
            if xi > s { (nr, ur) } else { (self.n_star, self.u_star) }
        } else if xi > ur + c {
            (nr, ur)
        } else if xi < self.u_star + c {
            (self.n_star, self.u_star)
        } else {
            let u = xi - c;
            (nr * ((u - ur) / c).exp(), u)
        }
    }
}

/// `max |a − b|`.
pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
