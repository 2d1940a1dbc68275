//! Reference computations that share no code path with `spinsim-core`:
//! Taylor-series matrix exponentials, explicit Kronecker-product spin
//! operators and adaptive Simpson quadrature.

use nalgebra::DMatrix;
use num_complex::Complex;

pub type C = Complex<f64>;
pub type M = DMatrix<C>;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Piecewise nutating-frame field of the demagnetization/remagnetization
/// sequence: cosine ramp down on `[0, tau]`, zero during retention, cosine
/// ramp up on `[tau + T, 2 tau + T]`.
#[derive(Clone, Copy, Debug)]
pub struct RampProfile {
    pub omega1: f64,
    pub omega2: f64,
    pub tau: f64,
    pub t_retention: f64,
    pub zeta_down: f64,
    pub zeta_up: f64,
}

impl RampProfile {
    pub fn field(&self, t: f64) -> f64 {
        let up_start = self.tau + self.t_retention;
        if t <= self.tau {
            0.5 * self.omega2 * (1.0 + (std::f64::consts::PI * t / self.tau).cos())
        } else if t < up_start {
            0.0
        } else {
            0.5 * self.omega2 * (1.0 - (std::f64::consts::PI * (t - up_start) / self.tau).cos())
        }
    }

    pub fn zeta(&self, t: f64) -> f64 {
        if t <= self.tau {
            self.zeta_down
        } else {
            self.zeta_up
        }
    }

    /// `-int_0^t field(s) cos(omega1 s + zeta(s)) ds`, integrated per segment
    /// on panels no longer than a quarter nutation period, so the adaptive
    /// rule cannot be fooled by samples that all fall on zeros.
    pub fn phase_integral(&self, t: f64, tol: f64) -> f64 {
        let integrand = |s: f64| self.field(s) * (self.omega1 * s + self.zeta(s)).cos();
        let panels = |a: f64, b: f64| {
            if b <= a {
                return 0.0;
            }
            let n = ((b - a) * self.omega1 / std::f64::consts::FRAC_PI_2).ceil().max(1.0) as usize;
            let h = (b - a) / n as f64;
            (0..n)
                .map(|k| {
                    let lo = a + k as f64 * h;
                    let hi = if k + 1 == n { b } else { lo + h };
                    adaptive_simpson(&integrand, lo, hi, tol / n as f64)
                })
                .sum::<f64>()
        };
        let up_start = self.tau + self.t_retention;
        let mut acc = panels(0.0, t.min(self.tau));
        if t > up_start {
            acc += panels(up_start, t);
        }
        -acc
    }
}

/// Spin-1/2 operator `sigma_axis / 2`.
pub fn half_pauli(axis: char) -> M {
    let h = C::new(0.5, 0.0);
    let ih = C::new(0.0, 0.5);
    match axis {
        'x' => M::from_row_slice(2, 2, &[ZERO, h, h, ZERO]),
        'y' => M::from_row_slice(2, 2, &[ZERO, -ih, ih, ZERO]),
        'z' => M::from_row_slice(2, 2, &[h, ZERO, ZERO, -h]),
        _ => panic!("axis must be x, y or z"),
    }
}

/// `I_axis` on `site` of `n` spins; site 0 is the leftmost factor.
pub fn site_op(axis: char, site: usize, n: usize) -> M {
    let mut out = M::from_element(1, 1, ONE);
    for k in 0..n {
        let f = if k == site { half_pauli(axis) } else { M::identity(2, 2) };
        out = out.kronecker(&f);
    }
    out
}

pub fn total_op(axis: char, n: usize) -> M {
    let d = 1 << n;
    (0..n).fold(M::zeros(d, d), |acc, k| acc + site_op(axis, k, n))
}

/// `3 I_iz I_jz - I_i . I_j`.
pub fn dipolar_tensor(i: usize, j: usize, n: usize) -> M {
    let zz = site_op('z', i, n) * site_op('z', j, n);
    let dot = ['x', 'y', 'z']
        .iter()
        .fold(M::zeros(1 << n, 1 << n), |acc, &a| acc + site_op(a, i, n) * site_op(a, j, n));
    zz * C::new(3.0, 0.0) - dot
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn expm(a: &M) -> M {
    let norm = a.iter().map(|z| z.norm()).sum::<f64>();
    let mut s = 0;
    while norm / f64::from(1u32 << s.min(31)) > 0.25 && s < 60 {
        s += 1;
    }
    let scaled = a * C::new(0.5f64.powi(s), 0.0);
    let n = a.nrows();
    let mut term = M::identity(n, n);
    let mut sum = M::identity(n, n);
    for k in 1..=24 {
        term = &term * &scaled * C::new(1.0 / k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// `exp(-i t H)`.
pub fn propagator(h: &M, t: f64) -> M {
    expm(&(h * C::new(0.0, -t)))
}

pub fn frobenius(a: &M) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `Tr{A^dagger B}`.
pub fn inner(a: &M, b: &M) -> C {
    a.adjoint().component_mul(&b.transpose()).sum()
}

/// `Tr{rho(t) I_+}` for a static pair under `D (3 I_1z I_2z - I_1 . I_2)`
/// starting from `rho = I_x`.
///
/// `I_x` lives in the triplet, where `E(T+-) = D/2` and `E(T0) = -D`; both
/// allowed transitions sit at `3D/2`, giving `2 cos(3 D t / 2)`.
pub fn static_pair_fid(d_static: f64, t: f64) -> C {
    C::new(2.0 * (1.5 * d_static * t).cos(), 0.0)
}
