//! Time-dependent Hamiltonians, frame transformations and average
//! Hamiltonians for dipolar-coupled spin-1/2 systems under MAS.
//!
//! Frames: `to_nutating` applies `exp(+i w1 t I_x) H exp(-i w1 t I_x)`; the
//! "toggled" nutating frame additionally applies the `pi/2` rotation about y,
//! `exp(-i pi/2 I_y) H exp(+i pi/2 I_y)`. The recoupled double-quantum
//! average lives in the toggled frame.

use num_complex::Complex;

use crate::error::{arg, Result};
use crate::scalar::{cplx, lit, Real};
use crate::spin::{rotate_operator, Axis, HermitianSpectrum, OperatorMatrix, SpinBasis};
use crate::waveform::{WaveformSample, Waveform};
use crate::sequence::SequenceSpec;

/// `mu0 / 4 pi`, T m / A (CODATA 2018).
pub const MU0_OVER_4PI: f64 = 1.000_000_000_55e-7;
/// Reduced Planck constant, J s (CODATA 2018).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Proton gyromagnetic ratio, rad/(s T).
pub const GAMMA_1H: f64 = 2.675_221_874_4e8;

/// `d = -(mu0/4 pi) gamma^2 hbar / r^3`, rad/s.
pub fn dipolar_constant<T: Real>(gamma_gyro: T, r: T) -> Result<T> {
    if !(r > T::zero()) {
        return Err(arg(format!("internuclear distance must be positive, got {r}")));
    }
    Ok(-lit::<T>(MU0_OVER_4PI) * gamma_gyro * gamma_gyro * lit::<T>(HBAR) / (r * r * r))
}

/// Axially symmetric dipolar coupling between two sites.
///
/// `beta_d`, `gamma_d` are the polar and azimuthal angles of the internuclear
/// vector in the rotor frame (`alpha_d = 0`). In static mode `beta_d` is the
/// angle to the static field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DipolarCoupling<T> {
    pub site_i: usize,
    pub site_j: usize,
    /// Dipolar coupling constant, rad/s.
    pub d: T,
    pub beta_d: T,
    pub gamma_d: T,
}

impl<T: Real> DipolarCoupling<T> {
    /// Validates the pair and reduces `gamma_d` into `[0, 2 pi)`.
    pub fn new(site_i: usize, site_j: usize, d: T, beta_d: T, gamma_d: T) -> Result<Self> {
        if site_i >= site_j {
            return Err(arg(format!("coupling sites must satisfy i < j, got ({site_i}, {site_j})")));
        }
        if !(beta_d >= T::zero() && beta_d <= T::pi()) {
            return Err(arg(format!("beta_d = {beta_d} outside [0, pi]")));
        }
        if !gamma_d.is_finite() || !d.is_finite() {
            return Err(arg("coupling parameters must be finite"));
        }
        let mut g = gamma_d % T::two_pi();
        if g < T::zero() {
            g += T::two_pi();
        }
        if g >= T::two_pi() {
            g = T::zero();
        }
        Ok(Self {
            site_i,
            site_j,
            d,
            beta_d,
            gamma_d: g,
        })
    }

    /// Unit internuclear vector in the rotor frame.
    pub fn direction(&self) -> [T; 3] {
        let (sb, cb) = (self.beta_d.sin(), self.beta_d.cos());
        [sb * self.gamma_d.cos(), sb * self.gamma_d.sin(), cb]
    }

    /// Same coupling with its vector rotated by `R_z(gamma) R_y(beta)`.
    pub fn rotated(&self, beta: T, gamma: T) -> Self {
        let [x, y, z] = self.direction();
        let (sb, cb) = (beta.sin(), beta.cos());
        let (x1, z1) = (x * cb + z * sb, -x * sb + z * cb);
        let (sg, cg) = (gamma.sin(), gamma.cos());
        let (x2, y2) = (x1 * cg - y * sg, x1 * sg + y * cg);
        let beta_d = z1.max(-T::one()).min(T::one()).acos();
        let gamma_d = if (x2 * x2 + y2 * y2).sqrt() < lit(1e-14) {
            T::zero()
        } else {
            y2.atan2(x2)
        };
        Self::new(self.site_i, self.site_j, self.d, beta_d, gamma_d)
            .expect("rotation preserves a valid coupling")
    }
}

/// `(G1, G2) = (-(sqrt 2/4) d sin 2 beta, (1/4) d sin^2 beta)`.
pub fn g_coefficients<T: Real>(c: &DipolarCoupling<T>) -> (T, T) {
    let g1 = -(lit::<T>(2.0).sqrt() / lit(4.0)) * c.d * (c.beta_d + c.beta_d).sin();
    let s = c.beta_d.sin();
    let g2 = c.d * s * s / lit(4.0);
    (g1, g2)
}

/// Secular static-sample coefficient `(d/2)(3 cos^2 beta - 1)`.
pub fn static_coefficient<T: Real>(c: &DipolarCoupling<T>) -> T {
    let cb = c.beta_d.cos();
    c.d / lit(2.0) * (lit::<T>(3.0) * cb * cb - T::one())
}

/// `D(t) = G1 cos(gamma + w_r t) + G2 cos(2 gamma + 2 w_r t)` under MAS, or
/// the static secular coefficient.
pub fn dipolar_coefficient<T: Real>(c: &DipolarCoupling<T>, omega_r: T, t: T, static_mode: bool) -> T {
    if static_mode {
        return static_coefficient(c);
    }
    let (g1, g2) = g_coefficients(c);
    let phase = c.gamma_d + omega_r * t;
    g1 * phase.cos() + g2 * (phase + phase).cos()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpinSystem<T> {
    pub n_spins: usize,
    pub couplings: Vec<DipolarCoupling<T>>,
}

impl<T: Real> SpinSystem<T> {
    pub fn new(n_spins: usize, couplings: Vec<DipolarCoupling<T>>) -> Result<Self> {
        if n_spins == 0 {
            return Err(arg("a spin system needs at least one spin"));
        }
        for (k, c) in couplings.iter().enumerate() {
            if c.site_j >= n_spins {
                return Err(arg(format!(
                    "coupling ({}, {}) references a site beyond n_spins = {n_spins}",
                    c.site_i, c.site_j
                )));
            }
            if couplings[..k]
                .iter()
                .any(|o| (o.site_i, o.site_j) == (c.site_i, c.site_j))
            {
                return Err(arg(format!("duplicate coupling ({}, {})", c.site_i, c.site_j)));
            }
        }
        Ok(Self { n_spins, couplings })
    }

    pub fn uncoupled(n_spins: usize) -> Self {
        Self {
            n_spins,
            couplings: Vec::new(),
        }
    }

    /// Two spins with one coupling of constant `d` and orientation `(beta, gamma)`.
    pub fn pair(d: T, beta_d: T, gamma_d: T) -> Result<Self> {
        Self::new(2, vec![DipolarCoupling::new(0, 1, d, beta_d, gamma_d)?])
    }

    pub fn dim(&self) -> usize {
        1 << self.n_spins
    }

    /// Crystallite rotated by `R_z(gamma) R_y(beta)`.
    pub fn oriented(&self, beta: T, gamma: T) -> Self {
        Self {
            n_spins: self.n_spins,
            couplings: self.couplings.iter().map(|c| c.rotated(beta, gamma)).collect(),
        }
    }

    pub fn max_coupling(&self) -> T {
        self.couplings.iter().fold(T::zero(), |m, c| m.max(c.d.abs()))
    }
}

/// Spin part of the secular dipolar Hamiltonian, `3 I_iz I_jz - I_i . I_j`.
pub fn dipolar_tensor_operator<T: Real>(basis: &SpinBasis<T>, i: usize, j: usize) -> OperatorMatrix<T> {
    let zz = basis.site(Axis::Z, i) * basis.site(Axis::Z, j);
    let mut out = zz.scale(lit(3.0));
    for ax in Axis::ALL {
        out.add_scaled(-T::one(), &(basis.site(ax, i) * basis.site(ax, j)));
    }
    out
}

/// `H_D^rot(t) = sum_pairs D_ij(t) [3 I_iz I_jz - I_i . I_j]`.
pub fn dipolar_hamiltonian_rot<T: Real>(
    sys: &SpinSystem<T>,
    omega_r: T,
    t: T,
    static_mode: bool,
) -> Result<OperatorMatrix<T>> {
    let basis = SpinBasis::new(sys.n_spins)?;
    let mut h = OperatorMatrix::zeros(sys.dim());
    for c in &sys.couplings {
        let coeff = dipolar_coefficient(c, omega_r, t, static_mode);
        h.add_scaled(coeff, &dipolar_tensor_operator(&basis, c.site_i, c.site_j));
    }
    Ok(h)
}

/// Three-component RF Hamiltonian
/// `w1 I_x + w2' [I_z cos(w1 t + zeta) - I_y sin(w1 t + zeta)]`.
pub fn rf_ideal_from_parts<T: Real>(basis: &SpinBasis<T>, t: T, omega1: T, w2: T, zeta: T) -> OperatorMatrix<T> {
    let phase = omega1 * t + zeta;
    let mut h = basis.total(Axis::X).scale(omega1);
    if w2 != T::zero() {
        h.add_scaled(w2 * phase.cos(), basis.total(Axis::Z));
        h.add_scaled(-w2 * phase.sin(), basis.total(Axis::Y));
    }
    h
}

/// Ideal-mode RF Hamiltonian of an ADNF-ARNF sequence at time `t`.
pub fn rf_hamiltonian_ideal<T: Real>(t: T, spec: &SequenceSpec<T>, n_spins: usize) -> Result<OperatorMatrix<T>> {
    let w = Waveform::from_spec(spec)?;
    let basis = SpinBasis::new(n_spins)?;
    Ok(rf_ideal_from_parts(&basis, t, spec.omega1, w.nutating_amplitude(t), w.zeta_at(t)))
}

/// `w_a [I_x cos Phi + I_y sin Phi]`.
pub fn rf_hardware_from_basis<T: Real>(basis: &SpinBasis<T>, sample: &WaveformSample<T>) -> OperatorMatrix<T> {
    let mut h = basis.total(Axis::X).scale(sample.amplitude * sample.phase.cos());
    h.add_scaled(sample.amplitude * sample.phase.sin(), basis.total(Axis::Y));
    h
}

pub fn rf_hamiltonian_hardware<T: Real>(sample: &WaveformSample<T>, n_spins: usize) -> Result<OperatorMatrix<T>> {
    Ok(rf_hardware_from_basis(&SpinBasis::new(n_spins)?, sample))
}

/// Interaction frame of the spin-lock field, `exp(-i w1 t I_x)`.
#[derive(Clone, Debug)]
pub struct NutatingFrame<T: Real> {
    omega1: T,
    spectrum: HermitianSpectrum<T>,
    toggle: OperatorMatrix<T>,
}

impl<T: Real> NutatingFrame<T> {
    pub fn new(basis: &SpinBasis<T>, omega1: T) -> Result<Self> {
        let spectrum = HermitianSpectrum::new(basis.total(Axis::X))?;
        let toggle = HermitianSpectrum::new(basis.total(Axis::Y))?.exp(T::frac_pi_2());
        Ok(Self {
            omega1,
            spectrum,
            toggle,
        })
    }

    /// `U1(t) = exp(-i w1 t I_x)`.
    pub fn propagator(&self, t: T) -> OperatorMatrix<T> {
        self.spectrum.exp(self.omega1 * t)
    }

    /// `U1^dagger H U1`.
    pub fn transform(&self, h: &OperatorMatrix<T>, t: T) -> OperatorMatrix<T> {
        h.conjugate_by(&self.propagator(t).adjoint())
    }

    /// Nutating-frame transform followed by the `pi/2` y toggle.
    pub fn transform_toggled(&self, h: &OperatorMatrix<T>, t: T) -> OperatorMatrix<T> {
        let u = &self.toggle * &self.propagator(t).adjoint();
        h.conjugate_by(&u)
    }

    /// Undoes the `pi/2` y toggle.
    pub fn untoggle(&self, h: &OperatorMatrix<T>) -> OperatorMatrix<T> {
        h.conjugate_by(&self.toggle.adjoint())
    }
}

/// `exp(+i w1 t I_x) H exp(-i w1 t I_x)`.
pub fn to_nutating<T: Real>(h: &OperatorMatrix<T>, t: T, omega1: T, n_spins: usize) -> Result<OperatorMatrix<T>> {
    if h.dim() != 1 << n_spins {
        return Err(arg("operator dimension does not match n_spins"));
    }
    let basis = SpinBasis::new(n_spins)?;
    Ok(NutatingFrame::new(&basis, omega1)?.transform(h, t))
}

/// Recoupling condition: `k = 1` HORROR (`2 w1 = w_r`), `k = 2` R3 (`w1 = w_r`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecouplingCondition<T> {
    pub k: u8,
    /// `G_k` of the coupling, rad/s.
    pub g_coefficient: T,
}

impl<T: Real> RecouplingCondition<T> {
    pub fn new(c: &DipolarCoupling<T>, k: u8) -> Result<Self> {
        let (g1, g2) = g_coefficients(c);
        let g_coefficient = match k {
            1 => g1,
            2 => g2,
            _ => return Err(arg(format!("recoupling order k must be 1 or 2, got {k}"))),
        };
        Ok(Self { k, g_coefficient })
    }

    /// Which condition, if any, `(w1, w_r)` satisfies to relative `1e-9`.
    pub fn detect(omega1: T, omega_r: T) -> Option<u8> {
        let tol = lit::<T>(1e-9) * omega_r;
        if omega_r <= T::zero() {
            None
        } else if (omega1 - omega_r).abs() <= tol {
            Some(2)
        } else if (omega1 + omega1 - omega_r).abs() <= tol {
            Some(1)
        } else {
            None
        }
    }
}

/// Recoupled average `(3/4) G_k [cos k g (XX - YY) - sin k g (YX + XY)]` on
/// the coupling's sites of an `n_spins` system (toggled nutating frame).
pub fn closed_average_embedded<T: Real>(
    c: &DipolarCoupling<T>,
    k: u8,
    basis: &SpinBasis<T>,
) -> Result<OperatorMatrix<T>> {
    let cond = RecouplingCondition::new(c, k)?;
    let (i, j) = (c.site_i, c.site_j);
    if j >= basis.n_spins() {
        return Err(arg("coupling site outside the spin basis"));
    }
    let angle = T::lit(k as f64) * c.gamma_d;
    let xx = basis.site(Axis::X, i) * basis.site(Axis::X, j);
    let yy = basis.site(Axis::Y, i) * basis.site(Axis::Y, j);
    let yx = basis.site(Axis::Y, i) * basis.site(Axis::X, j);
    let xy = basis.site(Axis::X, i) * basis.site(Axis::Y, j);
    let pref = lit::<T>(0.75) * cond.g_coefficient;
    let mut h = OperatorMatrix::zeros(basis.dim());
    h.add_scaled(pref * angle.cos(), &(&xx - &yy));
    h.add_scaled(-pref * angle.sin(), &(&yx + &xy));
    Ok(h)
}

/// Closed-form recoupled average for a two-spin system.
///
/// In the product basis only the `(0,3)` and `(3,0)` entries are nonzero:
/// `(3/8) G_k exp(+/- i k gamma_d)`.
pub fn average_dipolar_closed<T: Real>(c: &DipolarCoupling<T>, k: u8) -> Result<OperatorMatrix<T>> {
    let pair = DipolarCoupling { site_i: 0, site_j: 1, ..*c };
    closed_average_embedded(&pair, k, &SpinBasis::new(2)?)
}

/// Double-quantum matrix built entry-by-entry, without spin operators.
pub fn average_dipolar_matrix_form<T: Real>(c: &DipolarCoupling<T>, k: u8) -> Result<OperatorMatrix<T>> {
    let cond = RecouplingCondition::new(c, k)?;
    let a = lit::<T>(0.375) * cond.g_coefficient;
    let phase = T::lit(k as f64) * c.gamma_d;
    let corner = cplx(a * phase.cos(), a * phase.sin());
    Ok(OperatorMatrix::from_fn(4, |r, col| match (r, col) {
        (0, 3) => corner,
        (3, 0) => corner.conj(),
        _ => Complex::new(T::zero(), T::zero()),
    }))
}

/// Smallest `(p, q)` with `w1 / w_r = p / q` (relative tolerance `1e-9`, `q <= 10000`).
pub fn commensurate_ratio<T: Real>(omega1: T, omega_r: T) -> Result<(u64, u64)> {
    if !(omega1 > T::zero() && omega_r > T::zero()) {
        return Err(arg("commensurability needs positive omega1 and omega_r"));
    }
    let x = (omega1 / omega_r).as_f64();
    // continued-fraction convergents
    let (mut h0, mut h1) = (0u64, 1u64);
    let (mut k0, mut k1) = (1u64, 0u64);
    let mut rem = x;
    for _ in 0..64 {
        let a = rem.floor();
        let ai = a as u64;
        let (h2, k2) = (ai * h1 + h0, ai * k1 + k0);
        if k2 > 10_000 {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if ((h1 as f64 / k1 as f64) - x).abs() <= 1e-9 * x {
            return Ok((h1, k1));
        }
        let frac = rem - a;
        if frac < 1e-15 {
            break;
        }
        rem = 1.0 / frac;
    }
    Err(arg(format!(
        "omega1/omega_r = {x} has no common period with denominator <= 10000"
    )))
}

/// Trapezoid steps per shortest period in numeric averages.
pub const STEPS_PER_PERIOD: usize = 2048;

/// Time average of the toggled nutating-frame dipolar interaction of a whole
/// system over `n_periods` common periods of `2 pi/w_r` and `2 pi/w1`.
pub fn toggled_average_numeric<T: Real>(
    sys: &SpinSystem<T>,
    omega1: T,
    omega_r: T,
    n_periods: usize,
) -> Result<OperatorMatrix<T>> {
    if n_periods == 0 {
        return Err(arg("n_periods must be at least 1"));
    }
    let (p, q) = commensurate_ratio(omega1, omega_r)?;
    let window = T::lit((q * n_periods as u64) as f64) * T::two_pi() / omega_r;
    // shortest of the two periods spans max(p, q) of them per common period
    let n = STEPS_PER_PERIOD * p.max(q) as usize * n_periods;
    let basis = SpinBasis::new(sys.n_spins)?;
    let frame = NutatingFrame::new(&basis, omega1)?;
    let tensors: Vec<_> = sys
        .couplings
        .iter()
        .map(|c| dipolar_tensor_operator(&basis, c.site_i, c.site_j))
        .collect();
    let mut acc = OperatorMatrix::zeros(sys.dim());
    let step = window / T::lit(n as f64);
    for m in 0..n {
        let t = step * T::lit(m as f64);
        let mut h = OperatorMatrix::zeros(sys.dim());
        for (c, a) in sys.couplings.iter().zip(&tensors) {
            h.add_scaled(dipolar_coefficient(c, omega_r, t, false), a);
        }
        acc += &frame.transform_toggled(&h, t);
    }
    Ok(acc.scale(T::one() / T::lit(n as f64)))
}

/// Numeric recoupled average of one coupling in a two-spin space.
pub fn average_dipolar_numeric<T: Real>(
    c: &DipolarCoupling<T>,
    omega1: T,
    omega_r: T,
    n_periods: usize,
) -> Result<OperatorMatrix<T>> {
    let pair = DipolarCoupling { site_i: 0, site_j: 1, ..*c };
    toggled_average_numeric(&SpinSystem::new(2, vec![pair])?, omega1, omega_r, n_periods)
}

/// Static-sample nutating-frame average (no toggle) and the closed form
/// `-(1/2) exp(-i pi/2 I_y) H_D exp(+i pi/2 I_y)`.
pub fn static_average_check<T: Real>(
    c: &DipolarCoupling<T>,
    omega1: T,
) -> Result<(OperatorMatrix<T>, OperatorMatrix<T>)> {
    if !(omega1 > T::zero()) {
        return Err(arg("omega1 must be positive"));
    }
    let pair = DipolarCoupling { site_i: 0, site_j: 1, ..*c };
    let sys = SpinSystem::new(2, vec![pair])?;
    let h = dipolar_hamiltonian_rot(&sys, T::zero(), T::zero(), true)?;
    let basis = SpinBasis::new(2)?;
    let frame = NutatingFrame::new(&basis, omega1)?;
    let n = STEPS_PER_PERIOD;
    let step = T::two_pi() / omega1 / T::lit(n as f64);
    let mut lhs = OperatorMatrix::zeros(4);
    for m in 0..n {
        lhs += &frame.transform(&h, step * T::lit(m as f64));
    }
    let lhs = lhs.scale(T::one() / T::lit(n as f64));
    let rhs = rotate_operator(&h, Axis::Y, T::frac_pi_2(), 2)?.scale(lit(-0.5));
    Ok((lhs, rhs))
}

/// Untoggled nutating-frame average Hamiltonian used as the dipolar-order
/// reference: static secular average, or the recoupled closed form when
/// `(w1, w_r)` meets a recoupling condition. `None` when no first-order
/// average survives.
pub fn nutating_average_reference<T: Real>(
    sys: &SpinSystem<T>,
    omega1: T,
    omega_r: T,
    static_mode: bool,
) -> Result<Option<OperatorMatrix<T>>> {
    let basis = SpinBasis::new(sys.n_spins)?;
    let avg = if static_mode {
        let h = dipolar_hamiltonian_rot(sys, T::zero(), T::zero(), true)?;
        rotate_operator(&h, Axis::Y, T::frac_pi_2(), sys.n_spins)?.scale(lit(-0.5))
    } else {
        let Some(k) = RecouplingCondition::detect(omega1, omega_r) else {
            return Ok(None);
        };
        let mut toggled = OperatorMatrix::zeros(sys.dim());
        for c in &sys.couplings {
            toggled += &closed_average_embedded(c, k, &basis)?;
        }
        NutatingFrame::new(&basis, omega1)?.untoggle(&toggled)
    };
    if avg.frobenius_norm() <= lit::<T>(1e-12) * sys.max_coupling().max(T::one()) {
        return Ok(None);
    }
    Ok(Some(avg))
}
