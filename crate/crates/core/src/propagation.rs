//! Piecewise-constant propagation of density matrices and observables.
//!
//! States are high-temperature deviations: `rho0 = I_z`, identity part and
//! Boltzmann prefactor dropped. Reported magnetizations are normalized by
//! `Tr{I_z^2}` so that equilibrium reads 1.

use std::io::Write;
use std::path::Path;

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{arg, Result};
use crate::hamiltonian::{dipolar_hamiltonian_rot, SpinSystem};
use crate::scalar::{cplx, lit, Real};
use crate::spin::{Axis, HermitianSpectrum, OperatorMatrix, SpinBasis};

pub const TRAJECTORY_CSV_HEADER: &str = "t_s,mx,my,mz,dipolar_order";
pub const FID_CSV_HEADER: &str = "t_s,re,im";
pub const SPECTRUM_CSV_HEADER: &str = "freq_hz,re,im";

/// Hermitian, traceless deviation density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityDeviation<T: Real> {
    matrix: OperatorMatrix<T>,
}

impl<T: Real> DensityDeviation<T> {
    pub fn new(matrix: OperatorMatrix<T>) -> Result<Self> {
        let scale = matrix.frobenius_norm().max(T::one());
        if matrix.hermiticity_error() > lit::<T>(1e-12) * scale {
            return Err(arg("density deviation must be Hermitian"));
        }
        if matrix.trace().norm_sqr().sqrt() > lit::<T>(1e-12) * scale {
            return Err(arg("density deviation must be traceless"));
        }
        Ok(Self { matrix })
    }

    /// Equilibrium deviation `sum_k I_kz`.
    pub fn thermal(n_spins: usize) -> Result<Self> {
        Self::along(Axis::Z, n_spins)
    }

    /// Collective magnetization along `axis`.
    pub fn along(axis: Axis, n_spins: usize) -> Result<Self> {
        Ok(Self {
            matrix: SpinBasis::new(n_spins)?.total(axis).clone(),
        })
    }

    pub fn matrix(&self) -> &OperatorMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> OperatorMatrix<T> {
        self.matrix
    }

    pub fn n_spins(&self) -> usize {
        self.matrix.n_spins()
    }

    /// `Tr{rho^2}`.
    pub fn purity(&self) -> T {
        self.matrix.inner(&self.matrix).re
    }

    pub(crate) fn from_unchecked(matrix: OperatorMatrix<T>) -> Self {
        Self { matrix }
    }
}

/// Ordered product of midpoint-rule step propagators from `t0` to `t1`.
///
/// A trailing remainder shorter than `dt` is taken as one step of its true
/// width.
pub fn propagate_interval<T: Real, F>(mut h_of_t: F, t0: T, t1: T, dt: T) -> Result<OperatorMatrix<T>>
where
    F: FnMut(T) -> OperatorMatrix<T>,
{
    if !(t1 > t0) || !(dt > T::zero()) {
        return Err(arg(format!("propagation needs t1 > t0 and dt > 0 (t0 = {t0}, t1 = {t1}, dt = {dt})")));
    }
    let mut u: Option<OperatorMatrix<T>> = None;
    for (t_mid, width) in step_grid(t0, t1, dt) {
        let step = HermitianSpectrum::new(&h_of_t(t_mid))?.exp(width);
        u = Some(match u {
            None => step,
            Some(prev) => &step * &prev,
        });
    }
    Ok(u.expect("at least one step"))
}

/// `(midpoint, width)` of each step covering `[t0, t1]`.
pub fn step_grid<T: Real>(t0: T, t1: T, dt: T) -> impl Iterator<Item = (T, T)> {
    let span = t1 - t0;
    let ratio = span / dt;
    let mut n_full = (ratio + lit(1e-9)).floor().to_usize().unwrap_or(0);
    if T::lit(n_full as f64) * dt > span {
        n_full = n_full.saturating_sub(1);
    }
    let rest = span - T::lit(n_full as f64) * dt;
    let extra = rest > lit::<T>(1e-9) * dt;
    let half = lit::<T>(0.5);
    (0..n_full)
        .map(move |k| (t0 + (T::lit(k as f64) + half) * dt, dt))
        .chain(extra.then(|| (t1 - half * rest, rest)))
}

/// `U rho U^dagger`.
pub fn evolve<T: Real>(rho: &DensityDeviation<T>, u: &OperatorMatrix<T>) -> Result<DensityDeviation<T>> {
    if u.dim() != rho.matrix.dim() {
        return Err(arg(format!(
            "propagator dimension {} does not match state dimension {}",
            u.dim(),
            rho.matrix.dim()
        )));
    }
    Ok(DensityDeviation {
        matrix: rho.matrix.conjugate_by(u),
    })
}

/// `Tr{rho A}`.
pub fn expectation<T: Real>(rho: &DensityDeviation<T>, a: &OperatorMatrix<T>) -> Result<Complex<T>> {
    if a.dim() != rho.matrix.dim() {
        return Err(arg("observable dimension does not match state dimension"));
    }
    Ok(rho.matrix.trace_product(a))
}

/// Normalized overlap `Tr{rho H} / sqrt(Tr{rho^2} Tr{H^2})`, in `[-1, 1]`.
pub fn dipolar_order_metric<T: Real>(rho: &DensityDeviation<T>, h_bar: &OperatorMatrix<T>) -> Result<T> {
    if h_bar.dim() != rho.matrix.dim() {
        return Err(arg("reference dimension does not match state dimension"));
    }
    let hh = h_bar.inner(h_bar).re;
    if !(hh > T::zero()) {
        return Err(arg("dipolar-order reference operator is zero"));
    }
    let rr = rho.purity();
    if !(rr > T::zero()) {
        return Ok(T::zero());
    }
    let v = rho.matrix.inner(h_bar).re / (rr * hh).sqrt();
    Ok(v.max(-T::one()).min(T::one()))
}

/// Bloch components `Tr{rho I_a} / Tr{I_z^2}`.
pub fn magnetization<T: Real>(rho: &OperatorMatrix<T>, basis: &SpinBasis<T>) -> [T; 3] {
    let norm = basis.total(Axis::Z).inner(basis.total(Axis::Z)).re;
    Axis::ALL.map(|ax| rho.trace_product(basis.total(ax)).re / norm)
}

/// Time series sampled every `record_stride` steps.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryRecord<T> {
    pub times: Vec<T>,
    pub mx: Vec<T>,
    pub my: Vec<T>,
    pub mz: Vec<T>,
    /// NaN where no first-order dipolar reference exists.
    pub dipolar_order: Vec<T>,
}

impl<T: Real> TrajectoryRecord<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: T, m: [T; 3], dipolar_order: T) {
        self.times.push(t);
        self.mx.push(m[0]);
        self.my.push(m[1]);
        self.mz.push(m[2]);
        self.dipolar_order.push(dipolar_order);
    }

    /// `self += w * other` on a shared time grid.
    pub fn accumulate(&mut self, w: T, other: &Self) -> Result<()> {
        if self.is_empty() {
            self.times = other.times.clone();
            self.mx = vec![T::zero(); other.len()];
            self.my = vec![T::zero(); other.len()];
            self.mz = vec![T::zero(); other.len()];
            self.dipolar_order = vec![T::zero(); other.len()];
        }
        if self.times != other.times {
            return Err(arg("trajectories recorded on different time grids"));
        }
        for k in 0..self.len() {
            self.mx[k] += w * other.mx[k];
            self.my[k] += w * other.my[k];
            self.mz[k] += w * other.mz[k];
            self.dipolar_order[k] += w * other.dipolar_order[k];
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "{TRAJECTORY_CSV_HEADER}")?;
        for k in 0..self.len() {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.times[k].as_f64(),
                self.mx[k].as_f64(),
                self.my[k].as_f64(),
                self.mz[k].as_f64(),
                self.dipolar_order[k].as_f64()
            )?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut f)?;
        f.flush()?;
        Ok(())
    }
}

/// Free evolution with RF off under `H_D^rot(t)`, sampling `Tr{rho I_+}`.
///
/// `t_start` keeps the rotor phase continuous with the preceding sequence.
/// The series has `round(duration / dwell)` points; point 0 is the input.
pub fn detect_fid<T: Real>(
    rho: &DensityDeviation<T>,
    sys: &SpinSystem<T>,
    omega_r: T,
    static_mode: bool,
    t_start: T,
    duration: T,
    dwell: T,
    dt: T,
) -> Result<Vec<Complex<T>>> {
    if !(dwell > T::zero()) || !(duration >= dwell) {
        return Err(arg("FID needs dwell > 0 and duration >= dwell"));
    }
    if dwell < dt * (T::one() - lit(1e-9)) {
        return Err(arg("FID dwell must not be shorter than the propagation step"));
    }
    if rho.matrix.dim() != sys.dim() {
        return Err(arg("state dimension does not match the spin system"));
    }
    let basis = SpinBasis::new(sys.n_spins)?;
    let i_plus = basis.total(Axis::X) + &basis.total(Axis::Y).scale_complex(cplx(T::zero(), T::one()));
    let n = (duration / dwell).round().to_usize().unwrap_or(0);
    let substeps = (dwell / dt - lit(1e-9)).ceil().max(T::one());
    let h_step = dwell / substeps;
    let fixed = if static_mode || sys.couplings.is_empty() {
        let h = dipolar_hamiltonian_rot(sys, omega_r, t_start, static_mode)?;
        Some(HermitianSpectrum::new(&h)?.exp(dwell))
    } else {
        None
    };
    let mut state = rho.matrix.clone();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        out.push(state.trace_product(&i_plus));
        if k + 1 == n {
            break;
        }
        let u = match &fixed {
            Some(u) => u.clone(),
            None => {
                let t0 = t_start + T::lit(k as f64) * dwell;
                propagate_interval(
                    |t| dipolar_hamiltonian_rot(sys, omega_r, t, false).expect("validated system"),
                    t0,
                    t0 + dwell,
                    h_step,
                )?
            }
        };
        state = state.conjugate_by(&u);
    }
    Ok(out)
}

/// Centered DFT: returns the frequency axis in Hz (`-1/(2 dwell)` upward)
/// and the fft-shifted amplitudes `X_k = sum_n x_n exp(-2 pi i k n / L)`.
pub fn spectrum<T: Real>(fid: &[Complex<T>], dwell: T) -> Result<(Vec<T>, Vec<Complex<T>>)> {
    let l = fid.len();
    if l < 2 {
        return Err(arg("spectrum needs at least two FID points"));
    }
    if !(dwell > T::zero()) {
        return Err(arg("dwell must be positive"));
    }
    let mut buf = fid.to_vec();
    FftPlanner::new().plan_fft_forward(l).process(&mut buf);
    buf.rotate_right(l / 2);
    let df = T::one() / (T::lit(l as f64) * dwell);
    let freqs = (0..l)
        .map(|k| (T::lit(k as f64) - T::lit((l / 2) as f64)) * df)
        .collect();
    Ok((freqs, buf))
}

pub fn write_fid_csv<T: Real, W: Write>(fid: &[Complex<T>], dwell: T, w: &mut W) -> Result<()> {
    writeln!(w, "{FID_CSV_HEADER}")?;
    for (k, z) in fid.iter().enumerate() {
        let t = T::lit(k as f64) * dwell;
        writeln!(w, "{:.16e},{:.16e},{:.16e}", t.as_f64(), z.re.as_f64(), z.im.as_f64())?;
    }
    Ok(())
}

pub fn write_spectrum_csv<T: Real, W: Write>(freqs: &[T], amps: &[Complex<T>], w: &mut W) -> Result<()> {
    writeln!(w, "{SPECTRUM_CSV_HEADER}")?;
    for (f, z) in freqs.iter().zip(amps) {
        writeln!(w, "{:.16e},{:.16e},{:.16e}", f.as_f64(), z.re.as_f64(), z.im.as_f64())?;
    }
    Ok(())
}
