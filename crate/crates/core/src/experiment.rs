//! Full-sequence drivers: ADNF-ARNF and ADRF-ARRF runs, ARNF phase cycling,
//! powder averaging and parameter sweeps.
//!
//! All reported states and magnetizations are in the ideal (three-component)
//! rotating frame. Hardware-mode runs are mapped back with
//! `exp(+i phi' I_z)`, which is exact because the secular dipolar
//! Hamiltonian commutes with `I_z`.

use std::fmt;
use std::io::Write;
use std::path::Path;

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{arg, Result};
use crate::hamiltonian::{
    dipolar_tensor_operator, nutating_average_reference, rf_hardware_from_basis, rf_ideal_from_parts,
    NutatingFrame, SpinSystem, dipolar_coefficient,
};
use crate::propagation::{detect_fid, dipolar_order_metric, magnetization, DensityDeviation, TrajectoryRecord};
use crate::scalar::{cplx, lit, wrap_phase, Real};
use crate::sequence::{steps_for, Detection, RfMode, SequenceKind, SequenceSpec, ZetaChoice};
use crate::spin::{rotate_operator, Axis, HermitianSpectrum, OperatorMatrix, SpinBasis};
use crate::waveform::{envelope, EnvelopeKind, EnvelopeSpec, Waveform};

pub const SWEEP_CSV_HEADER: &str =
    "param_value,recovered_re,recovered_im,recovered_abs,recovered_mz,x_rotation_rad";

/// Crystallite orientation `(beta, gamma)` applied as `R_z(gamma) R_y(beta)`
/// to every internuclear vector, with its powder weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Orientation<T> {
    pub beta: T,
    pub gamma: T,
    pub weight: T,
}

impl<T: Real> Orientation<T> {
    /// No rotation, weight 1.
    pub fn identity() -> Self {
        Self {
            beta: T::zero(),
            gamma: T::zero(),
            weight: T::one(),
        }
    }

    pub fn apply(&self, sys: &SpinSystem<T>) -> SpinSystem<T> {
        if self.beta == T::zero() && self.gamma == T::zero() {
            sys.clone()
        } else {
            sys.oriented(self.beta, self.gamma)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PowderKind {
    SingleCrystal,
    UniformGrid,
    GoldenSpiral,
}

impl fmt::Display for PowderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PowderKind::SingleCrystal => "single_crystal",
            PowderKind::UniformGrid => "uniform_grid",
            PowderKind::GoldenSpiral => "golden_spiral",
        })
    }
}

/// Deterministic orientation set with weights summing to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct PowderScheme<T> {
    pub kind: PowderKind,
    pub orientations: Vec<Orientation<T>>,
}

impl<T: Real> PowderScheme<T> {
    pub fn single_crystal() -> Self {
        Self {
            kind: PowderKind::SingleCrystal,
            orientations: vec![Orientation::identity()],
        }
    }

    /// Midpoint grid in `beta`, uniform in `gamma`, `sin(beta)` weights.
    pub fn uniform_grid(n_beta: usize, n_gamma: usize) -> Result<Self> {
        if n_beta == 0 || n_gamma == 0 {
            return Err(arg("uniform_grid needs n_beta >= 1 and n_gamma >= 1"));
        }
        let mut orientations = Vec::with_capacity(n_beta * n_gamma);
        for i in 0..n_beta {
            let beta = (T::lit(i as f64) + lit(0.5)) * T::pi() / T::lit(n_beta as f64);
            for j in 0..n_gamma {
                let gamma = T::two_pi() * T::lit(j as f64) / T::lit(n_gamma as f64);
                orientations.push(Orientation {
                    beta,
                    gamma,
                    weight: beta.sin(),
                });
            }
        }
        Ok(Self::normalized(PowderKind::UniformGrid, orientations))
    }

    /// Fibonacci sphere: equal-area cells, so the `sin(beta)` measure is
    /// carried by the point density and the weights are equal.
    pub fn golden_spiral(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(arg("golden_spiral needs n >= 1"));
        }
        let golden = T::pi() * (lit::<T>(3.0) - lit::<T>(5.0).sqrt());
        let nn = T::lit(n as f64);
        let orientations = (0..n)
            .map(|k| {
                let z = T::one() - (T::lit(2.0 * k as f64) + T::one()) / nn;
                Orientation {
                    beta: z.acos(),
                    gamma: (golden * T::lit(k as f64)) % T::two_pi(),
                    weight: T::one(),
                }
            })
            .collect();
        Ok(Self::normalized(PowderKind::GoldenSpiral, orientations))
    }

    fn normalized(kind: PowderKind, mut orientations: Vec<Orientation<T>>) -> Self {
        let total = orientations.iter().fold(T::zero(), |s, o| s + o.weight);
        for o in &mut orientations {
            o.weight /= total;
        }
        Self { kind, orientations }
    }

    pub fn len(&self) -> usize {
        self.orientations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orientations.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.orientations.is_empty() {
            return Err(arg("powder scheme has no orientations"));
        }
        if self.orientations.iter().any(|o| !(o.weight >= T::zero())) {
            return Err(arg("powder weights must be non-negative"));
        }
        let total = self.orientations.iter().fold(T::zero(), |s, o| s + o.weight);
        if (total - T::one()).abs() > lit(1e-12) {
            return Err(arg(format!("powder weights sum to {total}, not 1")));
        }
        Ok(())
    }
}

/// Outcome of one sequence run, or a signed/weighted combination of runs.
#[derive(Clone, Debug, PartialEq)]
pub struct RunResult<T: Real> {
    /// Final ideal-frame state; absent for combined results.
    pub rho: Option<DensityDeviation<T>>,
    pub trajectory: TrajectoryRecord<T>,
    /// `Tr{rho I_a} / Tr{I_z^2}` at the end of the sequence.
    pub magnetization: [T; 3],
    pub recovered_m: Complex<T>,
    pub fid: Option<Vec<Complex<T>>>,
}

impl<T: Real> RunResult<T> {
    fn empty() -> Self {
        Self {
            rho: None,
            trajectory: TrajectoryRecord::default(),
            magnetization: [T::zero(); 3],
            recovered_m: Complex::new(T::zero(), T::zero()),
            fid: None,
        }
    }

    /// Rotation angle about x carrying `+I_z` onto the final `(m_y, m_z)`.
    pub fn x_rotation(&self) -> T {
        (-self.magnetization[1]).atan2(self.magnetization[2])
    }

    /// `self += w * other` on every linear observable.
    fn accumulate(&mut self, w: T, other: &Self, with_trajectory: bool) -> Result<()> {
        for a in 0..3 {
            self.magnetization[a] += w * other.magnetization[a];
        }
        self.recovered_m += other.recovered_m * w;
        if with_trajectory {
            self.trajectory.accumulate(w, &other.trajectory)?;
        }
        match (&mut self.fid, &other.fid) {
            (None, Some(f)) => self.fid = Some(f.iter().map(|z| z * w).collect()),
            (Some(acc), Some(f)) => {
                if acc.len() != f.len() {
                    return Err(arg("FIDs of different length"));
                }
                for (a, z) in acc.iter_mut().zip(f) {
                    *a += z * w;
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Per-run switches not carried by the sequence itself.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions<T: Real> {
    /// Initial deviation; equilibrium `I_z` when absent.
    pub initial: Option<DensityDeviation<T>>,
    /// Record the trajectory every `record_stride` steps.
    pub record: bool,
}

impl<T: Real> Default for RunOptions<T> {
    fn default() -> Self {
        Self {
            initial: None,
            record: true,
        }
    }
}

enum Drive<T: Real> {
    Nutating {
        waveform: Waveform<T>,
        hardware: bool,
        frame: NutatingFrame<T>,
        reference: Option<OperatorMatrix<T>>,
    },
    Rotating {
        down: EnvelopeSpec<T>,
        up: EnvelopeSpec<T>,
        tau: T,
        t_retention: T,
    },
}

/// Step-wise propagator for one spin system and one sequence.
struct Engine<'a, T: Real> {
    spec: &'a SequenceSpec<T>,
    sys: SpinSystem<T>,
    basis: SpinBasis<T>,
    tensors: Vec<OperatorMatrix<T>>,
    iz_spectrum: HermitianSpectrum<T>,
    n_tau: usize,
    n_ret: usize,
    record: bool,
}

impl<'a, T: Real> Engine<'a, T> {
    fn new(spec: &'a SequenceSpec<T>, sys: SpinSystem<T>, record: bool) -> Result<Self> {
        spec.validate()?;
        let basis = SpinBasis::new(sys.n_spins)?;
        let tensors = sys
            .couplings
            .iter()
            .map(|c| dipolar_tensor_operator(&basis, c.site_i, c.site_j))
            .collect();
        let iz_spectrum = HermitianSpectrum::new(basis.total(Axis::Z))?;
        Ok(Self {
            spec,
            n_tau: steps_for(spec.tau, spec.dt, "tau")?,
            n_ret: steps_for(spec.t_retention, spec.dt, "t_retention")?,
            sys,
            basis,
            tensors,
            iz_spectrum,
            record,
        })
    }

    fn n_total(&self) -> usize {
        2 * self.n_tau + self.n_ret
    }

    fn nutating_drive(&self, zeta_arnf: T) -> Result<Drive<T>> {
        let s = self.spec;
        let waveform = Waveform::new(s.omega1, s.omega2, s.tau, s.t_retention, s.zeta_adnf, zeta_arnf)?;
        Ok(Drive::Nutating {
            waveform,
            hardware: s.mode == RfMode::Hardware,
            frame: NutatingFrame::new(&self.basis, s.omega1)?,
            reference: nutating_average_reference(&self.sys, s.omega1, s.omega_r, s.static_mode)?,
        })
    }

    fn rotating_drive(&self) -> Result<Drive<T>> {
        let s = self.spec;
        Ok(Drive::Rotating {
            down: EnvelopeSpec::new(EnvelopeKind::AdnfRampdown, s.omega1, s.tau, T::zero())?,
            up: EnvelopeSpec::new(EnvelopeKind::ArnfRampup, s.omega1, s.tau, s.tau + s.t_retention)?,
            tau: s.tau,
            t_retention: s.t_retention,
        })
    }

    fn dipolar(&self, t: T) -> OperatorMatrix<T> {
        let mut h = OperatorMatrix::zeros(self.basis.dim());
        for (c, a) in self.sys.couplings.iter().zip(&self.tensors) {
            h.add_scaled(dipolar_coefficient(c, self.spec.omega_r, t, self.spec.static_mode), a);
        }
        h
    }

    fn hamiltonian(&self, drive: &Drive<T>, t: T) -> OperatorMatrix<T> {
        let mut h = self.dipolar(t);
        match drive {
            Drive::Nutating { waveform, hardware, .. } => {
                if *hardware {
                    h += &rf_hardware_from_basis(&self.basis, &waveform.sample(t));
                } else {
                    let w2 = waveform.nutating_amplitude(t);
                    h += &rf_ideal_from_parts(&self.basis, t, self.spec.omega1, w2, waveform.zeta_at(t));
                }
            }
            Drive::Rotating {
                down,
                up,
                tau,
                t_retention,
            } => {
                let w1 = if t <= *tau {
                    envelope(down, t).unwrap_or(T::zero())
                } else if t < *tau + *t_retention {
                    T::zero()
                } else {
                    envelope(up, t.min(up.t_start + up.tau)).unwrap_or(T::zero())
                };
                h.add_scaled(w1, self.basis.total(Axis::X));
            }
        }
        h
    }

    /// Ideal-frame state from the propagated one.
    fn ideal_state(&self, drive: &Drive<T>, rho: &OperatorMatrix<T>, t: T) -> OperatorMatrix<T> {
        match drive {
            Drive::Nutating {
                waveform,
                hardware: true,
                ..
            } => rho.conjugate_by(&self.iz_spectrum.exp(-waveform.phase_correction(t))),
            _ => rho.clone(),
        }
    }

    fn record_point(&self, drive: &Drive<T>, rho: &OperatorMatrix<T>, t: T, traj: &mut TrajectoryRecord<T>) {
        let ideal = self.ideal_state(drive, rho, t);
        let m = magnetization(&ideal, &self.basis);
        let order = match drive {
            Drive::Nutating { frame, reference, .. } => match reference {
                Some(h) => {
                    let nut = DensityDeviation::from_unchecked(frame.transform(&ideal, t));
                    dipolar_order_metric(&nut, h).unwrap_or(T::lit(f64::NAN))
                }
                None => T::lit(f64::NAN),
            },
            Drive::Rotating { .. } => {
                let h = self.dipolar(t);
                dipolar_order_metric(&DensityDeviation::from_unchecked(ideal), &h).unwrap_or(T::lit(f64::NAN))
            }
        };
        traj.push(t, m, order);
    }

    /// Steps `k0..k1`, recording state at `k dt` for `k % stride == 0`
    /// (and at `k1` when it is the end of the sequence).
    fn run(
        &self,
        drive: &Drive<T>,
        rho: &mut OperatorMatrix<T>,
        k0: usize,
        k1: usize,
        traj: &mut TrajectoryRecord<T>,
    ) -> Result<()> {
        let dt = self.spec.dt;
        let stride = self.spec.record_stride;
        for k in k0..k1 {
            if self.record && k % stride == 0 {
                self.record_point(drive, rho, dt * T::lit(k as f64), traj);
            }
            let t_mid = dt * (T::lit(k as f64) + lit(0.5));
            let u = HermitianSpectrum::new(&self.hamiltonian(drive, t_mid))?.exp(dt);
            *rho = rho.conjugate_by(&u);
        }
        if self.record && k1 == self.n_total() && k1.is_multiple_of(stride) {
            self.record_point(drive, rho, dt * T::lit(k1 as f64), traj);
        }
        Ok(())
    }

    fn initial(&self, options: &RunOptions<T>) -> Result<OperatorMatrix<T>> {
        match &options.initial {
            Some(r) if r.matrix().dim() != self.basis.dim() => {
                Err(arg("initial state dimension does not match the spin system"))
            }
            Some(r) => Ok(r.matrix().clone()),
            None => Ok(self.basis.total(Axis::Z).clone()),
        }
    }

    fn finish(&self, drive: &Drive<T>, rho: OperatorMatrix<T>, trajectory: TrajectoryRecord<T>) -> Result<RunResult<T>> {
        let t_end = self.spec.duration();
        let ideal = self.ideal_state(drive, &rho, t_end);
        let m = magnetization(&ideal, &self.basis);
        let fid = if self.spec.detect == Detection::Fid {
            let state = DensityDeviation::from_unchecked(ideal.clone());
            Some(detect_fid(
                &state,
                &self.sys,
                self.spec.omega_r,
                self.spec.static_mode,
                t_end,
                self.spec.fid_duration,
                self.spec.fid_dwell,
                self.spec.dt,
            )?)
        } else {
            None
        };
        Ok(RunResult {
            rho: Some(DensityDeviation::from_unchecked(ideal)),
            trajectory,
            magnetization: m,
            recovered_m: cplx(m[0], m[1]),
            fid,
        })
    }
}

fn require_kind<T: Real>(spec: &SequenceSpec<T>, kind: SequenceKind) -> Result<()> {
    if spec.kind != kind {
        return Err(arg(format!("sequence kind is {}, expected {kind}", spec.kind)));
    }
    Ok(())
}

/// ADNF, retention and ARNF from equilibrium `I_z`.
pub fn run_adnf_arnf<T: Real>(
    spec: &SequenceSpec<T>,
    sys: &SpinSystem<T>,
    orientation: &Orientation<T>,
) -> Result<RunResult<T>> {
    run_adnf_arnf_with(spec, sys, orientation, &RunOptions::default())
}

pub fn run_adnf_arnf_with<T: Real>(
    spec: &SequenceSpec<T>,
    sys: &SpinSystem<T>,
    orientation: &Orientation<T>,
    options: &RunOptions<T>,
) -> Result<RunResult<T>> {
    require_kind(spec, SequenceKind::AdnfArnf)?;
    let engine = Engine::new(spec, orientation.apply(sys), options.record)?;
    let drive = engine.nutating_drive(spec.resolved_zeta_arnf())?;
    let mut rho = engine.initial(options)?;
    let mut traj = TrajectoryRecord::default();
    engine.run(&drive, &mut rho, 0, engine.n_total(), &mut traj)?;
    engine.finish(&drive, rho, traj)
}

/// Rotating-frame demagnetization: ideal `pi/2` pulse onto x, `omega1`
/// ramped down with the ADNF cosine envelope, RF off during retention,
/// ramped back up.
pub fn run_adrf_arrf<T: Real>(
    spec: &SequenceSpec<T>,
    sys: &SpinSystem<T>,
    orientation: &Orientation<T>,
) -> Result<RunResult<T>> {
    run_adrf_arrf_with(spec, sys, orientation, &RunOptions::default())
}

pub fn run_adrf_arrf_with<T: Real>(
    spec: &SequenceSpec<T>,
    sys: &SpinSystem<T>,
    orientation: &Orientation<T>,
    options: &RunOptions<T>,
) -> Result<RunResult<T>> {
    require_kind(spec, SequenceKind::AdrfArrf)?;
    let engine = Engine::new(spec, orientation.apply(sys), options.record)?;
    let drive = engine.rotating_drive()?;
    let start = engine.initial(options)?;
    let mut rho = rotate_operator(&start, Axis::Y, T::frac_pi_2(), sys.n_spins)?;
    let mut traj = TrajectoryRecord::default();
    engine.run(&drive, &mut rho, 0, engine.n_total(), &mut traj)?;
    engine.finish(&drive, rho, traj)
}

/// Runs whichever sequence `spec.kind` names.
pub fn run_sequence<T: Real>(
    spec: &SequenceSpec<T>,
    sys: &SpinSystem<T>,
    orientation: &Orientation<T>,
    options: &RunOptions<T>,
) -> Result<RunResult<T>> {
    match spec.kind {
        SequenceKind::AdnfArnf => run_adnf_arnf_with(spec, sys, orientation, options),
        SequenceKind::AdrfArrf => run_adrf_arrf_with(spec, sys, orientation, options),
    }
}

/// Ideal-frame state of an ADNF-ARNF run after `round(t / dt)` steps.
pub fn state_at<T: Real>(
    spec: &SequenceSpec<T>,
    sys: &SpinSystem<T>,
    orientation: &Orientation<T>,
    t: T,
) -> Result<DensityDeviation<T>> {
    require_kind(spec, SequenceKind::AdnfArnf)?;
    if !(t >= T::zero() && t <= spec.duration()) {
        return Err(arg(format!("t = {t} outside the sequence")));
    }
    let engine = Engine::new(spec, orientation.apply(sys), false)?;
    let drive = engine.nutating_drive(spec.resolved_zeta_arnf())?;
    let k = (t / spec.dt).round().to_usize().unwrap_or(0).min(engine.n_total());
    let mut rho = engine.basis.total(Axis::Z).clone();
    engine.run(&drive, &mut rho, 0, k, &mut TrajectoryRecord::default())?;
    let ideal = engine.ideal_state(&drive, &rho, spec.dt * T::lit(k as f64));
    Ok(DensityDeviation::from_unchecked(ideal))
}

/// Number of shots in the ARNF phase cycle.
pub const CYCLE_SHOTS: usize = 8;

/// Eight shots with the ARNF phase alternating between `zeta` (odd shots,
/// added) and `zeta + pi` (even shots, subtracted), divided by 8.
///
/// The two distinct shots share their ADNF and retention propagation and
/// are each computed once. The trajectory is that of the first shot.
pub fn run_phase_cycle<T: Real>(
    spec: &SequenceSpec<T>,
    sys: &SpinSystem<T>,
    orientation: &Orientation<T>,
) -> Result<RunResult<T>> {
    run_phase_cycle_with(spec, sys, orientation, &RunOptions::default())
}

pub fn run_phase_cycle_with<T: Real>(
    spec: &SequenceSpec<T>,
    sys: &SpinSystem<T>,
    orientation: &Orientation<T>,
    options: &RunOptions<T>,
) -> Result<RunResult<T>> {
    let [odd, even] = phase_cycle_shots(spec, sys, orientation, options)?;
    let mut out = RunResult::empty();
    out.trajectory = odd.trajectory.clone();
    let inv = T::one() / T::lit(CYCLE_SHOTS as f64);
    for shot in 1..=CYCLE_SHOTS {
        if shot % 2 == 1 {
            out.accumulate(inv, &odd, false)?;
        } else {
            out.accumulate(-inv, &even, false)?;
        }
    }
    Ok(out)
}

/// The two distinct shots of the cycle: ARNF phase `zeta` and `zeta + pi`.
pub fn phase_cycle_shots<T: Real>(
    spec: &SequenceSpec<T>,
    sys: &SpinSystem<T>,
    orientation: &Orientation<T>,
    options: &RunOptions<T>,
) -> Result<[RunResult<T>; 2]> {
    require_kind(spec, SequenceKind::AdnfArnf)?;
    let zeta = spec.resolved_zeta_arnf();
    let engine = Engine::new(spec, orientation.apply(sys), options.record)?;
    let drive_a = engine.nutating_drive(zeta)?;
    let drive_b = engine.nutating_drive(wrap_phase(zeta + T::pi()))?;
    let split = engine.n_tau + engine.n_ret;
    let mut rho = engine.initial(options)?;
    let mut traj = TrajectoryRecord::default();
    engine.run(&drive_a, &mut rho, 0, split, &mut traj)?;
    let (mut rho_b, mut traj_b) = (rho.clone(), traj.clone());
    engine.run(&drive_a, &mut rho, split, engine.n_total(), &mut traj)?;
    engine.run(&drive_b, &mut rho_b, split, engine.n_total(), &mut traj_b)?;
    Ok([engine.finish(&drive_a, rho, traj)?, engine.finish(&drive_b, rho_b, traj_b)?])
}

/// Weighted mean over crystallites. Work items run in parallel; the
/// reduction follows orientation order, so the result does not depend on
/// the thread count.
pub fn powder_average<T, F>(run: F, scheme: &PowderScheme<T>, spec: &SequenceSpec<T>, sys: &SpinSystem<T>) -> Result<RunResult<T>>
where
    T: Real,
    F: Fn(&SequenceSpec<T>, &SpinSystem<T>, &Orientation<T>) -> Result<RunResult<T>> + Sync,
{
    scheme.validate()?;
    let results: Vec<RunResult<T>> = scheme
        .orientations
        .par_iter()
        .map(|o| run(spec, sys, o))
        .collect::<Result<_>>()?;
    reduce(&scheme.orientations, &results)
}

fn reduce<T: Real>(orientations: &[Orientation<T>], results: &[RunResult<T>]) -> Result<RunResult<T>> {
    if results.len() == 1 && orientations[0].weight == T::one() {
        return Ok(results[0].clone());
    }
    let mut out = RunResult::empty();
    for (o, r) in orientations.iter().zip(results) {
        out.accumulate(o.weight, r, true)?;
    }
    Ok(out)
}

/// Phase-cycled run for ADNF-ARNF, single shot for ADRF-ARRF.
pub fn run_detected<T: Real>(
    spec: &SequenceSpec<T>,
    sys: &SpinSystem<T>,
    orientation: &Orientation<T>,
    options: &RunOptions<T>,
) -> Result<RunResult<T>> {
    match spec.kind {
        SequenceKind::AdnfArnf => run_phase_cycle_with(spec, sys, orientation, options),
        SequenceKind::AdrfArrf => run_adrf_arrf_with(spec, sys, orientation, options),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    Omega1,
    Retention,
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::Omega1 => "omega1",
            SweepParam::Retention => "retention",
        })
    }
}

/// One powder-averaged, phase-cycled result per parameter value.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult<T: Real> {
    pub param: SweepParam,
    /// Swept values in SI units (rad/s or s).
    pub values: Vec<T>,
    pub recovered: Vec<Complex<T>>,
    pub magnetization: Vec<[T; 3]>,
    pub template: SequenceSpec<T>,
    pub scheme: PowderKind,
    pub n_orientations: usize,
}

impl<T: Real> SweepResult<T> {
    /// `atan2(-m_y, m_z)` per point.
    pub fn x_rotation(&self) -> Vec<T> {
        self.magnetization.iter().map(|m| (-m[1]).atan2(m[2])).collect()
    }

    /// CSV rows; `param_scale` converts the stored value for display
    /// (e.g. `1 / 2 pi` for Hz).
    pub fn write_csv<W: Write>(&self, param_scale: f64, w: &mut W) -> Result<()> {
        writeln!(w, "{SWEEP_CSV_HEADER}")?;
        for (k, v) in self.values.iter().enumerate() {
            let m = self.recovered[k];
            let mag = self.magnetization[k];
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                v.as_f64() * param_scale,
                m.re.as_f64(),
                m.im.as_f64(),
                m.norm_sqr().sqrt().as_f64(),
                mag[2].as_f64(),
                (-mag[1]).atan2(mag[2]).as_f64()
            )?;
        }
        Ok(())
    }

    pub fn metadata_lines(&self) -> Vec<String> {
        let mut lines = vec![
            format!("sweep_param={}", self.param),
            format!("powder_scheme={}", self.scheme),
            format!("powder_n={}", self.n_orientations),
        ];
        lines.extend(self.template.metadata_lines());
        lines
    }
}

/// Writes `key=value` lines to `path`.
pub fn write_metadata(lines: &[String], path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for l in lines {
        writeln!(f, "{l}")?;
    }
    f.flush()?;
    Ok(())
}

fn sweep<T: Real>(
    param: SweepParam,
    specs: Vec<SequenceSpec<T>>,
    values: &[T],
    template: &SequenceSpec<T>,
    sys: &SpinSystem<T>,
    scheme: &PowderScheme<T>,
) -> Result<SweepResult<T>> {
    if values.is_empty() {
        return Err(arg("sweep needs at least one value"));
    }
    scheme.validate()?;
    for s in &specs {
        s.validate()?;
    }
    let n_o = scheme.len();
    let options = RunOptions {
        initial: None,
        record: false,
    };
    let items: Vec<(usize, usize)> = (0..specs.len()).flat_map(|v| (0..n_o).map(move |o| (v, o))).collect();
    let results: Vec<RunResult<T>> = items
        .par_iter()
        .map(|&(v, o)| run_detected(&specs[v], sys, &scheme.orientations[o], &options))
        .collect::<Result<_>>()?;
    let mut recovered = Vec::with_capacity(values.len());
    let mut magnetization = Vec::with_capacity(values.len());
    for chunk in results.chunks(n_o) {
        let r = reduce(&scheme.orientations, chunk)?;
        recovered.push(r.recovered_m);
        magnetization.push(r.magnetization);
    }
    Ok(SweepResult {
        param,
        values: values.to_vec(),
        recovered,
        magnetization,
        template: template.clone(),
        scheme: scheme.kind,
        n_orientations: n_o,
    })
}

/// Recovered magnetization versus spin-lock nutation rate.
pub fn sweep_omega1<T: Real>(
    template: &SequenceSpec<T>,
    sys: &SpinSystem<T>,
    scheme: &PowderScheme<T>,
    omega1_values: &[T],
) -> Result<SweepResult<T>> {
    if omega1_values.iter().any(|&w| !(w > T::zero())) {
        return Err(arg("omega1 sweep values must be positive"));
    }
    let specs = omega1_values
        .iter()
        .map(|&w| SequenceSpec {
            omega1: w,
            ..template.clone()
        })
        .collect();
    sweep(SweepParam::Omega1, specs, omega1_values, template, sys, scheme)
}

/// Recovered magnetization versus retention interval. `compensate` selects
/// the frame-compensating ARNF phase; otherwise the ARNF phase is 0.
pub fn sweep_retention<T: Real>(
    template: &SequenceSpec<T>,
    sys: &SpinSystem<T>,
    scheme: &PowderScheme<T>,
    t_values: &[T],
    compensate: bool,
) -> Result<SweepResult<T>> {
    if t_values.iter().any(|&t| !(t >= T::zero())) {
        return Err(arg("retention sweep values must be non-negative"));
    }
    let zeta = if compensate {
        ZetaChoice::Auto
    } else {
        ZetaChoice::Fixed(T::zero())
    };
    let specs = t_values
        .iter()
        .map(|&t| SequenceSpec {
            t_retention: t,
            zeta_arnf: zeta,
            ..template.clone()
        })
        .collect();
    let base = SequenceSpec {
        zeta_arnf: zeta,
        ..template.clone()
    };
    sweep(SweepParam::Retention, specs, t_values, &base, sys, scheme)
}
