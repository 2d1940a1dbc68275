//! Sequence parameters shared by waveform synthesis, Hamiltonian assembly and
//! the experiment drivers.

use std::fmt;

use crate::error::{arg, Result};
use crate::scalar::{lit, wrap_phase, Real};

/// Which demagnetization/remagnetization sequence to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SequenceKind {
    /// Ramp the nutating-frame field `omega2'(t)` under a persistent `omega1`.
    AdnfArnf,
    /// Conventional rotating-frame ramp of `omega1` itself.
    AdrfArrf,
}

/// How the RF field enters the propagation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RfMode {
    /// Three-component field `omega1 I_x + omega2'(t)[I_z cos - I_y sin]`.
    Ideal,
    /// Transverse amplitude/phase-modulated field as emitted by a spectrometer.
    Hardware,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Detection {
    None,
    /// `Tr{rho I_+}` at the end of the sequence.
    ImmediateMPlus,
    /// Free induction decay after the sequence (RF off).
    Fid,
}

/// ARNF phase factor: an explicit value or the frame-compensating choice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ZetaChoice<T> {
    Fixed(T),
    Auto,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceSpec<T: Real> {
    pub kind: SequenceKind,
    /// Spin-lock nutation rate, rad/s.
    pub omega1: T,
    /// Initial/final nutating-frame field amplitude, rad/s.
    pub omega2: T,
    /// Ramp duration, s.
    pub tau: T,
    /// Retention interval `T`, s.
    pub t_retention: T,
    pub zeta_adnf: T,
    pub zeta_arnf: ZetaChoice<T>,
    /// MAS rate, rad/s.
    pub omega_r: T,
    pub static_mode: bool,
    /// Propagation time step, s.
    pub dt: T,
    pub mode: RfMode,
    pub detect: Detection,
    pub fid_duration: T,
    pub fid_dwell: T,
    /// Record every `record_stride`-th step in trajectories.
    pub record_stride: usize,
}

impl<T: Real> SequenceSpec<T> {
    /// Static ADNF-ARNF with defaults for everything but the ramp parameters.
    pub fn new(omega1: T, omega2: T, tau: T) -> Self {
        Self {
            kind: SequenceKind::AdnfArnf,
            omega1,
            omega2,
            tau,
            t_retention: T::zero(),
            zeta_adnf: T::zero(),
            zeta_arnf: ZetaChoice::Auto,
            omega_r: T::zero(),
            static_mode: true,
            dt: lit(25e-9),
            mode: RfMode::Ideal,
            detect: Detection::ImmediateMPlus,
            fid_duration: lit(2e-3),
            fid_dwell: lit(10e-6),
            record_stride: 100,
        }
    }

    /// Total RF duration `2 tau + T`.
    pub fn duration(&self) -> T {
        self.tau + self.tau + self.t_retention
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega1 > T::zero()) {
            return Err(arg(format!("omega1 must be positive, got {}", self.omega1)));
        }
        if !(self.omega2 >= T::zero()) {
            return Err(arg(format!("omega2 must be non-negative, got {}", self.omega2)));
        }
        if !(self.tau > T::zero()) {
            return Err(arg(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.t_retention >= T::zero()) {
            return Err(arg(format!("t_retention must be non-negative, got {}", self.t_retention)));
        }
        if !(self.omega_r >= T::zero()) {
            return Err(arg(format!("omega_r must be non-negative, got {}", self.omega_r)));
        }
        let max_dt = T::two_pi() / self.omega1 / lit(200.0);
        if !(self.dt > T::zero()) || self.dt > max_dt * lit(1.0 + 1e-12) {
            return Err(arg(format!(
                "dt = {} must be positive and at most (2 pi/omega1)/200 = {}",
                self.dt, max_dt
            )));
        }
        steps_for(self.tau, self.dt, "tau")?;
        steps_for(self.t_retention, self.dt, "t_retention")?;
        if self.record_stride == 0 {
            return Err(arg("record_stride must be at least 1"));
        }
        if self.detect == Detection::Fid {
            if !(self.fid_dwell > T::zero()) || !(self.fid_duration >= self.fid_dwell) {
                return Err(arg("fid_dwell must be positive and not exceed fid_duration"));
            }
            if self.fid_dwell < self.dt * lit(1.0 - 1e-9) {
                return Err(arg("fid_dwell must be at least dt"));
            }
        }
        Ok(())
    }

    /// ARNF phase with `Auto` resolved to the frame-compensating value.
    ///
    /// The nutating frame has turned by `omega1 (2 tau + T)` about x at the end
    /// of the sequence; the choice below lands remagnetized order on `+I_y` of
    /// the rotating frame.
    pub fn resolved_zeta_arnf(&self) -> T {
        match self.zeta_arnf {
            ZetaChoice::Fixed(z) => z,
            ZetaChoice::Auto => compensating_zeta(self.omega1, self.duration()),
        }
    }
}

/// `zeta` that maps nutating-frame `I_z` order onto rotating-frame `+I_y`
/// after a total nutation time `t_total`.
pub fn compensating_zeta<T: Real>(omega1: T, t_total: T) -> T {
    wrap_phase(-T::frac_pi_2() - omega1 * t_total)
}

/// Number of `dt` steps in `span`, rejecting non-commensurate spans.
pub fn steps_for<T: Real>(span: T, dt: T, name: &str) -> Result<usize> {
    let ratio = span / dt;
    let n = ratio.round();
    if (ratio - n).abs() > lit::<T>(1e-6) * n.max(T::one()) {
        return Err(arg(format!(
            "{name} = {span} is not an integer multiple of dt = {dt}"
        )));
    }
    Ok(n.as_f64() as usize)
}

impl fmt::Display for SequenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SequenceKind::AdnfArnf => "adnf_arnf",
            SequenceKind::AdrfArrf => "adrf_arrf",
        })
    }
}

impl fmt::Display for RfMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RfMode::Ideal => "ideal",
            RfMode::Hardware => "hardware",
        })
    }
}

impl fmt::Display for Detection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Detection::None => "none",
            Detection::ImmediateMPlus => "immediate_m_plus",
            Detection::Fid => "fid",
        })
    }
}

impl<T: Real> SequenceSpec<T> {
    /// `key=value` lines describing every field in SI/rad units.
    pub fn metadata_lines(&self) -> Vec<String> {
        let zeta = match self.zeta_arnf {
            ZetaChoice::Fixed(z) => format!("{}", z.as_f64()),
            ZetaChoice::Auto => format!("auto({})", self.resolved_zeta_arnf().as_f64()),
        };
        vec![
            format!("kind={}", self.kind),
            format!("omega1_rad_per_s={}", self.omega1.as_f64()),
            format!("omega2_rad_per_s={}", self.omega2.as_f64()),
            format!("tau_s={}", self.tau.as_f64()),
            format!("t_retention_s={}", self.t_retention.as_f64()),
            format!("zeta_adnf_rad={}", self.zeta_adnf.as_f64()),
            format!("zeta_arnf_rad={zeta}"),
            format!("omega_r_rad_per_s={}", self.omega_r.as_f64()),
            format!("static_mode={}", self.static_mode),
            format!("dt_s={}", self.dt.as_f64()),
            format!("mode={}", self.mode),
            format!("detect={}", self.detect),
            format!("fid_duration_s={}", self.fid_duration.as_f64()),
            format!("fid_dwell_s={}", self.fid_dwell.as_f64()),
            format!("record_stride={}", self.record_stride),
        ]
    }
}
