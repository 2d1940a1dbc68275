//! RF waveform synthesis for nutating-frame demagnetization/remagnetization.
//!
//! The target nutating-frame propagator is
//! `U2 = exp[-i int omega2'(t) (I_z cos zeta - I_y sin zeta) dt]`; the RF
//! Hamiltonian that produces it in the rotating frame is
//! `omega1 I_x + omega2'(t) [I_z cos(omega1 t + zeta) - I_y sin(omega1 t + zeta)]`.
//! The transverse part becomes an amplitude/phase pair, the `I_z` part an
//! extra accumulated phase `phi'(t) = -int omega2'(t) cos(omega1 t + zeta) dt`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{arg, Error, Result};
use crate::scalar::{lit, sinc, versinc, wrap_phase, Real};
use crate::sequence::{steps_for, SequenceSpec};

pub const CSV_HEADER: &str = "t_s,amplitude_rad_per_s,phase_rad";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvelopeKind {
    /// `(omega2/2)[1 + cos(pi (t - t_start)/tau)]`
    AdnfRampdown,
    /// `(omega2/2)[1 - cos(pi (t - t_start)/tau)]`
    ArnfRampup,
    Constant,
    Zero,
}

/// One segment of the nutating-frame field profile `omega2'(t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvelopeSpec<T> {
    pub kind: EnvelopeKind,
    pub omega2: T,
    pub tau: T,
    pub t_start: T,
}

impl<T: Real> EnvelopeSpec<T> {
    pub fn new(kind: EnvelopeKind, omega2: T, tau: T, t_start: T) -> Result<Self> {
        if !(omega2 >= T::zero()) {
            return Err(arg(format!("omega2 must be non-negative, got {omega2}")));
        }
        let ramp = matches!(kind, EnvelopeKind::AdnfRampdown | EnvelopeKind::ArnfRampup);
        if ramp && !(tau > T::zero()) {
            return Err(arg(format!("ramp duration tau must be positive, got {tau}")));
        }
        Ok(Self {
            kind,
            omega2,
            tau,
            t_start,
        })
    }

    /// End of the segment; unbounded for flat kinds with `tau = 0`.
    pub fn t_end(&self) -> Option<T> {
        if self.tau > T::zero() {
            Some(self.t_start + self.tau)
        } else {
            None
        }
    }

    fn check_inside(&self, t: T) -> Result<()> {
        let slack = lit::<T>(1e-12) * (self.t_start.abs() + self.tau).max(T::one());
        let past_end = self.t_end().is_some_and(|end| t > end + slack);
        if t < self.t_start - slack || past_end {
            return Err(arg(format!(
                "t = {t} outside envelope segment starting at {} (tau = {})",
                self.t_start, self.tau
            )));
        }
        Ok(())
    }
}

/// `omega2'(t)` for one segment.
pub fn envelope<T: Real>(spec: &EnvelopeSpec<T>, t: T) -> Result<T> {
    spec.check_inside(t)?;
    let half = spec.omega2 / lit(2.0);
    Ok(match spec.kind {
        EnvelopeKind::AdnfRampdown => {
            half * (T::one() + (T::pi() * (t - spec.t_start) / spec.tau).cos())
        }
        EnvelopeKind::ArnfRampup => {
            half * (T::one() - (T::pi() * (t - spec.t_start) / spec.tau).cos())
        }
        EnvelopeKind::Constant => spec.omega2,
        EnvelopeKind::Zero => T::zero(),
    })
}

/// `omega_a = [omega1^2 + (omega2' sin(omega1 t + zeta))^2]^(1/2)`.
pub fn rf_amplitude<T: Real>(t: T, omega1: T, envelope_value: T, zeta: T) -> T {
    let q = envelope_value * (omega1 * t + zeta).sin();
    (omega1 * omega1 + q * q).sqrt()
}

/// `phi = atan2(-omega2' sin(omega1 t + zeta), omega1)`.
pub fn rf_phase<T: Real>(t: T, omega1: T, envelope_value: T, zeta: T) -> T {
    (-(envelope_value * (omega1 * t + zeta).sin())).atan2(omega1)
}

/// `phi'(t) = -int_{t_start}^{t} omega2'(s) cos(omega1 s + zeta) ds`, closed form.
///
/// For `AdnfRampdown` with `t_start = 0`, `zeta = 0` this is
/// `-(w2 t/2) sinc(w1 t) - (w2 t/4) sinc((pi/tau + w1) t) - (w2 t/4) sinc((pi/tau - w1) t)`.
pub fn phase_correction<T: Real>(t: T, spec: &EnvelopeSpec<T>, omega1: T, zeta: T) -> Result<T> {
    spec.check_inside(t)?;
    let u = t - spec.t_start;
    let psi = omega1 * spec.t_start + zeta;
    let (cos_psi, sin_psi) = (psi.cos(), psi.sin());
    // int_0^u cos(a v + psi) dv
    let s = |a: T| {
        let x = a * u;
        u * (cos_psi * sinc(x) - sin_psi * versinc(x))
    };
    let half = spec.omega2 / lit(2.0);
    let integral = match spec.kind {
        EnvelopeKind::Zero => T::zero(),
        EnvelopeKind::Constant => spec.omega2 * s(omega1),
        EnvelopeKind::AdnfRampdown | EnvelopeKind::ArnfRampup => {
            let k = T::pi() / spec.tau;
            let modulated = (s(omega1 + k) + s(omega1 - k)) / lit(2.0);
            let sign = if spec.kind == EnvelopeKind::AdnfRampdown {
                T::one()
            } else {
                -T::one()
            };
            half * (s(omega1) + sign * modulated)
        }
    };
    Ok(-integral)
}

/// One time point of the emitted RF.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaveformSample<T> {
    pub t: T,
    /// `omega_a`, rad/s.
    pub amplitude: T,
    /// Total phase `phi + phi'`, rad.
    pub phase: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Segment {
    Adnf,
    Retention,
    Arnf,
}

/// Analytic ADNF / retention / ARNF waveform.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform<T: Real> {
    pub omega1: T,
    pub omega2: T,
    pub tau: T,
    pub t_retention: T,
    pub zeta_adnf: T,
    pub zeta_arnf: T,
    adnf: EnvelopeSpec<T>,
    arnf: EnvelopeSpec<T>,
    held_phase: T,
}

impl<T: Real> Waveform<T> {
    pub fn new(omega1: T, omega2: T, tau: T, t_retention: T, zeta_adnf: T, zeta_arnf: T) -> Result<Self> {
        if !(omega1 > T::zero()) {
            return Err(arg(format!("omega1 must be positive, got {omega1}")));
        }
        if !(t_retention >= T::zero()) {
            return Err(arg(format!("t_retention must be non-negative, got {t_retention}")));
        }
        let adnf = EnvelopeSpec::new(EnvelopeKind::AdnfRampdown, omega2, tau, T::zero())?;
        let arnf = EnvelopeSpec::new(EnvelopeKind::ArnfRampup, omega2, tau, tau + t_retention)?;
        let held_phase = phase_correction(tau, &adnf, omega1, zeta_adnf)?;
        Ok(Self {
            omega1,
            omega2,
            tau,
            t_retention,
            zeta_adnf,
            zeta_arnf,
            adnf,
            arnf,
            held_phase,
        })
    }

    /// Waveform for an ADNF-ARNF sequence, `Auto` ARNF phase resolved.
    pub fn from_spec(spec: &SequenceSpec<T>) -> Result<Self> {
        Self::new(
            spec.omega1,
            spec.omega2,
            spec.tau,
            spec.t_retention,
            spec.zeta_adnf,
            spec.resolved_zeta_arnf(),
        )
    }

    /// Same waveform with a different ARNF phase.
    pub fn with_zeta_arnf(&self, zeta_arnf: T) -> Self {
        Self {
            zeta_arnf,
            ..self.clone()
        }
    }

    pub fn duration(&self) -> T {
        self.tau + self.tau + self.t_retention
    }

    pub fn segment_at(&self, t: T) -> Segment {
        if t <= self.tau {
            Segment::Adnf
        } else if t < self.tau + self.t_retention {
            Segment::Retention
        } else {
            Segment::Arnf
        }
    }

    fn clamp(&self, spec: &EnvelopeSpec<T>, t: T) -> T {
        let end = spec.t_start + spec.tau;
        if t < spec.t_start {
            spec.t_start
        } else if t > end {
            end
        } else {
            t
        }
    }

    /// `omega2'(t)` over the whole sequence (zero outside `[0, 2 tau + T]`).
    pub fn nutating_amplitude(&self, t: T) -> T {
        if t < T::zero() || t > self.duration() {
            return T::zero();
        }
        match self.segment_at(t) {
            Segment::Adnf => envelope(&self.adnf, self.clamp(&self.adnf, t)).unwrap_or(T::zero()),
            Segment::Retention => T::zero(),
            Segment::Arnf => envelope(&self.arnf, self.clamp(&self.arnf, t)).unwrap_or(T::zero()),
        }
    }

    pub fn zeta_at(&self, t: T) -> T {
        match self.segment_at(t) {
            Segment::Adnf => self.zeta_adnf,
            _ => self.zeta_arnf,
        }
    }

    /// Accumulated, unwrapped `phi'(t)`; held constant through retention and
    /// continued through ARNF.
    pub fn phase_correction(&self, t: T) -> T {
        let t = t.max(T::zero()).min(self.duration());
        match self.segment_at(t) {
            Segment::Adnf => phase_correction(t, &self.adnf, self.omega1, self.zeta_adnf)
                .expect("clamped into ADNF segment"),
            Segment::Retention => self.held_phase,
            Segment::Arnf => {
                let t = self.clamp(&self.arnf, t);
                self.held_phase
                    + phase_correction(t, &self.arnf, self.omega1, self.zeta_arnf)
                        .expect("clamped into ARNF segment")
            }
        }
    }

    /// Amplitude and unwrapped total phase at `t`.
    pub fn sample(&self, t: T) -> WaveformSample<T> {
        let w2 = self.nutating_amplitude(t);
        let zeta = self.zeta_at(t);
        WaveformSample {
            t,
            amplitude: rf_amplitude(t, self.omega1, w2, zeta),
            phase: rf_phase(t, self.omega1, w2, zeta) + self.phase_correction(t),
        }
    }
}

/// Uniformly sampled RF program.
#[derive(Clone, Debug, PartialEq)]
pub struct PulseProgram<T: Real> {
    /// Samples with phase wrapped to `(-pi, pi]`.
    pub samples: Vec<WaveformSample<T>>,
    pub dt: T,
    pub carrier_hz: Option<f64>,
    /// Analytic generator, absent for imported programs.
    pub source: Option<Waveform<T>>,
}

impl<T: Real> PulseProgram<T> {
    pub fn duration(&self) -> T {
        match self.samples.last() {
            Some(last) => last.t - self.samples[0].t,
            None => T::zero(),
        }
    }

    /// Amplitude and phase at arbitrary `t`.
    ///
    /// Uses the analytic generator when present, otherwise linear
    /// interpolation of amplitude and unwrapped phase between samples.
    pub fn sample_at(&self, t: T) -> WaveformSample<T> {
        if let Some(w) = &self.source {
            return w.sample(t);
        }
        let n = self.samples.len();
        if n == 1 {
            return WaveformSample { t, ..self.samples[0] };
        }
        let t0 = self.samples[0].t;
        let pos = ((t - t0) / self.dt).max(T::zero());
        let i = (pos.floor().as_f64() as usize).min(n - 2);
        let frac = (pos - T::lit(i as f64)).min(T::one());
        let (a, b) = (self.samples[i], self.samples[i + 1]);
        let dphi = wrap_phase(b.phase - a.phase);
        WaveformSample {
            t,
            amplitude: a.amplitude + (b.amplitude - a.amplitude) * frac,
            phase: a.phase + dphi * frac,
        }
    }

    pub fn min_amplitude(&self) -> T {
        self.samples
            .iter()
            .map(|s| s.amplitude)
            .fold(T::max_value().unwrap_or(T::one() / T::eps()), |a, b| a.min(b))
    }

    pub fn max_amplitude(&self) -> T {
        self.samples
            .iter()
            .map(|s| s.amplitude)
            .fold(T::zero(), |a, b| a.max(b))
    }
}

/// Samples the ADNF / retention / ARNF waveform on `[0, 2 tau + T]`.
pub fn synthesize<T: Real>(spec: &SequenceSpec<T>) -> Result<PulseProgram<T>> {
    if !(spec.dt > T::zero()) {
        return Err(arg("dt must be positive"));
    }
    let n_tau = steps_for(spec.tau, spec.dt, "tau")?;
    let n_ret = steps_for(spec.t_retention, spec.dt, "t_retention")?;
    let waveform = Waveform::from_spec(spec)?;
    let n = 2 * n_tau + n_ret;
    let samples = (0..=n)
        .map(|k| {
            let t = T::lit(k as f64) * spec.dt;
            let s = waveform.sample(t);
            WaveformSample {
                phase: wrap_phase(s.phase),
                ..s
            }
        })
        .collect();
    Ok(PulseProgram {
        samples,
        dt: spec.dt,
        carrier_hz: None,
        source: Some(waveform),
    })
}

/// Writes the program as `t_s,amplitude_rad_per_s,phase_rad` CSV.
pub fn export_waveform<T: Real>(program: &PulseProgram<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_waveform_csv(program, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_waveform_csv<T: Real, W: Write>(program: &PulseProgram<T>, w: &mut W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for s in &program.samples {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e}",
            s.t.as_f64(),
            s.amplitude.as_f64(),
            wrap_phase(s.phase).as_f64()
        )?;
    }
    Ok(())
}

/// Reads a waveform CSV; requires strictly increasing, uniformly spaced times.
pub fn import_waveform<T: Real>(path: impl AsRef<Path>) -> Result<PulseProgram<T>> {
    read_waveform_csv(BufReader::new(File::open(path)?))
}

pub fn read_waveform_csv<T: Real, R: BufRead>(reader: R) -> Result<PulseProgram<T>> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty waveform file".into()))??;
    if header.trim_end_matches('\r') != CSV_HEADER {
        return Err(Error::Format(format!("unexpected header {header:?}")));
    }
    let mut samples = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Format(format!(
                "line {}: expected 3 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<T> {
            s.trim()
                .parse::<f64>()
                .map(T::lit)
                .map_err(|e| Error::Format(format!("line {}: {s:?}: {e}", lineno + 2)))
        };
        samples.push(WaveformSample {
            t: parse(fields[0])?,
            amplitude: parse(fields[1])?,
            phase: parse(fields[2])?,
        });
    }
    if samples.len() < 2 {
        return Err(Error::Format(format!(
            "need at least two samples, found {}",
            samples.len()
        )));
    }
    let n = samples.len();
    let dt = (samples[n - 1].t - samples[0].t) / T::lit((n - 1) as f64);
    for (i, pair) in samples.windows(2).enumerate() {
        let step = pair[1].t - pair[0].t;
        if !(step > T::zero()) {
            return Err(Error::Format(format!(
                "timestamps not strictly increasing at row {}",
                i + 2
            )));
        }
        if (step - dt).abs() > lit::<T>(1e-6) * dt {
            return Err(Error::Format(format!(
                "non-uniform sample spacing at row {}: {step} vs {dt}",
                i + 2
            )));
        }
    }
    Ok(PulseProgram {
        samples,
        dt,
        carrier_hz: None,
        source: None,
    })
}
