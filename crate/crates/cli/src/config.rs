//! Flat `namespace.key = value` run configuration.
//!
//! Frequencies are read in Hz and converted to rad/s only when building core
//! types, so the echoed file reproduces the input values exactly.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt::Write as _;
use std::path::Path;

use spinsim_core::experiment::{PowderKind, PowderScheme, SweepParam};
use spinsim_core::hamiltonian::{DipolarCoupling, SpinSystem};
use spinsim_core::sequence::{Detection, RfMode, SequenceKind, SequenceSpec, ZetaChoice};

use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingConfig {
    pub i: usize,
    pub j: usize,
    pub d_hz: f64,
    pub beta_rad: f64,
    pub gamma_rad: f64,
}

impl Default for CouplingConfig {
    /// Model pair: two protons with `d = -2 pi 5 kHz` perpendicular to the
    /// rotor axis.
    fn default() -> Self {
        Self {
            i: 0,
            j: 1,
            d_hz: -5000.0,
            beta_rad: FRAC_PI_2,
            gamma_rad: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub kind: SequenceKind,
    pub omega1_hz: f64,
    pub omega2_hz: f64,
    pub tau_s: f64,
    pub retention_s: f64,
    pub zeta_adnf_rad: f64,
    /// `None` selects the frame-compensating phase.
    pub zeta_arnf_rad: Option<f64>,
    pub dt_s: f64,
    pub mode: RfMode,
    pub record_stride: usize,
    /// Zero means a static sample.
    pub mas_rate_hz: f64,
    pub n_spins: usize,
    pub couplings: Vec<CouplingConfig>,
    pub powder: PowderKind,
    pub powder_n: usize,
    pub powder_n_beta: usize,
    pub powder_n_gamma: usize,
    pub detect: Detection,
    pub fid_duration_s: f64,
    pub fid_dwell_s: f64,
    pub avgham_periods: usize,
    pub sweep_param: Option<SweepParam>,
    /// Hz for `omega1`, seconds for `retention`.
    pub sweep_values: Vec<f64>,
    pub sweep_compensate: bool,
}

fn bad(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

struct Entries {
    map: BTreeMap<String, String>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self, CliError> {
        let mut map = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Config(format!("line {}: expected `key = value`", n + 1)));
            };
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(CliError::Config(format!("line {}: empty key", n + 1)));
            }
            if map.insert(k.to_string(), v.to_string()).is_some() {
                return Err(bad(k, "duplicate key"));
            }
        }
        Ok(Self { map })
    }

    fn take_parsed<V: std::str::FromStr>(&mut self, key: &str) -> Result<Option<V>, CliError>
    where
        V::Err: std::fmt::Display,
    {
        match self.map.remove(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e| bad(key, format!("cannot parse `{v}`: {e}"))),
        }
    }

    fn float(&mut self, key: &str, default: f64) -> Result<f64, CliError> {
        let v = self.take_parsed::<f64>(key)?.unwrap_or(default);
        if !v.is_finite() {
            return Err(bad(key, "must be finite"));
        }
        Ok(v)
    }

    fn required_float(&mut self, key: &str) -> Result<f64, CliError> {
        if !self.map.contains_key(key) {
            return Err(bad(key, "missing required key"));
        }
        self.float(key, 0.0)
    }

    fn count(&mut self, key: &str, default: usize) -> Result<usize, CliError> {
        Ok(self.take_parsed(key)?.unwrap_or(default))
    }

    fn word(&mut self, key: &str, default: &str) -> String {
        self.map.remove(key).unwrap_or_else(|| default.to_string())
    }
}

fn parse_kind(key: &str, v: &str) -> Result<SequenceKind, CliError> {
    match v {
        "adnf_arnf" => Ok(SequenceKind::AdnfArnf),
        "adrf_arrf" => Ok(SequenceKind::AdrfArrf),
        _ => Err(bad(key, format!("expected adnf_arnf or adrf_arrf, got `{v}`"))),
    }
}

fn parse_mode(key: &str, v: &str) -> Result<RfMode, CliError> {
    match v {
        "ideal" => Ok(RfMode::Ideal),
        "hardware" => Ok(RfMode::Hardware),
        _ => Err(bad(key, format!("expected ideal or hardware, got `{v}`"))),
    }
}

fn parse_detect(key: &str, v: &str) -> Result<Detection, CliError> {
    match v {
        "none" => Ok(Detection::None),
        "immediate_m_plus" => Ok(Detection::ImmediateMPlus),
        "fid" => Ok(Detection::Fid),
        _ => Err(bad(key, format!("expected none, immediate_m_plus or fid, got `{v}`"))),
    }
}

fn parse_powder(key: &str, v: &str) -> Result<PowderKind, CliError> {
    match v {
        "single_crystal" => Ok(PowderKind::SingleCrystal),
        "uniform_grid" => Ok(PowderKind::UniformGrid),
        "golden_spiral" => Ok(PowderKind::GoldenSpiral),
        _ => Err(bad(key, format!("expected single_crystal, uniform_grid or golden_spiral, got `{v}`"))),
    }
}

pub fn parse_sweep_param(key: &str, v: &str) -> Result<Option<SweepParam>, CliError> {
    match v {
        "none" => Ok(None),
        "omega1" => Ok(Some(SweepParam::Omega1)),
        "retention" => Ok(Some(SweepParam::Retention)),
        _ => Err(bad(key, format!("expected omega1 or retention, got `{v}`"))),
    }
}

/// Comma-separated floats; an empty string gives an empty list.
pub fn parse_values(key: &str, v: &str) -> Result<Vec<f64>, CliError> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|s| {
            let s = s.trim();
            match s.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(bad(key, format!("cannot parse `{s}` as a number"))),
            }
        })
        .collect()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut e = Entries::parse(text)?;
        let kind = parse_kind("sequence.kind", &e.word("sequence.kind", "adnf_arnf"))?;
        let omega1_hz = e.required_float("sequence.omega1_hz")?;
        let omega2_hz = e.required_float("sequence.omega2_hz")?;
        let tau_s = e.required_float("sequence.tau_s")?;
        let retention_s = e.float("sequence.retention_s", 0.0)?;
        let zeta_adnf_rad = e.float("sequence.zeta_adnf_rad", 0.0)?;
        let zeta_arnf_rad = match e.word("sequence.zeta_arnf_rad", "auto").as_str() {
            "auto" => None,
            v => Some(
                v.parse::<f64>()
                    .ok()
                    .filter(|z| z.is_finite())
                    .ok_or_else(|| bad("sequence.zeta_arnf_rad", format!("expected auto or a number, got `{v}`")))?,
            ),
        };
        let dt_s = e.float("sequence.dt_s", 25e-9)?;
        let mode = parse_mode("sequence.mode", &e.word("sequence.mode", "ideal"))?;
        let record_stride = e.count("sequence.record_stride", 100)?;
        let mas_rate_hz = e.float("mas.rate_hz", 0.0)?;
        let n_spins = e.count("spins.n", 2)?;
        let n_couplings = e.count("coupling.count", if n_spins >= 2 { 1 } else { 0 })?;
        let mut couplings = Vec::with_capacity(n_couplings);
        for k in 0..n_couplings {
            let d = CouplingConfig::default();
            let key = |f: &str| format!("coupling.{k}.{f}");
            let i = e.count(&key("i"), d.i)?;
            couplings.push(CouplingConfig {
                i,
                j: e.count(&key("j"), if k == 0 { d.j } else { i + 1 })?,
                d_hz: e.float(&key("d_hz"), d.d_hz)?,
                beta_rad: e.float(&key("beta_rad"), d.beta_rad)?,
                gamma_rad: e.float(&key("gamma_rad"), d.gamma_rad)?,
            });
        }
        let powder = parse_powder("powder.scheme", &e.word("powder.scheme", "golden_spiral"))?;
        let powder_n = e.count("powder.n", 144)?;
        let powder_n_beta = e.count("powder.n_beta", 12)?;
        let powder_n_gamma = e.count("powder.n_gamma", 12)?;
        let detect = parse_detect("detect.mode", &e.word("detect.mode", "immediate_m_plus"))?;
        let fid_duration_s = e.float("detect.fid_duration_s", 2e-3)?;
        let fid_dwell_s = e.float("detect.fid_dwell_s", 10e-6)?;
        let avgham_periods = e.count("avgham.periods", 1)?;
        let sweep_param = parse_sweep_param("sweep.param", &e.word("sweep.param", "none"))?;
        let sweep_values = parse_values("sweep.values", &e.word("sweep.values", ""))?;
        let sweep_compensate = e
            .take_parsed::<bool>("sweep.compensate")?
            .unwrap_or(false);
        if let Some(k) = e.map.keys().next() {
            return Err(bad(k, "unknown key"));
        }
        let cfg = Self {
            kind,
            omega1_hz,
            omega2_hz,
            tau_s,
            retention_s,
            zeta_adnf_rad,
            zeta_arnf_rad,
            dt_s,
            mode,
            record_stride,
            mas_rate_hz,
            n_spins,
            couplings,
            powder,
            powder_n,
            powder_n_beta,
            powder_n_gamma,
            detect,
            fid_duration_s,
            fid_dwell_s,
            avgham_periods,
            sweep_param,
            sweep_values,
            sweep_compensate,
        };
        cfg.check()?;
        Ok(cfg)
    }

    /// Builds every core object once so invalid values surface as config errors.
    fn check(&self) -> Result<(), CliError> {
        let spec = self.sequence();
        spec.validate().map_err(|err| CliError::Config(format!("sequence: {err}")))?;
        self.system()?;
        self.powder_scheme()?;
        if self.avgham_periods == 0 {
            return Err(bad("avgham.periods", "must be at least 1"));
        }
        Ok(())
    }

    pub fn sequence(&self) -> SequenceSpec<f64> {
        SequenceSpec {
            kind: self.kind,
            omega1: TAU * self.omega1_hz,
            omega2: TAU * self.omega2_hz,
            tau: self.tau_s,
            t_retention: self.retention_s,
            zeta_adnf: self.zeta_adnf_rad,
            zeta_arnf: match self.zeta_arnf_rad {
                Some(z) => ZetaChoice::Fixed(z),
                None => ZetaChoice::Auto,
            },
            omega_r: TAU * self.mas_rate_hz,
            static_mode: self.mas_rate_hz == 0.0,
            dt: self.dt_s,
            mode: self.mode,
            detect: self.detect,
            fid_duration: self.fid_duration_s,
            fid_dwell: self.fid_dwell_s,
            record_stride: self.record_stride,
        }
    }

    pub fn system(&self) -> Result<SpinSystem<f64>, CliError> {
        let couplings = self
            .couplings
            .iter()
            .enumerate()
            .map(|(k, c)| {
                if c.i >= self.n_spins || c.j >= self.n_spins {
                    return Err(bad(&format!("coupling.{k}"), format!("site out of range for {} spins", self.n_spins)));
                }
                DipolarCoupling::new(c.i, c.j, TAU * c.d_hz, c.beta_rad, c.gamma_rad)
                    .map_err(|err| bad(&format!("coupling.{k}"), err))
            })
            .collect::<Result<Vec<_>, _>>()?;
        SpinSystem::new(self.n_spins, couplings).map_err(|err| bad("spins.n", err))
    }

    pub fn powder_scheme(&self) -> Result<PowderScheme<f64>, CliError> {
        match self.powder {
            PowderKind::SingleCrystal => Ok(PowderScheme::single_crystal()),
            PowderKind::UniformGrid => PowderScheme::uniform_grid(self.powder_n_beta, self.powder_n_gamma)
                .map_err(|err| bad("powder.n_beta", err)),
            PowderKind::GoldenSpiral => PowderScheme::golden_spiral(self.powder_n).map_err(|err| bad("powder.n", err)),
        }
    }

    /// Resolved configuration with every default written out. Parsing the
    /// result yields an identical `RunConfig`.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: &dyn std::fmt::Display| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("sequence.kind", &self.kind);
        kv("sequence.omega1_hz", &self.omega1_hz);
        kv("sequence.omega2_hz", &self.omega2_hz);
        kv("sequence.tau_s", &self.tau_s);
        kv("sequence.retention_s", &self.retention_s);
        kv("sequence.zeta_adnf_rad", &self.zeta_adnf_rad);
        match self.zeta_arnf_rad {
            Some(z) => kv("sequence.zeta_arnf_rad", &z),
            None => kv("sequence.zeta_arnf_rad", &"auto"),
        }
        kv("sequence.dt_s", &self.dt_s);
        kv("sequence.mode", &self.mode);
        kv("sequence.record_stride", &self.record_stride);
        kv("mas.rate_hz", &self.mas_rate_hz);
        kv("spins.n", &self.n_spins);
        kv("coupling.count", &self.couplings.len());
        for (k, c) in self.couplings.iter().enumerate() {
            kv(&format!("coupling.{k}.i"), &c.i);
            kv(&format!("coupling.{k}.j"), &c.j);
            kv(&format!("coupling.{k}.d_hz"), &c.d_hz);
            kv(&format!("coupling.{k}.beta_rad"), &c.beta_rad);
            kv(&format!("coupling.{k}.gamma_rad"), &c.gamma_rad);
        }
        kv("powder.scheme", &self.powder);
        kv("powder.n", &self.powder_n);
        kv("powder.n_beta", &self.powder_n_beta);
        kv("powder.n_gamma", &self.powder_n_gamma);
        kv("detect.mode", &self.detect);
        kv("detect.fid_duration_s", &self.fid_duration_s);
        kv("detect.fid_dwell_s", &self.fid_dwell_s);
        kv("avgham.periods", &self.avgham_periods);
        match self.sweep_param {
            Some(p) => kv("sweep.param", &p),
            None => kv("sweep.param", &"none"),
        }
        let values: Vec<String> = self.sweep_values.iter().map(|v| v.to_string()).collect();
        kv("sweep.values", &values.join(","));
        kv("sweep.compensate", &self.sweep_compensate);
        s
    }
}
