//! Experiment configuration: every physical, algorithmic, and harness
//! parameter in one flat structure.
//!
//! Configs load from a plain `key = value` text file; the reference file
//! `config/default.cfg` in the repository lists every accepted key with its
//! default. Unit-bearing keys carry their unit in the name (`_dbw`, `_dbm`,
//! `_dbi`, `_db`, `_deg`, `_m`, `_hz`) and are converted to linear/SI exactly
//! once, here at the boundary; the rest of the crate only ever sees Watts,
//! Hertz, meters, radians, and linear gains.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::conic::SolveOptions;
use crate::satlink::SatLinkParams;

/// Errors from configuration loading and validation.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Malformed { line: usize, text: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key {key:?}: cannot parse {value:?} as {expected}")]
    BadValue { line: usize, key: String, value: String, expected: &'static str },
    #[error("key {key:?}: {reason}")]
    Invalid { key: &'static str, reason: String },
}

/// How the satellite transmit gain entering the link budget is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SatGainMode {
    /// Evaluate the Bessel beam pattern at the configured off-boresight angle.
    Pattern,
    /// Use the fixed configured gain value directly.
    Fixed,
}

/// Which surface operation scheme to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Energy splitting: per-element amplitudes and phases, β_t + β_r = 1.
    Es,
    /// Uniform energy splitting: one shared amplitude pair for all elements.
    Ues,
    /// Conventional RIS baseline: adjacent transmit-only and reflect-only
    /// sub-surfaces of m/2 elements each.
    Cris,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::Es => "es",
            Scheme::Ues => "ues",
            Scheme::Cris => "cris",
        }
    }
}

/// Harvested-power objective: worst region or regional sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveMode {
    /// Maximize the minimum harvested power over regions (per-region floor).
    Min,
    /// Maximize the total harvested power across regions.
    Sum,
}

/// Sweep axis selector for batch experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    PMax,
    RateIr,
    RateEve,
    M,
    Rho,
    Q,
}

impl SweepAxis {
    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::PMax => "p_max",
            SweepAxis::RateIr => "rate_ir",
            SweepAxis::RateEve => "rate_eve",
            SweepAxis::M => "m",
            SweepAxis::Rho => "rho",
            SweepAxis::Q => "q",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "p_max" => Some(SweepAxis::PMax),
            "rate_ir" => Some(SweepAxis::RateIr),
            "rate_eve" => Some(SweepAxis::RateEve),
            "m" => Some(SweepAxis::M),
            "rho" => Some(SweepAxis::Rho),
            "q" => Some(SweepAxis::Q),
            _ => None,
        }
    }
}

/// Complete system configuration. All values are stored in linear/SI units;
/// the dB-suffixed config keys are converted on load.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    // --- Link geometry and gains ---
    /// Satellite antenna count.
    pub n_t: usize,
    /// Surface element count.
    pub m: usize,
    /// Carrier frequency (Hz).
    pub f_c_hz: f64,
    /// Satellite-to-surface slant range (m).
    pub d_sat_m: f64,
    /// Surface-to-terminal distance for IRs and EHRs (m).
    pub d_terminal_m: f64,
    /// Eavesdropper distance band around the surface (m).
    pub eve_d_min_m: f64,
    pub eve_d_max_m: f64,
    /// Peak boresight gain (linear).
    pub g_max: f64,
    /// Surface-side receive gain (linear).
    pub g_l_s: f64,
    /// Fixed satellite transmit gain used when `sat_gain_mode = fixed` (linear).
    pub g_l_fixed: f64,
    /// Gain selection mode.
    pub sat_gain_mode: SatGainMode,
    /// 3 dB beamwidth (radians).
    pub theta_3db_rad: f64,
    /// Off-boresight angle of the surface (radians).
    pub theta_k_rad: f64,

    // --- Power, noise, fading ---
    /// Transmit power budget (W).
    pub p_max_w: f64,
    /// Receiver noise power σ² (W).
    pub noise_w: f64,
    /// Eavesdropper noise power σ_e² (W).
    pub noise_eve_w: f64,
    /// Reference path loss at 1 m (linear).
    pub chi_0: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    /// Rician factor (linear).
    pub rician_k: f64,
    /// Energy conversion efficiency applied at reporting time.
    pub eta_eh: f64,
    /// Normalized channel uncertainty level (ε = ρ·‖estimate‖_F).
    pub rho: f64,

    // --- Rate thresholds ---
    /// Minimum information rate per IR (bits/s/Hz); SINR threshold Γ = 2^r − 1.
    pub rate_ir: f64,
    /// Maximum tolerable leakage rate per Eve (bits/s/Hz); threshold 2^r − 1.
    pub rate_eve: f64,

    // --- Algorithm parameters ---
    /// Alternating-loop stopping threshold on objective increase.
    pub delta_0: f64,
    /// Rank-one defect target for the penalty outer loop.
    pub delta_1: f64,
    /// Penalty inner-loop stopping threshold on objective increase.
    pub delta_2: f64,
    /// Initial penalty weight as a fraction of the first objective magnitude.
    pub gamma_init_factor: f64,
    /// Multiplicative penalty growth factor (c > 1).
    pub gamma_growth: f64,
    /// Maximum penalty outer stages.
    pub outer_stages: usize,
    /// Maximum penalty inner iterations per stage (I_max).
    pub inner_iters: usize,
    /// Maximum alternating iterations (L_max).
    pub ao_iters: usize,
    /// Solver feasibility tolerance.
    pub feas_tol: f64,
    /// Solver relative duality-gap tolerance.
    pub gap_tol: f64,
    /// Interior-point iteration cap per solve.
    pub ipm_iters: usize,

    // --- Experiment harness ---
    /// Monte-Carlo trial count.
    pub trials: usize,
    /// Master seed; per-trial streams are derived from it.
    pub seed: u64,
    /// Schemes to run.
    pub schemes: Vec<Scheme>,
    /// Objective form.
    pub objective_mode: ObjectiveMode,
    /// Whether the leakage (secrecy) constraint family is active.
    pub secrecy: bool,
    /// Surface quantization bits; 0 keeps the continuous solution.
    pub quant_bits: u32,
    /// Optional default sweep axis and grid (CLI flags override).
    pub sweep_axis: Option<SweepAxis>,
    pub sweep_values: Vec<f64>,
}

/// dB value to linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// dBW to Watts.
pub fn dbw_to_w(dbw: f64) -> f64 {
    db_to_linear(dbw)
}

/// dBm to Watts.
pub fn dbm_to_w(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

impl Default for SystemConfig {
    fn default() -> Self {
        let theta_3db_rad = 0.4f64.to_radians();
        Self {
            n_t: 4,
            m: 20,
            f_c_hz: 17.7e9,
            d_sat_m: 340e3,
            d_terminal_m: 10.0,
            eve_d_min_m: 1.0,
            eve_d_max_m: 10.0,
            g_max: db_to_linear(52.0),
            g_l_s: db_to_linear(3.5),
            g_l_fixed: db_to_linear(34.0),
            sat_gain_mode: SatGainMode::Pattern,
            theta_3db_rad,
            theta_k_rad: 0.8 * theta_3db_rad,
            p_max_w: dbw_to_w(20.0),
            noise_w: dbm_to_w(-170.0),
            noise_eve_w: dbm_to_w(-170.0),
            chi_0: db_to_linear(-30.0),
            alpha: 2.2,
            rician_k: db_to_linear(5.0),
            eta_eh: 1.0,
            rho: 0.01,
            rate_ir: 1.0,
            rate_eve: 1.0,
            delta_0: 1e-5,
            delta_1: 1e-7,
            delta_2: 1e-7,
            gamma_init_factor: 1e-3,
            gamma_growth: 10.0,
            outer_stages: 8,
            inner_iters: 20,
            ao_iters: 30,
            feas_tol: 1e-8,
            gap_tol: 1e-7,
            ipm_iters: 120,
            trials: 20,
            seed: 7,
            schemes: vec![Scheme::Es, Scheme::Ues, Scheme::Cris],
            objective_mode: ObjectiveMode::Min,
            secrecy: true,
            quant_bits: 0,
            sweep_axis: None,
            sweep_values: Vec::new(),
        }
    }
}

impl SystemConfig {
    /// Loads a config file, applying defaults for absent keys.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Parses config text (`key = value` lines, `#` comments).
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = Self::default();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Malformed { line: line_no, text: raw_line.to_string() });
            };
            let key = key.trim();
            let value = value.trim();
            config.apply(key, value, line_no)?;
        }
        config.validate()?;
        Ok(config)
    }

    fn apply(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        fn usize_of(key: &str, value: &str, line: usize) -> Result<usize, ConfigError> {
            value.parse().map_err(|_| ConfigError::BadValue {
                line,
                key: key.to_string(),
                value: value.to_string(),
                expected: "nonnegative integer",
            })
        }
        fn u64_of(key: &str, value: &str, line: usize) -> Result<u64, ConfigError> {
            value.parse().map_err(|_| ConfigError::BadValue {
                line,
                key: key.to_string(),
                value: value.to_string(),
                expected: "nonnegative integer",
            })
        }
        fn u32_of(key: &str, value: &str, line: usize) -> Result<u32, ConfigError> {
            value.parse().map_err(|_| ConfigError::BadValue {
                line,
                key: key.to_string(),
                value: value.to_string(),
                expected: "nonnegative integer",
            })
        }
        fn f64_of(key: &str, value: &str, line: usize) -> Result<f64, ConfigError> {
            value.parse().map_err(|_| ConfigError::BadValue {
                line,
                key: key.to_string(),
                value: value.to_string(),
                expected: "real number",
            })
        }

        match key {
            "n_t" => self.n_t = usize_of(key, value, line)?,
            "m" => self.m = usize_of(key, value, line)?,
            "f_c_hz" => self.f_c_hz = f64_of(key, value, line)?,
            "d_sat_m" => self.d_sat_m = f64_of(key, value, line)?,
            "d_terminal_m" => self.d_terminal_m = f64_of(key, value, line)?,
            "eve_d_min_m" => self.eve_d_min_m = f64_of(key, value, line)?,
            "eve_d_max_m" => self.eve_d_max_m = f64_of(key, value, line)?,
            "g_max_dbi" => self.g_max = db_to_linear(f64_of(key, value, line)?),
            "g_l_s_dbi" => self.g_l_s = db_to_linear(f64_of(key, value, line)?),
            "g_l_dbi" => self.g_l_fixed = db_to_linear(f64_of(key, value, line)?),
            "sat_gain_mode" => {
                self.sat_gain_mode = match value {
                    "pattern" => SatGainMode::Pattern,
                    "fixed" => SatGainMode::Fixed,
                    _ => {
                        return Err(ConfigError::BadValue {
                            line,
                            key: key.to_string(),
                            value: value.to_string(),
                            expected: "`pattern` or `fixed`",
                        })
                    }
                }
            }
            "theta_3db_deg" => self.theta_3db_rad = f64_of(key, value, line)?.to_radians(),
            "theta_k_deg" => self.theta_k_rad = f64_of(key, value, line)?.to_radians(),
            "p_max_dbw" => self.p_max_w = dbw_to_w(f64_of(key, value, line)?),
            "noise_dbm" => self.noise_w = dbm_to_w(f64_of(key, value, line)?),
            "noise_eve_dbm" => self.noise_eve_w = dbm_to_w(f64_of(key, value, line)?),
            "chi_0_db" => self.chi_0 = db_to_linear(f64_of(key, value, line)?),
            "alpha" => self.alpha = f64_of(key, value, line)?,
            "rician_k_db" => self.rician_k = db_to_linear(f64_of(key, value, line)?),
            "eta_eh" => self.eta_eh = f64_of(key, value, line)?,
            "rho" => self.rho = f64_of(key, value, line)?,
            "rate_ir" => self.rate_ir = f64_of(key, value, line)?,
            "rate_eve" => self.rate_eve = f64_of(key, value, line)?,
            "delta_0" => self.delta_0 = f64_of(key, value, line)?,
            "delta_1" => self.delta_1 = f64_of(key, value, line)?,
            "delta_2" => self.delta_2 = f64_of(key, value, line)?,
            "gamma_init_factor" => self.gamma_init_factor = f64_of(key, value, line)?,
            "gamma_growth" => self.gamma_growth = f64_of(key, value, line)?,
            "outer_stages" => self.outer_stages = usize_of(key, value, line)?,
            "inner_iters" => self.inner_iters = usize_of(key, value, line)?,
            "ao_iters" => self.ao_iters = usize_of(key, value, line)?,
            "feas_tol" => self.feas_tol = f64_of(key, value, line)?,
            "gap_tol" => self.gap_tol = f64_of(key, value, line)?,
            "ipm_iters" => self.ipm_iters = usize_of(key, value, line)?,
            "trials" => self.trials = usize_of(key, value, line)?,
            "seed" => self.seed = u64_of(key, value, line)?,
            "schemes" => {
                let mut schemes = Vec::new();
                for part in value.split(',') {
                    let scheme = match part.trim() {
                        "es" => Scheme::Es,
                        "ues" => Scheme::Ues,
                        "cris" => Scheme::Cris,
                        other => {
                            return Err(ConfigError::BadValue {
                                line,
                                key: key.to_string(),
                                value: other.to_string(),
                                expected: "comma list of es|ues|cris",
                            })
                        }
                    };
                    if !schemes.contains(&scheme) {
                        schemes.push(scheme);
                    }
                }
                self.schemes = schemes;
            }
            "objective_mode" => {
                self.objective_mode = match value {
                    "min" => ObjectiveMode::Min,
                    "sum" => ObjectiveMode::Sum,
                    _ => {
                        return Err(ConfigError::BadValue {
                            line,
                            key: key.to_string(),
                            value: value.to_string(),
                            expected: "`min` or `sum`",
                        })
                    }
                }
            }
            "secrecy" => {
                self.secrecy = match value {
                    "on" => true,
                    "off" => false,
                    _ => {
                        return Err(ConfigError::BadValue {
                            line,
                            key: key.to_string(),
                            value: value.to_string(),
                            expected: "`on` or `off`",
                        })
                    }
                }
            }
            "quant_bits" => self.quant_bits = u32_of(key, value, line)?,
            "sweep_axis" => {
                self.sweep_axis = match value {
                    "none" => None,
                    other => Some(SweepAxis::parse(other).ok_or_else(|| ConfigError::BadValue {
                        line,
                        key: key.to_string(),
                        value: value.to_string(),
                        expected: "p_max|rate_ir|rate_eve|m|rho|q|none",
                    })?),
                }
            }
            "sweep_values" => {
                let mut values = Vec::new();
                for part in value.split(',') {
                    let part = part.trim();
                    if part.is_empty() {
                        continue;
                    }
                    values.push(part.parse().map_err(|_| ConfigError::BadValue {
                        line,
                        key: key.to_string(),
                        value: part.to_string(),
                        expected: "comma list of real numbers",
                    })?);
                }
                self.sweep_values = values;
            }
            _ => {
                return Err(ConfigError::UnknownKey { line, key: key.to_string() });
            }
        }
        Ok(())
    }

    /// Validates cross-field invariants after all keys are applied.
    pub fn validate(&self) -> Result<(), ConfigError> {
        fn require(cond: bool, key: &'static str, reason: String) -> Result<(), ConfigError> {
            if cond {
                Ok(())
            } else {
                Err(ConfigError::Invalid { key, reason })
            }
        }
        require(self.n_t >= 1, "n_t", format!("must be at least 1 (got {})", self.n_t))?;
        require(self.m >= 1, "m", format!("must be at least 1 (got {})", self.m))?;
        require(self.f_c_hz > 0.0, "f_c_hz", format!("must be positive (got {})", self.f_c_hz))?;
        require(self.d_sat_m > 0.0, "d_sat_m", format!("must be positive (got {})", self.d_sat_m))?;
        require(
            self.d_terminal_m > 0.0,
            "d_terminal_m",
            format!("must be positive (got {})", self.d_terminal_m),
        )?;
        require(
            self.eve_d_min_m > 0.0 && self.eve_d_max_m >= self.eve_d_min_m,
            "eve_d_min_m",
            format!(
                "band must satisfy 0 < min <= max (got [{}, {}])",
                self.eve_d_min_m, self.eve_d_max_m
            ),
        )?;
        require(self.g_max >= 1.0, "g_max_dbi", "peak gain must be at least 0 dBi".to_string())?;
        require(
            self.theta_3db_rad > 0.0,
            "theta_3db_deg",
            "beamwidth must be positive".to_string(),
        )?;
        require(
            (0.0..std::f64::consts::FRAC_PI_2).contains(&self.theta_k_rad),
            "theta_k_deg",
            "off-boresight angle must lie in [0, 90) degrees".to_string(),
        )?;
        require(self.p_max_w >= 0.0, "p_max_dbw", "power budget must be nonnegative".to_string())?;
        require(self.noise_w > 0.0, "noise_dbm", "noise power must be positive".to_string())?;
        require(
            self.noise_eve_w > 0.0,
            "noise_eve_dbm",
            "noise power must be positive".to_string(),
        )?;
        require(self.chi_0 > 0.0, "chi_0_db", "reference path loss must be positive".to_string())?;
        require(self.alpha > 0.0, "alpha", "path-loss exponent must be positive".to_string())?;
        require(self.rician_k >= 0.0, "rician_k_db", "Rician factor must be finite".to_string())?;
        require(self.eta_eh > 0.0, "eta_eh", "conversion efficiency must be positive".to_string())?;
        require(self.rho >= 0.0, "rho", format!("must be nonnegative (got {})", self.rho))?;
        // Γ = 2^r − 1 must be positive for the rate constraint to bind (and for
        // the rank-one certification argument to apply).
        require(
            self.rate_ir > 0.0,
            "rate_ir",
            format!("minimum information rate must be positive (got {})", self.rate_ir),
        )?;
        require(
            self.rate_eve > 0.0,
            "rate_eve",
            format!("leakage-rate threshold must be positive (got {})", self.rate_eve),
        )?;
        require(self.delta_0 > 0.0, "delta_0", "threshold must be positive".to_string())?;
        require(self.delta_1 > 0.0, "delta_1", "threshold must be positive".to_string())?;
        require(self.delta_2 > 0.0, "delta_2", "threshold must be positive".to_string())?;
        require(
            self.gamma_init_factor > 0.0,
            "gamma_init_factor",
            "penalty seed factor must be positive".to_string(),
        )?;
        require(
            self.gamma_growth > 1.0,
            "gamma_growth",
            format!("growth factor must exceed 1 (got {})", self.gamma_growth),
        )?;
        require(self.outer_stages >= 1, "outer_stages", "need at least one stage".to_string())?;
        require(self.inner_iters >= 1, "inner_iters", "need at least one iteration".to_string())?;
        require(self.ao_iters >= 1, "ao_iters", "need at least one iteration".to_string())?;
        require(self.feas_tol > 0.0, "feas_tol", "tolerance must be positive".to_string())?;
        require(self.gap_tol > 0.0, "gap_tol", "tolerance must be positive".to_string())?;
        require(self.ipm_iters >= 1, "ipm_iters", "need at least one iteration".to_string())?;
        require(!self.schemes.is_empty(), "schemes", "need at least one scheme".to_string())?;
        Ok(())
    }

    /// SINR threshold Γ = 2^{R_th^{IR}} − 1 for the information-rate constraint.
    pub fn gamma_ir(&self) -> f64 {
        2f64.powf(self.rate_ir) - 1.0
    }

    /// Leakage SINR threshold 2^{R_th^{Eve}} − 1.
    pub fn eta_eve(&self) -> f64 {
        2f64.powf(self.rate_eve) - 1.0
    }

    /// Interior-point solver options as configured.
    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions { feas_tol: self.feas_tol, gap_tol: self.gap_tol, max_iters: self.ipm_iters }
    }

    /// Satellite-link parameters assembled from the config.
    pub fn sat_link_params(&self) -> SatLinkParams {
        SatLinkParams {
            d_l: self.d_sat_m,
            f_c: self.f_c_hz,
            g_max: self.g_max,
            g_l_s: self.g_l_s,
            theta_k: self.theta_k_rad,
            theta_3db: self.theta_3db_rad,
            n_t: self.n_t,
            m: self.m,
        }
    }

    /// Canonical text rendering: every key in a fixed order with the stored
    /// (converted) value. Loading this text reproduces the config exactly,
    /// and its hash is the provenance fingerprint carried by all outputs.
    pub fn canonical_string(&self) -> String {
        let mut s = String::new();
        let schemes =
            self.schemes.iter().map(|sch| sch.label()).collect::<Vec<_>>().join(",");
        let sweep_axis = self.sweep_axis.map_or("none", |a| a.label());
        let sweep_values = self
            .sweep_values
            .iter()
            .map(|v| format!("{v}"))
            .collect::<Vec<_>>()
            .join(",");
        // Linear-valued keys are emitted via the inverse of the load-time
        // conversion so the canonical text stays loadable.
        let _ = writeln!(s, "n_t = {}", self.n_t);
        let _ = writeln!(s, "m = {}", self.m);
        let _ = writeln!(s, "f_c_hz = {}", self.f_c_hz);
        let _ = writeln!(s, "d_sat_m = {}", self.d_sat_m);
        let _ = writeln!(s, "d_terminal_m = {}", self.d_terminal_m);
        let _ = writeln!(s, "eve_d_min_m = {}", self.eve_d_min_m);
        let _ = writeln!(s, "eve_d_max_m = {}", self.eve_d_max_m);
        let _ = writeln!(s, "g_max_dbi = {}", 10.0 * self.g_max.log10());
        let _ = writeln!(s, "g_l_s_dbi = {}", 10.0 * self.g_l_s.log10());
        let _ = writeln!(s, "g_l_dbi = {}", 10.0 * self.g_l_fixed.log10());
        let _ = writeln!(
            s,
            "sat_gain_mode = {}",
            match self.sat_gain_mode {
                SatGainMode::Pattern => "pattern",
                SatGainMode::Fixed => "fixed",
            }
        );
        let _ = writeln!(s, "theta_3db_deg = {}", self.theta_3db_rad.to_degrees());
        let _ = writeln!(s, "theta_k_deg = {}", self.theta_k_rad.to_degrees());
        let _ = writeln!(s, "p_max_dbw = {}", 10.0 * self.p_max_w.log10());
        let _ = writeln!(s, "noise_dbm = {}", 10.0 * self.noise_w.log10() + 30.0);
        let _ = writeln!(s, "noise_eve_dbm = {}", 10.0 * self.noise_eve_w.log10() + 30.0);
        let _ = writeln!(s, "chi_0_db = {}", 10.0 * self.chi_0.log10());
        let _ = writeln!(s, "alpha = {}", self.alpha);
        let _ = writeln!(s, "rician_k_db = {}", 10.0 * self.rician_k.log10());
        let _ = writeln!(s, "eta_eh = {}", self.eta_eh);
        let _ = writeln!(s, "rho = {}", self.rho);
        let _ = writeln!(s, "rate_ir = {}", self.rate_ir);
        let _ = writeln!(s, "rate_eve = {}", self.rate_eve);
        let _ = writeln!(s, "delta_0 = {}", self.delta_0);
        let _ = writeln!(s, "delta_1 = {}", self.delta_1);
        let _ = writeln!(s, "delta_2 = {}", self.delta_2);
        let _ = writeln!(s, "gamma_init_factor = {}", self.gamma_init_factor);
        let _ = writeln!(s, "gamma_growth = {}", self.gamma_growth);
        let _ = writeln!(s, "outer_stages = {}", self.outer_stages);
        let _ = writeln!(s, "inner_iters = {}", self.inner_iters);
        let _ = writeln!(s, "ao_iters = {}", self.ao_iters);
        let _ = writeln!(s, "feas_tol = {}", self.feas_tol);
        let _ = writeln!(s, "gap_tol = {}", self.gap_tol);
        let _ = writeln!(s, "ipm_iters = {}", self.ipm_iters);
        let _ = writeln!(s, "trials = {}", self.trials);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "schemes = {}", schemes);
        let _ = writeln!(
            s,
            "objective_mode = {}",
            match self.objective_mode {
                ObjectiveMode::Min => "min",
                ObjectiveMode::Sum => "sum",
            }
        );
        let _ = writeln!(s, "secrecy = {}", if self.secrecy { "on" } else { "off" });
        let _ = writeln!(s, "quant_bits = {}", self.quant_bits);
        let _ = writeln!(s, "sweep_axis = {}", sweep_axis);
        let _ = writeln!(s, "sweep_values = {}", sweep_values);
        s
    }

    /// Provenance fingerprint: first 16 hex digits of the SHA-256 of the
    /// canonical rendering.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.canonical_string().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn defaults_match_reference_setup() {
        let c = SystemConfig::default();
        assert_eq!(c.n_t, 4);
        assert_eq!(c.m, 20);
        assert_relative_eq!(c.p_max_w, 100.0, max_relative = 1e-12);
        assert_relative_eq!(c.f_c_hz, 17.7e9);
        assert_relative_eq!(c.noise_w, 1e-20, max_relative = 1e-10);
        assert_relative_eq!(c.noise_eve_w, 1e-20, max_relative = 1e-10);
        assert_relative_eq!(c.g_max, 10f64.powf(5.2), max_relative = 1e-12);
        assert_relative_eq!(c.g_l_s, 10f64.powf(0.35), max_relative = 1e-12);
        assert_relative_eq!(c.g_l_fixed, 10f64.powf(3.4), max_relative = 1e-12);
        assert_relative_eq!(c.alpha, 2.2);
        assert_relative_eq!(c.rician_k, 10f64.powf(0.5), max_relative = 1e-12);
        assert_relative_eq!(c.d_sat_m, 340e3);
        assert_relative_eq!(c.d_terminal_m, 10.0);
        assert_relative_eq!(c.rate_ir, 1.0);
        assert_relative_eq!(c.rate_eve, 1.0);
        assert_relative_eq!(c.gamma_ir(), 1.0);
        assert_relative_eq!(c.eta_eve(), 1.0);
        assert_relative_eq!(c.delta_0, 1e-5);
        assert_relative_eq!(c.delta_1, 1e-7);
        assert_relative_eq!(c.delta_2, 1e-7);
        assert_eq!(c.ao_iters, 30);
        assert_eq!(c.inner_iters, 20);
    }

    #[test]
    fn empty_text_gives_defaults() {
        let parsed = SystemConfig::parse("").unwrap();
        assert_eq!(parsed, SystemConfig::default());
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let parsed = SystemConfig::parse("# a comment\n\n  \nm = 10  # inline\n").unwrap();
        assert_eq!(parsed.m, 10);
    }

    #[test]
    fn db_conversions_happen_at_the_boundary() {
        let parsed = SystemConfig::parse("p_max_dbw = 20\nnoise_dbm = -170\nchi_0_db = -30\n")
            .unwrap();
        assert_relative_eq!(parsed.p_max_w, 100.0, max_relative = 1e-12);
        assert_relative_eq!(parsed.noise_w, 1e-20, max_relative = 1e-10);
        assert_relative_eq!(parsed.chi_0, 1e-3, max_relative = 1e-12);
    }

    #[test]
    fn unknown_key_rejected_with_name_and_line() {
        let err = SystemConfig::parse("m = 20\nbogus_key = 1\n").unwrap_err();
        match err {
            ConfigError::UnknownKey { line, key } => {
                assert_eq!(line, 2);
                assert_eq!(key, "bogus_key");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn negative_element_count_rejected() {
        let err = SystemConfig::parse("m = -1\n").unwrap_err();
        match err {
            ConfigError::BadValue { key, .. } => assert_eq!(key, "m"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn zero_rate_threshold_rejected() {
        let err = SystemConfig::parse("rate_ir = 0\n").unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { key: "rate_ir", .. }));
    }

    #[test]
    fn malformed_line_reports_position() {
        let err = SystemConfig::parse("m = 20\nnot a kv pair\n").unwrap_err();
        assert!(matches!(err, ConfigError::Malformed { line: 2, .. }));
    }

    #[test]
    fn scheme_and_mode_parsing() {
        let parsed = SystemConfig::parse(
            "schemes = es, cris\nobjective_mode = sum\nsecrecy = off\nquant_bits = 4\n",
        )
        .unwrap();
        assert_eq!(parsed.schemes, vec![Scheme::Es, Scheme::Cris]);
        assert_eq!(parsed.objective_mode, ObjectiveMode::Sum);
        assert!(!parsed.secrecy);
        assert_eq!(parsed.quant_bits, 4);
    }

    #[test]
    fn canonical_string_roundtrips() {
        let mut config = SystemConfig::default();
        config.rho = 0.05;
        config.m = 30;
        config.schemes = vec![Scheme::Ues];
        config.sweep_axis = Some(SweepAxis::Rho);
        config.sweep_values = vec![0.0, 0.01, 0.05];
        let reparsed = SystemConfig::parse(&config.canonical_string()).unwrap();
        assert_eq!(reparsed.m, config.m);
        assert_eq!(reparsed.schemes, config.schemes);
        assert_eq!(reparsed.sweep_axis, config.sweep_axis);
        assert_eq!(reparsed.sweep_values, config.sweep_values);
        assert_relative_eq!(reparsed.rho, config.rho);
        assert_relative_eq!(reparsed.p_max_w, config.p_max_w, max_relative = 1e-12);
        assert_relative_eq!(reparsed.noise_w, config.noise_w, max_relative = 1e-10);
        // The fingerprint of the round-tripped config must be identical.
        assert_eq!(reparsed.fingerprint(), config.fingerprint());
    }

    #[test]
    fn fingerprint_distinguishes_configs() {
        let a = SystemConfig::default();
        let mut b = SystemConfig::default();
        b.rho = 0.05;
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().len(), 16);
        assert_eq!(a.fingerprint(), SystemConfig::default().fingerprint());
    }
}
