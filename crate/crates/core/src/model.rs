//! Model specifications for the harness and CLI.
//!
//! A model is described by a short `key=value` string, inline or in a file:
//!
//! ```text
//! ar1 phi=0.6 sigma2=1
//! ma1 theta=0.5
//! white sigma2=2
//! r_0=1 r_1=0.5 tail=0
//! ```
//!
//! Tokens split on whitespace and commas; the leading bare word (or a
//! `model=` token) picks a preset, and raw `r_<lag>=` tokens define a custom
//! sequence. Two optional keys configure the analysis rather than the
//! process: `m=` overrides the spectral floor used for regularization
//! (default: the certified lower bound of the model's spectral density) and
//! `s=` sets the smoothness index used by window rules and reference bounds
//! (default 1).

use crate::spectral_model::{covariance_to_spectrum, CovarianceSequence, SpectralDensity};
use crate::{Error, Result};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct ModelSpec {
    cov: CovarianceSequence,
    label: String,
    floor_override: Option<f64>,
    sobolev_index: f64,
}

impl ModelSpec {
    /// Reads `arg` as a file path when such a file exists, otherwise parses
    /// it as an inline model string.
    pub fn load(arg: &str) -> Result<Self> {
        if Path::new(arg).is_file() {
            let text = std::fs::read_to_string(arg)?;
            let stripped: Vec<&str> = text
                .lines()
                .map(|l| l.split('#').next().unwrap_or(""))
                .collect();
            Self::parse(&stripped.join(" "))
        } else {
            Self::parse(arg)
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let tokens: Vec<&str> = text
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .collect();
        if tokens.is_empty() {
            return Err(Error::Parse("empty model specification".into()));
        }

        let mut name: Option<String> = None;
        let mut params: BTreeMap<String, f64> = BTreeMap::new();
        let mut raw_lags: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, tok) in tokens.iter().enumerate() {
            match tok.split_once('=') {
                None if i == 0 => name = Some(tok.to_string()),
                None => return Err(Error::Parse(format!("expected key=value, got {tok:?}"))),
                Some(("model", v)) => name = Some(v.to_string()),
                Some((key, v)) => {
                    let value: f64 = v
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad number for {key}: {v:?}")))?;
                    if let Some(lag) = key.strip_prefix("r_") {
                        let lag: usize = lag
                            .parse()
                            .map_err(|_| Error::Parse(format!("bad lag index in {tok:?}")))?;
                        raw_lags.insert(lag, value);
                    } else {
                        params.insert(key.to_string(), value);
                    }
                }
            }
        }

        let floor_override = params.remove("m");
        if let Some(m) = floor_override {
            if !(m > 0.0) {
                return Err(Error::Parse(format!("floor m must be positive, got {m}")));
            }
        }
        let sobolev_index = params.remove("s").unwrap_or(1.0);
        if !(sobolev_index >= 1.0) {
            return Err(Error::Parse(format!(
                "smoothness s must be at least 1, got {sobolev_index}"
            )));
        }

        if !raw_lags.is_empty() && !matches!(name.as_deref(), None | Some("custom")) {
            return Err(Error::Parse(format!(
                "raw r_<lag>= values cannot be combined with model {:?}",
                name.unwrap()
            )));
        }
        let take = |params: &mut BTreeMap<String, f64>, key: &str| params.remove(key);
        let (cov, mut label) = if !raw_lags.is_empty() {
            let max_lag = *raw_lags.keys().last().unwrap();
            if !raw_lags.contains_key(&0) {
                return Err(Error::Parse("custom model needs r_0=".into()));
            }
            let mut values = vec![0.0; max_lag + 1];
            for (lag, v) in &raw_lags {
                values[*lag] = *v;
            }
            let tail = take(&mut params, "tail").unwrap_or(0.0);
            let label = values
                .iter()
                .enumerate()
                .map(|(i, v)| format!("r_{i}={v}"))
                .collect::<Vec<_>>()
                .join(" ");
            (CovarianceSequence::new(values, tail)?, label)
        } else {
            match name.as_deref() {
                Some("white") => {
                    let sigma2 = take(&mut params, "sigma2").unwrap_or(1.0);
                    (CovarianceSequence::white(sigma2)?, format!("white sigma2={sigma2}"))
                }
                Some("ar1") => {
                    let phi = take(&mut params, "phi")
                        .ok_or_else(|| Error::Parse("ar1 needs phi=".into()))?;
                    let sigma2 = take(&mut params, "sigma2").unwrap_or(1.0);
                    (CovarianceSequence::ar1(phi, sigma2)?, format!("ar1 phi={phi} sigma2={sigma2}"))
                }
                Some("ma1") => {
                    let theta = take(&mut params, "theta")
                        .ok_or_else(|| Error::Parse("ma1 needs theta=".into()))?;
                    let sigma2 = take(&mut params, "sigma2").unwrap_or(1.0);
                    (CovarianceSequence::ma1(theta, sigma2)?, format!("ma1 theta={theta} sigma2={sigma2}"))
                }
                Some("custom") => return Err(Error::Parse("custom model needs r_0=".into())),
                Some(other) => {
                    return Err(Error::Parse(format!(
                        "unknown model {other:?}; expected white, ar1, ma1, or r_<lag>= values"
                    )))
                }
                None => return Err(Error::Parse("model specification names no model".into())),
            }
        };
        if let Some(key) = params.keys().next() {
            return Err(Error::Parse(format!("unknown key {key:?} for model {label:?}")));
        }

        if let Some(m) = floor_override {
            label = format!("{label} m={m}");
        }
        if sobolev_index != 1.0 {
            label = format!("{label} s={sobolev_index}");
        }
        Ok(Self { cov, label, floor_override, sobolev_index })
    }

    pub fn cov(&self) -> &CovarianceSequence {
        &self.cov
    }

    /// Canonical echo of the parsed model, used in CSV metadata.
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn sobolev_index(&self) -> f64 {
        self.sobolev_index
    }

    /// The model's spectral density with its certified band.
    pub fn spectrum(&self) -> Result<SpectralDensity> {
        covariance_to_spectrum(&self.cov, self.sobolev_index)
    }

    /// The floor `m` fed to the regularizer: the explicit `m=` override, or
    /// the certified lower bound of the true spectrum.
    pub fn spectral_floor(&self) -> Result<f64> {
        match self.floor_override {
            Some(m) => Ok(m),
            None => Ok(self.spectrum()?.lower_bound()),
        }
    }

    pub fn floor_override(&self) -> Option<f64> {
        self.floor_override
    }
}
