use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Kernel family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    /// exp of the closed-form multinomial likelihood inner product.
    SensingExact,
    /// Log of the closed-form kernel.
    Sensing0,
    /// Log-kernel on frequencies scaled to a fixed pseudo-length `n`.
    Sensing1,
    /// Log-kernel on documents resampled to exactly `N` words.
    Sensing2,
    Rbf,
    Ppk,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::SensingExact => "exact",
            KernelFamily::Sensing0 => "sensing0",
            KernelFamily::Sensing1 => "sensing1",
            KernelFamily::Sensing2 => "sensing2",
            KernelFamily::Rbf => "rbf",
            KernelFamily::Ppk => "ppk",
        }
    }
}

/// A kernel family plus its hyperparameters.
///
/// Only the parameters relevant to `family` take part in evaluation, in the
/// canonical string form and in the fingerprint.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    /// Sensing 1 pseudo-length.
    pub n: u32,
    /// Sensing 2 resample length.
    pub resample_n: u32,
    /// Sensing 2 resampling seed.
    pub seed: u64,
    /// RBF bandwidth.
    pub sigma: f64,
    /// PPK power.
    pub ppk_rho: f64,
    /// Per-level pyramid weights; empty when no pyramid composition is used.
    pub pyramid_weights: Vec<f64>,
}

impl KernelSpec {
    fn base(family: KernelFamily) -> Self {
        KernelSpec {
            family,
            n: 150,
            resample_n: 150,
            seed: 0,
            sigma: 1.0,
            ppk_rho: 1.0,
            pyramid_weights: Vec::new(),
        }
    }

    pub fn exact() -> Self {
        Self::base(KernelFamily::SensingExact)
    }

    pub fn sensing0() -> Self {
        Self::base(KernelFamily::Sensing0)
    }

    pub fn sensing1(n: u32) -> Self {
        KernelSpec {
            n,
            ..Self::base(KernelFamily::Sensing1)
        }
    }

    pub fn sensing2(resample_n: u32, seed: u64) -> Self {
        KernelSpec {
            resample_n,
            seed,
            ..Self::base(KernelFamily::Sensing2)
        }
    }

    pub fn rbf(sigma: f64) -> Self {
        KernelSpec {
            sigma,
            ..Self::base(KernelFamily::Rbf)
        }
    }

    pub fn ppk(rho: f64) -> Self {
        KernelSpec {
            ppk_rho: rho,
            ..Self::base(KernelFamily::Ppk)
        }
    }

    pub fn with_pyramid(mut self, weights: Vec<f64>) -> Self {
        self.pyramid_weights = weights;
        self
    }

    /// Same spec without pyramid composition (the per-cell base kernel).
    pub fn base_kernel(&self) -> KernelSpec {
        KernelSpec {
            pyramid_weights: Vec::new(),
            ..self.clone()
        }
    }

    pub fn is_pyramid(&self) -> bool {
        !self.pyramid_weights.is_empty()
    }

    /// Pyramid depth L, when pyramid weights are set.
    pub fn pyramid_levels(&self) -> Option<usize> {
        self.pyramid_weights.len().checked_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        match self.family {
            KernelFamily::Sensing1 if self.n == 0 => {
                return Err(Error::usage("sensing1 requires n > 0"))
            }
            KernelFamily::Sensing2 if self.resample_n == 0 => {
                return Err(Error::usage("sensing2 requires N > 0"))
            }
            KernelFamily::Rbf if !(self.sigma > 0.0 && self.sigma.is_finite()) => {
                return Err(Error::usage(format!(
                    "rbf requires sigma > 0, got {}",
                    self.sigma
                )))
            }
            KernelFamily::Ppk if !(self.ppk_rho > 0.0 && self.ppk_rho.is_finite()) => {
                return Err(Error::usage(format!(
                    "ppk requires rho > 0, got {}",
                    self.ppk_rho
                )))
            }
            _ => {}
        }
        if self
            .pyramid_weights
            .iter()
            .any(|w| !(*w >= 0.0 && w.is_finite()))
        {
            return Err(Error::usage(
                "pyramid weights must be finite and non-negative",
            ));
        }
        Ok(())
    }

    /// SHA-256 of the canonical string form.
    pub fn fingerprint(&self) -> [u8; 32] {
        Sha256::digest(self.to_string().as_bytes()).into()
    }

    pub fn fingerprint_hex(&self) -> String {
        hex::encode(self.fingerprint())
    }
}

/// Canonical form, e.g. `sensing1:n=150`, `sensing2:N=500,seed=7`,
/// `rbf:sigma=0.25`, `exact;pyramid=0.25,0.25,0.5`.
impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.family.name())?;
        match self.family {
            KernelFamily::SensingExact | KernelFamily::Sensing0 => {}
            KernelFamily::Sensing1 => write!(f, ":n={}", self.n)?,
            KernelFamily::Sensing2 => write!(f, ":N={},seed={}", self.resample_n, self.seed)?,
            KernelFamily::Rbf => write!(f, ":sigma={:?}", self.sigma)?,
            KernelFamily::Ppk => write!(f, ":rho={:?}", self.ppk_rho)?,
        }
        if self.is_pyramid() {
            f.write_str(";pyramid=")?;
            for (i, w) in self.pyramid_weights.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{w:?}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kernel, pyramid) = match s.split_once(';') {
            Some((k, p)) => (k, Some(p)),
            None => (s, None),
        };
        let (name, params) = match kernel.split_once(':') {
            Some((n, p)) => (n.trim(), p),
            None => (kernel.trim(), ""),
        };
        let mut spec = match name {
            "exact" => KernelSpec::exact(),
            "sensing0" => KernelSpec::sensing0(),
            "sensing1" => KernelSpec::base(KernelFamily::Sensing1),
            "sensing2" => KernelSpec::base(KernelFamily::Sensing2),
            "rbf" => KernelSpec::base(KernelFamily::Rbf),
            "ppk" => KernelSpec::base(KernelFamily::Ppk),
            other => return Err(Error::usage(format!("unknown kernel family '{other}'"))),
        };
        let mut saw_seed = false;
        let mut saw_required = matches!(
            spec.family,
            KernelFamily::SensingExact | KernelFamily::Sensing0 | KernelFamily::Ppk
        );
        for kv in params.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::usage(format!("malformed kernel parameter '{kv}'")))?;
            let bad = || Error::usage(format!("bad value for kernel parameter '{kv}'"));
            match (spec.family, k.trim()) {
                (KernelFamily::Sensing1, "n") => {
                    spec.n = v.parse().map_err(|_| bad())?;
                    saw_required = true;
                }
                (KernelFamily::Sensing2, "N") => {
                    spec.resample_n = v.parse().map_err(|_| bad())?;
                    saw_required = true;
                }
                (KernelFamily::Sensing2, "seed") => {
                    spec.seed = v.parse().map_err(|_| bad())?;
                    saw_seed = true;
                }
                (KernelFamily::Rbf, "sigma") => {
                    spec.sigma = v.parse().map_err(|_| bad())?;
                    saw_required = true;
                }
                (KernelFamily::Ppk, "rho") => spec.ppk_rho = v.parse().map_err(|_| bad())?,
                (_, key) => {
                    return Err(Error::usage(format!(
                        "parameter '{key}' does not apply to kernel '{name}'"
                    )))
                }
            }
        }
        if !saw_required {
            return Err(Error::usage(format!(
                "kernel '{name}' is missing its size/bandwidth parameter"
            )));
        }
        if spec.family == KernelFamily::Sensing2 && !saw_seed {
            return Err(Error::usage(
                "sensing2 requires an explicit seed (sensing2:N=..,seed=..)",
            ));
        }
        if let Some(p) = pyramid {
            let weights = p.trim().strip_prefix("pyramid=").ok_or_else(|| {
                Error::usage(format!("expected 'pyramid=...' after ';' in '{s}'"))
            })?;
            spec.pyramid_weights = weights
                .split(',')
                .map(|w| w.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::usage(format!("bad pyramid weights '{weights}'")))?;
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_round_trip() {
        for s in [
            "exact",
            "sensing0",
            "sensing1:n=150",
            "sensing2:N=500,seed=42",
            "rbf:sigma=0.125",
            "ppk:rho=0.5",
            "sensing0;pyramid=0.25,0.25,0.5",
        ] {
            let spec: KernelSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        let ppk: KernelSpec = "ppk".parse().unwrap();
        assert_eq!(ppk.ppk_rho, 1.0);
    }

    #[test]
    fn irrelevant_parameters_do_not_change_fingerprint() {
        let mut a = KernelSpec::sensing1(150);
        let b = a.clone();
        a.sigma = 99.0;
        a.seed = 7;
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.fingerprint(), KernelSpec::sensing1(151).fingerprint());
    }

    #[test]
    fn parse_errors() {
        assert!("sensing2:N=150".parse::<KernelSpec>().is_err());
        assert!("sensing1".parse::<KernelSpec>().is_err());
        assert!("rbf:sigma=-1".parse::<KernelSpec>().is_err());
        assert!("exact:n=3".parse::<KernelSpec>().is_err());
        assert!("laplace".parse::<KernelSpec>().is_err());
        assert!("exact;weights=1".parse::<KernelSpec>().is_err());
    }
}
