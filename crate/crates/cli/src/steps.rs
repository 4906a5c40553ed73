use std::fmt;
use std::str::FromStr;

/// An iteration budget, either absolute (`500`) or in epochs (`10n`, `2.5n`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Steps {
    Absolute(usize),
    Epochs(f64),
}

impl Steps {
    pub fn resolve(&self, n: usize) -> usize {
        match *self {
            Steps::Absolute(k) => k,
            Steps::Epochs(e) => (e * n as f64).round() as usize,
        }
    }
}

impl FromStr for Steps {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if let Some(factor) = s.strip_suffix('n') {
            let factor = if factor.is_empty() { "1" } else { factor };
            let e: f64 = factor
                .parse()
                .map_err(|_| format!("bad step count `{s}`"))?;
            if !(e.is_finite() && e > 0.0) {
                return Err(format!("step count `{s}` must be positive"));
            }
            return Ok(Steps::Epochs(e));
        }
        match s.parse::<usize>() {
            Ok(0) | Err(_) => Err(format!("bad step count `{s}`, expected e.g. 500 or 10n")),
            Ok(k) => Ok(Steps::Absolute(k)),
        }
    }
}

impl fmt::Display for Steps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Steps::Absolute(k) => write!(f, "{k}"),
            Steps::Epochs(e) => write!(f, "{e}n"),
        }
    }
}
