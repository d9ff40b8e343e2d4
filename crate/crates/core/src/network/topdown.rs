use std::fmt;
use std::str::FromStr;

use crate::error::{Result, WtaError};

/// Parameters of the adaptive top-down factor
/// `phi = a + b * S^p`, capped at `cap`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhiParams {
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub cap: f64,
    /// Evaluate `max(a + b S^p, cap)` as printed instead of the capped form.
    pub literal_max: bool,
}

impl Default for PhiParams {
    fn default() -> Self {
        PhiParams {
            a: 1.5,
            b: 0.3,
            p: 1.3,
            cap: 3.0,
            literal_max: false,
        }
    }
}

/// How a circuit scales the top-down spikes it receives.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum TdPolicy {
    /// Unscaled (factor 1).
    #[default]
    Off,
    Constant(f64),
    /// Per sending neuron, from its spike count for the current stimulus.
    Adaptive(PhiParams),
}

impl TdPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TdPolicy::Off => Ok(()),
            TdPolicy::Constant(k) if k >= 0.0 && k.is_finite() => Ok(()),
            TdPolicy::Constant(k) => Err(WtaError::config(format!("invalid top-down factor {k}"))),
            TdPolicy::Adaptive(phi) => {
                if phi.cap < phi.a || phi.a < 0.0 || phi.b < 0.0 {
                    Err(WtaError::config("adaptive top-down needs 0 <= a <= cap and b >= 0"))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Scale applied to a top-down spike from a neuron that has fired
/// `stimulus_spikes` times during the current stimulus.
pub fn td_factor(policy: &TdPolicy, stimulus_spikes: u32) -> f64 {
    match *policy {
        TdPolicy::Off => 1.0,
        TdPolicy::Constant(k) => k,
        TdPolicy::Adaptive(phi) => {
            let raw = phi.a + phi.b * (stimulus_spikes as f64).powf(phi.p);
            if phi.literal_max {
                raw.max(phi.cap)
            } else {
                raw.min(phi.cap)
            }
        }
    }
}

impl fmt::Display for TdPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TdPolicy::Off => write!(f, "off"),
            TdPolicy::Constant(k) => write!(f, "x{k}"),
            TdPolicy::Adaptive(phi) if *phi == PhiParams::default() => write!(f, "phi"),
            TdPolicy::Adaptive(phi) => write!(
                f,
                "phi:{}:{}:{}:{}:{}",
                phi.a,
                phi.b,
                phi.p,
                phi.cap,
                if phi.literal_max { "max" } else { "min" }
            ),
        }
    }
}

impl FromStr for TdPolicy {
    type Err = WtaError;

    /// Accepts `off`, `x<factor>`, `phi`, `phi-max`, and
    /// `phi:<a>:<b>:<p>:<cap>:<min|max>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || WtaError::config(format!("unrecognised top-down policy '{s}'"));
        let policy = match s {
            "off" => TdPolicy::Off,
            "phi" => TdPolicy::Adaptive(PhiParams::default()),
            "phi-max" => TdPolicy::Adaptive(PhiParams {
                literal_max: true,
                ..PhiParams::default()
            }),
            _ if s.starts_with('x') => TdPolicy::Constant(s[1..].parse().map_err(|_| bad())?),
            _ if s.starts_with("phi:") => {
                let parts: Vec<&str> = s[4..].split(':').collect();
                if parts.len() != 5 {
                    return Err(bad());
                }
                let num = |i: usize| parts[i].parse::<f64>().map_err(|_| bad());
                let literal_max = match parts[4] {
                    "max" => true,
                    "min" => false,
                    _ => return Err(bad()),
                };
                TdPolicy::Adaptive(PhiParams {
                    a: num(0)?,
                    b: num(1)?,
                    p: num(2)?,
                    cap: num(3)?,
                    literal_max,
                })
            }
            _ => return Err(bad()),
        };
        policy.validate()?;
        Ok(policy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fixed_modes() {
        assert_eq!(td_factor(&TdPolicy::Off, 12), 1.0);
        assert_eq!(td_factor(&TdPolicy::Constant(2.0), 0), 2.0);
    }

    #[test]
    fn adaptive_capped() {
        let phi = TdPolicy::Adaptive(PhiParams::default());
        assert_eq!(td_factor(&phi, 0), 1.5);
        assert_abs_diff_eq!(td_factor(&phi, 1), 1.8, epsilon = 1e-12);
        // 1.5 + 0.3 * 4^1.3 = 3.3189...
        assert_abs_diff_eq!(1.5 + 0.3 * 4f64.powf(1.3), 3.3189, epsilon = 1e-4);
        assert_eq!(td_factor(&phi, 4), 3.0);
        assert_eq!(td_factor(&phi, 400), 3.0);
        let mut last = 0.0;
        for s in 0..20 {
            let v = td_factor(&phi, s);
            assert!(v >= last && (1.5..=3.0).contains(&v));
            last = v;
        }
    }

    #[test]
    fn adaptive_literal_max_never_below_cap() {
        let phi = TdPolicy::Adaptive(PhiParams {
            literal_max: true,
            ..PhiParams::default()
        });
        assert_eq!(td_factor(&phi, 0), 3.0);
        assert!(td_factor(&phi, 10) > 3.0);
    }

    #[test]
    fn text_round_trip() {
        for s in ["off", "x1", "x2.5", "phi", "phi:1.5:0.3:1.3:3:max", "phi:1:0.2:1:2:min"] {
            let p: TdPolicy = s.parse().unwrap();
            assert_eq!(p.to_string().parse::<TdPolicy>().unwrap(), p);
        }
        assert_eq!("phi-max".parse::<TdPolicy>().unwrap().to_string(), "phi:1.5:0.3:1.3:3:max");
        assert!("x-1".parse::<TdPolicy>().is_err());
        assert!("sideways".parse::<TdPolicy>().is_err());
    }
}
