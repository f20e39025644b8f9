//! Named initial data.
//!
//! Presets are addressed by strings such as `zero`, `peakon(1)`,
//! `antipeakon(0.5)`, `peakon_pair(1,-1)` (crests at ∓2) or
//! `peakon_pair(1,-1,3)` (crests at ∓3), and `gaussian(1,2)` for
//! `a·exp(−x²/w²)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::initmap::InitialData;

/// Default crest offset of `peakon_pair`: crests at `∓2`.
pub const DEFAULT_PAIR_OFFSET: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preset {
    Zero,
    /// `c·e^{−|x|}`.
    Peakon {
        c: f64,
    },
    /// `−c·e^{−|x|}`.
    Antipeakon {
        c: f64,
    },
    /// `c·e^{−|x+offset|} + d·e^{−|x−offset|}`.
    PeakonPair {
        c: f64,
        d: f64,
        offset: f64,
    },
    /// `a·exp(−x²/w²)`.
    Gaussian {
        a: f64,
        w: f64,
    },
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl Preset {
    /// Evaluators for `u₀` and `(u₀)_x` on `[−L, L]`.
    ///
    /// At a crest the derivative is taken as the mean of the one-sided limits.
    pub fn initial_data(&self, half_width: f64) -> Result<InitialData> {
        let label = self.to_string();
        let data = match *self {
            Preset::Zero => InitialData::new(|_| 0.0, half_width, label)?.with_derivative(|_| 0.0),
            Preset::Peakon { c } | Preset::Antipeakon { c } => {
                let c = if matches!(self, Preset::Peakon { .. }) { c } else { -c };
                InitialData::new(move |x: f64| c * (-x.abs()).exp(), half_width, label)?
                    .with_derivative(move |x: f64| -c * sign(x) * (-x.abs()).exp())
            }
            Preset::PeakonPair { c, d, offset } => InitialData::new(
                move |x: f64| c * (-(x + offset).abs()).exp() + d * (-(x - offset).abs()).exp(),
                half_width,
                label,
            )?
            .with_derivative(move |x: f64| {
                -c * sign(x + offset) * (-(x + offset).abs()).exp() - d * sign(x - offset) * (-(x - offset).abs()).exp()
            }),
            Preset::Gaussian { a, w } => {
                if !(w > 0.0) {
                    return Err(Error::InvalidData(format!("gaussian width must be positive, got {w}")));
                }
                InitialData::new(move |x: f64| a * (-(x * x) / (w * w)).exp(), half_width, label)?
                    .with_derivative(move |x: f64| -2.0 * a * x / (w * w) * (-(x * x) / (w * w)).exp())
            }
        };
        Ok(data)
    }

    /// The exact solution of the unforced equation where one is known in closed form
    /// (the zero solution and single traveling peakons).
    pub fn exact_unforced(&self) -> Option<Box<dyn Fn(f64, f64) -> f64 + Send + Sync>> {
        match *self {
            Preset::Zero => Some(Box::new(|_, _| 0.0)),
            Preset::Peakon { c } => Some(Box::new(move |t, x| c * (-(x - c * t).abs()).exp())),
            Preset::Antipeakon { c } => {
                // −c·e^{−|x|} is the traveling wave of speed −c.
                Some(Box::new(move |t, x| -c * (-(x + c * t).abs()).exp()))
            }
            _ => None,
        }
    }
}

/// Smooth bump `exp(−1/(1−r²))`, `r = (x − center)/width`, supported on `|r| < 1`;
/// used as an initial-data perturbation.
pub fn bump_data(center: f64, width: f64, half_width: f64) -> Result<InitialData> {
    if !(width > 0.0) {
        return Err(Error::InvalidData(format!("bump width must be positive, got {width}")));
    }
    let r = move |x: f64| (x - center) / width;
    let b = |r: f64| {
        let q = 1.0 - r * r;
        if q > 0.0 {
            (-1.0 / q).exp()
        } else {
            0.0
        }
    };
    Ok(
        InitialData::new(move |x| b(r(x)), half_width, format!("bump({center},{width})"))?.with_derivative(move |x| {
            let rr = r(x);
            let q = 1.0 - rr * rr;
            if q > 0.0 {
                b(rr) * (-2.0 * rr / (q * q)) / width
            } else {
                0.0
            }
        }),
    )
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Preset::Zero => write!(f, "zero"),
            Preset::Peakon { c } => write!(f, "peakon({c})"),
            Preset::Antipeakon { c } => write!(f, "antipeakon({c})"),
            Preset::PeakonPair { c, d, offset } => {
                if offset == DEFAULT_PAIR_OFFSET {
                    write!(f, "peakon_pair({c},{d})")
                } else {
                    write!(f, "peakon_pair({c},{d},{offset})")
                }
            }
            Preset::Gaussian { a, w } => write!(f, "gaussian({a},{w})"),
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let (name, args) = match s.find('(') {
            Some(open) => {
                let close = s
                    .strip_suffix(')')
                    .ok_or_else(|| Error::Usage(format!("missing ')' in preset {s:?}")))?;
                let inner = &close[open + 1..];
                let args = if inner.is_empty() {
                    Vec::new()
                } else {
                    inner
                        .split(',')
                        .map(|a| {
                            a.parse::<f64>()
                                .map_err(|_| Error::Usage(format!("bad number {a:?} in preset {s:?}")))
                        })
                        .collect::<Result<Vec<_>>>()?
                };
                (&s[..open], args)
            }
            None => (s.as_str(), Vec::new()),
        };
        let arity = |lo: usize, hi: usize| {
            if args.len() < lo || args.len() > hi {
                Err(Error::Usage(format!(
                    "preset {name} takes {lo}..={hi} arguments, got {}",
                    args.len()
                )))
            } else {
                Ok(())
            }
        };
        match name {
            "zero" => {
                arity(0, 0)?;
                Ok(Preset::Zero)
            }
            "peakon" => {
                arity(0, 1)?;
                Ok(Preset::Peakon {
                    c: args.first().copied().unwrap_or(1.0),
                })
            }
            "antipeakon" => {
                arity(0, 1)?;
                Ok(Preset::Antipeakon {
                    c: args.first().copied().unwrap_or(1.0),
                })
            }
            "peakon_pair" => {
                arity(2, 3)?;
                Ok(Preset::PeakonPair {
                    c: args[0],
                    d: args[1],
                    offset: args.get(2).copied().unwrap_or(DEFAULT_PAIR_OFFSET),
                })
            }
            "gaussian" => {
                arity(0, 2)?;
                Ok(Preset::Gaussian {
                    a: args.first().copied().unwrap_or(1.0),
                    w: args.get(1).copied().unwrap_or(1.0),
                })
            }
            other => Err(Error::Usage(format!("unknown preset {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn parse_round_trip() {
        for text in [
            "zero",
            "peakon(1)",
            "antipeakon(0.5)",
            "peakon_pair(1,-1)",
            "gaussian(1,2)",
        ] {
            let p: Preset = text.parse().unwrap();
            assert_eq!(p.to_string(), text);
        }
        assert_eq!(
            "peakon_pair(1, -1, 3)".parse::<Preset>().unwrap(),
            Preset::PeakonPair {
                c: 1.0,
                d: -1.0,
                offset: 3.0
            }
        );
        assert!("peakon(1,2)".parse::<Preset>().is_err());
        assert!("soliton(1)".parse::<Preset>().is_err());
        assert!("gaussian(1,x)".parse::<Preset>().is_err());
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let presets = [
            Preset::Peakon { c: 1.3 },
            Preset::Antipeakon { c: 0.7 },
            Preset::PeakonPair {
                c: 1.0,
                d: -1.0,
                offset: 2.0,
            },
            Preset::Gaussian { a: 1.0, w: 2.0 },
        ];
        for p in presets {
            let data = p.initial_data(20.0).unwrap();
            for &x in &[-3.1, -0.7, 0.4, 2.9] {
                let h = 1e-6;
                let fd = (data.value(x + h) - data.value(x - h)) / (2.0 * h);
                assert_relative_eq!(data.derivative(x, h), fd, max_relative = 1e-6, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn bump_is_compact_with_matching_derivative() {
        let b = bump_data(1.0, 2.0, 20.0).unwrap();
        assert_eq!(b.value(3.5), 0.0);
        assert_eq!(b.value(-1.0), 0.0);
        assert_relative_eq!(b.value(1.0), (-1.0_f64).exp());
        let h = 1e-6;
        let fd = (b.value(1.7 + h) - b.value(1.7 - h)) / (2.0 * h);
        assert_relative_eq!(b.derivative(1.7, h), fd, max_relative = 1e-6);
        assert!(bump_data(0.0, 0.0, 20.0).is_err());
    }

    #[test]
    fn traveling_waves_start_from_the_preset() {
        for p in [Preset::Peakon { c: 1.0 }, Preset::Antipeakon { c: 2.0 }, Preset::Zero] {
            let exact = p.exact_unforced().unwrap();
            let data = p.initial_data(20.0).unwrap();
            for &x in &[-1.0, 0.0, 0.3] {
                assert_eq!(exact(0.0, x), data.value(x));
            }
        }
        assert!(Preset::Gaussian { a: 1.0, w: 2.0 }.exact_unforced().is_none());
    }
}
