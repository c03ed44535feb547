//! Log-domain scalars for determinant-scale arithmetic.
//!
//! Sums of powers of principal minors grow like `exp(c l)` and overflow
//! native floats long before the enumeration ceiling, so every determinant
//! and every partial sum is carried as `(log-magnitude, phase)`.

use num_complex::Complex64;
use std::f64::consts::PI;

/// A scalar stored as `exp(log_mag) * exp(i * phase)`.
///
/// The exact zero is represented by `log_mag = -inf`, `phase = 0`. Phases of
/// real values are kept exactly in `{0, pi}` so that sign bookkeeping through
/// products, powers and signed sums never drifts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogSigned {
    pub log_mag: f64,
    pub phase: f64,
}

fn wrap_phase(p: f64) -> f64 {
    if p == 0.0 || p == PI {
        return p;
    }
    let mut w = p % (2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    } else if w <= -PI {
        w += 2.0 * PI;
    }
    // atan2 conventions put a negated real on -pi; normalize to +pi.
    if w == -PI {
        w = PI;
    }
    w
}

impl LogSigned {
    pub const ZERO: LogSigned = LogSigned {
        log_mag: f64::NEG_INFINITY,
        phase: 0.0,
    };

    pub const ONE: LogSigned = LogSigned {
        log_mag: 0.0,
        phase: 0.0,
    };

    pub fn new(log_mag: f64, phase: f64) -> Self {
        if log_mag == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        Self {
            log_mag,
            phase: wrap_phase(phase),
        }
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else if x > 0.0 {
            Self {
                log_mag: x.ln(),
                phase: 0.0,
            }
        } else {
            Self {
                log_mag: (-x).ln(),
                phase: PI,
            }
        }
    }

    pub fn from_complex(z: Complex64) -> Self {
        if z.im == 0.0 {
            return Self::from_f64(z.re);
        }
        Self {
            log_mag: z.norm().ln(),
            phase: wrap_phase(z.arg()),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.log_mag == f64::NEG_INFINITY
    }

    /// True when the phase is exactly 0 or pi (covers all values built from
    /// real inputs).
    pub fn is_real(&self) -> bool {
        self.phase == 0.0 || self.phase == PI
    }

    pub fn to_complex(&self) -> Complex64 {
        if self.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        let m = self.log_mag.exp();
        if self.phase == 0.0 {
            Complex64::new(m, 0.0)
        } else if self.phase == PI {
            Complex64::new(-m, 0.0)
        } else {
            Complex64::from_polar(m, self.phase)
        }
    }

    /// Magnitude-and-sign view for real values; `None` when the phase is not
    /// a real sign.
    pub fn to_f64(&self) -> Option<f64> {
        if self.is_zero() {
            Some(0.0)
        } else if self.phase == 0.0 {
            Some(self.log_mag.exp())
        } else if self.phase == PI {
            Some(-self.log_mag.exp())
        } else {
            None
        }
    }

    pub fn mul(&self, other: &LogSigned) -> LogSigned {
        if self.is_zero() || other.is_zero() {
            return Self::ZERO;
        }
        let phase = if self.is_real() && other.is_real() {
            if self.phase == other.phase {
                0.0
            } else {
                PI
            }
        } else {
            wrap_phase(self.phase + other.phase)
        };
        LogSigned {
            log_mag: self.log_mag + other.log_mag,
            phase,
        }
    }

    pub fn div(&self, other: &LogSigned) -> LogSigned {
        self.mul(&other.recip())
    }

    pub fn recip(&self) -> LogSigned {
        LogSigned {
            log_mag: -self.log_mag,
            phase: if self.is_real() {
                self.phase
            } else {
                wrap_phase(-self.phase)
            },
        }
    }

    pub fn neg(&self) -> LogSigned {
        if self.is_zero() {
            return Self::ZERO;
        }
        let phase = if self.phase == 0.0 {
            PI
        } else if self.phase == PI {
            0.0
        } else {
            wrap_phase(self.phase + PI)
        };
        LogSigned {
            log_mag: self.log_mag,
            phase,
        }
    }

    /// Integer power; exponent may be negative.
    pub fn powi(&self, n: i32) -> LogSigned {
        if self.is_zero() {
            return if n == 0 { Self::ONE } else { Self::ZERO };
        }
        let phase = if self.is_real() {
            if self.phase == PI && n.rem_euclid(2) == 1 {
                PI
            } else {
                0.0
            }
        } else {
            wrap_phase(self.phase * n as f64)
        };
        LogSigned {
            log_mag: self.log_mag * n as f64,
            phase,
        }
    }

    /// Scale by `exp(t)` without going through a float value.
    pub fn scale_exp(&self, t: f64) -> LogSigned {
        if self.is_zero() {
            return Self::ZERO;
        }
        LogSigned {
            log_mag: self.log_mag + t,
            phase: self.phase,
        }
    }

    /// Sum in the log domain. The dominant term anchors the result so the
    /// correction factor `1 + r` has `|r| <= 1`.
    pub fn add(&self, other: &LogSigned) -> LogSigned {
        if self.is_zero() {
            return *other;
        }
        if other.is_zero() {
            return *self;
        }
        let (a, b) = if self.log_mag >= other.log_mag {
            (self, other)
        } else {
            (other, self)
        };
        let dl = (b.log_mag - a.log_mag).exp();
        if a.is_real() && b.is_real() {
            let r = if a.phase == b.phase { dl } else { -dl };
            let s = 1.0 + r;
            if s == 0.0 {
                return Self::ZERO;
            }
            let (mag, flip) = if s > 0.0 { (s, false) } else { (-s, true) };
            let phase = match (a.phase == PI, flip) {
                (false, false) | (true, true) => 0.0,
                _ => PI,
            };
            LogSigned {
                log_mag: a.log_mag + mag.ln(),
                phase,
            }
        } else {
            let r = Complex64::from_polar(dl, b.phase - a.phase);
            let s = Complex64::new(1.0 + r.re, r.im);
            if s.re == 0.0 && s.im == 0.0 {
                return Self::ZERO;
            }
            LogSigned {
                log_mag: a.log_mag + s.norm().ln(),
                phase: wrap_phase(a.phase + s.arg()),
            }
        }
    }

    pub fn sub(&self, other: &LogSigned) -> LogSigned {
        self.add(&other.neg())
    }

    /// `|log(self) - log(other)|` scaled by `max(1, |log|)`; the comparison
    /// used throughout the oracle tests. Phases must agree to `tol` as well.
    pub fn log_rel_diff(&self, other: &LogSigned) -> f64 {
        if self.is_zero() && other.is_zero() {
            return 0.0;
        }
        if self.is_zero() || other.is_zero() {
            return f64::INFINITY;
        }
        let dmag = (self.log_mag - other.log_mag).abs()
            / 1f64.max(self.log_mag.abs()).max(other.log_mag.abs());
        let dphase = wrap_phase(self.phase - other.phase).abs();
        dmag.max(dphase)
    }
}

pub fn logsigned_sum<I: IntoIterator<Item = LogSigned>>(iter: I) -> LogSigned {
    iter.into_iter()
        .fold(LogSigned::ZERO, |acc, x| acc.add(&x))
}
