//! Frequency-domain models built from rational functions and pure delays.
//!
//! Delays stay symbolic: a [`FrequencyModel::Delay`] node evaluates to
//! `e^{-jωT}` on the unit circle and is never replaced by a rational
//! approximation.

use std::ops::{Add, Mul};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::scalar::hz_to_rad;
use crate::Scalar;

/// Anything that can be evaluated on the imaginary axis.
pub trait FrequencyResponse<T: Scalar> {
    /// Value at `s = jω`, `omega` in rad/s.
    fn response(&self, omega: T) -> Result<Complex<T>>;

    fn response_hz(&self, f: T) -> Result<Complex<T>> {
        self.response(hz_to_rad(f))
    }
}

impl<T: Scalar, F: Fn(T) -> Result<Complex<T>>> FrequencyResponse<T> for F {
    fn response(&self, omega: T) -> Result<Complex<T>> {
        self(omega)
    }
}

/// Composition tree of rational blocks and delays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FrequencyModel<T> {
    Rational { num: Poly<T>, den: Poly<T> },
    /// `e^{-sT}` with `T ≥ 0` in seconds.
    Delay(T),
    Sum(Vec<FrequencyModel<T>>),
    Product(Vec<FrequencyModel<T>>),
    /// `numerator / denominator`
    Ratio(Box<FrequencyModel<T>>, Box<FrequencyModel<T>>),
    /// Negative feedback: `forward / (1 + loop_gain)`.
    Feedback {
        forward: Box<FrequencyModel<T>>,
        loop_gain: Box<FrequencyModel<T>>,
    },
}

impl<T: Scalar> FrequencyModel<T> {
    pub fn rational(num: Poly<T>, den: Poly<T>) -> Self {
        FrequencyModel::Rational { num, den }
    }

    pub fn poly(p: Poly<T>) -> Self {
        Self::rational(p, Poly::one())
    }

    pub fn gain(c: T) -> Self {
        Self::poly(Poly::constant(c))
    }

    pub fn unity() -> Self {
        Self::gain(T::one())
    }

    /// The differentiator `s`.
    pub fn s() -> Self {
        Self::poly(Poly::s())
    }

    pub fn delay(t: T) -> Self {
        FrequencyModel::Delay(t)
    }

    /// First-order low-pass `2πf/(s + 2πf)`; `None` is the unity filter.
    pub fn lowpass(cutoff_hz: Option<T>) -> Self {
        match cutoff_hz {
            Some(f) => {
                let a = hz_to_rad(f);
                Self::rational(Poly::constant(a), Poly::new(&[a, T::one()]))
            }
            None => Self::unity(),
        }
    }

    pub fn ratio(num: Self, den: Self) -> Self {
        FrequencyModel::Ratio(Box::new(num), Box::new(den))
    }

    pub fn feedback(forward: Self, loop_gain: Self) -> Self {
        FrequencyModel::Feedback {
            forward: Box::new(forward),
            loop_gain: Box::new(loop_gain),
        }
    }

    /// Largest delay anywhere in the tree.
    pub fn max_delay(&self) -> T {
        match self {
            FrequencyModel::Rational { .. } => T::zero(),
            FrequencyModel::Delay(t) => *t,
            FrequencyModel::Sum(v) | FrequencyModel::Product(v) => v
                .iter()
                .map(|m| m.max_delay())
                .fold(T::zero(), |a, b| a.max(b)),
            FrequencyModel::Ratio(a, b) => a.max_delay().max(b.max_delay()),
            FrequencyModel::Feedback { forward, loop_gain } => {
                forward.max_delay().max(loop_gain.max_delay())
            }
        }
    }

    /// Collapses a delay-free tree into one rational function.
    ///
    /// No pole/zero cancellation is attempted, so the degrees may exceed the
    /// minimal realisation. Returns `None` if any delay is nonzero.
    pub fn as_rational(&self) -> Option<(Poly<T>, Poly<T>)> {
        match self {
            FrequencyModel::Rational { num, den } => Some((num.clone(), den.clone())),
            FrequencyModel::Delay(t) => t.is_zero().then(|| (Poly::one(), Poly::one())),
            FrequencyModel::Sum(v) => v.iter().try_fold((Poly::zero(), Poly::one()), |(n, d), m| {
                let (mn, md) = m.as_rational()?;
                Some((&(&n * &md) + &(&mn * &d), &d * &md))
            }),
            FrequencyModel::Product(v) => {
                v.iter().try_fold((Poly::one(), Poly::one()), |(n, d), m| {
                    let (mn, md) = m.as_rational()?;
                    Some((&n * &mn, &d * &md))
                })
            }
            FrequencyModel::Ratio(a, b) => {
                let (an, ad) = a.as_rational()?;
                let (bn, bd) = b.as_rational()?;
                Some((&an * &bd, &ad * &bn))
            }
            FrequencyModel::Feedback { forward, loop_gain } => {
                let (gn, gd) = forward.as_rational()?;
                let (ln, ld) = loop_gain.as_rational()?;
                Some((&gn * &ld, &gd * &(&ld + &ln)))
            }
        }
    }

    fn eval(&self, omega: T) -> Result<Complex<T>> {
        let v = match self {
            FrequencyModel::Rational { num, den } => {
                let d = den.eval_jw(omega);
                if d.norm_sqr().is_zero() {
                    return Err(eval_error(omega, "denominator vanishes"));
                }
                num.eval_jw(omega) / d
            }
            FrequencyModel::Delay(t) => Complex::from_polar(T::one(), -omega * *t),
            FrequencyModel::Sum(v) => v.iter().try_fold(Complex::new(T::zero(), T::zero()), |acc, m| {
                Ok::<_, Error>(acc + m.eval(omega)?)
            })?,
            FrequencyModel::Product(v) => v.iter().try_fold(Complex::new(T::one(), T::zero()), |acc, m| {
                Ok::<_, Error>(acc * m.eval(omega)?)
            })?,
            FrequencyModel::Ratio(a, b) => {
                let d = b.eval(omega)?;
                if d.norm_sqr().is_zero() {
                    return Err(eval_error(omega, "denominator vanishes"));
                }
                a.eval(omega)? / d
            }
            FrequencyModel::Feedback { forward, loop_gain } => {
                let d = Complex::new(T::one(), T::zero()) + loop_gain.eval(omega)?;
                if d.norm_sqr().is_zero() {
                    return Err(eval_error(omega, "1 + loop gain vanishes"));
                }
                forward.eval(omega)? / d
            }
        };
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(eval_error(omega, "non-finite value"))
        }
    }
}

fn eval_error<T: Scalar>(omega: T, reason: &'static str) -> Error {
    Error::Evaluation {
        omega: omega.to_f64().unwrap_or(f64::NAN),
        reason,
    }
}

impl<T: Scalar> FrequencyResponse<T> for FrequencyModel<T> {
    fn response(&self, omega: T) -> Result<Complex<T>> {
        self.eval(omega)
    }
}

impl<T: Scalar> Mul for FrequencyModel<T> {
    type Output = FrequencyModel<T>;

    fn mul(self, rhs: Self) -> Self {
        let mut factors = Vec::new();
        for m in [self, rhs] {
            match m {
                FrequencyModel::Product(v) => factors.extend(v),
                other => factors.push(other),
            }
        }
        FrequencyModel::Product(factors)
    }
}

impl<T: Scalar> Add for FrequencyModel<T> {
    type Output = FrequencyModel<T>;

    fn add(self, rhs: Self) -> Self {
        let mut terms = Vec::new();
        for m in [self, rhs] {
            match m {
                FrequencyModel::Sum(v) => terms.extend(v),
                other => terms.push(other),
            }
        }
        FrequencyModel::Sum(terms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrator(wc: f64) -> FrequencyModel<f64> {
        FrequencyModel::rational(Poly::constant(wc), Poly::s())
    }

    #[test]
    fn delay_has_unit_magnitude() {
        let d = FrequencyModel::delay(0.015f64);
        for w in [1e-3, 1.0, 123.4, 1e5, 1e7] {
            assert!((d.response(w).unwrap().norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn pure_delay_phase() {
        let d = FrequencyModel::delay(1e-3f64);
        let ph = d.response_hz(1.0).unwrap().arg().to_degrees();
        assert!((ph + 0.36).abs() < 1e-12);
    }

    #[test]
    fn feedback_of_integrator_is_first_order_lag() {
        // (wc/s) / (1 + wc/s) = wc / (s + wc)
        let m = FrequencyModel::feedback(integrator(10.0), integrator(10.0));
        let v = m.response(10.0).unwrap();
        let expect = Complex::new(10.0, 0.0) / Complex::new(10.0, 10.0);
        assert!((v - expect).norm() < 1e-14);
    }

    #[test]
    fn pole_on_axis_is_an_error() {
        let m = FrequencyModel::rational(Poly::one(), Poly::new(&[4.0, 0.0, 1.0]));
        assert!(m.response(2.0).is_err());
        assert!(m.response(1.0).is_ok());
    }

    #[test]
    fn as_rational_rejects_delays() {
        let m = integrator(1.0) * FrequencyModel::delay(1e-3);
        assert!(m.as_rational().is_none());
        let m0 = integrator(1.0) * FrequencyModel::delay(0.0);
        assert!(m0.as_rational().is_some());
    }

    #[test]
    fn as_rational_matches_tree_evaluation() {
        let lp = FrequencyModel::lowpass(Some(50.0));
        let plant = FrequencyModel::rational(Poly::one(), Poly::new(&[0.0, 0.1, 0.014]));
        let ctrl = FrequencyModel::gain(3.0) + FrequencyModel::gain(0.2) * lp.clone() * FrequencyModel::s();
        let tree = FrequencyModel::feedback(plant.clone() * ctrl.clone(), plant * ctrl);
        let (n, d) = tree.as_rational().unwrap();
        for w in [0.1, 1.0, 10.0, 100.0, 1000.0] {
            let a = tree.response(w).unwrap();
            let b = n.eval_jw(w) / d.eval_jw(w);
            assert!((a - b).norm() <= 1e-12 * a.norm());
        }
    }
}
