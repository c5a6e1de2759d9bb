//! Dense real polynomials in the Laplace variable `s`.
//!
//! Coefficients are stored in ascending order of power: `coeffs[i]` multiplies
//! `s^i`. Degrees in this crate stay below ten, so the monomial basis is
//! adequate.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly<T> {
    coeffs: Vec<T>,
}

impl<T: Scalar> Poly<T> {
    /// Builds a polynomial from ascending coefficients. Trailing zeros are
    /// trimmed; an empty slice is the zero polynomial.
    pub fn new(coeffs: &[T]) -> Self {
        Self::from_vec(coeffs.to_vec())
    }

    pub fn from_vec(coeffs: Vec<T>) -> Self {
        let mut p = Self { coeffs };
        p.trim();
        p
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![T::zero()] }
    }

    pub fn one() -> Self {
        Self::constant(T::one())
    }

    pub fn constant(c: T) -> Self {
        Self::new(&[c])
    }

    /// `c · s^n`
    pub fn monomial(c: T, n: usize) -> Self {
        let mut coeffs = vec![T::zero(); n + 1];
        coeffs[n] = c;
        Self::from_vec(coeffs)
    }

    /// The polynomial `s`.
    pub fn s() -> Self {
        Self::monomial(T::one(), 1)
    }

    fn trim(&mut self) {
        match self.coeffs.iter().rposition(|c| !c.is_zero()) {
            Some(pos) => self.coeffs.truncate(pos + 1),
            None => {
                self.coeffs.clear();
                self.coeffs.push(T::zero());
            }
        }
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// Coefficient of `s^i` (zero beyond the degree).
    pub fn coeff(&self, i: usize) -> T {
        self.coeffs.get(i).copied().unwrap_or_else(T::zero)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0].is_zero()
    }

    pub fn leading(&self) -> T {
        self.coeffs[self.coeffs.len() - 1]
    }

    /// Divides every coefficient by the leading one.
    pub fn monic(&self) -> Self {
        let lead = self.leading();
        self.scale(T::one() / lead)
    }

    pub fn scale(&self, c: T) -> Self {
        Self::from_vec(self.coeffs.iter().map(|&a| a * c).collect())
    }

    /// Horner evaluation at a real point.
    pub fn eval(&self, x: T) -> T {
        self.coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * x + c)
    }

    /// Horner evaluation at a complex point.
    pub fn eval_complex(&self, s: Complex<T>) -> Complex<T> {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex::new(T::zero(), T::zero()), |acc, &c| acc * s + c)
    }

    /// Evaluation on the imaginary axis, `p(jω)`.
    pub fn eval_jw(&self, omega: T) -> Complex<T> {
        self.eval_complex(Complex::new(T::zero(), omega))
    }

    /// Substitutes `s → c·s`, i.e. multiplies coefficient `i` by `c^i`.
    pub fn rescale_variable(&self, c: T) -> Self {
        let mut pow = T::one();
        let mut out = Vec::with_capacity(self.coeffs.len());
        for &a in &self.coeffs {
            out.push(a * pow);
            pow = pow * c;
        }
        Self::from_vec(out)
    }
}

impl<T: Scalar> Add for &Poly<T> {
    type Output = Poly<T>;

    fn add(self, rhs: &Poly<T>) -> Poly<T> {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::from_vec((0..n).map(|i| self.coeff(i) + rhs.coeff(i)).collect())
    }
}

impl<T: Scalar> Sub for &Poly<T> {
    type Output = Poly<T>;

    fn sub(self, rhs: &Poly<T>) -> Poly<T> {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::from_vec((0..n).map(|i| self.coeff(i) - rhs.coeff(i)).collect())
    }
}

impl<T: Scalar> Mul for &Poly<T> {
    type Output = Poly<T>;

    fn mul(self, rhs: &Poly<T>) -> Poly<T> {
        let mut out = vec![T::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] = out[i + j] + a * b;
            }
        }
        Poly::from_vec(out)
    }
}

impl<T: Scalar> Neg for &Poly<T> {
    type Output = Poly<T>;

    fn neg(self) -> Poly<T> {
        self.scale(-T::one())
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl<T: Scalar> $tr for Poly<T> {
            type Output = Poly<T>;
            fn $m(self, rhs: Poly<T>) -> Poly<T> {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
