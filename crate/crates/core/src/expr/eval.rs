use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};

use num_complex::Complex64;

use super::{Expr, Func};
use crate::{Error, Result};

/// Variable lookup used by evaluation.
pub trait Scope {
    fn lookup(&self, name: &str) -> Option<Complex64>;
}

impl Scope for BTreeMap<String, f64> {
    fn lookup(&self, name: &str) -> Option<Complex64> {
        self.get(name).map(|&v| Complex64::new(v, 0.0))
    }
}

impl Scope for BTreeMap<String, Complex64> {
    fn lookup(&self, name: &str) -> Option<Complex64> {
        self.get(name).copied()
    }
}

impl Scope for [(&str, f64)] {
    fn lookup(&self, name: &str) -> Option<Complex64> {
        self.iter()
            .find(|(k, _)| *k == name)
            .map(|&(_, v)| Complex64::new(v, 0.0))
    }
}

impl<const N: usize> Scope for [(&str, f64); N] {
    fn lookup(&self, name: &str) -> Option<Complex64> {
        self.as_slice().lookup(name)
    }
}

/// Arithmetic shared by tree evaluation and compiled tapes.
///
/// Operations return `None` at singular points (division by zero, log of
/// zero, non-finite results, or leaving the reals for `f64`).
pub(crate) trait Scalar: Copy {
    fn from_const(c: Complex64) -> Option<Self>;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn mul(self, o: Self) -> Self;
    fn neg(self) -> Self;
    fn div(self, o: Self) -> Option<Self>;
    fn powi(self, n: i32) -> Option<Self>;
    fn apply(self, f: Func) -> Option<Self>;
    fn finite(self) -> bool;
}

impl Scalar for f64 {
    fn from_const(c: Complex64) -> Option<f64> {
        (c.im == 0.0).then_some(c.re)
    }
    fn add(self, o: f64) -> f64 {
        self + o
    }
    fn sub(self, o: f64) -> f64 {
        self - o
    }
    fn mul(self, o: f64) -> f64 {
        self * o
    }
    fn neg(self) -> f64 {
        -self
    }
    fn div(self, o: f64) -> Option<f64> {
        (o != 0.0).then(|| self / o)
    }
    fn powi(self, n: i32) -> Option<f64> {
        if self == 0.0 && n < 0 {
            return None;
        }
        Some(libm::pow(self, n as f64))
    }
    fn apply(self, f: Func) -> Option<f64> {
        let x = self;
        Some(match f {
            Func::Sqrt if x >= 0.0 => libm::sqrt(x),
            Func::Ln if x > 0.0 => libm::log(x),
            Func::Asin if (-1.0..=1.0).contains(&x) => libm::asin(x),
            Func::Sqrt | Func::Ln | Func::Asin => return None,
            Func::Exp => libm::exp(x),
            Func::Sin => libm::sin(x),
            Func::Cos => libm::cos(x),
            Func::Tan => libm::tan(x),
            Func::Atan => libm::atan(x),
            Func::Abs => libm::fabs(x),
        })
    }
    fn finite(self) -> bool {
        self.is_finite()
    }
}

impl Scalar for Complex64 {
    fn from_const(c: Complex64) -> Option<Complex64> {
        Some(c)
    }
    fn add(self, o: Complex64) -> Complex64 {
        self + o
    }
    fn sub(self, o: Complex64) -> Complex64 {
        self - o
    }
    fn mul(self, o: Complex64) -> Complex64 {
        if self.im == 0.0 && o.im == 0.0 {
            return Complex64::new(self.re * o.re, 0.0);
        }
        self * o
    }
    fn neg(self) -> Complex64 {
        -self
    }
    fn div(self, o: Complex64) -> Option<Complex64> {
        if o.re == 0.0 && o.im == 0.0 {
            return None;
        }
        if self.im == 0.0 && o.im == 0.0 {
            return Some(Complex64::new(self.re / o.re, 0.0));
        }
        Some(self / o)
    }
    fn powi(self, n: i32) -> Option<Complex64> {
        if self.im == 0.0 {
            return Scalar::powi(self.re, n).map(real);
        }
        if n < 0 {
            return Complex64::new(1.0, 0.0).div(self)?.powi_pos(-n);
        }
        self.powi_pos(n)
    }
    fn apply(self, f: Func) -> Option<Complex64> {
        let z = self;
        if z.im == 0.0 {
            if let Some(r) = Scalar::apply(z.re, f) {
                return Some(real(r));
            }
        }
        Some(match f {
            // Negative reals sit on the branch cut; take the upper side.
            Func::Sqrt if z.im == 0.0 => Complex64::new(0.0, libm::sqrt(-z.re)),
            Func::Ln if z.im == 0.0 => {
                if z.re == 0.0 {
                    return None;
                }
                Complex64::new(libm::log(-z.re), core::f64::consts::PI)
            }
            Func::Sqrt => z.sqrt(),
            Func::Ln => z.ln(),
            Func::Exp => z.exp(),
            Func::Sin => z.sin(),
            Func::Cos => z.cos(),
            Func::Tan => z.tan(),
            Func::Asin => z.asin(),
            Func::Atan => z.atan(),
            Func::Abs => real(z.norm()),
        })
    }
    fn finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

trait PowPos {
    fn powi_pos(self, n: i32) -> Option<Complex64>;
}

impl PowPos for Complex64 {
    fn powi_pos(self, n: i32) -> Option<Complex64> {
        let mut acc = Complex64::new(1.0, 0.0);
        let mut base = self;
        let mut k = n as u32;
        while k > 0 {
            if k & 1 == 1 {
                acc *= base;
            }
            base *= base;
            k >>= 1;
        }
        Some(acc)
    }
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub(crate) fn singular(op: &str) -> Error {
    Error::Singular {
        op: op.to_string(),
        point: alloc::vec::Vec::new(),
    }
}

pub(crate) fn check<T: Scalar>(v: Option<T>, op: &str) -> Result<T> {
    match v {
        Some(x) if x.finite() => Ok(x),
        _ => Err(singular(op)),
    }
}

pub(crate) fn eval<T: Scalar>(e: &Expr, scope: &dyn Scope) -> Result<T> {
    match e {
        Expr::Var(name) => {
            let v = scope.lookup(name).ok_or_else(|| Error::UnboundVariable(name.clone()))?;
            check(T::from_const(v), name)
        }
        Expr::Real(v) => check(T::from_const(real(*v)), "constant"),
        Expr::Complex(re, im) => check(T::from_const(Complex64::new(*re, *im)), "complex constant"),
        Expr::Add(a, b) => check(Some(eval::<T>(a, scope)?.add(eval(b, scope)?)), "+"),
        Expr::Sub(a, b) => check(Some(eval::<T>(a, scope)?.sub(eval(b, scope)?)), "-"),
        Expr::Mul(a, b) => check(Some(eval::<T>(a, scope)?.mul(eval(b, scope)?)), "*"),
        Expr::Div(a, b) => check(eval::<T>(a, scope)?.div(eval(b, scope)?), "/"),
        Expr::Neg(a) => Ok(eval::<T>(a, scope)?.neg()),
        Expr::Pow(a, n) => check(eval::<T>(a, scope)?.powi(*n), "^"),
        Expr::Call(f, a) => check(eval::<T>(a, scope)?.apply(*f), f.name()),
    }
}
