//! Expression trees over real and complex scalars.
//!
//! Trees are immutable and cheap to clone. The arithmetic operators and the
//! method constructors (`sin`, `powi`, ...) fold constants locally and drop
//! additive zeros and multiplicative ones, but there is no global simplifier:
//! two mathematically equal expressions may differ structurally, which is why
//! identities are checked numerically (see [`crate::check`]).

mod eval;
mod parse;
mod print;
mod tape;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use core::ops;

use num_complex::Complex64;

pub(crate) use eval::Scalar;
pub use eval::Scope;
pub use tape::Tape;

/// Unary elementary functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Sqrt,
    Exp,
    Ln,
    Sin,
    Cos,
    Tan,
    Asin,
    Atan,
    Abs,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Asin => "asin",
            Func::Atan => "atan",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "asin" => Func::Asin,
            "atan" => Func::Atan,
            "abs" => Func::Abs,
            _ => return None,
        })
    }
}

/// A symbolic expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Var(String),
    Real(f64),
    Complex(f64, f64),
    Add(Arc<Expr>, Arc<Expr>),
    Sub(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Div(Arc<Expr>, Arc<Expr>),
    Neg(Arc<Expr>),
    Pow(Arc<Expr>, i32),
    Call(Func, Arc<Expr>),
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn real(v: f64) -> Expr {
        Expr::Real(v)
    }

    pub fn zero() -> Expr {
        Expr::Real(0.0)
    }

    pub fn one() -> Expr {
        Expr::Real(1.0)
    }

    /// The imaginary unit.
    pub fn i() -> Expr {
        Expr::Complex(0.0, 1.0)
    }

    pub fn constant(c: Complex64) -> Expr {
        if c.im == 0.0 {
            Expr::Real(c.re)
        } else {
            Expr::Complex(c.re, c.im)
        }
    }

    /// Parse with any identifier accepted as a variable.
    pub fn parse(text: &str) -> crate::Result<Expr> {
        parse::parse(text, None)
    }

    /// Parse, rejecting identifiers outside `declared`.
    pub fn parse_declared<S: AsRef<str>>(text: &str, declared: &[S]) -> crate::Result<Expr> {
        let names: alloc::vec::Vec<&str> = declared.iter().map(|s| s.as_ref()).collect();
        parse::parse(text, Some(&names))
    }

    pub fn as_const(&self) -> Option<Complex64> {
        match *self {
            Expr::Real(v) => Some(Complex64::new(v, 0.0)),
            Expr::Complex(re, im) => Some(Complex64::new(re, im)),
            _ => None,
        }
    }

    pub fn as_real(&self) -> Option<f64> {
        match *self {
            Expr::Real(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const().is_some_and(|c| c.re == 0.0 && c.im == 0.0)
    }

    pub fn is_one(&self) -> bool {
        matches!(*self, Expr::Real(v) if v == 1.0)
    }

    pub fn powi(&self, n: i32) -> Expr {
        match n {
            0 => return Expr::one(),
            1 => return self.clone(),
            _ => {}
        }
        if let Some(c) = self.as_const() {
            if let Some(v) = Scalar::powi(c, n) {
                return Expr::constant(v);
            }
        }
        Expr::Pow(Arc::new(self.clone()), n)
    }

    pub fn call(&self, f: Func) -> Expr {
        if let Some(v) = self.as_real() {
            let folded = match f {
                Func::Sqrt if v == 0.0 || v == 1.0 => Some(v),
                Func::Exp if v == 0.0 => Some(1.0),
                Func::Ln if v == 1.0 => Some(0.0),
                Func::Sin | Func::Tan | Func::Asin | Func::Atan if v == 0.0 => Some(0.0),
                Func::Cos if v == 0.0 => Some(1.0),
                Func::Abs => Some(libm::fabs(v)),
                _ => None,
            };
            if let Some(r) = folded {
                return Expr::Real(r);
            }
        }
        Expr::Call(f, Arc::new(self.clone()))
    }

    pub fn sqrt(&self) -> Expr {
        self.call(Func::Sqrt)
    }
    pub fn exp(&self) -> Expr {
        self.call(Func::Exp)
    }
    pub fn ln(&self) -> Expr {
        self.call(Func::Ln)
    }
    pub fn sin(&self) -> Expr {
        self.call(Func::Sin)
    }
    pub fn cos(&self) -> Expr {
        self.call(Func::Cos)
    }
    pub fn tan(&self) -> Expr {
        self.call(Func::Tan)
    }
    pub fn asin(&self) -> Expr {
        self.call(Func::Asin)
    }
    pub fn atan(&self) -> Expr {
        self.call(Func::Atan)
    }
    pub fn abs(&self) -> Expr {
        self.call(Func::Abs)
    }

    /// Symbolic partial derivative with respect to `var`.
    pub fn diff(&self, var: &str) -> Expr {
        match self {
            Expr::Var(name) => {
                if name == var {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Expr::Real(_) | Expr::Complex(..) => Expr::zero(),
            Expr::Add(a, b) => a.diff(var) + b.diff(var),
            Expr::Sub(a, b) => a.diff(var) - b.diff(var),
            Expr::Mul(a, b) => a.diff(var) * b.as_ref() + a.as_ref() * b.diff(var),
            Expr::Div(a, b) => {
                let da = a.diff(var);
                let db = b.diff(var);
                if db.is_zero() {
                    da / b.as_ref()
                } else {
                    (da * b.as_ref() - a.as_ref() * db) / b.powi(2)
                }
            }
            Expr::Neg(a) => -a.diff(var),
            Expr::Pow(a, n) => {
                let da = a.diff(var);
                if da.is_zero() {
                    return Expr::zero();
                }
                Expr::Real(*n as f64) * a.powi(n - 1) * da
            }
            Expr::Call(f, a) => {
                let da = a.diff(var);
                if da.is_zero() {
                    return Expr::zero();
                }
                let a = a.as_ref();
                match f {
                    Func::Sqrt => da / (Expr::Real(2.0) * a.sqrt()),
                    Func::Exp => a.exp() * da,
                    Func::Ln => da / a,
                    Func::Sin => a.cos() * da,
                    Func::Cos => -(a.sin() * da),
                    Func::Tan => da / a.cos().powi(2),
                    Func::Asin => da / (Expr::one() - a.powi(2)).sqrt(),
                    Func::Atan => da / (Expr::one() + a.powi(2)),
                    Func::Abs => da * a / a.abs(),
                }
            }
        }
    }

    /// Gradient with respect to each of `vars`.
    pub fn grad<S: AsRef<str>>(&self, vars: &[S]) -> alloc::vec::Vec<Expr> {
        vars.iter().map(|v| self.diff(v.as_ref())).collect()
    }

    /// Substitute `var` by `value` everywhere.
    pub fn subs(&self, var: &str, value: &Expr) -> Expr {
        let mut map = BTreeMap::new();
        map.insert(var.to_string(), value.clone());
        self.subs_all(&map)
    }

    /// Simultaneous substitution of several variables.
    pub fn subs_all(&self, map: &BTreeMap<String, Expr>) -> Expr {
        if map.is_empty() {
            return self.clone();
        }
        self.rebuild(&|e| match e {
            Expr::Var(name) => map.get(name).cloned(),
            _ => None,
        })
    }

    fn rebuild(&self, leaf: &dyn Fn(&Expr) -> Option<Expr>) -> Expr {
        if let Some(r) = leaf(self) {
            return r;
        }
        match self {
            Expr::Var(_) | Expr::Real(_) | Expr::Complex(..) => self.clone(),
            Expr::Add(a, b) => a.rebuild(leaf) + b.rebuild(leaf),
            Expr::Sub(a, b) => a.rebuild(leaf) - b.rebuild(leaf),
            Expr::Mul(a, b) => a.rebuild(leaf) * b.rebuild(leaf),
            Expr::Div(a, b) => a.rebuild(leaf) / b.rebuild(leaf),
            Expr::Neg(a) => -a.rebuild(leaf),
            Expr::Pow(a, n) => a.rebuild(leaf).powi(*n),
            Expr::Call(f, a) => a.rebuild(leaf).call(*f),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Var(name) => {
                out.insert(name.clone());
            }
            Expr::Real(_) | Expr::Complex(..) => {}
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.collect_vars(out),
        }
    }

    pub fn depends_on(&self, var: &str) -> bool {
        match self {
            Expr::Var(name) => name == var,
            Expr::Real(_) | Expr::Complex(..) => false,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.depends_on(var) || b.depends_on(var)
            }
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.depends_on(var),
        }
    }

    /// True when the tree contains an elementary function call.
    pub fn is_transcendental(&self) -> bool {
        match self {
            Expr::Call(..) => true,
            Expr::Var(_) | Expr::Real(_) | Expr::Complex(..) => false,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.is_transcendental() || b.is_transcendental()
            }
            Expr::Neg(a) | Expr::Pow(a, _) => a.is_transcendental(),
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Var(_) | Expr::Real(_) | Expr::Complex(..) => 1,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => 1 + a.size() + b.size(),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => 1 + a.size(),
        }
    }

    /// Evaluate on the principal branch.
    pub fn eval(&self, scope: &dyn Scope) -> crate::Result<Complex64> {
        eval::eval::<Complex64>(self, scope)
    }

    /// Evaluate over the reals; fails where a complex value would be needed.
    pub fn eval_real(&self, scope: &dyn Scope) -> crate::Result<f64> {
        eval::eval::<f64>(self, scope)
    }
}

/// Sum of a sequence of expressions.
pub fn sum<I: IntoIterator<Item = Expr>>(items: I) -> Expr {
    items.into_iter().fold(Expr::zero(), |acc, e| acc + e)
}

fn fold2(a: &Expr, b: &Expr, op: impl Fn(Complex64, Complex64) -> Complex64) -> Option<Expr> {
    let (x, y) = (a.as_const()?, b.as_const()?);
    if let (Expr::Real(u), Expr::Real(v)) = (a, b) {
        let r = op(Complex64::new(*u, 0.0), Complex64::new(*v, 0.0)).re;
        return Some(Expr::Real(r));
    }
    Some(Expr::constant(op(x, y)))
}

fn add(a: Expr, b: Expr) -> Expr {
    if a.is_zero() {
        return b;
    }
    if b.is_zero() {
        return a;
    }
    if let Some(c) = fold2(&a, &b, |x, y| x + y) {
        return c;
    }
    Expr::Add(Arc::new(a), Arc::new(b))
}

fn sub(a: Expr, b: Expr) -> Expr {
    if b.is_zero() {
        return a;
    }
    if a.is_zero() {
        return neg(b);
    }
    if let Some(c) = fold2(&a, &b, |x, y| x - y) {
        return c;
    }
    if a == b {
        return Expr::zero();
    }
    Expr::Sub(Arc::new(a), Arc::new(b))
}

fn mul(a: Expr, b: Expr) -> Expr {
    if a.is_zero() || b.is_zero() {
        return Expr::zero();
    }
    if a.is_one() {
        return b;
    }
    if b.is_one() {
        return a;
    }
    if let Some(c) = fold2(&a, &b, |x, y| x * y) {
        return c;
    }
    if matches!(a, Expr::Real(v) if v == -1.0) {
        return neg(b);
    }
    if matches!(b, Expr::Real(v) if v == -1.0) {
        return neg(a);
    }
    Expr::Mul(Arc::new(a), Arc::new(b))
}

fn div(a: Expr, b: Expr) -> Expr {
    if b.is_one() {
        return a;
    }
    if !b.is_zero() {
        if a.is_zero() {
            return Expr::zero();
        }
        if let Some(c) = fold2(&a, &b, |x, y| x / y) {
            return c;
        }
    }
    Expr::Div(Arc::new(a), Arc::new(b))
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Real(v) => Expr::Real(-v),
        Expr::Complex(re, im) => Expr::Complex(-re, -im),
        Expr::Neg(inner) => Arc::unwrap_or_clone(inner),
        other => Expr::Neg(Arc::new(other)),
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $f:ident) => {
        impl ops::$trait<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                $f(self, rhs)
            }
        }
        impl ops::$trait<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                $f(self, rhs.clone())
            }
        }
        impl ops::$trait<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                $f(self.clone(), rhs)
            }
        }
        impl ops::$trait<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                $f(self.clone(), rhs.clone())
            }
        }
        impl ops::$trait<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                $f(self, Expr::Real(rhs))
            }
        }
        impl ops::$trait<f64> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                $f(self.clone(), Expr::Real(rhs))
            }
        }
        impl ops::$trait<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                $f(Expr::Real(self), rhs)
            }
        }
        impl ops::$trait<&Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                $f(Expr::Real(self), rhs.clone())
            }
        }
    };
}

binop!(Add, add, add);
binop!(Sub, sub, sub);
binop!(Mul, mul, mul);
binop!(Div, div, div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        neg(self)
    }
}

impl ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        neg(self.clone())
    }
}

impl From<f64> for Expr {
    fn from(v: f64) -> Expr {
        Expr::Real(v)
    }
}

impl From<&str> for Expr {
    fn from(name: &str) -> Expr {
        Expr::var(name)
    }
}

impl core::str::FromStr for Expr {
    type Err = crate::Error;
    fn from_str(s: &str) -> crate::Result<Expr> {
        Expr::parse(s)
    }
}

#[cfg(test)]
mod tests;
