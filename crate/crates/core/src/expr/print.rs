use core::fmt::{self, Display, Write};

use super::Expr;

const ATOM: u8 = 5;

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(..) => 3,
        Expr::Pow(..) => 4,
        _ => ATOM,
    }
}

fn number(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    if v.is_sign_negative() {
        write!(f, "(-{})", -v)
    } else {
        write!(f, "{v}")
    }
}

fn signed(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    if v.is_sign_negative() {
        write!(f, "-{}", -v)
    } else {
        write!(f, "{v}")
    }
}

fn write_at(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if prec(e) < min {
        f.write_char('(')?;
        write_at(f, e, 0)?;
        return f.write_char(')');
    }
    match e {
        Expr::Var(name) => f.write_str(name),
        Expr::Real(v) => number(f, *v),
        Expr::Complex(re, im) => {
            if *re == 0.0 && !re.is_sign_negative() && *im == 1.0 {
                f.write_char('i')
            } else {
                f.write_str("complex(")?;
                signed(f, *re)?;
                f.write_str(", ")?;
                signed(f, *im)?;
                f.write_char(')')
            }
        }
        Expr::Add(a, b) => {
            write_at(f, a, 1)?;
            f.write_str(" + ")?;
            write_at(f, b, 2)
        }
        Expr::Sub(a, b) => {
            write_at(f, a, 1)?;
            f.write_str(" - ")?;
            write_at(f, b, 2)
        }
        Expr::Mul(a, b) => {
            write_at(f, a, 2)?;
            f.write_char('*')?;
            write_at(f, b, 3)
        }
        Expr::Div(a, b) => {
            write_at(f, a, 2)?;
            f.write_char('/')?;
            write_at(f, b, 3)
        }
        Expr::Neg(a) => {
            f.write_char('-')?;
            match **a {
                Expr::Real(v) if !v.is_sign_negative() => write!(f, "({v})"),
                _ => write_at(f, a, 3),
            }
        }
        Expr::Pow(a, n) => {
            write_at(f, a, ATOM)?;
            if *n < 0 {
                write!(f, "^({n})")
            } else {
                write!(f, "^{n}")
            }
        }
        Expr::Call(func, a) => {
            f.write_str(func.name())?;
            f.write_char('(')?;
            write_at(f, a, 0)?;
            f.write_char(')')
        }
    }
}

/// Canonical text form; parsing it back yields a structurally equal tree.
impl Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_at(f, self, 0)
    }
}
