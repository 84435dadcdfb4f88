use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;

use super::eval::{check, Scalar};
use super::{Expr, Func};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
enum Op {
    Var(usize),
    Const(Complex64),
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Pow(i32),
    Call(Func),
}

/// A list of expressions compiled to stack programs over a fixed variable
/// order, for repeated evaluation in hot loops.
#[derive(Debug, Clone)]
pub struct Tape {
    vars: Vec<String>,
    programs: Vec<Vec<Op>>,
    depth: usize,
}

impl Tape {
    /// Compile `exprs`; every free variable must appear in `vars`.
    pub fn compile<S: AsRef<str>>(exprs: &[Expr], vars: &[S]) -> Result<Tape> {
        let vars: Vec<String> = vars.iter().map(|v| String::from(v.as_ref())).collect();
        let mut programs = Vec::with_capacity(exprs.len());
        let mut depth = 1;
        for e in exprs {
            let mut ops = Vec::new();
            let d = emit(e, &vars, &mut ops)?;
            depth = depth.max(d);
            programs.push(ops);
        }
        Ok(Tape { vars, programs, depth })
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn len(&self) -> usize {
        self.programs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.programs.is_empty()
    }

    /// Evaluate every output over the reals.
    pub fn eval_real(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.run(x, out)
    }

    /// Evaluate every output over the complex numbers.
    pub fn eval_complex(&self, x: &[Complex64], out: &mut [Complex64]) -> Result<()> {
        self.run(x, out)
    }

    /// Complex evaluation at a real point.
    pub fn eval_at(&self, x: &[f64], out: &mut [Complex64]) -> Result<()> {
        let z: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.run(&z, out)
    }

    fn run<T: Scalar>(&self, x: &[T], out: &mut [T]) -> Result<()> {
        if x.len() != self.vars.len() || out.len() != self.programs.len() {
            return Err(Error::Dimension(alloc::format!(
                "tape expects {} inputs and {} outputs",
                self.vars.len(),
                self.programs.len()
            )));
        }
        let mut stack: Vec<T> = Vec::with_capacity(self.depth);
        for (prog, slot) in self.programs.iter().zip(out.iter_mut()) {
            stack.clear();
            for op in prog {
                let v = match *op {
                    Op::Var(i) => x[i],
                    Op::Const(c) => check(T::from_const(c), "constant")?,
                    Op::Neg => {
                        let a = stack.pop().expect("tape underflow");
                        a.neg()
                    }
                    Op::Pow(n) => {
                        let a = stack.pop().expect("tape underflow");
                        check(a.powi(n), "^")?
                    }
                    Op::Call(f) => {
                        let a = stack.pop().expect("tape underflow");
                        check(a.apply(f), f.name())?
                    }
                    Op::Add | Op::Sub | Op::Mul | Op::Div => {
                        let b = stack.pop().expect("tape underflow");
                        let a = stack.pop().expect("tape underflow");
                        match *op {
                            Op::Add => check(Some(a.add(b)), "+")?,
                            Op::Sub => check(Some(a.sub(b)), "-")?,
                            Op::Mul => check(Some(a.mul(b)), "*")?,
                            _ => check(a.div(b), "/")?,
                        }
                    }
                };
                stack.push(v);
            }
            *slot = stack.pop().expect("empty program");
        }
        Ok(())
    }
}

fn emit(e: &Expr, vars: &[String], ops: &mut Vec<Op>) -> Result<usize> {
    Ok(match e {
        Expr::Var(name) => {
            let i = vars
                .iter()
                .position(|v| v == name)
                .ok_or_else(|| Error::UnboundVariable(name.clone()))?;
            ops.push(Op::Var(i));
            1
        }
        Expr::Real(v) => {
            ops.push(Op::Const(Complex64::new(*v, 0.0)));
            1
        }
        Expr::Complex(re, im) => {
            ops.push(Op::Const(Complex64::new(*re, *im)));
            1
        }
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
            let da = emit(a, vars, ops)?;
            let db = emit(b, vars, ops)?;
            ops.push(match e {
                Expr::Add(..) => Op::Add,
                Expr::Sub(..) => Op::Sub,
                Expr::Mul(..) => Op::Mul,
                _ => Op::Div,
            });
            da.max(db + 1)
        }
        Expr::Neg(a) => {
            let d = emit(a, vars, ops)?;
            ops.push(Op::Neg);
            d
        }
        Expr::Pow(a, n) => {
            let d = emit(a, vars, ops)?;
            ops.push(Op::Pow(*n));
            d
        }
        Expr::Call(f, a) => {
            let d = emit(a, vars, ops)?;
            ops.push(Op::Call(*f));
            d
        }
    })
}
