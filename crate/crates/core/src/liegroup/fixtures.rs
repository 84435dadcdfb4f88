//! Built-in groups, each with a canonical realization on `T*ℝⁿ`.

use alloc::vec;
use alloc::vec::Vec;

use super::{LieGroupModel, StructureConstants};
use crate::expr::Expr;
use crate::phase::Chart;

fn e(text: &str) -> Expr {
    Expr::parse(text).expect("built-in expression")
}

fn build(name: &str, c: StructureConstants, law: &[&str], chart: Chart, hs: &[&str]) -> LieGroupModel {
    LieGroupModel::new(name, c, law.iter().map(|f| e(f)).collect())
        .and_then(|m| m.with_realization(chart, hs.iter().map(|h| e(h)).collect()))
        .expect("built-in group")
}

/// Time translations, realized by a free particle.
pub fn real_line() -> LieGroupModel {
    build(
        "R",
        StructureConstants::zero(1),
        &["a1 + b1"],
        Chart::canonical(1),
        &["p^2/2"],
    )
}

/// Abelian `ℝ²` realized by `p²/2` and `p`.
pub fn plane() -> LieGroupModel {
    build(
        "R2",
        StructureConstants::zero(2),
        &["a1 + b1", "a2 + b2"],
        Chart::canonical(1),
        &["p^2/2", "p"],
    )
}

/// Abelian `ℝ²` realized by `p` and `q`: `{p, q} = -1` is a central charge.
pub fn plane_central() -> LieGroupModel {
    build(
        "R2-central",
        StructureConstants::zero(2),
        &["a1 + b1", "a2 + b2"],
        Chart::canonical(1),
        &["p", "q"],
    )
    .with_cocycle(vec![vec![0.0, -1.0], vec![1.0, 0.0]])
    .expect("antisymmetric")
}

/// Rotations of the plane in the angle chart, realized by the oscillator.
pub fn so2() -> LieGroupModel {
    build(
        "SO2",
        StructureConstants::zero(1),
        &["a1 + b1"],
        Chart::canonical(1),
        &["(p^2 + q^2)/2"],
    )
}

/// `x ↦ e^{a1} x + a2` with `[e₁, e₂] = e₂`, realized by dilations and
/// translations of the line.
pub fn affine() -> LieGroupModel {
    let c = StructureConstants::from_triples(2, &[(0, 1, 1, 1.0)]).expect("valid triples");
    build(
        "affine",
        c,
        &["a1 + b1", "a2 + exp(a1)*b2"],
        Chart::canonical(1),
        &["-q*p", "p"],
    )
}

/// `[e₁, e₂] = e₃` with `e₃` central; `{p, q} = -1` is absorbed by `H₃ = 1`.
pub fn heisenberg() -> LieGroupModel {
    let c = StructureConstants::from_triples(3, &[(0, 1, 2, 1.0)]).expect("valid triples");
    build(
        "heisenberg",
        c,
        &["a1 + b1", "a2 + b2", "a3 + b3 + (a1*b2 - a2*b1)/2"],
        Chart::canonical(1),
        &["p", "q", "1"],
    )
}

/// Rotations in doubled Gibbs coordinates, `C^t_{rs} = ε_{rst}`, realized by
/// minus the angular momenta on `T*ℝ³`.
pub fn so3() -> LieGroupModel {
    build(
        "SO3",
        StructureConstants::levi_civita(),
        &[
            "(a1 + b1 + (a2*b3 - a3*b2)/2)/(1 - (a1*b1 + a2*b2 + a3*b3)/4)",
            "(a2 + b2 + (a3*b1 - a1*b3)/2)/(1 - (a1*b1 + a2*b2 + a3*b3)/4)",
            "(a3 + b3 + (a1*b2 - a2*b1)/2)/(1 - (a1*b1 + a2*b2 + a3*b3)/4)",
        ],
        Chart::canonical(3),
        &["q3*p2 - q2*p3", "q1*p3 - q3*p1", "q2*p1 - q1*p2"],
    )
}

/// The groups shipped with the library, `so3` excluded.
pub fn bundled() -> Vec<LieGroupModel> {
    vec![real_line(), plane(), plane_central(), so2(), affine(), heisenberg()]
}
