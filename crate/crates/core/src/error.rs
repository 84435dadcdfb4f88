use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors produced by parsing, evaluation and the checks built on top.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at byte {offset}; declared: {}", declared.join(", "))]
    UnknownIdentifier {
        name: String,
        offset: usize,
        declared: Vec<String>,
    },

    #[error("unbound variable `{0}`")]
    UnboundVariable(String),

    #[error("singular evaluation ({op}) at {}", fmt_point(point))]
    Singular { op: String, point: Vec<(String, f64)> },

    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),

    #[error("infeasible domain: {accepted} of {attempts} draws satisfied the constraints")]
    InfeasibleDomain { accepted: usize, attempts: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("unknown variable `{0}` for this chart")]
    UnknownVariable(String),

    #[error("singular matrix{}", if point.is_empty() { String::new() } else { alloc::format!(" at {}", fmt_point(point)) })]
    SingularMatrix { point: Vec<(String, f64)> },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("implicit solve did not converge at step {step}")]
    NonConvergence { step: usize },

    #[error("cocycle condition violated for ({r}, {s}, {t}): residual {residual:e}")]
    NotCocycle {
        r: usize,
        s: usize,
        t: usize,
        residual: f64,
    },

    #[error("invalid structure constants: {0}")]
    InvalidStructure(String),
}

fn fmt_point(point: &[(String, f64)]) -> String {
    let parts: Vec<String> = point.iter().map(|(k, v)| alloc::format!("{k}={v}")).collect();
    alloc::format!("{{{}}}", parts.join(", "))
}

impl Error {
    /// Attach a sample point to a singular-evaluation error.
    pub(crate) fn at_point(self, pt: &crate::Point) -> Self {
        let point = || pt.iter().map(|(k, v)| (k.clone(), *v)).collect();
        match self {
            Error::Singular { op, point: p } if p.is_empty() => Error::Singular { op, point: point() },
            Error::SingularMatrix { point: p } if p.is_empty() => Error::SingularMatrix { point: point() },
            e => e,
        }
    }
}
