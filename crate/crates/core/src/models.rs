//! Built-in local models: Lefschetz, indefinite fold, cusp, and the four
//! one-parameter moves (birth, merge, flip, wrinkle).
//!
//! Each model carries its chart map `(C1, C2)`, the closed-form bivector
//! (k = 1) it is expected to produce, and where available the closed-form
//! leaf coefficient `numerator / denominator`.

use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use serde::Serialize;
use thiserror::Error;

use crate::expr::{parse, Expr};
use crate::point::Point4;
use crate::poisson::{flaschka_ratiu, Bivector, BivectorJson, CasimirPair, UPPER_SLOTS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(
        "unknown model '{0}' (expected one of lefschetz, fold, cusp, birth, merge, flip, wrinkle)"
    )]
    Unknown(String),
    #[error("model '{0}' depends on the parameter s; pass a value for s")]
    MissingS(ModelName),
    #[error("model '{0}' does not depend on s")]
    UnexpectedS(ModelName),
    #[error("s must be finite, got {0}")]
    NonFiniteS(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    Lefschetz,
    Fold,
    Cusp,
    Birth,
    Merge,
    Flip,
    Wrinkle,
}

impl ModelName {
    pub const ALL: [ModelName; 7] = [
        ModelName::Lefschetz,
        ModelName::Fold,
        ModelName::Cusp,
        ModelName::Birth,
        ModelName::Merge,
        ModelName::Flip,
        ModelName::Wrinkle,
    ];

    /// Models with a printed closed-form bivector and leaf coefficient.
    pub const SINGULAR: [ModelName; 5] = [
        ModelName::Cusp,
        ModelName::Birth,
        ModelName::Merge,
        ModelName::Flip,
        ModelName::Wrinkle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelName::Lefschetz => "lefschetz",
            ModelName::Fold => "fold",
            ModelName::Cusp => "cusp",
            ModelName::Birth => "birth",
            ModelName::Merge => "merge",
            ModelName::Flip => "flip",
            ModelName::Wrinkle => "wrinkle",
        }
    }

    pub fn uses_s(self) -> bool {
        matches!(
            self,
            ModelName::Birth | ModelName::Merge | ModelName::Flip | ModelName::Wrinkle
        )
    }

    /// Whether `C1` is the coordinate function `t`.
    pub fn has_coordinate_casimir(self) -> bool {
        !matches!(self, ModelName::Lefschetz | ModelName::Wrinkle)
    }

    /// Chart map with `s` left symbolic.
    pub fn casimirs(self) -> CasimirPair {
        let (c1, c2) = match self {
            // (z1, z2) = (x + iy, z + it); C1 + i C2 = z1² + z2²
            ModelName::Lefschetz => ("x^2 - y^2 + z^2 - t^2", "2*x*y + 2*z*t"),
            ModelName::Fold => ("t", "-x^2 + y^2 + z^2"),
            ModelName::Cusp => ("t", "x^3 - 3*x*t + y^2 - z^2"),
            ModelName::Birth => ("t", "x^3 - 3*x*(t^2 - s) + y^2 - z^2"),
            ModelName::Merge => ("t", "x^3 - 3*x*(s - t^2) + y^2 - z^2"),
            ModelName::Flip => ("t", "x^4 - x^2*s + x*t + y^2 - z^2"),
            ModelName::Wrinkle => ("t^2 - x^2 + y^2 - z^2 + s*t", "2*t*x + 2*y*z"),
        };
        CasimirPair::new(expr(c1), expr(c2))
    }

    /// Closed-form bivector with `k = 1` and `s` symbolic, as upper-triangle
    /// entries `[xy, xz, xt, yz, yt, zt]`.
    pub fn expected_upper(self) -> [&'static str; 6] {
        match self {
            // not printed in closed form alongside the moves; frozen from a
            // hand expansion of the determinant
            ModelName::Lefschetz => [
                "4*z^2 + 4*t^2",
                "4*y*z - 4*x*t",
                "-4*x*z - 4*y*t",
                "4*x*z + 4*y*t",
                "4*y*z - 4*x*t",
                "4*x^2 + 4*y^2",
            ],
            ModelName::Fold => ["-2*z", "2*y", "0", "2*x", "0", "0"],
            ModelName::Cusp => ["2*z", "2*y", "0", "3*t - 3*x^2", "0", "0"],
            ModelName::Birth => ["2*z", "2*y", "0", "-3*(s - t^2 + x^2)", "0", "0"],
            // the printed matrix entry; the displayed wedge form carries the
            // opposite sign on dy∧dz
            ModelName::Merge => ["2*z", "2*y", "0", "3*(s - t^2) - 3*x^2", "0", "0"],
            ModelName::Flip => ["2*z", "2*y", "0", "-(t - 2*s*x + 4*x^3)", "0", "0"],
            ModelName::Wrinkle => [
                "-2*s*y - 4*t*y - 4*x*z",
                "-4*x*y + 2*s*z + 4*t*z",
                "4*y^2 + 4*z^2",
                "-(2*s*t + 4*t^2 + 4*x^2)",
                "4*(x*y - t*z)",
                "-4*(t*y + x*z)",
            ],
        }
    }

    /// Closed-form leaf coefficient `(numerator, denominator)` at `k = 1`,
    /// `s` symbolic.
    pub fn leaf_coefficient(self) -> Option<(&'static str, &'static str)> {
        match self {
            ModelName::Lefschetz | ModelName::Fold => None,
            ModelName::Cusp => Some(("1", "3*(x^2 - t)")),
            ModelName::Birth => Some(("1", "3*(s - t^2 + x^2)")),
            ModelName::Merge => Some(("1", "3*(t^2 - s + x^2)")),
            ModelName::Flip => Some(("1", "t - 2*s*x + 4*x^3")),
            ModelName::Wrinkle => Some(("-1", "2*(t*y + x*z)")),
        }
    }
}

impl fmt::Display for ModelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelName {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelName::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| ModelError::Unknown(s.to_string()))
    }
}

fn expr(text: &str) -> Expr {
    parse(text).expect("built-in model formulas parse")
}

/// A rational function `numerator / denominator` of polynomials.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalFunction {
    pub numerator: Expr,
    pub denominator: Expr,
}

impl RationalFunction {
    pub fn evaluate(&self, p: &Point4) -> f64 {
        self.numerator.evaluate(p) / self.denominator.evaluate(p)
    }
}

/// A fully populated model at a fixed value of `s` (when it has one).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub name: ModelName,
    pub uses_s: bool,
    pub s: Option<f64>,
    pub casimirs: CasimirPair,
    pub expected_bivector: Option<Bivector>,
    pub expected_leaf_coefficient: Option<RationalFunction>,
    /// Polynomials whose common zero set is the critical locus: the nonzero
    /// components of the constructed bivector.
    pub critical_locus: Vec<Expr>,
    pub coordinate_casimir: bool,
}

impl ModelSpec {
    /// A sample point carrying this model's `s`.
    pub fn point(&self, x: f64, y: f64, z: f64, t: f64) -> Point4 {
        Point4::new(x, y, z, t).with_s(self.s.unwrap_or(0.0))
    }

    pub fn bivector(&self) -> Bivector {
        flaschka_ratiu(&self.casimirs, None).expect("no conformal factor")
    }
}

pub(crate) fn exact_s(name: ModelName, s: Option<f64>) -> Result<Option<BigRational>, ModelError> {
    match (name.uses_s(), s) {
        (true, None) => Err(ModelError::MissingS(name)),
        (false, Some(_)) => Err(ModelError::UnexpectedS(name)),
        (false, None) => Ok(None),
        (true, Some(v)) => BigRational::from_float(v)
            .map(Some)
            .ok_or(ModelError::NonFiniteS(v)),
    }
}

fn substitute(e: Expr, s: &Option<BigRational>) -> Expr {
    match s {
        Some(v) => e.substitute_s(v),
        None => e,
    }
}

/// Looks up a model; `s` must be given exactly when the model uses it.
pub fn model(name: ModelName, s: Option<f64>) -> Result<ModelSpec, ModelError> {
    let exact = exact_s(name, s)?;
    let casimirs = match &exact {
        Some(v) => name.casimirs().substitute_s(v),
        None => name.casimirs(),
    };
    let expected_bivector = Some(expected_bivector_exact(name, &exact));
    let expected_leaf_coefficient = name.leaf_coefficient().map(|(n, d)| RationalFunction {
        numerator: substitute(expr(n), &exact),
        denominator: substitute(expr(d), &exact),
    });
    let constructed = flaschka_ratiu(&casimirs, None).expect("no conformal factor");
    let critical_locus = UPPER_SLOTS
        .iter()
        .map(|&(i, j)| constructed.component(i, j).clone())
        .filter(|e| !e.is_zero())
        .collect();
    Ok(ModelSpec {
        name,
        uses_s: name.uses_s(),
        s,
        casimirs,
        expected_bivector,
        expected_leaf_coefficient,
        critical_locus,
        coordinate_casimir: name.has_coordinate_casimir(),
    })
}

fn expected_bivector_exact(name: ModelName, s: &Option<BigRational>) -> Bivector {
    let upper = name.expected_upper().map(|text| substitute(expr(text), s));
    Bivector::from_upper(upper)
}

/// The transcribed closed-form bivector (k = 1) at the given `s`.
pub fn expected_bivector(name: ModelName, s: Option<f64>) -> Result<Bivector, ModelError> {
    Ok(expected_bivector_exact(name, &exact_s(name, s)?))
}

/// Absolute tolerance on bivector components for membership in the
/// critical locus.
pub const LOCUS_TOL: f64 = 1e-9;

/// Membership test for the chart's critical set: every component of the
/// constructed bivector vanishes.
#[derive(Debug, Clone)]
pub struct CriticalLocus {
    bivector: crate::poisson::CompiledBivector,
    s: f64,
}

impl CriticalLocus {
    pub fn contains(&self, p: &Point4) -> bool {
        let q = p.with_s(self.s);
        self.bivector
            .evaluate(&q)
            .iter()
            .all(|v| v.abs() <= LOCUS_TOL)
    }
}

pub fn critical_locus_indicator(
    name: ModelName,
    s: Option<f64>,
) -> Result<CriticalLocus, ModelError> {
    let spec = model(name, s)?;
    Ok(CriticalLocus {
        bivector: spec.bivector().compile(),
        s: s.unwrap_or(0.0),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LeafCoefficientJson {
    pub numerator: String,
    pub denominator: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelJson {
    pub name: ModelName,
    pub uses_s: bool,
    pub coordinate_casimir: bool,
    pub c1: String,
    pub c2: String,
    pub expected_bivector: BivectorJson,
    pub leaf_coefficient: Option<LeafCoefficientJson>,
}

/// The catalogue with `s` left symbolic, in a fixed order.
pub fn catalogue() -> Vec<ModelJson> {
    ModelName::ALL
        .into_iter()
        .map(|name| {
            let cas = name.casimirs();
            ModelJson {
                name,
                uses_s: name.uses_s(),
                coordinate_casimir: name.has_coordinate_casimir(),
                c1: cas.c1.to_string(),
                c2: cas.c2.to_string(),
                expected_bivector: expected_bivector_exact(name, &None).to_json(),
                leaf_coefficient: name.leaf_coefficient().map(|(n, d)| LeafCoefficientJson {
                    numerator: expr(n).to_string(),
                    denominator: expr(d).to_string(),
                }),
            }
        })
        .collect()
}
