//! Bivectors on ℝ⁴ built from a pair of Casimir functions, and exact checks
//! of the Poisson axioms.
//!
//! Given Casimirs `C1, C2`, the construction sets
//!
//! ```text
//! π^{ij} = det(ε^i, ε^j, dC1, dC2)
//! ```
//!
//! (columns in that order, `ε^i` the i-th basis column), optionally rescaled
//! by a non-vanishing conformal factor `k`. Indices run over `(x, y, z, t)`.

use std::fmt;

use nalgebra::Matrix4;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{parse, Expr, Monomial, ParseError, Var};
use crate::point::Point4;

/// Index triples `i < j < k` at which the Jacobiator is reported.
pub const TRIPLES: [(usize, usize, usize); 4] = [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)];

/// Coordinate names, in index order.
pub const COORDS: [&str; 4] = ["x", "y", "z", "t"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoissonError {
    #[error("conformal factor k is the zero polynomial")]
    ZeroConformal,
    #[error("matrix is not antisymmetric at slot ({i}, {j})")]
    NotAntisymmetric { i: usize, j: usize },
    #[error("bivector JSON: {0}")]
    Json(String),
    #[error("bivector JSON entry {slot}: {source}")]
    Expr {
        slot: String,
        #[source]
        source: ParseError,
    },
}

/// Two functions whose joint level sets are to be the symplectic leaves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CasimirPair {
    pub c1: Expr,
    pub c2: Expr,
}

impl CasimirPair {
    pub fn new(c1: Expr, c2: Expr) -> Self {
        CasimirPair {
            c1: c1.normalize(),
            c2: c2.normalize(),
        }
    }

    pub fn substitute_s(&self, s: &BigRational) -> CasimirPair {
        CasimirPair {
            c1: self.c1.substitute_s(s),
            c2: self.c2.substitute_s(s),
        }
    }
}

/// A covariant 4-tuple (a one-form in the chart).
#[derive(Debug, Clone, PartialEq)]
pub struct Covector4<T = f64>(pub [T; 4]);

/// A contravariant 4-tuple (a tangent vector in the chart).
#[derive(Debug, Clone, PartialEq)]
pub struct Vector4<T = f64>(pub [T; 4]);

impl Covector4<f64> {
    /// Euclidean pairing `Σ α_i v^i`.
    pub fn pair(&self, v: &Vector4<f64>) -> f64 {
        self.0.iter().zip(v.0.iter()).map(|(a, b)| a * b).sum()
    }
}

impl Covector4<Expr> {
    pub fn pair(&self, v: &Vector4<Expr>) -> Expr {
        self.0.iter().zip(v.0.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn evaluate(&self, p: &Point4) -> Covector4<f64> {
        Covector4(std::array::from_fn(|i| self.0[i].evaluate(p)))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(Expr::is_zero)
    }
}

impl Vector4<Expr> {
    pub fn evaluate(&self, p: &Point4) -> Vector4<f64> {
        Vector4(std::array::from_fn(|i| self.0[i].evaluate(p)))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(Expr::is_zero)
    }
}

impl Vector4<f64> {
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Vector4<f64>) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }
}

/// `(∂c/∂x, ∂c/∂y, ∂c/∂z, ∂c/∂t)`.
pub fn gradient(c: &Expr) -> Covector4<Expr> {
    Covector4(Var::ALL.map(|v| c.differentiate(v)))
}

/// Antisymmetric 4×4 matrix of polynomials plus an optional conformal factor.
///
/// The stored components exclude `k`; [`Bivector::scaled`] folds it in.
/// An absent `k` is read as 1 wherever a concrete matrix is needed.
/// Bivectors produced by [`flaschka_ratiu`] also remember the Casimir pair
/// they were built from; that provenance does not take part in equality.
#[derive(Debug, Clone)]
pub struct Bivector {
    components: [[Expr; 4]; 4],
    conformal: Option<Expr>,
    casimirs: Option<CasimirPair>,
}

impl PartialEq for Bivector {
    fn eq(&self, other: &Self) -> bool {
        self.components == other.components && self.conformal == other.conformal
    }
}

impl Eq for Bivector {}

impl Bivector {
    /// Builds a bivector from its upper-triangular entries
    /// `[π^{xy}, π^{xz}, π^{xt}, π^{yz}, π^{yt}, π^{zt}]`.
    pub fn from_upper(upper: [Expr; 6]) -> Bivector {
        let mut components: [[Expr; 4]; 4] = Default::default();
        for (&(i, j), e) in UPPER_SLOTS.iter().zip(upper) {
            components[j][i] = -&e;
            components[i][j] = e;
        }
        Bivector {
            components,
            conformal: None,
            casimirs: None,
        }
    }

    pub fn from_matrix(components: [[Expr; 4]; 4]) -> Result<Bivector, PoissonError> {
        let diagonal = (0..4).map(|i| (i, i));
        for (i, j) in diagonal.chain(UPPER_SLOTS) {
            if !(&components[i][j] + &components[j][i]).is_zero() {
                return Err(PoissonError::NotAntisymmetric { i, j });
            }
        }
        Ok(Bivector {
            components,
            conformal: None,
            casimirs: None,
        })
    }

    pub fn zero() -> Bivector {
        Bivector::from_upper(Default::default())
    }

    /// The elementary bivector `∂_i ∧ ∂_j` scaled by `coeff`.
    pub fn wedge(i: Var, j: Var, coeff: Expr) -> Bivector {
        let mut b = Bivector::zero();
        let (a, c) = (i.index(), j.index());
        b.components[c][a] = -&coeff;
        b.components[a][c] = coeff;
        b
    }

    pub fn with_conformal(mut self, k: Option<Expr>) -> Result<Bivector, PoissonError> {
        if let Some(k) = &k {
            if k.is_zero() {
                return Err(PoissonError::ZeroConformal);
            }
        }
        self.conformal = k;
        Ok(self)
    }

    pub fn conformal(&self) -> Option<&Expr> {
        self.conformal.as_ref()
    }

    pub fn with_casimirs(mut self, cas: CasimirPair) -> Bivector {
        self.casimirs = Some(cas);
        self
    }

    /// The Casimir pair this bivector was built from, if known.
    pub fn casimirs(&self) -> Option<&CasimirPair> {
        self.casimirs.as_ref()
    }

    /// Unscaled component `π^{ij}`.
    pub fn component(&self, i: usize, j: usize) -> &Expr {
        &self.components[i][j]
    }

    pub fn components(&self) -> &[[Expr; 4]; 4] {
        &self.components
    }

    /// Components with the conformal factor folded in.
    pub fn scaled(&self) -> [[Expr; 4]; 4] {
        match &self.conformal {
            None => self.components.clone(),
            Some(k) => std::array::from_fn(|i| std::array::from_fn(|j| k * &self.components[i][j])),
        }
    }

    pub fn substitute_s(&self, s: &BigRational) -> Bivector {
        Bivector {
            components: std::array::from_fn(|i| {
                std::array::from_fn(|j| self.components[i][j].substitute_s(s))
            }),
            conformal: self.conformal.as_ref().map(|k| k.substitute_s(s)),
            casimirs: self.casimirs.as_ref().map(|c| c.substitute_s(s)),
        }
    }

    /// Exact component-wise equality of the scaled matrices.
    pub fn equals(&self, other: &Bivector) -> bool {
        let (a, b) = (self.scaled(), other.scaled());
        (0..4).all(|i| (0..4).all(|j| a[i][j].equals(&b[i][j])))
    }

    /// Numeric matrix at `p`, with `k` folded in.
    pub fn evaluate(&self, p: &Point4) -> Matrix4<f64> {
        let k = self.conformal.as_ref().map_or(1.0, |k| k.evaluate(p));
        Matrix4::from_fn(|i, j| k * self.components[i][j].evaluate(p))
    }

    pub fn compile(&self) -> CompiledBivector {
        CompiledBivector {
            upper: std::array::from_fn(|n| {
                let (i, j) = UPPER_SLOTS[n];
                self.components[i][j].compile()
            }),
            conformal: self.conformal.as_ref().map(Expr::compile),
        }
    }

    pub fn to_json(&self) -> BivectorJson {
        BivectorJson {
            coords: COORDS.map(String::from).to_vec(),
            k: self.conformal.as_ref().map(Expr::to_string),
            matrix: self
                .components
                .iter()
                .map(|row| row.iter().map(Expr::to_string).collect())
                .collect(),
        }
    }

    pub fn from_json(j: &BivectorJson) -> Result<Bivector, PoissonError> {
        if j.coords != COORDS {
            return Err(PoissonError::Json(format!(
                "coords must be {COORDS:?}, found {:?}",
                j.coords
            )));
        }
        if j.matrix.len() != 4 || j.matrix.iter().any(|r| r.len() != 4) {
            return Err(PoissonError::Json("matrix must be 4x4".into()));
        }
        let mut components: [[Expr; 4]; 4] = Default::default();
        for (i, row) in j.matrix.iter().enumerate() {
            for (jj, text) in row.iter().enumerate() {
                components[i][jj] = parse(text).map_err(|source| PoissonError::Expr {
                    slot: format!("matrix[{i}][{jj}]"),
                    source,
                })?;
            }
        }
        let k =
            j.k.as_deref()
                .map(|text| {
                    parse(text).map_err(|source| PoissonError::Expr {
                        slot: "k".into(),
                        source,
                    })
                })
                .transpose()?;
        Bivector::from_matrix(components)?.with_conformal(k)
    }
}

impl fmt::Display for Bivector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.conformal {
            Some(k) => writeln!(f, "k = {k}")?,
            None => writeln!(f, "k = (symbolic)")?,
        }
        for (i, j) in UPPER_SLOTS {
            let e = &self.components[i][j];
            if !e.is_zero() {
                writeln!(f, "{{{}, {}}} = {e}", COORDS[i], COORDS[j])?;
            }
        }
        Ok(())
    }
}

/// Serialized form: `{ "coords": [...], "k": string|null, "matrix": [[...]] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BivectorJson {
    pub coords: Vec<String>,
    pub k: Option<String>,
    pub matrix: Vec<Vec<String>>,
}

pub(crate) const UPPER_SLOTS: [(usize, usize); 6] =
    [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Float image of a bivector for integration loops.
#[derive(Debug, Clone)]
pub struct CompiledBivector {
    upper: [crate::expr::CompiledExpr; 6],
    conformal: Option<crate::expr::CompiledExpr>,
}

impl CompiledBivector {
    pub fn evaluate(&self, p: &Point4) -> Matrix4<f64> {
        let k = self.conformal.as_ref().map_or(1.0, |k| k.evaluate(p));
        let mut m = Matrix4::zeros();
        for (n, (i, j)) in UPPER_SLOTS.iter().enumerate() {
            let v = k * self.upper[n].evaluate(p);
            m[(*i, *j)] = v;
            m[(*j, *i)] = -v;
        }
        m
    }
}

/// Exact determinant of a 4×4 matrix of polynomials (Leibniz expansion).
pub fn det4(m: &[[Expr; 4]; 4]) -> Expr {
    let mut out = Expr::zero();
    for (perm, sign) in permutations4() {
        // skip products containing a structurally zero entry
        if perm.iter().enumerate().any(|(r, &c)| m[r][c].is_zero()) {
            continue;
        }
        let mut prod = Expr::int(sign);
        for (r, &c) in perm.iter().enumerate() {
            prod = &prod * &m[r][c];
        }
        out += &prod;
    }
    out
}

fn permutations4() -> Vec<([usize; 4], i64)> {
    let mut out = Vec::with_capacity(24);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let p = [a, b, c, d];
                    if (0..4).all(|i| (i + 1..4).all(|j| p[i] != p[j])) {
                        let inversions = (0..4)
                            .flat_map(|i| (i + 1..4).map(move |j| (i, j)))
                            .filter(|&(i, j)| p[i] > p[j])
                            .count();
                        out.push((p, if inversions % 2 == 0 { 1 } else { -1 }));
                    }
                }
            }
        }
    }
    out
}

/// Builds the bivector `π^{ij} = det(ε^i, ε^j, dC1, dC2)` with conformal
/// factor `k`.
///
/// A `k` that changes sign or vanishes on the sample grid of
/// [`conformal_vanishing_witness`] is accepted but logged as a warning.
pub fn flaschka_ratiu(cas: &CasimirPair, k: Option<Expr>) -> Result<Bivector, PoissonError> {
    if let Some(k) = &k {
        if k.is_zero() {
            return Err(PoissonError::ZeroConformal);
        }
        if let Some(p) = conformal_vanishing_witness(k) {
            log::warn!(
                "conformal factor k = {k} is not non-vanishing: zero or sign change near ({}, {}, {}, {})",
                p.x,
                p.y,
                p.z,
                p.t
            );
        }
    }
    let d1 = gradient(&cas.c1);
    let d2 = gradient(&cas.c2);
    let column_matrix = |i: usize, j: usize| -> [[Expr; 4]; 4] {
        std::array::from_fn(|r| {
            [
                if r == i { Expr::one() } else { Expr::zero() },
                if r == j { Expr::one() } else { Expr::zero() },
                d1.0[r].clone(),
                d2.0[r].clone(),
            ]
        })
    };
    let upper = UPPER_SLOTS.map(|(i, j)| det4(&column_matrix(i, j)));
    Ok(Bivector::from_upper(upper)
        .with_conformal(k)?
        .with_casimirs(cas.clone()))
}

const CONFORMAL_GRID: usize = 10;

/// Looks for evidence that `k` vanishes on `[-2, 2]⁴`: a sample where
/// `|k| < 1e-12`, or two samples of opposite sign (so `k` has a zero in
/// between). Samples are the 10⁴ points of a regular grid, with `s = 0`.
pub fn conformal_vanishing_witness(k: &Expr) -> Option<Point4> {
    let compiled = k.compile();
    let axis: Vec<f64> = (0..CONFORMAL_GRID)
        .map(|i| -2.0 + 4.0 * i as f64 / (CONFORMAL_GRID - 1) as f64)
        .collect();
    let mut first_sign: Option<bool> = None;
    for &x in &axis {
        for &y in &axis {
            for &z in &axis {
                for &t in &axis {
                    let p = Point4::new(x, y, z, t);
                    let v = compiled.evaluate(&p);
                    if v.abs() < 1e-12 || !v.is_finite() {
                        return Some(p);
                    }
                    let positive = v > 0.0;
                    match first_sign {
                        None => first_sign = Some(positive),
                        Some(sign) if sign != positive => return Some(p),
                        _ => {}
                    }
                }
            }
        }
    }
    None
}

/// `J^{ijk} = Σ_l (π^{il} ∂_l π^{jk} + π^{jl} ∂_l π^{ki} + π^{kl} ∂_l π^{ij})`
/// on the scaled components, for each triple in [`TRIPLES`].
pub fn jacobiator(b: &Bivector) -> [Expr; 4] {
    let pi = b.scaled();
    // derivatives of every component, indexed [i][j][l]
    let d: [[[Expr; 4]; 4]; 4] = std::array::from_fn(|i| {
        std::array::from_fn(|j| Var::ALL.map(|v| pi[i][j].differentiate(v)))
    });
    TRIPLES.map(|(i, j, k)| {
        let mut acc = Expr::zero();
        for l in 0..4 {
            acc += &(&pi[i][l] * &d[j][k][l]);
            acc += &(&pi[j][l] * &d[k][i][l]);
            acc += &(&pi[k][l] * &d[i][j][l]);
        }
        acc
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PoissonVerdict {
    Poisson,
    /// The first triple (in [`TRIPLES`] order) whose Jacobiator is nonzero.
    NotPoisson {
        triple: (Var, Var, Var),
        jacobiator: Expr,
    },
}

impl PoissonVerdict {
    pub fn is_poisson(&self) -> bool {
        matches!(self, PoissonVerdict::Poisson)
    }
}

pub fn is_poisson(b: &Bivector) -> PoissonVerdict {
    let jac = jacobiator(b);
    for ((i, j, k), e) in TRIPLES.into_iter().zip(jac) {
        if !e.is_zero() {
            let v = |n| Var::from_index(n).expect("index < 4");
            return PoissonVerdict::NotPoisson {
                triple: (v(i), v(j), v(k)),
                jacobiator: e,
            };
        }
    }
    PoissonVerdict::Poisson
}

/// Matrix-covector product `π · dc`; zero exactly when `c` is a Casimir.
pub fn casimir_residual(b: &Bivector, c: &Expr) -> Vector4<Expr> {
    hamiltonian_field(b, c)
}

pub fn casimir_check(b: &Bivector, c: &Expr) -> bool {
    casimir_residual(b, c).is_zero()
}

/// `X_h^i = Σ_j π^{ij} ∂_j h`, so that `X_h(g) = {g, h}`.
pub fn hamiltonian_field(b: &Bivector, h: &Expr) -> Vector4<Expr> {
    let pi = b.scaled();
    let dh = gradient(h);
    Vector4(std::array::from_fn(|i| {
        (0..4).map(|j| &pi[i][j] * &dh.0[j]).sum()
    }))
}

/// Relative singular-value threshold used by [`rank_at`].
pub const RANK_RELATIVE_TOL: f64 = 1e-9;

/// Numeric rank of the evaluated matrix at `p`, in `{0, 2, 4}`.
pub fn rank_at(b: &Bivector, p: &Point4) -> usize {
    if let Some(k) = b.conformal() {
        if k.evaluate(p) == 0.0 {
            log::warn!(
                "conformal factor vanishes at ({}, {}, {}, {})",
                p.x,
                p.y,
                p.z,
                p.t
            );
        }
    }
    numeric_rank(&b.evaluate(p))
}

pub(crate) fn numeric_rank(m: &Matrix4<f64>) -> usize {
    let scale = m.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1e-300);
    let threshold = RANK_RELATIVE_TOL * scale;
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    // singular values of a real antisymmetric matrix come in equal pairs
    [sv[0], sv[2]].iter().filter(|&&v| v > threshold).count() * 2
}

/// Structure constants `c_{ij}^l` of the degree-one truncation of π.
///
/// Entries are polynomials in the parameter `s` alone (constants once `s`
/// is fixed), since `s·x^l` counts as a linear term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructureConstants {
    table: [[[Expr; 4]; 4]; 4],
}

impl StructureConstants {
    pub fn get(&self, i: usize, j: usize, l: usize) -> &Expr {
        &self.table[i][j][l]
    }

    /// `{x^i, x^j}_lin = Σ_l c_{ij}^l x^l`.
    pub fn bracket(&self, i: usize, j: usize) -> Expr {
        Var::ALL
            .iter()
            .map(|&v| &self.table[i][j][v.index()] * &Expr::var(v))
            .sum()
    }

    pub fn is_zero(&self) -> bool {
        self.table.iter().flatten().flatten().all(Expr::is_zero)
    }
}

/// A constant (coordinate-free) term removed from `π^{ij}` by the truncation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DroppedConstant {
    pub i: usize,
    pub j: usize,
    pub value: Expr,
}

impl fmt::Display for DroppedConstant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "dropped constant term {} from {{{}, {}}}",
            self.value, COORDS[self.i], COORDS[self.j]
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearPart {
    pub constants: StructureConstants,
    pub dropped: Vec<DroppedConstant>,
}

/// Degree-one truncation at the origin of the scaled components. With no
/// conformal factor this is the `k ≡ 1` linear part.
pub fn linear_part(b: &Bivector) -> LinearPart {
    let pi = b.scaled();
    let mut table: [[[Expr; 4]; 4]; 4] = Default::default();
    let mut dropped = Vec::new();
    for i in 0..4 {
        for j in 0..4 {
            for (m, c) in pi[i][j].terms() {
                match m.coordinate_degree() {
                    0 if i < j => {
                        let e = Expr::term(s_only(m), c.clone());
                        match dropped
                            .iter_mut()
                            .find(|d: &&mut DroppedConstant| d.i == i && d.j == j)
                        {
                            Some(d) => d.value += &e,
                            None => dropped.push(DroppedConstant { i, j, value: e }),
                        }
                    }
                    1 => {
                        let l = (0..4).find(|&l| m.0[l] == 1).expect("degree one");
                        table[i][j][l] += &Expr::term(s_only(m), c.clone());
                    }
                    _ => {}
                }
            }
        }
    }
    for d in &dropped {
        log::info!("{d}");
    }
    LinearPart {
        constants: StructureConstants { table },
        dropped,
    }
}

fn s_only(m: &Monomial) -> Monomial {
    let mut e = [0; 5];
    e[4] = m.s_exponent();
    Monomial(e)
}
