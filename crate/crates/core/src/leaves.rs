//! Numeric geometry of the two-dimensional leaves: an oriented orthonormal
//! tangent frame, covector solutions of the anchor equation `B_p(α) = u`,
//! the symplectic form on the leaf, and Hamiltonian flow.
//!
//! The anchor map is `B_p(α)^i = Σ_j π^{ij}(p) α_j`, and the leaf form is
//! `ω(u, v) = ⟨α, v⟩ = −⟨β, u⟩` where `B_p(α) = u`, `B_p(β) = v`.

use std::io::{self, Write};

use nalgebra::{Matrix4, Vector4 as NVector4};
use thiserror::Error;

use crate::expr::{CompiledExpr, Expr};
use crate::point::Point4;
use crate::poisson::{gradient, hamiltonian_field, numeric_rank, Bivector, Covector4, Vector4};

/// Tolerance for residuals, orthonormality and the antisymmetry cross-check.
pub const LEAF_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LeafError {
    #[error("singular point ({x}, {y}, {z}, {t}): bivector rank {rank} < 2", x = .point.x, y = .point.y, z = .point.z, t = .point.t)]
    SingularPoint { point: Point4, rank: usize },
    #[error("bivector has rank 4 at ({x}, {y}, {z}, {t}); leaves are not two-dimensional", x = .point.x, y = .point.y, z = .point.z, t = .point.t)]
    FullRank { point: Point4 },
    #[error("vector is not in the image of the anchor map (residual {residual:e})")]
    NotInImage { residual: f64 },
    #[error("bivector carries no Casimir pair; build it from Casimirs to orient leaves")]
    MissingCasimirs,
    #[error("leaf plane projects degenerately onto the d{a}∧d{b} coordinate plane")]
    DegenerateProjection { a: char, b: char },
    #[error("invalid flow parameters: {0}")]
    InvalidFlow(String),
    #[error("trajectory left double-precision range at step {step}")]
    NonFinite { step: usize },
}

/// Oriented orthonormal frame of the leaf through `base`, with one anchor
/// preimage for each frame vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafFrame {
    pub base: Point4,
    pub u: Vector4,
    pub v: Vector4,
    pub alpha: Covector4,
    pub beta: Covector4,
}

fn to_vector(v: &NVector4<f64>) -> Vector4 {
    Vector4([v[0], v[1], v[2], v[3]])
}

fn gram_det(a: &NVector4<f64>, b: &NVector4<f64>) -> f64 {
    a.norm_squared() * b.norm_squared() - a.dot(b).powi(2)
}

fn det_columns(cols: [&[f64; 4]; 4]) -> f64 {
    Matrix4::from_fn(|r, c| cols[c][r]).determinant()
}

fn check_rank(m: &Matrix4<f64>, p: &Point4) -> Result<(), LeafError> {
    match numeric_rank(m) {
        2 => Ok(()),
        4 => Err(LeafError::FullRank { point: *p }),
        rank => Err(LeafError::SingularPoint { point: *p, rank }),
    }
}

/// Builds the tangent frame at a regular point: the pair of image columns
/// `B_p(dx^j)` with the largest Gram determinant, Gram–Schmidt
/// orthonormalized, then oriented so that `det(u, v, ∇C1, ∇C2) > 0`.
pub fn leaf_tangent_frame(b: &Bivector, p: &Point4) -> Result<LeafFrame, LeafError> {
    let cas = b.casimirs().ok_or(LeafError::MissingCasimirs)?;
    let m = b.evaluate(p);
    check_rank(&m, p)?;

    let cols: Vec<NVector4<f64>> = (0..4).map(|j| m.column(j).into_owned()).collect();
    let mut best = (0, 1, f64::NEG_INFINITY);
    for i in 0..4 {
        for j in (i + 1)..4 {
            let g = gram_det(&cols[i], &cols[j]);
            if g > best.2 {
                best = (i, j, g);
            }
        }
    }
    let u = cols[best.0].normalize();
    let w = cols[best.1] - u * u.dot(&cols[best.1]);
    let mut v = w.normalize();

    let d1 = gradient(&cas.c1).evaluate(p).0;
    let d2 = gradient(&cas.c2).evaluate(p).0;
    let (ua, va) = ([u[0], u[1], u[2], u[3]], [v[0], v[1], v[2], v[3]]);
    if det_columns([&ua, &va, &d1, &d2]) < 0.0 {
        v = -v;
    }

    let u = to_vector(&u);
    let v = to_vector(&v);
    let alpha = solve_with(&m, &u)?;
    let beta = solve_with(&m, &v)?;
    Ok(LeafFrame {
        base: *p,
        u,
        v,
        alpha,
        beta,
    })
}

fn solve_with(m: &Matrix4<f64>, u: &Vector4) -> Result<Covector4, LeafError> {
    let rhs = NVector4::from(u.0);
    let scale = m.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1e-300);
    let svd = m.svd(true, true);
    let alpha = svd
        .solve(&rhs, crate::poisson::RANK_RELATIVE_TOL * scale)
        .expect("u and v were computed");
    let residual = (m * alpha - rhs).norm();
    if residual > LEAF_TOL * rhs.norm().max(1.0) {
        return Err(LeafError::NotInImage { residual });
    }
    Ok(Covector4([alpha[0], alpha[1], alpha[2], alpha[3]]))
}

/// Least-squares solution of `B_p α = u`. Any solution is as good as any
/// other for pairing against leaf-tangent vectors.
pub fn solve_anchor(b: &Bivector, p: &Point4, u: &Vector4) -> Result<Covector4, LeafError> {
    solve_with(&b.evaluate(p), u)
}

/// The leaf form evaluated on the oriented orthonormal frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafForm {
    /// `⟨α, v⟩`: the coefficient of ω against the Euclidean area form.
    pub coefficient: f64,
    /// `−⟨β, u⟩`, which must agree with `coefficient`.
    pub from_beta: f64,
    pub frame: LeafFrame,
}

impl LeafForm {
    pub fn antisymmetry_defect(&self) -> f64 {
        (self.coefficient - self.from_beta).abs()
    }
}

pub fn leaf_form(b: &Bivector, p: &Point4) -> Result<LeafForm, LeafError> {
    let frame = leaf_tangent_frame(b, p)?;
    let coefficient = frame.alpha.pair(&frame.v);
    let from_beta = -frame.beta.pair(&frame.u);
    let form = LeafForm {
        coefficient,
        from_beta,
        frame,
    };
    if form.antisymmetry_defect() > LEAF_TOL * coefficient.abs().max(1.0) {
        log::warn!(
            "leaf form not antisymmetric at ({}, {}, {}, {}): <alpha,v> = {coefficient}, -<beta,u> = {from_beta}",
            p.x,
            p.y,
            p.z,
            p.t
        );
    }
    Ok(form)
}

/// `ω_Σ(u, v)` for the oriented orthonormal leaf frame at `p`.
pub fn leaf_form_coefficient(b: &Bivector, p: &Point4) -> Result<f64, LeafError> {
    leaf_form(b, p).map(|f| f.coefficient)
}

/// Coefficient of ω against the restriction of the coordinate form
/// `dx^a ∧ dx^b` to the leaf: `ω(u, v) / (dx^a ∧ dx^b)(u, v)`.
pub fn chart_plane_coefficient(
    b: &Bivector,
    p: &Point4,
    a: crate::expr::Var,
    c: crate::expr::Var,
) -> Result<f64, LeafError> {
    let form = leaf_form(b, p)?;
    let (u, v) = (&form.frame.u.0, &form.frame.v.0);
    let (i, j) = (a.index(), c.index());
    let area = u[i] * v[j] - u[j] * v[i];
    if area.abs() < 1e-12 {
        return Err(LeafError::DegenerateProjection {
            a: a.symbol(),
            b: c.symbol(),
        });
    }
    Ok(form.coefficient / area)
}

/// Values of the conserved quantities at one trajectory point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conserved {
    pub c1: f64,
    pub c2: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Vec<Point4>,
    pub dt: f64,
    pub conserved: Vec<Conserved>,
    /// Largest deviation of C1, C2 and h from their initial values.
    pub drift: Conserved,
}

impl Trajectory {
    /// CSV with header `step,x,y,z,t,C1,C2,H`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "step,x,y,z,t,C1,C2,H")?;
        for (step, (p, c)) in self.points.iter().zip(&self.conserved).enumerate() {
            writeln!(
                out,
                "{step},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                p.x, p.y, p.z, p.t, c.c1, c.c2, c.h
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec");
        String::from_utf8(buf).expect("ascii")
    }
}

/// Integrates `X_h = B(dh)` from `p0` with classical fixed-step RK4.
pub fn flow(
    b: &Bivector,
    h: &Expr,
    p0: &Point4,
    dt: f64,
    steps: usize,
) -> Result<Trajectory, LeafError> {
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(LeafError::InvalidFlow(format!(
            "dt must be a finite non-negative number, got {dt}"
        )));
    }
    if steps == 0 {
        return Err(LeafError::InvalidFlow("steps must be at least 1".into()));
    }
    if !p0.is_finite() {
        return Err(LeafError::NonFinite { step: 0 });
    }
    let cas = b.casimirs().ok_or(LeafError::MissingCasimirs)?;
    let field: [CompiledExpr; 4] = {
        let x = hamiltonian_field(b, h);
        std::array::from_fn(|i| x.0[i].compile())
    };
    let (c1, c2, hc) = (cas.c1.compile(), cas.c2.compile(), h.compile());
    let measure = |p: &Point4| Conserved {
        c1: c1.evaluate(p),
        c2: c2.evaluate(p),
        h: hc.evaluate(p),
    };
    let velocity = |c: [f64; 4]| -> [f64; 4] {
        let q = Point4::from_coords(c, p0.s);
        std::array::from_fn(|i| field[i].evaluate(&q))
    };
    let axpy =
        |a: [f64; 4], k: [f64; 4], f: f64| -> [f64; 4] { std::array::from_fn(|i| a[i] + f * k[i]) };

    let mut points = Vec::with_capacity(steps + 1);
    let mut conserved = Vec::with_capacity(steps + 1);
    points.push(*p0);
    conserved.push(measure(p0));
    let mut y = p0.coords();
    for step in 1..=steps {
        let k1 = velocity(y);
        let k2 = velocity(axpy(y, k1, dt / 2.0));
        let k3 = velocity(axpy(y, k2, dt / 2.0));
        let k4 = velocity(axpy(y, k3, dt));
        y = std::array::from_fn(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        let p = Point4::from_coords(y, p0.s);
        if !p.is_finite() {
            return Err(LeafError::NonFinite { step });
        }
        points.push(p);
        conserved.push(measure(&p));
    }

    let first = conserved[0];
    let drift = conserved.iter().fold(
        Conserved {
            c1: 0.0,
            c2: 0.0,
            h: 0.0,
        },
        |d, c| Conserved {
            c1: d.c1.max((c.c1 - first.c1).abs()),
            c2: d.c2.max((c.c2 - first.c2).abs()),
            h: d.h.max((c.h - first.h).abs()),
        },
    );
    Ok(Trajectory {
        points,
        dt,
        conserved,
        drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Var;
    use crate::models::{model, ModelName};
    use crate::poisson::{flaschka_ratiu, CasimirPair};

    fn p(s: &str) -> Expr {
        s.parse().unwrap()
    }

    fn cusp() -> Bivector {
        model(ModelName::Cusp, None).unwrap().bivector()
    }

    /// `1 / |∇C1 ∧ ∇C2|` from the Gram determinant of the gradients, for
    /// k = 1. Independent of the frame and the anchor solve.
    fn gram_oracle(cas: &CasimirPair, q: &Point4) -> f64 {
        let a = NVector4::from(gradient(&cas.c1).evaluate(q).0);
        let b = NVector4::from(gradient(&cas.c2).evaluate(q).0);
        1.0 / gram_det(&a, &b).sqrt()
    }

    #[test]
    fn cusp_frame_spans_first_two_columns() {
        let q = Point4::new(0.0, 1.0, 1.0, 1.0);
        let f = leaf_tangent_frame(&cusp(), &q).unwrap();
        // columns x and y of the cusp matrix there: (0,-2,-2,0), (2,0,-3,0)
        let (c0, c1) = ([0.0, -2.0, -2.0, 0.0], [2.0, 0.0, -3.0, 0.0]);
        for w in [&f.u, &f.v] {
            // w = a c0 + b c1: solve on the x and y entries, check z and t
            let b = w.0[0] / 2.0;
            let a = -w.0[1] / 2.0;
            assert!((w.0[2] - (a * c0[2] + b * c1[2])).abs() < 1e-12, "{w:?}");
            assert!(w.0[3].abs() < 1e-12, "{w:?}");
        }
        assert!((f.u.norm() - 1.0).abs() < 1e-12);
        assert!((f.v.norm() - 1.0).abs() < 1e-12);
        assert!(f.u.dot(&f.v).abs() < 1e-12);
    }

    #[test]
    fn frame_is_tangent_and_oriented() {
        for name in ModelName::ALL {
            let m = model(name, name.uses_s().then_some(0.5)).unwrap();
            let b = m.bivector();
            let q = m.point(0.3, -0.7, 1.1, 0.4);
            let f = leaf_tangent_frame(&b, &q).unwrap();
            let d1 = gradient(&m.casimirs.c1).evaluate(&q);
            let d2 = gradient(&m.casimirs.c2).evaluate(&q);
            for w in [&f.u, &f.v] {
                assert!(d1.pair(w).abs() < LEAF_TOL);
                assert!(d2.pair(w).abs() < LEAF_TOL);
            }
            assert!(det_columns([&f.u.0, &f.v.0, &d1.0, &d2.0]) > 0.0, "{name}");
        }
    }

    #[test]
    fn singular_points_are_rejected() {
        let err = leaf_tangent_frame(&cusp(), &Point4::new(1.0, 0.0, 0.0, 1.0)).unwrap_err();
        assert!(matches!(err, LeafError::SingularPoint { rank: 0, .. }));
        let origin = Point4::default();
        for name in ModelName::ALL {
            let m = model(name, name.uses_s().then_some(0.0)).unwrap();
            assert!(matches!(
                leaf_tangent_frame(&m.bivector(), &origin),
                Err(LeafError::SingularPoint { .. })
            ));
        }
    }

    #[test]
    fn fold_frame_exists() {
        let m = model(ModelName::Fold, None).unwrap();
        let q = Point4::new(1.0, 0.0, 0.0, 0.0);
        assert_eq!(crate::poisson::rank_at(&m.bivector(), &q), 2);
        assert!(leaf_tangent_frame(&m.bivector(), &q).is_ok());
    }

    #[test]
    fn missing_casimirs() {
        let b = Bivector::wedge(Var::X, Var::Y, Expr::one());
        assert_eq!(
            leaf_tangent_frame(&b, &Point4::default()),
            Err(LeafError::MissingCasimirs)
        );
    }

    #[test]
    fn full_rank_is_not_a_leaf() {
        let cas = CasimirPair::new(p("t"), p("x"));
        let b = Bivector::from_upper([p("1"), p("0"), p("0"), p("0"), p("0"), p("1")])
            .with_casimirs(cas);
        assert!(matches!(
            leaf_tangent_frame(&b, &Point4::default()),
            Err(LeafError::FullRank { .. })
        ));
    }

    #[test]
    fn anchor_examples() {
        let b = cusp();
        let q = Point4::new(0.4, -0.3, 0.9, 1.2);
        let f = leaf_tangent_frame(&b, &q).unwrap();
        let alpha = solve_anchor(&b, &q, &f.u).unwrap();
        let m = b.evaluate(&q);
        let r = m * NVector4::from(alpha.0) - NVector4::from(f.u.0);
        assert!(r.norm() < 1e-9);

        let zero = solve_anchor(&b, &q, &Vector4([0.0; 4])).unwrap();
        assert!(zero.0.iter().all(|a| *a == 0.0));

        let grad = gradient(&p("t")).evaluate(&q);
        assert!(matches!(
            solve_anchor(&b, &q, &Vector4(grad.0)),
            Err(LeafError::NotInImage { .. })
        ));
    }

    #[test]
    fn cusp_leaf_coefficient_matches_gram_oracle() {
        let m = model(ModelName::Cusp, None).unwrap();
        let q = Point4::new(0.0, 1.0, 1.0, 1.0);
        let got = leaf_form_coefficient(&m.bivector(), &q).unwrap();
        // |∇t ∧ ∇C2| = √((3x²−3t)² + 4y² + 4z²) = √17 here
        let want = gram_oracle(&m.casimirs, &q);
        assert!((want - 1.0 / 17f64.sqrt()).abs() < 1e-15);
        assert!((got - want).abs() < 1e-8 * want);
    }

    #[test]
    fn merge_and_wrinkle_coefficients() {
        let merge = model(ModelName::Merge, Some(0.0)).unwrap();
        let q = merge.point(1.0, 1.0, 0.0, 0.0);
        let got = leaf_form_coefficient(&merge.bivector(), &q).unwrap();
        assert!((got - 1.0 / 13f64.sqrt()).abs() < 1e-12);

        let wrinkle = model(ModelName::Wrinkle, Some(0.0)).unwrap();
        let q = wrinkle.point(0.0, 1.0, 0.0, 1.0);
        let got = leaf_form_coefficient(&wrinkle.bivector(), &q).unwrap();
        assert!((got - 0.125).abs() < 1e-12);
    }

    #[test]
    fn conformal_factor_divides_coefficient() {
        let m = model(ModelName::Flip, Some(1.0)).unwrap();
        let k = p("1 + x^2 + y^2 + z^2 + t^2");
        let scaled = flaschka_ratiu(&m.casimirs, Some(k.clone())).unwrap();
        let q = m.point(0.2, 0.5, -0.4, 0.3);
        let plain = leaf_form_coefficient(&m.bivector(), &q).unwrap();
        let with_k = leaf_form_coefficient(&scaled, &q).unwrap();
        assert!((with_k * k.evaluate(&q) - plain).abs() < 1e-12);
    }

    #[test]
    fn chart_plane_reproduces_closed_forms() {
        let m = model(ModelName::Cusp, None).unwrap();
        let q = Point4::new(0.0, 1.0, 1.0, 1.0);
        let c = chart_plane_coefficient(&m.bivector(), &q, Var::Y, Var::Z).unwrap();
        let closed = m.expected_leaf_coefficient.unwrap().evaluate(&q);
        assert!((c.abs() - closed.abs()).abs() < 1e-10);
        assert!((closed + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn antisymmetry_of_recovered_form() {
        let m = model(ModelName::Wrinkle, Some(1.0)).unwrap();
        let q = m.point(0.6, -0.2, 0.8, -1.3);
        let f = leaf_form(&m.bivector(), &q).unwrap();
        assert!(f.antisymmetry_defect() < 1e-9);
    }

    #[test]
    fn casimir_flow_is_stationary() {
        let m = model(ModelName::Cusp, None).unwrap();
        let q = Point4::new(0.1, 0.5, 0.5, 0.5);
        let tr = flow(&m.bivector(), &m.casimirs.c1, &q, 1e-2, 50).unwrap();
        assert!(tr.points.iter().all(|x| *x == q));
        let tr = flow(&m.bivector(), &m.casimirs.c2, &q, 1e-2, 50).unwrap();
        assert!(tr.points.iter().all(|x| *x == q));
    }

    #[test]
    fn cusp_flow_conserves_casimirs() {
        let m = model(ModelName::Cusp, None).unwrap();
        let tr = flow(
            &m.bivector(),
            &p("x"),
            &Point4::new(0.0, 1.0, 1.0, 1.0),
            1e-3,
            1000,
        )
        .unwrap();
        assert_eq!(tr.points.len(), 1001);
        assert!(tr.drift.c1 < 1e-6);
        assert!(tr.drift.c2 < 1e-6);
        assert!(tr.drift.h < 1e-6);
        assert!(tr.points.last().unwrap() != &tr.points[0]);
    }

    #[test]
    fn zero_step_flow() {
        let m = model(ModelName::Birth, Some(0.0)).unwrap();
        let q = m.point(0.1, 0.2, 0.3, 0.4);
        let tr = flow(&m.bivector(), &p("x + y*z"), &q, 0.0, 1).unwrap();
        assert_eq!(tr.points, vec![q, q]);
        assert_eq!(
            tr.drift,
            Conserved {
                c1: 0.0,
                c2: 0.0,
                h: 0.0
            }
        );
    }

    #[test]
    fn flow_parameter_errors() {
        let b = cusp();
        let q = Point4::default();
        assert!(matches!(
            flow(&b, &p("x"), &q, -1.0, 5),
            Err(LeafError::InvalidFlow(_))
        ));
        assert!(matches!(
            flow(&b, &p("x"), &q, 0.1, 0),
            Err(LeafError::InvalidFlow(_))
        ));
        assert!(matches!(
            flow(&b, &p("x"), &q, f64::NAN, 1),
            Err(LeafError::InvalidFlow(_))
        ));
    }

    #[test]
    fn blow_up_is_reported() {
        // (z, t) gives ∂x∧∂y; h = x y² makes dy/dt = -y², which blows up
        let cas = CasimirPair::new(p("z"), p("t"));
        let b = flaschka_ratiu(&cas, None).unwrap();
        let res = flow(&b, &p("x*y^2"), &Point4::new(1.0, -4.0, 0.0, 0.0), 0.5, 200);
        assert!(matches!(res, Err(LeafError::NonFinite { .. })));
    }

    #[test]
    fn csv_layout() {
        let m = model(ModelName::Cusp, None).unwrap();
        let tr = flow(
            &m.bivector(),
            &p("x"),
            &Point4::new(0.0, 1.0, 1.0, 1.0),
            1e-3,
            2,
        )
        .unwrap();
        let csv = tr.to_csv();
        let lines: Vec<&str> = csv.split('\n').collect();
        assert_eq!(lines[0], "step,x,y,z,t,C1,C2,H");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[4], "");
        assert!(!csv.contains('\r'));
        let first: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(first[0], "0");
        assert_eq!(first[2], "1.0000000000000000e0");
        for field in &first[1..] {
            let mantissa = field.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.replace('.', "").len(), 17);
        }
    }
}
