//! The model algebra o(m+1,1) in the basis (ℓ, e_1, …, e_m, n) with its
//! |1|-grading, and the isotropy group H of the null line through ℓ.
//!
//! An algebra element with blocks (a, X, Zrow, A) is the matrix
//!
//! ```text
//! [ a   Zrow   0     ]
//! [ X   A     -Zrowᵀ ]
//! [ 0  -Xᵀ    -a     ]
//! ```
//!
//! with A skew. Grades: X ∈ g₋₁, (a, A) ∈ g₀, Zrow ∈ g₁.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::report::{CheckRecord, Config};

/// Exactness tolerance for float block identities.
pub const EXACT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AlgebraError {
    #[error("matrix is {rows}x{cols}, expected {want}x{want}")]
    Shape { rows: usize, cols: usize, want: usize },
    #[error("not in o(m+1,1): |MᵀS + SM| = {0:e}")]
    NotInAlgebra(f64),
    #[error("g is not orthogonal: |gᵀg − I| = {0:e}")]
    NotOrthogonal(f64),
    #[error("m must be at least 2, got {0}")]
    SmallM(usize),
}

/// The bilinear form matrix S with ⟨ℓ, n⟩ = 1 and ⟨e_i, e_j⟩ = δ_ij.
pub fn form_matrix(m: usize) -> DMatrix<f64> {
    let n = m + 2;
    let mut s = DMatrix::zeros(n, n);
    s[(0, n - 1)] = 1.0;
    s[(n - 1, 0)] = 1.0;
    for i in 1..=m {
        s[(i, i)] = 1.0;
    }
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradedDecomposition {
    /// g₋₁
    pub x: DVector<f64>,
    /// g₀ scalar part (multiple of the grading element)
    pub a: f64,
    /// g₀ skew part
    pub skew: DMatrix<f64>,
    /// g₁
    pub zrow: DVector<f64>,
}

impl GradedDecomposition {
    pub fn zero(m: usize) -> Self {
        GradedDecomposition {
            x: DVector::zeros(m),
            a: 0.0,
            skew: DMatrix::zeros(m, m),
            zrow: DVector::zeros(m),
        }
    }

    pub fn m(&self) -> usize {
        self.x.len()
    }

    pub fn assemble(&self) -> DMatrix<f64> {
        let m = self.m();
        let n = m + 2;
        let mut out = DMatrix::zeros(n, n);
        out[(0, 0)] = self.a;
        out[(n - 1, n - 1)] = -self.a;
        for i in 0..m {
            out[(0, i + 1)] = self.zrow[i];
            out[(i + 1, n - 1)] = -self.zrow[i];
            out[(i + 1, 0)] = self.x[i];
            out[(n - 1, i + 1)] = -self.x[i];
            for j in 0..m {
                out[(i + 1, j + 1)] = self.skew[(i, j)];
            }
        }
        out
    }

    /// The part in h = [g₀,g₀] ⊕ g₁ (a = 0, X = 0).
    pub fn h_part(&self) -> GradedDecomposition {
        GradedDecomposition {
            x: DVector::zeros(self.m()),
            a: 0.0,
            skew: self.skew.clone(),
            zrow: self.zrow.clone(),
        }
    }

    /// Restrict to a single grade k ∈ {−1, 0, 1}.
    pub fn grade(&self, k: i32) -> GradedDecomposition {
        let mut g = GradedDecomposition::zero(self.m());
        match k {
            -1 => g.x = self.x.clone(),
            0 => {
                g.a = self.a;
                g.skew = self.skew.clone();
            }
            1 => g.zrow = self.zrow.clone(),
            _ => {}
        }
        g
    }
}

/// |MᵀS + SM|_max
pub fn membership_residual(mat: &DMatrix<f64>) -> f64 {
    let m = mat.nrows() - 2;
    let s = form_matrix(m);
    (mat.transpose() * &s + &s * mat).amax()
}

pub fn grade_project(mat: &DMatrix<f64>) -> Result<GradedDecomposition, AlgebraError> {
    let n = mat.nrows();
    if n != mat.ncols() || n < 4 {
        return Err(AlgebraError::Shape {
            rows: mat.nrows(),
            cols: mat.ncols(),
            want: n.max(4),
        });
    }
    let r = membership_residual(mat);
    if r > EXACT_TOL {
        return Err(AlgebraError::NotInAlgebra(r));
    }
    let m = n - 2;
    Ok(GradedDecomposition {
        x: DVector::from_fn(m, |i, _| mat[(i + 1, 0)]),
        a: mat[(0, 0)],
        skew: DMatrix::from_fn(m, m, |i, j| mat[(i + 1, j + 1)]),
        zrow: DVector::from_fn(m, |i, _| mat[(0, i + 1)]),
    })
}

pub fn bracket(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a * b - b * a
}

pub fn grading_element(m: usize) -> DMatrix<f64> {
    let mut g = GradedDecomposition::zero(m);
    g.a = 1.0;
    g.assemble()
}

fn orthogonality_residual(g: &DMatrix<f64>) -> f64 {
    (g.transpose() * g - DMatrix::identity(g.nrows(), g.ncols())).amax()
}

fn check_orthogonal(g: &DMatrix<f64>) -> Result<(), AlgebraError> {
    let r = orthogonality_residual(g);
    if r > EXACT_TOL {
        Err(AlgebraError::NotOrthogonal(r))
    } else {
        Ok(())
    }
}

/// The group element of H with translation part w and rotation part g.
pub fn h_embed(w: &DVector<f64>, g: &DMatrix<f64>) -> Result<DMatrix<f64>, AlgebraError> {
    check_orthogonal(g)?;
    let m = w.len();
    let n = m + 2;
    let mut out = DMatrix::zeros(n, n);
    out[(0, 0)] = 1.0;
    out[(n - 1, n - 1)] = 1.0;
    out[(0, n - 1)] = -0.5 * w.norm_squared();
    let wg = w.transpose() * g;
    for i in 0..m {
        out[(0, i + 1)] = -wg[i];
        out[(i + 1, n - 1)] = w[i];
        for j in 0..m {
            out[(i + 1, j + 1)] = g[(i, j)];
        }
    }
    Ok(out)
}

/// Action of H on g/h ≅ ℝ × ℝᵐ: (a, X) ↦ (a − ⟨w, gX⟩, gX).
pub fn quotient_adjoint(
    w: &DVector<f64>,
    g: &DMatrix<f64>,
    a: f64,
    x: &DVector<f64>,
) -> Result<(f64, DVector<f64>), AlgebraError> {
    check_orthogonal(g)?;
    let gx = g * x;
    Ok((a - w.dot(&gx), gx))
}

/// Ad(σ)Y = σ Y σ⁻¹ read in g/h.
pub fn conjugation_quotient(sigma: &DMatrix<f64>, y: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let inv = sigma.clone().try_inverse().expect("group element is invertible");
    let c = sigma * y * inv;
    let m = y.nrows() - 2;
    (c[(0, 0)], DVector::from_fn(m, |i, _| c[(i + 1, 0)]))
}

/// Uniformly random orthogonal matrix (QR of a Gaussian-like matrix, sign fixed).
pub fn random_orthogonal(m: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(m, m, |_, _| rng.gen_range(-1.0..1.0));
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..m {
        if r[(j, j)] < 0.0 {
            for i in 0..m {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

pub fn random_vector(m: usize, rng: &mut impl Rng) -> DVector<f64> {
    DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn random_element(m: usize, rng: &mut impl Rng) -> GradedDecomposition {
    let a = DMatrix::from_fn(m, m, |_, _| rng.gen_range(-1.0..1.0));
    GradedDecomposition {
        x: random_vector(m, rng),
        a: rng.gen_range(-1.0..1.0),
        skew: &a - a.transpose(),
        zrow: random_vector(m, rng),
    }
}

const PAIRS: usize = 200;

/// Structure checks for the model algebra with m screen dimensions.
pub fn algebra_suite(m: usize, cfg: &Config) -> Result<Vec<CheckRecord>, AlgebraError> {
    if m < 2 {
        return Err(AlgebraError::SmallM(m));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.unwrap_or(0) ^ (m as u64).wrapping_mul(0x9e37));
    let tol = EXACT_TOL;
    let mut out = Vec::new();

    let mut membership: f64 = 0.0;
    let mut grading: f64 = 0.0;
    for _ in 0..PAIRS {
        let p = random_element(m, &mut rng);
        let q = random_element(m, &mut rng);
        membership = membership.max(membership_residual(&p.assemble()));
        for i in -1..=1 {
            for j in -1..=1 {
                let b = bracket(&p.grade(i).assemble(), &q.grade(j).assemble());
                let d = grade_project(&b)?;
                let k = i + j;
                let off: f64 = (-1..=1)
                    .filter(|&l| l != k)
                    .map(|l| d.grade(l).assemble().amax())
                    .fold(0.0, f64::max);
                grading = grading.max(off);
            }
        }
    }
    out.push(
        CheckRecord::new("algebra-membership", "MᵀS + SM = 0 for block elements", tol)
            .with_result(PAIRS, membership),
    );
    out.push(
        CheckRecord::new("grading-inclusions", "[g_i, g_j] ⊂ g_(i+j)", tol)
            .with_result(PAIRS, grading),
    );

    let e = grading_element(m);
    let mut eig: f64 = 0.0;
    for _ in 0..PAIRS {
        let p = random_element(m, &mut rng);
        for k in -1..=1 {
            let g = p.grade(k).assemble();
            let r = (bracket(&e, &g) - (k as f64) * &g).amax();
            eig = eig.max(r);
        }
    }
    out.push(
        CheckRecord::new("grading-element-eigenvalues", "ad(E) acts on g_k by k", tol)
            .with_result(PAIRS, eig),
    );

    let s = form_matrix(m);
    let mut group: f64 = 0.0;
    let mut iso: f64 = 0.0;
    let mut adj: f64 = 0.0;
    let mut rep: f64 = 0.0;
    let mut closure: f64 = 0.0;
    let mut ell = DVector::zeros(m + 2);
    ell[0] = 1.0;
    for _ in 0..PAIRS {
        let (w1, g1) = (random_vector(m, &mut rng), random_orthogonal(m, &mut rng));
        let (w2, g2) = (random_vector(m, &mut rng), random_orthogonal(m, &mut rng));
        let s1 = h_embed(&w1, &g1)?;
        let s2 = h_embed(&w2, &g2)?;
        group = group.max((s1.transpose() * &s * &s1 - &s).amax());
        iso = iso.max((&s1 * &ell - &ell).amax());

        let y = random_element(m, &mut rng);
        let (a, x) = (y.a, y.x.clone());
        let (ca, cx) = conjugation_quotient(&s1, &y.assemble());
        let (qa, qx) = quotient_adjoint(&w1, &g1, a, &x)?;
        adj = adj.max((ca - qa).abs().max((cx - &qx).amax()));

        let w12 = &w1 + &g1 * &w2;
        let g12 = &g1 * &g2;
        closure = closure.max((&s1 * &s2 - h_embed(&w12, &g12)?).amax());
        let (ia, ix) = quotient_adjoint(&w2, &g2, a, &x)?;
        let (ra, rx) = quotient_adjoint(&w1, &g1, ia, &ix)?;
        let (pa, px) = quotient_adjoint(&w12, &g12, a, &x)?;
        rep = rep.max((ra - pa).abs().max((rx - px).amax()));
    }
    out.push(
        CheckRecord::new("isotropy-group-preserves-form", "σᵀSσ = S on the image of H", tol)
            .with_result(PAIRS, group),
    );
    out.push(
        CheckRecord::new("isotropy-group-fixes-null-line", "σℓ = ℓ", tol).with_result(PAIRS, iso),
    );
    out.push(
        CheckRecord::new("isotropy-group-closure", "products stay in the image of H", tol)
            .with_result(PAIRS, closure),
    );
    out.push(
        CheckRecord::new(
            "quotient-adjoint-matches-conjugation",
            "Ad(σ) pushed to g/h",
            tol,
        )
        .with_result(PAIRS, adj),
    );
    out.push(
        CheckRecord::new("quotient-adjoint-representation", "composition law on g/h", tol)
            .with_result(PAIRS, rep),
    );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grading_element_is_pure_degree_zero() {
        let d = grade_project(&grading_element(3)).unwrap();
        assert_eq!(d.a, 1.0);
        assert_eq!(d.x.amax(), 0.0);
        assert_eq!(d.zrow.amax(), 0.0);
        assert_eq!(d.skew.amax(), 0.0);
    }

    #[test]
    fn linearity_of_projection() {
        let m = 3;
        let mut x = GradedDecomposition::zero(m);
        x.x = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let sum = grading_element(m) + x.assemble();
        let d = grade_project(&sum).unwrap();
        assert_eq!(d.x, x.x);
        assert_eq!(d.a, 1.0);
        assert_eq!(d.zrow.amax(), 0.0);
    }

    #[test]
    fn grading_element_brackets() {
        let m = 2;
        let e = grading_element(m);
        let mut x = GradedDecomposition::zero(m);
        x.x = DVector::from_vec(vec![0.3, 0.7]);
        let xm = x.assemble();
        assert!((bracket(&e, &xm) + &xm).amax() < 1e-15);
        let mut z = GradedDecomposition::zero(m);
        z.zrow = DVector::from_vec(vec![-1.0, 2.0]);
        let zm = z.assemble();
        assert!((bracket(&e, &zm) - &zm).amax() < 1e-15);
        assert_eq!(bracket(&xm, &xm).amax(), 0.0);
    }

    #[test]
    fn non_member_rejected() {
        let mut bad = DMatrix::zeros(4, 4);
        bad[(0, 0)] = 1.0;
        assert!(matches!(grade_project(&bad), Err(AlgebraError::NotInAlgebra(_))));
        assert!(matches!(
            h_embed(&DVector::zeros(2), &(2.0 * DMatrix::identity(2, 2))),
            Err(AlgebraError::NotOrthogonal(_))
        ));
    }

    #[test]
    fn h_embed_special_cases() {
        let id = h_embed(&DVector::zeros(3), &DMatrix::identity(3, 3)).unwrap();
        assert_eq!(id, DMatrix::identity(5, 5));
        let w = DVector::from_vec(vec![1.0, 2.0]);
        let u = h_embed(&w, &DMatrix::identity(2, 2)).unwrap();
        assert_eq!(u[(0, 1)], -1.0);
        assert_eq!(u[(0, 2)], -2.0);
        assert_eq!(u[(0, 3)], -2.5);
        assert_eq!(u[(1, 3)], 1.0);
        assert_eq!(u[(2, 3)], 2.0);
    }

    #[test]
    fn quotient_adjoint_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = DVector::from_vec(vec![0.2, -0.4, 0.9]);
        let (a, y) = quotient_adjoint(&DVector::zeros(3), &DMatrix::identity(3, 3), 0.7, &x).unwrap();
        assert_eq!((a, y.clone()), (0.7, x.clone()));
        let w = DVector::from_vec(vec![1.0, 1.0, -1.0]);
        let (a, y) = quotient_adjoint(&w, &DMatrix::identity(3, 3), 0.0, &x).unwrap();
        assert!((a + w.dot(&x)).abs() < 1e-15);
        assert_eq!(y, x);
        for _ in 0..10 {
            let g = random_orthogonal(3, &mut rng);
            let w = random_vector(3, &mut rng);
            let (a, y) = quotient_adjoint(&w, &g, 1.0, &DVector::zeros(3)).unwrap();
            assert_eq!(a, 1.0);
            assert_eq!(y.amax(), 0.0);
        }
    }

    #[test]
    fn suite_passes_for_small_m() {
        for m in 2..=4 {
            let recs = algebra_suite(m, &Config::default()).unwrap();
            for r in recs {
                assert!(r.pass, "m={m}: {}", r.text_line());
            }
        }
        assert!(algebra_suite(1, &Config::default()).is_err());
    }
}
