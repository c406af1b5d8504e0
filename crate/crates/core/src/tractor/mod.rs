//! The standard tractor bundle in τ-splittings.
//!
//! A section in the splitting of a screen τ is a triple (α, X, β) with X in
//! An(τ), stored by its components in the frame of τ. A lightlike-compatible
//! structure is stored once, at a base screen τ₀, as connection coefficients
//! Γ_a[i][j] = h(∇_{∂_a} E_i, E_j) and D_a[j] = h(D(∂_a), E_j); the data for
//! any other screen is derived on demand through the change laws.

pub mod curvature;
pub mod laws;

use crate::calculus::{
    d_form_apply, lie_bracket, LightlikeStructure, OneForm, ScalarExpr, VectorField,
};
use crate::screen::{l_field, project, ScreenForm};

pub use curvature::{
    connection_matrices, contract, curvature_on_section, CurvatureError, TractorCurvature,
};

pub type Matrix = Vec<Vec<ScalarExpr>>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TractorError {
    #[error("sections belong to different splittings")]
    SplittingMismatch,
    #[error("structure arity mismatch: {0}")]
    Arity(String),
}

/// Connection data (∇^τ, D^τ) for one screen, in its frame.
#[derive(Clone, Debug)]
pub struct ScreenConnection {
    pub screen: ScreenForm,
    /// `gamma[a][i][j]` = h(∇_{∂_a} E_i, E_j)
    pub gamma: Vec<Matrix>,
    /// `d[a][j]` = h(D(∂_a), E_j)
    pub d: Vec<Vec<ScalarExpr>>,
}

impl ScreenConnection {
    pub fn n(&self) -> usize {
        self.gamma.len()
    }

    pub fn m(&self) -> usize {
        self.screen.m()
    }

    /// Γ_V = Σ_a V^a Γ_a
    pub fn gamma_along(&self, v: &VectorField) -> Matrix {
        let m = self.m();
        (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        v.0.iter()
                            .zip(&self.gamma)
                            .filter(|(c, g)| !c.is_zero() && !g[i][j].is_zero())
                            .map(|(&c, g)| c * g[i][j])
                            .sum()
                    })
                    .collect()
            })
            .collect()
    }

    /// Frame components of D(V).
    pub fn d_along(&self, v: &VectorField) -> Vec<ScalarExpr> {
        (0..self.m())
            .map(|j| {
                v.0.iter()
                    .zip(&self.d)
                    .filter(|(c, d)| !c.is_zero() && !d[j].is_zero())
                    .map(|(&c, d)| c * d[j])
                    .sum()
            })
            .collect()
    }

    pub fn d_vector(&self, v: &VectorField) -> VectorField {
        self.screen.vector(&self.d_along(v))
    }

    /// (∇_V y)_j = V(y_j) + Σ_i y_i Γ_V[i][j] on frame components.
    pub fn cov_components(
        &self,
        st: &LightlikeStructure,
        v: &VectorField,
        y: &[ScalarExpr],
    ) -> Vec<ScalarExpr> {
        let g = self.gamma_along(v);
        (0..self.m())
            .map(|j| {
                let mut terms = vec![st.chart.directional(v, y[j])];
                for (i, &yi) in y.iter().enumerate() {
                    if !yi.is_zero() && !g[i][j].is_zero() {
                        terms.push(yi * g[i][j]);
                    }
                }
                terms.into_iter().sum()
            })
            .collect()
    }

    /// ∇_V(P^τ Y) as a vector field.
    pub fn cov(&self, st: &LightlikeStructure, v: &VectorField, y: &VectorField) -> VectorField {
        let comps = self.screen.components(st, y);
        self.screen.vector(&self.cov_components(st, v, &comps))
    }

    /// θ(V,W) = h(V, D W) − h(W, D V)
    pub fn theta(&self, st: &LightlikeStructure, v: &VectorField, w: &VectorField) -> ScalarExpr {
        let dv = self.d_along(v);
        let dw = self.d_along(w);
        let pv = self.screen.components(st, v);
        let pw = self.screen.components(st, w);
        (0..self.m()).map(|j| pv[j] * dw[j] - pw[j] * dv[j]).sum()
    }

    /// B(V,W) = τ(V) W − τ(W) V
    pub fn b_form(&self, v: &VectorField, w: &VectorField) -> VectorField {
        let tau = &self.screen.tau;
        w.scale(tau.apply(v)).sub(&v.scale(tau.apply(w)))
    }

    /// dτ(V,W)
    pub fn dtau(&self, st: &LightlikeStructure, v: &VectorField, w: &VectorField) -> ScalarExpr {
        d_form_apply(&st.chart, &self.screen.tau, v, w)
    }

    /// Galilean extension ∇̃_V W = V(τW) Z + τ(W) P(V) + ∇_V(P W).
    pub fn galilean(&self, st: &LightlikeStructure, v: &VectorField, w: &VectorField) -> VectorField {
        let tau = &self.screen.tau;
        let tw = tau.apply(w);
        st.z
            .scale(st.chart.directional(v, tw))
            .add(&project(st, tau, v).scale(tw))
            .add(&self.cov(st, v, w))
    }

    /// T̃or(V,W) = ∇̃_V W − ∇̃_W V − [V,W]
    pub fn galilean_torsion(
        &self,
        st: &LightlikeStructure,
        v: &VectorField,
        w: &VectorField,
    ) -> VectorField {
        self.galilean(st, v, w)
            .sub(&self.galilean(st, w, v))
            .sub(&lie_bracket(&st.chart, v, w))
    }

    /// 𝐓(V,W) = P(T̃or(V,W)) + (dτ(V,W) + θ(V,W)) Z
    pub fn t_omega(&self, st: &LightlikeStructure, v: &VectorField, w: &VectorField) -> VectorField {
        let tor = self.galilean_torsion(st, v, w);
        let coeff = self.dtau(st, v, w) + self.theta(st, v, w);
        project(st, &self.screen.tau, &tor).add(&st.z.scale(coeff))
    }

    /// J_ij = h(∇_Z E_i − [Z, E_i], E_j)
    pub fn j_matrix(&self, st: &LightlikeStructure) -> Matrix {
        let gz = self.gamma_along(&st.z);
        let m = self.m();
        (0..m)
            .map(|i| {
                let br = lie_bracket(&st.chart, &st.z, &self.screen.frame[i]);
                (0..m)
                    .map(|j| gz[i][j] - st.h.apply(&br, &self.screen.frame[j]))
                    .collect()
            })
            .collect()
    }
}

/// A lightlike-compatible structure (∇, D), stored at its base screen.
/// Every Γ_a is antisymmetric by construction.
#[derive(Clone, Debug)]
pub struct CompatibleStructure {
    base: ScreenConnection,
}

impl CompatibleStructure {
    /// Keeps the strict upper triangle of each Γ_a and mirrors it.
    pub fn from_upper(
        screen: ScreenForm,
        gamma: Vec<Matrix>,
        d: Vec<Vec<ScalarExpr>>,
    ) -> Result<Self, TractorError> {
        let m = screen.m();
        let n = screen.tau.0.len();
        if gamma.len() != n || d.len() != n {
            return Err(TractorError::Arity(format!(
                "expected {n} coordinate directions"
            )));
        }
        if gamma.iter().any(|g| g.len() != m || g.iter().any(|r| r.len() != m))
            || d.iter().any(|r| r.len() != m)
        {
            return Err(TractorError::Arity(format!("expected {m}x{m} blocks")));
        }
        let gamma = gamma
            .into_iter()
            .map(|g| {
                (0..m)
                    .map(|i| {
                        (0..m)
                            .map(|j| match i.cmp(&j) {
                                std::cmp::Ordering::Less => g[i][j],
                                std::cmp::Ordering::Equal => ScalarExpr::ZERO,
                                std::cmp::Ordering::Greater => -g[j][i],
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(CompatibleStructure {
            base: ScreenConnection { screen, gamma, d },
        })
    }

    /// Replaces each Γ_a by ½(Γ_a − Γ_aᵀ).
    pub fn antisymmetrized(
        screen: ScreenForm,
        gamma: Vec<Matrix>,
        d: Vec<Vec<ScalarExpr>>,
    ) -> Result<Self, TractorError> {
        let m = screen.m();
        let upper = gamma
            .iter()
            .map(|g| {
                (0..m)
                    .map(|i| {
                        (0..m)
                            .map(|j| if i < j { 0.5 * (g[i][j] - g[j][i]) } else { ScalarExpr::ZERO })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self::from_upper(screen, upper, d)
    }

    pub fn base(&self) -> &ScreenConnection {
        &self.base
    }

    pub fn screen(&self) -> &ScreenForm {
        &self.base.screen
    }

    /// Data for another screen via the change laws.
    pub fn derive(&self, st: &LightlikeStructure, target: &ScreenForm) -> ScreenConnection {
        derive_from(st, &self.base, target)
    }

    /// Γ_a += ε K_a with seeded antisymmetric K_a (entries in [−1, 1]).
    pub fn perturbed(&self, eps: f64, seed: u64) -> CompatibleStructure {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let m = self.base.m();
        let gamma = self
            .base
            .gamma
            .iter()
            .map(|g| {
                let mut out = g.clone();
                for i in 0..m {
                    for j in (i + 1)..m {
                        let k: f64 = rng.gen_range(-1.0..1.0);
                        out[i][j] = out[i][j] + eps * k;
                        out[j][i] = -out[i][j];
                    }
                }
                out
            })
            .collect();
        CompatibleStructure {
            base: ScreenConnection {
                screen: self.base.screen.clone(),
                gamma,
                d: self.base.d.clone(),
            },
        }
    }
}

/// With F the frame of `target`, E the frame of `from.screen`,
/// c_ik = h(F_i, E_k) and ℓ_i = τ₀(F_i) (so L_{τ₀,τ} = Σ ℓ_i F_i):
///
/// Γ_a[i][j] = Σ_k (∂_a c_ik + Σ_l c_il Γ⁰_a[l][k]) c_jk + ℓ_i h(∂_a,F_j) − h(F_i,∂_a) ℓ_j
/// D_a[j]    = Σ_k D⁰_a[k] c_jk + ½|ℓ|² h(∂_a,F_j) − τ₀_a ℓ_j − (∂_a ℓ_j + Σ_i ℓ_i Γ_a[i][j])
pub fn derive_from(
    st: &LightlikeStructure,
    from: &ScreenConnection,
    target: &ScreenForm,
) -> ScreenConnection {
    let n = st.n();
    let m = st.m();
    let f = &target.frame;
    let c: Matrix = (0..m)
        .map(|i| (0..m).map(|k| st.h.apply(&f[i], &from.screen.frame[k])).collect())
        .collect();
    let ell: Vec<ScalarExpr> = f.iter().map(|fi| from.screen.tau.apply(fi)).collect();
    let l2: ScalarExpr = ell.iter().map(|&l| l * l).sum();
    let mut gamma = Vec::with_capacity(n);
    let mut d = Vec::with_capacity(n);
    for a in 0..n {
        let da = VectorField::coordinate(n, a);
        let hf: Vec<ScalarExpr> = f.iter().map(|fj| st.h.apply(&da, fj)).collect();
        let g0 = &from.gamma[a];
        // row i of P^{τ₀}F_i transported: t_ik = ∂_a c_ik + Σ_l c_il Γ⁰[l][k]
        let t: Matrix = (0..m)
            .map(|i| {
                (0..m)
                    .map(|k| {
                        let mut terms = vec![st.chart.partial(c[i][k], a)];
                        for l in 0..m {
                            if !c[i][l].is_zero() && !g0[l][k].is_zero() {
                                terms.push(c[i][l] * g0[l][k]);
                            }
                        }
                        terms.into_iter().sum()
                    })
                    .collect()
            })
            .collect();
        let g: Matrix = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        let mut terms: Vec<ScalarExpr> = (0..m)
                            .filter(|&k| !t[i][k].is_zero() && !c[j][k].is_zero())
                            .map(|k| t[i][k] * c[j][k])
                            .collect();
                        terms.push(ell[i] * hf[j]);
                        terms.push(-(hf[i] * ell[j]));
                        terms.into_iter().sum()
                    })
                    .collect()
            })
            .collect();
        let tau0_a = from.screen.tau.0[a];
        let dv: Vec<ScalarExpr> = (0..m)
            .map(|j| {
                let mut terms: Vec<ScalarExpr> = (0..m)
                    .filter(|&k| !from.d[a][k].is_zero() && !c[j][k].is_zero())
                    .map(|k| from.d[a][k] * c[j][k])
                    .collect();
                terms.push(0.5 * l2 * hf[j]);
                terms.push(-(tau0_a * ell[j]));
                terms.push(-st.chart.partial(ell[j], a));
                for i in 0..m {
                    if !ell[i].is_zero() && !g[i][j].is_zero() {
                        terms.push(-(ell[i] * g[i][j]));
                    }
                }
                terms.into_iter().sum()
            })
            .collect();
        gamma.push(g);
        d.push(dv);
    }
    ScreenConnection {
        screen: target.clone(),
        gamma,
        d,
    }
}

/// (α, X, β) relative to the splitting of `tau`; X by frame components.
#[derive(Clone, Debug, PartialEq)]
pub struct TractorSection {
    pub tau: OneForm,
    pub alpha: ScalarExpr,
    pub x: Vec<ScalarExpr>,
    pub beta: ScalarExpr,
}

impl TractorSection {
    pub fn new(screen: &ScreenForm, alpha: ScalarExpr, x: Vec<ScalarExpr>, beta: ScalarExpr) -> Self {
        assert_eq!(x.len(), screen.m());
        TractorSection {
            tau: screen.tau.clone(),
            alpha,
            x,
            beta,
        }
    }

    /// ξ = (1, 0, 0) in every splitting.
    pub fn xi(screen: &ScreenForm) -> Self {
        Self::new(screen, ScalarExpr::ONE, vec![ScalarExpr::ZERO; screen.m()], ScalarExpr::ZERO)
    }

    /// η^τ = (0, 0, 1) in its own splitting.
    pub fn eta(screen: &ScreenForm) -> Self {
        Self::new(screen, ScalarExpr::ZERO, vec![ScalarExpr::ZERO; screen.m()], ScalarExpr::ONE)
    }

    /// (0, E_i, 0)
    pub fn frame(screen: &ScreenForm, i: usize) -> Self {
        let mut x = vec![ScalarExpr::ZERO; screen.m()];
        x[i] = ScalarExpr::ONE;
        Self::new(screen, ScalarExpr::ZERO, x, ScalarExpr::ZERO)
    }

    /// Components in the order (α, x_1…x_m, β).
    pub fn flat(&self) -> Vec<ScalarExpr> {
        let mut v = vec![self.alpha];
        v.extend(&self.x);
        v.push(self.beta);
        v
    }

    pub fn from_flat(tau: &OneForm, v: &[ScalarExpr]) -> Self {
        let k = v.len();
        TractorSection {
            tau: tau.clone(),
            alpha: v[0],
            x: v[1..k - 1].to_vec(),
            beta: v[k - 1],
        }
    }

    pub fn sub(&self, other: &TractorSection) -> Result<TractorSection, TractorError> {
        if self.tau != other.tau {
            return Err(TractorError::SplittingMismatch);
        }
        let v: Vec<ScalarExpr> = self
            .flat()
            .iter()
            .zip(other.flat())
            .map(|(&a, b)| a - b)
            .collect();
        Ok(Self::from_flat(&self.tau, &v))
    }
}

/// 𝐡(s₁, s₂) = α₁β₂ + β₁α₂ + h(X₁, X₂)
pub fn tractor_metric(s1: &TractorSection, s2: &TractorSection) -> Result<ScalarExpr, TractorError> {
    if s1.tau != s2.tau {
        return Err(TractorError::SplittingMismatch);
    }
    let mut terms = vec![s1.alpha * s2.beta, s1.beta * s2.alpha];
    terms.extend(s1.x.iter().zip(&s2.x).map(|(&a, &b)| a * b));
    Ok(terms.into_iter().sum())
}

/// F_{τ,τ̄}: (α, X, β) ↦ (α + τ̄(X) − ½h(L,L)β, P^τ̄(X) + βL, β), L = L_{τ,τ̄}.
pub fn transition(
    st: &LightlikeStructure,
    from: &ScreenForm,
    to: &ScreenForm,
    s: &TractorSection,
) -> Result<TractorSection, TractorError> {
    if s.tau != from.tau {
        return Err(TractorError::SplittingMismatch);
    }
    let x = from.vector(&s.x);
    let l = l_field(from, to);
    let l2 = st.h.apply(&l, &l);
    let alpha = s.alpha + to.tau.apply(&x) - 0.5 * l2 * s.beta;
    let comps = to
        .frame
        .iter()
        .map(|g| st.h.apply(&x, g) + s.beta * from.tau.apply(g))
        .collect();
    Ok(TractorSection::new(to, alpha, comps, s.beta))
}

/// ∇^T_W s in the splitting of `sc.screen`.
pub fn tractor_connection(
    st: &LightlikeStructure,
    sc: &ScreenConnection,
    w: &VectorField,
    s: &TractorSection,
) -> Result<TractorSection, TractorError> {
    if s.tau != sc.screen.tau {
        return Err(TractorError::SplittingMismatch);
    }
    let tw = sc.screen.tau.apply(w);
    let dw = sc.d_along(w);
    let pw = sc.screen.components(st, w);
    let chart = &st.chart;
    let m = sc.m();
    let mut alpha_terms = vec![chart.directional(w, s.alpha), s.alpha * tw];
    alpha_terms.extend((0..m).map(|j| -(s.x[j] * dw[j])));
    let cov = sc.cov_components(st, w, &s.x);
    let x = (0..m)
        .map(|j| s.alpha * pw[j] + s.beta * dw[j] + cov[j])
        .collect();
    let mut beta_terms = vec![chart.directional(w, s.beta), -(s.beta * tw)];
    beta_terms.extend((0..m).map(|j| -(s.x[j] * pw[j])));
    Ok(TractorSection::new(
        &sc.screen,
        alpha_terms.into_iter().sum(),
        x,
        beta_terms.into_iter().sum(),
    ))
}

/// Φ(W) = (τ(W), P^τ(W), 0)
pub fn phi(st: &LightlikeStructure, screen: &ScreenForm, w: &VectorField) -> TractorSection {
    TractorSection::new(
        screen,
        screen.tau.apply(w),
        screen.components(st, w),
        ScalarExpr::ZERO,
    )
}
