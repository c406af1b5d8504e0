//! Screen forms τ (τ(Z) = 1), their projectors P^τ, symbolic orthonormal
//! frames of An(τ), and the difference fields L and K between two screens.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calculus::{DomainError, LightlikeStructure, OneForm, ScalarExpr, VectorField};

/// Residual bound for frame construction checks.
pub const FRAME_TOL: f64 = 1e-9;
/// Projected norms below this at the chart center are skipped as pivots.
pub const PIVOT_TOL: f64 = 1e-12;
const CHECK_SAMPLES: usize = 20;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScreenError {
    #[error("τ(Z) ≠ 1: max |τ(Z) − 1| = {0:e}")]
    NotNormalized(f64),
    #[error("Gram–Schmidt found {found} of {want} screen vectors")]
    Breakdown { found: usize, want: usize },
    #[error("frame fails orthonormality or τ-annihilation: residual {0:e}")]
    BadFrame(f64),
    #[error("pivot order must be a permutation of 0..{0}")]
    BadOrder(usize),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// A screen form together with an h-orthonormal frame of its kernel.
#[derive(Clone, Debug)]
pub struct ScreenForm {
    pub tau: OneForm,
    pub frame: Vec<VectorField>,
}

impl ScreenForm {
    pub fn m(&self) -> usize {
        self.frame.len()
    }

    /// Frame components h(X, E_j) of a field; exact for X ∈ An(τ).
    pub fn components(&self, st: &LightlikeStructure, x: &VectorField) -> Vec<ScalarExpr> {
        self.frame.iter().map(|e| st.h.apply(x, e)).collect()
    }

    /// Σ_j c_j E_j
    pub fn vector(&self, comps: &[ScalarExpr]) -> VectorField {
        let n = self.tau.0.len();
        VectorField::combination(n, comps.iter().copied().zip(self.frame.iter().cloned()))
    }
}

/// P^τ(V) = V − τ(V) Z
pub fn project(st: &LightlikeStructure, tau: &OneForm, v: &VectorField) -> VectorField {
    v.sub(&st.z.scale(tau.apply(v)))
}

fn check_points(st: &LightlikeStructure) -> Vec<Vec<f64>> {
    let mut pts = st.chart.sample_points(CHECK_SAMPLES);
    pts.push(st.chart.center());
    pts
}

pub fn tau_normalization_residual(st: &LightlikeStructure, tau: &OneForm) -> Result<f64, DomainError> {
    let tz = tau.apply(&st.z);
    let mut worst: f64 = 0.0;
    for p in check_points(st) {
        let v = st.chart.evaluator(&p).eval(tz)?;
        worst = worst.max((v - 1.0).abs());
    }
    Ok(worst)
}

pub fn make_screen(st: &LightlikeStructure, tau: &OneForm) -> Result<ScreenForm, ScreenError> {
    let order: Vec<usize> = (0..st.n()).collect();
    make_screen_with_order(st, tau, &order)
}

/// Gram–Schmidt over the projected coordinate fields P^τ(∂_k), taken in
/// `order`, skipping those whose remaining norm vanishes at the chart center.
pub fn make_screen_with_order(
    st: &LightlikeStructure,
    tau: &OneForm,
    order: &[usize],
) -> Result<ScreenForm, ScreenError> {
    let n = st.n();
    let m = st.m();
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if sorted != (0..n).collect::<Vec<_>>() {
        return Err(ScreenError::BadOrder(n));
    }
    let r = tau_normalization_residual(st, tau)?;
    if !(r < FRAME_TOL) {
        return Err(ScreenError::NotNormalized(r));
    }
    let mut center = st.chart.evaluator(&st.chart.center());
    let mut frame: Vec<VectorField> = Vec::with_capacity(m);
    for &k in order {
        if frame.len() == m {
            break;
        }
        let v = project(st, tau, &VectorField::coordinate(n, k));
        let coeffs: Vec<(ScalarExpr, VectorField)> = frame
            .iter()
            .map(|e| (-st.h.apply(&v, e), e.clone()))
            .collect();
        let mut terms = vec![(ScalarExpr::ONE, v)];
        terms.extend(coeffs);
        let e = VectorField::combination(n, terms);
        let norm2 = st.h.apply(&e, &e);
        if center.eval(norm2)? < PIVOT_TOL {
            continue;
        }
        frame.push(e.scale(ScalarExpr::ONE / norm2.sqrt()));
    }
    if frame.len() < m {
        return Err(ScreenError::Breakdown {
            found: frame.len(),
            want: m,
        });
    }
    let screen = ScreenForm {
        tau: tau.clone(),
        frame,
    };
    let r = frame_residual(st, &screen)?;
    if !(r < FRAME_TOL) {
        return Err(ScreenError::BadFrame(r));
    }
    Ok(screen)
}

/// max over check points of |τ(E_i)| and |h(E_i,E_j) − δ_ij|.
pub fn frame_residual(st: &LightlikeStructure, s: &ScreenForm) -> Result<f64, DomainError> {
    let m = s.m();
    let mut exprs = Vec::new();
    for i in 0..m {
        exprs.push((s.tau.apply(&s.frame[i]), 0.0));
        for j in 0..=i {
            let d = if i == j { 1.0 } else { 0.0 };
            exprs.push((st.h.apply(&s.frame[i], &s.frame[j]), d));
        }
    }
    let mut worst: f64 = 0.0;
    for p in check_points(st) {
        let mut ev = st.chart.evaluator(&p);
        for &(e, want) in &exprs {
            worst = worst.max((ev.eval(e)? - want).abs());
        }
    }
    Ok(worst)
}

/// L_{τ,τ̄} = Σ_i τ(F_i) F_i over the frame F of τ̄.
pub fn l_field(tau: &ScreenForm, tau_bar: &ScreenForm) -> VectorField {
    let n = tau.tau.0.len();
    VectorField::combination(
        n,
        tau_bar
            .frame
            .iter()
            .map(|f| (tau.tau.apply(f), f.clone())),
    )
}

/// K_{τ,τ̄} = L − ½ h(L,L) Z
pub fn k_field(st: &LightlikeStructure, tau: &ScreenForm, tau_bar: &ScreenForm) -> VectorField {
    let l = l_field(tau, tau_bar);
    let hl = st.h.apply(&l, &l);
    l.sub(&st.z.scale(0.5 * hl))
}

/// A_Z in the frame of τ: M_ij = ½ (L_Z h)(E_i, E_j).
pub fn radical_endomorphism(st: &LightlikeStructure, s: &ScreenForm) -> Vec<Vec<ScalarExpr>> {
    let half = st.half_lie_derivative();
    let m = s.m();
    (0..m)
        .map(|i| (0..m).map(|j| half.apply(&s.frame[i], &s.frame[j])).collect())
        .collect()
}

/// Smooth perturbation of a screen form: τ₀ + ω − ω(Z)τ₀ with ω built from
/// seeded trigonometric coefficients of size `amplitude`. Satisfies τ(Z) = 1.
pub fn random_screen_form(
    st: &LightlikeStructure,
    tau0: &OneForm,
    seed: u64,
    amplitude: f64,
) -> OneForm {
    let n = st.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = OneForm(
        (0..n)
            .map(|_| {
                let b = rng.gen_range(0..n);
                let k = rng.gen_range(0.5..1.5);
                let phase = rng.gen_range(-1.0..1.0);
                let c = amplitude * rng.gen_range(-1.0..1.0);
                let c2 = amplitude * rng.gen_range(-0.5..0.5);
                c * (k * st.chart.coord(b) + phase).sin() + c2
            })
            .collect(),
    );
    let wz = omega.apply(&st.z);
    tau0.add(&omega).sub(&tau0.scale(wz))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{Chart, MetricField};

    fn flat(m: usize) -> LightlikeStructure {
        let n = m + 1;
        let names = (0..n).map(|i| format!("r{i}")).collect();
        let chart = Chart::new(names, vec![(-1.0, 1.0); n], 11).unwrap();
        let h = MetricField::from_fn(n, |i, j| {
            if i == j && i > 0 {
                ScalarExpr::ONE
            } else {
                ScalarExpr::ZERO
            }
        });
        LightlikeStructure::new(chart, h, VectorField::coordinate(n, 0))
    }

    fn at(st: &LightlikeStructure, v: &VectorField, p: &[f64]) -> Vec<f64> {
        v.eval(&mut st.chart.evaluator(p)).unwrap()
    }

    #[test]
    fn flat_frame_is_coordinate() {
        let st = flat(3);
        let s = make_screen(&st, &OneForm::coordinate(4, 0)).unwrap();
        for (i, e) in s.frame.iter().enumerate() {
            assert_eq!(e, &VectorField::coordinate(4, i + 1));
        }
    }

    #[test]
    fn projection_examples() {
        let st = flat(3);
        let tau = OneForm::coordinate(4, 0);
        let pz = project(&st, &tau, &st.z);
        assert!(pz.0.iter().all(|c| c.is_zero()));
        let v = VectorField::coordinate(4, 0).add(&VectorField::coordinate(4, 1));
        assert_eq!(project(&st, &tau, &v), VectorField::coordinate(4, 1));
        let x = VectorField::coordinate(4, 2);
        assert_eq!(project(&st, &tau, &x), x);
    }

    #[test]
    fn non_normalized_tau_is_rejected() {
        let st = flat(2);
        let bad = OneForm::coordinate(3, 1);
        assert!(matches!(make_screen(&st, &bad), Err(ScreenError::NotNormalized(_))));
    }

    #[test]
    fn l_field_on_tilted_hyperplane_screen() {
        let st = flat(3);
        let tau = make_screen(&st, &OneForm::coordinate(4, 0)).unwrap();
        let bar = OneForm::coordinate(4, 0).add(&OneForm::coordinate(4, 1));
        let tau_bar = make_screen(&st, &bar).unwrap();
        let l = l_field(&tau, &tau_bar);
        let got = at(&st, &l, &[0.1, 0.2, 0.3, 0.4]);
        let want = [1.0, -1.0, 0.0, 0.0];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-14, "{got:?}");
        }
        let zero = l_field(&tau, &tau);
        assert!(zero.0.iter().all(|c| c.is_zero()));
    }

    #[test]
    fn random_forms_are_normalized() {
        let st = flat(3);
        for seed in 0..5 {
            let t = random_screen_form(&st, &OneForm::coordinate(4, 0), seed, 0.3);
            assert!(tau_normalization_residual(&st, &t).unwrap() < 1e-14);
            make_screen(&st, &t).unwrap();
        }
    }
}
