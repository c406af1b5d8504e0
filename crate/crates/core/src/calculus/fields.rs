//! Charts, vector fields, 1-forms and (possibly degenerate) metrics with
//! expression-valued components in the coordinate basis.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::expr::{Bindings, DomainError, Evaluator, ScalarExpr, Symbol};

/// A coordinate box on which every field of a geometry lives.
#[derive(Clone, Debug)]
pub struct Chart {
    coords: Vec<String>,
    syms: Vec<Symbol>,
    domain: Vec<(f64, f64)>,
    seed: u64,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ChartError {
    #[error("chart needs at least 3 coordinates, got {0}")]
    TooSmall(usize),
    #[error("domain has {got} intervals for {want} coordinates")]
    DomainArity { got: usize, want: usize },
    #[error("empty or reversed interval for `{0}`")]
    BadInterval(String),
    #[error("duplicate coordinate name `{0}`")]
    Duplicate(String),
    #[error("`{0}` is not a valid coordinate name")]
    BadName(String),
}

impl Chart {
    pub fn new(
        coords: Vec<String>,
        domain: Vec<(f64, f64)>,
        seed: u64,
    ) -> Result<Self, ChartError> {
        if coords.len() < 3 {
            return Err(ChartError::TooSmall(coords.len()));
        }
        if domain.len() != coords.len() {
            return Err(ChartError::DomainArity {
                got: domain.len(),
                want: coords.len(),
            });
        }
        for (i, c) in coords.iter().enumerate() {
            let ok = c.chars().next().is_some_and(|ch| ch.is_ascii_alphabetic() || ch == '_')
                && c.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_')
                && c != "pi"
                && super::expr::Func::from_name(c).is_none();
            if !ok {
                return Err(ChartError::BadName(c.clone()));
            }
            if coords[..i].contains(c) {
                return Err(ChartError::Duplicate(c.clone()));
            }
            let (lo, hi) = domain[i];
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(ChartError::BadInterval(c.clone()));
            }
        }
        let syms = coords.iter().map(|c| Symbol::new(c)).collect();
        Ok(Chart {
            coords,
            syms,
            domain,
            seed,
        })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn names(&self) -> &[String] {
        &self.coords
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.syms
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(&self, seed: u64) -> Chart {
        Chart {
            seed,
            ..self.clone()
        }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.coords.iter().position(|c| c == name)
    }

    pub fn coord(&self, i: usize) -> ScalarExpr {
        ScalarExpr::var(self.syms[i])
    }

    pub fn center(&self) -> Vec<f64> {
        self.domain.iter().map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn bindings(&self, point: &[f64]) -> Bindings {
        Bindings::new(self.syms.iter().copied().zip(point.iter().copied()))
    }

    pub fn evaluator(&self, point: &[f64]) -> Evaluator {
        Evaluator::new(self.bindings(point))
    }

    /// `count` points uniform in the domain box shrunk by 5% on each side.
    pub fn sample_points(&self, count: usize) -> Vec<Vec<f64>> {
        self.sample_points_seeded(count, self.seed)
    }

    pub fn sample_points_seeded(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                self.domain
                    .iter()
                    .map(|&(a, b)| {
                        let pad = 0.05 * (b - a);
                        rng.gen_range((a + pad)..=(b - pad))
                    })
                    .collect()
            })
            .collect()
    }

    /// ∂_a f
    pub fn partial(&self, f: ScalarExpr, a: usize) -> ScalarExpr {
        f.diff(self.syms[a])
    }

    /// V(f) = Σ_a V^a ∂_a f
    pub fn directional(&self, v: &VectorField, f: ScalarExpr) -> ScalarExpr {
        v.0.iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(a, &c)| c * self.partial(f, a))
            .sum()
    }

    /// Exterior derivative of a function as a 1-form.
    pub fn grad(&self, f: ScalarExpr) -> OneForm {
        OneForm((0..self.dim()).map(|a| self.partial(f, a)).collect())
    }
}

/// Vector field in the coordinate basis.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField(pub Vec<ScalarExpr>);

/// 1-form in the dual coordinate basis.
#[derive(Clone, Debug, PartialEq)]
pub struct OneForm(pub Vec<ScalarExpr>);

impl VectorField {
    pub fn zero(n: usize) -> Self {
        VectorField(vec![ScalarExpr::ZERO; n])
    }

    /// The coordinate field ∂_i.
    pub fn coordinate(n: usize, i: usize) -> Self {
        let mut v = Self::zero(n);
        v.0[i] = ScalarExpr::ONE;
        v
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn add(&self, other: &VectorField) -> VectorField {
        VectorField(self.0.iter().zip(&other.0).map(|(&a, &b)| a + b).collect())
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        VectorField(self.0.iter().zip(&other.0).map(|(&a, &b)| a - b).collect())
    }

    pub fn scale(&self, f: ScalarExpr) -> VectorField {
        VectorField(self.0.iter().map(|&a| f * a).collect())
    }

    /// Σ_k c_k V_k
    pub fn combination(n: usize, terms: impl IntoIterator<Item = (ScalarExpr, VectorField)>) -> Self {
        let mut acc = vec![Vec::new(); n];
        for (c, v) in terms {
            if c.is_zero() {
                continue;
            }
            for (slot, &x) in acc.iter_mut().zip(&v.0) {
                if !x.is_zero() {
                    slot.push(c * x);
                }
            }
        }
        VectorField(acc.into_iter().map(|t| t.into_iter().sum()).collect())
    }

    pub fn eval(&self, ev: &mut Evaluator) -> Result<Vec<f64>, DomainError> {
        self.0.iter().map(|&c| ev.eval(c)).collect()
    }
}

impl OneForm {
    pub fn zero(n: usize) -> Self {
        OneForm(vec![ScalarExpr::ZERO; n])
    }

    /// dx^i
    pub fn coordinate(n: usize, i: usize) -> Self {
        let mut w = Self::zero(n);
        w.0[i] = ScalarExpr::ONE;
        w
    }

    pub fn apply(&self, v: &VectorField) -> ScalarExpr {
        self.0
            .iter()
            .zip(&v.0)
            .filter(|(a, b)| !a.is_zero() && !b.is_zero())
            .map(|(&a, &b)| a * b)
            .sum()
    }

    pub fn add(&self, other: &OneForm) -> OneForm {
        OneForm(self.0.iter().zip(&other.0).map(|(&a, &b)| a + b).collect())
    }

    pub fn sub(&self, other: &OneForm) -> OneForm {
        OneForm(self.0.iter().zip(&other.0).map(|(&a, &b)| a - b).collect())
    }

    pub fn scale(&self, f: ScalarExpr) -> OneForm {
        OneForm(self.0.iter().map(|&a| f * a).collect())
    }
}

/// Symmetric 2-tensor; only the lower triangle is stored.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricField {
    n: usize,
    lower: Vec<ScalarExpr>,
}

fn tri(i: usize, j: usize) -> usize {
    let (i, j) = if i >= j { (i, j) } else { (j, i) };
    i * (i + 1) / 2 + j
}

impl MetricField {
    pub fn zero(n: usize) -> Self {
        MetricField {
            n,
            lower: vec![ScalarExpr::ZERO; n * (n + 1) / 2],
        }
    }

    /// Rows of the lower triangle: row `i` has `i + 1` entries.
    pub fn from_lower(rows: Vec<Vec<ScalarExpr>>) -> Option<Self> {
        let n = rows.len();
        if rows.iter().enumerate().any(|(i, r)| r.len() != i + 1) {
            return None;
        }
        Some(MetricField {
            n,
            lower: rows.into_iter().flatten().collect(),
        })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> ScalarExpr) -> Self {
        let mut m = Self::zero(n);
        for i in 0..n {
            for j in 0..=i {
                m.lower[tri(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> ScalarExpr {
        self.lower[tri(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: ScalarExpr) {
        self.lower[tri(i, j)] = v;
    }

    pub fn lower_rows(&self) -> Vec<Vec<ScalarExpr>> {
        (0..self.n)
            .map(|i| (0..=i).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn apply(&self, v: &VectorField, w: &VectorField) -> ScalarExpr {
        let mut terms = Vec::new();
        for a in 0..self.n {
            if v.0[a].is_zero() {
                continue;
            }
            for b in 0..self.n {
                let g = self.get(a, b);
                if g.is_zero() || w.0[b].is_zero() {
                    continue;
                }
                terms.push(g * v.0[a] * w.0[b]);
            }
        }
        terms.into_iter().sum()
    }

    /// The 1-form h(V, ·).
    pub fn flat(&self, v: &VectorField) -> OneForm {
        OneForm(
            (0..self.n)
                .map(|b| {
                    (0..self.n)
                        .filter(|&a| !v.0[a].is_zero())
                        .map(|a| self.get(a, b) * v.0[a])
                        .sum()
                })
                .collect(),
        )
    }

    pub fn scale(&self, f: ScalarExpr) -> MetricField {
        MetricField {
            n: self.n,
            lower: self.lower.iter().map(|&x| f * x).collect(),
        }
    }

    pub fn sub(&self, other: &MetricField) -> MetricField {
        MetricField {
            n: self.n,
            lower: self.lower.iter().zip(&other.lower).map(|(&a, &b)| a - b).collect(),
        }
    }

    pub fn eval(&self, ev: &mut Evaluator) -> Result<DMatrix<f64>, DomainError> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in 0..=i {
                let v = ev.eval(self.get(i, j))?;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(m)
    }
}

/// [V,W]^k = Σ_a (V^a ∂_a W^k − W^a ∂_a V^k)
pub fn lie_bracket(chart: &Chart, v: &VectorField, w: &VectorField) -> VectorField {
    VectorField(
        (0..chart.dim())
            .map(|k| chart.directional(v, w.0[k]) - chart.directional(w, v.0[k]))
            .collect(),
    )
}

/// (L_Z h)_ab = Z^c ∂_c h_ab + h_cb ∂_a Z^c + h_ac ∂_b Z^c
pub fn lie_derivative_metric(chart: &Chart, h: &MetricField, z: &VectorField) -> MetricField {
    let n = chart.dim();
    MetricField::from_fn(n, |a, b| {
        let mut terms = vec![chart.directional(z, h.get(a, b))];
        for c in 0..n {
            terms.push(h.get(c, b) * chart.partial(z.0[c], a));
            terms.push(h.get(a, c) * chart.partial(z.0[c], b));
        }
        terms.into_iter().sum()
    })
}

/// dω as the antisymmetric matrix (∂_a ω_b − ∂_b ω_a).
pub fn exterior_d(chart: &Chart, w: &OneForm) -> Vec<Vec<ScalarExpr>> {
    let n = chart.dim();
    (0..n)
        .map(|a| {
            (0..n)
                .map(|b| chart.partial(w.0[b], a) - chart.partial(w.0[a], b))
                .collect()
        })
        .collect()
}

/// dω(V,W) = V(ω(W)) − W(ω(V)) − ω([V,W])
pub fn d_form_apply(chart: &Chart, w: &OneForm, v: &VectorField, u: &VectorField) -> ScalarExpr {
    chart.directional(v, w.apply(u)) - chart.directional(u, w.apply(v))
        - w.apply(&lie_bracket(chart, v, u))
}

/// |symbolic ∂_a e − central difference| at `point` (relative when |∂_a e| > 1).
pub fn fd_crosscheck(
    chart: &Chart,
    e: ScalarExpr,
    a: usize,
    point: &[f64],
    step: f64,
) -> Result<f64, DomainError> {
    let symbolic = chart.evaluator(point).eval(chart.partial(e, a))?;
    let mut p = point.to_vec();
    p[a] = point[a] + step;
    let fp = chart.evaluator(&p).eval(e)?;
    p[a] = point[a] - step;
    let fm = chart.evaluator(&p).eval(e)?;
    let fd = (fp - fm) / (2.0 * step);
    let r = (symbolic - fd).abs();
    Ok(if symbolic.abs() > 1.0 { r / symbolic.abs() } else { r })
}

/// Per-sample outcome of the checks that make h, Z a lightlike structure.
#[derive(Clone, Debug, Default)]
pub struct StructureResiduals {
    /// max |h(Z, ∂_a)|
    pub radical: f64,
    /// smallest |λ| among the m eigenvalues that should be positive
    pub min_positive: f64,
    /// |λ| of the eigenvalue closest to zero
    pub null_eigenvalue: f64,
    /// most negative eigenvalue (0 if none)
    pub negative: f64,
    pub z_norm: f64,
}

/// The triple (N, h, Z) on a single chart.
#[derive(Clone, Debug)]
pub struct LightlikeStructure {
    pub chart: Chart,
    pub h: MetricField,
    pub z: VectorField,
}

impl LightlikeStructure {
    pub fn new(chart: Chart, h: MetricField, z: VectorField) -> Self {
        assert_eq!(h.dim(), chart.dim());
        assert_eq!(z.dim(), chart.dim());
        LightlikeStructure { chart, h, z }
    }

    pub fn n(&self) -> usize {
        self.chart.dim()
    }

    /// Screen rank m = n − 1.
    pub fn m(&self) -> usize {
        self.chart.dim() - 1
    }

    pub fn residuals_at(&self, point: &[f64]) -> Result<StructureResiduals, DomainError> {
        let mut ev = self.chart.evaluator(point);
        let h = self.h.eval(&mut ev)?;
        let z = nalgebra::DVector::from_vec(self.z.eval(&mut ev)?);
        let hz = &h * &z;
        let eig = SymmetricEigen::new(h);
        let mut lams: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        lams.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
        Ok(StructureResiduals {
            radical: hz.amax(),
            null_eigenvalue: lams[0].abs(),
            min_positive: lams[1..].iter().copied().fold(f64::INFINITY, f64::min),
            negative: lams[1..].iter().copied().fold(0.0, f64::min),
            z_norm: z.norm(),
        })
    }

    /// The symmetric matrix field ½ L_Z h.
    pub fn half_lie_derivative(&self) -> MetricField {
        lie_derivative_metric(&self.chart, &self.h, &self.z).scale(ScalarExpr::constant(0.5))
    }
}

/// Symbolic inverse of a nondegenerate metric by Gauss–Jordan elimination.
/// Pivots are chosen by magnitude at `at`, so the result is valid on the
/// connected region around that point where those pivots stay nonzero.
pub fn symbolic_inverse(g: &MetricField, at: &Bindings) -> Result<Vec<Vec<ScalarExpr>>, DomainError> {
    let n = g.dim();
    let mut a: Vec<Vec<ScalarExpr>> = (0..n).map(|i| (0..n).map(|j| g.get(i, j)).collect()).collect();
    let mut inv: Vec<Vec<ScalarExpr>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { ScalarExpr::ONE } else { ScalarExpr::ZERO }).collect())
        .collect();
    let mut ev = Evaluator::new(at.clone());
    for col in 0..n {
        let mut best = (col, 0.0);
        for r in col..n {
            let v = ev.eval(a[r][col])?.abs();
            if v > best.1 {
                best = (r, v);
            }
        }
        if best.1 < 1e-12 {
            return Err(DomainError {
                kind: super::expr::DomainKind::DivisionByZero,
            });
        }
        a.swap(col, best.0);
        inv.swap(col, best.0);
        let p = a[col][col];
        for j in 0..n {
            a[col][j] = a[col][j] / p;
            inv[col][j] = inv[col][j] / p;
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col];
            for j in 0..n {
                a[r][j] = a[r][j] - f * a[col][j];
                inv[r][j] = inv[r][j] - f * inv[col][j];
            }
        }
    }
    Ok(inv)
}

/// Christoffel symbols Γ^k_ab of the Levi-Civita connection of a
/// nondegenerate metric: `out[k][a][b]`.
pub fn christoffel(
    chart: &Chart,
    g: &MetricField,
) -> Result<Vec<Vec<Vec<ScalarExpr>>>, DomainError> {
    let n = chart.dim();
    let ginv = symbolic_inverse(g, &chart.bindings(&chart.center()))?;
    // first kind: [ab,c] = ½(∂_a g_bc + ∂_b g_ac − ∂_c g_ab)
    let first: Vec<Vec<Vec<ScalarExpr>>> = (0..n)
        .map(|a| {
            (0..n)
                .map(|b| {
                    (0..n)
                        .map(|c| {
                            0.5 * (chart.partial(g.get(b, c), a) + chart.partial(g.get(a, c), b)
                                - chart.partial(g.get(a, b), c))
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok((0..n)
        .map(|k| {
            (0..n)
                .map(|a| {
                    (0..n)
                        .map(|b| (0..n).map(|c| ginv[k][c] * first[a][b][c]).sum())
                        .collect()
                })
                .collect()
        })
        .collect())
}

/// ∇_V W for a connection with Christoffel symbols `gamma[k][a][b]`.
pub fn covariant(
    chart: &Chart,
    gamma: &[Vec<Vec<ScalarExpr>>],
    v: &VectorField,
    w: &VectorField,
) -> VectorField {
    let n = chart.dim();
    VectorField(
        (0..n)
            .map(|k| {
                let mut terms = vec![chart.directional(v, w.0[k])];
                for a in 0..n {
                    if v.0[a].is_zero() {
                        continue;
                    }
                    for b in 0..n {
                        if w.0[b].is_zero() || gamma[k][a][b].is_zero() {
                            continue;
                        }
                        terms.push(gamma[k][a][b] * v.0[a] * w.0[b]);
                    }
                }
                terms.into_iter().sum()
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart3() -> Chart {
        Chart::new(
            vec!["t".into(), "u1".into(), "u2".into()],
            vec![(-1.0, 1.0); 3],
            7,
        )
        .unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn coordinate_fields_commute() {
        let c = chart3();
        let b = lie_bracket(&c, &VectorField::coordinate(3, 0), &VectorField::coordinate(3, 1));
        assert!(b.0.iter().all(|x| x.is_zero()));
    }

    #[test]
    fn bracket_direct_formula() {
        let c = chart3();
        let t = c.coord(0);
        let v = VectorField(vec![ScalarExpr::ZERO, t, ScalarExpr::ZERO]);
        let b = lie_bracket(&c, &v, &VectorField::coordinate(3, 0));
        assert_eq!(b.0[1].as_const(), Some(-1.0));
        assert!(b.0[0].is_zero() && b.0[2].is_zero());
    }

    #[test]
    fn bracket_with_exponential_coefficient() {
        let c = chart3();
        let v = VectorField(vec![ScalarExpr::ZERO, (-c.coord(0)).exp(), ScalarExpr::ZERO]);
        let b = lie_bracket(&c, &VectorField::coordinate(3, 0), &v);
        let p = [0.4, 0.1, -0.2];
        let got = c.evaluator(&p).eval(b.0[1]).unwrap();
        assert!(close(got, -(-0.4f64).exp()));
    }

    #[test]
    fn fd_crosscheck_cases() {
        let c = chart3();
        let e = (2.0 * c.coord(0)).exp();
        assert!(fd_crosscheck(&c, e, 0, &[0.3, 0.0, 0.0], 1e-5).unwrap() < 1e-8);
        let k = ScalarExpr::constant(3.5);
        assert_eq!(fd_crosscheck(&c, k, 1, &[0.3, 0.0, 0.0], 1e-5).unwrap(), 0.0);
        let pole = 1.0 / c.coord(1);
        assert!(fd_crosscheck(&c, pole, 1, &[0.0, 1e-5, 0.0], 1e-5).is_err());
    }

    #[test]
    fn lie_derivative_of_flat_metric_along_translation() {
        let c = chart3();
        let h = MetricField::from_fn(3, |i, j| {
            if i == j && i > 0 {
                ScalarExpr::ONE
            } else {
                ScalarExpr::ZERO
            }
        });
        let l = lie_derivative_metric(&c, &h, &VectorField::coordinate(3, 0));
        assert!(l.lower_rows().iter().flatten().all(|x| x.is_zero()));
        let l0 = lie_derivative_metric(&c, &h, &VectorField::zero(3));
        assert!(l0.lower_rows().iter().flatten().all(|x| x.is_zero()));
    }

    #[test]
    fn samples_stay_inside_shrunk_box() {
        let c = Chart::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![(0.0, 1.0), (-2.0, 2.0), (5.0, 6.0)],
            3,
        )
        .unwrap();
        for p in c.sample_points(200) {
            for (x, &(lo, hi)) in p.iter().zip(c.domain()) {
                let pad = 0.05 * (hi - lo);
                assert!(*x >= lo + pad && *x <= hi - pad);
            }
        }
        assert_eq!(c.sample_points(5), c.sample_points(5));
    }

    #[test]
    fn chart_rejects_bad_input() {
        assert!(matches!(
            Chart::new(vec!["a".into(), "b".into()], vec![(0.0, 1.0); 2], 0),
            Err(ChartError::TooSmall(2))
        ));
        assert!(Chart::new(vec!["a".into(), "a".into(), "b".into()], vec![(0.0, 1.0); 3], 0).is_err());
        assert!(Chart::new(vec!["a".into(), "exp".into(), "b".into()], vec![(0.0, 1.0); 3], 0).is_err());
        assert!(Chart::new(vec!["a".into(), "b".into(), "c".into()], vec![(1.0, 0.0); 3], 0).is_err());
    }

    #[test]
    fn christoffel_of_polar_plane() {
        // g = dr² + r² dθ² + dz²: Γ^r_θθ = −r, Γ^θ_rθ = 1/r
        let c = Chart::new(
            vec!["r".into(), "th".into(), "z".into()],
            vec![(1.0, 2.0), (0.0, 1.0), (0.0, 1.0)],
            1,
        )
        .unwrap();
        let r = c.coord(0);
        let g = MetricField::from_fn(3, |i, j| match (i, j) {
            (0, 0) | (2, 2) => ScalarExpr::ONE,
            (1, 1) => r.powi(2),
            _ => ScalarExpr::ZERO,
        });
        let gam = christoffel(&c, &g).unwrap();
        let mut ev = c.evaluator(&[1.5, 0.2, 0.3]);
        assert!(close(ev.eval(gam[0][1][1]).unwrap(), -1.5));
        assert!(close(ev.eval(gam[1][0][1]).unwrap(), 1.0 / 1.5));
        assert!(close(ev.eval(gam[1][1][0]).unwrap(), 1.0 / 1.5));
        assert!(gam[2].iter().flatten().all(|x| x.is_zero()));
    }
}
