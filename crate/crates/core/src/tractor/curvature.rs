//! Tractor curvature, either from the connection matrices
//! R_ab = ∂_a A_b − ∂_b A_a + [A_a, A_b] or directly from
//! R(V,W) = ∇_V∇_W − ∇_W∇_V − ∇_[V,W] on expression-valued sections.

use nalgebra::DMatrix;

use super::{tractor_connection, Matrix, ScreenConnection, TractorError, TractorSection};
use crate::calculus::{
    dag_size_many, lie_bracket, Chart, DomainError, Evaluator, LightlikeStructure, ScalarExpr,
    VectorField,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CurvatureError {
    #[error("curvature component ({a},{b}) needs {nodes} expression nodes, budget is {budget}")]
    BudgetExceeded {
        a: usize,
        b: usize,
        nodes: usize,
        budget: usize,
    },
}

/// A(∂_a) acting on (α, x, β) for every coordinate direction a.
///
/// ```text
/// α row: [ τ_a,        −D_a[j],      0     ]
/// x_j:   [ h(∂_a,E_j),  Γ_a[i][j],   D_a[j] ]
/// β row: [ 0,          −h(E_i,∂_a), −τ_a   ]
/// ```
pub fn connection_matrices(st: &LightlikeStructure, sc: &ScreenConnection) -> Vec<Matrix> {
    let n = st.n();
    let m = sc.m();
    let k = m + 2;
    (0..n)
        .map(|a| {
            let da = VectorField::coordinate(n, a);
            let tau_a = sc.screen.tau.0[a];
            let hf: Vec<ScalarExpr> = sc.screen.components(st, &da);
            let mut mat = vec![vec![ScalarExpr::ZERO; k]; k];
            mat[0][0] = tau_a;
            mat[k - 1][k - 1] = -tau_a;
            for j in 0..m {
                mat[0][1 + j] = -sc.d[a][j];
                mat[1 + j][0] = hf[j];
                mat[1 + j][k - 1] = sc.d[a][j];
                mat[k - 1][1 + j] = -hf[j];
                for i in 0..m {
                    mat[1 + j][1 + i] = sc.gamma[a][i][j];
                }
            }
            mat
        })
        .collect()
}

fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let k = a.len();
    (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    (0..k)
                        .filter(|&l| !a[i][l].is_zero() && !b[l][j].is_zero())
                        .map(|l| a[i][l] * b[l][j])
                        .sum()
                })
                .collect()
        })
        .collect()
}

fn eval_matrix(ev: &mut Evaluator, m: &Matrix) -> Result<DMatrix<f64>, DomainError> {
    let k = m.len();
    let mut out = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            out[(i, j)] = ev.eval(m[i][j])?;
        }
    }
    Ok(out)
}

/// Curvature matrices of a tractor connection in one splitting.
#[derive(Clone, Debug)]
pub struct TractorCurvature {
    n: usize,
    conn: Vec<Matrix>,
    /// `r[a][b]` for a < b when computed symbolically.
    symbolic: Option<Vec<Vec<Matrix>>>,
    /// Largest node count of a single component block.
    pub max_nodes: usize,
    /// Set when the node budget forced finite differences.
    pub fallback: bool,
}

impl TractorCurvature {
    pub fn compute(
        st: &LightlikeStructure,
        sc: &ScreenConnection,
        budget: usize,
        allow_fallback: bool,
    ) -> Result<Self, CurvatureError> {
        let n = st.n();
        let conn = connection_matrices(st, sc);
        let k = conn[0].len();
        let mut r = vec![vec![Vec::new(); n]; n];
        let mut max_nodes = 0;
        for a in 0..n {
            for b in (a + 1)..n {
                let da: Vec<ScalarExpr> = (0..k)
                    .flat_map(|i| (0..k).map(move |j| (i, j)))
                    .map(|(i, j)| {
                        st.chart.partial(conn[b][i][j], a) - st.chart.partial(conn[a][i][j], b)
                    })
                    .collect();
                let nodes = dag_size_many(&da);
                max_nodes = max_nodes.max(nodes);
                if nodes > budget {
                    if allow_fallback {
                        return Ok(TractorCurvature {
                            n,
                            conn,
                            symbolic: None,
                            max_nodes,
                            fallback: true,
                        });
                    }
                    return Err(CurvatureError::BudgetExceeded {
                        a,
                        b,
                        nodes,
                        budget,
                    });
                }
                let ab = matmul(&conn[a], &conn[b]);
                let ba = matmul(&conn[b], &conn[a]);
                let mat: Matrix = (0..k)
                    .map(|i| (0..k).map(|j| da[i * k + j] + ab[i][j] - ba[i][j]).collect())
                    .collect();
                r[a][b] = mat;
            }
        }
        Ok(TractorCurvature {
            n,
            conn,
            symbolic: Some(r),
            max_nodes,
            fallback: false,
        })
    }

    pub fn connection(&self) -> &[Matrix] {
        &self.conn
    }

    /// Symbolic R_ab (a ≠ b), if available.
    pub fn component(&self, a: usize, b: usize) -> Option<Matrix> {
        let r = self.symbolic.as_ref()?;
        let k = self.conn[0].len();
        Some(match a.cmp(&b) {
            std::cmp::Ordering::Less => r[a][b].clone(),
            std::cmp::Ordering::Greater => r[b][a]
                .iter()
                .map(|row| row.iter().map(|&x| -x).collect())
                .collect(),
            std::cmp::Ordering::Equal => vec![vec![ScalarExpr::ZERO; k]; k],
        })
    }

    /// All R_ab at `point`, `out[a][b]`.
    pub fn eval_at(
        &self,
        chart: &Chart,
        point: &[f64],
        fd_step: f64,
    ) -> Result<Vec<Vec<DMatrix<f64>>>, DomainError> {
        let n = self.n;
        let k = self.conn[0].len();
        let mut out = vec![vec![DMatrix::zeros(k, k); n]; n];
        let mut ev = chart.evaluator(point);
        match &self.symbolic {
            Some(r) => {
                for a in 0..n {
                    for b in (a + 1)..n {
                        let v = eval_matrix(&mut ev, &r[a][b])?;
                        out[b][a] = -&v;
                        out[a][b] = v;
                    }
                }
            }
            None => {
                let at: Vec<DMatrix<f64>> = self
                    .conn
                    .iter()
                    .map(|c| eval_matrix(&mut ev, c))
                    .collect::<Result<_, _>>()?;
                // ∂_a A_b by central differences
                let mut dconn = vec![vec![DMatrix::zeros(k, k); n]; n];
                for a in 0..n {
                    let mut p = point.to_vec();
                    p[a] = point[a] + fd_step;
                    let mut evp = chart.evaluator(&p);
                    p[a] = point[a] - fd_step;
                    let mut evm = chart.evaluator(&p);
                    for b in 0..n {
                        let plus = eval_matrix(&mut evp, &self.conn[b])?;
                        let minus = eval_matrix(&mut evm, &self.conn[b])?;
                        dconn[a][b] = (plus - minus) / (2.0 * fd_step);
                    }
                }
                for a in 0..n {
                    for b in (a + 1)..n {
                        let v = &dconn[a][b] - &dconn[b][a] + &at[a] * &at[b] - &at[b] * &at[a];
                        out[b][a] = -&v;
                        out[a][b] = v;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// R(V,W) = Σ V^a W^b R_ab for numeric components.
pub fn contract(r: &[Vec<DMatrix<f64>>], v: &[f64], w: &[f64]) -> DMatrix<f64> {
    let n = r.len();
    let k = r[0][0].nrows();
    let mut out = DMatrix::zeros(k, k);
    for a in 0..n {
        if v[a] == 0.0 {
            continue;
        }
        for b in 0..n {
            if w[b] == 0.0 || a == b {
                continue;
            }
            out += (v[a] * w[b]) * &r[a][b];
        }
    }
    out
}

/// R(V,W)s = ∇_V∇_W s − ∇_W∇_V s − ∇_[V,W] s, symbolically.
pub fn curvature_on_section(
    st: &LightlikeStructure,
    sc: &ScreenConnection,
    v: &VectorField,
    w: &VectorField,
    s: &TractorSection,
) -> Result<TractorSection, TractorError> {
    let vw = tractor_connection(st, sc, v, &tractor_connection(st, sc, w, s)?)?;
    let wv = tractor_connection(st, sc, w, &tractor_connection(st, sc, v, s)?)?;
    let br = tractor_connection(st, sc, &lie_bracket(&st.chart, v, w), s)?;
    vw.sub(&wv)?.sub(&br)
}
