//! Linear solvers: sparse LU (faer) and SGS-preconditioned GMRES / CG.

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use serde::{Deserialize, Serialize};

use super::sparse::{dot, norm2, CsrMatrix};
use crate::error::{Error, Result};

/// Systems with fewer free dofs than this use the direct solver under `Auto`.
pub const DIRECT_THRESHOLD: usize = 400_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearMethod {
    Auto,
    Direct,
    Gmres,
    Cg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KrylovConfig {
    pub rel_tol: f64,
    pub max_iter: usize,
    pub restart: usize,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-10, max_iter: 5000, restart: 100 }
    }
}

/// Symmetric Gauss–Seidel sweep M = (D+L) D⁻¹ (D+U).
pub struct SgsPreconditioner<'a> {
    a: &'a CsrMatrix,
    diag: Vec<f64>,
}

impl<'a> SgsPreconditioner<'a> {
    pub fn new(a: &'a CsrMatrix) -> Result<Self> {
        let diag = a.diagonal();
        if let Some(i) = diag.iter().position(|d| *d == 0.0) {
            return Err(Error::LinearSolver(format!("zero diagonal at row {i}")));
        }
        Ok(Self { a, diag })
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let a = self.a;
        let n = a.n;
        for i in 0..n {
            let mut s = r[i];
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                let j = a.col_idx[k];
                if j < i {
                    s -= a.vals[k] * z[j];
                }
            }
            z[i] = s / self.diag[i];
        }
        for i in (0..n).rev() {
            let mut s = 0.0;
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                let j = a.col_idx[k];
                if j > i {
                    s += a.vals[k] * z[j];
                }
            }
            z[i] -= s / self.diag[i];
        }
    }
}

/// Right-preconditioned restarted GMRES. Returns the solution and iteration count.
pub fn gmres(a: &CsrMatrix, b: &[f64], cfg: &KrylovConfig) -> Result<(Vec<f64>, usize)> {
    let n = a.n;
    let pc = SgsPreconditioner::new(a)?;
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let m = cfg.restart.max(1);
    let mut iters = 0;
    let mut r = b.to_vec();
    let mut rel = 1.0;
    while iters < cfg.max_iter {
        let beta = norm2(&r);
        rel = beta / bnorm;
        if rel <= cfg.rel_tol {
            return Ok((x, iters));
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|x| x / beta).collect()];
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            let mut zk = vec![0.0; n];
            pc.apply(&v[k], &mut zk);
            let mut w = a.mul(&zk);
            z.push(zk);
            for i in 0..=k {
                h[i][k] = dot(&w, &v[i]);
                for (wj, vj) in w.iter_mut().zip(&v[i]) {
                    *wj -= h[i][k] * vj;
                }
            }
            h[k + 1][k] = norm2(&w);
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let d = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            if d == 0.0 {
                return Err(Error::KrylovStall { iters, residual: rel });
            }
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            let hk1 = h[k + 1][k];
            h[k][k] = d;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            iters += 1;
            k_used = k + 1;
            rel = g[k + 1].abs() / bnorm;
            if rel <= cfg.rel_tol || iters >= cfg.max_iter || hk1 == 0.0 {
                break;
            }
            v.push(w.iter().map(|x| x / hk1).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, zi) in x.iter_mut().zip(&z[j]) {
                *xi += yj * zi;
            }
        }
        let ax = a.mul(&x);
        r = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    }
    let rel_true = norm2(&r) / bnorm;
    if rel_true <= cfg.rel_tol {
        Ok((x, iters))
    } else {
        Err(Error::KrylovStall { iters, residual: rel_true.max(rel) })
    }
}

/// SGS-preconditioned conjugate gradients for symmetric positive definite systems.
pub fn cg(a: &CsrMatrix, b: &[f64], cfg: &KrylovConfig) -> Result<(Vec<f64>, usize)> {
    let n = a.n;
    let pc = SgsPreconditioner::new(a)?;
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    pc.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=cfg.max_iter {
        let ap = a.mul(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::KrylovStall { iters: it, residual: norm2(&r) / bnorm });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = norm2(&r) / bnorm;
        if rel <= cfg.rel_tol {
            return Ok((x, it));
        }
        pc.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::KrylovStall { iters: cfg.max_iter, residual: norm2(&r) / bnorm })
}

/// Sparse LU with the symbolic analysis cached per sparsity pattern.
#[derive(Default)]
pub struct DirectSolver {
    cache: Option<(u64, usize, Vec<usize>, SymbolicLu<usize>)>,
}

impl DirectSolver {
    pub fn solve(&mut self, a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
        faer::set_global_parallelism(faer::Par::Seq);
        let n = a.n;
        if n == 0 {
            return Ok(Vec::new());
        }
        let fresh = !matches!(&self.cache, Some((id, nnz, _, _)) if *id == a.pattern_id && *nnz == a.nnz());
        // The pattern is structurally symmetric, so CSR arrays double as CSC of the
        // same pattern; values are permuted to their transposed positions.
        let sym_ref = SymbolicSparseColMatRef::new_checked(n, n, &a.row_ptr, None, &a.col_idx);
        if fresh {
            let sym = SymbolicLu::try_new(sym_ref).map_err(|e| Error::LinearSolver(format!("{e:?}")))?;
            self.cache = Some((a.pattern_id, a.nnz(), a.transpose_map(), sym));
        }
        let (_, _, tmap, sym) = self.cache.as_ref().expect("cached");
        let vals: Vec<f64> = tmap.iter().map(|&k| a.vals[k]).collect();
        let mat = SparseColMatRef::new(sym_ref, &vals);
        let lu = Lu::try_new_with_symbolic(sym.clone(), mat).map_err(|e| Error::LinearSolver(format!("{e:?}")))?;
        let rhs = Col::<f64>::from_fn(n, |i| b[i]);
        let x = lu.solve(&rhs);
        let x: Vec<f64> = (0..n).map(|i| x[i]).collect();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolver("singular matrix (non-finite solution); check for unconstrained rigid modes".into()));
        }
        Ok(x)
    }
}

/// Dispatches to the configured method and counts linear iterations
/// (a direct solve counts as one).
pub struct LinearSolver {
    pub method: LinearMethod,
    pub krylov: KrylovConfig,
    direct: DirectSolver,
}

impl LinearSolver {
    pub fn new(method: LinearMethod, krylov: KrylovConfig) -> Self {
        Self { method, krylov, direct: DirectSolver::default() }
    }

    pub fn resolved_method(&self, n: usize) -> LinearMethod {
        match self.method {
            LinearMethod::Auto if n < DIRECT_THRESHOLD => LinearMethod::Direct,
            LinearMethod::Auto => LinearMethod::Gmres,
            m => m,
        }
    }

    pub fn solve(&mut self, a: &CsrMatrix, b: &[f64]) -> Result<(Vec<f64>, usize)> {
        match self.resolved_method(a.n) {
            LinearMethod::Direct | LinearMethod::Auto => Ok((self.direct.solve(a, b)?, 1)),
            LinearMethod::Gmres => gmres(a, b, &self.krylov),
            LinearMethod::Cg => cg(a, b, &self.krylov),
        }
    }
}
