//! Sparse linear solvers: banded LU after bandwidth-reducing reordering, and
//! ILU(0)-preconditioned BiCGSTAB.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::sparse::CsrMatrix;

/// Reverse Cuthill–McKee ordering of the symmetrized sparsity pattern.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for &j in a.row(i).0 {
            let j = j as usize;
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for l in adj.iter_mut() {
        l.sort_unstable();
        l.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let bfs = |start: usize, visited: &mut Vec<bool>, out: &mut Vec<usize>| -> usize {
        // returns the last node reached (a far node for pseudo-peripheral search)
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        let mut last = start;
        while let Some(v) = queue.pop_front() {
            out.push(v);
            last = v;
            let mut nbrs: Vec<usize> = adj[v].iter().copied().filter(|&u| !visited[u]).collect();
            nbrs.sort_by_key(|&u| degree[u]);
            for u in nbrs {
                visited[u] = true;
                queue.push_back(u);
            }
        }
        last
    };

    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| degree[v]);
    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        // pseudo-peripheral start: the far end of a BFS from the seed
        let mut scratch_visited = visited.clone();
        let mut scratch = Vec::new();
        let far = bfs(seed, &mut scratch_visited, &mut scratch);
        bfs(far, &mut visited, &mut order);
    }
    order.reverse();
    order
}

/// `P A P^T` for `perm[new] = old`.
pub fn permute_symmetric(a: &CsrMatrix, perm: &[usize]) -> CsrMatrix {
    let n = a.nrows();
    let mut inv = vec![0u32; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new as u32;
    }
    let rows = perm
        .iter()
        .map(|&old| {
            let (c, v) = a.row(old);
            c.iter().zip(v).map(|(&j, &x)| (inv[j as usize], x)).collect()
        })
        .collect();
    CsrMatrix::from_rows(n, n, rows)
}

/// LU factorization with partial pivoting of a band matrix, LAPACK `gbtrf` layout.
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
    perm: Vec<usize>,
}

impl std::fmt::Debug for BandedLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BandedLu").field("n", &self.n).field("kl", &self.kl).field("ku", &self.ku).finish()
    }
}

/// Refuse factorizations whose band storage would exceed this many entries.
pub const MAX_BAND_ENTRIES: usize = 1 << 28;

impl BandedLu {
    /// Reorders with RCM and factors `a`.
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Solver(format!("matrix is {}x{}, not square", a.nrows(), a.ncols())));
        }
        let n = a.nrows();
        let perm = reverse_cuthill_mckee(a);
        let pa = permute_symmetric(a, &perm);
        let (mut kl, mut ku) = (0usize, 0usize);
        for i in 0..n {
            for &j in pa.row(i).0 {
                let j = j as usize;
                if i > j {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        let ldab = 2 * kl + ku + 1;
        if n.saturating_mul(ldab) > MAX_BAND_ENTRIES {
            return Err(Error::Solver(format!(
                "band storage {n} x {ldab} exceeds the direct solver budget; use the iterative solver"
            )));
        }
        let kv = kl + ku;
        let mut ab = vec![0.0; n * ldab];
        for i in 0..n {
            let (c, v) = pa.row(i);
            for (&j, &x) in c.iter().zip(v) {
                let j = j as usize;
                ab[kv + i - j + j * ldab] += x;
            }
        }
        let mut ipiv = vec![0; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let col = j * ldab;
            let mut jp = 0;
            let mut best = ab[col + kv].abs();
            for i in 1..=km {
                let v = ab[col + kv + i].abs();
                if v > best {
                    best = v;
                    jp = i;
                }
            }
            ipiv[j] = j + jp;
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Solver(format!("zero or non-finite pivot in column {j}")));
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let r1 = kv + j - c + c * ldab;
                    let r2 = kv + j + jp - c + c * ldab;
                    ab.swap(r1, r2);
                }
            }
            if km > 0 {
                let inv = 1.0 / ab[col + kv];
                for i in 1..=km {
                    ab[col + kv + i] *= inv;
                }
                let (left, right) = ab.split_at_mut((j + 1) * ldab);
                let lcol = &left[col + kv + 1..col + kv + 1 + km];
                let ncols = ju - j;
                let update = |(k, cdata): (usize, &mut [f64])| {
                    let c = j + 1 + k;
                    let top = kv + j - c; // row j in column c
                    let ujc = cdata[top];
                    if ujc != 0.0 {
                        for (dst, &l) in cdata[top + 1..top + 1 + km].iter_mut().zip(lcol) {
                            *dst -= l * ujc;
                        }
                    }
                };
                let cols = &mut right[..ncols * ldab];
                if ncols * km > 1 << 14 {
                    cols.par_chunks_mut(ldab).enumerate().for_each(update);
                } else {
                    cols.chunks_mut(ldab).enumerate().for_each(update);
                }
            }
        }
        Ok(Self { n, kl, ku, ldab, ab, ipiv, perm })
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n, b.len())?;
        let (n, kl, ldab) = (self.n, self.kl, self.ldab);
        let kv = self.kl + self.ku;
        let mut x: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        for j in 0..n.saturating_sub(1) {
            let km = kl.min(n - 1 - j);
            let l = self.ipiv[j];
            if l != j {
                x.swap(l, j);
            }
            let xj = x[j];
            if xj != 0.0 {
                let col = j * ldab + kv;
                for i in 1..=km {
                    x[j + i] -= self.ab[col + i] * xj;
                }
            }
        }
        for j in (0..n).rev() {
            let col = j * ldab;
            x[j] /= self.ab[col + kv];
            let xj = x[j];
            if xj != 0.0 {
                for i in j.saturating_sub(kv)..j {
                    x[i] -= self.ab[kv + i - j + col] * xj;
                }
            }
        }
        let mut out = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        Ok(out)
    }
}

/// Incomplete LU with the sparsity pattern of the matrix itself.
pub struct Ilu0 {
    lu: CsrMatrix,
    diag_pos: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        let mut rows: Vec<(Vec<u32>, Vec<f64>)> = (0..n).map(|i| {
            let (c, v) = a.row(i);
            (c.to_vec(), v.to_vec())
        }).collect();
        let mut diag_pos = vec![usize::MAX; n];
        for (i, (c, _)) in rows.iter().enumerate() {
            if let Ok(k) = c.binary_search(&(i as u32)) {
                diag_pos[i] = k;
            } else {
                return Err(Error::Solver(format!("ILU(0): missing diagonal in row {i}")));
            }
        }
        for i in 0..n {
            let (head, tail) = rows.split_at_mut(i);
            let (ci, vi) = &mut tail[0];
            for p in 0..diag_pos[i] {
                let k = ci[p] as usize;
                let (ck, vk) = &head[k];
                let pivot = vk[diag_pos[k]];
                if pivot == 0.0 {
                    return Err(Error::Solver(format!("ILU(0): zero pivot in row {k}")));
                }
                vi[p] /= pivot;
                let lik = vi[p];
                // row_i[j] -= l_ik * row_k[j] for j > k present in both patterns
                let mut q = p + 1;
                for (&j, &ukj) in ck[diag_pos[k] + 1..].iter().zip(&vk[diag_pos[k] + 1..]) {
                    while q < ci.len() && ci[q] < j {
                        q += 1;
                    }
                    if q < ci.len() && ci[q] == j {
                        vi[q] -= lik * ukj;
                    }
                }
            }
        }
        let lu = CsrMatrix::from_rows(
            n,
            n,
            rows.into_iter().map(|(c, v)| c.into_iter().zip(v).collect()).collect(),
        );
        Ok(Self { lu, diag_pos })
    }

    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        let n = r.len();
        let mut y = r.to_vec();
        for i in 0..n {
            let (c, v) = self.lu.row(i);
            let mut s = y[i];
            for p in 0..self.diag_pos[i] {
                s -= v[p] * y[c[p] as usize];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let (c, v) = self.lu.row(i);
            let d = self.diag_pos[i];
            let mut s = y[i];
            for p in d + 1..c.len() {
                s -= v[p] * y[c[p] as usize];
            }
            y[i] = s / v[d];
        }
        y
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.par_iter().with_min_len(4096).zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Outcome of an iterative solve.
#[derive(Clone, Debug)]
pub struct KrylovInfo {
    pub iterations: usize,
    pub relative_residual: f64,
    pub history: Vec<f64>,
}

/// Right-preconditioned BiCGSTAB with ILU(0) to relative residual `rtol`.
pub fn bicgstab(a: &CsrMatrix, pre: &Ilu0, b: &[f64], x0: Option<&[f64]>, rtol: f64, max_iter: usize) -> Result<(Vec<f64>, KrylovInfo)> {
    let n = a.nrows();
    check_dim(n, b.len())?;
    let bnorm = norm(b);
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], KrylovInfo { iterations: 0, relative_residual: 0.0, history: vec![] }));
    }
    let ax = a.matvec(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut history = vec![norm(&r) / bnorm];
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let p_hat = pre.apply(&p);
        a.matvec_into(&p_hat, &mut v);
        alpha = rho / dot(&r_hat, &v);
        let s: Vec<f64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
        for i in 0..n {
            x[i] += alpha * p_hat[i];
        }
        let sn = norm(&s) / bnorm;
        if sn < rtol {
            history.push(sn);
            return Ok((x, KrylovInfo { iterations: it, relative_residual: sn, history }));
        }
        let s_hat = pre.apply(&s);
        let t = a.matvec(&s_hat);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        let rn = norm(&r) / bnorm;
        history.push(rn);
        if !rn.is_finite() {
            break;
        }
        if rn < rtol {
            return Ok((x, KrylovInfo { iterations: it, relative_residual: rn, history }));
        }
        if omega == 0.0 {
            break;
        }
    }
    let tail: Vec<String> = history.iter().rev().take(5).map(|v| format!("{v:.2e}")).collect();
    Err(Error::Solver(format!(
        "BiCGSTAB stagnated after {} iterations; last residuals {}",
        history.len() - 1,
        tail.join(", ")
    )))
}

/// Factor-once solver for repeated right-hand sides.
pub enum LinearSolver {
    Direct(BandedLu),
    Iterative { matrix: CsrMatrix, pre: Ilu0, rtol: f64 },
}

impl LinearSolver {
    /// Direct banded LU when it fits the memory budget, ILU(0)-BiCGSTAB otherwise.
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        match BandedLu::factor(a) {
            Ok(lu) => Ok(LinearSolver::Direct(lu)),
            Err(Error::Solver(msg)) if msg.contains("budget") => Self::iterative(a, 1e-10),
            Err(e) => Err(e),
        }
    }

    pub fn iterative(a: &CsrMatrix, rtol: f64) -> Result<Self> {
        Ok(LinearSolver::Iterative { pre: Ilu0::new(a)?, matrix: a.clone(), rtol })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        match self {
            LinearSolver::Direct(lu) => lu.solve(b),
            LinearSolver::Iterative { matrix, pre, rtol } => {
                Ok(bicgstab(matrix, pre, b, Some(b), *rtol, 2000)?.0)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sparse(n: usize, per_row: usize, seed: u64) -> CsrMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0 + rng.random::<f64>()));
            for _ in 0..per_row {
                let off: i64 = rng.random_range(-6..=6);
                let j = (i as i64 + off).clamp(0, n as i64 - 1) as usize;
                t.push((i, j, rng.random::<f64>() - 0.5));
            }
        }
        // scramble so RCM has work to do
        let a = CsrMatrix::from_triplets(n, n, &t);
        let perm: Vec<usize> = (0..n).map(|i| (i * 37) % n).collect();
        permute_symmetric(&a, &perm)
    }

    fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
        a.matvec(x).iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn banded_lu_solves() {
        let a = random_sparse(300, 4, 1);
        let lu = BandedLu::factor(&a).unwrap();
        assert!(lu.bandwidths().0 < 60, "{:?}", lu.bandwidths());
        let b: Vec<f64> = (0..300).map(|i| (i as f64).sin()).collect();
        let x = lu.solve(&b).unwrap();
        assert!(residual(&a, &x, &b) < 1e-12);
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        let a = CsrMatrix::from_triplets(3, 3, &[(0, 1, 1.0), (1, 0, 1.0), (1, 2, 2.0), (2, 1, 3.0), (2, 2, 1.0)]);
        let lu = BandedLu::factor(&a).unwrap();
        let b = [1.0, 2.0, 3.0];
        let x = lu.solve(&b).unwrap();
        assert!(residual(&a, &x, &b) < 1e-14);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
        assert!(matches!(BandedLu::factor(&a), Err(Error::Solver(_))));
    }

    #[test]
    fn bicgstab_converges() {
        let a = random_sparse(500, 5, 7);
        let pre = Ilu0::new(&a).unwrap();
        let b: Vec<f64> = (0..500).map(|i| 1.0 + (i as f64 * 0.1).cos()).collect();
        let (x, info) = bicgstab(&a, &pre, &b, None, 1e-12, 500).unwrap();
        assert!(info.relative_residual < 1e-12);
        assert!(residual(&a, &x, &b) < 1e-9);
    }
}
