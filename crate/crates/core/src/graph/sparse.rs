//! Compressed sparse column matrices, fill-reducing ordering and a
//! sparse Cholesky factorization for symmetric positive-definite systems.

use std::collections::{BTreeSet, HashMap};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Pivots smaller than this fraction of the matching diagonal entry are
/// treated as zero.
pub const PIVOT_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CscMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            col_ptr: vec![0; ncols + 1],
            row_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    /// Rows within each column come out sorted.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; ncols + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            counts[c + 1] += 1;
        }
        for c in 0..ncols {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut rows = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            rows[next[c]] = r;
            vals[next[c]] = v;
            next[c] += 1;
        }
        let mut col_ptr = Vec::with_capacity(ncols + 1);
        let mut row_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        col_ptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for c in 0..ncols {
            order.clear();
            order.extend(counts[c]..counts[c + 1]);
            order.sort_by_key(|&p| rows[p]);
            let mut last = usize::MAX;
            for &p in &order {
                if rows[p] == last {
                    *values.last_mut().unwrap() += vals[p];
                } else {
                    row_idx.push(rows[p]);
                    values.push(vals[p]);
                    last = rows[p];
                }
            }
            col_ptr.push(row_idx.len());
        }
        Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut t = Vec::new();
        for c in 0..m.ncols() {
            for r in 0..m.nrows() {
                if m[(r, c)] != 0.0 {
                    t.push((r, c, m[(r, c)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), &t)
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn column(&self, c: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.col_ptr[c]..self.col_ptr[c + 1];
        self.row_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.column(c).filter(|&(i, _)| i == r).map(|(_, v)| v).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for c in 0..self.ncols {
            for (r, v) in self.column(c) {
                m[(r, c)] += v;
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for c in 0..self.ncols {
            for (r, v) in self.column(c) {
                t.push((c, r, v));
            }
        }
        Self::from_triplets(self.ncols, self.nrows, &t)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        for (c, &xc) in x.iter().enumerate() {
            if xc != 0.0 {
                for (r, v) in self.column(c) {
                    y[r] += v * xc;
                }
            }
        }
        y
    }

    /// `Aᵀ x`.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        (0..self.ncols)
            .map(|c| self.column(c).map(|(r, v)| v * x[r]).sum())
            .collect()
    }

    /// Gram matrix `AᵀA` (full symmetric storage).
    pub fn gram(&self) -> Self {
        let rows = self.transpose(); // column k of `rows` is row k of self
        let n = self.ncols;
        let mut work = vec![0.0; n];
        let mut mark = vec![usize::MAX; n];
        let mut pattern = Vec::new();
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for j in 0..n {
            pattern.clear();
            for (k, akj) in self.column(j) {
                for (i, aki) in rows.column(k) {
                    if mark[i] != j {
                        mark[i] = j;
                        work[i] = 0.0;
                        pattern.push(i);
                    }
                    work[i] += aki * akj;
                }
            }
            pattern.sort_unstable();
            for &i in &pattern {
                row_idx.push(i);
                values.push(work[i]);
            }
            col_ptr.push(row_idx.len());
        }
        Self {
            nrows: n,
            ncols: n,
            col_ptr,
            row_idx,
            values,
        }
    }

    fn diagonal_position(&self, c: usize) -> Option<usize> {
        let range = self.col_ptr[c]..self.col_ptr[c + 1];
        self.row_idx[range.clone()].binary_search(&c).ok().map(|p| range.start + p)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.ncols.min(self.nrows))
            .map(|c| self.diagonal_position(c).map_or(0.0, |p| self.values[p]))
            .collect()
    }

    /// Returns `self + diag(d)` for a square matrix with sorted columns.
    pub fn add_diagonal(&self, d: &[f64]) -> Self {
        assert_eq!(self.nrows, self.ncols);
        assert_eq!(d.len(), self.ncols);
        let mut out = self.clone();
        let mut missing = Vec::new();
        for (c, &dc) in d.iter().enumerate() {
            match self.diagonal_position(c) {
                Some(p) => out.values[p] += dc,
                None => missing.push((c, c, dc)),
            }
        }
        if missing.is_empty() {
            return out;
        }
        let mut t = missing;
        for c in 0..self.ncols {
            t.extend(self.column(c).map(|(r, v)| (r, c, v)));
        }
        Self::from_triplets(self.nrows, self.ncols, &t)
    }
}

/// Fill-reducing permutation (`perm[new] = old`) for a symmetric matrix.
///
/// Columns with identical sparsity patterns are merged into supervariables
/// and eliminated together; supervariables are then ordered greedily by
/// minimum external degree (counted in scalar columns), with ties broken by
/// lowest index so the ordering is deterministic.
pub fn minimum_degree_ordering(a: &CscMatrix) -> Vec<usize> {
    assert_eq!(a.nrows, a.ncols);
    let n = a.ncols;
    // supervariable detection
    let mut group_of = vec![0usize; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut seen: HashMap<Vec<usize>, usize> = HashMap::new();
    #[allow(clippy::needless_range_loop)]
    for c in 0..n {
        let mut pat: Vec<usize> = a.column(c).map(|(r, _)| r).collect();
        pat.push(c);
        pat.sort_unstable();
        pat.dedup();
        let g = *seen.entry(pat).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(c);
        group_of[c] = g;
    }
    let ng = groups.len();
    let weight: Vec<usize> = groups.iter().map(Vec::len).collect();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); ng];
    for c in 0..n {
        let gc = group_of[c];
        for (r, _) in a.column(c) {
            let gr = group_of[r];
            if gr != gc {
                adj[gc].insert(gr);
                adj[gr].insert(gc);
            }
        }
    }
    let degree = |adj: &Vec<BTreeSet<usize>>, g: usize| -> usize { adj[g].iter().map(|&h| weight[h]).sum() };
    let mut deg: Vec<usize> = (0..ng).map(|g| degree(&adj, g)).collect();
    let mut queue: BTreeSet<(usize, usize)> = (0..ng).map(|g| (deg[g], g)).collect();
    let mut perm = Vec::with_capacity(n);
    while let Some((_, g)) = queue.pop_first() {
        perm.extend_from_slice(&groups[g]);
        let nbrs: Vec<usize> = std::mem::take(&mut adj[g]).into_iter().collect();
        for &u in &nbrs {
            adj[u].remove(&g);
        }
        for (i, &u) in nbrs.iter().enumerate() {
            for &v in &nbrs[i + 1..] {
                adj[u].insert(v);
                adj[v].insert(u);
            }
        }
        for &u in &nbrs {
            queue.remove(&(deg[u], u));
            deg[u] = degree(&adj, u);
            queue.insert((deg[u], u));
        }
    }
    perm
}

/// Sparse `L Lᵀ = P A Pᵀ` factorization.
#[derive(Debug, Clone)]
pub struct SparseCholesky {
    n: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    /// `pinv[old] = new`
    pinv: Vec<usize>,
    /// Lower-triangular factor; the diagonal is the first entry of each column.
    l: CscMatrix,
}

impl SparseCholesky {
    /// Factors a symmetric positive-definite matrix given in full storage,
    /// using [`minimum_degree_ordering`].
    pub fn factor(a: &CscMatrix) -> Result<Self> {
        let perm = minimum_degree_ordering(a);
        Self::factor_with_ordering(a, perm)
    }

    pub fn factor_with_ordering(a: &CscMatrix, perm: Vec<usize>) -> Result<Self> {
        assert_eq!(a.nrows, a.ncols);
        let n = a.ncols;
        assert_eq!(perm.len(), n);
        let mut pinv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            pinv[old] = new;
        }
        // upper triangle of C = P A Pᵀ
        let mut t = Vec::with_capacity(a.nnz() / 2 + n);
        for c in 0..n {
            for (r, v) in a.column(c) {
                let (i, j) = (pinv[r], pinv[c]);
                if i <= j {
                    t.push((i, j, v));
                }
            }
        }
        let c = CscMatrix::from_triplets(n, n, &t);
        let parent = etree(&c);

        // column counts of L from the row patterns
        let mut counts = vec![1usize; n];
        let mut stack = vec![0usize; n];
        let mut mark = vec![usize::MAX; n];
        for k in 0..n {
            let top = ereach(&c, k, &parent, &mut stack, &mut mark);
            for &i in &stack[top..] {
                counts[i] += 1;
            }
        }
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + counts[k];
        }
        let nnz = lp[n];
        let mut li = vec![0usize; nnz];
        let mut lx = vec![0.0f64; nnz];
        let mut next = lp.clone();
        let mut x = vec![0.0f64; n];
        mark.iter_mut().for_each(|m| *m = usize::MAX);

        // Trailing columns of L that are completely full are factored as
        // one dense block once the sparse leading part is done.
        let mut t = n;
        while t > 0 && counts[t - 1] == n - (t - 1) {
            t -= 1;
        }
        let dense_tail = n - t >= DENSE_TAIL_MIN;
        let sparse_end = if dense_tail { t } else { n };

        for k in 0..sparse_end {
            let top = ereach(&c, k, &parent, &mut stack, &mut mark);
            let mut akk = 0.0;
            for (i, v) in c.column(k) {
                x[i] = v;
                if i == k {
                    akk = v;
                }
            }
            let mut d = x[k];
            x[k] = 0.0;
            for &i in &stack[top..] {
                let lki = x[i] / lx[lp[i]];
                x[i] = 0.0;
                for p in lp[i] + 1..next[i] {
                    x[li[p]] -= lx[p] * lki;
                }
                d -= lki * lki;
                let p = next[i];
                li[p] = k;
                lx[p] = lki;
                next[i] += 1;
            }
            if !(d > PIVOT_RTOL * akk.abs()) || !d.is_finite() || d <= 0.0 {
                return Err(Error::SingularInformation { pivot: k, dim: n });
            }
            let p = next[k];
            li[p] = k;
            lx[p] = d.sqrt();
            next[k] += 1;
        }

        if dense_tail {
            let nt = n - t;
            let mut s = DMatrix::<f64>::zeros(nt, nt);
            let mut rows21: Vec<Vec<(usize, f64)>> = Vec::with_capacity(nt);
            for k in t..n {
                let top = ereach(&c, k, &parent, &mut stack, &mut mark);
                for (i, v) in c.column(k) {
                    if i < t {
                        x[i] = v;
                    } else {
                        s[(i - t, k - t)] = v;
                        s[(k - t, i - t)] = v;
                    }
                }
                let mut row = Vec::new();
                for &i in stack[top..].iter().filter(|&&i| i < t) {
                    let lki = x[i] / lx[lp[i]];
                    x[i] = 0.0;
                    for p in lp[i] + 1..next[i] {
                        if li[p] >= t {
                            break;
                        }
                        x[li[p]] -= lx[p] * lki;
                    }
                    let p = next[i];
                    li[p] = k;
                    lx[p] = lki;
                    next[i] += 1;
                    row.push((i, lki));
                }
                rows21.push(row);
            }
            let mut used: Vec<usize> = rows21.iter().flatten().map(|&(i, _)| i).collect();
            used.sort_unstable();
            used.dedup();
            if !used.is_empty() {
                let mut slot = vec![usize::MAX; t];
                for (j, &i) in used.iter().enumerate() {
                    slot[i] = j;
                }
                let mut l21 = DMatrix::<f64>::zeros(nt, used.len());
                for (r, row) in rows21.iter().enumerate() {
                    for &(i, v) in row {
                        l21[(r, slot[i])] = v;
                    }
                }
                s -= &l21 * l21.transpose();
            }
            let diag: Vec<f64> = (t..n).map(|k| c.get(k, k)).collect();
            dense_cholesky_lower(&mut s, &diag).map_err(|j| Error::SingularInformation { pivot: t + j, dim: n })?;
            for j in 0..nt {
                let k = t + j;
                let p0 = next[k];
                for r in j..nt {
                    li[p0 + r - j] = t + r;
                    lx[p0 + r - j] = s[(r, j)];
                }
                next[k] += nt - j;
            }
        }
        Ok(Self {
            n,
            perm,
            pinv,
            l: CscMatrix {
                nrows: n,
                ncols: n,
                col_ptr: lp,
                row_idx: li,
                values: lx,
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn factor_nnz(&self) -> usize {
        self.l.nnz()
    }

    pub fn log_det(&self) -> f64 {
        (0..self.n)
            .map(|j| 2.0 * self.l.values[self.l.col_ptr[j]].ln())
            .sum()
    }

    /// Solves `L y = b` in place (permuted coordinates), starting at column
    /// `first` below which `b` is known to vanish.
    fn forward_from(&self, y: &mut [f64], first: usize) {
        for j in first..self.n {
            let yj = y[j];
            if yj == 0.0 {
                continue;
            }
            let start = self.l.col_ptr[j];
            let yj = yj / self.l.values[start];
            y[j] = yj;
            for p in start + 1..self.l.col_ptr[j + 1] {
                y[self.l.row_idx[p]] -= self.l.values[p] * yj;
            }
        }
    }

    fn backward(&self, y: &mut [f64]) {
        for j in (0..self.n).rev() {
            let start = self.l.col_ptr[j];
            let mut s = y[j];
            for p in start + 1..self.l.col_ptr[j + 1] {
                s -= self.l.values[p] * y[self.l.row_idx[p]];
            }
            y[j] = s / self.l.values[start];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        self.forward_from(&mut y, 0);
        self.backward(&mut y);
        let mut x = vec![0.0; self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    /// The `cols × cols` block of `A⁻¹`.
    pub fn inverse_block(&self, cols: &[usize]) -> DMatrix<f64> {
        let ys: Vec<Vec<f64>> = cols
            .iter()
            .map(|&c| {
                let q = self.pinv[c];
                let mut y = vec![0.0; self.n];
                y[q] = 1.0;
                self.forward_from(&mut y, q);
                y
            })
            .collect();
        let k = cols.len();
        let mut out = DMatrix::zeros(k, k);
        for a in 0..k {
            for b in a..k {
                let lo = self.pinv[cols[a]].min(self.pinv[cols[b]]);
                let v: f64 = ys[a][lo..].iter().zip(&ys[b][lo..]).map(|(x, y)| x * y).sum();
                out[(a, b)] = v;
                out[(b, a)] = v;
            }
        }
        out
    }
}

/// Smallest trailing block worth handing to the dense kernel.
const DENSE_TAIL_MIN: usize = 48;

/// In-place lower Cholesky factor of a dense symmetric matrix, with the same
/// relative pivot test as the sparse factorization against `diag`. Returns
/// the failing pivot on error. Only the lower triangle is meaningful after.
fn dense_cholesky_lower(a: &mut DMatrix<f64>, diag: &[f64]) -> std::result::Result<(), usize> {
    let n = a.nrows();
    for j in 0..n {
        let d = a[(j, j)];
        if !(d > PIVOT_RTOL * diag[j].abs()) || !d.is_finite() || d <= 0.0 {
            return Err(j);
        }
        let ljj = d.sqrt();
        let data = a.as_mut_slice(); // column-major
        let (done, rest) = data.split_at_mut((j + 1) * n);
        let col = &mut done[j * n..];
        col[j] = ljj;
        for v in &mut col[j + 1..] {
            *v /= ljj;
        }
        for (c, dst) in rest.chunks_exact_mut(n).enumerate() {
            let cj = j + 1 + c;
            let f = col[cj];
            if f == 0.0 {
                continue;
            }
            for (d, s) in dst[cj..].iter_mut().zip(&col[cj..]) {
                *d -= f * s;
            }
        }
    }
    Ok(())
}

/// Elimination tree of a matrix given by its upper triangle.
fn etree(c: &CscMatrix) -> Vec<usize> {
    let n = c.ncols;
    let mut parent = vec![usize::MAX; n];
    let mut ancestor = vec![usize::MAX; n];
    for k in 0..n {
        for (i0, _) in c.column(k) {
            let mut i = i0;
            while i != usize::MAX && i < k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == usize::MAX {
                    parent[i] = k;
                    break;
                }
                i = next;
            }
        }
    }
    parent
}

/// Nonzero pattern of row `k` of `L` (excluding the diagonal), written to
/// `stack[top..]` in topological order. `mark` must not contain `k`.
fn ereach(c: &CscMatrix, k: usize, parent: &[usize], stack: &mut [usize], mark: &mut [usize]) -> usize {
    let n = c.ncols;
    let mut top = n;
    mark[k] = k;
    for (i0, _) in c.column(k) {
        if i0 > k {
            continue;
        }
        let mut i = i0;
        let mut len = 0;
        while mark[i] != k {
            stack[len] = i;
            len += 1;
            mark[i] = k;
            i = parent[i];
        }
        while len > 0 {
            len -= 1;
            top -= 1;
            stack[top] = stack[len];
        }
    }
    top
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::rng_from_seed;
    use rand::Rng;

    fn random_sparse(rows: usize, cols: usize, density: f64, seed: u64) -> CscMatrix {
        let mut rng = rng_from_seed(seed);
        let mut t = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                if rng.gen::<f64>() < density {
                    t.push((r, c, rng.gen_range(-2.0..2.0)));
                }
            }
        }
        CscMatrix::from_triplets(rows, cols, &t)
    }

    fn random_spd(n: usize, seed: u64) -> CscMatrix {
        let a = random_sparse(3 * n, n, 0.05, seed);
        a.gram().add_diagonal(&vec![0.5; n])
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = CscMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 0, 2.0), (0, 0, 3.0), (1, 1, -1.0)]);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 0), 4.0);
        assert_eq!(m.to_dense(), DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 2.0, -1.0]));
    }

    #[test]
    fn gram_matches_dense() {
        let a = random_sparse(200, 90, 0.04, 3);
        let d = a.to_dense();
        let g = a.gram().to_dense();
        assert!((g - d.transpose() * &d).abs().max() < 1e-12);
        assert_eq!(CscMatrix::identity(5).gram(), CscMatrix::identity(5));
    }

    #[test]
    fn ordering_is_a_permutation() {
        let a = random_spd(120, 8);
        let mut p = minimum_degree_ordering(&a);
        p.sort_unstable();
        assert_eq!(p, (0..120).collect::<Vec<_>>());
    }

    #[test]
    fn cholesky_matches_dense() {
        for seed in 0..5 {
            let a = random_spd(60, seed);
            let d = a.to_dense();
            let chol = SparseCholesky::factor(&a).unwrap();
            let dense_ld = 2.0 * d.clone().cholesky().unwrap().l().diagonal().map(f64::ln).sum();
            assert!((chol.log_det() - dense_ld).abs() < 1e-9 * dense_ld.abs().max(1.0));
            let b: Vec<f64> = (0..60).map(|i| (i as f64).sin()).collect();
            let x = chol.solve(&b);
            let r = a.mul_vec(&x);
            let err: f64 = r.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            assert!(err < 1e-9);
            let inv = d.try_inverse().unwrap();
            let cols = [3usize, 17, 40, 59];
            let blk = chol.inverse_block(&cols);
            for (i, &ci) in cols.iter().enumerate() {
                for (j, &cj) in cols.iter().enumerate() {
                    assert!((blk[(i, j)] - inv[(ci, cj)]).abs() < 1e-10 * inv[(ci, ci)].abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = CscMatrix::from_dense(&DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]));
        assert!(matches!(SparseCholesky::factor(&a), Err(Error::SingularInformation { .. })));
        let neg = CscMatrix::from_dense(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -3.0]));
        assert!(SparseCholesky::factor(&neg).is_err());
    }

    /// Bundle-like structure: 3-column blocks that only touch a shared set
    /// of 6-column blocks, so the factor ends in a large dense block.
    fn arrowhead(points: usize, poses: usize, seed: u64) -> CscMatrix {
        let mut rng = rng_from_seed(seed);
        let n = 3 * points + 6 * poses;
        let mut t = Vec::new();
        let mut row = 0;
        for p in 0..points {
            for q in 0..poses {
                if rng.gen::<f64>() < 0.8 {
                    for _ in 0..2 {
                        for c in 0..3 {
                            t.push((row, 3 * p + c, rng.gen_range(-1.0..1.0)));
                        }
                        for c in 0..6 {
                            t.push((row, 3 * points + 6 * q + c, rng.gen_range(-1.0..1.0)));
                        }
                        row += 1;
                    }
                }
            }
        }
        for c in 0..n {
            t.push((row, c, 0.1));
            row += 1;
        }
        CscMatrix::from_triplets(row, n, &t).gram()
    }

    #[test]
    fn dense_tail_matches_dense_oracle() {
        let a = arrowhead(40, 12, 4);
        let n = a.ncols;
        let chol = SparseCholesky::factor(&a).unwrap();
        let d = a.to_dense();
        let dense_ld = 2.0 * d.clone().cholesky().unwrap().l().diagonal().map(f64::ln).sum();
        assert!((chol.log_det() - dense_ld).abs() < 1e-9 * dense_ld.abs());
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).cos()).collect();
        let r = a.mul_vec(&chol.solve(&b));
        assert!(r.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-9));
        let inv = d.try_inverse().unwrap();
        let cols: Vec<usize> = vec![0, 1, 2, 3 * 40, 3 * 40 + 5, n - 1];
        let blk = chol.inverse_block(&cols);
        for (i, &ci) in cols.iter().enumerate() {
            for (j, &cj) in cols.iter().enumerate() {
                assert!((blk[(i, j)] - inv[(ci, cj)]).abs() < 1e-9 * inv[(ci, ci)].abs());
            }
        }
        // the pose columns are eliminated last, so the dense kernel ran
        let perm = minimum_degree_ordering(&a);
        assert!(n - perm.iter().position(|&c| c >= 3 * 40).unwrap() >= DENSE_TAIL_MIN);
    }

    #[test]
    fn dense_tail_reports_singular_pivot() {
        let mut a = arrowhead(30, 10, 5).to_dense();
        let n = a.nrows();
        // make the last pose column a copy of its neighbour
        for r in 0..n {
            a[(r, n - 1)] = a[(r, n - 2)];
        }
        for c in 0..n {
            a[(n - 1, c)] = a[(n - 2, c)];
        }
        let m = CscMatrix::from_dense(&a);
        assert!(matches!(SparseCholesky::factor(&m), Err(Error::SingularInformation { .. })));
    }
}
