//! Global sparse machinery: block-sparse matrices keyed by element pairs,
//! fill-reducing ordering, direct block LU factorization (factor once,
//! solve many), and Matrix Market dumps.
//!
//! Matrices are stored as block-CSR with dense b-by-b row-major blocks,
//! where b is the per-element node count. The factorization keeps a
//! symmetric nonzero pattern (the pattern of A + A^T) with partial pivoting
//! confined to the dense diagonal blocks, so the symbolic structure is
//! computed once from the elimination tree.

use crate::dense::{DMat, LuFactors};
use crate::error::Error;
use rayon::prelude::*;

/// Block-sparse square matrix (block-CSR, dense row-major blocks).
#[derive(Debug, Clone)]
pub struct BlockMat {
    pub n_blocks: usize,
    pub b: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub blocks: Vec<f64>,
}

/// Accumulates (row element, col element, dense block) contributions;
/// duplicates are summed. Entry order of the finalized matrix is
/// deterministic regardless of insertion order.
pub struct BlockAssembler {
    n_blocks: usize,
    b: usize,
    entries: Vec<(u32, u32, usize)>,
    pool: Vec<f64>,
}

impl BlockAssembler {
    pub fn new(n_blocks: usize, b: usize) -> Self {
        BlockAssembler {
            n_blocks,
            b,
            entries: Vec::new(),
            pool: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, block: &[f64]) {
        assert!(row < self.n_blocks && col < self.n_blocks, "block index out of range");
        assert_eq!(block.len(), self.b * self.b);
        let off = self.pool.len();
        self.pool.extend_from_slice(block);
        self.entries.push((row as u32, col as u32, off));
    }

    pub fn push_dmat(&mut self, row: usize, col: usize, block: &DMat) {
        self.push(row, col, &block.data);
    }

    pub fn finalize(mut self) -> BlockMat {
        let bb = self.b * self.b;
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; self.n_blocks + 1];
        let mut col_idx = Vec::new();
        let mut blocks: Vec<f64> = Vec::new();
        let mut last: Option<(u32, u32)> = None;
        for &(r, c, off) in &self.entries {
            if last == Some((r, c)) {
                let dst = blocks.len() - bb;
                for i in 0..bb {
                    blocks[dst + i] += self.pool[off + i];
                }
            } else {
                col_idx.push(c as usize);
                blocks.extend_from_slice(&self.pool[off..off + bb]);
                row_ptr[r as usize + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..self.n_blocks {
            row_ptr[i + 1] += row_ptr[i];
        }
        BlockMat {
            n_blocks: self.n_blocks,
            b: self.b,
            row_ptr,
            col_idx,
            blocks,
        }
    }
}

#[inline(always)]
fn block_gemv_acc(b: usize, blk: &[f64], x: &[f64], y: &mut [f64]) {
    match b {
        3 => block_gemv_fixed::<3>(blk, x, y),
        6 => block_gemv_fixed::<6>(blk, x, y),
        10 => block_gemv_fixed::<10>(blk, x, y),
        15 => block_gemv_fixed::<15>(blk, x, y),
        _ => {
            for r in 0..b {
                let row = &blk[r * b..(r + 1) * b];
                let mut acc = 0.0;
                for c in 0..b {
                    acc += row[c] * x[c];
                }
                y[r] += acc;
            }
        }
    }
}

#[inline(always)]
fn block_gemv_fixed<const B: usize>(blk: &[f64], x: &[f64], y: &mut [f64]) {
    for r in 0..B {
        let row = &blk[r * B..(r + 1) * B];
        let mut acc = 0.0;
        for c in 0..B {
            acc += row[c] * x[c];
        }
        y[r] += acc;
    }
}

#[inline(always)]
fn block_gemv_sub(b: usize, blk: &[f64], x: &[f64], y: &mut [f64]) {
    for r in 0..b {
        let row = &blk[r * b..(r + 1) * b];
        let mut acc = 0.0;
        for c in 0..b {
            acc += row[c] * x[c];
        }
        y[r] -= acc;
    }
}

impl BlockMat {
    pub fn n(&self) -> usize {
        self.n_blocks * self.b
    }

    pub fn nnz_blocks(&self) -> usize {
        self.col_idx.len()
    }

    pub fn block(&self, idx: usize) -> &[f64] {
        let bb = self.b * self.b;
        &self.blocks[idx * bb..(idx + 1) * bb]
    }

    /// y = A x.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.apply_batch(&[x], &mut [y]);
    }

    /// Apply the matrix to several vectors in one sweep over the blocks.
    pub fn apply_batch(&self, xs: &[&[f64]], ys: &mut [&mut [f64]]) {
        assert_eq!(xs.len(), ys.len());
        let b = self.b;
        let bb = b * b;
        let nb = xs.len();
        for x in xs {
            assert_eq!(x.len(), self.n());
        }
        // split ys into per-row chunks processed in parallel
        let row_ptr = &self.row_ptr;
        let col_idx = &self.col_idx;
        let blocks = &self.blocks;
        // Collect mutable row slices per output: iterate rows in parallel by
        // chunking each output into b-sized rows.
        let mut out_chunks: Vec<Vec<&mut [f64]>> = Vec::with_capacity(nb);
        for y in ys.iter_mut() {
            out_chunks.push(y.chunks_mut(b).collect());
        }
        // transpose ownership: rows outermost
        let mut rows: Vec<Vec<&mut [f64]>> = (0..self.n_blocks).map(|_| Vec::with_capacity(nb)).collect();
        for per_out in out_chunks {
            for (r, chunk) in per_out.into_iter().enumerate() {
                rows[r].push(chunk);
            }
        }
        rows.par_iter_mut().enumerate().for_each(|(r, outs)| {
            for o in outs.iter_mut() {
                o.fill(0.0);
            }
            for idx in row_ptr[r]..row_ptr[r + 1] {
                let c = col_idx[idx];
                let blk = &blocks[idx * bb..(idx + 1) * bb];
                for (k, o) in outs.iter_mut().enumerate() {
                    block_gemv_acc(b, blk, &xs[k][c * b..(c + 1) * b], o);
                }
            }
        });
    }

    /// Left-multiply each block row by a dense matrix (e.g. the inverse
    /// element mass matrix): block(r, c) <- m[r] * block(r, c).
    pub fn scale_block_rows(&mut self, mats: &[DMat]) {
        assert_eq!(mats.len(), self.n_blocks);
        let b = self.b;
        let bb = b * b;
        let mut tmp = vec![0.0; bb];
        for r in 0..self.n_blocks {
            let m = &mats[r];
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                let blk = &mut self.blocks[idx * bb..(idx + 1) * bb];
                tmp.fill(0.0);
                for i in 0..b {
                    for k in 0..b {
                        let a = m.data[i * b + k];
                        if a == 0.0 {
                            continue;
                        }
                        for j in 0..b {
                            tmp[i * b + j] += a * blk[k * b + j];
                        }
                    }
                }
                blk.copy_from_slice(&tmp);
            }
        }
    }

    /// C = self * other (block-sparse product).
    pub fn matmul(&self, other: &BlockMat) -> BlockMat {
        assert_eq!(self.n_blocks, other.n_blocks);
        assert_eq!(self.b, other.b);
        let b = self.b;
        let bb = b * b;
        let n = self.n_blocks;
        let mut asm = BlockAssembler::new(n, b);
        let mut marker = vec![usize::MAX; n];
        let mut cols: Vec<usize> = Vec::new();
        let mut acc: Vec<Vec<f64>> = Vec::new();
        for r in 0..n {
            cols.clear();
            for ia in self.row_ptr[r]..self.row_ptr[r + 1] {
                let k = self.col_idx[ia];
                let ablk = self.block(ia);
                for ib in other.row_ptr[k]..other.row_ptr[k + 1] {
                    let c = other.col_idx[ib];
                    let bblk = other.block(ib);
                    let slot = if marker[c] == usize::MAX {
                        marker[c] = cols.len();
                        cols.push(c);
                        if acc.len() < cols.len() {
                            acc.push(vec![0.0; bb]);
                        } else {
                            acc[cols.len() - 1].fill(0.0);
                        }
                        cols.len() - 1
                    } else {
                        marker[c]
                    };
                    let dst = &mut acc[slot];
                    for i in 0..b {
                        for kk in 0..b {
                            let a = ablk[i * b + kk];
                            if a == 0.0 {
                                continue;
                            }
                            let brow = &bblk[kk * b..(kk + 1) * b];
                            for j in 0..b {
                                dst[i * b + j] += a * brow[j];
                            }
                        }
                    }
                }
            }
            for (slot, &c) in cols.iter().enumerate() {
                asm.push(r, c, &acc[slot]);
                marker[c] = usize::MAX;
            }
        }
        asm.finalize()
    }

    /// C = self + alpha * other.
    pub fn add_scaled(&self, other: &BlockMat, alpha: f64) -> BlockMat {
        assert_eq!(self.n_blocks, other.n_blocks);
        assert_eq!(self.b, other.b);
        let mut asm = BlockAssembler::new(self.n_blocks, self.b);
        let bb = self.b * self.b;
        let mut tmp = vec![0.0; bb];
        for r in 0..self.n_blocks {
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                asm.push(r, self.col_idx[idx], self.block(idx));
            }
            for idx in other.row_ptr[r]..other.row_ptr[r + 1] {
                for (t, &v) in tmp.iter_mut().zip(other.block(idx)) {
                    *t = alpha * v;
                }
                asm.push(r, other.col_idx[idx], &tmp);
            }
        }
        asm.finalize()
    }

    /// Scalar Matrix Market coordinate dump (1-based indices).
    pub fn write_matrix_market(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        let b = self.b;
        let bb = b * b;
        let mut nnz = 0usize;
        for blk in self.blocks.chunks(bb) {
            nnz += blk.iter().filter(|v| **v != 0.0).count();
        }
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.n(), self.n(), nnz)?;
        for r in 0..self.n_blocks {
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[idx];
                let blk = self.block(idx);
                for i in 0..b {
                    for j in 0..b {
                        let v = blk[i * b + j];
                        if v != 0.0 {
                            writeln!(w, "{} {} {:.17e}", r * b + i + 1, c * b + j + 1, v)?;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Minimum-degree ordering on the block adjacency graph (clique-update
/// elimination). Deterministic: ties broken by smallest index.
pub fn min_degree_order(n: usize, adjacency: &[Vec<usize>]) -> Vec<usize> {
    use std::collections::BTreeSet;
    let mut adj: Vec<BTreeSet<usize>> = adjacency
        .iter()
        .enumerate()
        .map(|(i, nb)| nb.iter().cloned().filter(|&j| j != i).collect())
        .collect();
    let mut eliminated = vec![false; n];
    let mut order = Vec::with_capacity(n);
    // simple bucketed selection
    for _ in 0..n {
        let mut best = usize::MAX;
        let mut best_deg = usize::MAX;
        for v in 0..n {
            if !eliminated[v] && adj[v].len() < best_deg {
                best_deg = adj[v].len();
                best = v;
            }
        }
        let v = best;
        eliminated[v] = true;
        order.push(v);
        let nbrs: Vec<usize> = adj[v].iter().cloned().collect();
        for &x in &nbrs {
            adj[x].remove(&v);
        }
        for i in 0..nbrs.len() {
            for j in (i + 1)..nbrs.len() {
                let (a, c) = (nbrs[i], nbrs[j]);
                adj[a].insert(c);
                adj[c].insert(a);
            }
        }
        adj[v].clear();
    }
    order
}

/// Sparse direct LU of a block matrix with a symmetric nonzero pattern,
/// fill-reducing ordering, and threshold partial pivoting inside the dense
/// diagonal blocks. The factorization is immutable and reusable for many
/// right-hand sides.
#[derive(Debug)]
pub struct Factorization {
    pub n_blocks: usize,
    pub b: usize,
    /// perm[k] = original block index eliminated at position k.
    perm: Vec<usize>,
    /// Symmetric-pattern storage: for position k, indices i > k (in permuted
    /// numbering) holding both L(i,k) and U(k,i).
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    l_blocks: Vec<f64>,
    u_blocks: Vec<f64>,
    diag: Vec<LuFactors>,
    pub fill_blocks: usize,
    pub min_pivot: f64,
}

impl Factorization {
    /// Relative residual max_i |Ax - rhs| / max(|rhs|, 1).
    pub fn residual(a: &BlockMat, x: &[f64], rhs: &[f64]) -> f64 {
        let mut ax = vec![0.0; rhs.len()];
        a.apply(x, &mut ax);
        let mut num = 0.0f64;
        let mut den = 1.0f64;
        for i in 0..rhs.len() {
            num = num.max((ax[i] - rhs[i]).abs());
            den = den.max(rhs[i].abs());
        }
        num / den
    }
}

/// Factor a block matrix. `centroid_hint` is unused by the ordering itself
/// but reserved for callers that pre-permute; ordering is minimum-degree on
/// the symmetrized block pattern.
pub fn factorize(a: &BlockMat) -> Result<Factorization, Error> {
    let n = a.n_blocks;
    let b = a.b;
    let bb = b * b;

    // symmetrized block adjacency
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for r in 0..n {
        for idx in a.row_ptr[r]..a.row_ptr[r + 1] {
            let c = a.col_idx[idx];
            if c != r {
                adj[r].push(c);
                adj[c].push(r);
            }
        }
    }
    for l in adj.iter_mut() {
        l.sort_unstable();
        l.dedup();
    }
    let perm = min_degree_order(n, &adj);
    let mut iperm = vec![0usize; n];
    for (k, &v) in perm.iter().enumerate() {
        iperm[v] = k;
    }
    let _keep = &iperm;

    // permuted symmetric pattern (upper-triangular adjacency in new order)
    // symbolic factorization: elimination tree + per-column row patterns
    let mut pat_upper: Vec<Vec<usize>> = vec![Vec::new(); n]; // per new-col j: new-rows i < j with A(i,j) or A(j,i) != 0
    for v in 0..n {
        let j = iperm[v];
        for &w in &adj[v] {
            let i = iperm[w];
            if i < j {
                pat_upper[j].push(i);
            }
        }
    }
    for l in pat_upper.iter_mut() {
        l.sort_unstable();
    }

    // elimination tree (ancestor path compression)
    let mut parent = vec![usize::MAX; n];
    let mut ancestor = vec![usize::MAX; n];
    for k in 0..n {
        for &i0 in &pat_upper[k] {
            let mut j = i0;
            while j != usize::MAX && j < k {
                let jnext = ancestor[j];
                ancestor[j] = k;
                if jnext == usize::MAX {
                    parent[j] = k;
                }
                j = jnext;
            }
        }
    }
    // row patterns of L: walk parent links from each A entry up to the row
    let mut row_pat: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut flag = vec![usize::MAX; n];
    for i in 0..n {
        flag[i] = i;
        for &j0 in &pat_upper[i] {
            let mut j = j0;
            while j != usize::MAX && flag[j] != i {
                row_pat[i].push(j); // L(i, j) nonzero
                flag[j] = i;
                j = parent[j];
            }
        }
        row_pat[i].sort_unstable();
    }

    // column structures (strictly below diagonal)
    let mut col_counts = vec![0usize; n];
    for pat in row_pat.iter() {
        for &j in pat {
            col_counts[j] += 1;
        }
    }
    let mut col_ptr = vec![0usize; n + 1];
    for j in 0..n {
        col_ptr[j + 1] = col_ptr[j] + col_counts[j];
    }
    let nnz = col_ptr[n];
    let mut row_idx = vec![0usize; nnz];
    {
        let mut next = col_ptr.clone();
        for (i, pat) in row_pat.iter().enumerate() {
            for &j in pat {
                row_idx[next[j]] = i;
                next[j] += 1;
            }
        }
    }
    // rows within each column are ascending by construction (i increases)

    let mut l_blocks = vec![0.0; nnz * bb];
    let mut u_blocks = vec![0.0; nnz * bb];
    let mut diag: Vec<Option<LuFactors>> = (0..n).map(|_| None).collect();

    // position lookup within columns for scatter
    let mut w = vec![0.0f64; n * bb];
    let mut wpos: Vec<usize> = vec![usize::MAX; n];

    // scatter original blocks: A(new_i, new_j)
    // build per (new_col) lists of original blocks

    let mut a_cols: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n]; // new_j -> (new_i, blk idx)
    for r in 0..n {
        for idx in a.row_ptr[r]..a.row_ptr[r + 1] {
            let c = a.col_idx[idx];
            a_cols[iperm[c]].push((iperm[r], idx));
        }
    }

    let scale = a
        .blocks
        .iter()
        .fold(0.0f64, |m, &v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let mut min_pivot = f64::INFINITY;

    for j in 0..n {
        // pattern of column j: rows_above = row_pat[j], diag j, rows_below = col entries
        let below = &row_idx[col_ptr[j]..col_ptr[j + 1]];
        // activate workspace
        for &i in row_pat[j].iter().chain(std::iter::once(&j)).chain(below.iter()) {
            wpos[i] = 1;
            w[i * bb..(i + 1) * bb].fill(0.0);
        }
        for &(i, idx) in &a_cols[j] {
            debug_assert!(wpos[i] != usize::MAX, "A entry outside symbolic pattern");
            let src = &a.blocks[idx * bb..(idx + 1) * bb];
            let dst = &mut w[i * bb..(i + 1) * bb];
            for t in 0..bb {
                dst[t] += src[t];
            }
        }
        // forward eliminate with columns x in rows_above (ascending); every
        // update row lies inside the column-j pattern by the fill rule.
        let mut ux = vec![0.0; bb];
        for &x in &row_pat[j] {
            // W[x] is final U(x, j)
            ux.copy_from_slice(&w[x * bb..(x + 1) * bb]);
            let col = &row_idx[col_ptr[x]..col_ptr[x + 1]];
            let p = col.binary_search(&j).expect("pattern mismatch") + col_ptr[x];
            u_blocks[p * bb..(p + 1) * bb].copy_from_slice(&ux);
            // W[i] -= L(i,x) * U(x,j) for all i > x in column x
            for q in col_ptr[x]..col_ptr[x + 1] {
                let i = row_idx[q];
                let lblk = &l_blocks[q * bb..(q + 1) * bb];
                let dst = &mut w[i * bb..(i + 1) * bb];
                for r in 0..b {
                    for k in 0..b {
                        let lv = lblk[r * b + k];
                        if lv == 0.0 {
                            continue;
                        }
                        for c in 0..b {
                            dst[r * b + c] -= lv * ux[k * b + c];
                        }
                    }
                }
            }
        }
        // factor the diagonal block
        let fd = DMat {
            rows: b,
            cols: b,
            data: w[j * bb..(j + 1) * bb].to_vec(),
        };
        let flu = LuFactors::factor(&fd).ok_or(Error::SingularPivot {
            block: j,
            element: perm[j],
            pivot: fd.max_abs() / scale,
        })?;
        min_pivot = min_pivot.min(flu.min_pivot * fd.max_abs() / scale);
        // L(i, j) = W[i] * F^{-1}
        let finv = fd.inverse().ok_or(Error::SingularPivot {
            block: j,
            element: perm[j],
            pivot: fd.max_abs() / scale,
        })?;
        for q in col_ptr[j]..col_ptr[j + 1] {
            let i = row_idx[q];
            let wi = &w[i * bb..(i + 1) * bb];
            let dst = &mut l_blocks[q * bb..(q + 1) * bb];
            for r in 0..b {
                for c in 0..b {
                    let mut acc = 0.0;
                    for k in 0..b {
                        acc += wi[r * b + k] * finv.data[k * b + c];
                    }
                    dst[r * b + c] = acc;
                }
            }
        }
        diag[j] = Some(flu);
        // clear workspace flags
        for &i in row_pat[j].iter().chain(std::iter::once(&j)).chain(below.iter()) {
            wpos[i] = usize::MAX;
        }
    }

    Ok(Factorization {
        n_blocks: n,
        b,
        perm,
        col_ptr,
        row_idx,
        l_blocks,
        u_blocks,
        diag: diag.into_iter().map(|d| d.unwrap()).collect(),
        fill_blocks: nnz,
        min_pivot,
    })
}

impl Factorization {
    /// Solve A x = rhs, reusing the stored factors.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, Error> {
        if rhs.len() != self.n_blocks * self.b {
            return Err(Error::DimensionMismatch {
                expected: self.n_blocks * self.b,
                got: rhs.len(),
            });
        }
        let mut x = rhs.to_vec();
        self.solve_in_place_many(&mut [&mut x]);
        Ok(x)
    }

    /// Solve for several right-hand sides in one sweep over the factors.
    pub fn solve_in_place_many(&self, xs: &mut [&mut [f64]]) {
        let b = self.b;
        let bb = b * b;
        let n = self.n_blocks;
        let nrhs = xs.len();
        // permute in
        let mut zs: Vec<Vec<f64>> = (0..nrhs).map(|_| vec![0.0; n * b]).collect();
        for (k, x) in xs.iter().enumerate() {
            for j in 0..n {
                let src = self.perm[j];
                zs[k][j * b..(j + 1) * b].copy_from_slice(&x[src * b..(src + 1) * b]);
            }
        }
        // forward: L z = z (unit block diagonal)
        for j in 0..n {
            for k in 0..nrhs {
                let (head, tail) = zs[k].split_at_mut((j + 1) * b);
                let zj = &head[j * b..];
                for q in self.col_ptr[j]..self.col_ptr[j + 1] {
                    let i = self.row_idx[q];
                    let blk = &self.l_blocks[q * bb..(q + 1) * bb];
                    let dst = &mut tail[(i - j - 1) * b..(i - j) * b];
                    block_gemv_sub(b, blk, zj, dst);
                }
            }
        }
        // backward: U x = z, U(j,j) = diag factor
        for j in (0..n).rev() {
            for k in 0..nrhs {
                let (head, tail) = zs[k].split_at_mut((j + 1) * b);
                let zj = &mut head[j * b..];
                for q in self.col_ptr[j]..self.col_ptr[j + 1] {
                    let i = self.row_idx[q];
                    let blk = &self.u_blocks[q * bb..(q + 1) * bb];
                    block_gemv_sub(b, blk, &tail[(i - j - 1) * b..(i - j) * b], zj);
                }
                self.diag[j].solve_in_place(zj);
            }
        }
        // permute out
        for (k, x) in xs.iter_mut().enumerate() {
            for j in 0..n {
                let dst = self.perm[j];
                x[dst * b..(dst + 1) * b].copy_from_slice(&zs[k][j * b..(j + 1) * b]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_of(a: &BlockMat) -> DMat {
        let n = a.n();
        let b = a.b;
        let mut d = DMat::zeros(n, n);
        for r in 0..a.n_blocks {
            for idx in a.row_ptr[r]..a.row_ptr[r + 1] {
                let c = a.col_idx[idx];
                let blk = a.block(idx);
                for i in 0..b {
                    for j in 0..b {
                        d.set(r * b + i, c * b + j, d.get(r * b + i, c * b + j) + blk[i * b + j]);
                    }
                }
            }
        }
        d
    }

    #[test]
    fn assemble_identity_block() {
        let mut asm = BlockAssembler::new(2, 2);
        asm.push(0, 0, &[1.0, 0.0, 0.0, 1.0]);
        let a = asm.finalize();
        assert_eq!(a.nnz_blocks(), 1);
        let mut y = vec![0.0; 4];
        a.apply(&[3.0, 4.0, 5.0, 6.0], &mut y);
        assert_eq!(y, vec![3.0, 4.0, 0.0, 0.0]);
    }

    #[test]
    fn duplicate_contributions_summed() {
        let mut asm = BlockAssembler::new(1, 2);
        asm.push(0, 0, &[1.0, 2.0, 3.0, 4.0]);
        asm.push(0, 0, &[10.0, 20.0, 30.0, 40.0]);
        let a = asm.finalize();
        assert_eq!(a.nnz_blocks(), 1);
        assert_eq!(a.block(0), &[11.0, 22.0, 33.0, 44.0]);
    }

    #[test]
    fn deterministic_order_of_entries() {
        let mut asm1 = BlockAssembler::new(3, 1);
        asm1.push(0, 2, &[1.0]);
        asm1.push(0, 1, &[2.0]);
        asm1.push(2, 0, &[3.0]);
        let a1 = asm1.finalize();
        let mut asm2 = BlockAssembler::new(3, 1);
        asm2.push(2, 0, &[3.0]);
        asm2.push(0, 1, &[2.0]);
        asm2.push(0, 2, &[1.0]);
        let a2 = asm2.finalize();
        assert_eq!(a1.col_idx, a2.col_idx);
        assert_eq!(a1.blocks, a2.blocks);
    }

    #[test]
    fn factor_diagonal_matrix() {
        let mut asm = BlockAssembler::new(3, 2);
        for e in 0..3 {
            asm.push(e, e, &[2.0, 0.0, 0.0, 2.0]);
        }
        let a = asm.finalize();
        let f = factorize(&a).unwrap();
        let rhs = vec![2.0, 4.0, 6.0, 8.0, 10.0, 12.0];
        let x = f.solve(&rhs).unwrap();
        for (xi, ri) in x.iter().zip(&rhs) {
            assert!((xi - ri / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn two_by_two_hand_checkable() {
        // [[2,1],[1,2]] as scalar blocks; solve([3,3]) = [1,1]
        let mut asm = BlockAssembler::new(2, 1);
        asm.push(0, 0, &[2.0]);
        asm.push(0, 1, &[1.0]);
        asm.push(1, 0, &[1.0]);
        asm.push(1, 1, &[2.0]);
        let a = asm.finalize();
        let f = factorize(&a).unwrap();
        let x = f.solve(&[3.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_sparse_system_residual_and_linearity() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let n = 60;
        let b = 3;
        // ring + random couplings, diagonally dominant
        let mut asm = BlockAssembler::new(n, b);
        let mut diag_boost = vec![0.0; n];
        let mut offs: Vec<(usize, usize)> = Vec::new();
        for i in 0..n {
            offs.push((i, (i + 1) % n));
            offs.push(((i + 1) % n, i));
        }
        for _ in 0..40 {
            let i = rng.gen_range(0..n);
            let j = rng.gen_range(0..n);
            if i != j {
                offs.push((i, j));
                offs.push((j, i));
            }
        }
        for &(i, j) in &offs {
            let mut blk = vec![0.0; b * b];
            for v in blk.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            diag_boost[i] += blk.iter().map(|v: &f64| v.abs()).sum::<f64>();
            asm.push(i, j, &blk);
        }
        for i in 0..n {
            let mut d = vec![0.0; b * b];
            for r in 0..b {
                d[r * b + r] = diag_boost[i] + 1.0 + rng.gen_range(0.0..1.0);
            }
            asm.push(i, i, &d);
        }
        let a = asm.finalize();
        let f = factorize(&a).unwrap();
        // residual check over repeated solves with the same factorization
        for trial in 0..100 {
            let rhs: Vec<f64> = (0..n * b).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = f.solve(&rhs).unwrap();
            let r = Factorization::residual(&a, &x, &rhs);
            assert!(r < 1e-10, "trial {trial}: residual {r}");
        }
        // rhs = A e_j -> x = e_j
        let mut ej = vec![0.0; n * b];
        ej[17] = 1.0;
        let mut rhs = vec![0.0; n * b];
        a.apply(&ej, &mut rhs);
        let x = f.solve(&rhs).unwrap();
        for i in 0..n * b {
            assert!((x[i] - ej[i]).abs() < 1e-10);
        }
        // zero rhs -> zero
        let x0 = f.solve(&vec![0.0; n * b]).unwrap();
        assert!(x0.iter().all(|&v| v == 0.0));
        // linearity
        let u: Vec<f64> = (0..n * b).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n * b).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (al, be) = (1.7, -0.3);
        let xu = f.solve(&u).unwrap();
        let xv = f.solve(&v).unwrap();
        let uv: Vec<f64> = u.iter().zip(&v).map(|(a, b)| al * a + be * b).collect();
        let xuv = f.solve(&uv).unwrap();
        let norm = xuv.iter().fold(0.0f64, |m, &t| m.max(t.abs())).max(1.0);
        for i in 0..n * b {
            assert!(((al * xu[i] + be * xv[i] - xuv[i]) / norm).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_matrix_reports_pivot() {
        let mut asm = BlockAssembler::new(2, 2);
        asm.push(0, 0, &[1.0, 0.0, 0.0, 1.0]);
        asm.push(1, 1, &[0.0, 0.0, 0.0, 0.0]);
        let a = asm.finalize();
        match factorize(&a) {
            Err(Error::SingularPivot { element, .. }) => assert_eq!(element, 1),
            other => panic!("expected singular pivot, got {other:?}"),
        }
    }

    #[test]
    fn matmul_matches_dense() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 8;
        let b = 2;
        let mut asm1 = BlockAssembler::new(n, b);
        let mut asm2 = BlockAssembler::new(n, b);
        for i in 0..n {
            for j in 0..n {
                if rng.gen_bool(0.3) {
                    let blk: Vec<f64> = (0..b * b).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    asm1.push(i, j, &blk);
                }
                if rng.gen_bool(0.3) {
                    let blk: Vec<f64> = (0..b * b).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    asm2.push(i, j, &blk);
                }
            }
        }
        let a = asm1.finalize();
        let c = asm2.finalize();
        let prod = a.matmul(&c);
        let dense = dense_of(&a).matmul(&dense_of(&c));
        let dp = dense_of(&prod);
        for i in 0..n * b {
            for j in 0..n * b {
                assert!((dense.get(i, j) - dp.get(i, j)).abs() < 1e-12);
            }
        }
    }
}
