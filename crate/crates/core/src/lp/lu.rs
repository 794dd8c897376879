//! Sparse LU factorisation of simplex bases with a product-form eta file.
//!
//! Pivots are chosen by a Markowitz search over the sparsest active columns
//! with a relative threshold test. `L` is kept as a sequence of column etas,
//! `U` row-wise in pivot order.

/// Relative threshold for accepting a pivot inside its column.
const THRESHOLD: f64 = 0.01;
/// Columns examined per pivot search once a candidate exists.
const SEARCH_COLUMNS: usize = 4;
/// Entries below this magnitude are treated as zero during elimination.
const DROP_TOL: f64 = 1e-14;
/// A column whose largest remaining entry is below this is singular.
const SINGULAR_TOL: f64 = 1e-11;

/// Positions/rows left unpivoted by a rank-deficient basis.
#[derive(Debug, Clone)]
pub(crate) struct Singular {
    pub positions: Vec<usize>,
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct LuFactors {
    m: usize,
    piv_row: Vec<usize>,
    piv_pos: Vec<usize>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_diag: Vec<f64>,
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
}

/// Doubly linked buckets of columns keyed by active count.
struct Buckets {
    head: Vec<usize>,
    next: Vec<usize>,
    prev: Vec<usize>,
    key: Vec<usize>,
}

const NIL: usize = usize::MAX;

impl Buckets {
    fn new(m: usize) -> Self {
        Buckets { head: vec![NIL; m + 2], next: vec![NIL; m], prev: vec![NIL; m], key: vec![NIL; m] }
    }

    fn insert(&mut self, j: usize, k: usize) {
        let k = k.min(self.head.len() - 1);
        self.key[j] = k;
        self.prev[j] = NIL;
        self.next[j] = self.head[k];
        if self.head[k] != NIL {
            self.prev[self.head[k]] = j;
        }
        self.head[k] = j;
    }

    fn remove(&mut self, j: usize) {
        let k = self.key[j];
        if k == NIL {
            return;
        }
        if self.prev[j] != NIL {
            self.next[self.prev[j]] = self.next[j];
        } else {
            self.head[k] = self.next[j];
        }
        if self.next[j] != NIL {
            self.prev[self.next[j]] = self.prev[j];
        }
        self.key[j] = NIL;
    }

    fn update(&mut self, j: usize, k: usize) {
        self.remove(j);
        self.insert(j, k);
    }
}

impl LuFactors {
    /// Factorises the `m × m` matrix whose column `k` is `columns[k]`
    /// (row index, value pairs).
    pub fn factorize(m: usize, columns: &[Vec<(usize, f64)>]) -> Result<Self, Singular> {
        debug_assert_eq!(columns.len(), m);
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        let mut col_rows: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (k, col) in columns.iter().enumerate() {
            for &(i, v) in col {
                if v != 0.0 {
                    rows[i].push((k, v));
                    col_rows[k].push(i);
                }
            }
        }
        let mut col_count: Vec<usize> = col_rows.iter().map(Vec::len).collect();
        let mut row_done = vec![false; m];
        let mut col_done = vec![false; m];
        let mut buckets = Buckets::new(m);
        for j in 0..m {
            buckets.insert(j, col_count[j]);
        }

        let mut f = LuFactors {
            m,
            piv_row: Vec::with_capacity(m),
            piv_pos: Vec::with_capacity(m),
            l_start: vec![0],
            l_idx: Vec::new(),
            l_val: Vec::new(),
            u_diag: Vec::with_capacity(m),
            u_start: vec![0],
            u_idx: Vec::new(),
            u_val: Vec::new(),
        };
        let mut singular_cols = Vec::new();
        let mut pos = vec![NIL; m];
        let mut pivot_row_buf: Vec<(usize, f64)> = Vec::new();

        let mut remaining = m;
        while remaining > 0 {
            // Empty columns are structurally singular.
            while buckets.head[0] != NIL {
                let j = buckets.head[0];
                buckets.remove(j);
                col_done[j] = true;
                singular_cols.push(j);
                remaining -= 1;
            }
            if remaining == 0 {
                break;
            }

            // Markowitz search.
            let mut best: Option<(usize, usize, f64, usize)> = None; // (row, col, val, cost)
            let mut examined = 0;
            let mut numerically_singular = None;
            'outer: for count in 1..buckets.head.len() {
                let mut j = buckets.head[count];
                while j != NIL {
                    let nxt = buckets.next[j];
                    let mut col_max = 0.0f64;
                    let mut entries: Vec<(usize, f64)> = Vec::with_capacity(col_count[j]);
                    for &i in &col_rows[j] {
                        if row_done[i] {
                            continue;
                        }
                        if let Some(&(_, v)) = rows[i].iter().find(|e| e.0 == j) {
                            col_max = col_max.max(v.abs());
                            entries.push((i, v));
                        }
                    }
                    if col_max < SINGULAR_TOL {
                        numerically_singular = Some(j);
                        break 'outer;
                    }
                    for &(i, v) in &entries {
                        if v.abs() >= THRESHOLD * col_max {
                            let cost = (rows[i].len() - 1) * (count - 1);
                            let better = match best {
                                None => true,
                                Some((_, _, bv, bc)) => cost < bc || (cost == bc && v.abs() > bv.abs()),
                            };
                            if better {
                                best = Some((i, j, v, cost));
                            }
                        }
                    }
                    examined += 1;
                    if let Some((_, _, _, c)) = best {
                        if c == 0 || examined >= SEARCH_COLUMNS {
                            break 'outer;
                        }
                    }
                    j = nxt;
                }
            }

            if let Some(j) = numerically_singular {
                buckets.remove(j);
                col_done[j] = true;
                singular_cols.push(j);
                remaining -= 1;
                for idx in 0..col_rows[j].len() {
                    let i = col_rows[j][idx];
                    if !row_done[i] {
                        rows[i].retain(|e| e.0 != j);
                    }
                }
                continue;
            }
            let Some((p, q, pv, _)) = best else {
                break;
            };

            // Pivot row goes to U.
            pivot_row_buf.clear();
            for &(j, v) in &rows[p] {
                if j != q && !col_done[j] {
                    pivot_row_buf.push((j, v));
                }
            }
            f.piv_row.push(p);
            f.piv_pos.push(q);
            f.u_diag.push(pv);
            for &(j, v) in &pivot_row_buf {
                f.u_idx.push(j);
                f.u_val.push(v);
            }
            f.u_start.push(f.u_idx.len());
            row_done[p] = true;
            col_done[q] = true;
            buckets.remove(q);
            remaining -= 1;

            for &(j, _) in &pivot_row_buf {
                col_count[j] -= 1;
            }

            // Eliminate column q from the other active rows.
            let col_q = std::mem::take(&mut col_rows[q]);
            for &i in &col_q {
                if row_done[i] {
                    continue;
                }
                let Some(at) = rows[i].iter().position(|e| e.0 == q) else {
                    continue;
                };
                let a_iq = rows[i].swap_remove(at).1;
                let l = a_iq / pv;
                f.l_idx.push(i);
                f.l_val.push(l);
                if pivot_row_buf.is_empty() {
                    continue;
                }
                for (k, &(j, _)) in rows[i].iter().enumerate() {
                    pos[j] = k;
                }
                for &(j, u) in &pivot_row_buf {
                    if pos[j] != NIL {
                        rows[i][pos[j]].1 -= l * u;
                    } else {
                        let v = -l * u;
                        if v.abs() > DROP_TOL {
                            rows[i].push((j, v));
                            col_rows[j].push(i);
                            col_count[j] += 1;
                        }
                    }
                }
                for &(j, _) in rows[i].iter() {
                    pos[j] = NIL;
                }
            }
            f.l_start.push(f.l_idx.len());
            for &(j, _) in &pivot_row_buf {
                buckets.update(j, col_count[j]);
                // Keep column patterns compact.
                if col_rows[j].len() > 2 * col_count[j] + 8 {
                    col_rows[j].retain(|&i| !row_done[i]);
                }
            }
        }

        if singular_cols.is_empty() {
            Ok(f)
        } else {
            let rows_left: Vec<usize> = (0..m).filter(|&i| !row_done[i]).collect();
            Err(Singular { positions: singular_cols, rows: rows_left })
        }
    }

    /// Solves `B x = a` in place: `a` is indexed by row on entry and by basis
    /// position on exit.
    pub fn ftran(&self, a: &mut [f64], work: &mut [f64]) {
        for k in 0..self.piv_row.len() {
            let vp = a[self.piv_row[k]];
            if vp != 0.0 {
                for e in self.l_start[k]..self.l_start[k + 1] {
                    a[self.l_idx[e]] -= self.l_val[e] * vp;
                }
            }
        }
        // Back substitution; work is indexed by position.
        for k in (0..self.piv_row.len()).rev() {
            let mut v = a[self.piv_row[k]];
            for e in self.u_start[k]..self.u_start[k + 1] {
                v -= self.u_val[e] * work[self.u_idx[e]];
            }
            work[self.piv_pos[k]] = v / self.u_diag[k];
        }
        a[..self.m].copy_from_slice(&work[..self.m]);
    }

    /// Solves `Bᵀ y = c` in place: `c` is indexed by basis position on entry
    /// and by row on exit.
    pub fn btran(&self, c: &mut [f64], work: &mut [f64]) {
        for k in 0..self.piv_row.len() {
            let z = c[self.piv_pos[k]] / self.u_diag[k];
            if z != 0.0 {
                for e in self.u_start[k]..self.u_start[k + 1] {
                    c[self.u_idx[e]] -= self.u_val[e] * z;
                }
            }
            work[self.piv_row[k]] = z;
        }
        for k in (0..self.piv_row.len()).rev() {
            let p = self.piv_row[k];
            let mut v = work[p];
            for e in self.l_start[k]..self.l_start[k + 1] {
                v -= self.l_val[e] * work[self.l_idx[e]];
            }
            work[p] = v;
        }
        c[..self.m].copy_from_slice(&work[..self.m]);
    }

    pub fn nnz(&self) -> usize {
        self.l_idx.len() + self.u_idx.len() + self.m
    }
}

/// One product-form update: column `pos` of the basis replaced.
#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    pivot: f64,
    idx: Vec<usize>,
    val: Vec<f64>,
}

/// LU factors plus the etas accumulated since the last refactorisation.
#[derive(Debug, Clone)]
pub(crate) struct BasisFactor {
    lu: LuFactors,
    etas: Vec<Eta>,
    eta_nnz: usize,
    work: Vec<f64>,
}

impl BasisFactor {
    pub fn new(m: usize, columns: &[Vec<(usize, f64)>]) -> Result<Self, Singular> {
        let lu = LuFactors::factorize(m, columns)?;
        Ok(BasisFactor { lu, etas: Vec::new(), eta_nnz: 0, work: vec![0.0; m] })
    }

    pub fn num_updates(&self) -> usize {
        self.etas.len()
    }

    pub fn fill(&self) -> usize {
        self.lu.nnz() + self.eta_nnz
    }

    pub fn ftran(&mut self, a: &mut [f64]) {
        self.lu.ftran(a, &mut self.work);
        for eta in &self.etas {
            let xr = a[eta.pos] / eta.pivot;
            if xr != 0.0 {
                for (&i, &v) in eta.idx.iter().zip(&eta.val) {
                    a[i] -= v * xr;
                }
            }
            a[eta.pos] = xr;
        }
    }

    pub fn btran(&mut self, c: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let mut v = c[eta.pos];
            for (&i, &a) in eta.idx.iter().zip(&eta.val) {
                v -= a * c[i];
            }
            c[eta.pos] = v / eta.pivot;
        }
        self.lu.btran(c, &mut self.work);
    }

    /// Records that basis position `pos` now holds a column whose FTRAN
    /// image is `alpha`.
    pub fn update(&mut self, pos: usize, alpha: &[f64]) {
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for (i, &v) in alpha.iter().enumerate() {
            if i != pos && v.abs() > DROP_TOL {
                idx.push(i);
                val.push(v);
            }
        }
        self.eta_nnz += idx.len() + 1;
        self.etas.push(Eta { pos, pivot: alpha[pos], idx, val });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_mul(cols: &[Vec<(usize, f64)>], x: &[f64], m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        for (k, col) in cols.iter().enumerate() {
            for &(i, v) in col {
                out[i] += v * x[k];
            }
        }
        out
    }

    fn random_matrix(m: usize, seed: u64) -> Vec<Vec<(usize, f64)>> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..m)
            .map(|k| {
                let mut col = vec![(k, 1.0 + rng.random::<f64>())];
                for i in 0..m {
                    if i != k && rng.random::<f64>() < 0.3 {
                        col.push((i, rng.random::<f64>() * 2.0 - 1.0));
                    }
                }
                col
            })
            .collect()
    }

    #[test]
    fn ftran_btran_solve_random_systems() {
        for seed in 0..20 {
            let m = 12;
            let cols = random_matrix(m, seed);
            let mut bf = BasisFactor::new(m, &cols).unwrap();
            let x: Vec<f64> = (0..m).map(|i| i as f64 - 3.5).collect();
            let mut b = dense_mul(&cols, &x, m);
            bf.ftran(&mut b);
            for i in 0..m {
                assert!((b[i] - x[i]).abs() < 1e-9, "ftran seed {seed}");
            }
            // Bᵀy = c  ⇔  column k of B dotted with y equals c_k.
            let y: Vec<f64> = (0..m).map(|i| (i as f64).sin()).collect();
            let mut c: Vec<f64> = cols.iter().map(|col| col.iter().map(|&(i, v)| v * y[i]).sum()).collect();
            bf.btran(&mut c);
            for i in 0..m {
                assert!((c[i] - y[i]).abs() < 1e-9, "btran seed {seed}");
            }
        }
    }

    #[test]
    fn eta_updates_match_refactorization() {
        let m = 10;
        let mut cols = random_matrix(m, 99);
        let mut bf = BasisFactor::new(m, &cols).unwrap();
        let replacement = random_matrix(m, 7);
        for (step, pos) in [3usize, 7, 0, 3].into_iter().enumerate() {
            let newcol = replacement[step].clone();
            let mut alpha = vec![0.0; m];
            for &(i, v) in &newcol {
                alpha[i] = v;
            }
            bf.ftran(&mut alpha);
            bf.update(pos, &alpha);
            cols[pos] = newcol;
        }
        let x: Vec<f64> = (0..m).map(|i| 1.0 / (i as f64 + 1.0)).collect();
        let mut b = dense_mul(&cols, &x, m);
        bf.ftran(&mut b);
        for i in 0..m {
            assert!((b[i] - x[i]).abs() < 1e-8);
        }
        let y: Vec<f64> = (0..m).map(|i| i as f64 * 0.25 - 1.0).collect();
        let mut c: Vec<f64> = cols.iter().map(|col| col.iter().map(|&(i, v)| v * y[i]).sum()).collect();
        bf.btran(&mut c);
        for i in 0..m {
            assert!((c[i] - y[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn singular_basis_reports_positions() {
        // Column 2 duplicates column 0.
        let cols = vec![vec![(0, 1.0), (1, 2.0)], vec![(2, 1.0)], vec![(0, 1.0), (1, 2.0)]];
        let err = LuFactors::factorize(3, &cols).unwrap_err();
        assert_eq!(err.positions.len(), 1);
        assert_eq!(err.rows.len(), 1);
    }
}
