//! Sparse LU factorization of a simplex basis with product-form updates.
//!
//! The basis `B` (columns indexed by basis position, rows by constraint row)
//! is factorized by right-looking Gaussian elimination with Markowitz pivot
//! selection and threshold partial pivoting. Column and row singletons are
//! taken first, which makes the triangular bulk of typical LP bases free.
//! After a basis change the factors are not touched; instead an eta column is
//! appended (product form of the inverse) until the next refactorization.

/// Relative threshold for accepting a pivot in its column.
const PIVOT_THRESHOLD: f64 = 0.1;
/// Entries below this magnitude are treated as structural zeros.
const DROP_TOL: f64 = 1e-14;
/// How many minimum-count columns the Markowitz search inspects.
const SEARCH_COLUMNS: usize = 4;

#[derive(Debug, Clone)]
pub struct Singular {
    /// Rows left without a pivot.
    pub rows: Vec<usize>,
    /// Basis positions left without a pivot.
    pub positions: Vec<usize>,
}

#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    pivot: f64,
    idx: Vec<usize>,
    val: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct LuFactors {
    m: usize,
    pivot_row: Vec<usize>,
    pivot_pos: Vec<usize>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_diag: Vec<f64>,
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    etas: Vec<Eta>,
}

/// Scratch structure for the active submatrix during elimination.
struct Active {
    rows: Vec<Vec<(usize, f64)>>,
    cols: Vec<Vec<usize>>,
    row_done: Vec<bool>,
    col_done: Vec<bool>,
    col_buckets: Vec<Vec<usize>>,
    row_buckets: Vec<Vec<usize>>,
}

impl Active {
    fn col_count(&self, c: usize) -> usize {
        self.cols[c].len()
    }

    fn row_count(&self, r: usize) -> usize {
        self.rows[r].len()
    }

    fn push_col(&mut self, c: usize) {
        let k = self.col_count(c);
        if k >= self.col_buckets.len() {
            self.col_buckets.resize(k + 1, Vec::new());
        }
        self.col_buckets[k].push(c);
    }

    fn push_row(&mut self, r: usize) {
        let k = self.row_count(r);
        if k >= self.row_buckets.len() {
            self.row_buckets.resize(k + 1, Vec::new());
        }
        self.row_buckets[k].push(r);
    }

    /// Pops a live column with exactly `k` active entries.
    fn pop_col_with(&mut self, k: usize) -> Option<usize> {
        if k >= self.col_buckets.len() {
            return None;
        }
        let mut stale = Vec::new();
        let mut found = None;
        while let Some(c) = self.col_buckets[k].pop() {
            if self.col_done[c] {
                continue;
            }
            if self.col_count(c) == k {
                found = Some(c);
                break;
            }
            stale.push(c);
        }
        // entries whose count changed without a re-push go to their bucket
        for c in stale {
            self.push_col(c);
        }
        found
    }

    fn pop_row_with(&mut self, k: usize) -> Option<usize> {
        if k >= self.row_buckets.len() {
            return None;
        }
        let mut stale = Vec::new();
        let mut found = None;
        while let Some(r) = self.row_buckets[k].pop() {
            if self.row_done[r] {
                continue;
            }
            if self.row_count(r) == k {
                found = Some(r);
                break;
            }
            stale.push(r);
        }
        for r in stale {
            self.push_row(r);
        }
        found
    }

    fn value(&self, r: usize, c: usize) -> f64 {
        self.rows[r].iter().find(|e| e.0 == c).map_or(0.0, |e| e.1)
    }
}

impl LuFactors {
    /// Factorizes the basis whose column at position `p` has nonzeros
    /// `columns[p]` given as `(row, value)` pairs.
    pub fn factorize(m: usize, columns: &[Vec<(usize, f64)>]) -> Result<LuFactors, Singular> {
        assert_eq!(columns.len(), m);
        let mut act = Active {
            rows: vec![Vec::new(); m],
            cols: vec![Vec::new(); m],
            row_done: vec![false; m],
            col_done: vec![false; m],
            col_buckets: Vec::new(),
            row_buckets: Vec::new(),
        };
        for (p, col) in columns.iter().enumerate() {
            for &(r, v) in col {
                if v.abs() > DROP_TOL {
                    act.rows[r].push((p, v));
                    act.cols[p].push(r);
                }
            }
        }
        for c in 0..m {
            act.push_col(c);
        }
        for r in 0..m {
            act.push_row(r);
        }

        let mut f = LuFactors {
            m,
            pivot_row: Vec::with_capacity(m),
            pivot_pos: Vec::with_capacity(m),
            l_start: vec![0],
            u_start: vec![0],
            ..Default::default()
        };
        let mut mark = vec![usize::MAX; m];

        for _step in 0..m {
            let Some((r, c)) = select_pivot(&mut act) else { break };
            let piv = act.value(r, c);
            // U row
            f.pivot_row.push(r);
            f.pivot_pos.push(c);
            f.u_diag.push(piv);
            let prow = std::mem::take(&mut act.rows[r]);
            for &(j, v) in &prow {
                if j != c {
                    f.u_idx.push(j);
                    f.u_val.push(v);
                }
            }
            f.u_start.push(f.u_idx.len());
            act.row_done[r] = true;
            act.col_done[c] = true;
            // detach pivot row from column patterns
            for &(j, _) in &prow {
                if let Some(k) = act.cols[j].iter().position(|&x| x == r) {
                    act.cols[j].swap_remove(k);
                }
                if j != c && !act.col_done[j] {
                    act.push_col(j);
                }
            }
            // eliminate column c from the remaining rows
            let col_rows = std::mem::take(&mut act.cols[c]);
            for &i in &col_rows {
                let row = &mut act.rows[i];
                let k = row.iter().position(|e| e.0 == c).expect("pattern mismatch");
                let aic = row.swap_remove(k).1;
                let l = aic / piv;
                f.l_idx.push(i);
                f.l_val.push(l);
                if prow.len() > 1 {
                    for (k, &(j, _)) in row.iter().enumerate() {
                        mark[j] = k;
                    }
                    for &(j, v) in &prow {
                        if j == c {
                            continue;
                        }
                        let k = mark[j];
                        if k != usize::MAX && k < row.len() && row[k].0 == j {
                            row[k].1 -= l * v;
                        } else {
                            row.push((j, -l * v));
                            act.cols[j].push(i);
                            if !act.col_done[j] {
                                // count grew; re-bucket lazily
                            }
                        }
                    }
                    for &(j, _) in row.iter() {
                        mark[j] = usize::MAX;
                    }
                    // drop cancellations
                    let before = row.len();
                    let mut removed = Vec::new();
                    row.retain(|e| {
                        let keep = e.1.abs() > DROP_TOL;
                        if !keep {
                            removed.push(e.0);
                        }
                        keep
                    });
                    if row.len() != before {
                        for j in removed {
                            if let Some(k) = act.cols[j].iter().position(|&x| x == i) {
                                act.cols[j].swap_remove(k);
                            }
                        }
                    }
                }
                act.push_row(i);
                for idx in 0..act.rows[i].len() {
                    let j = act.rows[i][idx].0;
                    if !act.col_done[j] {
                        act.push_col(j);
                    }
                }
            }
            f.l_start.push(f.l_idx.len());
        }

        if f.pivot_row.len() < m {
            let rows = (0..m).filter(|&r| !act.row_done[r]).collect();
            let positions = (0..m).filter(|&c| !act.col_done[c]).collect();
            return Err(Singular { rows, positions });
        }
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn num_etas(&self) -> usize {
        self.etas.len()
    }

    pub fn fill(&self) -> usize {
        self.l_idx.len() + self.u_idx.len() + self.m
    }

    /// Solves `B·x = rhs` in place. On entry `rhs` is indexed by row, on
    /// exit by basis position.
    pub fn ftran(&self, rhs: &mut Vec<f64>, work: &mut Vec<f64>) {
        let m = self.m;
        // L
        for k in 0..m {
            let zr = rhs[self.pivot_row[k]];
            if zr != 0.0 {
                for p in self.l_start[k]..self.l_start[k + 1] {
                    rhs[self.l_idx[p]] -= self.l_val[p] * zr;
                }
            }
        }
        // U (back substitution into position space)
        work.clear();
        work.resize(m, 0.0);
        for k in (0..m).rev() {
            let mut s = rhs[self.pivot_row[k]];
            for p in self.u_start[k]..self.u_start[k + 1] {
                s -= self.u_val[p] * work[self.u_idx[p]];
            }
            work[self.pivot_pos[k]] = s / self.u_diag[k];
        }
        std::mem::swap(rhs, work);
        // etas
        for e in &self.etas {
            let xr = rhs[e.pos];
            if xr != 0.0 {
                let xr = xr / e.pivot;
                rhs[e.pos] = xr;
                for (&i, &a) in e.idx.iter().zip(&e.val) {
                    rhs[i] -= a * xr;
                }
            }
        }
    }

    /// Solves `Bᵀ·y = rhs` in place. On entry `rhs` is indexed by basis
    /// position, on exit by row.
    pub fn btran(&self, rhs: &mut Vec<f64>, work: &mut Vec<f64>) {
        let m = self.m;
        for e in self.etas.iter().rev() {
            let mut s = rhs[e.pos];
            for (&i, &a) in e.idx.iter().zip(&e.val) {
                s -= a * rhs[i];
            }
            rhs[e.pos] = s / e.pivot;
        }
        // Uᵀ
        work.clear();
        work.resize(m, 0.0);
        for k in 0..m {
            let g = rhs[self.pivot_pos[k]] / self.u_diag[k];
            work[self.pivot_row[k]] = g;
            if g != 0.0 {
                for p in self.u_start[k]..self.u_start[k + 1] {
                    rhs[self.u_idx[p]] -= self.u_val[p] * g;
                }
            }
        }
        // Lᵀ
        for k in (0..m).rev() {
            let mut s = work[self.pivot_row[k]];
            for p in self.l_start[k]..self.l_start[k + 1] {
                s -= self.l_val[p] * work[self.l_idx[p]];
            }
            work[self.pivot_row[k]] = s;
        }
        std::mem::swap(rhs, work);
    }

    /// Records the replacement of the column at basis position `pos` by a
    /// column whose FTRAN image is `alpha` (position-indexed).
    pub fn update(&mut self, pos: usize, alpha: &[f64]) {
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for (i, &a) in alpha.iter().enumerate() {
            if i != pos && a.abs() > DROP_TOL {
                idx.push(i);
                val.push(a);
            }
        }
        self.etas.push(Eta { pos, pivot: alpha[pos], idx, val });
    }
}

fn select_pivot(act: &mut Active) -> Option<(usize, usize)> {
    // column singleton
    if let Some(c) = act.pop_col_with(1) {
        let r = act.cols[c][0];
        if act.value(r, c).abs() > DROP_TOL {
            return Some((r, c));
        }
    }
    // row singleton, subject to the threshold in its column
    let mut deferred = Vec::new();
    let mut found = None;
    while let Some(r) = act.pop_row_with(1) {
        let (c, v) = act.rows[r][0];
        let colmax = act.cols[c].iter().map(|&i| act.value(i, c).abs()).fold(0.0, f64::max);
        if v.abs() >= PIVOT_THRESHOLD * colmax && v.abs() > DROP_TOL {
            found = Some((r, c));
            break;
        }
        deferred.push(r);
        if deferred.len() > 8 {
            break;
        }
    }
    for r in deferred {
        act.push_row(r);
    }
    if found.is_some() {
        return found;
    }
    // Markowitz search over a few minimum-count columns
    let mut best: Option<(usize, usize, usize)> = None;
    let mut inspected = Vec::new();
    let maxk = act.col_buckets.len();
    'outer: for k in 1..maxk {
        while let Some(c) = act.pop_col_with(k) {
            inspected.push(c);
            let colmax = act.cols[c].iter().map(|&i| act.value(i, c).abs()).fold(0.0, f64::max);
            for &i in &act.cols[c] {
                let v = act.value(i, c).abs();
                if v < PIVOT_THRESHOLD * colmax || v <= DROP_TOL {
                    continue;
                }
                let cost = (act.row_count(i) - 1) * (k - 1);
                if best.map_or(true, |b| cost < b.2) {
                    best = Some((i, c, cost));
                }
            }
            if inspected.len() >= SEARCH_COLUMNS && best.is_some() {
                break 'outer;
            }
        }
    }
    for c in inspected {
        act.push_col(c);
    }
    if best.is_none() {
        // buckets can miss columns whose count shrank; scan everything
        for c in 0..act.cols.len() {
            if act.col_done[c] || act.cols[c].is_empty() {
                continue;
            }
            let k = act.col_count(c);
            let colmax = act.cols[c].iter().map(|&i| act.value(i, c).abs()).fold(0.0, f64::max);
            for &i in &act.cols[c] {
                let v = act.value(i, c).abs();
                if v < PIVOT_THRESHOLD * colmax || v <= DROP_TOL {
                    continue;
                }
                let cost = (act.row_count(i) - 1) * (k - 1);
                if best.map_or(true, |b| cost < b.2) {
                    best = Some((i, c, cost));
                }
            }
        }
    }
    best.map(|(r, c, _)| (r, c))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_cols(a: &[Vec<f64>]) -> Vec<Vec<(usize, f64)>> {
        let m = a.len();
        (0..m)
            .map(|j| (0..m).filter(|&i| a[i][j] != 0.0).map(|i| (i, a[i][j])).collect())
            .collect()
    }

    fn mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter().map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    #[test]
    fn solves_dense_system_both_ways() {
        let a = vec![
            vec![4.0, 1.0, 0.0, 2.0],
            vec![1.0, 3.0, 1.0, 0.0],
            vec![0.0, 1.0, 5.0, 1.0],
            vec![2.0, 0.0, 1.0, 6.0],
        ];
        let f = LuFactors::factorize(4, &dense_cols(&a)).unwrap();
        let b = vec![1.0, 2.0, 3.0, 4.0];
        let mut x = b.clone();
        let mut w = Vec::new();
        f.ftran(&mut x, &mut w);
        let r = mat_vec(&a, &x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-12);
        }
        let mut y = b.clone();
        f.btran(&mut y, &mut w);
        let at: Vec<Vec<f64>> = (0..4).map(|j| (0..4).map(|i| a[i][j]).collect()).collect();
        let r = mat_vec(&at, &y);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn eta_update_matches_refactorization() {
        let mut a = vec![vec![2.0, 0.0, 1.0], vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 3.0]];
        let mut f = LuFactors::factorize(3, &dense_cols(&a)).unwrap();
        let newcol = vec![1.0, 2.0, 1.0];
        let mut alpha = newcol.clone();
        let mut w = Vec::new();
        f.ftran(&mut alpha, &mut w);
        f.update(1, &alpha);
        for i in 0..3 {
            a[i][1] = newcol[i];
        }
        let b = vec![3.0, -1.0, 2.0];
        let mut x = b.clone();
        f.ftran(&mut x, &mut w);
        let r = mat_vec(&a, &x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-12, "{r:?}");
        }
        let mut y = b.clone();
        f.btran(&mut y, &mut w);
        let at: Vec<Vec<f64>> = (0..3).map(|j| (0..3).map(|i| a[i][j]).collect()).collect();
        let r = mat_vec(&at, &y);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_basis_reported() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        let err = LuFactors::factorize(2, &dense_cols(&a)).unwrap_err();
        assert_eq!(err.rows.len(), 1);
        assert_eq!(err.positions.len(), 1);
    }

    #[test]
    fn permuted_identity() {
        let cols = vec![vec![(2, 1.0)], vec![(0, -1.0)], vec![(1, 2.0)]];
        let f = LuFactors::factorize(3, &cols).unwrap();
        let mut x = vec![1.0, 2.0, 3.0];
        let mut w = Vec::new();
        f.ftran(&mut x, &mut w);
        assert_eq!(x, vec![3.0, -1.0, 1.0]);
    }
}
