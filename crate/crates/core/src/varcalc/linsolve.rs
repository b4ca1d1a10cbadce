use nalgebra::{DMatrix, DVector};

/// Row-major sparse matrix; duplicate column entries within a row add up.
#[derive(Debug, Clone, Default)]
pub struct SparseRows {
    pub n_cols: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    pub fn new(n_cols: usize) -> Self {
        Self {
            n_cols,
            rows: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn push_dense(&mut self, dense: &[f64]) {
        self.rows.push(
            dense
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(j, v)| (j, *v))
                .collect(),
        );
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|(j, v)| v * x[*j]).sum())
            .collect()
    }

    pub fn mul_transpose(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cols];
        for (r, yi) in self.rows.iter().zip(y) {
            for (j, v) in r {
                out[*j] += v * yi;
            }
        }
        out
    }

    /// `sum_j |J_ij x_j|` per row.
    pub fn abs_mul(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|(j, v)| (v * x[*j]).abs()).sum())
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_rows(), self.n_cols);
        for (i, r) in self.rows.iter().enumerate() {
            for (j, v) in r {
                m[(i, *j)] += v;
            }
        }
        m
    }
}

fn finite(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Square solve by dense LU.
pub fn dense_solve(j: &SparseRows, rhs: &[f64]) -> Option<Vec<f64>> {
    if j.n_rows() != j.n_cols {
        return None;
    }
    let lu = j.to_dense().lu();
    let x = lu.solve(&DVector::from_column_slice(rhs))?;
    finite(&x).then(|| x.as_slice().to_vec())
}

/// Minimum-norm least-squares solve.
pub fn least_squares(j: &SparseRows, rhs: &[f64]) -> Option<Vec<f64>> {
    let svd = j.to_dense().svd(true, true);
    let x = svd.solve(&DVector::from_column_slice(rhs), 1e-13).ok()?;
    finite(&x).then(|| x.as_slice().to_vec())
}

/// Column/row partition for [`bordered_solve`].
///
/// Each band column is paired with a pivot row whose other band entries all
/// lie in earlier band columns, so the band block is lower triangular. The
/// remaining rows and border columns form a small square Schur system.
#[derive(Debug, Clone, Default)]
pub struct BandStructure {
    pub band_cols: Vec<usize>,
    pub pivot_rows: Vec<usize>,
    pub border_cols: Vec<usize>,
    pub other_rows: Vec<usize>,
}

enum Slot {
    Band(usize),
    Border(usize),
}

pub fn bordered_solve(j: &SparseRows, rhs: &[f64], s: &BandStructure) -> Option<Vec<f64>> {
    let n = j.n_cols;
    let nb = s.band_cols.len();
    let nbd = s.border_cols.len();
    if s.pivot_rows.len() != nb || s.other_rows.len() != nbd || nb + nbd != n {
        return None;
    }
    let mut slot: Vec<Option<Slot>> = (0..n).map(|_| None).collect();
    for (i, c) in s.band_cols.iter().enumerate() {
        slot[*c] = Some(Slot::Band(i));
    }
    for (i, c) in s.border_cols.iter().enumerate() {
        slot[*c] = Some(Slot::Border(i));
    }
    let width = 1 + nbd;
    // x[i * width + 0] solves the rhs, x[i * width + 1 + b] the border column b.
    let mut x = vec![0.0; nb * width];
    let mut acc = vec![0.0; width];
    for i in 0..nb {
        let row = &j.rows[s.pivot_rows[i]];
        acc.iter_mut().for_each(|v| *v = 0.0);
        acc[0] = rhs[s.pivot_rows[i]];
        let mut diag = 0.0;
        for (c, v) in row {
            match slot[*c].as_ref()? {
                Slot::Band(k) if *k == i => diag += v,
                Slot::Band(k) if *k < i => {
                    let xk = &x[k * width..(k + 1) * width];
                    for (a, xv) in acc.iter_mut().zip(xk) {
                        *a -= v * xv;
                    }
                }
                Slot::Band(_) => return None,
                Slot::Border(b) => acc[1 + b] += v,
            }
        }
        if !(diag.abs() > 1e-300) {
            return None;
        }
        for (dst, a) in x[i * width..(i + 1) * width].iter_mut().zip(&acc) {
            *dst = a / diag;
        }
    }
    // Border entries: band x = x0 - X_B * border.
    let mut schur = DMatrix::zeros(nbd, nbd);
    let mut t = DVector::zeros(nbd);
    for (r, row_idx) in s.other_rows.iter().enumerate() {
        t[r] = rhs[*row_idx];
        for (c, v) in &j.rows[*row_idx] {
            match slot[*c].as_ref()? {
                Slot::Band(k) => {
                    let xk = &x[k * width..(k + 1) * width];
                    t[r] -= v * xk[0];
                    for b in 0..nbd {
                        schur[(r, b)] -= v * xk[1 + b];
                    }
                }
                Slot::Border(b) => schur[(r, *b)] += v,
            }
        }
    }
    let border = schur.lu().solve(&t)?;
    if !finite(&border) {
        return None;
    }
    let mut out = vec![0.0; n];
    for (b, c) in s.border_cols.iter().enumerate() {
        out[*c] = border[b];
    }
    for (i, c) in s.band_cols.iter().enumerate() {
        let xi = &x[i * width..(i + 1) * width];
        let mut v = xi[0];
        for b in 0..nbd {
            v -= xi[1 + b] * border[b];
        }
        out[*c] = v;
    }
    // Forward substitution can amplify rounding; reject inaccurate solves.
    let r = j.mul(&out);
    let scale = rhs.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
        + j.abs_mul(&out).iter().fold(0.0_f64, |m, v| m.max(*v));
    let err = r
        .iter()
        .zip(rhs)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    (err <= 1e-8 * scale.max(f64::MIN_POSITIVE) && out.iter().all(|v| v.is_finite())).then_some(out)
}
