//! Dense row-major matrices and row normalization with its backward pass.

/// Norms below this are treated as the zero vector.
pub const NORM_FLOOR: f64 = 1e-12;

/// Row-major dense matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Self { rows, cols, data }
    }

    /// Builds a matrix from equally sized rows. An empty slice gives a `0 x cols` matrix.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], cols: usize) -> Self {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    /// Copies the selected rows, in order.
    pub fn gather(&self, idx: &[usize]) -> Mat {
        let mut out = Mat::zeros(idx.len(), self.cols);
        for (o, &i) in idx.iter().enumerate() {
            out.row_mut(o).copy_from_slice(self.row(i));
        }
        out
    }

    /// Adds `other`'s rows into the rows named by `idx`.
    pub fn scatter_add(&mut self, idx: &[usize], other: &Mat) {
        debug_assert_eq!(idx.len(), other.rows);
        for (o, &i) in idx.iter().enumerate() {
            axpy(1.0, other.row(o), self.row_mut(i));
        }
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, alpha: f64, other: &Mat) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        axpy(alpha, &other.data, &mut self.data);
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|x| *x *= alpha);
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Max-shifted log-sum-exp. Returns `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// In-place softmax with max subtraction.
pub fn softmax_in_place(xs: &mut [f64]) {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - m).exp();
        s += *x;
    }
    for x in xs.iter_mut() {
        *x /= s;
    }
}

/// Rows scaled to unit length, remembering what is needed to backpropagate.
#[derive(Clone, Debug)]
pub struct UnitRows {
    pub unit: Mat,
    norms: Vec<f64>,
    /// Rows whose norm fell below [`NORM_FLOOR`]; they were replaced by `e_0`.
    pub degenerate: Vec<usize>,
}

pub fn normalize_rows(m: &Mat) -> UnitRows {
    let mut unit = m.clone();
    let mut norms = Vec::with_capacity(m.rows());
    let mut degenerate = Vec::new();
    for i in 0..m.rows() {
        let row = unit.row_mut(i);
        let n = norm(row);
        if n < NORM_FLOOR || !n.is_finite() {
            row.fill(0.0);
            if let Some(first) = row.first_mut() {
                *first = 1.0;
            }
            degenerate.push(i);
            norms.push(0.0);
        } else {
            row.iter_mut().for_each(|x| *x /= n);
            norms.push(n);
        }
    }
    UnitRows {
        unit,
        norms,
        degenerate,
    }
}

impl UnitRows {
    /// Maps a gradient w.r.t. the unit rows to the raw rows through
    /// `(I - u u^T) / |z|`. Degenerate rows get a zero gradient.
    pub fn backward(&self, d_unit: &Mat) -> Mat {
        let mut out = Mat::zeros(d_unit.rows(), d_unit.cols());
        for i in 0..d_unit.rows() {
            let n = self.norms[i];
            if n == 0.0 {
                continue;
            }
            let u = self.unit.row(i);
            let g = d_unit.row(i);
            let proj = dot(u, g);
            for ((o, gi), ui) in out.row_mut(i).iter_mut().zip(g).zip(u) {
                *o = (gi - proj * ui) / n;
            }
        }
        out
    }
}

/// Unit-length copy of a single vector, or `None` for a (near) zero vector.
pub fn unit_vector(v: &[f64]) -> Option<Vec<f64>> {
    let n = norm(v);
    (n >= NORM_FLOOR && n.is_finite()).then(|| v.iter().map(|x| x / n).collect())
}

/// Backward of [`unit_vector`]: gradient w.r.t. the raw vector.
pub fn unit_vector_backward(raw: &[f64], d_unit: &[f64]) -> Vec<f64> {
    let n = norm(raw);
    if n < NORM_FLOOR {
        return vec![0.0; raw.len()];
    }
    let proj: f64 = raw.iter().zip(d_unit).map(|(r, g)| r / n * g).sum();
    raw.iter()
        .zip(d_unit)
        .map(|(r, g)| (g - proj * r / n) / n)
        .collect()
}
