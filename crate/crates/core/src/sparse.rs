use serde::{Deserialize, Serialize};

/// Compressed-sparse-row square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

/// `(row, col, value)` entry, the persisted form of sparse matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triplet(pub usize, pub usize, pub f64);

impl CsrMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, row_ptr: vec![0; n + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    /// Builds from triplets; entries are sorted row-major and duplicates are
    /// rejected.
    pub fn from_triplets(n: usize, triplets: &[Triplet]) -> Result<Self, String> {
        let mut sorted = triplets.to_vec();
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        for (k, &Triplet(r, c, v)) in sorted.iter().enumerate() {
            if r >= n || c >= n {
                return Err(format!("entry ({r}, {c}) outside {n}x{n}"));
            }
            if k > 0 && sorted[k - 1].0 == r && sorted[k - 1].1 == c {
                return Err(format!("duplicate entry ({r}, {c})"));
            }
            row_ptr[r + 1] += 1;
            col_idx.push(c as u32);
            values.push(v);
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self { n, row_ptr, col_idx, values })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn triplets(&self) -> Vec<Triplet> {
        (0..self.n)
            .flat_map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .map(move |k| Triplet(r, self.col_idx[k] as usize, self.values[k]))
            })
            .collect()
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for Triplet(r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    /// `out = self · x`.
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        let (x, _) = x.as_chunks::<1>();
        let (out, _) = out.as_chunks_mut::<1>();
        self.mul_lanes(x, out);
    }

    /// Product with `L` vectors at once, stored node-major (`x[node][lane]`).
    ///
    /// Every lane is summed in the same order regardless of `L`, so a lane of
    /// a batched product is bit-identical to the single-vector product.
    #[inline]
    pub fn mul_lanes<const L: usize>(&self, x: &[[f64; L]], out: &mut [[f64; L]]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(out.len(), self.n);
        for (r, o) in out.iter_mut().enumerate() {
            let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
            let cols = &self.col_idx[lo..hi];
            let vals = &self.values[lo..hi];
            // Four partial sums per lane break the add dependency chain.
            let mut acc = [[0.0f64; L]; 4];
            let mut chunks_c = cols.chunks_exact(4);
            let mut chunks_v = vals.chunks_exact(4);
            for (c, v) in (&mut chunks_c).zip(&mut chunks_v) {
                for j in 0..4 {
                    let xs = &x[c[j] as usize];
                    for l in 0..L {
                        acc[j][l] += v[j] * xs[l];
                    }
                }
            }
            for (c, v) in chunks_c.remainder().iter().zip(chunks_v.remainder()) {
                let xs = &x[*c as usize];
                for l in 0..L {
                    acc[0][l] += v * xs[l];
                }
            }
            for l in 0..L {
                o[l] = (acc[0][l] + acc[1][l]) + (acc[2][l] + acc[3][l]);
            }
        }
    }
}
