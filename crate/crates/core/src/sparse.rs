//! Minimal sparse matrix support: COO accumulation during assembly, CSR for
//! everything after.
//!
//! Duplicate COO entries are summed during conversion after a stable sort, so
//! the addition order is the insertion order. Assembly pushes entries in a
//! fixed element order, which makes the assembled values bitwise reproducible
//! run to run.

#[derive(Debug, Clone)]
pub struct Coo {
    pub n: usize,
    entries: Vec<(u32, u32, f64)>,
}

impl Coo {
    pub fn new(n: usize) -> Self {
        Coo {
            n,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(n: usize, cap: usize) -> Self {
        Coo {
            n,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n && j < self.n);
        self.entries.push((i as u32, j as u32, v));
    }

    pub fn extend(&mut self, other: &[(u32, u32, f64)]) {
        self.entries.extend_from_slice(other);
    }

    pub fn to_csr(mut self) -> Csr {
        // stable: equal (i, j) keys keep insertion order, fixing the summation order
        self.entries.sort_by_key(|&(i, j, _)| (i, j));
        let n = self.n;
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut last = None;
        for &(i, j, v) in &self.entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i as usize + 1] += 1;
                last = Some((i, j));
            }
        }
        for k in 0..n {
            row_ptr[k + 1] += row_ptr[k];
        }
        Csr {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<u32>,
    pub values: Vec<f64>,
}

impl Csr {
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&(j as u32)) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                acc += v * x[j as usize];
            }
            y[i] = acc;
        }
    }

    /// Lower and upper half-bandwidths.
    pub fn bandwidth(&self) -> (usize, usize) {
        let (mut kl, mut ku) = (0usize, 0usize);
        for i in 0..self.n {
            let (cols, _) = self.row(i);
            for &j in cols {
                let j = j as usize;
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        (kl, ku)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coo_to_csr_sums_duplicates() {
        let mut coo = Coo::new(3);
        coo.push(0, 0, 1.0);
        coo.push(2, 1, 5.0);
        coo.push(0, 0, 2.0);
        coo.push(1, 2, 3.0);
        coo.push(2, 1, -1.0);
        let csr = coo.to_csr();
        assert_eq!(csr.get(0, 0), 3.0);
        assert_eq!(csr.get(1, 2), 3.0);
        assert_eq!(csr.get(2, 1), 4.0);
        assert_eq!(csr.get(1, 1), 0.0);
        assert_eq!(csr.nnz(), 3);
        assert_eq!(csr.row_ptr, vec![0, 1, 2, 3]);
    }

    #[test]
    fn empty_rows_are_fine() {
        let mut coo = Coo::new(4);
        coo.push(3, 0, 2.0);
        let csr = coo.to_csr();
        assert_eq!(csr.row_ptr, vec![0, 0, 0, 0, 1]);
        assert_eq!(csr.get(3, 0), 2.0);
    }

    #[test]
    fn matvec_small() {
        let mut coo = Coo::new(2);
        coo.push(0, 0, 2.0);
        coo.push(0, 1, 1.0);
        coo.push(1, 1, -1.0);
        let csr = coo.to_csr();
        let mut y = vec![0.0; 2];
        csr.matvec(&[3.0, 4.0], &mut y);
        assert_eq!(y, vec![10.0, -4.0]);
    }

    #[test]
    fn conversion_is_bitwise_deterministic() {
        let build = || {
            let mut coo = Coo::new(5);
            // values chosen so the sum depends on addition order
            coo.push(2, 2, 1e16);
            coo.push(2, 2, 1.0);
            coo.push(2, 2, -1e16);
            coo.push(0, 4, 0.1);
            coo.to_csr()
        };
        let a = build();
        let b = build();
        assert_eq!(a.values, b.values);
        assert_eq!(a.col_idx, b.col_idx);
    }

    #[test]
    fn bandwidth_of_tridiagonal() {
        let mut coo = Coo::new(4);
        for i in 0..4usize {
            coo.push(i, i, 2.0);
            if i > 0 {
                coo.push(i, i - 1, -1.0);
            }
            if i < 3 {
                coo.push(i, i + 1, -1.0);
            }
        }
        assert_eq!(coo.to_csr().bandwidth(), (1, 1));
    }
}
