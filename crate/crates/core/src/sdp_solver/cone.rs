use nalgebra::{DMatrix, SymmetricEigen};

pub(crate) const SQRT2: f64 = std::f64::consts::SQRT_2;

/// A block of cone rows: `[start, start + len)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Block {
    /// `svec` of an `n×n` symmetric matrix, upper triangle row-major, off-diagonals scaled by √2.
    Psd {
        start: usize,
        n: usize,
    },
    Nonneg {
        start: usize,
        len: usize,
    },
}

impl Block {
    pub fn start(&self) -> usize {
        match *self {
            Block::Psd { start, .. } | Block::Nonneg { start, .. } => start,
        }
    }

    pub fn len(&self) -> usize {
        match *self {
            Block::Psd { n, .. } => n * (n + 1) / 2,
            Block::Nonneg { len, .. } => len,
        }
    }
}

/// Row offset of `(a, b)`, `a ≤ b`, inside an `n×n` svec block.
#[cfg(test)]
pub(crate) fn svec_pos(n: usize, a: usize, b: usize) -> usize {
    debug_assert!(a <= b && b < n);
    a * n - a * (a + 1) / 2 + b
}

pub(crate) fn smat(n: usize, v: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for a in 0..n {
        m[(a, a)] = v[k];
        k += 1;
        for b in a + 1..n {
            let x = v[k] / SQRT2;
            m[(a, b)] = x;
            m[(b, a)] = x;
            k += 1;
        }
    }
    m
}

pub(crate) fn svec_into(m: &DMatrix<f64>, out: &mut [f64]) {
    let n = m.nrows();
    let mut k = 0;
    for a in 0..n {
        out[k] = m[(a, a)];
        k += 1;
        for b in a + 1..n {
            out[k] = 0.5 * (m[(a, b)] + m[(b, a)]) * SQRT2;
            k += 1;
        }
    }
}

/// Projects `v` (an svec) onto the PSD cone in place; returns the smallest eigenvalue seen.
pub(crate) fn project_psd(n: usize, v: &mut [f64]) -> f64 {
    let m = smat(n, v);
    let eig = SymmetricEigen::new(m);
    let min = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min >= 0.0 {
        return min;
    }
    let positives = eig.eigenvalues.iter().filter(|&&l| l > 1e-12).count();
    let q = &eig.eigenvectors;
    let mut out = DMatrix::zeros(n, n);
    if positives <= n / 2 {
        for (k, &l) in eig.eigenvalues.iter().enumerate() {
            if l > 1e-12 {
                let col = q.column(k);
                out.ger(l, &col, &col, 1.0);
            }
        }
    } else {
        out = smat(n, v);
        for (k, &l) in eig.eigenvalues.iter().enumerate() {
            if l <= 1e-12 {
                let col = q.column(k);
                out.ger(-l, &col, &col, 1.0);
            }
        }
    }
    svec_into(&out, v);
    min
}

pub(crate) fn project(blocks: &[Block], v: &mut [f64]) {
    for b in blocks {
        let s = b.start();
        let slice = &mut v[s..s + b.len()];
        match *b {
            Block::Psd { n, .. } => {
                project_psd(n, slice);
            }
            Block::Nonneg { .. } => slice.iter_mut().for_each(|x| *x = x.max(0.0)),
        }
    }
}
