use nalgebra::DMatrix;

/// Cholesky factor of a symmetric positive (semi)definite matrix after a
/// symmetric permutation, stored as a lower band.
///
/// The bandwidth is read off the permuted sparsity pattern, so a dense matrix
/// simply degrades to an ordinary dense factorization. A pivot that falls
/// below `floor` times its own diagonal entry (times the largest diagonal
/// for an empty row) is replaced by that threshold, which keeps the factor
/// usable on singular PSD matrices: the solve then returns a descent
/// direction rather than failing. The threshold is per row, so strongly
/// and weakly curved variables can share one factor.
#[derive(Clone, Debug)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    order: Vec<usize>,
    // row i holds columns i-bw ..= i
    data: Vec<f64>,
    pub floored: usize,
}

impl BandedCholesky {
    pub fn factor(mat: &DMatrix<f64>, order: Option<&[usize]>, floor: f64) -> Self {
        let n = mat.nrows();
        let order: Vec<usize> = match order {
            Some(o) => o.to_vec(),
            None => (0..n).collect(),
        };
        let mut bw = 0;
        for i in 0..n {
            for j in 0..i {
                if i - j > bw && mat[(order[i], order[j])] != 0.0 {
                    bw = i - j;
                }
            }
        }
        let w = bw + 1;
        let mut data = vec![0.0; n * w];
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                data[i * w + (j + bw - i)] = mat[(order[i], order[j])];
            }
        }
        let max_diag = (0..n).fold(0.0f64, |m, i| m.max(mat[(i, i)].abs()));
        let mut floored = 0;
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let mut sum = data[i * w + (j + bw - i)];
                for k in k0..j {
                    sum -= data[i * w + (k + bw - i)] * data[j * w + (k + bw - j)];
                }
                if j == i {
                    let diag = mat[(order[i], order[i])];
                    let reference = if diag > 0.0 { diag } else { max_diag };
                    let threshold = (floor * reference).max(f64::MIN_POSITIVE);
                    let d = if sum > threshold {
                        sum
                    } else {
                        floored += 1;
                        threshold
                    };
                    data[i * w + bw] = d.sqrt();
                } else {
                    data[i * w + (j + bw - i)] = sum / data[j * w + bw];
                }
            }
        }
        BandedCholesky {
            n,
            bw,
            order,
            data,
            floored,
        }
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Solves `M x = rhs` in the original (unpermuted) indexing.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let mut y: Vec<f64> = self.order.iter().map(|&i| rhs[i]).collect();
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            let mut s = y[i];
            for j in j0..i {
                s -= self.data[i * w + (j + bw - i)] * y[j];
            }
            y[i] = s / self.data[i * w + bw];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n.min(i + bw + 1) {
                s -= self.data[k * w + (i + bw - k)] * y[k];
            }
            y[i] = s / self.data[i * w + bw];
        }
        let mut out = vec![0.0; n];
        for (pos, &i) in self.order.iter().enumerate() {
            out[i] = y[pos];
        }
        out
    }
}
