use nalgebra::{DMatrix, DVector};

/// Householder QR with column pivoting on the largest remaining column norm
/// (Businger-Golub). `|R[j,j]|` is non-increasing, so the rank can be read off
/// the diagonal.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    /// Upper triangle holds R; Householder vectors are kept in `reflectors`.
    r: DMatrix<f64>,
    reflectors: Vec<DVector<f64>>,
    /// Column `j` of R corresponds to column `perm[j]` of the input.
    perm: Vec<usize>,
}

impl PivotedQr {
    pub fn new(mut a: DMatrix<f64>) -> Self {
        let (m, n) = a.shape();
        let steps = m.min(n);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut reflectors = Vec::with_capacity(steps);

        for j in 0..steps {
            let (pivot, _) = (j..n)
                .map(|c| (c, a.view((j, c), (m - j, 1)).norm_squared()))
                .fold((j, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot != j {
                a.swap_columns(j, pivot);
                perm.swap(j, pivot);
            }

            let mut v: DVector<f64> = a.view((j, j), (m - j, 1)).column(0).into_owned();
            let norm = v.norm();
            if norm == 0.0 {
                reflectors.push(DVector::zeros(m - j));
                continue;
            }
            let alpha = if v[0] >= 0.0 { -norm } else { norm };
            v[0] -= alpha;
            let vnorm2 = v.norm_squared();
            if vnorm2 > 0.0 {
                for c in j..n {
                    let mut block = a.view_mut((j, c), (m - j, 1));
                    let mut col = block.column_mut(0);
                    let s = 2.0 * v.dot(&col) / vnorm2;
                    col.axpy(-s, &v, 1.0);
                }
            }
            a[(j, j)] = alpha;
            for i in (j + 1)..m {
                a[(i, j)] = 0.0;
            }
            reflectors.push(v);
        }
        PivotedQr { r: a, reflectors, perm }
    }

    pub fn ncols(&self) -> usize {
        self.r.ncols()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.reflectors.len()).map(|j| self.r[(j, j)])
    }

    /// Numerical rank: diagonal entries above `rel_tol * |R[0,0]|`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let lead = self.diagonal().next().map(f64::abs).unwrap_or(0.0);
        if lead == 0.0 {
            return 0;
        }
        self.diagonal().take_while(|d| d.abs() > rel_tol * lead).count()
    }

    /// Least-squares solution of `A x = b`; assumes full column rank.
    pub fn solve_least_squares(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.ncols();
        let mut qtb = b.clone();
        for (j, v) in self.reflectors.iter().enumerate() {
            let vnorm2 = v.norm_squared();
            if vnorm2 == 0.0 {
                continue;
            }
            let mut seg = qtb.rows_mut(j, v.len());
            let s = 2.0 * v.dot(&seg) / vnorm2;
            seg.axpy(-s, v, 1.0);
        }
        let mut z = DVector::zeros(n);
        for j in (0..n).rev() {
            let mut acc = qtb[j];
            for c in (j + 1)..n {
                acc -= self.r[(j, c)] * z[c];
            }
            z[j] = acc / self.r[(j, j)];
        }
        let mut x = DVector::zeros(n);
        for (j, &orig) in self.perm.iter().enumerate() {
            x[orig] = z[j];
        }
        x
    }
}

/// Index of the first column of `a` that is numerically dependent on the
/// columns before it, or `None` when `a` has full column rank.
pub fn first_dependent_column(a: &DMatrix<f64>, rel_tol: f64) -> Option<usize> {
    let k = a.ncols();
    let full = PivotedQr::new(a.clone());
    let rank = full.rank(rel_tol);
    if rank == k {
        return None;
    }
    (1..=k)
        .find(|&j| PivotedQr::new(a.columns(0, j).into_owned()).rank(rel_tol) < j)
        .map(|j| j - 1)
        .or(Some(full.permutation()[rank]))
}
