//! Sparse product-form basis inverse.
//!
//! `B^{-1}` is a sequence of elementary eta matrices applied to the identity.
//! Reinversion pivots the structural basic columns in one at a time, sparsest
//! first, each into a row whose slack is not basic. Every simplex pivot
//! appends one more eta.

/// Elementary column transform: position `r` gets `x_r / pivot`, every other
/// listed position `i` gets `x_i - a_i * x_r / pivot`.
#[derive(Debug, Clone)]
struct Eta {
    r: usize,
    pivot: f64,
    idx: Vec<usize>,
    val: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Factor {
    m: usize,
    etas: Vec<Eta>,
    nnz: usize,
}

/// Magnitude below which a reinversion pivot is treated as zero.
const REINVERT_PIVOT_TOL: f64 = 1e-9;
/// Pivots within this fraction of the column maximum compete on sparsity.
const THRESHOLD: f64 = 0.1;

impl Factor {
    pub fn identity(m: usize) -> Self {
        Factor {
            m,
            etas: Vec::new(),
            nnz: 0,
        }
    }

    pub fn nnz(&self) -> usize {
        self.nnz
    }

    /// `x := B^{-1} x`
    pub fn ftran(&self, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.m);
        for e in &self.etas {
            let xr = x[e.r];
            if xr == 0.0 {
                continue;
            }
            let v = xr / e.pivot;
            x[e.r] = v;
            for (&i, &a) in e.idx.iter().zip(&e.val) {
                x[i] -= a * v;
            }
        }
    }

    /// `y := y B^{-1}` for a row vector `y`.
    pub fn btran(&self, y: &mut [f64]) {
        debug_assert_eq!(y.len(), self.m);
        for e in self.etas.iter().rev() {
            let mut s = y[e.r];
            for (&i, &a) in e.idx.iter().zip(&e.val) {
                s -= a * y[i];
            }
            y[e.r] = s / e.pivot;
        }
    }

    /// Records the basis change that puts column `alpha = B^{-1} a_q` at position `r`.
    pub fn push(&mut self, r: usize, alpha: &[f64]) {
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for (i, &a) in alpha.iter().enumerate() {
            if i != r && a != 0.0 {
                idx.push(i);
                val.push(a);
            }
        }
        self.nnz += idx.len() + 1;
        self.etas.push(Eta {
            r,
            pivot: alpha[r],
            idx,
            val,
        });
    }
}

/// Outcome of rebuilding the factor for a requested basis.
pub(crate) struct Reinverted {
    pub factor: Factor,
    /// Basic variable at each position.
    pub head: Vec<usize>,
    /// Structural columns dropped as linearly dependent; their rows' slacks
    /// took their place.
    pub dropped: Vec<usize>,
}

/// Builds a factor for the basis `basic` (structural indices `< n_struct`,
/// slack of row `i` is `n_struct + i`).
///
/// `col` writes the nonzeros of a structural column into a dense vector and
/// `row_count` gives the number of structural nonzeros per row.
pub(crate) fn reinvert(
    m: usize,
    n_struct: usize,
    basic: &[usize],
    row_count: &[usize],
    col_nnz: impl Fn(usize) -> usize,
    mut col: impl FnMut(usize, &mut [f64]),
) -> Reinverted {
    let mut head: Vec<Option<usize>> = vec![None; m];
    let mut structs = Vec::new();
    for &j in basic {
        if j >= n_struct {
            head[j - n_struct] = Some(j);
        } else {
            structs.push(j);
        }
    }
    let mut open: Vec<bool> = head.iter().map(|h| h.is_none()).collect();
    structs.sort_by_key(|&j| (col_nnz(j), j));

    let mut factor = Factor::identity(m);
    let mut dropped = Vec::new();
    let mut work = vec![0.0; m];
    for j in structs {
        work.iter_mut().for_each(|v| *v = 0.0);
        col(j, &mut work);
        factor.ftran(&mut work);
        let mut max = 0.0f64;
        for (i, &a) in work.iter().enumerate() {
            if open[i] {
                max = max.max(a.abs());
            }
        }
        if max <= REINVERT_PIVOT_TOL {
            dropped.push(j);
            continue;
        }
        let mut pick: Option<usize> = None;
        for (i, &a) in work.iter().enumerate() {
            if !open[i] || a.abs() < THRESHOLD * max {
                continue;
            }
            pick = match pick {
                None => Some(i),
                Some(p) => {
                    let better = row_count[i] < row_count[p]
                        || (row_count[i] == row_count[p] && a.abs() > work[p].abs());
                    Some(if better { i } else { p })
                }
            };
        }
        let r = pick.expect("a pivot above threshold exists");
        factor.push(r, &work);
        open[r] = false;
        head[r] = Some(j);
    }
    let head = head
        .into_iter()
        .enumerate()
        .map(|(i, h)| h.unwrap_or(n_struct + i))
        .collect();
    Reinverted {
        factor,
        head,
        dropped,
    }
}
