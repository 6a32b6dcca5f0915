//! Product-form basis inverse.
//!
//! `B^-1 = E_k ... E_1`, each `E_t` an elementary eta matrix stored as a
//! sparse column. Positions are basis slots; the identity basis has the
//! logical of row `i` in slot `i`.

#[derive(Debug, Clone)]
struct Eta {
    pivot_pos: usize,
    pivot: f64,
    /// Off-pivot entries `(position, value)` of the transformed column.
    entries: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct EtaFile {
    etas: Vec<Eta>,
    nnz: usize,
}

const DROP: f64 = 1e-14;

impl EtaFile {
    pub fn clear(&mut self) {
        self.etas.clear();
        self.nnz = 0;
    }

    pub fn len(&self) -> usize {
        self.etas.len()
    }

    pub fn nnz(&self) -> usize {
        self.nnz
    }

    /// Appends the eta for a pivot on `column` (already transformed by the
    /// current inverse) at slot `pos`.
    pub fn push(&mut self, column: &[f64], pos: usize) {
        let pivot = column[pos];
        let entries: Vec<(usize, f64)> = column
            .iter()
            .enumerate()
            .filter(|&(i, &v)| i != pos && v.abs() > DROP)
            .map(|(i, &v)| (i, v))
            .collect();
        self.nnz += entries.len() + 1;
        self.etas.push(Eta {
            pivot_pos: pos,
            pivot,
            entries,
        });
    }

    /// Sparse variant of [`push`] for columns held as index lists.
    pub fn push_sparse(&mut self, column: &[f64], nonzeros: &[usize], pos: usize) {
        let pivot = column[pos];
        let entries: Vec<(usize, f64)> = nonzeros
            .iter()
            .filter(|&&i| i != pos && column[i].abs() > DROP)
            .map(|&i| (i, column[i]))
            .collect();
        self.nnz += entries.len() + 1;
        self.etas.push(Eta {
            pivot_pos: pos,
            pivot,
            entries,
        });
    }

    /// `a <- B^-1 a` in place.
    pub fn ftran(&self, a: &mut [f64]) {
        for eta in &self.etas {
            let xr = a[eta.pivot_pos];
            if xr == 0.0 {
                continue;
            }
            let t = xr / eta.pivot;
            a[eta.pivot_pos] = t;
            for &(i, v) in &eta.entries {
                a[i] -= v * t;
            }
        }
    }

    /// [`ftran`] that also records newly created nonzeros. On entry `nz`
    /// lists the nonzero positions of `a`, each flagged in `mark`.
    pub fn ftran_sparse(&self, a: &mut [f64], nz: &mut Vec<usize>, mark: &mut [bool]) {
        for eta in &self.etas {
            let xr = a[eta.pivot_pos];
            if xr == 0.0 {
                continue;
            }
            let t = xr / eta.pivot;
            a[eta.pivot_pos] = t;
            for &(i, v) in &eta.entries {
                if !mark[i] {
                    mark[i] = true;
                    nz.push(i);
                }
                a[i] -= v * t;
            }
        }
    }

    /// `y^T <- y^T B^-1` in place.
    pub fn btran(&self, y: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let mut acc = y[eta.pivot_pos];
            for &(i, v) in &eta.entries {
                acc -= v * y[i];
            }
            y[eta.pivot_pos] = acc / eta.pivot;
        }
    }
}
