/// Square band matrix in row-major band storage, factorized in place by
/// LU without pivoting. Only meant for diagonally dominant systems.
#[derive(Debug, Clone)]
pub(crate) struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub(crate) fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self { n, kl, ku, data: vec![0.0; n * (kl + ku + 1)] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku);
        i * (self.kl + self.ku + 1) + (j + self.kl - i)
    }

    pub(crate) fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    /// Factorizes in place. Fails on a vanishing pivot.
    pub(crate) fn factorize(&mut self) -> Result<(), usize> {
        let w = self.kl + self.ku + 1;
        for k in 0..self.n {
            let pivot = self.data[k * w + self.kl];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(k);
            }
            let row_end = (k + self.kl + 1).min(self.n);
            let col_end = (k + self.ku + 1).min(self.n);
            for i in k + 1..row_end {
                let ik = i * w + (k + self.kl - i);
                let l = self.data[ik] / pivot;
                if l == 0.0 {
                    continue;
                }
                self.data[ik] = l;
                let (upper, lower) = self.data.split_at_mut(i * w);
                let krow = &upper[k * w..k * w + w];
                let irow = &mut lower[..w];
                for j in k + 1..col_end {
                    irow[j + self.kl - i] -= l * krow[j + self.kl - k];
                }
            }
        }
        Ok(())
    }

    /// Solves with a factorized matrix.
    pub(crate) fn solve(&self, b: &mut [f64]) {
        let w = self.kl + self.ku + 1;
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let mut acc = b[i];
            for j in lo..i {
                acc -= self.data[i * w + (j + self.kl - i)] * b[j];
            }
            b[i] = acc;
        }
        for i in (0..self.n).rev() {
            let hi = (i + self.ku + 1).min(self.n);
            let mut acc = b[i];
            for j in i + 1..hi {
                acc -= self.data[i * w + (j + self.kl - i)] * b[j];
            }
            b[i] = acc / self.data[i * w + self.kl];
        }
    }
}
