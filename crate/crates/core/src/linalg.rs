//! Small dense complex linear algebra: ordered Schur forms, spectral groups
//! with their Kato transport, and exterior powers (compound matrices).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub fn c(re: f64, im: f64) -> C64 {
    Complex64::new(re, im)
}

pub fn to_complex(m: &DMatrix<f64>) -> CMat {
    m.map(|x| c(x, 0.0))
}

/// Complex Schur form `m = q t q^H` with `t` strictly upper triangular.
pub fn schur(m: &CMat) -> Result<(CMat, CMat)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((CMat::zeros(0, 0), CMat::zeros(0, 0)));
    }
    if m.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Structure("non-finite matrix entry in Schur decomposition".into()));
    }
    let s = nalgebra::Schur::try_new(m.clone(), 1e-15, 10_000)
        .ok_or_else(|| Error::Structure("Schur iteration did not converge".into()))?;
    let (mut q, mut t) = s.unpack();
    // Split any 2x2 blocks left by the double-shift sweep.
    let mut p = 0;
    while p + 1 < n {
        let sub = t[(p + 1, p)];
        let scale = t[(p, p)].norm() + t[(p + 1, p + 1)].norm() + 1e-300;
        if sub.norm() > 1e-14 * scale {
            let a = t[(p, p)];
            let b = t[(p, p + 1)];
            let cc = t[(p + 1, p)];
            let d = t[(p + 1, p + 1)];
            let tr = a + d;
            let det = a * d - b * cc;
            let disc = (tr * tr - det * 4.0).sqrt();
            let mu = (tr + disc) * 0.5;
            // eigenvector of the 2x2 block for mu
            let (v1, v2) = if (mu - d).norm() > (mu - a).norm() {
                (b, mu - a)
            } else {
                (mu - d, cc)
            };
            let nv = (v1.norm_sqr() + v2.norm_sqr()).sqrt();
            if nv > 0.0 {
                let (g1, g2) = (v1 / nv, v2 / nv);
                apply_rotation(&mut q, &mut t, p, g1, g2);
            }
            t[(p + 1, p)] = c(0.0, 0.0);
        } else {
            t[(p + 1, p)] = c(0.0, 0.0);
        }
        p += 1;
    }
    for j in 0..n {
        for i in (j + 1)..n {
            t[(i, j)] = c(0.0, 0.0);
        }
    }
    Ok((q, t))
}

/// Applies the unitary `G = [[g1, -conj(g2)], [g2, conj(g1)]]` on indices
/// `p, p+1`: `t <- G^H t G`, `q <- q G`.
fn apply_rotation(q: &mut CMat, t: &mut CMat, p: usize, g1: C64, g2: C64) {
    let n = t.nrows();
    // columns: t <- t G
    for i in 0..n {
        let a = t[(i, p)];
        let b = t[(i, p + 1)];
        t[(i, p)] = a * g1 + b * g2;
        t[(i, p + 1)] = -a * g2.conj() + b * g1.conj();
        let a = q[(i, p)];
        let b = q[(i, p + 1)];
        q[(i, p)] = a * g1 + b * g2;
        q[(i, p + 1)] = -a * g2.conj() + b * g1.conj();
    }
    // rows: t <- G^H t
    for j in 0..n {
        let a = t[(p, j)];
        let b = t[(p + 1, j)];
        t[(p, j)] = g1.conj() * a + g2.conj() * b;
        t[(p + 1, j)] = -g2 * a + g1 * b;
    }
}

pub fn eigenvalues(m: &CMat) -> Result<Vec<C64>> {
    let (_, t) = schur(m)?;
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

pub fn eigenvalues_real(m: &DMatrix<f64>) -> Result<Vec<C64>> {
    eigenvalues(&to_complex(m))
}

/// Moves the selected diagonal entries of an upper-triangular `t` to the
/// leading block by adjacent swaps. Returns the size of the leading block.
pub fn reorder_schur(q: &mut CMat, t: &mut CMat, select: &[bool]) -> Result<usize> {
    let n = t.nrows();
    let mut sel = select.to_vec();
    let k = sel.iter().filter(|&&s| s).count();
    // bubble: repeatedly swap an unselected entry followed by a selected one
    let mut changed = true;
    while changed {
        changed = false;
        for p in 0..n.saturating_sub(1) {
            if !sel[p] && sel[p + 1] {
                swap_adjacent(q, t, p)?;
                sel.swap(p, p + 1);
                changed = true;
            }
        }
    }
    Ok(k)
}

fn swap_adjacent(q: &mut CMat, t: &mut CMat, p: usize) -> Result<()> {
    let a = t[(p, p)];
    let b = t[(p, p + 1)];
    let d = t[(p + 1, p + 1)];
    let v1 = b;
    let v2 = d - a;
    let nv = (v1.norm_sqr() + v2.norm_sqr()).sqrt();
    if nv <= 1e-300 || v2.norm() <= 1e-14 * (a.norm() + d.norm() + b.norm()) {
        return Err(Error::SplitAmbiguous(format!(
            "cannot separate coincident eigenvalues {a} and {d}"
        )));
    }
    apply_rotation(q, t, p, v1 / nv, v2 / nv);
    t[(p + 1, p)] = c(0.0, 0.0);
    t[(p, p)] = d;
    t[(p + 1, p + 1)] = a;
    Ok(())
}

/// Solves `a x - x b = rhs` for upper-triangular `a` (k×k) and `b` (l×l).
pub fn solve_triangular_sylvester(a: &CMat, b: &CMat, rhs: &CMat) -> Result<CMat> {
    let k = a.nrows();
    let l = b.nrows();
    let mut x = CMat::zeros(k, l);
    for j in 0..l {
        let mut col: Vec<C64> = (0..k).map(|i| rhs[(i, j)]).collect();
        for i in 0..j {
            let bij = b[(i, j)];
            if bij != c(0.0, 0.0) {
                for r in 0..k {
                    col[r] += x[(r, i)] * bij;
                }
            }
        }
        let shift = b[(j, j)];
        for r in (0..k).rev() {
            let mut acc = col[r];
            for cidx in (r + 1)..k {
                acc -= a[(r, cidx)] * x[(cidx, j)];
            }
            let piv = a[(r, r)] - shift;
            if piv.norm() == 0.0 {
                return Err(Error::SplitAmbiguous("Sylvester equation is singular".into()));
            }
            x[(r, j)] = acc / piv;
        }
    }
    Ok(x)
}

/// An invariant subspace of a matrix attached to a selected group of
/// eigenvalues, held as a reordered Schur form.
#[derive(Debug, Clone)]
pub struct SpectralGroup {
    pub q: CMat,
    pub t: CMat,
    pub k: usize,
    /// Solves `t11 x - x t22 = -t12`; block-diagonalizes `t`.
    pub x: CMat,
}

impl SpectralGroup {
    pub fn new(g: &CMat, select: &[bool]) -> Result<Self> {
        let (mut q, mut t) = schur(g)?;
        let eig: Vec<C64> = (0..t.nrows()).map(|i| t[(i, i)]).collect();
        // `select` refers to eigenvalues as returned by `eigenvalues(g)`,
        // which is the diagonal order of the unreordered Schur form.
        if select.len() != eig.len() {
            return Err(Error::Usage("selection length mismatch".into()));
        }
        let k = reorder_schur(&mut q, &mut t, select)?;
        let m = t.nrows();
        let t11 = t.view((0, 0), (k, k)).into_owned();
        let t22 = t.view((k, k), (m - k, m - k)).into_owned();
        let t12 = t.view((0, k), (k, m - k)).into_owned();
        let x = solve_triangular_sylvester(&t11, &t22, &(-t12))?;
        Ok(SpectralGroup { q, t, k, x })
    }

    /// Builds the group from a predicate on eigenvalues.
    pub fn from_predicate(g: &CMat, pred: impl Fn(C64) -> bool) -> Result<Self> {
        let (q, t) = schur(g)?;
        let select: Vec<bool> = (0..t.nrows()).map(|i| pred(t[(i, i)])).collect();
        Self::from_schur(q, t, &select)
    }

    pub fn from_schur(mut q: CMat, mut t: CMat, select: &[bool]) -> Result<Self> {
        let k = reorder_schur(&mut q, &mut t, select)?;
        let m = t.nrows();
        let t11 = t.view((0, 0), (k, k)).into_owned();
        let t22 = t.view((k, k), (m - k, m - k)).into_owned();
        let t12 = t.view((0, k), (k, m - k)).into_owned();
        let x = solve_triangular_sylvester(&t11, &t22, &(-t12))?;
        Ok(SpectralGroup { q, t, k, x })
    }

    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    pub fn group_eigenvalues(&self) -> Vec<C64> {
        (0..self.k).map(|i| self.t[(i, i)]).collect()
    }

    pub fn other_eigenvalues(&self) -> Vec<C64> {
        (self.k..self.dim()).map(|i| self.t[(i, i)]).collect()
    }

    pub fn eigen_sum(&self) -> C64 {
        self.group_eigenvalues().into_iter().sum()
    }

    /// Minimal distance between the group and the rest of the spectrum.
    pub fn separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for a in self.group_eigenvalues() {
            for b in self.other_eigenvalues() {
                best = best.min((a - b).norm());
            }
        }
        best
    }

    /// Orthonormal basis of the invariant subspace.
    pub fn basis(&self) -> CMat {
        self.q.columns(0, self.k).into_owned()
    }

    pub fn projector(&self) -> CMat {
        let m = self.dim();
        let k = self.k;
        let mut core = CMat::zeros(m, m);
        for i in 0..k {
            core[(i, i)] = c(1.0, 0.0);
            for j in k..m {
                core[(i, j)] = -self.x[(i, j - k)];
            }
        }
        &self.q * core * self.q.adjoint()
    }

    /// Kato transport direction `[P', P] r` for columns `r` in the range of
    /// the projector, given the parameter derivative `dg` of the matrix.
    pub fn kato_direction(&self, dg: &CMat, r: &CMat) -> Result<CMat> {
        let m = self.dim();
        let k = self.k;
        if k == m || k == 0 {
            return Ok(CMat::zeros(r.nrows(), r.ncols()));
        }
        let qh = self.q.adjoint();
        let h = &qh * dg * &self.q;
        let h21 = h.view((k, 0), (m - k, k)).into_owned();
        let t11 = self.t.view((0, 0), (k, k)).into_owned();
        let t22 = self.t.view((k, k), (m - k, m - k)).into_owned();
        let y = solve_triangular_sylvester(&t22, &t11, &(-h21))?;
        let r1 = (&qh * r).rows(0, k).into_owned();
        let lower = &y * r1;
        let upper = &self.x * &lower;
        let mut stacked = CMat::zeros(m, r.ncols());
        stacked.rows_mut(0, k).copy_from(&upper);
        stacked.rows_mut(k, m - k).copy_from(&lower);
        Ok(&self.q * stacked)
    }
}

/// Combinatorial data for the k-th exterior power of C^m.
#[derive(Debug, Clone)]
pub struct ExteriorPower {
    pub m: usize,
    pub k: usize,
    pub subsets: Vec<Vec<usize>>,
    index_of_mask: Vec<u32>,
    // (target, source, row, col, sign)
    terms: Vec<(u32, u32, u16, u16, f64)>,
}

const NO_INDEX: u32 = u32::MAX;

impl ExteriorPower {
    pub fn new(m: usize, k: usize) -> Self {
        assert!(m <= 16 && k <= m);
        let mut subsets = Vec::new();
        let mut cur = Vec::with_capacity(k);
        fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            for i in start..m {
                cur.push(i);
                rec(i + 1, m, k, cur, out);
                cur.pop();
            }
        }
        rec(0, m, k, &mut cur, &mut subsets);
        let mut index_of_mask = vec![NO_INDEX; 1 << m];
        for (idx, s) in subsets.iter().enumerate() {
            index_of_mask[mask(s)] = idx as u32;
        }
        let mut terms = Vec::new();
        for (src, s) in subsets.iter().enumerate() {
            for (p, &i) in s.iter().enumerate() {
                let _ = p;
                for j in 0..m {
                    if j == i {
                        terms.push((src as u32, src as u32, j as u16, i as u16, 1.0));
                    } else if !s.contains(&j) {
                        let mut t: Vec<usize> = s.iter().map(|&v| if v == i { j } else { v }).collect();
                        let sign = sort_sign(&mut t);
                        let tgt = index_of_mask[mask(&t)];
                        terms.push((tgt, src as u32, j as u16, i as u16, sign));
                    }
                }
            }
        }
        ExteriorPower {
            m,
            k,
            subsets,
            index_of_mask,
            terms,
        }
    }

    pub fn dim(&self) -> usize {
        self.subsets.len()
    }

    pub fn index(&self, subset: &[usize]) -> Option<usize> {
        let v = self.index_of_mask[mask(subset)];
        (v != NO_INDEX && subset.len() == self.k).then_some(v as usize)
    }

    /// Induced action of `a` on a k-vector (derivation extension).
    pub fn apply(&self, a: &CMat, w: &CVec) -> CVec {
        let mut out = CVec::zeros(self.dim());
        for &(t, s, r, col, sg) in &self.terms {
            let ws = w[s as usize];
            if ws != c(0.0, 0.0) {
                out[t as usize] += a[(r as usize, col as usize)] * ws * sg;
            }
        }
        out
    }

    /// Dense matrix of the induced action.
    pub fn compound(&self, a: &CMat) -> CMat {
        let mut out = CMat::zeros(self.dim(), self.dim());
        for &(t, s, r, col, sg) in &self.terms {
            out[(t as usize, s as usize)] += a[(r as usize, col as usize)] * sg;
        }
        out
    }

    /// Plücker coordinates of the span of the columns of `v` (m × k).
    pub fn wedge(&self, v: &CMat) -> CVec {
        assert_eq!(v.nrows(), self.m);
        assert_eq!(v.ncols(), self.k);
        let mut out = CVec::zeros(self.dim());
        for (idx, s) in self.subsets.iter().enumerate() {
            let mut sub = CMat::zeros(self.k, self.k);
            for (a, &row) in s.iter().enumerate() {
                for b in 0..self.k {
                    sub[(a, b)] = v[(row, b)];
                }
            }
            out[idx] = if self.k == 0 { c(1.0, 0.0) } else { sub.determinant() };
        }
        out
    }

    /// Coefficient of the (possibly unsorted) index list, with sign.
    fn coeff(&self, w: &CVec, idx: &[usize]) -> C64 {
        let mut t = idx.to_vec();
        let sign = sort_sign(&mut t);
        if sign == 0.0 {
            return c(0.0, 0.0);
        }
        match self.index(&t) {
            Some(i) => w[i] * sign,
            None => c(0.0, 0.0),
        }
    }

    /// Largest violation of the quadratic Plücker relations, relative to
    /// |w|^2. Zero for decomposable k-vectors.
    pub fn plucker_residual(&self, w: &CVec) -> f64 {
        let k = self.k;
        let m = self.m;
        if k <= 1 || k + 1 >= m {
            return 0.0;
        }
        let norm2 = w.norm_squared();
        if norm2 == 0.0 {
            return 0.0;
        }
        let small = ExteriorPower::subsets_of(m, k - 1);
        let large = ExteriorPower::subsets_of(m, k + 1);
        let mut worst: f64 = 0.0;
        for i_set in &small {
            for j_set in &large {
                let mut acc = c(0.0, 0.0);
                for l in 0..(k + 1) {
                    let mut left = i_set.clone();
                    left.push(j_set[l]);
                    let right: Vec<usize> = j_set.iter().enumerate().filter(|(p, _)| *p != l).map(|(_, &v)| v).collect();
                    let sgn = if l % 2 == 0 { 1.0 } else { -1.0 };
                    acc += self.coeff(w, &left) * self.coeff(w, &right) * sgn;
                }
                worst = worst.max(acc.norm());
            }
        }
        worst / norm2
    }

    fn subsets_of(m: usize, k: usize) -> Vec<Vec<usize>> {
        ExteriorPower::new(m, k).subsets
    }
}

fn mask(s: &[usize]) -> usize {
    s.iter().fold(0usize, |acc, &i| acc | (1 << i))
}

/// Sorts in place and returns the permutation sign (0 on repeated entries).
fn sort_sign(t: &mut [usize]) -> f64 {
    let mut sign = 1.0;
    for i in 0..t.len() {
        for j in 0..t.len() - 1 - i {
            if t[j] > t[j + 1] {
                t.swap(j, j + 1);
                sign = -sign;
            } else if t[j] == t[j + 1] {
                return 0.0;
            }
        }
    }
    if t.windows(2).any(|w| w[0] == w[1]) {
        return 0.0;
    }
    sign
}

/// Top-degree pairing `det[A | B]` of a p-vector and an (m-p)-vector, given
/// as Plücker coordinates of the column spans of A and B.
pub fn pair(left: &ExteriorPower, a: &CVec, right: &ExteriorPower, b: &CVec) -> C64 {
    assert_eq!(left.m, right.m);
    assert_eq!(left.k + right.k, left.m);
    let m = left.m;
    let mut acc = c(0.0, 0.0);
    for (idx, s) in left.subsets.iter().enumerate() {
        let comp: Vec<usize> = (0..m).filter(|i| !s.contains(i)).collect();
        let j = right.index(&comp).expect("complement index");
        let inversions: usize = s.iter().enumerate().map(|(pos, &v)| v - pos).sum();
        let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
        acc += a[idx] * b[j] * sign;
    }
    acc
}

/// Real orthonormal basis of a conjugation-invariant subspace spanned by
/// the complex columns of `v`.
pub fn real_basis(v: &CMat) -> Result<DMatrix<f64>> {
    let m = v.nrows();
    let k = v.ncols();
    if k == 0 || m == 0 {
        return Ok(DMatrix::zeros(m, k));
    }
    let mut stacked = DMatrix::<f64>::zeros(m, 2 * k);
    for j in 0..k {
        for i in 0..m {
            stacked[(i, j)] = v[(i, j)].re;
            stacked[(i, k + j)] = v[(i, j)].im;
        }
    }
    let svd = nalgebra::linalg::SVD::new(stacked, true, false);
    let u = svd.u.ok_or_else(|| Error::Structure("SVD failed".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());
    if k > 0 && svd.singular_values[order[k - 1]] < 1e-8 {
        return Err(Error::Structure("subspace is not conjugation invariant".into()));
    }
    let mut out = DMatrix::<f64>::zeros(m, k);
    for (j, &o) in order.iter().take(k).enumerate() {
        out.set_column(j, &u.column(o));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_matrix(n: usize, seed: u64) -> CMat {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        CMat::from_fn(n, n, |_, _| c(next(), next()))
    }

    #[test]
    fn schur_reconstructs_and_is_triangular() {
        for n in [2, 3, 4, 7] {
            let m = random_matrix(n, n as u64);
            let (q, t) = schur(&m).unwrap();
            let rec = &q * &t * q.adjoint();
            assert!((rec - &m).norm() < 1e-12 * m.norm().max(1.0));
            for j in 0..n {
                for i in (j + 1)..n {
                    assert_eq!(t[(i, j)], c(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn real_matrix_with_complex_pair() {
        let m = to_complex(&DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 2.0]));
        let mut ev = eigenvalues(&m).unwrap();
        ev.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        assert!((ev[0] - c(0.0, -1.0)).norm() < 1e-12);
        assert!((ev[1] - c(0.0, 1.0)).norm() < 1e-12);
        assert!((ev[2] - c(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn reorder_preserves_similarity() {
        let m = random_matrix(5, 11);
        let (q, t) = schur(&m).unwrap();
        let sel: Vec<bool> = (0..5).map(|i| t[(i, i)].re > 0.0).collect();
        let g = SpectralGroup::from_schur(q, t, &sel).unwrap();
        let rec = &g.q * &g.t * g.q.adjoint();
        assert!((rec - &m).norm() < 1e-12);
        for ev in g.group_eigenvalues() {
            assert!(ev.re > 0.0);
        }
        let p = g.projector();
        assert!((&p * &p - &p).norm() < 1e-10);
        assert!((&p * &m - &m * &p).norm() < 1e-10);
        let basis = g.basis();
        assert!((&p * &basis - &basis).norm() < 1e-10);
    }

    #[test]
    fn kato_direction_matches_projector_derivative() {
        let a = random_matrix(4, 3);
        let b = random_matrix(4, 5);
        let lam = c(0.3, 0.1);
        let h = 1e-5;
        let make = |l: C64| -> SpectralGroup {
            let g = &a + &b * l;
            SpectralGroup::from_predicate(&g, |e| e.re > 0.0).unwrap()
        };
        let g0 = make(lam);
        let dp = (make(lam + h).projector() - make(lam - h).projector()) / c(2.0 * h, 0.0);
        let p = g0.projector();
        let r = g0.basis();
        let kato = g0.kato_direction(&b, &r).unwrap();
        let expected = (&dp * &p - &p * &dp) * &r;
        assert!((kato - expected).norm() < 1e-7);
    }

    #[test]
    fn compound_matches_derivation_rule() {
        let a = random_matrix(4, 7);
        let ep = ExteriorPower::new(4, 2);
        let v = random_matrix(4, 8).columns(0, 2).into_owned();
        // d/dt wedge(exp(tA) v) at t=0 equals A^(2) wedge(v)
        let h = 1e-6;
        let vp = &v + &a * &v * c(h, 0.0);
        let vm = &v - &a * &v * c(h, 0.0);
        let fd = (ep.wedge(&vp) - ep.wedge(&vm)) / c(2.0 * h, 0.0);
        let exact = ep.apply(&a, &ep.wedge(&v));
        assert!((fd - &exact).norm() < 1e-8);
        let dense = ep.compound(&a) * ep.wedge(&v);
        assert!((dense - exact).norm() < 1e-12);
    }

    #[test]
    fn pairing_equals_determinant() {
        let m = random_matrix(5, 9);
        for p in 0..=5 {
            let left = ExteriorPower::new(5, p);
            let right = ExteriorPower::new(5, 5 - p);
            let a = m.columns(0, p).into_owned();
            let b = m.columns(p, 5 - p).into_owned();
            let d = pair(&left, &left.wedge(&a), &right, &right.wedge(&b));
            assert!((d - m.determinant()).norm() < 1e-12);
        }
    }

    #[test]
    fn plucker_detects_nondecomposable() {
        let ep = ExteriorPower::new(4, 2);
        let v = random_matrix(4, 2).columns(0, 2).into_owned();
        assert!(ep.plucker_residual(&ep.wedge(&v)) < 1e-14);
        // e1^e2 + e3^e4 is not decomposable
        let mut w = CVec::zeros(6);
        w[ep.index(&[0, 1]).unwrap()] = c(1.0, 0.0);
        w[ep.index(&[2, 3]).unwrap()] = c(1.0, 0.0);
        assert!(ep.plucker_residual(&w) > 0.1);
    }

    #[test]
    fn real_basis_of_conjugate_pair() {
        let m = to_complex(&DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 2.0]));
        let g = SpectralGroup::from_predicate(&m, |e| e.re < 1.0).unwrap();
        let rb = real_basis(&g.basis()).unwrap();
        assert!(rb[(2, 0)].abs() < 1e-12 && rb[(2, 1)].abs() < 1e-12);
        let gram = rb.transpose() * &rb;
        assert!((gram - DMatrix::identity(2, 2)).norm() < 1e-12);
    }
}

/// Real banded matrix with LU factorization by partial pivoting.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl);
        i * self.width + (j + self.kl - i)
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band");
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl >= i && j <= i + self.ku + self.kl {
            self.data[self.slot(i, j)]
        } else {
            0.0
        }
    }

    /// Solves `a x = rhs`, consuming the matrix.
    pub fn solve(mut self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let mut b = rhs.to_vec();
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in (k + 1)..=last_row {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= 1e-14 * scale {
                return Err(Error::Convergence {
                    msg: format!("singular banded matrix at column {k}"),
                    residual: f64::NAN,
                });
            }
            let last_col = (k + ku + kl).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let a = self.slot(k, j);
                    let bb = self.slot(p, j);
                    self.data.swap(a, bb);
                }
                b.swap(k, p);
            }
            let piv = self.data[self.slot(k, k)];
            for i in (k + 1)..=last_row {
                let sik = self.slot(i, k);
                let factor = self.data[sik] / piv;
                if factor == 0.0 {
                    continue;
                }
                self.data[sik] = 0.0;
                for j in (k + 1)..=last_col {
                    let skj = self.data[self.slot(k, j)];
                    let sij = self.slot(i, j);
                    self.data[sij] -= factor * skj;
                }
                b[i] -= factor * b[k];
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + ku + kl).min(n - 1);
            let mut acc = b[k];
            for j in (k + 1)..=last_col {
                acc -= self.data[self.slot(k, j)] * b[j];
            }
            b[k] = acc / self.data[self.slot(k, k)];
        }
        Ok(b)
    }
}

#[cfg(test)]
mod band_tests {
    use super::*;

    #[test]
    fn banded_solve_matches_dense() {
        let n = 40;
        let (kl, ku) = (3, 4);
        let mut band = BandMatrix::new(n, kl, ku);
        let mut dense = DMatrix::<f64>::zeros(n, n);
        let mut s: u64 = 17;
        for i in 0..n {
            for j in 0..n {
                if band.in_band(i, j) {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    // weak diagonal forces pivoting
                    let v = ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5 + if i == j { 0.01 } else { 0.0 };
                    band.add(i, j, v);
                    dense[(i, j)] = v;
                }
            }
        }
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = band.solve(&rhs).unwrap();
        let xv = DVector::from_vec(x);
        let r = &dense * &xv - DVector::from_vec(rhs);
        assert!(r.norm() < 1e-9);
    }
}
