//! Dense matrices over jets and over scalars.

use serde::{Deserialize, Serialize};

use crate::coeff::Coeff;
use crate::error::{Error, Result};
use crate::jet::{Jet, JetDoc, Monomial};
use crate::polymap::PolyMap;

pub type ScalarMatrix = Vec<Vec<Coeff>>;

/// Row-major matrix whose entries share one jet shape.
#[derive(Clone, Debug, PartialEq)]
pub struct JetMatrix {
    rows: usize,
    cols: usize,
    num_vars: usize,
    order: u32,
    entries: Vec<Jet>,
}

/// A nonzero entry of a residual matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct EntryResidual {
    pub row: usize,
    pub col: usize,
    pub exponents: Vec<u32>,
    pub value: Coeff,
}

impl JetMatrix {
    pub fn from_rows(rows: Vec<Vec<Jet>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if r == 0 || c == 0 {
            return Err(Error::Shape("empty matrix".into()));
        }
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Shape("ragged matrix rows".into()));
        }
        let num_vars = rows[0][0].num_vars();
        let order = rows[0][0].order();
        let entries: Vec<Jet> = rows.into_iter().flatten().collect();
        if entries.iter().any(|e| e.num_vars() != num_vars || e.order() != order) {
            return Err(Error::Shape("matrix entries with different jet shapes".into()));
        }
        Ok(JetMatrix {
            rows: r,
            cols: c,
            num_vars,
            order,
            entries,
        })
    }

    pub fn zeros(rows: usize, cols: usize, num_vars: usize, order: u32) -> Self {
        JetMatrix {
            rows,
            cols,
            num_vars,
            order,
            entries: vec![Jet::zero(num_vars, order); rows * cols],
        }
    }

    pub fn identity(n: usize, num_vars: usize, order: u32) -> Self {
        let mut m = JetMatrix::zeros(n, n, num_vars, order);
        for i in 0..n {
            m.entries[i * n + i] = Jet::one(num_vars, order);
        }
        m
    }

    pub fn from_scalars(s: &ScalarMatrix, num_vars: usize, order: u32) -> Result<Self> {
        JetMatrix::from_rows(
            s.iter()
                .map(|row| row.iter().map(|c| Jet::constant(num_vars, order, c.clone())).collect())
                .collect(),
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn get(&self, r: usize, c: usize) -> &Jet {
        &self.entries[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Jet) {
        assert_eq!((v.num_vars(), v.order()), (self.num_vars, self.order));
        self.entries[r * self.cols + c] = v;
    }

    pub fn entries(&self) -> &[Jet] {
        &self.entries
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn map(&self, f: impl Fn(&Jet) -> Jet) -> JetMatrix {
        let entries: Vec<Jet> = self.entries.iter().map(f).collect();
        let (num_vars, order) = entries
            .first()
            .map_or((self.num_vars, self.order), |e| (e.num_vars(), e.order()));
        JetMatrix {
            rows: self.rows,
            cols: self.cols,
            num_vars,
            order,
            entries,
        }
    }

    pub fn try_map(&self, f: impl Fn(&Jet) -> Result<Jet>) -> Result<JetMatrix> {
        let entries = self.entries.iter().map(f).collect::<Result<Vec<_>>>()?;
        let (num_vars, order) = (entries[0].num_vars(), entries[0].order());
        Ok(JetMatrix {
            rows: self.rows,
            cols: self.cols,
            num_vars,
            order,
            entries,
        })
    }

    fn same_shape(&self, other: &JetMatrix) -> Result<()> {
        if (self.rows, self.cols, self.num_vars, self.order) != (other.rows, other.cols, other.num_vars, other.order) {
            return Err(Error::Shape(format!(
                "{}x{} matrix vs {}x{} matrix (or differing jet shapes)",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &JetMatrix) -> Result<JetMatrix> {
        self.same_shape(other)?;
        let mut out = self.clone();
        for (a, b) in out.entries.iter_mut().zip(&other.entries) {
            *a = &*a + b;
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &JetMatrix) -> Result<JetMatrix> {
        self.same_shape(other)?;
        let mut out = self.clone();
        for (a, b) in out.entries.iter_mut().zip(&other.entries) {
            *a = &*a - b;
        }
        Ok(out)
    }

    pub fn try_mul(&self, other: &JetMatrix) -> Result<JetMatrix> {
        if self.cols != other.rows || self.num_vars != other.num_vars || self.order != other.order {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = JetMatrix::zeros(self.rows, other.cols, self.num_vars, self.order);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = Jet::zero(self.num_vars, self.order);
                for k in 0..self.cols {
                    let a = self.get(i, k);
                    let b = other.get(k, j);
                    if a.is_zero() || b.is_zero() {
                        continue;
                    }
                    acc = &acc + &(a * b);
                }
                out.entries[i * other.cols + j] = acc;
            }
        }
        Ok(out)
    }

    /// Matrix times a column of jets.
    pub fn apply(&self, v: &[Jet]) -> Result<Vec<Jet>> {
        if v.len() != self.cols {
            return Err(Error::Dimension {
                expected: self.cols,
                found: v.len(),
            });
        }
        Ok((0..self.rows)
            .map(|i| {
                (0..self.cols).fold(Jet::zero(self.num_vars, self.order), |acc, k| {
                    &acc + &(self.get(i, k) * &v[k])
                })
            })
            .collect())
    }

    pub fn scale(&self, c: &Coeff) -> JetMatrix {
        self.map(|e| e.scale(c))
    }

    pub fn scale_jet(&self, f: &Jet) -> JetMatrix {
        self.map(|e| e * f)
    }

    pub fn transpose(&self) -> JetMatrix {
        let mut entries = Vec::with_capacity(self.entries.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                entries.push(self.get(r, c).clone());
            }
        }
        JetMatrix {
            rows: self.cols,
            cols: self.rows,
            num_vars: self.num_vars,
            order: self.order,
            entries,
        }
    }

    pub fn with_order(&self, order: u32) -> JetMatrix {
        self.map(|e| e.with_order(order))
    }

    pub fn partial(&self, var: usize) -> Result<JetMatrix> {
        self.try_map(|e| e.partial(var))
    }

    /// Entrywise pull-back by a map.
    pub fn compose(&self, g: &PolyMap) -> Result<JetMatrix> {
        self.try_map(|e| crate::polymap::compose(e, g))
    }

    pub fn eval(&self, point: &[Coeff]) -> Result<ScalarMatrix> {
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.get(r, c).eval(point)).collect())
            .collect()
    }

    pub fn is_negligible(&self, tol: f64) -> bool {
        self.entries.iter().all(|e| e.is_negligible(tol))
    }

    /// Nonzero coefficients, optionally restricted to the monomials accepted by `region`.
    pub fn residuals(&self, tol: f64, region: impl Fn(&Monomial) -> bool) -> Vec<EntryResidual> {
        let mut out = Vec::new();
        for r in 0..self.rows {
            for c in 0..self.cols {
                for (m, v) in self.get(r, c).terms() {
                    if region(m) && !v.is_negligible(tol) {
                        out.push(EntryResidual {
                            row: r,
                            col: c,
                            exponents: m.exps().to_vec(),
                            value: v.clone(),
                        });
                    }
                }
            }
        }
        out
    }

    /// Determinant by cofactor expansion (intended for small matrices).
    pub fn det(&self) -> Result<Jet> {
        if !self.is_square() {
            return Err(Error::Shape("determinant of a non-square matrix".into()));
        }
        let idx: Vec<usize> = (0..self.cols).collect();
        Ok(self.minor_det(0, &idx))
    }

    fn minor_det(&self, row: usize, cols: &[usize]) -> Jet {
        if cols.len() == 1 {
            return self.get(row, cols[0]).clone();
        }
        let mut acc = Jet::zero(self.num_vars, self.order);
        for (k, &c) in cols.iter().enumerate() {
            let a = self.get(row, c);
            if a.is_zero() {
                continue;
            }
            let rest: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
            let term = a * &self.minor_det(row + 1, &rest);
            acc = if k % 2 == 0 { &acc + &term } else { &acc - &term };
        }
        acc
    }

    pub fn to_exact(&self) -> JetMatrix {
        self.map(Jet::to_exact)
    }

    pub fn to_float(&self) -> JetMatrix {
        self.map(Jet::to_float)
    }

    pub fn to_doc(&self) -> MatrixDoc {
        MatrixDoc(
            (0..self.rows)
                .map(|r| (0..self.cols).map(|c| self.get(r, c).to_doc()).collect())
                .collect(),
        )
    }

    pub fn from_doc(doc: &MatrixDoc, num_vars: usize, order: u32) -> Result<Self> {
        JetMatrix::from_rows(
            doc.0
                .iter()
                .map(|row| row.iter().map(|e| Jet::from_doc(e, num_vars, order)).collect())
                .collect::<Result<Vec<_>>>()?,
        )
    }
}

/// Row-major list of rows of jets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixDoc(pub Vec<Vec<JetDoc>>);

/// Gauss-Jordan inverse; `None` when singular (pivots judged with `tol` in float mode).
pub fn scalar_inverse(m: &ScalarMatrix, tol: f64) -> Option<ScalarMatrix> {
    let n = m.len();
    if m.iter().any(|r| r.len() != n) {
        return None;
    }
    let mut a: Vec<Vec<Coeff>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { Coeff::one() } else { Coeff::zero() }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_negligible(tol))?;
        a.swap(col, pivot);
        let inv = a[col][col].inv()?;
        for v in a[col].iter_mut() {
            *v = v.mul(&inv);
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                let pivot_row = a[col].clone();
                for (v, p) in a[r].iter_mut().zip(&pivot_row) {
                    *v = v.sub(&f.mul(p));
                }
            }
        }
    }
    Some(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Rank of the span of `vectors` (each of equal length).
pub fn scalar_rank(vectors: &[Vec<Coeff>], tol: f64) -> usize {
    let mut basis = EchelonBasis::new(tol);
    for v in vectors {
        basis.insert(v);
    }
    basis.dim()
}

pub fn scalar_det(m: &ScalarMatrix, tol: f64) -> Coeff {
    let n = m.len();
    let mut a = m.clone();
    let mut det = Coeff::one();
    for col in 0..n {
        let Some(pivot) = (col..n).find(|&r| !a[r][col].is_negligible(tol)) else {
            return Coeff::zero();
        };
        if pivot != col {
            a.swap(col, pivot);
            det = det.neg();
        }
        det = det.mul(&a[col][col]);
        let inv = a[col][col].inv().expect("nonzero pivot");
        for r in col + 1..n {
            if a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].mul(&inv);
            let pivot_row = a[col].clone();
            for (v, p) in a[r].iter_mut().zip(&pivot_row) {
                *v = v.sub(&f.mul(p));
            }
        }
    }
    det
}

pub fn scalar_mat_vec(m: &ScalarMatrix, v: &[Coeff]) -> Vec<Coeff> {
    m.iter()
        .map(|row| row.iter().zip(v).fold(Coeff::zero(), |acc, (a, b)| acc.add(&a.mul(b))))
        .collect()
}

/// Incrementally maintained row-echelon basis, used for span growth.
#[derive(Clone, Debug)]
pub struct EchelonBasis {
    tol: f64,
    rows: Vec<(usize, Vec<Coeff>)>,
}

impl EchelonBasis {
    pub fn new(tol: f64) -> Self {
        EchelonBasis { tol, rows: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Reduces `v` against the basis; returns `true` when it enlarged the span.
    pub fn insert(&mut self, v: &[Coeff]) -> bool {
        let mut w = v.to_vec();
        for (p, row) in &self.rows {
            if w[*p].is_zero() {
                continue;
            }
            let f = w[*p].clone();
            for (x, r) in w.iter_mut().zip(row) {
                *x = x.sub(&f.mul(r));
            }
        }
        let Some(p) = w.iter().position(|x| !x.is_negligible(self.tol)) else {
            return false;
        };
        let inv = w[p].inv().expect("pivot is nonzero");
        for x in w.iter_mut() {
            *x = x.mul(&inv);
        }
        // keep reduced form so later reductions stay simple
        for (_, row) in self.rows.iter_mut() {
            if row[p].is_zero() {
                continue;
            }
            let f = row[p].clone();
            for (x, r) in row.iter_mut().zip(&w) {
                *x = x.sub(&f.mul(r));
            }
        }
        self.rows.push((p, w));
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(v: i64) -> Coeff {
        Coeff::from_i64(v)
    }

    #[test]
    fn inverse_of_shear() {
        let m = vec![vec![c(1), c(1)], vec![c(0), c(1)]];
        let inv = scalar_inverse(&m, 0.0).unwrap();
        assert_eq!(inv, vec![vec![c(1), c(-1)], vec![c(0), c(1)]]);
        assert!(scalar_inverse(&vec![vec![c(1), c(2)], vec![c(2), c(4)]], 0.0).is_none());
    }

    #[test]
    fn rank_and_det() {
        let vs = vec![vec![c(1), c(0)], vec![c(2), c(0)]];
        assert_eq!(scalar_rank(&vs, 0.0), 1);
        assert_eq!(scalar_det(&vec![vec![c(0), c(1)], vec![c(1), c(0)]], 0.0), c(-1));
        assert_eq!(scalar_det(&vec![vec![c(2), c(3)], vec![c(4), c(5)]], 0.0), c(-2));
    }

    #[test]
    fn jet_matrix_product_and_det() {
        // [[1, t z], [0, 1]] times its inverse [[1, -t z], [0, 1]]
        let t = Jet::var(2, 4, 0);
        let z = Jet::var(2, 4, 1);
        let tz = &t * &z;
        let one = Jet::one(2, 4);
        let zero = Jet::zero(2, 4);
        let g = JetMatrix::from_rows(vec![vec![one.clone(), tz.clone()], vec![zero.clone(), one.clone()]]).unwrap();
        let h = JetMatrix::from_rows(vec![vec![one.clone(), -&tz], vec![zero, one]]).unwrap();
        assert_eq!(g.try_mul(&h).unwrap(), JetMatrix::identity(2, 2, 4));
        assert_eq!(g.det().unwrap(), Jet::one(2, 4));
    }
}
