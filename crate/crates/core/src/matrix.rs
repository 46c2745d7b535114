//! Matrices of scalars and the parametrizing matrix of an affine subspace.

use std::path::Path;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::ball::Ball;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MATRIX_FORMAT: &str = "affinelab-matrix/1";

/// Dense row-major matrix of scalars.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    entries: Vec<Scalar>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<Scalar>) -> Result<Matrix> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension("matrix needs at least one row and one column".into()));
        }
        if entries.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Ok(Matrix { rows, cols, entries })
    }

    /// Parse entries given row by row as text.
    pub fn parse(rows: &[&[&str]]) -> Result<Matrix> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        if rows.iter().any(|x| x.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        let entries = rows.iter().flat_map(|x| x.iter()).map(|t| Scalar::parse(t)).collect::<Result<_>>()?;
        Matrix::new(r, c, entries)
    }

    pub fn zero(rows: usize, cols: usize) -> Matrix {
        Matrix { rows, cols, entries: vec![Scalar::zero(); rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Scalar {
        &self.entries[i * self.cols + j]
    }

    pub fn entries(&self) -> &[Scalar] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[Scalar] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut entries = Vec::with_capacity(self.entries.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                entries.push(self.get(i, j).clone());
            }
        }
        Matrix { rows: self.cols, cols: self.rows, entries }
    }

    pub fn is_rational(&self) -> bool {
        self.entries.iter().all(Scalar::is_rational)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Scalar::is_zero)
    }

    /// All entries as balls, row-major.
    pub fn balls(&self, prec: u32) -> Result<Vec<Ball>> {
        self.entries.iter().map(|s| s.eval(prec)).collect()
    }

    /// Exact entries when every entry is rational.
    pub fn rationals(&self) -> Option<Vec<BigRational>> {
        self.entries.iter().map(|s| s.as_rational().cloned()).collect()
    }

    /// `M q^T` for an integer vector with one entry per column.
    pub fn apply_int(&self, q: &[i64]) -> Result<Vec<Scalar>> {
        if q.len() != self.cols {
            return Err(Error::Dimension(format!("vector of length {} for {} columns", q.len(), self.cols)));
        }
        Ok((0..self.rows)
            .map(|i| {
                q.iter().enumerate().fold(Scalar::zero(), |acc, (j, &k)| acc.add(&self.get(i, j).mul_int(k)))
            })
            .collect())
    }
}

/// The `(d+1) x m` matrix `A` whose first row is `beta` and whose remaining
/// `d` rows form `A'`; it parametrizes `{(x, (1, x) A) : x in R^d}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamMatrix {
    d: usize,
    m: usize,
    label: Option<String>,
    mat: Matrix,
}

#[derive(Serialize, Deserialize)]
struct MatrixFile {
    format: Option<String>,
    label: Option<String>,
    d: usize,
    m: usize,
    entries: Vec<String>,
}

impl ParamMatrix {
    pub fn new(d: usize, m: usize, entries: Vec<Scalar>) -> Result<ParamMatrix> {
        if d == 0 || m == 0 {
            return Err(Error::Dimension("d and m must be positive".into()));
        }
        Ok(ParamMatrix { d, m, label: None, mat: Matrix::new(d + 1, m, entries)? })
    }

    pub fn from_matrix(mat: Matrix) -> Result<ParamMatrix> {
        if mat.rows() < 2 {
            return Err(Error::Dimension("a parametrizing matrix has at least two rows".into()));
        }
        Ok(ParamMatrix { d: mat.rows() - 1, m: mat.cols(), label: None, mat })
    }

    pub fn parse(rows: &[&[&str]]) -> Result<ParamMatrix> {
        ParamMatrix::from_matrix(Matrix::parse(rows)?)
    }

    pub fn zero(d: usize, m: usize) -> ParamMatrix {
        ParamMatrix { d, m, label: None, mat: Matrix::zero(d + 1, m) }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.d + self.m
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.mat
    }

    pub fn beta(&self) -> &[Scalar] {
        self.mat.row(0)
    }

    /// The block `A'` (rows 1..=d) as its own `d x m` matrix.
    pub fn block(&self) -> Matrix {
        Matrix { rows: self.d, cols: self.m, entries: self.mat.entries[self.m..].to_vec() }
    }

    pub fn get(&self, i: usize, j: usize) -> &Scalar {
        self.mat.get(i, j)
    }

    /// `(q, a + theta1) A`.
    pub fn row_apply(&self, q: i64, a: &[i64], theta1: &[Scalar]) -> Result<Vec<Scalar>> {
        if a.len() != self.d || theta1.len() != self.d {
            return Err(Error::Dimension(format!(
                "expected a and theta1 of length {}, got {} and {}",
                self.d,
                a.len(),
                theta1.len()
            )));
        }
        let coeffs: Vec<Scalar> = std::iter::once(Scalar::from_int(q))
            .chain(a.iter().zip(theta1).map(|(&ai, t)| t.add(&Scalar::from_int(ai))))
            .collect();
        Ok((0..self.m)
            .map(|j| coeffs.iter().enumerate().fold(Scalar::zero(), |acc, (i, c)| acc.add(&c.mul(self.get(i, j)))))
            .collect())
    }

    /// Split an `n`-vector into `(theta1, theta2)`.
    pub fn split_theta<'a>(&self, theta: &'a [Scalar]) -> Result<(&'a [Scalar], &'a [Scalar])> {
        if theta.len() != self.n() {
            return Err(Error::Dimension(format!("theta must have length {}, got {}", self.n(), theta.len())));
        }
        Ok(theta.split_at(self.d))
    }

    pub fn to_toml(&self) -> String {
        let file = MatrixFile {
            format: Some(MATRIX_FORMAT.to_string()),
            label: self.label.clone(),
            d: self.d,
            m: self.m,
            entries: self.mat.entries.iter().map(|s| s.text().to_string()).collect(),
        };
        toml::to_string(&file).expect("matrix serializes")
    }

    pub fn from_toml(text: &str) -> Result<ParamMatrix> {
        let file: MatrixFile = toml::from_str(text).map_err(|e| Error::MatrixFile(e.to_string()))?;
        if let Some(f) = &file.format {
            if f != MATRIX_FORMAT {
                return Err(Error::MatrixFile(format!("unsupported format '{f}'")));
            }
        }
        let entries = file
            .entries
            .iter()
            .map(|t| Scalar::parse(t))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::MatrixFile(e.to_string()))?;
        let mut pm = ParamMatrix::new(file.d, file.m, entries).map_err(|e| Error::MatrixFile(e.to_string()))?;
        pm.label = file.label;
        Ok(pm)
    }

    pub fn load(path: &Path) -> Result<ParamMatrix> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::MatrixFile(format!("{}: {e}", path.display())))?;
        ParamMatrix::from_toml(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(v: &[Scalar]) -> Vec<BigRational> {
        v.iter().map(|s| s.as_rational().unwrap().clone()).collect()
    }

    #[test]
    fn row_apply_examples() {
        let z = ParamMatrix::zero(1, 1);
        let out = z.row_apply(7, &[-3], &[Scalar::parse("1/5").unwrap()]).unwrap();
        assert_eq!(ints(&out), vec![BigRational::from_integer(0.into())]);

        let a = ParamMatrix::parse(&[&["0"], &["1"]]).unwrap();
        let out = a.row_apply(3, &[2], &[Scalar::zero()]).unwrap();
        assert_eq!(ints(&out), vec![BigRational::from_integer(2.into())]);

        let a = ParamMatrix::parse(&[&["1/3"], &["1/2"]]).unwrap();
        let out = a.row_apply(2, &[1], &[Scalar::zero()]).unwrap();
        assert_eq!(ints(&out), vec![BigRational::new(7.into(), 6.into())]);

        assert!(a.row_apply(2, &[1, 2], &[Scalar::zero()]).is_err());
    }

    #[test]
    fn file_round_trip_is_bit_exact() {
        let a = ParamMatrix::parse(&[&["1/3", "0.1"], &["(1+sqrt(5))/2", "-7/9"], &["123456789/1000000007", "2"]])
            .unwrap()
            .with_label("mixed");
        let text = a.to_toml();
        let b = ParamMatrix::from_toml(&text).unwrap();
        assert_eq!(a, b);
        assert_eq!(b.label(), Some("mixed"));
        assert_eq!(b.get(2, 0).as_rational(), a.get(2, 0).as_rational());
        assert_eq!(b.to_toml(), text);
    }

    #[test]
    fn file_errors() {
        assert!(ParamMatrix::from_toml("d = 1\nm = 1\nentries = [\"1\"]").is_err());
        assert!(ParamMatrix::from_toml("d = 1\nm = 1\nentries = [\"1\", \"sqrt(\"]").is_err());
        assert!(ParamMatrix::from_toml("format = \"other\"\nd = 1\nm = 1\nentries = [\"1\", \"2\"]").is_err());
    }

    #[test]
    fn block_and_transpose() {
        let a = ParamMatrix::parse(&[&["1", "2"], &["3", "4"], &["5", "6"]]).unwrap();
        assert_eq!((a.d(), a.m(), a.n()), (2, 2, 4));
        let b = a.block();
        assert_eq!((b.rows(), b.cols()), (2, 2));
        assert_eq!(b.get(1, 0).text(), "5");
        let t = a.matrix().transpose();
        assert_eq!((t.rows(), t.cols()), (2, 3));
        assert_eq!(t.get(1, 2).text(), "6");
    }
}
