//! Full-rank sublattices of Z^d: Hermite normal form, coset representatives and folding.

use num_integer::Integer;
use thiserror::Error;

use crate::topology::Vector;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LatticeError {
    #[error("expected {expected} vectors of dimension {expected}, got {got}")]
    Shape { expected: usize, got: String },
    #[error("period vectors are linearly dependent")]
    Singular,
}

/// A rank-d sublattice of Z^d, stored as an upper-triangular row basis with positive diagonal.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Lattice {
    generators: Vec<Vector>,
    hnf: Vec<Vec<i64>>,
}

fn hermite(mut rows: Vec<Vec<i64>>, d: usize) -> Result<Vec<Vec<i64>>, LatticeError> {
    let n = rows.len();
    for c in 0..d {
        // gcd-eliminate column c below the pivot row c
        for r in c + 1..n {
            while rows[r][c] != 0 {
                if rows[c][c] == 0 || rows[r][c].abs() < rows[c][c].abs() {
                    rows.swap(r, c);
                    continue;
                }
                let q = Integer::div_floor(&rows[r][c], &rows[c][c]);
                for k in 0..d {
                    rows[r][k] -= q * rows[c][k];
                }
            }
        }
        if rows[c][c] == 0 {
            return Err(LatticeError::Singular);
        }
        if rows[c][c] < 0 {
            rows[c].iter_mut().for_each(|x| *x = -*x);
        }
    }
    // reduce entries above each pivot into [0, pivot)
    for c in 0..d {
        for r in 0..c {
            let q = Integer::div_floor(&rows[r][c], &rows[c][c]);
            if q != 0 {
                for k in 0..d {
                    rows[r][k] -= q * rows[c][k];
                }
            }
        }
    }
    Ok(rows)
}

impl Lattice {
    pub fn new(generators: &[Vector]) -> Result<Self, LatticeError> {
        let d = generators.first().map(Vector::dim).unwrap_or(0);
        if d == 0 || generators.len() != d || generators.iter().any(|g| g.dim() != d) {
            let got = generators.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(" ");
            return Err(LatticeError::Shape { expected: d.max(1), got });
        }
        let rows = generators.iter().map(|g| g.coords().iter().map(|&x| x as i64).collect()).collect();
        let hnf = hermite(rows, d)?;
        Ok(Lattice { generators: generators.to_vec(), hnf })
    }

    /// The lattice spanned by k·e_i for every axis.
    pub fn diagonal(d: usize, k: i32) -> Self {
        Self::new(&(0..d).map(|i| Vector::unit(d, i).scale(k)).collect::<Vec<_>>())
            .expect("diagonal lattice is nonsingular")
    }

    pub fn dim(&self) -> usize {
        self.hnf.len()
    }

    pub fn generators(&self) -> &[Vector] {
        &self.generators
    }

    /// Number of cosets of the lattice in Z^d.
    pub fn index(&self) -> usize {
        self.hnf.iter().enumerate().map(|(i, r)| r[i] as usize).product()
    }

    /// Canonical coset representative, lying in the box ∏ [0, h_ii).
    pub fn reduce(&self, v: &Vector) -> Vector {
        let mut w: Vec<i64> = v.coords().iter().map(|&x| x as i64).collect();
        for (i, row) in self.hnf.iter().enumerate() {
            let q = Integer::div_floor(&w[i], &row[i]);
            if q != 0 {
                for (x, r) in w.iter_mut().zip(row) {
                    *x -= q * r;
                }
            }
        }
        Vector(w.into_iter().map(|x| x as i32).collect())
    }

    pub fn contains(&self, v: &Vector) -> bool {
        self.reduce(v).is_zero()
    }

    /// All canonical coset representatives, in lexicographic order.
    pub fn representatives(&self) -> Vec<Vector> {
        let d = self.dim();
        let mut out = vec![Vec::<i32>::new()];
        for i in 0..d {
            let h = self.hnf[i][i] as i32;
            out = out
                .into_iter()
                .flat_map(|p| {
                    (0..h).map(move |x| {
                        let mut q = p.clone();
                        q.push(x);
                        q
                    })
                })
                .collect();
        }
        out.into_iter().map(|c| Vector::from_slice(&c)).collect()
    }
}

/// Coordinates of `v` in the basis `rows` (square, nonsingular), if they are integral.
pub fn integer_coordinates(rows: &[Vector], v: &Vector) -> Option<Vec<i64>> {
    use num_rational::Ratio;
    let d = rows.len();
    // solve c · B = v, i.e. Bᵀ cᵀ = vᵀ
    let mut m: Vec<Vec<Ratio<i64>>> = (0..d)
        .map(|i| {
            let mut row: Vec<Ratio<i64>> = (0..d).map(|j| Ratio::from(rows[j].coords()[i] as i64)).collect();
            row.push(Ratio::from(v.coords()[i] as i64));
            row
        })
        .collect();
    for c in 0..d {
        let p = (c..d).find(|&r| m[r][c] != Ratio::from(0))?;
        m.swap(c, p);
        let piv = m[c][c];
        for k in c..=d {
            m[c][k] /= piv;
        }
        for r in 0..d {
            if r != c && m[r][c] != Ratio::from(0) {
                let f = m[r][c];
                for k in c..=d {
                    let t = m[c][k] * f;
                    m[r][k] -= t;
                }
            }
        }
    }
    m.iter().map(|row| row[d].is_integer().then(|| row[d].to_integer())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[i32]) -> Vector {
        Vector::from_slice(c)
    }

    #[test]
    fn diagonal_lattice() {
        let l = Lattice::diagonal(2, 3);
        assert_eq!(l.index(), 9);
        assert_eq!(l.reduce(&v(&[-1, 7])), v(&[2, 1]));
        assert_eq!(l.representatives().len(), 9);
    }

    #[test]
    fn skew_lattice() {
        let l = Lattice::new(&[v(&[2, 1]), v(&[0, 3])]).unwrap();
        assert_eq!(l.index(), 6);
        let reps = l.representatives();
        for a in &reps {
            assert_eq!(&l.reduce(a), a);
            for b in &reps {
                if a != b {
                    assert!(!l.contains(&(a - b)));
                }
            }
        }
        assert!(l.contains(&v(&[2, 1])));
        assert!(l.contains(&v(&[4, -1])));
        assert!(!l.contains(&v(&[1, 0])));
    }

    #[test]
    fn singular_and_misshapen() {
        assert_eq!(Lattice::new(&[v(&[1, 2]), v(&[2, 4])]), Err(LatticeError::Singular));
        assert!(Lattice::new(&[v(&[1, 2])]).is_err());
    }

    #[test]
    fn coordinates() {
        let b = [v(&[1, 0]), v(&[1, 2])];
        assert_eq!(integer_coordinates(&b, &v(&[3, 4])), Some(vec![1, 2]));
        assert_eq!(integer_coordinates(&b, &v(&[0, 1])), None);
    }
}
