//! Monomial observable dictionaries: lifting to the observable space and the
//! coordinate projection back to state space.
//!
//! Observable 0 is the constant function, observables 1..=n the coordinate
//! functions, and the remainder all monomials up to `max_degree` in graded
//! lexicographic order. Lifted vectors are plain `DVector<f64>` of length
//! `M + 1` with the constant slot first.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dictionary {
    state_dim: usize,
    max_degree: usize,
    /// One exponent multi-index per observable, in evaluation order.
    exponents: Vec<Vec<u32>>,
}

/// Serializable descriptor; the exponent table is rebuilt deterministically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictionaryDescriptor {
    pub state_dim: usize,
    pub max_degree: usize,
}

impl Dictionary {
    /// All monomials `x1^p1 ... xn^pn` with total degree at most `max_degree`,
    /// ordered constant-first, coordinates-next, then graded-lex.
    pub fn monomials(state_dim: usize, max_degree: usize) -> Result<Self> {
        if state_dim == 0 {
            return Err(Error::Config("dictionary needs at least one state".into()));
        }
        if max_degree == 0 {
            return Err(Error::Config("dictionary degree must be at least 1".into()));
        }
        let mut exponents = Vec::new();
        for degree in 0..=max_degree {
            push_degree_block(&mut exponents, state_dim, degree as u32);
        }
        Ok(Self {
            state_dim,
            max_degree,
            exponents,
        })
    }

    pub fn descriptor(&self) -> DictionaryDescriptor {
        DictionaryDescriptor {
            state_dim: self.state_dim,
            max_degree: self.max_degree,
        }
    }

    pub fn from_descriptor(d: &DictionaryDescriptor) -> Result<Self> {
        Self::monomials(d.state_dim, d.max_degree)
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Number of observables, M + 1 (constant included).
    pub fn size(&self) -> usize {
        self.exponents.len()
    }

    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    /// Evaluate all observables at `x`: the lifted vector `z` with `z[0] = 1`.
    pub fn lift(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.state_dim {
            return Err(Error::Dimension {
                context: "lift",
                expected: self.state_dim,
                got: x.len(),
            });
        }
        let mut z = DVector::zeros(self.size());
        for (j, exps) in self.exponents.iter().enumerate() {
            z[j] = monomial(exps, x);
        }
        Ok(z)
    }

    /// Coordinate projection: entries 1..=n of a lifted vector.
    pub fn project(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        if z.len() != self.size() {
            return Err(Error::Dimension {
                context: "project",
                expected: self.size(),
                got: z.len(),
            });
        }
        Ok(DVector::from_fn(self.state_dim, |i, _| z[i + 1]))
    }

    /// Jacobian of the lifting: row j holds the gradient of observable j.
    pub fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        if x.len() != self.state_dim {
            return Err(Error::Dimension {
                context: "lift jacobian",
                expected: self.state_dim,
                got: x.len(),
            });
        }
        let mut jac = DMatrix::zeros(self.size(), self.state_dim);
        for (j, exps) in self.exponents.iter().enumerate() {
            for k in 0..self.state_dim {
                if exps[k] == 0 {
                    continue;
                }
                let mut partial = exps[k] as f64;
                for (l, &p) in exps.iter().enumerate() {
                    let p = if l == k { p - 1 } else { p };
                    partial *= x[l].powi(p as i32);
                }
                jac[(j, k)] = partial;
            }
        }
        Ok(jac)
    }
}

/// Append all exponent tuples of a fixed total degree, lexicographically
/// descending (leading variables take the highest powers first); this puts
/// the coordinate functions at positions 1..=n in natural order.
fn push_degree_block(out: &mut Vec<Vec<u32>>, n: usize, degree: u32) {
    fn recurse(out: &mut Vec<Vec<u32>>, prefix: &mut Vec<u32>, remaining: u32, slots: usize) {
        if slots == 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for p in (0..=remaining).rev() {
            prefix.push(p);
            recurse(out, prefix, remaining - p, slots - 1);
            prefix.pop();
        }
    }
    recurse(out, &mut Vec::with_capacity(n), degree, n);
}

fn monomial(exps: &[u32], x: &DVector<f64>) -> f64 {
    exps.iter()
        .zip(x.iter())
        .fold(1.0, |acc, (&p, &xi)| acc * xi.powi(p as i32))
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    (1..=k).fold(1, |acc, i| acc * (n - k + i) / i)
}

/// Expected dictionary size C(n + max_degree, n).
pub fn monomial_count(state_dim: usize, max_degree: usize) -> usize {
    binomial(state_dim + max_degree, state_dim)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn sizes_match_the_binomial_count() {
        assert_eq!(Dictionary::monomials(2, 3).unwrap().size(), 10);
        assert_eq!(Dictionary::monomials(4, 2).unwrap().size(), 15);
        assert_eq!(monomial_count(2, 3), 10);
        assert_eq!(monomial_count(4, 2), 15);
    }

    #[test]
    fn smallest_dictionary_is_constant_plus_coordinate() {
        let d = Dictionary::monomials(1, 1).unwrap();
        assert_eq!(d.exponents(), &[vec![0], vec![1]]);
        let z = d.lift(&vec(&[3.5])).unwrap();
        assert_eq!(z, vec(&[1.0, 3.5]));
    }

    #[test]
    fn layout_is_constant_then_coordinates_then_graded_lex() {
        let d = Dictionary::monomials(2, 2).unwrap();
        let expected: Vec<Vec<u32>> = vec![
            vec![0, 0],
            vec![1, 0],
            vec![0, 1],
            vec![2, 0],
            vec![1, 1],
            vec![0, 2],
        ];
        assert_eq!(d.exponents(), expected.as_slice());
    }

    #[test]
    fn lift_evaluates_monomials() {
        let d = Dictionary::monomials(2, 2).unwrap();
        let z = d.lift(&vec(&[2.0, 3.0])).unwrap();
        assert_eq!(z, vec(&[1.0, 2.0, 3.0, 4.0, 6.0, 9.0]));
    }

    #[test]
    fn lift_at_origin_leaves_only_the_constant() {
        let d = Dictionary::monomials(3, 3).unwrap();
        let z = d.lift(&DVector::zeros(3)).unwrap();
        assert_eq!(z[0], 1.0);
        assert!(z.iter().skip(1).all(|&v| v == 0.0));
    }

    #[test]
    fn project_selects_the_coordinate_slots() {
        let d = Dictionary::monomials(2, 2).unwrap();
        let z = vec(&[1.0, 5.0, 7.0, 9.0, 11.0, 13.0]);
        assert_eq!(d.project(&z).unwrap(), vec(&[5.0, 7.0]));
        // First column of the projection is zero: the constant basis vector
        // maps to the zero state.
        let e0 = vec(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(d.project(&e0).unwrap(), vec(&[0.0, 0.0]));
    }

    #[test]
    fn project_after_lift_is_the_identity_exactly() {
        let d = Dictionary::monomials(3, 2).unwrap();
        let mut state = 0.37_f64;
        for _ in 0..100 {
            // Cheap deterministic pseudo-random states.
            state = (state * 997.0).sin();
            let x = vec(&[state, state * 2.0 - 1.0, -state]);
            assert_eq!(d.project(&d.lift(&x).unwrap()).unwrap(), x);
        }
    }

    #[test]
    fn dimension_mismatches_are_reported() {
        let d = Dictionary::monomials(2, 2).unwrap();
        assert!(matches!(
            d.lift(&vec(&[1.0])).unwrap_err(),
            Error::Dimension { .. }
        ));
        assert!(matches!(
            d.project(&vec(&[1.0, 2.0])).unwrap_err(),
            Error::Dimension { .. }
        ));
    }

    #[test]
    fn construction_is_deterministic() {
        let a = Dictionary::monomials(3, 4).unwrap();
        let b = Dictionary::monomials(3, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let d = Dictionary::monomials(2, 3).unwrap();
        let x = vec(&[0.8, -1.3]);
        let jac = d.jacobian(&x).unwrap();
        let h = 1e-6;
        for k in 0..2 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let fd = (d.lift(&xp).unwrap() - d.lift(&xm).unwrap()) / (2.0 * h);
            for j in 0..d.size() {
                assert!(
                    (jac[(j, k)] - fd[j]).abs() < 1e-6,
                    "observable {j}, coordinate {k}"
                );
            }
        }
    }
}
