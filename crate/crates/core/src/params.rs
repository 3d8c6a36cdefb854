//! Named parameter tensors, their gradients, and the finite-difference oracle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tape::{Tape, Var};

/// Ordered collection of named learnable tensors.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    entries: Vec<(String, Matrix)>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds or replaces a tensor.
    pub fn insert(&mut self, name: impl Into<String>, value: Matrix) {
        let name = name.into();
        match self.entries.iter_mut().find(|(n, _)| *n == name) {
            Some((_, slot)) => *slot = value,
            None => self.entries.push((name, value)),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        self.entries.iter_mut().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn require(&self, name: &str) -> Result<&Matrix> {
        self.get(name)
            .ok_or_else(|| Error::ParamsMismatch(format!("missing tensor `{name}`")))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.entries.iter().map(|(n, m)| (n.as_str(), m))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Matrix)> {
        self.entries.iter_mut().map(|(n, m)| (n.as_str(), m))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|(_, m)| m.len()).sum()
    }

    /// Records every tensor as a leaf of `tape`.
    pub fn bind(&self, tape: &mut Tape) -> BoundParams {
        BoundParams {
            vars: self
                .entries
                .iter()
                .map(|(name, m)| (name.clone(), tape.leaf(m.clone())))
                .collect(),
        }
    }

    pub fn zeros_like(&self) -> GradientSet {
        GradientSet(
            self.entries
                .iter()
                .map(|(_, m)| Matrix::zeros(m.rows(), m.cols()))
                .collect(),
        )
    }
}

/// Tape handles for a [`ParamStore`], in store order.
#[derive(Clone, Debug)]
pub struct BoundParams {
    vars: Vec<(String, Var)>,
}

impl BoundParams {
    pub fn var(&self, name: &str) -> Result<Var> {
        self.vars
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::ParamsMismatch(format!("missing tensor `{name}`")))
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.vars.iter().map(|(_, v)| *v)
    }
}

/// One gradient tensor per parameter, aligned with [`ParamStore`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSet(pub Vec<Matrix>);

impl GradientSet {
    pub fn global_norm(&self) -> f64 {
        self.0.iter().map(Matrix::sum_squares).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(Matrix::is_finite)
    }

    pub fn scale(&mut self, k: f64) {
        for g in &mut self.0 {
            for v in g.data_mut() {
                *v *= k;
            }
        }
    }

    /// Per-tensor `‖a − b‖∞ / max(1, ‖b‖∞)`, treating `other` as the reference.
    pub fn relative_errors(&self, reference: &GradientSet) -> Result<Vec<f64>> {
        self.0
            .iter()
            .zip(&reference.0)
            .map(|(a, b)| Ok(a.sub(b)?.max_abs() / b.max_abs().max(1.0)))
            .collect()
    }
}

/// Reverse-mode gradient of the scalar `root` with respect to every bound
/// parameter. Parameters the root does not depend on receive exact zeros.
pub fn gradient_of_scalar(tape: &Tape, root: Var, params: &BoundParams) -> Result<GradientSet> {
    let grads = tape.backward(root)?;
    Ok(GradientSet(
        params
            .vars()
            .map(|v| grads.get_or_zeros(v, tape.value(v).shape()))
            .collect(),
    ))
}

/// Central differences `(f(p + eps) − f(p − eps)) / (2 eps)` for every scalar
/// coordinate of every parameter tensor.
pub fn finite_difference_gradient(
    mut f: impl FnMut(&ParamStore) -> Result<f64>,
    params: &ParamStore,
    eps: f64,
) -> Result<GradientSet> {
    if !(eps > 0.0) {
        return Err(Error::config("eps", "must be positive"));
    }
    let mut work = params.clone();
    let mut out = params.zeros_like();
    for (slot, (name, tensor)) in params.entries.iter().enumerate() {
        for i in 0..tensor.len() {
            let original = tensor.data()[i];
            let mut eval = |value: f64, work: &mut ParamStore| -> Result<f64> {
                work.entries[slot].1.data_mut()[i] = value;
                let y = f(work)?;
                if !y.is_finite() {
                    return Err(Error::NonFiniteOracle {
                        param: name.clone(),
                        index: i,
                        value: y,
                    });
                }
                Ok(y)
            };
            let plus = eval(original + eps, &mut work)?;
            let minus = eval(original - eps, &mut work)?;
            work.entries[slot].1.data_mut()[i] = original;
            out.0[slot].data_mut()[i] = (plus - minus) / (2.0 * eps);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_oracle() {
        let mut p = ParamStore::new();
        p.insert("x", Matrix::scalar(3.0));
        let g = finite_difference_gradient(|s| Ok(s.get("x").unwrap().get(0, 0).powi(2)), &p, 1e-5).unwrap();
        assert!((g.0[0].get(0, 0) - 6.0).abs() < 1e-8);
    }

    #[test]
    fn constant_oracle_is_zero() {
        let mut p = ParamStore::new();
        p.insert("x", Matrix::filled(2, 2, 1.5));
        let g = finite_difference_gradient(|_| Ok(4.0), &p, 1e-5).unwrap();
        assert_eq!(g.0[0], Matrix::zeros(2, 2));
    }

    #[test]
    fn oracle_rejects_non_finite() {
        let mut p = ParamStore::new();
        p.insert("x", Matrix::scalar(0.0));
        let err = finite_difference_gradient(|_| Ok(f64::NAN), &p, 1e-5).unwrap_err();
        assert!(matches!(err, Error::NonFiniteOracle { index: 0, .. }));
        assert!(finite_difference_gradient(|_| Ok(0.0), &p, 0.0).is_err());
    }

    #[test]
    fn reverse_mode_matches_oracle_and_zeros_unused() {
        let mut p = ParamStore::new();
        p.insert("w", Matrix::from_rows(&[[0.3, -0.2], [0.1, 0.4]]));
        p.insert("unused", Matrix::filled(1, 3, 2.0));
        let x = Matrix::from_rows(&[[1.0, 2.0], [-1.0, 0.5]]);
        let loss = |s: &ParamStore, tape: &mut Tape, bound: &BoundParams| {
            let xv = tape.leaf(x.clone());
            let h = tape.matmul(xv, bound.var("w")?)?;
            let h = tape.tanh(h);
            Ok::<_, Error>((tape.sum_squares(h), s.len()))
        };
        let mut tape = Tape::new();
        let bound = p.bind(&mut tape);
        let (root, _) = loss(&p, &mut tape, &bound).unwrap();
        let analytic = gradient_of_scalar(&tape, root, &bound).unwrap();
        let numeric = finite_difference_gradient(
            |s| {
                let mut t = Tape::new();
                let b = s.bind(&mut t);
                let (r, _) = loss(s, &mut t, &b)?;
                Ok(t.value(r).get(0, 0))
            },
            &p,
            1e-5,
        )
        .unwrap();
        let errs = analytic.relative_errors(&numeric).unwrap();
        assert!(errs[0] < 1e-8, "{errs:?}");
        assert_eq!(analytic.0[1], Matrix::zeros(1, 3));
    }
}
