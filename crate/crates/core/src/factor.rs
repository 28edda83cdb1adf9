//! Dense nonnegative tables over an ordered scope of discrete variables.
//!
//! Layout is row-major in scope order: the last variable varies fastest.

use crate::error::{Error, Result};
use crate::model::{Context, VarId};

#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    scope: Vec<VarId>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

fn strides(cards: &[usize]) -> Vec<usize> {
    let mut s = vec![1; cards.len()];
    for i in (0..cards.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * cards[i + 1];
    }
    s
}

impl Factor {
    pub fn new(scope: Vec<VarId>, cards: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if scope.len() != cards.len() {
            return Err(Error::MalformedCpt("scope and cardinalities differ in length".into()));
        }
        let size: usize = cards.iter().product();
        if values.len() != size {
            return Err(Error::MalformedCpt(format!(
                "factor has {} entries, expected {size}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::MalformedCpt(
                "factor entries must be finite and nonnegative".into(),
            ));
        }
        let mut sorted = scope.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != scope.len() {
            return Err(Error::MalformedCpt("repeated variable in scope".into()));
        }
        Ok(Factor { scope, cards, values })
    }

    pub fn scalar(value: f64) -> Self {
        Factor {
            scope: Vec::new(),
            cards: Vec::new(),
            values: vec![value],
        }
    }

    pub fn scope(&self) -> &[VarId] {
        &self.scope
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn contains(&self, var: VarId) -> bool {
        self.scope.contains(&var)
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Entry for a full assignment of the scope.
    pub fn value_at(&self, value_of: impl Fn(VarId) -> usize) -> f64 {
        let mut idx = 0;
        for (&v, &c) in self.scope.iter().zip(&self.cards) {
            idx = idx * c + value_of(v);
        }
        self.values[idx]
    }

    /// Restricts to the evidence and drops the bound variables from the scope.
    pub fn reduce(&self, evidence: &Context) -> Factor {
        if !self.scope.iter().any(|&v| evidence.contains(v)) {
            return self.clone();
        }
        let st = strides(&self.cards);
        let mut base = 0;
        let mut scope = Vec::new();
        let mut cards = Vec::new();
        let mut kept_strides = Vec::new();
        for (i, &v) in self.scope.iter().enumerate() {
            match evidence.get(v) {
                Some(x) => base += x * st[i],
                None => {
                    scope.push(v);
                    cards.push(self.cards[i]);
                    kept_strides.push(st[i]);
                }
            }
        }
        let size: usize = cards.iter().product();
        let mut values = Vec::with_capacity(size);
        let mut assign = vec![0usize; cards.len()];
        let mut src = base;
        for _ in 0..size {
            values.push(self.values[src]);
            for j in (0..cards.len()).rev() {
                assign[j] += 1;
                src += kept_strides[j];
                if assign[j] < cards[j] {
                    break;
                }
                src -= kept_strides[j] * cards[j];
                assign[j] = 0;
            }
        }
        Factor { scope, cards, values }
    }

    /// Product of `factors`, optionally summing `eliminate` out in the same pass.
    /// The result scope is the sorted union of the input scopes.
    pub fn combine(factors: &[&Factor], eliminate: Option<VarId>) -> Factor {
        let mut union: Vec<(VarId, usize)> = Vec::new();
        for f in factors {
            for (&v, &c) in f.scope.iter().zip(&f.cards) {
                if !union.iter().any(|&(u, _)| u == v) {
                    union.push((v, c));
                }
            }
        }
        union.sort_unstable_by_key(|&(v, _)| v);
        let cards: Vec<usize> = union.iter().map(|&(_, c)| c).collect();

        let out: Vec<(VarId, usize)> = union.iter().copied().filter(|&(v, _)| Some(v) != eliminate).collect();
        let out_cards: Vec<usize> = out.iter().map(|&(_, c)| c).collect();
        let out_st = strides(&out_cards);
        let out_stride: Vec<usize> = union
            .iter()
            .map(|&(v, _)| out.iter().position(|&(u, _)| u == v).map_or(0, |i| out_st[i]))
            .collect();

        let in_strides: Vec<Vec<usize>> = factors
            .iter()
            .map(|f| {
                let st = strides(&f.cards);
                union
                    .iter()
                    .map(|&(v, _)| f.scope.iter().position(|&u| u == v).map_or(0, |i| st[i]))
                    .collect()
            })
            .collect();

        let total: usize = cards.iter().product();
        let out_size: usize = out_cards.iter().product();
        let mut result = vec![0.0; out_size];
        let mut assign = vec![0usize; cards.len()];
        let mut idx = vec![0usize; factors.len()];
        let mut out_idx = 0usize;
        for _ in 0..total {
            let mut p = 1.0;
            for (f, &i) in factors.iter().zip(&idx) {
                p *= f.values[i];
            }
            result[out_idx] += p;
            for j in (0..cards.len()).rev() {
                assign[j] += 1;
                out_idx += out_stride[j];
                for (k, s) in in_strides.iter().enumerate() {
                    idx[k] += s[j];
                }
                if assign[j] < cards[j] {
                    break;
                }
                out_idx -= out_stride[j] * cards[j];
                for (k, s) in in_strides.iter().enumerate() {
                    idx[k] -= s[j] * cards[j];
                }
                assign[j] = 0;
            }
        }
        Factor {
            scope: out.iter().map(|&(v, _)| v).collect(),
            cards: out_cards,
            values: result,
        }
    }

    pub fn product(factors: &[&Factor]) -> Factor {
        Factor::combine(factors, None)
    }

    pub fn sum_out(&self, var: VarId) -> Factor {
        Factor::combine(&[self], Some(var))
    }
}
