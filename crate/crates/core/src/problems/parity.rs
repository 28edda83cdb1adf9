//! Parity: uniform input bits, one decision observing all of them, and a value of 1 only
//! when the action equals the parity of the bits. Every proper subset of the bits says
//! nothing about the parity.

use crate::error::{Error, Result};
use crate::model::{DiagramBuilder, InfluenceDiagram, Variable};

pub fn build_parity_id(n: usize) -> Result<InfluenceDiagram> {
    if n == 0 {
        return Err(Error::Config("parity needs at least one bit".into()));
    }
    let mut b = DiagramBuilder::new(format!("parity{n}"));
    let bits: Vec<_> = (1..=n)
        .map(|i| b.chance(Variable::new(format!("B{i}"), ["0", "1"]), &[], vec![0.5, 0.5]))
        .collect();
    let guess = b.decision(Variable::new("guess", ["0", "1"]), &bits);
    let mut parents = bits;
    parents.push(guess);
    let mut values = Vec::with_capacity(1 << (n + 1));
    for row in 0..(1usize << (n + 1)) {
        let action = row & 1;
        let parity = (row >> 1).count_ones() as usize % 2;
        values.push(if action == parity { 1.0 } else { 0.0 });
    }
    b.value("V", &parents, values);
    Ok(b.build())
}
