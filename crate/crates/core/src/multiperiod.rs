//! Lower bound for `Σ_j |M_{T_j} - M_{T_{j-1}}|` along a sequence of marginals:
//! the sum of the single-period bounds of consecutive pairs.

use crate::bounds::{report_for, BoundOptions, BoundReport};
use crate::error::{Error, Result};
use crate::lower::CouplingMap;
use crate::measure::{decompose, Measure};

#[derive(Debug, Clone)]
pub struct MarginalSequence {
    measures: Vec<Measure>,
}

impl MarginalSequence {
    /// At least two marginals.
    pub fn new(measures: Vec<Measure>) -> Result<MarginalSequence> {
        if measures.len() < 2 {
            return Err(Error::InvalidMeasure(format!(
                "a sequence needs at least two marginals, got {}",
                measures.len()
            )));
        }
        Ok(MarginalSequence { measures })
    }

    pub fn measures(&self) -> &[Measure] {
        &self.measures
    }

    pub fn steps(&self) -> usize {
        self.measures.len() - 1
    }
}

#[derive(Debug, Clone)]
pub struct SequenceBound {
    pub total: f64,
    pub steps: Vec<BoundReport>,
    pub maps: Vec<CouplingMap>,
}

/// Step `i` (from 1) couples `μ_{i-1}` with `μ_i`; failures are tagged with it.
pub fn bound_sequence(seq: &MarginalSequence, opts: &BoundOptions) -> Result<SequenceBound> {
    let mut steps = Vec::with_capacity(seq.steps());
    let mut maps = Vec::with_capacity(seq.steps());
    for (i, w) in seq.measures.windows(2).enumerate() {
        let tag = |e: Error| Error::Step {
            step: i + 1,
            source: Box::new(e),
        };
        let pair = decompose(&w[0], &w[1]).map_err(tag)?;
        let map = CouplingMap::build(&pair).map_err(tag)?;
        steps.push(report_for(&map, opts).map_err(tag)?);
        maps.push(map);
    }
    let total = steps.iter().map(|r| r.primal_price).sum();
    Ok(SequenceBound { total, steps, maps })
}
