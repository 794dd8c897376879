use serde::{Deserialize, Serialize};

use super::{GepError, TimeSeriesTable};

/// Ordered partition of the horizon into representative steps.
///
/// Steps are 0-based. Groups are consecutive runs unless the aggregation
/// carries medoid representatives, in which case the representative step's
/// inputs stand for the whole (arbitrary) group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregation {
    horizon: usize,
    groups: Vec<Vec<usize>>,
    representatives: Option<Vec<usize>>,
}

impl Aggregation {
    /// Chronological aggregation; every group must be a run of consecutive
    /// steps and the groups must partition `0..horizon`.
    pub fn new(horizon: usize, groups: Vec<Vec<usize>>) -> Result<Self, GepError> {
        check_partition(horizon, &groups)?;
        for (r, g) in groups.iter().enumerate() {
            if g.windows(2).any(|w| w[1] != w[0] + 1) {
                return Err(GepError::InvalidAggregation(format!("group {r} is not a run of consecutive steps")));
            }
        }
        Ok(Aggregation { horizon, groups, representatives: None })
    }

    /// Medoid-style aggregation: groups need not be contiguous and each is
    /// represented by the inputs of one of its members.
    pub fn with_representatives(
        horizon: usize,
        groups: Vec<Vec<usize>>,
        representatives: Vec<usize>,
    ) -> Result<Self, GepError> {
        check_partition(horizon, &groups)?;
        if representatives.len() != groups.len() || groups.iter().zip(&representatives).any(|(g, r)| !g.contains(r)) {
            return Err(GepError::InvalidAggregation(
                "each group needs one representative drawn from its members".into(),
            ));
        }
        Ok(Aggregation { horizon, groups, representatives: Some(representatives) })
    }

    /// All singletons.
    pub fn identity(horizon: usize) -> Self {
        Aggregation { horizon, groups: (0..horizon).map(|t| vec![t]).collect(), representatives: None }
    }

    /// Consecutive blocks of the given lengths.
    pub fn from_block_lengths(lengths: &[usize]) -> Result<Self, GepError> {
        let mut groups = Vec::with_capacity(lengths.len());
        let mut t = 0;
        for &len in lengths {
            groups.push((t..t + len).collect());
            t += len;
        }
        Aggregation::new(t, groups)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn representatives(&self) -> Option<&[usize]> {
        self.representatives.as_deref()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.groups.iter().map(|g| g.len() as f64).collect()
    }

    /// `step -> representative index`.
    pub fn step_map(&self) -> Vec<usize> {
        let mut map = vec![0; self.horizon];
        for (r, g) in self.groups.iter().enumerate() {
            for &t in g {
                map[t] = r;
            }
        }
        map
    }

    /// Writes `original_step,representative_id,weight` rows.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["original_step", "representative_id", "weight"])?;
        let map = self.step_map();
        for (t, &r) in map.iter().enumerate() {
            wr.write_record([t.to_string(), r.to_string(), self.groups[r].len().to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads the format produced by [`Aggregation::write_csv`]; groups are
    /// re-assembled by representative id.
    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self, GepError> {
        let mut rd = csv::Reader::from_reader(r);
        let mut rows: Vec<(usize, usize)> = Vec::new();
        for (line, rec) in rd.records().enumerate() {
            let rec = rec.map_err(|e| GepError::InvalidAggregation(e.to_string()))?;
            let parse = |k: usize| -> Result<usize, GepError> {
                rec.get(k)
                    .and_then(|v| v.trim().parse().ok())
                    .ok_or_else(|| GepError::InvalidAggregation(format!("line {}: bad field {k}", line + 2)))
            };
            rows.push((parse(0)?, parse(1)?));
        }
        let n_rep = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
        let mut groups = vec![Vec::new(); n_rep];
        for &(t, r) in &rows {
            groups[r].push(t);
        }
        for g in groups.iter_mut() {
            g.sort_unstable();
        }
        Aggregation::new(rows.len(), groups)
    }
}

fn check_partition(horizon: usize, groups: &[Vec<usize>]) -> Result<(), GepError> {
    let mut seen = vec![false; horizon];
    for (r, g) in groups.iter().enumerate() {
        if g.is_empty() {
            return Err(GepError::InvalidAggregation(format!("group {r} is empty")));
        }
        for &t in g {
            if t >= horizon {
                return Err(GepError::InvalidAggregation(format!("step {t} outside horizon {horizon}")));
            }
            if std::mem::replace(&mut seen[t], true) {
                return Err(GepError::InvalidAggregation(format!("step {t} assigned twice")));
            }
        }
    }
    if let Some(t) = seen.iter().position(|s| !s) {
        return Err(GepError::InvalidAggregation(format!("step {t} not assigned")));
    }
    Ok(())
}

/// Averages each input series over the groups (or takes the representative
/// step's values for medoid aggregations).
pub fn aggregate_inputs(ts: &TimeSeriesTable, agg: &Aggregation) -> Result<TimeSeriesTable, GepError> {
    if ts.horizon() != agg.horizon() {
        return Err(GepError::InvalidAggregation(format!(
            "aggregation covers {} steps but the series has {}",
            agg.horizon(),
            ts.horizon()
        )));
    }
    if let Some(reps) = agg.representatives() {
        return Ok(ts.select(reps));
    }
    let mean = |s: &[f64]| -> Vec<f64> {
        agg.groups().iter().map(|g| g.iter().map(|&t| s[t]).sum::<f64>() / g.len() as f64).collect()
    };
    Ok(TimeSeriesTable {
        capacity_factors: ts.capacity_factors.iter().map(|f| mean(f)).collect(),
        demand: mean(&ts.demand),
        price: mean(&ts.price),
    })
}
