use crate::error::{Error, Result};

/// Relative slack allowed when comparing an interval against `max_dt`;
/// equal subdivision of a gap can overshoot by a rounding error.
const DT_SLACK: f64 = 1e-9;

/// Solver grid: the observation times plus enough subdivision points that
/// no interval exceeds `max_dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
    dt: Vec<f64>,
    obs_index: Vec<usize>,
    obs_at: Vec<Option<usize>>,
    max_dt: f64,
}

/// Builds the grid for observation times `obs_times` on `[0, horizon]`.
///
/// Breakpoints are `{0, horizon}` and every observation time; each gap
/// between consecutive breakpoints is split into the fewest equal pieces
/// of length at most `max_dt`.
pub fn build_time_grid(obs_times: &[f64], max_dt: f64, horizon: f64) -> Result<TimeGrid> {
    if !(max_dt > 0.0) || !max_dt.is_finite() {
        return Err(Error::config(format!("max_dt must be positive, got {max_dt}")));
    }
    if !horizon.is_finite() || horizon < 0.0 {
        return Err(Error::config(format!("horizon must be nonnegative, got {horizon}")));
    }
    for (i, w) in obs_times.windows(2).enumerate() {
        if w[1] <= w[0] {
            let msg = if w[1] == w[0] { "duplicate observation time" } else { "observation times not ascending" };
            return Err(Error::Ingestion { row: i + 1, msg: format!("{msg} ({} then {})", w[0], w[1]) });
        }
    }
    if let Some(&first) = obs_times.first() {
        if !(first >= 0.0) {
            return Err(Error::Ingestion { row: 0, msg: format!("negative observation time {first}") });
        }
    }
    if let Some(&last) = obs_times.last() {
        if last > horizon {
            return Err(Error::Ingestion {
                row: obs_times.len() - 1,
                msg: format!("observation time {last} beyond horizon {horizon}"),
            });
        }
    }

    let mut breaks = Vec::with_capacity(obs_times.len() + 2);
    breaks.push(0.0);
    for &t in obs_times {
        if t > *breaks.last().unwrap() {
            breaks.push(t);
        }
    }
    if horizon > *breaks.last().unwrap() {
        breaks.push(horizon);
    }

    let mut nodes = vec![0.0];
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let gap = b - a;
        let pieces = ((gap / max_dt) * (1.0 - DT_SLACK)).ceil().max(1.0) as usize;
        for k in 1..pieces {
            nodes.push(a + gap * (k as f64) / (pieces as f64));
        }
        nodes.push(b);
    }
    let dt: Vec<f64> = nodes.windows(2).map(|w| w[1] - w[0]).collect();

    let mut obs_at = vec![None; nodes.len()];
    let mut obs_index = Vec::with_capacity(obs_times.len());
    for (n, &t) in obs_times.iter().enumerate() {
        let j = locate(&nodes, t).expect("observation times are breakpoints");
        obs_at[j] = Some(n);
        obs_index.push(j);
    }
    Ok(TimeGrid { nodes, dt, obs_index, obs_at, max_dt })
}

fn locate(nodes: &[f64], t: f64) -> Option<usize> {
    nodes.binary_search_by(|x| x.partial_cmp(&t).unwrap()).ok()
}

impl TimeGrid {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Interval lengths; `dt()[j]` is the step from node `j` to `j + 1`.
    pub fn dt(&self) -> &[f64] {
        &self.dt
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn intervals(&self) -> usize {
        self.dt.len()
    }

    pub fn max_dt(&self) -> f64 {
        self.max_dt
    }

    pub fn horizon(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Grid node of observation `n`.
    pub fn obs_index(&self) -> &[usize] {
        &self.obs_index
    }

    /// Observation index recorded at node `j`, if any.
    pub fn obs_at(&self, j: usize) -> Option<usize> {
        self.obs_at[j]
    }

    /// Node holding exactly time `t`.
    pub fn locate(&self, t: f64) -> Option<usize> {
        locate(&self.nodes, t)
    }

    /// Checks the structural invariants: strictly increasing nodes, every
    /// interval positive and no longer than `max_dt`.
    pub fn check(&self) -> Result<()> {
        for (j, &d) in self.dt.iter().enumerate() {
            if !(d > 0.0) || d > self.max_dt * (1.0 + DT_SLACK) {
                return Err(Error::contract(format!("grid interval {j} has length {d}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn subdivides_to_quarter_steps() {
        let g = build_time_grid(&[0.5], 0.25, 1.0).unwrap();
        assert!(close(g.nodes(), &[0.0, 0.25, 0.5, 0.75, 1.0]));
        assert_eq!(g.obs_index(), &[2]);
        assert_eq!(g.nodes()[2], 0.5);
    }

    #[test]
    fn splits_gap_longer_than_max_dt() {
        let g = build_time_grid(&[0.3], 0.25, 0.3).unwrap();
        assert!(close(g.nodes(), &[0.0, 0.15, 0.3]));
        assert_eq!(g.obs_index(), &[2]);
    }

    #[test]
    fn double_ou_step_bound() {
        let times: Vec<f64> = (1..=100).filter(|k| k % 3 != 0).map(|k| k as f64 * 0.1).collect();
        let g = build_time_grid(&times, 0.01, 10.0).unwrap();
        g.check().unwrap();
        assert!(g.dt().iter().all(|&d| d <= 0.01 * (1.0 + 1e-9)));
        // gaps of 0.1 and 0.2 split into 10 and 20 pieces, never 11
        assert_eq!(g.intervals(), 1000);
        for (n, &t) in times.iter().enumerate() {
            assert_eq!(g.nodes()[g.obs_index()[n]], t);
        }
    }

    #[test]
    fn observation_at_zero_and_horizon() {
        let g = build_time_grid(&[0.0, 1.0], 0.5, 1.0).unwrap();
        assert!(close(g.nodes(), &[0.0, 0.5, 1.0]));
        assert_eq!(g.obs_index(), &[0, 2]);
        assert_eq!(g.obs_at(1), None);
    }

    #[test]
    fn rejects_duplicates_and_disorder() {
        assert!(matches!(build_time_grid(&[0.2, 0.2], 0.1, 1.0), Err(Error::Ingestion { .. })));
        assert!(matches!(build_time_grid(&[0.3, 0.2], 0.1, 1.0), Err(Error::Ingestion { .. })));
        assert!(build_time_grid(&[2.0], 0.1, 1.0).is_err());
        assert!(build_time_grid(&[0.5], 0.0, 1.0).is_err());
    }
}
