use mfgkit_core::Scenario;
use serde::Serialize;

use super::simulate::{replicate, EmpiricalTrajectory, SimConfig};
use crate::error::{Result, SimError};
use crate::fit::{jackknife, log_log_slope};

/// `E ∏_j φ_j(x_j) − ∏_j E φ_j(x_j)` with its jackknife standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChaosGap {
    pub gap: f64,
    pub std_error: f64,
    pub product_moment: f64,
    pub product_of_means: f64,
    pub replications: usize,
}

fn mean_over(idx: &[usize], f: impl Fn(usize) -> f64) -> f64 {
    idx.iter().map(|&r| f(r)).sum::<f64>() / idx.len() as f64
}

/// Gap for tagged players: `states[r][j]` is the state of tagged player `j`
/// in replication `r` and `phis[j]` its test function.
pub fn chaos_gap(states: &[Vec<usize>], phis: &[Vec<f64>]) -> Result<ChaosGap> {
    if phis.len() < 2 {
        return Err(SimError::InvalidConfig("at least two test functions are required".into()));
    }
    if states.len() < 2 || states.iter().any(|s| s.len() < phis.len()) {
        return Err(SimError::InvalidConfig(format!(
            "need two or more replications with {} tagged players",
            phis.len()
        )));
    }
    let value = |r: usize, j: usize| phis[j][states[r][j]];
    let stat = |idx: &[usize]| {
        let joint = mean_over(idx, |r| (0..phis.len()).map(|j| value(r, j)).product());
        let marginals: f64 = (0..phis.len()).map(|j| mean_over(idx, |r| value(r, j))).product();
        (joint, marginals)
    };
    let all: Vec<usize> = (0..states.len()).collect();
    let (joint, marginals) = stat(&all);
    Ok(ChaosGap {
        gap: joint - marginals,
        std_error: jackknife(states.len(), |idx| {
            let (a, b) = stat(idx);
            a - b
        }),
        product_moment: joint,
        product_of_means: marginals,
        replications: states.len(),
    })
}

/// Per-replication sums for the pairwise U-statistic over all players.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairMoments {
    /// Average of `φ₁(x_i)φ₂(x_j)` over ordered pairs `i ≠ j`.
    pub pair: f64,
    pub first: f64,
    pub second: f64,
}

impl PairMoments {
    pub fn from_counts(counts: &[u32], phi1: &[f64], phi2: &[f64]) -> Self {
        let n: f64 = counts.iter().map(|&c| c as f64).sum();
        let s1: f64 = counts.iter().zip(phi1).map(|(&c, p)| c as f64 * p).sum();
        let s2: f64 = counts.iter().zip(phi2).map(|(&c, p)| c as f64 * p).sum();
        let diag: f64 = counts
            .iter()
            .zip(phi1.iter().zip(phi2))
            .map(|(&c, (a, b))| c as f64 * a * b)
            .sum();
        Self {
            pair: (s1 * s2 - diag) / (n * (n - 1.0)),
            first: s1 / n,
            second: s2 / n,
        }
    }
}

/// Two-player gap estimated from every ordered pair of distinct players; by
/// exchangeability it has the same mean as the tagged-pair estimator with far
/// less variance.
pub fn pair_chaos_gap(moments: &[PairMoments]) -> Result<ChaosGap> {
    if moments.len() < 2 {
        return Err(SimError::InvalidConfig("need two or more replications".into()));
    }
    let stat = |idx: &[usize]| {
        let joint = mean_over(idx, |r| moments[r].pair);
        let marginals = mean_over(idx, |r| moments[r].first) * mean_over(idx, |r| moments[r].second);
        (joint, marginals)
    };
    let all: Vec<usize> = (0..moments.len()).collect();
    let (joint, marginals) = stat(&all);
    Ok(ChaosGap {
        gap: joint - marginals,
        std_error: jackknife(moments.len(), |idx| {
            let (a, b) = stat(idx);
            a - b
        }),
        product_moment: joint,
        product_of_means: marginals,
        replications: moments.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChaosRow {
    pub n: usize,
    pub gap: ChaosGap,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChaosStudy {
    pub time: f64,
    pub rows: Vec<ChaosRow>,
    /// Least-squares slope of `ln |gap|` against `ln n`.
    pub slope: f64,
}

fn nearest_index(traj: &EmpiricalTrajectory, t: f64) -> usize {
    traj.times
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
        .map(|(k, _)| k)
        .unwrap_or(0)
}

/// Pairwise gap of type-0 players at the recording time nearest `t`, for each `n`.
pub fn chaos_study(
    scenario: &Scenario,
    ns: &[usize],
    cfg: &SimConfig,
    phi1: &[f64],
    phi2: &[f64],
    t: f64,
) -> Result<ChaosStudy> {
    if ns.len() < 2 || ns.windows(2).any(|w| w[0] >= w[1]) || ns[0] < 2 {
        return Err(SimError::InvalidConfig(
            "player counts must be increasing and at least 2".into(),
        ));
    }
    if phi1.len() != scenario.n_states() || phi2.len() != scenario.n_states() {
        return Err(SimError::InvalidConfig("test functions must cover every state".into()));
    }
    let mut time = t;
    let rows = ns
        .iter()
        .map(|&n| {
            let cfg = SimConfig { n, tagged: 0, ..cfg.clone() };
            let moments = replicate(scenario, &cfg, |run| {
                let k = nearest_index(&run, t);
                Ok((run.times[k], PairMoments::from_counts(run.counts(k, 0), phi1, phi2)))
            })?;
            time = moments[0].0;
            let moments: Vec<PairMoments> = moments.into_iter().map(|(_, m)| m).collect();
            Ok(ChaosRow {
                n,
                gap: pair_chaos_gap(&moments)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.gap.gap.abs()).collect();
    let (slope, _) = log_log_slope(&xs, &ys);
    Ok(ChaosStudy { time, rows, slope })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_moments_by_enumeration() {
        // states of 4 players: 0, 0, 1, 2
        let xs = [0usize, 0, 1, 2];
        let phi1 = [1.0, 2.0, -1.0];
        let phi2 = [0.5, 0.0, 3.0];
        let mut pair = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    pair += phi1[xs[i]] * phi2[xs[j]];
                }
            }
        }
        let m = PairMoments::from_counts(&[2, 1, 1], &phi1, &phi2);
        assert!((m.pair - pair / 12.0).abs() < 1e-14);
        assert!((m.first - 0.75).abs() < 1e-14);
        assert!((m.second - 1.0).abs() < 1e-14);
    }

    #[test]
    fn identical_deterministic_players_have_no_gap() {
        let states = vec![vec![1, 1]; 10];
        let ind = vec![0.0, 1.0];
        let g = chaos_gap(&states, &[ind.clone(), ind]).unwrap();
        assert_eq!(g.gap, 0.0);
        assert_eq!(g.product_moment, 1.0);
    }
}
