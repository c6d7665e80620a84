use std::cmp::Reverse;
use std::collections::BinaryHeap;

use mfgkit_core::{
    Horizon, KernelMode, Policy, PolicyTrajectory, Scenario, Simplex, Trajectory,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::rng::player_stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    /// Each player draws its initial state from `m0` independently.
    #[default]
    Iid,
    /// `n·m0` rounded by largest remainder, assigned in state order.
    ExactProportions,
}

#[derive(Debug, Clone, Default)]
pub enum PolicyInput {
    /// Uniform over the available actions.
    #[default]
    Uniform,
    /// One `[ty][x][a]` table used at every stage.
    Stationary(Vec<Vec<Vec<f64>>>),
    /// One table per stage (discrete) or per grid interval (continuous).
    Trajectory(Policy),
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n: usize,
    pub seed: u64,
    pub replications: usize,
    pub init: InitMode,
    pub policy: PolicyInput,
    /// Players whose individual paths are recorded (the first `tagged`).
    pub tagged: usize,
    /// Output grid step in continuous mode; defaults to the horizon step.
    pub record_step: Option<f64>,
    /// Random stream of each player; the identity when absent.
    pub streams: Option<Vec<usize>>,
}

impl SimConfig {
    pub fn new(n: usize, seed: u64, replications: usize) -> Self {
        Self {
            n,
            seed,
            replications,
            init: InitMode::Iid,
            policy: PolicyInput::Uniform,
            tagged: 0,
            record_step: None,
            streams: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(SimError::InvalidConfig("player count must be at least 1".into()));
        }
        if self.replications == 0 {
            return Err(SimError::InvalidConfig("at least one replication is required".into()));
        }
        if self.tagged > self.n {
            return Err(SimError::InvalidConfig(format!(
                "{} tagged players out of {}",
                self.tagged, self.n
            )));
        }
        if let Some(streams) = &self.streams {
            check_permutation(streams, self.n)?;
        }
        Ok(())
    }
}

pub(crate) fn check_permutation(streams: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for &s in streams {
        if s >= n || std::mem::replace(&mut seen[s], true) {
            return Err(SimError::InvalidConfig(format!(
                "stream assignment is not a permutation of 0..{n}"
            )));
        }
    }
    if streams.len() != n {
        return Err(SimError::InvalidConfig(format!("{} streams for {n} players", streams.len())));
    }
    Ok(())
}

/// Empirical measures of one replication on its recording grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalTrajectory {
    pub times: Vec<f64>,
    /// Players per type.
    pub type_sizes: Vec<usize>,
    n_states: usize,
    /// `counts[(k·types + ty)·states + x]`
    counts: Vec<u32>,
    /// `tagged[j][k]`: state of player `j` at grid point `k`.
    pub tagged: Vec<Vec<usize>>,
}

impl EmpiricalTrajectory {
    /// `counts[k][ty][x]`; every time point must account for all players of each type.
    pub fn from_counts(times: Vec<f64>, counts: Vec<Vec<Vec<u32>>>) -> Result<Self> {
        let first = counts
            .first()
            .ok_or_else(|| SimError::InvalidConfig("empirical trajectory needs a time point".into()))?;
        let n_types = first.len();
        let n_states = first.first().map_or(0, Vec::len);
        if times.len() != counts.len() || n_types == 0 || n_states == 0 {
            return Err(SimError::InvalidConfig("times and counts disagree in length".into()));
        }
        let type_sizes: Vec<usize> = first.iter().map(|c| c.iter().map(|&v| v as usize).sum()).collect();
        let mut flat = Vec::with_capacity(times.len() * n_types * n_states);
        for at in &counts {
            if at.len() != n_types {
                return Err(SimError::InvalidConfig("type count changes over time".into()));
            }
            for (c, &size) in at.iter().zip(&type_sizes) {
                if c.len() != n_states || c.iter().map(|&v| v as usize).sum::<usize>() != size || size == 0 {
                    return Err(SimError::InvalidConfig("counts must conserve each nonempty type".into()));
                }
                flat.extend_from_slice(c);
            }
        }
        Ok(Self {
            times,
            type_sizes,
            n_states,
            counts: flat,
            tagged: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_types(&self) -> usize {
        self.type_sizes.len()
    }

    pub fn counts(&self, k: usize, ty: usize) -> &[u32] {
        let start = (k * self.n_types() + ty) * self.n_states;
        &self.counts[start..start + self.n_states]
    }

    pub fn mass(&self, k: usize, ty: usize, x: usize) -> f64 {
        self.counts(k, ty)[x] as f64 / self.type_sizes[ty] as f64
    }

    /// `M^n_{t_k}` of type `ty`; masses are multiples of `1/n_ty`.
    pub fn profile(&self, k: usize, ty: usize) -> Simplex {
        let size = self.type_sizes[ty] as f64;
        Simplex::unchecked(self.counts(k, ty).iter().map(|&c| c as f64 / size).collect())
    }

    pub fn to_trajectory(&self) -> Result<Trajectory> {
        let profiles = (0..self.len())
            .map(|k| (0..self.n_types()).map(|ty| self.profile(k, ty)).collect())
            .collect();
        Ok(Trajectory::new(self.times.clone(), profiles)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationRun {
    pub replications: Vec<EmpiricalTrajectory>,
}

impl SimulationRun {
    pub fn times(&self) -> &[f64] {
        &self.replications[0].times
    }

    /// Replication average of `M^n_t`, accumulated in replication order.
    pub fn mean_trajectory(&self) -> Result<Trajectory> {
        let first = &self.replications[0];
        let (types, states) = (first.n_types(), first.n_states());
        let reps = self.replications.len() as f64;
        let profiles = (0..first.len())
            .map(|k| {
                (0..types)
                    .map(|ty| {
                        let mut acc = vec![0.0; states];
                        for rep in &self.replications {
                            for (a, x) in acc.iter_mut().zip(0..states) {
                                *a += rep.mass(k, ty, x);
                            }
                        }
                        Simplex::unchecked(acc.into_iter().map(|a| a / reps).collect())
                    })
                    .collect()
            })
            .collect();
        Ok(Trajectory::new(first.times.clone(), profiles)?)
    }
}

/// Integer allocation of `total` proportional to `weights` (largest remainder;
/// ties go to the lower index).
pub fn largest_remainder(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Index drawn from a probability vector with one uniform variate.
fn categorical(rng: &mut ChaCha8Rng, p: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    p.iter().rposition(|&pi| pi > 0.0).unwrap_or(p.len() - 1)
}

fn policy_len(scenario: &Scenario) -> Result<usize> {
    Ok(scenario.horizon.steps()?)
}

fn resolve_policy(scenario: &Scenario, input: &PolicyInput) -> Result<Policy> {
    let len = policy_len(scenario)?;
    let u = match input {
        PolicyInput::Uniform => PolicyTrajectory::uniform(&scenario.space, len),
        PolicyInput::Stationary(stage) => PolicyTrajectory::stationary(stage.clone(), len)?,
        PolicyInput::Trajectory(u) => {
            if u.len() != len {
                return Err(SimError::InvalidConfig(format!(
                    "policy has {} stages, horizon needs {len}",
                    u.len()
                )));
            }
            u.clone()
        }
    };
    u.check_shape(&scenario.space)?;
    Ok(u)
}

pub(crate) struct Setup {
    pub policy: Policy,
    pub type_sizes: Vec<usize>,
    /// Type of each player.
    pub types: Vec<usize>,
    pub record_times: Vec<f64>,
    pub policy_step: f64,
}

pub(crate) fn setup(scenario: &Scenario, cfg: &SimConfig) -> Result<Setup> {
    cfg.validate()?;
    let policy = resolve_policy(scenario, &cfg.policy)?;
    let type_sizes = largest_remainder(cfg.n, &scenario.type_mass);
    if let Some(ty) = type_sizes.iter().position(|&s| s == 0) {
        return Err(SimError::InvalidConfig(format!(
            "{} players leave type `{}` empty",
            cfg.n,
            scenario.space.types()[ty]
        )));
    }
    let types = type_sizes
        .iter()
        .enumerate()
        .flat_map(|(ty, &s)| std::iter::repeat_n(ty, s))
        .collect();
    let (record_times, policy_step) = match scenario.horizon {
        Horizon::Discrete { stages } => ((0..=stages).map(|k| k as f64).collect(), 1.0),
        Horizon::Continuous { end, step } => {
            let h = cfg.record_step.unwrap_or(step);
            let steps = mfgkit_core::scenario::grid_steps(end, h)?;
            ((0..=steps).map(|k| k as f64 * h).collect(), step)
        }
    };
    Ok(Setup {
        policy,
        type_sizes,
        types,
        record_times,
        policy_step,
    })
}

fn initial_states(scenario: &Scenario, cfg: &SimConfig, setup: &Setup, rngs: &mut [ChaCha8Rng]) -> Vec<usize> {
    match cfg.init {
        InitMode::Iid => setup
            .types
            .iter()
            .zip(rngs.iter_mut())
            .map(|(&ty, rng)| categorical(rng, scenario.m0[ty].as_slice()))
            .collect(),
        InitMode::ExactProportions => {
            let mut states = Vec::with_capacity(cfg.n);
            for (ty, &size) in setup.type_sizes.iter().enumerate() {
                let counts = largest_remainder(size, scenario.m0[ty].as_slice());
                for (x, &c) in counts.iter().enumerate() {
                    states.extend(std::iter::repeat_n(x, c));
                }
            }
            states
        }
    }
}

struct Recorder {
    types: usize,
    states: usize,
    counts: Vec<u32>,
    tagged: Vec<Vec<usize>>,
}

impl Recorder {
    fn push(&mut self, live: &[Vec<u32>], players: &[usize]) {
        for ty in 0..self.types {
            self.counts.extend_from_slice(&live[ty][..self.states]);
        }
        for (path, &x) in self.tagged.iter_mut().zip(players) {
            path.push(x);
        }
    }
}

fn profiles(live: &[Vec<u32>], sizes: &[usize]) -> Vec<Simplex> {
    live.iter()
        .zip(sizes)
        .map(|(c, &s)| Simplex::unchecked(c.iter().map(|&v| v as f64 / s as f64).collect()))
        .collect()
}

fn probe_failure(t: f64, e: impl std::fmt::Display) -> SimError {
    SimError::KernelProbeFailure {
        t,
        message: e.to_string(),
    }
}

fn run_replication(scenario: &Scenario, cfg: &SimConfig, setup: &Setup, rep: usize) -> Result<EmpiricalTrajectory> {
    let n_states = scenario.n_states();
    let n_types = scenario.n_types();
    let mut rngs: Vec<ChaCha8Rng> = (0..cfg.n)
        .map(|j| player_stream(cfg.seed, rep, cfg.streams.as_ref().map_or(j, |s| s[j])))
        .collect();
    let mut states = initial_states(scenario, cfg, setup, &mut rngs);
    let mut live = vec![vec![0u32; n_states]; n_types];
    for (&ty, &x) in setup.types.iter().zip(&states) {
        live[ty][x] += 1;
    }
    let mut rec = Recorder {
        types: n_types,
        states: n_states,
        counts: Vec::with_capacity(setup.record_times.len() * n_types * n_states),
        tagged: vec![Vec::with_capacity(setup.record_times.len()); cfg.tagged],
    };
    rec.push(&live, &states[..cfg.tagged]);
    match scenario.mode() {
        KernelMode::DiscreteProbability => {
            discrete(scenario, setup, &mut rngs, &mut states, &mut live, &mut rec, cfg.tagged)?
        }
        KernelMode::ContinuousRate => {
            continuous(scenario, setup, &mut rngs, &mut states, &mut live, &mut rec, cfg.tagged)?
        }
    }
    Ok(EmpiricalTrajectory {
        times: setup.record_times.clone(),
        type_sizes: setup.type_sizes.clone(),
        n_states,
        counts: rec.counts,
        tagged: rec.tagged,
    })
}

fn discrete(
    scenario: &Scenario,
    setup: &Setup,
    rngs: &mut [ChaCha8Rng],
    states: &mut [usize],
    live: &mut [Vec<u32>],
    rec: &mut Recorder,
    tagged: usize,
) -> Result<()> {
    let n_states = scenario.n_states();
    for k in 0..setup.policy.len() {
        let t = k as f64;
        let m = profiles(live, &setup.type_sizes);
        // rows are fixed within a stage; evaluate each (type, state, action) once
        let mut rows: Vec<Vec<Vec<Option<Vec<f64>>>>> = (0..scenario.n_types())
            .map(|ty| {
                (0..n_states)
                    .map(|x| vec![None; scenario.space.n_actions(ty, x)])
                    .collect()
            })
            .collect();
        let stage = setup.policy.stage(k);
        for j in 0..states.len() {
            let (ty, x) = (setup.types[j], states[j]);
            let a = categorical(&mut rngs[j], &stage[ty][x]);
            if rows[ty][x][a].is_none() {
                let row = scenario.kernel.row(t, ty, x, a, &m);
                scenario
                    .kernel
                    .check_row(&row, t, ty, x, a)
                    .map_err(|e| probe_failure(t, e))?;
                rows[ty][x][a] = Some(row);
            }
            let row = rows[ty][x][a].as_ref().expect("row evaluated");
            let y = categorical(&mut rngs[j], row);
            states[j] = y;
        }
        for c in live.iter_mut() {
            c.iter_mut().for_each(|v| *v = 0);
        }
        for (&ty, &x) in setup.types.iter().zip(states.iter()) {
            live[ty][x] += 1;
        }
        rec.push(live, &states[..tagged]);
    }
    Ok(())
}

/// Clock times are positive, so their bit patterns order like the values.
fn key(t: f64, j: usize) -> Reverse<(u64, usize)> {
    Reverse((t.to_bits(), j))
}

fn continuous(
    scenario: &Scenario,
    setup: &Setup,
    rngs: &mut [ChaCha8Rng],
    states: &mut [usize],
    live: &mut [Vec<u32>],
    rec: &mut Recorder,
    tagged: usize,
) -> Result<()> {
    let clock = scenario.clock_rate.unwrap_or(1.0);
    if !(clock > 0.0 && clock.is_finite()) {
        return Err(SimError::InvalidConfig(format!("clock rate {clock} must be positive")));
    }
    let exp = Exp::new(clock).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
    let end = *setup.record_times.last().expect("grid has a point");
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> = rngs
        .iter_mut()
        .enumerate()
        .map(|(j, rng)| key(exp.sample(rng), j))
        .collect();
    let mut next_record = 1;
    let last_stage = setup.policy.len().saturating_sub(1);
    let mut row = vec![0.0; scenario.n_states()];
    while let Some(Reverse((bits, j))) = heap.pop() {
        let t = f64::from_bits(bits);
        while next_record < setup.record_times.len() && setup.record_times[next_record] < t {
            rec.push(live, &states[..tagged]);
            next_record += 1;
        }
        if t > end {
            break;
        }
        let (ty, x) = (setup.types[j], states[j]);
        let k = ((t / setup.policy_step).floor() as usize).min(last_stage);
        let rng = &mut rngs[j];
        let a = categorical(rng, &setup.policy.stage(k)[ty][x]);
        let m = profiles(live, &setup.type_sizes);
        scenario.kernel.row_into(t, ty, x, a, &m, &mut row);
        scenario
            .kernel
            .check_row(&row, t, ty, x, a)
            .map_err(|e| probe_failure(t, e))?;
        let exit: f64 = row.iter().enumerate().filter(|&(y, _)| y != x).map(|(_, r)| r).sum();
        if exit > clock * (1.0 + 1e-9) {
            return Err(probe_failure(
                t,
                format!("exit rate {exit} from state {x} exceeds the clock rate {clock}"),
            ));
        }
        let u: f64 = rng.random::<f64>() * clock;
        let mut acc = 0.0;
        for (y, &r) in row.iter().enumerate() {
            if y == x {
                continue;
            }
            acc += r;
            if u < acc {
                live[ty][x] -= 1;
                live[ty][y] += 1;
                states[j] = y;
                break;
            }
        }
        heap.push(key(t + exp.sample(rng), j));
    }
    while next_record < setup.record_times.len() {
        rec.push(live, &states[..tagged]);
        next_record += 1;
    }
    Ok(())
}

/// Runs `cfg.replications` independent replications (in parallel on the
/// current rayon pool); the output does not depend on the number of workers.
pub fn simulate_nplayer(scenario: &Scenario, cfg: &SimConfig) -> Result<SimulationRun> {
    let replications = replicate(scenario, cfg, Ok)?;
    Ok(SimulationRun { replications })
}

/// Maps every replication through `f` without keeping the trajectories;
/// results come back in replication order.
pub(crate) fn replicate<R, F>(scenario: &Scenario, cfg: &SimConfig, f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(EmpiricalTrajectory) -> Result<R> + Sync,
{
    let setup = setup(scenario, cfg)?;
    (0..cfg.replications)
        .into_par_iter()
        .map(|rep| run_replication(scenario, cfg, &setup, rep).and_then(&f))
        .collect()
}
