//! Structural data-generating processes with exact oracles, plus the
//! Monte-Carlo experiment harness used to validate the estimators'
//! statistical guarantees.

mod experiment;

pub use experiment::{
    run_experiment, ExperimentCell, ExperimentConfig, ExperimentReport, Scenario,
};

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::crossfit::{FoldAssignment, FoldMarginals, NuisanceMatrices};
use crate::dataset::{AttemptRecord, Dataset};
use crate::error::{Error, Result};
use crate::estimand::{EstimandKind, EstimandSpec, XCondition};
use crate::stats::expit;

/// One support point of a discrete covariate law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteCell {
    pub x: Vec<f64>,
    pub prob: f64,
}

/// Covariate law: finite support or independent uniform components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateLaw {
    Discrete { cells: Vec<DiscreteCell> },
    Uniform { ranges: Vec<(f64, f64)> },
}

/// A linear score with optional pairwise product terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearForm {
    pub intercept: f64,
    #[serde(default)]
    pub slopes: Vec<f64>,
    #[serde(default)]
    pub products: Vec<(usize, usize, f64)>,
}

impl LinearForm {
    pub fn constant(intercept: f64) -> Self {
        LinearForm {
            intercept,
            slopes: Vec::new(),
            products: Vec::new(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut v = self.intercept;
        for (s, xi) in self.slopes.iter().zip(x) {
            v += s * xi;
        }
        for &(i, j, c) in &self.products {
            v += c * x[i] * x[j];
        }
        v
    }
}

/// Player-assignment mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentLaw {
    /// Explicit `[cell][player]` table; discrete covariates only.
    Table(Vec<Vec<f64>>),
    /// Softmax over per-player linear scores.
    Softmax(Vec<LinearForm>),
}

/// Outcome mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeLaw {
    /// Explicit `[cell][player]` success-probability table; discrete only.
    Table(Vec<Vec<f64>>),
    /// Per-player logistic success probability.
    Logistic(Vec<LinearForm>),
}

/// A structural data-generating process: covariate law, assignment
/// mechanism, and outcome mechanism over `m` players.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub m: usize,
    pub covariates: CovariateLaw,
    pub assignment: AssignmentLaw,
    pub outcome: OutcomeLaw,
}

impl DgpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::InvalidDgp("need at least 2 players".into()));
        }
        match &self.covariates {
            CovariateLaw::Discrete { cells } => {
                if cells.is_empty() {
                    return Err(Error::InvalidDgp("no covariate cells".into()));
                }
                let total: f64 = cells.iter().map(|c| c.prob).sum();
                if (total - 1.0).abs() > 1e-10 {
                    return Err(Error::InvalidDgp(format!(
                        "cell probabilities sum to {total}, not 1"
                    )));
                }
                if cells.iter().any(|c| c.prob < 0.0) {
                    return Err(Error::InvalidDgp("negative cell probability".into()));
                }
                let k = cells.len();
                if let AssignmentLaw::Table(t) = &self.assignment {
                    if t.len() != k || t.iter().any(|row| row.len() != self.m) {
                        return Err(Error::InvalidDgp("assignment table shape".into()));
                    }
                    for row in t {
                        let s: f64 = row.iter().sum();
                        if (s - 1.0).abs() > 1e-10 || row.iter().any(|&p| p < 0.0) {
                            return Err(Error::InvalidDgp(
                                "assignment rows must be probabilities summing to 1".into(),
                            ));
                        }
                    }
                }
                if let OutcomeLaw::Table(t) = &self.outcome {
                    if t.len() != k || t.iter().any(|row| row.len() != self.m) {
                        return Err(Error::InvalidDgp("outcome table shape".into()));
                    }
                    if t.iter().flatten().any(|&p| !(0.0..=1.0).contains(&p)) {
                        return Err(Error::InvalidDgp("outcome probabilities outside [0,1]".into()));
                    }
                }
            }
            CovariateLaw::Uniform { ranges } => {
                if ranges.is_empty() || ranges.iter().any(|(lo, hi)| hi <= lo) {
                    return Err(Error::InvalidDgp("invalid uniform ranges".into()));
                }
                if matches!(self.assignment, AssignmentLaw::Table(_))
                    || matches!(self.outcome, OutcomeLaw::Table(_))
                {
                    return Err(Error::InvalidDgp(
                        "table mechanisms need a discrete covariate law".into(),
                    ));
                }
            }
        }
        if let AssignmentLaw::Softmax(forms) = &self.assignment {
            if forms.len() != self.m {
                return Err(Error::InvalidDgp("one softmax score per player".into()));
            }
        }
        if let OutcomeLaw::Logistic(forms) = &self.outcome {
            if forms.len() != self.m {
                return Err(Error::InvalidDgp("one outcome form per player".into()));
            }
        }
        Ok(())
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.covariates, CovariateLaw::Discrete { .. })
    }

    pub fn cells(&self) -> Result<&[DiscreteCell]> {
        match &self.covariates {
            CovariateLaw::Discrete { cells } => Ok(cells),
            CovariateLaw::Uniform { .. } => Err(Error::NonDiscreteDgp),
        }
    }

    pub fn covariate_dim(&self) -> usize {
        match &self.covariates {
            CovariateLaw::Discrete { cells } => cells[0].x.len(),
            CovariateLaw::Uniform { ranges } => ranges.len(),
        }
    }

    /// True assignment probabilities at a covariate value. For table laws
    /// the cell index must be supplied.
    pub fn pi_row(&self, x: &[f64], cell: Option<usize>) -> Vec<f64> {
        match &self.assignment {
            AssignmentLaw::Table(t) => t[cell.expect("table law needs a cell index")].clone(),
            AssignmentLaw::Softmax(forms) => {
                let scores: Vec<f64> = forms.iter().map(|f| f.eval(x)).collect();
                let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
                let total: f64 = exps.iter().sum();
                exps.into_iter().map(|e| e / total).collect()
            }
        }
    }

    /// True success probability for player `a` at a covariate value.
    pub fn mu(&self, x: &[f64], cell: Option<usize>, a: usize) -> f64 {
        match &self.outcome {
            OutcomeLaw::Table(t) => t[cell.expect("table law needs a cell index")][a - 1],
            OutcomeLaw::Logistic(forms) => expit(forms[a - 1].eval(x)),
        }
    }

    /// True marginal outcome regression `E[Y | X = x]`.
    pub fn m_bar(&self, x: &[f64], cell: Option<usize>) -> f64 {
        let pi = self.pi_row(x, cell);
        (1..=self.m)
            .map(|a| pi[a - 1] * self.mu(x, cell, a))
            .sum()
    }

    /// True marginal player probabilities `P(A = a)`; discrete only.
    pub fn player_marginals(&self) -> Result<Vec<f64>> {
        let cells = self.cells()?;
        let mut p = vec![0.0; self.m];
        for (k, cell) in cells.iter().enumerate() {
            let pi = self.pi_row(&cell.x, Some(k));
            for a in 0..self.m {
                p[a] += cell.prob * pi[a];
            }
        }
        Ok(p)
    }

    /// Copy with the outcome probability of one `(cell, player)` entry
    /// shifted by `delta`; requires a table outcome law.
    pub fn perturb_outcome(&self, cell: usize, player: usize, delta: f64) -> Result<DgpSpec> {
        let mut out = self.clone();
        match &mut out.outcome {
            OutcomeLaw::Table(t) => {
                let v = &mut t[cell][player - 1];
                *v += delta;
                if !(0.0..=1.0).contains(v) {
                    return Err(Error::InvalidDgp("perturbed outcome leaves [0,1]".into()));
                }
            }
            OutcomeLaw::Logistic(_) => {
                return Err(Error::InvalidDgp(
                    "outcome perturbation needs a table law".into(),
                ))
            }
        }
        Ok(out)
    }

    /// Copy with the assignment probability of one `(cell, player)` entry
    /// shifted by `delta` and the rest of the row rescaled, an affine map
    /// in `delta` that keeps the row on the simplex.
    pub fn perturb_assignment(&self, cell: usize, player: usize, delta: f64) -> Result<DgpSpec> {
        let mut out = self.clone();
        match &mut out.assignment {
            AssignmentLaw::Table(t) => {
                let row = &mut t[cell];
                let old = row[player - 1];
                let rest = 1.0 - old;
                if rest <= 0.0 {
                    return Err(Error::InvalidDgp("degenerate assignment row".into()));
                }
                for (b, v) in row.iter_mut().enumerate() {
                    if b == player - 1 {
                        *v = old + delta;
                    } else {
                        *v *= 1.0 - delta / rest;
                    }
                    if *v < 0.0 || *v > 1.0 {
                        return Err(Error::InvalidDgp("perturbed assignment leaves [0,1]".into()));
                    }
                }
            }
            AssignmentLaw::Softmax(_) => {
                return Err(Error::InvalidDgp(
                    "assignment perturbation needs a table law".into(),
                ))
            }
        }
        Ok(out)
    }
}

/// Draw `n` i.i.d. attempts from the process. Deterministic given the seed.
pub fn generate(dgp: &DgpSpec, n: usize, seed: u64) -> Result<Dataset> {
    dgp.validate()?;
    if n == 0 {
        return Err(Error::InvalidDgp("need n >= 1 draws".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(n);
    for _ in 0..n {
        let (x, cell) = match &dgp.covariates {
            CovariateLaw::Discrete { cells } => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut chosen = cells.len() - 1;
                for (k, c) in cells.iter().enumerate() {
                    acc += c.prob;
                    if u < acc {
                        chosen = k;
                        break;
                    }
                }
                (cells[chosen].x.clone(), Some(chosen))
            }
            CovariateLaw::Uniform { ranges } => {
                let x: Vec<f64> = ranges
                    .iter()
                    .map(|&(lo, hi)| rng.gen_range(lo..hi))
                    .collect();
                (x, None)
            }
        };
        let pi = dgp.pi_row(&x, cell);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut player = dgp.m;
        for (a, p) in pi.iter().enumerate() {
            acc += p;
            if u < acc {
                player = a + 1;
                break;
            }
        }
        let mu = dgp.mu(&x, cell, player);
        let y = (rng.gen::<f64>() < mu) as i32 as f64;
        records.push(AttemptRecord::new(x, player, y));
    }
    Dataset::with_default_labels(records, dgp.m)
}

/// Cell weights for the estimand's conditioning event, normalized to sum
/// to one over the discrete support.
fn conditioning_cell_weights(dgp: &DgpSpec, spec: &EstimandSpec) -> Result<Vec<f64>> {
    let cells = dgp.cells()?;
    let mut w = vec![0.0; cells.len()];
    for (k, cell) in cells.iter().enumerate() {
        if !spec.x_condition.contains(&cell.x) {
            continue;
        }
        w[k] = match spec.kind {
            EstimandKind::Direct => cell.prob,
            EstimandKind::Indirect | EstimandKind::RandomReplacement => {
                cell.prob * dgp.pi_row(&cell.x, Some(k))[spec.focal_player - 1]
            }
        };
    }
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(Error::EmptyConditioningSet);
    }
    for v in w.iter_mut() {
        *v /= total;
    }
    Ok(w)
}

/// Exact value of the identified functional by enumeration over the
/// discrete support.
pub fn oracle_exact(dgp: &DgpSpec, spec: &EstimandSpec) -> Result<f64> {
    dgp.validate()?;
    let cells = dgp.cells()?;
    let w = conditioning_cell_weights(dgp, spec)?;
    let mut value = 0.0;
    for (k, cell) in cells.iter().enumerate() {
        if w[k] == 0.0 {
            continue;
        }
        let integrand = match spec.kind {
            EstimandKind::Direct => dgp.mu(&cell.x, Some(k), spec.focal_player),
            EstimandKind::Indirect => dgp.m_bar(&cell.x, Some(k)),
            EstimandKind::RandomReplacement => {
                (1..=dgp.m).map(|a| dgp.mu(&cell.x, Some(k), a)).sum::<f64>() / dgp.m as f64
            }
        };
        value += w[k] * integrand;
    }
    Ok(value)
}

/// Exact conditional empirical-rate target `E[Y | A = a, X in X']`.
pub fn oracle_conditional_rate(dgp: &DgpSpec, spec: &EstimandSpec) -> Result<f64> {
    let cells = dgp.cells()?;
    let focal_spec = EstimandSpec {
        kind: EstimandKind::Indirect,
        focal_player: spec.focal_player,
        x_condition: spec.x_condition.clone(),
    };
    let w = conditioning_cell_weights(dgp, &focal_spec)?;
    Ok(cells
        .iter()
        .enumerate()
        .map(|(k, cell)| w[k] * dgp.mu(&cell.x, Some(k), spec.focal_player))
        .sum())
}

/// Exact second moment of the parameter's EIF at the truth, by enumeration
/// over `(cell, player, outcome)`.
pub fn oracle_eif_second_moment(dgp: &DgpSpec, spec: &EstimandSpec) -> Result<f64> {
    let cells = dgp.cells()?;
    let psi = oracle_exact(dgp, spec)?;
    let m = dgp.m;
    let focal = spec.focal_player;

    // True conditioning-event marginals.
    let mut q = 0.0;
    let mut r = 0.0;
    for (k, cell) in cells.iter().enumerate() {
        if spec.x_condition.contains(&cell.x) {
            q += cell.prob;
            r += cell.prob * dgp.pi_row(&cell.x, Some(k))[focal - 1];
        }
    }
    if q <= 0.0 || r <= 0.0 {
        return Err(Error::EmptyConditioningSet);
    }

    let mut second = 0.0;
    for (k, cell) in cells.iter().enumerate() {
        let in_x = spec.x_condition.contains(&cell.x);
        let pi = dgp.pi_row(&cell.x, Some(k));
        for player in 1..=m {
            let mu_own = dgp.mu(&cell.x, Some(k), player);
            for y in [0.0, 1.0] {
                let weight = cell.prob * pi[player - 1] * if y == 1.0 { mu_own } else { 1.0 - mu_own };
                if weight == 0.0 || !in_x {
                    continue;
                }
                let d = match spec.kind {
                    EstimandKind::Direct => {
                        let mu_a = dgp.mu(&cell.x, Some(k), focal);
                        let resid = if player == focal {
                            (y - mu_a) / pi[focal - 1]
                        } else {
                            0.0
                        };
                        (resid + mu_a - psi) / q
                    }
                    EstimandKind::Indirect => {
                        let mbar = dgp.m_bar(&cell.x, Some(k));
                        let mut v = pi[focal - 1] * (y - mbar);
                        if player == focal {
                            v += mbar - psi;
                        }
                        v / r
                    }
                    EstimandKind::RandomReplacement => {
                        let ratio = pi[focal - 1] / pi[player - 1];
                        let mut v = ratio * (y - mu_own) / m as f64;
                        if player == focal {
                            let g = (1..=m)
                                .map(|b| dgp.mu(&cell.x, Some(k), b))
                                .sum::<f64>()
                                / m as f64;
                            v += g - psi;
                        }
                        v / r
                    }
                };
                second += weight * d * d;
            }
        }
    }
    Ok(second)
}

/// Monte-Carlo oracle: plug the true nuisances into the identified
/// functional over simulated draws. Returns the estimate and its
/// Monte-Carlo standard error.
pub fn oracle_mc(dgp: &DgpSpec, spec: &EstimandSpec, draws: usize, seed: u64) -> Result<(f64, f64)> {
    dgp.validate()?;
    if draws < 10_000 {
        return Err(Error::InvalidConfig(
            "Monte-Carlo oracle needs at least 10^4 draws".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::new();
    let cells = match &dgp.covariates {
        CovariateLaw::Discrete { cells } => Some(cells),
        CovariateLaw::Uniform { .. } => None,
    };
    for _ in 0..draws {
        let (x, cell): (Vec<f64>, Option<usize>) = match &dgp.covariates {
            CovariateLaw::Discrete { .. } => {
                let cells = cells.unwrap();
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut chosen = cells.len() - 1;
                for (k, c) in cells.iter().enumerate() {
                    acc += c.prob;
                    if u < acc {
                        chosen = k;
                        break;
                    }
                }
                (cells[chosen].x.clone(), Some(chosen))
            }
            CovariateLaw::Uniform { ranges } => (
                ranges
                    .iter()
                    .map(|&(lo, hi)| rng.gen_range(lo..hi))
                    .collect(),
                None,
            ),
        };
        if !spec.x_condition.contains(&x) {
            continue;
        }
        let pi = dgp.pi_row(&x, cell);
        match spec.kind {
            EstimandKind::Direct => values.push(dgp.mu(&x, cell, spec.focal_player)),
            EstimandKind::Indirect | EstimandKind::RandomReplacement => {
                // Condition on A = a by drawing the player assignment.
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut player = dgp.m;
                for (a, p) in pi.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        player = a + 1;
                        break;
                    }
                }
                if player != spec.focal_player {
                    continue;
                }
                let v = match spec.kind {
                    EstimandKind::Indirect => dgp.m_bar(&x, cell),
                    _ => {
                        (1..=dgp.m).map(|a| dgp.mu(&x, cell, a)).sum::<f64>() / dgp.m as f64
                    }
                };
                values.push(v);
            }
        }
    }
    if values.is_empty() {
        return Err(Error::EmptyConditioningSet);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Build a deterministic dataset whose empirical joint law over
/// `(cell, player)` equals the process exactly, with per-cell outcome sums
/// matching the outcome probabilities exactly. Requires `base_n` chosen so
/// all implied counts are integers.
pub fn exact_count_dataset(dgp: &DgpSpec, base_n: usize) -> Result<Dataset> {
    dgp.validate()?;
    let cells = dgp.cells()?;
    let mut records = Vec::with_capacity(base_n);
    for (k, cell) in cells.iter().enumerate() {
        let pi = dgp.pi_row(&cell.x, Some(k));
        for a in 1..=dgp.m {
            let count_f = base_n as f64 * cell.prob * pi[a - 1];
            let count = count_f.round() as usize;
            if (count_f - count as f64).abs() > 1e-6 {
                return Err(Error::InvalidDgp(format!(
                    "base_n {base_n} does not yield integer counts (cell {k}, player {a}: {count_f})"
                )));
            }
            let ones_f = dgp.mu(&cell.x, Some(k), a) * count as f64;
            let ones = ones_f.round() as usize;
            if (ones_f - ones as f64).abs() > 1e-6 {
                return Err(Error::InvalidDgp(format!(
                    "outcome probability at cell {k}, player {a} does not yield integer successes ({ones_f})"
                )));
            }
            for idx in 0..count {
                let y = (idx < ones) as i32 as f64;
                records.push(AttemptRecord::new(cell.x.clone(), a, y));
            }
        }
    }
    Dataset::with_default_labels(records, dgp.m)
}

/// Exact nuisances for a simulated dataset: the true outcome regression,
/// marginal outcome regression, propensities, and conditioning-event
/// marginals, attached to the resubstitution fold assignment.
pub fn exact_nuisances(
    dgp: &DgpSpec,
    data: &Dataset,
    x_condition: &XCondition,
) -> Result<(FoldAssignment, NuisanceMatrices)> {
    dgp.validate()?;
    let n = data.n();
    let m = dgp.m;
    let cell_of = |x: &[f64]| -> Result<Option<usize>> {
        if !dgp.is_discrete() {
            return Ok(None);
        }
        let cells = dgp.cells()?;
        cells
            .iter()
            .position(|c| c.x == x)
            .map(Some)
            .ok_or_else(|| Error::InvalidDgp("record covariates off the support".into()))
    };

    let mut mu = Array2::<f64>::zeros((n, m));
    let mut m_bar = vec![0.0; n];
    let mut pi = Array2::<f64>::zeros((n, m));
    for i in 0..n {
        let rec = data.record(i);
        let cell = cell_of(&rec.x)?;
        let pi_row = dgp.pi_row(&rec.x, cell);
        for a in 1..=m {
            mu[[i, a - 1]] = dgp.mu(&rec.x, cell, a);
            pi[[i, a - 1]] = pi_row[a - 1];
        }
        m_bar[i] = dgp.m_bar(&rec.x, cell);
    }

    // True conditioning-event marginals (discrete laws only; continuous
    // laws would need quadrature and are not used with exact injection).
    let cells = dgp.cells()?;
    let mut q = 0.0;
    let mut p_player = vec![0.0; m];
    let mut r_joint = vec![0.0; m];
    for (k, cell) in cells.iter().enumerate() {
        let pi_row = dgp.pi_row(&cell.x, Some(k));
        let in_x = x_condition.contains(&cell.x);
        if in_x {
            q += cell.prob;
        }
        for a in 0..m {
            p_player[a] += cell.prob * pi_row[a];
            if in_x {
                r_joint[a] += cell.prob * pi_row[a];
            }
        }
    }

    let folds = FoldAssignment::resubstitution(n);
    let nuisances = NuisanceMatrices::from_parts(
        mu,
        m_bar,
        pi,
        folds.fold_of().to_vec(),
        vec![FoldMarginals {
            p_player,
            q_x: q,
            r_joint,
        }],
    )?;
    Ok((folds, nuisances))
}

/// The two-covariate-cell, two-player process used throughout the test
/// suite. With `tilted` the assignment depends on the covariate (players
/// face different attempt mixes); otherwise assignment is a fair coin.
pub fn four_cell_dgp(tilted: bool) -> DgpSpec {
    let assignment = if tilted {
        vec![vec![0.2, 0.8], vec![0.8, 0.2]]
    } else {
        vec![vec![0.5, 0.5], vec![0.5, 0.5]]
    };
    DgpSpec {
        m: 2,
        covariates: CovariateLaw::Discrete {
            cells: vec![
                DiscreteCell {
                    x: vec![0.0],
                    prob: 0.5,
                },
                DiscreteCell {
                    x: vec![1.0],
                    prob: 0.5,
                },
            ],
        },
        assignment: AssignmentLaw::Table(assignment),
        outcome: OutcomeLaw::Table(vec![vec![0.6, 0.4], vec![0.8, 0.6]]),
    }
}

/// Ten covariate cells, five players, tilted propensities, and rational
/// probabilities chosen so `exact_count_dataset` works at `base_n` 16500.
pub fn ten_cell_dgp() -> DgpSpec {
    let k = 10usize;
    let m = 5usize;
    let total: f64 = (1..=k).map(|v| v as f64).sum();
    let cells: Vec<DiscreteCell> = (0..k)
        .map(|cell| {
            // One-hot encoding with the first cell as reference level.
            let mut x = vec![0.0; k - 1];
            if cell > 0 {
                x[cell - 1] = 1.0;
            }
            DiscreteCell {
                x,
                prob: (cell + 1) as f64 / total,
            }
        })
        .collect();
    let assignment: Vec<Vec<f64>> = (0..k)
        .map(|cell| {
            (1..=m)
                .map(|a| (1 + (a + cell) % m) as f64 / 15.0)
                .collect()
        })
        .collect();
    let outcome: Vec<Vec<f64>> = (0..k)
        .map(|cell| {
            (1..=m)
                .map(|a| (4 + (3 * a + 2 * cell) % 12) as f64 / 20.0)
                .collect()
        })
        .collect();
    DgpSpec {
        m,
        covariates: CovariateLaw::Discrete { cells },
        assignment: AssignmentLaw::Table(assignment),
        outcome: OutcomeLaw::Table(outcome),
    }
}

/// Two players with strong covariate-driven confounding. The outcome law
/// is logistic in the binary covariate with a player shift, so the built-in
/// ridge-logistic learner is correctly specified while the mean-only
/// learner is badly biased. Used for the double-robustness scenarios.
pub fn confounded_dgp() -> DgpSpec {
    let mu = |a: usize, x: f64| -> f64 {
        expit(-0.5 + 1.5 * x - 0.8 * ((a == 2) as i32 as f64))
    };
    DgpSpec {
        m: 2,
        covariates: CovariateLaw::Discrete {
            cells: vec![
                DiscreteCell {
                    x: vec![0.0],
                    prob: 0.5,
                },
                DiscreteCell {
                    x: vec![1.0],
                    prob: 0.5,
                },
            ],
        },
        assignment: AssignmentLaw::Table(vec![vec![0.2, 0.8], vec![0.8, 0.2]]),
        outcome: OutcomeLaw::Table(vec![
            vec![mu(1, 0.0), mu(2, 0.0)],
            vec![mu(1, 1.0), mu(2, 1.0)],
        ]),
    }
}

/// Continuous-covariate process shaped like the kicking setting: two
/// uniform covariates, softmax assignment, logistic outcome with an
/// interaction.
pub fn kicker_like_dgp() -> DgpSpec {
    let m = 6usize;
    let assignment: Vec<LinearForm> = (0..m)
        .map(|a| LinearForm {
            intercept: 0.1 * a as f64,
            slopes: vec![0.6 * ((a % 3) as f64 - 1.0), -0.4 * ((a % 2) as f64)],
            products: Vec::new(),
        })
        .collect();
    let outcome: Vec<LinearForm> = (0..m)
        .map(|a| LinearForm {
            intercept: 2.0 - 0.15 * a as f64,
            slopes: vec![-2.2, -0.6],
            products: vec![(0, 1, 0.8)],
        })
        .collect();
    DgpSpec {
        m,
        covariates: CovariateLaw::Uniform {
            ranges: vec![(0.0, 1.0), (0.0, 1.0)],
        },
        assignment: AssignmentLaw::Softmax(assignment),
        outcome: OutcomeLaw::Logistic(outcome),
    }
}

/// Positivity-stress variant of the four-cell process: the minimum
/// assignment probability is `min_pi`.
pub fn positivity_dgp(min_pi: f64) -> DgpSpec {
    let mut dgp = four_cell_dgp(true);
    dgp.assignment = AssignmentLaw::Table(vec![
        vec![min_pi, 1.0 - min_pi],
        vec![1.0 - min_pi, min_pi],
    ]);
    dgp
}

/// Look up a bundled process by name.
pub fn fixture_by_name(name: &str) -> Option<DgpSpec> {
    match name {
        "four-cell" => Some(four_cell_dgp(false)),
        "four-cell-tilted" => Some(four_cell_dgp(true)),
        "ten-cell" => Some(ten_cell_dgp()),
        "confounded" => Some(confounded_dgp()),
        "kicker" => Some(kicker_like_dgp()),
        _ => None,
    }
}
