//! Reference solvers the greedy planner is measured against: exhaustive
//! enumeration for small instances, and a Hungarian-matching upper bound on
//! the optimum obtained by letting each robot use several actions at once.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::assign::{check_sizes, sanitized, tuples_over, QualityModel};
use crate::error::{Error, Result};
use crate::model::{Action, ActionRoster, Assignment};

pub const DEFAULT_BUDGET: u128 = 100_000_000;

fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // exact at every step: acc·(n−i) is divisible by (i+1)
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Number of complete assignments when every robot has `actions` actions:
/// `∏_{m<M} C(N − n·m, n)·Aⁿ`. Targets are distinguishable, tuples are not
/// ordered internally.
pub fn count_combinations(n: usize, robots: usize, targets: usize, actions: usize) -> Result<u128> {
    check_sizes(n, robots, targets)?;
    let per_tuple = (actions as u128).checked_pow(n as u32).ok_or(Error::CountOverflow)?;
    let mut total: u128 = 1;
    for m in 0..targets {
        let choose = binomial(robots - n * m, n).ok_or(Error::CountOverflow)?;
        total = total
            .checked_mul(choose)
            .and_then(|t| t.checked_mul(per_tuple))
            .ok_or(Error::CountOverflow)?;
    }
    Ok(total)
}

/// Same count for a roster whose robots may have different action counts.
pub fn count_roster_combinations(n: usize, roster: &ActionRoster, targets: usize) -> Result<u128> {
    if let Some(a) = roster.uniform_size() {
        return count_combinations(n, roster.robots(), targets, a);
    }
    check_sizes(n, roster.robots(), targets)?;
    if roster.robots() > 63 {
        return Err(Error::CountOverflow);
    }
    let sizes: Vec<u128> = (0..roster.robots()).map(|r| roster.actions(r).len() as u128).collect();
    let full: u64 = (1u64 << roster.robots()) - 1;
    let mut memo = HashMap::new();
    count_from(full, targets, n, &sizes, &mut memo)
}

fn count_from(free: u64, targets_left: usize, n: usize, sizes: &[u128], memo: &mut HashMap<u64, u128>) -> Result<u128> {
    if targets_left == 0 {
        return Ok(1);
    }
    if let Some(&c) = memo.get(&free) {
        return Ok(c);
    }
    let robots: Vec<usize> = (0..sizes.len()).filter(|r| free >> r & 1 == 1).collect();
    let mut total: u128 = 0;
    for combo in itertools::Itertools::combinations(robots.iter().copied(), n) {
        let ways = combo.iter().try_fold(1u128, |acc, &r| acc.checked_mul(sizes[r]));
        let mask = combo.iter().fold(0u64, |m, &r| m | 1 << r);
        let rest = count_from(free & !mask, targets_left - 1, n, sizes, memo)?;
        total = ways
            .and_then(|w| w.checked_mul(rest))
            .and_then(|x| total.checked_add(x))
            .ok_or(Error::CountOverflow)?;
    }
    memo.insert(free, total);
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExhaustiveOptions {
    /// Largest number of complete assignments the search will visit.
    pub budget: u128,
    /// Prune with the sum of per-target maxima. Never changes the optimum
    /// but visits fewer leaves.
    pub branch_and_bound: bool,
}

impl Default for ExhaustiveOptions {
    fn default() -> Self {
        Self {
            budget: DEFAULT_BUDGET,
            branch_and_bound: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustiveOutcome {
    pub assignment: Assignment,
    pub leaves: u128,
}

struct Group {
    mask: u64,
    options: Vec<(Vec<Action>, f64)>,
}

struct Search<'a> {
    per_target: &'a [Vec<Group>],
    suffix_max: Vec<f64>,
    bnb: bool,
    leaves: u128,
    stack: Vec<(usize, usize)>,
    best: Option<(f64, Vec<(usize, usize)>)>,
}

impl Search<'_> {
    fn visit(&mut self, target: usize, free: u64, partial: f64) {
        if target == self.per_target.len() {
            self.leaves += 1;
            if self.best.as_ref().is_none_or(|(b, _)| partial > *b) {
                self.best = Some((partial, self.stack.clone()));
            }
            return;
        }
        if self.bnb {
            if let Some((b, _)) = &self.best {
                let bound = partial + self.suffix_max[target];
                if bound < *b - 1e-12 * b.abs() {
                    return;
                }
            }
        }
        let groups = &self.per_target[target];
        for (gi, g) in groups.iter().enumerate() {
            if g.mask & free != g.mask {
                continue;
            }
            for (oi, (_, q)) in g.options.iter().enumerate() {
                self.stack.push((gi, oi));
                self.visit(target + 1, free & !g.mask, partial + q);
                self.stack.pop();
            }
        }
    }
}

/// Optimal assignment by depth-first enumeration over targets in id order.
/// Among equal totals the lexicographically first assignment wins.
pub fn exhaustive_assign<Q: QualityModel + ?Sized>(
    n: usize,
    roster: &ActionRoster,
    targets: usize,
    model: &Q,
    opts: &ExhaustiveOptions,
) -> Result<ExhaustiveOutcome> {
    let count = count_roster_combinations(n, roster, targets)?;
    if count > opts.budget {
        return Err(Error::BudgetExceeded {
            count,
            budget: opts.budget,
        });
    }
    if roster.robots() > 64 {
        return Err(Error::BudgetExceeded {
            count,
            budget: opts.budget,
        });
    }

    let all: Vec<usize> = (0..roster.robots()).collect();
    let tuples = tuples_over(&all, n, roster);
    let per_target: Vec<Vec<Group>> = (0..targets)
        .map(|j| {
            let mut groups: Vec<Group> = Vec::new();
            for t in &tuples {
                let mask = t.iter().fold(0u64, |m, a| m | 1 << a.robot_id);
                let q = sanitized(model, t, j);
                match groups.last_mut() {
                    Some(g) if g.mask == mask => g.options.push((t.clone(), q)),
                    _ => groups.push(Group {
                        mask,
                        options: vec![(t.clone(), q)],
                    }),
                }
            }
            groups
        })
        .collect();
    let mut suffix_max = vec![0.0; targets + 1];
    for j in (0..targets).rev() {
        let best = per_target[j]
            .iter()
            .flat_map(|g| g.options.iter().map(|o| o.1))
            .fold(0.0, f64::max);
        suffix_max[j] = suffix_max[j + 1] + best;
    }

    let full = if roster.robots() == 64 {
        u64::MAX
    } else {
        (1u64 << roster.robots()) - 1
    };
    let mut search = Search {
        per_target: &per_target,
        suffix_max,
        bnb: opts.branch_and_bound,
        leaves: 0,
        stack: Vec::with_capacity(targets),
        best: None,
    };
    search.visit(0, full, 0.0);

    let (total, picks) = search.best.expect("feasible instance has a leaf");
    let mut per = Vec::with_capacity(targets);
    let mut per_q = Vec::with_capacity(targets);
    for (j, (gi, oi)) in picks.into_iter().enumerate() {
        let (t, q) = &per_target[j][gi].options[oi];
        per.push(t.clone());
        per_q.push(*q);
    }
    Ok(ExhaustiveOutcome {
        assignment: Assignment {
            tuple_size: n,
            per_target: per,
            per_target_quality: per_q,
            total_quality: total,
        },
        leaves: search.leaves,
    })
}

/// Dense nonnegative weights for bipartite matching.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    w: Vec<f64>,
}

impl WeightMatrix {
    pub fn new(rows: usize, cols: usize, w: Vec<f64>) -> Result<Self> {
        if w.len() != rows * cols {
            return Err(Error::LengthMismatch {
                left: w.len(),
                right: rows * cols,
            });
        }
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidConfig("weights must be finite and nonnegative".into()));
        }
        Ok(Self { rows, cols, w })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidConfig("ragged weight matrix".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.w[r * self.cols + c]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// Column matched to each row, if any.
    pub row_to_col: Vec<Option<usize>>,
    pub value: f64,
}

/// Maximum-weight bipartite matching (Kuhn–Munkres with potentials,
/// O(r²·c) with `r` the shorter side). With nonnegative weights a maximum
/// matching saturates the shorter side, so no padding is needed.
pub fn hungarian_max(w: &WeightMatrix) -> Matching {
    let mut row_to_col = vec![None; w.rows];
    if w.rows == 0 || w.cols == 0 {
        return Matching { row_to_col, value: 0.0 };
    }
    if w.rows <= w.cols {
        for (j, i) in min_cost_cover(w.rows, w.cols, |i, j| -w.get(i, j)) {
            row_to_col[i] = Some(j);
        }
    } else {
        for (i, j) in min_cost_cover(w.cols, w.rows, |j, i| -w.get(i, j)) {
            row_to_col[i] = Some(j);
        }
    }
    let value = row_to_col
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|j| w.get(i, j)))
        .sum();
    Matching { row_to_col, value }
}

/// Min-cost assignment of every one of `n` rows to distinct columns out of
/// `m >= n`. Returns `(column, row)` pairs.
fn min_cost_cover(n: usize, m: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<(usize, usize)> {
    // 1-based potentials; column 0 is a sentinel
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut minv = vec![f64::INFINITY; m + 1];
    let mut used = vec![false; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=m).filter(|&j| p[j] != 0).map(|j| (j - 1, p[j] - 1)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedBound {
    pub value: f64,
    pub matching: Matching,
    pub weights: WeightMatrix,
}

/// Upper bound on the optimum from the relaxation that lets a robot take
/// several actions in one step.
///
/// Rows are all robot-actions, columns are `n` copies of every target. The
/// weight of action `a` on a copy of target `j` is `1/n` times the best
/// quality of any tuple containing `a` for `j`. Any feasible assignment maps
/// to a matching at least as heavy, so the matching optimum bounds the
/// constrained optimum. For `n = 1` the weights are the plain qualities and
/// the matching solves the relaxed problem exactly.
pub fn relaxed_upper_bound<Q: QualityModel + ?Sized>(
    n: usize,
    roster: &ActionRoster,
    targets: usize,
    model: &Q,
) -> Result<RelaxedBound> {
    check_sizes(n, roster.robots(), targets)?;
    let actions: Vec<Action> = roster.iter().copied().collect();
    let mut row_of: HashMap<(usize, usize), usize> = HashMap::with_capacity(actions.len());
    for (i, a) in actions.iter().enumerate() {
        row_of.insert(a.key(), i);
    }
    let mut best = vec![0.0f64; actions.len() * targets];
    let all: Vec<usize> = (0..roster.robots()).collect();
    for t in tuples_over(&all, n, roster) {
        for j in 0..targets {
            let q = sanitized(model, &t, j);
            for a in &t {
                let cell = &mut best[row_of[&a.key()] * targets + j];
                *cell = cell.max(q);
            }
        }
    }
    let cols = n * targets;
    let mut w = vec![0.0; actions.len() * cols];
    for row in 0..actions.len() {
        for j in 0..targets {
            for c in 0..n {
                w[row * cols + j * n + c] = best[row * targets + j] / n as f64;
            }
        }
    }
    let weights = WeightMatrix::new(actions.len(), cols, w)?;
    let matching = hungarian_max(&weights);
    Ok(RelaxedBound {
        value: matching.value,
        matching,
        weights,
    })
}

/// Uniformly random feasible assignment: shuffle the robots, hand out `n`
/// per target, pick one action for each.
pub fn random_assign<Q: QualityModel + ?Sized, R: Rng + ?Sized>(
    n: usize,
    roster: &ActionRoster,
    targets: usize,
    model: &Q,
    rng: &mut R,
) -> Result<Assignment> {
    check_sizes(n, roster.robots(), targets)?;
    let mut robots: Vec<usize> = (0..roster.robots()).collect();
    robots.shuffle(rng);
    let mut per_target = Vec::with_capacity(targets);
    let mut per_q = Vec::with_capacity(targets);
    for j in 0..targets {
        let mut tuple: Vec<Action> = robots[j * n..(j + 1) * n]
            .iter()
            .map(|&r| {
                let set = roster.actions(r);
                set[rng.random_range(0..set.len())]
            })
            .collect();
        tuple.sort_by_key(|a| a.robot_id);
        per_q.push(sanitized(model, &tuple, j));
        per_target.push(tuple);
    }
    let total = per_q.iter().sum();
    Ok(Assignment {
        tuple_size: n,
        per_target,
        per_target_quality: per_q,
        total_quality: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assign::greedy_assign;
    use crate::model::validate_assignment;
    use crate::rng::{stream, Purpose};
    use itertools::Itertools;

    #[test]
    fn reported_counts() {
        assert_eq!(count_combinations(1, 8, 8, 9).unwrap(), 1_735_643_790_720);
        assert_eq!(count_combinations(2, 8, 4, 9).unwrap(), 108_477_736_920);
        assert_eq!(count_combinations(1, 1, 1, 1).unwrap(), 1);
        assert_eq!(count_combinations(1, 3, 3, 2).unwrap(), 48);
        assert!(matches!(count_combinations(2, 3, 2, 1), Err(Error::Infeasible { .. })));
        assert_eq!(count_combinations(1, 200, 100, 1000), Err(Error::CountOverflow));
    }

    #[test]
    fn heterogeneous_count_matches_enumeration() {
        let roster = ActionRoster::new(vec![
            vec![(0.0, 0.0)],
            vec![(0.0, 0.0), (1.0, 0.0)],
            vec![(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)],
            vec![(0.0, 0.0), (1.0, 0.0)],
        ])
        .unwrap();
        for (n, m) in [(1, 1), (1, 2), (1, 3), (1, 4), (2, 1), (2, 2)] {
            let out = exhaustive_assign(
                n,
                &roster,
                m,
                &|_: &[Action], _: usize| 1.0,
                &ExhaustiveOptions::default(),
            )
            .unwrap();
            assert_eq!(
                count_roster_combinations(n, &roster, m).unwrap(),
                out.leaves,
                "n={n} m={m}"
            );
        }
    }

    #[test]
    fn stub_optimum_is_seven() {
        let q = [[4.0, 3.0], [4.0, 1.0]];
        let roster = ActionRoster::uniform(2, &[(0.0, 0.0)]).unwrap();
        let model = |t: &[Action], j: usize| q[t[0].robot_id][j];
        let out = exhaustive_assign(1, &roster, 2, &model, &ExhaustiveOptions::default()).unwrap();
        assert_eq!(out.assignment.total_quality, 7.0);
        assert_eq!(out.assignment.per_target[0][0].robot_id, 1);
        assert_eq!(out.assignment.per_target[1][0].robot_id, 0);
        assert_eq!(out.leaves, 2);
    }

    #[test]
    fn singleton_matches_greedy() {
        let roster = ActionRoster::uniform(1, &[(0.0, 0.0)]).unwrap();
        let model = |_: &[Action], _: usize| 0.75;
        let opt = exhaustive_assign(1, &roster, 1, &model, &ExhaustiveOptions::default()).unwrap();
        assert_eq!(opt.assignment, greedy_assign(1, &roster, 1, &model).unwrap());
        let bound = relaxed_upper_bound(1, &roster, 1, &model).unwrap();
        assert_eq!(bound.value, 0.75);
    }

    #[test]
    fn budget_refusal() {
        let roster = ActionRoster::uniform(3, &[(0.0, 0.0), (1.0, 0.0)]).unwrap();
        let opts = ExhaustiveOptions {
            budget: 47,
            ..Default::default()
        };
        let err = exhaustive_assign(1, &roster, 3, &|_: &[Action], _: usize| 1.0, &opts).unwrap_err();
        assert_eq!(err, Error::BudgetExceeded { count: 48, budget: 47 });
    }

    fn hashed_model(seed: u64) -> impl Fn(&[Action], usize) -> f64 + Sync {
        move |t: &[Action], j: usize| {
            let mut h = crate::rng::mix(seed ^ j as u64);
            for a in t {
                h = crate::rng::mix(h ^ ((a.robot_id as u64) << 20) ^ a.action_idx as u64);
            }
            (h >> 11) as f64 / (1u64 << 53) as f64
        }
    }

    #[test]
    fn random_instances_leaves_and_sandwich() {
        let roster = ActionRoster::uniform(3, &[(0.0, 0.0), (1.5, 0.0)]).unwrap();
        for seed in 0..20 {
            let model = hashed_model(seed);
            let opt = exhaustive_assign(1, &roster, 3, &model, &ExhaustiveOptions::default()).unwrap();
            assert_eq!(opt.leaves, 48);
            assert!(validate_assignment(&opt.assignment, &roster, 3).is_empty());
            let g = greedy_assign(1, &roster, 3, &model).unwrap();
            let b = relaxed_upper_bound(1, &roster, 3, &model).unwrap();
            assert!(g.total_quality <= opt.assignment.total_quality + 1e-12);
            assert!(opt.assignment.total_quality <= b.value + 1e-12);
            assert!(g.total_quality >= opt.assignment.total_quality / 2.0);
        }
    }

    #[test]
    fn branch_and_bound_keeps_the_optimum() {
        let roster = ActionRoster::uniform(6, &[(0.0, 0.0), (1.5, 0.0)]).unwrap();
        for seed in 0..10 {
            let model = hashed_model(100 + seed);
            for (n, m) in [(1, 4), (2, 3)] {
                let plain = exhaustive_assign(n, &roster, m, &model, &ExhaustiveOptions::default()).unwrap();
                let pruned = exhaustive_assign(
                    n,
                    &roster,
                    m,
                    &model,
                    &ExhaustiveOptions {
                        branch_and_bound: true,
                        ..Default::default()
                    },
                )
                .unwrap();
                assert_eq!(plain.assignment, pruned.assignment);
                assert!(pruned.leaves <= plain.leaves);
            }
        }
    }

    #[test]
    fn relaxation_can_exceed_the_optimum() {
        // robot 0 holds the top quality for both targets, one per action
        let roster = ActionRoster::uniform(2, &[(0.0, 0.0), (1.5, 0.0)]).unwrap();
        let model = |t: &[Action], j: usize| match (t[0].robot_id, t[0].action_idx, j) {
            (0, 0, 0) => 5.0,
            (0, 1, 1) => 5.0,
            (1, _, _) => 1.0,
            _ => 0.0,
        };
        let opt = exhaustive_assign(1, &roster, 2, &model, &ExhaustiveOptions::default()).unwrap();
        let b = relaxed_upper_bound(1, &roster, 2, &model).unwrap();
        assert_eq!(opt.assignment.total_quality, 6.0);
        assert_eq!(b.value, 10.0);
    }

    #[test]
    fn pair_bound_dominates_every_feasible_pair_assignment() {
        let roster = ActionRoster::uniform(6, &[(0.0, 0.0), (1.5, 0.0)]).unwrap();
        for seed in 0..10 {
            let model = hashed_model(500 + seed);
            let b = relaxed_upper_bound(2, &roster, 3, &model).unwrap();
            let mut rng = stream(seed, Purpose::RandomSolver, 0);
            for _ in 0..200 {
                let a = random_assign(2, &roster, 3, &model, &mut rng).unwrap();
                assert!(validate_assignment(&a, &roster, 3).is_empty());
                assert!(a.total_quality <= b.value + 1e-12);
            }
            let opt = exhaustive_assign(2, &roster, 3, &model, &ExhaustiveOptions::default()).unwrap();
            assert!(opt.assignment.total_quality <= b.value + 1e-12);
        }
    }

    fn brute_force(w: &WeightMatrix) -> f64 {
        let k = w.rows().max(w.cols());
        let cell = |i: usize, j: usize| if i < w.rows() && j < w.cols() { w.get(i, j) } else { 0.0 };
        (0..k)
            .permutations(k)
            .map(|p| p.iter().enumerate().map(|(i, &j)| cell(i, j)).sum::<f64>())
            .fold(0.0, f64::max)
    }

    #[test]
    fn hungarian_examples() {
        let m = hungarian_max(&WeightMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 1.0]]).unwrap());
        assert_eq!(m.value, 5.0);
        assert_eq!(m.row_to_col, vec![Some(1), Some(0)]);
        let d = WeightMatrix::from_rows(&[vec![2.0, 0.0, 0.0], vec![0.0, 3.0, 0.0], vec![0.0, 0.0, 0.5]]).unwrap();
        let m = hungarian_max(&d);
        assert_eq!(m.value, 5.5);
        assert_eq!(m.row_to_col, vec![Some(0), Some(1), Some(2)]);
        let empty = WeightMatrix::new(0, 3, vec![]).unwrap();
        assert_eq!(hungarian_max(&empty).value, 0.0);
        assert!(WeightMatrix::new(1, 1, vec![-1.0]).is_err());
        assert!(WeightMatrix::new(1, 2, vec![1.0]).is_err());
    }

    #[test]
    fn hungarian_matches_brute_force_and_is_permutation_invariant() {
        let mut rng = stream(31, Purpose::Scenario, 0);
        for _ in 0..60 {
            let rows = rng.random_range(1..=6);
            let cols = rng.random_range(1..=6);
            let w: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(0.0..1.0)).collect();
            let wm = WeightMatrix::new(rows, cols, w.clone()).unwrap();
            let m = hungarian_max(&wm);
            assert!((m.value - brute_force(&wm)).abs() < 1e-9);
            let matched = m.row_to_col.iter().flatten().count();
            assert_eq!(matched, rows.min(cols));

            let mut rp: Vec<usize> = (0..rows).collect();
            let mut cp: Vec<usize> = (0..cols).collect();
            rp.shuffle(&mut rng);
            cp.shuffle(&mut rng);
            let pw: Vec<f64> = (0..rows)
                .flat_map(|i| cp.iter().map(move |&j| (i, j)).collect::<Vec<_>>())
                .map(|(i, j)| w[rp[i] * cols + j])
                .collect();
            let pm = hungarian_max(&WeightMatrix::new(rows, cols, pw).unwrap());
            assert!((pm.value - m.value).abs() < 1e-9);
        }
    }
}
