//! The two integer selection subproblems and an enumeration oracle.
//!
//! Both problems have separable structure, so they are solved exactly by
//! sorting instead of branch and bound:
//!
//! * the l1 output-fit problem `min sum_{j,i} |z_j^i - theta_i xt_j^i|`
//!   separates per node into a fixed cost and a selection gain;
//! * the min-max rounding problem `min max_i |theta_i - thetat_i|` is solved
//!   by keeping the largest relaxed entries.
//!
//! [`enumerate_selections`] provides the brute-force backend used both to
//! certify the solvers and to run exhaustive searches.

use itertools::Itertools;
use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::outputs::{check_feasible, CardinalityMode, SelectionVector};

/// Default cap on the number of enumerated selections.
pub const DEFAULT_ENUMERATION_CAP: u128 = 2_000_000;

fn sort_by_score_desc(scores: &DVector<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // Ties broken by the lower node index.
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    order
}

/// Data of the l1 output-fit problem: the recorded outputs and the first
/// local coordinates of the simulated reference trajectory, both `(L+1) x N`.
#[derive(Debug, Clone)]
pub struct Milp1Instance {
    z_seq: Vec<DVector<f64>>,
    xtilde_outputs: Vec<DVector<f64>>,
    m_max: usize,
    mode: CardinalityMode,
}

impl Milp1Instance {
    pub fn new(
        z_seq: Vec<DVector<f64>>,
        xtilde_outputs: Vec<DVector<f64>>,
        m_max: usize,
        mode: CardinalityMode,
    ) -> Result<Self> {
        let n = z_seq.first().map(DVector::len).ok_or_else(|| {
            Error::InvalidParameter("output sequence needs at least one sample".into())
        })?;
        if xtilde_outputs.len() != z_seq.len() {
            return Err(Error::DimensionMismatch {
                context: "reference output sequence length",
                expected: z_seq.len(),
                actual: xtilde_outputs.len(),
            });
        }
        for row in z_seq.iter().chain(xtilde_outputs.iter()) {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "output sample width",
                    expected: n,
                    actual: row.len(),
                });
            }
        }
        check_feasible(n, m_max, mode)?;
        Ok(Self {
            z_seq,
            xtilde_outputs,
            m_max,
            mode,
        })
    }

    pub fn node_count(&self) -> usize {
        self.z_seq[0].len()
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    pub fn mode(&self) -> CardinalityMode {
        self.mode
    }

    /// The l1 objective `J[theta]` evaluated directly; this is the canonical
    /// arithmetic shared with the enumeration oracle.
    pub fn objective(&self, theta: &SelectionVector) -> f64 {
        let mask = theta.theta();
        let mut total = 0.0;
        for (z, xt) in self.z_seq.iter().zip(&self.xtilde_outputs) {
            for i in 0..z.len() {
                total += (z[i] - mask[i] * xt[i]).abs();
            }
        }
        total
    }

    /// Per-node gain of selecting node `i`:
    /// `sum_j |z_j^i| - sum_j |z_j^i - xt_j^i|`.
    pub fn gains(&self) -> DVector<f64> {
        let n = self.node_count();
        let mut gains = DVector::zeros(n);
        for (z, xt) in self.z_seq.iter().zip(&self.xtilde_outputs) {
            for i in 0..n {
                gains[i] += z[i].abs() - (z[i] - xt[i]).abs();
            }
        }
        gains
    }
}

/// Exact solution of the l1 output-fit problem. Equality mode keeps the
/// `M_max` nodes of largest gain; inequality mode keeps only strictly
/// positive gains, capped at `M_max`. Ties go to the lower node index.
pub fn solve_milp1(instance: &Milp1Instance) -> Result<(SelectionVector, f64)> {
    let n = instance.node_count();
    let gains = instance.gains();
    let order = sort_by_score_desc(&gains);
    let mut mask = vec![false; n];
    match instance.mode {
        CardinalityMode::Eq => {
            for &i in order.iter().take(instance.m_max) {
                mask[i] = true;
            }
        }
        CardinalityMode::Le => {
            for &i in order.iter().take(instance.m_max) {
                if gains[i] > 0.0 {
                    mask[i] = true;
                }
            }
        }
    }
    let theta = SelectionVector::binary_from_mask(&mask, instance.m_max, instance.mode)?;
    let objective = instance.objective(&theta);
    Ok((theta, objective))
}

/// Data of the min-max rounding problem: the relaxed selection to round.
#[derive(Debug, Clone)]
pub struct Milp2Instance {
    theta_relaxed: DVector<f64>,
    m_max: usize,
    mode: CardinalityMode,
}

impl Milp2Instance {
    pub fn new(theta_relaxed: DVector<f64>, m_max: usize, mode: CardinalityMode) -> Result<Self> {
        check_feasible(theta_relaxed.len(), m_max, mode)?;
        if let Some(idx) = theta_relaxed.iter().position(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::InvalidParameter(format!(
                "relaxed entry {idx} = {} outside [0, 1]",
                theta_relaxed[idx]
            )));
        }
        Ok(Self {
            theta_relaxed,
            m_max,
            mode,
        })
    }

    pub fn node_count(&self) -> usize {
        self.theta_relaxed.len()
    }

    /// The min-max objective `max_i |theta_i - thetat_i|` for a binary theta.
    pub fn objective(&self, theta: &SelectionVector) -> f64 {
        theta
            .theta()
            .iter()
            .zip(self.theta_relaxed.iter())
            .map(|(&t, &r)| (t - r).abs())
            .fold(0.0, f64::max)
    }

    fn eq_solution(&self, m: usize) -> Vec<bool> {
        let order = sort_by_score_desc(&self.theta_relaxed);
        let mut mask = vec![false; self.node_count()];
        for &i in order.iter().take(m) {
            mask[i] = true;
        }
        mask
    }
}

/// Exact solution of the min-max rounding problem. Equality mode keeps the
/// `M_max` largest relaxed entries. Inequality mode evaluates the equality
/// solution at every cardinality `0..=M_max` and keeps the best, preferring
/// smaller cardinality on ties.
pub fn solve_milp2(instance: &Milp2Instance) -> Result<(SelectionVector, f64)> {
    let build = |mask: &[bool]| -> Result<(SelectionVector, f64)> {
        let theta = SelectionVector::binary_from_mask(mask, instance.m_max, instance.mode)?;
        let q = instance.objective(&theta);
        Ok((theta, q))
    };
    match instance.mode {
        CardinalityMode::Eq => build(&instance.eq_solution(instance.m_max)),
        CardinalityMode::Le => {
            let mut best: Option<(SelectionVector, f64)> = None;
            for m in 0..=instance.m_max {
                let (theta, q) = build(&instance.eq_solution(m))?;
                if best.as_ref().is_none_or(|(_, bq)| q < *bq) {
                    best = Some((theta, q));
                }
            }
            Ok(best.expect("cardinality range is never empty"))
        }
    }
}

/// Number of feasible binary selections.
pub fn count_selections(n: usize, m_max: usize, mode: CardinalityMode) -> u128 {
    let binomial = |m: usize| -> u128 {
        let mut acc: u128 = 1;
        for k in 0..m.min(n - m) {
            acc = acc * (n - k) as u128 / (k + 1) as u128;
        }
        acc
    };
    match mode {
        CardinalityMode::Eq => binomial(m_max),
        CardinalityMode::Le => (0..=m_max).map(binomial).sum(),
    }
}

/// Iterates every feasible binary selection exactly once.
///
/// Equality mode yields index combinations in lexicographic order
/// (`{1,2} < {1,3} < {2,3}`); inequality mode walks cardinalities
/// `0..=M_max` in this order. Refuses instances above `cap`.
pub fn enumerate_selections_capped(
    n: usize,
    m_max: usize,
    mode: CardinalityMode,
    cap: u128,
) -> Result<impl Iterator<Item = SelectionVector>> {
    check_feasible(n, m_max, mode)?;
    let count = count_selections(n, m_max, mode);
    if count > cap {
        return Err(Error::EnumerationTooLarge { count, cap });
    }
    let cardinalities: Vec<usize> = match mode {
        CardinalityMode::Eq => vec![m_max],
        CardinalityMode::Le => (0..=m_max).collect(),
    };
    Ok(cardinalities.into_iter().flat_map(move |m| {
        (0..n).combinations(m).map(move |indices| {
            SelectionVector::binary_from_indices(n, &indices, m_max, mode)
                .expect("enumerated selections are feasible by construction")
        })
    }))
}

/// [`enumerate_selections_capped`] at the default cap.
pub fn enumerate_selections(
    n: usize,
    m_max: usize,
    mode: CardinalityMode,
) -> Result<impl Iterator<Item = SelectionVector>> {
    enumerate_selections_capped(n, m_max, mode, DEFAULT_ENUMERATION_CAP)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn vec2(values: &[f64]) -> DVector<f64> {
        DVector::from_vec(values.to_vec())
    }

    #[test]
    fn milp1_two_node_example() {
        let instance = Milp1Instance::new(
            vec![vec2(&[1.0, 0.5])],
            vec![vec2(&[0.9, 2.0])],
            1,
            CardinalityMode::Eq,
        )
        .unwrap();
        let (theta, objective) = solve_milp1(&instance).unwrap();
        assert_eq!(theta.selected_nodes(), vec![0]);
        assert!((objective - 0.6).abs() < 1e-15);
        // The alternative selection costs 1.0 + 1.5 = 2.5.
        let alt = SelectionVector::binary_from_indices(2, &[1], 1, CardinalityMode::Eq).unwrap();
        assert!((instance.objective(&alt) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn milp1_exact_reference_selects_largest_outputs() {
        // xtilde == z: gains reduce to the l1 mass of each node's outputs.
        let z = vec![vec2(&[1.0, -3.0, 0.5]), vec2(&[2.0, 1.0, 0.25])];
        let instance = Milp1Instance::new(z.clone(), z, 2, CardinalityMode::Eq).unwrap();
        let (theta, objective) = solve_milp1(&instance).unwrap();
        assert_eq!(theta.selected_nodes(), vec![0, 1]);
        assert!((objective - 0.75).abs() < 1e-15);
    }

    #[test]
    fn milp1_le_mode_keeps_nothing_when_gains_negative() {
        let instance = Milp1Instance::new(
            vec![vec2(&[0.0, 0.0])],
            vec![vec2(&[5.0, -3.0])],
            2,
            CardinalityMode::Le,
        )
        .unwrap();
        let (theta, objective) = solve_milp1(&instance).unwrap();
        assert_eq!(theta.cardinality(), 0);
        assert_eq!(objective, 0.0);
    }

    #[test]
    fn milp2_three_node_example() {
        let instance =
            Milp2Instance::new(vec2(&[0.9, 0.2, 0.7]), 2, CardinalityMode::Eq).unwrap();
        let (theta, q) = solve_milp2(&instance).unwrap();
        assert_eq!(theta.selected_nodes(), vec![0, 2]);
        assert!((q - 0.3).abs() < 1e-15);
    }

    #[test]
    fn milp2_binary_input_is_kept() {
        let instance =
            Milp2Instance::new(vec2(&[1.0, 0.0, 1.0, 0.0]), 2, CardinalityMode::Eq).unwrap();
        let (theta, q) = solve_milp2(&instance).unwrap();
        assert_eq!(theta.selected_nodes(), vec![0, 2]);
        assert_eq!(q, 0.0);
    }

    #[test]
    fn milp2_symmetric_half_ties_to_lowest_indices() {
        let instance =
            Milp2Instance::new(DVector::from_element(4, 0.5), 2, CardinalityMode::Eq).unwrap();
        let (theta, q) = solve_milp2(&instance).unwrap();
        assert_eq!(theta.selected_nodes(), vec![0, 1]);
        assert!((q - 0.5).abs() < 1e-15);
    }

    #[test]
    fn enumeration_orders_and_counts() {
        let eq: Vec<Vec<usize>> = enumerate_selections(3, 1, CardinalityMode::Eq)
            .unwrap()
            .map(|s| s.selected_nodes())
            .collect();
        assert_eq!(eq, vec![vec![0], vec![1], vec![2]]);
        let le: Vec<Vec<usize>> = enumerate_selections(3, 1, CardinalityMode::Le)
            .unwrap()
            .map(|s| s.selected_nodes())
            .collect();
        assert_eq!(le, vec![vec![], vec![0], vec![1], vec![2]]);
        assert_eq!(
            enumerate_selections(10, 4, CardinalityMode::Eq).unwrap().count(),
            210
        );
        assert_eq!(count_selections(10, 4, CardinalityMode::Eq), 210);
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let err = enumerate_selections_capped(30, 15, CardinalityMode::Eq, 1000)
            .err()
            .unwrap();
        match err {
            Error::EnumerationTooLarge { count, cap } => {
                assert_eq!(cap, 1000);
                assert_eq!(count, 155_117_520);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    fn random_vec(rng: &mut rand_chacha::ChaCha12Rng, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0))
    }

    fn random_milp1(rng: &mut rand_chacha::ChaCha12Rng) -> Milp1Instance {
        let n = rng.random_range(2..=12);
        let l: usize = rng.random_range(0..=6);
        let m_max = rng.random_range(1..=n);
        let mode = if rng.random_bool(0.5) {
            CardinalityMode::Eq
        } else {
            CardinalityMode::Le
        };
        let z: Vec<_> = (0..=l).map(|_| random_vec(rng, n)).collect();
        let xt: Vec<_> = (0..=l).map(|_| random_vec(rng, n)).collect();
        Milp1Instance::new(z, xt, m_max, mode).unwrap()
    }

    #[test]
    fn milp1_matches_enumeration_on_random_instances() {
        let mut rng = crate::seed::rng(100, "milp1-oracle");
        for _ in 0..200 {
            let instance = random_milp1(&mut rng);
            let (theta, objective) = solve_milp1(&instance).unwrap();
            assert_eq!(objective, instance.objective(&theta));
            let best = enumerate_selections(instance.node_count(), instance.m_max(), instance.mode())
                .unwrap()
                .map(|s| instance.objective(&s))
                .fold(f64::INFINITY, f64::min);
            assert_eq!(objective, best);
        }
    }

    #[test]
    fn milp2_matches_enumeration_on_random_instances() {
        let mut rng = crate::seed::rng(101, "milp2-oracle");
        for _ in 0..200 {
            let n = rng.random_range(2..=12);
            let m_max = rng.random_range(1..=n);
            let mode = if rng.random_bool(0.5) {
                CardinalityMode::Eq
            } else {
                CardinalityMode::Le
            };
            let instance = Milp2Instance::new(
                DVector::from_fn(n, |_, _| rng.random_range(0.0..1.0)),
                m_max,
                mode,
            )
            .unwrap();
            let (theta, q) = solve_milp2(&instance).unwrap();
            assert_eq!(q, instance.objective(&theta));
            let best = enumerate_selections(n, m_max, mode)
                .unwrap()
                .map(|s| instance.objective(&s))
                .fold(f64::INFINITY, f64::min);
            assert_eq!(q, best);
        }
    }

    #[test]
    fn solvers_are_permutation_equivariant() {
        let mut rng = crate::seed::rng(102, "milp-perm");
        for _ in 0..20 {
            let n = 6;
            let theta = DVector::from_fn(n, |_, _| rng.random_range(0.0..1.0));
            // A random permutation via sorting random keys.
            let keys: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let mut perm: Vec<usize> = (0..n).collect();
            perm.sort_by(|&a, &b| keys[a].partial_cmp(&keys[b]).unwrap());
            let permuted = DVector::from_fn(n, |i, _| theta[perm[i]]);

            let base = solve_milp2(&Milp2Instance::new(theta.clone(), 3, CardinalityMode::Eq).unwrap())
                .unwrap();
            let moved =
                solve_milp2(&Milp2Instance::new(permuted, 3, CardinalityMode::Eq).unwrap()).unwrap();
            // Objectives agree; the selections map through the permutation
            // whenever no entries tie.
            assert_eq!(base.1, moved.1);
            let mapped: std::collections::BTreeSet<usize> = base
                .0
                .selected_nodes()
                .iter()
                .map(|&i| perm.iter().position(|&p| p == i).unwrap())
                .collect();
            let got: std::collections::BTreeSet<usize> =
                moved.0.selected_nodes().into_iter().collect();
            assert_eq!(mapped, got);
        }
    }
}
