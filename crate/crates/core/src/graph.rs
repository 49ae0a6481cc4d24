//! From precision samples to a graph: partial correlations, the Wishart
//! reference rule, median-probability aggregation, and the constrained
//! maximum-likelihood fit used to score candidate sparsity levels.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Symmetric adjacency with an empty diagonal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeMatrix {
    adjacency: DMatrix<bool>,
}

impl EdgeMatrix {
    pub fn empty(p: usize) -> Self {
        Self { adjacency: DMatrix::from_element(p, p, false) }
    }

    pub fn complete(p: usize) -> Self {
        Self { adjacency: DMatrix::from_fn(p, p, |i, j| i != j) }
    }

    /// Validates symmetry and the empty diagonal.
    pub fn from_matrix(adjacency: DMatrix<bool>) -> Result<Self> {
        let p = adjacency.nrows();
        if adjacency.ncols() != p {
            return Err(Error::input("adjacency matrix is not square"));
        }
        for i in 0..p {
            if adjacency[(i, i)] {
                return Err(Error::input(format!("adjacency has a self-loop at {}", i + 1)));
            }
            for j in 0..i {
                if adjacency[(i, j)] != adjacency[(j, i)] {
                    return Err(Error::input(format!("adjacency is not symmetric at ({}, {})", i + 1, j + 1)));
                }
            }
        }
        Ok(Self { adjacency })
    }

    /// Edges from an off-diagonal rule evaluated on the lower triangle.
    pub fn from_fn(p: usize, mut edge: impl FnMut(usize, usize) -> bool) -> Self {
        let mut adjacency = DMatrix::from_element(p, p, false);
        for i in 0..p {
            for j in 0..i {
                let e = edge(i, j);
                adjacency[(i, j)] = e;
                adjacency[(j, i)] = e;
            }
        }
        Self { adjacency }
    }

    /// Off-diagonal support of a matrix.
    pub fn support(m: &DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), |i, j| m[(i, j)] != 0.0 || m[(j, i)] != 0.0)
    }

    pub fn dim(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[(i, j)]
    }

    pub fn adjacency(&self) -> &DMatrix<bool> {
        &self.adjacency
    }

    pub fn num_edges(&self) -> usize {
        (0..self.dim()).map(|i| (0..i).filter(|&j| self.adjacency[(i, j)]).count()).sum()
    }

    /// `(i, j)` pairs with `i < j`, row-major.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let p = self.dim();
        (0..p).flat_map(|i| (i + 1..p).map(move |j| (i, j))).filter(|&(i, j)| self.adjacency[(i, j)]).collect()
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.dim()).filter(|&j| self.adjacency[(i, j)]).collect()
    }
}

/// `-omega_kd / sqrt(omega_kk omega_dd)` off the diagonal, ones on it.
pub fn partial_correlation(omega: &DMatrix<f64>) -> DMatrix<f64> {
    let p = omega.nrows();
    DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else {
            -omega[(i, j)] / (omega[(i, i)] * omega[(j, j)]).sqrt()
        }
    })
}

/// Posterior-mean precision `(n + 3)(I + Z'Z)^-1` under a `W(3, I)` prior.
pub fn wishart_precision(z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, p) = z.shape();
    let m = DMatrix::identity(p, p) + z.transpose() * z;
    Ok(linalg::spd_inverse(&m, "Wishart posterior scale")? * (n as f64 + 3.0))
}

/// Partial correlations of [`wishart_precision`].
pub fn wishart_reference(z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(partial_correlation(&wishart_precision(z)?))
}

/// Edge where `|rho| / |phi| > 0.5`; a zero reference gives no edge.
pub fn zero_one_threshold(rho: &DMatrix<f64>, phi: &DMatrix<f64>) -> Result<DMatrix<bool>> {
    if rho.shape() != phi.shape() || rho.nrows() != rho.ncols() {
        return Err(Error::input("partial correlation matrices differ in shape"));
    }
    let p = rho.nrows();
    Ok(DMatrix::from_fn(p, p, |i, j| {
        let r = rho[(i, j)].abs();
        let f = phi[(i, j)].abs();
        i != j && f > 0.0 && r / f > 0.5
    }))
}

/// Running off-diagonal inclusion frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeFrequency {
    counts: DMatrix<u64>,
    total: u64,
}

impl EdgeFrequency {
    pub fn new(p: usize) -> Self {
        Self { counts: DMatrix::zeros(p, p), total: 0 }
    }

    pub fn add(&mut self, indicator: &DMatrix<bool>) -> Result<()> {
        if indicator.shape() != self.counts.shape() {
            return Err(Error::input("indicator matrix has the wrong shape"));
        }
        for (c, e) in self.counts.iter_mut().zip(indicator.iter()) {
            *c += u64::from(*e);
        }
        self.total += 1;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Posterior inclusion probabilities, symmetrized.
    pub fn probabilities(&self) -> DMatrix<f64> {
        let p = self.counts.nrows();
        let t = self.total.max(1) as f64;
        DMatrix::from_fn(p, p, |i, j| {
            if i == j {
                0.0
            } else {
                0.5 * (self.counts[(i, j)] + self.counts[(j, i)]) as f64 / t
            }
        })
    }

    /// Edge where the inclusion frequency exceeds one half.
    pub fn median_model(&self) -> Result<EdgeMatrix> {
        if self.total == 0 {
            return Err(Error::input("no indicator matrices to aggregate"));
        }
        let p = self.counts.nrows();
        let t = self.total;
        Ok(EdgeMatrix::from_fn(p, |i, j| self.counts[(i, j)] + self.counts[(j, i)] > t))
    }
}

pub fn median_probability_edges(indicators: &[DMatrix<bool>]) -> Result<EdgeMatrix> {
    let first = indicators.first().ok_or_else(|| Error::input("no indicator matrices to aggregate"))?;
    let mut freq = EdgeFrequency::new(first.nrows());
    for m in indicators {
        freq.add(m)?;
    }
    freq.median_model()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleSettings {
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for MleSettings {
    fn default() -> Self {
        Self { tolerance: 1e-12, max_iter: 10_000 }
    }
}

/// Maximize `n log det Omega - tr(Omega S)` over precision matrices that
/// vanish off `edges`, by cyclic block updates of the covariance.
pub fn constrained_mle(s: &DMatrix<f64>, n: usize, edges: &EdgeMatrix) -> Result<DMatrix<f64>> {
    constrained_mle_with(s, n, edges, MleSettings::default())
}

pub fn constrained_mle_with(s: &DMatrix<f64>, n: usize, edges: &EdgeMatrix, settings: MleSettings) -> Result<DMatrix<f64>> {
    let p = s.nrows();
    if s.ncols() != p || edges.dim() != p {
        return Err(Error::input("sum-of-squares matrix and edge matrix differ in shape"));
    }
    if n == 0 {
        return Err(Error::input("constrained fit needs at least one observation"));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("non-finite sum-of-squares matrix"));
    }
    let sn = linalg::symmetrize(s) / n as f64;
    for d in 0..p {
        if !(sn[(d, d)] > 0.0) {
            return Err(Error::not_pd(format!("zero variance in column {}", d + 1)));
        }
    }
    let neighbors: Vec<Vec<usize>> = (0..p).map(|j| edges.neighbors(j)).collect();
    let mut w = sn.clone();
    let mut betas: Vec<DVector<f64>> = neighbors.iter().map(|nb| DVector::zeros(nb.len())).collect();
    let scale = sn.diagonal().max();
    let mut converged = edges.num_edges() == 0;
    let mut gap = 0.0;
    for _ in 0..settings.max_iter {
        if converged {
            break;
        }
        gap = 0.0f64;
        for j in 0..p {
            let nb = &neighbors[j];
            let others: Vec<usize> = (0..p).filter(|&k| k != j).collect();
            let mut w12: DVector<f64> = DVector::zeros(p - 1);
            if !nb.is_empty() {
                let w11 = DMatrix::from_fn(nb.len(), nb.len(), |a, b| w[(nb[a], nb[b])]);
                let s12 = DVector::from_iterator(nb.len(), nb.iter().map(|&k| sn[(k, j)]));
                let chol = linalg::cholesky(&w11, "constrained covariance block")
                    .map_err(|_| Error::not_pd("maximum-likelihood estimate does not exist for this graph"))?;
                let beta = chol.solve(&s12);
                for (a, &k) in others.iter().enumerate() {
                    w12[a] = nb.iter().zip(beta.iter()).map(|(&l, b)| w[(k, l)] * b).sum();
                }
                betas[j] = beta;
            }
            for (a, &k) in others.iter().enumerate() {
                gap = gap.max((w[(k, j)] - w12[a]).abs());
                w[(k, j)] = w12[a];
                w[(j, k)] = w12[a];
            }
        }
        if gap <= settings.tolerance * scale {
            converged = true;
        }
    }
    if !converged {
        return Err(Error::NonConvergence { what: "constrained maximum likelihood".into(), iterations: settings.max_iter, gap });
    }
    let mut omega = DMatrix::zeros(p, p);
    for j in 0..p {
        let nb = &neighbors[j];
        let w12s12: f64 = nb.iter().zip(betas[j].iter()).map(|(&k, b)| w[(k, j)] * b).sum();
        let theta22 = 1.0 / (sn[(j, j)] - w12s12);
        if !(theta22 > 0.0 && theta22.is_finite()) {
            return Err(Error::not_pd("maximum-likelihood estimate is not positive definite"));
        }
        omega[(j, j)] = theta22;
        for (&k, b) in nb.iter().zip(betas[j].iter()) {
            omega[(k, j)] = -b * theta22;
        }
    }
    let omega = linalg::symmetrize(&omega);
    if !linalg::is_spd(&omega) {
        return Err(Error::not_pd("maximum-likelihood estimate is not positive definite"));
    }
    Ok(omega)
}

/// `-2 l = 2 (-n log det Omega + tr(Omega S))`.
pub fn minus_two_loglik(omega: &DMatrix<f64>, s: &DMatrix<f64>, n: usize) -> Result<f64> {
    let log_det = linalg::log_det_spd(omega, "precision estimate")?;
    Ok(2.0 * (-(n as f64) * log_det + (omega * s).trace()))
}

/// One row of the BIC table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BicRow {
    pub c: f64,
    /// Diagonal entries plus edges.
    pub k: usize,
    pub minus_two_loglik: f64,
    pub bic: f64,
}

/// Score a graph by the constrained fit to `S`.
pub fn bic_score(c: f64, s: &DMatrix<f64>, n: usize, edges: &EdgeMatrix) -> Result<BicRow> {
    let omega = constrained_mle(s, n, edges)?;
    let m2l = minus_two_loglik(&omega, s, n)?;
    let k = edges.dim() + edges.num_edges();
    Ok(BicRow { c, k, minus_two_loglik: m2l, bic: m2l + k as f64 * (n as f64).ln() })
}

/// A candidate sparsity level with its graph and the posterior mean of the
/// centered transformed data.
#[derive(Debug, Clone, PartialEq)]
pub struct BicCandidate<T> {
    pub c: f64,
    pub edges: EdgeMatrix,
    pub z_mean: DMatrix<f64>,
    pub payload: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BicSelection<T> {
    pub chosen: BicCandidate<T>,
    /// Scored candidates, in input order; failures are omitted.
    pub table: Vec<BicRow>,
}

/// Pick the candidate with the smallest BIC; ties go to the smaller `c`.
/// Candidates whose constrained fit fails are skipped.
pub fn bic_select<T>(candidates: Vec<BicCandidate<T>>) -> Result<BicSelection<T>> {
    if candidates.is_empty() {
        return Err(Error::config("no sparsity candidates"));
    }
    let mut table = Vec::new();
    let mut best: Option<(usize, BicRow)> = None;
    let mut last_err = None;
    for (i, cand) in candidates.iter().enumerate() {
        let n = cand.z_mean.nrows();
        let s = cand.z_mean.transpose() * &cand.z_mean;
        match bic_score(cand.c, &s, n, &cand.edges) {
            Ok(row) => {
                table.push(row);
                let better = match &best {
                    None => true,
                    Some((_, b)) => row.bic < b.bic || (row.bic == b.bic && row.c < b.c),
                };
                if better {
                    best = Some((i, row));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some((i, _)) => {
            let chosen = candidates.into_iter().nth(i).expect("index in range");
            Ok(BicSelection { chosen, table })
        }
        None => Err(last_err.unwrap_or_else(|| Error::numerical("no candidate could be scored"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::seeded_rng;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_spd(p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = seeded_rng(seed);
        let a = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        &a * a.transpose() + DMatrix::identity(p, p) * 0.5
    }

    #[test]
    fn identity_has_no_partial_correlation() {
        let r = partial_correlation(&DMatrix::identity(4, 4));
        assert_eq!(r, DMatrix::identity(4, 4));
    }

    #[test]
    fn two_by_two_partial_correlation() {
        let r = partial_correlation(&DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]));
        assert_eq!(r[(0, 1)], 0.5);
    }

    #[test]
    fn partial_correlation_matches_conditional_correlation() {
        let omega = random_spd(6, 1);
        let sigma = omega.clone().try_inverse().unwrap();
        let r = partial_correlation(&omega);
        for (i, j) in [(0, 1), (2, 5), (3, 4)] {
            let rest: Vec<usize> = (0..6).filter(|&k| k != i && k != j).collect();
            let idx = [i, j];
            let saa = DMatrix::from_fn(2, 2, |a, b| sigma[(idx[a], idx[b])]);
            let sab = DMatrix::from_fn(2, 4, |a, b| sigma[(idx[a], rest[b])]);
            let sbb = DMatrix::from_fn(4, 4, |a, b| sigma[(rest[a], rest[b])]);
            let cond = saa - &sab * sbb.try_inverse().unwrap() * sab.transpose();
            let expect = cond[(0, 1)] / (cond[(0, 0)] * cond[(1, 1)]).sqrt();
            assert!((r[(i, j)] - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn wishart_reference_of_zero_data() {
        let z = DMatrix::zeros(4, 3);
        assert_eq!(wishart_precision(&z).unwrap(), DMatrix::identity(3, 3) * 7.0);
        let phi = wishart_reference(&z).unwrap();
        assert_eq!(phi, DMatrix::identity(3, 3));
    }

    #[test]
    fn wishart_two_by_two() {
        let z = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        // I + Z'Z = [[2, 2], [2, 6]], inverse = [[6, -2], [-2, 2]] / 8
        let expect = DMatrix::from_row_slice(2, 2, &[6.0, -2.0, -2.0, 2.0]) * (5.0 / 8.0);
        assert!((wishart_precision(&z).unwrap() - expect).amax() < 1e-14);
    }

    #[test]
    fn wishart_reference_is_spd() {
        let mut rng = seeded_rng(3);
        for _ in 0..100 {
            let n = rng.random_range(1..20);
            let p = rng.random_range(1..8);
            let z = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
            assert!(linalg::is_spd(&wishart_precision(&z).unwrap()));
        }
    }

    #[test]
    fn threshold_rules() {
        let phi = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        assert_eq!(zero_one_threshold(&phi, &phi).unwrap(), DMatrix::from_row_slice(2, 2, &[false, true, true, false]));
        assert_eq!(zero_one_threshold(&DMatrix::zeros(2, 2), &phi).unwrap(), DMatrix::from_element(2, 2, false));
        let rho = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.0]);
        assert!(!zero_one_threshold(&rho, &phi).unwrap()[(0, 1)]);
        let zero_phi = DMatrix::identity(2, 2);
        assert!(!zero_one_threshold(&rho, &zero_phi).unwrap()[(0, 1)]);
        let negative = DMatrix::from_row_slice(2, 2, &[1.0, -0.4, -0.4, 1.0]);
        assert!(zero_one_threshold(&negative, &phi).unwrap()[(0, 1)]);
    }

    #[test]
    fn median_model_boundaries() {
        let on = DMatrix::from_row_slice(2, 2, &[false, true, true, false]);
        let off = DMatrix::from_element(2, 2, false);
        assert!(median_probability_edges(&[on.clone(), on.clone(), off.clone()]).unwrap().has_edge(0, 1));
        assert!(!median_probability_edges(&[on.clone(), off.clone()]).unwrap().has_edge(0, 1));
        assert_eq!(median_probability_edges(&[on.clone(), on.clone()]).unwrap().adjacency(), &on);
        assert!(median_probability_edges(&[]).is_err());
    }

    #[test]
    fn edge_matrix_validation() {
        let bad = DMatrix::from_row_slice(2, 2, &[false, true, false, false]);
        assert!(EdgeMatrix::from_matrix(bad).is_err());
        let e = EdgeMatrix::complete(4);
        assert_eq!(e.num_edges(), 6);
        assert_eq!(e.edges()[0], (0, 1));
    }

    fn random_s(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = seeded_rng(seed);
        let z = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        z.transpose() * z
    }

    #[test]
    fn empty_graph_mle_is_diagonal() {
        let s = random_s(10, 4, 4);
        let omega = constrained_mle(&s, 10, &EdgeMatrix::empty(4)).unwrap();
        for i in 0..4 {
            assert_eq!(omega[(i, i)], 1.0 / (s[(i, i)] / 10.0));
            for j in 0..4 {
                if i != j {
                    assert_eq!(omega[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn complete_graph_mle_is_unconstrained() {
        let s = random_s(12, 4, 5);
        let omega = constrained_mle(&s, 12, &EdgeMatrix::complete(4)).unwrap();
        let expect = s.clone().try_inverse().unwrap() * 12.0;
        assert!((omega - expect).amax() < 1e-8);
    }

    /// Iterative proportional fitting over the cliques of a decomposable
    /// graph: `Omega += pad((S_C / n)^-1 - ((Omega^-1)_C)^-1)`.
    fn ipf(s: &DMatrix<f64>, n: usize, cliques: &[Vec<usize>]) -> DMatrix<f64> {
        let p = s.nrows();
        let sn = s / n as f64;
        let mut omega = DMatrix::identity(p, p);
        for _ in 0..5000 {
            for c in cliques {
                let sigma = omega.clone().try_inverse().unwrap();
                let sub = |m: &DMatrix<f64>| DMatrix::from_fn(c.len(), c.len(), |a, b| m[(c[a], c[b])]);
                let delta = sub(&sn).try_inverse().unwrap() - sub(&sigma).try_inverse().unwrap();
                for a in 0..c.len() {
                    for b in 0..c.len() {
                        omega[(c[a], c[b])] += delta[(a, b)];
                    }
                }
            }
        }
        omega
    }

    #[test]
    fn chain_graph_matches_ipf() {
        for seed in 0..5 {
            let s = random_s(15, 3, 10 + seed);
            let edges = EdgeMatrix::from_fn(3, |i, j| i - j == 1);
            let omega = constrained_mle(&s, 15, &edges).unwrap();
            let oracle = ipf(&s, 15, &[vec![0, 1], vec![1, 2]]);
            assert!((&omega - &oracle).amax() < 1e-6);
            assert_eq!(omega[(0, 2)], 0.0);
            // stationarity on the diagonal and edges
            let resid = omega.clone().try_inverse().unwrap() * 15.0 - &s;
            for (i, j) in [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2)] {
                assert!(resid[(i, j)].abs() < 1e-6);
            }
        }
    }

    #[test]
    fn bic_counts_and_ordering() {
        let mut rng = seeded_rng(20);
        let n = 40;
        let x: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let z = DMatrix::from_fn(n, 3, |i, j| match j {
            0 => x[i],
            1 => x[i] + 0.3 * rng.sample::<f64, _>(StandardNormal),
            _ => rng.sample::<f64, _>(StandardNormal),
        });
        let s = z.transpose() * &z;
        let empty = bic_score(0.1, &s, n, &EdgeMatrix::empty(3)).unwrap();
        assert_eq!(empty.k, 3);
        let one = EdgeMatrix::from_fn(3, |i, j| (i, j) == (1, 0));
        let scored = bic_score(1.0, &s, n, &one).unwrap();
        let omega = constrained_mle(&s, n, &one).unwrap();
        let by_hand = 2.0 * (-(n as f64) * omega.determinant().ln() + (&omega * &s).trace()) + 4.0 * (n as f64).ln();
        assert!((scored.bic - by_hand).abs() < 1e-9);
        let sel = bic_select(vec![
            BicCandidate { c: 0.1, edges: EdgeMatrix::empty(3), z_mean: z.clone(), payload: () },
            BicCandidate { c: 1.0, edges: one.clone(), z_mean: z.clone(), payload: () },
        ])
        .unwrap();
        assert_eq!(sel.chosen.c, 1.0);
        assert_eq!(sel.table.len(), 2);
    }

    #[test]
    fn bic_ties_prefer_smaller_c() {
        let z = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, -1.0, 0.5]);
        let cands = vec![
            BicCandidate { c: 10.0, edges: EdgeMatrix::empty(2), z_mean: z.clone(), payload: 'b' },
            BicCandidate { c: 0.1, edges: EdgeMatrix::empty(2), z_mean: z.clone(), payload: 'a' },
        ];
        assert_eq!(bic_select(cands).unwrap().chosen.payload, 'a');
    }

    proptest! {
        #[test]
        fn edges_are_symmetric(bits in proptest::collection::vec(any::<bool>(), 25)) {
            let m = DMatrix::from_fn(5, 5, |i, j| i != j && bits[i * 5 + j]);
            let e = median_probability_edges(&[m.clone(), m.transpose(), m]).unwrap();
            prop_assert_eq!(e.adjacency().transpose(), e.adjacency().clone());
        }

        #[test]
        fn threshold_monotone_in_rho(vals in proptest::collection::vec(-1.0f64..1.0, 9), scale in 1.0f64..3.0) {
            let rho = DMatrix::from_row_slice(3, 3, &vals[..]);
            let phi = DMatrix::from_fn(3, 3, |i, j| 0.3 + 0.1 * (i + j) as f64);
            let a = zero_one_threshold(&rho, &phi).unwrap();
            let b = zero_one_threshold(&(rho * scale), &phi).unwrap();
            for (x, y) in a.iter().zip(b.iter()) {
                prop_assert!(!*x || *y);
            }
        }

        #[test]
        fn mle_stationary_on_random_graphs(seed in 0u64..1000, bits in proptest::collection::vec(any::<bool>(), 10)) {
            let p = 5;
            let s = random_s(30, p, seed);
            let mut it = bits.into_iter();
            let edges = EdgeMatrix::from_fn(p, |_, _| it.next().unwrap());
            let omega = constrained_mle(&s, 30, &edges).unwrap();
            let resid = omega.clone().try_inverse().unwrap() * 30.0 - &s;
            for i in 0..p {
                prop_assert!(resid[(i, i)].abs() < 1e-6);
                for j in 0..i {
                    if edges.has_edge(i, j) {
                        prop_assert!(resid[(i, j)].abs() < 1e-6);
                    } else {
                        prop_assert_eq!(omega[(i, j)], 0.0);
                    }
                }
            }
        }
    }
}
