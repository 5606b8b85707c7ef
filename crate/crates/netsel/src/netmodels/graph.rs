//! Geometric random graphs and seeded Duffing parameter sampling.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::netmodels::duffing::DuffingNetworkSpec;
use crate::seed;

/// Configuration for a geometric random graph on the unit square.
#[derive(Debug, Clone, Copy)]
pub struct GeometricGraphConfig {
    pub nodes: usize,
    /// Connection radius; two nodes are adjacent iff their Euclidean
    /// distance is at most this.
    pub radius: f64,
    pub seed: u64,
}

/// A sampled geometric graph: node positions plus symmetric neighbor lists.
#[derive(Debug, Clone)]
pub struct GeometricGraph {
    pub positions: Vec<[f64; 2]>,
    pub neighbors: Vec<Vec<usize>>,
}

/// The benchmark connection radius `sqrt(1.44 / N)`.
pub fn benchmark_radius(nodes: usize) -> f64 {
    (1.44 / nodes as f64).sqrt()
}

/// Places `nodes` points uniformly on the unit square and connects pairs
/// within `radius`. Deterministic given the seed.
pub fn generate_geometric_graph(config: &GeometricGraphConfig) -> Result<GeometricGraph> {
    if config.nodes < 2 {
        return Err(Error::InvalidParameter(
            "geometric graph needs at least 2 nodes".into(),
        ));
    }
    if !(config.radius >= 0.0) {
        return Err(Error::InvalidParameter(
            "connection radius must be nonnegative".into(),
        ));
    }
    let mut rng = seed::rng(config.seed, "geometric-graph");
    let positions: Vec<[f64; 2]> = (0..config.nodes)
        .map(|_| {
            let x: f64 = rng.random_range(0.0..1.0);
            let y: f64 = rng.random_range(0.0..1.0);
            [x, y]
        })
        .collect();
    let mut neighbors = vec![Vec::new(); config.nodes];
    for i in 0..config.nodes {
        for j in (i + 1)..config.nodes {
            let dx = positions[i][0] - positions[j][0];
            let dy = positions[i][1] - positions[j][1];
            if (dx * dx + dy * dy).sqrt() <= config.radius {
                neighbors[i].push(j);
                neighbors[j].push(i);
            }
        }
    }
    Ok(GeometricGraph {
        positions,
        neighbors,
    })
}

/// Draws Duffing coefficients on a given adjacency: stiffness `eta` uniform
/// on `[10, 20]`, cubic `chi` and damping `rho` uniform on `[1, 2]`.
/// Self-coupling terms use the same distributions. One draw per undirected
/// edge keeps the matrices symmetric; deterministic given the seed.
pub fn sample_duffing_params(neighbors: &[Vec<usize>], seed_value: u64) -> Result<DuffingNetworkSpec> {
    let n = neighbors.len();
    let mut rng = seed::rng(seed_value, "duffing-params");
    let mut eta = DMatrix::zeros(n, n);
    let mut chi = DMatrix::zeros(n, n);
    let mut rho = DMatrix::zeros(n, n);
    for i in 0..n {
        eta[(i, i)] = rng.random_range(10.0..20.0);
        chi[(i, i)] = rng.random_range(1.0..2.0);
        rho[(i, i)] = rng.random_range(1.0..2.0);
    }
    for i in 0..n {
        for &j in &neighbors[i] {
            if j <= i {
                continue;
            }
            let e = rng.random_range(10.0..20.0);
            let c = rng.random_range(1.0..2.0);
            let r = rng.random_range(1.0..2.0);
            eta[(i, j)] = e;
            eta[(j, i)] = e;
            chi[(i, j)] = c;
            chi[(j, i)] = c;
            rho[(i, j)] = r;
            rho[(j, i)] = r;
        }
    }
    DuffingNetworkSpec::new(neighbors.to_vec(), eta, chi, rho)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_radius_gives_complete_graph() {
        let g = generate_geometric_graph(&GeometricGraphConfig {
            nodes: 6,
            radius: 2.0f64.sqrt(),
            seed: 1,
        })
        .unwrap();
        for (i, nbrs) in g.neighbors.iter().enumerate() {
            assert_eq!(nbrs.len(), 5, "node {i}");
        }
    }

    #[test]
    fn zero_radius_gives_empty_graph() {
        let g = generate_geometric_graph(&GeometricGraphConfig {
            nodes: 6,
            radius: 0.0,
            seed: 1,
        })
        .unwrap();
        assert!(g.neighbors.iter().all(Vec::is_empty));
    }

    #[test]
    fn adjacency_matches_pairwise_distances() {
        let config = GeometricGraphConfig {
            nodes: 10,
            radius: 0.144f64.sqrt(),
            seed: 42,
        };
        let g = generate_geometric_graph(&config).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                if i == j {
                    continue;
                }
                let dx = g.positions[i][0] - g.positions[j][0];
                let dy = g.positions[i][1] - g.positions[j][1];
                let within = (dx * dx + dy * dy).sqrt() <= config.radius;
                assert_eq!(g.neighbors[i].contains(&j), within);
            }
        }
    }

    #[test]
    fn sampled_params_respect_intervals_and_seed() {
        let g = generate_geometric_graph(&GeometricGraphConfig {
            nodes: 8,
            radius: benchmark_radius(8),
            seed: 5,
        })
        .unwrap();
        let a = sample_duffing_params(&g.neighbors, 9).unwrap();
        let b = sample_duffing_params(&g.neighbors, 9).unwrap();
        assert_eq!(a.eta(), b.eta());
        assert_eq!(a.chi(), b.chi());
        assert_eq!(a.rho(), b.rho());
        for i in 0..8 {
            assert!(a.eta()[(i, i)] >= 10.0 && a.eta()[(i, i)] <= 20.0);
            assert!(a.chi()[(i, i)] >= 1.0 && a.chi()[(i, i)] <= 2.0);
            assert!(a.rho()[(i, i)] >= 1.0 && a.rho()[(i, i)] <= 2.0);
            for &j in &g.neighbors[i] {
                assert!(a.eta()[(i, j)] >= 10.0 && a.eta()[(i, j)] <= 20.0);
                assert!(a.chi()[(i, j)] >= 1.0 && a.chi()[(i, j)] <= 2.0);
                assert!(a.rho()[(i, j)] >= 1.0 && a.rho()[(i, j)] <= 2.0);
            }
        }
    }
}
