//! Consensus (Laplacian) networks: `x_i' = sum_j a_ij (x_j - x_i) + u_i`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::system::LtiSystem;

/// Undirected edge with its coupling strength, 0-based agent indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub i: usize,
    pub j: usize,
    pub alpha: f64,
}

/// Edges of the six-agent example network.
pub fn paper_couplings() -> Vec<Coupling> {
    [(0, 1, 2.0), (0, 2, 3.0), (1, 4, 1.0), (1, 5, 3.0), (2, 3, 2.0), (4, 5, 3.0)]
        .into_iter()
        .map(|(i, j, alpha)| Coupling { i, j, alpha })
        .collect()
}

/// Builds `A = -L` for the weighted graph and `B = I`.
///
/// `couplings` is an `n x n` matrix of strengths read only where
/// `adjacency` is 1; `adjacency` must be symmetric with a zero diagonal.
pub fn make_consensus_network(
    num_agents: usize,
    couplings: &DMatrix<f64>,
    adjacency: &[Vec<u8>],
) -> Result<LtiSystem> {
    let n = num_agents;
    if n == 0 {
        return Err(Error::InvalidArgument("network needs at least one agent".into()));
    }
    if couplings.shape() != (n, n) || adjacency.len() != n || adjacency.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension(format!("couplings and adjacency must be {n}x{n}")));
    }
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let e = adjacency[i][j];
            if e > 1 {
                return Err(Error::InvalidArgument(format!("adjacency entry ({i}, {j}) is {e}, expected 0 or 1")));
            }
            if e != adjacency[j][i] {
                return Err(Error::InvalidArgument(format!("adjacency is not symmetric at ({i}, {j})")));
            }
            if e == 0 {
                continue;
            }
            if i == j {
                return Err(Error::InvalidArgument(format!("self-loop at agent {i}")));
            }
            let alpha = couplings[(i, j)];
            if !(alpha > 0.0) || !alpha.is_finite() {
                return Err(Error::InvalidArgument(format!("coupling ({i}, {j}) must be positive, got {alpha}")));
            }
            a[(i, j)] = alpha;
            a[(i, i)] -= alpha;
        }
    }
    LtiSystem::new(a, DMatrix::identity(n, n))
}

/// Edge-list form of [`make_consensus_network`]; each edge is used in both directions.
pub fn network_from_edges(num_agents: usize, edges: &[Coupling]) -> Result<LtiSystem> {
    let n = num_agents;
    let mut couplings = DMatrix::zeros(n, n);
    let mut adjacency = vec![vec![0u8; n]; n];
    for e in edges {
        if e.i >= n || e.j >= n {
            return Err(Error::Dimension(format!("edge ({}, {}) outside {n} agents", e.i, e.j)));
        }
        if adjacency[e.i][e.j] == 1 {
            return Err(Error::InvalidArgument(format!("duplicate edge ({}, {})", e.i, e.j)));
        }
        couplings[(e.i, e.j)] = e.alpha;
        couplings[(e.j, e.i)] = e.alpha;
        adjacency[e.i][e.j] = 1;
        adjacency[e.j][e.i] = 1;
    }
    make_consensus_network(n, &couplings, &adjacency)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_network_matrix() {
        let sys = network_from_edges(6, &paper_couplings()).unwrap();
        let expected = DMatrix::from_row_slice(
            6,
            6,
            &[
                -5.0, 2.0, 3.0, 0.0, 0.0, 0.0, //
                2.0, -6.0, 0.0, 0.0, 1.0, 3.0, //
                3.0, 0.0, -5.0, 2.0, 0.0, 0.0, //
                0.0, 0.0, 2.0, -2.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, 0.0, -4.0, 3.0, //
                0.0, 3.0, 0.0, 0.0, 3.0, -6.0,
            ],
        );
        assert_eq!(sys.a(), &expected);
        assert_eq!(sys.b(), &DMatrix::identity(6, 6));
    }

    #[test]
    fn two_agents() {
        let sys = network_from_edges(2, &[Coupling { i: 0, j: 1, alpha: 1.0 }]).unwrap();
        assert_eq!(sys.a(), &DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]));
    }

    #[test]
    fn rejects_bad_graphs() {
        let c = DMatrix::from_element(2, 2, 1.0);
        assert!(make_consensus_network(2, &c, &[vec![1, 0], vec![0, 0]]).is_err());
        assert!(make_consensus_network(2, &c, &[vec![0, 1], vec![0, 0]]).is_err());
        let neg = DMatrix::from_element(2, 2, -1.0);
        assert!(make_consensus_network(2, &neg, &[vec![0, 1], vec![1, 0]]).is_err());
        assert!(network_from_edges(2, &[Coupling { i: 0, j: 2, alpha: 1.0 }]).is_err());
    }
}
