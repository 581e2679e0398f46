//! Independent reference implementations used to cross-check the library.
//! Deliberately brute-force: correctness over speed, different algorithms
//! than the code under test.

use bpsim_core::{ConflictGraph, ConnectivityGraph};

/// Optimal MWIS weight and one witness set, by enumerating all 2^n subsets.
pub fn brute_force_mwis(cg: &ConflictGraph, utilities: &[f64]) -> (f64, Vec<usize>) {
    let n = cg.num_links();
    assert!(n <= 20, "enumeration oracle capped at 20 vertices");
    let mut best = (0.0f64, Vec::new());
    for mask in 0u32..(1 << n) {
        let set: Vec<usize> = (0..n).filter(|&e| mask >> e & 1 == 1).collect();
        if !cg.is_independent(&set) {
            continue;
        }
        let w: f64 = set.iter().map(|&e| utilities[e]).sum();
        if w > best.0 {
            best = (w, set);
        }
    }
    best
}

/// Shortest weighted distance between every node pair by enumerating all
/// simple paths. Exponential; for graphs of ten-or-so nodes only.
pub fn simple_path_apsp(g: &ConnectivityGraph, link_dist: &[f64]) -> Vec<Vec<f64>> {
    let n = g.num_nodes();
    assert!(n <= 10, "simple-path oracle capped at 10 nodes");
    let mut best = vec![vec![f64::INFINITY; n]; n];
    for s in 0..n {
        let mut visited = vec![false; n];
        visited[s] = true;
        dfs(g, link_dist, s, s, 0.0, &mut visited, &mut best);
        best[s][s] = 0.0;
    }
    best
}

fn dfs(
    g: &ConnectivityGraph,
    link_dist: &[f64],
    s: usize,
    u: usize,
    acc: f64,
    visited: &mut Vec<bool>,
    best: &mut Vec<Vec<f64>>,
) {
    for &(v, link) in g.neighbors(u) {
        if visited[v] {
            continue;
        }
        let d = acc + link_dist[link];
        if d < best[s][v] {
            best[s][v] = d;
        }
        visited[v] = true;
        dfs(g, link_dist, s, v, d, visited, best);
        visited[v] = false;
    }
}

/// Eigenvalues of a symmetric matrix via cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(m: &ndarray::Array2<f64>) -> Vec<f64> {
    let n = m.nrows();
    assert_eq!(n, m.ncols());
    let mut a = m.clone();
    for sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[[p, q]] * a[[p, q]];
            }
        }
        if off < 1e-24 {
            break;
        }
        assert!(sweep < 99, "Jacobi failed to converge, off = {off}");
        for p in 0..n {
            for q in (p + 1)..n {
                if a[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[[i, i]]).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eig
}
