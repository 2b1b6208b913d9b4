//! Shared support for the acceptance suite: independent dense-formula
//! oracles for every propagation layer, plus random-graph helpers.
//!
//! The oracles deliberately avoid the library's matrix type and layer code:
//! everything is computed with plain nested `Vec<f64>` loops straight from
//! the layer definitions, so agreement is evidence rather than tautology.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use scamdetect::features::{GraphSample, NodeFeatures, OpcodeHistogram};
use scamdetect::model::{DenseMatrix, LayerParams, ModelParams};

type Mat = Vec<Vec<f64>>;

fn mat_of(m: &DenseMatrix<f64>) -> Mat {
    (0..m.rows)
        .map(|i| (0..m.cols).map(|j| m[(i, j)]).collect())
        .collect()
}

fn matmul(a: &Mat, b: &Mat) -> Mat {
    let (n, k, c) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; c]; n];
    for i in 0..n {
        for t in 0..k {
            for j in 0..c {
                out[i][j] += a[i][t] * b[t][j];
            }
        }
    }
    out
}

fn add(a: &Mat, b: &Mat) -> Mat {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + y).collect())
        .collect()
}

fn relu(m: Mat) -> Mat {
    m.into_iter()
        .map(|row| row.into_iter().map(|v| v.max(0.0)).collect())
        .collect()
}

/// Symmetric 0/1 adjacency without self-loops.
fn undirected(n: usize, adjacency: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut und = vec![vec![false; n]; n];
    for &(u, v) in adjacency {
        if u != v {
            und[u][v] = true;
            und[v][u] = true;
        }
    }
    und
}

/// D̂^{-1/2}(A ∪ I)D̂^{-1/2} over the symmetrized edges.
fn normalized(und: &[Vec<bool>]) -> Mat {
    let n = und.len();
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if und[i][j] {
                a[i][j] = 1.0;
            }
        }
        a[i][i] = 1.0;
    }
    let deg: Vec<f64> = a.iter().map(|row| row.iter().sum()).collect();
    for i in 0..n {
        for j in 0..n {
            a[i][j] /= (deg[i] * deg[j]).sqrt();
        }
    }
    a
}

/// Forward pass recomputed from the written-out layer formulas.
pub fn dense_oracle(params: &ModelParams<f64>, sample: &GraphSample<f64>) -> f64 {
    let n = sample.node_count();
    let und = undirected(n, &sample.adjacency);
    let a_hat = normalized(&und);

    let mut h = mat_of(&sample.features.matrix);
    for layer in &params.layers {
        h = match layer {
            // H' = ReLU(Â·H·W)
            LayerParams::Gcn { w } => relu(matmul(&matmul(&a_hat, &h), &mat_of(w))),
            // H'_v = ReLU(H_v·W_self + mean_{u∈N(v)} H_u·W_neigh)
            LayerParams::Sage { w_self, w_neigh } => {
                let cols = h[0].len();
                let mut mean = vec![vec![0.0; cols]; n];
                for v in 0..n {
                    let hood: Vec<usize> = (0..n).filter(|&u| und[v][u]).collect();
                    if hood.is_empty() {
                        continue;
                    }
                    for &u in &hood {
                        for c in 0..cols {
                            mean[v][c] += h[u][c];
                        }
                    }
                    for c in 0..cols {
                        mean[v][c] /= hood.len() as f64;
                    }
                }
                relu(add(&matmul(&h, &mat_of(w_self)), &matmul(&mean, &mat_of(w_neigh))))
            }
            // H'_v = ReLU(ReLU(((1+ε)H_v + Σ_{u∈N(v)} H_u)·W1)·W2)
            LayerParams::Gin { w1, w2 } => {
                let eps = params.hyper.gin_eps;
                let cols = h[0].len();
                let mut u_mat = vec![vec![0.0; cols]; n];
                for v in 0..n {
                    for c in 0..cols {
                        u_mat[v][c] = (1.0 + eps) * h[v][c];
                    }
                    for u in 0..n {
                        if und[v][u] {
                            for c in 0..cols {
                                u_mat[v][c] += h[u][c];
                            }
                        }
                    }
                }
                relu(matmul(&relu(matmul(&u_mat, &mat_of(w1))), &mat_of(w2)))
            }
            // α = softmax_u(LeakyReLU(a·[Q_v ∥ Q_u])) over N(v) ∪ {v},
            // H'_v = ReLU(Σ α_{vu}·Q_u)
            LayerParams::Gat { w, a } => {
                let q = matmul(&h, &mat_of(w));
                let d = q[0].len();
                let av = mat_of(a);
                let slope = params.hyper.gat_leaky_slope;
                let mut out = vec![vec![0.0; d]; n];
                for v in 0..n {
                    let hood: Vec<usize> = (0..n).filter(|&u| und[v][u] || u == v).collect();
                    let logits: Vec<f64> = hood
                        .iter()
                        .map(|&u| {
                            let c: f64 = (0..d)
                                .map(|j| av[j][0] * q[v][j] + av[d + j][0] * q[u][j])
                                .sum();
                            if c > 0.0 {
                                c
                            } else {
                                c * slope
                            }
                        })
                        .collect();
                    let exps: Vec<f64> = logits.iter().map(|&e| e.exp()).collect();
                    let total: f64 = exps.iter().sum();
                    for (k, &u) in hood.iter().enumerate() {
                        for j in 0..d {
                            out[v][j] += exps[k] / total * q[u][j];
                        }
                    }
                }
                relu(out)
            }
            // H' = ReLU(Σ_{k=0..K} Â^k·H·W_k)
            LayerParams::Tag { ws } => {
                let mut z = vec![vec![0.0; ws[0].cols]; n];
                let mut b_k = h.clone();
                for (k, w_k) in ws.iter().enumerate() {
                    if k > 0 {
                        b_k = matmul(&a_hat, &b_k);
                    }
                    z = add(&z, &matmul(&b_k, &mat_of(w_k)));
                }
                relu(z)
            }
        };
    }

    let cols = h[0].len();
    let pooled: Vec<f64> = (0..cols)
        .map(|j| h.iter().map(|row| row[j]).sum::<f64>() / n as f64)
        .collect();
    head(params, &pooled)
}

/// Readout for the histogram baseline: linear head over the 256-bin vector.
pub fn dense_histogram_oracle(params: &ModelParams<f64>, sample: &GraphSample<f64>) -> f64 {
    head(params, &sample.histogram.as_ref().expect("histogram present").vector)
}

fn head(params: &ModelParams<f64>, z: &[f64]) -> f64 {
    let logit: f64 = z
        .iter()
        .enumerate()
        .map(|(j, &v)| v * params.head.w[(j, 0)])
        .sum::<f64>()
        + params.head.b[(0, 0)];
    let p = 1.0 / (1.0 + (-logit).exp());
    p.max(f64::EPSILON).min(1.0 - f64::EPSILON)
}

/// Random graph with `dim` features per node, up to 16 nodes, possibly with
/// self-loops and duplicate edges in the raw draw (deduplicated like the
/// featurizer does).
pub fn random_sample(rng: &mut ChaCha8Rng, dim: usize, with_histogram: bool) -> GraphSample<f64> {
    let n = rng.gen_range(1..=16);
    let mut adjacency = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for u in 0..n {
        for v in 0..n {
            if rng.gen_bool(0.2) && seen.insert((u, v)) {
                adjacency.push((u, v));
            }
        }
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let histogram = with_histogram.then(|| OpcodeHistogram {
        vector: (0..256).map(|_| rng.gen_range(0.0..1.0)).collect(),
    });
    GraphSample {
        adjacency,
        features: NodeFeatures { matrix: DenseMatrix::from_rows(rows) },
        label: u8::from(rng.gen_bool(0.5)),
        id: "random".into(),
        histogram,
    }
}

/// Relabels nodes: node i becomes `perm[i]`. Features move with their node,
/// edges are rewritten, the histogram (a graph-level quantity) is untouched.
pub fn permute_sample(sample: &GraphSample<f64>, perm: &[usize]) -> GraphSample<f64> {
    let n = sample.node_count();
    let dim = sample.features.matrix.cols;
    let mut rows = vec![vec![0.0; dim]; n];
    for i in 0..n {
        for j in 0..dim {
            rows[perm[i]][j] = sample.features.matrix[(i, j)];
        }
    }
    GraphSample {
        adjacency: sample
            .adjacency
            .iter()
            .map(|&(u, v)| (perm[u], perm[v]))
            .collect(),
        features: NodeFeatures { matrix: DenseMatrix::from_rows(rows) },
        label: sample.label,
        id: sample.id.clone(),
        histogram: sample.histogram.clone(),
    }
}
