//! The five propagation-layer families and shared graph preprocessing.
//!
//! All layers treat the graph as undirected: the edge list is symmetrized,
//! with self-loop handling per family (GCN/TAG add them in the normalized
//! adjacency, GAT includes the node in its own softmax, SAGE/GIN exclude
//! them from neighborhoods). Every formula keeps a deterministic summation
//! order so repeated runs are bit-identical.

use crate::features::GraphSample;
use crate::num::Scalar;

use super::{DenseMatrix, ModelError};

/// Sorted symmetric neighbor lists, self-loops dropped.
pub(crate) fn symmetric_neighbors(n: usize, adjacency: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut sets: Vec<std::collections::BTreeSet<usize>> = vec![Default::default(); n];
    for &(u, v) in adjacency {
        if u != v {
            sets[u].insert(v);
            sets[v].insert(u);
        }
    }
    sets.into_iter().map(|s| s.into_iter().collect()).collect()
}

/// Â = D̂^{-1/2}(A ∪ I)D̂^{-1/2} over the symmetrized edge set.
pub fn normalize_adjacency<S: Scalar>(sample: &GraphSample<S>) -> DenseMatrix<S> {
    normalized_adjacency_of(sample.node_count(), &sample.adjacency)
}

pub(crate) fn normalized_adjacency_of<S: Scalar>(
    n: usize,
    adjacency: &[(usize, usize)],
) -> DenseMatrix<S> {
    let mut a = DenseMatrix::zeros(n, n);
    for &(u, v) in adjacency {
        a[(u, v)] = S::one();
        a[(v, u)] = S::one();
    }
    for i in 0..n {
        a[(i, i)] = S::one();
    }
    let inv_sqrt: Vec<S> = (0..n)
        .map(|i| {
            let deg: S = (0..n).map(|j| a[(i, j)]).sum();
            S::one() / deg.sqrt()
        })
        .collect();
    for i in 0..n {
        for j in 0..n {
            if a[(i, j)] != S::zero() {
                let v = a[(i, j)] * inv_sqrt[i] * inv_sqrt[j];
                a[(i, j)] = v;
            }
        }
    }
    a
}

fn neighbor_sum<S: Scalar>(h: &DenseMatrix<S>, neigh: &[Vec<usize>]) -> DenseMatrix<S> {
    let mut out = DenseMatrix::zeros(h.rows, h.cols);
    for v in 0..h.rows {
        for &u in &neigh[v] {
            for j in 0..h.cols {
                let add = h[(u, j)];
                out[(v, j)] += add;
            }
        }
    }
    out
}

fn neighbor_mean<S: Scalar>(h: &DenseMatrix<S>, neigh: &[Vec<usize>]) -> DenseMatrix<S> {
    let mut out = neighbor_sum(h, neigh);
    for v in 0..h.rows {
        if neigh[v].is_empty() {
            continue;
        }
        let inv = S::one() / S::from_usize(neigh[v].len());
        for j in 0..h.cols {
            out[(v, j)] *= inv;
        }
    }
    out
}

/// Applies the transpose of the neighbor-mean operator: gradient flowing
/// into node v's mean is redistributed to v's neighbors at weight 1/|N(v)|.
fn neighbor_mean_transpose<S: Scalar>(x: &DenseMatrix<S>, neigh: &[Vec<usize>]) -> DenseMatrix<S> {
    let mut out = DenseMatrix::zeros(x.rows, x.cols);
    for v in 0..x.rows {
        if neigh[v].is_empty() {
            continue;
        }
        let inv = S::one() / S::from_usize(neigh[v].len());
        for &u in &neigh[v] {
            for j in 0..x.cols {
                let add = x[(v, j)] * inv;
                out[(u, j)] += add;
            }
        }
    }
    out
}

// --- GCN ---------------------------------------------------------------

pub(crate) struct GcnCache<S: Scalar> {
    /// Â·H, reused for the weight gradient.
    pub mh: DenseMatrix<S>,
    pub out: DenseMatrix<S>,
}

pub(crate) fn gcn_forward<S: Scalar>(
    h: &DenseMatrix<S>,
    a_norm: &DenseMatrix<S>,
    w: &DenseMatrix<S>,
) -> Result<GcnCache<S>, ModelError> {
    let mh = a_norm.matmul(h)?;
    let out = mh.matmul(w)?.relu();
    Ok(GcnCache { mh, out })
}

/// H' = ReLU(Â·H·W).
pub fn gcn_layer<S: Scalar>(
    h: &DenseMatrix<S>,
    a_norm: &DenseMatrix<S>,
    w: &DenseMatrix<S>,
) -> Result<DenseMatrix<S>, ModelError> {
    Ok(gcn_forward(h, a_norm, w)?.out)
}

/// Returns (dW, dH).
pub(crate) fn gcn_backward<S: Scalar>(
    cache: &GcnCache<S>,
    a_norm: &DenseMatrix<S>,
    w: &DenseMatrix<S>,
    grad_out: &DenseMatrix<S>,
) -> Result<(DenseMatrix<S>, DenseMatrix<S>), ModelError> {
    let gz = cache.out.relu_gate(grad_out);
    let dw = cache.mh.transpose().matmul(&gz)?;
    let dh = a_norm.transpose().matmul(&gz.matmul(&w.transpose())?)?;
    Ok((dw, dh))
}

// --- GraphSAGE ----------------------------------------------------------

pub(crate) struct SageCache<S: Scalar> {
    /// Neighbor means of H; zero rows for isolated nodes.
    pub ph: DenseMatrix<S>,
    pub out: DenseMatrix<S>,
}

pub(crate) fn sage_forward<S: Scalar>(
    h: &DenseMatrix<S>,
    neigh: &[Vec<usize>],
    w_self: &DenseMatrix<S>,
    w_neigh: &DenseMatrix<S>,
) -> Result<SageCache<S>, ModelError> {
    let ph = neighbor_mean(h, neigh);
    let z = h.matmul(w_self)?.add(&ph.matmul(w_neigh)?)?;
    Ok(SageCache { ph, out: z.relu() })
}

/// H'_v = ReLU(H_v·W_self + mean_{u∈N(v)} H_u·W_neigh).
pub fn sage_layer<S: Scalar>(
    h: &DenseMatrix<S>,
    adjacency: &[(usize, usize)],
    w_self: &DenseMatrix<S>,
    w_neigh: &DenseMatrix<S>,
) -> Result<DenseMatrix<S>, ModelError> {
    let neigh = symmetric_neighbors(h.rows, adjacency);
    Ok(sage_forward(h, &neigh, w_self, w_neigh)?.out)
}

/// Returns (dW_self, dW_neigh, dH).
pub(crate) fn sage_backward<S: Scalar>(
    cache: &SageCache<S>,
    h_in: &DenseMatrix<S>,
    neigh: &[Vec<usize>],
    w_self: &DenseMatrix<S>,
    w_neigh: &DenseMatrix<S>,
    grad_out: &DenseMatrix<S>,
) -> Result<(DenseMatrix<S>, DenseMatrix<S>, DenseMatrix<S>), ModelError> {
    let gz = cache.out.relu_gate(grad_out);
    let dw_self = h_in.transpose().matmul(&gz)?;
    let dw_neigh = cache.ph.transpose().matmul(&gz)?;
    let mut dh = gz.matmul(&w_self.transpose())?;
    dh.add_assign(&neighbor_mean_transpose(
        &gz.matmul(&w_neigh.transpose())?,
        neigh,
    ));
    Ok((dw_self, dw_neigh, dh))
}

// --- GIN -----------------------------------------------------------------

pub(crate) struct GinCache<S: Scalar> {
    /// (1+ε)H + Σ_neighbors H.
    pub u: DenseMatrix<S>,
    /// First MLP activation ReLU(U·W1).
    pub r1: DenseMatrix<S>,
    pub out: DenseMatrix<S>,
}

pub(crate) fn gin_forward<S: Scalar>(
    h: &DenseMatrix<S>,
    neigh: &[Vec<usize>],
    w1: &DenseMatrix<S>,
    w2: &DenseMatrix<S>,
    eps: S,
) -> Result<GinCache<S>, ModelError> {
    let mut u = neighbor_sum(h, neigh);
    let self_scale = S::one() + eps;
    for v in 0..h.rows {
        for j in 0..h.cols {
            let add = h[(v, j)] * self_scale;
            u[(v, j)] += add;
        }
    }
    let r1 = u.matmul(w1)?.relu();
    let out = r1.matmul(w2)?.relu();
    Ok(GinCache { u, r1, out })
}

/// H'_v = MLP((1+ε)H_v + Σ_{u∈N(v)} H_u) with MLP = ReLU∘linear∘ReLU∘linear.
pub fn gin_layer<S: Scalar>(
    h: &DenseMatrix<S>,
    adjacency: &[(usize, usize)],
    w1: &DenseMatrix<S>,
    w2: &DenseMatrix<S>,
    eps: S,
) -> Result<DenseMatrix<S>, ModelError> {
    let neigh = symmetric_neighbors(h.rows, adjacency);
    Ok(gin_forward(h, &neigh, w1, w2, eps)?.out)
}

/// Returns (dW1, dW2, dH).
pub(crate) fn gin_backward<S: Scalar>(
    cache: &GinCache<S>,
    neigh: &[Vec<usize>],
    w1: &DenseMatrix<S>,
    w2: &DenseMatrix<S>,
    eps: S,
    grad_out: &DenseMatrix<S>,
) -> Result<(DenseMatrix<S>, DenseMatrix<S>, DenseMatrix<S>), ModelError> {
    let gt2 = cache.out.relu_gate(grad_out);
    let dw2 = cache.r1.transpose().matmul(&gt2)?;
    let gr1 = gt2.matmul(&w2.transpose())?;
    let gt1 = cache.r1.relu_gate(&gr1);
    let dw1 = cache.u.transpose().matmul(&gt1)?;
    let gu = gt1.matmul(&w1.transpose())?;
    // d/dH of (1+ε)H + A·H with symmetric A.
    let mut dh = neighbor_sum(&gu, neigh);
    let self_scale = S::one() + eps;
    for v in 0..gu.rows {
        for j in 0..gu.cols {
            let add = gu[(v, j)] * self_scale;
            dh[(v, j)] += add;
        }
    }
    Ok((dw1, dw2, dh))
}

// --- GAT -----------------------------------------------------------------

pub(crate) struct GatCache<S: Scalar> {
    /// Q = H·W.
    pub q: DenseMatrix<S>,
    /// Per node: sorted neighborhood including the node itself.
    pub hood: Vec<Vec<usize>>,
    /// Pre-LeakyReLU attention logits, aligned with `hood`.
    pub c: Vec<Vec<S>>,
    /// Softmax weights, aligned with `hood`.
    pub alpha: Vec<Vec<S>>,
    pub out: DenseMatrix<S>,
}

pub(crate) fn gat_forward<S: Scalar>(
    h: &DenseMatrix<S>,
    neigh: &[Vec<usize>],
    w: &DenseMatrix<S>,
    a: &DenseMatrix<S>,
    slope: S,
) -> Result<GatCache<S>, ModelError> {
    let q = h.matmul(w)?;
    let d = q.cols;
    if a.rows != 2 * d || a.cols != 1 {
        return Err(ModelError::DimensionMismatch {
            op: "gat attention vector",
            lhs: (a.rows, a.cols),
            rhs: (2 * d, 1),
        });
    }

    let n = h.rows;
    let mut hood = Vec::with_capacity(n);
    let mut cs = Vec::with_capacity(n);
    let mut alphas = Vec::with_capacity(n);
    let mut out = DenseMatrix::zeros(n, d);

    for v in 0..n {
        let mut s: Vec<usize> = neigh[v].clone();
        let pos = s.partition_point(|&u| u < v);
        s.insert(pos, v);

        // c_{vu} = a1·Q_v + a2·Q_u, then LeakyReLU and a stable softmax.
        let self_term: S = (0..d).map(|j| a[(j, 0)] * q[(v, j)]).sum();
        let c_row: Vec<S> = s
            .iter()
            .map(|&u| self_term + (0..d).map(|j| a[(d + j, 0)] * q[(u, j)]).sum())
            .collect();
        let e_row: Vec<S> = c_row
            .iter()
            .map(|&c| if c > S::zero() { c } else { c * slope })
            .collect();
        let max = e_row.iter().fold(S::neg_infinity(), |m, &e| m.max(e));
        let exps: Vec<S> = e_row.iter().map(|&e| (e - max).exp()).collect();
        let total: S = exps.iter().copied().sum();
        let alpha_row: Vec<S> = exps.iter().map(|&e| e / total).collect();

        for (&u, &alpha) in s.iter().zip(&alpha_row) {
            for j in 0..d {
                let add = alpha * q[(u, j)];
                out[(v, j)] += add;
            }
        }
        hood.push(s);
        cs.push(c_row);
        alphas.push(alpha_row);
    }

    Ok(GatCache {
        q,
        hood,
        c: cs,
        alpha: alphas,
        out: out.relu(),
    })
}

/// Single-head attention: H'_v = ReLU(Σ_{u∈N(v)∪{v}} α_{vu}·Q_u) with
/// α = softmax_u(LeakyReLU(a·[Q_v ∥ Q_u])).
pub fn gat_layer<S: Scalar>(
    h: &DenseMatrix<S>,
    adjacency: &[(usize, usize)],
    w: &DenseMatrix<S>,
    a: &DenseMatrix<S>,
    slope: S,
) -> Result<DenseMatrix<S>, ModelError> {
    let neigh = symmetric_neighbors(h.rows, adjacency);
    Ok(gat_forward(h, &neigh, w, a, slope)?.out)
}

/// Returns (dW, da, dH).
pub(crate) fn gat_backward<S: Scalar>(
    cache: &GatCache<S>,
    h_in: &DenseMatrix<S>,
    w: &DenseMatrix<S>,
    a: &DenseMatrix<S>,
    slope: S,
    grad_out: &DenseMatrix<S>,
) -> Result<(DenseMatrix<S>, DenseMatrix<S>, DenseMatrix<S>), ModelError> {
    let gz = cache.out.relu_gate(grad_out);
    let q = &cache.q;
    let d = q.cols;
    let n = q.rows;
    let mut dq = DenseMatrix::zeros(n, d);
    let mut da = DenseMatrix::zeros(2 * d, 1);

    for v in 0..n {
        let hood = &cache.hood[v];
        let alpha = &cache.alpha[v];
        let c = &cache.c[v];

        // Value path plus softmax/LeakyReLU path back to Q and a.
        let dalpha: Vec<S> = hood
            .iter()
            .map(|&u| (0..d).map(|j| gz[(v, j)] * q[(u, j)]).sum())
            .collect();
        let weighted: S = alpha.iter().zip(&dalpha).map(|(&al, &dal)| al * dal).sum();
        for ((&u, &al), (&dal, &cu)) in hood
            .iter()
            .zip(alpha)
            .zip(dalpha.iter().zip(c))
        {
            for j in 0..d {
                let add = al * gz[(v, j)];
                dq[(u, j)] += add;
            }
            let de = al * (dal - weighted);
            let dc = if cu > S::zero() { de } else { de * slope };
            for j in 0..d {
                let add_v = dc * a[(j, 0)];
                dq[(v, j)] += add_v;
                let add_u = dc * a[(d + j, 0)];
                dq[(u, j)] += add_u;
                da[(j, 0)] += dc * q[(v, j)];
                da[(d + j, 0)] += dc * q[(u, j)];
            }
        }
    }

    let dw = h_in.transpose().matmul(&dq)?;
    let dh = dq.matmul(&w.transpose())?;
    Ok((dw, da, dh))
}

// --- TAG -----------------------------------------------------------------

pub(crate) struct TagCache<S: Scalar> {
    /// B_k = Â^k·H for k = 0..=hops.
    pub b: Vec<DenseMatrix<S>>,
    pub out: DenseMatrix<S>,
}

pub(crate) fn tag_forward<S: Scalar>(
    h: &DenseMatrix<S>,
    a_norm: &DenseMatrix<S>,
    ws: &[DenseMatrix<S>],
) -> Result<TagCache<S>, ModelError> {
    let mut b = vec![h.clone()];
    for _ in 1..ws.len() {
        let next = a_norm.matmul(b.last().unwrap())?;
        b.push(next);
    }
    let mut z = DenseMatrix::zeros(h.rows, ws[0].cols);
    for (bk, wk) in b.iter().zip(ws) {
        z.add_assign(&bk.matmul(wk)?);
    }
    Ok(TagCache { b, out: z.relu() })
}

/// H' = ReLU(Σ_{k=0..K} Â^k·H·W_k); `ws` holds W_0..W_K.
pub fn tag_layer<S: Scalar>(
    h: &DenseMatrix<S>,
    a_norm: &DenseMatrix<S>,
    ws: &[DenseMatrix<S>],
) -> Result<DenseMatrix<S>, ModelError> {
    Ok(tag_forward(h, a_norm, ws)?.out)
}

/// Returns (dW_0..dW_K, dH).
pub(crate) fn tag_backward<S: Scalar>(
    cache: &TagCache<S>,
    a_norm: &DenseMatrix<S>,
    ws: &[DenseMatrix<S>],
    grad_out: &DenseMatrix<S>,
) -> Result<(Vec<DenseMatrix<S>>, DenseMatrix<S>), ModelError> {
    let gz = cache.out.relu_gate(grad_out);
    let mut dws = Vec::with_capacity(ws.len());
    for bk in &cache.b {
        dws.push(bk.transpose().matmul(&gz)?);
    }
    // dH = Σ_k Â^k·(G·W_kᵀ), evaluated Horner-style from the deepest hop.
    // Â is symmetric, so no transpose is needed.
    let mut dh = gz.matmul(&ws.last().unwrap().transpose())?;
    for wk in ws.iter().rev().skip(1) {
        dh = a_norm.matmul(&dh)?;
        dh.add_assign(&gz.matmul(&wk.transpose())?);
    }
    Ok((dws, dh))
}

/// Column-wise mean over nodes.
pub fn mean_pool<S: Scalar>(h: &DenseMatrix<S>) -> Vec<S> {
    let inv = S::one() / S::from_usize(h.rows);
    (0..h.cols)
        .map(|j| {
            let sum: S = (0..h.rows).map(|i| h[(i, j)]).sum();
            sum * inv
        })
        .collect()
}
