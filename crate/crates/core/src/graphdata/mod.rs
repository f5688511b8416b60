//! Dynamic brain networks and the static graph view the encoder attends over.

mod io;

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::numcore::Tensor2;

pub use io::{
    export_features_csv, load_dataset, save_dataset, sidecar_path, Dataset, DatasetHeader,
    FORMAT_VERSION,
};

/// One subject: regional features, per-timestep coherence matrices and a label.
#[derive(Clone, Debug, PartialEq)]
pub struct DynamicBrainGraph {
    /// N regions × D feature dims.
    pub node_features: Tensor2<f64>,
    /// T matrices, each N×N, symmetric with unit diagonal and entries in [0, 1].
    pub connectivity: Vec<Tensor2<f64>>,
    /// 0 = healthy control, 1 = addicted.
    pub label: u8,
}

impl DynamicBrainGraph {
    pub fn n_regions(&self) -> usize {
        self.node_features.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.node_features.cols()
    }

    pub fn timesteps(&self) -> usize {
        self.connectivity.len()
    }

    /// Checks the per-sample invariants; `index` is reported in errors.
    pub fn validate(&self, index: usize) -> Result<()> {
        if self.label > 1 {
            return Err(Error::InvalidLabel {
                index,
                label: self.label,
            });
        }
        let n = self.n_regions();
        if self.connectivity.is_empty() {
            return Err(Error::SampleShape {
                index,
                detail: "no connectivity timesteps".into(),
            });
        }
        if !self.node_features.is_finite() {
            return Err(Error::SampleShape {
                index,
                detail: "non-finite node feature".into(),
            });
        }
        for (t, a) in self.connectivity.iter().enumerate() {
            if a.shape() != (n, n) {
                return Err(Error::SampleShape {
                    index,
                    detail: format!("connectivity {t} is {:?}, expected ({n}, {n})", a.shape()),
                });
            }
            for i in 0..n {
                if a.get(i, i) != 1.0 {
                    return Err(Error::InvalidConnectivity {
                        index,
                        detail: format!("timestep {t} diagonal ({i}, {i}) is {}", a.get(i, i)),
                    });
                }
                for j in 0..n {
                    let v = a.get(i, j);
                    if !(0.0..=1.0).contains(&v) {
                        return Err(Error::InvalidConnectivity {
                            index,
                            detail: format!("timestep {t} entry ({i}, {j}) = {v} outside [0, 1]"),
                        });
                    }
                    if v != a.get(j, i) {
                        return Err(Error::AsymmetricConnectivity {
                            index,
                            timestep: t,
                            row: i,
                            col: j,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Validates every sample and checks that N, D and T agree across the set.
    pub fn validate_dataset(graphs: &[DynamicBrainGraph]) -> Result<()> {
        let Some(first) = graphs.first() else {
            return Ok(());
        };
        let dims = (first.n_regions(), first.feature_dim(), first.timesteps());
        for (i, g) in graphs.iter().enumerate() {
            let d = (g.n_regions(), g.feature_dim(), g.timesteps());
            if d != dims {
                return Err(Error::SampleShape {
                    index: i,
                    detail: format!("(N, D, T) = {d:?}, dataset uses {dims:?}"),
                });
            }
            g.validate(i)?;
        }
        Ok(())
    }
}

/// Square matrix of small values (adjacency flags, distance buckets).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Square<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Copy> Square<T> {
    pub fn filled(n: usize, v: T) -> Self {
        Self {
            n,
            data: vec![v; n * n],
        }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// `out[i][j] = self[p[i]][p[j]]`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        Self::from_fn(self.n, |i, j| self.get(perm[i], perm[j]))
    }
}

/// Elementwise mean of the per-timestep coherence matrices.
pub fn aggregate_dynamic(connectivity: &[Tensor2<f64>]) -> Result<Tensor2<f64>> {
    let first = connectivity
        .first()
        .ok_or_else(|| Error::InvalidArgument("no connectivity matrices to aggregate".into()))?;
    let mut mean = Tensor2::zeros(first.rows(), first.cols());
    for a in connectivity {
        mean.add_assign(a)?;
    }
    let t = connectivity.len() as f64;
    Ok(mean.map(|v| v / t))
}

/// `adj[i][j] = coherence[i][j] >= tau` off the diagonal; the diagonal is always set.
pub fn threshold_adjacency(coherence: &Tensor2<f64>, tau: f64) -> Result<Square<bool>> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidArgument(format!("tau {tau} outside (0, 1)")));
    }
    let (n, m) = coherence.shape();
    if n != m {
        return Err(Error::Shape(format!("coherence matrix is {n}x{m}")));
    }
    Ok(Square::from_fn(n, |i, j| {
        i == j || coherence.get(i, j) >= tau
    }))
}

/// Breadth-first hop distances, clipped so that anything at distance
/// `>= max_bucket` or unreachable lands in bucket `max_bucket`.
pub fn shortest_path_buckets(adjacency: &Square<bool>, max_bucket: usize) -> Square<usize> {
    let n = adjacency.n();
    let mut out = Square::filled(n, max_bucket);
    let mut queue = VecDeque::with_capacity(n);
    let mut dist = vec![usize::MAX; n];
    for src in 0..n {
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        dist[src] = 0;
        queue.clear();
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            for (v, &edge) in adjacency.row(u).iter().enumerate() {
                if edge && dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        for (dst, &d) in dist.iter().enumerate() {
            out.set(src, dst, if d < max_bucket { d } else { max_bucket });
        }
    }
    out
}

/// Neighborhoods and distance buckets for one sample, shared by all encoder layers.
#[derive(Clone, Debug, PartialEq)]
pub struct StaticGraphView {
    adjacency: Square<bool>,
    spd_bucket: Square<usize>,
    max_bucket: usize,
}

impl StaticGraphView {
    pub fn new(adjacency: Square<bool>, max_bucket: usize) -> Result<Self> {
        if max_bucket == 0 {
            return Err(Error::InvalidArgument(
                "max_bucket must be at least 1".into(),
            ));
        }
        let n = adjacency.n();
        for i in 0..n {
            if !adjacency.get(i, i) {
                return Err(Error::InvalidArgument(format!(
                    "node {i} lacks a self-loop"
                )));
            }
            for j in 0..i {
                if adjacency.get(i, j) != adjacency.get(j, i) {
                    return Err(Error::InvalidArgument(format!(
                        "adjacency asymmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let spd_bucket = shortest_path_buckets(&adjacency, max_bucket);
        Ok(Self {
            adjacency,
            spd_bucket,
            max_bucket,
        })
    }

    /// Mean over timesteps, threshold at `tau`, then distance buckets.
    pub fn from_graph(graph: &DynamicBrainGraph, tau: f64, max_bucket: usize) -> Result<Self> {
        let mean = aggregate_dynamic(&graph.connectivity)?;
        Self::new(threshold_adjacency(&mean, tau)?, max_bucket)
    }

    pub fn n(&self) -> usize {
        self.adjacency.n()
    }

    pub fn max_bucket(&self) -> usize {
        self.max_bucket
    }

    pub fn adjacency(&self) -> &Square<bool> {
        &self.adjacency
    }

    pub fn spd_bucket(&self) -> &Square<usize> {
        &self.spd_bucket
    }

    pub fn permute(&self, perm: &[usize]) -> Self {
        Self {
            adjacency: self.adjacency.permute(perm),
            spd_bucket: self.spd_bucket.permute(perm),
            max_bucket: self.max_bucket,
        }
    }
}
