//! Particle state, the stuck-cluster partition, and the alignment vector field.
//!
//! The acceleration of particle `i` is
//!
//! ```text
//! a_i = c · Σ_{k ∈ B_i} (v_k - v_i) ψ(|x_k - x_i|)
//! ```
//!
//! where `B_i` holds every particle outside the cluster of `i` (each counted
//! individually) and `c` is `1/N` for [`Normalization::Mean`] or `1` for
//! [`Normalization::Sum`]. The inner sum runs over `k` in ascending order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{PreparedKernel, WeightKernel};

/// Disjoint-set forest over particle indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterPartition {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl ClusterPartition {
    pub fn singletons(n: usize) -> Self {
        ClusterPartition {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn find(&self, mut i: usize) -> usize {
        while self.parent[i] != i {
            i = self.parent[i];
        }
        i
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }

    pub fn same(&self, a: usize, b: usize) -> bool {
        self.find(a) == self.find(b)
    }

    /// Cluster label of every particle: the smallest index in its cluster.
    pub fn labels(&self) -> Vec<usize> {
        let n = self.len();
        let mut smallest = vec![usize::MAX; n];
        for i in 0..n {
            let r = self.find(i);
            smallest[r] = smallest[r].min(i);
        }
        (0..n).map(|i| smallest[self.find(i)]).collect()
    }

    /// Clusters as sorted index lists, ordered by their smallest member.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let labels = self.labels();
        let mut out: Vec<Vec<usize>> = Vec::new();
        for (i, &l) in labels.iter().enumerate() {
            if l == i {
                out.push(vec![i]);
            } else {
                let pos = out.iter().position(|c| c[0] == l).expect("label precedes member");
                out[pos].push(i);
            }
        }
        out
    }

    pub fn cluster_count(&self) -> usize {
        (0..self.len()).filter(|&i| self.parent[i] == i).count()
    }

    pub fn from_labels(labels: &[usize]) -> Self {
        let mut p = ClusterPartition::singletons(labels.len());
        for (i, &l) in labels.iter().enumerate() {
            p.union(i, l);
        }
        p
    }
}

/// Prefactor convention for the alignment sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `1/N`, the mean-field scaling.
    #[default]
    Mean,
    /// `1`, the unnormalized sum. For two particles this is the scaling under
    /// which the separation obeys `φ'' = -2 φ' ψ(|φ|)`.
    Sum,
}

impl Normalization {
    pub fn prefactor(&self, n: usize) -> f64 {
        match self {
            Normalization::Mean => 1.0 / n as f64,
            Normalization::Sum => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleSystem {
    n: usize,
    dim: usize,
    x: Vec<f64>,
    v: Vec<f64>,
    kernel: WeightKernel,
    normalization: Normalization,
    partition: ClusterPartition,
}

/// Row-major `N × d` accelerations.
#[derive(Clone, Debug, PartialEq)]
pub struct Acceleration {
    pub dim: usize,
    pub values: Vec<f64>,
}

impl Acceleration {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }
}

impl ParticleSystem {
    pub fn make_system(
        n: usize,
        dim: usize,
        x: Vec<f64>,
        v: Vec<f64>,
        kernel: WeightKernel,
    ) -> Result<Self> {
        if n == 0 || dim == 0 {
            return Err(Error::Shape(format!("need N >= 1 and d >= 1, got N = {n}, d = {dim}")));
        }
        if x.len() != n * dim || v.len() != n * dim {
            return Err(Error::Shape(format!(
                "expected {} position and velocity entries, got {} and {}",
                n * dim,
                x.len(),
                v.len()
            )));
        }
        if x.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("positions"));
        }
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("velocities"));
        }
        kernel.validate()?;
        let mut partition = ClusterPartition::singletons(n);
        for i in 0..n {
            for j in (i + 1)..n {
                let same_x = x[i * dim..(i + 1) * dim] == x[j * dim..(j + 1) * dim];
                let same_v = v[i * dim..(i + 1) * dim] == v[j * dim..(j + 1) * dim];
                if same_x && same_v {
                    partition.union(i, j);
                }
            }
        }
        Ok(ParticleSystem {
            n,
            dim,
            x,
            v,
            kernel,
            normalization: Normalization::Mean,
            partition,
        })
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn with_kernel(mut self, kernel: WeightKernel) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn positions(&self) -> &[f64] {
        &self.x
    }

    pub fn velocities(&self) -> &[f64] {
        &self.v
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn velocity(&self, i: usize) -> &[f64] {
        &self.v[i * self.dim..(i + 1) * self.dim]
    }

    pub fn kernel(&self) -> WeightKernel {
        self.kernel
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn partition(&self) -> &ClusterPartition {
        &self.partition
    }

    pub(crate) fn set_state(&mut self, x: &[f64], v: &[f64]) {
        self.x.copy_from_slice(x);
        self.v.copy_from_slice(v);
    }

    /// Indices outside the cluster of `i`.
    pub fn active_set(&self, i: usize) -> Result<Vec<usize>> {
        active_set(&self.partition, i)
    }

    pub fn mean_velocity(&self) -> Vec<f64> {
        mean_rows(&self.v, self.n, self.dim)
    }

    pub fn acceleration(&self) -> Result<Acceleration> {
        let kernel = PreparedKernel::new(self.kernel);
        let labels = self.partition.labels();
        let mut out = vec![0.0; self.n * self.dim];
        let singular = matches!(self.kernel, WeightKernel::Singular { .. });
        if singular {
            for i in 0..self.n {
                for k in 0..self.n {
                    if labels[k] != labels[i] && self.position(i) == self.position(k) {
                        return Err(Error::SingularEvaluation(i.min(k), i.max(k)));
                    }
                }
            }
        }
        alignment_field(
            &kernel,
            self.normalization.prefactor(self.n),
            &labels,
            self.dim,
            &self.x,
            &self.v,
            &mut out,
        );
        Ok(Acceleration {
            dim: self.dim,
            values: out,
        })
    }

    /// Joins `group` into one cluster, placing every member at the group's
    /// mean position with the group's mean velocity.
    pub fn merge_clusters(&self, group: &[usize]) -> Result<ParticleSystem> {
        if group.is_empty() {
            return Err(Error::domain("merge group is empty"));
        }
        for &i in group {
            if i >= self.n {
                return Err(Error::Index { index: i, n: self.n });
            }
        }
        // all members of every touched cluster move together
        let mut members: Vec<usize> = (0..self.n)
            .filter(|&k| group.iter().any(|&g| self.partition.same(g, k)))
            .collect();
        members.sort_unstable();
        let mut out = self.clone();
        let d = self.dim;
        let inv = 1.0 / members.len() as f64;
        let mut mx = vec![0.0; d];
        let mut mv = vec![0.0; d];
        for &i in &members {
            for c in 0..d {
                mx[c] += self.x[i * d + c];
                mv[c] += self.v[i * d + c];
            }
        }
        for c in 0..d {
            mx[c] *= inv;
            mv[c] *= inv;
        }
        for &i in &members {
            out.x[i * d..(i + 1) * d].copy_from_slice(&mx);
            out.v[i * d..(i + 1) * d].copy_from_slice(&mv);
            out.partition.union(members[0], i);
        }
        Ok(out)
    }
}

pub fn active_set(partition: &ClusterPartition, i: usize) -> Result<Vec<usize>> {
    let n = partition.len();
    if i >= n {
        return Err(Error::Index { index: i, n });
    }
    Ok((0..n).filter(|&k| !partition.same(i, k)).collect())
}

pub(crate) fn mean_rows(values: &[f64], n: usize, dim: usize) -> Vec<f64> {
    let mut m = vec![0.0; dim];
    for i in 0..n {
        for c in 0..dim {
            m[c] += values[i * dim + c];
        }
    }
    for c in m.iter_mut() {
        *c /= n as f64;
    }
    m
}

/// Writes the accelerations into `out`. `labels[i]` identifies the cluster of
/// particle `i`; pairs sharing a label do not interact.
pub(crate) fn alignment_field(
    kernel: &PreparedKernel,
    prefactor: f64,
    labels: &[usize],
    dim: usize,
    x: &[f64],
    v: &[f64],
    out: &mut [f64],
) {
    let n = labels.len();
    let mut acc = [0.0f64; 8];
    let mut acc_heap = Vec::new();
    let acc: &mut [f64] = if dim <= acc.len() {
        &mut acc[..dim]
    } else {
        acc_heap.resize(dim, 0.0);
        &mut acc_heap
    };
    for i in 0..n {
        acc.iter_mut().for_each(|a| *a = 0.0);
        let xi = &x[i * dim..(i + 1) * dim];
        let vi = &v[i * dim..(i + 1) * dim];
        for k in 0..n {
            if labels[k] == labels[i] {
                continue;
            }
            let xk = &x[k * dim..(k + 1) * dim];
            let vk = &v[k * dim..(k + 1) * dim];
            let dist = xk
                .iter()
                .zip(xi)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let w = kernel.weight(dist);
            for c in 0..dim {
                acc[c] += (vk[c] - vi[c]) * w;
            }
        }
        for c in 0..dim {
            out[i * dim + c] = prefactor * acc[c];
        }
    }
}

/// Velocity dispersion `Σ_{i,j} |v_i - v_j|²` over ordered pairs.
pub fn dispersion(v: &[f64], n: usize, dim: usize) -> f64 {
    let mut r = 0.0;
    for i in 0..n {
        for j in 0..n {
            for c in 0..dim {
                let d = v[i * dim + c] - v[j * dim + c];
                r += d * d;
            }
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sing(alpha: f64) -> WeightKernel {
        WeightKernel::singular(alpha).unwrap()
    }

    #[test]
    fn make_system_grouping() {
        let s = ParticleSystem::make_system(2, 1, vec![0.0, 1.0], vec![0.0, 0.0], sing(0.5)).unwrap();
        assert_eq!(s.partition().cluster_count(), 2);
        let s = ParticleSystem::make_system(2, 1, vec![0.0, 0.0], vec![1.0, 1.0], sing(0.5)).unwrap();
        assert_eq!(s.partition().cluster_count(), 1);
        let s = ParticleSystem::make_system(
            3,
            2,
            vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0],
            vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
            sing(0.5),
        )
        .unwrap();
        assert_eq!(s.partition().cluster_count(), 3);
        // same position, different velocity stays separate
        let s = ParticleSystem::make_system(2, 1, vec![0.0, 0.0], vec![1.0, 2.0], sing(0.5)).unwrap();
        assert_eq!(s.partition().cluster_count(), 2);
    }

    #[test]
    fn make_system_errors() {
        assert!(matches!(
            ParticleSystem::make_system(2, 1, vec![0.0], vec![0.0, 0.0], sing(0.5)),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            ParticleSystem::make_system(1, 1, vec![f64::NAN], vec![0.0], sing(0.5)),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            ParticleSystem::make_system(
                1,
                1,
                vec![0.0],
                vec![0.0],
                WeightKernel::Singular { alpha: 2.0 }
            ),
            Err(Error::InvalidKernel(_))
        ));
    }

    #[test]
    fn active_sets() {
        let p = ClusterPartition::singletons(3);
        assert_eq!(active_set(&p, 0).unwrap(), vec![1, 2]);
        let mut p = ClusterPartition::singletons(3);
        p.union(0, 1);
        assert_eq!(active_set(&p, 0).unwrap(), vec![2]);
        p.union(1, 2);
        assert!(active_set(&p, 1).unwrap().is_empty());
        assert!(matches!(active_set(&p, 3), Err(Error::Index { .. })));
    }

    #[test]
    fn acceleration_two_body() {
        let s = ParticleSystem::make_system(2, 1, vec![0.0, 1.0], vec![1.0, -1.0], sing(0.5)).unwrap();
        let a = s.acceleration().unwrap();
        assert_eq!(a.values, vec![-1.0, 1.0]);
    }

    #[test]
    fn acceleration_with_multiplicity() {
        let s = ParticleSystem::make_system(
            3,
            1,
            vec![0.0, 0.0, 1.0],
            vec![5.0, 5.0, 0.0],
            sing(0.5),
        )
        .unwrap();
        assert!(s.partition().same(0, 1));
        let a = s.acceleration().unwrap();
        assert!((a.values[0] + 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(a.values[0], a.values[1]);
        assert!((a.values[2] - 10.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn acceleration_equal_velocities_and_singleton() {
        let s = ParticleSystem::make_system(
            3,
            2,
            vec![0.0, 0.0, 1.0, 0.0, 0.0, 2.0],
            vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0],
            sing(0.3),
        )
        .unwrap();
        assert!(s.acceleration().unwrap().values.iter().all(|&a| a == 0.0));
        let s = ParticleSystem::make_system(1, 3, vec![0.0; 3], vec![1.0, 2.0, 3.0], sing(0.3)).unwrap();
        assert!(s.acceleration().unwrap().values.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn singular_zero_distance_is_an_error() {
        let s = ParticleSystem::make_system(2, 1, vec![0.0, 0.0], vec![1.0, -1.0], sing(0.5)).unwrap();
        assert!(matches!(s.acceleration(), Err(Error::SingularEvaluation(0, 1))));
        let s = s.with_kernel(WeightKernel::regularized(0.5, 10).unwrap());
        assert_eq!(s.acceleration().unwrap().values, vec![-10.0, 10.0]);
    }

    #[test]
    fn merge_means_and_idempotence() {
        let s = ParticleSystem::make_system(
            3,
            1,
            vec![0.0, 1e-7, 3.0],
            vec![1.0, 1.0 + 1e-5, -2.0],
            sing(0.5),
        )
        .unwrap();
        let before = s.mean_velocity();
        let m = s.merge_clusters(&[0, 1]).unwrap();
        assert!(m.partition().same(0, 1));
        assert_eq!(m.position(0), m.position(1));
        assert_eq!(m.velocity(0), m.velocity(1));
        assert!((m.mean_velocity()[0] - before[0]).abs() < 1e-15);
        let again = m.merge_clusters(&[0, 1]).unwrap();
        assert_eq!(again, m);
        let all = m.merge_clusters(&[0, 1, 2]).unwrap();
        assert_eq!(all.partition().cluster_count(), 1);
        assert!((all.velocity(2)[0] - before[0]).abs() < 1e-15);
    }

    #[test]
    fn partition_labels_and_clusters() {
        let mut p = ClusterPartition::singletons(5);
        p.union(3, 1);
        p.union(4, 0);
        assert_eq!(p.labels(), vec![0, 1, 2, 1, 0]);
        assert_eq!(p.clusters(), vec![vec![0, 4], vec![1, 3], vec![2]]);
        assert_eq!(ClusterPartition::from_labels(&p.labels()).labels(), p.labels());
    }

    fn arb_system() -> impl Strategy<Value = ParticleSystem> {
        (1usize..7, 1usize..4, 0.05f64..0.95).prop_flat_map(|(n, d, alpha)| {
            (
                proptest::collection::vec(-3.0f64..3.0, n * d),
                proptest::collection::vec(-2.0f64..2.0, n * d),
                proptest::collection::vec(0usize..n, n),
                Just((n, d, alpha)),
            )
                .prop_map(|(x, v, links, (n, d, alpha))| {
                    let s = ParticleSystem::make_system(
                        n,
                        d,
                        x,
                        v,
                        WeightKernel::regularized(alpha, 1000).unwrap(),
                    )
                    .unwrap();
                    // glue a few random clusters together
                    let group: Vec<usize> = (0..n).filter(|&i| links[i] == 0).collect();
                    if group.len() >= 2 {
                        s.merge_clusters(&group).unwrap()
                    } else {
                        s
                    }
                })
        })
    }

    proptest! {
        #[test]
        fn mean_velocity_invariance(s in arb_system()) {
            let a = s.acceleration().unwrap();
            let m = mean_rows(&a.values, s.n(), s.dim());
            for c in m {
                prop_assert!(c.abs() < 1e-12);
            }
        }

        #[test]
        fn cluster_rows_identical(s in arb_system()) {
            let a = s.acceleration().unwrap();
            for i in 0..s.n() {
                for k in 0..s.n() {
                    if s.partition().same(i, k) {
                        prop_assert_eq!(a.row(i), a.row(k));
                    }
                }
            }
        }

        #[test]
        fn dissipation_identity(s in arb_system()) {
            let (n, d) = (s.n(), s.dim());
            let a = s.acceleration().unwrap();
            let v = s.velocities();
            let mut rate = 0.0;
            for i in 0..n {
                for j in 0..n {
                    for c in 0..d {
                        rate += 2.0 * (v[i * d + c] - v[j * d + c]) * (a.values[i * d + c] - a.values[j * d + c]);
                    }
                }
            }
            let k = PreparedKernel::new(s.kernel());
            let mut expected = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if s.partition().same(i, j) { continue; }
                    let dist = s.position(i).iter().zip(s.position(j)).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
                    let dv2: f64 = s.velocity(i).iter().zip(s.velocity(j)).map(|(p, q)| (p - q) * (p - q)).sum();
                    expected -= 2.0 * dv2 * k.weight(dist);
                }
            }
            prop_assert!(rate <= 1e-10);
            prop_assert!((rate - expected).abs() <= 1e-10 * (1.0 + expected.abs()), "{} vs {}", rate, expected);
        }

        #[test]
        fn two_body_rows_antisymmetric(x in proptest::collection::vec(-2.0f64..2.0, 4), v in proptest::collection::vec(-2.0f64..2.0, 4)) {
            let s = ParticleSystem::make_system(2, 2, x, v, WeightKernel::regularized(0.5, 100).unwrap()).unwrap();
            let a = s.acceleration().unwrap();
            prop_assert_eq!(a.values[0], -a.values[2]);
            prop_assert_eq!(a.values[1], -a.values[3]);
        }

        #[test]
        fn regularized_acceleration_bound(s in arb_system()) {
            let (n, d) = (s.n(), s.dim());
            let r0 = dispersion(s.velocities(), n, d);
            let vbar = s.mean_velocity().iter().map(|c| c * c).sum::<f64>().sqrt();
            let m = (n as f64).sqrt() * r0.sqrt() + vbar;
            let a = s.acceleration().unwrap();
            for i in 0..n {
                let norm = a.row(i).iter().map(|c| c * c).sum::<f64>().sqrt();
                prop_assert!(norm <= 2.0 * m * 1000.0 + 1e-9);
            }
        }
    }
}
