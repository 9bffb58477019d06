//! Flattened dataset layout shared by the fitting and variance hot paths.

use std::ops::Range;

use ndarray::{Array1, Array2};

use crate::data::Dataset;
use crate::Scalar;

/// Column-oriented view of a dataset with the failure-time bookkeeping the
/// EM and score loops need. Jump times are the pooled distinct failure
/// times; they are fixed for the lifetime of a fit.
pub(crate) struct FlatData<T> {
    pub n: usize,
    pub p: usize,
    pub y: Vec<T>,
    pub event: Vec<bool>,
    pub z: Array2<T>,
    pub member_index: Vec<usize>,
    pub cluster_ranges: Vec<Range<usize>>,
    /// distinct failure times, ascending
    pub jump_times: Vec<T>,
    /// failures pooled per jump time
    pub d_count: Vec<T>,
    /// exact jump index of a failure observation (undefined for censored)
    pub jump_of_obs: Vec<usize>,
    /// number of jump times `<= y_i`; `Λ(y_i)` = prefix sum of that many jumps
    pub idx_leq: Vec<usize>,
    /// observation indices ordered by time descending (risk-set sweeps)
    pub order_desc: Vec<usize>,
    /// covariate sums over the failures pooled at each jump time (nq × p)
    z_sum_jump: Array2<T>,
    /// covariate sums over all failures (p)
    z_sum_all_events: Array1<T>,
}

impl<T: Scalar> FlatData<T> {
    pub fn build(dataset: &Dataset<T>) -> Self {
        let n = dataset.n_observations();
        let p = dataset.p1;
        let mut y = Vec::with_capacity(n);
        let mut event = Vec::with_capacity(n);
        let mut z = Array2::<T>::zeros((n, p));
        let mut member_index = Vec::with_capacity(n);
        let mut cluster_ranges = Vec::with_capacity(dataset.n_clusters());
        let mut pos = 0usize;
        for cl in &dataset.clusters {
            let start = pos;
            for obs in &cl.members {
                y.push(obs.time);
                event.push(obs.event);
                for j in 0..p {
                    z[(pos, j)] = obs.covariates[j];
                }
                member_index.push(obs.member_index);
                pos += 1;
            }
            cluster_ranges.push(start..pos);
        }

        let jump_times = dataset.distinct_failure_times();
        let nq = jump_times.len();
        let mut d_count = vec![T::zero(); nq];
        let mut jump_of_obs = vec![usize::MAX; n];
        let mut idx_leq = vec![0usize; n];
        for i in 0..n {
            idx_leq[i] = jump_times.partition_point(|&t| t <= y[i]);
            if event[i] {
                let q = idx_leq[i] - 1;
                debug_assert_eq!(jump_times[q], y[i]);
                jump_of_obs[i] = q;
                d_count[q] += T::one();
            }
        }

        let mut order_desc: Vec<usize> = (0..n).collect();
        order_desc.sort_by(|&a, &b| y[b].partial_cmp(&y[a]).expect("finite times"));

        let mut z_sum_jump = Array2::<T>::zeros((nq, p));
        let mut z_sum_all_events = Array1::<T>::zeros(p);
        for i in 0..n {
            if event[i] {
                let q = jump_of_obs[i];
                for a in 0..p {
                    z_sum_jump[(q, a)] += z[(i, a)];
                    z_sum_all_events[a] += z[(i, a)];
                }
            }
        }

        Self {
            n,
            p,
            y,
            event,
            z,
            member_index,
            cluster_ranges,
            jump_times,
            d_count,
            jump_of_obs,
            idx_leq,
            order_desc,
            z_sum_jump,
            z_sum_all_events,
        }
    }

    /// Covariate-coordinate sum over failures pooled at jump `q`.
    #[inline]
    pub fn z_sum_at_jump(&self, q: usize, coord: usize) -> T {
        self.z_sum_jump[(q, coord)]
    }

    /// Covariate-coordinate sum over all failures.
    #[inline]
    pub fn z_sum_events(&self, coord: usize) -> T {
        self.z_sum_all_events[coord]
    }

    /// `zᵀβ` per observation.
    pub fn linear_predictor(&self, beta: &Array1<T>) -> Vec<T> {
        (0..self.n).map(|i| self.z.row(i).dot(beta)).collect()
    }

    /// `Λ(y_i)` per observation for the given jump sizes.
    pub fn baseline_values(&self, jump_sizes: &[T]) -> Vec<T> {
        debug_assert_eq!(jump_sizes.len(), self.jump_times.len());
        let mut cum = Vec::with_capacity(jump_sizes.len() + 1);
        let mut acc = T::zero();
        cum.push(acc);
        for &s in jump_sizes {
            acc += s;
            cum.push(acc);
        }
        self.idx_leq.iter().map(|&k| cum[k]).collect()
    }

    /// Weighted at-risk sums `S0(t_q) = Σ_i w_i 1{y_i >= t_q}` at every jump
    /// time, returned in jump order.
    pub fn risk_sums_s0(&self, weights: &[T]) -> Vec<T> {
        let nq = self.jump_times.len();
        let mut s0 = vec![T::zero(); nq];
        let mut acc = T::zero();
        let mut it = self.order_desc.iter().peekable();
        for q in (0..nq).rev() {
            let t = self.jump_times[q];
            while let Some(&&i) = it.peek() {
                if self.y[i] >= t {
                    acc += weights[i];
                    it.next();
                } else {
                    break;
                }
            }
            s0[q] = acc;
        }
        s0
    }
}
