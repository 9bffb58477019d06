//! Nondecreasing step baseline function `Λ`.

use crate::error::{Error, Result};
use crate::Scalar;

/// A cadlag step function with `Λ(0) = 0`, jumping only at the stored times.
/// Evaluation is right-continuous: a jump exactly at `t` is included in
/// `Λ(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineFunction<T> {
    jump_times: Vec<T>,
    jump_sizes: Vec<T>,
    /// cum[q] = sum of the first q jumps
    cum: Vec<T>,
}

impl<T: Scalar> BaselineFunction<T> {
    pub fn new(jump_times: Vec<T>, jump_sizes: Vec<T>) -> Result<Self> {
        if jump_times.len() != jump_sizes.len() {
            return Err(Error::InvalidBaseline(
                "jump_times and jump_sizes must have equal length".into(),
            ));
        }
        if jump_times
            .windows(2)
            .any(|w| !(w[0] < w[1]) || !w[0].is_finite())
            || jump_times.last().map_or(false, |t| !t.is_finite())
        {
            return Err(Error::InvalidBaseline(
                "jump_times must be finite and strictly increasing".into(),
            ));
        }
        if jump_times.first().map_or(false, |&t| t <= T::zero()) {
            return Err(Error::InvalidBaseline(
                "jump times must be positive (Λ(0) = 0)".into(),
            ));
        }
        if jump_sizes.iter().any(|&s| !(s > T::zero()) || !s.is_finite()) {
            return Err(Error::InvalidBaseline(
                "jump sizes must be finite and positive".into(),
            ));
        }
        Ok(Self::new_unchecked(jump_times, jump_sizes))
    }

    pub(crate) fn new_unchecked(jump_times: Vec<T>, jump_sizes: Vec<T>) -> Self {
        let mut cum = Vec::with_capacity(jump_sizes.len() + 1);
        let mut acc = T::zero();
        cum.push(acc);
        for &s in &jump_sizes {
            acc += s;
            cum.push(acc);
        }
        Self {
            jump_times,
            jump_sizes,
            cum,
        }
    }

    /// `Λ(t)`, right-continuous.
    pub fn evaluate(&self, t: T) -> T {
        self.cum[self.index_at(t)]
    }

    /// Number of jumps at or before `t`.
    #[inline]
    pub(crate) fn index_at(&self, t: T) -> usize {
        self.jump_times.partition_point(|&jt| jt <= t)
    }

    /// Jump size `λ(t) = ΔΛ(t)` when `t` is exactly a jump time.
    pub fn jump_size_at(&self, t: T) -> Option<T> {
        let idx = self.index_at(t);
        if idx > 0 && self.jump_times[idx - 1] == t {
            Some(self.jump_sizes[idx - 1])
        } else {
            None
        }
    }

    /// Position of `t` in the jump list, when `t` is exactly a jump time.
    pub fn jump_index_of(&self, t: T) -> Option<usize> {
        let idx = self.index_at(t);
        if idx > 0 && self.jump_times[idx - 1] == t {
            Some(idx - 1)
        } else {
            None
        }
    }

    pub fn n_jumps(&self) -> usize {
        self.jump_times.len()
    }

    pub fn jump_times(&self) -> &[T] {
        &self.jump_times
    }

    pub fn jump_sizes(&self) -> &[T] {
        &self.jump_sizes
    }

    /// Total mass `Λ(τ)`.
    pub fn total(&self) -> T {
        *self.cum.last().expect("cum is never empty")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluation_is_right_continuous() {
        let b = BaselineFunction::new(vec![1.0, 2.0, 4.0], vec![0.5, 0.25, 1.0]).unwrap();
        assert_eq!(b.evaluate(0.0), 0.0);
        assert_eq!(b.evaluate(0.99), 0.0);
        assert_eq!(b.evaluate(1.0), 0.5); // jump at t included
        assert_eq!(b.evaluate(1.5), 0.5);
        assert_eq!(b.evaluate(2.0), 0.75);
        assert_eq!(b.evaluate(100.0), 1.75);
        assert_eq!(b.total(), 1.75);
    }

    #[test]
    fn jump_lookup_requires_exact_time() {
        let b = BaselineFunction::new(vec![1.0, 2.0], vec![0.5, 0.25]).unwrap();
        assert_eq!(b.jump_size_at(2.0), Some(0.25));
        assert_eq!(b.jump_size_at(1.5), None);
        assert_eq!(b.jump_index_of(1.0), Some(0));
        assert_eq!(b.jump_index_of(0.5), None);
    }

    #[test]
    fn rejects_invalid_shapes() {
        assert!(BaselineFunction::new(vec![2.0, 1.0], vec![0.5, 0.5]).is_err());
        assert!(BaselineFunction::new(vec![1.0], vec![-0.5]).is_err());
        assert!(BaselineFunction::new(vec![0.0], vec![0.5]).is_err());
        assert!(BaselineFunction::new(vec![1.0], vec![0.5, 0.1]).is_err());
    }
}
