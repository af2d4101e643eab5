use super::Trajectory;
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::VecDeque;

/// Bounded FIFO store of past trajectories.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryBuffer {
    capacity: usize,
    entries: VecDeque<Trajectory>,
}

impl TrajectoryBuffer {
    pub fn new(capacity: usize) -> Self {
        TrajectoryBuffer { capacity: capacity.max(1), entries: VecDeque::new() }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, traj: Trajectory) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(traj);
    }

    pub fn successes(&self) -> impl Iterator<Item = &Trajectory> {
        self.entries.iter().filter(|t| t.success)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Trajectory> {
        self.entries.iter().filter(|t| !t.success)
    }

    pub fn n_successes(&self) -> usize {
        self.successes().count()
    }

    pub fn n_failures(&self) -> usize {
        self.len() - self.n_successes()
    }

    /// `(preferred, other)` with `other` cut to the preferred length.
    ///
    /// A success is paired with a failure at least as long when one exists;
    /// otherwise the shorter of two successes of different lengths is
    /// preferred.
    pub fn sample_preference_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Trajectory, Trajectory)> {
        let successes: Vec<&Trajectory> = self.successes().filter(|t| !t.is_empty()).collect();
        let failures: Vec<&Trajectory> = self.failures().collect();

        let with_failure: Vec<&Trajectory> =
            successes.iter().copied().filter(|s| failures.iter().any(|f| f.len() >= s.len())).collect();
        if let Some(s) = with_failure.choose(rng) {
            let long: Vec<&Trajectory> = failures.iter().copied().filter(|f| f.len() >= s.len()).collect();
            let f = long.choose(rng).expect("nonempty by construction");
            return Ok(((*s).clone(), f.truncated(s.len())));
        }

        let comparable: Vec<&Trajectory> =
            successes.iter().copied().filter(|s| successes.iter().any(|o| o.len() != s.len())).collect();
        let Some(a) = comparable.choose(rng) else {
            return Err(Error::NoPair);
        };
        let others: Vec<&Trajectory> = successes.iter().copied().filter(|o| o.len() != a.len()).collect();
        let b = others.choose(rng).expect("nonempty by construction");
        let (short, long) = if a.len() < b.len() { (a, b) } else { (b, a) };
        Ok(((*short).clone(), long.truncated(short.len())))
    }
}
