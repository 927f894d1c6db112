//! Sequential/parallel execution of independent per-index work items.
//!
//! Every parallel phase of the engine is a pure map over an index range
//! with per-index derived seeds, so results are positionally assembled
//! and identical for any worker count.

use rayon::prelude::*;

use crate::error::Result;

/// Execution mode for embarrassingly parallel phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Exec {
    /// Maps `f` over `0..n`, preserving index order in the output.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Exec::Sequential => (0..n).map(f).collect(),
            Exec::Parallel => (0..n).into_par_iter().map(f).collect(),
        }
    }

    /// Fallible variant of [`Exec::map`]; the first error aborts the map.
    pub fn try_map<T, F>(self, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send,
    {
        match self {
            Exec::Sequential => (0..n).map(f).collect(),
            Exec::Parallel => (0..n).into_par_iter().map(f).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_map_preserves_index_order() {
        let seq = Exec::Sequential.map(100, |i| i * i);
        let par = Exec::Parallel.map(100, |i| i * i);
        assert_eq!(seq, par);
    }

    #[test]
    fn try_map_propagates_errors() {
        let r = Exec::Parallel.try_map(10, |i| {
            if i == 7 {
                Err(crate::error::RomcError::InvalidArgument("boom".into()))
            } else {
                Ok(i)
            }
        });
        assert!(r.is_err());
    }
}
