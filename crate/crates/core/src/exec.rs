//! Data-parallel helpers with a sequential fallback.
//!
//! Callers pick an [`Execution`] mode at runtime. When the crate is built
//! without the `parallel` feature, [`Execution::Parallel`] silently runs
//! sequentially. Results are always returned in index order.

use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this build can actually run work in parallel.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

/// Maps `f` over `0..n`, preserving order.
pub fn map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Execution::Parallel {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Applies `f` to every element of `items` in place and collects the
/// results in index order.
pub fn map_mut<T, R, F>(exec: Execution, items: &mut [T], f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(usize, &mut T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Execution::Parallel {
        return items.par_iter_mut().enumerate().map(|(i, x)| f(i, x)).collect();
    }
    let _ = exec;
    items.iter_mut().enumerate().map(|(i, x)| f(i, x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_on_order() {
        let a = map_indexed(Execution::Sequential, 1000, |i| i * i);
        let b = map_indexed(Execution::Parallel, 1000, |i| i * i);
        assert_eq!(a, b);
    }

    #[test]
    fn map_mut_touches_every_item() {
        let mut v = vec![0usize; 257];
        let out = map_mut(Execution::Parallel, &mut v, |i, x| {
            *x = i + 1;
            i
        });
        assert!(v.iter().enumerate().all(|(i, &x)| x == i + 1));
        assert_eq!(out, (0..257).collect::<Vec<_>>());
    }
}
