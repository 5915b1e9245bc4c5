//! Sequential or data-parallel evaluation of independent work items.

/// How independent items (simulations, objective evaluations, fits) are run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for Execution {
    #[cfg(feature = "parallel")]
    fn default() -> Self {
        Self::Parallel
    }

    #[cfg(not(feature = "parallel"))]
    fn default() -> Self {
        Self::Sequential
    }
}

impl Execution {
    /// Applies `f` to each item; output order follows input order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Self::Sequential => items.iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Self::Parallel => {
                use rayon::prelude::*;
                items.par_iter().map(f).collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_keep_order() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = Execution::Sequential.map(&items, |x| x * x);
        let dflt = Execution::default().map(&items, |x| x * x);
        assert_eq!(seq, dflt);
        assert_eq!(seq[999], 999 * 999);
    }
}
