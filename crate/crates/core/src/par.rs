//! Data-parallel node sweeps.
//!
//! Every stencil sweep and pointwise map in the crate goes through this
//! module. With the `parallel` feature enabled, sweeps over large grids are
//! split across the rayon pool; otherwise (or inside [`run_sequential`]) they
//! run as plain loops. Each output node is written by exactly one task and
//! reductions stay sequential, so results are bit-identical either way.

use std::cell::Cell;

/// Grids smaller than this many nodes are always swept sequentially.
pub const PARALLEL_THRESHOLD: usize = 4096;

thread_local! {
    static FORCE_SEQUENTIAL: Cell<bool> = const { Cell::new(false) };
}

/// Run `body` with every sweep on this thread forced onto the sequential path.
pub fn run_sequential<R>(body: impl FnOnce() -> R) -> R {
    let previous = FORCE_SEQUENTIAL.with(|flag| flag.replace(true));
    let out = body();
    FORCE_SEQUENTIAL.with(|flag| flag.set(previous));
    out
}

/// Worker threads available to sweeps: 1 without the `parallel` feature.
pub fn pool_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// True when a sweep of `nodes` nodes would be dispatched to the pool.
pub fn would_parallelize(nodes: usize) -> bool {
    cfg!(feature = "parallel") && nodes >= PARALLEL_THRESHOLD && !FORCE_SEQUENTIAL.with(Cell::get) && pool_threads() > 1
}

/// Fill `out` node by node: `out` is split into chunks of `width` values and
/// `kernel(node, chunk)` is called once per node.
pub fn fill_nodes<F>(out: &mut [f64], width: usize, kernel: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    debug_assert!(width > 0 && out.len() % width == 0);
    let nodes = out.len() / width;
    #[cfg(feature = "parallel")]
    {
        if would_parallelize(nodes) {
            use rayon::prelude::*;
            out.par_chunks_mut(width)
                .enumerate()
                .with_min_len(256)
                .for_each(|(node, chunk)| kernel(node, chunk));
            return;
        }
    }
    let _ = nodes;
    for (node, chunk) in out.chunks_mut(width).enumerate() {
        kernel(node, chunk);
    }
}

/// Map `f` over independent items, preserving order.
pub fn map_items<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if !FORCE_SEQUENTIAL.with(Cell::get) && items.len() > 1 && pool_threads() > 1 {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
    }
    items.iter().map(f).collect()
}

/// Cap the global pool size. Only the first call has any effect.
pub fn configure_threads(threads: Option<usize>) {
    #[cfg(feature = "parallel")]
    {
        if let Some(n) = threads.filter(|&n| n > 0) {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequential_and_parallel_fill_agree() {
        let n = 3 * PARALLEL_THRESHOLD;
        let kernel = |node: usize, out: &mut [f64]| {
            out[0] = (node as f64).sin();
            out[1] = (node as f64).cos();
        };
        let mut a = vec![0.0; 2 * n];
        let mut b = vec![0.0; 2 * n];
        fill_nodes(&mut a, 2, kernel);
        run_sequential(|| fill_nodes(&mut b, 2, kernel));
        assert_eq!(a, b);
    }

    #[test]
    fn sequential_scope_is_restored() {
        run_sequential(|| assert!(!would_parallelize(1 << 20)));
        assert_eq!(would_parallelize(1 << 20), cfg!(feature = "parallel") && pool_threads() > 1);
    }
}
