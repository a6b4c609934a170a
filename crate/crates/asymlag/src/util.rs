//! Shared numeric helpers: quadrature, reductions, and a small deterministic
//! worker pool.

/// Trapezoidal quadrature of nodewise samples over a uniform grid.
///
/// Summation runs left to right so results are reproducible bit for bit.
pub(crate) fn trapezoid(step: f64, values: &[f64]) -> f64 {
    let n = values.len();
    debug_assert!(n >= 2);
    let mut acc = 0.5 * values[0];
    for v in &values[1..n - 1] {
        acc += v;
    }
    acc += 0.5 * values[n - 1];
    step * acc
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// Worker-thread cap taken from `ASYMLAG_THREADS`; defaults to 1.
///
/// Values that fail to parse, or 0, fall back to 1.
pub fn thread_cap() -> usize {
    std::env::var("ASYMLAG_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

/// Evaluates `f(0..len)` into a vector, splitting the index range over at most
/// `thread_cap()` scoped threads.
///
/// Each index is computed independently and written to its own slot, so the
/// output is bit-identical to the sequential left-to-right evaluation
/// regardless of the cap.
pub(crate) fn indexed_map<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = thread_cap().min(len.max(1));
    if workers <= 1 || len < 2 {
        return (0..len).map(f).collect();
    }
    let mut out: Vec<Option<T>> = Vec::with_capacity(len);
    out.resize_with(len, || None);
    let chunk = len.div_ceil(workers);
    std::thread::scope(|scope| {
        for (w, slots) in out.chunks_mut(chunk).enumerate() {
            let f = &f;
            scope.spawn(move || {
                let base = w * chunk;
                for (i, slot) in slots.iter_mut().enumerate() {
                    *slot = Some(f(base + i));
                }
            });
        }
    });
    out.into_iter().map(|s| s.expect("worker filled slot")).collect()
}
