//! Multiply-add accounting for the scoring kernels.
//!
//! Every dense or sparse kernel in [`crate::linalg`] reports the number of
//! multiply-adds it performs to a per-thread counter. Tests use this to check
//! the cost of ranking a query against its documented complexity.

use std::cell::Cell;

thread_local! {
    static MULADDS: Cell<u64> = const { Cell::new(0) };
}

#[inline]
pub(crate) fn add(n: usize) {
    MULADDS.with(|c| c.set(c.get() + n as u64));
}

/// Reset this thread's counter to zero.
pub fn reset() {
    MULADDS.with(|c| c.set(0));
}

/// Multiply-adds performed on this thread since the last [`reset`].
pub fn get() -> u64 {
    MULADDS.with(|c| c.get())
}

/// Run `f` and return its result with the number of multiply-adds it used.
pub fn measure<T>(f: impl FnOnce() -> T) -> (T, u64) {
    let before = get();
    let out = f();
    (out, get() - before)
}
