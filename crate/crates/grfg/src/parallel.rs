//! Deterministic fan-out over an index range.
//!
//! Results are written into a slot per index, so any worker count yields
//! bitwise the same output as the serial loop. Callers must make `f(i)`
//! independent of evaluation order (each task derives its own rng seed).

/// Map `f` over `0..n`, splitting the range across at most `threads` scoped
/// worker threads. `threads <= 1` runs serially.
pub fn par_map<T, F>(n: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    if threads <= 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    let workers = threads.min(n);
    let chunk = n.div_ceil(workers);
    let mut slots: Vec<Option<T>> = (0..n).map(|_| None).collect();
    let f = &f;
    std::thread::scope(|scope| {
        for (c, piece) in slots.chunks_mut(chunk).enumerate() {
            scope.spawn(move || {
                let base = c * chunk;
                for (off, slot) in piece.iter_mut().enumerate() {
                    *slot = Some(f(base + off));
                }
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.expect("every slot filled"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_serial() {
        let serial = par_map(103, 1, |i| i * i);
        for threads in [2, 3, 8, 200] {
            assert_eq!(par_map(103, threads, |i| i * i), serial);
        }
    }

    #[test]
    fn empty_and_single() {
        assert_eq!(par_map(0, 4, |i| i), Vec::<usize>::new());
        assert_eq!(par_map(1, 4, |i| i + 1), vec![1]);
    }
}
