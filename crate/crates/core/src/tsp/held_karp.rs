use alloc::format;
use alloc::vec;

use crate::error::{Error, Result};
use crate::tsp::TspInstance;

pub const HELD_KARP_MAX_CITIES: usize = 14;

/// Exact optimal tour length by dynamic programming over subsets.
///
/// Larger instances get a capacity error; their reference optimum must come
/// from the consensus protocol (see [`TspProblem::certify`](super::TspProblem::certify)).
pub fn held_karp_optimum(instance: &TspInstance) -> Result<i64> {
    let n = instance.len();
    if n > HELD_KARP_MAX_CITIES {
        return Err(Error::Capacity(format!(
            "exact optimum supports at most {HELD_KARP_MAX_CITIES} cities, got {n}; \
             use a consensus reference optimum instead"
        )));
    }
    // city 0 is the fixed start; subsets range over cities 1..n
    let m = n - 1;
    let full = (1usize << m) - 1;
    let mut dist = vec![0i64; n * n];
    for a in 0..n {
        for b in 0..n {
            dist[a * n + b] = instance.dist(a, b);
        }
    }
    // best[mask * m + j]: shortest path from 0 through `mask`, ending at j+1
    let mut best = vec![i64::MAX; (full + 1) * m];
    for j in 0..m {
        best[(1 << j) * m + j] = dist[j + 1];
    }
    for mask in 1..=full {
        for j in 0..m {
            if mask & (1 << j) == 0 {
                continue;
            }
            let here = best[mask * m + j];
            if here == i64::MAX {
                continue;
            }
            for k in 0..m {
                if mask & (1 << k) != 0 {
                    continue;
                }
                let next = mask | (1 << k);
                let cand = here + dist[(j + 1) * n + k + 1];
                if cand < best[next * m + k] {
                    best[next * m + k] = cand;
                }
            }
        }
    }
    Ok((0..m)
        .map(|j| best[full * m + j] + dist[(j + 1) * n])
        .min()
        .expect("n >= 3"))
}
