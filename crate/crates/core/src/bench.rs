//! Timing helpers.

/// Monotonic stopwatch. On `wasm32` there is no clock and it reads zero.
pub struct Clock(#[cfg(not(target_arch = "wasm32"))] std::time::Instant);

impl Clock {
    pub fn start() -> Self {
        #[cfg(not(target_arch = "wasm32"))]
        {
            Clock(std::time::Instant::now())
        }
        #[cfg(target_arch = "wasm32")]
        {
            Clock()
        }
    }

    pub fn elapsed_ms(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.0.elapsed().as_secs_f64() * 1e3
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of nothing");
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Runs `f` `warmup` times untimed, then `runs` times, and returns the median
/// of the timed runs in milliseconds. `f` reports the time it wants counted.
pub fn median_ms<E>(warmup: usize, runs: usize, mut f: impl FnMut() -> Result<f64, E>) -> Result<f64, E> {
    for _ in 0..warmup {
        f()?;
    }
    let mut times = (0..runs.max(1)).map(|_| f()).collect::<Result<Vec<_>, E>>()?;
    Ok(median(&mut times))
}
