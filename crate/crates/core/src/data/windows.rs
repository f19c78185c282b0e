use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cloud::{InputWindow, PointCloud};
use crate::{Error, Result};

/// Input frames plus the frames held out between its middle two inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample {
    pub input_indices: Vec<usize>,
    pub held_out_indices: Vec<usize>,
    pub window: InputWindow,
    pub held_out: Vec<PointCloud>,
}

/// Sliding windows of `frames` inputs spaced `n_between + 1` apart.
///
/// `stride` defaults to the input spacing. A sequence too short for one
/// window gives an empty list.
pub fn make_windows(
    sequence: &[PointCloud],
    frames: usize,
    n_between: usize,
    stride: Option<usize>,
) -> Result<Vec<WindowSample>> {
    if frames < 2 {
        return Err(Error::InvalidInput("a window needs >= 2 frames".into()));
    }
    let interval = n_between + 1;
    let stride = stride.unwrap_or(interval);
    if stride == 0 {
        return Err(Error::InvalidInput("stride must be >= 1".into()));
    }
    let span = (frames - 1) * interval;
    let mut out = Vec::new();
    let mut start = 0;
    while start + span < sequence.len() {
        let input_indices: Vec<usize> = (0..frames).map(|k| start + k * interval).collect();
        let lo = input_indices[frames / 2 - 1];
        let held_out_indices: Vec<usize> = (lo + 1..lo + interval).collect();
        let window = InputWindow::new(input_indices.iter().map(|&i| sequence[i].clone()).collect())?;
        let held_out = held_out_indices.iter().map(|&i| sequence[i].clone()).collect();
        out.push(WindowSample {
            input_indices,
            held_out_indices,
            window,
            held_out,
        });
        start += stride;
    }
    Ok(out)
}

/// `n` indices into `0..len` drawn uniformly: without replacement when
/// `n <= len`, with replacement otherwise.
pub fn resample_indices(len: usize, n: usize, seed: u64) -> Result<Vec<usize>> {
    if len == 0 {
        return Err(Error::InvalidInput("cannot resample an empty cloud".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(if n <= len {
        sample(&mut rng, len, n).into_vec()
    } else {
        (0..n).map(|_| rng.random_range(0..len)).collect()
    })
}

/// The points at [`resample_indices`].
pub fn resample(cloud: &PointCloud, n: usize, seed: u64) -> Result<PointCloud> {
    let idx = resample_indices(cloud.len(), n, seed)?;
    Ok(PointCloud::new(idx.into_iter().map(|i| cloud.points[i]).collect(), cloud.time))
}
